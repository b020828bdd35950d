//! Mini-batch Adam training of a single module, stage-wise residual training
//! of an ensemble, and the single-stage baseline with a matched epoch budget.
//!
//! Stage `s` sees features `z⁽¹⁾ = x` and `z⁽ˢ⁾ = [x, M_{s−1}(z⁽ˢ⁻¹⁾)]` and is
//! fit to `r⁽ˢ⁾ = y − F_{s−1}(x)`, where `F_s = Σ_{t≤s} M_t(z⁽ᵗ⁾)`. Earlier
//! modules are frozen once their stage ends.
//!
//! All randomness is drawn from seeds derived from `TrainConfig::seed` with
//! [`stage_seeds`], so a run is reproducible bit for bit.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::CircuitConfig;
use crate::datagen::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::{ModuleGradient, QuantumModule};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs_per_stage: usize,
    pub n_stages: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 0.005,
            epochs_per_stage: 25,
            n_stages: 4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("{v} is not positive")))
            }
        };
        positive("batch_size", self.batch_size as f64)?;
        positive("learning_rate", self.learning_rate)?;
        positive("epochs_per_stage", self.epochs_per_stage as f64)?;
        positive("stages", self.n_stages as f64)?;
        positive("adam_beta1", self.adam_beta1)?;
        positive("adam_beta2", self.adam_beta2)?;
        positive("adam_epsilon", self.adam_epsilon)?;
        if self.adam_beta1 >= 1.0 {
            return Err(Error::config("adam_beta1", "must be below 1"));
        }
        if self.adam_beta2 >= 1.0 {
            return Err(Error::config("adam_beta2", "must be below 1"));
        }
        Ok(())
    }
}

/// Seeds for one stage: module initialization and per-epoch shuffling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageSeeds {
    pub init: u64,
    pub shuffle: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `stream` into `seed` with SplitMix64; distinct streams give
/// statistically independent generator seeds.
pub fn derive_seed(seed: u64, stream: &[u64]) -> u64 {
    stream
        .iter()
        .fold(splitmix64(seed), |acc, s| splitmix64(acc ^ splitmix64(*s)))
}

/// Stage numbering starts at 1. The baseline reuses stage 1's seeds.
pub fn stage_seeds(seed: u64, stage: usize) -> StageSeeds {
    StageSeeds {
        init: derive_seed(seed, &[stage as u64, 1]),
        shuffle: derive_seed(seed, &[stage as u64, 2]),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            step_count: 0,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], config: &TrainConfig) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::Structural(format!(
                "Adam state for {} parameters got {} parameters and {} gradients",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step_count += 1;
        let (b1, b2) = (config.adam_beta1, config.adam_beta2);
        let t = self.step_count as i32;
        let correction1 = 1.0 - b1.powi(t);
        let correction2 = 1.0 - b2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_epsilon);
        }
        Ok(())
    }
}

pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], config: &TrainConfig) -> Result<()> {
    state.step(params, grads, config)
}

/// Mean squared error.
pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Input("mse of an empty set".into()));
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Row-major feature matrix with one or two columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn from_column(xs: &[f64]) -> Self {
        Self {
            dim: 1,
            data: xs.to_vec(),
        }
    }

    /// Two columns `[x, previous]`.
    pub fn with_previous(xs: &[f64], previous: &[f64]) -> Result<Self> {
        if xs.len() != previous.len() {
            return Err(Error::Structural(format!(
                "{} inputs but {} previous-stage outputs",
                xs.len(),
                previous.len()
            )));
        }
        let data = xs.iter().zip(previous).flat_map(|(x, p)| [*x, *p]).collect();
        Ok(Self { dim: 2, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Column `c` as a vector.
    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows().map(|r| r[c]).collect()
    }
}

/// Predictions of one module for every row.
pub fn predict_batch(module: &QuantumModule, features: &Features) -> Result<Vec<f64>> {
    let eval = module.evaluator()?;
    features.rows().map(|row| eval.predict(row)).collect()
}

/// Per-epoch record of one module's training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// Full-set training MSE before the first update.
    pub initial_train_mse: f64,
    /// Full-set training MSE after each epoch.
    pub train_mse: Vec<f64>,
    /// Full-set validation MSE after each epoch; NaN when no validation data was given.
    pub val_mse: Vec<f64>,
    pub optimizer_steps: usize,
}

fn evaluate(module: &QuantumModule, features: &Features, targets: &[f64]) -> Result<f64> {
    if targets.is_empty() {
        return Ok(f64::NAN);
    }
    mse(&predict_batch(module, features)?, targets)
}

/// Batch-mean gradient over `indices`. Per-sample contributions are summed in
/// index order, so the result does not depend on evaluation scheduling.
fn batch_gradient(module: &QuantumModule, features: &Features, targets: &[f64], indices: &[usize]) -> Result<ModuleGradient> {
    let eval = module.evaluator()?;
    let mut total = ModuleGradient::zeros_like(module);
    for &i in indices {
        let (_, g) = eval.forward_backward(features.row(i), targets[i])?;
        total.add_assign(&g);
    }
    total.scale(1.0 / indices.len() as f64);
    Ok(total)
}

/// Trains `module` for `config.epochs_per_stage` epochs of shuffled mini-batch Adam.
///
/// Each epoch reshuffles the training indices with a generator seeded once
/// from `config.seed`; the final batch of an epoch may be short. No early
/// stopping: validation is only logged.
pub fn train_module(
    module: QuantumModule,
    inputs: &Features,
    targets: &[f64],
    val_inputs: &Features,
    val_targets: &[f64],
    config: &TrainConfig,
) -> Result<(QuantumModule, EpochLog)> {
    train_for_epochs(module, inputs, targets, val_inputs, val_targets, config, config.epochs_per_stage)
}

fn train_for_epochs(
    mut module: QuantumModule,
    inputs: &Features,
    targets: &[f64],
    val_inputs: &Features,
    val_targets: &[f64],
    config: &TrainConfig,
    epochs: usize,
) -> Result<(QuantumModule, EpochLog)> {
    config.validate()?;
    module.validate()?;
    if inputs.is_empty() {
        return Err(Error::Input("empty training set".into()));
    }
    for (what, f, t) in [("training", inputs, targets), ("validation", val_inputs, val_targets)] {
        if f.len() != t.len() {
            return Err(Error::Input(format!(
                "{} {what} rows but {} targets",
                f.len(),
                t.len()
            )));
        }
        if !f.is_empty() && f.dim() != module.config.input_dim {
            return Err(Error::Input(format!(
                "{what} features have {} columns, module expects {}",
                f.dim(),
                module.config.input_dim
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(module.n_trainable());
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut log = EpochLog {
        initial_train_mse: evaluate(&module, inputs, targets)?,
        train_mse: Vec::with_capacity(epochs),
        val_mse: Vec::with_capacity(epochs),
        optimizer_steps: 0,
    };
    let mut params = module.to_flat();

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let grad = batch_gradient(&module, inputs, targets, batch)?;
            adam.step(&mut params, &grad.to_flat(), config)?;
            module.set_flat(&params)?;
            log.optimizer_steps += 1;
        }
        log.train_mse.push(evaluate(&module, inputs, targets)?);
        log.val_mse.push(evaluate(&module, val_inputs, val_targets)?);
    }
    module.validate()?;
    Ok((module, log))
}

/// Modules of a residual run, in stage order.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualEnsemble {
    pub modules: Vec<QuantumModule>,
}

impl ResidualEnsemble {
    pub fn new(modules: Vec<QuantumModule>) -> Result<Self> {
        let ensemble = Self { modules };
        ensemble.validate()?;
        Ok(ensemble)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.modules.first() else {
            return Ok(());
        };
        for (t, m) in self.modules.iter().enumerate() {
            m.validate()?;
            let want = if t == 0 { 1 } else { 2 };
            if m.config.input_dim != want {
                return Err(Error::Structural(format!(
                    "stage {} module has input_dim {}, expected {want}",
                    t + 1,
                    m.config.input_dim
                )));
            }
            let (a, b) = (m.config.with_input_dim(1), first.config);
            if a != b {
                return Err(Error::Structural(format!(
                    "stage {} circuit structure differs from stage 1",
                    t + 1
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    /// `outputs[t][i] = o_{t+1}(x_i)`, each module evaluated once per input.
    pub fn stage_outputs(&self, xs: &[f64]) -> Result<Vec<Vec<f64>>> {
        chain_outputs(&self.modules, xs)
    }

    /// `cumulative[s][i] = F_{s+1}(x_i)`.
    pub fn cumulative_predictions(&self, xs: &[f64]) -> Result<Vec<Vec<f64>>> {
        let outputs = self.stage_outputs(xs)?;
        let mut acc = vec![0.0; xs.len()];
        Ok(outputs
            .into_iter()
            .map(|o| {
                for (a, v) in acc.iter_mut().zip(&o) {
                    *a += v;
                }
                acc.clone()
            })
            .collect())
    }

    pub fn predict(&self, xs: &[f64]) -> Result<Vec<f64>> {
        ensemble_predict(self, xs)
    }
}

fn chain_outputs(modules: &[QuantumModule], xs: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(modules.len());
    for module in modules {
        let features = match outputs.last() {
            None => Features::from_column(xs),
            Some(prev) => Features::with_previous(xs, prev)?,
        };
        outputs.push(predict_batch(module, &features)?);
    }
    Ok(outputs)
}

/// Input features for stage `stage` (1-based), chained through the first
/// `stage − 1` modules.
pub fn build_stage_features(modules: &[QuantumModule], stage: usize, xs: &[f64]) -> Result<Features> {
    if stage == 0 {
        return Err(Error::Structural("stages are numbered from 1".into()));
    }
    if modules.len() < stage - 1 {
        return Err(Error::Structural(format!(
            "stage {stage} features need {} earlier modules, {} available",
            stage - 1,
            modules.len()
        )));
    }
    if stage == 1 {
        return Ok(Features::from_column(xs));
    }
    let outputs = chain_outputs(&modules[..stage - 1], xs)?;
    Features::with_previous(xs, outputs.last().expect("stage ≥ 2"))
}

/// `F_S(x) = Σ_t o_t(x)`.
pub fn ensemble_predict(ensemble: &ResidualEnsemble, xs: &[f64]) -> Result<Vec<f64>> {
    if ensemble.is_empty() {
        return Err(Error::Structural("empty ensemble".into()));
    }
    let outputs = ensemble.stage_outputs(xs)?;
    let mut total = vec![0.0; xs.len()];
    for o in &outputs {
        for (t, v) in total.iter_mut().zip(o) {
            *t += v;
        }
    }
    Ok(total)
}

/// Log of one stage of a residual run (or of the whole baseline run).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub stage: usize,
    pub epochs: EpochLog,
    /// Mean squared residual target at the start of the stage, i.e. the
    /// training MSE of the frozen `F_{s−1}`.
    pub residual_mse: f64,
    /// Test MSE of the cumulative ensemble `F_s`.
    pub test_mse: f64,
}

/// Per-split `(x, y)` columns pulled out of a [`Dataset`].
struct Splits {
    x: [Vec<f64>; 3],
    y: [Vec<f64>; 3],
}

const TRAIN: usize = 0;
const VAL: usize = 1;
const TEST: usize = 2;

impl Splits {
    fn new(dataset: &Dataset) -> Result<Self> {
        let (xt, yt) = dataset.split(Split::Train);
        let (xv, yv) = dataset.split(Split::Val);
        let (xs, ys) = dataset.split(Split::Test);
        for (name, x) in [("train", &xt), ("val", &xv), ("test", &xs)] {
            if x.is_empty() {
                return Err(Error::Input(format!("dataset has no {name} samples")));
            }
        }
        Ok(Self {
            x: [xt, xv, xs],
            y: [yt, yv, ys],
        })
    }
}

/// Multi-stage residual training.
pub fn train_residual(
    dataset: &Dataset,
    config: &TrainConfig,
    circuit: &CircuitConfig,
) -> Result<(ResidualEnsemble, Vec<StageLog>)> {
    config.validate()?;
    circuit.with_input_dim(1).validate()?;
    let data = Splits::new(dataset)?;

    let mut modules = Vec::with_capacity(config.n_stages);
    let mut logs = Vec::with_capacity(config.n_stages);
    // previous-stage outputs and cumulative predictions, per split
    let mut previous: Option<[Vec<f64>; 3]> = None;
    let mut cumulative: [Vec<f64>; 3] = std::array::from_fn(|k| vec![0.0; data.x[k].len()]);

    for stage in 1..=config.n_stages {
        let features: [Features; 3] = match &previous {
            None => std::array::from_fn(|k| Features::from_column(&data.x[k])),
            Some(prev) => [
                Features::with_previous(&data.x[TRAIN], &prev[TRAIN])?,
                Features::with_previous(&data.x[VAL], &prev[VAL])?,
                Features::with_previous(&data.x[TEST], &prev[TEST])?,
            ],
        };
        let residual = |k: usize| -> Vec<f64> {
            data.y[k].iter().zip(&cumulative[k]).map(|(y, f)| y - f).collect()
        };
        let (train_targets, val_targets) = (residual(TRAIN), residual(VAL));
        let residual_mse = train_targets.iter().map(|r| r * r).sum::<f64>() / train_targets.len() as f64;

        let seeds = stage_seeds(config.seed, stage);
        let stage_circuit = circuit.with_input_dim(if stage == 1 { 1 } else { 2 });
        let init = QuantumModule::random(stage_circuit, &mut ChaCha8Rng::seed_from_u64(seeds.init))?;
        let stage_config = TrainConfig {
            seed: seeds.shuffle,
            ..*config
        };
        let (module, epochs) = train_module(
            init,
            &features[TRAIN],
            &train_targets,
            &features[VAL],
            &val_targets,
            &stage_config,
        )?;

        let outputs: [Vec<f64>; 3] = [
            predict_batch(&module, &features[TRAIN])?,
            predict_batch(&module, &features[VAL])?,
            predict_batch(&module, &features[TEST])?,
        ];
        for (acc, out) in cumulative.iter_mut().zip(&outputs) {
            for (a, o) in acc.iter_mut().zip(out) {
                *a += o;
            }
        }
        let test_mse = mse(&cumulative[TEST], &data.y[TEST])?;
        logs.push(StageLog {
            stage,
            epochs,
            residual_mse,
            test_mse,
        });
        modules.push(module);
        previous = Some(outputs);
    }

    Ok((ResidualEnsemble::new(modules)?, logs))
}

/// One module trained for `n_stages × epochs_per_stage` epochs with stage 1's seeds.
pub fn train_baseline(
    dataset: &Dataset,
    config: &TrainConfig,
    circuit: &CircuitConfig,
) -> Result<(QuantumModule, StageLog)> {
    config.validate()?;
    let circuit = circuit.with_input_dim(1);
    circuit.validate()?;
    let data = Splits::new(dataset)?;
    let seeds = stage_seeds(config.seed, 1);
    let init = QuantumModule::random(circuit, &mut ChaCha8Rng::seed_from_u64(seeds.init))?;
    let run_config = TrainConfig {
        seed: seeds.shuffle,
        ..*config
    };
    let features: [Features; 3] = std::array::from_fn(|k| Features::from_column(&data.x[k]));
    let (module, epochs) = train_for_epochs(
        init,
        &features[TRAIN],
        &data.y[TRAIN],
        &features[VAL],
        &data.y[VAL],
        &run_config,
        config.n_stages * config.epochs_per_stage,
    )?;
    let test_mse = mse(&predict_batch(&module, &features[TEST])?, &data.y[TEST])?;
    let residual_mse = data.y[TRAIN].iter().map(|y| y * y).sum::<f64>() / data.y[TRAIN].len() as f64;
    Ok((
        module,
        StageLog {
            stage: 1,
            epochs,
            residual_mse,
            test_mse,
        },
    ))
}
