//! Synthetic 1-D regression data built from spatially localized sinusoids.
//!
//! The target is `y(x) = Σ_k a_k · e_k(x; c_k, w_k) · sin(2π ω_k x) + η`, where
//! each envelope `e_k` peaks at 1 on its centre.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt_f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    Gaussian,
    Lorentzian,
    Triangular,
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Envelope::Gaussian => "gaussian",
            Envelope::Lorentzian => "lorentzian",
            Envelope::Triangular => "triangular",
        })
    }
}

impl FromStr for Envelope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Envelope::Gaussian),
            "lorentzian" => Ok(Envelope::Lorentzian),
            "triangular" => Ok(Envelope::Triangular),
            other => Err(Error::Spec(format!("unknown envelope `{other}`"))),
        }
    }
}

/// Envelope weight in `[0, 1]`, equal to 1 at `x = center`.
pub fn envelope_value(kind: Envelope, x: f64, center: f64, width: f64) -> Result<f64> {
    if width.is_nan() || width <= 0.0 {
        return Err(Error::Spec(format!("envelope width {width} is not positive")));
    }
    Ok(envelope_unchecked(kind, x, center, width))
}

fn envelope_unchecked(kind: Envelope, x: f64, center: f64, width: f64) -> f64 {
    let u = (x - center) / width;
    match kind {
        Envelope::Gaussian => (-0.5 * u * u).exp(),
        Envelope::Lorentzian => 1.0 / (1.0 + u * u),
        Envelope::Triangular => (1.0 - u.abs()).max(0.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyComponent {
    /// Carrier frequency in Hz (cycles per unit of x).
    pub omega: f64,
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    pub envelope: Envelope,
}

impl FrequencyComponent {
    pub fn validate(&self) -> Result<()> {
        if !self.width.is_finite() || self.width <= 0.0 {
            return Err(Error::Spec(format!("component width {} is not positive", self.width)));
        }
        if !self.omega.is_finite() || self.omega < 0.0 {
            return Err(Error::Spec(format!("component frequency {} is negative", self.omega)));
        }
        if !self.center.is_finite() || !self.amplitude.is_finite() {
            return Err(Error::Spec("component centre and amplitude must be finite".into()));
        }
        Ok(())
    }

    /// Amplitude-weighted envelope `a_k · e_k(x)`.
    pub fn weight(&self, x: f64) -> f64 {
        self.amplitude * envelope_unchecked(self.envelope, x, self.center, self.width)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.weight(x) * (2.0 * PI * self.omega * x).sin()
    }
}

/// The five-component default table: 0.5 Hz Gaussian, 3 Hz Lorentzian,
/// 7 Hz triangular, and narrow Gaussians at 12 Hz and 20 Hz.
pub fn default_components() -> Vec<FrequencyComponent> {
    const TABLE: [(f64, f64, f64, Envelope); 5] = [
        (0.5, 1.0, 0.8, Envelope::Gaussian),
        (3.0, 0.4, 0.25, Envelope::Lorentzian),
        (7.0, 1.0, 0.5, Envelope::Triangular),
        (12.0, 1.5, 0.12, Envelope::Gaussian),
        (20.0, 1.8, 0.08, Envelope::Gaussian),
    ];
    TABLE
        .iter()
        .map(|&(omega, center, width, envelope)| FrequencyComponent {
            omega,
            center,
            width,
            amplitude: 1.0,
            envelope,
        })
        .collect()
}

/// Noise-free target `Σ_k a_k e_k(x) sin(2π ω_k x)`.
pub fn target_function(components: &[FrequencyComponent], x: f64) -> f64 {
    components.iter().map(|c| c.value(x)).sum()
}

/// Index of the component with the largest `a_k · e_k(x)`; ties go to the lowest index.
pub fn dominant_component(components: &[FrequencyComponent], x: f64) -> Result<usize> {
    if components.is_empty() {
        return Err(Error::Spec("no frequency components".into()));
    }
    let mut best = 0;
    let mut best_weight = components[0].weight(x);
    for (k, c) in components.iter().enumerate().skip(1) {
        let w = c.weight(x);
        if w > best_weight {
            best = k;
            best_weight = w;
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::parse("split", format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub components: Vec<FrequencyComponent>,
    pub n_total: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub noise_sigma: f64,
    /// `(train, val, test)`.
    pub split_fractions: (f64, f64, f64),
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            components: default_components(),
            n_total: 5000,
            x_min: 0.0,
            x_max: 2.0,
            noise_sigma: 0.0,
            split_fractions: (0.7, 0.15, 0.15),
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Spec("no frequency components".into()));
        }
        for c in &self.components {
            c.validate()?;
        }
        if self.n_total == 0 {
            return Err(Error::Spec("n_total must be positive".into()));
        }
        if !self.x_min.is_finite() || !self.x_max.is_finite() || self.x_min >= self.x_max {
            return Err(Error::Spec(format!(
                "domain [{}, {}] is empty",
                self.x_min, self.x_max
            )));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::Spec("noise_sigma must be non-negative".into()));
        }
        let (a, b, c) = self.split_fractions;
        if !(a > 0.0 && b > 0.0 && c > 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(Error::Spec(format!(
                "split fractions ({a}, {b}, {c}) must be positive and sum to 1"
            )));
        }
        Ok(())
    }

    /// `(train, val, test)` counts: validation and test are rounded, training takes the rest.
    pub fn split_sizes(&self) -> (usize, usize, usize) {
        let n = self.n_total as f64;
        let n_val = (self.split_fractions.1 * n).round() as usize;
        let n_test = (self.split_fractions.2 * n).round() as usize;
        let n_val = n_val.min(self.n_total);
        let n_test = n_test.min(self.n_total - n_val);
        (self.n_total - n_val - n_test, n_val, n_test)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: f64,
    pub y: f64,
    pub split: Split,
    pub dominant: usize,
}

/// Samples in generation order, each tagged with its split.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
}

/// Draws `n_total` inputs uniformly on `[x_min, x_max]`, adds `N(0, σ²)` noise
/// and assigns splits by a seeded permutation (first the validation block,
/// then test, the remainder train).
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let xs: Vec<f64> = (0..spec.n_total)
        .map(|_| rng.random_range(spec.x_min..=spec.x_max))
        .collect();
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Spec(e.to_string()))?;
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let eta: f64 = noise.sample(&mut rng);
            if spec.noise_sigma == 0.0 {
                target_function(&spec.components, x)
            } else {
                target_function(&spec.components, x) + eta
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..spec.n_total).collect();
    order.shuffle(&mut rng);
    let (_, n_val, n_test) = spec.split_sizes();
    let mut splits = vec![Split::Train; spec.n_total];
    for &i in &order[..n_val] {
        splits[i] = Split::Val;
    }
    for &i in &order[n_val..n_val + n_test] {
        splits[i] = Split::Test;
    }

    let samples = xs
        .into_iter()
        .zip(ys)
        .zip(splits)
        .map(|((x, y), split)| {
            Ok(LabeledSample {
                x,
                y,
                split,
                dominant: dominant_component(&spec.components, x)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Dataset { samples })
}

const CSV_HEADER: &str = "x,y,split,dominant";

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(x, y)` columns of one split, in generation order.
    pub fn split(&self, split: Split) -> (Vec<f64>, Vec<f64>) {
        self.samples
            .iter()
            .filter(|s| s.split == split)
            .map(|s| (s.x, s.y))
            .unzip()
    }

    pub fn count(&self, split: Split) -> usize {
        self.samples.iter().filter(|s| s.split == split).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(48 * (self.samples.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(s.x),
                fmt_f64(s.y),
                s.split.as_str(),
                s.dominant
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            other => {
                return Err(Error::parse(
                    "dataset",
                    format!("expected header `{CSV_HEADER}`, found {other:?}"),
                ))
            }
        }
        let samples = lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                let row = i + 2;
                let fields: Vec<&str> = line.trim().split(',').collect();
                if fields.len() != 4 {
                    return Err(Error::parse("dataset", format!("line {row}: expected 4 fields")));
                }
                let num = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|e| Error::parse("dataset", format!("line {row}: {e}")))
                };
                Ok(LabeledSample {
                    x: num(fields[0])?,
                    y: num(fields[1])?,
                    split: fields[2].parse()?,
                    dominant: fields[3]
                        .parse()
                        .map_err(|e| Error::parse("dataset", format!("line {row}: {e}")))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { samples })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    const KINDS: [Envelope; 3] = [Envelope::Gaussian, Envelope::Lorentzian, Envelope::Triangular];

    #[test]
    fn envelope_examples() {
        for kind in KINDS {
            assert_eq!(envelope_value(kind, 0.7, 0.7, 0.3).unwrap(), 1.0);
        }
        assert_eq!(envelope_value(Envelope::Triangular, 1.0, 0.7, 0.3).unwrap(), 0.0);
        assert_eq!(envelope_value(Envelope::Triangular, -2.0, 0.7, 0.3).unwrap(), 0.0);
        assert_eq!(envelope_value(Envelope::Lorentzian, 1.5, 1.0, 0.5).unwrap(), 0.5);
        assert_eq!(envelope_value(Envelope::Lorentzian, 0.5, 1.0, 0.5).unwrap(), 0.5);
        let g = envelope_value(Envelope::Gaussian, 1.2, 1.0, 0.2).unwrap();
        assert!((g - (-0.5f64).exp()).abs() < 1e-15);
        assert!(envelope_value(Envelope::Gaussian, 0.0, 0.0, 0.0).is_err());
        assert!(envelope_value(Envelope::Gaussian, 0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn target_examples() {
        assert_eq!(target_function(&[], 0.3), 0.0);
        let c = FrequencyComponent {
            omega: 3.0,
            center: 0.5,
            width: 1.0,
            amplitude: 2.0,
            envelope: Envelope::Gaussian,
        };
        for m in 0..6 {
            let x = m as f64 / 6.0;
            assert!(target_function(&[c], x).abs() < 1e-14);
        }
        assert_eq!(target_function(&default_components(), 0.0), 0.0);
    }

    #[test]
    fn dominant_examples() {
        let c = default_components();
        assert_eq!(dominant_component(&c[..1], 1.7).unwrap(), 0);
        assert_eq!(dominant_component(&[c[2], c[2]], 1.0).unwrap(), 0);
        assert!(dominant_component(&[], 0.0).is_err());
        // at the 0.5 Hz centre: weights are 1.0 (Gaussian), 1/(1+(0.6/0.25)^2) ≈ 0.148,
        // 1.0 (triangle also centred at 1.0), exp(-0.5·(0.5/0.12)^2) ≈ 1.7e-4, ~0
        let weights: Vec<f64> = c.iter().map(|k| k.weight(1.0)).collect();
        assert_eq!(weights[0], 1.0);
        assert_eq!(weights[2], 1.0);
        // exact tie with the triangular component resolves to the lower index
        assert_eq!(dominant_component(&c, 1.0).unwrap(), 0);
        assert_eq!(dominant_component(&c, 0.4).unwrap(), 1);
        assert_eq!(dominant_component(&c, 1.8).unwrap(), 4);
    }

    #[test]
    fn default_split_sizes() {
        let spec = DatasetSpec::default();
        assert_eq!(spec.split_sizes(), (3500, 750, 750));
        let ds = generate_dataset(&spec).unwrap();
        assert_eq!(ds.len(), 5000);
        assert_eq!(ds.count(Split::Train), 3500);
        assert_eq!(ds.count(Split::Val), 750);
        assert_eq!(ds.count(Split::Test), 750);
        for s in &ds.samples {
            assert!((0.0..=2.0).contains(&s.x));
            assert_eq!(s.y, target_function(&spec.components, s.x));
        }
    }

    #[test]
    fn all_regions_in_every_split() {
        let ds = generate_dataset(&DatasetSpec::default()).unwrap();
        let regions = |split: Option<Split>| {
            let mut seen = [false; 5];
            for s in ds.samples.iter().filter(|s| split.is_none_or(|t| s.split == t)) {
                seen[s.dominant] = true;
            }
            seen
        };
        let all = regions(None);
        // the 7 Hz triangle shares its centre with the wider 0.5 Hz Gaussian and never dominates
        assert_eq!(all, [true, true, false, true, true]);
        for split in [Split::Train, Split::Val, Split::Test] {
            assert_eq!(regions(Some(split)), all, "{split:?}");
        }
    }

    #[test]
    fn seeded_determinism_and_noise() {
        let spec = DatasetSpec {
            n_total: 300,
            noise_sigma: 0.1,
            seed: 42,
            ..Default::default()
        };
        let a = generate_dataset(&spec).unwrap();
        assert_eq!(a, generate_dataset(&spec).unwrap());
        assert_ne!(a, generate_dataset(&DatasetSpec { seed: 43, ..spec.clone() }).unwrap());
        let clean = generate_dataset(&DatasetSpec {
            noise_sigma: 0.0,
            ..spec.clone()
        })
        .unwrap();
        // same x draws regardless of noise level
        assert!(a.samples.iter().zip(&clean.samples).all(|(n, c)| n.x == c.x && n.split == c.split));
        assert!(a.samples.iter().zip(&clean.samples).any(|(n, c)| n.y != c.y));
    }

    #[test]
    fn invalid_specs() {
        let bad = |f: fn(&mut DatasetSpec)| {
            let mut s = DatasetSpec::default();
            f(&mut s);
            assert!(matches!(generate_dataset(&s), Err(Error::Spec(_))));
        };
        bad(|s| s.split_fractions = (0.5, 0.2, 0.2));
        bad(|s| s.split_fractions = (1.0, 0.0, 0.0));
        bad(|s| s.n_total = 0);
        bad(|s| s.components.clear());
        bad(|s| s.x_max = s.x_min);
        bad(|s| s.components[0].width = 0.0);
        bad(|s| s.noise_sigma = -1.0);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let spec = DatasetSpec {
            n_total: 50,
            noise_sigma: 0.3,
            ..Default::default()
        };
        let ds = generate_dataset(&spec).unwrap();
        let text = ds.to_csv();
        assert!(text.starts_with("x,y,split,dominant\n"));
        assert_eq!(Dataset::from_csv(&text).unwrap(), ds);
        assert!(Dataset::from_csv("a,b\n").is_err());
        assert!(Dataset::from_csv("x,y,split,dominant\n0.1,0.2,holdout,0\n").is_err());
    }

    proptest! {
        #[test]
        fn split_sizes_sum(n in 1usize..20_000, a in 0.05f64..0.9) {
            let rest = 1.0 - a;
            let spec = DatasetSpec { n_total: n, split_fractions: (a, rest / 2.0, rest / 2.0), ..Default::default() };
            let (tr, va, te) = spec.split_sizes();
            prop_assert_eq!(tr + va + te, n);
        }

        #[test]
        fn noiseless_targets_are_bounded(x in -1.0f64..3.0) {
            let c = default_components();
            let bound: f64 = c.iter().map(|k| k.amplitude.abs()).sum();
            prop_assert!(target_function(&c, x).abs() <= bound);
        }

        #[test]
        fn dominant_is_scale_invariant(x in 0.0f64..2.0, scale in 1e-3f64..1e3) {
            let c = default_components();
            let scaled: Vec<_> = c.iter().map(|k| FrequencyComponent { amplitude: k.amplitude * scale, ..*k }).collect();
            prop_assert_eq!(dominant_component(&c, x).unwrap(), dominant_component(&scaled, x).unwrap());
        }
    }
}
