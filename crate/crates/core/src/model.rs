//! Quantizer specifications, component arrays and the unit-cell mismatch model.
//!
//! A component array bundles the `2^n0 - 1` unit cells of an `n0`-bit device
//! into `n` components. Each component carries a nominal integer weight (its
//! cell count) and an actual weight drawn under random mismatch. The order of
//! the components is canonical: bit `i` of every assembly mask refers to
//! component `i` as produced by the constructor.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest intrinsic resolution accepted by the constructors.
pub const MAX_N0: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantizerSpec {
    n0: u32,
}

impl QuantizerSpec {
    pub fn new(n0: u32) -> Result<Self> {
        if n0 == 0 || n0 > MAX_N0 {
            return Err(Error::InvalidParameter(format!(
                "n0 must be in [1, {MAX_N0}], got {n0}"
            )));
        }
        Ok(Self { n0 })
    }

    pub fn n0(&self) -> u32 {
        self.n0
    }

    /// Number of unit cells, `2^n0 - 1`.
    pub fn unit_count(&self) -> u64 {
        (1u64 << self.n0) - 1
    }
}

/// How unit cells are grouped into components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Grouping {
    /// Conventional binary-weighted array.
    BinaryWeighted,
    /// Half-split redundant array.
    HalfSplit,
    /// Uniform redundant array.
    Uniform,
    /// General redundant family with sub-array shift `s` and sub-array resolution `n0_prime`.
    Redundant { s: u32, n0_prime: u32 },
    /// Raw user-supplied weight list.
    Custom,
}

impl Grouping {
    /// One-byte tag used by the LUT file header.
    pub fn tag(&self) -> u8 {
        match self {
            Grouping::BinaryWeighted => 0,
            Grouping::HalfSplit => 1,
            Grouping::Uniform => 2,
            Grouping::Redundant { .. } => 3,
            Grouping::Custom => 4,
        }
    }

    /// Grouping parameters packed into one byte (`s << 4 | n0_prime`); zero
    /// for groupings without parameters.
    pub fn param_byte(&self) -> u8 {
        match *self {
            Grouping::Redundant { s, n0_prime } => ((s as u8 & 0x0f) << 4) | (n0_prime as u8 & 0x0f),
            _ => 0,
        }
    }

    pub fn from_tag(tag: u8, param: u8) -> Result<Self> {
        Ok(match tag {
            0 => Grouping::BinaryWeighted,
            1 => Grouping::HalfSplit,
            2 => Grouping::Uniform,
            3 => Grouping::Redundant {
                s: u32::from(param >> 4),
                n0_prime: u32::from(param & 0x0f),
            },
            4 => Grouping::Custom,
            other => return Err(Error::Format(format!("unknown grouping tag {other}"))),
        })
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grouping::BinaryWeighted => f.write_str("bw"),
            Grouping::HalfSplit => f.write_str("hs"),
            Grouping::Uniform => f.write_str("un"),
            Grouping::Redundant { s, n0_prime } => write!(f, "rs-{s}-{n0_prime}"),
            Grouping::Custom => f.write_str("custom"),
        }
    }
}

impl FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "bw" => return Ok(Grouping::BinaryWeighted),
            "hs" => return Ok(Grouping::HalfSplit),
            "un" => return Ok(Grouping::Uniform),
            "custom" => return Ok(Grouping::Custom),
            _ => {}
        }
        let bad = || Error::InvalidParameter(format!("unknown grouping {s:?} (expected bw, hs, un or rs-<s>-<n0'>)"));
        let rest = lower.strip_prefix("rs-").ok_or_else(bad)?;
        let (a, b) = rest.split_once('-').ok_or_else(bad)?;
        Ok(Grouping::Redundant {
            s: a.parse().map_err(|_| bad())?,
            n0_prime: b.parse().map_err(|_| bad())?,
        })
    }
}

impl From<Grouping> for String {
    fn from(g: Grouping) -> Self {
        g.to_string()
    }
}

impl TryFrom<String> for Grouping {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Nominal and actual component weights of one grouped array.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentArray {
    spec: QuantizerSpec,
    grouping: Grouping,
    nominal: Vec<u32>,
    actual: Vec<f64>,
}

impl ComponentArray {
    /// Validated entry point for a raw nominal weight list. Actual weights
    /// start equal to the nominal ones.
    pub fn from_nominal(n0: u32, grouping: Grouping, nominal: Vec<u32>) -> Result<Self> {
        let spec = QuantizerSpec::new(n0)?;
        if nominal.is_empty() {
            return Err(Error::InvalidArray("no components".into()));
        }
        if let Some(i) = nominal.iter().position(|&w| w == 0) {
            return Err(Error::InvalidArray(format!("component {i} has zero weight")));
        }
        let total: u64 = nominal.iter().map(|&w| u64::from(w)).sum();
        if total != spec.unit_count() {
            return Err(Error::InvalidArray(format!(
                "weights sum to {total}, expected 2^{n0} - 1 = {}",
                spec.unit_count()
            )));
        }
        let actual = nominal.iter().map(|&w| f64::from(w)).collect();
        Ok(Self {
            spec,
            grouping,
            nominal,
            actual,
        })
    }

    /// Replaces the actual weights. Lengths must match and every weight must be
    /// finite and non-negative.
    pub fn with_actual(mut self, actual: Vec<f64>) -> Result<Self> {
        if actual.len() != self.nominal.len() {
            return Err(Error::InvalidArray(format!(
                "{} actual weights for {} components",
                actual.len(),
                self.nominal.len()
            )));
        }
        if let Some((index, &value)) = actual.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::NegativeWeight { index, value });
        }
        self.actual = actual;
        Ok(self)
    }

    pub fn spec(&self) -> QuantizerSpec {
        self.spec
    }

    pub fn n0(&self) -> u32 {
        self.spec.n0
    }

    pub fn grouping(&self) -> Grouping {
        self.grouping
    }

    pub fn nominal(&self) -> &[u32] {
        &self.nominal
    }

    pub fn actual(&self) -> &[f64] {
        &self.actual
    }

    /// Component count `n`.
    pub fn len(&self) -> usize {
        self.nominal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nominal.is_empty()
    }

    /// `1 + sum of actual weights`, summed in canonical component order.
    pub fn denominator(&self) -> f64 {
        1.0 + self.actual.iter().fold(0.0, |acc, &c| acc + c)
    }

    /// Draws actual weights under `model` for trial `trial_index`.
    pub fn sample(&self, model: &MismatchModel, trial_index: u64) -> ComponentArray {
        sample_actual_weights(self, model, trial_index)
    }
}

/// Gaussian unit-cell mismatch with a seedable, counter-addressed generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MismatchModel {
    pub sigma_m: f64,
    pub master_seed: u64,
}

impl MismatchModel {
    pub fn new(sigma_m: f64, master_seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&sigma_m) {
            return Err(Error::InvalidParameter(format!(
                "sigma_m must lie in [0, 1), got {sigma_m}"
            )));
        }
        Ok(Self { sigma_m, master_seed })
    }

    /// Generator for one (trial, component) pair: ChaCha8 keyed by
    /// `derive_seed(&[master_seed, trial])`, stream number = component index.
    pub fn component_rng(&self, trial_index: u64, component: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[self.master_seed, trial_index]));
        rng.set_stream(component as u64);
        rng
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a list of words into one seed: `h <- splitmix64(h ^ part)` from `h = 0`.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0u64, |h, &p| splitmix64(h ^ p))
}

/// Returns a copy of `array` with every component of nominal weight `w` drawn
/// from `Normal(w, w * sigma_m^2)` and clamped below at zero.
///
/// A component of `w` cells with i.i.d. `Normal(1, sigma_m^2)` cells has
/// exactly this distribution, so one draw per component suffices.
pub fn sample_actual_weights(array: &ComponentArray, model: &MismatchModel, trial_index: u64) -> ComponentArray {
    let actual = array
        .nominal
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let w = f64::from(w);
            if model.sigma_m == 0.0 {
                return w;
            }
            let z: f64 = StandardNormal.sample(&mut model.component_rng(trial_index, i));
            (w + w.sqrt() * model.sigma_m * z).max(0.0)
        })
        .collect();
    ComponentArray {
        actual,
        ..array.clone()
    }
}
