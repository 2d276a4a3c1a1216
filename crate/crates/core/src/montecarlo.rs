//! Seeded Monte Carlo sweeps over mismatch ratio, target resolution and range
//! fraction, plus pooled reference-density histograms.
//!
//! Seeding: every (grouping, sigma index) cell gets its own mismatch seed
//! `derive_seed(&[master_seed, grouping_code, sigma_index])`, and trial `t`
//! of that cell draws weights with [`MismatchModel::component_rng`]`(t, i)`.
//! Trials run on the current rayon pool; results are collected in trial order
//! and reduced with compensated sums, so the output does not depend on the
//! worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grouping;
use crate::metrics::{entropy_report, KahanSum};
use crate::model::{derive_seed, ComponentArray, Grouping, MismatchModel};
use crate::reference::{
    enumerate_references, reference_values, select_quantizer_exhaustive, select_quantizer_greedy, SelectedQuantizer,
    TargetGrid, MAX_ENUM_COMPONENTS,
};

pub const DEFAULT_TRIALS: u64 = 1000;
/// Desk-scale trial count used by CI-sized runs.
pub const DESK_TRIALS: u64 = 100;
pub const DEFAULT_BINS: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    #[default]
    Exhaustive,
    Greedy,
}

impl std::str::FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Selector::Exhaustive),
            "greedy" => Ok(Selector::Greedy),
            other => Err(Error::InvalidParameter(format!("unknown selector {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub groupings: Vec<Grouping>,
    pub n0: u32,
    pub sigmas: Vec<f64>,
    pub nks: Vec<u32>,
    pub deltas: Vec<f64>,
    pub trials: u64,
    pub master_seed: u64,
    pub selector: Selector,
    /// Keep every per-trial entropy in the summary.
    #[serde(default)]
    pub keep_raw: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.groupings.is_empty() || self.sigmas.is_empty() || self.nks.is_empty() || self.deltas.is_empty() {
            return bad("groupings, sigmas, nks and deltas must be non-empty");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        for &s in &self.sigmas {
            MismatchModel::new(s, 0)?;
        }
        for &nk in &self.nks {
            for &d in &self.deltas {
                TargetGrid::new(nk, d)?;
            }
        }
        Ok(())
    }
}

/// Seed of one (grouping, sigma index) cell.
pub fn cell_seed(master_seed: u64, grouping: Grouping, sigma_index: usize) -> u64 {
    let code = u64::from(grouping.tag()) | u64::from(grouping.param_byte()) << 8;
    derive_seed(&[master_seed, code, sigma_index as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub grouping: Grouping,
    pub sigma_m: f64,
    pub nk: u32,
    pub delta: f64,
    pub trials: u64,
    pub mean_h: f64,
    pub std_h: f64,
    /// Trials whose entropy was not finite.
    pub nonfinite: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_h: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub cells: Vec<McCell>,
}

impl McSummary {
    pub fn cell(&self, grouping: Grouping, sigma_m: f64, nk: u32, delta: f64) -> Option<&McCell> {
        self.cells
            .iter()
            .find(|c| c.grouping == grouping && c.sigma_m == sigma_m && c.nk == nk && c.delta == delta)
    }

    /// Cell with the largest mean entropy among those matching (grouping, sigma, delta).
    pub fn best_over_nk(&self, grouping: Grouping, sigma_m: f64, delta: f64) -> Option<&McCell> {
        self.cells
            .iter()
            .filter(|c| c.grouping == grouping && c.sigma_m == sigma_m && c.delta == delta)
            .max_by(|a, b| a.mean_h.total_cmp(&b.mean_h))
    }

    pub fn flagged(&self) -> impl Iterator<Item = &McCell> {
        self.cells.iter().filter(|c| c.nonfinite > 0)
    }
}

/// Mean and sample standard deviation (n - 1) with compensated sums.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<KahanSum>().value() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).collect::<KahanSum>().value();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn select(
    array: &ComponentArray,
    refs: Option<&crate::reference::ReferenceSet>,
    grid: TargetGrid,
) -> Result<SelectedQuantizer> {
    match refs {
        Some(r) => select_quantizer_exhaustive(r, grid),
        None => select_quantizer_greedy(array, grid),
    }
}

/// Entropies of one trial in (nk, delta) order.
fn trial_entropies(array: &ComponentArray, config: &SweepConfig) -> Result<Vec<f64>> {
    let refs = match config.selector {
        Selector::Exhaustive => Some(enumerate_references(array)?),
        Selector::Greedy => None,
    };
    let mut out = Vec::with_capacity(config.nks.len() * config.deltas.len());
    for &nk in &config.nks {
        let q = select(array, refs.as_ref(), TargetGrid::full(nk)?)?;
        for &delta in &config.deltas {
            out.push(entropy_report(&q, delta)?.h);
        }
    }
    Ok(out)
}

/// Runs every (grouping, sigma, nk, delta) cell. One enumeration per
/// (grouping, sigma, trial) serves all nk and delta values of that trial.
pub fn run_sweep(config: &SweepConfig) -> Result<McSummary> {
    config.validate()?;
    let mut arrays = Vec::with_capacity(config.groupings.len());
    for &g in &config.groupings {
        let a = grouping::build(g, config.n0)?;
        if config.selector == Selector::Exhaustive && a.len() > MAX_ENUM_COMPONENTS {
            return Err(Error::TooManyComponents {
                n: a.len(),
                limit: MAX_ENUM_COMPONENTS,
            });
        }
        arrays.push(a);
    }

    let mut cells = Vec::new();
    for (g, array) in config.groupings.iter().zip(&arrays) {
        for (si, &sigma) in config.sigmas.iter().enumerate() {
            let model = MismatchModel::new(sigma, cell_seed(config.master_seed, *g, si))?;
            let per_trial: Vec<Vec<f64>> = (0..config.trials)
                .into_par_iter()
                .map(|t| trial_entropies(&array.sample(&model, t), config))
                .collect::<Result<_>>()?;

            let mut k = 0;
            for &nk in &config.nks {
                for &delta in &config.deltas {
                    let hs: Vec<f64> = per_trial.iter().map(|row| row[k]).collect();
                    let (mean_h, std_h) = mean_std(&hs);
                    cells.push(McCell {
                        grouping: *g,
                        sigma_m: sigma,
                        nk,
                        delta,
                        trials: config.trials,
                        mean_h,
                        std_h,
                        nonfinite: hs.iter().filter(|h| !h.is_finite()).count() as u64,
                        raw_h: config.keep_raw.then_some(hs),
                    });
                    k += 1;
                }
            }
        }
    }
    Ok(McSummary { cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionHistogram {
    pub grouping: Grouping,
    pub n0: u32,
    pub sigma_m: f64,
    pub trials: u64,
    /// Density per bin over `[0, 1]`; `sum(density) * bin_width == 1`.
    pub density: Vec<f64>,
}

impl DiffusionHistogram {
    pub fn bin_count(&self) -> usize {
        self.density.len()
    }

    pub fn bin_width(&self) -> f64 {
        1.0 / self.density.len() as f64
    }

    pub fn bin_edges(&self, bin: usize) -> (f64, f64) {
        let w = self.bin_width();
        (bin as f64 * w, (bin + 1) as f64 * w)
    }

    pub fn bin_of(&self, x: f64) -> usize {
        bin_index(x, self.density.len())
    }
}

fn bin_index(x: f64, bins: usize) -> usize {
    ((x * bins as f64) as usize).min(bins - 1)
}

/// Pools all `2^n` references of every trial into a fixed-bin density over `[0, 1]`.
pub fn run_diffusion(
    grouping: Grouping,
    n0: u32,
    sigma_m: f64,
    trials: u64,
    bin_count: usize,
    master_seed: u64,
) -> Result<DiffusionHistogram> {
    if trials == 0 || bin_count == 0 {
        return Err(Error::InvalidParameter("trials and bin count must be positive".into()));
    }
    let array = grouping::build(grouping, n0)?;
    if array.len() > MAX_ENUM_COMPONENTS {
        return Err(Error::TooManyComponents {
            n: array.len(),
            limit: MAX_ENUM_COMPONENTS,
        });
    }
    let model = MismatchModel::new(sigma_m, cell_seed(master_seed, grouping, 0))?;
    let counts = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<u64>> {
            let mut c = vec![0u64; bin_count];
            for v in reference_values(&array.sample(&model, t))? {
                c[bin_index(v, bin_count)] += 1;
            }
            Ok(c)
        })
        .try_reduce(
            || vec![0u64; bin_count],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let total: u64 = counts.iter().sum();
    let scale = bin_count as f64 / total as f64;
    Ok(DiffusionHistogram {
        grouping,
        n0,
        sigma_m,
        trials,
        density: counts.into_iter().map(|c| c as f64 * scale).collect(),
    })
}

/// Per-code RMSE averaged over `trials` exhaustive selections at full range.
pub fn run_rmse(grouping: Grouping, n0: u32, sigma_m: f64, nk: u32, trials: u64, master_seed: u64) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let array = grouping::build(grouping, n0)?;
    let model = MismatchModel::new(sigma_m, cell_seed(master_seed, grouping, 0))?;
    let grid = TargetGrid::full(nk)?;
    let rows: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let refs = enumerate_references(&array.sample(&model, t))?;
            let q = select_quantizer_exhaustive(&refs, grid)?;
            Ok(entropy_report(&q, 1.0)?.rmse_per_code)
        })
        .collect::<Result<_>>()?;
    let codes = grid.codes();
    Ok((0..codes)
        .map(|d| rows.iter().map(|r| r[d]).collect::<KahanSum>().value() / trials as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(groupings: Vec<Grouping>, n0: u32, sigmas: Vec<f64>, nks: Vec<u32>, trials: u64) -> SweepConfig {
        SweepConfig {
            groupings,
            n0,
            sigmas,
            nks,
            deltas: vec![1.0],
            trials,
            master_seed: 7,
            selector: Selector::Exhaustive,
            keep_raw: false,
        }
    }

    #[test]
    fn zero_mismatch_is_ideal() {
        let cfg = config(
            vec![Grouping::BinaryWeighted, Grouping::HalfSplit, Grouping::Uniform],
            6,
            vec![0.0],
            vec![6],
            5,
        );
        let s = run_sweep(&cfg).unwrap();
        assert_eq!(s.cells.len(), 3);
        for c in &s.cells {
            assert!((c.mean_h - 6.0).abs() < 1e-9, "{c:?}");
            assert_eq!(c.std_h, 0.0);
        }
    }

    #[test]
    fn cell_count_and_lookup() {
        let mut cfg = config(
            vec![Grouping::HalfSplit, Grouping::Uniform],
            5,
            vec![0.05, 0.1],
            vec![5, 6, 7],
            3,
        );
        cfg.deltas = vec![1.0, 0.9];
        cfg.keep_raw = true;
        let s = run_sweep(&cfg).unwrap();
        assert_eq!(s.cells.len(), 2 * 2 * 3 * 2);
        let c = s.cell(Grouping::Uniform, 0.1, 6, 0.9).unwrap();
        assert_eq!(c.raw_h.as_ref().unwrap().len(), 3);
        assert!(s.best_over_nk(Grouping::HalfSplit, 0.05, 1.0).is_some());
        assert_eq!(s.flagged().count(), 0);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = config(vec![Grouping::HalfSplit], 5, vec![0.1], vec![5], 0);
        assert!(run_sweep(&cfg).is_err());
        cfg.trials = 1;
        cfg.deltas = vec![1.5];
        assert!(run_sweep(&cfg).is_err());
        cfg.deltas = vec![1.0];
        cfg.n0 = 14;
        assert!(matches!(run_sweep(&cfg), Err(Error::TooManyComponents { .. })));
        cfg.selector = Selector::Greedy;
        cfg.nks = vec![4];
        assert!(run_sweep(&cfg).is_ok());
    }

    #[test]
    fn greedy_no_better_than_exhaustive() {
        let mut cfg = config(vec![Grouping::Uniform], 6, vec![0.1], vec![6, 8], 8);
        let ex = run_sweep(&cfg).unwrap();
        cfg.selector = Selector::Greedy;
        let gr = run_sweep(&cfg).unwrap();
        for (a, b) in ex.cells.iter().zip(&gr.cells) {
            assert!(b.mean_h <= a.mean_h + 1e-12);
        }
    }

    #[test]
    fn greedy_quality_report() {
        let mut cfg = config(vec![Grouping::HalfSplit, Grouping::Uniform], 8, vec![0.1], vec![12], 20);
        let ex = run_sweep(&cfg).unwrap();
        cfg.selector = Selector::Greedy;
        let gr = run_sweep(&cfg).unwrap();
        for (a, b) in ex.cells.iter().zip(&gr.cells) {
            let gap = a.mean_h - b.mean_h;
            println!("greedy gap {} n0=8 sigma=0.1 nk=12: {gap:.3} bits", a.grouping);
            assert!(gap.is_finite());
        }
    }

    #[test]
    fn binary_weighted_degrades_with_mismatch() {
        let cfg = config(
            vec![Grouping::BinaryWeighted],
            8,
            vec![0.0, 0.02, 0.05, 0.1, 0.2],
            vec![8],
            200,
        );
        let s = run_sweep(&cfg).unwrap();
        let means: Vec<f64> = s.cells.iter().map(|c| c.mean_h).collect();
        for w in means.windows(2) {
            assert!(w[1] <= w[0], "{means:?}");
        }
    }

    #[test]
    fn diffusion_zero_sigma_spikes() {
        let h = run_diffusion(Grouping::HalfSplit, 5, 0.0, 2, 128, 1).unwrap();
        let total: f64 = h.density.iter().sum::<f64>() * h.bin_width();
        assert!((total - 1.0).abs() < 1e-9);
        for (b, &d) in h.density.iter().enumerate() {
            if b % 4 == 0 {
                assert!(d > 0.0);
            } else {
                assert_eq!(d, 0.0);
            }
        }
    }

    #[test]
    fn diffusion_single_component() {
        // n0 = 1: references 0 and c / (1 + c), clustered near 1/2.
        let h = run_diffusion(Grouping::BinaryWeighted, 1, 0.1, 200, 64, 3).unwrap();
        assert!(h.density[0] > 0.0);
        let occupied: Vec<usize> = (0..64).filter(|&b| h.density[b] > 0.0).collect();
        assert!(occupied.iter().skip(1).all(|&b| (24..40).contains(&b)), "{occupied:?}");
        let zero_mass = h.density[0] * h.bin_width();
        assert!((zero_mass - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rmse_average_ideal() {
        let r = run_rmse(Grouping::BinaryWeighted, 4, 0.0, 4, 3, 0).unwrap();
        let expected = ((1.0f64 / 16.0).powi(3) / 12.0).sqrt();
        assert!(r.iter().all(|x| (x - expected).abs() < 1e-15));
    }

    #[test]
    fn mean_std_basic() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
