//! Entropy, Shannon limit and per-code RMSE of a selected quantizer.
//!
//! The mean-square error of code `d` is the integral of `(x - (d + 0.5) / 2^nk)^2`
//! over `[theta_d, theta_(d+1)]`, evaluated in closed form. The entropy of a
//! total error `M` is `-log2(sqrt(12 M))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reference::{check_monotone, SelectedQuantizer};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub nk: u32,
    pub delta: f64,
    /// Normalized total mean-square error over the evaluated codes.
    pub m_total: f64,
    /// Entropy in bits.
    pub h: f64,
    /// First code of the evaluated range; `rmse_per_code[k]` belongs to code `first_code + k`.
    pub first_code: u64,
    pub rmse_per_code: Vec<f64>,
}

/// Inclusive code range evaluated at range fraction `delta`.
///
/// The upper index is clamped to `2^nk - 1` so `delta = 1` covers every code.
pub fn code_range(nk: u32, delta: f64) -> (u64, u64) {
    let codes = (1u64 << nk) as f64;
    let margin = (1.0 - delta) / 2.0;
    let lo = (margin * codes).floor() as u64;
    let hi = ((1.0 - margin) * codes).floor() as u64;
    (lo, hi.min((1u64 << nk) - 1))
}

/// Closed-form `integral_a^b (x - m)^2 dx`.
pub fn bin_mse(a: f64, b: f64, m: f64) -> f64 {
    ((b - m).powi(3) - (a - m).powi(3)) / 3.0
}

pub fn entropy_from_mse(m_total: f64) -> f64 {
    -(12.0 * m_total).sqrt().log2()
}

pub fn entropy_report(q: &SelectedQuantizer, delta: f64) -> Result<EntropyReport> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta must be in (0, 1], got {delta}")));
    }
    let b = q.boundaries();
    check_monotone(b)?;
    let nk = q.nk();
    let scale = (1u64 << nk) as f64;
    let (lo, hi) = code_range(nk, delta);
    let per_code: Vec<f64> = (lo..=hi)
        .map(|d| {
            let d_us = d as usize;
            bin_mse(b[d_us], b[d_us + 1], (d as f64 + 0.5) / scale)
        })
        .collect();
    let m_total = per_code.iter().copied().collect::<KahanSum>().value();
    Ok(EntropyReport {
        nk,
        delta,
        m_total,
        h: entropy_from_mse(m_total),
        first_code: lo,
        rmse_per_code: per_code.into_iter().map(f64::sqrt).collect(),
    })
}

/// Maximum entropy at resolution `nk` over range fraction `delta`: `nk + log2(delta)`.
pub fn shannon_limit(nk: u32, delta: f64) -> f64 {
    f64::from(nk) + delta.log2()
}

/// `(code, sqrt(M(d)))` for every code.
pub fn rmse_profile(q: &SelectedQuantizer) -> Result<Vec<(u64, f64)>> {
    let report = entropy_report(q, 1.0)?;
    Ok(report
        .rmse_per_code
        .into_iter()
        .enumerate()
        .map(|(d, r)| (d as u64, r))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::build_binary_weighted;
    use crate::reference::{enumerate_references, select_quantizer_exhaustive, TargetGrid};
    use proptest::prelude::*;

    fn ideal(n0: u32) -> SelectedQuantizer {
        let refs = enumerate_references(&build_binary_weighted(n0).unwrap()).unwrap();
        select_quantizer_exhaustive(&refs, TargetGrid::full(n0).unwrap()).unwrap()
    }

    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let left = (m - a) / 6.0 * (f(a) + 4.0 * f(lm) + f(m));
        let right = (b - m) / 6.0 * (f(m) + 4.0 * f(rm) + f(b));
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        simpson(f, a, m, left, tol / 2.0, depth - 1) + simpson(f, m, b, right, tol / 2.0, depth - 1)
    }

    fn quadrature(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
        simpson(f, a, b, whole, 1e-14, 40)
    }

    #[test]
    fn ideal_grid_hits_resolution() {
        for n0 in 1..=12 {
            let r = entropy_report(&ideal(n0), 1.0).unwrap();
            let expected = 2f64.powi(-2 * n0 as i32) / 12.0;
            assert!((r.m_total / expected - 1.0).abs() < 1e-12);
            assert!((r.h - f64::from(n0)).abs() < 1e-9, "n0={n0} h={}", r.h);
        }
    }

    #[test]
    fn quarter_boundary_example() {
        let q = SelectedQuantizer::from_boundaries(1, vec![0.0, 0.25, 1.0]);
        let r = entropy_report(&q, 1.0).unwrap();
        assert!((r.m_total - 0.052_083_333_333_333_33).abs() < 1e-15);
        assert!((r.h - 0.339_03).abs() < 1e-5, "h={}", r.h);
        assert!((r.h + 0.625f64.sqrt().log2()).abs() < 1e-12);
    }

    #[test]
    fn empty_bin_contributes_zero() {
        assert_eq!(bin_mse(0.3, 0.3, 0.1), 0.0);
    }

    #[test]
    fn shannon_limit_examples() {
        assert_eq!(shannon_limit(10, 1.0), 10.0);
        assert!((shannon_limit(10, 0.95) - 9.925_999).abs() < 1e-4);
        assert_eq!(shannon_limit(16, 0.5), 15.0);
    }

    #[test]
    fn rmse_ideal_three_bits() {
        let prof = rmse_profile(&ideal(3)).unwrap();
        assert_eq!(prof.len(), 8);
        let expected = ((0.125f64).powi(3) / 12.0).sqrt();
        for (d, (code, r)) in prof.iter().enumerate() {
            assert_eq!(*code, d as u64);
            assert!((r - expected).abs() < 1e-15);
            assert!((r - 0.012_757_8).abs() < 1e-7);
        }
    }

    #[test]
    fn code_ranges() {
        assert_eq!(code_range(10, 1.0), (0, 1023));
        assert_eq!(code_range(10, 0.95), (25, 998));
        assert_eq!(code_range(4, 0.5), (4, 12));
    }

    #[test]
    fn reduced_range_ideal() {
        // Ideal grid over the central codes: M = (#codes) 2^(-3nk) / 12.
        let q = ideal(8);
        let r = entropy_report(&q, 0.5).unwrap();
        let count = r.rmse_per_code.len() as f64;
        assert_eq!(count, 129.0);
        let expected = count * 2f64.powi(-24) / 12.0;
        assert!((r.m_total / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perturbing_ideal_lowers_entropy() {
        let base = ideal(4);
        let h0 = entropy_report(&base, 1.0).unwrap().h;
        for i in 1..16 {
            for eps in [-1e-3, 1e-3, 0.03] {
                let mut b = base.boundaries().to_vec();
                b[i] += eps;
                let q = SelectedQuantizer::from_boundaries(4, b);
                assert!(entropy_report(&q, 1.0).unwrap().h < h0, "i={i} eps={eps}");
            }
        }
    }

    #[test]
    fn rejects_non_monotone() {
        let mut b: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
        b[1] = 0.6;
        let bad = SelectedQuantizer::from_boundaries(2, b);
        assert!(matches!(entropy_report(&bad, 1.0), Err(Error::NonMonotone(2))));
    }

    #[test]
    fn kahan_order_independent() {
        let xs: Vec<f64> = (0..10_000)
            .map(|i| 1e-10 * (i as f64).sin().abs() + if i % 97 == 0 { 1.0 } else { 0.0 })
            .collect();
        let fwd = xs.iter().copied().collect::<KahanSum>().value();
        let rev = xs.iter().rev().copied().collect::<KahanSum>().value();
        assert!((fwd - rev).abs() <= 1e-12 * fwd.abs());
    }

    proptest! {
        #[test]
        fn closed_form_matches_quadrature(mut pts in prop::collection::vec(0.0f64..1.0, 7)) {
            pts.sort_by(f64::total_cmp);
            let mut b = vec![0.0];
            b.extend(pts);
            b.push(1.0);
            let scale = 8.0;
            let mut closed = 0.0;
            let mut numeric = 0.0;
            for d in 0..8 {
                let m = (d as f64 + 0.5) / scale;
                closed += bin_mse(b[d], b[d + 1], m);
                numeric += quadrature(&|x| (x - m) * (x - m), b[d], b[d + 1]);
            }
            prop_assert!((closed - numeric).abs() < 1e-10);
        }

        #[test]
        fn entropy_bounded_by_resolution(mut pts in prop::collection::vec(0.0f64..1.0, 15)) {
            pts.sort_by(f64::total_cmp);
            let mut b = vec![0.0];
            b.extend(pts);
            b.push(1.0);
            let m: f64 = (0..16).map(|d| bin_mse(b[d], b[d + 1], (d as f64 + 0.5) / 16.0)).sum();
            prop_assert!(entropy_from_mse(m) <= 4.0 + 1e-12);
        }
    }
}
