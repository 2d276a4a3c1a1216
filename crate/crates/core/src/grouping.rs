//! Constructors for the binary-weighted, redundant-family, half-split and
//! uniform component arrays.
//!
//! Every constructor returns its components in a fixed canonical order (base
//! array first, then sub-arrays) so assembly masks are portable.

use crate::error::{Error, Result};
use crate::model::{ComponentArray, Grouping, QuantizerSpec};

fn pow2(e: u32) -> u32 {
    1u32 << e
}

/// `{2^0, 2^1, ..., 2^(n0-1)}`.
pub fn build_binary_weighted(n0: u32) -> Result<ComponentArray> {
    QuantizerSpec::new(n0)?;
    ComponentArray::from_nominal(n0, Grouping::BinaryWeighted, (0..n0).map(pow2).collect())
}

fn rs_weights(n0: u32, s: u32, n0_prime: u32) -> Result<Vec<u32>> {
    QuantizerSpec::new(n0)?;
    if n0_prime < 1 || n0_prime >= n0 || s < 1 || s > n0 - n0_prime {
        return Err(Error::InvalidParameter(format!(
            "redundant family needs 1 <= n0' < n0 and 1 <= s <= n0 - n0', got n0={n0} s={s} n0'={n0_prime}"
        )));
    }
    // Sub-array exponent n0 - n0' + i - s is non-negative because s <= n0 - n0'.
    let sub: Vec<u32> = (0..n0_prime).map(|i| pow2(n0 - n0_prime + i - s)).collect();
    let mut base = Vec::with_capacity(n0 as usize);
    for j in 0..n0 {
        if j < n0 - n0_prime {
            base.push(pow2(j));
        } else {
            let w = pow2(j)
                .checked_sub(sub[(j + n0_prime - n0) as usize])
                .filter(|&w| w > 0)
                .ok_or_else(|| Error::InvalidParameter(format!("non-positive base weight at j={j}")))?;
            base.push(w);
        }
    }
    base.extend(sub);
    Ok(base)
}

/// General redundant family: base array `C_RS,0` followed by the sub-array
/// `C_RS,1 = {2^(n0 - n0' + i - s)}`.
pub fn build_rs_family(n0: u32, s: u32, n0_prime: u32) -> Result<ComponentArray> {
    let weights = rs_weights(n0, s, n0_prime)?;
    ComponentArray::from_nominal(n0, Grouping::Redundant { s, n0_prime }, weights)
}

/// Half-split array: `{1, 2, ..., 2^(n0-2)} ∪ {1}` followed by `{1, 2, ..., 2^(n0-2)}`.
pub fn build_half_split(n0: u32) -> Result<ComponentArray> {
    if n0 < 2 {
        return Err(Error::InvalidParameter(format!("half-split needs n0 >= 2, got {n0}")));
    }
    QuantizerSpec::new(n0)?;
    let half: Vec<u32> = (0..n0 - 1).map(pow2).collect();
    let mut weights = half.clone();
    weights.push(1);
    weights.extend(half);
    ComponentArray::from_nominal(n0, Grouping::HalfSplit, weights)
}

/// Sub-array resolutions `N_1, N_2, ...` of the uniform grouping:
/// `N_i = ceil(N_(i-1) / 2)` for `i = 1..=floor(log2 n0)`.
pub fn uniform_sub_resolutions(n0: u32) -> Vec<u32> {
    let depth = n0.ilog2();
    let mut out = Vec::with_capacity(depth as usize);
    let mut prev = n0;
    for _ in 0..depth {
        prev = prev.div_ceil(2);
        out.push(prev);
    }
    out
}

/// Uniform array: base array of `n0` components, then one binary sub-array per
/// resolution in [`uniform_sub_resolutions`].
///
/// Base element `l` is `2^l` below `n0 - N_1`, otherwise `2^l` minus
/// `2^(l - n0 + N_m)` for every sub-array `m` whose exponent is non-negative.
/// Terms with negative exponents are dropped.
pub fn build_uniform(n0: u32) -> Result<ComponentArray> {
    if n0 < 2 {
        return Err(Error::InvalidParameter(format!(
            "uniform grouping needs n0 >= 2, got {n0}"
        )));
    }
    QuantizerSpec::new(n0)?;
    let subs = uniform_sub_resolutions(n0);
    let n1 = subs[0];
    let mut weights = Vec::new();
    for l in 0..n0 {
        if l < n0 - n1 {
            weights.push(pow2(l));
            continue;
        }
        let correction: u32 = subs
            .iter()
            .filter(|&&nm| l + nm >= n0)
            .map(|&nm| pow2(l + nm - n0))
            .sum();
        let w = pow2(l)
            .checked_sub(correction)
            .filter(|&w| w > 0)
            .ok_or_else(|| Error::InvalidParameter(format!("non-positive base weight at l={l}")))?;
        weights.push(w);
    }
    for &nm in &subs {
        weights.extend((0..nm).map(pow2));
    }
    ComponentArray::from_nominal(n0, Grouping::Uniform, weights)
}

/// Dispatches on a grouping tag. `Custom` has no constructor.
pub fn build(grouping: Grouping, n0: u32) -> Result<ComponentArray> {
    match grouping {
        Grouping::BinaryWeighted => build_binary_weighted(n0),
        Grouping::HalfSplit => build_half_split(n0),
        Grouping::Uniform => build_uniform(n0),
        Grouping::Redundant { s, n0_prime } => build_rs_family(n0, s, n0_prime),
        Grouping::Custom => Err(Error::InvalidParameter(
            "custom arrays are built with ComponentArray::from_nominal".into(),
        )),
    }
}
