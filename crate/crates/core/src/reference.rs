//! Reference enumeration and super-resolution reference selection.
//!
//! A component array with actual weights `c_1..c_n` generates one normalized
//! reference per assembly mask `d`:
//!
//! ```text
//! theta_d = sum_i d_i c_i / (1 + sum_i c_i)
//! ```
//!
//! The numerator is always accumulated as a left fold over the selected
//! components in ascending index order, starting from `0.0`. Enumeration,
//! [`decode_assembly`] and LUT import share that order so a boundary rebuilt
//! from its mask is bit-identical to the enumerated value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComponentArray, Grouping};

/// Assembly bitmask; bit `i` selects component `i` in canonical order.
pub type Mask = u64;

/// Largest component count [`enumerate_references`] accepts (2^26 entries).
pub const MAX_ENUM_COMPONENTS: usize = 26;

/// All `2^n` references of one array, sorted by value then mask.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    values: Vec<f64>,
    masks: Vec<u32>,
    denom: f64,
    n: usize,
    grouping: Grouping,
}

impl ReferenceSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self, index: usize) -> Mask {
        Mask::from(self.masks[index])
    }

    pub fn denom(&self) -> f64 {
        self.denom
    }

    /// Component count `n`.
    pub fn components(&self) -> usize {
        self.n
    }

    pub fn grouping(&self) -> Grouping {
        self.grouping
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Mask)> + '_ {
        self.values.iter().zip(&self.masks).map(|(&v, &m)| (v, Mask::from(m)))
    }

    /// Number of distinct reference values.
    pub fn distinct(&self) -> usize {
        if self.values.is_empty() {
            return 0;
        }
        1 + self.values.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

fn check_enumerable(array: &ComponentArray) -> Result<()> {
    if array.len() > MAX_ENUM_COMPONENTS {
        return Err(Error::TooManyComponents {
            n: array.len(),
            limit: MAX_ENUM_COMPONENTS,
        });
    }
    if let Some((index, &value)) = array.actual().iter().enumerate().find(|(_, w)| w.is_nan() || **w < 0.0) {
        return Err(Error::NegativeWeight { index, value });
    }
    Ok(())
}

/// Enumerates and sorts all `2^n` references.
///
/// Subset sums are built by repeated merging: after step `i` the buffer holds
/// the sorted sums over components `0..=i`, and step `i + 1` merges it with a
/// copy shifted by `c_(i+1)`. Adding a constant preserves order, so the total
/// cost is `O(2^n)` rather than a full sort.
pub fn enumerate_references(array: &ComponentArray) -> Result<ReferenceSet> {
    check_enumerable(array)?;
    let n = array.len();
    let size = 1usize << n;
    let mut sums = Vec::with_capacity(size);
    let mut masks = Vec::with_capacity(size);
    sums.push(0.0f64);
    masks.push(0u32);
    let mut next_sums = Vec::with_capacity(size);
    let mut next_masks = Vec::with_capacity(size);

    for (i, &c) in array.actual().iter().enumerate() {
        let bit = 1u32 << i;
        let len = sums.len();
        next_sums.clear();
        next_masks.clear();
        let (mut l, mut r) = (0, 0);
        while l < len && r < len {
            let shifted = sums[r] + c;
            if sums[l] <= shifted {
                next_sums.push(sums[l]);
                next_masks.push(masks[l]);
                l += 1;
            } else {
                next_sums.push(shifted);
                next_masks.push(masks[r] | bit);
                r += 1;
            }
        }
        next_sums.extend_from_slice(&sums[l..]);
        next_masks.extend_from_slice(&masks[l..]);
        for k in r..len {
            next_sums.push(sums[k] + c);
            next_masks.push(masks[k] | bit);
        }
        std::mem::swap(&mut sums, &mut next_sums);
        std::mem::swap(&mut masks, &mut next_masks);
    }

    let denom = array.denominator();
    for v in &mut sums {
        *v /= denom;
    }
    // Equal values (exact ties, or distinct sums collapsing after division)
    // are ordered by mask.
    let mut start = 0;
    while start < size {
        let mut end = start + 1;
        while end < size && sums[end] == sums[start] {
            end += 1;
        }
        if end - start > 1 {
            masks[start..end].sort_unstable();
        }
        start = end;
    }

    Ok(ReferenceSet {
        values: sums,
        masks,
        denom,
        n,
        grouping: array.grouping(),
    })
}

/// Unsorted reference values indexed by mask, using the same arithmetic as
/// [`enumerate_references`].
pub fn reference_values(array: &ComponentArray) -> Result<Vec<f64>> {
    check_enumerable(array)?;
    let size = 1usize << array.len();
    let mut sums = Vec::with_capacity(size);
    sums.push(0.0f64);
    for &c in array.actual() {
        let len = sums.len();
        for k in 0..len {
            let s = sums[k] + c;
            sums.push(s);
        }
    }
    let denom = array.denominator();
    for v in &mut sums {
        *v /= denom;
    }
    Ok(sums)
}

/// Reference generated by `mask`: selected actual weights over `1 + sum of all`.
pub fn decode_assembly(mask: Mask, array: &ComponentArray) -> Result<f64> {
    let n = array.len();
    if n < 64 && mask >> n != 0 {
        return Err(Error::MaskOutOfRange { mask, n });
    }
    let num = array
        .actual()
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .fold(0.0, |acc, (_, &c)| acc + c);
    Ok(num / array.denominator())
}

/// Intrinsic target grid `{i / 2^nk}` with an optional centred range fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetGrid {
    nk: u32,
    delta: f64,
}

/// Largest target resolution accepted by [`TargetGrid`].
pub const MAX_NK: u32 = 30;

impl TargetGrid {
    pub fn new(nk: u32, delta: f64) -> Result<Self> {
        if nk == 0 || nk > MAX_NK {
            return Err(Error::InvalidParameter(format!(
                "nk must be in [1, {MAX_NK}], got {nk}"
            )));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParameter(format!("delta must be in (0, 1], got {delta}")));
        }
        Ok(Self { nk, delta })
    }

    pub fn full(nk: u32) -> Result<Self> {
        Self::new(nk, 1.0)
    }

    pub fn nk(&self) -> u32 {
        self.nk
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of codes, `2^nk`.
    pub fn codes(&self) -> usize {
        1usize << self.nk
    }

    pub fn target(&self, i: usize) -> f64 {
        i as f64 / self.codes() as f64
    }
}

/// Boundaries `theta_0..theta_(2^nk)` plus the assembly of every interior one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedQuantizer {
    nk: u32,
    delta: f64,
    grouping: Grouping,
    boundaries: Vec<f64>,
    masks: Vec<Mask>,
}

impl SelectedQuantizer {
    /// Rebuilds a quantizer from interior masks, recomputing every boundary
    /// from the array's actual weights. Fails on non-monotone results.
    pub fn from_masks(array: &ComponentArray, grid: TargetGrid, masks: Vec<Mask>) -> Result<Self> {
        let interior = grid.codes() - 1;
        if masks.len() != interior {
            return Err(Error::Inconsistent(format!(
                "{} masks for {} interior boundaries",
                masks.len(),
                interior
            )));
        }
        let mut boundaries = Vec::with_capacity(grid.codes() + 1);
        boundaries.push(0.0);
        for &m in &masks {
            boundaries.push(decode_assembly(m, array)?);
        }
        boundaries.push(1.0);
        check_monotone(&boundaries)?;
        Ok(Self {
            nk: grid.nk,
            delta: grid.delta,
            grouping: array.grouping(),
            boundaries,
            masks,
        })
    }

    /// Unchecked quantizer over raw boundaries with empty masks.
    #[cfg(test)]
    pub(crate) fn from_boundaries(nk: u32, boundaries: Vec<f64>) -> Self {
        assert_eq!(boundaries.len(), (1 << nk) + 1);
        let masks = vec![0; (1 << nk) - 1];
        Self {
            nk,
            delta: 1.0,
            grouping: Grouping::Custom,
            boundaries,
            masks,
        }
    }

    pub fn nk(&self) -> u32 {
        self.nk
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn grid(&self) -> TargetGrid {
        TargetGrid {
            nk: self.nk,
            delta: self.delta,
        }
    }

    pub fn grouping(&self) -> Grouping {
        self.grouping
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Masks of interior boundaries `1..2^nk - 1`.
    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn codes(&self) -> usize {
        1usize << self.nk
    }

    /// Code `d` with `theta_d <= x < theta_(d+1)`. Empty bins are skipped in
    /// favour of the larger code.
    pub fn quantize(&self, x: f64) -> Result<u64> {
        quantize(x, self)
    }
}

pub(crate) fn check_monotone(boundaries: &[f64]) -> Result<()> {
    for (i, w) in boundaries.windows(2).enumerate() {
        if w[0].is_nan() || w[1].is_nan() || w[0] > w[1] {
            return Err(Error::NonMonotone(i + 1));
        }
    }
    Ok(())
}

/// Exact solution of the per-target selection problem: for each interior
/// target `i / 2^nk`, the reference minimizing `|target - reference|`, ties
/// going to the lower value and then the lower mask.
///
/// Targets are ascending, so a single forward walk over the sorted set finds
/// each target's neighbours in `O(2^n + 2^nk)`.
pub fn select_quantizer_exhaustive(refs: &ReferenceSet, grid: TargetGrid) -> Result<SelectedQuantizer> {
    if refs.is_empty() {
        return Err(Error::InvalidParameter("empty reference set".into()));
    }
    let values = &refs.values;
    let codes = grid.codes();
    let mut boundaries = Vec::with_capacity(codes + 1);
    let mut masks = Vec::with_capacity(codes - 1);
    boundaries.push(0.0);

    // `hi` is the first index with value >= target; `lo_start` is the first
    // index of the equal-value run that ends at `hi - 1`.
    let mut hi = 0usize;
    let mut lo_start = 0usize;
    for i in 1..codes {
        let t = grid.target(i);
        while hi < values.len() && values[hi] < t {
            if hi == 0 || values[hi] != values[hi - 1] {
                lo_start = hi;
            }
            hi += 1;
        }
        let pick = match (hi > 0, hi < values.len()) {
            (true, true) => {
                if t - values[hi - 1] <= values[hi] - t {
                    lo_start
                } else {
                    hi
                }
            }
            (true, false) => lo_start,
            (false, _) => hi,
        };
        boundaries.push(values[pick]);
        masks.push(refs.mask(pick));
    }
    boundaries.push(1.0);

    Ok(SelectedQuantizer {
        nk: grid.nk,
        delta: grid.delta,
        grouping: refs.grouping,
        boundaries,
        masks,
    })
}

/// Approximate selection: per target, scan components by descending actual
/// weight and keep each one that does not overshoot the target numerator.
/// The resulting (boundary, mask) pairs are sorted by value to restore
/// monotonicity.
pub fn select_quantizer_greedy(array: &ComponentArray, grid: TargetGrid) -> Result<SelectedQuantizer> {
    if array.len() > 64 {
        return Err(Error::TooManyComponents {
            n: array.len(),
            limit: 64,
        });
    }
    let denom = array.denominator();
    let mut order: Vec<usize> = (0..array.len()).collect();
    order.sort_by(|&a, &b| array.actual()[b].total_cmp(&array.actual()[a]).then(a.cmp(&b)));

    let codes = grid.codes();
    let mut picks = Vec::with_capacity(codes - 1);
    for i in 1..codes {
        let numerator = grid.target(i) * denom;
        let mut acc = 0.0;
        let mut mask: Mask = 0;
        for &k in &order {
            let c = array.actual()[k];
            if acc + c <= numerator {
                acc += c;
                mask |= 1 << k;
            }
        }
        picks.push((decode_assembly(mask, array)?, mask));
    }
    picks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut boundaries = Vec::with_capacity(codes + 1);
    boundaries.push(0.0);
    boundaries.extend(picks.iter().map(|p| p.0));
    boundaries.push(1.0);
    Ok(SelectedQuantizer {
        nk: grid.nk,
        delta: grid.delta,
        grouping: array.grouping(),
        boundaries,
        masks: picks.into_iter().map(|p| p.1).collect(),
    })
}

/// Maps `x` in `[0, 1)` to its code under the selected boundaries.
pub fn quantize(x: f64, q: &SelectedQuantizer) -> Result<u64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::InputOutOfRange(x));
    }
    let above = q.boundaries.partition_point(|&b| b <= x);
    Ok((above - 1) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::{build_binary_weighted, build_half_split, build_uniform};
    use crate::model::MismatchModel;
    use proptest::prelude::*;

    fn eighths() -> Vec<f64> {
        (0..8).map(|k| k as f64 / 8.0).collect()
    }

    #[test]
    fn half_split_three_bits() {
        let refs = enumerate_references(&build_half_split(3).unwrap()).unwrap();
        assert_eq!(refs.len(), 32);
        let mut distinct: Vec<f64> = refs.values().to_vec();
        distinct.dedup();
        assert_eq!(distinct, eighths());
        assert_eq!(refs.iter().filter(|(v, _)| *v == 0.375).count(), 7);
        assert_eq!(refs.iter().next(), Some((0.0, 0)));
    }

    #[test]
    fn binary_three_bits_unique() {
        let refs = enumerate_references(&build_binary_weighted(3).unwrap()).unwrap();
        assert_eq!(refs.values(), eighths().as_slice());
        let masks: Vec<Mask> = refs.iter().map(|(_, m)| m).collect();
        assert_eq!(masks, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn enumeration_guards() {
        let arr = build_half_split(14).unwrap();
        assert!(matches!(
            enumerate_references(&arr),
            Err(Error::TooManyComponents { n: 27, .. })
        ));
    }

    #[test]
    fn decode_examples() {
        let hs = build_half_split(3).unwrap();
        assert_eq!(decode_assembly(0, &hs).unwrap(), 0.0);
        assert_eq!(decode_assembly(0b11111, &hs).unwrap(), 7.0 / 8.0);
        // Components 0 and 1 have nominal weights 1 and 2.
        assert_eq!(decode_assembly(0b00011, &hs).unwrap(), 0.375);
        assert!(decode_assembly(1 << 5, &hs).is_err());
        let un = build_uniform(10).unwrap();
        assert_eq!(decode_assembly((1 << 20) - 1, &un).unwrap(), 1023.0 / 1024.0);
    }

    #[test]
    fn exhaustive_ideal_binary() {
        let refs = enumerate_references(&build_binary_weighted(3).unwrap()).unwrap();
        let q = select_quantizer_exhaustive(&refs, TargetGrid::full(3).unwrap()).unwrap();
        let mut expected = eighths();
        expected.push(1.0);
        assert_eq!(q.boundaries(), expected.as_slice());
        assert_eq!(q.masks(), &[1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn exhaustive_ties_go_low() {
        let hs = build_half_split(3).unwrap();
        let refs = enumerate_references(&hs).unwrap();
        let q = select_quantizer_exhaustive(&refs, TargetGrid::full(4).unwrap()).unwrap();
        // Odd sixteenths sit halfway between eighths and round down.
        let mut expected = vec![0.0];
        for i in 1..16 {
            expected.push((i / 2) as f64 / 8.0);
        }
        expected.push(1.0);
        assert_eq!(q.boundaries(), expected.as_slice());
        // 1/16 rounds down to 0, realized only by the empty mask.
        assert_eq!(q.masks()[0], 0);
        // 2/16 = 1/8: smallest mask of value 1/8 is component 0.
        assert_eq!(q.masks()[1], 1);
    }

    #[test]
    fn greedy_examples() {
        let bw = build_binary_weighted(5).unwrap();
        let refs = enumerate_references(&bw).unwrap();
        let grid = TargetGrid::full(5).unwrap();
        assert_eq!(
            select_quantizer_greedy(&bw, grid).unwrap(),
            select_quantizer_exhaustive(&refs, grid).unwrap()
        );

        let hs = build_half_split(3).unwrap();
        let q = select_quantizer_greedy(&hs, TargetGrid::full(3).unwrap()).unwrap();
        // Target 3/8: descending scan keeps the first 2 (component 1) then the first 1 (component 0).
        assert_eq!(q.boundaries()[3], 0.375);
        assert_eq!(q.masks()[2], 0b00011);
    }

    #[test]
    fn quantize_examples() {
        let refs = enumerate_references(&build_binary_weighted(3).unwrap()).unwrap();
        let q = select_quantizer_exhaustive(&refs, TargetGrid::full(3).unwrap()).unwrap();
        assert_eq!(q.quantize(0.3).unwrap(), 2);
        assert_eq!(q.quantize(0.0).unwrap(), 0);
        assert_eq!(q.quantize(1.0 - f64::EPSILON).unwrap(), 7);
        assert!(q.quantize(1.0).is_err());
        assert!(q.quantize(-0.1).is_err());
    }

    #[test]
    fn quantize_skips_empty_bins() {
        let hs = build_half_split(3).unwrap();
        let refs = enumerate_references(&hs).unwrap();
        let q = select_quantizer_exhaustive(&refs, TargetGrid::full(4).unwrap()).unwrap();
        // theta_2 == theta_3 == 1/8: code 2 is empty, 1/8 maps to code 3.
        assert_eq!(q.quantize(0.125).unwrap(), 3);
        assert_eq!(q.quantize(0.0).unwrap(), 1);
    }

    #[test]
    fn from_masks_rejects_non_monotone() {
        let bw = build_binary_weighted(2).unwrap();
        let grid = TargetGrid::full(2).unwrap();
        assert!(SelectedQuantizer::from_masks(&bw, grid, vec![1, 2, 3]).is_ok());
        assert!(matches!(
            SelectedQuantizer::from_masks(&bw, grid, vec![2, 1, 3]),
            Err(Error::NonMonotone(_))
        ));
        assert!(SelectedQuantizer::from_masks(&bw, grid, vec![1, 2]).is_err());
    }

    fn sampled(n0: u32, sigma: f64, seed: u64) -> ComponentArray {
        build_uniform(n0)
            .unwrap()
            .sample(&MismatchModel::new(sigma, seed).unwrap(), 0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn enumeration_sorted_and_decodable(seed in any::<u64>(), sigma in 0.0f64..0.5) {
            let arr = sampled(5, sigma, seed);
            let refs = enumerate_references(&arr).unwrap();
            let raw = reference_values(&arr).unwrap();
            prop_assert_eq!(refs.len(), 1 << arr.len());
            for w in refs.iter().collect::<Vec<_>>().windows(2) {
                prop_assert!(w[0].0 < w[1].0 || (w[0].0 == w[1].0 && w[0].1 < w[1].1));
            }
            for (v, m) in refs.iter() {
                prop_assert_eq!(v.to_bits(), decode_assembly(m, &arr).unwrap().to_bits());
                prop_assert_eq!(v.to_bits(), raw[m as usize].to_bits());
                prop_assert!((0.0..1.0).contains(&v));
            }
        }

        #[test]
        fn selection_monotone_and_round_trips(seed in any::<u64>(), sigma in 0.0f64..0.5, nk in 3u32..10) {
            let arr = sampled(5, sigma, seed);
            let refs = enumerate_references(&arr).unwrap();
            let grid = TargetGrid::full(nk).unwrap();
            for q in [
                select_quantizer_exhaustive(&refs, grid).unwrap(),
                select_quantizer_greedy(&arr, grid).unwrap(),
            ] {
                prop_assert_eq!(q.boundaries().len(), (1 << nk) + 1);
                prop_assert_eq!(q.boundaries()[0], 0.0);
                prop_assert_eq!(q.boundaries()[1 << nk], 1.0);
                prop_assert!(check_monotone(q.boundaries()).is_ok());
                for (i, &m) in q.masks().iter().enumerate() {
                    prop_assert_eq!(q.boundaries()[i + 1].to_bits(), decode_assembly(m, &arr).unwrap().to_bits());
                }
                for d in 0..(1usize << nk) {
                    let (a, b) = (q.boundaries()[d], q.boundaries()[d + 1]);
                    if a < b {
                        prop_assert_eq!(q.quantize(0.5 * (a + b)).unwrap(), d as u64);
                    }
                }
            }
        }
    }
}
