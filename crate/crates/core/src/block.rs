//! Block-partitioned signals and hierarchical sparsity.
//!
//! A signal `x = (x_1, …, x_N)` lives in one flat coefficient buffer; block
//! `i` occupies the contiguous range `offsets[i]..offsets[i] + n_i`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{c64, norm_sqr, ZERO};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BlockStructure {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl BlockStructure {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidArgument("at least one block is required".into()));
        }
        if let Some(i) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::InvalidArgument(format!("block {i} has zero length")));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for &n in &sizes {
            offsets.push(total);
            total += n;
        }
        Ok(Self { sizes, offsets, total })
    }

    pub fn uniform(blocks: usize, len: usize) -> Result<Self> {
        Self::new(vec![len; blocks])
    }

    #[inline]
    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    #[inline]
    pub fn total_dim(&self) -> usize {
        self.total
    }

    #[inline]
    pub fn block_sizes(&self) -> &[usize] {
        &self.sizes
    }

    #[inline]
    pub fn block_len(&self, i: usize) -> usize {
        self.sizes[i]
    }

    #[inline]
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    #[inline]
    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i] + self.sizes[i]
    }

    /// Maps a flat coordinate back to `(block, within-block index)`.
    pub fn locate(&self, flat: usize) -> Option<(usize, usize)> {
        if flat >= self.total {
            return None;
        }
        let block = self.offsets.partition_point(|&o| o <= flat) - 1;
        Some((block, flat - self.offsets[block]))
    }
}

impl TryFrom<Vec<usize>> for BlockStructure {
    type Error = Error;
    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Self::new(sizes)
    }
}

impl From<BlockStructure> for Vec<usize> {
    fn from(b: BlockStructure) -> Self {
        b.sizes
    }
}

/// The `(s, σ)` budget: at most `s` active blocks, block `i` at most
/// `σ_i`-sparse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiSparsity {
    pub s: usize,
    pub sigma: Vec<usize>,
}

impl HiSparsity {
    pub fn new(s: usize, sigma: Vec<usize>) -> Self {
        Self { s, sigma }
    }

    pub fn uniform(s: usize, sigma: usize, blocks: usize) -> Self {
        Self::new(s, vec![sigma; blocks])
    }

    /// Checks `1 ≤ s ≤ N` and `σ_i ≤ n_i` against `structure`.
    pub fn validate(&self, structure: &BlockStructure) -> Result<()> {
        let n = structure.num_blocks();
        if self.sigma.len() != n {
            return Err(dim_err(format!(
                "sparsity has {} block budgets, structure has {n} blocks",
                self.sigma.len()
            )));
        }
        if self.s == 0 || self.s > n {
            return Err(Error::InvalidArgument(format!(
                "block budget s = {} outside 1..={n}",
                self.s
            )));
        }
        for (i, (&sg, &len)) in self.sigma.iter().zip(structure.block_sizes()).enumerate() {
            if sg > len {
                return Err(Error::InvalidArgument(format!(
                    "sigma_{i} = {sg} exceeds block length {len}"
                )));
            }
        }
        Ok(())
    }

    pub fn max_sigma(&self) -> usize {
        self.sigma.iter().copied().max().unwrap_or(0)
    }

    /// Sum of the `s` largest `σ_i`: the flat sparsity of any `(s, σ)`-sparse vector.
    pub fn flat_sparsity(&self) -> usize {
        let mut sg = self.sigma.clone();
        sg.sort_unstable_by(|a, b| b.cmp(a));
        sg.iter().take(self.s).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockVector {
    structure: BlockStructure,
    coeffs: Vec<c64>,
}

impl BlockVector {
    pub fn zeros(structure: BlockStructure) -> Self {
        let coeffs = vec![ZERO; structure.total_dim()];
        Self { structure, coeffs }
    }

    pub fn from_coeffs(structure: BlockStructure, coeffs: Vec<c64>) -> Result<Self> {
        if coeffs.len() != structure.total_dim() {
            return Err(dim_err(format!(
                "{} coefficients for total dimension {}",
                coeffs.len(),
                structure.total_dim()
            )));
        }
        Ok(Self { structure, coeffs })
    }

    /// Builds a vector from per-block real/imaginary pairs.
    pub fn from_blocks(blocks: &[&[(f64, f64)]]) -> Result<Self> {
        let structure = BlockStructure::new(blocks.iter().map(|b| b.len()).collect())?;
        let coeffs = blocks
            .iter()
            .flat_map(|b| b.iter().map(|&(re, im)| c64::new(re, im)))
            .collect();
        Self::from_coeffs(structure, coeffs)
    }

    #[inline]
    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    #[inline]
    pub fn coeffs(&self) -> &[c64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [c64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<c64> {
        self.coeffs
    }

    #[inline]
    pub fn block(&self, i: usize) -> &[c64] {
        &self.coeffs[self.structure.block_range(i)]
    }

    #[inline]
    pub fn block_mut(&mut self, i: usize) -> &mut [c64] {
        let r = self.structure.block_range(i);
        &mut self.coeffs[r]
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.coeffs).sqrt()
    }

    pub fn scaled(&self, c: c64) -> Self {
        Self {
            structure: self.structure.clone(),
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
        }
    }

    /// Number of exactly nonzero coefficients.
    pub fn nnz(&self) -> usize {
        self.coeffs.iter().filter(|v| **v != ZERO).count()
    }

    /// Blocks containing at least one nonzero coefficient.
    pub fn active_blocks(&self) -> Vec<usize> {
        (0..self.structure.num_blocks())
            .filter(|&i| self.block(i).iter().any(|v| *v != ZERO))
            .collect()
    }

    pub(crate) fn check_same_structure(&self, other: &BlockStructure) -> Result<()> {
        if &self.structure != other {
            return Err(dim_err(format!(
                "block structure {:?} does not match {:?}",
                self.structure.block_sizes(),
                other.block_sizes()
            )));
        }
        Ok(())
    }
}

/// A hierarchical support pattern: active blocks and, for each, the kept
/// within-block coordinates in ascending order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HiSupport {
    entries: BTreeMap<usize, Vec<usize>>,
}

impl HiSupport {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Every coordinate of every block.
    pub fn full(structure: &BlockStructure) -> Self {
        let entries = (0..structure.num_blocks())
            .map(|i| (i, (0..structure.block_len(i)).collect()))
            .collect();
        Self { entries }
    }

    /// Builds a support from `(block, indices)` pairs; indices are sorted and
    /// deduplicated.
    pub fn from_entries<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (usize, Vec<usize>)>,
    {
        let entries = entries
            .into_iter()
            .map(|(b, mut idx)| {
                idx.sort_unstable();
                idx.dedup();
                (b, idx)
            })
            .collect();
        Self { entries }
    }

    /// Support of the nonzero pattern of `x`.
    pub fn of_nonzeros(x: &BlockVector) -> Self {
        let st = x.structure();
        Self::from_entries((0..st.num_blocks()).filter_map(|i| {
            let idx: Vec<usize> = x
                .block(i)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != ZERO)
                .map(|(k, _)| k)
                .collect();
            (!idx.is_empty()).then_some((i, idx))
        }))
    }

    pub fn active_blocks(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn num_active_blocks(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &BTreeMap<usize, Vec<usize>> {
        &self.entries
    }

    pub fn block_entries(&self, block: usize) -> Option<&[usize]> {
        self.entries.get(&block).map(Vec::as_slice)
    }

    /// Total number of listed coordinates.
    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat coordinates in ascending order.
    pub fn flat_indices(&self, structure: &BlockStructure) -> Vec<usize> {
        self.entries
            .iter()
            .flat_map(|(&b, idx)| idx.iter().map(move |&k| structure.offset(b) + k))
            .collect()
    }

    pub fn validate(&self, structure: &BlockStructure) -> Result<()> {
        for (&b, idx) in &self.entries {
            if b >= structure.num_blocks() {
                return Err(Error::IndexOutOfRange {
                    index: b,
                    len: structure.num_blocks(),
                });
            }
            let len = structure.block_len(b);
            if let Some(&k) = idx.iter().find(|&&k| k >= len) {
                return Err(Error::IndexOutOfRange { index: k, len });
            }
        }
        Ok(())
    }
}

fn check_k(x: &BlockVector, k: &HiSparsity) -> Result<()> {
    k.validate(x.structure())
}

/// Descending-magnitude order, lower index first on ties.
fn rank_by_magnitude(mags: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..mags.len()).collect();
    idx.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]).then(a.cmp(&b)));
    idx
}

/// Best `(s, σ)`-sparse approximation of `x`.
///
/// Each block keeps its `σ_i` largest-magnitude entries and is scored by the
/// energy of those entries; the `s` best-scoring blocks survive. Blocks with
/// `σ_i = 0` are never selected. Ties prefer the lower index at both levels.
pub fn hi_threshold(x: &BlockVector, k: &HiSparsity) -> Result<(BlockVector, HiSupport)> {
    check_k(x, k)?;
    let st = x.structure();
    let nb = st.num_blocks();

    let mut kept: Vec<Vec<usize>> = Vec::with_capacity(nb);
    let mut scores: Vec<f64> = Vec::with_capacity(nb);
    for i in 0..nb {
        let blk = x.block(i);
        let mags: Vec<f64> = blk.iter().map(|v| v.norm_sqr()).collect();
        let mut top = rank_by_magnitude(&mags);
        top.truncate(k.sigma[i]);
        scores.push(top.iter().map(|&j| mags[j]).sum());
        top.sort_unstable();
        kept.push(top);
    }

    let mut order: Vec<usize> = (0..nb).filter(|&i| k.sigma[i] > 0).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k.s);

    let mut out = BlockVector::zeros(st.clone());
    let mut entries = Vec::with_capacity(order.len());
    for &i in &order {
        let src = x.block(i);
        let dst = out.block_mut(i);
        for &j in &kept[i] {
            dst[j] = src[j];
        }
        entries.push((i, std::mem::take(&mut kept[i])));
    }
    Ok((out, HiSupport::from_entries(entries)))
}

/// True iff at most `s` blocks are nonzero and each nonzero block `i` has at
/// most `σ_i` nonzero entries.
pub fn is_hi_sparse(x: &BlockVector, k: &HiSparsity) -> Result<bool> {
    if k.sigma.len() != x.structure().num_blocks() {
        return Err(dim_err(format!(
            "sparsity has {} block budgets, vector has {} blocks",
            k.sigma.len(),
            x.structure().num_blocks()
        )));
    }
    let mut active = 0;
    for i in 0..x.structure().num_blocks() {
        let nnz = x.block(i).iter().filter(|v| **v != ZERO).count();
        if nnz > 0 {
            active += 1;
            if nnz > k.sigma[i] || active > k.s {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Copy of `x` with every coordinate outside `support` zeroed.
pub fn restrict(x: &BlockVector, support: &HiSupport) -> Result<BlockVector> {
    support.validate(x.structure())?;
    let mut out = BlockVector::zeros(x.structure().clone());
    for (&b, idx) in support.entries() {
        let src = x.block(b);
        let dst = out.block_mut(b);
        for &k in idx {
            dst[k] = src[k];
        }
    }
    Ok(out)
}

/// Per-block 2-norms.
pub fn block_norms(x: &BlockVector) -> Vec<f64> {
    (0..x.structure().num_blocks())
        .map(|i| norm_sqr(x.block(i)).sqrt())
        .collect()
}
