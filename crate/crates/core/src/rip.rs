//! Exact RIP and HiRIP constants by support enumeration, and numerical checks
//! of the HiRIP composition bound and its companion inequalities.
//!
//! Every constant here is `max_T ‖G_T − I‖₂` over the admissible supports `T`,
//! where `G_T` is the principal submatrix of the Gram matrix on `T`. Supports
//! are visited in lexicographic order; ties keep the first maximizer.

use nalgebra::DMatrix;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::{BlockVector, HiSparsity};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{c64, deviation_from_identity, hermitian_defect, hermitian_eigenvalues, norm, CMatrix, ZERO};
use crate::measurement::{HierarchicalOperator, DEFAULT_DENSE_BUDGET};
use crate::rng;

pub const DEFAULT_ENUMERATION_BUDGET: u128 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RipMode {
    ExactEnumeration,
    RandomizedLowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipEstimate {
    pub delta: f64,
    pub mode: RipMode,
    pub supports_examined: u128,
    /// Flat column indices of the maximizing support, ascending.
    pub argmax_support: Vec<usize>,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `rank`-th `k`-subset of `0..n` in lexicographic order.
fn unrank_combination(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for slot in 0..k {
        let remaining = k - slot - 1;
        let mut c = start;
        loop {
            let block = binomial(n - c - 1, remaining);
            if rank < block {
                break;
            }
            rank -= block;
            c += 1;
        }
        out.push(c);
        start = c + 1;
    }
    out
}

/// Advances `comb` to the next `k`-subset of `0..n`; false when exhausted.
fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    for i in (0..k).rev() {
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn submatrix(gram: &CMatrix, idx: &[usize]) -> DMatrix<c64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| gram.get(idx[r], idx[c]))
}

#[derive(Clone)]
struct Best {
    delta: f64,
    support: Vec<usize>,
}

impl Best {
    fn none() -> Self {
        Best {
            delta: f64::NEG_INFINITY,
            support: Vec::new(),
        }
    }

    fn offer(&mut self, delta: f64, support: &[usize]) {
        if delta > self.delta {
            self.delta = delta;
            self.support = support.to_vec();
        }
    }

    /// Order-preserving merge: `later` wins only if strictly larger.
    fn merge(self, later: Best) -> Best {
        if later.delta > self.delta {
            later
        } else {
            self
        }
    }
}

const CHUNK: u128 = 4096;

pub fn rip_constant_exact(b: &CMatrix, sparsity: usize) -> Result<RipEstimate> {
    rip_constant_exact_with_budget(b, sparsity, DEFAULT_ENUMERATION_BUDGET)
}

/// `δ_S(B) = max_{|T| = S} ‖B_Tᴴ B_T − I‖₂` over all column subsets.
pub fn rip_constant_exact_with_budget(b: &CMatrix, sparsity: usize, budget: u128) -> Result<RipEstimate> {
    let n = b.cols();
    if sparsity > n {
        return Err(Error::InvalidArgument(format!(
            "sparsity {sparsity} exceeds {n} columns"
        )));
    }
    let total = binomial(n, sparsity);
    if total > budget {
        return Err(Error::EnumerationBudget {
            supports: total,
            budget,
        });
    }
    if sparsity == 0 {
        return Ok(RipEstimate {
            delta: 0.0,
            mode: RipMode::ExactEnumeration,
            supports_examined: 1,
            argmax_support: vec![],
        });
    }
    let gram = b.gram();
    let chunks = total.div_ceil(CHUNK);
    let best = (0..chunks as u64)
        .into_par_iter()
        .map(|c| {
            let start = c as u128 * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut comb = unrank_combination(n, sparsity, start);
            let mut best = Best::none();
            for _ in start..end {
                best.offer(deviation_from_identity(submatrix(&gram, &comb)), &comb);
                if !next_combination(&mut comb, n) {
                    break;
                }
            }
            best
        })
        .reduce(Best::none, Best::merge);
    Ok(RipEstimate {
        delta: best.delta.max(0.0),
        mode: RipMode::ExactEnumeration,
        supports_examined: total,
        argmax_support: best.support,
    })
}

/// Lower bound on `δ_S(B)` from `trials` uniformly drawn supports. The
/// sequence of supports depends only on `seed`, so the estimate is a running
/// maximum in `trials`.
pub fn rip_constant_randomized(b: &CMatrix, sparsity: usize, trials: usize, seed: u64) -> Result<RipEstimate> {
    let n = b.cols();
    if sparsity > n {
        return Err(Error::InvalidArgument(format!(
            "sparsity {sparsity} exceeds {n} columns"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let gram = b.gram();
    let mut rng = rng::stream(seed);
    let mut best = Best::none();
    for _ in 0..trials {
        let mut t = index::sample(&mut rng, n, sparsity).into_vec();
        t.sort_unstable();
        best.offer(deviation_from_identity(submatrix(&gram, &t)), &t);
    }
    Ok(RipEstimate {
        delta: best.delta.max(0.0),
        mode: RipMode::RandomizedLowerBound,
        supports_examined: trials as u128,
        argmax_support: best.support,
    })
}

/// Blocks that can carry mass (`σᵢ > 0`) and how many of them a support uses.
fn eligible_blocks(k: &HiSparsity) -> (Vec<usize>, usize) {
    let eligible: Vec<usize> = (0..k.sigma.len()).filter(|&i| k.sigma[i] > 0).collect();
    let s = k.s.min(eligible.len());
    (eligible, s)
}

/// Number of maximal `(s, σ)` supports of a block structure.
pub fn count_hi_supports(block_sizes: &[usize], k: &HiSparsity) -> u128 {
    let (eligible, s) = eligible_blocks(k);
    if s == 0 {
        return 1;
    }
    let mut comb: Vec<usize> = (0..s).collect();
    let mut total = 0u128;
    loop {
        total += comb
            .iter()
            .map(|&e| {
                let i = eligible[e];
                binomial(block_sizes[i], k.sigma[i])
            })
            .product::<u128>();
        if !next_combination(&mut comb, eligible.len()) {
            break;
        }
    }
    total
}

pub fn hirip_constant_exact(h: &HierarchicalOperator, k: &HiSparsity) -> Result<RipEstimate> {
    hirip_constant_exact_with_budget(h, k, DEFAULT_ENUMERATION_BUDGET)
}

/// `δ_{s,σ}(H)`: the largest `‖H_Tᴴ H_T − I‖₂` over `(s, σ)` supports `T`.
///
/// Only supports with exactly `min(s, #{σᵢ > 0})` blocks and exactly `σᵢ`
/// entries per block are visited; smaller supports are principal submatrices
/// of these and cannot have a larger deviation.
pub fn hirip_constant_exact_with_budget(h: &HierarchicalOperator, k: &HiSparsity, budget: u128) -> Result<RipEstimate> {
    let st = h.input_structure();
    k.validate(st)?;
    let total = count_hi_supports(st.block_sizes(), k);
    if total > budget {
        return Err(Error::EnumerationBudget {
            supports: total,
            budget,
        });
    }
    let (eligible, s) = eligible_blocks(k);
    if s == 0 {
        return Ok(RipEstimate {
            delta: 0.0,
            mode: RipMode::ExactEnumeration,
            supports_examined: 1,
            argmax_support: vec![],
        });
    }
    let gram = h.assemble_dense_with_budget(DEFAULT_DENSE_BUDGET)?.gram();

    let mut block_sets = Vec::new();
    let mut comb: Vec<usize> = (0..s).collect();
    loop {
        block_sets.push(comb.iter().map(|&e| eligible[e]).collect::<Vec<_>>());
        if !next_combination(&mut comb, eligible.len()) {
            break;
        }
    }

    let best = block_sets
        .par_iter()
        .map(|blocks| {
            let mut inner: Vec<Vec<usize>> = blocks.iter().map(|&i| (0..k.sigma[i]).collect()).collect();
            let mut best = Best::none();
            let mut flat = Vec::with_capacity(blocks.len() * k.max_sigma());
            loop {
                flat.clear();
                for (&i, c) in blocks.iter().zip(&inner) {
                    flat.extend(c.iter().map(|&j| st.offset(i) + j));
                }
                best.offer(deviation_from_identity(submatrix(&gram, &flat)), &flat);
                // odometer over per-block combinations, last block fastest
                let mut advanced = false;
                for pos in (0..blocks.len()).rev() {
                    let len = st.block_len(blocks[pos]);
                    if next_combination(&mut inner[pos], len) {
                        advanced = true;
                        break;
                    }
                    let sg = inner[pos].len();
                    inner[pos] = (0..sg).collect();
                }
                if !advanced {
                    break;
                }
            }
            best
        })
        .reduce(Best::none, Best::merge);

    Ok(RipEstimate {
        delta: best.delta.max(0.0),
        mode: RipMode::ExactEnumeration,
        supports_examined: total,
        argmax_support: best.support,
    })
}

/// `δ_A + max δ_B + δ_A · max δ_B`.
pub fn hirip_bound(delta_a: f64, delta_bs: &[f64]) -> f64 {
    let db = delta_bs.iter().copied().fold(0.0, f64::max);
    delta_a + db + delta_a * db
}

/// Both sides of the composition bound on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    pub delta_h: f64,
    pub delta_a: f64,
    pub delta_bs: Vec<f64>,
    pub bound: f64,
    /// `bound − δ_H`; non-negative when the bound holds.
    pub slack: f64,
    pub holds: bool,
}

pub const COMPOSITION_TOL: f64 = 1e-10;

pub fn composition_check(h: &HierarchicalOperator, k: &HiSparsity) -> Result<CompositionReport> {
    Ok(composition_from(&rip_constants(h, k, DEFAULT_ENUMERATION_BUDGET)?))
}

/// Exact `δ_{s,σ}(H)`, `δ_s(A)` and every `δ_{σᵢ}(Bᵢ)` of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipConstants {
    pub delta_h: f64,
    pub delta_a: f64,
    pub delta_bs: Vec<f64>,
}

impl RipConstants {
    pub fn max_delta_b(&self) -> f64 {
        self.delta_bs.iter().copied().fold(0.0, f64::max)
    }
}

/// All constants entering the composition bound; each enumeration is capped
/// at `budget` supports.
pub fn rip_constants(h: &HierarchicalOperator, k: &HiSparsity, budget: u128) -> Result<RipConstants> {
    let delta_h = hirip_constant_exact_with_budget(h, k, budget)?.delta;
    let delta_a = rip_constant_exact_with_budget(h.a(), k.s.min(h.num_blocks()), budget)?.delta;
    let delta_bs = h
        .bs()
        .iter()
        .zip(&k.sigma)
        .map(|(b, &sg)| rip_constant_exact_with_budget(b, sg, budget).map(|e| e.delta))
        .collect::<Result<Vec<_>>>()?;
    Ok(RipConstants {
        delta_h,
        delta_a,
        delta_bs,
    })
}

pub fn composition_from(c: &RipConstants) -> CompositionReport {
    let bound = hirip_bound(c.delta_a, &c.delta_bs);
    let slack = bound - c.delta_h;
    CompositionReport {
        delta_h: c.delta_h,
        delta_a: c.delta_a,
        delta_bs: c.delta_bs.clone(),
        bound,
        slack,
        holds: slack >= -COMPOSITION_TOL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnNecessityReport {
    pub delta_h: f64,
    pub column_norms: Vec<f64>,
    /// `δ_{σᵢ}(‖aᵢ‖ Bᵢ)` per block.
    pub scaled_deltas: Vec<f64>,
    /// `min_i (δ_H − δ_{σᵢ}(‖aᵢ‖ Bᵢ))`.
    pub worst_slack: f64,
    pub holds: bool,
}

pub const NECESSITY_TOL: f64 = 1e-10;

/// Checks that every `‖aᵢ‖·Bᵢ` has a `σᵢ`-RIP constant no larger than `δ_{s,σ}(H)`.
pub fn column_necessity_check(h: &HierarchicalOperator, k: &HiSparsity) -> Result<ColumnNecessityReport> {
    let delta_h = hirip_constant_exact(h, k)?.delta;
    column_necessity_with(h, k, delta_h)
}

/// [`column_necessity_check`] with a known `δ_{s,σ}(H)`.
pub fn column_necessity_with(h: &HierarchicalOperator, k: &HiSparsity, delta_h: f64) -> Result<ColumnNecessityReport> {
    let column_norms = h.a().column_norms();
    let scaled_deltas = h
        .bs()
        .iter()
        .zip(&column_norms)
        .zip(&k.sigma)
        .map(|((b, &an), &sg)| rip_constant_exact(&b.scaled(c64::new(an, 0.0)), sg).map(|e| e.delta))
        .collect::<Result<Vec<_>>>()?;
    let worst_slack = scaled_deltas.iter().map(|d| delta_h - d).fold(f64::INFINITY, f64::min);
    Ok(ColumnNecessityReport {
        delta_h,
        column_norms,
        scaled_deltas,
        worst_slack,
        holds: worst_slack >= -NECESSITY_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PremiseOutcome {
    Holds,
    Violated,
    /// `1 − δ_B − ε ≤ 0`: the bound says nothing.
    PremiseVacuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndistinguishabilityReport {
    pub epsilon: f64,
    pub delta_h: f64,
    pub delta_b: f64,
    pub delta_a: f64,
    pub denominator: f64,
    /// `δ_H / (1 − δ_B − ε)²` when the denominator is positive.
    pub bound: Option<f64>,
    pub slack: Option<f64>,
    pub outcome: PremiseOutcome,
}

pub const INDISTINGUISHABILITY_TOL: f64 = 1e-9;

/// Necessity of the `s`-RIP of `A` when the inner matrices cannot tell a
/// collection of sparse block signals apart.
///
/// `blocks` lists `s` distinct block indices and `probes[t]` is a unit-norm
/// `σ`-sparse vector for block `blocks[t]`. With
/// `ε = max ‖Bᵢgᵢ − Bⱼgⱼ‖`, checks `δ_s(A) ≤ δ_{s,σ}(H) / (1 − max δ_{σᵢ}(Bᵢ) − ε)²`.
pub fn prop1_check(
    h: &HierarchicalOperator,
    k: &HiSparsity,
    blocks: &[usize],
    probes: &[Vec<c64>],
) -> Result<IndistinguishabilityReport> {
    k.validate(h.input_structure())?;
    let consts = rip_constants(h, k, DEFAULT_ENUMERATION_BUDGET)?;
    prop1_with(h, k, blocks, probes, &consts)
}

/// [`prop1_check`] with known RIP constants.
pub fn prop1_with(
    h: &HierarchicalOperator,
    k: &HiSparsity,
    blocks: &[usize],
    probes: &[Vec<c64>],
    consts: &RipConstants,
) -> Result<IndistinguishabilityReport> {
    let st = h.input_structure();
    k.validate(st)?;
    if blocks.len() != k.s {
        return Err(Error::InvalidArgument(format!(
            "{} probe blocks for block budget {}",
            blocks.len(),
            k.s
        )));
    }
    if probes.len() != blocks.len() {
        return Err(dim_err(format!("{} probes for {} blocks", probes.len(), blocks.len())));
    }
    let mut sorted = blocks.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("probe blocks must be distinct".into()));
    }
    let mut images = Vec::with_capacity(blocks.len());
    for (&i, g) in blocks.iter().zip(probes) {
        if i >= st.num_blocks() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: st.num_blocks(),
            });
        }
        if g.len() != st.block_len(i) {
            return Err(dim_err(format!("probe for block {i} has length {}", g.len())));
        }
        if (norm(g) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("probe for block {i} is not unit norm")));
        }
        let nnz = g.iter().filter(|v| **v != ZERO).count();
        if nnz > k.sigma[i] {
            return Err(Error::InvalidArgument(format!(
                "probe for block {i} has {nnz} nonzeros, budget {}",
                k.sigma[i]
            )));
        }
        images.push(h.b(i).matvec(g)?);
    }
    let mut epsilon: f64 = 0.0;
    for (p, u) in images.iter().enumerate() {
        for v in &images[p + 1..] {
            epsilon = epsilon.max(norm(&crate::linalg::sub(u, v)));
        }
    }

    let delta_h = consts.delta_h;
    let delta_a = consts.delta_a;
    let delta_b = consts.max_delta_b();
    let denominator = 1.0 - delta_b - epsilon;
    let (bound, slack, outcome) = if denominator > 0.0 {
        let bound = delta_h / (denominator * denominator);
        let slack = bound - delta_a;
        let outcome = if slack >= -INDISTINGUISHABILITY_TOL {
            PremiseOutcome::Holds
        } else {
            PremiseOutcome::Violated
        };
        (Some(bound), Some(slack), outcome)
    } else {
        (None, None, PremiseOutcome::PremiseVacuous)
    };
    Ok(IndistinguishabilityReport {
        epsilon,
        delta_h,
        delta_b,
        delta_a,
        denominator,
        bound,
        slack,
        outcome,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceInequalityReport {
    /// `⟨AᴴA, X⟩` (real for Hermitian `X`).
    pub inner_product: f64,
    pub nuclear_norm: f64,
    pub trace: f64,
    pub sparsity: usize,
    pub delta_s: f64,
    /// `|⟨AᴴA, X⟩ − ‖X‖_*|`.
    pub lhs: f64,
    /// `δ_s(A)·‖X‖_*`.
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

pub const TRACE_TOL: f64 = 1e-9;

/// Checks `|⟨AᴴA, X⟩ − ‖X‖_*| ≤ δ_s(A)‖X‖_*` for a Hermitian `X` whose
/// nonzero rows and columns lie in one index set of size at most `s`.
///
/// The nuclear norm is the sum of absolute eigenvalues. For PSD `X` it equals
/// the trace; for indefinite `X` the inequality is not implied and may fail.
pub fn lemma1_check(a: &CMatrix, x: &CMatrix, s: usize) -> Result<TraceInequalityReport> {
    let n = a.cols();
    if x.rows() != n || x.cols() != n {
        return Err(dim_err(format!("X is {}x{}, A has {n} columns", x.rows(), x.cols())));
    }
    let defect = hermitian_defect(x);
    if defect > 1e-12 {
        return Err(Error::NotHermitian(defect));
    }
    let pattern: Vec<usize> = (0..n)
        .filter(|&i| x.row(i).iter().any(|v| *v != ZERO) || (0..n).any(|r| x.get(r, i) != ZERO))
        .collect();
    if pattern.len() > s {
        return Err(Error::InvalidArgument(format!(
            "X is supported on {} indices, more than s = {s}",
            pattern.len()
        )));
    }
    let s = s.min(n);
    let aa = a.gram();
    let mut inner = ZERO;
    for i in 0..n {
        for j in 0..n {
            inner += aa.get(i, j).conj() * x.get(i, j);
        }
    }
    let ev = hermitian_eigenvalues(x.to_nalgebra());
    let nuclear_norm: f64 = ev.iter().map(|l| l.abs()).sum();
    let trace: f64 = (0..n).map(|i| x.get(i, i).re).sum();
    let delta_s = rip_constant_exact(a, s)?.delta;
    let lhs = (inner.re - nuclear_norm).abs();
    let rhs = delta_s * nuclear_norm;
    Ok(TraceInequalityReport {
        inner_product: inner.re,
        nuclear_norm,
        trace,
        sparsity: s,
        delta_s,
        lhs,
        rhs,
        slack: rhs - lhs,
        holds: lhs <= rhs + TRACE_TOL,
    })
}

/// `G_ij = ⟨Bᵢxᵢ, Bⱼxⱼ⟩` with the inner product conjugate-linear in its
/// second slot, i.e. `(Bⱼxⱼ)ᴴ(Bᵢxᵢ)`. This is the convention under which
/// `‖Hx‖² = ⟨AᴴA, G⟩ = Σ conj((AᴴA)_ij) G_ij` holds for complex entries.
pub fn gram_matrix(h: &HierarchicalOperator, x: &BlockVector) -> Result<CMatrix> {
    x.check_same_structure(h.input_structure())?;
    let n = h.num_blocks();
    let images: Vec<Vec<c64>> = (0..n).map(|i| h.b(i).matvec(x.block(i))).collect::<Result<_>>()?;
    Ok(CMatrix::from_fn(n, n, |i, j| {
        crate::linalg::dot(&images[j], &images[i])
    }))
}
