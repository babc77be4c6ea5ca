//! Independent oracles for the integration and acceptance tests.
#![allow(dead_code)]

use hisparse::block::{BlockStructure, BlockVector, HiSparsity};
use hisparse::linalg::{c64, CMatrix};
use hisparse::measurement::{gaussian_matrix, subsampled_dft, HierarchicalOperator};
use hisparse::rng::{derive_seed, stream, StreamRng};
use nalgebra::DMatrix;
use rand::Rng;

pub fn rng(seed: u64) -> StreamRng {
    stream(derive_seed(seed, &[0x7E57]))
}

pub fn random_c64(rng: &mut StreamRng) -> c64 {
    c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_structure(rng: &mut StreamRng, max_blocks: usize, max_len: usize, max_total: usize) -> BlockStructure {
    loop {
        let nb = rng.random_range(1..=max_blocks);
        let sizes: Vec<usize> = (0..nb).map(|_| rng.random_range(1..=max_len)).collect();
        if sizes.iter().sum::<usize>() <= max_total {
            return BlockStructure::new(sizes).unwrap();
        }
    }
}

pub fn random_sparsity(rng: &mut StreamRng, st: &BlockStructure) -> HiSparsity {
    let s = rng.random_range(1..=st.num_blocks());
    let sigma = st.block_sizes().iter().map(|&n| rng.random_range(0..=n)).collect();
    HiSparsity::new(s, sigma)
}

pub fn random_vector(rng: &mut StreamRng, st: &BlockStructure) -> BlockVector {
    let coeffs = (0..st.total_dim()).map(|_| random_c64(rng)).collect();
    BlockVector::from_coeffs(st.clone(), coeffs).unwrap()
}

/// Random operator with Gaussian `A` and a mix of Gaussian and DFT `Bᵢ`.
pub fn random_operator(seed: u64, antennas: usize, m: usize, sizes: &[usize]) -> HierarchicalOperator {
    let a = gaussian_matrix(antennas, sizes.len(), derive_seed(seed, &[1])).unwrap();
    let bs = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let s = derive_seed(seed, &[2, i as u64]);
            if m <= n && i % 2 == 0 {
                subsampled_dft(m, n, s).unwrap()
            } else {
                gaussian_matrix(m, n, s).unwrap()
            }
        })
        .collect();
    HierarchicalOperator::new(a, bs).unwrap()
}

/// All `k`-subsets of `0..n`.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Smallest `‖x − z‖` over all `(s, σ)`-sparse `z`, by exhausting every
/// choice of at most `s` blocks and every `σᵢ`-subset inside them. The
/// residual is summed over the discarded entries, so it has no cancellation.
pub fn best_hi_residual(x: &BlockVector, k: &HiSparsity) -> f64 {
    let st = x.structure();
    // per block: (kept energy, discarded energy) of every σᵢ-subset
    let options: Vec<Vec<(f64, f64)>> = (0..st.num_blocks())
        .map(|i| {
            let blk = x.block(i);
            subsets(blk.len(), k.sigma[i])
                .iter()
                .map(|sub| {
                    let kept: f64 = sub.iter().map(|&j| blk[j].norm_sqr()).sum();
                    let dropped: f64 = (0..blk.len())
                        .filter(|j| !sub.contains(j))
                        .map(|j| blk[j].norm_sqr())
                        .sum();
                    (kept, dropped)
                })
                .collect()
        })
        .collect();
    let full: Vec<f64> = (0..st.num_blocks())
        .map(|i| x.block(i).iter().map(|v| v.norm_sqr()).sum())
        .collect();
    // returns (kept energy, discarded energy) of the best choice for blocks i..
    fn rec(i: usize, left: usize, options: &[Vec<(f64, f64)>], full: &[f64]) -> (f64, f64) {
        if i == options.len() {
            return (0.0, 0.0);
        }
        let (k0, d0) = rec(i + 1, left, options, full);
        let mut best = (k0, d0 + full[i]);
        if left > 0 {
            let (k1, d1) = rec(i + 1, left - 1, options, full);
            for &(ke, de) in &options[i] {
                if ke + k1 > best.0 {
                    best = (ke + k1, de + d1);
                }
            }
        }
        best
    }
    rec(0, k.s, &options, &full).1.sqrt()
}

/// Dense `H` straight from the definition: row `j·m + r`, column
/// `offset(i) + c` holds `A[j, i]·Bᵢ[r, c]`.
pub fn dense_by_definition(h: &HierarchicalOperator) -> CMatrix {
    let st = h.input_structure();
    let m = h.per_antenna();
    let mut out = CMatrix::zeros(h.output_dim(), st.total_dim());
    for j in 0..h.antennas() {
        for i in 0..h.num_blocks() {
            let b = h.b(i);
            for r in 0..m {
                for c in 0..b.cols() {
                    out.set(j * m + r, st.offset(i) + c, h.a().get(j, i) * b.get(r, c));
                }
            }
        }
    }
    out
}

/// Least squares through an SVD, independent of the normal equations.
pub fn svd_least_squares(hs: &CMatrix, y: &[c64]) -> Vec<c64> {
    let m = hs.to_nalgebra();
    let rhs = DMatrix::from_column_slice(y.len(), 1, y);
    let svd = m.svd(true, true);
    svd.solve(&rhs, 1e-12).unwrap().iter().copied().collect()
}

/// `max(σ_max² − 1, 1 − σ_min²)` of the column submatrix, via singular values.
pub fn support_deviation(b: &CMatrix, cols: &[usize]) -> f64 {
    let sub = DMatrix::from_fn(b.rows(), cols.len(), |r, c| b.get(r, cols[c]));
    let sv = sub.singular_values();
    let mut smax: f64 = sv.iter().copied().fold(0.0, f64::max);
    let mut smin: f64 = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if cols.len() > b.rows() {
        smin = 0.0; // rank deficient: missing singular values are zero
    }
    smax *= smax;
    smin *= smin;
    (smax - 1.0).max(1.0 - smin)
}

/// Exact `δ_k(B)` by brute force over all column subsets of size `k`.
pub fn rip_oracle(b: &CMatrix, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    subsets(b.cols(), k)
        .iter()
        .map(|s| support_deviation(b, s))
        .fold(0.0, f64::max)
}

/// Lower bound on `δ_{s,σ}(H)` from random unit `(s, σ)`-sparse probes.
pub fn hirip_probe_lower_bound(h: &HierarchicalOperator, k: &HiSparsity, probes: usize, seed: u64) -> f64 {
    let st = h.input_structure();
    let mut r = rng(seed);
    let mut best: f64 = 0.0;
    for _ in 0..probes {
        let mut x = BlockVector::zeros(st.clone());
        let mut blocks: Vec<usize> = (0..st.num_blocks()).filter(|&i| k.sigma[i] > 0).collect();
        while blocks.len() > k.s {
            let drop = r.random_range(0..blocks.len());
            blocks.remove(drop);
        }
        for &i in &blocks {
            let mut pos: Vec<usize> = (0..st.block_len(i)).collect();
            while pos.len() > k.sigma[i] {
                let drop = r.random_range(0..pos.len());
                pos.remove(drop);
            }
            for &j in &pos {
                x.block_mut(i)[j] = random_c64(&mut r);
            }
        }
        let n = x.norm();
        if n == 0.0 {
            continue;
        }
        let x = x.scaled(c64::new(1.0 / n, 0.0));
        let e: f64 = h.apply(&x).unwrap().iter().map(|v| v.norm_sqr()).sum();
        best = best.max((e - 1.0).abs());
    }
    best
}
