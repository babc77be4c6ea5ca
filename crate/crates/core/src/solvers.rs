//! HiHTP, a flat HTP baseline, and the restricted least-squares refit they
//! share.
//!
//! Both solvers run the same loop from `x⁰ = 0`:
//!
//! 1. `u = xᵏ + Hᴴ(y − H xᵏ)` (unit step),
//! 2. `Sᵏ⁺¹` = support of the projection of `u` (hierarchical or top-K),
//! 3. `xᵏ⁺¹` = least-squares fit of `y` on the columns in `Sᵏ⁺¹`,
//!
//! stopping when the support repeats, the residual drops below
//! `residual_tol·‖y‖`, or `max_iters` refits have been done.

use nalgebra::{DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::block::{hi_threshold, restrict, BlockVector, HiSparsity, HiSupport};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{c64, norm, norm_sqr, sub, CMatrix, ZERO};
use crate::measurement::HierarchicalOperator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub support_stall_stop: bool,
    pub residual_tol: f64,
    pub ls_tol: f64,
    pub ls_max_iters: usize,
    /// Restricted systems with at most this many columns are solved by
    /// Cholesky on the normal equations, larger ones by CGLS.
    pub direct_solve_max_cols: usize,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            support_stall_stop: true,
            residual_tol: 1e-7,
            ls_tol: 1e-10,
            ls_max_iters: 1000,
            direct_solve_max_cols: 512,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.ls_max_iters == 0 {
            return Err(Error::Config("iteration caps must be at least 1".into()));
        }
        if !(self.residual_tol >= 0.0 && self.ls_tol >= 0.0) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    SupportRepeat,
    Residual,
    MaxIters,
    LeastSquaresFailure,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::SupportRepeat => "support-repeat",
            StopReason::Residual => "residual",
            StopReason::MaxIters => "max-iters",
            StopReason::LeastSquaresFailure => "least-squares-failure",
        }
    }
}

/// Per-iteration diagnostics, recorded when `record_trace` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub support: HiSupport,
    /// `‖y − H·restrict(u, S)‖` for the thresholded gradient iterate.
    pub thresholded_residual: f64,
    /// `‖y − H xᵏ⁺¹‖` after the refit.
    pub refit_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub estimate: BlockVector,
    pub support: HiSupport,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<IterationTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LsStatus {
    Converged,
    NotConverged,
    RankDeficient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub estimate: BlockVector,
    pub status: LsStatus,
    /// CGLS iterations; zero for the direct path.
    pub iterations: usize,
}

/// Minimizes `‖y − H z‖` over `z` supported in `support`.
pub fn least_squares_on_support(
    h: &HierarchicalOperator,
    y: &[c64],
    support: &HiSupport,
    cfg: &SolverConfig,
) -> Result<LeastSquares> {
    let st = h.input_structure();
    support.validate(st)?;
    if y.len() != h.output_dim() {
        return Err(dim_err(format!(
            "measurement vector of length {}, operator outputs {}",
            y.len(),
            h.output_dim()
        )));
    }
    let cols = support.flat_indices(st);
    let mut estimate = BlockVector::zeros(st.clone());
    if cols.is_empty() {
        return Ok(LeastSquares {
            estimate,
            status: LsStatus::Converged,
            iterations: 0,
        });
    }

    let hs = h.columns(&cols)?;
    let (z, status, iterations) = if cols.len() > hs.rows() {
        let (z, _, it) = cgls(&hs, y, cfg.ls_tol, cfg.ls_max_iters);
        (z, LsStatus::RankDeficient, it)
    } else if cols.len() <= cfg.direct_solve_max_cols {
        match cholesky_solve(&hs, y) {
            Some(z) => (z, LsStatus::Converged, 0),
            None => {
                let (z, _, it) = cgls(&hs, y, cfg.ls_tol, cfg.ls_max_iters);
                (z, LsStatus::RankDeficient, it)
            }
        }
    } else {
        let (z, ok, it) = cgls(&hs, y, cfg.ls_tol, cfg.ls_max_iters);
        let status = if ok {
            LsStatus::Converged
        } else {
            LsStatus::NotConverged
        };
        (z, status, it)
    };

    let coeffs = estimate.coeffs_mut();
    for (&f, v) in cols.iter().zip(z) {
        coeffs[f] = v;
    }
    Ok(LeastSquares {
        estimate,
        status,
        iterations,
    })
}

/// Solves the normal equations `HsᴴHs z = Hsᴴy` by Cholesky. Returns `None`
/// when the Gram matrix is numerically singular.
fn cholesky_solve(hs: &CMatrix, y: &[c64]) -> Option<Vec<c64>> {
    let gram = hs.gram().to_nalgebra();
    let rhs = DVector::from_vec(hs.adjoint_matvec(y).ok()?);
    let max_diag = (0..gram.nrows()).map(|i| gram[(i, i)].re).fold(0.0, f64::max);
    let chol = gram.cholesky()?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows())
        .map(|i| l[(i, i)].re.powi(2))
        .fold(f64::INFINITY, f64::min);
    // also rejects NaN pivots
    if min_pivot.is_nan() || min_pivot <= 1e-13 * max_diag {
        return None;
    }
    let sol: DVector<c64> = chol.solve(&rhs);
    debug_assert_eq!(sol.shape_generic().0, Dyn(hs.cols()));
    Some(sol.iter().copied().collect())
}

/// CGLS on `min ‖y − Hs z‖`; stops once `‖Hsᴴ r‖ ≤ tol·‖Hsᴴ y‖`.
fn cgls(hs: &CMatrix, y: &[c64], tol: f64, max_iters: usize) -> (Vec<c64>, bool, usize) {
    let n = hs.cols();
    let mut z = vec![ZERO; n];
    let mut r = y.to_vec();
    let mut s = hs.adjoint_matvec(&r).expect("shapes agree");
    let target = tol * norm(&s);
    let mut p = s.clone();
    let mut gamma = norm_sqr(&s);
    if gamma.sqrt() <= target {
        return (z, true, 0);
    }
    let mut q = vec![ZERO; hs.rows()];
    for it in 1..=max_iters {
        hs.matvec_into(&p, &mut q);
        let qq = norm_sqr(&q);
        if qq == 0.0 {
            return (z, false, it);
        }
        let alpha = gamma / qq;
        for (zi, pi) in z.iter_mut().zip(&p) {
            *zi += pi * alpha;
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= qi * alpha;
        }
        hs.adjoint_matvec_into(&r, &mut s);
        let gamma_new = norm_sqr(&s);
        if gamma_new.sqrt() <= target {
            return (z, true, it);
        }
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + *pi * beta;
        }
    }
    (z, false, max_iters)
}

/// Largest-magnitude `k` coordinates over the whole vector, lower index on
/// ties, grouped into a block support.
pub fn flat_threshold_support(u: &BlockVector, k: usize) -> HiSupport {
    let st = u.structure();
    let mags: Vec<f64> = u.coeffs().iter().map(|v| v.norm_sqr()).collect();
    let mut idx: Vec<usize> = (0..mags.len()).collect();
    idx.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]).then(a.cmp(&b)));
    idx.truncate(k);
    let mut grouped: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for f in idx {
        let (b, j) = st.locate(f).expect("index inside vector");
        grouped.entry(b).or_default().push(j);
    }
    HiSupport::from_entries(grouped)
}

fn htp_loop<P>(h: &HierarchicalOperator, y: &[c64], cfg: &SolverConfig, mut project: P) -> Result<SolverResult>
where
    P: FnMut(&BlockVector) -> Result<HiSupport>,
{
    cfg.validate()?;
    if y.len() != h.output_dim() {
        return Err(dim_err(format!(
            "measurement vector of length {}, operator outputs {}",
            y.len(),
            h.output_dim()
        )));
    }
    let y_norm = norm(y);
    let mut x = BlockVector::zeros(h.input_structure().clone());
    let mut support: Option<HiSupport> = None;
    let mut residual = y.to_vec();
    let mut residual_norm = y_norm;
    let mut trace = Vec::new();

    let mut iterations = 0;
    let mut stop = StopReason::MaxIters;
    while iterations < cfg.max_iters {
        let grad = h.adjoint_apply(&residual)?;
        let mut u = x.clone();
        for (ui, gi) in u.coeffs_mut().iter_mut().zip(grad.coeffs()) {
            *ui += gi;
        }
        let next = project(&u)?;
        if cfg.support_stall_stop && support.as_ref() == Some(&next) {
            stop = StopReason::SupportRepeat;
            break;
        }

        let ls = least_squares_on_support(h, y, &next, cfg)?;
        iterations += 1;
        x = ls.estimate;
        residual = sub(y, &h.apply(&x)?);
        residual_norm = norm(&residual);
        if cfg.record_trace {
            let thresholded = restrict(&u, &next)?;
            trace.push(IterationTrace {
                support: next.clone(),
                thresholded_residual: norm(&sub(y, &h.apply(&thresholded)?)),
                refit_residual: residual_norm,
            });
        }
        support = Some(next);

        if ls.status != LsStatus::Converged {
            stop = StopReason::LeastSquaresFailure;
            break;
        }
        if residual_norm <= cfg.residual_tol * y_norm {
            stop = StopReason::Residual;
            break;
        }
    }

    Ok(SolverResult {
        estimate: x,
        support: support.unwrap_or_default(),
        iterations,
        residual_norm,
        converged: matches!(stop, StopReason::SupportRepeat | StopReason::Residual),
        stop_reason: stop,
        trace,
    })
}

/// Hierarchical hard thresholding pursuit.
pub fn hihtp(h: &HierarchicalOperator, y: &[c64], k: &HiSparsity, cfg: &SolverConfig) -> Result<SolverResult> {
    k.validate(h.input_structure())?;
    htp_loop(h, y, cfg, |u| hi_threshold(u, k).map(|(_, s)| s))
}

/// Default flat budget for the baseline: `s · maxᵢ σᵢ`.
pub fn default_flat_budget(k: &HiSparsity) -> usize {
    k.s * k.max_sigma()
}

/// HTP with unstructured top-`k_total` thresholding.
pub fn htp_flat(h: &HierarchicalOperator, y: &[c64], k_total: usize, cfg: &SolverConfig) -> Result<SolverResult> {
    if k_total == 0 || k_total > h.input_structure().total_dim() {
        return Err(Error::InvalidArgument(format!(
            "flat budget {k_total} outside 1..={}",
            h.input_structure().total_dim()
        )));
    }
    htp_loop(h, y, cfg, |u| Ok(flat_threshold_support(u, k_total)))
}
