use log::{info, warn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::{BlockStructure, HiSparsity};
use crate::error::{Error, Result};
use crate::linalg::{c64, norm_sqr, CMatrix, ONE, ZERO};
use crate::measurement::{gaussian_matrix, subsampled_dft, HierarchicalOperator};
use crate::rip::{
    column_necessity_with, composition_from, gram_matrix, lemma1_check, prop1_with, rip_constants,
    ColumnNecessityReport, CompositionReport, IndistinguishabilityReport, PremiseOutcome, TraceInequalityReport,
};
use crate::rng::{derive_seed, ids, stream};

use super::signal::{generate_signal, Placement};
use super::{cell_key, ExperimentConfig, TheoremVerifyConfig};

/// Inner-matrix family of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerKind {
    Gaussian,
    Dft,
    Shared,
    Given,
}

#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub seed: u64,
    pub operator: HierarchicalOperator,
    pub sparsity: HiSparsity,
    pub inner_kinds: Vec<InnerKind>,
}

/// Random desk-scale instance: Gaussian `A`, each `Bᵢ` a subsampled DFT or a
/// Gaussian matrix by coin flip (DFT only when `m ≤ nᵢ`).
pub fn random_instance(seed: u64, cfg: &TheoremVerifyConfig) -> Result<RandomInstance> {
    check_limits(cfg)?;
    let mut rng = stream(derive_seed(seed, &[ids::INSTANCE]));
    let blocks = rng.random_range(2..=cfg.max_blocks);
    let antennas = rng.random_range(1..=cfg.max_antennas);
    let m = rng.random_range(2..=cfg.max_per_antenna);
    let sizes: Vec<usize> = (0..blocks).map(|_| rng.random_range(2..=cfg.max_block_len)).collect();
    let s = rng.random_range(1..=cfg.max_s.min(blocks));
    let sigma: Vec<usize> = sizes
        .iter()
        .map(|&n| rng.random_range(1..=cfg.max_sigma.min(n)))
        .collect();

    let a = gaussian_matrix(antennas, blocks, derive_seed(seed, &[ids::MATRIX_A]))?;
    let mut bs = Vec::with_capacity(blocks);
    let mut kinds = Vec::with_capacity(blocks);
    for (i, &n) in sizes.iter().enumerate() {
        let bseed = derive_seed(seed, &[ids::MATRIX_B, i as u64]);
        if m <= n && rng.random_bool(0.5) {
            bs.push(subsampled_dft(m, n, bseed)?);
            kinds.push(InnerKind::Dft);
        } else {
            bs.push(gaussian_matrix(m, n, bseed)?);
            kinds.push(InnerKind::Gaussian);
        }
    }
    Ok(RandomInstance {
        seed,
        operator: HierarchicalOperator::new(a, bs)?,
        sparsity: HiSparsity::new(s, sigma),
        inner_kinds: kinds,
    })
}

/// Random instance in which every block uses the same inner matrix `B`
/// (Gaussian or subsampled DFT) and the same `σ`.
pub fn random_shared_instance(seed: u64, cfg: &TheoremVerifyConfig) -> Result<RandomInstance> {
    check_limits(cfg)?;
    let mut rng = stream(derive_seed(seed, &[ids::INSTANCE]));
    let blocks = rng.random_range(2..=cfg.max_blocks);
    let antennas = rng.random_range(1..=cfg.max_antennas);
    let m = rng.random_range(2..=cfg.max_per_antenna);
    let n = rng.random_range(2..=cfg.max_block_len);
    let s = rng.random_range(1..=cfg.max_s.min(blocks));
    let sigma = rng.random_range(1..=cfg.max_sigma.min(n));

    let a = gaussian_matrix(antennas, blocks, derive_seed(seed, &[ids::MATRIX_A]))?;
    let bseed = derive_seed(seed, &[ids::MATRIX_B]);
    let b = if m <= n && rng.random_bool(0.5) {
        subsampled_dft(m, n, bseed)?
    } else {
        gaussian_matrix(m, n, bseed)?
    };
    Ok(RandomInstance {
        seed,
        operator: HierarchicalOperator::new(a, vec![b; blocks])?,
        sparsity: HiSparsity::uniform(s, sigma, blocks),
        inner_kinds: vec![InnerKind::Shared; blocks],
    })
}

/// `A = [1 … 1]` with `Bᵢ` the `i`-th group of `len` columns of the
/// identity: the inner matrices map into pairwise orthogonal subspaces, so
/// `H` is the identity although `A` is as far from an isometry as possible.
pub fn orthogonal_subspace_instance(blocks: usize, len: usize) -> Result<RandomInstance> {
    if blocks < 2 || len == 0 {
        return Err(Error::InvalidArgument("need at least two non-empty blocks".into()));
    }
    let a = CMatrix::from_fn(1, blocks, |_, _| ONE);
    let m = blocks * len;
    let bs = (0..blocks)
        .map(|i| CMatrix::from_fn(m, len, |r, c| if r == i * len + c { ONE } else { ZERO }))
        .collect();
    Ok(RandomInstance {
        seed: 0,
        operator: HierarchicalOperator::new(a, bs)?,
        sparsity: HiSparsity::uniform(2, len, blocks),
        inner_kinds: vec![InnerKind::Given; blocks],
    })
}

fn check_limits(cfg: &TheoremVerifyConfig) -> Result<()> {
    if cfg.max_blocks < 2
        || cfg.max_antennas == 0
        || cfg.max_per_antenna < 2
        || cfg.max_block_len < 2
        || cfg.max_s == 0
        || cfg.max_sigma == 0
    {
        return Err(Error::Config("theorem-verify limits too small".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub seed: u64,
    #[serde(rename = "M")]
    pub antennas: usize,
    #[serde(rename = "m")]
    pub per_antenna: usize,
    pub block_sizes: Vec<usize>,
    pub s: usize,
    pub sigma: Vec<usize>,
    pub inner_kinds: Vec<InnerKind>,
    pub composition: CompositionReport,
    pub necessity: ColumnNecessityReport,
    pub indistinguishability: IndistinguishabilityReport,
    pub trace: TraceInequalityReport,
    /// `|‖Hx‖² − ⟨AᴴA, G⟩| / ‖Hx‖²` for the Gram matrix `G` of a random signal.
    pub gram_identity_error: f64,
}

impl InstanceReport {
    /// Composition, column necessity and trace inequality all hold and the
    /// indistinguishability bound is not violated.
    pub fn passes(&self) -> bool {
        self.composition.holds
            && self.necessity.holds
            && self.trace.holds
            && self.indistinguishability.outcome != PremiseOutcome::Violated
            && self.gram_identity_error <= GRAM_IDENTITY_TOL
    }
}

pub const GRAM_IDENTITY_TOL: f64 = 1e-10;

/// Runs every rip-lab check on one instance. The probes for the
/// indistinguishability check are the first coordinate of each of the first
/// `s` blocks; the trace check uses the Gram matrix of a random
/// `(s, σ)`-sparse signal, which is PSD and supported on `s` blocks.
pub fn verify_instance(inst: &RandomInstance, budget: u128) -> Result<InstanceReport> {
    let h = &inst.operator;
    let k = &inst.sparsity;
    let st: &BlockStructure = h.input_structure();
    let consts = rip_constants(h, k, budget)?;
    let composition = composition_from(&consts);
    let necessity = column_necessity_with(h, k, consts.delta_h)?;

    let s = k.s.min(st.num_blocks());
    let probe_blocks: Vec<usize> = (0..s).collect();
    let probes: Vec<Vec<c64>> = probe_blocks
        .iter()
        .map(|&i| {
            let mut g = vec![ZERO; st.block_len(i)];
            g[0] = ONE;
            g
        })
        .collect();
    let kk = HiSparsity::new(s, k.sigma.clone());
    let indistinguishability = prop1_with(h, &kk, &probe_blocks, &probes, &consts)?;

    let x = generate_signal(st, &kk, derive_seed(inst.seed, &[ids::SIGNAL]), &Placement::Uniform)?;
    let g = gram_matrix(h, &x)?;
    let trace = lemma1_check(h.a(), &g, s)?;
    let energy = norm_sqr(&h.apply(&x)?);
    let aa = h.a().gram();
    let mut inner = ZERO;
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            inner += aa.get(i, j).conj() * g.get(i, j);
        }
    }
    let gram_identity_error = (energy - inner.re).abs().max(inner.im.abs()) / energy.max(f64::MIN_POSITIVE);

    Ok(InstanceReport {
        seed: inst.seed,
        antennas: h.antennas(),
        per_antenna: h.per_antenna(),
        block_sizes: st.block_sizes().to_vec(),
        s: k.s,
        sigma: k.sigma.clone(),
        inner_kinds: inst.inner_kinds.clone(),
        composition,
        necessity,
        indistinguishability,
        trace,
        gram_identity_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub instances_requested: usize,
    pub instances_checked: usize,
    pub skipped: Vec<String>,
    pub composition_violations: usize,
    pub necessity_violations: usize,
    pub indistinguishability_violations: usize,
    pub indistinguishability_vacuous: usize,
    pub trace_violations: usize,
    pub worst_composition_slack: f64,
    pub worst_necessity_slack: f64,
    pub worst_indistinguishability_slack: Option<f64>,
    pub worst_trace_slack: f64,
    pub max_gram_identity_error: f64,
    pub pass: bool,
    pub instances: Vec<InstanceReport>,
}

impl TheoremReport {
    pub fn from_instances(requested: usize, instances: Vec<InstanceReport>, skipped: Vec<String>) -> Self {
        let fold_min = |f: &dyn Fn(&InstanceReport) -> f64| instances.iter().map(f).fold(f64::INFINITY, f64::min);
        let count = |f: &dyn Fn(&InstanceReport) -> bool| instances.iter().filter(|r| f(r)).count();
        let worst_ind = instances
            .iter()
            .filter_map(|r| r.indistinguishability.slack)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
        Self {
            instances_requested: requested,
            instances_checked: instances.len(),
            skipped,
            composition_violations: count(&|r| !r.composition.holds),
            necessity_violations: count(&|r| !r.necessity.holds),
            indistinguishability_violations: count(&|r| r.indistinguishability.outcome == PremiseOutcome::Violated),
            indistinguishability_vacuous: count(&|r| r.indistinguishability.outcome == PremiseOutcome::PremiseVacuous),
            trace_violations: count(&|r| !r.trace.holds),
            worst_composition_slack: fold_min(&|r| r.composition.slack),
            worst_necessity_slack: fold_min(&|r| r.necessity.worst_slack),
            worst_indistinguishability_slack: worst_ind,
            worst_trace_slack: fold_min(&|r| r.trace.slack),
            max_gram_identity_error: instances.iter().map(|r| r.gram_identity_error).fold(0.0, f64::max),
            pass: instances.iter().all(InstanceReport::passes),
            instances,
        }
    }
}

/// Samples `cfg.theorem.instances` random instances and checks each one.
/// Instances whose enumeration exceeds the budget are skipped and listed.
pub fn run_theorem_verify(cfg: &ExperimentConfig) -> Result<TheoremReport> {
    let tc = &cfg.theorem;
    check_limits(tc)?;
    let budget = tc.enumeration_budget as u128;
    let key = cell_key(&[0x7E0]);
    info!("theorem verify: {} instances", tc.instances);
    let results: Vec<Result<InstanceReport>> = (0..tc.instances)
        .into_par_iter()
        .map(|t| {
            let inst = random_instance(derive_seed(cfg.master_seed, &[key, t as u64]), tc)?;
            verify_instance(&inst, budget)
        })
        .collect();
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(rep) => reports.push(rep),
            Err(Error::EnumerationBudget { supports, budget }) => {
                let why = format!("instance {t}: {supports} supports exceed budget {budget}");
                warn!("{why}; skipped");
                skipped.push(why);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TheoremReport::from_instances(tc.instances, reports, skipped))
}
