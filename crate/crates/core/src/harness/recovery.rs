use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::{is_hi_sparse, BlockStructure, BlockVector, HiSparsity};
use crate::error::{Error, Result};
use crate::linalg::{c64, norm, sub};
use crate::measurement::{gaussian_matrix, subsampled_dft, HierarchicalOperator};
use crate::rng::{derive_seed, ids};
use crate::solvers::hihtp;

use super::output::TrialRecord;
use super::signal::{add_noise, generate_signal, mse, noise_variance, Placement};
use super::{cell_key, detection_rate, ExperimentConfig, Scenario, Snr};

/// Relative error below which a noiseless trial counts as recovered.
pub const NOISELESS_SUCCESS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCell {
    #[serde(rename = "M")]
    pub antennas: usize,
    pub s: usize,
    pub sigma: usize,
    pub snr_db: Snr,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Binomial standard error of `success_rate`.
    pub std_error: f64,
    pub mean_mse: f64,
    pub mean_detection_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOutcome {
    pub records: Vec<TrialRecord>,
    pub cells: Vec<RecoveryCell>,
    pub skipped: Vec<String>,
    /// Broken invariants (estimate outside the sparsity model and similar).
    pub violations: Vec<String>,
}

/// Success-rate table recomputed from raw rows, grouped by
/// `(M, snr, s, σ)` in order of first appearance.
pub fn aggregate_recovery(records: &[TrialRecord]) -> Vec<RecoveryCell> {
    let mut cells: Vec<RecoveryCell> = Vec::new();
    for r in records {
        let pos = cells.iter().position(|c| {
            c.antennas == r.antennas && c.s == r.s && c.sigma == r.sigma && c.snr_db.key() == r.snr_db.key()
        });
        let cell = match pos {
            Some(p) => &mut cells[p],
            None => {
                cells.push(RecoveryCell {
                    antennas: r.antennas,
                    s: r.s,
                    sigma: r.sigma,
                    snr_db: r.snr_db,
                    trials: 0,
                    successes: 0,
                    success_rate: 0.0,
                    std_error: 0.0,
                    mean_mse: 0.0,
                    mean_detection_rate: 0.0,
                });
                cells.last_mut().expect("just pushed")
            }
        };
        cell.trials += 1;
        cell.successes += r.success as usize;
        cell.mean_mse += r.mse;
        cell.mean_detection_rate += r.detection_rate;
    }
    for c in &mut cells {
        let n = c.trials as f64;
        c.success_rate = c.successes as f64 / n;
        c.std_error = (c.success_rate * (1.0 - c.success_rate) / n).sqrt();
        c.mean_mse /= n;
        c.mean_detection_rate /= n;
    }
    cells
}

/// Gaussian `A` and independently subsampled DFT `Bᵢ`, all from `seed`.
pub(crate) fn random_operator(
    antennas: usize,
    per_antenna: usize,
    structure: &BlockStructure,
    seed: u64,
) -> Result<HierarchicalOperator> {
    let a = gaussian_matrix(antennas, structure.num_blocks(), derive_seed(seed, &[ids::MATRIX_A]))?;
    let bs = structure
        .block_sizes()
        .iter()
        .enumerate()
        .map(|(i, &n)| subsampled_dft(per_antenna, n, derive_seed(seed, &[ids::MATRIX_B, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    HierarchicalOperator::new(a, bs)
}

struct Cell {
    antennas: usize,
    snr: Snr,
    s: usize,
    sigma: usize,
}

fn run_trial(
    cfg: &ExperimentConfig,
    structure: &BlockStructure,
    cell: &Cell,
    trial: usize,
) -> Result<(TrialRecord, Option<String>)> {
    let start = Instant::now();
    let seed = derive_seed(
        cfg.master_seed,
        &[
            cell_key(&[cell.antennas as u64, cell.s as u64, cell.sigma as u64, cell.snr.key()]),
            trial as u64,
        ],
    );
    let k = HiSparsity::uniform(cell.s, cell.sigma, structure.num_blocks());
    let h = random_operator(cell.antennas, cfg.per_antenna, structure, seed)?;
    let x = generate_signal(structure, &k, derive_seed(seed, &[ids::SIGNAL]), &Placement::Uniform)?;
    let clean = h.apply(&x)?;
    let y = add_noise(&clean, cell.snr, derive_seed(seed, &[ids::NOISE]))?;
    let res = hihtp(&h, &y, &k, &cfg.solver)?;

    let err = mse(&x, &res.estimate)?;
    let success = recovery_success(&x, &res.estimate, &clean, cell.snr, err);
    let violation = (!is_hi_sparse(&res.estimate, &k)?)
        .then(|| format!("trial seed {seed}: estimate is not ({}, {})-sparse", cell.s, cell.sigma));
    let record = TrialRecord {
        scenario: Scenario::RecoveryGrid,
        s: cell.s,
        sigma: cell.sigma,
        antennas: cell.antennas,
        blocks: structure.num_blocks(),
        per_antenna: cfg.per_antenna,
        snr_db: cell.snr,
        mode: "uniform".into(),
        trial,
        seed,
        mse: err,
        success,
        detection_rate: detection_rate(
            &x.active_blocks(),
            &res.support.active_blocks().collect::<Vec<_>>(),
            cell.s,
        ),
        iterations: res.iterations,
        wall_millis: if cfg.record_timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        },
    };
    Ok((record, violation))
}

/// Noisy trials succeed when the MSE is at most the per-entry noise variance;
/// noiseless ones when the relative error is at most [`NOISELESS_SUCCESS_TOL`].
pub(crate) fn recovery_success(x: &BlockVector, xhat: &BlockVector, clean: &[c64], snr: Snr, err: f64) -> bool {
    if snr.is_noiseless() {
        let diff = norm(&sub(x.coeffs(), xhat.coeffs()));
        diff <= NOISELESS_SUCCESS_TOL * x.norm()
    } else {
        err <= noise_variance(clean, snr)
    }
}

pub fn run_recovery_grid(cfg: &ExperimentConfig) -> Result<RecoveryOutcome> {
    cfg.validate()?;
    let structure = cfg.block_lengths.structure(cfg.blocks)?;
    let min_len = structure.block_sizes().iter().copied().min().unwrap_or(0);
    if cfg.per_antenna > min_len {
        return Err(Error::Config(format!(
            "m = {} exceeds the shortest block ({min_len}); subsampled DFT needs m <= n_i",
            cfg.per_antenna
        )));
    }

    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for &antennas in &cfg.antennas {
        for &snr in &cfg.snr_db {
            for &s in &cfg.s_values {
                for &sigma in &cfg.sigma_values {
                    if s == 0 || s > cfg.blocks || sigma == 0 || sigma > min_len {
                        let why = format!("cell M={antennas} snr={snr} s={s} sigma={sigma} is infeasible");
                        warn!("{why}; skipped");
                        skipped.push(why);
                        continue;
                    }
                    cells.push(Cell {
                        antennas,
                        snr,
                        s,
                        sigma,
                    });
                }
            }
        }
    }
    info!("recovery grid: {} cells x {} trials", cells.len(), cfg.trials);

    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(c, t)| run_trial(cfg, &structure, &cells[c], t))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::with_capacity(results.len());
    let mut violations = Vec::new();
    for (rec, v) in results {
        records.push(rec);
        violations.extend(v);
    }
    let cells = aggregate_recovery(&records);
    Ok(RecoveryOutcome {
        records,
        cells,
        skipped,
        violations,
    })
}
