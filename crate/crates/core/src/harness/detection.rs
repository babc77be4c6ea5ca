use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block::{is_hi_sparse, BlockStructure, BlockVector, HiSparsity, HiSupport};
use crate::error::{Error, Result};
use crate::measurement::{restrict_columns, HierarchicalOperator};
use crate::rng::{derive_seed, ids};
use crate::solvers::hihtp;

use super::output::TrialRecord;
use super::recovery::{random_operator, recovery_success};
use super::signal::{add_noise, generate_signal, mse, Placement};
use super::{cell_key, ExperimentConfig, Scenario, Snr};

pub const MODE_UNIFORM: &str = "uniform";
pub const MODE_MIXED: &str = "mixed";

/// Fraction of the true active blocks that appear among the estimated ones.
/// `s = 0` counts as perfect detection.
pub fn detection_rate(true_active: &[usize], estimated_active: &[usize], s: usize) -> f64 {
    if s == 0 {
        return 1.0;
    }
    let hits = true_active.iter().filter(|b| estimated_active.contains(b)).count();
    hits as f64 / s as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionCell {
    pub snr_db: Snr,
    #[serde(rename = "M")]
    pub antennas: usize,
    pub mode: String,
    pub s: usize,
    pub sigma: usize,
    pub trials: usize,
    pub mean_detection_rate: f64,
    /// Trials in which every active block was found.
    pub perfect_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub records: Vec<TrialRecord>,
    pub cells: Vec<DetectionCell>,
    pub skipped: Vec<String>,
    pub violations: Vec<String>,
}

/// Detection table recomputed from raw rows, grouped by `(snr, M, mode, s, σ)`
/// in order of first appearance.
pub fn aggregate_detection(records: &[TrialRecord]) -> Vec<DetectionCell> {
    let mut cells: Vec<DetectionCell> = Vec::new();
    for r in records {
        let pos = cells.iter().position(|c| {
            c.snr_db.key() == r.snr_db.key()
                && c.antennas == r.antennas
                && c.mode == r.mode
                && c.s == r.s
                && c.sigma == r.sigma
        });
        let cell = match pos {
            Some(p) => &mut cells[p],
            None => {
                cells.push(DetectionCell {
                    snr_db: r.snr_db,
                    antennas: r.antennas,
                    mode: r.mode.clone(),
                    s: r.s,
                    sigma: r.sigma,
                    trials: 0,
                    mean_detection_rate: 0.0,
                    perfect_trials: 0,
                });
                cells.last_mut().expect("just pushed")
            }
        };
        cell.trials += 1;
        cell.mean_detection_rate += r.detection_rate;
        cell.perfect_trials += (r.detection_rate == 1.0) as usize;
    }
    for c in &mut cells {
        c.mean_detection_rate /= c.trials as f64;
    }
    cells
}

/// Blocks modelled with a short delay spread: the leading
/// `round(N · fraction)` indices.
pub fn short_blocks(blocks: usize, fraction: f64) -> Vec<usize> {
    let count = ((blocks as f64) * fraction).round() as usize;
    (0..count.min(blocks)).collect()
}

/// Operator and block structure seen by the solver in mixed mode: the short
/// blocks keep only the first `short_len` columns of their `Bᵢ`.
pub fn mixed_operator(h: &HierarchicalOperator, short: &[usize], short_len: usize) -> Result<HierarchicalOperator> {
    let bs = h
        .bs()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if short.contains(&i) {
                let keep: Vec<usize> = (0..short_len.min(b.cols())).collect();
                restrict_columns(b, &keep)
            } else {
                Ok(b.clone())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    HierarchicalOperator::new(h.a().clone(), bs)
}

/// Embeds a mixed-mode estimate back into the full block structure.
fn embed(est: &BlockVector, full: &BlockStructure) -> Result<BlockVector> {
    let mut out = BlockVector::zeros(full.clone());
    for i in 0..full.num_blocks() {
        let src = est.block(i);
        out.block_mut(i)[..src.len()].copy_from_slice(src);
    }
    Ok(out)
}

struct Cell {
    antennas: usize,
    snr: Snr,
    s: usize,
    sigma: usize,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    structure: BlockStructure,
    short: Vec<usize>,
}

fn run_trial(ctx: &Ctx<'_>, cell: &Cell, trial: usize) -> Result<Vec<(TrialRecord, Option<String>)>> {
    let cfg = ctx.cfg;
    let seed = derive_seed(
        cfg.master_seed,
        &[
            cell_key(&[
                0xDE7,
                cell.antennas as u64,
                cell.s as u64,
                cell.sigma as u64,
                cell.snr.key(),
            ]),
            trial as u64,
        ],
    );
    let blocks = ctx.structure.num_blocks();
    let k = HiSparsity::uniform(cell.s, cell.sigma, blocks);
    let placement = Placement::FrontLoaded {
        window: cfg.short_block_length,
        designated: ctx.short.clone(),
    };
    let x = generate_signal(&ctx.structure, &k, derive_seed(seed, &[ids::SIGNAL]), &placement)?;
    let h = random_operator(cell.antennas, cfg.per_antenna, &ctx.structure, seed)?;
    let clean = h.apply(&x)?;
    let y = add_noise(&clean, cell.snr, derive_seed(seed, &[ids::NOISE]))?;
    let truth = x.active_blocks();

    let mixed = mixed_operator(&h, &ctx.short, cfg.short_block_length)?;
    let mut out = Vec::with_capacity(2);
    for (mode, op) in [(MODE_UNIFORM, &h), (MODE_MIXED, &mixed)] {
        let start = Instant::now();
        let res = hihtp(op, &y, &k, &cfg.solver)?;
        let est = embed(&res.estimate, &ctx.structure)?;
        let err = mse(&x, &est)?;
        let found: Vec<usize> = res.support.active_blocks().collect();
        let violation = (!is_hi_sparse(&res.estimate, &k)? || !support_fits(&res.support, op))
            .then(|| format!("{mode} trial seed {seed}: estimate leaves the sparsity model"));
        let record = TrialRecord {
            scenario: Scenario::BlockDetection,
            s: cell.s,
            sigma: cell.sigma,
            antennas: cell.antennas,
            blocks,
            per_antenna: cfg.per_antenna,
            snr_db: cell.snr,
            mode: mode.to_string(),
            trial,
            seed,
            mse: err,
            success: recovery_success(&x, &est, &clean, cell.snr, err),
            detection_rate: detection_rate(&truth, &found, cell.s),
            iterations: res.iterations,
            wall_millis: if cfg.record_timing {
                start.elapsed().as_millis() as u64
            } else {
                0
            },
        };
        out.push((record, violation));
    }
    Ok(out)
}

fn support_fits(support: &HiSupport, h: &HierarchicalOperator) -> bool {
    support.validate(h.input_structure()).is_ok()
}

/// Active-block detection with uniform and mixed block lengths. Both modes
/// of a trial share `A`, `Bᵢ`, the signal and the noise, so their detection
/// rates are paired.
pub fn run_block_detection(cfg: &ExperimentConfig) -> Result<DetectionOutcome> {
    cfg.validate()?;
    let structure = cfg.block_lengths.structure(cfg.blocks)?;
    let min_len = structure.block_sizes().iter().copied().min().unwrap_or(0);
    if cfg.per_antenna > min_len {
        return Err(Error::Config(format!(
            "m = {} exceeds the shortest block ({min_len}); subsampled DFT needs m <= n_i",
            cfg.per_antenna
        )));
    }
    if cfg.short_block_length == 0 {
        return Err(Error::Config("short_block_length must be positive".into()));
    }
    let short = short_blocks(cfg.blocks, cfg.short_block_fraction);
    let short_min = short
        .iter()
        .map(|&i| structure.block_len(i).min(cfg.short_block_length))
        .min()
        .unwrap_or(min_len);

    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for &antennas in &cfg.antennas {
        for &snr in &cfg.snr_db {
            for &s in &cfg.s_values {
                for &sigma in &cfg.sigma_values {
                    if s == 0 || s > cfg.blocks || sigma == 0 || sigma > short_min.min(min_len) {
                        let why = format!("cell M={antennas} snr={snr} s={s} sigma={sigma} is infeasible");
                        log::warn!("{why}; skipped");
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
    info!(
        "block detection: {} cells x {} trials x 2 modes",
        cells.len(),
        cfg.trials
    );

    let ctx = Ctx { cfg, structure, short };
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(c, t)| run_trial(&ctx, &cells[c], t))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::with_capacity(2 * results.len());
    let mut violations = Vec::new();
    for (rec, v) in results.into_iter().flatten() {
        records.push(rec);
        violations.extend(v);
    }
    let cells = aggregate_detection(&records);
    Ok(DetectionOutcome {
        records,
        cells,
        skipped,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_formula() {
        assert_eq!(detection_rate(&[1, 3, 5], &[1, 3, 5], 3), 1.0);
        assert_eq!(detection_rate(&[1, 3, 5], &[0, 3, 7], 3), 1.0 / 3.0);
        assert_eq!(detection_rate(&[], &[], 0), 1.0);
    }

    #[test]
    fn short_block_selection() {
        assert_eq!(short_blocks(20, 0.5), (0..10).collect::<Vec<_>>());
        assert!(short_blocks(4, 0.0).is_empty());
    }
}
