use hisparse::block::{is_hi_sparse, BlockStructure, BlockVector, HiSparsity};
use hisparse::harness::{
    add_noise, aggregate_detection, aggregate_recovery, detection_rate, generate_signal, mse, noise_variance,
    run_block_detection, run_recovery_grid, run_theorem_verify, write_trials_csv, BlockLengths, ExperimentConfig,
    Placement, Scenario, Snr, TheoremReport,
};
use hisparse::linalg::{c64, norm_sqr};

fn small_recovery() -> ExperimentConfig {
    ExperimentConfig {
        antennas: vec![4],
        blocks: 6,
        per_antenna: 6,
        block_lengths: BlockLengths::Uniform(8),
        s_values: vec![1, 2, 7],
        sigma_values: vec![1, 3, 9],
        trials: 6,
        ..ExperimentConfig::desk(Scenario::RecoveryGrid)
    }
}

fn small_detection() -> ExperimentConfig {
    ExperimentConfig {
        antennas: vec![4],
        blocks: 6,
        per_antenna: 8,
        block_lengths: BlockLengths::Uniform(24),
        s_values: vec![2],
        sigma_values: vec![2],
        snr_db: vec![Snr(0.0), Snr::NOISELESS],
        trials: 5,
        short_block_length: 6,
        ..ExperimentConfig::desk(Scenario::BlockDetection)
    }
}

fn csv(records: &[hisparse::harness::TrialRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    write_trials_csv(&mut out, records).unwrap();
    out
}

#[test]
fn noise_hits_the_requested_snr() {
    let y: Vec<c64> = (0..400)
        .map(|i| c64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
        .collect();
    let power = norm_sqr(&y);
    for snr in [-10.0, 0.0, 10.0] {
        let mut noise_power = 0.0;
        for seed in 0..1000 {
            let noisy = add_noise(&y, Snr(snr), seed).unwrap();
            noise_power += noisy.iter().zip(&y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        }
        let measured = 10.0 * (power / (noise_power / 1000.0)).log10();
        assert!((measured - snr).abs() < 0.5, "{measured} vs {snr}");
    }
    assert_eq!(add_noise(&y, Snr::NOISELESS, 3).unwrap(), y);
    assert_eq!(add_noise(&y, Snr(5.0), 3).unwrap(), add_noise(&y, Snr(5.0), 3).unwrap());
    assert!((noise_variance(&y, Snr(0.0)) - power / 400.0).abs() < 1e-12);
}

#[test]
fn front_loaded_blocks_stay_in_their_window() {
    let st = BlockStructure::uniform(8, 40).unwrap();
    let k = HiSparsity::uniform(5, 4, 8);
    let placement = Placement::FrontLoaded {
        window: 10,
        designated: vec![0, 1, 2, 3],
    };
    let mut late_in_free_blocks = 0;
    for seed in 0..1000 {
        let x = generate_signal(&st, &k, seed, &placement).unwrap();
        assert!(is_hi_sparse(&x, &k).unwrap());
        for i in 0..4 {
            assert!(x.block(i)[10..].iter().all(|v| *v == c64::new(0.0, 0.0)));
        }
        late_in_free_blocks += (4..8)
            .filter(|&i| x.block(i)[10..].iter().any(|v| v.norm() > 0.0))
            .count();
    }
    assert!(late_in_free_blocks > 0);
}

#[test]
fn mse_is_translation_invariant() {
    let st = BlockStructure::uniform(2, 3).unwrap();
    let x = BlockVector::from_coeffs(st.clone(), (0..6).map(|i| c64::new(i as f64, 1.0)).collect()).unwrap();
    let z = BlockVector::from_coeffs(st.clone(), (0..6).map(|i| c64::new(1.0, i as f64)).collect()).unwrap();
    let shift = |v: &BlockVector| {
        let c: Vec<c64> = v.coeffs().iter().map(|a| a + c64::new(3.0, -2.0)).collect();
        BlockVector::from_coeffs(st.clone(), c).unwrap()
    };
    let a = mse(&x, &z).unwrap();
    assert!((a - mse(&shift(&x), &shift(&z)).unwrap()).abs() < 1e-12);
}

#[test]
fn recovery_grid_is_deterministic_and_thread_independent() {
    let cfg = small_recovery();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| run_recovery_grid(&cfg)).unwrap();
    let b = three.install(|| run_recovery_grid(&cfg)).unwrap();
    assert_eq!(csv(&a.records), csv(&b.records));
    // s = 7 > N and sigma = 9 > n are skipped
    assert_eq!(a.cells.len(), 4);
    assert_eq!(a.skipped.len(), 5);
    assert!(a.violations.is_empty());
    assert_eq!(aggregate_recovery(&a.records), a.cells);
}

#[test]
fn reordering_cells_keeps_each_record() {
    let cfg = small_recovery();
    let mut rev = cfg.clone();
    rev.s_values.reverse();
    rev.sigma_values.reverse();
    let a = run_recovery_grid(&cfg).unwrap();
    let b = run_recovery_grid(&rev).unwrap();
    for r in &a.records {
        assert!(b.records.contains(r));
    }
}

#[test]
fn detection_pairs_modes_and_recomputes() {
    let cfg = small_detection();
    let out = run_block_detection(&cfg).unwrap();
    assert_eq!(out.records.len(), 2 * 2 * 5);
    assert!(out.violations.is_empty());
    assert_eq!(aggregate_detection(&out.records), out.cells);
    for pair in out.records.chunks(2) {
        assert_eq!(pair[0].seed, pair[1].seed);
        assert_eq!((pair[0].mode.as_str(), pair[1].mode.as_str()), ("uniform", "mixed"));
    }
    for r in &out.records {
        assert!((0.0..=1.0).contains(&r.detection_rate));
    }
    assert_eq!(csv(&out.records), csv(&run_block_detection(&cfg).unwrap().records));
}

#[test]
fn oracle_support_detects_everything() {
    let truth = vec![0, 4, 7];
    assert_eq!(detection_rate(&truth, &truth, 3), 1.0);
    assert_eq!(detection_rate(&truth, &[4], 3), 1.0 / 3.0);
}

#[test]
fn theorem_report_round_trips() {
    let mut cfg = ExperimentConfig::desk(Scenario::TheoremVerify);
    cfg.theorem.instances = 12;
    let report = run_theorem_verify(&cfg).unwrap();
    assert_eq!(report.instances_checked + report.skipped.len(), 12);
    assert!(report.pass);
    let text = serde_json::to_string(&report).unwrap();
    let back: TheoremReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
}

#[test]
fn config_presets_validate() {
    for sc in [
        Scenario::RecoveryGrid,
        Scenario::BlockDetection,
        Scenario::TheoremVerify,
    ] {
        ExperimentConfig::desk(sc).validate().unwrap();
        ExperimentConfig::paper(sc).validate().unwrap();
    }
    let paper = ExperimentConfig::paper(Scenario::RecoveryGrid);
    assert_eq!((paper.antennas[0], paper.blocks, paper.per_antenna), (40, 50, 50));
}
