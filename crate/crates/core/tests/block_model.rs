mod common;

use common::{best_hi_residual, random_sparsity, random_structure, random_vector, rng};
use hisparse::block::{hi_threshold, is_hi_sparse, BlockStructure, BlockVector, HiSparsity, HiSupport};
use hisparse::linalg::c64;
use proptest::prelude::*;

fn residual(x: &BlockVector, z: &BlockVector) -> f64 {
    x.coeffs()
        .iter()
        .zip(z.coeffs())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[test]
fn threshold_matches_exhaustive_search() {
    let mut r = rng(1);
    for _ in 0..200 {
        let st = random_structure(&mut r, 5, 6, 20);
        let k = random_sparsity(&mut r, &st);
        let x = random_vector(&mut r, &st);
        let (z, _) = hi_threshold(&x, &k).unwrap();
        assert!((residual(&x, &z) - best_hi_residual(&x, &k)).abs() <= 1e-12);
    }
}

#[test]
fn zero_sigma_blocks_are_never_selected() {
    let x = BlockVector::from_blocks(&[&[(9.0, 0.0)], &[(1.0, 0.0)], &[(2.0, 0.0)]]).unwrap();
    let (z, supp) = hi_threshold(&x, &HiSparsity::new(2, vec![0, 1, 1])).unwrap();
    assert_eq!(supp.active_blocks().collect::<Vec<_>>(), vec![1, 2]);
    assert_eq!(z.block(0), &[c64::new(0.0, 0.0)]);
}

#[test]
fn support_of_nonzeros_round_trips() {
    let x = BlockVector::from_blocks(&[
        &[(0.0, 0.0), (1.0, 0.0)],
        &[(0.0, 0.0), (0.0, 0.0)],
        &[(0.0, 2.0), (3.0, 0.0)],
    ])
    .unwrap();
    let s = HiSupport::of_nonzeros(&x);
    assert_eq!(s.flat_indices(x.structure()), vec![1, 4, 5]);
    assert_eq!(s.num_active_blocks(), 2);
}

fn arb_case() -> impl Strategy<Value = (BlockVector, HiSparsity)> {
    proptest::collection::vec(1usize..5, 1..5)
        .prop_flat_map(|sizes| {
            let total: usize = sizes.iter().sum();
            let nb = sizes.len();
            (
                Just(sizes.clone()),
                proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), total),
                1..=nb,
                sizes.iter().map(|&n| 0..=n).collect::<Vec<_>>(),
            )
        })
        .prop_map(|(sizes, vals, s, sigma)| {
            let st = BlockStructure::new(sizes).unwrap();
            let x = BlockVector::from_coeffs(st, vals.into_iter().map(|(a, b)| c64::new(a, b)).collect()).unwrap();
            (x, HiSparsity::new(s, sigma))
        })
}

proptest! {
    #[test]
    fn threshold_is_idempotent((x, k) in arb_case()) {
        let (z, _) = hi_threshold(&x, &k).unwrap();
        let (zz, _) = hi_threshold(&z, &k).unwrap();
        prop_assert_eq!(z, zz);
    }

    #[test]
    fn threshold_output_is_hi_sparse_and_optimal((x, k) in arb_case()) {
        let (z, supp) = hi_threshold(&x, &k).unwrap();
        prop_assert!(is_hi_sparse(&z, &k).unwrap());
        prop_assert!(supp.num_active_blocks() <= k.s);
        for (&b, idx) in supp.entries() {
            prop_assert!(idx.len() <= k.sigma[b]);
        }
        prop_assert!((residual(&x, &z) - best_hi_residual(&x, &k)).abs() <= 1e-12);
    }

    #[test]
    fn sparse_inputs_are_fixed_points((x, k) in arb_case()) {
        let (z, _) = hi_threshold(&x, &k).unwrap();
        prop_assert_eq!(hi_threshold(&z, &k).unwrap().0, z.clone());
        prop_assert!(is_hi_sparse(&z, &k).unwrap());
    }

    #[test]
    fn threshold_commutes_with_scaling((x, k) in arb_case(), re in 0.1f64..4.0, im in -4.0f64..4.0) {
        let c = c64::new(re, im);
        let (z, s1) = hi_threshold(&x, &k).unwrap();
        let (zc, s2) = hi_threshold(&x.scaled(c), &k).unwrap();
        // supports agree unless two scores are within rounding of each other
        if s1 == s2 {
            let diff = residual(&z.scaled(c), &zc);
            prop_assert!(diff <= 1e-12 * (1.0 + x.norm() * c.norm()));
        }
    }
}
