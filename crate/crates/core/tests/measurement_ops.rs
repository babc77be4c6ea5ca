mod common;

use common::{dense_by_definition, random_c64, random_operator, random_vector, rng};
use hisparse::block::BlockStructure;
use hisparse::linalg::{c64, dot, norm, CMatrix};
use hisparse::measurement::{
    adjoint_mismatch, gaussian_matrix, kronecker_operator, restrict_columns, subsampled_dft, HierarchicalOperator,
};
use proptest::prelude::*;
use rand::Rng;

fn random_op(seed: u64) -> HierarchicalOperator {
    let mut r = rng(seed);
    let nb = r.random_range(1..6);
    let sizes: Vec<usize> = (0..nb).map(|_| r.random_range(1..7)).collect();
    random_operator(seed, r.random_range(1..5), r.random_range(1..6), &sizes)
}

#[test]
fn dense_assembly_matches_definition() {
    for seed in 0..40 {
        let h = random_op(seed);
        let dense = h.assemble_dense().unwrap();
        let oracle = dense_by_definition(&h);
        assert!(dense.max_abs_diff(&oracle) <= 1e-12);
        let mut r = rng(seed + 100);
        let x = random_vector(&mut r, h.input_structure());
        let y = h.apply(&x).unwrap();
        let yd = dense.matvec(x.coeffs()).unwrap();
        assert!(norm(&hisparse::linalg::sub(&y, &yd)) <= 1e-12 * (1.0 + norm(&yd)));
    }
}

#[test]
fn uniform_operator_is_a_kronecker_product() {
    let a = gaussian_matrix(3, 4, 7).unwrap();
    let b = subsampled_dft(5, 8, 9).unwrap();
    let h = kronecker_operator(&a, &b);
    let dense = h.assemble_dense().unwrap();
    // (A ⊗ B)[(j, r), (i, c)] = A[j, i]·B[r, c]
    let kron = CMatrix::from_fn(15, 32, |row, col| a.get(row / 5, col / 8) * b.get(row % 5, col % 8));
    assert!(dense.max_abs_diff(&kron) <= 1e-14);
}

#[test]
fn single_block_identity_outer_is_plain_multiplication() {
    let b = gaussian_matrix(4, 6, 3).unwrap();
    let h = HierarchicalOperator::new(CMatrix::identity(1), vec![b.clone()]).unwrap();
    let mut r = rng(5);
    let x = random_vector(&mut r, &BlockStructure::uniform(1, 6).unwrap());
    assert_eq!(h.apply(&x).unwrap(), b.matvec(x.coeffs()).unwrap());
}

#[test]
fn dft_columns_have_unit_norm_and_rows_are_orthogonal() {
    let b = subsampled_dft(6, 16, 11).unwrap();
    for n in b.column_norms() {
        assert!((n - 1.0).abs() < 1e-12);
    }
    let bb = b.matmul(&b.adjoint()).unwrap();
    let expect = CMatrix::identity(6).scaled(c64::new(16.0 / 6.0, 0.0));
    assert!(bb.max_abs_diff(&expect) < 1e-12);
}

#[test]
fn restricted_columns_keep_order() {
    let b = gaussian_matrix(3, 10, 2).unwrap();
    let r = restrict_columns(&b, &(0..4).collect::<Vec<_>>()).unwrap();
    assert_eq!((r.rows(), r.cols()), (3, 4));
    for c in 0..4 {
        assert_eq!(r.column(c), b.column(c));
    }
}

#[test]
fn binary_container_round_trips() {
    let h = random_op(3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("op.bin");
    h.write_to(std::fs::File::create(&path).unwrap()).unwrap();
    let back = HierarchicalOperator::read_from(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back, h);
    let mut bytes = h.to_bytes();
    bytes[0] = b'X';
    assert!(HierarchicalOperator::from_bytes(&bytes).is_err());
    assert!(HierarchicalOperator::from_bytes(&h.to_bytes()[..20]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_identity(seed in 0u64..10_000) {
        let h = random_op(seed);
        let mut r = rng(seed ^ 0xA5);
        let x = random_vector(&mut r, h.input_structure());
        let y: Vec<c64> = (0..h.output_dim()).map(|_| random_c64(&mut r)).collect();
        let lhs = dot(&y, &h.apply(&x).unwrap());
        let scale = 1.0 + lhs.norm();
        prop_assert!(adjoint_mismatch(&h, &x, &y).unwrap() <= 1e-10 * scale);
    }

    #[test]
    fn apply_is_linear(seed in 0u64..10_000, re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let h = random_op(seed);
        let mut r = rng(seed ^ 0x5A);
        let x = random_vector(&mut r, h.input_structure());
        let z = random_vector(&mut r, h.input_structure());
        let c = c64::new(re, im);
        let sum: Vec<c64> = x.coeffs().iter().zip(z.coeffs()).map(|(a, b)| a * c + b).collect();
        let lhs = h.apply(&hisparse::BlockVector::from_coeffs(x.structure().clone(), sum).unwrap()).unwrap();
        let hx = h.apply(&x).unwrap();
        let hz = h.apply(&z).unwrap();
        let rhs: Vec<c64> = hx.iter().zip(&hz).map(|(a, b)| a * c + b).collect();
        prop_assert!(norm(&hisparse::linalg::sub(&lhs, &rhs)) <= 1e-10 * (1.0 + norm(&rhs)));
    }
}
