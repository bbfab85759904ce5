use nalgebra::{DMatrix, SymmetricEigen};
use qmem::*;

fn params(n: usize) -> CycleParams {
    CycleParams::symmetric(10.0, 5.5)
        .unwrap()
        .with_resolution(n, n)
        .unwrap()
}

#[test]
fn point_at_entrance_face() {
    let got = half_kernel_point(0.0, 2.0, 20001).unwrap();
    assert!((got - 2.0_f64.sin() / 2.0_f64.sqrt()).abs() < 1e-8);
}

#[test]
fn operating_point_sample_is_real() {
    // the imaginary residual is checked inside the evaluation
    let v = half_kernel_point(10.0, 5.5, 512).unwrap();
    assert!(v.is_finite());
}

#[test]
fn write_and_read_kernels_identical() {
    let p = params(256);
    let w = build_half_kernel(&p, Stage::Write).unwrap();
    let r = build_half_kernel(&p, Stage::Read).unwrap();
    assert_eq!(w.values(), r.values());
    assert!(w.column(0).iter().all(|v| *v == 0.0));
}

#[test]
fn refining_inner_rule_changes_little() {
    // doubling every resolution leaves the coarse nodes in place, so the
    // change at shared nodes is the change of the inner rule alone
    let coarse = build_half_kernel(&params(512), Stage::Write).unwrap();
    let fine = build_half_kernel(&params(512).with_inner_nodes(1023).unwrap(), Stage::Write).unwrap();
    let change = (coarse.values() - fine.values()).amax();
    assert!(change <= 1e-4, "{change:e}");
}

#[test]
fn cycle_kernel_symmetry_and_spectrum() {
    let p = params(512);
    let w = build_half_kernel(&p, Stage::Write).unwrap();
    let g = build_cycle_kernel(&w, &w).unwrap();
    assert!(g.is_symmetric());
    assert!(g.asymmetry().unwrap() <= 1e-10);

    let grid = p.stage_grid(Stage::Write);
    let sw: Vec<f64> = grid.weights().iter().map(|x| x.sqrt()).collect();
    let a = DMatrix::from_fn(512, 512, |i, j| g.get(i, j) * sw[i] * sw[j]);
    let eig = SymmetricEigen::new(a);
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    assert!(min >= -1e-9, "{min:e}");
    assert!((max - 1.0).abs() <= 0.02, "{max}");
}

#[test]
fn out_of_model_durations_still_build() {
    let p = CycleParams::symmetric(10.0, 12.0)
        .unwrap()
        .with_resolution(24, 24)
        .unwrap();
    assert!(p.out_of_model());
    assert!(build_half_kernel(&p, Stage::Write).is_ok());
}

#[test]
fn ratio_for_double_read_window() {
    let p = CycleParams::new(10.0, 5.5, 11.0)
        .unwrap()
        .with_resolution(24, 24)
        .unwrap();
    let s = symmetrize_asymmetric(&p).unwrap();
    assert_eq!(s.k, 0.5);
}

#[test]
fn unequal_durations_against_reference_values() {
    // Reference values from an independent dense evaluation of the same
    // discretization (201 points on every axis).
    let p = CycleParams::new(10.0, 4.0, 8.0)
        .unwrap()
        .with_resolution(201, 201)
        .unwrap();
    let s = symmetrize_asymmetric(&p).unwrap();
    assert!(s.kernel.is_symmetric());
    assert!((s.asymmetry - 0.6969312503281085).abs() < 1e-8, "{}", s.asymmetry);

    let svd = [0.99778291, 0.59894753];
    let write = build_half_kernel(&p, Stage::Write).unwrap();
    let read = build_half_kernel(&p, Stage::Read).unwrap();
    let exact = singular_decompose(&build_cycle_kernel(&write, &read).unwrap(), 2).unwrap();
    for (i, want) in svd.iter().enumerate() {
        let got = exact.left.singular_value(i);
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
    assert!(exact.left.orthonormality_error() < 1e-9);
    assert!(exact.right.orthonormality_error() < 1e-9);

    // the symmetric part loses most of the leading value once the asymmetry is this large
    let approx = s.cycle_singular_value(schmidt_decompose(&s.kernel, 1).unwrap().singular_value(0));
    assert!(svd[0] - approx > 0.05, "{approx}");
}

#[test]
fn singular_and_schmidt_agree_for_equal_windows() {
    let p = params(128);
    let w = build_half_kernel(&p, Stage::Write).unwrap();
    let g = build_cycle_kernel(&w, &w).unwrap();
    let sym = schmidt_decompose(&g, 4).unwrap();
    let svd = singular_decompose(&g, 4).unwrap();
    for i in 0..4 {
        assert!((sym.singular_value(i) - svd.left.singular_value(i)).abs() < 1e-10);
        let overlap = g.row_grid().inner(sym.values(i), svd.left.values(i));
        assert!((overlap - 1.0).abs() < 1e-6, "{i}: {overlap}");
        let right = g.row_grid().inner(svd.left.values(i), svd.right.values(i));
        assert!((right - 1.0).abs() < 1e-6, "{i}: {right}");
    }
}
