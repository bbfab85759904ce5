use nalgebra::DMatrix;
use proptest::prelude::*;
use qmem::spectral::reconstruction_residual;
use qmem::*;

/// Cyclic Jacobi rotations; slow but independent of the library solver.
fn jacobi_eigenvalues(mut a: DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

fn operating_point(n: usize) -> (SampledKernel, ModeSet) {
    let p = CycleParams::symmetric(10.0, 5.5)
        .unwrap()
        .with_resolution(n, n)
        .unwrap();
    let w = build_half_kernel(&p, Stage::Write).unwrap();
    let g = build_cycle_kernel(&w, &w).unwrap();
    let modes = schmidt_decompose(&g, 10).unwrap();
    (g, modes)
}

#[test]
fn solver_agrees_with_jacobi_rotations() {
    let (g, modes) = operating_point(64);
    let sw: Vec<f64> = g.row_grid().weights().iter().map(|w| w.sqrt()).collect();
    let a = DMatrix::from_fn(64, 64, |i, j| g.get(i, j) * sw[i] * sw[j]);
    let oracle = jacobi_eigenvalues(a);
    for (i, (s, want)) in modes.singular_values().iter().zip(&oracle).enumerate() {
        assert!((s - want.max(0.0)).abs() < 1e-12, "{i}");
    }
}

#[test]
fn leading_value_at_operating_point() {
    let (_, modes) = operating_point(512);
    assert!((modes.singular_value(0) - 1.0).abs() <= 0.02);
    assert!(modes.orthonormality_error() <= 1e-6);
    assert!(modes.singular_values().windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn two_mode_reconstruction_is_limited_by_the_third() {
    let (g, modes) = operating_point(256);
    let two = modes.truncated(2);
    let residual = reconstruction_residual(&two, &g).unwrap();
    let s = modes.singular_values();
    let tail = (s[2..].iter().map(|x| x * x).sum::<f64>() / s.iter().map(|x| x * x).sum::<f64>()).sqrt();
    // the unweighted Frobenius norm tracks the quadrature norm closely
    assert!(residual < 0.15, "{residual}");
    assert!((residual - tail).abs() < 0.25 * tail, "{residual} vs {tail}");
    assert_eq!(reconstruct_kernel(&modes.truncated(0)).max_abs(), 0.0);
}

#[test]
fn repeated_decomposition_is_bitwise_identical() {
    let (g, modes) = operating_point(128);
    assert_eq!(schmidt_decompose(&g, 10).unwrap(), modes);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jacobi_agrees_on_random_symmetric_kernels(entries in proptest::collection::vec(-1.0..1.0f64, 36)) {
        let grid = Grid::new(0.0, 1.0, 6).unwrap();
        let m = DMatrix::from_fn(6, 6, |i, j| entries[i.min(j) * 6 + i.max(j)]);
        let k = SampledKernel::new_symmetric(grid, m.clone()).unwrap();
        let modes = schmidt_decompose(&k, 6).unwrap();
        let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
        let oracle = jacobi_eigenvalues(DMatrix::from_fn(6, 6, |i, j| m[(i, j)] * sw[i] * sw[j]));
        for (s, want) in modes.singular_values().iter().zip(&oracle) {
            prop_assert!((s - want.max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_on_truncation(c in proptest::collection::vec(-1.0..1.0f64, 4), m in 1usize..10) {
        let (_, modes) = operating_point(48);
        let modes = modes.truncated(m);
        let f = SampledFunction::from_fn(*modes.grid(), |t| c[0] + c[1] * t + c[2] * (t * c[3]).sin()).unwrap();
        let energy: f64 = project(&f, &modes).unwrap().iter().map(|x| x * x).sum();
        prop_assert!(energy <= f.dot(&f).unwrap() + 1e-6);
    }
}
