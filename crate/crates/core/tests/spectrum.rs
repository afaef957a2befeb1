use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::seq::SliceRandom;

use fcm::assembly::{assemble_system, Discretization, MethodParams, SparseSymSystem};
use fcm::geometry::make_rectangle;
use fcm::harness::experiments::rotated_square_setup;
use fcm::harness::Solution;
use fcm::point::Vec2;
use fcm::solve::{extreme_eigenvalues, jacobi_scale, solve_spd, spectrum_with_jacobi, SolveOptions};
use fcm::spline::BackgroundGrid;

fn fitted_system() -> SparseSymSystem<f64> {
    let dom = make_rectangle(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)).unwrap();
    let grid = BackgroundGrid::covering(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), 0.125, 3).unwrap();
    let disc = Discretization::new(&dom, grid, 2).unwrap();
    assemble_system(&disc, &MethodParams::default(), &Solution::Trig.problem()).unwrap()
}

fn cholesky(a: &[f64], n: usize) -> Vec<f64> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let d = a[j * n + j] - (0..j).map(|k| l[j * n + k] * l[j * n + k]).sum::<f64>();
        assert!(d > 0.0);
        l[j * n + j] = d.sqrt();
        for i in j + 1..n {
            let s = a[i * n + j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
            l[i * n + j] = s / l[j * n + j];
        }
    }
    l
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    y
}

fn normalize(v: &mut [f64]) {
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= s);
}

fn rayleigh(sys: &SparseSymSystem<f64>, v: &[f64]) -> f64 {
    sys.bilinear(v, v) / v.iter().map(|x| x * x).sum::<f64>()
}

/// Cyclic Jacobi rotations on a dense copy; returns the eigenvalues in ascending order.
fn jacobi_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
        let diag: f64 = (0..n).map(|i| a[i * n + i].powi(2)).sum();
        if off <= 1e-30 * diag {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}

#[test]
fn extreme_eigenvalues_match_jacobi_rotations_and_inverse_iteration() {
    let sys = fitted_system();
    let n = sys.n;
    let oracle = jacobi_eigenvalues(sys.to_dense(), n);
    let (lambda_min, lambda_max) = (oracle[0], oracle[n - 1]);

    let l = cholesky(&sys.to_dense(), n);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..2000 {
        w = cholesky_solve(&l, n, &w);
        normalize(&mut w);
    }
    assert!((rayleigh(&sys, &w) / lambda_min - 1.0).abs() < 1e-6);

    let spec = extreme_eigenvalues(&sys).unwrap();
    assert!((spec.lambda_max / lambda_max - 1.0).abs() < 1e-6, "{} vs {lambda_max}", spec.lambda_max);
    assert!((spec.lambda_min / lambda_min - 1.0).abs() < 1e-6, "{} vs {lambda_min}", spec.lambda_min);
    assert!((spec.kappa / (lambda_max / lambda_min) - 1.0).abs() < 1e-6);
}

#[test]
fn rayleigh_quotients_lie_within_the_spectrum() {
    let sys = fitted_system();
    let spec = extreme_eigenvalues(&sys).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let v: Vec<f64> = (0..sys.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = rayleigh(&sys, &v);
        assert!(r >= spec.lambda_min * (1.0 - 1e-12) && r <= spec.lambda_max * (1.0 + 1e-12));
    }
}

#[test]
fn jacobi_condition_number_is_permutation_invariant() {
    let sys = fitted_system();
    let mut perm: Vec<usize> = (0..sys.n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(13));
    let a = spectrum_with_jacobi(&sys).unwrap().preconditioned_kappa.unwrap();
    let b = spectrum_with_jacobi(&sys.permuted(&perm)).unwrap().preconditioned_kappa.unwrap();
    assert!((a / b - 1.0).abs() < 1e-8);
    let (scaled, _) = jacobi_scale(&sys).unwrap();
    assert!(scaled.diagonal().iter().all(|d| (d - 1.0).abs() < 1e-14));
}

#[test]
fn direct_and_iterative_solves_meet_their_residual_contracts() {
    let sys = fitted_system();
    let direct = solve_spd(&sys, SolveOptions::default()).unwrap();
    assert!(direct.relative_residual <= SolveOptions::default().tol);
    let cg = solve_spd(&sys, SolveOptions::cg()).unwrap();
    assert!(cg.relative_residual <= SolveOptions::cg().tol);
    let diff = direct.coefficients.iter().zip(&cg.coefficients).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let size = direct.coefficients.iter().map(|a| a.abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-8 * size);
}

#[test]
fn vanishing_cut_without_stabilization_is_reported_as_unbounded() {
    let setup = rotated_square_setup(0.09, 1e-6, 2).unwrap();
    let disc = Discretization::new(&setup.domain, setup.grid, 2).unwrap();
    let params = MethodParams { c_alpha: 0.0, ..MethodParams::default() };
    let sys = assemble_system(&disc, &params, &Solution::Trig.problem()).unwrap();
    assert!(extreme_eigenvalues(&sys).unwrap().kappa.is_infinite());

    let stabilized = assemble_system(&disc, &MethodParams::default(), &Solution::Trig.problem()).unwrap();
    assert!(extreme_eigenvalues(&stabilized).unwrap().kappa.is_finite());
}
