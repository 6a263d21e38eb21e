use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use pintkit::banded::Banded;
use pintkit::parareal::{random_initial_guess, SolveOptions};
use pintkit::pcgc::{
    build_alpha_circulant, cgc_correct, forward_dft, inverse_dft, pcgc_solve, three_step_solve, ShiftedSystems,
};
use pintkit::propagators::Propagators;
use pintkit::sampling::RngStream;
use pintkit::{CoarseTrajectory, ModelSpec, ParameterSample, SolverConfig, TimeGrid};
use proptest::prelude::*;

fn xi(v: f64) -> ParameterSample {
    ParameterSample::scalar(0, v)
}

fn random_blocks(n: usize, nx: usize, rng: &mut RngStream) -> Vec<DVector<f64>> {
    (0..n).map(|_| DVector::from_fn(nx, |_, _| rng.uniform(-1.0, 1.0))).collect()
}

fn flatten(blocks: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(blocks.iter().map(|b| b.len()).sum(), blocks.iter().flat_map(|b| b.iter().copied()))
}

// All-at-once matrix of (C_alpha (x) I - dT I (x) J).
fn dense_all_at_once(n: usize, alpha: f64, jac: &DMatrix<f64>, dt: f64) -> DMatrix<f64> {
    let nx = jac.nrows();
    let mut m = DMatrix::zeros(n * nx, n * nx);
    let diag = DMatrix::identity(nx, nx) - jac * dt;
    for b in 0..n {
        m.view_mut((b * nx, b * nx), (nx, nx)).copy_from(&diag);
        let (col, coef) = if b == 0 { (n - 1, -alpha) } else { (b - 1, -1.0) };
        let mut v = m.view_mut((b * nx, col * nx), (nx, nx));
        for i in 0..nx {
            v[(i, i)] += coef;
        }
    }
    m
}

fn naive_dft(blocks: &[DVector<Complex64>], sign: f64) -> Vec<DVector<Complex64>> {
    let n = blocks.len();
    let s = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|k| {
            let mut acc = DVector::zeros(blocks[0].len());
            for (j, b) in blocks.iter().enumerate() {
                let w = Complex64::from_polar(1.0, sign * 2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64);
                acc += b * w;
            }
            acc * Complex64::new(s, 0.0)
        })
        .collect()
}

#[test]
fn alpha_circulant_eigenvalues() {
    let s = build_alpha_circulant(1, 0.5).unwrap();
    assert!((s.eigenvalues[0] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    let s = build_alpha_circulant(2, 0.25).unwrap();
    let dense = nalgebra::Matrix2::new(1.0, -0.25, -1.0, 1.0);
    let mut oracle: Vec<f64> = dense.complex_eigenvalues().iter().map(|z| z.re).collect();
    let mut ours: Vec<f64> = s.eigenvalues.iter().map(|z| z.re).collect();
    oracle.sort_by(f64::total_cmp);
    ours.sort_by(f64::total_cmp);
    assert!((oracle[0] - 0.5).abs() < 1e-14 && (oracle[1] - 1.5).abs() < 1e-14);
    assert!((ours[0] - oracle[0]).abs() < 1e-14 && (ours[1] - oracle[1]).abs() < 1e-14);
    let s = build_alpha_circulant(4, 0.1).unwrap();
    let prod = s.eigenvalues.iter().fold(Complex64::new(1.0, 0.0), |a, z| a * z);
    assert!((prod - Complex64::new(s.c_alpha().determinant(), 0.0)).norm() < 1e-12);
    assert!((prod.re - 0.9).abs() < 1e-12);
}

#[test]
fn decomposition_residual_and_condition() {
    for n in [2, 4, 8, 16, 32] {
        for alpha in [0.05, 0.1, 0.5] {
            let s = build_alpha_circulant(n, alpha).unwrap();
            assert!(s.eigen_residual() <= 1e-12);
            let c = s.condition_number();
            assert!((c - alpha.powf(-((n - 1) as f64) / n as f64)).abs() < 1e-9 * c);
            assert!(c <= 1.0 / alpha + 1e-9);
        }
    }
}

#[test]
fn dft_matches_naive_sum() {
    let mut blocks = vec![DVector::from_element(3, Complex64::new(0.0, 0.0)); 4];
    for (i, b) in blocks.iter_mut().enumerate() {
        b[0] = Complex64::new(1.0, 0.0);
        b[1] = Complex64::new(i as f64, -0.5);
    }
    let f = forward_dft(&blocks);
    let inv = inverse_dft(&blocks);
    // forward is F (positive exponent), inverse is F* (negative exponent)
    let of = naive_dft(&blocks, 1.0);
    let oi = naive_dft(&blocks, -1.0);
    for k in 0..4 {
        assert!((&f[k] - &of[k]).camax() < 1e-13);
        assert!((&inv[k] - &oi[k]).camax() < 1e-13);
    }
}

#[test]
fn dft_round_trip() {
    let mut rng = RngStream::new(12);
    for n in [1, 2, 3, 7, 16] {
        let blocks: Vec<DVector<Complex64>> = (0..n)
            .map(|_| DVector::from_fn(5, |_, _| Complex64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))))
            .collect();
        let back = inverse_dft(&forward_dft(&blocks));
        for (a, b) in back.iter().zip(&blocks) {
            assert!((a - b).camax() < 1e-13);
        }
    }
}

#[test]
fn two_block_scalar_system() {
    let s = build_alpha_circulant(2, 0.5).unwrap();
    let zero = Banded::zeros(1, 0, 0);
    let r = vec![DVector::from_element(1, 1.0), DVector::from_element(1, 0.0)];
    let u = three_step_solve(&s, &zero, 1.0, &r).unwrap();
    assert!((u[0][0] - 2.0).abs() < 1e-13 && (u[1][0] - 2.0).abs() < 1e-13);
    let u = three_step_solve(&s, &zero, 1.0, &[DVector::zeros(1), DVector::zeros(1)]).unwrap();
    assert!(u.iter().all(|b| b[0] == 0.0));
}

#[test]
fn eight_block_scalar_system() {
    let s = build_alpha_circulant(8, 0.1).unwrap();
    let mut jac = Banded::zeros(1, 0, 0);
    jac.set(0, 0, -3.0);
    let mut rng = RngStream::new(21);
    let r = random_blocks(8, 1, &mut rng);
    let u = three_step_solve(&s, &jac, 0.1, &r).unwrap();
    let dense = dense_all_at_once(8, 0.1, &jac.to_dense(), 0.1);
    let w = dense.lu().solve(&flatten(&r)).unwrap();
    let got = flatten(&u);
    assert!((&got - &w).amax() <= 1e-10 * w.amax());
}

#[test]
fn leakage_small_for_real_input() {
    let s = build_alpha_circulant(16, 0.1).unwrap();
    let m = ModelSpec::heat1d(16);
    let jac = m.jacobian(&DVector::zeros(15), 0.0, &xi(1.0)).unwrap();
    let sys = ShiftedSystems::new(&s, &jac, 0.05).unwrap();
    let r = random_blocks(16, 15, &mut RngStream::new(2));
    let (u, leak) = sys.solve_with_leakage(&r).unwrap();
    let norm = u.iter().map(|b| b.amax()).fold(0.0, f64::max);
    assert!(leak <= 1e-10 * norm);
}

#[test]
fn two_interval_scalar_correction() {
    let m = ModelSpec::scalar_decay();
    let p = xi(1.0);
    let grid = TimeGrid::new(1.0, 2, 4).unwrap();
    let cfg = SolverConfig {
        alpha: 0.1,
        ..SolverConfig::default()
    };
    let dt = grid.coarse_step;
    let u0 = DVector::from_element(1, 1.0);
    let prev = CoarseTrajectory::new(u0.clone(), vec![DVector::from_element(1, 0.3), DVector::from_element(1, -0.2)]);
    let fine = vec![DVector::from_element(1, 0.61), DVector::from_element(1, 0.37)];
    let out = cgc_correct(&m, &p, &grid, &cfg, &prev, &fine).unwrap();
    // b_n = F_n - G(prev start), with alpha U_N feeding the first interval
    let g = |v: f64| v / (1.0 + dt);
    let b = [0.61 - g(0.1 * -0.2), 0.37 - g(0.3)];
    // U_n (1 + dT) - U_{n-1} = (1 + dT) b_n, U_{-1} = alpha U_N
    let a = nalgebra::Matrix2::new(1.0 + dt, -0.1, -1.0, 1.0 + dt);
    let rhs = nalgebra::Vector2::new((1.0 + dt) * b[0], (1.0 + dt) * b[1]);
    let u = a.try_inverse().unwrap() * rhs;
    assert!((out.states[0][0] - u[0]).abs() < 1e-14);
    assert!((out.states[1][0] - u[1]).abs() < 1e-14);
}

#[test]
fn correction_matches_sequential_elimination() {
    let m = ModelSpec::advection_diffusion(10);
    let p = xi(4.4);
    let grid = TimeGrid::new(1.0, 12, 5).unwrap();
    let cfg = SolverConfig::default();
    let dt = grid.coarse_step;
    let u0 = m.initial_condition(&p);
    let mut rng = RngStream::new(31);
    let prev = random_initial_guess(&u0, 12, &mut rng);
    let fine = random_blocks(12, m.state_dim(), &mut rng);
    let out = cgc_correct(&m, &p, &grid, &cfg, &prev, &fine).unwrap();

    let nx = m.state_dim();
    let a = m.linear_operator(&p).unwrap().to_dense();
    let mmat = (DMatrix::identity(nx, nx) + &a * dt).try_inverse().unwrap();
    let gdense = |v: &DVector<f64>, n: usize| &mmat * (v + m.source(grid.coarse_point(n + 1), &p).unwrap() * dt);
    let alpha = cfg.alpha;
    let b: Vec<DVector<f64>> = (0..12)
        .map(|n| {
            let start = if n == 0 { &prev.states[11] * alpha } else { prev.states[n - 1].clone() };
            &fine[n] - gdense(&start, n)
        })
        .collect();
    // U_n = M U_{n-1} + c_n, U_{-1} = alpha U_{N-1}
    let c: Vec<DVector<f64>> = (0..12).map(|n| gdense(&DVector::zeros(nx), n) + &b[n]).collect();
    let mut s = DVector::zeros(nx);
    let mut mpow = DMatrix::identity(nx, nx);
    for n in 0..12 {
        s = &mmat * s + &c[n];
        mpow = &mmat * mpow;
    }
    let last = (DMatrix::identity(nx, nx) - mpow * alpha).lu().solve(&s).unwrap();
    let mut u = &last * alpha;
    for n in 0..12 {
        u = &mmat * u + &c[n];
        let scale = u.amax();
        assert!((&out.states[n] - &u).amax() <= 1e-10 * scale, "block {n}");
    }
}

#[test]
fn converged_trajectory_is_fixed_point() {
    for (m, p, grid) in [
        (ModelSpec::heat1d(16), 1.3, TimeGrid::new(1.0, 8, 6).unwrap()),
        (ModelSpec::burgers(32), 2.0, TimeGrid::new(2.0, 8, 6).unwrap()),
    ] {
        let p = xi(p);
        let cfg = SolverConfig::default();
        let props = Propagators::new(&m, &p, &grid, &cfg).unwrap();
        let reference = props.fine_reference(&m.initial_condition(&p)).unwrap();
        let fine: Vec<_> = (0..grid.n_coarse)
            .map(|n| props.fine(if n == 0 { &reference.initial } else { &reference.states[n - 1] }, n).unwrap())
            .collect();
        let out = cgc_correct(&m, &p, &grid, &cfg, &reference, &fine).unwrap();
        assert!(out.max_error_against(&reference) <= 1e-10, "{}", m.name());
    }
}

#[test]
fn pcgc_converges_to_reference() {
    for (m, p, grid) in [
        (ModelSpec::advection_diffusion(8), 2.2, TimeGrid::new(1.0, 12, 10).unwrap()),
        (ModelSpec::burgers(32), 1.2, TimeGrid::new(2.0, 10, 8).unwrap()),
        (ModelSpec::allen_cahn(16), 0.3, TimeGrid::new(10.0, 10, 8).unwrap()),
    ] {
        let p = xi(p);
        let cfg = SolverConfig::default();
        let props = Propagators::new(&m, &p, &grid, &cfg).unwrap();
        let u0 = m.initial_condition(&p);
        let reference = props.fine_reference(&u0).unwrap();
        let init = random_initial_guess(&u0, grid.n_coarse, &mut RngStream::new(4));
        let opts = SolveOptions {
            reference: Some(&reference),
            keep_trajectories: false,
        };
        let t = pcgc_solve(&m, &p, &grid, &cfg, &init, opts).unwrap();
        assert!(t.converged);
        assert!(t.final_trajectory.max_error_against(&reference) <= 1e-10, "{}", m.name());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn three_step_matches_dense(n in 1usize..=8, nx in 1usize..=16, alpha in 0.01f64..0.9, dt in 0.01f64..1.0, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let mut jac = Banded::zeros(nx, 1, 1);
        for i in 0..nx {
            jac.set(i, i, rng.uniform(-4.0, 0.0));
            if i + 1 < nx {
                jac.set(i, i + 1, rng.uniform(-1.0, 1.0));
                jac.set(i + 1, i, rng.uniform(-1.0, 1.0));
            }
        }
        let s = build_alpha_circulant(n, alpha).unwrap();
        let r = random_blocks(n, nx, &mut rng);
        let u = three_step_solve(&s, &jac, dt, &r).unwrap();
        let dense = dense_all_at_once(n, alpha, &jac.to_dense(), dt);
        let w = dense.lu().solve(&flatten(&r)).unwrap();
        let got = flatten(&u);
        prop_assert!((&got - &w).amax() <= 1e-10 * w.amax().max(1e-300));
    }
}
