use nalgebra::{DMatrix, DVector};
use pintkit::propagators::{backward_euler_step, propagate_F, propagate_G, Propagators};
use pintkit::sampling::RngStream;
use pintkit::{ModelSpec, ParameterSample, SolverConfig, TimeGrid};

fn xi(v: f64) -> ParameterSample {
    ParameterSample::scalar(0, v)
}

fn random_state(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = RngStream::new(seed);
    DVector::from_fn(n, |_, _| rng.uniform(-1.0, 1.0))
}

#[test]
fn scalar_step_is_stability_function() {
    let m = ModelSpec::scalar_decay();
    let cfg = SolverConfig::default();
    let u = DVector::from_element(1, 1.0);
    let v = backward_euler_step(&u, 0.0, 1.0, &m, &xi(1.0), &cfg).unwrap();
    assert!((v[0] - 0.5).abs() < 1e-15);
    for (lam, dt) in [(3.0, 0.2), (0.01, 5.0), (100.0, 0.1)] {
        let v = backward_euler_step(&u, 0.0, dt, &m, &xi(lam), &cfg).unwrap();
        assert!((v[0] - 1.0 / (1.0 + lam * dt)).abs() < 1e-15);
    }
}

#[test]
fn newton_residual_small() {
    let cfg = SolverConfig::default();
    for (m, p, dt) in [(ModelSpec::burgers(100), 2.0, 0.08), (ModelSpec::allen_cahn(64), 0.1, 1.0)] {
        let u = m.initial_condition(&xi(p));
        let v = backward_euler_step(&u, 0.0, dt, &m, &xi(p), &cfg).unwrap();
        let res = ((&v - &u) / dt - m.rhs(&v, dt, &xi(p)).unwrap()).amax();
        assert!(res <= cfg.newton_tol, "{}: {res}", m.name());
    }
}

#[test]
fn burgers_matches_picard_iteration() {
    let m = ModelSpec::burgers(20);
    let cfg = SolverConfig::default();
    let p = xi(2.0);
    let dt = 0.002;
    let u = random_state(m.state_dim(), 8) * 0.5;
    let v = backward_euler_step(&u, 0.0, dt, &m, &p, &cfg).unwrap();
    let mut w = u.clone();
    for _ in 0..10_000 {
        let next = &u + m.rhs(&w, dt, &p).unwrap() * dt;
        let d = (&next - &w).amax();
        w = next;
        if d < 1e-13 {
            break;
        }
    }
    assert!((v - w).amax() < 1e-10);
}

#[test]
fn fine_power_closed_form() {
    let m = ModelSpec::scalar_decay();
    let grid = TimeGrid::new(1.0, 1, 50).unwrap();
    let u = DVector::from_element(1, 1.0);
    let v = propagate_F(&u, 0.0, 1.0, &grid, &m, &xi(1.0), &SolverConfig::default()).unwrap();
    assert!((v[0] - (1.0f64 + 1.0 / 50.0).powi(-50)).abs() < 1e-14);
    assert!((v[0] - 0.371528).abs() < 1e-6);
}

#[test]
fn single_fine_step_equals_coarse() {
    let cfg = SolverConfig::default();
    let grid = TimeGrid::with_refinement(2.0, 25, 1).unwrap();
    let m = ModelSpec::burgers(50);
    let u = m.initial_condition(&xi(1.5));
    let f = propagate_F(&u, 0.08, 0.16, &grid, &m, &xi(1.5), &cfg).unwrap();
    let g = propagate_G(&u, 0.08, 0.16, &grid, &m, &xi(1.5), &cfg).unwrap();
    let b = backward_euler_step(&u, 0.08, 0.08, &m, &xi(1.5), &cfg).unwrap();
    assert_eq!(f, g);
    assert_eq!(g, b);
}

#[test]
fn fine_composition() {
    let cfg = SolverConfig::default();
    let grid = TimeGrid::new(1.0, 4, 5).unwrap();
    let m = ModelSpec::heat1d(16);
    let p = xi(1.2);
    let u = m.initial_condition(&p);
    let a = propagate_F(&u, 0.25, 0.5, &grid, &m, &p, &cfg).unwrap();
    let b = propagate_F(&a, 0.5, 0.75, &grid, &m, &p, &cfg).unwrap();
    let props = Propagators::new(&m, &p, &grid, &cfg).unwrap();
    let c = props.fine(&props.fine(&u, 1).unwrap(), 2).unwrap();
    assert_eq!(b, c);
}

#[test]
fn coarse_matches_dense_solve() {
    let m = ModelSpec::advection_diffusion(20);
    let p = xi(2.5);
    let grid = TimeGrid::new(1.0, 24, 50).unwrap();
    let dt = grid.coarse_step;
    let u = m.initial_condition(&p);
    let (t0, t1) = (grid.coarse_point(3), grid.coarse_point(4));
    let v = propagate_G(&u, t0, t1, &grid, &m, &p, &SolverConfig::default()).unwrap();
    let a = m.linear_operator(&p).unwrap().to_dense();
    let lhs = DMatrix::identity(m.state_dim(), m.state_dim()) + a * dt;
    let rhs = &u + m.source(t1, &p).unwrap() * dt;
    let w = lhs.lu().solve(&rhs).unwrap();
    assert!((v - w).amax() < 1e-12);
}

#[test]
fn coarse_is_affine_linear() {
    let m = ModelSpec::advection_diffusion(12);
    let p = xi(3.3);
    let grid = TimeGrid::new(1.0, 10, 5).unwrap();
    let cfg = SolverConfig::default();
    let g = |u: &DVector<f64>| propagate_G(u, 0.1, 0.2, &grid, &m, &p, &cfg).unwrap();
    let u1 = random_state(m.state_dim(), 1);
    let u2 = random_state(m.state_dim(), 2);
    let (a, b) = (0.7, -1.9);
    let g0 = g(&DVector::zeros(m.state_dim()));
    let lhs = g(&(&u1 * a + &u2 * b)) - &g0;
    let rhs = (g(&u1) - &g0) * a + (g(&u2) - &g0) * b;
    assert!((lhs - rhs).amax() < 1e-12);
}

#[test]
fn interval_must_be_one_coarse_step() {
    let grid = TimeGrid::new(1.0, 4, 5).unwrap();
    let m = ModelSpec::scalar_decay();
    let u = DVector::from_element(1, 1.0);
    let cfg = SolverConfig::default();
    assert!(propagate_F(&u, 0.0, 0.5, &grid, &m, &xi(1.0), &cfg).is_err());
    assert!(propagate_G(&u, 0.0, 0.1, &grid, &m, &xi(1.0), &cfg).is_err());
}

#[test]
fn reference_is_serial_fine_sweep() {
    let cfg = SolverConfig::default();
    let grid = TimeGrid::new(1.0, 6, 4).unwrap();
    let m = ModelSpec::heat1d(12);
    let p = xi(0.8);
    let props = Propagators::new(&m, &p, &grid, &cfg).unwrap();
    let u0 = m.initial_condition(&p);
    let r = props.fine_reference(&u0).unwrap();
    let mut u = u0.clone();
    for n in 0..6 {
        u = propagate_F(&u, grid.coarse_point(n), grid.coarse_point(n + 1), &grid, &m, &p, &cfg).unwrap();
        assert_eq!(u, r.states[n]);
    }
}
