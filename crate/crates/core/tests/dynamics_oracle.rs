mod common;

use common::{max_abs, rk4, taylor_states, thermal_state, V, C0, C1};
use num_complex::Complex64;
use qprobe::{
    bloch_vector, build_hamiltonian, evolve, initial_state, partial_trace_env, DensityMatrix,
    ModelParams, PropagatorBundle, Simulator, Spin, Subsystem, TimeGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_params(rng: &mut ChaCha8Rng, n_cut: usize) -> ModelParams {
    let omega_e_mhz = rng.random_range(1.5..2.5);
    ModelParams::from_lab_units(
        omega_e_mhz * rng.random_range(0.9..1.1),
        omega_e_mhz,
        rng.random_range(50.0..150.0),
        rng.random_range(0.0..0.5),
        rng.random_range(0.0..1.5),
        n_cut,
        10,
    )
    .unwrap()
}

#[test]
fn hamiltonian_matches_entrywise_construction() {
    let p = ModelParams::reference();
    let lib = build_hamiltonian(&p).unwrap();
    let oracle = common::hamiltonian(&p);
    let scale = max_abs(&oracle);
    assert!(max_abs(&(lib - oracle)) < 1e-12 * scale);
}

#[test]
fn eigen_evolution_matches_taylor_integrator() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_901);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p = random_params(&mut rng, 5);
        let up = rng.random_bool(0.5);
        let spin = if up { Spin::Up } else { Spin::Down };
        let bundle = PropagatorBundle::from_params(&p).unwrap();
        let rho0 = initial_state(spin, p.nbar, p.n_cut).unwrap();
        let oracle0 = thermal_state(up, p.nbar, p.n_cut);
        assert!(max_abs(&(rho0.matrix() - &oracle0)) < 1e-15);

        let h = common::hamiltonian(&p);
        for (t, rho_ref) in taylor_states(&h, &oracle0, 9.0 * p.tau(), 12) {
            let rho = evolve(&bundle, &rho0, t).unwrap();
            worst = worst.max(max_abs(&(rho.matrix() - &rho_ref)));
        }
    }
    assert!(worst < 1e-6, "max state error {worst:e}");
}

#[test]
fn resonant_ground_state_barely_leaks() {
    let mut p = ModelParams::reference();
    p.nbar = 0.0;
    let h = common::hamiltonian(&p);
    let nb = p.n_cut + 1;
    let start = nb; // |↓, 0⟩
    let mut psi0 = V::from_element(2 * nb, C0);
    psi0[start] = C1;

    let t_end = 9.0 * p.tau();
    let steps = 60_000;
    let mut oracle_leak: f64 = 0.0;
    let mut samples = Vec::new();
    rk4(&h, &psi0, t_end, steps, |t, psi| {
        let leak = 1.0 - psi[start].norm_sqr();
        oracle_leak = oracle_leak.max(leak);
        if samples.len() < 40 && t >= t_end * (samples.len() + 1) as f64 / 40.0 {
            samples.push((t, leak));
        }
    });
    assert!(oracle_leak < 0.05, "oracle leakage {oracle_leak}");

    let bundle = PropagatorBundle::from_params(&p).unwrap();
    let rho0 = initial_state(Spin::Down, 0.0, p.n_cut).unwrap();
    for (t, leak) in samples {
        let rho = evolve(&bundle, &rho0, t).unwrap();
        let lib_leak = 1.0 - rho.matrix()[(start, start)].re;
        assert!((lib_leak - leak).abs() < 1e-4, "t = {t:e}: {lib_leak} vs {leak}");
    }
}

#[test]
fn propagator_unitary_and_group_property_over_window() {
    let p = ModelParams::reference();
    let bundle = PropagatorBundle::from_params(&p).unwrap();
    let rho0 = initial_state(Spin::Up, 1.0, p.n_cut).unwrap();
    let tau = p.tau();
    for k in 0..10 {
        let t1 = 0.37 * tau * k as f64;
        let t2 = 0.53 * tau;
        let direct = evolve(&bundle, &rho0, t1 + t2).unwrap();
        let stepped = evolve(&bundle, &evolve(&bundle, &rho0, t1).unwrap(), t2).unwrap();
        assert!(max_abs(&(direct.matrix() - stepped.matrix())) < 1e-9);
        assert!((direct.trace().re - 1.0).abs() < 1e-9);
        assert!(direct.min_eigenvalue() > -1e-8);
        assert!((direct.purity() - rho0.purity()).abs() < 1e-9);
    }
}

#[test]
fn spin_reduction_matches_total_space_observable() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dim = 2 * 6;
    let g = common::M::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let mut m = &g * g.adjoint();
    let tr = m.trace();
    m /= tr;
    let rho = DensityMatrix::new(m.clone(), Subsystem::Total).unwrap();
    let spin = partial_trace_env(&rho).unwrap();
    let v = bloch_vector(&spin).unwrap();
    let nb = 6;
    let mut sz = C0;
    let mut sp = C0;
    for n in 0..nb {
        sz += m[(n, n)] - m[(nb + n, nb + n)];
        // Tr(ρ σ+ ⊗ I) = Σ_n ρ_{(↓n),(↑n)}
        sp += m[(nb + n, n)];
    }
    assert!((v[2] - sz.re).abs() < 1e-12);
    assert!((v[0] - 2.0 * sp.re).abs() < 1e-12);
    assert!((v[1] - 2.0 * sp.im).abs() < 1e-12);
}

#[test]
fn reference_distance_revives_after_first_minimum() {
    let p = ModelParams::reference();
    let grid = TimeGrid::uniform(9.0 * p.tau(), 136).unwrap();
    let (traj, series) = Simulator::new(&p).unwrap().distance_series(&grid);
    assert!((series.distance[0] - 1.0).abs() < 1e-12);
    let d = &series.distance;
    let first_min = (1..d.len() - 1)
        .find(|&i| d[i] < d[i - 1] && d[i] <= d[i + 1])
        .expect("a local minimum before 9 tau");
    assert!((first_min + 1..d.len()).any(|i| d[i] > d[i - 1]));
    for (i, &di) in d.iter().enumerate() {
        assert!((-1e-9..=1.0 + 1e-9).contains(&di));
        for v in [traj.vectors1[i], traj.vectors2[i]] {
            assert!(v.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1.0 + 1e-9);
        }
    }
    assert!(series.delta.iter().all(|&x| x == 0.0));
}

#[test]
fn tracker_agrees_with_full_evolution_off_grid() {
    let p = ModelParams::from_lab_units(1.95, 1.92, 100.0, 0.32, 0.6, 20, 10).unwrap();
    let sim = Simulator::new(&p).unwrap();
    let rho_up = initial_state(Spin::Up, p.nbar, p.n_cut).unwrap();
    for k in 0..7 {
        let t = (k as f64 * 1.31 + 0.17) * p.tau();
        let rho = evolve(sim.bundle(), &rho_up, t).unwrap();
        let v = bloch_vector(&partial_trace_env(&rho).unwrap()).unwrap();
        let (fast, _) = sim.bloch_at(t);
        for l in 0..3 {
            assert!((v[l] - fast[l]).abs() < 1e-10, "t = {t}, l = {l}");
        }
    }
}
