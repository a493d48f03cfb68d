//! Independent reference implementations shared by the integration suites.
//! Nothing here calls into the library's linear algebra.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qprobe::ModelParams;

pub type M = DMatrix<Complex64>;
pub type V = DVector<Complex64>;

pub const C0: Complex64 = Complex64::new(0.0, 0.0);
pub const C1: Complex64 = Complex64::new(1.0, 0.0);

pub fn max_abs(m: &M) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn one_norm(m: &M) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// exp(A) by scaling and squaring around a 30-term Taylor series.
pub fn expm(a: &M) -> M {
    let norm = one_norm(a);
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * Complex64::new(0.5f64.powi(squarings), 0.0);
    let n = a.nrows();
    let mut term = M::identity(n, n);
    let mut sum = M::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled * Complex64::new(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Hamiltonian assembled entry by entry in the `|s, n⟩ → s·(n_cut+1) + n`
/// ordering, spin up first, with the displacement taken from a Taylor
/// exponential on the padded mode space.
pub fn hamiltonian(p: &ModelParams) -> M {
    let nb = p.n_cut + 1;
    let np = nb + p.n_pad;
    let mut x = M::zeros(np, np);
    for n in 1..np {
        let s = Complex64::new((n as f64).sqrt(), 0.0);
        x[(n - 1, n)] = s;
        x[(n, n - 1)] = s;
    }
    let disp_full = expm(&(x * Complex64::new(0.0, p.eta)));
    let disp = disp_full.view((0, 0), (nb, nb)).into_owned();

    let dim = 2 * nb;
    let mut h = M::zeros(dim, dim);
    for n in 0..nb {
        let boson = p.omega_e * n as f64;
        h[(n, n)] = Complex64::new(0.5 * p.omega_z + boson, 0.0);
        h[(nb + n, nb + n)] = Complex64::new(-0.5 * p.omega_z + boson, 0.0);
    }
    let half = 0.5 * p.omega;
    for n in 0..nb {
        for m in 0..nb {
            // σ+ ⊗ D maps |↓, m⟩ to |↑, n⟩
            let z = disp[(n, m)] * half;
            h[(n, nb + m)] += z;
            h[(nb + m, n)] += z.conj();
        }
    }
    h
}

pub fn thermal_state(spin_up: bool, nbar: f64, n_cut: usize) -> M {
    let nb = n_cut + 1;
    let ratio = nbar / (1.0 + nbar);
    let mut probs: Vec<f64> = (0..nb).map(|n| ratio.powi(n as i32) / (1.0 + nbar)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let offset = if spin_up { 0 } else { nb };
    let mut rho = M::zeros(2 * nb, 2 * nb);
    for (n, p) in probs.iter().enumerate() {
        rho[(offset + n, offset + n)] = Complex64::new(*p, 0.0);
    }
    rho
}

/// ρ at each of `checkpoints` equally spaced times in `(0, t_end]`, obtained by
/// repeated application of a Taylor one-step propagator.
pub fn taylor_states(h: &M, rho0: &M, t_end: f64, checkpoints: usize) -> Vec<(f64, M)> {
    let norm = one_norm(h);
    let per = ((norm * t_end / checkpoints as f64) / 0.2).ceil().max(1.0) as usize;
    let dt = t_end / (checkpoints * per) as f64;
    let u = expm(&(h * Complex64::new(0.0, -dt)));
    let u_adj = u.adjoint();
    let mut rho = rho0.clone();
    let mut out = Vec::with_capacity(checkpoints);
    for c in 1..=checkpoints {
        for _ in 0..per {
            rho = &u * &rho * &u_adj;
        }
        out.push((t_end * c as f64 / checkpoints as f64, rho.clone()));
    }
    out
}

/// Classic fourth-order Runge-Kutta for `ψ' = -iHψ`; calls `observe(t, ψ)`
/// after every step.
pub fn rk4<F: FnMut(f64, &V)>(h: &M, psi0: &V, t_end: f64, steps: usize, mut observe: F) {
    let dt = t_end / steps as f64;
    let minus_i = Complex64::new(0.0, -1.0);
    let f = |psi: &V| (h * psi) * minus_i;
    let mut psi = psi0.clone();
    for s in 1..=steps {
        let k1 = f(&psi);
        let k2 = f(&(&psi + &k1 * Complex64::new(0.5 * dt, 0.0)));
        let k3 = f(&(&psi + &k2 * Complex64::new(0.5 * dt, 0.0)));
        let k4 = f(&(&psi + &k3 * Complex64::new(dt, 0.0)));
        psi += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
            * Complex64::new(dt / 6.0, 0.0);
        observe(s as f64 * dt, &psi);
    }
}

/// Sum of positive consecutive differences, scanned pair by pair.
pub fn brute_force_n(d: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..d.len().saturating_sub(1) {
        let change = d[i + 1] - d[i];
        if change > 0.0 {
            total += change;
        }
    }
    total
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
