//! Truncated spin ⊗ boson Hilbert space: operators, the model Hamiltonian and
//! thermal product states.
//!
//! Conventions used throughout the crate:
//!
//! * ħ = 1, every frequency is angular (rad/s), times are in seconds.
//! * The spin basis is ordered `(|↑⟩, |↓⟩)` so that `σ_z = diag(+1, -1)`.
//! * Composite states are ordered spin ⊗ boson: the index of `|s, n⟩` is
//!   `s * (n_cut + 1) + n`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Hermiticity tolerance applied to generated operators.
pub const HERMITIAN_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Physical parameters of the spin-boson model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Spin splitting ω_z (rad/s).
    pub omega_z: f64,
    /// Boson mode frequency ω_E (rad/s).
    pub omega_e: f64,
    /// Spin coupling rate Ω (rad/s).
    pub omega: f64,
    /// Spin-boson coupling parameter η.
    pub eta: f64,
    /// Mean thermal occupation of the initial boson state.
    pub nbar: f64,
    /// Highest Fock level kept.
    pub n_cut: usize,
    /// Extra levels used while exponentiating the displacement operator.
    pub n_pad: usize,
}

impl ModelParams {
    pub const DEFAULT_N_CUT: usize = 20;
    pub const DEFAULT_N_PAD: usize = 10;

    pub fn new(
        omega_z: f64,
        omega_e: f64,
        omega: f64,
        eta: f64,
        nbar: f64,
        n_cut: usize,
        n_pad: usize,
    ) -> Result<Self> {
        let params = Self {
            omega_z,
            omega_e,
            omega,
            eta,
            nbar,
            n_cut,
            n_pad,
        };
        params.validate()?;
        Ok(params)
    }

    /// Builds parameters from experiment-facing units: ω/2π in MHz for the
    /// spin and mode frequencies, Ω/2π in kHz for the coupling.
    pub fn from_lab_units(
        omega_z_mhz: f64,
        omega_e_mhz: f64,
        omega_khz: f64,
        eta: f64,
        nbar: f64,
        n_cut: usize,
        n_pad: usize,
    ) -> Result<Self> {
        Self::new(
            2.0 * PI * omega_z_mhz * 1e6,
            2.0 * PI * omega_e_mhz * 1e6,
            2.0 * PI * omega_khz * 1e3,
            eta,
            nbar,
            n_cut,
            n_pad,
        )
    }

    /// Trapped-ion values of the reference experiment: ω_E/2π = 1.920 MHz,
    /// Ω/2π = 100 kHz, η = 0.32, resonant spin, n̄ = 1.0, n_cut = 20.
    pub fn reference() -> Self {
        Self::from_lab_units(1.920, 1.920, 100.0, 0.32, 1.0, 20, 10)
            .expect("reference parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.omega_z, self.omega_e, self.omega, self.eta, self.nbar]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("model parameters must be finite"));
        }
        // Omega = 0 is the uncoupled reference case; only tau() needs Omega > 0.
        if self.omega < 0.0 {
            return Err(Error::param(format!("Omega must be >= 0, got {}", self.omega)));
        }
        if self.omega_e <= 0.0 {
            return Err(Error::param(format!("omega_E must be > 0, got {}", self.omega_e)));
        }
        if self.eta < 0.0 {
            return Err(Error::param(format!("eta must be >= 0, got {}", self.eta)));
        }
        if self.nbar < 0.0 {
            return Err(Error::param(format!("nbar must be >= 0, got {}", self.nbar)));
        }
        if self.n_cut < 1 {
            return Err(Error::param("n_cut must be >= 1"));
        }
        Ok(())
    }

    /// Interaction period τ = 2π/Ω (infinite without coupling).
    pub fn tau(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn boson_dim(&self) -> usize {
        self.n_cut + 1
    }

    pub fn total_dim(&self) -> usize {
        2 * self.boson_dim()
    }
}

/// Truncated thermal occupation probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalPopulations {
    /// `p_n = n̄ⁿ / (1 + n̄)ⁿ⁺¹` for `n = 0..=n_cut`, not renormalised.
    pub probs: Vec<f64>,
    /// Σ p_n over the kept levels.
    pub included_mass: f64,
}

impl ThermalPopulations {
    pub fn truncation_deficit(&self) -> f64 {
        1.0 - self.included_mass
    }
}

pub fn thermal_populations(nbar: f64, n_cut: usize) -> Result<ThermalPopulations> {
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::param(format!("nbar must be finite and >= 0, got {nbar}")));
    }
    if n_cut < 1 {
        return Err(Error::param("n_cut must be >= 1"));
    }
    let ratio = nbar / (1.0 + nbar);
    let mut probs = Vec::with_capacity(n_cut + 1);
    let mut p = 1.0 / (1.0 + nbar);
    for _ in 0..=n_cut {
        probs.push(p);
        p *= ratio;
    }
    // closed form of the geometric partial sum; avoids accumulated rounding
    let included_mass = 1.0 - ratio.powi(n_cut as i32 + 1);
    Ok(ThermalPopulations {
        probs,
        included_mass,
    })
}

/// Spin label of the two orthogonal initial states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn index(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }
}

/// Single-mode and spin operators plus their composite embeddings.
#[derive(Clone, Debug)]
pub struct Operators {
    pub n_cut: usize,
    pub a: CMatrix,
    pub a_dag: CMatrix,
    pub number: CMatrix,
    pub sigma_x: CMatrix,
    pub sigma_y: CMatrix,
    pub sigma_z: CMatrix,
    /// σ+ = |↑⟩⟨↓|
    pub sigma_plus: CMatrix,
    /// σ- = |↓⟩⟨↑|
    pub sigma_minus: CMatrix,
    pub id_spin: CMatrix,
    pub id_boson: CMatrix,
}

impl Operators {
    /// Embeds a spin operator as `op ⊗ I`.
    pub fn spin_op(&self, op: &CMatrix) -> CMatrix {
        kron(op, &self.id_boson)
    }

    /// Embeds a boson operator as `I ⊗ op`.
    pub fn boson_op(&self, op: &CMatrix) -> CMatrix {
        kron(&self.id_spin, op)
    }

    /// The three Pauli matrices in `x, y, z` order.
    pub fn paulis(&self) -> [&CMatrix; 3] {
        [&self.sigma_x, &self.sigma_y, &self.sigma_z]
    }
}

/// Builds the operator set on `n_cut + 1` Fock levels. `n_pad` is accepted for
/// signature symmetry with [`build_displacement`]; the ladder operators never
/// need padding.
pub fn build_operators(n_cut: usize, _n_pad: usize) -> Result<Operators> {
    if n_cut < 1 {
        return Err(Error::param("n_cut must be >= 1"));
    }
    let a = annihilation(n_cut + 1);
    let a_dag = a.adjoint();
    let number = &a_dag * &a;

    let sigma_x = pauli([[ZERO, ONE], [ONE, ZERO]]);
    let sigma_y = pauli([[ZERO, -I], [I, ZERO]]);
    let sigma_z = pauli([[ONE, ZERO], [ZERO, -ONE]]);
    let sigma_plus = pauli([[ZERO, ONE], [ZERO, ZERO]]);
    let sigma_minus = sigma_plus.adjoint();

    Ok(Operators {
        n_cut,
        a,
        a_dag,
        number,
        sigma_x,
        sigma_y,
        sigma_z,
        sigma_plus,
        sigma_minus,
        id_spin: CMatrix::identity(2, 2),
        id_boson: CMatrix::identity(n_cut + 1, n_cut + 1),
    })
}

fn pauli(rows: [[Complex64; 2]; 2]) -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| rows[i][j])
}

fn annihilation(dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Kronecker product `lhs ⊗ rhs`.
pub fn kron(lhs: &CMatrix, rhs: &CMatrix) -> CMatrix {
    lhs.kronecker(rhs)
}

/// Largest entry of `|M - M†|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entry of `|U†U - I|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let prod = u.adjoint() * u;
    max_abs_diff(&prod, &CMatrix::identity(u.nrows(), u.ncols()))
}

/// Entrywise max-norm of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `exp(iη(a + a†))` restricted to the kept Fock levels.
#[derive(Clone, Debug)]
pub struct Displacement {
    pub matrix: CMatrix,
    /// `max |P†P - I|` of the projected block; nonzero only through truncation.
    pub unitarity_defect: f64,
}

/// Exponentiates `iη(a + a†)` on `n_cut + n_pad + 1` levels and keeps the top
/// left `(n_cut + 1)²` block.
///
/// The position operator is real symmetric, so the exponential is
/// `V diag(e^{iηx}) Vᵀ` with a real orthogonal `V`.
pub fn build_displacement(eta: f64, n_cut: usize, n_pad: usize) -> Result<Displacement> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::param(format!("eta must be finite and >= 0, got {eta}")));
    }
    if n_cut < 1 {
        return Err(Error::param("n_cut must be >= 1"));
    }
    let keep = n_cut + 1;
    let padded = keep + n_pad;

    let mut x = DMatrix::<f64>::zeros(padded, padded);
    for n in 1..padded {
        let s = (n as f64).sqrt();
        x[(n - 1, n)] = s;
        x[(n, n - 1)] = s;
    }
    let eig = SymmetricEigen::try_new(x, 1e-15, 10_000)
        .ok_or_else(|| Error::numeric("position operator eigendecomposition did not converge"))?;
    let vecs = &eig.eigenvectors;
    let phases: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        .map(|&lambda| Complex64::from_polar(1.0, eta * lambda))
        .collect();

    let matrix = CMatrix::from_fn(keep, keep, |i, j| {
        let mut acc = ZERO;
        for (k, phase) in phases.iter().enumerate() {
            acc += phase * (vecs[(i, k)] * vecs[(j, k)]);
        }
        acc
    });
    let unitarity_defect = unitarity_defect(&matrix);
    Ok(Displacement {
        matrix,
        unitarity_defect,
    })
}

/// `H = (ω_z/2) σ_z ⊗ I + ω_E I ⊗ a†a + (Ω/2)(σ+ ⊗ e^{iη(a+a†)} + h.c.)`.
pub fn build_hamiltonian(params: &ModelParams) -> Result<CMatrix> {
    params.validate()?;
    let ops = build_operators(params.n_cut, params.n_pad)?;
    let disp = build_displacement(params.eta, params.n_cut, params.n_pad)?;

    let h_spin = ops.spin_op(&ops.sigma_z) * Complex64::from(params.omega_z / 2.0);
    let h_env = ops.boson_op(&ops.number) * Complex64::from(params.omega_e);
    let coupling = kron(&ops.sigma_plus, &disp.matrix) * Complex64::from(params.omega / 2.0);
    let h_int = &coupling + coupling.adjoint();

    let h = h_spin + h_env + h_int;
    assert_eq!(h.nrows(), params.total_dim(), "Hamiltonian dimension mismatch");
    Ok(h)
}

/// Which space a density matrix lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    Total,
    Spin,
    Boson,
}

/// A validated density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    subsystem: Subsystem,
}

impl DensityMatrix {
    pub const TRACE_TOL: f64 = 1e-10;
    pub const EIGEN_TOL: f64 = 1e-10;

    /// Checks unit trace, Hermiticity and positivity before wrapping `matrix`.
    pub fn new(matrix: CMatrix, subsystem: Subsystem) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::param("density matrix must be square"));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > Self::TRACE_TOL || trace.im.abs() > Self::TRACE_TOL {
            return Err(Error::param(format!("density matrix trace {trace} is not 1")));
        }
        let herm = hermiticity_defect(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::param(format!("density matrix not Hermitian (defect {herm:e})")));
        }
        let min_eig = min_eigenvalue(&matrix);
        if min_eig < -Self::EIGEN_TOL {
            return Err(Error::param(format!(
                "density matrix has negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self { matrix, subsystem })
    }

    /// Wraps a matrix known to be a valid state by construction.
    pub(crate) fn from_raw(matrix: CMatrix, subsystem: Subsystem) -> Self {
        Self { matrix, subsystem }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn subsystem(&self) -> Subsystem {
        self.subsystem
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Tr ρ².
    pub fn purity(&self) -> f64 {
        // Tr(ρρ) = Σ_ij ρ_ij ρ_ji = Σ_ij |ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Tr(ρ O).
    pub fn expectation(&self, op: &CMatrix) -> Complex64 {
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.matrix[(i, j)] * op[(j, i)];
            }
        }
        acc
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }
}

pub(crate) fn min_eigenvalue(m: &CMatrix) -> f64 {
    SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::from(0.5)
}

/// `ρ(0) = |s⟩⟨s| ⊗ ρ_thermal(n̄)`, renormalised after truncation.
pub fn initial_state(spin: Spin, nbar: f64, n_cut: usize) -> Result<DensityMatrix> {
    let thermal = thermal_populations(nbar, n_cut)?;
    let dim = n_cut + 1;
    let mut rho = CMatrix::zeros(2 * dim, 2 * dim);
    let offset = spin.index() * dim;
    for (n, p) in thermal.probs.iter().enumerate() {
        rho[(offset + n, offset + n)] = Complex64::from(p / thermal.included_mass);
    }
    Ok(DensityMatrix::from_raw(rho, Subsystem::Total))
}
