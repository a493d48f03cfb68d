//! Exact evolution under the time-independent Hamiltonian, reduction to the
//! spin and trace-distance trajectories.

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{
    build_hamiltonian, build_operators, hermitian_part, hermiticity_defect, initial_state,
    CMatrix, DensityMatrix, ModelParams, Spin, Subsystem, HERMITIAN_TOL,
};

/// Bloch vector `(⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩)`.
pub type Bloch = [f64; 3];

/// Sampling times on `[0, t_max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    times: Vec<f64>,
}

impl TimeGrid {
    /// `samples` equidistant points `t_i = i t_max / (samples - 1)`.
    pub fn uniform(t_max: f64, samples: usize) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::param(format!("t_max must be finite and > 0, got {t_max}")));
        }
        if samples < 2 {
            return Err(Error::param(format!("a grid needs >= 2 samples, got {samples}")));
        }
        let steps = (samples - 1) as f64;
        let times = (0..samples).map(|i| t_max * i as f64 / steps).collect();
        Ok(Self { t_max, times })
    }

    /// Uniform grid whose rate `(M - 1)/t_max` is as close as possible to `rate`.
    pub fn with_rate(t_max: f64, rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::param(format!("sampling rate must be > 0, got {rate}")));
        }
        let steps = (rate * t_max).round().max(1.0) as usize;
        Self::uniform(t_max, steps + 1)
    }

    /// Arbitrary strictly increasing sample times inside `[0, t_max]`.
    pub fn from_times(t_max: f64, times: Vec<f64>) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::param(format!("t_max must be finite and > 0, got {t_max}")));
        }
        if times.len() < 2 {
            return Err(Error::param("a grid needs >= 2 samples"));
        }
        if times[0] < 0.0 {
            return Err(Error::param("grid times must be >= 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("grid times must be strictly increasing"));
        }
        if *times.last().unwrap() > t_max * (1.0 + 1e-12) {
            return Err(Error::param("grid times exceed t_max"));
        }
        Ok(Self { t_max, times })
    }

    /// Keeps the points at `indices` (sorted, unique); the nominal duration is unchanged.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let times = indices
            .iter()
            .map(|&i| {
                self.times
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::param(format!("grid index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_times(self.t_max, times)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Mean sampling rate `(M - 1)/t_max`.
    pub fn rate(&self) -> f64 {
        (self.len() - 1) as f64 / self.t_max
    }

    /// Number of leading points with `t <= t_cut`.
    pub fn count_until(&self, t_cut: f64) -> usize {
        let limit = t_cut * (1.0 + 1e-12);
        self.times.partition_point(|&t| t <= limit)
    }
}

/// Eigendecomposition `H = V Λ V†`.
#[derive(Clone, Debug)]
pub struct PropagatorBundle {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
    pub params: ModelParams,
}

pub fn diagonalize(h: &CMatrix, params: &ModelParams) -> Result<PropagatorBundle> {
    if !h.is_square() || h.nrows() != params.total_dim() {
        return Err(Error::param(format!(
            "Hamiltonian is {}x{}, expected {}",
            h.nrows(),
            h.ncols(),
            params.total_dim()
        )));
    }
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let defect = hermiticity_defect(h);
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::param(format!("Hamiltonian not Hermitian (defect {defect:e})")));
    }
    let eig = SymmetricEigen::try_new(hermitian_part(h), 1e-15, 100_000)
        .ok_or_else(|| Error::numeric("Hamiltonian eigendecomposition did not converge"))?;
    Ok(PropagatorBundle {
        eigenvalues: eig.eigenvalues,
        eigenvectors: eig.eigenvectors,
        params: *params,
    })
}

impl PropagatorBundle {
    pub fn from_params(params: &ModelParams) -> Result<Self> {
        diagonalize(&build_hamiltonian(params)?, params)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn phases(&self, t: f64) -> Vec<Complex64> {
        self.eigenvalues
            .iter()
            .map(|&lambda| Complex64::from_polar(1.0, -lambda * t))
            .collect()
    }

    /// `U(t) = V e^{-iΛt} V†`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let phases = self.phases(t);
        let mut scaled = self.eigenvectors.clone();
        for (j, phase) in phases.iter().enumerate() {
            scaled.column_mut(j).scale_mut_complex(*phase);
        }
        scaled * self.eigenvectors.adjoint()
    }

    /// `V Λ V†`, for checking the decomposition.
    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut_complex(Complex64::from(lambda));
        }
        scaled * self.eigenvectors.adjoint()
    }
}

trait ScaleComplex {
    fn scale_mut_complex(&mut self, factor: Complex64);
}

impl<S> ScaleComplex for nalgebra::Matrix<Complex64, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<Complex64, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_complex(&mut self, factor: Complex64) {
        for z in self.iter_mut() {
            *z *= factor;
        }
    }
}

/// `ρ(t) = U(t) ρ(0) U†(t)`.
pub fn evolve(bundle: &PropagatorBundle, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if rho0.dim() != bundle.dim() {
        return Err(Error::param(format!(
            "state dimension {} does not match propagator dimension {}",
            rho0.dim(),
            bundle.dim()
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param(format!("evolution time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let u = bundle.propagator(t);
    let rho = &u * rho0.matrix() * u.adjoint();
    Ok(DensityMatrix::from_raw(rho, rho0.subsystem()))
}

/// `(ρ_S)_{ss'} = Σ_n ρ_{(s,n),(s',n)}`.
pub fn partial_trace_env(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let dim = rho.dim();
    if rho.subsystem() != Subsystem::Total || dim < 4 || dim % 2 != 0 {
        return Err(Error::param(format!(
            "partial trace needs a total-space state, got {:?} of dimension {dim}",
            rho.subsystem()
        )));
    }
    let nb = dim / 2;
    let m = rho.matrix();
    let reduced = CMatrix::from_fn(2, 2, |s, s2| {
        (0..nb).map(|n| m[(s * nb + n, s2 * nb + n)]).sum()
    });
    Ok(DensityMatrix::from_raw(reduced, Subsystem::Spin))
}

/// `v_l = Tr(ρ σ_l)` for a 2×2 spin state.
pub fn bloch_vector(rho: &DensityMatrix) -> Result<Bloch> {
    if rho.dim() != 2 {
        return Err(Error::param(format!(
            "Bloch vector needs a 2x2 state, got dimension {}",
            rho.dim()
        )));
    }
    let m = rho.matrix();
    Ok([
        2.0 * m[(0, 1)].re,
        -2.0 * m[(0, 1)].im,
        m[(0, 0)].re - m[(1, 1)].re,
    ])
}

/// Half the Euclidean distance between two Bloch vectors.
pub fn trace_distance(v1: &Bloch, v2: &Bloch) -> f64 {
    0.5 * v1
        .iter()
        .zip(v2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Uhlmann fidelity `Tr √(√ρ₁ ρ₂ √ρ₁)`.
pub fn fidelity(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::param("fidelity needs states of equal dimension"));
    }
    let sqrt1 = psd_sqrt(rho1.matrix())?;
    let inner = &sqrt1 * rho2.matrix() * &sqrt1;
    let eig = SymmetricEigen::new(hermitian_part(&inner));
    let f: f64 = eig.eigenvalues.iter().map(|&mu| mu.max(0.0).sqrt()).sum();
    Ok(f.min(1.0))
}

fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let eig = SymmetricEigen::new(hermitian_part(m));
    if let Some(&worst) = eig
        .eigenvalues
        .iter()
        .find(|&&l| l < -DensityMatrix::EIGEN_TOL)
    {
        return Err(Error::param(format!(
            "state is not positive semidefinite (eigenvalue {worst:e})"
        )));
    }
    let mut scaled = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        scaled
            .column_mut(j)
            .scale_mut_complex(Complex64::from(l.max(0.0).sqrt()));
    }
    Ok(scaled * eig.eigenvectors.adjoint())
}

/// Bloch-vector trajectories of both initial spin states.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochTrajectory {
    pub grid: TimeGrid,
    /// Starting from `|↑⟩⟨↑|`.
    pub vectors1: Vec<Bloch>,
    /// Starting from `|↓⟩⟨↓|`.
    pub vectors2: Vec<Bloch>,
    /// Per-component projection-noise standard deviations, when measured.
    pub sigmas1: Option<Vec<Bloch>>,
    pub sigmas2: Option<Vec<Bloch>>,
}

impl BlochTrajectory {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Trace distances only; uncertainties set to zero.
    pub fn distances(&self) -> Vec<f64> {
        self.vectors1
            .iter()
            .zip(&self.vectors2)
            .map(|(a, b)| trace_distance(a, b))
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let pick = |v: &Vec<Bloch>| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Ok(Self {
            grid: self.grid.subset(indices)?,
            vectors1: pick(&self.vectors1),
            vectors2: pick(&self.vectors2),
            sigmas1: self.sigmas1.as_ref().map(pick),
            sigmas2: self.sigmas2.as_ref().map(pick),
        })
    }
}

/// Sampled trace distance `D(t_i)` with uncertainties `δD(t_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceSeries {
    pub grid: TimeGrid,
    pub distance: Vec<f64>,
    pub delta: Vec<f64>,
}

impl DistanceSeries {
    pub fn new(grid: TimeGrid, distance: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        if distance.len() != grid.len() || delta.len() != grid.len() {
            return Err(Error::param(format!(
                "series length mismatch: grid {}, D {}, deltaD {}",
                grid.len(),
                distance.len(),
                delta.len()
            )));
        }
        if delta.iter().any(|&d| !(d >= 0.0)) {
            return Err(Error::param("uncertainties must be >= 0"));
        }
        Ok(Self {
            grid,
            distance,
            delta,
        })
    }

    /// Series without uncertainties.
    pub fn noiseless(grid: TimeGrid, distance: Vec<f64>) -> Result<Self> {
        let delta = vec![0.0; distance.len()];
        Self::new(grid, distance, delta)
    }

    pub fn len(&self) -> usize {
        self.distance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distance.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            self.grid.subset(indices)?,
            indices.iter().map(|&i| self.distance[i]).collect(),
            indices.iter().map(|&i| self.delta[i]).collect(),
        )
    }
}

/// Spin expectation values `⟨σ_l⟩(t)` evaluated in the energy eigenbasis.
///
/// With `ρ' = V†ρ(0)V` and `O' = V†(O ⊗ I)V`,
/// `⟨O⟩(t) = Σ_jk ρ'_jk O'_kj e^{-i(λ_j - λ_k)t}`, so each time point costs one
/// matrix-vector product per observable instead of two dense matrix products.
/// `⟨σ+⟩ = (⟨σ_x⟩ + i⟨σ_y⟩)/2` carries both transverse components.
#[derive(Clone, Debug)]
struct SpinTracker {
    eigenvalues: Vec<f64>,
    /// Row-major weights `ρ'_jk O'_kj` for σ+ and σ_z.
    weights: [Vec<Complex64>; 2],
}

impl SpinTracker {
    fn new(bundle: &PropagatorBundle, rho0: &DensityMatrix) -> Result<Self> {
        let params = &bundle.params;
        let ops = build_operators(params.n_cut, params.n_pad)?;
        let v = &bundle.eigenvectors;
        let v_adj = v.adjoint();
        let rho_eig = &v_adj * rho0.matrix() * v;
        let n = rho_eig.nrows();
        let weights = [&ops.sigma_plus, &ops.sigma_z].map(|op| {
            let obs = &v_adj * ops.spin_op(op) * v;
            let mut w = Vec::with_capacity(n * n);
            for j in 0..n {
                for k in 0..n {
                    w.push(rho_eig[(j, k)] * obs[(k, j)]);
                }
            }
            w
        });
        Ok(Self {
            eigenvalues: bundle.eigenvalues.iter().copied().collect(),
            weights,
        })
    }

    fn at(&self, t: f64) -> Bloch {
        let n = self.eigenvalues.len();
        let phases: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .map(|&lambda| Complex64::from_polar(1.0, -lambda * t))
            .collect();
        let conj: Vec<Complex64> = phases.iter().map(|p| p.conj()).collect();
        let [plus, z] = self.weights.each_ref().map(|w| {
            // diagonal terms carry no phase; keeping them exact makes stationary
            // states (e.g. an uncoupled spin) exactly stationary
            let mut stationary = Complex64::new(0.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, row) in w.chunks_exact(n).enumerate() {
                let mut sum = Complex64::new(0.0, 0.0);
                for (wk, ck) in row.iter().zip(&conj) {
                    sum += wk * ck;
                }
                sum -= row[j] * conj[j];
                stationary += row[j];
                acc += phases[j] * sum;
            }
            stationary + acc
        });
        [2.0 * plus.re, 2.0 * plus.im, z.re]
    }
}

/// Noiseless dynamics of one parameter set, reusable across grids.
#[derive(Clone, Debug)]
pub struct Simulator {
    bundle: PropagatorBundle,
    trackers: [SpinTracker; 2],
}

impl Simulator {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let bundle = PropagatorBundle::from_params(params)?;
        let up = initial_state(Spin::Up, params.nbar, params.n_cut)?;
        let down = initial_state(Spin::Down, params.nbar, params.n_cut)?;
        let trackers = [SpinTracker::new(&bundle, &up)?, SpinTracker::new(&bundle, &down)?];
        Ok(Self { bundle, trackers })
    }

    pub fn params(&self) -> &ModelParams {
        &self.bundle.params
    }

    pub fn bundle(&self) -> &PropagatorBundle {
        &self.bundle
    }

    /// Bloch vectors of both initial states at `t`.
    pub fn bloch_at(&self, t: f64) -> (Bloch, Bloch) {
        (self.trackers[0].at(t), self.trackers[1].at(t))
    }

    pub fn trajectory(&self, grid: &TimeGrid) -> BlochTrajectory {
        let pairs: Vec<(Bloch, Bloch)> = grid
            .times()
            .par_iter()
            .map(|&t| self.bloch_at(t))
            .collect();
        let (vectors1, vectors2) = pairs.into_iter().unzip();
        BlochTrajectory {
            grid: grid.clone(),
            vectors1,
            vectors2,
            sigmas1: None,
            sigmas2: None,
        }
    }

    pub fn distance_series(&self, grid: &TimeGrid) -> (BlochTrajectory, DistanceSeries) {
        let trajectory = self.trajectory(grid);
        let series = DistanceSeries::noiseless(grid.clone(), trajectory.distances())
            .expect("trajectory and grid have equal length");
        (trajectory, series)
    }
}

/// Noiseless Bloch trajectories and `D(t)` on `grid`; all `δD` are zero.
pub fn simulate_distance_series(
    params: &ModelParams,
    grid: &TimeGrid,
) -> Result<(BlochTrajectory, DistanceSeries)> {
    Ok(Simulator::new(params)?.distance_series(grid))
}
