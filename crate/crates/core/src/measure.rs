//! The trace-distance non-Markovianity measure, its error propagation and the
//! dense-sampling estimate of its true value.

use crate::dynamics::{trace_distance, Bloch, DistanceSeries, Simulator, TimeGrid};
use crate::error::{Error, Result};
use crate::hilbert::ModelParams;
use crate::qpn::Repetitions;

/// Below this trace distance the δD propagation formula is singular.
pub const DISTANCE_FLOOR: f64 = 1e-12;

/// Dense reference rate as a multiple of the experimental rate γ₀.
pub const TRUE_RATE_FACTOR: f64 = 100.0;
/// Refined rate used to check the reference value.
pub const REFINED_RATE_FACTOR: f64 = 200.0;
/// Largest accepted relative change between the two dense estimates.
pub const CONVERGENCE_TOL: f64 = 1e-3;

/// Experimental sampling rate γ₀ in units of 1/τ.
pub const REFERENCE_RATE_TAU: f64 = 15.0;

/// Value of the measure over one window of a sampled series.
#[derive(Clone, Debug, PartialEq)]
pub struct NmResult {
    /// N = Σ [ΔD]_{>0}
    pub value: f64,
    /// δN, root-sum-square over the positive increments.
    pub uncertainty: f64,
    /// Requested window length.
    pub t_max: f64,
    /// Mean sampling rate `(M - 1)/t_max` of the points inside the window.
    pub gamma: f64,
    /// Measurement repetitions behind the series, when known.
    pub repetitions: Option<Repetitions>,
    pub positive_increment_count: usize,
}

/// One change `ΔD_i = D_i - D_{i-1}` together with the uncertainties of its endpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Increment {
    pub change: f64,
    pub sigma_prev: f64,
    pub sigma_curr: f64,
}

impl Increment {
    /// `δΔD_i = √(δD_i² + δD_{i-1}²)`
    pub fn uncertainty(&self) -> f64 {
        self.sigma_prev.hypot(self.sigma_curr)
    }
}

/// Consecutive increments of the first `count` points of `series`.
pub fn increments(series: &DistanceSeries, count: usize) -> impl Iterator<Item = Increment> + '_ {
    let count = count.min(series.len());
    (1..count).map(move |i| Increment {
        change: series.distance[i] - series.distance[i - 1],
        sigma_prev: series.delta[i - 1],
        sigma_curr: series.delta[i],
    })
}

/// Sum of the positive consecutive changes of `values`.
pub fn positive_variation(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 0.0)
        .sum()
}

/// Running measure: entry `i` is N over the first `i + 1` points.
pub fn cumulative_measure(values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(values.len());
    if values.is_empty() {
        return out;
    }
    out.push(0.0);
    for w in values.windows(2) {
        let d = w[1] - w[0];
        if d > 0.0 {
            acc += d;
        }
        out.push(acc);
    }
    out
}

/// Evaluates N and δN over the grid points with `t <= t_max`.
pub fn nonmarkovianity(series: &DistanceSeries, t_max: f64) -> Result<NmResult> {
    if series.len() < 2 {
        return Err(Error::param(format!(
            "the measure needs >= 2 points, got {}",
            series.len()
        )));
    }
    if !(t_max > 0.0) || t_max > series.grid.t_max() * (1.0 + 1e-12) {
        return Err(Error::param(format!(
            "window {t_max} outside (0, {}]",
            series.grid.t_max()
        )));
    }
    let count = series.grid.count_until(t_max);
    let positive: Vec<Increment> = increments(series, count)
        .filter(|inc| inc.change > 0.0)
        .collect();
    Ok(NmResult {
        value: positive.iter().map(|inc| inc.change).sum(),
        uncertainty: delta_n(&positive),
        t_max,
        gamma: count.saturating_sub(1) as f64 / t_max,
        repetitions: None,
        positive_increment_count: positive.len(),
    })
}

/// `δN = √(Σ_i δΔD_i²)` over increments with `ΔD_i > 0`; others are ignored.
pub fn delta_n(increments: &[Increment]) -> f64 {
    increments
        .iter()
        .filter(|inc| inc.change > 0.0)
        .map(|inc| {
            let u = inc.uncertainty();
            u * u
        })
        .sum::<f64>()
        .sqrt()
}

/// Linear error propagation of Bloch-component uncertainties into D.
///
/// `∂D/∂⟨σ_l¹⟩ = (v¹_l - v²_l)/(4D)` and the negative of that for the second
/// state, so `δD² = Σ_l g_l² (δ¹_l² + δ²_l²)`.
pub fn delta_d(v1: &Bloch, v2: &Bloch, sigmas1: &Bloch, sigmas2: &Bloch) -> Result<f64> {
    let distance = trace_distance(v1, v2);
    if distance <= DISTANCE_FLOOR {
        return Err(Error::DegenerateDistance { distance });
    }
    let var: f64 = (0..3)
        .map(|l| {
            let g = (v1[l] - v2[l]) / (4.0 * distance);
            g * g * (sigmas1[l] * sigmas1[l] + sigmas2[l] * sigmas2[l])
        })
        .sum();
    Ok(var.sqrt())
}

/// Dense-sampling, noise-free reference value of the measure.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueValueEstimate {
    pub n_true: f64,
    /// Rate of the reference series (1/s).
    pub gamma_used: f64,
    /// N at twice the reference rate.
    pub n_refined: f64,
    /// `|N(200γ₀) - N(100γ₀)| / N(100γ₀)`.
    pub convergence_ratio: f64,
}

/// γ₀ = 15/τ for the given parameters.
pub fn reference_rate(params: &ModelParams) -> f64 {
    REFERENCE_RATE_TAU / params.tau()
}

/// Estimates N_true from noiseless series at 100γ₀ and 200γ₀.
pub fn estimate_true_n(params: &ModelParams, t_max: f64, gamma0: f64) -> Result<TrueValueEstimate> {
    let sim = Simulator::new(params)?;
    estimate_true_n_from(t_max, gamma0, |grid| Ok(sim.distance_series(grid).1.distance))
}

/// Same as [`estimate_true_n`] for any noiseless trajectory `sample(grid) -> D`.
pub fn estimate_true_n_from<F>(t_max: f64, gamma0: f64, sample: F) -> Result<TrueValueEstimate>
where
    F: Fn(&TimeGrid) -> Result<Vec<f64>>,
{
    TrueStaircase::from_sampler(t_max, gamma0, sample)?.at(t_max)
}

/// Dense noiseless series at 100γ₀ and 200γ₀ over `[0, t_span]`, giving the
/// true value for every window `t_max <= t_span` from one pair of simulations.
#[derive(Clone, Debug)]
pub struct TrueStaircase {
    base: (TimeGrid, Vec<f64>),
    refined: (TimeGrid, Vec<f64>),
}

impl TrueStaircase {
    pub fn new(sim: &Simulator, t_span: f64, gamma0: f64) -> Result<Self> {
        Self::from_sampler(t_span, gamma0, |grid| Ok(sim.distance_series(grid).1.distance))
    }

    pub fn from_sampler<F>(t_span: f64, gamma0: f64, sample: F) -> Result<Self>
    where
        F: Fn(&TimeGrid) -> Result<Vec<f64>>,
    {
        if !(gamma0 > 0.0) || !gamma0.is_finite() {
            return Err(Error::param(format!("reference rate must be > 0, got {gamma0}")));
        }
        let base_grid = TimeGrid::with_rate(t_span, TRUE_RATE_FACTOR * gamma0)?;
        let refined_grid = TimeGrid::with_rate(t_span, REFINED_RATE_FACTOR * gamma0)?;
        let base = cumulative_measure(&sample(&base_grid)?);
        let refined = cumulative_measure(&sample(&refined_grid)?);
        Ok(Self {
            base: (base_grid, base),
            refined: (refined_grid, refined),
        })
    }

    /// N over the dense reference grid up to `t_max`, without the convergence check.
    pub fn value_at(&self, t_max: f64) -> f64 {
        let (grid, cum) = &self.base;
        cum[grid.count_until(t_max).max(1) - 1]
    }

    /// Checked estimate for the window `[0, t_max]`.
    pub fn at(&self, t_max: f64) -> Result<TrueValueEstimate> {
        if !(t_max > 0.0) || t_max > self.base.0.t_max() * (1.0 + 1e-12) {
            return Err(Error::param(format!(
                "window {t_max} outside (0, {}]",
                self.base.0.t_max()
            )));
        }
        let n_base = self.value_at(t_max);
        let (grid, cum) = &self.refined;
        let n_refined = cum[grid.count_until(t_max).max(1) - 1];
        let convergence_ratio = relative_change(n_base, n_refined);
        if !(convergence_ratio < CONVERGENCE_TOL) {
            return Err(Error::Convergence {
                n_base,
                n_refined,
                ratio: convergence_ratio,
            });
        }
        let count = self.base.0.count_until(t_max);
        Ok(TrueValueEstimate {
            n_true: n_base,
            gamma_used: (count - 1) as f64 / t_max,
            n_refined,
            convergence_ratio,
        })
    }
}

fn relative_change(base: f64, refined: f64) -> f64 {
    let diff = (refined - base).abs();
    if diff == 0.0 {
        0.0
    } else if base == 0.0 {
        f64::INFINITY
    } else {
        diff / base
    }
}
