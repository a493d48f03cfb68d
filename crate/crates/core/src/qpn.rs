//! Quantum projection noise: injection into simulated Bloch trajectories,
//! postselection over repetitions and sampling points, and bias surfaces.
//!
//! Every random draw comes from a ChaCha8 stream selected by a root seed and a
//! task index, so results do not depend on thread count or scheduling.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dynamics::{trace_distance, Bloch, BlochTrajectory, DistanceSeries, Simulator, TimeGrid};
use crate::error::{Error, Result};
use crate::hilbert::ModelParams;
use crate::measure::{delta_d, estimate_true_n, nonmarkovianity, positive_variation};

/// Reference number of repetitions per expectation value.
pub const REFERENCE_REPETITIONS: u64 = 500;
/// Default replica count for averaging D and N.
pub const DEFAULT_REPLICAS: usize = 50;
/// Default number of postselection iterations.
pub const DEFAULT_RESAMPLE_ITERATIONS: usize = 100;

/// Number of projective measurements behind each expectation value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Repetitions {
    Finite(u64),
    /// Noise-free limit.
    Infinite,
}

impl Repetitions {
    pub fn finite(r: u64) -> Result<Self> {
        if r < 1 {
            return Err(Error::param("repetitions must be >= 1"));
        }
        Ok(Repetitions::Finite(r))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Repetitions::Infinite)
    }

    /// `r` as a float, `inf` for the noise-free limit.
    pub fn as_f64(&self) -> f64 {
        match self {
            Repetitions::Finite(r) => *r as f64,
            Repetitions::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Repetitions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Repetitions::Finite(r) => write!(f, "{r}"),
            Repetitions::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Repetitions {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Repetitions::Infinite),
            other => other
                .parse::<u64>()
                .map_err(|_| Error::param(format!("invalid repetition count {other:?}")))
                .and_then(Repetitions::finite),
        }
    }
}

impl Serialize for Repetitions {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Repetitions::Finite(r) => s.serialize_u64(*r),
            Repetitions::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Repetitions {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(r) if r >= 1 => Ok(Repetitions::Finite(r as u64)),
            Raw::Int(r) => Err(serde::de::Error::custom(format!(
                "repetitions must be >= 1, got {r}"
            ))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    /// Normal draws around the true value with the binomial width; not clamped.
    #[default]
    Gaussian,
    /// Exact binomial counting statistics.
    Binomial,
    /// No projection noise at all.
    None,
}

impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseModel::Gaussian),
            "binomial" => Ok(NoiseModel::Binomial),
            "none" => Ok(NoiseModel::None),
            other => Err(Error::param(format!("unknown noise model {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpnConfig {
    pub repetitions: Repetitions,
    pub noise: NoiseModel,
    /// Replicas averaged for a mean D(t).
    pub k_series: usize,
    /// Replicas averaged for a mean N.
    pub k_measure: usize,
    pub seed: u64,
}

impl Default for QpnConfig {
    fn default() -> Self {
        Self {
            repetitions: Repetitions::Finite(REFERENCE_REPETITIONS),
            noise: NoiseModel::Gaussian,
            k_series: DEFAULT_REPLICAS,
            k_measure: DEFAULT_REPLICAS,
            seed: 0,
        }
    }
}

impl QpnConfig {
    pub fn validate(&self) -> Result<()> {
        if let Repetitions::Finite(0) = self.repetitions {
            return Err(Error::param("repetitions must be >= 1"));
        }
        if self.k_series < 1 || self.k_measure < 1 {
            return Err(Error::param("replica counts must be >= 1"));
        }
        Ok(())
    }

    pub fn with_repetitions(mut self, r: Repetitions) -> Self {
        self.repetitions = r;
        self
    }

    /// True when injection leaves trajectories untouched.
    pub fn is_noiseless(&self) -> bool {
        self.noise == NoiseModel::None || self.repetitions.is_infinite()
    }
}

/// Purposes of random streams; keeps streams of different tasks disjoint.
#[derive(Clone, Copy, Debug)]
#[repr(u8)]
pub enum StreamKind {
    SeriesReplica = 1,
    MeasureReplica = 2,
    Outcomes = 3,
    ResampleR = 4,
    ResampleGamma = 5,
    PureNoise = 6,
}

/// Deterministic substream for task `(kind, cell, replica)` under `seed`.
pub fn substream(seed: u64, kind: StreamKind, cell: u32, replica: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell = u64::from(cell) & 0x00ff_ffff;
    rng.set_stream(((kind as u64) << 56) | (cell << 32) | u64::from(replica));
    rng
}

/// Binomial standard deviation of an expectation value estimated from `r`
/// projective measurements: `2 √(p(1 - p)/r)` with `p = (⟨σ⟩ + 1)/2`.
pub fn qpn_sigma(mean: f64, r: Repetitions) -> Result<f64> {
    if !mean.is_finite() || mean.abs() > 1.0 + 1e-9 {
        return Err(Error::param(format!("expectation value {mean} outside [-1, 1]")));
    }
    let r = match r {
        Repetitions::Infinite => return Ok(0.0),
        Repetitions::Finite(0) => return Err(Error::param("repetitions must be >= 1")),
        Repetitions::Finite(r) => r as f64,
    };
    let p = up_probability(mean);
    Ok(2.0 * (p * (1.0 - p) / r).sqrt())
}

fn up_probability(mean: f64) -> f64 {
    ((mean + 1.0) / 2.0).clamp(0.0, 1.0)
}

fn sigmas_of(vectors: &[Bloch], r: Repetitions) -> Result<Vec<Bloch>> {
    vectors
        .iter()
        .map(|v| Ok([qpn_sigma(v[0], r)?, qpn_sigma(v[1], r)?, qpn_sigma(v[2], r)?]))
        .collect()
}

/// One noisy realisation of a noiseless trajectory.
///
/// For every time, initial state and component the true value is replaced by a
/// draw with the projection-noise width of `config.repetitions`. The recorded
/// sigmas are those of the true values.
pub fn inject_qpn<R: Rng + ?Sized>(
    trajectory: &BlochTrajectory,
    config: &QpnConfig,
    rng: &mut R,
) -> Result<BlochTrajectory> {
    config.validate()?;
    let r = if config.noise == NoiseModel::None {
        Repetitions::Infinite
    } else {
        config.repetitions
    };
    let sigmas1 = sigmas_of(&trajectory.vectors1, r)?;
    let sigmas2 = sigmas_of(&trajectory.vectors2, r)?;
    let mut out = trajectory.clone();
    if let Repetitions::Finite(count) = r {
        let binomial_draw = |mean: f64, rng: &mut R| -> Result<f64> {
            let dist = Binomial::new(count, up_probability(mean))
                .map_err(|e| Error::numeric(format!("binomial sampler: {e}")))?;
            Ok(2.0 * dist.sample(rng) as f64 / count as f64 - 1.0)
        };
        for i in 0..trajectory.len() {
            for (vectors, sigmas) in [(&mut out.vectors1, &sigmas1), (&mut out.vectors2, &sigmas2)] {
                for l in 0..3 {
                    let mean = vectors[i][l];
                    vectors[i][l] = match config.noise {
                        NoiseModel::Gaussian => {
                            let z: f64 = StandardNormal.sample(rng);
                            mean + sigmas[i][l] * z
                        }
                        NoiseModel::Binomial => binomial_draw(mean, rng)?,
                        NoiseModel::None => unreachable!("handled as infinite repetitions"),
                    };
                }
            }
        }
    }
    out.sigmas1 = Some(sigmas1);
    out.sigmas2 = Some(sigmas2);
    Ok(out)
}

/// D(t) of a (possibly noisy) trajectory with propagated δD.
///
/// At a vanishing distance the linear propagation is singular; there δD falls
/// back to half the largest per-component spread `√(δ¹_l² + δ²_l²)`, which
/// bounds the first-order change of D in any direction.
pub fn distance_series(trajectory: &BlochTrajectory) -> Result<DistanceSeries> {
    let zeros = vec![[0.0; 3]; trajectory.len()];
    let s1 = trajectory.sigmas1.as_ref().unwrap_or(&zeros);
    let s2 = trajectory.sigmas2.as_ref().unwrap_or(&zeros);
    let mut distance = Vec::with_capacity(trajectory.len());
    let mut delta = Vec::with_capacity(trajectory.len());
    for i in 0..trajectory.len() {
        let (v1, v2) = (&trajectory.vectors1[i], &trajectory.vectors2[i]);
        distance.push(trace_distance(v1, v2));
        let d = match delta_d(v1, v2, &s1[i], &s2[i]) {
            Ok(d) => d,
            Err(Error::DegenerateDistance { .. }) => {
                0.5 * (0..3)
                    .map(|l| s1[i][l].hypot(s2[i][l]))
                    .fold(0.0, f64::max)
            }
            Err(e) => return Err(e),
        };
        delta.push(d);
    }
    DistanceSeries::new(trajectory.grid.clone(), distance, delta)
}

/// Mean and spread of N over independent noise replicas.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyMeasure {
    pub mean: f64,
    /// Sample standard deviation over replicas (zero for a single replica).
    pub std: f64,
    /// Mean propagated δN.
    pub mean_uncertainty: f64,
    pub t_max: f64,
    pub gamma: f64,
    pub repetitions: Repetitions,
    pub replicas: Vec<f64>,
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// N averaged over `config.k_measure` noise replicas of a fixed trajectory.
/// `cell` selects the random streams so that distinct grid cells stay independent.
pub fn noisy_measure_of(
    trajectory: &BlochTrajectory,
    config: &QpnConfig,
    t_max: f64,
    cell: u32,
) -> Result<NoisyMeasure> {
    config.validate()?;
    let replicas = if config.is_noiseless() { 1 } else { config.k_measure };
    let results: Vec<(f64, f64, f64)> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(config.seed, StreamKind::MeasureReplica, cell, k as u32);
            let noisy = inject_qpn(trajectory, config, &mut rng)?;
            let r = nonmarkovianity(&distance_series(&noisy)?, t_max)?;
            Ok((r.value, r.uncertainty, r.gamma))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let (mean, std) = mean_std(&values);
    Ok(NoisyMeasure {
        mean,
        std,
        mean_uncertainty: results.iter().map(|r| r.1).sum::<f64>() / replicas as f64,
        t_max,
        gamma: results[0].2,
        repetitions: if config.noise == NoiseModel::None {
            Repetitions::Infinite
        } else {
            config.repetitions
        },
        replicas: values,
    })
}

/// Simulates `params` on `grid` and averages N over noise replicas.
pub fn noisy_measure(
    params: &ModelParams,
    grid: &TimeGrid,
    config: &QpnConfig,
    t_max: f64,
) -> Result<NoisyMeasure> {
    let trajectory = Simulator::new(params)?.trajectory(grid);
    noisy_measure_of(&trajectory, config, t_max, 0)
}

/// Pointwise mean of D and δD over `config.k_series` noise replicas.
pub fn mean_noisy_distance(trajectory: &BlochTrajectory, config: &QpnConfig) -> Result<DistanceSeries> {
    config.validate()?;
    let replicas = if config.is_noiseless() { 1 } else { config.k_series };
    let series: Vec<DistanceSeries> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(config.seed, StreamKind::SeriesReplica, 0, k as u32);
            distance_series(&inject_qpn(trajectory, config, &mut rng)?)
        })
        .collect::<Result<_>>()?;
    let n = trajectory.len();
    let mut distance = vec![0.0; n];
    let mut delta = vec![0.0; n];
    for s in &series {
        for i in 0..n {
            distance[i] += s.distance[i];
            delta[i] += s.delta[i];
        }
    }
    let scale = 1.0 / replicas as f64;
    distance.iter_mut().for_each(|d| *d *= scale);
    delta.iter_mut().for_each(|d| *d *= scale);
    DistanceSeries::new(trajectory.grid.clone(), distance, delta)
}

/// Individual ±1 projective outcomes for every point, state and component.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeRecords {
    pub grid: TimeGrid,
    pub r0: usize,
    /// `records[state][point][component]` holds `r0` outcomes, `true` for +1.
    records: [Vec<[Vec<bool>; 3]>; 2],
}

impl OutcomeRecords {
    /// Draws `r0` Bernoulli outcomes per expectation value of a noiseless trajectory.
    pub fn simulate<R: Rng + ?Sized>(trajectory: &BlochTrajectory, r0: usize, rng: &mut R) -> Result<Self> {
        if r0 < 1 {
            return Err(Error::param("r0 must be >= 1"));
        }
        let mut draw = |vectors: &[Bloch]| -> Result<Vec<[Vec<bool>; 3]>> {
            vectors
                .iter()
                .map(|v| {
                    let mut component = |mean: f64| -> Result<Vec<bool>> {
                        qpn_sigma(mean, Repetitions::Infinite)?;
                        let p = up_probability(mean);
                        Ok((0..r0).map(|_| rng.random::<f64>() < p).collect())
                    };
                    Ok([component(v[0])?, component(v[1])?, component(v[2])?])
                })
                .collect()
        };
        let first = draw(&trajectory.vectors1)?;
        let second = draw(&trajectory.vectors2)?;
        Ok(Self {
            grid: trajectory.grid.clone(),
            r0,
            records: [first, second],
        })
    }

    /// Wraps externally recorded outcomes.
    pub fn from_records(grid: TimeGrid, records: [Vec<[Vec<bool>; 3]>; 2]) -> Result<Self> {
        let r0 = records[0].first().map(|p| p[0].len()).unwrap_or(0);
        let consistent = records.iter().all(|state| {
            state.len() == grid.len() && state.iter().all(|p| p.iter().all(|c| c.len() == r0))
        });
        if !consistent || r0 < 1 {
            return Err(Error::param("outcome records must have r0 >= 1 entries per grid point"));
        }
        Ok(Self { grid, r0, records })
    }

    /// Means over the full ensemble, with sigmas for `r0` repetitions.
    pub fn trajectory(&self) -> Result<BlochTrajectory> {
        let all: Vec<usize> = (0..self.r0).collect();
        self.trajectory_from(|_| all.clone(), self.r0)
    }

    fn trajectory_from<F>(&self, mut pick: F, r: usize) -> Result<BlochTrajectory>
    where
        F: FnMut(usize) -> Vec<usize>,
    {
        let reps = Repetitions::finite(r as u64)?;
        let mut means = [Vec::new(), Vec::new()];
        let mut sigmas = [Vec::new(), Vec::new()];
        for state in 0..2 {
            for point in &self.records[state] {
                let mut v = [0.0; 3];
                let mut s = [0.0; 3];
                for l in 0..3 {
                    let ups = pick(self.r0).into_iter().filter(|&j| point[l][j]).count();
                    v[l] = 2.0 * ups as f64 / r as f64 - 1.0;
                    s[l] = qpn_sigma(v[l], reps)?;
                }
                means[state].push(v);
                sigmas[state].push(s);
            }
        }
        let [vectors1, vectors2] = means;
        let [sigmas1, sigmas2] = sigmas;
        Ok(BlochTrajectory {
            grid: self.grid.clone(),
            vectors1,
            vectors2,
            sigmas1: Some(sigmas1),
            sigmas2: Some(sigmas2),
        })
    }
}

/// Postselects `r` of the `r0` outcomes (without replacement) for every
/// expectation value and recomputes means and sigmas.
pub fn resample_r<R: Rng + ?Sized>(records: &OutcomeRecords, r: usize, rng: &mut R) -> Result<BlochTrajectory> {
    if r < 1 || r > records.r0 {
        return Err(Error::param(format!(
            "subensemble size {r} outside [1, {}]",
            records.r0
        )));
    }
    records.trajectory_from(|r0| index::sample(rng, r0, r).into_vec(), r)
}

/// Postselects `m` of the series' points uniformly at random, kept in time order.
pub fn resample_gamma<R: Rng + ?Sized>(series: &DistanceSeries, m: usize, rng: &mut R) -> Result<DistanceSeries> {
    let m0 = series.len();
    if m < 2 || m > m0 {
        return Err(Error::param(format!("subset size {m} outside [2, {m0}]")));
    }
    let mut picked = index::sample(rng, m0, m).into_vec();
    picked.sort_unstable();
    series.subset(&picked)
}

/// Mean and spread of N over `iterations` r-postselections.
pub fn mean_measure_resampled_r(
    records: &OutcomeRecords,
    r: usize,
    iterations: usize,
    t_max: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let values: Vec<f64> = (0..iterations.max(1))
        .into_par_iter()
        .map(|it| {
            let mut rng = substream(seed, StreamKind::ResampleR, r as u32, it as u32);
            let traj = resample_r(records, r, &mut rng)?;
            Ok(nonmarkovianity(&distance_series(&traj)?, t_max)?.value)
        })
        .collect::<Result<_>>()?;
    Ok(mean_std(&values))
}

/// Mean and spread of N over `iterations` random size-`m` subsets of the series.
pub fn mean_measure_resampled_gamma(
    series: &DistanceSeries,
    m: usize,
    iterations: usize,
    t_max: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let values: Vec<f64> = (0..iterations.max(1))
        .into_par_iter()
        .map(|it| {
            let mut rng = substream(seed, StreamKind::ResampleGamma, m as u32, it as u32);
            let sub = resample_gamma(series, m, &mut rng)?;
            Ok(positive_variation(&sub.distance[..sub.grid.count_until(t_max)]))
        })
        .collect::<Result<_>>()?;
    Ok(mean_std(&values))
}

/// Mean N and bias over a grid of sampling rates and repetition counts.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasSurface {
    /// Sampling rates (1/s), one row each.
    pub gamma_grid: Vec<f64>,
    /// Repetition counts, one column each.
    pub r_grid: Vec<Repetitions>,
    pub n_mean: Vec<Vec<f64>>,
    pub n_std: Vec<Vec<f64>>,
    pub n_true: f64,
    pub bias: Vec<Vec<f64>>,
}

/// Evaluates the mean noisy N on uniform grids of rate γ for every `(γ, r)`
/// and subtracts the dense noiseless reference value.
pub fn bias_surface(
    params: &ModelParams,
    t_max: f64,
    gamma_grid: &[f64],
    r_grid: &[Repetitions],
    config: &QpnConfig,
    gamma0: f64,
) -> Result<BiasSurface> {
    config.validate()?;
    if gamma_grid.is_empty() || r_grid.is_empty() {
        return Err(Error::param("bias surface needs non-empty rate and repetition grids"));
    }
    let n_true = estimate_true_n(params, t_max, gamma0)?.n_true;
    let sim = Simulator::new(params)?;
    let rows: Vec<Vec<(f64, f64)>> = gamma_grid
        .iter()
        .enumerate()
        .map(|(gi, &gamma)| {
            let trajectory = sim.trajectory(&TimeGrid::with_rate(t_max, gamma)?);
            r_grid
                .iter()
                .enumerate()
                .map(|(ri, &r)| {
                    let cell = (gi * r_grid.len() + ri) as u32;
                    let m = noisy_measure_of(&trajectory, &config.with_repetitions(r), t_max, cell)?;
                    Ok((m.mean, m.std))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let bias: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| row.iter().map(|(mean, _)| mean - n_true).collect())
        .collect();
    // store the mean as B + N_true so that the identity holds bit-exactly
    let n_mean = bias
        .iter()
        .map(|row| row.iter().map(|b| b + n_true).collect())
        .collect();
    Ok(BiasSurface {
        gamma_grid: gamma_grid.to_vec(),
        r_grid: r_grid.to_vec(),
        n_mean,
        n_std: rows
            .iter()
            .map(|row| row.iter().map(|(_, s)| *s).collect())
            .collect(),
        n_true,
        bias,
    })
}

/// Expected N of a constant series disturbed by independent Gaussian noise of
/// width `sigma_d` on `m` points: each increment is normal with s.d. `√2 σ_D`,
/// so `E[N] = (m - 1) σ_D / √π`.
pub fn pure_noise_expectation(m: usize, sigma_d: f64) -> f64 {
    m.saturating_sub(1) as f64 * sigma_d / std::f64::consts::PI.sqrt()
}

/// Monte Carlo mean and spread of N for the pure-noise control.
pub fn pure_noise_measure(m: usize, sigma_d: f64, replicas: usize, seed: u64) -> Result<(f64, f64)> {
    if m < 2 || replicas < 1 || !(sigma_d >= 0.0) {
        return Err(Error::param("pure-noise control needs m >= 2, replicas >= 1, sigma >= 0"));
    }
    let values: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, StreamKind::PureNoise, 0, k as u32);
            let series: Vec<f64> = (0..m)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    0.5 + sigma_d * z
                })
                .collect();
            positive_variation(&series)
        })
        .collect();
    Ok(mean_std(&values))
}

/// Detuned coupling rate `Ω' = √(Ω² + δω²)`.
pub fn effective_coupling(omega: f64, detuning: f64) -> f64 {
    omega.hypot(detuning)
}

/// Oscillation amplitude factor `Ω²/Ω'²` of a detuned exchange.
pub fn resonance_amplitude(omega: f64, detuning: f64) -> f64 {
    debug_assert!(omega > 0.0);
    omega * omega / (omega * omega + detuning * detuning)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_trajectory(value: Bloch, len: usize) -> BlochTrajectory {
        let grid = TimeGrid::uniform(1.0, len).unwrap();
        BlochTrajectory {
            grid,
            vectors1: vec![value; len],
            vectors2: vec![[-value[0], -value[1], -value[2]]; len],
            sigmas1: None,
            sigmas2: None,
        }
    }

    #[test]
    fn sigma_examples() {
        let r = Repetitions::Finite(500);
        assert_eq!(qpn_sigma(1.0, r).unwrap(), 0.0);
        assert_eq!(qpn_sigma(-1.0, r).unwrap(), 0.0);
        assert!((qpn_sigma(0.0, r).unwrap() - 0.044_721_359_5).abs() < 1e-10);
        let s = qpn_sigma(0.3, Repetitions::Finite(100)).unwrap();
        let s4 = qpn_sigma(0.3, Repetitions::Finite(400)).unwrap();
        assert!((s4 - s / 2.0).abs() < 1e-15);
        assert_eq!(qpn_sigma(0.3, Repetitions::Infinite).unwrap(), 0.0);
        assert!(qpn_sigma(1.1, r).is_err());
        assert!(qpn_sigma(0.0, Repetitions::Finite(0)).is_err());
    }

    #[test]
    fn repetitions_parse_and_serialise() {
        assert_eq!("inf".parse::<Repetitions>().unwrap(), Repetitions::Infinite);
        assert_eq!("500".parse::<Repetitions>().unwrap(), Repetitions::Finite(500));
        assert!("0".parse::<Repetitions>().is_err());
        #[derive(Serialize, Deserialize, PartialEq, Debug)]
        struct Wrap {
            r: Repetitions,
            s: Vec<Repetitions>,
        }
        let w = Wrap {
            r: Repetitions::Finite(7),
            s: vec![Repetitions::Infinite, Repetitions::Finite(1)],
        };
        let text = toml::to_string(&w).unwrap();
        assert_eq!(toml::from_str::<Wrap>(&text).unwrap(), w);
        assert!(toml::from_str::<Wrap>("r = 0\ns = []").is_err());
    }

    #[test]
    fn infinite_repetitions_leave_trajectory_unchanged() {
        let traj = flat_trajectory([0.3, -0.2, 0.5], 10);
        let config = QpnConfig::default().with_repetitions(Repetitions::Infinite);
        let mut rng = substream(1, StreamKind::MeasureReplica, 0, 0);
        let out = inject_qpn(&traj, &config, &mut rng).unwrap();
        assert_eq!(out.vectors1, traj.vectors1);
        assert_eq!(out.vectors2, traj.vectors2);
        let none = QpnConfig {
            noise: NoiseModel::None,
            ..QpnConfig::default()
        };
        let out = inject_qpn(&traj, &none, &mut rng).unwrap();
        assert_eq!(out.vectors1, traj.vectors1);
    }

    #[test]
    fn binomial_poles_are_exact() {
        let traj = flat_trajectory([0.0, 0.0, 1.0], 20);
        let config = QpnConfig {
            noise: NoiseModel::Binomial,
            ..QpnConfig::default()
        };
        let mut rng = substream(3, StreamKind::MeasureReplica, 0, 0);
        let out = inject_qpn(&traj, &config, &mut rng).unwrap();
        assert!(out.vectors1.iter().all(|v| v[2] == 1.0));
        assert!(out.vectors2.iter().all(|v| v[2] == -1.0));
    }

    #[test]
    fn injection_is_reproducible() {
        let traj = flat_trajectory([0.1, 0.2, 0.3], 50);
        let config = QpnConfig::default();
        let a = inject_qpn(&traj, &config, &mut substream(9, StreamKind::MeasureReplica, 2, 3)).unwrap();
        let b = inject_qpn(&traj, &config, &mut substream(9, StreamKind::MeasureReplica, 2, 3)).unwrap();
        let c = inject_qpn(&traj, &config, &mut substream(9, StreamKind::MeasureReplica, 2, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_measure_equals_noiseless() {
        let grid = TimeGrid::uniform(1.0, 5).unwrap();
        let traj = BlochTrajectory {
            grid: grid.clone(),
            vectors1: vec![[0.0, 0.0, 1.0], [0.0, 0.0, 0.2], [0.0, 0.0, 0.6], [0.0, 0.0, -0.4], [0.0, 0.0, 0.0]],
            vectors2: vec![[0.0, 0.0, -1.0]; 5],
            sigmas1: None,
            sigmas2: None,
        };
        let config = QpnConfig::default().with_repetitions(Repetitions::Infinite);
        let m = noisy_measure_of(&traj, &config, 1.0, 0).unwrap();
        let exact = nonmarkovianity(&DistanceSeries::noiseless(grid, traj.distances()).unwrap(), 1.0)
            .unwrap()
            .value;
        assert_eq!(m.mean, exact);
        assert_eq!(m.std, 0.0);
        assert!((exact - 0.4).abs() < 1e-12);
    }

    #[test]
    fn resample_r_extremes() {
        let traj = flat_trajectory([0.2, -0.4, 0.6], 6);
        let mut rng = substream(5, StreamKind::Outcomes, 0, 0);
        let records = OutcomeRecords::simulate(&traj, 40, &mut rng).unwrap();
        let full = records.trajectory().unwrap();
        let all = resample_r(&records, 40, &mut rng).unwrap();
        assert_eq!(all.vectors1, full.vectors1);
        assert_eq!(all.vectors2, full.vectors2);
        let single = resample_r(&records, 1, &mut rng).unwrap();
        assert!(single
            .vectors1
            .iter()
            .chain(&single.vectors2)
            .flatten()
            .all(|&x| x == 1.0 || x == -1.0));
        assert!(resample_r(&records, 41, &mut rng).is_err());
        assert!(resample_r(&records, 0, &mut rng).is_err());
    }

    #[test]
    fn resample_gamma_extremes() {
        let grid = TimeGrid::uniform(4.0, 5).unwrap();
        let s = DistanceSeries::noiseless(grid, vec![1.0, 0.6, 0.8, 0.3, 0.5]).unwrap();
        let mut rng = substream(5, StreamKind::ResampleGamma, 0, 0);
        assert_eq!(resample_gamma(&s, 5, &mut rng).unwrap(), s);
        for _ in 0..20 {
            let two = resample_gamma(&s, 2, &mut rng).unwrap();
            assert_eq!(two.len(), 2);
            let expected = (two.distance[1] - two.distance[0]).max(0.0);
            let n = nonmarkovianity(&two, 4.0).unwrap();
            assert_eq!(n.value, expected);
            assert!((two.grid.rate() - 0.25).abs() < 1e-15);
        }
        assert!(resample_gamma(&s, 1, &mut rng).is_err());
        assert!(resample_gamma(&s, 6, &mut rng).is_err());
    }

    #[test]
    fn coupling_helpers() {
        assert_eq!(effective_coupling(2.0, 0.0), 2.0);
        assert_eq!(resonance_amplitude(2.0, 0.0), 1.0);
        assert!((effective_coupling(2.0, 2.0) - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!((resonance_amplitude(2.0, 2.0) - 0.5).abs() < 1e-15);
        let mut last = 1.0;
        for k in 1..50 {
            let a = resonance_amplitude(1.0, k as f64 * 0.1);
            assert!(a < last);
            assert_eq!(a, resonance_amplitude(1.0, -(k as f64) * 0.1));
            last = a;
        }
    }

    #[test]
    fn degenerate_distance_falls_back_to_bound() {
        let mut traj = flat_trajectory([0.0, 0.0, 0.0], 3);
        traj.sigmas1 = Some(vec![[0.03, 0.0, 0.04]; 3]);
        traj.sigmas2 = Some(vec![[0.0; 3]; 3]);
        let s = distance_series(&traj).unwrap();
        assert!(s.distance.iter().all(|&d| d == 0.0));
        assert!((s.delta[0] - 0.02).abs() < 1e-15);
    }
}
