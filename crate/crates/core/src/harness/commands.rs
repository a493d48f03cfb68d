//! The four experiment commands. Each returns a [`ResultTable`]; [`run`] also
//! writes it to `<output_dir>/<command>.csv`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dynamics::{Simulator, TimeGrid};
use crate::error::{Error, Result};
use crate::measure::TrueStaircase;
use crate::qpn::{
    bias_surface, distance_series, inject_qpn, mean_noisy_distance, noisy_measure_of, substream,
    StreamKind,
};

use super::config::{repetitions_from_value, RunConfig, SweepAxis};
use super::table::ResultTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Measure,
    Bias,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 4] = [Command::Simulate, Command::Measure, Command::Bias, Command::Sweep];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Measure => "measure",
            Command::Bias => "bias",
            Command::Sweep => "sweep",
        }
    }

    pub fn execute(self, config: &RunConfig) -> Result<ResultTable> {
        match self {
            Command::Simulate => cmd_simulate(config),
            Command::Measure => cmd_measure(config),
            Command::Bias => cmd_bias(config),
            Command::Sweep => cmd_sweep(config),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command {s:?}")))
    }
}

/// Runs `command` and writes its table; returns the CSV path.
pub fn run(command: Command, config: &RunConfig) -> Result<PathBuf> {
    config.validate()?;
    let table = command.execute(config)?;
    let path = config.output_dir().join(format!("{}.csv", command.name()));
    table.write(&path)?;
    Ok(path)
}

/// D(t) of the noiseless model next to the replica mean of the noisy series.
pub fn cmd_simulate(config: &RunConfig) -> Result<ResultTable> {
    config.validate()?;
    let tau = config.tau()?;
    let sim = Simulator::new(&config.model_params()?)?;
    let trajectory = sim.trajectory(&config.time_grid()?);
    let truth = trajectory.distances();
    let noisy = mean_noisy_distance(&trajectory, &config.qpn_config())?;

    let mut table = ResultTable::new(
        "simulate",
        config,
        &["t_tau", "D_true", "D_noisy_mean", "deltaD"],
    )?;
    for (i, &t) in trajectory.grid.times().iter().enumerate() {
        table.push_row(vec![t / tau, truth[i], noisy.distance[i], noisy.delta[i]])?;
    }
    Ok(table)
}

/// N as a function of the window end, averaged over noise replicas, against
/// the dense noiseless reference.
pub fn cmd_measure(config: &RunConfig) -> Result<ResultTable> {
    config.validate()?;
    let tau = config.tau()?;
    let t_max = config.t_max()?;
    let sim = Simulator::new(&config.model_params()?)?;
    let trajectory = sim.trajectory(&config.time_grid()?);
    let qpn = config.qpn_config();
    let truth = TrueStaircase::new(&sim, t_max, config.gamma0()?)?;
    truth.at(t_max)?;

    let replicas = if qpn.is_noiseless() { 1 } else { qpn.k_measure };
    // same streams as `noisy_measure_of(.., cell = 0)`, so the last row agrees with it
    let staircases: Vec<(Vec<f64>, Vec<f64>)> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(qpn.seed, StreamKind::MeasureReplica, 0, k as u32);
            let series = distance_series(&inject_qpn(&trajectory, &qpn, &mut rng)?)?;
            let mut n = vec![0.0; series.len()];
            let mut var = vec![0.0; series.len()];
            for i in 1..series.len() {
                let change = series.distance[i] - series.distance[i - 1];
                n[i] = n[i - 1];
                var[i] = var[i - 1];
                if change > 0.0 {
                    n[i] += change;
                    var[i] += series.delta[i].powi(2) + series.delta[i - 1].powi(2);
                }
            }
            Ok((n, var.into_iter().map(f64::sqrt).collect()))
        })
        .collect::<Result<_>>()?;

    let mut table = ResultTable::new(
        "measure",
        config,
        &["t_max_tau", "N_noisy_mean", "deltaN", "N_true", "B"],
    )?;
    let scale = 1.0 / replicas as f64;
    for (i, &t) in trajectory.grid.times().iter().enumerate().skip(1) {
        let n_noisy = staircases.iter().map(|s| s.0[i]).sum::<f64>() * scale;
        let delta = staircases.iter().map(|s| s.1[i]).sum::<f64>() * scale;
        let n_true = truth.value_at(t);
        table.push_row(vec![t / tau, n_noisy, delta, n_true, n_noisy - n_true])?;
    }
    Ok(table)
}

/// Mean noisy N and bias for every `(γ, r)` of the `[bias]` section.
pub fn cmd_bias(config: &RunConfig) -> Result<ResultTable> {
    config.validate()?;
    let spec = config
        .bias
        .as_ref()
        .ok_or_else(|| Error::Config("the bias command needs a [bias] section".into()))?;
    let tau = config.tau()?;
    let gammas: Vec<f64> = spec.gamma_tau.iter().map(|g| g / tau).collect();
    let surface = bias_surface(
        &config.model_params()?,
        config.t_max()?,
        &gammas,
        &spec.r,
        &config.qpn_config(),
        config.gamma0()?,
    )?;

    let mut table = ResultTable::new(
        "bias",
        config,
        &["gamma_tau", "r", "N_mean", "N_std", "N_true", "B", "B_rel"],
    )?;
    for (gi, gamma_tau) in spec.gamma_tau.iter().enumerate() {
        for (ri, r) in surface.r_grid.iter().enumerate() {
            let b = surface.bias[gi][ri];
            table.push_row(vec![
                *gamma_tau,
                r.as_f64(),
                surface.n_mean[gi][ri],
                surface.n_std[gi][ri],
                surface.n_true,
                b,
                b / surface.n_true,
            ])?;
        }
    }
    Ok(table)
}

/// One-parameter scan: for each value and window, the noisy mean N, its spread
/// and propagated uncertainty, the true value and the bias.
pub fn cmd_sweep(config: &RunConfig) -> Result<ResultTable> {
    config.validate()?;
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("the sweep command needs a [sweep] section".into()))?;
    let tau = config.tau()?;
    let gamma0 = config.gamma0()?;
    let base_params = config.model_params()?;
    let base_qpn = config.qpn_config();
    let base_rate = config.sampling_rate()?;

    let cells: Vec<Vec<Vec<f64>>> = spec
        .values
        .par_iter()
        .enumerate()
        .map(|(cell, &value)| {
            let mut params = base_params;
            let mut qpn = base_qpn;
            let mut rate = base_rate;
            let mut windows = spec.t_max_tau.clone();
            match spec.axis {
                SweepAxis::OmegaZ => params.omega_z = 2.0 * std::f64::consts::PI * value * 1e6,
                SweepAxis::Nbar => params.nbar = value,
                SweepAxis::Gamma => rate = value / tau,
                SweepAxis::R => qpn.repetitions = repetitions_from_value(value)?,
                SweepAxis::TMax => windows = vec![value],
            }
            params.validate()?;
            let span = windows.iter().copied().fold(0.0, f64::max) * tau;
            let sim = Simulator::new(&params)?;
            let trajectory = sim.trajectory(&TimeGrid::with_rate(span, rate)?);
            let truth = TrueStaircase::new(&sim, span, gamma0)?;
            windows
                .iter()
                .map(|&w| {
                    let t_max = w * tau;
                    let noisy = noisy_measure_of(&trajectory, &qpn, t_max, cell as u32)?;
                    let n_true = truth.at(t_max)?.n_true;
                    Ok(vec![
                        value,
                        w,
                        noisy.mean,
                        noisy.std,
                        noisy.mean_uncertainty,
                        n_true,
                        noisy.mean - n_true,
                    ])
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut table = ResultTable::new(
        "sweep",
        config,
        &["value", "t_max_tau", "N_noisy_mean", "N_std", "deltaN", "N_true", "B"],
    )?;
    for row in cells.into_iter().flatten() {
        table.push_row(row)?;
    }
    Ok(table)
}
