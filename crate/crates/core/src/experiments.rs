//! Experiment drivers: swap-time scaling, disorder ensembles, pulse spectra,
//! pulse verification against the dense oracle, and report replay.
//!
//! Every report embeds its full configuration, a hash of it, the seed and the
//! crate version, so [`replay`] can re-run it and compare the errors.

use std::time::Instant;

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chain::{build_generators, ChainSpec};
use crate::error::{Error, Result};
use crate::grape::{fidelity, optimize, ControlProblem, OptimizationReport, OptimizerOptions};
use crate::linalg::{inner, CMatrix, C64};
use crate::oracle::{self, compare_up_to_phase, full_propagator, DenseUnitary};
use crate::propagator::{evolve, ControlPulse, DEFAULT_DT};
use crate::targets::{ideal_many_body, target_gate, TargetKind};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<C, R> {
    pub meta: ReportMeta,
    pub config: C,
    pub results: R,
}

fn hash_config<C: Serialize>(config: &C) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn meta<C: Serialize>(experiment: &str, config: &C, seed: u64) -> ReportMeta {
    ReportMeta {
        experiment: experiment.to_string(),
        config_hash: hash_config(config),
        seed,
        version: VERSION.to_string(),
    }
}

/// Square-law duration `(N−1)²` used for the end-to-end swap.
pub fn square_law_time(n_sites: usize) -> f64 {
    ((n_sites - 1) * (n_sites - 1)) as f64
}

// ---------------------------------------------------------------- optimize

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub spec: ChainSpec,
    /// Target key, e.g. `swap:1,29`.
    pub target: String,
    pub duration: f64,
    pub dt: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub initial_b1: f64,
    /// Initial `β₁`, used only for targets driven through `Y₁`.
    pub initial_beta1: f64,
    pub options: OptimizerOptions,
}

impl OptimizeConfig {
    pub fn new(spec: ChainSpec, target: TargetKind, duration: f64) -> Self {
        OptimizeConfig {
            spec,
            target: target.key(),
            duration,
            dt: DEFAULT_DT,
            tol: 1e-4,
            max_iterations: 5000,
            initial_b1: 1.0,
            initial_beta1: 1.0,
            options: OptimizerOptions::default(),
        }
    }

    fn problem(&self) -> Result<ControlProblem> {
        let kind: TargetKind = self.target.parse()?;
        let spec = self.spec.realized();
        let goal = target_gate(kind, &spec)?;
        let gens = build_generators(&spec, goal.representation)?;
        let mut template = ControlPulse::constant(self.duration, self.dt, self.initial_b1)?;
        if gens.ctrl_y1.is_some() {
            let steps = template.steps();
            template = template.with_beta1(vec![self.initial_beta1; steps])?;
        }
        let mut problem = ControlProblem::new(gens, goal.mode_unitary, template)?;
        problem.tolerance = self.tol;
        problem.max_iterations = self.max_iterations;
        problem.options = self.options.clone();
        Ok(problem)
    }
}

pub type OptimizeRun = Report<OptimizeConfig, OptimizationReport>;

pub fn run_optimize(config: &OptimizeConfig) -> Result<OptimizeRun> {
    let report = optimize(&config.problem()?)?;
    Ok(Report { meta: meta("optimize", config, config.options.seed), config: config.clone(), results: report })
}

// ---------------------------------------------------------------- scaling

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub n_values: Vec<usize>,
    pub dt: f64,
    pub tol: f64,
    pub seed: u64,
    pub max_iterations: usize,
    pub options: OptimizerOptions,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            n_values: vec![4, 6, 8, 10, 12, 14],
            dt: DEFAULT_DT,
            tol: 1e-4,
            seed: 0,
            max_iterations: 5000,
            options: OptimizerOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n_sites: usize,
    pub duration: f64,
    /// Two physical swaps per logical swap.
    pub logical_swap_time: f64,
    pub converged: bool,
    pub error: f64,
    pub iterations: usize,
    pub wall_time: f64,
    pub f95: f64,
    pub pulse: ControlPulse,
}

pub type ScalingReport = Report<ScalingConfig, Vec<ScalingRow>>;

fn swap_run(spec: ChainSpec, dt: f64, tol: f64, seed: u64, max_iterations: usize, options: &OptimizerOptions) -> Result<(OptimizationReport, f64)> {
    let n = spec.n_sites;
    let duration = square_law_time(n);
    let mut config = OptimizeConfig::new(spec, TargetKind::PhysicalSwap { k: 1, l: n - 1 }, duration);
    config.dt = dt;
    config.tol = tol;
    config.max_iterations = max_iterations;
    config.options = OptimizerOptions { seed, ..options.clone() };
    Ok((optimize(&config.problem()?)?, duration))
}

/// Physical swap `(1, N−1)` at `T = (N−1)²` for each `N`; rows follow `n_values`.
pub fn run_scaling(config: &ScalingConfig) -> Result<ScalingReport> {
    if let Some(bad) = config.n_values.iter().find(|&&n| n < 3) {
        return Err(Error::InvalidSpec(format!("scaling needs N ≥ 3, got {bad}")));
    }
    let rows = config
        .n_values
        .par_iter()
        .map(|&n| {
            let started = Instant::now();
            let (report, duration) = swap_run(ChainSpec::uniform(n, 1.0), config.dt, config.tol, config.seed, config.max_iterations, &config.options)?;
            let f95 = run_fourier(&report.pulse)?.f95;
            Ok(ScalingRow {
                n_sites: n,
                duration,
                logical_swap_time: 2.0 * duration,
                converged: report.converged,
                error: report.final_error,
                iterations: report.iterations,
                wall_time: started.elapsed().as_secs_f64(),
                f95,
                pulse: report.pulse,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Report { meta: meta("scaling", config, config.seed), config: config.clone(), results: rows })
}

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut out = String::from("n_sites,duration,logical_swap_time,converged,error,iterations,wall_time,f95\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:e},{},{:.3},{}\n",
            r.n_sites, r.duration, r.logical_swap_time, r.converged, r.error, r.iterations, r.wall_time, r.f95
        ));
    }
    out
}

// ---------------------------------------------------------------- disorder

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderConfig {
    pub n_sites: usize,
    pub strength: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub dt: f64,
    pub tol: f64,
    pub max_iterations: usize,
    /// Fraction of trials that must converge for the run to pass.
    pub pass_fraction: f64,
    pub options: OptimizerOptions,
}

impl Default for DisorderConfig {
    fn default() -> Self {
        DisorderConfig {
            n_sites: 10,
            strength: 0.1,
            trials: 10,
            base_seed: 0,
            dt: DEFAULT_DT,
            tol: 1e-4,
            max_iterations: 5000,
            pass_fraction: 0.8,
            options: OptimizerOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderTrial {
    pub seed: u64,
    pub couplings: Vec<f64>,
    pub converged: bool,
    pub error: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderResults {
    pub duration: f64,
    pub trials: Vec<DisorderTrial>,
    pub converged_fraction: f64,
    pub passed: bool,
}

pub type DisorderReport = Report<DisorderConfig, DisorderResults>;

/// Re-optimize the end-to-end swap for `trials` seeded coupling realizations
/// `c_n = 1 + δ_n`, `δ_n ~ U[−s, s]`, seeds `base_seed + i`.
pub fn run_disorder(config: &DisorderConfig) -> Result<DisorderReport> {
    if !(0.0..=0.5).contains(&config.strength) {
        return Err(Error::InvalidSpec(format!("disorder strength {} outside [0, 0.5]", config.strength)));
    }
    if config.trials == 0 {
        return Err(Error::InvalidSpec("disorder run needs at least one trial".into()));
    }
    if config.n_sites < 3 {
        return Err(Error::InvalidSpec("disorder run needs N ≥ 3".into()));
    }
    let trials = (0..config.trials as u64)
        .into_par_iter()
        .map(|i| {
            let seed = config.base_seed + i;
            let spec = ChainSpec::uniform(config.n_sites, 1.0).with_disorder(config.strength, seed).realized();
            let couplings = spec.couplings.clone();
            let (report, _) = swap_run(spec, config.dt, config.tol, seed, config.max_iterations, &config.options)?;
            Ok(DisorderTrial { seed, couplings, converged: report.converged, error: report.final_error, iterations: report.iterations })
        })
        .collect::<Result<Vec<_>>>()?;
    let converged = trials.iter().filter(|t| t.converged).count();
    let converged_fraction = converged as f64 / trials.len() as f64;
    let results = DisorderResults {
        duration: square_law_time(config.n_sites),
        passed: converged_fraction >= config.pass_fraction,
        converged_fraction,
        trials,
    };
    Ok(Report { meta: meta("disorder", config, config.base_seed), config: config.clone(), results })
}

pub fn disorder_csv(trials: &[DisorderTrial]) -> String {
    let mut out = String::from("seed,converged,error,iterations,couplings\n");
    for t in trials {
        let c: Vec<String> = t.couplings.iter().map(|x| x.to_string()).collect();
        out.push_str(&format!("{},{},{:e},{},\"{}\"\n", t.seed, t.converged, t.error, t.iterations, c.join(";")));
    }
    out
}

// ---------------------------------------------------------------- fourier

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Ordinary frequencies `k / (M dt)` in units of `J`.
    pub frequencies: Vec<f64>,
    /// One-sided power, normalized to sum 1.
    pub power: Vec<f64>,
    /// Smallest frequency below which 95% of the power lies.
    pub f95: f64,
}

/// One-sided power spectrum of the mean-subtracted `b1` samples.
pub fn run_fourier(pulse: &ControlPulse) -> Result<SpectrumReport> {
    spectrum(&pulse.samples_b1, pulse.dt)
}

pub fn spectrum(samples: &[f64], dt: f64) -> Result<SpectrumReport> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::InvalidPulse("spectrum needs at least two samples".into()));
    }
    let mean = samples.iter().sum::<f64>() / m as f64;
    let mut buffer: Vec<Complex<f64>> = samples.iter().map(|x| Complex::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buffer);
    let half = m / 2;
    let raw: Vec<f64> = (0..=half)
        .map(|k| {
            let p = buffer[k].norm_sqr();
            // interior bins stand for both ±k
            if k == 0 || (m % 2 == 0 && k == half) { p } else { 2.0 * p }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total <= 1e-24 * m as f64 {
        return Ok(SpectrumReport { frequencies: Vec::new(), power: Vec::new(), f95: 0.0 });
    }
    let frequencies: Vec<f64> = (0..=half).map(|k| k as f64 / (m as f64 * dt)).collect();
    let power: Vec<f64> = raw.iter().map(|p| p / total).collect();
    let mut cumulative = 0.0;
    let mut f95 = *frequencies.last().expect("non-empty spectrum");
    for (f, p) in frequencies.iter().zip(&power) {
        cumulative += p;
        if cumulative >= 0.95 {
            f95 = *f;
            break;
        }
    }
    Ok(SpectrumReport { frequencies, power, f95 })
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub target: String,
    /// Dimension of the fermionic picture the fidelity was taken in.
    pub dimension: usize,
    pub mode_error: f64,
    /// Dense-oracle infidelity after removing the `e^{iφN̂}` freedom left by
    /// the mode-picture fidelity (equals `full_error_strict` otherwise).
    pub full_error: Option<f64>,
    pub full_error_strict: Option<f64>,
    pub phase_checked: bool,
}

/// Check a pulse against a target in its fermionic picture and, if
/// `with_oracle`, against the exact many-body action.
pub fn verify_pulse(spec: &ChainSpec, pulse: &ControlPulse, target: TargetKind, with_oracle: bool) -> Result<VerifyReport> {
    let realized = spec.realized();
    let goal = target_gate(target, &realized)?;
    let gens = build_generators(&realized, goal.representation)?;
    let u = evolve(&gens, pulse, false)?.total;
    let mode_error = 1.0 - fidelity(&u, &goal.mode_unitary)?;
    let (full_error, full_error_strict) = if with_oracle {
        let n = spec.n_sites;
        let actual = full_propagator(&realized, pulse)?;
        let ideal = DenseUnitary { n_sites: n, matrix: ideal_many_body(target, n)? };
        let strict = compare_up_to_phase(&actual, &ideal)?;
        let gauged = if goal.representation.is_majorana() {
            strict
        } else {
            let phi = inner(&goal.mode_unitary, &u).arg();
            compare_up_to_phase(&actual, &number_phase(&ideal, phi))?
        };
        (Some(gauged), Some(strict))
    } else {
        (None, None)
    };
    Ok(VerifyReport { target: target.key(), dimension: gens.dim(), mode_error, full_error, full_error_strict, phase_checked: true })
}

/// `u · e^{iφN̂}`.
fn number_phase(u: &DenseUnitary, phi: f64) -> DenseUnitary {
    let dim = u.dim();
    let phases: Vec<C64> = (0..dim).map(|x| C64::from_polar(1.0, phi * x.count_ones() as f64)).collect();
    let matrix = CMatrix::from_fn(dim, dim, |r, c| u.matrix[(r, c)] * phases[c]);
    DenseUnitary { n_sites: u.n_sites, matrix }
}

// ---------------------------------------------------------------- replay

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayOutcome {
    pub experiment: String,
    pub config_hash_matches: bool,
    pub reported: Vec<f64>,
    pub reproduced: Vec<f64>,
    pub max_deviation: f64,
}

fn parse<T: DeserializeOwned>(value: &serde_json::Value) -> Result<T> {
    Ok(serde_json::from_value(value.clone())?)
}

/// Re-run a report from its embedded configuration and compare errors.
pub fn replay(report_json: &str) -> Result<ReplayOutcome> {
    let value: serde_json::Value = serde_json::from_str(report_json)?;
    let meta: ReportMeta = parse(&value["meta"])?;
    let config = &value["config"];
    let results = &value["results"];
    let (hash, reported, reproduced) = match meta.experiment.as_str() {
        "optimize" => {
            let c: OptimizeConfig = parse(config)?;
            let old: OptimizationReport = parse(results)?;
            (hash_config(&c), vec![old.final_error], vec![run_optimize(&c)?.results.final_error])
        }
        "scaling" => {
            let c: ScalingConfig = parse(config)?;
            let old: Vec<ScalingRow> = parse(results)?;
            let new = run_scaling(&c)?.results;
            (hash_config(&c), old.iter().map(|r| r.error).collect(), new.iter().map(|r| r.error).collect())
        }
        "disorder" => {
            let c: DisorderConfig = parse(config)?;
            let old: DisorderResults = parse(results)?;
            let new = run_disorder(&c)?.results;
            (hash_config(&c), old.trials.iter().map(|t| t.error).collect(), new.trials.iter().map(|t| t.error).collect())
        }
        other => return Err(Error::InvalidSpec(format!("cannot replay experiment '{other}'"))),
    };
    if reported.len() != reproduced.len() {
        return Err(Error::DimensionMismatch { expected: reported.len(), got: reproduced.len() });
    }
    let max_deviation = reported.iter().zip(&reproduced).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(ReplayOutcome { experiment: meta.experiment, config_hash_matches: hash == meta.config_hash, reported, reproduced, max_deviation })
}

/// Logical infidelity helper re-exported for report consumers.
pub fn logical_infidelity(u: &DenseUnitary, ideal: &CMatrix) -> Result<f64> {
    oracle::logical_infidelity(u, ideal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn pure_tone_has_one_peak() {
        let dt = 0.25;
        let m = 2000;
        let samples: Vec<f64> = (0..m).map(|j| (2.0 * PI * 0.01 * j as f64 * dt).cos()).collect();
        let s = spectrum(&samples, dt).unwrap();
        let bin = 1.0 / (m as f64 * dt);
        let peak = s.power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((s.frequencies[peak] - 0.01).abs() <= bin);
        assert!((s.f95 - 0.01).abs() <= bin);
        assert!((s.power.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_pulse_has_no_spectrum() {
        let s = run_fourier(&ControlPulse::constant(10.0, 0.25, 1.0).unwrap()).unwrap();
        assert!(s.frequencies.is_empty());
        assert_eq!(s.f95, 0.0);
        assert!(spectrum(&[1.0], 0.25).is_err());
    }

    #[test]
    fn offset_does_not_change_f95() {
        let samples: Vec<f64> = (0..400).map(|j| (j as f64 * 0.37).sin() + 0.3 * (j as f64 * 0.05).cos()).collect();
        let shifted: Vec<f64> = samples.iter().map(|x| x + 5.0).collect();
        assert_eq!(spectrum(&samples, 0.25).unwrap().f95, spectrum(&shifted, 0.25).unwrap().f95);
    }

    #[test]
    fn scaling_with_degenerate_tolerance() {
        let config = ScalingConfig { n_values: vec![3], tol: 2.0, ..Default::default() };
        let report = run_scaling(&config).unwrap();
        assert!(report.results[0].converged);
        assert_eq!(report.results[0].iterations, 0);
        assert_eq!(report.results[0].duration, 4.0);
        assert_eq!(report.results[0].logical_swap_time, 8.0);
        assert!(run_scaling(&ScalingConfig { n_values: vec![2], ..Default::default() }).is_err());
    }

    #[test]
    fn scaling_rows_are_independent() {
        let base = ScalingConfig { n_values: vec![4, 5], max_iterations: 30, ..Default::default() };
        let swapped = ScalingConfig { n_values: vec![5, 4], ..base.clone() };
        let a = run_scaling(&base).unwrap().results;
        let b = run_scaling(&swapped).unwrap().results;
        assert_eq!(a[0].error, b[1].error);
        assert_eq!(a[1].error, b[0].error);
    }

    #[test]
    fn zero_disorder_trials_agree() {
        let config = DisorderConfig { n_sites: 4, strength: 0.0, trials: 2, max_iterations: 20, ..Default::default() };
        let r = run_disorder(&config).unwrap().results;
        assert_eq!(r.trials[0].couplings, vec![1.0; 3]);
        assert_eq!(r.trials[0].couplings, r.trials[1].couplings);
        assert!(run_disorder(&DisorderConfig { strength: 0.7, ..config.clone() }).is_err());
        assert!(run_disorder(&DisorderConfig { trials: 0, ..config }).is_err());
    }

    #[test]
    fn disorder_samples_are_seeded() {
        let config = DisorderConfig { n_sites: 4, trials: 2, max_iterations: 1, tol: 0.9, ..Default::default() };
        let a = run_disorder(&config).unwrap().results;
        let b = run_disorder(&config).unwrap().results;
        assert_eq!(a, b);
        assert_ne!(a.trials[0].couplings, a.trials[1].couplings);
    }

    #[test]
    fn verify_reports_gauge_and_strict_errors() {
        let spec = ChainSpec::uniform(4, 1.0);
        let config = OptimizeConfig::new(spec.clone(), TargetKind::PhysicalSwap { k: 1, l: 3 }, 9.0);
        let run = run_optimize(&config).unwrap();
        assert!(run.results.converged);
        let v = verify_pulse(&spec, &run.results.pulse, TargetKind::PhysicalSwap { k: 1, l: 3 }, true).unwrap();
        assert!((v.mode_error - run.results.final_error).abs() < 1e-15);
        assert!(v.full_error.unwrap() <= v.full_error_strict.unwrap() + 1e-15);
        assert!(v.full_error.unwrap() < 1e-3);
        assert_eq!(v.dimension, 4);
    }

    #[test]
    fn optimize_report_replays_exactly() {
        let mut config = OptimizeConfig::new(ChainSpec::uniform(4, 1.0), TargetKind::PhysicalSwap { k: 1, l: 3 }, 9.0);
        config.options.seed = 5;
        let run = run_optimize(&config).unwrap();
        let json = serde_json::to_string(&run).unwrap();
        let outcome = replay(&json).unwrap();
        assert!(outcome.config_hash_matches);
        assert_eq!(outcome.max_deviation, 0.0);
        assert_eq!(run.meta.seed, 5);
        assert_eq!(run.meta.version, VERSION);
    }
}
