//! Gradient pulse synthesis against a target propagator.
//!
//! The objective is `F = |tr(G† U)|² / d²`. Its gradient uses the exact
//! derivative of each step exponential in the step's eigenbasis, so it is
//! valid at any `dt`. The optimizer is L-BFGS on `1 − F` with a monotone
//! Armijo backtracking line search. With `smoothing` set, the search runs
//! over `x = x₀ + W z` where `W` is a Gaussian low-pass filter, so updates
//! stay in the slow part of the spectrum unless the landscape insists.

use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::chain::QuadraticGenerators;
use crate::error::{Error, Result};
use crate::linalg::{exp_derivative_weights, identity, inner, unitarity_defect, CMatrix, C64};
use crate::propagator::{ordered_product, step_factors, ControlPulse};

/// `(|tr(u† goal)| / d)²`.
pub fn fidelity(u: &CMatrix, goal: &CMatrix) -> Result<f64> {
    if u.shape() != goal.shape() || !u.is_square() {
        return Err(Error::DimensionMismatch { expected: goal.nrows(), got: u.nrows() });
    }
    let d = u.nrows() as f64;
    let overlap = inner(u, goal).norm() / d;
    Ok((overlap * overlap).min(1.0))
}

/// Search settings that do not change the problem itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    pub seed: u64,
    pub restarts: usize,
    pub memory: usize,
    pub stall_window: usize,
    pub stall_threshold: f64,
    /// Half-width of the uniform perturbation applied to the best pulse on restart.
    pub restart_scale: f64,
    /// Gaussian low-pass cutoff in J applied to every search update.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            seed: 0,
            restarts: 3,
            memory: 20,
            stall_window: 50,
            stall_threshold: 1e-12,
            restart_scale: 0.5,
            smoothing: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub gens: QuadraticGenerators,
    pub target: CMatrix,
    /// Fixes `dt`, the step count, the active channels and the initial guess.
    pub pulse_template: ControlPulse,
    /// Optional `[lo, hi]` per channel.
    pub amplitude_bounds: Option<Vec<[f64; 2]>>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub options: OptimizerOptions,
}

impl ControlProblem {
    pub fn new(gens: QuadraticGenerators, target: CMatrix, pulse_template: ControlPulse) -> Result<Self> {
        let problem = ControlProblem {
            gens,
            target,
            pulse_template,
            amplitude_bounds: None,
            tolerance: 1e-4,
            max_iterations: 5000,
            options: OptimizerOptions::default(),
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.gens.dim();
        if self.target.shape() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, got: self.target.nrows() });
        }
        let defect = unitarity_defect(&self.target);
        if defect > 1e-12 {
            return Err(Error::NotUnitary(defect));
        }
        self.pulse_template.validate()?;
        if self.pulse_template.samples_beta1.is_some() && self.gens.ctrl_y1.is_none() {
            return Err(Error::ChannelMismatch("pulse drives beta1 but generators have no Y1 channel".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidSpec(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if let Some(fc) = self.options.smoothing {
            if !(fc > 0.0) {
                return Err(Error::InvalidSpec(format!("smoothing cutoff must be positive, got {fc}")));
            }
            if self.amplitude_bounds.is_some() {
                return Err(Error::InvalidSpec("smoothing and amplitude bounds cannot be combined".into()));
            }
        }
        if let Some(bounds) = &self.amplitude_bounds {
            if bounds.len() != self.pulse_template.channels() {
                return Err(Error::ChannelMismatch(format!(
                    "{} bound pairs for {} channels",
                    bounds.len(),
                    self.pulse_template.channels()
                )));
            }
            if bounds.iter().any(|[lo, hi]| !(lo <= hi)) {
                return Err(Error::InvalidSpec("amplitude bound with lo > hi".into()));
            }
        }
        Ok(())
    }

    fn check_shape(&self, pulse: &ControlPulse) -> Result<()> {
        let t = &self.pulse_template;
        if pulse.steps() != t.steps() || pulse.channels() != t.channels() || pulse.dt != t.dt {
            return Err(Error::InvalidPulse(format!(
                "pulse shape ({} steps, {} channels, dt {}) does not match the template ({}, {}, {})",
                pulse.steps(),
                pulse.channels(),
                pulse.dt,
                t.steps(),
                t.channels(),
                t.dt
            )));
        }
        Ok(())
    }

    fn bounds_for(&self, index: usize) -> Option<[f64; 2]> {
        let m = self.pulse_template.steps();
        self.amplitude_bounds.as_ref().map(|b| b[index / m])
    }

    fn clamp(&self, params: &mut [f64]) {
        if self.amplitude_bounds.is_none() {
            return;
        }
        for (i, x) in params.iter_mut().enumerate() {
            let [lo, hi] = self.bounds_for(i).expect("bounds present");
            *x = x.clamp(lo, hi);
        }
    }
}

/// Fidelity, its gradient with respect to every sample (channel-major, as in
/// [`ControlPulse::to_params`]) and the total propagator.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub fidelity: f64,
    pub gradient: Vec<f64>,
    pub total: CMatrix,
}

pub fn evaluate(problem: &ControlProblem, pulse: &ControlPulse, with_gradient: bool) -> Result<Evaluation> {
    problem.check_shape(pulse)?;
    let gens = &problem.gens;
    let d = gens.dim();
    let factors = step_factors(gens, pulse)?;
    let m = factors.len();
    let goal_dag = problem.target.adjoint();

    if !with_gradient {
        let total = ordered_product(d, factors.iter().map(|f| &f.unitary));
        let fidelity = fidelity(&total, &problem.target)?;
        return Ok(Evaluation { fidelity, gradient: Vec::new(), total });
    }

    // prefixes[j] = U_{j−1} ⋯ U_0, suffixes[j] = G† U_{M−1} ⋯ U_{j+1}
    let mut prefixes = Vec::with_capacity(m);
    let mut acc = identity(d);
    for f in &factors {
        prefixes.push(acc.clone());
        acc = &f.unitary * acc;
    }
    let mut total = acc;
    if unitarity_defect(&total) > 1e-10 {
        total = crate::linalg::reunitarize(&total);
    }
    let mut suffixes = vec![CMatrix::zeros(0, 0); m];
    let mut back = goal_dag.clone();
    for j in (0..m).rev() {
        suffixes[j] = back.clone();
        back = back * &factors[j].unitary;
    }
    let w = (&goal_dag * &total).trace();
    let scale = 2.0 / (d * d) as f64;
    let controls = gens.controls();
    let channels = pulse.channels();

    let per_step: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let f = &factors[j];
            let v = &f.eigen.vectors;
            let vd = v.adjoint();
            let p = &vd * (&prefixes[j] * &suffixes[j]) * v;
            let phi = exp_derivative_weights(&f.eigen.values, pulse.dt);
            (0..channels)
                .map(|c| {
                    let k = &vd * controls[c] * v;
                    let mut dw = C64::new(0.0, 0.0);
                    for a in 0..d {
                        for b in 0..d {
                            dw += p[(a, b)] * phi[(b, a)] * k[(b, a)];
                        }
                    }
                    scale * (w.conj() * dw).re
                })
                .collect()
        })
        .collect();

    let mut gradient = vec![0.0; channels * m];
    for (j, row) in per_step.iter().enumerate() {
        for (c, g) in row.iter().enumerate() {
            gradient[c * m + j] = *g;
        }
    }
    let fidelity = fidelity(&total, &problem.target)?;
    Ok(Evaluation { fidelity, gradient, total })
}

/// Exact gradient of the fidelity with respect to every pulse sample.
pub fn gradient(problem: &ControlProblem, pulse: &ControlPulse) -> Result<Vec<f64>> {
    Ok(evaluate(problem, pulse, true)?.gradient)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub final_error: f64,
    /// Best fidelity after each iteration (entry 0 is the initial guess).
    pub fidelity_trace: Vec<f64>,
    pub iterations: usize,
    pub restarts_used: usize,
    pub pulse: ControlPulse,
    pub seed: u64,
    pub wall_time: f64,
    pub converged: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub options: OptimizerOptions,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Map from search variables to pulse samples.
struct Search {
    origin: Vec<f64>,
    steps: usize,
    /// Filter response per FFT bin; `None` means the samples are searched directly.
    response: Option<Vec<f64>>,
}

impl Search {
    fn new(problem: &ControlProblem) -> Self {
        let template = &problem.pulse_template;
        let m = template.steps();
        let response = problem.options.smoothing.map(|fc| {
            (0..m)
                .map(|k| {
                    let f = k.min(m - k) as f64 / (m as f64 * template.dt);
                    (-0.5 * (f / fc).powi(2)).exp()
                })
                .collect()
        });
        Search { origin: template.to_params(), steps: m, response }
    }

    fn start(&self) -> Vec<f64> {
        match self.response {
            Some(_) => vec![0.0; self.origin.len()],
            None => self.origin.clone(),
        }
    }

    /// The filter is real, even and circulant, hence symmetric: the same
    /// routine pushes variables forward and pulls gradients back.
    fn filter(&self, v: &[f64]) -> Vec<f64> {
        let Some(response) = &self.response else { return v.to_vec() };
        let m = self.steps;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let mut out = Vec::with_capacity(v.len());
        for channel in v.chunks(m) {
            let mut buf: Vec<Complex<f64>> = channel.iter().map(|&x| Complex::new(x, 0.0)).collect();
            forward.process(&mut buf);
            for (b, w) in buf.iter_mut().zip(response) {
                *b *= w / m as f64;
            }
            inverse.process(&mut buf);
            out.extend(buf.iter().map(|c| c.re));
        }
        out
    }

    fn samples(&self, z: &[f64]) -> Vec<f64> {
        match self.response {
            Some(_) => self.origin.iter().zip(self.filter(z)).map(|(a, b)| a + b).collect(),
            None => z.to_vec(),
        }
    }
}

struct Point {
    /// Search variables; equal to the samples unless smoothing is on.
    x: Vec<f64>,
    fid: f64,
    /// Minimized objective `1 − F`.
    f: f64,
    /// Gradient of `1 − F` with respect to `x`.
    g: Vec<f64>,
}

fn objective(problem: &ControlProblem, search: &Search, x: &[f64]) -> Result<Point> {
    let pulse = problem.pulse_template.with_params(&search.samples(x));
    let eval = evaluate(problem, &pulse, true)?;
    let g: Vec<f64> = eval.gradient.iter().map(|v| -v).collect();
    Ok(Point { x: x.to_vec(), fid: eval.fidelity, f: 1.0 - eval.fidelity, g: search.filter(&g) })
}

/// Zero the components that would push a variable through an active bound.
fn project(problem: &ControlProblem, x: &[f64], v: &mut [f64]) {
    if problem.amplitude_bounds.is_none() {
        return;
    }
    for i in 0..v.len() {
        let [lo, hi] = problem.bounds_for(i).expect("bounds present");
        if (x[i] <= lo && v[i] > 0.0) || (x[i] >= hi && v[i] < 0.0) {
            v[i] = 0.0;
        }
    }
}

struct Lbfgs {
    memory: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl Lbfgs {
    fn new(memory: usize) -> Self {
        Lbfgs { memory: memory.max(1), pairs: VecDeque::new() }
    }

    fn reset(&mut self) {
        self.pairs.clear();
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        if sy <= 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() || sy <= 0.0 {
            return;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// Two-loop recursion for `−H g`.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = self.pairs.back().map_or(1.0, |(s, y, _)| dot(s, y) / dot(y, y));
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        q.iter().map(|v| -v).collect()
    }
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

/// Backtracking along `dir` from `point`; `None` if no decrease was found.
fn line_search(problem: &ControlProblem, search: &Search, point: &Point, dir: &[f64], first_step: f64) -> Result<Option<Point>> {
    let mut step = first_step;
    for _ in 0..MAX_BACKTRACKS {
        let mut x: Vec<f64> = point.x.iter().zip(dir).map(|(x, d)| x + step * d).collect();
        problem.clamp(&mut x);
        let moved: Vec<f64> = x.iter().zip(&point.x).map(|(a, b)| a - b).collect();
        let predicted = dot(&point.g, &moved);
        if predicted >= 0.0 {
            step *= 0.5;
            continue;
        }
        let trial = objective(problem, search, &x)?;
        if trial.f <= point.f + ARMIJO * predicted {
            return Ok(Some(trial));
        }
        step *= 0.5;
    }
    Ok(None)
}

/// Minimize `1 − F` from the template's initial guess.
///
/// Returns the best pulse seen; `converged` is false (not an error) if the
/// tolerance was not reached within `max_iterations`.
pub fn optimize(problem: &ControlProblem) -> Result<OptimizationReport> {
    problem.validate()?;
    let started = Instant::now();
    let opts = &problem.options;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let search = Search::new(problem);
    let mut x0 = search.start();
    problem.clamp(&mut x0);
    let mut current = objective(problem, &search, &x0)?;
    let mut best_x = current.x.clone();
    let mut best_f = current.f;
    let mut best_fid = current.fid;
    let mut trace = vec![best_fid];
    let mut lbfgs = Lbfgs::new(opts.memory);
    let mut iterations = 0;
    let mut restarts_used = 0;
    let mut run_history: Vec<f64> = vec![current.f];

    while best_f > problem.tolerance && iterations < problem.max_iterations {
        let mut pg = current.g.clone();
        project(problem, &current.x, &mut pg);
        let mut dir = lbfgs.direction(&pg);
        project(problem, &current.x, &mut dir);
        let gnorm = dot(&pg, &pg).sqrt();
        let mut first = if lbfgs.pairs.is_empty() { 1.0 / gnorm.max(1.0) } else { 1.0 };
        if dot(&dir, &pg) >= 0.0 {
            lbfgs.reset();
            dir = pg.iter().map(|v| -v).collect();
            first = 1.0 / gnorm.max(1.0);
        }

        let mut accepted = if gnorm > 0.0 { line_search(problem, &search, &current, &dir, first)? } else { None };
        if accepted.is_none() && !lbfgs.pairs.is_empty() && gnorm > 0.0 {
            lbfgs.reset();
            let steepest: Vec<f64> = pg.iter().map(|v| -v).collect();
            accepted = line_search(problem, &search, &current, &steepest, 1.0 / gnorm.max(1.0))?;
        }
        iterations += 1;

        let stalled = match accepted {
            Some(next) => {
                let s = next.x.iter().zip(&current.x).map(|(a, b)| a - b).collect();
                let y = next.g.iter().zip(&current.g).map(|(a, b)| a - b).collect();
                lbfgs.push(s, y);
                current = next;
                run_history.push(current.f);
                if current.f < best_f {
                    best_f = current.f;
                    best_fid = current.fid;
                    best_x.clone_from(&current.x);
                }
                let w = opts.stall_window;
                run_history.len() > w && {
                    let old_fid = 1.0 - run_history[run_history.len() - 1 - w];
                    let new_fid = 1.0 - current.f;
                    (new_fid - old_fid) <= opts.stall_threshold * new_fid.abs().max(f64::MIN_POSITIVE)
                }
            }
            None => true,
        };
        trace.push(best_fid);

        if stalled && best_f > problem.tolerance {
            if restarts_used >= opts.restarts {
                break;
            }
            restarts_used += 1;
            let mut x: Vec<f64> = best_x
                .iter()
                .map(|v| v + rng.random_range(-opts.restart_scale..=opts.restart_scale))
                .collect();
            problem.clamp(&mut x);
            current = objective(problem, &search, &x)?;
            lbfgs.reset();
            run_history = vec![current.f];
            if current.f < best_f {
                best_f = current.f;
                best_fid = current.fid;
                best_x.clone_from(&current.x);
            }
        }
    }

    let pulse = problem.pulse_template.with_params(&search.samples(&best_x));
    // final error re-evaluated without the gradient path so replays are bit-stable
    let final_fid = evaluate(problem, &pulse, false)?.fidelity;
    let final_error = 1.0 - final_fid;
    if let Some(last) = trace.last_mut() {
        *last = final_fid;
    }
    Ok(OptimizationReport {
        final_error,
        fidelity_trace: trace,
        iterations,
        restarts_used,
        pulse,
        seed: opts.seed,
        wall_time: started.elapsed().as_secs_f64(),
        converged: final_error <= problem.tolerance,
        tolerance: problem.tolerance,
        max_iterations: problem.max_iterations,
        options: opts.clone(),
    })
}
