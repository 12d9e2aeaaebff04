//! Logical circuits, pulse libraries and schedule compilation.
//!
//! Logical qubit `n` (1-based, qubit 1 most significant) is encoded on sites
//! `(2n−1, 2n)` as `|0_L⟩ = |01⟩`, `|1_L⟩ = |10⟩`. Gates that need the control
//! end are bracketed by physical swaps on the way in and their exact inverses
//! on the way out, so the net operator is `W† D W`.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{build_generators, ChainSpec, Representation};
use crate::error::{Error, Result};
use crate::grape::{optimize, ControlProblem, OptimizerOptions};
use crate::linalg::{expm_hermitian, identity, unitary_log, CMatrix, C64, ONE};
use crate::oracle::{self, control_pair_operator, full_hamiltonian, full_propagator, hadamard, pauli, DenseUnitary};
use crate::propagator::{ControlPulse, DEFAULT_DT};
use crate::targets::{cz_sequence, ideal_many_body, target_gate, CzStep, FastGate, TargetKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateOp {
    #[serde(rename = "X_rot")]
    XRot,
    #[serde(rename = "Z_rot")]
    ZRot,
    #[serde(rename = "CZ")]
    Cz,
    #[serde(rename = "H_fast")]
    HFast,
    /// Logical swap; two phase-matched physical swaps.
    #[serde(rename = "SWAP")]
    Swap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalGate {
    pub op: GateOp,
    /// 1-based logical indices.
    pub targets: Vec<usize>,
    #[serde(default)]
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalCircuit {
    pub n_logical: usize,
    pub gates: Vec<LogicalGate>,
}

impl LogicalCircuit {
    pub fn new(n_logical: usize) -> Self {
        LogicalCircuit { n_logical, gates: Vec::new() }
    }

    pub fn push(mut self, op: GateOp, targets: &[usize], angle: f64) -> Self {
        self.gates.push(LogicalGate { op, targets: targets.to_vec(), angle });
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let circuit: LogicalCircuit = serde_json::from_str(text)?;
        circuit.validate()?;
        Ok(circuit)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_logical == 0 {
            return Err(Error::InvalidCircuit("n_logical must be positive".into()));
        }
        for (i, g) in self.gates.iter().enumerate() {
            let arity = match g.op {
                GateOp::Cz | GateOp::Swap => 2,
                _ => 1,
            };
            if g.targets.len() != arity {
                return Err(Error::InvalidCircuit(format!("gate {i} ({:?}) needs {arity} targets", g.op)));
            }
            if g.targets.iter().any(|&t| t == 0 || t > self.n_logical) {
                return Err(Error::InvalidCircuit(format!("gate {i} targets {:?} outside 1..={}", g.targets, self.n_logical)));
            }
            if arity == 2 && g.targets[0] == g.targets[1] {
                return Err(Error::InvalidCircuit(format!("gate {i} needs two distinct targets")));
            }
            if !g.angle.is_finite() {
                return Err(Error::InvalidCircuit(format!("gate {i} has a non-finite angle")));
            }
        }
        Ok(())
    }

    /// Ideal `2^n_logical` unitary of the circuit.
    pub fn ideal_unitary(&self) -> Result<CMatrix> {
        self.validate()?;
        let nl = self.n_logical;
        let dim = 1usize << nl;
        let mut total = identity(dim);
        for g in &self.gates {
            let u = match g.op {
                GateOp::XRot => on_logical(nl, g.targets[0], &expm_hermitian(&pauli('X'), g.angle)),
                GateOp::ZRot => on_logical(nl, g.targets[0], &expm_hermitian(&pauli('Z'), g.angle)),
                GateOp::HFast => on_logical(nl, g.targets[0], &hadamard()),
                GateOp::Cz => {
                    let (a, b) = (bit(nl, g.targets[0]), bit(nl, g.targets[1]));
                    CMatrix::from_fn(dim, dim, |r, c| match (r == c, r & a != 0 && r & b != 0) {
                        (false, _) => C64::new(0.0, 0.0),
                        (true, true) => -ONE,
                        (true, false) => ONE,
                    })
                }
                GateOp::Swap => {
                    let (a, b) = (bit(nl, g.targets[0]), bit(nl, g.targets[1]));
                    let mut m = CMatrix::zeros(dim, dim);
                    for x in 0..dim {
                        let y = if (x & a != 0) != (x & b != 0) { x ^ a ^ b } else { x };
                        m[(y, x)] = ONE;
                    }
                    m
                }
            };
            total = u * total;
        }
        Ok(total)
    }
}

fn bit(n_logical: usize, q: usize) -> usize {
    1 << (n_logical - q)
}

fn on_logical(n_logical: usize, q: usize, op: &CMatrix) -> CMatrix {
    identity(1 << (q - 1)).kronecker(op).kronecker(&identity(1 << (n_logical - q)))
}

/// Row-major `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixData(pub Vec<Vec<[f64; 2]>>);

impl MatrixData {
    pub fn from_matrix(m: &CMatrix) -> Self {
        MatrixData((0..m.nrows()).map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect())
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let rows = self.0.len();
        if self.0.iter().any(|r| r.len() != rows) {
            return Err(Error::InvalidCircuit("fast-gate matrix must be square".into()));
        }
        Ok(CMatrix::from_fn(rows, rows, |r, c| C64::new(self.0[r][c][0], self.0[r][c][1])))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Library,
    Synthesized,
    /// No pulse attached; only the exact segment action is available.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Segment {
    Pulse {
        target: TargetKind,
        duration: f64,
        pulse_ref: Option<String>,
        provenance: Provenance,
    },
    Fast {
        name: String,
        /// 4×4 on control sites 1–2.
        matrix: MatrixData,
        /// Zero means instantaneous.
        duration: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSchedule {
    pub n_sites: usize,
    pub spec_hash: String,
    pub segments: Vec<Segment>,
    /// Pulses referenced by content hash.
    pub pulses: BTreeMap<String, ControlPulse>,
}

impl GateSchedule {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn total_duration(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Pulse { duration, .. } | Segment::Fast { duration, .. } => *duration,
            })
            .sum()
    }

    pub fn pulse_targets(&self) -> Vec<TargetKind> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Pulse { target, .. } => Some(*target),
                Segment::Fast { .. } => None,
            })
            .collect()
    }
}

/// Settings for on-demand pulse synthesis; also fixes segment durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    pub dt: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial_b1: f64,
    pub initial_beta1: f64,
    /// Segment duration; `None` means `(N−1)²`.
    pub duration: Option<f64>,
    pub options: OptimizerOptions,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            dt: DEFAULT_DT,
            tolerance: 1e-4,
            max_iterations: 5000,
            initial_b1: 1.0,
            initial_beta1: 1.0,
            duration: None,
            options: OptimizerOptions::default(),
        }
    }
}

impl SynthesisConfig {
    pub fn duration_for(&self, spec: &ChainSpec) -> f64 {
        self.duration.unwrap_or(((spec.n_sites - 1) * (spec.n_sites - 1)) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub target: TargetKind,
    pub duration: f64,
    pub dt: f64,
    pub spec_hash: String,
    pub pulse: ControlPulse,
    pub error: f64,
    pub converged: bool,
}

/// Synthesized pulses keyed by target, duration, time step and chain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseLibrary {
    pub entries: BTreeMap<String, LibraryEntry>,
}

impl PulseLibrary {
    pub fn key(target: &TargetKind, duration: f64, dt: f64, spec_hash: &str) -> String {
        format!("{target}|T={duration:?}|dt={dt:?}|spec={spec_hash}")
    }

    pub fn get(&self, target: &TargetKind, duration: f64, dt: f64, spec_hash: &str) -> Option<&LibraryEntry> {
        self.entries.get(&Self::key(target, duration, dt, spec_hash))
    }

    pub fn insert(&mut self, entry: LibraryEntry) {
        let key = Self::key(&entry.target, entry.duration, entry.dt, &entry.spec_hash);
        self.entries.insert(key, entry);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("library serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Optimize one target on `spec` with the configured initial guess.
pub fn synthesize(target: TargetKind, spec: &ChainSpec, config: &SynthesisConfig) -> Result<LibraryEntry> {
    let realized = spec.realized();
    let goal = target_gate(target, &realized)?;
    let gens = build_generators(&realized, goal.representation)?;
    let duration = config.duration_for(spec);
    let mut template = ControlPulse::constant(duration, config.dt, config.initial_b1)?;
    if goal.representation == Representation::MajoranaY1 {
        let steps = template.steps();
        template = template.with_beta1(vec![config.initial_beta1; steps])?;
    }
    let mut problem = ControlProblem::new(gens, goal.mode_unitary, template)?;
    problem.tolerance = config.tolerance;
    problem.max_iterations = config.max_iterations;
    problem.options = config.options.clone();
    let report = optimize(&problem)?;
    Ok(LibraryEntry {
        target,
        duration,
        dt: config.dt,
        spec_hash: spec.content_hash(),
        pulse: report.pulse,
        error: report.final_error,
        converged: report.converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompileOptions {
    pub synthesis: SynthesisConfig,
    /// Optimize missing library entries instead of failing.
    pub allow_synthesis: bool,
    /// Leave pulse references empty (structure only, for exact simulation).
    pub structure_only: bool,
    /// Fast-gate duration written into the schedule.
    pub fast_gate_duration: f64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            synthesis: SynthesisConfig::default(),
            allow_synthesis: true,
            structure_only: false,
            fast_gate_duration: 0.0,
        }
    }
}

enum Step {
    Pulse(TargetKind),
    Fast(FastGate),
}

fn swap(k: usize, l: usize) -> Step {
    Step::Pulse(TargetKind::PhysicalSwap { k, l })
}

fn unswap(k: usize, l: usize) -> Step {
    Step::Pulse(TargetKind::ReverseSwap { k, l })
}

fn decompose(gate: &LogicalGate, spec: &ChainSpec) -> Result<Vec<Step>> {
    let t = &gate.targets;
    Ok(match gate.op {
        GateOp::XRot => vec![Step::Pulse(TargetKind::XRotation { n: t[0], angle: gate.angle })],
        GateOp::ZRot => vec![Step::Pulse(TargetKind::ZRotation { k: 2 * t[0] - 1, angle: gate.angle })],
        GateOp::Swap => {
            let (n, m) = (t[0].min(t[1]), t[0].max(t[1]));
            vec![swap(2 * n - 1, 2 * m - 1), swap(2 * n, 2 * m)]
        }
        GateOp::HFast => {
            let n = t[0];
            if n == 1 {
                vec![Step::Fast(FastGate::logical_hadamard())]
            } else {
                vec![
                    swap(1, 2 * n - 1),
                    swap(2, 2 * n),
                    Step::Fast(FastGate::logical_hadamard()),
                    unswap(2, 2 * n),
                    unswap(1, 2 * n - 1),
                ]
            }
        }
        GateOp::Cz => {
            let (n, m) = (t[0].min(t[1]), t[0].max(t[1]));
            // site 2m−1 goes to site 2 first, then 2n−1 to site 1, so they never collide
            let mut steps = vec![swap(2, 2 * m - 1)];
            if n > 1 {
                steps.push(swap(1, 2 * n - 1));
            }
            for step in cz_sequence(spec)?.steps {
                steps.push(match step {
                    CzStep::Fast(g) => Step::Fast(g),
                    CzStep::Pulse(target) => Step::Pulse(target.kind),
                });
            }
            if n > 1 {
                steps.push(unswap(1, 2 * n - 1));
            }
            steps.push(unswap(2, 2 * m - 1));
            steps
        }
    })
}

/// Compile a logical circuit into pulse segments and fast gates on `spec`.
pub fn compile(circuit: &LogicalCircuit, spec: &ChainSpec, library: &mut PulseLibrary, options: &CompileOptions) -> Result<GateSchedule> {
    circuit.validate()?;
    spec.validate()?;
    if spec.n_sites != 2 * circuit.n_logical {
        return Err(Error::InvalidCircuit(format!(
            "{} logical qubits need {} sites, chain has {}",
            circuit.n_logical,
            2 * circuit.n_logical,
            spec.n_sites
        )));
    }
    let mut steps = Vec::new();
    for g in &circuit.gates {
        steps.extend(decompose(g, spec)?);
    }
    let syn = &options.synthesis;
    let duration = syn.duration_for(spec);
    let spec_hash = spec.content_hash();

    let mut synthesized = BTreeSet::new();
    if !options.structure_only {
        let mut missing: Vec<TargetKind> = Vec::new();
        for step in &steps {
            if let Step::Pulse(kind) = step {
                if library.get(kind, duration, syn.dt, &spec_hash).is_none() && !missing.contains(kind) {
                    missing.push(*kind);
                }
            }
        }
        if let Some(first) = missing.first() {
            if !options.allow_synthesis {
                return Err(Error::MissingPulse(first.key()));
            }
            let entries: Vec<LibraryEntry> = missing.par_iter().map(|k| synthesize(*k, spec, syn)).collect::<Result<_>>()?;
            for e in entries {
                synthesized.insert(e.target.key());
                library.insert(e);
            }
        }
    }

    let mut segments = Vec::new();
    let mut pulses = BTreeMap::new();
    for step in steps {
        segments.push(match step {
            Step::Fast(g) => Segment::Fast {
                name: g.name,
                matrix: MatrixData::from_matrix(&g.matrix),
                duration: options.fast_gate_duration,
            },
            Step::Pulse(kind) if options.structure_only => {
                Segment::Pulse { target: kind, duration, pulse_ref: None, provenance: Provenance::Unresolved }
            }
            Step::Pulse(kind) => {
                let entry = library.get(&kind, duration, syn.dt, &spec_hash).expect("library filled above");
                let hash = entry.pulse.content_hash();
                pulses.insert(hash.clone(), entry.pulse.clone());
                let provenance = if synthesized.contains(&kind.key()) { Provenance::Synthesized } else { Provenance::Library };
                Segment::Pulse { target: kind, duration, pulse_ref: Some(hash), provenance }
            }
        });
    }
    Ok(GateSchedule { n_sites: spec.n_sites, spec_hash, segments, pulses })
}

/// How pulse segments are turned into unitaries during simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentModel {
    /// Substitute each target's exact many-body action.
    Exact,
    /// Evolve the referenced pulses with the full spin Hamiltonian.
    Pulses,
}

/// Dense simulation of a schedule; fast gates with positive duration run
/// together with the static chain Hamiltonian.
pub fn simulate_schedule(schedule: &GateSchedule, spec: &ChainSpec, model: SegmentModel) -> Result<DenseUnitary> {
    let n = schedule.n_sites;
    if spec.n_sites != n {
        return Err(Error::DimensionMismatch { expected: n, got: spec.n_sites });
    }
    let realized = spec.realized();
    let mut total = DenseUnitary::identity(n)?.matrix;
    for seg in &schedule.segments {
        let u = match seg {
            Segment::Pulse { target, pulse_ref, .. } => match model {
                SegmentModel::Exact => ideal_many_body(*target, n)?,
                SegmentModel::Pulses => {
                    let hash = pulse_ref.as_ref().ok_or_else(|| Error::MissingPulse(target.key()))?;
                    let pulse = schedule.pulses.get(hash).ok_or_else(|| Error::MissingPulse(hash.clone()))?;
                    full_propagator(&realized, pulse)?.matrix
                }
            },
            Segment::Fast { matrix, duration, .. } => {
                let gate = matrix.to_matrix()?;
                if *duration > 0.0 {
                    finite_fast_gate(&realized, &gate, *duration)?
                } else {
                    control_pair_operator(n, &gate)
                }
            }
        };
        total = u * total;
    }
    DenseUnitary::new(n, total)
}

/// `exp(−i (H_chain + K/t_g) t_g)` where `exp(−iK)` is the fast gate.
fn finite_fast_gate(spec: &ChainSpec, gate: &CMatrix, duration: f64) -> Result<CMatrix> {
    let k = unitary_log(gate).ok_or_else(|| Error::Numerical("fast-gate logarithm failed".into()))?;
    let n = spec.n_sites;
    let h = full_hamiltonian(spec, 0.0, 0.0)? + control_pair_operator(n, &k) / C64::new(duration, 0.0);
    Ok(expm_hermitian(&h, duration))
}

/// Infidelity of a simulated schedule against the circuit's ideal logical unitary.
pub fn logical_error(u: &DenseUnitary, circuit: &LogicalCircuit) -> Result<f64> {
    oracle::logical_infidelity(u, &circuit.ideal_unitary()?)
}
