//! Piecewise-constant evolution of the fermionic generators.
//!
//! Step `j` applies `exp(-i (drift + b1_j ctrl_z1 + β_j ctrl_y1) dt)`; the total
//! propagator is `steps[M−1] ⋯ steps[0]` (later steps multiply on the left).

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chain::QuadraticGenerators;
use crate::error::{Error, Result};
use crate::linalg::{identity, reunitarize, unitarity_defect, CMatrix, HermitianEigen};

/// Default time step, in units of `1/J`.
pub const DEFAULT_DT: f64 = 0.25;

/// Piecewise-constant control amplitudes (units of `J`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPulse {
    pub dt: f64,
    pub samples_b1: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_beta1: Option<Vec<f64>>,
    #[serde(default = "default_units")]
    pub units: String,
}

fn default_units() -> String {
    "J".to_string()
}

impl ControlPulse {
    pub fn new(dt: f64, samples_b1: Vec<f64>) -> Result<Self> {
        let pulse = ControlPulse {
            dt,
            samples_b1,
            samples_beta1: None,
            units: default_units(),
        };
        pulse.validate()?;
        Ok(pulse)
    }

    pub fn with_beta1(mut self, samples_beta1: Vec<f64>) -> Result<Self> {
        self.samples_beta1 = Some(samples_beta1);
        self.validate()?;
        Ok(self)
    }

    /// `round(duration / dt)` constant samples of value `b1`.
    pub fn constant(duration: f64, dt: f64, b1: f64) -> Result<Self> {
        let steps = step_count(duration, dt)?;
        ControlPulse::new(dt, vec![b1; steps])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidPulse(format!("dt must be positive, got {}", self.dt)));
        }
        if self.samples_b1.is_empty() {
            return Err(Error::InvalidPulse("pulse needs at least one step".into()));
        }
        if let Some(beta) = &self.samples_beta1 {
            if beta.len() != self.samples_b1.len() {
                return Err(Error::InvalidPulse(format!(
                    "beta1 has {} samples, b1 has {}",
                    beta.len(),
                    self.samples_b1.len()
                )));
            }
        }
        if self.samples().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPulse("non-finite sample".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.samples_b1.len()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    pub fn channels(&self) -> usize {
        1 + usize::from(self.samples_beta1.is_some())
    }

    fn samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples_b1
            .iter()
            .chain(self.samples_beta1.iter().flatten())
            .copied()
    }

    /// Flattened parameter vector: all `b1` samples, then all `beta1` samples.
    pub fn to_params(&self) -> Vec<f64> {
        self.samples().collect()
    }

    /// Pulse of the same shape carrying `params`.
    pub fn with_params(&self, params: &[f64]) -> ControlPulse {
        let m = self.steps();
        ControlPulse {
            dt: self.dt,
            samples_b1: params[..m].to_vec(),
            samples_beta1: self.samples_beta1.as_ref().map(|_| params[m..2 * m].to_vec()),
            units: self.units.clone(),
        }
    }

    /// Sub-pulse over steps `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> ControlPulse {
        ControlPulse {
            dt: self.dt,
            samples_b1: self.samples_b1[range.clone()].to_vec(),
            samples_beta1: self.samples_beta1.as_ref().map(|b| b[range].to_vec()),
            units: self.units.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pulse serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let pulse: ControlPulse = serde_json::from_str(text)?;
        pulse.validate()?;
        Ok(pulse)
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// CSV with columns `t, b1[, beta1]`; `t` is the start of each step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.samples_beta1.is_some() { "t,b1,beta1\n" } else { "t,b1\n" });
        for (j, b1) in self.samples_b1.iter().enumerate() {
            let t = j as f64 * self.dt;
            match &self.samples_beta1 {
                Some(beta) => out.push_str(&format!("{t},{b1},{}\n", beta[j])),
                None => out.push_str(&format!("{t},{b1}\n")),
            }
        }
        out
    }
}

/// Number of steps of width `dt` covering `duration`; must be integral to 1e-9.
pub fn step_count(duration: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && duration > 0.0) {
        return Err(Error::InvalidPulse(format!("duration {duration} and dt {dt} must be positive")));
    }
    let ratio = duration / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidPulse(format!("duration {duration} is not a multiple of dt {dt}")));
    }
    Ok(steps as usize)
}

/// Evolution result; `steps` holds the per-step factors when caching was requested.
#[derive(Debug, Clone)]
pub struct ModePropagator {
    pub total: CMatrix,
    pub steps: Option<Vec<CMatrix>>,
}

/// Eigendecomposition and exponential of one piecewise-constant segment.
#[derive(Debug, Clone)]
pub(crate) struct StepFactor {
    pub eigen: HermitianEigen,
    pub unitary: CMatrix,
}

fn check_channels(gens: &QuadraticGenerators, pulse: &ControlPulse) -> Result<()> {
    pulse.validate()?;
    if pulse.samples_beta1.is_some() && gens.ctrl_y1.is_none() {
        return Err(Error::ChannelMismatch(
            "pulse drives beta1 but generators have no Y1 channel".into(),
        ));
    }
    Ok(())
}

pub fn step_propagator(gens: &QuadraticGenerators, b1: f64, beta1: Option<f64>, dt: f64) -> Result<CMatrix> {
    if !(dt > 0.0) {
        return Err(Error::InvalidPulse(format!("dt must be positive, got {dt}")));
    }
    let h = gens.hamiltonian(b1, beta1)?;
    Ok(HermitianEigen::new(&h).propagator(dt))
}

pub(crate) fn step_factors(gens: &QuadraticGenerators, pulse: &ControlPulse) -> Result<Vec<StepFactor>> {
    use rayon::prelude::*;
    check_channels(gens, pulse)?;
    (0..pulse.steps())
        .into_par_iter()
        .map(|j| {
            let beta = pulse.samples_beta1.as_ref().map(|b| b[j]);
            let h = gens.hamiltonian(pulse.samples_b1[j], beta)?;
            let eigen = HermitianEigen::new(&h);
            let unitary = eigen.propagator(pulse.dt);
            Ok(StepFactor { eigen, unitary })
        })
        .collect()
}

/// Ordered product `steps[M−1] ⋯ steps[0]`, re-unitarized when the defect exceeds 1e-10.
pub(crate) fn ordered_product<'a>(d: usize, steps: impl Iterator<Item = &'a CMatrix>) -> CMatrix {
    let mut total = identity(d);
    for u in steps {
        total = u * total;
    }
    if unitarity_defect(&total) > 1e-10 {
        total = reunitarize(&total);
    }
    total
}

pub fn evolve(gens: &QuadraticGenerators, pulse: &ControlPulse, cache: bool) -> Result<ModePropagator> {
    let factors = step_factors(gens, pulse)?;
    let total = ordered_product(gens.dim(), factors.iter().map(|f| &f.unitary));
    let steps = cache.then(|| factors.into_iter().map(|f| f.unitary).collect());
    Ok(ModePropagator { total, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_generators, ChainSpec, Representation};
    use crate::linalg::{expm_hermitian, max_abs, C64, I, ZERO};

    fn gens(n: usize) -> QuadraticGenerators {
        build_generators(&ChainSpec::uniform(n, 1.0), Representation::Mode).unwrap()
    }

    #[test]
    fn zero_generator_gives_identity() {
        let mut g = gens(3);
        g.drift = CMatrix::zeros(3, 3);
        let u = step_propagator(&g, 0.0, None, 0.7).unwrap();
        assert!(max_abs(&(u - identity(3))) == 0.0);
    }

    #[test]
    fn two_site_quarter_turn() {
        let u = step_propagator(&gens(2), 0.0, None, std::f64::consts::FRAC_PI_2).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[ZERO, -I, -I, ZERO]);
        assert!(max_abs(&(u - expected)) < 1e-15);
    }

    #[test]
    fn semigroup_for_constant_generator() {
        let mut g = gens(4);
        g.drift[(0, 2)] = C64::new(0.3, -0.4);
        g.drift[(2, 0)] = C64::new(0.3, 0.4);
        let half = step_propagator(&g, 0.8, None, 0.35).unwrap();
        let whole = step_propagator(&g, 0.8, None, 0.7).unwrap();
        assert!(max_abs(&(&half * &half - whole)) < 1e-12);
    }

    #[test]
    fn constant_pulse_matches_direct_exponential() {
        let g = gens(5);
        let pulse = ControlPulse::constant(3.0, 0.25, 0.0).unwrap();
        let prop = evolve(&g, &pulse, false).unwrap();
        assert!(max_abs(&(prop.total - expm_hermitian(&g.drift, 3.0))) < 1e-12);
    }

    #[test]
    fn halves_compose() {
        let g = gens(4);
        let samples: Vec<f64> = (0..12).map(|j| (j as f64 * 0.7).sin()).collect();
        let pulse = ControlPulse::new(0.25, samples).unwrap();
        let whole = evolve(&g, &pulse, true).unwrap();
        let first = evolve(&g, &pulse.slice(0..6), false).unwrap().total;
        let second = evolve(&g, &pulse.slice(6..12), false).unwrap().total;
        assert!(max_abs(&(&second * &first - &whole.total)) < 1e-12);
        let steps = whole.steps.unwrap();
        let product = steps.iter().fold(identity(4), |acc, s| s * acc);
        assert!(max_abs(&(product - &whole.total)) < 1e-12);
        assert!(unitarity_defect(&whole.total) < 1e-12);
    }

    #[test]
    fn beta_channel_requires_y1() {
        let pulse = ControlPulse::new(0.25, vec![1.0; 4]).unwrap().with_beta1(vec![0.5; 4]).unwrap();
        assert!(matches!(evolve(&gens(3), &pulse, false), Err(Error::ChannelMismatch(_))));
        assert!(matches!(step_propagator(&gens(3), 0.0, Some(1.0), 0.1), Err(Error::ChannelMismatch(_))));
        let ext = build_generators(&ChainSpec::uniform(3, 1.0), Representation::MajoranaY1).unwrap();
        let r = evolve(&ext, &pulse, false).unwrap().total;
        assert!(r.iter().all(|z| z.im.abs() < 1e-14), "Majorana propagator is real");
    }

    #[test]
    fn pulse_shape_errors() {
        assert!(ControlPulse::new(0.0, vec![1.0]).is_err());
        assert!(ControlPulse::new(0.1, vec![]).is_err());
        assert!(ControlPulse::new(0.1, vec![1.0, 2.0]).unwrap().with_beta1(vec![1.0]).is_err());
        assert!(step_count(1.0, 0.3).is_err());
        assert_eq!(step_count(841.0, 0.25).unwrap(), 3364);
    }

    #[test]
    fn csv_columns() {
        let pulse = ControlPulse::new(0.5, vec![1.0, 2.0]).unwrap().with_beta1(vec![0.0, -1.0]).unwrap();
        assert_eq!(pulse.to_csv(), "t,b1,beta1\n0,1,0\n0.5,2,-1\n");
    }

    #[test]
    fn evolution_is_deterministic() {
        let g = gens(6);
        let pulse = ControlPulse::new(0.25, (0..40).map(|j| (j as f64).cos()).collect()).unwrap();
        let a = evolve(&g, &pulse, false).unwrap().total;
        let b = evolve(&g, &pulse, false).unwrap().total;
        assert_eq!(a, b);
    }
}
