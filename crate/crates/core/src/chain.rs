//! Spin-chain description and its free-fermion generators.
//!
//! The chain Hamiltonian is
//! `H = ½ Σ c_n [(1+γ) X X + (1−γ) Y Y]_{n,n+1} + Σ B_n Z_n + B₁(t) Z₁ (+ β₁(t) Y₁)`
//! with site 1 carrying the control field. Under the Jordan–Wigner map
//! `a_n = σ⁺_n ∏_{m<n} Z_m` (`σ⁺ = |0⟩⟨1|`, so `Z = 1 − 2a†a`) it is quadratic.
//!
//! Two representations are produced, both stored as Hermitian generators `G`
//! whose one-step propagator is `exp(-i G dt)`:
//!
//! * **mode** (γ = 0): `G = h` with `H = Σ h_nm a†_n a_m + const`; the
//!   propagator `u` satisfies `U† a_n U = Σ_m u_nm a_m`.
//! * **majorana**: with `c_{2n−1} = a_n + a†_n`, `c_{2n} = −i(a_n − a†_n)` and
//!   `H = (i/4) Σ A_jk c_j c_k` (A real antisymmetric), `G = iA` and the
//!   propagator `R = exp(A t)` satisfies `U† c_j U = Σ_k R_jk c_k`.
//!   The linear `Y₁ = c_2` channel is carried by one auxiliary Majorana
//!   (last index), giving dimension `2N+1`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, HermitianEigen, C64, I};

/// Off-site disorder: `c_n ← c_n (1 + δ_n)`, `δ_n ~ U[−s, s]`, seeded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disorder {
    pub strength: f64,
    pub seed: u64,
}

impl Disorder {
    pub fn sample(&self, count: usize) -> Vec<f64> {
        if self.strength == 0.0 {
            return vec![0.0; count];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..count)
            .map(|_| rng.random_range(-self.strength..=self.strength))
            .collect()
    }
}

/// Chain length, couplings and static fields, all in units of `J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    #[serde(rename = "n")]
    pub n_sites: usize,
    pub couplings: Vec<f64>,
    pub fields: Vec<f64>,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<Disorder>,
}

impl ChainSpec {
    /// Uniform XX chain, `c_n = j`, zero static fields.
    pub fn uniform(n_sites: usize, j: f64) -> Self {
        ChainSpec {
            n_sites,
            couplings: vec![j; n_sites.saturating_sub(1)],
            fields: vec![0.0; n_sites],
            gamma: 0.0,
            disorder: None,
        }
    }

    pub fn from_couplings(couplings: Vec<f64>) -> Self {
        let n_sites = couplings.len() + 1;
        ChainSpec {
            n_sites,
            couplings,
            fields: vec![0.0; n_sites],
            gamma: 0.0,
            disorder: None,
        }
    }

    pub fn with_disorder(mut self, strength: f64, seed: u64) -> Self {
        self.disorder = Some(Disorder { strength, seed });
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ChainSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("chain spec serializes")
    }

    /// Couplings after applying the disorder realization, if any.
    pub fn effective_couplings(&self) -> Vec<f64> {
        match &self.disorder {
            None => self.couplings.clone(),
            Some(dis) => self
                .couplings
                .iter()
                .zip(dis.sample(self.couplings.len()))
                .map(|(c, delta)| c * (1.0 + delta))
                .collect(),
        }
    }

    /// The same chain with disorder folded into the couplings.
    pub fn realized(&self) -> ChainSpec {
        ChainSpec {
            couplings: self.effective_couplings(),
            disorder: None,
            ..self.clone()
        }
    }

    /// Site relabeling `n → N+1−n`.
    pub fn flipped(&self) -> ChainSpec {
        let mut couplings = self.effective_couplings();
        couplings.reverse();
        let mut fields = self.fields.clone();
        fields.reverse();
        ChainSpec {
            n_sites: self.n_sites,
            couplings,
            fields,
            gamma: self.gamma,
            disorder: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::InvalidSpec("chain needs at least one site".into()));
        }
        if self.couplings.len() + 1 != self.n_sites {
            return Err(Error::InvalidSpec(format!(
                "{} sites need {} couplings, got {}",
                self.n_sites,
                self.n_sites - 1,
                self.couplings.len()
            )));
        }
        if self.fields.len() != self.n_sites {
            return Err(Error::InvalidSpec(format!(
                "{} sites need {} fields, got {}",
                self.n_sites,
                self.n_sites,
                self.fields.len()
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidSpec(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if let Some(dis) = &self.disorder {
            if !(0.0..=0.5).contains(&dis.strength) {
                return Err(Error::InvalidSpec(format!(
                    "disorder strength {} outside [0, 0.5]",
                    dis.strength
                )));
            }
        }
        let values = self.effective_couplings();
        if let Some(n) = values.iter().position(|c| *c == 0.0 || !c.is_finite()) {
            return Err(Error::InvalidSpec(format!("coupling c_{} is zero", n + 1)));
        }
        if self.fields.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidSpec("non-finite field".into()));
        }
        Ok(())
    }

    /// Conditions under which controllability claims for this spec are not backed.
    pub fn controllability_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.gamma == 1.0 && self.fields.iter().any(|b| *b == 0.0) {
            out.push("transverse Ising chain (gamma = 1) with a zero static field".to_string());
        }
        out
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// Which fermionic picture to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// `N × N` single-particle picture, γ = 0 only.
    Mode,
    /// `2N × 2N` Majorana picture.
    Majorana,
    /// `(2N+1) × (2N+1)` Majorana picture with the linear `Y₁` channel.
    MajoranaY1,
}

impl Representation {
    pub fn dimension(self, n_sites: usize) -> usize {
        match self {
            Representation::Mode => n_sites,
            Representation::Majorana => 2 * n_sites,
            Representation::MajoranaY1 => 2 * n_sites + 1,
        }
    }

    pub fn is_majorana(self) -> bool {
        !matches!(self, Representation::Mode)
    }
}

/// Drift and control generators in one representation.
#[derive(Debug, Clone)]
pub struct QuadraticGenerators {
    pub representation: Representation,
    pub n_sites: usize,
    pub drift: CMatrix,
    pub ctrl_z1: CMatrix,
    pub ctrl_y1: Option<CMatrix>,
    /// Multiple of the identity dropped from `Σ B_n Z_n`; a global phase only.
    /// The control channel likewise drops `b1 · 1` per unit amplitude in the
    /// mode picture (see [`QuadraticGenerators::control_identity`]).
    pub identity_offset: f64,
}

impl QuadraticGenerators {
    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    /// Identity coefficient per unit `b1` dropped from the `Z₁` channel.
    pub fn control_identity(&self) -> f64 {
        match self.representation {
            Representation::Mode => 1.0,
            _ => 0.0,
        }
    }

    /// `drift + b1·ctrl_z1 + beta1·ctrl_y1`.
    pub fn hamiltonian(&self, b1: f64, beta1: Option<f64>) -> Result<CMatrix> {
        let mut h = &self.drift + &self.ctrl_z1 * C64::new(b1, 0.0);
        if let Some(beta) = beta1 {
            let y1 = self.ctrl_y1.as_ref().ok_or_else(|| {
                Error::ChannelMismatch("beta1 given but generators have no Y1 channel".into())
            })?;
            h += y1 * C64::new(beta, 0.0);
        }
        Ok(h)
    }

    /// Controls in channel order (`Z₁`, then `Y₁` when present).
    pub fn controls(&self) -> Vec<&CMatrix> {
        let mut out = vec![&self.ctrl_z1];
        if let Some(y1) = &self.ctrl_y1 {
            out.push(y1);
        }
        out
    }
}

/// Real antisymmetric Majorana matrix `A = −i G` of a Majorana-picture generator.
pub fn majorana_matrix(generator: &CMatrix) -> DMatrix<f64> {
    generator.map(|z| (-I * z).re)
}

fn majorana_term(a: &mut DMatrix<f64>, p: usize, q: usize, alpha: f64) {
    // i·alpha·c_p c_q  ↔  A_pq += 2 alpha, A_qp −= 2 alpha
    a[(p, q)] += 2.0 * alpha;
    a[(q, p)] -= 2.0 * alpha;
}

fn from_majorana(a: &DMatrix<f64>) -> CMatrix {
    a.map(|x| I * x)
}

pub fn build_generators(spec: &ChainSpec, representation: Representation) -> Result<QuadraticGenerators> {
    spec.validate()?;
    let n = spec.n_sites;
    let couplings = spec.effective_couplings();
    match representation {
        Representation::Mode => {
            if spec.gamma != 0.0 {
                return Err(Error::Representation(format!(
                    "mode picture requires gamma = 0, got {}",
                    spec.gamma
                )));
            }
            let mut drift = CMatrix::zeros(n, n);
            for (k, &c) in couplings.iter().enumerate() {
                drift[(k, k + 1)] = C64::new(c, 0.0);
                drift[(k + 1, k)] = C64::new(c, 0.0);
            }
            for (k, &b) in spec.fields.iter().enumerate() {
                drift[(k, k)] = C64::new(-2.0 * b, 0.0);
            }
            let mut ctrl_z1 = CMatrix::zeros(n, n);
            ctrl_z1[(0, 0)] = C64::new(-2.0, 0.0);
            Ok(QuadraticGenerators {
                representation,
                n_sites: n,
                drift,
                ctrl_z1,
                ctrl_y1: None,
                identity_offset: spec.fields.iter().sum(),
            })
        }
        Representation::Majorana | Representation::MajoranaY1 => {
            let d = representation.dimension(n);
            let mut a = DMatrix::<f64>::zeros(d, d);
            let g = spec.gamma;
            for (k, &c) in couplings.iter().enumerate() {
                // X_k X_{k+1} = −i c_{2k+1} c_{2k+2}, Y_k Y_{k+1} = i c_{2k} c_{2k+3} (0-based)
                majorana_term(&mut a, 2 * k + 1, 2 * k + 2, -0.5 * c * (1.0 + g));
                majorana_term(&mut a, 2 * k, 2 * k + 3, 0.5 * c * (1.0 - g));
            }
            for (k, &b) in spec.fields.iter().enumerate() {
                // Z_k = −i c_{2k} c_{2k+1}
                majorana_term(&mut a, 2 * k, 2 * k + 1, -b);
            }
            let mut z1 = DMatrix::<f64>::zeros(d, d);
            majorana_term(&mut z1, 0, 1, -1.0);
            let ctrl_y1 = (representation == Representation::MajoranaY1).then(|| {
                // Y₁ = c_2 embedded as i Γ_aux Γ_2
                let mut y1 = DMatrix::<f64>::zeros(d, d);
                majorana_term(&mut y1, 2 * n, 1, 1.0);
                from_majorana(&y1)
            });
            Ok(QuadraticGenerators {
                representation,
                n_sites: n,
                drift: from_majorana(&a),
                ctrl_z1: from_majorana(&z1),
                ctrl_y1,
                identity_offset: 0.0,
            })
        }
    }
}

/// Eigenvalues of `drift + b1·ctrl_z1`, ascending.
pub fn mode_spectrum(gens: &QuadraticGenerators, b1: f64) -> Vec<f64> {
    let h = &gens.drift + &gens.ctrl_z1 * C64::new(b1, 0.0);
    HermitianEigen::new(&h).values
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, ZERO};

    fn real(m: &CMatrix) -> DMatrix<f64> {
        m.map(|z| z.re)
    }

    #[test]
    fn two_site_mode_generators() {
        let gens = build_generators(&ChainSpec::uniform(2, 1.0), Representation::Mode).unwrap();
        assert_eq!(real(&gens.drift), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(real(&gens.ctrl_z1), DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 0.0]));
        assert_eq!(gens.identity_offset, 0.0);
    }

    #[test]
    fn three_site_drift_is_tridiagonal() {
        let gens = build_generators(&ChainSpec::uniform(3, 1.0), Representation::Mode).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(real(&gens.drift), expected);
    }

    #[test]
    fn five_site_dispersion() {
        let gens = build_generators(&ChainSpec::uniform(5, 1.0), Representation::Mode).unwrap();
        let spectrum = mode_spectrum(&gens, 0.0);
        let mut closed: Vec<f64> = (1..=5)
            .map(|m| 2.0 * (m as f64 * std::f64::consts::PI / 6.0).cos())
            .collect();
        closed.sort_by(f64::total_cmp);
        for (a, b) in spectrum.iter().zip(&closed) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn two_site_spectrum() {
        let gens = build_generators(&ChainSpec::uniform(2, 1.0), Representation::Mode).unwrap();
        let s = mode_spectrum(&gens, 0.0);
        assert!((s[0] + 1.0).abs() < 1e-14 && (s[1] - 1.0).abs() < 1e-14);
        // strong field: exact eigenvalues −b ± sqrt(b² + 1)
        let s = mode_spectrum(&gens, 100.0);
        assert!((s[0] + 200.0).abs() < 1e-2, "{s:?}");
        assert!(s[1].abs() < 1e-2, "{s:?}");
        let exact = -100.0 - (100.0f64 * 100.0 + 1.0).sqrt();
        assert!((s[0] - exact).abs() < 1e-10);
    }

    #[test]
    fn identity_offset_sums_fields() {
        let mut spec = ChainSpec::uniform(3, 1.0);
        spec.fields = vec![0.5, -0.25, 1.0];
        let gens = build_generators(&spec, Representation::Mode).unwrap();
        assert_eq!(gens.identity_offset, 1.25);
    }

    #[test]
    fn mode_rejects_anisotropy_and_zero_coupling() {
        let mut spec = ChainSpec::uniform(3, 1.0);
        spec.gamma = 0.5;
        assert!(matches!(build_generators(&spec, Representation::Mode), Err(Error::Representation(_))));
        assert!(build_generators(&spec, Representation::Majorana).is_ok());
        let spec = ChainSpec::from_couplings(vec![1.0, 0.0]);
        assert!(matches!(build_generators(&spec, Representation::Mode), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn length_invariants() {
        let mut spec = ChainSpec::uniform(3, 1.0);
        spec.fields.pop();
        assert!(spec.validate().is_err());
        let mut spec = ChainSpec::uniform(3, 1.0);
        spec.couplings.push(1.0);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn majorana_generators_are_antisymmetric() {
        let mut spec = ChainSpec::from_couplings(vec![1.0, 0.7, 1.3]);
        spec.gamma = 0.4;
        spec.fields = vec![0.1, 0.2, -0.3, 0.5];
        let gens = build_generators(&spec, Representation::MajoranaY1).unwrap();
        for g in [&gens.drift, &gens.ctrl_z1, gens.ctrl_y1.as_ref().unwrap()] {
            assert!(g.iter().all(|z| z.re == 0.0));
            let a = majorana_matrix(g);
            assert_eq!(a.transpose(), -&a);
        }
        assert_eq!(gens.dim(), 9);
    }

    #[test]
    fn flip_conjugates_mode_drift() {
        let mut spec = ChainSpec::from_couplings(vec![1.0, 2.0, 0.5, 1.5]);
        spec.fields = vec![0.3, 0.0, -0.2, 0.1, 0.0];
        let a = build_generators(&spec, Representation::Mode).unwrap();
        let b = build_generators(&spec.flipped(), Representation::Mode).unwrap();
        let n = spec.n_sites;
        let flip = CMatrix::from_fn(n, n, |r, c| if r + c == n - 1 { C64::new(1.0, 0.0) } else { ZERO });
        assert!(max_abs(&(&flip * &a.drift * &flip - &b.drift)) == 0.0);
    }

    #[test]
    fn disorder_is_seeded() {
        let spec = ChainSpec::uniform(10, 1.0).with_disorder(0.1, 7);
        let a = spec.effective_couplings();
        let b = spec.clone().effective_couplings();
        assert_eq!(a, b);
        assert!(a.iter().all(|c| (c - 1.0).abs() <= 0.1));
        assert_ne!(a, ChainSpec::uniform(10, 1.0).with_disorder(0.1, 8).effective_couplings());
        let clean = ChainSpec::uniform(10, 1.0).with_disorder(0.0, 7);
        assert_eq!(clean.effective_couplings(), vec![1.0; 9]);
    }

    #[test]
    fn json_shape() {
        let spec = ChainSpec::from_json(r#"{"n": 3, "couplings": [1, 1], "fields": [0, 0, 0], "gamma": 0.0}"#).unwrap();
        assert_eq!(spec, ChainSpec::uniform(3, 1.0));
        let dis = ChainSpec::from_json(
            r#"{"n": 3, "couplings": [1, 1], "fields": [0, 0, 0], "gamma": 0.0, "disorder": {"strength": 0.1, "seed": 3}}"#,
        )
        .unwrap();
        assert_eq!(dis.disorder, Some(Disorder { strength: 0.1, seed: 3 }));
    }
}
