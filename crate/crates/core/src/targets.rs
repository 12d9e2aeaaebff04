//! Goal propagators for pulse synthesis and the fast control-end gates.
//!
//! Mode-picture targets are `N×N` unitaries. The `Z₁X₂` rotation is linear in
//! Majoranas (`Z₁X₂ = c₃`), so it lives in the `(2N+1)`-dimensional picture
//! with the auxiliary mode at index `2N`.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chain::{ChainSpec, Representation};
use crate::error::{Error, Result};
use crate::lie::{h_kl_mode, z_mode};
use crate::linalg::{expm_hermitian, identity, CMatrix, C64, I, ONE, ZERO};
use crate::oracle::{self, hadamard, pauli};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetKind {
    /// `exp(−iπ h_kl / 2)`.
    PhysicalSwap { k: usize, l: usize },
    /// `exp(−3πi h_kl / 2)`, the inverse of the physical swap.
    ReverseSwap { k: usize, l: usize },
    /// `exp(−i angle h_{2n−1,2n})`, i.e. `exp(−i angle X_L)` on logical qubit `n`.
    XRotation { n: usize, angle: f64 },
    /// `exp(−i angle Z_k)` on physical site `k`.
    ZRotation { k: usize, angle: f64 },
    /// `exp(−i angle Z₁X₂)`, driven through the `Y₁` channel.
    ZxRotation { angle: f64 },
}

impl TargetKind {
    pub fn representation(&self) -> Representation {
        match self {
            TargetKind::ZxRotation { .. } => Representation::MajoranaY1,
            _ => Representation::Mode,
        }
    }

    /// Stable text key, also accepted by [`FromStr`].
    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetKind::PhysicalSwap { k, l } => write!(f, "swap:{k},{l}"),
            TargetKind::ReverseSwap { k, l } => write!(f, "rswap:{k},{l}"),
            TargetKind::XRotation { n, angle } => write!(f, "x:{n},{angle:?}"),
            TargetKind::ZRotation { k, angle } => write!(f, "z:{k},{angle:?}"),
            TargetKind::ZxRotation { angle } => write!(f, "zx:{angle:?}"),
        }
    }
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSpec(format!("cannot parse target '{s}'"));
        let (name, args) = s.split_once(':').ok_or_else(bad)?;
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        let int = |i: usize| parts.get(i).and_then(|p| p.parse::<usize>().ok()).ok_or_else(bad);
        let real = |i: usize| parts.get(i).and_then(|p| p.parse::<f64>().ok()).ok_or_else(bad);
        let want = |n: usize| if parts.len() == n { Ok(()) } else { Err(bad()) };
        match name {
            "swap" => want(2).and(Ok(TargetKind::PhysicalSwap { k: int(0)?, l: int(1)? })),
            "rswap" => want(2).and(Ok(TargetKind::ReverseSwap { k: int(0)?, l: int(1)? })),
            "x" => want(2).and(Ok(TargetKind::XRotation { n: int(0)?, angle: real(1)? })),
            "z" => want(2).and(Ok(TargetKind::ZRotation { k: int(0)?, angle: real(1)? })),
            "zx" => want(1).and(Ok(TargetKind::ZxRotation { angle: real(0)? })),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TargetGate {
    pub kind: TargetKind,
    pub representation: Representation,
    /// Goal propagator in `representation`.
    pub mode_unitary: CMatrix,
    /// Sites `(k, l)` of the `L_kl` string for swap targets.
    pub string_descriptor: Option<(usize, usize)>,
    /// Phase dropped with the identity part of the generator (`Z_k` rotations).
    pub scalar_phase: f64,
}

fn check_sites(k: usize, l: usize, n: usize) -> Result<()> {
    if k == l {
        return Err(Error::InvalidIndex(format!("swap needs two distinct sites, got ({k}, {l})")));
    }
    if !(1 <= k && k < l && l <= n) {
        return Err(Error::InvalidIndex(format!("swap sites ({k}, {l}) must satisfy 1 ≤ k < l ≤ {n}")));
    }
    Ok(())
}

fn require_xy(spec: &ChainSpec) -> Result<()> {
    if spec.gamma != 0.0 {
        return Err(Error::Representation("mode-picture targets need γ = 0".into()));
    }
    Ok(())
}

pub fn physical_swap_target(k: usize, l: usize, spec: &ChainSpec) -> Result<TargetGate> {
    target_gate(TargetKind::PhysicalSwap { k, l }, spec)
}

pub fn rotation_target(kind: TargetKind, spec: &ChainSpec) -> Result<TargetGate> {
    match kind {
        TargetKind::XRotation { .. } | TargetKind::ZRotation { .. } | TargetKind::ZxRotation { .. } => target_gate(kind, spec),
        _ => Err(Error::InvalidSpec(format!("{kind} is not a rotation"))),
    }
}

/// Goal propagator for any target kind on `spec`.
pub fn target_gate(kind: TargetKind, spec: &ChainSpec) -> Result<TargetGate> {
    spec.validate()?;
    let n = spec.n_sites;
    let mut string_descriptor = None;
    let mut scalar_phase = 0.0;
    let mode_unitary = match kind {
        TargetKind::PhysicalSwap { k, l } | TargetKind::ReverseSwap { k, l } => {
            require_xy(spec)?;
            check_sites(k, l, n)?;
            string_descriptor = Some((k, l));
            let turns = if matches!(kind, TargetKind::PhysicalSwap { .. }) { 1.0 } else { 3.0 };
            swap_mode_unitary(n, k, l, turns)?
        }
        TargetKind::XRotation { n: q, angle } => {
            require_xy(spec)?;
            if q == 0 || 2 * q > n {
                return Err(Error::InvalidIndex(format!("logical qubit {q} on {n} sites")));
            }
            expm_hermitian(&h_kl_mode(n, 2 * q - 1, 2 * q)?, angle)
        }
        TargetKind::ZRotation { k, angle } => {
            require_xy(spec)?;
            // Z_k = 1 − 2a†_k a_k: e^{−i angle} globally, e^{2i angle} on mode k
            scalar_phase = -angle;
            expm_hermitian(&z_mode(n, k)?, angle)
        }
        TargetKind::ZxRotation { angle } => zx_extended(n, angle),
    };
    Ok(TargetGate { kind, representation: kind.representation(), mode_unitary, string_descriptor, scalar_phase })
}

/// `exp(−i turns·π/2 · h_kl)` written out: identity outside modes `(k, l)`.
fn swap_mode_unitary(n: usize, k: usize, l: usize, turns: f64) -> Result<CMatrix> {
    let mut u = identity(n);
    let (a, b) = (k - 1, l - 1);
    // −i·(sign) for one quarter turn, +i·(sign) for three
    let s = if turns == 1.0 { ONE } else { -ONE };
    u[(a, a)] = ZERO;
    u[(b, b)] = ZERO;
    if (l - k) % 2 == 1 {
        u[(a, b)] = -I * s;
        u[(b, a)] = -I * s;
    } else {
        u[(a, b)] = -ONE * s;
        u[(b, a)] = ONE * s;
    }
    Ok(u)
}

/// Extended Majorana propagator of `exp(−i θ Z₁X₂) = exp(−i θ · iΓ_aux Γ₃)`.
fn zx_extended(n: usize, theta: f64) -> CMatrix {
    let d = 2 * n + 1;
    let aux = 2 * n;
    let mut g = CMatrix::zeros(d, d);
    // G = iA with A[aux][2] = 2θ, A[2][aux] = −2θ
    g[(aux, 2)] = I * (2.0 * theta);
    g[(2, aux)] = -I * (2.0 * theta);
    expm_hermitian(&g, 1.0)
}

/// Exact many-body action of a target on `n_sites` (up to a global phase).
pub fn ideal_many_body(kind: TargetKind, n_sites: usize) -> Result<CMatrix> {
    Ok(match kind {
        TargetKind::PhysicalSwap { k, l } => oracle::ideal_swap_operator(k, l, n_sites)?.matrix,
        TargetKind::ReverseSwap { k, l } => oracle::ideal_swap_operator(k, l, n_sites)?.matrix.adjoint(),
        TargetKind::XRotation { n, angle } => {
            let u = expm_hermitian(&h_kl_mode(n_sites, 2 * n - 1, 2 * n)?, angle);
            oracle::lift_mode_unitary(&u, n_sites)?.matrix
        }
        TargetKind::ZRotation { k, angle } => {
            if k == 0 || k > n_sites {
                return Err(Error::InvalidIndex(format!("Z_{k} on {n_sites} sites")));
            }
            oracle::z_rotation_dense(n_sites, k, angle)
        }
        TargetKind::ZxRotation { angle } => oracle::zx_rotation_dense(n_sites, angle),
    })
}

/// Local unitary on control sites 1–2 (4×4, site 1 most significant).
#[derive(Debug, Clone, PartialEq)]
pub struct FastGate {
    pub name: String,
    pub matrix: CMatrix,
}

impl FastGate {
    pub fn hadamard_2() -> Self {
        FastGate { name: "H2".into(), matrix: identity(2).kronecker(&hadamard()) }
    }

    /// `exp(−i angle Z_site)` for `site ∈ {1, 2}`.
    pub fn z_phase(site: usize, angle: f64) -> Self {
        let single = CMatrix::from_row_slice(2, 2, &[C64::from_polar(1.0, -angle), ZERO, ZERO, C64::from_polar(1.0, angle)]);
        let matrix = if site == 1 { single.kronecker(&identity(2)) } else { identity(2).kronecker(&single) };
        FastGate { name: format!("RZ{site}({angle:?})"), matrix }
    }

    /// Hadamard on the encoded pair `{|01⟩, |10⟩}`, identity on `|00⟩`, `|11⟩`.
    pub fn logical_hadamard() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = identity(4);
        m[(1, 1)] = ONE * s;
        m[(1, 2)] = ONE * s;
        m[(2, 1)] = ONE * s;
        m[(2, 2)] = -ONE * s;
        FastGate { name: "HL1".into(), matrix: m }
    }
}

#[derive(Debug, Clone)]
pub enum CzStep {
    Fast(FastGate),
    Pulse(TargetGate),
}

#[derive(Debug, Clone)]
pub struct CzSequence {
    pub steps: Vec<CzStep>,
    /// Global phase `φ` such that the product equals `e^{iφ}·diag(1, 1, 1, −1)`.
    pub scalar_phase: f64,
}

/// `H₂ · exp(−iθZ₁X₂) · H₂ = exp(−iθZ₁Z₂)` followed by `exp(+iπ/4 Z₁)` and
/// `exp(+iπ/4 Z₂)`; with `θ = π/4` this is a controlled-Z.
pub fn cz_sequence(spec: &ChainSpec) -> Result<CzSequence> {
    cz_sequence_with_angle(spec, FRAC_PI_4)
}

pub fn cz_sequence_with_angle(spec: &ChainSpec, theta: f64) -> Result<CzSequence> {
    let zx = target_gate(TargetKind::ZxRotation { angle: theta }, spec)?;
    Ok(CzSequence {
        steps: vec![
            CzStep::Fast(FastGate::hadamard_2()),
            CzStep::Pulse(zx),
            CzStep::Fast(FastGate::hadamard_2()),
            CzStep::Fast(FastGate::z_phase(1, -FRAC_PI_4)),
            CzStep::Fast(FastGate::z_phase(2, -FRAC_PI_4)),
        ],
        scalar_phase: FRAC_PI_4,
    })
}

/// 4×4 product of a CZ sequence on sites 1–2, the pulse replaced by its exact action.
pub fn cz_control_product(seq: &CzSequence) -> CMatrix {
    let mut total = identity(4);
    for step in &seq.steps {
        let u = match step {
            CzStep::Fast(g) => g.matrix.clone(),
            CzStep::Pulse(t) => match t.kind {
                TargetKind::ZxRotation { angle } => oracle::zx_rotation_dense(2, angle),
                _ => unreachable!("CZ sequence holds only the ZX pulse"),
            },
        };
        total = u * total;
    }
    total
}

pub fn cz_matrix() -> CMatrix {
    let mut m = identity(4);
    m[(3, 3)] = -ONE;
    m
}

/// `H X H = Z` on a single qubit.
pub fn hadamard_conjugation_defect() -> f64 {
    crate::linalg::max_abs(&(hadamard() * pauli('X') * hadamard() - pauli('Z')))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, unitarity_defect};
    use crate::oracle::{compare_up_to_phase, ideal_swap_operator, infidelity, lift_mode_unitary, DenseUnitary};

    #[test]
    fn swap_blocks() {
        let t = physical_swap_target(1, 2, &ChainSpec::uniform(2, 1.0)).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[ZERO, -I, -I, ZERO]);
        assert!(max_abs(&(t.mode_unitary - expected)) == 0.0);
        let t = physical_swap_target(1, 3, &ChainSpec::uniform(3, 1.0)).unwrap();
        assert_eq!(t.mode_unitary[(1, 1)], ONE);
        assert_eq!(t.mode_unitary[(0, 2)], -ONE);
        assert_eq!(t.mode_unitary[(2, 0)], ONE);
        assert_eq!(t.string_descriptor, Some((1, 3)));
    }

    #[test]
    fn swap_blocks_are_quarter_turns() {
        let n = 5;
        let spec = ChainSpec::uniform(n, 1.0);
        for k in 1..=n {
            for l in k + 1..=n {
                let t = physical_swap_target(k, l, &spec).unwrap();
                let generated = expm_hermitian(&h_kl_mode(n, k, l).unwrap(), std::f64::consts::FRAC_PI_2);
                assert!(max_abs(&(&t.mode_unitary - generated)) < 1e-15);
                let r = target_gate(TargetKind::ReverseSwap { k, l }, &spec).unwrap();
                assert!(max_abs(&(&r.mode_unitary * &t.mode_unitary - identity(n))) < 1e-15);
                let three = expm_hermitian(&h_kl_mode(n, k, l).unwrap(), 1.5 * std::f64::consts::PI);
                assert!(max_abs(&(&r.mode_unitary - three)) < 1e-14);
            }
        }
    }

    #[test]
    fn swap_target_lifts_to_the_explicit_operator() {
        let n = 5;
        let spec = ChainSpec::uniform(n, 1.0);
        for k in 1..=n {
            for l in k + 1..=n {
                let t = physical_swap_target(k, l, &spec).unwrap();
                let lifted = lift_mode_unitary(&t.mode_unitary, n).unwrap();
                let explicit = ideal_swap_operator(k, l, n).unwrap();
                assert!(compare_up_to_phase(&lifted, &explicit).unwrap() < 1e-12, "({k},{l})");
            }
        }
    }

    #[test]
    fn swap_rejections() {
        let spec = ChainSpec::uniform(4, 1.0);
        assert!(physical_swap_target(2, 2, &spec).is_err());
        assert!(physical_swap_target(3, 2, &spec).is_err());
        assert!(physical_swap_target(1, 5, &spec).is_err());
        let mut ising = spec.clone();
        ising.gamma = 1.0;
        ising.fields = vec![1.0; 4];
        assert!(physical_swap_target(1, 2, &ising).is_err());
    }

    #[test]
    fn rotation_examples() {
        let spec = ChainSpec::uniform(4, 1.0);
        let x0 = rotation_target(TargetKind::XRotation { n: 1, angle: 0.0 }, &spec).unwrap();
        assert!(max_abs(&(x0.mode_unitary - identity(4))) < 1e-15);
        let t = 0.37;
        let z = rotation_target(TargetKind::ZRotation { k: 1, angle: t }, &ChainSpec::uniform(2, 1.0)).unwrap();
        assert!((z.mode_unitary[(0, 0)] - C64::from_polar(1.0, 2.0 * t)).norm() < 1e-15);
        assert_eq!(z.mode_unitary[(1, 1)], ONE);
        assert_eq!(z.scalar_phase, -t);
        assert!(rotation_target(TargetKind::XRotation { n: 3, angle: 1.0 }, &spec).is_err());
        assert!(rotation_target(TargetKind::PhysicalSwap { k: 1, l: 2 }, &spec).is_err());
    }

    #[test]
    fn x_rotation_is_logical_x() {
        let spec = ChainSpec::uniform(4, 1.0);
        let x = rotation_target(TargetKind::XRotation { n: 1, angle: std::f64::consts::FRAC_PI_2 }, &spec).unwrap();
        let lifted = lift_mode_unitary(&x.mode_unitary, 4).unwrap();
        let ideal = pauli('X').kronecker(&identity(2)) * (-I);
        assert!(oracle::logical_infidelity(&lifted, &ideal).unwrap() < 1e-12);
        assert!(oracle::leakage(&lifted).unwrap() < 1e-12);
    }

    #[test]
    fn z_rotation_lift_matches_dense() {
        let spec = ChainSpec::uniform(4, 1.0);
        let z = rotation_target(TargetKind::ZRotation { k: 3, angle: 0.8 }, &spec).unwrap();
        let lifted = lift_mode_unitary(&z.mode_unitary, 4).unwrap();
        let dense = DenseUnitary::new(4, oracle::z_rotation_dense(4, 3, 0.8)).unwrap();
        assert!(compare_up_to_phase(&lifted, &dense).unwrap() < 1e-12);
    }

    #[test]
    fn zx_target_is_special_orthogonal() {
        let t = target_gate(TargetKind::ZxRotation { angle: FRAC_PI_4 }, &ChainSpec::uniform(3, 1.0)).unwrap();
        assert_eq!(t.mode_unitary.nrows(), 7);
        assert!(unitarity_defect(&t.mode_unitary) < 1e-14);
        assert!(t.mode_unitary.iter().all(|z| z.im.abs() < 1e-15));
        let r = t.mode_unitary.map(|z| z.re);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cz_sequence_composes_to_cz() {
        let seq = cz_sequence(&ChainSpec::uniform(4, 1.0)).unwrap();
        let product = cz_control_product(&seq);
        assert!(infidelity(&product, &cz_matrix()).unwrap() < 1e-12);
        let exact = cz_matrix() * C64::from_polar(1.0, seq.scalar_phase);
        assert!(max_abs(&(product - exact)) < 1e-12);
    }

    #[test]
    fn wrong_angle_is_not_cz() {
        let seq = cz_sequence_with_angle(&ChainSpec::uniform(4, 1.0), 0.0).unwrap();
        assert!(infidelity(&cz_control_product(&seq), &cz_matrix()).unwrap() > 0.1);
    }

    #[test]
    fn hadamard_identity() {
        assert!(hadamard_conjugation_defect() < 1e-15);
    }

    #[test]
    fn target_keys_round_trip() {
        let kinds = [
            TargetKind::PhysicalSwap { k: 1, l: 29 },
            TargetKind::ReverseSwap { k: 2, l: 5 },
            TargetKind::XRotation { n: 2, angle: 0.1 },
            TargetKind::ZRotation { k: 3, angle: -1.25 },
            TargetKind::ZxRotation { angle: FRAC_PI_4 },
        ];
        for kind in kinds {
            assert_eq!(kind.key().parse::<TargetKind>().unwrap(), kind);
        }
        assert!("swap:1".parse::<TargetKind>().is_err());
        assert!("foo:1,2".parse::<TargetKind>().is_err());
    }
}
