//! Numerical closure of the dynamical Lie algebra in the quadratic representation.
//!
//! Elements are anti-Hermitian `d×d` matrices with the real inner product
//! `⟨A, B⟩ = Re tr(A† B)`. The closure is breadth-first: every newly accepted
//! element is commuted with each generator, which is enough because
//! left-nested brackets of generators span the generated algebra.

use serde::Serialize;

use crate::chain::{build_generators, ChainSpec, QuadraticGenerators, Representation};
use crate::error::{Error, Result};
use crate::linalg::{commutator, frobenius, inner, max_abs, CMatrix, C64, I, ONE};

#[derive(Debug, Clone)]
pub struct AlgebraBasis {
    pub elements: Vec<CMatrix>,
    pub closure_tolerance: f64,
}

impl AlgebraBasis {
    pub fn dimension(&self) -> usize {
        self.elements.len()
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, ea) in self.elements.iter().enumerate() {
            for (b, eb) in self.elements.iter().enumerate() {
                let expected = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((real_inner(ea, eb) - expected).abs());
            }
        }
        worst
    }

    /// Largest residual of a pairwise commutator outside the span.
    pub fn closure_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, ea) in self.elements.iter().enumerate() {
            for eb in &self.elements[a + 1..] {
                let c = commutator(ea, eb);
                worst = worst.max(frobenius(&self.project_out(c)));
            }
        }
        worst
    }

    /// Component of `m` orthogonal to the span (two Gram–Schmidt passes).
    fn project_out(&self, mut m: CMatrix) -> CMatrix {
        for _ in 0..2 {
            for e in &self.elements {
                let coeff = real_inner(e, &m);
                m -= e * C64::new(coeff, 0.0);
            }
        }
        m
    }
}

fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    inner(a, b).re
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureConfig {
    pub tol: f64,
    /// Element cap; `None` means `4d²`.
    pub max_elements: Option<usize>,
}

impl Default for ClosureConfig {
    fn default() -> Self {
        ClosureConfig { tol: 1e-10, max_elements: None }
    }
}

/// Closure of `{i·drift, i·ctrl_z1[, i·ctrl_y1]}`.
pub fn generate_algebra(gens: &QuadraticGenerators, tol: f64) -> Result<AlgebraBasis> {
    let generators: Vec<CMatrix> = gens.controls().into_iter().map(|g| g * I).collect();
    let mut all = vec![&gens.drift * I];
    all.extend(generators);
    close(&all, ClosureConfig { tol, max_elements: None })
}

/// Closure of an arbitrary list of anti-Hermitian generators.
pub fn close(generators: &[CMatrix], config: ClosureConfig) -> Result<AlgebraBasis> {
    let tol = config.tol;
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::InvalidSpec(format!("closure tolerance {tol} outside (0, 1e-6]")));
    }
    let d = generators.first().map_or(0, |g| g.nrows());
    if generators.iter().any(|g| g.shape() != (d, d)) {
        return Err(Error::Representation("generators have different shapes".into()));
    }
    let cap = config.max_elements.unwrap_or(4 * d * d);
    let mut basis = AlgebraBasis { elements: Vec::new(), closure_tolerance: tol };
    let units: Vec<CMatrix> = generators
        .iter()
        .filter_map(|g| {
            let norm = frobenius(g);
            (norm > 0.0).then(|| g / C64::new(norm, 0.0))
        })
        .collect();
    let mut frontier = Vec::new();
    for g in &units {
        if let Some(idx) = accept(&mut basis, g.clone(), tol) {
            frontier.push(idx);
        }
    }
    let mut cursor = 0;
    while cursor < frontier.len() {
        let current = basis.elements[frontier[cursor]].clone();
        cursor += 1;
        for g in &units {
            if let Some(idx) = accept(&mut basis, commutator(g, &current), tol) {
                frontier.push(idx);
                if basis.elements.len() > cap {
                    return Err(Error::ClosureCap { cap });
                }
            }
        }
    }
    Ok(basis)
}

fn accept(basis: &mut AlgebraBasis, candidate: CMatrix, tol: f64) -> Option<usize> {
    let scale = frobenius(&candidate);
    if scale < tol {
        return None;
    }
    let rest = basis.project_out(candidate);
    let norm = frobenius(&rest);
    if norm / scale < tol {
        return None;
    }
    basis.elements.push(rest / C64::new(norm, 0.0));
    Some(basis.elements.len() - 1)
}

/// Norm of the part of `element / ‖element‖` outside the span.
pub fn membership(element: &CMatrix, basis: &AlgebraBasis) -> Result<f64> {
    if let Some(first) = basis.elements.first() {
        if first.shape() != element.shape() {
            return Err(Error::DimensionMismatch { expected: first.nrows(), got: element.nrows() });
        }
    }
    let norm = frobenius(element);
    if norm == 0.0 {
        return Err(Error::ZeroElement);
    }
    Ok(frobenius(&basis.project_out(element / C64::new(norm, 0.0))))
}

fn unit(n: usize, r: usize, c: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(r, c)] = ONE;
    m
}

/// Mode matrix of `h_kl` (1-based, `k < l`): `a†_k a_l + a†_l a_k` when `l−k` is
/// odd and `−i(a†_k a_l − a†_l a_k)` when even.
pub fn h_kl_mode(n_sites: usize, k: usize, l: usize) -> Result<CMatrix> {
    if !(1 <= k && k < l && l <= n_sites) {
        return Err(Error::InvalidIndex(format!("h_kl with (k, l) = ({k}, {l}) on {n_sites} sites")));
    }
    let (a, b) = (k - 1, l - 1);
    Ok(if (l - k) % 2 == 1 {
        unit(n_sites, a, b) + unit(n_sites, b, a)
    } else {
        (unit(n_sites, a, b) - unit(n_sites, b, a)) * (-I)
    })
}

/// Mode matrix of `Z_k = 1 − 2a†_k a_k` with the identity part dropped.
pub fn z_mode(n_sites: usize, k: usize) -> Result<CMatrix> {
    if !(1 <= k && k <= n_sites) {
        return Err(Error::InvalidIndex(format!("Z_{k} on {n_sites} sites")));
    }
    Ok(unit(n_sites, k - 1, k - 1) * C64::new(-2.0, 0.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityResidual {
    pub name: String,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub entries: Vec<IdentityResidual>,
    pub max_residual: f64,
}

/// Raising construction of `ih12 … ih24` from `iH` and `ih1`, compared against
/// the explicit mode matrices. Requires `γ = 0`, `N ≥ 4` and no static fields
/// beyond site 1 (a site-1 field commutes with `h1` and drops out).
pub fn verify_commutator_identities(spec: &ChainSpec) -> Result<IdentityReport> {
    spec.validate()?;
    if spec.gamma != 0.0 {
        return Err(Error::Representation("identities are stated for γ = 0".into()));
    }
    if spec.n_sites < 4 {
        return Err(Error::InvalidSpec("h14 needs at least four sites".into()));
    }
    if spec.fields.iter().skip(1).any(|b| *b != 0.0) {
        return Err(Error::InvalidSpec("identities assume zero static fields on sites 2..N".into()));
    }
    let realized = spec.realized();
    let mut hopping = realized.clone();
    hopping.fields = vec![0.0; spec.n_sites];
    let gens = build_generators(&hopping, Representation::Mode)?;
    identity_residuals(&gens.drift, &realized.couplings)
}

/// Same as [`verify_commutator_identities`] with the drift and the couplings
/// used for normalization passed separately.
pub fn identity_residuals(hopping: &CMatrix, couplings: &[f64]) -> Result<IdentityReport> {
    let n = hopping.nrows();
    if n < 4 || couplings.len() < 3 {
        return Err(Error::InvalidSpec("h14 needs at least four sites".into()));
    }
    let (c1, c2, c3) = (couplings[0], couplings[1], couplings[2]);
    let ih = hopping * I;
    let ih1 = z_mode(n, 1)? * I;
    let scale = |m: CMatrix, s: f64| m * C64::new(s, 0.0);

    let ih12 = scale(commutator(&ih1, &commutator(&ih, &ih1)), 1.0 / (4.0 * c1));
    let ih13 = scale(commutator(&ih, &ih12), 1.0 / c2);
    let ih23 = commutator(&ih12, &ih13);
    let h12 = &ih12 * (-I);
    let h23 = &ih23 * (-I);
    let ih14 = scale(commutator(&ih13, &ih) + h23 * (I * c1) - h12 * (I * c2), 1.0 / c3);
    let ih24 = commutator(&ih14, &ih12);

    let constructed = [("h12", ih12, 1, 2), ("h13", ih13, 1, 3), ("h23", ih23, 2, 3), ("h14", ih14, 1, 4), ("h24", ih24, 2, 4)];
    let mut entries = Vec::new();
    for (name, lhs, k, l) in constructed {
        let expected = h_kl_mode(n, k, l)? * I;
        entries.push(IdentityResidual { name: name.to_string(), residual: max_abs(&(lhs - expected)) });
    }
    let max_residual = entries.iter().map(|e| e.residual).fold(0.0, f64::max);
    Ok(IdentityReport { entries, max_residual })
}

/// Membership residuals of every `ih_kl` and `iZ_k` against `basis`, keyed `h_k_l` / `z_k`.
pub fn standard_memberships(n_sites: usize, basis: &AlgebraBasis) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for k in 1..=n_sites {
        for l in k + 1..=n_sites {
            out.push((format!("h_{k}_{l}"), membership(&(h_kl_mode(n_sites, k, l)? * I), basis)?));
        }
    }
    for k in 1..=n_sites {
        out.push((format!("z_{k}"), membership(&(z_mode(n_sites, k)? * I), basis)?));
    }
    Ok(out)
}
