//! Exact dense `2^N` simulation used as ground truth for the fermionic pictures.
//!
//! Basis convention: site 1 is the most significant qubit and `|0⟩` is the
//! `Z = +1` state, so an occupied Jordan–Wigner mode is a `1` bit.
//! A full unitary at `N = 12` is 4096² complex entries (~256 MB); callers
//! should not hold many of them at once.

use crate::chain::ChainSpec;
use crate::error::{Error, Result};
use crate::linalg::{frobenius, identity, inner, unitarity_defect, unitary_log, CMatrix, HermitianEigen, C64, I, ONE, ZERO};
use crate::propagator::ControlPulse;

pub const MAX_SITES: usize = 12;

/// A many-body unitary on `N ≤ 12` sites.
#[derive(Debug, Clone)]
pub struct DenseUnitary {
    pub n_sites: usize,
    pub matrix: CMatrix,
}

impl DenseUnitary {
    pub fn new(n_sites: usize, matrix: CMatrix) -> Result<Self> {
        check_size(n_sites)?;
        let dim = 1usize << n_sites;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: matrix.nrows() });
        }
        let defect = unitarity_defect(&matrix);
        if defect > 1e-10 {
            return Err(Error::NotUnitary(defect));
        }
        Ok(DenseUnitary { n_sites, matrix })
    }

    pub fn identity(n_sites: usize) -> Result<Self> {
        check_size(n_sites)?;
        Ok(DenseUnitary { n_sites, matrix: identity(1 << n_sites) })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `self` applied after `earlier`.
    pub fn after(&self, earlier: &DenseUnitary) -> DenseUnitary {
        DenseUnitary { n_sites: self.n_sites, matrix: &self.matrix * &earlier.matrix }
    }

    pub fn adjoint(&self) -> DenseUnitary {
        DenseUnitary { n_sites: self.n_sites, matrix: self.matrix.adjoint() }
    }
}

fn check_size(n_sites: usize) -> Result<()> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::TooLarge(n_sites));
    }
    Ok(())
}

fn bit_of(n: usize, site: usize) -> usize {
    1 << (n - 1 - site)
}

fn occupied(x: usize, n: usize, site: usize) -> bool {
    x & bit_of(n, site) != 0
}

/// `(−1)^(occupied sites strictly between lo and hi)` for 0-based sites.
fn string_sign(x: usize, n: usize, a: usize, b: usize) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let count = (lo + 1..hi).filter(|&j| occupied(x, n, j)).count();
    if count % 2 == 0 { 1.0 } else { -1.0 }
}

/// Conserved-quantity labels used to block-diagonalize dense Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    Number,
    Parity,
    None,
}

struct Sectors {
    blocks: Vec<Vec<usize>>,
}

impl Sectors {
    fn new(n: usize, symmetry: Symmetry) -> Self {
        let dim = 1usize << n;
        let label = |x: usize| match symmetry {
            Symmetry::Number => x.count_ones() as usize,
            Symmetry::Parity => (x.count_ones() % 2) as usize,
            Symmetry::None => 0,
        };
        let count = match symmetry {
            Symmetry::Number => n + 1,
            Symmetry::Parity => 2,
            Symmetry::None => 1,
        };
        let mut blocks = vec![Vec::new(); count];
        for x in 0..dim {
            blocks[label(x)].push(x);
        }
        blocks.retain(|b| !b.is_empty());
        Sectors { blocks }
    }

    fn assemble(&self, dim: usize, parts: &[CMatrix]) -> CMatrix {
        let mut out = CMatrix::zeros(dim, dim);
        for (block, part) in self.blocks.iter().zip(parts) {
            for (c, &xc) in block.iter().enumerate() {
                for (r, &xr) in block.iter().enumerate() {
                    out[(xr, xc)] = part[(r, c)];
                }
            }
        }
        out
    }
}

/// Dense spin Hamiltonian split into a static part and the two site-1 channels.
struct SpinHamiltonian {
    n: usize,
    /// `(row, col, value)` entries of the static Hamiltonian.
    entries: Vec<(usize, usize, C64)>,
}

impl SpinHamiltonian {
    fn new(spec: &ChainSpec) -> Self {
        let n = spec.n_sites;
        let couplings = spec.effective_couplings();
        let mut entries = Vec::new();
        for x in 0..1usize << n {
            let diag: f64 = spec
                .fields
                .iter()
                .enumerate()
                .map(|(k, b)| if occupied(x, n, k) { -b } else { *b })
                .sum();
            if diag != 0.0 {
                entries.push((x, x, C64::new(diag, 0.0)));
            }
            for (k, &c) in couplings.iter().enumerate() {
                // ½c[(1+γ)XX + (1−γ)YY]: flips both bits; YY = −1 on equal bits, +1 otherwise
                let differ = occupied(x, n, k) != occupied(x, n, k + 1);
                let amp = if differ { c } else { c * spec.gamma };
                if amp != 0.0 {
                    let y = x ^ bit_of(n, k) ^ bit_of(n, k + 1);
                    entries.push((y, x, C64::new(amp, 0.0)));
                }
            }
        }
        SpinHamiltonian { n, entries }
    }

    fn block(&self, sectors: &Sectors, index: usize, pos: &[usize], b1: f64, beta1: f64) -> CMatrix {
        let block = &sectors.blocks[index];
        let size = block.len();
        let mut h = CMatrix::zeros(size, size);
        let n = self.n;
        let owner = |x: usize| sectors.blocks[index].binary_search(&x).is_ok();
        for &(r, c, v) in &self.entries {
            if owner(c) {
                h[(pos[r], pos[c])] += v;
            }
        }
        for (i, &x) in block.iter().enumerate() {
            let z = if occupied(x, n, 0) { -1.0 } else { 1.0 };
            h[(i, i)] += C64::new(b1 * z, 0.0);
            if beta1 != 0.0 {
                // ⟨x⊕1|Y|x⟩ = i for a 0 bit, −i for a 1 bit
                let y = x ^ bit_of(n, 0);
                let amp = if occupied(x, n, 0) { -I } else { I };
                h[(pos[y], i)] += amp * beta1;
            }
        }
        h
    }
}

fn positions(sectors: &Sectors, dim: usize) -> Vec<usize> {
    let mut pos = vec![0; dim];
    for block in &sectors.blocks {
        for (i, &x) in block.iter().enumerate() {
            pos[x] = i;
        }
    }
    pos
}

/// Exact piecewise-constant evolution of the full spin Hamiltonian; `b1` adds
/// to the static field on site 1 and `beta1` drives `Y₁`.
pub fn full_propagator(spec: &ChainSpec, pulse: &ControlPulse) -> Result<DenseUnitary> {
    spec.validate()?;
    pulse.validate()?;
    let n = spec.n_sites;
    check_size(n)?;
    let dim = 1usize << n;
    let beta_active = pulse.samples_beta1.as_ref().is_some_and(|b| b.iter().any(|x| *x != 0.0));
    let symmetry = if beta_active {
        Symmetry::None
    } else if spec.gamma != 0.0 {
        Symmetry::Parity
    } else {
        Symmetry::Number
    };
    let sectors = Sectors::new(n, symmetry);
    let pos = positions(&sectors, dim);
    let ham = SpinHamiltonian::new(spec);
    let mut parts: Vec<CMatrix> = sectors.blocks.iter().map(|b| identity(b.len())).collect();
    let mut cached: Option<(f64, f64, Vec<CMatrix>)> = None;
    for j in 0..pulse.steps() {
        let b1 = pulse.samples_b1[j];
        let beta = pulse.samples_beta1.as_ref().map_or(0.0, |b| b[j]);
        let reuse = matches!(&cached, Some((cb, cbeta, _)) if *cb == b1 && *cbeta == beta);
        if !reuse {
            let steps = (0..sectors.blocks.len())
                .map(|i| HermitianEigen::new(&ham.block(&sectors, i, &pos, b1, beta)).propagator(pulse.dt))
                .collect();
            cached = Some((b1, beta, steps));
        }
        let steps = &cached.as_ref().expect("step cache filled").2;
        for (part, step) in parts.iter_mut().zip(steps) {
            *part = step * &*part;
        }
    }
    Ok(DenseUnitary { n_sites: n, matrix: sectors.assemble(dim, &parts) })
}

/// Dense Hamiltonian of the spin chain with constant `b1`, `beta1` (for checks).
pub fn full_hamiltonian(spec: &ChainSpec, b1: f64, beta1: f64) -> Result<CMatrix> {
    spec.validate()?;
    check_size(spec.n_sites)?;
    let dim = 1usize << spec.n_sites;
    let sectors = Sectors::new(spec.n_sites, Symmetry::None);
    let pos = positions(&sectors, dim);
    let ham = SpinHamiltonian::new(spec);
    Ok(ham.block(&sectors, 0, &pos, b1, beta1))
}

/// Many-body operator `Σ h_nm a†_n a_m` restricted to the fixed-number block `block`.
fn quadratic_block(h: &CMatrix, n: usize, block: &[usize], pos: &[usize]) -> CMatrix {
    let size = block.len();
    let mut out = CMatrix::zeros(size, size);
    for (c, &x) in block.iter().enumerate() {
        for m in 0..n {
            if !occupied(x, n, m) {
                continue;
            }
            out[(c, c)] += h[(m, m)];
            for site in 0..n {
                if site == m || occupied(x, n, site) {
                    continue;
                }
                let y = x ^ bit_of(n, m) ^ bit_of(n, site);
                let sign = string_sign(x, n, site, m);
                out[(pos[y], c)] += h[(site, m)] * sign;
            }
        }
    }
    out
}

/// Dense matrix of `Σ h_nm a†_n a_m`.
pub fn quadratic_operator(h: &CMatrix, n_sites: usize) -> Result<CMatrix> {
    check_size(n_sites)?;
    if h.nrows() != n_sites || h.ncols() != n_sites {
        return Err(Error::DimensionMismatch { expected: n_sites, got: h.nrows() });
    }
    let dim = 1usize << n_sites;
    let sectors = Sectors::new(n_sites, Symmetry::Number);
    let pos = positions(&sectors, dim);
    let parts: Vec<CMatrix> = sectors.blocks.iter().map(|b| quadratic_block(h, n_sites, b, &pos)).collect();
    Ok(sectors.assemble(dim, &parts))
}

/// Gaussian lift of a mode unitary `u = exp(−i h)` to `exp(−i Σ h_nm a†_n a_m)`.
///
/// Defined up to a global phase (log branch); compare with
/// [`compare_up_to_phase`].
pub fn lift_mode_unitary(u: &CMatrix, n_sites: usize) -> Result<DenseUnitary> {
    check_size(n_sites)?;
    if u.nrows() != n_sites || u.ncols() != n_sites {
        return Err(Error::DimensionMismatch { expected: n_sites, got: u.nrows() });
    }
    let defect = unitarity_defect(u);
    if defect > 1e-10 {
        return Err(Error::NotUnitary(defect));
    }
    let h = unitary_log(u).ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let dim = 1usize << n_sites;
    let sectors = Sectors::new(n_sites, Symmetry::Number);
    let pos = positions(&sectors, dim);
    let parts: Vec<CMatrix> = sectors
        .blocks
        .iter()
        .map(|b| HermitianEigen::new(&quadratic_block(&h, n_sites, b, &pos)).propagator(1.0))
        .collect();
    Ok(DenseUnitary { n_sites, matrix: sectors.assemble(dim, &parts) })
}

/// Many-body swap-like operator `exp(−iπ h_kl / 2)` written out explicitly
/// (1-based `k < l`):
///
/// * `(l−k)` even: `(|00⟩⟨00| + |11⟩⟨11|)⊗1 + (|01⟩⟨10| − |10⟩⟨01|)⊗L_kl`
/// * `(l−k)` odd:  `(|00⟩⟨00| + |11⟩⟨11|)⊗1 − i(|01⟩⟨10| + |10⟩⟨01|)⊗L_kl`
///
/// with `L_kl = ∏_{k<j<l} Z_j`.
pub fn ideal_swap_operator(k: usize, l: usize, n_sites: usize) -> Result<DenseUnitary> {
    check_size(n_sites)?;
    if !(1 <= k && k < l && l <= n_sites) {
        return Err(Error::InvalidIndex(format!("swap sites ({k}, {l}) on {n_sites} sites")));
    }
    let (a, b) = (k - 1, l - 1);
    let n = n_sites;
    let dim = 1usize << n;
    let even = (l - k) % 2 == 0;
    let mut m = CMatrix::zeros(dim, dim);
    for x in 0..dim {
        let (ok, ol) = (occupied(x, n, a), occupied(x, n, b));
        if ok == ol {
            m[(x, x)] = ONE;
            continue;
        }
        let y = x ^ bit_of(n, a) ^ bit_of(n, b);
        let string = string_sign(x, n, a, b);
        let amp = if even {
            // |10⟩ → +L|01⟩, |01⟩ → −L|10⟩
            if ok { ONE } else { -ONE }
        } else {
            -I
        };
        m[(y, x)] = amp * string;
    }
    Ok(DenseUnitary { n_sites, matrix: m })
}

/// `1 − (|tr(a† b)| / D)²`, clamped at zero.
pub fn compare_up_to_phase(a: &DenseUnitary, b: &DenseUnitary) -> Result<f64> {
    infidelity(&a.matrix, &b.matrix)
}

/// Phase-insensitive infidelity between two square matrices of equal size.
pub fn infidelity(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.nrows() });
    }
    let d = a.nrows() as f64;
    let overlap = inner(a, b).norm() / d;
    Ok((1.0 - overlap * overlap).max(0.0))
}

/// Dense Pauli matrices.
pub fn pauli(label: char) -> CMatrix {
    match label {
        'I' => identity(2),
        'X' => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        'Y' => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        'Z' => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("unknown Pauli label {label}"),
    }
}

pub fn hadamard() -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(2, 2, &[ONE * s, ONE * s, ONE * s, -ONE * s])
}

/// Embed a `2×2` operator on 1-based `site`.
pub fn site_operator(n_sites: usize, site: usize, op: &CMatrix) -> CMatrix {
    let left = identity(1 << (site - 1));
    let right = identity(1 << (n_sites - site));
    left.kronecker(op).kronecker(&right)
}

/// Embed a `4×4` operator on sites 1 and 2.
pub fn control_pair_operator(n_sites: usize, op: &CMatrix) -> CMatrix {
    op.kronecker(&identity(1 << (n_sites - 2)))
}

/// `exp(−i angle Z_site)`.
pub fn z_rotation_dense(n_sites: usize, site: usize, angle: f64) -> CMatrix {
    let mut m = CMatrix::zeros(1 << n_sites, 1 << n_sites);
    for x in 0..1usize << n_sites {
        let z = if occupied(x, n_sites, site - 1) { -1.0 } else { 1.0 };
        m[(x, x)] = C64::from_polar(1.0, -angle * z);
    }
    m
}

/// `exp(−i θ Z₁ X₂) = cos θ − i sin θ Z₁X₂`.
pub fn zx_rotation_dense(n_sites: usize, theta: f64) -> CMatrix {
    let zx = site_operator(n_sites, 1, &pauli('Z')) * site_operator(n_sites, 2, &pauli('X'));
    identity(1 << n_sites) * C64::new(theta.cos(), 0.0) - zx * (I * theta.sin())
}

/// Total parity `∏ Z_n`.
pub fn parity_operator(n_sites: usize) -> CMatrix {
    let dim = 1usize << n_sites;
    CMatrix::from_fn(dim, dim, |r, c| {
        if r != c {
            ZERO
        } else if r.count_ones() % 2 == 0 {
            ONE
        } else {
            -ONE
        }
    })
}

/// Total magnetization `Σ Z_n`.
pub fn total_z(n_sites: usize) -> CMatrix {
    let dim = 1usize << n_sites;
    CMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            C64::new(n_sites as f64 - 2.0 * r.count_ones() as f64, 0.0)
        } else {
            ZERO
        }
    })
}

/// Dense Majorana operator `c_j` (0-based `j`; `c_{2i} = S_i X_i`, `c_{2i+1} = S_i Y_i`).
pub fn majorana_operator(n_sites: usize, j: usize) -> CMatrix {
    let n = n_sites;
    let site = j / 2;
    let dim = 1usize << n;
    let mut m = CMatrix::zeros(dim, dim);
    for x in 0..dim {
        let string = (0..site).filter(|&s| occupied(x, n, s)).count();
        let sign = if string % 2 == 0 { 1.0 } else { -1.0 };
        let y = x ^ bit_of(n, site);
        let amp = if j % 2 == 0 {
            ONE
        } else if occupied(x, n, site) {
            -I
        } else {
            I
        };
        m[(y, x)] = amp * sign;
    }
    m
}

/// `max_j ‖U† c_j U − Σ_k R_jk c_k‖_F / √D` for a `2N × 2N` Majorana propagator `R`.
pub fn majorana_residual(u: &DenseUnitary, r: &CMatrix) -> Result<f64> {
    let n = u.n_sites;
    if r.nrows() != 2 * n {
        return Err(Error::DimensionMismatch { expected: 2 * n, got: r.nrows() });
    }
    let ops: Vec<CMatrix> = (0..2 * n).map(|j| majorana_operator(n, j)).collect();
    Ok(heisenberg_residual(&u.matrix, &ops, r))
}

/// Residual for the `(2N+1)`-dimensional picture with the auxiliary Majorana.
///
/// `plus` is the physical propagator and `minus` the one with the `Y₁`
/// amplitude negated; together they form `U_+ ⊗ |0⟩⟨0| + U_− ⊗ |1⟩⟨1|` on the
/// chain plus one auxiliary qubit, with `Γ_j = c_j ⊗ X` and `Γ_aux = 1 ⊗ Y`.
pub fn extended_majorana_residual(plus: &DenseUnitary, minus: &DenseUnitary, r: &CMatrix) -> Result<f64> {
    let n = plus.n_sites;
    if r.nrows() != 2 * n + 1 {
        return Err(Error::DimensionMismatch { expected: 2 * n + 1, got: r.nrows() });
    }
    let p0 = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
    let p1 = CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]);
    let u = plus.matrix.kronecker(&p0) + minus.matrix.kronecker(&p1);
    let mut ops: Vec<CMatrix> = (0..2 * n).map(|j| majorana_operator(n, j).kronecker(&pauli('X'))).collect();
    ops.push(identity(1 << n).kronecker(&pauli('Y')));
    Ok(heisenberg_residual(&u, &ops, r))
}

fn heisenberg_residual(u: &CMatrix, ops: &[CMatrix], r: &CMatrix) -> f64 {
    let scale = (u.nrows() as f64).sqrt();
    let ud = u.adjoint();
    let mut worst: f64 = 0.0;
    for (j, op) in ops.iter().enumerate() {
        let mut diff = &ud * op * u;
        for (k, other) in ops.iter().enumerate() {
            let coeff = r[(j, k)];
            if coeff != ZERO {
                diff -= other * coeff;
            }
        }
        worst = worst.max(frobenius(&diff) / scale);
    }
    worst
}

/// Isometry from `n_logical` logical qubits into the odd-parity pair encoding:
/// logical `|0⟩ = |01⟩`, `|1⟩ = |10⟩` on sites `(2n−1, 2n)`; logical qubit 1 most significant.
pub fn code_space_isometry(n_logical: usize) -> Result<CMatrix> {
    let n = 2 * n_logical;
    check_size(n)?;
    let mut p = CMatrix::zeros(1 << n, 1 << n_logical);
    for logical in 0..1usize << n_logical {
        let mut x = 0usize;
        for q in 0..n_logical {
            let one = logical & (1 << (n_logical - 1 - q)) != 0;
            let occupied_site = if one { 2 * q } else { 2 * q + 1 };
            x |= bit_of(n, occupied_site);
        }
        p[(x, logical)] = ONE;
    }
    Ok(p)
}

/// Phase-insensitive infidelity of `u` against `ideal` on the encoded subspace;
/// leakage out of the code space lowers the overlap.
pub fn logical_infidelity(u: &DenseUnitary, ideal: &CMatrix) -> Result<f64> {
    if u.n_sites % 2 != 0 {
        return Err(Error::InvalidCircuit("logical encoding needs an even chain".into()));
    }
    let p = code_space_isometry(u.n_sites / 2)?;
    let effective = p.adjoint() * &u.matrix * &p;
    infidelity(&effective, ideal)
}

/// Norm of the part of `u P` outside the code space (`‖(1 − PP†) u P‖_F / √dim`).
pub fn leakage(u: &DenseUnitary) -> Result<f64> {
    let p = code_space_isometry(u.n_sites / 2)?;
    let up = &u.matrix * &p;
    let inside = &p * (p.adjoint() * &up);
    Ok(frobenius(&(up - inside)) / (p.ncols() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, expm_hermitian, max_abs};

    #[test]
    fn decoupled_chain_is_product_of_z_phases() {
        let spec = ChainSpec {
            n_sites: 3,
            couplings: vec![1e-300, 1e-300],
            fields: vec![0.3, -0.7, 1.1],
            gamma: 0.0,
            disorder: None,
        };
        let pulse = ControlPulse::constant(2.0, 0.5, 0.4).unwrap();
        let u = full_propagator(&spec, &pulse).unwrap();
        let expected = z_rotation_dense(3, 1, 0.7 * 2.0) * z_rotation_dense(3, 2, -0.7 * 2.0) * z_rotation_dense(3, 3, 1.1 * 2.0);
        assert!(max_abs(&(u.matrix - expected)) < 1e-12);
    }

    #[test]
    fn ising_static_matches_eigendecomposition() {
        let mut spec = ChainSpec::uniform(4, 1.0);
        spec.gamma = 1.0;
        spec.fields = vec![0.5; 4];
        let pulse = ControlPulse::constant(1.5, 0.25, 0.3).unwrap();
        let u = full_propagator(&spec, &pulse).unwrap();
        let h = full_hamiltonian(&spec, 0.3, 0.0).unwrap();
        assert!(max_abs(&(u.matrix - expm_hermitian(&h, 1.5))) < 1e-12);
    }

    #[test]
    fn hamiltonian_matches_pauli_sum() {
        let mut spec = ChainSpec::from_couplings(vec![0.9, 1.3]);
        spec.gamma = 0.3;
        spec.fields = vec![0.2, -0.4, 0.6];
        let n = 3;
        let mut h = CMatrix::zeros(8, 8);
        for (k, c) in spec.couplings.iter().enumerate() {
            let xx = site_operator(n, k + 1, &pauli('X')) * site_operator(n, k + 2, &pauli('X'));
            let yy = site_operator(n, k + 1, &pauli('Y')) * site_operator(n, k + 2, &pauli('Y'));
            h += (xx * C64::new(1.0 + spec.gamma, 0.0) + yy * C64::new(1.0 - spec.gamma, 0.0)) * C64::new(0.5 * c, 0.0);
        }
        for (k, b) in spec.fields.iter().enumerate() {
            h += site_operator(n, k + 1, &pauli('Z')) * C64::new(*b, 0.0);
        }
        h += site_operator(n, 1, &pauli('Z')) * C64::new(0.7, 0.0);
        h += site_operator(n, 1, &pauli('Y')) * C64::new(-0.3, 0.0);
        assert!(max_abs(&(full_hamiltonian(&spec, 0.7, -0.3).unwrap() - h)) < 1e-15);
    }

    #[test]
    fn swap_one_two_on_two_sites() {
        let s = ideal_swap_operator(1, 2, 2).unwrap();
        let m = &s.matrix;
        assert_eq!(m[(0, 0)], ONE);
        assert_eq!(m[(3, 3)], ONE);
        assert_eq!(m[(1, 2)], -I);
        assert_eq!(m[(2, 1)], -I);
        let three = ideal_swap_operator(1, 2, 3).unwrap();
        assert!(max_abs(&(three.matrix - m.kronecker(&identity(2)))) == 0.0);
    }

    #[test]
    fn even_swap_is_the_real_expansion() {
        // (1,3) on three sites: |0x1⟩ → −L|1x0⟩, |1x0⟩ → +L|0x1⟩
        let s = ideal_swap_operator(1, 3, 3).unwrap().matrix;
        assert_eq!(s[(0b100, 0b001)], -ONE);
        assert_eq!(s[(0b001, 0b100)], ONE);
        assert_eq!(s[(0b110, 0b011)], ONE);
        assert_eq!(s[(0b011, 0b110)], -ONE);
    }

    #[test]
    fn phase_comparison_examples() {
        let id = DenseUnitary::identity(2).unwrap();
        assert_eq!(compare_up_to_phase(&id, &id).unwrap(), 0.0);
        let rotated = DenseUnitary { n_sites: 2, matrix: identity(4) * C64::from_polar(1.0, 0.8) };
        assert!(compare_up_to_phase(&id, &rotated).unwrap() < 1e-15);
        let swap = ideal_swap_operator(1, 2, 2).unwrap();
        assert!((compare_up_to_phase(&id, &swap).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn size_limit() {
        assert!(matches!(DenseUnitary::identity(13), Err(Error::TooLarge(13))));
        let spec = ChainSpec::uniform(13, 1.0);
        let pulse = ControlPulse::constant(1.0, 0.5, 0.0).unwrap();
        assert!(matches!(full_propagator(&spec, &pulse), Err(Error::TooLarge(13))));
    }

    #[test]
    fn lift_of_single_mode_phase() {
        let theta = 0.9;
        let mut u = identity(3);
        u[(0, 0)] = C64::from_polar(1.0, -theta);
        let lifted = lift_mode_unitary(&u, 3).unwrap().matrix;
        for x in 0..8 {
            let expected = if x & 0b100 != 0 { C64::from_polar(1.0, -theta) } else { ONE };
            assert!((lifted[(x, x)] - expected).norm() < 1e-13);
        }
        assert!(max_abs(&(lift_mode_unitary(&identity(4), 4).unwrap().matrix - identity(16))) < 1e-13);
    }

    #[test]
    fn quadratic_operator_hopping_is_xx_plus_yy() {
        let mut h = CMatrix::zeros(3, 3);
        h[(0, 1)] = ONE;
        h[(1, 0)] = ONE;
        let op = quadratic_operator(&h, 3).unwrap();
        let xx = site_operator(3, 1, &pauli('X')) * site_operator(3, 2, &pauli('X'));
        let yy = site_operator(3, 1, &pauli('Y')) * site_operator(3, 2, &pauli('Y'));
        assert!(max_abs(&(op - (xx + yy) * C64::new(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn majorana_operators_anticommute() {
        let n = 3;
        let ops: Vec<CMatrix> = (0..2 * n).map(|j| majorana_operator(n, j)).collect();
        for (a, ca) in ops.iter().enumerate() {
            for (b, cb) in ops.iter().enumerate() {
                let anti = ca * cb + cb * ca;
                let expected = if a == b { identity(8) * C64::new(2.0, 0.0) } else { CMatrix::zeros(8, 8) };
                assert!(max_abs(&(anti - expected)) < 1e-15);
            }
        }
        // Y₁ = c_2 and Z₁X₂ = c_3 (1-based)
        assert!(max_abs(&(&ops[1] - site_operator(n, 1, &pauli('Y')))) == 0.0);
        let zx = site_operator(n, 1, &pauli('Z')) * site_operator(n, 2, &pauli('X'));
        assert!(max_abs(&(&ops[2] - zx)) == 0.0);
    }

    #[test]
    fn parity_and_number_conservation() {
        let mut spec = ChainSpec::from_couplings(vec![1.0, 0.8, 1.2]);
        spec.gamma = 0.6;
        spec.fields = vec![0.1, 0.3, -0.2, 0.4];
        let pulse = ControlPulse::new(0.25, vec![0.3, -1.0, 2.0, 0.5]).unwrap();
        let u = full_propagator(&spec, &pulse).unwrap().matrix;
        assert!(max_abs(&commutator(&u, &parity_operator(4))) < 1e-10);
        spec.gamma = 0.0;
        let u = full_propagator(&spec, &pulse).unwrap().matrix;
        assert!(max_abs(&commutator(&u, &total_z(4))) < 1e-10);
    }

    #[test]
    fn code_space_has_one_excitation_per_pair() {
        let p = code_space_isometry(2).unwrap();
        let cols: Vec<usize> = (0..4).map(|c| (0..16).find(|&r| p[(r, c)] == ONE).unwrap()).collect();
        assert_eq!(cols, vec![0b0101, 0b0110, 0b1001, 0b1010]);
    }
}
