//! Dense complex matrix helpers shared by every module.
//!
//! All propagators are built from exact Hermitian eigendecompositions:
//! `exp(-i H t) = V diag(exp(-i λ t)) V†`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `tr(a† b)` without forming the product.
pub fn inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest elementwise deviation of `u† u` from the identity.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let d = u.nrows();
    max_abs(&(u.adjoint() * u - identity(d)))
}

pub fn is_hermitian(h: &CMatrix, tol: f64) -> bool {
    h.is_square() && max_abs(&(h - h.adjoint())) <= tol
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Real matrix lifted to complex entries.
pub fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &CMatrix) -> Self {
        let (values, vectors) = if is_real(h) {
            let eig = h.map(|z| z.re).symmetric_eigen();
            (eig.eigenvalues, complexify(&eig.eigenvectors))
        } else {
            let eig = h.clone().symmetric_eigen();
            (eig.eigenvalues, eig.eigenvectors)
        };
        let (values, vectors) = sort_eigen(values, vectors);
        HermitianEigen { values, vectors }
    }

    /// `V f(λ) V†` for a scalar function of the eigenvalues.
    pub fn map<F: Fn(f64) -> C64>(&self, f: F) -> CMatrix {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let fj = f(lam);
            for i in 0..d {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        self.map(|lam| C64::from_polar(1.0, -lam * t))
    }
}

fn sort_eigen(values: DVector<f64>, vectors: CMatrix) -> (Vec<f64>, CMatrix) {
    let d = values.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values = order.iter().map(|&i| values[i]).collect();
    let sorted_vectors = CMatrix::from_fn(d, d, |r, c| vectors[(r, order[c])]);
    (sorted_values, sorted_vectors)
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    HermitianEigen::new(h).propagator(t)
}

/// Nearest unitary in Frobenius norm (polar factor).
pub fn reunitarize(u: &CMatrix) -> CMatrix {
    let svd = u.clone().svd(true, true);
    let left = svd.u.expect("svd computed u");
    let right = svd.v_t.expect("svd computed v_t");
    left * right
}

/// Hermitian `h` with `u = exp(-i h)`, eigenphases taken in (-π, π].
///
/// `u` must be unitary; a unitary is normal, so its complex Schur form is
/// diagonal and the Schur vectors are eigenvectors.
pub fn unitary_log(u: &CMatrix) -> Option<CMatrix> {
    let d = u.nrows();
    let schur = nalgebra::linalg::Schur::try_new(u.clone(), 1e-15, 10_000)?;
    let (q, t) = schur.unpack();
    let mut phases = CMatrix::zeros(d, d);
    for k in 0..d {
        let mut phase = t[(k, k)].arg();
        if phase <= -std::f64::consts::PI {
            phase += 2.0 * std::f64::consts::PI;
        }
        phases[(k, k)] = C64::new(-phase, 0.0);
    }
    let h = &q * phases * q.adjoint();
    Some((&h + h.adjoint()) * C64::new(0.5, 0.0))
}

/// Derivative weights of `exp(-i H dt)` in the eigenbasis of `H`:
/// `Φ_ab = (e^{-iλ_a dt} - e^{-iλ_b dt}) / (λ_a - λ_b)`, written in a form
/// that stays exact for degenerate pairs.
pub fn exp_derivative_weights(values: &[f64], dt: f64) -> CMatrix {
    let d = values.len();
    CMatrix::from_fn(d, d, |a, b| {
        let mean = 0.5 * (values[a] + values[b]) * dt;
        let half_gap = 0.5 * (values[a] - values[b]) * dt;
        let sinc = if half_gap.abs() < 1e-8 {
            1.0 - half_gap * half_gap / 6.0
        } else {
            half_gap.sin() / half_gap
        };
        C64::new(0.0, -dt) * C64::from_polar(sinc, -mean)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    #[test]
    fn expm_of_sigma_x_quarter_turn() {
        let u = expm_hermitian(&sigma_x(), std::f64::consts::FRAC_PI_2);
        let expected = CMatrix::from_row_slice(2, 2, &[ZERO, -I, -I, ZERO]);
        assert!(max_abs(&(u - expected)) < 1e-15);
    }

    #[test]
    fn complex_hermitian_path_matches_real_path() {
        let h = CMatrix::from_row_slice(
            3,
            3,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.3, 0.2),
                C64::new(0.0, -0.5),
                C64::new(0.3, -0.2),
                C64::new(-0.4, 0.0),
                C64::new(0.7, 0.0),
                C64::new(0.0, 0.5),
                C64::new(0.7, 0.0),
                C64::new(0.2, 0.0),
            ],
        );
        let eig = HermitianEigen::new(&h);
        let rebuilt = eig.map(|lam| C64::new(lam, 0.0));
        assert!(max_abs(&(rebuilt - &h)) < 1e-13);
        assert!(unitarity_defect(&eig.propagator(0.9)) < 1e-14);
    }

    #[test]
    fn log_inverts_exp() {
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.2, 0.0), C64::new(0.5, 0.1), C64::new(0.5, -0.1), C64::new(-1.1, 0.0)],
        );
        let u = expm_hermitian(&h, 1.0);
        let back = unitary_log(&u).unwrap();
        assert!(max_abs(&(back - h)) < 1e-12);
    }

    #[test]
    fn log_of_degenerate_unitary() {
        let mut u = identity(4);
        u[(0, 0)] = -ONE;
        let h = unitary_log(&u).unwrap();
        assert!(max_abs(&(expm_hermitian(&h, 1.0) - u)) < 1e-13);
        assert!((h[(0, 0)].re - (-std::f64::consts::PI)).abs() < 1e-13);
    }

    #[test]
    fn derivative_weights_match_difference_quotient() {
        let vals = [0.3, 0.3 + 1e-11, -2.0];
        let w = exp_derivative_weights(&vals, 0.5);
        let direct = (C64::from_polar(1.0, -0.3 * 0.5) - C64::from_polar(1.0, 2.0 * 0.5)) / (0.3 + 2.0);
        assert!((w[(0, 2)] - direct).norm() < 1e-15);
        let diag = C64::new(0.0, -0.5) * C64::from_polar(1.0, -0.15);
        assert!((w[(0, 1)] - diag).norm() < 1e-10);
    }
}
