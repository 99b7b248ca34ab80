//! Pseudo-Euclidean linear algebra.
//!
//! A [`SignatureMatrix`] is the diagonal matrix `diag(-1, ..., -1, +1, ..., +1)`
//! with `nu` leading negative entries. It defines the indefinite inner product
//! `<v, w> = v^T E w` on `R^{n+1}`, the quadrics `u^T E u = ±1`, the isometry
//! group `{P : P^T = E P^{-1} E}` and its Lie algebra `{A : A^T = -E A E}`.
//!
//! Indices are zero-based throughout the crate.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default distance to the null cone below which projection is refused.
pub const CONE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignatureMatrix {
    nu: usize,
    dim: usize,
}

impl SignatureMatrix {
    pub fn new(nu: usize, dim: usize) -> Result<Self> {
        if dim == 0 || nu > dim {
            return Err(Error::InvalidInput(format!(
                "signature needs 0 <= nu <= dim and dim > 0 (nu = {nu}, dim = {dim})"
            )));
        }
        Ok(Self { nu, dim })
    }

    /// The Euclidean signature on `R^dim`.
    pub fn euclidean(dim: usize) -> Self {
        Self { nu: 0, dim }
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eps(&self, i: usize) -> f64 {
        if i < self.nu {
            -1.0
        } else {
            1.0
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.eps(i)).collect()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.diag()))
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    /// Quadratic form without dimension checks; callers guarantee lengths.
    #[inline]
    pub fn quad(&self, v: &[f64]) -> f64 {
        v.iter().enumerate().map(|(i, x)| self.eps(i) * x * x).sum()
    }
}

/// Level set `u^T E u = level` with `level ∈ {+1, -1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadricSpec {
    pub sig: SignatureMatrix,
    pub level: f64,
}

impl QuadricSpec {
    pub fn new(sig: SignatureMatrix, level: f64) -> Result<Self> {
        if level != 1.0 && level != -1.0 {
            return Err(Error::InvalidInput(format!(
                "quadric level must be +1 or -1, got {level}"
            )));
        }
        Ok(Self { sig, level })
    }

    /// The pseudosphere `S^n_nu ⊂ R^{n+1}_nu`.
    pub fn pseudosphere(n: usize, nu: usize) -> Result<Self> {
        if nu > n {
            return Err(Error::InvalidInput(format!("need nu <= n, got nu = {nu}, n = {n}")));
        }
        Self::new(SignatureMatrix::new(nu, n + 1)?, 1.0)
    }

    /// The pseudohyperbolic space `H^n_nu ⊂ R^{n+1}_{nu+1}`.
    pub fn pseudohyperbolic(n: usize, nu: usize) -> Result<Self> {
        if nu > n {
            return Err(Error::InvalidInput(format!("need nu <= n, got nu = {nu}, n = {n}")));
        }
        Self::new(SignatureMatrix::new(nu + 1, n + 1)?, -1.0)
    }

    pub fn dim(&self) -> usize {
        self.sig.dim()
    }

    pub fn defect(&self, y: &[f64]) -> f64 {
        (self.sig.quad(y) - self.level).abs()
    }
}

/// `v^T E w`.
pub fn inner(v: &[f64], w: &[f64], sig: &SignatureMatrix) -> Result<f64> {
    sig.check_dim(v.len())?;
    sig.check_dim(w.len())?;
    Ok(v.iter().zip(w).enumerate().map(|(i, (a, b))| sig.eps(i) * a * b).sum())
}

/// Radial retraction `y / sqrt|y^T E y|` onto the quadric.
///
/// Fails with [`Error::NullConeViolation`] when `|y^T E y| <= cone_tol` or when
/// the sign of the form disagrees with the quadric level; there is no
/// positive rescaling that reaches the quadric in either case.
pub fn project_to_quadric(y: &[f64], q: &QuadricSpec, cone_tol: f64) -> Result<Vec<f64>> {
    let mut out = y.to_vec();
    project_in_place(&mut out, q, cone_tol)?;
    Ok(out)
}

pub fn project_in_place(y: &mut [f64], q: &QuadricSpec, cone_tol: f64) -> Result<()> {
    q.sig.check_dim(y.len())?;
    let value = q.sig.quad(y);
    if value.abs() <= cone_tol || value.signum() != q.level {
        return Err(Error::NullConeViolation { value, level: q.level });
    }
    let s = value.abs().sqrt().recip();
    y.iter_mut().for_each(|c| *c *= s);
    Ok(())
}

/// Cyclic reindexing `(y_1..y_{n+1}) -> (y_{nu+1}, .., y_{n+1}, y_1, .., y_nu)`.
///
/// Maps `R^{n+1}_nu` anti-isometrically onto `R^{n+1}_{n+1-nu}`, and
/// therefore `S^n_nu` onto `H^n_{n-nu}`.
pub fn anti_isometry(y: &[f64], nu: usize) -> Vec<f64> {
    let mut out = y.to_vec();
    out.rotate_left(nu.min(y.len()));
    out
}

/// Inverse of [`anti_isometry`] for the same `nu`.
pub fn anti_isometry_inverse(y: &[f64], nu: usize) -> Vec<f64> {
    let mut out = y.to_vec();
    out.rotate_right(nu.min(y.len()));
    out
}

/// Signature of the image space of [`anti_isometry`]: `R^{n+1}_{n+1-nu}`.
pub fn anti_isometry_target(sig: &SignatureMatrix) -> SignatureMatrix {
    SignatureMatrix {
        nu: sig.dim - sig.nu,
        dim: sig.dim,
    }
}

fn check_square(p: &DMatrix<f64>, sig: &SignatureMatrix) -> Result<()> {
    if p.nrows() != p.ncols() {
        return Err(Error::InvalidInput("matrix is not square".into()));
    }
    sig.check_dim(p.nrows())
}

fn scaled_diag(sig: &SignatureMatrix, m: &DMatrix<f64>) -> DMatrix<f64> {
    // E M E, entrywise eps_i eps_j m_ij
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| sig.eps(i) * sig.eps(j) * m[(i, j)])
}

/// Membership in `O(nu, n+1-nu)`: `‖P^T - E P^{-1} E‖_∞ <= tol`.
pub fn in_group(p: &DMatrix<f64>, sig: &SignatureMatrix, tol: f64) -> Result<bool> {
    check_square(p, sig)?;
    let inv = p.clone().try_inverse().ok_or(Error::SingularMatrix)?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix);
    }
    let diff = p.transpose() - scaled_diag(sig, &inv);
    Ok(diff.amax() <= tol)
}

/// Membership in `so(nu, n+1-nu)`: `‖A^T + E A E‖_∞ <= tol`.
pub fn in_algebra(a: &DMatrix<f64>, sig: &SignatureMatrix, tol: f64) -> Result<bool> {
    check_square(a, sig)?;
    let diff = a.transpose() + scaled_diag(sig, a);
    Ok(diff.amax() <= tol)
}

/// `E_ij E`, where `E_ij` has `+1` at `(i, j)` and `-1` at `(j, i)`.
pub fn rotation_generator(i: usize, j: usize, sig: &SignatureMatrix) -> Result<DMatrix<f64>> {
    let dim = sig.dim();
    if i == j || i >= dim || j >= dim {
        return Err(Error::InvalidIndex { i, j, dim });
    }
    let mut m = DMatrix::zeros(dim, dim);
    m[(i, j)] = sig.eps(j);
    m[(j, i)] = -sig.eps(i);
    Ok(m)
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|v| v.abs()).fold(0.0, f64::max) * n as f64;
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings as i32);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inner_lorentzian_unit() {
        let sig = SignatureMatrix::new(1, 2).unwrap();
        assert_eq!(inner(&[1.0, 0.0], &[1.0, 0.0], &sig).unwrap(), -1.0);
        assert_eq!(inner(&[0.3, -2.0], &[0.0, 0.0], &sig).unwrap(), 0.0);
    }

    #[test]
    fn inner_matches_component_loop() {
        let sig = SignatureMatrix::new(2, 5).unwrap();
        let v = [0.3, -1.2, 2.5, 0.7, -0.1];
        let w = [1.1, 0.4, -0.6, 2.0, 3.3];
        let mut brute = 0.0;
        for k in 0..5 {
            let e = if k < 2 { -1.0 } else { 1.0 };
            brute += e * v[k] * w[k];
        }
        assert!((inner(&v, &w, &sig).unwrap() - brute).abs() <= 1e-15);
    }

    #[test]
    fn inner_dimension_mismatch() {
        let sig = SignatureMatrix::new(1, 3).unwrap();
        assert!(matches!(
            inner(&[1.0, 2.0], &[1.0, 2.0, 3.0], &sig),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn projection_examples() {
        let q = QuadricSpec::pseudosphere(2, 1).unwrap();
        let y = [0.0, 2.0, 0.0];
        assert_eq!(project_to_quadric(&y, &q, CONE_TOL).unwrap(), vec![0.0, 1.0, 0.0]);
        let on = [(0.4f64).sinh(), (0.4f64).cosh() * 0.6, (0.4f64).cosh() * 0.8];
        let p = project_to_quadric(&on, &q, CONE_TOL).unwrap();
        for (a, b) in p.iter().zip(on) {
            assert!((a - b).abs() < 1e-15);
        }
        let q1 = QuadricSpec::pseudosphere(1, 1).unwrap();
        assert!(matches!(
            project_to_quadric(&[1.0, 1.0], &q1, CONE_TOL),
            Err(Error::NullConeViolation { .. })
        ));
        // timelike vector cannot reach S^1_1
        assert!(project_to_quadric(&[2.0, 1.0], &q1, CONE_TOL).is_err());
    }

    #[test]
    fn anti_isometry_coordinates() {
        assert_eq!(anti_isometry(&[1.0, 2.0, 3.0], 1), vec![2.0, 3.0, 1.0]);
        let y = [0.5, -1.0, 2.0, 3.0];
        assert_eq!(anti_isometry_inverse(&anti_isometry(&y, 3), 3), y.to_vec());
    }

    #[test]
    fn anti_isometry_maps_desitter_to_ads() {
        let q = QuadricSpec::pseudosphere(2, 1).unwrap();
        let f = anti_isometry_target(&q.sig);
        assert_eq!((f.nu(), f.dim()), (2, 3));
        let (a, th) = (0.8f64, 1.3f64);
        let y = [a.sinh(), a.cosh() * th.cos(), a.cosh() * th.sin()];
        assert!((q.sig.quad(&y) - 1.0).abs() < 1e-14);
        let z = anti_isometry(&y, 1);
        assert!((f.quad(&z) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn group_membership() {
        let sig = SignatureMatrix::new(1, 2).unwrap();
        assert!(in_group(&DMatrix::identity(2, 2), &sig, 1e-12).unwrap());
        let a = 0.7f64;
        let boost = DMatrix::from_row_slice(2, 2, &[a.cosh(), a.sinh(), a.sinh(), a.cosh()]);
        // P^T E P = E verified entrywise: cosh^2 - sinh^2 = 1, off-diagonal cancels
        let e = sig.matrix();
        let ptep = boost.transpose() * &e * &boost;
        assert!((ptep - &e).amax() < 1e-14);
        assert!(in_group(&boost, &sig, 1e-12).unwrap());
        let stretch = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(!in_group(&stretch, &sig, 1e-12).unwrap());
        assert!(matches!(
            in_group(&DMatrix::zeros(2, 2), &sig, 1e-12),
            Err(Error::SingularMatrix)
        ));
    }

    #[test]
    fn algebra_membership() {
        let sig = SignatureMatrix::new(1, 3).unwrap();
        assert!(in_algebra(&DMatrix::zeros(3, 3), &sig, 1e-14).unwrap());
        let sym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 0.5]);
        assert!(!in_algebra(&sym, &SignatureMatrix::euclidean(2), 1e-14).unwrap());
    }

    #[test]
    fn generators() {
        let e12 = rotation_generator(0, 1, &SignatureMatrix::euclidean(3)).unwrap();
        assert_eq!(e12[(0, 1)], 1.0);
        assert_eq!(e12[(1, 0)], -1.0);
        let sig = SignatureMatrix::new(1, 2).unwrap();
        let g = rotation_generator(0, 1, &sig).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert!(rotation_generator(1, 1, &sig).is_err());
    }

    #[test]
    fn generators_lie_in_algebra_and_exponentiate_into_group() {
        for nu in 0..=3 {
            let sig = SignatureMatrix::new(nu, 4).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    if i == j {
                        continue;
                    }
                    let g = rotation_generator(i, j, &sig).unwrap();
                    assert!(in_algebra(&g, &sig, 1e-14).unwrap());
                    let p = expm(&(g * 1.3));
                    assert!(in_group(&p, &sig, 1e-10).unwrap(), "nu={nu} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn expm_matches_closed_form_boost() {
        let sig = SignatureMatrix::new(1, 2).unwrap();
        let g = rotation_generator(0, 1, &sig).unwrap() * 1.0;
        let p = expm(&g);
        assert!((p[(0, 0)] - 1f64.cosh()).abs() < 1e-13);
        assert!((p[(0, 1)] - 1f64.sinh()).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn inner_symmetric_bilinear(
            v in prop::collection::vec(-5.0f64..5.0, 4),
            w in prop::collection::vec(-5.0f64..5.0, 4),
            z in prop::collection::vec(-5.0f64..5.0, 4),
            a in -3.0f64..3.0,
        ) {
            let sig = SignatureMatrix::new(2, 4).unwrap();
            let vw = inner(&v, &w, &sig).unwrap();
            prop_assert!((vw - inner(&w, &v, &sig).unwrap()).abs() < 1e-12);
            let comb: Vec<f64> = v.iter().zip(&z).map(|(x, y)| a * x + y).collect();
            let lhs = inner(&comb, &w, &sig).unwrap();
            let rhs = a * vw + inner(&z, &w, &sig).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn projection_idempotent_and_scale_invariant(
            y in prop::collection::vec(-3.0f64..3.0, 3),
            lam in 0.1f64..10.0,
        ) {
            let q = QuadricSpec::pseudosphere(2, 1).unwrap();
            if let Ok(p) = project_to_quadric(&y, &q, CONE_TOL) {
                prop_assert!(q.defect(&p) < 1e-13);
                let pp = project_to_quadric(&p, &q, CONE_TOL).unwrap();
                let scaled: Vec<f64> = y.iter().map(|c| c * lam).collect();
                let ps = project_to_quadric(&scaled, &q, CONE_TOL).unwrap();
                for k in 0..3 {
                    prop_assert!((pp[k] - p[k]).abs() < 1e-12 * (1.0 + p[k].abs()));
                    prop_assert!((ps[k] - p[k]).abs() < 1e-12 * (1.0 + p[k].abs()));
                }
            }
        }

        #[test]
        fn anti_isometry_flips_form(
            y in prop::collection::vec(-4.0f64..4.0, 5),
            nu in 0usize..=5,
        ) {
            let sig = SignatureMatrix::new(nu, 5).unwrap();
            let target = anti_isometry_target(&sig);
            let z = anti_isometry(&y, nu);
            prop_assert!((target.quad(&z) + sig.quad(&y)).abs() <= 1e-12 * (1.0 + sig.quad(&y).abs()));
            prop_assert_eq!(anti_isometry_inverse(&z, nu), y);
        }
    }
}
