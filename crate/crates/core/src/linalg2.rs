//! Minimal 2-D vector and symmetric 2x2 matrix arithmetic.
//!
//! The spatial machinery only ever needs the plane, so the closed forms for
//! determinant, inverse and Cholesky factor are used directly instead of
//! pulling in a general linear algebra dependency.

use crate::num::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec2<F = f64> {
    pub x: F,
    pub y: F,
}

impl<F: Scalar> Vec2<F> {
    pub fn new(x: F, y: F) -> Self {
        Vec2 { x, y }
    }

    pub fn zero() -> Self {
        Vec2 {
            x: F::zero(),
            y: F::zero(),
        }
    }

    pub fn add(self, o: Vec2<F>) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2<F>) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, s: F) -> Self {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Vec2<F>) -> F {
        self.x * o.x + self.y * o.y
    }

    pub fn norm_sq(self) -> F {
        self.dot(self)
    }

    /// Outer product v v'.
    pub fn outer(self) -> SymMat2<F> {
        SymMat2 {
            xx: self.x * self.x,
            xy: self.x * self.y,
            yy: self.y * self.y,
        }
    }
}

/// Symmetric 2x2 matrix stored as its upper triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat2<F = f64> {
    pub xx: F,
    pub xy: F,
    pub yy: F,
}

impl<F: Scalar> SymMat2<F> {
    pub fn new(xx: F, xy: F, yy: F) -> Self {
        SymMat2 { xx, xy, yy }
    }

    pub fn identity() -> Self {
        SymMat2::new(F::one(), F::zero(), F::one())
    }

    pub fn diag(a: F, b: F) -> Self {
        SymMat2::new(a, F::zero(), b)
    }

    pub fn zero() -> Self {
        SymMat2::new(F::zero(), F::zero(), F::zero())
    }

    pub fn det(self) -> F {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(self) -> F {
        self.xx + self.yy
    }

    pub fn add(self, o: SymMat2<F>) -> Self {
        SymMat2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn sub(self, o: SymMat2<F>) -> Self {
        SymMat2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }

    pub fn scale(self, s: F) -> Self {
        SymMat2::new(self.xx * s, self.xy * s, self.yy * s)
    }

    pub fn mul_vec(self, v: Vec2<F>) -> Vec2<F> {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    /// v' M v.
    pub fn quad_form(self, v: Vec2<F>) -> F {
        v.x * v.x * self.xx + (v.x * v.y + v.x * v.y) * self.xy + v.y * v.y * self.yy
    }

    pub fn is_spd(self) -> bool {
        self.xx > F::zero() && self.det() > F::zero()
    }

    pub fn inverse(self) -> Option<SymMat2<F>> {
        let det = self.det();
        if det == F::zero() || !det.is_finite() {
            return None;
        }
        Some(SymMat2::new(self.yy / det, -self.xy / det, self.xx / det))
    }

    /// Lower Cholesky factor L with M = L L'; `None` unless M is s.p.d.
    pub fn cholesky(self) -> Option<Chol2<F>> {
        if !self.is_spd() {
            return None;
        }
        let l11 = self.xx.sqrt();
        let l21 = self.xy / l11;
        let rest = self.yy - l21 * l21;
        if rest <= F::zero() {
            return None;
        }
        Some(Chol2 {
            l11,
            l21,
            l22: rest.sqrt(),
        })
    }
}

/// Lower-triangular Cholesky factor of a 2x2 s.p.d. matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Chol2<F = f64> {
    pub l11: F,
    pub l21: F,
    pub l22: F,
}

impl<F: Scalar> Chol2<F> {
    pub fn mul_vec(self, v: Vec2<F>) -> Vec2<F> {
        Vec2::new(self.l11 * v.x, self.l21 * v.x + self.l22 * v.y)
    }

    /// Reassembles L L'.
    pub fn to_mat(self) -> SymMat2<F> {
        SymMat2::new(
            self.l11 * self.l11,
            self.l11 * self.l21,
            self.l21 * self.l21 + self.l22 * self.l22,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m: SymMat2 = SymMat2::new(2.0, 0.5, 1.5);
        let inv = m.inverse().unwrap();
        let prod_xx = m.xx * inv.xx + m.xy * inv.xy;
        let prod_xy = m.xx * inv.xy + m.xy * inv.yy;
        let prod_yy = m.xy * inv.xy + m.yy * inv.yy;
        assert!((prod_xx - 1.0).abs() < 1e-12);
        assert!(prod_xy.abs() < 1e-12);
        assert!((prod_yy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_reassembles() {
        let m: SymMat2 = SymMat2::new(3.0, -0.7, 2.0);
        let l = m.cholesky().unwrap();
        let back = l.to_mat();
        assert!((back.xx - m.xx).abs() < 1e-12);
        assert!((back.xy - m.xy).abs() < 1e-12);
        assert!((back.yy - m.yy).abs() < 1e-12);
    }

    #[test]
    fn non_spd_has_no_cholesky() {
        assert!(SymMat2::<f64>::new(1.0, 2.0, 1.0).cholesky().is_none());
        assert!(SymMat2::<f64>::new(-1.0, 0.0, 1.0).cholesky().is_none());
    }

    #[test]
    fn quad_form_matches_explicit() {
        let m: SymMat2 = SymMat2::new(2.0, 0.3, 1.2);
        let v = Vec2::new(0.7, -1.1);
        let expect = 2.0 * 0.49 + 2.0 * 0.3 * 0.7 * (-1.1) + 1.2 * 1.21;
        assert!((m.quad_form(v) - expect).abs() < 1e-12);
    }
}
