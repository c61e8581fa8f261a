//! Forward-mode scalars carrying first and second derivatives with respect to
//! a fixed set of seed variables.
//!
//! Element integrands are written once against the [`Scalar`] trait and
//! instantiated with `f64` for energy evaluation and with [`Dual2`] for
//! residual/tangent assembly. The Hessian is stored packed upper-triangular:
//! entry (i, j) with i <= j lives at `j*(j+1)/2 + i`.

/// Abstraction over plain numbers and AD numbers for integrand code.
pub trait Scalar: Clone + std::fmt::Debug {
    fn constant(x: f64) -> Self;
    fn val(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn add_f(&self, x: f64) -> Self;
    fn mul_f(&self, x: f64) -> Self;
    fn sqrt(&self) -> Self;
    fn recip(&self) -> Self;
    /// arccos with the argument clamped into [-1-tol, 1+tol] -> [-1, 1].
    fn acos_clamped(&self, tol: f64) -> Option<Self>
    where
        Self: Sized;
}

impl Scalar for f64 {
    fn constant(x: f64) -> Self {
        x
    }
    fn val(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn add_f(&self, x: f64) -> Self {
        self + x
    }
    fn mul_f(&self, x: f64) -> Self {
        self * x
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn recip(&self) -> Self {
        1.0 / self
    }
    fn acos_clamped(&self, tol: f64) -> Option<Self> {
        let x = *self;
        if x.abs() > 1.0 + tol {
            return None;
        }
        Some(x.clamp(-1.0, 1.0).acos())
    }
}

/// Second-order dual number over `n` seed variables.
#[derive(Clone, Debug)]
pub struct Dual2 {
    pub v: f64,
    pub g: Vec<f64>,
    /// Packed upper-triangular Hessian, length n*(n+1)/2.
    pub h: Vec<f64>,
}

#[inline]
pub fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

#[inline]
pub fn tri_idx(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

impl Dual2 {
    pub fn zero(n: usize) -> Self {
        Dual2 {
            v: 0.0,
            g: vec![0.0; n],
            h: vec![0.0; tri_len(n)],
        }
    }

    pub fn constant_n(x: f64, n: usize) -> Self {
        let mut d = Self::zero(n);
        d.v = x;
        d
    }

    /// Seed variable `i` with value `x`.
    pub fn variable(x: f64, i: usize, n: usize) -> Self {
        let mut d = Self::zero(n);
        d.v = x;
        d.g[i] = 1.0;
        d
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.g.len()
    }

    /// Chain rule for a unary map f with derivatives f', f'' at self.v.
    fn unary(&self, f: f64, f1: f64, f2: f64) -> Self {
        let n = self.n();
        let mut out = Dual2 {
            v: f,
            g: vec![0.0; n],
            h: vec![0.0; tri_len(n)],
        };
        for i in 0..n {
            out.g[i] = f1 * self.g[i];
        }
        let mut k = 0;
        for j in 0..n {
            let gj = self.g[j];
            for i in 0..=j {
                out.h[k] = f1 * self.h[k] + f2 * self.g[i] * gj;
                k += 1;
            }
        }
        out
    }

    /// Chain rule for a binary map f(a, b) with the given partials.
    fn binary(&self, o: &Self, f: f64, fa: f64, fb: f64, faa: f64, fab: f64, fbb: f64) -> Self {
        let n = self.n();
        debug_assert_eq!(n, o.n());
        let mut out = Dual2 {
            v: f,
            g: vec![0.0; n],
            h: vec![0.0; tri_len(n)],
        };
        for i in 0..n {
            out.g[i] = fa * self.g[i] + fb * o.g[i];
        }
        let mut k = 0;
        for j in 0..n {
            let (aj, bj) = (self.g[j], o.g[j]);
            for i in 0..=j {
                let (ai, bi) = (self.g[i], o.g[i]);
                out.h[k] = fa * self.h[k]
                    + fb * o.h[k]
                    + faa * ai * aj
                    + fab * (ai * bj + bi * aj)
                    + fbb * bi * bj;
                k += 1;
            }
        }
        out
    }
}

impl Scalar for Dual2 {
    fn constant(_x: f64) -> Self {
        // Dual2 needs the seed count; constructed through DualCtx instead.
        panic!("use Dual2::constant_n; the seed dimension is context dependent");
    }
    fn val(&self) -> f64 {
        self.v
    }
    fn add(&self, o: &Self) -> Self {
        self.binary(o, self.v + o.v, 1.0, 1.0, 0.0, 0.0, 0.0)
    }
    fn sub(&self, o: &Self) -> Self {
        self.binary(o, self.v - o.v, 1.0, -1.0, 0.0, 0.0, 0.0)
    }
    fn mul(&self, o: &Self) -> Self {
        self.binary(o, self.v * o.v, o.v, self.v, 0.0, 1.0, 0.0)
    }
    fn div(&self, o: &Self) -> Self {
        let ib = 1.0 / o.v;
        let f = self.v * ib;
        // d/da = 1/b, d/db = -a/b^2, d2/dadb = -1/b^2, d2/db2 = 2a/b^3
        self.binary(o, f, ib, -f * ib, 0.0, -ib * ib, 2.0 * f * ib * ib)
    }
    fn neg(&self) -> Self {
        self.unary(-self.v, -1.0, 0.0)
    }
    fn add_f(&self, x: f64) -> Self {
        self.unary(self.v + x, 1.0, 0.0)
    }
    fn mul_f(&self, x: f64) -> Self {
        self.unary(self.v * x, x, 0.0)
    }
    fn sqrt(&self) -> Self {
        let s = self.v.sqrt();
        self.unary(s, 0.5 / s, -0.25 / (s * self.v))
    }
    fn recip(&self) -> Self {
        let iv = 1.0 / self.v;
        self.unary(iv, -iv * iv, 2.0 * iv * iv * iv)
    }
    fn acos_clamped(&self, tol: f64) -> Option<Self> {
        let x = self.v;
        if x.abs() > 1.0 + tol {
            return None;
        }
        let xc = x.clamp(-1.0, 1.0);
        // Guard the derivative singularity at |x| = 1; the integrand only
        // evaluates angles well inside (0, pi) when states are admissible.
        let one_m = (1.0 - xc * xc).max(1e-30);
        let d = -1.0 / one_m.sqrt();
        let d2 = -xc / (one_m * one_m.sqrt());
        Some(self.unary(xc.acos(), d, d2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())), "{a} vs {b}");
    }

    /// f(x, y) = acos(x / sqrt(x^2 + y^2)) has known derivatives; check the
    /// packed Hessian against central finite differences.
    #[test]
    fn dual2_matches_finite_differences() {
        let f = |x: f64, y: f64| (x / (x * x + y * y).sqrt()).acos();
        let (x0, y0) = (0.3, 0.9);
        let x = Dual2::variable(x0, 0, 2);
        let y = Dual2::variable(y0, 1, 2);
        let r = x
            .div(&x.mul(&x).add(&y.mul(&y)).sqrt())
            .acos_clamped(1e-10)
            .unwrap();
        close(r.v, f(x0, y0), 1e-14);
        let e = 1e-5;
        let gx = (f(x0 + e, y0) - f(x0 - e, y0)) / (2.0 * e);
        let gy = (f(x0, y0 + e) - f(x0, y0 - e)) / (2.0 * e);
        close(r.g[0], gx, 1e-8);
        close(r.g[1], gy, 1e-8);
        let hxx = (f(x0 + e, y0) - 2.0 * f(x0, y0) + f(x0 - e, y0)) / (e * e);
        let hyy = (f(x0, y0 + e) - 2.0 * f(x0, y0) + f(x0, y0 - e)) / (e * e);
        let hxy = (f(x0 + e, y0 + e) - f(x0 + e, y0 - e) - f(x0 - e, y0 + e)
            + f(x0 - e, y0 - e))
            / (4.0 * e * e);
        close(r.h[tri_idx(0, 0)], hxx, 1e-5);
        close(r.h[tri_idx(1, 1)], hyy, 1e-5);
        close(r.h[tri_idx(0, 1)], hxy, 1e-5);
    }

    #[test]
    fn acos_clamps_roundoff_and_rejects_garbage() {
        let x = Dual2::variable(1.0 + 5e-11, 0, 1);
        assert!(x.acos_clamped(1e-10).is_some());
        assert!(x.acos_clamped(1e-12).is_none());
    }
}
