//! Truncated bivariate Taylor polynomials ("jets") of total degree three.
//!
//! Charts are written once as expressions over [`Jet`]; evaluating them at a
//! parameter point yields exact partial derivatives up to third order. The
//! arithmetic is plain polynomial truncation, so there is no discretisation
//! error involved.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Maximum total degree carried by a jet.
pub const MAX_ORDER: usize = 3;
const LEN: usize = 10;

/// Monomial exponents `(a, b)` for `x^a y^b`, graded by total degree.
const EXPONENTS: [(usize, usize); LEN] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

const fn index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

const fn factorial(n: usize) -> f64 {
    match n {
        0 | 1 => 1.0,
        2 => 2.0,
        _ => 6.0,
    }
}

/// Taylor coefficients `c[a,b] = ∂ₓᵃ∂ᵧᵇ f / (a! b!)` of a function around a
/// base point, valid up to total degree `order`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    coeffs: [f64; LEN],
    order: usize,
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        let mut coeffs = [0.0; LEN];
        coeffs[0] = value;
        Self {
            coeffs,
            order: MAX_ORDER,
        }
    }

    /// The coordinate functions `(x, y)` expanded around `(x0, y0)`.
    pub fn variables(x0: f64, y0: f64) -> (Self, Self) {
        let mut x = Self::constant(x0);
        x.coeffs[index(1, 0)] = 1.0;
        let mut y = Self::constant(y0);
        y.coeffs[index(0, 1)] = 1.0;
        (x, y)
    }

    /// Highest total degree whose coefficients are exact.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Partial derivative `∂ₓᵃ∂ᵧᵇ` at the base point.
    ///
    /// Panics if `a + b` exceeds the valid order of the jet.
    pub fn partial(&self, a: usize, b: usize) -> f64 {
        assert!(
            a + b <= self.order,
            "derivative of order {} requested from a jet valid to order {}",
            a + b,
            self.order
        );
        self.coeffs[index(a, b)] * factorial(a) * factorial(b)
    }

    /// First partial derivative along coordinate `i` (0 → x, 1 → y).
    pub fn d(&self, i: usize) -> f64 {
        if i == 0 {
            self.partial(1, 0)
        } else {
            self.partial(0, 1)
        }
    }

    /// Second partial derivative `∂ᵢ∂ⱼ`.
    pub fn dd(&self, i: usize, j: usize) -> f64 {
        match i + j {
            0 => self.partial(2, 0),
            1 => self.partial(1, 1),
            _ => self.partial(0, 2),
        }
    }

    /// Third partial derivative `∂ᵢ∂ⱼ∂ₖ`.
    pub fn ddd(&self, i: usize, j: usize, k: usize) -> f64 {
        let ny = i + j + k;
        self.partial(3 - ny, ny)
    }

    /// The jet of `∂f/∂(coordinate i)`; loses one order of validity.
    pub fn derivative(&self, i: usize) -> Self {
        assert!(self.order >= 1, "cannot differentiate a zeroth-order jet");
        let mut out = [0.0; LEN];
        for (k, &(a, b)) in EXPONENTS.iter().enumerate() {
            if a + b + 1 > self.order {
                continue;
            }
            out[k] = if i == 0 {
                (a + 1) as f64 * self.coeffs[index(a + 1, b)]
            } else {
                (b + 1) as f64 * self.coeffs[index(a, b + 1)]
            };
        }
        Self {
            coeffs: out,
            order: self.order - 1,
        }
    }

    /// Applies a univariate function given its derivatives `[f, f', f'', f''']`
    /// at the base value.
    fn compose(&self, derivs: [f64; 4]) -> Self {
        let mut delta = *self;
        delta.coeffs[0] = 0.0;
        let mut out = Self::constant(derivs[0]);
        out.order = self.order;
        let mut power = Self::constant(1.0);
        for (k, &fk) in derivs.iter().enumerate().skip(1) {
            power = power * delta;
            out = out + power.scale(fk / factorial(k));
        }
        out.order = self.order;
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for c in &mut out.coeffs {
            *c *= s;
        }
        out
    }

    pub fn recip(&self) -> Self {
        let v = self.value();
        self.compose([1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v), -6.0 / (v * v * v * v)])
    }

    pub fn sqrt(&self) -> Self {
        let v = self.value();
        let s = v.sqrt();
        self.compose([s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v)])
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose([e, e, e, e])
    }

    pub fn powi(&self, n: i32) -> Self {
        let mut out = Self::constant(1.0);
        out.order = self.order;
        for _ in 0..n.unsigned_abs() {
            out = out * *self;
        }
        if n < 0 {
            out.recip()
        } else {
            out
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let mut coeffs = self.coeffs;
        for (c, r) in coeffs.iter_mut().zip(rhs.coeffs) {
            *c += r;
        }
        Jet {
            coeffs,
            order: self.order.min(rhs.order),
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut coeffs = [0.0; LEN];
        for (i, &(a1, b1)) in EXPONENTS.iter().enumerate() {
            if self.coeffs[i] == 0.0 {
                continue;
            }
            for (j, &(a2, b2)) in EXPONENTS.iter().enumerate() {
                if a1 + b1 + a2 + b2 > order {
                    continue;
                }
                coeffs[index(a1 + a2, b1 + b2)] += self.coeffs[i] * rhs.coeffs[j];
            }
        }
        Jet { coeffs, order }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self;
        out.coeffs[0] += rhs;
        out
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self + (-rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs.scale(self)
    }
}

/// A vector of three jets, used for charts and ambient vector fields.
pub type Jet3 = [Jet; 3];

pub fn dot3(a: &Jet3, b: &Jet3) -> Jet {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3(a: &Jet3, b: &Jet3) -> Jet3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn derivative3(v: &Jet3, i: usize) -> Jet3 {
    [v[0].derivative(i), v[1].derivative(i), v[2].derivative(i)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives_are_exact() {
        let (x, y) = Jet::variables(0.3, -0.7);
        // f = x^3 + 2 x y^2 - y
        let f = x * x * x + 2.0 * x * y * y - y;
        assert!((f.value() - (0.027 + 2.0 * 0.3 * 0.49 + 0.7)).abs() < 1e-15);
        assert!((f.d(0) - (3.0 * 0.09 + 2.0 * 0.49)).abs() < 1e-14);
        assert!((f.d(1) - (4.0 * 0.3 * -0.7 - 1.0)).abs() < 1e-14);
        assert!((f.dd(0, 0) - 6.0 * 0.3).abs() < 1e-14);
        assert!((f.dd(0, 1) - 4.0 * -0.7).abs() < 1e-14);
        assert!((f.dd(1, 1) - 4.0 * 0.3).abs() < 1e-14);
        assert!((f.ddd(0, 0, 0) - 6.0).abs() < 1e-14);
        assert!((f.ddd(0, 1, 1) - 4.0).abs() < 1e-14);
        assert!(f.ddd(0, 0, 1).abs() < 1e-14);
    }

    #[test]
    fn transcendental_functions_match_closed_forms() {
        let (x, y) = Jet::variables(0.4, 0.2);
        let s = x * x + y * y;
        let f = (s + 1.0).sqrt();
        // d/dx sqrt(1+s) = x / sqrt(1+s)
        let r = (1.0f64 + 0.2).sqrt();
        assert!((f.d(0) - 0.4 / r).abs() < 1e-14);
        // d2/dxdy = -x y / (1+s)^{3/2}
        assert!((f.dd(0, 1) + 0.08 / r.powi(3)).abs() < 1e-14);
        let g = (x * y).sin();
        assert!((g.dd(0, 1) - ((0.08f64).cos() - 0.08 * (0.08f64).sin())).abs() < 1e-14);
        let q = x.recip();
        assert!((q.ddd(0, 0, 0) + 6.0 / 0.4f64.powi(4)).abs() < 1e-10);
    }

    #[test]
    fn differentiation_drops_one_order() {
        let (x, _) = Jet::variables(1.0, 0.0);
        let f = x * x * x;
        let df = f.derivative(0);
        assert_eq!(df.order(), 2);
        assert!((df.dd(0, 0) - 6.0).abs() < 1e-14);
    }
}
