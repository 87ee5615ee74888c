//! Truncated bivariate Taylor series ("jets") in `(r, s)`.
//!
//! A [`Jet2`] stores the Taylor coefficients `c[i][k]` of a smooth function
//! around a base point `(r0, s0)`, for the monomials `(r - r0)^i (s - s0)^k`
//! with `i <= r_order` and `k <= s_order`. The retained set is closed under
//! multiplication modulo `((r - r0)^(r_order+1), (s - s0)^(s_order+1))`, so the
//! ring operations are exact on every stored coefficient; derivatives are read
//! back as `i! k! c[i][k]`.
//!
//! Jets with `r_order == 0` double as univariate series in `s`, which is how the
//! spray functions `P` and `Q` are carried through the geometry module.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest admissible magnitude of a divisor's constant term.
pub const DEFAULT_DIV_EPSILON: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct JetShape {
    pub r_order: usize,
    pub s_order: usize,
}

impl JetShape {
    /// One r-derivative and six s-derivatives: enough for `P_sss`, `Q_sss` and `H_s`.
    pub const DEFAULT: JetShape = JetShape { r_order: 1, s_order: 6 };

    pub const fn new(r_order: usize, s_order: usize) -> Self {
        JetShape { r_order, s_order }
    }

    /// Univariate series in `s`.
    pub const fn s_only(s_order: usize) -> Self {
        JetShape { r_order: 0, s_order }
    }

    pub fn len(&self) -> usize {
        (self.r_order + 1) * (self.s_order + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Highest total degree kept; the nilpotent part of any jet vanishes at this power plus one.
    pub fn max_degree(&self) -> usize {
        self.r_order + self.s_order
    }

    /// Minimum shape the geometry module accepts for φ-jets.
    pub fn meets_geometry_minimum(&self) -> bool {
        self.r_order >= 1 && self.s_order >= 6
    }

    pub fn min(self, other: JetShape) -> JetShape {
        JetShape {
            r_order: self.r_order.min(other.r_order),
            s_order: self.s_order.min(other.s_order),
        }
    }

    #[inline]
    fn index(&self, i: usize, k: usize) -> usize {
        i * (self.s_order + 1) + k
    }
}

impl Default for JetShape {
    fn default() -> Self {
        JetShape::DEFAULT
    }
}

impl fmt::Display for JetShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.r_order, self.s_order)
    }
}

/// Derivatives `f(a), f'(a), ..., f^(m)(a)` of an outer scalar function.
#[derive(Clone, Debug, PartialEq)]
pub struct UnivariateDerivs<T> {
    values: Vec<T>,
}

impl<T: Scalar> UnivariateDerivs<T> {
    pub fn new(values: Vec<T>) -> Self {
        UnivariateDerivs { values }
    }

    /// Builds from Taylor coefficients `f^(j)(a) / j!`.
    pub fn from_taylor(coeffs: &[T]) -> Self {
        let mut fact = T::one();
        let values = coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                if j > 0 {
                    fact = fact * T::from_count(j);
                }
                c * fact
            })
            .collect();
        UnivariateDerivs { values }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn taylor_coeffs(&self) -> Vec<T> {
        let mut fact = T::one();
        self.values
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if j > 0 {
                    fact = fact * T::from_count(j);
                }
                v / fact
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jet2<T> {
    r0: T,
    s0: T,
    shape: JetShape,
    coeffs: Vec<T>,
}

impl<T: Scalar> Jet2<T> {
    pub fn constant(c: T, at: (T, T), shape: JetShape) -> Self {
        let mut coeffs = vec![T::zero(); shape.len()];
        coeffs[0] = c;
        Jet2 { r0: at.0, s0: at.1, shape, coeffs }
    }

    pub fn zero(at: (T, T), shape: JetShape) -> Self {
        Self::constant(T::zero(), at, shape)
    }

    /// The coordinate function `r` seeded at `(r0, s0)`.
    pub fn var_r(r0: T, s0: T, shape: JetShape) -> Result<Self> {
        if shape.r_order < 1 {
            return Err(Error::ShapeTooSmall(format!("var_r needs r_order >= 1, got {shape}")));
        }
        let mut jet = Self::constant(r0, (r0, s0), shape);
        let idx = shape.index(1, 0);
        jet.coeffs[idx] = T::one();
        Ok(jet)
    }

    /// The coordinate function `s` seeded at `(r0, s0)`.
    pub fn var_s(r0: T, s0: T, shape: JetShape) -> Result<Self> {
        if shape.s_order < 1 {
            return Err(Error::ShapeTooSmall(format!("var_s needs s_order >= 1, got {shape}")));
        }
        let mut jet = Self::constant(s0, (r0, s0), shape);
        jet.coeffs[1] = T::one();
        Ok(jet)
    }

    /// Coordinate seeds that drop the linear term when the shape has no room
    /// for it, so zero-order evaluation goes through the same code path.
    pub fn seeds(r0: T, s0: T, shape: JetShape) -> (Self, Self) {
        let mut r = Self::constant(r0, (r0, s0), shape);
        let mut s = Self::constant(s0, (r0, s0), shape);
        if shape.r_order >= 1 {
            r.coeffs[shape.index(1, 0)] = T::one();
        }
        if shape.s_order >= 1 {
            s.coeffs[1] = T::one();
        }
        (r, s)
    }

    /// Wraps a row-major coefficient table (`c[i][k]` at `i * (s_order + 1) + k`).
    pub fn from_coeffs(at: (T, T), shape: JetShape, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != shape.len() {
            return Err(Error::ShapeMismatch {
                left: format!("{shape} ({} coefficients)", shape.len()),
                right: format!("{} coefficients", coeffs.len()),
            });
        }
        Ok(Jet2 { r0: at.0, s0: at.1, shape, coeffs })
    }

    pub fn base(&self) -> (T, T) {
        (self.r0, self.s0)
    }

    pub fn shape(&self) -> JetShape {
        self.shape
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Taylor coefficient `c[i][k]`; zero outside the retained table.
    pub fn coeff(&self, i: usize, k: usize) -> T {
        if i <= self.shape.r_order && k <= self.shape.s_order {
            self.coeffs[self.shape.index(i, k)]
        } else {
            T::zero()
        }
    }

    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    /// `∂_r^i ∂_s^k f(r0, s0)`.
    pub fn derivative(&self, i: usize, k: usize) -> Result<T> {
        if i > self.shape.r_order || k > self.shape.s_order {
            return Err(Error::OrderOutOfRange {
                i,
                k,
                r_order: self.shape.r_order,
                s_order: self.shape.s_order,
            });
        }
        Ok(self.coeff(i, k) * factorial::<T>(i) * factorial::<T>(k))
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                left: self.shape.to_string(),
                right: other.shape.to_string(),
            });
        }
        if self.r0 != other.r0 || self.s0 != other.s0 {
            return Err(Error::BaseMismatch(
                self.r0.as_f64(),
                self.s0.as_f64(),
                other.r0.as_f64(),
                other.s0.as_f64(),
            ));
        }
        Ok(())
    }

    fn with_coeffs(&self, coeffs: Vec<T>) -> Self {
        Jet2 { r0: self.r0, s0: self.s0, shape: self.shape, coeffs }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.with_coeffs(self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| a + b).collect()))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.with_coeffs(self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| a - b).collect()))
    }

    /// Truncated Cauchy product.
    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let sh = self.shape;
        let mut out = vec![T::zero(); sh.len()];
        for i in 0..=sh.r_order {
            for k in 0..=sh.s_order {
                let mut acc = T::zero();
                for p in 0..=i {
                    for q in 0..=k {
                        acc = acc + self.coeffs[sh.index(p, q)] * other.coeffs[sh.index(i - p, k - q)];
                    }
                }
                out[sh.index(i, k)] = acc;
            }
        }
        Ok(self.with_coeffs(out))
    }

    pub fn try_div(&self, other: &Self) -> Result<Self> {
        self.div_eps(other, T::lit(DEFAULT_DIV_EPSILON))
    }

    /// Quotient solved coefficient by coefficient from `a = q * b`.
    pub fn div_eps(&self, other: &Self, eps: T) -> Result<Self> {
        self.check_compatible(other)?;
        let b00 = other.coeffs[0];
        if !(b00.abs() > eps) {
            return Err(Error::DivisionByZero { value: b00.as_f64() });
        }
        let sh = self.shape;
        let mut q = vec![T::zero(); sh.len()];
        for i in 0..=sh.r_order {
            for k in 0..=sh.s_order {
                let mut acc = self.coeffs[sh.index(i, k)];
                for p in 0..=i {
                    for t in 0..=k {
                        if p == 0 && t == 0 {
                            continue;
                        }
                        acc = acc - other.coeffs[sh.index(p, t)] * q[sh.index(i - p, k - t)];
                    }
                }
                q[sh.index(i, k)] = acc / b00;
            }
        }
        Ok(self.with_coeffs(q))
    }

    pub fn recip(&self) -> Result<Self> {
        Self::constant(T::one(), self.base(), self.shape).try_div(self)
    }

    pub fn scale(&self, c: T) -> Self {
        self.with_coeffs(self.coeffs.iter().map(|&a| a * c).collect())
    }

    pub fn add_scalar(&self, c: T) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = out.coeffs[0] + c;
        out
    }

    pub fn sqrt(&self) -> Result<Self> {
        let a00 = self.coeffs[0];
        if !(a00 > T::zero()) {
            return Err(Error::Domain { op: "sqrt", value: a00.as_f64() });
        }
        let sh = self.shape;
        let mut c = vec![T::zero(); sh.len()];
        let c00 = a00.sqrt();
        c[0] = c00;
        let two_c00 = c00 + c00;
        for i in 0..=sh.r_order {
            for k in 0..=sh.s_order {
                if i == 0 && k == 0 {
                    continue;
                }
                let mut acc = self.coeffs[sh.index(i, k)];
                for p in 0..=i {
                    for t in 0..=k {
                        let skip = (p == 0 && t == 0) || (p == i && t == k);
                        if !skip {
                            acc = acc - c[sh.index(p, t)] * c[sh.index(i - p, k - t)];
                        }
                    }
                }
                c[sh.index(i, k)] = acc / two_c00;
            }
        }
        Ok(self.with_coeffs(c))
    }

    /// `outer ∘ self`, by Horner evaluation of the outer Taylor polynomial in
    /// the nilpotent part of `self`.
    pub fn compose(&self, outer: &UnivariateDerivs<T>) -> Result<Self> {
        let degree = self.shape.max_degree();
        if outer.len() < degree + 1 {
            return Err(Error::InsufficientDerivatives { needed: degree + 1, got: outer.len() });
        }
        let taylor = outer.taylor_coeffs();
        let mut nil = self.clone();
        nil.coeffs[0] = T::zero();
        let mut acc = Self::constant(taylor[degree], self.base(), self.shape);
        for j in (0..degree).rev() {
            acc = acc.try_mul(&nil)?.add_scalar(taylor[j]);
        }
        Ok(acc)
    }

    fn degree(&self) -> usize {
        self.shape.max_degree()
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&UnivariateDerivs::new(vec![e; self.degree() + 1]))
            .expect("derivative count matches shape")
    }

    pub fn ln(&self) -> Result<Self> {
        let a = self.value();
        if !(a > T::zero()) {
            return Err(Error::Domain { op: "log", value: a.as_f64() });
        }
        let m = self.degree();
        let mut values = Vec::with_capacity(m + 1);
        values.push(a.ln());
        // d^k/dx^k ln x = (-1)^(k-1) (k-1)! / x^k
        let mut term = a.recip();
        for k in 1..=m {
            values.push(term);
            term = -term * T::from_count(k) / a;
        }
        self.compose(&UnivariateDerivs::new(values))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose(&UnivariateDerivs::new(cyclic(&[s, c, -s, -c], self.degree() + 1)))
            .expect("derivative count matches shape")
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose(&UnivariateDerivs::new(cyclic(&[c, -s, -c, s], self.degree() + 1)))
            .expect("derivative count matches shape")
    }

    pub fn tan(&self) -> Result<Self> {
        self.sin().try_div(&self.cos())
    }

    pub fn sinh(&self) -> Self {
        let a = self.value();
        self.compose(&UnivariateDerivs::new(cyclic(&[a.sinh(), a.cosh()], self.degree() + 1)))
            .expect("derivative count matches shape")
    }

    pub fn cosh(&self) -> Self {
        let a = self.value();
        self.compose(&UnivariateDerivs::new(cyclic(&[a.cosh(), a.sinh()], self.degree() + 1)))
            .expect("derivative count matches shape")
    }

    pub fn atan(&self) -> Self {
        let a = self.value();
        let m = self.degree();
        // 1 / (1 + (a + t)^2) = 1 / (d0 + d1 t + t^2), expanded as a power series in t.
        let d0 = T::one() + a * a;
        let d1 = a + a;
        let mut q = vec![T::zero(); m.max(1)];
        q[0] = d0.recip();
        for j in 1..q.len() {
            let prev2 = if j >= 2 { q[j - 2] } else { T::zero() };
            q[j] = -(d1 * q[j - 1] + prev2) / d0;
        }
        let mut taylor = vec![a.atan()];
        for k in 1..=m {
            taylor.push(q[k - 1] / T::from_count(k));
        }
        self.compose(&UnivariateDerivs::from_taylor(&taylor))
            .expect("derivative count matches shape")
    }

    /// Integer power by repeated squaring; negative powers divide.
    pub fn powi(&self, n: i32) -> Result<Self> {
        let mut base = self.clone();
        let mut acc = Self::constant(T::one(), self.base(), self.shape);
        let mut e = n.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.try_mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.try_mul(&base)?;
            }
        }
        if n < 0 {
            acc.recip()
        } else {
            Ok(acc)
        }
    }

    /// Real power; the base must have a positive constant term.
    pub fn powf(&self, alpha: T) -> Result<Self> {
        let a = self.value();
        if !(a > T::zero()) {
            return Err(Error::Domain { op: "pow", value: a.as_f64() });
        }
        let m = self.degree();
        let mut values = Vec::with_capacity(m + 1);
        let mut falling = T::one();
        for k in 0..=m {
            values.push(falling * a.powf(alpha - T::from_count(k)));
            falling = falling * (alpha - T::from_count(k));
        }
        self.compose(&UnivariateDerivs::new(values))
    }

    /// `∂_s` as a jet one s-order shorter.
    pub fn ds(&self) -> Result<Self> {
        let sh = self.shape;
        if sh.s_order == 0 {
            return Err(Error::ShapeTooSmall("cannot differentiate an s_order 0 jet in s".into()));
        }
        let out_shape = JetShape::new(sh.r_order, sh.s_order - 1);
        let mut out = vec![T::zero(); out_shape.len()];
        for i in 0..=sh.r_order {
            for k in 0..sh.s_order {
                out[out_shape.index(i, k)] = self.coeffs[sh.index(i, k + 1)] * T::from_count(k + 1);
            }
        }
        Ok(Jet2 { r0: self.r0, s0: self.s0, shape: out_shape, coeffs: out })
    }

    /// `∂_r` as a jet one r-order shorter.
    pub fn dr(&self) -> Result<Self> {
        let sh = self.shape;
        if sh.r_order == 0 {
            return Err(Error::ShapeTooSmall("cannot differentiate an r_order 0 jet in r".into()));
        }
        let out_shape = JetShape::new(sh.r_order - 1, sh.s_order);
        let mut out = vec![T::zero(); out_shape.len()];
        for i in 0..sh.r_order {
            for k in 0..=sh.s_order {
                out[out_shape.index(i, k)] = self.coeffs[sh.index(i + 1, k)] * T::from_count(i + 1);
            }
        }
        Ok(Jet2 { r0: self.r0, s0: self.s0, shape: out_shape, coeffs: out })
    }

    /// Row `i` of the table as a univariate s-series: `(1/i!) ∂_r^i f(r0, s)`.
    pub fn row(&self, i: usize) -> Self {
        let sh = self.shape;
        let out_shape = JetShape::s_only(sh.s_order);
        let coeffs = (0..=sh.s_order).map(|k| self.coeff(i, k)).collect();
        Jet2 { r0: self.r0, s0: self.s0, shape: out_shape, coeffs }
    }

    /// Drops coefficients beyond `shape`, which must not exceed the current shape.
    pub fn truncate(&self, shape: JetShape) -> Result<Self> {
        if shape.r_order > self.shape.r_order || shape.s_order > self.shape.s_order {
            return Err(Error::ShapeTooSmall(format!(
                "cannot truncate {} to larger shape {shape}",
                self.shape
            )));
        }
        let mut out = vec![T::zero(); shape.len()];
        for i in 0..=shape.r_order {
            for k in 0..=shape.s_order {
                out[shape.index(i, k)] = self.coeffs[self.shape.index(i, k)];
            }
        }
        Ok(Jet2 { r0: self.r0, s0: self.s0, shape, coeffs: out })
    }

    /// Value of the Taylor polynomial at `(r0 + dr, s0 + ds)`.
    pub fn eval_offset(&self, dr: T, ds: T) -> T {
        let sh = self.shape;
        let mut outer = T::zero();
        for i in (0..=sh.r_order).rev() {
            let mut inner = T::zero();
            for k in (0..=sh.s_order).rev() {
                inner = inner * ds + self.coeffs[sh.index(i, k)];
            }
            outer = outer * dr + inner;
        }
        outer
    }

    /// Splits `f = f(r, s0) + (s - s0) g` and returns `(g, f(r, s0))` for an s-only jet.
    ///
    /// `g` is exact on its retained coefficients, which is what makes removable
    /// singularities of `f / (s - s0)` computable at `s = s0`.
    pub fn deflate_s(&self) -> Result<(Self, T)> {
        let sh = self.shape;
        if sh.s_order == 0 {
            return Err(Error::ShapeTooSmall("cannot deflate an s_order 0 jet".into()));
        }
        let out_shape = JetShape::new(sh.r_order, sh.s_order - 1);
        let mut out = vec![T::zero(); out_shape.len()];
        for i in 0..=sh.r_order {
            for k in 0..sh.s_order {
                out[out_shape.index(i, k)] = self.coeffs[sh.index(i, k + 1)];
            }
        }
        let jet = Jet2 { r0: self.r0, s0: self.s0, shape: out_shape, coeffs: out };
        Ok((jet, self.coeffs[0]))
    }

    pub fn max_abs(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |m, c| m.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

fn cyclic<T: Copy>(pattern: &[T], len: usize) -> Vec<T> {
    pattern.iter().copied().cycle().take(len).collect()
}

pub(crate) fn factorial<T: Scalar>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::from_count(k))
}

// Operator sugar. Binary operators between jets panic on shape or base
// mismatch; use the `try_*` methods when operands come from outside.

impl<T: Scalar> Add for &Jet2<T> {
    type Output = Jet2<T>;
    fn add(self, rhs: &Jet2<T>) -> Jet2<T> {
        self.try_add(rhs).expect("jet addition with mismatched operands")
    }
}

impl<T: Scalar> Sub for &Jet2<T> {
    type Output = Jet2<T>;
    fn sub(self, rhs: &Jet2<T>) -> Jet2<T> {
        self.try_sub(rhs).expect("jet subtraction with mismatched operands")
    }
}

impl<T: Scalar> Mul for &Jet2<T> {
    type Output = Jet2<T>;
    fn mul(self, rhs: &Jet2<T>) -> Jet2<T> {
        self.try_mul(rhs).expect("jet multiplication with mismatched operands")
    }
}

impl<T: Scalar> Neg for &Jet2<T> {
    type Output = Jet2<T>;
    fn neg(self) -> Jet2<T> {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Neg for Jet2<T> {
    type Output = Jet2<T>;
    fn neg(self) -> Jet2<T> {
        self.scale(-T::one())
    }
}

macro_rules! owned_binop {
    ($tr:ident, $m:ident) => {
        impl<T: Scalar> $tr for Jet2<T> {
            type Output = Jet2<T>;
            fn $m(self, rhs: Jet2<T>) -> Jet2<T> {
                (&self).$m(&rhs)
            }
        }
        impl<T: Scalar> $tr<&Jet2<T>> for Jet2<T> {
            type Output = Jet2<T>;
            fn $m(self, rhs: &Jet2<T>) -> Jet2<T> {
                (&self).$m(rhs)
            }
        }
        impl<T: Scalar> $tr<Jet2<T>> for &Jet2<T> {
            type Output = Jet2<T>;
            fn $m(self, rhs: Jet2<T>) -> Jet2<T> {
                self.$m(&rhs)
            }
        }
    };
}

owned_binop!(Add, add);
owned_binop!(Sub, sub);
owned_binop!(Mul, mul);

impl<T: Scalar> Add<T> for &Jet2<T> {
    type Output = Jet2<T>;
    fn add(self, rhs: T) -> Jet2<T> {
        self.add_scalar(rhs)
    }
}

impl<T: Scalar> Add<T> for Jet2<T> {
    type Output = Jet2<T>;
    fn add(self, rhs: T) -> Jet2<T> {
        self.add_scalar(rhs)
    }
}

impl<T: Scalar> Sub<T> for &Jet2<T> {
    type Output = Jet2<T>;
    fn sub(self, rhs: T) -> Jet2<T> {
        self.add_scalar(-rhs)
    }
}

impl<T: Scalar> Sub<T> for Jet2<T> {
    type Output = Jet2<T>;
    fn sub(self, rhs: T) -> Jet2<T> {
        self.add_scalar(-rhs)
    }
}

impl<T: Scalar> Mul<T> for &Jet2<T> {
    type Output = Jet2<T>;
    fn mul(self, rhs: T) -> Jet2<T> {
        self.scale(rhs)
    }
}

impl<T: Scalar> Mul<T> for Jet2<T> {
    type Output = Jet2<T>;
    fn mul(self, rhs: T) -> Jet2<T> {
        self.scale(rhs)
    }
}

impl<T: Scalar> Div<T> for &Jet2<T> {
    type Output = Jet2<T>;
    fn div(self, rhs: T) -> Jet2<T> {
        self.scale(rhs.recip())
    }
}

impl<T: Scalar> Div<T> for Jet2<T> {
    type Output = Jet2<T>;
    fn div(self, rhs: T) -> Jet2<T> {
        self.scale(rhs.recip())
    }
}

macro_rules! scalar_lhs {
    ($t:ty) => {
        impl Mul<Jet2<$t>> for $t {
            type Output = Jet2<$t>;
            fn mul(self, rhs: Jet2<$t>) -> Jet2<$t> {
                rhs.scale(self)
            }
        }
        impl Mul<&Jet2<$t>> for $t {
            type Output = Jet2<$t>;
            fn mul(self, rhs: &Jet2<$t>) -> Jet2<$t> {
                rhs.scale(self)
            }
        }
        impl Add<Jet2<$t>> for $t {
            type Output = Jet2<$t>;
            fn add(self, rhs: Jet2<$t>) -> Jet2<$t> {
                rhs.add_scalar(self)
            }
        }
        impl Sub<Jet2<$t>> for $t {
            type Output = Jet2<$t>;
            fn sub(self, rhs: Jet2<$t>) -> Jet2<$t> {
                rhs.scale(-1.0).add_scalar(self)
            }
        }
    };
}

scalar_lhs!(f32);
scalar_lhs!(f64);

#[cfg(test)]
mod tests {
    use super::*;

    const SH: JetShape = JetShape::DEFAULT;

    fn s_at(r0: f64, s0: f64) -> Jet2<f64> {
        Jet2::var_s(r0, s0, SH).unwrap()
    }

    fn r_at(r0: f64, s0: f64) -> Jet2<f64> {
        Jet2::var_r(r0, s0, SH).unwrap()
    }

    #[test]
    fn constants_and_seeds() {
        let c = Jet2::constant(1.0, (2.0, 0.5), SH);
        assert_eq!(c.coeff(0, 0), 1.0);
        assert!(c.coeffs()[1..].iter().all(|&v| v == 0.0));
        assert!(Jet2::zero((2.0, 0.5), SH).coeffs().iter().all(|&v| v == 0.0));
        let pi = Jet2::constant(std::f64::consts::PI, (0.0, 0.0), SH);
        assert_eq!(pi.value(), std::f64::consts::PI);

        let r = r_at(2.0, 0.5);
        assert_eq!((r.coeff(0, 0), r.coeff(1, 0)), (2.0, 1.0));
        let s = s_at(2.0, 0.5);
        assert_eq!((s.coeff(0, 0), s.coeff(0, 1)), (0.5, 1.0));
        let s0 = s_at(0.0, 0.0);
        assert_eq!((s0.coeff(0, 0), s0.coeff(0, 1)), (0.0, 1.0));
    }

    #[test]
    fn seeds_need_room() {
        assert!(matches!(
            Jet2::<f64>::var_r(1.0, 0.0, JetShape::s_only(3)),
            Err(Error::ShapeTooSmall(_))
        ));
        assert!(Jet2::<f64>::var_s(1.0, 0.0, JetShape::new(2, 0)).is_err());
    }

    #[test]
    fn binomial_square() {
        let one_plus_s = s_at(0.0, 0.0) + 1.0;
        let sq = &one_plus_s * &one_plus_s;
        assert_eq!(sq.coeff(0, 0), 1.0);
        assert_eq!(sq.coeff(0, 1), 2.0);
        assert_eq!(sq.coeff(0, 2), 1.0);
        assert_eq!(sq.coeff(0, 3), 0.0);
        let zero = Jet2::zero((0.0, 0.0), SH);
        assert!((&sq * &zero).coeffs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn polynomial_expansion_r2_minus_s2() {
        let shape = JetShape::new(2, 6);
        let r = Jet2::var_r(1.0, 0.5, shape).unwrap();
        let s = Jet2::var_s(1.0, 0.5, shape).unwrap();
        let f = &r * &r - &s * &s;
        assert_eq!(f.coeff(0, 0), 0.75);
        assert_eq!(f.coeff(1, 0), 2.0);
        assert_eq!(f.coeff(2, 0), 1.0);
        assert_eq!(f.coeff(0, 1), -1.0);
        assert_eq!(f.coeff(0, 2), -1.0);
    }

    #[test]
    fn mismatched_operands_are_errors() {
        let a = s_at(1.0, 0.5);
        let b = s_at(1.0, 0.25);
        assert!(matches!(a.try_add(&b), Err(Error::BaseMismatch(..))));
        let c = Jet2::var_s(1.0, 0.5, JetShape::new(1, 4)).unwrap();
        assert!(matches!(a.try_mul(&c), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn geometric_series() {
        let one = Jet2::constant(1.0, (0.0, 0.0), SH);
        let q = one.try_div(&(1.0 - s_at(0.0, 0.0))).unwrap();
        for k in 0..=6 {
            assert_eq!(q.coeff(0, k), 1.0);
        }
        assert_eq!(q.coeff(1, 0), 0.0);
    }

    #[test]
    fn self_division_is_one() {
        let a = (r_at(1.3, 0.2) * 2.0 + s_at(1.3, 0.2).exp()).sin() + 3.0;
        let q = a.try_div(&a).unwrap();
        assert!((q.value() - 1.0).abs() < 1e-15);
        assert!(q.coeffs()[1..].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn near_zero_divisor_reports_value() {
        let a = Jet2::constant(1.0, (1.0, 0.0), SH);
        let b = Jet2::constant(1e-13, (1.0, 0.0), SH);
        match a.try_div(&b) {
            Err(Error::DivisionByZero { value }) => assert_eq!(value, 1e-13),
            other => panic!("unexpected {other:?}"),
        }
        assert!(a.div_eps(&b, 1e-14).is_ok());
    }

    #[test]
    fn sqrt_cases() {
        let four = Jet2::constant(4.0, (0.0, 0.0), SH);
        assert_eq!(four.sqrt().unwrap(), Jet2::constant(2.0, (0.0, 0.0), SH));
        let root = (s_at(0.0, 0.0) + 1.0).sqrt().unwrap();
        let expected = [1.0, 0.5, -0.125, 0.0625, -0.0390625];
        for (k, e) in expected.iter().enumerate() {
            assert!((root.coeff(0, k) - e).abs() < 1e-15, "k = {k}");
        }
        let neg = Jet2::constant(-1.0, (0.0, 0.0), SH);
        assert!(matches!(neg.sqrt(), Err(Error::Domain { op: "sqrt", .. })));
        assert!(Jet2::zero((0.0, 0.0), SH).sqrt().is_err());
    }

    #[test]
    fn composition_basics() {
        let z = Jet2::zero((0.0, 0.0), SH);
        assert_eq!(z.exp(), Jet2::constant(1.0, (0.0, 0.0), SH));
        let e = s_at(0.0, 0.0).exp();
        let mut fact = 1.0;
        for k in 0..=6 {
            if k > 0 {
                fact *= k as f64;
            }
            assert!((e.coeff(0, k) - 1.0 / fact).abs() < 1e-16);
        }
        // affine outer: psi(t) = 1 + t
        let r = r_at(1.0, 0.5);
        let s = s_at(1.0, 0.5);
        let inner = (&s * &s).try_div(&(&r * &r)).unwrap();
        let mut derivs = vec![0.0; SH.max_degree() + 1];
        derivs[0] = 1.0 + inner.value();
        derivs[1] = 1.0;
        let composed = inner.compose(&UnivariateDerivs::new(derivs)).unwrap();
        let direct = inner.add_scalar(1.0);
        for (a, b) in composed.coeffs().iter().zip(direct.coeffs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn composition_needs_enough_derivatives() {
        let s = s_at(0.0, 0.0);
        let err = s.compose(&UnivariateDerivs::new(vec![1.0; 3])).unwrap_err();
        assert_eq!(err, Error::InsufficientDerivatives { needed: 8, got: 3 });
    }

    #[test]
    fn extraction_scales_by_factorials() {
        let s = s_at(1.0, 0.0);
        let r = r_at(1.0, 0.0);
        assert_eq!((&s * &s).derivative(0, 2).unwrap(), 2.0);
        assert_eq!(Jet2::constant(5.0, (1.0, 0.0), SH).derivative(1, 0).unwrap(), 0.0);
        let rs = Jet2::var_r(0.0, 0.0, SH).unwrap() * Jet2::var_s(0.0, 0.0, SH).unwrap();
        assert_eq!(rs.derivative(1, 1).unwrap(), 1.0);
        assert!(matches!(r.derivative(2, 0), Err(Error::OrderOutOfRange { .. })));
        assert!(s.derivative(0, 7).is_err());
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let s = s_at(0.0, 0.3);
        let x = 0.3f64;
        assert!((s.ln().unwrap().derivative(0, 3).unwrap() - 2.0 / x.powi(3)).abs() < 1e-12);
        assert!((s.sin().derivative(0, 5).unwrap() - x.cos()).abs() < 1e-15);
        assert!((s.cos().derivative(0, 2).unwrap() + x.cos()).abs() < 1e-15);
        let sec2 = 1.0 / x.cos().powi(2);
        assert!((s.tan().unwrap().derivative(0, 1).unwrap() - sec2).abs() < 1e-14);
        assert!((s.tan().unwrap().derivative(0, 2).unwrap() - 2.0 * sec2 * x.tan()).abs() < 1e-13);
        assert!((s.sinh().derivative(0, 3).unwrap() - x.cosh()).abs() < 1e-15);
        assert!((s.cosh().derivative(0, 4).unwrap() - x.cosh()).abs() < 1e-15);
        let d = 1.0 + x * x;
        assert!((s.atan().derivative(0, 1).unwrap() - 1.0 / d).abs() < 1e-15);
        assert!((s.atan().derivative(0, 2).unwrap() + 2.0 * x / (d * d)).abs() < 1e-15);
        let exact3 = (6.0 * x * x - 2.0) / d.powi(3);
        assert!((s.atan().derivative(0, 3).unwrap() - exact3).abs() < 1e-14);
        assert!((s.powf(1.5).unwrap().derivative(0, 2).unwrap() - 0.75 / x.sqrt()).abs() < 1e-13);
        let cube = s.powi(3).unwrap();
        assert!((cube.derivative(0, 3).unwrap() - 6.0).abs() < 1e-14);
        let inv = s.powi(-2).unwrap();
        assert!((inv.derivative(0, 1).unwrap() + 2.0 / x.powi(3)).abs() < 1e-11);
    }

    #[test]
    fn derivative_jets_shift_tables() {
        let r = r_at(1.0, 0.5);
        let s = s_at(1.0, 0.5);
        let f = &(&r * &s) * &s; // r s^2
        let fs = f.ds().unwrap();
        assert_eq!(fs.shape(), JetShape::new(1, 5));
        assert!((fs.value() - 1.0).abs() < 1e-15); // 2 r s
        assert!((fs.derivative(1, 0).unwrap() - 1.0).abs() < 1e-15); // 2 s
        let fr = f.dr().unwrap();
        assert!((fr.value() - 0.25).abs() < 1e-15);
        let row1 = f.row(1);
        assert_eq!(row1.shape(), JetShape::s_only(6));
        assert!((row1.value() - 0.25).abs() < 1e-15);
        assert!((row1.derivative(0, 1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn deflation_removes_root() {
        // f(s) = s^2 + 3 s at s0 = 0, so f / s = s + 3
        let s = Jet2::var_s(1.0f64, 0.0, JetShape::s_only(6)).unwrap();
        let f = &s * &s + s.scale(3.0);
        let (g, c0) = f.deflate_s().unwrap();
        assert_eq!(c0, 0.0);
        assert_eq!(g.value(), 3.0);
        assert!((g.eval_offset(0.0, 0.1) - 3.1).abs() < 1e-15);
    }

    #[test]
    fn works_in_single_precision() {
        let s = Jet2::<f32>::var_s(1.0, 0.5, SH).unwrap();
        let q = (s.clone() + 1.0f32).sqrt().unwrap();
        let back = &q * &q;
        assert!((back.value() - 1.5).abs() < 1e-6);
        assert!((back.coeff(0, 1) - 1.0).abs() < 1e-6);
    }
}
