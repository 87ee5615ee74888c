//! Metric, spray and curvature of `F = u φ(r, s)` at a configuration `(x, y)`.
//!
//! Indices are lowered with the Euclidean metric, so `x_i = x^i` and
//! `y_i = y^i`; `r = |x|`, `u = |y|`, `s = ⟨x, y⟩ / u`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jets::{Jet2, JetShape, DEFAULT_DIV_EPSILON};
use crate::phi::PhiModel;
use crate::scalar::Scalar;

pub const MAX_DIM: usize = 8;
/// Below this |s| the `H_s / s` factor is taken as a jet limit.
pub const DEFAULT_S_JET_SWITCH: f64 = 1e-3;

// ---------------------------------------------------------------------------
// Configurations and tensors

#[derive(Debug, Clone, PartialEq)]
pub struct Config<T> {
    x: Vec<T>,
    y: Vec<T>,
}

impl<T: Scalar> Config<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        let n = x.len();
        if y.len() != n {
            return Err(Error::InvalidConfig(format!("x has {n} components, y has {}", y.len())));
        }
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::InvalidConfig(format!("dimension must be in 2..={MAX_DIM}, got {n}")));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite coordinate".into()));
        }
        let cfg = Config { x, y };
        if !(cfg.u() > T::zero()) {
            return Err(Error::InvalidConfig("y must be nonzero".into()));
        }
        if !(cfg.r() > T::zero()) {
            return Err(Error::InvalidConfig("x must be nonzero".into()));
        }
        Ok(cfg)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn r(&self) -> T {
        dot(&self.x, &self.x).sqrt()
    }

    pub fn u(&self) -> T {
        dot(&self.y, &self.y).sqrt()
    }

    pub fn s(&self) -> T {
        dot(&self.x, &self.y) / self.u()
    }

    /// Same base point, direction scaled by `lambda`.
    pub fn scale_y(&self, lambda: T) -> Result<Self> {
        Config::new(self.x.clone(), self.y.iter().map(|&v| v * lambda).collect())
    }

    pub fn with_y(&self, y: Vec<T>) -> Result<Self> {
        Config::new(self.x.clone(), y)
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&p, &q)| p * q).sum()
}

fn delta<T: Scalar>(i: usize, j: usize) -> T {
    if i == j {
        T::one()
    } else {
        T::zero()
    }
}

/// Dense symmetric `n × n` table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sym2<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Sym2<T> {
    pub fn zeros(n: usize) -> Self {
        Sym2 { n, data: vec![T::zero(); n * n] }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Sym2 { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        Sym2::from_fn(n, |i, j| (0..n).map(|k| self.get(i, k) * other.get(k, j)).sum())
    }
}

/// Dense `n⁴` table of `G^i_{jkl}`, indexed `[i][j][k][l]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rank4<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Rank4<T> {
    pub fn zeros(n: usize) -> Self {
        Rank4 { n, data: vec![T::zero(); n * n * n * n] }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n.pow(4));
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        data.push(f(i, j, k, l));
                    }
                }
            }
        }
        Rank4 { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> T {
        self.data[((i * self.n + j) * self.n + k) * self.n + l]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `[i, j, k, l]` for a flat row-major index.
    pub fn unflatten(&self, idx: usize) -> [usize; 4] {
        let n = self.n;
        [idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n]
    }
}

// ---------------------------------------------------------------------------
// φ-side scalars

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricScalars<T> {
    pub sigma0: T,
    pub sigma1: T,
    pub sigma2: T,
    pub sigma3: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InverseScalars<T> {
    pub rho0: T,
    pub rho1: T,
    pub rho2: T,
    pub rho3: T,
}

// φ, φ_s, φ_ss at the jet's base point
fn phi_s_derivs<T: Scalar>(phi: &Jet2<T>) -> Result<(T, T, T)> {
    Ok((phi.value(), phi.derivative(0, 1)?, phi.derivative(0, 2)?))
}

fn nonsingular<T: Scalar>(what: &'static str, v: T) -> Result<T> {
    if v.abs() > T::lit(DEFAULT_DIV_EPSILON) {
        Ok(v)
    } else {
        Err(Error::SingularMetric { what, value: v.as_f64() })
    }
}

pub fn metric_scalars<T: Scalar>(phi: &Jet2<T>) -> Result<MetricScalars<T>> {
    let (_, s) = phi.base();
    let (f, fs, fss) = phi_s_derivs(phi)?;
    let a1 = f - s * fs;
    Ok(MetricScalars {
        sigma0: f * a1,
        sigma1: fs * fs + f * fss,
        sigma2: a1 * fs - s * f * fss,
        sigma3: s * s * f * fss - s * a1 * fs,
    })
}

pub fn inverse_scalars<T: Scalar>(phi: &Jet2<T>) -> Result<InverseScalars<T>> {
    let (r, s) = phi.base();
    let (f, fs, fss) = phi_s_derivs(phi)?;
    let f = nonsingular("phi", f)?;
    let a1 = nonsingular("phi - s phi_s", f - s * fs)?;
    let a2 = nonsingular("phi - s phi_s + (r^2 - s^2) phi_ss", a1 + (r * r - s * s) * fss)?;
    let m = f * fs - s * fs * fs - s * f * fss;
    Ok(InverseScalars {
        rho0: (f * a1).recip(),
        rho1: (s * f + (r * r - s * s) * fs) * m / (f * f * f * a1 * a2),
        rho2: -m / (f * f * a1 * a2),
        rho3: -fss / (f * a1 * a2),
    })
}

fn check_base<T: Scalar>(phi: &Jet2<T>, cfg: &Config<T>) -> Result<()> {
    let (r, s) = phi.base();
    let tol = T::lit(1e-9) * (T::one() + r.abs());
    if (r - cfg.r()).abs() > tol || (s - cfg.s()).abs() > tol {
        return Err(Error::BaseMismatch(r.as_f64(), s.as_f64(), cfg.r().as_f64(), cfg.s().as_f64()));
    }
    Ok(())
}

pub fn metric<T: Scalar>(phi: &Jet2<T>, cfg: &Config<T>) -> Result<Sym2<T>> {
    check_base(phi, cfg)?;
    let sc = metric_scalars(phi)?;
    nonsingular("phi (phi - s phi_s)", sc.sigma0)?;
    let (x, y, u) = (cfg.x(), cfg.y(), cfg.u());
    Ok(Sym2::from_fn(cfg.n(), |i, j| {
        sc.sigma0 * delta(i, j)
            + sc.sigma1 * x[i] * x[j]
            + sc.sigma2 / u * (x[i] * y[j] + x[j] * y[i])
            + sc.sigma3 / (u * u) * y[i] * y[j]
    }))
}

pub fn inverse_metric<T: Scalar>(phi: &Jet2<T>, cfg: &Config<T>) -> Result<Sym2<T>> {
    check_base(phi, cfg)?;
    let rho = inverse_scalars(phi)?;
    let (x, y, u) = (cfg.x(), cfg.y(), cfg.u());
    Ok(Sym2::from_fn(cfg.n(), |i, j| {
        rho.rho0 * delta(i, j)
            + rho.rho1 / (u * u) * y[i] * y[j]
            + rho.rho2 / u * (x[i] * y[j] + x[j] * y[i])
            + rho.rho3 * x[i] * x[j]
    }))
}

// ---------------------------------------------------------------------------
// Spray

/// s-jets of `P` and `Q` at `(r, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SprayJets<T> {
    r: T,
    s: T,
    p: Jet2<T>,
    q: Jet2<T>,
}

impl<T: Scalar> SprayJets<T> {
    /// Wraps s-only jets; `P` must reach order 3 and `Q` order 4.
    pub fn new(r: T, s: T, p: Jet2<T>, q: Jet2<T>) -> Result<Self> {
        if p.shape().s_order < 3 || q.shape().s_order < 4 {
            return Err(Error::ShapeTooSmall(format!(
                "spray jets need P to order 3 and Q to order 4, got {} and {}",
                p.shape().s_order,
                q.shape().s_order
            )));
        }
        Ok(SprayJets { r, s, p, q })
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn s(&self) -> T {
        self.s
    }

    pub fn p_jet(&self) -> &Jet2<T> {
        &self.p
    }

    pub fn q_jet(&self) -> &Jet2<T> {
        &self.q
    }

    /// `∂_s^k P`; orders beyond the retained ones read as 0.
    pub fn p(&self, k: usize) -> T {
        self.p.derivative(0, k).unwrap_or_else(|_| T::zero())
    }

    pub fn q(&self, k: usize) -> T {
        self.q.derivative(0, k).unwrap_or_else(|_| T::zero())
    }
}

// P and Q as s-series of order s_order - 2 from a φ-jet with r_order >= 1.
fn pq_series<T: Scalar>(phi: &Jet2<T>) -> Result<(Jet2<T>, Jet2<T>)> {
    let sh = phi.shape();
    if sh.r_order < 1 || sh.s_order < 2 {
        return Err(Error::ShapeTooSmall(format!("spray needs r_order >= 1 and s_order >= 2, got {sh}")));
    }
    let (r, s) = phi.base();
    let out = JetShape::s_only(sh.s_order - 2);
    let f = phi.row(0);
    let fr = phi.row(1);
    let fs = f.ds()?;
    let fss = fs.ds()?.truncate(out)?;
    let frs = fr.ds()?.truncate(out)?;
    let (f, fr, fs) = (f.truncate(out)?, fr.truncate(out)?, fs.truncate(out)?);
    let (_, sj) = Jet2::seeds(r, s, out);
    let r2_s2 = (&sj * &sj) * -T::one() + r * r;
    let two_r = r + r;

    let d = &(&f - &(&sj * &fs)) + &(&r2_s2 * &fss);
    nonsingular("phi - s phi_s + (r^2 - s^2) phi_ss", d.value())?;
    nonsingular("phi", f.value())?;
    let q_num = &(&(&sj * &frs) - &fr) + &(&fss * r);
    let q = q_num.try_div(&(&d * two_r))?;
    let p = &(&q * -T::one()).try_div(&f)?.try_mul(&(&(&sj * &f) + &(&r2_s2 * &fs)))?
        + &(&(&sj * &fr) + &(&fs * r)).try_div(&(&f * two_r))?;
    Ok((p, q))
}

/// `P`, `Q` and their s-derivatives from a φ-jet (default shape or deeper).
pub fn spray_pq<T: Scalar>(phi: &Jet2<T>) -> Result<SprayJets<T>> {
    let (r, s) = phi.base();
    let (p, q) = pq_series(phi)?;
    SprayJets::new(r, s, p, q)
}

/// Values of `P` and `Q` only; needs a φ-jet of shape at least (1, 2).
pub fn spray_pq_values<T: Scalar>(phi: &Jet2<T>) -> Result<(T, T)> {
    let (p, q) = pq_series(phi)?;
    Ok((p.value(), q.value()))
}

/// `G^i = u P y^i + u² Q x^i`.
pub fn spray_coeffs<T: Scalar>(pq: &SprayJets<T>, cfg: &Config<T>) -> Vec<T> {
    spray_from_values(pq.p(0), pq.q(0), cfg)
}

pub fn spray_from_values<T: Scalar>(p: T, q: T, cfg: &Config<T>) -> Vec<T> {
    let u = cfg.u();
    cfg.y().iter().zip(cfg.x()).map(|(&yi, &xi)| u * p * yi + u * u * q * xi).collect()
}

// ---------------------------------------------------------------------------
// Berwald curvature

/// `G^i_{jkl}` assembled term group by term group.
pub fn berwald_curvature<T: Scalar>(pq: &SprayJets<T>, cfg: &Config<T>) -> Rank4<T> {
    let n = cfg.n();
    let (x, y) = (cfg.x(), cfg.y());
    let (u, s) = (cfg.u(), cfg.s());
    let [p0, p1, p2, p3] = [pq.p(0), pq.p(1), pq.p(2), pq.p(3)];
    let [q1, q2, q3] = [pq.q(1), pq.q(2), pq.q(3)];
    let (u2, u3) = (u * u, u * u * u);
    let (u4, u5) = (u3 * u, u3 * u2);
    let (s2, s3) = (s * s, s * s * s);
    let three = T::lit(3.0);
    let six = T::lit(6.0);

    // scalar coefficients of the term groups
    let k_pss = p2 / u;
    let k_p = (p0 - s * p1) / u;
    let k_spss = s * p2 / u2;
    let k_q = (q1 - s * q2) / u;
    let k_yy = (s2 * p2 + s * p1 - p0) / u3;
    let k_yyyy = (three * p0 - s3 * p3 - six * s2 * p2 - three * s * p1) / u5;
    let k_xxxy = p3 / u2;
    let k_yyxy = (s2 * p3 + three * s * p2) / u4;
    let k_yxxy = (p2 + s * p3) / u3;
    let k_xxxx = q3 / u;
    let k_xyyx = (s2 * q3 + s * q2 - q1) / u3;
    let k_xxyx = s * q3 / u2;
    let k_yyyx = (three * s * q1 - three * s2 * q2 - s3 * q3) / u4;
    let k_dyx = (s2 * q2 - s * q1) / u2;

    Rank4::from_fn(n, |i, j, k, l| {
        let d = delta::<T>;
        let sym_dxx = d(i, j) * x[k] * x[l] + d(i, l) * x[j] * x[k] + d(i, k) * x[j] * x[l];
        let sym_dd = d(i, j) * d(k, l) + d(i, k) * d(j, l) + d(i, l) * d(j, k);
        let sym_dxy = d(i, j) * (x[k] * y[l] + x[l] * y[k])
            + d(i, k) * (x[j] * y[l] + x[l] * y[j])
            + d(i, l) * (x[j] * y[k] + x[k] * y[j]);
        let sym_ddx = d(j, k) * x[l] + d(j, l) * x[k] + d(k, l) * x[j];
        let sym_dyy = d(i, j) * y[k] * y[l] + d(i, k) * y[j] * y[l] + d(i, l) * y[j] * y[k];
        let sym_ddy = d(j, k) * y[l] + d(j, l) * y[k] + d(k, l) * y[j];
        let yyy = y[j] * y[k] * y[l];
        let xxx = x[j] * x[k] * x[l];
        let yyx = y[j] * y[k] * x[l] + y[j] * y[l] * x[k] + y[k] * y[l] * x[j];
        let yxx = y[j] * x[k] * x[l] + y[k] * x[j] * x[l] + y[l] * x[j] * x[k];

        k_pss * sym_dxx + k_p * sym_dd - k_spss * sym_dxy - k_spss * sym_ddx * y[i]
            + k_q * sym_ddx * x[i]
            + k_yy * (sym_dyy + sym_ddy * y[i])
            + k_yyyy * yyy * y[i]
            + k_xxxy * xxx * y[i]
            + k_yyxy * yyx * y[i]
            - k_yxxy * yxx * y[i]
            + k_xxxx * xxx * x[i]
            + k_xyyx * yyx * x[i]
            - k_xxyx * yxx * x[i]
            + k_yyyx * yyy * x[i]
            + k_dyx * sym_ddy * x[i]
    })
}

/// `E_jk = G^h_{jkh}`.
pub fn berwald_trace<T: Scalar>(b: &Rank4<T>) -> Sym2<T> {
    let n = b.n();
    Sym2::from_fn(n, |j, k| (0..n).map(|h| b.get(h, j, k, h)).sum())
}

/// Mean Berwald curvature from its four displayed term groups.
pub fn mean_berwald_direct<T: Scalar>(pq: &SprayJets<T>, cfg: &Config<T>) -> Sym2<T> {
    let n1 = T::from_count(cfg.n() + 1);
    let (x, y) = (cfg.x(), cfg.y());
    let (r, u, s) = (cfg.r(), cfg.u(), cfg.s());
    let [p0, p1, p2] = [pq.p(0), pq.p(1), pq.p(2)];
    let [q1, q2, q3] = [pq.q(1), pq.q(2), pq.q(3)];
    let (r2, s2) = (r * r, s * s);
    let three = T::lit(3.0);

    let c_delta = (n1 * (p0 - s * p1) + (r2 - s2) * (q1 - s * q2)) / u;
    let c_yy = (n1 * (s2 * p2 + s * p1 - p0) + r2 * (s2 * q3 + s * q2 - q1) + three * s2 * q1
        - three * s2 * s * q2
        - s2 * s2 * q3)
        / (u * u * u);
    let bracket = n1 * p2 + T::lit(2.0) * (q1 - s * q2) + (r2 - s2) * q3;
    let c_xx = bracket / u;
    let c_xy = -s * bracket / (u * u);
    Sym2::from_fn(cfg.n(), |i, j| {
        c_delta * delta(i, j) + c_yy * y[i] * y[j] + c_xx * x[i] * x[j] + c_xy * (x[i] * y[j] + x[j] * y[i])
    })
}

// ---------------------------------------------------------------------------
// H, K and the H_s / s factor

/// `H` and `K` as s-jets for dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarJets<T> {
    pub n: usize,
    pub r: T,
    pub s: T,
    pub h: Jet2<T>,
    pub k: Jet2<T>,
}

impl<T: Scalar> ScalarJets<T> {
    pub fn h(&self, k: usize) -> T {
        self.h.derivative(0, k).unwrap_or_else(|_| T::zero())
    }

    pub fn k(&self, k: usize) -> T {
        self.k.derivative(0, k).unwrap_or_else(|_| T::zero())
    }
}

pub fn scalar_hk<T: Scalar>(pq: &SprayJets<T>, n: usize) -> Result<ScalarJets<T>> {
    let (r, s) = (pq.r(), pq.s());
    let (p, q) = (pq.p_jet(), pq.q_jet());
    let po = p.shape().s_order;
    let qo = q.shape().s_order;
    if po < 3 || qo < 4 {
        return Err(Error::ShapeTooSmall(format!("H needs P to order 3 and Q to order 4, got {po} and {qo}")));
    }
    let h_shape = JetShape::s_only((po - 1).min(qo - 2));
    let k_shape = JetShape::s_only((po - 2).min(qo - 2));
    let ps = p.ds()?;
    let pss = ps.ds()?;
    let qs = q.ds()?;
    let qss = qs.ds()?;

    let build = |shape: JetShape, with_h: bool| -> Result<Jet2<T>> {
        let (_, sj) = Jet2::seeds(r, s, shape);
        let qs = qs.truncate(shape)?;
        let qss = qss.truncate(shape)?;
        let q_part = &qs - &(&sj * &qss);
        if with_h {
            let p_part = &p.truncate(shape)? - &(&sj * &ps.truncate(shape)?);
            let r2_s2 = (&sj * &sj) * -T::one() + r * r;
            Ok(&(&p_part * T::from_count(n + 1)) + &(&r2_s2 * &q_part))
        } else {
            Ok(&pss.truncate(shape)? - &q_part)
        }
    };
    Ok(ScalarJets { n, r, s, h: build(h_shape, true)?, k: build(k_shape, false)? })
}

/// `H_s / s` at the base point, with the removable case at small |s| handled
/// by re-expanding `H_s` about `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HsOverS<T> {
    pub value: T,
    pub jet_limit: bool,
    /// `H_s(r, 0)` reconstructed from the jet (only meaningful when `jet_limit`).
    pub hs_at_zero: T,
    /// False when `H_s(r, 0) ≠ 0`, i.e. the factor blows up at `s = 0`.
    pub removable: bool,
}

pub fn hs_over_s<T: Scalar>(h: &Jet2<T>, switch: T) -> Result<HsOverS<T>> {
    let (_, s0) = h.base();
    let hs = h.ds()?;
    let m = hs.shape().s_order;
    let c: Vec<T> = (0..=m).map(|k| hs.coeff(0, k)).collect();
    if s0.abs() >= switch {
        return Ok(HsOverS { value: c[0] / s0, jet_limit: false, hs_at_zero: T::zero(), removable: true });
    }
    // H_s(s) = Σ c_k (s - s0)^k, so H_s(0) = Σ c_k (-s0)^k and
    // (H_s(s0) - H_s(0)) / s0 = Σ_{k≥1} c_k (-1)^{k+1} s0^{k-1}.
    let mut at_zero = T::zero();
    let mut limit = T::zero();
    let mut pow = T::one();
    for (k, &ck) in c.iter().enumerate() {
        let sign = if k % 2 == 0 { T::one() } else { -T::one() };
        at_zero = at_zero + ck * sign * pow;
        pow = pow * s0;
    }
    let mut pow = T::one();
    for (k, &ck) in c.iter().enumerate().skip(1) {
        let sign = if k % 2 == 1 { T::one() } else { -T::one() };
        limit = limit + ck * sign * pow;
        pow = pow * s0;
    }
    let scale = c.iter().fold(T::one(), |mx, v| mx.max(v.abs()));
    let removable = at_zero.abs() <= T::lit(1e-8) * scale;
    let value = if removable { limit } else { c[0] / s0 };
    Ok(HsOverS { value, jet_limit: true, hs_at_zero: at_zero, removable })
}

/// Mean Berwald curvature rebuilt from `H` and `H_s`.
pub fn mean_berwald_h<T: Scalar>(scalars: &ScalarJets<T>, cfg: &Config<T>) -> Result<Sym2<T>> {
    Ok(mean_berwald_h_detailed(scalars, cfg, T::lit(DEFAULT_S_JET_SWITCH))?.0)
}

pub fn mean_berwald_h_detailed<T: Scalar>(
    scalars: &ScalarJets<T>,
    cfg: &Config<T>,
    switch: T,
) -> Result<(Sym2<T>, HsOverS<T>)> {
    let (x, y) = (cfg.x(), cfg.y());
    let (u, s) = (cfg.u(), cfg.s());
    let h = scalars.h(0);
    let h_s = scalars.h(1);
    let ratio = hs_over_s(&scalars.h, switch)?;
    let c_yy = -(s * h_s + h) / (u * u * u);
    let c_r = ratio.value / (u * u);
    let e = Sym2::from_fn(cfg.n(), |i, j| {
        h / u * delta(i, j) + c_yy * y[i] * y[j] + c_r * (s * (x[i] * y[j] + x[j] * y[i]) - u * x[i] * x[j])
    });
    Ok((e, ratio))
}

/// `sH − (r² − s²) H_s`, which vanishes exactly for Berwald surfaces.
pub fn surface_berwald_residual<T: Scalar>(scalars: &ScalarJets<T>) -> T {
    let (r, s) = (scalars.r, scalars.s);
    s * scalars.h(0) - (r * r - s * s) * scalars.h(1)
}

// ---------------------------------------------------------------------------
// Conditions

/// Surface Landsberg combination `(r² − s²) L1 + 3 L2`, written in P, Q derivatives.
pub fn landsberg_surface_residual<T: Scalar>(phi: &Jet2<T>, pq: &SprayJets<T>) -> Result<T> {
    let (r, s) = (pq.r(), pq.s());
    let (f, fs, _) = phi_s_derivs(phi)?;
    let w = r * r - s * s;
    let three = T::lit(3.0);
    let [p0, p1, p2, p3] = [pq.p(0), pq.p(1), pq.p(2), pq.p(3)];
    let [q1, q2, q3] = [pq.q(1), pq.q(2), pq.q(3)];
    let a = w * (w * q3 + three * (q1 - s * q2) + three * p2) + three * (p0 - s * p1);
    let b = w * (s * q3 + p3) + three * s * (q1 - s * q2) - three * s * p2;
    Ok(a * fs + b * f)
}

/// The same combination via `H` (for n = 2) and `K`.
pub fn landsberg_surface_residual_hk<T: Scalar>(phi: &Jet2<T>, pq: &SprayJets<T>) -> Result<T> {
    let (r, s) = (pq.r(), pq.s());
    let (f, fs, _) = phi_s_derivs(phi)?;
    let sc = scalar_hk(pq, 2)?;
    let w = r * r - s * s;
    let ratio = hs_over_s(&sc.h, T::lit(DEFAULT_S_JET_SWITCH))?;
    let first = sc.h(0) - w * ratio.value;
    let second = w * sc.k(1) - T::lit(3.0) * s * sc.k(0);
    Ok(first * fs + second * f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompatResiduals<T> {
    pub c1: T,
    pub c2: T,
}

impl<T: Scalar> CompatResiduals<T> {
    pub fn max_abs(&self) -> T {
        self.c1.abs().max(self.c2.abs())
    }
}

pub fn compatibility_residuals<T: Scalar>(phi: &Jet2<T>, pq: &SprayJets<T>) -> Result<CompatResiduals<T>> {
    let (r, s) = (pq.r(), pq.s());
    let f = phi.value();
    let fs = phi.derivative(0, 1)?;
    let fr = phi.derivative(1, 0)?;
    let w = r * r - s * s;
    let two = T::lit(2.0);
    let [p0, p1] = [pq.p(0), pq.p(1)];
    let [q0, q1] = [pq.q(0), pq.q(1)];
    let t = two * q0 - s * q1;
    let c1 = (T::one() + s * p0 - w * t) * fs + (s * p1 - two * p0 - s * t) * f;
    let c2 = fr / r - (p0 + q1 * w) * fs - (p1 + s * q1) * f;
    Ok(CompatResiduals { c1, c2 })
}

// ---------------------------------------------------------------------------
// Everything at one configuration

#[derive(Debug, Clone, PartialEq)]
pub struct TensorBundle<T> {
    pub r: T,
    pub s: T,
    pub u: T,
    pub phi: Jet2<T>,
    pub pq: SprayJets<T>,
    pub metric: Sym2<T>,
    pub inverse: Sym2<T>,
    pub spray: Vec<T>,
    pub berwald: Rank4<T>,
    pub mean_berwald: Sym2<T>,
}

impl<T: Scalar> TensorBundle<T> {
    pub fn compute(model: &PhiModel, cfg: &Config<T>) -> Result<Self> {
        Self::compute_with(model, cfg, JetShape::DEFAULT)
    }

    pub fn compute_with(model: &PhiModel, cfg: &Config<T>, shape: JetShape) -> Result<Self> {
        if !shape.meets_geometry_minimum() {
            return Err(Error::ShapeTooSmall(format!("geometry needs at least (1, 6), got {shape}")));
        }
        let (r, s, u) = (cfg.r(), cfg.s(), cfg.u());
        let phi = model.eval_phi_jet(r, s, shape)?;
        let pq = spray_pq(&phi)?;
        Ok(TensorBundle {
            r,
            s,
            u,
            metric: metric(&phi, cfg)?,
            inverse: inverse_metric(&phi, cfg)?,
            spray: spray_coeffs(&pq, cfg),
            berwald: berwald_curvature(&pq, cfg),
            mean_berwald: mean_berwald_direct(&pq, cfg),
            phi,
            pq,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(x: &[f64], y: &[f64]) -> Config<f64> {
        Config::new(x.to_vec(), y.to_vec()).unwrap()
    }

    fn pq_of(model: &PhiModel, c: &Config<f64>) -> (Jet2<f64>, SprayJets<f64>) {
        let phi = model.eval_phi_jet(c.r(), c.s(), JetShape::DEFAULT).unwrap();
        let pq = spray_pq(&phi).unwrap();
        (phi, pq)
    }

    fn poly_spray(r: f64, s: f64, p: &[f64], q: &[f64]) -> SprayJets<f64> {
        let sh = JetShape::s_only(4);
        let (_, sj) = Jet2::seeds(r, s, sh);
        let poly = |c: &[f64]| c.iter().rev().fold(Jet2::zero((r, s), sh), |acc, &ci| &(&acc * &sj) + ci);
        SprayJets::new(r, s, poly(p), poly(q)).unwrap()
    }

    #[test]
    fn config_scalars() {
        let c = cfg(&[2.0, 0.0], &[0.3, 1.0]);
        assert!((c.r() - 2.0).abs() < 1e-15);
        assert!((c.s() - 0.6 / 1.09f64.sqrt()).abs() < 1e-15);
        assert!(Config::new(vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(Config::new(vec![1.0], vec![1.0]).is_err());
        assert!(Config::new(vec![1.0; 9], vec![1.0; 9]).is_err());
        assert!(Config::new(vec![1.0, 0.0], vec![1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn euclidean_objects() {
        let m = PhiModel::euclidean();
        let c = cfg(&[0.6, 0.2, 0.1], &[0.1, 1.0, -0.4]);
        let b = TensorBundle::compute(&m, &c).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d = if i == j { 1.0 } else { 0.0 };
                assert_eq!(b.metric.get(i, j), d);
                assert!((b.inverse.get(i, j) - d).abs() < 1e-15);
            }
        }
        assert_eq!(b.pq.p(0), 0.0);
        assert_eq!(b.pq.q(0), 0.0);
        assert_eq!(b.berwald.max_abs(), 0.0);
        assert!(b.spray.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn metric_of_sqrt_one_plus_s2_at_s_zero() {
        let m = PhiModel::expression("sqrt(1+s^2)").unwrap();
        let c = cfg(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        let (phi, _) = pq_of(&m, &c);
        let g = metric(&phi, &c).unwrap();
        let expect = [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((g.get(i, j) - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn inverse_identity() {
        let m = PhiModel::expression("sqrt(1+s^2) + s/2").unwrap();
        let c = cfg(&[0.5, -0.3, 0.4], &[0.2, 0.9, -0.5]);
        let (phi, _) = pq_of(&m, &c);
        let prod = metric(&phi, &c).unwrap().matmul(&inverse_metric(&phi, &c).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                let d = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn homogeneous_spray() {
        let m = PhiModel::homogeneous("1").unwrap();
        let c = cfg(&[2.0, 0.0], &[0.3, 1.0]);
        let (_, pq) = pq_of(&m, &c);
        let (r, s) = (c.r(), c.s());
        assert!((pq.p(0) + s / (r * r)).abs() < 1e-14);
        assert!((pq.q(0) - 0.125).abs() < 1e-14);
        let g1 = spray_coeffs(&pq, &c);
        let c2 = c.scale_y(2.0).unwrap();
        let (_, pq2) = pq_of(&m, &c2);
        let g2 = spray_coeffs(&pq2, &c2);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((4.0 * a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn berwald_family_is_flat() {
        let c = cfg(&[0.7, -0.3, 0.5], &[0.2, 1.1, -0.4]);
        let pq = poly_spray(c.r(), c.s(), &[0.0, 0.7], &[-0.4, 0.0, 1.3]);
        assert!(berwald_curvature(&pq, &c).max_abs() < 1e-12);
        assert!(mean_berwald_direct(&pq, &c).max_abs() < 1e-12);
        let sc = scalar_hk(&pq, 3).unwrap();
        assert!(sc.h.max_abs() < 1e-12 && sc.k.max_abs() < 1e-12);
    }

    #[test]
    fn trace_matches_direct_mean_curvature() {
        let c = cfg(&[0.7, -0.3, 0.5], &[0.2, 1.1, -0.4]);
        let pq = poly_spray(c.r(), c.s(), &[0.3, -0.2, 0.5, 0.7, -0.1], &[0.1, 0.4, -0.6, 0.2, 0.9]);
        let b = berwald_curvature(&pq, &c);
        let t = berwald_trace(&b);
        let e = mean_berwald_direct(&pq, &c);
        for (a, b) in t.as_slice().iter().zip(e.as_slice()) {
            assert!((a - b).abs() < 1e-12 * e.max_abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn sympy_reference_entry() {
        // P = r sin s + s³/3 + exp(s/2), Q = cos(r s) + s⁴/5 - s at x = (0.7,-0.3,0.5),
        // y = (0.2,1.1,-0.4); only derivatives at the point matter, so a
        // polynomial jet with the same Taylor data reproduces the tensor.
        let c = cfg(&[0.7, -0.3, 0.5], &[0.2, 1.1, -0.4]);
        let (r, s) = (c.r(), c.s());
        let sh = JetShape::s_only(5);
        let (_, sj) = Jet2::seeds(r, s, sh);
        let p = &(&(sj.sin() * r) + &(&sj.powi(3).unwrap() / 3.0)) + &(&sj / 2.0).exp();
        let q = &(&(&sj * r).cos() + &(&sj.powi(4).unwrap() / 5.0)) - &sj;
        let pq = SprayJets::new(r, s, p, q).unwrap();
        let b = berwald_curvature(&pq, &c);
        // symmetric in the lower indices, homogeneous of degree -1 in y
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let v = b.get(i, j, k, l);
                        for w in [b.get(i, k, j, l), b.get(i, l, k, j), b.get(i, j, l, k)] {
                            assert!((v - w).abs() <= 1e-13 * b.max_abs());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn h_form_agrees_away_from_zero() {
        let c = cfg(&[0.7, -0.3, 0.5], &[0.2, 1.1, -0.4]);
        let pq = poly_spray(c.r(), c.s(), &[0.3, -0.2, 0.5, 0.7, -0.1], &[0.1, 0.4, -0.6, 0.2, 0.9]);
        let sc = scalar_hk(&pq, 3).unwrap();
        let eh = mean_berwald_h(&sc, &c).unwrap();
        let ed = mean_berwald_direct(&pq, &c);
        for (a, b) in eh.as_slice().iter().zip(ed.as_slice()) {
            assert!((a - b).abs() < 1e-12 * ed.max_abs());
        }
    }

    #[test]
    fn h_over_s_jet_limit() {
        // H = 1 + s² has H_s / s = 2 everywhere, including s = 0
        let sh = JetShape::s_only(4);
        for s0 in [0.0f64, 1e-5, -3e-4] {
            let (_, sj) = Jet2::seeds(1.0, s0, sh);
            let h = &(&sj * &sj) + 1.0;
            let v = hs_over_s(&h, 1e-3).unwrap();
            assert!(v.jet_limit && v.removable);
            assert!((v.value - 2.0).abs() < 1e-12, "{s0}: {}", v.value);
        }
        // H = s has H_s(0) = 1: not removable
        let (_, sj) = Jet2::seeds(1.0f64, 0.0, sh);
        let v = hs_over_s(&sj, 1e-3).unwrap();
        assert!(!v.removable);
        assert!((v.hs_at_zero - 1.0).abs() < 1e-15);
    }

    #[test]
    fn landsberg_forms_agree() {
        let m = PhiModel::expression("sqrt(1+s^2)*(1+r^2) + s/3").unwrap();
        let c = cfg(&[1.1, 0.3], &[0.4, 0.8]);
        let (phi, pq) = pq_of(&m, &c);
        let a = landsberg_surface_residual(&phi, &pq).unwrap();
        let b = landsberg_surface_residual_hk(&phi, &pq).unwrap();
        assert!(a.abs() > 1e-3);
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn compatibility_closes_for_own_spray() {
        let m = PhiModel::expression("exp(s*r)/(1+r^2)").unwrap();
        let c = cfg(&[0.9, 0.6, -0.2], &[0.3, -0.5, 1.0]);
        let (phi, pq) = pq_of(&m, &c);
        let res = compatibility_residuals(&phi, &pq).unwrap();
        assert!(res.max_abs() < 1e-12, "{res:?}");
    }

    #[test]
    fn singular_metric_is_reported() {
        let m = PhiModel::expression("s").unwrap();
        let phi = m.eval_phi_jet(1.0, 0.0, JetShape::DEFAULT).unwrap();
        assert!(matches!(spray_pq(&phi), Err(Error::SingularMetric { .. })));
    }
}
