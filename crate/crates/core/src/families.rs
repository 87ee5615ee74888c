//! Canonical spray families, family fitting, the Riemannian test,
//! classification, and the surface-case reproduction computations.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{parse_phi, Expr};
use crate::geometry::{self, Config, SprayJets};
use crate::jets::{Jet2, JetShape, DEFAULT_DIV_EPSILON};
use crate::linalg::{chebyshev_nodes, fit_basis};
use crate::phi::PhiModel;
use crate::sampling::GridSpec;
use crate::scalar::Scalar;

/// s-order of the spray jets the family generators produce.
pub const FAMILY_ORDER: usize = 6;
/// Membership tolerance on fit residuals.
pub const DEFAULT_TOL: f64 = 1e-7;
/// Samples per fit (an even count keeps s = 0 out of the Chebyshev nodes).
pub const FIT_SAMPLES: usize = 16;

// ---------------------------------------------------------------------------
// Coefficient functions

#[derive(Debug, Clone, PartialEq)]
pub enum Coef {
    Const(f64),
    Expr(Expr),
}

impl Coef {
    pub fn at<T: Scalar>(&self, r: T) -> Result<T> {
        match self {
            Coef::Const(v) => Ok(T::lit(*v)),
            Coef::Expr(e) => e.eval(Some(r), None, None),
        }
    }
}

/// Named coefficient functions of r; missing names read as zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoefFns {
    entries: BTreeMap<String, Coef>,
}

impl CoefFns {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(mut self, name: &str, v: f64) -> Self {
        self.entries.insert(name.into(), Coef::Const(v));
        self
    }

    pub fn expr(mut self, name: &str, src: &str) -> Result<Self> {
        let e = parse_phi(src)?;
        if let Some((v, _)) = e.foreign_var(&[crate::expr::Var::R]) {
            return Err(Error::InvalidModel(format!("coefficient `{name}` may only use r, found `{}`", v.name())));
        }
        self.entries.insert(name.into(), Coef::Expr(e));
        Ok(self)
    }

    pub fn get<T: Scalar>(&self, name: &str, r: T) -> Result<T> {
        self.entries.get(name).map_or(Ok(T::zero()), |c| c.at(r))
    }

    pub fn landsberg_at<T: Scalar>(&self, r: T) -> Result<LandsbergCoefs<T>> {
        Ok(LandsbergCoefs { c0: self.get("c0", r)?, c1: self.get("c1", r)?, c2: self.get("c2", r)?, c3: self.get("c3", r)? })
    }

    pub fn surface_at<T: Scalar>(&self, r: T) -> Result<SurfaceCoefs<T>> {
        Ok(SurfaceCoefs {
            a: self.get("a", r)?,
            b0: self.get("b0", r)?,
            b1: self.get("b1", r)?,
            b2: self.get("b2", r)?,
            b3: self.get("b3", r)?,
        })
    }

    pub fn berwald_at<T: Scalar>(&self, r: T) -> Result<BerwaldCoefs<T>> {
        Ok(BerwaldCoefs { f1: self.get("f1", r)?, f2: self.get("f2", r)?, f3: self.get("f3", r)? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LandsbergCoefs<T> {
    pub c0: T,
    pub c1: T,
    pub c2: T,
    pub c3: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurfaceCoefs<T> {
    pub a: T,
    pub b0: T,
    pub b1: T,
    pub b2: T,
    pub b3: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BerwaldCoefs<T> {
    pub f1: T,
    pub f2: T,
    pub f3: T,
}

// ---------------------------------------------------------------------------
// Generators

fn s_jets<T: Scalar>(r: T, s0: T) -> Result<(Jet2<T>, Jet2<T>)> {
    if !(s0.abs() < r) {
        return Err(Error::Inadmissible { r: r.as_f64(), s: s0.as_f64(), reason: "family needs |s| < r".into() });
    }
    let shape = JetShape::s_only(FAMILY_ORDER);
    let (_, s) = Jet2::seeds(r, s0, shape);
    let root = ((&s * &s) * -T::one() + r * r).sqrt()?;
    Ok((s, root))
}

/// `P = c1 s + c2 √(r² − s²) / r²`, `Q = c0 s² / 2 − c2 s √(r² − s²) / r⁴ + c3`.
pub fn landsberg_pq_n3<T: Scalar>(c: &LandsbergCoefs<T>, r: T, s0: T) -> Result<SprayJets<T>> {
    let (s, root) = s_jets(r, s0)?;
    let r2 = r * r;
    let p = &(&s * c.c1) + &(&root * (c.c2 / r2));
    let q = &(&(&(&s * &s) * (c.c0 * T::lit(0.5))) - &(&(&s * &root) * (c.c2 / (r2 * r2)))) + c.c3;
    SprayJets::new(r, s0, p, q)
}

/// The Berwald surface family. The `b3` part of `Q` enters with a plus sign:
/// `+ b3 s (3r² − 2s²) / (r² √(r² − s²))` is what makes every member satisfy
/// `sH − (r² − s²) H_s = 0`.
pub fn berwald_pq_surface<T: Scalar>(b: &SurfaceCoefs<T>, r: T, s0: T) -> Result<SprayJets<T>> {
    surface_pq(b, r, s0, T::one())
}

fn surface_pq<T: Scalar>(b: &SurfaceCoefs<T>, r: T, s0: T, b3_sign: T) -> Result<SprayJets<T>> {
    let (s, root) = s_jets(r, s0)?;
    let r2 = r * r;
    let s2 = &s * &s;
    let inv_root = root.recip()?;
    let r2_m_2s2 = (&s2 * T::lit(-2.0)) + r2;
    let three_r2_m_2s2 = (&s2 * T::lit(-2.0)) + T::lit(3.0) * r2;
    let p = &(&(&s * b.b1) + &(&inv_root * b.b2)) + &(&(&r2_m_2s2 * &inv_root) * b.b3);
    let q = &(&(&(&(&s2 * b.b0) + b.b1 * T::lit(0.5)) + &(&(&(&s * &r2_m_2s2) * &inv_root) * (b.b2 / (r2 * r2))))
        + &(&(&(&s * &three_r2_m_2s2) * &inv_root) * (b3_sign * b.b3 / r2)))
        - &(&(&s * &root) * (b.a / r2));
    SprayJets::new(r, s0, p, q)
}

/// `P = f1 s`, `Q = f2 s² + f3`.
pub fn berwald_pq_n3<T: Scalar>(f: &BerwaldCoefs<T>, r: T, s0: T) -> Result<SprayJets<T>> {
    let shape = JetShape::s_only(FAMILY_ORDER);
    let (_, s) = Jet2::seeds(r, s0, shape);
    let p = &s * f.f1;
    let q = &(&s * &s) * f.f2 + f.f3;
    SprayJets::new(r, s0, p, q)
}

// ---------------------------------------------------------------------------
// Fitting

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FamilyId {
    #[serde(rename = "landsberg_n3")]
    LandsbergN3,
    #[serde(rename = "berwald_surface")]
    BerwaldSurface,
    #[serde(rename = "berwald_n3")]
    BerwaldN3,
}

impl FamilyId {
    pub const ALL: [FamilyId; 3] = [FamilyId::LandsbergN3, FamilyId::BerwaldSurface, FamilyId::BerwaldN3];

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyId::LandsbergN3 => "landsberg_n3",
            FamilyId::BerwaldSurface => "berwald_surface",
            FamilyId::BerwaldN3 => "berwald_n3",
        }
    }

    pub fn coefficient_names(self) -> &'static [&'static str] {
        match self {
            FamilyId::LandsbergN3 => &["c0", "c1", "c2", "c3"],
            FamilyId::BerwaldSurface => &["a", "b0", "b1", "b2", "b3", "q0"],
            FamilyId::BerwaldN3 => &["f1", "f2", "f3"],
        }
    }

    fn basis_count(self) -> usize {
        match self {
            FamilyId::LandsbergN3 => 3,
            FamilyId::BerwaldSurface => 6,
            FamilyId::BerwaldN3 => 2,
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FamilyId::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown family `{s}` (expected landsberg_n3, berwald_surface or berwald_n3)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PqSample<T> {
    pub s: T,
    pub p: T,
    pub q: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult<T> {
    pub family: FamilyId,
    pub r: T,
    /// Estimates in the family's coefficient order.
    pub coefficients: Vec<(String, T)>,
    /// Max deviation of the fitted P and Q from the samples, including any
    /// cross-consistency gap.
    pub residual: T,
    /// For `landsberg_n3`: |c2 from P − c2 from Q|.
    pub consistency: Option<T>,
    pub member: bool,
}

impl<T: Scalar> FitResult<T> {
    pub fn coefficient(&self, name: &str) -> Option<T> {
        self.coefficients.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }
}

fn max_dev<T: Scalar>(a: &[T], cols: usize, coef: &[T], b: &[T]) -> T {
    b.iter()
        .enumerate()
        .map(|(i, &bi)| {
            let fit: T = (0..cols).map(|j| a[i * cols + j] * coef[j]).sum();
            (fit - bi).abs()
        })
        .fold(T::zero(), T::max)
}

/// Least-squares fit of `(s, P, Q)` samples at fixed `r` to a family.
///
/// `berwald_surface` is fitted jointly (its Q-basis alone is rank deficient)
/// and carries a free constant `q0` in `Q`.
pub fn fit_family<T: Scalar>(samples: &[PqSample<T>], r: T, family: FamilyId, tol: T) -> Result<FitResult<T>> {
    if samples.len() < 2 * family.basis_count() {
        return Err(Error::Fit(format!(
            "{} needs at least {} samples, got {}",
            family,
            2 * family.basis_count(),
            samples.len()
        )));
    }
    if let Some(bad) = samples.iter().find(|p| p.s.abs() > T::lit(0.9) * r * (T::one() + T::epsilon())) {
        return Err(Error::Fit(format!("sample s = {} outside |s| <= 0.9 r", bad.s)));
    }
    let r2 = r * r;
    let root = |s: T| (r2 - s * s).sqrt();
    let ps: Vec<T> = samples.iter().map(|p| p.p).collect();
    let qs: Vec<T> = samples.iter().map(|p| p.q).collect();
    let half = T::lit(0.5);

    let (coefficients, residual, consistency) = match family {
        FamilyId::LandsbergN3 => {
            let ap: Vec<T> = samples.iter().flat_map(|p| [p.s, root(p.s) / r2]).collect();
            let aq: Vec<T> = samples.iter().flat_map(|p| [p.s * p.s * half, -p.s * root(p.s) / (r2 * r2), T::one()]).collect();
            let cp = fit_basis(&["s", "sqrt(r^2-s^2)/r^2"], &ap, &ps)?;
            let cq = fit_basis(&["s^2/2", "-s sqrt(r^2-s^2)/r^4", "1"], &aq, &qs)?;
            let gap = (cp[1] - cq[1]).abs();
            let res = max_dev(&ap, 2, &cp, &ps).max(max_dev(&aq, 3, &cq, &qs)).max(gap);
            (vec![("c0", cq[0]), ("c1", cp[0]), ("c2", cp[1]), ("c3", cq[2])], res, Some(gap))
        }
        FamilyId::BerwaldN3 => {
            let ap: Vec<T> = samples.iter().map(|p| p.s).collect();
            let aq: Vec<T> = samples.iter().flat_map(|p| [p.s * p.s, T::one()]).collect();
            let cp = fit_basis(&["s"], &ap, &ps)?;
            let cq = fit_basis(&["s^2", "1"], &aq, &qs)?;
            let res = max_dev(&ap, 1, &cp, &ps).max(max_dev(&aq, 2, &cq, &qs));
            (vec![("f1", cp[0]), ("f2", cq[0]), ("f3", cq[1])], res, None)
        }
        FamilyId::BerwaldSurface => {
            // unknowns: a, b0, b1, b2, b3, q0
            let mut a = Vec::with_capacity(12 * samples.len());
            let mut rhs = Vec::with_capacity(2 * samples.len());
            for p in samples {
                let (s, w) = (p.s, root(p.s));
                let z = T::zero();
                a.extend([z, z, s, w.recip(), (r2 - T::lit(2.0) * s * s) / w, z]);
                rhs.push(p.p);
            }
            for p in samples {
                let (s, w) = (p.s, root(p.s));
                a.extend([
                    -s * w / r2,
                    s * s,
                    T::zero(),
                    s * (r2 - T::lit(2.0) * s * s) / (r2 * r2 * w),
                    s * (T::lit(3.0) * r2 - T::lit(2.0) * s * s) / (r2 * w),
                    T::one(),
                ]);
                rhs.push(p.q);
            }
            let names = ["s sqrt(r^2-s^2)", "s^2", "s", "1/sqrt(r^2-s^2)", "(r^2-2s^2)/sqrt(r^2-s^2)", "1"];
            let c = fit_basis(&names, &a, &rhs)?;
            let res = max_dev(&a, 6, &c, &rhs);
            (vec![("a", c[0]), ("b0", c[1]), ("b1", c[2]), ("b2", c[3]), ("b3", c[4]), ("q0", c[5])], res, None)
        }
    };
    Ok(FitResult {
        family,
        r,
        coefficients: coefficients.into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
        residual,
        consistency,
        member: residual <= tol,
    })
}

/// `(s, P, Q)` of a model's own spray on Chebyshev nodes at fixed `r`.
pub fn sample_model_pq<T: Scalar>(model: &PhiModel, r: T, count: usize) -> Result<Vec<PqSample<T>>> {
    let hi = T::lit(model.sample_band().1.min(0.9));
    chebyshev_nodes(count, -hi * r, hi * r)
        .into_iter()
        .map(|s| {
            let jet = model.eval_phi_jet(r, s, JetShape::new(1, 2))?;
            let (p, q) = geometry::spray_pq_values(&jet)?;
            Ok(PqSample { s, p, q })
        })
        .collect()
}

/// Fits a model's spray at each radius.
pub fn fit_model(model: &PhiModel, family: FamilyId, r_values: &[f64], tol: f64) -> Result<Vec<FitResult<f64>>> {
    r_values
        .par_iter()
        .map(|&r| fit_family(&sample_model_pq(model, r, FIT_SAMPLES)?, r, family, tol))
        .collect()
}

/// Max deviation of φ² from its best fit by `α + β s²` at fixed `r`.
pub fn riemannian_residual<T: Scalar>(model: &PhiModel, r: T, s_grid: &[T]) -> Result<T> {
    let mut distinct: Vec<T> = s_grid.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::Fit(format!("Riemannian test needs >= 4 distinct s values, got {}", distinct.len())));
    }
    let b: Vec<T> = s_grid
        .iter()
        .map(|&s| model.eval_phi(r, s).map(|f| f * f))
        .collect::<Result<_>>()?;
    let a: Vec<T> = s_grid.iter().flat_map(|&s| [T::one(), s * s]).collect();
    let c = fit_basis(&["1", "s^2"], &a, &b)?;
    Ok(max_dev(&a, 2, &c, &b))
}

// ---------------------------------------------------------------------------
// Per-point records and classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Holds,
    Boundary,
    Fails,
}

impl Flag {
    /// Holds at or below `tol`, boundary up to `10 tol`, fails beyond (or on NaN).
    pub fn from_residual(res: f64, tol: f64) -> Flag {
        if res <= tol {
            Flag::Holds
        } else if res <= 10.0 * tol {
            Flag::Boundary
        } else {
            Flag::Fails
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flag::Holds => "holds",
            Flag::Boundary => "boundary",
            Flag::Fails => "fails",
        })
    }
}

/// Scalars and tensor norms at one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub r: f64,
    pub s: f64,
    pub u: f64,
    pub p: f64,
    pub q: f64,
    pub h: f64,
    pub k: f64,
    pub c1: f64,
    pub c2: f64,
    /// Surface Landsberg combination (meaningful for n = 2).
    pub landsberg: f64,
    /// `sH − (r² − s²) H_s` with H for the configuration's dimension.
    pub surface_berwald: f64,
    pub mean_berwald_trace: f64,
    pub max_berwald: f64,
    pub max_mean_berwald: f64,
}

pub fn point_record(model: &PhiModel, cfg: &Config<f64>) -> Result<PointRecord> {
    let (r, s, u) = (cfg.r(), cfg.s(), cfg.u());
    let phi = model.eval_phi_jet(r, s, JetShape::DEFAULT)?;
    let pq = geometry::spray_pq(&phi)?;
    let sc = geometry::scalar_hk(&pq, cfg.n())?;
    let compat = geometry::compatibility_residuals(&phi, &pq)?;
    let e = geometry::mean_berwald_direct(&pq, cfg);
    Ok(PointRecord {
        r,
        s,
        u,
        p: pq.p(0),
        q: pq.q(0),
        h: sc.h(0),
        k: sc.k(0),
        c1: compat.c1,
        c2: compat.c2,
        landsberg: geometry::landsberg_surface_residual(&phi, &pq)?,
        surface_berwald: geometry::surface_berwald_residual(&sc),
        mean_berwald_trace: e.trace(),
        max_berwald: geometry::berwald_curvature(&pq, cfg).max_abs(),
        max_mean_berwald: e.max_abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointOutcome {
    pub index: usize,
    #[serde(flatten)]
    pub record: Option<PointRecord>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals {
    pub riemannian: f64,
    pub berwald: f64,
    pub landsberg: f64,
    pub compatibility: f64,
    pub mean_berwald_trace: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyFit {
    pub family: FamilyId,
    pub member: bool,
    pub residual: f64,
    pub fits: Vec<FitResult<f64>>,
}

impl FamilyFit {
    fn from_fits(family: FamilyId, fits: Vec<FitResult<f64>>) -> Self {
        let residual = fits.iter().map(|f| f.residual).fold(0.0, nan_max);
        FamilyFit { family, member: fits.iter().all(|f| f.member), residual, fits }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub n: usize,
    pub tol: f64,
    pub riemannian: Flag,
    pub berwald: Flag,
    pub landsberg: Flag,
    pub residuals: Residuals,
    pub fitted_family: Option<FamilyFit>,
    pub points: Vec<PointOutcome>,
    pub errors: Vec<String>,
}

// max that lets NaN win, so a broken residual can never read as "holds"
fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn flag(res: f64, tol: f64) -> Flag {
    if res.is_nan() {
        Flag::Fails
    } else {
        Flag::from_residual(res, tol)
    }
}

/// Evaluates every grid point (in parallel, order preserved).
pub fn evaluate_grid(model: &PhiModel, grid: &GridSpec) -> Result<Vec<PointOutcome>> {
    grid.validate(model)?;
    Ok(grid
        .points()
        .par_iter()
        .map(|p| {
            let outcome = grid.config_for(p).and_then(|cfg| point_record(model, &cfg));
            match outcome {
                Ok(rec) => PointOutcome { index: p.index, record: Some(rec), error: None },
                Err(e) => PointOutcome {
                    index: p.index,
                    record: None,
                    error: Some(format!("(r = {}, s = {}): {e}", p.r, p.s)),
                },
            }
        })
        .collect())
}

pub fn classify(model: &PhiModel, grid: &GridSpec, tol: f64) -> Result<Classification> {
    let n = grid.n;
    let points = evaluate_grid(model, grid)?;
    let mut errors: Vec<String> = points.iter().filter_map(|p| p.error.clone()).collect();
    let records: Vec<&PointRecord> = points.iter().filter_map(|p| p.record.as_ref()).collect();
    let fold = |f: &dyn Fn(&PointRecord) -> f64| -> f64 {
        if records.is_empty() {
            f64::NAN
        } else {
            records.iter().map(|r| f(r).abs()).fold(0.0, nan_max)
        }
    };
    let berwald = fold(&|p| p.max_berwald);
    let compatibility = fold(&|p| p.c1.abs().max(p.c2.abs()));
    let mean_berwald_trace = fold(&|p| p.mean_berwald_trace);

    let r_values = grid.r_values();
    let hi = model.s_safety().min(0.9);
    let riemannian = r_values
        .par_iter()
        .map(|&r| riemannian_residual(model, r, &chebyshev_nodes(8, -hi * r, hi * r)))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, |acc, res| match res {
            Ok(v) => nan_max(acc, v),
            Err(e) => {
                errors.push(format!("riemannian test: {e}"));
                f64::NAN
            }
        });

    let mut try_fit = |family: FamilyId| match fit_model(model, family, &r_values, tol) {
        Ok(fits) => Some(FamilyFit::from_fits(family, fits)),
        Err(e) => {
            errors.push(format!("{family} fit: {e}"));
            None
        }
    };
    let (landsberg, fitted_family) = if n == 2 {
        let fit = try_fit(FamilyId::BerwaldSurface);
        (fold(&|p| p.landsberg), fit)
    } else {
        let lfit = try_fit(FamilyId::LandsbergN3);
        let l_res = lfit.as_ref().map_or(f64::NAN, |f| f.residual);
        let landsberg = if riemannian.is_nan() { l_res } else { riemannian.min(l_res) };
        let fitted = if berwald <= tol { try_fit(FamilyId::BerwaldN3) } else { lfit.filter(|f| f.member) };
        (landsberg, fitted)
    };

    Ok(Classification {
        n,
        tol,
        riemannian: flag(riemannian, tol),
        berwald: flag(berwald, tol),
        landsberg: flag(landsberg, tol),
        residuals: Residuals { riemannian, berwald, landsberg, compatibility, mean_berwald_trace },
        fitted_family,
        points,
        errors,
    })
}

// ---------------------------------------------------------------------------
// Surface-case reproduction

/// `1 − b1 r² + 2 b1 s² + s √(r² − s²) (a + 4 b3)`.
pub fn c1_denominator<T: Scalar>(b: &SurfaceCoefs<T>, r: T, s: T) -> T {
    let root = (r * r - s * s).max(T::zero()).sqrt();
    T::one() - b.b1 * r * r + T::lit(2.0) * b.b1 * s * s + s * root * (b.a + T::lit(4.0) * b.b3)
}

/// φ_s / φ as displayed for the surface family:
/// `(2 b1 s √ − a s² + 2 b3 r² − 4 b3 s² + 2 b2) / (√ · c1_denominator)`.
pub fn surface_phi_ratio<T: Scalar>(b: &SurfaceCoefs<T>, r: T, s: T) -> Result<T> {
    let root = (r * r - s * s).sqrt();
    let den = root * c1_denominator(b, r, s);
    if !(den.abs() > T::lit(DEFAULT_DIV_EPSILON)) {
        return Err(Error::DivisionByZero { value: den.as_f64() });
    }
    let two = T::lit(2.0);
    let num = two * b.b1 * s * root - b.a * s * s + two * b.b3 * r * r - T::lit(4.0) * b.b3 * s * s + two * b.b2;
    Ok(num / den)
}

/// φ_s / φ obtained by solving `C1 = 0` for the family spray itself.
pub fn c1_phi_ratio<T: Scalar>(pq: &SprayJets<T>) -> Result<T> {
    let (r, s) = (pq.r(), pq.s());
    let two = T::lit(2.0);
    let t = two * pq.q(0) - s * pq.q(1);
    let a = T::one() + s * pq.p(0) - (r * r - s * s) * t;
    let b = s * pq.p(1) - two * pq.p(0) - s * t;
    if !(a.abs() > T::lit(DEFAULT_DIV_EPSILON)) {
        return Err(Error::DivisionByZero { value: a.as_f64() });
    }
    Ok(-b / a)
}

/// Left side of the combined Landsberg/C1 relation, divided by φ, for a
/// surface-family spray and a φ_s / φ ratio.
pub fn lc2_lhs<T: Scalar>(pq: &SprayJets<T>, ratio: T) -> Result<T> {
    let (r, s) = (pq.r(), pq.s());
    let w = r * r - s * s;
    let three = T::lit(3.0);
    let [p0, p1, p2, p3] = [pq.p(0), pq.p(1), pq.p(2), pq.p(3)];
    let [q0, q1, q2, q3] = [pq.q(0), pq.q(1), pq.q(2), pq.q(3)];
    let den = w * q3 + three * (q1 - s * q2);
    if !(den.abs() > T::lit(DEFAULT_DIV_EPSILON)) {
        return Err(Error::DivisionByZero { value: den.as_f64() });
    }
    let bracket = (w * p3 - three * s * p2) + (three * w * p2 + three * (p0 - s * p1)) * ratio;
    Ok((T::lit(2.0) * q0 - s * q1) * bracket / den + (T::one() + s * p0) * ratio + (s * p1 - T::lit(2.0) * p0))
}

/// The coefficient choice a = 0, b1 = −1/r², b2 = r², b3 = 0 (b0 = 0).
pub fn lc2_coefficients<T: Scalar>(r: T) -> SurfaceCoefs<T> {
    SurfaceCoefs { a: T::zero(), b0: T::zero(), b1: -(r * r).recip(), b2: r * r, b3: T::zero() }
}

/// `(s((r²−s²)²(1+r²) + r⁸) − r⁶ √(r²−s²)(r²−s²+1)) / (r² (r²−s²)²)`
pub fn lc2_closed_form<T: Scalar>(r: T, s: T) -> T {
    let w = r * r - s * s;
    let r2 = r * r;
    let r6 = r2 * r2 * r2;
    (s * (w * w * (T::one() + r2) + r6 * r2) - r6 * w.sqrt() * (w + T::one())) / (r2 * w * w)
}

/// `(lhs, closed_form)` for the stated coefficient choice at `(r, s)`.
pub fn lc2_contradiction<T: Scalar>(r: T, s: T) -> Result<(T, T)> {
    if !(s != T::zero() && s.abs() < r) {
        return Err(Error::Inadmissible { r: r.as_f64(), s: s.as_f64(), reason: "needs 0 < |s| < r".into() });
    }
    let b = lc2_coefficients(r);
    let pq = berwald_pq_surface(&b, r, s)?;
    let ratio = surface_phi_ratio(&b, r, s)?;
    Ok((lc2_lhs(&pq, ratio)?, lc2_closed_form(r, s)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn landsberg_substitution() {
        let c = LandsbergCoefs { c0: 0.0, c1: 0.0, c2: 1.0, c3: 0.0 };
        let pq = landsberg_pq_n3(&c, 1.0, 0.5).unwrap();
        let w = 0.75f64.sqrt();
        assert!(approx(pq.p(0), w, 1e-15));
        assert!(approx(pq.q(0), -0.5 * w, 1e-15));
        let zero = landsberg_pq_n3(&LandsbergCoefs::default(), 1.0, 0.5).unwrap();
        assert_eq!(zero.p_jet().max_abs() + zero.q_jet().max_abs(), 0.0);
    }

    #[test]
    fn landsberg_without_c2_is_berwald_n3() {
        let (r, s) = (1.3, -0.4);
        let l = landsberg_pq_n3(&LandsbergCoefs { c0: 0.6, c1: -0.2, c2: 0.0, c3: 0.9 }, r, s).unwrap();
        let b = berwald_pq_n3(&BerwaldCoefs { f1: -0.2, f2: 0.3, f3: 0.9 }, r, s).unwrap();
        for k in 0..=4 {
            assert!(approx(l.p(k), b.p(k), 1e-14) && approx(l.q(k), b.q(k), 1e-14));
        }
    }

    #[test]
    fn landsberg_derivative_quantities() {
        // P − sP_s = c2/√, Q_s − sQ_ss = −c2/√³, P_ss = −c2/√³, Q_sss = 3c2/√⁵
        let (r, s, c2) = (1.2, 0.5, 0.7);
        let pq = landsberg_pq_n3(&LandsbergCoefs { c0: 0.3, c1: 0.4, c2, c3: -0.1 }, r, s).unwrap();
        let w: f64 = r * r - s * s;
        assert!(approx(pq.p(0) - s * pq.p(1), c2 / w.sqrt(), 1e-13));
        assert!(approx(pq.q(1) - s * pq.q(2), -c2 / w.powf(1.5), 1e-13));
        assert!(approx(pq.p(2), -c2 / w.powf(1.5), 1e-13));
        assert!(approx(pq.q(3), 3.0 * c2 / w.powf(2.5), 1e-13));
    }

    #[test]
    fn surface_substitution() {
        let b = SurfaceCoefs { a: 0.0, b0: 0.0, b1: 0.0, b2: 1.0, b3: 0.0 };
        let pq = berwald_pq_surface(&b, 1.0, 0.5).unwrap();
        let w = 0.75f64.sqrt();
        assert!(approx(pq.p(0), 1.0 / w, 1e-15));
        assert!(approx(pq.q(0), 0.25 / w, 1e-15));
        let zero = berwald_pq_surface(&SurfaceCoefs::default(), 1.0, 0.5).unwrap();
        assert_eq!(zero.p_jet().max_abs() + zero.q_jet().max_abs(), 0.0);
    }

    #[test]
    fn b3_sign_decides_the_surface_condition() {
        let b = SurfaceCoefs { a: 0.3, b0: 0.2, b1: -0.7, b2: 1.1, b3: 0.4 };
        let (r, s) = (1.3f64, 0.6);
        let good = geometry::scalar_hk(&berwald_pq_surface(&b, r, s).unwrap(), 2).unwrap();
        assert!(geometry::surface_berwald_residual(&good).abs() < 1e-12);
        let printed = geometry::scalar_hk(&surface_pq(&b, r, s, -1.0).unwrap(), 2).unwrap();
        assert!(geometry::surface_berwald_residual(&printed).abs() > 1e-2);
    }

    #[test]
    fn fit_recovers_generators() {
        let r = 1.1;
        let c = LandsbergCoefs { c0: 1.0, c1: 2.0, c2: 3.0, c3: 4.0 };
        let samples: Vec<_> = chebyshev_nodes(FIT_SAMPLES, -0.9 * r, 0.9 * r)
            .into_iter()
            .map(|s| {
                let pq = landsberg_pq_n3(&c, r, s).unwrap();
                PqSample { s, p: pq.p(0), q: pq.q(0) }
            })
            .collect();
        let fit = fit_family(&samples, r, FamilyId::LandsbergN3, DEFAULT_TOL).unwrap();
        for (name, want) in [("c0", 1.0), ("c1", 2.0), ("c2", 3.0), ("c3", 4.0)] {
            assert!(approx(fit.coefficient(name).unwrap(), want, 1e-8), "{name}");
        }
        assert!(fit.residual <= 1e-10 && fit.member);

        let b = SurfaceCoefs { a: 0.3, b0: 0.2, b1: -0.7, b2: 1.1, b3: 0.4 };
        let samples: Vec<_> = chebyshev_nodes(FIT_SAMPLES, -0.9 * r, 0.9 * r)
            .into_iter()
            .map(|s| {
                let pq = berwald_pq_surface(&b, r, s).unwrap();
                PqSample { s, p: pq.p(0), q: pq.q(0) }
            })
            .collect();
        let fit = fit_family(&samples, r, FamilyId::BerwaldSurface, DEFAULT_TOL).unwrap();
        for (name, want) in [("a", 0.3), ("b0", 0.2), ("b1", -0.7), ("b2", 1.1), ("b3", 0.4), ("q0", -0.35)] {
            assert!(approx(fit.coefficient(name).unwrap(), want, 1e-8), "{name}");
        }
    }

    #[test]
    fn fit_preconditions() {
        let few = vec![PqSample { s: 0.1, p: 0.0, q: 0.0 }; 3];
        assert!(fit_family(&few, 1.0, FamilyId::BerwaldN3, 1e-7).is_err());
        let wide = vec![PqSample { s: 0.95, p: 0.0, q: 0.0 }; 8];
        assert!(fit_family(&wide, 1.0, FamilyId::BerwaldN3, 1e-7).is_err());
        let same = vec![PqSample { s: 0.3, p: 1.0, q: 1.0 }; 8];
        let e = fit_family(&same, 1.0, FamilyId::BerwaldN3, 1e-7).unwrap_err();
        assert!(e.to_string().contains("degenerate"), "{e}");
    }

    #[test]
    fn homogeneous_model_fits_berwald_n3() {
        let m = PhiModel::homogeneous("exp(v/2)").unwrap();
        for fit in fit_model(&m, FamilyId::BerwaldN3, &[0.7, 1.4], DEFAULT_TOL).unwrap() {
            let r = fit.r;
            assert!(fit.member);
            assert!(approx(fit.coefficient("f1").unwrap(), -1.0 / (r * r), 1e-8));
            assert!(fit.coefficient("f2").unwrap().abs() < 1e-8);
            assert!(approx(fit.coefficient("f3").unwrap(), 0.5 / (r * r), 1e-8));
        }
    }

    #[test]
    fn generic_model_is_not_a_member() {
        let m = PhiModel::expression("sqrt(1+s^2) + s/2").unwrap();
        for family in FamilyId::ALL {
            let fits = fit_model(&m, family, &[1.0], DEFAULT_TOL).unwrap();
            assert!(!fits[0].member, "{family}: {}", fits[0].residual);
        }
    }

    #[test]
    fn riemannian_test() {
        let grid = chebyshev_nodes(8, -0.9, 0.9);
        let rm = PhiModel::riemannian("exp(-r^2/4)", 0.5, -0.1).unwrap();
        assert!(riemannian_residual(&rm, 1.0, &grid).unwrap() <= 1e-10);
        assert!(riemannian_residual(&PhiModel::euclidean(), 1.0, &grid).unwrap() <= 1e-14);
        let psi = PhiModel::psi_family("1+v", "0").unwrap();
        assert!(riemannian_residual(&psi, 1.0, &grid).unwrap() > DEFAULT_TOL);
        assert!(riemannian_residual(&rm, 1.0, &[0.1, 0.2, 0.2, 0.1]).is_err());
    }

    #[test]
    fn flags() {
        assert_eq!(Flag::from_residual(1e-8, 1e-7), Flag::Holds);
        assert_eq!(Flag::from_residual(5e-7, 1e-7), Flag::Boundary);
        assert_eq!(Flag::from_residual(2e-6, 1e-7), Flag::Fails);
        assert_eq!(flag(f64::NAN, 1e-7), Flag::Fails);
    }

    #[test]
    fn c1_denominator_values() {
        assert_eq!(c1_denominator(&SurfaceCoefs::default(), 1.3, 0.2), 1.0);
        let b = SurfaceCoefs { b1: -1.0, ..Default::default() };
        assert!(approx(c1_denominator(&b, 1.0, 0.5), 1.5, 1e-15));
    }

    #[test]
    fn lc2_ratio_matches_c1_for_the_stated_choice() {
        for (r, s) in [(1.0, 0.5), (2.0, 0.1), (1.3, -0.7)] {
            let b = lc2_coefficients(r);
            let pq = berwald_pq_surface(&b, r, s).unwrap();
            let shown = surface_phi_ratio(&b, r, s).unwrap();
            let derived = c1_phi_ratio(&pq).unwrap();
            assert!(approx(shown, derived, 1e-12));
        }
    }

    #[test]
    fn lc2_closed_form_value() {
        let v: f64 = lc2_closed_form(1.0, 0.5);
        assert!((v + 0.805_412_367_329_365).abs() < 1e-12);
    }
}
