//! Named verification checks: identities between the displayed formulas,
//! family properties, and jet/finite-difference concordance.
//!
//! Every check draws its random cases from `(seed, stream)` keyed RNGs and
//! reduces with `max`, so results do not depend on the thread count.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::{self, BerwaldCoefs, Flag, LandsbergCoefs, SurfaceCoefs};
use crate::geometry::{self, Config, SprayJets, Sym2};
use crate::jets::{Jet2, JetShape};
use crate::oracle::{self, FDScheme};
use crate::phi::PhiModel;
use crate::sampling::{config_with, point_rng, random_config, GridSpec, Range};

pub const DEFAULT_SEED: u64 = 20240607;

/// Profiles `h` used for the homogeneous-model checks.
pub const HOMOGENEOUS_PROFILES: [&str; 5] = ["1", "exp(v/2)", "cosh(v)", "sqrt(1+v^2)+v/2", "1+v^2/4"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Passes when `worst ≤ tol`.
    Upper,
    /// Passes when `worst > tol` (a quantity that must stay away from zero).
    Lower,
}

#[derive(Debug, Clone, Copy)]
pub struct CheckSpec {
    pub name: &'static str,
    pub tol: f64,
    pub bound: Bound,
    pub about: &'static str,
}

pub const CHECKS: &[CheckSpec] = &[
    CheckSpec { name: "inverse-identity", tol: 1e-9, bound: Bound::Upper, about: "max |g^ik g_kj - δ_ij|, catalog, n = 2..4, 100 configs each" },
    CheckSpec { name: "trace-identity", tol: 1e-8, bound: Bound::Upper, about: "G^h_{ijh} vs direct E_ij, relative; 200 polynomial sprays + catalog" },
    CheckSpec { name: "e-form-agreement", tol: 1e-8, bound: Bound::Upper, about: "direct E_ij vs H-form away from s = 0, relative" },
    CheckSpec { name: "e-form-jet-limit", tol: 1e-6, bound: Bound::Upper, about: "direct E_ij vs H-form through the H_s/s jet limit near s = 0, relative" },
    CheckSpec { name: "compatibility-closure", tol: 1e-9, bound: Bound::Upper, about: "max |C1|, |C2| of each catalog φ with its own spray, 100 points" },
    CheckSpec { name: "berwald-n3-flat", tol: 1e-12, bound: Bound::Upper, about: "max |G^i_jkl| for P = f1 s, Q = f2 s^2 + f3, n = 3, 4" },
    CheckSpec { name: "homogeneous-spray", tol: 1e-10, bound: Bound::Upper, about: "homogeneous profiles give P = -s/r^2, Q = 1/(2r^2)" },
    CheckSpec { name: "homogeneous-berwald-jet", tol: 1e-10, bound: Bound::Upper, about: "max |G^i_jkl| of homogeneous profiles, jet path" },
    CheckSpec { name: "homogeneous-berwald-fd", tol: 1e-5, bound: Bound::Upper, about: "max |G^i_jkl| of homogeneous profiles, finite-difference path" },
    CheckSpec { name: "landsberg-trace", tol: 1e-8, bound: Bound::Upper, about: "tr E of the Landsberg family vs n(n-2) c2 / (u sqrt(r^2-s^2)), relative, n = 3, 4" },
    CheckSpec { name: "landsberg-trace-surface", tol: 1e-10, bound: Bound::Upper, about: "|tr E| of the Landsberg family for n = 2" },
    CheckSpec { name: "psi-compatibility", tol: 1e-9, bound: Bound::Upper, about: "|C2| of ψ = 1 + v, c0 = 0 against P = -s/r^2, Q = 1/(2r^2)" },
    CheckSpec { name: "psi-classification", tol: 1e-7, bound: Bound::Upper, about: "ψ-family classifies berwald = holds, riemannian = fails (worst = Berwald residual)" },
    CheckSpec { name: "surface-berwald-condition", tol: 1e-8, bound: Bound::Upper, about: "|sH - (r^2-s^2) H_s| on the Berwald surface family, 20 draws x 20x20 grid" },
    CheckSpec { name: "lc2-closed-form", tol: 1e-9, bound: Bound::Upper, about: "|lhs - closed form| of the combined Landsberg/C1 relation" },
    CheckSpec { name: "lc2-nonvanishing", tol: 1e-3, bound: Bound::Lower, about: "min |closed form| on r in [0.5, 2], |s| in [0.1r, 0.8r]" },
    CheckSpec { name: "c1-denominator", tol: 0.1, bound: Bound::Lower, about: "min |1 - b1 r^2 + 2 b1 s^2 + s sqrt(r^2-s^2)(a + 4 b3)| on the same grid" },
    CheckSpec { name: "phi-jet-oracle", tol: 1e-6, bound: Bound::Upper, about: "φ-jet derivatives of total order ≤ 3 vs finite differences, catalog, relative" },
    CheckSpec { name: "oracle-concordance", tol: 1e-4, bound: Bound::Upper, about: "jet vs finite-difference Berwald curvature, catalog, n = 2, 3, 20 configs" },
];

pub fn check_spec(name: &str) -> Option<&'static CheckSpec> {
    CHECKS.iter().find(|c| c.name == name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Replaces the tolerance of every upper-bound check.
    pub tol: Option<f64>,
    pub seed: u64,
    /// Run only these checks (all when empty).
    pub only: Vec<String>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { tol: None, seed: DEFAULT_SEED, only: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub worst: f64,
    pub tol: f64,
    pub bound: Bound,
    pub cases: usize,
    pub detail: String,
    pub seconds: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        let rel = match self.bound {
            Bound::Upper => "<=",
            Bound::Lower => ">",
        };
        format!(
            "{} {:<26} worst {:.3e} (need {rel} {:.0e}, {} cases){}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tol,
            self.cases,
            if self.detail.is_empty() { String::new() } else { format!(" — {}", self.detail) }
        )
    }
}

// worst value, number of cases, free-form note
struct Outcome {
    worst: f64,
    cases: usize,
    detail: String,
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn nan_min(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.min(b)
    }
}

/// Runs `count` cases in parallel, case `i` seeded from `(seed, stream·2^20 + i)`.
fn cases(seed: u64, stream: u64, count: usize, f: impl Fn(&mut rand_chacha::ChaCha8Rng) -> Result<f64> + Sync) -> Result<f64> {
    let vals: Vec<Result<f64>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = point_rng(seed, (stream << 20) + i as u64);
            f(&mut rng)
        })
        .collect();
    let mut worst = 0.0;
    for v in vals {
        worst = nan_max(worst, v?);
    }
    Ok(worst)
}

fn rel_sym(a: &Sym2<f64>, b: &Sym2<f64>) -> Result<f64> {
    Ok(oracle::compare(a.as_slice(), b.as_slice(), 0.0)?.max_rel_err)
}

/// Random polynomial spray of degree 5 in s with coefficients in [-1, 1].
pub fn random_polynomial_spray(rng: &mut impl Rng, r: f64, s: f64) -> Result<SprayJets<f64>> {
    let shape = JetShape::s_only(families::FAMILY_ORDER);
    let (_, sj) = Jet2::seeds(r, s, shape);
    let mut poly = || {
        let coeffs: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        coeffs.iter().rev().fold(Jet2::zero((r, s), shape), |acc, &c| (&acc * &sj) + c)
    };
    let p = poly();
    let q = poly();
    SprayJets::new(r, s, p, q)
}

fn random_point(rng: &mut impl Rng, n: usize, frac: (f64, f64)) -> Result<Config<f64>> {
    let r = rng.gen_range(0.3..2.0);
    let f = rng.gen_range(frac.0..frac.1) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    config_with(rng, n, r, f * r)
}

fn model_pq(model: &PhiModel, cfg: &Config<f64>) -> Result<(Jet2<f64>, SprayJets<f64>)> {
    let phi = model.eval_phi_jet(cfg.r(), cfg.s(), JetShape::DEFAULT)?;
    let pq = geometry::spray_pq(&phi)?;
    Ok((phi, pq))
}

fn lc2_grid() -> Vec<(f64, f64)> {
    let rs = Range::new(0.5, 2.0, 16).values();
    let fs = Range::new(0.1, 0.8, 8).values();
    rs.iter()
        .flat_map(|&r| fs.iter().flat_map(move |&f| [(r, f * r), (r, -f * r)]))
        .collect()
}

fn run_named(name: &str, tol: f64, seed: u64) -> Result<Outcome> {
    let catalog = PhiModel::catalog();
    let out = |worst, cases| Ok(Outcome { worst, cases, detail: String::new() });
    match name {
        "inverse-identity" => {
            let mut worst = 0.0;
            for (m, model) in catalog.iter().enumerate() {
                for n in 2..=4 {
                    let w = cases(seed, (m * 10 + n) as u64, 100, |rng| {
                        let cfg = random_config(rng, model, n)?;
                        let phi = model.eval_phi_jet(cfg.r(), cfg.s(), JetShape::new(0, 2))?;
                        let prod = geometry::inverse_metric(&phi, &cfg)?.matmul(&geometry::metric(&phi, &cfg)?);
                        Ok((0..n)
                            .flat_map(|i| (0..n).map(move |j| (i, j)))
                            .map(|(i, j)| (prod.get(i, j) - if i == j { 1.0 } else { 0.0 }).abs())
                            .fold(0.0, nan_max))
                    })?;
                    worst = nan_max(worst, w);
                }
            }
            out(worst, catalog.len() * 300)
        }
        "trace-identity" => {
            let poly = cases(seed, 100, 200, |rng| {
                let n = rng.gen_range(2..=4);
                let cfg = random_point(rng, n, (0.0, 0.9))?;
                let pq = random_polynomial_spray(rng, cfg.r(), cfg.s())?;
                rel_sym(&geometry::berwald_trace(&geometry::berwald_curvature(&pq, &cfg)), &geometry::mean_berwald_direct(&pq, &cfg))
            })?;
            let mut worst = poly;
            for (m, model) in catalog.iter().enumerate() {
                worst = nan_max(
                    worst,
                    cases(seed, 110 + m as u64, 20, |rng| {
                        let cfg = random_config(rng, model, 3)?;
                        let (_, pq) = model_pq(model, &cfg)?;
                        rel_sym(&geometry::berwald_trace(&geometry::berwald_curvature(&pq, &cfg)), &geometry::mean_berwald_direct(&pq, &cfg))
                    })?,
                );
            }
            out(worst, 200 + 20 * catalog.len())
        }
        "e-form-agreement" | "e-form-jet-limit" => {
            let near_zero = name == "e-form-jet-limit";
            let switch = geometry::DEFAULT_S_JET_SWITCH;
            let compare = |pq: &SprayJets<f64>, cfg: &Config<f64>| -> Result<f64> {
                let sc = geometry::scalar_hk(pq, cfg.n())?;
                let (e_h, ratio) = geometry::mean_berwald_h_detailed(&sc, cfg, switch)?;
                if ratio.jet_limit != near_zero {
                    return Err(Error::InvalidConfig(format!("s = {} on the wrong side of the jet switch", cfg.s())));
                }
                rel_sym(&e_h, &geometry::mean_berwald_direct(pq, cfg))
            };
            let frac = if near_zero { (1e-6, 1e-4) } else { (0.05, 0.9) };
            let poly = cases(seed, 200 + near_zero as u64, 100, |rng| {
                let n = rng.gen_range(2..=4);
                let cfg = random_point(rng, n, frac)?;
                let pq = random_polynomial_spray(rng, cfg.r(), cfg.s())?;
                compare(&pq, &cfg)
            })?;
            let mut worst = poly;
            let mut count = 100;
            for (m, model) in catalog.iter().enumerate() {
                // the ψ-family is singular at s = 0
                if near_zero && model.sample_band().0 > 0.0 {
                    continue;
                }
                count += 20;
                worst = nan_max(
                    worst,
                    cases(seed, 210 + 10 * near_zero as u64 + m as u64, 20, |rng| {
                        let cfg = if near_zero {
                            let r = rng.gen_range(0.15..0.85) * model.r_max();
                            let f = rng.gen_range(frac.0..frac.1);
                            config_with(rng, 3, r, f * r)?
                        } else {
                            random_config(rng, model, 3)?
                        };
                        // the limit is as accurate as the H series is deep: use two extra orders
                        let shape = if near_zero { JetShape::new(1, JetShape::DEFAULT.s_order + 2) } else { JetShape::DEFAULT };
                        let pq = geometry::spray_pq(&model.eval_phi_jet(cfg.r(), cfg.s(), shape)?)?;
                        compare(&pq, &cfg)
                    })?,
                );
            }
            out(worst, count)
        }
        "compatibility-closure" => {
            let mut worst = 0.0;
            for (m, model) in catalog.iter().enumerate() {
                worst = nan_max(
                    worst,
                    cases(seed, 300 + m as u64, 100, |rng| {
                        let cfg = random_config(rng, model, 3)?;
                        let (phi, pq) = model_pq(model, &cfg)?;
                        Ok(geometry::compatibility_residuals(&phi, &pq)?.max_abs())
                    })?,
                );
            }
            out(worst, 100 * catalog.len())
        }
        "berwald-n3-flat" => {
            let mut worst = 0.0;
            for draw in 0..3u64 {
                let mut rng = point_rng(seed, 400 + draw);
                let f = BerwaldCoefs { f1: rng.gen_range(-1.0..1.0), f2: rng.gen_range(-1.0..1.0), f3: rng.gen_range(-1.0..1.0) };
                worst = nan_max(
                    worst,
                    cases(seed, 410 + draw, 100, |rng| {
                        let n = rng.gen_range(3..=4);
                        let cfg = random_point(rng, n, (0.0, 0.9))?;
                        let pq = families::berwald_pq_n3(&f, cfg.r(), cfg.s())?;
                        Ok(geometry::berwald_curvature(&pq, &cfg).max_abs())
                    })?,
                );
            }
            out(worst, 300)
        }
        "homogeneous-spray" | "homogeneous-berwald-jet" | "homogeneous-berwald-fd" => {
            let mut worst = 0.0;
            for (m, h) in HOMOGENEOUS_PROFILES.iter().enumerate() {
                let model = PhiModel::homogeneous(h)?;
                worst = nan_max(
                    worst,
                    cases(seed, 500 + m as u64, 10, |rng| {
                        let cfg = random_config(rng, &model, 3)?;
                        let (r, s) = (cfg.r(), cfg.s());
                        Ok(match name {
                            "homogeneous-spray" => {
                                let (_, pq) = model_pq(&model, &cfg)?;
                                (pq.p(0) + s / (r * r)).abs().max((pq.q(0) - 0.5 / (r * r)).abs())
                            }
                            "homogeneous-berwald-jet" => geometry::berwald_curvature(&model_pq(&model, &cfg)?.1, &cfg).max_abs(),
                            _ => oracle::fd_berwald(&model, &cfg, &FDScheme::default())?.max_abs(),
                        })
                    })?,
                );
            }
            out(worst, 10 * HOMOGENEOUS_PROFILES.len())
        }
        "landsberg-trace" | "landsberg-trace-surface" => {
            let surface = name == "landsberg-trace-surface";
            let dims: &[usize] = if surface { &[2] } else { &[3, 4] };
            let mut worst = 0.0;
            for draw in 0..3u64 {
                let mut rng = point_rng(seed, 600 + draw);
                let mut c2: f64 = 0.0;
                while c2.abs() < 0.1 {
                    c2 = rng.gen_range(-2.0..2.0);
                }
                let c = LandsbergCoefs { c0: rng.gen_range(-1.0..1.0), c1: rng.gen_range(-1.0..1.0), c2, c3: rng.gen_range(-1.0..1.0) };
                for &n in dims {
                    worst = nan_max(
                        worst,
                        cases(seed, 610 + 10 * draw + n as u64, 20, |rng| {
                            let cfg = random_point(rng, n, (0.0, 0.9))?;
                            let (r, s, u) = (cfg.r(), cfg.s(), cfg.u());
                            let tr = geometry::mean_berwald_direct(&families::landsberg_pq_n3(&c, r, s)?, &cfg).trace();
                            if surface {
                                Ok(tr.abs())
                            } else {
                                let want = (n * (n - 2)) as f64 * c.c2 / (u * (r * r - s * s).sqrt());
                                Ok((tr - want).abs() / want.abs())
                            }
                        })?,
                    );
                }
            }
            out(worst, 60 * dims.len())
        }
        "psi-compatibility" => {
            let model = PhiModel::psi_family("1+v", "0")?;
            let mut c1_worst = 0.0;
            let worst = (0..100)
                .map(|i| {
                    let mut rng = point_rng(seed, (700 << 20) + i);
                    let cfg = random_config(&mut rng, &model, 3)?;
                    let (r, s) = (cfg.r(), cfg.s());
                    let phi = model.eval_phi_jet(r, s, JetShape::DEFAULT)?;
                    let f = BerwaldCoefs { f1: -1.0 / (r * r), f2: 0.0, f3: 0.5 / (r * r) };
                    let res = geometry::compatibility_residuals(&phi, &families::berwald_pq_n3(&f, r, s)?)?;
                    c1_worst = nan_max(c1_worst, res.c1.abs());
                    Ok(res.c2.abs())
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, nan_max);
            Ok(Outcome { worst, cases: 100, detail: format!("max |C1| {c1_worst:.2e}") })
        }
        "psi-classification" => {
            let model = PhiModel::psi_family("1+v", "0")?;
            let grid = GridSpec::new(Range::new(0.5, 2.0, 4), Range::new(-0.8, 0.8, 4), 3, seed);
            let cls = families::classify(&model, &grid, tol)?;
            let verdict_ok = cls.berwald == Flag::Holds && cls.riemannian == Flag::Fails;
            Ok(Outcome {
                // an unexpected verdict must fail whatever the residual
                worst: if verdict_ok { cls.residuals.berwald } else { f64::INFINITY },
                cases: cls.points.len(),
                detail: format!(
                    "berwald = {} ({:.2e}), riemannian = {} ({:.2e})",
                    cls.berwald, cls.residuals.berwald, cls.riemannian, cls.residuals.riemannian
                ),
            })
        }
        "surface-berwald-condition" => {
            let grid: Vec<(f64, f64)> = Range::new(0.5, 2.0, 20)
                .values()
                .into_iter()
                .flat_map(|r| Range::new(-0.9, 0.9, 20).values().into_iter().map(move |f| (r, f * r)))
                .collect();
            let mut worst = 0.0;
            for draw in 0..20u64 {
                let mut rng = point_rng(seed, 800 + draw);
                let mut g = || rng.gen_range(-1.0..1.0);
                let b = SurfaceCoefs { a: g(), b0: g(), b1: g(), b2: g(), b3: g() };
                let w = grid
                    .par_iter()
                    .map(|&(r, s)| {
                        let sc = geometry::scalar_hk(&families::berwald_pq_surface(&b, r, s)?, 2)?;
                        Ok(geometry::surface_berwald_residual(&sc).abs())
                    })
                    .collect::<Result<Vec<f64>>>()?
                    .into_iter()
                    .fold(0.0, nan_max);
                worst = nan_max(worst, w);
            }
            out(worst, 20 * grid.len())
        }
        "lc2-closed-form" => {
            let grid = lc2_grid();
            let mut worst = 0.0;
            let mut at = (0.0, 0.0, 0.0, 0.0);
            for &(r, s) in &grid {
                let (lhs, closed) = families::lc2_contradiction(r, s)?;
                let d = (lhs - closed).abs();
                if !(d <= worst) {
                    worst = d;
                    at = (r, s, lhs, closed);
                }
            }
            Ok(Outcome {
                worst,
                cases: grid.len(),
                detail: format!("worst at r = {:.3}, s = {:.3}: lhs {:.3e}, closed form {:.3e}", at.0, at.1, at.2, at.3),
            })
        }
        "lc2-nonvanishing" => {
            let grid = lc2_grid();
            let worst = grid.iter().map(|&(r, s)| families::lc2_closed_form(r, s).abs()).fold(f64::INFINITY, nan_min);
            out(worst, grid.len())
        }
        "c1-denominator" => {
            let grid = lc2_grid();
            let worst = grid
                .iter()
                .map(|&(r, s)| families::c1_denominator(&families::lc2_coefficients(r), r, s).abs())
                .fold(f64::INFINITY, nan_min);
            out(worst, grid.len())
        }
        "phi-jet-oracle" => {
            let mut worst = 0.0;
            for (m, model) in catalog.iter().enumerate() {
                worst = nan_max(
                    worst,
                    cases(seed, 900 + m as u64, 10, |rng| {
                        let cfg = random_config(rng, model, 2)?;
                        let (r, s) = (cfg.r(), cfg.s());
                        let jet = model.eval_phi_jet(r, s, JetShape::DEFAULT)?;
                        let mut a = Vec::new();
                        let mut b = Vec::new();
                        for i in 0..=oracle::MAX_R_ORDER {
                            // beyond total order 3 double-precision differencing is
                            // rounding-bound above 1e-6 (see the oracle unit tests)
                            for k in 0..=oracle::MAX_S_ORDER.min(3 - i) {
                                a.push(jet.derivative(i, k)?);
                                b.push(oracle::fd_phi_derivs(model, r, s, i, k, &FDScheme::default())?);
                            }
                        }
                        Ok(oracle::compare(&b, &a, 0.0)?.max_rel_err)
                    })?,
                );
            }
            out(worst, 10 * catalog.len())
        }
        "oracle-concordance" => {
            let mut worst = 0.0;
            for (m, model) in catalog.iter().enumerate() {
                for n in 2..=3 {
                    worst = nan_max(
                        worst,
                        cases(seed, 1000 + 10 * m as u64 + n as u64, 20, |rng| {
                            let cfg = random_config(rng, model, n)?;
                            let jet = geometry::berwald_curvature(&model_pq(model, &cfg)?.1, &cfg);
                            let fd = oracle::fd_berwald(model, &cfg, &FDScheme::default())?;
                            Ok(oracle::compare(fd.as_slice(), jet.as_slice(), 0.0)?.max_rel_err)
                        })?,
                    );
                }
            }
            out(worst, 40 * catalog.len())
        }
        _ => Err(Error::InvalidConfig(format!("unknown check `{name}`"))),
    }
}

/// Runs one named check. `tol` replaces the built-in tolerance of
/// upper-bound checks; errors during a check count as a failure.
pub fn run_check(name: &str, tol: Option<f64>, seed: u64) -> Result<CheckResult> {
    let spec = check_spec(name).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "unknown check `{name}` (known: {})",
            CHECKS.iter().map(|c| c.name).collect::<Vec<_>>().join(", ")
        ))
    })?;
    let tol = match spec.bound {
        Bound::Upper => tol.unwrap_or(spec.tol),
        Bound::Lower => spec.tol,
    };
    let start = Instant::now();
    let outcome = run_named(name, tol, seed);
    let seconds = start.elapsed().as_secs_f64();
    Ok(match outcome {
        Ok(o) => CheckResult {
            name: name.into(),
            pass: match spec.bound {
                Bound::Upper => o.worst <= tol,
                Bound::Lower => o.worst > tol,
            },
            worst: o.worst,
            tol,
            bound: spec.bound,
            cases: o.cases,
            detail: o.detail,
            seconds,
        },
        Err(e) => CheckResult {
            name: name.into(),
            pass: false,
            worst: f64::NAN,
            tol,
            bound: spec.bound,
            cases: 0,
            detail: format!("error: {e}"),
            seconds,
        },
    })
}

/// Runs the selected checks in their fixed order.
pub fn run(opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    for name in &opts.only {
        if check_spec(name).is_none() {
            return run_check(name, opts.tol, opts.seed).map(|_| Vec::new());
        }
    }
    CHECKS
        .iter()
        .filter(|c| opts.only.is_empty() || opts.only.iter().any(|o| o == c.name))
        .map(|c| run_check(c.name, opts.tol, opts.seed))
        .collect()
}
