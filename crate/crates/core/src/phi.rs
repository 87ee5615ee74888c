//! φ models: parsed expressions and the built-in metric families.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{parse_phi, Expr, JetEnv, Var};
use crate::jets::{Jet2, JetShape};
use crate::quadrature;
use crate::scalar::Scalar;

pub const DEFAULT_R_MAX: f64 = 2.5;
pub const DEFAULT_S_SAFETY: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub enum PhiKind {
    Expression(Expr),
    Euclidean,
    /// `a(r) · sqrt((c1 + 2 c3) s² − 2 c3 r² + 1)`
    Riemannian { a: Expr, c1: f64, c3: f64 },
    /// `h(s / r) / r`
    Homogeneous { h: Expr },
    /// `s ψ(s² / (g + s² ∫4 r c0 g)) · exp(−∫(2/r − 2 r³ c0))`, `g = exp(∫(2/r − 4 r³ c0))`
    PsiFamily { psi: Expr, c0: Expr },
}

impl PhiKind {
    pub fn name(&self) -> &'static str {
        match self {
            PhiKind::Expression(_) => "expression",
            PhiKind::Euclidean => "euclidean",
            PhiKind::Riemannian { .. } => "riemannian",
            PhiKind::Homogeneous { .. } => "homogeneous",
            PhiKind::PsiFamily { .. } => "psi_family",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiModel {
    kind: PhiKind,
    r_max: f64,
    s_safety: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityReport<T> {
    pub phi: T,
    pub a1: T,
    pub a2: T,
    pub regular_nd: bool,
    pub regular_2d: bool,
}

impl PhiModel {
    pub fn new(kind: PhiKind) -> Result<Self> {
        Self::with_domain(kind, DEFAULT_R_MAX, DEFAULT_S_SAFETY)
    }

    pub fn with_domain(kind: PhiKind, r_max: f64, s_safety: f64) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::InvalidModel(format!("ball radius must be positive, got {r_max}")));
        }
        if !(s_safety > 0.0 && s_safety < 1.0) {
            return Err(Error::InvalidModel(format!("s safety factor must lie in (0, 1), got {s_safety}")));
        }
        let check = |e: &Expr, allowed: &[Var], what: &str| -> Result<()> {
            match e.foreign_var(allowed) {
                None => Ok(()),
                Some((v, span)) => Err(Error::InvalidModel(format!(
                    "{what} may not use `{}` (at {}..{})",
                    v.name(),
                    span.start,
                    span.end
                ))),
            }
        };
        match &kind {
            PhiKind::Expression(e) => check(e, &[Var::R, Var::S], "phi")?,
            PhiKind::Euclidean => {}
            PhiKind::Riemannian { a, c1, c3 } => {
                check(a, &[Var::R], "a(r)")?;
                if !c1.is_finite() || !c3.is_finite() {
                    return Err(Error::InvalidModel("c1 and c3 must be finite".into()));
                }
            }
            PhiKind::Homogeneous { h } => check(h, &[Var::V], "h(v)")?,
            PhiKind::PsiFamily { psi, c0 } => {
                check(psi, &[Var::V], "psi(v)")?;
                check(c0, &[Var::R], "c0(r)")?;
            }
        }
        Ok(PhiModel { kind, r_max, s_safety })
    }

    pub fn euclidean() -> Self {
        PhiModel { kind: PhiKind::Euclidean, r_max: DEFAULT_R_MAX, s_safety: DEFAULT_S_SAFETY }
    }

    pub fn expression(src: &str) -> Result<Self> {
        Self::new(PhiKind::Expression(parse_phi(src)?))
    }

    pub fn homogeneous(h: &str) -> Result<Self> {
        Self::new(PhiKind::Homogeneous { h: parse_phi(h)? })
    }

    pub fn riemannian(a: &str, c1: f64, c3: f64) -> Result<Self> {
        Self::new(PhiKind::Riemannian { a: parse_phi(a)?, c1, c3 })
    }

    pub fn psi_family(psi: &str, c0: &str) -> Result<Self> {
        Self::new(PhiKind::PsiFamily { psi: parse_phi(psi)?, c0: parse_phi(c0)? })
    }

    pub fn kind(&self) -> &PhiKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn s_safety(&self) -> f64 {
        self.s_safety
    }

    /// The five default catalog instances, in catalog order.
    pub fn catalog() -> Vec<PhiModel> {
        catalog_list().iter().map(|e| e.default_spec().build().expect("catalog defaults are valid")).collect()
    }

    /// Range of |s|/r that random samplers should draw from.
    ///
    /// The ψ-family vanishes at s = 0 (its spray is singular there) and, for
    /// the default profile, loses its spray denominator near |s| = 0.87 r.
    pub fn sample_band(&self) -> (f64, f64) {
        match self.kind {
            PhiKind::PsiFamily { .. } => (0.1, 0.8f64.min(self.s_safety)),
            _ => (0.0, 0.9f64.min(self.s_safety)),
        }
    }

    pub fn check_admissible<T: Scalar>(&self, r: T, s: T) -> Result<()> {
        let (rf, sf) = (r.as_f64(), s.as_f64());
        let reason = if !(rf > 0.0) {
            Some("r must be positive".to_string())
        } else if !(rf < self.r_max) {
            Some(format!("r must be below the ball radius {}", self.r_max))
        } else if !(s.abs() <= T::lit(self.s_safety) * r) {
            Some(format!("|s| must not exceed {} r", self.s_safety))
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::Inadmissible { r: rf, s: sf, reason }),
            None => Ok(()),
        }
    }

    /// Jet of φ at an admissible `(r, s)`.
    pub fn eval_phi_jet<T: Scalar>(&self, r: T, s: T, shape: JetShape) -> Result<Jet2<T>> {
        self.check_admissible(r, s)?;
        self.eval_unchecked(r, s, shape)
    }

    /// Like [`eval_phi_jet`](Self::eval_phi_jet) without the domain check;
    /// the finite-difference oracle uses it for stencil nodes.
    pub fn eval_unchecked<T: Scalar>(&self, r: T, s: T, shape: JetShape) -> Result<Jet2<T>> {
        let at = (r, s);
        let (rj, sj) = Jet2::seeds(r, s, shape);
        let mut env = JetEnv::new(at, shape);
        match &self.kind {
            PhiKind::Euclidean => Ok(Jet2::constant(T::one(), at, shape)),
            PhiKind::Expression(e) => {
                env.r = Some(rj);
                env.s = Some(sj);
                e.eval_jet(&env)
            }
            PhiKind::Riemannian { a, c1, c3 } => {
                env.r = Some(rj.clone());
                let aj = a.eval_jet(&env)?;
                let k = T::lit(c1 + 2.0 * c3);
                let rad = (&(&sj * &sj) * k - &(&rj * &rj) * T::lit(2.0 * c3)) + T::one();
                aj.try_mul(&rad.sqrt()?)
            }
            PhiKind::Homogeneous { h } => {
                env.v = Some(sj.div_eps(&rj, env.div_epsilon)?);
                h.eval_jet(&env)?.div_eps(&rj, env.div_epsilon)
            }
            PhiKind::PsiFamily { psi, c0 } => {
                let parts = PsiParts::new(c0, r, &rj, shape)?;
                let s2 = &sj * &sj;
                let w = parts.g.try_add(&s2.try_mul(&parts.j)?)?;
                env.v = Some(s2.div_eps(&w, env.div_epsilon)?);
                let psi_j = psi.eval_jet(&env)?;
                let factor = parts.b.exp().div_eps(&(&rj * &rj), env.div_epsilon)?;
                sj.try_mul(&psi_j)?.try_mul(&factor)
            }
        }
    }

    pub fn eval_phi<T: Scalar>(&self, r: T, s: T) -> Result<T> {
        Ok(self.eval_phi_jet(r, s, JetShape::new(0, 0))?.value())
    }

    pub fn regularity_check<T: Scalar>(&self, r: T, s: T) -> Result<RegularityReport<T>> {
        let jet = self.eval_phi_jet(r, s, JetShape::new(0, 2))?;
        let phi = jet.value();
        let phi_s = jet.derivative(0, 1)?;
        let phi_ss = jet.derivative(0, 2)?;
        let a1 = phi - s * phi_s;
        let a2 = a1 + (r * r - s * s) * phi_ss;
        let zero = T::zero();
        Ok(RegularityReport {
            phi,
            a1,
            a2,
            regular_nd: phi > zero && a1 > zero && a2 > zero,
            regular_2d: a2 > zero,
        })
    }

    /// Input echo for reports: kind name, parameters as source text, domain.
    pub fn echo(&self) -> ModelEcho {
        let mut params = BTreeMap::new();
        match &self.kind {
            PhiKind::Expression(e) => {
                params.insert("phi".into(), e.to_string());
            }
            PhiKind::Euclidean => {}
            PhiKind::Riemannian { a, c1, c3 } => {
                params.insert("a".into(), a.to_string());
                params.insert("c1".into(), format!("{c1:?}"));
                params.insert("c3".into(), format!("{c3:?}"));
            }
            PhiKind::Homogeneous { h } => {
                params.insert("h".into(), h.to_string());
            }
            PhiKind::PsiFamily { psi, c0 } => {
                params.insert("psi".into(), psi.to_string());
                params.insert("c0".into(), c0.to_string());
            }
        }
        ModelEcho { metric: self.name().into(), params, r0: self.r_max, s_safety: self.s_safety }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelEcho {
    pub metric: String,
    pub params: BTreeMap<String, String>,
    pub r0: f64,
    pub s_safety: f64,
}

// r-only pieces of the ψ-family at a base radius, as jets of the full shape.
struct PsiParts<T> {
    g: Jet2<T>,
    j: Jet2<T>,
    b: Jet2<T>,
}

impl<T: Scalar> PsiParts<T> {
    fn new(c0: &Expr, r: T, rj: &Jet2<T>, shape: JetShape) -> Result<Self> {
        let at = rj.base();
        let r2 = rj * rj;
        if c0.is_literal_zero() {
            // closed forms: A = B = 0, g = r², ∫4 r c0 g = 0
            let zero = Jet2::zero(at, shape);
            return Ok(PsiParts { g: r2, j: zero.clone(), b: zero });
        }
        let mut env = JetEnv::new(at, shape);
        env.r = Some(rj.clone());
        let c0j = c0.eval_jet(&env)?;
        let r3 = &r2 * rj;

        let anchor = T::lit(DEFAULT_R_MAX * 0.5);
        let tol = T::epsilon() * T::lit(1e3);
        let c0_at = |t: T| c0.eval(Some(t), None, None);
        let a_at = |t: T| quadrature::integrate(|x: T| Ok(T::lit(4.0) * x * x * x * c0_at(x)?), anchor, t, tol);
        let g_at = |t: T| -> Result<T> { Ok(t * t * (-a_at(t)?).exp()) };

        let a_val = a_at(r)?;
        let a_jet = integrate_jet(a_val, &(&(&r3 * &c0j) * T::lit(4.0)));
        let g = r2.try_mul(&(-a_jet).exp())?;

        let j_val = quadrature::integrate(|t: T| Ok(T::lit(4.0) * t * c0_at(t)? * g_at(t)?), anchor, r, tol)?;
        let j = integrate_jet(j_val, &(&(&(rj * &c0j) * &g) * T::lit(4.0)));

        let b_val = quadrature::integrate(|t: T| Ok(T::lit(2.0) * t * t * t * c0_at(t)?), anchor, r, tol)?;
        let b = integrate_jet(b_val, &(&(&r3 * &c0j) * T::lit(2.0)));
        Ok(PsiParts { g, j, b })
    }
}

// Antiderivative of an r-only jet with a known value at the base point.
fn integrate_jet<T: Scalar>(value: T, integrand: &Jet2<T>) -> Jet2<T> {
    let shape = integrand.shape();
    let mut coeffs = vec![T::zero(); shape.len()];
    coeffs[0] = value;
    for i in 1..=shape.r_order {
        coeffs[i * (shape.s_order + 1)] = integrand.coeff(i - 1, 0) / T::from_count(i);
    }
    Jet2::from_coeffs(integrand.base(), shape, coeffs).expect("shape matches integrand")
}

// ---------------------------------------------------------------------------
// Catalog

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// Expression in the given variable.
    Expr(char),
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    pub default: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub params: Vec<ParamSpec>,
}

impl CatalogEntry {
    pub fn default_spec(&self) -> ModelSpec {
        let mut spec = ModelSpec { metric: Some(self.name.to_string()), ..ModelSpec::default() };
        for p in &self.params {
            spec.set(p.name, p.default);
        }
        spec
    }
}

pub fn catalog_list() -> Vec<CatalogEntry> {
    use ParamKind::*;
    vec![
        CatalogEntry { name: "euclidean", description: "phi = 1", params: vec![] },
        CatalogEntry {
            name: "riemannian",
            description: "phi = a(r) sqrt((c1 + 2 c3) s^2 - 2 c3 r^2 + 1)",
            params: vec![
                ParamSpec { name: "a", kind: Expr('r'), default: "exp(-r^2/4)" },
                ParamSpec { name: "c1", kind: Real, default: "0.5" },
                ParamSpec { name: "c3", kind: Real, default: "-0.1" },
            ],
        },
        CatalogEntry {
            name: "homogeneous",
            description: "phi = h(s/r) / r, homogeneous of degree -1",
            params: vec![ParamSpec { name: "h", kind: Expr('v'), default: "exp(v/2)" }],
        },
        CatalogEntry {
            name: "psi_family",
            description: "phi = s psi(s^2 / (g + s^2 int 4 r c0 g dr)) exp(-int (2/r - 2 r^3 c0) dr)",
            params: vec![
                ParamSpec { name: "psi", kind: Expr('v'), default: "1+v" },
                ParamSpec { name: "c0", kind: Expr('r'), default: "0" },
            ],
        },
        CatalogEntry {
            name: "expression",
            description: "phi given directly as an expression in r and s",
            params: vec![ParamSpec { name: "phi", kind: Expr('s'), default: "sqrt(1+s^2) + s/2" }],
        },
    ]
}

/// Loose model description, as it arrives from flags or a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub metric: Option<String>,
    pub phi: Option<String>,
    pub h: Option<String>,
    pub psi: Option<String>,
    pub c0: Option<String>,
    pub a: Option<String>,
    pub c1: Option<f64>,
    pub c3: Option<f64>,
    pub r0: Option<f64>,
    pub s_safety: Option<f64>,
}

impl ModelSpec {
    fn set(&mut self, name: &str, value: &str) {
        let text = Some(value.to_string());
        match name {
            "phi" => self.phi = text,
            "h" => self.h = text,
            "psi" => self.psi = text,
            "c0" => self.c0 = text,
            "a" => self.a = text,
            "c1" => self.c1 = value.parse().ok(),
            "c3" => self.c3 = value.parse().ok(),
            _ => unreachable!("unknown catalog parameter {name}"),
        }
    }

    /// Builds the model; missing family parameters fall back to catalog defaults.
    pub fn build(&self) -> Result<PhiModel> {
        let metric = match (&self.metric, &self.phi) {
            (Some(m), _) => m.as_str(),
            (None, Some(_)) => "expression",
            (None, None) => return Err(Error::InvalidModel("give either a phi expression or a metric name".into())),
        };
        let entry = catalog_list()
            .into_iter()
            .find(|e| e.name == metric)
            .ok_or_else(|| Error::InvalidModel(format!("unknown metric `{metric}`")))?;
        let defaults = entry.default_spec();
        let pick = |mine: &Option<String>, dflt: &Option<String>| -> String {
            mine.clone().or_else(|| dflt.clone()).unwrap_or_default()
        };
        let kind = match metric {
            "euclidean" => PhiKind::Euclidean,
            "expression" => PhiKind::Expression(parse_phi(&pick(&self.phi, &defaults.phi))?),
            "riemannian" => PhiKind::Riemannian {
                a: parse_phi(&pick(&self.a, &defaults.a))?,
                c1: self.c1.or(defaults.c1).unwrap_or(0.0),
                c3: self.c3.or(defaults.c3).unwrap_or(0.0),
            },
            "homogeneous" => PhiKind::Homogeneous { h: parse_phi(&pick(&self.h, &defaults.h))? },
            "psi_family" => PhiKind::PsiFamily {
                psi: parse_phi(&pick(&self.psi, &defaults.psi))?,
                c0: parse_phi(&pick(&self.c0, &defaults.c0))?,
            },
            _ => unreachable!(),
        };
        PhiModel::with_domain(kind, self.r0.unwrap_or(DEFAULT_R_MAX), self.s_safety.unwrap_or(DEFAULT_S_SAFETY))
    }
}
