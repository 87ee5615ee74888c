//! Finite-difference oracle: central differences with Richardson
//! extrapolation, independent of the jet machinery.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, Config, Rank4};
use crate::jets::JetShape;
use crate::phi::PhiModel;

/// Largest r-order and s-order the φ oracle differentiates.
pub const MAX_R_ORDER: usize = 1;
pub const MAX_S_ORDER: usize = 5;
/// How many times a step may be halved to keep a stencil in the domain.
const MAX_SHRINK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FDScheme {
    /// Smallest step; `None` picks `ε^{1/(k + 2 + 2L)}` for total order `k`
    /// and `L` Richardson levels (the truncation/rounding balance of the
    /// extrapolated formula). Scaled by the coordinate magnitude; the
    /// Berwald oracle scales by `|y|` and divides by `2^L`.
    pub base_step: Option<f64>,
    pub richardson_levels: usize,
}

impl Default for FDScheme {
    fn default() -> Self {
        FDScheme { base_step: None, richardson_levels: 2 }
    }
}

impl FDScheme {
    pub fn step_for(&self, order: usize) -> f64 {
        self.base_step
            .unwrap_or_else(|| {
                let l = self.richardson_levels;
                f64::EPSILON.powf(1.0 / (order + 2 + 2 * l) as f64)
            })
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

// (offset multiplier, weight) of the k-th central difference with unit step
fn central_weights(k: usize) -> Vec<(f64, f64)> {
    (0..=k)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            (k as f64 / 2.0 - j as f64, sign * binomial(k, j))
        })
        .collect()
}

// Tableau over steps h·2^L, ..., h (even error expansion).
fn richardson(estimates: Vec<f64>) -> f64 {
    let mut t = estimates;
    let mut factor = 1.0;
    for _ in 1..t.len() {
        factor *= 4.0;
        t = t.windows(2).map(|w| w[1] + (w[1] - w[0]) / (factor - 1.0)).collect();
    }
    t[0]
}

/// `∂_r^i ∂_s^k f` at `(r, s)` from a tensor-product central stencil.
///
/// `inside` decides which nodes are usable; the step is halved (up to a
/// limit) until every node of the widest stencil is inside.
pub fn fd_partial(
    f: impl Fn(f64, f64) -> Result<f64>,
    inside: impl Fn(f64, f64) -> bool,
    r: f64,
    s: f64,
    i: usize,
    k: usize,
    scheme: &FDScheme,
) -> Result<f64> {
    if i + k == 0 {
        return f(r, s);
    }
    let levels = scheme.richardson_levels;
    let wr = central_weights(i);
    let ws = central_weights(k);
    let widest = 2f64.powi(levels as i32);
    let (sr, ss) = (r.abs().max(1.0), s.abs().max(1.0));
    let mut h = scheme.step_for(i + k);
    let mut shrinks = 0;
    loop {
        let fits = wr.iter().all(|&(a, _)| {
            ws.iter().all(|&(b, _)| inside(r + a * h * widest * sr, s + b * h * widest * ss))
        });
        if fits {
            break;
        }
        shrinks += 1;
        if shrinks > MAX_SHRINK {
            return Err(Error::StencilOutsideDomain { r, s });
        }
        h /= 2.0;
    }
    let mut estimates = Vec::with_capacity(levels + 1);
    for level in (0..=levels).rev() {
        let step = h * 2f64.powi(level as i32);
        let (hr, hs) = (step * sr, step * ss);
        let mut acc = 0.0;
        for &(a, wa) in &wr {
            for &(b, wb) in &ws {
                acc += wa * wb * f(r + a * hr, s + b * hs)?;
            }
        }
        estimates.push(acc / (hr.powi(i as i32) * hs.powi(k as i32)));
    }
    Ok(richardson(estimates))
}

// Nodes where φ itself may be evaluated: anywhere in the ball where the
// formula stays finite. Admissibility of the centre is checked separately;
// letting the stencil straddle |s| = r keeps it wide near the cone edge.
fn phi_inside(model: &PhiModel) -> impl Fn(f64, f64) -> bool + '_ {
    move |r, s| {
        r > 0.0
            && r < model.r_max()
            && model.eval_unchecked(r, s, JetShape::new(0, 0)).is_ok_and(|j| j.value().is_finite())
    }
}

// Nodes where the spray may be evaluated: inside the safety cone and inside
// the model's usable |s|/r band with a small margin.
fn spray_inside(model: &PhiModel) -> impl Fn(f64, f64) -> bool + '_ {
    let (lo, hi) = model.sample_band();
    let upper = model.s_safety().min(hi + 0.05);
    move |r, s| r > 0.0 && r < model.r_max() && s.abs() <= upper * r && s.abs() >= 0.5 * lo * r
}

/// `∂_r^i ∂_s^k φ` at `(r, s)`, with `i ≤ 1`, `k ≤ 5`.
pub fn fd_phi_derivs(model: &PhiModel, r: f64, s: f64, i: usize, k: usize, scheme: &FDScheme) -> Result<f64> {
    if i > MAX_R_ORDER || k > MAX_S_ORDER {
        return Err(Error::OrderOutOfRange { i, k, r_order: MAX_R_ORDER, s_order: MAX_S_ORDER });
    }
    model.check_admissible(r, s)?;
    fd_partial(
        |r, s| Ok(model.eval_unchecked(r, s, JetShape::new(0, 0))?.value()),
        phi_inside(model),
        r,
        s,
        i,
        k,
        scheme,
    )
}

/// `P`, `Q` from finite-difference derivatives of φ.
pub fn fd_spray_pq(model: &PhiModel, r: f64, s: f64, scheme: &FDScheme) -> Result<(f64, f64)> {
    let d = |i, k| fd_phi_derivs(model, r, s, i, k, scheme);
    let (f, fr, fs, fss, frs) = (d(0, 0)?, d(1, 0)?, d(0, 1)?, d(0, 2)?, d(1, 1)?);
    let w = r * r - s * s;
    let den = f - s * fs + w * fss;
    if den.abs() < 1e-12 || f.abs() < 1e-12 {
        return Err(Error::SingularMetric { what: "finite-difference spray denominator", value: den.min(f) });
    }
    let q = (-fr + s * frs + r * fss) / (2.0 * r * den);
    let p = -q / f * (s * f + w * fs) + (s * fr + r * fs) / (2.0 * r * f);
    Ok((p, q))
}

/// Third y-derivatives of `G^i = u P y^i + u² Q x^i`, where `pq(r, s)`
/// supplies `(P, Q)` at each stencil node and `inside` vets the node.
pub fn fd_berwald_with(
    cfg: &Config<f64>,
    scheme: &FDScheme,
    pq: impl Fn(f64, f64) -> Result<(f64, f64)>,
    inside: impl Fn(f64, f64) -> bool,
) -> Result<Rank4<f64>> {
    let n = cfg.n();
    let levels = scheme.richardson_levels;
    let scale = cfg.u();
    let r = cfg.r();
    let node = |y: &[f64]| -> Option<Config<f64>> {
        let c = cfg.with_y(y.to_vec()).ok()?;
        inside(c.r(), c.s()).then_some(c)
    };
    let shifted = |h: f64, dirs: [usize; 3], signs: [f64; 3]| -> Vec<f64> {
        let mut y = cfg.y().to_vec();
        for (&d, &sg) in dirs.iter().zip(&signs) {
            y[d] += sg * h;
        }
        y
    };
    const SIGNS: [[f64; 3]; 8] = [
        [1., 1., 1.],
        [1., 1., -1.],
        [1., -1., 1.],
        [1., -1., -1.],
        [-1., 1., 1.],
        [-1., 1., -1.],
        [-1., -1., 1.],
        [-1., -1., -1.],
    ];

    let g_at = |y: Vec<f64>| -> Result<Vec<f64>> {
        let c = node(&y).ok_or(Error::StencilOutsideDomain { r, s: cfg.s() })?;
        let (p, q) = pq(c.r(), c.s())?;
        Ok(geometry::spray_from_values(p, q, &c))
    };
    let attempt = |h: f64| -> Result<Rank4<f64>> {
        let mut data = vec![0.0; n * n * n * n];
        for j in 0..n {
            for k in j..n {
                for l in k..n {
                    let mut estimates = vec![Vec::new(); n];
                    for level in (0..=levels).rev() {
                        let step = h * 2f64.powi(level as i32);
                        let mut acc = vec![0.0; n];
                        for sg in SIGNS {
                            let g = g_at(shifted(step, [j, k, l], sg))?;
                            let w = sg[0] * sg[1] * sg[2];
                            for (a, gi) in acc.iter_mut().zip(g) {
                                *a += w * gi;
                            }
                        }
                        let den = 8.0 * step * step * step;
                        for (e, a) in estimates.iter_mut().zip(acc) {
                            e.push(a / den);
                        }
                    }
                    for (i, e) in estimates.into_iter().enumerate() {
                        let v = richardson(e);
                        for [a, b, c] in permutations(j, k, l) {
                            data[((i * n + a) * n + b) * n + c] = v;
                        }
                    }
                }
            }
        }
        Ok(Rank4::from_fn(n, |i, a, b, c| data[((i * n + a) * n + b) * n + c]))
    };

    // halve the step until every node is usable
    // the spray has singular directions close by (band edges), so the
    // widest rather than the smallest step sits at the balance point
    let narrow = if scheme.base_step.is_none() { 2f64.powi(levels as i32) } else { 1.0 };
    let mut h = scheme.step_for(3) / narrow * scale;
    let mut shrinks = 0;
    loop {
        match attempt(h) {
            Err(Error::StencilOutsideDomain { .. }) if shrinks < MAX_SHRINK => {
                shrinks += 1;
                h /= 2.0;
            }
            other => return other,
        }
    }
}

fn permutations(j: usize, k: usize, l: usize) -> [[usize; 3]; 6] {
    [[j, k, l], [j, l, k], [k, j, l], [k, l, j], [l, j, k], [l, k, j]]
}

/// Berwald curvature of a model by differencing its spray in y. P and Q at
/// each node come from φ-jets (no nested differencing).
pub fn fd_berwald(model: &PhiModel, cfg: &Config<f64>, scheme: &FDScheme) -> Result<Rank4<f64>> {
    model.check_admissible(cfg.r(), cfg.s())?;
    fd_berwald_with(
        cfg,
        scheme,
        |r, s| geometry::spray_pq_values(&model.eval_unchecked(r, s, JetShape::new(1, 2))?),
        spray_inside(model),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub max_abs_err: f64,
    /// `max_abs_err` over the max-norm of the expected tensor; equal to
    /// `max_abs_err` when that norm is below [`ABS_FALLBACK_SCALE`].
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub pass: bool,
}

pub const ABS_FALLBACK_SCALE: f64 = 1e-8;

/// Norm-wise comparison of a flattened tensor against the expected one.
///
/// The scale comes from `expected` only, so differencing noise around a
/// tensor that should vanish is judged in absolute terms.
pub fn compare(actual: &[f64], expected: &[f64], tol: f64) -> Result<ComparisonReport> {
    if actual.len() != expected.len() {
        return Err(Error::TensorShape(actual.len(), expected.len()));
    }
    let mut worst_index = 0;
    let mut max_abs_err = 0.0f64;
    let mut scale = 0.0f64;
    for (idx, (&x, &y)) in actual.iter().zip(expected).enumerate() {
        let e = (x - y).abs();
        if e > max_abs_err || e.is_nan() && !max_abs_err.is_nan() {
            max_abs_err = e;
            worst_index = idx;
        }
        scale = scale.max(y.abs());
    }
    let max_rel_err = if scale < ABS_FALLBACK_SCALE { max_abs_err } else { max_abs_err / scale };
    Ok(ComparisonReport { max_abs_err, max_rel_err, worst_index, pass: max_rel_err <= tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{config_with, point_rng};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn constant_and_quadratic() {
        let one = PhiModel::expression("1 + 0*s").unwrap();
        for (i, k) in [(1, 0), (0, 1), (1, 3), (0, 5)] {
            assert!(fd_phi_derivs(&one, 1.0, 0.3, i, k, &FDScheme::default()).unwrap().abs() <= 1e-10);
        }
        let sq = PhiModel::expression("s^2").unwrap();
        for (r, s) in [(1.0, 0.3), (2.0, -1.1)] {
            let d = fd_phi_derivs(&sq, r, s, 0, 2, &FDScheme::default()).unwrap();
            assert!((d - 2.0).abs() <= 1e-8, "{d}");
        }
    }

    #[test]
    fn matches_jets_on_sqrt() {
        let m = PhiModel::expression("sqrt(1+s^2)").unwrap();
        let jet = m.eval_phi_jet(1.0, 0.5, JetShape::DEFAULT).unwrap();
        let fd = fd_phi_derivs(&m, 1.0, 0.5, 0, 1, &FDScheme::default()).unwrap();
        assert!(rel(fd, jet.derivative(0, 1).unwrap()) <= 1e-6);
    }

    #[test]
    fn self_test_noise_floor() {
        let free = |_: f64, _: f64| true;
        let scheme = FDScheme::default();
        // polynomial of degree 6 in s times a linear factor in r
        let poly = |r: f64, s: f64| Ok((1.0 + 0.5 * r) * (1.0 - s + 0.5 * s.powi(2) + 0.3 * s.powi(3) - 0.2 * s.powi(4) + 0.1 * s.powi(5) + 0.05 * s.powi(6)));
        let (r, s): (f64, f64) = (1.2, 0.4);
        let exact = [
            1.0 + 0.5 * 1.2,
            (1.6f64) * (-1.0 + s + 0.9 * s * s - 0.8 * s.powi(3) + 0.5 * s.powi(4) + 0.3 * s.powi(5)),
        ];
        let d = fd_partial(poly, free, r, s, 1, 0, &scheme).unwrap();
        let v = 0.5 * (1.0 - s + 0.5 * s.powi(2) + 0.3 * s.powi(3) - 0.2 * s.powi(4) + 0.1 * s.powi(5) + 0.05 * s.powi(6));
        assert!(rel(d, v) <= 1e-7);
        assert!(exact[0] > 0.0);
        let d = fd_partial(poly, free, r, s, 0, 1, &scheme).unwrap();
        assert!(rel(d, exact[1]) <= 1e-7, "{}", rel(d, exact[1]));

        // exp(r s): ∂_s^k = r^k exp(rs), ∂_r∂_s^k = (k r^{k-1} + s r^k) exp(rs)
        let e = |r: f64, s: f64| Ok((r * s).exp());
        for k in 1..=MAX_S_ORDER {
            let want = r.powi(k as i32) * (r * s).exp();
            let got = fd_partial(e, free, r, s, 0, k, &scheme).unwrap();
            assert!(rel(got, want) <= 1e-7, "k = {k}: {}", rel(got, want));
        }
        for k in 0..=3 {
            let want = (k as f64 * r.powi(k as i32 - 1) + s * r.powi(k as i32)) * (r * s).exp();
            let got = fd_partial(e, free, r, s, 1, k, &scheme).unwrap();
            assert!(rel(got, want) <= 1e-7, "mixed k = {k}: {}", rel(got, want));
        }
        // sqrt(r^2 - s^2): ∂_s = -s/√, ∂_ss = -r²/√³
        let q = |r: f64, s: f64| Ok((r * r - s * s).sqrt());
        let w: f64 = r * r - s * s;
        assert!(rel(fd_partial(q, free, r, s, 0, 1, &scheme).unwrap(), -s / w.sqrt()) <= 1e-7);
        assert!(rel(fd_partial(q, free, r, s, 0, 2, &scheme).unwrap(), -r * r / w.powf(1.5)) <= 1e-7);
    }

    #[test]
    fn stencil_outside_domain() {
        let m = PhiModel::euclidean();
        let never = |_: f64, _: f64| false;
        let e = fd_partial(|_, _| Ok(1.0), never, 1.0, 0.0, 0, 2, &FDScheme::default()).unwrap_err();
        assert!(matches!(e, Error::StencilOutsideDomain { .. }));
        assert!(fd_phi_derivs(&m, 1.0, 0.5, 2, 0, &FDScheme::default()).is_err());
        assert!(fd_phi_derivs(&m, 1.0, 1.0, 0, 1, &FDScheme::default()).is_err());
    }

    #[test]
    fn fd_spray_matches_jets() {
        let m = PhiModel::expression("sqrt(1+s^2)").unwrap();
        let (p, q) = fd_spray_pq(&m, 1.0, 0.3, &FDScheme::default()).unwrap();
        let jet = geometry::spray_pq(&m.eval_phi_jet(1.0, 0.3, JetShape::DEFAULT).unwrap()).unwrap();
        let rep = compare(&[p, q], &[jet.p(0), jet.q(0)], 1e-6).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn euclidean_and_homogeneous_are_flat() {
        let mut rng = point_rng(11, 0);
        let cfg = config_with(&mut rng, 3, 1.0, 0.4).unwrap();
        let b = fd_berwald(&PhiModel::euclidean(), &cfg, &FDScheme::default()).unwrap();
        assert!(b.max_abs() <= 1e-6);
        let b = fd_berwald(&PhiModel::homogeneous("1").unwrap(), &cfg, &FDScheme::default()).unwrap();
        assert!(b.max_abs() <= 1e-5, "{}", b.max_abs());
    }

    #[test]
    fn landsberg_injection_matches_formula() {
        use crate::families::{landsberg_pq_n3, LandsbergCoefs};
        let c = LandsbergCoefs { c0: 0.0, c1: 0.0, c2: 1.0, c3: 0.0 };
        let mut rng = point_rng(5, 1);
        let cfg = config_with(&mut rng, 3, 1.1, 0.35).unwrap();
        let jet = geometry::berwald_curvature(&landsberg_pq_n3(&c, cfg.r(), cfg.s()).unwrap(), &cfg);
        assert!(jet.max_abs() > 1e-3);
        let fd = fd_berwald_with(
            &cfg,
            &FDScheme::default(),
            |r, s| landsberg_pq_n3(&c, r, s).map(|pq| (pq.p(0), pq.q(0))),
            |r, s| s.abs() < 0.95 * r,
        )
        .unwrap();
        let rep = compare(fd.as_slice(), jet.as_slice(), 1e-4).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn compare_contract() {
        let a = vec![1.0, -2.0, 0.5, 3.0];
        let rep = compare(&a, &a, 1e-12).unwrap();
        assert!(rep.pass && rep.max_abs_err == 0.0 && rep.max_rel_err == 0.0);
        let mut b = a.clone();
        b[2] += 1e-3 * 3.0;
        let rep = compare(&b, &a, 1e-4).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.worst_index, 2);
        assert!(compare(&a, &a[..3], 1e-4).is_err());
        let tiny = compare(&[1e-10], &[2e-10], 1e-9).unwrap();
        assert!(tiny.pass && tiny.max_rel_err == 1e-10);
    }
}
