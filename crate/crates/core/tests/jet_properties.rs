use proptest::prelude::*;
use spherisym::{parse_phi, Jet, JetShape};

const SHAPE: JetShape = JetShape::new(2, 6);

fn jet_from(at: (f64, f64), coeffs: Vec<f64>) -> Jet {
    Jet::from_coeffs(at, SHAPE, coeffs).unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, SHAPE.len())
}

fn at() -> impl Strategy<Value = (f64, f64)> {
    (0.2..2.0f64, -1.0..1.0f64)
}

// max |a - b| over the table, relative to the larger table
fn rel_diff(a: &Jet, b: &Jet) -> f64 {
    let d = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    d / a.max_abs().max(b.max_abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ring_axioms(base in at(), a in coeffs(), b in coeffs(), c in coeffs()) {
        let (a, b, c) = (jet_from(base, a), jet_from(base, b), jet_from(base, c));
        prop_assert!(rel_diff(&(&a * &b), &(&b * &a)) <= 1e-13);
        prop_assert!(rel_diff(&(&(&a * &b) * &c), &(&a * &(&b * &c))) <= 1e-13);
        prop_assert!(rel_diff(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c))) <= 1e-13);
        prop_assert!(rel_diff(&(&(&a + &b) - &b), &a) <= 1e-13);
        prop_assert!((&a + &(-&a)).max_abs() == 0.0);
    }

    #[test]
    fn division_round_trips(base in at(), a in coeffs(), mut b in coeffs(), c0 in 0.1..2.0f64, neg in any::<bool>()) {
        b[0] = if neg { -c0 } else { c0 };
        let (a, b) = (jet_from(base, a), jet_from(base, b));
        let q = a.try_div(&b).unwrap();
        let back = &q * &b;
        let scale = a.max_abs().max(1.0);
        let err = back.coeffs().iter().zip(a.coeffs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-11 * scale * q.max_abs().max(1.0) * b.max_abs().max(1.0), "{err}");
    }

    #[test]
    fn sqrt_squares_back(base in at(), mut a in coeffs(), c0 in 0.1..3.0f64) {
        a[0] = c0;
        let a = jet_from(base, a);
        let root = a.sqrt().unwrap();
        let sq = &root * &root;
        let err = sq.coeffs().iter().zip(a.coeffs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-11 * root.max_abs().max(1.0).powi(2), "{err}");
    }

    // p(r, s) = Σ a_ij r^i s^j with i ≤ 2, j ≤ 6 - i, expanded about (r0, s0)
    // by the binomial theorem.
    #[test]
    fn polynomial_expansion(base in at(), a in prop::collection::vec(-1.0..1.0f64, 18)) {
        let (r0, s0) = base;
        let (r, s) = Jet::seeds(r0, s0, SHAPE);
        let terms: Vec<(usize, usize)> = (0..=2).flat_map(|i| (0..=6 - i).map(move |j| (i, j))).collect();
        let mut jet = Jet::zero(base, SHAPE);
        for (&(i, j), &c) in terms.iter().zip(&a) {
            let t = &r.powi(i as i32).unwrap() * &s.powi(j as i32).unwrap();
            jet = &jet + &t.scale(c);
        }
        let binom = |n: usize, k: usize| (0..k).fold(1.0, |acc, m| acc * (n - m) as f64 / (m + 1) as f64);
        for p in 0..=SHAPE.r_order {
            for q in 0..=SHAPE.s_order {
                let want: f64 = terms
                    .iter()
                    .zip(&a)
                    .filter(|(&(i, j), _)| i >= p && j >= q)
                    .map(|(&(i, j), &c)| {
                        c * binom(i, p) * r0.powi((i - p) as i32) * binom(j, q) * s0.powi((j - q) as i32)
                    })
                    .sum();
                let got = jet.coeff(p, q);
                prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "c[{p}][{q}] {got} vs {want}");
            }
        }
    }

    // printing an expression and parsing it back gives the same function
    #[test]
    fn parser_round_trip(idx in 0usize..12, r in 0.3..1.5f64, frac in -0.8..0.8f64) {
        const SOURCES: [&str; 12] = [
            "sqrt(1+s^2)",
            "exp(-r^2/4)*sqrt(0.3*s^2 + 0.2*r^2 + 1)",
            "(1+s/r)^2 - s",
            "-s^3 + 2*r*s - 1/(2+r)",
            "cosh(s) + sinh(r*s)/3",
            "log(2 + s) * atan(r)",
            "1/(1+(s/r)^2)/r",
            "2^3^(1/2) + s",
            "sin(s)^2 + cos(s)^2 + s*r",
            "tan(s/3) + 1.5e-1*r",
            "-(-s)",
            "sqrt(1+s^2) + s/2",
        ];
        let src = SOURCES[idx];
        let e = parse_phi(src).unwrap();
        let printed = e.to_string();
        let again = parse_phi(&printed).unwrap();
        let s = frac * r;
        let (a, b) = (e.eval(Some(r), Some(s), None).unwrap(), again.eval(Some(r), Some(s), None).unwrap());
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0), "{src} -> {printed}: {a} vs {b}");
        prop_assert_eq!(again.to_string(), printed);
    }
}

#[test]
fn spec_examples() {
    let sh = JetShape::DEFAULT;
    let c = Jet::constant(1.0, (2.0, 0.5), sh);
    assert_eq!(c.value(), 1.0);
    assert!(c.coeffs()[1..].iter().all(|&x| x == 0.0));

    let r = Jet::var_r(2.0, 0.5, sh).unwrap();
    assert_eq!((r.coeff(0, 0), r.coeff(1, 0), r.coeff(0, 1)), (2.0, 1.0, 0.0));
    let s = Jet::var_s(0.0, 0.0, sh).unwrap();
    assert_eq!((s.coeff(0, 0), s.coeff(0, 1)), (0.0, 1.0));
    assert!(Jet::var_r(1.0, 0.0, JetShape::s_only(4)).is_err());

    // (1+s)^2 = 1 + 2s + s^2
    let one_s = s.add_scalar(1.0);
    let sq = &one_s * &one_s;
    assert_eq!((sq.coeff(0, 0), sq.coeff(0, 1), sq.coeff(0, 2), sq.coeff(0, 3)), (1.0, 2.0, 1.0, 0.0));

    // r^2 - s^2 at (1, 0.5)
    let (r, s) = Jet::seeds(1.0, 0.5, JetShape::new(2, 6));
    let w = &(&r * &r) - &(&s * &s);
    assert_eq!([w.coeff(0, 0), w.coeff(1, 0), w.coeff(2, 0), w.coeff(0, 1), w.coeff(0, 2)], [0.75, 2.0, 1.0, -1.0, -1.0]);
    let inv = w.recip().unwrap();
    assert!((inv.value() - 4.0 / 3.0).abs() < 1e-15);
    assert!((w.sqrt().unwrap().value() - 0.75f64.sqrt()).abs() < 1e-15);

    // 1/(1-s) at 0 is the geometric series
    let s0 = Jet::var_s(1.0, 0.0, sh).unwrap();
    let g = Jet::constant(1.0, (1.0, 0.0), sh).try_div(&s0.scale(-1.0).add_scalar(1.0)).unwrap();
    assert!((0..=6).all(|k| (g.coeff(0, k) - 1.0).abs() < 1e-15));
    // sqrt(1+s) = 1 + s/2 - s^2/8 + ...
    let h = s0.add_scalar(1.0).sqrt().unwrap();
    assert!((h.coeff(0, 1) - 0.5).abs() < 1e-15 && (h.coeff(0, 2) + 0.125).abs() < 1e-15);
    // exp(s) at 0
    let e = s0.exp();
    assert!((e.coeff(0, 3) - 1.0 / 6.0).abs() < 1e-15);

    // derivative extraction applies factorials
    assert_eq!((&s * &s).derivative(0, 2).unwrap(), 2.0);
    assert_eq!(Jet::constant(5.0, (1.0, 0.5), sh).derivative(1, 0).unwrap(), 0.0);
    assert_eq!((&r * &s).derivative(1, 1).unwrap(), 1.0);
    assert!(w.derivative(3, 0).is_err());

    // division by a near-zero constant term fails loudly
    let z = Jet::constant(1e-13, (1.0, 0.5), sh);
    assert!(Jet::constant(1.0, (1.0, 0.5), sh).try_div(&z).is_err());
    assert!(Jet::constant(-1.0, (1.0, 0.5), sh).sqrt().is_err());
}

#[test]
fn jets_work_in_single_precision() {
    let (r, s) = spherisym::Jet2::<f32>::seeds(1.0, 0.5, JetShape::DEFAULT);
    let w = &(&r * &r) - &(&s * &s);
    let root = w.sqrt().unwrap();
    assert!((root.value() - 0.75f32.sqrt()).abs() < 1e-6);
    assert!(((&root * &root).coeff(0, 2) - w.coeff(0, 2)).abs() < 1e-5);
}
