use super::*;
use crate::phase_plane::Branch;
use crate::profile_1d::{integrate_profile, InletData, IntegratorOptions, StopAt};
use proptest::prelude::*;

fn canonical() -> (GasParams, Profile1D) {
    let p = GasParams::canonical();
    let inlet = InletData::on_branch(&p, 0.95, Branch::Accelerating).unwrap();
    let prof = integrate_profile(&p, inlet, StopAt::XMax(1.5), &IntegratorOptions::default()).unwrap();
    (p, prof)
}

fn spec(nx: usize, ny: usize, length: f64) -> MixedOperatorSpec {
    let (p, prof) = canonical();
    build_operator(&p, &prof, ChannelDomain::new(length, nx, ny).unwrap()).unwrap()
}

fn manufactured(s: &MixedOperatorSpec) -> (Vec<f64>, Vec<f64>, BoundaryData2D) {
    let m = manufactured_problem(s);
    (m.source, m.exact, m.bc)
}

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn inlet_coefficient_and_sonic_node() {
    let (p, prof) = canonical();
    let ls = prof.l_s.unwrap();
    let d = ChannelDomain::new(4.0 * ls, 65, 65).unwrap();
    let s = build_operator(&p, &prof, d).unwrap();
    assert_eq!(s.alpha11.len(), 65);
    assert!((s.alpha11[0] - (1.0 - 0.95f64.powi(4))).abs() < 1e-12);
    assert_eq!(s.sonic_column, Some(16));
    assert_eq!(s.alpha11[16], 0.0);
    assert_eq!(s.templates().iter().filter(|t| **t == Template::Sonic).count(), 1);
    assert!(s.kz_holds(), "{}", s.kz_margin);
    assert!(s.coefficients_csv().starts_with("x1,alpha11,beta1\n"));
}

#[test]
fn profile_must_span_channel() {
    let (p, prof) = canonical();
    let d = ChannelDomain::new(2.0, 33, 9).unwrap();
    assert!(matches!(build_operator(&p, &prof, d), Err(Error::InvalidInput(_))));
}

#[test]
fn templates_follow_coefficient_sign() {
    let s = spec(41, 9, 0.6);
    for (i, t) in s.templates().into_iter().enumerate() {
        assert_eq!(t == Template::Elliptic, s.alpha11[i] > 0.0);
        assert_eq!(t == Template::Hyperbolic, s.alpha11[i] < 0.0);
    }
}

#[test]
fn zero_data_gives_zero() {
    let s = spec(33, 9, 0.6);
    let f = vec![0.0; 33 * 9];
    let w = solve_linear(&s, &f, &BoundaryData2D::homogeneous(), &MixedOptions::default()).unwrap();
    assert_eq!(w.max_abs(), 0.0);
    let rep = sonic_smoothness_diag(&w, &s);
    assert_eq!((rep.w, rep.dw, rep.d2w), (0.0, 0.0, 0.0));
}

#[test]
fn manufactured_first_order_or_better() {
    let mut errs = Vec::new();
    for n in [17, 33, 65] {
        let s = spec(2 * n - 1, n, 0.6);
        let (f, exact, bc) = manufactured(&s);
        let w = solve_linear(&s, &f, &bc, &MixedOptions::default()).unwrap();
        errs.push(max_err(&w.values, &exact));
    }
    let orders: Vec<f64> = errs.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    assert!(orders.iter().all(|o| *o >= 1.0), "{errs:?} {orders:?}");
}

#[test]
fn smooth_data_crosses_smoothly() {
    for n in [33, 65] {
        let s = spec(2 * n - 1, n, 0.6);
        let (f, exact, bc) = manufactured(&s);
        let w = solve_linear(&s, &f, &bc, &MixedOptions::default()).unwrap();
        let rel = max_err(&w.values, &exact) / w.max_abs();
        let rep = sonic_smoothness_diag(&w, &s);
        assert_eq!(rep.stencil, 4);
        assert!(rep.w.max(rep.dw).max(rep.d2w) <= rel, "{rep:?} vs {rel:e}");
    }
}

#[test]
fn reduced_problem_matches_ode() {
    let (p, prof) = canonical();
    let length = 0.6;
    let d = ChannelDomain::new(length, 1025, 3).unwrap();
    let s = build_operator(&p, &prof, d).unwrap();
    let src = |x: f64| 1.0 + x.cos();
    let f = s.source_from_fn(|x1, _| src(x1));
    let bc = BoundaryData2D { inlet_kind: InletKind::Value, inlet: ModalData::constant(0.5), outlet: None };
    let w = solve_linear(&s, &f, &bc, &MixedOptions::default()).unwrap();
    let xs: Vec<f64> = (0..d.nx).map(|i| d.x1(i)).collect();
    let reference = reduced_ode_reference(&p, &prof, length, 0.5, src, &xs).unwrap();
    let mut err: f64 = 0.0;
    for i in 0..d.nx {
        for j in 0..d.ny {
            err = err.max((w.at(i, j) - reference[i]).abs());
        }
    }
    assert!(err < 1e-4, "{err:e}");
}

#[test]
fn normal_inlet_is_singular() {
    let s = spec(17, 5, 0.6);
    let bc = BoundaryData2D { inlet_kind: InletKind::Normal, inlet: ModalData::constant(1.0), outlet: None };
    let f = vec![0.0; 17 * 5];
    match solve_linear(&s, &f, &bc, &MixedOptions::default()) {
        Err(Error::Singular { near_null, .. }) => {
            assert_eq!(near_null.len(), 17 * 5);
            assert!(near_null.windows(2).all(|w| w[0] == w[1]));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn tangential_inlet_is_anchored() {
    let s = spec(33, 17, 0.6);
    let bc =
        BoundaryData2D { inlet_kind: InletKind::Tangential, inlet: ModalData { constant: 0.0, modes: vec![1.0] }, outlet: None };
    let f = vec![0.0; 33 * 17];
    let w = solve_linear(&s, &f, &bc, &MixedOptions::default()).unwrap();
    assert!(w.at(0, 0).abs() < 1e-13);
    // ∫ sin(π(x₂+1)/2) over [-1, 1] is 4/π.
    assert!((w.at(0, 16) - 4.0 / PI).abs() < 1e-12);
    let bad = BoundaryData2D { inlet: ModalData::constant(1.0), ..bc };
    assert!(matches!(solve_linear(&s, &f, &bad, &MixedOptions::default()), Err(Error::InvalidInput(_))));
}

#[test]
fn outlet_rules() {
    let f = vec![0.0; 17 * 5];
    let hyper = spec(17, 5, 0.6);
    let with_outlet = BoundaryData2D { outlet: Some(ModalData::zero()), ..BoundaryData2D::homogeneous() };
    assert!(matches!(solve_linear(&hyper, &f, &with_outlet, &MixedOptions::default()), Err(Error::InvalidInput(_))));

    let elliptic = spec(17, 5, 0.1);
    assert_eq!(elliptic.template(16), Template::Elliptic);
    assert!(matches!(
        solve_linear(&elliptic, &f, &BoundaryData2D::homogeneous(), &MixedOptions::default()),
        Err(Error::InvalidInput(_))
    ));
    let bc = BoundaryData2D { outlet: Some(ModalData::constant(2.0)), ..BoundaryData2D::homogeneous() };
    let w = solve_linear(&elliptic, &f, &bc, &MixedOptions::default()).unwrap();
    assert!((w.at(16, 2) - 2.0).abs() < 1e-13);
    assert!(w.values.iter().all(|v| (-1e-12..=2.0 + 1e-12).contains(v)));
}

#[test]
fn violating_fixture_is_flagged() {
    let d = ChannelDomain::new(1.0, 33, 9).unwrap();
    let alpha: Vec<f64> = (0..33).map(|i| 0.5 - d.x1(i)).collect();
    let beta = vec![1.0; 33];
    let s = MixedOperatorSpec::from_samples(d, alpha, beta).unwrap();
    assert!((s.l_s.unwrap() - 0.5).abs() < 1e-12);
    assert!(!s.kz_holds());
    let f = s.source_from_fn(|x1, x2| (x1 * x2).cos());
    let w = solve_linear(&s, &f, &BoundaryData2D::homogeneous(), &MixedOptions::default()).unwrap();
    assert!(w.meta.unreliable);
    let rep = sonic_smoothness_diag(&w, &s);
    assert!(rep.w.is_finite() && rep.dw.is_finite() && rep.d2w.is_finite());
}

#[test]
fn solve_is_deterministic() {
    let s = spec(65, 33, 0.6);
    let (f, _, bc) = manufactured(&s);
    let a = solve_linear(&s, &f, &bc, &MixedOptions::default()).unwrap();
    let b = solve_linear(&s, &f, &bc, &MixedOptions::default()).unwrap();
    assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solve_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, k1 in 0.5f64..4.0, k2 in 0.5f64..4.0) {
        let s = spec(25, 9, 0.6);
        let f1 = s.source_from_fn(|x1, x2| (k1 * x1).sin() * (1.0 + x2 * x2));
        let f2 = s.source_from_fn(|x1, x2| (k2 * x2).cos() + x1);
        let mix: Vec<f64> = f1.iter().zip(&f2).map(|(u, v)| a * u + b * v).collect();
        let bc = BoundaryData2D::homogeneous();
        let o = MixedOptions::default();
        let w1 = solve_linear(&s, &f1, &bc, &o).unwrap();
        let w2 = solve_linear(&s, &f2, &bc, &o).unwrap();
        let w = solve_linear(&s, &mix, &bc, &o).unwrap();
        for k in 0..w.values.len() {
            let lin = a * w1.values[k] + b * w2.values[k];
            prop_assert!((w.values[k] - lin).abs() <= 1e-10 * (1.0 + lin.abs()));
        }
    }
}
