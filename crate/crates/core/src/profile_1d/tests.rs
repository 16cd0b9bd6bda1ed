use super::*;
use crate::phase_plane::find_u_star;

fn canonical_acc(stop: StopAt) -> Profile1D {
    let p = GasParams::canonical();
    let inlet = InletData::on_branch(&p, 0.95, Branch::Accelerating).unwrap();
    integrate_profile(&p, inlet, stop, &IntegratorOptions::default()).unwrap()
}

#[test]
fn accelerating_run_conserves_first_integral() {
    let prof = canonical_acc(StopAt::Terminal);
    assert_eq!(prof.kind, ProfileKind::Accelerating);
    assert_eq!(prof.end, ProfileEnd::Turning);
    assert!(prof.first_integral_defect() <= 1e-8, "{}", prof.first_integral_defect());
    assert!(prof.samples.windows(2).all(|w| w[1].x1 > w[0].x1 && w[1].u > w[0].u));
}

#[test]
fn sonic_sample_uses_limit_slope() {
    let prof = canonical_acc(StopAt::Terminal);
    let s = prof.samples.iter().find(|s| s.u == 1.0).expect("u_s is a sample");
    assert!((1.0 / s.du_dx - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(s.e, 0.0);
}

#[test]
fn sonic_location_is_unique_and_accurate() {
    let prof = canonical_acc(StopAt::Terminal);
    let ls = prof.l_s.unwrap();
    assert!(ls > 0.0);
    let (u, _, _) = prof.state_at(ls).unwrap();
    assert!((u - 1.0).abs() < 1e-9);
}

#[test]
fn truncated_before_sonic_has_no_crossing() {
    let prof = canonical_acc(StopAt::UTarget(0.99));
    assert_eq!(prof.end, ProfileEnd::UTarget);
    assert!((prof.samples.last().unwrap().u - 0.99).abs() < 1e-12);
    assert!(matches!(locate_sonic(&prof), Err(Error::NoSonicCrossing)));
}

#[test]
fn sonic_inlet_is_rejected() {
    let p = GasParams::canonical();
    let r = integrate_profile(&p, InletData { u0: 1.0, e0: 0.0 }, StopAt::Terminal, &IntegratorOptions::default());
    assert!(matches!(r, Err(Error::InvalidInput(_))));
}

#[test]
fn off_critical_data_blows_up_at_band() {
    let p = GasParams::canonical();
    let mut inlet = InletData::on_branch(&p, 0.95, Branch::Accelerating).unwrap();
    inlet.e0 -= 1e-3;
    let r = integrate_profile(&p, inlet, StopAt::Terminal, &IntegratorOptions::default());
    assert!(matches!(r, Err(Error::SonicBlowUp { .. })), "{r:?}");
    let cut = integrate_truncated(&p, inlet, StopAt::Terminal, &IntegratorOptions::default()).unwrap();
    assert_eq!(cut.end, ProfileEnd::SonicBlowUp);
    assert!(cut.samples.last().unwrap().u < 1.0);
}

#[test]
fn lmax_matches_ode_endpoint() {
    let p = GasParams::canonical();
    let prof = canonical_acc(StopAt::Terminal);
    let Some(LMax::Finite(l)) = prof.l_max else { panic!("finite l_max expected") };
    let last = prof.samples.last().unwrap();
    assert!((last.x1 - l).abs() < 1e-7 * l, "{} vs {l}", last.x1);
    assert!((last.u - find_u_star(&p).unwrap()).abs() < 1e-6);
    assert_eq!(last.e, 0.0);
}

#[test]
fn decelerating_canonical_is_infinite() {
    let p = GasParams::canonical();
    let inlet = InletData::on_branch(&p, 1.05, Branch::Decelerating).unwrap();
    let r = locate_lmax(&p, inlet, &IntegratorOptions::default()).unwrap();
    assert_eq!(r.l_max, LMax::Infinite);
}

#[test]
fn decelerating_below_two_is_finite() {
    let p = GasParams::new(1.5, 0.2, 1.0, 0.4).unwrap();
    assert!(p.zeta0() > 1.0);
    let inlet = InletData::on_branch(&p, 1.05 * p.u_sonic(), Branch::Decelerating).unwrap();
    let r = locate_lmax(&p, inlet, &IntegratorOptions::default()).unwrap();
    assert!(matches!(r.l_max, LMax::Finite(_)), "{r:?}");
}

#[test]
fn fields_satisfy_formulas() {
    let p = GasParams::canonical();
    let prof = canonical_acc(StopAt::Terminal);
    let s0 = prof.samples[0];
    assert_eq!(s0.phi_bar, 0.0);
    assert!((s0.phi - (0.5 * 0.95f64.powi(2) + 0.5 * (1.0 / 0.95f64).powi(2))).abs() < 1e-15);
    for s in &prof.samples {
        assert!((s.rho - 1.0 / s.u).abs() < 1e-15 * s.rho);
        assert!((s.p - s.rho.powi(3) / 3.0).abs() < 1e-14 * s.p);
        assert!(bernoulli_defect(&p, s).abs() < 1e-6);
    }
    assert!(prof.samples.windows(2).all(|w| w[1].phi_bar >= w[0].phi_bar));
}

#[test]
fn csv_round_trip() {
    let prof = canonical_acc(StopAt::XMax(0.5));
    let text = write_profile_csv(&prof);
    assert!(text.starts_with("x1,u,E,rho,p,Phi,phi_bar\n"));
    let rows = parse_profile_csv(&text).unwrap();
    assert_eq!(rows.len(), prof.samples.len());
    for (r, s) in rows.iter().zip(&prof.samples) {
        assert_eq!(r, &[s.x1, s.u, s.e, s.rho, s.p, s.phi, s.phi_bar]);
    }
}

#[test]
fn potential_residual_detects_corruption() {
    let p = GasParams::canonical();
    let mut prof = canonical_acc(StopAt::XMax(1.0));
    assert!(potential_ode_residual(&p, &prof) <= 1e-8);
    for s in prof.samples.iter_mut() {
        s.phi_bar = s.x1 * s.x1;
    }
    assert!(potential_ode_residual(&p, &prof) > 0.1);
}

#[test]
fn kz_sign_on_both_branches() {
    let p = GasParams::canonical();
    let acc = canonical_acc(StopAt::XMax(1.0));
    let r = kz_check(&p, &acc);
    assert!(r.holds && r.lambda_l > 0.0, "{r:?}");
    assert!(r.discrepancy <= 1e-6, "{r:?}");

    let inlet = InletData::on_branch(&p, 1.05, Branch::Decelerating).unwrap();
    let dec = integrate_profile(&p, inlet, StopAt::XMax(1.0), &IntegratorOptions::default()).unwrap();
    let r = kz_check(&p, &dec);
    assert!(!r.holds);
    assert!(r.min_q.iter().all(|q| *q < 0.0));
}

#[test]
fn lemma_report_for_canonical_inlets() {
    let p = GasParams::canonical();
    let opts = IntegratorOptions::default();
    let acc = verify_lemma(&p, InletData::on_branch(&p, 0.95, Branch::Accelerating).unwrap(), &opts).unwrap();
    assert!(acc.all_passed(), "{acc:#?}");
    let dec = verify_lemma(&p, InletData::on_branch(&p, 1.05, Branch::Decelerating).unwrap(), &opts).unwrap();
    assert!(dec.all_passed(), "{:#?}", dec.claims);
    assert_eq!(dec.l_max, Some(LMax::Infinite));

    let mut off = InletData::on_branch(&p, 0.95, Branch::Accelerating).unwrap();
    off.e0 += 1e-3;
    let rep = verify_lemma(&p, off, &opts).unwrap();
    assert!(!rep.claim("coverage").unwrap().passed);
}

#[test]
fn slow_decay_for_small_gamma_is_terminal() {
    // u' ~ u^{γ/2} near u = 0: still 1e-5 at the speed floor for γ = 1.3.
    let p = GasParams::new(1.3, 0.2, 1.0, 0.4).unwrap();
    let inlet = InletData::on_branch(&p, 1.39 * p.u_sonic(), Branch::Decelerating).unwrap();
    let r = verify_lemma(&p, inlet, &IntegratorOptions::default()).unwrap();
    let t = r.claim("terminal").unwrap();
    assert!(t.passed, "{t:?}");
    assert!(t.margin > 1e-6);
    assert!(matches!(r.l_max, Some(LMax::Finite(_))));
}

#[test]
fn kz_discrepancy_small_for_low_inlet_speed() {
    let p = GasParams::canonical();
    let inlet = InletData::on_branch(&p, 0.3, Branch::Accelerating).unwrap();
    let prof = integrate_profile(&p, inlet, StopAt::XMax(3.5), &IntegratorOptions::default()).unwrap();
    assert!(prof.l_s.is_some());
    let r = kz_check(&p, &prof);
    assert!(r.holds && r.discrepancy <= 1e-6, "{r:?}");
    let entry = prof.samples.iter().find(|s| (s.u - 0.999).abs() < 1e-12).unwrap();
    assert_eq!(entry.e, crate::phase_plane::critical_e(&p, entry.u, Branch::Accelerating).unwrap());
}
