use super::*;
use proptest::prelude::*;

fn canonical() -> UpstreamState {
    UpstreamState::new(2.0, 1.0, 2.0).unwrap()
}

/// Real roots of `x³ + p x + q` by the trigonometric method.
fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    assert!(p < 0.0 && 4.0 * p * p * p + 27.0 * q * q < 0.0);
    let m = 2.0 * (-p / 3.0).sqrt();
    let t = (3.0 * q / (p * m)).acos() / 3.0;
    (0..3).map(|k| m * (t - 2.0 * PI * k as f64 / 3.0).cos()).collect()
}

#[test]
fn bernoulli_examples() {
    let s = canonical();
    assert_eq!(s.b0(), 2.0);
    assert!((bernoulli_density(&s, 2.0).unwrap() - 1.0).abs() < 1e-15);
    let r = bernoulli_density(&s, 3f64.sqrt() - 1.0).unwrap();
    assert!((r - (3f64.sqrt() + 1.0)).abs() < 1e-14);
    let limit = (2.0 * (s.b0() + 1.0)).sqrt();
    assert!(bernoulli_density(&s, limit).unwrap().abs() < 1e-12);
    assert!(matches!(bernoulli_density(&s, limit + 1e-9), Err(Error::Domain(_))));
}

#[test]
fn normal_shock_matches_cubic() {
    let (u, rho) = normal_shock(&canonical()).unwrap();
    // Mass flux with Bernoulli reduces to u³ - 6u + 4 = 0.
    let roots = depressed_cubic_roots(-6.0, 4.0);
    let subsonic = roots.iter().copied().filter(|r| *r > 0.0 && r * r < 2.0).fold(f64::NAN, f64::max);
    assert!((u - subsonic).abs() < 1e-12, "{u} vs {roots:?}");
    assert!((u - (3f64.sqrt() - 1.0)).abs() < 1e-12);
    assert!((rho - (3f64.sqrt() + 1.0)).abs() < 1e-12);
    assert!(u * u < rho);
    assert!((rho * u - 2.0).abs() < 1e-12);
}

#[test]
fn sonic_upstream_gives_trivial_shock() {
    let s = UpstreamState::new(1.4, 2.0, 2f64.powf(0.2)).unwrap();
    assert_eq!(normal_shock(&s).unwrap(), (s.q_inf(), 2.0));
    let sub = UpstreamState::new(2.0, 1.0, 0.5).unwrap();
    assert!(matches!(normal_shock(&sub), Err(Error::InvalidInput(_))));
    assert!(compute_polar(&sub, 16).is_err());
}

#[test]
fn rejects_bad_gamma() {
    assert!(matches!(UpstreamState::new(0.9, 1.0, 2.0), Err(Error::InvalidInput(m)) if m.contains("gamma > 1")));
}

#[test]
fn canonical_polar() {
    let s = canonical();
    let c = compute_polar(&s, DEFAULT_POLAR_SAMPLES).unwrap();
    let first = c.samples[0];
    let last = *c.samples.last().unwrap();
    assert_eq!((first.u1, first.u2), (2.0, 0.0));
    assert!((last.u1 - (3f64.sqrt() - 1.0)).abs() < 1e-12 && last.u2.abs() < 1e-12);
    assert!(c.max_residual() <= 1e-10, "{}", c.max_residual());
    assert!(c.theta_sonic < c.theta_d);
    assert!(c.theta_d_sampled <= c.theta_d && c.theta_d - c.theta_d_sampled < 1e-7);
    assert!(first.theta == 0.0 && last.theta.abs() < 1e-12);
    let n = c.samples.len();
    assert!(c.samples[1..n - 1].iter().all(|p| p.theta > 0.0 && p.rho > 1.0));
    let k = c.samples.iter().position(|p| p.theta == c.theta_d_sampled).unwrap();
    assert!(k > 0 && k < n - 1);
    assert_eq!(c.weak_state(0.0).unwrap(), [2.0, 0.0]);
}

#[test]
fn detachment_refinement_agrees_with_fine_sampling() {
    let s = canonical();
    let c = compute_polar(&s, 256).unwrap();
    let fine = compute_polar(&s, 16384).unwrap();
    assert!((c.theta_d - fine.theta_d).abs() < 1e-8);
    assert!((fine.theta_d_sampled - c.theta_d).abs() < 1e-8);
}

#[test]
fn weak_branch_selection() {
    let c = compute_polar(&canonical(), DEFAULT_POLAR_SAMPLES).unwrap();
    let near = c.theta_d - 1e-7;
    let w = c.weak_state(near).unwrap();
    let st = c.strong_state(near).unwrap();
    assert!(w[0].hypot(w[1]) > st[0].hypot(st[1]));
    assert!((w[0] - st[0]).hypot(w[1] - st[1]) < 1e-2);
    let t = c.weak_state(c.theta_d).unwrap();
    assert!((t[1].atan2(t[0]) - c.theta_d).abs() < 1e-12);
    assert!(matches!(c.weak_state(c.theta_d + 0.01), Err(Error::Detached { .. })));
}

#[test]
fn polar_is_symmetric() {
    let s = canonical();
    let c = compute_polar(&s, 64).unwrap();
    let full = c.full_curve();
    assert_eq!(full.len(), 2 * 64 - 2);
    for p in &full {
        let q = polar_point(&s, -p.sigma).unwrap();
        if p.sigma.abs() == c.samples[0].sigma {
            continue;
        }
        assert!((q.u1 - p.u1).abs() < 1e-14 && (q.u2 + p.u2).abs() < 1e-14);
    }
    assert!(c.to_csv().starts_with("sigma,u1,u2,rho,theta\n"));
}

#[test]
fn pseudo_potential_examples() {
    let st = SelfSimilarState::new(2.0, [1.0, 0.0], 1.5, 0.0).unwrap();
    assert_eq!(st.phi([1.0, 0.0]), 0.5);
    assert!((st.sonic_radius().powi(2) - 1.5).abs() < 1e-15);
    for conf in [Configuration::Reflection, Configuration::WedgeFlow] {
        let g = pseudo_sonic_geometry(st, 0.3, conf);
        for p in g.arc(1.0, 9) {
            assert!(g.to_local(p)[0].abs() < 1e-14);
        }
    }
}

proptest! {
    #[test]
    fn map_round_trips(x in -0.5f64..0.5, y in -3.0f64..3.0, tw in 0.0f64..1.5, u1 in -2.0f64..2.0, u2 in -2.0f64..2.0, wedge in proptest::bool::ANY) {
        let st = SelfSimilarState::new(1.4, [u1, u2], 1.3, 0.2).unwrap();
        let conf = if wedge { Configuration::WedgeFlow } else { Configuration::Reflection };
        let g = pseudo_sonic_geometry(st, tw, conf);
        let yy = if wedge { y + PI } else { y };
        let xi = g.to_xi([x, yy]);
        let back = g.to_local(xi);
        prop_assert!((back[0] - x).abs() <= 1e-12 && (back[1] - yy).abs() <= 1e-12, "{back:?}");
        let xi2 = g.to_xi(back);
        prop_assert!((xi2[0] - xi[0]).abs() <= 1e-12 && (xi2[1] - xi[1]).abs() <= 1e-12);
    }

    #[test]
    fn gradient_identity(a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let st = SelfSimilarState::new(2.0, [0.7, -0.2], 1.1, 0.3).unwrap();
        let gr = st.grad_phi([a, b]);
        let h = 1e-6;
        let fd = [
            (st.phi([a + h, b]) - st.phi([a - h, b])) / (2.0 * h),
            (st.phi([a, b + h]) - st.phi([a, b - h])) / (2.0 * h),
        ];
        prop_assert!((gr[0] - fd[0]).abs() < 1e-7 && (gr[1] - fd[1]).abs() < 1e-7);
        let n2 = gr[0] * gr[0] + gr[1] * gr[1];
        let d2 = (a - 0.7).powi(2) + (b + 0.2).powi(2);
        prop_assert!((n2 - d2).abs() <= 1e-12 * d2.max(1.0));
    }

    #[test]
    fn polar_residuals_and_ordering(gamma in 1.1f64..3.0, rho in 0.5f64..2.0, mach in 1.05f64..4.0) {
        let c0 = rho.powf(0.5 * (gamma - 1.0));
        let s = UpstreamState::new(gamma, rho, mach * c0).unwrap();
        let c = compute_polar(&s, 512).unwrap();
        prop_assert!(c.max_residual() <= 1e-10);
        prop_assert!(c.theta_sonic < c.theta_d);
        let th = 0.5 * c.theta_d;
        let w = c.weak_state(th).unwrap();
        let st = c.strong_state(th).unwrap();
        prop_assert!(w[0].hypot(w[1]) > st[0].hypot(st[1]));
    }
}
