use serde::{Deserialize, Serialize};

use super::{
    classify_inlet, integrate_profile, integrate_truncated, locate_lmax, locate_sonic, InletData, IntegratorOptions,
    LMax, LMaxReport, Profile1D, ProfileEnd, ProfileKind, StopAt,
};
use crate::error::Result;
use crate::phase_plane::{self, Branch, GasParams};

/// Threshold of the phase-plane coverage check.
pub const COVERAGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimResult {
    pub name: String,
    pub passed: bool,
    /// Measured quantity the decision was based on.
    pub margin: f64,
    pub detail: String,
}

impl ClaimResult {
    fn new(name: &str, passed: bool, margin: f64, detail: String) -> Self {
        Self { name: name.into(), passed, margin, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub kind: ProfileKind,
    /// Branch the claims were checked against.
    pub expected: Branch,
    pub claims: Vec<ClaimResult>,
    pub l_s: Option<f64>,
    pub l_max: Option<LMax>,
    pub lmax_report: Option<LMaxReport>,
    pub end: ProfileEnd,
    pub samples: usize,
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.claims.iter().all(|c| c.passed)
    }

    pub fn claim(&self, name: &str) -> Option<&ClaimResult> {
        self.claims.iter().find(|c| c.name == name)
    }
}

/// Runs the full pipeline from `inlet` and checks the structural claims of
/// the critical orbit: strict monotonicity of `u`, vanishing of `u'` at the
/// end (with `E → ∞` on the decelerating branch), coverage of the critical
/// branch in the phase plane, a unique sonic crossing, and the finite or
/// infinite extent of the orbit.
///
/// Off-critical inlets are integrated up to the sonic band and judged
/// against the branch their direction of motion suggests; the claims fail.
pub fn verify_lemma(params: &GasParams, inlet: InletData, opts: &IntegratorOptions) -> Result<LemmaReport> {
    let p = *params;
    let kind = classify_inlet(&p, &inlet, opts)?;
    let (profile, lmax_report) = match kind {
        ProfileKind::OffCritical => (integrate_truncated(&p, inlet, StopAt::Terminal, opts)?, None),
        _ => {
            let prof = integrate_profile(&p, inlet, StopAt::Terminal, opts)?;
            (prof, Some(locate_lmax(&p, inlet, opts)?))
        }
    };
    let expected = match kind {
        ProfileKind::Accelerating => Branch::Accelerating,
        ProfileKind::Decelerating => Branch::Decelerating,
        ProfileKind::OffCritical => {
            let last = profile.samples.last().expect("non-empty");
            if last.u >= inlet.u0 {
                Branch::Accelerating
            } else {
                Branch::Decelerating
            }
        }
    };
    let mut claims = vec![
        monotonicity(&profile, expected),
        terminal(&p, &profile, expected),
        coverage(&p, &profile, expected),
        sonic_crossing(&profile),
    ];
    claims.push(extent(&p, &profile, lmax_report.as_ref(), expected));
    Ok(LemmaReport {
        kind,
        expected,
        claims,
        l_s: profile.l_s,
        l_max: profile.l_max,
        lmax_report,
        end: profile.end,
        samples: profile.samples.len(),
    })
}

fn monotonicity(profile: &Profile1D, expected: Branch) -> ClaimResult {
    let sign = match expected {
        Branch::Accelerating => 1.0,
        Branch::Decelerating => -1.0,
    };
    let margin = profile
        .samples
        .windows(2)
        .map(|w| sign * (w[1].u - w[0].u))
        .fold(f64::INFINITY, f64::min);
    let du_margin = profile.samples[..profile.samples.len() - 1]
        .iter()
        .map(|s| sign * s.du_dx)
        .fold(f64::INFINITY, f64::min);
    let passed = margin > 0.0 && du_margin > 0.0;
    ClaimResult::new(
        "monotone",
        passed,
        margin,
        format!("min signed increment {margin:e}, min signed u' before the end {du_margin:e}"),
    )
}

fn terminal(p: &GasParams, profile: &Profile1D, expected: Branch) -> ClaimResult {
    let last = profile.samples.last().expect("non-empty");
    let du_end = last.du_dx.abs();
    match expected {
        Branch::Accelerating => {
            let passed = profile.end == ProfileEnd::Turning && du_end <= 1e-9;
            ClaimResult::new(
                "terminal",
                passed,
                du_end,
                format!("end {:?} at x = {}, |u'| = {du_end:e}", profile.end, last.x1),
            )
        }
        Branch::Decelerating => {
            let e_growth = last.e.abs() / profile.inlet.e0.abs().max(1.0);
            let ends = matches!(profile.end, ProfileEnd::Horizon | ProfileEnd::SpeedFloor);
            let decay = tail_decay_exponent(profile);
            let vanishing = du_end <= 1e-6 || decay >= 0.4 * p.gamma();
            let passed = ends && vanishing && e_growth >= 1e3 && last.u < p.u_sonic();
            ClaimResult::new(
                "terminal",
                passed,
                du_end,
                format!(
                    "end {:?} at x = {}, u = {:e}, |u'| = {du_end:e}, tail |u'| ~ u^{decay:.3}, |E|/max(1,|E0|) = {e_growth:e}",
                    profile.end, last.x1, last.u
                ),
            )
        }
    }
}

/// Exponent `k` in `|u'| ~ u^k` over the last two decades of `u`, or `-∞`
/// when `|u'|` is not monotone there. On the decelerating branch
/// `½E² = H(u) ~ u^{-γ}` gives `k = γ/2`, so `u' → 0` however slowly.
fn tail_decay_exponent(profile: &Profile1D) -> f64 {
    let s = &profile.samples;
    let last = s[s.len() - 1];
    let Some(start) = s.iter().rposition(|q| q.u >= 100.0 * last.u) else {
        return f64::NEG_INFINITY;
    };
    let tail = &s[start..];
    if tail.len() < 3 || !tail.windows(2).all(|w| w[1].du_dx.abs() < w[0].du_dx.abs()) {
        return f64::NEG_INFINITY;
    }
    let first = tail[0];
    (last.du_dx.abs() / first.du_dx.abs()).ln() / (last.u / first.u).ln()
}

/// Scaled distance of the visited states from the critical branch,
/// sampled at every node and at every step midpoint of the dense output,
/// combined with the gap between the last state and the branch endpoint.
fn coverage(p: &GasParams, profile: &Profile1D, expected: Branch) -> ClaimResult {
    // First-order Euclidean distance to the level set F = ½E² - H(u) = 0,
    // |F|/|∇F|, with √|F| taking over at the saddle (u_s, 0) where ∇F = 0.
    // States on the wrong half of the set are at least |E| away.
    let dist = |u: f64, e: f64| match phase_plane::enthalpy_h(p, u) {
        Ok(h) => {
            let f = (0.5 * e * e - h).abs();
            let grad = e.hypot(phase_plane::enthalpy_h_prime(p, u));
            let mut d = f / grad.max(f.sqrt());
            let wrong_side = phase_plane::critical_e(p, u, expected).map_or(false, |ec| ec * e < 0.0);
            if wrong_side {
                d = d.max(e.abs());
            }
            d / e.abs().max(1.0)
        }
        Err(_) => f64::INFINITY,
    };
    let mut worst: f64 = 0.0;
    for w in profile.samples.windows(2) {
        worst = worst.max(dist(w[0].u, w[0].e));
        if let Ok((u, e, _)) = profile.state_at(0.5 * (w[0].x1 + w[1].x1)) {
            worst = worst.max(dist(u, e));
        }
    }
    let last = profile.samples.last().expect("non-empty");
    worst = worst.max(dist(last.u, last.e));
    let end_gap = match expected {
        Branch::Accelerating => match phase_plane::find_u_star(p) {
            Ok(us) => (last.u - us).abs() / us,
            Err(_) => f64::INFINITY,
        },
        // The decelerating branch runs to u = 0; require most of it.
        Branch::Decelerating => {
            if last.u <= 1e-3 * p.u_sonic() {
                0.0
            } else {
                last.u / p.u_sonic()
            }
        }
    };
    let margin = worst.max(end_gap);
    ClaimResult::new(
        "coverage",
        margin <= COVERAGE_TOL,
        margin,
        format!("max scaled distance to branch {worst:e}, endpoint gap {end_gap:e}"),
    )
}

fn sonic_crossing(profile: &Profile1D) -> ClaimResult {
    let us = profile.params.u_sonic();
    let signs: Vec<f64> = profile
        .samples
        .iter()
        .map(|s| s.u - us)
        .filter(|d| d.abs() > phase_plane::SONIC_BAND * us)
        .map(f64::signum)
        .collect();
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    let located = locate_sonic(profile);
    let passed = changes == 1 && located.is_ok();
    let margin = match located {
        Ok(x) => x,
        Err(_) => f64::NAN,
    };
    ClaimResult::new("sonic-crossing", passed, margin, format!("{changes} sign change(s) of u - u_s"))
}

fn extent(p: &GasParams, profile: &Profile1D, report: Option<&LMaxReport>, expected: Branch) -> ClaimResult {
    let Some(r) = report else {
        return ClaimResult::new("extent", false, f64::NAN, "no terminal location for off-critical data".into());
    };
    match (expected, r.l_max) {
        (Branch::Accelerating, LMax::Finite(l)) => {
            let x_end = profile.samples.last().expect("non-empty").x1;
            let gap = (x_end - l).abs() / l;
            ClaimResult::new(
                "extent",
                gap <= 1e-6,
                gap,
                format!("l_max = {l} from x(u*), ODE run ends at {x_end}"),
            )
        }
        (Branch::Decelerating, lm) => {
            let expect_finite = p.gamma() < 2.0;
            let finite = matches!(lm, LMax::Finite(_));
            let ratio = r.increment_ratios.last().copied().unwrap_or(f64::NAN);
            ClaimResult::new(
                "extent",
                finite == expect_finite,
                ratio,
                format!("{lm:?}; {}", r.decided_by),
            )
        }
        (_, lm) => ClaimResult::new("extent", false, f64::NAN, format!("unexpected {lm:?}")),
    }
}
