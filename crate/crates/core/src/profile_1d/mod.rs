//! Transonic one-dimensional Euler-Poisson profiles.
//!
//! The system `u' = E u^γ/(u^{γ+1} - u_s^{γ+1})`, `E' = J/u - ρ_i` is 0/0 at
//! the sonic speed. Away from `u_s` it is integrated in `x₁` with an embedded
//! Runge-Kutta pair. Inside the band `|u - u_s| < δ u_s` a critical orbit is
//! followed in the `u`-parametrization instead, where
//! `dx/du = (u^{γ+1} - u_s^{γ+1}) / (E(u) u^γ)` is smooth and its value at
//! `u_s` is the removable limit `(γ+1)/√H''(u_s)`.

mod fields;
mod kz;
mod lemma;

pub use fields::{
    bernoulli_defect, parse_profile_csv, potential_ode_residual, reconstruct_fields, write_profile_csv,
    PROFILE_CSV_HEADER,
};
pub use kz::{kz_check, kz_coefficients, kz_direct, kz_representation, KzReport};
pub use lemma::{verify_lemma, ClaimResult, LemmaReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ode::{self, Node, OdeOptions, Stop};
use crate::numerics::quadrature;
use crate::phase_plane::{self, Branch, GasParams, SONIC_BAND};

/// Initial state `(u₀, E₀)` at `x₁ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InletData {
    pub u0: f64,
    pub e0: f64,
}

impl InletData {
    /// Inlet on the given critical branch at speed `u0`.
    pub fn on_branch(params: &GasParams, u0: f64, branch: Branch) -> Result<Self> {
        Ok(Self { u0, e0: phase_plane::critical_e(params, u0, branch)? })
    }

    /// `½E₀² - H(u₀)`.
    pub fn first_integral(&self, params: &GasParams) -> Result<f64> {
        Ok(0.5 * self.e0 * self.e0 - phase_plane::enthalpy_h(params, self.u0)?)
    }
}

/// When to end an integration run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopAt {
    /// Stop at this position.
    XMax(f64),
    /// Stop when `u` reaches this speed.
    UTarget(f64),
    /// Run to the natural end of the orbit: `u' = 0` on an accelerating
    /// branch, `u → 0⁺` (or the horizon) on a decelerating one.
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step in `x₁`; bounds the sample spacing.
    pub max_step: f64,
    /// Relative half-width of the `u`-parametrized band around `u_s`.
    pub sonic_band: f64,
    /// Number of samples placed across the band (odd, so `u_s` is a sample).
    pub band_samples: usize,
    /// Defect `|½E² - H(u)|` above which an orbit entering the band is
    /// declared off-critical.
    pub critical_tol: f64,
    /// Horizon used to decide `l_max = ∞` on decelerating orbits.
    pub x_big: f64,
    /// Decelerating runs stop once `u < u_floor · u_s`.
    pub u_floor: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 0.05,
            sonic_band: 1e-3,
            band_samples: 41,
            critical_tol: 1e-7,
            x_big: 1e3,
            u_floor: 1e-8,
        }
    }
}

impl IntegratorOptions {
    fn ode(&self) -> OdeOptions {
        OdeOptions { rtol: self.rtol, atol: self.atol, h_max: self.max_step, ..OdeOptions::default() }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.rtol > 0.0
            && self.atol > 0.0
            && self.max_step > 0.0
            && self.sonic_band > 0.0
            && self.sonic_band < 0.5
            && self.band_samples >= 3
            && self.critical_tol > 0.0
            && self.x_big > 0.0
            && self.u_floor > 0.0
            && self.u_floor < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid integrator options {self:?}")))
        }
    }
}

/// Which orbit a profile follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Accelerating,
    Decelerating,
    OffCritical,
}

impl ProfileKind {
    pub fn branch(self) -> Option<Branch> {
        match self {
            ProfileKind::Accelerating => Some(Branch::Accelerating),
            ProfileKind::Decelerating => Some(Branch::Decelerating),
            ProfileKind::OffCritical => None,
        }
    }
}

/// Terminal location of an orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LMax {
    Finite(f64),
    Infinite,
}

/// How an integration run ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileEnd {
    XMax,
    UTarget,
    /// `u' = 0` (E = 0) reached.
    Turning,
    /// Speed dropped below the floor.
    SpeedFloor,
    /// Position reached the horizon `x_big`.
    Horizon,
    /// Off-critical orbit stopped at the sonic band (only from [`integrate_truncated`]).
    SonicBlowUp,
}

/// One sampled point of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x1: f64,
    pub u: f64,
    pub e: f64,
    pub rho: f64,
    pub p: f64,
    pub phi: f64,
    pub phi_bar: f64,
    /// `du/dx₁` at the sample (from the ODE, or the desingularized form inside the band).
    pub du_dx: f64,
}

/// A sampled transonic profile `x₁ ↦ (u, E, ρ, p, Φ, φ̄)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile1D {
    pub params: GasParams,
    pub kind: ProfileKind,
    pub inlet: InletData,
    pub samples: Vec<Sample>,
    pub l_s: Option<f64>,
    pub l_max: Option<LMax>,
    pub end: ProfileEnd,
    /// Relative half-width of the sonic band used when the profile was built.
    pub sonic_band: f64,
}

impl Profile1D {
    pub fn x_range(&self) -> (f64, f64) {
        (self.samples[0].x1, self.samples[self.samples.len() - 1].x1)
    }

    /// `du/dx₁` at a state on this profile.
    pub(crate) fn du_dx_at(&self, u: f64, e: f64) -> f64 {
        derivative_u(&self.params, self.kind, self.sonic_band, u, e)
    }

    /// `(u, E, du/dx)` at `x1` by cubic Hermite interpolation of the samples.
    pub fn state_at(&self, x1: f64) -> Result<(f64, f64, f64)> {
        let (lo, hi) = self.x_range();
        if !(x1 >= lo && x1 <= hi) {
            return Err(Error::OutOfRange { x: x1, lo, hi });
        }
        let k = match self.samples.binary_search_by(|s| s.x1.total_cmp(&x1)) {
            Ok(k) => {
                let s = &self.samples[k];
                return Ok((s.u, s.e, s.du_dx));
            }
            Err(k) => k,
        };
        let a = &self.samples[k - 1];
        let b = &self.samples[k];
        let p = &self.params;
        let na = Node { t: a.x1, y: [a.u, a.e], dy: [a.du_dx, p.j() / a.u - p.rho_ion()] };
        let nb = Node { t: b.x1, y: [b.u, b.e], dy: [b.du_dx, p.j() / b.u - p.rho_ion()] };
        let [u, e] = ode::hermite(&na, &nb, x1);
        Ok((u, e, self.du_dx_at(u, e)))
    }

    /// Largest `|½E² - H(u)| / max(1, H(u))` over the samples.
    pub fn first_integral_defect(&self) -> f64 {
        let c0 = match self.kind {
            ProfileKind::OffCritical => self.inlet.first_integral(&self.params).unwrap_or(0.0),
            _ => 0.0,
        };
        self.samples
            .iter()
            .map(|s| {
                let h = phase_plane::enthalpy_h(&self.params, s.u).unwrap_or(f64::NAN);
                (0.5 * s.e * s.e - h - c0).abs() / h.abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }
}

fn derivative_u(p: &GasParams, kind: ProfileKind, band: f64, u: f64, e: f64) -> f64 {
    let z = (u - p.u_sonic()) / p.u_sonic();
    if let Some(branch) = kind.branch() {
        if z.abs() < band {
            if let Ok(v) = phase_plane::critical_du_dx(p, u, branch) {
                return v;
            }
        }
    }
    p.rhs(u, e)[0]
}

fn sample(p: &GasParams, kind: ProfileKind, band: f64, x1: f64, u: f64, e: f64) -> Sample {
    Sample { x1, u, e, rho: 0.0, p: 0.0, phi: 0.0, phi_bar: 0.0, du_dx: derivative_u(p, kind, band, u, e) }
}

fn classify_inlet(p: &GasParams, inlet: &InletData, opts: &IntegratorOptions) -> Result<ProfileKind> {
    if !(inlet.u0.is_finite() && inlet.u0 > 0.0 && inlet.e0.is_finite()) {
        return Err(Error::InvalidInput(format!("inlet must have u0 > 0 and finite E0, got {inlet:?}")));
    }
    let us = p.u_sonic();
    if (inlet.u0 - us).abs() <= SONIC_BAND * us {
        return Err(Error::InvalidInput(
            "inlet speed is sonic: (u_s, 0) is a degenerate fixed point of the desingularized flow".into(),
        ));
    }
    let h = phase_plane::enthalpy_h(p, inlet.u0)?;
    let defect = (0.5 * inlet.e0 * inlet.e0 - h).abs();
    // Inlets are placed on the critical set by `critical_e`; only round-off is tolerated.
    let tol = (1e-3 * opts.critical_tol).max(1e-13) * h.max(1.0);
    if defect > tol {
        return Ok(ProfileKind::OffCritical);
    }
    let prod = (inlet.u0 - us) * inlet.e0;
    Ok(if prod > 0.0 {
        ProfileKind::Accelerating
    } else if prod < 0.0 {
        ProfileKind::Decelerating
    } else if inlet.u0 > us {
        // E₀ = 0 above u_s: the junction at u*; only the decelerating orbit leaves it.
        ProfileKind::Decelerating
    } else {
        ProfileKind::Accelerating
    })
}

struct RunState {
    samples: Vec<Sample>,
    end: Option<ProfileEnd>,
}

/// Integrates a profile from `inlet`.
///
/// Off-critical orbits that reach the sonic band fail with
/// [`Error::SonicBlowUp`]; use [`integrate_truncated`] to keep the part
/// computed before the band.
pub fn integrate_profile(
    params: &GasParams,
    inlet: InletData,
    stop: StopAt,
    opts: &IntegratorOptions,
) -> Result<Profile1D> {
    run(params, inlet, stop, opts, false)
}

/// Like [`integrate_profile`], but an off-critical orbit reaching the sonic
/// band returns the truncated profile (with `end = SonicBlowUp`) instead of an error.
pub fn integrate_truncated(
    params: &GasParams,
    inlet: InletData,
    stop: StopAt,
    opts: &IntegratorOptions,
) -> Result<Profile1D> {
    run(params, inlet, stop, opts, true)
}

fn run(
    params: &GasParams,
    inlet: InletData,
    stop: StopAt,
    opts: &IntegratorOptions,
    allow_truncation: bool,
) -> Result<Profile1D> {
    opts.validate()?;
    let p = *params;
    let kind = classify_inlet(&p, &inlet, opts)?;
    match stop {
        StopAt::XMax(x) if !(x > 0.0 && x.is_finite()) => {
            return Err(Error::InvalidInput(format!("x_max must be finite and > 0, got {x}")))
        }
        StopAt::UTarget(u) if !(u > 0.0 && u.is_finite()) => {
            return Err(Error::InvalidInput(format!("u_target must be finite and > 0, got {u}")))
        }
        _ => {}
    }
    let us = p.u_sonic();
    let band = opts.sonic_band;
    let increasing = match kind {
        ProfileKind::Accelerating => true,
        ProfileKind::Decelerating => false,
        ProfileKind::OffCritical => {
            let [du, de] = p.rhs(inlet.u0, inlet.e0);
            if du != 0.0 {
                du > 0.0
            } else {
                de * p.sonic_gap(inlet.u0) > 0.0
            }
        }
    };
    if let StopAt::UTarget(ut) = stop {
        let ahead = if increasing { ut > inlet.u0 } else { ut < inlet.u0 };
        if !ahead {
            return Err(Error::InvalidInput(format!(
                "u_target = {ut} is not ahead of u0 = {} along the orbit",
                inlet.u0
            )));
        }
    }

    let mut st = RunState { samples: vec![sample(&p, kind, band, 0.0, inlet.u0, inlet.e0)], end: None };

    let z0 = (inlet.u0 - us) / us;
    let x_end = match stop {
        StopAt::XMax(x) => x,
        _ => opts.x_big,
    };

    // Phase A: x-parametrized up to the band (or the stop condition).
    let mut start = (0.0, inlet.u0, inlet.e0);
    let in_band = z0.abs() < band;
    let mut reached_band = in_band;
    if !in_band {
        let seg = x_segment(&p, kind, start, x_end, stop, opts, true)?;
        st.samples.extend(seg.samples.into_iter().skip(1));
        match seg.end {
            SegmentEnd::Band => reached_band = true,
            SegmentEnd::Done(e) => st.end = Some(e),
        }
        let last = *st.samples.last().expect("non-empty");
        start = (last.x1, last.u, last.e);
    } else if kind == ProfileKind::OffCritical {
        return Err(Error::SonicBlowUp {
            x1: 0.0,
            u: inlet.u0,
            e: inlet.e0,
            defect: inlet.first_integral(&p)?,
        });
    }

    if reached_band {
        // Phase B: follow the critical branch across the band in u.
        let (x_a, u_a, e_a) = start;
        let h = phase_plane::enthalpy_h(&p, u_a)?;
        let defect = (0.5 * e_a * e_a - h).abs();
        let branch = match kind.branch() {
            Some(b) if defect <= opts.critical_tol => b,
            _ => {
                if allow_truncation {
                    return Ok(finish(p, kind, inlet, st.samples, ProfileEnd::SonicBlowUp, band));
                }
                return Err(Error::SonicBlowUp { x1: x_a, u: u_a, e: e_a, defect });
            }
        };
        // Project the entry state onto the branch the band segment follows,
        // so the entry sample's E and u' describe the same orbit.
        if let Some(last) = st.samples.last_mut() {
            if last.u == u_a {
                let e = phase_plane::critical_e(&p, u_a, branch)?;
                *last = sample(&p, kind, band, x_a, u_a, e);
            }
        }
        let u_b = if increasing { us * (1.0 + band) } else { us * (1.0 - band) };
        let (band_samples, band_end) = band_segment(&p, kind, branch, x_a, u_a, u_b, stop, opts)?;
        st.samples.extend(band_samples);
        st.end = band_end;
        let last = *st.samples.last().expect("non-empty");
        start = (last.x1, last.u, last.e);

        // Phase C: x-parametrized after the band.
        if st.end.is_none() {
            let seg = x_segment(&p, kind, start, x_end, stop, opts, false)?;
            st.samples.extend(seg.samples.into_iter().skip(1));
            if let SegmentEnd::Done(e) = seg.end {
                st.end = Some(e);
            }
        }
    }
    let end = st.end.unwrap_or(ProfileEnd::Horizon);
    let mut profile = finish(p, kind, inlet, st.samples, end, band);
    if stop == StopAt::Terminal {
        profile.l_max = match (kind, end) {
            (ProfileKind::Accelerating, ProfileEnd::Turning) => {
                Some(LMax::Finite(profile.samples.last().expect("non-empty").x1))
            }
            (ProfileKind::Decelerating, _) => Some(locate_lmax(&p, inlet, opts)?.l_max),
            _ => None,
        };
    }
    Ok(profile)
}

fn finish(
    p: GasParams,
    kind: ProfileKind,
    inlet: InletData,
    samples: Vec<Sample>,
    end: ProfileEnd,
    band: f64,
) -> Profile1D {
    let mut profile = Profile1D { params: p, kind, inlet, samples, l_s: None, l_max: None, end, sonic_band: band };
    profile.l_s = locate_sonic(&profile).ok();
    reconstruct_fields(&p, &mut profile);
    profile
}

enum SegmentEnd {
    Band,
    Done(ProfileEnd),
}

struct Segment {
    samples: Vec<Sample>,
    end: SegmentEnd,
}

fn x_segment(
    p: &GasParams,
    kind: ProfileKind,
    start: (f64, f64, f64),
    x_end: f64,
    stop: StopAt,
    opts: &IntegratorOptions,
    band_event: bool,
) -> Result<Segment> {
    let (x0, u0, e0) = start;
    if x0 >= x_end {
        return Ok(Segment {
            samples: vec![sample(p, kind, opts.sonic_band, x0, u0, e0)],
            end: SegmentEnd::Done(ProfileEnd::XMax),
        });
    }
    let floor = opts.u_floor * p.u_sonic();
    let u_target = match stop {
        StopAt::UTarget(u) => u,
        _ => f64::NAN,
    };
    // Event order: band edge, turning point, target, floor.
    let us = p.u_sonic();
    let half_width = opts.sonic_band * us;
    let mut g_band = |_: f64, y: &[f64; 2]| if band_event { (y[0] - us).abs() - half_width } else { 1.0 };
    // Only the accelerating orbit ends at E = 0; elsewhere E = 0 is a regular point.
    let turning = kind == ProfileKind::Accelerating;
    let mut g_turn = |_: f64, y: &[f64; 2]| if turning { y[1] } else { 1.0 };
    let mut g_target = |_: f64, y: &[f64; 2]| if u_target.is_nan() { 1.0 } else { y[0] - u_target };
    let mut g_floor = |_: f64, y: &[f64; 2]| y[0] - floor;
    let rhs = |_: f64, y: &[f64; 2]| {
        if y[0] <= 0.0 {
            [f64::NAN, f64::NAN]
        } else {
            p.rhs(y[0], y[1])
        }
    };
    let tr = ode::integrate(
        rhs,
        x0,
        [u0, e0],
        x_end,
        &opts.ode(),
        &mut [&mut g_band, &mut g_turn, &mut g_target, &mut g_floor],
    )?;
    let samples = tr
        .nodes
        .iter()
        .map(|n| sample(p, kind, opts.sonic_band, n.t, n.y[0], n.y[1]))
        .collect();
    let end = match tr.stop {
        Stop::Event(0) => SegmentEnd::Band,
        Stop::Event(1) => SegmentEnd::Done(ProfileEnd::Turning),
        Stop::Event(2) => SegmentEnd::Done(ProfileEnd::UTarget),
        Stop::Event(_) => SegmentEnd::Done(ProfileEnd::SpeedFloor),
        Stop::End => SegmentEnd::Done(match stop {
            StopAt::XMax(_) => ProfileEnd::XMax,
            _ => ProfileEnd::Horizon,
        }),
    };
    let mut seg = Segment { samples, end };
    if let SegmentEnd::Done(ProfileEnd::Turning) = seg.end {
        // Close the orbit on E = 0 exactly.
        if let Some(last) = seg.samples.last_mut() {
            last.e = 0.0;
            last.du_dx = 0.0;
        }
    }
    if let SegmentEnd::Done(ProfileEnd::UTarget) = seg.end {
        if let Some(last) = seg.samples.last_mut() {
            last.u = u_target;
        }
    }
    Ok(seg)
}

/// Samples the band `[u_a, u_b]` in the u-parametrization, stopping early if
/// the stop condition falls inside.
#[allow(clippy::too_many_arguments)]
fn band_segment(
    p: &GasParams,
    kind: ProfileKind,
    branch: Branch,
    x_a: f64,
    u_a: f64,
    u_b: f64,
    stop: StopAt,
    opts: &IntegratorOptions,
) -> Result<(Vec<Sample>, Option<ProfileEnd>)> {
    let us = p.u_sonic();
    let n = opts.band_samples | 1;
    // Uniform in u between the band edges with u_s as the middle node; the
    // first node is the entry point u_a itself.
    let lo_edge = us * (1.0 - opts.sonic_band);
    let hi_edge = us * (1.0 + opts.sonic_band);
    let (from, to) = if u_b > u_a { (lo_edge, hi_edge) } else { (hi_edge, lo_edge) };
    let mut nodes: Vec<f64> = (1..n)
        .map(|k| {
            let mid = (n - 1) / 2;
            if k == mid {
                us
            } else {
                from + (to - from) * k as f64 / (n - 1) as f64
            }
        })
        .collect();
    // Entry may be inside the band when the inlet itself was.
    nodes.retain(|&u| if u_b > u_a { u > u_a } else { u < u_a });

    let dxdu = |u: f64| phase_plane::critical_dx_du(p, u, branch).unwrap_or(f64::NAN);
    let mut out = Vec::with_capacity(nodes.len());
    let mut x = x_a;
    let mut u_prev = u_a;
    for &u in &nodes {
        let dx = quadrature::integrate(dxdu, u_prev, u, 1e-15, 1e-13)?;
        let x_next = x + dx;
        // Stop conditions inside the band.
        let hit_target = match stop {
            StopAt::UTarget(ut) => (ut - u_prev) * (ut - u) <= 0.0,
            _ => false,
        };
        let hit_x = match stop {
            StopAt::XMax(xm) => x_next >= xm,
            _ => false,
        };
        if hit_target {
            let StopAt::UTarget(ut) = stop else { unreachable!() };
            let xt = x + quadrature::integrate(dxdu, u_prev, ut, 1e-15, 1e-13)?;
            let e = phase_plane::critical_e(p, ut, branch)?;
            out.push(sample(p, kind, opts.sonic_band, xt, ut, e));
            return Ok((out, Some(ProfileEnd::UTarget)));
        }
        if hit_x {
            let StopAt::XMax(xm) = stop else { unreachable!() };
            let base = x;
            let from_u = u_prev;
            let g = |uu: f64| base + quadrature::integrate(dxdu, from_u, uu, 1e-15, 1e-13).unwrap_or(f64::NAN) - xm;
            let uu = crate::numerics::roots::brent(g, u_prev, u, 1e-15)?;
            let e = phase_plane::critical_e(p, uu, branch)?;
            out.push(sample(p, kind, opts.sonic_band, xm, uu, e));
            return Ok((out, Some(ProfileEnd::XMax)));
        }
        x = x_next;
        let e = phase_plane::critical_e(p, u, branch)?;
        let mut s = sample(p, kind, opts.sonic_band, x, u, e);
        if u == us {
            s.e = 0.0;
            s.du_dx = 1.0 / phase_plane::sonic_dx_du(p, branch);
        }
        out.push(s);
        u_prev = u;
    }
    Ok((out, None))
}

/// Position where the profile crosses `u_s`.
pub fn locate_sonic(profile: &Profile1D) -> Result<f64> {
    let us = profile.params.u_sonic();
    let s = &profile.samples;
    for (k, smp) in s.iter().enumerate() {
        if (smp.u - us).abs() <= SONIC_BAND * us {
            // A sample on u_s only counts if the orbit actually crosses there.
            let before = s[..k].iter().rev().find(|q| (q.u - us).abs() > SONIC_BAND * us);
            let after = s[k + 1..].iter().find(|q| (q.u - us).abs() > SONIC_BAND * us);
            if let (Some(b), Some(a)) = (before, after) {
                if (b.u - us).signum() != (a.u - us).signum() {
                    return Ok(smp.x1);
                }
            }
        }
    }
    for w in s.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let fa = a.u - us;
        let fb = b.u - us;
        if fa * fb < 0.0 {
            let root = crate::numerics::roots::brent(
                |x| profile.state_at(x).map(|st| st.0 - us).unwrap_or(f64::NAN),
                a.x1,
                b.x1,
                1e-15 * b.x1.abs().max(1.0),
            )?;
            return Ok(root);
        }
    }
    Err(Error::NoSonicCrossing)
}

/// Diagnostics of the terminal location of a critical orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LMaxReport {
    pub l_max: LMax,
    /// Speed at the end point (`u*` on accelerating orbits).
    pub u_end: f64,
    /// Field at the end point.
    pub e_end: f64,
    /// `(u_k, x(u_k), E(u_k))` along the dyadic sequence `u_k = u_s 2^{-k}` (decelerating only).
    pub trend: Vec<[f64; 3]>,
    /// Ratios of successive x-increments along the dyadic sequence.
    pub increment_ratios: Vec<f64>,
    /// Which test decided the flag.
    pub decided_by: String,
}

/// Ratio above which the dyadic x-increments are treated as non-summable.
const DIVERGENCE_RATIO: f64 = 0.98;

/// Terminal location of the critical orbit through `inlet`, computed from the
/// `u`-parametrized extent `x(u) = ∫ dx/du du`.
pub fn locate_lmax(params: &GasParams, inlet: InletData, opts: &IntegratorOptions) -> Result<LMaxReport> {
    let p = *params;
    let kind = classify_inlet(&p, &inlet, opts)?;
    let us = p.u_sonic();
    match kind {
        ProfileKind::OffCritical => Err(Error::InvalidInput("l_max is defined for critical inlets only".into())),
        ProfileKind::Accelerating => {
            let branch = Branch::Accelerating;
            let u_star = phase_plane::find_u_star(&p)?;
            let f = |u: f64| phase_plane::critical_dx_du(&p, u, branch).unwrap_or(f64::NAN);
            let mut x = 0.0;
            let mut u_lo = inlet.u0;
            if u_lo < us {
                x += quadrature::integrate(f, u_lo, us, 1e-15, 1e-13)?;
                u_lo = us;
            }
            let split = p.u_bar().max(u_lo);
            if split > u_lo {
                x += quadrature::integrate(f, u_lo, split, 1e-15, 1e-13)?;
            }
            // 1/√(u* - u) endpoint singularity: substitute u = u* - s².
            let smax = (u_star - split).max(0.0).sqrt();
            let h1 = phase_plane::enthalpy_h_prime(&p, u_star).abs();
            let limit = 2.0 * p.sonic_gap(u_star) / (u_star.powf(p.gamma()) * (2.0 * h1).sqrt());
            let g = |s: f64| {
                if s < 1e-6 * u_star.sqrt() {
                    return limit;
                }
                let u = u_star - s * s;
                let e = phase_plane::critical_e(&p, u, branch).unwrap_or(f64::NAN);
                p.sonic_gap(u) / (e * u.powf(p.gamma())) * 2.0 * s
            };
            x += quadrature::integrate(g, 0.0, smax, 1e-15, 1e-13)?;
            Ok(LMaxReport {
                l_max: LMax::Finite(x),
                u_end: u_star,
                e_end: 0.0,
                trend: Vec::new(),
                increment_ratios: Vec::new(),
                decided_by: "u-parametrized extent to u*".into(),
            })
        }
        ProfileKind::Decelerating => {
            let branch = Branch::Decelerating;
            // Integrate |dx/du| in log u for conditioning near u → 0.
            let f = |v: f64| {
                let u = v.exp();
                -phase_plane::critical_dx_du(&p, u, branch).unwrap_or(f64::NAN) * u
            };
            let u_start = inlet.u0.min(us);
            let mut x = if inlet.u0 > us {
                quadrature::integrate(f, us.ln(), inlet.u0.ln(), 1e-15, 1e-13)?
            } else {
                0.0
            };
            let mut trend = vec![[u_start, x, phase_plane::critical_e(&p, u_start, branch)?]];
            let mut ratios: Vec<f64> = Vec::new();
            let mut last_inc: Option<f64> = None;
            let mut u_k = u_start;
            for k in 1..=60 {
                let u_next = u_start * 0.5f64.powi(k);
                let inc = quadrature::integrate(f, u_next.ln(), u_k.ln(), 1e-15, 1e-12)?;
                x += inc;
                u_k = u_next;
                let e_k = phase_plane::critical_e(&p, u_k, branch)?;
                trend.push([u_k, x, e_k]);
                if let Some(prev) = last_inc {
                    ratios.push(inc / prev);
                }
                last_inc = Some(inc);
                if x > opts.x_big {
                    return Ok(LMaxReport {
                        l_max: LMax::Infinite,
                        u_end: u_k,
                        e_end: e_k,
                        trend,
                        increment_ratios: ratios,
                        decided_by: format!("x exceeded horizon {} at u = {u_k:e}", opts.x_big),
                    });
                }
                let n = ratios.len();
                if k >= 24 && n >= 3 {
                    let r = ratios[n - 1];
                    let settled = (ratios[n - 1] - ratios[n - 2]).abs() < 1e-4
                        && (ratios[n - 2] - ratios[n - 3]).abs() < 1e-4;
                    if settled {
                        if r < DIVERGENCE_RATIO {
                            let tail = inc * r / (1.0 - r);
                            return Ok(LMaxReport {
                                l_max: LMax::Finite(x + tail),
                                u_end: 0.0,
                                e_end: f64::INFINITY,
                                trend,
                                increment_ratios: ratios,
                                decided_by: format!("geometric tail, increment ratio {r:.6}"),
                            });
                        }
                        return Ok(LMaxReport {
                            l_max: LMax::Infinite,
                            u_end: u_k,
                            e_end: e_k,
                            trend,
                            increment_ratios: ratios,
                            decided_by: format!("non-summable increments, ratio {r:.6}"),
                        });
                    }
                }
            }
            let e_end = trend.last().map(|t| t[2]).unwrap_or(0.0);
            Ok(LMaxReport {
                l_max: LMax::Infinite,
                u_end: u_k,
                e_end,
                trend,
                increment_ratios: ratios,
                decided_by: "increments did not settle".into(),
            })
        }
    }
}

#[cfg(test)]
mod tests;
