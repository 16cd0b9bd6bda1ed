//! Steady potential-flow shock polar and the pseudo-sonic geometry of a
//! uniform self-similar state.
//!
//! Across a shock of inclination `σ` to the upstream flow `(q∞, 0)` the
//! tangential velocity `q∞ cos σ` is continuous, the Bernoulli constant is
//! shared, and the normal mass flux is conserved:
//! `ρ(|u|) u_n = ρ∞ q∞ sin σ` with `ρ(q) = (1 + (γ-1)(B₀ - q²/2))^{1/(γ-1)}`.
//! The compressive root `u_n` lies below the point where `u_n` equals the
//! downstream sound speed, where the flux `ρ u_n` peaks.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv, svg};
use crate::numerics::roots;

/// Number of shock inclinations sampled by [`compute_polar`] by default.
pub const DEFAULT_POLAR_SAMPLES: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpstreamState {
    gamma: f64,
    rho_inf: f64,
    q_inf: f64,
}

impl UpstreamState {
    pub fn new(gamma: f64, rho_inf: f64, q_inf: f64) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma must satisfy gamma > 1, got {gamma}")));
        }
        if !(rho_inf > 0.0 && rho_inf.is_finite()) {
            return Err(Error::InvalidInput(format!("rho_inf must be positive, got {rho_inf}")));
        }
        if !(q_inf > 0.0 && q_inf.is_finite()) {
            return Err(Error::InvalidInput(format!("q_inf must be positive, got {q_inf}")));
        }
        Ok(Self { gamma, rho_inf, q_inf })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho_inf(&self) -> f64 {
        self.rho_inf
    }

    pub fn q_inf(&self) -> f64 {
        self.q_inf
    }

    /// `½q∞² + (ρ∞^{γ-1} - 1)/(γ-1)`.
    pub fn b0(&self) -> f64 {
        0.5 * self.q_inf * self.q_inf + (self.rho_inf.powf(self.gamma - 1.0) - 1.0) / (self.gamma - 1.0)
    }

    /// Upstream sound speed `ρ∞^{(γ-1)/2}`.
    pub fn sound_speed(&self) -> f64 {
        self.rho_inf.powf(0.5 * (self.gamma - 1.0))
    }

    pub fn is_supersonic(&self) -> bool {
        self.q_inf > self.sound_speed()
    }

    /// Mach angle `asin(c∞/q∞)`.
    pub fn mach_angle(&self) -> Result<f64> {
        if !self.is_supersonic() {
            return Err(Error::InvalidInput(format!(
                "upstream speed {} is not supersonic (sound speed {})",
                self.q_inf,
                self.sound_speed()
            )));
        }
        Ok((self.sound_speed() / self.q_inf).asin())
    }

    /// Speed at which the flow is sonic: `q² = ρ(q)^{γ-1}`.
    pub fn critical_speed(&self) -> f64 {
        let g = self.gamma;
        (2.0 * (1.0 + (g - 1.0) * self.b0()) / (g + 1.0)).sqrt()
    }

    fn mass_flux(&self) -> f64 {
        self.rho_inf * self.q_inf
    }
}

/// Density from the steady Bernoulli law at the given speed.
pub fn bernoulli_density(state: &UpstreamState, speed: f64) -> Result<f64> {
    let g = state.gamma;
    let base = 1.0 + (g - 1.0) * (state.b0() - 0.5 * speed * speed);
    if !(base >= 0.0) {
        let limit = (2.0 * (state.b0() + 1.0 / (g - 1.0))).sqrt();
        return Err(Error::Domain(format!("cavitation: speed {speed} exceeds the limit speed {limit}")));
    }
    Ok(base.powf(1.0 / (g - 1.0)))
}

/// Compressive normal component for tangential component `t` and mass flux `m`.
fn normal_root(state: &UpstreamState, t: f64, m: f64) -> Result<f64> {
    let g = state.gamma;
    let top2 = 2.0 * (1.0 + (g - 1.0) * (state.b0() - 0.5 * t * t)) / (g + 1.0);
    if !(top2 > 0.0) {
        return Err(Error::RootFinding(format!("no sonic normal speed for tangential component {t}")));
    }
    let top = top2.sqrt();
    let flux = |un: f64| bernoulli_density(state, un.hypot(t)).unwrap_or(0.0) * un - m;
    let f_top = flux(top);
    if f_top < 0.0 {
        // Below round-off the peak flux equals m only at the Mach angle.
        if f_top > -1e-12 * m {
            return Ok(top);
        }
        return Err(Error::RootFinding(format!("mass flux {m} exceeds the largest attainable flux")));
    }
    if f_top == 0.0 {
        return Ok(top);
    }
    roots::brent(flux, 0.0, top, 1e-16 * top.max(1.0))
}

/// Downstream `(u, ρ)` behind a normal shock.
pub fn normal_shock(state: &UpstreamState) -> Result<(f64, f64)> {
    let c = state.sound_speed();
    if state.q_inf < c {
        return Err(Error::InvalidInput(format!(
            "no subsonic root: upstream speed {} below sound speed {c}",
            state.q_inf
        )));
    }
    if state.q_inf == c {
        return Ok((state.q_inf, state.rho_inf));
    }
    let u = normal_root(state, 0.0, state.mass_flux())?;
    Ok((u, bernoulli_density(state, u)?))
}

/// One admissible point of the polar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarSample {
    /// Shock inclination to the upstream flow; negative on the mirrored branch.
    pub sigma: f64,
    pub u1: f64,
    pub u2: f64,
    pub rho: f64,
    /// Flow deflection `atan2(u₂, u₁)`.
    pub theta: f64,
    /// Largest of the relative mass-flux, tangential and Bernoulli defects.
    pub residual: f64,
}

impl PolarSample {
    pub fn speed(&self) -> f64 {
        self.u1.hypot(self.u2)
    }
}

/// Downstream state for inclination `sigma` (`|σ| ∈ [μ∞, π/2]`).
pub fn polar_point(state: &UpstreamState, sigma: f64) -> Result<PolarSample> {
    let s = sigma.signum();
    let a = sigma.abs();
    let mu = state.mach_angle()?;
    if !(a >= mu - 1e-15 && a <= FRAC_PI_2 + 1e-15) {
        return Err(Error::InvalidInput(format!("shock angle {sigma} outside [{mu}, pi/2]")));
    }
    let (sn, cs) = a.sin_cos();
    let t = state.q_inf * cs;
    let qn = state.q_inf * sn;
    let m = state.rho_inf * qn;
    let un = normal_root(state, t, m).map_err(|e| Error::RootFinding(format!("sigma = {sigma}: {e}")))?;
    let u1 = t * cs + un * sn;
    let u2 = s * cs * (qn - un);
    let rho = bernoulli_density(state, un.hypot(t))?;
    let sample = PolarSample { sigma, u1, u2, rho, theta: u2.atan2(u1), residual: 0.0 };
    Ok(PolarSample { residual: rh_residual(state, &sample), ..sample })
}

/// Relative defects of the jump conditions at a polar sample.
pub fn rh_residual(state: &UpstreamState, s: &PolarSample) -> f64 {
    let a = s.sigma.abs();
    let (sn, cs) = a.sin_cos();
    let (u1, u2) = (s.u1, s.u2 * s.sigma.signum());
    // Decompose along the shock tangent (cos σ, sin σ) and normal (sin σ, -cos σ).
    let t_down = u1 * cs + u2 * sn;
    let n_down = u1 * sn - u2 * cs;
    let q = state.q_inf;
    let tangential = (t_down - q * cs).abs() / q;
    let flux = (s.rho * n_down - state.rho_inf * q * sn).abs() / (state.rho_inf * q);
    let g = state.gamma;
    let speed2 = u1 * u1 + u2 * u2;
    let bern = (0.5 * speed2 + (s.rho.powf(g - 1.0) - 1.0) / (g - 1.0) - state.b0()).abs() / state.b0().abs().max(1.0);
    tangential.max(flux).max(bern)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockPolarCurve {
    pub state: UpstreamState,
    /// Upper branch, from the vanishing shock (`σ = μ∞`) to the normal shock.
    pub samples: Vec<PolarSample>,
    pub theta_d: f64,
    /// Shock inclination at detachment.
    pub sigma_d: f64,
    /// Largest sampled deflection (before refinement).
    pub theta_d_sampled: f64,
    pub theta_sonic: f64,
    pub sigma_sonic: f64,
    pub normal_state: (f64, f64),
}

/// Samples the polar at `n_samples` inclinations in `[μ∞, π/2]` and locates
/// the detachment and sonic angles.
pub fn compute_polar(state: &UpstreamState, n_samples: usize) -> Result<ShockPolarCurve> {
    if n_samples < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 polar samples, got {n_samples}")));
    }
    let mu = state.mach_angle()?;
    let mut samples = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let sigma = if k + 1 == n_samples {
            FRAC_PI_2
        } else {
            mu + (FRAC_PI_2 - mu) * k as f64 / (n_samples - 1) as f64
        };
        let p = polar_point(state, sigma)?;
        if k == 0 || p.rho > state.rho_inf {
            samples.push(p);
        }
    }
    // The vanishing shock itself is the exact upstream state.
    samples[0] = PolarSample { sigma: mu, u1: state.q_inf, u2: 0.0, rho: state.rho_inf, theta: 0.0, residual: 0.0 };
    samples[0].residual = rh_residual(state, &samples[0]);

    let (k_max, theta_d_sampled) = samples
        .iter()
        .enumerate()
        .map(|(k, s)| (k, s.theta))
        .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
    let lo = samples[k_max.saturating_sub(1)].sigma;
    let hi = samples[(k_max + 1).min(samples.len() - 1)].sigma;
    let theta_of = |sg: f64| polar_point(state, sg).map_or(f64::NEG_INFINITY, |p| p.theta);
    let (sigma_d, theta_d) = roots::golden_max(theta_of, lo, hi, 1e-12);
    let (sigma_d, theta_d) =
        if theta_d >= theta_d_sampled { (sigma_d, theta_d) } else { (samples[k_max].sigma, theta_d_sampled) };

    let qc = state.critical_speed();
    let excess = |sg: f64| polar_point(state, sg).map_or(f64::NAN, |p| p.speed() - qc);
    let sigma_sonic = roots::brent(excess, mu, FRAC_PI_2, 1e-14)?;
    let theta_sonic = polar_point(state, sigma_sonic)?.theta;

    let normal_state = normal_shock(state)?;
    Ok(ShockPolarCurve { state: *state, samples, theta_d, sigma_d, theta_d_sampled, theta_sonic, sigma_sonic, normal_state })
}

impl ShockPolarCurve {
    /// Closed curve: the upper branch from the vanishing to the normal shock,
    /// then the mirrored lower branch back (endpoints not repeated).
    pub fn full_curve(&self) -> Vec<PolarSample> {
        let n = self.samples.len();
        let mut curve = self.samples.clone();
        curve.extend(
            self.samples[1..n - 1]
                .iter()
                .rev()
                .map(|s| PolarSample { sigma: -s.sigma, u2: -s.u2, theta: -s.theta, ..*s }),
        );
        curve
    }

    /// Downstream velocity on the weak branch for deflection `theta_w`.
    pub fn weak_state(&self, theta_w: f64) -> Result<[f64; 2]> {
        self.branch_state(theta_w, true)
    }

    /// Downstream velocity on the strong branch for deflection `theta_w`.
    pub fn strong_state(&self, theta_w: f64) -> Result<[f64; 2]> {
        self.branch_state(theta_w, false)
    }

    fn branch_state(&self, theta_w: f64, weak: bool) -> Result<[f64; 2]> {
        if !(theta_w >= 0.0) {
            return Err(Error::InvalidInput(format!("wedge angle must be nonnegative, got {theta_w}")));
        }
        if theta_w > self.theta_d {
            return Err(Error::Detached { theta_w, theta_d: self.theta_d });
        }
        let tangency = polar_point(&self.state, self.sigma_d)?;
        if theta_w == self.theta_d {
            return Ok([tangency.u1, tangency.u2]);
        }
        if theta_w == 0.0 {
            return Ok(if weak { [self.state.q_inf, 0.0] } else { [self.normal_state.0, 0.0] });
        }
        let mu = self.state.mach_angle()?;
        let (lo, hi) = if weak { (mu, self.sigma_d) } else { (self.sigma_d, FRAC_PI_2) };
        let f = |sg: f64| polar_point(&self.state, sg).map_or(f64::NAN, |p| p.theta - theta_w);
        // Right at the tangency the bracket can close up to round-off.
        if f(lo) * f(hi) > 0.0 {
            return Ok([tangency.u1, tangency.u2]);
        }
        let sigma = roots::brent(f, lo, hi, 1e-15)?;
        let p = polar_point(&self.state, sigma)?;
        Ok([p.u1, p.u2])
    }

    pub fn max_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.residual).fold(0.0, f64::max)
    }

    /// CSV with columns `sigma,u1,u2,rho,theta` over both branches.
    pub fn to_csv(&self) -> String {
        let rows: Vec<[f64; 5]> = self.full_curve().iter().map(|s| [s.sigma, s.u1, s.u2, s.rho, s.theta]).collect();
        csv::write_rows(&["sigma", "u1", "u2", "rho", "theta"], rows.iter().map(|r| r.as_slice()))
    }

    /// Polar in the `(u₁, u₂)` plane with the detachment and sonic rays.
    pub fn to_svg(&self) -> String {
        let pts: Vec<(f64, f64)> = self.full_curve().iter().map(|s| (s.u1, s.u2)).collect();
        let ray = |theta: f64| {
            let r = self.state.q_inf;
            vec![(0.0, 0.0), (r * theta.cos(), r * theta.sin())]
        };
        let series = [
            svg::Series::new("shock polar", pts, "#1f77b4"),
            svg::Series::new(format!("theta_d = {:.6}", self.theta_d), ray(self.theta_d), "#d62728"),
            svg::Series::new(format!("theta_sonic = {:.6}", self.theta_sonic), ray(self.theta_sonic), "#2ca02c"),
        ];
        svg::line_plot("shock polar", "u1", "u2", &series)
    }
}

/// Uniform state `φ = -½|ξ|² + u₀·ξ + k` with density `ρ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarState {
    pub gamma: f64,
    pub u0: [f64; 2],
    pub rho0: f64,
    pub k: f64,
}

impl SelfSimilarState {
    pub fn new(gamma: f64, u0: [f64; 2], rho0: f64, k: f64) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma must satisfy gamma > 1, got {gamma}")));
        }
        if !(rho0 > 0.0 && rho0.is_finite()) || !u0.iter().chain([&k]).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("self-similar state needs rho0 > 0 and finite u0, k".into()));
        }
        Ok(Self { gamma, u0, rho0, k })
    }

    /// Radius `ρ₀^{(γ-1)/2}` of the pseudo-sonic circle centred at `u₀`.
    pub fn sonic_radius(&self) -> f64 {
        self.rho0.powf(0.5 * (self.gamma - 1.0))
    }

    pub fn phi(&self, xi: [f64; 2]) -> f64 {
        -0.5 * (xi[0] * xi[0] + xi[1] * xi[1]) + self.u0[0] * xi[0] + self.u0[1] * xi[1] + self.k
    }

    pub fn grad_phi(&self, xi: [f64; 2]) -> [f64; 2] {
        [self.u0[0] - xi[0], self.u0[1] - xi[1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Configuration {
    /// Regular shock reflection off a wedge: `(x, y) = (c₀ - r, θ - θ_w)`.
    Reflection,
    /// Supersonic flow past a wedge: `(x, y) = (c₀ - r, π + θ_w - θ)`.
    WedgeFlow,
}

/// Local coordinates near the pseudo-sonic arc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SonicGeometry {
    pub state: SelfSimilarState,
    pub theta_w: f64,
    pub configuration: Configuration,
}

/// Geometry of the pseudo-sonic circle of `state` for the given configuration.
pub fn pseudo_sonic_geometry(state: SelfSimilarState, theta_w: f64, configuration: Configuration) -> SonicGeometry {
    SonicGeometry { state, theta_w, configuration }
}

impl SonicGeometry {
    pub fn center(&self) -> [f64; 2] {
        self.state.u0
    }

    pub fn radius(&self) -> f64 {
        self.state.sonic_radius()
    }

    /// `ξ ↦ (x, y)`. The polar angle is taken in `(θ_w - π, θ_w + π]`.
    pub fn to_local(&self, xi: [f64; 2]) -> [f64; 2] {
        let dx = xi[0] - self.state.u0[0];
        let dy = xi[1] - self.state.u0[1];
        let r = dx.hypot(dy);
        let mut rel = dy.atan2(dx) - self.theta_w;
        if rel <= -PI {
            rel += 2.0 * PI;
        } else if rel > PI {
            rel -= 2.0 * PI;
        }
        let x = self.radius() - r;
        match self.configuration {
            Configuration::Reflection => [x, rel],
            Configuration::WedgeFlow => [x, PI - rel],
        }
    }

    /// `(x, y) ↦ ξ`.
    pub fn to_xi(&self, xy: [f64; 2]) -> [f64; 2] {
        let r = self.radius() - xy[0];
        let theta = match self.configuration {
            Configuration::Reflection => xy[1] + self.theta_w,
            Configuration::WedgeFlow => PI + self.theta_w - xy[1],
        };
        [self.state.u0[0] + r * theta.cos(), self.state.u0[1] + r * theta.sin()]
    }

    /// Points of the arc `x = 0`, `y ∈ [0, span]`.
    pub fn arc(&self, span: f64, n: usize) -> Vec<[f64; 2]> {
        let n = n.max(2);
        (0..n).map(|k| self.to_xi([0.0, span * k as f64 / (n - 1) as f64])).collect()
    }

    /// CSV `xi1,xi2,x,y` of the arc.
    pub fn arc_csv(&self, span: f64, n: usize) -> String {
        let rows: Vec<[f64; 4]> = self
            .arc(span, n)
            .into_iter()
            .map(|p| {
                let l = self.to_local(p);
                [p[0], p[1], l[0], l[1]]
            })
            .collect();
        csv::write_rows(&["xi1", "xi2", "x", "y"], rows.iter().map(|r| r.as_slice()))
    }

    /// Sketch: wedge boundary, full sonic circle, the arc and the centre.
    pub fn to_svg(&self, span: f64) -> String {
        let c = self.center();
        let rad = self.radius();
        let circle: Vec<(f64, f64)> = (0..=256)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 256.0;
                (c[0] + rad * t.cos(), c[1] + rad * t.sin())
            })
            .collect();
        let arc: Vec<(f64, f64)> = self.arc(span, 128).into_iter().map(|p| (p[0], p[1])).collect();
        let reach = c[0].hypot(c[1]) + 1.5 * rad;
        let (s, co) = self.theta_w.sin_cos();
        let wedge = vec![(reach * co, -reach * s), (0.0, 0.0), (reach * co, reach * s)];
        let series = [
            svg::Series::new("wedge", wedge, "#444444"),
            svg::Series::new("sonic circle", circle, "#1f77b4"),
            svg::Series::new("pseudo-sonic arc", arc, "#d62728"),
            svg::Series::new("u0", vec![(c[0], c[1])], "#2ca02c"),
        ];
        svg::line_plot("pseudo-sonic geometry", "xi1", "xi2", &series)
    }
}

#[cfg(test)]
mod tests;
