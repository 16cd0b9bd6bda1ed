//! Phase-plane algebra of the steady one-dimensional Euler-Poisson system.
//!
//! Along a smooth solution of
//!
//! ```text
//! u' = E u^γ / (u^{γ+1} - u_s^{γ+1}),    E' = J/u - ρ_i
//! ```
//!
//! the quantity `½E² - H(u)` is conserved, where
//!
//! ```text
//! H(u) = (J/ū) ∫_{u_s}^{u} t^{-(γ+1)} (t^{γ+1} - u_s^{γ+1}) (ū - t) dt,   ū = J/ρ_i.
//! ```
//!
//! The zero level set of that first integral (the critical trajectory) is
//! the only family of orbits that passes through the sonic speed `u_s`
//! smoothly. It splits into an accelerating branch, `(u - u_s) E >= 0`, and
//! a decelerating branch, `(u - u_s) E <= 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::roots;

/// Relative half-width of the band around `u_s` classified as sonic.
pub const SONIC_BAND: f64 = 1e-9;

/// Below this relative distance from `u_s` the enthalpy is evaluated by its
/// Taylor series instead of the closed-form antiderivative.
const SERIES_RADIUS: f64 = 0.1;

/// Gas and background constants of the polytropic Euler-Poisson model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasParams {
    gamma: f64,
    s0: f64,
    j: f64,
    rho_ion: f64,
    u_sonic: f64,
    u_bar: f64,
}

impl GasParams {
    /// Validates the constants and derives `u_s`, `ū` and `ζ₀`.
    pub fn new(gamma: f64, s0: f64, j: f64, rho_ion: f64) -> Result<Self> {
        let check = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::InvalidInput(format!(
                "adiabatic exponent gamma must satisfy gamma > 1, got {gamma}"
            )));
        }
        check("S0", s0)?;
        check("J", j)?;
        check("rho_ion", rho_ion)?;
        let u_sonic = (gamma * s0 * j.powf(gamma - 1.0)).powf(1.0 / (gamma + 1.0));
        let u_bar = j / rho_ion;
        if !(u_sonic.is_finite() && u_sonic > 0.0) {
            return Err(Error::InvalidInput(format!("sonic speed is not representable ({u_sonic})")));
        }
        Ok(Self { gamma, s0, j, rho_ion, u_sonic, u_bar })
    }

    /// γ=3, S₀=1/3, J=1, ρ_i=1/2: u_s = 1, ū = 2.
    pub fn canonical() -> Self {
        Self::new(3.0, 1.0 / 3.0, 1.0, 0.5).expect("canonical parameters are valid")
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn s0(&self) -> f64 {
        self.s0
    }
    pub fn j(&self) -> f64 {
        self.j
    }
    pub fn rho_ion(&self) -> f64 {
        self.rho_ion
    }
    pub fn u_sonic(&self) -> f64 {
        self.u_sonic
    }
    pub fn u_bar(&self) -> f64 {
        self.u_bar
    }
    pub fn zeta0(&self) -> f64 {
        self.u_bar / self.u_sonic
    }

    /// `u^{γ+1} - u_s^{γ+1}`, computed without cancellation near `u_s`.
    pub fn sonic_gap(&self, u: f64) -> f64 {
        let z = (u - self.u_sonic) / self.u_sonic;
        self.u_sonic.powf(self.gamma + 1.0) * ((self.gamma + 1.0) * z.ln_1p()).exp_m1()
    }

    /// Right-hand side of the first-order system for `(u, E)`.
    pub fn rhs(&self, u: f64, e: f64) -> [f64; 2] {
        [e * u.powf(self.gamma) / self.sonic_gap(u), self.j / u - self.rho_ion]
    }
}

/// Accelerating or decelerating half of the critical trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Accelerating,
    Decelerating,
}

/// A point of the `(u, E)` phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub u: f64,
    pub e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchClass {
    Accelerating,
    Decelerating,
    /// On the critical set with `(u - u_s) E = 0`: belongs to both branches.
    Junction,
    OffCritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subsonic,
    Sonic,
    Supersonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryClass {
    pub on_critical: bool,
    pub branch: BranchClass,
    pub regime: Regime,
}

fn check_velocity(u: f64) -> Result<()> {
    if u.is_finite() && u > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("velocity must be > 0, got {u}")))
    }
}

/// Closed-form antiderivative of the integrand of `H`, without the `J/ū` factor.
fn antiderivative(p: &GasParams, t: f64) -> f64 {
    let g = p.gamma;
    let us1 = p.u_sonic.powf(g + 1.0);
    p.u_bar * t - 0.5 * t * t + us1 * p.u_bar / g * t.powf(-g) - us1 / (g - 1.0) * t.powf(1.0 - g)
}

/// Taylor series of `H` in `z = u/u_s - 1`.
fn enthalpy_series(p: &GasParams, z: f64) -> f64 {
    let g = p.gamma;
    let us = p.u_sonic;
    let d = p.u_bar - us;
    // (1+s)^{-(γ+1)} = Σ c_k s^k ;  A(s) = 1 - (1+s)^{-(γ+1)} = Σ_{k≥1} a_k s^k.
    let mut c_prev = 1.0;
    let mut a_prev = 0.0;
    let mut zpow = z; // z^{k}
    let mut sum = 0.0;
    for k in 1..400 {
        let kf = k as f64;
        let c_k = -c_prev * (g + kf) / kf;
        let a_k = -c_k;
        let p_k = a_k * d - us * a_prev;
        zpow *= z;
        let term = p_k * zpow / (kf + 1.0);
        sum += term;
        if k > 3 && term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        c_prev = c_k;
        a_prev = a_k;
    }
    p.j / p.u_bar * us * sum
}

/// `H(u)`.
pub fn enthalpy_h(p: &GasParams, u: f64) -> Result<f64> {
    check_velocity(u)?;
    let z = (u - p.u_sonic) / p.u_sonic;
    if z.abs() < SERIES_RADIUS {
        Ok(enthalpy_series(p, z))
    } else {
        Ok(p.j / p.u_bar * (antiderivative(p, u) - antiderivative(p, p.u_sonic)))
    }
}

/// `H'(u) = (J/ū) (1 - (u_s/u)^{γ+1}) (ū - u)`.
pub fn enthalpy_h_prime(p: &GasParams, u: f64) -> f64 {
    p.j / p.u_bar * (p.sonic_gap(u) / u.powf(p.gamma + 1.0)) * (p.u_bar - u)
}

/// `H''(u_s) = (J/ū)(γ+1)(ū - u_s)/u_s`.
pub fn enthalpy_h_second_at_sonic(p: &GasParams) -> f64 {
    p.j / p.u_bar * (p.gamma + 1.0) * (p.u_bar - p.u_sonic) / p.u_sonic
}

/// Field value on the critical trajectory at speed `u`:
/// `E = ±√(2H(u))` with the sign fixed by the branch.
pub fn critical_e(p: &GasParams, u: f64, branch: Branch) -> Result<f64> {
    let h = enthalpy_h(p, u)?;
    let scale = 1e-13 * (1.0 + p.j * p.u_bar);
    if h < -scale {
        return Err(Error::Consistency(format!(
            "H({u}) = {h:e} < 0: speed lies beyond the critical trajectory"
        )));
    }
    let mag = (2.0 * h.max(0.0)).sqrt();
    let side = if u > p.u_sonic {
        1.0
    } else if u < p.u_sonic {
        -1.0
    } else {
        0.0
    };
    Ok(match branch {
        Branch::Accelerating => side * mag,
        Branch::Decelerating => -side * mag,
    })
}

/// `dx/du` along the critical branch, `(u^{γ+1} - u_s^{γ+1}) / (E(u) u^γ)`.
///
/// At `u = u_s` numerator and denominator vanish together; the removable
/// singularity is replaced by its limit (see [`sonic_dx_du`]).
pub fn critical_dx_du(p: &GasParams, u: f64, branch: Branch) -> Result<f64> {
    check_velocity(u)?;
    let z = (u - p.u_sonic) / p.u_sonic;
    if z.abs() <= 1e-12 {
        return Ok(sonic_dx_du(p, branch));
    }
    let e = critical_e(p, u, branch)?;
    Ok(p.sonic_gap(u) / (e * u.powf(p.gamma)))
}

/// Limit of `dx/du` at the sonic point, `±(γ+1)/√H''(u_s)`.
pub fn sonic_dx_du(p: &GasParams, branch: Branch) -> f64 {
    let mag = (p.gamma + 1.0) / enthalpy_h_second_at_sonic(p).sqrt();
    match branch {
        Branch::Accelerating => mag,
        Branch::Decelerating => -mag,
    }
}

/// `du/dx` along the critical branch (reciprocal of [`critical_dx_du`]).
pub fn critical_du_dx(p: &GasParams, u: f64, branch: Branch) -> Result<f64> {
    let dxdu = critical_dx_du(p, u, branch)?;
    if dxdu.is_infinite() {
        return Ok(0.0);
    }
    Ok(1.0 / dxdu)
}

fn u_star_bracket(p: &GasParams) -> Result<(f64, f64)> {
    if p.zeta0() <= 1.0 {
        return Err(Error::InvalidInput(format!(
            "zeta0 = {} must exceed 1 for the critical trajectory to close",
            p.zeta0()
        )));
    }
    let lo = p.u_bar;
    let mut hi = 10.0 * p.u_bar;
    for _ in 0..60 {
        if enthalpy_h(p, hi)? < 0.0 {
            return Ok((lo, hi));
        }
        hi *= 2.0;
    }
    Err(Error::Configuration("no sign change of H found above u_bar".into()))
}

/// The root `u* > ū` of `H`, where the accelerating branch returns to `E = 0` (Brent).
pub fn find_u_star(p: &GasParams) -> Result<f64> {
    let (lo, hi) = u_star_bracket(p)?;
    roots::brent(|u| enthalpy_h(p, u).unwrap_or(f64::NAN), lo, hi, 1e-15 * hi)
}

/// Same root by plain bisection; used as a cross-check of [`find_u_star`].
pub fn find_u_star_bisection(p: &GasParams) -> Result<f64> {
    let (lo, hi) = u_star_bracket(p)?;
    roots::bisect(|u| enthalpy_h(p, u).unwrap_or(f64::NAN), lo, hi, 1e-15 * hi)
}

/// Classifies a phase-plane point relative to the critical trajectory.
pub fn classify_state(p: &GasParams, s: PhaseState, tol: f64) -> Result<TrajectoryClass> {
    let h = enthalpy_h(p, s.u)?;
    let on_critical = (0.5 * s.e * s.e - h).abs() <= tol;
    let regime = if (s.u - p.u_sonic).abs() <= SONIC_BAND * p.u_sonic {
        Regime::Sonic
    } else if s.u < p.u_sonic {
        Regime::Subsonic
    } else {
        Regime::Supersonic
    };
    let branch = if !on_critical {
        BranchClass::OffCritical
    } else if regime == Regime::Sonic {
        BranchClass::Junction
    } else {
        let prod = (s.u - p.u_sonic) * s.e;
        if prod > 0.0 {
            BranchClass::Accelerating
        } else if prod < 0.0 {
            BranchClass::Decelerating
        } else {
            BranchClass::Junction
        }
    };
    Ok(TrajectoryClass { on_critical, branch, regime })
}
