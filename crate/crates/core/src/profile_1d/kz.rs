use serde::{Deserialize, Serialize};

use super::{Profile1D, ProfileKind};
use crate::error::Result;
use crate::numerics::ode::{self, OdeOptions};
use crate::numerics::{quadrature, roots};
use crate::phase_plane::{self, GasParams};

/// Values of `m` for which the sign condition is checked.
pub const KZ_ORDERS: [u32; 4] = [0, 1, 2, 3];

/// Outcome of the sign check of `Q_m = -2β₁ - (2m-1)∂₁α₁₁` along a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KzReport {
    /// Minimum of `Q_m` over the samples, for `m = 0..=3`.
    pub min_q: [f64; 4],
    /// Position of each minimum.
    pub argmin_x: [f64; 4],
    /// `min_m min_x Q_m`.
    pub lambda_l: f64,
    pub holds: bool,
    /// Largest relative gap between the closed representation and the direct
    /// finite-difference evaluation at interior samples.
    pub discrepancy: f64,
    /// Interior samples compared.
    pub compared: usize,
}

/// `(α₁₁, β₁)` at `x1`, with `u'` taken from the ODE (or its desingularized
/// form inside the sonic band).
pub fn kz_coefficients(params: &GasParams, profile: &Profile1D, x1: f64) -> Result<(f64, f64)> {
    let (u, e, du) = profile.state_at(x1)?;
    Ok(coefficients(params, u, e, du))
}

fn coefficients(p: &GasParams, u: f64, e: f64, du: f64) -> (f64, f64) {
    let g = p.gamma();
    let us1 = p.u_sonic().powf(g + 1.0);
    let alpha = -p.sonic_gap(u) / us1;
    let beta = (e - (g + 1.0) * du * u) * u.powf(g - 1.0) / us1;
    (alpha, beta)
}

/// `Q_m` from its closed form in `(u, u')`:
/// `(u'/u_s^{γ+1}) (2m(γ+1)u^γ + (γ-1)u^γ + 2u_s^{γ+1}/u)`.
pub fn kz_representation(p: &GasParams, m: u32, u: f64, du: f64) -> f64 {
    let g = p.gamma();
    let us1 = p.u_sonic().powf(g + 1.0);
    let ug = u.powf(g);
    du / us1 * (2.0 * m as f64 * (g + 1.0) * ug + (g - 1.0) * ug + 2.0 * us1 / u)
}

/// `Q_m` from `β₁` and a given `∂₁α₁₁`.
pub fn kz_direct(p: &GasParams, m: u32, u: f64, e: f64, du: f64, dalpha: f64) -> f64 {
    let (_, beta) = coefficients(p, u, e, du);
    -2.0 * beta - (2.0 * m as f64 - 1.0) * dalpha
}

/// Speed at `x + dx` reached from the sample state `(x, u, e)`, computed
/// without the stored profile: by the x-parametrized ODE outside the sonic
/// band, by inverting `x(u)` along the critical branch inside it.
fn local_u(p: &GasParams, profile: &Profile1D, u: f64, e: f64, du: f64, dx: f64) -> Option<f64> {
    let us = p.u_sonic();
    // Outside the band the samples carry their own (slightly off-critical)
    // state, which the x-ODE follows; inside it they lie on the branch.
    let near = ((u - us) / us).abs() <= profile.sonic_band * (1.0 + 1e-9);
    if let (true, Some(branch)) = (near, profile.kind.branch()) {
        let dxdu = |v: f64| phase_plane::critical_dx_du(p, v, branch).unwrap_or(f64::NAN);
        let target = |v: f64| quadrature::integrate(dxdu, u, v, 1e-17, 1e-14).unwrap_or(f64::NAN) - dx;
        let guess = dx * du;
        let lo = u + 2.0 * guess.min(-guess.abs());
        let hi = u + 2.0 * guess.max(guess.abs());
        return roots::brent(target, lo, hi, 1e-16 * us).ok();
    }
    let s = dx.signum();
    let opts = OdeOptions { rtol: 1e-13, atol: 1e-15, ..OdeOptions::default() };
    let rhs = |_: f64, y: &[f64; 2]| {
        let [a, b] = p.rhs(y[0], y[1]);
        [s * a, s * b]
    };
    let tr = ode::integrate(rhs, 0.0, [u, e], dx.abs(), &opts, &mut []).ok()?;
    tr.nodes.last().map(|n| n.y[0])
}

/// Evaluates `Q_m` on every sample by the closed representation and compares
/// it with a direct evaluation from `β₁` and a centered difference of
/// `α₁₁(u(x))` at interior samples.
pub fn kz_check(params: &GasParams, profile: &Profile1D) -> KzReport {
    let p = params;
    let mut min_q = [f64::INFINITY; 4];
    let mut argmin_x = [f64::NAN; 4];
    for s in &profile.samples {
        for (k, &m) in KZ_ORDERS.iter().enumerate() {
            let q = kz_representation(p, m, s.u, s.du_dx);
            if q < min_q[k] {
                min_q[k] = q;
                argmin_x[k] = s.x1;
            }
        }
    }
    let lambda_l = min_q.iter().copied().fold(f64::INFINITY, f64::min);

    let scale = profile
        .samples
        .iter()
        .map(|s| kz_representation(p, 3, s.u, s.du_dx).abs())
        .fold(0.0, f64::max);
    let us1 = p.u_sonic().powf(p.gamma() + 1.0);
    let mut discrepancy: f64 = 0.0;
    let mut compared = 0;
    let n = profile.samples.len();
    let delta = 1e-4;
    for s in profile.samples.iter().take(n.saturating_sub(1)).skip(1) {
        if profile.kind == ProfileKind::OffCritical {
            break;
        }
        let (Some(u_plus), Some(u_minus)) = (
            local_u(p, profile, s.u, s.e, s.du_dx, delta),
            local_u(p, profile, s.u, s.e, s.du_dx, -delta),
        ) else {
            continue;
        };
        let dalpha = -(p.sonic_gap(u_plus) - p.sonic_gap(u_minus)) / (2.0 * delta * us1);
        for &m in &KZ_ORDERS {
            let qr = kz_representation(p, m, s.u, s.du_dx);
            let qd = kz_direct(p, m, s.u, s.e, s.du_dx, dalpha);
            let rel = (qd - qr).abs() / (qr.abs() + 1e-9 * scale).max(f64::MIN_POSITIVE);
            discrepancy = discrepancy.max(rel);
        }
        compared += 1;
    }
    KzReport { min_q, argmin_x, lambda_l, holds: lambda_l > 0.0, discrepancy, compared }
}
