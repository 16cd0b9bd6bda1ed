use super::{Profile1D, Sample};
use crate::error::{Error, Result};
use crate::io::csv;
use crate::phase_plane::{self, GasParams};

pub const PROFILE_CSV_HEADER: [&str; 7] = ["x1", "u", "E", "rho", "p", "Phi", "phi_bar"];

/// One step of the cubic Hermite rule: exact for cubics, uses end slopes.
fn hermite_step(h: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    0.5 * h * (y0 + y1) + h * h * (d0 - d1) / 12.0
}

/// Fills `rho`, `p`, `Phi`, `phi_bar` from `(x1, u, E)`.
///
/// `Phi` starts from the Bernoulli value at the inlet and accumulates `∫E`;
/// `phi_bar` accumulates `∫u`. Both use the Hermite rule with the exact
/// derivatives `E' = J/u - ρ_i` and the stored `u'`.
pub fn reconstruct_fields(params: &GasParams, profile: &mut Profile1D) {
    let g = params.gamma();
    let s0 = params.s0();
    let j = params.j();
    let de = |u: f64| j / u - params.rho_ion();
    let Some(first) = profile.samples.first() else { return };
    let u0 = first.u;
    let mut phi = 0.5 * u0 * u0 + g * s0 / (g - 1.0) * (j / u0).powf(g - 1.0);
    let mut phi_bar = 0.0;
    let mut prev: Option<Sample> = None;
    for s in profile.samples.iter_mut() {
        if let Some(a) = prev {
            let h = s.x1 - a.x1;
            phi += hermite_step(h, a.e, s.e, de(a.u), de(s.u));
            phi_bar += hermite_step(h, a.u, s.u, a.du_dx, s.du_dx);
        }
        s.rho = j / s.u;
        s.p = s0 * s.rho.powf(g);
        s.phi = phi;
        s.phi_bar = phi_bar;
        prev = Some(*s);
    }
}

/// `½u² + γS₀ρ^{γ-1}/(γ-1) - Φ` at a sample.
pub fn bernoulli_defect(params: &GasParams, s: &Sample) -> f64 {
    let g = params.gamma();
    0.5 * s.u * s.u + g * params.s0() / (g - 1.0) * s.rho.powf(g - 1.0) - s.phi
}

/// Residual of the second-order equation satisfied by `φ̄`,
/// `((∂₁φ̄)^{γ+1} - u_s^{γ+1}) ∂₁₁φ̄ - E_c(∂₁φ̄) (∂₁φ̄)^γ`,
/// with `E_c` the critical field on the profile's branch.
///
/// The first part is evaluated at every sample with `∂₁φ̄ = u` and
/// `∂₁₁φ̄ = u'`, scaled by `max(1, |E_c| u^γ)`. The second part checks that
/// the stored `φ̄` increments match `∫u` over each step, divided by the step
/// length. The larger of the two is returned.
pub fn potential_ode_residual(params: &GasParams, profile: &Profile1D) -> f64 {
    let g = params.gamma();
    let mut worst: f64 = 0.0;
    for s in &profile.samples {
        let e_c = match profile.kind.branch() {
            Some(b) => phase_plane::critical_e(params, s.u, b).unwrap_or(f64::NAN),
            None => s.e,
        };
        let ug = s.u.powf(g);
        let r = params.sonic_gap(s.u) * s.du_dx - e_c * ug;
        worst = worst.max(r.abs() / (e_c.abs() * ug).max(1.0));
    }
    for w in profile.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let h = b.x1 - a.x1;
        let expect = hermite_step(h, a.u, b.u, a.du_dx, b.du_dx);
        worst = worst.max(((b.phi_bar - a.phi_bar) - expect).abs() / h);
    }
    worst
}

/// Serializes the samples with header `x1,u,E,rho,p,Phi,phi_bar`.
pub fn write_profile_csv(profile: &Profile1D) -> String {
    let rows: Vec<[f64; 7]> =
        profile.samples.iter().map(|s| [s.x1, s.u, s.e, s.rho, s.p, s.phi, s.phi_bar]).collect();
    csv::write_rows(&PROFILE_CSV_HEADER, rows.iter().map(|r| r.as_slice()))
}

/// Parses profile CSV into `[x1, u, E, rho, p, Phi, phi_bar]` rows.
///
/// Positions must be strictly increasing and velocities and densities positive.
pub fn parse_profile_csv(text: &str) -> Result<Vec<[f64; 7]>> {
    let rows = csv::parse_rows(text, &PROFILE_CSV_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (k, r) in rows.into_iter().enumerate() {
        let row: [f64; 7] = r.try_into().expect("row width checked by parser");
        if row[1] <= 0.0 || row[3] <= 0.0 {
            return Err(Error::Parse { line: k + 2, reason: "u and rho must be positive".into() });
        }
        if let Some(prev) = out.last() {
            let prev: &[f64; 7] = prev;
            if row[0] <= prev[0] {
                return Err(Error::Parse { line: k + 2, reason: "x1 must be strictly increasing".into() });
            }
        }
        out.push(row);
    }
    Ok(out)
}
