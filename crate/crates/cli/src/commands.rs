//! Validation and execution of each subcommand.
//!
//! [`plan`] turns a config into a typed job, rejecting anything that
//! violates a module invariant; [`execute`] runs it and writes artifacts.

use serde::{Deserialize, Serialize};
use serde_json::json;
use sonic_core::io::{csv, svg};
use sonic_core::keldysh_model::{self as km, KeldyshBoundary, KeldyshCoefficients, KeldyshDomain, KeldyshOptions};
use sonic_core::mixed_type_2d::{self as mt, BoundaryData2D, ChannelDomain, MixedOptions};
use sonic_core::phase_plane::{self, Branch, GasParams};
use sonic_core::profile_1d::{self as p1, InletData, IntegratorOptions, Profile1D, StopAt};
use sonic_core::shock_polar::{self as sp, Configuration, SelfSimilarState, UpstreamState};
use sonic_core::Error;

use crate::config::{
    GasSection, GeometrySection, KeldyshScenario, KeldyshSection, MixedCase, MixedSection, PhasePortraitSection,
    ProfileSection, RunConfig, ShockSection,
};
use crate::output::Artifacts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    PhasePortrait,
    Profile,
    KzCheck,
    KeldyshSolve,
    MixedSolve,
    ShockPolar,
    Geometry,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::PhasePortrait => "phase-portrait",
            Command::Profile => "profile",
            Command::KzCheck => "kz-check",
            Command::KeldyshSolve => "keldysh-solve",
            Command::MixedSolve => "mixed-solve",
            Command::ShockPolar => "shock-polar",
            Command::Geometry => "geometry",
            Command::Sweep => "sweep",
        }
    }
}

/// Failure of a run, mapped to the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad arguments, config or parameters: exit 1.
    Validation(String),
    /// A solver or I/O step failed: exit 2.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Failure(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Failure(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::Configuration(_) | Error::Domain(_) | Error::Detached { .. } => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(format!("writing artifacts: {e}"))
    }
}

type Res<T> = Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn need<'a, T>(section: &'a Option<T>, name: &str, cmd: Command) -> Res<&'a T> {
    section.as_ref().ok_or_else(|| invalid(format!("{} needs a [{name}] section", cmd.name())))
}

fn gas(cfg: &RunConfig) -> Res<GasParams> {
    let g: GasSection = cfg.gas.unwrap_or_default();
    Ok(GasParams::new(g.gamma, g.s0, g.j, g.rho_ion)?)
}

#[derive(Debug, Clone)]
pub struct ProfileJob {
    params: GasParams,
    inlet: InletData,
    opts: IntegratorOptions,
    stop: StopAt,
}

fn profile_job(cfg: &RunConfig, cmd: Command) -> Res<ProfileJob> {
    let params = gas(cfg)?;
    let s: &ProfileSection = need(&cfg.profile, "profile", cmd)?;
    if !(s.u0.is_finite() && s.u0 > 0.0) {
        return Err(invalid(format!("profile.u0 must be > 0, got {}", s.u0)));
    }
    if !s.e0_offset.is_finite() {
        return Err(invalid("profile.e0_offset must be finite"));
    }
    let mut inlet = InletData::on_branch(&params, s.u0, s.branch)?;
    inlet.e0 += s.e0_offset;
    let mut opts = IntegratorOptions::default();
    if let Some(v) = s.rtol {
        opts.rtol = v;
    }
    if let Some(v) = s.atol {
        opts.atol = v;
    }
    if let Some(v) = s.max_step {
        opts.max_step = v;
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0 && opts.max_step > 0.0) {
        return Err(invalid("profile tolerances and max_step must be > 0"));
    }
    let stop = match s.x_max {
        Some(x) if x.is_finite() && x > 0.0 => StopAt::XMax(x),
        Some(x) => return Err(invalid(format!("profile.x_max must be > 0, got {x}"))),
        None => StopAt::Terminal,
    };
    Ok(ProfileJob { params, inlet, opts, stop })
}

/// A validated run.
#[derive(Debug, Clone)]
pub enum Job {
    PhasePortrait { params: GasParams, section: PhasePortraitSection },
    Profile(ProfileJob),
    KzCheck(ProfileJob),
    Keldysh(KeldyshJob),
    Mixed(MixedJob),
    ShockPolar { state: UpstreamState, section: ShockSection },
    Geometry { state: UpstreamState, shock: ShockSection, geometry: GeometrySection },
}

#[derive(Debug, Clone)]
pub struct KeldyshJob {
    section: KeldyshSection,
    domain: KeldyshDomain,
    coeffs: KeldyshCoefficients,
    bc: KeldyshBoundary,
    opts: KeldyshOptions,
}

#[derive(Debug, Clone)]
pub struct MixedJob {
    profile: ProfileJob,
    section: MixedSection,
    domain: ChannelDomain,
    bc: Option<BoundaryData2D>,
}

fn shock_state(cfg: &RunConfig, cmd: Command) -> Res<(UpstreamState, ShockSection)> {
    let s = *need(&cfg.shock, "shock", cmd)?;
    let state = UpstreamState::new(s.gamma, s.rho_inf, s.q_inf)?;
    if !state.is_supersonic() {
        return Err(invalid(format!(
            "shock.q_inf = {} must exceed the upstream sound speed {}",
            s.q_inf,
            state.sound_speed()
        )));
    }
    if s.samples < 3 {
        return Err(invalid("shock.samples must be >= 3"));
    }
    if let Some(t) = s.theta_w {
        if !(t.is_finite() && t >= 0.0) {
            return Err(invalid(format!("shock.theta_w must be >= 0, got {t}")));
        }
    }
    Ok((state, s))
}

/// Validates `cfg` for `cmd`.
pub fn plan(cmd: Command, cfg: &RunConfig) -> Res<Job> {
    match cmd {
        Command::PhasePortrait => {
            let params = gas(cfg)?;
            let section = cfg.phase_portrait.unwrap_or_default();
            if !(section.u_min > 0.0 && section.u_min < params.u_sonic()) || section.samples < 2 {
                return Err(invalid(format!(
                    "phase_portrait needs 0 < u_min < u_s = {} and samples >= 2",
                    params.u_sonic()
                )));
            }
            Ok(Job::PhasePortrait { params, section })
        }
        Command::Profile => Ok(Job::Profile(profile_job(cfg, cmd)?)),
        Command::KzCheck => Ok(Job::KzCheck(profile_job(cfg, cmd)?)),
        Command::KeldyshSolve => {
            let section = need(&cfg.keldysh, "keldysh", cmd)?.clone();
            let (domain, coeffs, bc) = match section.scenario {
                KeldyshScenario::Manufactured => (
                    KeldyshDomain::affine(section.eps0)?,
                    KeldyshCoefficients::unperturbed(section.a, 1.0),
                    KeldyshBoundary::manufactured(section.eps0, section.a),
                ),
                KeldyshScenario::WeakDiscontinuity => km::weak_discontinuity_scenario(section.eps0)?,
            };
            coeffs.validate(&domain)?;
            let opts = KeldyshOptions {
                nx: section.nx,
                ny: section.ny,
                grading: section.grading,
                tolerance: section.tolerance,
                max_iterations: section.max_iterations,
                ..KeldyshOptions::default()
            };
            if section.nx < 8 || section.ny < 2 || !(section.grading >= 1.0) || !(section.tolerance > 0.0) {
                return Err(invalid("keldysh needs nx >= 8, ny >= 2, grading >= 1 and tolerance > 0"));
            }
            let f0 = domain.f(0.0).0;
            if let Some(y) = section.scan_y.iter().find(|y| !(0.0..f0).contains(*y)) {
                return Err(invalid(format!("keldysh.scan_y value {y} outside [0, {f0})")));
            }
            if !(section.corner_c > 0.0) {
                return Err(invalid("keldysh.corner_c must be > 0"));
            }
            Ok(Job::Keldysh(KeldyshJob { section, domain, coeffs, bc, opts }))
        }
        Command::MixedSolve => {
            let mut profile = profile_job(cfg, cmd)?;
            let section = need(&cfg.mixed, "mixed", cmd)?.clone();
            let domain = ChannelDomain::new(section.length, section.nx, section.ny)?;
            if !(section.residual_tol > 0.0) || !section.source.is_finite() {
                return Err(invalid("mixed.residual_tol must be > 0 and mixed.source finite"));
            }
            let bc = match section.case {
                MixedCase::Manufactured => {
                    if section.bc.is_some() {
                        return Err(invalid("mixed.bc is fixed by the manufactured case"));
                    }
                    None
                }
                MixedCase::Source => Some(section.bc.clone().unwrap_or_else(BoundaryData2D::homogeneous)),
            };
            profile.stop = StopAt::XMax(section.length);
            Ok(Job::Mixed(MixedJob { profile, section, domain, bc }))
        }
        Command::ShockPolar => {
            let (state, section) = shock_state(cfg, cmd)?;
            Ok(Job::ShockPolar { state, section })
        }
        Command::Geometry => {
            let (state, shock) = shock_state(cfg, cmd)?;
            let geometry = *need(&cfg.geometry, "geometry", cmd)?;
            if !(geometry.theta_w.is_finite() && geometry.theta_w >= 0.0) || !(geometry.arc_span > 0.0) {
                return Err(invalid("geometry needs theta_w >= 0 and arc_span > 0"));
            }
            if geometry.u0.is_some() != geometry.rho0.is_some() {
                return Err(invalid("geometry.u0 and geometry.rho0 must be given together"));
            }
            if let (Some(u0), Some(rho0)) = (geometry.u0, geometry.rho0) {
                SelfSimilarState::new(state.gamma(), u0, rho0, geometry.k)?;
            }
            Ok(Job::Geometry { state, shock, geometry })
        }
        Command::Sweep => Err(invalid("sweep is planned by the sweep driver")),
    }
}

/// Runs a validated job. Returns a short human-readable summary.
pub fn execute(job: &Job, art: &mut Artifacts) -> Res<String> {
    match job {
        Job::PhasePortrait { params, section } => phase_portrait(params, section, art),
        Job::Profile(j) => profile(j, art),
        Job::KzCheck(j) => kz(j, art),
        Job::Keldysh(j) => keldysh(j, art),
        Job::Mixed(j) => mixed(j, art),
        Job::ShockPolar { state, section } => shock_polar(state, section, art),
        Job::Geometry { state, shock, geometry } => geometry_run(state, shock, geometry, art),
    }
}

fn phase_portrait(p: &GasParams, s: &PhasePortraitSection, art: &mut Artifacts) -> Res<String> {
    let u_star = phase_plane::find_u_star(p)?;
    let n = s.samples;
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let u = if k + 1 == n { u_star } else { s.u_min + (u_star - s.u_min) * k as f64 / (n - 1) as f64 };
        let ea = phase_plane::critical_e(p, u, Branch::Accelerating)?;
        let ed = phase_plane::critical_e(p, u, Branch::Decelerating)?;
        rows.push([u, ea, ed]);
    }
    art.text(
        "portrait.csv",
        &csv::write_rows(&["u", "e_accelerating", "e_decelerating"], rows.iter().map(|r| r.as_slice())),
    )?;
    let series = [
        svg::Series::new("accelerating", rows.iter().map(|r| (r[0], r[1])).collect(), "#1f77b4"),
        svg::Series::new("decelerating", rows.iter().map(|r| (r[0], r[2])).collect(), "#d62728"),
    ];
    art.svg("portrait.svg", &svg::line_plot("critical trajectories", "u", "E", &series))?;
    art.json(
        "summary.json",
        &json!({
            "u_sonic": p.u_sonic(),
            "u_bar": p.u_bar(),
            "u_star": u_star,
            "zeta0": p.zeta0(),
            "samples": n,
        }),
    )?;
    Ok(format!("u_s = {}, u* = {u_star}", p.u_sonic()))
}

fn integrate(j: &ProfileJob) -> Res<(Profile1D, Option<String>)> {
    match p1::integrate_profile(&j.params, j.inlet, j.stop, &j.opts) {
        Ok(prof) => Ok((prof, None)),
        Err(e @ Error::SonicBlowUp { .. }) => {
            let prof = p1::integrate_truncated(&j.params, j.inlet, j.stop, &j.opts)?;
            Ok((prof, Some(e.to_string())))
        }
        Err(e) => Err(e.into()),
    }
}

fn profile_svg(prof: &Profile1D) -> String {
    let series = [
        svg::Series::new("u", prof.samples.iter().map(|s| (s.x1, s.u)).collect(), "#1f77b4"),
        svg::Series::new("E", prof.samples.iter().map(|s| (s.x1, s.e)).collect(), "#d62728"),
    ];
    svg::line_plot("transonic profile", "x1", "value", &series)
}

fn profile(j: &ProfileJob, art: &mut Artifacts) -> Res<String> {
    let report = p1::verify_lemma(&j.params, j.inlet, &j.opts)?;
    let (prof, truncated) = integrate(j)?;
    art.text("profile.csv", &p1::write_profile_csv(&prof))?;
    art.svg("profile.svg", &profile_svg(&prof))?;
    art.json(
        "lemma.json",
        &json!({
            "all_passed": report.all_passed(),
            "report": report,
            "first_integral_defect": prof.first_integral_defect(),
            "truncated": truncated,
        }),
    )?;
    Ok(format!("{:?} profile, lemma claims passed: {}", report.kind, report.all_passed()))
}

fn kz(j: &ProfileJob, art: &mut Artifacts) -> Res<String> {
    let (prof, truncated) = integrate(j)?;
    let report = p1::kz_check(&j.params, &prof);
    let mut rows = Vec::with_capacity(prof.samples.len());
    for s in &prof.samples {
        let (a, b) = p1::kz_coefficients(&j.params, &prof, s.x1)?;
        rows.push([s.x1, a, b]);
    }
    art.text("coefficients.csv", &csv::write_rows(&["x1", "alpha11", "beta1"], rows.iter().map(|r| r.as_slice())))?;
    let series = [
        svg::Series::new("alpha11", rows.iter().map(|r| (r[0], r[1])).collect(), "#1f77b4"),
        svg::Series::new("beta1", rows.iter().map(|r| (r[0], r[2])).collect(), "#d62728"),
    ];
    art.svg("coefficients.svg", &svg::line_plot("normalized coefficients", "x1", "value", &series))?;
    art.json("kz.json", &json!({ "kind": prof.kind, "report": report, "truncated": truncated }))?;
    Ok(format!("sign condition holds: {} (lambda_L = {})", report.holds, report.lambda_l))
}

fn keldysh(j: &KeldyshJob, art: &mut Artifacts) -> Res<String> {
    let sol = km::solve_model(&j.domain, &j.coeffs, &j.bc, &j.opts)?;
    let traces = km::sonic_derivative_scan(&sol, &j.section.scan_y)?;
    let corner = km::corner_probe(&sol, j.section.corner_c)?;
    let bounds = km::verify_bounds(&sol, &j.coeffs);
    let f = &sol.field;
    let manufactured_error = match j.section.scenario {
        KeldyshScenario::Manufactured => {
            let a = j.coeffs.a;
            let mut err: f64 = 0.0;
            for i in 0..f.nx() {
                for k in 0..f.ny() {
                    err = err.max((f.at(i, k) - f.x[i] * f.x[i] / (2.0 * a)).abs());
                }
            }
            Some(err)
        }
        KeldyshScenario::WeakDiscontinuity => None,
    };
    art.text("psi.csv", &f.to_csv("psi"))?;
    art.svg("psi.svg", &f.to_svg("Keldysh model solution", "psi"))?;
    let mut rows = Vec::new();
    for t in &traces {
        for (x, v) in t.x.iter().zip(&t.psi_xx) {
            rows.push([t.y, *x, *v]);
        }
    }
    art.text("traces.csv", &csv::write_rows(&["y", "x", "psi_xx"], rows.iter().map(|r| r.as_slice())))?;
    art.svg("traces.svg", &km::traces_svg(&traces, j.coeffs.a))?;
    art.json(
        "scan.json",
        &json!({
            "scenario": j.section.scenario,
            "a": j.coeffs.a,
            "inverse_a": 1.0 / j.coeffs.a,
            "iterations": f.meta.iterations,
            "residual": f.meta.residual,
            "unreliable": f.meta.unreliable,
            "notes": f.meta.notes,
            "manufactured_error": manufactured_error,
            "traces": traces,
            "corner": corner,
            "bounds": bounds,
            "bounds_hold": bounds.all_hold(),
        }),
    )?;
    let limits: Vec<String> = traces.iter().map(|t| format!("{:.6}", t.limit)).collect();
    Ok(format!("psi_xx limits [{}], corner gap {:.6}", limits.join(", "), corner.gap))
}

fn mixed(j: &MixedJob, art: &mut Artifacts) -> Res<String> {
    let (prof, _) = integrate(&j.profile)?;
    let spec = mt::build_operator(&j.profile.params, &prof, j.domain)?;
    let opts = MixedOptions { residual_tol: j.section.residual_tol };
    let (source, bc, exact) = match &j.bc {
        None => {
            let m = mt::manufactured_problem(&spec);
            (m.source, m.bc, Some(m.exact))
        }
        Some(bc) => (vec![j.section.source; j.domain.nx * j.domain.ny], bc.clone(), None),
    };
    let w = mt::solve_linear(&spec, &source, &bc, &opts)?;
    let diag = mt::sonic_smoothness_diag(&w, &spec);
    let error = exact.map(|e| w.values.iter().zip(&e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    art.text("w.csv", &w.to_csv("w"))?;
    art.svg("w.svg", &w.to_svg("mixed-type solution", "w"))?;
    art.text("coefficients.csv", &spec.coefficients_csv())?;
    art.svg("coefficients.svg", &spec.coefficients_svg())?;
    art.json(
        "smoothness.json",
        &json!({
            "l_s": spec.l_s,
            "sonic_column": spec.sonic_column,
            "kz_margin": spec.kz_margin,
            "kz_holds": spec.kz_holds(),
            "residual": w.meta.residual,
            "unreliable": w.meta.unreliable,
            "notes": w.meta.notes,
            "manufactured_error": error,
            "smoothness": diag,
        }),
    )?;
    Ok(format!("mixed solve on {}x{}, sonic mismatch dw = {:e}", j.domain.nx, j.domain.ny, diag.dw))
}

fn shock_polar(state: &UpstreamState, s: &ShockSection, art: &mut Artifacts) -> Res<String> {
    let curve = sp::compute_polar(state, s.samples)?;
    let states = match s.theta_w {
        Some(t) => Some(json!({
            "theta_w": t,
            "weak": curve.weak_state(t)?,
            "strong": curve.strong_state(t)?,
        })),
        None => None,
    };
    art.text("polar.csv", &curve.to_csv())?;
    art.svg("polar.svg", &curve.to_svg())?;
    art.json(
        "polar.json",
        &json!({
            "b0": state.b0(),
            "mach_angle": state.mach_angle()?,
            "normal_state": { "u": curve.normal_state.0, "rho": curve.normal_state.1 },
            "theta_d": curve.theta_d,
            "sigma_d": curve.sigma_d,
            "theta_d_sampled": curve.theta_d_sampled,
            "theta_sonic": curve.theta_sonic,
            "sigma_sonic": curve.sigma_sonic,
            "max_residual": curve.max_residual(),
            "states": states,
        }),
    )?;
    Ok(format!("theta_sonic = {}, theta_d = {}", curve.theta_sonic, curve.theta_d))
}

fn geometry_run(state: &UpstreamState, shock: &ShockSection, g: &GeometrySection, art: &mut Artifacts) -> Res<String> {
    let (u0, rho0, source) = match (g.u0, g.rho0) {
        (Some(u0), Some(rho0)) => (u0, rho0, "config"),
        _ => {
            let curve = sp::compute_polar(state, shock.samples)?;
            let u0 = curve.weak_state(g.theta_w)?;
            (u0, sp::bernoulli_density(state, u0[0].hypot(u0[1]))?, "weak shock state")
        }
    };
    let ss = SelfSimilarState::new(state.gamma(), u0, rho0, g.k)?;
    let geo = sp::pseudo_sonic_geometry(ss, g.theta_w, g.configuration);
    art.text("arc.csv", &geo.arc_csv(g.arc_span, 129))?;
    art.svg("geometry.svg", &geo.to_svg(g.arc_span))?;
    let round_trip = geo
        .arc(g.arc_span, 129)
        .into_iter()
        .map(|p| {
            let q = geo.to_xi(geo.to_local(p));
            (q[0] - p[0]).hypot(q[1] - p[1])
        })
        .fold(0.0, f64::max);
    art.json(
        "geometry.json",
        &json!({
            "configuration": match g.configuration { Configuration::Reflection => "reflection", Configuration::WedgeFlow => "wedge-flow" },
            "state_from": source,
            "u0": u0,
            "rho0": rho0,
            "k": g.k,
            "sonic_radius": geo.radius(),
            "theta_w": g.theta_w,
            "arc_span": g.arc_span,
            "map_round_trip_error": round_trip,
        }),
    )?;
    Ok(format!("sonic circle centre ({}, {}), radius {}", u0[0], u0[1], geo.radius()))
}
