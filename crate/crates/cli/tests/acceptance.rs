//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use sonic_cli::output::verify_manifest;
use sonic_core::keldysh_model::{self as km, KeldyshBoundary, KeldyshCoefficients, KeldyshDomain, KeldyshOptions};
use sonic_core::mixed_type_2d::{self as mt, BoundaryData2D, ChannelDomain, InletKind, MixedOptions, ModalData};
use sonic_core::numerics::quadrature;
use sonic_core::phase_plane::{self as pp, Branch, GasParams};
use sonic_core::profile_1d::{self as p1, InletData, IntegratorOptions, LMax, ProfileKind, StopAt};
use sonic_core::shock_polar::{self as sp, UpstreamState};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn phase_plane_exactness() -> Check {
    let p = GasParams::canonical();
    ensure((p.u_sonic() - 1.0).abs() < 1e-15, || format!("u_s = {}", p.u_sonic()))?;
    let h2 = pp::enthalpy_h(&p, 2.0).map_err(e)?;
    ensure((h2 - 7.0 / 48.0).abs() < 1e-14, || format!("H(2) = {h2}"))?;
    let e2 = pp::critical_e(&p, 2.0, Branch::Accelerating).map_err(e)?;
    ensure((e2 - (7.0f64 / 24.0).sqrt()).abs() < 1e-14, || format!("E(2) = {e2}"))?;
    let u_star = pp::find_u_star(&p).map_err(e)?;
    ensure((u_star - 2.7746).abs() < 1e-3, || format!("u* = {u_star}"))?;

    let (us, ub, g) = (p.u_sonic(), p.u_bar(), p.gamma());
    let dh = |t: f64| (1.0 - (us / t).powf(g + 1.0)) * (ub - t);
    let (lo, hi) = ((0.01 * us).ln(), (10.0 * ub).ln());
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let u = (lo + (hi - lo) * k as f64 / 199.0).exp();
        let closed = pp::enthalpy_h(&p, u).map_err(e)?;
        let quad = p.j() / ub * quadrature::integrate(dh, us, u, 1e-16, 1e-13).map_err(e)?;
        worst = worst.max((closed - quad).abs() / quad.abs().max(1e-300));
    }
    ensure(worst <= 1e-10, || format!("closed form vs quadrature {worst:e}"))?;
    Ok(format!("u* = {u_star:.6}, worst relative H gap {worst:.1e}"))
}

fn conservation() -> Check {
    let p = GasParams::canonical();
    let inlet = InletData::on_branch(&p, 0.95, Branch::Accelerating).map_err(e)?;
    let prof = p1::integrate_profile(&p, inlet, StopAt::Terminal, &IntegratorOptions::default()).map_err(e)?;
    let defect = prof.first_integral_defect();
    ensure(defect <= 1e-8, || format!("first-integral defect {defect:e}"))?;
    let k = prof.samples.iter().position(|s| s.u == p.u_sonic()).ok_or("u_s is not a sample")?;
    let limit = 2.0 * 2f64.sqrt();
    let at = 1.0 / prof.samples[k].du_dx;
    let (a, b) = (prof.samples[k - 1], prof.samples[k + 1]);
    let secant = (b.x1 - a.x1) / (b.u - a.u);
    ensure((at - limit).abs() < 1e-6 && (secant - limit).abs() < 1e-6, || {
        format!("dx/du at u_s = {at}, centered secant {secant}")
    })?;
    Ok(format!("defect {defect:.1e}, dx/du secant gap {:.1e}", (secant - limit).abs()))
}

fn decelerating_gases() -> Vec<GasParams> {
    [1.3, 1.5, 2.0, 3.0].iter().map(|&g| GasParams::new(g, 0.2, 1.0, 0.4).unwrap()).collect()
}

fn lemma_suite() -> Check {
    let opts = IntegratorOptions::default();
    let mut rng = StdRng::seed_from_u64(7);
    let canonical = GasParams::canonical();
    for _ in 0..10 {
        let u0 = rng.random_range(0.3..0.98);
        let inlet = InletData::on_branch(&canonical, u0, Branch::Accelerating).map_err(e)?;
        let r = p1::verify_lemma(&canonical, inlet, &opts).map_err(e)?;
        ensure(r.kind == ProfileKind::Accelerating && r.all_passed(), || format!("accelerating u0 = {u0}: {r:?}"))?;
    }
    let gases = decelerating_gases();
    for k in 0..10 {
        let p = gases[k % gases.len()];
        let u0 = p.u_sonic() * rng.random_range(1.02..1.6);
        let inlet = InletData::on_branch(&p, u0, Branch::Decelerating).map_err(e)?;
        let r = p1::verify_lemma(&p, inlet, &opts).map_err(e)?;
        ensure(r.kind == ProfileKind::Decelerating && r.all_passed(), || {
            format!("decelerating gamma = {} u0 = {u0}: {:?}", p.gamma(), r.claims)
        })?;
        let infinite = matches!(r.l_max, Some(LMax::Infinite));
        ensure(infinite == (p.gamma() >= 2.0), || format!("gamma = {}: l_max {:?}", p.gamma(), r.l_max))?;
    }
    Ok("10 accelerating and 10 decelerating inlets, finite l_max exactly for gamma < 2".into())
}

fn kz_dichotomy() -> Check {
    let opts = IntegratorOptions::default();
    let mut rng = StdRng::seed_from_u64(11);
    let canonical = GasParams::canonical();
    let mut lambda_min = f64::INFINITY;
    let mut discrepancy: f64 = 0.0;
    for _ in 0..6 {
        let u0 = rng.random_range(0.3..0.98);
        let inlet = InletData::on_branch(&canonical, u0, Branch::Accelerating).map_err(e)?;
        let full = p1::integrate_profile(&canonical, inlet, StopAt::Terminal, &opts).map_err(e)?;
        let Some(LMax::Finite(l_max)) = full.l_max else { return Err(format!("u0 = {u0}: no finite l_max")) };
        // The channel must end before the turning point, where u' = 0.
        let prof = p1::integrate_profile(&canonical, inlet, StopAt::XMax(0.9 * l_max), &opts).map_err(e)?;
        let r = p1::kz_check(&canonical, &prof);
        ensure(r.holds && r.lambda_l > 0.0, || format!("accelerating u0 = {u0}: {r:?}"))?;
        lambda_min = lambda_min.min(r.lambda_l);
        discrepancy = discrepancy.max(r.discrepancy);
    }
    for (k, p) in decelerating_gases().into_iter().enumerate() {
        let u0 = p.u_sonic() * (1.05 + 0.1 * k as f64);
        let inlet = InletData::on_branch(&p, u0, Branch::Decelerating).map_err(e)?;
        let prof = p1::integrate_profile(&p, inlet, StopAt::XMax(1.0), &opts).map_err(e)?;
        let r = p1::kz_check(&p, &prof);
        ensure(!r.holds && r.min_q.iter().all(|q| *q < 0.0), || format!("decelerating gamma = {}: {r:?}", p.gamma()))?;
        discrepancy = discrepancy.max(r.discrepancy);
    }
    ensure(discrepancy <= 1e-6, || format!("representation vs direct {discrepancy:e}"))?;
    Ok(format!("min lambda_L on accelerating {lambda_min:.4}, discrepancy {discrepancy:.1e}"))
}

fn keldysh() -> Check {
    const A: f64 = 4.0;
    const EPS0: f64 = 0.1;
    let dom = KeldyshDomain::affine(EPS0).map_err(e)?;
    let c = KeldyshCoefficients::unperturbed(A, 1.0);
    let bc = KeldyshBoundary::manufactured(EPS0, A);
    let mut errs = Vec::new();
    for n in [32, 64, 128] {
        let opts = KeldyshOptions { nx: n, ny: 16, tolerance: 1e-12, ..Default::default() };
        let sol = km::solve_model(&dom, &c, &bc, &opts).map_err(e)?;
        let f = &sol.field;
        let mut err: f64 = 0.0;
        for i in 0..f.nx() {
            for j in 0..f.ny() {
                err = err.max((f.at(i, j) - f.x[i] * f.x[i] / (2.0 * A)).abs());
            }
        }
        errs.push(err);
    }
    // Stencils are exact on x²; the first-cell upwind error of width ε₀N^{-2}
    // gives nominal order 4 on the default grading.
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    ensure(orders.iter().all(|o| (o - 4.0).abs() <= 0.3), || format!("errors {errs:?}, orders {orders:?}"))?;

    let (d, c, bc) = km::weak_discontinuity_scenario(EPS0).map_err(e)?;
    let sol = km::solve_model(&d, &c, &bc, &KeldyshOptions { nx: 256, ny: 256, ..Default::default() }).map_err(e)?;
    let inv_a = 1.0 / c.a;
    let traces = km::sonic_derivative_scan(&sol, &[0.25, 0.5, 0.75]).map_err(e)?;
    for t in &traces {
        ensure((t.limit - inv_a).abs() <= 0.15 * inv_a, || format!("y = {}: limit {}", t.y, t.limit))?;
    }
    let corner = km::corner_probe(&sol, 1.0).map_err(e)?;
    ensure(corner.gap > 0.5 * inv_a, || format!("corner gap {} vs {}", corner.gap, 0.5 * inv_a))?;
    let limits: Vec<String> = traces.iter().map(|t| format!("{:.4}", t.limit)).collect();
    Ok(format!(
        "orders {:.2}/{:.2}, psi_xx(0+, y) [{}] vs 1/a = {inv_a}, corner gap {:.4}",
        orders[0],
        orders[1],
        limits.join(", "),
        corner.gap
    ))
}

fn mixed_type() -> Check {
    let p = GasParams::canonical();
    let inlet = InletData::on_branch(&p, 0.95, Branch::Accelerating).map_err(e)?;
    let prof = p1::integrate_profile(&p, inlet, StopAt::XMax(1.5), &IntegratorOptions::default()).map_err(e)?;
    let length = 0.6;
    let opts = MixedOptions::default();
    let mut errs = Vec::new();
    let mut worst_smooth = (0.0, 0.0);
    for n in [33, 65, 129] {
        let spec = mt::build_operator(&p, &prof, ChannelDomain::new(length, 2 * n - 1, n).map_err(e)?).map_err(e)?;
        ensure(spec.kz_holds(), || format!("sign condition fails on the sampled coefficients ({})", spec.kz_margin))?;
        let m = mt::manufactured_problem(&spec);
        let w = mt::solve_linear(&spec, &m.source, &m.bc, &opts).map_err(e)?;
        let err = w.values.iter().zip(&m.exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let rel = err / w.max_abs();
        let rep = mt::sonic_smoothness_diag(&w, &spec);
        let mismatch = rep.w.max(rep.dw).max(rep.d2w);
        ensure(mismatch <= rel, || format!("n = {n}: sonic mismatch {rep:?} above relative error {rel:e}"))?;
        worst_smooth = (mismatch, rel);
        errs.push(err);
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    ensure(orders.iter().all(|o| *o >= 1.0), || format!("errors {errs:?}, orders {orders:?}"))?;

    let d = ChannelDomain::new(length, 1025, 3).map_err(e)?;
    let spec = mt::build_operator(&p, &prof, d).map_err(e)?;
    let src = |x: f64| 1.0 + x.cos();
    let f = spec.source_from_fn(|x1, _| src(x1));
    let bc = BoundaryData2D { inlet_kind: InletKind::Value, inlet: ModalData::constant(0.5), outlet: None };
    let w = mt::solve_linear(&spec, &f, &bc, &opts).map_err(e)?;
    let xs: Vec<f64> = (0..d.nx).map(|i| d.x1(i)).collect();
    let reference = mt::reduced_ode_reference(&p, &prof, length, 0.5, src, &xs).map_err(e)?;
    let mut gap: f64 = 0.0;
    for (i, r) in reference.iter().enumerate() {
        for j in 0..d.ny {
            gap = gap.max((w.at(i, j) - r).abs());
        }
    }
    ensure(gap < 1e-4, || format!("1D reduction vs ODE {gap:e}"))?;
    Ok(format!(
        "orders {:.2}/{:.2}, ODE gap {gap:.1e}, sonic mismatch {:.1e} <= error {:.1e}",
        orders[0], orders[1], worst_smooth.0, worst_smooth.1
    ))
}

fn shock_polar() -> Check {
    let s = UpstreamState::new(2.0, 1.0, 2.0).map_err(e)?;
    let (u, rho) = sp::normal_shock(&s).map_err(e)?;
    let r3 = 3f64.sqrt();
    ensure((u - (r3 - 1.0)).abs() <= 1e-10 && (rho - (r3 + 1.0)).abs() <= 1e-10, || format!("normal shock ({u}, {rho})"))?;
    let c = sp::compute_polar(&s, sp::DEFAULT_POLAR_SAMPLES).map_err(e)?;
    let res = c.max_residual();
    ensure(res <= 1e-10, || format!("max residual {res:e}"))?;
    ensure(c.theta_sonic < c.theta_d, || format!("theta_sonic {} >= theta_d {}", c.theta_sonic, c.theta_d))?;
    let w0 = c.weak_state(0.0).map_err(e)?;
    ensure(w0 == [2.0, 0.0], || format!("weak_state(0) = {w0:?}"))?;
    Ok(format!("theta_sonic {:.7} < theta_d {:.7}, max residual {res:.1e}", c.theta_sonic, c.theta_d))
}

const CLI_CANONICAL: &str = r#"schema_version = 1
[phase_portrait]
samples = 50
[profile]
u0 = 0.95
branch = "accelerating"
x_max = 1.5
[mixed]
length = 0.6
nx = 33
ny = 17
case = "manufactured"
"#;

const CLI_POLAR: &str = r#"schema_version = 1
[shock]
gamma = 2.0
rho_inf = 1.0
q_inf = 2.0
samples = 256
theta_w = 0.2
[geometry]
theta_w = 0.2
configuration = "wedge-flow"
"#;

const CLI_KELDYSH: &str = "schema_version = 1\n[keldysh]\nscenario = \"weak-discontinuity\"\nnx = 32\nny = 32\n";

fn cli(cmd: &str, cfg: &Path, out: &Path) -> i32 {
    sonic_cli::run(["sonic", cmd, cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn determinism_and_cli() -> Check {
    let tmp = tempfile::tempdir().map_err(e)?;
    let write = |name: &str, text: &str| {
        let p = tmp.path().join(name);
        fs::write(&p, text).map(|_| p)
    };
    let canonical = write("canonical.toml", CLI_CANONICAL).map_err(e)?;
    let polar = write("polar.toml", CLI_POLAR).map_err(e)?;
    let keldysh = write("keldysh.toml", CLI_KELDYSH).map_err(e)?;
    let dec = write("dec.toml", "schema_version = 1\n[profile]\nu0 = 1.05\nbranch = \"decelerating\"\n").map_err(e)?;
    let runs = [
        ("phase-portrait", &canonical),
        ("profile", &canonical),
        ("kz-check", &canonical),
        ("kz-check", &dec),
        ("keldysh-solve", &keldysh),
        ("mixed-solve", &canonical),
        ("shock-polar", &polar),
        ("geometry", &polar),
    ];
    let mut csvs = 0;
    for (k, (cmd, cfg)) in runs.iter().enumerate() {
        let a = tmp.path().join(format!("{k}-a"));
        let b = tmp.path().join(format!("{k}-b"));
        ensure(cli(cmd, cfg, &a) == 0 && cli(cmd, cfg, &b) == 0, || format!("{cmd} did not exit 0"))?;
        let (ma, mb) = (verify_manifest(&a)?, verify_manifest(&b)?);
        for f in ma.files.iter().filter(|f| f.path.ends_with(".csv")) {
            let same = mb.files.iter().any(|g| g == f) && fs::read(a.join(&f.path)).ok() == fs::read(b.join(&f.path)).ok();
            ensure(same, || format!("{cmd}: {} differs between runs", f.path))?;
            csvs += 1;
        }
    }

    let bad_schema = write("bad.toml", "schema_version = 1\nunknown = 3\n").map_err(e)?;
    let subsonic = write("sub.toml", "schema_version = 1\n[shock]\ngamma = 2.0\nrho_inf = 1.0\nq_inf = 0.5\n").map_err(e)?;
    let stalled = write("stall.toml", "schema_version = 1\n[keldysh]\nscenario = \"manufactured\"\nnx = 16\nny = 8\nmax_iterations = 1\ntolerance = 1e-14\n")
        .map_err(e)?;
    let out = tmp.path().join("codes");
    let codes = [
        (cli("profile", &bad_schema, &out), 1),
        (cli("shock-polar", &subsonic, &out), 1),
        (cli("profile", &tmp.path().join("absent.toml"), &out), 1),
        (sonic_cli::run(["sonic", "bogus"]), 1),
        (cli("keldysh-solve", &stalled, &out), 2),
    ];
    ensure(codes.iter().all(|(got, want)| got == want), || format!("exit codes (got, want) {codes:?}"))?;
    Ok(format!("{} runs, {csvs} CSV files byte-identical, exit codes 0/1/2 as specified", runs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check, Option<Duration>); 8] = [
        ("1 phase-plane exactness", phase_plane_exactness, Some(Duration::from_secs(1))),
        ("2 conservation through the sonic point", conservation, Some(Duration::from_secs(1))),
        ("3 lemma suite", lemma_suite, Some(Duration::from_secs(30))),
        ("4 KZ dichotomy", kz_dichotomy, Some(Duration::from_secs(5))),
        ("5 Keldysh model", keldysh, Some(Duration::from_secs(300))),
        ("6 mixed-type solver", mixed_type, Some(Duration::from_secs(120))),
        ("7 shock polar", shock_polar, Some(Duration::from_secs(1))),
        ("8 determinism and CLI", determinism_and_cli, None),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let mut result = check();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(b)) = (&result, budget) {
            if elapsed > b {
                result = Err(format!("took {elapsed:.2?}, budget {b:?}"));
            }
        }
        match result {
            Ok(detail) => println!("PASS criterion {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
