use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use sonic_cli::output::verify_manifest;
use tempfile::TempDir;

const CANONICAL: &str = r#"
schema_version = 1
[gas]
gamma = 3.0
[phase_portrait]
samples = 60
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

const POLAR: &str = r#"
schema_version = 1
[shock]
gamma = 2.0
rho_inf = 1.0
q_inf = 2.0
samples = 256
theta_w = 0.3
[geometry]
theta_w = 0.3
configuration = "reflection"
"#;

const KELDYSH: &str = r#"
schema_version = 1
[keldysh]
scenario = "manufactured"
nx = 32
ny = 16
"#;

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join("out").join(name)
    }
}

fn sonic(cmd: &str, config: &Path, out: &Path) -> i32 {
    sonic_cli::run(["sonic", cmd, config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn every_subcommand_succeeds_with_a_valid_manifest() {
    let sb = Sandbox::new();
    let canonical = sb.config("canonical.toml", CANONICAL);
    let polar = sb.config("polar.toml", POLAR);
    let keldysh = sb.config("keldysh.toml", KELDYSH);
    let runs = [
        ("phase-portrait", &canonical, &["portrait.csv", "portrait.svg", "summary.json"][..]),
        ("profile", &canonical, &["profile.csv", "profile.svg", "lemma.json"]),
        ("kz-check", &canonical, &["coefficients.csv", "kz.json"]),
        ("mixed-solve", &canonical, &["w.csv", "w.svg", "coefficients.csv", "smoothness.json"]),
        ("keldysh-solve", &keldysh, &["psi.csv", "traces.csv", "scan.json"]),
        ("shock-polar", &polar, &["polar.csv", "polar.svg", "polar.json"]),
        ("geometry", &polar, &["arc.csv", "geometry.svg", "geometry.json"]),
    ];
    for (cmd, cfg, files) in runs {
        let out = sb.out(cmd);
        assert_eq!(sonic(cmd, cfg, &out), 0, "{cmd}");
        let m = verify_manifest(&out).unwrap();
        assert_eq!(m.command, cmd);
        assert_eq!(m.exit_code, 0);
        assert_eq!(m.config, fs::read_to_string(cfg).unwrap());
        for f in files {
            assert!(m.files.iter().any(|e| e.path == *f), "{cmd}: {f} missing");
        }
    }
    let kz = json(sb.out("kz-check").join("kz.json"));
    assert_eq!(kz["report"]["holds"], true);
    let polar = json(sb.out("shock-polar").join("polar.json"));
    assert!((polar["theta_d"].as_f64().unwrap() - 0.3939205).abs() < 1e-6);
}

#[test]
fn reruns_are_byte_identical() {
    let sb = Sandbox::new();
    let canonical = sb.config("canonical.toml", CANONICAL);
    let polar = sb.config("polar.toml", POLAR);
    for (cmd, cfg) in [("profile", &canonical), ("mixed-solve", &canonical), ("shock-polar", &polar)] {
        let a = sb.out(&format!("{cmd}-a"));
        let b = sb.out(&format!("{cmd}-b"));
        assert_eq!(sonic(cmd, cfg, &a), 0);
        assert_eq!(sonic(cmd, cfg, &b), 0);
        let ma = verify_manifest(&a).unwrap();
        let mb = verify_manifest(&b).unwrap();
        assert_eq!(ma.files, mb.files, "{cmd}");
    }
}

#[test]
fn negative_findings_exit_zero() {
    let sb = Sandbox::new();
    let dec = sb.config("dec.toml", "schema_version = 1\n[profile]\nu0 = 1.05\nbranch = \"decelerating\"\n");
    let out = sb.out("kz");
    assert_eq!(sonic("kz-check", &dec, &out), 0);
    assert_eq!(json(out.join("kz.json"))["report"]["holds"], false);

    let off = sb.config(
        "off.toml",
        "schema_version = 1\n[profile]\nu0 = 0.95\nbranch = \"accelerating\"\ne0_offset = -0.01\n",
    );
    let out = sb.out("off");
    assert_eq!(sonic("profile", &off, &out), 0);
    let lemma = json(out.join("lemma.json"));
    assert_eq!(lemma["all_passed"], false);
    assert!(lemma["truncated"].as_str().unwrap().contains("sonic blow-up"));
}

#[test]
fn validation_errors_exit_one() {
    let sb = Sandbox::new();
    let cases = [
        ("profile", "schema_version = 1\nbogus = 1\n"),
        ("profile", "schema_version = 7\n"),
        ("profile", "schema_version = 1\n"),
        ("profile", "schema_version = 1\n[gas]\ngamma = 0.5\n[profile]\nu0 = 0.9\nbranch = \"accelerating\"\n"),
        ("profile", "schema_version = 1\n[profile]\nu0 = -1.0\nbranch = \"accelerating\"\n"),
        ("shock-polar", "schema_version = 1\n[shock]\ngamma = 2.0\nrho_inf = 1.0\nq_inf = 0.5\n"),
        ("geometry", &POLAR.replace("theta_w = 0.3\nconfiguration", "theta_w = 0.5\nconfiguration")),
        ("mixed-solve", "schema_version = 1\n[profile]\nu0 = 0.95\nbranch = \"accelerating\"\n[mixed]\nlength = 0.6\nnx = 2\ncase = \"manufactured\"\n"),
        ("keldysh-solve", "schema_version = 1\n[keldysh]\nscenario = \"manufactured\"\nscan_y = [5.0]\n"),
        ("sweep", "schema_version = 1\n"),
    ];
    for (k, (cmd, text)) in cases.iter().enumerate() {
        let cfg = sb.config(&format!("bad{k}.toml"), text);
        assert_eq!(sonic(cmd, &cfg, &sb.out(&format!("bad{k}"))), 1, "case {k}: {text}");
    }
    assert_eq!(sonic("profile", &sb.dir.path().join("missing.toml"), &sb.out("missing")), 1);
    assert_eq!(sonic_cli::run(["sonic", "no-such-command", "x.toml"]), 1);
    assert_eq!(sonic_cli::run(["sonic", "profile"]), 1);
    assert_eq!(sonic_cli::run(["sonic", "--help"]), 0);
}

#[test]
fn failed_runs_record_their_exit_code() {
    let sb = Sandbox::new();
    let cfg = sb.config("bad.toml", "schema_version = 1\n[shock]\ngamma = 2.0\nrho_inf = 1.0\nq_inf = 0.5\n");
    let out = sb.out("bad");
    assert_eq!(sonic("shock-polar", &cfg, &out), 1);
    let m = verify_manifest(&out).unwrap();
    assert_eq!(m.exit_code, 1);
    assert!(m.files.is_empty());
}

#[test]
fn solver_failures_exit_two() {
    let sb = Sandbox::new();
    let stalled = sb.config("stalled.toml", &KELDYSH.replace("ny = 16", "ny = 16\nmax_iterations = 1\ntolerance = 1e-14"));
    assert_eq!(sonic("keldysh-solve", &stalled, &sb.out("stalled")), 2);
    let singular = sb.config(
        "singular.toml",
        r#"
schema_version = 1
[profile]
u0 = 0.95
branch = "accelerating"
[mixed]
length = 0.3
nx = 17
ny = 9
case = "source"
source = 1.0
[mixed.bc]
inlet_kind = "normal"
inlet = { constant = 0.0, modes = [] }
"#,
    );
    assert_eq!(sonic("mixed-solve", &singular, &sb.out("singular")), 2);
}

#[test]
fn svg_output_can_be_disabled() {
    let sb = Sandbox::new();
    let cfg = sb.config("p.toml", &POLAR.replace("schema_version = 1", "schema_version = 1\n[output]\nsvg = false"));
    let out = sb.out("nosvg");
    assert_eq!(sonic("shock-polar", &cfg, &out), 0);
    assert!(!out.join("polar.svg").exists());
    assert!(verify_manifest(&out).unwrap().files.iter().all(|f| !f.path.ends_with(".svg")));
}

#[test]
fn sweep_isolates_children_and_reports_the_worst_code() {
    let sb = Sandbox::new();
    sb.config("polar.toml", POLAR);
    sb.config("sub.toml", "schema_version = 1\n[shock]\ngamma = 2.0\nrho_inf = 1.0\nq_inf = 0.5\n");
    let sweep = sb.config(
        "sweep.toml",
        r#"
schema_version = 1
[sweep]
threads = 2
runs = [
    { command = "shock-polar", config = "polar.toml" },
    { command = "geometry", config = "polar.toml" },
    { command = "shock-polar", config = "sub.toml" },
]
"#,
    );
    let out = sb.out("sweep");
    assert_eq!(sonic("sweep", &sweep, &out), 1);
    let summary = json(out.join("summary.json"));
    let codes: Vec<i64> = summary["runs"].as_array().unwrap().iter().map(|r| r["exit_code"].as_i64().unwrap()).collect();
    assert_eq!(codes, [0, 0, 1]);
    for r in summary["runs"].as_array().unwrap() {
        verify_manifest(&out.join(r["output"].as_str().unwrap())).unwrap();
    }
    verify_manifest(&out).unwrap();
}

#[test]
fn output_dir_defaults_to_the_config_name() {
    let sb = Sandbox::new();
    let cfg = sb.config("p.toml", &POLAR.replace("schema_version = 1", "schema_version = 1\nname = \"wedge\""));
    let parsed = sonic_cli::config::parse_config(&fs::read_to_string(&cfg).unwrap()).unwrap();
    let dir = sonic_cli::resolve_output_dir(sonic_cli::commands::Command::ShockPolar, &cfg, &parsed, None);
    assert!(dir.ends_with("wedge/shock-polar"), "{}", dir.display());
    let with_dir = POLAR.replace("schema_version = 1", "schema_version = 1\noutput_dir = \"here\"");
    let parsed = sonic_cli::config::parse_config(&with_dir).unwrap();
    let dir = sonic_cli::resolve_output_dir(sonic_cli::commands::Command::ShockPolar, &cfg, &parsed, None);
    assert_eq!(dir, sb.dir.path().join("here"));
}

#[test]
fn binary_reports_exit_codes() {
    let sb = Sandbox::new();
    let cfg = sb.config("polar.toml", POLAR);
    let bin = env!("CARGO_BIN_EXE_sonic");
    let ok = Proc::new(bin).args(["shock-polar", cfg.to_str().unwrap(), "--out"]).arg(sb.out("bin")).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("theta_d"));
    let bad = Proc::new(bin).args(["shock-polar", "/nonexistent/config.toml"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let version = Proc::new(bin).arg("--version").output().unwrap();
    assert_eq!(version.status.code(), Some(0));
}

#[test]
fn shipped_configs_and_fuzz_seeds_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    for dir in ["configs", "fuzz/corpus/config_parse"] {
        for entry in fs::read_dir(root.join(dir)).unwrap() {
            let path = entry.unwrap().path();
            let text = fs::read_to_string(&path).unwrap();
            assert!(sonic_cli::config::parse_config(&text).is_ok(), "{}", path.display());
        }
    }
    for entry in fs::read_dir(root.join("fuzz/corpus/profile_csv")).unwrap() {
        let path = entry.unwrap().path();
        let ok = sonic_core::profile_1d::parse_profile_csv(&fs::read_to_string(&path).unwrap()).is_ok();
        assert_eq!(ok, !path.ends_with("unordered.csv"), "{}", path.display());
    }
}
