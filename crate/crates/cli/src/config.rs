//! Run configuration: one TOML file per run.
//!
//! ```toml
//! schema_version = 1
//! name = "canonical"
//!
//! [gas]
//! gamma = 3.0
//!
//! [profile]
//! u0 = 0.95
//! branch = "accelerating"
//! ```
//!
//! Unknown keys anywhere are rejected. Sections not used by a subcommand are
//! ignored, so one file can drive several subcommands.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sonic_core::mixed_type_2d::BoundaryData2D;
use sonic_core::phase_plane::Branch;
use sonic_core::shock_polar::Configuration;

use crate::commands::Command;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Names the output directory under the output root.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub output: OutputFlags,
    #[serde(default)]
    pub gas: Option<GasSection>,
    #[serde(default)]
    pub phase_portrait: Option<PhasePortraitSection>,
    #[serde(default)]
    pub profile: Option<ProfileSection>,
    #[serde(default)]
    pub keldysh: Option<KeldyshSection>,
    #[serde(default)]
    pub mixed: Option<MixedSection>,
    #[serde(default)]
    pub shock: Option<ShockSection>,
    #[serde(default)]
    pub geometry: Option<GeometrySection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputFlags {
    #[serde(default = "yes")]
    pub svg: bool,
    /// Adds a generation-time comment to SVG files.
    #[serde(default)]
    pub svg_timestamp: bool,
}

impl Default for OutputFlags {
    fn default() -> Self {
        Self { svg: true, svg_timestamp: false }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSection {
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default = "d_s0")]
    pub s0: f64,
    #[serde(default = "one")]
    pub j: f64,
    #[serde(default = "half")]
    pub rho_ion: f64,
}

impl Default for GasSection {
    fn default() -> Self {
        Self { gamma: d_gamma(), s0: d_s0(), j: 1.0, rho_ion: 0.5 }
    }
}

fn d_gamma() -> f64 {
    3.0
}
fn d_s0() -> f64 {
    1.0 / 3.0
}
fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasePortraitSection {
    #[serde(default = "d_u_min")]
    pub u_min: f64,
    #[serde(default = "d_portrait_samples")]
    pub samples: usize,
}

impl Default for PhasePortraitSection {
    fn default() -> Self {
        Self { u_min: d_u_min(), samples: d_portrait_samples() }
    }
}

fn d_u_min() -> f64 {
    0.2
}
fn d_portrait_samples() -> usize {
    400
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub u0: f64,
    pub branch: Branch,
    /// Added to the critical `E₀`; nonzero values give off-critical data.
    #[serde(default)]
    pub e0_offset: f64,
    /// Stop position; the natural end of the orbit when absent.
    #[serde(default)]
    pub x_max: Option<f64>,
    #[serde(default)]
    pub rtol: Option<f64>,
    #[serde(default)]
    pub atol: Option<f64>,
    #[serde(default)]
    pub max_step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeldyshScenario {
    /// `ψ = x²/(2a)` on `f = 1 + x`.
    Manufactured,
    /// Perturbed coefficients with oblique data and a weak discontinuity.
    WeakDiscontinuity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeldyshSection {
    pub scenario: KeldyshScenario,
    #[serde(default = "d_eps0")]
    pub eps0: f64,
    /// Coefficient `a` (manufactured scenario only).
    #[serde(default = "d_a")]
    pub a: f64,
    #[serde(default = "d_cells")]
    pub nx: usize,
    #[serde(default = "d_cells")]
    pub ny: usize,
    #[serde(default = "d_grading")]
    pub grading: f64,
    #[serde(default = "d_tol")]
    pub tolerance: f64,
    #[serde(default = "d_iters")]
    pub max_iterations: usize,
    #[serde(default = "d_scan_y")]
    pub scan_y: Vec<f64>,
    #[serde(default = "one")]
    pub corner_c: f64,
}

fn d_eps0() -> f64 {
    0.1
}
fn d_a() -> f64 {
    4.0
}
fn d_cells() -> usize {
    64
}
fn d_grading() -> f64 {
    2.0
}
fn d_tol() -> f64 {
    1e-10
}
fn d_iters() -> usize {
    400
}
fn d_scan_y() -> Vec<f64> {
    vec![0.25, 0.5]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixedCase {
    /// `w* = cos(πx₂)(1 + x₁/2 + sin 3x₁)` with its discrete source.
    Manufactured,
    /// Constant source with the given boundary data.
    Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedSection {
    pub length: f64,
    #[serde(default = "d_mixed_nx")]
    pub nx: usize,
    #[serde(default = "d_mixed_ny")]
    pub ny: usize,
    pub case: MixedCase,
    #[serde(default)]
    pub source: f64,
    #[serde(default)]
    pub bc: Option<BoundaryData2D>,
    #[serde(default = "d_mixed_tol")]
    pub residual_tol: f64,
}

fn d_mixed_nx() -> usize {
    129
}
fn d_mixed_ny() -> usize {
    65
}
fn d_mixed_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockSection {
    pub gamma: f64,
    pub rho_inf: f64,
    pub q_inf: f64,
    #[serde(default = "d_polar_samples")]
    pub samples: usize,
    /// Wedge angle for which weak and strong states are reported.
    #[serde(default)]
    pub theta_w: Option<f64>,
}

fn d_polar_samples() -> usize {
    sonic_core::shock_polar::DEFAULT_POLAR_SAMPLES
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub theta_w: f64,
    pub configuration: Configuration,
    #[serde(default = "half")]
    pub arc_span: f64,
    #[serde(default)]
    pub k: f64,
    /// Explicit state; taken from the weak shock state when absent.
    #[serde(default)]
    pub u0: Option<[f64; 2]>,
    #[serde(default)]
    pub rho0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub runs: Vec<SweepRun>,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRun {
    pub command: Command,
    /// Relative to the sweep file.
    pub config: PathBuf,
}

/// Parses and version-checks a config.
pub fn parse_config(text: &str) -> Result<RunConfig, String> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| format!("config: {e}"))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(format!(
            "config: unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
            cfg.schema_version
        ));
    }
    if let Some(name) = &cfg.name {
        let ok = !name.is_empty()
            && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            && name != "."
            && name != "..";
        if !ok {
            return Err(format!("config: name {name:?} may only use [A-Za-z0-9._-]"));
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = parse_config("schema_version = 1\n").unwrap();
        assert_eq!(c.output, OutputFlags::default());
        assert!(c.gas.is_none());
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(parse_config("schema_version = 1\nbogus = 2\n").is_err());
        assert!(parse_config("schema_version = 1\n[gas]\ngama = 2.0\n").is_err());
        assert!(parse_config("schema_version = 2\n").unwrap_err().contains("schema_version"));
        assert!(parse_config("name = \"x\"\n").is_err());
        assert!(parse_config("schema_version = 1\nname = \"../up\"\n").is_err());
    }

    #[test]
    fn nested_sections() {
        let text = r#"
schema_version = 1
[gas]
gamma = 2.0
[profile]
u0 = 1.05
branch = "decelerating"
[mixed]
length = 0.6
case = "source"
source = 1.0
[mixed.bc]
inlet_kind = "value"
inlet = { constant = 0.5, modes = [0.0, 1.0] }
[geometry]
theta_w = 0.2
configuration = "wedge-flow"
[sweep]
runs = [{ command = "shock-polar", config = "a.toml" }]
"#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.gas.unwrap().gamma, 2.0);
        assert_eq!(c.gas.unwrap().s0, 1.0 / 3.0);
        assert_eq!(c.profile.unwrap().branch, Branch::Decelerating);
        assert_eq!(c.mixed.unwrap().bc.unwrap().inlet.modes, vec![0.0, 1.0]);
        assert_eq!(c.geometry.unwrap().configuration, Configuration::WedgeFlow);
        assert_eq!(c.sweep.unwrap().runs[0].command, Command::ShockPolar);
    }
}
