//! Linear solver for `L w = α₁₁(x₁) ∂₁₁w + ∂₂₂w + β₁(x₁) ∂₁w = f` on the
//! channel `(0, L) × (-1, 1)`.
//!
//! The operator is elliptic where `α₁₁ > 0` and hyperbolic (with `x₁` as the
//! time-like direction) where `α₁₁ < 0`. Both regions are discretized on one
//! grid and solved together by a single sparse factorization.
//!
//! Stencils per column:
//! - elliptic: centered `∂₁₁`;
//! - hyperbolic: the second-order backward difference
//!   `(2w_i - 5w_{i-1} + 4w_{i-2} - w_{i-3})/h²`, which marches stably for
//!   every transverse mode (a centered difference does not once
//!   `h²k²π²/|α₁₁| > 4`, i.e. next to the sonic line);
//! - sonic (`α₁₁ = 0` at the node): no `∂₁₁` term.
//!
//! `β₁∂₁` is upwinded by the sign of `β₁` in the elliptic region and always
//! taken backward in the hyperbolic region, with three-point one-sided
//! differences where the grid allows.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field2D, SolveMeta};
use crate::io::{csv, svg};
use crate::numerics::sparse::SparseSystem;
use crate::phase_plane::GasParams;
use crate::profile_1d::{kz_coefficients, Profile1D};

/// Distance below which a node is treated as lying on the sonic line.
pub const SONIC_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelDomain {
    pub length: f64,
    /// Nodes in `x₁`, including both ends.
    pub nx: usize,
    /// Nodes across `x₂ ∈ [-1, 1]`, including both walls.
    pub ny: usize,
}

impl ChannelDomain {
    pub fn new(length: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidInput(format!("channel length must be positive, got {length}")));
        }
        if nx < 5 || ny < 3 {
            return Err(Error::InvalidInput(format!("grid {nx}x{ny} too small (need nx >= 5, ny >= 3)")));
        }
        Ok(Self { length, nx, ny })
    }

    pub fn hx(&self) -> f64 {
        self.length / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        2.0 / (self.ny - 1) as f64
    }

    pub fn x1(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.length
        } else {
            i as f64 * self.hx()
        }
    }

    pub fn x2(&self, j: usize) -> f64 {
        -1.0 + j as f64 * self.hy()
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }
}

/// Which discretization of `α₁₁∂₁₁` a column uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    Elliptic,
    Sonic,
    Hyperbolic,
}

/// Coefficients of `L` sampled at the `x₁` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedOperatorSpec {
    pub domain: ChannelDomain,
    pub alpha11: Vec<f64>,
    pub beta1: Vec<f64>,
    /// Type-change location, if the coefficients change sign.
    pub l_s: Option<f64>,
    /// Node nearest to `l_s` when `l_s` lies in `[0, L]`.
    pub sonic_column: Option<usize>,
    /// `min_m min_i (-2β₁ - (2m-1)∂₁α₁₁)` over interior nodes, `m = 0..=3`,
    /// with a centered difference of the sampled `α₁₁`.
    pub kz_margin: f64,
}

/// Samples `α₁₁`, `β₁` of `profile` at the grid nodes.
pub fn build_operator(params: &GasParams, profile: &Profile1D, domain: ChannelDomain) -> Result<MixedOperatorSpec> {
    let (lo, hi) = profile.x_range();
    if lo > 0.0 || hi < domain.length {
        return Err(Error::InvalidInput(format!(
            "profile covers [{lo}, {hi}], channel needs [0, {}]",
            domain.length
        )));
    }
    let mut alpha = Vec::with_capacity(domain.nx);
    let mut beta = Vec::with_capacity(domain.nx);
    for i in 0..domain.nx {
        let (a, b) = kz_coefficients(params, profile, domain.x1(i))?;
        alpha.push(a);
        beta.push(b);
    }
    if let Some(ls) = profile.l_s {
        for i in 0..domain.nx {
            if (domain.x1(i) - ls).abs() <= SONIC_SNAP {
                alpha[i] = 0.0;
            }
        }
    }
    finish(domain, alpha, beta, profile.l_s)
}

impl MixedOperatorSpec {
    /// Spec from given nodal samples. `l_s` is located by linear
    /// interpolation of the first sign change of `α₁₁`.
    pub fn from_samples(domain: ChannelDomain, alpha11: Vec<f64>, beta1: Vec<f64>) -> Result<Self> {
        if alpha11.len() != domain.nx || beta1.len() != domain.nx {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficient samples, got {} and {}",
                domain.nx,
                alpha11.len(),
                beta1.len()
            )));
        }
        let mut l_s = None;
        for i in 0..domain.nx - 1 {
            let (a0, a1) = (alpha11[i], alpha11[i + 1]);
            if a0 == 0.0 {
                l_s = Some(domain.x1(i));
                break;
            }
            if a0 > 0.0 && a1 <= 0.0 {
                let (x0, x1) = (domain.x1(i), domain.x1(i + 1));
                l_s = Some(x0 + (x1 - x0) * a0 / (a0 - a1));
                break;
            }
        }
        finish(domain, alpha11, beta1, l_s)
    }

    pub fn template(&self, i: usize) -> Template {
        let a = self.alpha11[i];
        if a > 0.0 {
            Template::Elliptic
        } else if a < 0.0 {
            Template::Hyperbolic
        } else {
            Template::Sonic
        }
    }

    pub fn templates(&self) -> Vec<Template> {
        (0..self.domain.nx).map(|i| self.template(i)).collect()
    }

    pub fn kz_holds(&self) -> bool {
        self.kz_margin > 0.0
    }

    /// CSV with columns `x1,alpha11,beta1`.
    pub fn coefficients_csv(&self) -> String {
        let rows: Vec<[f64; 3]> =
            (0..self.domain.nx).map(|i| [self.domain.x1(i), self.alpha11[i], self.beta1[i]]).collect();
        csv::write_rows(&["x1", "alpha11", "beta1"], rows.iter().map(|r| r.as_slice()))
    }

    pub fn coefficients_svg(&self) -> String {
        let xs: Vec<f64> = (0..self.domain.nx).map(|i| self.domain.x1(i)).collect();
        let series = [
            svg::Series::new("alpha11", xs.iter().copied().zip(self.alpha11.iter().copied()).collect(), "#1f77b4"),
            svg::Series::new("beta1", xs.iter().copied().zip(self.beta1.iter().copied()).collect(), "#d62728"),
        ];
        svg::line_plot("normalized coefficients", "x1", "value", &series)
    }

    /// Nodal source values `f(x₁, x₂)`.
    pub fn source_from_fn(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let d = &self.domain;
        let mut out = vec![0.0; d.nx * d.ny];
        for i in 0..d.nx {
            for j in 0..d.ny {
                out[d.idx(i, j)] = f(d.x1(i), d.x2(j));
            }
        }
        out
    }
}

fn finish(domain: ChannelDomain, alpha11: Vec<f64>, beta1: Vec<f64>, l_s: Option<f64>) -> Result<MixedOperatorSpec> {
    if alpha11.iter().chain(&beta1).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite coefficient sample".into()));
    }
    if !(alpha11[0] > 0.0) {
        return Err(Error::InvalidInput(format!(
            "the inlet must lie in the elliptic region (alpha11(0) = {})",
            alpha11[0]
        )));
    }
    let sonic_column = l_s.filter(|&l| l <= domain.length).map(|l| {
        let i = (l / domain.hx()).round() as usize;
        i.min(domain.nx - 1)
    });
    let h = domain.hx();
    let mut kz_margin = f64::INFINITY;
    for i in 1..domain.nx - 1 {
        let da = (alpha11[i + 1] - alpha11[i - 1]) / (2.0 * h);
        for m in 0..=3 {
            kz_margin = kz_margin.min(-2.0 * beta1[i] - (2.0 * m as f64 - 1.0) * da);
        }
    }
    Ok(MixedOperatorSpec { domain, alpha11, beta1, l_s, sonic_column, kz_margin })
}

/// Boundary data expanded in modes that satisfy the wall compatibility
/// conditions: `c + Σ a_k cos(kπ(x₂+1)/2)` for values and normal
/// derivatives, `Σ a_k sin(kπ(x₂+1)/2)` for tangential derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalData {
    #[serde(default)]
    pub constant: f64,
    /// `a_1, a_2, ...`
    #[serde(default)]
    pub modes: Vec<f64>,
}

impl ModalData {
    pub fn zero() -> Self {
        Self { constant: 0.0, modes: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self { constant: c, modes: Vec::new() }
    }

    fn cos_series(&self, x2: f64) -> f64 {
        let t = 0.5 * PI * (x2 + 1.0);
        self.constant + self.modes.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * t).cos()).sum::<f64>()
    }

    /// `∫_{-1}^{x₂}` of the sine series.
    fn sin_series_integral(&self, x2: f64) -> f64 {
        let t = 0.5 * PI * (x2 + 1.0);
        self.modes
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let kk = (k + 1) as f64;
                a * 2.0 / (kk * PI) * (1.0 - (kk * t).cos())
            })
            .sum()
    }
}

/// What the inlet data prescribes on `x₁ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InletKind {
    /// `w = g₀`.
    Value,
    /// `∂₂w = g₀`, with `w(0, -1) = 0`.
    Tangential,
    /// `∂₁w = g₀`.
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryData2D {
    pub inlet_kind: InletKind,
    pub inlet: ModalData,
    /// Dirichlet values on `x₁ = L`; only for purely elliptic channels.
    #[serde(default)]
    pub outlet: Option<ModalData>,
}

impl BoundaryData2D {
    pub fn homogeneous() -> Self {
        Self { inlet_kind: InletKind::Value, inlet: ModalData::zero(), outlet: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedOptions {
    /// Bound on `‖Aw - b‖∞ / (‖A‖∞‖w‖∞ + ‖b‖∞)`.
    pub residual_tol: f64,
}

impl Default for MixedOptions {
    fn default() -> Self {
        Self { residual_tol: 1e-10 }
    }
}

/// Second-derivative stencil in `x₁` at column `i`: `(offsets, weights)` with
/// weights already divided by `h²`.
fn d11(spec: &MixedOperatorSpec, i: usize) -> Result<Vec<(usize, f64)>> {
    let h2 = spec.domain.hx().powi(2);
    let n = spec.domain.nx;
    Ok(match spec.template(i) {
        Template::Sonic => Vec::new(),
        Template::Elliptic => {
            if i + 1 >= n {
                return Err(Error::InvalidInput("elliptic outlet column needs Dirichlet data".into()));
            }
            vec![(i - 1, 1.0 / h2), (i, -2.0 / h2), (i + 1, 1.0 / h2)]
        }
        Template::Hyperbolic => match i {
            0 | 1 => {
                return Err(Error::InvalidInput(format!(
                    "hyperbolic column {i} too close to the inlet; refine the grid"
                )))
            }
            2 => vec![(0, 1.0 / h2), (1, -2.0 / h2), (2, 1.0 / h2)],
            _ => vec![(i - 3, -1.0 / h2), (i - 2, 4.0 / h2), (i - 1, -5.0 / h2), (i, 2.0 / h2)],
        },
    })
}

/// Upwinded first-derivative stencil in `x₁` at column `i`.
fn d1(spec: &MixedOperatorSpec, i: usize) -> Vec<(usize, f64)> {
    let h = spec.domain.hx();
    let n = spec.domain.nx;
    let backward = spec.template(i) != Template::Elliptic || spec.beta1[i] <= 0.0 || i + 1 >= n;
    if backward {
        if i >= 2 {
            vec![(i - 2, 0.5 / h), (i - 1, -2.0 / h), (i, 1.5 / h)]
        } else {
            vec![(i - 1, -1.0 / h), (i, 1.0 / h)]
        }
    } else if i + 2 < n {
        vec![(i, -1.5 / h), (i + 1, 2.0 / h), (i + 2, -0.5 / h)]
    } else {
        vec![(i, -1.0 / h), (i + 1, 1.0 / h)]
    }
}

/// Assembles the discrete system. Returns the matrix and right-hand side.
fn assemble(spec: &MixedOperatorSpec, f: &[f64], bc: &BoundaryData2D) -> Result<(SparseSystem, Vec<f64>)> {
    let d = spec.domain;
    let (nx, ny) = (d.nx, d.ny);
    let hy2 = d.hy().powi(2);
    let mut a = SparseSystem::new(nx * ny);
    let mut rhs = vec![0.0; nx * ny];

    for j in 0..ny {
        let k = d.idx(0, j);
        let x2 = d.x2(j);
        match bc.inlet_kind {
            InletKind::Value => {
                a.add(k, k, 1.0);
                rhs[k] = bc.inlet.cos_series(x2);
            }
            InletKind::Tangential => {
                a.add(k, k, 1.0);
                rhs[k] = bc.inlet.sin_series_integral(x2);
            }
            InletKind::Normal => {
                let h = d.hx();
                a.add(k, k, -1.5 / h);
                a.add(k, d.idx(1, j), 2.0 / h);
                a.add(k, d.idx(2, j), -0.5 / h);
                rhs[k] = bc.inlet.cos_series(x2);
            }
        }
    }

    let outlet_dirichlet = spec.template(nx - 1) == Template::Elliptic;
    let last_pde = if outlet_dirichlet { nx - 1 } else { nx };
    for i in 1..last_pde {
        let s11 = d11(spec, i)?;
        let s1 = d1(spec, i);
        for j in 0..ny {
            let k = d.idx(i, j);
            for &(ii, w) in &s11 {
                a.add(k, d.idx(ii, j), spec.alpha11[i] * w);
            }
            for &(ii, w) in &s1 {
                a.add(k, d.idx(ii, j), spec.beta1[i] * w);
            }
            // Walls: ∂₂w = 0 through a mirrored ghost node.
            let (jm, jp) = match j {
                0 => (1, 1),
                _ if j + 1 == ny => (ny - 2, ny - 2),
                _ => (j - 1, j + 1),
            };
            a.add(k, d.idx(i, jm), 1.0 / hy2);
            a.add(k, d.idx(i, jp), 1.0 / hy2);
            a.add(k, k, -2.0 / hy2);
            rhs[k] = f[k];
        }
    }
    if outlet_dirichlet {
        for j in 0..ny {
            let k = d.idx(nx - 1, j);
            a.add(k, k, 1.0);
            rhs[k] = bc.outlet.as_ref().map_or(0.0, |o| o.cos_series(d.x2(j)));
        }
    }
    Ok((a, rhs))
}

/// Solves `L w = f` with the given boundary data.
///
/// `f` holds nodal values, `f[i * ny + j]`; its values on the inlet (and a
/// Dirichlet outlet) are ignored.
pub fn solve_linear(spec: &MixedOperatorSpec, f: &[f64], bc: &BoundaryData2D, opts: &MixedOptions) -> Result<Field2D> {
    let d = spec.domain;
    let n = d.nx * d.ny;
    if f.len() != n {
        return Err(Error::InvalidInput(format!("source has {} values, grid has {n}", f.len())));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite source value".into()));
    }
    let elliptic_outlet = spec.template(d.nx - 1) == Template::Elliptic;
    match (elliptic_outlet, &bc.outlet) {
        (true, None) => {
            return Err(Error::InvalidInput(
                "the outlet lies in the elliptic region and needs Dirichlet data".into(),
            ))
        }
        (false, Some(_)) => {
            return Err(Error::InvalidInput(
                "no outlet condition may be imposed on a hyperbolic outlet".into(),
            ))
        }
        _ => {}
    }
    if bc.inlet_kind == InletKind::Tangential && bc.inlet.constant != 0.0 {
        return Err(Error::InvalidInput(
            "tangential inlet data must vanish at the walls (constant term must be 0)".into(),
        ));
    }

    let (a, rhs) = assemble(spec, f, bc)?;

    // Without any Dirichlet row every row annihilates constants.
    let ones = vec![1.0; n];
    let a_norm = a.norm_inf();
    let defect = a.apply(&ones).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if defect <= 1e-12 * a_norm {
        return Err(Error::Singular {
            reason: "constants are in the kernel (no condition fixes the level of w)".into(),
            near_null: vec![1.0 / (n as f64).sqrt(); n],
        });
    }

    let w = a.solve(&rhs)?;
    let res = a.residual(&w, &rhs);
    let w_norm = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let b_norm = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rel = if res == 0.0 { 0.0 } else { res / (a_norm * w_norm + b_norm) };
    if rel > opts.residual_tol {
        return Err(Error::NotConverged { iterations: 1, residual: rel });
    }

    let mut meta = SolveMeta { iterations: 1, history: vec![rel], residual: rel, ..SolveMeta::default() };
    if !spec.kz_holds() {
        meta.unreliable = true;
        meta.notes.push(format!("sign condition fails on the sampled coefficients (margin {:e})", spec.kz_margin));
    }
    let x: Vec<f64> = (0..d.nx).map(|i| d.x1(i)).collect();
    let eta: Vec<f64> = (0..d.ny).map(|j| j as f64 / (d.ny - 1) as f64).collect();
    Ok(Field2D { x, eta, bottom: vec![-1.0; d.nx], top: vec![1.0; d.nx], values: w, meta })
}

/// `w* = cos(πx₂) g(x₁)` with `g = 1 + x₁/2 + sin 3x₁`, its source `L w*`
/// evaluated with the sampled coefficients, and matching inlet values.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedProblem {
    pub source: Vec<f64>,
    pub exact: Vec<f64>,
    pub bc: BoundaryData2D,
}

pub fn manufactured_problem(spec: &MixedOperatorSpec) -> ManufacturedProblem {
    let g = |x: f64| [1.0 + 0.5 * x + (3.0 * x).sin(), 0.5 + 3.0 * (3.0 * x).cos(), -9.0 * (3.0 * x).sin()];
    let d = spec.domain;
    let mut source = vec![0.0; d.nx * d.ny];
    let mut exact = vec![0.0; d.nx * d.ny];
    for i in 0..d.nx {
        let [g0, g1, g2] = g(d.x1(i));
        for j in 0..d.ny {
            let c = (PI * d.x2(j)).cos();
            let k = d.idx(i, j);
            exact[k] = g0 * c;
            source[k] = (spec.alpha11[i] * g2 + spec.beta1[i] * g1 - PI * PI * g0) * c;
        }
    }
    // cos(πx₂) = -cos(2·π(x₂+1)/2)
    let bc = BoundaryData2D {
        inlet_kind: InletKind::Value,
        inlet: ModalData { constant: 0.0, modes: vec![0.0, -g(0.0)[0]] },
        outlet: None,
    };
    ManufacturedProblem { source, exact, bc }
}

/// Reference solution of the `x₂`-independent problem `α₁₁w'' + β₁w' = f`,
/// `w(0) = w0`, on `[0, length]`, evaluated at `xs`.
///
/// `v = w'` solves `α₁₁v' + β₁v = f`. The bounded solution passes through
/// `v(l_s) = f/β₁` with slope `(f' - β₁'v)/(α₁₁' + β₁)`; it is continued
/// from `l_s ± δ` in both directions with an adaptive Runge-Kutta method,
/// coefficients taken directly from the profile.
pub fn reduced_ode_reference(
    params: &GasParams,
    profile: &Profile1D,
    length: f64,
    w0: f64,
    f: impl Fn(f64) -> f64,
    xs: &[f64],
) -> Result<Vec<f64>> {
    use crate::numerics::ode::{self, OdeOptions};
    let ls = profile.l_s.ok_or(Error::NoSonicCrossing)?;
    let (lo, hi) = profile.x_range();
    if lo > 0.0 || hi < length || !(ls > 0.0 && ls < length) {
        return Err(Error::InvalidInput(format!("need 0 < l_s = {ls} < {length} inside [{lo}, {hi}]")));
    }
    let coef = |x: f64| kz_coefficients(params, profile, x).unwrap_or((f64::NAN, f64::NAN));
    let e = 1e-5;
    let (_, b) = coef(ls);
    let (ap, bp) = {
        let (a1, b1) = coef(ls + e);
        let (a0, b0) = coef(ls - e);
        ((a1 - a0) / (2.0 * e), (b1 - b0) / (2.0 * e))
    };
    let fp = (f(ls + e) - f(ls - e)) / (2.0 * e);
    let vs = f(ls) / b;
    let dvs = (fp - bp * vs) / (ap + b);
    let delta = 1e-6;
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-14, h_max: 1e-2 * length, ..OdeOptions::default() };

    // State (v, W) with W' = v and W(l_s) = 0; s = ±1 orients the march.
    let run = |s: f64, span: f64| {
        let rhs = |t: f64, y: &[f64; 2]| {
            let x = ls + s * t;
            let (a, b) = coef(x);
            [s * (f(x) - b * y[0]) / a, s * y[0]]
        };
        let y0 = [vs + s * delta * dvs, s * delta * vs + 0.5 * delta * delta * dvs];
        ode::integrate(rhs, delta, y0, span, &opts, &mut [])
    };
    let back = run(-1.0, ls)?;
    let fwd = run(1.0, length - ls)?;
    let w_at = |x: f64| -> f64 {
        let (tr, t) = if x < ls { (&back, ls - x) } else { (&fwd, x - ls) };
        if t <= delta {
            return (x - ls) * vs;
        }
        let k = tr.nodes.partition_point(|n| n.t < t).clamp(1, tr.nodes.len() - 1);
        ode::hermite(&tr.nodes[k - 1], &tr.nodes[k], t)[1]
    };
    let w_inlet = w_at(0.0);
    Ok(xs.iter().map(|&x| w0 + w_at(x) - w_inlet).collect())
}

/// One-sided mismatches across the sonic line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub l_s: Option<f64>,
    /// `max_{x₂} |w⁻ - w⁺| / max|w|`.
    pub w: f64,
    /// `max_{x₂} |∂₁w⁻ - ∂₁w⁺| / max|∂₁w|`.
    pub dw: f64,
    /// `max_{x₂} |∂₁₁w⁻ - ∂₁₁w⁺| / max|∂₁₁w|`.
    pub d2w: f64,
    /// Nodes used on each side.
    pub stencil: usize,
}

/// Extrapolates `w`, `∂₁w`, `∂₁₁w` to `x₁ = l_s` by cubic interpolation of
/// the four nearest nodes strictly on each side and compares the limits.
/// Normalization uses the largest nodal values of the respective quantity
/// (differences computed by centered or one-sided second-order formulas).
pub fn sonic_smoothness_diag(field: &Field2D, spec: &MixedOperatorSpec) -> SmoothnessReport {
    let zero = |stencil| SmoothnessReport { l_s: spec.l_s, w: 0.0, dw: 0.0, d2w: 0.0, stencil };
    let Some(ls) = spec.l_s.filter(|l| *l > 0.0 && *l < spec.domain.length) else {
        return zero(0);
    };
    let nx = field.nx();
    let left: Vec<usize> = (0..nx).filter(|&i| field.x[i] < ls - SONIC_SNAP).collect();
    let right: Vec<usize> = (0..nx).filter(|&i| field.x[i] > ls + SONIC_SNAP).collect();
    let m = 4.min(left.len()).min(right.len());
    if m < 3 {
        return zero(m);
    }
    let left = &left[left.len() - m..];
    let right = &right[..m];

    let (mut sw, mut s1, mut s2) = (0.0f64, 0.0f64, 0.0f64);
    let h = field.x[1] - field.x[0];
    for j in 0..field.ny() {
        let col: Vec<f64> = (0..nx).map(|i| field.at(i, j)).collect();
        for i in 0..nx {
            sw = sw.max(col[i].abs());
            let (d1, d2) = if i == 0 {
                ((-1.5 * col[0] + 2.0 * col[1] - 0.5 * col[2]) / h, (col[0] - 2.0 * col[1] + col[2]) / (h * h))
            } else if i + 1 == nx {
                (
                    (1.5 * col[i] - 2.0 * col[i - 1] + 0.5 * col[i - 2]) / h,
                    (col[i] - 2.0 * col[i - 1] + col[i - 2]) / (h * h),
                )
            } else {
                ((col[i + 1] - col[i - 1]) / (2.0 * h), (col[i + 1] - 2.0 * col[i] + col[i - 1]) / (h * h))
            };
            s1 = s1.max(d1.abs());
            s2 = s2.max(d2.abs());
        }
    }
    let mut rep = zero(m);
    if sw == 0.0 {
        return rep;
    }
    for j in 0..field.ny() {
        let side = |nodes: &[usize]| {
            let xs: Vec<f64> = nodes.iter().map(|&i| field.x[i]).collect();
            let ys: Vec<f64> = nodes.iter().map(|&i| field.at(i, j)).collect();
            lagrange_derivs(&xs, &ys, ls)
        };
        let l = side(left);
        let r = side(right);
        rep.w = rep.w.max((l[0] - r[0]).abs() / sw);
        if s1 > 0.0 {
            rep.dw = rep.dw.max((l[1] - r[1]).abs() / s1);
        }
        if s2 > 0.0 {
            rep.d2w = rep.d2w.max((l[2] - r[2]).abs() / s2);
        }
    }
    rep
}

/// Value, first and second derivative at `x` of the interpolant through
/// `(xs, ys)`.
fn lagrange_derivs(xs: &[f64], ys: &[f64], x: f64) -> [f64; 3] {
    let n = xs.len();
    let mut out = [0.0; 3];
    for k in 0..n {
        let denom: f64 = (0..n).filter(|&m| m != k).map(|m| xs[k] - xs[m]).product();
        let others: Vec<f64> = (0..n).filter(|&m| m != k).map(|m| x - xs[m]).collect();
        let p: f64 = others.iter().product();
        let mut dp = 0.0;
        let mut d2p = 0.0;
        for a in 0..others.len() {
            dp += others.iter().enumerate().filter(|(b, _)| *b != a).map(|(_, v)| v).product::<f64>();
            for b in 0..others.len() {
                if b != a {
                    d2p += others
                        .iter()
                        .enumerate()
                        .filter(|(c, _)| *c != a && *c != b)
                        .map(|(_, v)| v)
                        .product::<f64>();
                }
            }
        }
        out[0] += ys[k] * p / denom;
        out[1] += ys[k] * dp / denom;
        out[2] += ys[k] * d2p / denom;
    }
    out
}

#[cfg(test)]
mod tests;
