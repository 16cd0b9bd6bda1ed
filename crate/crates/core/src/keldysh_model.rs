//! Finite-difference solver for the degenerate model equation
//!
//! ```text
//! (2x - aψ_x + O₁)ψ_xx + O₂ψ_xy + (b + O₃)ψ_yy - (1 + O₄)ψ_x + O₅ψ_y = 0
//! ```
//!
//! on `Q = {0 < x < ε₀, 0 < y < f(x)}` with `ψ = 0` on `x = 0`, `ψ_y = 0` on
//! `y = 0` and `β₁ψ_x + β₂ψ_y + ψ = h` on `y = f(x)`. The right side
//! `x = ε₀` carries Dirichlet data.
//!
//! The domain is mapped to a rectangle by `η = y/f(x)`. The grid is graded as
//! `x_i = ε₀ (i/N)^q`. The principal coefficient is frozen at the previous
//! iterate (Picard), clamped below by `δ·2x`, and updates are under-relaxed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field2D, SolveMeta};
use crate::io::svg;
use crate::numerics::sparse::SparseSystem;
use crate::numerics::spline::CubicSpline;

/// Shape of the top boundary `y = f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TopShape {
    /// `f(x) = Σ c_k x^k`.
    Polynomial { coeffs: Vec<f64> },
    /// Natural cubic spline through samples covering `[0, ε₀]`.
    Samples { x: Vec<f64>, f: Vec<f64> },
}

#[derive(Debug, Clone)]
enum Shape {
    Poly(Vec<f64>),
    Spline(CubicSpline),
}

#[derive(Debug, Clone)]
pub struct KeldyshDomain {
    eps0: f64,
    omega: f64,
    shape: Shape,
}

impl KeldyshDomain {
    /// Validates `f(0) > 0`, `f' ≥ ω > 0` and bounded second differences on
    /// a fine sample of `[0, ε₀]`.
    pub fn new(eps0: f64, top: &TopShape, omega: f64) -> Result<Self> {
        if !(eps0.is_finite() && eps0 > 0.0) {
            return Err(Error::InvalidInput(format!("eps0 must be > 0, got {eps0}")));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidInput(format!("omega must be > 0, got {omega}")));
        }
        let shape = match top {
            TopShape::Polynomial { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidInput("polynomial boundary needs finite coefficients".into()));
                }
                Shape::Poly(coeffs.clone())
            }
            TopShape::Samples { x, f } => {
                let s = CubicSpline::new(x, f)?;
                let (lo, hi) = s.domain();
                if lo > 0.0 || hi < eps0 {
                    return Err(Error::InvalidInput(format!(
                        "boundary samples cover [{lo}, {hi}], need [0, {eps0}]"
                    )));
                }
                Shape::Spline(s)
            }
        };
        let d = Self { eps0, omega, shape };
        let (f0, _, _) = d.f(0.0);
        if !(f0 > 0.0) {
            return Err(Error::InvalidInput(format!("f(0) must be > 0, got {f0}")));
        }
        let n = 512;
        let mut prev_slope: Option<f64> = None;
        for k in 0..=n {
            let x = eps0 * k as f64 / n as f64;
            let (v, dv, ddv) = d.f(x);
            if !(v > 0.0) || !ddv.is_finite() {
                return Err(Error::InvalidInput(format!("f must stay positive and C^{{1,1}}; f({x}) = {v}")));
            }
            if dv < omega {
                return Err(Error::InvalidInput(format!("df/dx = {dv} < omega = {omega} at x = {x}")));
            }
            prev_slope = Some(dv);
        }
        debug_assert!(prev_slope.is_some());
        Ok(d)
    }

    /// `f(x) = 1 + x`, `ε₀`, `ω = 1`.
    pub fn affine(eps0: f64) -> Result<Self> {
        Self::new(eps0, &TopShape::Polynomial { coeffs: vec![1.0, 1.0] }, 1.0)
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `(f, f', f'')` at `x`.
    pub fn f(&self, x: f64) -> (f64, f64, f64) {
        match &self.shape {
            Shape::Poly(c) => {
                let (mut v, mut d, mut dd) = (0.0, 0.0, 0.0);
                for &ck in c.iter().rev() {
                    dd = dd * x + 2.0 * d;
                    d = d * x + v;
                    v = v * x + ck;
                }
                (v, d, dd)
            }
            Shape::Spline(s) => s.eval(x),
        }
    }
}

/// Perturbation term `amplitude · x^x_power · cos(y_freq · y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OTerm {
    pub amplitude: f64,
    pub x_power: f64,
    pub y_freq: f64,
}

impl OTerm {
    pub const ZERO: OTerm = OTerm { amplitude: 0.0, x_power: 2.0, y_freq: 0.0 };

    pub fn new(amplitude: f64, x_power: f64, y_freq: f64) -> Self {
        Self { amplitude, x_power, y_freq }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * x.powf(self.x_power) * (self.y_freq * y).cos()
    }

    /// `(∂_x, ∂_y)`.
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        if self.amplitude == 0.0 {
            return (0.0, 0.0);
        }
        let c = (self.y_freq * y).cos();
        let s = (self.y_freq * y).sin();
        (
            self.amplitude * self.x_power * x.powf(self.x_power - 1.0) * c,
            -self.amplitude * x.powf(self.x_power) * self.y_freq * s,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeldyshCoefficients {
    pub a: f64,
    pub b: f64,
    /// `O₁ … O₅`.
    pub o: [OTerm; 5],
    pub beta1: f64,
    pub beta2: f64,
    pub lambda: f64,
}

impl KeldyshCoefficients {
    /// No perturbations, `β = (1, 0)`, `λ = 1`.
    pub fn unperturbed(a: f64, b: f64) -> Self {
        Self { a, b, o: [OTerm::ZERO; 5], beta1: 1.0, beta2: 0.0, lambda: 1.0 }
    }

    /// Checks `a, b > 0`, `β₁ ≥ λ`, `|β₂| ≤ 1/λ` and the growth bounds of
    /// the perturbations by sampling; returns the measured bound constant `N`.
    pub fn validate(&self, domain: &KeldyshDomain) -> Result<f64> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be > 0, got {v}")))
            }
        };
        pos("a", self.a)?;
        pos("b", self.b)?;
        pos("lambda", self.lambda)?;
        if self.beta1 < self.lambda || !self.beta1.is_finite() {
            return Err(Error::InvalidInput(format!("beta1 = {} must be >= lambda = {}", self.beta1, self.lambda)));
        }
        if !(self.beta2.abs() <= 1.0 / self.lambda) {
            return Err(Error::InvalidInput(format!("|beta2| = {} exceeds 1/lambda", self.beta2.abs())));
        }
        for (k, o) in self.o.iter().enumerate() {
            let min_power = if k == 0 { 2.0 } else { 1.0 };
            if o.amplitude != 0.0 && !(o.x_power >= min_power) {
                return Err(Error::InvalidInput(format!(
                    "O{} must vanish like x^{min_power} at x = 0, got power {}",
                    k + 1,
                    o.x_power
                )));
            }
            if !(o.amplitude.is_finite() && o.x_power.is_finite() && o.y_freq.is_finite()) {
                return Err(Error::InvalidInput(format!("O{} has non-finite parameters", k + 1)));
            }
        }
        let mut n_bound: f64 = 0.0;
        let samples = 64;
        for ix in 1..=samples {
            let x = domain.eps0() * ix as f64 / samples as f64;
            let top = domain.f(x).0;
            for iy in 0..=samples {
                let y = top * iy as f64 / samples as f64;
                for (k, o) in self.o.iter().enumerate() {
                    let v = o.value(x, y).abs();
                    let (gx, gy) = o.gradient(x, y);
                    let g = gx.hypot(gy);
                    let (vb, gb) = if k == 0 { (v / (x * x), g / x) } else { (v / x, g) };
                    n_bound = n_bound.max(vb).max(gb);
                }
            }
        }
        Ok(n_bound)
    }
}

/// Data `h(x)` of the oblique condition on the top boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopData {
    Homogeneous,
    /// The trace `β₁x/a + x²/(2a)` of `ψ = x²/(2a)`.
    QuadraticTrace,
    /// `h(x) = linear·x + quadratic·x²`.
    Polynomial { linear: f64, quadratic: f64 },
}

/// Dirichlet data on `x = ε₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RightData {
    Constant { value: f64 },
    /// `value · (1 - η²)`: even in `y` and vanishing at the top corner, which
    /// keeps it compatible with the symmetry and oblique conditions.
    Tapered { value: f64 },
}

impl RightData {
    pub fn at(&self, eta: f64) -> f64 {
        match *self {
            RightData::Constant { value } => value,
            RightData::Tapered { value } => value * (1.0 - eta * eta),
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            RightData::Constant { value } | RightData::Tapered { value } => value.is_finite(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeldyshBoundary {
    pub right: RightData,
    pub top: TopData,
}

impl KeldyshBoundary {
    /// Data compatible with the exact solution `ψ = x²/(2a)`.
    pub fn manufactured(eps0: f64, a: f64) -> Self {
        Self { right: RightData::Constant { value: eps0 * eps0 / (2.0 * a) }, top: TopData::QuadraticTrace }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    Zero,
    /// `ψ = g(η) · (x/ε₀)²` with `g` the right-side data.
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeldyshOptions {
    /// Cells in x.
    pub nx: usize,
    /// Cells in the normalized transverse direction.
    pub ny: usize,
    pub grading: f64,
    pub damping: f64,
    pub max_iterations: usize,
    /// Relative tolerance on the fixed-point update.
    pub tolerance: f64,
    /// Lower bound of the principal coefficient relative to `2x`.
    pub clamp: f64,
    /// Consecutive non-decreasing iterations before divergence is declared.
    pub patience: usize,
    pub initial: InitialGuess,
}

impl Default for KeldyshOptions {
    fn default() -> Self {
        Self {
            nx: 64,
            ny: 64,
            grading: 2.0,
            damping: 0.5,
            max_iterations: 400,
            tolerance: 1e-10,
            clamp: 1e-3,
            patience: 20,
            initial: InitialGuess::Zero,
        }
    }
}

/// A solved field with the geometry needed for derivative diagnostics.
#[derive(Debug, Clone)]
pub struct KeldyshSolution {
    pub field: Field2D,
    pub a: f64,
    pub domain: KeldyshDomain,
    /// `f'` and `f''` at the x nodes.
    pub slope: Vec<f64>,
    pub curvature: Vec<f64>,
    /// Nodes where the clamp was active in the returned iterate.
    pub clamped_nodes: usize,
}

struct Grid {
    x: Vec<f64>,
    f: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    deta: f64,
    nx: usize,
    ny: usize,
}

impl Grid {
    fn new(domain: &KeldyshDomain, opts: &KeldyshOptions) -> Self {
        let x: Vec<f64> = (0..=opts.nx)
            .map(|i| domain.eps0() * (i as f64 / opts.nx as f64).powf(opts.grading))
            .collect();
        let (mut f, mut f1, mut f2) = (Vec::new(), Vec::new(), Vec::new());
        for &xi in &x {
            let (a, b, c) = domain.f(xi);
            f.push(a);
            f1.push(b);
            f2.push(c);
        }
        Self { x, f, f1, f2, deta: 1.0 / opts.ny as f64, nx: opts.nx, ny: opts.ny }
    }

    fn k(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    fn eta(&self, j: usize) -> f64 {
        j as f64 * self.deta
    }

    fn hm(&self, i: usize) -> f64 {
        self.x[i] - self.x[i - 1]
    }

    fn hp(&self, i: usize) -> f64 {
        self.x[i + 1] - self.x[i]
    }

    /// Weights of the centered first derivative at interior node `i`.
    fn d1(&self, i: usize) -> [f64; 3] {
        let (hm, hp) = (self.hm(i), self.hp(i));
        [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))]
    }

    /// Backward first derivative at `i ≥ 1`: second order from `i = 2`.
    fn backward(&self, i: usize) -> Vec<(usize, f64)> {
        if i == 1 {
            let h = self.hm(1);
            return vec![(0, -1.0 / h), (1, 1.0 / h)];
        }
        let (h1, h2) = (self.hm(i), self.hm(i - 1));
        vec![
            (i, (2.0 * h1 + h2) / (h1 * (h1 + h2))),
            (i - 1, -(h1 + h2) / (h1 * h2)),
            (i - 2, h1 / (h2 * (h1 + h2))),
        ]
    }

    /// Weights of the second derivative at interior node `i`.
    fn d2(&self, i: usize) -> [f64; 3] {
        let (hm, hp) = (self.hm(i), self.hp(i));
        [2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))]
    }

    /// `Ψ_η` at `(i, j)`: centered, zero on the symmetry line, second-order backward on top.
    fn d_eta(&self, v: &[f64], i: usize, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else if j == self.ny {
            (3.0 * v[self.k(i, j)] - 4.0 * v[self.k(i, j - 1)] + v[self.k(i, j - 2)]) / (2.0 * self.deta)
        } else {
            (v[self.k(i, j + 1)] - v[self.k(i, j - 1)]) / (2.0 * self.deta)
        }
    }

    fn d_etaeta(&self, v: &[f64], i: usize, j: usize) -> f64 {
        let h2 = self.deta * self.deta;
        if j == 0 {
            2.0 * (v[self.k(i, 1)] - v[self.k(i, 0)]) / h2
        } else if j == self.ny {
            (2.0 * v[self.k(i, j)] - 5.0 * v[self.k(i, j - 1)] + 4.0 * v[self.k(i, j - 2)] - v[self.k(i, j - 3)]) / h2
        } else {
            (v[self.k(i, j + 1)] - 2.0 * v[self.k(i, j)] + v[self.k(i, j - 1)]) / h2
        }
    }

    /// `Ψ_x` at `(i, j)`: centered inside, second-order one-sided at the ends.
    fn d_x(&self, v: &[f64], i: usize, j: usize) -> f64 {
        if i == 0 {
            let (h1, h2) = (self.x[1] - self.x[0], self.x[2] - self.x[1]);
            let w = [-(2.0 * h1 + h2) / (h1 * (h1 + h2)), (h1 + h2) / (h1 * h2), -h1 / (h2 * (h1 + h2))];
            w[0] * v[self.k(0, j)] + w[1] * v[self.k(1, j)] + w[2] * v[self.k(2, j)]
        } else if i == self.nx {
            let n = self.nx;
            let (h1, h2) = (self.x[n] - self.x[n - 1], self.x[n - 1] - self.x[n - 2]);
            let w = [(2.0 * h1 + h2) / (h1 * (h1 + h2)), -(h1 + h2) / (h1 * h2), h1 / (h2 * (h1 + h2))];
            w[0] * v[self.k(n, j)] + w[1] * v[self.k(n - 1, j)] + w[2] * v[self.k(n - 2, j)]
        } else {
            let w = self.d1(i);
            w[0] * v[self.k(i - 1, j)] + w[1] * v[self.k(i, j)] + w[2] * v[self.k(i + 1, j)]
        }
    }

    /// `(η_x, η_xx)` at `(i, j)`.
    fn eta_derivs(&self, i: usize, j: usize) -> (f64, f64) {
        let (f, f1, f2) = (self.f[i], self.f1[i], self.f2[i]);
        let eta = self.eta(j);
        (-eta * f1 / f, 2.0 * eta * f1 * f1 / (f * f) - eta * f2 / f)
    }

    /// Physical `ψ_x` at every node.
    fn psi_x(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for i in 0..=self.nx {
            for j in 0..=self.ny {
                let (ex, _) = self.eta_derivs(i, j);
                out[self.k(i, j)] = self.d_x(v, i, j) + ex * self.d_eta(v, i, j);
            }
        }
        out
    }

    /// Physical `ψ_xx` at every node with `0 < i < nx` (NaN on the vertical sides).
    fn psi_xx(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![f64::NAN; v.len()];
        for i in 1..self.nx {
            let w2 = self.d2(i);
            let w1 = self.d1(i);
            for j in 0..=self.ny {
                let (ex, exx) = self.eta_derivs(i, j);
                let pxx = w2[0] * v[self.k(i - 1, j)] + w2[1] * v[self.k(i, j)] + w2[2] * v[self.k(i + 1, j)];
                let pxe = w1[0] * self.d_eta(v, i - 1, j) + w1[1] * self.d_eta(v, i, j) + w1[2] * self.d_eta(v, i + 1, j);
                out[self.k(i, j)] =
                    pxx + 2.0 * ex * pxe + ex * ex * self.d_etaeta(v, i, j) + exx * self.d_eta(v, i, j);
            }
        }
        out
    }
}

fn top_data(bc: &KeldyshBoundary, coeffs: &KeldyshCoefficients, x: f64) -> f64 {
    match bc.top {
        TopData::Homogeneous => 0.0,
        TopData::QuadraticTrace => coeffs.beta1 * x / coeffs.a + x * x / (2.0 * coeffs.a),
        TopData::Polynomial { linear, quadratic } => linear * x + quadratic * x * x,
    }
}

/// Assembles the linear system with the principal coefficient frozen at
/// `psi_x_old`. Returns the system, right-hand side and the clamp count.
fn assemble(
    g: &Grid,
    c: &KeldyshCoefficients,
    bc: &KeldyshBoundary,
    psi_x_old: &[f64],
    clamp: Option<f64>,
) -> (SparseSystem, Vec<f64>, usize) {
    let n = (g.nx + 1) * (g.ny + 1);
    let mut sys = SparseSystem::new(n);
    let mut rhs = vec![0.0; n];
    let mut clamped = 0;
    let de = g.deta;
    for i in 0..=g.nx {
        for j in 0..=g.ny {
            let row = g.k(i, j);
            if i == 0 {
                sys.add(row, row, 1.0);
                continue;
            }
            if i == g.nx {
                sys.add(row, row, 1.0);
                rhs[row] = bc.right.at(g.eta(j));
                continue;
            }
            let (f, f1) = (g.f[i], g.f1[i]);
            let (ex, exx) = g.eta_derivs(i, j);
            let w1 = g.d1(i);
            if j == g.ny {
                // β₁(Ψ_x + η_x Ψ_η) + β₂Ψ_η/f + Ψ = h. Along the boundary row the
                // condition transports data from x = 0, so Ψ_x is one-sided backward.
                let ce = c.beta1 * ex + c.beta2 / f;
                for (di, w) in g.backward(i) {
                    sys.add(row, g.k(di, j), c.beta1 * w);
                }
                sys.add(row, g.k(i, j), 1.0 + ce * 3.0 / (2.0 * de));
                sys.add(row, g.k(i, j - 1), -ce * 4.0 / (2.0 * de));
                sys.add(row, g.k(i, j - 2), ce / (2.0 * de));
                rhs[row] = top_data(bc, c, g.x[i]);
                continue;
            }
            let x = g.x[i];
            let y = g.eta(j) * f;
            let o: Vec<f64> = c.o.iter().map(|t| t.value(x, y)).collect();
            let mut a_coef = 2.0 * x - c.a * psi_x_old[row] + o[0];
            if let Some(delta) = clamp {
                let floor = delta * 2.0 * x;
                if a_coef < floor {
                    a_coef = floor;
                    clamped += 1;
                }
            }
            let c_xe = 2.0 * a_coef * ex + o[1] / f;
            let c_ee = a_coef * ex * ex + o[1] * ex / f + (c.b + o[2]) / (f * f);
            let c_e = a_coef * exx - o[1] * f1 / (f * f) - (1.0 + o[3]) * ex + o[4] / f;
            let c_x = -(1.0 + o[3]);

            let w2 = g.d2(i);
            for (di, w) in [(i - 1, w2[0]), (i, w2[1]), (i + 1, w2[2])] {
                sys.add(row, g.k(di, j), a_coef * w);
            }
            // Centered first derivative where the stencil stays monotone, upwind otherwise.
            let (hm, hp) = (g.hm(i), g.hp(i));
            if 2.0 * a_coef >= c_x.abs() * hm.max(hp) {
                for (di, w) in [(i - 1, w1[0]), (i, w1[1]), (i + 1, w1[2])] {
                    sys.add(row, g.k(di, j), c_x * w);
                }
            } else if c_x <= 0.0 {
                sys.add(row, g.k(i, j), c_x / hm);
                sys.add(row, g.k(i - 1, j), -c_x / hm);
            } else {
                sys.add(row, g.k(i + 1, j), c_x / hp);
                sys.add(row, g.k(i, j), -c_x / hp);
            }
            let h2 = de * de;
            if j == 0 {
                // Mirror ghost across the symmetry line: odd η-derivatives vanish.
                sys.add(row, g.k(i, 1), 2.0 * c_ee / h2);
                sys.add(row, g.k(i, 0), -2.0 * c_ee / h2);
            } else {
                sys.add(row, g.k(i, j + 1), c_ee / h2 + c_e / (2.0 * de));
                sys.add(row, g.k(i, j), -2.0 * c_ee / h2);
                sys.add(row, g.k(i, j - 1), c_ee / h2 - c_e / (2.0 * de));
                for (di, w) in [(i - 1, w1[0]), (i, w1[1]), (i + 1, w1[2])] {
                    sys.add(row, g.k(di, j + 1), c_xe * w / (2.0 * de));
                    sys.add(row, g.k(di, j - 1), -c_xe * w / (2.0 * de));
                }
            }
        }
    }
    (sys, rhs, clamped)
}

fn validate_options(opts: &KeldyshOptions) -> Result<()> {
    let ok = opts.nx >= 4
        && opts.ny >= 3
        && opts.grading >= 1.0
        && opts.grading.is_finite()
        && opts.damping > 0.0
        && opts.damping <= 1.0
        && opts.max_iterations >= 1
        && opts.tolerance > 0.0
        && opts.clamp > 0.0
        && opts.clamp < 1.0
        && opts.patience >= 1;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("invalid Keldysh solver options {opts:?}")))
    }
}

/// Solves the model problem by damped Picard iteration.
pub fn solve_model(
    domain: &KeldyshDomain,
    coeffs: &KeldyshCoefficients,
    bc: &KeldyshBoundary,
    opts: &KeldyshOptions,
) -> Result<KeldyshSolution> {
    coeffs.validate(domain)?;
    validate_options(opts)?;
    if !bc.right.is_finite() {
        return Err(Error::InvalidInput("right boundary value must be finite".into()));
    }
    let g = Grid::new(domain, opts);
    let n = (g.nx + 1) * (g.ny + 1);
    let mut psi = vec![0.0; n];
    if opts.initial == InitialGuess::Quadratic {
        for i in 0..=g.nx {
            for j in 0..=g.ny {
                psi[g.k(i, j)] = bc.right.at(g.eta(j)) * (g.x[i] / domain.eps0()).powi(2);
            }
        }
    }
    let mut meta = SolveMeta::default();
    let mut best = f64::INFINITY;
    let mut stall = 0;
    let mut converged = false;
    let mut clamped = 0;
    for it in 1..=opts.max_iterations {
        let px = g.psi_x(&psi);
        let (sys, rhs, cl) = assemble(&g, coeffs, bc, &px, Some(opts.clamp));
        clamped = cl;
        let new = sys.solve(&rhs)?;
        let update = new.iter().zip(&psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = new.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let rel = if scale > 0.0 { update / scale } else { update };
        meta.history.push(rel);
        meta.iterations = it;
        if !rel.is_finite() {
            return Err(Error::Diverged { iterations: it, residual: rel });
        }
        if rel <= opts.tolerance {
            psi = new;
            converged = true;
            break;
        }
        for (p, q) in psi.iter_mut().zip(&new) {
            *p += opts.damping * (q - *p);
        }
        if rel < best {
            best = rel;
            stall = 0;
        } else {
            stall += 1;
            if stall >= opts.patience {
                // Updates that stall within a few hundred ulps of the tolerance
                // are round-off, not divergence.
                if best <= 1e3 * opts.tolerance {
                    converged = true;
                    meta.notes.push(format!("update stagnated at {best:e} above tolerance"));
                    break;
                }
                return Err(Error::Diverged { iterations: it, residual: rel });
            }
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            iterations: meta.iterations,
            residual: meta.history.last().copied().unwrap_or(f64::NAN),
        });
    }
    // Residual of the unclamped nonlinear discrete system at the returned iterate.
    let px = g.psi_x(&psi);
    let (sys, rhs, _) = assemble(&g, coeffs, bc, &px, None);
    let scale = psi.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    meta.residual = sys.residual(&psi, &rhs) / scale;
    if clamped > 0 {
        meta.unreliable = true;
        meta.notes.push(format!("ellipticity clamp active at {clamped} nodes in the final iterate"));
    }
    let field = Field2D {
        x: g.x.clone(),
        eta: (0..=g.ny).map(|j| g.eta(j)).collect(),
        bottom: vec![0.0; g.nx + 1],
        top: g.f.clone(),
        values: psi,
        meta,
    };
    Ok(KeldyshSolution {
        field,
        a: coeffs.a,
        domain: domain.clone(),
        slope: g.f1,
        curvature: g.f2,
        clamped_nodes: clamped,
    })
}

impl KeldyshSolution {
    fn grid(&self) -> Grid {
        let nx = self.field.nx() - 1;
        let ny = self.field.ny() - 1;
        Grid {
            x: self.field.x.clone(),
            f: self.field.top.clone(),
            f1: self.slope.clone(),
            f2: self.curvature.clone(),
            deta: 1.0 / ny as f64,
            nx,
            ny,
        }
    }

    /// Physical `ψ_x` at every node.
    pub fn psi_x(&self) -> Vec<f64> {
        self.grid().psi_x(&self.field.values)
    }

    /// Physical `ψ_xx` at every node (NaN on `x = 0` and `x = ε₀`).
    pub fn psi_xx(&self) -> Vec<f64> {
        self.grid().psi_xx(&self.field.values)
    }

    /// Bilinear interpolation in `(x, η)` of a nodal quantity at physical `(x, y)`.
    fn interpolate(&self, nodal: &[f64], x: f64, y: f64) -> Option<f64> {
        let f = &self.field;
        let i = f.x.partition_point(|&v| v <= x).checked_sub(1)?;
        if i + 1 >= f.nx() {
            return None;
        }
        let t = (x - f.x[i]) / (f.x[i + 1] - f.x[i]);
        let at_column = |ii: usize| -> Option<f64> {
            let eta = y / f.top[ii];
            if !(0.0..=1.0).contains(&eta) {
                // Just outside the curved boundary at the neighbouring column: clamp.
                if eta > 1.0 && eta < 1.0 + 1e-9 + (f.top[i + 1] - f.top[i]).abs() / f.top[ii] {
                    return Some(nodal[f.idx(ii, f.ny() - 1)]);
                }
                return None;
            }
            let m = f.ny() - 1;
            let s = eta * m as f64;
            let j = (s.floor() as usize).min(m - 1);
            let r = s - j as f64;
            Some((1.0 - r) * nodal[f.idx(ii, j)] + r * nodal[f.idx(ii, j + 1)])
        };
        let a = at_column(i)?;
        let b = at_column(i + 1)?;
        let v = (1.0 - t) * a + t * b;
        v.is_finite().then_some(v)
    }
}

/// `ψ_xx(x_k, y)` on `x_k = ε₀ 2^{-k}` with Richardson extrapolation to `x → 0⁺`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SonicTrace {
    pub y: f64,
    pub x: Vec<f64>,
    pub psi_xx: Vec<f64>,
    /// `2 v(x_{k+1}) - v(x_k)`, assuming an error linear in `x`.
    pub richardson: Vec<f64>,
    pub limit: f64,
    /// Difference of the last two Richardson estimates.
    pub change: f64,
    /// `y` lies within one cell of the corner `P₀`.
    pub corner_contaminated: bool,
}

/// Smallest node index at which a trace may sample: the first cells are
/// dominated by the one-sided treatment of the degenerate line.
const FIRST_TRUSTED_NODE: usize = 4;

fn dyadic_points(sol: &KeldyshSolution) -> Result<Vec<f64>> {
    let eps0 = *sol.field.x.last().expect("non-empty grid");
    let x_min = sol.field.x[FIRST_TRUSTED_NODE];
    let pts: Vec<f64> = (1..60).map(|k| eps0 * 0.5f64.powi(k)).take_while(|&x| x >= x_min).collect();
    if pts.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "grid grading resolves only {} dyadic points above x = {x_min:e}; refine or grade more strongly",
            pts.len()
        )));
    }
    Ok(pts)
}

fn richardson(v: &[f64]) -> (Vec<f64>, f64, f64) {
    let r: Vec<f64> = v.windows(2).map(|w| 2.0 * w[1] - w[0]).collect();
    let limit = *r.last().unwrap_or(&f64::NAN);
    let change = if r.len() >= 2 { (r[r.len() - 1] - r[r.len() - 2]).abs() } else { f64::NAN };
    (r, limit, change)
}

/// Traces `ψ_xx` toward the degenerate line at the given heights.
pub fn sonic_derivative_scan(sol: &KeldyshSolution, y_values: &[f64]) -> Result<Vec<SonicTrace>> {
    let pts = dyadic_points(sol)?;
    let pxx = sol.psi_xx();
    let f0 = sol.field.top[0];
    let cell = f0 / (sol.field.ny() - 1) as f64;
    let mut out = Vec::new();
    for &y in y_values {
        if !(0.0..f0).contains(&y) {
            return Err(Error::InvalidInput(format!("scan height y = {y} outside [0, f(0)) = [0, {f0})")));
        }
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for &x in &pts {
            if let Some(v) = sol.interpolate(&pxx, x, y) {
                xs.push(x);
                vs.push(v);
            }
        }
        let (r, limit, change) = richardson(&vs);
        out.push(SonicTrace {
            y,
            x: xs,
            psi_xx: vs,
            richardson: r,
            limit,
            change,
            corner_contaminated: f0 - y <= cell,
        });
    }
    Ok(out)
}

/// `ψ_xx` along two paths into the corner `P₀ = (0, f(0))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerProbe {
    /// Interior path `y = f(0) - c x^{1/4}`, rows `[x, y, ψ_xx]`.
    pub interior: Vec<[f64; 3]>,
    /// Boundary-hugging path `y = f(x) - c x²`.
    pub boundary: Vec<[f64; 3]>,
    pub interior_limit: f64,
    pub boundary_limit: f64,
    pub gap: f64,
}

/// Aitken extrapolation of the last three terms, or the last term when the
/// sequence is not geometrically convergent.
fn aitken(v: &[f64]) -> f64 {
    match v {
        [] => f64::NAN,
        [x] | [_, x] => *x,
        [.., a, b, c] => {
            let d1 = b - a;
            let d2 = c - b;
            let den = d2 - d1;
            let ratio = d2 / d1;
            if den == 0.0 || !(0.0..0.95).contains(&ratio) {
                *c
            } else {
                c - d2 * d2 / den
            }
        }
    }
}

/// Evaluates `ψ_xx` along an interior path and a boundary-hugging path into
/// `P₀` and extrapolates each to `x → 0⁺`.
///
/// Near the top boundary the solution has a layer of width `O(√x)`; the
/// interior path leaves it, the boundary path stays inside it.
pub fn corner_probe(sol: &KeldyshSolution, c: f64) -> Result<CornerProbe> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidInput(format!("corner path constant must be > 0, got {c}")));
    }
    let pts = dyadic_points(sol)?;
    let pxx = sol.psi_xx();
    let f0 = sol.domain.f(0.0).0;
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for &x in &pts {
        let y1 = f0 - c * x.powf(0.25);
        if y1 >= 0.0 {
            if let Some(v) = sol.interpolate(&pxx, x, y1) {
                interior.push([x, y1, v]);
            }
        }
        let y2 = sol.domain.f(x).0 - c * x * x;
        if let Some(v) = sol.interpolate(&pxx, x, y2) {
            boundary.push([x, y2, v]);
        }
    }
    let l1 = aitken(&interior.iter().map(|p| p[2]).collect::<Vec<_>>());
    let l2 = aitken(&boundary.iter().map(|p| p[2]).collect::<Vec<_>>());
    Ok(CornerProbe { interior, boundary, interior_limit: l1, boundary_limit: l2, gap: (l1 - l2).abs() })
}

/// Measured constants of the structural bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundChecks {
    pub psi_min: f64,
    /// `ψ > 0` in the interior (to round-off).
    pub positive: bool,
    /// `max ψ/x²` over `x > 0`.
    pub l_const: f64,
    /// `0 ≤ ψ ≤ L x²`.
    pub quadratic_bound: bool,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// `max(0, -min ψ_x/x)`.
    pub mu: f64,
    /// `2 - a·max ψ_x/x`.
    pub delta: f64,
    /// `-μ ≤ ψ_x/x ≤ (2-δ)/a` for some `δ ∈ (0,1)`.
    pub ratio_bound: bool,
    /// `0 ≤ ψ_x/x ≤ (2-δ)/a`.
    pub ratio_nonneg: bool,
}

impl BoundChecks {
    pub fn all_hold(&self) -> bool {
        self.positive && self.quadratic_bound && self.ratio_bound && self.ratio_nonneg
    }
}

/// Measures `μ`, `δ`, `L` from the discrete solution on `0 < x ≤ ε₀/2`.
pub fn verify_bounds(sol: &KeldyshSolution, coeffs: &KeldyshCoefficients) -> BoundChecks {
    let f = &sol.field;
    let scale = f.max_abs();
    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    let px = sol.psi_x();
    let mut psi_min = f64::INFINITY;
    let mut l_const: f64 = 0.0;
    let mut rmin = f64::INFINITY;
    let mut rmax = f64::NEG_INFINITY;
    // The side x = ε₀ is an artificial cut; the bounds are local to the
    // degenerate line and are measured on x ≤ ε₀/2.
    let half = 0.5 * f.x[f.nx() - 1];
    for i in 1..f.nx() - 1 {
        let x = f.x[i];
        if x > half {
            break;
        }
        for j in 0..f.ny() {
            let v = f.at(i, j);
            psi_min = psi_min.min(v);
            l_const = l_const.max(v / (x * x));
            let r = px[f.idx(i, j)] / x;
            rmin = rmin.min(r);
            rmax = rmax.max(r);
        }
    }
    let a = coeffs.a;
    let delta = 2.0 - a * rmax;
    let positive = psi_min >= -tol;
    let ratio_tol = 1e-9 * rmax.abs().max(1.0);
    BoundChecks {
        psi_min,
        positive,
        l_const,
        quadratic_bound: positive && l_const.is_finite(),
        ratio_min: rmin,
        ratio_max: rmax,
        mu: (-rmin).max(0.0),
        delta,
        ratio_bound: delta > 0.0 && rmin.is_finite(),
        ratio_nonneg: delta > 0.0 && rmin >= -ratio_tol,
    }
}

/// Line plot of the `ψ_xx` traces against `x`, with the level `1/a`.
pub fn traces_svg(traces: &[SonicTrace], a: f64) -> String {
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut series: Vec<svg::Series> = traces
        .iter()
        .enumerate()
        .map(|(k, t)| {
            svg::Series::new(
                format!("y = {}", t.y),
                t.x.iter().zip(&t.psi_xx).map(|(x, v)| (*x, *v)).collect(),
                COLORS[k % COLORS.len()],
            )
        })
        .collect();
    if let Some(hi) = traces.iter().filter_map(|t| t.x.first().copied()).reduce(f64::max) {
        series.push(svg::Series::new(format!("1/a = {}", 1.0 / a), vec![(0.0, 1.0 / a), (hi, 1.0 / a)], "black"));
    }
    svg::line_plot("psi_xx toward the degenerate line", "x", "psi_xx", &series)
}

/// Model problem with a weak discontinuity on the degenerate line:
/// `a = 4`, `b = 1`, `f = 1 + x`, `β = (1, 1/2)`, small perturbations,
/// positive forcing `h = 2x²` on the top and tapered data on `x = ε₀`.
pub fn weak_discontinuity_scenario(eps0: f64) -> Result<(KeldyshDomain, KeldyshCoefficients, KeldyshBoundary)> {
    let a = 4.0;
    let domain = KeldyshDomain::affine(eps0)?;
    let coeffs = KeldyshCoefficients {
        a,
        b: 1.0,
        o: [
            OTerm::new(0.2, 2.0, 1.0),
            OTerm::new(0.1, 1.0, 2.0),
            OTerm::new(0.1, 1.0, 1.0),
            OTerm::new(0.1, 1.0, 0.0),
            OTerm::new(0.1, 1.0, 3.0),
        ],
        beta1: 1.0,
        beta2: 0.5,
        lambda: 1.0,
    };
    let bc = KeldyshBoundary {
        right: RightData::Tapered { value: eps0 * eps0 / (2.0 * a) },
        top: TopData::Polynomial { linear: 0.0, quadratic: 2.0 },
    };
    Ok((domain, coeffs, bc))
}
