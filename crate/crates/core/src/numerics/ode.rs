//! Dormand-Prince 5(4) embedded Runge-Kutta pair with step-size control,
//! cubic Hermite dense output and sign-change event location.

use crate::error::{Error, Result};

/// Tolerances and step limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step allowed; also controls sampling density of the output.
    pub h_max: f64,
    /// Steps smaller than this abort the integration.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: f64::INFINITY,
            h_min: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

/// An accepted node of the discrete trajectory.
#[derive(Debug, Clone, Copy)]
pub struct Node<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub dy: [f64; N],
}

/// Why the integration returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    /// Reached `t_end`.
    End,
    /// Event function with the given index changed sign; the last node sits on the event.
    Event(usize),
}

#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    pub nodes: Vec<Node<N>>,
    pub stop: Stop,
}

/// Cubic Hermite interpolation between two nodes at `t`.
pub fn hermite<const N: usize>(a: &Node<N>, b: &Node<N>, t: f64) -> [f64; N] {
    let h = b.t - a.t;
    let s = (t - a.t) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = h00 * a.y[i] + h10 * h * a.dy[i] + h01 * b.y[i] + h11 * h * b.dy[i];
    }
    out
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

fn finite<const N: usize>(v: &[f64; N]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Integrates `y' = rhs(t, y)` forward from `t0` to `t_end`.
///
/// `events` are scalar functions g(t, y); integration stops at the first
/// accepted step across which one of them changes sign, and the crossing is
/// located on the dense output by bisection. A right-hand side returning a
/// non-finite value is treated as a rejected step.
pub fn integrate<const N: usize, F>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &OdeOptions,
    events: &mut [&mut dyn FnMut(f64, &[f64; N]) -> f64],
) -> Result<Trajectory<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    if !(t_end > t0) {
        return Err(Error::InvalidInput(format!("t_end = {t_end} must exceed t0 = {t0}")));
    }
    let f0 = rhs(t0, &y0);
    if !finite(&f0) || !finite(&y0) {
        return Err(Error::Integrator { t: t0, reason: "non-finite initial state".into() });
    }
    let mut nodes = vec![Node { t: t0, y: y0, dy: f0 }];
    let mut g_prev: Vec<f64> = events.iter_mut().map(|g| g(t0, &y0)).collect();

    let scale = |y: &[f64; N], i: usize| opts.atol + opts.rtol * y[i].abs();
    // Initial step guess (Hairer, Norsett & Wanner II.4).
    let d0 = (0..N).map(|i| (y0[i] / scale(&y0, i)).powi(2)).sum::<f64>().sqrt();
    let d1 = (0..N).map(|i| (f0[i] / scale(&y0, i)).powi(2)).sum::<f64>().sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(opts.h_max).min(t_end - t0);

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f0;
    let mut steps = 0usize;
    while t < t_end {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Integrator { t, reason: "maximum number of steps exceeded".into() });
        }
        if h < opts.h_min * t.abs().max(1.0) {
            return Err(Error::Integrator {
                t,
                reason: format!("step size underflow (h = {h:e}, y = {y:?})"),
            });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let k2 = rhs(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = rhs(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(
            t + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = rhs(
            t + h,
            &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = axpy(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = rhs(t + h, &y_new);
        let ok = [k2, k3, k4, k5, k6, k7].iter().all(finite) && finite(&y_new);
        let err = if ok {
            let mut acc = 0.0;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                acc += (e / sc).powi(2);
            }
            (acc / N as f64).sqrt()
        } else {
            f64::INFINITY
        };
        if err <= 1.0 {
            let t_new = if last { t_end } else { t + h };
            let node = Node { t: t_new, y: y_new, dy: k7 };
            // Event detection on the accepted step.
            let prev = *nodes.last().expect("trajectory has a start node");
            let mut hit: Option<(usize, f64)> = None;
            for (idx, g) in events.iter_mut().enumerate() {
                let g_new = g(t_new, &y_new);
                let g_old = g_prev[idx];
                if g_old != 0.0 && (g_new == 0.0 || g_new.signum() != g_old.signum()) {
                    let mut lo = prev.t;
                    let mut hi = t_new;
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        let gm = g(mid, &hermite(&prev, &node, mid));
                        if gm == 0.0 {
                            hi = mid;
                            break;
                        }
                        if gm.signum() == g_old.signum() {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let te = hi;
                    if hit.map_or(true, |(_, tb)| te < tb) {
                        hit = Some((idx, te));
                    }
                }
                g_prev[idx] = g_new;
            }
            if let Some((idx, te)) = hit {
                let ye = if te >= t_new { y_new } else { hermite(&prev, &node, te) };
                let dye = rhs(te, &ye);
                nodes.push(Node { t: te, y: ye, dy: dye });
                return Ok(Trajectory { nodes, stop: Stop::Event(idx) });
            }
            nodes.push(node);
            t = t_new;
            y = y_new;
            k1 = k7;
            if last {
                break;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(opts.h_max);
        } else {
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.25 };
            h *= fac;
        }
    }
    Ok(Trajectory { nodes, stop: Stop::End })
}
