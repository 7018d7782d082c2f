use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Data term of a curve fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveLoss {
    /// Mean squared error in normalized target units.
    #[default]
    Mse,
    /// Mean absolute relative error in original target units.
    Mape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImplicitConfig {
    /// Number of segments N; the curve has N+1 knots.
    #[serde(rename = "N")]
    pub segments: usize,
    /// Weight of the turn-angle penalty.
    pub alpha: f64,
    pub iterations: usize,
    /// Initial Adam step size; decays geometrically to `learning_rate * FINAL_LR_RATIO`.
    pub learning_rate: f64,
    #[serde(default)]
    pub loss: CurveLoss,
}

const FINAL_LR_RATIO: f64 = 1e-5;
const CONVERGENCE_WINDOW: usize = 200;
const CONVERGENCE_RTOL: f64 = 1e-7;
const OBJECTIVE_FLOOR: f64 = 1e-16;
const MIN_INCREMENT: f64 = 1e-6;

impl Default for ImplicitConfig {
    fn default() -> Self {
        ImplicitConfig {
            segments: 12,
            alpha: 1e-5,
            iterations: 4000,
            learning_rate: 0.05,
            loss: CurveLoss::Mse,
        }
    }
}

/// Piecewise-linear curve through knots `(a[n], b[n])` in min-max normalized
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicitModel {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

fn span(lo: f64, hi: f64) -> f64 {
    if hi > lo {
        hi - lo
    } else {
        1.0
    }
}

/// Linear interpolation on the knots, extending the end segments outside [a_0, a_N].
fn interpolate(a: &[f64], b: &[f64], x: f64) -> f64 {
    let last = a.len() - 2;
    let mut seg = a.partition_point(|&k| k <= x).clamp(1, last + 1) - 1;
    if a[seg + 1] <= a[seg] {
        // zero-width segment: use the nearest segment with width
        let right = (seg..=last).find(|&s| a[s + 1] > a[s]);
        let left = (0..seg).rev().find(|&s| a[s + 1] > a[s]);
        seg = match (x >= a[seg], right, left) {
            (true, Some(s), _) | (false, _, Some(s)) | (_, Some(s), None) | (_, None, Some(s)) => s,
            (_, None, None) => return b[seg],
        };
    }
    let t = (x - a[seg]) / (a[seg + 1] - a[seg]);
    b[seg] + t * (b[seg + 1] - b[seg])
}

impl ImplicitModel {
    pub fn segments(&self) -> usize {
        self.a.len() - 1
    }

    /// Two free coordinates per segment.
    pub fn parameter_count(&self) -> usize {
        2 * self.segments()
    }

    pub fn predict(&self, x: f64) -> f64 {
        let xn = (x - self.x_min) / span(self.x_min, self.x_max);
        self.y_min + interpolate(&self.a, &self.b, xn) * span(self.y_min, self.y_max)
    }

    /// Checks the knot constraints exactly.
    pub fn check_constraints(&self) -> Result<()> {
        let n = self.a.len();
        let ok = n >= 2
            && self.b.len() == n
            && self.a[0] == 0.0
            && self.a[n - 1] == 1.0
            && self.b[n - 1] == 1.0
            && self.a.windows(2).all(|w| w[0] <= w[1])
            && self.a.iter().chain(&self.b).all(|v| (0.0..=1.0).contains(v));
        if ok {
            Ok(())
        } else {
            Err(Error::ModelFormat("implicit knots violate their constraints".into()))
        }
    }
}

/// Result of [`fit_implicit`]: the best iterate seen and whether the
/// objective settled before the iteration budget ran out.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitFit {
    pub model: ImplicitModel,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-12);
        }
    }
}

/// Knot positions from increment logits: `a_0 = 0`, `a_N = 1`, nondecreasing.
fn knots_from_logits(logits: &[f64], a: &mut [f64], inc: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (i, l) in inc.iter_mut().zip(logits) {
        *i = (l - max).exp();
        total += *i;
    }
    for i in inc.iter_mut() {
        *i /= total;
    }
    a[0] = 0.0;
    for n in 1..a.len() - 1 {
        a[n] = (a[n - 1] + inc[n - 1]).min(1.0);
    }
    let last = a.len() - 1;
    a[last] = 1.0;
}

/// Turn-angle penalty `sum_n sin^2` between consecutive segment vectors, and
/// its gradient with respect to each knot coordinate.
fn turn_penalty(a: &[f64], b: &[f64], ga: &mut [f64], gb: &mut [f64], weight: f64) -> f64 {
    let mut total = 0.0;
    for n in 0..a.len().saturating_sub(2) {
        let (ux, uy) = (a[n + 1] - a[n], b[n + 1] - b[n]);
        let (wx, wy) = (a[n + 2] - a[n + 1], b[n + 2] - b[n + 1]);
        let cross = ux * wy - uy * wx;
        let nu = ux * ux + uy * uy;
        let nw = wx * wx + wy * wy;
        let d = nu * nw + 1e-30;
        let c = cross * cross / d;
        total += c;
        // dc/du and dc/dw
        let k1 = 2.0 * cross / d;
        let k2 = c / d;
        let dux = weight * (k1 * wy - k2 * 2.0 * ux * nw);
        let duy = weight * (-k1 * wx - k2 * 2.0 * uy * nw);
        let dwx = weight * (-k1 * uy - k2 * 2.0 * wx * nu);
        let dwy = weight * (k1 * ux - k2 * 2.0 * wy * nu);
        ga[n + 1] += dux;
        ga[n] -= dux;
        gb[n + 1] += duy;
        gb[n] -= duy;
        ga[n + 2] += dwx;
        ga[n + 1] -= dwx;
        gb[n + 2] += dwy;
        gb[n + 1] -= dwy;
    }
    weight * total
}

struct Problem<'a> {
    x: &'a [f64],
    t: &'a [f64],
    /// Original-unit targets, for the relative loss.
    y: &'a [f64],
    y_span: f64,
    y_min: f64,
    loss: CurveLoss,
    alpha: f64,
}

impl Problem<'_> {
    /// Objective and gradient with respect to knot coordinates. `x` is sorted.
    fn evaluate(&self, a: &[f64], b: &[f64], ga: &mut [f64], gb: &mut [f64]) -> f64 {
        ga.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
        let n_seg = a.len() - 1;
        let inv_n = 1.0 / self.x.len() as f64;
        let mut data = 0.0;
        let mut seg = 0;
        for i in 0..self.x.len() {
            let x = self.x[i];
            while seg + 1 < n_seg && (x > a[seg + 1] || a[seg + 1] <= a[seg]) {
                seg += 1;
            }
            let da = a[seg + 1] - a[seg];
            let db = b[seg + 1] - b[seg];
            let (f, t) = if da > 0.0 {
                let t = (x - a[seg]) / da;
                (b[seg] + t * db, t)
            } else {
                (b[seg + 1], 1.0)
            };
            let (value, dfd) = match self.loss {
                CurveLoss::Mse => {
                    let r = f - self.t[i];
                    (r * r, 2.0 * r)
                }
                CurveLoss::Mape => {
                    let y = self.y[i];
                    let pred = self.y_min + f * self.y_span;
                    let r = pred - y;
                    (r.abs() / y.abs(), r.signum() * self.y_span / y.abs())
                }
            };
            data += value;
            let g = dfd * inv_n;
            gb[seg] += g * (1.0 - t);
            gb[seg + 1] += g * t;
            if da > 0.0 {
                ga[seg] += g * db * (t - 1.0) / da;
                ga[seg + 1] -= g * db * t / da;
            }
        }
        let weight = self.alpha / n_seg as f64;
        data * inv_n + turn_penalty(a, b, ga, gb, weight)
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fit an `N`-segment monotone-abscissa piecewise-linear curve to `(x, y)`.
///
/// Inputs and targets are min-max normalized. Knot abscissae are the
/// cumulative sums of softmax increments, so they stay ordered with pinned
/// ends; ordinates are projected onto [0, 1] after every step, with `b_N = 1`.
/// Knots start at the data quantiles with ordinates at local target means.
pub fn fit_implicit(x: &[f64], y: &[f64], cfg: &ImplicitConfig) -> Result<ImplicitFit> {
    let n_seg = cfg.segments;
    if n_seg < 2 {
        return Err(Error::Fit(format!("need N >= 2 segments, got {n_seg}")));
    }
    if !(cfg.alpha >= 0.0 && cfg.alpha.is_finite()) {
        return Err(Error::Fit(format!("alpha must be >= 0, got {}", cfg.alpha)));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) || cfg.iterations == 0 {
        return Err(Error::Fit("learning rate and iteration budget must be positive".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Fit("input and target lengths differ".into()));
    }
    if x.len() < n_seg + 1 {
        return Err(Error::Fit(format!(
            "need at least N+1 = {} samples, got {}",
            n_seg + 1,
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite input or target".into()));
    }
    if cfg.loss == CurveLoss::Mape && y.contains(&0.0) {
        return Err(Error::Fit("relative loss needs nonzero targets".into()));
    }
    let x_min = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if x_max <= x_min {
        return Err(Error::Fit("all inputs are equal".into()));
    }
    let y_min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (x_span, y_span) = (span(x_min, x_max), span(y_min, y_max));

    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(i.cmp(&j)));
    let xs: Vec<f64> = order.iter().map(|&i| ((x[i] - x_min) / x_span).clamp(0.0, 1.0)).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let ts: Vec<f64> = ys.iter().map(|v| (v - y_min) / y_span).collect();

    // initial abscissae at data quantiles, with a floor on the gaps
    let mut inc: Vec<f64> = (0..n_seg)
        .map(|n| {
            let lo = if n == 0 { 0.0 } else { quantile(&xs, n as f64 / n_seg as f64) };
            let hi = if n + 1 == n_seg { 1.0 } else { quantile(&xs, (n + 1) as f64 / n_seg as f64) };
            (hi - lo).max(MIN_INCREMENT)
        })
        .collect();
    let total: f64 = inc.iter().sum();
    inc.iter_mut().for_each(|v| *v /= total);
    let mut logits: Vec<f64> = inc.iter().map(|v| v.ln()).collect();
    let mut a = vec![0.0; n_seg + 1];
    knots_from_logits(&logits, &mut a, &mut inc);

    // initial ordinates: mean target between the neighbouring midpoints
    let mut w: Vec<f64> = (0..n_seg)
        .map(|n| {
            let lo = if n == 0 { f64::NEG_INFINITY } else { 0.5 * (a[n - 1] + a[n]) };
            let hi = 0.5 * (a[n] + a[n + 1]);
            let start = xs.partition_point(|&v| v < lo);
            let end = xs.partition_point(|&v| v <= hi);
            if end > start {
                ts[start..end].iter().sum::<f64>() / (end - start) as f64
            } else {
                let i = xs.partition_point(|&v| v < a[n]).min(xs.len() - 1);
                ts[i]
            }
            .clamp(0.0, 1.0)
        })
        .collect();

    let problem = Problem {
        x: &xs,
        t: &ts,
        y: &ys,
        y_span,
        y_min,
        loss: cfg.loss,
        alpha: cfg.alpha,
    };
    let mut b = vec![0.0; n_seg + 1];
    let mut ga = vec![0.0; n_seg + 1];
    let mut gb = vec![0.0; n_seg + 1];
    let mut g_logits = vec![0.0; n_seg];
    let mut opt_logits = Adam::new(n_seg);
    let mut opt_w = Adam::new(n_seg);

    let mut best = (f64::INFINITY, a.clone(), b.clone());
    let mut history: Vec<f64> = Vec::with_capacity(cfg.iterations);
    let mut converged = false;
    let mut iterations = 0;
    let decay = FINAL_LR_RATIO.powf(1.0 / cfg.iterations as f64);
    let mut lr = cfg.learning_rate;
    for it in 0..cfg.iterations {
        iterations = it + 1;
        b[..n_seg].copy_from_slice(&w);
        b[n_seg] = 1.0;
        let objective = problem.evaluate(&a, &b, &mut ga, &mut gb);
        if !objective.is_finite() {
            break;
        }
        if objective < best.0 {
            best = (objective, a.clone(), b.clone());
        }
        history.push(best.0);
        if best.0 <= OBJECTIVE_FLOOR
            || (it >= CONVERGENCE_WINDOW
                && history[it - CONVERGENCE_WINDOW] - best.0 <= CONVERGENCE_RTOL * history[it - CONVERGENCE_WINDOW])
        {
            converged = true;
            break;
        }

        // a_n = sum_{j<n} inc_j for interior n; a_0 and a_N do not move
        let mut acc = 0.0;
        let mut g_inc = vec![0.0; n_seg];
        for j in (0..n_seg).rev() {
            g_inc[j] = acc;
            if j >= 1 {
                acc += ga[j];
            }
        }
        let mean: f64 = inc.iter().zip(&g_inc).map(|(i, g)| i * g).sum();
        for j in 0..n_seg {
            g_logits[j] = inc[j] * (g_inc[j] - mean);
        }
        opt_logits.step(&mut logits, &g_logits, lr);
        opt_w.step(&mut w, &gb[..n_seg], lr);
        w.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        knots_from_logits(&logits, &mut a, &mut inc);
        lr *= decay;
    }

    let (objective, a, b) = best;
    if !objective.is_finite() {
        return Err(Error::Fit("implicit fit diverged".into()));
    }
    let model = ImplicitModel {
        a,
        b,
        x_min,
        x_max,
        y_min,
        y_max,
    };
    model.check_constraints()?;
    Ok(ImplicitFit {
        model,
        iterations,
        converged,
        objective,
    })
}
