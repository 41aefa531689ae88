//! EXIT-chart machinery: the mutual-information functional J between a
//! node's label and its belief, monotone tables with inversion, the
//! information-domain transfer maps, crossing detection, staircase
//! trajectories, and phase-transition scans.
//!
//! All information quantities are in bits. The belief statistic given the
//! label is a Gaussian mixture with components centered at `+-state + h_m`
//! and variance `state`, which makes J a strictly increasing function of the
//! density-evolution state; that is what makes the information-domain
//! transfer map equivalent to the state-domain recursion.

use crate::channels::{LlrModel, SideInfoChannel};
use crate::devo::{single_update, symmetric_update};
use crate::error::{Error, Result};
use crate::numerics::{adaptive_simpson, QuadratureRule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Integration tolerance for the J integrals.
const J_INTEGRAL_EPS: f64 = 1e-11;
/// Plateau tolerance: a table step this far below strict increase aborts the
/// build; smaller dips are treated as saturation and truncated.
const J_JITTER_TOL: f64 = 1e-9;
/// Fraction of the information ceiling treated as "maximum reached" by scans.
pub const SCAN_IMAX_FRACTION: f64 = 0.99;

const LN2: f64 = std::f64::consts::LN_2;

fn binary_entropy_bits(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

/// log of a Gaussian mixture density (up to the common normalization) with
/// component means `centers`, common variance `var`, and weights `w`
/// (zero-weight components skipped).
fn log_mixture(y: f64, centers: &[f64], w: &[f64], var: f64) -> f64 {
    let inv2v = 1.0 / (2.0 * var);
    let mut max = f64::NEG_INFINITY;
    for (&c, &wi) in centers.iter().zip(w) {
        if wi <= 0.0 {
            continue;
        }
        let t = wi.ln() - (y - c) * (y - c) * inv2v;
        if t > max {
            max = t;
        }
    }
    if max == f64::NEG_INFINITY {
        return max;
    }
    let mut acc = 0.0;
    for (&c, &wi) in centers.iter().zip(w) {
        if wi <= 0.0 {
            continue;
        }
        acc += (wi.ln() - (y - c) * (y - c) * inv2v - max).exp();
    }
    max + acc.ln()
}

/// `log(1 + e^x)` without overflow.
fn log1p_exp(x: f64) -> f64 {
    if x > 36.0 {
        x
    } else if x < -745.0 {
        0.0
    } else {
        x.exp().ln_1p()
    }
}

/// Conditional-entropy integral in bits:
/// `sum_m w_self[m] E_{Y ~ N(c_self[m], var)}[log2(1 + ratio *
/// p_other(Y)/p_self(Y))]`, integrating each mixture component over its own
/// `+-12 sigma` window so narrow components at small state are never missed.
#[allow(clippy::too_many_arguments)]
fn cond_entropy_bits(
    self_centers: &[f64],
    self_weights: &[f64],
    other_centers: &[f64],
    other_weights: &[f64],
    var: f64,
    log_prior_ratio: f64,
) -> f64 {
    let sigma = var.sqrt();
    let norm = (2.0 * std::f64::consts::PI * var).sqrt();
    let half = 12.0 * sigma;
    let mut total = 0.0;
    for (&c, &w) in self_centers.iter().zip(self_weights) {
        if w <= 0.0 {
            continue;
        }
        let part = adaptive_simpson(
            |y| {
                let lp_self = log_mixture(y, self_centers, self_weights, var);
                let lp_other = log_mixture(y, other_centers, other_weights, var);
                let dens = (-(y - c) * (y - c) / (2.0 * var)).exp() / norm;
                dens * log1p_exp(lp_other - lp_self + log_prior_ratio) / LN2
            },
            c - half,
            c + half,
            J_INTEGRAL_EPS,
        );
        total += w * part;
    }
    total
}

/// Mutual information (bits) between a uniform +-1 label and the belief at
/// state `nu` for the symmetric model. `nu = 0` reduces to the discrete
/// side-information MI.
pub fn j_symmetric(nu: f64, channel: &SideInfoChannel) -> f64 {
    let spec = channel.llr_spec(LlrModel::SymmetricHalfLog);
    let ap = channel.plus_likelihoods();
    let am = channel.minus_likelihoods();
    let h = &spec.values;
    if nu == 0.0 {
        // I(x; h) of the discrete channel in bits, uniform prior
        let mut total = 0.0;
        for m in 0..channel.alphabet_size() {
            let avg = 0.5 * (ap[m] + am[m]);
            if ap[m] > 0.0 {
                total += 0.5 * ap[m] * (ap[m] / avg).log2();
            }
            if am[m] > 0.0 {
                total += 0.5 * am[m] * (am[m] / avg).log2();
            }
        }
        return total;
    }
    let centers_p: Vec<f64> = h.iter().map(|&hm| nu + hm).collect();
    let centers_m: Vec<f64> = h.iter().map(|&hm| -nu + hm).collect();
    let cond_p = cond_entropy_bits(&centers_p, ap, &centers_m, am, nu, 0.0);
    let cond_m = cond_entropy_bits(&centers_m, am, &centers_p, ap, nu, 0.0);
    (1.0 - 0.5 * cond_p - 0.5 * cond_m).clamp(0.0, 1.0)
}

/// Single-community J (bits) at state `v` with community fraction
/// `k_frac = K/n`; the prior entropy replaces the symmetric model's 1 bit as
/// the ceiling.
pub fn j_single(v: f64, k_frac: f64, channel: &SideInfoChannel) -> f64 {
    assert!(k_frac > 0.0 && k_frac < 1.0, "k_frac must lie in (0, 1)");
    let spec = channel.llr_spec(LlrModel::SingleFullLog);
    let ap = channel.plus_likelihoods();
    let am = channel.minus_likelihoods();
    let h = &spec.values;
    let pi1 = k_frac;
    let prior = binary_entropy_bits(pi1);
    if v == 0.0 {
        let mut total = 0.0;
        for m in 0..channel.alphabet_size() {
            let pm = pi1 * ap[m] + (1.0 - pi1) * am[m];
            if pm <= 0.0 {
                continue;
            }
            if ap[m] > 0.0 {
                total += pi1 * ap[m] * (ap[m] / pm).log2();
            }
            if am[m] > 0.0 {
                total += (1.0 - pi1) * am[m] * (am[m] / pm).log2();
            }
        }
        return total.clamp(0.0, prior);
    }
    let centers_p: Vec<f64> = h.iter().map(|&hm| v + hm).collect();
    let centers_m: Vec<f64> = h.iter().map(|&hm| -v + hm).collect();
    let log_ratio = ((1.0 - pi1) / pi1).ln();
    let cond_1 = cond_entropy_bits(&centers_p, ap, &centers_m, am, v, log_ratio);
    let cond_0 = cond_entropy_bits(&centers_m, am, &centers_p, ap, v, -log_ratio);
    (prior - pi1 * cond_1 - (1.0 - pi1) * cond_0).clamp(0.0, prior)
}

/// Monotone table of J over a geometric state grid, supporting exact
/// piecewise-linear inversion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JTable {
    pub nu_grid: Vec<f64>,
    pub j_values: Vec<f64>,
    /// Theoretical ceiling: 1 bit (symmetric) or the prior entropy (single).
    pub i_max: f64,
    /// Set when the build truncated a numerically saturated tail.
    pub saturated: bool,
    pub interpolation: String,
    /// Optional smooth fit parameters (figure-parity mode only).
    pub fit: Option<Vec<f64>>,
}

/// Which J to tabulate.
#[derive(Debug, Clone, Copy)]
pub enum JModel<'a> {
    Symmetric(&'a SideInfoChannel),
    Single {
        channel: &'a SideInfoChannel,
        k_frac: f64,
    },
}

impl JModel<'_> {
    fn eval(&self, state: f64) -> f64 {
        match self {
            JModel::Symmetric(ch) => j_symmetric(state, ch),
            JModel::Single { channel, k_frac } => j_single(state, *k_frac, channel),
        }
    }

    fn ceiling(&self) -> f64 {
        match self {
            JModel::Symmetric(_) => 1.0,
            JModel::Single { k_frac, .. } => binary_entropy_bits(*k_frac),
        }
    }
}

/// Tabulates J on `{0} + geometric(nu_max * 1e-6 .. nu_max)` with `grid_size`
/// points, validating strict monotonicity. A saturated upper tail (consecutive
/// values equal at f64 resolution) is truncated and flagged; an actual
/// decrease beyond the 1e-9 jitter tolerance aborts.
pub fn build_j_table(model: JModel<'_>, nu_max: f64, grid_size: usize) -> Result<JTable> {
    if !(nu_max > 0.0) || grid_size < 8 {
        return Err(Error::invalid("need nu_max > 0 and grid_size >= 8"));
    }
    let mut grid = Vec::with_capacity(grid_size);
    grid.push(0.0);
    let lo = nu_max * 1e-6;
    let steps = grid_size - 2;
    let ratio = (nu_max / lo).powf(1.0 / steps as f64);
    let mut v = lo;
    for _ in 0..=steps {
        grid.push(v.min(nu_max));
        v *= ratio;
    }
    *grid.last_mut().unwrap() = nu_max;

    let j_values: Vec<f64> = grid.par_iter().map(|&nu| model.eval(nu)).collect();

    let mut keep = j_values.len();
    for i in 1..j_values.len() {
        let d = j_values[i] - j_values[i - 1];
        if d < -J_JITTER_TOL {
            return Err(Error::numerical(format!(
                "J table decreased by {d:.3e} at state {} (integration error)",
                grid[i]
            )));
        }
        if d <= 0.0 {
            keep = i;
            break;
        }
    }
    let saturated = keep < j_values.len();
    Ok(JTable {
        nu_grid: grid[..keep].to_vec(),
        j_values: j_values[..keep].to_vec(),
        i_max: model.ceiling(),
        saturated,
        interpolation: "linear".into(),
        fit: None,
    })
}

impl JTable {
    pub fn state_max(&self) -> f64 {
        *self.nu_grid.last().unwrap()
    }

    pub fn i_min(&self) -> f64 {
        self.j_values[0]
    }

    pub fn i_top(&self) -> f64 {
        *self.j_values.last().unwrap()
    }

    /// Piecewise-linear evaluation; states beyond the grid clamp to the ends.
    pub fn eval(&self, state: f64) -> f64 {
        let g = &self.nu_grid;
        if state <= g[0] {
            return self.j_values[0];
        }
        if state >= *g.last().unwrap() {
            return *self.j_values.last().unwrap();
        }
        let idx = match g.binary_search_by(|x| x.total_cmp(&state)) {
            Ok(i) => return self.j_values[i],
            Err(i) => i,
        };
        let (x0, x1) = (g[idx - 1], g[idx]);
        let (y0, y1) = (self.j_values[idx - 1], self.j_values[idx]);
        y0 + (y1 - y0) * (state - x0) / (x1 - x0)
    }

    /// Exact inverse of the interpolated table. Targets outside the table
    /// range clamp to the nearest end and set the flag.
    pub fn invert(&self, i_target: f64) -> (f64, bool) {
        let j = &self.j_values;
        if i_target <= j[0] {
            return (self.nu_grid[0], i_target < j[0]);
        }
        let last = *j.last().unwrap();
        if i_target >= last {
            return (self.state_max(), i_target > last);
        }
        let idx = match j.binary_search_by(|x| x.total_cmp(&i_target)) {
            Ok(i) => return (self.nu_grid[i], false),
            Err(i) => i,
        };
        let (y0, y1) = (j[idx - 1], j[idx]);
        let (x0, x1) = (self.nu_grid[idx - 1], self.nu_grid[idx]);
        (x0 + (x1 - x0) * (i_target - y0) / (y1 - y0), false)
    }

    /// Optional smooth parametric fit `I(state) ~ imax (1 - 2^(-c0 state^c1))^c2`
    /// (damped least squares); stored for figure parity, never used by the
    /// inversion path.
    pub fn fit_parametric(&mut self) -> Result<f64> {
        let imax = self.i_max;
        let samples: Vec<(f64, f64)> = self
            .nu_grid
            .iter()
            .zip(&self.j_values)
            .map(|(&x, &y)| (x, y))
            .collect();
        let out = crate::numerics::damped_least_squares_fit(
            &samples,
            move |p, x| {
                if x <= 0.0 {
                    return imax * (1.0 - 1.0f64).powf(p[2].abs()) + p[3];
                }
                imax * (1.0 - (2.0f64).powf(-p[0].abs() * x.powf(p[1].abs()))).powf(p[2].abs())
                    + p[3]
            },
            &[0.5, 1.0, 1.0, self.j_values[0]],
        )?;
        let rmse = (out.residual_sum_squares / samples.len() as f64).sqrt();
        self.fit = Some(out.params);
        Ok(rmse)
    }
}

/// One EXIT transfer step for the symmetric model:
/// `I_out = J(mu^2/4 h(J^-1(I_in)))`. The boolean reports table clamping.
pub fn transfer_symmetric(
    i_in: f64,
    mu: f64,
    channel: &SideInfoChannel,
    table: &JTable,
) -> (f64, bool) {
    let spec = channel.llr_spec(LlrModel::SymmetricHalfLog);
    let (nu, clamped) = table.invert(i_in);
    let next = symmetric_update(nu, mu, &spec.plus_dist, QuadratureRule::default_rule());
    (table.eval(next), clamped || next > table.state_max())
}

/// One EXIT transfer step for the single-community model:
/// `I_out = J(lambda E_{Z,U1}[(e^-nu + e^-(v/2 + sqrt(v) Z) - U1)^-1])`.
pub fn transfer_single(
    i_in: f64,
    lambda: f64,
    threshold_nu: f64,
    channel: &SideInfoChannel,
    table: &JTable,
) -> (f64, bool) {
    let spec = channel.llr_spec(LlrModel::SingleFullLog);
    let (v, clamped) = table.invert(i_in);
    let next = single_update(v, lambda, threshold_nu, &spec.plus_dist, QuadratureRule::default_rule());
    (table.eval(next), clamped || next > table.state_max())
}

/// A fixed point of the transfer map. The DE state it corresponds to is
/// `table.invert(i_fixed)` for whoever holds the table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Crossing {
    /// Information coordinate of the fixed point.
    pub i_fixed: f64,
    /// Stable when the local slope of T is below 1.
    pub stable: bool,
    /// Smallest stable fixed point reached from the curve's starting point.
    pub operating_point: bool,
}

/// Sampled transfer curve with detected crossings and the staircase
/// trajectory from the starting information level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExitCurve {
    pub model: String,
    /// Model and channel parameters, for the companion JSON.
    pub params: serde_json::Value,
    pub i_in: Vec<f64>,
    pub i_out: Vec<f64>,
    pub i_max: f64,
    pub crossings: Vec<Crossing>,
    pub staircase: Vec<f64>,
    /// Any table-range clamping seen while sampling the curve.
    pub clamped: bool,
}

/// Default curve grid resolution.
pub const DEFAULT_CURVE_GRID: usize = 512;
/// Crossing refinement tolerance.
pub const DEFAULT_CROSSING_TOL: f64 = 1e-9;
/// Staircase limits.
pub const DEFAULT_STAIRCASE_STEPS: usize = 20_000;
pub const DEFAULT_STAIRCASE_TOL: f64 = 1e-12;

fn sample_curve(
    model: &str,
    params: serde_json::Value,
    table: &JTable,
    grid_size: usize,
    transfer: impl Fn(f64) -> (f64, bool),
) -> ExitCurve {
    // uniform in state, which concentrates information points where the
    // curve bends
    let smax = table.state_max();
    let mut i_in = Vec::with_capacity(grid_size);
    let mut i_out = Vec::with_capacity(grid_size);
    let mut clamped = false;
    let mut last_i = f64::NEG_INFINITY;
    for k in 0..grid_size {
        let state = smax * k as f64 / (grid_size - 1) as f64;
        let i = table.eval(state);
        if i <= last_i {
            continue; // saturated tail of the table
        }
        last_i = i;
        let (out, cl) = transfer(i);
        clamped |= cl;
        i_in.push(i);
        i_out.push(out);
    }
    let mut curve = ExitCurve {
        model: model.into(),
        params,
        i_in,
        i_out,
        i_max: table.i_max,
        crossings: Vec::new(),
        staircase: Vec::new(),
        clamped,
    };
    curve.crossings = find_crossings(&curve, DEFAULT_CROSSING_TOL);
    curve.staircase = staircase(
        &curve,
        curve.i_in[0],
        DEFAULT_STAIRCASE_STEPS,
        DEFAULT_STAIRCASE_TOL,
    );
    mark_operating_point(&mut curve);
    curve
}

/// Samples the symmetric-model EXIT curve on `grid_size` points.
pub fn compute_exit_curve_symmetric(
    mu: f64,
    channel: &SideInfoChannel,
    table: &JTable,
    grid_size: usize,
) -> ExitCurve {
    sample_curve(
        "symmetric",
        serde_json::json!({ "mu": mu }),
        table,
        grid_size,
        |i| transfer_symmetric(i, mu, channel, table),
    )
}

pub fn compute_exit_curve_single(
    lambda: f64,
    threshold_nu: f64,
    channel: &SideInfoChannel,
    table: &JTable,
    grid_size: usize,
) -> ExitCurve {
    sample_curve(
        "single",
        serde_json::json!({ "lambda": lambda, "threshold_nu": threshold_nu }),
        table,
        grid_size,
        |i| transfer_single(i, lambda, threshold_nu, channel, table),
    )
}

/// Piecewise-linear evaluation of the sampled transfer map.
fn curve_transfer(curve: &ExitCurve, i: f64) -> f64 {
    let xs = &curve.i_in;
    let ys = &curve.i_out;
    if i <= xs[0] {
        return ys[0];
    }
    if i >= *xs.last().unwrap() {
        return *ys.last().unwrap();
    }
    let idx = match xs.binary_search_by(|x| x.total_cmp(&i)) {
        Ok(k) => return ys[k],
        Err(k) => k,
    };
    let (x0, x1) = (xs[idx - 1], xs[idx]);
    let (y0, y1) = (ys[idx - 1], ys[idx]);
    y0 + (y1 - y0) * (i - x0) / (x1 - x0)
}

/// Sign changes of `T(I) - I` on the sampled grid, refined by bisection on
/// the interpolated curve. Stability comes from the local slope. An empty
/// result means the curve stays above the identity over the whole grid.
pub fn find_crossings(curve: &ExitCurve, tol: f64) -> Vec<Crossing> {
    let xs = &curve.i_in;
    let ys = &curve.i_out;
    let mut out = Vec::new();
    let g = |k: usize| ys[k] - xs[k];
    for k in 0..xs.len() {
        let d = g(k);
        let exact_zero = d == 0.0;
        let sign_change = k + 1 < xs.len() && d * g(k + 1) < 0.0;
        if !(exact_zero || sign_change) {
            continue;
        }
        let i_fixed = if exact_zero {
            xs[k]
        } else {
            let seg = xs[k + 1] - xs[k];
            crate::numerics::bisect_monotone(
                |i| curve_transfer(curve, i) - i,
                xs[k],
                xs[k + 1],
                1e-13 * seg.max(1e-6),
            )
            .unwrap_or(0.5 * (xs[k] + xs[k + 1]))
        };
        if (curve_transfer(curve, i_fixed) - i_fixed).abs() >= tol {
            continue;
        }
        // local slope of T around the fixed point
        let span = (xs.last().unwrap() - xs[0]).max(1e-12);
        let dx = (1e-6 * span).max(1e-12);
        let lo = (i_fixed - dx).max(xs[0]);
        let hi = (i_fixed + dx).min(*xs.last().unwrap());
        let slope = (curve_transfer(curve, hi) - curve_transfer(curve, lo)) / (hi - lo);
        out.push(Crossing {
            i_fixed,
            stable: slope < 1.0,
            operating_point: false,
        });
    }
    out.dedup_by(|a, b| (a.i_fixed - b.i_fixed).abs() < tol);
    out
}

fn mark_operating_point(curve: &mut ExitCurve) {
    if curve.staircase.is_empty() || curve.crossings.is_empty() {
        return;
    }
    let limit = *curve.staircase.last().unwrap();
    let mut best: Option<usize> = None;
    let mut best_dist = f64::INFINITY;
    for (k, c) in curve.crossings.iter().enumerate() {
        if !c.stable {
            continue;
        }
        let d = (c.i_fixed - limit).abs();
        if d < best_dist {
            best_dist = d;
            best = Some(k);
        }
    }
    // the staircase limit must actually sit at the fixed point
    if let Some(k) = best {
        let span = curve.i_in.last().unwrap() - curve.i_in[0];
        if best_dist <= 1e-3 * span.max(1e-9) + 1e-9 {
            curve.crossings[k].operating_point = true;
        }
    }
}

/// Iterates `I <- T(I)` on the interpolated curve from `i_start` until the
/// step falls below `tol` or `max_steps` is hit; returns the visited levels
/// (the figure staircase).
pub fn staircase(curve: &ExitCurve, i_start: f64, max_steps: usize, tol: f64) -> Vec<f64> {
    let mut path = vec![i_start];
    let mut i = i_start;
    for _ in 0..max_steps {
        let next = curve_transfer(curve, i);
        path.push(next);
        if (next - i).abs() < tol {
            break;
        }
        i = next;
    }
    path
}

/// What a threshold scan varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanParameter {
    Lambda,
    Mu,
    Alpha,
    Epsilon,
}

/// Base configuration for a scan; the scanned parameter's entry is ignored in
/// favor of the bisection iterate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanConfig {
    /// "symmetric" or "single".
    pub model: String,
    pub scan_parameter: ScanParameter,
    pub lo: f64,
    pub hi: f64,
    pub bisect_tol: f64,
    /// Symmetric-model fields.
    pub mu: Option<f64>,
    pub epsilon: Option<f64>,
    /// Channel quality (both models).
    pub alpha: Option<f64>,
    /// Single-model fields.
    pub lambda: Option<f64>,
    pub k_frac: Option<f64>,
    /// DE iteration budget per predicate evaluation.
    #[serde(default = "default_scan_iters")]
    pub max_de_iters: usize,
}

fn default_scan_iters() -> usize {
    200_000
}

/// Scan outcome with bracketing evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanReport {
    pub config: ScanConfig,
    /// Critical parameter value, or None when the predicate never flips over
    /// the range (no transition).
    pub critical: Option<f64>,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub predicate_lo: bool,
    pub predicate_hi: bool,
    pub brackets: Vec<(f64, f64)>,
    pub i_max: f64,
    pub threshold_fraction: f64,
    /// `J(reachable fixed point)` at the bracket ends, for inspection.
    pub i_operating_lo: f64,
    pub i_operating_hi: f64,
}

struct ScanEval {
    i_operating: f64,
    i_max: f64,
}

/// Runs the DE recursion to its reachable fixed point for the scan's model at
/// parameter value `theta` and maps it through the exact J integral.
fn scan_evaluate(cfg: &ScanConfig, theta: f64) -> Result<ScanEval> {
    let pick = |param: ScanParameter, fallback: Option<f64>, name: &str| -> Result<f64> {
        if cfg.scan_parameter == param {
            Ok(theta)
        } else {
            fallback.ok_or_else(|| Error::invalid(format!("scan config missing `{name}`")))
        }
    };
    match cfg.model.as_str() {
        "symmetric" => {
            let mu = pick(ScanParameter::Mu, cfg.mu, "mu")?;
            let eps = pick(ScanParameter::Epsilon, cfg.epsilon, "epsilon")?;
            let alpha = pick(ScanParameter::Alpha, cfg.alpha, "alpha")?;
            let channel = crate::channels::erasure_flip_channel(eps, alpha)?;
            let trace = crate::devo::de_iterate_symmetric(mu, &channel, cfg.max_de_iters, 1e-12)?;
            Ok(ScanEval {
                i_operating: j_symmetric(trace.nu_bar, &channel),
                i_max: 1.0,
            })
        }
        "single" => {
            let lambda = pick(ScanParameter::Lambda, cfg.lambda, "lambda")?;
            let alpha = pick(ScanParameter::Alpha, cfg.alpha, "alpha")?;
            let k_frac = cfg
                .k_frac
                .ok_or_else(|| Error::invalid("scan config missing `k_frac`"))?;
            let nu = ((1.0 - k_frac) / k_frac).ln();
            let channel = crate::channels::binary_flip_channel(alpha)?;
            let trace = crate::devo::de_iterate_single(lambda, nu, &channel, cfg.max_de_iters, 1e-12)?;
            Ok(ScanEval {
                i_operating: j_single(trace.v_bar, k_frac, &channel),
                i_max: binary_entropy_bits(k_frac),
            })
        }
        other => Err(Error::invalid(format!("unknown scan model `{other}`"))),
    }
}

/// Bisects the scanned parameter on the predicate "no fixed point with
/// `I < 0.99 * I_max` is reachable from the starting point", i.e. the DE
/// recursion escapes to the information ceiling. Returns the bracketed
/// critical value, or None when the predicate is constant over the range.
pub fn threshold_scan(cfg: &ScanConfig) -> Result<ScanReport> {
    if !(cfg.lo < cfg.hi) || !(cfg.bisect_tol > 0.0) {
        return Err(Error::invalid("scan needs lo < hi and bisect_tol > 0"));
    }
    let eval_lo = scan_evaluate(cfg, cfg.lo)?;
    let eval_hi = scan_evaluate(cfg, cfg.hi)?;
    let i_max = eval_hi.i_max;
    let threshold = SCAN_IMAX_FRACTION * i_max;
    let pred = |e: &ScanEval| e.i_operating >= threshold;
    let (p_lo, p_hi) = (pred(&eval_lo), pred(&eval_hi));
    let mut report = ScanReport {
        config: cfg.clone(),
        critical: None,
        bracket_lo: cfg.lo,
        bracket_hi: cfg.hi,
        predicate_lo: p_lo,
        predicate_hi: p_hi,
        brackets: vec![(cfg.lo, cfg.hi)],
        i_max,
        threshold_fraction: SCAN_IMAX_FRACTION,
        i_operating_lo: eval_lo.i_operating,
        i_operating_hi: eval_hi.i_operating,
    };
    if p_lo == p_hi {
        // predicate constant over the range: no transition detected
        return Ok(report);
    }
    let mut lo = cfg.lo;
    let mut hi = cfg.hi;
    while hi - lo > cfg.bisect_tol {
        let mid = 0.5 * (lo + hi);
        let e = scan_evaluate(cfg, mid)?;
        if pred(&e) == p_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        report.brackets.push((lo, hi));
    }
    report.bracket_lo = lo;
    report.bracket_hi = hi;
    report.critical = Some(0.5 * (lo + hi));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{binary_flip_channel, erasure_flip_channel};
    use crate::devo::{de_iterate_single, de_iterate_symmetric};

    #[test]
    fn j_symmetric_trivial_points() {
        let ch0 = erasure_flip_channel(0.0, 0.3).unwrap();
        assert_eq!(j_symmetric(0.0, &ch0), 0.0);
        let ch = erasure_flip_channel(0.4, 0.2).unwrap();
        assert!((j_symmetric(200.0, &ch) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn j_symmetric_discrete_limit_is_bsc_mi() {
        // eps = 1, alpha = 0.1 reduces to a BSC(0.1): 1 - Hb(0.1) bits
        let ch = erasure_flip_channel(1.0, 0.1).unwrap();
        let expected = 1.0 - binary_entropy_bits(0.1);
        assert!((j_symmetric(0.0, &ch) - expected).abs() < 1e-12);
    }

    #[test]
    fn j_symmetric_small_nu_continuous_at_zero() {
        let ch = erasure_flip_channel(0.5, 0.2).unwrap();
        let j0 = j_symmetric(0.0, &ch);
        let j_eps = j_symmetric(1e-9, &ch);
        assert!((j0 - j_eps).abs() < 1e-4, "J discontinuous at 0: {j0} vs {j_eps}");
    }

    #[test]
    fn j_single_trivial_points() {
        let ch_half = binary_flip_channel(0.5).unwrap();
        assert!(j_single(0.0, 0.1, &ch_half).abs() < 1e-12);
        let ch = binary_flip_channel(0.25).unwrap();
        let prior = binary_entropy_bits(0.1);
        assert!((j_single(4000.0, 0.1, &ch) - prior).abs() < 1e-6);
    }

    #[test]
    fn j_single_discrete_limit_two_routes() {
        // closed-form asymmetric-prior flip-channel MI vs the v -> 0 branch
        let alpha: f64 = 0.1;
        let kf: f64 = 0.1;
        let ch = binary_flip_channel(alpha).unwrap();
        let got = j_single(0.0, kf, &ch);
        // independent route: I = H(y) - H(y|x) with P(y=1) = kf(1-a) + (1-kf)a
        let py1 = kf * (1.0 - alpha) + (1.0 - kf) * alpha;
        let expected = binary_entropy_bits(py1) - binary_entropy_bits(alpha);
        assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
    }

    #[test]
    fn j_tables_monotone_and_invertible() {
        let ch = erasure_flip_channel(0.3, 0.2).unwrap();
        let table = build_j_table(JModel::Symmetric(&ch), 9.45, 200).unwrap();
        for w in table.j_values.windows(2) {
            assert!(w[1] > w[0]);
        }
        // round trips
        for k in 1..table.nu_grid.len() - 1 {
            let nu = table.nu_grid[k];
            let (back, clamped) = table.invert(table.eval(nu));
            assert!(!clamped);
            assert!((back - nu).abs() < 1e-6 * nu.max(1.0), "nu={nu} back={back}");
        }
        for i in 0..20 {
            let target = table.i_min()
                + (table.i_top() - table.i_min()) * (i as f64 + 0.5) / 20.0;
            let (nu, _) = table.invert(target);
            assert!((table.eval(nu) - target).abs() < 1e-8);
        }
        // out-of-range targets clamp with the flag
        assert!(table.invert(table.i_top() + 0.1).1);
        assert!(table.invert(table.i_min() - 1e-6).1);
    }

    #[test]
    fn j_table_saturation_truncates() {
        // at mu = 50 scale the upper grid saturates J to 1 within f64
        let ch = erasure_flip_channel(0.5, 0.4).unwrap();
        let table = build_j_table(JModel::Symmetric(&ch), 660.0, 128).unwrap();
        assert!(table.saturated);
        assert!(table.i_top() <= 1.0);
    }

    #[test]
    fn j_table_fit_small_residual() {
        let ch = erasure_flip_channel(1.0, 0.1).unwrap();
        let mut table = build_j_table(JModel::Symmetric(&ch), 1.2, 96).unwrap();
        let rmse = table.fit_parametric().unwrap();
        assert!(rmse < 1e-2, "fit rmse {rmse}");
        assert!(table.fit.is_some());
    }

    #[test]
    fn transfer_symmetric_fixed_point_at_origin_when_erased() {
        let ch = erasure_flip_channel(0.0, 0.3).unwrap();
        let table = build_j_table(JModel::Symmetric(&ch), 1.05, 64).unwrap();
        let (out, _) = transfer_symmetric(table.i_min(), 2.0, &ch, &table);
        assert!(out.abs() < 1e-12);
    }

    #[test]
    fn transfer_symmetric_first_step_matches_de() {
        let ch = erasure_flip_channel(0.1, 0.4).unwrap();
        let mu = 2.0;
        let table = build_j_table(JModel::Symmetric(&ch), 1.05 * mu * mu / 4.0, 256).unwrap();
        let (i1, _) = transfer_symmetric(table.i_min(), mu, &ch, &table);
        let trace = de_iterate_symmetric(mu, &ch, 1, 0.0).unwrap();
        assert!((i1 - table.eval(trace.nu_seq[1])).abs() < 1e-12);
    }

    #[test]
    fn representation_equivalence_symmetric() {
        // iterating the transfer map in the information domain equals the
        // J-image of the DE trace, for every t <= 20
        for (mu, eps, alpha) in [(2.0, 0.1, 0.1), (2.0, 1.0, 0.4), (6.0, 0.1, 0.4), (6.0, 1.0, 0.1)] {
            let ch = erasure_flip_channel(eps, alpha).unwrap();
            let table =
                build_j_table(JModel::Symmetric(&ch), 1.05 * mu * mu / 4.0, DEFAULT_CURVE_GRID)
                    .unwrap();
            let trace = de_iterate_symmetric(mu, &ch, 20, 0.0).unwrap();
            let mut i = table.eval(0.0);
            for t in 1..=20 {
                i = transfer_symmetric(i, mu, &ch, &table).0;
                let want = table.eval(trace.nu_seq[t]);
                assert!(
                    (i - want).abs() < 1e-6,
                    "mu={mu} eps={eps} alpha={alpha} t={t}: {i} vs {want}"
                );
            }
        }
    }

    #[test]
    fn representation_equivalence_single() {
        let lambda = 2.0 / (3.0 * std::f64::consts::E);
        let kf = 0.1;
        let nu = ((1.0 - kf) / kf as f64).ln();
        let ch = binary_flip_channel(0.4).unwrap();
        let table = build_j_table(
            JModel::Single { channel: &ch, k_frac: kf },
            1.05 * lambda * nu.exp(),
            DEFAULT_CURVE_GRID,
        )
        .unwrap();
        let trace = de_iterate_single(lambda, nu, &ch, 20, 0.0).unwrap();
        let mut i = table.eval(0.0);
        for t in 1..=20 {
            i = transfer_single(i, lambda, nu, &ch, &table).0;
            let want = table.eval(trace.v_seq[t]);
            assert!((i - want).abs() < 1e-6, "t={t}: {i} vs {want}");
        }
    }

    #[test]
    fn transfer_monotone_in_input() {
        let ch = erasure_flip_channel(0.2, 0.3).unwrap();
        let mu = 3.0;
        let table = build_j_table(JModel::Symmetric(&ch), 1.05 * mu * mu / 4.0, 256).unwrap();
        let curve = compute_exit_curve_symmetric(mu, &ch, &table, 256);
        for w in curve.i_out.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "transfer not monotone");
        }
    }

    #[test]
    fn synthetic_linear_map_crossing() {
        // T(I) = I/2 + 0.1 has its fixed point at 0.2
        let n = 101;
        let i_in: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
        let i_out: Vec<f64> = i_in.iter().map(|&i| 0.5 * i + 0.1).collect();
        let mut curve = ExitCurve {
            model: "synthetic".into(),
            params: serde_json::json!({}),
            i_in,
            i_out,
            i_max: 1.0,
            crossings: vec![],
            staircase: vec![],
            clamped: false,
        };
        let crossings = find_crossings(&curve, 1e-9);
        assert_eq!(crossings.len(), 1);
        assert!((crossings[0].i_fixed - 0.2).abs() < 1e-9);
        assert!(crossings[0].stable);
        curve.staircase = staircase(&curve, 0.0, 1000, 1e-12);
        assert!((curve.staircase.last().unwrap() - 0.2).abs() < 1e-9);
    }

    #[test]
    fn synthetic_staircase_step_count() {
        // T(I) = min(I + 0.25, 1) from 0 reaches 1 in 4 steps
        let n = 201;
        let i_in: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
        let i_out: Vec<f64> = i_in.iter().map(|&i| (i + 0.25f64).min(1.0)).collect();
        let curve = ExitCurve {
            model: "synthetic".into(),
            params: serde_json::json!({}),
            i_in,
            i_out,
            i_max: 1.0,
            crossings: vec![],
            staircase: vec![],
            clamped: false,
        };
        let path = staircase(&curve, 0.0, 100, 1e-12);
        // path = [0, 0.25, 0.5, 0.75, 1.0, 1.0]: four productive steps
        assert!((path[4] - 1.0).abs() < 1e-12);
        assert_eq!(path.len(), 6);
    }

    #[test]
    fn erased_curve_stays_at_origin() {
        let ch = erasure_flip_channel(0.0, 0.3).unwrap();
        let table = build_j_table(JModel::Symmetric(&ch), 1.05, 64).unwrap();
        let curve = compute_exit_curve_symmetric(2.0, &ch, &table, 64);
        assert!(curve.staircase.iter().all(|&i| i.abs() < 1e-12));
        assert!(!curve.crossings.is_empty());
        assert!(curve.crossings[0].i_fixed.abs() < 1e-12);
    }

    #[test]
    fn strong_graph_operating_point_near_ceiling() {
        // mu = 6, alpha = 0.4, eps = 0.1: the only reachable crossing sits
        // above 0.99 bits
        let ch = erasure_flip_channel(0.1, 0.4).unwrap();
        let mu = 6.0;
        let table = build_j_table(JModel::Symmetric(&ch), 1.05 * mu * mu / 4.0, 512).unwrap();
        let curve = compute_exit_curve_symmetric(mu, &ch, &table, 512);
        let op = curve.staircase.last().copied().unwrap();
        assert!(op > 0.99, "operating point {op}");
    }

    #[test]
    fn operating_point_maps_to_de_fixed_point() {
        let ch = erasure_flip_channel(1.0, 0.1).unwrap();
        let mu = 2.0;
        let table = build_j_table(JModel::Symmetric(&ch), 1.05 * mu * mu / 4.0, 512).unwrap();
        let curve = compute_exit_curve_symmetric(mu, &ch, &table, 512);
        let i_op = *curve.staircase.last().unwrap();
        let (nu_op, _) = table.invert(i_op);
        let trace = de_iterate_symmetric(mu, &ch, 5000, 1e-13).unwrap();
        assert!(
            (nu_op - trace.nu_bar).abs() < 1e-4,
            "nu from curve {nu_op} vs de {}",
            trace.nu_bar
        );
    }

    #[test]
    fn crossing_residual_small() {
        let ch = erasure_flip_channel(1.0, 0.2).unwrap();
        let mu = 2.0;
        let table = build_j_table(JModel::Symmetric(&ch), 1.05 * mu * mu / 4.0, 512).unwrap();
        let curve = compute_exit_curve_symmetric(mu, &ch, &table, 512);
        assert!(!curve.crossings.is_empty());
        for c in &curve.crossings {
            let t = curve_transfer(&curve, c.i_fixed);
            assert!((t - c.i_fixed).abs() < 1e-9);
        }
    }

    #[test]
    fn scan_single_lambda_finds_flip() {
        let cfg = ScanConfig {
            model: "single".into(),
            scan_parameter: ScanParameter::Lambda,
            lo: 0.05,
            hi: 5.0,
            bisect_tol: 1e-3,
            mu: None,
            epsilon: None,
            alpha: Some(0.4),
            lambda: None,
            k_frac: Some(0.1),
            max_de_iters: 200_000,
        };
        let report = threshold_scan(&cfg).unwrap();
        assert!(report.critical.is_some());
        assert!(report.bracket_hi - report.bracket_lo <= 1e-3);
        let c = report.critical.unwrap();
        assert!(c > 0.5 && c < 3.0, "lambda* = {c}");
    }

    #[test]
    fn scan_reports_none_when_predicate_constant() {
        // a narrow lambda range well below the flip: predicate constant false
        let cfg = ScanConfig {
            model: "single".into(),
            scan_parameter: ScanParameter::Lambda,
            lo: 0.05,
            hi: 0.1,
            bisect_tol: 1e-3,
            mu: None,
            epsilon: None,
            alpha: Some(0.4),
            lambda: None,
            k_frac: Some(0.1),
            max_de_iters: 50_000,
        };
        let report = threshold_scan(&cfg).unwrap();
        assert!(report.critical.is_none());
        assert!(!report.predicate_lo && !report.predicate_hi);
    }
}
