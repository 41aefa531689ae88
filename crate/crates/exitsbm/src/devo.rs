//! Density evolution: the scalar recursions tracking the Gaussian parameter
//! of BP message distributions, fixed points, asymptotic residual-error
//! predictors, and Monte Carlo validation of the Gaussian approximations on
//! sampled trees.
//!
//! Symmetric model: `nu_{t+1} = mu^2/4 * h(nu_t)` with
//! `h(nu) = E[tanh(nu + sqrt(nu) Z + U+)]`; the depth-t message statistic is
//! approximately `N(+-nu_t, nu_t)` given the root label.
//!
//! Single community: `v_{t+1} = lambda * E[(e^-nu + e^-(v/2 + sqrt(v) Z) - U1)^-1]`
//! (exponent grouping as in the recursion below); the statistic is
//! approximately `N(+-v_t/2, v_t)`.

use crate::bp::{f_message, m_message};
use crate::channels::{LlrModel, SideInfoChannel};
use crate::error::{Error, Result};
use crate::graphgen::SingleCommunityParams;
use crate::numerics::{normal_cdf, q_function, DiscreteDist, QuadratureRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_DE_TOL: f64 = 1e-10;
pub const DEFAULT_DE_MAX_ITERS: usize = 500;

/// `h(nu) = E_{Z, U+}[tanh(nu + sqrt(nu) Z + U+)]` with the default 64-node
/// rule.
pub fn h_nu(nu: f64, u_plus: &DiscreteDist) -> f64 {
    h_nu_with(nu, u_plus, QuadratureRule::default_rule())
}

pub fn h_nu_with(nu: f64, u_plus: &DiscreteDist, rule: &QuadratureRule) -> f64 {
    debug_assert!(nu >= 0.0);
    if nu == 0.0 {
        return u_plus.expect(f64::tanh);
    }
    let s = nu.sqrt();
    u_plus.expect(|u| rule.expect(|z| (nu + s * z + u).tanh()))
}

/// One symmetric DE step `mu^2/4 * h(nu)`.
pub fn symmetric_update(nu: f64, mu: f64, u_plus: &DiscreteDist, rule: &QuadratureRule) -> f64 {
    0.25 * mu * mu * h_nu_with(nu, u_plus, rule)
}

/// One single-community DE step
/// `lambda * E_{Z, U1}[1 / (e^-nu + e^(-(v/2 + sqrt(v) Z) - U1))]`.
pub fn single_update(
    v: f64,
    lambda: f64,
    threshold_nu: f64,
    u_one: &DiscreteDist,
    rule: &QuadratureRule,
) -> f64 {
    debug_assert!(v >= 0.0);
    let floor = (-threshold_nu).exp();
    if v == 0.0 {
        return lambda * u_one.expect(|u| 1.0 / (floor + (-u).exp()));
    }
    let s = v.sqrt();
    lambda * u_one.expect(|u| rule.expect(|z| 1.0 / (floor + (-(0.5 * v + s * z) - u).exp())))
}

/// Symmetric-model DE trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeTraceSymmetric {
    pub mu: f64,
    /// `nu_0 = 0, nu_1, ...` (monotone nondecreasing, bounded by mu^2/4).
    pub nu_seq: Vec<f64>,
    /// Last iterate; the smallest fixed point when `converged` is set, by
    /// monotone convergence from 0.
    pub nu_bar: f64,
    pub converged: bool,
    /// Residual-error prediction at each `nu_t`.
    pub predicted_error: Vec<f64>,
}

/// Iterates the symmetric recursion from `nu_0 = 0` until `|delta| < tol` or
/// `t_max` steps. `tol = 0` forces exactly `t_max` steps (useful to read off
/// `nu_t` at a fixed t).
pub fn de_iterate_symmetric(
    mu: f64,
    channel: &SideInfoChannel,
    t_max: usize,
    tol: f64,
) -> Result<DeTraceSymmetric> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::invalid(format!("mu = {mu} must be finite and >= 0")));
    }
    if t_max == 0 {
        return Err(Error::invalid("t_max must be >= 1"));
    }
    let spec = channel.llr_spec(LlrModel::SymmetricHalfLog);
    let rule = QuadratureRule::default_rule();
    let mut nu_seq = vec![0.0f64];
    let mut converged = false;
    for _ in 0..t_max {
        let cur = *nu_seq.last().unwrap();
        let next = symmetric_update(cur, mu, &spec.plus_dist, rule);
        nu_seq.push(next);
        if (next - cur).abs() < tol {
            converged = true;
            break;
        }
    }
    let predicted_error = nu_seq
        .iter()
        .map(|&nu| residual_error_symmetric(nu, channel))
        .collect();
    Ok(DeTraceSymmetric {
        mu,
        nu_bar: *nu_seq.last().unwrap(),
        converged,
        nu_seq,
        predicted_error,
    })
}

/// Asymptotic misclassification fraction at state `nu_bar`:
/// `0.5 (E_{U+}[Q((nu + U+)/sqrt(nu))] + E_{U-}[Q((nu - U-)/sqrt(nu))])`.
/// The `nu_bar = 0` degenerate case is the one-sided limit with mass exactly
/// at the threshold counted half, matching the `R >= 0` tie rule.
pub fn residual_error_symmetric(nu_bar: f64, channel: &SideInfoChannel) -> f64 {
    let spec = channel.llr_spec(LlrModel::SymmetricHalfLog);
    if nu_bar == 0.0 {
        let up = &spec.plus_dist;
        let um = &spec.minus_dist;
        return 0.5
            * (up.mass_where(|u| u < 0.0)
                + 0.5 * up.mass_where(|u| u == 0.0)
                + um.mass_where(|u| u > 0.0)
                + 0.5 * um.mass_where(|u| u == 0.0));
    }
    let s = nu_bar.sqrt();
    let a = spec.plus_dist.expect(|u| q_function((nu_bar + u) / s));
    let b = spec.minus_dist.expect(|u| q_function((nu_bar - u) / s));
    0.5 * (a + b)
}

/// Single-community DE trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeTraceSingle {
    pub lambda: f64,
    pub threshold_nu: f64,
    pub v_seq: Vec<f64>,
    pub v_bar: f64,
    pub converged: bool,
    pub predicted_error: Vec<f64>,
}

pub fn de_iterate_single(
    lambda: f64,
    threshold_nu: f64,
    channel: &SideInfoChannel,
    t_max: usize,
    tol: f64,
) -> Result<DeTraceSingle> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda = {lambda} must be finite and >= 0")));
    }
    if t_max == 0 {
        return Err(Error::invalid("t_max must be >= 1"));
    }
    let spec = channel.llr_spec(LlrModel::SingleFullLog);
    let rule = QuadratureRule::default_rule();
    let mut v_seq = vec![0.0f64];
    let mut converged = false;
    for _ in 0..t_max {
        let cur = *v_seq.last().unwrap();
        let next = single_update(cur, lambda, threshold_nu, &spec.plus_dist, rule);
        v_seq.push(next);
        if (next - cur).abs() < tol {
            converged = true;
            break;
        }
    }
    let predicted_error = v_seq
        .iter()
        .map(|&v| residual_error_single(v, threshold_nu, channel))
        .collect();
    Ok(DeTraceSingle {
        lambda,
        threshold_nu,
        v_bar: *v_seq.last().unwrap(),
        converged,
        v_seq,
        predicted_error,
    })
}

/// Predicted `E|C-hat symdiff C*| / K` at state `v`:
/// `(n-K)/K E_{U0}[Q((nu + v/2 - U0)/sqrt(v))] + E_{U1}[Q((-nu + v/2 + U1)/sqrt(v))]`.
/// `v = 0` is the step-function limit with boundary mass counted half.
pub fn residual_error_single(v: f64, threshold_nu: f64, channel: &SideInfoChannel) -> f64 {
    let spec = channel.llr_spec(LlrModel::SingleFullLog);
    let ratio = threshold_nu.exp(); // (n - K) / K
    let u1 = &spec.plus_dist;
    let u0 = &spec.minus_dist;
    if v == 0.0 {
        let t1 = u0.mass_where(|u| u > threshold_nu) + 0.5 * u0.mass_where(|u| u == threshold_nu);
        let t2 = u1.mass_where(|u| u < threshold_nu) + 0.5 * u1.mass_where(|u| u == threshold_nu);
        return ratio * t1 + t2;
    }
    let s = v.sqrt();
    let t1 = u0.expect(|u| q_function((threshold_nu + 0.5 * v - u) / s));
    let t2 = u1.expect(|u| q_function((-threshold_nu + 0.5 * v + u) / s));
    ratio * t1 + t2
}

/// Conditional sample statistics of the root message statistic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondStats {
    pub mean: f64,
    pub variance: f64,
    /// Kolmogorov-Smirnov distance to the predicted Gaussian.
    pub ks_distance: f64,
    /// Standard error of the mean estimate.
    pub se_mean: f64,
    /// Standard error of the variance estimate.
    pub se_variance: f64,
}

/// Monte Carlo validation report for the Gaussian density-evolution
/// approximation on sampled trees.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McTreeReport {
    pub model: String,
    pub t: u32,
    pub num_samples: usize,
    pub predicted_mean_plus: f64,
    pub predicted_mean_minus: f64,
    pub predicted_variance: f64,
    pub plus: CondStats,
    pub minus: CondStats,
    /// Monte Carlo estimate of `E[e^(-2 Gamma) | label +]` (symmetric model
    /// only); exactly 1 in distribution.
    pub change_of_measure_mean: Option<f64>,
    pub change_of_measure_se: Option<f64>,
    /// The `O(a^(-1/2))`-type scale all paper statements carry.
    pub finite_size_scale: f64,
}

const MC_CHUNK: usize = 1024;

fn derive_seed(master: u64, stream: u64, idx: u64) -> u64 {
    // splitmix64 over a mixed key
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ idx.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct SymbolSampler {
    cum_plus: Vec<f64>,
    cum_minus: Vec<f64>,
}

impl SymbolSampler {
    fn new(channel: &SideInfoChannel) -> Self {
        let cum = |v: &[f64]| {
            let mut acc = 0.0;
            v.iter()
                .map(|&p| {
                    acc += p;
                    acc
                })
                .collect::<Vec<f64>>()
        };
        SymbolSampler {
            cum_plus: cum(channel.plus_likelihoods()),
            cum_minus: cum(channel.minus_likelihoods()),
        }
    }

    fn sample(&self, plus_label: bool, rng: &mut ChaCha8Rng) -> usize {
        let cum = if plus_label { &self.cum_plus } else { &self.cum_minus };
        let u: f64 = rng.random();
        cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
    }
}

fn poisson_u64(rng: &mut ChaCha8Rng, dist: &Option<Poisson<f64>>) -> u64 {
    match dist {
        Some(d) => d.sample(rng) as u64,
        None => 0,
    }
}

fn make_poisson(lambda: f64) -> Option<Poisson<f64>> {
    if lambda > 0.0 {
        Some(Poisson::new(lambda).expect("finite positive lambda"))
    } else {
        None
    }
}

/// Context for the symmetric-model sampler. The deepest level is drawn by
/// Poisson splitting: the multiset of grandchild LLR kernels collapses to
/// independent per-symbol Poisson counts, which is an exact rewrite of the
/// branching process.
struct SymmetricMcCtx {
    t: u32,
    beta: f64,
    h: Vec<f64>,
    f_of_h: Vec<f64>,
    same: Option<Poisson<f64>>,
    opp: Option<Poisson<f64>>,
    split_plus: Vec<Option<Poisson<f64>>>,
    split_minus: Vec<Option<Poisson<f64>>>,
    symbols: SymbolSampler,
}

impl SymmetricMcCtx {
    fn phi(&self, level: u32, plus_label: bool, rng: &mut ChaCha8Rng) -> f64 {
        if level >= self.t {
            return 0.0;
        }
        if level == self.t - 1 {
            let split = if plus_label { &self.split_plus } else { &self.split_minus };
            let mut acc = 0.0;
            for (m, dist) in split.iter().enumerate() {
                if self.f_of_h[m] != 0.0 || dist.is_some() {
                    let c = poisson_u64(rng, dist);
                    acc += c as f64 * self.f_of_h[m];
                }
            }
            return acc;
        }
        let mut acc = 0.0;
        let same = poisson_u64(rng, &self.same);
        let opp = poisson_u64(rng, &self.opp);
        for (count, child_plus) in [(same, plus_label), (opp, !plus_label)] {
            for _ in 0..count {
                let sym = self.symbols.sample(child_plus, rng);
                let phi_child = self.phi(level + 1, child_plus, rng);
                acc += f_message(phi_child + self.h[sym], self.beta);
            }
        }
        acc
    }
}

/// Samples the root statistic `Phi_root^t` of the symmetric tree conditioned
/// on each root label, and reports moments, KS distance to the DE-predicted
/// Gaussian `N(+-nu_t, nu_t)`, and the change-of-measure statistic
/// `E[e^(-2 Gamma) | +]`. Parallel over sample chunks with per-chunk seeds,
/// so results do not depend on the thread count.
pub fn mc_tree_validate_symmetric(
    a: f64,
    b: f64,
    channel: &SideInfoChannel,
    t: u32,
    num_samples: usize,
    seed: u64,
) -> Result<McTreeReport> {
    if !(a > b && b > 0.0) {
        return Err(Error::invalid("need a > b > 0"));
    }
    if num_samples == 0 {
        return Err(Error::invalid("num_samples must be positive"));
    }
    let mu = (a - b) / b.sqrt();
    let beta = 0.5 * (a / b).ln();
    let spec = channel.llr_spec(LlrModel::SymmetricHalfLog);
    let trace = de_iterate_symmetric(mu, channel, (t as usize).max(1), 0.0)?;
    let nu_t = trace.nu_seq[t as usize];

    let m = channel.alphabet_size();
    let ap = channel.plus_likelihoods();
    let am = channel.minus_likelihoods();
    let h: Vec<f64> = (0..m)
        .map(|s| channel.llr_of(s, LlrModel::SymmetricHalfLog).expect("in range"))
        .collect();
    let ctx = SymmetricMcCtx {
        t,
        beta,
        f_of_h: h.iter().map(|&hm| f_message(hm, beta)).collect(),
        h,
        same: make_poisson(0.5 * a),
        opp: make_poisson(0.5 * b),
        split_plus: (0..m)
            .map(|s| make_poisson(0.5 * a * ap[s] + 0.5 * b * am[s]))
            .collect(),
        split_minus: (0..m)
            .map(|s| make_poisson(0.5 * a * am[s] + 0.5 * b * ap[s]))
            .collect(),
        symbols: SymbolSampler::new(channel),
    };

    let sample_label = |plus: bool, stream: u64| -> Vec<f64> {
        let chunks = num_samples.div_ceil(MC_CHUNK);
        let per_chunk: Vec<Vec<f64>> = (0..chunks as u64)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, c));
                let count = MC_CHUNK.min(num_samples - (c as usize) * MC_CHUNK);
                (0..count).map(|_| ctx.phi(0, plus, &mut rng)).collect()
            })
            .collect();
        per_chunk.concat()
    };
    let phi_plus = sample_label(true, 1);
    let phi_minus = sample_label(false, 2);

    // change of measure uses Gamma = h_root + Phi with an independent h_root
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3, 0));
    let mut cm_sum = 0.0;
    let mut cm_sumsq = 0.0;
    for &phi in &phi_plus {
        let sym = ctx.symbols.sample(true, &mut rng);
        let gamma = spec.values[sym] + phi;
        let v = (-2.0 * gamma).exp();
        cm_sum += v;
        cm_sumsq += v * v;
    }
    let nmc = phi_plus.len() as f64;
    let cm_mean = cm_sum / nmc;
    let cm_se = ((cm_sumsq / nmc - cm_mean * cm_mean).max(0.0) / nmc).sqrt();

    Ok(McTreeReport {
        model: "symmetric".into(),
        t,
        num_samples,
        predicted_mean_plus: nu_t,
        predicted_mean_minus: -nu_t,
        predicted_variance: nu_t,
        plus: cond_stats(&phi_plus, nu_t, nu_t),
        minus: cond_stats(&phi_minus, -nu_t, nu_t),
        change_of_measure_mean: Some(cm_mean),
        change_of_measure_se: Some(cm_se),
        finite_size_scale: 1.0 / a.sqrt(),
    })
}

struct SingleMcCtx {
    t: u32,
    offset: f64,
    rho: f64,
    nu: f64,
    h: Vec<f64>,
    m_of_h: Vec<f64>,
    ones_given_one: Option<Poisson<f64>>,
    ones_given_zero: Option<Poisson<f64>>,
    zeros: Option<Poisson<f64>>,
    split_one: Vec<Option<Poisson<f64>>>,
    split_zero: Vec<Option<Poisson<f64>>>,
    symbols: SymbolSampler,
}

impl SingleMcCtx {
    fn psi(&self, level: u32, label_one: bool, rng: &mut ChaCha8Rng) -> f64 {
        if level >= self.t {
            return 0.0;
        }
        if level == self.t - 1 {
            let split = if label_one { &self.split_one } else { &self.split_zero };
            let mut acc = -self.offset;
            for (m, dist) in split.iter().enumerate() {
                let c = poisson_u64(rng, dist);
                acc += c as f64 * self.m_of_h[m];
            }
            return acc;
        }
        let ones = poisson_u64(
            rng,
            if label_one { &self.ones_given_one } else { &self.ones_given_zero },
        );
        let zeros = poisson_u64(rng, &self.zeros);
        let mut acc = -self.offset;
        for (count, child_one) in [(ones, true), (zeros, false)] {
            for _ in 0..count {
                let sym = self.symbols.sample(child_one, rng);
                let psi_child = self.psi(level + 1, child_one, rng);
                acc += m_message(self.h[sym] + psi_child, self.rho, self.nu);
            }
        }
        acc
    }
}

/// Single-community analogue: samples `psi_root^t` conditioned on each root
/// label and compares against `N(+-v_t/2, v_t)`.
pub fn mc_tree_validate_single(
    params: &SingleCommunityParams,
    channel: &SideInfoChannel,
    t: u32,
    num_samples: usize,
    seed: u64,
) -> Result<McTreeReport> {
    if num_samples == 0 {
        return Err(Error::invalid("num_samples must be positive"));
    }
    let nu = params.threshold_nu();
    let trace = de_iterate_single(params.lambda(), nu, channel, (t as usize).max(1), 0.0)?;
    let v_t = trace.v_seq[t as usize];

    let m = channel.alphabet_size();
    let ap = channel.plus_likelihoods();
    let am = channel.minus_likelihoods();
    let kf = params.k as f64;
    let nk = (params.n - params.k) as f64;
    let rho = params.p / params.q;
    let h: Vec<f64> = (0..m)
        .map(|s| channel.llr_of(s, LlrModel::SingleFullLog).expect("in range"))
        .collect();
    let ctx = SingleMcCtx {
        t,
        offset: kf * (params.p - params.q),
        rho,
        nu,
        m_of_h: h.iter().map(|&hm| m_message(hm, rho, nu)).collect(),
        h,
        ones_given_one: make_poisson(kf * params.p),
        ones_given_zero: make_poisson(kf * params.q),
        zeros: make_poisson(nk * params.q),
        split_one: (0..m)
            .map(|s| make_poisson(kf * params.p * ap[s] + nk * params.q * am[s]))
            .collect(),
        split_zero: (0..m)
            .map(|s| make_poisson(kf * params.q * ap[s] + nk * params.q * am[s]))
            .collect(),
        symbols: SymbolSampler::new(channel),
    };

    let sample_label = |one: bool, stream: u64| -> Vec<f64> {
        let chunks = num_samples.div_ceil(MC_CHUNK);
        let per_chunk: Vec<Vec<f64>> = (0..chunks as u64)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, c));
                let count = MC_CHUNK.min(num_samples - (c as usize) * MC_CHUNK);
                (0..count).map(|_| ctx.psi(0, one, &mut rng)).collect()
            })
            .collect();
        per_chunk.concat()
    };
    let psi_one = sample_label(true, 1);
    let psi_zero = sample_label(false, 2);

    Ok(McTreeReport {
        model: "single".into(),
        t,
        num_samples,
        predicted_mean_plus: 0.5 * v_t,
        predicted_mean_minus: -0.5 * v_t,
        predicted_variance: v_t,
        plus: cond_stats(&psi_one, 0.5 * v_t, v_t),
        minus: cond_stats(&psi_zero, -0.5 * v_t, v_t),
        change_of_measure_mean: None,
        change_of_measure_se: None,
        finite_size_scale: 1.0 / (kf * params.q).sqrt(),
    })
}

fn cond_stats(samples: &[f64], pred_mean: f64, pred_var: f64) -> CondStats {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let m4 = samples.iter().map(|&x| (x - mean).powi(4)).sum::<f64>() / n;
    let se_mean = (var / n).sqrt();
    let se_variance = ((m4 - var * var).max(0.0) / n).sqrt();
    CondStats {
        mean,
        variance: var,
        ks_distance: ks_distance(samples, pred_mean, pred_var),
        se_mean,
        se_variance,
    }
}

/// KS distance between the empirical distribution and `N(mean, var)`; a zero
/// variance compares against the point mass at `mean` (using the CDF's left
/// and right limits at the atom).
pub fn ks_distance(samples: &[f64], mean: f64, var: f64) -> f64 {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut ks = 0.0f64;
    let mut i = 0usize;
    while i < xs.len() {
        let x = xs[i];
        // tied values share one empirical jump
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let (cdf_left, cdf_right) = if var > 0.0 {
            let c = normal_cdf((x - mean) / var.sqrt());
            (c, c)
        } else {
            (
                if x <= mean { 0.0 } else { 1.0 },
                if x < mean { 0.0 } else { 1.0 },
            )
        };
        let emp_before = i as f64 / n;
        let emp_at = j as f64 / n;
        ks = ks.max((cdf_left - emp_before).abs()).max((emp_at - cdf_right).abs());
        i = j;
    }
    ks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{binary_flip_channel, erasure_flip_channel};

    fn dist_zero() -> DiscreteDist {
        DiscreteDist::point_mass(0.0)
    }

    #[test]
    fn h_at_zero() {
        assert_eq!(h_nu(0.0, &dist_zero()), 0.0);
        // closed form eps (1 - 2 alpha)^2 via tanh(gamma) = 1 - 2 alpha
        for (eps, alpha) in [(0.1, 0.4), (1.0, 0.1), (0.7, 0.25)] {
            let ch = erasure_flip_channel(eps, alpha).unwrap();
            let spec = ch.llr_spec(LlrModel::SymmetricHalfLog);
            let h0 = h_nu(0.0, &spec.plus_dist);
            let closed = eps * (1.0 - 2.0 * alpha) * (1.0 - 2.0 * alpha);
            assert!((h0 - closed).abs() < 1e-14, "eps={eps} alpha={alpha}: {h0}");
        }
    }

    #[test]
    fn h_saturates() {
        let ch = erasure_flip_channel(0.5, 0.3).unwrap();
        let spec = ch.llr_spec(LlrModel::SymmetricHalfLog);
        assert!((h_nu(100.0, &spec.plus_dist) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn h_monotone_on_grid() {
        let ch = erasure_flip_channel(0.4, 0.2).unwrap();
        let spec = ch.llr_spec(LlrModel::SymmetricHalfLog);
        let mut prev = -1.0;
        for i in 0..=200 {
            let nu = i as f64 * 0.05;
            let v = h_nu(nu, &spec.plus_dist);
            assert!(v >= prev - 1e-12, "h not monotone at nu={nu}");
            assert!((-1.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn de_symmetric_erased_is_stuck() {
        let ch = erasure_flip_channel(0.0, 0.3).unwrap();
        let trace = de_iterate_symmetric(4.0, &ch, 50, 0.0).unwrap();
        assert!(trace.nu_seq.iter().all(|&v| v == 0.0));
        assert_eq!(trace.nu_bar, 0.0);
    }

    #[test]
    fn de_symmetric_zero_mu() {
        let ch = erasure_flip_channel(0.5, 0.3).unwrap();
        let trace = de_iterate_symmetric(0.0, &ch, 10, 1e-12).unwrap();
        assert_eq!(trace.nu_bar, 0.0);
        assert!(trace.converged);
    }

    #[test]
    fn de_symmetric_strong_graph_fixed_point() {
        // mu = 6, alpha = 0.4, eps = 0.1: fixed point approaches mu^2/4 = 9
        let ch = erasure_flip_channel(0.1, 0.4).unwrap();
        let trace = de_iterate_symmetric(6.0, &ch, 500, 1e-12).unwrap();
        assert!(trace.converged);
        assert!(trace.nu_bar > 8.0 && trace.nu_bar < 9.0, "nu_bar = {}", trace.nu_bar);
        assert!((trace.nu_bar - 8.961_938).abs() < 1e-3, "nu_bar = {}", trace.nu_bar);
    }

    #[test]
    fn de_symmetric_monotone_and_bounded() {
        let ch = erasure_flip_channel(0.3, 0.15).unwrap();
        let mu = 3.0;
        let trace = de_iterate_symmetric(mu, &ch, 300, 1e-13).unwrap();
        let bound = 0.25 * mu * mu;
        for w in trace.nu_seq.windows(2) {
            assert!(w[1] >= w[0] - 1e-15);
        }
        assert!(trace.nu_seq.iter().all(|&v| v <= bound + 1e-12));
    }

    #[test]
    fn de_symmetric_smallest_fixed_point_vs_grid_scan() {
        // scan nu - mu^2/4 h(nu) on a 1e4-point grid; the first sign change
        // brackets the iterate limit
        let ch = erasure_flip_channel(0.2, 0.25).unwrap();
        let spec = ch.llr_spec(LlrModel::SymmetricHalfLog);
        let mu = 2.5;
        let trace = de_iterate_symmetric(mu, &ch, 2000, 1e-13).unwrap();
        let bound = 0.25 * mu * mu;
        let g = |nu: f64| nu - symmetric_update(nu, mu, &spec.plus_dist, QuadratureRule::default_rule());
        let grid = 10_000;
        let mut first_cross = None;
        let mut prev = g(1e-12); // just off the trivial root at 0
        for i in 1..=grid {
            let nu = i as f64 * bound / grid as f64;
            let cur = g(nu);
            if prev < 0.0 && cur >= 0.0 {
                first_cross = Some(nu);
                break;
            }
            prev = cur;
        }
        let cell = bound / grid as f64;
        match first_cross {
            Some(nu) => assert!(
                (nu - trace.nu_bar).abs() <= cell + 1e-6,
                "grid {nu} vs iterate {}",
                trace.nu_bar
            ),
            None => panic!("no fixed point found by grid scan"),
        }
    }

    #[test]
    fn residual_symmetric_degenerate_limits() {
        let ch0 = erasure_flip_channel(0.0, 0.3).unwrap();
        assert_eq!(residual_error_symmetric(0.0, &ch0), 0.5);
        for (eps, alpha) in [(0.3, 0.2), (1.0, 0.4), (0.8, 0.1)] {
            let ch = erasure_flip_channel(eps, alpha).unwrap();
            let expected = eps * alpha + (1.0 - eps) / 2.0;
            let got = residual_error_symmetric(0.0, &ch);
            assert!((got - expected).abs() < 1e-14, "eps={eps} alpha={alpha}");
        }
    }

    #[test]
    fn residual_symmetric_small_at_strong_fixed_point() {
        let ch = erasure_flip_channel(0.1, 0.4).unwrap();
        assert!(residual_error_symmetric(9.0, &ch) < 0.01);
    }

    #[test]
    fn residual_symmetric_nonincreasing_in_nu() {
        let ch = erasure_flip_channel(0.5, 0.2).unwrap();
        let mut prev = 1.0;
        for i in 0..=100 {
            let nu = i as f64 * 0.2;
            let e = residual_error_symmetric(nu, &ch);
            assert!(e <= prev + 1e-12, "error increased at nu={nu}");
            prev = e;
        }
    }

    #[test]
    fn de_single_zero_lambda() {
        let ch = binary_flip_channel(0.3).unwrap();
        let trace = de_iterate_single(0.0, (9.0f64).ln(), &ch, 20, 0.0).unwrap();
        assert!(trace.v_seq.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn de_single_first_step_closed_form() {
        // v1 = lambda E_{U1}[1 / (e^-nu + e^-U1)]
        let ch = binary_flip_channel(0.4).unwrap();
        let nu = (9.0f64).ln();
        let lambda = 0.7;
        let trace = de_iterate_single(lambda, nu, &ch, 1, 0.0).unwrap();
        let u = 1.5f64.ln();
        let expected = lambda
            * (0.6 / ((1.0 / 9.0) + (-u).exp()) + 0.4 / ((1.0 / 9.0) + u.exp()));
        assert!((trace.v_seq[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn de_single_bottleneck_regime() {
        // lambda = 2/(3e), alpha = 0.4, K/n = 0.1: converges to a small fixed
        // point well below the ceiling lambda e^nu
        let lambda = 2.0 / (3.0 * std::f64::consts::E);
        let ch = binary_flip_channel(0.4).unwrap();
        let nu = (9.0f64).ln();
        let trace = de_iterate_single(lambda, nu, &ch, 500, 1e-12).unwrap();
        assert!(trace.converged);
        assert!((trace.v_bar - 0.313_07).abs() < 1e-3, "v_bar = {}", trace.v_bar);
        assert!(trace.v_bar < lambda * 9.0);
        // bound v_t <= lambda e^nu
        assert!(trace.v_seq.iter().all(|&v| v <= lambda * 9.0 + 1e-9));
    }

    #[test]
    fn residual_single_limits() {
        let ch = binary_flip_channel(0.5).unwrap(); // U = 0
        let nu = (9.0f64).ln();
        // v = 0, U = 0 < nu: type II dominates, error = 1
        assert!((residual_error_single(0.0, nu, &ch) - 1.0).abs() < 1e-12);
        // v huge: both Q arguments diverge, error -> 0
        assert!(residual_error_single(4000.0, nu, &ch) < 1e-9);
    }

    #[test]
    fn residual_single_v0_point_masses() {
        // alpha = 0.1, K/n = 0.5 (nu = 0): U1 = +-ln 9; type I: P(U0 > 0) = 0.1,
        // type II: P(U1 < 0) = 0.1; ratio = 1
        let ch = binary_flip_channel(0.1).unwrap();
        let got = residual_error_single(0.0, 0.0, &ch);
        assert!((got - 0.2).abs() < 1e-12, "{got}");
    }

    #[test]
    fn quadrature_doubling_within_tolerance() {
        // ranges covering the recursions' working states (the symmetric
        // figure regimes stay below nu ~ 1, the single bottleneck below v ~ 3)
        let ch = erasure_flip_channel(0.6, 0.2).unwrap();
        let spec = ch.llr_spec(LlrModel::SymmetricHalfLog);
        for i in 0..=45 {
            let nu = i as f64 * 0.1;
            let a = h_nu_with(nu, &spec.plus_dist, QuadratureRule::default_rule());
            let b = h_nu_with(nu, &spec.plus_dist, QuadratureRule::doubled_rule());
            assert!((a - b).abs() < 1e-8, "h_nu quadrature drift at nu={nu}");
        }
        let chb = binary_flip_channel(0.4).unwrap();
        let specb = chb.llr_spec(LlrModel::SingleFullLog);
        let nu = (9.0f64).ln();
        for i in 0..=52 {
            let v = i as f64 * 0.25;
            let a = single_update(v, 0.5, nu, &specb.plus_dist, QuadratureRule::default_rule());
            let b = single_update(v, 0.5, nu, &specb.plus_dist, QuadratureRule::doubled_rule());
            assert!((a - b).abs() < 1e-8, "single update quadrature drift at v={v}");
        }
    }

    #[test]
    fn mc_symmetric_depth_zero_exact() {
        let ch = erasure_flip_channel(1.0, 0.1).unwrap();
        let rep = mc_tree_validate_symmetric(440.0, 400.0, &ch, 0, 200, 3).unwrap();
        assert_eq!(rep.plus.mean, 0.0);
        assert_eq!(rep.plus.variance, 0.0);
        assert_eq!(rep.plus.ks_distance, 0.0);
    }

    #[test]
    fn mc_symmetric_depth_one_moments() {
        let ch = erasure_flip_channel(1.0, 0.1).unwrap();
        let n = 20_000;
        let rep = mc_tree_validate_symmetric(440.0, 400.0, &ch, 1, n, 7).unwrap();
        let slack = 5.0 * rep.finite_size_scale;
        assert!(
            (rep.plus.mean - rep.predicted_mean_plus).abs() < 3.0 * rep.plus.se_mean + slack,
            "mean {} vs {}",
            rep.plus.mean,
            rep.predicted_mean_plus
        );
        assert!(
            (rep.plus.variance - rep.predicted_variance).abs()
                < 3.0 * rep.plus.se_variance + slack
        );
        assert!(
            (rep.minus.mean - rep.predicted_mean_minus).abs() < 3.0 * rep.minus.se_mean + slack
        );
    }

    #[test]
    fn mc_symmetric_deterministic_across_runs() {
        let ch = erasure_flip_channel(1.0, 0.2).unwrap();
        let a = mc_tree_validate_symmetric(55.0, 45.0, &ch, 2, 3000, 11).unwrap();
        let b = mc_tree_validate_symmetric(55.0, 45.0, &ch, 2, 3000, 11).unwrap();
        assert_eq!(a.plus.mean, b.plus.mean);
        assert_eq!(a.minus.variance, b.minus.variance);
    }

    #[test]
    fn mc_single_depth_one_moments() {
        // gentle desk-scale parameters: K q = 30, (n-K) q = 270
        let params = SingleCommunityParams::new(20_000, 2_000, 0.03, 0.015).unwrap();
        let ch = binary_flip_channel(0.3).unwrap();
        let n = 10_000;
        let rep = mc_tree_validate_single(&params, &ch, 1, n, 13).unwrap();
        let slack = 5.0 * rep.finite_size_scale;
        assert!(
            (rep.plus.mean - rep.predicted_mean_plus).abs() < 3.0 * rep.plus.se_mean + slack,
            "mean {} vs predicted {}",
            rep.plus.mean,
            rep.predicted_mean_plus
        );
        assert!(
            (rep.minus.mean - rep.predicted_mean_minus).abs()
                < 3.0 * rep.minus.se_mean + slack
        );
        assert!(
            (rep.plus.variance - rep.predicted_variance).abs()
                < 3.0 * rep.plus.se_variance + slack,
            "var {} vs predicted {}",
            rep.plus.variance,
            rep.predicted_variance
        );
        // shape is already near-Gaussian at these sizes
        assert!(rep.plus.ks_distance < 0.1, "ks = {}", rep.plus.ks_distance);
    }

    #[test]
    fn ks_distance_standard_normal_self_test() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| {
                let u1: f64 = rng.random::<f64>().max(1e-300);
                let u2: f64 = rng.random();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let ks = ks_distance(&xs, 0.0, 1.0);
        assert!(ks < 0.015, "ks = {ks}");
        // and against a wrong mean it is large
        assert!(ks_distance(&xs, 1.0, 1.0) > 0.3);
    }
}
