//! Belief propagation on graphs for both block models, the exact LLR
//! recursions on trees that BP tracks, label estimators, and error metrics.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * The symmetric model works in the half-log LLR domain. Messages and
//!   beliefs both use [`f_message`]; the paper-style update whose log term is
//!   `2 F(x)` is the same algorithm written in the full-log domain.
//! * `t` counts synchronous message rounds; one belief round using the final
//!   messages follows. On a tree-shaped graph the root belief after `t`
//!   rounds equals the depth-`t` tree LLR.
//! * Messages start at zero, updates are synchronous (double-buffered), and
//!   values are clamped to `|x| <= BELIEF_CLAMP` with a counter (far beyond
//!   tanh saturation, so the clamp never changes an estimate).

use crate::channels::SideInfoChannel;
use crate::error::{Error, Result};
use crate::graphgen::{Graph, LabeledTree, SingleCommunityParams};
use serde::{Deserialize, Serialize};

/// Clamp bound for messages and beliefs.
pub const BELIEF_CLAMP: f64 = 500.0;
/// Iteration guard; the tree regime only makes sense for small t.
pub const MAX_ITERATIONS: usize = 100;

/// Symmetric-model message function
/// `F(x) = 0.5 ln((e^(2x+2b) + 1) / (e^(2x) + e^(2b)))`,
/// evaluated in log-sum-exp form: odd, strictly increasing, |F| < beta.
/// The final clamp enforces the mathematical range where cancellation at
/// saturated arguments would otherwise overshoot by an ulp.
pub fn f_message(x: f64, beta: f64) -> f64 {
    let v = 0.5 * (log_add_exp(0.0, 2.0 * x + 2.0 * beta) - log_add_exp(2.0 * x, 2.0 * beta));
    v.clamp(-beta, beta)
}

/// Single-community message function
/// `M(x) = ln((rho e^(x-nu) + 1) / (e^(x-nu) + 1))` with `rho = p/q`:
/// nondecreasing, range `(0, ln rho)`.
pub fn m_message(x: f64, rho: f64, threshold_nu: f64) -> f64 {
    // M(x) = ln(1 + (rho - 1) * sigmoid(x - nu))
    let s = sigmoid(x - threshold_nu);
    ((rho - 1.0) * s).ln_1p()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Result of a BP run: final directed messages, per-node beliefs, and the
/// clamp counter.
#[derive(Debug, Clone)]
pub struct BpState {
    pub beliefs: Vec<f64>,
    pub iterations: usize,
    pub clamp_count: u64,
}

/// Directed-edge view of an undirected graph with reverse-edge indices.
struct DirectedEdges {
    offsets: Vec<usize>,
    dst: Vec<u32>,
    rev: Vec<u32>,
}

impl DirectedEdges {
    fn build(graph: &Graph) -> Self {
        let n = graph.num_nodes();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0usize);
        for i in 0..n {
            offsets.push(offsets[i] + graph.degree(i));
        }
        let m = offsets[n];
        let mut dst = vec![0u32; m];
        let mut rev = vec![0u32; m];
        for i in 0..n {
            let base = offsets[i];
            for (slot, &j) in graph.neighbors(i).iter().enumerate() {
                dst[base + slot] = j;
            }
        }
        for i in 0..n {
            for e in offsets[i]..offsets[i + 1] {
                let j = dst[e] as usize;
                // position of i in j's sorted neighbor list
                let pos = graph
                    .neighbors(j)
                    .binary_search(&(i as u32))
                    .expect("undirected graph is symmetric");
                rev[e] = (offsets[j] + pos) as u32;
            }
        }
        DirectedEdges { offsets, dst, rev }
    }
}

fn clamp_counted(x: f64, clamps: &mut u64) -> f64 {
    if x > BELIEF_CLAMP {
        *clamps += 1;
        BELIEF_CLAMP
    } else if x < -BELIEF_CLAMP {
        *clamps += 1;
        -BELIEF_CLAMP
    } else {
        x
    }
}

fn check_iters(t: usize) -> Result<()> {
    if t == 0 || t > MAX_ITERATIONS {
        return Err(Error::invalid(format!(
            "iteration count t = {t} outside 1..={MAX_ITERATIONS}"
        )));
    }
    Ok(())
}

/// Generic synchronous BP loop. `kernel` is the per-incoming-message
/// transform (F or M); `local(i)` is the per-node additive term (`h_i` or
/// `h_i - K(p-q)`).
fn run_bp(
    graph: &Graph,
    local: &[f64],
    kernel: impl Fn(f64) -> f64,
    t: usize,
) -> BpState {
    let n = graph.num_nodes();
    let edges = DirectedEdges::build(graph);
    let m = edges.dst.len();
    let mut msgs = vec![0.0f64; m];
    let mut next = vec![0.0f64; m];
    let mut kernel_vals = vec![0.0f64; m];
    let mut node_sum = vec![0.0f64; n];
    let mut clamps = 0u64;

    for _round in 0..t {
        for (kv, &mv) in kernel_vals.iter_mut().zip(&msgs) {
            *kv = kernel(mv);
        }
        for i in 0..n {
            let mut s = 0.0;
            for e in edges.offsets[i]..edges.offsets[i + 1] {
                s += kernel_vals[edges.rev[e] as usize];
            }
            node_sum[i] = s;
        }
        for i in 0..n {
            for e in edges.offsets[i]..edges.offsets[i + 1] {
                let without = node_sum[i] - kernel_vals[edges.rev[e] as usize];
                next[e] = clamp_counted(local[i] + without, &mut clamps);
            }
        }
        std::mem::swap(&mut msgs, &mut next);
    }

    // belief round from the final messages
    for (kv, &mv) in kernel_vals.iter_mut().zip(&msgs) {
        *kv = kernel(mv);
    }
    let mut beliefs = vec![0.0f64; n];
    for (i, belief) in beliefs.iter_mut().enumerate() {
        let mut s = 0.0;
        for e in edges.offsets[i]..edges.offsets[i + 1] {
            s += kernel_vals[edges.rev[e] as usize];
        }
        *belief = clamp_counted(local[i] + s, &mut clamps);
    }
    BpState {
        beliefs,
        iterations: t,
        clamp_count: clamps,
    }
}

/// BP for the symmetric model. `side_llrs` are per-node half-log LLRs `h_i`;
/// `t >= 1` message rounds then one belief round. Isolated nodes keep
/// `R_i = h_i`.
pub fn run_bp_symmetric(
    graph: &Graph,
    side_llrs: &[f64],
    beta: f64,
    t: usize,
) -> Result<BpState> {
    check_iters(t)?;
    if side_llrs.len() != graph.num_nodes() {
        return Err(Error::invalid("side_llrs length must equal node count"));
    }
    Ok(run_bp(graph, side_llrs, |x| f_message(x, beta), t))
}

/// BP for the single-community model. `side_llrs` are full-log LLRs `h_i`;
/// every node carries the constant offset `-K(p-q)`. Isolated nodes keep
/// `R_i = h_i - K(p-q)`.
pub fn run_bp_single(
    graph: &Graph,
    side_llrs: &[f64],
    params: &SingleCommunityParams,
    t: usize,
) -> Result<BpState> {
    check_iters(t)?;
    if side_llrs.len() != graph.num_nodes() {
        return Err(Error::invalid("side_llrs length must equal node count"));
    }
    let offset = params.k as f64 * (params.p - params.q);
    let rho = params.p / params.q;
    let nu = params.threshold_nu();
    let local: Vec<f64> = side_llrs.iter().map(|&h| h - offset).collect();
    Ok(run_bp(graph, &local, |x| m_message(x, rho, nu), t))
}

/// Sign estimator with the inclusive tie rule `R >= 0 -> +1`.
pub fn estimate_symmetric(beliefs: &[f64]) -> Vec<i8> {
    beliefs.iter().map(|&r| if r >= 0.0 { 1 } else { -1 }).collect()
}

/// The K nodes with the largest beliefs; ties broken toward lower node ids.
/// Returned sorted by node id.
pub fn estimate_single_topk(beliefs: &[f64], k: usize) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..beliefs.len() as u32).collect();
    idx.sort_unstable_by(|&a, &b| {
        beliefs[b as usize]
            .total_cmp(&beliefs[a as usize])
            .then(a.cmp(&b))
    });
    let mut top: Vec<u32> = idx.into_iter().take(k).collect();
    top.sort_unstable();
    top
}

/// MAP-style thresholded set `{i : R_i >= nu}` (inclusive), sorted by id.
pub fn estimate_single_map(beliefs: &[f64], threshold_nu: f64) -> Vec<u32> {
    (0..beliefs.len() as u32)
        .filter(|&i| beliefs[i as usize] >= threshold_nu)
        .collect()
}

/// Per-node LLR values of a tree recursion, in tree node order.
#[derive(Debug, Clone)]
pub struct TreeLlr {
    pub gammas: Vec<f64>,
    pub root: f64,
}

/// Exact depth-`t` LLR recursion for the symmetric model:
/// `Gamma_j = h_j + sum_children F(Gamma_k)`, horizon nodes contribute
/// `Gamma = h`.
pub fn tree_llr_symmetric(
    tree: &LabeledTree,
    beta: f64,
    channel: &SideInfoChannel,
) -> Result<TreeLlr> {
    let spec = channel.llr_spec(crate::channels::LlrModel::SymmetricHalfLog);
    let mut gammas: Vec<f64> = tree
        .symbols
        .iter()
        .map(|&s| spec.values[s as usize])
        .collect();
    // children precede nothing: BFS order puts children after parents, so a
    // reverse sweep sees every child finished before its parent accumulates it
    for i in (1..tree.node_count()).rev() {
        let parent = tree.parents[i] as usize;
        let contrib = f_message(gammas[i], beta);
        gammas[parent] += contrib;
    }
    let root = gammas[0];
    Ok(TreeLlr { gammas, root })
}

/// Exact depth-`t` LLR recursion for the single-community model:
/// `Gamma_i = -K(p-q) + h_i + sum_children M(Gamma_k)` at depth < t, and
/// `Gamma = h` at the sampling horizon, where child counts are unobserved.
pub fn tree_llr_single(
    tree: &LabeledTree,
    params: &SingleCommunityParams,
    channel: &SideInfoChannel,
) -> Result<TreeLlr> {
    tree_llr_single_impl(tree, params, channel, false)
}

/// Variant where the horizon nodes' (empty) child sets count as observed, so
/// every node carries the `-K(p-q)` offset. This is exactly what graph BP
/// computes on the tree re-encoded as a graph with `t = depth` rounds, since
/// the deepest nodes have no neighbors besides their parent.
pub fn tree_llr_single_horizon_observed(
    tree: &LabeledTree,
    params: &SingleCommunityParams,
    channel: &SideInfoChannel,
) -> Result<TreeLlr> {
    tree_llr_single_impl(tree, params, channel, true)
}

fn tree_llr_single_impl(
    tree: &LabeledTree,
    params: &SingleCommunityParams,
    channel: &SideInfoChannel,
    horizon_observed: bool,
) -> Result<TreeLlr> {
    let spec = channel.llr_spec(crate::channels::LlrModel::SingleFullLog);
    let offset = params.k as f64 * (params.p - params.q);
    let rho = params.p / params.q;
    let nu = params.threshold_nu();
    let mut gammas: Vec<f64> = (0..tree.node_count())
        .map(|i| {
            let h = spec.values[tree.symbols[i] as usize];
            if horizon_observed || tree.depths[i] < tree.depth_t {
                h - offset
            } else {
                h
            }
        })
        .collect();
    for i in (1..tree.node_count()).rev() {
        let parent = tree.parents[i] as usize;
        let contrib = m_message(gammas[i], rho, nu);
        gammas[parent] += contrib;
    }
    let root = gammas[0];
    Ok(TreeLlr { gammas, root })
}

/// Misclassification report for the symmetric model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Misclassification {
    /// Plain fraction of disagreeing nodes.
    pub raw: f64,
    /// Minimum over the global sign flip; relevant when nothing anchors the
    /// labeling (no side information).
    pub flip_min: f64,
}

/// `(1/n) sum 1{est_i != truth_i}`, raw and flip-minimized.
pub fn misclassification_rate(estimate: &[i8], truth: &[i8]) -> Misclassification {
    assert_eq!(estimate.len(), truth.len());
    let n = truth.len() as f64;
    let wrong = estimate
        .iter()
        .zip(truth)
        .filter(|(e, t)| e != t)
        .count() as f64;
    let raw = wrong / n;
    Misclassification {
        raw,
        flip_min: raw.min(1.0 - raw),
    }
}

/// Single-community recovery error `|est symdiff C*| / K` with the type-I /
/// type-II split used by the weighted error formula.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CommunityError {
    /// `|est \ C*| + |C* \ est|, divided by K`.
    pub sym_diff_over_k: f64,
    /// False positives `|est \ C*|`.
    pub false_positives: usize,
    /// Misses `|C* \ est|`.
    pub misses: usize,
    /// Type-I rate `|est \ C*| / (n - K)`.
    pub type_i_rate: f64,
    /// Type-II rate `|C* \ est| / K`.
    pub type_ii_rate: f64,
}

/// Both inputs must be sorted node lists; `n` is the total node count.
pub fn community_error(estimate: &[u32], c_star: &[u32], k: usize, n: usize) -> CommunityError {
    let mut fp = 0usize;
    let mut misses = 0usize;
    let (mut i, mut j) = (0usize, 0usize);
    while i < estimate.len() || j < c_star.len() {
        match (estimate.get(i), c_star.get(j)) {
            (Some(&e), Some(&c)) if e == c => {
                i += 1;
                j += 1;
            }
            (Some(&e), Some(&c)) if e < c => {
                fp += 1;
                i += 1;
            }
            (Some(_), Some(_)) => {
                misses += 1;
                j += 1;
            }
            (Some(_), None) => {
                fp += 1;
                i += 1;
            }
            (None, Some(_)) => {
                misses += 1;
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    CommunityError {
        sym_diff_over_k: (fp + misses) as f64 / k as f64,
        false_positives: fp,
        misses,
        type_i_rate: if n > k { fp as f64 / (n - k) as f64 } else { 0.0 },
        type_ii_rate: misses as f64 / k as f64,
    }
}
