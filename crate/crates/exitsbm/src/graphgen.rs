//! Labeled random graphs for both block models and the matching Poisson
//! branching-process trees.
//!
//! Edge sampling walks each constant-probability block with geometric skips,
//! so sparse graphs at n = 1e6 cost O(edges) rather than O(n^2). Neighbor
//! lists are stored sorted, which makes downstream runs independent of the
//! order edges were generated in.

use crate::channels::SideInfoChannel;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Default cap on the expected node count of a sampled tree.
pub const DEFAULT_TREE_NODE_CAP: f64 = 1e8;

/// Parameters of the binary symmetric block model: within-community edge
/// probability `a/n`, across-community `b/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricSbmParams {
    pub n: usize,
    pub a: f64,
    pub b: f64,
}

impl SymmetricSbmParams {
    pub fn new(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        if !(a > b && b > 0.0) {
            return Err(Error::invalid(format!("need a > b > 0, got a = {a}, b = {b}")));
        }
        if a > n as f64 {
            return Err(Error::invalid(format!(
                "a = {a} exceeds n = {n}; a/n must be a probability"
            )));
        }
        Ok(SymmetricSbmParams { n, a, b })
    }

    /// `beta = 0.5 ln(a/b)`.
    pub fn beta(&self) -> f64 {
        0.5 * (self.a / self.b).ln()
    }

    /// `mu = (a - b) / sqrt(b)`.
    pub fn mu(&self) -> f64 {
        (self.a - self.b) / self.b.sqrt()
    }

    /// Expected average degree `(a + b) / 2`.
    pub fn mean_degree(&self) -> f64 {
        0.5 * (self.a + self.b)
    }
}

/// Parameters of the single-community model: a hidden set of size `k`, edge
/// probability `p` inside it and `q` elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleCommunityParams {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub q: f64,
}

impl SingleCommunityParams {
    pub fn new(n: usize, k: usize, p: f64, q: f64) -> Result<Self> {
        if n == 0 || k == 0 || k > n {
            return Err(Error::invalid(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
        }
        if !(p >= q && q > 0.0 && p <= 1.0) {
            return Err(Error::invalid(format!(
                "need 1 >= p >= q > 0, got p = {p}, q = {q}"
            )));
        }
        Ok(SingleCommunityParams { n, k, p, q })
    }

    /// `lambda = K^2 (p - q)^2 / ((n - K) q)`.
    pub fn lambda(&self) -> f64 {
        let k = self.k as f64;
        let nk = (self.n - self.k) as f64;
        k * k * (self.p - self.q) * (self.p - self.q) / (nk * self.q)
    }

    /// MAP threshold `nu = ln((n - K) / K)`.
    pub fn threshold_nu(&self) -> f64 {
        ((self.n - self.k) as f64 / self.k as f64).ln()
    }

    pub fn k_frac(&self) -> f64 {
        self.k as f64 / self.n as f64
    }
}

/// Undirected simple graph in CSR form with sorted neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl Graph {
    /// Builds from an undirected edge list (`u != v`, each edge once).
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut deg = vec![0usize; n];
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::invalid(format!("edge ({u}, {v}) out of range")));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop at node {u}")));
            }
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + deg[i];
        }
        let mut neighbors = vec![0u32; offsets[n]];
        let mut cursor = offsets.clone();
        for &(u, v) in edges {
            neighbors[cursor[u as usize]] = v;
            cursor[u as usize] += 1;
            neighbors[cursor[v as usize]] = u;
            cursor[v as usize] += 1;
        }
        for i in 0..n {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Ok(Graph {
            n,
            offsets,
            neighbors,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Structural check used by tests: symmetry, sortedness, no duplicates,
    /// no self-loops.
    pub fn is_simple_undirected(&self) -> bool {
        for i in 0..self.n {
            let nb = self.neighbors(i);
            for w in nb.windows(2) {
                if w[0] >= w[1] {
                    return false;
                }
            }
            for &j in nb {
                if j as usize == i {
                    return false;
                }
                if self.neighbors(j as usize).binary_search(&(i as u32)).is_err() {
                    return false;
                }
            }
        }
        true
    }

    /// Writes the graph file format: first line `n m`, then one `u v` line per
    /// edge with `u < v`, 0-indexed.
    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.num_edges())?;
        for i in 0..self.n {
            for &j in self.neighbors(i) {
                if (i as u32) < j {
                    writeln!(w, "{i} {j}")?;
                }
            }
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty graph file".into()))??;
        let mut it = header.split_whitespace();
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("bad node count".into()))?;
        let m: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("bad edge count".into()))?;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let u: u32 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad edge line: {line}")))?;
            let v: u32 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad edge line: {line}")))?;
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(Error::Parse(format!(
                "header declares {m} edges, file has {}",
                edges.len()
            )));
        }
        Graph::from_edges(n, &edges)
    }
}

/// Emits indices in `0..num_items` hit by independent Bernoulli(p) trials,
/// using geometric jumps so the cost is proportional to the number of hits.
fn skip_sample(num_items: u64, p: f64, rng: &mut ChaCha8Rng, mut emit: impl FnMut(u64)) {
    if num_items == 0 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        for k in 0..num_items {
            emit(k);
        }
        return;
    }
    let ln_q = (1.0 - p).ln(); // < 0
    let mut cur: u64 = 0;
    loop {
        let u: f64 = rng.random();
        let skip = (1.0 - u).ln() / ln_q;
        if !skip.is_finite() || skip >= (num_items - cur) as f64 {
            break;
        }
        cur += skip as u64;
        if cur >= num_items {
            break;
        }
        emit(cur);
        cur += 1;
        if cur >= num_items {
            break;
        }
    }
}

/// Maps a linear index over the `m(m-1)/2` unordered pairs of `0..m` to the
/// pair `(i, j)` with `i < j`, in lexicographic order.
fn unrank_pair(k: u64, m: u64) -> (u64, u64) {
    // row offsets: off(i) = i*m - i(i+1)/2; invert with f64 then fix up
    let mf = m as f64;
    let kf = k as f64;
    let mut i = ((2.0 * mf - 1.0 - ((2.0 * mf - 1.0).powi(2) - 8.0 * kf).sqrt()) / 2.0) as u64;
    let off = |i: u64| i * m - i * (i + 1) / 2;
    while i + 1 < m && off(i + 1) <= k {
        i += 1;
    }
    while off(i) > k {
        i -= 1;
    }
    let j = k - off(i) + i + 1;
    (i, j)
}

/// Samples a symmetric-SBM graph and its labels. Labels are i.i.d. uniform
/// over {-1, +1}; same-label pairs connect with probability `a/n`, others
/// with `b/n`. Deterministic per seed.
pub fn sample_symmetric_sbm(params: &SymmetricSbmParams, seed: u64) -> (Graph, Vec<i8>) {
    let n = params.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<i8> = (0..n)
        .map(|_| if rng.random::<f64>() < 0.5 { 1 } else { -1 })
        .collect();
    let plus: Vec<u32> = (0..n as u32).filter(|&i| labels[i as usize] > 0).collect();
    let minus: Vec<u32> = (0..n as u32).filter(|&i| labels[i as usize] < 0).collect();
    let p_in = params.a / n as f64;
    let p_out = params.b / n as f64;
    let mut edges: Vec<(u32, u32)> = Vec::new();

    for block in [&plus, &minus] {
        let m = block.len() as u64;
        skip_sample(m.saturating_mul(m.saturating_sub(1)) / 2, p_in, &mut rng, |k| {
            let (i, j) = unrank_pair(k, m);
            edges.push((block[i as usize], block[j as usize]));
        });
    }
    let (mp, mm) = (plus.len() as u64, minus.len() as u64);
    skip_sample(mp.saturating_mul(mm), p_out, &mut rng, |k| {
        let i = (k / mm) as usize;
        let j = (k % mm) as usize;
        edges.push((plus[i], minus[j]));
    });

    let graph = Graph::from_edges(n, &edges).expect("sampled edges are valid");
    (graph, labels)
}

/// Samples a single-community graph: a uniformly random K-subset carries
/// label 1 (so `|C*| = K` exactly), edges inside it appear with probability
/// `p`, all other pairs with `q`. Returns the graph, 0/1 labels, and the
/// community as a sorted node list.
pub fn sample_single_community(
    params: &SingleCommunityParams,
    seed: u64,
) -> (Graph, Vec<i8>, Vec<u32>) {
    let n = params.n;
    let k = params.k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // uniform K-subset via a partial Fisher-Yates prefix
    let mut perm: Vec<u32> = (0..n as u32).collect();
    for i in 0..k.min(n - 1) {
        let j = rng.random_range(i..n);
        perm.swap(i, j);
    }
    let mut community: Vec<u32> = perm[..k].to_vec();
    community.sort_unstable();
    let mut labels = vec![0i8; n];
    for &c in &community {
        labels[c as usize] = 1;
    }
    let rest: Vec<u32> = (0..n as u32).filter(|&i| labels[i as usize] == 0).collect();

    let mut edges: Vec<(u32, u32)> = Vec::new();
    let kc = community.len() as u64;
    let kr = rest.len() as u64;
    skip_sample(kc * kc.saturating_sub(1) / 2, params.p, &mut rng, |t| {
        let (i, j) = unrank_pair(t, kc);
        edges.push((community[i as usize], community[j as usize]));
    });
    skip_sample(kc.saturating_mul(kr), params.q, &mut rng, |t| {
        edges.push((community[(t / kr) as usize], rest[(t % kr) as usize]));
    });
    skip_sample(kr * kr.saturating_sub(1) / 2, params.q, &mut rng, |t| {
        let (i, j) = unrank_pair(t, kr);
        edges.push((rest[i as usize], rest[j as usize]));
    });

    let graph = Graph::from_edges(n, &edges).expect("sampled edges are valid");
    (graph, labels, community)
}

/// A labeled branching-process tree with per-node side information, stored in
/// BFS order (children always follow their parent).
#[derive(Debug, Clone)]
pub struct LabeledTree {
    /// Parent index per node; -1 for the root.
    pub parents: Vec<i64>,
    /// Depth per node (root at 0).
    pub depths: Vec<u32>,
    /// Node labels: {-1, +1} for the symmetric model, {0, 1} for the single model.
    pub labels: Vec<i8>,
    /// Side-information symbol per node.
    pub symbols: Vec<u16>,
    /// The sampling horizon: nodes at this depth have unobserved offspring.
    pub depth_t: u32,
}

impl LabeledTree {
    pub fn node_count(&self) -> usize {
        self.parents.len()
    }

    /// Re-encodes the tree as an undirected graph over the same node indices.
    pub fn to_graph(&self) -> Graph {
        let edges: Vec<(u32, u32)> = (1..self.node_count())
            .map(|i| (self.parents[i] as u32, i as u32))
            .collect();
        Graph::from_edges(self.node_count(), &edges).expect("tree edges are valid")
    }

    /// Tree CSV: `node_id,parent_id,depth,label,symbol` (parent -1 for root).
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "node_id,parent_id,depth,label,symbol")?;
        for i in 0..self.node_count() {
            writeln!(
                w,
                "{i},{},{},{},{}",
                self.parents[i], self.depths[i], self.labels[i], self.symbols[i]
            )?;
        }
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut parents = Vec::new();
        let mut depths = Vec::new();
        let mut labels = Vec::new();
        let mut symbols = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                if line.trim() != "node_id,parent_id,depth,label,symbol" {
                    return Err(Error::Parse(format!("unexpected header: {line}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(Error::Parse(format!("bad tree row: {line}")));
            }
            let id: usize = f[0].trim().parse().map_err(|_| Error::Parse(line.clone()))?;
            if id != parents.len() {
                return Err(Error::Parse("node ids must be consecutive from 0".into()));
            }
            parents.push(f[1].trim().parse().map_err(|_| Error::Parse(line.clone()))?);
            depths.push(f[2].trim().parse().map_err(|_| Error::Parse(line.clone()))?);
            labels.push(f[3].trim().parse().map_err(|_| Error::Parse(line.clone()))?);
            symbols.push(f[4].trim().parse().map_err(|_| Error::Parse(line.clone()))?);
        }
        let depth_t = depths.iter().copied().max().unwrap_or(0);
        Ok(LabeledTree {
            parents,
            depths,
            labels,
            symbols,
            depth_t,
        })
    }
}

fn poisson_count(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(lambda).expect("positive finite lambda");
    dist.sample(rng) as usize
}

fn expected_tree_nodes(mean_offspring: f64, t: u32) -> f64 {
    let mut total = 1.0;
    let mut level = 1.0;
    for _ in 0..t {
        level *= mean_offspring;
        total += level;
        if total > 1e300 {
            break;
        }
    }
    total
}

/// Samples the two-type Poisson tree of the symmetric model to depth `t`:
/// the root label is uniform over {-1, +1}; every node at depth < t spawns
/// `Pois(a/2)` same-label and `Pois(b/2)` opposite-label children. Side
/// information is drawn per node from `channel`.
pub fn sample_symmetric_tree(
    a: f64,
    b: f64,
    channel: &SideInfoChannel,
    t: u32,
    seed: u64,
) -> Result<LabeledTree> {
    sample_symmetric_tree_capped(a, b, channel, t, seed, DEFAULT_TREE_NODE_CAP)
}

pub fn sample_symmetric_tree_capped(
    a: f64,
    b: f64,
    channel: &SideInfoChannel,
    t: u32,
    seed: u64,
    node_cap: f64,
) -> Result<LabeledTree> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::invalid("tree sampling needs a > 0 and b > 0"));
    }
    let expected = expected_tree_nodes(0.5 * (a + b), t);
    if expected > node_cap {
        return Err(Error::Infeasible(format!(
            "expected tree size {expected:.3e} exceeds cap {node_cap:.1e}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root_label: i8 = if rng.random::<f64>() < 0.5 { 1 } else { -1 };
    let mut tree = LabeledTree {
        parents: vec![-1],
        depths: vec![0],
        labels: vec![root_label],
        symbols: Vec::new(),
        depth_t: t,
    };
    let hard_cap = (node_cap * 4.0) as usize;
    let mut cursor = 0usize;
    while cursor < tree.parents.len() {
        let depth = tree.depths[cursor];
        if depth < t {
            let label = tree.labels[cursor];
            let same = poisson_count(&mut rng, 0.5 * a);
            let opp = poisson_count(&mut rng, 0.5 * b);
            for (count, lab) in [(same, label), (opp, -label)] {
                for _ in 0..count {
                    tree.parents.push(cursor as i64);
                    tree.depths.push(depth + 1);
                    tree.labels.push(lab);
                }
            }
            if tree.parents.len() > hard_cap {
                return Err(Error::Infeasible(format!(
                    "realized tree size exceeded {hard_cap} nodes"
                )));
            }
        }
        cursor += 1;
    }
    tree.symbols = channel.sample_side_info(&tree.labels, seed.wrapping_add(0x9E37_79B9));
    Ok(tree)
}

/// Samples the single-community tree to depth `t`: the root is Bernoulli(K/n);
/// a node at depth < t spawns `Pois(Kp)` label-1 children if its own label is
/// 1 (else `Pois(Kq)`), plus `Pois((n-K)q)` label-0 children regardless.
pub fn sample_single_tree(
    params: &SingleCommunityParams,
    channel: &SideInfoChannel,
    t: u32,
    seed: u64,
) -> Result<LabeledTree> {
    sample_single_tree_capped(params, channel, t, seed, DEFAULT_TREE_NODE_CAP)
}

pub fn sample_single_tree_capped(
    params: &SingleCommunityParams,
    channel: &SideInfoChannel,
    t: u32,
    seed: u64,
    node_cap: f64,
) -> Result<LabeledTree> {
    let kf = params.k as f64;
    let nk = (params.n - params.k) as f64;
    let mean = kf * params.p + nk * params.q; // label-1 branching dominates
    let expected = expected_tree_nodes(mean, t);
    if expected > node_cap {
        return Err(Error::Infeasible(format!(
            "expected tree size {expected:.3e} exceeds cap {node_cap:.1e}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root_label: i8 = if rng.random::<f64>() < params.k_frac() { 1 } else { 0 };
    let mut tree = LabeledTree {
        parents: vec![-1],
        depths: vec![0],
        labels: vec![root_label],
        symbols: Vec::new(),
        depth_t: t,
    };
    let hard_cap = (node_cap * 4.0) as usize;
    let mut cursor = 0usize;
    while cursor < tree.parents.len() {
        let depth = tree.depths[cursor];
        if depth < t {
            let ones = if tree.labels[cursor] == 1 {
                poisson_count(&mut rng, kf * params.p)
            } else {
                poisson_count(&mut rng, kf * params.q)
            };
            let zeros = poisson_count(&mut rng, nk * params.q);
            for (count, lab) in [(ones, 1i8), (zeros, 0i8)] {
                for _ in 0..count {
                    tree.parents.push(cursor as i64);
                    tree.depths.push(depth + 1);
                    tree.labels.push(lab);
                }
            }
            if tree.parents.len() > hard_cap {
                return Err(Error::Infeasible(format!(
                    "realized tree size exceeded {hard_cap} nodes"
                )));
            }
        }
        cursor += 1;
    }
    tree.symbols = channel.sample_side_info(&tree.labels, seed.wrapping_add(0x9E37_79B9));
    Ok(tree)
}

/// Labels CSV: `node_id,label`.
pub fn write_labels_csv(w: &mut impl Write, labels: &[i8]) -> Result<()> {
    writeln!(w, "node_id,label")?;
    for (i, &l) in labels.iter().enumerate() {
        writeln!(w, "{i},{l}")?;
    }
    Ok(())
}

pub fn read_labels_csv(r: impl BufRead) -> Result<Vec<i8>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            if line.trim() != "node_id,label" {
                return Err(Error::Parse(format!("unexpected header: {line}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let _id: usize = parts
            .next()
            .and_then(|p| p.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad label row: {line}")))?;
        let l: i8 = parts
            .next()
            .and_then(|p| p.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad label row: {line}")))?;
        out.push(l);
    }
    Ok(out)
}
