//! Command implementations behind the `exitsbm` binary: parameter resolution
//! from config/flags, run directories, manifests, and the file formats the
//! library modules define.
//!
//! Every command is deterministic given (config, seed); a fresh run-id
//! subdirectory is created per invocation so outputs never overwrite.

use crate::bp;
use crate::channels::{self, SideInfoChannel};
use crate::devo;
use crate::error::{Error, Result};
use crate::exit;
use crate::graphgen::{self, SingleCommunityParams, SymmetricSbmParams};
use crate::validate;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

/// Flat run configuration. Flags override config-file values field by field.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: Option<String>,
    pub n: Option<usize>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub mu: Option<f64>,
    pub k_frac: Option<f64>,
    pub lambda: Option<f64>,
    pub p_over_q: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub threads: Option<usize>,
    pub quick: Option<bool>,
    pub scan_parameter: Option<String>,
    pub scan_lo: Option<f64>,
    pub scan_hi: Option<f64>,
    /// "topk" (default) or "map" for the single-model estimate.
    pub estimator: Option<String>,
    /// Directory with previously generated inputs for `bp`.
    pub load: Option<PathBuf>,
}

impl RunConfig {
    /// Field-wise merge: values in `self` win over `base`.
    pub fn merged_over(self, base: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($f:ident) => {
                self.$f.or(base.$f)
            };
        }
        RunConfig {
            model: pick!(model),
            n: pick!(n),
            a: pick!(a),
            b: pick!(b),
            mu: pick!(mu),
            k_frac: pick!(k_frac),
            lambda: pick!(lambda),
            p_over_q: pick!(p_over_q),
            p: pick!(p),
            q: pick!(q),
            k: pick!(k),
            alpha: pick!(alpha),
            epsilon: pick!(epsilon),
            iters: pick!(iters),
            seed: pick!(seed),
            out: pick!(out),
            grid: pick!(grid),
            tol: pick!(tol),
            threads: pick!(threads),
            quick: pick!(quick),
            scan_parameter: pick!(scan_parameter),
            scan_lo: pick!(scan_lo),
            scan_hi: pick!(scan_hi),
            estimator: pick!(estimator),
            load: pick!(load),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn require(&self, field: Option<f64>, name: &str) -> Result<f64> {
        field.ok_or_else(|| Error::invalid(format!("missing required parameter `{name}`")))
    }

    fn model(&self) -> Result<&str> {
        match self.model.as_deref() {
            Some("symmetric") => Ok("symmetric"),
            Some("single") => Ok("single"),
            Some(other) => Err(Error::invalid(format!(
                "unknown model `{other}` (expected `symmetric` or `single`)"
            ))),
            None => Err(Error::invalid("missing required parameter `model`")),
        }
    }

    /// Symmetric rates: `(a, b)` directly, or `(mu, b)` with `a = b + mu sqrt(b)`.
    pub fn symmetric_rates(&self) -> Result<(f64, f64)> {
        let b = self.require(self.b, "b")?;
        let a = match (self.a, self.mu) {
            (Some(a), _) => a,
            (None, Some(mu)) => b + mu * b.sqrt(),
            (None, None) => return Err(Error::invalid("need `a` or `mu` with `b`")),
        };
        Ok((a, b))
    }

    pub fn symmetric_params(&self) -> Result<SymmetricSbmParams> {
        let n = self.n.ok_or_else(|| Error::invalid("missing required parameter `n`"))?;
        let (a, b) = self.symmetric_rates()?;
        SymmetricSbmParams::new(n, a, b)
    }

    pub fn symmetric_channel(&self) -> Result<SideInfoChannel> {
        let eps = self.require(self.epsilon, "epsilon")?;
        let alpha = self.require(self.alpha, "alpha")?;
        channels::erasure_flip_channel(eps, alpha)
    }

    /// Single-community parameters: `(k or k_frac)` with `(p, q)` directly, or
    /// `lambda` plus one of `q` / `p_over_q` solved through
    /// `lambda = K^2 (p-q)^2 / ((n-K) q)`.
    pub fn single_params(&self) -> Result<SingleCommunityParams> {
        let n = self.n.ok_or_else(|| Error::invalid("missing required parameter `n`"))?;
        let k = match (self.k, self.k_frac) {
            (Some(k), _) => k,
            (None, Some(f)) => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::invalid(format!("k_frac = {f} outside (0, 1)")));
                }
                ((n as f64 * f).round() as usize).max(1)
            }
            (None, None) => return Err(Error::invalid("need `k` or `k-frac`")),
        };
        let nk = (n - k) as f64;
        let (p, q) = match (self.p, self.q, self.lambda, self.p_over_q) {
            (Some(p), Some(q), _, _) => (p, q),
            (None, Some(q), Some(lambda), _) => {
                let p = q + (lambda * nk * q).sqrt() / k as f64;
                (p, q)
            }
            (None, None, Some(lambda), Some(rho)) => {
                if !(rho > 1.0) {
                    return Err(Error::invalid("p-over-q must exceed 1 to solve from lambda"));
                }
                let q = lambda * nk / (k as f64 * k as f64 * (rho - 1.0) * (rho - 1.0));
                (rho * q, q)
            }
            _ => {
                return Err(Error::invalid(
                    "need (p, q), or (lambda, q), or (lambda, p-over-q)",
                ))
            }
        };
        SingleCommunityParams::new(n, k, p, q)
    }

    pub fn single_channel(&self) -> Result<SideInfoChannel> {
        let alpha = self.require(self.alpha, "alpha")?;
        channels::binary_flip_channel(alpha)
    }

    pub fn iters(&self) -> usize {
        self.iters.unwrap_or(2)
    }

    pub fn grid(&self) -> usize {
        self.grid.unwrap_or(exit::DEFAULT_CURVE_GRID)
    }
}

/// Applies `--threads` / `EXITSBM_THREADS` to the global worker pool. Calling
/// twice is harmless (later calls are ignored by rayon).
pub fn configure_threads(cfg: &RunConfig) {
    let from_env = std::env::var("EXITSBM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(t) = cfg.threads.or(from_env) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

/// Run manifest: enough to reproduce the outputs bit-exactly.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub derived: serde_json::Value,
    pub clamp_count: Option<u64>,
    pub elapsed_seconds: f64,
    pub outputs: Vec<String>,
}

/// Creates a fresh `run-<command>-seed<seed>[-k]` subdirectory of `out`.
pub fn create_run_dir(out: &Path, command: &str, seed: u64) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    for attempt in 0..10_000u32 {
        let name = if attempt == 0 {
            format!("run-{command}-seed{seed}")
        } else {
            format!("run-{command}-seed{seed}-{attempt}")
        };
        let dir = out.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(Error::invalid("could not allocate a run directory"))
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    let mut f = BufWriter::new(fs::File::create(&path)?);
    writeln!(f, "{}", serde_json::to_string_pretty(manifest)?)?;
    Ok(path)
}

fn write_beliefs_csv(path: &Path, beliefs: &[f64]) -> Result<()> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    writeln!(f, "node_id,belief")?;
    for (i, b) in beliefs.iter().enumerate() {
        writeln!(f, "{i},{b:.17e}")?;
    }
    Ok(())
}

fn write_estimates_csv(path: &Path, estimates: &[i8]) -> Result<()> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    writeln!(f, "node_id,estimate")?;
    for (i, e) in estimates.iter().enumerate() {
        writeln!(f, "{i},{e}")?;
    }
    Ok(())
}

/// `generate`: sample a labeled graph plus side information and write the
/// graph/labels/side-info/channel files.
pub fn cmd_generate(cfg: &RunConfig) -> Result<PathBuf> {
    let start = std::time::Instant::now();
    let seed = cfg.seed();
    let dir = create_run_dir(&cfg.out_dir(), "generate", seed)?;
    let mut outputs = Vec::new();
    let derived;
    match cfg.model()? {
        "symmetric" => {
            let params = cfg.symmetric_params()?;
            let channel = cfg.symmetric_channel()?;
            let (graph, labels) = graphgen::sample_symmetric_sbm(&params, seed);
            let symbols = channel.sample_side_info(&labels, seed ^ 0x51de);
            let gpath = dir.join("graph.txt");
            graph.write(&mut BufWriter::new(fs::File::create(&gpath)?))?;
            let lpath = dir.join("labels.csv");
            graphgen::write_labels_csv(&mut BufWriter::new(fs::File::create(&lpath)?), &labels)?;
            let spath = dir.join("side_info.csv");
            channels::write_side_info_csv(
                &mut BufWriter::new(fs::File::create(&spath)?),
                &symbols,
            )?;
            let cpath = dir.join("channel.json");
            fs::write(&cpath, channel.to_json())?;
            for p in [&gpath, &lpath, &spath, &cpath] {
                outputs.push(p.display().to_string());
            }
            derived = serde_json::json!({
                "model": "symmetric",
                "a": params.a, "b": params.b,
                "mu": params.mu(), "beta": params.beta(),
                "mean_degree": params.mean_degree(),
                "edges": graph.num_edges(),
            });
        }
        _ => {
            let params = cfg.single_params()?;
            let channel = cfg.single_channel()?;
            let (graph, labels, community) = graphgen::sample_single_community(&params, seed);
            let symbols = channel.sample_side_info(&labels, seed ^ 0x51de);
            let gpath = dir.join("graph.txt");
            graph.write(&mut BufWriter::new(fs::File::create(&gpath)?))?;
            let lpath = dir.join("labels.csv");
            graphgen::write_labels_csv(&mut BufWriter::new(fs::File::create(&lpath)?), &labels)?;
            let spath = dir.join("side_info.csv");
            channels::write_side_info_csv(
                &mut BufWriter::new(fs::File::create(&spath)?),
                &symbols,
            )?;
            let cpath = dir.join("channel.json");
            fs::write(&cpath, channel.to_json())?;
            let mpath = dir.join("community.csv");
            let mut f = BufWriter::new(fs::File::create(&mpath)?);
            writeln!(f, "node_id")?;
            for c in &community {
                writeln!(f, "{c}")?;
            }
            drop(f);
            for p in [&gpath, &lpath, &spath, &cpath, &mpath] {
                outputs.push(p.display().to_string());
            }
            derived = serde_json::json!({
                "model": "single",
                "k": params.k, "p": params.p, "q": params.q,
                "lambda": params.lambda(), "threshold_nu": params.threshold_nu(),
                "edges": graph.num_edges(),
            });
        }
    }
    let manifest = Manifest {
        command: "generate".into(),
        seed,
        config: cfg.clone(),
        derived,
        clamp_count: None,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        outputs,
    };
    let mpath = write_manifest(&dir, &manifest)?;
    println!("{}", mpath.display());
    Ok(dir)
}

fn load_inputs(dir: &Path) -> Result<(graphgen::Graph, Vec<i8>, Vec<u16>, SideInfoChannel)> {
    let graph = graphgen::Graph::read(BufReader::new(fs::File::open(dir.join("graph.txt"))?))?;
    let labels =
        graphgen::read_labels_csv(BufReader::new(fs::File::open(dir.join("labels.csv"))?))?;
    let symbols =
        channels::read_side_info_csv(BufReader::new(fs::File::open(dir.join("side_info.csv"))?))?;
    let channel = SideInfoChannel::from_json(&fs::read_to_string(dir.join("channel.json"))?)?;
    Ok((graph, labels, symbols, channel))
}

/// `bp`: run belief propagation and write beliefs, estimates, and an error
/// report carrying the DE prediction for the same parameters side by side.
pub fn cmd_bp(cfg: &RunConfig) -> Result<PathBuf> {
    let start = std::time::Instant::now();
    let seed = cfg.seed();
    let t = cfg.iters();
    let dir = create_run_dir(&cfg.out_dir(), "bp", seed)?;
    let mut outputs = Vec::new();
    let derived;
    let clamp_count;
    match cfg.model()? {
        "symmetric" => {
            let channel = cfg.symmetric_channel()?;
            let params = cfg.symmetric_params()?;
            let (graph, labels, symbols, channel) = match &cfg.load {
                Some(src) => load_inputs(src)?,
                None => {
                    let (g, l) = graphgen::sample_symmetric_sbm(&params, seed);
                    let s = channel.sample_side_info(&l, seed ^ 0x51de);
                    (g, l, s, channel)
                }
            };
            let spec = channel.llr_spec(channels::LlrModel::SymmetricHalfLog);
            let h: Vec<f64> = symbols.iter().map(|&s| spec.values[s as usize]).collect();
            let state = bp::run_bp_symmetric(&graph, &h, params.beta(), t)?;
            clamp_count = Some(state.clamp_count);
            let est = bp::estimate_symmetric(&state.beliefs);
            let err = bp::misclassification_rate(&est, &labels);
            let trace = devo::de_iterate_symmetric(params.mu(), &channel, t, 0.0)?;
            let predicted = devo::residual_error_symmetric(trace.nu_seq[t], &channel);
            let bpath = dir.join("beliefs.csv");
            write_beliefs_csv(&bpath, &state.beliefs)?;
            let epath = dir.join("estimates.csv");
            write_estimates_csv(&epath, &est)?;
            let rpath = dir.join("error_report.json");
            fs::write(
                &rpath,
                serde_json::to_string_pretty(&serde_json::json!({
                    "model": "symmetric",
                    "t": t,
                    "empirical_error_raw": err.raw,
                    "empirical_error_flip_min": err.flip_min,
                    "nu_t": trace.nu_seq[t],
                    "predicted_error_at_nu_t": predicted,
                }))?,
            )?;
            for p in [&bpath, &epath, &rpath] {
                outputs.push(p.display().to_string());
            }
            derived = serde_json::json!({
                "mu": params.mu(), "beta": params.beta(), "edges": graph.num_edges(),
            });
        }
        _ => {
            let channel = cfg.single_channel()?;
            let params = cfg.single_params()?;
            let (graph, labels, symbols, channel) = match &cfg.load {
                Some(src) => load_inputs(src)?,
                None => {
                    let (g, l, _) = graphgen::sample_single_community(&params, seed);
                    let s = channel.sample_side_info(&l, seed ^ 0x51de);
                    (g, l, s, channel)
                }
            };
            let c_star: Vec<u32> = (0..labels.len() as u32)
                .filter(|&i| labels[i as usize] == 1)
                .collect();
            let spec = channel.llr_spec(channels::LlrModel::SingleFullLog);
            let h: Vec<f64> = symbols.iter().map(|&s| spec.values[s as usize]).collect();
            let state = bp::run_bp_single(&graph, &h, &params, t)?;
            clamp_count = Some(state.clamp_count);
            let estimator = cfg.estimator.as_deref().unwrap_or("topk");
            let est = match estimator {
                "map" => bp::estimate_single_map(&state.beliefs, params.threshold_nu()),
                "topk" => bp::estimate_single_topk(&state.beliefs, params.k),
                other => {
                    return Err(Error::invalid(format!(
                        "unknown estimator `{other}` (expected `topk` or `map`)"
                    )))
                }
            };
            let err = bp::community_error(&est, &c_star, params.k, params.n);
            let trace =
                devo::de_iterate_single(params.lambda(), params.threshold_nu(), &channel, t, 0.0)?;
            let predicted =
                devo::residual_error_single(trace.v_seq[t], params.threshold_nu(), &channel);
            let bpath = dir.join("beliefs.csv");
            write_beliefs_csv(&bpath, &state.beliefs)?;
            let epath = dir.join("estimates.csv");
            let mut f = BufWriter::new(fs::File::create(&epath)?);
            writeln!(f, "node_id,estimate")?;
            let est_set: std::collections::HashSet<u32> = est.iter().copied().collect();
            for i in 0..labels.len() as u32 {
                writeln!(f, "{i},{}", u8::from(est_set.contains(&i)))?;
            }
            drop(f);
            let rpath = dir.join("error_report.json");
            fs::write(
                &rpath,
                serde_json::to_string_pretty(&serde_json::json!({
                    "model": "single",
                    "t": t,
                    "estimator": estimator,
                    "empirical_sym_diff_over_k": err.sym_diff_over_k,
                    "type_i_rate": err.type_i_rate,
                    "type_ii_rate": err.type_ii_rate,
                    "v_t": trace.v_seq[t],
                    "predicted_sym_diff_over_k_at_v_t": predicted,
                }))?,
            )?;
            for p in [&bpath, &epath, &rpath] {
                outputs.push(p.display().to_string());
            }
            derived = serde_json::json!({
                "lambda": params.lambda(), "threshold_nu": params.threshold_nu(),
                "edges": graph.num_edges(),
            });
        }
    }
    let manifest = Manifest {
        command: "bp".into(),
        seed,
        config: cfg.clone(),
        derived,
        clamp_count,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        outputs,
    };
    let mpath = write_manifest(&dir, &manifest)?;
    println!("{}", mpath.display());
    Ok(dir)
}

/// `de`: write the density-evolution trace `t,state,predicted_error`.
pub fn cmd_de(cfg: &RunConfig) -> Result<PathBuf> {
    let start = std::time::Instant::now();
    let seed = cfg.seed();
    let dir = create_run_dir(&cfg.out_dir(), "de", seed)?;
    let t_max = cfg.iters.unwrap_or(devo::DEFAULT_DE_MAX_ITERS);
    let tol = cfg.tol.unwrap_or(devo::DEFAULT_DE_TOL);
    let (rows, fixed_point, converged, derived): (Vec<(usize, f64, f64)>, f64, bool, _) =
        match cfg.model()? {
            "symmetric" => {
                let channel = cfg.symmetric_channel()?;
                let mu = match (cfg.mu, cfg.a, cfg.b) {
                    (Some(mu), _, _) => mu,
                    (None, Some(a), Some(b)) => (a - b) / b.sqrt(),
                    _ => return Err(Error::invalid("need `mu` or both `a` and `b`")),
                };
                let trace = devo::de_iterate_symmetric(mu, &channel, t_max, tol)?;
                let rows = trace
                    .nu_seq
                    .iter()
                    .zip(&trace.predicted_error)
                    .enumerate()
                    .map(|(t, (&nu, &pe))| (t, nu, pe))
                    .collect();
                (
                    rows,
                    trace.nu_bar,
                    trace.converged,
                    serde_json::json!({ "mu": mu, "state": "nu" }),
                )
            }
            _ => {
                let channel = cfg.single_channel()?;
                let lambda = cfg
                    .lambda
                    .ok_or_else(|| Error::invalid("missing required parameter `lambda`"))?;
                let kf = cfg
                    .k_frac
                    .ok_or_else(|| Error::invalid("missing required parameter `k-frac`"))?;
                let nu = ((1.0 - kf) / kf as f64).ln();
                let trace = devo::de_iterate_single(lambda, nu, &channel, t_max, tol)?;
                let rows = trace
                    .v_seq
                    .iter()
                    .zip(&trace.predicted_error)
                    .enumerate()
                    .map(|(t, (&v, &pe))| (t, v, pe))
                    .collect();
                (
                    rows,
                    trace.v_bar,
                    trace.converged,
                    serde_json::json!({ "lambda": lambda, "threshold_nu": nu, "state": "v" }),
                )
            }
        };
    let tpath = dir.join("de_trace.csv");
    let mut f = BufWriter::new(fs::File::create(&tpath)?);
    writeln!(f, "t,state,predicted_error")?;
    for (t, s, pe) in &rows {
        writeln!(f, "{t},{s:.17e},{pe:.17e}")?;
    }
    drop(f);
    let manifest = Manifest {
        command: "de".into(),
        seed,
        config: cfg.clone(),
        derived: serde_json::json!({
            "params": derived, "fixed_point": fixed_point, "converged": converged,
        }),
        clamp_count: None,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        outputs: vec![tpath.display().to_string()],
    };
    let mpath = write_manifest(&dir, &manifest)?;
    println!("{}", mpath.display());
    Ok(dir)
}

/// `exit`: write the transfer curve CSV plus the companion JSON with
/// crossings, operating point, and staircase.
pub fn cmd_exit(cfg: &RunConfig) -> Result<PathBuf> {
    let start = std::time::Instant::now();
    let seed = cfg.seed();
    let dir = create_run_dir(&cfg.out_dir(), "exit", seed)?;
    let grid = cfg.grid();
    let curve = match cfg.model()? {
        "symmetric" => {
            let channel = cfg.symmetric_channel()?;
            let mu = cfg
                .mu
                .ok_or_else(|| Error::invalid("missing required parameter `mu`"))?;
            let table = exit::build_j_table(
                exit::JModel::Symmetric(&channel),
                (1.05 * mu * mu / 4.0).max(1e-3),
                grid,
            )?;
            exit::compute_exit_curve_symmetric(mu, &channel, &table, grid)
        }
        _ => {
            let channel = cfg.single_channel()?;
            let lambda = cfg
                .lambda
                .ok_or_else(|| Error::invalid("missing required parameter `lambda`"))?;
            let kf = cfg
                .k_frac
                .ok_or_else(|| Error::invalid("missing required parameter `k-frac`"))?;
            let nu = ((1.0 - kf) / kf as f64).ln();
            let table = exit::build_j_table(
                exit::JModel::Single { channel: &channel, k_frac: kf },
                (1.05 * lambda * nu.exp()).max(1e-3),
                grid,
            )?;
            exit::compute_exit_curve_single(lambda, nu, &channel, &table, grid)
        }
    };
    let cpath = dir.join("exit_curve.csv");
    let mut f = BufWriter::new(fs::File::create(&cpath)?);
    writeln!(f, "i_in,i_out")?;
    for (i_in, i_out) in curve.i_in.iter().zip(&curve.i_out) {
        writeln!(f, "{i_in:.17e},{i_out:.17e}")?;
    }
    drop(f);
    let jpath = dir.join("exit_info.json");
    fs::write(&jpath, serde_json::to_string_pretty(&curve)?)?;
    let manifest = Manifest {
        command: "exit".into(),
        seed,
        config: cfg.clone(),
        derived: serde_json::json!({
            "i_max": curve.i_max,
            "operating_point": curve.staircase.last(),
            "num_crossings": curve.crossings.len(),
        }),
        clamp_count: None,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        outputs: vec![cpath.display().to_string(), jpath.display().to_string()],
    };
    let mpath = write_manifest(&dir, &manifest)?;
    println!("{}", mpath.display());
    Ok(dir)
}

/// `scan`: bisect for the phase-transition threshold; writes the bracket
/// history and critical value (or none).
pub fn cmd_scan(cfg: &RunConfig) -> Result<PathBuf> {
    let start = std::time::Instant::now();
    let seed = cfg.seed();
    let model = cfg.model()?.to_string();
    let scan_parameter = match cfg.scan_parameter.as_deref() {
        Some("lambda") => exit::ScanParameter::Lambda,
        Some("mu") => exit::ScanParameter::Mu,
        Some("alpha") => exit::ScanParameter::Alpha,
        Some("epsilon") => exit::ScanParameter::Epsilon,
        Some(other) => {
            return Err(Error::invalid(format!(
                "unknown scan parameter `{other}` (lambda|mu|alpha|epsilon)"
            )))
        }
        None => return Err(Error::invalid("missing required parameter `scan-parameter`")),
    };
    let (lo, hi) = match (cfg.scan_lo, cfg.scan_hi) {
        (Some(lo), Some(hi)) if lo < hi => (lo, hi),
        (Some(lo), Some(hi)) => {
            return Err(Error::invalid(format!("malformed scan range [{lo}, {hi}]")))
        }
        _ => return Err(Error::invalid("need `scan-lo` and `scan-hi`")),
    };
    let scan_cfg = exit::ScanConfig {
        model,
        scan_parameter,
        lo,
        hi,
        bisect_tol: cfg.tol.unwrap_or(1e-3),
        mu: cfg.mu,
        epsilon: cfg.epsilon,
        alpha: cfg.alpha,
        lambda: cfg.lambda,
        k_frac: cfg.k_frac,
        max_de_iters: 200_000,
    };
    let report = exit::threshold_scan(&scan_cfg)?;
    let dir = create_run_dir(&cfg.out_dir(), "scan", seed)?;
    let rpath = dir.join("scan_report.json");
    fs::write(&rpath, serde_json::to_string_pretty(&report)?)?;
    let manifest = Manifest {
        command: "scan".into(),
        seed,
        config: cfg.clone(),
        derived: serde_json::json!({
            "critical": report.critical,
            "bracket": [report.bracket_lo, report.bracket_hi],
        }),
        clamp_count: None,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        outputs: vec![rpath.display().to_string()],
    };
    let mpath = write_manifest(&dir, &manifest)?;
    println!("{}", mpath.display());
    Ok(dir)
}

/// `validate`: run the acceptance/property suite, print one line per check,
/// and write the JSON report. Returns the report for exit-code mapping.
pub fn cmd_validate(cfg: &RunConfig) -> Result<(PathBuf, validate::ValidationReport)> {
    let seed = cfg.seed();
    let quick = cfg.quick.unwrap_or(false);
    let report = validate::run_suite(seed, quick)?;
    let dir = create_run_dir(&cfg.out_dir(), "validate", seed)?;
    let rpath = dir.join("validation_report.json");
    fs::write(&rpath, serde_json::to_string_pretty(&report)?)?;
    for check in &report.checks {
        println!("{}", check.line());
    }
    println!(
        "{} checks, {} failed, {:.1}s -> {}",
        report.checks.len(),
        report.checks.iter().filter(|c| !c.passed).count(),
        report.elapsed_seconds,
        rpath.display()
    );
    Ok((rpath, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_prefers_flags() {
        let file = RunConfig {
            n: Some(100),
            alpha: Some(0.3),
            ..Default::default()
        };
        let flags = RunConfig {
            alpha: Some(0.1),
            ..Default::default()
        };
        let merged = flags.merged_over(file);
        assert_eq!(merged.n, Some(100));
        assert_eq!(merged.alpha, Some(0.1));
    }

    #[test]
    fn symmetric_rates_from_mu() {
        let cfg = RunConfig {
            mu: Some(6.0),
            b: Some(100.0),
            ..Default::default()
        };
        let (a, b) = cfg.symmetric_rates().unwrap();
        assert_eq!(b, 100.0);
        assert!((a - 160.0).abs() < 1e-12);
    }

    #[test]
    fn single_params_from_lambda_rho() {
        let lam = 2.0 / (3.0 * std::f64::consts::E);
        let cfg = RunConfig {
            n: Some(10_000),
            k_frac: Some(0.1),
            lambda: Some(lam),
            p_over_q: Some(2.0),
            ..Default::default()
        };
        let p = cfg.single_params().unwrap();
        assert_eq!(p.k, 1000);
        assert!((p.lambda() - lam).abs() < 1e-12, "lambda = {}", p.lambda());
        assert!((p.p / p.q - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_params_from_lambda_q() {
        let cfg = RunConfig {
            n: Some(10_000),
            k: Some(1000),
            lambda: Some(0.5),
            q: Some(0.01),
            ..Default::default()
        };
        let p = cfg.single_params().unwrap();
        assert!((p.lambda() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_alpha_names_the_constraint() {
        let cfg = RunConfig {
            epsilon: Some(0.5),
            alpha: Some(0.6),
            ..Default::default()
        };
        let err = cfg.symmetric_channel().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpha") && msg.contains("0.6"), "message: {msg}");
    }
}
