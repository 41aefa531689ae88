//! M-ary side-information channels: conditional likelihoods, label-conditional
//! LLR values and distributions, and observation sampling.
//!
//! Two LLR conventions coexist and must not be mixed: the two-community
//! symmetric model works in the half-log domain (`0.5 * ln(a+/a-)`) while the
//! single-community model uses full-log LLRs. [`LlrModel`] selects the
//! convention everywhere a channel is queried.

use crate::error::{Error, Result};
use crate::numerics::DiscreteDist;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// LLR convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LlrModel {
    /// `h_m = 0.5 * ln(alpha_plus_m / alpha_minus_m)` (two symmetric communities).
    SymmetricHalfLog,
    /// `h_m = ln(alpha_plus_m / alpha_minus_m)` (single hidden community).
    SingleFullLog,
}

/// An M-ary side-information channel: `alpha_plus[m] = P(y = u_m | label +)`
/// and `alpha_minus[m] = P(y = u_m | label -)` (labels `+1/-1` or `1/0`
/// depending on the model; "plus" always means the in-community label).
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInfoChannel {
    plus: Vec<f64>,
    minus: Vec<f64>,
}

/// Serialized form: `{"m": M, "alpha_plus": [...], "alpha_minus": [...]}`.
#[derive(Serialize, Deserialize)]
struct ChannelJson {
    m: usize,
    alpha_plus: Vec<f64>,
    alpha_minus: Vec<f64>,
}

const PROB_SUM_TOL: f64 = 1e-12;

impl SideInfoChannel {
    /// Builds a channel from the two conditional likelihood vectors.
    ///
    /// Rejects: vectors that are not probability vectors (within 1e-12),
    /// symbols with zero mass under both labels (unusable letters), and
    /// symbols with zero mass under exactly one label (infinite LLR).
    pub fn new(plus: Vec<f64>, minus: Vec<f64>) -> Result<Self> {
        let ch = Self::new_factory(plus, minus)?;
        if let Some(m) = (0..ch.alphabet_size()).find(|&m| ch.plus[m] == 0.0 && ch.minus[m] == 0.0)
        {
            return Err(Error::invalid(format!(
                "symbol {m} has zero mass under both labels"
            )));
        }
        Ok(ch)
    }

    /// Factory-internal constructor: identical validation except that symbols
    /// dead under both labels are tolerated (they can never be observed).
    /// `erasure_flip_channel(0, _)` needs this to keep its 3-symbol shape.
    fn new_factory(plus: Vec<f64>, minus: Vec<f64>) -> Result<Self> {
        if plus.len() != minus.len() || plus.is_empty() {
            return Err(Error::invalid(
                "likelihood vectors must be nonempty and of equal length",
            ));
        }
        for (name, v) in [("alpha_plus", &plus), ("alpha_minus", &minus)] {
            if v.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(Error::invalid(format!("{name} has a negative or non-finite entry")));
            }
            let s: f64 = v.iter().sum();
            if (s - 1.0).abs() > PROB_SUM_TOL {
                return Err(Error::invalid(format!("{name} sums to {s}, expected 1")));
            }
        }
        for m in 0..plus.len() {
            let one_sided = (plus[m] == 0.0) != (minus[m] == 0.0);
            if one_sided {
                return Err(Error::invalid(format!(
                    "symbol {m} has zero mass under exactly one label (infinite LLR)"
                )));
            }
        }
        Ok(SideInfoChannel { plus, minus })
    }

    pub fn alphabet_size(&self) -> usize {
        self.plus.len()
    }

    pub fn plus_likelihoods(&self) -> &[f64] {
        &self.plus
    }

    pub fn minus_likelihoods(&self) -> &[f64] {
        &self.minus
    }

    /// LLR of a symbol under the requested convention. Symbols that are dead
    /// under both labels (possible only through the `epsilon = 0` factory)
    /// report 0.
    pub fn llr_of(&self, symbol: usize, model: LlrModel) -> Result<f64> {
        if symbol >= self.alphabet_size() {
            return Err(Error::invalid(format!(
                "symbol index {symbol} out of range (M = {})",
                self.alphabet_size()
            )));
        }
        let (p, q) = (self.plus[symbol], self.minus[symbol]);
        if p == 0.0 && q == 0.0 {
            return Ok(0.0);
        }
        let full = (p / q).ln();
        Ok(match model {
            LlrModel::SymmetricHalfLog => 0.5 * full,
            LlrModel::SingleFullLog => full,
        })
    }

    /// Per-symbol LLR values plus the label-conditional LLR distributions
    /// (`U+`/`U-`, or `U1`/`U0` in the single-community reading). Zero-mass
    /// symbols are excluded from the distributions.
    pub fn llr_spec(&self, model: LlrModel) -> LlrSpec {
        let values: Vec<f64> = (0..self.alphabet_size())
            .map(|m| self.llr_of(m, model).expect("index in range"))
            .collect();
        let live: Vec<usize> = (0..self.alphabet_size())
            .filter(|&m| self.plus[m] > 0.0 || self.minus[m] > 0.0)
            .collect();
        let dist = |probs: &[f64]| {
            DiscreteDist::new(
                live.iter().map(|&m| values[m]).collect(),
                live.iter().map(|&m| probs[m]).collect(),
            )
            .expect("channel likelihoods form a distribution")
        };
        LlrSpec {
            model,
            plus_dist: dist(&self.plus),
            minus_dist: dist(&self.minus),
            values,
        }
    }

    /// Samples one observation per label; `label > 0` selects the plus
    /// likelihoods (works for both the `{-1,+1}` and `{0,1}` label sets).
    /// Deterministic for a fixed seed.
    pub fn sample_side_info(&self, labels: &[i8], seed: u64) -> Vec<u16> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cum = |v: &[f64]| {
            let mut acc = 0.0;
            v.iter()
                .map(|&p| {
                    acc += p;
                    acc
                })
                .collect::<Vec<f64>>()
        };
        let cum_plus = cum(&self.plus);
        let cum_minus = cum(&self.minus);
        labels
            .iter()
            .map(|&lab| {
                let u: f64 = rng.random();
                let cum = if lab > 0 { &cum_plus } else { &cum_minus };
                cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1) as u16
            })
            .collect()
    }

    /// Exact discrete change-of-measure sum `sum_m alpha_plus_m *
    /// (alpha_minus_m / alpha_plus_m)` over symbols with positive plus-mass.
    /// Equals 1 for every valid channel.
    pub fn change_of_measure_sum(&self) -> f64 {
        (0..self.alphabet_size())
            .filter(|&m| self.plus[m] > 0.0)
            .map(|m| self.plus[m] * (self.minus[m] / self.plus[m]))
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ChannelJson {
            m: self.alphabet_size(),
            alpha_plus: self.plus.clone(),
            alpha_minus: self.minus.clone(),
        })
        .expect("channel serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: ChannelJson = serde_json::from_str(s)?;
        if j.m != j.alpha_plus.len() {
            return Err(Error::Parse(format!(
                "declared m = {} but alpha_plus has {} entries",
                j.m,
                j.alpha_plus.len()
            )));
        }
        Self::new_factory(j.alpha_plus, j.alpha_minus)
    }
}

/// Per-symbol LLRs and label-conditional LLR distributions for one
/// convention.
#[derive(Debug, Clone)]
pub struct LlrSpec {
    pub model: LlrModel,
    /// LLR per symbol index (0 for dead symbols).
    pub values: Vec<f64>,
    /// Distribution of the LLR given the plus label (U+ / U1).
    pub plus_dist: DiscreteDist,
    /// Distribution of the LLR given the minus label (U- / U0).
    pub minus_dist: DiscreteDist,
}

/// Three-symbol erasure/flip channel for the symmetric model: the label is
/// seen correctly with probability `epsilon * (1 - alpha)`, flipped with
/// probability `epsilon * alpha`, and erased with probability `1 - epsilon`.
/// Symbol order: `[plus, minus, erasure]`. Half-log LLRs are
/// `{+gamma, -gamma, 0}` with `gamma = 0.5 * ln((1 - alpha)/alpha)`.
pub fn erasure_flip_channel(epsilon: f64, alpha: f64) -> Result<SideInfoChannel> {
    if !(0.0..=1.0).contains(&epsilon) || !epsilon.is_finite() {
        return Err(Error::invalid(format!("epsilon = {epsilon} outside [0, 1]")));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::invalid(format!(
            "alpha = {alpha} outside (0, 0.5); the flip LLR would be degenerate"
        )));
    }
    SideInfoChannel::new_factory(
        vec![epsilon * (1.0 - alpha), epsilon * alpha, 1.0 - epsilon],
        vec![epsilon * alpha, epsilon * (1.0 - alpha), 1.0 - epsilon],
    )
}

/// Binary flip channel for the single-community model: the label is seen
/// correctly with probability `1 - alpha`. Symbol order: `[one, zero]`.
/// Full-log LLRs are `{ln((1-alpha)/alpha), ln(alpha/(1-alpha))}`.
pub fn binary_flip_channel(alpha: f64) -> Result<SideInfoChannel> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::invalid(format!(
            "alpha = {alpha} outside (0, 0.5]; alpha = 0 has an infinite LLR"
        )));
    }
    SideInfoChannel::new(vec![1.0 - alpha, alpha], vec![alpha, 1.0 - alpha])
}

/// Writes a side-information vector as CSV (`node_id,symbol_index`).
pub fn write_side_info_csv(w: &mut impl Write, symbols: &[u16]) -> Result<()> {
    writeln!(w, "node_id,symbol_index")?;
    for (i, &s) in symbols.iter().enumerate() {
        writeln!(w, "{i},{s}")?;
    }
    Ok(())
}

/// Reads a side-information CSV written by [`write_side_info_csv`].
pub fn read_side_info_csv(r: impl BufRead) -> Result<Vec<u16>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            if line.trim() != "node_id,symbol_index" {
                return Err(Error::Parse(format!("unexpected header: {line}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let id: usize = parts
            .next()
            .and_then(|p| p.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad node id on line {}", lineno + 1)))?;
        let sym: u16 = parts
            .next()
            .and_then(|p| p.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad symbol on line {}", lineno + 1)))?;
        if id != out.len() {
            return Err(Error::Parse(format!(
                "node ids must be consecutive from 0; saw {id} at line {}",
                lineno + 1
            )));
        }
        out.push(sym);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn erasure_only_channel() {
        // epsilon = 0 keeps the 3-symbol shape with all mass on the erasure
        let ch = erasure_flip_channel(0.0, 0.3).unwrap();
        assert_eq!(ch.plus_likelihoods(), &[0.0, 0.0, 1.0]);
        assert_eq!(ch.minus_likelihoods(), &[0.0, 0.0, 1.0]);
        let spec = ch.llr_spec(LlrModel::SymmetricHalfLog);
        assert_eq!(spec.plus_dist.values(), &[0.0]);
        assert_eq!(spec.plus_dist.probs(), &[1.0]);
    }

    #[test]
    fn erasure_flip_likelihoods() {
        let ch = erasure_flip_channel(0.1, 0.4).unwrap();
        let expect = [0.06, 0.04, 0.9];
        for (got, want) in ch.plus_likelihoods().iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((ch.minus_likelihoods()[0] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn erasure_flip_gamma() {
        // gamma = 0.5 ln((1-alpha)/alpha) at alpha = 0.1 (high-precision oracle value)
        let ch = erasure_flip_channel(1.0, 0.1).unwrap();
        let gamma = ch.llr_of(0, LlrModel::SymmetricHalfLog).unwrap();
        assert!((gamma - 1.098_612_288_668_109_7).abs() < 1e-14);
        assert_eq!(ch.llr_of(2, LlrModel::SymmetricHalfLog).unwrap(), 0.0);
        assert!(
            (ch.llr_of(1, LlrModel::SymmetricHalfLog).unwrap() + gamma).abs() < 1e-15
        );
    }

    #[test]
    fn erasure_flip_rejects_bad_parameters() {
        assert!(erasure_flip_channel(-0.1, 0.3).is_err());
        assert!(erasure_flip_channel(1.1, 0.3).is_err());
        assert!(erasure_flip_channel(0.5, 0.0).is_err());
        assert!(erasure_flip_channel(0.5, 0.5).is_err()); // 0.5 excluded for this factory
        assert!(erasure_flip_channel(0.5, 0.7).is_err());
    }

    #[test]
    fn binary_flip_llrs() {
        let ch = binary_flip_channel(0.4).unwrap();
        let h1 = ch.llr_of(0, LlrModel::SingleFullLog).unwrap();
        assert!((h1 - 1.5f64.ln()).abs() < 1e-15);
        let h0 = ch.llr_of(1, LlrModel::SingleFullLog).unwrap();
        assert!((h0 + 1.5f64.ln()).abs() < 1e-15);

        let strong = binary_flip_channel(0.1).unwrap();
        assert!(
            (strong.llr_of(0, LlrModel::SingleFullLog).unwrap() - 9.0f64.ln()).abs() < 1e-14
        );
    }

    #[test]
    fn binary_flip_half_alpha_is_uninformative() {
        let ch = binary_flip_channel(0.5).unwrap();
        assert_eq!(ch.llr_of(0, LlrModel::SingleFullLog).unwrap(), 0.0);
        assert_eq!(ch.llr_of(1, LlrModel::SingleFullLog).unwrap(), 0.0);
    }

    #[test]
    fn binary_flip_rejects_zero_alpha() {
        assert!(binary_flip_channel(0.0).is_err());
    }

    #[test]
    fn constructor_rejects_dead_and_one_sided_symbols() {
        assert!(SideInfoChannel::new(vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(SideInfoChannel::new(vec![0.5, 0.5], vec![0.0, 1.0]).is_err());
        assert!(SideInfoChannel::new(vec![0.5, 0.5], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn llr_of_out_of_range_errors() {
        let ch = binary_flip_channel(0.2).unwrap();
        assert!(ch.llr_of(2, LlrModel::SingleFullLog).is_err());
    }

    #[test]
    fn half_log_is_half_of_full_log() {
        let ch = erasure_flip_channel(0.7, 0.25).unwrap();
        for m in 0..3 {
            let h = ch.llr_of(m, LlrModel::SymmetricHalfLog).unwrap();
            let f = ch.llr_of(m, LlrModel::SingleFullLog).unwrap();
            assert!((2.0 * h - f).abs() < 1e-15);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let ch = erasure_flip_channel(0.6, 0.2).unwrap();
        let labels: Vec<i8> = (0..500).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
        let a = ch.sample_side_info(&labels, 99);
        let b = ch.sample_side_info(&labels, 99);
        assert_eq!(a, b);
        let c = ch.sample_side_info(&labels, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_erasure_only() {
        let ch = erasure_flip_channel(0.0, 0.3).unwrap();
        let labels = vec![1i8; 64];
        let syms = ch.sample_side_info(&labels, 5);
        assert!(syms.iter().all(|&s| s == 2));
    }

    #[test]
    fn sampling_flip_fraction_concentrates() {
        // n = 1e5 all-plus labels through a pure flip channel: the flipped
        // fraction is Binomial(n, 0.1); check within 3 sigma.
        let n = 100_000usize;
        let ch = erasure_flip_channel(1.0, 0.1).unwrap();
        let labels = vec![1i8; n];
        let syms = ch.sample_side_info(&labels, 42);
        let flipped = syms.iter().filter(|&&s| s == 1).count() as f64;
        let p = 0.1;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (flipped - n as f64 * p).abs() < 3.0 * sigma,
            "flipped {flipped} of {n}"
        );
    }

    #[test]
    fn change_of_measure_is_one() {
        for (e, a) in [(1.0, 0.1), (0.3, 0.45), (0.0, 0.2)] {
            let ch = erasure_flip_channel(e, a).unwrap();
            assert!(
                (ch.change_of_measure_sum() - 1.0).abs() < 1e-12,
                "eps={e} alpha={a}"
            );
        }
        let ch = binary_flip_channel(0.25).unwrap();
        assert!((ch.change_of_measure_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let ch = erasure_flip_channel(0.35, 0.15).unwrap();
        let back = SideInfoChannel::from_json(&ch.to_json()).unwrap();
        assert_eq!(ch, back);
    }

    #[test]
    fn side_info_csv_round_trip() {
        let syms = vec![0u16, 2, 1, 2, 0];
        let mut buf = Vec::new();
        write_side_info_csv(&mut buf, &syms).unwrap();
        let back = read_side_info_csv(&buf[..]).unwrap();
        assert_eq!(syms, back);
    }

    proptest! {
        #[test]
        fn factories_always_produce_probability_vectors(
            e in 0.0f64..=1.0,
            a in 0.01f64..0.49,
        ) {
            let ch = erasure_flip_channel(e, a).unwrap();
            let sp: f64 = ch.plus_likelihoods().iter().sum();
            let sm: f64 = ch.minus_likelihoods().iter().sum();
            prop_assert!((sp - 1.0).abs() < 1e-12);
            prop_assert!((sm - 1.0).abs() < 1e-12);
            prop_assert!((ch.change_of_measure_sum() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn half_log_change_of_measure_via_llr(
            e in 0.05f64..=1.0,
            a in 0.05f64..0.45,
        ) {
            // E[exp(-2 U+)] = 1 for the half-log LLR under the plus label
            let ch = erasure_flip_channel(e, a).unwrap();
            let spec = ch.llr_spec(LlrModel::SymmetricHalfLog);
            let v = spec.plus_dist.expect(|u| (-2.0 * u).exp());
            prop_assert!((v - 1.0).abs() < 1e-12);
        }
    }
}
