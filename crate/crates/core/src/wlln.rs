//! Weak law of large numbers under ambiguity: truncation and centering,
//! exact lower probabilities on finite urns, the exponential Markov bound,
//! and Monte Carlo experiments under mean and variance uncertainty.

use std::collections::BTreeMap;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::independence::Urn;
use crate::measure::{Capacity, RandomVariable, SubsetMask};
use crate::rng;

/// Cap on the work of one exact computation (selections times outcomes).
pub const MAX_EXACT_WORK: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WllnError {
    #[error("sample size must be at least 1")]
    ZeroSampleSize,
    #[error("supplied upper mean {supplied} differs from the envelope {computed}")]
    MeanMismatch { supplied: f64, computed: f64 },
    #[error("exact computation needs {size} steps, cap is {cap}")]
    EnumerationCap { size: u128, cap: u128 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// `b_n = n / ln(1 + n)`.
pub fn truncation_bound(n: usize) -> f64 {
    assert!(n >= 1, "truncation index starts at 1");
    n as f64 / (n as f64).ln_1p()
}

/// `f_n(x) = (-b_n) ∨ (x ∧ b_n)`.
pub fn truncate(x: f64, n: usize) -> f64 {
    let b = truncation_bound(n);
    x.clamp(-b, b)
}

/// `X̄ = f_n(X - μ̄) - E[f_n(X - μ̄)] + μ̄`, where `E` is the upper envelope
/// of the urn and `μ̄` must equal the upper envelope of `X` to within `tol`.
pub fn center_truncated(
    urn: &Urn,
    n: usize,
    mean_hi: f64,
    tol: f64,
) -> Result<RandomVariable, WllnError> {
    if n == 0 {
        return Err(WllnError::ZeroSampleSize);
    }
    let computed = urn.credal().upper_envelope(urn.variable());
    if (computed - mean_hi).abs() > tol {
        return Err(WllnError::MeanMismatch {
            supplied: mean_hi,
            computed,
        });
    }
    let y = urn
        .variable()
        .map(|x| truncate(x - mean_hi, n))
        .expect("finite");
    let shift = urn.credal().upper_envelope(&y);
    Ok(y.map(|v| v - shift + mean_hi).expect("finite"))
}

/// Lower probabilities of the band `[μ̲ - ε, μ̄ + ε]` for the sample mean of
/// `n` draws, each from a member chosen independently.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BandProbabilities {
    pub lo: f64,
    pub hi: f64,
    /// `ν(μ̲ - ε <= S_n / n <= μ̄ + ε)`
    pub band: f64,
    /// `ν(S_n / n <= μ̄ + ε)`
    pub below_hi: f64,
    /// `ν(S_n / n >= μ̲ - ε)`
    pub above_lo: f64,
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Exact `min` over selections `(Q_1, ..., Q_n) ∈ 𝒫^n` of the band
/// probabilities. The sum law only depends on how many draws use each
/// member, so selections are enumerated as multisets and the law of
/// `S_n` is tracked as a distribution over value counts.
pub fn exact_band_probabilities(
    urn: &Urn,
    n: usize,
    eps: f64,
) -> Result<BandProbabilities, WllnError> {
    if n == 0 {
        return Err(WllnError::ZeroSampleSize);
    }
    let laws = urn.value_law();
    let range = urn.range();
    let (l, m) = (laws.len() as u128, range.len() as u128);
    let selections = binomial(n as u128 + l - 1, l - 1);
    let outcomes = binomial(n as u128 + m - 1, m - 1);
    let work = selections
        .saturating_mul(outcomes)
        .saturating_mul(n as u128);
    if work > MAX_EXACT_WORK {
        return Err(WllnError::EnumerationCap {
            size: work,
            cap: MAX_EXACT_WORK,
        });
    }
    let lo = urn.credal().lower_envelope(urn.variable()) - eps;
    let hi = urn.credal().upper_envelope(urn.variable()) + eps;
    let mut best = BandProbabilities {
        lo,
        hi,
        band: f64::INFINITY,
        below_hi: f64::INFINITY,
        above_lo: f64::INFINITY,
    };
    let start: BTreeMap<Vec<u32>, f64> = [(vec![0; range.len()], 1.0)].into();
    let mut visit = |dist: &BTreeMap<Vec<u32>, f64>| {
        let (mut band, mut below, mut above) = (0.0, 0.0, 0.0);
        for (counts, &p) in dist {
            let sum: f64 = counts.iter().zip(&range).map(|(&c, &v)| c as f64 * v).sum();
            let mean = sum / n as f64;
            if mean <= hi {
                below += p;
            }
            if mean >= lo {
                above += p;
            }
            if mean >= lo && mean <= hi {
                band += p;
            }
        }
        best.band = best.band.min(band);
        best.below_hi = best.below_hi.min(below);
        best.above_lo = best.above_lo.min(above);
    };
    multisets(&laws, n, 0, &start, &mut visit);
    Ok(best)
}

/// Depth-first walk over nondecreasing member sequences, sharing prefixes.
fn multisets(
    laws: &[Vec<f64>],
    remaining: usize,
    first: usize,
    dist: &BTreeMap<Vec<u32>, f64>,
    visit: &mut impl FnMut(&BTreeMap<Vec<u32>, f64>),
) {
    if remaining == 0 {
        visit(dist);
        return;
    }
    for member in first..laws.len() {
        let mut next: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (counts, &p) in dist {
            for (j, &q) in laws[member].iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                let mut c = counts.clone();
                c[j] += 1;
                *next.entry(c).or_insert(0.0) += p * q;
            }
        }
        multisets(laws, remaining - 1, member, &next, visit);
    }
}

/// `ν(μ̲ - ε <= S_n / n <= μ̄ + ε)` for `n` draws from the urn.
pub fn exact_lower_prob(urn: &Urn, n: usize, eps: f64) -> Result<f64, WllnError> {
    Ok(exact_band_probabilities(urn, n, eps)?.band)
}

/// First pair `(A, B)` with `V(A ∪ B) > V(A) + V(B) + tol`.
pub fn subadditivity_violation(v: &Capacity, tol: f64) -> Option<(SubsetMask, SubsetMask)> {
    let t = v.table();
    for a in 0..t.len() {
        for b in a..t.len() {
            if t[a | b] > t[a] + t[b] + tol {
                return Some((SubsetMask(a as u32), SubsetMask(b as u32)));
            }
        }
    }
    None
}

/// Both sides of the exponential Markov bound
/// `V(Σ D_k > nε) <= Π_k max_Q E_Q[e^{c D_k}] / e^{m̂ ε ln(1+n)}` with
/// `c = m̂ ln(1+n) / n` and `D_k = X̄_k - μ̄` centered at truncation level `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MarkovGap {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

pub fn exp_markov_gap(urn: &Urn, n: usize, eps: f64, mult: f64) -> Result<MarkovGap, WllnError> {
    if n == 0 {
        return Err(WllnError::ZeroSampleSize);
    }
    let members = urn.credal().members();
    let atoms = urn.space().len() as u128;
    let work = (members.len() as u128)
        .saturating_pow(n as u32)
        .saturating_mul(atoms.saturating_pow(n as u32));
    if work > MAX_EXACT_WORK {
        return Err(WllnError::EnumerationCap {
            size: work,
            cap: MAX_EXACT_WORK,
        });
    }
    let mean_hi = urn.credal().upper_envelope(urn.variable());
    let deviations: Vec<Vec<f64>> = (1..=n)
        .map(|k| {
            let centered = center_truncated(urn, k, mean_hi, f64::INFINITY)?;
            Ok(centered.values().iter().map(|v| v - mean_hi).collect())
        })
        .collect::<Result<_, WllnError>>()?;
    let c = mult * (n as f64).ln_1p() / n as f64;
    let threshold = n as f64 * eps;

    // lhs: max over full selections of P(Σ D_k > nε), counted conservatively
    let mut lhs: f64 = 0.0;
    tail_max(
        members,
        &deviations,
        0,
        &[(0.0, 1.0)],
        threshold - 1e-12,
        &mut lhs,
    );

    let numerator: f64 = deviations
        .iter()
        .map(|d| {
            members
                .iter()
                .map(|m| {
                    m.probs()
                        .iter()
                        .zip(d)
                        .map(|(p, v)| p * (c * v).exp())
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .product();
    let rhs = numerator / (mult * eps * (n as f64).ln_1p()).exp();
    Ok(MarkovGap {
        lhs,
        rhs,
        ok: lhs <= rhs + 1e-9,
    })
}

fn tail_max(
    members: &[crate::measure::ProbabilityVector],
    deviations: &[Vec<f64>],
    k: usize,
    dist: &[(f64, f64)],
    threshold: f64,
    best: &mut f64,
) {
    if k == deviations.len() {
        let p: f64 = dist
            .iter()
            .filter(|(s, _)| *s > threshold)
            .map(|(_, p)| p)
            .sum();
        *best = best.max(p);
        return;
    }
    for m in members {
        let next: Vec<(f64, f64)> = dist
            .iter()
            .flat_map(|&(s, p)| {
                m.probs()
                    .iter()
                    .zip(&deviations[k])
                    .filter(|(q, _)| **q > 0.0)
                    .map(move |(q, d)| (s + d, p * q))
            })
            .collect();
        tail_max(members, deviations, k + 1, &next, threshold, best);
    }
}

/// How the per-draw mean and deviation are picked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// `μ_i ~ U[μ̲, μ̄]`, `σ_i ~ U[σ_lo, σ_hi]`, fresh per draw.
    UniformRandom,
    /// `(μ̄, σ_hi)` for every draw.
    ExtremeHigh,
    /// `(μ̲, σ_hi)` for every draw.
    ExtremeLow,
    /// `(μ̄, σ_hi)` on even draws and `(μ̲, σ_hi)` on odd draws.
    Oscillating,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::UniformRandom,
        Strategy::ExtremeHigh,
        Strategy::ExtremeLow,
        Strategy::Oscillating,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::UniformRandom => "uniform-random",
            Strategy::ExtremeHigh => "extreme-high",
            Strategy::ExtremeLow => "extreme-low",
            Strategy::Oscillating => "oscillating",
        }
    }
}

/// A Monte Carlo experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WllnScenario {
    pub name: String,
    pub mean_lo: f64,
    pub mean_hi: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub n_list: Vec<usize>,
    pub reps: usize,
    pub epsilon: f64,
    pub strategy: Strategy,
    pub seed: u64,
}

impl WllnScenario {
    /// Every violated constraint, in field order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let finite = [
            self.mean_lo,
            self.mean_hi,
            self.sigma_lo,
            self.sigma_hi,
            self.epsilon,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            out.push("parameters must be finite".to_string());
        }
        if self.mean_lo > self.mean_hi {
            out.push(format!(
                "mean_lo {} exceeds mean_hi {}",
                self.mean_lo, self.mean_hi
            ));
        }
        if self.sigma_lo < 0.0 {
            out.push(format!("sigma_lo {} is negative", self.sigma_lo));
        }
        if self.sigma_lo > self.sigma_hi {
            out.push(format!(
                "sigma_lo {} exceeds sigma_hi {}",
                self.sigma_lo, self.sigma_hi
            ));
        }
        if self.n_list.is_empty() {
            out.push("n_list is empty".to_string());
        }
        if self.n_list.contains(&0) {
            out.push("n_list contains 0".to_string());
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            out.push("n_list is not strictly ascending".to_string());
        }
        if self.n_list.iter().any(|&n| n as u64 >= 1 << 32) {
            out.push("sample sizes must be below 2^32".to_string());
        }
        if self.reps == 0 || self.reps as u64 >= 1 << 32 {
            out.push("reps must be in 1..2^32".to_string());
        }
        if self.epsilon < 0.0 {
            out.push(format!("epsilon {} is negative", self.epsilon));
        }
        out
    }

    pub fn validate(&self) -> Result<(), WllnError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(WllnError::InvalidScenario(v.join("; ")))
        }
    }

    /// `[μ̲ - ε, μ̄ + ε]`.
    pub fn band(&self) -> (f64, f64) {
        (self.mean_lo - self.epsilon, self.mean_hi + self.epsilon)
    }
}

/// Inverse standard normal CDF by Acklam's rational approximation
/// (relative error below 1.15e-9), without a refinement step.
#[allow(clippy::excessive_precision)]
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

fn standard_normal(rng: &mut impl RngCore) -> f64 {
    inverse_normal_cdf(rng::open_unit(rng))
}

/// One repetition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub n: usize,
    pub rep: usize,
    pub sample_mean: f64,
    pub in_band: bool,
}

/// Fraction of repetitions inside the band for one sample size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub strategy: Strategy,
    pub band: (f64, f64),
    pub reps: usize,
    /// Ordered by `n` then `rep`.
    pub samples: Vec<Sample>,
}

impl SimulationReport {
    pub fn frequency_at(&self, n: usize) -> Option<f64> {
        frequency_curve(self)
            .into_iter()
            .find(|p| p.n == n)
            .map(|p| p.frequency)
    }
}

/// Sample mean of one repetition, drawn from stream `(n << 32) | rep`.
pub fn simulate_rep(s: &WllnScenario, n: usize, rep: usize) -> f64 {
    let mut rng = rng::stream(s.seed, ((n as u64) << 32) | rep as u64);
    let mut sum = 0.0;
    for i in 0..n {
        let (mu, sigma) = match s.strategy {
            Strategy::UniformRandom => {
                let mu = s.mean_lo + (s.mean_hi - s.mean_lo) * rng::open_unit(&mut rng);
                let sigma = s.sigma_lo + (s.sigma_hi - s.sigma_lo) * rng::open_unit(&mut rng);
                (mu, sigma)
            }
            Strategy::ExtremeHigh => (s.mean_hi, s.sigma_hi),
            Strategy::ExtremeLow => (s.mean_lo, s.sigma_hi),
            Strategy::Oscillating if i % 2 == 0 => (s.mean_hi, s.sigma_hi),
            Strategy::Oscillating => (s.mean_lo, s.sigma_hi),
        };
        sum += mu + sigma * standard_normal(&mut rng);
    }
    sum / n as f64
}

/// Runs every `(n, rep)` pair; results do not depend on the thread count.
pub fn mc_simulate(s: &WllnScenario) -> Result<SimulationReport, WllnError> {
    s.validate()?;
    let (lo, hi) = s.band();
    let jobs: Vec<(usize, usize)> = s
        .n_list
        .iter()
        .flat_map(|&n| (0..s.reps).map(move |rep| (n, rep)))
        .collect();
    let samples = jobs
        .into_par_iter()
        .map(|(n, rep)| {
            let sample_mean = simulate_rep(s, n, rep);
            Sample {
                n,
                rep,
                sample_mean,
                in_band: sample_mean >= lo && sample_mean <= hi,
            }
        })
        .collect();
    Ok(SimulationReport {
        scenario: s.name.clone(),
        strategy: s.strategy,
        band: (lo, hi),
        reps: s.reps,
        samples,
    })
}

/// One row per sample size, in the order of the scenario's `n_list`.
pub fn frequency_curve(report: &SimulationReport) -> Vec<CurvePoint> {
    let mut out: Vec<(usize, usize, usize)> = Vec::new();
    for s in &report.samples {
        match out.last_mut() {
            Some((n, hits, total)) if *n == s.n => {
                *hits += s.in_band as usize;
                *total += 1;
            }
            _ => out.push((s.n, s.in_band as usize, 1)),
        }
    }
    out.into_iter()
        .map(|(n, hits, total)| CurvePoint {
            n,
            frequency: hits as f64 / total as f64,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::independence::ellsberg_urn;

    #[test]
    fn truncation_examples() {
        let b3 = 3.0 / 4f64.ln();
        assert!((truncation_bound(3) - 2.1640).abs() < 1e-4);
        assert_eq!(truncate(1.0, 3), 1.0);
        assert_eq!(truncate(10.0, 3), b3);
        assert_eq!(truncate(-10.0, 3), -b3);
        assert_eq!(truncation_bound(1), 1.0 / 2f64.ln());
    }

    #[test]
    fn centering_of_ellsberg_urn_is_identity() {
        let urn = ellsberg_urn();
        let x = center_truncated(&urn, 1, 0.5, 1e-12).unwrap();
        assert_eq!(x.values(), urn.variable().values());
        assert!(matches!(
            center_truncated(&urn, 1, 0.4, 1e-12),
            Err(WllnError::MeanMismatch { .. })
        ));
    }

    #[test]
    fn exact_examples() {
        let urn = ellsberg_urn();
        assert_eq!(exact_lower_prob(&urn, 1, 10.0).unwrap(), 1.0);
        assert!((exact_lower_prob(&urn, 2, 0.25).unwrap() - 0.42).abs() < 1e-12);
        assert_eq!(exact_lower_prob(&urn, 1, 0.25).unwrap(), 0.0);
    }

    #[test]
    fn markov_example() {
        let g = exp_markov_gap(&ellsberg_urn(), 4, 0.3, 2.0).unwrap();
        assert!(g.ok);
        let far = exp_markov_gap(&ellsberg_urn(), 3, 5.0, 2.0).unwrap();
        assert_eq!(far.lhs, 0.0);
        assert!(far.ok);
    }

    #[test]
    fn acklam_matches_known_quantiles() {
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
        assert!((inverse_normal_cdf(0.975) - 1.959963984540054).abs() < 1e-8);
        assert!((inverse_normal_cdf(0.01) + 2.326347874040841).abs() < 1e-8);
        assert!((inverse_normal_cdf(1e-10) + 6.361340902404056).abs() < 1e-7);
    }

    fn scenario(strategy: Strategy) -> WllnScenario {
        WllnScenario {
            name: "t".into(),
            mean_lo: -1.0,
            mean_hi: 1.0,
            sigma_lo: 0.0,
            sigma_hi: 0.0,
            n_list: vec![1, 3, 8],
            reps: 5,
            epsilon: 0.0,
            strategy,
            seed: 9,
        }
    }

    #[test]
    fn noiseless_draws_stay_in_band() {
        for strategy in Strategy::ALL {
            let r = mc_simulate(&scenario(strategy)).unwrap();
            assert_eq!(r.samples.len(), 15);
            assert!(frequency_curve(&r).iter().all(|p| p.frequency == 1.0));
        }
        let osc = mc_simulate(&scenario(Strategy::Oscillating)).unwrap();
        assert_eq!(osc.samples[5].sample_mean, 1.0 / 3.0);
    }

    #[test]
    fn scenario_validation_lists_everything() {
        let mut s = scenario(Strategy::ExtremeHigh);
        s.mean_lo = 2.0;
        s.n_list = vec![3, 3];
        s.epsilon = -1.0;
        assert_eq!(s.violations().len(), 3);
        assert!(mc_simulate(&s).is_err());
    }

    #[test]
    fn one_rep_curve() {
        let mut s = scenario(Strategy::ExtremeHigh);
        s.reps = 1;
        s.n_list = vec![4];
        let r = mc_simulate(&s).unwrap();
        assert_eq!(
            frequency_curve(&r),
            vec![CurvePoint {
                n: 4,
                frequency: 1.0
            }]
        );
    }
}
