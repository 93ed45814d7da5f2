//! Effective beam width estimation.
//!
//! The effective beam width of a pattern is `W_B = Pr(G*(φ) > X)` where the
//! orientation `φ` is uniform on `[0, 2π)` and `X` is the normalized distance to
//! an interfering neighbour, independent of `φ`. `X` follows a basis law
//! `F_X(x) = x^h` or a positive-weight finite mixture of basis laws.
//!
//! All Monte Carlo estimators are Bernoulli means over independent samples.
//! Samples are split into fixed-size shards with one ChaCha substream per
//! shard, so estimates are bit-identical for any rayon thread count.

use std::f64::consts::TAU;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::patterns::AntennaPattern;
use crate::rng::{derive_seed, shards, substream};

/// Default Monte Carlo sample count per estimate.
pub const DEFAULT_SAMPLES: u64 = 1_000_000;

/// Default number of points on the integration axis of the quadrature oracle.
pub const QUADRATURE_POINTS: usize = 1 << 14;

/// Tolerance on the sum of mixture weights.
const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Normalized-distance law `F_X(x) = x^h` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisDistribution {
    order: f64,
}

impl BasisDistribution {
    pub fn new(order: f64) -> Result<Self> {
        if !(order > 0.0) || !order.is_finite() {
            return Err(Error::invalid(format!(
                "basis order h must be a positive finite number, got {order}"
            )));
        }
        Ok(BasisDistribution { order })
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn cdf(&self, x: f64) -> f64 {
        x.clamp(0.0, 1.0).powf(self.order)
    }

    /// Inverse-CDF transform of a uniform variate.
    #[inline]
    pub fn sample_from_uniform(&self, u: f64) -> f64 {
        u.powf(1.0 / self.order)
    }
}

/// Positive-weight finite mixture of basis laws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureDistribution {
    components: Vec<(f64, BasisDistribution)>,
}

impl MixtureDistribution {
    /// Build from `(weight, order)` pairs. Weights must be nonnegative and sum
    /// to one.
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("mixture must have at least one component"));
        }
        let mut components = Vec::with_capacity(pairs.len());
        for &(w, h) in pairs {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::invalid(format!("mixture weight must be >= 0, got {w}")));
            }
            components.push((w, BasisDistribution::new(h)?));
        }
        let total: f64 = components.iter().map(|c| c.0).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::invalid(format!(
                "mixture weights must sum to 1 (within {WEIGHT_SUM_TOLERANCE:e}), got {total}"
            )));
        }
        Ok(MixtureDistribution { components })
    }

    pub fn components(&self) -> &[(f64, BasisDistribution)] {
        &self.components
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components.iter().map(|(w, b)| w * b.cdf(x)).sum()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let pick: f64 = rng.random();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, b) in &self.components {
            acc += w;
            if pick < acc {
                return b.sample_from_uniform(u);
            }
        }
        // Rounding can leave `acc` a hair below one.
        let last = self
            .components
            .iter()
            .rev()
            .find(|(w, _)| *w > 0.0)
            .expect("weights sum to one");
        last.1.sample_from_uniform(u)
    }
}

/// Law of the normalized interferer distance `X`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DistanceLaw {
    Basis(BasisDistribution),
    Mixture(MixtureDistribution),
}

impl DistanceLaw {
    pub fn basis(order: f64) -> Result<Self> {
        Ok(DistanceLaw::Basis(BasisDistribution::new(order)?))
    }

    pub fn mixture(pairs: &[(f64, f64)]) -> Result<Self> {
        Ok(DistanceLaw::Mixture(MixtureDistribution::new(pairs)?))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            DistanceLaw::Basis(b) => b.cdf(x),
            DistanceLaw::Mixture(m) => m.cdf(x),
        }
    }

    #[inline]
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            DistanceLaw::Basis(b) => b.sample_from_uniform(rng.random()),
            DistanceLaw::Mixture(m) => m.sample(rng),
        }
    }

    /// `(weight, basis)` view; a basis law is a one-component mixture.
    fn weighted_bases(&self) -> Vec<(f64, BasisDistribution)> {
        match self {
            DistanceLaw::Basis(b) => vec![(1.0, *b)],
            DistanceLaw::Mixture(m) => m.components.clone(),
        }
    }
}

impl fmt::Display for DistanceLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceLaw::Basis(b) => write!(f, "h={}", b.order),
            DistanceLaw::Mixture(m) => {
                f.write_str("mix(")?;
                for (i, (w, b)) in m.components.iter().enumerate() {
                    if i > 0 {
                        f.write_str("|")?;
                    }
                    write!(f, "{}:{}", w, b.order)?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MonteCarlo,
    Quadrature,
}

/// A probability estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EbwEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
    pub method: Method,
}

impl EbwEstimate {
    /// Bernoulli mean with standard error `sqrt(p(1-p)/n)`.
    pub fn from_counts(hits: u64, samples: u64, seed: u64) -> Self {
        let value = hits as f64 / samples as f64;
        EbwEstimate {
            value,
            std_error: (value * (1.0 - value) / samples as f64).sqrt(),
            samples,
            seed,
            method: Method::MonteCarlo,
        }
    }

    pub fn exact(value: f64, points: u64) -> Self {
        EbwEstimate {
            value,
            std_error: 0.0,
            samples: points,
            seed: 0,
            method: Method::Quadrature,
        }
    }
}

/// First-order standard error of the product of two independent estimates.
pub fn product_std_error(a: &EbwEstimate, b: &EbwEstimate) -> f64 {
    ((b.value * a.std_error).powi(2) + (a.value * b.std_error).powi(2)).sqrt()
}

fn check_common(alpha: f64, samples: u64) -> Result<()> {
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!(
            "path-loss exponent alpha must be >= 1, got {alpha}"
        )));
    }
    if samples == 0 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    Ok(())
}

/// Count successes of `trial` over `samples` draws, sharded deterministically.
pub fn bernoulli_count<F>(samples: u64, seed: u64, trial: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let parts: Vec<(u64, u64)> = shards(samples).collect();
    parts
        .into_par_iter()
        .map(|(idx, len)| {
            let mut rng = substream(seed, idx);
            (0..len).filter(|_| trial(&mut rng)).count() as u64
        })
        .collect::<Vec<u64>>()
        .into_iter()
        .sum()
}

#[inline]
fn uniform_angle(rng: &mut ChaCha8Rng) -> f64 {
    rng.random::<f64>() * TAU
}

/// Monte Carlo estimate of `W_B = Pr(G*(φ) > X)`.
pub fn effective_beam_width(
    pattern: &AntennaPattern,
    law: &DistanceLaw,
    alpha: f64,
    samples: u64,
    seed: u64,
) -> Result<EbwEstimate> {
    check_common(alpha, samples)?;
    let hits = bernoulli_count(samples, seed, |rng| {
        let z = pattern.gain_starred(uniform_angle(rng), alpha);
        let x = law.sample(rng);
        z > x
    });
    Ok(EbwEstimate::from_counts(hits, samples, seed))
}

/// Monte Carlo estimate of the joint interference probability
/// `Pr(Y Z > X)` with `Y = G*_rx(θ)`, `Z = G*_tx(φ)`, all independent.
pub fn interference_probability(
    rx: &AntennaPattern,
    tx: &AntennaPattern,
    law: &DistanceLaw,
    alpha: f64,
    samples: u64,
    seed: u64,
) -> Result<EbwEstimate> {
    check_common(alpha, samples)?;
    let hits = bernoulli_count(samples, seed, |rng| {
        let y = rx.gain_starred(uniform_angle(rng), alpha);
        let z = tx.gain_starred(uniform_angle(rng), alpha);
        let x = law.sample(rng);
        y * z > x
    });
    Ok(EbwEstimate::from_counts(hits, samples, seed))
}

/// Deterministic effective beam width from the threshold beam-width curve.
///
/// With `b(x) = |{φ : G*(φ) > x}| / 2π` measured on a uniform `φ` grid,
/// `W_B = ∫ b(x) dF_X(x)`. Each basis term is integrated in `t = x^h` so the
/// integrand `b(t^{1/h})` is bounded for every order.
pub fn quadrature_beam_width(
    pattern: &AntennaPattern,
    law: &DistanceLaw,
    alpha: f64,
    angle_grid: usize,
    points: usize,
) -> Result<EbwEstimate> {
    check_common(alpha, 1)?;
    if angle_grid == 0 || points == 0 {
        return Err(Error::invalid("quadrature grids must be non-empty"));
    }
    let sorted = pattern.starred_samples_sorted(alpha, angle_grid);
    let total = sorted.len() as f64;
    let beam = |x: f64| {
        let at_or_below = sorted.partition_point(|&g| g <= x);
        (sorted.len() - at_or_below) as f64 / total
    };
    let mut value = 0.0;
    for (w, basis) in law.weighted_bases() {
        let h = basis.order();
        let dt = 1.0 / points as f64;
        let mut acc = 0.5 * (beam(0.0) + beam(1.0));
        for i in 1..points {
            acc += beam((i as f64 * dt).powf(1.0 / h));
        }
        value += w * acc * dt;
    }
    Ok(EbwEstimate::exact(value, points as u64))
}

/// Mixture effective beam width computed directly and as the weighted sum of
/// per-basis estimates.
#[derive(Debug, Clone, Serialize)]
pub struct MixtureEbw {
    pub direct: EbwEstimate,
    pub components: Vec<(f64, f64, EbwEstimate)>,
    pub weighted_sum: f64,
    pub weighted_std_error: f64,
    /// `|direct − weighted_sum| ≤ 3 · combined SE`.
    pub consistent: bool,
}

pub fn mixture_ebw(
    pattern: &AntennaPattern,
    mixture: &MixtureDistribution,
    alpha: f64,
    samples: u64,
    seed: u64,
) -> Result<MixtureEbw> {
    check_common(alpha, samples)?;
    let direct = effective_beam_width(pattern, &DistanceLaw::Mixture(mixture.clone()), alpha, samples, seed)?;
    let mut components = Vec::new();
    let mut weighted_sum = 0.0;
    let mut var = 0.0;
    for (i, (w, basis)) in mixture.components().iter().enumerate() {
        let est = effective_beam_width(
            pattern,
            &DistanceLaw::Basis(*basis),
            alpha,
            samples,
            derive_seed(seed, &[i as u64 + 1]),
        )?;
        weighted_sum += w * est.value;
        var += (w * est.std_error).powi(2);
        components.push((*w, basis.order(), est));
    }
    let weighted_std_error = var.sqrt();
    let combined = (direct.std_error.powi(2) + var).sqrt();
    Ok(MixtureEbw {
        consistent: (direct.value - weighted_sum).abs() <= 3.0 * combined,
        direct,
        components,
        weighted_sum,
        weighted_std_error,
    })
}

/// Interference probability bracketed by the product and the minimum of the
/// two effective beam widths.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub pr_ei: EbwEstimate,
    pub w_rx: EbwEstimate,
    pub w_tx: EbwEstimate,
    pub product_lower: f64,
    pub product_std_error: f64,
    pub min_upper: f64,
    pub min_upper_std_error: f64,
    /// Standard error of `pr_ei − product_lower`.
    pub excess_std_error: f64,
    pub pass: bool,
}

impl BoundsReport {
    pub fn excess(&self) -> f64 {
        self.pr_ei.value - self.product_lower
    }
}

/// Check `W_B(rx)·W_B(tx) ≤ Pr(YZ > X) ≤ min(W_B(rx), W_B(tx))` at 3σ.
///
/// The three probabilities are estimated on independent substreams.
pub fn verify_bounds(
    rx: &AntennaPattern,
    tx: &AntennaPattern,
    mixture: &MixtureDistribution,
    alpha: f64,
    samples: u64,
    seed: u64,
) -> Result<BoundsReport> {
    check_common(alpha, samples)?;
    if mixture.components().iter().any(|(w, _)| *w <= 0.0) {
        return Err(Error::invalid("bound check requires strictly positive mixture weights"));
    }
    let law = DistanceLaw::Mixture(mixture.clone());
    let pr_ei = interference_probability(rx, tx, &law, alpha, samples, seed)?;
    let w_rx = effective_beam_width(rx, &law, alpha, samples, derive_seed(seed, &[1]))?;
    let w_tx = effective_beam_width(tx, &law, alpha, samples, derive_seed(seed, &[2]))?;
    let product_lower = w_rx.value * w_tx.value;
    let product_std_error = product_std_error(&w_rx, &w_tx);
    let (min_upper, min_upper_std_error) = if w_rx.value <= w_tx.value {
        (w_rx.value, w_rx.std_error)
    } else {
        (w_tx.value, w_tx.std_error)
    };
    let excess_std_error = (pr_ei.std_error.powi(2) + product_std_error.powi(2)).sqrt();
    let upper_slack = 3.0 * (pr_ei.std_error.powi(2) + min_upper_std_error.powi(2)).sqrt();
    let pass = product_lower - 3.0 * excess_std_error <= pr_ei.value && pr_ei.value <= min_upper + upper_slack;
    Ok(BoundsReport {
        pr_ei,
        w_rx,
        w_tx,
        product_lower,
        product_std_error,
        min_upper,
        min_upper_std_error,
        excess_std_error,
        pass,
    })
}

/// Axis of a monotonicity scan.
#[derive(Debug, Clone, PartialEq)]
pub enum ScanAxis {
    /// Effective path-loss exponents `α* = α/h`, realised with `h = 2`.
    AlphaStar(Vec<f64>),
    /// Basis orders at a fixed path-loss exponent.
    Order { alpha: f64, orders: Vec<f64> },
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub parameter: f64,
    pub alpha: f64,
    pub order: f64,
    pub estimate: EbwEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityTable {
    pub rows: Vec<ScanRow>,
    /// Nondecreasing along the scan axis within 3σ slack.
    pub nondecreasing: bool,
    /// Nonincreasing along the scan axis within 3σ slack.
    pub nonincreasing: bool,
}

/// Effective beam width along an `α*` or `h` axis.
///
/// Every row reuses the same seed, so the draws are common random numbers and
/// the comparisons between rows are pathwise.
pub fn ebw_monotonicity_scan(
    pattern: &AntennaPattern,
    axis: &ScanAxis,
    samples: u64,
    seed: u64,
) -> Result<MonotonicityTable> {
    let cells: Vec<(f64, f64, f64)> = match axis {
        ScanAxis::AlphaStar(list) => list.iter().map(|&a| (a, 2.0 * a, 2.0)).collect(),
        ScanAxis::Order { alpha, orders } => orders.iter().map(|&h| (h, *alpha, h)).collect(),
    };
    if cells.windows(2).any(|w| !(w[0].0 < w[1].0)) || cells.iter().any(|c| !(c.0 > 0.0)) {
        return Err(Error::invalid("scan axis must be a strictly increasing positive list"));
    }
    let mut rows = Vec::with_capacity(cells.len());
    for (parameter, alpha, order) in cells {
        let estimate = effective_beam_width(pattern, &DistanceLaw::basis(order)?, alpha, samples, seed)?;
        rows.push(ScanRow {
            parameter,
            alpha,
            order,
            estimate,
        });
    }
    let slack = |a: &ScanRow, b: &ScanRow| 3.0 * (a.estimate.std_error.powi(2) + b.estimate.std_error.powi(2)).sqrt();
    let nondecreasing = rows
        .windows(2)
        .all(|w| w[1].estimate.value >= w[0].estimate.value - slack(&w[0], &w[1]));
    let nonincreasing = rows
        .windows(2)
        .all(|w| w[1].estimate.value <= w[0].estimate.value + slack(&w[0], &w[1]));
    Ok(MonotonicityTable {
        rows,
        nondecreasing,
        nonincreasing,
    })
}
