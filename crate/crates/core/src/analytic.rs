//! Closed-form throughput expressions, parameter rules and small numerical
//! oracles used to check the simulator.
//!
//! Order expressions are evaluated as their bracket formulas with the
//! asymptotic constants dropped. Logarithms are natural.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{shards, substream};

/// Asymptotic root constant of the transport-optimal range equation:
/// `w ≈ TRANSPORT_ROOT_CONSTANT / n`.
pub const TRANSPORT_ROOT_CONSTANT: f64 = 1.256;

/// Degree at and above which the asymptotic root replaces bisection.
pub const ASYMPTOTIC_ROOT_MIN_N: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GuardZone {
    /// Fractional exclusion margin `SIR₀^{1/α} − 1`.
    pub delta: f64,
    /// `π (1 + Δ)²`.
    pub c1: f64,
}

pub fn guard_zone(sir0: f64, alpha: f64) -> Result<GuardZone> {
    if !(sir0 > 1.0) || !sir0.is_finite() {
        return Err(Error::invalid(format!("SIR0 must satisfy SIR0 > 1, got {sir0}")));
    }
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be >= 1, got {alpha}")));
    }
    let delta = sir0.powf(1.0 / alpha) - 1.0;
    Ok(GuardZone {
        delta,
        c1: PI * (1.0 + delta).powi(2),
    })
}

/// Rayleigh-fading interference factor `E[(F₁/F₂)^{2/α}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum FadingFactor {
    Finite(f64),
    /// The expectation is infinite for `α ≤ 2`.
    Divergent,
}

impl FadingFactor {
    pub fn value(self) -> Option<f64> {
        match self {
            FadingFactor::Finite(v) => Some(v),
            FadingFactor::Divergent => None,
        }
    }
}

/// `(2π/α) / sin(2π/α)` for `α > 2`.
pub fn f_alpha(alpha: f64) -> Result<FadingFactor> {
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be >= 1, got {alpha}")));
    }
    if alpha <= 2.0 {
        return Ok(FadingFactor::Divergent);
    }
    let x = TAU / alpha;
    Ok(FadingFactor::Finite(x / x.sin()))
}

/// Draw `n` ratios `F₁/F₂` of independent unit exponentials, in a fixed order.
pub fn exponential_ratios(samples: u64, seed: u64) -> Vec<f64> {
    let parts: Vec<(u64, u64)> = shards(samples).collect();
    parts
        .into_par_iter()
        .map(|(idx, len)| {
            let mut rng = substream(seed, idx);
            (0..len)
                .map(|_| {
                    let a: f64 = rng.sample(Exp1);
                    let b: f64 = rng.sample(Exp1);
                    a / b
                })
                .collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Monte Carlo estimate of `E[(F₁/F₂)^{2/α}]`. For `α ≤ 4` the variance is
/// infinite, so the reported standard error is only indicative.
pub fn f_alpha_monte_carlo(alpha: f64, samples: u64, seed: u64) -> Result<MeanEstimate> {
    if !(alpha > 2.0) {
        return Err(Error::invalid(format!(
            "Monte Carlo F(alpha) needs alpha > 2, got {alpha}"
        )));
    }
    if samples < 2 {
        return Err(Error::invalid("need at least 2 samples"));
    }
    let parts: Vec<(u64, u64)> = shards(samples).collect();
    let sums: Vec<(f64, f64)> = parts
        .into_par_iter()
        .map(|(idx, len)| {
            let mut rng = substream(seed, idx);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..len {
                let a: f64 = rng.sample(Exp1);
                let b: f64 = rng.sample(Exp1);
                let v = (a / b).powf(2.0 / alpha);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.into_iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let n = samples as f64;
    let mean = s / n;
    let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
    Ok(MeanEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioReport {
    pub samples: u64,
    pub ks_statistic: f64,
    /// Kolmogorov–Smirnov critical value at the 1% level.
    pub ks_critical: f64,
    pub pass: bool,
    pub median: f64,
    pub pr_le_1: f64,
    pub pr_le_3: f64,
}

/// Compare the empirical law of `V = F₁/F₂` with `Pr(V ≤ v) = v/(1+v)`.
pub fn ratio_distribution_check(samples: u64, seed: u64) -> Result<RatioReport> {
    if samples < 100_000 {
        return Err(Error::invalid(format!(
            "ratio check needs at least 1e5 samples, got {samples}"
        )));
    }
    let mut v = exponential_ratios(samples, seed);
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len() as f64;
    let ks = v.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = x / (1.0 + x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    });
    let le = |t: f64| v.partition_point(|&x| x <= t) as f64 / n;
    let mid = v.len() / 2;
    let median = if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    };
    let ks_critical = 1.6276 / n.sqrt();
    Ok(RatioReport {
        samples,
        ks_statistic: ks,
        ks_critical,
        pass: ks <= ks_critical,
        median,
        pr_le_1: le(1.0),
        pr_le_3: le(3.0),
    })
}

fn check_throughput_args(n: u64, p_t: f64, r: f64, w_b: f64, c1: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!("n must be >= 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&p_t) {
        return Err(Error::invalid(format!("p_t must lie in [0, 1], got {p_t}")));
    }
    if !(r > 0.0) || !(w_b > 0.0) || !(c1 > 0.0) {
        return Err(Error::invalid("r, W_B and c1 must be positive"));
    }
    let x = c1 * p_t * r * r * w_b;
    if x > 1.0 {
        return Err(Error::invalid(format!(
            "c1 p_t r^2 W_B = {x} exceeds 1; the throughput bracket is undefined"
        )));
    }
    Ok(x)
}

/// `1 − (1 − x)^m` without cancellation.
fn one_minus_pow(x: f64, m: f64) -> f64 {
    if x >= 1.0 {
        1.0
    } else {
        -(m * (-x).ln_1p()).exp_m1()
    }
}

/// `n(1−p_t)[1 − (1 − c₁p_t r²W_B)^{n−1}] / [c₁(n−1)r²W_B]`.
pub fn analytic_total_throughput(n: u64, p_t: f64, r: f64, w_b: f64, c1: f64) -> Result<f64> {
    let x = check_throughput_args(n, p_t, r, w_b, c1)?;
    let nf = n as f64;
    Ok(nf * (1.0 - p_t) * one_minus_pow(x, nf - 1.0) / (c1 * (nf - 1.0) * r * r * w_b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransportBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Lower and upper brackets of the transport throughput.
pub fn transport_bounds(n: u64, p_t: f64, r: f64, w_b: f64, c1: f64) -> Result<TransportBounds> {
    let x = check_throughput_args(n, p_t, r, w_b, c1)?;
    let nf = n as f64;
    let upper = r * analytic_total_throughput(n, p_t, r, w_b, c1)?;
    let lower = 2.0 * nf * p_t * (1.0 - p_t) * r * (1.0 - x).powf(nf - 2.0) / 3.0;
    Ok(TransportBounds { lower, upper })
}

/// `f₂(r, 1/2) = W_B⁻¹ r⁻¹ [1 − (1 − c₁r²W_B/2)^{n−1}]`, or `None` where the
/// base of the power is negative.
pub fn transport_objective(n: u64, r: f64, w_b: f64, c1: f64) -> Option<f64> {
    let x = c1 * r * r * w_b / 2.0;
    if !(r > 0.0) || x > 1.0 {
        return None;
    }
    Some(one_minus_pow(x, n as f64 - 1.0) / (w_b * r))
}

/// Positive root of `2(n−1)w(1−w)^{n−2} = 1 − (1−w)^{n−1}` by bisection.
pub fn transport_root_bisection(n: u64) -> Result<f64> {
    if n < 3 {
        return Err(Error::invalid(format!("n must be >= 3, got {n}")));
    }
    let m = n as f64;
    let g = |w: f64| {
        let l = (-w).ln_1p();
        2.0 * (m - 1.0) * w * ((m - 2.0) * l).exp() + ((m - 1.0) * l).exp_m1()
    };
    // g > 0 just above zero and g(1) = -1.
    let (mut lo, mut hi) = (1e-9 / m, 1.0);
    if !(g(lo) > 0.0) {
        return Err(Error::numerical("transport root is not bracketed"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Root used for parameter selection: the asymptote for large `n`, bisection
/// otherwise.
pub fn transport_root(n: u64) -> Result<f64> {
    if n >= ASYMPTOTIC_ROOT_MIN_N {
        Ok(TRANSPORT_ROOT_CONSTANT / n as f64)
    } else {
        transport_root_bisection(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Total,
    Transport,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "total" => Ok(Objective::Total),
            "transport" => Ok(Objective::Transport),
            _ => Err(Error::invalid(format!(
                "unknown objective '{s}' (expected total or transport)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityRegime {
    pub objective: Objective,
    /// Predicted capacity order.
    pub regime: String,
    pub p_t: f64,
    pub r: f64,
    /// The rule asked for `p_t > 1/2` and it was clamped.
    pub p_t_clamped: bool,
    /// The transport-optimal range was raised to the connectivity floor or
    /// lowered to the torus limit.
    pub r_clamped: bool,
}

/// Connectivity floor `√(ln n / n)`.
pub fn connectivity_range(n: u64) -> f64 {
    let m = n as f64;
    (m.ln() / m).sqrt()
}

/// Recommended `(p_t, r)` and the capacity order for a given `W_B`.
/// Thresholds compare `W_B` with `1/ln n` and `1/n` at the given `n`.
pub fn optimal_params(n: u64, w_b: f64, objective: Objective, c1: f64) -> Result<CapacityRegime> {
    if n < 3 {
        return Err(Error::invalid(format!("n must be >= 3, got {n}")));
    }
    if !(w_b > 0.0 && w_b <= 1.0) {
        return Err(Error::invalid(format!("W_B must lie in (0, 1], got {w_b}")));
    }
    if !(c1 > 0.0) {
        return Err(Error::invalid(format!("c1 must be positive, got {c1}")));
    }
    let m = n as f64;
    let ln_n = m.ln();
    let floor = connectivity_range(n);
    let wide = w_b > 1.0 / ln_n;
    Ok(match objective {
        Objective::Total => CapacityRegime {
            objective,
            regime: if wide { "Θ(n W_B^{-1} log^{-1} n)" } else { "Θ(n)" }.to_string(),
            p_t: 0.5,
            r: floor,
            p_t_clamped: false,
            r_clamped: false,
        },
        Objective::Transport if wide => {
            let p = 1.0 / (w_b * ln_n);
            CapacityRegime {
                objective,
                regime: "Θ(W_B^{-1} n^{1/2} log^{-1/2} n)".to_string(),
                p_t: p.min(0.5),
                r: floor,
                p_t_clamped: p > 0.5,
                r_clamped: false,
            }
        }
        Objective::Transport => {
            let w = transport_root(n)?;
            let r0 = (2.0 * w / (c1 * w_b)).sqrt();
            let r = r0.clamp(floor, std::f64::consts::FRAC_1_SQRT_2);
            CapacityRegime {
                objective,
                regime: if w_b > 1.0 / m {
                    "Θ(W_B^{-1/2} n^{1/2})"
                } else {
                    "Θ(n)"
                }
                .to_string(),
                p_t: 0.5,
                r,
                p_t_clamped: false,
                r_clamped: r != r0,
            }
        }
    })
}

/// `p_t (1−p_t) (1 − p_t c₁ d² W_B)^{n−2}`.
pub fn link_objective(n: u64, p_t: f64, d: f64, w_b: f64, c1: f64) -> f64 {
    let base = 1.0 - p_t * c1 * d * d * w_b;
    p_t * (1.0 - p_t) * base.max(0.0).powf(n as f64 - 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityRegionReport {
    /// `(p₀, η₁(p₀), η₁(1−p₀))` for `p₀ ∈ (1/2, 1)`.
    pub pairs: Vec<(f64, f64, f64)>,
    /// Every pair satisfies `η₁(p₀) < η₁(1−p₀)`.
    pub all_strict: bool,
    /// Maximiser of `η₁` on a fine grid over `(0, 1)`.
    pub grid_argmax: f64,
}

/// Check that the link objective always prefers `p_t ≤ 1/2`.
pub fn optimality_region_check(n: u64, w_b: f64, c1: f64, d: f64) -> Result<OptimalityRegionReport> {
    if n < 3 || !(w_b > 0.0 && w_b <= 1.0) || !(c1 > 0.0) || !(d > 0.0) {
        return Err(Error::invalid("need n >= 3, W_B in (0, 1], c1 > 0 and d > 0"));
    }
    let pairs: Vec<(f64, f64, f64)> = (1..50)
        .map(|k| 0.5 + k as f64 / 100.0)
        .map(|p| {
            (
                p,
                link_objective(n, p, d, w_b, c1),
                link_objective(n, 1.0 - p, d, w_b, c1),
            )
        })
        .collect();
    let grid = 10_000;
    let grid_argmax = (1..grid)
        .map(|k| k as f64 / grid as f64)
        .map(|p| (p, link_objective(n, p, d, w_b, c1)))
        .fold(
            (0.0, f64::NEG_INFINITY),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        )
        .0;
    Ok(OptimalityRegionReport {
        all_strict: pairs.iter().all(|&(_, a, b)| a < b),
        pairs,
        grid_argmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn guard_zone_values() {
        let g = guard_zone(10.0, 4.0).unwrap();
        assert!((g.delta - 0.778).abs() < 5e-4 && (g.c1 - 9.935).abs() < 5e-4);
        let g = guard_zone(16.0, 4.0).unwrap();
        assert!((g.delta - 1.0).abs() < 1e-12 && (g.c1 - 4.0 * PI).abs() < 1e-12);
        let g = guard_zone(10.0, 2.0).unwrap();
        assert!((g.delta - (10f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((g.c1 - 10.0 * PI).abs() < 1e-9);
        assert!(guard_zone(1.0, 4.0).is_err());
        assert!(guard_zone(0.5, 4.0).is_err());
        assert!(guard_zone(10.0, 0.5).is_err());
    }

    #[test]
    fn fading_factor_values() {
        assert_eq!(f_alpha(4.0).unwrap(), FadingFactor::Finite(PI / 2.0));
        assert_eq!(f_alpha(2.0).unwrap(), FadingFactor::Divergent);
        let v = f_alpha(8.0).unwrap().value().unwrap();
        assert!((v - 1.1107).abs() < 1e-4);
        let mc = f_alpha_monte_carlo(8.0, 1_000_000, 4).unwrap();
        assert!((mc.mean - v).abs() < 4.0 * mc.std_error);
        assert!(f_alpha(0.5).is_err());
    }

    proptest! {
        #[test]
        fn fading_factor_decreases_toward_one(a in 2.01f64..100.0, da in 0.01f64..10.0) {
            let f1 = f_alpha(a).unwrap().value().unwrap();
            let f2 = f_alpha(a + da).unwrap().value().unwrap();
            prop_assert!(f1 > 1.0 && f2 > 1.0 && f2 < f1);
        }

        #[test]
        fn total_throughput_decreases_in_ebw(w in 1e-4f64..0.5, k in 1.01f64..2.0) {
            let a = analytic_total_throughput(1000, 0.05, 0.06, w, 9.935).unwrap();
            let b = analytic_total_throughput(1000, 0.05, 0.06, (w * k).min(1.0), 9.935).unwrap();
            prop_assert!(b < a);
        }
    }

    #[test]
    fn ratio_distribution() {
        let r = ratio_distribution_check(200_000, 11).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.median - 1.0).abs() < 0.02);
        assert!((r.pr_le_1 - 0.5).abs() < 0.005);
        assert!((r.pr_le_3 - 0.75).abs() < 0.005);
        assert!(ratio_distribution_check(1000, 1).is_err());
    }

    #[test]
    fn total_throughput_limits() {
        assert_eq!(analytic_total_throughput(1000, 0.0, 0.06, 0.5, 9.935).unwrap(), 0.0);
        let (n, p) = (1000u64, 0.05);
        let v = analytic_total_throughput(n, p, 0.06, 1e-12, 9.935).unwrap();
        let lim = n as f64 * p * (1.0 - p);
        assert!(((v - lim) / lim).abs() < 1e-6);
        assert!(analytic_total_throughput(1000, 0.5, 0.7, 1.0, 9.935).is_err());
    }

    #[test]
    fn transport_bracket() {
        let b = transport_bounds(1000, 0.0, 0.06, 0.3, 9.935).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
        let tt = analytic_total_throughput(1000, 0.05, 0.06, 0.3, 9.935).unwrap();
        let b = transport_bounds(1000, 0.05, 0.06, 0.3, 9.935).unwrap();
        assert!((b.upper / tt - 0.06).abs() < 1e-12);
        assert!(b.lower <= b.upper);
    }

    #[test]
    fn transport_root_matches_asymptote() {
        for n in [1_000u64, 10_000, 100_000] {
            let w = transport_root_bisection(n).unwrap();
            let a = TRANSPORT_ROOT_CONSTANT / n as f64;
            assert!(((w - a) / a).abs() < 0.02, "n={n} w={w}");
        }
        assert!(transport_root_bisection(2).is_err());
        assert!(transport_root(10).unwrap() > 0.0);
    }

    #[test]
    fn regimes() {
        let omni = optimal_params(10_000, 1.0, Objective::Total, 9.935).unwrap();
        assert_eq!(omni.regime, "Θ(n W_B^{-1} log^{-1} n)");
        assert_eq!(omni.p_t, 0.5);
        assert!((omni.r - (10_000f64.ln() / 1e4).sqrt()).abs() < 1e-15);

        let narrow = optimal_params(10_000, 1e-5, Objective::Transport, 9.935).unwrap();
        assert_eq!(narrow.regime, "Θ(n)");

        let mid = optimal_params(10_000, 0.01, Objective::Transport, 9.935).unwrap();
        assert_eq!(mid.regime, "Θ(W_B^{-1/2} n^{1/2})");
        assert!((mid.r - (2.512f64 / 993.5).sqrt()).abs() < 1e-12);
        assert!((mid.r - 0.05028).abs() < 1e-4);

        let wide = optimal_params(10_000, 0.15, Objective::Transport, 9.935).unwrap();
        assert!(wide.p_t_clamped && wide.p_t == 0.5);
        assert_eq!(wide.regime, "Θ(W_B^{-1} n^{1/2} log^{-1/2} n)");
        let wide = optimal_params(10_000, 1.0, Objective::Transport, 9.935).unwrap();
        assert!(!wide.p_t_clamped && (wide.p_t - 1.0 / 10_000f64.ln()).abs() < 1e-15);

        assert!(optimal_params(10_000, 0.0, Objective::Total, 9.935).is_err());
        assert!(optimal_params(10_000, 1.5, Objective::Total, 9.935).is_err());
    }

    #[test]
    fn total_label_threshold() {
        let n = 5000u64;
        let t = 1.0 / (n as f64).ln();
        for w in [t * 0.5, t, t * 1.0001, 0.9] {
            let r = optimal_params(n, w, Objective::Total, 9.935).unwrap();
            assert_eq!(r.regime == "Θ(n)", w <= t);
        }
    }

    #[test]
    fn transport_range_maximises_objective() {
        let (n, c1) = (10_000u64, 9.935);
        let floored = optimal_params(n, 0.03, Objective::Transport, c1).unwrap();
        assert!(floored.r_clamped && floored.r == connectivity_range(n));
        for w_b in [0.001, 0.005, 0.01] {
            let reg = optimal_params(n, w_b, Objective::Transport, c1).unwrap();
            assert!(!reg.r_clamped);
            let r = reg.r;
            let hi = std::f64::consts::FRAC_1_SQRT_2;
            let step = hi / 10_000.0;
            let best = (1..=10_000)
                .map(|k| k as f64 * step)
                .filter_map(|x| transport_objective(n, x, w_b, c1).map(|v| (x, v)))
                .fold((0.0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
            assert!(
                (best.0 - r).abs() <= step * 1.0001 + 0.01 * r,
                "w_b={w_b} r={r} grid={}",
                best.0
            );
        }
    }

    #[test]
    fn optimality_region() {
        let rep = optimality_region_check(1000, 0.2, 9.935, 0.03).unwrap();
        assert!(rep.all_strict);
        assert!(rep.grid_argmax <= 0.5);
        let near =
            link_objective(1000, 0.5 + 1e-9, 0.03, 0.2, 9.935) - link_objective(1000, 0.5 - 1e-9, 0.03, 0.2, 9.935);
        assert!(near.abs() < 1e-9);
        let p9 = link_objective(1000, 0.9, 0.03, 0.2, 9.935);
        let p1 = link_objective(1000, 0.1, 0.03, 0.2, 9.935);
        assert!(p9 < p1);
    }
}
