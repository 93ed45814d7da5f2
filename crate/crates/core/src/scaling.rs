//! Scaling of the effective beam width with array degree.
//!
//! Sweeps `N` for one array family at fixed `α*` and `D/λ`, then fits
//! `lg W_B = -γ lg N + b` by ordinary least squares, reporting `b1 = 10^b`.

use serde::Serialize;

use crate::ebw::{effective_beam_width, DistanceLaw, EbwEstimate};
use crate::error::{Error, Result};
use crate::patterns::{golden_max, AntennaPattern, ArrayFamily};
use crate::rng::derive_seed;

/// Default degrees swept: `{2, 4, ..., 20}`.
pub fn default_n_list() -> Vec<usize> {
    (1..=10).map(|k| 2 * k).collect()
}

/// Family swept over `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepFamily {
    Array(ArrayFamily),
    /// Pseudo-family: an omni antenna at every `N`.
    Omni,
}

impl SweepFamily {
    pub fn name(self) -> &'static str {
        match self {
            SweepFamily::Array(f) => f.name(),
            SweepFamily::Omni => "omni",
        }
    }

    fn code(self) -> u64 {
        match self {
            SweepFamily::Array(ArrayFamily::Esnla) => 1,
            SweepFamily::Array(ArrayFamily::Binomial) => 2,
            SweepFamily::Array(ArrayFamily::Chebyshev) => 3,
            SweepFamily::Omni => 4,
        }
    }
}

impl std::str::FromStr for SweepFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("omni") {
            Ok(SweepFamily::Omni)
        } else {
            Ok(SweepFamily::Array(s.parse()?))
        }
    }
}

/// Search range for the Chebyshev sidelobe ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChebyshevSearch {
    pub r_min: f64,
    pub r_max: f64,
    pub grid_points: usize,
    /// Golden-section stopping width in `log10 R_MS`.
    pub log_tolerance: f64,
}

impl Default for ChebyshevSearch {
    fn default() -> Self {
        ChebyshevSearch {
            r_min: 1.5,
            r_max: 1e4,
            grid_points: 64,
            log_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub family: SweepFamily,
    pub n_list: Vec<usize>,
    pub alpha_star: f64,
    pub d_ratio: f64,
    pub samples: u64,
    pub seed: u64,
    pub chebyshev: ChebyshevSearch,
}

impl SweepConfig {
    pub fn new(family: SweepFamily, alpha_star: f64, d_ratio: f64, samples: u64, seed: u64) -> Self {
        SweepConfig {
            family,
            n_list: default_n_list(),
            alpha_star,
            d_ratio,
            samples,
            seed,
            chebyshev: ChebyshevSearch::default(),
        }
    }

    /// Seed of one `(family, N, α*, D/λ)` cell.
    pub fn cell_seed(&self, n: usize) -> u64 {
        derive_seed(
            self.seed,
            &[
                self.family.code(),
                n as u64,
                self.alpha_star.to_bits(),
                self.d_ratio.to_bits(),
            ],
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub w_b: f64,
    pub std_error: f64,
    /// Optimized sidelobe ratio for Chebyshev rows.
    pub r_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub family: SweepFamily,
    pub alpha_star: f64,
    pub d_ratio: f64,
    pub rows: Vec<SweepRow>,
}

/// `h = 2` distance law used for every sweep; `α*` is realised as `α = 2α*`.
fn sweep_law() -> DistanceLaw {
    DistanceLaw::basis(2.0).expect("h = 2 is valid")
}

fn check_sweep(cfg: &SweepConfig) -> Result<()> {
    if cfg.n_list.is_empty() {
        return Err(Error::invalid("N list must not be empty"));
    }
    if cfg.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("N list must be strictly increasing"));
    }
    if !(cfg.alpha_star >= 0.5) {
        // α = 2α* must be a valid path-loss exponent.
        return Err(Error::invalid(format!(
            "alpha* must be >= 0.5 so that alpha = 2 alpha* >= 1, got {}",
            cfg.alpha_star
        )));
    }
    if let SweepFamily::Array(ArrayFamily::Esnla) = cfg.family {
        if let Some(bad) = cfg.n_list.iter().find(|&&n| n < 2 || n % 2 != 0) {
            return Err(Error::invalid(format!("ESNLA sweep needs even N >= 2, got {bad}")));
        }
    }
    if cfg.n_list[0] == 0 {
        return Err(Error::invalid("N must be >= 1"));
    }
    Ok(())
}

/// Effective beam width for every `N` of the sweep.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    check_sweep(cfg)?;
    let alpha = 2.0 * cfg.alpha_star;
    let law = sweep_law();
    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let seed = cfg.cell_seed(n);
        let row = match cfg.family {
            SweepFamily::Omni => SweepRow {
                n,
                w_b: 1.0,
                std_error: 0.0,
                r_ms: None,
            },
            SweepFamily::Array(ArrayFamily::Chebyshev) => {
                let opt =
                    optimize_chebyshev_rms_with(n, cfg.alpha_star, cfg.d_ratio, cfg.samples, seed, &cfg.chebyshev)?;
                SweepRow {
                    n,
                    w_b: opt.estimate.value,
                    std_error: opt.estimate.std_error,
                    r_ms: Some(opt.r_ms),
                }
            }
            SweepFamily::Array(family) => {
                let p = match family {
                    ArrayFamily::Esnla => AntennaPattern::esnla(n, cfg.d_ratio)?,
                    _ => AntennaPattern::binomial(n, cfg.d_ratio)?,
                };
                let e = effective_beam_width(&p, &law, alpha, cfg.samples, seed)?;
                SweepRow {
                    n,
                    w_b: e.value,
                    std_error: e.std_error,
                    r_ms: None,
                }
            }
        };
        rows.push(row);
    }
    Ok(SweepTable {
        family: cfg.family,
        alpha_star: cfg.alpha_star,
        d_ratio: cfg.d_ratio,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub b1: f64,
    pub gamma: f64,
    /// Intercept `b = lg b1`.
    pub intercept: f64,
    pub r2: f64,
    pub max_abs_residual: f64,
    pub points: usize,
}

impl PowerLawFit {
    pub fn predict(&self, n: f64) -> f64 {
        self.b1 / n.powf(self.gamma)
    }
}

/// OLS fit of `lg w = -γ lg n + b` on `(n, w)` points.
pub fn fit_power_law_points(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::invalid(format!(
            "power-law fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(&(n, w)) = points.iter().find(|&&(n, w)| !(n > 0.0) || !(w > 0.0)) {
        return Err(Error::invalid(format!(
            "power-law fit needs positive N and W_B, got ({n}, {w})"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("power-law fit needs at least two distinct N"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(PowerLawFit {
        b1: 10f64.powf(intercept),
        gamma: -slope,
        intercept,
        r2,
        max_abs_residual: residuals.iter().fold(0.0, |a, r| a.max(r.abs())),
        points: points.len(),
    })
}

pub fn fit_power_law(table: &SweepTable) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.n as f64, r.w_b)).collect();
    fit_power_law_points(&pts)
}

/// Result of the sidelobe-ratio search for one Chebyshev degree.
#[derive(Debug, Clone, Serialize)]
pub struct ChebyshevOptimum {
    pub n: usize,
    pub r_ms: f64,
    pub estimate: EbwEstimate,
    /// `(R_MS, W_B)` on the log-spaced search grid.
    pub grid: Vec<(f64, f64)>,
    /// Index of the best grid point.
    pub grid_best: usize,
}

pub fn optimize_chebyshev_rms(
    n: usize,
    alpha_star: f64,
    d_ratio: f64,
    samples: u64,
    seed: u64,
) -> Result<ChebyshevOptimum> {
    optimize_chebyshev_rms_with(n, alpha_star, d_ratio, samples, seed, &ChebyshevSearch::default())
}

/// Minimize `W_B` over `R_MS`: log-spaced grid, then golden-section between
/// the neighbours of the best grid point. Every candidate is estimated with the
/// same seed so the objective is compared on common random numbers.
pub fn optimize_chebyshev_rms_with(
    n: usize,
    alpha_star: f64,
    d_ratio: f64,
    samples: u64,
    seed: u64,
    search: &ChebyshevSearch,
) -> Result<ChebyshevOptimum> {
    if !(search.r_min > 1.0) || !(search.r_max > search.r_min) || search.grid_points < 2 {
        return Err(Error::invalid("invalid Chebyshev R_MS search range"));
    }
    let alpha = 2.0 * alpha_star;
    let law = sweep_law();
    let eval = |r: f64| -> Result<EbwEstimate> {
        let p = AntennaPattern::chebyshev(n, d_ratio, r)?;
        effective_beam_width(&p, &law, alpha, samples, seed)
    };
    let (lo, hi) = (search.r_min.log10(), search.r_max.log10());
    let step = (hi - lo) / (search.grid_points - 1) as f64;
    let mut grid = Vec::with_capacity(search.grid_points);
    let mut best: Option<(usize, EbwEstimate)> = None;
    for i in 0..search.grid_points {
        let r = 10f64.powf(lo + step * i as f64);
        let e = eval(r)?;
        grid.push((r, e.value));
        if best.is_none_or(|(_, b)| e.value < b.value) {
            best = Some((i, e));
        }
    }
    let (grid_best, grid_est) = best.expect("grid is non-empty");
    let a = lo + step * grid_best.saturating_sub(1) as f64;
    let b = lo + step * (grid_best + 1).min(search.grid_points - 1) as f64;
    let failure = std::cell::RefCell::new(None);
    let (log_r, neg_w) = golden_max(
        |lr| match eval(10f64.powf(lr)) {
            Ok(e) => -e.value,
            Err(err) => {
                failure.borrow_mut().get_or_insert(err);
                f64::NEG_INFINITY
            }
        },
        a,
        b,
        search.log_tolerance,
    );
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    let (r_ms, estimate) = if -neg_w < grid_est.value {
        let r = 10f64.powf(log_r);
        (r, eval(r)?)
    } else {
        (grid[grid_best].0, grid_est)
    };
    Ok(ChebyshevOptimum {
        n,
        r_ms,
        estimate,
        grid,
        grid_best,
    })
}

/// Fits of several sweeps that differ in one parameter.
#[derive(Debug, Clone, Serialize)]
pub struct BundleReport {
    /// `(parameter, fit)` sorted by parameter ascending.
    pub fits: Vec<(f64, PowerLawFit)>,
    /// Largest pairwise difference of the fitted `γ`.
    pub gamma_spread: f64,
    pub intercepts_increasing: bool,
    pub intercepts_decreasing: bool,
}

fn bundle(mut keyed: Vec<(f64, &SweepTable)>) -> Result<BundleReport> {
    if keyed.is_empty() {
        return Err(Error::invalid("bundle check needs at least one table"));
    }
    let first = keyed[0].1;
    let ns: Vec<usize> = first.rows.iter().map(|r| r.n).collect();
    for (_, t) in &keyed {
        if t.family != first.family || t.rows.iter().map(|r| r.n).collect::<Vec<_>>() != ns {
            return Err(Error::invalid("bundle tables must share family and N list"));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let fits = keyed
        .iter()
        .map(|(k, t)| Ok((*k, fit_power_law(t)?)))
        .collect::<Result<Vec<_>>>()?;
    let gammas = fits.iter().map(|f| f.1.gamma);
    let gamma_spread = gammas.clone().fold(f64::NEG_INFINITY, f64::max) - gammas.fold(f64::INFINITY, f64::min);
    let b: Vec<f64> = fits.iter().map(|f| f.1.intercept).collect();
    Ok(BundleReport {
        gamma_spread,
        intercepts_increasing: b.windows(2).all(|w| w[1] > w[0]),
        intercepts_decreasing: b.windows(2).all(|w| w[1] < w[0]),
        fits,
    })
}

/// Fits across `α*` values: slopes should be nearly equal and intercepts should
/// grow with `α*`.
pub fn parallel_lines_check(tables: &[SweepTable]) -> Result<BundleReport> {
    bundle(tables.iter().map(|t| (t.alpha_star, t)).collect())
}

/// Fits across element spacings at fixed `α*`.
#[derive(Debug, Clone, Serialize)]
pub struct SpacingReport {
    pub bundle: BundleReport,
    /// Whether the half-wavelength spacing has the largest intercept. The
    /// expected direction is reported, not enforced.
    pub half_wave_intercept_largest: bool,
}

pub fn spacing_check(tables: &[SweepTable]) -> Result<SpacingReport> {
    let bundle = bundle(tables.iter().map(|t| (t.d_ratio, t)).collect())?;
    let (_, top) = bundle.fits.last().expect("non-empty");
    let half_wave_intercept_largest = bundle.fits.iter().all(|(_, f)| f.intercept <= top.intercept);
    Ok(SpacingReport {
        bundle,
        half_wave_intercept_largest,
    })
}

/// Per-`N` ordering of the three families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingRow {
    pub n: usize,
    pub binomial: f64,
    pub esnla: f64,
    pub chebyshev: f64,
    /// `W_B(Binomial) > W_B(ESNLA)`.
    pub binomial_above_esnla: bool,
    /// `W_B(ESNLA) ≥ W_B(Chebyshev) − 3·SE`, SE combining both estimates.
    pub esnla_not_below_chebyshev: bool,
}

pub fn family_ordering(binomial: &SweepTable, esnla: &SweepTable, chebyshev: &SweepTable) -> Result<Vec<OrderingRow>> {
    let ns = |t: &SweepTable| t.rows.iter().map(|r| r.n).collect::<Vec<_>>();
    if ns(binomial) != ns(esnla) || ns(esnla) != ns(chebyshev) {
        return Err(Error::invalid("family tables must share the N list"));
    }
    Ok(binomial
        .rows
        .iter()
        .zip(&esnla.rows)
        .zip(&chebyshev.rows)
        .map(|((b, e), c)| {
            let se = (e.std_error.powi(2) + c.std_error.powi(2)).sqrt();
            OrderingRow {
                n: b.n,
                binomial: b.w_b,
                esnla: e.w_b,
                chebyshev: c.w_b,
                binomial_above_esnla: b.w_b > e.w_b,
                esnla_not_below_chebyshev: e.w_b >= c.w_b - 3.0 * se,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(family: SweepFamily, alpha_star: f64, d: f64, pts: &[(usize, f64)]) -> SweepTable {
        SweepTable {
            family,
            alpha_star,
            d_ratio: d,
            rows: pts
                .iter()
                .map(|&(n, w)| SweepRow {
                    n,
                    w_b: w,
                    std_error: 0.0,
                    r_ms: None,
                })
                .collect(),
        }
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let pts: Vec<(f64, f64)> = default_n_list()
            .into_iter()
            .map(|n| (n as f64, 0.659 * (n as f64).powf(-0.810)))
            .collect();
        let f = fit_power_law_points(&pts).unwrap();
        assert!((f.b1 - 0.659).abs() < 1e-12);
        assert!((f.gamma - 0.810).abs() < 1e-12);
        assert!(f.max_abs_residual < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!((f.predict(4.0) - 0.659 * 4f64.powf(-0.81)).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_tables() {
        assert!(fit_power_law_points(&[(2.0, 0.5), (4.0, 0.3)]).is_err());
        assert!(fit_power_law_points(&[(2.0, 0.5), (4.0, 0.0), (6.0, 0.1)]).is_err());
        assert!(fit_power_law_points(&[(2.0, 0.5), (2.0, 0.4), (2.0, 0.1)]).is_err());
    }

    #[test]
    fn omni_sweep_is_constant() {
        let cfg = SweepConfig::new(SweepFamily::Omni, 2.0, 0.5, 1000, 1);
        let t = sweep(&cfg).unwrap();
        assert!(t.rows.iter().all(|r| r.w_b == 1.0));
    }

    #[test]
    fn esnla_sweep_decreases() {
        let mut cfg = SweepConfig::new(SweepFamily::Array(ArrayFamily::Esnla), 2.0, 0.5, 200_000, 5);
        cfg.n_list = vec![2, 4, 8, 16];
        let t = sweep(&cfg).unwrap();
        assert!(t.rows.windows(2).all(|w| w[1].w_b < w[0].w_b));
        cfg.n_list = vec![2, 3];
        assert!(sweep(&cfg).is_err());
        cfg.n_list = vec![4, 2];
        assert!(sweep(&cfg).is_err());
    }

    #[test]
    fn sweep_is_deterministic() {
        let mut cfg = SweepConfig::new(SweepFamily::Array(ArrayFamily::Binomial), 1.0, 0.5, 50_000, 8);
        cfg.n_list = vec![1, 3, 5];
        assert_eq!(sweep(&cfg).unwrap(), sweep(&cfg).unwrap());
    }

    #[test]
    fn chebyshev_optimum_certificate() {
        let search = ChebyshevSearch {
            grid_points: 16,
            ..ChebyshevSearch::default()
        };
        let opt = optimize_chebyshev_rms_with(6, 2.0, 0.5, 100_000, 3, &search).unwrap();
        let i = opt.grid_best;
        if i > 0 {
            assert!(opt.estimate.value <= opt.grid[i - 1].1);
        }
        if i + 1 < opt.grid.len() {
            assert!(opt.estimate.value <= opt.grid[i + 1].1);
        }
        let law = DistanceLaw::basis(2.0).unwrap();
        let limit = AntennaPattern::chebyshev(6, 0.5, 1e6).unwrap();
        let w_limit = effective_beam_width(&limit, &law, 4.0, 100_000, 3).unwrap();
        assert!(w_limit.value >= opt.estimate.value);
    }

    #[test]
    fn bundle_spread_and_intercepts() {
        let ns = [2usize, 4, 8];
        let mk = |a: f64, b1: f64, g: f64| {
            let pts: Vec<(usize, f64)> = ns.iter().map(|&n| (n, b1 * (n as f64).powf(-g))).collect();
            table(SweepFamily::Array(ArrayFamily::Esnla), a, 0.5, &pts)
        };
        let r = parallel_lines_check(&[mk(2.0, 0.6, 0.8), mk(0.5, 0.3, 0.75), mk(1.0, 0.4, 0.78)]).unwrap();
        assert!((r.gamma_spread - 0.05).abs() < 1e-9);
        assert!(r.intercepts_increasing);
        assert_eq!(r.fits[0].0, 0.5);

        let single = parallel_lines_check(&[mk(2.0, 0.6, 0.8)]).unwrap();
        assert_eq!(single.gamma_spread, 0.0);

        let same = spacing_check(&[mk(2.0, 0.6, 0.8), mk(2.0, 0.6, 0.8)]).unwrap();
        assert!(same.bundle.gamma_spread.abs() < 1e-12);

        let other = table(
            SweepFamily::Array(ArrayFamily::Binomial),
            1.0,
            0.5,
            &[(2, 0.5), (4, 0.4), (8, 0.3)],
        );
        assert!(parallel_lines_check(&[mk(2.0, 0.6, 0.8), other]).is_err());
    }

    #[test]
    fn ordering_rows() {
        let f = |fam, w: [f64; 2]| table(SweepFamily::Array(fam), 2.0, 0.5, &[(2, w[0]), (4, w[1])]);
        let rows = family_ordering(
            &f(ArrayFamily::Binomial, [0.35, 0.25]),
            &f(ArrayFamily::Esnla, [0.34, 0.21]),
            &f(ArrayFamily::Chebyshev, [0.34, 0.22]),
        )
        .unwrap();
        assert!(rows[0].binomial_above_esnla && rows[0].esnla_not_below_chebyshev);
        assert!(!rows[1].esnla_not_below_chebyshev);
    }
}
