//! Normalized azimuthal antenna power patterns.
//!
//! A pattern is a function `G(θ)` with `0 ≤ G ≤ 1` and `G(0) = 1`, where `θ` is
//! measured from the boresight. Linear phased arrays are described by their
//! complex element coefficients `a_k`; the array factor is
//! `AF(θ) = |Σ a_k e^{-2πik (D/λ) sin θ}|` and the power pattern is the squared
//! array factor recentred on its maximum and normalized to one there.

use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid size for the boresight scan and for threshold-width measures.
pub const DEFAULT_GRID: usize = 1 << 20;

/// Gains below this are treated as exact nulls.
pub const ZERO_CLAMP: f64 = 1e-300;

/// Relative tolerance under which two grid maxima are considered tied.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayFamily {
    /// Equally-spaced-null linear array.
    Esnla,
    Binomial,
    /// Dolph-Chebyshev equal-sidelobe array.
    Chebyshev,
}

impl ArrayFamily {
    pub fn name(self) -> &'static str {
        match self {
            ArrayFamily::Esnla => "esnla",
            ArrayFamily::Binomial => "binomial",
            ArrayFamily::Chebyshev => "chebyshev",
        }
    }
}

impl fmt::Display for ArrayFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ArrayFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "esnla" => Ok(ArrayFamily::Esnla),
            "binomial" => Ok(ArrayFamily::Binomial),
            "chebyshev" | "cheb" => Ok(ArrayFamily::Chebyshev),
            other => Err(Error::invalid(format!("unknown array family `{other}`"))),
        }
    }
}

/// How the raw array factor is evaluated.
#[derive(Debug, Clone, PartialEq)]
enum AfForm {
    /// Horner evaluation of `Σ a_k u^k` with `u = e^{-iψ}`.
    Polynomial,
    /// `|T_N(x0 cos(ψ/2))|`, the same magnitude as the polynomial form but
    /// better conditioned for large sidelobe ratios.
    Chebyshev { order: usize, x0: f64 },
}

/// A linear phased array pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayPattern {
    family: ArrayFamily,
    coefficients: Vec<Complex64>,
    d_ratio: f64,
    sidelobe_ratio: Option<f64>,
    boresight: f64,
    peak_power: f64,
    form: AfForm,
}

impl ArrayPattern {
    fn new(
        family: ArrayFamily,
        coefficients: Vec<Complex64>,
        d_ratio: f64,
        sidelobe_ratio: Option<f64>,
        form: AfForm,
        grid: usize,
    ) -> Self {
        let mut p = ArrayPattern {
            family,
            coefficients,
            d_ratio,
            sidelobe_ratio,
            boresight: 0.0,
            peak_power: 1.0,
            form,
        };
        let (theta_m, af_max) = p.find_boresight(grid);
        p.boresight = theta_m;
        p.peak_power = af_max * af_max;
        p
    }

    pub fn family(&self) -> ArrayFamily {
        self.family
    }

    /// Degree `N` of the array factor (`N + 1` elements).
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn d_ratio(&self) -> f64 {
        self.d_ratio
    }

    pub fn sidelobe_ratio(&self) -> Option<f64> {
        self.sidelobe_ratio
    }

    /// Boresight offset `θ_m = argmax AF`.
    pub fn boresight(&self) -> f64 {
        self.boresight
    }

    /// Normalization constant `AF(θ_m)²`.
    pub fn peak_power(&self) -> f64 {
        self.peak_power
    }

    /// Array factor before recentring and normalization.
    pub fn raw_array_factor(&self, theta: f64) -> f64 {
        let psi = TAU * self.d_ratio * theta.sin();
        match self.form {
            AfForm::Polynomial => {
                let u = Complex64::from_polar(1.0, -psi);
                self.coefficients
                    .iter()
                    .rev()
                    .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * u + a)
                    .norm()
            }
            AfForm::Chebyshev { order, x0 } => chebyshev_t(order, x0 * (0.5 * psi).cos()).abs(),
        }
    }

    fn gain(&self, theta: f64) -> f64 {
        let af = self.raw_array_factor(theta + self.boresight);
        clamp_gain(af * af / self.peak_power)
    }

    /// Grid scan plus golden-section refinement of the array factor maximum.
    /// Among tied grid maxima the smallest angle in `[0, 2π)` wins.
    fn find_boresight(&self, grid: usize) -> (f64, f64) {
        let grid = grid.max(16);
        let step = TAU / grid as f64;
        const CHUNK: usize = 1 << 14;
        let chunk_best: Vec<(usize, f64)> = (0..grid.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(grid);
                let mut best = (lo, f64::NEG_INFINITY);
                for i in lo..hi {
                    let v = self.raw_array_factor(i as f64 * step);
                    if v > best.1 {
                        best = (i, v);
                    }
                }
                best
            })
            .collect();
        let max = chunk_best.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
        let (first, _) = chunk_best
            .into_iter()
            .find(|&(_, v)| v >= max * (1.0 - TIE_TOLERANCE))
            .expect("non-empty grid");
        // Earliest grid point within tolerance of the global maximum.
        let chunk_start = first - first % CHUNK;
        let (idx, grid_val) = (chunk_start..=first)
            .map(|i| (i, self.raw_array_factor(i as f64 * step)))
            .find(|&(_, v)| v >= max * (1.0 - TIE_TOLERANCE))
            .expect("chunk maximum is within tolerance");
        let centre = idx as f64 * step;
        let (t, v) = golden_max(|t| self.raw_array_factor(t), centre - step, centre + step, 1e-13);
        if v > grid_val {
            (t, v)
        } else {
            (centre, grid_val)
        }
    }
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Chebyshev polynomial of the first kind, evaluated in the cos/cosh domain.
pub fn chebyshev_t(order: usize, x: f64) -> f64 {
    let n = order as f64;
    if x.abs() <= 1.0 {
        (n * x.acos()).cos()
    } else if x > 1.0 {
        (n * x.acosh()).cosh()
    } else {
        let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * (n * (-x).acosh()).cosh()
    }
}

fn clamp_gain(g: f64) -> f64 {
    if g < ZERO_CLAMP || g.is_nan() {
        0.0
    } else {
        g.min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PatternKind {
    Omni,
    /// Unit gain on an angular fraction of the circle centred on boresight.
    Sector {
        fraction: f64,
    },
    Array(ArrayPattern),
}

/// A normalized azimuthal power pattern. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaPattern {
    kind: PatternKind,
}

/// Normalized null and beam widths of `G*` at a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdWidth {
    pub threshold: f64,
    pub null_width: f64,
    pub beam_width: f64,
}

impl AntennaPattern {
    pub fn omni() -> Self {
        AntennaPattern {
            kind: PatternKind::Omni,
        }
    }

    /// Indicator pattern: `G(θ) = 1` iff `|θ| ≤ π f` after wrapping to `(-π, π]`.
    pub fn sector(fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "sector beam fraction must lie in (0, 1], got {fraction}"
            )));
        }
        Ok(AntennaPattern {
            kind: PatternKind::Sector { fraction },
        })
    }

    /// Equally-spaced-null linear array with nulls of the array factor at
    /// `θ_s = 2πs/(N+1)`, `s = 1..N`.
    pub fn esnla(n: usize, d_ratio: f64) -> Result<Self> {
        Self::esnla_with_grid(n, d_ratio, DEFAULT_GRID)
    }

    pub fn esnla_with_grid(n: usize, d_ratio: f64, grid: usize) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "ESNLA degree N must be an even integer >= 2, got {n}"
            )));
        }
        check_d_ratio(d_ratio)?;
        let roots: Vec<Complex64> = esnla_nulls(n)
            .into_iter()
            .map(|t| Complex64::from_polar(1.0, -TAU * d_ratio * t.sin()))
            .collect();
        let coefficients = poly_from_roots(&roots);
        Ok(Self::array(ArrayPattern::new(
            ArrayFamily::Esnla,
            coefficients,
            d_ratio,
            None,
            AfForm::Polynomial,
            grid,
        )))
    }

    /// Binomial taper `a_k = C(N, k)`.
    pub fn binomial(n: usize, d_ratio: f64) -> Result<Self> {
        Self::binomial_with_grid(n, d_ratio, DEFAULT_GRID)
    }

    pub fn binomial_with_grid(n: usize, d_ratio: f64, grid: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("binomial array degree N must be >= 1"));
        }
        check_d_ratio(d_ratio)?;
        let coefficients = binomial_row(n).into_iter().map(|c| Complex64::new(c, 0.0)).collect();
        Ok(Self::array(ArrayPattern::new(
            ArrayFamily::Binomial,
            coefficients,
            d_ratio,
            None,
            AfForm::Polynomial,
            grid,
        )))
    }

    /// Dolph-Chebyshev array of degree `N` whose sidelobes all sit at
    /// amplitude `1/R_MS` relative to the main lobe.
    pub fn chebyshev(n: usize, d_ratio: f64, r_ms: f64) -> Result<Self> {
        Self::chebyshev_with_grid(n, d_ratio, r_ms, DEFAULT_GRID)
    }

    pub fn chebyshev_with_grid(n: usize, d_ratio: f64, r_ms: f64, grid: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("Chebyshev array degree N must be >= 1"));
        }
        if !(r_ms > 1.0) || !r_ms.is_finite() {
            return Err(Error::invalid(format!(
                "main-lobe-to-side-lobe ratio R_MS must be finite and > 1, got {r_ms}"
            )));
        }
        check_d_ratio(d_ratio)?;
        let x0 = (r_ms.acosh() / n as f64).cosh();
        let coefficients = chebyshev_coefficients(n, x0)
            .into_iter()
            .map(|c| Complex64::new(c, 0.0))
            .collect();
        Ok(Self::array(ArrayPattern::new(
            ArrayFamily::Chebyshev,
            coefficients,
            d_ratio,
            Some(r_ms),
            AfForm::Chebyshev { order: n, x0 },
            grid,
        )))
    }

    fn array(p: ArrayPattern) -> Self {
        AntennaPattern {
            kind: PatternKind::Array(p),
        }
    }

    pub fn kind(&self) -> &PatternKind {
        &self.kind
    }

    pub fn as_array(&self) -> Option<&ArrayPattern> {
        match &self.kind {
            PatternKind::Array(a) => Some(a),
            _ => None,
        }
    }

    pub fn is_omni(&self) -> bool {
        matches!(self.kind, PatternKind::Omni)
    }

    /// Short identifier used in CSV output.
    pub fn id(&self) -> String {
        match &self.kind {
            PatternKind::Omni => "omni".to_string(),
            PatternKind::Sector { fraction } => format!("sector(f={fraction})"),
            PatternKind::Array(a) => match a.sidelobe_ratio {
                Some(r) => format!("{}(N={};d={};rms={})", a.family, a.degree(), a.d_ratio, r),
                None => format!("{}(N={};d={})", a.family, a.degree(), a.d_ratio),
            },
        }
    }

    /// Power gain `G(θ)`.
    pub fn gain(&self, theta: f64) -> f64 {
        match &self.kind {
            PatternKind::Omni => 1.0,
            PatternKind::Sector { fraction } => {
                if wrap_angle(theta).abs() <= PI * fraction {
                    1.0
                } else {
                    0.0
                }
            }
            PatternKind::Array(a) => a.gain(theta),
        }
    }

    /// `G*(θ) = G(θ)^{1/α}`.
    pub fn gain_starred(&self, theta: f64, alpha: f64) -> f64 {
        starred(self.gain(theta), alpha)
    }

    pub fn evaluate(&self, theta: f64, alpha: f64, starred_gain: bool) -> f64 {
        if starred_gain {
            self.gain_starred(theta, alpha)
        } else {
            self.gain(theta)
        }
    }

    /// Null and beam widths of `G*` with respect to `threshold`, measured on
    /// the default uniform grid.
    pub fn threshold_widths(&self, threshold: f64, alpha: f64) -> Result<ThresholdWidth> {
        self.threshold_widths_with_grid(threshold, alpha, DEFAULT_GRID)
    }

    pub fn threshold_widths_with_grid(&self, threshold: f64, alpha: f64, grid: usize) -> Result<ThresholdWidth> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::invalid(format!("threshold must lie in [0, 1], got {threshold}")));
        }
        if grid == 0 {
            return Err(Error::invalid("grid size must be positive"));
        }
        let step = TAU / grid as f64;
        let nulls = (0..grid)
            .into_par_iter()
            .filter(|&i| self.gain_starred(i as f64 * step, alpha) <= threshold)
            .count();
        let null_width = nulls as f64 / grid as f64;
        Ok(ThresholdWidth {
            threshold,
            null_width,
            beam_width: 1.0 - null_width,
        })
    }

    /// Sorted `G*` values on a uniform grid over `[0, 2π)`.
    pub fn starred_samples_sorted(&self, alpha: f64, grid: usize) -> Vec<f64> {
        let step = TAU / grid as f64;
        let mut v: Vec<f64> = (0..grid)
            .into_par_iter()
            .map(|i| self.gain_starred(i as f64 * step, alpha))
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `(θ, G, G*)` on `rows` equally spaced angles in `[0, 2π)`.
    pub fn curve(&self, rows: usize, alpha: f64) -> Vec<(f64, f64, f64)> {
        let step = TAU / rows as f64;
        (0..rows)
            .map(|i| {
                let t = i as f64 * step;
                let g = self.gain(t);
                (t, g, starred(g, alpha))
            })
            .collect()
    }
}

/// Parse a pattern id such as `omni`, `sector(0.25)`, `esnla(4)`,
/// `esnla(N=4;d=0.5)` or `chebyshev(N=6;d=0.5;rms=30)`. Array spacing defaults
/// to half a wavelength. Every string produced by [`AntennaPattern::id`] parses
/// back to the same pattern.
impl std::str::FromStr for AntennaPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, args) = match s.find('(') {
            Some(i) if s.ends_with(')') => (&s[..i], &s[i + 1..s.len() - 1]),
            Some(_) => return Err(Error::invalid(format!("malformed pattern id '{s}'"))),
            None => (s, ""),
        };
        let head = head.trim().to_ascii_lowercase();
        let mut positional = Vec::new();
        let mut named = std::collections::BTreeMap::new();
        for part in args.split([';', ',']).map(str::trim).filter(|p| !p.is_empty()) {
            match part.split_once('=') {
                Some((k, v)) => {
                    named.insert(k.trim().to_ascii_lowercase(), v.trim());
                }
                None => positional.push(part),
            }
        }
        let num = |key: &str, pos: usize| -> Result<Option<f64>> {
            let raw = named.get(key).copied().or(positional.get(pos).copied());
            raw.map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad value '{v}' for {key} in pattern id '{s}'")))
            })
            .transpose()
        };
        let degree = |v: Option<f64>| -> Result<usize> {
            match v {
                Some(x) if x >= 0.0 && x.fract() == 0.0 => Ok(x as usize),
                Some(x) => Err(Error::invalid(format!("array degree must be a whole number, got {x}"))),
                None => Err(Error::invalid(format!("pattern id '{s}' needs a degree N"))),
            }
        };
        match head.as_str() {
            "omni" => Ok(AntennaPattern::omni()),
            "sector" => {
                let f = num("f", 0)?.ok_or_else(|| Error::invalid(format!("pattern id '{s}' needs a fraction f")))?;
                AntennaPattern::sector(f)
            }
            _ => {
                let family: ArrayFamily = head.parse()?;
                let n = degree(num("n", 0)?)?;
                let d = num("d", 1)?.unwrap_or(0.5);
                match family {
                    ArrayFamily::Esnla => AntennaPattern::esnla(n, d),
                    ArrayFamily::Binomial => AntennaPattern::binomial(n, d),
                    ArrayFamily::Chebyshev => {
                        let r = num("rms", 2)?
                            .ok_or_else(|| Error::invalid(format!("pattern id '{s}' needs a sidelobe ratio rms")))?;
                        AntennaPattern::chebyshev(n, d, r)
                    }
                }
            }
        }
    }
}

/// `g^{1/α}` with exact nulls preserved.
#[inline]
pub fn starred(g: f64, alpha: f64) -> f64 {
    if g <= 0.0 {
        0.0
    } else if g >= 1.0 {
        1.0
    } else {
        g.powf(1.0 / alpha)
    }
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TAU);
    if t > PI {
        t -= TAU;
    }
    t
}

/// Null placements `θ_s = 2πs/(N+1)` of the ESNLA array factor.
pub fn esnla_nulls(n: usize) -> Vec<f64> {
    (1..=n).map(|s| TAU * s as f64 / (n + 1) as f64).collect()
}

fn check_d_ratio(d: f64) -> Result<()> {
    if d > 0.0 && d <= 0.5 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "element spacing ratio D/lambda must lie in (0, 1/2], got {d}"
        )))
    }
}

/// Monic polynomial coefficients (ascending powers) with the given roots.
fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &z in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= ck * z;
        }
        c = next;
    }
    c
}

fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![1.0; row.len() + 1];
        for k in 1..row.len() {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    row
}

/// Power-basis coefficients of `T_n`.
fn chebyshev_power_basis(n: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for _ in 1..n {
        let mut next = vec![0.0; cur.len() + 1];
        for (j, &c) in cur.iter().enumerate() {
            next[j + 1] += 2.0 * c;
        }
        for (j, &p) in prev.iter().enumerate() {
            next[j] -= p;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Element weights `a_k` with `Σ a_k e^{ikψ} = e^{iNψ/2} T_N(x0 cos(ψ/2))`.
///
/// Expands `T_N(x0 c)` in powers of `c = cos(ψ/2)` and each `c^j` binomially in
/// half-angle exponentials. Only terms with `j ≡ N (mod 2)` are nonzero, so all
/// exponents land on integer element indices for both parities of `N`.
pub fn chebyshev_coefficients(n: usize, x0: f64) -> Vec<f64> {
    let t = chebyshev_power_basis(n);
    let mut a = vec![0.0; n + 1];
    for (j, &tj) in t.iter().enumerate() {
        if tj == 0.0 {
            continue;
        }
        let scale = tj * (x0 / 2.0).powi(j as i32);
        let offset = (n - j) / 2;
        for (m, c) in binomial_row(j).into_iter().enumerate() {
            a[m + offset] += scale * c;
        }
    }
    a
}
