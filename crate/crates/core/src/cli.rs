//! Command line front end.
//!
//! Every CSV starts with a comment line holding the tool version, the
//! subcommand, the seed and the resolved configuration. Output paths, the
//! config file path and the thread count are left out of that record since
//! they do not affect the numbers.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytic::{self, Objective};
use crate::ebw::{self, DistanceLaw, EbwEstimate};
use crate::error::{Error, Result};
use crate::netsim::{self, Fading, Model, NetworkConfig};
use crate::output::{self, comment_line, num, opt, PlotKind, Table};
use crate::patterns::{AntennaPattern, ArrayFamily, DEFAULT_GRID};
use crate::scaling::{self, SweepConfig, SweepFamily, SweepTable};

/// Tolerance on fitted `(b1, γ)` in the reproduction checks.
const FIT_TOLERANCE: f64 = 0.08;

#[derive(Debug, Parser)]
#[command(
    name = "ebw",
    version,
    about = "Effective beam width of directional antennas and ad hoc network capacity"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Write a matplotlib script next to the output CSV.
    #[arg(long)]
    #[serde(skip)]
    pub emit_plot: bool,
    /// key=value file with default flag values; command line flags win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Omni,
    Sector,
    Esnla,
    Binomial,
    #[value(alias = "cheb")]
    Chebyshev,
}

/// Pattern selection: either a full id or a family with parameters.
#[derive(Debug, Clone, Args, Serialize)]
pub struct PatternSel {
    /// Pattern id, e.g. `esnla(N=4;d=0.5)`.
    #[arg(long, conflicts_with = "family")]
    pub pattern: Option<String>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Array degree.
    #[arg(long)]
    pub n: Option<usize>,
    /// Element spacing in wavelengths.
    #[arg(long, default_value_t = 0.5)]
    pub d: f64,
    /// Chebyshev main-lobe to side-lobe ratio.
    #[arg(long)]
    pub rms: Option<f64>,
    /// Sector beam fraction.
    #[arg(long)]
    pub fraction: Option<f64>,
}

impl PatternSel {
    fn build(&self) -> Result<AntennaPattern> {
        if let Some(id) = &self.pattern {
            return id.parse();
        }
        let need_n = || {
            self.n
                .ok_or_else(|| Error::invalid("--n is required for array families"))
        };
        match self.family {
            None => Err(Error::invalid("give --pattern or --family")),
            Some(FamilyArg::Omni) => Ok(AntennaPattern::omni()),
            Some(FamilyArg::Sector) => AntennaPattern::sector(
                self.fraction
                    .ok_or_else(|| Error::invalid("--fraction is required for sectors"))?,
            ),
            Some(FamilyArg::Esnla) => AntennaPattern::esnla(need_n()?, self.d),
            Some(FamilyArg::Binomial) => AntennaPattern::binomial(need_n()?, self.d),
            Some(FamilyArg::Chebyshev) => AntennaPattern::chebyshev(
                need_n()?,
                self.d,
                self.rms
                    .ok_or_else(|| Error::invalid("--rms is required for Chebyshev arrays"))?,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Mc,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Fig4,
    Fig5,
    Fig6,
    #[value(name = "tableC", alias = "tablec", alias = "table-c")]
    TableC,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct PatternCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub sel: PatternSel,
    #[arg(long, default_value_t = 4.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 4096)]
    pub rows: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct EbwCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub sel: PatternSel,
    /// Receive pattern id; estimates Pr(YZ > X) instead of W_B.
    #[arg(long)]
    pub rx: Option<String>,
    #[arg(long, default_value_t = 4.0)]
    pub alpha: f64,
    /// Basis distribution order.
    #[arg(long, default_value_t = 2.0, conflicts_with = "mixture")]
    pub h: f64,
    /// Mixture of basis laws as `w:h,w:h,...`.
    #[arg(long)]
    pub mixture: Option<String>,
    #[arg(long, default_value_t = ebw::DEFAULT_SAMPLES)]
    pub samples: u64,
    #[arg(long, value_enum, default_value_t = MethodArg::Mc)]
    pub method: MethodArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct ScanCmd {
    /// esnla, binomial, chebyshev or omni.
    #[arg(long, default_value = "esnla")]
    pub family: String,
    /// Comma separated degrees.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[arg(long, default_value_t = 2.0)]
    pub alpha_star: f64,
    #[arg(long, default_value_t = 0.5)]
    pub d: f64,
    #[arg(long, default_value_t = ebw::DEFAULT_SAMPLES)]
    pub samples: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct FitCmd {
    /// CSV with columns `n` and `w_b` (and optionally `curve`).
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct ReproduceCmd {
    #[arg(value_enum)]
    pub target: Target,
    #[arg(long, default_value_t = ebw::DEFAULT_SAMPLES)]
    pub samples: u64,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Pairwise,
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingArg {
    None,
    Rayleigh,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct NetsimCmd {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.06)]
    pub r: f64,
    #[arg(long, default_value_t = 0.05)]
    pub pt: f64,
    #[arg(long, default_value_t = 4.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    pub sir0: f64,
    #[arg(long, value_enum, default_value_t = ModelArg::Pairwise)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value_t = FadingArg::None)]
    pub fading: FadingArg,
    #[arg(long, default_value = "omni")]
    pub tx_pattern: String,
    #[arg(long, default_value = "omni")]
    pub rx_pattern: String,
    #[arg(long, default_value_t = 1000)]
    pub slots: u64,
    /// Permit p_t > 1/2 (diagnostics only).
    #[arg(long)]
    pub allow_large_pt: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct AnalyticCmd {
    #[arg(long, default_value_t = 10_000)]
    pub n: u64,
    #[arg(long = "w-b", default_value_t = 1.0)]
    pub w_b: f64,
    #[arg(long, default_value_t = 10.0)]
    pub sir0: f64,
    #[arg(long, default_value_t = 4.0)]
    pub alpha: f64,
    #[arg(long, default_value = "total")]
    pub objective: String,
    /// Transmit probability for the throughput brackets (default: recommended).
    #[arg(long)]
    pub pt: Option<f64>,
    /// Range for the throughput brackets (default: recommended).
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample G and G* of a pattern.
    Pattern(PatternCmd),
    /// Estimate an effective beam width or a joint interference probability.
    Ebw(EbwCmd),
    /// Sweep the array degree and fit a power law.
    Scan(ScanCmd),
    /// Fit W_B = b1 / N^γ to a CSV.
    Fit(FitCmd),
    /// Re-run a pinned sweep or table recipe.
    Reproduce(ReproduceCmd),
    /// Simulate a slotted-ALOHA network.
    Netsim(NetsimCmd),
    /// Closed-form formulas and parameter rules.
    Analytic(AnalyticCmd),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Pattern(c) => &c.common,
            Command::Ebw(c) => &c.common,
            Command::Scan(c) => &c.common,
            Command::Fit(c) => &c.common,
            Command::Reproduce(c) => &c.common,
            Command::Netsim(c) => &c.common,
            Command::Analytic(c) => &c.common,
        }
    }
}

const SUBCOMMANDS: [&str; 7] = ["pattern", "ebw", "scan", "fit", "reproduce", "netsim", "analytic"];

/// Insert flags from a `--config` file right after the subcommand so that
/// later command line flags override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let text: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let path = text.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            text.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(path) = path else { return Ok(args) };
    let body = std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("cannot read config {path}: {e}")))?;
    let mut injected = Vec::new();
    for (ln, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("{path}:{}: expected key=value", ln + 1)))?;
        let key = format!("--{}", k.trim().replace('_', "-"));
        match v.trim() {
            "true" => injected.push(OsString::from(key)),
            "false" => {}
            v => {
                injected.push(OsString::from(key));
                injected.push(OsString::from(v));
            }
        }
    }
    let at = text
        .iter()
        .skip(1)
        .position(|a| SUBCOMMANDS.contains(&a.as_str()))
        .map(|i| i + 2)
        .unwrap_or(args.len().min(1));
    let mut out = args;
    out.splice(at..at, injected);
    Ok(out)
}

/// Parse and run; returns the process exit code.
pub fn run(args: Vec<OsString>, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let threads = cli.command.common().threads;
    let result = match threads {
        Some(0) => Err(Error::invalid("--threads must be >= 1")),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command, out, err)),
            Err(e) => Err(Error::Io(e.to_string())),
        },
        None => dispatch(&cli.command, out, err),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Entry point of the `ebw` binary.
pub fn main_entry() -> i32 {
    run(
        std::env::args_os().collect(),
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    )
}

fn dispatch(cmd: &Command, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    match cmd {
        Command::Pattern(c) => cmd_pattern(c, out),
        Command::Ebw(c) => cmd_ebw(c, out),
        Command::Scan(c) => cmd_scan(c, out, err),
        Command::Fit(c) => cmd_fit(c, out),
        Command::Reproduce(c) => cmd_reproduce(c, out, err),
        Command::Netsim(c) => cmd_netsim(c, out),
        Command::Analytic(c) => cmd_analytic(c, out),
    }
}

fn finish(common: &Common, table: &Table, comment: &str, plot: PlotKind, out: &mut dyn Write) -> Result<()> {
    output::emit(common.out.as_deref(), &table.render(comment), out)?;
    if common.emit_plot {
        let path = common
            .out
            .as_deref()
            .ok_or_else(|| Error::invalid("--emit-plot needs --out"))?;
        output::write_plot_script(path, plot)?;
    }
    Ok(())
}

fn cmd_pattern(c: &PatternCmd, out: &mut dyn Write) -> Result<()> {
    let p = c.sel.build()?;
    if c.rows == 0 {
        return Err(Error::invalid("--rows must be >= 1"));
    }
    if !(c.alpha >= 1.0) {
        return Err(Error::invalid(format!("alpha must be >= 1, got {}", c.alpha)));
    }
    let mut t = Table::new(&["theta", "gain", "gain_starred"]);
    for (theta, g, gs) in p.curve(c.rows, c.alpha) {
        t.push(vec![num(theta), num(g), num(gs)]);
    }
    let comment = comment_line("pattern", c.common.seed, c)?;
    finish(&c.common, &t, &comment, PlotKind::Pattern, out)
}

fn parse_mixture(s: &str) -> Result<DistanceLaw> {
    let pairs = s
        .split(',')
        .map(|part| {
            let (w, h) = part
                .split_once(':')
                .ok_or_else(|| Error::invalid(format!("mixture component '{part}' is not w:h")))?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad number '{x}' in mixture")))
            };
            Ok((parse(w)?, parse(h)?))
        })
        .collect::<Result<Vec<_>>>()?;
    DistanceLaw::mixture(&pairs)
}

fn cmd_ebw(c: &EbwCmd, out: &mut dyn Write) -> Result<()> {
    let tx = c.sel.build()?;
    let law = match &c.mixture {
        Some(m) => parse_mixture(m)?,
        None => DistanceLaw::basis(c.h)?,
    };
    let rx = c.rx.as_deref().map(str::parse::<AntennaPattern>).transpose()?;
    let est: EbwEstimate = match (&rx, c.method) {
        (None, MethodArg::Mc) => ebw::effective_beam_width(&tx, &law, c.alpha, c.samples, c.common.seed)?,
        (None, MethodArg::Quadrature) => {
            ebw::quadrature_beam_width(&tx, &law, c.alpha, DEFAULT_GRID, ebw::QUADRATURE_POINTS)?
        }
        (Some(rx), MethodArg::Mc) => ebw::interference_probability(rx, &tx, &law, c.alpha, c.samples, c.common.seed)?,
        (Some(_), MethodArg::Quadrature) => {
            return Err(Error::invalid(
                "quadrature supports a single pattern; drop --rx or use --method mc",
            ))
        }
    };
    let mut t = Table::new(&[
        "pattern",
        "rx_pattern",
        "law",
        "alpha",
        "method",
        "samples",
        "value",
        "std_error",
    ]);
    t.push(vec![
        tx.id(),
        rx.map(|p| p.id()).unwrap_or_default(),
        law.to_string(),
        num(c.alpha),
        format!("{:?}", est.method).to_lowercase(),
        est.samples.to_string(),
        num(est.value),
        num(est.std_error),
    ]);
    let comment = comment_line("ebw", c.common.seed, c)?;
    finish(&c.common, &t, &comment, PlotKind::Sweep, out)
}

fn curve_label(t: &SweepTable) -> String {
    format!("{} a*={} d={}", t.family.name(), t.alpha_star, t.d_ratio)
}

fn sweep_table(tables: &[SweepTable]) -> Table {
    let mut t = Table::new(&[
        "curve",
        "family",
        "alpha_star",
        "d_ratio",
        "n",
        "w_b",
        "std_error",
        "r_ms",
    ]);
    for s in tables {
        let label = curve_label(s);
        for r in &s.rows {
            t.push(vec![
                label.clone(),
                s.family.name().to_string(),
                num(s.alpha_star),
                num(s.d_ratio),
                r.n.to_string(),
                num(r.w_b),
                num(r.std_error),
                opt(r.r_ms),
            ]);
        }
    }
    t
}

fn cmd_scan(c: &ScanCmd, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let family: SweepFamily = c.family.parse()?;
    let mut cfg = SweepConfig::new(family, c.alpha_star, c.d, c.samples, c.common.seed);
    if let Some(ns) = &c.n_list {
        cfg.n_list = ns.clone();
    }
    let table = scaling::sweep(&cfg)?;
    if table.rows.len() >= 3 && table.rows.iter().all(|r| r.w_b > 0.0) {
        let f = scaling::fit_power_law(&table)?;
        writeln!(
            err,
            "{}: b1={:.4} gamma={:.4} r2={:.4}",
            curve_label(&table),
            f.b1,
            f.gamma,
            f.r2
        )?;
    }
    let comment = comment_line("scan", c.common.seed, c)?;
    finish(&c.common, &sweep_table(&[table]), &comment, PlotKind::Sweep, out)
}

/// Curve label with its `(n, w)` points.
type NamedPoints = (String, Vec<(f64, f64)>);

fn read_points(path: &Path) -> Result<Vec<NamedPoints>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let head: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::invalid("input CSV is empty"))?
        .split(',')
        .map(str::trim)
        .collect();
    let col = |name: &str| head.iter().position(|h| *h == name);
    let (ni, wi) = match (col("n"), col("w_b")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::invalid("input CSV needs columns n and w_b")),
    };
    let ci = col("curve");
    let mut groups: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |j: usize| -> Result<f64> {
            cells
                .get(j)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::invalid(format!("bad number on data row {}", i + 1)))
        };
        let key = ci.and_then(|j| cells.get(j)).map(|s| s.to_string()).unwrap_or_default();
        let pt = (get(ni)?, get(wi)?);
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(pt),
            None => groups.push((key, vec![pt])),
        }
    }
    Ok(groups)
}

fn cmd_fit(c: &FitCmd, out: &mut dyn Write) -> Result<()> {
    let mut t = Table::new(&["curve", "points", "b1", "gamma", "r2", "max_abs_residual"]);
    for (curve, pts) in read_points(&c.input)? {
        let f = scaling::fit_power_law_points(&pts)?;
        t.push(vec![
            curve,
            f.points.to_string(),
            num(f.b1),
            num(f.gamma),
            num(f.r2),
            num(f.max_abs_residual),
        ]);
    }
    let comment = comment_line("fit", c.common.seed, c)?;
    output::emit(c.common.out.as_deref(), &t.render(&comment), out)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn fit_line(err: &mut dyn Write, label: &str, f: &scaling::PowerLawFit, expect: Option<(f64, f64)>) -> Result<()> {
    match expect {
        Some((b1, g)) => {
            let ok = (f.b1 - b1).abs() <= FIT_TOLERANCE && (f.gamma - g).abs() <= FIT_TOLERANCE;
            writeln!(
                err,
                "[{}] {label}: b1={:.4} gamma={:.4} r2={:.4} (target b1={b1} gamma={g} ±{FIT_TOLERANCE})",
                verdict(ok),
                f.b1,
                f.gamma,
                f.r2
            )?;
        }
        None => writeln!(err, "{label}: b1={:.4} gamma={:.4} r2={:.4}", f.b1, f.gamma, f.r2)?,
    }
    Ok(())
}

/// Published `(b1, γ)` pairs at `α* = 2` and half-wavelength spacing.
pub fn published_fit(family: ArrayFamily) -> (f64, f64) {
    match family {
        ArrayFamily::Esnla => (0.659, 0.810),
        ArrayFamily::Binomial => (0.496, 0.496),
        ArrayFamily::Chebyshev => (0.716, 0.874),
    }
}

fn cmd_reproduce(c: &ReproduceCmd, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let seed = c.common.seed;
    let base = |family: SweepFamily, alpha_star: f64, d: f64| {
        let mut cfg = SweepConfig::new(family, alpha_star, d, c.samples, seed);
        if let Some(ns) = &c.n_list {
            cfg.n_list = ns.clone();
        }
        cfg
    };
    let esnla = SweepFamily::Array(ArrayFamily::Esnla);
    let comment = comment_line("reproduce", seed, c)?;
    let tables: Vec<SweepTable> = match c.target {
        Target::Fig4 => {
            let tables = [0.5, 1.0, 2.0, 4.0]
                .iter()
                .map(|&a| scaling::sweep(&base(esnla, a, 0.5)))
                .collect::<Result<Vec<_>>>()?;
            let rep = scaling::parallel_lines_check(&tables)?;
            for (a, f) in &rep.fits {
                let expect = (*a == 2.0).then(|| published_fit(ArrayFamily::Esnla));
                fit_line(err, &format!("esnla a*={a}"), f, expect)?;
            }
            writeln!(
                err,
                "[{}] gamma spread {:.4} <= 0.1",
                verdict(rep.gamma_spread <= 0.1),
                rep.gamma_spread
            )?;
            writeln!(
                err,
                "[{}] intercepts increase with alpha*",
                verdict(rep.intercepts_increasing)
            )?;
            tables
        }
        Target::Fig5 => {
            let tables = [0.5, 0.25, 0.125, 0.0625]
                .iter()
                .map(|&d| scaling::sweep(&base(esnla, 2.0, d)))
                .collect::<Result<Vec<_>>>()?;
            let rep = scaling::spacing_check(&tables)?;
            for (d, f) in &rep.bundle.fits {
                fit_line(err, &format!("esnla d={d}"), f, None)?;
            }
            writeln!(err, "gamma spread {:.4}", rep.bundle.gamma_spread)?;
            if !rep.half_wave_intercept_largest {
                writeln!(err, "note: the half-wavelength intercept is not the largest")?;
            }
            tables
        }
        Target::Fig6 => {
            let fams = [ArrayFamily::Binomial, ArrayFamily::Esnla, ArrayFamily::Chebyshev];
            let tables = fams
                .iter()
                .map(|&f| scaling::sweep(&base(SweepFamily::Array(f), 2.0, 0.5)))
                .collect::<Result<Vec<_>>>()?;
            for (f, t) in fams.iter().zip(&tables) {
                fit_line(err, f.name(), &scaling::fit_power_law(t)?, Some(published_fit(*f)))?;
            }
            let rows = scaling::family_ordering(&tables[0], &tables[1], &tables[2])?;
            let ok = rows
                .iter()
                .all(|r| r.binomial_above_esnla && r.esnla_not_below_chebyshev);
            writeln!(
                err,
                "[{}] ordering binomial > esnla >= chebyshev - 3 SE at every N",
                verdict(ok)
            )?;
            for r in rows
                .iter()
                .filter(|r| !(r.binomial_above_esnla && r.esnla_not_below_chebyshev))
            {
                writeln!(
                    err,
                    "  N={}: binomial={:.5} esnla={:.5} chebyshev={:.5}",
                    r.n, r.binomial, r.esnla, r.chebyshev
                )?;
            }
            tables
        }
        Target::TableC => {
            let gz = analytic::guard_zone(10.0, 4.0)?;
            let law = DistanceLaw::basis(2.0)?;
            let w_b = ebw::quadrature_beam_width(
                &AntennaPattern::esnla(4, 0.5)?,
                &law,
                4.0,
                DEFAULT_GRID,
                ebw::QUADRATURE_POINTS,
            )?
            .value;
            let mut t = Table::new(&["n", "w_b", "d", "p0", "eta_p0", "eta_1_minus_p0"]);
            let mut all = true;
            for d in [0.01, 0.03, 0.06] {
                let rep = analytic::optimality_region_check(1000, w_b, gz.c1, d)?;
                all &= rep.all_strict && rep.grid_argmax <= 0.5;
                for (p, a, b) in &rep.pairs {
                    t.push(vec!["1000".into(), num(w_b), num(d), num(*p), num(*a), num(*b)]);
                }
            }
            writeln!(err, "[{}] link objective prefers p_t <= 1/2", verdict(all))?;
            return output::emit(c.common.out.as_deref(), &t.render(&comment), out);
        }
    };
    finish(&c.common, &sweep_table(&tables), &comment, PlotKind::Sweep, out)
}

fn cmd_netsim(c: &NetsimCmd, out: &mut dyn Write) -> Result<()> {
    let cfg = NetworkConfig {
        n: c.n,
        r: c.r,
        p_t: c.pt,
        alpha: c.alpha,
        sir0: c.sir0,
        tx_pattern: c.tx_pattern.parse()?,
        rx_pattern: c.rx_pattern.parse()?,
        model: match c.model {
            ModelArg::Pairwise => Model::Pairwise,
            ModelArg::Multi => Model::Multi,
        },
        fading: match c.fading {
            FadingArg::None => Fading::None,
            FadingArg::Rayleigh => Fading::Rayleigh,
        },
        slots: c.slots,
        seed: c.common.seed,
        allow_large_pt: c.allow_large_pt,
    };
    let state = netsim::generate_network(&cfg)?;
    let st = netsim::estimate_throughput(&state, &cfg)?;
    let comment = comment_line("netsim", c.common.seed, c)?;

    let mut bins = Table::new(&[
        "bin_lo",
        "bin_hi",
        "links",
        "successes",
        "p_emp",
        "std_error",
        "bound_lo",
        "bound_hi",
    ]);
    for b in &st.bins {
        let p = |x: f64| if x.is_nan() { String::new() } else { num(x) };
        bins.push(vec![
            num(b.lo),
            num(b.hi),
            b.links.to_string(),
            b.successes.to_string(),
            p(b.p_emp),
            p(b.std_error),
            opt(b.bound_lo),
            opt(b.bound_hi),
        ]);
    }
    let within = st.bins.iter().filter(|b| b.within(3.0) == Some(true)).count();
    let mut summary = Table::new(&[
        "slots",
        "eta_tt",
        "eta_tt_se",
        "eta_tr",
        "eta_tr_se",
        "links",
        "successes",
        "mean_k_pr",
        "delta",
        "c1",
        "bound_width",
        "bins_within_3se",
    ]);
    summary.push(vec![
        st.slots.to_string(),
        num(st.eta_tt),
        num(st.eta_tt_se),
        num(st.eta_tr),
        num(st.eta_tr_se),
        st.links.to_string(),
        st.successes.to_string(),
        num(state.mean_k_pr()),
        num(state.guard().delta),
        num(state.guard().c1),
        opt(st.bound_width),
        within.to_string(),
    ]);
    match c.common.out.as_deref() {
        Some(path) => {
            finish(&c.common, &bins, &comment, PlotKind::Bins, out)?;
            output::emit(
                Some(&output::sibling(path, "_summary", "csv")),
                &summary.render(&comment),
                out,
            )
        }
        None => {
            if c.common.emit_plot {
                return Err(Error::invalid("--emit-plot needs --out"));
            }
            output::emit(None, &bins.render(&comment), out)?;
            output::emit(None, &summary.render(&comment), out)
        }
    }
}

#[derive(Serialize)]
struct AnalyticReport {
    n: u64,
    w_b: f64,
    sir0: f64,
    alpha: f64,
    delta: f64,
    c1: f64,
    f_alpha: Option<f64>,
    f_alpha_divergent: bool,
    objective: Objective,
    regime: String,
    p_t: f64,
    r: f64,
    p_t_clamped: bool,
    r_clamped: bool,
    transport_root: f64,
    eta_tt: Option<f64>,
    eta_tr_lower: Option<f64>,
    eta_tr_upper: Option<f64>,
}

fn cmd_analytic(c: &AnalyticCmd, out: &mut dyn Write) -> Result<()> {
    let gz = analytic::guard_zone(c.sir0, c.alpha)?;
    let fa = analytic::f_alpha(c.alpha)?;
    let objective: Objective = c.objective.parse()?;
    let reg = analytic::optimal_params(c.n, c.w_b, objective, gz.c1)?;
    let p_t = c.pt.unwrap_or(reg.p_t);
    let r = c.r.unwrap_or(reg.r);
    // The brackets are undefined past c1 p_t r² W_B = 1; report them as absent.
    let tt = analytic::analytic_total_throughput(c.n, p_t, r, c.w_b, gz.c1).ok();
    let tb = analytic::transport_bounds(c.n, p_t, r, c.w_b, gz.c1).ok();
    let rep = AnalyticReport {
        n: c.n,
        w_b: c.w_b,
        sir0: c.sir0,
        alpha: c.alpha,
        delta: gz.delta,
        c1: gz.c1,
        f_alpha: fa.value(),
        f_alpha_divergent: fa.value().is_none(),
        objective,
        regime: reg.regime.clone(),
        p_t,
        r,
        p_t_clamped: reg.p_t_clamped,
        r_clamped: reg.r_clamped,
        transport_root: analytic::transport_root(c.n.max(3))?,
        eta_tt: tt,
        eta_tr_lower: tb.map(|b| b.lower),
        eta_tr_upper: tb.map(|b| b.upper),
    };
    let text = if c.json {
        serde_json::to_string_pretty(&rep).map_err(|e| Error::Io(e.to_string()))? + "\n"
    } else {
        let v = serde_json::to_value(&rep).map_err(|e| Error::Io(e.to_string()))?;
        let mut s = String::new();
        if let serde_json::Value::Object(m) = v {
            for (k, v) in m {
                let v = match v {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                };
                s.push_str(&format!("{k} = {v}\n"));
            }
        }
        s
    };
    output::emit(c.common.out.as_deref(), &text, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<OsString> {
        std::iter::once("ebw")
            .chain(s.split_whitespace())
            .map(OsString::from)
            .collect()
    }

    fn run_str(s: &str) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(args(s), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.conf");
        std::fs::write(&cfg, "# defaults\nalpha=2\nrows=8\nfamily=esnla\nn=4\n").unwrap();
        let expanded = expand_config(args(&format!("pattern --config {} --rows 16", cfg.display()))).unwrap();
        let cli = Cli::try_parse_from(expanded).unwrap();
        match cli.command {
            Command::Pattern(p) => {
                assert_eq!(p.rows, 16);
                assert_eq!(p.alpha, 2.0);
                assert_eq!(p.sel.n, Some(4));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn usage_and_precondition_errors() {
        let (code, _, err) = run_str("netsim --sir0 0.5 --n 50 --slots 1");
        assert_eq!(code, 2);
        assert!(err.contains("SIR0 > 1"), "{err}");
        assert_eq!(run_str("pattern --family nope").0, 2);
        assert_eq!(run_str("pattern --family esnla").0, 2);
        assert_eq!(run_str("frobnicate").0, 2);
        assert_eq!(run_str("pattern --family omni --threads 0").0, 2);
    }

    #[test]
    fn analytic_report() {
        let (code, out, _) = run_str("analytic --n 10000 --w-b 0.01 --objective transport --json");
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["r"].as_f64().unwrap() - 0.05028).abs() < 1e-4);
        assert_eq!(v["regime"], "Θ(W_B^{-1/2} n^{1/2})");
        let (code, out, _) = run_str("analytic --alpha 2");
        assert_eq!(code, 0);
        assert!(out.contains("f_alpha_divergent = true"));
    }

    #[test]
    fn mixture_parsing() {
        assert!(parse_mixture("0.5:1,0.5:4").is_ok());
        assert!(parse_mixture("0.5:1,0.4:4").is_err());
        assert!(parse_mixture("0.5-1").is_err());
    }

    #[test]
    fn target_names() {
        for t in ["fig4", "fig5", "fig6", "tableC", "tablec"] {
            assert!(Target::from_str(t, false).is_ok(), "{t}");
        }
    }
}
