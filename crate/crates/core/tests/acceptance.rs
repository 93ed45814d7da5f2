//! Acceptance checks. Each test writes one `[PASS]`/`[FAIL]` line to stderr
//! (bypassing the test harness capture) and then asserts.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use ebw_core::analytic::{self, FadingFactor};
use ebw_core::ebw::{self, DistanceLaw, MixtureDistribution};
use ebw_core::netsim::{self, Fading, Model, NetworkConfig, ParamRule};
use ebw_core::patterns::{AntennaPattern, ArrayFamily, DEFAULT_GRID};
use ebw_core::scaling::{self, SweepConfig, SweepFamily, SweepTable};

const SEED: u64 = 1;
const SAMPLES: u64 = 10_000_000;
const FIT_TOLERANCE: f64 = 0.08;

fn report(id: u32, name: &str, ok: bool, detail: String) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{verdict}] {id:>2} {name}: {detail}");
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn esnla4() -> AntennaPattern {
    AntennaPattern::esnla(4, 0.5).unwrap()
}

fn sweep(family: SweepFamily, alpha_star: f64) -> SweepTable {
    scaling::sweep(&SweepConfig::new(family, alpha_star, 0.5, SAMPLES, SEED)).unwrap()
}

fn esnla_sweep(alpha_star: f64) -> &'static SweepTable {
    static TABLES: [OnceLock<SweepTable>; 4] = [const { OnceLock::new() }; 4];
    let slot = [0.5, 1.0, 2.0, 4.0]
        .iter()
        .position(|&a| a == alpha_star)
        .expect("unsupported alpha*");
    TABLES[slot].get_or_init(|| sweep(SweepFamily::Array(ArrayFamily::Esnla), alpha_star))
}

fn within(x: f64, target: f64) -> bool {
    (x - target).abs() <= FIT_TOLERANCE
}

#[test]
fn guard_zone_constants() {
    let g = analytic::guard_zone(10.0, 4.0).unwrap();
    let ok = (g.delta - 0.778).abs() <= 5e-4 && (g.c1 - 9.935).abs() <= 5e-4;
    report(
        1,
        "guard zone",
        ok,
        format!("delta={:.4} c1={:.4} (target 0.778, 9.935)", g.delta, g.c1),
    );
}

#[test]
fn rayleigh_factor() {
    let closed = analytic::f_alpha(4.0).unwrap();
    let exact = matches!(closed, FadingFactor::Finite(v) if (v - FRAC_PI_2).abs() <= 1e-12);

    // Oracle: direct average of sqrt(F1/F2) over independent unit exponentials.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let n = 10_000_000u64;
    let mut sum = 0.0;
    for _ in 0..n {
        let a: f64 = rng.sample(Exp1);
        let b: f64 = rng.sample(Exp1);
        sum += (a / b).sqrt();
    }
    let oracle = sum / n as f64;
    let lib = analytic::f_alpha_monte_carlo(4.0, n, SEED).unwrap().mean;
    let rel = |x: f64| (x / FRAC_PI_2 - 1.0).abs();
    let ok = exact && rel(oracle) <= 0.01 && rel(lib) <= 0.01;
    report(
        2,
        "Rayleigh factor at alpha=4",
        ok,
        format!(
            "closed={:?} oracle={oracle:.5} library={lib:.5} pi/2={FRAC_PI_2:.5}",
            closed.value()
        ),
    );
}

#[test]
fn esnla_power_law() {
    let f = scaling::fit_power_law(esnla_sweep(2.0)).unwrap();
    let ok = within(f.b1, 0.659) && within(f.gamma, 0.810) && f.r2 >= 0.98;
    report(
        3,
        "ESNLA power law",
        ok,
        format!(
            "b1={:.4} gamma={:.4} r2={:.4} (target 0.659, 0.810 ±{FIT_TOLERANCE}, r2>=0.98)",
            f.b1, f.gamma, f.r2
        ),
    );
}

#[test]
fn family_constants_and_ordering() {
    let binomial = sweep(SweepFamily::Array(ArrayFamily::Binomial), 2.0);
    let chebyshev = sweep(SweepFamily::Array(ArrayFamily::Chebyshev), 2.0);
    let esnla = esnla_sweep(2.0);
    let fb = scaling::fit_power_law(&binomial).unwrap();
    let fc = scaling::fit_power_law(&chebyshev).unwrap();
    let rows = scaling::family_ordering(&binomial, esnla, &chebyshev).unwrap();
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !(r.binomial_above_esnla && r.esnla_not_below_chebyshev))
        .map(|r| format!("N={} ({:.4}/{:.4}/{:.4})", r.n, r.binomial, r.esnla, r.chebyshev))
        .collect();
    let binomial_ok = within(fb.b1, 0.496) && within(fb.gamma, 0.496);
    let chebyshev_ok = within(fc.b1, 0.716) && within(fc.gamma, 0.874);
    let r_ms: Vec<String> = chebyshev
        .rows
        .iter()
        .map(|r| format!("{}:{:.1}", r.n, r.r_ms.unwrap_or(f64::NAN)))
        .collect();
    report(
        4,
        "family constants and ordering",
        binomial_ok && chebyshev_ok && bad.is_empty(),
        format!(
            "binomial b1={:.4} gamma={:.4} [{}]; chebyshev b1={:.4} gamma={:.4} [{}] R_MS {}; ordering violations: {}",
            fb.b1,
            fb.gamma,
            if binomial_ok { "ok" } else { "off" },
            fc.b1,
            fc.gamma,
            if chebyshev_ok { "ok" } else { "off" },
            r_ms.join(" "),
            if bad.is_empty() {
                "none".to_string()
            } else {
                bad.join(", ")
            }
        ),
    );
}

#[test]
fn parallel_lines() {
    let tables: Vec<SweepTable> = [0.5, 1.0, 2.0, 4.0].iter().map(|&a| esnla_sweep(a).clone()).collect();
    let rep = scaling::parallel_lines_check(&tables).unwrap();
    let fits: Vec<String> = rep
        .fits
        .iter()
        .map(|(a, f)| format!("a*={a}: b1={:.4} gamma={:.4}", f.b1, f.gamma))
        .collect();
    report(
        5,
        "parallel lines across alpha*",
        rep.gamma_spread <= 0.1 && rep.intercepts_increasing,
        format!(
            "gamma spread={:.4} (<=0.1), intercepts increasing={}; {}",
            rep.gamma_spread,
            rep.intercepts_increasing,
            fits.join("; ")
        ),
    );
}

#[test]
fn product_form() {
    let (rx, tx) = (esnla4(), AntennaPattern::esnla(8, 0.5).unwrap());
    let mut ok = true;
    let mut parts = Vec::new();
    for h in [1.0, 2.0, 3.0, 4.0] {
        let law = DistanceLaw::basis(h).unwrap();
        let joint = ebw::interference_probability(&rx, &tx, &law, 4.0, SAMPLES, SEED).unwrap();
        let w_rx = ebw::effective_beam_width(&rx, &law, 4.0, SAMPLES, SEED + 1).unwrap();
        let w_tx = ebw::effective_beam_width(&tx, &law, 4.0, SAMPLES, SEED + 2).unwrap();
        let product = w_rx.value * w_tx.value;
        let se = (joint.std_error.powi(2) + ebw::product_std_error(&w_rx, &w_tx).powi(2)).sqrt();
        let z = (joint.value - product).abs() / se;
        ok &= z <= 3.0;
        parts.push(format!("h={h}: joint={:.5} product={product:.5} z={z:.2}", joint.value));
    }
    report(6, "product form esnla(4) x esnla(8)", ok, parts.join("; "));
}

#[test]
fn mixture_sandwich() {
    let p = esnla4();
    let mix = MixtureDistribution::new(&[(0.5, 1.0), (0.5, 4.0)]).unwrap();
    let rep = ebw::verify_bounds(&p, &p, &mix, 4.0, SAMPLES, SEED).unwrap();
    let strict = rep.excess() > 3.0 * rep.excess_std_error;
    report(
        7,
        "mixture sandwich",
        rep.pass && strict,
        format!(
            "product={:.5} pr={:.5} min={:.5} excess={:.5} ({:.1} SE)",
            rep.product_lower,
            rep.pr_ei.value,
            rep.min_upper,
            rep.excess(),
            rep.excess() / rep.excess_std_error
        ),
    );
}

#[test]
fn simulator_bracket() {
    let mut cfg = NetworkConfig::new(1000, 0.06, 0.05);
    cfg.tx_pattern = esnla4();
    cfg.slots = 20_000;
    cfg.seed = SEED;
    let state = netsim::generate_network(&cfg).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for (label, rx) in [("omni rx", AntennaPattern::omni()), ("esnla(4) rx", esnla4())] {
        cfg.rx_pattern = rx;
        let st = netsim::estimate_throughput(&state, &cfg).unwrap();
        let hits = st.bins.iter().filter(|b| b.within(3.0) == Some(true)).count();
        ok &= hits >= 14;
        parts.push(format!(
            "{label}: {hits}/16 bins (width {:.4})",
            st.bound_width.unwrap()
        ));
    }
    report(8, "simulator bin bracket", ok, parts.join("; "));
}

#[test]
fn rayleigh_product_identity() {
    let mut cfg = NetworkConfig::new(20, 0.3, 0.2);
    cfg.model = Model::Multi;
    cfg.fading = Fading::Rayleigh;
    cfg.tx_pattern = esnla4();
    cfg.seed = SEED;
    let state = netsim::generate_network(&cfg).unwrap();
    let tx = (0..state.n()).find(|&j| state.k_pr(j) > 0).unwrap();
    let rx = state.neighbors(tx)[0] as usize;
    let rep = netsim::rayleigh_product_check(&state, &cfg, tx, rx, 1_000_000, SEED).unwrap();
    report(
        9,
        "Rayleigh product identity",
        rep.pass,
        format!(
            "link {tx}->{rx}: multi={:.5} product={:.5} z={:.2}",
            rep.multi.value, rep.product, rep.z
        ),
    );
}

#[test]
fn capacity_orders() {
    let mut template = NetworkConfig::new(250, 0.1, 0.5);
    template.slots = 2000;
    template.seed = SEED;
    let ns = [250, 500, 1000, 2000, 4000];
    let rows = netsim::capacity_curve(&template, &ns, ParamRule::Connectivity { p_t: 0.5 }).unwrap();
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.eta_tt)).collect();
    // The fit reports w = b1 / n^γ, so the growth slope is -γ.
    let slope = -scaling::fit_power_law_points(&pts).unwrap().gamma;
    let slope_ok = (0.80..=1.00).contains(&slope);

    let law = DistanceLaw::basis(2.0).unwrap();
    let mut cells = Vec::new();
    for p in [
        AntennaPattern::omni(),
        AntennaPattern::esnla(2, 0.5).unwrap(),
        esnla4(),
        AntennaPattern::esnla(8, 0.5).unwrap(),
    ] {
        let w = if p.is_omni() {
            1.0
        } else {
            ebw::quadrature_beam_width(&p, &law, 4.0, DEFAULT_GRID, ebw::QUADRATURE_POINTS)
                .unwrap()
                .value
        };
        let mut cfg = template.clone();
        cfg.tx_pattern = p.clone();
        cfg.rx_pattern = p;
        let row = netsim::capacity_curve(&cfg, &[1000], ParamRule::Connectivity { p_t: 0.5 }).unwrap()[0];
        cells.push((w, row.eta_tt));
    }
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let monotone = cells.windows(2).all(|c| c[1].1 >= c[0].1);
    let curve: Vec<String> = rows.iter().map(|r| format!("{}:{:.3}", r.n, r.eta_tt)).collect();
    let mono: Vec<String> = cells.iter().map(|(w, e)| format!("W={w:.4}:{e:.2}")).collect();
    report(
        10,
        "capacity growth and width monotonicity",
        slope_ok && monotone,
        format!(
            "slope={slope:.3} in [0.80,1.00] [{}]; eta_tt by W_B [{}]",
            curve.join(" "),
            mono.join(" ")
        ),
    );
}

#[test]
fn transport_root() {
    // Oracle: plain bisection on the untransformed equation.
    let oracle = |n: f64| {
        let g = |w: f64| 2.0 * (n - 1.0) * w * (1.0 - w).powf(n - 2.0) - (1.0 - (1.0 - w).powf(n - 1.0));
        let (mut lo, mut hi) = (1e-3 / n, 10.0 / n);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        0.5 * (lo + hi)
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [1_000u64, 10_000, 100_000] {
        let root = analytic::transport_root_bisection(n).unwrap();
        let target = analytic::TRANSPORT_ROOT_CONSTANT / n as f64;
        let rel = (root / target - 1.0).abs();
        let agree = (root / oracle(n as f64) - 1.0).abs() <= 1e-9;
        ok &= rel <= 0.02 && agree;
        parts.push(format!("n={n}: n*w={:.4} rel={rel:.4}", root * n as f64));
    }
    report(11, "transport root", ok, parts.join("; "));
}
