//! Slotted-ALOHA network simulation on the unit torus.
//!
//! Nodes are placed uniformly on `[0,1)²` with wraparound distances. In each
//! slot every node independently becomes a transmitter with probability `p_t`
//! and picks a uniform receiver among the nodes within range `r`. A
//! transmitter's pattern points at its receiver and a receiver's pattern
//! points back at its transmitter.
//!
//! Two reception models are supported:
//!
//! * pairwise: link `i` survives iff every other transmitter `T_j` satisfies
//!   `|T_j − R_i| ≥ (1+Δ) d_i G*_R(θ_ij) G*_T(φ_ji)`;
//! * multi: the summed interference `Σ F G_R G_T / |T_k − R_i|^α` must stay
//!   below `F / d_i^α / SIR₀`, with unit-mean exponential fades `F` under
//!   Rayleigh fading or `F ≡ 1` without fading.
//!
//! A receiver that is itself transmitting fails. With a directional receive
//! pattern, a receiver targeted by two or more transmitters fails all of them.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{f_alpha, guard_zone, GuardZone};
use crate::ebw::{bernoulli_count, quadrature_beam_width, DistanceLaw, EbwEstimate, QUADRATURE_POINTS};
use crate::error::{Error, Result};
use crate::patterns::{AntennaPattern, DEFAULT_GRID};
use crate::rng::{derive_seed, substream};

/// Number of equal-width link-length bins over `(0, r]`.
pub const LENGTH_BINS: usize = 16;

const PLACEMENT_LABEL: u64 = 0x706c_6163;
const SLOT_LABEL: u64 = 0x736c_6f74;
const SLOT_CHUNK: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Pairwise,
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Fading {
    None,
    Rayleigh,
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pairwise" => Ok(Model::Pairwise),
            "multi" => Ok(Model::Multi),
            _ => Err(Error::invalid(format!(
                "unknown model '{s}' (expected pairwise or multi)"
            ))),
        }
    }
}

impl std::str::FromStr for Fading {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Fading::None),
            "rayleigh" => Ok(Fading::Rayleigh),
            _ => Err(Error::invalid(format!(
                "unknown fading '{s}' (expected none or rayleigh)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub n: usize,
    pub r: f64,
    pub p_t: f64,
    pub alpha: f64,
    pub sir0: f64,
    pub tx_pattern: AntennaPattern,
    pub rx_pattern: AntennaPattern,
    pub model: Model,
    pub fading: Fading,
    pub slots: u64,
    pub seed: u64,
    /// Allow `p_t > 1/2` for diagnostics.
    pub allow_large_pt: bool,
}

impl NetworkConfig {
    /// Omni antennas, `α = 4`, `SIR₀ = 10`, pairwise model without fading.
    pub fn new(n: usize, r: f64, p_t: f64) -> Self {
        NetworkConfig {
            n,
            r,
            p_t,
            alpha: 4.0,
            sir0: 10.0,
            tx_pattern: AntennaPattern::omni(),
            rx_pattern: AntennaPattern::omni(),
            model: Model::Pairwise,
            fading: Fading::None,
            slots: 1000,
            seed: 0,
            allow_large_pt: false,
        }
    }

    pub fn validate(&self) -> Result<GuardZone> {
        if self.n < 2 {
            return Err(Error::invalid(format!("n must be >= 2, got {}", self.n)));
        }
        if !(self.r > 0.0 && self.r <= FRAC_1_SQRT_2) {
            return Err(Error::invalid(format!(
                "range r must satisfy 0 < r <= sqrt(2)/2, got {}",
                self.r
            )));
        }
        let p_max = if self.allow_large_pt { 1.0 } else { 0.5 };
        if !(self.p_t >= 0.0 && self.p_t <= p_max) {
            return Err(Error::invalid(format!(
                "transmit probability p_t must lie in [0, {p_max}], got {}",
                self.p_t
            )));
        }
        if self.slots == 0 {
            return Err(Error::invalid("slots must be >= 1"));
        }
        guard_zone(self.sir0, self.alpha)
    }
}

type Point = [f64; 2];

/// Displacement `b − a` on the unit torus, each component in `[-1/2, 1/2)`.
#[inline]
pub fn torus_delta(a: Point, b: Point) -> Point {
    let w = |x: f64| x - (x + 0.5).floor();
    [w(b[0] - a[0]), w(b[1] - a[1])]
}

#[inline]
pub fn torus_distance(a: Point, b: Point) -> f64 {
    let d = torus_delta(a, b);
    d[0].hypot(d[1])
}

/// Signed angle from direction `u` to direction `v`.
#[inline]
fn signed_angle(u: Point, v: Point) -> f64 {
    (u[0] * v[1] - u[1] * v[0]).atan2(u[0] * v[0] + u[1] * v[1])
}

/// Uniform cell index over the torus for neighbour queries.
struct CellGrid {
    m: usize,
    cells: Vec<Vec<u32>>,
}

impl CellGrid {
    fn new(members: impl Iterator<Item = (u32, Point)>, radius: f64) -> Self {
        let m = (1.0 / radius).floor() as usize;
        let m = if m < 3 { 1 } else { m.min(1024) };
        let mut cells = vec![Vec::new(); m * m];
        for (i, p) in members {
            cells[Self::cell_of(m, p)].push(i);
        }
        CellGrid { m, cells }
    }

    fn coord(m: usize, x: f64) -> usize {
        ((x * m as f64) as usize).min(m - 1)
    }

    fn cell_of(m: usize, p: Point) -> usize {
        Self::coord(m, p[0]) * m + Self::coord(m, p[1])
    }

    /// Members in the 3×3 block of cells around `p`.
    fn near(&self, p: Point) -> impl Iterator<Item = u32> + '_ {
        let m = self.m;
        let (cx, cy) = (Self::coord(m, p[0]), Self::coord(m, p[1]));
        let offsets: &[isize] = if m == 1 { &[0] } else { &[-1, 0, 1] };
        offsets.iter().flat_map(move |&dx| {
            offsets.iter().flat_map(move |&dy| {
                let x = (cx as isize + dx).rem_euclid(m as isize) as usize;
                let y = (cy as isize + dy).rem_euclid(m as isize) as usize;
                self.cells[x * m + y].iter().copied()
            })
        })
    }
}

/// Node placement with in-range neighbour lists.
#[derive(Debug, Clone)]
pub struct NetworkState {
    positions: Vec<Point>,
    neighbors: Vec<Vec<u32>>,
    r: f64,
    guard: GuardZone,
}

impl NetworkState {
    pub fn from_positions(positions: Vec<Point>, r: f64, sir0: f64, alpha: f64) -> Result<Self> {
        if let Some(p) = positions
            .iter()
            .find(|p| !(0.0..1.0).contains(&p[0]) || !(0.0..1.0).contains(&p[1]))
        {
            return Err(Error::invalid(format!("position {p:?} is outside [0,1)^2")));
        }
        if !(r > 0.0 && r <= FRAC_1_SQRT_2) {
            return Err(Error::invalid(format!(
                "range r must satisfy 0 < r <= sqrt(2)/2, got {r}"
            )));
        }
        let guard = guard_zone(sir0, alpha)?;
        let grid = CellGrid::new(positions.iter().enumerate().map(|(i, &p)| (i as u32, p)), r);
        let neighbors = (0..positions.len())
            .into_par_iter()
            .map(|i| {
                let mut v: Vec<u32> = grid
                    .near(positions[i])
                    .filter(|&j| j as usize != i && torus_distance(positions[i], positions[j as usize]) <= r)
                    .collect();
                v.sort_unstable();
                v
            })
            .collect();
        Ok(NetworkState {
            positions,
            neighbors,
            r,
            guard,
        })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn neighbors(&self, j: usize) -> &[u32] {
        &self.neighbors[j]
    }

    /// Number of potential receivers of node `j`.
    pub fn k_pr(&self, j: usize) -> usize {
        self.neighbors[j].len()
    }

    pub fn mean_k_pr(&self) -> f64 {
        self.neighbors.iter().map(Vec::len).sum::<usize>() as f64 / self.n() as f64
    }

    pub fn range(&self) -> f64 {
        self.r
    }

    pub fn guard(&self) -> GuardZone {
        self.guard
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        torus_distance(self.positions[a], self.positions[b])
    }

    fn receiver_term(&self, p_t: f64, j: usize) -> f64 {
        match self.k_pr(j) {
            0 => 1.0,
            k => 1.0 - p_t * PI * self.r * self.r / k as f64,
        }
    }

    /// `Π_j (1 − p_t π r² / k_pr(j))` over every node with neighbours.
    pub fn receiver_factor(&self, p_t: f64) -> f64 {
        (0..self.n()).map(|j| self.receiver_term(p_t, j)).product()
    }

    /// The same product with the two end points of a link left out.
    pub fn receiver_factor_excluding(&self, p_t: f64, a: usize, b: usize) -> f64 {
        (0..self.n())
            .filter(|&j| j != a && j != b)
            .map(|j| self.receiver_term(p_t, j))
            .product()
    }

    /// `max_j n π r² / k_pr(j)` over nodes with neighbours.
    pub fn density_ratio_max(&self) -> f64 {
        let area = self.n() as f64 * PI * self.r * self.r;
        self.neighbors
            .iter()
            .filter(|v| !v.is_empty())
            .map(|v| area / v.len() as f64)
            .fold(0.0, f64::max)
    }
}

/// Uniform placement drawn from the configuration seed.
pub fn generate_network(cfg: &NetworkConfig) -> Result<NetworkState> {
    cfg.validate()?;
    let mut rng = substream(derive_seed(cfg.seed, &[PLACEMENT_LABEL, cfg.n as u64]), 0);
    let positions = (0..cfg.n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    NetworkState::from_positions(positions, cfg.r, cfg.sir0, cfg.alpha)
}

/// Transmitters of one slot with their chosen receivers.
#[derive(Debug, Clone)]
pub struct Activity {
    /// `(transmitter, receiver)` in node order.
    pub links: Vec<(u32, u32)>,
    transmitting: Vec<bool>,
    targeted: Vec<u16>,
    grid: CellGrid,
}

impl std::fmt::Debug for CellGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CellGrid({}x{})", self.m, self.m)
    }
}

impl Clone for CellGrid {
    fn clone(&self) -> Self {
        CellGrid {
            m: self.m,
            cells: self.cells.clone(),
        }
    }
}

impl Activity {
    pub fn from_links(state: &NetworkState, links: Vec<(u32, u32)>) -> Self {
        let n = state.n();
        let mut transmitting = vec![false; n];
        let mut targeted = vec![0u16; n];
        for &(t, r) in &links {
            transmitting[t as usize] = true;
            targeted[r as usize] = targeted[r as usize].saturating_add(1);
        }
        let radius = (1.0 + state.guard.delta) * state.r;
        let grid = CellGrid::new(
            links
                .iter()
                .enumerate()
                .map(|(i, &(t, _))| (i as u32, state.positions[t as usize])),
            radius,
        );
        Activity {
            links,
            transmitting,
            targeted,
            grid,
        }
    }

    pub fn is_transmitting(&self, j: usize) -> bool {
        self.transmitting[j]
    }
}

/// Bernoulli activation and uniform receiver choice. Nodes without
/// neighbours stay idle.
pub fn draw_activity(state: &NetworkState, p_t: f64, rng: &mut ChaCha8Rng) -> Activity {
    let n = state.n();
    let active: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < p_t).collect();
    let links = (0..n)
        .filter(|&j| active[j] && state.k_pr(j) > 0)
        .map(|j| {
            let nb = state.neighbors(j);
            (j as u32, nb[rng.random_range(0..nb.len())])
        })
        .collect();
    Activity::from_links(state, links)
}

/// Geometry of interferer `k` (transmitting towards `rk`) against the link
/// `t → r`: distance `|T_k − R|`, receive angle and transmit angle.
#[inline]
fn interferer_geometry(pos: &[Point], t: usize, r: usize, k: usize, rk: usize) -> (f64, f64, f64) {
    let to_k = torus_delta(pos[r], pos[k]);
    let dist = to_k[0].hypot(to_k[1]);
    let theta = signed_angle(torus_delta(pos[r], pos[t]), to_k);
    let phi = signed_angle(torus_delta(pos[k], pos[rk]), torus_delta(pos[k], pos[r]));
    (dist, theta, phi)
}

fn blocked(cfg: &NetworkConfig, act: &Activity, r: usize) -> bool {
    act.transmitting[r] || (!cfg.rx_pattern.is_omni() && act.targeted[r] >= 2)
}

/// Pairwise guard-zone test for link `index` of `act`.
pub fn pairwise_success(state: &NetworkState, cfg: &NetworkConfig, act: &Activity, index: usize) -> bool {
    let (t, r) = act.links[index];
    let (t, r) = (t as usize, r as usize);
    if blocked(cfg, act, r) {
        return false;
    }
    let pos = &state.positions;
    let guard = (1.0 + state.guard.delta) * torus_distance(pos[t], pos[r]);
    act.grid.near(pos[r]).all(|li| {
        let (k, rk) = act.links[li as usize];
        let (k, rk) = (k as usize, rk as usize);
        if k == t {
            return true;
        }
        if torus_distance(pos[k], pos[r]) >= guard {
            return true;
        }
        let (dist, theta, phi) = interferer_geometry(pos, t, r, k, rk);
        let req = guard * cfg.rx_pattern.gain_starred(theta, cfg.alpha) * cfg.tx_pattern.gain_starred(phi, cfg.alpha);
        dist >= req
    })
}

/// Cumulative-interference test for link `index`; `fade` supplies the signal
/// fade first and then one fade per interferer in link order.
pub fn multi_success(
    state: &NetworkState,
    cfg: &NetworkConfig,
    act: &Activity,
    index: usize,
    mut fade: impl FnMut() -> f64,
) -> bool {
    let (t, r) = act.links[index];
    let (t, r) = (t as usize, r as usize);
    if blocked(cfg, act, r) {
        return false;
    }
    let pos = &state.positions;
    let signal = fade() / torus_distance(pos[t], pos[r]).powf(cfg.alpha);
    let mut interference = 0.0;
    for &(k, rk) in &act.links {
        let (k, rk) = (k as usize, rk as usize);
        if k == t {
            continue;
        }
        let f = fade();
        let (dist, theta, phi) = interferer_geometry(pos, t, r, k, rk);
        let g = cfg.rx_pattern.gain(theta) * cfg.tx_pattern.gain(phi);
        if g > 0.0 {
            interference += f * g / dist.powf(cfg.alpha);
        }
    }
    signal >= cfg.sir0 * interference
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkOutcome {
    pub tx: u32,
    pub rx: u32,
    pub distance: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotOutcome {
    pub links: Vec<LinkOutcome>,
}

impl SlotOutcome {
    pub fn successes(&self) -> usize {
        self.links.iter().filter(|l| l.success).count()
    }

    /// Sum of link lengths over successful links.
    pub fn transport(&self) -> f64 {
        self.links.iter().filter(|l| l.success).map(|l| l.distance).sum()
    }
}

fn exp1(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(Exp1)
}

/// Evaluate every link of `act` under `model`.
pub fn evaluate_links(
    state: &NetworkState,
    cfg: &NetworkConfig,
    act: &Activity,
    model: Model,
    rng: &mut ChaCha8Rng,
) -> SlotOutcome {
    let links = (0..act.links.len())
        .map(|i| {
            let (t, r) = act.links[i];
            let success = match model {
                Model::Pairwise => pairwise_success(state, cfg, act, i),
                Model::Multi => match cfg.fading {
                    Fading::None => multi_success(state, cfg, act, i, || 1.0),
                    Fading::Rayleigh => multi_success(state, cfg, act, i, || exp1(rng)),
                },
            };
            LinkOutcome {
                tx: t,
                rx: r,
                distance: state.distance(t as usize, r as usize),
                success,
            }
        })
        .collect();
    SlotOutcome { links }
}

/// Random stream of slot `slot` for a configuration seed.
pub fn slot_rng(seed: u64, slot: u64) -> ChaCha8Rng {
    substream(derive_seed(seed, &[SLOT_LABEL]), slot)
}

/// Simulate one slot.
pub fn run_slot(state: &NetworkState, cfg: &NetworkConfig, slot: u64) -> SlotOutcome {
    let mut rng = slot_rng(cfg.seed, slot);
    let act = draw_activity(state, cfg.p_t, &mut rng);
    evaluate_links(state, cfg, &act, cfg.model, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinStats {
    pub lo: f64,
    pub hi: f64,
    pub links: u64,
    pub successes: u64,
    pub p_emp: f64,
    pub std_error: f64,
    pub bound_lo: Option<f64>,
    pub bound_hi: Option<f64>,
}

impl BinStats {
    /// Whether `p_emp` lies in the bracket widened by `k` standard errors.
    pub fn within(&self, k: f64) -> Option<bool> {
        match (self.links, self.bound_lo, self.bound_hi) {
            (0, _, _) => None,
            (_, Some(lo), Some(hi)) => {
                Some(self.p_emp >= lo - k * self.std_error && self.p_emp <= hi + k * self.std_error)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputStats {
    pub slots: u64,
    /// Mean successes per slot.
    pub eta_tt: f64,
    pub eta_tt_se: f64,
    /// Mean successful bit-distance per slot.
    pub eta_tr: f64,
    pub eta_tr_se: f64,
    pub links: u64,
    pub successes: u64,
    pub bins: Vec<BinStats>,
    /// Interference width used by the bin bounds.
    pub bound_width: Option<f64>,
}

#[derive(Clone)]
struct Partial {
    links: [u64; LENGTH_BINS],
    hits: [u64; LENGTH_BINS],
    tt: f64,
    tt2: f64,
    tr: f64,
    tr2: f64,
}

impl Partial {
    fn zero() -> Self {
        Partial {
            links: [0; LENGTH_BINS],
            hits: [0; LENGTH_BINS],
            tt: 0.0,
            tt2: 0.0,
            tr: 0.0,
            tr2: 0.0,
        }
    }

    fn merge(mut self, o: &Partial) -> Self {
        for b in 0..LENGTH_BINS {
            self.links[b] += o.links[b];
            self.hits[b] += o.hits[b];
        }
        self.tt += o.tt;
        self.tt2 += o.tt2;
        self.tr += o.tr;
        self.tr2 += o.tr2;
        self
    }
}

fn bin_of(d: f64, r: f64) -> usize {
    ((d / r * LENGTH_BINS as f64) as usize).min(LENGTH_BINS - 1)
}

/// Width entering the link bracket: `W_B(tx) · W_B(rx)` for the `h = 2`
/// distance law, times `F(α)` under Rayleigh fading. `None` if `F(α)`
/// diverges.
pub fn bound_width(cfg: &NetworkConfig) -> Result<Option<f64>> {
    let law = DistanceLaw::basis(2.0)?;
    let w = |p: &AntennaPattern| -> Result<f64> {
        if p.is_omni() {
            Ok(1.0)
        } else {
            Ok(quadrature_beam_width(p, &law, cfg.alpha, DEFAULT_GRID, QUADRATURE_POINTS)?.value)
        }
    };
    let base = w(&cfg.tx_pattern)? * w(&cfg.rx_pattern)?;
    Ok(match (cfg.model, cfg.fading) {
        (Model::Multi, Fading::Rayleigh) => f_alpha(cfg.alpha)?.value().map(|f| f * base),
        _ => Some(base),
    })
}

/// `(1−p_t) M (1 − c₁p_t d_hi² W)^{n−2}` and `(1−p_t)(1 − c₁p_t d_lo² W)^{n−2}`.
pub fn link_bracket(state: &NetworkState, p_t: f64, width: f64, d_lo: f64, d_hi: f64) -> (f64, f64) {
    let c1 = state.guard.c1;
    let e = state.n() as f64 - 2.0;
    let pow = |d: f64| (1.0 - c1 * p_t * d * d * width).max(0.0).powf(e);
    let lo = (1.0 - p_t) * state.receiver_factor(p_t) * pow(d_hi);
    let hi = (1.0 - p_t) * pow(d_lo);
    (lo, hi)
}

/// Average throughput over `cfg.slots` slots with per-bin success rates.
pub fn estimate_throughput(state: &NetworkState, cfg: &NetworkConfig) -> Result<ThroughputStats> {
    cfg.validate()?;
    if state.n() != cfg.n {
        return Err(Error::invalid("network state does not match the configured n"));
    }
    let chunks = cfg.slots.div_ceil(SLOT_CHUNK);
    let parts: Vec<Partial> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Partial::zero();
            for slot in c * SLOT_CHUNK..((c + 1) * SLOT_CHUNK).min(cfg.slots) {
                let out = run_slot(state, cfg, slot);
                for l in &out.links {
                    let b = bin_of(l.distance, cfg.r);
                    acc.links[b] += 1;
                    acc.hits[b] += l.success as u64;
                }
                let tt = out.successes() as f64;
                let tr = out.transport();
                acc.tt += tt;
                acc.tt2 += tt * tt;
                acc.tr += tr;
                acc.tr2 += tr * tr;
            }
            acc
        })
        .collect();
    let total = parts.iter().fold(Partial::zero(), Partial::merge);
    let s = cfg.slots as f64;
    let mean_se = |sum: f64, sum2: f64| {
        let m = sum / s;
        let var = if cfg.slots > 1 {
            ((sum2 - s * m * m) / (s - 1.0)).max(0.0)
        } else {
            0.0
        };
        (m, (var / s).sqrt())
    };
    let (eta_tt, eta_tt_se) = mean_se(total.tt, total.tt2);
    let (eta_tr, eta_tr_se) = mean_se(total.tr, total.tr2);
    let width = bound_width(cfg)?;
    let step = cfg.r / LENGTH_BINS as f64;
    let bins = (0..LENGTH_BINS)
        .map(|b| {
            let (links, hits) = (total.links[b], total.hits[b]);
            let p = if links > 0 {
                hits as f64 / links as f64
            } else {
                f64::NAN
            };
            let (lo, hi) = (step * b as f64, step * (b + 1) as f64);
            let bracket = width.map(|w| link_bracket(state, cfg.p_t, w, lo, hi));
            BinStats {
                lo,
                hi,
                links,
                successes: hits,
                p_emp: p,
                std_error: if links > 0 {
                    (p * (1.0 - p) / links as f64).sqrt()
                } else {
                    f64::NAN
                },
                bound_lo: bracket.map(|b| b.0),
                bound_hi: bracket.map(|b| b.1),
            }
        })
        .collect();
    Ok(ThroughputStats {
        slots: cfg.slots,
        eta_tt,
        eta_tt_se,
        eta_tr,
        eta_tr_se,
        links: total.links.iter().sum(),
        successes: total.hits.iter().sum(),
        bins,
        bound_width: width,
    })
}

/// How `(p_t, r)` are chosen for each network size of a capacity curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ParamRule {
    /// Use the template's `p_t` and `r`.
    Fixed,
    /// Fixed `p_t` with the connectivity range `r = √(ln n / n)`.
    Connectivity { p_t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityRow {
    pub n: usize,
    pub p_t: f64,
    pub r: f64,
    pub eta_tt: f64,
    pub eta_tt_se: f64,
    pub eta_tr: f64,
    pub eta_tr_se: f64,
}

pub fn capacity_curve(template: &NetworkConfig, n_list: &[usize], rule: ParamRule) -> Result<Vec<CapacityRow>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n list must be non-empty and strictly increasing"));
    }
    n_list
        .iter()
        .map(|&n| {
            let mut cfg = template.clone();
            cfg.n = n;
            if let ParamRule::Connectivity { p_t } = rule {
                cfg.p_t = p_t;
                cfg.r = crate::analytic::connectivity_range(n as u64).min(FRAC_1_SQRT_2);
            }
            let state = generate_network(&cfg)?;
            let st = estimate_throughput(&state, &cfg)?;
            Ok(CapacityRow {
                n,
                p_t: cfg.p_t,
                r: cfg.r,
                eta_tt: st.eta_tt,
                eta_tt_se: st.eta_tt_se,
                eta_tr: st.eta_tr,
                eta_tr_se: st.eta_tr_se,
            })
        })
        .collect()
}

fn check_link(state: &NetworkState, tx: usize, rx: usize) -> Result<()> {
    if tx >= state.n() || rx >= state.n() || tx == rx {
        return Err(Error::invalid(format!("invalid link {tx} -> {rx}")));
    }
    Ok(())
}

/// Interference of node `k` on the link `tx → rx` when `k` transmits to a
/// uniformly drawn neighbour, scaled by `|T_k − R|^{-α}`.
fn draw_interference(
    state: &NetworkState,
    cfg: &NetworkConfig,
    tx: usize,
    rx: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let nb = state.neighbors(k);
    let rk = nb[rng.random_range(0..nb.len())] as usize;
    let f = match cfg.fading {
        Fading::Rayleigh => exp1(rng),
        Fading::None => 1.0,
    };
    let (dist, theta, phi) = interferer_geometry(&state.positions, tx, rx, k, rk);
    let g = cfg.rx_pattern.gain(theta) * cfg.tx_pattern.gain(phi);
    if g > 0.0 {
        f * g / dist.powf(cfg.alpha)
    } else {
        0.0
    }
}

/// Success rate of the link `tx → rx` under the multi model, with `tx` forced
/// to transmit, `rx` forced to listen and all other nodes following ALOHA.
pub fn pinned_link_success(
    state: &NetworkState,
    cfg: &NetworkConfig,
    tx: usize,
    rx: usize,
    slots: u64,
    seed: u64,
) -> Result<EbwEstimate> {
    check_link(state, tx, rx)?;
    let d_alpha = state.distance(tx, rx).powf(cfg.alpha);
    let hits = bernoulli_count(slots, seed, |rng| {
        let mut interference = 0.0;
        for k in 0..state.n() {
            if k == tx || k == rx {
                continue;
            }
            let active = rng.random::<f64>() < cfg.p_t;
            if active && state.k_pr(k) > 0 {
                interference += draw_interference(state, cfg, tx, rx, k, rng);
            }
        }
        let f0 = match cfg.fading {
            Fading::Rayleigh => exp1(rng),
            Fading::None => 1.0,
        };
        f0 / d_alpha >= cfg.sir0 * interference
    });
    Ok(EbwEstimate::from_counts(hits, slots, seed))
}

/// `Pr(S / I_k ≥ SIR₀)` for a single node `k` against the pinned link.
pub fn interferer_exceedance(
    state: &NetworkState,
    cfg: &NetworkConfig,
    tx: usize,
    rx: usize,
    k: usize,
    slots: u64,
    seed: u64,
) -> Result<EbwEstimate> {
    check_link(state, tx, rx)?;
    if k >= state.n() || k == tx || k == rx {
        return Err(Error::invalid(format!("invalid interferer {k}")));
    }
    let d_alpha = state.distance(tx, rx).powf(cfg.alpha);
    let hits = bernoulli_count(slots, seed, |rng| {
        let active = rng.random::<f64>() < cfg.p_t;
        if !active || state.k_pr(k) == 0 {
            return true;
        }
        let i = draw_interference(state, cfg, tx, rx, k, rng);
        let f0 = match cfg.fading {
            Fading::Rayleigh => exp1(rng),
            Fading::None => 1.0,
        };
        f0 / d_alpha >= cfg.sir0 * i
    });
    Ok(EbwEstimate::from_counts(hits, slots, seed))
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductReport {
    pub tx: usize,
    pub rx: usize,
    pub multi: EbwEstimate,
    pub product: f64,
    pub product_std_error: f64,
    pub per_node: Vec<(usize, EbwEstimate)>,
    /// `|multi − product|` in combined standard errors.
    pub z: f64,
    pub pass: bool,
}

/// Compare the cumulative-interference success rate of one link with the
/// product of single-interferer exceedance probabilities.
pub fn rayleigh_product_check(
    state: &NetworkState,
    cfg: &NetworkConfig,
    tx: usize,
    rx: usize,
    slots: u64,
    seed: u64,
) -> Result<ProductReport> {
    let multi = pinned_link_success(state, cfg, tx, rx, slots, derive_seed(seed, &[0]))?;
    let per_node = (0..state.n())
        .filter(|&k| k != tx && k != rx)
        .map(|k| {
            Ok((
                k,
                interferer_exceedance(state, cfg, tx, rx, k, slots, derive_seed(seed, &[k as u64 + 1]))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let product: f64 = per_node.iter().map(|(_, e)| e.value).product();
    let rel2: f64 = per_node
        .iter()
        .filter(|(_, e)| e.value > 0.0)
        .map(|(_, e)| (e.std_error / e.value).powi(2))
        .sum();
    let product_std_error = product * rel2.sqrt();
    let se = (multi.std_error.powi(2) + product_std_error.powi(2)).sqrt();
    let diff = (multi.value - product).abs();
    let z = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(ProductReport {
        tx,
        rx,
        multi,
        product,
        product_std_error,
        per_node,
        z,
        pass: z <= 3.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn esnla4() -> AntennaPattern {
        AntennaPattern::esnla(4, 0.5).unwrap()
    }

    proptest! {
        #[test]
        fn torus_metric_symmetric(ax in 0.0f64..1.0, ay in 0.0f64..1.0, bx in 0.0f64..1.0, by in 0.0f64..1.0) {
            let (a, b) = ([ax, ay], [bx, by]);
            let d = torus_distance(a, b);
            prop_assert!((d - torus_distance(b, a)).abs() < 1e-15);
            prop_assert!(d <= FRAC_1_SQRT_2 + 1e-15);
        }
    }

    #[test]
    fn config_validation() {
        let ok = NetworkConfig::new(100, 0.1, 0.1);
        assert!(ok.validate().is_ok());
        let mut c = ok.clone();
        c.sir0 = 0.5;
        assert!(c.validate().unwrap_err().to_string().contains("SIR0 > 1"));
        let mut c = ok.clone();
        c.r = 0.8;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.p_t = 0.7;
        assert!(c.validate().is_err());
        c.allow_large_pt = true;
        assert!(c.validate().is_ok());
        let mut c = ok;
        c.slots = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn mean_neighbour_count() {
        let cfg = NetworkConfig::new(1000, 0.06, 0.05);
        let mut means = Vec::new();
        for seed in 0..8 {
            let mut c = cfg.clone();
            c.seed = seed;
            let st = generate_network(&c).unwrap();
            assert!(st
                .positions()
                .iter()
                .all(|p| (0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1])));
            means.push(st.mean_k_pr());
        }
        let expected = 999.0 * PI * 0.06 * 0.06;
        let avg = means.iter().sum::<f64>() / means.len() as f64;
        // Per-run sd of the mean is about sqrt(2 * 11.3 / 1000) ≈ 0.15.
        assert!((avg - expected).abs() < 0.3, "{avg} vs {expected}");
    }

    #[test]
    fn neighbour_lists_match_brute_force() {
        let mut cfg = NetworkConfig::new(300, 0.09, 0.1);
        cfg.seed = 4;
        let st = generate_network(&cfg).unwrap();
        for i in 0..st.n() {
            let brute: Vec<u32> = (0..st.n())
                .filter(|&j| j != i && st.distance(i, j) <= 0.09)
                .map(|j| j as u32)
                .collect();
            assert_eq!(st.neighbors(i), brute.as_slice());
        }
    }

    #[test]
    fn guard_zone_cached() {
        let st = NetworkState::from_positions(vec![[0.1, 0.1], [0.2, 0.2]], 0.3, 10.0, 4.0).unwrap();
        assert!((st.guard().delta - 0.778).abs() < 5e-4);
        assert!((st.guard().c1 - 9.935).abs() < 5e-4);
        assert!(NetworkState::from_positions(vec![[1.0, 0.1]], 0.3, 10.0, 4.0).is_err());
    }

    #[test]
    fn two_nodes_succeed_unless_receiver_transmits() {
        let st = NetworkState::from_positions(vec![[0.1, 0.1], [0.15, 0.1]], 0.2, 10.0, 4.0).unwrap();
        let mut cfg = NetworkConfig::new(2, 0.2, 0.3);
        cfg.slots = 40_000;
        cfg.seed = 9;
        let stats = estimate_throughput(&st, &cfg).unwrap();
        let p = stats.successes as f64 / stats.links as f64;
        let se = (0.7f64 * 0.3 / stats.links as f64).sqrt();
        assert!((p - 0.7).abs() < 4.0 * se, "{p}");
    }

    #[test]
    fn zero_activity() {
        let mut cfg = NetworkConfig::new(200, 0.1, 0.0);
        cfg.slots = 50;
        let st = generate_network(&cfg).unwrap();
        let s = estimate_throughput(&st, &cfg).unwrap();
        assert_eq!((s.eta_tt, s.eta_tr, s.links), (0.0, 0.0, 0));
    }

    #[test]
    fn pairwise_boundaries() {
        // Receiver at origin side, transmitter at distance 0.1, interferer at
        // exactly (1+Δ)·0.1 from the receiver with Δ = 1.
        let pos = vec![[0.5, 0.5], [0.6, 0.5], [0.3, 0.5], [0.2, 0.5]];
        let st = NetworkState::from_positions(pos, 0.3, 16.0, 4.0).unwrap();
        let cfg = NetworkConfig {
            sir0: 16.0,
            ..NetworkConfig::new(4, 0.3, 0.1)
        };
        let act = Activity::from_links(&st, vec![(1, 0), (2, 3)]);
        assert!(pairwise_success(&st, &cfg, &act, 0));
        let single = Activity::from_links(&st, vec![(1, 0)]);
        assert!(pairwise_success(&st, &cfg, &single, 0));

        // Interferer closer than the guard distance fails with omni antennas.
        let pos = vec![[0.5, 0.5], [0.6, 0.5], [0.35, 0.5], [0.25, 0.5]];
        let st = NetworkState::from_positions(pos, 0.3, 16.0, 4.0).unwrap();
        let act = Activity::from_links(&st, vec![(1, 0), (2, 3)]);
        assert!(!pairwise_success(&st, &cfg, &act, 0));

        // ... but survives when it sits in a receive null. The receiver looks
        // along +x towards its transmitter; the interferer is at +y.
        let rx = AntennaPattern::sector(0.25).unwrap();
        let pos = vec![[0.5, 0.5], [0.6, 0.5], [0.5, 0.65], [0.9, 0.9]];
        let st = NetworkState::from_positions(pos, 0.6, 16.0, 4.0).unwrap();
        let cfg = NetworkConfig {
            sir0: 16.0,
            rx_pattern: rx,
            ..NetworkConfig::new(4, 0.6, 0.1)
        };
        let act = Activity::from_links(&st, vec![(1, 0), (2, 3)]);
        assert!(pairwise_success(&st, &cfg, &act, 0));
        let omni = NetworkConfig {
            sir0: 16.0,
            ..NetworkConfig::new(4, 0.6, 0.1)
        };
        assert!(!pairwise_success(&st, &omni, &act, 0));
    }

    #[test]
    fn conflict_rule_for_directional_receivers() {
        let pos = vec![[0.5, 0.5], [0.6, 0.5], [0.5, 0.9]];
        let st = NetworkState::from_positions(pos, 0.45, 10.0, 4.0).unwrap();
        let act = Activity::from_links(&st, vec![(1, 0), (2, 0)]);
        let dir = NetworkConfig {
            rx_pattern: esnla4(),
            ..NetworkConfig::new(3, 0.45, 0.1)
        };
        assert!(!pairwise_success(&st, &dir, &act, 0));
        assert!(!pairwise_success(&st, &dir, &act, 1));
        let omni = NetworkConfig::new(3, 0.45, 0.1);
        // The near transmitter captures the omni receiver.
        assert!(pairwise_success(&st, &omni, &act, 0));
        assert!(!pairwise_success(&st, &omni, &act, 1));
    }

    #[test]
    fn multi_without_interferers_succeeds() {
        let st = NetworkState::from_positions(vec![[0.1, 0.1], [0.15, 0.1], [0.7, 0.7]], 0.2, 10.0, 4.0).unwrap();
        let cfg = NetworkConfig {
            model: Model::Multi,
            fading: Fading::Rayleigh,
            ..NetworkConfig::new(3, 0.2, 0.1)
        };
        let act = Activity::from_links(&st, vec![(0, 1)]);
        let mut rng = substream(1, 0);
        for _ in 0..100 {
            assert!(multi_success(&st, &cfg, &act, 0, || exp1(&mut rng)));
        }
    }

    #[test]
    fn slot_invariants() {
        let mut cfg = NetworkConfig::new(400, 0.1, 0.4);
        cfg.tx_pattern = esnla4();
        cfg.rx_pattern = esnla4();
        cfg.seed = 21;
        let st = generate_network(&cfg).unwrap();
        let mut any = false;
        for slot in 0..50 {
            let mut rng = slot_rng(cfg.seed, slot);
            let act = draw_activity(&st, cfg.p_t, &mut rng);
            let pair = evaluate_links(&st, &cfg, &act, Model::Pairwise, &mut rng);
            let multi = evaluate_links(&st, &cfg, &act, Model::Multi, &mut rng);
            assert!(pair.successes() <= st.n() / 2);
            for (p, m) in pair.links.iter().zip(&multi.links) {
                assert!(!m.success || p.success, "multi success without pairwise success");
                any |= p.success && !m.success;
            }
            let txs: Vec<u32> = pair.links.iter().map(|l| l.tx).collect();
            for l in pair.links.iter().filter(|l| l.success) {
                assert!(!txs.contains(&l.rx));
                assert!(l.distance <= cfg.r + 1e-12);
            }
            assert!(pair.transport() <= FRAC_1_SQRT_2 * pair.successes() as f64);
        }
        assert!(any);
    }

    #[test]
    fn receiver_factor_bound() {
        for seed in 0..5 {
            let mut cfg = NetworkConfig::new(1000, 0.06, 0.05);
            cfg.seed = seed;
            let st = generate_network(&cfg).unwrap();
            let c4 = st.density_ratio_max();
            let (a, b) = (0, st.neighbors(0).first().copied().unwrap_or(1) as usize);
            let m = st.receiver_factor_excluding(cfg.p_t, a, b);
            assert!(m < 1.0 && m >= (-c4 * cfg.p_t).exp(), "m={m} c4={c4}");
            assert!(st.receiver_factor(cfg.p_t) <= m);
        }
    }

    #[test]
    fn throughput_is_thread_count_invariant() {
        let mut cfg = NetworkConfig::new(300, 0.1, 0.2);
        cfg.tx_pattern = esnla4();
        cfg.slots = 300;
        cfg.seed = 5;
        let st = generate_network(&cfg).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| estimate_throughput(&st, &cfg).unwrap());
        let b = four.install(|| estimate_throughput(&st, &cfg).unwrap());
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn product_identity_small_network() {
        let mut cfg = NetworkConfig::new(12, 0.45, 0.3);
        cfg.model = Model::Multi;
        cfg.fading = Fading::Rayleigh;
        cfg.tx_pattern = esnla4();
        cfg.seed = 2;
        let st = generate_network(&cfg).unwrap();
        let rx = st.neighbors(0)[0] as usize;
        let rep = rayleigh_product_check(&st, &cfg, 0, rx, 100_000, 7).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rayleigh_product_check(&st, &cfg, 0, 0, 10, 7).is_err());
    }

    #[test]
    fn capacity_curve_single_row() {
        let mut cfg = NetworkConfig::new(100, 0.1, 0.5);
        cfg.slots = 20;
        let rows = capacity_curve(&cfg, &[200], ParamRule::Connectivity { p_t: 0.5 }).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].r - (200f64.ln() / 200.0).sqrt()).abs() < 1e-15);
        assert!(capacity_curve(&cfg, &[200, 100], ParamRule::Fixed).is_err());
    }
}
