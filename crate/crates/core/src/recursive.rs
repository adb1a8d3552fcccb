//! Multi-round edge flipping: after the first coupling pass, pairs whose inner
//! products still sit in a shrinking window around `tau` are re-flipped with
//! fresh fair coins, giving the recursively planted representation of the
//! geometric graph.

use std::io::Write;

use crate::coupling::{couple_embedding, CouplingConfig, CouplingOutput, MarginRule};
use crate::error::{Error, Result};
use crate::flip::flip_interval_in_place;
use crate::graph::{pair_index, sample_er, Graph, LatentEmbedding};
use crate::graphstats::signed_triangles;
use crate::rng::stream;
use crate::sphere_law::{Interval, SphericalLaw};
use crate::stats::{ks_two_sample, variance, KsResult};

pub const DEFAULT_BALANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSchedule {
    /// Round `t` (1-based) uses `rounds[t - 1]`; a zero-width entry is a no-op round.
    pub rounds: Vec<Interval>,
    pub balance_tol: f64,
}

impl IntervalSchedule {
    /// `T` rounds that never flip anything.
    pub fn inert(law: &SphericalLaw, t: usize) -> Self {
        let point = Interval { lo: law.tau(), hi: law.tau() };
        IntervalSchedule { rounds: vec![point; t], balance_tol: DEFAULT_BALANCE_TOL }
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.width()).collect()
    }
}

/// Length `L` below `tau` whose mass equals `target`.
fn below_length_for_mass(law: &SphericalLaw, target: f64) -> Result<f64> {
    let tau = law.tau();
    let total = law.mass(-1.0, tau)?;
    if target >= total {
        return Err(Error::ScheduleDegenerate(format!("mass {target} exceeds what lies below tau")));
    }
    let (mut a, mut b) = (0.0, 1.0 + tau);
    let mut l = target / law.pdf(tau)?.max(1e-300);
    for _ in 0..200 {
        if !(l > a && l < b) {
            l = 0.5 * (a + b);
        }
        let g = law.mass(tau - l, tau)? - target;
        if g > 0.0 {
            b = l;
        } else {
            a = l;
        }
        let next = l - g / law.pdf(tau - l)?.max(1e-300);
        if (next - l).abs() <= 1e-15 * l || b - a <= 1e-15 * b {
            return Ok(next.clamp(a, b));
        }
        l = next;
    }
    Ok(l)
}

/// Length `U` above `tau` whose mass equals `target`.
fn above_length_for_mass(law: &SphericalLaw, target: f64) -> Result<f64> {
    let tau = law.tau();
    let total = law.mass(tau, 1.0)?;
    if target >= total {
        return Err(Error::ScheduleDegenerate(format!("mass {target} exceeds what lies above tau")));
    }
    let (mut a, mut b) = (0.0, 1.0 - tau);
    let mut u = target / law.pdf(tau)?.max(1e-300);
    for _ in 0..200 {
        if !(u > a && u < b) {
            u = 0.5 * (a + b);
        }
        let g = law.mass(tau, tau + u)? - target;
        if g > 0.0 {
            b = u;
        } else {
            a = u;
        }
        let next = u - g / law.pdf(tau + u)?.max(1e-300);
        if (next - u).abs() <= 1e-15 * u || b - a <= 1e-15 * b {
            return Ok(next.clamp(a, b));
        }
        u = next;
    }
    Ok(u)
}

fn balanced_from_upper(law: &SphericalLaw, u: f64) -> Result<Interval> {
    if !(law.tau() + u <= 1.0) {
        return Err(Error::ScheduleDegenerate(format!("upper length {u} leaves the sphere")));
    }
    let l = below_length_for_mass(law, law.mass(law.tau(), law.tau() + u)?)?;
    Interval::around_tau(law, l, u)
}

fn check_round(law: &SphericalLaw, iv: &Interval, tol: f64, t: usize) -> Result<()> {
    let mass = law.mass(iv.lo, iv.hi)?;
    if mass < law.cdf_tol() {
        return Err(Error::ScheduleDegenerate(format!("round {t} interval carries mass {mass:e}")));
    }
    let below = law.mass(iv.lo, law.tau())? / mass;
    // masses are differences of tail values, so tiny intervals cannot be
    // balanced more finely than the roundoff of those tails
    let scale = law.cdf(iv.lo)?.min(law.sf(iv.lo)?);
    let floor = 16.0 * f64::EPSILON * scale / mass;
    if (below - 0.5).abs() > tol.max(floor) {
        return Err(Error::ScheduleDegenerate(format!("round {t} is unbalanced: P[X <= tau | I] = {below}")));
    }
    Ok(())
}

/// Next upper half-length from the current interval length.
pub fn next_upper(n: usize, p: f64, d: usize, c: f64, len: f64) -> f64 {
    let ln = (n.max(2) as f64).ln();
    let d = d as f64;
    let a = ln.powf(0.75) * (n as f64 * p * len).sqrt() / d.powf(0.25);
    let b = ln / d.sqrt();
    c * len * a.max(b)
}

fn first_round(law: &SphericalLaw, margin: f64) -> Result<Interval> {
    if !(margin > 0.0) {
        return Err(Error::ScheduleDegenerate(format!("first-round margin {margin} must be positive")));
    }
    let tau = law.tau();
    let below = law.mass(tau - margin, tau)?;
    let above = law.mass(tau, tau + margin)?;
    // Prefer covering the margin on both sides by stretching the lighter side.
    // When the margin below tau already outweighs everything above tau (wide
    // margins at moderate d), keep the margin above and shrink the lower side.
    if below >= above {
        if below < 0.999 * law.mass(tau, 1.0)? {
            Interval::around_tau(law, margin, above_length_for_mass(law, below)?)
        } else {
            Interval::around_tau(law, below_length_for_mass(law, above)?, margin)
        }
    } else if above < 0.999 * law.mass(-1.0, tau)? {
        Interval::around_tau(law, below_length_for_mass(law, above)?, margin)
    } else {
        Interval::around_tau(law, margin, above_length_for_mass(law, below)?)
    }
}

/// `rounds` intervals starting from the first-pass margin `margin` and
/// shrinking by the recursion with constant `c`.
pub fn build_schedule(law: &SphericalLaw, n: usize, c: f64, rounds: usize, margin: f64) -> Result<IntervalSchedule> {
    build(law, n, c, rounds, margin, None)
}

/// Like [`build_schedule`] but stops once an interval's mass drops below
/// `1 / n^3` (that round is still included), capped at `max_rounds`.
pub fn build_schedule_until(
    law: &SphericalLaw,
    n: usize,
    c: f64,
    max_rounds: usize,
    margin: f64,
) -> Result<IntervalSchedule> {
    build(law, n, c, max_rounds, margin, Some(1.0 / (n.max(2) as f64).powi(3)))
}

fn build(
    law: &SphericalLaw,
    n: usize,
    c: f64,
    rounds: usize,
    margin: f64,
    stop_mass: Option<f64>,
) -> Result<IntervalSchedule> {
    if !(c > 0.0) || rounds == 0 {
        return Err(Error::InvalidConfig(format!("schedule needs C > 0 and T >= 1 (C = {c}, T = {rounds})")));
    }
    let tol = DEFAULT_BALANCE_TOL;
    let mut out = vec![first_round(law, margin)?];
    check_round(law, &out[0], tol, 1)?;
    while out.len() < rounds {
        let last = *out.last().unwrap();
        if let Some(stop) = stop_mass {
            if law.mass(last.lo, last.hi)? < stop {
                break;
            }
        }
        let u = next_upper(n, law.p(), law.d(), c, last.width());
        let next = balanced_from_upper(law, u)?;
        let t = out.len() + 1;
        if !(next.width() < last.width()) {
            return Err(Error::ScheduleDegenerate(format!(
                "round {t} length {} does not shrink below {}",
                next.width(),
                last.width()
            )));
        }
        check_round(law, &next, tol, t)?;
        out.push(next);
    }
    Ok(IntervalSchedule { rounds: out, balance_tol: tol })
}

/// Where the coins of rounds `t >= 1` come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundBits {
    /// Fresh `G(n, 1/2)` per round.
    Fresh,
    /// Reuse the first-pass input `H^0` (breaks independence; a negative control).
    ReuseInitial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub t: usize,
    /// Pairs `(i, j)`, `i < j`, visited with inner product inside the interval.
    pub defect_pairs: Vec<(usize, usize)>,
    pub interval: Interval,
    pub flips_applied: usize,
}

impl RoundReport {
    pub fn defect_count(&self) -> usize {
        self.defect_pairs.len()
    }
}

pub fn write_reports_csv<W: Write>(reports: &[RoundReport], mut w: W) -> Result<()> {
    writeln!(w, "t,defect_count,interval_lo,interval_hi,flips_applied")?;
    for r in reports {
        writeln!(w, "{},{},{},{},{}", r.t, r.defect_count(), r.interval.lo, r.interval.hi, r.flips_applied)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct MultiRoundOutput {
    /// The first pass, before any extra round.
    pub first: CouplingOutput,
    pub embedding: LatentEmbedding,
    pub graph: Graph,
    pub reports: Vec<RoundReport>,
}

/// One extra round of interval flips over all pairs in lexicographic order.
pub fn run_round(
    law: &SphericalLaw,
    emb: &mut LatentEmbedding,
    bits: &Graph,
    iv: &Interval,
    t: usize,
) -> Result<RoundReport> {
    let n = emb.n();
    let d = emb.d();
    let tau = law.tau();
    let mut report = RoundReport { t, defect_pairs: Vec::new(), interval: *iv, flips_applied: 0 };
    if iv.width() <= 0.0 {
        return Ok(report);
    }
    for j in 1..n {
        let (done, rest) = emb.split_at_column_mut(j);
        let vj = &mut rest[..d];
        for i in 0..j {
            let vi = &done[i * d..(i + 1) * d];
            let bit = bits.has_edge(i, j);
            let rec = flip_interval_in_place(law, vi, vj, bit, iv)?;
            if iv.contains(rec.pre_inner) {
                report.defect_pairs.push((i, j));
                if (rec.post_inner >= tau) != bit {
                    return Err(Error::Numerical(format!("round {t} flip of ({i}, {j}) missed its side")));
                }
            }
            if rec.flipped {
                report.flips_applied += 1;
            }
        }
    }
    report.defect_pairs.sort_unstable();
    Ok(report)
}

/// First pass on `H^0 ~ G(n, p)` followed by the scheduled rounds.
///
/// `H^0` and the initial vectors use the same streams as
/// [`crate::coupling::run_coupling`], so the first pass is identical to a
/// single-round run with the same seed and trial.
pub fn multi_round_couple(
    seed: u64,
    trial: u64,
    n: usize,
    p: f64,
    d: usize,
    schedule: &IntervalSchedule,
    bits: RoundBits,
) -> Result<MultiRoundOutput> {
    let cfg = CouplingConfig::new(n, d, p).with_seed(seed).with_margin(MarginRule::MaxDrift);
    cfg.validate()?;
    let law = cfg.law()?;
    let h0 = sample_er(&mut stream(seed, "coupling.input", trial), n, p)?;
    let emb0 = LatentEmbedding::sample(&mut stream(seed, "coupling.latent", trial), n, d);
    let first = couple_embedding(&law, &h0, emb0, &cfg)?;
    continue_rounds(&law, first, seed, trial, schedule, bits)
}

/// Runs the scheduled rounds on top of an existing first pass.
pub fn continue_rounds(
    law: &SphericalLaw,
    first: CouplingOutput,
    seed: u64,
    trial: u64,
    schedule: &IntervalSchedule,
    bits: RoundBits,
) -> Result<MultiRoundOutput> {
    let n = first.n();
    let mut emb = first.embedding.clone();
    let mut reports = Vec::with_capacity(schedule.len());
    for (k, iv) in schedule.rounds.iter().enumerate() {
        let t = k + 1;
        let coins = match bits {
            RoundBits::Fresh => sample_er(&mut stream(seed, &format!("recursive.round{t}"), trial), n, 0.5)?,
            RoundBits::ReuseInitial => first.input.clone(),
        };
        reports.push(run_round(law, &mut emb, &coins, iv, t)?);
    }
    let graph = realize_pairs(&emb, law.tau());
    Ok(MultiRoundOutput { first, embedding: emb, graph, reports })
}

fn realize_pairs(emb: &LatentEmbedding, tau: f64) -> Graph {
    let n = emb.n();
    let mut g = Graph::empty(n);
    for j in 1..n {
        for i in 0..j {
            if emb.inner(i, j) >= tau {
                g.set_edge(i, j, true);
            }
        }
    }
    g
}

/// `|F_t & F_{t+1}| / |F_t|` and `|F_t & F_{t+1}| / |F_{t+1}|` for consecutive
/// rounds.
pub fn defect_overlaps(reports: &[RoundReport]) -> Vec<(f64, f64)> {
    reports
        .windows(2)
        .map(|w| {
            let next: std::collections::HashSet<usize> =
                w[1].defect_pairs.iter().map(|&(i, j)| pair_index(i, j)).collect();
            let common = w[0].defect_pairs.iter().filter(|&&(i, j)| next.contains(&pair_index(i, j))).count();
            let frac = |c: usize, total: usize| if total == 0 { f64::NAN } else { c as f64 / total as f64 };
            (frac(common, w[0].defect_count()), frac(common, w[1].defect_count()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditReport {
    pub edge_count: KsResult,
    pub signed_triangles: KsResult,
    pub degree_variance: KsResult,
}

impl AuditReport {
    pub fn passes(&self, alpha: f64) -> bool {
        [self.edge_count, self.signed_triangles, self.degree_variance].iter().all(|r| r.p_value >= alpha)
    }
}

/// Two-sample comparisons of edge counts, signed triangles (centred at `p`)
/// and degree variances.
pub fn distribution_audit(outputs: &[Graph], reference: &[Graph], p: f64) -> Result<AuditReport> {
    if outputs.is_empty() || reference.is_empty() {
        return Err(Error::Domain("audit needs two nonempty samples".into()));
    }
    let n = outputs[0].n();
    if outputs.iter().chain(reference).any(|g| g.n() != n) {
        return Err(Error::Domain("audit samples must share the vertex count".into()));
    }
    let stats = |gs: &[Graph]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let edges = gs.iter().map(|g| g.edge_count() as f64).collect();
        let tri = gs.iter().map(|g| signed_triangles(g, p)).collect();
        let dv = gs
            .iter()
            .map(|g| {
                let deg: Vec<f64> = g.degrees().into_iter().map(|x| x as f64).collect();
                if deg.len() > 1 {
                    variance(&deg)
                } else {
                    0.0
                }
            })
            .collect();
        (edges, tri, dv)
    };
    let (ea, ta, da) = stats(outputs);
    let (eb, tb, db) = stats(reference);
    Ok(AuditReport {
        edge_count: ks_two_sample(&ea, &eb),
        signed_triangles: ks_two_sample(&ta, &tb),
        degree_variance: ks_two_sample(&da, &db),
    })
}
