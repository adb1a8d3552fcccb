//! Monte Carlo experiments: threshold curves, the three-vertex FKG failure,
//! disagreement scaling in `d`, and decider confusion tables.
//!
//! Every trial draws from its own stream keyed by the trial index, and
//! results are collected in trial order, so output does not depend on the
//! number of worker threads.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::coupling::{run_coupling, CouplingConfig, MarginRule};
use crate::error::{Error, Result};
use crate::graph::{pair_index, sample_er, sample_rgg_with, Graph, LatentEmbedding};
use crate::graphstats::{adversary_coupling, AdversaryBudget};
use crate::rng::stream;
use crate::robust::{
    decide_spectral, decide_triangle, decide_witness, Adversary, AscentOptions, Calibration, Decision,
};
use crate::sphere_law::{fill_sphere, SphericalLaw};
use crate::stats::{inverse_interpolate, isotonic_increasing, linear_fit, mean};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Property {
    Connectivity,
    /// Minimum degree at least one.
    MinDegree,
}

impl Property {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "connectivity" => Ok(Property::Connectivity),
            "min_degree" | "min-degree" => Ok(Property::MinDegree),
            _ => Err(Error::InvalidConfig(format!("unknown property '{s}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Property::Connectivity => "connectivity",
            Property::MinDegree => "min_degree",
        }
    }

    pub fn holds(&self, g: &Graph) -> bool {
        match self {
            Property::Connectivity => crate::graphstats::connectivity(g),
            Property::MinDegree => g.n() <= 1 || crate::graphstats::min_degree(g) >= 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Er,
    Rgg { d: usize },
}

impl Model {
    pub fn name(&self) -> String {
        match self {
            Model::Er => "er".into(),
            Model::Rgg { d } => format!("rgg_d{d}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThresholdCurve {
    pub property: Property,
    pub model: Model,
    pub n: usize,
    pub p_grid: Vec<f64>,
    pub trials: usize,
    /// Empirical probability that the property holds, per grid point.
    pub f: Vec<f64>,
    /// Isotonic fit of `f`.
    pub fitted: Vec<f64>,
    /// Fitted curve crosses 1/2 here.
    pub p_c: Option<f64>,
    /// `f^{-1}(0.9) - f^{-1}(0.1)` on the fitted curve.
    pub window: Option<f64>,
}

pub const WINDOW_EPS: f64 = 0.1;

impl ThresholdCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "p,f,fitted,std_err")?;
        for (k, &p) in self.p_grid.iter().enumerate() {
            let f = self.f[k];
            let se = (f * (1.0 - f) / self.trials as f64).sqrt();
            writeln!(w, "{p},{f},{},{se}", self.fitted[k])?;
        }
        Ok(())
    }
}

/// `k` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect(),
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        self.0[a.max(b)] = a.min(b);
        true
    }
}

/// For pair weights where an edge is present iff its weight is at least some
/// level, the largest level at which the property still holds.
fn critical_level(n: usize, weight: &[f64], property: Property) -> f64 {
    if n <= 1 {
        return f64::INFINITY;
    }
    match property {
        Property::Connectivity => {
            let mut order: Vec<(usize, usize)> = (1..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
            order.sort_by(|a, b| weight[pair_index(b.0, b.1)].total_cmp(&weight[pair_index(a.0, a.1)]));
            let mut uf = UnionFind::new(n);
            let mut joined = 1;
            for (i, j) in order {
                if uf.union(i, j) {
                    joined += 1;
                    if joined == n {
                        return weight[pair_index(i, j)];
                    }
                }
            }
            unreachable!("the complete graph is connected")
        }
        Property::MinDegree => (0..n)
            .map(|v| {
                (0..n)
                    .filter(|&u| u != v)
                    .map(|u| weight[pair_index(u.min(v), u.max(v))])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::INFINITY, f64::min),
    }
}

/// Per-trial indicators over the grid. ER trials draw one uniform per pair in
/// the same order as [`sample_er`]; RGG trials draw one embedding and
/// threshold its Gram matrix at each grid point's `tau`, so both models are
/// monotone in `p` within a trial.
fn threshold_trial(
    property: Property,
    model: Model,
    n: usize,
    grid: &[f64],
    taus: &[f64],
    seed: u64,
    k: u64,
) -> Vec<bool> {
    let pairs = n * n.saturating_sub(1) / 2;
    match model {
        Model::Er => {
            let mut rng = stream(seed, "threshold.er", k);
            // weight = -U so that "edge iff U < p" reads "weight > -p"
            let mut weight = vec![0.0; pairs];
            for j in 1..n {
                for i in 0..j {
                    weight[pair_index(i, j)] = -rng.random::<f64>();
                }
            }
            let level = critical_level(n, &weight, property);
            grid.iter().map(|&p| level > -p).collect()
        }
        Model::Rgg { d } => {
            let mut rng = stream(seed, "threshold.rgg", k);
            let emb = LatentEmbedding::sample(&mut rng, n, d);
            let gram = emb.gram();
            drop(emb);
            let mut weight = vec![0.0; pairs];
            for j in 1..n {
                for i in 0..j {
                    weight[pair_index(i, j)] = gram[(i, j)];
                }
            }
            let level = critical_level(n, &weight, property);
            taus.iter().map(|&t| level >= t).collect()
        }
    }
}

pub fn run_threshold(
    property: Property,
    model: Model,
    n: usize,
    p_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<ThresholdCurve> {
    if trials < 20 {
        return Err(Error::InvalidConfig(format!("threshold curves need at least 20 trials, got {trials}")));
    }
    if p_grid.is_empty() || p_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("p grid must be nonempty and strictly increasing".into()));
    }
    let taus = match model {
        Model::Er => Vec::new(),
        Model::Rgg { d } => p_grid.iter().map(|&p| SphericalLaw::new(d, p).map(|l| l.tau())).collect::<Result<_>>()?,
    };
    let rows: Vec<Vec<bool>> = (0..trials as u64)
        .into_par_iter()
        .map(|k| threshold_trial(property, model, n, p_grid, &taus, seed, k))
        .collect();
    let f: Vec<f64> = (0..p_grid.len()).map(|g| rows.iter().filter(|r| r[g]).count() as f64 / trials as f64).collect();
    let fitted = isotonic_increasing(&f, &vec![1.0; f.len()]);
    let p_c = inverse_interpolate(p_grid, &fitted, 0.5);
    let window = inverse_interpolate(p_grid, &fitted, 1.0 - WINDOW_EPS)
        .zip(inverse_interpolate(p_grid, &fitted, WINDOW_EPS))
        .map(|(hi, lo)| hi - lo);
    if p_c.is_none() {
        log::warn!("{} curve for {} never crosses 1/2 on the grid", property.name(), model.name());
    }
    Ok(ThresholdCurve { property, model, n, p_grid: p_grid.to_vec(), trials, f, fitted, p_c, window })
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn z(&self) -> f64 {
        self.value / self.se
    }
}

#[derive(Debug, Clone)]
pub struct FkgEstimate {
    pub d: usize,
    pub samples: usize,
    /// Edge-count tallies over the three pairs.
    pub counts: [u64; 4],
    /// Probability of one specific configuration with `k` edges.
    pub mu: [Estimate; 4],
    /// `mu(3) - 1/8`.
    pub a: Estimate,
    /// `mu(3) + mu(2) - 1/4`.
    pub pair_identity: Estimate,
    /// `mu(1)^2 - mu(2) mu(0)`.
    pub lattice_gap: Estimate,
    /// `sum_k C(3,k) mu(k)`.
    pub total: f64,
}

const BINOM3: [f64; 4] = [1.0, 3.0, 3.0, 1.0];
const FKG_CHUNK: usize = 10_000;

/// Three uniform vectors at `p = 1/2` (threshold 0), tallied by edge count.
pub fn run_fkg(seed: u64, d: usize, samples: usize) -> Result<FkgEstimate> {
    if d < 3 {
        return Err(Error::InvalidConfig(format!("dimension {d} below 3")));
    }
    if samples == 0 {
        return Err(Error::InvalidConfig("no samples requested".into()));
    }
    let chunks = samples.div_ceil(FKG_CHUNK);
    let partial: Vec<[u64; 4]> = (0..chunks as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, "fkg", c);
            let todo = FKG_CHUNK.min(samples - c as usize * FKG_CHUNK);
            let mut counts = [0u64; 4];
            let (mut u, mut v, mut w) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
            for _ in 0..todo {
                fill_sphere(&mut rng, &mut u);
                fill_sphere(&mut rng, &mut v);
                fill_sphere(&mut rng, &mut w);
                let e = |a: &[f64], b: &[f64]| (crate::flip::dot(a, b) >= 0.0) as usize;
                counts[e(&u, &v) + e(&v, &w) + e(&w, &u)] += 1;
            }
            counts
        })
        .collect();
    let mut counts = [0u64; 4];
    for c in &partial {
        for k in 0..4 {
            counts[k] += c[k];
        }
    }
    Ok(fkg_from_counts(d, counts))
}

pub fn fkg_from_counts(d: usize, counts: [u64; 4]) -> FkgEstimate {
    let total_n: u64 = counts.iter().sum();
    let nf = total_n as f64;
    let pi: Vec<f64> = counts.iter().map(|&c| c as f64 / nf).collect();
    // Var(sum_k c_k pi_k) for multinomial frequencies
    let var_lin = |c: [f64; 4]| {
        let m: f64 = (0..4).map(|k| c[k] * pi[k]).sum();
        let m2: f64 = (0..4).map(|k| c[k] * c[k] * pi[k]).sum();
        ((m2 - m * m) / nf).max(0.0)
    };
    let mu: Vec<f64> = (0..4).map(|k| pi[k] / BINOM3[k]).collect();
    let mut mu_est = [Estimate { value: 0.0, se: 0.0 }; 4];
    for k in 0..4 {
        let mut c = [0.0; 4];
        c[k] = 1.0 / BINOM3[k];
        mu_est[k] = Estimate { value: mu[k], se: var_lin(c).sqrt() };
    }
    let a = Estimate { value: mu[3] - 0.125, se: mu_est[3].se };
    let pair_identity = Estimate { value: mu[3] + mu[2] - 0.25, se: var_lin([0.0, 0.0, 1.0 / 3.0, 1.0]).sqrt() };
    // delta method on g = mu1^2 - mu2 mu0 as a linear functional of pi
    let grad = [-mu[2], 2.0 * mu[1] / 3.0, -mu[0] / 3.0, 0.0];
    let lattice_gap = Estimate { value: mu[1] * mu[1] - mu[2] * mu[0], se: var_lin(grad).sqrt() };
    let total = (0..4).map(|k| BINOM3[k] * mu[k]).sum();
    FkgEstimate { d, samples: total_n as usize, counts, mu: mu_est, a, pair_identity, lattice_gap, total }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub d: usize,
    pub fragile: Vec<f64>,
    pub disagreement: Vec<f64>,
    pub max_drift: Vec<f64>,
}

impl ScalingRow {
    pub fn mean_fragile(&self) -> f64 {
        mean(&self.fragile)
    }

    pub fn mean_disagreement(&self) -> f64 {
        mean(&self.disagreement)
    }

    pub fn mean_max_drift(&self) -> f64 {
        mean(&self.max_drift)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable {
    pub n: usize,
    pub p: f64,
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln(mean fragile fraction)` against `ln d`.
    pub slope: f64,
}

impl ScalingTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "d,mean_fragile_fraction,mean_disagreement_fraction,max_drift")?;
        for r in &self.rows {
            let worst = r.max_drift.iter().copied().fold(0.0, f64::max);
            writeln!(w, "{},{},{},{}", r.d, r.mean_fragile(), r.mean_disagreement(), worst)?;
        }
        Ok(())
    }
}

/// Couplings with the max-drift margin at each `d`; trial `k` uses the same
/// input graph at every `d`.
pub fn run_scaling(seed: u64, n: usize, p: f64, d_list: &[usize], trials: usize) -> Result<ScalingTable> {
    if d_list.len() < 2 || trials == 0 {
        return Err(Error::InvalidConfig("scaling needs at least two dimensions and one trial".into()));
    }
    let ln_n = (n.max(2) as f64).ln();
    let mut rows = Vec::with_capacity(d_list.len());
    for &d in d_list {
        if (d as f64) < (n as f64 * p).max(ln_n) {
            log::info!("d = {d} is below max(np, ln n)");
        }
        let cfg = CouplingConfig::new(n, d, p).with_seed(seed).with_margin(MarginRule::MaxDrift);
        let runs: Vec<(f64, f64, f64)> = (0..trials as u64)
            .into_par_iter()
            .map(|k| {
                let out = run_coupling(&cfg, k)?;
                Ok((out.fragile_fraction(), out.disagreement_fraction(), out.margin))
            })
            .collect::<Result<_>>()?;
        rows.push(ScalingRow {
            d,
            fragile: runs.iter().map(|r| r.0).collect(),
            disagreement: runs.iter().map(|r| r.1).collect(),
            max_drift: runs.iter().map(|r| r.2).collect(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.d as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_fragile().ln()).collect();
    let slope = linear_fit(&xs, &ys).1;
    Ok(ScalingTable { n, p, rows, slope })
}

#[derive(Debug, Clone)]
pub enum Decider {
    Witness {
        calibration: Calibration,
        options: AscentOptions,
    },
    /// Threshold at half of this Monte Carlo mean of signed triangles.
    Triangle {
        rgg_mean: f64,
    },
    Spectral,
}

impl Decider {
    pub fn name(&self) -> &'static str {
        match self {
            Decider::Witness { .. } => "witness",
            Decider::Triangle { .. } => "triangle",
            Decider::Spectral => "spectral",
        }
    }

    pub fn decide<R: Rng + ?Sized>(&self, rng: &mut R, g: &Graph, p: f64, d: usize) -> Result<Decision> {
        match self {
            Decider::Witness { calibration, options } => Ok(decide_witness(rng, g, calibration, options)?.decision),
            Decider::Triangle { rgg_mean } => Ok(decide_triangle(g, p, *rgg_mean)),
            Decider::Spectral => decide_spectral(g, p, d),
        }
    }
}

/// Corruption for a confusion-table run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RocAdversary {
    Budgeted(Adversary),
    /// Replace each null instance by the geometric graph its coupling
    /// realizes at the given dimension; geometric instances pass through.
    Coupling {
        d: usize,
    },
}

impl RocAdversary {
    pub fn parse(s: &str, d: usize) -> Result<Self> {
        match s {
            "coupling" => Ok(RocAdversary::Coupling { d }),
            other => Ok(RocAdversary::Budgeted(Adversary::parse(other)?)),
        }
    }

    pub fn apply<R: Rng + ?Sized>(&self, rng: &mut R, g: &Graph, p: f64, budget: AdversaryBudget) -> Result<Graph> {
        match self {
            RocAdversary::Budgeted(a) => Ok(a.apply(rng, g, budget)),
            RocAdversary::Coupling { d } => {
                let cfg = CouplingConfig::new(g.n(), *d, p).with_margin(MarginRule::Explicit(0.0)).with_drift(false);
                let out = adversary_coupling(rng, g, &cfg)?;
                let changed = out.diff_count(g);
                if changed > budget.budget {
                    log::info!("coupling adversary changed {changed} pairs, budget {}", budget.budget);
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    /// Geometric instances declared geometric.
    pub rgg_as_rgg: usize,
    pub rgg_as_null: usize,
    pub null_as_rgg: usize,
    pub null_as_null: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.rgg_as_rgg + self.rgg_as_null + self.null_as_rgg + self.null_as_null
    }

    pub fn accuracy(&self) -> f64 {
        (self.rgg_as_rgg + self.null_as_null) as f64 / self.total().max(1) as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "truth,decided_rgg,decided_null")?;
        writeln!(w, "rgg,{},{}", self.rgg_as_rgg, self.rgg_as_null)?;
        writeln!(w, "null,{},{}", self.null_as_rgg, self.null_as_null)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocSetting {
    pub n: usize,
    pub p: f64,
    pub d: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
}

/// `trials / 2` geometric and `trials / 2` Erdős–Rényi instances, each
/// corrupted by the adversary before the decider sees it.
pub fn run_roc(decider: &Decider, adversary: RocAdversary, s: &RocSetting) -> Result<Confusion> {
    let law = SphericalLaw::new(s.d, s.p)?;
    let budget = AdversaryBudget::new(s.epsilon, s.n, s.p)?;
    let half = (s.trials / 2) as u64;
    let decisions: Vec<(bool, Decision)> = (0..2 * half)
        .into_par_iter()
        .map(|k| {
            let geometric = k < half;
            let idx = k % half;
            let mut rng = stream(s.seed, if geometric { "roc.rgg" } else { "roc.null" }, idx);
            let g = if geometric { sample_rgg_with(&mut rng, s.n, &law)?.0 } else { sample_er(&mut rng, s.n, s.p)? };
            let g = match adversary {
                RocAdversary::Coupling { .. } if geometric => g,
                _ => adversary.apply(&mut rng, &g, s.p, budget)?,
            };
            Ok((geometric, decider.decide(&mut rng, &g, s.p, s.d)?))
        })
        .collect::<Result<_>>()?;
    let mut c = Confusion::default();
    for (geometric, dec) in decisions {
        match (geometric, dec) {
            (true, Decision::Rgg) => c.rgg_as_rgg += 1,
            (true, Decision::Null) => c.rgg_as_null += 1,
            (false, Decision::Rgg) => c.null_as_rgg += 1,
            (false, Decision::Null) => c.null_as_null += 1,
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        let g = linspace(0.1, 0.3, 5);
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.1);
        assert!((g[4] - 0.3).abs() < 1e-15);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }

    #[test]
    fn er_critical_level_matches_graph_checks() {
        let n = 40;
        let grid = linspace(0.02, 0.2, 10);
        for property in [Property::Connectivity, Property::MinDegree] {
            for k in 0..5 {
                let flags = threshold_trial(property, Model::Er, n, &grid, &[], 3, k);
                for (g, &p) in grid.iter().enumerate() {
                    let graph = sample_er(&mut stream(3, "threshold.er", k), n, p).unwrap();
                    assert_eq!(flags[g], property.holds(&graph), "{property:?} p={p}");
                }
            }
        }
    }

    #[test]
    fn rgg_critical_level_matches_graph_checks() {
        let (n, d) = (40, 6);
        let grid = linspace(0.05, 0.4, 8);
        let taus: Vec<f64> = grid.iter().map(|&p| SphericalLaw::new(d, p).unwrap().tau()).collect();
        for property in [Property::Connectivity, Property::MinDegree] {
            let flags = threshold_trial(property, Model::Rgg { d }, n, &grid, &taus, 4, 0);
            let emb = LatentEmbedding::sample(&mut stream(4, "threshold.rgg", 0), n, d);
            for (g, &t) in taus.iter().enumerate() {
                let graph = crate::graph::threshold_gram(&emb.gram(), t);
                assert_eq!(flags[g], property.holds(&graph));
            }
        }
    }

    #[test]
    fn threshold_input_checks() {
        assert!(run_threshold(Property::Connectivity, Model::Er, 10, &[0.1, 0.2], 5, 0).is_err());
        assert!(run_threshold(Property::Connectivity, Model::Er, 10, &[0.2, 0.1], 20, 0).is_err());
        let c = run_threshold(Property::MinDegree, Model::Er, 30, &linspace(0.01, 0.5, 12), 20, 0).unwrap();
        assert!(c.fitted.windows(2).all(|w| w[0] <= w[1]));
        assert!(c.f.iter().all(|f| (0.0..=1.0).contains(f)));
    }

    #[test]
    fn fkg_exact_counts() {
        let e = fkg_from_counts(3, [1, 3, 3, 1]);
        assert!((e.total - 1.0).abs() < 1e-15);
        assert!((e.mu[1].value - 0.125).abs() < 1e-15);
        assert_eq!(e.a.value, 0.0);
        assert_eq!(e.lattice_gap.value, 0.0);
    }

    #[test]
    fn fkg_small_run_is_deterministic() {
        let a = run_fkg(1, 3, 25_000).unwrap();
        let b = run_fkg(1, 3, 25_000).unwrap();
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.samples, 25_000);
        assert!(run_fkg(1, 2, 10).is_err());
    }

    #[test]
    fn confusion_accuracy() {
        let c = Confusion { rgg_as_rgg: 9, rgg_as_null: 1, null_as_rgg: 2, null_as_null: 8 };
        assert_eq!(c.total(), 20);
        assert!((c.accuracy() - 0.85).abs() < 1e-15);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().next().unwrap(), "truth,decided_rgg,decided_null");
    }
}
