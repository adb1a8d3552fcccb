//! The sequential coupling: turn an Erdős–Rényi sample `H` into i.i.d. uniform
//! latent vectors whose geometric graph agrees with `H` away from fragile
//! pairs, plus the dominance construction and the audits used to check it.

use rand::Rng;

use crate::error::{Error, Result};
use crate::flip::{dot, flip_in_place};
use crate::graph::{pair_count, pair_index, sample_er, Graph, LatentEmbedding};
use crate::rng::stream;
use crate::sphere_law::{sample_sphere, SphericalLaw};
use crate::stats::{ks_one_sample, quantile, KsResult};

/// How the fragility margin is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginRule {
    Explicit(f64),
    /// `c * max(sqrt(n p), sqrt(ln n)) * (ln n)^{3/2} / d`.
    Formula {
        c: f64,
    },
    /// The largest drift observed in the same run (needs drift recording).
    MaxDrift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingConfig {
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub margin_rule: MarginRule,
    pub record_drift: bool,
    pub seed: u64,
}

impl CouplingConfig {
    pub fn new(n: usize, d: usize, p: f64) -> Self {
        CouplingConfig { n, d, p, margin_rule: MarginRule::MaxDrift, record_drift: true, seed: 0 }
    }

    pub fn with_margin(mut self, rule: MarginRule) -> Self {
        self.margin_rule = rule;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_drift(mut self, record: bool) -> Self {
        self.record_drift = record;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 3 {
            return Err(Error::InvalidConfig(format!("dimension {} below 3", self.d)));
        }
        if !(self.p > 0.0 && self.p <= 0.5) {
            return Err(Error::InvalidConfig(format!("density {} outside (0, 1/2]", self.p)));
        }
        match self.margin_rule {
            MarginRule::Explicit(m) if !(m >= 0.0) => {
                Err(Error::InvalidConfig(format!("margin {m} must be nonnegative")))
            }
            MarginRule::Formula { c } if !(c > 0.0) => {
                Err(Error::InvalidConfig(format!("margin constant {c} must be positive")))
            }
            MarginRule::MaxDrift if !self.record_drift => {
                Err(Error::InvalidConfig("max-drift margin needs drift recording".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn law(&self) -> Result<SphericalLaw> {
        SphericalLaw::new(self.d, self.p)
    }
}

/// `max(sqrt(n p), sqrt(ln n)) * (ln n)^{3/2} / d`, the margin shape without
/// its constant.
pub fn margin_shape(n: usize, p: f64, d: usize) -> f64 {
    let ln = (n.max(2) as f64).ln();
    (n as f64 * p).sqrt().max(ln.sqrt()) * ln.powf(1.5) / d as f64
}

#[derive(Debug, Clone)]
pub struct CouplingOutput {
    pub input: Graph,
    pub embedding: LatentEmbedding,
    pub realized: Graph,
    pub tau: f64,
    pub margin: f64,
    /// Pairs `(i, j)`, `i < j`, with `|<V_i, V_j> - tau| < margin`.
    pub fragile: Vec<(usize, usize)>,
    /// Pairs where the realized graph and the input differ.
    pub disagreements: Vec<(usize, usize)>,
    /// Final inner products, indexed by [`pair_index`].
    pub inner: Vec<f64>,
    /// Inner products right after each pair's flip, indexed by [`pair_index`].
    pub flip_inner: Option<Vec<f64>>,
}

impl CouplingOutput {
    pub fn n(&self) -> usize {
        self.input.n()
    }

    /// Per-pair `|final - flip-time|` inner-product change.
    pub fn drift(&self) -> Result<Vec<f64>> {
        let flip = self.flip_inner.as_ref().ok_or(Error::MissingDrift)?;
        Ok(self.inner.iter().zip(flip).map(|(a, b)| (a - b).abs()).collect())
    }

    pub fn max_drift(&self) -> Result<f64> {
        Ok(self.drift()?.into_iter().fold(0.0, f64::max))
    }

    /// Fragile pairs for an arbitrary margin.
    pub fn fragile_with(&self, margin: f64) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if (self.inner[pair_index(i, j)] - self.tau).abs() < margin {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Fraction of all vertex pairs that are fragile.
    pub fn fragile_fraction(&self) -> f64 {
        self.fragile.len() as f64 / pair_count(self.n()).max(1) as f64
    }

    pub fn disagreement_fraction(&self) -> f64 {
        self.disagreements.len() as f64 / pair_count(self.n()).max(1) as f64
    }

    /// Whether every disagreement is a fragile pair.
    pub fn disagreements_within_fragile(&self) -> bool {
        // both lists are sorted lexicographically
        let mut k = 0;
        for pair in &self.disagreements {
            while k < self.fragile.len() && self.fragile[k] < *pair {
                k += 1;
            }
            if k == self.fragile.len() || self.fragile[k] != *pair {
                return false;
            }
        }
        true
    }

    /// The graph with an edge wherever the final inner product is at least `t`.
    pub fn threshold_at(&self, t: f64) -> Graph {
        let n = self.n();
        let mut g = Graph::empty(n);
        for j in 1..n {
            for i in 0..j {
                if self.inner[pair_index(i, j)] >= t {
                    g.set_edge(i, j, true);
                }
            }
        }
        g
    }
}

/// Runs the flip schedule on `emb` in place: for `j = 0..n`, for `i < j`
/// increasing, `V_j <- rho^{H_ij}_{V_i}(V_j)`. Returns the flip-time inner
/// products when `record` is set.
pub(crate) fn flip_schedule(
    law: &SphericalLaw,
    h: &Graph,
    emb: &mut LatentEmbedding,
    record: bool,
) -> Result<Option<Vec<f64>>> {
    let n = emb.n();
    let d = emb.d();
    let tau = law.tau();
    let mut flip_inner = record.then(|| vec![0.0; pair_count(n)]);
    for j in 1..n {
        let (done, rest) = emb.split_at_column_mut(j);
        let vj = &mut rest[..d];
        for i in 0..j {
            let vi = &done[i * d..(i + 1) * d];
            let bit = h.has_edge(i, j);
            let rec = flip_in_place(law, vi, vj, bit)?;
            if (rec.post_inner >= tau) != bit {
                return Err(Error::Numerical(format!("flip of pair ({i}, {j}) missed its target side")));
            }
            if let Some(fi) = flip_inner.as_mut() {
                fi[pair_index(i, j)] = rec.post_inner;
            }
        }
    }
    Ok(flip_inner)
}

/// Pairwise inner products computed with the same kernel the flips use, so a
/// pair untouched after its flip reports exactly zero drift.
pub(crate) fn pair_inner(emb: &LatentEmbedding) -> Vec<f64> {
    let n = emb.n();
    let mut inner = vec![0.0; pair_count(n)];
    for j in 1..n {
        for i in 0..j {
            inner[pair_index(i, j)] = emb.inner(i, j);
        }
    }
    inner
}

fn sorted_pairs(n: usize, keep: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if keep(i, j) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Couples the given `H` onto fresh uniform vectors drawn from `rng`.
pub fn couple<R: Rng + ?Sized>(rng: &mut R, h: &Graph, cfg: &CouplingConfig) -> Result<CouplingOutput> {
    cfg.validate()?;
    if h.n() != cfg.n {
        return Err(Error::DimensionMismatch { expected: cfg.n, got: h.n() });
    }
    let law = cfg.law()?;
    let emb = LatentEmbedding::sample(rng, cfg.n, cfg.d);
    couple_embedding(&law, h, emb, cfg)
}

/// Couples `H` starting from the supplied initial vectors.
pub fn couple_embedding(
    law: &SphericalLaw,
    h: &Graph,
    mut emb: LatentEmbedding,
    cfg: &CouplingConfig,
) -> Result<CouplingOutput> {
    let flip_inner = flip_schedule(law, h, &mut emb, cfg.record_drift)?;
    let inner = pair_inner(&emb);
    let tau = law.tau();
    let n = h.n();
    let mut out = CouplingOutput {
        input: h.clone(),
        embedding: emb,
        realized: Graph::empty(n),
        tau,
        margin: 0.0,
        fragile: Vec::new(),
        disagreements: Vec::new(),
        inner,
        flip_inner,
    };
    out.margin = match cfg.margin_rule {
        MarginRule::Explicit(m) => m,
        MarginRule::Formula { c } => c * margin_shape(n, law.p(), law.d()),
        MarginRule::MaxDrift => out.max_drift()?,
    };
    out.realized = out.threshold_at(tau);
    out.fragile = out.fragile_with(out.margin);
    out.disagreements = sorted_pairs(n, |i, j| out.realized.has_edge(i, j) != h.has_edge(i, j));
    Ok(out)
}

/// Full seeded run: `H` and the initial vectors come from separate streams
/// keyed by `cfg.seed` and `trial`.
pub fn run_coupling(cfg: &CouplingConfig, trial: u64) -> Result<CouplingOutput> {
    cfg.validate()?;
    let mut h_rng = stream(cfg.seed, "coupling.input", trial);
    let h = sample_er(&mut h_rng, cfg.n, cfg.p)?;
    let mut v_rng = stream(cfg.seed, "coupling.latent", trial);
    couple(&mut v_rng, &h, cfg)
}

#[derive(Debug, Clone)]
pub struct DominanceTriple {
    pub h: Graph,
    pub g_minus: Graph,
    pub g_plus: Graph,
    pub margin: f64,
    pub minus_in_h: bool,
    pub h_in_plus: bool,
}

impl DominanceTriple {
    pub fn holds(&self) -> bool {
        self.minus_in_h && self.h_in_plus
    }
}

pub fn dominance_from(out: &CouplingOutput) -> DominanceTriple {
    let g_plus = out.threshold_at(out.tau - out.margin);
    let g_minus = out.threshold_at(out.tau + out.margin);
    DominanceTriple {
        minus_in_h: g_minus.is_subgraph_of(&out.input),
        h_in_plus: out.input.is_subgraph_of(&g_plus),
        h: out.input.clone(),
        g_minus,
        g_plus,
        margin: out.margin,
    }
}

/// Samples `H ~ G(n, p)`, couples it and thresholds the result at
/// `tau -+ margin`.
pub fn dominance_triple<R: Rng + ?Sized>(rng: &mut R, cfg: &CouplingConfig) -> Result<DominanceTriple> {
    let h = sample_er(rng, cfg.n, cfg.p)?;
    let out = couple(rng, &h, cfg)?;
    Ok(dominance_from(&out))
}

#[derive(Debug, Clone)]
pub struct UniformityReport {
    /// One test per fixed direction of `{<w, V_i>}`.
    pub directions: Vec<KsResult>,
    /// Inner products over the disjoint pairs `(0,1), (2,3), ...`.
    pub pairwise: Option<KsResult>,
}

impl UniformityReport {
    pub fn min_p_value(&self) -> f64 {
        self.directions.iter().chain(self.pairwise.iter()).map(|r| r.p_value).fold(1.0, f64::min)
    }

    pub fn passes(&self, alpha: f64) -> bool {
        self.min_p_value() >= alpha
    }
}

pub fn uniformity_report(
    emb: &LatentEmbedding,
    law: &SphericalLaw,
    directions: &[Vec<f64>],
) -> Result<UniformityReport> {
    if directions.is_empty() {
        return Err(Error::Domain("at least one direction is required".into()));
    }
    let cdf = |x: f64| law.cdf(x.clamp(-1.0, 1.0)).unwrap_or(f64::NAN);
    let mut tests = Vec::with_capacity(directions.len());
    for w in directions {
        if w.len() != emb.d() {
            return Err(Error::DimensionMismatch { expected: emb.d(), got: w.len() });
        }
        let xs: Vec<f64> = (0..emb.n()).map(|i| dot(w, emb.column(i))).collect();
        tests.push(ks_one_sample(&xs, cdf));
    }
    let pairs: Vec<f64> = (0..emb.n() / 2).map(|k| emb.inner(2 * k, 2 * k + 1)).collect();
    let pairwise = (!pairs.is_empty()).then(|| ks_one_sample(&pairs, cdf));
    Ok(UniformityReport { directions: tests, pairwise })
}

/// `k` uniformly random test directions.
pub fn random_directions<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> Vec<Vec<f64>> {
    (0..k).map(|_| sample_sphere(rng, d)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSummary {
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub q90: f64,
    pub q99: f64,
}

pub fn drift_summary(out: &CouplingOutput) -> Result<DriftSummary> {
    let drift = out.drift()?;
    if drift.is_empty() {
        return Ok(DriftSummary { max: 0.0, mean: 0.0, median: 0.0, q90: 0.0, q99: 0.0 });
    }
    Ok(DriftSummary {
        max: drift.iter().copied().fold(0.0, f64::max),
        mean: drift.iter().sum::<f64>() / drift.len() as f64,
        median: quantile(&drift, 0.5),
        q90: quantile(&drift, 0.9),
        q99: quantile(&drift, 0.99),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(CouplingConfig::new(10, 2, 0.1).validate().is_err());
        assert!(CouplingConfig::new(10, 8, 0.6).validate().is_err());
        assert!(CouplingConfig::new(10, 8, 0.1).with_drift(false).validate().is_err());
        assert!(CouplingConfig::new(10, 8, 0.1).with_margin(MarginRule::Formula { c: 0.0 }).validate().is_err());
        assert!(CouplingConfig::new(10, 8, 0.1).validate().is_ok());
    }

    #[test]
    fn single_vertex() {
        let cfg = CouplingConfig::new(1, 16, 0.1);
        let out = run_coupling(&cfg, 0).unwrap();
        assert_eq!(out.realized.edge_count(), 0);
        assert!(out.drift().unwrap().is_empty());
        assert_eq!(drift_summary(&out).unwrap().max, 0.0);
    }

    #[test]
    fn two_vertices_follow_input_exactly() {
        for trial in 0..40 {
            let cfg = CouplingConfig::new(2, 12, 0.2).with_seed(5);
            let out = run_coupling(&cfg, trial).unwrap();
            assert_eq!(out.realized.has_edge(0, 1), out.input.has_edge(0, 1));
            assert_eq!(out.max_drift().unwrap(), 0.0);
            assert!(out.disagreements.is_empty());
        }
    }

    #[test]
    fn flip_time_agreement_and_unit_norms() {
        let cfg = CouplingConfig::new(60, 64, 0.1).with_seed(9);
        let out = run_coupling(&cfg, 0).unwrap();
        let flip = out.flip_inner.as_ref().unwrap();
        for j in 1..60 {
            for i in 0..j {
                assert_eq!(flip[pair_index(i, j)] >= out.tau, out.input.has_edge(i, j));
            }
        }
        assert!(out.embedding.max_norm_error() < 1e-7);
        assert!(out.disagreements_within_fragile());
    }

    #[test]
    fn dominance_margins() {
        let cfg = CouplingConfig::new(30, 32, 0.1).with_seed(3).with_margin(MarginRule::Explicit(0.0));
        let out = run_coupling(&cfg, 0).unwrap();
        let t = dominance_from(&out);
        assert_eq!(t.g_minus, out.realized);
        assert_eq!(t.g_plus, out.realized);
        let cfg = cfg.with_margin(MarginRule::Explicit(3.0));
        let t = dominance_from(&run_coupling(&cfg, 0).unwrap());
        assert_eq!(t.g_plus, Graph::complete(30));
        assert!(t.h_in_plus && t.minus_in_h);
    }

    #[test]
    fn deterministic_output() {
        let cfg = CouplingConfig::new(40, 24, 0.1).with_seed(11);
        let a = run_coupling(&cfg, 2).unwrap();
        let b = run_coupling(&cfg, 2).unwrap();
        assert_eq!(a.embedding, b.embedding);
        assert_eq!(a.flip_inner, b.flip_inner);
        assert_eq!(a.fragile, b.fragile);
    }

    #[test]
    fn aligned_embedding_fails_uniformity() {
        let law = SphericalLaw::new(8, 0.1).unwrap();
        let v = sample_sphere(&mut stream(1, "t", 0), 8);
        let emb = LatentEmbedding::from_columns(200, 8, v.repeat(200)).unwrap();
        let dirs = random_directions(&mut stream(1, "w", 0), 8, 3);
        assert!(!uniformity_report(&emb, &law, &dirs).unwrap().passes(1e-3));
    }
}
