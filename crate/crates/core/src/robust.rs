//! Robust testing: decide whether a corrupted graph came from a geometric
//! graph or from a graph with small centred operator norm, by searching for a
//! low-rank witness `Y` (unit columns, few large inner products) that makes
//! `<A, Y^T Y>` large.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{sample_er, sample_rgg_with, Graph, LatentEmbedding};
use crate::graphstats::{
    adversary_clique, adversary_random, dense_lambda_max_abs, graph_lambda_max_abs, signed_triangles, top_eigenpairs,
    AdversaryBudget, CenteredAdjacency,
};
use crate::rng::stream;
use crate::sphere_law::{fill_sphere, SphericalLaw};

/// Tail budget `2 C2 n^2 p ln(1/p) / d`.
pub fn tail_budget(n: usize, p: f64, d: usize, c2: f64) -> f64 {
    2.0 * c2 * (n * n) as f64 * p * (1.0 / p).ln() / d as f64
}

#[derive(Debug, Clone)]
pub struct WitnessProblem {
    pub a: DMatrix<f64>,
    pub p: f64,
    pub d: usize,
    pub tail_budget: f64,
    /// `tau^2`: inner products with larger squares count toward the tail.
    pub cap: f64,
}

impl WitnessProblem {
    pub fn new(g: &Graph, p: f64, d: usize, c2: f64) -> Result<Self> {
        let law = SphericalLaw::new(d, p)?;
        let budget = tail_budget(g.n(), p, d, c2);
        if !(budget > 0.0) {
            return Err(Error::Domain(format!("tail budget {budget} must be positive")));
        }
        Ok(WitnessProblem {
            a: CenteredAdjacency::new(g, p).values,
            p,
            d,
            tail_budget: budget,
            cap: law.tau() * law.tau(),
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
}

fn check_witness(a: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    if y.ncols() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: y.ncols() });
    }
    for (i, col) in y.column_iter().enumerate() {
        let norm = col.norm();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::Domain(format!("witness column {i} has norm {norm}")));
        }
    }
    Ok(())
}

/// `sum_{i != j} A_ij <Y_i, Y_j>`.
pub fn witness_objective(a: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    check_witness(a, y)?;
    Ok(objective_unchecked(a, &y.tr_mul(y)))
}

fn objective_unchecked(a: &DMatrix<f64>, gram: &DMatrix<f64>) -> f64 {
    let full: f64 = a.as_slice().iter().zip(gram.as_slice()).map(|(x, g)| x * g).sum();
    full - (0..a.nrows()).map(|i| a[(i, i)] * gram[(i, i)]).sum::<f64>()
}

/// `sum_{i != j, <Y_i,Y_j>^2 > cap} <Y_i, Y_j>^2`.
pub fn tail_mass(y: &DMatrix<f64>, cap: f64) -> f64 {
    tail_of_gram(&y.tr_mul(y), cap)
}

fn tail_of_gram(gram: &DMatrix<f64>, cap: f64) -> f64 {
    let sq = |g: f64| {
        let g2 = g * g;
        if g2 > cap {
            g2
        } else {
            0.0
        }
    };
    let full: f64 = gram.as_slice().iter().map(|&g| sq(g)).sum();
    full - (0..gram.nrows()).map(|i| sq(gram[(i, i)])).sum::<f64>()
}

/// `objective - lambda * max(tail - budget, 0)`.
pub fn penalized(prob: &WitnessProblem, y: &DMatrix<f64>, lambda: f64) -> f64 {
    let gram = y.tr_mul(y);
    let obj = objective_unchecked(&prob.a, &gram);
    let tail = tail_of_gram(&gram, prob.cap);
    obj - lambda * (tail - prob.tail_budget).max(0.0)
}

/// Euclidean gradient of [`penalized`] with respect to `Y`.
pub fn penalized_gradient(prob: &WitnessProblem, y: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    gradient_with(prob, y, lambda, false)
}

/// With `force`, the penalty term is included even on the feasible side; used
/// to slide along the constraint boundary where the plain gradient points out.
fn gradient_with(prob: &WitnessProblem, y: &DMatrix<f64>, lambda: f64, force: bool) -> DMatrix<f64> {
    let gram = y.tr_mul(y);
    let mut grad = (y * &prob.a) * 2.0;
    let tail = tail_of_gram(&gram, prob.cap);
    if force || tail > prob.tail_budget {
        let n = gram.nrows();
        let mut masked = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                let g = gram[(i, j)];
                if i != j && g * g > prob.cap {
                    masked[(i, j)] = g;
                }
            }
        }
        grad -= (y * masked) * (4.0 * lambda);
    }
    grad
}

fn normalize_columns(y: &mut DMatrix<f64>) {
    for mut col in y.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        } else {
            col.fill(0.0);
            col[0] = 1.0;
        }
    }
}

/// Projects each column of `g` onto the tangent space at the matching column of `y`.
fn tangent(y: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = g.clone();
    for (k, mut col) in out.column_iter_mut().enumerate() {
        let yc = y.column(k);
        let c = col.dot(&yc);
        col.axpy(-c, &yc, 1.0);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentOptions {
    pub iters: usize,
    /// Sufficient-increase constant of the backtracking search.
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Penalty doublings allowed while no feasible iterate has been seen.
    pub max_doublings: usize,
    /// Iterations without relative progress before stopping.
    pub flat_window: usize,
    /// Initial penalty in units of `||A|| / budget`.
    pub penalty0: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions {
            iters: 300,
            armijo: 1e-4,
            max_backtracks: 40,
            max_doublings: 8,
            flat_window: 50,
            penalty0: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WitnessResult {
    /// `d x n`, unit columns.
    pub y: DMatrix<f64>,
    pub objective: f64,
    pub tail_mass: f64,
    pub feasible: bool,
    /// Penalized objective after each accepted step.
    pub trace: Vec<f64>,
    /// Trace offsets where a doubled penalty took over; the trace is
    /// nondecreasing between consecutive offsets.
    pub phases: Vec<usize>,
    pub penalty: f64,
}

/// Riemannian gradient ascent on the product of spheres from `start`.
///
/// Steps come from a backtracking search halving from `1 / ||A||`; the
/// returned point is the best feasible iterate seen (or the last iterate if
/// none was feasible).
pub fn maximize_witness(prob: &WitnessProblem, start: DMatrix<f64>, opts: &AscentOptions) -> Result<WitnessResult> {
    check_witness(&prob.a, &start)?;
    let n = prob.n();
    let mut y = start;
    let eval = |y: &DMatrix<f64>| {
        let gram = y.tr_mul(y);
        (objective_unchecked(&prob.a, &gram), tail_of_gram(&gram, prob.cap))
    };
    let norm_a = if n >= 2 { dense_lambda_max_abs(&prob.a) } else { 0.0 };
    let (obj0, tail0) = eval(&y);
    let mut best: Option<(DMatrix<f64>, f64, f64)> = (tail0 <= prob.tail_budget).then(|| (y.clone(), obj0, tail0));
    if norm_a == 0.0 {
        return Ok(WitnessResult {
            y,
            objective: obj0,
            tail_mass: tail0,
            feasible: tail0 <= prob.tail_budget,
            trace: vec![obj0],
            phases: vec![0],
            penalty: 0.0,
        });
    }
    let eta0 = 1.0 / norm_a;
    let mut lambda = opts.penalty0 * norm_a / prob.tail_budget;
    let mut trace = Vec::new();
    let mut phases = Vec::new();
    let mut doublings = 0;
    loop {
        let mut f = penalized(prob, &y, lambda);
        phases.push(trace.len());
        trace.push(f);
        let mut stalled = 0;
        for _ in 0..opts.iters {
            let mut accepted = None;
            let mut last_gn2 = 0.0;
            for force in [false, true] {
                let r = tangent(&y, &gradient_with(prob, &y, lambda, force));
                let gn2 = r.norm_squared();
                last_gn2 = gn2;
                if gn2 <= 1e-24 * (norm_a * n as f64).powi(2) {
                    continue;
                }
                let mut eta = eta0;
                for _ in 0..opts.max_backtracks {
                    let mut cand = &y + &r * eta;
                    normalize_columns(&mut cand);
                    let fc = penalized(prob, &cand, lambda);
                    if fc >= f + opts.armijo * eta * gn2 {
                        accepted = Some((cand, fc));
                        break;
                    }
                    eta *= 0.5;
                }
                if accepted.is_some() {
                    break;
                }
            }
            if accepted.is_none() && last_gn2 == 0.0 {
                break;
            }
            let Some((cand, fc)) = accepted else { break };
            let gain = fc - f;
            y = cand;
            f = fc;
            trace.push(f);
            let (obj, tail) = eval(&y);
            if tail <= prob.tail_budget && best.as_ref().is_none_or(|b| obj > b.1) {
                best = Some((y.clone(), obj, tail));
            }
            if gain <= 1e-10 * f.abs().max(1.0) {
                stalled += 1;
                if stalled >= opts.flat_window {
                    log::warn!("witness ascent made no progress for {} iterations", opts.flat_window);
                    break;
                }
            } else {
                stalled = 0;
            }
        }
        if eval(&y).1 <= prob.tail_budget || doublings >= opts.max_doublings {
            break;
        }
        lambda *= 2.0;
        doublings += 1;
    }
    Ok(match best {
        Some((y, objective, tail)) => {
            WitnessResult { y, objective, tail_mass: tail, feasible: true, trace, phases, penalty: lambda }
        }
        None => {
            let (objective, tail) = eval(&y);
            WitnessResult { y, objective, tail_mass: tail, feasible: false, trace, phases, penalty: lambda }
        }
    })
}

/// Rows of the top-`d` eigenvectors scaled by the square roots of their
/// (positive parts of) eigenvalues, one normalized column per vertex.
pub fn spectral_start(prob: &WitnessProblem) -> DMatrix<f64> {
    let n = prob.n();
    let (vals, vecs) = top_eigenpairs(&prob.a, prob.d);
    let mut y = DMatrix::zeros(prob.d, n);
    for (k, val) in vals.iter().enumerate() {
        let w = val.max(0.0).sqrt();
        for i in 0..n {
            y[(k, i)] = w * vecs[(i, k)];
        }
    }
    normalize_columns(&mut y);
    y
}

pub fn random_start<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(d, n);
    for mut col in y.column_iter_mut() {
        let mut v = vec![0.0; d];
        fill_sphere(rng, &mut v);
        col.copy_from_slice(&v);
    }
    y
}

/// Ascent from the spectral start and from a random start, run concurrently;
/// the better feasible result wins.
pub fn best_witness<R: Rng + ?Sized>(
    rng: &mut R,
    prob: &WitnessProblem,
    opts: &AscentOptions,
) -> Result<WitnessResult> {
    let rand_y = random_start(rng, prob.n(), prob.d);
    let (a, b) =
        rayon::join(|| maximize_witness(prob, spectral_start(prob), opts), || maximize_witness(prob, rand_y, opts));
    let (a, b) = (a?, b?);
    let score = |r: &WitnessResult| if r.feasible { r.objective } else { f64::NEG_INFINITY };
    Ok(if score(&b) > score(&a) { b } else { a })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Rgg,
    Null,
}

impl Decision {
    pub fn label(&self) -> &'static str {
        match self {
            Decision::Rgg => "RGG",
            Decision::Null => "NULL",
        }
    }
}

/// Null-side bound `sqrt(C' (max(n^3 p, n^2 ln^2 n) + eps n^4 p^2 ln(1/p) / d))`.
pub fn null_bound(n: usize, p: f64, d: usize, eps: f64, c_prime: f64) -> f64 {
    (c_prime * null_shape(n, p, d, eps)).sqrt()
}

fn null_shape(n: usize, p: f64, d: usize, eps: f64) -> f64 {
    let nf = n as f64;
    let ln = nf.ln();
    (nf.powi(3) * p).max(nf * nf * ln * ln) + eps * nf.powi(4) * p * p * (1.0 / p).ln() / d as f64
}

/// Geometric-side bound `n^2 p sqrt(ln(1/p)) / (2 C_B sqrt(d))`.
pub fn rgg_bound(n: usize, p: f64, d: usize, c_b: f64) -> f64 {
    (n * n) as f64 * p * (1.0 / p).ln().sqrt() / (2.0 * c_b * (d as f64).sqrt())
}

/// Corruption applied during calibration and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adversary {
    None,
    Clique,
    Random,
}

impl Adversary {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Adversary::None),
            "clique" => Ok(Adversary::Clique),
            "random" => Ok(Adversary::Random),
            _ => Err(Error::InvalidConfig(format!("unknown adversary '{s}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Adversary::None => "none",
            Adversary::Clique => "clique",
            Adversary::Random => "random",
        }
    }

    pub fn apply<R: Rng + ?Sized>(&self, rng: &mut R, g: &Graph, budget: AdversaryBudget) -> Graph {
        match self {
            Adversary::None => g.clone(),
            Adversary::Clique => adversary_clique(rng, g, budget, None),
            Adversary::Random => adversary_random(rng, g, budget),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub n: usize,
    pub p: f64,
    pub d: usize,
    pub c2: f64,
    pub c_b: f64,
    pub c_prime: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSetup {
    pub n: usize,
    pub p: f64,
    pub d: usize,
    pub epsilon: f64,
    pub adversary: Adversary,
    pub null_samples: usize,
    pub alt_samples: usize,
    pub seed: u64,
}

/// Slack applied to the largest observed tail constant.
const C2_SLACK: f64 = 1.05;

/// The `C2` at which this embedding's tail mass exactly meets the budget.
pub fn truth_tail_constant(emb: &LatentEmbedding, law: &SphericalLaw) -> f64 {
    let y = DMatrix::from_column_slice(emb.d(), emb.n(), emb.as_slice());
    tail_mass(&y, law.tau() * law.tau()) / tail_budget(emb.n(), law.p(), emb.d(), 1.0)
}

/// Largest [`truth_tail_constant`] over `samples` geometric draws, times a
/// 5% slack; the `C2` that [`calibrate`] uses.
pub fn fit_tail_constant(law: &SphericalLaw, n: usize, samples: usize, seed: u64) -> Result<f64> {
    let mut worst: f64 = 1e-12;
    for k in 0..samples as u64 {
        let (_, emb) = sample_rgg_with(&mut stream(seed, "calibrate.alt", k), n, law)?;
        worst = worst.max(truth_tail_constant(&emb, law));
    }
    Ok(worst * C2_SLACK)
}

/// Fits `C2` from true embeddings, then `C'` and `C_B` from witness values on
/// corrupted null and geometric samples. The threshold is the geometric mean
/// of the two fitted bounds.
pub fn calibrate(setup: &CalibrationSetup, opts: &AscentOptions) -> Result<Calibration> {
    let CalibrationSetup { n, p, d, epsilon, adversary, null_samples, alt_samples, seed } = *setup;
    if null_samples == 0 || alt_samples == 0 {
        return Err(Error::InvalidConfig("calibration needs samples on both sides".into()));
    }
    let law = SphericalLaw::new(d, p)?;
    let budget = AdversaryBudget::new(epsilon, n, p)?;
    let alt: Vec<(Graph, f64)> = (0..alt_samples as u64)
        .map(|k| -> Result<(Graph, f64)> {
            let mut rng = stream(seed, "calibrate.alt", k);
            let (g, emb) = sample_rgg_with(&mut rng, n, &law)?;
            let c2 = truth_tail_constant(&emb, &law);
            Ok((adversary.apply(&mut rng, &g, budget), c2))
        })
        .collect::<Result<_>>()?;
    let c2 = alt.iter().map(|x| x.1).fold(0.0, f64::max).max(1e-12) * C2_SLACK;
    let witness = |g: &Graph, rng: &mut crate::rng::StreamRng| -> Result<f64> {
        let prob = WitnessProblem::new(g, p, d, c2)?;
        let r = best_witness(rng, &prob, opts)?;
        Ok(if r.feasible { r.objective } else { f64::NEG_INFINITY })
    };
    let alt_obj: Vec<f64> = alt
        .iter()
        .enumerate()
        .map(|(k, (g, _))| witness(g, &mut stream(seed, "calibrate.alt.start", k as u64)))
        .collect::<Result<_>>()?;
    let null_obj: Vec<f64> = (0..null_samples as u64)
        .map(|k| {
            let mut rng = stream(seed, "calibrate.null", k);
            let h = sample_er(&mut rng, n, p)?;
            let g = adversary.apply(&mut rng, &h, budget);
            witness(&g, &mut rng)
        })
        .collect::<Result<_>>()?;
    let null_max = null_obj.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(1e-12);
    let alt_min = alt_obj.iter().copied().fold(f64::INFINITY, f64::min);
    if !(alt_min > 0.0) {
        return Err(Error::Numerical("calibration found no feasible geometric witness".into()));
    }
    if alt_min <= null_max {
        log::warn!("calibration samples overlap: null max {null_max}, geometric min {alt_min}");
    }
    let c_prime = null_max * null_max / null_shape(n, p, d, epsilon);
    let c_b = rgg_bound(n, p, d, 1.0) / alt_min;
    let threshold = (null_bound(n, p, d, epsilon, c_prime) * rgg_bound(n, p, d, c_b)).sqrt();
    Ok(Calibration { n, p, d, c2, c_b, c_prime, threshold })
}

pub fn write_calibration_csv<W: Write>(cals: &[Calibration], mut w: W) -> Result<()> {
    writeln!(w, "n,p,d,fitted_C2,fitted_CB,threshold")?;
    for c in cals {
        writeln!(w, "{},{},{},{},{},{}", c.n, c.p, c.d, c.c2, c.c_b, c.threshold)?;
    }
    Ok(())
}

/// Reads calibration rows; `C'` is not stored and comes back as NaN.
pub fn read_calibration_csv<R: BufRead>(r: R) -> Result<Vec<Calibration>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty calibration file".into()))??;
    if header.trim() != "n,p,d,fitted_C2,fitted_CB,threshold" {
        return Err(Error::Format(format!("unexpected calibration header '{header}'")));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::Format(format!("calibration row '{line}' needs 6 fields")));
        }
        let bad = |s: &str| Error::Format(format!("bad calibration field '{s}'"));
        out.push(Calibration {
            n: f[0].trim().parse().map_err(|_| bad(f[0]))?,
            p: f[1].trim().parse().map_err(|_| bad(f[1]))?,
            d: f[2].trim().parse().map_err(|_| bad(f[2]))?,
            c2: f[3].trim().parse().map_err(|_| bad(f[3]))?,
            c_b: f[4].trim().parse().map_err(|_| bad(f[4]))?,
            c_prime: f64::NAN,
            threshold: f[5].trim().parse().map_err(|_| bad(f[5]))?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct WitnessDecision {
    pub decision: Decision,
    /// Best feasible objective minus the threshold.
    pub margin: f64,
    pub objective: f64,
}

pub fn decide_witness<R: Rng + ?Sized>(
    rng: &mut R,
    g: &Graph,
    cal: &Calibration,
    opts: &AscentOptions,
) -> Result<WitnessDecision> {
    let prob = WitnessProblem::new(g, cal.p, cal.d, cal.c2)?;
    let r = best_witness(rng, &prob, opts)?;
    let objective = if r.feasible { r.objective } else { f64::NEG_INFINITY };
    let decision = if objective >= cal.threshold { Decision::Rgg } else { Decision::Null };
    log::debug!("witness objective {objective}, threshold {}", cal.threshold);
    Ok(WitnessDecision { decision, margin: objective - cal.threshold, objective })
}

/// Signed triangles above half the geometric mean count means RGG.
pub fn decide_triangle(g: &Graph, p: f64, rgg_mean: f64) -> Decision {
    if signed_triangles(g, p) >= 0.5 * rgg_mean {
        Decision::Rgg
    } else {
        Decision::Null
    }
}

/// Monte Carlo mean of signed triangles for uncorrupted `RGG(n, d, p)`.
pub fn rgg_triangle_mean(n: usize, p: f64, d: usize, samples: usize, seed: u64) -> Result<f64> {
    let law = SphericalLaw::new(d, p)?;
    let mut total = 0.0;
    for k in 0..samples as u64 {
        let (g, _) = sample_rgg_with(&mut stream(seed, "triangle.mean", k), n, &law)?;
        total += signed_triangles(&g, p);
    }
    Ok(total / samples as f64)
}

/// Threshold of the spectral decider: geometric mean of the null edge
/// `2 sqrt(n p (1 - p))` and the geometric scale `n p / sqrt(d)`.
pub fn spectral_threshold(n: usize, p: f64, d: usize) -> f64 {
    let nf = n as f64;
    let null = 2.0 * (nf * p * (1.0 - p)).sqrt();
    let geo = nf * p / (d as f64).sqrt();
    (null * geo).sqrt()
}

pub fn decide_spectral(g: &Graph, p: f64, d: usize) -> Result<Decision> {
    let lambda = graph_lambda_max_abs(g, p)?;
    Ok(if lambda >= spectral_threshold(g.n(), p, d) { Decision::Rgg } else { Decision::Null })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_problem(seed: u64) -> (WitnessProblem, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = sample_er(&mut rng, 30, 0.2).unwrap();
        (WitnessProblem::new(&g, 0.2, 4, 1.0).unwrap(), rng)
    }

    #[test]
    fn orthogonal_columns_have_no_tail() {
        let y = DMatrix::<f64>::identity(5, 5);
        assert_eq!(tail_mass(&y, 0.01), 0.0);
        let a = DMatrix::from_element(5, 5, 1.0);
        assert_eq!(witness_objective(&a, &y).unwrap(), 0.0);
        assert!(witness_objective(&DMatrix::zeros(4, 4), &y).is_err());
    }

    #[test]
    fn objective_matches_pair_sum() {
        let (prob, mut rng) = small_problem(1);
        let y = random_start(&mut rng, 30, 4);
        let mut direct = 0.0;
        for i in 0..30 {
            for j in 0..30 {
                if i != j {
                    direct += prob.a[(i, j)] * y.column(i).dot(&y.column(j));
                }
            }
        }
        assert!((witness_objective(&prob.a, &y).unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (prob, mut rng) = small_problem(2);
        for &lambda in &[0.0, 3.0] {
            let y = random_start(&mut rng, 30, 4);
            let g = penalized_gradient(&prob, &y, lambda);
            let h = 1e-6;
            for (r, c) in [(0, 0), (3, 17), (2, 29)] {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[(r, c)] += h;
                ym[(r, c)] -= h;
                let fd = (penalized(&prob, &yp, lambda) - penalized(&prob, &ym, lambda)) / (2.0 * h);
                assert!((fd - g[(r, c)]).abs() <= 1e-5 * g[(r, c)].abs().max(1.0), "{fd} vs {}", g[(r, c)]);
            }
        }
    }

    #[test]
    fn zero_matrix_is_trivially_feasible() {
        let mut prob = WitnessProblem::new(&Graph::empty(10), 0.01, 10, 1.0).unwrap();
        prob.a = DMatrix::zeros(10, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = maximize_witness(&prob, random_start(&mut rng, 10, 10), &AscentOptions::default()).unwrap();
        assert_eq!(r.objective, 0.0);
        let r = maximize_witness(&prob, DMatrix::identity(10, 10), &AscentOptions::default()).unwrap();
        assert!(r.feasible);
        assert_eq!(r.tail_mass, 0.0);
    }

    #[test]
    fn ascent_never_loses_the_start() {
        let (prob, mut rng) = small_problem(4);
        let y0 = random_start(&mut rng, 30, 4);
        let f0 = witness_objective(&prob.a, &y0).unwrap();
        let r = maximize_witness(&prob, y0.clone(), &AscentOptions::default()).unwrap();
        let mut bounds = r.phases.clone();
        bounds.push(r.trace.len());
        for w in bounds.windows(2) {
            assert!(r.trace[w[0]..w[1]].windows(2).all(|t| t[1] >= t[0]));
        }
        if tail_mass(&y0, prob.cap) <= prob.tail_budget {
            assert!(r.objective >= f0);
        }
        assert!(r.y.column_iter().all(|c| (c.norm() - 1.0).abs() < 1e-9));
    }

    #[test]
    fn calibration_csv_roundtrip() {
        let c = Calibration { n: 300, p: 0.1, d: 8, c2: 1.5, c_b: 0.7, c_prime: 2.0, threshold: 1234.5 };
        let mut buf = Vec::new();
        write_calibration_csv(&[c], &mut buf).unwrap();
        let back = read_calibration_csv(&buf[..]).unwrap();
        assert_eq!(back[0].threshold, 1234.5);
        assert_eq!(back[0].n, 300);
        assert!(read_calibration_csv(&b"x,y\n"[..]).is_err());
    }

    #[test]
    fn degenerate_graphs() {
        let cal = Calibration { n: 40, p: 0.05, d: 4, c2: 1.0, c_b: 1.0, c_prime: 1.0, threshold: 50.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let opts = AscentOptions::default();
        let full = decide_witness(&mut rng, &Graph::complete(40), &cal, &opts).unwrap();
        assert_eq!(full.decision, Decision::Rgg);
        let empty = decide_witness(&mut rng, &Graph::empty(40), &cal, &opts).unwrap();
        assert_eq!(empty.decision, Decision::Null);
    }
}
