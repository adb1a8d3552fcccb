//! Graph statistics (signed triangles, extreme eigenvalue, connectivity) and
//! the edge-corruption adversaries.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coupling::{couple, CouplingConfig};
use crate::error::{Error, Result};
use crate::graph::{pair_count, Graph};

/// The `p`-centred adjacency matrix: `1 - p` on edges, `-p` on non-edges,
/// zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredAdjacency {
    pub p: f64,
    pub values: DMatrix<f64>,
}

impl CenteredAdjacency {
    pub fn new(g: &Graph, p: f64) -> Self {
        let n = g.n();
        let mut values = DMatrix::from_element(n, n, -p);
        for i in 0..n {
            values[(i, i)] = 0.0;
        }
        for (i, j) in g.edges() {
            values[(i, j)] = 1.0 - p;
            values[(j, i)] = 1.0 - p;
        }
        CenteredAdjacency { p, values }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Recovers the graph (entries above the midpoint of `-p` and `1 - p`).
    pub fn decenter(&self) -> Graph {
        let n = self.n();
        let mid = 0.5 - self.p;
        let mut g = Graph::empty(n);
        for j in 1..n {
            for i in 0..j {
                if self.values[(i, j)] > mid {
                    g.set_edge(i, j, true);
                }
            }
        }
        g
    }
}

/// `sum over triples of (G_ij - p)(G_jk - p)(G_ki - p)`, as `tr(A^3) / 6`.
pub fn signed_triangles(g: &Graph, p: f64) -> f64 {
    let a = CenteredAdjacency::new(g, p).values;
    let a2 = &a * &a;
    // tr(A A^2) = sum_ij A_ij (A^2)_ji, and A^2 is symmetric
    a.component_mul(&a2).sum() / 6.0
}

/// Largest-magnitude eigenvalue by a dense symmetric eigendecomposition.
pub fn dense_lambda_max_abs(a: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(a.clone());
    eig.eigenvalues.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m }).abs()
}

/// Top-`k` eigenpairs (by eigenvalue, descending) of a symmetric matrix.
pub fn top_eigenpairs(a: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let k = k.min(order.len());
    let vals = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(a.nrows(), k);
    for (c, &i) in order[..k].iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenEstimate {
    /// `|lambda|` of the extreme eigenvalue.
    pub value: f64,
    pub converged: bool,
    pub matvecs: usize,
}

/// Largest-magnitude eigenvalue of a symmetric matrix by restarted Lanczos
/// with full reorthogonalization.
///
/// Returns the best estimate with `converged = false` if the residual test
/// `|beta_k s_k| <= tol |theta|` is not met within `max_iter` matrix-vector
/// products.
pub fn lanczos_lambda_max_abs(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<EigenEstimate> {
    let n = a.nrows();
    if n < 2 || a.ncols() != n {
        return Err(Error::Domain(format!("need a square matrix with n >= 2, got {}x{}", n, a.ncols())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 ^ n as u64);
    let mut start = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    let basis_cap = n.min(64);
    let mut best = 0.0f64;
    let mut used = 0;
    while used < max_iter {
        start /= start.norm();
        let mut q: Vec<DVector<f64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut exhausted = false;
        for k in 0..basis_cap {
            let mut w = a * &q[k];
            used += 1;
            let ak = q[k].dot(&w);
            alpha.push(ak);
            // full reorthogonalization, twice for stability
            for _ in 0..2 {
                for qi in &q {
                    let c = qi.dot(&w);
                    w.axpy(-c, qi, 1.0);
                }
            }
            let bk = w.norm();
            if bk <= 1e-14 * ak.abs().max(1.0) || k + 1 == basis_cap || used >= max_iter {
                exhausted = bk <= 1e-14 * ak.abs().max(1.0);
                beta.push(bk);
                break;
            }
            beta.push(bk);
            q.push(w / bk);
        }
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (idx, theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .map(|(i, v)| (i, *v))
            .expect("nonempty tridiagonal");
        best = theta.abs();
        let s = eig.eigenvectors.column(idx);
        let residual = (beta[m - 1] * s[m - 1]).abs();
        if exhausted || residual <= tol * theta.abs().max(f64::MIN_POSITIVE) {
            return Ok(EigenEstimate { value: best, converged: true, matvecs: used });
        }
        // restart from the current Ritz vector
        let mut ritz = DVector::zeros(n);
        for (k, qk) in q.iter().enumerate().take(m) {
            ritz.axpy(s[k], qk, 1.0);
        }
        start = ritz;
    }
    Ok(EigenEstimate { value: best, converged: false, matvecs: used })
}

/// `|lambda|_max` of the centred adjacency matrix.
pub fn lambda_max_abs(a: &CenteredAdjacency, tol: f64, max_iter: usize) -> Result<EigenEstimate> {
    lanczos_lambda_max_abs(&a.values, tol, max_iter)
}

/// Default-tolerance version used by the deciders.
pub fn graph_lambda_max_abs(g: &Graph, p: f64) -> Result<f64> {
    let a = CenteredAdjacency::new(g, p);
    let est = lambda_max_abs(&a, 1e-6, 10 * a.n().max(10))?;
    if !est.converged {
        log::warn!("eigenvalue iteration stopped before convergence (estimate {})", est.value);
    }
    Ok(est.value)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub fn connectivity(g: &Graph) -> bool {
    let n = g.n();
    if n <= 1 {
        return true;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let mut components = n;
    for (i, j) in g.edges() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
            components -= 1;
            if components == 1 {
                return true;
            }
        }
    }
    components == 1
}

pub fn min_degree(g: &Graph) -> usize {
    g.degrees().into_iter().min().unwrap_or(0)
}

/// Number of pairs an adversary may change: `floor(eps * C(n, 2) * p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversaryBudget {
    pub epsilon: f64,
    pub budget: usize,
}

impl AdversaryBudget {
    pub fn new(epsilon: f64, n: usize, p: f64) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::Domain(format!("corruption fraction {epsilon} must be nonnegative")));
        }
        let budget = (epsilon * pair_count(n) as f64 * p).floor() as usize;
        Ok(AdversaryBudget { epsilon, budget })
    }

    pub fn exact(budget: usize) -> Self {
        AdversaryBudget { epsilon: f64::NAN, budget }
    }
}

/// Plants a clique on `k` random vertices (default `floor(sqrt(2 budget))`),
/// adding missing edges until the budget runs out.
pub fn adversary_clique<R: Rng + ?Sized>(rng: &mut R, g: &Graph, budget: AdversaryBudget, k: Option<usize>) -> Graph {
    let n = g.n();
    let k = k.unwrap_or(((2.0 * budget.budget as f64).sqrt()).floor() as usize).min(n);
    let mut out = g.clone();
    if k < 2 || budget.budget == 0 {
        return out;
    }
    let mut members: Vec<usize> = sample_indices(rng, n, k).into_vec();
    members.sort_unstable();
    let mut left = budget.budget;
    'outer: for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            if left == 0 {
                break 'outer;
            }
            if !out.has_edge(i, j) {
                out.set_edge(i, j, true);
                left -= 1;
            }
        }
    }
    debug_assert!(out.diff_count(g) <= budget.budget);
    out
}

/// Flips exactly `min(budget, C(n, 2))` uniformly chosen distinct pairs.
pub fn adversary_random<R: Rng + ?Sized>(rng: &mut R, g: &Graph, budget: AdversaryBudget) -> Graph {
    let n = g.n();
    let total = pair_count(n);
    let m = budget.budget.min(total);
    let mut out = g.clone();
    for idx in sample_indices(rng, total, m) {
        // invert idx = j (j - 1) / 2 + i
        let mut j = ((1.0 + (1.0 + 8.0 * idx as f64).sqrt()) / 2.0).floor() as usize;
        while j * (j - 1) / 2 > idx {
            j -= 1;
        }
        while (j + 1) * j / 2 <= idx {
            j += 1;
        }
        let i = idx - j * (j - 1) / 2;
        out.toggle(i, j);
    }
    out
}

/// Replaces `H` by the geometric graph its coupling realizes; only fragile
/// pairs can change.
pub fn adversary_coupling<R: Rng + ?Sized>(rng: &mut R, h: &Graph, cfg: &CouplingConfig) -> Result<Graph> {
    Ok(couple(rng, h, cfg)?.realized)
}
