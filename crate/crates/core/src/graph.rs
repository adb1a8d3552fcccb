//! Simple graphs on labelled vertices, latent embeddings, the two samplers and
//! their on-disk formats.

use std::io::{BufRead, Read, Write};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::sphere_law::{fill_sphere, SphericalLaw};

/// Undirected simple graph stored as one bit per unordered pair.
///
/// Pair `{i, j}` with `i < j` lives at bit `j (j - 1) / 2 + i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    bits: Vec<u64>,
}

#[inline]
pub fn pair_index(i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    j * (j - 1) / 2 + i
}

pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph { n, bits: vec![0; pair_count(n).div_ceil(64)] }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        let m = pair_count(n);
        for w in 0..g.bits.len() {
            let left = m - 64 * w;
            g.bits[w] = if left >= 64 { u64::MAX } else { (1u64 << left) - 1 };
        }
        g
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(i, j) in edges {
            if i == j || i >= n || j >= n {
                return Err(Error::Format(format!("invalid edge ({i}, {j}) for n = {n}")));
            }
            g.set_edge(i, j, true);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let k = pair_index(i, j);
        self.bits[k >> 6] >> (k & 63) & 1 == 1
    }

    #[inline]
    pub fn set_edge(&mut self, i: usize, j: usize, on: bool) {
        assert!(i != j, "self-loops are not representable");
        let k = pair_index(i, j);
        if on {
            self.bits[k >> 6] |= 1 << (k & 63);
        } else {
            self.bits[k >> 6] &= !(1 << (k & 63));
        }
    }

    pub fn toggle(&mut self, i: usize, j: usize) {
        let k = pair_index(i, j);
        self.bits[k >> 6] ^= 1 << (k & 63);
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn density(&self) -> f64 {
        self.edge_count() as f64 / pair_count(self.n) as f64
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.has_edge(i, j)).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for (i, j) in self.edges() {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Edges `(i, j)` with `i < j`, ordered by `i` then `j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).filter(move |&j| self.has_edge(i, j)).map(move |j| (i, j)))
    }

    /// Number of unordered pairs on which the two graphs differ.
    pub fn diff_count(&self, other: &Graph) -> usize {
        assert_eq!(self.n, other.n);
        self.bits.iter().zip(&other.bits).map(|(a, b)| (a ^ b).count_ones() as usize).sum()
    }

    /// Pairs `(i, j)`, `i < j`, on which the graphs differ.
    pub fn diff_pairs(&self, other: &Graph) -> Vec<(usize, usize)> {
        assert_eq!(self.n, other.n);
        let mut out = Vec::new();
        for j in 1..self.n {
            for i in 0..j {
                if self.has_edge(i, j) != other.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Whether every edge of `self` is an edge of `other`.
    pub fn is_subgraph_of(&self, other: &Graph) -> bool {
        self.n == other.n && self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    /// Text format: `n m` followed by one `i j` line per edge.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.edge_count())?;
        for (i, j) in self.edges() {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty graph file".into()))??;
        let nums = parse_pair(&header)?;
        let (n, m) = nums;
        let mut g = Graph::empty(n);
        let mut prev: Option<(usize, usize)> = None;
        let mut seen = 0;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (i, j) = parse_pair(&line)?;
            if !(i < j && j < n) {
                return Err(Error::Format(format!("edge line '{line}' needs 0 <= i < j < {n}")));
            }
            if prev.is_some_and(|p| p >= (i, j)) {
                return Err(Error::Format(format!("edge ({i}, {j}) out of lexicographic order")));
            }
            prev = Some((i, j));
            g.set_edge(i, j, true);
            seen += 1;
        }
        if seen != m {
            return Err(Error::Format(format!("header announces {m} edges, found {seen}")));
        }
        Ok(g)
    }

    pub fn from_text(s: &str) -> Result<Self> {
        Self::read_text(s.as_bytes())
    }
}

fn parse_pair(line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace().map(|t| t.parse::<usize>());
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
        _ => Err(Error::Format(format!("expected two integers, got '{line}'"))),
    }
}

/// `n` unit vectors in dimension `d`, stored column after column.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentEmbedding {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

const EMBEDDING_MAGIC: &[u8; 4] = b"RGGE";

impl LatentEmbedding {
    pub fn from_columns(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, got: data.len() });
        }
        let e = LatentEmbedding { n, d, data };
        for i in 0..n {
            let v = e.column(i);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::NonUnit { norm });
            }
        }
        Ok(e)
    }

    /// I.i.d. uniform columns.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> Self {
        let mut data = vec![0.0; n * d];
        for col in data.chunks_mut(d.max(1)) {
            fill_sphere(rng, col);
        }
        LatentEmbedding { n, d, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn column_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    /// Columns `0..j` and a mutable view of columns `j..n`.
    pub fn split_at_column_mut(&mut self, j: usize) -> (&[f64], &mut [f64]) {
        let (a, b) = self.data.split_at_mut(j * self.d);
        (a, b)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn inner(&self, i: usize, j: usize) -> f64 {
        crate::flip::dot(self.column(i), self.column(j))
    }

    /// `V^T V` as a dense `n x n` matrix.
    pub fn gram(&self) -> DMatrix<f64> {
        let v = DMatrix::from_column_slice(self.d, self.n, &self.data);
        v.tr_mul(&v)
    }

    pub fn max_norm_error(&self) -> f64 {
        (0..self.n).map(|i| (self.column(i).iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Binary format: `RGGE`, `u32 n`, `u32 d`, then `n d` little-endian f64.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let too_big = |v: usize| u32::try_from(v).map_err(|_| Error::Format(format!("{v} exceeds u32")));
        w.write_all(EMBEDDING_MAGIC)?;
        w.write_all(&too_big(self.n)?.to_le_bytes())?;
        w.write_all(&too_big(self.d)?.to_le_bytes())?;
        for x in &self.data {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != EMBEDDING_MAGIC {
            return Err(Error::Format("missing RGGE header".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let n = u32::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let d = u32::from_le_bytes(word) as usize;
        let mut data = vec![0.0; n * d];
        let mut buf = [0u8; 8];
        for x in data.iter_mut() {
            r.read_exact(&mut buf)?;
            *x = f64::from_le_bytes(buf);
        }
        Self::from_columns(n, d, data)
    }
}

/// Erdős–Rényi `G(n, p)`.
pub fn sample_er<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("edge probability {p} outside [0,1]")));
    }
    let mut g = Graph::empty(n);
    for j in 1..n {
        for i in 0..j {
            if rng.random::<f64>() < p {
                g.set_edge(i, j, true);
            }
        }
    }
    Ok(g)
}

/// Thresholds the embedding's inner products at the law's `tau`.
pub fn realize_rgg(emb: &LatentEmbedding, law: &SphericalLaw) -> Result<Graph> {
    if emb.d() != law.d() {
        return Err(Error::DimensionMismatch { expected: law.d(), got: emb.d() });
    }
    Ok(threshold_gram(&emb.gram(), law.tau()))
}

/// Graph with an edge wherever the Gram entry is at least `t`.
pub fn threshold_gram(gram: &DMatrix<f64>, t: f64) -> Graph {
    let n = gram.nrows();
    let mut g = Graph::empty(n);
    for j in 1..n {
        for i in 0..j {
            if gram[(i, j)] >= t {
                g.set_edge(i, j, true);
            }
        }
    }
    g
}

/// Spherical random geometric graph with its latent vectors.
pub fn sample_rgg<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, p: f64) -> Result<(Graph, LatentEmbedding)> {
    let law = SphericalLaw::new(d, p)?;
    sample_rgg_with(rng, n, &law)
}

pub fn sample_rgg_with<R: Rng + ?Sized>(rng: &mut R, n: usize, law: &SphericalLaw) -> Result<(Graph, LatentEmbedding)> {
    let emb = LatentEmbedding::sample(rng, n, law.d());
    let g = realize_rgg(&emb, law)?;
    Ok((g, emb))
}
