//! The MRF prior graph: construction, perturbation and the edge-list file format.
//!
//! Edge-list files start with a `p=<dim>` header followed by one
//! `i j weight` line per edge (1-based indices, `i < j`). Blank lines and lines
//! starting with `#` are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Symmetric, non-negative, zero-diagonal `p x p` edge-weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorGraph {
    p: usize,
    weights: Vec<f64>,
}

impl PriorGraph {
    /// Validates a row-major weight matrix.
    pub fn from_dense(p: usize, weights: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidGraph("dimension must be >= 1".into()));
        }
        if weights.len() != p * p {
            return Err(Error::Dimension(format!(
                "{} weights for a {p}x{p} graph",
                weights.len()
            )));
        }
        for i in 0..p {
            if weights[i * p + i] != 0.0 {
                return Err(Error::InvalidGraph(format!("non-zero diagonal at vertex {}", i + 1)));
            }
            for j in (i + 1)..p {
                let w = weights[i * p + j];
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::InvalidGraph(format!(
                        "weight ({}, {}) = {w} must be finite and non-negative",
                        i + 1,
                        j + 1
                    )));
                }
                if w != weights[j * p + i] {
                    return Err(Error::InvalidGraph(format!(
                        "asymmetric weights at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { p, weights })
    }

    pub fn empty(p: usize) -> Result<Self> {
        Self::from_dense(p, vec![0.0; p * p])
    }

    /// Unit-weight graph from the off-diagonal non-zero pattern of a precision matrix.
    pub fn from_precision_pattern(omega: &DMatrix<f64>, tol: f64) -> Result<Self> {
        let p = omega.nrows();
        if omega.ncols() != p {
            return Err(Error::Dimension(format!(
                "precision matrix is {}x{}",
                omega.nrows(),
                omega.ncols()
            )));
        }
        let mut weights = vec![0.0; p * p];
        for i in 0..p {
            for j in (i + 1)..p {
                let (a, b) = (omega[(i, j)], omega[(j, i)]);
                if (a - b).abs() > tol.max(1e-12 * a.abs().max(b.abs())) {
                    return Err(Error::InvalidGraph(format!(
                        "precision matrix is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
                if a.abs() > tol {
                    weights[i * p + j] = 1.0;
                    weights[j * p + i] = 1.0;
                }
            }
        }
        Self::from_dense(p, weights)
    }

    /// Unit-weight graph from 0-based edges.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(p)?;
        for &(i, j) in edges {
            if i >= p || j >= p || i == j {
                return Err(Error::InvalidGraph(format!("invalid edge ({i}, {j})")));
            }
            g.set(i, j, 1.0);
        }
        Ok(g)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.p + j]
    }

    pub fn as_dense(&self) -> &[f64] {
        &self.weights
    }

    fn set(&mut self, i: usize, j: usize, w: f64) {
        self.weights[i * self.p + j] = w;
        self.weights[j * self.p + i] = w;
    }

    /// Number of strictly upper-triangular non-zero entries.
    pub fn edge_count(&self) -> usize {
        self.upper_edges().count()
    }

    /// Upper-triangle edges `(i, j, w)` with `i < j`, in row-major order.
    pub fn upper_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.p).flat_map(move |i| {
            ((i + 1)..self.p).filter_map(move |j| {
                let w = self.weight(i, j);
                (w != 0.0).then_some((i, j, w))
            })
        })
    }

    /// Weighted adjacency lists.
    pub fn neighbors(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.p)
            .map(|i| {
                (0..self.p)
                    .filter_map(|j| {
                        let w = self.weight(i, j);
                        (w != 0.0).then_some((j, w))
                    })
                    .collect()
            })
            .collect()
    }

    /// Keeps the edges whose 1-based position in the row-major upper-triangle
    /// enumeration is congruent to 1 modulo `k`.
    pub fn remove_edges_uniform(&self, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("uniform removal needs k >= 2, got {k}")));
        }
        let mut out = Self::empty(self.p)?;
        for (pos, (i, j, w)) in self.upper_edges().enumerate() {
            if pos % k == 0 {
                out.set(i, j, w);
            }
        }
        Ok(out)
    }

    /// Removes the within-block edges of the 0-based `block`; with `disconnect`,
    /// zeroes the whole rows and columns of the block instead.
    pub fn remove_block_edges(&self, block: &[usize], disconnect: bool) -> Result<Self> {
        if let Some(&bad) = block.iter().find(|&&b| b >= self.p) {
            return Err(Error::InvalidArgument(format!(
                "block index {} outside 1..={}",
                bad + 1,
                self.p
            )));
        }
        let mut out = self.clone();
        for &a in block {
            if disconnect {
                for j in 0..self.p {
                    out.set(a, j, 0.0);
                }
            } else {
                for &b in block {
                    if a != b {
                        out.set(a, b, 0.0);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Adds `round(fraction * edge_count)` unit-weight edges chosen uniformly
    /// without replacement among the current non-edges.
    pub fn add_false_edges(&self, fraction: f64, seed: u64) -> Result<Self> {
        let existing = self.edge_count();
        if existing == 0 {
            return Err(Error::InvalidArgument(
                "cannot add false edges relative to an empty graph".into(),
            ));
        }
        if !(fraction.is_finite() && fraction > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "false-edge fraction must be positive, got {fraction}"
            )));
        }
        // round half up
        let m = (fraction * existing as f64 + 0.5).floor() as usize;
        let non_edges: Vec<(usize, usize)> = (0..self.p)
            .flat_map(|i| ((i + 1)..self.p).map(move |j| (i, j)))
            .filter(|&(i, j)| self.weight(i, j) == 0.0)
            .collect();
        if m > non_edges.len() {
            return Err(Error::InvalidArgument(format!(
                "requested {m} false edges but only {} non-edges exist",
                non_edges.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen = rand::seq::index::sample(&mut rng, non_edges.len(), m).into_vec();
        chosen.sort_unstable();
        let mut out = self.clone();
        for idx in chosen {
            let (i, j) = non_edges[idx];
            out.set(i, j, 1.0);
        }
        Ok(out)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = format!("p={}\n", self.p);
        for (i, j, w) in self.upper_edges() {
            let _ = writeln!(s, "{} {} {}", i + 1, j + 1, w);
        }
        s
    }

    pub fn parse_edge_list(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Format {
            path: source.to_owned(),
            message: format!("line {line}: {message}"),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines
            .next()
            .ok_or_else(|| err(1, "missing `p=<dim>` header".into()))?;
        let p: usize = header
            .strip_prefix("p=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| err(hline, format!("expected `p=<dim>`, found `{header}`")))?;
        let mut g = Self::empty(p)?;
        for (ln, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(ln, format!("expected `i j weight`, found `{line}`")));
            }
            let i: usize = fields[0]
                .parse()
                .map_err(|_| err(ln, format!("bad vertex `{}`", fields[0])))?;
            let j: usize = fields[1]
                .parse()
                .map_err(|_| err(ln, format!("bad vertex `{}`", fields[1])))?;
            let w: f64 = fields[2]
                .parse()
                .map_err(|_| err(ln, format!("bad weight `{}`", fields[2])))?;
            if i == 0 || j == 0 || i > p || j > p || i == j {
                return Err(err(ln, format!("edge ({i}, {j}) invalid for p={p}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(err(ln, format!("weight {w} must be finite and non-negative")));
            }
            g.set(i - 1, j - 1, w);
        }
        Ok(g)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(&text, &path.display().to_string())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))
    }
}
