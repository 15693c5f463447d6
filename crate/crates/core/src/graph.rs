//! Simple undirected graphs and G(n, p) sampling.
//!
//! Two storage layouts are supported: CSR (sorted neighbor lists) for sparse
//! graphs and a dense row-major bit matrix for graphs whose expected degree
//! `pn` reaches [`DEFAULT_DENSE_THRESHOLD`].
//!
//! Sampling protocols (part of the reproducibility contract):
//!
//! * Unordered pairs are enumerated canonically: `(0,1), (0,2), .., (0,n-1),
//!   (1,2), ..`, i.e. sorted by `(min, max)`.
//! * `p == 0` and `p == 1` consume no randomness.
//! * Dense layout: one Bernoulli(p) draw per pair in canonical order.
//! * CSR layout: geometric skips. Starting before the first pair, draw
//!   `u = next_f64()`, set `skip = floor(ln(1 - u) / ln(1 - p))`, advance
//!   `skip + 1` pairs and emit the pair landed on; stop once past the last
//!   pair.

use std::io::{BufRead, Write};

use crate::error::{check_probability, Error, Result};
use crate::rng::RngStream;

/// Expected degree `pn` at and above which sampling picks the dense layout.
pub const DEFAULT_DENSE_THRESHOLD: f64 = 64.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Csr,
    Dense,
}

#[derive(Clone, Debug)]
enum Adjacency {
    Csr {
        offsets: Vec<usize>,
        neighbors: Vec<u32>,
    },
    Dense {
        words_per_row: usize,
        bits: Vec<u64>,
    },
}

/// Immutable simple graph on vertices `0..n`.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    edge_count: usize,
    degrees: Vec<u32>,
    adj: Adjacency,
}

impl Graph {
    /// Builds a graph from an edge list. Edges may come in any order and
    /// orientation; loops, duplicates and out-of-range endpoints are errors.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], layout: Layout) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("graph needs at least one vertex".into()));
        }
        let mut canon = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Domain(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            if a == b {
                return Err(Error::Domain(format!("self-loop at {a}")));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        if canon.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("duplicate edge".into()));
        }
        Ok(Self::from_canonical(n, &canon, layout))
    }

    /// `edges` must be strictly increasing in canonical order with `u < v`.
    fn from_canonical(n: usize, edges: &[(usize, usize)], layout: Layout) -> Self {
        let mut degrees = vec![0u32; n];
        for &(u, v) in edges {
            degrees[u] += 1;
            degrees[v] += 1;
        }
        let adj = match layout {
            Layout::Csr => {
                let mut offsets = Vec::with_capacity(n + 1);
                offsets.push(0);
                let mut acc = 0usize;
                for &d in &degrees {
                    acc += d as usize;
                    offsets.push(acc);
                }
                let mut fill: Vec<usize> = offsets[..n].to_vec();
                let mut neighbors = vec![0u32; acc];
                // Canonical order fills every list in ascending order.
                for &(u, v) in edges {
                    neighbors[fill[u]] = v as u32;
                    fill[u] += 1;
                    neighbors[fill[v]] = u as u32;
                    fill[v] += 1;
                }
                Adjacency::Csr { offsets, neighbors }
            }
            Layout::Dense => {
                let words_per_row = n.div_ceil(64);
                let mut bits = vec![0u64; words_per_row * n];
                for &(u, v) in edges {
                    bits[u * words_per_row + (v >> 6)] |= 1 << (v & 63);
                    bits[v * words_per_row + (u >> 6)] |= 1 << (u & 63);
                }
                Adjacency::Dense {
                    words_per_row,
                    bits,
                }
            }
        };
        let g = Self {
            n,
            edge_count: edges.len(),
            degrees,
            adj,
        };
        debug_assert_eq!(
            g.degrees.iter().map(|&d| d as usize).sum::<usize>(),
            2 * g.edge_count
        );
        g
    }

    pub fn empty(n: usize, layout: Layout) -> Result<Self> {
        Self::from_edges(n, &[], layout)
    }

    pub fn complete(n: usize, layout: Layout) -> Result<Self> {
        let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Self::from_edges(n, &edges, layout)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.degrees[v] as usize
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn layout(&self) -> Layout {
        match self.adj {
            Adjacency::Csr { .. } => Layout::Csr,
            Adjacency::Dense { .. } => Layout::Dense,
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        match &self.adj {
            Adjacency::Csr { offsets, neighbors } => neighbors[offsets[u]..offsets[u + 1]]
                .binary_search(&(v as u32))
                .is_ok(),
            Adjacency::Dense {
                words_per_row,
                bits,
            } => (bits[u * words_per_row + (v >> 6)] >> (v & 63)) & 1 == 1,
        }
    }

    /// Neighbor slice when stored as CSR.
    #[inline]
    pub fn csr_neighbors(&self, v: usize) -> Option<&[u32]> {
        match &self.adj {
            Adjacency::Csr { offsets, neighbors } => Some(&neighbors[offsets[v]..offsets[v + 1]]),
            Adjacency::Dense { .. } => None,
        }
    }

    /// Adjacency row as bit words when stored densely.
    #[inline]
    pub fn dense_row(&self, v: usize) -> Option<&[u64]> {
        match &self.adj {
            Adjacency::Dense {
                words_per_row,
                bits,
            } => Some(&bits[v * words_per_row..(v + 1) * words_per_row]),
            Adjacency::Csr { .. } => None,
        }
    }

    /// Neighbors of `v` in ascending order.
    pub fn neighbors(&self, v: usize) -> Neighbors<'_> {
        match &self.adj {
            Adjacency::Csr { offsets, neighbors } => {
                Neighbors::Csr(neighbors[offsets[v]..offsets[v + 1]].iter())
            }
            Adjacency::Dense {
                words_per_row,
                bits,
            } => Neighbors::Dense {
                row: &bits[v * words_per_row..(v + 1) * words_per_row],
                word: 0,
                cur: if *words_per_row > 0 { bits[v * words_per_row] } else { 0 },
            },
        }
    }

    /// Edges `(u, v)` with `u < v` in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| self.neighbors(u).filter(move |&v| v > u).map(move |v| (u, v)))
    }

    pub fn min_degree(&self) -> usize {
        self.degrees.iter().copied().min().unwrap_or(0) as usize
    }

    /// Same edge set in the requested layout.
    pub fn to_layout(&self, layout: Layout) -> Self {
        if layout == self.layout() {
            return self.clone();
        }
        let edges: Vec<_> = self.edges().collect();
        Self::from_canonical(self.n, &edges, layout)
    }

    /// CSR arrays `(offsets, neighbors)`, converting from dense if needed.
    pub fn csr_arrays(&self) -> (std::borrow::Cow<'_, [usize]>, std::borrow::Cow<'_, [u32]>) {
        use std::borrow::Cow;
        match &self.adj {
            Adjacency::Csr { offsets, neighbors } => (Cow::Borrowed(offsets), Cow::Borrowed(neighbors)),
            Adjacency::Dense { .. } => match self.to_layout(Layout::Csr).adj {
                Adjacency::Csr { offsets, neighbors } => (Cow::Owned(offsets), Cow::Owned(neighbors)),
                Adjacency::Dense { .. } => unreachable!(),
            },
        }
    }

    /// Full structural check: symmetry, no loops, no duplicates, degree cache.
    pub fn validate(&self) -> Result<()> {
        let mut total = 0usize;
        for v in 0..self.n {
            let mut count = 0usize;
            let mut last: Option<usize> = None;
            for u in self.neighbors(v) {
                if u == v {
                    return Err(Error::Domain(format!("self-loop at {v}")));
                }
                if u >= self.n {
                    return Err(Error::Domain(format!("neighbor {u} of {v} out of range")));
                }
                if last.is_some_and(|l| l >= u) {
                    return Err(Error::Domain(format!("unsorted or duplicate neighbors at {v}")));
                }
                if !self.has_edge(u, v) {
                    return Err(Error::Domain(format!("asymmetric edge {v} -> {u}")));
                }
                last = Some(u);
                count += 1;
            }
            if count != self.degree(v) {
                return Err(Error::Domain(format!("degree cache mismatch at {v}")));
            }
            total += count;
        }
        if total != 2 * self.edge_count {
            return Err(Error::Domain("degree sum != 2 * edge_count".into()));
        }
        Ok(())
    }

    /// Edge-list text: `n m` then one `u v` line per edge, `u < v`, in
    /// canonical order.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.edge_count)?;
        for (u, v) in self.edges() {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(r: R, layout: Layout) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let parse_pair = |line: usize, s: &str| -> Result<(usize, usize)> {
            let mut it = s.split_ascii_whitespace();
            let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Parse {
                    line,
                    msg: "expected two integers".into(),
                });
            };
            let parse = |t: &str| {
                t.parse::<usize>().map_err(|e| Error::Parse {
                    line,
                    msg: e.to_string(),
                })
            };
            Ok((parse(a)?, parse(b)?))
        };
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let (n, m) = parse_pair(1, &header?)?;
        let mut edges = Vec::with_capacity(m);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (u, v) = parse_pair(i + 1, &line)?;
            if u >= v {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected u < v, got {u} {v}"),
                });
            }
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header declares {m} edges, found {}", edges.len()),
            });
        }
        Self::from_edges(n, &edges, layout)
    }
}

pub enum Neighbors<'a> {
    Csr(std::slice::Iter<'a, u32>),
    Dense { row: &'a [u64], word: usize, cur: u64 },
}

impl Iterator for Neighbors<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        match self {
            Neighbors::Csr(it) => it.next().map(|&v| v as usize),
            Neighbors::Dense { row, word, cur } => loop {
                if *cur != 0 {
                    let b = cur.trailing_zeros() as usize;
                    *cur &= *cur - 1;
                    return Some(*word * 64 + b);
                }
                *word += 1;
                if *word >= row.len() {
                    return None;
                }
                *cur = row[*word];
            },
        }
    }
}

/// Layout chosen by [`sample_gnp`] for the given parameters.
pub fn auto_layout(n: usize, p: f64, dense_threshold: f64) -> Layout {
    if p * n as f64 >= dense_threshold {
        Layout::Dense
    } else {
        Layout::Csr
    }
}

/// Samples G(n, p), choosing the layout from [`DEFAULT_DENSE_THRESHOLD`].
pub fn sample_gnp(n: usize, p: f64, rng: &mut RngStream) -> Result<Graph> {
    sample_gnp_with(n, p, rng, auto_layout(n, p, DEFAULT_DENSE_THRESHOLD))
}

/// Samples G(n, p) into a fixed layout. The layout also fixes the sampling
/// protocol (see module docs).
pub fn sample_gnp_with(n: usize, p: f64, rng: &mut RngStream, layout: Layout) -> Result<Graph> {
    check_probability("p", p)?;
    if n == 0 {
        return Err(Error::InvalidSize("n must be at least 1".into()));
    }
    if p == 0.0 {
        return Graph::empty(n, layout);
    }
    if p == 1.0 {
        return Graph::complete(n, layout);
    }
    let g = match layout {
        Layout::Dense => sample_dense(n, p, rng),
        Layout::Csr => {
            let edges = geometric_skip_edges(n, p, rng);
            Graph::from_canonical(n, &edges, Layout::Csr)
        }
    };
    Ok(g)
}

fn sample_dense(n: usize, p: f64, rng: &mut RngStream) -> Graph {
    let words_per_row = n.div_ceil(64);
    let mut bits = vec![0u64; words_per_row * n];
    let mut degrees = vec![0u32; n];
    let mut edge_count = 0usize;
    for u in 0..n {
        for v in u + 1..n {
            if rng.bernoulli(p) {
                bits[u * words_per_row + (v >> 6)] |= 1 << (v & 63);
                bits[v * words_per_row + (u >> 6)] |= 1 << (u & 63);
                degrees[u] += 1;
                degrees[v] += 1;
                edge_count += 1;
            }
        }
    }
    Graph {
        n,
        edge_count,
        degrees,
        adj: Adjacency::Dense {
            words_per_row,
            bits,
        },
    }
}

/// Canonical-order edge list for `0 < p < 1` via geometric skips.
pub(crate) fn geometric_skip_edges(n: usize, p: f64, rng: &mut RngStream) -> Vec<(usize, usize)> {
    let ln_q = (-p).ln_1p();
    let total_pairs = (n as u64) * (n as u64 - 1) / 2;
    let mut edges = Vec::with_capacity((p * total_pairs as f64 * 1.1) as usize + 16);
    // Cursor (u, v) sits on the last visited pair; (0, 0) is "before (0, 1)".
    let (mut u, mut v) = (0usize, 0usize);
    let mut remaining = total_pairs;
    loop {
        let skip = ((1.0 - rng.next_f64()).ln() / ln_q).floor();
        if skip >= remaining as f64 {
            break;
        }
        let step = skip as u64 + 1;
        remaining -= step;
        let mut advance = step as usize;
        // Walk rows; row u spans v in (u, n).
        loop {
            let room = n - 1 - v;
            if advance <= room {
                v += advance;
                break;
            }
            advance -= room;
            u += 1;
            v = u;
        }
        edges.push((u, v));
    }
    edges
}
