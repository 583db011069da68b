//! Bipartite observation graphs.
//!
//! Row vertices are indexed `0..n_rows`, column vertices `0..n_cols`. Edges
//! are kept sorted by `(row, col)` and the position of an edge in that order
//! is its *edge id*, which the solvers use to index observed values and
//! per-edge messages.

use std::collections::{HashSet, VecDeque};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, Side};

/// A row or column vertex of a [`BipartiteGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Vertex {
    pub side: Side,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    n_rows: usize,
    n_cols: usize,
    edges: Vec<(usize, usize)>,
    row_offsets: Vec<usize>,
    row_neighbors: Vec<Vec<usize>>,
    col_neighbors: Vec<Vec<usize>>,
    col_edge_ids: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    /// Builds a graph from an arbitrary edge collection. Duplicates are
    /// dropped; out-of-range indices are rejected.
    pub fn from_edges<I>(n_rows: usize, n_cols: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut edges: Vec<(usize, usize)> = edges.into_iter().collect();
        for &(row, col) in &edges {
            if row >= n_rows || col >= n_cols {
                return Err(Error::IndexOutOfRange {
                    row,
                    col,
                    n_rows,
                    n_cols,
                });
            }
        }
        edges.sort_unstable();
        edges.dedup();

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut row_neighbors = vec![Vec::new(); n_rows];
        let mut col_neighbors = vec![Vec::new(); n_cols];
        let mut col_edge_ids = vec![Vec::new(); n_cols];
        for (id, &(row, col)) in edges.iter().enumerate() {
            row_offsets[row + 1] += 1;
            row_neighbors[row].push(col);
            // ids are visited in (row, col) order, so each column list is sorted by row
            col_neighbors[col].push(row);
            col_edge_ids[col].push(id);
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }

        Ok(Self {
            n_rows,
            n_cols,
            edges,
            row_offsets,
            row_neighbors,
            col_neighbors,
            col_edge_ids,
        })
    }

    /// The graph with no edges.
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self::from_edges(n_rows, n_cols, std::iter::empty()).expect("no edges to validate")
    }

    /// Complete bipartite graph `K_{n_rows, n_cols}`.
    pub fn complete(n_rows: usize, n_cols: usize) -> Self {
        let edges = (0..n_rows).flat_map(|i| (0..n_cols).map(move |j| (i, j)));
        Self::from_edges(n_rows, n_cols, edges).expect("indices in range")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.n_rows + self.n_cols
    }

    /// Edges sorted by `(row, col)`; the slice position is the edge id.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> (usize, usize) {
        self.edges[id]
    }

    pub fn edge_id(&self, row: usize, col: usize) -> Option<usize> {
        if row >= self.n_rows {
            return None;
        }
        let range = self.row_edge_ids(row);
        let start = range.start;
        self.row_neighbors[row]
            .binary_search(&col)
            .ok()
            .map(|pos| start + pos)
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.edge_id(row, col).is_some()
    }

    /// Sorted column neighbors of row `i`.
    pub fn row_neighbors(&self, i: usize) -> &[usize] {
        &self.row_neighbors[i]
    }

    /// Sorted row neighbors of column `j`.
    pub fn col_neighbors(&self, j: usize) -> &[usize] {
        &self.col_neighbors[j]
    }

    /// Edge ids incident to row `i`, aligned with [`Self::row_neighbors`].
    pub fn row_edge_ids(&self, i: usize) -> std::ops::Range<usize> {
        self.row_offsets[i]..self.row_offsets[i + 1]
    }

    /// Edge ids incident to column `j`, aligned with [`Self::col_neighbors`].
    pub fn col_edge_ids(&self, j: usize) -> &[usize] {
        &self.col_edge_ids[j]
    }

    pub fn row_degree(&self, i: usize) -> usize {
        self.row_neighbors[i].len()
    }

    pub fn col_degree(&self, j: usize) -> usize {
        self.col_neighbors[j].len()
    }

    pub fn degree(&self, v: Vertex) -> usize {
        match v.side {
            Side::Row => self.row_degree(v.index),
            Side::Col => self.col_degree(v.index),
        }
    }

    fn all_degrees(&self) -> impl Iterator<Item = (Vertex, usize)> + '_ {
        let rows = self.row_neighbors.iter().enumerate().map(|(index, nb)| {
            (
                Vertex {
                    side: Side::Row,
                    index,
                },
                nb.len(),
            )
        });
        let cols = self.col_neighbors.iter().enumerate().map(|(index, nb)| {
            (
                Vertex {
                    side: Side::Col,
                    index,
                },
                nb.len(),
            )
        });
        rows.chain(cols)
    }

    /// Maximum degree over all vertices of both sides; 0 for an empty graph.
    pub fn max_degree(&self) -> usize {
        self.all_degrees().map(|(_, d)| d).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.all_degrees().map(|(_, d)| d).min().unwrap_or(0)
    }

    /// First vertex (rows before columns) whose degree is below `threshold`.
    pub fn first_vertex_below_degree(&self, threshold: usize) -> Option<(Vertex, usize)> {
        self.all_degrees().find(|&(_, d)| d < threshold)
    }

    /// Deduplicated union with `extra`. Out-of-range indices are rejected.
    pub fn union(&self, extra: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges(
            self.n_rows,
            self.n_cols,
            self.edges.iter().copied().chain(extra.iter().copied()),
        )
    }

    // Joint numbering used for traversal: rows first, then columns.
    fn joint_neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        let (rows, cols): (&[usize], &[usize]) = if v < self.n_rows {
            (&[], &self.row_neighbors[v])
        } else {
            (&self.col_neighbors[v - self.n_rows], &[])
        };
        let offset = self.n_rows;
        rows.iter()
            .copied()
            .chain(cols.iter().map(move |&c| c + offset))
    }

    /// True iff both sides jointly form one connected component.
    pub fn is_connected(&self) -> bool {
        let n = self.n_vertices();
        n > 0 && bfs_eccentricity(n, 0, |v| self.joint_neighbors(v)).is_some()
    }

    /// Exact diameter via breadth-first search from every vertex.
    pub fn diameter(&self) -> Result<usize> {
        diameter_of(self.n_vertices(), |v| self.joint_neighbors(v))
    }

    /// Simple edge-list text format: header `n_rows n_cols n_edges`, then one
    /// `i j` pair per line.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {}", self.n_rows, self.n_cols, self.edges.len())?;
        for &(i, j) in &self.edges {
            writeln!(out, "{i} {j}")?;
        }
        Ok(())
    }

    pub fn to_edge_list_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_edge_list(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = numbered_content_lines(input);
        let (line_no, header) = lines.next().transpose()?.ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let fields = parse_usizes(&header, 3, line_no)?;
        let (n_rows, n_cols, n_edges) = (fields[0], fields[1], fields[2]);
        let mut edges = Vec::with_capacity(n_edges);
        for item in lines {
            let (line_no, line) = item?;
            let f = parse_usizes(&line, 2, line_no)?;
            edges.push((f[0], f[1]));
        }
        if edges.len() != n_edges {
            return Err(Error::Parse {
                line: 1,
                message: format!("header declares {n_edges} edges, found {}", edges.len()),
            });
        }
        Self::from_edges(n_rows, n_cols, edges)
    }
}

pub(crate) fn numbered_content_lines<R: BufRead>(
    input: R,
) -> impl Iterator<Item = Result<(usize, String)>> {
    input
        .lines()
        .enumerate()
        .map(|(k, line)| line.map(|l| (k + 1, l)).map_err(Error::from))
        .filter(|item| match item {
            Ok((_, l)) => !l.trim().is_empty(),
            Err(_) => true,
        })
}

fn parse_usizes(line: &str, expected: usize, line_no: usize) -> Result<Vec<usize>> {
    let values: Vec<usize> = line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
    if values.len() != expected {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected {expected} fields, found {}", values.len()),
        });
    }
    Ok(values)
}

/// BFS from `source`; returns the eccentricity, or `None` if some vertex is
/// unreachable.
fn bfs_eccentricity<F, I>(n: usize, source: usize, neighbors: F) -> Option<usize>
where
    F: Fn(usize) -> I,
    I: Iterator<Item = usize>,
{
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    let mut reached = 1;
    let mut ecc = 0;
    while let Some(v) = queue.pop_front() {
        for w in neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                ecc = ecc.max(dist[w]);
                reached += 1;
                queue.push_back(w);
            }
        }
    }
    (reached == n).then_some(ecc)
}

fn diameter_of<F, I>(n: usize, neighbors: F) -> Result<usize>
where
    F: Fn(usize) -> I,
    I: Iterator<Item = usize>,
{
    if n == 0 {
        return Err(Error::Disconnected);
    }
    let mut diameter = 0;
    for source in 0..n {
        let ecc = bfs_eccentricity(n, source, &neighbors).ok_or(Error::Disconnected)?;
        diameter = diameter.max(ecc);
    }
    Ok(diameter)
}

/// Uniformly random `d`-regular simple bipartite graph on `n + n` vertices.
///
/// The graph is the union of `d` independent uniformly random perfect
/// matchings, resampled wholesale whenever two matchings share an edge. For
/// `d > n / 2` the complement `(n - d)`-regular graph is generated instead.
/// When the wholesale rejection rate becomes prohibitive (more than four
/// matchings) each matching is instead drawn as a randomized perfect matching
/// of the bipartite complement of the edges placed so far; that path is not
/// exactly uniform over regular graphs.
pub fn gen_random_regular_bipartite(n: usize, d: usize, seed: u64) -> Result<BipartiteGraph> {
    if d == 0 || d > n {
        return Err(Error::InvalidArgument(format!(
            "degree must satisfy 1 <= d <= n, got d = {d}, n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let complement = d > n - d;
    let k = if complement { n - d } else { d };

    let matchings = if k <= 4 {
        rejection_matchings(n, k, &mut rng)
    } else {
        sequential_matchings(n, k, &mut rng)
    };

    let mut adjacency = vec![vec![false; n]; n];
    for perm in &matchings {
        for (i, &j) in perm.iter().enumerate() {
            adjacency[i][j] = true;
        }
    }
    let edges = (0..n).flat_map(|i| {
        let row = &adjacency[i];
        (0..n)
            .filter(move |&j| row[j] != complement)
            .map(move |j| (i, j))
    });
    BipartiteGraph::from_edges(n, n, edges.collect::<Vec<_>>())
}

fn rejection_matchings(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut seen = HashSet::with_capacity(n * k);
    'attempt: loop {
        seen.clear();
        let mut perms = Vec::with_capacity(k);
        for _ in 0..k {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(rng);
            perms.push(perm);
        }
        for perm in &perms {
            for (i, &j) in perm.iter().enumerate() {
                if !seen.insert((i, j)) {
                    continue 'attempt;
                }
            }
        }
        return perms;
    }
}

fn sequential_matchings(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut used = vec![vec![false; n]; n];
    let mut perms = Vec::with_capacity(k);
    for _ in 0..k {
        let perm = random_perfect_matching(n, &used, rng);
        for (i, &j) in perm.iter().enumerate() {
            used[i][j] = true;
        }
        perms.push(perm);
    }
    perms
}

/// Perfect matching of the bipartite graph whose allowed pairs are the
/// `false` entries of `used`, found by augmenting paths over shuffled orders.
/// The allowed graph is regular, so a perfect matching always exists.
fn random_perfect_matching(n: usize, used: &[Vec<bool>], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut candidates: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| !used[i][j]).collect())
        .collect();
    for list in &mut candidates {
        list.shuffle(rng);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut match_of_col = vec![usize::MAX; n];
    for &row in &order {
        let mut visited = vec![false; n];
        let found = augment(row, &candidates, &mut match_of_col, &mut visited);
        assert!(found, "regular bipartite graph has a perfect matching");
    }
    let mut perm = vec![0; n];
    for (col, &row) in match_of_col.iter().enumerate() {
        perm[row] = col;
    }
    perm
}

fn augment(
    row: usize,
    candidates: &[Vec<usize>],
    match_of_col: &mut [usize],
    visited: &mut [bool],
) -> bool {
    // iterative DFS would avoid deep recursion, but path lengths stay well
    // below the default stack limit at desk scale
    for &col in &candidates[row] {
        if visited[col] {
            continue;
        }
        visited[col] = true;
        let owner = match_of_col[col];
        if owner == usize::MAX || augment(owner, candidates, match_of_col, visited) {
            match_of_col[col] = row;
            return true;
        }
    }
    false
}

/// Erdős–Rényi bipartite edge set: each of the `n * n` pairs is present
/// independently with probability `c / n`.
pub fn gen_er_edges(n: usize, c: f64, seed: u64) -> Result<Vec<(usize, usize)>> {
    if !c.is_finite() || c < 0.0 || c > n as f64 {
        return Err(Error::InvalidArgument(format!(
            "expected degree must satisfy 0 <= c <= n, got c = {c}, n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n == 0 {
        return Ok(Vec::new());
    }
    let p = c / n as f64;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Ok(edges)
}

/// A directed copy of a base-graph edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DirectedEdge {
    /// `i -> j`, row `i` to column `j`.
    RowToCol { row: usize, col: usize },
    /// `j -> i`, column `j` to row `i`.
    ColToRow { col: usize, row: usize },
}

/// Graph on the directed edges of a bipartite graph.
///
/// Vertices `0..m` are the row-to-column copies in edge-id order and `m..2m`
/// the column-to-row copies, `m` being the base edge count. Row-to-column
/// `(i, j)` and column-to-row `(k, l)` are adjacent iff `j == k` or `l == i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualGraph {
    vertices: Vec<DirectedEdge>,
    adjacency: Vec<Vec<usize>>,
}

impl DualGraph {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, v: usize) -> DirectedEdge {
        self.vertices[v]
    }

    pub fn vertices(&self) -> &[DirectedEdge] {
        &self.vertices
    }

    /// Sorted neighbor list of dual vertex `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_vertices();
        n > 0 && bfs_eccentricity(n, 0, |v| self.adjacency[v].iter().copied()).is_some()
    }

    pub fn diameter(&self) -> Result<usize> {
        diameter_of(self.n_vertices(), |v| self.adjacency[v].iter().copied())
    }
}

pub fn build_dual_graph(g: &BipartiteGraph) -> DualGraph {
    let m = g.n_edges();
    let mut vertices = Vec::with_capacity(2 * m);
    vertices.extend(
        g.edges()
            .iter()
            .map(|&(row, col)| DirectedEdge::RowToCol { row, col }),
    );
    vertices.extend(
        g.edges()
            .iter()
            .map(|&(row, col)| DirectedEdge::ColToRow { col, row }),
    );

    let mut adjacency = vec![Vec::new(); 2 * m];
    for (id, &(i, j)) in g.edges().iter().enumerate() {
        // col->row edges leaving column j: (j, l) for every l ~ j
        let mut nb: Vec<usize> = g.col_edge_ids(j).iter().map(|&e| m + e).collect();
        // col->row edges entering row i: (k, i) for every k ~ i
        nb.extend(g.row_edge_ids(i).map(|e| m + e));
        nb.sort_unstable();
        nb.dedup();
        for &w in &nb {
            adjacency[w].push(id);
        }
        adjacency[id] = nb;
    }
    for list in adjacency.iter_mut().skip(m) {
        list.sort_unstable();
    }
    DualGraph {
        vertices,
        adjacency,
    }
}
