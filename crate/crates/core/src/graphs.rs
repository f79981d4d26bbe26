//! Node-wise and edge-wise graphs.
//!
//! The node-wise graph is a directed sensor graph weighted by a thresholded
//! Gaussian kernel of road distance. Its edges become the vertices of the
//! edge-wise graph, whose weights describe how pairs of road links interact:
//!
//! - stream connectivity: `(i→j)` feeds `(j→k)` through the joint node `j`,
//!   weighted `exp(−(deg⁻(j) + deg⁺(j) − 2)² / σ²)`;
//! - competition: `(i→k)` and `(j→k)` share the target `k`,
//!   weighted `exp(−(deg⁺(i) + deg⁺(j) − 2)² / σ²)`;
//!
//! where `σ²` is the population variance of the nodes' total degrees. Both
//! patterns are symmetric. Two ablations replace the weighting: the classical
//! directed line graph, and an identity graph in which edges only see themselves.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SparseOp};

pub const DEFAULT_KAPPA: f64 = 0.1;

/// Directed weighted sensor graph.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeGraph {
    adjacency: Matrix,
    edges: Vec<(usize, usize)>,
    indegree: Vec<usize>,
    outdegree: Vec<usize>,
}

impl NodeGraph {
    /// Wraps a square non-negative adjacency matrix with a zero diagonal.
    pub fn from_adjacency(adjacency: Matrix) -> Result<Self> {
        let n = adjacency.rows();
        if adjacency.cols() != n {
            return Err(adjacency.mismatch("node graph adjacency", &adjacency.transpose()));
        }
        let mut edges = Vec::new();
        let mut indegree = vec![0; n];
        let mut outdegree = vec![0; n];
        for i in 0..n {
            for j in 0..n {
                let w = adjacency[(i, j)];
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(Error::contract(format!("adjacency[{i}][{j}] = {w}")));
                }
                if w > 0.0 {
                    if i == j {
                        return Err(Error::contract(format!("self-loop on node {i}")));
                    }
                    edges.push((i, j));
                    outdegree[i] += 1;
                    indegree[j] += 1;
                }
            }
        }
        Ok(Self {
            adjacency,
            edges,
            indegree,
            outdegree,
        })
    }

    /// Builds from `(source, target, weight)` triples.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut a = Matrix::zeros(n, n);
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::contract(format!("edge {i}->{j} outside {n} nodes")));
            }
            a[(i, j)] = w;
        }
        Self::from_adjacency(a)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    /// Edges with positive weight, row-major.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn indegree(&self) -> &[usize] {
        &self.indegree
    }

    pub fn outdegree(&self) -> &[usize] {
        &self.outdegree
    }

    /// The same graph with node `v` renamed `perm[v]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<NodeGraph> {
        let n = self.node_count();
        check_permutation(perm, n)?;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(perm[i], perm[j])] = self.adjacency[(i, j)];
            }
        }
        NodeGraph::from_adjacency(a)
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::contract(format!("not a permutation of 0..{n}")));
    }
    Ok(())
}

/// In- and out-degree counts of every node.
pub fn degrees(g: &NodeGraph) -> (Vec<usize>, Vec<usize>) {
    (g.indegree.clone(), g.outdegree.clone())
}

/// Thresholded Gaussian kernel over road distances (`+∞` where unconnected).
///
/// `A[i][j] = exp(−d(i,j)² / σ_d²)` when that is at least `kappa` and `i ≠ j`,
/// with `σ_d` the population standard deviation of the finite off-diagonal
/// distances.
pub fn build_node_graph(distances: &Matrix, kappa: f64) -> Result<NodeGraph> {
    let n = distances.rows();
    if distances.cols() != n {
        return Err(distances.mismatch("distance matrix", &distances.transpose()));
    }
    let mut finite = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let d = distances[(i, j)];
            if i == j || d.is_infinite() {
                continue;
            }
            if !(d >= 0.0) {
                return Err(Error::contract(format!("distance[{i}][{j}] = {d}")));
            }
            finite.push(d);
        }
    }
    if finite.is_empty() {
        return Err(Error::DegenerateGraph("every distance is infinite".into()));
    }
    // sorted so the statistic does not depend on node order
    finite.sort_unstable_by(f64::total_cmp);
    let var = population_variance(&finite);
    if var == 0.0 {
        return Err(Error::DegenerateKernel(
            "all finite distances are equal, kernel width is zero".into(),
        ));
    }

    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d = distances[(i, j)];
            if i == j || d.is_infinite() {
                continue;
            }
            let w = (-(d * d) / var).exp();
            if w >= kappa {
                a[(i, j)] = w;
            }
        }
    }
    NodeGraph::from_adjacency(a)
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Which edge-wise adjacency to build.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeVariant {
    /// Stream connectivity and competition, Gaussian-weighted by degree.
    #[default]
    InteractionPatterns,
    /// Unweighted directed line graph.
    LineGraph,
    /// No edge-edge interaction: `A_e = 0`, so the normalised operator is `I`.
    Identity,
}

impl EdgeVariant {
    pub const ALL: [EdgeVariant; 3] = [
        EdgeVariant::InteractionPatterns,
        EdgeVariant::LineGraph,
        EdgeVariant::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EdgeVariant::InteractionPatterns => "interaction-patterns",
            EdgeVariant::LineGraph => "line-graph",
            EdgeVariant::Identity => "identity",
        }
    }
}

impl fmt::Display for EdgeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EdgeVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EdgeVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown edge variant `{s}`")))
    }
}

/// Graph over the node graph's edges, plus the node-edge incidence matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeGraph {
    pub variant: EdgeVariant,
    pub adjacency: Matrix,
    pub incidence: Matrix,
    /// Degree variance used by the kernel (1 when the fallback applied, 0 for ablations).
    pub degree_variance: f64,
}

impl EdgeGraph {
    pub fn edge_count(&self) -> usize {
        self.adjacency.rows()
    }
}

pub fn build_edge_graph(g: &NodeGraph, variant: EdgeVariant) -> Result<EdgeGraph> {
    let m = g.edge_count();
    if m == 0 {
        return Err(Error::contract("edge-wise graph of a graph without edges"));
    }
    let incidence = incidence(g)?;
    let (adjacency, degree_variance) = match variant {
        EdgeVariant::InteractionPatterns => interaction_patterns(g),
        EdgeVariant::LineGraph => (line_graph(g), 0.0),
        EdgeVariant::Identity => (Matrix::zeros(m, m), 0.0),
    };
    Ok(EdgeGraph {
        variant,
        adjacency,
        incidence,
        degree_variance,
    })
}

struct EdgeLists {
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
}

fn edge_lists(g: &NodeGraph) -> EdgeLists {
    let n = g.node_count();
    let mut incoming = vec![Vec::new(); n];
    let mut outgoing = vec![Vec::new(); n];
    for (e, &(s, t)) in g.edges.iter().enumerate() {
        outgoing[s].push(e);
        incoming[t].push(e);
    }
    EdgeLists { incoming, outgoing }
}

/// Variance of total degree, replaced by 1 (with a warning) for regular graphs.
pub fn degree_variance(g: &NodeGraph) -> f64 {
    let totals: Vec<f64> = g
        .indegree
        .iter()
        .zip(&g.outdegree)
        .map(|(&i, &o)| (i + o) as f64)
        .collect();
    let var = population_variance(&totals);
    if var == 0.0 {
        log::warn!("all nodes have the same total degree; using unit kernel width for the edge-wise graph");
        1.0
    } else {
        var
    }
}

#[inline]
fn degree_kernel(excess: f64, var: f64) -> f64 {
    (-(excess * excess) / var).exp()
}

fn interaction_patterns(g: &NodeGraph) -> (Matrix, f64) {
    let m = g.edge_count();
    let var = degree_variance(g);
    let lists = edge_lists(g);
    let mut a = Matrix::zeros(m, m);
    let mut put = |x: usize, y: usize, w: f64| {
        if w > a[(x, y)] {
            a[(x, y)] = w;
            a[(y, x)] = w;
        }
    };

    for j in 0..g.node_count() {
        let incoming = &lists.incoming[j];
        let through = (g.indegree[j] + g.outdegree[j]) as f64 - 2.0;
        let w = degree_kernel(through, var);
        for &up in incoming {
            for &down in &lists.outgoing[j] {
                // a link and its own reverse are not upstream/downstream of each other
                if g.edges[up].0 != g.edges[down].1 {
                    put(up, down, w);
                }
            }
        }
        for (x, &a_edge) in incoming.iter().enumerate() {
            for &b_edge in &incoming[x + 1..] {
                let sa = g.outdegree[g.edges[a_edge].0];
                let sb = g.outdegree[g.edges[b_edge].0];
                put(a_edge, b_edge, degree_kernel((sa + sb) as f64 - 2.0, var));
            }
        }
    }
    (a, var)
}

fn line_graph(g: &NodeGraph) -> Matrix {
    let m = g.edge_count();
    let lists = edge_lists(g);
    let mut a = Matrix::zeros(m, m);
    for j in 0..g.node_count() {
        for &up in &lists.incoming[j] {
            for &down in &lists.outgoing[j] {
                a[(up, down)] = 1.0;
            }
        }
    }
    a
}

/// Node × edge matrix with ones at each edge's source and target.
pub fn incidence(g: &NodeGraph) -> Result<Matrix> {
    if g.edge_count() == 0 {
        return Err(Error::contract("incidence of a graph without edges"));
    }
    let mut m = Matrix::zeros(g.node_count(), g.edge_count());
    for (e, &(s, t)) in g.edges.iter().enumerate() {
        m[(s, e)] = 1.0;
        m[(t, e)] = 1.0;
    }
    Ok(m)
}

/// Row-normalised adjacency with self-connections, `D̃⁻¹(A + I)`.
pub fn normalize(adjacency: &Matrix) -> Result<Matrix> {
    let n = adjacency.rows();
    if adjacency.cols() != n {
        return Err(adjacency.mismatch("normalize", &adjacency.transpose()));
    }
    let mut out = adjacency.clone();
    let mut row = Vec::with_capacity(n);
    for i in 0..n {
        out[(i, i)] += 1.0;
        row.clear();
        row.extend_from_slice(out.row(i));
        if let Some(bad) = row.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::contract(format!("normalize: entry {bad} in row {i}")));
        }
        // ascending order keeps the row sum independent of column labels
        row.sort_unstable_by(f64::total_cmp);
        let total: f64 = row.iter().sum();
        out.row_mut(i).iter_mut().for_each(|v| *v /= total);
    }
    Ok(out)
}

/// Sparse operators consumed by the model: normalised node and edge adjacency
/// and the incidence matrix with its transpose.
#[derive(Clone, Debug)]
pub struct GraphOperators {
    pub node: Rc<SparseOp>,
    pub edge: Rc<SparseOp>,
    pub incidence: Rc<SparseOp>,
    pub incidence_t: Rc<SparseOp>,
}

impl GraphOperators {
    pub fn new(g: &NodeGraph, e: &EdgeGraph) -> Result<Self> {
        let incidence = SparseOp::from_dense(&e.incidence);
        Ok(Self {
            node: Rc::new(SparseOp::from_dense(&normalize(g.adjacency())?)),
            edge: Rc::new(SparseOp::from_dense(&normalize(&e.adjacency)?)),
            incidence_t: Rc::new(incidence.transposed()),
            incidence: Rc::new(incidence),
        })
    }

    pub fn build(g: &NodeGraph, variant: EdgeVariant) -> Result<Self> {
        Self::new(g, &build_edge_graph(g, variant)?)
    }

    pub fn node_count(&self) -> usize {
        self.node.rows()
    }

    pub fn edge_count(&self) -> usize {
        self.edge.rows()
    }
}

// ---------------------------------------------------------------------------
// file formats

/// Reads a sensor id file: one id per line, blank lines ignored.
pub fn read_ids(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ids(&text, &path.display().to_string())
}

pub fn parse_ids(text: &str, origin: &str) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    let mut seen = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let id = line.trim();
        if id.is_empty() {
            continue;
        }
        if let Some(first) = seen.insert(id.to_string(), lineno + 1) {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                msg: format!("duplicate id `{id}` (first on line {first})"),
            });
        }
        ids.push(id.to_string());
    }
    Ok(ids)
}

/// Reads a `from,to,distance` table into a dense matrix indexed by `ids`.
/// Pairs naming unknown sensors are skipped; missing pairs are `+∞`.
pub fn read_distances(path: &Path, ids: &[String]) -> Result<Matrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_distances(&text, ids, &path.display().to_string())
}

pub fn parse_distances(text: &str, ids: &[String], origin: &str) -> Result<Matrix> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let n = ids.len();
    let mut d = Matrix::filled(n, n, f64::INFINITY);
    for i in 0..n {
        d[(i, i)] = 0.0;
    }
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim().replace(' ', "") == "from,to,distance" => {}
        _ => return Err(err(1, "expected header `from,to,distance`".into())),
    }
    let mut skipped = 0usize;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(err(lineno + 1, format!("expected 3 fields, got {}", fields.len())));
        }
        let dist: f64 = fields[2]
            .parse()
            .map_err(|_| err(lineno + 1, format!("bad distance `{}`", fields[2])))?;
        if !(dist >= 0.0) {
            return Err(err(lineno + 1, format!("negative distance {dist}")));
        }
        match (index.get(fields[0]), index.get(fields[1])) {
            (Some(&i), Some(&j)) => d[(i, j)] = dist,
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        log::debug!("{origin}: skipped {skipped} distance rows naming unknown sensors");
    }
    Ok(d)
}

/// Writes a distance matrix as a `from,to,distance` table (finite off-diagonal entries).
pub fn format_distances(d: &Matrix, ids: &[String]) -> String {
    let mut out = String::from("from,to,distance\n");
    for i in 0..d.rows() {
        for j in 0..d.cols() {
            let v = d[(i, j)];
            if i != j && v.is_finite() {
                let _ = writeln!(out, "{},{},{}", ids[i], ids[j], v);
            }
        }
    }
    out
}

/// Plain-text dump of both graphs, stable enough for golden-file comparisons.
pub fn dump(g: &NodeGraph, e: &EdgeGraph) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# node graph");
    let _ = writeln!(s, "nodes {}", g.node_count());
    let _ = writeln!(s, "indegree {}", join(g.indegree()));
    let _ = writeln!(s, "outdegree {}", join(g.outdegree()));
    write_matrix(&mut s, "adjacency", g.adjacency());
    let _ = writeln!(s, "edges {}", g.edge_count());
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        let _ = writeln!(s, "{k} {i} {j} {}", g.adjacency()[(i, j)]);
    }
    let _ = writeln!(s, "# edge graph");
    let _ = writeln!(s, "variant {}", e.variant);
    let _ = writeln!(s, "degree-variance {}", e.degree_variance);
    write_matrix(&mut s, "edge-adjacency", &e.adjacency);
    write_matrix(&mut s, "incidence", &e.incidence);
    s
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn write_matrix(s: &mut String, name: &str, m: &Matrix) {
    let _ = writeln!(s, "{name} {} {}", m.rows(), m.cols());
    for i in 0..m.rows() {
        let _ = writeln!(s, "{}", join(m.row(i)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: usize, edges: &[(usize, usize)]) -> NodeGraph {
        let triples: Vec<_> = edges.iter().map(|&(i, j)| (i, j, 1.0)).collect();
        NodeGraph::from_edges(n, &triples).unwrap()
    }

    #[test]
    fn kernel_at_one_sigma_is_inverse_e() {
        // finite off-diagonal distances {1, 3}: mean 2, σ = 1
        let inf = f64::INFINITY;
        let d = Matrix::from_rows(&[[0.0, 1.0, inf], [3.0, 0.0, inf], [inf, inf, 0.0]]);
        let ng = build_node_graph(&d, 0.1).unwrap();
        assert!((ng.adjacency()[(0, 1)] - (-1f64).exp()).abs() < 1e-15);
        // exp(-9) < 0.1 → dropped
        assert_eq!(ng.adjacency()[(1, 0)], 0.0);
        for i in 0..3 {
            assert_eq!(ng.adjacency()[(i, i)], 0.0);
        }
        assert_eq!(ng.edges(), &[(0, 1)]);
    }

    #[test]
    fn degenerate_distance_inputs() {
        let inf = f64::INFINITY;
        let all_inf = Matrix::from_rows(&[[0.0, inf], [inf, 0.0]]);
        assert!(matches!(build_node_graph(&all_inf, 0.1), Err(Error::DegenerateGraph(_))));
        let equal = Matrix::from_rows(&[[0.0, 2.0], [2.0, 0.0]]);
        assert!(matches!(build_node_graph(&equal, 0.1), Err(Error::DegenerateKernel(_))));
    }

    #[test]
    fn degree_counts() {
        // 1→2, 2→3, 4→2 (zero-based)
        let ng = g(4, &[(0, 1), (1, 2), (3, 1)]);
        assert_eq!(degrees(&ng), (vec![0, 2, 1, 0], vec![1, 1, 0, 1]));
        let empty = NodeGraph::from_adjacency(Matrix::zeros(3, 3)).unwrap();
        assert_eq!(degrees(&empty), (vec![0; 3], vec![0; 3]));
    }

    #[test]
    fn stream_weight_hand_value() {
        // totals (1,3,1,1): mean 1.5, variance 0.75
        let ng = g(4, &[(0, 1), (1, 2), (3, 1)]);
        let eg = build_edge_graph(&ng, EdgeVariant::InteractionPatterns).unwrap();
        assert_eq!(eg.degree_variance, 0.75);
        // edges in row-major order: (0→1)=0, (1→2)=1, (3→1)=2
        let w = eg.adjacency[(0, 1)];
        assert!((w - (-1.0f64 / 0.75).exp()).abs() < 1e-15);
        assert!((w - 0.2636).abs() < 1e-4);
        assert_eq!(eg.adjacency[(1, 0)], w);
    }

    #[test]
    fn competition_with_unit_outdegrees_is_one() {
        // 1→3, 2→3 plus 3→4 so degree variance is non-zero
        let ng = g(4, &[(0, 2), (1, 2), (2, 3)]);
        let eg = build_edge_graph(&ng, EdgeVariant::InteractionPatterns).unwrap();
        assert_eq!(eg.adjacency[(0, 1)], 1.0);
        assert_eq!(eg.adjacency[(1, 0)], 1.0);
    }

    #[test]
    fn stream_through_balanced_joint_is_one() {
        let ng = g(4, &[(0, 1), (1, 2), (3, 2)]);
        let eg = build_edge_graph(&ng, EdgeVariant::InteractionPatterns).unwrap();
        // node 1 has indegree 1 and outdegree 1
        assert_eq!(eg.adjacency[(0, 1)], 1.0);
    }

    #[test]
    fn reverse_link_is_not_stream_connected() {
        let ng = g(3, &[(0, 1), (1, 0), (1, 2)]);
        let eg = build_edge_graph(&ng, EdgeVariant::InteractionPatterns).unwrap();
        // edges: (0→1)=0, (1→0)=1, (1→2)=2
        assert_eq!(eg.adjacency[(0, 1)], 0.0);
        assert!(eg.adjacency[(0, 2)] > 0.0);
        let lg = build_edge_graph(&ng, EdgeVariant::LineGraph).unwrap();
        assert_eq!(lg.adjacency[(0, 1)], 1.0);
        assert_eq!(lg.adjacency[(1, 0)], 1.0);
        assert_eq!(lg.adjacency[(2, 0)], 0.0);
    }

    #[test]
    fn regular_graph_uses_fallback_width() {
        let ring = g(3, &[(0, 1), (1, 2), (2, 0)]);
        let eg = build_edge_graph(&ring, EdgeVariant::InteractionPatterns).unwrap();
        assert_eq!(eg.degree_variance, 1.0);
        assert_eq!(eg.adjacency[(0, 1)], 1.0);
    }

    #[test]
    fn identity_variant_is_zero_adjacency() {
        let ng = g(3, &[(0, 1), (1, 2)]);
        let eg = build_edge_graph(&ng, EdgeVariant::Identity).unwrap();
        assert_eq!(eg.adjacency, Matrix::zeros(2, 2));
        assert_eq!(normalize(&eg.adjacency).unwrap(), Matrix::identity(2));
    }

    #[test]
    fn incidence_example() {
        let ng = g(3, &[(0, 1), (1, 2)]);
        let m = incidence(&ng).unwrap();
        assert_eq!(m, Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]));
        let empty = NodeGraph::from_adjacency(Matrix::zeros(2, 2)).unwrap();
        assert!(incidence(&empty).is_err());
        assert!(build_edge_graph(&empty, EdgeVariant::LineGraph).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&Matrix::zeros(2, 2)).unwrap(), Matrix::identity(2));
        let a = Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]);
        assert_eq!(
            normalize(&a).unwrap(),
            Matrix::from_rows(&[[0.5, 0.5], [0.0, 1.0]])
        );
        assert!(normalize(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in EdgeVariant::ALL {
            assert_eq!(v.name().parse::<EdgeVariant>().unwrap(), v);
        }
        assert!("nope".parse::<EdgeVariant>().is_err());
    }

    #[test]
    fn distance_table_parsing() {
        let ids = parse_ids("a\nb\n\nc\n", "ids").unwrap();
        assert_eq!(ids, ["a", "b", "c"]);
        assert!(parse_ids("a\na\n", "ids").is_err());
        let d = parse_distances("from,to,distance\na,b,1.5\nb,c,2\nz,a,9\n", &ids, "d").unwrap();
        assert_eq!(d[(0, 1)], 1.5);
        assert_eq!(d[(1, 2)], 2.0);
        assert!(d[(1, 0)].is_infinite());
        assert_eq!(d[(2, 2)], 0.0);
        let e = parse_distances("from,to,distance\na,b\n", &ids, "d").unwrap_err();
        assert!(e.to_string().contains("d:2"), "{e}");
        assert!(parse_distances("x,y\n", &ids, "d").is_err());
        let back = parse_distances(&format_distances(&d, &ids), &ids, "d").unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn relabel_moves_edges() {
        let ng = g(3, &[(0, 1), (1, 2)]);
        let r = ng.relabeled(&[2, 0, 1]).unwrap();
        assert_eq!(r.edges(), &[(0, 1), (2, 0)]);
        assert!(ng.relabeled(&[0, 0, 1]).is_err());
    }
}
