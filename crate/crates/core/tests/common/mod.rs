//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use stgraph::graphs::NodeGraph;
use stgraph::{Matrix, Rng};

/// A random directed graph on `n` nodes with at least one edge, no self-loops
/// and positive weights.
pub fn random_digraph(n: usize, density: f64, rng: &mut Rng) -> NodeGraph {
    loop {
        let a = Matrix::from_fn(n, n, |i, j| {
            if i != j && rng.chance(density) {
                rng.uniform(0.1, 1.0)
            } else {
                0.0
            }
        });
        if a.as_slice().iter().any(|&w| w > 0.0) {
            return NodeGraph::from_adjacency(a).expect("valid adjacency");
        }
    }
}

/// Edges in row-major order of the adjacency matrix.
pub fn edge_list(a: &Matrix) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            if i != j && a[(i, j)] != 0.0 {
                edges.push((i, j));
            }
        }
    }
    edges
}

fn out_degree(a: &Matrix, v: usize) -> usize {
    (0..a.cols()).filter(|&j| j != v && a[(v, j)] != 0.0).count()
}

fn in_degree(a: &Matrix, v: usize) -> usize {
    (0..a.rows()).filter(|&i| i != v && a[(i, v)] != 0.0).count()
}

/// Population variance of total degree, 1 when every node has the same one.
pub fn degree_variance(a: &Matrix) -> f64 {
    let n = a.rows();
    let totals: Vec<f64> = (0..n).map(|v| (in_degree(a, v) + out_degree(a, v)) as f64).collect();
    let mean = totals.iter().sum::<f64>() / n as f64;
    let var = totals.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n as f64;
    if var == 0.0 {
        1.0
    } else {
        var
    }
}

fn kernel(x: f64, var: f64) -> f64 {
    (-(x * x) / var).exp()
}

/// Edge-wise adjacency by a literal loop over every ordered pair of edges.
///
/// Stream pairs `(i→j), (j→k)` with `i ≠ k` are weighted by the degree of the
/// shared node `j`; competition pairs `(i→k), (j→k)` by the out-degrees of the
/// two sources. Both relations are symmetric; the larger weight wins.
pub fn brute_force_edge_graph(a: &Matrix) -> Matrix {
    let edges = edge_list(a);
    let var = degree_variance(a);
    let m = edges.len();
    let mut out = Matrix::zeros(m, m);
    for (p, &(i, j)) in edges.iter().enumerate() {
        for (q, &(j2, k)) in edges.iter().enumerate() {
            if p == q {
                continue;
            }
            let mut w: f64 = 0.0;
            if j == j2 && i != k {
                let excess = (in_degree(a, j) + out_degree(a, j)) as f64 - 2.0;
                w = w.max(kernel(excess, var));
            }
            // (i→j) and (j2→k) compete for the same target
            if j == k && i != j2 {
                let excess = (out_degree(a, i) + out_degree(a, j2)) as f64 - 2.0;
                w = w.max(kernel(excess, var));
            }
            if w > out[(p, q)] {
                out[(p, q)] = w;
                out[(q, p)] = w;
            }
        }
    }
    out
}

/// Directed line graph: edge `p` feeds edge `q` when `p` ends where `q` starts.
pub fn line_graph(a: &Matrix) -> Matrix {
    let edges = edge_list(a);
    let m = edges.len();
    Matrix::from_fn(m, m, |p, q| if edges[p].1 == edges[q].0 { 1.0 } else { 0.0 })
}
