use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::par::Execution;

/// One outgoing edge of the neighbour graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
    /// Row-normalized weight.
    pub weight: f64,
}

impl Neighbor {
    /// Kernel value `exp(-‖x_i - x_j‖²)` before row normalization.
    pub fn raw_weight(&self) -> f64 {
        (-self.dist_sq).exp()
    }
}

/// Directed k-nearest-neighbour graph with Gaussian kernel weights, stored row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    /// `rows[i]` lists the neighbours of point `i`, nearest first.
    pub rows: Vec<Vec<Neighbor>>,
    pub k: usize,
}

impl NeighborGraph {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.n();
        let mut w = Matrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for nb in row {
                w[(i, nb.index)] += nb.weight;
            }
        }
        w
    }

    /// `W X` for an n-row matrix.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.nrows() != self.n() {
            return Err(Error::invalid(format!(
                "graph has {} nodes, matrix has {} rows",
                self.n(),
                x.nrows()
            )));
        }
        let mut out = Matrix::zeros(x.nrows(), x.ncols());
        for (i, row) in self.rows.iter().enumerate() {
            for nb in row {
                for j in 0..x.ncols() {
                    out[(i, j)] += nb.weight * x[(nb.index, j)];
                }
            }
        }
        Ok(out)
    }
}

/// Builds the graph with the default execution policy.
pub fn knn_graph(x: &Matrix, k: usize) -> Result<NeighborGraph> {
    knn_graph_with(x, k, Execution::default())
}

/// Exhaustive k-NN search; ties in distance go to the lower index.
///
/// Weights are normalized as `exp(-(d² - d_min²)) / Σ`, which equals the plain row
/// normalization of `exp(-d²)` but cannot underflow when all neighbours are far.
pub fn knn_graph_with(x: &Matrix, k: usize, exec: Execution) -> Result<NeighborGraph> {
    let n = x.nrows();
    if n < 2 || k == 0 || k > n - 1 {
        return Err(Error::invalid(format!(
            "neighbour count must lie in 1..={} for {n} points, got {k}",
            n.saturating_sub(1)
        )));
    }
    crate::linalg::ensure_finite(x, "data matrix")?;
    // Row-major copy keeps the distance loop cache friendly.
    let d = x.ncols();
    let flat: Vec<f64> = (0..n)
        .flat_map(|i| x.row(i).iter().copied().collect::<Vec<_>>())
        .collect();
    let point = |i: usize| &flat[i * d..(i + 1) * d];

    let rows = exec.map_indices(n, |i| {
        let xi = point(i);
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let dist = xi
                    .iter()
                    .zip(point(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                (dist, j)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, cmp);
            cand.truncate(k);
        }
        cand.sort_by(cmp);
        let d_min = cand[0].0;
        let shifted: Vec<f64> = cand
            .iter()
            .map(|&(dist, _)| (-(dist - d_min)).exp())
            .collect();
        let total: f64 = shifted.iter().sum();
        cand.iter()
            .zip(shifted)
            .map(|(&(dist_sq, index), s)| Neighbor {
                index,
                dist_sq,
                weight: s / total,
            })
            .collect::<Vec<_>>()
    });
    Ok(NeighborGraph { rows, k })
}

/// `Wᵐ X` by `m` successive multiplications.
pub fn smooth(x: &Matrix, w: &NeighborGraph, m: usize) -> Result<Matrix> {
    if x.nrows() != w.n() {
        return Err(Error::invalid(format!(
            "graph has {} nodes, matrix has {} rows",
            w.n(),
            x.nrows()
        )));
    }
    let mut out = x.clone();
    for _ in 0..m {
        out = w.apply(&out)?;
    }
    Ok(out)
}
