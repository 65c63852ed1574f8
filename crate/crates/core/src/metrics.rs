//! External agreement between a predicted and a reference labelling: matched accuracy,
//! normalized mutual information and adjusted Rand index.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Cross-tabulation of reference classes (rows) against predicted clusters (columns).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
    pub n: usize,
}

pub fn contingency(truth: &[usize], pred: &[usize]) -> Result<ContingencyTable> {
    if truth.len() != pred.len() {
        return Err(Error::invalid(format!(
            "label vectors differ in length: {} vs {}",
            truth.len(),
            pred.len()
        )));
    }
    let rows = truth.iter().max().map_or(0, |m| m + 1);
    let cols = pred.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![vec![0usize; cols]; rows];
    for (&t, &p) in truth.iter().zip(pred) {
        counts[t][p] += 1;
    }
    let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
    let col_sums = (0..cols)
        .map(|l| counts.iter().map(|r| r[l]).sum())
        .collect();
    Ok(ContingencyTable {
        counts,
        row_sums,
        col_sums,
        n: truth.len(),
    })
}

/// Minimum-cost perfect assignment (Kuhn-Munkres with potentials, O(g³)).
///
/// Returns `perm` with row `i` assigned to column `perm[i]`.
pub fn hungarian(cost: &Matrix) -> Result<Vec<usize>> {
    if !cost.is_square() {
        return Err(Error::invalid(format!(
            "cost matrix must be square, got {}x{}",
            cost.nrows(),
            cost.ncols()
        )));
    }
    crate::linalg::ensure_finite(cost, "cost matrix")?;
    let n = cost.nrows();
    // 1-based potentials; column 0 is a virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        if matched_row[j] > 0 {
            perm[matched_row[j] - 1] = j - 1;
        }
    }
    Ok(perm)
}

/// Fraction of points on the diagonal after the best one-to-one relabelling of `pred`.
pub fn accuracy(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let table = contingency(truth, pred)?;
    if table.n == 0 {
        return Err(Error::invalid("empty label vectors"));
    }
    let size = table.row_sums.len().max(table.col_sums.len());
    let cost = Matrix::from_fn(size, size, |k, l| {
        -(table
            .counts
            .get(k)
            .and_then(|r| r.get(l))
            .copied()
            .unwrap_or(0) as f64)
    });
    let perm = hungarian(&cost)?;
    let matched: f64 = perm.iter().enumerate().map(|(k, &l)| -cost[(k, l)]).sum();
    Ok(matched / table.n as f64)
}

/// `I(U;V) / sqrt(H(U) H(V))` with natural logarithms; 0 when either side has one cluster.
pub fn nmi(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let table = contingency(truth, pred)?;
    let n = table.n as f64;
    if table.n == 0 {
        return Err(Error::invalid("empty label vectors"));
    }
    let entropy = |sums: &[usize]| -> f64 {
        sums.iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let q = c as f64 / n;
                -q * q.ln()
            })
            .sum()
    };
    let hu = entropy(&table.row_sums);
    let hv = entropy(&table.col_sums);
    if hu <= 0.0 || hv <= 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (k, row) in table.counts.iter().enumerate() {
        for (l, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (n * c / (table.row_sums[k] as f64 * table.col_sums[l] as f64)).ln();
            }
        }
    }
    Ok((mi / (hu * hv).sqrt()).clamp(0.0, 1.0))
}

/// Adjusted Rand index from pair counts, evaluated in exact integer arithmetic.
pub fn ari(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let table = contingency(truth, pred)?;
    if table.n < 2 {
        return Err(Error::invalid(format!(
            "adjusted Rand index needs at least 2 points, got {}",
            table.n
        )));
    }
    let pairs = |c: usize| -> i128 { (c as i128) * (c as i128 - 1) / 2 };
    let index: i128 = table.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let a: i128 = table.row_sums.iter().map(|&c| pairs(c)).sum();
    let b: i128 = table.col_sums.iter().map(|&c| pairs(c)).sum();
    let total = pairs(table.n);
    // (index - ab/N) / ((a+b)/2 - ab/N), scaled by 2N.
    let num = 2 * (index * total - a * b);
    let den = (a + b) * total - 2 * a * b;
    if den == 0 {
        return Ok(if num == 0 { 1.0 } else { 0.0 });
    }
    Ok(num as f64 / den as f64)
}
