use nalgebra::{DMatrix, DVector};

use super::rank1::Block;
use super::{ColumnMeanEstimate, Method};
use crate::profiler::FilledTable;
use crate::rng::{self, Stream};
use crate::trie::{ExecutionTrie, NodeId};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImputeOptions {
    pub rank: usize,
    pub ridge: f64,
    pub iterations: usize,
    /// Fit the factorization to residuals from observed column means.
    pub center: bool,
}

impl Default for ImputeOptions {
    fn default() -> Self {
        ImputeOptions { rank: 2, ridge: 1.0, iterations: 30, center: true }
    }
}

/// Ridge least squares for one factor row: `(F^T F + ridge I) x = F^T y`.
fn solve_row(factors: &[Vec<f64>], obs: &[(usize, f64)], rank: usize, ridge: f64) -> Vec<f64> {
    if obs.is_empty() {
        return vec![0.0; rank];
    }
    let mut a = DMatrix::<f64>::identity(rank, rank) * ridge;
    let mut b = DVector::<f64>::zeros(rank);
    for &(j, y) in obs {
        let f = &factors[j];
        for r in 0..rank {
            b[r] += f[r] * y;
            for s in 0..rank {
                a[(r, s)] += f[r] * f[s];
            }
        }
    }
    match a.clone().cholesky() {
        Some(ch) => ch.solve(&b).iter().copied().collect(),
        None => a.lu().solve(&b).map(|x| x.iter().copied().collect()).unwrap_or_else(|| vec![0.0; rank]),
    }
}

fn als(by_row: &[Vec<(usize, f64)>], by_col: &[Vec<(usize, f64)>], rank: usize, opts: &ImputeOptions) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut v: Vec<Vec<f64>> = (0..by_col.len())
        .map(|j| (0..rank).map(|r| 0.1 * (rng::unit(rng::key(0, Stream::NodeOffset, j as u64, r as u64)) + 0.5)).collect())
        .collect();
    let mut u: Vec<Vec<f64>> = vec![vec![0.0; rank]; by_row.len()];
    for _ in 0..opts.iterations.max(1) {
        for (i, row) in by_row.iter().enumerate() {
            u[i] = solve_row(&v, row, rank, opts.ridge);
        }
        for (j, col) in by_col.iter().enumerate() {
            v[j] = solve_row(&u, col, rank, opts.ridge);
        }
    }
    (u, v)
}

/// Completes the masked cells of a dense block with the same factorization
/// the imputation estimator uses (observed cells are kept, imputed ones clamped).
pub fn lowrank_complete(block: &Block, opts: &ImputeOptions) -> Block {
    let rank = opts.rank.max(1);
    let mut by_row = vec![Vec::new(); block.rows];
    let mut by_col = vec![Vec::new(); block.cols];
    let mut offset = vec![0.0; block.cols];
    for j in 0..block.cols {
        let obs: Vec<f64> = (0..block.rows).filter(|&i| block.mask[i * block.cols + j]).map(|i| block.at(i, j)).collect();
        if opts.center && !obs.is_empty() {
            offset[j] = obs.iter().sum::<f64>() / obs.len() as f64;
        }
    }
    for i in 0..block.rows {
        for j in 0..block.cols {
            if block.mask[i * block.cols + j] {
                let y = block.at(i, j) - offset[j];
                by_row[i].push((j, y));
                by_col[j].push((i, y));
            }
        }
    }
    let (u, v) = als(&by_row, &by_col, rank, opts);
    let mut out = block.clone();
    for i in 0..block.rows {
        for j in 0..block.cols {
            if !block.mask[i * block.cols + j] {
                let fit: f64 = u[i].iter().zip(&v[j]).map(|(a, b)| a * b).sum();
                out.set(i, j, (offset[j] + fit).clamp(0.0, 1.0));
            }
        }
    }
    out
}

/// Fill-in followed by masked low-rank completion by alternating least
/// squares; the estimate is each completed column's mean over the profiled
/// requests. Non-convergence only shows up in the residual.
pub fn estimate_prefix_lowrank_impute(filled: &FilledTable, trie: &ExecutionTrie, opts: &ImputeOptions) -> ColumnMeanEstimate {
    let rank = opts.rank.max(1);
    let requests = filled.requests();
    let ncols = trie.len();
    let row_of = |q: u32| requests.binary_search(&q).expect("request in table");

    let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); requests.len()];
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
    for (q, node, cell) in filled.iter() {
        let v = f64::from(u8::from(cell.value));
        by_row[row_of(q)].push((node.index(), v));
        by_col[node.index()].push((row_of(q), v));
    }

    let global = {
        let n: usize = by_col.iter().map(Vec::len).sum();
        if n == 0 {
            0.0
        } else {
            by_col.iter().flatten().map(|&(_, v)| v).sum::<f64>() / n as f64
        }
    };
    let mut offset = vec![0.0; ncols];
    let mut fallback = 0;
    if opts.center {
        for id in trie.ids().skip(1) {
            let col = &by_col[id.index()];
            offset[id.index()] = if col.is_empty() {
                fallback += 1;
                let p = trie.node(id).parent.expect("non-root");
                if p == NodeId::ROOT {
                    global
                } else {
                    offset[p.index()]
                }
            } else {
                col.iter().map(|&(_, v)| v).sum::<f64>() / col.len() as f64
            };
        }
    } else {
        fallback = trie.ids().skip(1).filter(|id| by_col[id.index()].is_empty()).count();
    }
    for (j, col) in by_col.iter_mut().enumerate() {
        col.iter_mut().for_each(|(_, v)| *v -= offset[j]);
    }
    for row in by_row.iter_mut() {
        row.iter_mut().for_each(|(j, v)| *v -= offset[*j]);
    }

    let (u, v) = als(&by_row, &by_col, rank, opts);

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (mut sq, mut n) = (0.0, 0usize);
    for (i, row) in by_row.iter().enumerate() {
        for &(j, y) in row {
            sq += (dot(&u[i], &v[j]) - y).powi(2);
            n += 1;
        }
    }

    let mut mu = vec![0.0; ncols];
    if !requests.is_empty() {
        for id in trie.ids().skip(1) {
            let j = id.index();
            let mut observed = vec![None; requests.len()];
            for &(i, y) in &by_col[j] {
                observed[i] = Some(y + offset[j]);
            }
            let total: f64 = observed
                .iter()
                .enumerate()
                .map(|(i, o)| o.unwrap_or_else(|| (offset[j] + dot(&u[i], &v[j])).clamp(0.0, 1.0)))
                .sum();
            mu[j] = total / requests.len() as f64;
        }
    }
    ColumnMeanEstimate {
        mu,
        method: Method::Impute,
        coverage: None,
        fallback_cells: fallback,
        residual: Some(if n > 0 { (sq / n as f64).sqrt() } else { 0.0 }),
    }
}
