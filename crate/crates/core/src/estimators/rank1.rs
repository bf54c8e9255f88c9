/// Dense row-major matrix block with an observation mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl Block {
    pub fn new(rows: usize, cols: usize) -> Self {
        Block { rows, cols, values: vec![0.0; rows * cols], mask: vec![false; rows * cols] }
    }

    pub fn full(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols);
        Block { rows, cols, values, mask: vec![true; rows * cols] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
        self.mask[i * self.cols + j] = true;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rank1Result {
    /// Rank-1 reconstruction, clamped to `[0, 1]`.
    pub completed: Block,
    /// Columns with no observation, initialized from the block's global mean.
    pub flagged_columns: Vec<usize>,
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 500;

/// Leading singular triple by power iteration on `X^T X`, warm-started at `v`.
fn leading_triple(x: &[f64], rows: usize, cols: usize, v: &mut [f64]) -> (f64, Vec<f64>) {
    let mut u = vec![0.0; rows];
    for _ in 0..MAX_ITERATIONS {
        for i in 0..rows {
            u[i] = (0..cols).map(|j| x[i * cols + j] * v[j]).sum();
        }
        let mut w = vec![0.0; cols];
        for i in 0..rows {
            for j in 0..cols {
                w[j] += x[i * cols + j] * u[i];
            }
        }
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return (0.0, vec![0.0; rows]);
        }
        let mut change: f64 = 0.0;
        for j in 0..cols {
            let nv = w[j] / norm;
            change = change.max((nv - v[j]).abs());
            v[j] = nv;
        }
        if change < TOLERANCE {
            break;
        }
    }
    for i in 0..rows {
        u[i] = (0..cols).map(|j| x[i * cols + j] * v[j]).sum();
    }
    let sigma = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    if sigma > 0.0 {
        u.iter_mut().for_each(|a| *a /= sigma);
    }
    (sigma, u)
}

/// Projects a partially observed block onto the rank-1 manifold.
///
/// Missing cells start at their column's observed mean (the block's global
/// mean for columns with no observation, which are flagged) and are then
/// refilled from the current rank-1 fit until they move less than the
/// tolerance. The returned block is the final rank-1 fit, clamped.
pub fn rank1_project(block: &Block) -> Rank1Result {
    let (rows, cols) = (block.rows, block.cols);
    let mut x = block.values.clone();
    let observed: Vec<f64> = (0..rows * cols).filter(|&k| block.mask[k]).map(|k| block.values[k]).collect();
    let global = if observed.is_empty() { 0.0 } else { observed.iter().sum::<f64>() / observed.len() as f64 };
    let mut flagged = Vec::new();
    for j in 0..cols {
        let (mut n, mut s) = (0usize, 0.0);
        for i in 0..rows {
            if block.mask[i * cols + j] {
                n += 1;
                s += block.values[i * cols + j];
            }
        }
        let fill = if n > 0 {
            s / n as f64
        } else {
            flagged.push(j);
            global
        };
        for i in 0..rows {
            if !block.mask[i * cols + j] {
                x[i * cols + j] = fill;
            }
        }
    }

    let any_missing = block.mask.iter().any(|&m| !m);
    let mut v = vec![1.0 / (cols as f64).sqrt(); cols];
    let mut sigma = 0.0;
    let mut u = vec![0.0; rows];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        (sigma, u) = leading_triple(&x, rows, cols, &mut v);
        if !any_missing {
            converged = true;
            break;
        }
        let mut change: f64 = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                let k = i * cols + j;
                if !block.mask[k] {
                    let r = sigma * u[i] * v[j];
                    change = change.max((r - x[k]).abs());
                    x[k] = r;
                }
            }
        }
        if change < TOLERANCE {
            converged = true;
            break;
        }
    }

    let mut completed = Block::full(rows, cols, vec![0.0; rows * cols]);
    for i in 0..rows {
        for j in 0..cols {
            completed.values[i * cols + j] = (sigma * u[i] * v[j]).clamp(0.0, 1.0);
        }
    }
    Rank1Result { completed, flagged_columns: flagged, sigma, iterations, converged }
}
