//! Exact minimum-cost assignment (Hungarian method with row/column potentials).
//!
//! O(n²m) for an n×m cost matrix with n ≤ m. Works directly on floating costs:
//! no zero tests are made, only comparisons of reduced costs.

use crate::error::{Error, Result};

/// Row-major `rows × cols` cost matrix.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!("cost data has {} entries, expected {rows}×{cols}", data.len())));
        }
        if data.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("assignment costs must be finite"));
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CostMatrix::new(rows, cols, data)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// Column assigned to each row, minimizing the summed cost. Requires rows ≤ cols.
pub fn solve(cost: &CostMatrix) -> Result<Vec<usize>> {
    let (n, m) = (cost.rows, cost.cols);
    if n > m {
        return Err(Error::invalid(format!("assignment needs rows ≤ cols, got {n}×{m}")));
    }
    // 1-based potentials; column 0 is a virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = &cost.data[(i0 - 1) * m..i0 * m];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![usize::MAX; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assign[owner[j] - 1] = j - 1;
        }
    }
    Ok(assign)
}

/// Sum of the costs picked by an assignment.
pub fn total_cost(cost: &CostMatrix, assign: &[usize]) -> f64 {
    assign.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(cost: &CostMatrix) -> f64 {
        fn rec(cost: &CostMatrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == cost.rows {
                *best = best.min(acc);
                return;
            }
            for j in 0..cost.cols {
                if !used[j] {
                    used[j] = true;
                    rec(cost, row + 1, used, acc + cost.get(row, j), best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; cost.cols], 0.0, &mut best);
        best
    }

    #[test]
    fn classic_three_by_three() {
        let c = CostMatrix::new(3, 3, vec![1., 2., 1., 4., 5., 6., 7., 8., 9.]).unwrap();
        let a = solve(&c).unwrap();
        assert_eq!(total_cost(&c, &a), 13.0);
    }

    #[test]
    fn rectangular_and_negative_costs() {
        let c = CostMatrix::new(2, 3, vec![1., 0., 5., 2., 3., 1.]).unwrap();
        assert_eq!(total_cost(&c, &solve(&c).unwrap()), 1.0);
        let c = CostMatrix::new(2, 2, vec![-3., 1., 2., -4.]).unwrap();
        assert_eq!(total_cost(&c, &solve(&c).unwrap()), -7.0);
        assert!(solve(&CostMatrix::new(3, 2, vec![0.; 6]).unwrap()).is_err());
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        use rand::Rng as _;
        let mut rng = crate::seed::rng(12);
        for n in 1..=6 {
            for m in n..=7 {
                let c = CostMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0)).unwrap();
                let a = solve(&c).unwrap();
                let mut cols = a.clone();
                cols.sort_unstable();
                cols.dedup();
                assert_eq!(cols.len(), n);
                assert!((total_cost(&c, &a) - brute(&c)).abs() < 1e-12);
            }
        }
    }
}
