//! Rank argument for why a linear value decomposition cannot fit the
//! count-reward matrix of the two-step game.
//!
//! By permutation symmetry a linear decomposition over the complete 4-agent
//! graph has five free values in that state (per-agent value of A and B, and
//! pairwise values of AA, AB, BB), and the five reward levels give five
//! linear equations. The system is inconsistent: the coefficient matrix has
//! rank 3 but the augmented matrix has rank 4.

const PIVOT_TOL: f64 = 1e-9;

/// Coefficient matrix of the count-reward fitting system. Row `n` counts how
/// often each unknown `(u_A, u_B, p_AA, p_AB, p_BB)` appears when `n` agents
/// play B on the complete 4-agent graph.
pub const COEFFICIENTS: [[f64; 5]; 5] = [
    [4.0, 0.0, 6.0, 0.0, 0.0],
    [3.0, 1.0, 3.0, 3.0, 0.0],
    [2.0, 2.0, 1.0, 4.0, 1.0],
    [1.0, 3.0, 0.0, 3.0, 3.0],
    [0.0, 4.0, 0.0, 0.0, 6.0],
];

/// Reward levels by the number of agents playing B.
pub const RHS: [f64; 5] = [0.0, -0.1, 0.1, 0.3, 8.0];

/// Matrix rank by Gaussian elimination with partial pivoting; pivots below
/// 1e-9 in magnitude count as zero.
pub fn rank_of(matrix: &[Vec<f64>]) -> usize {
    let rows = matrix.len();
    if rows == 0 {
        return 0;
    }
    let cols = matrix[0].len();
    let mut m: Vec<Vec<f64>> = matrix.to_vec();
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let pivot = (rank..rows)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col].abs() <= PIVOT_TOL {
            continue;
        }
        m.swap(rank, pivot);
        let (upper, lower) = m.split_at_mut(rank + 1);
        let pivot_row = &upper[rank];
        for row in lower.iter_mut() {
            let factor = row[col] / pivot_row[col];
            for (cell, &p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *cell -= factor * p;
            }
        }
        rank += 1;
    }
    rank
}

/// Ranks of the fitting system with an arbitrary right-hand side: returns
/// `(coefficient rank, augmented rank)`.
pub fn rank_check_with_rhs(rhs: &[f64; 5]) -> (usize, usize) {
    let coef: Vec<Vec<f64>> = COEFFICIENTS.iter().map(|r| r.to_vec()).collect();
    let augmented: Vec<Vec<f64>> = COEFFICIENTS
        .iter()
        .zip(rhs)
        .map(|(row, &b)| row.iter().copied().chain([b]).collect())
        .collect();
    (rank_of(&coef), rank_of(&augmented))
}

/// Ranks of the game's fitting system: `(3, 4)`, so no linear decomposition
/// reproduces the rewards exactly.
pub fn rank_check() -> (usize, usize) {
    rank_check_with_rhs(&RHS)
}

/// Minimum Euclidean error `min_x ||A x - b||` of the fitting system,
/// computed by projecting the rewards onto the coefficient column space.
/// Strictly positive; the best linear fit misses the rewards by this much.
pub fn least_squares_residual() -> f64 {
    let cols = COEFFICIENTS[0].len();
    // Orthonormal basis of the column space by modified Gram-Schmidt.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for c in 0..cols {
        let mut v: Vec<f64> = COEFFICIENTS.iter().map(|row| row[c]).collect();
        for u in &basis {
            let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= dot * ui;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > PIVOT_TOL {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut residual = RHS.to_vec();
    for u in &basis {
        let dot: f64 = u.iter().zip(&residual).map(|(a, b)| a * b).sum();
        for (ri, ui) in residual.iter_mut().zip(u) {
            *ri -= dot * ui;
        }
    }
    residual.iter().map(|x| x * x).sum::<f64>().sqrt()
}
