//! Dense tableau simplex for small standard-form problems
//! `min c·x  s.t.  A x = b, x >= 0`, started from a basis whose columns of `A` form the
//! identity. Pivoting follows Bland's rule, so the pivot sequence is deterministic and
//! cannot cycle.

const TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpError {
    Unbounded,
    BadBasis,
}

/// `rows[r][j]` is `A[r][j]`; `basis[r]` names the column holding the r-th unit vector.
pub fn solve_from_identity_basis(
    rows: &[Vec<f64>],
    b: &[f64],
    c: &[f64],
    mut basis: Vec<usize>,
) -> Result<LpSolution, LpError> {
    let m = rows.len();
    let n = c.len();
    if b.len() != m || basis.len() != m || rows.iter().any(|r| r.len() != n) {
        return Err(LpError::BadBasis);
    }
    for (r, &col) in basis.iter().enumerate() {
        if col >= n || (0..m).any(|k| rows[k][col] != if k == r { 1.0 } else { 0.0 }) || b[r] < -TOL {
            return Err(LpError::BadBasis);
        }
    }

    let mut t: Vec<Vec<f64>> = rows.to_vec();
    let mut rhs: Vec<f64> = b.iter().map(|v| v.max(0.0)).collect();

    loop {
        let entering = (0..n).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let reduced = c[j] - (0..m).map(|r| c[basis[r]] * t[r][j]).sum::<f64>();
            reduced < -TOL
        });
        let Some(j) = entering else { break };

        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            if t[r][j] > TOL {
                let ratio = rhs[r] / t[r][j];
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((best, br)) => {
                        if ratio < br - TOL || (ratio <= br + TOL && basis[r] < basis[best]) {
                            Some((r, ratio))
                        } else {
                            Some((best, br))
                        }
                    }
                };
            }
        }
        let Some((p, _)) = leave else {
            return Err(LpError::Unbounded);
        };

        let pivot = t[p][j];
        for v in t[p].iter_mut() {
            *v /= pivot;
        }
        rhs[p] /= pivot;
        for r in 0..m {
            if r != p {
                let f = t[r][j];
                if f != 0.0 {
                    for k in 0..n {
                        t[r][k] -= f * t[p][k];
                    }
                    rhs[r] -= f * rhs[p];
                    if rhs[r] < 0.0 && rhs[r] > -TOL {
                        rhs[r] = 0.0;
                    }
                }
            }
        }
        basis[p] = j;
    }

    let mut x = vec![0.0; n];
    for r in 0..m {
        x[basis[r]] = rhs[r].max(0.0);
    }
    let objective = (0..n).map(|j| c[j] * x[j]).sum();
    Ok(LpSolution { objective, x })
}
