//! Small dense two-phase simplex for the polyhedral evaluators.
//!
//! Solves min c^T x subject to A x = b, x >= 0 with Bland's anti-cycling rule
//! and deterministic tie-breaks throughout. Problem sizes here are tiny (a few
//! hundred variables at most), so a full-tableau method with a final
//! basis re-solve is simpler and more auditable than a revised simplex.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const RC_EPS: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-9;
const DEGENERATE_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub x: DVector<f64>,
    /// Dual multipliers of the equality rows (zeros for rows dropped as redundant).
    pub dual: DVector<f64>,
    /// True when the optimal basis is primal degenerate (a basic variable at 0),
    /// the witness that the dual solution may be non-unique.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

pub struct LpOutcome {
    pub status: LpStatus,
    pub solution: Option<LpSolution>,
    /// Phase-1 infeasibility gap (how much artificial mass remained).
    pub infeasibility: f64,
}

struct Tableau {
    rows: usize,
    cols: usize,        // structural columns only
    t: DMatrix<f64>,    // rows x (cols_total + 1), last column is rhs
    cost: DVector<f64>, // reduced-cost row over cols_total, plus objective in last slot
    basis: Vec<usize>,
    n_art: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.t[(i, self.cols + self.n_art)]
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let total = self.cols + self.n_art + 1;
        let p = self.t[(r, e)];
        for j in 0..total {
            self.t[(r, j)] /= p;
        }
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[(i, e)];
            if f != 0.0 {
                for j in 0..total {
                    self.t[(i, j)] -= f * self.t[(r, j)];
                }
            }
        }
        let f = self.cost[e];
        if f != 0.0 {
            for j in 0..total {
                self.cost[j] -= f * self.t[(r, j)];
            }
        }
        self.basis[r] = e;
    }

    /// Bland's rule: enter the lowest-index improving column among `allowed`,
    /// leave by minimum ratio with lowest basic-variable index on ties.
    fn run(&mut self, allowed: usize, max_pivots: usize) -> Result<()> {
        for _ in 0..max_pivots {
            let mut entering = None;
            for j in 0..allowed {
                if self.cost[j] < -RC_EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(e) = entering else {
                return Ok(());
            };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.t[(i, e)];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((best_i, best_r)) => {
                            if ratio < best_r - 1e-12
                                || ((ratio - best_r).abs() <= 1e-12
                                    && self.basis[i] < self.basis[best_i])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::LpFailure {
                    reason: "unbounded objective".into(),
                });
            };
            self.pivot(r, e);
        }
        Err(Error::LpFailure {
            reason: format!("pivot limit reached ({max_pivots})"),
        })
    }
}

/// Solves min c^T x s.t. A x = b, x >= 0.
///
/// Rows are sign-flipped and max-abs scaled internally; the reported duals are
/// expressed against the original rows. The final x and objective are
/// recomputed from the optimal basis with a fresh LU solve so tableau drift
/// cannot leak into results.
pub fn solve_standard_form(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<LpOutcome> {
    let m = a.nrows();
    let n = a.ncols();
    assert_eq!(b.len(), m);
    assert_eq!(c.len(), n);

    // Row scaling (sign folded in so that scaled rhs >= 0).
    let mut a_s = a.clone();
    let mut b_s = b.clone();
    let mut scale = vec![1.0f64; m];
    for i in 0..m {
        let mut mx = b_s[i].abs();
        for j in 0..n {
            mx = mx.max(a_s[(i, j)].abs());
        }
        let mut s = if mx > 0.0 { 1.0 / mx } else { 1.0 };
        if b_s[i] * s < 0.0 {
            s = -s;
        }
        scale[i] = s;
        for j in 0..n {
            a_s[(i, j)] *= s;
        }
        b_s[i] *= s;
    }

    // Phase 1 tableau: [A | I] with artificial basis.
    let mut t = DMatrix::zeros(m, n + m + 1);
    t.view_mut((0, 0), (m, n)).copy_from(&a_s);
    for i in 0..m {
        t[(i, n + i)] = 1.0;
        t[(i, n + m)] = b_s[i];
    }
    let mut cost = DVector::zeros(n + m + 1);
    // phase-1 reduced costs: c_j - sum_i A_ij (artificial costs are 1)
    for j in 0..n {
        let mut s = 0.0;
        for i in 0..m {
            s += t[(i, j)];
        }
        cost[j] = -s;
    }
    let mut obj = 0.0;
    for i in 0..m {
        obj -= t[(i, n + m)];
    }
    cost[n + m] = obj;

    let mut tab = Tableau {
        rows: m,
        cols: n,
        t,
        cost,
        basis: (n..n + m).collect(),
        n_art: m,
    };
    let max_pivots = 200 * (n + m + 10);
    tab.run(n, max_pivots)?;

    let infeas = -tab.cost[n + m];
    if infeas > PHASE1_TOL {
        return Ok(LpOutcome {
            status: LpStatus::Infeasible,
            solution: None,
            infeasibility: infeas,
        });
    }

    // Drive basic artificials out; rows where no structural pivot exists are
    // redundant and get neutralized.
    let mut dropped = vec![false; m];
    for r in 0..m {
        if tab.basis[r] < n {
            continue;
        }
        let mut pivoted = false;
        for j in 0..n {
            if tab.t[(r, j)].abs() > PIVOT_EPS {
                tab.pivot(r, j);
                pivoted = true;
                break;
            }
        }
        if !pivoted {
            dropped[r] = true;
        }
    }

    // Phase 2: rebuild the reduced-cost row for the true objective. Artificial
    // columns keep whatever value lands there; `run` never scans them for
    // entering since `allowed == n`.
    let mut cost2 = DVector::zeros(n + m + 1);
    for j in 0..n {
        cost2[j] = c[j];
    }
    for r in 0..m {
        let bv = tab.basis[r];
        if bv < n {
            let cb = c[bv];
            if cb != 0.0 {
                for j in 0..n + m + 1 {
                    cost2[j] -= cb * tab.t[(r, j)];
                }
            }
        }
    }
    // zero out reduced costs of basic columns exactly
    for r in 0..m {
        if tab.basis[r] < n {
            cost2[tab.basis[r]] = 0.0;
        }
    }
    tab.cost = cost2;
    tab.run(n, max_pivots)?;

    // Recover x from a fresh solve on the original basis columns.
    let active_rows: Vec<usize> = (0..m).filter(|&i| !dropped[i]).collect();
    let basic_cols: Vec<usize> = active_rows.iter().map(|&i| tab.basis[i]).collect();
    for &j in &basic_cols {
        if j >= n {
            return Err(Error::LpFailure {
                reason: "artificial variable stuck in basis".into(),
            });
        }
    }
    let k = active_rows.len();
    let mut bmat = DMatrix::zeros(k, k);
    let mut brhs = DVector::zeros(k);
    for (ri, &i) in active_rows.iter().enumerate() {
        brhs[ri] = b_s[i];
        for (ci, &j) in basic_cols.iter().enumerate() {
            bmat[(ri, ci)] = a_s[(i, j)];
        }
    }
    let lu = bmat.clone().lu();
    let xb = lu.solve(&brhs).ok_or_else(|| Error::LpFailure {
        reason: "optimal basis is numerically singular".into(),
    })?;

    let mut x = DVector::zeros(n);
    for (ci, &j) in basic_cols.iter().enumerate() {
        x[j] = xb[ci];
    }
    let objective = c.dot(&x);

    // Dual: solve B^T y = c_B on the scaled rows, then undo the scaling.
    let mut cb = DVector::zeros(k);
    for (ci, &j) in basic_cols.iter().enumerate() {
        cb[ci] = c[j];
    }
    let yt = bmat
        .transpose()
        .lu()
        .solve(&cb)
        .ok_or_else(|| Error::LpFailure {
            reason: "dual solve failed on optimal basis".into(),
        })?;
    let mut dual = DVector::zeros(m);
    for (ri, &i) in active_rows.iter().enumerate() {
        dual[i] = yt[ri] * scale[i];
    }

    let xmax = x.amax().max(1.0);
    let degenerate = xb.iter().any(|&v| v.abs() <= DEGENERATE_EPS * xmax);

    Ok(LpOutcome {
        status: LpStatus::Optimal,
        solution: Some(LpSolution {
            objective,
            x,
            dual,
            degenerate,
        }),
        infeasibility: infeas,
    })
}
