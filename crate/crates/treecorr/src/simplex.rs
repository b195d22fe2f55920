//! Dense primal simplex for small box-bounded problems.
//!
//! Solves `min c·x` subject to `A x <= b` and `lower <= x <= upper`, with
//! the structural variables boxed on both sides. The tableau is dense, the
//! pricing is most-negative reduced cost with a permanent switch to smallest
//! index after a degenerate streak (so exact runs terminate and float runs
//! cannot cycle), and ratio-test ties break on the smallest basic index.
//! Works over `f64` and over exact rationals through one scalar trait; the
//! exact instantiation is the authority when the two disagree.
//!
//! The caller must supply a feasible box origin: `A·lower <= b`. Every use
//! in this crate has `b = 0` with constraint rows that vanish on constant
//! vectors, so the all-lower point is always feasible.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::error::{Error, Result};

pub trait LpScalar:
    Clone
    + PartialOrd
    + std::fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Comparison tolerance; zero in exact arithmetic.
    fn tol() -> Self;

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

impl LpScalar for f64 {
    fn tol() -> f64 {
        1e-9
    }
}

impl LpScalar for crate::rational::Rat {
    fn tol() -> Self {
        Self::zero()
    }
}

#[derive(Debug, Clone)]
pub struct LpProblem<S> {
    pub objective: Vec<S>,
    pub rows: Vec<Vec<S>>,
    pub rhs: Vec<S>,
    pub lower: Vec<S>,
    pub upper: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct LpSolution<S> {
    pub value: S,
    pub x: Vec<S>,
    pub iterations: usize,
    /// |primal − dual| at the final basis.
    pub duality_gap: S,
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum VarStatus {
    Basic(usize),
    AtLower,
    AtUpper,
}

pub fn solve_lp<S: LpScalar>(p: &LpProblem<S>) -> Result<LpSolution<S>> {
    let n = p.objective.len();
    let m = p.rows.len();
    for row in &p.rows {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: row.len(),
            });
        }
    }
    if p.rhs.len() != m || p.lower.len() != n || p.upper.len() != n {
        return Err(Error::InvalidInput("LP shape mismatch".into()));
    }
    for j in 0..n {
        if p.upper[j] < p.lower[j] {
            return Err(Error::InvalidInput(format!("empty box at variable {j}")));
        }
    }

    let total = n + m;
    let tol = S::tol();

    // upper bound per variable; slacks are one-sided
    let upper: Vec<Option<S>> = (0..total)
        .map(|j| (j < n).then(|| p.upper[j].clone()))
        .collect();
    let lower: Vec<S> = (0..total)
        .map(|j| if j < n { p.lower[j].clone() } else { S::zero() })
        .collect();

    let mut tableau: Vec<Vec<S>> = (0..m)
        .map(|r| {
            let mut row = vec![S::zero(); total];
            row[..n].clone_from_slice(&p.rows[r]);
            row[n + r] = S::one();
            row
        })
        .collect();
    let mut cbar: Vec<S> = (0..total)
        .map(|j| {
            if j < n {
                p.objective[j].clone()
            } else {
                S::zero()
            }
        })
        .collect();

    let mut status = vec![VarStatus::AtLower; total];
    let mut basis: Vec<usize> = (0..m).map(|r| n + r).collect();
    for (r, &b) in basis.iter().enumerate() {
        status[b] = VarStatus::Basic(r);
    }

    let mut x: Vec<S> = lower.clone();
    let mut obj = S::zero();
    for j in 0..n {
        obj = obj + p.objective[j].clone() * x[j].clone();
    }
    for r in 0..m {
        let mut s = p.rhs[r].clone();
        for j in 0..n {
            s = s - p.rows[r][j].clone() * x[j].clone();
        }
        if s < -tol.clone() {
            return Err(Error::NumericalFailure(
                "box origin is infeasible; this solver expects A·lower <= b".into(),
            ));
        }
        x[n + r] = s;
    }

    let max_iters = 200 * (total + 1) + 20_000;
    let bland_after = total + m + 16;
    let mut degenerate_streak = 0usize;
    let mut bland = false;
    let mut iterations = 0usize;

    loop {
        iterations += 1;
        if iterations > max_iters {
            return Err(Error::NumericalFailure(format!(
                "iteration cap {max_iters} exceeded"
            )));
        }
        if degenerate_streak > bland_after {
            bland = true;
        }

        // pricing
        let mut entering: Option<(usize, bool, S)> = None; // (var, increases, violation)
        for j in 0..total {
            let (increases, viol) = match status[j] {
                VarStatus::Basic(_) => continue,
                VarStatus::AtLower => {
                    if cbar[j] < -tol.clone() {
                        (true, -cbar[j].clone())
                    } else {
                        continue;
                    }
                }
                VarStatus::AtUpper => {
                    if cbar[j] > tol.clone() {
                        (false, cbar[j].clone())
                    } else {
                        continue;
                    }
                }
            };
            match &entering {
                None => entering = Some((j, increases, viol)),
                Some((_, _, best)) if !bland && viol > *best => {
                    entering = Some((j, increases, viol))
                }
                _ => {}
            }
            if bland {
                break; // smallest index chosen
            }
        }
        let Some((q, increases, _)) = entering else {
            break; // optimal
        };

        // ratio test along the entering direction
        #[derive(PartialEq)]
        enum Blocker {
            OwnBound,
            Row(usize),
        }
        let mut t_best: Option<S> = upper[q].clone().map(|u| u - lower[q].clone());
        let mut blocker = Blocker::OwnBound;
        for r in 0..m {
            let alpha = tableau[r][q].clone();
            // basic value moves at rate -alpha per unit of entering increase
            let rate = if increases { -alpha } else { alpha };
            let b = basis[r];
            let limit = if rate < -tol.clone() {
                Some((x[b].clone() - lower[b].clone()) / -rate)
            } else if rate > tol.clone() {
                upper[b].clone().map(|u| (u - x[b].clone()) / rate)
            } else {
                None
            };
            if let Some(t) = limit {
                let replace = match &t_best {
                    None => true,
                    Some(best) => {
                        t < best.clone() - tol.clone()
                            || ((t.clone() - best.clone()).abs_val() <= tol.clone()
                                && match blocker {
                                    Blocker::Row(r0) => basis[r] < basis[r0],
                                    Blocker::OwnBound => false,
                                })
                    }
                };
                if replace {
                    t_best = Some(if t < S::zero() { S::zero() } else { t });
                    blocker = Blocker::Row(r);
                }
            }
        }
        let Some(t) = t_best else {
            return Err(Error::Unbounded);
        };

        if t <= tol.clone() {
            degenerate_streak += 1;
        } else {
            degenerate_streak = 0;
        }

        // move the point
        let step = if increases { t.clone() } else { -t.clone() };
        x[q] = x[q].clone() + step.clone();
        for r in 0..m {
            let b = basis[r];
            x[b] = x[b].clone() - tableau[r][q].clone() * step.clone();
        }
        obj = obj + cbar[q].clone() * step.clone();

        match blocker {
            Blocker::OwnBound => {
                status[q] = if increases {
                    VarStatus::AtUpper
                } else {
                    VarStatus::AtLower
                };
                // land exactly on the bound, killing float drift
                x[q] = if increases {
                    upper[q].clone().expect("own-bound blocker has an upper")
                } else {
                    lower[q].clone()
                };
            }
            Blocker::Row(r) => {
                let leaving = basis[r];
                let hit_upper = if let Some(u) = &upper[leaving] {
                    (x[leaving].clone() - u.clone()).abs_val()
                        <= (x[leaving].clone() - lower[leaving].clone()).abs_val()
                } else {
                    false
                };
                status[leaving] = if hit_upper {
                    VarStatus::AtUpper
                } else {
                    VarStatus::AtLower
                };
                x[leaving] = if hit_upper {
                    upper[leaving].clone().expect("hit_upper implies an upper")
                } else {
                    lower[leaving].clone()
                };
                // pivot: normalise row r on column q, eliminate elsewhere
                let pivot = tableau[r][q].clone();
                if pivot.abs_val() <= tol.clone() {
                    return Err(Error::NumericalFailure("vanishing pivot element".into()));
                }
                for v in tableau[r].iter_mut() {
                    *v = v.clone() / pivot.clone();
                }
                for rr in 0..m {
                    if rr == r {
                        continue;
                    }
                    let factor = tableau[rr][q].clone();
                    if factor.abs_val() > S::zero() {
                        for c in 0..total {
                            let delta = factor.clone() * tableau[r][c].clone();
                            tableau[rr][c] = tableau[rr][c].clone() - delta;
                        }
                    }
                }
                let factor = cbar[q].clone();
                if factor.abs_val() > S::zero() {
                    for c in 0..total {
                        let delta = factor.clone() * tableau[r][c].clone();
                        cbar[c] = cbar[c].clone() - delta;
                    }
                }
                basis[r] = q;
                status[q] = VarStatus::Basic(r);
            }
        }
    }

    // dual value from the final reduced costs: multipliers are the negated
    // slack reduced costs, plus bound contributions of nonbasic structurals
    let mut dual = S::zero();
    for r in 0..m {
        dual = dual + (-cbar[n + r].clone()) * p.rhs[r].clone();
    }
    for j in 0..n {
        if !matches!(status[j], VarStatus::Basic(_)) {
            dual = dual + cbar[j].clone() * x[j].clone();
        }
    }
    let gap = (obj.clone() - dual).abs_val();

    Ok(LpSolution {
        value: obj,
        x: x[..n].to_vec(),
        iterations,
        duality_gap: gap,
    })
}
