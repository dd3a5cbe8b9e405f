//! Dense strictly convex QP:
//!
//! ```text
//! minimize    1/2 x'Hx + g'x
//! subject to  A_eq x  = b_eq
//!             A_in x <= b_in
//!             lb <= x <= ub
//! ```
//!
//! Solved with a primal active-set method with an elastic feasibility phase.
//! Active-set indices number the general inequality rows first, then the
//! lower bounds, then the upper bounds.

mod dump;
mod solver;

pub use dump::{read_problem, write_problem};
pub use solver::{kkt_residual, solve, QpSettings, QpSolver};

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("cost matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("cost matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("lower bound {lower} exceeds upper bound {upper} for variable {index}")]
    InvertedBounds { index: usize, lower: f64, upper: f64 },
    #[error("NaN in {0}")]
    NaN(&'static str),
    #[error("malformed problem dump: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

impl QpProblem {
    /// Unconstrained problem with `n` variables and unbounded box.
    pub fn new(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = g.len();
        Self {
            h,
            g,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            b_in: DVector::zeros(0),
            lb: DVector::from_element(n, f64::NEG_INFINITY),
            ub: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_in = a;
        self.b_in = b;
        self
    }

    pub fn with_bounds(mut self, lb: DVector<f64>, ub: DVector<f64>) -> Self {
        self.lb = lb;
        self.ub = ub;
        self
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.g.dot(x)
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.n();
        let dim = |ok: bool, what: &str| if ok { Ok(()) } else { Err(QpError::Dimension(what.to_string())) };
        dim(self.h.nrows() == n && self.h.ncols() == n, "H must be n x n")?;
        dim(self.a_eq.ncols() == n && self.a_eq.nrows() == self.b_eq.len(), "A_eq / b_eq")?;
        dim(self.a_in.ncols() == n && self.a_in.nrows() == self.b_in.len(), "A_in / b_in")?;
        dim(self.lb.len() == n && self.ub.len() == n, "bounds")?;
        let has_nan = |v: &[f64]| v.iter().any(|x| x.is_nan());
        for (name, data) in [
            ("H", self.h.as_slice()),
            ("g", self.g.as_slice()),
            ("A_eq", self.a_eq.as_slice()),
            ("b_eq", self.b_eq.as_slice()),
            ("A_in", self.a_in.as_slice()),
            ("b_in", self.b_in.as_slice()),
            ("lb", self.lb.as_slice()),
            ("ub", self.ub.as_slice()),
        ] {
            if has_nan(data) {
                return Err(QpError::NaN(name));
            }
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !(finite(self.h.as_slice()) && finite(self.g.as_slice()) && finite(self.a_eq.as_slice())
            && finite(self.a_in.as_slice()) && finite(self.b_eq.as_slice()))
        {
            return Err(QpError::Dimension("infinite entry in H, g, A_eq, A_in or b_eq".into()));
        }
        let asym = (&self.h - self.h.transpose()).amax();
        if asym > 1e-10 {
            return Err(QpError::NotSymmetric(asym));
        }
        if Cholesky::new(self.h.clone()).is_none() {
            return Err(QpError::NotPositiveDefinite);
        }
        for i in 0..n {
            if self.lb[i] > self.ub[i] || self.lb[i] == f64::INFINITY || self.ub[i] == f64::NEG_INFINITY {
                return Err(QpError::InvertedBounds { index: i, lower: self.lb[i], upper: self.ub[i] });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    /// Iteration cap hit, or the final point could not be certified; `x` is the last iterate.
    MaxIter,
}

impl QpStatus {
    pub fn name(self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
            QpStatus::MaxIter => "max_iter",
        }
    }
}

impl std::fmt::Display for QpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub status: QpStatus,
    pub kkt_residual: f64,
    /// Active inequality indices, ascending.
    pub active_set: Vec<usize>,
    /// Multipliers of the equality rows.
    pub dual_eq: DVector<f64>,
    /// Multipliers of the general inequality rows (non-negative at optimum).
    pub dual_in: DVector<f64>,
    /// Multipliers of the lower and upper bounds (non-negative at optimum; fixed
    /// variables report their signed equality multiplier on the upper side).
    pub dual_lower: DVector<f64>,
    pub dual_upper: DVector<f64>,
    pub iterations: usize,
    /// Objective after every iteration of the optimality phase.
    pub objective_trace: Vec<f64>,
}

impl QpSolution {
    pub fn objective(&self, p: &QpProblem) -> f64 {
        p.objective(&self.x)
    }
}
