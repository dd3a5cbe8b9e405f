use nalgebra::{DMatrix, DVector};

use super::{QpError, QpProblem, QpSolution, QpStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    /// Bound on the KKT residual required for an optimal status.
    pub tol: f64,
    /// Iteration cap per phase.
    pub max_iter: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200 }
    }
}

/// Regularization of the elastic feasibility problem.
const PHASE1_PROX: f64 = 1e-6;
/// Multipliers above `-DUAL_TOL` count as non-negative.
const DUAL_TOL: f64 = 1e-11;
/// Relative threshold below which a Gram-Schmidt residual counts as dependent.
const DEPENDENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Row {
    /// Active-set index (inequalities) or position (equalities).
    index: usize,
    a: DVector<f64>,
    b: f64,
}

impl Row {
    fn violation(&self, x: &DVector<f64>) -> f64 {
        self.a.dot(x) - self.b
    }
}

struct Core<'a> {
    h: &'a DMatrix<f64>,
    g: &'a DVector<f64>,
    eq: &'a [Row],
    ineq: &'a [Row],
    max_iter: usize,
}

struct CoreResult {
    x: DVector<f64>,
    /// Positions into `ineq`.
    working: Vec<usize>,
    converged: bool,
    iterations: usize,
    trace: Vec<f64>,
}

/// Solves `[[H, C'], [C, 0]] [x; l] = [r1; r2]`.
fn kkt_solve(h: &DMatrix<f64>, c: &[&DVector<f64>], r1: &DVector<f64>, r2: &[f64]) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = h.nrows();
    let m = c.len();
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    for (i, row) in c.iter().enumerate() {
        for j in 0..n {
            k[(n + i, j)] = row[j];
            k[(j, n + i)] = row[j];
        }
    }
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(r1);
    for (i, v) in r2.iter().enumerate() {
        rhs[n + i] = *v;
    }
    let lu = k.clone().lu();
    let mut sol = lu.solve(&rhs)?;
    // one step of iterative refinement
    let resid = &rhs - &k * &sol;
    if let Some(corr) = lu.solve(&resid) {
        sol += corr;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
}

/// Greedily keeps rows that are linearly independent of `base` and of each other.
fn independent_subset<'r>(base: &[&DVector<f64>], candidates: impl Iterator<Item = (usize, &'r DVector<f64>)>, limit: usize) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let push = |v: &DVector<f64>, basis: &mut Vec<DVector<f64>>| -> bool {
        let norm = v.norm();
        if norm == 0.0 {
            return false;
        }
        let mut r = v / norm;
        for _ in 0..2 {
            for b in basis.iter() {
                let d = r.dot(b);
                r -= b * d;
            }
        }
        let rn = r.norm();
        if rn > DEPENDENCE_TOL {
            basis.push(r / rn);
            true
        } else {
            false
        }
    };
    for b in base {
        push(b, &mut basis);
    }
    let mut kept = Vec::new();
    for (i, v) in candidates {
        if basis.len() >= limit {
            break;
        }
        if push(v, &mut basis) {
            kept.push(i);
        }
    }
    kept
}

impl Core<'_> {
    fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(self.h * x)) + self.g.dot(x)
    }

    fn constraint_rows(&self, working: &[usize]) -> Vec<&DVector<f64>> {
        self.eq.iter().map(|r| &r.a).chain(working.iter().map(|&w| &self.ineq[w].a)).collect()
    }

    /// Minimizer on the affine set where the equalities and working rows hold with equality.
    fn eqp(&self, working: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
        let c = self.constraint_rows(working);
        let rhs: Vec<f64> = self.eq.iter().map(|r| r.b).chain(working.iter().map(|&w| self.ineq[w].b)).collect();
        kkt_solve(self.h, &c, &(-self.g), &rhs)
    }

    fn feasible(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.ineq.iter().all(|r| r.violation(x) <= tol * (1.0 + r.b.abs()))
    }

    /// Primal active-set iterations from a feasible `x` whose working rows are active.
    fn run(&self, mut x: DVector<f64>, mut working: Vec<usize>) -> CoreResult {
        let n = x.len();
        let mut trace = vec![self.objective(&x)];
        let mut iterations = 0;
        while iterations < self.max_iter {
            iterations += 1;
            let grad = self.h * &x + self.g;
            let c = self.constraint_rows(&working);
            let zeros = vec![0.0; c.len()];
            let Some((p, lambda)) = kkt_solve(self.h, &c, &(-grad), &zeros) else {
                // dependent working rows: drop the newest and retry
                if working.pop().is_none() {
                    break;
                }
                continue;
            };
            let step_scale = 1e-9 * (1.0 + x.amax());
            if p.amax() <= step_scale {
                let ne = self.eq.len();
                let mut worst: Option<(usize, f64)> = None;
                for (k, &w) in working.iter().enumerate() {
                    let l = lambda[ne + k];
                    let better = match worst {
                        None => l < -DUAL_TOL,
                        Some((kw, lw)) => l < lw || (l == lw && w < working[kw]),
                    };
                    if better {
                        worst = Some((k, l));
                    }
                }
                match worst {
                    None => {
                        return CoreResult { x, working, converged: true, iterations, trace };
                    }
                    Some((k, _)) => {
                        working.remove(k);
                        continue;
                    }
                }
            }
            let mut alpha = 1.0;
            let mut blocking = None;
            for (pos, row) in self.ineq.iter().enumerate() {
                if working.contains(&pos) {
                    continue;
                }
                let ap = row.a.dot(&p);
                if ap <= 1e-14 * row.a.norm() * p.norm() {
                    continue;
                }
                let room = (row.b - row.a.dot(&x)).max(0.0);
                let a = room / ap;
                if a < alpha {
                    alpha = a;
                    blocking = Some(pos);
                }
            }
            x += &p * alpha;
            if let Some(pos) = blocking {
                if working.len() + self.eq.len() < n {
                    working.push(pos);
                }
            }
            trace.push(self.objective(&x));
        }
        CoreResult { x, working, converged: false, iterations, trace }
    }
}

/// Maximum of the stationarity, primal feasibility, complementarity and dual
/// feasibility violations of `sol` for `p`.
pub fn kkt_residual(p: &QpProblem, sol: &QpSolution) -> f64 {
    let x = &sol.x;
    let n = p.n();
    let mut grad = &p.h * x + &p.g;
    if p.a_eq.nrows() > 0 {
        grad += p.a_eq.transpose() * &sol.dual_eq;
    }
    if p.a_in.nrows() > 0 {
        grad += p.a_in.transpose() * &sol.dual_in;
    }
    grad -= &sol.dual_lower;
    grad += &sol.dual_upper;
    let mut r = grad.amax();
    if p.a_eq.nrows() > 0 {
        r = r.max((&p.a_eq * x - &p.b_eq).amax());
    }
    for i in 0..p.a_in.nrows() {
        let s = p.a_in.row(i).dot(&x.transpose()) - p.b_in[i];
        let mu = sol.dual_in[i];
        r = r.max(s.max(0.0)).max((-mu).max(0.0));
        if mu != 0.0 {
            r = r.max((mu * s).abs());
        }
    }
    for j in 0..n {
        let fixed = p.lb[j] == p.ub[j];
        let (lo, hi) = (p.lb[j] - x[j], x[j] - p.ub[j]);
        r = r.max(lo.max(0.0)).max(hi.max(0.0));
        if fixed {
            r = r.max(hi.abs());
            continue;
        }
        let (ml, mu) = (sol.dual_lower[j], sol.dual_upper[j]);
        r = r.max((-ml).max(0.0)).max((-mu).max(0.0));
        if ml != 0.0 {
            r = r.max((ml * lo).abs());
        }
        if mu != 0.0 {
            r = r.max((mu * hi).abs());
        }
    }
    r
}

/// Reusable solver that warm-starts each solve from the previous active set.
#[derive(Debug, Clone, Default)]
pub struct QpSolver {
    pub settings: QpSettings,
    warm: Option<Vec<usize>>,
}

impl QpSolver {
    pub fn new(settings: QpSettings) -> Self {
        Self { settings, warm: None }
    }

    pub fn reset(&mut self) {
        self.warm = None;
    }

    pub fn solve(&mut self, p: &QpProblem) -> Result<QpSolution, QpError> {
        let sol = solve(p, &self.settings, self.warm.as_deref())?;
        if sol.status == QpStatus::Optimal {
            self.warm = Some(sol.active_set.clone());
        }
        Ok(sol)
    }
}

/// Solves `p`. `warm_start` lists active-set indices expected to be active at
/// the optimum; it only affects the path, never the result.
pub fn solve(p: &QpProblem, settings: &QpSettings, warm_start: Option<&[usize]>) -> Result<QpSolution, QpError> {
    p.validate()?;
    let n = p.n();
    let m_in = p.a_in.nrows();
    let tol = settings.tol;

    let mut eq: Vec<Row> = (0..p.a_eq.nrows())
        .map(|i| Row { index: i, a: p.a_eq.row(i).transpose(), b: p.b_eq[i] })
        .collect();
    let mut ineq: Vec<Row> = Vec::new();
    let mut trivially_infeasible = false;
    for i in 0..m_in {
        if p.b_in[i] == f64::INFINITY {
            continue;
        }
        if p.b_in[i] == f64::NEG_INFINITY {
            trivially_infeasible = true;
            continue;
        }
        ineq.push(Row { index: i, a: p.a_in.row(i).transpose(), b: p.b_in[i] });
    }
    let unit = |j: usize, s: f64| {
        let mut v = DVector::zeros(n);
        v[j] = s;
        v
    };
    for j in 0..n {
        if p.lb[j] == p.ub[j] {
            eq.push(Row { index: p.a_eq.nrows() + j, a: unit(j, 1.0), b: p.lb[j] });
        } else if p.lb[j].is_finite() {
            ineq.push(Row { index: m_in + j, a: unit(j, -1.0), b: -p.lb[j] });
        }
    }
    for j in 0..n {
        if p.lb[j] != p.ub[j] && p.ub[j].is_finite() {
            ineq.push(Row { index: m_in + n + j, a: unit(j, 1.0), b: p.ub[j] });
        }
    }
    let eq_keep = independent_subset(&[], eq.iter().enumerate().map(|(i, r)| (i, &r.a)), n);
    let eq_rows: Vec<Row> = eq_keep.iter().map(|&i| eq[i].clone()).collect();

    let infeasible = |iterations: usize| QpSolution {
        x: DVector::zeros(n),
        status: QpStatus::Infeasible,
        kkt_residual: f64::INFINITY,
        active_set: vec![],
        dual_eq: DVector::zeros(p.a_eq.nrows()),
        dual_in: DVector::zeros(m_in),
        dual_lower: DVector::zeros(n),
        dual_upper: DVector::zeros(n),
        iterations,
        objective_trace: vec![],
    };
    if trivially_infeasible {
        return Ok(infeasible(0));
    }

    let core = Core { h: &p.h, g: &p.g, eq: &eq_rows, ineq: &ineq, max_iter: settings.max_iter };
    let Some((x_eq, _)) = core.eqp(&[]) else {
        return Ok(infeasible(0));
    };
    // dependent equality rows must be consistent with the kept ones
    if eq.iter().any(|r| r.violation(&x_eq).abs() > tol * (1.0 + r.b.abs())) {
        return Ok(infeasible(0));
    }

    let position_of = |index: usize| ineq.iter().position(|r| r.index == index);
    let mut start: Option<(DVector<f64>, Vec<usize>)> = None;
    if let Some(ws) = warm_start {
        let mut cand: Vec<usize> = ws.iter().filter_map(|&i| position_of(i)).collect();
        cand.sort_unstable();
        cand.dedup();
        let base: Vec<&DVector<f64>> = eq_rows.iter().map(|r| &r.a).collect();
        let keep = independent_subset(&base, cand.iter().map(|&c| (c, &ineq[c].a)), n);
        if let Some((x, _)) = core.eqp(&keep) {
            if core.feasible(&x, 1e-12) {
                start = Some((x, keep));
            }
        }
    }
    let mut phase1_iters = 0;
    if start.is_none() {
        if core.feasible(&x_eq, 1e-12) {
            start = Some((x_eq.clone(), vec![]));
        } else {
            match phase_one(&core, &x_eq, settings) {
                Phase1::Feasible(x, iters) => {
                    phase1_iters = iters;
                    let base: Vec<&DVector<f64>> = eq_rows.iter().map(|r| &r.a).collect();
                    let active = ineq
                        .iter()
                        .enumerate()
                        .filter(|(_, r)| r.violation(&x) >= -1e-10 * (1.0 + r.b.abs()))
                        .map(|(i, r)| (i, &r.a));
                    let keep = independent_subset(&base, active, n);
                    start = Some((x, keep));
                }
                Phase1::Infeasible(iters) => return Ok(infeasible(iters)),
                Phase1::Stalled(x, iters) => {
                    let mut sol = infeasible(iters);
                    sol.x = x;
                    sol.status = QpStatus::MaxIter;
                    return Ok(sol);
                }
            }
        }
    }
    let (x0, w0) = start.expect("start point chosen above");
    let res = core.run(x0, w0);
    let mut x = res.x;
    let mut working = res.working;
    working.sort_by_key(|&w| ineq[w].index);

    // polish on the final working set and recover multipliers
    let mut lambda = None;
    if let Some((xp, l)) = core.eqp(&working) {
        if core.feasible(&xp, 1e-10) {
            x = xp;
            lambda = Some(l);
        }
    }
    let lambda = lambda.unwrap_or_else(|| DVector::zeros(eq_rows.len() + working.len()));
    // variables held by a bound sit exactly on it
    for j in 0..n {
        if p.lb[j] == p.ub[j] {
            x[j] = p.lb[j];
        }
    }
    for &w in &working {
        let idx = ineq[w].index;
        if idx >= m_in + n {
            x[idx - m_in - n] = p.ub[idx - m_in - n];
        } else if idx >= m_in {
            x[idx - m_in] = p.lb[idx - m_in];
        }
    }

    let mut sol = QpSolution {
        x,
        status: QpStatus::Optimal,
        kkt_residual: 0.0,
        active_set: working.iter().map(|&w| ineq[w].index).collect(),
        dual_eq: DVector::zeros(p.a_eq.nrows()),
        dual_in: DVector::zeros(m_in),
        dual_lower: DVector::zeros(n),
        dual_upper: DVector::zeros(n),
        iterations: phase1_iters + res.iterations,
        objective_trace: res.trace,
    };
    let n_eq = p.a_eq.nrows();
    for (k, row) in eq_rows.iter().enumerate() {
        if row.index < n_eq {
            sol.dual_eq[row.index] = lambda[k];
        } else {
            sol.dual_upper[row.index - n_eq] = lambda[k];
        }
    }
    for (k, &w) in working.iter().enumerate() {
        let l = lambda[eq_rows.len() + k];
        let idx = ineq[w].index;
        if idx < m_in {
            sol.dual_in[idx] = l;
        } else if idx < m_in + n {
            sol.dual_lower[idx - m_in] = l;
        } else {
            sol.dual_upper[idx - m_in - n] = l;
        }
    }
    sol.kkt_residual = kkt_residual(p, &sol);
    if !res.converged || !(sol.kkt_residual < tol) {
        sol.status = QpStatus::MaxIter;
    }
    Ok(sol)
}

enum Phase1 {
    Feasible(DVector<f64>, usize),
    Infeasible(usize),
    Stalled(DVector<f64>, usize),
}

/// Elastic feasibility problem: slacks on the rows violated at `x0`, hard
/// everything else.
fn phase_one(core: &Core<'_>, x0: &DVector<f64>, settings: &QpSettings) -> Phase1 {
    let n = x0.len();
    let violated: Vec<usize> = core
        .ineq
        .iter()
        .enumerate()
        .filter(|(_, r)| r.violation(x0) > 0.0)
        .map(|(i, _)| i)
        .collect();
    let k = violated.len();
    let nz = n + k;
    let h = DMatrix::from_diagonal_element(nz, nz, PHASE1_PROX);
    let mut g = DVector::zeros(nz);
    g.rows_mut(0, n).copy_from(&(-x0 * PHASE1_PROX));
    g.rows_mut(n, k).fill(1.0);
    let extend = |a: &DVector<f64>| {
        let mut v = DVector::zeros(nz);
        v.rows_mut(0, n).copy_from(a);
        v
    };
    let eq: Vec<Row> = core.eq.iter().map(|r| Row { index: r.index, a: extend(&r.a), b: r.b }).collect();
    let mut ineq = Vec::with_capacity(core.ineq.len() + k);
    let mut z0 = DVector::zeros(nz);
    z0.rows_mut(0, n).copy_from(x0);
    for (i, r) in core.ineq.iter().enumerate() {
        let scale = r.a.norm();
        let mut a = extend(&(&r.a / scale));
        let b = r.b / scale;
        if let Some(j) = violated.iter().position(|&v| v == i) {
            a[n + j] = -1.0;
            z0[n + j] = r.violation(x0) / scale;
        }
        ineq.push(Row { index: i, a, b });
    }
    for j in 0..k {
        let mut a = DVector::zeros(nz);
        a[n + j] = -1.0;
        ineq.push(Row { index: core.ineq.len() + j, a, b: 0.0 });
    }
    let elastic = Core { h: &h, g: &g, eq: &eq, ineq: &ineq, max_iter: settings.max_iter };
    let res = elastic.run(z0, vec![]);
    let x = res.x.rows(0, n).into_owned();
    let worst = if k > 0 { res.x.rows(n, k).max() } else { 0.0 };
    if worst > settings.tol {
        if res.converged {
            Phase1::Infeasible(res.iterations)
        } else {
            Phase1::Stalled(x, res.iterations)
        }
    } else {
        Phase1::Feasible(x, res.iterations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn opts() -> QpSettings {
        QpSettings::default()
    }

    #[test]
    fn equality_pins_solution() {
        let p = QpProblem::new(dmatrix![1.0], dvector![0.0]).with_equalities(dmatrix![1.0], dvector![1.0]);
        let s = solve(&p, &opts(), None).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn halfplane_projection() {
        // x + y >= 2
        let p = QpProblem::new(DMatrix::identity(2, 2), dvector![0.0, 0.0])
            .with_inequalities(dmatrix![-1.0, -1.0], dvector![-2.0]);
        let s = solve(&p, &opts(), None).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x - dvector![1.0, 1.0]).amax() < 1e-12);
        assert_eq!(s.active_set, vec![0]);
        assert!((s.dual_in[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let p = QpProblem::new(dmatrix![1.0], dvector![0.0])
            .with_inequalities(dmatrix![-1.0; 1.0], dvector![-1.0, 0.0]);
        assert_eq!(solve(&p, &opts(), None).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn inconsistent_equalities_are_infeasible() {
        let p = QpProblem::new(DMatrix::identity(2, 2), dvector![0.0, 0.0])
            .with_equalities(dmatrix![1.0, 1.0; 2.0, 2.0], dvector![1.0, 3.0]);
        assert_eq!(solve(&p, &opts(), None).unwrap().status, QpStatus::Infeasible);
        let consistent = QpProblem::new(DMatrix::identity(2, 2), dvector![0.0, 0.0])
            .with_equalities(dmatrix![1.0, 1.0; 2.0, 2.0], dvector![1.0, 2.0]);
        let s = solve(&consistent, &opts(), None).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x - dvector![0.5, 0.5]).amax() < 1e-12);
    }

    #[test]
    fn fixed_variable_acts_as_equality() {
        let p = QpProblem::new(DMatrix::identity(2, 2), dvector![-1.0, -1.0])
            .with_bounds(dvector![0.0, f64::NEG_INFINITY], dvector![0.0, 0.5]);
        let s = solve(&p, &opts(), None).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x - dvector![0.0, 0.5]).amax() < 1e-12);
        assert!(s.kkt_residual < 1e-12);
    }

    #[test]
    fn box_bound_multipliers() {
        let p = QpProblem::new(DMatrix::identity(2, 2), dvector![2.0, -3.0])
            .with_bounds(dvector![-1.0, -1.0], dvector![1.0, 1.0]);
        let s = solve(&p, &opts(), None).unwrap();
        assert!((s.x - dvector![-1.0, 1.0]).amax() < 1e-12);
        assert_eq!(s.active_set, vec![0, 3]);
        assert!((s.dual_lower[0] - 1.0).abs() < 1e-12);
        assert!((s.dual_upper[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn warm_start_gives_same_answer() {
        let p = QpProblem::new(dmatrix![2.0, 0.5; 0.5, 1.0], dvector![-1.0, -4.0])
            .with_inequalities(dmatrix![1.0, 1.0; -1.0, 2.0], dvector![1.0, 1.5])
            .with_bounds(dvector![-2.0, -2.0], dvector![2.0, 2.0]);
        let cold = solve(&p, &opts(), None).unwrap();
        for ws in [vec![], vec![0], vec![1], vec![0, 1], vec![2, 5], vec![99]] {
            let warm = solve(&p, &opts(), Some(&ws)).unwrap();
            assert_eq!(warm.status, QpStatus::Optimal);
            assert!((&warm.x - &cold.x).amax() < 1e-12, "{ws:?}");
        }
        let mut solver = QpSolver::new(opts());
        let first = solver.solve(&p).unwrap();
        let second = solver.solve(&p).unwrap();
        assert!(second.iterations <= first.iterations);
    }

    #[test]
    fn invalid_problems_are_errors() {
        let p = QpProblem::new(dmatrix![1.0, 0.0; 0.0, -1.0], dvector![0.0, 0.0]);
        assert_eq!(solve(&p, &opts(), None), Err(QpError::NotPositiveDefinite));
        let p = QpProblem::new(dmatrix![1.0, 0.1; 0.0, 1.0], dvector![0.0, 0.0]);
        assert!(matches!(solve(&p, &opts(), None), Err(QpError::NotSymmetric(_))));
        let p = QpProblem::new(dmatrix![1.0], dvector![f64::NAN]);
        assert_eq!(solve(&p, &opts(), None), Err(QpError::NaN("g")));
        let p = QpProblem::new(dmatrix![1.0], dvector![0.0]).with_bounds(dvector![1.0], dvector![0.0]);
        assert!(matches!(solve(&p, &opts(), None), Err(QpError::InvertedBounds { .. })));
    }

    #[test]
    fn infinite_rows_are_ignored() {
        let p = QpProblem::new(dmatrix![1.0], dvector![-1.0]).with_inequalities(dmatrix![1.0], dvector![f64::INFINITY]);
        let s = solve(&p, &opts(), None).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        let p = QpProblem::new(dmatrix![1.0], dvector![-1.0]).with_inequalities(dmatrix![1.0], dvector![f64::NEG_INFINITY]);
        assert_eq!(solve(&p, &opts(), None).unwrap().status, QpStatus::Infeasible);
    }
}
