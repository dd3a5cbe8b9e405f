//! Exhaustive reference solutions for small QPs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use wbreact_core::qp::QpProblem;

/// All inequality rows of `p` (general rows and finite bounds) as `(a, b)`.
fn rows(p: &QpProblem) -> Vec<(DVector<f64>, f64)> {
    let n = p.n();
    let mut out: Vec<(DVector<f64>, f64)> = (0..p.a_in.nrows()).map(|i| (p.a_in.row(i).transpose(), p.b_in[i])).collect();
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        if p.lb[j].is_finite() {
            out.push((-&e, -p.lb[j]));
        }
        if p.ub[j].is_finite() {
            out.push((e, p.ub[j]));
        }
    }
    out
}

fn feasible(p: &QpProblem, x: &DVector<f64>, tol: f64) -> bool {
    let eq_ok = (0..p.a_eq.nrows()).all(|i| (p.a_eq.row(i).transpose().dot(x) - p.b_eq[i]).abs() <= tol);
    eq_ok && rows(p).iter().all(|(a, b)| a.dot(x) <= b + tol)
}

fn eqp(p: &QpProblem, active: &[(DVector<f64>, f64)]) -> Option<DVector<f64>> {
    let n = p.n();
    let m = p.a_eq.nrows() + active.len();
    let mut k = DMatrix::zeros(n + m, n + m);
    let mut rhs = DVector::zeros(n + m);
    k.view_mut((0, 0), (n, n)).copy_from(&p.h);
    rhs.rows_mut(0, n).copy_from(&(-&p.g));
    let all = (0..p.a_eq.nrows()).map(|i| (p.a_eq.row(i).transpose(), p.b_eq[i])).chain(active.iter().cloned());
    for (r, (a, b)) in all.enumerate() {
        for j in 0..n {
            k[(n + r, j)] = a[j];
            k[(j, n + r)] = a[j];
        }
        rhs[n + r] = b;
    }
    let sol = k.full_piv_lu().solve(&rhs)?;
    sol.iter().all(|v| v.is_finite()).then(|| sol.rows(0, n).into_owned())
}

/// Minimum over all feasible stationary points of every active-row subset of
/// size at most `n`. `None` when no subset yields a feasible point.
pub fn enumerate(p: &QpProblem) -> Option<DVector<f64>> {
    let rows = rows(p);
    let n = p.n();
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut subset = Vec::new();
    fn recurse(
        p: &QpProblem,
        rows: &[(DVector<f64>, f64)],
        start: usize,
        limit: usize,
        subset: &mut Vec<usize>,
        best: &mut Option<(f64, DVector<f64>)>,
    ) {
        let active: Vec<_> = subset.iter().map(|&i| rows[i].clone()).collect();
        if let Some(x) = eqp(p, &active) {
            if feasible(p, &x, 1e-9) {
                let f = p.objective(&x);
                if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                    *best = Some((f, x));
                }
            }
        }
        if subset.len() == limit {
            return;
        }
        for i in start..rows.len() {
            subset.push(i);
            recurse(p, rows, i + 1, limit, subset, best);
            subset.pop();
        }
    }
    recurse(p, &rows, 0, n.saturating_sub(p.a_eq.nrows()), &mut subset, &mut best);
    best.map(|(_, x)| x)
}

/// Brute-force search over a regular grid with spacing `h` inside the box.
pub fn grid_search_2d(p: &QpProblem, h: f64) -> Option<DVector<f64>> {
    assert_eq!(p.n(), 2);
    let steps = |j: usize| ((p.ub[j] - p.lb[j]) / h).round() as usize;
    let mut best: Option<(f64, DVector<f64>)> = None;
    for i in 0..=steps(0) {
        for k in 0..=steps(1) {
            let x = DVector::from_vec(vec![p.lb[0] + i as f64 * h, p.lb[1] + k as f64 * h]);
            if !feasible(p, &x, 1e-12) {
                continue;
            }
            let f = p.objective(&x);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, x));
            }
        }
    }
    best.map(|(_, x)| x)
}

fn random_spd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = m.transpose() * &m + DMatrix::identity(n, n) * rng.random_range(0.05..1.0);
    (&h + h.transpose()) * 0.5
}

/// Random SPD cost with box bounds only.
pub fn random_box_qp<R: Rng>(rng: &mut R, n: usize) -> QpProblem {
    let h = random_spd(rng, n);
    let g = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let lb = DVector::from_fn(n, |_, _| rng.random_range(-1.5..0.0));
    let ub = DVector::from_fn(n, |i, _| lb[i] + rng.random_range(0.1..2.0));
    QpProblem::new(h, g).with_bounds(lb, ub)
}

/// Random SPD cost with bounds, general inequalities and possibly one
/// equality. Feasible unless `allow_infeasible` adds contradictory rows.
pub fn random_general_qp<R: Rng>(rng: &mut R, n: usize, m: usize, allow_infeasible: bool) -> QpProblem {
    let mut p = random_box_qp(rng, n);
    let x_f = DVector::from_fn(n, |i, _| p.lb[i] + rng.random_range(0.2..0.8) * (p.ub[i] - p.lb[i]));
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let mut b = &a * &x_f;
    for v in b.iter_mut() {
        *v += rng.random_range(0.0..0.5);
    }
    if allow_infeasible && m >= 2 && rng.random_bool(0.2) {
        // second row opposes the first with a disjoint interval
        let first = a.row(0).into_owned();
        let mut a2 = a.clone();
        a2.set_row(1, &(-first));
        let mut b2 = b.clone();
        b2[1] = -b[0] - rng.random_range(0.1..1.0);
        p = p.with_inequalities(a2, b2);
    } else {
        p = p.with_inequalities(a, b);
    }
    if n >= 2 && rng.random_bool(0.3) {
        let row = DMatrix::from_fn(1, n, |_, _| rng.random_range(-1.0..1.0));
        let rhs = &row * &x_f;
        p = p.with_equalities(row, rhs);
    }
    p
}
