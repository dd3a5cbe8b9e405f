//! Plain-text problem dump: a `qp` header line with the sizes, then each
//! matrix or vector as a name line with its dimensions followed by one line
//! per row, values separated by spaces.
//!
//! ```text
//! qp n 2 m_eq 0 m_in 1
//! H 2 2
//! 1 0
//! 0 1
//! g 2
//! 0 0
//! ...
//! ```

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::{QpError, QpProblem};

fn write_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "{name} {} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

fn write_vector(out: &mut String, name: &str, v: &DVector<f64>) {
    let _ = writeln!(out, "{name} {}", v.len());
    let row: Vec<String> = v.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(out, "{}", row.join(" "));
}

pub fn write_problem(p: &QpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "qp n {} m_eq {} m_in {}", p.n(), p.a_eq.nrows(), p.a_in.nrows());
    write_matrix(&mut out, "H", &p.h);
    write_vector(&mut out, "g", &p.g);
    write_matrix(&mut out, "A_eq", &p.a_eq);
    write_vector(&mut out, "b_eq", &p.b_eq);
    write_matrix(&mut out, "A_in", &p.a_in);
    write_vector(&mut out, "b_in", &p.b_in);
    write_vector(&mut out, "lb", &p.lb);
    write_vector(&mut out, "ub", &p.ub);
    out
}

struct Reader<'a> {
    lines: std::iter::Peekable<std::str::Lines<'a>>,
}

fn parse_err(msg: impl Into<String>) -> QpError {
    QpError::Parse(msg.into())
}

impl Reader<'_> {
    fn header(&mut self, name: &str) -> Result<Vec<usize>, QpError> {
        let line = self.lines.next().ok_or_else(|| parse_err(format!("missing {name}")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(name) {
            return Err(parse_err(format!("expected {name}, found `{line}`")));
        }
        parts.map(|t| t.parse::<usize>().map_err(|e| parse_err(format!("{name}: {e}")))).collect()
    }

    fn values(&mut self, name: &str, count: usize) -> Result<Vec<f64>, QpError> {
        let line = self.lines.next().unwrap_or("");
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| parse_err(format!("{name}: {e}"))))
            .collect::<Result<_, _>>()?;
        if vals.len() != count {
            return Err(parse_err(format!("{name}: expected {count} values, found {}", vals.len())));
        }
        Ok(vals)
    }

    fn matrix(&mut self, name: &str) -> Result<DMatrix<f64>, QpError> {
        let dims = self.header(name)?;
        let [r, c] = dims[..] else {
            return Err(parse_err(format!("{name}: expected two dimensions")));
        };
        let mut data = Vec::with_capacity(r * c);
        for _ in 0..r {
            data.extend(self.values(name, c)?);
        }
        Ok(DMatrix::from_row_slice(r, c, &data))
    }

    fn vector(&mut self, name: &str) -> Result<DVector<f64>, QpError> {
        let dims = self.header(name)?;
        let [n] = dims[..] else {
            return Err(parse_err(format!("{name}: expected one dimension")));
        };
        if n == 0 {
            // an empty vector may or may not have its (blank) value line
            if self.lines.peek().is_some_and(|l| l.trim().is_empty()) {
                self.lines.next();
            }
            return Ok(DVector::zeros(0));
        }
        Ok(DVector::from_vec(self.values(name, n)?))
    }
}

pub fn read_problem(text: &str) -> Result<QpProblem, QpError> {
    let mut r = Reader { lines: text.lines().peekable() };
    let head = r.lines.next().ok_or_else(|| parse_err("empty dump"))?;
    let tokens: Vec<&str> = head.split_whitespace().collect();
    if tokens.first() != Some(&"qp") {
        return Err(parse_err("missing `qp` header"));
    }
    let p = QpProblem {
        h: r.matrix("H")?,
        g: r.vector("g")?,
        a_eq: r.matrix("A_eq")?,
        b_eq: r.vector("b_eq")?,
        a_in: r.matrix("A_in")?,
        b_in: r.vector("b_in")?,
        lb: r.vector("lb")?,
        ub: r.vector("ub")?,
    };
    let n = p.n();
    if p.h.nrows() != n || p.a_eq.ncols() != n || p.a_in.ncols() != n {
        return Err(QpError::Dimension("dump sections disagree on n".into()));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn round_trip_is_exact() {
        let p = QpProblem::new(dmatrix![2.0, 0.1; 0.1, 1.0 / 3.0], dvector![-0.1, 1e-300])
            .with_inequalities(dmatrix![1.0, -2.5], dvector![f64::INFINITY])
            .with_bounds(dvector![f64::NEG_INFINITY, 0.0], dvector![1.0, 0.0]);
        let text = write_problem(&p);
        assert_eq!(read_problem(&text).unwrap(), p);
        assert!(text.starts_with("qp n 2 m_eq 0 m_in 1\nH 2 2\n"));
    }

    #[test]
    fn truncated_dump_is_rejected() {
        let p = QpProblem::new(dmatrix![1.0], dvector![0.0]);
        let text = write_problem(&p);
        let cut = &text[..text.len() / 2];
        assert!(matches!(read_problem(cut), Err(QpError::Parse(_))));
    }
}
