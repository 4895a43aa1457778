//! Plain-text dump of an [`SdpProblem`] for offline cross-checking.
//!
//! ```text
//! sdp <dim> <num_equalities> <num_inequalities>
//! objective
//! <dim rows of "re im re im ...">
//! equality <b>
//! <dim rows>
//! inequality <h>
//! <dim rows>
//! ```

use std::fmt::Write as _;

use num_complex::Complex64;

use super::SdpProblem;
use crate::{CMat, Error, Result};

pub fn write_dump(problem: &SdpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "sdp {} {} {}",
        problem.dim,
        problem.equalities.len(),
        problem.inequalities.len()
    );
    out.push_str("objective\n");
    write_matrix(&mut out, &problem.objective);
    for (a, b) in &problem.equalities {
        let _ = writeln!(out, "equality {b:e}");
        write_matrix(&mut out, a);
    }
    for (g, h) in &problem.inequalities {
        let _ = writeln!(out, "inequality {h:e}");
        write_matrix(&mut out, g);
    }
    out
}

fn write_matrix(out: &mut String, m: &CMat) {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:e} {:e}", m[(i, j)].re, m[(i, j)].im))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

pub fn parse_dump(text: &str) -> Result<SdpProblem> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let bad = |line: usize, msg: &str| Error::Contract(format!("sdp dump line {}: {msg}", line + 1));

    let (ln, header) = lines.next().ok_or_else(|| bad(0, "empty input"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "sdp" {
        return Err(bad(ln, "expected 'sdp <dim> <neq> <nineq>'"));
    }
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| bad(ln, "bad count"));
    let (dim, neq, nin) = (parse_usize(fields[1])?, parse_usize(fields[2])?, parse_usize(fields[3])?);

    let read_matrix = |lines: &mut dyn Iterator<Item = (usize, &str)>| -> Result<CMat> {
        let mut m = CMat::zeros(dim, dim);
        for i in 0..dim {
            let (ln, row) = lines.next().ok_or_else(|| bad(usize::MAX - 1, "truncated matrix"))?;
            let vals: Vec<f64> = row
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| bad(ln, "bad number")))
                .collect::<Result<_>>()?;
            if vals.len() != 2 * dim {
                return Err(bad(ln, "wrong row length"));
            }
            for j in 0..dim {
                m[(i, j)] = Complex64::new(vals[2 * j], vals[2 * j + 1]);
            }
        }
        Ok(m)
    };
    let expect_tag = |lines: &mut dyn Iterator<Item = (usize, &str)>, tag: &str| -> Result<Option<f64>> {
        let (ln, l) = lines.next().ok_or_else(|| bad(usize::MAX - 1, "truncated dump"))?;
        let mut it = l.split_whitespace();
        if it.next() != Some(tag) {
            return Err(bad(ln, &format!("expected '{tag}'")));
        }
        it.next()
            .map(|s| s.parse::<f64>().map_err(|_| bad(ln, "bad right-hand side")))
            .transpose()
    };

    expect_tag(&mut lines, "objective")?;
    let mut problem = SdpProblem::new(dim).with_objective(read_matrix(&mut lines)?);
    for _ in 0..neq {
        let b = expect_tag(&mut lines, "equality")?.ok_or_else(|| bad(0, "missing rhs"))?;
        problem.add_equality(read_matrix(&mut lines)?, b);
    }
    for _ in 0..nin {
        let h = expect_tag(&mut lines, "inequality")?.ok_or_else(|| bad(0, "missing rhs"))?;
        problem.add_inequality(read_matrix(&mut lines)?, h);
    }
    Ok(problem)
}
