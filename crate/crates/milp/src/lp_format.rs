//! CPLEX LP text format writer. Output is a pure function of the model.

use std::fmt::Write;

use crate::problem::{LinearProgram, Sense, VarKind};
use crate::scalar::LpScalar;

const LINE_WIDTH: usize = 200;

fn number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn push_terms(out: &mut String, lead: &str, terms: &[(String, f64)]) {
    let mut line = String::from(lead);
    if terms.is_empty() {
        line.push_str(" 0");
    }
    for (i, (name, coef)) in terms.iter().enumerate() {
        let sign = if *coef < 0.0 { "-" } else { "+" };
        let mag = number(coef.abs());
        let piece = if i == 0 && sign == "+" {
            format!(" {mag} {name}")
        } else {
            format!(" {sign} {mag} {name}")
        };
        if line.len() + piece.len() > LINE_WIDTH {
            out.push_str(&line);
            out.push('\n');
            line = String::from("  ");
        }
        line.push_str(&piece);
    }
    out.push_str(&line);
}

pub fn write_lp<T: LpScalar>(lp: &LinearProgram<T>, title: &str) -> String {
    let mut out = String::new();
    for line in title.lines() {
        let _ = writeln!(out, "\\ {line}");
    }
    out.push_str("Minimize\n");
    let objective: Vec<(String, f64)> = lp
        .vars
        .iter()
        .filter(|v| !v.cost.is_zero())
        .map(|v| (v.name.clone(), v.cost.to_f64()))
        .collect();
    push_terms(&mut out, " obj:", &objective);
    out.push_str("\nSubject To\n");
    for row in &lp.rows {
        let terms: Vec<(String, f64)> = row
            .terms
            .iter()
            .map(|(v, a)| (lp.vars[v.0].name.clone(), a.to_f64()))
            .collect();
        push_terms(&mut out, &format!(" {}:", row.name), &terms);
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", number(row.rhs.to_f64()));
    }
    out.push_str("Bounds\n");
    for v in lp.vars.iter().filter(|v| !v.is_binary()) {
        match &v.upper {
            Some(u) if *u == v.lower => {
                let _ = writeln!(out, " {} = {}", v.name, number(u.to_f64()));
            }
            Some(u) => {
                let _ = writeln!(
                    out,
                    " {} <= {} <= {}",
                    number(v.lower.to_f64()),
                    v.name,
                    number(u.to_f64())
                );
            }
            None => {
                let _ = writeln!(out, " {} >= {}", v.name, number(v.lower.to_f64()));
            }
        }
    }
    let general: Vec<&str> = lp
        .vars
        .iter()
        .filter(|v| v.kind == VarKind::Integer && !v.is_binary())
        .map(|v| v.name.as_str())
        .collect();
    if !general.is_empty() {
        out.push_str("General\n");
        write_names(&mut out, &general);
    }
    let binary: Vec<&str> = lp
        .vars
        .iter()
        .filter(|v| v.is_binary())
        .map(|v| v.name.as_str())
        .collect();
    if !binary.is_empty() {
        out.push_str("Binary\n");
        write_names(&mut out, &binary);
    }
    out.push_str("End\n");
    out
}

fn write_names(out: &mut String, names: &[&str]) {
    let mut line = String::new();
    for name in names {
        if line.len() + name.len() + 1 > LINE_WIDTH {
            out.push_str(&line);
            out.push('\n');
            line.clear();
        }
        line.push(' ');
        line.push_str(name);
    }
    out.push_str(&line);
    out.push('\n');
}
