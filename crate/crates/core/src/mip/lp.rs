use std::fmt::Write;

use super::{MipProblem, VarKind};

fn num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x == f64::INFINITY {
        "+inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x}")
    }
}

/// Render `problem` in CPLEX LP format with a zero objective.
///
/// The output is a pure function of the problem: constraint and variable
/// order are insertion order and numbers use shortest round-trip formatting.
pub fn export_lp(problem: &MipProblem) -> String {
    let mut out = String::from("Minimize\n obj: 0\nSubject To\n");
    for c in problem.constraints() {
        let _ = write!(out, " {}:", c.name);
        for (k, (v, a)) in c.terms.iter().enumerate() {
            let name = &problem.variable(*v).name;
            let sign = if *a < 0.0 { "-" } else { "+" };
            let mag = a.abs();
            if k == 0 {
                if *a < 0.0 {
                    out.push_str(" -");
                }
            } else {
                let _ = write!(out, " {sign}");
            }
            if mag == 1.0 {
                let _ = write!(out, " {name}");
            } else {
                let _ = write!(out, " {} {name}", num(mag));
            }
        }
        let _ = writeln!(out, " {} {}", c.relation, num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in problem.variables().iter().filter(|v| v.kind == VarKind::Continuous) {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else if v.lower == v.upper {
            let _ = writeln!(out, " {} = {}", v.name, num(v.lower));
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", num(v.lower), v.name, num(v.upper));
        }
    }
    out.push_str("Binary\n");
    for v in problem.variables().iter().filter(|v| v.kind == VarKind::Binary) {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::Relation;

    #[test]
    fn empty_problem_skeleton() {
        assert_eq!(
            export_lp(&MipProblem::new()),
            "Minimize\n obj: 0\nSubject To\nBounds\nBinary\nEnd\n"
        );
    }

    #[test]
    fn small_problem_text() {
        let mut p = MipProblem::new();
        let x = p.add_continuous("x", -1.0, 1.0, None).unwrap();
        let y = p.add_continuous("y", f64::NEG_INFINITY, f64::INFINITY, None).unwrap();
        let b = p.add_binary("b", None).unwrap();
        p.add_constraint("c0", [(x, 1.0), (y, -1.0)], Relation::Le, 0.5).unwrap();
        p.add_constraint("c1", [(x, -2.5), (b, 3.0)], Relation::Ge, -0.0).unwrap();
        p.add_constraint("c2", [(y, 1.0)], Relation::Eq, 2.0).unwrap();
        let expected = "Minimize\n obj: 0\nSubject To\n c0: x - y <= 0.5\n c1: - 2.5 x + 3 b >= 0\n c2: y = 2\nBounds\n -1 <= x <= 1\n y free\nBinary\n b\nEnd\n";
        assert_eq!(export_lp(&p), expected);
    }
}
