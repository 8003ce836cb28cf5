//! LP text emission and the adapter solution format.

use std::fmt::Write as _;

use super::{BipModel, LinearExpr, ModelError, Relation, Sense, VarAssignment, VarTag};

const TERMS_PER_LINE: usize = 8;
const TOLERANCE: f64 = 1e-6;

fn write_terms(out: &mut String, model: &BipModel, terms: &[(i64, usize)]) {
    if terms.is_empty() {
        // a linear form needs at least one variable
        if let Some(v) = model.vars.first() {
            let _ = write!(out, " 0 {}", v.name);
        }
        return;
    }
    for (i, &(coef, var)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let name = &model.vars[var].name;
        let sign = if coef < 0 { "-" } else { "+" };
        let magnitude = coef.unsigned_abs();
        if i == 0 && coef >= 0 {
            out.push(' ');
        } else {
            let _ = write!(out, " {sign} ");
        }
        if magnitude == 1 {
            out.push_str(name);
        } else {
            let _ = write!(out, "{magnitude} {name}");
        }
    }
}

/// Emits one objective of the stack and every constraint. The objective
/// constant is not part of the LP; it is recorded in a comment line.
pub fn write_lp(model: &BipModel, objective_index: usize) -> Result<String, ModelError> {
    let objective = model
        .objectives
        .get(objective_index)
        .ok_or(ModelError::BadObjective(objective_index))?;
    let mut out = String::new();
    let _ = writeln!(out, "\\ model {} objective {}", model.name, objective.label);
    if objective.expr.constant != 0 {
        let _ = writeln!(out, "\\ objective constant {}", objective.expr.constant);
    }
    out.push_str(match objective.sense {
        Sense::Maximize => "Maximize\n",
        Sense::Minimize => "Minimize\n",
    });
    out.push_str(" obj:");
    write_terms(&mut out, model, &objective.expr.terms);
    out.push_str("\nSubject To\n");
    for (i, c) in model.constraints.iter().enumerate() {
        let _ = write!(out, " c{i}:");
        write_terms(&mut out, model, &c.terms);
        let _ = writeln!(out, " {} {}", c.relation, c.rhs);
    }
    out.push_str("Binary\n");
    for v in &model.vars {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("End\n");
    Ok(out)
}

#[derive(Debug, PartialEq)]
enum Token {
    Label(String),
    Name(String),
    Number(f64),
    Sign(i64),
    Rel(Relation),
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Token>, ModelError> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let mut rest = word;
        while !rest.is_empty() {
            let (token, used) = if let Some(r) = ["<=", "=<", ">=", "=>", "<", ">", "="]
                .iter()
                .find(|op| rest.starts_with(**op))
            {
                let rel = match *r {
                    "<=" | "=<" | "<" => Relation::Le,
                    ">=" | "=>" | ">" => Relation::Ge,
                    _ => Relation::Eq,
                };
                (Token::Rel(rel), r.len())
            } else if rest.starts_with('+') || rest.starts_with('-') {
                (Token::Sign(if rest.starts_with('-') { -1 } else { 1 }), 1)
            } else {
                let end = rest
                    .find(['+', '-', '<', '>', '=', ':'])
                    .map(|i| {
                        // keep exponents such as 1e-6 together
                        if i > 0 && rest.as_bytes()[i - 1].eq_ignore_ascii_case(&b'e') && rest[..i - 1].parse::<f64>().is_ok() {
                            rest[i + 1..]
                                .find(|c: char| !c.is_ascii_digit())
                                .map_or(rest.len(), |j| i + 1 + j)
                        } else {
                            i
                        }
                    })
                    .unwrap_or(rest.len());
                let piece = &rest[..end];
                if rest[end..].starts_with(':') {
                    (Token::Label(piece.to_string()), end + 1)
                } else if let Ok(x) = piece.parse::<f64>() {
                    (Token::Number(x), end)
                } else if piece.is_empty() {
                    return Err(ModelError::Parse {
                        line,
                        message: format!("unexpected token in {word:?}"),
                    });
                } else {
                    (Token::Name(piece.to_string()), end)
                }
            };
            tokens.push(token);
            rest = &rest[used..];
        }
    }
    Ok(tokens)
}

fn integral(x: f64, line: usize) -> Result<i64, ModelError> {
    if (x - x.round()).abs() > TOLERANCE {
        return Err(ModelError::Parse {
            line,
            message: format!("non-integral coefficient {x}"),
        });
    }
    Ok(x.round() as i64)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Binary,
    Done,
}

/// Reads the subset of the LP format that [`write_lp`] emits. Variables
/// get [`VarTag::Free`] and are created in order of first appearance.
pub fn read_lp(text: &str) -> Result<BipModel, ModelError> {
    let mut model = BipModel::new("lp");
    let mut section = Section::Preamble;
    let mut sense = Sense::Minimize;
    let mut objective_constant = 0i64;
    let mut objective_tokens = Vec::new();
    let mut constraint_tokens = Vec::new();
    let mut binaries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if let Some(comment) = trimmed.strip_prefix('\\') {
            if let Some(k) = comment.trim().strip_prefix("objective constant ") {
                objective_constant = k.trim().parse().map_err(|_| ModelError::Parse {
                    line,
                    message: "bad objective constant".into(),
                })?;
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        match trimmed.to_ascii_lowercase().as_str() {
            "maximize" | "maximise" | "max" => {
                sense = Sense::Maximize;
                section = Section::Objective;
                continue;
            }
            "minimize" | "minimise" | "min" => {
                sense = Sense::Minimize;
                section = Section::Objective;
                continue;
            }
            "subject to" | "st" | "s.t." => {
                section = Section::Constraints;
                continue;
            }
            "binary" | "binaries" | "bin" => {
                section = Section::Binary;
                continue;
            }
            "end" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Objective => objective_tokens.extend(tokenize(trimmed, line)?.into_iter().map(|t| (t, line))),
            Section::Constraints => constraint_tokens.extend(tokenize(trimmed, line)?.into_iter().map(|t| (t, line))),
            Section::Binary => binaries.extend(trimmed.split_whitespace().map(str::to_string)),
            Section::Preamble | Section::Done => {
                return Err(ModelError::Parse {
                    line,
                    message: format!("unexpected text {trimmed:?}"),
                })
            }
        }
    }
    for name in &binaries {
        if model.var_index(name).is_none() {
            model.add_var(name.clone(), VarTag::Free)?;
        }
    }
    let mut pos = 0;
    let objective_terms = parse_terms(&mut model, &objective_tokens, &mut pos, true)?;
    model.add_objective(
        sense,
        LinearExpr {
            terms: objective_terms,
            constant: objective_constant,
        },
        "obj",
    )?;
    let mut pos = 0;
    let mut counter = 0;
    while pos < constraint_tokens.len() {
        let label = match &constraint_tokens[pos].0 {
            Token::Label(l) => {
                pos += 1;
                l.clone()
            }
            _ => format!("r{counter}"),
        };
        counter += 1;
        let terms = parse_terms(&mut model, &constraint_tokens, &mut pos, false)?;
        let line = constraint_tokens.get(pos).map_or(0, |t| t.1);
        let Some((Token::Rel(relation), _)) = constraint_tokens.get(pos) else {
            return Err(ModelError::Parse {
                line,
                message: "missing relation".into(),
            });
        };
        let relation = *relation;
        pos += 1;
        let mut sign = 1;
        if let Some((Token::Sign(s), _)) = constraint_tokens.get(pos) {
            sign = *s;
            pos += 1;
        }
        let Some((Token::Number(rhs), _)) = constraint_tokens.get(pos) else {
            return Err(ModelError::Parse {
                line,
                message: "missing right-hand side".into(),
            });
        };
        let rhs = sign * integral(*rhs, line)?;
        pos += 1;
        model.add_constraint(terms, relation, rhs, label)?;
    }
    Ok(model)
}

fn parse_terms(
    model: &mut BipModel,
    tokens: &[(Token, usize)],
    pos: &mut usize,
    objective: bool,
) -> Result<Vec<(i64, usize)>, ModelError> {
    let mut terms = Vec::new();
    if objective {
        if let Some((Token::Label(_), _)) = tokens.get(*pos) {
            *pos += 1;
        }
    }
    let mut sign = 1i64;
    let mut coef: Option<i64> = None;
    while let Some((token, line)) = tokens.get(*pos) {
        match token {
            Token::Sign(s) => sign *= s,
            Token::Number(x) => coef = Some(coef.unwrap_or(1) * integral(*x, *line)?),
            Token::Name(name) => {
                let var = match model.var_index(name) {
                    Some(v) => v,
                    None => model.add_var(name.clone(), VarTag::Free)?,
                };
                let a = sign * coef.unwrap_or(1);
                if a != 0 {
                    terms.push((a, var));
                }
                sign = 1;
                coef = None;
            }
            Token::Rel(_) | Token::Label(_) => break,
        }
        *pos += 1;
    }
    Ok(terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionStatus {
    Optimal,
    Infeasible,
    TimeLimit,
}

impl SolutionStatus {
    fn keyword(self) -> &'static str {
        match self {
            SolutionStatus::Optimal => "optimal",
            SolutionStatus::Infeasible => "infeasible",
            SolutionStatus::TimeLimit => "timelimit",
        }
    }
}

/// Status from the first non-comment line, `STATUS optimal|infeasible|timelimit`.
pub fn parse_status(text: &str) -> Result<SolutionStatus, ModelError> {
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut words = trimmed.split_whitespace();
        let status = match (words.next(), words.next(), words.next()) {
            (Some("STATUS"), Some(s), None) => match s.to_ascii_lowercase().as_str() {
                "optimal" => Some(SolutionStatus::Optimal),
                "infeasible" => Some(SolutionStatus::Infeasible),
                "timelimit" => Some(SolutionStatus::TimeLimit),
                _ => None,
            },
            _ => None,
        };
        return status.ok_or(ModelError::Parse {
            line: i + 1,
            message: format!("expected a status line, found {trimmed:?}"),
        });
    }
    Err(ModelError::Parse {
        line: 0,
        message: "empty solution".into(),
    })
}

/// Reads `name value` lines; unmentioned variables are 0.
pub fn parse_solution(text: &str, model: &BipModel) -> Result<VarAssignment, ModelError> {
    let mut values = VarAssignment::zeros(model.num_vars());
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with("STATUS") {
            continue;
        }
        let mut words = trimmed.split_whitespace();
        let (Some(name), Some(value), None) = (words.next(), words.next(), words.next()) else {
            return Err(ModelError::Parse {
                line: i + 1,
                message: format!("expected `name value`, found {trimmed:?}"),
            });
        };
        let index = model
            .var_index(name)
            .ok_or_else(|| ModelError::UnknownVariable(name.to_string()))?;
        let x: f64 = value.parse().map_err(|_| ModelError::Parse {
            line: i + 1,
            message: format!("bad number {value:?}"),
        })?;
        let bit = if x.abs() <= TOLERANCE {
            false
        } else if (x - 1.0).abs() <= TOLERANCE {
            true
        } else {
            return Err(ModelError::NonIntegral {
                name: name.to_string(),
                value: value.to_string(),
            });
        };
        values.set(index, bit);
    }
    Ok(values)
}

/// Writes a solution file in the adapter format, listing every variable.
pub fn render_solution(status: SolutionStatus, model: &BipModel, values: Option<&VarAssignment>) -> String {
    let mut out = format!("STATUS {}\n", status.keyword());
    if let Some(values) = values {
        for v in &model.vars {
            let _ = writeln!(out, "{} {}", v.name, u8::from(values.get(v.index)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BipModel {
        let mut m = BipModel::new("small");
        let x1 = m.add_var("x1", VarTag::Free).unwrap();
        let x2 = m.add_var("x2", VarTag::Free).unwrap();
        m.add_constraint(vec![(1, x1), (1, x2)], Relation::Le, 1, "pair").unwrap();
        m.add_constraint(vec![(2, x1), (-1, x2)], Relation::Ge, -1, "other").unwrap();
        let mut e = LinearExpr::new();
        e.add(1, x1).add(3, x2);
        e.constant = 4;
        m.add_objective(Sense::Maximize, e, "o").unwrap();
        m
    }

    #[test]
    fn empty_model_text() {
        let mut m = BipModel::new("empty");
        m.add_var("x", VarTag::Free).unwrap();
        m.add_objective(Sense::Maximize, LinearExpr::new(), "zero").unwrap();
        let text = write_lp(&m, 0).unwrap();
        assert_eq!(
            text,
            "\\ model empty objective zero\nMaximize\n obj: 0 x\nSubject To\nBinary\n x\nEnd\n"
        );
    }

    #[test]
    fn constraint_line() {
        let text = write_lp(&small(), 0).unwrap();
        assert!(text.contains(" c0: x1 + x2 <= 1\n"));
        assert!(text.contains(" c1: 2 x1 - x2 >= -1\n"));
        assert!(text.contains("\\ objective constant 4\n"));
        assert_eq!(write_lp(&small(), 1), Err(ModelError::BadObjective(1)));
    }

    #[test]
    fn read_back() {
        let m = small();
        let text = write_lp(&m, 0).unwrap();
        let back = read_lp(&text).unwrap();
        assert_eq!(back.vars.len(), 2);
        assert_eq!(back.objectives[0].expr, m.objectives[0].expr);
        assert_eq!(back.objectives[0].sense, Sense::Maximize);
        for (a, b) in back.constraints.iter().zip(&m.constraints) {
            assert_eq!((&a.terms, a.relation, a.rhs), (&b.terms, b.relation, b.rhs));
        }
        assert_eq!(write_lp(&back, 0).unwrap().lines().skip(1).collect::<Vec<_>>(), text.lines().skip(1).collect::<Vec<_>>());
    }

    #[test]
    fn long_rows_wrap_and_parse() {
        let mut m = BipModel::new("wide");
        let vars: Vec<usize> = (0..20).map(|i| m.add_var(format!("v{i}"), VarTag::Free).unwrap()).collect();
        m.add_constraint(vars.iter().map(|&v| (-1, v)).collect(), Relation::Ge, -3, "w").unwrap();
        m.add_objective(Sense::Minimize, LinearExpr::new(), "o").unwrap();
        let text = write_lp(&m, 0).unwrap();
        assert!(text.lines().all(|l| l.len() < 255));
        let back = read_lp(&text).unwrap();
        assert_eq!(back.constraints[0].terms.len(), 20);
        assert_eq!(back.constraints[0].rhs, -3);
    }

    #[test]
    fn solution_parsing() {
        let m = small();
        let v = parse_solution("# comment\nSTATUS optimal\nx1 1.0\n", &m).unwrap();
        assert!(v.get(0) && !v.get(1));
        assert!(matches!(
            parse_solution("x2 0.49999", &m),
            Err(ModelError::NonIntegral { .. })
        ));
        assert_eq!(
            parse_solution("y 1", &m),
            Err(ModelError::UnknownVariable("y".into()))
        );
        assert!(parse_solution("x1 0.9999999\nx2 -0.0000001", &m).unwrap().get(0));
    }

    #[test]
    fn status_and_render() {
        let m = small();
        let mut v = VarAssignment::zeros(2);
        v.set(1, true);
        let text = render_solution(SolutionStatus::Optimal, &m, Some(&v));
        assert_eq!(text, "STATUS optimal\nx1 0\nx2 1\n");
        assert_eq!(parse_status(&text), Ok(SolutionStatus::Optimal));
        assert_eq!(parse_solution(&text, &m).unwrap(), v);
        assert_eq!(parse_status("# x\nSTATUS timelimit\n"), Ok(SolutionStatus::TimeLimit));
        assert!(parse_status("x1 1\n").is_err());
    }
}
