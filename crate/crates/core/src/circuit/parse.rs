use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{Circuit, Gate, Op, WireId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("undefined wire {0}")]
    UndefinedWire(WireId),
    #[error("wire {0} defined more than once")]
    DuplicateWire(WireId),
    #[error("wire {0} used before the gate that defines it")]
    NonTopological(WireId),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}, column {col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

struct Token<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let body = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in body.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &body[s..i],
                    col: s + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &body[s..],
            col: s + 1,
        });
    }
    out
}

enum Line<'a> {
    Header([usize; 3]),
    Gate {
        id: (WireId, usize),
        op: &'a str,
        op_col: usize,
        inputs: Vec<(WireId, usize)>,
    },
    OutEvl(Vec<(WireId, usize)>),
    OutGen(Vec<(WireId, usize)>),
    Save(Vec<(WireId, usize)>),
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        line,
        col,
        kind: ParseErrorKind::Syntax(msg.into()),
    }
}

fn number(line: usize, tok: &Token<'_>) -> Result<u64, ParseError> {
    tok.text
        .parse::<u64>()
        .map_err(|_| syntax(line, tok.col, format!("expected a number, found `{}`", tok.text)))
}

fn wire(line: usize, tok: &Token<'_>) -> Result<(WireId, usize), ParseError> {
    let n = number(line, tok)?;
    let id = WireId::try_from(n).map_err(|_| syntax(line, tok.col, "wire id too large"))?;
    Ok((id, tok.col))
}

fn parse_line<'a>(lineno: usize, toks: &[Token<'a>]) -> Result<Line<'a>, ParseError> {
    let head = &toks[0];
    match head.text {
        "inputs" => {
            if toks.len() != 7 {
                return Err(syntax(
                    lineno,
                    head.col,
                    "expected `inputs gen <n> evl <m> partial <p>`",
                ));
            }
            let mut counts = [0usize; 3];
            for (k, name) in ["gen", "evl", "partial"].iter().enumerate() {
                let kw = &toks[1 + 2 * k];
                if kw.text != *name {
                    return Err(syntax(lineno, kw.col, format!("expected `{name}`")));
                }
                counts[k] = number(lineno, &toks[2 + 2 * k])? as usize;
            }
            Ok(Line::Header(counts))
        }
        "gate" => {
            if toks.len() < 4 {
                return Err(syntax(lineno, head.col, "expected `gate <id> <OP> <inputs>`"));
            }
            let id = wire(lineno, &toks[1])?;
            let op = toks[2].text;
            let arity = match op {
                "AND" | "XOR" | "OR" => 2,
                "NOT" => 1,
                other => return Err(syntax(lineno, toks[2].col, format!("unknown gate type `{other}`"))),
            };
            if toks.len() != 3 + arity {
                return Err(syntax(lineno, toks[2].col, format!("{op} takes {arity} input(s)")));
            }
            let inputs = toks[3..]
                .iter()
                .map(|t| wire(lineno, t))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Line::Gate {
                id,
                op,
                op_col: toks[2].col,
                inputs,
            })
        }
        "out" => {
            let Some(who) = toks.get(1) else {
                return Err(syntax(lineno, head.col, "expected `out evl|gen <ids>`"));
            };
            let ids = toks[2..]
                .iter()
                .map(|t| wire(lineno, t))
                .collect::<Result<Vec<_>, _>>()?;
            match who.text {
                "evl" => Ok(Line::OutEvl(ids)),
                "gen" => Ok(Line::OutGen(ids)),
                other => Err(syntax(lineno, who.col, format!("unknown party `{other}`"))),
            }
        }
        "save" => {
            let ids = toks[1..]
                .iter()
                .map(|t| wire(lineno, t))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Line::Save(ids))
        }
        other => Err(syntax(lineno, head.col, format!("unknown directive `{other}`"))),
    }
}

/// Parses the line-oriented circuit format. OR gates are lowered to
/// `XOR(XOR(a, b), AND(a, b))` and gate ids are renumbered densely.
pub fn parse_circuit(text: &str) -> Result<Circuit, ParseError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let toks = tokenize(raw);
        if toks.is_empty() {
            continue;
        }
        lines.push((i + 1, parse_line(i + 1, &toks)?));
    }
    let Some((_, Line::Header(counts))) = lines.first() else {
        let (line, col) = lines.first().map(|(l, _)| (*l, 1)).unwrap_or((1, 1));
        return Err(syntax(line, col, "circuit must start with an `inputs` line"));
    };
    let [gen, evl, partial] = *counts;
    let n_inputs = gen + evl + partial;

    // First pass: every wire the file defines, for precise error kinds.
    let mut defined_at: HashMap<WireId, usize> = HashMap::new();
    for (lineno, l) in &lines[1..] {
        match l {
            Line::Header(_) => return Err(syntax(*lineno, 1, "duplicate `inputs` line")),
            Line::Gate { id: (id, col), .. } => {
                if (*id as usize) < n_inputs || defined_at.contains_key(id) {
                    return Err(ParseError {
                        line: *lineno,
                        col: *col,
                        kind: ParseErrorKind::DuplicateWire(*id),
                    });
                }
                defined_at.insert(*id, *lineno);
            }
            _ => {}
        }
    }

    let mut circuit = Circuit {
        gen_inputs: gen,
        evl_inputs: evl,
        partial_inputs: partial,
        ..Default::default()
    };
    let mut map: HashMap<WireId, WireId> = (0..n_inputs as WireId).map(|w| (w, w)).collect();
    let resolve = |map: &HashMap<WireId, WireId>, lineno: usize, (w, col): (WireId, usize)| {
        map.get(&w).copied().ok_or(ParseError {
            line: lineno,
            col,
            kind: if defined_at.contains_key(&w) {
                ParseErrorKind::NonTopological(w)
            } else {
                ParseErrorKind::UndefinedWire(w)
            },
        })
    };

    let mut pending_outputs = Vec::new();
    for (lineno, l) in &lines[1..] {
        match l {
            Line::Gate { id, op, op_col, inputs } => {
                let ins = inputs
                    .iter()
                    .map(|&t| resolve(&map, *lineno, t))
                    .collect::<Result<Vec<_>, _>>()?;
                let push = |c: &mut Circuit, op: Op, a: WireId, b: WireId| {
                    let gid = c.wire_count() as WireId;
                    c.gates.push(Gate {
                        id: gid,
                        op,
                        inputs: [a, b],
                    });
                    gid
                };
                let out = match *op {
                    "AND" => push(&mut circuit, Op::And, ins[0], ins[1]),
                    "XOR" => push(&mut circuit, Op::Xor, ins[0], ins[1]),
                    "NOT" => push(&mut circuit, Op::Not, ins[0], 0),
                    "OR" => {
                        let x = push(&mut circuit, Op::Xor, ins[0], ins[1]);
                        let y = push(&mut circuit, Op::And, ins[0], ins[1]);
                        push(&mut circuit, Op::Xor, x, y)
                    }
                    _ => return Err(syntax(*lineno, *op_col, "unknown gate type")),
                };
                map.insert(id.0, out);
            }
            Line::OutEvl(_) | Line::OutGen(_) | Line::Save(_) => pending_outputs.push((*lineno, l)),
            Line::Header(_) => unreachable!(),
        }
    }
    for (lineno, l) in pending_outputs {
        let (target, ids) = match l {
            Line::OutEvl(ids) => (&mut circuit.evl_outputs, ids),
            Line::OutGen(ids) => (&mut circuit.gen_outputs, ids),
            Line::Save(ids) => (&mut circuit.saved_wires, ids),
            _ => unreachable!(),
        };
        for &t in ids {
            let w = map.get(&t.0).copied().ok_or(ParseError {
                line: lineno,
                col: t.1,
                kind: ParseErrorKind::UndefinedWire(t.0),
            })?;
            target.push(w);
        }
    }
    debug_assert!(circuit.validate().is_ok());
    Ok(circuit)
}

/// Canonical text form. `parse_circuit(&emit_circuit(c)) == c` for valid `c`.
pub fn emit_circuit(c: &Circuit) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "inputs gen {} evl {} partial {}",
        c.gen_inputs, c.evl_inputs, c.partial_inputs
    );
    for g in &c.gates {
        let _ = write!(s, "gate {} {}", g.id, g.op.name());
        for w in g.inputs() {
            let _ = write!(s, " {w}");
        }
        s.push('\n');
    }
    for (prefix, list) in [
        ("out evl", &c.evl_outputs),
        ("out gen", &c.gen_outputs),
        ("save", &c.saved_wires),
    ] {
        s.push_str(prefix);
        for w in list {
            let _ = write!(s, " {w}");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_circuit() {
        let c = parse_circuit("inputs gen 1 evl 1 partial 0\ngate 2 AND 0 1\nout evl 2\n").unwrap();
        assert_eq!(c.gates.len(), 1);
        assert_eq!(c.evl_outputs, vec![2]);
        assert!(c.gen_outputs.is_empty());
    }

    #[test]
    fn undefined_wire_has_position() {
        let err = parse_circuit("inputs gen 1 evl 1 partial 0\ngate 2 AND 0 5\nout evl 2\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UndefinedWire(5));
        assert_eq!((err.line, err.col), (2, 14));
    }

    #[test]
    fn forward_reference_is_non_topological() {
        let err = parse_circuit("inputs gen 1 evl 1 partial 0\ngate 2 AND 0 3\ngate 3 XOR 0 1\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NonTopological(3));
    }

    #[test]
    fn duplicate_definition() {
        let err = parse_circuit("inputs gen 1 evl 1 partial 0\ngate 2 AND 0 1\ngate 2 XOR 0 1\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::DuplicateWire(2));
        let err = parse_circuit("inputs gen 1 evl 1 partial 0\ngate 1 AND 0 1\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::DuplicateWire(1));
    }

    #[test]
    fn or_is_lowered_and_ids_renumbered() {
        let c = parse_circuit(
            "# comment\ninputs gen 1 evl 1 partial 0\ngate 10 OR 0 1 # trailing\ngate 11 NOT 10\nout gen 11\n",
        )
        .unwrap();
        assert_eq!(c.gates.len(), 4);
        assert_eq!(c.gen_outputs, vec![5]);
        assert_eq!(c.and_count(), 1);
    }

    #[test]
    fn syntax_errors() {
        assert!(parse_circuit("gate 2 AND 0 1\n").is_err());
        let err = parse_circuit("inputs gen 1 evl 1 partial 0\ngate 2 NAND 0 1\n").unwrap_err();
        assert_eq!((err.line, err.col), (2, 8));
        assert!(parse_circuit("inputs gen 1 evl 1 partial 0\ngate 2 NOT 0 1\n").is_err());
        assert!(parse_circuit("inputs gen x evl 1 partial 0\n").is_err());
    }

    #[test]
    fn emit_round_trip() {
        let text = "inputs gen 2 evl 1 partial 1\ngate 4 XOR 0 1\ngate 5 NOT 4\ngate 6 AND 5 3\nout evl 6\nout gen 4 2\nsave 6 3\n";
        let c = parse_circuit(text).unwrap();
        assert_eq!(emit_circuit(&c), text);
        assert_eq!(parse_circuit(&emit_circuit(&c)).unwrap(), c);
    }
}
