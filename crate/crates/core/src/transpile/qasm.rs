//! Parser for the small OpenQASM 2 subset the benchmarks need.
//!
//! Accepted statements: an optional `OPENQASM` header, `include`, one
//! `qreg` and one `creg`, the gates `h x y z s t rx ry rz cx`, and
//! `measure q[i] -> c[j]`. Rotation angles are parsed as arithmetic over
//! numbers and `pi` but otherwise ignored.

use crate::{Error, Result};

use super::{Gate, LogicalCircuit};

const ONE_QUBIT: &[&str] = &["h", "x", "y", "z", "s", "t"];
const ROTATIONS: &[&str] = &["rx", "ry", "rz"];

struct Statement {
    line: usize,
    text: String,
}

fn split_statements(text: &str) -> Result<Vec<Statement>> {
    let mut out = Vec::new();
    let mut buf = String::new();
    let mut start = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let code = raw.split("//").next().unwrap_or("");
        for ch in code.chars() {
            if ch == ';' {
                out.push(Statement { line: start, text: buf.trim().to_string() });
                buf.clear();
            } else {
                if buf.trim().is_empty() && !ch.is_whitespace() {
                    start = line;
                }
                buf.push(ch);
            }
        }
        buf.push(' ');
    }
    if !buf.trim().is_empty() {
        return Err(Error::Qasm { line: start, message: format!("missing `;` after `{}`", buf.trim()) });
    }
    Ok(out)
}

/// `name[index]` with both parts checked.
fn parse_indexed(s: &str) -> Option<(&str, usize)> {
    let s = s.trim();
    let open = s.find('[')?;
    let name = s[..open].trim();
    let rest = s[open + 1..].strip_suffix(']')?;
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return None;
    }
    Some((name, rest.trim().parse().ok()?))
}

struct Registers {
    qreg: Option<(String, usize)>,
    creg: Option<(String, usize)>,
}

impl Registers {
    fn qubit(&self, arg: &str, line: usize) -> Result<usize> {
        let (name, size) = self
            .qreg
            .as_ref()
            .ok_or_else(|| Error::Qasm { line, message: "gate before `qreg` declaration".into() })?;
        let (reg, idx) =
            parse_indexed(arg).ok_or_else(|| Error::Qasm { line, message: format!("expected `{name}[i]`, found `{}`", arg.trim()) })?;
        if reg != name {
            return Err(Error::Qasm { line, message: format!("unknown quantum register `{reg}`") });
        }
        if idx >= *size {
            return Err(Error::Qasm { line, message: format!("index {idx} overflows register {name}[{size}]") });
        }
        Ok(idx)
    }

    fn clbit(&self, arg: &str, line: usize) -> Result<usize> {
        let (name, size) =
            self.creg.as_ref().ok_or_else(|| Error::Qasm { line, message: "measure before `creg` declaration".into() })?;
        let (reg, idx) =
            parse_indexed(arg).ok_or_else(|| Error::Qasm { line, message: format!("expected `{name}[j]`, found `{}`", arg.trim()) })?;
        if reg != name {
            return Err(Error::Qasm { line, message: format!("unknown classical register `{reg}`") });
        }
        if idx >= *size {
            return Err(Error::Qasm { line, message: format!("index {idx} overflows register {name}[{size}]") });
        }
        Ok(idx)
    }
}

/// Recursive-descent evaluator for angle expressions.
struct Angle<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Angle<'_> {
    fn eval(text: &str) -> Option<f64> {
        let mut p = Angle { s: text.as_bytes(), pos: 0 };
        let v = p.expr()?;
        p.ws();
        (p.pos == p.s.len()).then_some(v)
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Option<f64> {
        let mut v = self.term()?;
        loop {
            if self.eat(b'+') {
                v += self.term()?;
            } else if self.eat(b'-') {
                v -= self.term()?;
            } else {
                return Some(v);
            }
        }
    }

    fn term(&mut self) -> Option<f64> {
        let mut v = self.factor()?;
        loop {
            if self.eat(b'*') {
                v *= self.factor()?;
            } else if self.eat(b'/') {
                v /= self.factor()?;
            } else {
                return Some(v);
            }
        }
    }

    fn factor(&mut self) -> Option<f64> {
        if self.eat(b'-') {
            return Some(-self.factor()?);
        }
        if self.eat(b'+') {
            return self.factor();
        }
        if self.eat(b'(') {
            let v = self.expr()?;
            return self.eat(b')').then_some(v);
        }
        self.ws();
        let rest = &self.s[self.pos..];
        if rest.starts_with(b"pi") {
            self.pos += 2;
            return Some(std::f64::consts::PI);
        }
        let mut len = rest.iter().take_while(|c| c.is_ascii_digit() || **c == b'.').count();
        if len > 0 && matches!(rest.get(len), Some(b'e' | b'E')) {
            let mut exp = len + 1;
            if matches!(rest.get(exp), Some(b'+' | b'-')) {
                exp += 1;
            }
            let digits = rest[exp.min(rest.len())..].iter().take_while(|c| c.is_ascii_digit()).count();
            if digits > 0 {
                len = exp + digits;
            }
        }
        let num = std::str::from_utf8(&rest[..len]).ok()?.parse().ok()?;
        self.pos += len;
        Some(num)
    }
}

pub fn parse_qasm(text: &str) -> Result<LogicalCircuit> {
    let mut regs = Registers { qreg: None, creg: None };
    let mut gates = Vec::new();

    for Statement { line, text } in split_statements(text)? {
        if text.is_empty() {
            continue;
        }
        let err = |message: String| Error::Qasm { line, message };
        let (head, rest) = match text.find(|c: char| c.is_whitespace() || c == '(') {
            Some(i) => (&text[..i], text[i..].trim_start()),
            None => (text.as_str(), ""),
        };
        match head {
            "OPENQASM" | "include" => {}
            "qreg" | "creg" => {
                let (name, size) = parse_indexed(rest).ok_or_else(|| err(format!("malformed `{head}` declaration")))?;
                if size == 0 {
                    return Err(err(format!("register `{name}` has size 0")));
                }
                let slot = if head == "qreg" { &mut regs.qreg } else { &mut regs.creg };
                if slot.is_some() {
                    return Err(err(format!("only one `{head}` is supported")));
                }
                *slot = Some((name.to_string(), size));
            }
            "measure" => {
                let (q, c) = rest.split_once("->").ok_or_else(|| err("expected `measure q[i] -> c[j]`".into()))?;
                let q = regs.qubit(q, line)?;
                regs.clbit(c, line)?;
                gates.push(Gate::Measure(q));
            }
            name if ONE_QUBIT.contains(&name) || ROTATIONS.contains(&name) || name == "cx" => {
                let mut args = rest;
                if ROTATIONS.contains(&name) {
                    let inner = args.strip_prefix('(').ok_or_else(|| err(format!("`{name}` needs an angle")))?;
                    let close = inner.rfind(')').ok_or_else(|| err("unbalanced parentheses".into()))?;
                    Angle::eval(&inner[..close]).ok_or_else(|| err(format!("bad angle `{}`", &inner[..close])))?;
                    args = inner[close + 1..].trim_start();
                } else if args.starts_with('(') {
                    return Err(err(format!("`{name}` takes no parameters")));
                }
                let operands: Vec<&str> = args.split(',').collect();
                if name == "cx" {
                    let [c, t] = operands[..] else {
                        return Err(err("`cx` takes two qubits".into()));
                    };
                    let (c, t) = (regs.qubit(c, line)?, regs.qubit(t, line)?);
                    if c == t {
                        return Err(err(format!("`cx` control and target are both qubit {c}")));
                    }
                    gates.push(Gate::TwoQubit { control: c, target: t });
                } else {
                    let [q] = operands[..] else {
                        return Err(err(format!("`{name}` takes one qubit")));
                    };
                    gates.push(Gate::OneQubit(regs.qubit(q, line)?));
                }
            }
            other => return Err(err(format!("unsupported statement or gate `{other}`"))),
        }
    }
    let (_, qubit_count) = regs.qreg.ok_or(Error::Qasm { line: 0, message: "no `qreg` declared".into() })?;
    LogicalCircuit::new(qubit_count, gates)
}

/// Renders a circuit in the subset grammar. One-qubit gates are written as
/// `h`; measurement of qubit `i` goes to `c[i]`.
pub fn to_qasm(c: &LogicalCircuit) -> String {
    let n = c.qubit_count();
    let mut out = format!("OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[{n}];\ncreg c[{n}];\n");
    for g in c.gates() {
        match *g {
            Gate::OneQubit(q) => out.push_str(&format!("h q[{q}];\n")),
            Gate::TwoQubit { control, target } => out.push_str(&format!("cx q[{control}],q[{target}];\n")),
            Gate::Measure(q) => out.push_str(&format!("measure q[{q}] -> c[{q}];\n")),
        }
    }
    out
}
