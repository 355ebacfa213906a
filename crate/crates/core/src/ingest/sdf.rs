//! Minimal MDL SDF (V2000) reader and writer.
//!
//! Only atoms, coordinates and `> <name>` data items are kept. Bond blocks are
//! skipped; property lines other than `M  END` are ignored.

use std::fmt::Write as _;

use super::molecule::{Atom, Molecule};
use crate::{Error, Result};

const RECORD_END: &str = "$$$$";

struct Cursor<'a> {
    lines: Vec<&'a str>,
    pos: usize,
    /// 1-based line number of `lines[0]` in the original text.
    first_line: usize,
    record: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Sdf {
            record: self.record,
            line: self.first_line + offset,
            message: message.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.lines.get(self.pos) {
            Some(line) => {
                self.pos += 1;
                Ok((self.pos - 1, line))
            }
            None => Err(self.err(self.pos, format!("truncated record: expected {what}"))),
        }
    }
}

/// Parse one or more concatenated SDF records.
pub fn parse_sdf(text: &str) -> Result<Vec<Molecule>> {
    let mut molecules = Vec::new();
    let mut block: Vec<&str> = Vec::new();
    let mut block_start = 1;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim_end() == RECORD_END {
            let record = molecules.len() + 1;
            molecules.push(parse_record(std::mem::take(&mut block), block_start, record)?);
            block_start = idx + 2;
        } else {
            block.push(line);
        }
    }
    if block.iter().any(|l| !l.trim().is_empty()) {
        let record = molecules.len() + 1;
        molecules.push(parse_record(block, block_start, record)?);
    }
    Ok(molecules)
}

fn parse_record(lines: Vec<&str>, first_line: usize, record: usize) -> Result<Molecule> {
    let mut cur = Cursor {
        lines,
        pos: 0,
        first_line,
        record,
    };
    let (_, name) = cur.next("header name line")?;
    cur.next("header program line")?;
    cur.next("header comment line")?;
    let (counts_at, counts) = cur.next("counts line")?;
    if counts.contains("V3000") {
        return Err(cur.err(counts_at, "V3000 molfiles are not supported"));
    }
    let n_atoms = fixed_usize(counts, 0..3).ok_or_else(|| cur.err(counts_at, "malformed counts line"))?;
    let n_bonds = fixed_usize(counts, 3..6).ok_or_else(|| cur.err(counts_at, "malformed counts line"))?;

    let mut atoms = Vec::with_capacity(n_atoms);
    for i in 0..n_atoms {
        let (at, line) = cur.next(&format!("atom line {} of {n_atoms}", i + 1))?;
        let (symbol, position) = parse_atom_line(line)
            .ok_or_else(|| cur.err(at, format!("expected atom line {} of {n_atoms}", i + 1)))?;
        let atom = Atom::new(symbol, position).map_err(|e| match e {
            Error::UnknownElement(sym) => cur.err(at, format!("unknown element symbol `{sym}`")),
            other => cur.err(at, other.to_string()),
        })?;
        atoms.push(atom);
    }
    for i in 0..n_bonds {
        let (at, line) = cur.next(&format!("bond line {} of {n_bonds}", i + 1))?;
        if fixed_usize(line, 0..3).is_none() {
            return Err(cur.err(at, format!("expected bond line {} of {n_bonds}", i + 1)));
        }
    }

    // Property block up to `M  END`, then optional data items.
    let mut properties = std::collections::BTreeMap::new();
    let mut seen_end = false;
    while cur.pos < cur.lines.len() {
        let (at, line) = cur.next("property line")?;
        if !seen_end {
            if line.starts_with("M  END") {
                seen_end = true;
            }
            continue;
        }
        if line.starts_with('>') {
            let key = match (line.find('<'), line.rfind('>')) {
                (Some(open), Some(close)) if close > open => line[open + 1..close].to_string(),
                _ => return Err(cur.err(at, "malformed data item header")),
            };
            let mut value = Vec::new();
            while let Some(next) = cur.lines.get(cur.pos) {
                cur.pos += 1;
                if next.trim().is_empty() {
                    break;
                }
                value.push(next.trim_end());
            }
            properties.insert(key, value.join("\n"));
        }
    }
    if !seen_end {
        return Err(cur.err(cur.lines.len(), "missing `M  END` line"));
    }

    let name = name.trim();
    let source_id = if name.is_empty() {
        format!("record{record}")
    } else {
        name.to_string()
    };
    let mut molecule = Molecule::new(source_id, atoms).map_err(|e| cur.err(counts_at, e.to_string()))?;
    molecule.properties = properties;
    Ok(molecule)
}

fn fixed_usize(line: &str, range: std::ops::Range<usize>) -> Option<usize> {
    line.get(range)?.trim().parse().ok()
}

fn parse_atom_line(line: &str) -> Option<(&str, [f64; 3])> {
    let fixed = || -> Option<(&str, [f64; 3])> {
        let x = line.get(0..10)?.trim().parse().ok()?;
        let y = line.get(10..20)?.trim().parse().ok()?;
        let z = line.get(20..30)?.trim().parse().ok()?;
        let sym = line.get(31..34.min(line.len()))?.trim();
        (!sym.is_empty()).then_some((sym, [x, y, z]))
    };
    fixed().or_else(|| {
        let mut fields = line.split_whitespace();
        let x = fields.next()?.parse().ok()?;
        let y = fields.next()?.parse().ok()?;
        let z = fields.next()?.parse().ok()?;
        let sym = fields.next()?;
        sym.chars()
            .all(|c| c.is_ascii_alphabetic())
            .then_some((sym, [x, y, z]))
    })
}

/// Serialize molecules as V2000 records (coordinates at 4 decimals, no bonds).
pub fn write_sdf(molecules: &[Molecule]) -> String {
    let mut out = String::new();
    for m in molecules {
        let _ = writeln!(out, "{}", m.source_id);
        let _ = writeln!(out, "  affistack");
        let _ = writeln!(out);
        let _ = writeln!(out, "{:>3}{:>3}  0  0  0  0  0  0  0  0999 V2000", m.atoms().len(), 0);
        for a in m.atoms() {
            let _ = writeln!(
                out,
                "{:>10.4}{:>10.4}{:>10.4} {:<3} 0  0  0  0  0  0  0  0  0  0  0  0",
                a.position[0], a.position[1], a.position[2], a.element
            );
        }
        let _ = writeln!(out, "M  END");
        for (key, value) in &m.properties {
            let _ = writeln!(out, "> <{key}>");
            let _ = writeln!(out, "{value}");
            let _ = writeln!(out);
        }
        let _ = writeln!(out, "{RECORD_END}");
    }
    out
}
