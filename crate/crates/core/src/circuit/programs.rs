//! Builders for the example workloads.
//!
//! Programs are named `name:p1,p2`. Multi-execution programs come in
//! families whose saved wires line up with the next program's partial
//! inputs:
//!
//! * `counter_init:n` then `counter:n` repeatedly (monolithic: `counter_full:n,steps`)
//! * `lcs_step:0,w`, `lcs_step:1,w`, ... (monolithic: `lcs_full:n,w`)
//! * `keyed_db_store:e,w` then `keyed_db_lookup:e,w` repeatedly
//! * `map_start:c,b` then any sequence of `map_set:c,b` / `map_get:c,b`

use thiserror::Error;

use super::{Bit, Builder, Circuit};
use crate::util::index_bits;

pub const DEFAULT_CELL_BITS: usize = 8;
pub const DEFAULT_LCS_WIDTH: usize = 4;
pub const DEFAULT_DB_WIDTH: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProgramError {
    #[error("unknown program `{0}`")]
    Unknown(String),
    #[error("bad parameters for `{name}`: {reason}")]
    BadParams { name: String, reason: String },
}

fn bad(name: &str, reason: impl Into<String>) -> ProgramError {
    ProgramError::BadParams {
        name: name.to_string(),
        reason: reason.into(),
    }
}

/// Parses `name:p1,p2` and builds the circuit.
pub fn build_program(spec: &str) -> Result<Circuit, ProgramError> {
    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n.trim(), p),
        None => (spec.trim(), ""),
    };
    let params: Vec<usize> = params
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| bad(name, format!("`{s}` is not a number")))
        })
        .collect::<Result<_, _>>()?;
    let get = |i: usize, default: Option<usize>| -> Result<usize, ProgramError> {
        let v = params
            .get(i)
            .copied()
            .or(default)
            .ok_or_else(|| bad(name, format!("missing parameter {}", i + 1)))?;
        Ok(v)
    };
    let positive = |v: usize, what: &str| {
        if v == 0 {
            Err(bad(name, format!("{what} must be positive")))
        } else {
            Ok(v)
        }
    };
    let c = match name {
        "millionaires" => millionaires(positive(get(0, None)?, "width")?),
        "keyed_db" => keyed_db(
            positive(get(0, None)?, "entries")?,
            positive(get(1, Some(DEFAULT_DB_WIDTH))?, "width")?,
        ),
        "keyed_db_store" => keyed_db_store(
            positive(get(0, None)?, "entries")?,
            positive(get(1, Some(DEFAULT_DB_WIDTH))?, "width")?,
        ),
        "keyed_db_lookup" => keyed_db_lookup(
            positive(get(0, None)?, "entries")?,
            positive(get(1, Some(DEFAULT_DB_WIDTH))?, "width")?,
        ),
        "counter_init" => counter_init(positive(get(0, None)?, "width")?),
        "counter" => counter(positive(get(0, None)?, "width")?),
        "counter_full" => counter_full(positive(get(0, None)?, "width")?, positive(get(1, None)?, "steps")?),
        "lcs_step" => {
            let k = get(0, None)?;
            let w = positive(get(1, Some(DEFAULT_LCS_WIDTH))?, "width")?;
            if (k + 1) >= (1usize << w.min(32)) {
                return Err(bad(name, "width too small for string length"));
            }
            lcs_step(k, w)
        }
        "lcs_full" => {
            let n = positive(get(0, None)?, "length")?;
            let w = positive(get(1, Some(DEFAULT_LCS_WIDTH))?, "width")?;
            if n >= (1usize << w.min(32)) {
                return Err(bad(name, "width too small for string length"));
            }
            lcs_full(n, w)
        }
        "map_start" => map_start(
            positive(get(0, None)?, "cells")?,
            positive(get(1, Some(DEFAULT_CELL_BITS))?, "cell bits")?,
        ),
        "map_set" => map_set(
            positive(get(0, None)?, "cells")?,
            positive(get(1, Some(DEFAULT_CELL_BITS))?, "cell bits")?,
        ),
        "map_get" => map_get(
            positive(get(0, None)?, "cells")?,
            positive(get(1, Some(DEFAULT_CELL_BITS))?, "cell bits")?,
        ),
        other => return Err(ProgramError::Unknown(other.to_string())),
    };
    Ok(c)
}

/// Both parties learn whether the generator's value exceeds the evaluator's.
pub fn millionaires(n: usize) -> Circuit {
    let mut b = Builder::new(n, n, 0);
    let x = b.gen_inputs(0, n);
    let y = b.evl_inputs(0, n);
    let gt = b.greater_than(&x, &y);
    b.output_evl(&[gt]);
    b.output_gen(&[gt]);
    b.finish()
}

fn lookup(b: &mut Builder, db: &[Bit], entries: usize, width: usize, key: &[Bit]) -> Vec<Bit> {
    let mut out = vec![Bit::Const(false); width];
    for e in 0..entries {
        let sel = b.equal_const(key, e as u64);
        let picked = b.and_vec(sel, &db[e * width..(e + 1) * width]);
        out = b.xor_vec(&out, &picked);
    }
    out
}

/// Generator holds the table, evaluator the key. Keys past the end read 0.
pub fn keyed_db(entries: usize, width: usize) -> Circuit {
    let kb = index_bits(entries);
    let mut b = Builder::new(entries * width, kb, 0);
    let db = b.gen_inputs(0, entries * width);
    let key = b.evl_inputs(0, kb);
    let out = lookup(&mut b, &db, entries, width, &key);
    b.output_evl(&out);
    b.finish()
}

/// Evaluator supplies the table and a first key; the table is saved.
pub fn keyed_db_store(entries: usize, width: usize) -> Circuit {
    let kb = index_bits(entries);
    let mut b = Builder::new(0, entries * width + kb, 0);
    let db = b.evl_inputs(0, entries * width);
    let key = b.evl_inputs(entries * width, kb);
    let out = lookup(&mut b, &db, entries, width, &key);
    b.output_evl(&out);
    b.save(&db);
    b.finish()
}

/// Lookup against a previously saved table.
pub fn keyed_db_lookup(entries: usize, width: usize) -> Circuit {
    let kb = index_bits(entries);
    let mut b = Builder::new(0, kb, entries * width);
    let db = b.partial_inputs(0, entries * width);
    let key = b.evl_inputs(0, kb);
    let out = lookup(&mut b, &db, entries, width, &key);
    b.output_evl(&out);
    b.save(&db);
    b.finish()
}

pub fn counter_init(n: usize) -> Circuit {
    let mut b = Builder::new(0, n, 0);
    let v = b.evl_inputs(0, n);
    b.save(&v);
    b.finish()
}

/// Adds the evaluator's input to the saved value; outputs and saves the sum.
pub fn counter(n: usize) -> Circuit {
    let mut b = Builder::new(0, n, n);
    let v = b.partial_inputs(0, n);
    let a = b.evl_inputs(0, n);
    let s = b.add(&v, &a);
    b.output_evl(&s);
    b.save(&s);
    b.finish()
}

/// Initial value followed by `steps` addends, all from the evaluator.
pub fn counter_full(n: usize, steps: usize) -> Circuit {
    let mut b = Builder::new(0, n * (steps + 1), 0);
    let mut acc = b.evl_inputs(0, n);
    for s in 0..steps {
        let a = b.evl_inputs(n * (s + 1), n);
        acc = b.add(&acc, &a);
    }
    b.output_evl(&acc);
    b.finish()
}

fn lcs_cell(b: &mut Builder, x: Bit, y: Bit, diag: &[Bit]) -> Vec<Bit> {
    let eq = b.equal_bit(x, y);
    let inc = b.increment(diag);
    b.and_vec(eq, &inc)
}

/// One step of the longest-common-substring table over binary strings.
///
/// The step extends both strings from length `k` to `k + 1` (generator adds a
/// character to `a`, evaluator to `b`). Saved state, in order: `a[0..k+1]`,
/// `b[0..k+1]`, the last table row, the last table column without its final
/// entry, and the running maximum. Every entry is `w` bits.
pub fn lcs_step(k: usize, w: usize) -> Circuit {
    let partial = 2 * k + k * w + k.saturating_sub(1) * w + if k > 0 { w } else { 0 };
    let mut b = Builder::new(1, 1, partial);
    let a = b.partial_inputs(0, k);
    let bs = b.partial_inputs(k, k);
    let row_prev: Vec<Vec<Bit>> = (0..k).map(|j| b.partial_inputs(2 * k + j * w, w)).collect();
    let col_base = 2 * k + k * w;
    // Column k-1 of the table for rows 0..k, with the corner taken from the row.
    let mut col_prev: Vec<Vec<Bit>> = (0..k.saturating_sub(1))
        .map(|i| b.partial_inputs(col_base + i * w, w))
        .collect();
    if k > 0 {
        col_prev.push(row_prev[k - 1].clone());
    }
    let max_prev = if k > 0 {
        b.partial_inputs(col_base + (k - 1) * w, w)
    } else {
        vec![Bit::Const(false); w]
    };
    let a_new = b.gen_inputs(0, 1)[0];
    let b_new = b.evl_inputs(0, 1)[0];
    let zero = vec![Bit::Const(false); w];

    // New row k: cells (k, j) for j in 0..k, then the corner (k, k).
    let mut row = Vec::with_capacity(k + 1);
    for j in 0..k {
        let diag = if j == 0 { zero.clone() } else { row_prev[j - 1].clone() };
        row.push(lcs_cell(&mut b, a_new, bs[j], &diag));
    }
    // New column k: cells (i, k) for i in 0..k.
    let mut col = Vec::with_capacity(k);
    for i in 0..k {
        let diag = if i == 0 { zero.clone() } else { col_prev[i - 1].clone() };
        col.push(lcs_cell(&mut b, a[i], b_new, &diag));
    }
    let corner_diag = if k == 0 { zero.clone() } else { row_prev[k - 1].clone() };
    let corner = lcs_cell(&mut b, a_new, b_new, &corner_diag);
    row.push(corner);

    let mut max = max_prev;
    for cell in row.iter().chain(col.iter()) {
        max = b.max(&max, cell);
    }
    b.output_evl(&max);

    let mut saved: Vec<Bit> = Vec::new();
    saved.extend_from_slice(&a);
    saved.push(a_new);
    saved.extend_from_slice(&bs);
    saved.push(b_new);
    for cell in &row {
        saved.extend_from_slice(cell);
    }
    for cell in &col {
        saved.extend_from_slice(cell);
    }
    saved.extend_from_slice(&max);
    b.save(&saved);
    b.finish()
}

/// Longest common substring length of two `n`-bit strings in one circuit.
pub fn lcs_full(n: usize, w: usize) -> Circuit {
    let mut b = Builder::new(n, n, 0);
    let a = b.gen_inputs(0, n);
    let bs = b.evl_inputs(0, n);
    let zero = vec![Bit::Const(false); w];
    let mut prev: Vec<Vec<Bit>> = vec![zero.clone(); n];
    let mut max = zero.clone();
    for (i, &ai) in a.iter().enumerate() {
        let mut cur = Vec::with_capacity(n);
        for j in 0..n {
            let diag = if i == 0 || j == 0 {
                zero.clone()
            } else {
                prev[j - 1].clone()
            };
            let cell = lcs_cell(&mut b, ai, bs[j], &diag);
            max = b.max(&max, &cell);
            cur.push(cell);
        }
        prev = cur;
    }
    b.output_evl(&max);
    b.finish()
}

/// Blank map: every cell zero. The single evaluator input is unused.
pub fn map_start(cells: usize, bits: usize) -> Circuit {
    let mut b = Builder::new(0, 1, 0);
    let zeros = vec![Bit::Const(false); cells * bits];
    b.save(&zeros);
    b.finish()
}

/// Writes the evaluator's value into the evaluator's chosen cell.
pub fn map_set(cells: usize, bits: usize) -> Circuit {
    let ib = index_bits(cells);
    let mut b = Builder::new(0, ib + bits, cells * bits);
    let map = b.partial_inputs(0, cells * bits);
    let idx = b.evl_inputs(0, ib);
    let value = b.evl_inputs(ib, bits);
    let mut out = Vec::with_capacity(cells * bits);
    for c in 0..cells {
        let sel = b.equal_const(&idx, c as u64);
        let cell = b.mux_vec(sel, &value, &map[c * bits..(c + 1) * bits]);
        out.extend(cell);
    }
    b.save(&out);
    b.finish()
}

/// Reads one cell; the map is saved unchanged.
pub fn map_get(cells: usize, bits: usize) -> Circuit {
    let ib = index_bits(cells);
    let mut b = Builder::new(0, ib, cells * bits);
    let map = b.partial_inputs(0, cells * bits);
    let idx = b.evl_inputs(0, ib);
    let out = lookup(&mut b, &map, cells, bits, &idx);
    b.output_evl(&out);
    b.save(&map);
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_parsing() {
        assert_eq!(build_program("millionaires:4").unwrap(), millionaires(4));
        assert_eq!(build_program("map_set:4").unwrap().partial_inputs, 32);
        assert!(matches!(build_program("nope:1"), Err(ProgramError::Unknown(_))));
        assert!(build_program("millionaires:0").is_err());
        assert!(build_program("millionaires").is_err());
        assert!(build_program("millionaires:x").is_err());
        assert!(build_program("lcs_full:20,4").is_err());
    }

    #[test]
    fn millionaires_one_bit_has_one_and() {
        let c = millionaires(1);
        assert_eq!(c.and_count(), 1);
        assert_eq!(c.evl_outputs.len(), 1);
        assert_eq!(c.gen_outputs.len(), 1);
    }

    #[test]
    fn chain_shapes_line_up() {
        assert_eq!(counter_init(5).saved_wires.len(), counter(5).partial_inputs);
        assert_eq!(counter(5).saved_wires.len(), counter(5).partial_inputs);
        for k in 0..4 {
            assert_eq!(lcs_step(k, 3).saved_wires.len(), lcs_step(k + 1, 3).partial_inputs);
        }
        let start = map_start(4, 8);
        assert_eq!(start.saved_wires.len(), map_set(4, 8).partial_inputs);
        assert_eq!(map_set(4, 8).saved_wires.len(), map_get(4, 8).partial_inputs);
        assert_eq!(map_get(4, 8).saved_wires.len(), map_set(4, 8).partial_inputs);
        assert_eq!(
            keyed_db_store(8, 4).saved_wires.len(),
            keyed_db_lookup(8, 4).partial_inputs
        );
    }

    #[test]
    fn map_saved_wires_are_distinct() {
        for c in [map_start(4, 8), map_set(4, 8), map_get(4, 8)] {
            let mut s = c.saved_wires.clone();
            s.sort_unstable();
            s.dedup();
            assert_eq!(s.len(), c.saved_wires.len());
        }
    }
}
