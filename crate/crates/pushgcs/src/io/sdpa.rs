//! SDPA sparse format (".dat-s") for conic programs.
//!
//! Variables map one to one onto SDPA's free variables `x`, and each cone
//! becomes a block of `Σ F_i x_i − F_0 ⪰ 0`. Scalar rows share one leading
//! diagonal block in insertion order (equalities as two opposite rows); every
//! other cone gets its own block in insertion order: second-order cones as
//! arrow matrices, rotated cones as `[[t, xᵀ], [x, u I]]`, PSD cones as is.
//! The objective constant, which SDPA has no place for, travels in the
//! leading comment line.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use pushgcs_core::conic::{Cone, ConeConstraint, ConicProgram};
use pushgcs_core::expr::Affine;

const CONSTANT_TAG: &str = "objective_constant=";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SdpaError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Structure(String),
}

enum Block {
    /// Diagonal block holding scalar rows.
    Diagonal(Vec<Affine>),
    /// Symmetric block given by its upper-triangle entries `(i, j, value)`.
    Matrix { dim: usize, entries: Vec<(usize, usize, Affine)> },
}

fn blocks_of(program: &ConicProgram) -> Vec<Block> {
    let mut scalar = Vec::new();
    let mut others = Vec::new();
    for c in &program.constraints {
        match c.cone {
            Cone::Nonnegative => scalar.extend(c.rows.iter().cloned()),
            Cone::Zero => {
                for r in &c.rows {
                    scalar.push(r.clone());
                    scalar.push(r.scaled(-1.0));
                }
            }
            Cone::SecondOrder => {
                let n = c.rows.len();
                let mut entries: Vec<_> = (0..n).map(|i| (i, i, c.rows[0].clone())).collect();
                entries.extend((1..n).map(|j| (0, j, c.rows[j].clone())));
                others.push(Block::Matrix { dim: n, entries });
            }
            Cone::RotatedSecondOrder if c.rows.len() == 2 => scalar.extend(c.rows.iter().cloned()),
            Cone::RotatedSecondOrder => {
                let n = c.rows.len() - 1;
                let mut entries = vec![(0, 0, c.rows[0].clone())];
                entries.extend((1..n).map(|i| (i, i, c.rows[1].clone())));
                entries.extend((1..n).map(|j| (0, j, c.rows[j + 1].clone())));
                others.push(Block::Matrix { dim: n, entries });
            }
            Cone::Psd { dim } => {
                let mut entries = Vec::with_capacity(c.rows.len());
                for j in 0..dim {
                    for i in 0..=j {
                        entries.push((i, j, c.rows[Cone::triangle_index(i, j)].clone()));
                    }
                }
                others.push(Block::Matrix { dim, entries });
            }
        }
    }
    let mut blocks = Vec::new();
    if !scalar.is_empty() {
        blocks.push(Block::Diagonal(scalar));
    }
    blocks.extend(others);
    blocks
}

/// Writes `program` in SDPA sparse format. Output depends only on the program.
pub fn export(program: &ConicProgram) -> String {
    let blocks = blocks_of(program);
    let objective = program.objective.clone().simplified();
    let mut out = String::new();
    writeln!(out, "\"pushgcs conic program {CONSTANT_TAG}{:e}", objective.constant).unwrap();
    writeln!(out, "{}", program.num_vars).unwrap();
    writeln!(out, "{}", blocks.len()).unwrap();
    let sizes: Vec<String> = blocks
        .iter()
        .map(|b| match b {
            Block::Diagonal(rows) => format!("-{}", rows.len()),
            Block::Matrix { dim, .. } => dim.to_string(),
        })
        .collect();
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    let mut c = vec![0.0; program.num_vars];
    for &(i, v) in &objective.terms {
        c[i] += v;
    }
    let c: Vec<String> = c.iter().map(|v| format!("{v:e}")).collect();
    writeln!(out, "{}", c.join(" ")).unwrap();

    // (matrix, block, i, j) → value; matrix 0 is F_0 = −constant.
    let mut entries: BTreeMap<(usize, usize, usize, usize), f64> = BTreeMap::new();
    let mut put = |block: usize, i: usize, j: usize, a: &Affine| {
        let a = a.clone().simplified();
        for &(var, v) in &a.terms {
            *entries.entry((var + 1, block, i, j)).or_insert(0.0) += v;
        }
        if a.constant != 0.0 {
            *entries.entry((0, block, i, j)).or_insert(0.0) -= a.constant;
        }
    };
    for (b, block) in blocks.iter().enumerate() {
        match block {
            Block::Diagonal(rows) => {
                for (k, r) in rows.iter().enumerate() {
                    put(b + 1, k + 1, k + 1, r);
                }
            }
            Block::Matrix { entries: es, .. } => {
                for (i, j, a) in es {
                    put(b + 1, i + 1, j + 1, a);
                }
            }
        }
    }
    for ((m, b, i, j), v) in entries {
        if v != 0.0 {
            writeln!(out, "{m} {b} {i} {j} {v:e}").unwrap();
        }
    }
    out
}

/// Reads an SDPA sparse file. Diagonal blocks come back as nonnegative rows
/// and matrix blocks as PSD cones, so the program is equivalent to the
/// exported one though not cone-for-cone identical.
pub fn import(text: &str) -> Result<ConicProgram, SdpaError> {
    let mut constant = 0.0;
    let mut tokens: Vec<(usize, String)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let t = line.trim();
        if t.starts_with('"') || t.starts_with('*') {
            if let Some(pos) = t.find(CONSTANT_TAG) {
                let rest = &t[pos + CONSTANT_TAG.len()..];
                let word = rest.split_whitespace().next().unwrap_or("");
                constant = word
                    .parse()
                    .map_err(|_| SdpaError::Parse { line: line_no, message: format!("bad objective constant {word:?}") })?;
            }
            continue;
        }
        let cleaned: String = t.chars().map(|ch| if "{}(),".contains(ch) { ' ' } else { ch }).collect();
        for w in cleaned.split_whitespace() {
            tokens.push((line_no, w.to_string()));
        }
    }
    let mut it = tokens.into_iter();
    fn take(it: &mut impl Iterator<Item = (usize, String)>, what: &str) -> Result<(usize, String), SdpaError> {
        it.next().ok_or_else(|| SdpaError::Structure(format!("unexpected end of file reading {what}")))
    }
    fn parse<T: std::str::FromStr>(tok: (usize, String), what: &str) -> Result<T, SdpaError> {
        tok.1.parse().map_err(|_| SdpaError::Parse { line: tok.0, message: format!("bad {what} {:?}", tok.1) })
    }
    let m: usize = parse(take(&mut it, "variable count")?, "variable count")?;
    let nblocks: usize = parse(take(&mut it, "block count")?, "block count")?;
    let mut sizes = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let s: i64 = parse(take(&mut it, "block size")?, "block size")?;
        if s == 0 {
            return Err(SdpaError::Structure("zero block size".into()));
        }
        sizes.push(s);
    }
    let mut objective = Affine::constant(constant);
    for i in 0..m {
        let v: f64 = parse(take(&mut it, "cost entry")?, "cost entry")?;
        if v != 0.0 {
            objective.terms.push((i, v));
        }
    }
    // Per block, upper-triangle entries as affine rows.
    let mut cells: Vec<BTreeMap<(usize, usize), Affine>> = vec![BTreeMap::new(); nblocks];
    loop {
        let Some(first) = it.next() else { break };
        let line = first.0;
        let mat: usize = parse(first, "matrix number")?;
        let blk: usize = parse(take(&mut it, "block number")?, "block number")?;
        let i: usize = parse(take(&mut it, "row")?, "row")?;
        let j: usize = parse(take(&mut it, "column")?, "column")?;
        let v: f64 = parse(take(&mut it, "value")?, "value")?;
        if mat > m || blk == 0 || blk > nblocks {
            return Err(SdpaError::Parse { line, message: format!("entry ({mat}, {blk}) out of range") });
        }
        let size = sizes[blk - 1];
        let dim = size.unsigned_abs() as usize;
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if i == 0 || j > dim || (size < 0 && i != j) {
            return Err(SdpaError::Parse { line, message: format!("entry ({i}, {j}) outside block {blk}") });
        }
        let cell = cells[blk - 1].entry((i - 1, j - 1)).or_default();
        if mat == 0 {
            cell.constant -= v;
        } else {
            cell.terms.push((mat - 1, v));
        }
    }
    let mut constraints = Vec::new();
    for (b, &size) in sizes.iter().enumerate() {
        let dim = size.unsigned_abs() as usize;
        let cell = |i: usize, j: usize| cells[b].get(&(i, j)).cloned().unwrap_or_default().simplified();
        if size < 0 {
            for k in 0..dim {
                constraints.push(ConeConstraint::nonneg(cell(k, k)));
            }
        } else {
            let mut rows = Vec::with_capacity(Cone::triangle_len(dim));
            for j in 0..dim {
                for i in 0..=j {
                    rows.push(cell(i, j));
                }
            }
            constraints.push(ConeConstraint { cone: Cone::Psd { dim }, rows });
        }
    }
    let program = ConicProgram { num_vars: m, constraints, objective: objective.simplified() };
    program.validate().map_err(|e| SdpaError::Structure(e.to_string()))?;
    Ok(program)
}
