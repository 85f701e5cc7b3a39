//! SDPA sparse format (`.dat-s`).
//!
//! Layout: optional comment lines starting with `"` or `*`, then `m`, the
//! block count, the block sizes, the cost vector and one
//! `matno blkno i j value` entry per line. Text after the leading number on
//! the `m` and block-count lines is ignored, as SDPLIB writes `=mdim` there.

use std::collections::HashSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::lmi::{LmiError, LmiProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpaError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: entry ({blkno}, {i}, {j}) outside block bounds")]
    OutOfBounds { line: usize, blkno: i64, i: i64, j: i64 },
    #[error("line {line}: lower-triangle entry i={i} > j={j}")]
    LowerTriangle { line: usize, i: i64, j: i64 },
    #[error("line {line}: off-diagonal entry in diagonal block {blkno}")]
    OffDiagonal { line: usize, blkno: i64 },
    #[error("line {line}: duplicate entry ({matno}, {blkno}, {i}, {j})")]
    Duplicate { line: usize, matno: usize, blkno: i64, i: i64, j: i64 },
    #[error("line {line}: matrix number {matno} exceeds m = {m}")]
    MatrixNumber { line: usize, matno: i64, m: usize },
    #[error("unexpected end of input while reading {0}")]
    Truncated(&'static str),
    #[error(transparent)]
    Lmi(#[from] LmiError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpaEntry {
    pub matno: usize,
    pub blkno: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpaInstance {
    pub m: usize,
    pub block_sizes: Vec<i64>,
    pub cost: Vec<f64>,
    pub entries: Vec<SdpaEntry>,
}

impl SdpaInstance {
    /// Sum of absolute block sizes.
    pub fn dim(&self) -> usize {
        self.block_sizes.iter().map(|b| b.unsigned_abs() as usize).sum()
    }

    /// Row offset of each block in the assembled matrix.
    pub fn block_offsets(&self) -> Vec<usize> {
        offsets(&self.block_sizes)
    }

    /// Dense symmetric `A_k`.
    pub fn matrix(&self, k: usize) -> DMatrix<f64> {
        let dim = self.dim();
        let off = self.block_offsets();
        let mut a = DMatrix::zeros(dim, dim);
        for e in self.entries.iter().filter(|e| e.matno == k) {
            let r = off[e.blkno - 1] + e.i - 1;
            let c = off[e.blkno - 1] + e.j - 1;
            a[(r, c)] = e.value;
            a[(c, r)] = e.value;
        }
        a
    }

    /// Dense `A_0, …, A_m`, built in one pass over the entries.
    pub fn matrices(&self) -> Vec<DMatrix<f64>> {
        let dim = self.dim();
        let off = self.block_offsets();
        let mut mats = vec![DMatrix::zeros(dim, dim); self.m + 1];
        for e in &self.entries {
            let r = off[e.blkno - 1] + e.i - 1;
            let c = off[e.blkno - 1] + e.j - 1;
            mats[e.matno][(r, c)] = e.value;
            mats[e.matno][(c, r)] = e.value;
        }
        mats
    }
}

fn offsets(block_sizes: &[i64]) -> Vec<usize> {
    let mut acc = 0;
    block_sizes
        .iter()
        .map(|b| {
            let o = acc;
            acc += b.unsigned_abs() as usize;
            o
        })
        .collect()
}

struct Tokens<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    line: usize,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut lines = Vec::new();
        let mut header = true;
        for (k, raw) in text.lines().enumerate() {
            let trimmed = raw.trim_start();
            if header && (trimmed.starts_with('"') || trimmed.starts_with('*')) {
                continue;
            }
            let toks: Vec<&str> = raw
                .split(|ch: char| ch.is_whitespace() || "{}(),".contains(ch))
                .filter(|t| !t.is_empty())
                .collect();
            if toks.is_empty() {
                continue;
            }
            header = false;
            lines.push((k + 1, toks));
        }
        Self { lines, line: 0, pos: 0 }
    }

    /// Next token, crossing line boundaries.
    fn next(&mut self, what: &'static str) -> Result<(usize, &'a str), SdpaError> {
        while let Some((no, toks)) = self.lines.get(self.line) {
            if self.pos < toks.len() {
                self.pos += 1;
                return Ok((*no, toks[self.pos - 1]));
            }
            self.line += 1;
            self.pos = 0;
        }
        Err(SdpaError::Truncated(what))
    }

    /// First token of the next line; the remainder of that line is dropped.
    fn leading(&mut self, what: &'static str) -> Result<(usize, &'a str), SdpaError> {
        if self.pos > 0 {
            self.line += 1;
            self.pos = 0;
        }
        let (no, toks) = self.lines.get(self.line).ok_or(SdpaError::Truncated(what))?;
        self.line += 1;
        Ok((*no, toks[0]))
    }

    fn finish_line(&mut self) {
        if self.pos > 0 {
            self.line += 1;
            self.pos = 0;
        }
    }

    /// Remaining tokens of the current line group, for entry lines.
    fn next_line(&mut self) -> Option<(usize, Vec<&'a str>)> {
        self.finish_line();
        let (no, toks) = self.lines.get(self.line)?;
        self.line += 1;
        Some((*no, toks.clone()))
    }
}

fn parse_int(tok: &str, line: usize, what: &str) -> Result<i64, SdpaError> {
    let t = tok.strip_prefix('+').unwrap_or(tok);
    t.parse::<i64>().or_else(|_| {
        // some writers emit integers as `2.0`
        match parse_real(tok, line, what) {
            Ok(v) if v.fract() == 0.0 && v.abs() < 9e15 => Ok(v as i64),
            _ => Err(SdpaError::Syntax {
                line,
                msg: format!("expected integer {what}, found `{tok}`"),
            }),
        }
    })
}

fn parse_real(tok: &str, line: usize, what: &str) -> Result<f64, SdpaError> {
    let fixed = tok.replace(['D', 'd'], "e");
    fixed.parse::<f64>().map_err(|_| SdpaError::Syntax {
        line,
        msg: format!("expected number for {what}, found `{tok}`"),
    })
}

pub fn parse_sdpa(text: &str) -> Result<SdpaInstance, SdpaError> {
    let mut toks = Tokens::new(text);

    let (line, t) = toks.leading("m")?;
    let m = parse_int(t, line, "m")?;
    if m < 1 {
        return Err(SdpaError::Syntax {
            line,
            msg: format!("m must be positive, found {m}"),
        });
    }
    let m = m as usize;

    let (line, t) = toks.leading("block count")?;
    let nblocks = parse_int(t, line, "block count")?;
    if nblocks < 1 {
        return Err(SdpaError::Syntax {
            line,
            msg: format!("block count must be positive, found {nblocks}"),
        });
    }

    let mut block_sizes = Vec::with_capacity(nblocks as usize);
    for _ in 0..nblocks {
        let (line, t) = toks.next("block sizes")?;
        let b = parse_int(t, line, "block size")?;
        if b == 0 {
            return Err(SdpaError::Syntax {
                line,
                msg: "block size must be nonzero".into(),
            });
        }
        block_sizes.push(b);
    }
    toks.finish_line();

    let mut cost = Vec::with_capacity(m);
    for _ in 0..m {
        let (line, t) = toks.next("cost vector")?;
        cost.push(parse_real(t, line, "cost")?);
    }
    toks.finish_line();

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    while let Some((line, fields)) = toks.next_line() {
        if fields.len() != 5 {
            return Err(SdpaError::Syntax {
                line,
                msg: format!("entry needs 5 fields, found {}", fields.len()),
            });
        }
        let matno = parse_int(fields[0], line, "matno")?;
        let blkno = parse_int(fields[1], line, "blkno")?;
        let i = parse_int(fields[2], line, "row")?;
        let j = parse_int(fields[3], line, "column")?;
        let value = parse_real(fields[4], line, "value")?;
        if matno < 0 || matno as usize > m {
            return Err(SdpaError::MatrixNumber { line, matno, m });
        }
        if blkno < 1 || blkno > nblocks {
            return Err(SdpaError::OutOfBounds { line, blkno, i, j });
        }
        let size = block_sizes[blkno as usize - 1];
        let bound = size.abs();
        if i < 1 || j < 1 || i > bound || j > bound {
            return Err(SdpaError::OutOfBounds { line, blkno, i, j });
        }
        if i > j {
            return Err(SdpaError::LowerTriangle { line, i, j });
        }
        if size < 0 && i != j {
            return Err(SdpaError::OffDiagonal { line, blkno });
        }
        let matno = matno as usize;
        if !seen.insert((matno, blkno, i, j)) {
            return Err(SdpaError::Duplicate {
                line,
                matno,
                blkno,
                i,
                j,
            });
        }
        entries.push(SdpaEntry {
            matno,
            blkno: blkno as usize,
            i: i as usize,
            j: j as usize,
            value,
        });
    }
    Ok(SdpaInstance {
        m,
        block_sizes,
        cost,
        entries,
    })
}

/// Serializes with shortest round-trip float formatting, so
/// `parse_sdpa(&write_sdpa(x)) == x`.
pub fn write_sdpa(inst: &SdpaInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", inst.m);
    let _ = writeln!(out, "{}", inst.block_sizes.len());
    let sizes: Vec<String> = inst.block_sizes.iter().map(|b| b.to_string()).collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let cost: Vec<String> = inst.cost.iter().map(|c| format!("{c:?}")).collect();
    let _ = writeln!(out, "{}", cost.join(" "));
    for e in &inst.entries {
        let _ = writeln!(out, "{} {} {} {} {:?}", e.matno, e.blkno, e.i, e.j, e.value);
    }
    out
}

/// `F0 = A0`, `F_i = -A_i`, `c` unchanged: `Σ x_i A_i - A0 ⪰ 0` becomes
/// `F(x) ⪯ 0`.
pub fn to_lmi(inst: &SdpaInstance) -> Result<LmiProblem, SdpaError> {
    let mut mats = inst.matrices();
    for a in mats.iter_mut().skip(1) {
        a.neg_mut();
    }
    Ok(LmiProblem::new(
        DVector::from_vec(inst.cost.clone()),
        mats,
        inst.block_sizes.clone(),
    )?)
}

/// Inverse of [`to_lmi`]. Entries outside the block pattern are dropped and
/// exact zeros are not stored.
pub fn from_lmi(p: &LmiProblem) -> SdpaInstance {
    let block_sizes = p.block_sizes().to_vec();
    let off = offsets(&block_sizes);
    let mut entries = Vec::new();
    for (k, f) in p.matrices().iter().enumerate() {
        let sign = if k == 0 { 1.0 } else { -1.0 };
        for (b, (&size, &o)) in block_sizes.iter().zip(&off).enumerate() {
            let s = size.unsigned_abs() as usize;
            for i in 0..s {
                let jr = if size < 0 { i..i + 1 } else { i..s };
                for j in jr {
                    let v = f[(o + i, o + j)];
                    if v != 0.0 {
                        entries.push(SdpaEntry {
                            matno: k,
                            blkno: b + 1,
                            i: i + 1,
                            j: j + 1,
                            value: sign * v,
                        });
                    }
                }
            }
        }
    }
    SdpaInstance {
        m: p.n(),
        block_sizes,
        cost: p.c().iter().copied().collect(),
        entries,
    }
}
