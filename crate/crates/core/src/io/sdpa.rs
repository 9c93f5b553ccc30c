//! SDPA sparse format (`.dat-s`), single semidefinite block.
//!
//! The objective vector is read as `b`, matrix 0 as `C` and matrix `i` as
//! `A_i`, so a file describes `max b^T y s.t. C - sum_i A_i y_i >= 0`. A
//! diagonal (negative-size) block contributes one linear constraint
//! `sum_i A_i[j,j] y_i <= C[j,j]` per diagonal position.

use crate::linalg::SymMatrix;
use crate::model::{LinearConstraint, SdpInstance};
use std::fmt::Write as _;

#[derive(Debug, thiserror::Error)]
pub enum SdpaError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported: {0}")]
    UnsupportedFeature(String),
    #[error("invalid instance: {0}")]
    Model(#[from] crate::model::ModelError),
}

const NONNEG_MARK: &str = "* pcsdp: trailing LP rows are y >= 0";

fn perr(line: usize, message: impl Into<String>) -> SdpaError {
    SdpaError::Parse { line, message: message.into() }
}

fn is_comment(l: &str) -> bool {
    let t = l.trim_start();
    t.starts_with('"') || t.starts_with('*')
}

fn split_numbers(l: &str) -> impl Iterator<Item = &str> {
    l.split(|c: char| c.is_whitespace() || matches!(c, ',' | '(' | ')' | '{' | '}')).filter(|t| !t.is_empty())
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, SdpaError> {
    let v: f64 = tok.parse().map_err(|_| perr(line, format!("expected a number, found `{tok}`")))?;
    if !v.is_finite() {
        return Err(perr(line, format!("non-finite value `{tok}`")));
    }
    Ok(v)
}

fn parse_int(tok: &str, line: usize) -> Result<i64, SdpaError> {
    tok.parse().map_err(|_| perr(line, format!("expected an integer, found `{tok}`")))
}

pub fn parse_sdpa(text: &str) -> Result<SdpInstance, SdpaError> {
    let mut nonneg_marked = false;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| {
        if l.trim() == NONNEG_MARK {
            nonneg_marked = true;
        }
        !is_comment(l) && !l.trim().is_empty()
    });

    let (ln, l) = lines.next().ok_or_else(|| perr(0, "missing number of matrices"))?;
    let m = parse_int(split_numbers(l).next().unwrap_or(""), ln)?;
    if m < 1 {
        return Err(perr(ln, "need at least one constraint matrix"));
    }
    let m = m as usize;

    let (ln, l) = lines.next().ok_or_else(|| perr(ln, "missing number of blocks"))?;
    let nblocks = parse_int(split_numbers(l).next().unwrap_or(""), ln)?;
    if nblocks < 1 {
        return Err(perr(ln, "need at least one block"));
    }
    let nblocks = nblocks as usize;

    let (ln, l) = lines.next().ok_or_else(|| perr(ln, "missing block structure"))?;
    let sizes: Vec<i64> = split_numbers(l).take(nblocks).map(|t| parse_int(t, ln)).collect::<Result<_, _>>()?;
    if sizes.len() != nblocks || sizes.contains(&0) {
        return Err(perr(ln, "block structure does not match the block count"));
    }
    let sdp_blocks: Vec<usize> = (0..nblocks).filter(|&b| sizes[b] > 0).collect();
    if sdp_blocks.len() > 1 {
        return Err(SdpaError::UnsupportedFeature(format!("{} semidefinite blocks", sdp_blocks.len())));
    }
    let Some(&sdp_block) = sdp_blocks.first() else {
        return Err(SdpaError::UnsupportedFeature("no semidefinite block".into()));
    };
    let n = sizes[sdp_block] as usize;
    // Offset of each diagonal block inside the merged list of linear rows.
    let mut lp_offset = vec![usize::MAX; nblocks];
    let mut lp_rows = 0usize;
    for b in 0..nblocks {
        if sizes[b] < 0 {
            lp_offset[b] = lp_rows;
            lp_rows += (-sizes[b]) as usize;
        }
    }

    let mut b = Vec::with_capacity(m);
    let mut last = ln;
    while b.len() < m {
        let (ln, l) = lines.next().ok_or_else(|| perr(last, "objective vector is too short"))?;
        for t in split_numbers(l) {
            if b.len() == m {
                return Err(perr(ln, format!("objective vector has more than {m} entries")));
            }
            b.push(parse_f64(t, ln)?);
        }
        last = ln;
    }

    let mut dense = vec![vec![vec![0.0; n]; n]; m + 1];
    let mut lp = vec![vec![0.0; lp_rows]; m + 1];
    for (ln, l) in lines {
        let toks: Vec<&str> = split_numbers(l).collect();
        if toks.len() < 5 {
            return Err(perr(ln, "matrix entry needs `matno blkno i j value`"));
        }
        let mat = parse_int(toks[0], ln)?;
        let blk = parse_int(toks[1], ln)?;
        let i = parse_int(toks[2], ln)?;
        let j = parse_int(toks[3], ln)?;
        let v = parse_f64(toks[4], ln)?;
        if mat < 0 || mat as usize > m {
            return Err(perr(ln, format!("matrix number {mat} outside 0..={m}")));
        }
        if blk < 1 || blk as usize > nblocks {
            return Err(perr(ln, format!("block number {blk} outside 1..={nblocks}")));
        }
        let blk = blk as usize - 1;
        let size = sizes[blk].unsigned_abs() as i64;
        if i < 1 || j < 1 || i > size || j > size {
            return Err(perr(ln, format!("index ({i}, {j}) outside block of size {size}")));
        }
        let (i, j, mat) = (i as usize - 1, j as usize - 1, mat as usize);
        if blk == sdp_block {
            dense[mat][i][j] = v;
            dense[mat][j][i] = v;
        } else {
            if i != j {
                return Err(perr(ln, "off-diagonal entry in a diagonal block"));
            }
            lp[mat][lp_offset[blk] + i] = v;
        }
    }

    let mut matrices = dense.into_iter().map(|rows| SymMatrix::from_rows(&rows).expect("mirrored storage"));
    let c = matrices.next().expect("matrix 0");
    let a: Vec<SymMatrix> = matrices.collect();
    let mut linear: Vec<LinearConstraint> =
        (0..lp_rows).map(|r| LinearConstraint { a: (1..=m).map(|i| lp[i][r]).collect(), c: lp[0][r] }).collect();

    let mut nonneg = false;
    if nonneg_marked && linear.len() >= m {
        let tail = &linear[linear.len() - m..];
        let is_nonneg = tail.iter().enumerate().all(|(i, l)| {
            l.c == 0.0 && l.a.iter().enumerate().all(|(j, v)| *v == if i == j { -1.0 } else { 0.0 })
        });
        if is_nonneg {
            linear.truncate(linear.len() - m);
            nonneg = true;
        }
    }
    Ok(SdpInstance::new(b, a, c, linear, nonneg)?)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_sdpa(inst: &SdpInstance) -> String {
    let k = inst.k();
    let n = inst.n();
    let rows = inst.linear_constraints();
    let mut out = String::new();
    out.push_str("\"max b^T y s.t. C - sum_i A_i y_i >= 0\n");
    if inst.nonneg_y() {
        out.push_str(NONNEG_MARK);
        out.push('\n');
    }
    let _ = writeln!(out, "{k}");
    if rows.is_empty() {
        let _ = writeln!(out, "1\n{n}");
    } else {
        let _ = writeln!(out, "2\n{n} -{}", rows.len());
    }
    let b: Vec<String> = inst.b().iter().map(|v| num(*v)).collect();
    let _ = writeln!(out, "{}", b.join(" "));
    let mats = std::iter::once(inst.c()).chain(inst.a().iter());
    for (mat, m) in mats.enumerate() {
        for i in 0..n {
            for j in i..n {
                let v = m.get(i, j);
                if v != 0.0 {
                    let _ = writeln!(out, "{mat} 1 {} {} {}", i + 1, j + 1, num(v));
                }
            }
        }
        for (r, l) in rows.iter().enumerate() {
            let v = if mat == 0 { l.c } else { l.a[mat - 1] };
            if v != 0.0 {
                let _ = writeln!(out, "{mat} 2 {} {} {}", r + 1, r + 1, num(v));
            }
        }
    }
    out
}
