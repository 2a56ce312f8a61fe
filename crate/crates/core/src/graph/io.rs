//! Text edge lists and the binary CSR container.
//!
//! Edge list: a `num_src num_dst` header line, then one `src dst [value]`
//! line per edge. Blank lines and `#` comments are skipped.
//!
//! Binary container (little-endian): magic `FGK1`, `u64` num_src, num_dst,
//! nnz, `u64` row_ptr, `u32` col_idx, `u32` edge_id, a flag byte, then
//! `f32` edge values when the flag is 1.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::SparseAdjacency;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FGK1";

pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<SparseAdjacency> {
    let mut header: Option<(usize, usize)> = None;
    let mut edges = Vec::new();
    let mut values: Vec<f32> = Vec::new();
    let mut with_values: Option<bool> = None;

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let parse_err = |msg: String| Error::Parse { line: lineno, msg };
        let int = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| parse_err(format!("bad integer `{s}`: {e}")))
        };

        let Some((num_src, num_dst)) = header else {
            if fields.len() != 2 {
                return Err(Error::MissingHeader);
            }
            let ns = int(fields[0])? as usize;
            let nd = int(fields[1])? as usize;
            header = Some((ns, nd));
            continue;
        };

        if !(2..=3).contains(&fields.len()) {
            return Err(parse_err(format!(
                "expected `src dst [value]`, got {} fields",
                fields.len()
            )));
        }
        let has_value = fields.len() == 3;
        match with_values {
            None => with_values = Some(has_value),
            Some(w) if w != has_value => {
                return Err(parse_err("edge value present on some lines only".into()))
            }
            _ => {}
        }
        let (s, d) = (int(fields[0])?, int(fields[1])?);
        if s >= num_src as u64 || d >= num_dst as u64 {
            return Err(parse_err(format!(
                "edge ({s}, {d}) out of range for a {num_src}x{num_dst} graph"
            )));
        }
        edges.push((s as u32, d as u32));
        if has_value {
            let v = fields[2]
                .parse::<f32>()
                .map_err(|e| parse_err(format!("bad value `{}`: {e}", fields[2])))?;
            values.push(v);
        }
    }

    let (num_src, num_dst) = header.ok_or(Error::MissingHeader)?;
    let values = with_values.unwrap_or(false).then_some(values.as_slice());
    SparseAdjacency::from_coo(num_src, num_dst, &edges, values)
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<SparseAdjacency> {
    parse_edge_list(BufReader::new(File::open(path)?))
}

/// Writes edges in canonical edge-id order, so loading reproduces the same ids.
pub fn write_edge_list<W: Write>(adj: &SparseAdjacency, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "{} {}", adj.num_src(), adj.num_dst())?;
    let coo = adj.to_coo();
    match adj.edge_value() {
        Some(vals) => {
            for (&(s, d), v) in coo.iter().zip(vals) {
                writeln!(w, "{s} {d} {v}")?;
            }
        }
        None => {
            for (s, d) in coo {
                writeln!(w, "{s} {d}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_edge_list(adj: &SparseAdjacency, path: impl AsRef<Path>) -> Result<()> {
    write_edge_list(adj, File::create(path)?)
}

pub fn write_binary<W: Write>(adj: &SparseAdjacency, writer: W) -> Result<()> {
    let mut w = BufWriter::with_capacity(1 << 20, writer);
    w.write_all(MAGIC)?;
    for n in [adj.num_src(), adj.num_dst(), adj.nnz()] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for &p in adj.row_ptr() {
        w.write_all(&(p as u64).to_le_bytes())?;
    }
    for &c in adj.col_idx() {
        w.write_all(&c.to_le_bytes())?;
    }
    for &e in adj.edge_id() {
        w.write_all(&e.to_le_bytes())?;
    }
    match adj.edge_value() {
        Some(vals) => {
            w.write_all(&[1])?;
            for &v in vals {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        None => w.write_all(&[0])?,
    }
    w.flush()?;
    Ok(())
}

fn read_array<R: Read, const N: usize, T>(
    r: &mut R,
    len: usize,
    decode: impl Fn([u8; N]) -> T,
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(len);
    let mut buf = [0u8; N];
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        out.push(decode(buf));
    }
    Ok(out)
}

pub fn read_binary<R: Read>(reader: R) -> Result<SparseAdjacency> {
    let mut r = BufReader::with_capacity(1 << 20, reader);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let dims = read_array(&mut r, 3, u64::from_le_bytes)?;
    let to_usize = |x: u64| {
        usize::try_from(x).map_err(|_| Error::Format(format!("dimension {x} does not fit usize")))
    };
    let (num_src, num_dst, nnz) = (to_usize(dims[0])?, to_usize(dims[1])?, to_usize(dims[2])?);
    if nnz > super::MAX_NNZ {
        return Err(Error::TooLarge(format!("{nnz} edges")));
    }
    let row_ptr = read_array(&mut r, num_dst + 1, u64::from_le_bytes)?
        .into_iter()
        .map(to_usize)
        .collect::<Result<Vec<_>>>()?;
    let col_idx = read_array(&mut r, nnz, u32::from_le_bytes)?;
    let edge_id = read_array(&mut r, nnz, u32::from_le_bytes)?;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let edge_value = match flag[0] {
        0 => None,
        1 => Some(read_array(&mut r, nnz, f32::from_le_bytes)?),
        f => return Err(Error::Format(format!("bad edge-value flag {f}"))),
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after container".into()));
    }
    SparseAdjacency::from_parts(num_src, num_dst, row_ptr, col_idx, edge_id, edge_value)
}

pub fn save_binary(adj: &SparseAdjacency, path: impl AsRef<Path>) -> Result<()> {
    write_binary(adj, File::create(path)?)
}

pub fn load_binary(path: impl AsRef<Path>) -> Result<SparseAdjacency> {
    read_binary(File::open(path)?)
}

/// Loads either container format, sniffing the magic bytes.
pub fn load_graph(path: impl AsRef<Path>) -> Result<SparseAdjacency> {
    let path = path.as_ref();
    let mut head = [0u8; 4];
    let n = File::open(path)?.read(&mut head)?;
    if n == 4 && &head == MAGIC {
        load_binary(path)
    } else {
        load_edge_list(path)
    }
}
