//! Dense per-(timestamp, node) table of Gaussian embeddings with CSV and
//! binary persistence.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::GaussianEmbedding;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"GEMBEMB1";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    timestamps: usize,
    nodes: usize,
    dim: usize,
    mu: Vec<f64>,
    var: Vec<f64>,
}

impl EmbeddingTable {
    /// Table with zero means and unit variances.
    pub fn new(timestamps: usize, nodes: usize, dim: usize) -> Self {
        let len = timestamps * nodes * dim;
        Self {
            timestamps,
            nodes,
            dim,
            mu: vec![0.0; len],
            var: vec![1.0; len],
        }
    }

    pub fn timestamps(&self) -> usize {
        self.timestamps
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn offset(&self, t: usize, node: usize) -> Result<usize> {
        if t >= self.timestamps || node >= self.nodes {
            return Err(Error::OutOfRange(format!(
                "embedding ({t}, {node}) outside {} timestamps x {} nodes",
                self.timestamps, self.nodes
            )));
        }
        Ok((t * self.nodes + node) * self.dim)
    }

    pub fn set(&mut self, t: usize, node: usize, mu: &[f64], var: &[f64]) -> Result<()> {
        if mu.len() != self.dim || var.len() != self.dim {
            return Err(Error::Dimension(format!(
                "embedding of sizes {}/{} in a table of dim {}",
                mu.len(),
                var.len(),
                self.dim
            )));
        }
        let o = self.offset(t, node)?;
        self.mu[o..o + self.dim].copy_from_slice(mu);
        self.var[o..o + self.dim].copy_from_slice(var);
        Ok(())
    }

    pub fn mu(&self, t: usize, node: usize) -> Result<&[f64]> {
        let o = self.offset(t, node)?;
        Ok(&self.mu[o..o + self.dim])
    }

    pub fn var(&self, t: usize, node: usize) -> Result<&[f64]> {
        let o = self.offset(t, node)?;
        Ok(&self.var[o..o + self.dim])
    }

    pub fn get(&self, t: usize, node: usize) -> Result<GaussianEmbedding> {
        GaussianEmbedding::new(self.mu(t, node)?.to_vec(), self.var(t, node)?.to_vec())
    }

    /// Row-major `[nodes, dim]` block of means at `t`.
    pub fn means_at(&self, t: usize) -> Result<&[f64]> {
        let o = self.offset(t, 0)?;
        Ok(&self.mu[o..o + self.nodes * self.dim])
    }

    /// CSV with header `t,node,mu_0..,var_0..`; one row per (t, node).
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        write!(out, "t,node")?;
        for k in 0..self.dim {
            write!(out, ",mu_{k}")?;
        }
        for k in 0..self.dim {
            write!(out, ",var_{k}")?;
        }
        writeln!(out)?;
        for t in 0..self.timestamps {
            for node in 0..self.nodes {
                let o = (t * self.nodes + node) * self.dim;
                write!(out, "{t},{node}")?;
                for v in self.mu[o..o + self.dim].iter().chain(&self.var[o..o + self.dim]) {
                    write!(out, ",{v}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(input).lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?,
            None => return Err(Error::Empty("embedding file".into())),
        };
        let cols = header.trim().split(',').count();
        if cols < 4 || (cols - 2) % 2 != 0 || !header.starts_with("t,node") {
            return Err(Error::Parse { line: 1, msg: format!("unexpected header '{header}'") });
        }
        let dim = (cols - 2) / 2;
        let mut rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse { line: line_no, msg: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != cols {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {cols} fields, found {}", fields.len()),
                });
            }
            let idx = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse { line: line_no, msg: e.to_string() });
            let vals = fields[2..]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse { line: line_no, msg: e.to_string() }))
                .collect::<Result<Vec<f64>>>()?;
            rows.push((idx(fields[0])?, idx(fields[1])?, vals));
        }
        if rows.is_empty() {
            return Err(Error::Empty("embedding file has no records".into()));
        }
        let timestamps = rows.iter().map(|r| r.0).max().expect("non-empty") + 1;
        let nodes = rows.iter().map(|r| r.1).max().expect("non-empty") + 1;
        if rows.len() != timestamps * nodes {
            return Err(Error::Parse {
                line: rows.len() + 1,
                msg: format!("{} records do not cover {timestamps} x {nodes}", rows.len()),
            });
        }
        let mut table = Self::new(timestamps, nodes, dim);
        for (t, node, vals) in rows {
            table.set(t, node, &vals[..dim], &vals[dim..])?;
        }
        Ok(table)
    }

    /// Little-endian binary: magic, three u64 sizes, means, then variances.
    pub fn write_binary(&self, out: &mut impl Write) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        for n in [self.timestamps, self.nodes, self.dim] {
            out.write_all(&(n as u64).to_le_bytes())?;
        }
        for v in self.mu.iter().chain(&self.var) {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut input: impl Read) -> Result<Self> {
        let bad = |m: &str| Error::Parse { line: 0, msg: m.to_string() };
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(|_| bad("truncated embedding header"))?;
        if &magic != MAGIC {
            return Err(bad("not a binary embedding file"));
        }
        let mut sizes = [0usize; 3];
        for s in &mut sizes {
            let mut b = [0u8; 8];
            input.read_exact(&mut b).map_err(|_| bad("truncated embedding header"))?;
            *s = u64::from_le_bytes(b) as usize;
        }
        let [timestamps, nodes, dim] = sizes;
        let len = timestamps
            .checked_mul(nodes)
            .and_then(|x| x.checked_mul(dim))
            .ok_or_else(|| bad("embedding sizes overflow"))?;
        let mut read_block = || -> Result<Vec<f64>> {
            let mut bytes = vec![0u8; len * 8];
            input.read_exact(&mut bytes).map_err(|_| bad("truncated embedding data"))?;
            Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
        };
        let mu = read_block()?;
        let var = read_block()?;
        Ok(Self { timestamps, nodes, dim, mu, var })
    }

    /// Writes CSV when the extension is `.csv`, binary otherwise.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        if is_csv(path) {
            self.write_csv(&mut w)
        } else {
            self.write_binary(&mut w)
        }
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        if is_csv(path) {
            Self::read_csv(file)
        } else {
            Self::read_binary(BufReader::new(file))
        }
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}
