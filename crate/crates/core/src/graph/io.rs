//! Timestamped edge-list files: one edge per line, `src dst timestamp [weight]`,
//! separated by whitespace or commas. Lines starting with `#` are comments;
//! `# key=value` comments written by [`write_edge_list`] (`directed`,
//! `n_global`) are honored on load.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{DynamicGraph, Edge, Snapshot};
use crate::error::{Error, Result};

/// Rule mapping raw timestamps onto snapshot indices. Empty bins produce no
/// snapshot.
#[derive(Debug, Clone, PartialEq)]
pub enum Binning {
    /// Every distinct raw timestamp is its own snapshot.
    Exact,
    /// `bins` equal-width intervals spanning the observed time range.
    Uniform { bins: usize },
    /// Explicit, strictly increasing boundaries `b0 < b1 < ... < bk`;
    /// bin `j` is `[b_j, b_{j+1})`, the last bin is closed.
    Boundaries(Vec<f64>),
}

impl Binning {
    fn describe(&self, lo: f64, hi: f64) -> String {
        match self {
            Binning::Exact => "exact".to_string(),
            Binning::Uniform { bins } => format!("uniform bins={bins} range=[{lo}, {hi}]"),
            Binning::Boundaries(b) => format!("boundaries {b:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    /// Overrides the file's `directed` header; undirected when neither is set.
    pub directed: Option<bool>,
    pub binning: Binning,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            directed: None,
            binning: Binning::Exact,
        }
    }
}

struct RawEdge {
    src: String,
    dst: String,
    time: f64,
    weight: f64,
}

pub fn load_edge_list(path: impl AsRef<Path>, options: &LoadOptions) -> Result<DynamicGraph> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_edge_list(BufReader::new(file), options).map_err(|e| match e {
        Error::Empty(_) => Error::Empty(path.display().to_string()),
        other => other,
    })
}

pub fn read_edge_list(reader: impl Read, options: &LoadOptions) -> Result<DynamicGraph> {
    let mut header: HashMap<String, String> = HashMap::new();
    let mut raw = Vec::new();
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.trim().split_once('=') {
                header.insert(key.trim().to_string(), value.trim().to_string());
            }
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected `src dst timestamp [weight]`, got {} fields", fields.len()),
            });
        }
        let number = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line: lineno,
                    msg: format!("invalid {what} `{s}`"),
                })
        };
        raw.push(RawEdge {
            src: fields[0].to_string(),
            dst: fields[1].to_string(),
            time: number(fields[2], "timestamp")?,
            weight: match fields.get(3) {
                Some(w) => number(w, "weight")?,
                None => 1.0,
            },
        });
    }
    if raw.is_empty() {
        return Err(Error::Empty("edge list has no edges".into()));
    }

    let directed = match options.directed {
        Some(d) => d,
        None => match header.get("directed").map(String::as_str) {
            Some("true") => true,
            Some("false") | None => false,
            Some(other) => {
                return Err(Error::Config(format!("bad directed header `{other}`")));
            }
        },
    };
    let declared_n = match header.get("n_global") {
        Some(v) => Some(
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad n_global header `{v}`")))?,
        ),
        None => None,
    };

    let node_ids = node_universe(&raw, declared_n);
    let index: HashMap<&str, usize> = node_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let lo = raw.iter().map(|e| e.time).fold(f64::INFINITY, f64::min);
    let hi = raw.iter().map(|e| e.time).fold(f64::NEG_INFINITY, f64::max);
    let bin_of = bin_fn(&options.binning, lo, hi)?;

    let mut by_bin: BTreeMap<u64, Vec<Edge>> = BTreeMap::new();
    for e in &raw {
        let bin = bin_of(e.time).ok_or_else(|| {
            Error::Config(format!("timestamp {} falls outside the bin boundaries", e.time))
        })?;
        by_bin.entry(bin).or_default().push(Edge {
            src: index[e.src.as_str()],
            dst: index[e.dst.as_str()],
            weight: e.weight,
        });
    }
    let n = node_ids.len();
    let snapshots = by_bin
        .into_values()
        .enumerate()
        .map(|(t, edges)| Snapshot::new(t, n, directed, edges))
        .collect::<Result<Vec<_>>>()?;
    let g = DynamicGraph::new(snapshots, node_ids, directed)?;
    Ok(g.with_binning(options.binning.describe(lo, hi)))
}

/// Dense universe: identity on `0..n` when the header declares `n_global`
/// and every id fits, numeric order when all ids are integers, lexicographic
/// otherwise.
fn node_universe(raw: &[RawEdge], declared_n: Option<usize>) -> Vec<String> {
    let mut ids: Vec<&str> = raw.iter().flat_map(|e| [e.src.as_str(), e.dst.as_str()]).collect();
    ids.sort_unstable();
    ids.dedup();
    let numeric: Option<Vec<u64>> = ids.iter().map(|s| s.parse::<u64>().ok()).collect();
    match (numeric, declared_n) {
        (Some(nums), Some(n)) if nums.iter().all(|&v| (v as usize) < n) => {
            (0..n).map(|i| i.to_string()).collect()
        }
        (Some(mut nums), _) => {
            nums.sort_unstable();
            nums.iter().map(u64::to_string).collect()
        }
        (None, _) => ids.into_iter().map(str::to_string).collect(),
    }
}

fn bin_fn(binning: &Binning, lo: f64, hi: f64) -> Result<Box<dyn Fn(f64) -> Option<u64>>> {
    Ok(match binning.clone() {
        // order-preserving bit pattern for finite values
        Binning::Exact => Box::new(|x: f64| {
            let bits = x.to_bits();
            Some(if x >= 0.0 { bits | (1 << 63) } else { !bits })
        }),
        Binning::Uniform { bins } => {
            if bins == 0 {
                return Err(Error::Config("uniform binning needs at least one bin".into()));
            }
            let width = (hi - lo) / bins as f64;
            Box::new(move |x: f64| {
                if width == 0.0 {
                    return Some(0);
                }
                Some((((x - lo) / width).floor() as u64).min(bins as u64 - 1))
            })
        }
        Binning::Boundaries(b) => {
            if b.len() < 2 || b.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(
                    "bin boundaries must be strictly increasing with at least two entries".into(),
                ));
            }
            Box::new(move |x: f64| {
                let last = *b.last().expect("non-empty");
                if x < b[0] || x > last {
                    return None;
                }
                let j = b.partition_point(|&edge| edge <= x);
                Some(j.clamp(1, b.len() - 1) as u64 - 1)
            })
        }
    })
}

/// Writes `g` with snapshot indices as timestamps. Weights are emitted only
/// when some edge carries a weight other than 1.
pub fn write_edge_list(g: &DynamicGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_edges(g, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_edges(g: &DynamicGraph, out: &mut impl Write) -> std::io::Result<()> {
    let weighted = g
        .snapshots()
        .iter()
        .flat_map(|s| s.edges())
        .any(|e| e.weight != 1.0);
    writeln!(out, "# src dst timestamp{}", if weighted { " weight" } else { "" })?;
    writeln!(out, "# directed={}", g.directed())?;
    writeln!(out, "# n_global={}", g.n_global())?;
    let ids = g.node_ids();
    for s in g.snapshots() {
        for e in s.edges() {
            if weighted {
                writeln!(out, "{} {} {} {}", ids[e.src], ids[e.dst], s.t(), e.weight)?;
            } else {
                writeln!(out, "{} {} {}", ids[e.src], ids[e.dst], s.t())?;
            }
        }
    }
    Ok(())
}
