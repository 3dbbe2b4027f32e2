//! Plain-text formats: LIBSVM datasets, dense matrices, vectors and graph
//! topologies.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use balpa_core::distributed::Topology;
use balpa_core::generators::Dataset;
use balpa_core::{CsrMatrix, Matrix};

use crate::error::{BenchError, Result};

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path).map(BufReader::new).map_err(|e| BenchError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
        }
    }
    fs::File::create(path).map(BufWriter::new).map_err(|e| BenchError::io(path, e))
}

/// Parses LIBSVM lines `label idx:val idx:val ...` with 1-based indices.
/// Blank lines and `#` comments are skipped.
pub fn parse_libsvm_str(text: &str, path: &Path) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut n_features = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| BenchError::parse(path, line_no, format!("bad label {label_tok:?}")))?;
        let mut row = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| BenchError::parse(path, line_no, format!("expected idx:val, got {tok:?}")))?;
            let idx: i64 =
                idx.parse().map_err(|_| BenchError::parse(path, line_no, format!("bad index {idx:?}")))?;
            if idx < 1 {
                return Err(BenchError::parse(path, line_no, format!("index {idx} must be >= 1")));
            }
            let val: f64 =
                val.parse().map_err(|_| BenchError::parse(path, line_no, format!("bad value {val:?}")))?;
            let j = (idx - 1) as usize;
            n_features = n_features.max(j + 1);
            row.push((j, val));
        }
        rows.push(row);
        labels.push(label);
    }
    let samples = CsrMatrix::from_rows(n_features, &rows)?;
    Ok(Dataset::new(samples, labels)?)
}

pub fn parse_libsvm(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    parse_libsvm_str(&text, path)
}

pub fn write_libsvm(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = create(path)?;
    for (i, label) in data.labels.iter().enumerate() {
        let mut line = format!("{label}");
        for (j, v) in data.samples.row(i) {
            line.push_str(&format!(" {}:{}", j + 1, v));
        }
        writeln!(w, "{line}").map_err(|e| BenchError::io(path, e))?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

fn numbers(path: &Path, line_no: usize, line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| BenchError::parse(path, line_no, format!("bad number {t:?}"))))
        .collect()
}

/// Dense matrix: header `rows cols`, then values in row-major order
/// (any whitespace layout).
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut values = Vec::new();
    let mut header: Option<(usize, usize)> = None;
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| BenchError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            let dims: Vec<&str> = line.split_whitespace().collect();
            let parse = |t: &str| t.parse::<usize>().map_err(|_| BenchError::parse(path, i + 1, "bad header"));
            if dims.len() != 2 {
                return Err(BenchError::parse(path, i + 1, "header must be `rows cols`"));
            }
            header = Some((parse(dims[0])?, parse(dims[1])?));
            continue;
        }
        values.extend(numbers(path, i + 1, &line)?);
    }
    let (rows, cols) = header.ok_or_else(|| BenchError::parse(path, 1, "missing header"))?;
    if values.len() != rows * cols {
        return Err(BenchError::parse(path, 0, format!("expected {} values, found {}", rows * cols, values.len())));
    }
    Ok(Matrix::from_vec(rows, cols, values)?)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| BenchError::io(path, e);
    writeln!(w, "{} {}", m.rows(), m.cols()).map_err(io)?;
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", row.join(" ")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One value per line.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| BenchError::io(path, e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        out.push(t.parse().map_err(|_| BenchError::parse(path, i + 1, format!("bad number {t:?}")))?);
    }
    Ok(out)
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    for x in v {
        writeln!(w, "{x:e}").map_err(|e| BenchError::io(path, e))?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

/// First line `N`, then one `i j` edge per line, 0-indexed.
pub fn parse_topology_str(text: &str, path: &Path) -> Result<Topology> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (i0, first) = lines.next().ok_or_else(|| BenchError::parse(path, 1, "missing agent count"))?;
    let n: usize = first.trim().parse().map_err(|_| BenchError::parse(path, i0 + 1, "bad agent count"))?;
    let mut edges = Vec::new();
    for (i, line) in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let node = |t: &str| t.parse::<usize>().map_err(|_| BenchError::parse(path, i + 1, format!("bad node {t:?}")));
        if parts.len() != 2 {
            return Err(BenchError::parse(path, i + 1, "edge must be `i j`"));
        }
        edges.push((node(parts[0])?, node(parts[1])?));
    }
    Ok(Topology::from_edges(n, &edges)?)
}

pub fn read_topology(path: &Path) -> Result<Topology> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    parse_topology_str(&text, path)
}

pub fn write_topology(path: &Path, t: &Topology) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| BenchError::io(path, e);
    writeln!(w, "{}", t.num_agents()).map_err(io)?;
    for (i, j) in t.edges() {
        writeln!(w, "{i} {j}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| BenchError::io(path, e))?;
    w.flush().map_err(|e| BenchError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn libsvm_line() {
        let d = parse_libsvm_str("+1 1:0.5 3:2\n-1\n", p()).unwrap();
        assert_eq!(d.labels, vec![1.0, -1.0]);
        assert_eq!(d.n_features(), 3);
        assert_eq!(d.samples.row(0).collect::<Vec<_>>(), vec![(0, 0.5), (2, 2.0)]);
        assert_eq!(d.samples.row(1).count(), 0);
    }

    #[test]
    fn libsvm_zero_index_is_rejected() {
        let err = parse_libsvm_str("+1 1:1\n1 0:5\n", p()).unwrap_err();
        assert!(matches!(err, BenchError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn libsvm_bad_tokens() {
        assert!(parse_libsvm_str("x 1:1", p()).is_err());
        assert!(parse_libsvm_str("1 1-1", p()).is_err());
        assert!(parse_libsvm_str("1 1:abc", p()).is_err());
    }

    #[test]
    fn topology_text() {
        let t = parse_topology_str("3\n0 1\n1 2\n", p()).unwrap();
        assert_eq!(t.num_edges(), 2);
        assert!(parse_topology_str("3\n0 1\n", p()).is_err());
    }
}
