use crate::error::{Result, TensorError};

/// Compressed sparse row matrix used for constant (non-trainable) inputs such
/// as stacks of adjacency rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends one row given as `(column, value)` pairs.
    pub fn push_row<I>(&mut self, entries: I) -> Result<()>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        for (c, v) in entries {
            if c >= self.cols {
                return Err(TensorError::Invalid(format!(
                    "column {c} out of range for width {}",
                    self.cols
                )));
            }
            if !v.is_finite() {
                return Err(TensorError::NonFinite { op: "csr" });
            }
            if v != 0.0 {
                self.indices.push(c);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
        self.rows += 1;
        Ok(())
    }

    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(TensorError::ShapeMismatch {
                op: "csr",
                left: vec![rows, cols],
                right: vec![data.len()],
            });
        }
        let mut m = Self::new(cols);
        for r in 0..rows {
            m.push_row(data[r * cols..(r + 1) * cols].iter().copied().enumerate())?;
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out[r * self.cols + c] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_drops_zeros() {
        let dense = [0.0, 1.0, 0.0, 2.0, 0.0, 3.0];
        let m = CsrMatrix::from_dense(2, 3, &dense).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.to_dense(), dense.to_vec());
    }

    #[test]
    fn rejects_out_of_range_column() {
        let mut m = CsrMatrix::new(2);
        assert!(m.push_row([(2, 1.0)]).is_err());
    }
}
