use serde::{Deserialize, Serialize};

/// A row-major `n x d` collection of points.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Points {
    dims: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dims: usize) -> Self {
        assert!(dims > 0, "points need at least one dimension");
        Points {
            dims,
            data: Vec::new(),
        }
    }

    pub fn with_capacity(dims: usize, n: usize) -> Self {
        let mut p = Points::new(dims);
        p.data.reserve(n * dims);
        p
    }

    /// Wraps a flat buffer whose length must be a multiple of `dims`.
    pub fn from_flat(dims: usize, data: Vec<f64>) -> Self {
        assert!(dims > 0 && data.len() % dims == 0, "ragged point buffer");
        Points { dims, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(dims: usize, rows: &[R]) -> Self {
        let mut p = Points::with_capacity(dims, rows.len());
        for r in rows {
            p.push(r.as_ref());
        }
        p
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dims);
        self.data.extend_from_slice(x);
    }

    pub fn extend(&mut self, other: &Points) {
        assert_eq!(other.dims, self.dims);
        self.data.extend_from_slice(&other.data);
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dims)
    }

    /// One coordinate across all points.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn select(&self, idx: &[usize]) -> Points {
        let mut p = Points::with_capacity(self.dims, idx.len());
        for &i in idx {
            p.push(self.row(i));
        }
        p
    }
}
