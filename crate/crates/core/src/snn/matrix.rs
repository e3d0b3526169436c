use serde::{Deserialize, Serialize};

/// Dense row-major weight matrix. Row `r` holds the incoming weights of
/// post-synaptic neuron `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Returns `None` if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `out[r] += Σ_c W[r, c] · x[c]`, summing `c` in ascending order.
    pub fn mul_add_dense(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            let mut acc = 0.0;
            for (w, xv) in self.row(r).iter().zip(x) {
                acc += w * xv;
            }
            *o += acc;
        }
    }

    /// `out[r] += Σ_{c ∈ active} W[r, c]` for binary inputs, with `active`
    /// sorted ascending.
    pub fn mul_add_spikes(&self, active: &[usize], out: &mut [f64]) {
        if active.is_empty() {
            return;
        }
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            let row = self.row(r);
            let mut acc = 0.0;
            for &c in active {
                acc += row[c];
            }
            *o += acc;
        }
    }

    /// `out[c] += Σ_r W[r, c] · g[r]`.
    pub fn transpose_mul_add(&self, g: &[f64], out: &mut [f64]) {
        for (r, gr) in g.iter().enumerate().take(self.rows) {
            if *gr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += w * gr;
            }
        }
    }

    /// `W[r, c] += g[r]` for every `c ∈ active` (outer product with a spike vector).
    pub fn add_outer_spikes(&mut self, g: &[f64], active: &[usize]) {
        if active.is_empty() {
            return;
        }
        for (r, gr) in g.iter().enumerate().take(self.rows) {
            let row = self.row_mut(r);
            for &c in active {
                row[c] += gr;
            }
        }
    }

    /// `W[r, c] += g[r] · x[c]`.
    pub fn add_outer_dense(&mut self, g: &[f64], x: &[f64]) {
        for (r, gr) in g.iter().enumerate().take(self.rows) {
            for (w, xv) in self.row_mut(r).iter_mut().zip(x) {
                *w += gr * xv;
            }
        }
    }

    /// Keeps only the listed rows and columns, in the order given.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |r, c| self.get(rows[r], cols[c]))
    }

    pub fn map_in_place(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
