use nalgebra::DMatrix;

/// Strict-upper-triangle coefficients of a skew-symmetric `Ω`
/// (`Ω_ji = −Ω_ij`, `Ω_ii = 0`), packed row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewCoefficients {
    dim: usize,
    upper: Vec<f64>,
}

impl SkewCoefficients {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            upper: vec![0.0; dim * dim.saturating_sub(1) / 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn index(&self, i: usize, j: usize) -> usize {
        assert!(i < j && j < self.dim, "pair ({i}, {j}) out of range");
        i * (2 * self.dim - i - 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.index(i, j);
        self.upper[k] = value;
    }

    /// `(i, j, value)` for every `i < j`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let d = self.dim;
        (0..d)
            .flat_map(move |i| (i + 1..d).map(move |j| (i, j)))
            .zip(self.upper.iter())
            .map(|((i, j), &v)| (i, j, v))
    }

    /// `‖Ω‖²_F = 2·Σ value²`.
    pub fn norm_squared(&self) -> f64 {
        2.0 * self.upper.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
        m
    }
}
