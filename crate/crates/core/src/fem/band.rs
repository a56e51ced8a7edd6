//! Banded storage and in-place LU factorization without pivoting.
//!
//! The structured mesh numbers nodes row by row, so the tangent on the free
//! DOFs has a half bandwidth of about `2 * (nelx + 2)`. Pivoting is not
//! needed for the (possibly mildly indefinite) stiffness matrices met here;
//! a vanishing pivot is reported as a singular matrix.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    half_bandwidth: usize,
    /// Row-major, `2 * half_bandwidth + 1` entries per row.
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, half_bandwidth: usize) -> Self {
        let half_bandwidth = half_bandwidth.min(n.saturating_sub(1));
        Self {
            n,
            half_bandwidth,
            data: vec![0.0; n * (2 * half_bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bandwidth
    }

    fn width(&self) -> usize {
        2 * self.half_bandwidth + 1
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.half_bandwidth, "({i}, {j}) outside the band");
        i * self.width() + j + self.half_bandwidth - i
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i.abs_diff(j) <= self.half_bandwidth
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.offset(i, j)]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let k = self.offset(i, j);
        self.data[k] += value;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let b = self.half_bandwidth;
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(b);
                let hi = (i + b).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.offset(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Largest `|A_ij - A_ji|` and largest `|A_ij|`.
    pub fn asymmetry(&self) -> (f64, f64) {
        let mut diff: f64 = 0.0;
        let mut max: f64 = 0.0;
        for i in 0..self.n {
            let hi = (i + self.half_bandwidth).min(self.n.saturating_sub(1));
            for j in i..=hi {
                let (a, b) = (self.get(i, j), self.get(j, i));
                diff = diff.max((a - b).abs());
                max = max.max(a.abs()).max(b.abs());
            }
        }
        (diff, max)
    }

    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let b = self.half_bandwidth;
        let w = self.width();
        let scale = (0..n)
            .map(|i| self.data[i * w + b].abs())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        for k in 0..n {
            let pivot = self.data[k * w + b];
            if !(pivot.abs() > 1e-14 * scale) || !pivot.is_finite() {
                return Err(Error::SingularMatrix { equation: k });
            }
            let last = (k + b).min(n - 1);
            let (head, tail) = self.data.split_at_mut((k + 1) * w);
            // Row k, columns k+1..=last.
            let pivot_row = &head[k * w + b + 1..k * w + b + 1 + (last - k)];
            for i in k + 1..=last {
                let row = &mut tail[(i - k - 1) * w..(i - k) * w];
                let col_k = k + b - i;
                let l = row[col_k] / pivot;
                row[col_k] = l;
                if l == 0.0 {
                    continue;
                }
                let start = col_k + 1;
                for (r, &p) in row[start..start + (last - k)].iter_mut().zip(pivot_row) {
                    *r -= l * p;
                }
            }
        }
        Ok(BandLu { lu: self })
    }
}

/// Unit-lower/upper factors stored in the band.
#[derive(Debug, Clone)]
pub struct BandLu {
    lu: BandMatrix,
}

impl BandLu {
    pub fn dim(&self) -> usize {
        self.lu.n
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, b, w) = (self.lu.n, self.lu.half_bandwidth, self.lu.width());
        let d = &self.lu.data;
        let mut x = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let mut s = x[i];
            for j in lo..i {
                s -= d[i * w + j + b - i] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + b).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=hi {
                s -= d[i * w + j + b - i] * x[j];
            }
            x[i] = s / d[i * w + b];
        }
        x
    }

    /// Solves `A^T x = rhs`.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, b, w) = (self.lu.n, self.lu.half_bandwidth, self.lu.width());
        let d = &self.lu.data;
        let mut x = rhs.to_vec();
        // U^T z = rhs (forward).
        for i in 0..n {
            x[i] /= d[i * w + b];
            let xi = x[i];
            let hi = (i + b).min(n - 1);
            for j in i + 1..=hi {
                x[j] -= d[i * w + j + b - i] * xi;
            }
        }
        // L^T x = z (backward, unit diagonal).
        for i in (0..n).rev() {
            let xi = x[i];
            let lo = i.saturating_sub(b);
            for j in lo..i {
                x[j] -= d[i * w + j + b - i] * xi;
            }
        }
        x
    }
}
