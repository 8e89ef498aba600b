use crate::error::{Error, Result};

/// Symmetric positive definite matrix in lower band storage, with an
/// in-place Cholesky factorization.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    // row i holds A[i][i - bw ..= i], zero-padded on the left
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSpd {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (self.bw + j - i)
    }

    /// Add `v` to entry `(i, j)`, `j <= i`, `i - j <= bandwidth`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.bw);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn multiply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    pub fn cholesky(mut self) -> Result<CholeskyFactor> {
        let bw = self.bw;
        for i in 0..self.n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let mut s = self.data[self.idx(i, j)];
                for k in lo..j {
                    s -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite {
                            op: "fem::cholesky",
                            row: i,
                            pivot: s,
                        });
                    }
                    let k = self.idx(i, i);
                    self.data[k] = s.sqrt();
                } else {
                    let k = self.idx(i, j);
                    self.data[k] = s / self.data[self.idx(j, j)];
                }
            }
        }
        Ok(CholeskyFactor { l: self })
    }
}

#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: BandedSpd,
}

impl CholeskyFactor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.l;
        let n = l.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(l.bw);
            let mut s = y[i];
            for k in lo..i {
                s -= l.data[l.idx(i, k)] * y[k];
            }
            y[i] = s / l.data[l.idx(i, i)];
        }
        for i in (0..n).rev() {
            let hi = (i + l.bw).min(n - 1);
            let mut s = y[i];
            for k in i + 1..=hi {
                s -= l.data[l.idx(k, i)] * y[k];
            }
            y[i] = s / l.data[l.idx(i, i)];
        }
        y
    }
}
