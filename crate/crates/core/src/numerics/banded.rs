//! Banded matrices and LU factorisation with partial pivoting.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals.
///
/// Rows are stored with extra room for the `kl` columns of fill-in that row
/// pivoting introduces above the band.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) { self.data[self.idx(i, j)] } else { 0.0 }
    }

    /// Sets an entry inside the band; panics outside it.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            y[i] = (lo..=hi).map(|j| self.data[self.idx(i, j)] * x[j]).sum();
        }
    }

    /// `I - s A`, the iteration matrix of an implicit stage.
    pub fn identity_minus(&self, s: f64) -> BandMatrix {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= -s);
        for i in 0..self.n {
            let k = m.idx(i, i);
            m.data[k] += 1.0;
        }
        m
    }
}

/// LU factors `P A = L U` of a banded matrix.
#[derive(Clone, Debug)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn factor(mut a: BandMatrix) -> Result<Self> {
        let n = a.n;
        let (kl, ku) = (a.kl, a.ku);
        let upper = kl + ku;
        let mut piv = vec![0; n];
        let mut row_k = vec![0.0; upper + 1];
        let mut row_p = vec![0.0; upper + 1];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a.data[a.idx(k, k)].abs();
            for i in k + 1..=last {
                let v = a.data[a.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singularity(format!("banded LU: zero pivot in column {k}")));
            }
            piv[k] = p;
            let jmax = (k + upper).min(n - 1);
            if p != k {
                for (o, j) in (k..=jmax).enumerate() {
                    row_k[o] = a.data[a.idx(k, j)];
                    row_p[o] = a.data[a.idx(p, j)];
                }
                for (o, j) in (k..=jmax).enumerate() {
                    let ik = a.idx(k, j);
                    a.data[ik] = row_p[o];
                    let ip = a.idx(p, j);
                    a.data[ip] = row_k[o];
                }
            }
            let pivot = a.data[a.idx(k, k)];
            for i in k + 1..=last {
                let ik = a.idx(i, k);
                let l = a.data[ik] / pivot;
                a.data[ik] = l;
                if l != 0.0 {
                    for j in k + 1..=jmax {
                        let kj = a.data[a.idx(k, j)];
                        let ij = a.idx(i, j);
                        a.data[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(Self { m: a, piv })
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let a = &self.m;
        let n = a.n;
        let upper = a.kl + a.ku;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + a.kl).min(n - 1) {
                    b[i] -= a.data[a.idx(i, k)] * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + upper).min(n - 1) {
                s -= a.data[a.idx(i, j)] * b[j];
            }
            b[i] = s / a.data[a.idx(i, i)];
        }
    }
}
