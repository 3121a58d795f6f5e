//! Householder QR with column pivoting.
//!
//! Only the reflectors are kept: callers need `Qᵀv` and projections of
//! arbitrary vectors onto the numerical column space, never `Q` itself.

use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct PivotedQr {
    nrows: usize,
    rank: usize,
    /// Reflector `k` occupies `vecs[k * nrows + k ..][.. nrows - k]`, leading entry 1.
    vecs: Vec<f64>,
    taus: Vec<f64>,
}

impl PivotedQr {
    /// Factor `a`. A diagonal entry of `R` counts toward the rank iff
    /// `|R_jj| > rel_tol * max_i |R_ii|`.
    pub fn new(a: &DMatrix<f64>, rel_tol: f64) -> Self {
        let (n, k) = a.shape();
        let mut w: Vec<f64> = a.as_slice().to_vec();
        let mut vecs = Vec::new();
        let mut taus = Vec::new();
        let steps = n.min(k);
        let mut r_max = 0.0_f64;

        for j in 0..steps {
            // Exact trailing column norms; cheap next to the update below and
            // avoids the cancellation problems of norm downdating.
            let (piv, piv_norm) = (j..k)
                .map(|c| (c, norm2(&w[c * n + j..(c + 1) * n])))
                .fold((j, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if j == 0 {
                r_max = piv_norm;
            }
            if piv_norm <= rel_tol * r_max || piv_norm == 0.0 {
                break;
            }
            if piv != j {
                for i in 0..n {
                    w.swap(j * n + i, piv * n + i);
                }
            }

            let col = &mut w[j * n + j..(j + 1) * n];
            let alpha = col[0];
            let beta = if alpha >= 0.0 { -piv_norm } else { piv_norm };
            let tau = (beta - alpha) / beta;
            let scale = 1.0 / (alpha - beta);
            let mut v = vec![0.0; n];
            v[j] = 1.0;
            for i in 1..col.len() {
                v[j + i] = col[i] * scale;
            }
            col[0] = beta;
            for c in col.iter_mut().skip(1) {
                *c = 0.0;
            }
            for c in j + 1..k {
                let tail = &mut w[c * n + j..(c + 1) * n];
                reflect(&v[j..], tau, tail);
            }
            vecs.extend_from_slice(&v);
            taus.push(tau);
        }

        let rank = taus.len();
        Self {
            nrows: n,
            rank,
            vecs,
            taus,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Overwrite `v` with `Qᵀv`.
    pub fn apply_qt(&self, v: &mut [f64]) {
        debug_assert_eq!(v.len(), self.nrows);
        let n = self.nrows;
        for k in 0..self.rank {
            let h = &self.vecs[k * n + k..(k + 1) * n];
            reflect(h, self.taus[k], &mut v[k..]);
        }
    }

    /// Overwrite `v` with `Qv`.
    pub fn apply_q(&self, v: &mut [f64]) {
        debug_assert_eq!(v.len(), self.nrows);
        let n = self.nrows;
        for k in (0..self.rank).rev() {
            let h = &self.vecs[k * n + k..(k + 1) * n];
            reflect(h, self.taus[k], &mut v[k..]);
        }
    }

    /// `‖(I − P)v‖²`.
    pub fn residual_ss(&self, v: &[f64]) -> f64 {
        let mut t = v.to_vec();
        self.apply_qt(&mut t);
        t[self.rank..].iter().map(|x| x * x).sum()
    }

    /// `(I − P)v`, computed through `Qᵀ` so that components in the column
    /// space cancel exactly rather than by subtraction.
    pub fn residual(&self, v: &[f64]) -> Vec<f64> {
        let mut t = v.to_vec();
        self.apply_qt(&mut t);
        for x in &mut t[..self.rank] {
            *x = 0.0;
        }
        self.apply_q(&mut t);
        t
    }

    /// `(‖Pv‖², ‖(I − P)v‖²)`.
    pub fn split_ss(&self, v: &[f64]) -> (f64, f64) {
        let mut t = v.to_vec();
        self.apply_qt(&mut t);
        let head = t[..self.rank].iter().map(|x| x * x).sum();
        let tail = t[self.rank..].iter().map(|x| x * x).sum();
        (head, tail)
    }

    /// `Pv`, the orthogonal projection onto the numerical column space.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut t = v.to_vec();
        self.apply_qt(&mut t);
        for x in &mut t[self.rank..] {
            *x = 0.0;
        }
        self.apply_q(&mut t);
        t
    }
}

#[inline]
fn reflect(h: &[f64], tau: f64, x: &mut [f64]) {
    let d: f64 = h.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let s = tau * d;
    if s != 0.0 {
        for (xi, hi) in x.iter_mut().zip(h) {
            *xi -= s * hi;
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    // Scaled to avoid overflow for large entries.
    let amax = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if amax == 0.0 {
        return 0.0;
    }
    let s: f64 = x.iter().map(|v| (v / amax) * (v / amax)).sum();
    amax * s.sqrt()
}
