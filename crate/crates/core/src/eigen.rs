//! Symmetric eigensolver for five-point stencil operators.
//!
//! The wanted eigenvalues sit at the top of the spectrum of `A`. With a
//! shift `sigma` above the spectrum, `B = sigma*I - A` is positive definite;
//! it is factored once with a banded Cholesky and Lanczos runs on `B^-1`,
//! whose largest eigenvalues `1/(sigma - lambda)` are well separated.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Unknowns at or below this count are solved densely.
pub const DENSE_LIMIT: usize = 1500;

const LANCZOS_MAX_STEPS: usize = 400;
const LANCZOS_TOL: f64 = 1e-13;
/// Steps spent at the conservative shift before re-shifting.
const PROBE_STEPS: usize = 60;

/// Symmetric operator on an `n_fast x n_slow` lattice; unknown `k` has
/// neighbours `k +/- 1` (same slow index) and `k +/- n_fast`.
#[derive(Debug, Clone)]
pub struct Stencil5 {
    pub n_fast: usize,
    pub n_slow: usize,
    pub diag: Vec<f64>,
    /// Coupling between `k` and `k + 1`; entries at the end of a fast run are ignored.
    pub off_fast: Vec<f64>,
    /// Coupling between `k` and `k + n_fast`.
    pub off_slow: Vec<f64>,
}

impl Stencil5 {
    pub fn len(&self) -> usize {
        self.n_fast * self.n_slow
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nf = self.n_fast;
        for k in 0..self.len() {
            let mut acc = self.diag[k] * x[k];
            if k % nf != 0 {
                acc += self.off_fast[k - 1] * x[k - 1];
            }
            if k % nf != nf - 1 {
                acc += self.off_fast[k] * x[k + 1];
            }
            if k >= nf {
                acc += self.off_slow[k - nf] * x[k - nf];
            }
            if k + nf < self.len() {
                acc += self.off_slow[k] * x[k + nf];
            }
            y[k] = acc;
        }
    }

    /// Upper bound on the spectrum (Gershgorin).
    pub fn spectral_upper_bound(&self) -> f64 {
        let nf = self.n_fast;
        (0..self.len())
            .map(|k| {
                let mut r = 0.0;
                if k % nf != 0 {
                    r += self.off_fast[k - 1].abs();
                }
                if k % nf != nf - 1 {
                    r += self.off_fast[k].abs();
                }
                if k >= nf {
                    r += self.off_slow[k - nf].abs();
                }
                if k + nf < self.len() {
                    r += self.off_slow[k].abs();
                }
                self.diag[k] + r
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        // i >= j
        let nf = self.n_fast;
        if i == j {
            self.diag[i]
        } else if i - j == 1 && i % nf != 0 {
            self.off_fast[j]
        } else if i - j == nf {
            self.off_slow[j]
        } else {
            0.0
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(self.n_fast)..=i {
                let v = self.entry(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }
}

/// Lower-triangular banded Cholesky factor, row-major with `bw + 1`
/// slots per row (slot `s` of row `i` holds column `i - bw + s`).
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    /// Factor `shift*I - op`.
    pub fn factor_shifted(op: &Stencil5, shift: f64) -> Result<Self> {
        let n = op.len();
        let bw = op.n_fast;
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let row_lo = i.saturating_sub(bw);
            for j in row_lo..=i {
                let mut s = if i == j {
                    shift - op.diag[i]
                } else {
                    -op.entry(i, j)
                };
                let k_lo = row_lo.max(j.saturating_sub(bw));
                if k_lo < j {
                    let ri = &l[i * w + (k_lo + bw - i)..i * w + (j + bw - i)];
                    let rj = &l[j * w + (k_lo + bw - j)..j * w + bw];
                    s -= dot(ri, rj);
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite(i));
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + (j + bw - i)] = s / l[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    /// Solve `L L^T x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &self.l[i * w + (lo + bw - i)..i * w + bw];
            let s = x[i] - dot(row, &x[lo..i]);
            x[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let xi = x[i] / self.l[i * w + bw];
            x[i] = xi;
            let lo = i.saturating_sub(bw);
            let row = &self.l[i * w + (lo + bw - i)..i * w + bw];
            for (xk, lik) in x[lo..i].iter_mut().zip(row) {
                *xk -= lik * xi;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorise.
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for t in 0..4 {
            acc[t] += a[4 * c + t] * b[4 * c + t];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// An eigenpair of the stencil operator; `vector` has unit 2-norm.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// The `count` largest eigenpairs, sorted descending.
pub fn largest_eigenpairs(op: &Stencil5, count: usize) -> Result<Vec<EigenPair>> {
    largest_eigenpairs_below(op, count, None)
}

/// As [`largest_eigenpairs`], with an optional caller-known bound on the
/// spectrum. A tight bound puts the shift close to the wanted end, which
/// matters when Gershgorin overestimates badly.
pub fn largest_eigenpairs_below(op: &Stencil5, count: usize, known_upper: Option<f64>) -> Result<Vec<EigenPair>> {
    let n = op.len();
    if n == 0 || count == 0 {
        return Ok(Vec::new());
    }
    let count = count.min(n);
    if n <= DENSE_LIMIT {
        return Ok(dense_largest(op, count));
    }
    let gershgorin = op.spectral_upper_bound();
    let upper = known_upper.map_or(gershgorin, |b| b.min(gershgorin));
    // Any shift above the spectrum keeps B positive definite; the closer
    // it sits to the top eigenvalue, the better separated the wanted end
    // of B^-1 is.
    let mut shift = upper + 1e-6 * upper.abs().max(1.0);
    let mut chol = BandedCholesky::factor_shifted(op, shift)?;
    let probe = lanczos_largest(n, count, PROBE_STEPS, |x, y| {
        y.copy_from_slice(x);
        chol.solve_in_place(y);
    });
    let pairs = match probe {
        Lanczos::Converged(p) => p,
        Lanczos::Stalled { top_theta, .. } => {
            // The Ritz estimate lies below the top eigenvalue; step up from
            // it until the shifted matrix becomes positive definite.
            let estimate = shift - 1.0 / top_theta;
            let mut gap = 1e-3 * (shift - estimate);
            while estimate + gap < shift {
                match BandedCholesky::factor_shifted(op, estimate + gap) {
                    Ok(c) => {
                        chol = c;
                        shift = estimate + gap;
                        break;
                    }
                    Err(Error::NotPositiveDefinite(_)) => gap *= 8.0,
                    Err(e) => return Err(e),
                }
            }
            match lanczos_largest(n, count, LANCZOS_MAX_STEPS, |x, y| {
                y.copy_from_slice(x);
                chol.solve_in_place(y);
            }) {
                Lanczos::Converged(p) => p,
                Lanczos::Stalled { steps, residual, .. } => {
                    return Err(Error::NoConvergence {
                        what: "shift-invert Lanczos",
                        iterations: steps,
                        residual,
                    })
                }
            }
        }
    };
    Ok(pairs
        .into_iter()
        .map(|(theta, vector)| EigenPair {
            value: shift - 1.0 / theta,
            vector,
        })
        .collect())
}

fn dense_largest(op: &Stencil5, count: usize) -> Vec<EigenPair> {
    let eig = SymmetricEigen::new(op.to_dense());
    let mut idx: Vec<usize> = (0..op.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    idx.into_iter()
        .take(count)
        .map(|k| EigenPair {
            value: eig.eigenvalues[k],
            vector: eig.eigenvectors.column(k).iter().copied().collect(),
        })
        .collect()
}

/// Lanczos with full reorthogonalisation for the largest eigenpairs of a
/// symmetric positive operator given as a closure.
enum Lanczos {
    Converged(Vec<(f64, Vec<f64>)>),
    Stalled { steps: usize, residual: f64, top_theta: f64 },
}

fn lanczos_largest(n: usize, count: usize, max_steps: usize, apply: impl Fn(&[f64], &mut [f64])) -> Lanczos {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nv = norm(&v0);
    v0.iter_mut().for_each(|x| *x /= nv);

    let max_steps = max_steps.min(n);
    let mut top_theta = 0.0;
    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut last_residual = f64::INFINITY;

    for step in 0..max_steps {
        apply(&basis[step], &mut w);
        let a = dot(&w, &basis[step]);
        alpha.push(a);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
            }
        }
        let b = norm(&w);
        let m = step + 1;
        let exhausted = b <= 1e-14 * a.abs().max(1.0) || m == n;
        if m >= count && (m % 5 == 0 || exhausted || m == max_steps) {
            let (theta, s) = tridiagonal_eigen(&alpha, &beta);
            let worst = (0..count.min(m))
                .map(|k| (b * s[(m - 1, k)]).abs() / theta[k].abs())
                .fold(0.0, f64::max);
            last_residual = worst;
            top_theta = theta[0];
            if worst < LANCZOS_TOL || exhausted {
                return Lanczos::Converged((0..count.min(m))
                    .map(|k| {
                        let mut x = vec![0.0; n];
                        for (r, v) in basis.iter().enumerate() {
                            let c = s[(r, k)];
                            x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += c * vi);
                        }
                        let nx = norm(&x);
                        x.iter_mut().for_each(|xi| *xi /= nx);
                        (theta[k], x)
                    })
                    .collect());
            }
        }
        if exhausted {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Lanczos::Stalled {
        steps: max_steps,
        residual: last_residual,
        top_theta,
    }
}

/// Eigen-decomposition of the Lanczos tridiagonal, values descending.
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = idx.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, idx[c])]);
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Discrete Dirichlet Laplacian on an nf x ns lattice with spacing 1.
    fn laplacian(nf: usize, ns: usize) -> Stencil5 {
        let n = nf * ns;
        Stencil5 {
            n_fast: nf,
            n_slow: ns,
            diag: vec![-4.0; n],
            off_fast: vec![1.0; n],
            off_slow: vec![1.0; n],
        }
    }

    fn exact_top(nf: usize, ns: usize, count: usize) -> Vec<f64> {
        let mut v = Vec::new();
        for p in 1..=nf {
            for q in 1..=ns {
                let s = |k: usize, n: usize| (k as f64 * std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin().powi(2);
                v.push(-4.0 * s(p, nf) - 4.0 * s(q, ns));
            }
        }
        v.sort_by(|a, b| b.total_cmp(a));
        v.truncate(count);
        v
    }

    #[test]
    fn banded_cholesky_solves() {
        let op = laplacian(7, 9);
        let chol = BandedCholesky::factor_shifted(&op, 0.5).unwrap();
        let x: Vec<f64> = (0..op.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        // b = (0.5 I - A) x
        let mut ax = vec![0.0; op.len()];
        op.apply(&x, &mut ax);
        let mut b: Vec<f64> = x.iter().zip(&ax).map(|(xi, a)| 0.5 * xi - a).collect();
        chol.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_shift_is_reported() {
        let op = laplacian(5, 5);
        assert!(matches!(
            BandedCholesky::factor_shifted(&op, -3.0),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn lanczos_matches_closed_form() {
        // 50 x 41 = 2050 unknowns, above the dense limit.
        let op = laplacian(41, 50);
        let got = largest_eigenpairs(&op, 4).unwrap();
        for (g, want) in got.iter().zip(exact_top(41, 50, 4)) {
            assert!((g.value - want).abs() < 1e-10, "{} vs {}", g.value, want);
            let mut av = vec![0.0; op.len()];
            op.apply(&g.vector, &mut av);
            let r: f64 = av.iter().zip(&g.vector).map(|(a, v)| (a - g.value * v).powi(2)).sum::<f64>().sqrt();
            assert!(r < 1e-8);
        }
    }

    #[test]
    fn dense_path_matches_closed_form() {
        let op = laplacian(11, 13);
        let got = largest_eigenpairs(&op, 3).unwrap();
        for (g, want) in got.iter().zip(exact_top(11, 13, 3)) {
            assert!((g.value - want).abs() < 1e-12);
        }
    }
}
