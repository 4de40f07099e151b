//! Dense complex eigensolver for the small non-normal matrices of the linear analysis.
//!
//! Householder reduction to upper Hessenberg form, then single-shift QR with
//! Wilkinson shifts applied through Givens rotations to the whole matrix, so the
//! result is a Schur form `A = Z T Zᴴ`. Eigenvectors come from back-substitution on `T`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{LbmError, Result};

type C = Complex64;

/// Eigenvalues and, optionally, unit-norm right eigenvectors (as columns).
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<C>,
    pub vectors: Option<DMatrix<C>>,
}

/// Relative deflation threshold on subdiagonal entries.
pub const DEFLATION_TOL: f64 = 1e-13;

/// Iterations allowed per matrix row.
pub const ITERATIONS_PER_ROW: usize = 100;

fn frobenius(a: &DMatrix<C>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Reduces `a` to Hessenberg form in place and returns the accumulated unitary factor.
fn hessenberg(a: &mut DMatrix<C>) -> DMatrix<C> {
    let n = a.nrows();
    let mut q = DMatrix::<C>::identity(n, n);
    let mut v = vec![C::new(0.0, 0.0); n];
    for k in 0..n.saturating_sub(2) {
        let norm: f64 = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { C::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        for i in k + 1..n {
            v[i] = a[(i, k)];
        }
        v[k + 1] -= alpha;
        let vn: f64 = (k + 1..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for vi in v.iter_mut().take(n).skip(k + 1) {
            *vi /= vn;
        }
        // A ← (I − 2vvᴴ) A
        for j in k..n {
            let w: C = (k + 1..n).map(|i| v[i].conj() * a[(i, j)]).sum();
            for i in k + 1..n {
                a[(i, j)] -= 2.0 * v[i] * w;
            }
        }
        // A ← A (I − 2vvᴴ), Q ← Q (I − 2vvᴴ)
        for m in [&mut *a, &mut q] {
            for i in 0..n {
                let w: C = (k + 1..n).map(|j| m[(i, j)] * v[j]).sum();
                for j in k + 1..n {
                    m[(i, j)] -= 2.0 * w * v[j].conj();
                }
            }
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = C::new(0.0, 0.0);
        }
    }
    q
}

/// `(c, s)` with `[c s; −s̄ c] [a; b] = [r; 0]`.
fn givens(a: C, b: C) -> (f64, C) {
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, C::new(0.0, 0.0));
    }
    let na = a.norm();
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let r = na.hypot(nb);
    (na / r, (a / na) * b.conj() / r)
}

fn wilkinson_shift(a: C, b: C, c: C, d: C) -> C {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let (m1, m2) = (mid + disc, mid - disc);
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// Schur decomposition `A = Z T Zᴴ` of a square complex matrix.
pub fn schur(a: &DMatrix<C>) -> Result<(DMatrix<C>, DMatrix<C>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(LbmError::InvalidArgument(format!(
            "eigensolver needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LbmError::InvalidArgument("matrix has non-finite entries".into()));
    }
    let mut t = a.clone();
    let mut z = hessenberg(&mut t);
    let scale = frobenius(a);
    let abs_tol = DEFLATION_TOL * scale;
    let cap = ITERATIONS_PER_ROW * n.max(1);

    let mut rot: Vec<(f64, C)> = Vec::with_capacity(n);
    let mut iterations = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = n.saturating_sub(1);
    while hi > 0 {
        // locate the bottom of the active block
        let mut lo = hi;
        while lo > 0 {
            let sub = t[(lo, lo - 1)].norm();
            let local = t[(lo, lo)].norm() + t[(lo - 1, lo - 1)].norm();
            if sub <= abs_tol || sub <= f64::EPSILON * local {
                t[(lo, lo - 1)] = C::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        iterations += 1;
        since_deflation += 1;
        if iterations > cap {
            return Err(LbmError::NoConvergence {
                iterations: cap,
                context: format!("{n}x{n} matrix, Frobenius norm {scale:.6e}, unreduced block {lo}..={hi}"),
            });
        }

        let mu = if since_deflation % 11 == 10 {
            // exceptional shift breaks symmetric stagnation cycles
            t[(hi, hi)] + C::new(0.75, 0.5) * t[(hi, hi - 1)].norm()
        } else {
            wilkinson_shift(t[(hi - 1, hi - 1)], t[(hi - 1, hi)], t[(hi, hi - 1)], t[(hi, hi)])
        };

        for i in lo..=hi {
            t[(i, i)] -= mu;
        }
        rot.clear();
        for i in lo..hi {
            let (c, s) = givens(t[(i, i)], t[(i + 1, i)]);
            for j in i..n {
                let x = t[(i, j)];
                let y = t[(i + 1, j)];
                t[(i, j)] = c * x + s * y;
                t[(i + 1, j)] = -s.conj() * x + c * y;
            }
            t[(i + 1, i)] = C::new(0.0, 0.0);
            rot.push((c, s));
        }
        for (off, &(c, s)) in rot.iter().enumerate() {
            let i = lo + off;
            let rows = (i + 2).min(hi + 1);
            for r in 0..rows {
                let x = t[(r, i)];
                let y = t[(r, i + 1)];
                t[(r, i)] = x * c + y * s.conj();
                t[(r, i + 1)] = -x * s + y * c;
            }
            for r in 0..n {
                let x = z[(r, i)];
                let y = z[(r, i + 1)];
                z[(r, i)] = x * c + y * s.conj();
                z[(r, i + 1)] = -x * s + y * c;
            }
        }
        for i in lo..=hi {
            t[(i, i)] += mu;
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = C::new(0.0, 0.0);
        }
    }
    Ok((z, t))
}

/// Eigenvalues of `a`, with eigenvectors when `vectors` is set.
pub fn eig(a: &DMatrix<C>, vectors: bool) -> Result<Eigen> {
    let (z, t) = schur(a)?;
    let n = t.nrows();
    let values: Vec<C> = (0..n).map(|i| t[(i, i)]).collect();
    if !vectors {
        return Ok(Eigen { values, vectors: None });
    }
    let small = f64::EPSILON * frobenius(&t).max(f64::MIN_POSITIVE);
    let mut x = vec![C::new(0.0, 0.0); n];
    let mut out = DMatrix::<C>::zeros(n, n);
    for k in 0..n {
        x.iter_mut().for_each(|v| *v = C::new(0.0, 0.0));
        x[k] = C::new(1.0, 0.0);
        let lk = t[(k, k)];
        for i in (0..k).rev() {
            let mut sum = t[(i, k)];
            for j in i + 1..k {
                sum += t[(i, j)] * x[j];
            }
            let mut den = t[(i, i)] - lk;
            if den.norm() < small {
                den = C::new(small, 0.0);
            }
            x[i] = -sum / den;
            let big = x[i].norm();
            if big > 1e100 {
                for v in x.iter_mut().take(k + 1) {
                    *v /= big;
                }
            }
        }
        let mut norm = 0.0;
        for r in 0..n {
            let v: C = (0..=k).map(|j| z[(r, j)] * x[j]).sum();
            out[(r, k)] = v;
            norm += v.norm_sqr();
        }
        let norm = norm.sqrt();
        for r in 0..n {
            out[(r, k)] /= norm;
        }
    }
    Ok(Eigen { values, vectors: Some(out) })
}
