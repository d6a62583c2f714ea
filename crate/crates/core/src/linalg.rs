//! Dense eigendecomposition and linear solves on top of `faer`.
//!
//! Non-Hermitian lattice operators with nonreciprocal hopping have eigenvalue
//! condition numbers that grow like `r^N`. Every general eigenproblem here is
//! preceded by a diagonal similarity: an optional caller-supplied gauge
//! (for chains, `diag(r^j)`, which row/column balancing cannot find because
//! interior rows and columns already have equal norms), followed by
//! Parlett-Reinsch balancing with radix-2 factors.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::model::C64;

const RADIX: f64 = 2.0;

/// Balances `a` in place (`a <- D^-1 a D`) and returns the diagonal of `D`.
fn balance_with<T: Copy>(
    a: &mut Mat<T>,
    mag: impl Fn(T) -> f64,
    scale: impl Fn(T, f64) -> T,
) -> Vec<f64> {
    let n = a.nrows();
    let mut d = vec![1.0; n];
    let sq = RADIX * RADIX;
    for _sweep in 0..10_000 {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += mag(a[(j, i)]);
                    r += mag(a[(i, j)]);
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sq;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sq;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                d[i] *= f;
                let inv = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] = scale(a[(i, j)], inv);
                    a[(j, i)] = scale(a[(j, i)], f);
                }
            }
        }
        if done {
            break;
        }
    }
    d
}

/// Eigenvalues and right eigenvectors (columns, unit 2-norm).
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    pub vectors: Vec<Vec<C64>>,
}

fn unscale_vectors(u: faer::MatRef<'_, c64>, d: &[f64]) -> Vec<Vec<C64>> {
    let n = u.nrows();
    (0..u.ncols())
        .map(|k| {
            let mut v: Vec<C64> = (0..n).map(|i| u[(i, k)] * d[i]).collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|z| *z /= norm);
            }
            v
        })
        .collect()
}

fn apply_gauge<T: Copy>(a: &mut Mat<T>, gauge: &[f64], scale: impl Fn(T, f64) -> T) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = scale(a[(i, j)], gauge[j] / gauge[i]);
        }
    }
}

fn check_gauge(n: usize, gauge: Option<&[f64]>) -> Result<()> {
    match gauge {
        Some(g) if g.len() != n => Err(Error::DimensionMismatch { expected: n, got: g.len() }),
        Some(g) if g.iter().any(|x| !(x.is_finite() && *x > 0.0)) => {
            Err(Error::InvalidParameter("gauge factors must be finite and positive".into()))
        }
        _ => Ok(()),
    }
}

fn prepare<T: Copy>(
    a: &Mat<T>,
    gauge: Option<&[f64]>,
    mag: impl Fn(T) -> f64,
    scale: impl Fn(T, f64) -> T + Copy,
) -> Result<(Mat<T>, Vec<f64>)> {
    check_gauge(a.nrows(), gauge)?;
    let mut b = a.clone();
    if let Some(g) = gauge {
        apply_gauge(&mut b, g, scale);
    }
    let mut d = balance_with(&mut b, mag, scale);
    if let Some(g) = gauge {
        d.iter_mut().zip(g).for_each(|(x, y)| *x *= y);
    }
    Ok((b, d))
}

fn cmag(z: c64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Eigenvalues of a general complex matrix, optionally pre-scaled by
/// `diag(gauge)` (`a -> G^-1 a G`).
pub fn eigenvalues_complex_gauged(a: &Mat<c64>, gauge: Option<&[f64]>) -> Result<Vec<C64>> {
    let (b, _) = prepare(a, gauge, cmag, |z, f| z * f)?;
    b.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))
}

pub fn eigen_complex_gauged(a: &Mat<c64>, gauge: Option<&[f64]>) -> Result<EigenDecomposition> {
    let (b, d) = prepare(a, gauge, cmag, |z, f| z * f)?;
    let e = b.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values = e.S().column_vector().iter().copied().collect();
    Ok(EigenDecomposition { values, vectors: unscale_vectors(e.U(), &d) })
}

pub fn eigenvalues_real_gauged(a: &Mat<f64>, gauge: Option<&[f64]>) -> Result<Vec<C64>> {
    let (b, _) = prepare(a, gauge, f64::abs, |x, f| x * f)?;
    b.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))
}

pub fn eigen_real_gauged(a: &Mat<f64>, gauge: Option<&[f64]>) -> Result<EigenDecomposition> {
    let (b, d) = prepare(a, gauge, f64::abs, |x, f| x * f)?;
    let e = b.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values = e.S().column_vector().iter().copied().collect();
    Ok(EigenDecomposition { values, vectors: unscale_vectors(e.U(), &d) })
}

/// Eigenvalues of a general complex matrix.
pub fn eigenvalues_complex(a: &Mat<c64>) -> Result<Vec<C64>> {
    eigenvalues_complex_gauged(a, None)
}

/// Eigenvalues and eigenvectors of a general complex matrix.
pub fn eigen_complex(a: &Mat<c64>) -> Result<EigenDecomposition> {
    eigen_complex_gauged(a, None)
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues_real(a: &Mat<f64>) -> Result<Vec<C64>> {
    eigenvalues_real_gauged(a, None)
}

/// Eigenvalues and (complex) eigenvectors of a general real matrix.
pub fn eigen_real(a: &Mat<f64>) -> Result<EigenDecomposition> {
    eigen_real_gauged(a, None)
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve_real(a: &Mat<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let lu = a.partial_piv_lu();
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NotConverged("singular linear system".into()))
    }
}

/// Sorts by real part, ties (equal to 1e-10 relative) by imaginary part.
pub fn spectral_order(a: &C64, b: &C64) -> std::cmp::Ordering {
    let scale = 1.0f64.max(a.norm()).max(b.norm());
    if (a.re - b.re).abs() > 1e-10 * scale {
        a.re.total_cmp(&b.re)
    } else {
        a.im.total_cmp(&b.im)
    }
}
