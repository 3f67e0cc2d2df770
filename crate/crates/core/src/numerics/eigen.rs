//! Dense symmetric eigensolvers.
//!
//! Matrices up to [`JACOBI_MAX_DIM`] are diagonalized with cyclic Jacobi
//! rotations. Larger ones are reduced to tridiagonal form with Householder
//! reflections and finished with implicit-shift QL. Every returned pair is
//! checked against `‖Mv − λv‖₂`, so a silent loss of accuracy surfaces as
//! [`Error::Convergence`].

use crate::error::{Error, Result};
use crate::numerics::matrix::{dot, Matrix};

pub const JACOBI_MAX_DIM: usize = 64;
pub const SYMMETRY_TOL: f64 = 1e-9;
pub const RESIDUAL_TOL: f64 = 1e-7;
const MAX_JACOBI_SWEEPS: usize = 100;
const MAX_QL_ITERATIONS: usize = 10_000;

/// Eigenpairs in ascending eigenvalue order. `vectors` holds one unit
/// eigenvector per column.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }

    /// Keeps the first `k` pairs.
    fn truncate(self, k: usize) -> SymEigen {
        let n = self.vectors.rows();
        SymEigen {
            values: self.values[..k].to_vec(),
            vectors: Matrix::from_fn(n, k, |r, c| self.vectors[(r, c)]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenMethod {
    /// Pick by size.
    Auto,
    Jacobi,
    Tridiagonal,
}

/// The `k` smallest eigenpairs of a symmetric matrix.
pub fn sym_eigs_smallest(m: &Matrix, k: usize) -> Result<SymEigen> {
    if k > m.rows() {
        return Err(Error::InvalidInput(format!(
            "requested {k} eigenpairs of a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    Ok(sym_eigen(m, EigenMethod::Auto)?.truncate(k))
}

/// Full decomposition, ascending.
pub fn sym_eigen(m: &Matrix, method: EigenMethod) -> Result<SymEigen> {
    let asym = m
        .asymmetry()
        .ok_or_else(|| Error::dims("sym_eigen", "square matrix", format!("{:?}", m.shape())))?;
    if asym > SYMMETRY_TOL {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric (max |a_ij - a_ji| = {asym:e})"
        )));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(SymEigen {
            values: vec![],
            vectors: Matrix::zeros(0, 0),
        });
    }
    let use_jacobi = match method {
        EigenMethod::Auto => n <= JACOBI_MAX_DIM,
        EigenMethod::Jacobi => true,
        EigenMethod::Tridiagonal => false,
    };
    let (values, vectors, iterations) = if use_jacobi {
        jacobi(m)?
    } else {
        tridiagonal_ql(m)?
    };
    let eig = sorted(values, vectors);
    verify(m, &eig, iterations)?;
    Ok(eig)
}

fn sorted(values: Vec<f64>, vectors: Matrix) -> SymEigen {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    SymEigen {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: Matrix::from_fn(n, n, |r, c| vectors[(r, order[c])]),
    }
}

fn verify(m: &Matrix, eig: &SymEigen, iterations: usize) -> Result<()> {
    let n = m.rows();
    let tol = RESIDUAL_TOL * m.max_abs().max(1.0);
    let mut mv = vec![0.0; n];
    for (i, &lambda) in eig.values.iter().enumerate() {
        let v = eig.vector(i);
        mv.iter_mut().for_each(|x| *x = 0.0);
        m.mul_vec_acc(&v, &mut mv);
        let residual = mv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if !residual.is_finite() || residual > tol {
            return Err(Error::Convergence {
                iterations,
                residual,
            });
        }
    }
    Ok(())
}

fn jacobi(m: &Matrix) -> Result<(Vec<f64>, Matrix, usize)> {
    let n = m.rows();
    let mut a = m.clone();
    // Symmetrize exactly so rotations see a truly symmetric matrix.
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return Ok((vec![0.0; n], v, 0));
    }
    let mut sweeps = 0;
    loop {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        if sweeps == MAX_JACOBI_SWEEPS {
            return Err(Error::Convergence {
                iterations: sweeps,
                residual: off.sqrt(),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                a[(p, p)] -= t * apq;
                a[(q, q)] += t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        let np = c * arp - s * arq;
                        let nq = s * arp + c * arq;
                        a[(r, p)] = np;
                        a[(p, r)] = np;
                        a[(r, q)] = nq;
                        a[(q, r)] = nq;
                    }
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }
    Ok(((0..n).map(|i| a[(i, i)]).collect(), v, sweeps))
}

/// Householder tridiagonalization followed by implicit QL.
fn tridiagonal_ql(m: &Matrix) -> Result<(Vec<f64>, Matrix, usize)> {
    let n = m.rows();
    let mut v = m.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    // Householder reduction to tridiagonal form.
    d.copy_from_slice(v.row(n - 1));
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;

    // Implicit QL on the tridiagonal (d, e).
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    let mut iterations = 0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut mm = l;
        while mm < n - 1 && e[mm].abs() > eps * tst1 {
            mm += 1;
        }
        if mm > l {
            loop {
                iterations += 1;
                if iterations > MAX_QL_ITERATIONS {
                    return Err(Error::Convergence {
                        iterations,
                        residual: e[l].abs(),
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[mm];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..mm).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok((d, v, iterations))
}

/// Largest `|⟨v_i, v_j⟩ − δ_ij|` over the returned columns.
pub fn orthonormality_error(vectors: &Matrix) -> f64 {
    let k = vectors.cols();
    let cols: Vec<Vec<f64>> = (0..k).map(|c| vectors.column(c)).collect();
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in i..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(&cols[i], &cols[j]) - target).abs());
        }
    }
    worst
}
