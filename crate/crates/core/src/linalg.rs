//! Small dense complex linear-algebra helpers shared by the physics modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn fro_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `max |m - m†|`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
/// Column `k` of the returned matrix is the eigenvector of eigenvalue `k`.
pub fn hermitian_eigh(m: &CMat, context: &str) -> Result<(Vec<f64>, CMat)> {
    if m.nrows() != m.ncols() {
        return Err(Error::numerical(context, "matrix is not square"));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    // Symmetrize first: the solver only reads one triangle and tiny
    // asymmetries from floating-point assembly would otherwise leak in.
    let sym = (m + m.adjoint()) * c(0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::numerical(context, format!("Hermitian eigensolver did not converge (n = {n})")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// `f(m)` for Hermitian `m`, evaluated through its eigen-decomposition.
pub fn hermitian_function<F>(m: &CMat, f: F, context: &str) -> Result<CMat>
where
    F: Fn(f64) -> C64,
{
    let (values, vectors) = hermitian_eigh(m, context)?;
    let n = values.len();
    let mut scaled = vectors.clone();
    for (j, &lambda) in values.iter().enumerate() {
        let fj = f(lambda);
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    Ok(scaled * vectors.adjoint())
}

/// Row-major vectorization: `vec(ρ)[i·n + j] = ρ[i, j]`.
pub fn vectorize(rho: &CMat) -> CVec {
    let n = rho.nrows();
    CVec::from_fn(n * n, |k, _| rho[(k / n, k % n)])
}

pub fn unvectorize(v: &CVec, n: usize) -> CMat {
    CMat::from_fn(n, n, |i, j| v[i * n + j])
}

/// Superoperator of `ρ ↦ A ρ B` in the row-major vectorization.
pub fn sandwich(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(&b.transpose())
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorted_and_orthonormal() {
        let m = CMat::from_row_slice(
            3,
            3,
            &[
                c(2.0),
                C64::new(0.0, 1.0),
                ZERO,
                C64::new(0.0, -1.0),
                c(-1.0),
                c(0.5),
                ZERO,
                c(0.5),
                c(0.3),
            ],
        );
        let (vals, vecs) = hermitian_eigh(&m, "test").unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let gram = vecs.adjoint() * &vecs;
        assert!(max_abs(&(gram - CMat::identity(3, 3))) < 1e-12);
        let recon = &vecs * CMat::from_diagonal(&CVec::from_iterator(3, vals.iter().map(|&x| c(x)))) * vecs.adjoint();
        assert!(max_abs(&(recon - m)) < 1e-12);
    }

    #[test]
    fn sandwich_matches_direct_product() {
        let a = CMat::from_fn(3, 3, |i, j| C64::new(i as f64 + 0.1 * j as f64, j as f64 - 1.0));
        let b = CMat::from_fn(3, 3, |i, j| C64::new((i * j) as f64, 0.5 * i as f64));
        let rho = CMat::from_fn(3, 3, |i, j| C64::new(1.0 + i as f64, (j as f64) * 0.3));
        let direct = &a * &rho * &b;
        let via_super = unvectorize(&(sandwich(&a, &b) * vectorize(&rho)), 3);
        assert!(max_abs(&(direct - via_super)) < 1e-12);
    }

    #[test]
    fn function_calculus_cos_sin_identity() {
        let x = CMat::from_fn(4, 4, |i, j| {
            if i + 1 == j || j + 1 == i {
                c(((i.max(j)) as f64).sqrt())
            } else {
                ZERO
            }
        });
        let cos = hermitian_function(&x, |v| c(v.cos()), "cos").unwrap();
        let sin = hermitian_function(&x, |v| c(v.sin()), "sin").unwrap();
        let id = &cos * &cos + &sin * &sin;
        assert!(max_abs(&(id - CMat::identity(4, 4))) < 1e-12);
    }
}
