//! Dense complex linear algebra used throughout the crate.
//!
//! Many-body operators live on `(C^d)^{⊗n}` with site 0 as the most
//! significant tensor factor, so a basis index is the base-`d` number whose
//! digits are the single-site labels in site order.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are orthonormal eigenvectors matching `values`.
    pub vectors: CMat,
}

pub fn hermitian_eigen(m: &CMat) -> HermitianEigen {
    let n = m.nrows();
    // Symmetrize first so tiny non-Hermitian roundoff cannot leak into the solver.
    let h = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    HermitianEigen { values, vectors }
}

impl HermitianEigen {
    /// `f(H)` for a scalar function applied to the spectrum.
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// `f(H)` for Hermitian `H`.
pub fn hermitian_function(m: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    hermitian_eigen(m).apply(f)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Hilbert-Schmidt inner product `Tr(a† b)`.
pub fn hs_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().sum()
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_residual(a: &CMat) -> f64 {
    (a - a.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn checked_dim(d: usize, n_sites: usize, cap: usize) -> Result<usize> {
    let mut dim: usize = 1;
    for _ in 0..n_sites {
        dim = dim
            .checked_mul(d)
            .filter(|&x| x <= cap)
            .ok_or(Error::DimensionCap {
                dim: d.saturating_pow(n_sites as u32),
                cap,
            })?;
    }
    Ok(dim)
}

/// Adds `coef * op` to `target`, where `op` acts on the ordered tensor
/// product of `sites` (first listed site most significant) and as the
/// identity elsewhere.
pub fn add_local_operator(
    target: &mut CMat,
    op: &CMat,
    sites: &[usize],
    n_sites: usize,
    d: usize,
    coef: C64,
) {
    let m = sites.len();
    let local_dim = d.pow(m as u32);
    assert_eq!(op.nrows(), local_dim, "local operator has the wrong size");
    let dim = target.nrows();
    let strides: Vec<usize> = sites
        .iter()
        .map(|&s| d.pow((n_sites - 1 - s) as u32))
        .collect();
    let mut digits = vec![0usize; m];
    for j in 0..dim {
        let mut jl = 0;
        for (k, &st) in strides.iter().enumerate() {
            digits[k] = (j / st) % d;
            jl = jl * d + digits[k];
        }
        let base = j - digits
            .iter()
            .zip(&strides)
            .map(|(a, s)| a * s)
            .sum::<usize>();
        for kl in 0..local_dim {
            let v = op[(kl, jl)];
            if v.re == 0.0 && v.im == 0.0 {
                continue;
            }
            let mut i = base;
            let mut rem = kl;
            for k in (0..m).rev() {
                i += (rem % d) * strides[k];
                rem /= d;
            }
            target[(i, j)] += coef * v;
        }
    }
}

/// `op` on `sites` embedded in the full space.
pub fn embed(op: &CMat, sites: &[usize], n_sites: usize, d: usize) -> CMat {
    let dim = d.pow(n_sites as u32);
    let mut out = CMat::zeros(dim, dim);
    add_local_operator(&mut out, op, sites, n_sites, d, c(1.0));
    out
}

/// Tensor product of single-site vectors, site 0 most significant.
pub fn product_state(vectors: &[CVec]) -> CVec {
    let mut out = CVec::from_element(1, c(1.0));
    for v in vectors {
        out = out.kronecker(v);
    }
    out
}

/// Matrix of the basis permutation induced by a site map: site `s` of the
/// input lands on site `perm[s]` of the output.
pub fn site_permutation(perm: &[usize], d: usize) -> CMat {
    let n = perm.len();
    let dim = d.pow(n as u32);
    let mut p = CMat::zeros(dim, dim);
    for j in 0..dim {
        let mut i = 0;
        for (s, &t) in perm.iter().enumerate() {
            let digit = (j / d.pow((n - 1 - s) as u32)) % d;
            i += digit * d.pow((n - 1 - t) as u32);
        }
        p[(i, j)] = c(1.0);
    }
    p
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    match n {
        0 => Vec::new(),
        1 => vec![(0.0, 2.0)],
        _ => gauss_quad::legendre::GaussLegendre::new(n)
            .expect("n >= 2")
            .into_node_weight_pairs(),
    }
}

/// Gauss-Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embed_matches_kronecker_products() {
        let a = CMat::from_fn(2, 2, |i, j| C64::new(i as f64 + 1.0, j as f64));
        let b = CMat::from_fn(2, 2, |i, j| C64::new((i * j) as f64, 1.0));
        let id = CMat::identity(2, 2);
        let ab = kron(&a, &b);
        let full = embed(&ab, &[0, 2], 3, 2);
        let expected = kron(&kron(&a, &id), &b);
        assert!((full - expected).norm() < 1e-14);
        // Reversed site order swaps the roles of the factors.
        let ba = kron(&b, &a);
        let full = embed(&ba, &[2, 0], 3, 2);
        let expected = kron(&kron(&a, &id), &b);
        assert!((full - expected).norm() < 1e-14);
    }

    #[test]
    fn permutation_moves_factors() {
        let a = CMat::from_fn(3, 3, |i, j| C64::new((i + 2 * j) as f64, 0.5));
        let on0 = embed(&a, &[0], 2, 3);
        let on1 = embed(&a, &[1], 2, 3);
        let p = site_permutation(&[1, 0], 3);
        assert!((&p * on0 * p.adjoint() - on1).norm() < 1e-13);
    }

    #[test]
    fn function_of_hermitian_matrix() {
        let h = CMat::from_fn(3, 3, |i, j| {
            if i == j {
                c(i as f64)
            } else {
                C64::new(0.1, 0.2 * (i as f64 - j as f64))
            }
        });
        let h = (&h + h.adjoint()).scale(0.5);
        let sq = hermitian_function(&h, |x| c(x * x));
        assert!((sq - &h * &h).norm() < 1e-12);
        let eig = hermitian_eigen(&h);
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in 1..12 {
            let rule = gauss_legendre(n);
            for k in 0..(2 * n) {
                let q: f64 = rule.iter().map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 {
                    0.0
                } else {
                    2.0 / (k as f64 + 1.0)
                };
                assert!((q - exact).abs() < 1e-13, "n={n} k={k}");
            }
        }
    }
}
