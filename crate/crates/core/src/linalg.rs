//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

pub fn frobenius_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Unitary DFT matrix of order `n`: entry `(k, l) = exp(-j 2 pi k l / n) / sqrt(n)`.
pub fn dft_matrix(n: usize) -> CMat {
    let scale = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |k, l| {
        let kl = (k * l) % n;
        cis(-2.0 * std::f64::consts::PI * kl as f64 / n as f64) * scale
    })
}

pub fn real_diag(values: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(
        values.len(),
        values.iter().map(|&v| Complex64::new(v, 0.0)),
    ))
}

/// Columns of `m` selected by `indices`, in the given order.
pub fn select_columns(m: &CMat, indices: &[usize]) -> CMat {
    CMat::from_fn(m.nrows(), indices.len(), |r, c| m[(r, indices[c])])
}

pub fn select_rows(m: &CMat, indices: &[usize]) -> CMat {
    CMat::from_fn(indices.len(), m.ncols(), |r, c| m[(indices[r], c)])
}

/// Singular values in descending order, with right singular vectors as the
/// columns of the returned matrix (`ncols` x `min(nrows, ncols)`).
pub fn svd_sorted(m: &CMat) -> (Vec<f64>, CMat, CMat) {
    let svd = SVD::new(m.clone(), true, true);
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested V^h").adjoint();
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    // stable: ties keep the original index order
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| s[i]).collect();
    (
        values,
        select_columns(&u, &order),
        select_columns(&v, &order),
    )
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Closest unitary matrix in Frobenius norm (polar factor `U V^h`).
pub fn polar_unitary(m: &CMat) -> Result<CMat> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "polar retraction needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let svd = SVD::new(m.clone(), true, true);
    Ok(svd.u.expect("requested U") * svd.v_t.expect("requested V^h"))
}

/// Canonical `r x n` factor `R` with `R^h R = G^h G`, where `r` is the numerical
/// rank of `G`. Any `G' = Q G` with unitary `Q` maps to the same factor (up to
/// rounding), which makes it a fixed representative for left-unitary orbits.
pub fn gram_factor(g: &CMat) -> CMat {
    let n = g.ncols();
    if n == 0 || g.nrows() == 0 {
        return CMat::zeros(0, n);
    }
    let gram = g.adjoint() * g;
    let eig = SymmetricEigen::new(gram);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    if lmax <= 0.0 {
        return CMat::zeros(0, n);
    }
    let mut keep: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > lmax * 1e-13)
        .collect();
    keep.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut r = CMat::zeros(keep.len(), n);
    for (row, &i) in keep.iter().enumerate() {
        let scale = eig.eigenvalues[i].sqrt();
        let v = eig.eigenvectors.column(i);
        // fix the phase so the largest-magnitude entry is real positive
        let pivot = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .map(|(j, _)| j)
            .unwrap_or(0);
        let phase = if v[pivot].norm() > 0.0 {
            v[pivot].conj() / v[pivot].norm()
        } else {
            ONE
        };
        for c in 0..n {
            r[(row, c)] = (v[c] * phase).conj() * scale;
        }
    }
    r
}

/// `max |A - B|` entry-wise.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dft_is_unitary() {
        for n in [1, 2, 7, 16] {
            let f = dft_matrix(n);
            let err = max_abs_diff(&(f.adjoint() * &f), &CMat::identity(n, n));
            assert!(err < 1e-12, "n={n} err={err}");
        }
    }

    #[test]
    fn gram_factor_reproduces_gram() {
        let g = CMat::from_fn(3, 2, |r, c| {
            Complex64::new((r + 2 * c) as f64, r as f64 - c as f64)
        });
        let r = gram_factor(&g);
        assert_eq!(r.nrows(), 2);
        let err = max_abs_diff(&(r.adjoint() * &r), &(g.adjoint() * &g));
        assert!(err < 1e-10);
    }

    #[test]
    fn gram_factor_drops_null_directions() {
        let col = CVec::from_vec(vec![ONE, Complex64::new(0.0, 2.0)]);
        let g = &col * col.adjoint();
        assert_eq!(gram_factor(&g).nrows(), 1);
        assert_eq!(gram_factor(&CMat::zeros(2, 3)).nrows(), 0);
    }

    #[test]
    fn polar_of_unitary_is_itself() {
        let f = dft_matrix(4);
        assert!(max_abs_diff(&polar_unitary(&f).unwrap(), &f) < 1e-12);
    }

    #[test]
    fn svd_sorted_descends() {
        let m = real_diag(&[0.5, 3.0, 1.0]);
        let (s, u, v) = svd_sorted(&m);
        assert_eq!(s.len(), 3);
        assert!((s[0] - 3.0).abs() < 1e-12 && (s[2] - 0.5).abs() < 1e-12);
        let rebuilt = &u * real_diag(&s) * v.adjoint();
        assert!(max_abs_diff(&rebuilt, &m) < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = vec![1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
