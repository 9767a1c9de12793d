//! Small dense linear-algebra helpers shared by the geometry modules.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Complex dense matrix.
pub type CMat = DMatrix<Complex64>;
/// Real dense matrix.
pub type RMat = DMatrix<f64>;
/// Complex dense vector.
pub type CVec = DVector<Complex64>;

/// Shorthand complex constructor.
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &RMat) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_eigenvalue(m: &RMat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

/// Largest absolute entry of a complex matrix.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// Largest absolute entry of a real matrix.
pub fn max_abs_real(m: &RMat) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.abs()))
}

/// Real part of a complex matrix.
pub fn re(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

/// Imaginary part of a complex matrix.
pub fn im(m: &CMat) -> RMat {
    m.map(|z| z.im)
}

/// Promotes a real matrix to complex.
pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Outer antisymmetric product `a (x) b - b (x) a` of two covectors.
pub fn wedge(a: &CVec, b: &CVec) -> CMat {
    a * b.transpose() - b * a.transpose()
}

/// Pfaffian of a complex antisymmetric matrix by pivoted skew Gaussian
/// elimination.
pub fn pfaffian(m: &CMat) -> Complex64 {
    let n = m.nrows();
    if n % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let mut a = m.clone();
    let mut pf = Complex64::new(1.0, 0.0);
    let mut k = 0;
    while k + 1 < n {
        let mut kp = k + 1;
        for j in k + 2..n {
            if a[(j, k)].norm() > a[(kp, k)].norm() {
                kp = j;
            }
        }
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        let piv = a[(k, k + 1)];
        if piv.norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        pf *= piv;
        if k + 2 < n {
            let tau: Vec<Complex64> = (k + 2..n).map(|i| a[(k, i)] / piv).collect();
            let col: Vec<Complex64> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
        k += 2;
    }
    pf
}

/// Coefficient of `omega^r ^ conj(omega)^r` on the frame volume form for a
/// 2-form `omega = (1/2) W_ab dx^a ^ dx^b` on a `4r`-dimensional space.
pub fn top_wedge(w: &CMat) -> Complex64 {
    let n = w.nrows();
    let r = n / 4;
    let wbar = w.map(|z| z.conj());
    let samples = 2 * r + 1;
    let mut cr = Complex64::new(0.0, 0.0);
    for k in 0..samples {
        let t = Complex64::from_polar(1.0, 2.0 * core::f64::consts::PI * k as f64 / samples as f64);
        let p = pfaffian(&(w + &wbar * t));
        cr += p * t.powi(-(r as i32));
    }
    cr /= samples as f64;
    let fact: f64 = (1..=r).map(|x| x as f64).product();
    cr * fact * fact
}

/// Determinant of a real square matrix.
pub fn det_real(m: &RMat) -> f64 {
    m.clone().lu().determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfaffian_small_cases() {
        let v = [c(0.3, 1.0), c(-1.2, 0.5), c(2.0, -0.1), c(0.7, 0.7), c(-0.4, 0.0), c(1.1, -2.0)];
        let mut a = CMat::zeros(4, 4);
        let mut k = 0;
        for i in 0..4 {
            for j in i + 1..4 {
                a[(i, j)] = v[k];
                a[(j, i)] = -v[k];
                k += 1;
            }
        }
        let expect = a[(0, 1)] * a[(2, 3)] - a[(0, 2)] * a[(1, 3)] + a[(0, 3)] * a[(1, 2)];
        assert!((pfaffian(&a) - expect).norm() < 1e-14);
        // Pf^2 = det
        let det = a.clone().determinant();
        assert!((pfaffian(&a).powi(2) - det).norm() < 1e-12);
    }

    #[test]
    fn top_wedge_of_standard_form() {
        // dz1 ^ dz2 ^ conj(dz1) ^ conj(dz2) = 4 dx1 ^ dy1 ^ dx2 ^ dy2
        let dz1 = CVec::from_vec(alloc::vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let dz2 = CVec::from_vec(alloc::vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)]);
        assert!((top_wedge(&wedge(&dz1, &dz2)) - c(4.0, 0.0)).norm() < 1e-14);
        let real = RMat::from_fn(4, 4, |i, j| [[0.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, 0.0, -1.0, 0.0]][i][j]);
        // a real symplectic form: omega ^ omega = 2 vol
        assert!((top_wedge(&to_complex(&real)) - c(2.0, 0.0)).norm() < 1e-14);
    }
}
