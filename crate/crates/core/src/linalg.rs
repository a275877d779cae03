//! Small dense real linear algebra for the 4x4 Newton and certification steps.

use crate::error::{Error, Result};
use crate::scalar::{Precision, Real};

pub type Vec4<R> = [R; 4];
pub type Mat4<R> = [[R; 4]; 4];

/// Condition estimates above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

pub fn zeros<R: Real>(p: Precision) -> Mat4<R> {
    std::array::from_fn(|_| std::array::from_fn(|_| R::zero(p)))
}

pub fn identity<R: Real>(p: Precision) -> Mat4<R> {
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { R::one(p) } else { R::zero(p) }))
}

pub fn norm2<R: Real>(v: &[R]) -> R {
    let p = v[0].precision();
    v.iter().fold(R::zero(p), |acc, x| acc + x.clone() * x).sqrt()
}

pub fn sub_vec<R: Real>(a: &Vec4<R>, b: &Vec4<R>) -> Vec4<R> {
    std::array::from_fn(|i| a[i].clone() - &b[i])
}

pub fn mat_vec<R: Real>(a: &Mat4<R>, x: &Vec4<R>) -> Vec4<R> {
    let p = x[0].precision();
    std::array::from_fn(|i| (0..4).fold(R::zero(p), |acc, j| acc + a[i][j].clone() * &x[j]))
}

pub fn mat_mul<R: Real>(a: &Mat4<R>, b: &Mat4<R>) -> Mat4<R> {
    let p = a[0][0].precision();
    std::array::from_fn(|i| {
        std::array::from_fn(|j| (0..4).fold(R::zero(p), |acc, k| acc + a[i][k].clone() * &b[k][j]))
    })
}

pub fn transpose<R: Real>(a: &Mat4<R>) -> Mat4<R> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i].clone()))
}

pub fn sub_mat<R: Real>(a: &Mat4<R>, b: &Mat4<R>) -> Mat4<R> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j].clone() - &b[i][j]))
}

/// LU factorization with partial pivoting; `None` if a pivot vanishes.
fn lu<R: Real>(a: &Mat4<R>) -> Option<(Mat4<R>, [usize; 4], bool)> {
    let p = a[0][0].precision();
    let mut m = a.clone();
    let mut perm = [0, 1, 2, 3];
    let mut odd = false;
    for k in 0..4 {
        let pivot = (k..4)
            .max_by(|&i, &j| m[i][k].abs().partial_cmp(&m[j][k].abs()).expect("finite"))
            .expect("non-empty range");
        if m[pivot][k] == R::zero(p) {
            return None;
        }
        if pivot != k {
            m.swap(pivot, k);
            perm.swap(pivot, k);
            odd = !odd;
        }
        for i in k + 1..4 {
            let factor = m[i][k].clone() / &m[k][k];
            for j in k + 1..4 {
                let delta = factor.clone() * &m[k][j];
                m[i][j] -= delta;
            }
            m[i][k] = factor;
        }
    }
    Some((m, perm, odd))
}

fn lu_solve<R: Real>(lu: &Mat4<R>, perm: &[usize; 4], b: &Vec4<R>) -> Vec4<R> {
    let mut y: Vec4<R> = std::array::from_fn(|i| b[perm[i]].clone());
    for i in 0..4 {
        for j in 0..i {
            let d = lu[i][j].clone() * &y[j];
            y[i] -= d;
        }
    }
    for i in (0..4).rev() {
        for j in i + 1..4 {
            let d = lu[i][j].clone() * &y[j];
            y[i] -= d;
        }
        y[i] = y[i].clone() / &lu[i][i];
    }
    y
}

pub fn det<R: Real>(a: &Mat4<R>) -> R {
    let p = a[0][0].precision();
    match lu(a) {
        None => R::zero(p),
        Some((m, _, odd)) => {
            let d = (0..4).fold(R::one(p), |acc, i| acc * &m[i][i]);
            if odd {
                -d
            } else {
                d
            }
        }
    }
}

pub fn inverse<R: Real>(a: &Mat4<R>) -> Result<Mat4<R>> {
    let p = a[0][0].precision();
    let (m, perm, _) = lu(a).ok_or(Error::Conditioning { condition: f64::INFINITY })?;
    let id = identity::<R>(p);
    let cols: Vec<Vec4<R>> = (0..4).map(|j| lu_solve(&m, &perm, &id[j])).collect();
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| cols[j][i].clone())))
}

/// Solves `a x = b`, refusing matrices whose spectral condition number
/// exceeds [`MAX_CONDITION`].
pub fn solve<R: Real>(a: &Mat4<R>, b: &Vec4<R>) -> Result<Vec4<R>> {
    let cond = condition_number(a)?;
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Conditioning { condition: cond });
    }
    let (m, perm, _) = lu(a).ok_or(Error::Conditioning { condition: f64::INFINITY })?;
    Ok(lu_solve(&m, &perm, b))
}

/// Eigenvalues of a symmetric 4x4 matrix by cyclic Jacobi rotations, in
/// ascending order.
pub fn symmetric_eigenvalues<R: Real>(a: &Mat4<R>) -> Vec4<R> {
    let p = a[0][0].precision();
    let mut m = a.clone();
    let eps = R::from_f64(2f64.powi(-(p.mantissa_bits() as i32)), p);
    let frob = |m: &Mat4<R>| {
        let mut s = R::zero(p);
        for row in m {
            for x in row {
                s += x.clone() * x;
            }
        }
        s.sqrt()
    };
    let scale = frob(&m);
    for _sweep in 0..100 {
        let mut off = R::zero(p);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    off += m[i][j].clone() * &m[i][j];
                }
            }
        }
        if off.sqrt() <= eps.clone() * &scale {
            break;
        }
        for pi in 0..3 {
            for qi in pi + 1..4 {
                if m[pi][qi] == R::zero(p) {
                    continue;
                }
                let two = R::from_f64(2.0, p);
                let theta = (m[qi][qi].clone() - &m[pi][pi]) / (two * &m[pi][qi]);
                let sign = if theta >= R::zero(p) { R::one(p) } else { -R::one(p) };
                let t = sign / (theta.abs() + (theta.clone() * &theta + R::one(p)).sqrt());
                let c = R::one(p) / (t.clone() * &t + R::one(p)).sqrt();
                let s = t.clone() * &c;
                // A <- J^T A J with J the (p, q) rotation
                for k in 0..4 {
                    let mkp = m[k][pi].clone();
                    let mkq = m[k][qi].clone();
                    m[k][pi] = c.clone() * &mkp - s.clone() * &mkq;
                    m[k][qi] = s.clone() * &mkp + c.clone() * &mkq;
                }
                for k in 0..4 {
                    let mpk = m[pi][k].clone();
                    let mqk = m[qi][k].clone();
                    m[pi][k] = c.clone() * &mpk - s.clone() * &mqk;
                    m[qi][k] = s.clone() * &mpk + c.clone() * &mqk;
                }
            }
        }
    }
    let mut eig: Vec<R> = (0..4).map(|i| m[i][i].clone()).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    std::array::from_fn(|i| eig[i].clone())
}

/// Singular values in ascending order, from the Gram matrix `a^T a`.
pub fn singular_values<R: Real>(a: &Mat4<R>) -> Vec4<R> {
    let gram = mat_mul(&transpose(a), a);
    let p = a[0][0].precision();
    symmetric_eigenvalues(&gram).map(|l| l.max_of(R::zero(p)).sqrt())
}

/// Operator 2-norm.
pub fn spectral_norm<R: Real>(a: &Mat4<R>) -> R {
    singular_values(a)[3].clone()
}

/// `sigma_max / sigma_min`; infinite for singular input.
pub fn condition_number<R: Real>(a: &Mat4<R>) -> Result<f64> {
    let sv = singular_values(a);
    let smin = sv[0].to_f64();
    if smin == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(sv[3].to_f64() / smin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::MpFloat;

    const P: Precision = Precision::DOUBLE;

    fn sample() -> Mat4<f64> {
        [
            [4.0, -2.0, 1.0, 0.5],
            [3.0, 6.0, -4.0, 2.0],
            [2.0, 1.0, 8.0, -5.0],
            [-1.0, 0.5, 2.0, 7.0],
        ]
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = sample();
        let inv = inverse(&a).unwrap();
        let prod = mat_mul(&a, &inv);
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i][j] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn solve_matches_residual() {
        let a = sample();
        let b = [1.0, -2.0, 0.5, 3.0];
        let x = solve(&a, &b).unwrap();
        let r = sub_vec(&mat_vec(&a, &x), &b);
        assert!(norm2(&r) < 1e-13);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let mut a = sample();
        a[3] = a[2];
        assert!(matches!(solve(&a, &[1.0; 4]), Err(Error::Conditioning { .. })));
        assert_eq!(det(&a), 0.0);
    }

    #[test]
    fn determinant_of_permutation_and_diagonal() {
        let mut d = zeros::<f64>(P);
        for (i, v) in [2.0, 3.0, -1.0, 0.5].into_iter().enumerate() {
            d[i][i] = v;
        }
        assert!((det(&d) + 3.0).abs() < 1e-15);
        let mut perm = identity::<f64>(P);
        perm.swap(0, 1);
        assert!((det(&perm) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_norm_of_diagonal_and_rotation() {
        let mut d = zeros::<f64>(P);
        for (i, v) in [2.0, -7.0, 1.0, 0.5].into_iter().enumerate() {
            d[i][i] = v;
        }
        assert!((spectral_norm(&d) - 7.0).abs() < 1e-14);
        assert!((condition_number(&d).unwrap() - 14.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_high_precision() {
        let p = Precision::HIGH;
        let a: Mat4<MpFloat> = std::array::from_fn(|i| {
            std::array::from_fn(|j| MpFloat::from_f64(1.0 / (i + j + 1) as f64, p))
        });
        // Hilbert-like matrix built from f64 entries: symmetric, positive definite.
        let eig = symmetric_eigenvalues(&a);
        let trace: f64 = (0..4).map(|i| a[i][i].to_f64()).sum();
        let sum: f64 = eig.iter().map(|e| e.to_f64()).sum();
        assert!((trace - sum).abs() < 1e-15);
        let d = det(&a).to_f64();
        let prod: f64 = eig.iter().map(|e| e.to_f64()).product();
        assert!(((d - prod) / d).abs() < 1e-12);
    }
}
