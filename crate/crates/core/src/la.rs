//! Small fixed-size vector/matrix helpers generic over the AD scalar.
//!
//! nalgebra covers the plain-f64 paths; these helpers exist so kinematic
//! integrands can run on [`Dual2`](crate::dual::Dual2) without pulling the
//! whole `RealField` surface into the AD type.

use crate::dual::Scalar;

pub type V3<S> = [S; 3];
/// Row-major 3x3: m[i][j] = entry (row i, col j).
pub type M3<S> = [[S; 3]; 3];

pub fn v3_const<S: Scalar>(x: &[f64; 3], like: &S) -> V3<S> {
    [
        like.mul_f(0.0).add_f(x[0]),
        like.mul_f(0.0).add_f(x[1]),
        like.mul_f(0.0).add_f(x[2]),
    ]
}

pub fn v3_add<S: Scalar>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [a[0].add(&b[0]), a[1].add(&b[1]), a[2].add(&b[2])]
}

pub fn v3_sub<S: Scalar>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [a[0].sub(&b[0]), a[1].sub(&b[1]), a[2].sub(&b[2])]
}

pub fn v3_scale<S: Scalar>(a: &V3<S>, s: &S) -> V3<S> {
    [a[0].mul(s), a[1].mul(s), a[2].mul(s)]
}

pub fn v3_dot<S: Scalar>(a: &V3<S>, b: &V3<S>) -> S {
    a[0].mul(&b[0]).add(&a[1].mul(&b[1])).add(&a[2].mul(&b[2]))
}

pub fn v3_cross<S: Scalar>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [
        a[1].mul(&b[2]).sub(&a[2].mul(&b[1])),
        a[2].mul(&b[0]).sub(&a[0].mul(&b[2])),
        a[0].mul(&b[1]).sub(&a[1].mul(&b[0])),
    ]
}

pub fn v3_norm<S: Scalar>(a: &V3<S>) -> S {
    v3_dot(a, a).sqrt()
}

pub fn v3_normalize<S: Scalar>(a: &V3<S>) -> (V3<S>, S) {
    let n = v3_norm(a);
    let inv = n.recip();
    (v3_scale(a, &inv), n)
}

pub fn m3_zero_like<S: Scalar>(like: &S) -> M3<S> {
    let z = like.mul_f(0.0);
    [
        [z.clone(), z.clone(), z.clone()],
        [z.clone(), z.clone(), z.clone()],
        [z.clone(), z.clone(), z.clone()],
    ]
}

pub fn m3_const<S: Scalar>(m: &[[f64; 3]; 3], like: &S) -> M3<S> {
    let mut out = m3_zero_like(like);
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = out[i][j].add_f(m[i][j]);
        }
    }
    out
}

pub fn m3_add<S: Scalar>(a: &M3<S>, b: &M3<S>) -> M3<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j].add(&b[i][j])))
}

pub fn m3_sub<S: Scalar>(a: &M3<S>, b: &M3<S>) -> M3<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j].sub(&b[i][j])))
}

pub fn m3_scale<S: Scalar>(a: &M3<S>, s: &S) -> M3<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j].mul(s)))
}

pub fn m3_mul<S: Scalar>(a: &M3<S>, b: &M3<S>) -> M3<S> {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            a[i][0]
                .mul(&b[0][j])
                .add(&a[i][1].mul(&b[1][j]))
                .add(&a[i][2].mul(&b[2][j]))
        })
    })
}

pub fn m3_transpose<S: Scalar>(a: &M3<S>) -> M3<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i].clone()))
}

pub fn m3_vec<S: Scalar>(a: &M3<S>, v: &V3<S>) -> V3<S> {
    std::array::from_fn(|i| {
        a[i][0]
            .mul(&v[0])
            .add(&a[i][1].mul(&v[1]))
            .add(&a[i][2].mul(&v[2]))
    })
}

pub fn m3_tvec<S: Scalar>(a: &M3<S>, v: &V3<S>) -> V3<S> {
    std::array::from_fn(|j| {
        a[0][j]
            .mul(&v[0])
            .add(&a[1][j].mul(&v[1]))
            .add(&a[2][j].mul(&v[2]))
    })
}

/// Frobenius inner product A : B.
pub fn m3_ddot<S: Scalar>(a: &M3<S>, b: &M3<S>) -> S {
    let mut acc = a[0][0].mul(&b[0][0]);
    for i in 0..3 {
        for j in 0..3 {
            if i == 0 && j == 0 {
                continue;
            }
            acc = acc.add(&a[i][j].mul(&b[i][j]));
        }
    }
    acc
}

pub fn m3_trace<S: Scalar>(a: &M3<S>) -> S {
    a[0][0].add(&a[1][1]).add(&a[2][2])
}

pub fn outer<S: Scalar>(a: &V3<S>, b: &V3<S>) -> M3<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i].mul(&b[j])))
}

/// Cofactor matrix of a 3x3: cof(A)_ij = (-1)^(i+j) * minor_ij, so that
/// A^T cof(A) = det(A) I and (A t) x (A m) = cof(A) (t x m).
pub fn m3_cofactor<S: Scalar>(a: &M3<S>) -> M3<S> {
    let minor = |i: usize, j: usize| -> S {
        let r: Vec<usize> = (0..3).filter(|&k| k != i).collect();
        let c: Vec<usize> = (0..3).filter(|&k| k != j).collect();
        a[r[0]][c[0]]
            .mul(&a[r[1]][c[1]])
            .sub(&a[r[0]][c[1]].mul(&a[r[1]][c[0]]))
    };
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let m = minor(i, j);
            if (i + j) % 2 == 0 {
                m
            } else {
                m.neg()
            }
        })
    })
}

pub fn m3_det<S: Scalar>(a: &M3<S>) -> S {
    let c = v3_cross(
        &[a[0][1].clone(), a[1][1].clone(), a[2][1].clone()],
        &[a[0][2].clone(), a[1][2].clone(), a[2][2].clone()],
    );
    v3_dot(&[a[0][0].clone(), a[1][0].clone(), a[2][0].clone()], &c)
}

// f64 conveniences bridging to nalgebra.
pub fn to_na(v: &V3<f64>) -> nalgebra::Vector3<f64> {
    nalgebra::Vector3::new(v[0], v[1], v[2])
}

pub fn from_na(v: &nalgebra::Vector3<f64>) -> V3<f64> {
    [v.x, v.y, v.z]
}

pub fn m3_to_na(m: &M3<f64>) -> nalgebra::Matrix3<f64> {
    nalgebra::Matrix3::from_fn(|i, j| m[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cofactor_of_identity_and_diagonal() {
        let i3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(m3_cofactor(&i3), i3);
        let d = [[2.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 5.0]];
        let c = m3_cofactor(&d);
        assert_eq!(c[0][0], 15.0);
        assert_eq!(c[1][1], 10.0);
        assert_eq!(c[2][2], 6.0);
    }

    #[test]
    fn cofactor_matches_inverse_transpose() {
        let a = [[1.0, 0.4, -0.3], [0.2, 1.3, 0.5], [-0.7, 0.1, 0.9]];
        let na = m3_to_na(&a);
        let det = na.determinant();
        let inv_t = na.try_inverse().unwrap().transpose() * det;
        let c = m3_cofactor(&a);
        for i in 0..3 {
            for j in 0..3 {
                assert!((c[i][j] - inv_t[(i, j)]).abs() < 1e-12 * det.abs().max(1.0));
            }
        }
    }
}
