//! Gauss quadrature on the reference edge [0,1], unit triangle and unit
//! square. Rules are exact at least to the requested polynomial degree and
//! all weights are positive; unsupported degrees fall back to the next
//! higher available rule, never a lower one.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefDomain {
    Edge,
    Tri,
    Quad,
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    /// Reference coordinates; for edges only the first component is used.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss-Legendre nodes/weights on [0,1], exact for degree 2n-1.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let m = n;
    for i in 0..n {
        // Newton iteration on P_n over [-1,1], seeded with the Chebyshev guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = 0.5 * (1.0 - x); // descending cos order -> ascending on [0,1]
        ws[i] = 0.5 * w;
    }
    // Sort ascending for determinism.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    (
        idx.iter().map(|&k| xs[k]).collect(),
        idx.iter().map(|&k| ws[k]).collect(),
    )
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

pub fn quadrature_for(shape: RefDomain, degree: usize) -> Result<QuadratureRule> {
    if degree > 60 {
        return Err(Error::Config(format!(
            "quadrature degree {degree} out of supported range"
        )));
    }
    Ok(match shape {
        RefDomain::Edge => {
            let n = degree / 2 + 1;
            let (xs, ws) = gauss_legendre_01(n);
            QuadratureRule {
                points: xs.iter().map(|&x| [x, 0.0]).collect(),
                weights: ws,
            }
        }
        RefDomain::Quad => {
            let n = degree / 2 + 1;
            let (xs, ws) = gauss_legendre_01(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    points.push([xs[i], xs[j]]);
                    weights.push(ws[i] * ws[j]);
                }
            }
            QuadratureRule { points, weights }
        }
        RefDomain::Tri => triangle_rule(degree),
    })
}

fn triangle_rule(degree: usize) -> QuadratureRule {
    // Symmetric positive rules for low degrees, collapsed tensor rule above.
    match degree {
        0 | 1 => QuadratureRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
        },
        2 => {
            let a = 1.0 / 6.0;
            let b = 2.0 / 3.0;
            QuadratureRule {
                points: vec![[a, a], [b, a], [a, b]],
                weights: vec![1.0 / 6.0; 3],
            }
        }
        3 | 4 => {
            let a1 = 0.091576213509771;
            let w1 = 0.109951743655322 * 0.5;
            let a2 = 0.445948490915965;
            let w2 = 0.223381589678011 * 0.5;
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for (a, w) in [(a1, w1), (a2, w2)] {
                points.push([a, a]);
                points.push([1.0 - 2.0 * a, a]);
                points.push([a, 1.0 - 2.0 * a]);
                weights.extend_from_slice(&[w, w, w]);
            }
            QuadratureRule { points, weights }
        }
        5 => {
            let mut points = vec![[1.0 / 3.0, 1.0 / 3.0]];
            let mut weights = vec![0.225 * 0.5];
            let a1 = 0.470142064105115;
            let w1 = 0.132394152788506 * 0.5;
            let a2 = 0.101286507323456;
            let w2 = 0.125939180544827 * 0.5;
            for (a, w) in [(a1, w1), (a2, w2)] {
                points.push([a, a]);
                points.push([1.0 - 2.0 * a, a]);
                points.push([a, 1.0 - 2.0 * a]);
                weights.extend_from_slice(&[w, w, w]);
            }
            QuadratureRule { points, weights }
        }
        d => {
            // Duffy-collapsed tensor rule: xi = x(1-y), eta = y with Jacobian
            // (1-y); one extra point in y covers the Jacobian's degree.
            let nx = d / 2 + 1;
            let ny = (d + 1) / 2 + 1;
            let (xs, wxs) = gauss_legendre_01(nx);
            let (ys, wys) = gauss_legendre_01(ny);
            let mut points = Vec::with_capacity(nx * ny);
            let mut weights = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    let (x, y) = (xs[i], ys[j]);
                    points.push([x * (1.0 - y), y]);
                    weights.push(wxs[i] * wys[j] * (1.0 - y));
                }
            }
            QuadratureRule { points, weights }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate_tri(rule: &QuadratureRule, f: impl Fn(f64, f64) -> f64) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * f(p[0], p[1]))
            .sum()
    }

    fn exact_tri_monomial(p: u32, q: u32) -> f64 {
        // int_tri x^p y^q = p! q! / (p+q+2)!
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>().max(1.0);
        fact(p) * fact(q) / fact(p + q + 2)
    }

    #[test]
    fn edge_rule_two_point_for_degree_three() {
        let r = quadrature_for(RefDomain::Edge, 3).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for d in 0..=3u32 {
            let v: f64 = r
                .points
                .iter()
                .zip(&r.weights)
                .map(|(p, w)| w * p[0].powi(d as i32))
                .sum();
            assert!((v - 1.0 / (d as f64 + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn quad_rule_integrates_x2y2_exactly() {
        let r = quadrature_for(RefDomain::Quad, 4).unwrap();
        assert_eq!(r.len(), 9);
        let v: f64 = r
            .points
            .iter()
            .zip(&r.weights)
            .map(|(p, w)| w * p[0] * p[0] * p[1] * p[1])
            .sum();
        assert!((v - 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn triangle_rules_exact_and_positive() {
        for degree in 0..=10usize {
            let r = quadrature_for(RefDomain::Tri, degree).unwrap();
            assert!(r.weights.iter().all(|&w| w > 0.0), "degree {degree}");
            let area = integrate_tri(&r, |_, _| 1.0);
            assert!((area - 0.5).abs() < 1e-14);
            for p in 0..=degree as u32 {
                for q in 0..=(degree as u32 - p) {
                    let v = integrate_tri(&r, |x, y| x.powi(p as i32) * y.powi(q as i32));
                    assert!(
                        (v - exact_tri_monomial(p, q)).abs() < 1e-13,
                        "degree {degree} monomial x^{p} y^{q}: {v}"
                    );
                }
            }
        }
    }
}
