//! Direct symmetric sparse solve: reverse-Cuthill-McKee reordering followed
//! by a variable-band (skyline) LDL^T factorization. Pivot signs are
//! reported so callers can assert positive definiteness of the condensed
//! system; a vanishing pivot is flagged as an under-constrained system.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric sparse matrix in row lists (both triangles stored).
#[derive(Clone, Debug)]
pub struct SymmetricSparse {
    pub n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SymmetricSparse {
    pub fn new(n: usize) -> Self {
        SymmetricSparse {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let row = &mut self.rows[i];
        match row.binary_search_by_key(&j, |e| e.0) {
            Ok(pos) => row[pos].1 += v,
            Err(pos) => row.insert(pos, (j, v)),
        }
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn symmetry_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                let vt = self.rows[j]
                    .binary_search_by_key(&i, |e| e.0)
                    .map(|p| self.rows[j][p].1)
                    .unwrap_or(0.0);
                worst = worst.max((v - vt).abs());
            }
        }
        worst
    }
}

/// Reverse Cuthill-McKee ordering: returns perm with perm[new] = old.
pub fn rcm_order(a: &SymmetricSparse) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.rows[i].len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    loop {
        // Start each component from a minimum-degree unvisited node.
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i]);
        let Some(start) = start else { break };
        visited[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = a.rows[u]
                .iter()
                .map(|&(j, _)| j)
                .filter(|&j| !visited[j])
                .collect();
            nbrs.sort_by_key(|&j| degree[j]);
            for j in nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// Result of a factorization: solve capability plus pivot diagnostics.
pub struct SkylineLdl {
    n: usize,
    /// perm[new] = old.
    perm: Vec<usize>,
    col_min: Vec<usize>,
    /// Row storage offsets into `l`.
    offs: Vec<usize>,
    l: Vec<f64>,
    d: Vec<f64>,
    pub min_pivot: f64,
    pub n_nonpositive_pivots: usize,
}

pub fn factor_skyline(a: &SymmetricSparse) -> Result<SkylineLdl> {
    let n = a.n;
    if n == 0 {
        return Ok(SkylineLdl {
            n,
            perm: vec![],
            col_min: vec![],
            offs: vec![0],
            l: vec![],
            d: vec![],
            min_pivot: f64::INFINITY,
            n_nonpositive_pivots: 0,
        });
    }
    let perm = rcm_order(a);
    let mut iperm = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        iperm[old] = new;
    }
    // iperm is consumed while scattering; only perm is kept for solves.
    // Skyline profile in permuted indices.
    let mut col_min: Vec<usize> = (0..n).collect();
    for (i_old, row) in a.rows.iter().enumerate() {
        let i = iperm[i_old];
        for &(j_old, _) in row {
            let j = iperm[j_old];
            if j < i {
                col_min[i] = col_min[i].min(j);
            }
        }
    }
    let mut offs = vec![0usize; n + 1];
    for i in 0..n {
        offs[i + 1] = offs[i] + (i - col_min[i]);
    }
    let mut l = vec![0.0_f64; offs[n]];
    let mut d = vec![0.0_f64; n];
    // Scatter entries (permuted strictly-lower triangle into l, diagonal d).
    let mut max_diag: f64 = 0.0;
    for (i_old, row) in a.rows.iter().enumerate() {
        let i = iperm[i_old];
        for &(j_old, v) in row {
            let j = iperm[j_old];
            if j < i {
                l[offs[i] + (j - col_min[i])] = v;
            } else if j == i {
                d[i] = v;
                max_diag = max_diag.max(v.abs());
            }
        }
    }
    let tol = 1e-14 * max_diag.max(1e-300);
    let mut min_pivot = f64::INFINITY;
    let mut n_nonpositive = 0usize;
    for i in 0..n {
        let cmi = col_min[i];
        for j in cmi..i {
            // l[i][j] -= sum_k l[i][k] d[k] l[j][k]
            let cmj = col_min[j];
            let k0 = cmi.max(cmj);
            let mut s = 0.0;
            for k in k0..j {
                s += l[offs[i] + (k - cmi)] * d[k] * l[offs[j] + (k - cmj)];
            }
            let idx = offs[i] + (j - cmi);
            l[idx] = (l[idx] - s) / d[j];
        }
        let mut s = 0.0;
        for k in cmi..i {
            let v = l[offs[i] + (k - cmi)];
            s += v * v * d[k];
        }
        d[i] -= s;
        if d[i].abs() <= tol {
            return Err(Error::SingularSystem {
                eq: perm[i],
                pivot: d[i],
            });
        }
        if d[i] <= 0.0 {
            n_nonpositive += 1;
        }
        min_pivot = min_pivot.min(d[i]);
    }
    Ok(SkylineLdl {
        n,
        perm,
        col_min,
        offs,
        l,
        d,
        min_pivot,
        n_nonpositive_pivots: n_nonpositive,
    })
}

impl SkylineLdl {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            let cmi = self.col_min[i];
            let mut s = 0.0;
            for k in cmi..i {
                s += self.l[self.offs[i] + (k - cmi)] * y[k];
            }
            y[i] -= s;
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let cmi = self.col_min[i];
            let yi = y[i];
            for k in cmi..i {
                y[k] -= self.l[self.offs[i] + (k - cmi)] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }
}

/// Diagnostics of one linear solve.
#[derive(Clone, Copy, Debug, Default)]
pub struct SolveInfo {
    pub min_pivot: f64,
    pub n_nonpositive_pivots: usize,
    pub relative_residual: f64,
}

/// Direct solve with residual check; `dense` switches to an LU oracle path.
pub fn solve_symmetric(a: &SymmetricSparse, b: &[f64], dense: bool) -> Result<(Vec<f64>, SolveInfo)> {
    if a.n == 0 {
        return Ok((Vec::new(), SolveInfo::default()));
    }
    let mut pivot_info = (f64::NAN, 0usize);
    let x = if dense {
        let m = a.to_dense();
        let lu = m.lu();
        let sol = lu
            .solve(&DVector::from_column_slice(b))
            .ok_or(Error::SingularSystem { eq: 0, pivot: 0.0 })?;
        sol.as_slice().to_vec()
    } else {
        let f = factor_skyline(a)?;
        pivot_info = (f.min_pivot, f.n_nonpositive_pivots);
        f.solve(b)
    };
    // Relative residual of the linear solve.
    let mut r2 = 0.0;
    let mut b2 = 0.0;
    for i in 0..a.n {
        let mut ax = 0.0;
        for &(j, v) in a.row(i) {
            ax += v * x[j];
        }
        r2 += (ax - b[i]) * (ax - b[i]);
        b2 += b[i] * b[i];
    }
    let rel = if b2 > 0.0 { (r2 / b2).sqrt() } else { r2.sqrt() };
    let info = SolveInfo {
        min_pivot: pivot_info.0,
        n_nonpositive_pivots: pivot_info.1,
        relative_residual: rel,
    };
    Ok((x, info))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut impl Rng) -> (SymmetricSparse, DMatrix<f64>) {
        // Banded SPD: diagonally dominant.
        let mut a = SymmetricSparse::new(n);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(3)..=(i + 3).min(n - 1) {
                if j < i {
                    let v = 0.3 * (rng.gen::<f64>() - 0.5);
                    a.add(i, j, v);
                    a.add(j, i, v);
                    dense[(i, j)] = v;
                    dense[(j, i)] = v;
                }
            }
            let v = 4.0 + rng.gen::<f64>();
            a.add(i, i, v);
            dense[(i, i)] = v;
        }
        (a, dense)
    }

    #[test]
    fn identity_like_diagonal_solve_is_exact() {
        let mut a = SymmetricSparse::new(4);
        for i in 0..4 {
            a.add(i, i, (i + 1) as f64);
        }
        let b = [2.0, 4.0, 6.0, 8.0];
        let (x, info) = solve_symmetric(&a, &b, false).unwrap();
        for &xi in &x {
            assert!((xi - 2.0).abs() < 1e-15);
        }
        assert!(info.relative_residual < 1e-14);
        assert!(info.n_nonpositive_pivots == 0);
    }

    #[test]
    fn skyline_matches_dense_lu_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in [1usize, 2, 7, 40, 120] {
            let (a, dense) = random_spd(n, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let (x, info) = solve_symmetric(&a, &b, false).unwrap();
            let xd = dense.lu().solve(&DVector::from_column_slice(&b)).unwrap();
            for i in 0..n {
                assert!((x[i] - xd[i]).abs() < 1e-10 * (1.0 + xd[i].abs()), "n={n} i={i}");
            }
            assert!(info.relative_residual < 1e-10);
        }
    }

    #[test]
    fn singular_system_detected() {
        let mut a = SymmetricSparse::new(3);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        // Row/col 2 is exactly zero -> rigid mode.
        a.add(2, 2, 0.0);
        let b = [1.0, 1.0, 0.0];
        match solve_symmetric(&a, &b, false) {
            Err(Error::SingularSystem { .. }) => {}
            other => panic!("expected singular system, got {other:?}"),
        }
    }

    #[test]
    fn indefinite_pivots_are_counted_not_fatal() {
        let mut a = SymmetricSparse::new(2);
        a.add(0, 0, 1.0);
        a.add(1, 1, -2.0);
        let (x, info) = solve_symmetric(&a, &[1.0, 2.0], false).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] + 1.0).abs() < 1e-14);
        assert_eq!(info.n_nonpositive_pivots, 1);
        assert!(info.min_pivot < 0.0);
    }

    #[test]
    fn rcm_reduces_profile_on_a_grid() {
        // 2D 5-point grid numbered randomly: RCM should give a small profile.
        let (nx, ny) = (10usize, 10usize);
        let n = nx * ny;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut shuffle: Vec<usize> = (0..n).collect();
        shuffle.shuffle(&mut rng);
        let idx = |i: usize, j: usize| shuffle[j * nx + i];
        let mut a = SymmetricSparse::new(n);
        for j in 0..ny {
            for i in 0..nx {
                a.add(idx(i, j), idx(i, j), 4.0);
                if i + 1 < nx {
                    a.add(idx(i, j), idx(i + 1, j), -1.0);
                    a.add(idx(i + 1, j), idx(i, j), -1.0);
                }
                if j + 1 < ny {
                    a.add(idx(i, j), idx(i, j + 1), -1.0);
                    a.add(idx(i, j + 1), idx(i, j), -1.0);
                }
            }
        }
        let f = factor_skyline(&a).unwrap();
        // Profile of RCM ordering on a 10x10 grid is near bandwidth nx.
        let profile = f.offs[n];
        assert!(profile < n * 2 * nx, "profile {profile}");
        let b: Vec<f64> = (0..n).map(|i| (i % 7) as f64 - 3.0).collect();
        let x = f.solve(&b);
        let mut r: f64 = 0.0;
        for i in 0..n {
            let mut ax = 0.0;
            for &(j, v) in a.row(i) {
                ax += v * x[j];
            }
            r = r.max((ax - b[i]).abs());
        }
        assert!(r < 1e-10);
    }
}
