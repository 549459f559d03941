//! Solvers for the SPD systems and the generalized eigenproblem `A x = λ M x`.
//!
//! - preconditioned CG with block-Jacobi (inverted diagonal blocks)
//! - an envelope Cholesky factorization after reverse Cuthill–McKee ordering,
//!   used for shift-invert
//! - a restarted block Krylov method with Rayleigh–Ritz for the smallest
//!   generalized eigenpairs; blocks are needed because the snowflake's
//!   symmetry produces exactly degenerate eigenvalue pairs
//! - dense fallbacks through nalgebra, which double as test oracles

use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::BlockMatrix;
use crate::error::{Error, Result};

/// Default relative tolerance of [`solve_spd`].
pub const DEFAULT_CG_TOL: f64 = 1e-10;
/// Default relative residual bound of the eigensolver.
pub const DEFAULT_EIG_TOL: f64 = 1e-8;
/// Problems up to this size use dense eigen-decompositions.
pub const DENSE_EIG_LIMIT: usize = 1000;
/// Problems up to this size use the dense condition number.
pub const DENSE_COND_LIMIT: usize = 3000;

#[derive(Clone, Debug, Default)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖Ax − b‖₂ / ‖b‖₂`, recomputed after the solve.
    pub residual: f64,
    pub seconds: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn relative_residual(a: &BlockMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut r = a.apply(x);
    axpy(&mut r, -1.0, b);
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Inverses of the diagonal blocks.
pub struct BlockJacobi {
    np: usize,
    inv: Vec<DMatrix<f64>>,
}

impl BlockJacobi {
    pub fn new(a: &BlockMatrix) -> Result<Self> {
        let np = a.block_dim();
        let inv = a
            .diagonal_blocks()
            .into_iter()
            .enumerate()
            .map(|(m, b)| {
                DMatrix::from_row_slice(np, np, &b)
                    .cholesky()
                    .map(|c| c.inverse())
                    .ok_or_else(|| Error::Indefinite(format!("diagonal block {m} is not positive definite")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { np, inv })
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let np = self.np;
        for (m, inv) in self.inv.iter().enumerate() {
            let rm = &r[m * np..(m + 1) * np];
            for i in 0..np {
                z[m * np + i] = (0..np).map(|j| inv[(i, j)] * rm[j]).sum();
            }
        }
    }
}

/// Preconditioned conjugate gradients. Stops when the preconditioned residual
/// norm `sqrt(rᵀ D⁻¹ r)` drops below `tol` times its initial value for
/// `x = 0`; fails on non-positive curvature or after `20·√N` iterations.
pub fn solve_spd(a: &BlockMatrix, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = b.len();
    let pre = BlockJacobi::new(a)?;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut rz = dot(&r, &z);
    let target = tol * rz.sqrt();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let max_iter = ((20.0 * (n as f64).sqrt()).ceil() as usize).max(20);
    let mut iterations = 0;
    while rz.sqrt() > target {
        if iterations == max_iter {
            return Err(Error::NonConvergence {
                method: "conjugate gradients",
                iterations,
                residual: relative_residual(a, &x, b),
            });
        }
        a.mul_vec(&p, &mut ap);
        let curv = dot(&p, &ap);
        if curv <= 0.0 || !curv.is_finite() {
            return Err(Error::Indefinite(format!(
                "non-positive curvature {curv:e} at iteration {iterations}"
            )));
        }
        let alpha = rz / curv;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        iterations += 1;
    }
    let residual = relative_residual(a, &x, b);
    Ok((
        x,
        SolveReport {
            iterations,
            residual,
            seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Dense Cholesky solve; fails if `A` is not positive definite.
pub fn solve_dense(a: &BlockMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let chol = a
        .to_dense()
        .cholesky()
        .ok_or_else(|| Error::Indefinite("dense Cholesky failed".into()))?;
    Ok(chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec())
}

/// Reverse Cuthill–McKee ordering of the block graph: returns `order[new] = old`.
pub fn rcm_order(a: &BlockMatrix) -> Vec<usize> {
    let nb = a.block_rows();
    let adj: Vec<Vec<usize>> = (0..nb)
        .map(|m| a.row_blocks(m).iter().map(|(n, _)| *n).filter(|&n| n != m).collect())
        .collect();
    let mut seen = vec![false; nb];
    let mut order = Vec::with_capacity(nb);
    while order.len() < nb {
        // start each component from a vertex of minimum degree
        let root = (0..nb).filter(|&v| !seen[v]).min_by_key(|&v| adj[v].len()).unwrap();
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// `L Lᵀ = P A Pᵀ` in envelope storage: row `i` keeps columns
/// `first[i]..=i` of `L` contiguously.
pub struct EnvelopeCholesky {
    /// `perm[new] = old` scalar index.
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    vals: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &BlockMatrix) -> Result<Self> {
        let np = a.block_dim();
        let border = rcm_order(a);
        let mut bnew = vec![0; border.len()];
        for (new, &old) in border.iter().enumerate() {
            bnew[old] = new;
        }
        let n = a.dim();
        let perm: Vec<usize> = border
            .iter()
            .flat_map(|&m| (0..np).map(move |i| m * np + i))
            .collect();
        let to_new = |old: usize| bnew[old / np] * np + old % np;

        let mut first: Vec<usize> = (0..n).collect();
        for (m, _) in border.iter().enumerate().map(|(k, &m)| (m, k)) {
            for (c, _) in a.row_blocks(m) {
                for i in 0..np {
                    let r = to_new(m * np + i);
                    let col0 = bnew[*c] * np;
                    if col0 < first[r] {
                        first[r] = col0;
                    }
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            start.push(total);
            total += i - first[i] + 1;
        }
        start.push(total);
        if total > 400_000_000 {
            return Err(Error::ResourceLimit(format!("envelope of {total} entries")));
        }
        let mut vals = vec![0.0; total];
        for m in 0..a.block_rows() {
            for (c, blk) in a.row_blocks(m) {
                for i in 0..np {
                    for j in 0..np {
                        let (r, s) = (to_new(m * np + i), to_new(c * np + j));
                        if s <= r {
                            vals[start[r] + s - first[r]] = blk[i * np + j];
                        }
                    }
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let ri = start[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let rj = start[j];
                let s: f64 = vals[ri + k0 - fi..ri + j - fi]
                    .iter()
                    .zip(&vals[rj + k0 - fj..rj + j - fj])
                    .map(|(x, y)| x * y)
                    .sum();
                let ljj = vals[rj + j - fj];
                vals[ri + j - fi] = (vals[ri + j - fi] - s) / ljj;
            }
            let row = &vals[ri..ri + i - fi];
            let d = vals[ri + i - fi] - row.iter().map(|x| x * x).sum::<f64>();
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::Indefinite(format!("pivot {d:e} at row {i}")));
            }
            vals[ri + i - fi] = d.sqrt();
        }
        Ok(Self {
            perm,
            first,
            start,
            vals,
        })
    }

    pub fn envelope_size(&self) -> usize {
        self.vals.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let ri = self.start[i];
            let s = dot(&self.vals[ri..ri + i - fi], &y[fi..i]);
            y[i] = (y[i] - s) / self.vals[ri + i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let ri = self.start[i];
            y[i] /= self.vals[ri + i - fi];
            let yi = y[i];
            for (k, l) in (fi..i).zip(&self.vals[ri..ri + i - fi]) {
                y[k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[derive(Clone, Debug)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// `M`-orthonormal.
    pub vectors: Vec<Vec<f64>>,
    /// `‖Ax − λMx‖₂ / ‖Ax‖₂` per pair.
    pub residuals: Vec<f64>,
}

fn residual_of(a: &BlockMatrix, m: &BlockMatrix, lambda: f64, x: &[f64]) -> f64 {
    let ax = a.apply(x);
    let mut r = m.apply(x);
    for (ri, ai) in r.iter_mut().zip(&ax) {
        *ri = ai - lambda * *ri;
    }
    norm(&r) / norm(&ax)
}

/// All eigenpairs of `A x = λ M x` by reduction with the Cholesky factor of `M`.
pub fn dense_generalized_eigs(a: &BlockMatrix, m: &BlockMatrix) -> Result<EigenPairs> {
    let l = m
        .to_dense()
        .cholesky()
        .ok_or_else(|| Error::Indefinite("mass matrix Cholesky failed".into()))?
        .l();
    let ad = a.to_dense();
    let linv_a = l
        .solve_lower_triangular(&ad)
        .ok_or_else(|| Error::Indefinite("singular mass factor".into()))?;
    let c = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or_else(|| Error::Indefinite("singular mass factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lt = l.transpose();
    let mut out = EigenPairs {
        values: Vec::new(),
        vectors: Vec::new(),
        residuals: Vec::new(),
    };
    for i in idx {
        let y = eig.eigenvectors.column(i).into_owned();
        let x = lt.solve_upper_triangular(&y).unwrap();
        let x = x.as_slice().to_vec();
        out.residuals.push(residual_of(a, m, eig.eigenvalues[i], &x));
        out.values.push(eig.eigenvalues[i]);
        out.vectors.push(x);
    }
    Ok(out)
}

/// `M`-orthonormal basis builder with two passes of Gram–Schmidt.
struct MBasis<'a> {
    m: &'a BlockMatrix,
    q: Vec<Vec<f64>>,
    mq: Vec<Vec<f64>>,
}

impl<'a> MBasis<'a> {
    fn new(m: &'a BlockMatrix) -> Self {
        Self {
            m,
            q: Vec::new(),
            mq: Vec::new(),
        }
    }

    /// Orthonormalizes `v` against the basis; returns false if it is
    /// numerically dependent.
    fn push(&mut self, mut v: Vec<f64>) -> bool {
        let n0 = dot(&v, &self.m.apply(&v)).sqrt();
        if n0 == 0.0 || !n0.is_finite() {
            return false;
        }
        for _ in 0..2 {
            for (q, mq) in self.q.iter().zip(&self.mq) {
                let c = dot(mq, &v);
                axpy(&mut v, -c, q);
            }
        }
        let mv = self.m.apply(&v);
        let nv = dot(&v, &mv).sqrt();
        if nv.is_nan() || nv <= 1e-10 * n0 {
            return false;
        }
        let inv = 1.0 / nv;
        self.q.push(v.iter().map(|x| x * inv).collect());
        self.mq.push(mv.iter().map(|x| x * inv).collect());
        true
    }
}

/// The `k` smallest eigenpairs of `A x = λ M x` for SPD `A`, `M`.
///
/// Small problems are solved densely. Otherwise `A` is factored once and a
/// block Krylov space of `A⁻¹M` is built from a block of `k + 4` vectors,
/// followed by Rayleigh–Ritz on `A`; the block is restarted from the best Ritz
/// vectors until every residual is below `tol`.
pub fn smallest_generalized_eigs(a: &BlockMatrix, m: &BlockMatrix, k: usize, tol: f64) -> Result<EigenPairs> {
    let n = a.dim();
    if k == 0 || k > 20 || k > n {
        return Err(Error::InvalidArgument(format!("eigenpair count {k} outside 1..=min(20, N)")));
    }
    if n <= DENSE_EIG_LIMIT {
        let mut all = dense_generalized_eigs(a, m)?;
        all.values.truncate(k);
        all.vectors.truncate(k);
        all.residuals.truncate(k);
        return Ok(all);
    }
    krylov_generalized_eigs(a, m, k, tol)
}

/// The iterative path of [`smallest_generalized_eigs`], regardless of size.
pub fn krylov_generalized_eigs(a: &BlockMatrix, m: &BlockMatrix, k: usize, tol: f64) -> Result<EigenPairs> {
    let n = a.dim();
    let chol = EnvelopeCholesky::factor(a)?;
    let block = (k + 4).min(n);
    let steps = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let max_restarts = 40;
    let mut worst = f64::INFINITY;
    for _ in 0..max_restarts {
        let mut basis = MBasis::new(m);
        let mut frontier = Vec::new();
        for v in x.drain(..) {
            if basis.push(v) {
                frontier.push(basis.q.len() - 1);
            }
        }
        for _ in 0..steps {
            let mut next = Vec::new();
            for &i in &frontier {
                let w = chol.solve(&basis.mq[i]);
                if basis.push(w) {
                    next.push(basis.q.len() - 1);
                }
            }
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        let dim = basis.q.len();
        let aq: Vec<Vec<f64>> = basis.q.iter().map(|q| a.apply(q)).collect();
        let h = DMatrix::from_fn(dim, dim, |i, j| 0.5 * (dot(&basis.q[i], &aq[j]) + dot(&basis.q[j], &aq[i])));
        let eig = SymmetricEigen::new(h);
        let mut idx: Vec<usize> = (0..dim).collect();
        idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let ritz = |c: usize| {
            let y = eig.eigenvectors.column(c);
            let mut v = vec![0.0; n];
            for (j, q) in basis.q.iter().enumerate() {
                axpy(&mut v, y[j], q);
            }
            v
        };
        let mut pairs = EigenPairs {
            values: Vec::new(),
            vectors: Vec::new(),
            residuals: Vec::new(),
        };
        for &c in idx.iter().take(block) {
            let v = ritz(c);
            pairs.residuals.push(residual_of(a, m, eig.eigenvalues[c], &v));
            pairs.values.push(eig.eigenvalues[c]);
            pairs.vectors.push(v);
        }
        worst = pairs.residuals[..k].iter().copied().fold(0.0, f64::max);
        if worst <= tol {
            pairs.values.truncate(k);
            pairs.vectors.truncate(k);
            pairs.residuals.truncate(k);
            return Ok(pairs);
        }
        x = pairs.vectors;
    }
    Err(Error::NonConvergence {
        method: "block Krylov eigensolver",
        iterations: max_restarts,
        residual: worst,
    })
}

/// Largest eigenvalue of a symmetric operator by Lanczos with full
/// reorthogonalization, to relative accuracy `tol`.
pub fn lanczos_max<F: FnMut(&[f64]) -> Vec<f64>>(n: usize, mut op: F, tol: f64, max_steps: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut basis = vec![v];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut prev = f64::NAN;
    let steps = max_steps.min(n);
    for j in 0..steps {
        let mut w = op(&basis[j]);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                axpy(&mut w, -c, q);
            }
        }
        let t = DMatrix::from_fn(j + 1, j + 1, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let top = t.symmetric_eigenvalues().max();
        let b = norm(&w);
        if (j > 2 && (top - prev).abs() <= tol * top.abs()) || b <= 1e-14 * top.abs() || j + 1 == steps {
            if j + 1 == steps && j + 1 < n && (top - prev).abs() > tol * top.abs() {
                return Err(Error::NonConvergence {
                    method: "Lanczos",
                    iterations: steps,
                    residual: (top - prev).abs() / top.abs(),
                });
            }
            return Ok(top);
        }
        prev = top;
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    unreachable!("loop returns on its last step")
}

/// 2-norm condition number of an SPD matrix: dense for small problems,
/// otherwise Lanczos on `A` and on `A⁻¹` through the envelope factor.
pub fn condition_estimate(a: &BlockMatrix) -> Result<f64> {
    let n = a.dim();
    if n <= DENSE_COND_LIMIT {
        return dense_condition(a);
    }
    let lmax = lanczos_max(n, |x| a.apply(x), 1e-6, 300)?;
    let chol = EnvelopeCholesky::factor(a)?;
    let inv_min = lanczos_max(n, |x| chol.solve(x), 1e-6, 300)?;
    Ok(lmax * inv_min)
}

pub fn dense_condition(a: &BlockMatrix) -> Result<f64> {
    let d = a.to_dense();
    let ev = ((&d + d.transpose()) * 0.5).symmetric_eigenvalues();
    let (lo, hi) = (ev.min(), ev.max());
    if lo <= 0.0 {
        return Err(Error::Indefinite(format!("minimum eigenvalue {lo:e}")));
    }
    Ok(hi / lo)
}
