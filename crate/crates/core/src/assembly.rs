//! Block assembly of the SIP-DG system `A = G + C + Cᵀ + P`, the mass matrix
//! and the load vector.
//!
//! All integrals are evaluated on reference domains. The wedge forms `I_▼`,
//! `I_▲` are invariant under similarities, so they are computed in the
//! reference frame of the element that owns the wedge, with the other
//! element's basis pulled back through `ψ_own^{-1} ∘ ψ_other`. Every face block
//! depends only on the slot pair and the relative rotation of the two
//! elements, so blocks are built once per pattern and reused.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{ReferenceCharts, Similarity, Vec2};
use crate::mesh::{Face, Mesh, Point, Sim};
use crate::moments::{barycentre_nodes, segment_gauss, ReferenceIntegrals};
use crate::polybasis::{dim, local_basis, Poly2};
use crate::scalar::cos_sin_twelfth;

/// Default penalty parameter.
pub const DEFAULT_ETA: f64 = 10.0;
/// Default level of the composite barycentre rule for load vectors.
pub const DEFAULT_QUAD_LEVEL: usize = 4;

pub type Poly = Poly2<f64>;

/// Piecewise polynomials of degree `p` on a mesh, element-major DOF ordering.
#[derive(Clone, Copy, Debug)]
pub struct DGSpace<'a> {
    pub mesh: &'a Mesh,
    pub p: usize,
}

impl<'a> DGSpace<'a> {
    pub fn new(mesh: &'a Mesh, p: usize) -> Result<Self> {
        if !(1..=2).contains(&p) {
            return Err(Error::InvalidArgument(format!("degree p = {p} not in {{1, 2}}")));
        }
        Ok(Self { mesh, p })
    }

    pub fn np(&self) -> usize {
        dim(self.p)
    }

    pub fn n_dofs(&self) -> usize {
        self.np() * self.mesh.len()
    }

    /// Value of the discrete function with coefficients `u` at reference
    /// point `xh` of element `m`.
    pub fn evaluate_local(&self, u: &[f64], m: usize, xh: Point) -> f64 {
        let np = self.np();
        local_basis::<f64>(self.p)
            .iter()
            .zip(&u[m * np..(m + 1) * np])
            .map(|(phi, c)| c * phi.evaluate(xh))
            .sum()
    }

    /// Local polynomial of element `m` in reference coordinates.
    pub fn local_poly(&self, u: &[f64], m: usize) -> Poly {
        let np = self.np();
        Poly::from_coeffs(self.p, u[m * np..(m + 1) * np].to_vec())
    }
}

/// Sparse matrix of dense `np × np` blocks, stored by block row with columns
/// sorted. Blocks are row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    np: usize,
    rows: Vec<Vec<(usize, Vec<f64>)>>,
}

impl BlockMatrix {
    pub fn zeros(np: usize, nb: usize) -> Self {
        Self {
            np,
            rows: vec![Vec::new(); nb],
        }
    }

    pub fn block_dim(&self) -> usize {
        self.np
    }

    pub fn block_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.np * self.rows.len()
    }

    pub fn nnz_blocks(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Adds `s * block` to block `(m, n)`.
    pub fn add_block(&mut self, m: usize, n: usize, block: &[f64], s: f64) {
        debug_assert_eq!(block.len(), self.np * self.np);
        let row = &mut self.rows[m];
        let pos = match row.binary_search_by_key(&n, |(c, _)| *c) {
            Ok(p) => p,
            Err(p) => {
                row.insert(p, (n, vec![0.0; block.len()]));
                p
            }
        };
        for (a, b) in row[pos].1.iter_mut().zip(block) {
            *a += s * b;
        }
    }

    pub fn block(&self, m: usize, n: usize) -> Option<&[f64]> {
        let row = &self.rows[m];
        row.binary_search_by_key(&n, |(c, _)| *c)
            .ok()
            .map(|p| row[p].1.as_slice())
    }

    pub fn row_blocks(&self, m: usize) -> &[(usize, Vec<f64>)] {
        &self.rows[m]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let np = self.np;
        self.block(i / np, j / np)
            .map_or(0.0, |b| b[(i % np) * np + j % np])
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        let np = self.np;
        for (m, row) in self.rows.iter().enumerate() {
            let ym = &mut y[m * np..(m + 1) * np];
            ym.fill(0.0);
            for (n, b) in row {
                let xn = &x[n * np..(n + 1) * np];
                for i in 0..np {
                    let bi = &b[i * np..(i + 1) * np];
                    ym[i] += bi.iter().zip(xn).map(|(a, v)| a * v).sum::<f64>();
                }
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.mul_vec(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let np = self.np;
        let mut t = Self::zeros(np, self.rows.len());
        for (m, row) in self.rows.iter().enumerate() {
            for (n, b) in row {
                let mut bt = vec![0.0; np * np];
                for i in 0..np {
                    for j in 0..np {
                        bt[j * np + i] = b[i * np + j];
                    }
                }
                t.rows[*n].push((m, bt));
            }
        }
        t
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        assert_eq!(self.np, other.np);
        let mut out = self.clone();
        for (m, row) in other.rows.iter().enumerate() {
            for (n, b) in row {
                out.add_block(m, *n, b, s);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter().flat_map(|(_, b)| b.iter()))
            .fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `max |A - Aᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        self.add_scaled(&self.transpose(), -1.0).max_abs()
    }

    /// Dense copy of the diagonal blocks.
    pub fn diagonal_blocks(&self) -> Vec<Vec<f64>> {
        (0..self.rows.len())
            .map(|m| {
                self.block(m, m)
                    .map_or_else(|| vec![0.0; self.np * self.np], <[f64]>::to_vec)
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let np = self.np;
        let mut d = DMatrix::zeros(n, n);
        for (m, row) in self.rows.iter().enumerate() {
            for (k, b) in row {
                for i in 0..np {
                    for j in 0..np {
                        d[(m * np + i, k * np + j)] = b[i * np + j];
                    }
                }
            }
        }
        d
    }

    /// Scalar sparsity pattern as `(row, col, value)` triplets, row-major.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let np = self.np;
        let mut out = Vec::with_capacity(self.nnz_blocks() * np * np);
        for (m, row) in self.rows.iter().enumerate() {
            for i in 0..np {
                for (k, b) in row {
                    for j in 0..np {
                        out.push((m * np + i, k * np + j, b[i * np + j]));
                    }
                }
            }
        }
        out
    }
}

/// Wedge and segment data for one side of a face, in reference coordinates.
#[derive(Clone, Debug)]
pub struct WedgeQuadContext {
    /// Wedge indices in `1..=6`.
    pub wedges: Vec<usize>,
    /// Segment end points `p_i` (segments run from the origin) with the unit
    /// normal pointing out of the wedge union.
    pub segments: Vec<(Point, Point)>,
}

impl WedgeQuadContext {
    /// `▼̂ = W_i`, `∨̂ = S_i ∪ S_{i+1}`.
    pub fn down(slot: usize) -> Self {
        Self::span(slot, 1)
    }

    /// `▲̂ = W_j ∪ W_{j+1}`, `∧̂ = S_j ∪ S_{j+2}`.
    pub fn up(slot: usize) -> Self {
        Self::span(slot, 2)
    }

    fn span(first: usize, count: usize) -> Self {
        let refs = ReferenceCharts::<f64>::new();
        let wrap = |i: usize| (i - 1) % 6 + 1;
        let start = refs.vertex(first);
        let end = refs.vertex(first + count);
        Self {
            wedges: (0..count).map(|k| wrap(first + k)).collect(),
            segments: vec![
                (start, Point::new(start.y, -start.x)),
                (end, Point::new(-end.y, end.x)),
            ],
        }
    }
}

/// `∫_W ∇w·∇v + (Δw) v − ∫_S ∂_n w v`, i.e. `I_▼` or `I_▲` depending on `ctx`.
pub fn compute_i(w: &Poly, v: &Poly, ctx: &WedgeQuadContext, ints: &ReferenceIntegrals<f64>) -> Result<f64> {
    let (wx, wy) = w.gradient();
    let (vx, vy) = v.gradient();
    let vol = &(&(&wx * &vx) + &(&wy * &vy)) + &(&w.laplacian() * v);
    let mut total = 0.0;
    for &i in &ctx.wedges {
        total += ints.wedge(i).integrate(&vol)?;
    }
    let npts = (w.deg() + v.deg()).div_ceil(2).max(1);
    for (end, n) in &ctx.segments {
        for (x, wt) in segment_gauss(Point::zero(), *end, npts) {
            let dn = wx.evaluate(x) * n.x + wy.evaluate(x) * n.y;
            total -= wt * dn * v.evaluate(x);
        }
    }
    Ok(total)
}

/// `I_▼` on the wedge of `slot`.
pub fn compute_i_down(w: &Poly, v: &Poly, slot: usize, ints: &ReferenceIntegrals<f64>) -> Result<f64> {
    compute_i(w, v, &WedgeQuadContext::down(slot), ints)
}

/// `I_▲` on the wedge pair starting at `slot`.
pub fn compute_i_up(w: &Poly, v: &Poly, slot: usize, ints: &ReferenceIntegrals<f64>) -> Result<f64> {
    compute_i(w, v, &WedgeQuadContext::up(slot), ints)
}

/// `ψ_{K+}^{-1} ∘ ψ_{K-}` for an interior face, built exactly from the slot of
/// the smaller element and the rotation difference.
pub fn relative_map(slot_plus: usize, rot_minus: i32, rot_plus: i32) -> Sim {
    let (c, s) = cos_sin_twelfth::<f64>(2 * slot_plus as i32 - 1);
    Similarity::new(3f64.sqrt(), rot_minus - rot_plus, Vec2::new(2.0 * c, 2.0 * s))
}

/// Blocks of one interior face pattern: `C` and `P` (at unit η)
/// contributions, indexed `[mm, mn, nm, nn]`.
#[derive(Clone, Debug)]
struct FaceBlocks {
    c: [Vec<f64>; 4],
    p: [Vec<f64>; 4],
}

/// Assembles `G`, `C`, `P` and `M` for a space, caching face patterns.
pub struct Assembler<'a> {
    space: DGSpace<'a>,
    ints: ReferenceIntegrals<f64>,
    basis: Vec<Poly>,
    refs: ReferenceCharts<f64>,
    interior: HashMap<(u8, u8, i32), FaceBlocks>,
    boundary: HashMap<u8, FaceBlocks>,
}

impl<'a> Assembler<'a> {
    pub fn new(space: DGSpace<'a>) -> Self {
        Self {
            space,
            ints: ReferenceIntegrals::new(),
            basis: local_basis(space.p),
            refs: ReferenceCharts::new(),
            interior: HashMap::new(),
            boundary: HashMap::new(),
        }
    }

    pub fn integrals(&self) -> &ReferenceIntegrals<f64> {
        &self.ints
    }

    fn np(&self) -> usize {
        self.basis.len()
    }

    /// `(G_mm)_ij = ∫_Ω̂ ∇φ̂_i·∇φ̂_j`, the same for every element.
    pub fn g_block(&self) -> Vec<f64> {
        let np = self.np();
        let mut b = vec![0.0; np * np];
        for i in 0..np {
            let (ix, iy) = self.basis[i].gradient();
            for j in 0..np {
                let (jx, jy) = self.basis[j].gradient();
                let g = &(&ix * &jx) + &(&iy * &jy);
                b[i * np + j] = self.ints.snowflake.integrate(&g).expect("degree <= 2");
            }
        }
        b
    }

    /// `∫_Ω̂ φ̂_i φ̂_j`; the element block is this times `(h_K/2)²`.
    pub fn mass_reference_block(&self) -> Vec<f64> {
        let np = self.np();
        let mut b = vec![0.0; np * np];
        for i in 0..np {
            for j in 0..np {
                let prod = &self.basis[i] * &self.basis[j];
                b[i * np + j] = self.ints.snowflake.integrate(&prod).expect("degree <= 4");
            }
        }
        b
    }

    /// `J[(φ̂_i ∘ a)(φ̂_j ∘ b)]` for all `i, j`.
    fn koch_block(&self, a: &Sim, b: &Sim) -> Vec<f64> {
        let np = self.np();
        let pa: Vec<Poly> = self.basis.iter().map(|p| p.pullback(a)).collect();
        let pb: Vec<Poly> = self.basis.iter().map(|p| p.pullback(b)).collect();
        let mut out = vec![0.0; np * np];
        for i in 0..np {
            for j in 0..np {
                out[i * np + j] = self.ints.koch.integrate(&(&pa[i] * &pb[j])).expect("degree <= 4");
            }
        }
        out
    }

    /// `out_ij = s · I(basis_j, test_i)` on `ctx`.
    fn i_block(&self, trial: &[Poly], test: &[Poly], ctx: &WedgeQuadContext, s: f64) -> Vec<f64> {
        let np = self.np();
        let mut out = vec![0.0; np * np];
        for i in 0..np {
            for j in 0..np {
                out[i * np + j] = s * compute_i(&trial[j], &test[i], ctx, &self.ints).expect("degree <= 2");
            }
        }
        out
    }

    fn interior_blocks(&mut self, slot_minus: u8, slot_plus: u8, rot_diff: i32) -> &FaceBlocks {
        let key = (slot_minus, slot_plus, rot_diff);
        if !self.interior.contains_key(&key) {
            let n_from_m = relative_map(slot_plus as usize, rot_diff, 0);
            let fb = self.build_interior(slot_minus as usize, slot_plus as usize, &n_from_m);
            self.interior.insert(key, fb);
        }
        &self.interior[&key]
    }

    /// `n_from_m` is `ψ_n^{-1} ∘ ψ_m`, from the reference frame of `K_m` (minus)
    /// to that of `K_n` (plus).
    fn build_interior(&self, sm: usize, sp: usize, n_from_m: &Sim) -> FaceBlocks {
        let n_from_m = *n_from_m;
        let m_from_n = n_from_m.invert();
        let down = WedgeQuadContext::down(sm);
        let up = WedgeQuadContext::up(sp);
        let b = &self.basis;
        let phi_m_on_n: Vec<Poly> = b.iter().map(|p| p.pullback(&m_from_n)).collect();
        let phi_n_on_m: Vec<Poly> = b.iter().map(|p| p.pullback(&n_from_m)).collect();
        let c = [
            self.i_block(b, b, &down, -0.5),
            self.i_block(b, &phi_m_on_n, &up, 0.5),
            self.i_block(b, &phi_n_on_m, &down, 0.5),
            self.i_block(b, b, &up, -0.5),
        ];
        let rho_m = self.refs.face_chart(sm);
        let rho_n = n_from_m.compose(&rho_m);
        let p = [
            self.koch_block(&rho_m, &rho_m),
            self.koch_block(&rho_m, &rho_n).iter().map(|v| -v).collect(),
            self.koch_block(&rho_n, &rho_m).iter().map(|v| -v).collect(),
            self.koch_block(&rho_n, &rho_n),
        ];
        FaceBlocks { c, p }
    }

    fn boundary_blocks(&mut self, slot: u8) -> &FaceBlocks {
        if !self.boundary.contains_key(&slot) {
            let s = slot as usize;
            let b = &self.basis;
            let c = self.i_block(b, b, &WedgeQuadContext::down(s), -1.0);
            let g = self.refs.face_chart(s);
            let p = self.koch_block(&g, &g);
            let empty = Vec::new();
            self.boundary.insert(
                slot,
                FaceBlocks {
                    c: [c, empty.clone(), empty.clone(), empty.clone()],
                    p: [p, empty.clone(), empty.clone(), empty],
                },
            );
        }
        &self.boundary[&slot]
    }

    fn face_key(&self, f: &Face) -> (u8, u8, i32) {
        let el = &self.space.mesh.elements;
        let rm = el[f.minus].chart.rot();
        let rn = el[f.plus.unwrap()].chart.rot();
        (f.slot_minus, f.slot_plus.unwrap(), (rm - rn).rem_euclid(12))
    }

    pub fn assemble_g(&self) -> BlockMatrix {
        let np = self.np();
        let g = self.g_block();
        let mut out = BlockMatrix::zeros(np, self.space.mesh.len());
        for m in 0..self.space.mesh.len() {
            out.add_block(m, m, &g, 1.0);
        }
        out
    }

    pub fn assemble_m(&self) -> BlockMatrix {
        let np = self.np();
        let mref = self.mass_reference_block();
        let mut out = BlockMatrix::zeros(np, self.space.mesh.len());
        for (m, e) in self.space.mesh.elements.iter().enumerate() {
            let s = e.chart.scale;
            out.add_block(m, m, &mref, s * s);
        }
        out
    }

    /// Consistency matrix; `interior_only` skips boundary faces.
    pub fn assemble_c(&mut self) -> BlockMatrix {
        self.assemble_faces(true, 1.0, true)
    }

    pub fn assemble_p(&mut self, eta: f64) -> BlockMatrix {
        self.assemble_faces(false, eta, true)
    }

    /// Penalty restricted to interior faces.
    pub fn assemble_p_interior(&mut self, eta: f64) -> BlockMatrix {
        self.assemble_faces(false, eta, false)
    }

    fn assemble_faces(&mut self, consistency: bool, scale: f64, with_boundary: bool) -> BlockMatrix {
        let mesh = self.space.mesh;
        let mut out = BlockMatrix::zeros(self.np(), mesh.len());
        for f in &mesh.faces {
            let m = f.minus;
            match f.plus {
                Some(n) => {
                    let key = self.face_key(f);
                    let fb = self.interior_blocks(key.0, key.1, key.2);
                    let blocks = if consistency { &fb.c } else { &fb.p };
                    out.add_block(m, m, &blocks[0], scale);
                    out.add_block(m, n, &blocks[1], scale);
                    out.add_block(n, m, &blocks[2], scale);
                    out.add_block(n, n, &blocks[3], scale);
                }
                None if with_boundary => {
                    let fb = self.boundary_blocks(f.slot_minus);
                    let blocks = if consistency { &fb.c } else { &fb.p };
                    out.add_block(m, m, &blocks[0], scale);
                }
                None => {}
            }
        }
        out
    }

    /// `A_SIP = G + C + Cᵀ + P`.
    pub fn assemble_a(&mut self, eta: f64) -> BlockMatrix {
        let c = self.assemble_c();
        let p = self.assemble_p(eta);
        self.assemble_g()
            .add_scaled(&c, 1.0)
            .add_scaled(&c.transpose(), 1.0)
            .add_scaled(&p, 1.0)
    }
}

/// `(b_m)_i = (h_K/2)² Q_level[(f ∘ ψ_K) φ̂_i]`.
pub fn assemble_b<F: Fn(Point) -> f64>(space: &DGSpace, f: F, quad_level: usize) -> Result<Vec<f64>> {
    let nodes = barycentre_nodes::<f64>(quad_level)?;
    let basis = local_basis::<f64>(space.p);
    let vals: Vec<Vec<f64>> = nodes
        .iter()
        .map(|(x, _)| basis.iter().map(|p| p.evaluate(*x)).collect())
        .collect();
    let np = space.np();
    let mut b = vec![0.0; space.n_dofs()];
    for (m, e) in space.mesh.elements.iter().enumerate() {
        let jac = e.chart.scale * e.chart.scale;
        let bm = &mut b[m * np..(m + 1) * np];
        for ((x, w), phi) in nodes.iter().zip(&vals) {
            let fx = w * jac * f(e.chart.apply(*x));
            for i in 0..np {
                bm[i] += fx * phi[i];
            }
        }
    }
    Ok(b)
}

/// The assembled system for one mesh, degree and penalty.
pub struct System {
    pub a: BlockMatrix,
    pub b: Vec<f64>,
}

pub fn assemble_system<F: Fn(Point) -> f64>(
    space: &DGSpace,
    eta: f64,
    f: F,
    quad_level: usize,
) -> Result<System> {
    if eta <= 0.0 {
        return Err(Error::InvalidArgument(format!("penalty η = {eta} must be positive")));
    }
    let mut asm = Assembler::new(*space);
    let a = asm.assemble_a(eta);
    let b = assemble_b(space, f, quad_level)?;
    Ok(System { a, b })
}

/// Coefficient vector of the global polynomial `q` (physical coordinates).
pub fn interpolate_global(space: &DGSpace, q: &Poly) -> Vec<f64> {
    let mut out = Vec::with_capacity(space.n_dofs());
    for e in &space.mesh.elements {
        let local = q.pullback(&e.chart).raised(space.p);
        out.extend_from_slice(&local.coeffs()[..space.np()]);
    }
    out
}
