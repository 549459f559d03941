//! Manufactured problems, error norms and the four numerical experiments:
//! smooth convergence, increments for a singular solution, conditioning and
//! the eigenvalue comparison.

use std::io::Write;
use std::time::Instant;

use crate::assembly::{assemble_system, relative_map, Assembler, DGSpace, Poly, DEFAULT_ETA};
use crate::error::{Error, Result};
use crate::geometry::{sample_boundary, snowflake_ifs, ReferenceCharts, Similarity};
use crate::linsolve::{condition_estimate, smallest_generalized_eigs, solve_spd, DEFAULT_CG_TOL, DEFAULT_EIG_TOL};
use crate::mesh::{build_boundary_refined, build_quasi_uniform, Family, Mesh, Point, Sim};
use crate::moments::{barycentre_nodes, composite_barycentre_koch, ReferenceIntegrals};
use crate::polybasis::local_basis;
use crate::scalar::Real;

/// Level of the Koch rule for the boundary part of the DG norm.
pub const BOUNDARY_QUAD_LEVEL: usize = 6;

/// First ten Dirichlet eigenvalues of the snowflake scaled by `1/√3`.
pub const REFERENCE_EIGENVALUES: [f64; 10] = [
    39.348, 97.436, 97.436, 165.406, 165.406, 190.370, 208.608, 272.406, 272.406, 312.353,
];

type Field = Box<dyn Fn(Point) -> f64 + Send + Sync>;
type VecField = Box<dyn Fn(Point) -> (f64, f64) + Send + Sync>;

/// `−Δu = f` in Ω with `u` known.
pub struct ManufacturedProblem {
    pub u: Field,
    pub grad_u: VecField,
    pub f: Field,
    /// `max |u|` over boundary sample points.
    pub boundary_max: f64,
}

impl ManufacturedProblem {
    pub fn zero() -> Self {
        Self {
            u: Box::new(|_| 0.0),
            grad_u: Box::new(|_| (0.0, 0.0)),
            f: Box::new(|_| 0.0),
            boundary_max: 0.0,
        }
    }
}

/// `u = exp(−(x² + y²)/σ²)`.
pub fn gaussian_problem(sigma: f64) -> Result<ManufacturedProblem> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("σ = {sigma} must be positive")));
    }
    let s2 = sigma * sigma;
    let u = move |x: Point| (-(x.x * x.x + x.y * x.y) / s2).exp();
    let boundary_max = sample_boundary::<f64>(6)?
        .into_iter()
        .map(u)
        .fold(0.0, f64::max);
    Ok(ManufacturedProblem {
        u: Box::new(u),
        grad_u: Box::new(move |x| {
            let e = u(x);
            (-2.0 * x.x / s2 * e, -2.0 * x.y / s2 * e)
        }),
        f: Box::new(move |x| {
            let r2 = x.x * x.x + x.y * x.y;
            (4.0 / s2 - 4.0 * r2 / (s2 * s2)) * u(x)
        }),
        boundary_max,
    })
}

/// Squared contributions to the DG norm of `u − u_h`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DgErrorParts {
    pub gradient: f64,
    pub jump: f64,
    pub boundary: f64,
    pub l2: f64,
}

impl DgErrorParts {
    pub fn err_dg(&self) -> f64 {
        (self.gradient + self.jump + self.boundary).sqrt()
    }

    pub fn err_l2(&self) -> f64 {
        self.l2.sqrt()
    }
}

/// `Σ_F h_F^{-d} ∫_F (u_h^- − u_h^+)²` over interior faces, exactly.
pub fn jump_seminorm_squared(space: &DGSpace, coeffs: &[f64], ints: &ReferenceIntegrals<f64>) -> Result<f64> {
    let mesh = space.mesh;
    let refs = ReferenceCharts::<f64>::new();
    let d = f64::koch_dim();
    let mut total = 0.0;
    for f in mesh.interior_faces() {
        let (m, n) = (f.minus, f.plus.expect("interior face"));
        let (em, en) = (&mesh.elements[m], &mesh.elements[n]);
        let gamma = refs.face_chart(f.slot_minus as usize);
        let n_from_m = relative_map(f.slot_plus.expect("interior face") as usize, em.chart.rot(), en.chart.rot());
        let um = space.local_poly(coeffs, m).pullback(&gamma);
        let un = space.local_poly(coeffs, n).pullback(&n_from_m.compose(&gamma));
        let jump = &um - &un;
        let measure = (em.chart.scale / f.h).powf(d);
        total += measure * ints.koch.integrate(&(&jump * &jump))?;
    }
    Ok(total)
}

/// DG-norm and L² errors of the discrete function `coeffs` against the
/// manufactured solution. Volume terms use the composite barycentre rule at
/// `quad_level`, interior jumps are exact and boundary terms use the Koch
/// rule at [`BOUNDARY_QUAD_LEVEL`].
pub fn dg_error_parts(
    space: &DGSpace,
    coeffs: &[f64],
    problem: &ManufacturedProblem,
    quad_level: usize,
) -> Result<DgErrorParts> {
    let mesh = space.mesh;
    let np = space.np();
    let nodes = barycentre_nodes::<f64>(quad_level)?;
    let basis = local_basis::<f64>(space.p);
    let grads: Vec<(Poly, Poly)> = basis.iter().map(|b| b.gradient()).collect();
    let tab: Vec<Vec<(f64, f64, f64)>> = nodes
        .iter()
        .map(|(x, _)| {
            basis
                .iter()
                .zip(&grads)
                .map(|(b, (gx, gy))| (b.evaluate(*x), gx.evaluate(*x), gy.evaluate(*x)))
                .collect()
        })
        .collect();
    let mut parts = DgErrorParts::default();
    for (m, e) in mesh.elements.iter().enumerate() {
        let c = &coeffs[m * np..(m + 1) * np];
        let s = e.chart.scale;
        let jac = s * s;
        let (mut g2, mut l2) = (0.0, 0.0);
        for ((xh, w), row) in nodes.iter().zip(&tab) {
            let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
            for (ci, (b, bx, by)) in c.iter().zip(row) {
                v += ci * b;
                gx += ci * bx;
                gy += ci * by;
            }
            // reference gradient to physical: rotate, divide by the scale
            let g = e.chart.apply_linear(Point::new(gx, gy)) * (1.0 / jac);
            let x = e.chart.apply(*xh);
            let (ux, uy) = (problem.grad_u)(x);
            let du = (problem.u)(x) - v;
            g2 += w * ((ux - g.x).powi(2) + (uy - g.y).powi(2));
            l2 += w * du * du;
        }
        parts.gradient += jac * g2;
        parts.l2 += jac * l2;
    }
    let ints = ReferenceIntegrals::<f64>::new();
    parts.jump = jump_seminorm_squared(space, coeffs, &ints)?;
    let d = f64::koch_dim();
    for f in mesh.boundary_faces() {
        let e = &mesh.elements[f.minus];
        let chart = f.chart(&mesh.elements);
        let local = space.local_poly(coeffs, f.minus);
        let inv = e.chart.invert();
        let val = composite_barycentre_koch(
            |x| {
                let r = (problem.u)(x) - local.evaluate(inv.apply(x));
                r * r
            },
            &chart,
            BOUNDARY_QUAD_LEVEL,
        )?;
        parts.boundary += val / f.h.powf(d);
    }
    Ok(parts)
}

/// `(err_dg, err_l2)`.
pub fn dg_error(space: &DGSpace, coeffs: &[f64], problem: &ManufacturedProblem, quad_level: usize) -> Result<(f64, f64)> {
    let parts = dg_error_parts(space, coeffs, problem, quad_level)?;
    Ok((parts.err_dg(), parts.err_l2()))
}

/// Map from the reference frame of `fine` to that of its ancestor `coarse`.
fn descendant_map(coarse: &[u8], fine: &[u8]) -> Sim {
    let ifs = snowflake_ifs::<f64>();
    fine[coarse.len()..]
        .iter()
        .fold(Similarity::identity(), |acc, &d| acc.compose(&ifs[d as usize - 1]))
}

/// Exact `‖u_coarse − u_fine‖_{L²(Ω)}` for nested meshes.
pub fn increment_error(
    coarse: &DGSpace,
    coeffs_coarse: &[f64],
    fine: &DGSpace,
    coeffs_fine: &[f64],
) -> Result<f64> {
    let anc = coarse.mesh.ancestors_of(fine.mesh)?;
    let ints = ReferenceIntegrals::<f64>::new();
    let mut total = 0.0;
    for (k, e) in fine.mesh.elements.iter().enumerate() {
        let a = anc[k];
        let map = descendant_map(&coarse.mesh.elements[a].word, &e.word);
        let uc = coarse.local_poly(coeffs_coarse, a).pullback(&map);
        let uf = fine.local_poly(coeffs_fine, k);
        let diff = &uc - &uf;
        total += e.chart.scale * e.chart.scale * ints.snowflake.integrate(&(&diff * &diff))?;
    }
    Ok(total.max(0.0).sqrt())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StudyRow {
    pub study: &'static str,
    pub family: Option<Family>,
    pub ell: usize,
    pub ellstar: usize,
    pub p: usize,
    pub n_elements: usize,
    pub n_dofs: usize,
    pub h_max: f64,
    pub h_boundary: f64,
    pub err_dg: Option<f64>,
    pub err_l2: Option<f64>,
    pub rate_dg: Option<f64>,
    pub rate_l2: Option<f64>,
    pub cond: Option<f64>,
    pub eig_index: Option<usize>,
    pub lambda: Option<f64>,
    pub lambda_scaled: Option<f64>,
    pub lambda_ref: Option<f64>,
    pub rel_err: Option<f64>,
}

impl StudyRow {
    fn for_mesh(study: &'static str, mesh: &Mesh, p: usize) -> Self {
        Self {
            study,
            family: Some(mesh.family),
            ell: mesh.ell,
            ellstar: mesh.ellstar,
            p,
            n_elements: mesh.len(),
            n_dofs: mesh.len() * crate::polybasis::dim(p),
            h_max: mesh.h_max(),
            h_boundary: mesh.h_boundary(),
            ..Default::default()
        }
    }
}

/// Rows of one experiment together with fitted log-log slopes.
#[derive(Clone, Debug, Default)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    /// `(name, slope)` pairs, e.g. `("dg", 1.02)`.
    pub slopes: Vec<(String, f64)>,
    pub seconds: f64,
}

impl StudyTable {
    pub fn slope(&self, name: &str) -> Option<f64> {
        self.slopes.iter().find(|(n, _)| n == name).map(|(_, s)| *s)
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn last3(v: &[f64]) -> &[f64] {
    &v[v.len().saturating_sub(3)..]
}

fn solve_on(mesh: &Mesh, p: usize, f: &(dyn Fn(Point) -> f64 + Sync), quad_level: usize) -> Result<Vec<f64>> {
    let space = DGSpace::new(mesh, p)?;
    let sys = assemble_system(&space, DEFAULT_ETA, f, quad_level)?;
    Ok(solve_spd(&sys.a, &sys.b, DEFAULT_CG_TOL)?.0)
}

/// Gaussian problem on `T'_0 … T'_{ell_max}`; rates are with respect to `h_max`.
pub fn run_convergence(sigma: f64, p: usize, ell_max: usize, quad_level: usize) -> Result<StudyTable> {
    let start = Instant::now();
    let problem = gaussian_problem(sigma)?;
    let mut rows: Vec<StudyRow> = Vec::new();
    for ell in 0..=ell_max {
        let mesh = build_quasi_uniform(ell)?;
        let u = solve_on(&mesh, p, &*problem.f, quad_level)?;
        let space = DGSpace::new(&mesh, p)?;
        let (dg, l2) = dg_error(&space, &u, &problem, quad_level)?;
        let mut row = StudyRow::for_mesh("convergence", &mesh, p);
        row.err_dg = Some(dg);
        row.err_l2 = Some(l2);
        if let Some(prev) = rows.last() {
            let lh = (row.h_max / prev.h_max).ln();
            row.rate_dg = Some((dg / prev.err_dg.unwrap()).ln() / lh);
            row.rate_l2 = Some((l2 / prev.err_l2.unwrap()).ln() / lh);
        }
        rows.push(row);
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h_max).collect();
    let dg: Vec<f64> = rows.iter().map(|r| r.err_dg.unwrap()).collect();
    let l2: Vec<f64> = rows.iter().map(|r| r.err_l2.unwrap()).collect();
    let mut slopes = Vec::new();
    if rows.len() >= 2 {
        slopes.push(("dg".to_string(), loglog_slope(last3(&h), last3(&dg))));
        slopes.push(("l2".to_string(), loglog_slope(last3(&h), last3(&l2))));
    }
    Ok(StudyTable {
        rows,
        slopes,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// A nested mesh sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sequence {
    /// `T'_0 … T'_{ell_max}`.
    Quasi { ell_max: usize },
    /// `T'_{ell,0} … T'_{ell,ellstar_max}`.
    Boundary { ell: usize, ellstar_max: usize },
}

impl Sequence {
    pub fn meshes(&self) -> Result<Vec<Mesh>> {
        match *self {
            Sequence::Quasi { ell_max } => (0..=ell_max).map(build_quasi_uniform).collect(),
            Sequence::Boundary { ell, ellstar_max } => {
                (0..=ellstar_max).map(|s| build_boundary_refined(ell, s)).collect()
            }
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Sequence::Quasi { .. } => "quasi",
            Sequence::Boundary { .. } => "boundary",
        }
    }
}

/// `f = 1`: increments `‖u_{h_i} − u_{h_{i+1}}‖_{L²}` reported on the row of
/// the coarser mesh, with the slope against its DOF count.
pub fn run_increments(p: usize, seq: Sequence, quad_level: usize) -> Result<StudyTable> {
    let start = Instant::now();
    let meshes = seq.meshes()?;
    let one = |_: Point| 1.0;
    let sols: Vec<Vec<f64>> = meshes
        .iter()
        .map(|m| solve_on(m, p, &one, quad_level))
        .collect::<Result<_>>()?;
    let mut rows: Vec<StudyRow> = Vec::new();
    for i in 0..meshes.len() - 1 {
        let coarse = DGSpace::new(&meshes[i], p)?;
        let fine = DGSpace::new(&meshes[i + 1], p)?;
        let inc = increment_error(&coarse, &sols[i], &fine, &sols[i + 1])?;
        let mut row = StudyRow::for_mesh("increments", &meshes[i], p);
        row.err_l2 = Some(inc);
        if let Some(prev) = rows.last() {
            let ln = (row.n_dofs as f64 / prev.n_dofs as f64).ln();
            row.rate_l2 = Some((inc / prev.err_l2.unwrap()).ln() / ln);
        }
        rows.push(row);
    }
    let n: Vec<f64> = rows.iter().map(|r| r.n_dofs as f64).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.err_l2.unwrap()).collect();
    let slopes = vec![(seq.name().to_string(), loglog_slope(&n, &e))];
    Ok(StudyTable {
        rows,
        slopes,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Condition numbers of `A_SIP` along each sequence, with slopes against `N`.
pub fn run_conditioning(p: usize, seqs: &[Sequence]) -> Result<StudyTable> {
    let start = Instant::now();
    let mut table = StudyTable::default();
    for seq in seqs {
        let mut n = Vec::new();
        let mut c = Vec::new();
        for mesh in seq.meshes()? {
            let space = DGSpace::new(&mesh, p)?;
            let a = Assembler::new(space).assemble_a(DEFAULT_ETA);
            let cond = condition_estimate(&a)?;
            let mut row = StudyRow::for_mesh("conditioning", &mesh, p);
            row.cond = Some(cond);
            n.push(row.n_dofs as f64);
            c.push(cond);
            table.rows.push(row);
        }
        table.slopes.push((seq.name().to_string(), loglog_slope(&n, &c)));
    }
    table.seconds = start.elapsed().as_secs_f64();
    Ok(table)
}

/// The `k` smallest eigenvalues on `mesh`, compared after scaling by 3 with
/// [`REFERENCE_EIGENVALUES`].
pub fn run_eigen(mesh: &Mesh, p: usize, k: usize, eta: f64) -> Result<StudyTable> {
    let start = Instant::now();
    let space = DGSpace::new(mesh, p)?;
    if eta <= 0.0 {
        return Err(Error::InvalidArgument(format!("penalty η = {eta} must be positive")));
    }
    let mut asm = Assembler::new(space);
    let a = asm.assemble_a(eta);
    let m = asm.assemble_m();
    let eig = smallest_generalized_eigs(&a, &m, k, DEFAULT_EIG_TOL)?;
    let rows = eig
        .values
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let mut row = StudyRow::for_mesh("eigs", mesh, p);
            let scaled = 3.0 * lambda;
            row.eig_index = Some(i + 1);
            row.lambda = Some(lambda);
            row.lambda_scaled = Some(scaled);
            if let Some(&r) = REFERENCE_EIGENVALUES.get(i) {
                row.lambda_ref = Some(r);
                row.rel_err = Some((scaled - r).abs() / r);
            }
            row
        })
        .collect();
    Ok(StudyTable {
        rows,
        slopes: Vec::new(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub const CSV_HEADER: &str = "study,family,ell,ellstar,p,n_elements,n_dofs,h_max,h_boundary,err_dg,err_l2,rate_dg,rate_l2,cond,eig_index,lambda,lambda_scaled,lambda_ref,rel_err";

/// Seventeen significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[StudyRow], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.study,
            r.family.map(|f| f.to_string()).unwrap_or_default(),
            r.ell,
            r.ellstar,
            r.p,
            r.n_elements,
            r.n_dofs,
            fmt_real(r.h_max),
            fmt_real(r.h_boundary),
            opt(r.err_dg),
            opt(r.err_l2),
            opt(r.rate_dg),
            opt(r.rate_l2),
            opt(r.cond),
            r.eig_index.map(|i| i.to_string()).unwrap_or_default(),
            opt(r.lambda),
            opt(r.lambda_scaled),
            opt(r.lambda_ref),
            opt(r.rel_err),
        )?;
    }
    Ok(())
}
