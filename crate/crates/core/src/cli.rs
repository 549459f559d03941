//! The `kochdg` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure (indefinite
//! system, solver or eigensolver non-convergence), 3 mesh validation failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::assembly::{assemble_system, DGSpace, DEFAULT_ETA, DEFAULT_QUAD_LEVEL};
use crate::error::{Error, Result};
use crate::linsolve::{solve_spd, DEFAULT_CG_TOL};
use crate::mesh::{
    build_boundary_refined, build_quasi_uniform, build_uniform, export_mesh, lqu_check, write_polygons, Family,
    Mesh, Point, MAX_BOUNDARY_STEPS, MAX_QUASI_LEVEL, MAX_UNIFORM_LEVEL,
};
use crate::moments::{region_moments, Region, MAX_MOMENT_DEGREE};
use crate::studies::{
    fmt_real, gaussian_problem, run_conditioning, run_convergence, run_eigen, run_increments, write_csv, Sequence,
    StudyTable,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_MESH: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "kochdg", version, about = "SIP-DG on the Koch snowflake")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a mesh, check it and write it as JSON.
    Mesh {
        #[command(flatten)]
        mesh: MeshArgs,
        /// Output mesh file (JSON); a summary is printed if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write prefractal element outlines at this depth.
        #[arg(long, value_name = "DEPTH")]
        polygons: Option<usize>,
        /// Polygon file; defaults to the mesh file with extension `.poly`.
        #[arg(long, requires = "polygons")]
        polygons_out: Option<PathBuf>,
    },
    /// Print a moment table as CSV (region, a, b, value).
    Moments {
        /// snowflake, koch, triangle or wedge1 … wedge6.
        #[arg(long)]
        region: String,
        #[arg(long, default_value_t = 4)]
        max_deg: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve `−Δu = f`, `u = 0` on the boundary.
    Solve {
        #[command(flatten)]
        mesh: MeshArgs,
        #[command(flatten)]
        disc: DiscArgs,
        /// `constant:C` or `gaussian:sigma=S`.
        #[arg(long, default_value = "constant:1")]
        rhs: Rhs,
        #[arg(long, default_value_t = DEFAULT_QUAD_LEVEL)]
        quad_level: usize,
        /// Solution file (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smallest Dirichlet eigenvalues, as study CSV.
    Eigs {
        #[command(flatten)]
        mesh: MeshArgs,
        #[command(flatten)]
        disc: DiscArgs,
        /// Number of eigenpairs (at most 20).
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..=20))]
        k: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproducible experiments, as study CSV.
    Study {
        #[command(subcommand)]
        which: StudyCommand,
    },
}

#[derive(Subcommand, Debug)]
pub enum StudyCommand {
    /// Gaussian manufactured solution on T'_0 … T'_ELL_MAX.
    Convergence {
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=2))]
        p: u64,
        #[arg(long, default_value_t = 6)]
        ell_max: usize,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long, default_value_t = DEFAULT_QUAD_LEVEL)]
        quad_level: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// L² increments between consecutive solutions for f = 1.
    Increments {
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..=2))]
        p: u64,
        /// quasi: T'_0 … T'_ELL_MAX; boundary: T'_{ELL,0} … T'_{ELL,ELLSTAR_MAX}.
        #[arg(long, value_enum, default_value_t = FamilyArg::Quasi)]
        family: FamilyArg,
        #[arg(long, default_value_t = 7)]
        ell_max: usize,
        #[arg(long, default_value_t = 3)]
        ell: usize,
        #[arg(long, default_value_t = 3)]
        ellstar_max: usize,
        #[arg(long, default_value_t = DEFAULT_QUAD_LEVEL)]
        quad_level: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Condition numbers on T'_0 … T'_ELL_MAX and T'_{ELL,0} … T'_{ELL,ELLSTAR_MAX}.
    Conditioning {
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=2))]
        p: u64,
        #[arg(long, default_value_t = 5)]
        ell_max: usize,
        #[arg(long, default_value_t = 2)]
        ell: usize,
        #[arg(long, default_value_t = 2)]
        ellstar_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First eigenvalues against the reference values.
    Eigs {
        #[command(flatten)]
        mesh: MeshArgs,
        #[command(flatten)]
        disc: DiscArgs,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..=20))]
        k: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    /// T_ℓ: all elements refined ℓ times.
    Uniform,
    /// T'_ℓ: largest elements refined first.
    Quasi,
    /// T'_{ℓ,ℓ*}: T'_ℓ refined ℓ* times towards the boundary.
    Boundary,
}

#[derive(Args, Debug, Clone)]
pub struct MeshArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::Quasi)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 2)]
    pub ell: usize,
    /// Boundary refinement steps (boundary family only).
    #[arg(long)]
    pub ellstar: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct DiscArgs {
    /// Polynomial degree.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..=2))]
    pub p: u64,
    /// Penalty parameter.
    #[arg(long, default_value_t = DEFAULT_ETA)]
    pub eta: f64,
}

/// Right-hand side of the Poisson problem.
#[derive(Clone, Debug, PartialEq)]
pub enum Rhs {
    Constant(f64),
    Gaussian { sigma: f64 },
}

impl FromStr for Rhs {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |v: &str| v.parse::<f64>().ok().filter(|x| x.is_finite());
        if let Some(c) = s.strip_prefix("constant:") {
            return num(c).map(Rhs::Constant).ok_or_else(|| format!("bad constant `{c}`"));
        }
        if let Some(v) = s.strip_prefix("gaussian:sigma=") {
            return num(v)
                .filter(|&x| x > 0.0)
                .map(|sigma| Rhs::Gaussian { sigma })
                .ok_or_else(|| format!("bad sigma `{v}`"));
        }
        Err(format!("expected `constant:C` or `gaussian:sigma=S`, got `{s}`"))
    }
}

impl std::fmt::Display for Rhs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rhs::Constant(c) => write!(f, "constant:{c}"),
            Rhs::Gaussian { sigma } => write!(f, "gaussian:sigma={sigma}"),
        }
    }
}

impl MeshArgs {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self.family {
            FamilyArg::Uniform if self.ell > MAX_UNIFORM_LEVEL => bad(format!("uniform ell must be <= {MAX_UNIFORM_LEVEL}")),
            FamilyArg::Quasi | FamilyArg::Boundary if self.ell > MAX_QUASI_LEVEL => {
                bad(format!("quasi-uniform ell must be <= {MAX_QUASI_LEVEL}"))
            }
            FamilyArg::Boundary if self.ellstar.unwrap_or(0) > MAX_BOUNDARY_STEPS => {
                bad(format!("ellstar must be <= {MAX_BOUNDARY_STEPS}"))
            }
            FamilyArg::Uniform | FamilyArg::Quasi if self.ellstar.is_some() => {
                bad("--ellstar only applies to --family boundary".into())
            }
            _ => Ok(()),
        }
    }

    fn build(&self) -> Result<Mesh> {
        let mesh = match self.family {
            FamilyArg::Uniform => build_uniform(self.ell)?,
            FamilyArg::Quasi => build_quasi_uniform(self.ell)?,
            FamilyArg::Boundary => build_boundary_refined(self.ell, self.ellstar.unwrap_or(0))?,
        };
        let report = lqu_check(&mesh);
        if !report.passed() {
            return Err(Error::MeshValidation(report.failures.join("; ")));
        }
        Ok(mesh)
    }
}

impl DiscArgs {
    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("--eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct MeshRef {
    family: Family,
    ell: usize,
    ellstar: usize,
    n_elements: usize,
}

#[derive(Serialize)]
struct SolutionFile {
    mesh: MeshRef,
    p: usize,
    basis: &'static str,
    eta: f64,
    rhs: String,
    quad_level: usize,
    iterations: usize,
    residual: f64,
    coefficients: Vec<Vec<f64>>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        e if e.is_numerical() => EXIT_NUMERICAL,
        Error::MeshValidation(_) => EXIT_MESH,
        _ => EXIT_USAGE,
    }
}

/// Runs `f` on a writer for `path`, or on `stdout` when no path is given.
fn emit(path: &Option<PathBuf>, stdout: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => f(stdout)?,
    }
    Ok(())
}

fn report_slopes(t: &StudyTable, stderr: &mut dyn Write) {
    for (name, s) in &t.slopes {
        let _ = writeln!(stderr, "slope {name}: {s:.4}");
    }
    let _ = writeln!(stderr, "elapsed: {:.2} s", t.seconds);
}

fn poly_path(out: &Option<PathBuf>, explicit: &Option<PathBuf>) -> PathBuf {
    explicit
        .clone()
        .or_else(|| out.as_ref().map(|p| p.with_extension("poly")))
        .unwrap_or_else(|| Path::new("mesh.poly").to_path_buf())
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Mesh {
            mesh,
            out,
            polygons,
            polygons_out,
        } => {
            mesh.validate()?;
            let m = mesh.build()?;
            writeln!(
                stderr,
                "{} mesh: {} elements, {} interior and {} boundary faces",
                m.family,
                m.len(),
                m.interior_faces().count(),
                m.boundary_faces().count()
            )?;
            match &out {
                Some(p) => export_mesh(&m, BufWriter::new(File::create(p)?))?,
                None => writeln!(stdout, "elements,{}", m.len())?,
            }
            if let Some(depth) = polygons {
                let path = poly_path(&out, &polygons_out);
                let mut w = BufWriter::new(File::create(path)?);
                write_polygons(&m, depth, &mut w)?;
                w.flush()?;
            }
        }
        Command::Moments { region, max_deg, out } => {
            let region = Region::from_str(&region)?;
            if max_deg > MAX_MOMENT_DEGREE {
                return Err(Error::InvalidArgument(format!("--max-deg must be <= {MAX_MOMENT_DEGREE}")));
            }
            let table = region_moments::<f64>(region, max_deg)?;
            emit(&out, stdout, |w| {
                writeln!(w, "region,a,b,value")?;
                for (a, b, v) in table.entries() {
                    writeln!(w, "{region},{a},{b},{}", fmt_real(v))?;
                }
                Ok(())
            })?;
        }
        Command::Solve {
            mesh,
            disc,
            rhs,
            quad_level,
            out,
        } => {
            mesh.validate()?;
            disc.validate()?;
            let m = mesh.build()?;
            let space = DGSpace::new(&m, disc.p as usize)?;
            let sys = match rhs {
                Rhs::Constant(c) => assemble_system(&space, disc.eta, |_: Point| c, quad_level)?,
                Rhs::Gaussian { sigma } => {
                    let g = gaussian_problem(sigma)?;
                    assemble_system(&space, disc.eta, &*g.f, quad_level)?
                }
            };
            let (x, rep) = solve_spd(&sys.a, &sys.b, DEFAULT_CG_TOL)?;
            writeln!(
                stderr,
                "{} dofs, {} CG iterations, residual {:e}, {:.2} s",
                space.n_dofs(),
                rep.iterations,
                rep.residual,
                rep.seconds
            )?;
            let np = space.np();
            let file = SolutionFile {
                mesh: MeshRef {
                    family: m.family,
                    ell: m.ell,
                    ellstar: m.ellstar,
                    n_elements: m.len(),
                },
                p: space.p,
                basis: "monomial-graded-lex",
                eta: disc.eta,
                rhs: rhs.to_string(),
                quad_level,
                iterations: rep.iterations,
                residual: rep.residual,
                coefficients: x.chunks(np).map(|c| c.to_vec()).collect(),
            };
            emit(&out, stdout, |w| {
                serde_json::to_writer(&mut *w, &file)?;
                writeln!(w)?;
                Ok(())
            })?;
        }
        Command::Eigs { mesh, disc, k, out } | Command::Study { which: StudyCommand::Eigs { mesh, disc, k, out } } => {
            mesh.validate()?;
            disc.validate()?;
            let m = mesh.build()?;
            let t = run_eigen(&m, disc.p as usize, k as usize, disc.eta)?;
            report_slopes(&t, stderr);
            emit(&out, stdout, |w| write_csv(&t.rows, w))?;
        }
        Command::Study { which } => {
            let (t, out) = match which {
                StudyCommand::Convergence {
                    p,
                    ell_max,
                    sigma,
                    quad_level,
                    out,
                } => {
                    if ell_max > MAX_QUASI_LEVEL {
                        return Err(Error::InvalidArgument(format!("--ell-max must be <= {MAX_QUASI_LEVEL}")));
                    }
                    (run_convergence(sigma, p as usize, ell_max, quad_level)?, out)
                }
                StudyCommand::Increments {
                    p,
                    family,
                    ell_max,
                    ell,
                    ellstar_max,
                    quad_level,
                    out,
                } => {
                    let seq = match family {
                        FamilyArg::Quasi => Sequence::Quasi { ell_max },
                        FamilyArg::Boundary => Sequence::Boundary { ell, ellstar_max },
                        FamilyArg::Uniform => {
                            return Err(Error::InvalidArgument("increments use quasi or boundary meshes".into()))
                        }
                    };
                    if ell_max < 1 && family == FamilyArg::Quasi || ellstar_max < 1 && family == FamilyArg::Boundary {
                        return Err(Error::InvalidArgument("need at least two meshes".into()));
                    }
                    (run_increments(p as usize, seq, quad_level)?, out)
                }
                StudyCommand::Conditioning {
                    p,
                    ell_max,
                    ell,
                    ellstar_max,
                    out,
                } => {
                    let seqs = [Sequence::Quasi { ell_max }, Sequence::Boundary { ell, ellstar_max }];
                    (run_conditioning(p as usize, &seqs)?, out)
                }
                StudyCommand::Eigs { .. } => unreachable!("handled above"),
            };
            report_slopes(&t, stderr);
            emit(&out, stdout, |w| write_csv(&t.rows, w))?;
        }
    }
    Ok(())
}

/// Runs the CLI on `args` (including the program name), writing to the given
/// streams; returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs the CLI against the process streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let code = run_with(args, &mut out, &mut err);
    let _ = out.flush();
    code
}
