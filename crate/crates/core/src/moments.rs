//! Exact polynomial integration on the reference snowflake, its six wedges,
//! the inner triangle and the Koch curve, plus composite barycentre rules for
//! non-polynomial integrands and Gauss–Legendre rules on segments.
//!
//! Snowflake and Koch-curve moments come from the self-similarity relation
//! `μ[f] = Σ_m w_m μ[f ∘ s_m]`, solved one total degree at a time; the only
//! input is the total mass (`6√3/5` for the snowflake, `1` for the curve).

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{koch_barycentre, koch_ifs, snowflake_area, snowflake_ifs, Similarity, Vec2};
use crate::polybasis::{dim, exponents, index, Poly2};
use crate::scalar::Real;

/// Maximum degree of the self-similar moment engine.
pub const MAX_MOMENT_DEGREE: usize = 12;
/// Maximum level of the volume composite barycentre rule (`7^7` nodes).
pub const MAX_VOLUME_LEVEL: usize = 7;
/// Maximum level of the Koch composite barycentre rule (`4^10` nodes).
pub const MAX_KOCH_LEVEL: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Snowflake,
    /// Reference wedge `W_i`, `i` in `1..=6`.
    Wedge(u8),
    /// Koch curve with the normalised Hausdorff measure.
    Koch,
    /// The equilateral triangle `{0 <= x <= 1/√3, |y| <= x/√3}` inside `W_1`.
    Triangle,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Snowflake => write!(f, "snowflake"),
            Region::Wedge(i) => write!(f, "wedge{i}"),
            Region::Koch => write!(f, "koch"),
            Region::Triangle => write!(f, "triangle"),
        }
    }
}

impl std::str::FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snowflake" => Ok(Region::Snowflake),
            "koch" => Ok(Region::Koch),
            "triangle" => Ok(Region::Triangle),
            w if w.starts_with("wedge") => match w[5..].parse::<u8>() {
                Ok(i @ 1..=6) => Ok(Region::Wedge(i)),
                _ => Err(Error::InvalidArgument(format!("unknown wedge `{w}`"))),
            },
            other => Err(Error::InvalidArgument(format!("unknown region `{other}`"))),
        }
    }
}

/// Monomial integrals `∫ x^a y^b dμ` for `a + b <= max_deg`, graded lex order.
#[derive(Clone, Debug)]
pub struct MomentTable<T> {
    pub region: Region,
    pub max_deg: usize,
    values: Vec<T>,
}

impl<T: Real> MomentTable<T> {
    pub fn value(&self, a: usize, b: usize) -> T {
        assert!(a + b <= self.max_deg, "moment ({a},{b}) outside table");
        self.values[index(a, b)]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Iterates `(a, b, value)` in graded lex order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.values.iter().enumerate().map(|(i, v)| {
            let (a, b) = exponents(i);
            (a, b, *v)
        })
    }

    /// Exact integral of `poly` over the region.
    pub fn integrate(&self, poly: &Poly2<T>) -> Result<T> {
        let c = poly.coeffs();
        let n = c.len().min(self.values.len());
        if c[n..].iter().any(|v| *v != T::zero()) {
            return Err(Error::DegreeExceedsTable {
                degree: poly.effective_degree(),
                max: self.max_deg,
                region: self.region.to_string(),
            });
        }
        Ok(c[..n]
            .iter()
            .zip(&self.values[..n])
            .fold(T::zero(), |acc, (a, b)| acc + *a * *b))
    }
}

/// `∫_region poly ∘ pullback`.
pub fn integrate_poly_region<T: Real>(
    poly: &Poly2<T>,
    table: &MomentTable<T>,
    pullback: Option<&Similarity<T>>,
) -> Result<T> {
    match pullback {
        Some(map) => table.integrate(&poly.pullback(map)),
        None => table.integrate(poly),
    }
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve_small<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Vec<T> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] = a[row][k] - f * v;
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s = s - a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Moments of the invariant measure of `maps` with weights `weights` and
/// total mass `mass`, up to total degree `max_deg`.
pub fn self_similar_moments<T: Real>(
    maps: &[Similarity<T>],
    weights: &[T],
    mass: T,
    max_deg: usize,
) -> Vec<T> {
    let mut values = vec![T::zero(); dim(max_deg)];
    values[0] = mass;
    for n in 1..=max_deg {
        let mut mat = vec![vec![T::zero(); n + 1]; n + 1];
        let mut rhs = vec![T::zero(); n + 1];
        for b in 0..=n {
            mat[b][b] = T::one();
            let mono = Poly2::<T>::monomial(n - b, b);
            for (map, w) in maps.iter().zip(weights) {
                let pb = mono.pullback(map);
                for (i, c) in pb.coeffs().iter().enumerate() {
                    if *c == T::zero() {
                        continue;
                    }
                    let (a2, b2) = exponents(i);
                    if a2 + b2 == n {
                        mat[b][b2] = mat[b][b2] - *w * *c;
                    } else {
                        rhs[b] = rhs[b] + *w * *c * values[i];
                    }
                }
            }
        }
        let sol = solve_small(mat, rhs);
        for b in 0..=n {
            values[index(n - b, b)] = sol[b];
        }
    }
    values
}

/// Largest violation of `μ[f] = Σ w_m μ[f∘s_m]` over all monomials in the table.
pub fn self_similarity_residual<T: Real>(
    table: &MomentTable<T>,
    maps: &[Similarity<T>],
    weights: &[T],
) -> T {
    let mut worst = T::zero();
    for i in 0..dim(table.max_deg) {
        let (a, b) = exponents(i);
        let mono = Poly2::<T>::monomial(a, b);
        let mut rhs = T::zero();
        for (map, w) in maps.iter().zip(weights) {
            rhs = rhs + *w * table.integrate(&mono.pullback(map)).unwrap();
        }
        worst = worst.max((table.values[i] - rhs).abs());
    }
    worst
}

fn snowflake_weights<T: Real>() -> Vec<T> {
    snowflake_ifs::<T>().iter().map(|m| m.scale * m.scale).collect()
}

/// Area moments of the reference snowflake.
pub fn snowflake_moments<T: Real>(max_deg: usize) -> Result<MomentTable<T>> {
    check_degree(max_deg)?;
    let values = self_similar_moments(
        &snowflake_ifs::<T>(),
        &snowflake_weights::<T>(),
        snowflake_area::<T>(),
        max_deg,
    );
    Ok(MomentTable {
        region: Region::Snowflake,
        max_deg,
        values,
    })
}

/// Hausdorff-measure moments of the Koch curve, normalised to unit mass.
pub fn koch_moments<T: Real>(max_deg: usize) -> Result<MomentTable<T>> {
    check_degree(max_deg)?;
    let quarter = T::lit(0.25);
    let values = self_similar_moments(&koch_ifs::<T>(), &[quarter; 4], T::one(), max_deg);
    Ok(MomentTable {
        region: Region::Koch,
        max_deg,
        values,
    })
}

fn check_degree(max_deg: usize) -> Result<()> {
    if max_deg > MAX_MOMENT_DEGREE {
        return Err(Error::ResourceLimit(format!(
            "moment degree {max_deg} exceeds {MAX_MOMENT_DEGREE}"
        )));
    }
    Ok(())
}

/// Residual of the snowflake self-similarity relations for `table`.
pub fn snowflake_residual<T: Real>(table: &MomentTable<T>) -> T {
    self_similarity_residual(table, &snowflake_ifs::<T>(), &snowflake_weights::<T>())
}

/// Residual of the Koch self-similarity relations for `table`.
pub fn koch_residual<T: Real>(table: &MomentTable<T>) -> T {
    self_similarity_residual(table, &koch_ifs::<T>(), &[T::lit(0.25); 4])
}

/// Degree-2 area moments of the wedge `W_i` (`i` in `1..=6`).
///
/// `W_1` uses the closed forms; `W_i` follows by rotating `W_{i-1}` through
/// `pi/3` with `c = 1/2`, `s = √3/2`.
pub fn wedge_moments<T: Real>(i: u8) -> MomentTable<T> {
    assert!((1..=6).contains(&i), "wedge index must be in 1..=6");
    let r3 = T::sqrt3();
    let l = T::lit;
    // [1, x, y, x², xy, y²]
    let mut v = [
        r3 / l(5.0),
        l(11.0) / l(60.0),
        T::zero(),
        l(281.0) * r3 / l(4400.0),
        T::zero(),
        l(39.0) * r3 / l(4400.0),
    ];
    let c = T::half();
    let s = r3 * T::half();
    for _ in 1..i {
        let [one, x, y, xx, xy, yy] = v;
        v = [
            one,
            c * x - s * y,
            s * x + c * y,
            c * c * xx - l(2.0) * c * s * xy + s * s * yy,
            c * s * xx + (c * c - s * s) * xy - c * s * yy,
            s * s * xx + l(2.0) * c * s * xy + c * c * yy,
        ];
    }
    MomentTable {
        region: Region::Wedge(i),
        max_deg: 2,
        values: v.to_vec(),
    }
}

/// Degree-2 area moments of the equilateral triangle `T ⊂ W_1` of side `2/3`.
pub fn triangle_moments<T: Real>() -> MomentTable<T> {
    let r3 = T::sqrt3();
    let l = T::lit;
    MomentTable {
        region: Region::Triangle,
        max_deg: 2,
        values: vec![
            r3 / l(9.0),
            l(2.0) / l(27.0),
            T::zero(),
            T::one() / (l(18.0) * r3),
            T::zero(),
            T::one() / (l(162.0) * r3),
        ],
    }
}

/// Table for any region, at the largest degree the region supports up to `max_deg`.
pub fn region_moments<T: Real>(region: Region, max_deg: usize) -> Result<MomentTable<T>> {
    match region {
        Region::Snowflake => snowflake_moments(max_deg),
        Region::Koch => koch_moments(max_deg),
        Region::Wedge(i) => truncate(wedge_moments(i), max_deg),
        Region::Triangle => truncate(triangle_moments(), max_deg),
    }
}

fn truncate<T: Real>(mut t: MomentTable<T>, max_deg: usize) -> Result<MomentTable<T>> {
    if max_deg > t.max_deg {
        return Err(Error::DegreeExceedsTable {
            degree: max_deg,
            max: t.max_deg,
            region: t.region.to_string(),
        });
    }
    t.values.truncate(dim(max_deg));
    t.max_deg = max_deg;
    Ok(t)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(npts: usize) -> Vec<(T, T)> {
    assert!(npts >= 1, "at least one Gauss point");
    let n = npts;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        // Tricomi initial guess, then Newton on P_n
        let mut x = T::lit(
            (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos(),
        );
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x = x - dx;
            if dx.abs() <= T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != T::zero() { d } else { dp };
        let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
        out.push((x, w));
    }
    out.reverse();
    out
}

fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = T::from_usize_lossy(k);
        let p2 = ((T::lit(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (T::one(), T::zero());
    }
    let nf = T::from_usize_lossy(n);
    let d = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

/// Gauss–Legendre rule on the segment `[a, b]`: exact for polynomials of
/// degree `2 npts - 1` along the segment; weights sum to `|b - a|`.
pub fn segment_gauss<T: Real>(a: Vec2<T>, b: Vec2<T>, npts: usize) -> Vec<(Vec2<T>, T)> {
    let len = a.dist(b);
    let mid = (a + b) * T::half();
    let half = (b - a) * T::half();
    gauss_legendre::<T>(npts)
        .into_iter()
        .map(|(t, w)| (mid + half * t, w * len * T::half()))
        .collect()
}

/// Barycentres and areas of the level-`level` descendants of the reference
/// snowflake, in word-lexicographic order.
pub fn barycentre_nodes<T: Real>(level: usize) -> Result<Vec<(Vec2<T>, T)>> {
    if level > MAX_VOLUME_LEVEL {
        return Err(Error::ResourceLimit(format!(
            "volume quadrature level {level} exceeds {MAX_VOLUME_LEVEL}"
        )));
    }
    let maps = snowflake_ifs::<T>();
    let mut cells = vec![Similarity::<T>::identity()];
    for _ in 0..level {
        cells = cells
            .iter()
            .flat_map(|c| maps.iter().map(move |m| c.compose(m)))
            .collect();
    }
    let area = snowflake_area::<T>();
    Ok(cells
        .into_iter()
        .map(|c| (c.shift, area * c.scale * c.scale))
        .collect())
}

/// Composite barycentre rule for `∫_{chart(Ω)} f`.
pub fn composite_barycentre_volume<T: Real, F: Fn(Vec2<T>) -> T>(
    f: F,
    chart: &Similarity<T>,
    level: usize,
) -> Result<T> {
    let jac = chart.scale * chart.scale;
    Ok(barycentre_nodes::<T>(level)?
        .into_iter()
        .fold(T::zero(), |acc, (x, w)| acc + w * jac * f(chart.apply(x))))
}

/// Images of the Hausdorff barycentre of the Koch curve under all words of
/// length `level`, with equal weights `4^{-level}`.
pub fn koch_nodes<T: Real>(level: usize) -> Result<Vec<(Vec2<T>, T)>> {
    if level > MAX_KOCH_LEVEL {
        return Err(Error::ResourceLimit(format!(
            "Koch quadrature level {level} exceeds {MAX_KOCH_LEVEL}"
        )));
    }
    let maps = koch_ifs::<T>();
    let mut cells = vec![Similarity::<T>::identity()];
    for _ in 0..level {
        cells = cells
            .iter()
            .flat_map(|c| maps.iter().map(move |m| c.compose(m)))
            .collect();
    }
    let g = koch_barycentre::<T>();
    let w = T::lit(0.25).powi(level as i32);
    Ok(cells.into_iter().map(|c| (c.apply(g), w)).collect())
}

/// Composite barycentre rule for `∫_F f dH^d` with `F = face_chart(Γ)`.
pub fn composite_barycentre_koch<T: Real, F: Fn(Vec2<T>) -> T>(
    f: F,
    face_chart: &Similarity<T>,
    level: usize,
) -> Result<T> {
    let measure = face_chart.scale.powf(T::koch_dim());
    let sum = koch_nodes::<T>(level)?
        .into_iter()
        .fold(T::zero(), |acc, (x, w)| acc + w * f(face_chart.apply(x)));
    Ok(measure * sum)
}

/// The fixed tables used by the assembly: snowflake and Koch moments to
/// degree 4, the six wedge tables to degree 2.
#[derive(Clone, Debug)]
pub struct ReferenceIntegrals<T> {
    pub snowflake: MomentTable<T>,
    pub koch: MomentTable<T>,
    pub wedges: [MomentTable<T>; 6],
}

impl<T: Real> ReferenceIntegrals<T> {
    pub fn new() -> Self {
        Self {
            snowflake: snowflake_moments(4).expect("degree 4 within limits"),
            koch: koch_moments(4).expect("degree 4 within limits"),
            wedges: std::array::from_fn(|k| wedge_moments(k as u8 + 1)),
        }
    }

    /// Table of `W_i`, 1-based and wrapping modulo 6.
    pub fn wedge(&self, i: usize) -> &MomentTable<T> {
        &self.wedges[(i + 5) % 6]
    }
}

impl<T: Real> Default for ReferenceIntegrals<T> {
    fn default() -> Self {
        Self::new()
    }
}
