//! Bivariate polynomials in the monomial basis, graded lexicographic order
//! `[1, x, y, x², xy, y², x³, …]`.
//!
//! The same ordering fixes the local basis on the reference element: the
//! first `N_p = (p+1)(p+2)/2` monomials span `P^p`.

use std::ops::{Add, Mul, Sub};

use crate::geometry::{Similarity, Vec2};
use crate::scalar::Real;

/// Number of monomials of total degree at most `deg`.
#[inline]
pub const fn dim(deg: usize) -> usize {
    (deg + 1) * (deg + 2) / 2
}

/// Position of `x^a y^b` in graded lexicographic order.
#[inline]
pub const fn index(a: usize, b: usize) -> usize {
    let n = a + b;
    n * (n + 1) / 2 + b
}

/// Inverse of [`index`].
pub fn exponents(idx: usize) -> (usize, usize) {
    let mut n = 0;
    while dim(n) <= idx {
        n += 1;
    }
    let b = idx + n + 1 - dim(n);
    (n - b, b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Poly2<T> {
    deg: usize,
    coeffs: Vec<T>,
}

impl<T: Real> Poly2<T> {
    pub fn zero(deg: usize) -> Self {
        Self {
            deg,
            coeffs: vec![T::zero(); dim(deg)],
        }
    }

    pub fn constant(c: T) -> Self {
        Self {
            deg: 0,
            coeffs: vec![c],
        }
    }

    pub fn monomial(a: usize, b: usize) -> Self {
        let mut p = Self::zero(a + b);
        p.coeffs[index(a, b)] = T::one();
        p
    }

    /// Basis function `i` of the reference element (0-based, graded lex).
    pub fn basis(i: usize) -> Self {
        let (a, b) = exponents(i);
        Self::monomial(a, b)
    }

    pub fn from_coeffs(deg: usize, coeffs: Vec<T>) -> Self {
        assert_eq!(coeffs.len(), dim(deg), "coefficient count must be (D+1)(D+2)/2");
        Self { deg, coeffs }
    }

    /// `c0 + cx x + cy y`.
    pub fn linear(c0: T, cx: T, cy: T) -> Self {
        Self::from_coeffs(1, vec![c0, cx, cy])
    }

    /// Nominal degree bound.
    #[inline]
    pub fn deg(&self) -> usize {
        self.deg
    }

    /// Highest total degree carrying a nonzero coefficient (0 for the zero polynomial).
    pub fn effective_degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| *c != T::zero())
            .map(|i| exponents(i).0 + exponents(i).1)
            .unwrap_or(0)
    }

    #[inline]
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    #[inline]
    pub fn coeff(&self, a: usize, b: usize) -> T {
        let i = index(a, b);
        if i < self.coeffs.len() {
            self.coeffs[i]
        } else {
            T::zero()
        }
    }

    /// Same polynomial with a larger degree bound.
    pub fn raised(&self, deg: usize) -> Self {
        let mut out = Self::zero(deg.max(self.deg));
        out.coeffs[..self.coeffs.len()].copy_from_slice(&self.coeffs);
        out
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            deg: self.deg,
            coeffs: self.coeffs.iter().map(|c| *c * s).collect(),
        }
    }

    pub fn evaluate(&self, p: Vec2<T>) -> T {
        // Horner over y inside each degree block would not save much at D <= 12;
        // accumulate x^a y^b from running powers instead.
        let mut acc = T::zero();
        let mut xpow = vec![T::one(); self.deg + 1];
        let mut ypow = vec![T::one(); self.deg + 1];
        for k in 1..=self.deg {
            xpow[k] = xpow[k - 1] * p.x;
            ypow[k] = ypow[k - 1] * p.y;
        }
        for n in 0..=self.deg {
            for b in 0..=n {
                acc = acc + self.coeffs[index(n - b, b)] * xpow[n - b] * ypow[b];
            }
        }
        acc
    }

    pub fn dx(&self) -> Self {
        let d = self.deg.saturating_sub(1);
        let mut out = Self::zero(d);
        for n in 1..=self.deg {
            for b in 0..n {
                let a = n - b;
                out.coeffs[index(a - 1, b)] = self.coeffs[index(a, b)] * T::from_usize_lossy(a);
            }
        }
        out
    }

    pub fn dy(&self) -> Self {
        let d = self.deg.saturating_sub(1);
        let mut out = Self::zero(d);
        for n in 1..=self.deg {
            for b in 1..=n {
                let a = n - b;
                out.coeffs[index(a, b - 1)] = self.coeffs[index(a, b)] * T::from_usize_lossy(b);
            }
        }
        out
    }

    pub fn gradient(&self) -> (Self, Self) {
        (self.dx(), self.dy())
    }

    pub fn laplacian(&self) -> Self {
        let xx = self.dx().dx();
        let yy = self.dy().dy();
        &xx + &yy
    }

    /// `x -> self(map(x))`, expanded exactly in the monomial basis.
    pub fn pullback(&self, map: &Similarity<T>) -> Self {
        let (c, s) = crate::scalar::cos_sin_twelfth::<T>(map.rot());
        let k = map.scale;
        let x = Self::linear(map.shift.x, k * c, -(k * s));
        let y = Self::linear(map.shift.y, k * s, k * c);
        self.substitute(&x, &y)
    }

    /// `self(x(·), y(·))` for polynomial arguments.
    pub fn substitute(&self, x: &Self, y: &Self) -> Self {
        let inner = x.deg.max(y.deg);
        let mut out = Self::zero(self.deg * inner);
        let mut xpow = vec![Self::constant(T::one())];
        let mut ypow = vec![Self::constant(T::one())];
        for k in 1..=self.deg {
            xpow.push(&xpow[k - 1] * x);
            ypow.push(&ypow[k - 1] * y);
        }
        for n in 0..=self.deg {
            for b in 0..=n {
                let c = self.coeffs[index(n - b, b)];
                if c == T::zero() {
                    continue;
                }
                let term = &xpow[n - b] * &ypow[b];
                out.add_scaled(&term, c);
            }
        }
        out
    }

    /// `self += s * other`; `other` must not exceed the degree bound.
    pub fn add_scaled(&mut self, other: &Self, s: T) {
        assert!(other.deg <= self.deg, "degree bound exceeded");
        for (a, b) in self.coeffs.iter_mut().zip(other.coeffs.iter()) {
            *a = *a + *b * s;
        }
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |m, c| m.max(c.abs()))
    }
}

impl<'a, T: Real> Add<&'a Poly2<T>> for &'a Poly2<T> {
    type Output = Poly2<T>;
    fn add(self, o: &'a Poly2<T>) -> Poly2<T> {
        let mut out = self.raised(o.deg);
        out.add_scaled(o, T::one());
        out
    }
}

impl<'a, T: Real> Sub<&'a Poly2<T>> for &'a Poly2<T> {
    type Output = Poly2<T>;
    fn sub(self, o: &'a Poly2<T>) -> Poly2<T> {
        let mut out = self.raised(o.deg);
        out.add_scaled(o, -T::one());
        out
    }
}

impl<'a, T: Real> Mul<&'a Poly2<T>> for &'a Poly2<T> {
    type Output = Poly2<T>;
    fn mul(self, o: &'a Poly2<T>) -> Poly2<T> {
        let mut out = Poly2::zero(self.deg + o.deg);
        for n in 0..=self.deg {
            for b in 0..=n {
                let c = self.coeffs[index(n - b, b)];
                if c == T::zero() {
                    continue;
                }
                for m in 0..=o.deg {
                    for d in 0..=m {
                        let e = o.coeffs[index(m - d, d)];
                        let k = index(n - b + m - d, b + d);
                        out.coeffs[k] = out.coeffs[k] + c * e;
                    }
                }
            }
        }
        out
    }
}

/// The local basis `[φ̂_0, …, φ̂_{N_p - 1}]` of degree `p`.
pub fn local_basis<T: Real>(p: usize) -> Vec<Poly2<T>> {
    (0..dim(p)).map(Poly2::basis).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::snowflake_ifs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type P = Poly2<f64>;
    type V = Vec2<f64>;

    fn random_poly(rng: &mut ChaCha8Rng, deg: usize) -> P {
        P::from_coeffs(deg, (0..dim(deg)).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    fn naive_eval(p: &P, x: V) -> f64 {
        let mut s = 0.0;
        for i in 0..p.coeffs().len() {
            let (a, b) = exponents(i);
            s += p.coeffs()[i] * x.x.powi(a as i32) * x.y.powi(b as i32);
        }
        s
    }

    #[test]
    fn ordering_is_graded_lex() {
        let expect = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1)];
        for (i, e) in expect.iter().enumerate() {
            assert_eq!(exponents(i), *e);
            assert_eq!(index(e.0, e.1), i);
        }
        assert_eq!(dim(1), 3);
        assert_eq!(dim(2), 6);
        assert_eq!(dim(4), 15);
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(P::monomial(2, 0).evaluate(V::new(3.0, 0.0)), 9.0);
        assert_eq!(P::zero(3).evaluate(V::new(0.3, -7.0)), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let p = random_poly(&mut rng, 2);
            let x = V::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            assert!((p.evaluate(x) - naive_eval(&p, x)).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_examples() {
        let lap = P::monomial(2, 0).laplacian();
        assert_eq!(lap.coeff(0, 0), 2.0);
        let (gx, gy) = P::monomial(1, 1).gradient();
        assert_eq!(gx, P::monomial(0, 1).raised(1));
        assert_eq!(gy, P::monomial(1, 0));
        let r2 = &P::monomial(2, 0) + &P::monomial(0, 2);
        assert_eq!(r2.laplacian().coeff(0, 0), 4.0);
        assert_eq!(r2.laplacian().effective_degree(), 0);
    }

    #[test]
    fn pullback_examples() {
        let x = P::monomial(1, 0);
        assert_eq!(x.pullback(&Similarity::identity()), x);
        let s2 = snowflake_ifs::<f64>()[1];
        let pb = x.pullback(&s2);
        assert!((pb.coeff(1, 0) - 1.0 / 3.0).abs() < 1e-16);
        assert!(pb.coeff(0, 1).abs() < 1e-16 && pb.coeff(0, 0).abs() < 1e-16);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Similarity::new(0.7, 5, V::new(0.3, -0.2));
        let q = P::monomial(2, 0);
        let pq = q.pullback(&m);
        for _ in 0..100 {
            let p = V::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            assert!((pq.evaluate(p) - q.evaluate(m.apply(p))).abs() < 1e-13);
        }
    }

    #[test]
    fn product_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_poly(&mut rng, 2);
        let b = random_poly(&mut rng, 3);
        let ab = &a * &b;
        assert_eq!(ab.deg(), 5);
        for _ in 0..20 {
            let p = V::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            assert!((ab.evaluate(p) - a.evaluate(p) * b.evaluate(p)).abs() < 1e-13);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sim() -> impl Strategy<Value = Similarity<f64>> {
            (0.2f64..2.0, 0i32..12, -1.0f64..1.0, -1.0f64..1.0)
                .prop_map(|(s, r, x, y)| Similarity::new(s, r, V::new(x, y)))
        }

        fn quad() -> impl Strategy<Value = P> {
            proptest::collection::vec(-1.0f64..1.0, 6).prop_map(|c| P::from_coeffs(2, c))
        }

        proptest! {
            #[test]
            fn pullback_composes(p in quad(), a in sim(), b in sim()) {
                let lhs = p.pullback(&a).pullback(&b);
                let rhs = p.pullback(&a.compose(&b));
                let diff = (&lhs - &rhs).max_abs();
                prop_assert!(diff <= 1e-13 * (1.0 + rhs.max_abs()));
            }

            #[test]
            fn chain_rule(p in quad(), a in sim(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
                let pt = V::new(x, y);
                let q = p.pullback(&a);
                let (qx, qy) = q.gradient();
                let (px, py) = p.gradient();
                let img = a.apply(pt);
                // ∇(p∘S)(x) = scale · Rᵀ (∇p)(S x)
                let g = V::new(px.evaluate(img), py.evaluate(img)).rotate(-a.rot()) * a.scale;
                prop_assert!((qx.evaluate(pt) - g.x).abs() <= 1e-13);
                prop_assert!((qy.evaluate(pt) - g.y).abs() <= 1e-13);
            }
        }
    }
}
