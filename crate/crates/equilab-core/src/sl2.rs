//! SL(2,R) and its Lie algebra in double precision: closed-form exponentials,
//! adjoint action, brackets, the upper half-plane action, hyperbolic distance
//! and geodesic homotheties, plus Iwasawa coordinates with 2-jet support.
//!
//! Conventions. The Lie algebra basis is
//!   X = [1/2 0; 0 -1/2],  U = [0 1; 0 0],  V = [0 0; 1 0],
//! and the alternative basis uses
//!   Theta = [0 1; -1 0],  R = [0 1; 1 0],
//! related by U = (R + Theta)/2, V = (R - Theta)/2. Flows act by right
//! multiplication: phi_s^W(g) = g exp(sW); vector fields are the matching
//! right derivatives.

use crate::error::{CoreError, Result};
use crate::jet::Jet;
use serde::{Deserialize, Serialize};

pub const DET_TOL: f64 = 1e-12;

/// Group element with ad - bc = 1, renormalized whenever drift exceeds
/// `DET_TOL`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sl2Element {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Sl2Element {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let g = Sl2Element { a, b, c, d };
        let det = g.det();
        if !det.is_finite() || (det - 1.0).abs() > 1e-6 {
            return Err(CoreError::InvalidInput(format!(
                "matrix determinant {det} too far from 1"
            )));
        }
        Ok(g.renormalized())
    }

    pub const fn identity() -> Self {
        Sl2Element { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    /// Divide by sqrt(det) when the drift exceeds tolerance.
    pub fn renormalized(self) -> Self {
        let det = self.det();
        if (det - 1.0).abs() > DET_TOL {
            let s = 1.0 / det.sqrt();
            Sl2Element { a: self.a * s, b: self.b * s, c: self.c * s, d: self.d * s }
        } else {
            self
        }
    }

    pub fn mul(&self, o: &Sl2Element) -> Sl2Element {
        Sl2Element {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
        .renormalized()
    }

    /// Exact inverse (adjugate of a determinant-one matrix).
    pub fn inverse(&self) -> Sl2Element {
        Sl2Element { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn neg(&self) -> Sl2Element {
        Sl2Element { a: -self.a, b: -self.b, c: -self.c, d: -self.d }
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    /// Entry-wise max distance, up to overall sign.
    pub fn dist_mod_sign(&self, o: &Sl2Element) -> f64 {
        let d1 = (self.a - o.a).abs().max((self.b - o.b).abs()).max((self.c - o.c).abs()).max((self.d - o.d).abs());
        let d2 = (self.a + o.a).abs().max((self.b + o.b).abs()).max((self.c + o.c).abs()).max((self.d + o.d).abs());
        d1.min(d2)
    }
}

/// Lie algebra element a X + b U + c V. The {X, Theta, R} coordinates are
/// alpha = a, beta = (b - c)/2, gamma = (b + c)/2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LieVector {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LieVector {
    pub const X: LieVector = LieVector { a: 1.0, b: 0.0, c: 0.0 };
    pub const U: LieVector = LieVector { a: 0.0, b: 1.0, c: 0.0 };
    pub const V: LieVector = LieVector { a: 0.0, b: 0.0, c: 1.0 };
    pub const THETA: LieVector = LieVector { a: 0.0, b: 1.0, c: -1.0 };
    pub const R: LieVector = LieVector { a: 0.0, b: 1.0, c: 1.0 };

    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        LieVector { a, b, c }
    }

    /// From {X, Theta, R} coordinates.
    pub fn from_xtr(alpha: f64, beta: f64, gamma: f64) -> Self {
        LieVector { a: alpha, b: beta + gamma, c: gamma - beta }
    }

    /// To {X, Theta, R} coordinates (alpha, beta, gamma).
    pub fn to_xtr(&self) -> (f64, f64, f64) {
        (self.a, 0.5 * (self.b - self.c), 0.5 * (self.b + self.c))
    }

    /// Matrix realization [a/2, b; c, -a/2].
    pub fn to_matrix(&self) -> [[f64; 2]; 2] {
        [[0.5 * self.a, self.b], [self.c, -0.5 * self.a]]
    }

    pub fn from_matrix(m: [[f64; 2]; 2]) -> Result<Self> {
        if (m[0][0] + m[1][1]).abs() > 1e-9 {
            return Err(CoreError::InvalidInput("matrix is not traceless".into()));
        }
        Ok(LieVector { a: 2.0 * m[0][0], b: m[0][1], c: m[1][0] })
    }

    pub fn scale(&self, s: f64) -> Self {
        LieVector { a: self.a * s, b: self.b * s, c: self.c * s }
    }

    pub fn add(&self, o: &LieVector) -> Self {
        LieVector { a: self.a + o.a, b: self.b + o.b, c: self.c + o.c }
    }

    pub fn norm(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c).sqrt()
    }

    /// tr(W^2)/2; positive for hyperbolic, negative for elliptic directions.
    pub fn disc(&self) -> f64 {
        0.25 * self.a * self.a + self.b * self.c
    }
}

/// Matrix commutator [W1, W2] re-expressed in {X, U, V}.
pub fn bracket(w1: &LieVector, w2: &LieVector) -> LieVector {
    // [X,U] = U, [X,V] = -V, [U,V] = 2X and bilinearity.
    LieVector {
        a: 2.0 * (w1.b * w2.c - w1.c * w2.b),
        b: w1.a * w2.b - w1.b * w2.a,
        c: w1.c * w2.a - w1.a * w2.c,
    }
}

/// Coefficient functions of the closed-form exponential:
/// exp(M) = c0(q) I + c1(q) M with q = tr(M^2)/2 = -det M.
fn exp_coeffs(q: f64) -> (f64, f64) {
    if q > 1e-10 {
        let r = q.sqrt();
        (r.cosh(), r.sinh() / r)
    } else if q < -1e-10 {
        let r = (-q).sqrt();
        (r.cos(), r.sin() / r)
    } else {
        // parabolic branch: entire-series truncation, exact to machine epsilon
        (1.0 + q / 2.0 + q * q / 24.0, 1.0 + q / 6.0 + q * q / 120.0)
    }
}

/// exp(sW) by the Cayley-Hamilton closed form (no series truncation).
pub fn exp_lie(w: &LieVector, s: f64) -> Sl2Element {
    let m = w.to_matrix();
    let q = s * s * w.disc();
    let (c0, c1) = exp_coeffs(q);
    Sl2Element {
        a: c0 + c1 * s * m[0][0],
        b: c1 * s * m[0][1],
        c: c1 * s * m[1][0],
        d: c0 + c1 * s * m[1][1],
    }
    .renormalized()
}

/// Ad_g(W) = g W g^{-1} in {X, U, V} coordinates.
pub fn adjoint(g: &Sl2Element, w: &LieVector) -> LieVector {
    let m = w.to_matrix();
    let inv = g.inverse();
    // g * m
    let gm = [
        [g.a * m[0][0] + g.b * m[1][0], g.a * m[0][1] + g.b * m[1][1]],
        [g.c * m[0][0] + g.d * m[1][0], g.c * m[0][1] + g.d * m[1][1]],
    ];
    let out = [
        [gm[0][0] * inv.a + gm[0][1] * inv.c, gm[0][0] * inv.b + gm[0][1] * inv.d],
        [gm[1][0] * inv.a + gm[1][1] * inv.c, gm[1][0] * inv.b + gm[1][1] * inv.d],
    ];
    LieVector { a: out[0][0] - out[1][1], b: out[0][1], c: out[1][0] }
}

/// Point of the upper half plane, y > 0 strictly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperHalfPoint {
    pub x: f64,
    pub y: f64,
}

impl UpperHalfPoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && y > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "({x}, {y}) is not in the upper half plane"
            )));
        }
        Ok(UpperHalfPoint { x, y })
    }

    pub const I: UpperHalfPoint = UpperHalfPoint { x: 0.0, y: 1.0 };
}

/// Linear fractional action (az+b)/(cz+d).
pub fn moebius(g: &Sl2Element, z: &UpperHalfPoint) -> Result<UpperHalfPoint> {
    let (cx, cy) = (g.c * z.x + g.d, g.c * z.y);
    let den = cx * cx + cy * cy;
    if !den.is_finite() || den == 0.0 {
        return Err(CoreError::InvalidInput("moebius denominator degenerate".into()));
    }
    let (ax, ay) = (g.a * z.x + g.b, g.a * z.y);
    // (a z + b)(conj(c z + d)) / |c z + d|^2
    let x = (ax * cx + ay * cy) / den;
    let y = (ay * cx - ax * cy) / den;
    debug_assert!(((g.det() / den) * z.y - y).abs() <= 1e-9 * y.abs().max(1.0));
    UpperHalfPoint::new(x, y)
}

/// d(z1, z2) = arcosh(1 + |z1-z2|^2 / (2 y1 y2)).
pub fn hyperbolic_distance(z1: &UpperHalfPoint, z2: &UpperHalfPoint) -> f64 {
    let dx = z1.x - z2.x;
    let dy = z1.y - z2.y;
    let arg = 1.0 + (dx * dx + dy * dy) / (2.0 * z1.y * z2.y);
    // acosh via the log form is stable here since arg >= 1
    (arg + (arg * arg - 1.0).max(0.0).sqrt()).ln()
}

/// Geodesic homothety centered at `x0`: the image of `y` lies on the geodesic
/// from x0 through y at distance t * d(x0, y).
///
/// Computed by moving to a frame where that geodesic is the upward imaginary
/// axis: T x0 = i, T y = i e^d, and the image is T^{-1}(i e^{t d}). The
/// half-plane coordinates represent points e^{+-t d} up the axis without the
/// unit-disk boundary loss that kills precision at large t d.
pub fn hyperbolic_homothety(
    x0: &UpperHalfPoint,
    t: f64,
    y: &UpperHalfPoint,
) -> Result<UpperHalfPoint> {
    if t <= 0.0 {
        return Err(CoreError::InvalidInput("homothety ratio must be positive".into()));
    }
    let d = hyperbolic_distance(x0, y);
    if d == 0.0 {
        return Ok(*x0);
    }
    if t * d > 700.0 {
        return Err(CoreError::InvalidInput(format!(
            "homothety distance {} exceeds double range",
            t * d
        )));
    }
    // S: x0 = a + ib -> i
    let sb = x0.y.sqrt();
    let s = Sl2Element { a: 1.0 / sb, b: -x0.x / sb, c: 0.0, d: sb };
    let z1 = moebius(&s, y)?;
    // disk coordinate of z1 around i; k(theta) rotates it by e^{2 i theta},
    // and points above i on the axis sit at positive real disk coordinate
    let den = (z1.x, z1.y + 1.0);
    let den_n2 = den.0 * den.0 + den.1 * den.1;
    let w = (
        (z1.x * den.0 + (z1.y - 1.0) * den.1) / den_n2,
        ((z1.y - 1.0) * den.0 - z1.x * den.1) / den_n2,
    );
    let phi = w.1.atan2(w.0);
    let theta = -0.5 * phi;
    let k = Sl2Element { a: theta.cos(), b: theta.sin(), c: -theta.sin(), d: theta.cos() };
    let tm = k.mul(&s);
    let target = UpperHalfPoint::new(0.0, (t * d).exp())?;
    moebius(&tm.inverse(), &target)
}

/// Iwasawa coordinates of g = n(x) a(y) k(theta) with
/// n(x) = [1 x; 0 1], a(y) = diag(sqrt y, 1/sqrt y),
/// k(theta) = exp(theta Theta) = [cos, sin; -sin, cos].
pub fn iwasawa(g: &Sl2Element) -> (f64, f64, f64) {
    let den = g.c * g.c + g.d * g.d;
    let y = 1.0 / den;
    let x = (g.b * g.d + g.a * g.c) / den;
    let sy = y.sqrt();
    let theta = (-sy * g.c).atan2(sy * g.d);
    (x, y, theta)
}

/// 2x2 matrix of jets: the entries of g exp(sZ) as jets in s at s = 0.
/// Feeding these through `iwasawa_jets` yields exact first and second Lie
/// derivatives of coordinate-defined observables in the direction Z.
pub fn entry_jets(g: &Sl2Element, z: &LieVector) -> [[Jet; 2]; 2] {
    let m = z.to_matrix();
    let s = Jet::variable(0.0);
    let q = s * s * z.disc();
    // exp(sZ) = c0(q) I + c1(q) s Z, with the entire functions
    // c0 = cosh sqrt(q), c1 = sinh(sqrt q)/sqrt(q) expanded as series in q
    // (q has zero value here, so the series is exact for the 2-jet).
    let c0 = q * 0.5 + 1.0;
    let c1 = q * (1.0 / 6.0) + 1.0;
    let e = [
        [c0 + c1 * s * m[0][0], c1 * s * m[0][1]],
        [c1 * s * m[1][0], c0 + c1 * s * m[1][1]],
    ];
    [
        [
            e[0][0] * g.a + e[1][0] * g.b,
            e[0][1] * g.a + e[1][1] * g.b,
        ],
        [
            e[0][0] * g.c + e[1][0] * g.d,
            e[0][1] * g.c + e[1][1] * g.d,
        ],
    ]
}

/// Iwasawa coordinates as jets, from entry jets.
pub fn iwasawa_jets(m: &[[Jet; 2]; 2]) -> (Jet, Jet, Jet) {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let den = c * c + d * d;
    let y = den.recip();
    let x = (b * d + a * c) / den;
    let sy = y.sqrt();
    let theta = Jet::atan2(-(sy * c), sy * d);
    (x, y, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_lie(rng: &mut impl Rng, scale: f64) -> LieVector {
        LieVector::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    fn random_group(rng: &mut impl Rng) -> Sl2Element {
        exp_lie(&random_lie(rng, 1.2), 1.0)
    }

    /// Taylor-series matrix exponential, the independent oracle for exp_lie.
    fn exp_taylor(w: &LieVector, s: f64, order: usize) -> [[f64; 2]; 2] {
        let m = w.to_matrix();
        let sm = [[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]];
        let mut acc = [[1.0, 0.0], [0.0, 1.0]];
        let mut term = [[1.0, 0.0], [0.0, 1.0]];
        for k in 1..=order {
            let t = [
                [
                    (term[0][0] * sm[0][0] + term[0][1] * sm[1][0]) / k as f64,
                    (term[0][0] * sm[0][1] + term[0][1] * sm[1][1]) / k as f64,
                ],
                [
                    (term[1][0] * sm[0][0] + term[1][1] * sm[1][0]) / k as f64,
                    (term[1][0] * sm[0][1] + term[1][1] * sm[1][1]) / k as f64,
                ],
            ];
            term = t;
            for i in 0..2 {
                for j in 0..2 {
                    acc[i][j] += term[i][j];
                }
            }
        }
        acc
    }

    #[test]
    fn exp_x_is_diagonal_geodesic() {
        for t in [-3.0, -0.4, 0.0, 1.7, 5.0] {
            let g = exp_lie(&LieVector::X, t);
            assert!((g.a - (0.5 * t).exp()).abs() < 1e-12);
            assert!((g.d - (-0.5 * t).exp()).abs() < 1e-12);
            assert!(g.b.abs() < 1e-15 && g.c.abs() < 1e-15);
        }
    }

    #[test]
    fn exp_zero_is_identity() {
        let w = LieVector::new(0.3, -1.1, 0.7);
        let g = exp_lie(&w, 0.0);
        assert_eq!(g, Sl2Element::identity());
    }

    #[test]
    fn exp_theta_is_rotation() {
        // oracle: 12th-order Taylor series at s = 0.3
        let s = 0.3;
        let g = exp_lie(&LieVector::THETA, s);
        let t = exp_taylor(&LieVector::THETA, s, 12);
        assert!((g.a - t[0][0]).abs() <= 1e-12);
        assert!((g.b - t[0][1]).abs() <= 1e-12);
        assert!((g.a - s.cos()).abs() < 1e-14);
        assert!((g.b - s.sin()).abs() < 1e-14);
        assert!((g.c + s.sin()).abs() < 1e-14);
    }

    #[test]
    fn exp_taylor_oracle_random_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let w = random_lie(&mut rng, 1.0);
            let s = rng.gen_range(-0.6..0.6);
            let g = exp_lie(&w, s);
            let t = exp_taylor(&w, s, 14);
            assert!((g.a - t[0][0]).abs() < 1e-12);
            assert!((g.b - t[0][1]).abs() < 1e-12);
            assert!((g.c - t[1][0]).abs() < 1e-12);
            assert!((g.d - t[1][1]).abs() < 1e-12);
        }
    }

    #[test]
    fn exp_one_parameter_additivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let w = random_lie(&mut rng, 1.0);
            let s = rng.gen_range(-5.0..5.0);
            let u = rng.gen_range(-5.0..5.0);
            let lhs = exp_lie(&w, s + u);
            let rhs = exp_lie(&w, s).mul(&exp_lie(&w, u));
            let scale = lhs.max_abs_entry().max(1.0);
            assert!(lhs.dist_mod_sign(&rhs) < 1e-10 * scale);
        }
    }

    #[test]
    fn parabolic_branch_near_zero_disc() {
        // W with tr(W^2) = 0 exactly: a=0, c=0 (pure U) is nilpotent
        let g = exp_lie(&LieVector::U, 7.0);
        assert!((g.a - 1.0).abs() < 1e-15 && (g.b - 7.0).abs() < 1e-14);
        // near-parabolic: tiny disc routed through the series branch
        let w = LieVector::new(2e-6, 1.0, -1e-12);
        let g = exp_lie(&w, 1.0);
        let t = exp_taylor(&w, 1.0, 14);
        assert!((g.a - t[0][0]).abs() < 1e-13);
    }

    #[test]
    fn adjoint_of_geodesic_scales_horocycles() {
        // Eq-(6.4) shape: Ad_{exp(tX)}(aX + bU + cV) = aX + b e^t U + c e^{-t} V
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let w = random_lie(&mut rng, 2.0);
            let t = rng.gen_range(-2.0..2.0);
            let g = exp_lie(&LieVector::X, t);
            let ad = adjoint(&g, &w);
            assert!((ad.a - w.a).abs() < 1e-10);
            assert!((ad.b - w.b * t.exp()).abs() < 1e-10 * (1.0 + w.b.abs() * t.exp()));
            assert!((ad.c - w.c * (-t).exp()).abs() < 1e-10 * (1.0 + w.c.abs() * (-t).exp()));
            // and in {X,Theta,R} coordinates per the same display
            let (_alpha, beta, gamma) = w.to_xtr();
            assert!((ad.b - (gamma + beta) * t.exp()).abs() < 1e-9 * (1.0 + ad.b.abs()));
            assert!((ad.c - (gamma - beta) * (-t).exp()).abs() < 1e-9 * (1.0 + ad.c.abs()));
        }
    }

    #[test]
    fn adjoint_identity_and_conjugation_oracle() {
        let w = LieVector::new(0.4, -0.9, 0.2);
        let id = Sl2Element::identity();
        assert_eq!(adjoint(&id, &w), w);

        // explicit 2x2 conjugation oracle at g = exp(0.7 Theta), W = U
        let g = exp_lie(&LieVector::THETA, 0.7);
        let ad = adjoint(&g, &LieVector::U);
        let m = LieVector::U.to_matrix();
        let gi = g.inverse();
        let gm = [
            [g.a * m[0][0] + g.b * m[1][0], g.a * m[0][1] + g.b * m[1][1]],
            [g.c * m[0][0] + g.d * m[1][0], g.c * m[0][1] + g.d * m[1][1]],
        ];
        let out = [
            [gm[0][0] * gi.a + gm[0][1] * gi.c, gm[0][0] * gi.b + gm[0][1] * gi.d],
            [gm[1][0] * gi.a + gm[1][1] * gi.c, gm[1][0] * gi.b + gm[1][1] * gi.d],
        ];
        assert!((ad.a - (out[0][0] - out[1][1])).abs() < 1e-14);
        assert!((ad.b - out[0][1]).abs() < 1e-14);
        assert!((ad.c - out[1][0]).abs() < 1e-14);
    }

    #[test]
    fn bracket_relations() {
        let u = bracket(&LieVector::X, &LieVector::U);
        assert_eq!(u, LieVector::U);
        let two_x = bracket(&LieVector::THETA, &LieVector::U);
        assert!((two_x.a - 2.0).abs() < 1e-15 && two_x.b == 0.0 && two_x.c == 0.0);
        let w = LieVector::new(0.3, 0.8, -0.1);
        let z = bracket(&w, &w);
        assert_eq!(z, LieVector::new(0.0, 0.0, 0.0));
        // also [X, V] = -V and [U, V] = 2X
        assert_eq!(bracket(&LieVector::X, &LieVector::V), LieVector::V.scale(-1.0));
        assert_eq!(bracket(&LieVector::U, &LieVector::V), LieVector::X.scale(2.0));
    }

    #[test]
    fn adjoint_is_bracket_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..60 {
            let g = random_group(&mut rng);
            let w1 = random_lie(&mut rng, 1.5);
            let w2 = random_lie(&mut rng, 1.5);
            let lhs = adjoint(&g, &bracket(&w1, &w2));
            let rhs = bracket(&adjoint(&g, &w1), &adjoint(&g, &w2));
            let scale = 1.0 + lhs.norm();
            assert!((lhs.a - rhs.a).abs() < 1e-9 * scale);
            assert!((lhs.b - rhs.b).abs() < 1e-9 * scale);
            assert!((lhs.c - rhs.c).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn basis_change_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let w = random_lie(&mut rng, 3.0);
            let (alpha, beta, gamma) = w.to_xtr();
            let back = LieVector::from_xtr(alpha, beta, gamma);
            assert!((w.a - back.a).abs() < 1e-14);
            assert!((w.b - back.b).abs() < 1e-14);
            assert!((w.c - back.c).abs() < 1e-14);
            // matrix realizations agree: aX+bU+cV = alpha X + beta Theta + gamma R
            let m1 = w.to_matrix();
            let th = LieVector::THETA.to_matrix();
            let r = LieVector::R.to_matrix();
            let x = LieVector::X.to_matrix();
            for i in 0..2 {
                for j in 0..2 {
                    let m2 = alpha * x[i][j] + beta * th[i][j] + gamma * r[i][j];
                    assert!((m1[i][j] - m2).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn moebius_basics() {
        let z = UpperHalfPoint::new(0.37, 2.2).unwrap();
        let id = Sl2Element::identity();
        let w = moebius(&id, &z).unwrap();
        assert!((w.x - z.x).abs() < 1e-15 && (w.y - z.y).abs() < 1e-15);

        // diag(e^{t/2}, e^{-t/2}) sends i to i e^t
        let t = 1.3;
        let g = exp_lie(&LieVector::X, t);
        let w = moebius(&g, &UpperHalfPoint::I).unwrap();
        assert!(w.x.abs() < 1e-14 && (w.y - t.exp()).abs() < 1e-12);
    }

    #[test]
    fn moebius_preserves_upper_half_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..1000 {
            let g = random_group(&mut rng);
            let z = UpperHalfPoint::new(rng.gen_range(-5.0..5.0), rng.gen_range(0.01..5.0)).unwrap();
            let w = moebius(&g, &z).unwrap();
            assert!(w.y > 0.0);
        }
    }

    #[test]
    fn distance_basics_and_isometry() {
        // oracle: arcosh(1 + |z1-z2|^2/(2 y1 y2)) evaluated independently
        let z1 = UpperHalfPoint::I;
        let z2 = UpperHalfPoint::new(0.0, std::f64::consts::E).unwrap();
        let d = hyperbolic_distance(&z1, &z2);
        let e = std::f64::consts::E;
        let oracle = (1.0 + (e - 1.0) * (e - 1.0) / (2.0 * e)).acosh();
        assert!((d - 1.0).abs() < 1e-12);
        assert!((d - oracle).abs() < 1e-12);
        assert_eq!(hyperbolic_distance(&z2, &z2), 0.0);
        assert!((hyperbolic_distance(&z2, &z1) - d).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let g = random_group(&mut rng);
            let z1 = UpperHalfPoint::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.05..4.0)).unwrap();
            let z2 = UpperHalfPoint::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.05..4.0)).unwrap();
            let d0 = hyperbolic_distance(&z1, &z2);
            let d1 = hyperbolic_distance(&moebius(&g, &z1).unwrap(), &moebius(&g, &z2).unwrap());
            assert!((d0 - d1).abs() < 1e-10 * (1.0 + d0));
        }
    }

    #[test]
    fn homothety_defining_property() {
        // vertical-geodesic oracle: center i, y = i e, ratio 2 lands at i e^2
        let y = UpperHalfPoint::new(0.0, std::f64::consts::E).unwrap();
        let h = hyperbolic_homothety(&UpperHalfPoint::I, 2.0, &y).unwrap();
        assert!(h.x.abs() < 1e-12);
        assert!((h.y - std::f64::consts::E.powi(2)).abs() < 1e-10);

        let h1 = hyperbolic_homothety(&UpperHalfPoint::I, 1.0, &y).unwrap();
        assert!((h1.x - y.x).abs() < 1e-12 && (h1.y - y.y).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..100 {
            let x0 = UpperHalfPoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0)).unwrap();
            let y = UpperHalfPoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0)).unwrap();
            if hyperbolic_distance(&x0, &y) < 1e-12 {
                continue;
            }
            for t in [0.5, 3.0, 10.0] {
                let h = hyperbolic_homothety(&x0, t, &y).unwrap();
                let ratio = hyperbolic_distance(&x0, &h) / hyperbolic_distance(&x0, &y);
                assert!((ratio - t).abs() < 1e-10 * t, "ratio {ratio} vs {t}");
            }
        }
    }

    #[test]
    fn determinant_drift_over_long_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut g = Sl2Element::identity();
        let steps: Vec<Sl2Element> = (0..64).map(|_| random_group(&mut rng)).collect();
        let mut worst: f64 = 0.0;
        for i in 0..1_000_000usize {
            g = g.mul(&steps[i % steps.len()]);
            worst = worst.max((g.det() - 1.0).abs());
            if g.max_abs_entry() > 1e120 {
                // restart the walk before entries overflow; the determinant
                // invariant keeps accumulating across segments
                g = Sl2Element::identity();
            }
        }
        assert!(worst < 1e-9, "worst determinant drift {worst:.3e}");
    }

    #[test]
    fn geodesic_horocycle_commutation() {
        // phi_t(phi_s^U(p)) = phi^U_{e^{-t} s}(phi_t(p)) as matrices:
        // exp(sU) exp(tX) = exp(tX) exp(e^{-t} s U)
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..100 {
            let s = rng.gen_range(-3.0..3.0);
            let t = rng.gen_range(-3.0..3.0);
            let lhs = exp_lie(&LieVector::U, s).mul(&exp_lie(&LieVector::X, t));
            let rhs = exp_lie(&LieVector::X, t).mul(&exp_lie(&LieVector::U, (-t).exp() * s));
            assert!(lhs.dist_mod_sign(&rhs) < 1e-10 * lhs.max_abs_entry().max(1.0));
        }
    }

    #[test]
    fn iwasawa_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..200 {
            let g = random_group(&mut rng);
            let (x, y, theta) = iwasawa(&g);
            // rebuild n(x) a(y) k(theta)
            let sy = y.sqrt();
            let n = Sl2Element { a: 1.0, b: x, c: 0.0, d: 1.0 };
            let a = Sl2Element { a: sy, b: 0.0, c: 0.0, d: 1.0 / sy };
            let k = Sl2Element { a: theta.cos(), b: theta.sin(), c: -theta.sin(), d: theta.cos() };
            let re = n.mul(&a).mul(&k);
            assert!(g.dist_mod_sign(&re) < 1e-10 * g.max_abs_entry().max(1.0));
            // base point matches moebius action on i
            let z = moebius(&g, &UpperHalfPoint::I).unwrap();
            assert!((z.x - x).abs() < 1e-10 && (z.y - y).abs() < 1e-10);
        }
    }

    #[test]
    fn entry_jets_match_difference_quotients() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..40 {
            let g = random_group(&mut rng);
            let z = random_lie(&mut rng, 1.5);
            let jets = entry_jets(&g, &z);
            let h = 1e-5;
            let gp = g.mul(&exp_lie(&z, h));
            let gm = g.mul(&exp_lie(&z, -h));
            let vals = [[g.a, g.b], [g.c, g.d]];
            let plus = [[gp.a, gp.b], [gp.c, gp.d]];
            let minus = [[gm.a, gm.b], [gm.c, gm.d]];
            for i in 0..2 {
                for j in 0..2 {
                    assert!((jets[i][j].v - vals[i][j]).abs() < 1e-12);
                    let fd1 = (plus[i][j] - minus[i][j]) / (2.0 * h);
                    let fd2 = (plus[i][j] - 2.0 * vals[i][j] + minus[i][j]) / (h * h);
                    assert!((jets[i][j].d1 - fd1).abs() < 1e-8);
                    assert!((jets[i][j].d2 - fd2).abs() < 1e-4);
                }
            }
        }
    }
}
