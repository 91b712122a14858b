//! Exact rational plane geometry: convex polygon clipping, centroids, and
//! exact integration of bivariate polynomials over polygons.
//!
//! Everything here is arithmetic over `Rat` — no tolerances. The piecewise
//! structure of the exact densities is carved out by half-plane clipping, and
//! their normalization checks reduce to polynomial integrals over triangles
//! via the simplex moment formula ∫ s^a t^b = a! b! / (a+b+2)!.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::multipoly::QPoly;
use crate::rat::{rat_sign, Rat};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatPoint {
    pub x: Rat,
    pub y: Rat,
}

impl RatPoint {
    pub fn new(x: Rat, y: Rat) -> Self {
        RatPoint { x, y }
    }

    pub fn of_ints(x: i64, y: i64) -> Self {
        RatPoint { x: crate::rat::rat_i64(x), y: crate::rat::rat_i64(y) }
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (crate::rat::rat_to_f64(&self.x), crate::rat::rat_to_f64(&self.y))
    }
}

/// Closed half-plane a·x + b·y + c ≥ 0.
#[derive(Clone, Debug)]
pub struct HalfPlane {
    pub a: Rat,
    pub b: Rat,
    pub c: Rat,
}

impl HalfPlane {
    pub fn new(a: Rat, b: Rat, c: Rat) -> Self {
        assert!(!(Zero::is_zero(&a) && Zero::is_zero(&b)), "degenerate half-plane");
        HalfPlane { a, b, c }
    }

    pub fn eval(&self, p: &RatPoint) -> Rat {
        &self.a * &p.x + &self.b * &p.y + &self.c
    }
}

/// Primitive-integer canonical form of the line a·x + b·y + c = 0: clear
/// denominators, divide by the gcd, and make the first nonzero coefficient
/// positive. Two rational triples describe the same line iff their canonical
/// forms are equal, which makes this the key for grouping cut lines.
pub fn canonical_line(a: &Rat, b: &Rat, c: &Rat) -> (BigInt, BigInt, BigInt) {
    let lcm = a.denom().lcm(b.denom()).lcm(c.denom());
    let mut ai = a.numer() * (&lcm / a.denom());
    let mut bi = b.numer() * (&lcm / b.denom());
    let mut ci = c.numer() * (&lcm / c.denom());
    let g = ai.gcd(&bi).gcd(&ci);
    if !g.is_zero() {
        ai /= &g;
        bi /= &g;
        ci /= &g;
    }
    let lead_neg = if !ai.is_zero() {
        ai.is_negative()
    } else if !bi.is_zero() {
        bi.is_negative()
    } else {
        ci.is_negative()
    };
    if lead_neg {
        (-ai, -bi, -ci)
    } else {
        (ai, bi, ci)
    }
}

pub fn signed_area2(poly: &[RatPoint]) -> Rat {
    // Twice the signed area (shoelace); positive for counter-clockwise.
    let n = poly.len();
    let mut acc = Rat::zero();
    for i in 0..n {
        let p = &poly[i];
        let q = &poly[(i + 1) % n];
        acc += &p.x * &q.y - &q.x * &p.y;
    }
    acc
}

pub fn polygon_area(poly: &[RatPoint]) -> Rat {
    let two = Rat::from_integer(BigInt::from(2));
    let a = signed_area2(poly);
    if a.is_negative() {
        -a / two
    } else {
        a / two
    }
}

pub fn ensure_ccw(mut poly: Vec<RatPoint>) -> Vec<RatPoint> {
    if signed_area2(&poly).is_negative() {
        poly.reverse();
    }
    poly
}

pub fn polygon_centroid(poly: &[RatPoint]) -> RatPoint {
    assert!(poly.len() >= 3, "centroid needs a 2-d polygon");
    let n = poly.len();
    let mut a2 = Rat::zero();
    let mut cx = Rat::zero();
    let mut cy = Rat::zero();
    for i in 0..n {
        let p = &poly[i];
        let q = &poly[(i + 1) % n];
        let cross = &p.x * &q.y - &q.x * &p.y;
        a2 += &cross;
        cx += (&p.x + &q.x) * &cross;
        cy += (&p.y + &q.y) * &cross;
    }
    assert!(!Zero::is_zero(&a2), "degenerate polygon");
    // C = (1/6A) Σ (v_i + v_{i+1}) cross_i with A = a2/2, so divide by 3·a2.
    let six_a = &a2 * Rat::from_integer(BigInt::from(3));
    RatPoint { x: cx / &six_a, y: cy / six_a }
}

/// Sutherland–Hodgman clip of a convex polygon against one half-plane,
/// entirely in exact arithmetic. Collapsed results come back with fewer than
/// three vertices.
pub fn clip_polygon(poly: &[RatPoint], h: &HalfPlane) -> Vec<RatPoint> {
    let n = poly.len();
    if n == 0 {
        return Vec::new();
    }
    let vals: Vec<Rat> = poly.iter().map(|p| h.eval(p)).collect();
    let mut out: Vec<RatPoint> = Vec::new();
    let push = |pt: RatPoint, out: &mut Vec<RatPoint>| {
        if out.last() != Some(&pt) {
            out.push(pt);
        }
    };
    for i in 0..n {
        let j = (i + 1) % n;
        let (p, q) = (&poly[i], &poly[j]);
        let (hp, hq) = (&vals[i], &vals[j]);
        if !hp.is_negative() {
            push(p.clone(), &mut out);
        }
        if rat_sign(hp) * rat_sign(hq) < 0 {
            // Intersection at t = hp / (hp - hq) along p→q.
            let t = hp / (hp - hq);
            let x = &p.x + (&q.x - &p.x) * &t;
            let y = &p.y + (&q.y - &p.y) * &t;
            push(RatPoint { x, y }, &mut out);
        }
    }
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    if out.len() < 3 || Zero::is_zero(&signed_area2(&out)) {
        return Vec::new();
    }
    out
}

/// Intersect a stack of half-planes starting from an exact bounding box.
pub fn intersect_halfplanes(bbox: &[RatPoint], planes: &[HalfPlane]) -> Vec<RatPoint> {
    let mut poly = bbox.to_vec();
    for h in planes {
        poly = clip_polygon(&poly, h);
        if poly.is_empty() {
            return poly;
        }
    }
    poly
}

/// Exact membership for a convex CCW polygon (boundary counts as inside).
pub fn convex_contains(poly: &[RatPoint], pt: &RatPoint) -> bool {
    let n = poly.len();
    for i in 0..n {
        let p = &poly[i];
        let q = &poly[(i + 1) % n];
        let cross = (&q.x - &p.x) * (&pt.y - &p.y) - (&q.y - &p.y) * (&pt.x - &p.x);
        if cross.is_negative() {
            return false;
        }
    }
    true
}

/// Exact convex hull via Andrew's monotone chain. Returns CCW vertices with
/// collinear middle points removed; fully collinear inputs collapse to the
/// two extreme points (or fewer).
pub fn convex_hull(points: &[RatPoint]) -> Vec<RatPoint> {
    let mut pts: Vec<RatPoint> = points.to_vec();
    pts.sort_by(|p, q| p.x.cmp(&q.x).then_with(|| p.y.cmp(&q.y)));
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if pts.len() <= 2 {
        return pts;
    }
    let turns_right = |o: &RatPoint, a: &RatPoint, b: &RatPoint| -> bool {
        let cross = (&a.x - &o.x) * (&b.y - &o.y) - (&a.y - &o.y) * (&b.x - &o.x);
        !cross.is_positive()
    };
    let mut lower: Vec<RatPoint> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && turns_right(&lower[lower.len() - 2], &lower[lower.len() - 1], p) {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<RatPoint> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && turns_right(&upper[upper.len() - 2], &upper[upper.len() - 1], p) {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// ∫∫_simplex s^a t^b ds dt over {s,t ≥ 0, s+t ≤ 1} = a! b! / (a+b+2)!.
fn simplex_moment(a: u32, b: u32) -> Rat {
    use crate::rat::factorial;
    let num = factorial(a as u64) * factorial(b as u64);
    let den = factorial(a as u64 + b as u64 + 2);
    Rat::new(num, den)
}

/// Exact ∫∫_P f(x,y) dx dy for a simple polygon P (vertices in order) and a
/// bivariate polynomial f (first variable = x, second = y). Uses the signed
/// fan triangulation from the first vertex, so orientation handedness cancels
/// and the result is positive for CCW input.
pub fn integrate_polynomial(f: &QPoly, poly: &[RatPoint]) -> Rat {
    assert_eq!(f.vars.len(), 2, "expect a bivariate polynomial");
    assert!(poly.len() >= 3, "need a polygon");
    let mut total = Rat::zero();
    for i in 1..poly.len() - 1 {
        total += integrate_over_triangle(f, &poly[0], &poly[i], &poly[i + 1]);
    }
    total
}

fn integrate_over_triangle(f: &QPoly, v0: &RatPoint, v1: &RatPoint, v2: &RatPoint) -> Rat {
    let dx1 = &v1.x - &v0.x;
    let dy1 = &v1.y - &v0.y;
    let dx2 = &v2.x - &v0.x;
    let dy2 = &v2.y - &v0.y;
    let jac = &dx1 * &dy2 - &dx2 * &dy1; // signed
    if Zero::is_zero(&jac) {
        return Rat::zero();
    }
    // x(s,t) = x0 + s dx1 + t dx2 and likewise y, as polynomials in (s,t).
    let st = &["s", "t"];
    let s = QPoly::var(st, "s");
    let t = QPoly::var(st, "t");
    let x_poly = QPoly::constant(st, v0.x.clone())
        .add(&s.scale(&dx1))
        .add(&t.scale(&dx2));
    let y_poly = QPoly::constant(st, v0.y.clone())
        .add(&s.scale(&dy1))
        .add(&t.scale(&dy2));

    let max_x = f.deg_in(0) as usize;
    let max_y = f.deg_in(1) as usize;
    let mut x_pows = Vec::with_capacity(max_x + 1);
    let mut y_pows = Vec::with_capacity(max_y + 1);
    x_pows.push(QPoly::one(st));
    y_pows.push(QPoly::one(st));
    for k in 1..=max_x {
        x_pows.push(x_pows[k - 1].mul(&x_poly));
    }
    for k in 1..=max_y {
        y_pows.push(y_pows[k - 1].mul(&y_poly));
    }

    let mut composed = QPoly::zero(st);
    for (e, c) in &f.terms {
        composed = composed.add(&x_pows[e[0] as usize].mul(&y_pows[e[1] as usize]).scale(c));
    }

    let mut integral = Rat::zero();
    for (e, c) in &composed.terms {
        integral += c * simplex_moment(e[0], e[1]);
    }
    integral * jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat_frac, rat_i64};

    fn unit_square() -> Vec<RatPoint> {
        vec![
            RatPoint::of_ints(0, 0),
            RatPoint::of_ints(1, 0),
            RatPoint::of_ints(1, 1),
            RatPoint::of_ints(0, 1),
        ]
    }

    #[test]
    fn clip_square_to_triangle() {
        // keep x + y ≤ 1, i.e. -x - y + 1 ≥ 0
        let h = HalfPlane::new(rat_i64(-1), rat_i64(-1), rat_i64(1));
        let tri = clip_polygon(&unit_square(), &h);
        assert_eq!(tri.len(), 3);
        assert_eq!(polygon_area(&tri), rat_frac(1, 2));
        assert!(convex_contains(&tri, &RatPoint::new(rat_frac(1, 4), rat_frac(1, 4))));
        assert!(!convex_contains(&tri, &RatPoint::new(rat_frac(3, 4), rat_frac(3, 4))));
    }

    #[test]
    fn clip_to_empty() {
        let h = HalfPlane::new(rat_i64(1), rat_i64(0), rat_i64(-5));
        assert!(clip_polygon(&unit_square(), &h).is_empty());
    }

    #[test]
    fn clip_through_vertex_keeps_area() {
        // Line through (0,1) and (1,0) again but as ≥: x + y - 1 ≥ 0
        let h = HalfPlane::new(rat_i64(1), rat_i64(1), rat_i64(-1));
        let upper = clip_polygon(&unit_square(), &h);
        assert_eq!(polygon_area(&upper), rat_frac(1, 2));
    }

    #[test]
    fn centroid_of_triangle_is_vertex_mean() {
        let tri = vec![
            RatPoint::of_ints(0, 0),
            RatPoint::of_ints(3, 0),
            RatPoint::of_ints(0, 3),
        ];
        let c = polygon_centroid(&tri);
        assert_eq!(c, RatPoint::new(rat_i64(1), rat_i64(1)));
    }

    #[test]
    fn canonical_line_forms() {
        assert_eq!(
            canonical_line(&rat_frac(1, 2), &rat_frac(-1, 3), &Rat::zero()),
            (BigInt::from(3), BigInt::from(-2), BigInt::from(0))
        );
        assert_eq!(
            canonical_line(&rat_i64(-2), &rat_i64(4), &rat_i64(-6)),
            (BigInt::from(1), BigInt::from(-2), BigInt::from(3))
        );
        // same line, different scaling → same key
        assert_eq!(
            canonical_line(&rat_frac(2, 5), &rat_frac(-4, 5), &rat_frac(6, 5)),
            canonical_line(&rat_i64(-1), &rat_i64(2), &rat_i64(-3))
        );
    }

    #[test]
    fn integrates_monomials_over_unit_square() {
        let vars = &["x", "y"];
        for (a, b) in [(0u32, 0u32), (1, 0), (2, 3), (4, 4)] {
            let f = QPoly::monomial(vars, &[a, b], rat_i64(1));
            let got = integrate_polynomial(&f, &unit_square());
            let expect = rat_frac(1, ((a + 1) * (b + 1)) as i64);
            assert_eq!(got, expect, "x^{a} y^{b}");
        }
    }

    #[test]
    fn integrates_over_horn_polygon_shape() {
        // The quadrilateral (0,0),(1,1),(2,0),(2,-1) has area 2; orientation
        // given is clockwise, so the signed fan integral of 1 is -2.
        let quad = vec![
            RatPoint::of_ints(0, 0),
            RatPoint::of_ints(1, 1),
            RatPoint::of_ints(2, 0),
            RatPoint::of_ints(2, -1),
        ];
        let one = QPoly::one(&["x", "y"]);
        assert_eq!(integrate_polynomial(&one, &quad), rat_i64(-2));
        let ccw = ensure_ccw(quad);
        assert_eq!(integrate_polynomial(&one, &ccw), rat_i64(2));
        assert_eq!(polygon_area(&ccw), rat_i64(2));
    }

    #[test]
    fn halfplane_stack_produces_expected_polygon() {
        let bbox = vec![
            RatPoint::of_ints(-10, -10),
            RatPoint::of_ints(10, -10),
            RatPoint::of_ints(10, 10),
            RatPoint::of_ints(-10, 10),
        ];
        // x ≥ 0, y ≥ 0, x + y ≤ 2
        let planes = vec![
            HalfPlane::new(rat_i64(1), rat_i64(0), rat_i64(0)),
            HalfPlane::new(rat_i64(0), rat_i64(1), rat_i64(0)),
            HalfPlane::new(rat_i64(-1), rat_i64(-1), rat_i64(2)),
        ];
        let poly = intersect_halfplanes(&bbox, &planes);
        assert_eq!(polygon_area(&poly), rat_i64(2));
        assert_eq!(poly.len(), 3);
    }
}
