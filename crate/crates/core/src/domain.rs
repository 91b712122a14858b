//! Geometry of the admissible spectrum: the Horn polygon in the (γ₁,γ₂)
//! plane, the curvilinear (p,q) domain it maps to, the coordinate changes
//! between the two, and the loci where the densities are expected to lose
//! smoothness.
//!
//! All polygon construction and membership logic is exact rational
//! arithmetic; only the final coordinates handed to numeric consumers are
//! floats. The cubic is inverted by the trigonometric method, which is stable
//! throughout the all-real-roots region.

use num_traits::{One, Signed, Zero};

use crate::error::{HornError, Result};
use crate::geom::{canonical_line, convex_contains, polygon_area, HalfPlane, RatPoint};
use crate::rat::{rat_sign, rat_to_f64, Rat};
use crate::spectrum::Spectrum;

/// Boundary-membership tolerance for numeric points; boundary counts inside.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// The support polygon in the (γ₁,γ₂) plane, carved out by the six spectral
/// bounds plus the ordering constraints γ₃ ≤ γ₂ ≤ γ₁ at fixed trace.
#[derive(Clone, Debug)]
pub struct HornPolygon {
    pub g1: (Rat, Rat),
    pub g2: (Rat, Rat),
    pub g3: (Rat, Rat),
    /// Σα + Σβ: every admissible γ satisfies γ₁+γ₂+γ₃ = sigma.
    pub sigma: Rat,
    /// Counter-clockwise vertices in (γ₁,γ₂); a single point or a segment
    /// when the polygon degenerates (e.g. β = 0).
    pub vertices: Vec<RatPoint>,
    planes: Vec<HalfPlane>,
    planes_f64: Vec<(f64, f64, f64)>,
}

fn exact_values(s: &Spectrum) -> Result<Vec<Rat>> {
    if let Some(r) = &s.exact {
        return Ok(r.clone());
    }
    s.values
        .iter()
        .map(|v| {
            Rat::from_float(*v)
                .ok_or_else(|| HornError::InvalidInput(format!("non-finite eigenvalue {v}")))
        })
        .collect()
}

fn rmax<'a>(it: impl Iterator<Item = &'a Rat>) -> Rat {
    it.cloned().reduce(|a, b| if a >= b { a } else { b }).unwrap()
}

fn rmin<'a>(it: impl Iterator<Item = &'a Rat>) -> Rat {
    it.cloned().reduce(|a, b| if a <= b { a } else { b }).unwrap()
}

/// Solve the 2×2 system a1 x + b1 y + c1 = 0, a2 x + b2 y + c2 = 0.
fn line_intersection(l1: &(Rat, Rat, Rat), l2: &(Rat, Rat, Rat)) -> Option<RatPoint> {
    let det = &l1.0 * &l2.1 - &l2.0 * &l1.1;
    if Zero::is_zero(&det) {
        return None;
    }
    let x = (&l1.1 * &l2.2 - &l2.1 * &l1.2) / &det;
    let y = (&l2.0 * &l1.2 - &l1.0 * &l2.2) / &det;
    Some(RatPoint::new(x, y))
}

/// Order a set of boundary points counter-clockwise around their mean and
/// drop collinear middle points; exact throughout.
fn order_ccw(mut pts: Vec<RatPoint>) -> Vec<RatPoint> {
    pts.sort_by(|p, q| (&p.x, &p.y).cmp(&(&q.x, &q.y)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let n = Rat::from_integer(num_bigint::BigInt::from(pts.len() as i64));
    let cx = pts.iter().map(|p| p.x.clone()).sum::<Rat>() / &n;
    let cy = pts.iter().map(|p| p.y.clone()).sum::<Rat>() / &n;
    let upper = |p: &RatPoint| -> bool {
        let dy = &p.y - &cy;
        if !Zero::is_zero(&dy) {
            return dy.is_positive();
        }
        (&p.x - &cx).is_positive()
    };
    pts.sort_by(|p, q| {
        let (up, uq) = (upper(p), upper(q));
        if up != uq {
            return if up { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater };
        }
        // Same half-plane: CCW iff cross((p-c),(q-c)) > 0 puts p before q.
        let cross = (&p.x - &cx) * (&q.y - &cy) - (&q.x - &cx) * (&p.y - &cy);
        match rat_sign(&cross) {
            1 => std::cmp::Ordering::Less,
            -1 => std::cmp::Ordering::Greater,
            _ => {
                // Collinear with the centre: nearer point first (stable).
                let dp = (&p.x - &cx).abs() + (&p.y - &cy).abs();
                let dq = (&q.x - &cx).abs() + (&q.y - &cy).abs();
                dp.cmp(&dq)
            }
        }
    });
    // Remove collinear middles.
    loop {
        let m = pts.len();
        if m <= 3 {
            break;
        }
        let mut removed = false;
        for i in 0..m {
            let prev = &pts[(i + m - 1) % m];
            let cur = &pts[i];
            let next = &pts[(i + 1) % m];
            let cross = (&cur.x - &prev.x) * (&next.y - &cur.y)
                - (&next.x - &cur.x) * (&cur.y - &prev.y);
            if Zero::is_zero(&cross) {
                pts.remove(i);
                removed = true;
                break;
            }
        }
        if !removed {
            break;
        }
    }
    pts
}

/// Construct the Horn polygon from two sorted spectra of length 3.
pub fn horn_polygon(alpha: &Spectrum, beta: &Spectrum) -> Result<HornPolygon> {
    if alpha.n() != 3 || beta.n() != 3 {
        return Err(HornError::InvalidInput("horn_polygon expects n = 3".into()));
    }
    let a = exact_values(alpha)?;
    let b = exact_values(beta)?;
    let sums = |pairs: &[(usize, usize)]| -> Vec<Rat> {
        pairs.iter().map(|(i, j)| &a[*i] + &b[*j]).collect()
    };
    let low3 = &a[2] + &b[2];
    let high1 = &a[0] + &b[0];
    let mid_three = sums(&[(0, 2), (1, 1), (2, 0)]);
    let g3 = (low3, rmin(mid_three.iter()));
    let g1 = (rmax(mid_three.iter()), high1);
    let g2 = (
        rmax(sums(&[(1, 2), (2, 1)]).iter()),
        rmin(sums(&[(0, 1), (1, 0)]).iter()),
    );
    let sigma: Rat = a.iter().sum::<Rat>() + b.iter().sum::<Rat>();

    if g1.0 > g1.1 || g2.0 > g2.1 || g3.0 > g3.1 {
        return Err(HornError::EmptyPolygon);
    }

    // Half-planes in (γ₁,γ₂) with γ₃ = σ − γ₁ − γ₂.
    let planes = vec![
        HalfPlane::new(Rat::one(), Rat::zero(), -g1.0.clone()),
        HalfPlane::new(-Rat::one(), Rat::zero(), g1.1.clone()),
        HalfPlane::new(Rat::zero(), Rat::one(), -g2.0.clone()),
        HalfPlane::new(Rat::zero(), -Rat::one(), g2.1.clone()),
        HalfPlane::new(-Rat::one(), -Rat::one(), &sigma - &g3.0),
        HalfPlane::new(Rat::one(), Rat::one(), &g3.1 - &sigma),
        HalfPlane::new(Rat::one(), -Rat::one(), Rat::zero()),
        HalfPlane::new(Rat::one(), Rat::one() + Rat::one(), -sigma.clone()),
    ];

    // Vertex candidates: pairwise intersections of the boundary lines that
    // satisfy every inequality.
    let lines: Vec<(Rat, Rat, Rat)> =
        planes.iter().map(|h| (h.a.clone(), h.b.clone(), h.c.clone())).collect();
    let mut cands: Vec<RatPoint> = Vec::new();
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            if let Some(p) = line_intersection(&lines[i], &lines[j]) {
                if planes.iter().all(|h| !h.eval(&p).is_negative()) {
                    cands.push(p);
                }
            }
        }
    }
    let vertices = order_ccw(cands);
    if vertices.is_empty() {
        return Err(HornError::EmptyPolygon);
    }
    let planes_f64 = planes
        .iter()
        .map(|h| {
            let (a, b, c) = (rat_to_f64(&h.a), rat_to_f64(&h.b), rat_to_f64(&h.c));
            let norm = (a * a + b * b).sqrt();
            (a / norm, b / norm, c / norm)
        })
        .collect();
    Ok(HornPolygon { g1, g2, g3, sigma, vertices, planes, planes_f64 })
}

impl HornPolygon {
    pub fn area(&self) -> Rat {
        if self.vertices.len() < 3 {
            return Rat::zero();
        }
        polygon_area(&self.vertices)
    }

    pub fn is_degenerate(&self) -> bool {
        Zero::is_zero(&self.area())
    }

    /// Exact membership in (γ₁,γ₂); boundary counts as inside.
    pub fn contains_exact(&self, pt: &RatPoint) -> bool {
        self.planes.iter().all(|h| !h.eval(pt).is_negative())
    }

    /// Numeric membership with signed-distance tolerance `tol` (boundary and
    /// a tol-collar count as inside).
    pub fn contains_f64(&self, g1: f64, g2: f64, tol: f64) -> bool {
        self.planes_f64.iter().all(|(a, b, c)| a * g1 + b * g2 + c >= -tol)
    }

    pub fn contains_gamma(&self, gamma: &Spectrum, tol: f64) -> bool {
        self.contains_f64(gamma.values[0], gamma.values[1], tol)
    }

    /// Axis-aligned bounding box in (γ₁,γ₂), as floats.
    pub fn bbox_f64(&self) -> (f64, f64, f64, f64) {
        (
            rat_to_f64(&self.g1.0),
            rat_to_f64(&self.g1.1),
            rat_to_f64(&self.g2.0),
            rat_to_f64(&self.g2.1),
        )
    }

    fn boundary_lines(&self) -> Vec<(EdgeTag, (Rat, Rat, Rat))> {
        let mut out = Vec::new();
        let frz =
            |c: &Rat, which: u8| -> (EdgeTag, (Rat, Rat, Rat)) {
                let line = match which {
                    1 => (Rat::one(), Rat::zero(), -c.clone()),
                    2 => (Rat::zero(), Rat::one(), -c.clone()),
                    _ => (Rat::one(), Rat::one(), c - &self.sigma),
                };
                (EdgeTag::Frozen { value: c.clone() }, line)
            };
        out.push(frz(&self.g1.0, 1));
        out.push(frz(&self.g1.1, 1));
        out.push(frz(&self.g2.0, 2));
        out.push(frz(&self.g2.1, 2));
        out.push(frz(&self.g3.0, 3));
        out.push(frz(&self.g3.1, 3));
        out.push((EdgeTag::Coincide { pair: (1, 2) }, (Rat::one(), -Rat::one(), Rat::zero())));
        out.push((
            EdgeTag::Coincide { pair: (2, 3) },
            (Rat::one(), Rat::one() + Rat::one(), -self.sigma.clone()),
        ));
        out
    }
}

/// What pins a polygon edge: a frozen eigenvalue (straight image in (p,q)) or
/// a coincidence γᵢ = γⱼ (image on the discriminant cubic).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EdgeTag {
    Frozen { value: Rat },
    Coincide { pair: (u8, u8) },
}

/// One boundary piece of the curvilinear (p,q) domain.
#[derive(Clone, Debug)]
pub struct BoundaryPiece {
    pub tag: EdgeTag,
    pub gamma_start: RatPoint,
    pub gamma_end: RatPoint,
    pub pq_start: RatPoint,
    pub pq_end: RatPoint,
}

/// The (p,q)-plane image of the (traceless) Horn polygon.
#[derive(Clone, Debug)]
pub struct PQDomain {
    /// Polygon of the traceless-shifted problem (σ = 0).
    pub polygon: HornPolygon,
    /// Common shift subtracted from every eigenvalue: (Σα+Σβ)/3.
    pub shift: Rat,
    pub pieces: Vec<BoundaryPiece>,
}

/// p = e₂(γ), q = −e₃(γ) on exact traceless coordinates (γ₃ = −γ₁−γ₂).
pub fn pq_of_gamma_rat(g1: &Rat, g2: &Rat) -> (Rat, Rat) {
    let g3 = -(g1 + g2);
    let p = g1 * g2 + g2 * &g3 + &g3 * g1;
    let q = -(g1 * g2 * g3);
    (p, q)
}

/// (p,q) of a traceless sorted spectrum; error when the trace is off.
pub fn pq_of_gamma(gamma: &Spectrum) -> Result<(f64, f64)> {
    if gamma.n() != 3 {
        return Err(HornError::InvalidInput("pq_of_gamma expects n = 3".into()));
    }
    let s = gamma.sum();
    if s.abs() > 1e-10 {
        return Err(HornError::NotTraceless(s));
    }
    let [g1, g2, g3] = [gamma.values[0], gamma.values[1], gamma.values[2]];
    Ok((g1 * g2 + g2 * g3 + g3 * g1, -g1 * g2 * g3))
}

/// Invert (p,q) → sorted traceless spectrum via the trigonometric solution of
/// z³ + p z + q = 0 (valid in the all-real-roots regime 4p³+27q² ≤ 0).
pub fn gamma_of_pq(p: f64, q: f64) -> Result<Spectrum> {
    let disc = 4.0 * p.powi(3) + 27.0 * q * q;
    let scale = (p.abs().powi(3)).max(q * q).max(1.0);
    if disc > 1e-9 * scale {
        return Err(HornError::ComplexSpectrum(disc));
    }
    if p >= 0.0 {
        // Only reachable in the tolerance collar around p = q = 0.
        let r = -q.cbrt();
        return Spectrum::from_f64(vec![r, r, r]);
    }
    let m = 2.0 * (-p / 3.0).sqrt();
    let arg = (3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt();
    let theta = arg.clamp(-1.0, 1.0).acos();
    let roots: Vec<f64> = (0..3)
        .map(|k| m * ((theta - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos())
        .collect();
    Spectrum::from_f64(roots)
}

/// Build the curvilinear (p,q) domain for (α, β); works on the traceless
/// shift internally since (p,q) are defined for trace zero.
pub fn pq_domain(alpha: &Spectrum, beta: &Spectrum) -> Result<PQDomain> {
    let a = Spectrum::from_rats(exact_values(alpha)?)?;
    let b = Spectrum::from_rats(exact_values(beta)?)?;
    let sigma: Rat = a.exact.as_ref().unwrap().iter().sum::<Rat>()
        + b.exact.as_ref().unwrap().iter().sum::<Rat>();
    let shift = sigma / Rat::from_integer(num_bigint::BigInt::from(3));
    let at = a.traceless();
    let bt = b.traceless();
    let polygon = horn_polygon(&at, &bt)?;

    let mut pieces = Vec::new();
    let verts = &polygon.vertices;
    if verts.len() >= 3 {
        let lines = polygon.boundary_lines();
        let on_line = |l: &(Rat, Rat, Rat), p: &RatPoint| -> bool {
            Zero::is_zero(&(&l.0 * &p.x + &l.1 * &p.y + &l.2))
        };
        for i in 0..verts.len() {
            let s = &verts[i];
            let e = &verts[(i + 1) % verts.len()];
            let tag = lines
                .iter()
                .find(|(_, l)| on_line(l, s) && on_line(l, e))
                .map(|(t, _)| t.clone())
                .ok_or_else(|| {
                    HornError::InvalidInput("polygon edge not on any defining line".into())
                })?;
            let (ps, qs) = pq_of_gamma_rat(&s.x, &s.y);
            let (pe, qe) = pq_of_gamma_rat(&e.x, &e.y);
            pieces.push(BoundaryPiece {
                tag,
                gamma_start: s.clone(),
                gamma_end: e.clone(),
                pq_start: RatPoint::new(ps, qs),
                pq_end: RatPoint::new(pe, qe),
            });
        }
    }
    Ok(PQDomain { polygon, shift, pieces })
}

impl PQDomain {
    /// Membership test for a numeric (p,q) point; boundary counts inside.
    pub fn contains(&self, p: f64, q: f64) -> bool {
        self.contains_tol(p, q, MEMBERSHIP_TOL)
    }

    pub fn contains_tol(&self, p: f64, q: f64, tol: f64) -> bool {
        match gamma_of_pq(p, q) {
            Ok(g) => self.polygon.contains_gamma(&g, tol),
            Err(_) => false,
        }
    }

    /// Bounding box of the boundary image, sampling each piece densely.
    pub fn bbox(&self, samples_per_piece: usize) -> (f64, f64, f64, f64) {
        let mut pmin = f64::INFINITY;
        let mut pmax = f64::NEG_INFINITY;
        let mut qmin = f64::INFINITY;
        let mut qmax = f64::NEG_INFINITY;
        let mut visit = |p: f64, q: f64| {
            pmin = pmin.min(p);
            pmax = pmax.max(p);
            qmin = qmin.min(q);
            qmax = qmax.max(q);
        };
        for piece in &self.pieces {
            let (x0, y0) = piece.gamma_start.to_f64();
            let (x1, y1) = piece.gamma_end.to_f64();
            for k in 0..=samples_per_piece {
                let t = k as f64 / samples_per_piece.max(1) as f64;
                let g1 = x0 + t * (x1 - x0);
                let g2 = y0 + t * (y1 - y0);
                let g3 = -g1 - g2;
                visit(g1 * g2 + g2 * g3 + g3 * g1, -g1 * g2 * g3);
            }
        }
        (pmin, pmax, qmin, qmax)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocusKind {
    Line,
    HalfLine,
    Point,
}

/// A locus where the density is expected to lose analyticity: a frozen
/// coordinate line clipped to the polygon (traceless coordinates throughout).
#[derive(Clone, Debug)]
pub struct SingularLocus {
    pub kind: LocusKind,
    /// Which γ is pinned (1, 2 or 3) and its value.
    pub frozen_index: u8,
    pub frozen_value: Rat,
    /// Segment endpoints in (γ₁,γ₂).
    pub gamma_seg: (RatPoint, RatPoint),
    /// Image endpoints in (p,q); the image lies on c·p + q = −c³.
    pub pq_seg: (RatPoint, RatPoint),
}

impl SingularLocus {
    /// Coefficients (a,b,c) of the carrier line a·γ₁+b·γ₂+c = 0.
    pub fn gamma_line(&self) -> (Rat, Rat, Rat) {
        let v = &self.frozen_value;
        match self.frozen_index {
            1 => (Rat::one(), Rat::zero(), -v.clone()),
            2 => (Rat::zero(), Rat::one(), -v.clone()),
            _ => (Rat::one(), Rat::one(), v.clone()),
        }
    }
}

/// Clip `line` (a,b,c) to the polygon and an optional extra half-plane;
/// returns the extreme points, or None when the intersection is empty.
fn clip_line_to_region(
    line: &(Rat, Rat, Rat),
    poly: &HornPolygon,
    extra: Option<&HalfPlane>,
) -> Option<(RatPoint, RatPoint)> {
    let verts = &poly.vertices;
    if verts.len() < 3 {
        return None;
    }
    let eval = |p: &RatPoint| -> Rat { &line.0 * &p.x + &line.1 * &p.y + &line.2 };
    let inside = |p: &RatPoint| -> bool {
        convex_contains(verts, p) && extra.map_or(true, |h| !h.eval(p).is_negative())
    };
    let mut cands: Vec<RatPoint> = Vec::new();
    let n = verts.len();
    for i in 0..n {
        let p = &verts[i];
        let q = &verts[(i + 1) % n];
        let (vp, vq) = (eval(p), eval(q));
        let (sp, sq) = (rat_sign(&vp), rat_sign(&vq));
        if sp == 0 {
            cands.push(p.clone());
        }
        if sp * sq < 0 {
            let t = &vp / (&vp - &vq);
            cands.push(RatPoint::new(&p.x + (&q.x - &p.x) * &t, &p.y + (&q.y - &p.y) * &t));
        }
    }
    // The constraint boundary may cut the chord: add that point too.
    if let Some(h) = extra {
        if let Some(pt) = line_intersection(line, &(h.a.clone(), h.b.clone(), h.c.clone())) {
            cands.push(pt);
        }
    }
    let mut pts: Vec<RatPoint> = cands.into_iter().filter(|p| inside(p)).collect();
    if pts.is_empty() {
        return None;
    }
    // Order along the line direction (b, -a).
    let key = |p: &RatPoint| -> Rat { &line.1 * &p.x - &line.0 * &p.y };
    pts.sort_by(|p, q| key(p).cmp(&key(q)));
    Some((pts.first().unwrap().clone(), pts.last().unwrap().clone()))
}

/// Expected singular loci: the line γ₂ = ᾱ₂+β̄₂, three constrained
/// half-lines, and their α↔β partners, each clipped to the polygon and
/// mapped to (p,q). Loci sharing a carrier line are merged.
pub fn singular_loci(alpha: &Spectrum, beta: &Spectrum) -> Result<Vec<SingularLocus>> {
    let a_full = Spectrum::from_rats(exact_values(alpha)?)?.traceless();
    let b_full = Spectrum::from_rats(exact_values(beta)?)?.traceless();
    let polygon = horn_polygon(&a_full, &b_full)?;
    if polygon.is_degenerate() {
        return Ok(Vec::new());
    }
    let a = a_full.exact.as_ref().unwrap();
    let b = b_full.exact.as_ref().unwrap();

    // (frozen index, frozen value, definition kind, optional constraint)
    // constraint: half-plane in (γ₁,γ₂) that must be nonnegative.
    let ge_g2 = |w: &Rat| HalfPlane::new(Rat::zero(), Rat::one(), -w.clone());
    let le_g1 = |w: &Rat| HalfPlane::new(-Rat::one(), Rat::zero(), w.clone());
    let ge_g1 = |w: &Rat| HalfPlane::new(Rat::one(), Rat::zero(), -w.clone());
    let mut defs: Vec<(u8, Rat, LocusKind, Option<HalfPlane>)> = vec![(
        2,
        &a[1] + &b[1],
        LocusKind::Line,
        None,
    )];
    for (x, y) in [(a, b), (b, a)] {
        defs.push((1, &x[0] + &y[1], LocusKind::HalfLine, Some(ge_g2(&(&x[2] + &y[0])))));
        defs.push((2, &x[2] + &y[0], LocusKind::HalfLine, Some(le_g1(&(&x[0] + &y[1])))));
        defs.push((3, &x[1] + &y[2], LocusKind::HalfLine, Some(ge_g1(&(&x[0] + &y[1])))));
    }

    let mut loci: Vec<SingularLocus> = Vec::new();
    for (idx, value, kind, constraint) in defs {
        let line = match idx {
            1 => (Rat::one(), Rat::zero(), -value.clone()),
            2 => (Rat::zero(), Rat::one(), -value.clone()),
            _ => (Rat::one(), Rat::one(), value.clone()),
        };
        let Some((s, e)) = clip_line_to_region(&line, &polygon, constraint.as_ref()) else {
            continue;
        };
        let kind = if s == e { LocusKind::Point } else { kind };
        let (ps, qs) = pq_of_gamma_rat(&s.x, &s.y);
        let (pe, qe) = pq_of_gamma_rat(&e.x, &e.y);
        loci.push(SingularLocus {
            kind,
            frozen_index: idx,
            frozen_value: value,
            gamma_seg: (s, e),
            pq_seg: (RatPoint::new(ps, qs), RatPoint::new(pe, qe)),
        });
    }

    // Merge loci on the same carrier line (e.g. constrained sub-segments of
    // the full γ₂ line, or α↔β twins when α = β): keep the union extent and
    // the strongest kind.
    let mut merged: Vec<SingularLocus> = Vec::new();
    for locus in loci {
        let lkey = {
            let (la, lb, lc) = locus.gamma_line();
            canonical_line(&la, &lb, &lc)
        };
        let mut absorbed = false;
        for m in merged.iter_mut() {
            let (ma, mb, mc) = m.gamma_line();
            if canonical_line(&ma, &mb, &mc) == lkey {
                // Union along the shared carrier.
                let key = |p: &RatPoint| -> Rat {
                    let (la, lb, _) = m.gamma_line();
                    &lb * &p.x - &la * &p.y
                };
                let mut pts = vec![
                    m.gamma_seg.0.clone(),
                    m.gamma_seg.1.clone(),
                    locus.gamma_seg.0.clone(),
                    locus.gamma_seg.1.clone(),
                ];
                pts.sort_by(|p, q| key(p).cmp(&key(q)));
                let s = pts.first().unwrap().clone();
                let e = pts.last().unwrap().clone();
                let (ps, qs) = pq_of_gamma_rat(&s.x, &s.y);
                let (pe, qe) = pq_of_gamma_rat(&e.x, &e.y);
                m.gamma_seg = (s.clone(), e.clone());
                m.pq_seg = (RatPoint::new(ps, qs), RatPoint::new(pe, qe));
                if locus.kind == LocusKind::Line
                    || (m.kind == LocusKind::Point && locus.kind == LocusKind::HalfLine)
                {
                    m.kind = locus.kind;
                }
                if s != e && m.kind == LocusKind::Point {
                    m.kind = LocusKind::HalfLine;
                }
                absorbed = true;
                break;
            }
        }
        if !absorbed {
            merged.push(locus);
        }
    }
    Ok(merged)
}
