//! Exact spectral densities for sums of quaternionic (β̲ = 4) orbits.
//!
//! For 2×2 and 3×3 self-dual quaternionic Hermitian matrices with fixed
//! spectra α and β, the eigenvalue density of A + B is piecewise polynomial.
//! This module computes it exactly over the rationals: the orbital integrand
//! is expanded into monomials in the simplex variables u₁, u₂, each monomial
//! is reduced to one-dimensional Dirichlet kernels
//! P∫ u^{-r} e^{iuΦ} du = iπ (iΦ)^{r-1} ε(Φ) / (r-1)!, and the resulting
//! sign-function expansion is resolved into polynomial sectors by exact
//! half-plane clipping of the support polygon.
//!
//! Distributional residues (monomials whose u-power is non-negative after the
//! partial-fraction split produce δ^{(m)} terms) are tracked per carrier line
//! and must cancel in the alternating permutation sum; a surviving residue is
//! reported as [`HornError::DivergentOrbitSum`] rather than silently dropped.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::domain::{horn_polygon, HornPolygon};
use crate::error::{HornError, Result};
use crate::geom::{
    canonical_line, clip_polygon, convex_contains, convex_hull, polygon_area, polygon_centroid,
    HalfPlane, RatPoint,
};
use crate::multipoly::{CPoly, CRat, Coeff, QPoly};
use crate::rat::{binomial, factorial, rat_frac, rat_i64, rat_sign, rat_to_f64, Rat};
use crate::spectrum::Spectrum;

/// Variable order for the mixed u/γ polynomials of the 3×3 reduction.
const UVARS: [&str; 4] = ["u1", "u2", "g1", "g2"];
/// Variable order for γ-plane polynomials (γ₃ is eliminated by tracelessness).
pub const GVARS: [&str; 2] = ["g1", "g2"];

/// Primitive-integer key identifying a line a·γ₁ + b·γ₂ + c = 0.
pub type LineKey = (BigInt, BigInt, BigInt);

fn rat_of_big(b: &BigInt) -> Rat {
    Rat::from_integer(b.clone())
}

/// Affine form a·γ₁ + b·γ₂ + c with exact rational coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct LinForm {
    pub a: Rat,
    pub b: Rat,
    pub c: Rat,
}

impl LinForm {
    pub fn new(a: Rat, b: Rat, c: Rat) -> Self {
        LinForm { a, b, c }
    }

    pub fn sub(&self, o: &LinForm) -> LinForm {
        LinForm { a: &self.a - &o.a, b: &self.b - &o.b, c: &self.c - &o.c }
    }

    pub fn is_degenerate(&self) -> bool {
        Zero::is_zero(&self.a) && Zero::is_zero(&self.b)
    }

    /// The form as a polynomial in the γ-plane variables.
    pub fn to_poly(&self) -> QPoly {
        let mut p = QPoly::constant(&GVARS, self.c.clone());
        p = p.add(&QPoly::monomial(&GVARS, &[1, 0], self.a.clone()));
        p.add(&QPoly::monomial(&GVARS, &[0, 1], self.b.clone()))
    }

    /// Canonical carrier line together with the positive scale λ and sign σ
    /// such that the form equals σ·λ·(canonical form).
    pub fn canon(&self) -> (LineKey, Rat, i32) {
        assert!(!self.is_degenerate(), "constant phase form");
        let key = canonical_line(&self.a, &self.b, &self.c);
        let (raw, canon) = if !Zero::is_zero(&self.a) {
            (self.a.clone(), rat_of_big(&key.0))
        } else {
            (self.b.clone(), rat_of_big(&key.1))
        };
        let scale = raw / canon;
        let sigma = rat_sign(&scale);
        assert!(sigma != 0, "canonical scale cannot vanish");
        (key, scale.abs(), sigma)
    }
}

/// Sign-function expansion of an orbital sum: polynomial weights attached to
/// products of ε over canonical lines, plus any distributional residue.
#[derive(Clone, Debug, Default)]
pub struct Reduced {
    /// Weight of ε(K₁)·ε(K₂) with K₁ < K₂ (the two Dirichlet phase families
    /// of a single term are never parallel, so the keys always differ).
    pub pairs: BTreeMap<(LineKey, LineKey), CPoly>,
    /// Weight of a single ε(K) (one-dimensional reduction, 2×2 case).
    pub singles: BTreeMap<LineKey, CPoly>,
    /// δ^{(m)}(K₁)-residues; the companion is `Some((K₂, s))` for the factor
    /// K₂^{s-1} ε(K₂) of a two-dimensional term. Orientation and scale of the
    /// source forms are folded into the weight so equal keys are comparable.
    pub deltas: BTreeMap<(LineKey, u32, Option<(LineKey, u32)>), CPoly>,
}

impl Reduced {
    fn add_to<K: Ord>(map: &mut BTreeMap<K, CPoly>, key: K, val: CPoly) {
        match map.get_mut(&key) {
            Some(entry) => *entry = entry.add(&val),
            None => {
                map.insert(key, val);
            }
        }
    }

    fn prune(&mut self) {
        self.pairs.retain(|_, v| !v.is_zero());
        self.singles.retain(|_, v| !v.is_zero());
        self.deltas.retain(|_, v| !v.is_zero());
    }

    /// Scale every bucket by a constant.
    pub fn scale(&mut self, c: &CRat) {
        for v in self.pairs.values_mut() {
            *v = v.scale(c);
        }
        for v in self.singles.values_mut() {
            *v = v.scale(c);
        }
        for v in self.deltas.values_mut() {
            *v = v.scale(c);
        }
    }

    /// Checks that no distributional residue survived the permutation sum.
    pub fn check_no_residue(&self) -> Result<()> {
        for (key, poly) in &self.deltas {
            if !poly.is_zero() {
                return Err(HornError::DivergentOrbitSum(format!(
                    "delta residue on line {:?}, order {}, companion {:?}: {}",
                    key.0, key.1, key.2, poly
                )));
            }
        }
        Ok(())
    }

    /// Converts the ε-pair expansion to real polynomial weights, checking
    /// that all imaginary parts cancelled exactly.
    pub fn real_pairs(&self) -> Result<BTreeMap<(LineKey, LineKey), QPoly>> {
        let mut out = BTreeMap::new();
        for (k, v) in &self.pairs {
            let im = v.imag_part();
            if !im.is_zero() {
                return Err(HornError::DivergentOrbitSum(format!(
                    "imaginary residue on ε({:?})ε({:?}): {}",
                    k.0, k.1, im
                )));
            }
            let re = v.real_part();
            if !re.is_zero() {
                out.insert(k.clone(), re);
            }
        }
        Ok(out)
    }

    /// Real weights of the one-dimensional ε-expansion.
    pub fn real_singles(&self) -> Result<BTreeMap<LineKey, QPoly>> {
        let mut out = BTreeMap::new();
        for (k, v) in &self.singles {
            let im = v.imag_part();
            if !im.is_zero() {
                return Err(HornError::DivergentOrbitSum(format!(
                    "imaginary residue on ε({:?}): {}",
                    k, im
                )));
            }
            let re = v.real_part();
            if !re.is_zero() {
                out.insert(k.clone(), re);
            }
        }
        Ok(out)
    }
}

/// One Dirichlet factor 1/u^s: value i^s Φ^{s-1} ε(Φ) / (s-1)! (the factor π
/// is absorbed by the global prefactor). Returns the scalar, the explicit
/// polynomial Φ^{s-1}, the ε carrier line and its orientation σ.
fn dirichlet_factor(s: u32, phi: &LinForm) -> (CRat, CPoly, LineKey, i32) {
    assert!(s >= 1);
    let (key, _lambda, sigma) = phi.canon();
    let inv_fact = Rat::one() / Rat::from_integer(factorial((s - 1) as u64));
    let scalar = CRat::i_pow(s as i64).c_mul(&CRat::real(inv_fact));
    let poly = phi.to_poly().pow(s - 1).map_coeffs(|r| CRat::real(r.clone()));
    (scalar, poly, key, sigma)
}

/// Accumulates one fully reduced 2-d term
/// coef · ∫∫ u₁^{m₁} u₂^{-s} e^{i(u₁Φ₁ + u₂Φ₂)}: a product of two Dirichlet
/// kernels when m₁ ≤ -1, a δ^{(m₁)}(Φ₁)-residue otherwise.
fn emit_2d(acc: &mut Reduced, m1: i64, phi1: &LinForm, s: u32, phi2: &LinForm, coef: &CPoly) {
    if coef.is_zero() {
        return;
    }
    if m1 <= -1 {
        let (sc1, p1, k1, sig1) = dirichlet_factor((-m1) as u32, phi1);
        let (sc2, p2, k2, sig2) = dirichlet_factor(s, phi2);
        assert!(k1 != k2, "parallel phase families in one term");
        let orient = CRat::real(rat_i64((sig1 * sig2) as i64));
        let val = coef.mul(&p1).mul(&p2).scale(&sc1.c_mul(&sc2).c_mul(&orient));
        let key = if k1 < k2 { (k1, k2) } else { (k2, k1) };
        Reduced::add_to(&mut acc.pairs, key, val);
    } else {
        // ∫ u^m e^{iuΦ} du = 2π (-i)^m δ^{(m)}(Φ); fold orientation and scale
        // onto the canonical line: δ^{(m)}(σλK) = σ^m λ^{-(m+1)} δ^{(m)}(K)
        // and Φ₂^{s-1} ε(Φ₂) = σ₂^s λ₂^{s-1} K₂^{s-1} ε(K₂).
        let m = m1 as u32;
        let (k1, lambda1, sigma1) = phi1.canon();
        let (k2, lambda2, sigma2) = phi2.canon();
        let inv_fact = Rat::one() / Rat::from_integer(factorial((s - 1) as u64));
        let sc2 = CRat::i_pow(s as i64).c_mul(&CRat::real(inv_fact));
        let fold1 = rat_i64((sigma1.pow(m)) as i64) / lambda1.pow((m + 1) as i32);
        let sig2s = if s % 2 == 0 { 1 } else { sigma2 };
        let fold2 = rat_i64(sig2s as i64) * lambda2.pow((s - 1) as i32);
        let scal = CRat::i_pow(-(m as i64))
            .c_mul(&sc2)
            .c_mul(&CRat::real(rat_i64(2) * fold1 * fold2));
        Reduced::add_to(&mut acc.deltas, (k1, m, Some((k2, s))), coef.scale(&scal));
    }
}

/// Accumulates one reduced 1-d term coef · ∫ u^{m} e^{iuΦ} du.
fn emit_1d(acc: &mut Reduced, m: i64, phi: &LinForm, coef: &CPoly) {
    if coef.is_zero() {
        return;
    }
    if m <= -1 {
        let (sc, poly, key, sigma) = dirichlet_factor((-m) as u32, phi);
        let val = coef.mul(&poly).scale(&sc.c_mul(&CRat::real(rat_i64(sigma as i64))));
        Reduced::add_to(&mut acc.singles, key, val);
    } else {
        let (key, lambda, sigma) = phi.canon();
        let mu = m as u32;
        let fold = rat_i64(2 * (sigma.pow(mu)) as i64) / lambda.pow((mu + 1) as i32);
        let scal = CRat::i_pow(-(mu as i64)).c_mul(&CRat::real(fold));
        Reduced::add_to(&mut acc.deltas, (key, mu, None), coef.scale(&scal));
    }
}

/// Reduces coef · ∫∫ du₁ du₂ u₁^{e₁} u₂^{e₂} (u₁+u₂)^{-c} e^{i(u₁A₁ + u₂A₂)}
/// to one-dimensional kernels. In the variables (u₁, w = u₁ + u₂) the phase
/// is u₁(A₁ - A₂) + w·A₂; a non-negative u₂-power expands binomially, a pole
/// in u₂ splits by partial fractions against the w-pole.
pub fn dirichlet_reduce(
    acc: &mut Reduced,
    e1: i64,
    e2: i64,
    c: u32,
    a1: &LinForm,
    a2: &LinForm,
    coef: &CPoly,
) {
    let d = a1.sub(a2);
    if e2 >= 0 {
        // u₂^{e₂} = (w - u₁)^{e₂}: terms u₁^{e₁+k} w^{e₂-k-c}.
        for k in 0..=(e2 as u64) {
            let mut pf = Rat::from_integer(binomial(e2 as u64, k));
            if k % 2 == 1 {
                pf = -pf;
            }
            let w_pow = e2 - k as i64 - c as i64;
            assert!(w_pow <= -1, "w-pole must survive the binomial expansion");
            emit_2d(acc, e1 + k as i64, &d, (-w_pow) as u32, a2, &coef.scale(&CRat::real(pf)));
        }
    } else {
        // 1/(u₂^B w^C) =
        //   Σ_{i=1}^{B} (-1)^{B-i} C(B+C-i-1, B-i) u₁^{-(B+C-i)} u₂^{-i}
        // + Σ_{j=1}^{C} (-1)^{B}   C(B+C-j-1, C-j) u₁^{-(B+C-j)} w^{-j}.
        let b = (-e2) as u64;
        let cc = c as u64;
        for i in 1..=b {
            let mut pf = Rat::from_integer(binomial(b + cc - i - 1, b - i));
            if (b - i) % 2 == 1 {
                pf = -pf;
            }
            let m1 = e1 - (b + cc - i) as i64;
            emit_2d(acc, m1, a1, i as u32, a2, &coef.scale(&CRat::real(pf)));
        }
        for j in 1..=cc {
            let mut pf = Rat::from_integer(binomial(b + cc - j - 1, cc - j));
            if b % 2 == 1 {
                pf = -pf;
            }
            let m1 = e1 - (b + cc - j) as i64;
            // In (u₁, w) coordinates the u₁ factor carries phase A₁ - A₂.
            emit_2d(acc, m1, &d, j as u32, a2, &coef.scale(&CRat::real(pf)));
        }
    }
}

/// f₃ applied to the pairwise forms:
/// 1 - (τ₁₂+τ₁₃+τ₂₃)/3 + (τ₁₂τ₁₃+τ₁₃τ₂₃+τ₂₃τ₁₂)/6 - τ₁₂τ₁₃τ₂₃/12.
fn f3_combine(t12: &CPoly, t13: &CPoly, t23: &CPoly) -> CPoly {
    let one = CPoly::one(&UVARS);
    let lin = t12.add(t13).add(t23).scale(&CRat::real(-rat_frac(1, 3)));
    let quad = t12
        .mul(t13)
        .add(&t13.mul(t23))
        .add(&t23.mul(t12))
        .scale(&CRat::real(rat_frac(1, 6)));
    let cub = t12.mul(t13).mul(t23).scale(&CRat::real(-rat_frac(1, 12)));
    one.add(&lin).add(&quad).add(&cub)
}

/// f₃ for a numeric spectrum on the e^{+i} side: τ_jk = i·u·(x_{P(j)}-x_{P(k)})
/// with u = u₁, u₂, u₁+u₂ for (j,k) = (1,2), (2,3), (1,3).
fn f3_numeric(vals: &[Rat; 3], perm: [usize; 3]) -> CPoly {
    let im = |r: Rat| CRat::new(Rat::zero(), r);
    let d = |j: usize, k: usize| &vals[perm[j]] - &vals[perm[k]];
    let t12 = CPoly::monomial(&UVARS, &[1, 0, 0, 0], im(d(0, 1)));
    let t23 = CPoly::monomial(&UVARS, &[0, 1, 0, 0], im(d(1, 2)));
    let t13 = CPoly::monomial(&UVARS, &[1, 0, 0, 0], im(d(0, 2)))
        .add(&CPoly::monomial(&UVARS, &[0, 1, 0, 0], im(d(0, 2))));
    f3_combine(&t12, &t13, &t23)
}

/// f₃ for the symbolic traceless γ = (g₁, g₂, -g₁-g₂) on the e^{-i} side:
/// τ₁₂ = -i u₁ (g₁-g₂), τ₂₃ = -i u₂ (g₁+2g₂), τ₁₃ = -i (u₁+u₂)(2g₁+g₂).
fn f3_gamma() -> CPoly {
    let mi = CRat::new(Rat::zero(), -Rat::one());
    let mono = |exp: &[u32], c: i64| CPoly::monomial(&UVARS, exp, CRat::real(rat_i64(c)));
    let u1 = mono(&[1, 0, 0, 0], 1);
    let u2 = mono(&[0, 1, 0, 0], 1);
    let d12 = mono(&[0, 0, 1, 0], 1).add(&mono(&[0, 0, 0, 1], -1));
    let d23 = mono(&[0, 0, 1, 0], 1).add(&mono(&[0, 0, 0, 1], 2));
    let d13 = mono(&[0, 0, 1, 0], 2).add(&mono(&[0, 0, 0, 1], 1));
    let t12 = u1.mul(&d12).scale(&mi);
    let t23 = u2.mul(&d23).scale(&mi);
    let t13 = u1.add(&u2).mul(&d13).scale(&mi);
    f3_combine(&t12, &t13, &t23)
}

const PERMS3: [([usize; 3], i64); 6] = [
    ([0, 1, 2], 1),
    ([0, 2, 1], -1),
    ([1, 0, 2], -1),
    ([1, 2, 0], 1),
    ([2, 0, 1], 1),
    ([2, 1, 0], -1),
];

/// Splits a mixed u/γ polynomial into γ-polynomials grouped by u-exponents.
fn group_by_u(f: &CPoly) -> BTreeMap<(u32, u32), CPoly> {
    let mut out: BTreeMap<(u32, u32), CPoly> = BTreeMap::new();
    for (exp, c) in &f.terms {
        let entry = out.entry((exp[0], exp[1])).or_insert_with(|| CPoly::zero(&GVARS));
        *entry = entry.add(&CPoly::monomial(&GVARS, &[exp[2], exp[3]], c.clone()));
    }
    out
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

fn check_distinct_traceless(name: &str, v: &[Rat]) -> Result<()> {
    let sum: Rat = v.iter().cloned().sum();
    if !Zero::is_zero(&sum) {
        return Err(HornError::NotTraceless(rat_to_f64(&sum)));
    }
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i] == v[j] {
                return Err(HornError::RepeatedSpectrum(format!(
                    "{name} has a repeated eigenvalue; the quaternionic kernel degenerates"
                )));
            }
        }
    }
    Ok(())
}

/// Full sign-function expansion of CJ₃(γ | α, β) over the 36 permutation
/// pairs: ε(K₁)ε(K₂) weights plus (cancelled) δ-residues.
pub fn reduce_cj3(alpha: &[Rat; 3], beta: &[Rat; 3]) -> Result<Reduced> {
    let mut acc = Reduced::default();
    let fg = f3_gamma();
    for (pa, sa) in &PERMS3 {
        let fa = f3_numeric(alpha, *pa);
        for (pb, sb) in &PERMS3 {
            let fb = f3_numeric(beta, *pb);
            let f = fa.mul(&fb).mul(&fg);
            let sign = CRat::real(rat_i64(sa * sb));
            // A₁ = α_{P(1)} + β_{P'(1)} - γ₁, A₂ = A₁ + α_{P(2)} + β_{P'(2)} - γ₂.
            let c1 = &alpha[pa[0]] + &beta[pb[0]];
            let c2 = &c1 + &alpha[pa[1]] + &beta[pb[1]];
            let a1 = LinForm::new(-Rat::one(), Rat::zero(), c1);
            let a2 = LinForm::new(-Rat::one(), -Rat::one(), c2);
            for ((d1, d2), gpoly) in group_by_u(&f) {
                let coef = gpoly.scale(&sign);
                dirichlet_reduce(&mut acc, d1 as i64 - 5, d2 as i64 - 5, 5, &a1, &a2, &coef);
            }
        }
    }
    acc.prune();
    acc.check_no_residue()?;
    // Prefactor 3!/(i³π²) = 6i/π²; the π² was absorbed by the two Dirichlet
    // kernels of every term.
    acc.scale(&CRat::new(Rat::zero(), rat_i64(6)));
    Ok(acc)
}

/// A maximal region on which the kernel is a single polynomial.
#[derive(Clone, Debug)]
pub struct Sector {
    /// Convex cells (CCW vertex lists) covering the sector.
    pub cells: Vec<Vec<RatPoint>>,
    /// The polynomial in (γ₁, γ₂) on this sector.
    pub poly: QPoly,
}

/// Piecewise-polynomial function of (γ₁, γ₂) supported on a convex polygon.
#[derive(Clone, Debug)]
pub struct PiecewisePoly2D {
    pub sectors: Vec<Sector>,
    pub polygon: HornPolygon,
}

fn point_in_cell_f64(cell: &[(f64, f64)], x: f64, y: f64, tol: f64) -> bool {
    let n = cell.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (px, py) = cell[i];
        let (qx, qy) = cell[(i + 1) % n];
        let cross = (qx - px) * (y - py) - (qy - py) * (x - px);
        let scale = (qx - px).hypot(qy - py).max(1e-300);
        if cross / scale < -tol {
            return false;
        }
    }
    true
}

impl PiecewisePoly2D {
    /// Index of a sector containing the exact point, if any.
    pub fn sector_index_exact(&self, pt: &RatPoint) -> Option<usize> {
        self.sectors
            .iter()
            .position(|s| s.cells.iter().any(|c| convex_contains(c, pt)))
    }

    /// Index of a sector containing (x, y) within `tol` of the cell edges
    /// (tolerance measured against unit-normalized edge offsets).
    pub fn sector_index_f64(&self, x: f64, y: f64, tol: f64) -> Option<usize> {
        for (i, s) in self.sectors.iter().enumerate() {
            for cell in &s.cells {
                let c: Vec<(f64, f64)> = cell.iter().map(|p| p.to_f64()).collect();
                if point_in_cell_f64(&c, x, y, tol) {
                    return Some(i);
                }
            }
        }
        None
    }

    /// Evaluates the function; zero outside the support polygon. Points on a
    /// sector wall may evaluate through either side — the kernel is C², so
    /// the two values agree.
    pub fn eval_f64(&self, x: f64, y: f64) -> f64 {
        match self.sector_index_f64(x, y, 1e-12) {
            Some(i) => self.sectors[i].poly.eval_f64(&[x, y]),
            None => 0.0,
        }
    }

    /// Exact value at a rational point (zero outside the support).
    pub fn eval_exact(&self, pt: &RatPoint) -> Rat {
        match self.sector_index_exact(pt) {
            Some(i) => self.sectors[i].poly.eval(&[pt.x.clone(), pt.y.clone()]),
            None => Rat::zero(),
        }
    }

    /// Exact integral of weight·(this) over the support.
    pub fn integrate_against(&self, weight: &QPoly) -> Rat {
        let mut total = Rat::zero();
        for s in &self.sectors {
            let f = weight.mul(&s.poly);
            for cell in &s.cells {
                total += crate::geom::integrate_polynomial(&f, cell);
            }
        }
        total
    }

    /// Total number of convex cells across all sectors.
    pub fn cell_count(&self) -> usize {
        self.sectors.iter().map(|s| s.cells.len()).sum()
    }
}

/// ε-sign of a canonical line at an exact point; cells never have their
/// centroid on a cut line, so the sign is always ±1.
fn line_sign_at(key: &LineKey, pt: &RatPoint) -> i32 {
    let v = rat_of_big(&key.0) * &pt.x + rat_of_big(&key.1) * &pt.y + rat_of_big(&key.2);
    let s = rat_sign(&v);
    assert!(s != 0, "arrangement cell centroid fell on a cut line");
    s
}

/// Carves the support polygon along every cut line and assembles the
/// piecewise polynomial from the ε-expansion weights.
fn assemble_piecewise(
    polygon: &HornPolygon,
    pairs: &BTreeMap<(LineKey, LineKey), QPoly>,
) -> PiecewisePoly2D {
    let mut keys: BTreeSet<LineKey> = BTreeSet::new();
    for (k1, k2) in pairs.keys() {
        keys.insert(k1.clone());
        keys.insert(k2.clone());
    }
    // Split the polygon into arrangement cells.
    let mut cells: Vec<Vec<RatPoint>> = vec![polygon.vertices.clone()];
    for key in &keys {
        let a = rat_of_big(&key.0);
        let b = rat_of_big(&key.1);
        let c = rat_of_big(&key.2);
        let plus = HalfPlane::new(a.clone(), b.clone(), c.clone());
        let minus = HalfPlane::new(-a, -b, -c);
        let mut next = Vec::new();
        for cell in &cells {
            for h in [&plus, &minus] {
                let piece = clip_polygon(cell, h);
                if piece.len() >= 3 && !Zero::is_zero(&polygon_area(&piece)) {
                    next.push(piece);
                }
            }
        }
        cells = next;
    }
    // Evaluate the ε-products on each cell and group equal polynomials.
    let mut groups: Vec<(QPoly, Vec<Vec<RatPoint>>)> = Vec::new();
    for cell in cells {
        let centroid = polygon_centroid(&cell);
        let signs: BTreeMap<&LineKey, i32> =
            keys.iter().map(|k| (k, line_sign_at(k, &centroid))).collect();
        let mut poly = QPoly::zero(&GVARS);
        for ((k1, k2), w) in pairs {
            let s = signs[k1] * signs[k2];
            poly = poly.add(&w.scale(&rat_i64(s as i64)));
        }
        match groups.iter_mut().find(|(p, _)| *p == poly) {
            Some((_, cs)) => cs.push(cell),
            None => groups.push((poly, vec![cell])),
        }
    }
    // Merge each group into a single convex cell when the union is convex.
    let mut sectors: Vec<Sector> = groups
        .into_iter()
        .map(|(poly, cells)| Sector { cells: merge_convex(cells), poly })
        .collect();
    // Deterministic ordering by the centroid of the first cell.
    sectors.sort_by(|a, b| {
        let ca = polygon_centroid(&a.cells[0]);
        let cb = polygon_centroid(&b.cells[0]);
        ca.x.cmp(&cb.x).then_with(|| ca.y.cmp(&cb.y))
    });
    PiecewisePoly2D { sectors, polygon: polygon.clone() }
}

/// Replaces a set of cells by their convex hull when the union is convex
/// (hull area equals the summed cell areas); otherwise keeps the cells.
fn merge_convex(cells: Vec<Vec<RatPoint>>) -> Vec<Vec<RatPoint>> {
    if cells.len() <= 1 {
        return cells;
    }
    let all: Vec<RatPoint> = cells.iter().flatten().cloned().collect();
    let hull = convex_hull(&all);
    if hull.len() >= 3 {
        let hull_area = polygon_area(&hull);
        let sum: Rat = cells.iter().map(|c| polygon_area(c)).sum();
        if hull_area == sum {
            return vec![hull];
        }
    }
    cells
}

/// The exact piecewise-polynomial kernel CJ₃(γ | α, β) on the support
/// polygon, for traceless spectra with distinct entries.
pub fn compute_cj3(alpha: &Spectrum, beta: &Spectrum) -> Result<PiecewisePoly2D> {
    if alpha.n() != 3 || beta.n() != 3 {
        return Err(HornError::InvalidInput("quaternionic 3×3 kernel needs n = 3".into()));
    }
    let av = exact_values(alpha)?;
    let bv = exact_values(beta)?;
    check_distinct_traceless("alpha", &av)?;
    check_distinct_traceless("beta", &bv)?;
    let polygon = horn_polygon(alpha, beta)?;
    if polygon.is_degenerate() {
        return Err(HornError::EmptyPolygon);
    }
    let reduced = reduce_cj3(
        &[av[0].clone(), av[1].clone(), av[2].clone()],
        &[bv[0].clone(), bv[1].clone(), bv[2].clone()],
    )?;
    let pairs = reduced.real_pairs()?;
    Ok(assemble_piecewise(&polygon, &pairs))
}

/// Vandermonde Δ(x) = Π_{i<j} (x_i - x_j) of three exact values.
pub fn vandermonde3(v: &[Rat]) -> Rat {
    (&v[0] - &v[1]) * (&v[0] - &v[2]) * (&v[1] - &v[2])
}

/// Δ(γ) as a polynomial in (γ₁, γ₂) for traceless γ:
/// (γ₁-γ₂)(2γ₁+γ₂)(γ₁+2γ₂).
pub fn vandermonde_gamma_poly() -> QPoly {
    let g1 = QPoly::var(&GVARS, "g1");
    let g2 = QPoly::var(&GVARS, "g2");
    let f1 = g1.sub(&g2);
    let f2 = g1.scale(&rat_i64(2)).add(&g2);
    let f3 = g1.add(&g2.scale(&rat_i64(2)));
    f1.mul(&f2).mul(&f3)
}

/// Exact quaternionic 3×3 spectral density of A + B. Spectra are shifted to
/// traceless internally; `shift` records (tr α + tr β)/3.
#[derive(Clone, Debug)]
pub struct QuatPdf3 {
    pub cj3: PiecewisePoly2D,
    pub alpha: Spectrum,
    pub beta: Spectrum,
    /// 8640 / (Δ³(α)·Δ³(β)), the scalar multiplying Δ(γ)·CJ₃.
    pub prefactor: Rat,
    /// Common trace shift applied to γ before evaluating.
    pub shift: Rat,
}

impl QuatPdf3 {
    pub fn new(alpha: &Spectrum, beta: &Spectrum) -> Result<Self> {
        let av = exact_values(alpha)?;
        let bv = exact_values(beta)?;
        let asum: Rat = av.iter().cloned().sum();
        let bsum: Rat = bv.iter().cloned().sum();
        let shift = (&asum + &bsum) / rat_i64(3);
        let third_a = asum / rat_i64(3);
        let third_b = bsum / rat_i64(3);
        let a0 = Spectrum::from_rats(av.iter().map(|x| x - &third_a).collect())?;
        let b0 = Spectrum::from_rats(bv.iter().map(|x| x - &third_b).collect())?;
        let cj3 = compute_cj3(&a0, &b0)?;
        let da = vandermonde3(a0.exact.as_ref().unwrap());
        let db = vandermonde3(b0.exact.as_ref().unwrap());
        let prefactor = rat_i64(8640) / (da.pow(3) * db.pow(3));
        Ok(QuatPdf3 { cj3, alpha: alpha.clone(), beta: beta.clone(), prefactor, shift })
    }

    /// Density over one chamber copy (the raw orbital value):
    /// 8640 Δ(γ) CJ₃ / (Δ³α Δ³β) at the traceless representative of γ.
    pub fn density_flat(&self, g1: f64, g2: f64) -> f64 {
        let sh = rat_to_f64(&self.shift);
        let (x, y) = (g1 - sh, g2 - sh);
        let cj = self.cj3.eval_f64(x, y);
        if cj == 0.0 {
            return 0.0;
        }
        let d = vandermonde_gamma_poly().eval_f64(&[x, y]);
        rat_to_f64(&self.prefactor) * d * cj
    }

    /// Density of the *sorted* spectrum γ₁ ≥ γ₂ ≥ γ₃: the 3! chamber copies
    /// fold onto the sorted one.
    pub fn density_sorted(&self, g1: f64, g2: f64) -> f64 {
        6.0 * self.density_flat(g1, g2)
    }

    /// Exact ∫ Δ(γ) CJ₃ dγ₁ dγ₂ over the support polygon.
    pub fn mass_integral_cj3(&self) -> Rat {
        self.cj3.integrate_against(&vandermonde_gamma_poly())
    }

    /// Exact mass of the flat density over one chamber: should be 1/3! .
    pub fn mass_flat(&self) -> Rat {
        self.mass_integral_cj3() * &self.prefactor
    }
}

/// Convenience wrapper: quaternionic 3×3 density of the sorted spectrum γ
/// at a single point. Building [`QuatPdf3`] once and querying it is much
/// cheaper when many evaluations are needed.
pub fn quat_pdf_n3(alpha: &Spectrum, beta: &Spectrum, gamma: &Spectrum) -> Result<f64> {
    if gamma.values.len() != 3 {
        return Err(HornError::InvalidInput("gamma must have three entries".into()));
    }
    let pdf = QuatPdf3::new(alpha, beta)?;
    Ok(pdf.density_sorted(gamma.values[0], gamma.values[1]))
}

/// The even quartic -(α₁²-β₁²)² + 2(α₁²+β₁²)γ₁² - γ₁⁴ of the 2×2 kernel.
fn cj2_quartic(alpha1: &Rat, beta1: &Rat, g: &Rat) -> Rat {
    let a2 = alpha1 * alpha1;
    let b2 = beta1 * beta1;
    let g2 = g * g;
    let q = &a2 - &b2;
    -(&q * &q) + rat_i64(2) * (&a2 + &b2) * &g2 - &g2 * &g2
}

/// CJ₂(γ₁ | α₁, β₁) for traceless 2×2 spectra (α₁, -α₁), (β₁, -β₁): equals
/// ±½·(quartic) on ±I with I = [|α₁-β₁|, α₁+β₁], zero elsewhere.
pub fn cj2_exact(alpha1: &Rat, beta1: &Rat, gamma1: &Rat) -> Result<Rat> {
    if !alpha1.is_positive() || !beta1.is_positive() {
        return Err(HornError::InvalidInput("2×2 spectra need α₁ > 0 and β₁ > 0".into()));
    }
    let lo = (alpha1 - beta1).abs();
    let hi = alpha1 + beta1;
    let g = gamma1.abs();
    if g < lo || g > hi {
        return Ok(Rat::zero());
    }
    let val = cj2_quartic(alpha1, beta1, &g) / rat_i64(2);
    Ok(if gamma1.is_negative() { -val } else { val })
}

/// Exact quaternionic 2×2 density of the sorted spectrum (γ₁, -γ₁), γ₁ ≥ 0:
/// both chamber copies fold onto I, giving 2 · 6 Δ(γ) CJ₂ / (Δ³α Δ³β).
pub fn quat_pdf_n2(alpha1: &Rat, beta1: &Rat, gamma1: &Rat) -> Result<Rat> {
    if gamma1.is_negative() {
        return Ok(Rat::zero());
    }
    let cj2 = cj2_exact(alpha1, beta1, gamma1)?;
    let da3 = (rat_i64(2) * alpha1).pow(3);
    let db3 = (rat_i64(2) * beta1).pow(3);
    Ok(rat_i64(12) * (rat_i64(2) * gamma1) * cj2 / (da3 * db3))
}

/// Exact mass of the sorted 2×2 density over I = [|α₁-β₁|, α₁+β₁]; equals 1.
pub fn quat_pdf_n2_mass(alpha1: &Rat, beta1: &Rat) -> Result<Rat> {
    if !alpha1.is_positive() || !beta1.is_positive() {
        return Err(HornError::InvalidInput("2×2 spectra need α₁ > 0 and β₁ > 0".into()));
    }
    let lo = (alpha1 - beta1).abs();
    let hi = alpha1 + beta1;
    // density = 3γ/(8α³β³) · ½(-(Q²) + 2Sγ² - γ⁴), Q = α²-β², S = α²+β²;
    // antiderivative of γ·(…): -Q²γ²/2 + Sγ⁴/2 - γ⁶/6.
    let a2 = alpha1 * alpha1;
    let b2 = beta1 * beta1;
    let q2 = (&a2 - &b2).pow(2);
    let s = &a2 + &b2;
    let anti = |g: &Rat| -> Rat {
        let g2 = g * g;
        -&q2 * &g2 / rat_i64(2) + &s * &g2 * &g2 / rat_i64(2) - g2.pow(3) / rat_i64(6)
    };
    let coef = rat_frac(3, 16) / (alpha1.pow(3) * beta1.pow(3));
    Ok(coef * (anti(&hi) - anti(&lo)))
}

/// One-dimensional reduction of the 2×2 orbital sum (four S₂×S₂ terms with a
/// single Dirichlet kernel u₁^{-5}); cross-checks the closed form above.
pub fn reduce_cj2(alpha1: &Rat, beta1: &Rat) -> Result<Reduced> {
    let mut acc = Reduced::default();
    // f₂ = 1 - τ₁₂/2 with τ₁₂ = i u₁ d on the numeric side.
    let f2 = |d: Rat| -> CPoly {
        let tau = CPoly::monomial(&UVARS, &[1, 0, 0, 0], CRat::new(Rat::zero(), d));
        CPoly::one(&UVARS).sub(&tau.scale(&CRat::real(rat_frac(1, 2))))
    };
    // γ side: τ₁₂ = -i u₁ (γ₁ - γ₂) = -i u₁ · 2g₁.
    let fg = {
        let tau = CPoly::monomial(&UVARS, &[1, 0, 1, 0], CRat::new(Rat::zero(), rat_i64(-2)));
        CPoly::one(&UVARS).sub(&tau.scale(&CRat::real(rat_frac(1, 2))))
    };
    for (pa, sa) in [(1i64, 1i64), (-1, -1)] {
        let fa = f2(rat_i64(2 * pa) * alpha1);
        for (pb, sb) in [(1i64, 1i64), (-1, -1)] {
            let fb = f2(rat_i64(2 * pb) * beta1);
            let f = fa.mul(&fb).mul(&fg);
            let sign = CRat::real(rat_i64(sa * sb));
            // A₁ = α_{P(1)} + β_{P'(1)} - γ₁.
            let c = rat_i64(pa) * alpha1 + rat_i64(pb) * beta1;
            let a1 = LinForm::new(-Rat::one(), Rat::zero(), c);
            for ((d1, d2), gpoly) in group_by_u(&f) {
                assert_eq!(d2, 0, "2×2 reduction has a single u variable");
                emit_1d(&mut acc, d1 as i64 - 5, &a1, &gpoly.scale(&sign));
            }
        }
    }
    acc.prune();
    acc.check_no_residue()?;
    // Prefactor 2!/(i·π) = -2i/π; the π is absorbed by the Dirichlet kernel.
    acc.scale(&CRat::new(Rat::zero(), rat_i64(-2)));
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(vals: [i64; 3]) -> Spectrum {
        Spectrum::from_rats(vals.iter().map(|&v| rat_i64(v)).collect()).unwrap()
    }

    fn favorite() -> (Spectrum, Spectrum) {
        (spec([1, 0, -1]), spec([1, 0, -1]))
    }

    /// Interior representatives of the four chambers (γ₁ ≥ 1 & γ₂ ≥ 0;
    /// γ₂ ≤ 0 & γ₁+γ₂ ≥ 1; γ₂ ≤ 0 & γ₁+γ₂ ≤ 1; γ₁ ≤ 1 & γ₂ ≥ 0).
    fn chamber_reps() -> [(Rat, Rat); 4] {
        [
            (rat_frac(3, 2), rat_frac(1, 4)),
            (rat_frac(3, 2), rat_frac(-1, 4)),
            (rat_frac(3, 4), rat_frac(-1, 5)),
            (rat_frac(3, 5), rat_frac(2, 5)),
        ]
    }

    #[test]
    fn cj3_favorite_has_four_sectors() {
        let (a, b) = favorite();
        let pw = compute_cj3(&a, &b).unwrap();
        assert_eq!(pw.sectors.len(), 4, "expected the four-chamber structure");
        assert_eq!(pw.cell_count(), 4, "every sector should merge to one convex cell");
        let mut seen = BTreeSet::new();
        for (x, y) in chamber_reps() {
            seen.insert(pw.sector_index_exact(&RatPoint::new(x, y)).unwrap());
        }
        assert_eq!(seen.len(), 4, "the four representatives hit distinct sectors");
    }

    #[test]
    fn cj3_favorite_mass_is_one_over_810() {
        let (a, b) = favorite();
        let pw = compute_cj3(&a, &b).unwrap();
        let mass = pw.integrate_against(&vandermonde_gamma_poly());
        assert_eq!(mass, rat_frac(1, 810));
    }

    #[test]
    fn cj3_sector_polynomials_factor_through_edge_cubes() {
        let (a, b) = favorite();
        let pw = compute_cj3(&a, &b).unwrap();
        let g1 = QPoly::var(&GVARS, "g1");
        let g2 = QPoly::var(&GVARS, "g2");
        let two = QPoly::constant(&GVARS, rat_i64(2));
        // Outer-edge linear factor per chamber: 2-γ₁-γ₂, 2-γ₁, γ₁+2γ₂, γ₁-γ₂.
        let edges = [
            two.sub(&g1).sub(&g2),
            two.sub(&g1),
            g1.add(&g2.scale(&rat_i64(2))),
            g1.sub(&g2),
        ];
        // The normalization fixed by ∫ Δ(γ)·CJ₃ = 1/810 factors each sector
        // as -(2·6!/13!) · edge³ · p̃ with p̃ = 40γ₁¹⁰ + … .
        let fact13 = Rat::from_integer(factorial(13));
        let scale = -rat_i64(1440) / fact13;
        for (edge, (x, y)) in edges.iter().zip(chamber_reps()) {
            let idx = pw.sector_index_exact(&RatPoint::new(x, y)).unwrap();
            let poly = &pw.sectors[idx].poly;
            assert_eq!(poly.total_degree(), 13);
            let ptilde = poly
                .scale(&(Rat::one() / scale.clone()))
                .try_div_exact(&edge.pow(3))
                .expect("edge cube must divide the sector polynomial");
            assert_eq!(ptilde.total_degree(), 10);
            assert_eq!(ptilde.coeff(&[10, 0]), rat_i64(40));
        }
    }

    #[test]
    fn cj3_favorite_cofactor_symmetries() {
        // p̃₄ is symmetric under γ₁ ↔ γ₂; p̃₃ under γ₂ ↔ γ₃ = -γ₁-γ₂.
        let (a, b) = favorite();
        let pw = compute_cj3(&a, &b).unwrap();
        let g1 = QPoly::var(&GVARS, "g1");
        let g2 = QPoly::var(&GVARS, "g2");
        let fact13 = Rat::from_integer(factorial(13));
        let scale = -rat_i64(1440) / fact13;
        let reps = chamber_reps();
        let cofactor = |rep: &(Rat, Rat), edge: &QPoly| -> QPoly {
            let idx = pw.sector_index_exact(&RatPoint::new(rep.0.clone(), rep.1.clone())).unwrap();
            pw.sectors[idx]
                .poly
                .scale(&(Rat::one() / scale.clone()))
                .try_div_exact(&edge.pow(3))
                .unwrap()
        };
        let p4 = cofactor(&reps[3], &g1.sub(&g2));
        // γ₁ ↔ γ₂ swap.
        let swapped = {
            let mut q = QPoly::zero(&GVARS);
            for (e, c) in &p4.terms {
                q = q.add(&QPoly::monomial(&GVARS, &[e[1], e[0]], c.clone()));
            }
            q
        };
        assert_eq!(p4, swapped);
        let p3 = cofactor(&reps[2], &g1.add(&g2.scale(&rat_i64(2))));
        // γ₂ ↦ -γ₁-γ₂ substitution.
        let m_g1_m_g2 = g1.neg().sub(&g2);
        let subbed = p3.subst(1, &m_g1_m_g2);
        assert_eq!(p3, subbed);
    }

    #[test]
    fn cj3_favorite_transitions_vanish_cubically() {
        let (a, b) = favorite();
        let pw = compute_cj3(&a, &b).unwrap();
        let polys: Vec<QPoly> = chamber_reps()
            .iter()
            .map(|(x, y)| {
                let idx = pw.sector_index_exact(&RatPoint::new(x.clone(), y.clone())).unwrap();
                pw.sectors[idx].poly.clone()
            })
            .collect();
        let g1 = QPoly::var(&GVARS, "g1");
        let g2 = QPoly::var(&GVARS, "g2");
        let one = QPoly::one(&GVARS);
        // Interior walls between adjacent chambers.
        let walls = [
            (0usize, 1usize, g2.clone()),      // γ₂ = 0
            (1, 2, one.sub(&g1).sub(&g2)),     // γ₁ + γ₂ = 1
            (2, 3, g2.clone()),                // γ₂ = 0
            (3, 0, one.sub(&g1)),              // γ₁ = 1
        ];
        for (i, j, wall) in walls {
            let diff = polys[i].sub(&polys[j]);
            assert!(!diff.is_zero(), "adjacent chambers carry distinct polynomials");
            let q = diff.try_div_exact(&wall.pow(3));
            assert!(q.is_some(), "difference across wall {i}->{j} must vanish cubically");
            assert_eq!(q.unwrap().total_degree(), 10);
        }
    }

    #[test]
    fn cj3_vanishes_cubically_on_outer_boundary() {
        let (a, b) = favorite();
        let pw = compute_cj3(&a, &b).unwrap();
        // Exact: value, gradient and Hessian vanish at the midpoint of the
        // outer edge γ₁+γ₂ = 2 of chamber 1.
        let idx = pw
            .sector_index_exact(&RatPoint::new(rat_frac(3, 2), rat_frac(1, 4)))
            .unwrap();
        let poly = &pw.sectors[idx].poly;
        let mid = [rat_frac(3, 2), rat_frac(1, 2)];
        assert!(Zero::is_zero(&poly.eval(&mid)));
        let dx = poly.derivative(0);
        let dy = poly.derivative(1);
        assert!(Zero::is_zero(&dx.eval(&mid)));
        assert!(Zero::is_zero(&dy.eval(&mid)));
        for second in [dx.derivative(0), dx.derivative(1), dy.derivative(1)] {
            assert!(Zero::is_zero(&second.eval(&mid)));
        }
        // Numeric smoke test of the cubic rate along the inward normal.
        let pt = |t: f64| (1.5 - t / 2f64.sqrt(), 0.5 - t / 2f64.sqrt());
        let (x1, y1) = pt(1e-2);
        let (x2, y2) = pt(5e-3);
        let v1 = pw.eval_f64(x1, y1);
        let v2 = pw.eval_f64(x2, y2);
        assert!(v1 > 0.0 && v2 > 0.0);
        let rate = (v1 / v2).ln() / 2f64.ln();
        assert!((rate - 3.0).abs() < 0.1, "boundary vanishing rate {rate} ≠ 3");
    }

    #[test]
    fn cj3_symmetric_under_alpha_beta_swap() {
        let a = spec([2, 1, -3]);
        let b = spec([3, -1, -2]);
        let pw_ab = compute_cj3(&a, &b).unwrap();
        let pw_ba = compute_cj3(&b, &a).unwrap();
        let pts = [
            (rat_frac(1, 2), rat_frac(1, 5)),
            (rat_frac(3, 2), rat_frac(-1, 3)),
            (rat_frac(5, 2), rat_frac(1, 7)),
            (rat_frac(2, 1), rat_frac(-1, 2)),
            (rat_frac(4, 1), rat_frac(1, 3)),
        ];
        for (x, y) in pts {
            let p = RatPoint::new(x, y);
            assert_eq!(pw_ab.eval_exact(&p), pw_ba.eval_exact(&p));
        }
    }

    #[test]
    fn cj3_rejects_repeated_spectra() {
        let a = Spectrum::from_rats(vec![rat_i64(1), rat_i64(1), rat_i64(-2)]).unwrap();
        let b = spec([1, 0, -1]);
        match compute_cj3(&a, &b) {
            Err(HornError::RepeatedSpectrum(_)) => {}
            other => panic!("expected RepeatedSpectrum, got {other:?}"),
        }
    }

    #[test]
    fn single_permutation_term_is_complex() {
        // One permutation pair alone reduces cleanly (the numerator degree
        // caps at 9, so no δ-residues can arise), but its ε-weights carry a
        // nonzero imaginary part: only the alternating S₃×S₃ sum is real.
        let alpha = [rat_i64(1), rat_i64(0), rat_i64(-1)];
        let mut acc = Reduced::default();
        let fa = f3_numeric(&alpha, [0, 1, 2]);
        let f = fa.mul(&fa).mul(&f3_gamma());
        let a1 = LinForm::new(-Rat::one(), Rat::zero(), rat_i64(2));
        let a2 = LinForm::new(-Rat::one(), -Rat::one(), rat_i64(2));
        for ((d1, d2), gpoly) in group_by_u(&f) {
            dirichlet_reduce(&mut acc, d1 as i64 - 5, d2 as i64 - 5, 5, &a1, &a2, &gpoly);
        }
        acc.prune();
        acc.check_no_residue().expect("single terms stay principal-value finite");
        assert!(
            acc.pairs.values().any(|v| !v.imag_part().is_zero()),
            "a lone permutation term should not be real on its own"
        );
        // Spot-check the reduction identity 1/(u₂ w) = 1/(u₁u₂) - 1/(u₁w)
        // through the emitted buckets: e₁ = 0, e₂ = -1, c = 1.
        let mut spot = Reduced::default();
        let coef = CPoly::one(&GVARS);
        dirichlet_reduce(&mut spot, 0, -1, 1, &a1, &a2, &coef);
        spot.prune();
        // Both routes are single Dirichlet pairs: (A₁, A₂) and (A₁-A₂, A₂).
        assert_eq!(spot.pairs.len(), 2);
        assert!(spot.deltas.is_empty());
    }

    #[test]
    fn cj2_reduction_matches_closed_form() {
        let a1 = rat_i64(1);
        let b1 = rat_i64(2);
        let red = reduce_cj2(&a1, &b1).unwrap();
        let singles = red.real_singles().unwrap();
        // Closed form: ¼(quartic in g₁) · [ε(g-α+β) + ε(g+α-β) - ε(g-α-β)
        // - ε(g+α+β)] with g = γ₁.
        let g = QPoly::var(&GVARS, "g1");
        let quartic = {
            let a2 = &a1 * &a1;
            let b2 = &b1 * &b1;
            let q = &a2 - &b2;
            let c0 = QPoly::constant(&GVARS, -(&q * &q) / rat_i64(4));
            let c2 = g.pow(2).scale(&((&a2 + &b2) / rat_i64(2)));
            let c4 = g.pow(4).scale(&rat_frac(-1, 4));
            c0.add(&c2).add(&c4)
        };
        let mut expected: BTreeMap<LineKey, QPoly> = BTreeMap::new();
        let forms = [
            (LinForm::new(Rat::one(), Rat::zero(), &b1 - &a1), Rat::one()),
            (LinForm::new(Rat::one(), Rat::zero(), &a1 - &b1), Rat::one()),
            (LinForm::new(Rat::one(), Rat::zero(), -(&a1 + &b1)), -Rat::one()),
            (LinForm::new(Rat::one(), Rat::zero(), &a1 + &b1), -Rat::one()),
        ];
        for (form, w) in forms {
            let (key, _, sigma) = form.canon();
            let add = quartic.scale(&(w * rat_i64(sigma as i64)));
            match expected.get_mut(&key) {
                Some(e) => *e = e.add(&add),
                None => {
                    expected.insert(key, add);
                }
            }
        }
        expected.retain(|_, v| !v.is_zero());
        assert_eq!(singles, expected);
    }

    #[test]
    fn cj2_closed_form_values() {
        // CJ₂(1 | 1, 1) = 3/2; sorted densities integrate to one.
        let one = rat_i64(1);
        assert_eq!(cj2_exact(&one, &one, &one).unwrap(), rat_frac(3, 2));
        assert_eq!(quat_pdf_n2_mass(&one, &one).unwrap(), Rat::one());
        let a = rat_frac(3, 2);
        let b = rat_frac(7, 3);
        assert_eq!(quat_pdf_n2_mass(&a, &b).unwrap(), Rat::one());
        // Density vanishes at the support endpoints and outside.
        assert!(Zero::is_zero(&quat_pdf_n2(&a, &b, &(&a + &b)).unwrap()));
        assert!(Zero::is_zero(&quat_pdf_n2(&a, &b, &(&b - &a)).unwrap()));
        assert!(Zero::is_zero(&quat_pdf_n2(&a, &b, &rat_i64(10)).unwrap()));
        assert!(quat_pdf_n2(&a, &b, &rat_i64(3)).unwrap().is_positive());
    }

    #[test]
    fn quat_pdf3_mass_is_one_sixth_flat() {
        let (a, b) = favorite();
        let pdf = QuatPdf3::new(&a, &b).unwrap();
        assert_eq!(pdf.mass_flat(), rat_frac(1, 6));
    }

    #[test]
    fn quat_pdf3_handles_trace_shift() {
        let a0 = spec([1, 0, -1]);
        let b0 = spec([1, 0, -1]);
        let a1 = spec([2, 1, 0]);
        let b1 = spec([3, 2, 1]);
        let p0 = QuatPdf3::new(&a0, &b0).unwrap();
        let p1 = QuatPdf3::new(&a1, &b1).unwrap();
        assert_eq!(p1.shift, rat_i64(3));
        for (x, y) in [(1.5, 0.2), (0.7, -0.1), (1.2, 0.4)] {
            let v0 = p0.density_sorted(x, y);
            let v1 = p1.density_sorted(x + 3.0, y + 3.0);
            assert!((v0 - v1).abs() <= 1e-12 * v0.abs().max(1.0));
        }
    }

    #[test]
    fn cj3_asymmetric_case_is_consistent() {
        let a = spec([2, 1, -3]);
        let b = spec([3, -1, -2]);
        let pdf = QuatPdf3::new(&a, &b).unwrap();
        assert_eq!(pdf.mass_flat(), rat_frac(1, 6));
        let pw = &pdf.cj3;
        for v in &pw.polygon.vertices {
            assert!(
                Zero::is_zero(&pw.eval_exact(v)),
                "kernel must vanish at polygon vertices"
            );
        }
        let c = polygon_centroid(&pw.polygon.vertices);
        assert!(pw.eval_exact(&c).is_positive());
    }

    #[test]
    fn linform_canon_folds_scale_and_sign() {
        let f = LinForm::new(rat_frac(-2, 3), rat_frac(4, 3), rat_i64(2));
        let (key, lambda, sigma) = f.canon();
        assert_eq!(key, (BigInt::from(1), BigInt::from(-2), BigInt::from(-3)));
        assert_eq!(sigma, -1);
        assert_eq!(lambda, rat_frac(2, 3));
    }
}
