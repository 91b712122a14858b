//! Real-symmetric (β̲ = 1) density of the characteristic-polynomial data
//! (p, q) for C = A + B with fixed traceless 3×3 spectra α and β.
//!
//! Writing the characteristic polynomial of C as z³ + p z + q, conditioning
//! the SO(3) orbit integral on (p, q) leaves two quadratics in c = cos θ,
//!
//! ```text
//!   P_p(c) = p₂ c² + κ_p S c + p₀,    Q_q(c) = q₂ c² + κ_q S c + q₀,
//! ```
//!
//! whose coefficients are bilinear in the squared Euler cosines u = cos²φ,
//! z = cos²ψ, with S = cos φ cos ψ sin φ sin ψ. The pair has a common c-root
//! exactly on the vanishing set of the resultant surface R(u, z; p, q), and
//! the density reduces to a one-dimensional integral
//!
//! ```text
//!   ρ(p,q) = 1/(2π²) ∫₀¹ dz Σᵢ |B̃(uᵢ,z)| / |R'_u(uᵢ,z)| ,
//! ```
//!
//! summed over the roots uᵢ ∈ [0,1] of R(·, z). The module builds the exact
//! integer-coefficient surface once per spectrum pair, isolates the critical
//! z where the root pattern changes (roots of the u-discriminant of R),
//! classifies the six interior regions by their per-interval root counts,
//! integrates ρ with square-root endpoint substitutions, and provides the
//! closed-form divergence models along the singular loci (interior frozen
//! lines, the q → 0 axis, and the three domain corners in the spin-1 case).

use crate::domain::{self, PQDomain};
use crate::error::{HornError, Result};
use crate::multipoly::QPoly;
use crate::quadrature::{gauss_kronrod, integrate_piecewise_sqrt, integrate_sqrt_endpoints};
use crate::rat::{rat_to_f64, Rat};
use crate::spectrum::Spectrum;
use crate::unipoly::{RootCluster, UniPolyNumeric, TAU_CLUSTER, TAU_ROOT, TAU_TRIM};
use num_complex::Complex64;
use num_traits::{One, Zero};
use rayon::prelude::*;
use std::cell::RefCell;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;

/// Variables of every exact polynomial in this module, in storage order.
pub const SURFACE_VARS: [&str; 4] = ["u", "z", "p", "q"];

/// Flag radius: a point within this distance of a singular locus segment is
/// reported as near-singular (the quadrature value is still returned).
pub const TAU_SING: f64 = 1e-4;

/// Relative threshold on |R'_u| below which a root is treated as critical.
const TAU_DENOM_REL: f64 = 1e-11;

/// Distance (in z) to the nearest critical z within which a tiny |R'_u| is
/// attributed to the known merging pair instead of raising an error.
const GUARD_Z: f64 = 1e-3;

/// Absolute quadrature tolerance per support interval of the z-integral.
const PHI_QUAD_TOL: f64 = 1e-8;

/// Distance kept between a quadrature interval and a pair transition at its
/// edge: within ~1e-12 of the transition the near-double u-roots are
/// noise-dominated and φ turns erratic, so the quadrature stops a pad short
/// and the pad's mass is restored from the local square-root model.
const SHRINK_PAD: f64 = 1e-8;

/// Base probe offset for deciding whether a merging pair is real and inside
/// the unit interval at a critical z.
const PROBE_DELTA: f64 = 1e-6;

/// Two u-roots closer than this are folded into one vertex-model pair when φ
/// is assembled. Below the threshold the individually-located roots carry
/// O(gap⁻¹)-amplified rounding noise, while the vertex model's error is
/// O(gap²); at 1e-3 both effects stay below 1e-6 relative.
const TIGHT_PAIR_GAP: f64 = 1e-3;

/// One φ evaluation, split for the pad model: the full sum, the largest
/// single-pair contribution, and whether that pair's |R(v)| had to be floored
/// at the rounding noise (making the value a saturation estimate, not a
/// measurement).
#[derive(Clone, Copy, Debug, Default)]
struct PhiParts {
    total: f64,
    pair: f64,
    pair_floored: bool,
}

// ---------------------------------------------------------------------------
// Exact layer: coefficient quadratics and the resultant surface
// ---------------------------------------------------------------------------

/// Coefficients of the two conditioning quadratics in c = cos θ.
///
/// All four coefficient polynomials live in the variables
/// `["u","z","p","q"]`; `p0` carries the term −p and `q0` the term −q, so
/// that P_p and Q_q vanish exactly at admissible Euler data. The cross
/// coefficients are κ_p·S and κ_q·S with constant κ's.
#[derive(Clone, Debug)]
pub struct CharQuadratics {
    pub p0: QPoly,
    pub p2: QPoly,
    pub q0: QPoly,
    pub q2: QPoly,
    pub kappa_p: Rat,
    pub kappa_q: Rat,
}

fn exact_pair(spec: &Spectrum) -> Result<(Rat, Rat)> {
    let t = spec.traceless();
    let ex = t.exact.as_ref().ok_or_else(|| {
        HornError::InvalidInput("symbolic pipeline requires exact rational spectra".into())
    })?;
    if ex.len() != 3 {
        return Err(HornError::InvalidInput(format!(
            "expected 3 eigenvalues, got {}",
            ex.len()
        )));
    }
    Ok((ex[0].clone(), ex[1].clone()))
}

fn bilinear(c00: Rat, cu: Rat, cz: Rat, cuz: Rat) -> QPoly {
    let v = &SURFACE_VARS;
    QPoly::monomial(v, &[0, 0, 0, 0], c00)
        .add(&QPoly::monomial(v, &[1, 0, 0, 0], cu))
        .add(&QPoly::monomial(v, &[0, 1, 0, 0], cz))
        .add(&QPoly::monomial(v, &[1, 1, 0, 0], cuz))
}

/// Build the exact conditioning quadratics for a spectrum pair (shifted to
/// zero trace internally). Errors on inexact or repeated spectra.
pub fn build_char_quadratics(alpha: &Spectrum, beta: &Spectrum) -> Result<CharQuadratics> {
    if alpha.has_repeats() || beta.has_repeats() {
        return Err(HornError::RepeatedSpectrum(
            "conditioning quadratics need simple spectra".into(),
        ));
    }
    let (a1, a2) = exact_pair(alpha)?;
    let (b1, b2) = exact_pair(beta)?;
    let two = Rat::from_integer(2.into());

    let da = &a1 - &a2; // α₁ − α₂
    let db = &b1 - &b2; // β₁ − β₂
    let sa21 = &(&two * &a1) + &a2; // 2α₁ + α₂
    let sa12 = &a1 + &(&two * &a2); // α₁ + 2α₂
    let sb21 = &(&two * &b1) + &b2; // 2β₁ + β₂
    let sb12 = &b1 + &(&two * &b2); // β₁ + 2β₂
    let sig = &(&a1 + &a2) + &(&b1 + &b2); // α₁+α₂+β₁+β₂

    // P_p = p₂ c² + κ_p S c + p₀ with the −p absorbed into p₀.
    let p0_c = &(&(&(-(&a1 * &a1)) - &(&a1 * &a2)) - &(&a2 * &a2))
        - &(&(&(&b1 * &b1) + &(&b1 * &b2)) + &(&b2 * &b2));
    let p0_c = &p0_c + &(&a1 * &(&b2 - &b1));
    let p0_c = &p0_c + &(&a2 * &(&b1 + &(&two * &b2)));
    let p0 = bilinear(
        p0_c,
        &da * &(&b2 + &(&two * &b1)),
        &sa21 * &db,
        -(&da * &db),
    )
    .add(&QPoly::monomial(&SURFACE_VARS, &[0, 0, 1, 0], -Rat::one()));

    let p2 = bilinear(
        -(&sa12 * &sb12),
        -(&da * &sb12),
        -(&sa12 * &db),
        -(&da * &db),
    );
    let kappa_p = &two * &(&da * &db);

    // Q_q = q₂ c² + κ_q S c + q₀ with the −q absorbed into q₀.
    let f_ab = &(&a1 + &a2) - &b2; // α₁+α₂−β₂
    let g_ab = &a2 - &(&b1 + &b2); // α₂−β₁−β₂
    let q0 = bilinear(
        &(&(&a1 + &b1) * &f_ab) * &g_ab,
        &(&da * &f_ab) * &sb21,
        -(&(&sa21 * &g_ab) * &db),
        -(&(&da * &db) * &sig),
    )
    .add(&QPoly::monomial(&SURFACE_VARS, &[0, 0, 0, 1], -Rat::one()));

    let h_ab = &(&a1 + &a2) - &b1; // α₁+α₂−β₁
    let k_ab = &a1 - &(&b1 + &b2); // α₁−β₁−β₂
    let q2 = bilinear(
        &(&sa12 * &(&a1 + &b1)) * &sb12,
        -(&(&da * &h_ab) * &sb12),
        &(&sa12 * &k_ab) * &db,
        -(&(&da * &db) * &sig),
    );
    let kappa_q = &(&two * &(&da * &db)) * &sig;

    Ok(CharQuadratics {
        p0,
        p2,
        q0,
        q2,
        kappa_p,
        kappa_q,
    })
}

impl CharQuadratics {
    /// Substitute numeric (p, q); the result stays in the same variable set
    /// with zero exponents on p and q.
    pub fn at(&self, p: f64, q: f64) -> CharQuadratics {
        let pr = Rat::from_float(p).unwrap_or_else(Rat::zero);
        let qr = Rat::from_float(q).unwrap_or_else(Rat::zero);
        CharQuadratics {
            p0: self.p0.subst_const(2, &pr).subst_const(3, &qr),
            p2: self.p2.clone(),
            q0: self.q0.subst_const(2, &pr).subst_const(3, &qr),
            q2: self.q2.clone(),
            kappa_p: self.kappa_p.clone(),
            kappa_q: self.kappa_q.clone(),
        }
    }
}

/// The exact resultant surface R(u,z;p,q) together with the slope numerator
/// B̃ and the discriminant Δ_Q of the conditioning quadratic Q_q.
#[derive(Clone, Debug)]
pub struct ResultantSurface {
    pub quads: CharQuadratics,
    /// Res_c(P_p, Q_q) with S² folded to u z (1−u)(1−z).
    pub r: QPoly,
    /// B̃ = κ_p q₂ − κ_q p₂ (u,z only); |S|·|B̃| is the δ(R) prefactor.
    pub b_tilde: QPoly,
    /// Δ_Q = κ_q² S² − 4 q₀ q₂ (u, z, q).
    pub delta_q: QPoly,
}

fn s_squared() -> QPoly {
    // u z (1−u)(1−z) = uz − u²z − uz² + u²z²
    let v = &SURFACE_VARS;
    QPoly::monomial(v, &[1, 1, 0, 0], Rat::one())
        .add(&QPoly::monomial(v, &[2, 1, 0, 0], -Rat::one()))
        .add(&QPoly::monomial(v, &[1, 2, 0, 0], -Rat::one()))
        .add(&QPoly::monomial(v, &[2, 2, 0, 0], Rat::one()))
}

/// Build the exact surface for a spectrum pair. The resultant of the two
/// quadratics is taken in closed form,
/// R = (p₂q₀ − p₀q₂)² − S² (p₂κ_q − κ_p q₂)(κ_p q₀ − p₀κ_q),
/// which is even in S, so S² folds exactly to u z (1−u)(1−z).
pub fn resultant_surface(alpha: &Spectrum, beta: &Spectrum) -> Result<ResultantSurface> {
    let quads = build_char_quadratics(alpha, beta)?;
    let s2 = s_squared();
    let m = quads.p2.mul(&quads.q0).sub(&quads.p0.mul(&quads.q2));
    let f1 = quads
        .p2
        .scale(&quads.kappa_q)
        .sub(&quads.q2.scale(&quads.kappa_p));
    let f2 = quads
        .q0
        .scale(&quads.kappa_p)
        .sub(&quads.p0.scale(&quads.kappa_q));
    let r = m.mul(&m).sub(&s2.mul(&f1.mul(&f2)));
    let b_tilde = quads
        .q2
        .scale(&quads.kappa_p)
        .sub(&quads.p2.scale(&quads.kappa_q));
    let kq2 = &quads.kappa_q * &quads.kappa_q;
    let four = Rat::from_integer(4.into());
    let delta_q = s2.scale(&kq2).sub(&quads.q0.mul(&quads.q2).scale(&four));
    Ok(ResultantSurface {
        quads,
        r,
        b_tilde,
        delta_q,
    })
}

// ---------------------------------------------------------------------------
// Fast numeric layer: coefficient tensors and per-(p,q) slices
// ---------------------------------------------------------------------------

/// Dense f64 coefficient tensor of an exact polynomial in (u, z, p, q).
#[derive(Clone, Debug)]
struct PolyTensor {
    du: usize,
    dz: usize,
    dp: usize,
    dq: usize,
    c: Vec<f64>,
}

impl PolyTensor {
    fn new(f: &QPoly) -> Self {
        let du = f.deg_in(0) as usize;
        let dz = f.deg_in(1) as usize;
        let dp = f.deg_in(2) as usize;
        let dq = f.deg_in(3) as usize;
        let mut c = vec![0.0; (du + 1) * (dz + 1) * (dp + 1) * (dq + 1)];
        for (exp, v) in f.f64_terms() {
            let (iu, iz, ip, iq) = (
                exp[0] as usize,
                exp[1] as usize,
                exp[2] as usize,
                exp[3] as usize,
            );
            c[((iu * (dz + 1) + iz) * (dp + 1) + ip) * (dq + 1) + iq] = v;
        }
        PolyTensor { du, dz, dp, dq, c }
    }

    /// Collapse the (p,q) axes at a numeric point.
    fn collapse(&self, p: f64, q: f64) -> UvMat {
        let mut pows_p = vec![1.0; self.dp + 1];
        for i in 1..=self.dp {
            pows_p[i] = pows_p[i - 1] * p;
        }
        let mut pows_q = vec![1.0; self.dq + 1];
        for i in 1..=self.dq {
            pows_q[i] = pows_q[i - 1] * q;
        }
        let mut m = vec![0.0; (self.du + 1) * (self.dz + 1)];
        let (np, nq) = (self.dp + 1, self.dq + 1);
        for iu in 0..=self.du {
            for iz in 0..=self.dz {
                let base = ((iu * (self.dz + 1) + iz) * np) * nq;
                let mut acc = 0.0;
                for ip in 0..np {
                    let mut row = 0.0;
                    for iq in 0..nq {
                        row += self.c[base + ip * nq + iq] * pows_q[iq];
                    }
                    acc += row * pows_p[ip];
                }
                m[iu * (self.dz + 1) + iz] = acc;
            }
        }
        UvMat {
            du: self.du,
            dz: self.dz,
            c: m,
        }
    }
}

/// Error-free sum: s + e == a + b exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Error-free product via Dekker splitting: p + e == a·b exactly.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    const SPLIT: f64 = 134_217_729.0; // 2²⁷ + 1
    let p = a * b;
    let ca = SPLIT * a;
    let ah = ca - (ca - a);
    let al = a - ah;
    let cb = SPLIT * b;
    let bh = cb - (cb - b);
    let bl = b - bh;
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

/// One double-double Horner step: (hi, lo) ← (hi, lo)·x + c, carrying the
/// rounding residue so the final value is accurate to O(ε²) of the scale.
#[inline]
fn dd_step(hi: f64, lo: f64, x: f64, c: f64) -> (f64, f64) {
    let (p, pe) = two_prod(hi, x);
    let lo_x = lo * x + pe;
    let (s, se) = two_sum(p, c);
    let l = lo_x + se;
    let t = s + l;
    (t, l - (t - s))
}

/// f64 coefficient matrix of a bivariate polynomial in (u, z).
#[derive(Clone, Debug)]
struct UvMat {
    du: usize,
    dz: usize,
    c: Vec<f64>,
}

impl UvMat {
    #[inline]
    fn at(&self, iu: usize, iz: usize) -> f64 {
        self.c[iu * (self.dz + 1) + iz]
    }

    /// Coefficients in u (ascending) at fixed z, by Horner on each row.
    fn u_coeffs(&self, z: f64) -> Vec<f64> {
        (0..=self.du)
            .map(|iu| {
                let mut acc = 0.0;
                for iz in (0..=self.dz).rev() {
                    acc = acc * z + self.at(iu, iz);
                }
                acc
            })
            .collect()
    }

    /// Row of z-coefficients (requires du == 0).
    fn z_coeffs(&self) -> Vec<f64> {
        debug_assert_eq!(self.du, 0);
        self.c.clone()
    }

    fn eval(&self, u: f64, z: f64) -> f64 {
        let co = self.u_coeffs(z);
        let mut acc = 0.0;
        for v in co.iter().rev() {
            acc = acc * u + v;
        }
        acc
    }

    /// Compensated (double-double) evaluation, for residuals that sit far
    /// below the plain-Horner noise floor — e.g. R at a pair's vertex, where
    /// |R| ≈ |R″|·gap² can be ~1e-20 of the coefficient scale and still
    /// carries all the information about the pair's width.
    fn eval_dd(&self, u: f64, z: f64) -> f64 {
        let mut acc_h = 0.0;
        let mut acc_l = 0.0;
        for iu in (0..=self.du).rev() {
            let mut ch = 0.0;
            let mut cl = 0.0;
            for iz in (0..=self.dz).rev() {
                let (h, l) = dd_step(ch, cl, z, self.at(iu, iz));
                ch = h;
                cl = l;
            }
            let (p, pe) = two_prod(acc_h, u);
            let lo_x = acc_l * u + pe;
            let (s, se) = two_sum(p, ch);
            let l = lo_x + se + cl;
            let t = s + l;
            acc_l = l - (t - s);
            acc_h = t;
        }
        acc_h + acc_l
    }

    /// Scale Σ |c_ij| |u|^i |z|^j for relative thresholds.
    fn eval_scale(&self, u: f64, z: f64) -> f64 {
        let ua = u.abs();
        let za = z.abs();
        let mut acc = 0.0;
        let mut pu = 1.0;
        for iu in 0..=self.du {
            let mut pz = 1.0;
            for iz in 0..=self.dz {
                acc += self.at(iu, iz).abs() * pu * pz;
                pz *= za;
            }
            pu *= ua;
        }
        acc
    }

    /// ∂/∂u.
    fn d_du(&self) -> UvMat {
        if self.du == 0 {
            return UvMat {
                du: 0,
                dz: self.dz,
                c: vec![0.0; self.dz + 1],
            };
        }
        let mut c = vec![0.0; self.du * (self.dz + 1)];
        for iu in 1..=self.du {
            for iz in 0..=self.dz {
                c[(iu - 1) * (self.dz + 1) + iz] = self.at(iu, iz) * iu as f64;
            }
        }
        UvMat {
            du: self.du - 1,
            dz: self.dz,
            c,
        }
    }
}

/// Numeric view of the surface at fixed (p, q): everything needed to count
/// and integrate over the u-roots at each z.
#[derive(Clone, Debug)]
pub struct RSlice {
    pub p: f64,
    pub q: f64,
    r: UvMat,
    ru: UvMat,
    b: UvMat,
    dq: UvMat,
    p0: UvMat,
    p2: UvMat,
    q0: UvMat,
    q2: UvMat,
    kp: f64,
    kq: f64,
}

impl RSlice {
    pub fn r_at(&self, u: f64, z: f64) -> f64 {
        self.r.eval(u, z)
    }

    pub fn ru_at(&self, u: f64, z: f64) -> f64 {
        self.ru.eval(u, z)
    }

    pub fn b_tilde_at(&self, u: f64, z: f64) -> f64 {
        self.b.eval(u, z)
    }

    pub fn delta_q_at(&self, u: f64, z: f64) -> f64 {
        self.dq.eval(u, z)
    }

    /// The quartic R(·, z) as a numeric polynomial in u.
    pub fn u_poly(&self, z: f64) -> UniPolyNumeric {
        UniPolyNumeric::with_trim(self.r.u_coeffs(z), TAU_TRIM)
    }

    fn roots01(&self, z: f64) -> Result<Vec<RootCluster>> {
        self.u_poly(z)
            .real_roots_clustered(0.0, 1.0, TAU_ROOT, TAU_CLUSTER)
            .map_err(|e| HornError::RootFinder(self.p, self.q, format!("u-roots at z={z}: {e}")))
    }

    fn root_count(&self, z: f64) -> Result<usize> {
        Ok(self.roots01(z)?.iter().map(|c| c.multiplicity).sum())
    }

    /// Numeric quadratic data (p₀, p₂, q₀, q₂, κ_p, κ_q) at (u, z); the cross
    /// coefficients of P_p and Q_q are κ_p·S and κ_q·S.
    pub fn quad_data(&self, u: f64, z: f64) -> (f64, f64, f64, f64, f64, f64) {
        (
            self.p0.eval(u, z),
            self.p2.eval(u, z),
            self.q0.eval(u, z),
            self.q2.eval(u, z),
            self.kp,
            self.kq,
        )
    }

    /// Square of the common-root location via the S-free elimination
    /// c*² = (κ_q p₀ − κ_p q₀)/B̃. Unlike `c_star` this stays conditioned as
    /// S → 0, where the direct quotient is 0/0.
    fn c_star_sq(&self, u: f64, z: f64) -> Option<f64> {
        let b = self.b.eval(u, z);
        if b.abs() <= 1e-9 * self.b.eval_scale(u, z).max(1.0) {
            return None;
        }
        let num = self.kq * self.p0.eval(u, z) - self.kp * self.q0.eval(u, z);
        Some(num / b)
    }
}

// ---------------------------------------------------------------------------
// Critical z structure
// ---------------------------------------------------------------------------

/// A root of the u-discriminant of R in [0,1] (the endpoints are always
/// included as structural entries).
#[derive(Clone, Copy, Debug)]
pub struct CriticalZ {
    pub z: f64,
    /// True when the merging pair is real and inside [0,1] on one side, i.e.,
    /// when the z-integrand gains or loses a square-root branch here.
    pub relevant: bool,
    /// Multiplicity of the discriminant root (0 for the endpoints).
    pub multiplicity: usize,
}

/// Critical z values with per-interval u-root counts.
#[derive(Clone, Debug)]
pub struct CriticalSet {
    pub zs: Vec<CriticalZ>,
    /// Root counts (with multiplicity) on the open intervals between
    /// consecutive entries of `zs`; length = zs.len() − 1.
    pub counts: Vec<usize>,
}

impl CriticalSet {
    /// Sorted critical values flagged as relevant (including endpoints).
    pub fn relevant_zs(&self) -> Vec<f64> {
        self.zs
            .iter()
            .filter(|c| c.relevant)
            .map(|c| c.z)
            .collect()
    }

    pub fn all_zs(&self) -> Vec<f64> {
        self.zs.iter().map(|c| c.z).collect()
    }

    /// Intervals carrying at least one u-root (the support of the integrand).
    pub fn support(&self) -> Vec<(f64, f64)> {
        (0..self.counts.len())
            .filter(|&i| self.counts[i] > 0)
            .map(|i| (self.zs[i].z, self.zs[i + 1].z))
            .collect()
    }
}

/// Interior region label of the (p, q) domain, determined by the pattern of
/// per-interval root counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    I,
    II,
    III,
    IV,
    V,
    VI,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
            Region::IV => "IV",
            Region::V => "V",
            Region::VI => "VI",
        };
        f.write_str(s)
    }
}

/// Density value together with the proximity flag.
#[derive(Clone, Copy, Debug)]
pub struct RhoValue {
    pub value: f64,
    /// True when (p,q) lies within `TAU_SING` of a singular locus segment.
    pub near_singular: bool,
}

/// Per-point status in a density grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointFlag {
    Outside,
    Ok,
    NearSingular,
    Failed,
}

impl PointFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointFlag::Outside => "outside",
            PointFlag::Ok => "ok",
            PointFlag::NearSingular => "near-singular",
            PointFlag::Failed => "failed",
        }
    }
}

/// Rectangular evaluation grid of ρ; `values[ip * qs.len() + iq]`.
#[derive(Clone, Debug)]
pub struct DensityGrid {
    pub ps: Vec<f64>,
    pub qs: Vec<f64>,
    pub values: Vec<f64>,
    pub flags: Vec<PointFlag>,
}

// ---------------------------------------------------------------------------
// The pipeline
// ---------------------------------------------------------------------------

/// Everything precomputed once per spectrum pair: the exact surface, its
/// deflated u-discriminant, the (p,q) domain with its singular loci, and the
/// dense f64 tensors used by the per-point hot path.
pub struct SymPipeline {
    pub alpha: Spectrum,
    pub beta: Spectrum,
    pub surface: ResultantSurface,
    /// disc_u R with the structural factor z²(1−z)² removed (u-free).
    pub disc: QPoly,
    pub domain: PQDomain,
    /// Mirror evaluation q ← −|q| is exact only when both spectra are
    /// negation-symmetric.
    pub mirror_q: bool,
    loci_segments: Vec<((f64, f64), (f64, f64))>,
    t_r: PolyTensor,
    t_b: PolyTensor,
    t_dq: PolyTensor,
    t_p0: PolyTensor,
    t_p2: PolyTensor,
    t_q0: PolyTensor,
    t_q2: PolyTensor,
    t_disc: PolyTensor,
    kp: f64,
    kq: f64,
}

impl SymPipeline {
    pub fn new(alpha: &Spectrum, beta: &Spectrum) -> Result<Self> {
        let surface = resultant_surface(alpha, beta)?;
        let a = alpha.traceless();
        let b = beta.traceless();
        let domain = domain::pq_domain(alpha, beta)?;

        // disc_u R always carries z²(1−z)²: at z ∈ {0,1} the cross term S·c
        // drops and R degenerates to a perfect square in u.
        let raw = surface.r.discriminant_in(0)?;
        if raw.is_zero() {
            return Err(HornError::DegenerateResultant(
                "u-discriminant of R vanishes identically".into(),
            ));
        }
        let v = &SURFACE_VARS;
        let zfac = QPoly::monomial(v, &[0, 2, 0, 0], Rat::one())
            .add(&QPoly::monomial(v, &[0, 3, 0, 0], -Rat::from_integer(2.into())))
            .add(&QPoly::monomial(v, &[0, 4, 0, 0], Rat::one()));
        let disc = raw.try_div_exact(&zfac).unwrap_or(raw);

        let sym = |s: &Spectrum| -> bool {
            let ex = s.exact.as_ref().expect("exact by construction");
            ex[1].is_zero() && ex[0] == -ex[2].clone()
        };
        let mirror_q = sym(&a) && sym(&b);

        let loci_segments = domain::singular_loci(alpha, beta)?
            .iter()
            .map(|l| {
                let s = &l.pq_seg.0;
                let e = &l.pq_seg.1;
                (
                    (rat_to_f64(&s.x), rat_to_f64(&s.y)),
                    (rat_to_f64(&e.x), rat_to_f64(&e.y)),
                )
            })
            .collect();

        Ok(SymPipeline {
            kp: rat_to_f64(&surface.quads.kappa_p),
            kq: rat_to_f64(&surface.quads.kappa_q),
            t_r: PolyTensor::new(&surface.r),
            t_b: PolyTensor::new(&surface.b_tilde),
            t_dq: PolyTensor::new(&surface.delta_q),
            t_p0: PolyTensor::new(&surface.quads.p0),
            t_p2: PolyTensor::new(&surface.quads.p2),
            t_q0: PolyTensor::new(&surface.quads.q0),
            t_q2: PolyTensor::new(&surface.quads.q2),
            t_disc: PolyTensor::new(&disc),
            alpha: a,
            beta: b,
            surface,
            disc,
            domain,
            mirror_q,
            loci_segments,
        })
    }

    /// The spin-1 pair α = β = (1, 0, −1).
    pub fn spin_one_pair() -> Result<Self> {
        let s = Spectrum::from_rats(vec![
            Rat::from_integer(1.into()),
            Rat::zero(),
            Rat::from_integer((-1).into()),
        ])?;
        SymPipeline::new(&s, &s)
    }

    /// Numeric surface view at fixed (p, q).
    pub fn slice(&self, p: f64, q: f64) -> RSlice {
        let r = self.t_r.collapse(p, q);
        let ru = r.d_du();
        RSlice {
            p,
            q,
            ru,
            r,
            b: self.t_b.collapse(p, q),
            dq: self.t_dq.collapse(p, q),
            p0: self.t_p0.collapse(p, q),
            p2: self.t_p2.collapse(p, q),
            q0: self.t_q0.collapse(p, q),
            q2: self.t_q2.collapse(p, q),
            kp: self.kp,
            kq: self.kq,
        }
    }

    /// z-polynomial of the deflated u-discriminant at fixed (p, q).
    pub fn disc_z_poly(&self, p: f64, q: f64) -> UniPolyNumeric {
        UniPolyNumeric::with_trim(self.t_disc.collapse(p, q).z_coeffs(), TAU_TRIM)
    }

    // -- critical structure --------------------------------------------------

    /// Critical z values of R(·, z) in [0,1] with relevance flags and
    /// per-interval root counts.
    pub fn critical_zs(&self, p: f64, q: f64) -> Result<CriticalSet> {
        let slice = self.slice(p, q);
        self.critical_set(&slice)
    }

    fn critical_set(&self, s: &RSlice) -> Result<CriticalSet> {
        let zpoly = self.disc_z_poly(s.p, s.q);
        if zpoly.is_identically_zero() {
            return Err(HornError::RootFinder(
                s.p,
                s.q,
                "u-discriminant vanishes identically".into(),
            ));
        }
        let clusters = zpoly
            .real_roots_clustered(0.0, 1.0, TAU_ROOT, TAU_CLUSTER)
            .map_err(|e| HornError::RootFinder(s.p, s.q, format!("discriminant roots: {e}")))?;
        let interior: Vec<RootCluster> = clusters
            .into_iter()
            .filter(|c| c.value > 1e-12 && c.value < 1.0 - 1e-12)
            .collect();

        let mut zs = Vec::with_capacity(interior.len() + 2);
        zs.push(CriticalZ {
            z: 0.0,
            relevant: false,
            multiplicity: 0,
        });
        for c in &interior {
            zs.push(CriticalZ {
                z: c.value,
                relevant: false,
                multiplicity: c.multiplicity,
            });
        }
        zs.push(CriticalZ {
            z: 1.0,
            relevant: false,
            multiplicity: 0,
        });

        let mut counts = Vec::with_capacity(zs.len() - 1);
        for w in zs.windows(2) {
            let zm = 0.5 * (w[0].z + w[1].z);
            counts.push(s.root_count(zm)?);
        }

        // Bisection on the discriminant slice is noise-limited (heavy
        // cancellation leaves ~1e-7 of slack), and a support endpoint that
        // misses the actual branch transitions by that much plants a spike
        // inside a neighbouring piece that the quadrature grinds on. Re-pin
        // every transition to the z where the computed root count flips,
        // which the well conditioned quartic resolves to machine precision;
        // a double discriminant root unresolved in z splits into its two
        // flips (e.g. the colliding merges as q → 0⁻).
        let n = zs.len();
        let mut rebuilt: Vec<CriticalZ> = vec![zs[0].clone()];
        for i in 1..n - 1 {
            if counts[i - 1] == counts[i] {
                rebuilt.push(zs[i].clone());
                continue;
            }
            let m_lo = 0.5 * (zs[i - 1].z + zs[i].z);
            let m_hi = 0.5 * (zs[i].z + zs[i + 1].z);
            match self.locate_flips(s, zs[i].z, m_lo, m_hi) {
                Some(flips) if !flips.is_empty() => {
                    let mult = if flips.len() > 1 { 1 } else { zs[i].multiplicity };
                    for f in flips {
                        rebuilt.push(CriticalZ {
                            z: self.refine_flip(s, f, m_lo, m_hi),
                            relevant: false,
                            multiplicity: mult,
                        });
                    }
                }
                _ => rebuilt.push(zs[i].clone()),
            }
        }
        rebuilt.push(zs[n - 1].clone());
        rebuilt.sort_by(|a, b| a.z.partial_cmp(&b.z).unwrap());
        rebuilt.dedup_by(|a, b| (a.z - b.z).abs() <= 1e-11);
        let mut zs = rebuilt;
        let mut counts = Vec::with_capacity(zs.len() - 1);
        for w in zs.windows(2) {
            counts.push(s.root_count(0.5 * (w[0].z + w[1].z))?);
        }

        // Interior near-tangencies: a transition where a pair collides can be
        // shadowed, a little inside the support piece, by a z where the same
        // pair grazes a second double point without any count flip (the
        // discriminant's other root went complex with a tiny imaginary part).
        // φ spikes by orders of magnitude there, the f64 discriminant slice
        // cannot resolve the root, and the adaptive quadrature exhausts its
        // segment budget on the unannounced peak — so hand it a panel
        // boundary at each grazing point.
        let mut grazes: Vec<f64> = Vec::new();
        for i in 0..counts.len() {
            if counts[i] == 0 {
                continue;
            }
            let (lo, hi) = (zs[i].z, zs[i + 1].z);
            let w = hi - lo;
            if w <= 40.0 * SHRINK_PAD {
                continue;
            }
            if i > 0 && counts[i] > counts[i - 1] {
                grazes.extend(self.near_tangencies(s, lo, 1.0, w));
            }
            if i + 1 < counts.len() && counts[i] > counts[i + 1] {
                grazes.extend(self.near_tangencies(s, hi, -1.0, w));
            }
        }
        if !grazes.is_empty() {
            grazes.retain(|t| zs.iter().all(|c| (c.z - t).abs() > 4.0 * SHRINK_PAD));
            grazes.sort_by(|a, b| a.partial_cmp(b).unwrap());
            grazes.dedup_by(|a, b| (*a - *b).abs() <= 4.0 * SHRINK_PAD);
            for t in grazes {
                zs.push(CriticalZ {
                    z: t,
                    relevant: false,
                    multiplicity: 2,
                });
            }
            zs.sort_by(|a, b| a.z.partial_cmp(&b.z).unwrap());
            counts.clear();
            for w in zs.windows(2) {
                counts.push(s.root_count(0.5 * (w[0].z + w[1].z))?);
            }
        }

        // Endpoint relevance: a pair enters or leaves through z = 0 / z = 1
        // exactly when the adjacent interval carries roots.
        let n = zs.len();
        zs[0].relevant = counts[0] > 0;
        zs[n - 1].relevant = *counts.last().unwrap() > 0;
        for i in 1..n - 1 {
            let left_gap = zs[i].z - zs[i - 1].z;
            let right_gap = zs[i + 1].z - zs[i].z;
            let change = counts[i - 1] != counts[i];
            zs[i].relevant = self.pair_relevant(s, zs[i].z, left_gap, right_gap, change);
        }
        Ok(CriticalSet { zs, counts })
    }

    /// Locate the root-count flips hiding behind one discriminant root: one
    /// flip per vanishing/appearing pair, each pinned by bisection on the
    /// count and reported on its branch-poor side (inside the residual fuzz
    /// band the near-merged pair is noise-dominated, so the transition is
    /// best described as the first z where the pair is officially gone).
    /// The search stays inside (lo_bound, hi_bound) — the midpoints of the
    /// adjacent intervals, where the measured counts are trusted — trying a
    /// narrow window around z_b first. Returns None if no flip is bracketed.
    fn locate_flips(
        &self,
        s: &RSlice,
        z_b: f64,
        lo_bound: f64,
        hi_bound: f64,
    ) -> Option<Vec<f64>> {
        for half_width in [1e-5, 1e-3, f64::INFINITY] {
            let lo = lo_bound.max(z_b - half_width);
            let hi = hi_bound.min(z_b + half_width);
            if hi <= lo {
                continue;
            }
            let c_lo = s.root_count(lo).ok()?;
            let c_hi = s.root_count(hi).ok()?;
            if c_lo == c_hi {
                continue;
            }
            let mut flips = Vec::new();
            if c_lo > c_hi {
                let mut t = c_lo;
                while t >= c_hi + 2 {
                    let (_, b) = self.flip_boundary(s, lo, hi, |c| c >= t)?;
                    flips.push(b);
                    t -= 2;
                }
            } else {
                let mut t = c_lo + 2;
                while t <= c_hi {
                    let (a, _) = self.flip_boundary(s, lo, hi, |c| c < t)?;
                    flips.push(a);
                    t += 2;
                }
            }
            flips.sort_by(|a, b| a.partial_cmp(b).unwrap());
            flips.dedup_by(|a, b| (*a - *b).abs() <= 1e-11);
            return Some(flips);
        }
        None
    }

    /// Bisect the boundary between {z : pred(count(z))} (true at `lo`) and
    /// its complement (false at `hi`); returns the final one-ulp bracket.
    fn flip_boundary<P: Fn(usize) -> bool>(
        &self,
        s: &RSlice,
        mut lo: f64,
        mut hi: f64,
        pred: P,
    ) -> Option<(f64, f64)> {
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if pred(s.root_count(mid).ok()?) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some((lo, hi))
    }

    /// Decide whether the pair of u-branches merging at z_s is real and
    /// inside [0,1] on at least one side (probing at z_s ± δ, δ adaptively
    /// bounded by the neighbour gaps, with the count change as fallback).
    fn pair_relevant(
        &self,
        s: &RSlice,
        z_s: f64,
        left_gap: f64,
        right_gap: f64,
        count_change: bool,
    ) -> bool {
        let roots0 = complex_roots(&s.r.u_coeffs(z_s));
        if roots0.len() < 2 {
            return count_change;
        }
        // The merging pair is the closest pair at z_s.
        let (mut bi, mut bj, mut best) = (0usize, 1usize, f64::INFINITY);
        for i in 0..roots0.len() {
            for j in i + 1..roots0.len() {
                let d = (roots0[i] - roots0[j]).norm();
                if d < best {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        let us = 0.5 * (roots0[bi] + roots0[bj]);
        if us.im.abs() > 1e-3 * (1.0 + us.re.abs()) {
            // The coincidence happens off the real axis: no real branch change.
            return false;
        }
        let mut decided = false;
        let mut relevant = false;
        for (side, gap) in [(-1.0, left_gap), (1.0, right_gap)] {
            let delta = PROBE_DELTA.min(0.25 * gap).max(1e-12);
            let probe = complex_roots(&s.r.u_coeffs(z_s + side * delta));
            if probe.len() < 2 {
                continue;
            }
            let mut order: Vec<usize> = (0..probe.len()).collect();
            order.sort_by(|&a, &b| {
                (probe[a] - us)
                    .norm()
                    .partial_cmp(&(probe[b] - us).norm())
                    .unwrap()
            });
            let (w1, w2) = (probe[order[0]], probe[order[1]]);
            let real = w1.im.abs() <= 1e-5 * (1.0 + w1.re.abs())
                && w2.im.abs() <= 1e-5 * (1.0 + w2.re.abs());
            if real {
                decided = true;
                let in01 = |w: Complex64| w.re >= -1e-7 && w.re <= 1.0 + 1e-7;
                if in01(w1) && in01(w2) {
                    relevant = true;
                }
            }
        }
        if decided {
            relevant || count_change
        } else {
            count_change
        }
    }

    /// Classify the interior region from the root-count pattern. Never uses
    /// closed-form boundary curves; errors with the observed pattern when it
    /// matches none of the six.
    pub fn region_classify(&self, p: f64, q: f64) -> Result<Region> {
        let qe = if self.mirror_q { -q.abs() } else { q };
        let cs = self.critical_zs(p, qe)?;
        // Critical z flanked by equal counts carry no branch change; they may
        // also wander out of (0,1) as (p,q) moves within one region. Compress
        // them away and keep two bits of arrangement data: the run-length
        // pattern and the number of inert critical z below the active block
        // (which is what separates III from IV and V from VI).
        let mut compressed: Vec<usize> = Vec::new();
        for &c in &cs.counts {
            if compressed.last() != Some(&c) {
                compressed.push(c);
            }
        }
        let lead = match cs.counts.iter().position(|&c| c > 0) {
            Some(i0) => i0.saturating_sub(1),
            None => 0,
        };
        match (compressed.as_slice(), lead) {
            ([2, 0], 0) => Ok(Region::I),
            ([2, 4, 2, 0], 0) => Ok(Region::II),
            ([0, 2, 4, 2, 0], 0) => Ok(Region::III),
            ([0, 2, 4, 2, 0], _) => Ok(Region::IV),
            ([0, 2, 0], 0) => Ok(Region::V),
            ([0, 2, 0], _) => Ok(Region::VI),
            _ => Err(HornError::UnclassifiedPattern(
                p,
                q,
                format!("interval root counts {:?}", cs.counts),
            )),
        }
    }

    /// Sorted u-roots of R(·, z) in [0,1] (multiplicity-expanded).
    pub fn u_branches(&self, p: f64, q: f64, z: f64) -> Result<Vec<f64>> {
        let s = self.slice(p, q);
        let mut out = Vec::new();
        for c in s.roots01(z)? {
            for _ in 0..c.multiplicity {
                out.push(c.value);
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(out)
    }

    // -- the integrand and the density ---------------------------------------

    /// z-integrand φ(z) = Σᵢ |B̃(uᵢ,z)|/|R'_u(uᵢ,z)| over the u-roots in
    /// [0,1]; the density is 1/(2π²) ∫ φ. Checks the common-root invariants
    /// |c*| ≤ 1 and Δ_Q ≥ 0 at every root.
    pub fn phi(&self, p: f64, q: f64, z: f64) -> Result<f64> {
        let s = self.slice(p, q);
        let cs = self.critical_set(&s)?;
        self.phi_with(&s, &cs.all_zs(), z)
    }

    /// φ with a caller-provided guard list (performance hook for harnesses
    /// that already hold the critical set; `phi` rebuilds it per call).
    #[doc(hidden)]
    pub fn phi_guarded(&self, p: f64, q: f64, guard_zs: &[f64], z: f64) -> Result<f64> {
        let s = self.slice(p, q);
        self.phi_with(&s, guard_zs, z)
    }

    fn phi_with(&self, s: &RSlice, guard_zs: &[f64], z: f64) -> Result<f64> {
        Ok(self.phi_parts(s, guard_zs, z)?.total)
    }

    /// φ(z) split into the total, the φ carried by the tightest branch pair,
    /// and whether that pair sat below the evaluation noise floor. Roots
    /// closer than TIGHT_PAIR_GAP — including unresolved multiplicity-≥2
    /// clusters — are evaluated through the vertex model: for a near-double
    /// pair u± around the extremum v of R(·,z),
    ///   Σ |B̃|/|R′(u±)| = √2·|B̃(v)| / √(|R″(v)|·|R(v)|) · (1 + O(gap²)),
    /// and every factor on the right is evaluated at a well-conditioned point,
    /// whereas locating u± individually squares up the rounding noise. This
    /// keeps φ smooth through the regime where a pair stays close to double
    /// over a long z-stretch (the q → 0⁻ collisions).
    fn phi_parts(&self, s: &RSlice, guard_zs: &[f64], z: f64) -> Result<PhiParts> {
        let clusters = s.roots01(z)?;
        if clusters.is_empty() {
            return Ok(PhiParts::default());
        }
        let upoly = s.u_poly(z);
        let d1 = upoly.derivative();
        let d2 = d1.derivative();
        let mut singles: Vec<f64> = Vec::new();
        let mut pairs: Vec<(f64, bool)> = Vec::new();
        for cl in &clusters {
            let mut m = cl.multiplicity;
            if m >= 2 {
                if let Some(pv) = self.vertex_phi(s, &d1, &d2, cl.value, z) {
                    pairs.push(pv);
                    m -= 2;
                }
            }
            for _ in 0..m {
                singles.push(cl.value);
            }
        }
        singles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut lone: Vec<f64> = Vec::new();
        let mut i = 0usize;
        while i < singles.len() {
            if i + 1 < singles.len() && singles[i + 1] - singles[i] < TIGHT_PAIR_GAP {
                let mid = 0.5 * (singles[i] + singles[i + 1]);
                if let Some(pv) = self.vertex_phi(s, &d1, &d2, mid, z) {
                    pairs.push(pv);
                    i += 2;
                    continue;
                }
            }
            lone.push(singles[i]);
            i += 1;
        }
        let mut out = PhiParts::default();
        for &u in &lone {
            out.total += self.phi_term(s, guard_zs, u, z)?;
        }
        for &(pp, fl) in &pairs {
            out.total += pp;
            if pp > out.pair {
                out.pair = pp;
                out.pair_floored = fl;
            }
        }
        if pairs.is_empty() && lone.len() >= 2 {
            let mut k = 0usize;
            for j in 1..lone.len() - 1 {
                if lone[j + 1] - lone[j] < lone[k + 1] - lone[k] {
                    k = j;
                }
            }
            out.pair = self.phi_term(s, guard_zs, lone[k], z)?
                + self.phi_term(s, guard_zs, lone[k + 1], z)?;
        }
        Ok(out)
    }

    /// Newton-polish the extremum of R(·,z) from a first guess `v0`. Returns
    /// None if the extremum is degenerate or the iteration wanders off.
    fn vertex_newton(
        &self,
        s: &RSlice,
        d1: &UniPolyNumeric,
        d2: &UniPolyNumeric,
        v0: f64,
        z: f64,
    ) -> Option<f64> {
        let mut v = v0;
        for _ in 0..8 {
            let rpp = d2.eval(v);
            if rpp.abs() < 1e-12 * s.r.eval_scale(v.clamp(0.0, 1.0), z).max(1.0) {
                return None;
            }
            let step = d1.eval(v) / rpp;
            v -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        if !(-1e-3..=1.0 + 1e-3).contains(&v) || (v - v0).abs() > 2.0 * TIGHT_PAIR_GAP {
            return None;
        }
        let rpp = d2.eval(v);
        if rpp.abs() < 1e-9 * s.r.eval_scale(v.clamp(0.0, 1.0), z).max(1e-300) {
            return None;
        }
        Some(v)
    }

    /// Vertex-model φ of one tight pair: Newton-polish the extremum v of
    /// R(·,z) from the cluster location, then √2·|B̃|/√(|R″|·|R(v)|) with
    /// |R(v)| floored at the evaluation noise (the bool reports whether the
    /// floor was active). Returns None (fall back to per-root terms) if the
    /// extremum is degenerate or wanders off.
    fn vertex_phi(
        &self,
        s: &RSlice,
        d1: &UniPolyNumeric,
        d2: &UniPolyNumeric,
        v0: f64,
        z: f64,
    ) -> Option<(f64, bool)> {
        let v = self.vertex_newton(s, d1, d2, v0, z)?;
        let rpp = d2.eval(v);
        let scale = s.r.eval_scale(v.clamp(0.0, 1.0), z).max(1e-300);
        // R(v) in compensated arithmetic: the vertex residual is quadratically
        // insensitive to the Newton error in v, so the double-double Horner
        // pushes the usable range down to |R| ~ 1e-26 of the scale — far
        // below the |R| ~ ε·scale where the plain evaluation saturates.
        let f = s.r.eval_dd(v, z);
        let floor = 1e-26 * scale;
        // Signed residual above the floor on the complex side: the pair is
        // certifiably dead here even if the f64 isolator still fabricates a
        // double root from the fuzz, so it contributes nothing.
        if f * rpp.signum() > 2.0 * floor {
            return Some((0.0, false));
        }
        let floored = f.abs() <= 2.0 * floor;
        let fm = f.abs().max(floor);
        let b = s.b.eval(v, z).abs();
        Some((SQRT_2 * b / (rpp.abs() * fm).sqrt(), floored))
    }

    /// Compensated residual R(v) of the tightest u-root pair at this z, or
    /// None when no pair is tighter than TIGHT_PAIR_GAP. −R(v)·sign(R″) is
    /// (up to ¼R″) the squared half-gap, so along z this residual measures
    /// how close the pair comes to an exact double point.
    fn tight_pair_residual(&self, s: &RSlice, z: f64) -> Option<f64> {
        let clusters = s.roots01(z).ok()?;
        let mut pos: Vec<f64> = Vec::new();
        for cl in &clusters {
            for _ in 0..cl.multiplicity {
                pos.push(cl.value);
            }
        }
        if pos.len() < 2 {
            return None;
        }
        pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut k = 0usize;
        for j in 1..pos.len() - 1 {
            if pos[j + 1] - pos[j] < pos[k + 1] - pos[k] {
                k = j;
            }
        }
        if pos[k + 1] - pos[k] >= TIGHT_PAIR_GAP {
            return None;
        }
        let upoly = s.u_poly(z);
        let d1 = upoly.derivative();
        let d2 = d1.derivative();
        let v = self.vertex_newton(s, &d1, &d2, 0.5 * (pos[k] + pos[k + 1]), z)?;
        Some(s.r.eval_dd(v, z))
    }

    /// Signed vertex residual at z, tracking the extremum from the seed in
    /// `v_cur` (updated on success). Negative means the tight pair is real:
    /// the residual is multiplied by sign(R″), so a dip below the axis and a
    /// hump above it both count as an open pair.
    fn signed_residual(&self, s: &RSlice, z: f64, v_cur: &mut f64) -> Option<f64> {
        let upoly = s.u_poly(z);
        let d1 = upoly.derivative();
        let d2 = d1.derivative();
        let v = self.vertex_newton(s, &d1, &d2, *v_cur, z)?;
        *v_cur = v;
        let sgn = if d2.eval(v) >= 0.0 { 1.0 } else { -1.0 };
        Some(sgn * s.r.eval_dd(v, z))
    }

    /// Refine one measured count flip to the true pair transition: the z
    /// where the signed vertex residual crosses zero. The f64 count flips
    /// where the quartic's residual emerges from evaluation fuzz, which near
    /// a collapsing pair can lie O(1e-7) away from the actual crossing; the
    /// compensated residual pins the crossing to ~1e-15. Falls back to the
    /// measured flip when no crossing brackets within ±1e-4.
    fn refine_flip(&self, s: &RSlice, z_f: f64, lo: f64, hi: f64) -> f64 {
        // Seed the vertex from whichever nearby z still shows the pair.
        let mut seed = None;
        for dz in [
            -2.0 * SHRINK_PAD,
            2.0 * SHRINK_PAD,
            -1e-7,
            1e-7,
            -1e-6,
            1e-6,
            0.0,
        ] {
            let z = z_f + dz;
            if z <= lo || z >= hi {
                continue;
            }
            let Ok(clusters) = s.roots01(z) else { continue };
            let mut pos: Vec<f64> = Vec::new();
            for c in &clusters {
                for _ in 0..c.multiplicity {
                    pos.push(c.value);
                }
            }
            if pos.len() < 2 {
                continue;
            }
            pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut k = 0usize;
            for j in 1..pos.len() - 1 {
                if pos[j + 1] - pos[j] < pos[k + 1] - pos[k] {
                    k = j;
                }
            }
            if pos[k + 1] - pos[k] < TIGHT_PAIR_GAP {
                seed = Some(0.5 * (pos[k] + pos[k + 1]));
                break;
            }
        }
        let Some(v_seed) = seed else {
            return z_f;
        };
        let mut v_cur = v_seed;
        let Some(g0) = self.signed_residual(s, z_f, &mut v_cur) else {
            return z_f;
        };
        if g0 == 0.0 {
            return z_f;
        }
        // Walk outward geometrically until the residual changes sign.
        let mut bracket: Option<(f64, f64, f64)> = None; // (a, b, sign at a)
        let mut x = 1e-12;
        'walk: while x <= 1e-4 {
            for dir in [-1.0, 1.0] {
                let z = z_f + dir * x;
                if z <= lo || z >= hi {
                    continue;
                }
                let mut v = v_cur;
                let Some(g) = self.signed_residual(s, z, &mut v) else {
                    continue;
                };
                if g.signum() != g0.signum() {
                    bracket = Some(if dir < 0.0 {
                        (z, z_f, g.signum())
                    } else {
                        (z_f, z, g0.signum())
                    });
                    break 'walk;
                }
            }
            x *= 2.0;
        }
        let Some((mut a, mut b, sign_a)) = bracket else {
            return z_f;
        };
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let mut v = v_cur;
            let Some(gm) = self.signed_residual(s, m, &mut v) else {
                break;
            };
            if gm.signum() == sign_a {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Walk one side of a support piece for interior near-tangencies of the
    /// tight pair: z where the pair grazes a double point without the root
    /// count changing (the second discriminant root hiding behind a q → 0⁻
    /// style transition, unresolvable by the f64 discriminant but an honest
    /// spike of φ). Samples the vertex residual at geometric offsets from
    /// the piece end `z_f`, brackets discrete maxima, and polishes each by
    /// bisecting the residual's slope sign. Offsets below ~SHRINK_PAD are
    /// skipped — the pad integral already covers them.
    fn near_tangencies(&self, s: &RSlice, z_f: f64, dir: f64, w: f64) -> Vec<f64> {
        let mut samples: Vec<(f64, f64)> = Vec::new();
        let mut x = 1.25 * SHRINK_PAD;
        while x <= 0.5 * w {
            match self.tight_pair_residual(s, z_f + dir * x) {
                Some(fv) => samples.push((x, fv)),
                None => break,
            }
            x *= SQRT_2;
        }
        let mut found = Vec::new();
        for i in 1..samples.len().saturating_sub(1) {
            if samples[i].1 > samples[i - 1].1 && samples[i].1 > samples[i + 1].1 {
                let (mut a, mut b) = (samples[i - 1].0, samples[i + 1].0);
                for _ in 0..80 {
                    if b - a < 1e-11 {
                        break;
                    }
                    let m = 0.5 * (a + b);
                    let h = 0.125 * (b - a);
                    let (fl, fr) = match (
                        self.tight_pair_residual(s, z_f + dir * (m - h)),
                        self.tight_pair_residual(s, z_f + dir * (m + h)),
                    ) {
                        (Some(l), Some(r)) => (l, r),
                        _ => break,
                    };
                    if fl < fr {
                        a = m - h;
                    } else {
                        b = m + h;
                    }
                }
                found.push(z_f + dir * 0.5 * (a + b));
            }
        }
        found
    }

    /// Pad stripped next to a pair transition at `z_t`, growing inward
    /// (direction `dir`) until the dying pair's |R(v)| clears the noise floor
    /// — inside that band φ is noise-saturated and quadrature cannot settle.
    /// Returns the pad width and its restored mass, from the local model
    /// φ = φ_rest + A/√|z − z_t| evaluated at the pad's inner edge: both
    /// parts integrate to pad·(φ_total + φ_pair).
    fn pad_mass(
        &self,
        s: &RSlice,
        guard_zs: &[f64],
        z_t: f64,
        dir: f64,
        max_pad: f64,
    ) -> Result<(f64, f64)> {
        let mut w = SHRINK_PAD.min(max_pad);
        loop {
            let parts = self.phi_parts(s, guard_zs, z_t + dir * w)?;
            if !parts.pair_floored || 2.0 * w > max_pad {
                return Ok((w, w * (parts.total + parts.pair)));
            }
            w *= 2.0;
        }
    }

    fn phi_term(&self, s: &RSlice, guard_zs: &[f64], u: f64, z: f64) -> Result<f64> {
        let d = s.ru.eval(u, z);
        let scale = s.ru.eval_scale(u, z).max(1e-300);
        if d.abs() <= TAU_DENOM_REL * scale {
            let near = guard_zs.iter().any(|&g| (z - g).abs() < GUARD_Z);
            if !near {
                return Err(HornError::UnexpectedCriticalPoint(z, d.abs()));
            }
        }
        if let Some(c2) = s.c_star_sq(u, z) {
            if !(-1e-6..=1.0 + 1e-6).contains(&c2) {
                return Err(HornError::InvalidInput(format!(
                    "common-root invariant violated: c²={c2:.12} at (p,q,u,z)=({},{},{},{})",
                    s.p, s.q, u, z
                )));
            }
        }
        let dq = s.dq.eval(u, z);
        let dq_scale = s.dq.eval_scale(u, z).max(1.0);
        if dq < -1e-6 * dq_scale {
            return Err(HornError::InvalidInput(format!(
                "negative quadratic discriminant {dq:.3e} at (p,q,u,z)=({},{},{},{})",
                s.p, s.q, u, z
            )));
        }
        let b = s.b.eval(u, z).abs();
        Ok(b / d.abs().max(1e-300))
    }

    fn near_singular_at(&self, p: f64, q: f64) -> bool {
        self.loci_segments
            .iter()
            .any(|&(a, b)| dist_point_segment((p, q), a, b) <= TAU_SING)
    }

    /// The density ρ(p,q). Points outside the closed domain return exactly 0.
    /// For negation-symmetric spectrum pairs the evaluation runs at −|q|, so
    /// the q ↔ −q symmetry holds bit-for-bit.
    pub fn rho(&self, p: f64, q: f64) -> Result<RhoValue> {
        if !self.domain.contains_tol(p, q, domain::MEMBERSHIP_TOL) {
            return Ok(RhoValue {
                value: 0.0,
                near_singular: false,
            });
        }
        let qe = if self.mirror_q { -q.abs() } else { q };
        let near = self.near_singular_at(p, qe);
        let s = self.slice(p, qe);
        let cs = self.critical_set(&s)?;
        let guard = cs.all_zs();
        let err: RefCell<Option<HornError>> = RefCell::new(None);
        let mut acc = 0.0;
        let n_iv = cs.counts.len();
        for i in 0..n_iv {
            if cs.counts[i] == 0 {
                continue;
            }
            let (mut lo, mut hi) = (cs.zs[i].z, cs.zs[i + 1].z);
            let width = hi - lo;
            let born_lo = i > 0 && cs.counts[i] > cs.counts[i - 1];
            let dies_hi = i + 1 < n_iv && cs.counts[i] > cs.counts[i + 1];
            if width <= 10.0 * SHRINK_PAD {
                // Sub-pad window, integrated from the midpoint value by the
                // local pair model: a pair living exactly on the window has
                // φ ∝ 1/√((z−lo)(hi−z)) (chord integral π·w/2), a one-sided
                // transition has φ ∝ 1/√ distance (integral √2·w·φ_mid).
                let c = if born_lo && dies_hi { 0.5 * PI } else { SQRT_2 };
                acc += c * width * self.phi_with(&s, &guard, 0.5 * (lo + hi))?;
                continue;
            }
            // A pair born at lo (or dying at hi) belongs to this interval;
            // stop the quadrature a pad short of the transition and restore
            // the pad's mass analytically.
            if born_lo {
                let (w, m) = self.pad_mass(&s, &guard, lo, 1.0, 0.5 * width)?;
                lo += w;
                acc += m;
            }
            if dies_hi {
                let (w, m) = self.pad_mass(&s, &guard, hi, -1.0, 0.5 * width)?;
                hi -= w;
                acc += m;
            }
            let f = |z: f64| -> f64 {
                match self.phi_with(&s, &guard, z) {
                    Ok(v) => v,
                    Err(e) => {
                        err.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            };
            acc += integrate_sqrt_endpoints(f, lo, hi, PHI_QUAD_TOL).value;
        }
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok(RhoValue {
            value: acc / (2.0 * PI * PI),
            near_singular: near,
        })
    }

    /// Joint eigenvalue density p(γ₁,γ₂) = |Δ(γ)| ρ(p(γ), q(γ)) in traceless
    /// coordinates (γ₃ = −γ₁−γ₂).
    pub fn gamma_pdf(&self, g1: f64, g2: f64) -> Result<RhoValue> {
        let g3 = -g1 - g2;
        let vdm = ((g1 - g2) * (g1 - g3) * (g2 - g3)).abs();
        if vdm == 0.0 {
            return Ok(RhoValue {
                value: 0.0,
                near_singular: true,
            });
        }
        let p = g1 * g2 + g1 * g3 + g2 * g3;
        let q = -g1 * g2 * g3;
        let r = self.rho(p, q)?;
        Ok(RhoValue {
            value: vdm * r.value,
            near_singular: r.near_singular,
        })
    }

    /// Evaluate ρ on a rectangular grid (row-parallel). Failures at isolated
    /// points are recorded in the flags rather than aborting the grid.
    pub fn rho_grid(
        &self,
        p_range: (f64, f64),
        q_range: (f64, f64),
        mesh: f64,
    ) -> Result<DensityGrid> {
        if !(mesh > 0.0) || p_range.1 < p_range.0 || q_range.1 < q_range.0 {
            return Err(HornError::InvalidInput(
                "grid ranges must be ordered and mesh positive".into(),
            ));
        }
        let axis = |lo: f64, hi: f64| -> Vec<f64> {
            let n = ((hi - lo) / mesh).round() as usize;
            (0..=n.max(0)).map(|k| lo + k as f64 * mesh).collect()
        };
        let ps = axis(p_range.0, p_range.1);
        let qs = axis(q_range.0, q_range.1);
        let rows: Vec<Vec<(f64, PointFlag)>> = ps
            .par_iter()
            .map(|&p| {
                qs.iter()
                    .map(|&q| {
                        if !self.domain.contains_tol(p, q, domain::MEMBERSHIP_TOL) {
                            return (0.0, PointFlag::Outside);
                        }
                        match self.rho(p, q) {
                            Ok(r) => (
                                r.value,
                                if r.near_singular {
                                    PointFlag::NearSingular
                                } else {
                                    PointFlag::Ok
                                },
                            ),
                            Err(_) => (0.0, PointFlag::Failed),
                        }
                    })
                    .collect()
            })
            .collect();
        let mut values = Vec::with_capacity(ps.len() * qs.len());
        let mut flags = Vec::with_capacity(ps.len() * qs.len());
        for row in rows {
            for (v, f) in row {
                values.push(v);
                flags.push(f);
            }
        }
        Ok(DensityGrid {
            ps,
            qs,
            values,
            flags,
        })
    }

    // -- mass integrals -------------------------------------------------------

    /// ∫ ρ(p, q) dq over [qlo, qhi] ∩ domain at fixed p, splitting at the
    /// singular-carrier crossings c·p + q + c³ = 0 and at q = 0.
    pub fn q_strip_mass(&self, p: f64, qlo: f64, qhi: f64, tol: f64) -> Result<f64> {
        if qhi <= qlo {
            return Ok(0.0);
        }
        // Locate the contained q-blocks by scanning plus edge bisection.
        let mut cands: Vec<f64> = (0..=128).map(|i| qlo + (qhi - qlo) * i as f64 / 128.0).collect();
        for &extra in &[0.0, 1e-9, -1e-9, 1e-6, -1e-6, 1e-4, -1e-4] {
            if extra > qlo && extra < qhi {
                cands.push(extra);
            }
        }
        cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let inside = |q: f64| self.domain.contains_tol(p, q, domain::MEMBERSHIP_TOL);
        let bisect = |mut a: f64, mut b: f64| -> f64 {
            // invariant: inside(a) != inside(b)
            let fa = inside(a);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if inside(m) == fa {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };
        let flags: Vec<bool> = cands.iter().map(|&q| inside(q)).collect();
        let mut blocks: Vec<(f64, f64)> = Vec::new();
        let mut i = 0;
        while i < cands.len() {
            if flags[i] {
                let lo = if i == 0 {
                    cands[0]
                } else {
                    bisect(cands[i - 1], cands[i])
                };
                let mut j = i;
                while j + 1 < cands.len() && flags[j + 1] {
                    j += 1;
                }
                let hi = if j == cands.len() - 1 {
                    cands[j]
                } else {
                    bisect(cands[j], cands[j + 1])
                };
                blocks.push((lo, hi));
                i = j + 1;
            } else {
                i += 1;
            }
        }
        if blocks.is_empty() {
            return Ok(0.0);
        }

        // Interior split points: q = 0 and the carrier lines of the loci.
        let mut splits: Vec<f64> = vec![0.0];
        for l in domain::singular_loci(&self.alpha, &self.beta).unwrap_or_default() {
            let c = rat_to_f64(&l.frozen_value);
            splits.push(-c * c * c - c * p);
        }

        let err: RefCell<Option<HornError>> = RefCell::new(None);
        let mut total = 0.0;
        for (blo, bhi) in blocks {
            let mut breaks = vec![blo];
            for &sp in &splits {
                if sp > blo + 1e-12 && sp < bhi - 1e-12 {
                    breaks.push(sp);
                }
            }
            breaks.push(bhi);
            breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            let f = |q: f64| -> f64 {
                match self.rho(p, q) {
                    Ok(r) => r.value,
                    Err(e) => {
                        err.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            };
            total += integrate_piecewise_sqrt(f, &breaks, tol).value;
        }
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok(total)
    }

    /// ∫∫ ρ dp dq over a rectangle intersected with the domain
    /// (panel-parallel in p).
    pub fn window_mass(&self, p_range: (f64, f64), q_range: (f64, f64), tol: f64) -> Result<f64> {
        let (plo, phi_) = p_range;
        if phi_ <= plo {
            return Ok(0.0);
        }
        // Panel boundaries: uniform split plus the locus endpoints (kinks).
        let mut cuts: Vec<f64> = (0..=24).map(|i| plo + (phi_ - plo) * i as f64 / 24.0).collect();
        for &((x1, _), (x2, _)) in &self.loci_segments {
            for x in [x1, x2] {
                if x > plo + 1e-12 && x < phi_ - 1e-12 {
                    cuts.push(x);
                }
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-10);
        let panels: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
        let inner_tol = (tol * 0.05).max(1e-10);
        let panel_tol = (tol / panels.len() as f64).max(1e-12);

        let results: Vec<Result<f64>> = panels
            .par_iter()
            .map(|&(a, b)| {
                let err: RefCell<Option<HornError>> = RefCell::new(None);
                let f = |p: f64| -> f64 {
                    match self.q_strip_mass(p, q_range.0, q_range.1, inner_tol) {
                        Ok(v) => v,
                        Err(e) => {
                            err.borrow_mut().get_or_insert(e);
                            0.0
                        }
                    }
                };
                let v = gauss_kronrod(f, a, b, panel_tol).value;
                match err.into_inner() {
                    Some(e) => Err(e),
                    None => Ok(v),
                }
            })
            .collect();
        let mut total = 0.0;
        for r in results {
            total += r?;
        }
        Ok(total)
    }

    /// Total mass ∫∫ ρ over the whole domain; should be 1. For mirror-exact
    /// pairs only the q ≤ 0 half is integrated and doubled.
    pub fn total_mass(&self, tol: f64) -> Result<f64> {
        let (pmin, pmax, qmin, qmax) = self.domain.bbox(96);
        let pad = 1e-9;
        if self.mirror_q {
            Ok(2.0 * self.window_mass((pmin - pad, pmax + pad), (qmin - pad, 0.0), tol / 2.0)?)
        } else {
            self.window_mass((pmin - pad, pmax + pad), (qmin - pad, qmax + pad), tol)
        }
    }

    // -- singular scans -------------------------------------------------------

    /// Scan a divergence model: ρ against its closed-form asymptote along the
    /// pinned approach sequence offset = 3^(−j), j = jmin..=jmax (each model
    /// applies its own documented shift of j).
    pub fn singular_scan(
        &self,
        model: &SingularModel,
        jmin: u32,
        jmax: u32,
    ) -> Result<Vec<ScanRow>> {
        let mut rows = Vec::new();
        for j in jmin..=jmax {
            let (p, q, offset) = model.scan_point(j)?;
            let r = self.rho(p, q)?;
            let rho_div = singular_asymptote(model, offset)?;
            let rho_div_alt = match model {
                SingularModel::PointM1 { .. } => Some(singular_asymptote(
                    &SingularModel::PointM1 { halved: true },
                    offset,
                )?),
                _ => None,
            };
            rows.push(ScanRow {
                j,
                p,
                q,
                rho: r.value,
                near_singular: r.near_singular,
                rho_div,
                rho_div_alt,
                ratio: r.value / rho_div,
            });
        }
        Ok(rows)
    }
}

fn dist_point_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (px, py) = p;
    let (ax, ay) = a;
    let (bx, by) = b;
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    ((px - cx) * (px - cx) + (py - cy) * (py - cy)).sqrt()
}

/// All complex roots of a real polynomial (ascending coefficients) by
/// Durand–Kerner iteration; leading coefficients below a relative threshold
/// are trimmed first.
fn complex_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && c.last().unwrap().abs() <= 1e-13 * scale {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let an = c[n];
    let a: Vec<Complex64> = c.iter().map(|&v| Complex64::new(v / an, 0.0)).collect();
    let radius = 1.0
        + a[..n]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.norm()));
    let mut roots: Vec<Complex64> = (0..n)
        .map(|k| {
            let t = 2.0 * PI * (k as f64 + 0.25) / n as f64;
            radius * Complex64::new(t.cos(), t.sin())
        })
        .collect();
    let eval = |x: Complex64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for v in a.iter().rev() {
            acc = acc * x + v;
        }
        acc
    };
    for _ in 0..300 {
        let mut max_step = 0.0f64;
        for k in 0..n {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if j != k {
                    den *= roots[k] - roots[j];
                }
            }
            if den.norm() == 0.0 {
                den = Complex64::new(1e-300, 0.0);
            }
            let step = eval(roots[k]) / den;
            roots[k] -= step;
            max_step = max_step.max(step.norm() / (1.0 + roots[k].norm()));
        }
        if max_step < 1e-14 {
            break;
        }
    }
    roots
}

// ---------------------------------------------------------------------------
// Singular asymptotics
// ---------------------------------------------------------------------------

/// Closed-form divergence models of ρ near the singular loci of the spin-1
/// domain. Each variant documents its offset variable.
#[derive(Clone, Copy, Debug)]
pub enum SingularModel {
    /// Interior line q = p + 1 for −3 < p < −1; offset ε = q − (p+1).
    /// ρ ~ |log|ε|| / (π² √2 (p+3) √(−(1+p))).
    DashedLine { p: f64 },
    /// q → 0⁻ with −4 < p < −1; offset |q|.
    /// ρ ~ |log|q|| / (2π² |p| √(4+p)).
    QAxisOuter { p: f64 },
    /// q → 0⁻ with −1 < p < 0; offset |q|.
    /// ρ ~ (1/(2π²|p|)) (1/√(1+p) + 1/√(4+p)) |log|q||.
    QAxisInner { p: f64 },
    /// (p,q) → (−1, 0) along p = −1; offset |q|. ρ ~ c/√|q| with
    /// c = 1/(√6 π), or half of that when `halved` is set (both printed
    /// normalizations are exposed; scans report which one matches).
    PointM1 { halved: bool },
    /// Corner (−4, 0) along q = −κ(p+4), 0 < κ < 2; offset |q|.
    CornerM4 { kappa: f64 },
    /// Corner (0, 0) along κp³ + 27q² = 0, 0 < κ < 4; offset |q|,
    /// ρ ~ C″(κ)/|q|^{2/3}.
    CornerOrigin { kappa: f64 },
    /// Corner (−3, −2) along p + 3 = κ(q + 2), −1/2 ≤ κ < 1; offset q + 2.
    /// ρ ~ 1/(π √(48(1−κ)) √(q+2)).
    CornerM3M2 { kappa: f64 },
}

impl SingularModel {
    /// The pinned approach sequence: (p, q, offset) at step j.
    pub fn scan_point(&self, j: u32) -> Result<(f64, f64, f64)> {
        let pow3 = |e: i32| 3f64.powi(e);
        match *self {
            SingularModel::DashedLine { p } => {
                let eps = pow3(-(j as i32) - 3);
                Ok((p, p + 1.0 + eps, eps))
            }
            SingularModel::QAxisOuter { p } => {
                let q = -pow3(-(j as i32) - 1);
                Ok((p, q, q.abs()))
            }
            SingularModel::QAxisInner { p } => {
                let q = -pow3(-(j as i32) - 3);
                Ok((p, q, q.abs()))
            }
            SingularModel::PointM1 { .. } => {
                let q = -pow3(-(j as i32));
                Ok((-1.0, q, q.abs()))
            }
            SingularModel::CornerM4 { kappa } => {
                check_kappa(kappa, 0.0, 2.0, false, "(0,2)")?;
                let eps = pow3(-(j as i32));
                Ok((-4.0 + eps, -kappa * eps, kappa * eps))
            }
            SingularModel::CornerOrigin { kappa } => {
                check_kappa(kappa, 0.0, 4.0, false, "(0,4)")?;
                let p = -pow3(-(j as i32));
                let q = -(kappa * (-p).powi(3) / 27.0).sqrt();
                Ok((p, q, q.abs()))
            }
            SingularModel::CornerM3M2 { kappa } => {
                check_kappa(kappa, -0.5, 1.0, true, "[-1/2,1)")?;
                let eps = pow3(-(j as i32));
                Ok((-3.0 + kappa * eps, -2.0 + eps, eps))
            }
        }
    }
}

fn check_kappa(k: f64, lo: f64, hi: f64, lo_inclusive: bool, label: &'static str) -> Result<()> {
    let ok_lo = if lo_inclusive { k >= lo } else { k > lo };
    if !(ok_lo && k < hi) {
        return Err(HornError::KappaRange(k, label));
    }
    Ok(())
}

/// One row of a singular-locus convergence scan.
#[derive(Clone, Copy, Debug)]
pub struct ScanRow {
    pub j: u32,
    pub p: f64,
    pub q: f64,
    pub rho: f64,
    pub near_singular: bool,
    pub rho_div: f64,
    /// Alternative normalization where one exists (the (−1,0) model).
    pub rho_div_alt: Option<f64>,
    pub ratio: f64,
}

/// Coefficient C(κ) of the 1/√|q| divergence at the corner (−4, 0):
/// (1/4π²) √(κ/(2+3κ)) ∫₀^{z₁} dz / √(z(1−z)(1+z)(z₁−z)), z₁ = (2−κ)/(2+3κ).
pub fn corner_m4_coefficient(kappa: f64) -> Result<f64> {
    check_kappa(kappa, 0.0, 2.0, false, "(0,2)")?;
    let z1 = (2.0 - kappa) / (2.0 + 3.0 * kappa);
    let f = |z: f64| 1.0 / (z * (1.0 - z) * (1.0 + z) * (z1 - z)).sqrt();
    let integral = integrate_sqrt_endpoints(f, 0.0, z1, 1e-12).value;
    Ok((kappa / (2.0 + 3.0 * kappa)).sqrt() * integral / (4.0 * PI * PI))
}

/// Coefficient of the 1/√(q+2) divergence at the corner (−3, −2):
/// C′(κ) = 1/(π √(48(1−κ))).
pub fn corner_m3m2_coefficient(kappa: f64) -> Result<f64> {
    check_kappa(kappa, -0.5, 1.0, true, "[-1/2,1)")?;
    Ok(1.0 / (PI * (48.0 * (1.0 - kappa)).sqrt()))
}

/// Coefficient C″(κ) of the |q|^{−2/3} divergence at the origin:
/// (√3 κ^{1/3} / 4π²) ∫_a^b dζ / √(27 ζ (ζ−a)(b−ζ)(c−ζ)) with a < b < c the
/// roots of 27ζ(1−ζ)² = κ.
pub fn corner_origin_coefficient(kappa: f64) -> Result<f64> {
    check_kappa(kappa, 0.0, 4.0, false, "(0,4)")?;
    let poly = UniPolyNumeric::new(vec![-kappa, 27.0, -54.0, 27.0]);
    let roots = poly
        .real_roots_in_interval(0.0, 64.0, 1e-13)
        .map_err(|e| HornError::RootFinder(0.0, 0.0, format!("corner cubic: {e}")))?;
    if roots.len() != 3 {
        return Err(HornError::RootFinder(
            0.0,
            0.0,
            format!("expected 3 real roots of the corner cubic, got {}", roots.len()),
        ));
    }
    let (a, b, c) = (roots[0].value, roots[1].value, roots[2].value);
    let f = |t: f64| 1.0 / (27.0 * t * (t - a) * (b - t) * (c - t)).sqrt();
    let integral = integrate_sqrt_endpoints(f, a, b, 1e-12).value;
    Ok(3f64.sqrt() * kappa.powf(1.0 / 3.0) * integral / (4.0 * PI * PI))
}

/// Evaluate the divergence model at the given offset from the locus.
pub fn singular_asymptote(model: &SingularModel, offset: f64) -> Result<f64> {
    if !(offset > 0.0) {
        return Err(HornError::InvalidInput(
            "singular asymptote requires a positive offset".into(),
        ));
    }
    match *model {
        SingularModel::DashedLine { p } => {
            if !(-3.0 < p && p < -1.0) {
                return Err(HornError::InvalidInput(format!(
                    "interior-line model requires -3 < p < -1, got p={p}"
                )));
            }
            Ok(offset.ln().abs() / (PI * PI * 2f64.sqrt() * (p + 3.0) * (-(1.0 + p)).sqrt()))
        }
        SingularModel::QAxisOuter { p } => {
            if !(-4.0 < p && p < -1.0) {
                return Err(HornError::InvalidInput(format!(
                    "outer q-axis model requires -4 < p < -1, got p={p}"
                )));
            }
            Ok(offset.ln().abs() / (2.0 * PI * PI * p.abs() * (4.0 + p).sqrt()))
        }
        SingularModel::QAxisInner { p } => {
            if !(-1.0 < p && p < 0.0) {
                return Err(HornError::InvalidInput(format!(
                    "inner q-axis model requires -1 < p < 0, got p={p}"
                )));
            }
            let c = (1.0 / (1.0 + p).sqrt() + 1.0 / (4.0 + p).sqrt()) / (2.0 * PI * PI * p.abs());
            Ok(c * offset.ln().abs())
        }
        SingularModel::PointM1 { halved } => {
            let c = 1.0 / (6f64.sqrt() * PI);
            Ok(if halved { 0.5 * c } else { c } / offset.sqrt())
        }
        SingularModel::CornerM4 { kappa } => {
            Ok(corner_m4_coefficient(kappa)? / offset.sqrt())
        }
        SingularModel::CornerOrigin { kappa } => {
            Ok(corner_origin_coefficient(kappa)? / offset.powf(2.0 / 3.0))
        }
        SingularModel::CornerM3M2 { kappa } => {
            Ok(corner_m3m2_coefficient(kappa)? / offset.sqrt())
        }
    }
}


#[cfg(test)]
mod debug_flip_tests {
    use super::*;

    #[test]
    #[ignore]
    fn debug_flip_355() {
        let pipe = SymPipeline::spin_one_pair().unwrap();
        let s = pipe.slice(-3.55, -1e-6);
        let zb = 0.999995752698970_f64;
        for d in [
            -1e-5_f64, -1e-6, -3e-7, -2e-7, -1.5e-7, -1e-7, -6e-8, -3e-8, -1e-8, 0.0, 1e-8, 1e-6,
        ] {
            let z = zb + d;
            let rc = s.root_count(z);
            let r01 = s.roots01(z);
            match (&rc, &r01) {
                (Ok(c), Ok(cl)) => {
                    let us: Vec<String> = cl
                        .iter()
                        .map(|c| format!("{:.15}x{}", c.value, c.multiplicity))
                        .collect();
                    eprintln!("d={d:+.3e}  z={z:.15}  count={c}  roots=[{}]", us.join(", "));
                }
                _ => eprintln!("d={d:+.3e}  z={z:.15}  rc={rc:?}"),
            }
        }
        eprintln!("--- locate_flips direct ---");
        let m_lo = 0.5 * (0.0 + zb);
        let m_hi = 0.5 * (zb + 1.0);
        let out = pipe.locate_flips(&s, zb, m_lo, m_hi);
        eprintln!("locate_flips(zb={zb:.15}, m_lo={m_lo:.6}, m_hi={m_hi:.6}) = {out:?}");
        eprintln!("--- critical_set ---");
        let cs = pipe.critical_set(&s).unwrap();
        for cz in &cs.zs {
            eprintln!("crit z={:.15} mult={} relevant={}", cz.z, cz.multiplicity, cz.relevant);
        }
        eprintln!("counts {:?}", cs.counts);
        eprintln!("--- walk trace (from z_t downward) ---");
        let mut x = 1.25 * SHRINK_PAD;
        while x <= 0.5 * zb {
            let f = pipe.tight_pair_residual(&s, zb - x);
            match f {
                Some(fv) => eprintln!("x={x:.6e}  F={fv:+.8e}"),
                None => {
                    eprintln!("x={x:.6e}  F=None  (stopping)");
                    break;
                }
            }
            x *= SQRT_2;
        }
        eprintln!("--- near_tangencies direct ---");
        let nt = pipe.near_tangencies(&s, zb, -1.0, zb);
        eprintln!("near_tangencies = {nt:?}");
    }

    #[test]
    #[ignore]
    fn debug_micro_05() {
        let pipe = SymPipeline::spin_one_pair().unwrap();
        let s = pipe.slice(-0.5, -1e-6);
        eprintln!("--- critical_set ---");
        let cs = pipe.critical_set(&s).unwrap();
        for cz in &cs.zs {
            eprintln!("crit z={:.15} mult={} relevant={}", cz.z, cz.multiplicity, cz.relevant);
        }
        eprintln!("counts {:?}", cs.counts);
        let guard = cs.all_zs();
        // hunt the explosion in the count-2 piece
        let (lo, hi) = (cs.zs[1].z, cs.zs[2].z);
        eprintln!("--- phi scan over [{lo:.9},{hi:.9}] ---");
        let mut worst = (0.0f64, 0.0f64);
        for k in 0..=400 {
            let z = lo + (hi - lo) * (k as f64) / 400.0 + 1e-9;
            if z >= hi {
                break;
            }
            if let Ok(phi) = pipe.phi_with(&s, &guard, z) {
                if phi > worst.0 {
                    worst = (phi, z);
                }
            }
        }
        eprintln!("coarse worst phi={:.6e} at z={:.15}", worst.0, worst.1);
        // zoom around the worst
        let mut worst2 = (0.0f64, 0.0f64);
        let span = (hi - lo) / 400.0;
        for k in 0..=400 {
            let z = worst.1 - span + 2.0 * span * (k as f64) / 400.0;
            if z <= lo || z >= hi {
                continue;
            }
            if let Ok(phi) = pipe.phi_with(&s, &guard, z) {
                if phi > worst2.0 {
                    worst2 = (phi, z);
                }
            }
        }
        eprintln!("zoom   worst phi={:.6e} at z={:.15}", worst2.0, worst2.1);
        // structure at the peak
        for dz in [-1e-6_f64, -1e-8, 0.0, 1e-8, 1e-6] {
            let z = worst2.1 + dz;
            if let (Ok(c), Ok(cl)) = (s.root_count(z), s.roots01(z)) {
                let us: Vec<String> = cl
                    .iter()
                    .map(|c| format!("{:.15}x{}", c.value, c.multiplicity))
                    .collect();
                let phi = pipe.phi_with(&s, &guard, z).unwrap_or(f64::NAN);
                eprintln!("dz={dz:+.1e}  count={c}  phi={phi:.6e}  roots=[{}]", us.join(", "));
            }
        }
        // signed residual curves of both tight pairs through the upper structure
        eprintln!("--- upper structure: signed residuals of the two pairs ---");
        let z_ref = 0.999999476_f64;
        if let Ok(cl) = s.roots01(z_ref) {
            let us: Vec<String> = cl
                .iter()
                .map(|c| format!("{:.15}x{}", c.value, c.multiplicity))
                .collect();
            eprintln!("roots at z_ref={z_ref}: [{}]", us.join(", "));
        }
        for seed in [0.518_f64, 0.99999_f64] {
            eprintln!("pair seeded at v0={seed}");
            for d in [
                -3e-7_f64, -1e-7, -3e-8, -1e-8, 0.0, 1e-8, 3e-8, 1e-7, 3e-7,
            ] {
                let mut v = seed;
                match pipe.signed_residual(&s, z_ref + d, &mut v) {
                    Some(g) => eprintln!("  d={d:+.1e}  G={g:+.8e}  v={v:.12}"),
                    None => eprintln!("  d={d:+.1e}  G=None"),
                }
            }
        }
    }
}


#[cfg(test)]
mod debug_ramp {
    use super::*;

    #[test]
    #[ignore]
    fn ramp_jitter() {
        let pipe = SymPipeline::spin_one_pair().unwrap();
        for &(p, q, zt) in &[(-3.55, -1e-6, 0.999995752698970_f64), (-0.5, -1e-6, 0.995117699909659)] {
            let s = pipe.slice(p, q);
            let cs = pipe.critical_set(&s).unwrap();
            let guard = cs.all_zs();
            eprintln!("--- (p,q)=({p},{q}) ramp toward z_t={zt:.12} ---");
            for k in [8.0_f64, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0] {
                let x = 10f64.powf(-k);
                let z = zt - x;
                match pipe.phi_with(&s, &guard, z) {
                    Ok(v) => eprintln!("x=1e-{k:.0}  phi={v:.8e}  phi*x={:.6e}", v * x),
                    Err(e) => eprintln!("x=1e-{k:.0}  ERR {e}"),
                }
            }
            eprintln!("  jitter scan at x=1e-4 (relative steps of 1e-6):");
            let base = zt - 1e-4;
            let mut prev = f64::NAN;
            for k in 0..12 {
                let z = base + (k as f64) * 1e-10;
                let v = pipe.phi_with(&s, &guard, z).unwrap();
                let rel = if prev.is_finite() { (v - prev) / v } else { 0.0 };
                eprintln!("    z+{}e-10: phi={v:.12e}  step_rel={rel:+.2e}", k);
                prev = v;
            }
            eprintln!("  jitter scan at x=1e-2:");
            let base = zt - 1e-2;
            let mut prev = f64::NAN;
            for k in 0..8 {
                let z = base + (k as f64) * 1e-8;
                let v = pipe.phi_with(&s, &guard, z).unwrap();
                let rel = if prev.is_finite() { (v - prev) / v } else { 0.0 };
                eprintln!("    z+{}e-8: phi={v:.12e}  step_rel={rel:+.2e}", k);
                prev = v;
            }
        }
    }
}

#[cfg(test)]
mod debug_gk {
    use super::*;

    // Instrumented copy of the adaptive GK driver: returns final segments.
    fn gk15_once<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
        const XGK: [f64; 8] = [
            0.991455371120812639206854697526329,
            0.949107912342758524526189684047851,
            0.864864423359769072789712788640926,
            0.741531185599394439863864773280788,
            0.586087235467691130294144838258730,
            0.405845151377397166906606412076961,
            0.207784955007898467600689403773245,
            0.0,
        ];
        const WGK: [f64; 8] = [
            0.022935322010529224963732008058970,
            0.063092092629978553290700663189204,
            0.104790010322250183839876322541518,
            0.140653259715525918745189590510238,
            0.169004726639267902826583426598550,
            0.190350578064785409913256402421014,
            0.204432940075298892414161999234649,
            0.209482141084727828012999174891714,
        ];
        const WG: [f64; 4] = [
            0.129484966168869693270611432679082,
            0.279705391489276667901467771423780,
            0.381830050505118944950369775488975,
            0.417959183673469387755102040816327,
        ];
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut kron = WGK[7] * fc;
        let mut gauss = WG[3] * fc;
        for j in 0..7 {
            let x = h * XGK[j];
            let fsum = f(c - x) + f(c + x);
            kron += WGK[j] * fsum;
            if j % 2 == 1 {
                gauss += WG[j / 2] * fsum;
            }
        }
        kron *= h;
        gauss *= h;
        (kron, (kron - gauss).abs())
    }

    #[test]
    #[ignore]
    fn gk_segment_autopsy() {
        let pipe = SymPipeline::spin_one_pair().unwrap();
        let (p, q) = (-3.55, -1e-6);
        let s = pipe.slice(p, q);
        let cs = pipe.critical_set(&s).unwrap();
        let guard = cs.all_zs();
        let lo = 0.0_f64;
        let hi = 0.999995752698970_f64 - 1e-8;
        // right-half substitution like integrate_sqrt_endpoints does
        let m = 0.5 * (lo + hi);
        let zeta_max = (hi - m).sqrt();
        let phi = |zz: f64| pipe.phi_with(&s, &guard, zz).unwrap_or(f64::NAN);
        let mut f = |zeta: f64| 2.0 * zeta * phi(hi - zeta * zeta);

        struct Seg { a: f64, b: f64, val: f64, err: f64 }
        let (val, err) = gk15_once(&mut f, 0.0, zeta_max);
        let mut segs = vec![Seg { a: 0.0, b: zeta_max, val, err }];
        const MAX_SEGS: usize = 4000;
        loop {
            let total_err: f64 = segs.iter().map(|s| s.err).sum();
            let total_val: f64 = segs.iter().map(|s| s.val).sum();
            let target = (0.5 * PHI_QUAD_TOL).max(1e-15 * total_val.abs());
            if total_err <= target || segs.len() >= MAX_SEGS {
                break;
            }
            let worst = segs
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            let Seg { a, b, .. } = segs.swap_remove(worst);
            let mid = 0.5 * (a + b);
            if mid == a || mid == b {
                let (val, err) = gk15_once(&mut f, a, b);
                segs.push(Seg { a, b, val, err: err.min(f64::EPSILON * val.abs()) });
                continue;
            }
            let (v1, e1) = gk15_once(&mut f, a, mid);
            let (v2, e2) = gk15_once(&mut f, mid, b);
            segs.push(Seg { a, b: mid, val: v1, err: e1 });
            segs.push(Seg { a: mid, b, val: v2, err: e2 });
        }
        segs.sort_by(|x, y| x.a.partial_cmp(&y.a).unwrap());
        let total_err: f64 = segs.iter().map(|s| s.err).sum();
        eprintln!("segs={} total_err={:.3e}", segs.len(), total_err);
        // histogram of error by decade of seg start
        let mut top: Vec<&Seg> = segs.iter().collect();
        top.sort_by(|x, y| y.err.partial_cmp(&x.err).unwrap());
        for s in top.iter().take(25) {
            eprintln!(
                "  seg [{:.9e},{:.9e}] w={:.2e} val={:+.6e} err={:.2e}",
                s.a, s.b, s.b - s.a, s.val, s.err
            );
        }
    }
}

#[cfg(test)]
mod debug_feature {
    use super::*;

    #[test]
    #[ignore]
    fn feature_zoom() {
        let pipe = SymPipeline::spin_one_pair().unwrap();
        let (p, q) = (-3.55, -1e-6);
        let s = pipe.slice(p, q);
        let cs = pipe.critical_set(&s).unwrap();
        let guard = cs.all_zs();
        let z_star = 0.999995555559988_f64;
        for k in -8..=8 {
            let z = z_star + (k as f64) * 5e-13;
            let cl = s.roots01(z).unwrap();
            let desc: Vec<String> = cl
                .iter()
                .map(|c| format!("{:.12}x{}", c.value, c.multiplicity))
                .collect();
            let gap = if cl.len() == 2 { cl[1].value - cl[0].value } else { f64::NAN };
            let phi = pipe.phi_with(&s, &guard, z).unwrap();
            eprintln!(
                "k={k:+}  z={z:.15}  phi={phi:.10e}  gap={gap:.3e}  [{}]",
                desc.join(", ")
            );
        }
    }
}
