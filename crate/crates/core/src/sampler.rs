//! Haar Monte Carlo over compact-group orbits: draw R uniformly from SO(3),
//! U(3) or USp(3), form diag(α) + R·diag(β)·R†, and histogram the sorted
//! eigenvalues (or their (p,q) image).
//!
//! SO(3) uses Euler angles (φ, ψ uniform, cos θ uniform) so the measure is
//! the normalized Haar measure in the same parametrization as the analytic
//! density computation. U(n) and USp(n) are sampled by Gram–Schmidt
//! orthonormalization of a Gaussian matrix; modified Gram–Schmidt leaves the
//! triangular factor with a positive real diagonal, which is exactly the
//! phase convention that makes the factor Q Haar-distributed.
//!
//! Everything is deterministic given a 64-bit seed: parallel runs split the
//! sample budget into fixed-size chunks, each driven by its own
//! counter-based RNG stream, so the result is independent of thread count.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::domain::{horn_polygon, pq_domain};
use crate::error::{HornError, Result};
use crate::rat::rat_to_f64;
use crate::spectrum::{EnsembleKind, Spectrum};

/// Off-diagonal Frobenius norm threshold (relative) for Jacobi sweeps.
pub const JACOBI_TOL: f64 = 1e-13;
/// Kramers pairs must agree to this relative tolerance before dedup.
pub const KRAMERS_TOL: f64 = 1e-7;
const MAX_SWEEPS: usize = 64;
const MAX_RESAMPLE: usize = 8;
/// Samples per RNG stream; fixed so results don't depend on thread count.
pub const HIST_CHUNK: u64 = 1 << 14;

pub type Mat3 = [[f64; 3]; 3];
pub type CMat = Vec<Vec<C64>>;

// ---------------------------------------------------------------------------
// Gaussian and group sampling
// ---------------------------------------------------------------------------

/// A pair of independent standard normals (Box–Muller).
fn gauss2<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    loop {
        let u: f64 = rng.gen();
        if u > f64::MIN_POSITIVE {
            let v: f64 = rng.gen();
            let r = (-2.0 * u.ln()).sqrt();
            let t = std::f64::consts::TAU * v;
            return (r * t.cos(), r * t.sin());
        }
    }
}

fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// Haar-uniform SO(3) rotation from Euler angles R_z(φ)·R_y(θ)·R_z(ψ) with
/// φ, ψ ~ U[0,2π) and cos θ ~ U[−1,1].
pub fn haar_rotation_3<R: Rng + ?Sized>(rng: &mut R) -> Mat3 {
    let phi = rng.gen::<f64>() * std::f64::consts::TAU;
    let psi = rng.gen::<f64>() * std::f64::consts::TAU;
    let ct = rng.gen::<f64>() * 2.0 - 1.0;
    let st = (1.0 - ct * ct).max(0.0).sqrt();
    let rz = |a: f64| -> Mat3 {
        [[a.cos(), -a.sin(), 0.0], [a.sin(), a.cos(), 0.0], [0.0, 0.0, 1.0]]
    };
    let ry = [[ct, 0.0, st], [0.0, 1.0, 0.0], [-st, 0.0, ct]];
    mat3_mul(&mat3_mul(&rz(phi), &ry), &rz(psi))
}

/// Orthonormalize the columns of `a` in place by modified Gram–Schmidt with
/// one re-orthogonalization pass. The implicit R factor has positive real
/// diagonal, so for Gaussian input the result is Haar.
fn mgs_complex(a: &mut CMat) {
    let n = a.len();
    for k in 0..n {
        for _pass in 0..2 {
            for j in 0..k {
                let mut dot = C64::new(0.0, 0.0);
                for i in 0..n {
                    dot += a[i][j].conj() * a[i][k];
                }
                for i in 0..n {
                    let t = a[i][j] * dot;
                    a[i][k] -= t;
                }
            }
        }
        let norm = (0..n).map(|i| a[i][k].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            a[i][k] /= norm;
        }
    }
}

/// Haar-uniform U(n).
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let mut a: CMat = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let (x, y) = gauss2(rng);
                    C64::new(x, y)
                })
                .collect()
        })
        .collect();
    mgs_complex(&mut a);
    a
}

/// A quaternion w + x·i + y·j + z·k.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const ZERO: Quat = Quat { w: 0.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn real(w: f64) -> Quat {
        Quat { w, x: 0.0, y: 0.0, z: 0.0 }
    }

    pub fn conj(self) -> Quat {
        Quat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn norm_sqr(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn mul(self, o: Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn add(self, o: Quat) -> Quat {
        Quat { w: self.w + o.w, x: self.x + o.x, y: self.y + o.y, z: self.z + o.z }
    }

    pub fn sub(self, o: Quat) -> Quat {
        Quat { w: self.w - o.w, x: self.x - o.x, y: self.y - o.y, z: self.z - o.z }
    }

    pub fn scale(self, s: f64) -> Quat {
        Quat { w: self.w * s, x: self.x * s, y: self.y * s, z: self.z * s }
    }
}

pub type QMat = Vec<Vec<Quat>>;

/// Haar-uniform quaternion-unitary n×n matrix (the compact symplectic group),
/// by quaternionic modified Gram–Schmidt of a quaternion Ginibre matrix.
/// Scalar coefficients multiply columns from the right, respecting
/// non-commutativity.
pub fn haar_quaternion_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> QMat {
    let mut a: QMat = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let (w, x) = gauss2(rng);
                    let (y, z) = gauss2(rng);
                    Quat { w, x, y, z }
                })
                .collect()
        })
        .collect();
    for k in 0..n {
        for _pass in 0..2 {
            for j in 0..k {
                let mut dot = Quat::ZERO;
                for i in 0..n {
                    dot = dot.add(a[i][j].conj().mul(a[i][k]));
                }
                for i in 0..n {
                    let t = a[i][j].mul(dot);
                    a[i][k] = a[i][k].sub(t);
                }
            }
        }
        let norm = (0..n).map(|i| a[i][k].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            a[i][k] = a[i][k].scale(1.0 / norm);
        }
    }
    a
}

/// Embed a quaternion matrix into 2n×2n complex form, each entry
/// w+xi+yj+zk ↦ [[w+xi, y+zi], [−y+zi, w−xi]]. Quaternion-Hermitian inputs
/// embed to complex-Hermitian matrices, and quaternion-unitary inputs embed
/// into USp(2n) ⊂ U(2n).
pub fn embed_quaternion_matrix(q: &[Vec<Quat>]) -> CMat {
    let n = q.len();
    let mut m = vec![vec![C64::new(0.0, 0.0); 2 * n]; 2 * n];
    for i in 0..n {
        for l in 0..q[i].len() {
            let h = q[i][l];
            m[2 * i][2 * l] = C64::new(h.w, h.x);
            m[2 * i][2 * l + 1] = C64::new(h.y, h.z);
            m[2 * i + 1][2 * l] = C64::new(-h.y, h.z);
            m[2 * i + 1][2 * l + 1] = C64::new(h.w, -h.x);
        }
    }
    m
}

/// Haar element of USp(n) as a 2n×2n complex matrix satisfying
/// J·M̄·J⁻¹ = M for the block-diagonal J = diag([[0,1],[−1,0]], …).
pub fn haar_symplectic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    embed_quaternion_matrix(&haar_quaternion_unitary(n, rng))
}

// ---------------------------------------------------------------------------
// Eigensolvers
// ---------------------------------------------------------------------------

/// Cyclic Jacobi for a real symmetric 3×3.
pub fn jacobi_eigenvalues_3(mut a: Mat3) -> Result<[f64; 3]> {
    let fro: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let tol = JACOBI_TOL * fro.max(1.0);
    for _sweep in 0..MAX_SWEEPS {
        let off = (2.0 * (a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2))).sqrt();
        if off <= tol {
            let mut d = [a[0][0], a[1][1], a[2][2]];
            d.sort_by(|x, y| y.partial_cmp(x).unwrap());
            return Ok(d);
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let tau = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = if tau >= 0.0 {
                1.0 / (tau + (1.0 + tau * tau).sqrt())
            } else {
                -1.0 / (-tau + (1.0 + tau * tau).sqrt())
            };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            let app = a[p][p];
            let aqq = a[q][q];
            a[p][p] = app - t * apq;
            a[q][q] = aqq + t * apq;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            for i in 0..3 {
                if i == p || i == q {
                    continue;
                }
                let aip = a[i][p];
                let aiq = a[i][q];
                a[i][p] = c * aip - s * aiq;
                a[p][i] = a[i][p];
                a[i][q] = s * aip + c * aiq;
                a[q][i] = a[i][q];
            }
        }
    }
    Err(HornError::EigenNonConvergence(MAX_SWEEPS))
}

/// Cyclic Jacobi for a complex Hermitian matrix (any small n); returns the
/// eigenvalues sorted descending.
pub fn jacobi_eigenvalues_hermitian(mut a: CMat) -> Result<Vec<f64>> {
    let n = a.len();
    let fro: f64 = a.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let tol = JACOBI_TOL * fro.max(1.0);
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += 2.0 * a[p][q].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            let mut d: Vec<f64> = (0..n).map(|i| a[i][i].re).collect();
            d.sort_by(|x, y| y.partial_cmp(x).unwrap());
            return Ok(d);
        }
        for p in 0..n {
            for q in p + 1..n {
                let r = a[p][q].norm();
                if r == 0.0 {
                    continue;
                }
                let phase = a[p][q] / r;
                let tau = (a[q][q].re - a[p][p].re) / (2.0 * r);
                // Solve t² − 2τt − 1 = 0 for the small-magnitude root.
                let t = if tau >= 0.0 {
                    -1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Columns: V has V[p][p]=c, V[p][q]=−s·phase, V[q][p]=s·conj(phase), V[q][q]=c.
                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = aip * c + aiq * s * phase.conj();
                    a[i][q] = -aip * s * phase + aiq * c;
                }
                // Rows (conjugate transpose action).
                for j in 0..n {
                    let apj = a[p][j];
                    let aqj = a[q][j];
                    a[p][j] = apj * c + aqj * s * phase;
                    a[q][j] = -apj * s * phase.conj() + aqj * c;
                }
                a[p][q] = C64::new(0.0, 0.0);
                a[q][p] = C64::new(0.0, 0.0);
                a[p][p] = C64::new(a[p][p].re, 0.0);
                a[q][q] = C64::new(a[q][q].re, 0.0);
            }
        }
    }
    Err(HornError::EigenNonConvergence(MAX_SWEEPS))
}

/// Collapse the doubly-degenerate spectrum of an embedded quaternionic
/// Hermitian matrix (Kramers pairs) to its n distinct values.
pub fn kramers_dedup(vals: &[f64]) -> Result<Vec<f64>> {
    if vals.len() % 2 != 0 {
        return Err(HornError::InvalidInput("odd spectrum cannot pair".into()));
    }
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut out = Vec::with_capacity(vals.len() / 2);
    for pair in vals.chunks(2) {
        if (pair[0] - pair[1]).abs() > KRAMERS_TOL * scale {
            return Err(HornError::InvalidInput(format!(
                "Kramers pairing violated: {} vs {}",
                pair[0], pair[1]
            )));
        }
        out.push(0.5 * (pair[0] + pair[1]));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Orbit sums
// ---------------------------------------------------------------------------

fn sym2_eigen(a: f64, b: f64, d: f64) -> [f64; 2] {
    let m = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    [m + r, m - r]
}

fn sum_orthogonal<R: Rng + ?Sized>(alpha: &[f64], beta: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    match alpha.len() {
        3 => {
            let r = haar_rotation_3(rng);
            let mut c = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    c[i][j] = (0..3).map(|k| r[i][k] * beta[k] * r[j][k]).sum();
                }
                c[i][i] += alpha[i];
            }
            Ok(jacobi_eigenvalues_3(c)?.to_vec())
        }
        2 => {
            let t = rng.gen::<f64>() * std::f64::consts::TAU;
            let (ct, st) = (t.cos(), t.sin());
            // R diag(β) Rᵀ for R = [[c,−s],[s,c]]
            let a = alpha[0] + beta[0] * ct * ct + beta[1] * st * st;
            let d = alpha[1] + beta[0] * st * st + beta[1] * ct * ct;
            let b = (beta[0] - beta[1]) * ct * st;
            Ok(sym2_eigen(a, b, d).to_vec())
        }
        n => Err(HornError::InvalidInput(format!("unsupported dimension {n}"))),
    }
}

fn sum_unitary<R: Rng + ?Sized>(alpha: &[f64], beta: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let n = alpha.len();
    let u = haar_unitary(n, rng);
    let mut c = vec![vec![C64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for l in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..n {
                s += u[i][k] * beta[k] * u[l][k].conj();
            }
            c[i][l] = s;
        }
        c[i][i] += alpha[i];
    }
    jacobi_eigenvalues_hermitian(c)
}

fn sum_symplectic<R: Rng + ?Sized>(alpha: &[f64], beta: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let n = alpha.len();
    let q = haar_quaternion_unitary(n, rng);
    let mut c = vec![vec![Quat::ZERO; n]; n];
    for i in 0..n {
        for l in 0..n {
            let mut s = Quat::ZERO;
            for k in 0..n {
                s = s.add(q[i][k].scale(beta[k]).mul(q[l][k].conj()));
            }
            c[i][l] = s;
        }
        c[i][i] = c[i][i].add(Quat::real(alpha[i]));
    }
    let vals = jacobi_eigenvalues_hermitian(embed_quaternion_matrix(&c))?;
    kramers_dedup(&vals)
}

/// Counters exposed by the resampling wrapper.
#[derive(Clone, Copy, Debug, Default)]
pub struct SampleDiagnostics {
    /// Draws discarded for eigensolver non-convergence or pairing failure.
    pub resamples: u64,
}

/// One draw of the spectrum of diag(α) + R·diag(β)·R†, sorted descending.
/// Retries (with fresh randomness) on the extremely rare numerical failure,
/// recording the event in `diag`.
pub fn sample_sum_spectrum_diag<R: Rng + ?Sized>(
    alpha: &Spectrum,
    beta: &Spectrum,
    kind: EnsembleKind,
    rng: &mut R,
    diag: &mut SampleDiagnostics,
) -> Result<Spectrum> {
    if alpha.n() != beta.n() {
        return Err(HornError::InvalidInput("spectra must have equal length".into()));
    }
    let (a, b) = (&alpha.values, &beta.values);
    for _ in 0..MAX_RESAMPLE {
        let drawn = match kind {
            EnsembleKind::Orthogonal => sum_orthogonal(a, b, rng),
            EnsembleKind::Unitary => sum_unitary(a, b, rng),
            EnsembleKind::Symplectic => sum_symplectic(a, b, rng),
        };
        match drawn {
            Ok(vals) => return Spectrum::from_f64(vals),
            Err(_) => diag.resamples += 1,
        }
    }
    Err(HornError::EigenNonConvergence(MAX_RESAMPLE))
}

/// [`sample_sum_spectrum_diag`] without the counter.
pub fn sample_sum_spectrum<R: Rng + ?Sized>(
    alpha: &Spectrum,
    beta: &Spectrum,
    kind: EnsembleKind,
    rng: &mut R,
) -> Result<Spectrum> {
    let mut d = SampleDiagnostics::default();
    sample_sum_spectrum_diag(alpha, beta, kind, rng, &mut d)
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

/// Which 2-D projection of the sampled spectrum gets tallied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    /// (γ₁, γ₂) as sampled.
    Gamma,
    /// (p, q) of the traceless shift.
    PQ,
}

/// Fixed-range 2-D tally; bins cover the bounding box of the admissible
/// region, so `total == Σ counts` and `out_of_range` stays zero for
/// correctly configured runs.
#[derive(Clone, Debug, serde::Serialize)]
pub struct Histogram2D {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major tallies, index = iy·nx + ix.
    pub counts: Vec<u64>,
    pub total: u64,
    pub out_of_range: u64,
    pub seed: u64,
}

impl Histogram2D {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, nx: usize, ny: usize, seed: u64) -> Self {
        Histogram2D {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
            nx,
            ny,
            counts: vec![0; nx * ny],
            total: 0,
            out_of_range: 0,
            seed,
        }
    }

    fn axis_index(v: f64, lo: f64, hi: f64, n: usize) -> Option<usize> {
        let collar = 1e-9 * (hi - lo).abs().max(1.0);
        if v < lo - collar || v > hi + collar {
            return None;
        }
        let t = ((v - lo) / (hi - lo) * n as f64).floor();
        Some((t as isize).clamp(0, n as isize - 1) as usize)
    }

    pub fn add(&mut self, x: f64, y: f64) {
        match (
            Self::axis_index(x, self.x_lo, self.x_hi, self.nx),
            Self::axis_index(y, self.y_lo, self.y_hi, self.ny),
        ) {
            (Some(ix), Some(iy)) => {
                self.counts[iy * self.nx + ix] += 1;
                self.total += 1;
            }
            _ => self.out_of_range += 1,
        }
    }

    pub fn count(&self, ix: usize, iy: usize) -> u64 {
        self.counts[iy * self.nx + ix]
    }

    /// (x_lo, x_hi, y_lo, y_hi) of bin (ix, iy).
    pub fn bin_edges(&self, ix: usize, iy: usize) -> (f64, f64, f64, f64) {
        let dx = (self.x_hi - self.x_lo) / self.nx as f64;
        let dy = (self.y_hi - self.y_lo) / self.ny as f64;
        (
            self.x_lo + ix as f64 * dx,
            self.x_lo + (ix + 1) as f64 * dx,
            self.y_lo + iy as f64 * dy,
            self.y_lo + (iy + 1) as f64 * dy,
        )
    }

    pub fn merge(&mut self, other: &Histogram2D) {
        assert_eq!(self.counts.len(), other.counts.len());
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.total += other.total;
        self.out_of_range += other.out_of_range;
    }

    /// CSV with header x_lo,x_hi,y_lo,y_hi,count; x-major row order.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x_lo,x_hi,y_lo,y_hi,count\n");
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                let (a, b, c, d) = self.bin_edges(ix, iy);
                s.push_str(&format!("{a:.12e},{b:.12e},{c:.12e},{d:.12e},{}\n", self.count(ix, iy)));
            }
        }
        s
    }
}

fn histogram_ranges(
    alpha: &Spectrum,
    beta: &Spectrum,
    plane: Plane,
) -> Result<(f64, f64, f64, f64)> {
    match (plane, alpha.n()) {
        (Plane::Gamma, 3) => {
            let hp = horn_polygon(alpha, beta)?;
            let (x0, x1, y0, y1) = hp.bbox_f64();
            Ok(pad_ranges(x0, x1, y0, y1, 1e-9))
        }
        (Plane::Gamma, 2) => {
            let (a, b) = (&alpha.values, &beta.values);
            let sigma = a[0] + a[1] + b[0] + b[1];
            let lo = (a[0] + b[1]).max(a[1] + b[0]).max(sigma / 2.0);
            let hi = a[0] + b[0];
            Ok(pad_ranges(lo, hi, sigma - hi, sigma - lo, 1e-9))
        }
        (Plane::PQ, 3) => {
            let dom = pq_domain(alpha, beta)?;
            let (p0, p1, q0, q1) = dom.bbox(1024);
            Ok(pad_ranges(p0, p1, q0, q1, 1e-4))
        }
        (Plane::PQ, _) => Err(HornError::InvalidInput("pq plane needs n = 3".into())),
        _ => Err(HornError::InvalidInput("unsupported dimension".into())),
    }
}

fn pad_ranges(x0: f64, x1: f64, y0: f64, y1: f64, rel: f64) -> (f64, f64, f64, f64) {
    let px = rel * (x1 - x0).abs().max(1e-9);
    let py = rel * (y1 - y0).abs().max(1e-9);
    (x0 - px, x1 + px, y0 - py, y1 + py)
}

/// Monte Carlo histogram of `n_samples` orbit-sum spectra, deterministic in
/// `seed` and independent of thread count.
pub fn build_histogram(
    alpha: &Spectrum,
    beta: &Spectrum,
    kind: EnsembleKind,
    n_samples: u64,
    plane: Plane,
    bins: (usize, usize),
    seed: u64,
) -> Result<Histogram2D> {
    if n_samples == 0 || bins.0 == 0 || bins.1 == 0 {
        return Err(HornError::InvalidInput("need n_samples ≥ 1 and nonzero bins".into()));
    }
    let (x0, x1, y0, y1) = histogram_ranges(alpha, beta, plane)?;
    let shift = {
        // traceless shift for the pq projection
        let s: f64 = alpha.values.iter().chain(beta.values.iter()).sum();
        s / alpha.n() as f64
    };
    let exact_shift = match (alpha.exact.as_ref(), beta.exact.as_ref()) {
        (Some(a), Some(b)) => {
            let s: crate::rat::Rat = a.iter().sum::<crate::rat::Rat>() + b.iter().sum::<crate::rat::Rat>();
            rat_to_f64(&(s / crate::rat::rat_i64(alpha.n() as i64)))
        }
        _ => shift,
    };
    let n_chunks = (n_samples + HIST_CHUNK - 1) / HIST_CHUNK;
    let run_chunk = |chunk: u64| -> Result<Histogram2D> {
        let mut h = Histogram2D::new(x0, x1, y0, y1, bins.0, bins.1, seed);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        let lo = chunk * HIST_CHUNK;
        let hi = ((chunk + 1) * HIST_CHUNK).min(n_samples);
        let mut diag = SampleDiagnostics::default();
        for _ in lo..hi {
            let g = sample_sum_spectrum_diag(alpha, beta, kind, &mut rng, &mut diag)?;
            match plane {
                Plane::Gamma => h.add(g.values[0], g.values[1]),
                Plane::PQ => {
                    let t: Vec<f64> = g.values.iter().map(|v| v - exact_shift).collect();
                    let p = t[0] * t[1] + t[1] * t[2] + t[2] * t[0];
                    let q = -t[0] * t[1] * t[2];
                    h.add(p, q);
                }
            }
        }
        Ok(h)
    };
    let merged = (0..n_chunks)
        .into_par_iter()
        .map(run_chunk)
        .try_reduce(
            || Histogram2D::new(x0, x1, y0, y1, bins.0, bins.1, seed),
            |mut a, b| {
                a.merge(&b);
                Ok(a)
            },
        )?;
    Ok(merged)
}

// ---------------------------------------------------------------------------
// Unitary eigenangles (diagnostics)
// ---------------------------------------------------------------------------

/// Monic characteristic polynomial coefficients (ascending) via
/// Faddeev–LeVerrier.
fn char_poly(m: &CMat) -> Vec<C64> {
    let n = m.len();
    let tr = |x: &CMat| -> C64 { (0..n).map(|i| x[i][i]).sum() };
    let matmul = |x: &CMat, y: &CMat| -> CMat {
        let mut z = vec![vec![C64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            for j in 0..n {
                z[i][j] = (0..n).map(|k| x[i][k] * y[k][j]).sum();
            }
        }
        z
    };
    let mut coeffs = vec![C64::new(0.0, 0.0); n + 1];
    coeffs[n] = C64::new(1.0, 0.0);
    let mut mk = m.clone();
    for k in 1..=n {
        let ck = -tr(&mk) / k as f64;
        coeffs[n - k] = ck;
        if k < n {
            for i in 0..n {
                mk[i][i] += ck;
            }
            mk = matmul(m, &mk);
        }
    }
    coeffs
}

/// Durand–Kerner roots of a monic polynomial (ascending coefficients).
fn durand_kerner(coeffs: &[C64]) -> Vec<C64> {
    let n = coeffs.len() - 1;
    let eval = |z: C64| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &c in coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    };
    let seed = C64::new(0.4, 0.9);
    let mut z: Vec<C64> = (0..n).map(|i| seed.powu(i as u32 + 1)).collect();
    for _ in 0..200 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut den = C64::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    den *= z[i] - z[j];
                }
            }
            let step = eval(z[i]) / den;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-13 {
            break;
        }
    }
    z
}

/// Eigenvalue arguments of a unitary matrix, sorted ascending in [0, 2π).
pub fn unitary_eigenangles(u: &CMat) -> Vec<f64> {
    let mut angles: Vec<f64> = durand_kerner(&char_poly(u))
        .into_iter()
        .map(|z| z.arg().rem_euclid(std::f64::consts::TAU))
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    angles
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn spec(s: &str) -> Spectrum {
        Spectrum::parse(s).unwrap()
    }

    #[test]
    fn rotation_is_orthogonal_with_unit_det() {
        let mut r = rng(1);
        for _ in 0..200 {
            let m = haar_rotation_3(&mut r);
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-12);
                }
            }
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            assert!((det - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_axis_image_uniform_on_sphere() {
        let mut r = rng(2);
        let n = 100_000usize;
        let mut counts = [0u64; 3]; // v_z > 0.5, > 0.0, > −0.5
        let mut sum_r11 = 0.0;
        for _ in 0..n {
            let m = haar_rotation_3(&mut r);
            let vz = m[2][2]; // (R e_z)_z
            if vz > 0.5 {
                counts[0] += 1;
            }
            if vz > 0.0 {
                counts[1] += 1;
            }
            if vz > -0.5 {
                counts[2] += 1;
            }
            sum_r11 += m[0][0];
        }
        for (c, frac) in counts.iter().zip([0.25, 0.5, 0.75]) {
            let sigma = (n as f64 * frac * (1.0 - frac)).sqrt();
            assert!(
                ((*c as f64) - n as f64 * frac).abs() < 4.0 * sigma,
                "cap fraction {frac}: {c}"
            );
        }
        // Var(R₁₁) = 1/3 for Haar SO(3).
        let sigma_mean = (1.0 / 3.0 / n as f64).sqrt();
        assert!((sum_r11 / n as f64).abs() < 4.0 * sigma_mean);
    }

    #[test]
    fn unitary_is_unitary() {
        let mut r = rng(3);
        for n in [2usize, 3] {
            for _ in 0..100 {
                let u = haar_unitary(n, &mut r);
                for i in 0..n {
                    for j in 0..n {
                        let dot: C64 = (0..n).map(|k| u[k][i].conj() * u[k][j]).sum();
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((dot - want).norm() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn unitary_spacings_reject_poisson() {
        let mut r = rng(4);
        let draws = 10_000usize;
        let mut small = 0u64;
        let mut gaps = 0u64;
        let cut = 0.1 * std::f64::consts::TAU / 3.0; // normalized spacing < 0.1
        for _ in 0..draws {
            let u = haar_unitary(3, &mut r);
            let ang = unitary_eigenangles(&u);
            for k in 0..3 {
                let gap = if k == 2 {
                    ang[0] + std::f64::consts::TAU - ang[2]
                } else {
                    ang[k + 1] - ang[k]
                };
                gaps += 1;
                if gap < cut {
                    small += 1;
                }
            }
        }
        // Independent uniform angles: gap/2π ~ Beta(1,2), so
        // P(normalized gap < 0.1) = 1 − (1 − 0.1/3)².
        let p = 1.0 - (1.0 - 0.1 / 3.0) * (1.0 - 0.1 / 3.0);
        let mean = gaps as f64 * p;
        let sigma = (gaps as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (small as f64) < mean - 4.0 * sigma,
            "no repulsion: {small} small gaps vs Poisson {mean:.0}±{sigma:.0}"
        );
    }

    fn quaternionic_structure_residual(m: &CMat) -> f64 {
        // J·M̄·J⁻¹ = M for block J = diag([[0,1],[−1,0]]).
        let n = m.len();
        let mut worst = 0.0f64;
        for bi in 0..n / 2 {
            for bj in 0..n / 2 {
                let (i, j) = (2 * bi, 2 * bj);
                // (J M̄ Jᵀ·(−1)-block) entries from block algebra:
                let want00 = m[i + 1][j + 1].conj();
                let want01 = -m[i + 1][j].conj();
                let want10 = -m[i][j + 1].conj();
                let want11 = m[i][j].conj();
                worst = worst
                    .max((m[i][j] - want00).norm())
                    .max((m[i][j + 1] - want01).norm())
                    .max((m[i + 1][j] - want10).norm())
                    .max((m[i + 1][j + 1] - want11).norm());
            }
        }
        worst
    }

    #[test]
    fn symplectic_sample_structure() {
        let mut r = rng(5);
        for _ in 0..50 {
            let u = haar_symplectic(3, &mut r);
            let n = 6;
            for i in 0..n {
                for j in 0..n {
                    let dot: C64 = (0..n).map(|k| u[k][i].conj() * u[k][j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - want).norm() < 1e-10);
                }
            }
            assert!(quaternionic_structure_residual(&u) < 1e-10);
            // Conjugate diag(α) ⊗ I₂ and verify self-duality is preserved.
            let alpha = [1.0, 0.0, -1.0];
            let mut s = vec![vec![C64::new(0.0, 0.0); 6]; 6];
            for i in 0..6 {
                for j in 0..6 {
                    s[i][j] = (0..6).map(|k| u[i][k] * alpha[k / 2] * u[j][k].conj()).sum();
                }
            }
            assert!(quaternionic_structure_residual(&s) < 1e-10);
            for i in 0..6 {
                for j in 0..6 {
                    assert!((s[i][j] - s[j][i].conj()).norm() < 1e-10, "hermiticity");
                }
            }
        }
    }

    #[test]
    fn jacobi_real_known_spectrum() {
        let a = [[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]];
        let d = jacobi_eigenvalues_3(a).unwrap();
        let want = [2.0 + std::f64::consts::SQRT_2, 2.0, 2.0 - std::f64::consts::SQRT_2];
        for (x, y) in d.iter().zip(want) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn jacobi_hermitian_matches_real_case() {
        // 2×2 with complex off-diagonal.
        let a = vec![
            vec![C64::new(2.0, 0.0), C64::new(0.0, 1.0)],
            vec![C64::new(0.0, -1.0), C64::new(2.0, 0.0)],
        ];
        let d = jacobi_eigenvalues_hermitian(a).unwrap();
        assert!((d[0] - 3.0).abs() < 1e-13 && (d[1] - 1.0).abs() < 1e-13);
        // Random real symmetric embeds to the same spectrum.
        let mut r = rng(6);
        for _ in 0..50 {
            let mut m = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in i..3 {
                    let (g, _) = gauss2(&mut r);
                    m[i][j] = g;
                    m[j][i] = g;
                }
            }
            let dr = jacobi_eigenvalues_3(m).unwrap();
            let mc: CMat = (0..3)
                .map(|i| (0..3).map(|j| C64::new(m[i][j], 0.0)).collect())
                .collect();
            let dh = jacobi_eigenvalues_hermitian(mc).unwrap();
            for (x, y) in dr.iter().zip(&dh) {
                assert!((x - y).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn beta_zero_returns_alpha_exactly() {
        let alpha = spec("1,0,-1");
        let beta = spec("0,0,0");
        let mut r = rng(7);
        for kind in [EnsembleKind::Orthogonal, EnsembleKind::Unitary, EnsembleKind::Symplectic] {
            let g = sample_sum_spectrum(&alpha, &beta, kind, &mut r).unwrap();
            assert_eq!(g.values, alpha.values, "{kind:?}");
        }
    }

    #[test]
    fn traces_and_horn_containment() {
        let alpha = spec("1,0,-1");
        let beta = spec("1,0,-1");
        let hp = horn_polygon(&alpha, &beta).unwrap();
        let mut r = rng(8);
        for kind in [EnsembleKind::Orthogonal, EnsembleKind::Unitary, EnsembleKind::Symplectic] {
            for _ in 0..2000 {
                let g = sample_sum_spectrum(&alpha, &beta, kind, &mut r).unwrap();
                assert!(g.sum().abs() < 1e-10);
                assert!(
                    hp.contains_f64(g.values[0], g.values[1], 1e-9),
                    "{kind:?}: {:?}",
                    g.values
                );
            }
        }
        // A lopsided pair, too.
        let alpha = spec("11,-1,-10");
        let beta = spec("7,4,-11");
        let hp = horn_polygon(&alpha, &beta).unwrap();
        for kind in [EnsembleKind::Orthogonal, EnsembleKind::Unitary, EnsembleKind::Symplectic] {
            for _ in 0..300 {
                let g = sample_sum_spectrum(&alpha, &beta, kind, &mut r).unwrap();
                assert!((g.sum() - 0.0).abs() < 1e-9);
                assert!(hp.contains_f64(g.values[0], g.values[1], 1e-9));
            }
        }
    }

    #[test]
    fn kramers_pairs_before_dedup() {
        let mut r = rng(9);
        let beta = [2.0, 0.0, -2.0];
        for _ in 0..200 {
            let q = haar_quaternion_unitary(3, &mut r);
            let mut c = vec![vec![Quat::ZERO; 3]; 3];
            for i in 0..3 {
                for l in 0..3 {
                    let mut s = Quat::ZERO;
                    for k in 0..3 {
                        s = s.add(q[i][k].scale(beta[k]).mul(q[l][k].conj()));
                    }
                    c[i][l] = s;
                }
            }
            c[0][0] = c[0][0].add(Quat::real(1.0));
            c[2][2] = c[2][2].add(Quat::real(-1.0));
            let vals = jacobi_eigenvalues_hermitian(embed_quaternion_matrix(&c)).unwrap();
            for pair in vals.chunks(2) {
                assert!((pair[0] - pair[1]).abs() < 1e-8, "{vals:?}");
            }
            assert_eq!(kramers_dedup(&vals).unwrap().len(), 3);
        }
    }

    #[test]
    fn histogram_basics_and_determinism() {
        let alpha = spec("1,0,-1");
        let h1 = build_histogram(
            &alpha,
            &alpha,
            EnsembleKind::Orthogonal,
            1,
            Plane::Gamma,
            (8, 8),
            42,
        )
        .unwrap();
        assert_eq!(h1.total, 1);
        assert_eq!(h1.counts.iter().sum::<u64>(), 1);
        let h2 = build_histogram(
            &alpha,
            &alpha,
            EnsembleKind::Unitary,
            30_000,
            Plane::PQ,
            (20, 20),
            42,
        )
        .unwrap();
        let h3 = build_histogram(
            &alpha,
            &alpha,
            EnsembleKind::Unitary,
            30_000,
            Plane::PQ,
            (20, 20),
            42,
        )
        .unwrap();
        assert_eq!(h2.counts, h3.counts, "same seed must reproduce");
        assert_eq!(h2.total, 30_000);
        assert_eq!(h2.out_of_range, 0, "bins must cover the domain");
        assert_eq!(h2.counts.iter().sum::<u64>(), h2.total);
        let csv = h2.to_csv();
        assert!(csv.starts_with("x_lo,x_hi,y_lo,y_hi,count\n"));
        assert_eq!(csv.lines().count(), 1 + 400);
    }

    #[test]
    fn pq_histogram_symmetric_in_q() {
        let alpha = spec("1,0,-1");
        let h = build_histogram(
            &alpha,
            &alpha,
            EnsembleKind::Orthogonal,
            40_000,
            Plane::PQ,
            (24, 24),
            11,
        )
        .unwrap();
        assert!((h.y_lo + h.y_hi).abs() < 1e-9, "q-range symmetric");
        for ix in 0..24 {
            for iy in 0..24 {
                let a = h.count(ix, iy) as f64;
                let b = h.count(ix, 23 - iy) as f64;
                assert!(
                    (a - b).abs() <= 4.0 * (a + b).max(1.0).sqrt(),
                    "bin ({ix},{iy}): {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn haar_invariance_chi2() {
        // Rotating α's frame by a fixed element must not change the spectrum
        // distribution of A + R B Rᵀ.
        let alpha = [1.0, 0.0, -1.0];
        let beta = [1.0, 0.0, -1.0];
        let mut r = rng(12);
        let r0 = haar_rotation_3(&mut r);
        let mut a_rot = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                a_rot[i][j] = (0..3).map(|k| r0[i][k] * alpha[k] * r0[j][k]).sum();
            }
        }
        let n = 20_000usize;
        let nbins = 14;
        let mut h_base = vec![0u64; nbins];
        let mut h_rot = vec![0u64; nbins];
        let binof = |g1: f64| -> usize {
            (((g1 - 0.0) / 2.0 * nbins as f64).floor() as isize).clamp(0, nbins as isize - 1)
                as usize
        };
        for _ in 0..n {
            let rot = haar_rotation_3(&mut r);
            let mut c1 = [[0.0; 3]; 3];
            let mut c2 = a_rot;
            for i in 0..3 {
                for j in 0..3 {
                    let v: f64 = (0..3).map(|k| rot[i][k] * beta[k] * rot[j][k]).sum();
                    c1[i][j] = v;
                    c2[i][j] += v;
                }
                c1[i][i] += alpha[i];
            }
            let g1 = jacobi_eigenvalues_3(c1).unwrap()[0];
            let g2 = jacobi_eigenvalues_3(c2).unwrap()[0];
            h_base[binof(g1)] += 1;
            h_rot[binof(g2)] += 1;
        }
        // Two-sample χ² with equal totals.
        let mut chi2 = 0.0;
        let mut dof = 0usize;
        for i in 0..nbins {
            let (x, y) = (h_base[i] as f64, h_rot[i] as f64);
            if x + y < 10.0 {
                continue;
            }
            chi2 += (x - y) * (x - y) / (x + y);
            dof += 1;
        }
        let dist = ChiSquared::new((dof - 1) as f64).unwrap();
        let p = 1.0 - dist.cdf(chi2);
        assert!(p > 0.01, "chi2 = {chi2:.2}, dof = {dof}, p = {p:.4}");
    }

    #[test]
    fn n2_sampling_all_ensembles() {
        let alpha = spec("1,-1");
        let mut r = rng(13);
        for kind in [EnsembleKind::Orthogonal, EnsembleKind::Unitary, EnsembleKind::Symplectic] {
            for _ in 0..500 {
                let g = sample_sum_spectrum(&alpha, &alpha, kind, &mut r).unwrap();
                assert!(g.sum().abs() < 1e-10);
                assert!(g.values[0] <= 2.0 + 1e-9 && g.values[0] >= -1e-9, "{:?}", g.values);
            }
        }
        let h = build_histogram(&alpha, &alpha, EnsembleKind::Symplectic, 2_000, Plane::Gamma, (40, 1), 3)
            .unwrap();
        assert_eq!(h.total, 2_000);
        assert_eq!(h.out_of_range, 0);
    }
}
