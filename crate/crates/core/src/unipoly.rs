//! Numeric univariate polynomials and robust real-root isolation for the low
//! degrees the pipelines produce (quartics in u, degree-8 discriminant factors
//! in z).
//!
//! Isolation is companion-free: critical points come from recursing on the
//! derivative, each monotonic span is bisected, and simple roots get a Newton
//! polish. Even-order roots show up as critical points where the value
//! vanishes at tolerance; nearby roots merge into clusters below `tau_cluster`.

use crate::error::{HornError, Result};

pub const TAU_ROOT: f64 = 1e-10;
pub const TAU_CLUSTER: f64 = 1e-7;
pub const TAU_TRIM: f64 = 1e-13;

/// Univariate polynomial with `f64` coefficients, ascending degree.
#[derive(Clone, Debug)]
pub struct UniPolyNumeric {
    pub coeffs: Vec<f64>,
    /// Number of high-degree coefficients dropped by the trimming pass
    /// (nonzero means the caller handed us an ill-conditioned leading term).
    pub trimmed: usize,
}

/// A real root together with its multiplicity; `multiplicity > 1` either from
/// an even-order tangency or from distinct roots closer than `tau_cluster`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootCluster {
    pub value: f64,
    pub multiplicity: usize,
}

impl UniPolyNumeric {
    /// Build from ascending coefficients, trimming leading terms whose
    /// magnitude is below `tau_trim` relative to the largest coefficient.
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self::with_trim(coeffs, TAU_TRIM)
    }

    pub fn with_trim(mut coeffs: Vec<f64>, tau_trim: f64) -> Self {
        let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut trimmed = 0;
        while let Some(&last) = coeffs.last() {
            if coeffs.len() > 1 && last.abs() <= tau_trim * scale {
                coeffs.pop();
                trimmed += 1;
            } else {
                break;
            }
        }
        UniPolyNumeric { coeffs, trimmed }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Value and first derivative in one Horner pass.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let mut p = 0.0;
        let mut dp = 0.0;
        for &c in self.coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    }

    /// Σ |c_k| |x|^k — the natural magnitude scale for zero tests at x.
    pub fn eval_scale(&self, x: f64) -> f64 {
        let ax = x.abs().max(1e-300);
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * ax + c.abs();
        }
        acc.max(f64::MIN_POSITIVE)
    }

    pub fn derivative(&self) -> UniPolyNumeric {
        if self.coeffs.len() <= 1 {
            return UniPolyNumeric { coeffs: vec![0.0], trimmed: 0 };
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c)
            .collect();
        UniPolyNumeric { coeffs, trimmed: 0 }
    }

    /// Value-level zero test: |f(x)| is indistinguishable from 0 once the
    /// evaluation noise of the alternating-sum is accounted for. The floor is
    /// deliberately independent of the root-location tolerance — a polynomial
    /// with strong cancellation has eval_scale far above its actual values,
    /// and a fixed relative tolerance there would swallow genuine extrema.
    fn is_root_at(&self, x: f64) -> bool {
        let floor = 256.0 * (self.coeffs.len() as f64) * f64::EPSILON;
        self.eval(x).abs() <= floor * self.eval_scale(x)
    }

    /// Multiplicity of a (putative) root at x via the derivative chain.
    fn multiplicity_at(&self, x: f64) -> usize {
        let mut m = 0;
        let mut p = self.clone();
        while m < self.coeffs.len() && p.is_root_at(x) {
            m += 1;
            p = p.derivative();
        }
        m
    }

    /// All real roots in `[lo - tau_root, hi + tau_root]`, ascending, with
    /// near-coincident roots merged into multiplicity clusters.
    pub fn real_roots_in_interval(&self, lo: f64, hi: f64, tau_root: f64) -> Result<Vec<RootCluster>> {
        self.real_roots_clustered(lo, hi, tau_root, TAU_CLUSTER)
    }

    pub fn real_roots_clustered(
        &self,
        lo: f64,
        hi: f64,
        tau_root: f64,
        tau_cluster: f64,
    ) -> Result<Vec<RootCluster>> {
        if self.is_identically_zero() {
            return Err(HornError::ZeroPolynomial);
        }
        assert!(lo <= hi, "empty interval");
        let lo = lo - tau_root;
        let hi = hi + tau_root;
        let raw = self.isolate(lo, hi, tau_root);
        Ok(cluster_roots(raw, tau_cluster))
    }

    /// Raw (root, multiplicity) list before clustering.
    fn isolate(&self, lo: f64, hi: f64, tau: f64) -> Vec<(f64, usize)> {
        if self.coeffs.len() <= 1 {
            return Vec::new();
        }
        if self.coeffs.len() == 2 {
            // a + b x
            let root = -self.coeffs[0] / self.coeffs[1];
            if root >= lo && root <= hi {
                return vec![(root, 1)];
            }
            return Vec::new();
        }
        let deriv = self.derivative();
        let crit: Vec<f64> = deriv
            .isolate(lo, hi, tau)
            .into_iter()
            .map(|(x, _)| x)
            .collect();

        let mut breaks = Vec::with_capacity(crit.len() + 2);
        breaks.push(lo);
        for c in crit {
            if c > *breaks.last().unwrap() {
                breaks.push(c);
            }
        }
        if hi > *breaks.last().unwrap() {
            breaks.push(hi);
        }

        let mut roots: Vec<(f64, usize)> = Vec::new();
        // Roots sitting exactly at breakpoints (critical points or endpoints).
        for (i, &b) in breaks.iter().enumerate() {
            if self.is_root_at(b) {
                let interior = i > 0 && i + 1 < breaks.len();
                let m = if interior { self.multiplicity_at(b).max(2) } else { 1 };
                roots.push((b, m));
            }
        }
        // One simple root per monotonic span with a strict sign change.
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let fa = self.eval(a);
            let fb = self.eval(b);
            let root_a = self.is_root_at(a);
            let root_b = self.is_root_at(b);
            if root_a || root_b {
                continue;
            }
            if fa.signum() != fb.signum() {
                let x = self.bisect_newton(a, b);
                roots.push((x, 1));
            }
        }
        roots.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
        roots
    }

    /// Bisection to a tight bracket, then guarded Newton polishing; the
    /// bracket guarantees we never leave [a, b].
    fn bisect_newton(&self, mut a: f64, mut b: f64) -> f64 {
        let mut fa = self.eval(a);
        if fa == 0.0 {
            return a;
        }
        if fa > 0.0 {
            std::mem::swap(&mut a, &mut b);
            fa = self.eval(a);
            debug_assert!(fa <= 0.0);
        }
        // a maps below zero, b above (possibly a > b as numbers).
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if mid == a || mid == b {
                break;
            }
            let fm = self.eval(mid);
            if fm == 0.0 {
                return mid;
            }
            if fm < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let mut x = 0.5 * (a + b);
        let (span_lo, span_hi) = if a < b { (a, b) } else { (b, a) };
        for _ in 0..6 {
            let (p, dp) = self.eval_with_derivative(x);
            if dp == 0.0 {
                break;
            }
            let next = x - p / dp;
            if !(span_lo..=span_hi).contains(&next) {
                break;
            }
            if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
                x = next;
                break;
            }
            x = next;
        }
        x
    }
}

fn cluster_roots(raw: Vec<(f64, usize)>, tau_cluster: f64) -> Vec<RootCluster> {
    let mut out: Vec<RootCluster> = Vec::new();
    for (x, m) in raw {
        match out.last_mut() {
            Some(last) if (x - last.value).abs() < tau_cluster => {
                // Merge into the existing cluster at the multiplicity-weighted mean.
                let total = last.multiplicity + m;
                last.value =
                    (last.value * last.multiplicity as f64 + x * m as f64) / total as f64;
                last.multiplicity = total;
            }
            _ => out.push(RootCluster { value: x, multiplicity: m }),
        }
    }
    out
}
