//! Numeric quadrature: adaptive Gauss–Kronrod (7/15), a tanh–sinh fallback
//! for stubborn endpoint behaviour, and square-root endpoint substitutions.
//!
//! The density integrands routinely blow up like 1/√(x−a) at subinterval
//! endpoints (band edges, caustic touchpoints), so the workhorse entry point
//! is [`integrate_sqrt_endpoints`]: it splits at the midpoint and substitutes
//! x = a + ζ² (resp. b − ζ²) on each half, turning the singular factor into a
//! smooth one before the adaptive pass. Gauss–Kronrod nodes are interior, so
//! integrands are never evaluated exactly at the endpoints.

/// Nodes/weights for the 15-point Kronrod rule (positive half, descending)
/// with the embedded 7-point Gauss rule on the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
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

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

impl QuadResult {
    fn merge(self, o: QuadResult) -> QuadResult {
        QuadResult {
            value: self.value + o.value,
            abs_err: self.abs_err + o.abs_err,
            evals: self.evals + o.evals,
        }
    }
}

/// One G7/K15 application on [a, b]: returns (kronrod, |kronrod - gauss|).
fn gk15_once<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
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

/// Globally adaptive G7/K15: bisect the interval with the worst error
/// estimate until the summed estimate meets `tol` (absolute, with a relative
/// floor) or the budget runs out.
pub fn gauss_kronrod<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> QuadResult {
    if a == b {
        return QuadResult { value: 0.0, abs_err: 0.0, evals: 0 };
    }
    struct Seg {
        a: f64,
        b: f64,
        val: f64,
        err: f64,
    }
    let (val, err) = gk15_once(&mut f, a, b);
    let mut segs = vec![Seg { a, b, val, err }];
    let mut evals = 15usize;
    const MAX_SEGS: usize = 4000;
    loop {
        let total_val: f64 = segs.iter().map(|s| s.val).sum();
        let total_err: f64 = segs.iter().map(|s| s.err).sum();
        let target = tol.max(1e-15 * total_val.abs());
        if total_err <= target || segs.len() >= MAX_SEGS {
            return QuadResult { value: total_val, abs_err: total_err, evals };
        }
        let worst = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let Seg { a, b, .. } = segs.swap_remove(worst);
        let m = 0.5 * (a + b);
        if m == a || m == b {
            // Can't split further in f64; keep the stale estimate.
            let (val, err) = gk15_once(&mut f, a, b);
            segs.push(Seg { a, b, val, err: err.min(f64::EPSILON * val.abs()) });
            evals += 15;
            continue;
        }
        let (v1, e1) = gk15_once(&mut f, a, m);
        let (v2, e2) = gk15_once(&mut f, m, b);
        evals += 30;
        segs.push(Seg { a, b: m, val: v1, err: e1 });
        segs.push(Seg { a: m, b, val: v2, err: e2 });
    }
}

/// tanh–sinh (double-exponential) quadrature on [a, b]; tolerant of integrable
/// endpoint singularities. Used as a cross-check / fallback where the
/// substitution-based pipeline is awkward.
///
/// Abscissae are passed to `f` as plain x-values, so once nodes get closer to
/// an endpoint than one ulp the singular tail is truncated; for 1/√ endpoint
/// behaviour that caps the accuracy near 1e-7 absolute. The sqrt-substitution
/// path does not have this limitation and is the primary engine.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> QuadResult {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    if r == 0.0 {
        return QuadResult { value: 0.0, abs_err: 0.0, evals: 0 };
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut evals = 0usize;
    let mut eval_at = |t: f64| -> f64 {
        let s = half_pi * t.sinh();
        let x = c + r * s.tanh();
        let w = r * half_pi * t.cosh() / s.cosh().powi(2);
        if !w.is_finite() || w == 0.0 || x <= a.min(b) || x >= a.max(b) {
            return 0.0;
        }
        evals += 1;
        let v = f(x) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };

    const T_MAX: f64 = 4.0;
    let mut h = 1.0;
    let mut sum = eval_at(0.0);
    let mut k = 1;
    while (k as f64) * h <= T_MAX {
        let t = k as f64 * h;
        sum += eval_at(t) + eval_at(-t);
        k += 1;
    }
    let mut prev = sum * h;
    for _level in 0..12 {
        h *= 0.5;
        // Only odd multiples of the new h are new points.
        let mut k = 1;
        while (k as f64) * h <= T_MAX {
            let t = k as f64 * h;
            sum += eval_at(t) + eval_at(-t);
            k += 2;
        }
        let cur = sum * h;
        let err = (cur - prev).abs();
        if err <= tol.max(1e-15 * cur.abs()) {
            return QuadResult { value: cur, abs_err: err, evals };
        }
        prev = cur;
    }
    QuadResult { value: prev, abs_err: f64::NAN, evals }
}

/// ∫_a^b f(x) dx for integrands with (at worst) inverse-square-root behaviour
/// at both endpoints: split at the midpoint and substitute x = a + ζ² on the
/// left half, x = b − ζ² on the right, then run adaptive G7/K15 on each.
pub fn integrate_sqrt_endpoints<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> QuadResult {
    assert!(b >= a, "reversed interval");
    if b == a {
        return QuadResult { value: 0.0, abs_err: 0.0, evals: 0 };
    }
    let m = 0.5 * (a + b);
    let left = gauss_kronrod(
        |z| 2.0 * z * f(a + z * z),
        0.0,
        (m - a).sqrt(),
        0.5 * tol,
    );
    let right = gauss_kronrod(
        |z| 2.0 * z * f(b - z * z),
        0.0,
        (b - m).sqrt(),
        0.5 * tol,
    );
    left.merge(right)
}

/// Like [`integrate_sqrt_endpoints`] but over a list of subdivision points:
/// the integrand may be singular at every break, so each panel gets the
/// two-sided substitution.
pub fn integrate_piecewise_sqrt<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> QuadResult {
    assert!(breaks.len() >= 2, "need at least two breakpoints");
    let panels = breaks.len() - 1;
    let mut acc = QuadResult { value: 0.0, abs_err: 0.0, evals: 0 };
    for w in breaks.windows(2) {
        acc = acc.merge(integrate_sqrt_endpoints(&f, w[0], w[1], tol / panels as f64));
    }
    acc
}
