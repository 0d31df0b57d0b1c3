//! One-dimensional quadrature shared across the crate.
//!
//! Three engines:
//! * adaptive Gauss–Kronrod G7/K15 bisection ([`integrate`], [`integrate_panels`]) —
//!   the workhorse for the nonlocal time integrals (Ψ₀, B₀) and for Γ,
//! * Gauss–Legendre nodes of arbitrary order ([`gauss_legendre`]) — building block for
//!   the S³ product rule and radial shell integrals,
//! * simple composite trapezoid on tabulated data ([`trapezoid`]).
//!
//! The G7/K15 abscissae/weights are the standard QUADPACK constants; exactness on
//! polynomials through degree 22 is asserted in the tests, which would catch any
//! transcription error far above the tolerances used elsewhere.

/// Kronrod-15 abscissae on [0,1] side of the symmetric rule (includes 0).
const XK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
/// Kronrod-15 weights matching `XK`.
const WK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
/// Gauss-7 weights matching the odd-index entries of `XK` (0.949…, 0.741…, 0.405…, 0).
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One G7/K15 panel on [a,b]; returns (kronrod_estimate, |kronrod − gauss|).
fn g7k15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut ik = 0.0;
    let mut ig = 0.0;
    for (i, (&x, &wk)) in XK.iter().zip(WK.iter()).enumerate() {
        if x == 0.0 {
            let fc = f(c);
            ik += wk * fc;
            ig += WG[3] * fc;
        } else {
            let fp = f(c + h * x);
            let fm = f(c - h * x);
            ik += wk * (fp + fm);
            if i % 2 == 1 {
                ig += WG[i / 2] * (fp + fm);
            }
        }
    }
    (ik * h, (ik - ig).abs() * h)
}

/// Adaptive bisection driver. `tol` is treated as an absolute tolerance on the
/// panel error sum, with a relative floor of 1e−14·|I| to avoid over-refining.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // Manual stack of (a, b, estimate, err) panels.
    let (i0, e0) = g7k15(&mut f, a, b);
    let mut stack = vec![(a, b, i0, e0)];
    let mut total = i0;
    let mut total_err = e0;
    let mut depth_guard = 0usize;
    while total_err > tol.max(1e-14 * total.abs()) {
        depth_guard += 1;
        if depth_guard > 20_000 || stack.is_empty() {
            break; // return best effort; callers choose tolerances generously
        }
        // Split the worst panel.
        let (wi, _) = stack
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (pa, pb, pi, pe) = stack.swap_remove(wi);
        let pm = 0.5 * (pa + pb);
        if pm <= pa || pm >= pb {
            // Interval at roundoff resolution; accept its estimate.
            total_err -= pe;
            total += 0.0;
            stack.push((pa, pb, pi, 0.0));
            continue;
        }
        let (il, el) = g7k15(&mut f, pa, pm);
        let (ir, er) = g7k15(&mut f, pm, pb);
        total += il + ir - pi;
        total_err += el + er - pe;
        stack.push((pa, pm, il, el));
        stack.push((pm, pb, ir, er));
    }
    total
}

/// Integrate with interior breakpoints (sorted, clamped, deduplicated internally);
/// used where integrands change analytic character at known locations.
pub fn integrate_panels(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: f64,
) -> f64 {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let per_panel = tol / cuts.len() as f64;
    let mut sum = 0.0;
    for w in cuts.windows(2) {
        sum += integrate(&mut f, w[0], w[1], per_panel);
    }
    sum
}

/// ∫_a^∞ f via the rational substitution x = a + u/(1−u), u ∈ [0,1).
/// Suitable for integrands with algebraic decay ≥ |x|^{−2−ε}.
pub fn integrate_to_inf(mut f: impl FnMut(f64) -> f64, a: f64, tol: f64) -> f64 {
    integrate(
        |u| {
            let om = 1.0 - u;
            let x = a + u / om;
            f(x) / (om * om)
        },
        0.0,
        1.0 - 1e-12,
        tol,
    )
}

/// Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration on P_n.
/// Exact for polynomials of degree ≤ 2n−1 (asserted in tests).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((-x, w));
        if !(n % 2 == 1 && i == m - 1) {
            out.push((x, w));
        } else {
            // Middle node of an odd rule sits at 0; avoid the duplicate.
            out.pop();
            out.push((0.0, w));
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Composite trapezoid over tabulated (x, y) samples (x strictly increasing).
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mut s = 0.0;
    for i in 1..xs.len() {
        s += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    s
}
