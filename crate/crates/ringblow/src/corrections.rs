//! Nonlocal corrections to the ring ansatz and their error bookkeeping.
//!
//! The leading ansatz η* U_{λ,ξ} leaves a slowly decaying error whose radial
//! part is E₀ = −α₀ λ̇/(λ²+ρ²).  The first correction Ψ₀ absorbs it through
//! the 4-d radial heat kernel average
//!
//!   Ψ₀(x,t) = −α₀ ∫_{−T}^t λ̇(s) k(ζ, t−s) ds,
//!   k(ζ,τ) = (1 − e^{−ζ²/4τ})/ζ²,   ζ = √(|x−ξ(t)|² + λ²(t)),
//!
//! which satisfies the exact pointwise identity
//!
//!   ∂_t Ψ₀ = ΔΨ₀ + E₀ + ℛ[λ],
//!
//! with the remainder ℛ given in closed form by two further history integrals
//! ([`remainder_r`]); the tests verify this identity against finite
//! differences of the numerically integrated Ψ₀.
//!
//! What the pair (η*U, Ψ₀) still leaves over is split between an inner source
//! 𝒦 ([`inner_source_k`]) supported near the core and an outer source S_out
//! of eleven explicitly grouped terms ([`s_out`]) supported on
//! λR ≤ |x−ξ| ≤ 2δ√(T−t).  The second correction Ψ₁ is the Duhamel integral
//! of S_out against the n-dimensional heat kernel, estimated here by seeded
//! Monte Carlo with Gaussian (heat-kernel) sampling ([`psi1_mc`]), and the
//! same sampler desk-checks the three weighted Duhamel bounds used by the
//! outer barrier argument ([`duhamel_check`]).

use crate::profile::{
    self, bubble_scaled, grad_bubble, grad_bubble_scaled, sub4, dot4, norm4, SelfSimilarCutoff,
    Vec4, ALPHA0,
};
use crate::{quad, special};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Time histories of the modulation parameters (λ, ξ) on [t_entry, t_blowup).
///
/// λ̇ must extend continuously to s < 0 (histories here freeze λ̇ at its t = 0
/// value on [−T, 0)), since the nonlocal integrals reach back to t_entry = −T.
pub trait RingHistory {
    fn lambda(&self, t: f64) -> f64;
    fn dlambda(&self, t: f64) -> f64;
    fn xi(&self, t: f64) -> Vec4;
    fn dxi(&self, t: f64) -> Vec4;
    /// Lower limit of the history integrals (−T).
    fn t_entry(&self) -> f64;
    /// Blow-up time T.
    fn t_blowup(&self) -> f64;
}

// ---------------------------------------------------------------------------
// The kernel k(ζ, τ) and its derivatives
// ---------------------------------------------------------------------------

/// k(ζ,τ) = (1 − e^{−ζ²/4τ})/ζ² = g(x)/(4τ) with x = ζ²/(4τ), g = (1−e^{−x})/x.
pub fn k_heat(zeta: f64, tau: f64) -> f64 {
    debug_assert!(tau > 0.0 && zeta > 0.0);
    special::em1_over_x(zeta * zeta / (4.0 * tau)) / (4.0 * tau)
}

/// ∂_ζ k = ζ g′(x)/(8τ²).
pub fn k_heat_dz(zeta: f64, tau: f64) -> f64 {
    special::em1_over_x_d1(zeta * zeta / (4.0 * tau)) * zeta / (8.0 * tau * tau)
}

/// ∂_ζζ k = ζ² g″(x)/(16τ³) + g′(x)/(8τ²).
pub fn k_heat_dzz(zeta: f64, tau: f64) -> f64 {
    let x = zeta * zeta / (4.0 * tau);
    special::em1_over_x_d2(x) * zeta * zeta / (16.0 * tau * tau * tau)
        + special::em1_over_x_d1(x) / (8.0 * tau * tau)
}

/// ∂_τ k = −e^{−ζ²/4τ}/(4τ²), in closed form independent of the g-family;
/// together with the others this realizes ∂_τ k = ∂_ζζ k + (3/ζ)∂_ζ k.
pub fn k_heat_dt(zeta: f64, tau: f64) -> f64 {
    -(-zeta * zeta / (4.0 * tau)).exp() / (4.0 * tau * tau)
}

// ---------------------------------------------------------------------------
// Ψ₀ and the remainder ℛ
// ---------------------------------------------------------------------------

/// ∫_{−T}^t λ̇(s) K(ζ, t−s) ds with panel breaks at the frozen-history junction
/// s = 0, the half-history point s = 2t−T, and the kernel knee s = t − ζ²/4.
fn history_integral(
    kernel: impl Fn(f64, f64) -> f64,
    zeta: f64,
    t: f64,
    hist: &dyn RingHistory,
    tol: f64,
) -> f64 {
    let t0 = hist.t_entry();
    let breaks = [
        0.0,
        2.0 * t - hist.t_blowup(),
        t - zeta * zeta / 4.0,
    ];
    quad::integrate_panels(|s| hist.dlambda(s) * kernel(zeta, t - s), t0, t, &breaks, tol)
}

/// Similarity radius ζ = √(ρ² + λ²(t)) for ρ = |x − ξ(t)|.
pub fn zeta_of(rho: f64, lambda: f64) -> f64 {
    (rho * rho + lambda * lambda).sqrt()
}

/// First correction Ψ₀ at 4-d distance ρ from the ring center.
pub fn psi0(rho: f64, t: f64, hist: &dyn RingHistory, tol: f64) -> f64 {
    let zeta = zeta_of(rho, hist.lambda(t));
    -ALPHA0 * history_integral(k_heat, zeta, t, hist, tol)
}

/// (Ψ₀, ∂_ζΨ₀) in one call; ∂_ζΨ₀ = −α₀ ∫ λ̇ k_ζ ds drives all spatial
/// derivatives through ∇ζ = (x−ξ)/ζ.
pub fn psi0_pair(rho: f64, t: f64, hist: &dyn RingHistory, tol: f64) -> (f64, f64) {
    let zeta = zeta_of(rho, hist.lambda(t));
    (
        -ALPHA0 * history_integral(k_heat, zeta, t, hist, tol),
        -ALPHA0 * history_integral(k_heat_dz, zeta, t, hist, tol),
    )
}

/// ∂_ρ Ψ₀ = ∂_ζΨ₀ · ρ/ζ.
pub fn psi0_drho(rho: f64, t: f64, hist: &dyn RingHistory, tol: f64) -> f64 {
    let zeta = zeta_of(rho, hist.lambda(t));
    -ALPHA0 * history_integral(k_heat_dz, zeta, t, hist, tol) * rho / zeta
}

/// Remainder of the Ψ₀ construction,
///
///   ℛ[λ](x,t) = α₀ ((x−ξ)·ξ̇ − λλ̇)/(λ(1+|y|²)^{1/2}) ∫ λ̇ k_ζ ds
///             + α₀ /(λ(1+|y|²)^{3/2}) ∫ λ̇ (−ζ k_ζζ + k_ζ) ds,
///
/// y = (x−ξ)/λ, both integrals over s ∈ (−T, t).  Note λ(1+|y|²)^{1/2} = ζ
/// and λ(1+|y|²)^{3/2} = ζ³/λ², so ℛ is exactly ∂_tΨ₀ − ΔΨ₀ − E₀.
pub fn remainder_r(x: Vec4, t: f64, hist: &dyn RingHistory, tol: f64) -> f64 {
    let lam = hist.lambda(t);
    let dlam = hist.dlambda(t);
    let xi = hist.xi(t);
    let dxi = hist.dxi(t);
    let d = sub4(x, xi);
    let zeta = zeta_of(norm4(d), lam);
    let j1 = history_integral(k_heat_dz, zeta, t, hist, tol);
    let j2 = history_integral(
        |z, tau| -z * k_heat_dzz(z, tau) + k_heat_dz(z, tau),
        zeta,
        t,
        hist,
        tol,
    );
    ALPHA0 * (dot4(d, dxi) - lam * dlam) / zeta * j1 + ALPHA0 * lam * lam / zeta.powi(3) * j2
}

/// Inner source collected near the core,
///
///   𝒦[λ,ξ] = η* [ 2α₀λ⁻²λ̇/(1+|y|²)² + λ⁻²∇U(y)·ξ̇
///                + (n−4) λ⁻²∂_{y₁}U(y)/r − ℛ[λ] ],
///
/// where 2α₀λ⁻²λ̇/(1+|y|²)² is what is left of the dilation term after E₀ is
/// removed: λ⁻²λ̇ Z₅(y) − E₀ = 2α₀λ⁻²λ̇/(1+|y|²)².
pub fn inner_source_k(
    x: Vec4,
    t: f64,
    hist: &dyn RingHistory,
    delta: f64,
    n: usize,
    tol: f64,
) -> f64 {
    let lam = hist.lambda(t);
    let dlam = hist.dlambda(t);
    let xi = hist.xi(t);
    let dxi = hist.dxi(t);
    let t_rem = hist.t_blowup() - t;
    let cut = SelfSimilarCutoff { xi, xi_dot: dxi, delta, t_rem };
    let eta_s = cut.value(x);
    if eta_s == 0.0 {
        return 0.0;
    }
    let d = sub4(x, xi);
    let y = [d[0] / lam, d[1] / lam, d[2] / lam, d[3] / lam];
    let il2 = 1.0 / (lam * lam);
    let y2 = dot4(y, y);
    let dilation_rest = 2.0 * ALPHA0 * il2 * dlam / ((1.0 + y2) * (1.0 + y2));
    let gy = grad_bubble(y);
    let translation = il2 * dot4(gy, dxi);
    let drift = (n as f64 - 4.0) * il2 * gy[0] / x[0];
    eta_s * (dilation_rest + translation + drift - remainder_r(x, t, hist, tol))
}

// ---------------------------------------------------------------------------
// Outer source S_out
// ---------------------------------------------------------------------------

/// Shared context for the outer error evaluation: dimension n, cutoff width δ,
/// core radius exponent (R = λ^{−β}), the parameter history, and the
/// quadrature tolerance for the embedded Ψ₀ evaluations.
pub struct OuterSourceCtx<'a> {
    pub n: usize,
    pub delta: f64,
    pub beta: f64,
    pub hist: &'a dyn RingHistory,
    pub quad_tol: f64,
}

impl OuterSourceCtx<'_> {
    /// Core radius R(t) = λ(t)^{−β}.
    pub fn r_cap(&self, t: f64) -> f64 {
        self.hist.lambda(t).powf(-self.beta)
    }
}

/// The eleven grouped terms of the outer error source, in order:
///  0: U_{λ,ξ} Δη*                      1: −U_{λ,ξ} ∂_tη*
///  2: 2∇η*·∇U_{λ,ξ}                    3: (η*³−η*) U_{λ,ξ}³
///  4: (n−4)/r · U_{λ,ξ} ∂_rη*          5: (n−4)/r · Ψ₀ ∂_rη*
///  6: Ψ₀ Δη*                           7: 2∇η*·∇Ψ₀
///  8: −Ψ₀ ∂_tη*                        9: (n−4)/r · η*(1−η_R) ∂_rΨ₀
/// 10: η*(1−η_R) [λ⁻²∇U(y)·ξ̇ + (n−4)λ⁻²∂_{y₁}U(y)/r]
///
/// All terms vanish outside λR ≤ |x−ξ| ≤ 2δ√(T−t).
#[derive(Debug, Clone, Copy)]
pub struct SOutTerms {
    pub terms: [f64; 11],
}

impl SOutTerms {
    pub fn total(&self) -> f64 {
        self.terms.iter().sum()
    }
}

pub fn s_out(x: Vec4, t: f64, ctx: &OuterSourceCtx) -> SOutTerms {
    let hist = ctx.hist;
    let t_rem = hist.t_blowup() - t;
    let lam = hist.lambda(t);
    let xi = hist.xi(t);
    let dxi = hist.dxi(t);
    let d = sub4(x, xi);
    let rho = norm4(d);
    let r_core = lam * ctx.r_cap(t);
    let cut = SelfSimilarCutoff { xi, xi_dot: dxi, delta: ctx.delta, t_rem };
    let q = cut.q(x);
    // Outside the self-similar shell everything carries an η* factor that is
    // zero; in the untouched core (q ≤ 1 and ρ ≤ λR) all derivative terms and
    // both (1−η_R) tails vanish.  Skip the Ψ₀ quadratures in either case.
    if q >= 2.0 || (q <= 1.0 && rho <= r_core) {
        return SOutTerms { terms: [0.0; 11] };
    }

    let eta_s = cut.value(x);
    let g_eta = cut.grad(x);
    let lap_eta = cut.laplacian(x);
    let dt_eta = cut.dt(x);
    let eta_r = profile::eta(rho / r_core);
    let nm4 = ctx.n as f64 - 4.0;
    let r = x[0];

    let ul = bubble_scaled(x, lam, xi);
    let gul = grad_bubble_scaled(x, lam, xi);

    let (p0, p0_dz) = psi0_pair(rho, t, hist, ctx.quad_tol);
    let zeta = zeta_of(rho, lam);
    let grad_p0 = {
        let c = p0_dz / zeta;
        [c * d[0], c * d[1], c * d[2], c * d[3]]
    };

    let y = [d[0] / lam, d[1] / lam, d[2] / lam, d[3] / lam];
    let gy = grad_bubble(y);
    let il2 = 1.0 / (lam * lam);
    let tail_modulation = il2 * dot4(gy, dxi) + nm4 * il2 * gy[0] / r;

    let terms = [
        ul * lap_eta,
        -ul * dt_eta,
        2.0 * dot4(g_eta, gul),
        (eta_s * eta_s * eta_s - eta_s) * ul * ul * ul,
        nm4 / r * ul * g_eta[0],
        nm4 / r * p0 * g_eta[0],
        p0 * lap_eta,
        2.0 * dot4(g_eta, grad_p0),
        -p0 * dt_eta,
        nm4 / r * eta_s * (1.0 - eta_r) * grad_p0[0],
        eta_s * (1.0 - eta_r) * tail_modulation,
    ];
    SOutTerms { terms }
}

// ---------------------------------------------------------------------------
// Heat-kernel Monte Carlo
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Embed the reduced point (r, z) into R^n: r along the first axis of the
/// R^{n−3} block, z occupying the last three coordinates.
fn lift(x: Vec4, n: usize) -> [f64; 7] {
    let mut w = [0.0; 7];
    w[0] = x[0];
    w[n - 3] = x[1];
    w[n - 2] = x[2];
    w[n - 1] = x[3];
    w
}

/// Reduce w ∈ R^n back to (r, z) with r = |w′|.
fn reduce(w: &[f64; 7], n: usize) -> Vec4 {
    let mut r2 = 0.0;
    for wi in w.iter().take(n - 3) {
        r2 += wi * wi;
    }
    [r2.sqrt(), w[n - 3], w[n - 2], w[n - 1]]
}

/// Monte-Carlo value of the Duhamel integral ψ(x,t) = ∫₀ᵗ∫ G_n(x−w,τ) f(w,t−τ),
/// sampling τ uniformly on (0,t) and w from the heat kernel itself
/// (w = x + √(2τ)N).  The estimator is (t/M) Σ f; for f ≡ 1 it returns t with
/// zero variance.
pub fn heat_duhamel_value(
    x: Vec4,
    t: f64,
    n: usize,
    f: &mut dyn FnMut(Vec4, f64) -> f64,
    samples: usize,
    seed: u64,
) -> McEstimate {
    assert!((5..=7).contains(&n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xf = lift(x, n);
    // Accumulate deviations from the first sample so that a constant
    // integrand yields exactly zero variance (no cancellation noise).
    let mut shift = 0.0;
    let mut sum_d = 0.0;
    let mut sum_d2 = 0.0;
    for i in 0..samples {
        let v: f64 = rng.random();
        let tau = t * v;
        let sd = (2.0 * tau).sqrt();
        let mut w = xf;
        for wi in w.iter_mut().take(n) {
            let g: f64 = StandardNormal.sample(&mut rng);
            *wi += sd * g;
        }
        let val = t * f(reduce(&w, n), t - tau);
        if i == 0 {
            shift = val;
        }
        let d = val - shift;
        sum_d += d;
        sum_d2 += d * d;
    }
    let m = samples as f64;
    let mean_d = sum_d / m;
    let var = ((sum_d2 - m * mean_d * mean_d) / (m - 1.0)).max(0.0);
    McEstimate { value: shift + mean_d, std_error: (var / m).sqrt() }
}

/// Monte-Carlo gradient of the same Duhamel integral, in the reduced
/// directions [∂_r, ∂_{z1}, ∂_{z2}, ∂_{z3}].  Uses ∇_xG = (w−x)/(2τ)·G and
/// the substitution τ = t v² so the estimator √(2t)·N·f has finite variance
/// even though |∇G| is not integrable at τ = 0 alone.
pub fn heat_duhamel_grad(
    x: Vec4,
    t: f64,
    n: usize,
    f: &mut dyn FnMut(Vec4, f64) -> f64,
    samples: usize,
    seed: u64,
) -> (Vec4, Vec4) {
    assert!((5..=7).contains(&n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xf = lift(x, n);
    // Reduced components live on axes [0, n−3, n−2, n−1] of the lifted point.
    let axes = [0, n - 3, n - 2, n - 1];
    let mut sum = [0.0; 4];
    let mut sum2 = [0.0; 4];
    let c = (2.0 * t).sqrt();
    for _ in 0..samples {
        let v: f64 = rng.random();
        let tau = t * v * v;
        let sd = (2.0 * tau).sqrt();
        let mut w = xf;
        let mut gauss = [0.0; 7];
        for i in 0..n {
            let g: f64 = StandardNormal.sample(&mut rng);
            gauss[i] = g;
            w[i] += sd * g;
        }
        let fv = f(reduce(&w, n), t - tau);
        for (k, &ax) in axes.iter().enumerate() {
            // The score c·N is zero-mean, so no shift is needed here.
            let val = c * gauss[ax] * fv;
            sum[k] += val;
            sum2[k] += val * val;
        }
    }
    let m = samples as f64;
    let mut grad = [0.0; 4];
    let mut se = [0.0; 4];
    for k in 0..4 {
        let mean = sum[k] / m;
        let var = ((sum2[k] - m * mean * mean) / (m - 1.0)).max(0.0);
        grad[k] = mean;
        se[k] = (var / m).sqrt();
    }
    (grad, se)
}

/// Second correction Ψ₁: the Duhamel integral of the outer source, with the
/// reduced integrand lifted to R^n by symmetry.  Seeded and reproducible.
pub fn psi1_mc(
    x: Vec4,
    t: f64,
    ctx: &OuterSourceCtx,
    samples: usize,
    seed: u64,
) -> McEstimate {
    let mut f = |w: Vec4, s: f64| {
        if w[0] < 1e-12 {
            0.0
        } else {
            s_out(w, s, ctx).total()
        }
    };
    heat_duhamel_value(x, t, ctx.n, &mut f, samples, seed)
}

// ---------------------------------------------------------------------------
// Weighted Duhamel desk checks
// ---------------------------------------------------------------------------

/// Which right-hand-side weight to propagate through the heat flow:
/// `InnerBall`  — λ^{ν−3}R^{−2−α} on |w−ξ| ≤ 2λR,
/// `Annulus`    — λ^{ν₂}/|w−ξ|² on λR ≤ |w−ξ| ≤ 2δ√(T−s),
/// `Constant`   — 1 everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    InnerBall,
    Annulus,
    Constant,
}

#[derive(Debug, Clone)]
pub struct DuhamelConfig {
    pub n: usize,
    pub nu: f64,
    pub nu2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    /// Hölder split exponent μ ∈ (0,2); the time-Hölder exponent is γ = 1−μ/2.
    pub holder_mu: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ClauseCheck {
    pub name: String,
    /// max over the sample set of (|estimate| − 3·std_error)₊ / bound.
    pub fitted_c: f64,
    /// Same constant fitted with half the Monte-Carlo budget.
    pub fitted_c_half: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DuhamelReport {
    pub kind: String,
    pub clauses: Vec<ClauseCheck>,
    pub pass: bool,
}

fn source_weight(
    kind: SourceKind,
    w: Vec4,
    s: f64,
    cfg: &DuhamelConfig,
    hist: &dyn RingHistory,
) -> f64 {
    match kind {
        SourceKind::Constant => 1.0,
        SourceKind::InnerBall => {
            let lam = hist.lambda(s);
            let r_cap = lam.powf(-cfg.beta);
            let d = norm4(sub4(w, hist.xi(s)));
            if d <= 2.0 * lam * r_cap {
                lam.powf(cfg.nu - 3.0) * r_cap.powf(-2.0 - cfg.alpha)
            } else {
                0.0
            }
        }
        SourceKind::Annulus => {
            let lam = hist.lambda(s);
            let r_cap = lam.powf(-cfg.beta);
            let d = norm4(sub4(w, hist.xi(s)));
            let hi = 2.0 * cfg.delta * (hist.t_blowup() - s).max(0.0).sqrt();
            if d >= lam * r_cap && d <= hi {
                lam.powf(cfg.nu2) / (d * d)
            } else {
                0.0
            }
        }
    }
}

struct ClauseSample {
    value: f64,
    sigma: f64,
    bound: f64,
}

fn fit_c(samples: &[ClauseSample]) -> f64 {
    samples
        .iter()
        .map(|s| (s.value.abs() - 3.0 * s.sigma).max(0.0) / s.bound)
        .fold(0.0, f64::max)
}

/// Desk-scale check of one weighted Duhamel lemma: estimate ψ, ∇ψ and their
/// time differences on a grid of ring-relative points and times, divide by
/// the claimed envelope, and report the fitted constants at full and half
/// Monte-Carlo budget.  A clause passes when the constant is finite and
/// stable under halving (or is negligibly small).
pub fn duhamel_check(
    kind: SourceKind,
    cfg: &DuhamelConfig,
    hist: &dyn RingHistory,
) -> DuhamelReport {
    let t_end = hist.t_blowup();
    let logt = t_end.ln().abs();
    let times: Vec<f64> = [0.3, 0.6, 0.9, 0.99].iter().map(|f| f * t_end).collect();
    let gamma = 1.0 - cfg.holder_mu / 2.0;

    // Ring-relative evaluation offsets: core center, core edge, shell, far field.
    let offsets = |t: f64| -> Vec<Vec4> {
        let lam = hist.lambda(t);
        let lr = lam * lam.powf(-cfg.beta);
        let shell = cfg.delta * (t_end - t).sqrt();
        vec![
            [0.0, 0.0, 0.0, 0.0],
            [lr, 0.0, 0.0, 0.0],
            [-0.5 * lr, 0.5 * lr, 0.0, 0.0],
            [shell, 0.0, 0.0, 0.0],
            [0.0, 1.5 * shell, 0.0, 0.0],
        ]
    };

    let lam_at = |t: f64| hist.lambda(t);
    let r_at = |t: f64| hist.lambda(t).powf(-cfg.beta);

    // Envelopes for each clause, per lemma.  `t` is the evaluation time,
    // `dt` the time separation where applicable.
    let value_bound = |t: f64| -> f64 {
        match kind {
            SourceKind::InnerBall => {
                let e1 = cfg.nu - 2.0 + 4.0 / cfg.n as f64;
                let e2 = -2.0 - cfg.alpha + 8.0 / cfg.n as f64;
                lam_at(0.0).powf(e1) * r_at(0.0).powf(e2) * logt
            }
            SourceKind::Annulus => lam_at(0.0).powf(cfg.nu2 - 1.0) * r_at(0.0).powf(-2.0) * logt,
            SourceKind::Constant => t,
        }
    };
    let tdiff_bound = |t: f64| -> f64 {
        match kind {
            SourceKind::InnerBall => {
                let e1 = cfg.nu - 2.0 + 4.0 / cfg.n as f64;
                let e2 = -2.0 - cfg.alpha + 8.0 / cfg.n as f64;
                lam_at(t).powf(e1) * r_at(t).powf(e2) * (t_end - t).ln().abs()
            }
            SourceKind::Annulus => {
                // For the annulus the T-difference clause applies to ∇ψ.
                lam_at(t).powf(cfg.nu2 - 1.5) * r_at(t).powf(-2.0) * (t_end - t).ln().abs()
            }
            SourceKind::Constant => (t_end - t) * (t_end - t).ln().abs(),
        }
    };
    let grad_bound = |t: f64| -> f64 {
        match kind {
            SourceKind::InnerBall => {
                let e1 = cfg.nu - 2.5 + 2.0 / cfg.n as f64;
                let e2 = -2.0 - cfg.alpha + 4.0 / cfg.n as f64;
                lam_at(0.0).powf(e1) * r_at(0.0).powf(e2) * logt
            }
            SourceKind::Annulus => lam_at(t).powf(cfg.nu2 - 2.0) * r_at(t).powf(-2.0) * t.sqrt(),
            SourceKind::Constant => t_end.sqrt(),
        }
    };
    let holder_bound = |t2: f64, dt: f64| -> f64 {
        match kind {
            SourceKind::InnerBall => {
                lam_at(t2).powf(cfg.nu + cfg.holder_mu / 2.0 - 3.0)
                    * r_at(t2).powf(-2.0 - cfg.alpha)
                    * dt.powf(1.0 - cfg.holder_mu / 2.0)
            }
            SourceKind::Annulus => {
                lam_at(t2).powf(cfg.nu2 - 1.0 - gamma) * r_at(t2).powf(-2.0) * dt.powf(gamma)
            }
            SourceKind::Constant => dt * dt.ln().abs(),
        }
    };

    let run = |samples: usize, seed_shift: u64| -> Vec<(String, Vec<ClauseSample>)> {
        let mut value_samples = Vec::new();
        let mut tdiff_samples = Vec::new();
        let mut grad_samples = Vec::new();
        let mut holder_samples = Vec::new();
        for (it, &t) in times.iter().enumerate() {
            let xi = hist.xi(t);
            for (ix, off) in offsets(t).iter().enumerate() {
                let x = [
                    (xi[0] + off[0]).max(1e-6),
                    xi[1] + off[1],
                    xi[2] + off[2],
                    xi[3] + off[3],
                ];
                let base = cfg.seed
                    .wrapping_add(seed_shift)
                    .wrapping_add(1000 * it as u64 + 10 * ix as u64);
                let mut fsrc = |w: Vec4, s: f64| source_weight(kind, w, s, cfg, hist);

                // ψ(x,t) and ψ(x,T) with common random numbers.
                let est_t = heat_duhamel_value(x, t, cfg.n, &mut fsrc, samples, base);
                let est_end = heat_duhamel_value(x, t_end, cfg.n, &mut fsrc, samples, base);
                value_samples.push(ClauseSample {
                    value: est_t.value,
                    sigma: est_t.std_error,
                    bound: value_bound(t),
                });

                match kind {
                    SourceKind::Annulus => {
                        // ∇ψ(t) − ∇ψ(T), common random numbers.
                        let (g_t, se_t) = heat_duhamel_grad(x, t, cfg.n, &mut fsrc, samples, base);
                        let (g_e, se_e) =
                            heat_duhamel_grad(x, t_end, cfg.n, &mut fsrc, samples, base);
                        let diff = [
                            g_t[0] - g_e[0],
                            g_t[1] - g_e[1],
                            g_t[2] - g_e[2],
                            g_t[3] - g_e[3],
                        ];
                        let mag = dot4(diff, diff).sqrt();
                        let sig = (dot4(se_t, se_t) + dot4(se_e, se_e)).sqrt();
                        tdiff_samples.push(ClauseSample {
                            value: mag,
                            sigma: sig,
                            bound: tdiff_bound(t),
                        });
                        grad_samples.push(ClauseSample {
                            value: dot4(g_t, g_t).sqrt(),
                            sigma: dot4(se_t, se_t).sqrt(),
                            bound: grad_bound(t),
                        });
                    }
                    _ => {
                        tdiff_samples.push(ClauseSample {
                            value: est_t.value - est_end.value,
                            sigma: (est_t.std_error.powi(2) + est_end.std_error.powi(2)).sqrt(),
                            bound: tdiff_bound(t),
                        });
                        let (g_t, se_t) = heat_duhamel_grad(x, t, cfg.n, &mut fsrc, samples, base);
                        grad_samples.push(ClauseSample {
                            value: dot4(g_t, g_t).sqrt(),
                            sigma: dot4(se_t, se_t).sqrt(),
                            bound: grad_bound(t),
                        });
                    }
                }

                for frac in [0.1, 0.01] {
                    let dt = frac * (t_end - t);
                    let t1 = t - dt;
                    if t1 <= 0.0 {
                        continue;
                    }
                    let est_1 = heat_duhamel_value(x, t1, cfg.n, &mut fsrc, samples, base);
                    holder_samples.push(ClauseSample {
                        value: est_t.value - est_1.value,
                        sigma: (est_t.std_error.powi(2) + est_1.std_error.powi(2)).sqrt(),
                        bound: holder_bound(t, dt),
                    });
                }
            }
        }
        let tdiff_name = if kind == SourceKind::Annulus { "grad-T-diff" } else { "T-diff" };
        vec![
            ("value".to_string(), value_samples),
            (tdiff_name.to_string(), tdiff_samples),
            ("grad".to_string(), grad_samples),
            ("holder".to_string(), holder_samples),
        ]
    };

    let full = run(cfg.samples, 0);
    let half = run(cfg.samples / 2, 7_777_777);
    let mut clauses = Vec::new();
    let mut all_pass = true;
    for ((name, fs), (_, hs)) in full.into_iter().zip(half.into_iter()) {
        let c_full = fit_c(&fs);
        let c_half = fit_c(&hs);
        // Stable under halving the budget, or negligible against the envelope.
        let small = c_full < 0.01 && c_half < 0.01;
        let stable = c_full.is_finite()
            && c_half.is_finite()
            && (small || (c_half <= 2.5 * c_full + 1e-300 && c_full <= 2.5 * c_half + 1e-300));
        all_pass &= stable;
        clauses.push(ClauseCheck { name, fitted_c: c_full, fitted_c_half: c_half, pass: stable });
    }
    DuhamelReport {
        kind: match kind {
            SourceKind::InnerBall => "inner-ball".to_string(),
            SourceKind::Annulus => "annulus".to_string(),
            SourceKind::Constant => "constant".to_string(),
        },
        clauses,
        pass: all_pass,
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
