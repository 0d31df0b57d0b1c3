//! Dimension-reduced simulator for u_t = Δu + u³ with an O(n−3)×O(3)
//! symmetric ring ansatz.
//!
//! Coordinates: r = |x'| (x' ∈ R^{n−3}) and s = |z| (z ∈ R³), so
//!
//!   u_t = u_rr + (n−4)/r · u_r + u_ss + (2/s) u_s + u³,
//!
//! on (r, s) ∈ [0, R_r] × [0, R_s] with even symmetry across both axes
//! (r → 0 gives (n−3) u_rr, s → 0 gives 3 u_ss) and homogeneous Dirichlet
//! data on the outer sides.  The ring concentrates at (ξ_r, 0); the local
//! profile is the 4D bubble in ρ = √((r−ξ_r)² + s²).
//!
//! Time stepping is a Lie splitting per step: explicit cubic, then backward
//! Euler in r (Thomas solves row by row), then backward Euler in s.  The
//! grid is a tensor product of graded axes with factor-2 refinement bands
//! around the ring (neighbor ratio ≤ 2) and is rebuilt when the extracted
//! center drifts off the fine patch or the core resolution degrades.
//!
//! The module also contains the linearized inner evolution: the radial
//! backward-Euler flow of φ_t = λ^{−2}(L_m φ + h + c z_m) for the mode-0 and
//! mode-1 components, where c is the projection coefficient that removes the
//! kernel direction z_m from the source over a fixed ball.

use crate::corrections::{psi0, RingHistory};
use crate::profile::{self, Vec4, ALPHA0};
use crate::reduced_dynamics::{dlambda_star, lambda_star, xi_r_star};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Graded tensor grid
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Grid2D {
    pub r: Vec<f64>,
    pub s: Vec<f64>,
}

/// Build one graded axis on [x_min, x_max]: spacing h0 within |x−c| ≤ w,
/// doubling for each further band |x−c| ≤ 2^k w, capped at base_h.  Snapping
/// to the endpoints merges any short final cell, so neighbor ratios stay ≤ 2.
pub fn graded_axis(x_min: f64, x_max: f64, c: f64, h0: f64, w: f64, base_h: f64) -> Vec<f64> {
    assert!(x_min <= c && c <= x_max && h0 > 0.0 && base_h >= h0 && w > 0.0);
    // A center within one fine cell of an endpoint leaves no interior node to
    // absorb the short boundary cell; snap it onto the endpoint instead (the
    // center stays resolved to within h0).
    let c = if c - x_min < h0 {
        x_min
    } else if x_max - c < h0 {
        x_max
    } else {
        c
    };
    let spacing = |d: f64| -> f64 {
        if d < w {
            h0
        } else {
            let k = ((d / w).log2().floor() as i32 + 1).max(1);
            (h0 * f64::powi(2.0, k)).min(base_h)
        }
    };
    // March outward from c to `to`.  Growth is rate-limited to 2× the previous
    // cell (a wide cell can otherwise step across a whole doubling band, or the
    // base_h cap can sit between bands, breaking the ratio bound), and the
    // boundary cell is merged into a midpoint split when short, keeping every
    // neighbor ratio within [½, 2].
    let march = |to: f64| -> Vec<f64> {
        if (to - c).abs() < 1e-300 {
            return Vec::new();
        }
        let dir = (to - c).signum();
        let mut xs: Vec<f64> = Vec::new();
        let mut x = c;
        let mut prev_h = f64::INFINITY;
        loop {
            let h = spacing((x - c).abs()).min(2.0 * prev_h);
            x += dir * h;
            if dir * (to - x) <= 1e-12 * (1.0 + to.abs()) {
                break;
            }
            xs.push(x);
            prev_h = h;
        }
        if let Some(&prev) = xs.last() {
            let prev2 = if xs.len() >= 2 { xs[xs.len() - 2] } else { c };
            if (to - prev).abs() < 0.5 * (prev - prev2).abs() {
                let k = xs.len();
                xs[k - 1] = 0.5 * (prev2 + to);
            }
        }
        xs.push(to);
        xs
    };
    let mut axis: Vec<f64> = march(x_min).into_iter().rev().collect();
    axis.push(c);
    axis.extend(march(x_max));
    axis
}

impl Grid2D {
    pub fn nr(&self) -> usize {
        self.r.len()
    }
    pub fn ns(&self) -> usize {
        self.s.len()
    }

    /// FNV-1a over the coordinate bit patterns; identifies a grid in
    /// snapshot headers.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for &x in self.r.iter().chain(self.s.iter()) {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }

    pub fn max_neighbor_ratio(&self) -> f64 {
        let ratio = |xs: &[f64]| -> f64 {
            let mut m = 1.0_f64;
            for i in 1..xs.len() - 1 {
                let (a, b) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
                m = m.max(a / b).max(b / a);
            }
            m
        };
        ratio(&self.r).max(ratio(&self.s))
    }
}

/// Scalar field sampled on a [`Grid2D`]; row-major with r fastest.
#[derive(Debug, Clone)]
pub struct Field2D {
    pub nr: usize,
    pub ns: usize,
    pub v: Vec<f64>,
}

impl Field2D {
    pub fn zeros(g: &Grid2D) -> Field2D {
        Field2D { nr: g.nr(), ns: g.ns(), v: vec![0.0; g.nr() * g.ns()] }
    }
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.v[j * self.nr + i]
    }
    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.v[j * self.nr + i]
    }
    pub fn max_abs(&self) -> f64 {
        self.v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
    }

    /// Bilinear sample (clamped to the grid box).
    pub fn sample(&self, g: &Grid2D, r: f64, s: f64) -> f64 {
        let locate = |xs: &[f64], x: f64| -> (usize, f64) {
            let x = x.clamp(xs[0], *xs.last().unwrap());
            let i = xs.partition_point(|&v| v < x).clamp(1, xs.len() - 1);
            ((i - 1), (x - xs[i - 1]) / (xs[i] - xs[i - 1]))
        };
        let (i, a) = locate(&g.r, r);
        let (j, b) = locate(&g.s, s);
        self.at(i, j) * (1.0 - a) * (1.0 - b)
            + self.at(i + 1, j) * a * (1.0 - b)
            + self.at(i, j + 1) * (1.0 - a) * b
            + self.at(i + 1, j + 1) * a * b
    }
}

// ---------------------------------------------------------------------------
// Stencils and tridiagonal machinery
// ---------------------------------------------------------------------------

/// Nonuniform three-point coefficients of d²/dx² + (drift/x) d/dx at interior
/// node i of axis xs: returns (sub, diag, sup).
fn stencil(xs: &[f64], i: usize, drift: f64) -> (f64, f64, f64) {
    let hm = xs[i] - xs[i - 1];
    let hp = xs[i + 1] - xs[i];
    let x = xs[i];
    let (d2m, d2c, d2p) = (
        2.0 / (hm * (hm + hp)),
        -2.0 / (hm * hp),
        2.0 / (hp * (hm + hp)),
    );
    let (d1m, d1c, d1p) = (
        -hp / (hm * (hm + hp)),
        (hp - hm) / (hm * hp),
        hm / (hp * (hm + hp)),
    );
    let g = drift / x;
    (d2m + g * d1m, d2c + g * d1c, d2p + g * d1p)
}

/// Solve a tridiagonal system in place (Thomas).  `sub[i]` multiplies x_{i−1}
/// in row i, `sup[i]` multiplies x_{i+1}.
fn solve_tridiag(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    rhs[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = d[i] - c[i] * rhs[i + 1];
    }
}

/// Explicit application of the full spatial operator Δ_{(r,s)} (with the
/// (n−4)/r and 2/s drifts and the axis rules); boundary rows are left at 0.
pub fn apply_operator(g: &Grid2D, u: &Field2D, n: usize) -> Field2D {
    let mut out = Field2D::zeros(g);
    let drift_r = n as f64 - 4.0;
    for j in 1..g.ns() - 1 {
        for i in 1..g.nr() - 1 {
            let (ar, br, cr) = stencil(&g.r, i, drift_r);
            let (as_, bs, cs) = stencil(&g.s, j, 2.0);
            *out.at_mut(i, j) = ar * u.at(i - 1, j)
                + (br + bs) * u.at(i, j)
                + cr * u.at(i + 1, j)
                + as_ * u.at(i, j - 1)
                + cs * u.at(i, j + 1);
        }
    }
    // r = 0 axis: (n−3) u_rr with even symmetry.
    for j in 1..g.ns() - 1 {
        let h = g.r[1] - g.r[0];
        let urr = 2.0 * (u.at(1, j) - u.at(0, j)) / (h * h);
        let (as_, bs, cs) = stencil(&g.s, j, 2.0);
        *out.at_mut(0, j) = (n as f64 - 3.0) * urr
            + as_ * u.at(0, j - 1)
            + bs * u.at(0, j)
            + cs * u.at(0, j + 1);
    }
    // s = 0 axis: 3 u_ss with even symmetry.
    for i in 1..g.nr() - 1 {
        let h = g.s[1] - g.s[0];
        let uss = 2.0 * (u.at(i, 1) - u.at(i, 0)) / (h * h);
        let (ar, br, cr) = stencil(&g.r, i, n as f64 - 4.0);
        *out.at_mut(i, 0) =
            3.0 * uss + ar * u.at(i - 1, 0) + br * u.at(i, 0) + cr * u.at(i + 1, 0);
    }
    // Corner (0,0): (n−3) u_rr + 3 u_ss.
    {
        let hr = g.r[1] - g.r[0];
        let hs = g.s[1] - g.s[0];
        *out.at_mut(0, 0) = (n as f64 - 3.0) * 2.0 * (u.at(1, 0) - u.at(0, 0)) / (hr * hr)
            + 3.0 * 2.0 * (u.at(0, 1) - u.at(0, 0)) / (hs * hs);
    }
    out
}

/// One backward-Euler sweep of the r-direction operator: solve
/// (I − dt (∂rr + (n−4)/r ∂r)) out = in, row by row (Dirichlet at r = R_r).
fn sweep_r(g: &Grid2D, field: &mut Field2D, dt: f64, n: usize) {
    let nr = g.nr();
    let drift = n as f64 - 4.0;
    let mut sub = vec![0.0; nr];
    let mut diag = vec![1.0; nr];
    let mut sup = vec![0.0; nr];
    // Axis row i = 0: (n−3)·u_rr with ghost u_{−1} = u_1.
    let h0 = g.r[1] - g.r[0];
    diag[0] = 1.0 + dt * (n as f64 - 3.0) * 2.0 / (h0 * h0);
    sup[0] = -dt * (n as f64 - 3.0) * 2.0 / (h0 * h0);
    for i in 1..nr - 1 {
        let (a, b, c) = stencil(&g.r, i, drift);
        sub[i] = -dt * a;
        diag[i] = 1.0 - dt * b;
        sup[i] = -dt * c;
    }
    // Dirichlet at the outer side: identity row.
    sub[nr - 1] = 0.0;
    diag[nr - 1] = 1.0;

    let mut row = vec![0.0; nr];
    for j in 0..g.ns() {
        for i in 0..nr {
            row[i] = field.at(i, j);
        }
        row[nr - 1] = 0.0;
        solve_tridiag(&sub, &diag, &sup, &mut row);
        for i in 0..nr {
            *field.at_mut(i, j) = row[i];
        }
    }
}

/// Same for the s-direction (drift 2/s, axis rule 3 u_ss at s = 0).
fn sweep_s(g: &Grid2D, field: &mut Field2D, dt: f64) {
    let ns = g.ns();
    let mut sub = vec![0.0; ns];
    let mut diag = vec![1.0; ns];
    let mut sup = vec![0.0; ns];
    let h0 = g.s[1] - g.s[0];
    diag[0] = 1.0 + dt * 3.0 * 2.0 / (h0 * h0);
    sup[0] = -dt * 3.0 * 2.0 / (h0 * h0);
    for j in 1..ns - 1 {
        let (a, b, c) = stencil(&g.s, j, 2.0);
        sub[j] = -dt * a;
        diag[j] = 1.0 - dt * b;
        sup[j] = -dt * c;
    }
    sub[ns - 1] = 0.0;
    diag[ns - 1] = 1.0;

    let mut col = vec![0.0; ns];
    for i in 0..field.nr {
        for j in 0..ns {
            col[j] = field.at(i, j);
        }
        col[ns - 1] = 0.0;
        solve_tridiag(&sub, &diag, &sup, &mut col);
        for j in 0..ns {
            *field.at_mut(i, j) = col[j];
        }
    }
}

/// One linear step (both implicit sweeps, no reaction) — exposed for the
/// heat-kernel validation tests.
pub fn step_linear(g: &Grid2D, field: &mut Field2D, dt: f64, n: usize) {
    sweep_r(g, field, dt, n);
    sweep_s(g, field, dt);
}

/// One full Lie-split step: explicit cubic, then the two implicit sweeps.
pub fn step(g: &Grid2D, field: &mut Field2D, dt: f64, n: usize) {
    for v in field.v.iter_mut() {
        *v += dt * *v * *v * *v;
    }
    step_linear(g, field, dt, n);
}

// ---------------------------------------------------------------------------
// Parameter extraction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ExtractedParams {
    pub u_max: f64,
    pub r_hat: f64,
    pub s_hat: f64,
    /// λ̂ = α₀ / u_max.
    pub lambda_hat: f64,
}

fn parabola_vertex(x: [f64; 3], f: [f64; 3]) -> (f64, f64) {
    // Quadratic through three points; returns (x*, f(x*)).
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let d0 = f[0] / ((x0 - x1) * (x0 - x2));
    let d1 = f[1] / ((x1 - x0) * (x1 - x2));
    let d2 = f[2] / ((x2 - x0) * (x2 - x1));
    let a = d0 + d1 + d2;
    let b = -(d0 * (x1 + x2) + d1 * (x0 + x2) + d2 * (x0 + x1));
    let c = d0 * x1 * x2 + d1 * x0 * x2 + d2 * x0 * x1;
    if a >= 0.0 {
        return (x1, f[1]);
    }
    let xv = -b / (2.0 * a);
    (xv, c - b * b / (4.0 * a))
}

/// Locate the ring: parabolic refinement of the grid argmax along r (at the
/// max row) and along s; λ̂ is read off the refined peak value.
pub fn extract_params(g: &Grid2D, u: &Field2D) -> ExtractedParams {
    let (mut bi, mut bj, mut bv) = (0, 0, f64::NEG_INFINITY);
    for j in 0..g.ns() {
        for i in 0..g.nr() {
            if u.at(i, j) > bv {
                bv = u.at(i, j);
                bi = i;
                bj = j;
            }
        }
    }
    let (mut r_hat, mut peak_r) = (g.r[bi], bv);
    if bi > 0 && bi + 1 < g.nr() {
        let (x, v) = parabola_vertex(
            [g.r[bi - 1], g.r[bi], g.r[bi + 1]],
            [u.at(bi - 1, bj), u.at(bi, bj), u.at(bi + 1, bj)],
        );
        r_hat = x;
        peak_r = v;
    }
    let (mut s_hat, mut peak) = (g.s[bj], peak_r);
    if bj > 0 && bj + 1 < g.ns() {
        let (x, v) = parabola_vertex(
            [g.s[bj - 1], g.s[bj], g.s[bj + 1]],
            [u.at(bi, bj - 1), u.at(bi, bj), u.at(bi, bj + 1)],
        );
        s_hat = x;
        peak = peak_r - (u.at(bi, bj) - v);
    } else if bj == 0 && g.ns() > 1 {
        // Ring sits on the s-axis: even reflection gives vertex at s = 0.
        s_hat = 0.0;
    }
    let u_max = peak.max(bv);
    ExtractedParams { u_max, r_hat, s_hat, lambda_hat: ALPHA0 / u_max }
}

// ---------------------------------------------------------------------------
// Initial data and the driver
// ---------------------------------------------------------------------------

/// Scaled leading-order history: λ(t) = κ λ*(t), ξ = (ξ_r*, 0).
pub struct ScaledStarHistory {
    pub t_end: f64,
    pub n: usize,
    pub kappa: f64,
}

impl RingHistory for ScaledStarHistory {
    fn lambda(&self, t: f64) -> f64 {
        if t < 0.0 {
            self.kappa * (lambda_star(0.0, self.t_end) + t * dlambda_star(0.0, self.t_end))
        } else {
            self.kappa * lambda_star(t, self.t_end)
        }
    }
    fn dlambda(&self, t: f64) -> f64 {
        self.kappa * dlambda_star(t.max(0.0), self.t_end)
    }
    fn xi(&self, t: f64) -> Vec4 {
        [xi_r_star(t, self.t_end, self.n), 0.0, 0.0, 0.0]
    }
    fn dxi(&self, t: f64) -> Vec4 {
        [
            -(self.n as f64 - 4.0) / xi_r_star(t, self.t_end, self.n),
            0.0,
            0.0,
            0.0,
        ]
    }
    fn t_entry(&self) -> f64 {
        -self.t_end
    }
    fn t_blowup(&self) -> f64 {
        self.t_end
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    /// Ansatz blow-up time T.
    pub t_end: f64,
    pub t0: f64,
    pub t_stop: f64,
    pub delta: f64,
    pub a_star: f64,
    /// Initial amplitude: λ(t₀) = κ λ*(t₀).
    pub kappa: f64,
    /// Cells across the core diameter 2λ (≥ 8 enforced).
    pub core_cells: usize,
    /// Coarse spacing cap, relative to the initial ring radius.
    pub base_h_rel: f64,
    /// Outer boundary at this multiple of ξ_r(t₀).
    pub domain_factor: f64,
    pub cfl: f64,
    pub dt_max: f64,
    pub u_cap: f64,
    pub include_psi0: bool,
    /// Accepted for interface completeness; the Ψ₁ layer is not added to the
    /// initial data (see README).
    pub include_psi1: bool,
    pub snapshot_times: Vec<f64>,
    pub max_steps: usize,
    /// Check drift/resolution and possibly regrid every this many steps.
    pub regrid_every: usize,
}

impl SimConfig {
    /// Desk-scale default: n = 5, T = 0.05, δ = 0.3, κ = √2, 20% horizon.
    pub fn desk(n: usize) -> SimConfig {
        SimConfig {
            n,
            t_end: 0.05,
            t0: 0.0,
            t_stop: 0.01,
            delta: 0.3,
            a_star: -1.0,
            kappa: std::f64::consts::SQRT_2,
            core_cells: 8,
            base_h_rel: 0.15,
            domain_factor: 4.0,
            cfl: 0.2,
            dt_max: 5e-4,
            u_cap: 1e6,
            include_psi0: true,
            include_psi1: false,
            snapshot_times: vec![],
            max_steps: 200_000,
            regrid_every: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum StopReason {
    ReachedHorizon,
    AmplitudeCap,
    DtUnderflow,
    Diverged,
    StepBudget,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct DiagRow {
    pub t: f64,
    pub dt: f64,
    pub u_max: f64,
    pub r_hat: f64,
    pub s_hat: f64,
    pub lambda_hat: f64,
}

pub struct Snapshot {
    pub t: f64,
    pub grid: Grid2D,
    pub field: Field2D,
}

pub struct SimResult {
    pub rows: Vec<DiagRow>,
    pub stop: StopReason,
    pub grid: Grid2D,
    pub field: Field2D,
    pub snapshots: Vec<Snapshot>,
    pub lambda0: f64,
    pub xi_r0: f64,
}

fn build_grid(cfg: &SimConfig, center_r: f64, lambda: f64) -> Grid2D {
    let xi0 = xi_r_star(cfg.t0, cfg.t_end, cfg.n);
    let r_max = cfg.domain_factor * xi0;
    let s_max = 0.5 * cfg.domain_factor * xi0;
    let h0 = 2.0 * lambda / cfg.core_cells as f64;
    let w = 4.0 * lambda;
    let base_h = cfg.base_h_rel * xi0;
    Grid2D {
        r: graded_axis(0.0, r_max, center_r.clamp(0.0, r_max), h0, w, base_h),
        s: graded_axis(0.0, s_max, 0.0, h0, w, base_h),
    }
}

/// Ansatz evaluation: u₀ = η*(U_{λ,ξ} + Ψ₀) + a*·envelope, with the plateau
/// envelope η(ρ/(2δ√T)) covering the near-ring region.
pub fn build_initial_data(cfg: &SimConfig, g: &Grid2D, hist: &dyn RingHistory) -> Result<Field2D> {
    let t0 = cfg.t0;
    let lam = hist.lambda(t0);
    let xi_r = hist.xi(t0)[0];
    // Core resolution guard: ≥ core_cells grid cells across [ξ_r−λ, ξ_r+λ].
    // The window ends are compared with a tolerance because the marched grid
    // points land within a few ulp of them.
    let tol = 1e-9 * lam;
    let in_core = g
        .r
        .windows(2)
        .filter(|p| p[0] >= xi_r - lam - tol && p[1] <= xi_r + lam + tol)
        .count();
    if in_core < cfg.core_cells {
        return Err(Error::Config(format!(
            "initial grid resolves the core with {in_core} cells; need at least {}",
            cfg.core_cells
        )));
    }
    let cut_scale = cfg.delta * (cfg.t_end - t0).sqrt();
    let env_scale = 2.0 * cfg.delta * cfg.t_end.sqrt();
    let mut u = Field2D::zeros(g);
    for (j, &s) in g.s.iter().enumerate() {
        for (i, &r) in g.r.iter().enumerate() {
            if i + 1 == g.nr() || j + 1 == g.ns() {
                continue; // Dirichlet sides
            }
            let rho = ((r - xi_r).powi(2) + s * s).sqrt();
            let eta = profile::eta(rho / cut_scale);
            let mut core = 0.0;
            if eta > 0.0 {
                let y = rho / lam;
                core = profile::bubble_radial(y) / lam;
                if cfg.include_psi0 {
                    core += psi0(rho, t0, hist, 1e-9);
                }
                core *= eta;
            }
            let env = cfg.a_star * profile::eta(rho / env_scale);
            *u.at_mut(i, j) = core + env;
        }
    }
    Ok(u)
}

fn bilinear_transfer(old_g: &Grid2D, old_f: &Field2D, new_g: &Grid2D) -> Field2D {
    let mut f = Field2D::zeros(new_g);
    for (j, &s) in new_g.s.iter().enumerate() {
        for (i, &r) in new_g.r.iter().enumerate() {
            *f.at_mut(i, j) = old_f.sample(old_g, r, s);
        }
    }
    // Re-impose the Dirichlet sides.
    for j in 0..new_g.ns() {
        *f.at_mut(new_g.nr() - 1, j) = 0.0;
    }
    for i in 0..new_g.nr() {
        *f.at_mut(i, new_g.ns() - 1) = 0.0;
    }
    f
}

/// Run the ring blow-up from the corrected ansatz.
pub fn run_blowup(cfg: &SimConfig) -> Result<SimResult> {
    let hist = ScaledStarHistory { t_end: cfg.t_end, n: cfg.n, kappa: cfg.kappa };
    let lambda0 = hist.lambda(cfg.t0);
    let xi_r0 = hist.xi(cfg.t0)[0];
    let mut grid = build_grid(cfg, xi_r0, lambda0);
    let mut field = build_initial_data(cfg, &grid, &hist)?;

    let mut rows = Vec::new();
    let mut snapshots = Vec::new();
    let mut snap_idx = 0;
    let mut t = cfg.t0;
    let mut stop = StopReason::StepBudget;
    for step_no in 0..cfg.max_steps {
        let ex = extract_params(&grid, &field);
        if !ex.u_max.is_finite() {
            stop = StopReason::Diverged;
            break;
        }
        let dt = (cfg.cfl / (ex.u_max * ex.u_max))
            .min(cfg.dt_max)
            .min(cfg.t_stop - t);
        rows.push(DiagRow {
            t,
            dt,
            u_max: ex.u_max,
            r_hat: ex.r_hat,
            s_hat: ex.s_hat,
            lambda_hat: ex.lambda_hat,
        });
        if snap_idx < cfg.snapshot_times.len() && t >= cfg.snapshot_times[snap_idx] {
            snapshots.push(Snapshot { t, grid: grid.clone(), field: field.clone() });
            snap_idx += 1;
        }
        if t >= cfg.t_stop - 1e-18 {
            stop = StopReason::ReachedHorizon;
            break;
        }
        if ex.u_max > cfg.u_cap {
            stop = StopReason::AmplitudeCap;
            break;
        }
        if dt < 1e-14 {
            stop = StopReason::DtUnderflow;
            break;
        }
        step(&grid, &mut field, dt, cfg.n);
        t += dt;

        if step_no % cfg.regrid_every == cfg.regrid_every - 1 {
            let ex = extract_params(&grid, &field);
            let core_h = 2.0 * ex.lambda_hat / cfg.core_cells as f64;
            let current_h = grid
                .r
                .windows(2)
                .filter(|p| p[0] >= ex.r_hat - ex.lambda_hat && p[1] <= ex.r_hat + ex.lambda_hat)
                .map(|p| p[1] - p[0])
                .fold(0.0_f64, f64::max);
            let drifted = (ex.r_hat - {
                // Center of the fine patch = densest region of the axis.
                let mut c = grid.r[0];
                let mut hmin = f64::INFINITY;
                for p in grid.r.windows(2) {
                    if p[1] - p[0] < hmin {
                        hmin = p[1] - p[0];
                        c = 0.5 * (p[0] + p[1]);
                    }
                }
                c
            })
            .abs()
                > 2.0 * ex.lambda_hat;
            if drifted || current_h > 1.2 * core_h {
                let new_grid = build_grid(cfg, ex.r_hat, ex.lambda_hat);
                field = bilinear_transfer(&grid, &field, &new_grid);
                grid = new_grid;
            }
        }
    }
    Ok(SimResult { rows, stop, grid, field, snapshots, lambda0, xi_r0 })
}

// ---------------------------------------------------------------------------
// Linearized inner evolution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct InnerEvolveConfig {
    /// Spherical-harmonic degree: 0 (dilation) or 1 (translation).
    pub mode: usize,
    pub rho_max: f64,
    pub n_rho: usize,
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    pub t_end: f64,
    /// Projection ball radius for the kernel-removal coefficient.
    pub cap: f64,
}

pub struct InnerEvolve {
    pub rho: Vec<f64>,
    pub phi: Vec<f64>,
    /// (t, c(t)) projection coefficients applied at each step.
    pub c_history: Vec<(f64, f64)>,
}

fn mode_kernel(mode: usize, rho: f64) -> f64 {
    match mode {
        0 => profile::kernel_z5_radial(rho),
        1 => profile::kernel_z(1, [rho, 0.0, 0.0, 0.0]),
        _ => panic!("inner evolve supports modes 0 and 1"),
    }
}

/// Backward-Euler integration of φ_t = λ^{−2} (L_m φ + h + c z_m) on a
/// uniform radial grid, where L_m = ∂ρρ + (3/ρ)∂ρ − m(m+2)/ρ² + 3U² and
/// c(t) = −∫₀^cap h z ρ³ dρ / ∫₀^cap z² ρ³ dρ removes the kernel direction.
/// Mode 0 uses even symmetry at ρ = 0; mode 1 is Dirichlet there.
pub fn linear_inner_evolve(
    cfg: &InnerEvolveConfig,
    h: &dyn Fn(f64, f64) -> f64,
    lambda_of_t: &dyn Fn(f64) -> f64,
) -> Result<InnerEvolve> {
    if cfg.mode > 1 {
        return Err(Error::Config("inner evolve supports modes 0 and 1".into()));
    }
    let m = cfg.n_rho;
    let drho = cfg.rho_max / m as f64;
    let rho: Vec<f64> = (0..=m).map(|i| i as f64 * drho).collect();
    let z: Vec<f64> = rho.iter().map(|&r| mode_kernel(cfg.mode, r)).collect();
    let z_norm: f64 = rho
        .windows(2)
        .zip(z.windows(2))
        .filter(|(rp, _)| rp[1] <= cfg.cap)
        .map(|(rp, zp)| {
            0.5 * (rp[1] - rp[0]) * (zp[0] * zp[0] * rp[0].powi(3) + zp[1] * zp[1] * rp[1].powi(3))
        })
        .sum();

    let mut phi = vec![0.0; m + 1];
    let dt = (cfg.t1 - cfg.t0) / cfg.steps as f64;
    let mut c_history = Vec::with_capacity(cfg.steps);
    let ell = (cfg.mode * (cfg.mode + 2)) as f64;

    for k in 0..cfg.steps {
        let t = cfg.t0 + (k as f64 + 1.0) * dt;
        let lam = lambda_of_t(t);
        let fac = dt / (lam * lam);

        let hz: f64 = rho
            .windows(2)
            .zip(z.windows(2))
            .filter(|(rp, _)| rp[1] <= cfg.cap)
            .map(|(rp, zp)| {
                0.5 * (rp[1] - rp[0])
                    * (h(rp[0], t) * zp[0] * rp[0].powi(3) + h(rp[1], t) * zp[1] * rp[1].powi(3))
            })
            .sum();
        let c = -hz / z_norm;
        c_history.push((t, c));

        let mut sub = vec![0.0; m + 1];
        let mut diag = vec![1.0; m + 1];
        let mut sup = vec![0.0; m + 1];
        let mut rhs = vec![0.0; m + 1];
        for i in 1..m {
            let r = rho[i];
            let u = profile::bubble_radial(r);
            let lap_c = -2.0 / (drho * drho) - ell / (r * r) + 3.0 * u * u;
            let lap_m = 1.0 / (drho * drho) - 3.0 / (2.0 * r * drho);
            let lap_p = 1.0 / (drho * drho) + 3.0 / (2.0 * r * drho);
            sub[i] = -fac * lap_m;
            diag[i] = 1.0 - fac * lap_c;
            sup[i] = -fac * lap_p;
            rhs[i] = phi[i] + fac * (h(r, t) + c * z[i]);
        }
        if cfg.mode == 0 {
            // Even symmetry: L₀φ(0) = 4φ″(0) + 3U²(0)φ(0), φ″ ≈ 2(φ₁−φ₀)/dρ².
            let u0 = profile::bubble_radial(0.0);
            diag[0] = 1.0 - fac * (-8.0 / (drho * drho) + 3.0 * u0 * u0);
            sup[0] = -fac * 8.0 / (drho * drho);
            rhs[0] = phi[0] + fac * (h(0.0, t) + c * z[0]);
        } else {
            diag[0] = 1.0;
            sup[0] = 0.0;
            rhs[0] = 0.0;
        }
        diag[m] = 1.0;
        sub[m] = 0.0;
        rhs[m] = 0.0;
        solve_tridiag(&sub, &diag, &sup, &mut rhs);
        phi = rhs;
    }
    Ok(InnerEvolve { rho, phi, c_history })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
