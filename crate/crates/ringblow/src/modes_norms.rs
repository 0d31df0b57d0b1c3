//! Spherical-mode decomposition and the weighted norms.
//!
//! The linearization around the bubble is split along spherical harmonics of
//! S³: the radial mode (dilations, paired with Z₅), the four translation
//! modes (paired with Z₁..Z₄), and the higher modes.  This module provides a
//! product quadrature on S³, the normalized mode functions Θ₀, Θ_j, and
//! projection helpers.
//!
//! It also implements the weighted sup-norms used by the desk-scale checks:
//! the inner norms ‖·‖_{ν,a}, ‖·‖_{ν,2+a}, ‖·‖_{0,σ,ν,a} (weights built from
//! λ*(t) and R(t) = λ*(t)^{−β}), the five-clause outer norm ‖·‖_* and the
//! source norm ‖·‖_**.  Each evaluator returns a [`NormReport`] carrying the
//! per-clause breakdown and the arg-max sample point, so that fitted-constant
//! checks can show *where* a norm is attained.

use crate::corrections::RingHistory;
use crate::profile::Vec4;
use crate::quad;
use crate::reduced_dynamics::{lambda_star, S3_AREA};

// ---------------------------------------------------------------------------
// Spherical harmonics bookkeeping
// ---------------------------------------------------------------------------

/// Eigenvalue of −Δ_{S³} on degree-i harmonics: μ̃_i = i(2+i).
pub fn sphere_eigenvalue(i: usize) -> f64 {
    (i * (2 + i)) as f64
}

/// Multiplicity table used by the mode bookkeeping: (3+i)!/(6·i!),
/// i.e. (i+1)(i+2)(i+3)/6 — so 1, 4, 10, 20, ...
pub fn sphere_multiplicity(i: usize) -> usize {
    (i + 1) * (i + 2) * (i + 3) / 6
}

/// Θ₀ = (2π²)^{−1/2}: the constant mode, L²(S³)-normalized.
pub fn theta0() -> f64 {
    1.0 / S3_AREA.sqrt()
}

/// Θ_j = (√2/π) ω_j for j = 1..4: the degree-one modes, L²(S³)-normalized.
pub fn theta_j(j: usize, omega: Vec4) -> f64 {
    assert!((1..=4).contains(&j), "theta_j takes j in 1..=4");
    std::f64::consts::SQRT_2 / std::f64::consts::PI * omega[j - 1]
}

// ---------------------------------------------------------------------------
// Product quadrature on S³
// ---------------------------------------------------------------------------

/// Quadrature nodes/weights on S³ ⊂ R⁴; weights sum to |S³| = 2π².
///
/// Chart: ω = (cosθ₁, sinθ₁cosθ₂, sinθ₁sinθ₂cosθ₃, sinθ₁sinθ₂sinθ₃) with
/// dS = sin²θ₁ sinθ₂ dθ₁ dθ₂ dθ₃.  The sin² factor is handled by
/// Gauss–Chebyshev (second kind) in cosθ₁, the sinθ₂ factor by
/// Gauss–Legendre in cosθ₂, and θ₃ by the (trigonometrically exact)
/// uniform rule.
pub struct S3Quadrature {
    pub nodes: Vec<Vec4>,
    pub weights: Vec<f64>,
}

impl S3Quadrature {
    pub fn product(m1: usize, m2: usize, m3: usize) -> S3Quadrature {
        let pi = std::f64::consts::PI;
        let gl = quad::gauss_legendre(m2);
        let mut nodes = Vec::with_capacity(m1 * m2 * m3);
        let mut weights = Vec::with_capacity(m1 * m2 * m3);
        for k in 1..=m1 {
            let th = k as f64 * pi / (m1 + 1) as f64;
            let (c1, s1) = (th.cos(), th.sin());
            let w1 = pi / (m1 + 1) as f64 * s1 * s1;
            for &(c2, w2) in &gl {
                let s2 = (1.0 - c2 * c2).sqrt();
                for l in 0..m3 {
                    let th3 = 2.0 * pi * l as f64 / m3 as f64;
                    nodes.push([c1, s1 * c2, s1 * s2 * th3.cos(), s1 * s2 * th3.sin()]);
                    weights.push(w1 * w2 * 2.0 * pi / m3 as f64);
                }
            }
        }
        S3Quadrature { nodes, weights }
    }

    /// Default rule: exact for harmonics well past degree 6.
    pub fn default_rule() -> S3Quadrature {
        S3Quadrature::product(8, 6, 8)
    }

    pub fn integrate(&self, mut f: impl FnMut(Vec4) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&w, &wt)| wt * f(w))
            .sum()
    }
}

/// Coefficients of a function on S³ against the normalized modes.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ModeCoeffs {
    pub c0: f64,
    pub c: [f64; 4],
}

/// Project f onto span{Θ₀, Θ₁..Θ₄}.
pub fn project_modes(q: &S3Quadrature, f: &dyn Fn(Vec4) -> f64) -> ModeCoeffs {
    let c0 = q.integrate(|w| f(w) * theta0());
    let mut c = [0.0; 4];
    for (j, cj) in c.iter_mut().enumerate() {
        *cj = q.integrate(|w| f(w) * theta_j(j + 1, w));
    }
    ModeCoeffs { c0, c }
}

/// Project a field of R⁴ restricted to the shell |y| = ρ.
pub fn project_shell(
    q: &S3Quadrature,
    phi: &dyn Fn(Vec4) -> f64,
    rho: f64,
) -> ModeCoeffs {
    project_modes(q, &|w: Vec4| phi([rho * w[0], rho * w[1], rho * w[2], rho * w[3]]))
}

// ---------------------------------------------------------------------------
// Weighted norms
// ---------------------------------------------------------------------------

/// Result of a norm evaluation over a sample grid.
#[derive(Debug, Clone, serde::Serialize)]
pub struct NormReport {
    pub kind: String,
    /// Max over the clauses below.
    pub value: f64,
    /// Sample point attaining the max: (y-or-x, t).
    pub arg_point: ([f64; 4], f64),
    /// (clause label, clause sup).
    pub clauses: Vec<(String, f64)>,
}

impl NormReport {
    fn from_clauses(kind: &str, clauses: Vec<(String, f64, ([f64; 4], f64))>) -> NormReport {
        let (mut value, mut arg_point) = (f64::NEG_INFINITY, ([0.0; 4], 0.0));
        for &(_, v, p) in &clauses {
            if v > value {
                value = v;
                arg_point = p;
            }
        }
        NormReport {
            kind: kind.to_string(),
            value,
            arg_point,
            clauses: clauses.into_iter().map(|(l, v, _)| (l, v)).collect(),
        }
    }
}

/// Sample grid for sup-norm evaluation: spatial points crossed with times.
/// `t_final` is the slice used as the "final time" in the difference clauses,
/// and `holder_fracs` defines the pair gaps t₂−t₁ = frac·(T−t₂).
pub struct SpaceTimeGrid {
    pub xs: Vec<Vec4>,
    pub ts: Vec<f64>,
    pub t_final: f64,
    pub holder_fracs: Vec<f64>,
}

impl SpaceTimeGrid {
    pub fn new(xs: Vec<Vec4>, ts: Vec<f64>, t_final: f64) -> SpaceTimeGrid {
        SpaceTimeGrid { xs, ts, t_final, holder_fracs: vec![0.1, 0.01] }
    }
}

fn sup_over<'a>(
    xs: &'a [Vec4],
    ts: &'a [f64],
    mut f: impl FnMut(Vec4, f64) -> f64,
) -> (f64, ([f64; 4], f64)) {
    let (mut best, mut arg) = (f64::NEG_INFINITY, ([0.0; 4], 0.0));
    for &t in ts {
        for &x in xs {
            let v = f(x, t);
            if v > best {
                best = v;
                arg = (x, t);
            }
        }
    }
    (best, arg)
}

/// ‖φ‖_{ν,a} = sup λ*^{−ν}(t) (1+|y|^a) [ |φ| + (1+|y|) |∇φ| ].
pub fn norm_nu_a(
    phi: &dyn Fn(Vec4, f64) -> f64,
    grad: &dyn Fn(Vec4, f64) -> Vec4,
    nu: f64,
    a: f64,
    t_end: f64,
    grid: &SpaceTimeGrid,
) -> NormReport {
    let (v, p) = sup_over(&grid.xs, &grid.ts, |y, t| {
        let r = crate::profile::norm4(y);
        let g = crate::profile::norm4(grad(y, t));
        lambda_star(t, t_end).powf(-nu)
            * (1.0 + r.powf(a))
            * (phi(y, t).abs() + (1.0 + r) * g)
    });
    NormReport::from_clauses("nu,a", vec![("sup".into(), v, p)])
}

/// ‖h‖_{ν,2+a} = sup λ*^{−ν}(t) (1+|y|^{2+a}) |h| (no gradient factor).
pub fn norm_nu_2pa(
    h: &dyn Fn(Vec4, f64) -> f64,
    nu: f64,
    a: f64,
    t_end: f64,
    grid: &SpaceTimeGrid,
) -> NormReport {
    let (v, p) = sup_over(&grid.xs, &grid.ts, |y, t| {
        let r = crate::profile::norm4(y);
        lambda_star(t, t_end).powf(-nu) * (1.0 + r.powf(2.0 + a)) * h(y, t).abs()
    });
    NormReport::from_clauses("nu,2+a", vec![("sup".into(), v, p)])
}

/// ‖φ⁰‖_{0,σ,ν,a} = sup (1+|y|⁴) / (λ*^ν R^{σ(4−a)} log R) ·
/// [ |φ| + (1+|y|) |∇φ| ], with R(t) = λ*(t)^{−β}.
pub fn norm_zero_sig(
    phi: &dyn Fn(Vec4, f64) -> f64,
    grad: &dyn Fn(Vec4, f64) -> Vec4,
    sigma: f64,
    nu: f64,
    a: f64,
    beta: f64,
    t_end: f64,
    grid: &SpaceTimeGrid,
) -> NormReport {
    let (v, p) = sup_over(&grid.xs, &grid.ts, |y, t| {
        let ls = lambda_star(t, t_end);
        let r_t = ls.powf(-beta);
        let r = crate::profile::norm4(y);
        let g = crate::profile::norm4(grad(y, t));
        (1.0 + r.powi(4)) / (ls.powf(nu) * r_t.powf(sigma * (4.0 - a)) * r_t.ln())
            * (phi(y, t).abs() + (1.0 + r) * g)
    });
    NormReport::from_clauses("0,sigma,nu,a", vec![("sup".into(), v, p)])
}

/// Parameters of the five-clause outer solution norm ‖·‖_*.
#[derive(Debug, Clone, Copy)]
pub struct StarParams {
    pub n: usize,
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Hölder exponent γ of the last clause.
    pub gamma_h: f64,
    pub t_end: f64,
}

/// ‖ψ‖_*: max of the five clauses
///   1. λ*^{2−ν−4/n}(0) R^{2+α−8/n}(0) / |log T| · sup |ψ|
///   2. λ*^{5/2−ν−2/n}(0) R^{2+α−4/n}(0) / |log T| · sup |∇ψ|
///   3. sup_t λ*^{2−ν−4/n}(t) R^{2+α−8/n}(t) / |log(T−t)| · |ψ(·,t) − ψ(·,T)|
///   4. sup_t λ*^{5/2−ν−2/n}(t) R^{2+α−4/n}(t) / |log(T−t)| · |∇ψ(·,t) − ∇ψ(·,T)|
///   5. sup λ*^{2−ν+γ}(t₂) R^{2+α}(t₂) (t₂−t₁)^{−γ} |ψ(·,t₂) − ψ(·,t₁)|
/// where R(t) = λ*(t)^{−β} and the pairs in 5 run over
/// t₂−t₁ = frac·(T−t₂), frac ∈ holder_fracs.
pub fn norm_star(
    psi: &dyn Fn(Vec4, f64) -> f64,
    grad: &dyn Fn(Vec4, f64) -> Vec4,
    p: &StarParams,
    grid: &SpaceTimeGrid,
) -> NormReport {
    let nf = p.n as f64;
    let t_end = p.t_end;
    let logt = t_end.ln().abs();
    let wt_val = |t: f64| -> f64 {
        let ls = lambda_star(t, t_end);
        ls.powf(2.0 - p.nu - 4.0 / nf) * ls.powf(-p.beta * (2.0 + p.alpha - 8.0 / nf))
    };
    let wt_grad = |t: f64| -> f64 {
        let ls = lambda_star(t, t_end);
        ls.powf(2.5 - p.nu - 2.0 / nf) * ls.powf(-p.beta * (2.0 + p.alpha - 4.0 / nf))
    };

    let (c1, p1) = sup_over(&grid.xs, &[0.0], |x, t| wt_val(t) / logt * psi(x, t).abs());
    let (c2, p2) = sup_over(&grid.xs, &[0.0], |x, t| {
        wt_grad(t) / logt * crate::profile::norm4(grad(x, t))
    });
    let (c3, p3) = sup_over(&grid.xs, &grid.ts, |x, t| {
        wt_val(t) / (t_end - t).ln().abs() * (psi(x, t) - psi(x, grid.t_final)).abs()
    });
    let (c4, p4) = sup_over(&grid.xs, &grid.ts, |x, t| {
        let d = crate::profile::sub4(grad(x, t), grad(x, grid.t_final));
        wt_grad(t) / (t_end - t).ln().abs() * crate::profile::norm4(d)
    });
    let mut c5 = f64::NEG_INFINITY;
    let mut p5 = ([0.0; 4], 0.0);
    for &frac in &grid.holder_fracs {
        let (v, pt) = sup_over(&grid.xs, &grid.ts, |x, t2| {
            let dt = frac * (t_end - t2);
            let t1 = t2 - dt;
            let ls = lambda_star(t2, t_end);
            ls.powf(2.0 - p.nu + p.gamma_h) * ls.powf(-p.beta * (2.0 + p.alpha))
                * dt.powf(-p.gamma_h)
                * (psi(x, t2) - psi(x, t1)).abs()
        });
        if v > c5 {
            c5 = v;
            p5 = pt;
        }
    }

    NormReport::from_clauses(
        "star",
        vec![
            ("value at t=0".into(), c1, p1),
            ("gradient at t=0".into(), c2, p2),
            ("difference to final slice".into(), c3, p3),
            ("gradient difference to final slice".into(), c4, p4),
            ("Holder in time".into(), c5, p5),
        ],
    )
}

/// Parameters of the source norm ‖·‖_** with its three weights.
#[derive(Debug, Clone, Copy)]
pub struct StarStarParams {
    pub n: usize,
    pub nu: f64,
    pub nu2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub t_end: f64,
}

/// Weight ϱ₁+ϱ₂+ϱ₃ of the source norm at (x, t):
///   ϱ₁ = λ^{ν−3} R^{−2−α} χ_{|x−ξ|≤2λR},
///   ϱ₂ = λ^{ν₂} / |x−ξ|² χ_{λR≤|x−ξ|≤2δ√(T−t)},
///   ϱ₃ = 1,   with λ = λ*(t), R = λ*(t)^{−β}.
pub fn star_star_weight(x: Vec4, t: f64, p: &StarStarParams, hist: &dyn RingHistory) -> f64 {
    let ls = lambda_star(t, p.t_end);
    let r_t = ls.powf(-p.beta);
    let d = crate::profile::norm4(crate::profile::sub4(x, hist.xi(t)));
    let mut w = 1.0;
    if d <= 2.0 * ls * r_t {
        w += ls.powf(p.nu - 3.0) * r_t.powf(-2.0 - p.alpha);
    }
    if d >= ls * r_t && d <= 2.0 * p.delta * (p.t_end - t).sqrt() && d > 0.0 {
        w += ls.powf(p.nu2) / (d * d);
    }
    w
}

/// ‖f‖_** = sup |f| / (ϱ₁+ϱ₂+ϱ₃).
pub fn norm_star_star(
    f: &dyn Fn(Vec4, f64) -> f64,
    p: &StarStarParams,
    hist: &dyn RingHistory,
    grid: &SpaceTimeGrid,
) -> NormReport {
    let (v, pt) = sup_over(&grid.xs, &grid.ts, |x, t| {
        f(x, t).abs() / star_star_weight(x, t, p, hist)
    });
    NormReport::from_clauses("star-star", vec![("sup".into(), v, pt)])
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduced_dynamics::StarHistory;

    #[test]
    fn quadrature_area_and_even_moments() {
        let q = S3Quadrature::default_rule();
        let area: f64 = q.weights.iter().sum();
        assert!((area - S3_AREA).abs() < 1e-12 * S3_AREA, "area {area}");
        // E[ω_j^{2k}] over the uniform measure: 1/4, 1/8, 5/64.
        for j in 0..4 {
            for (k, want) in [(1, 0.25), (2, 0.125), (3, 5.0 / 64.0)] {
                let m = q.integrate(|w| w[j].powi(2 * k)) / S3_AREA;
                assert!((m - want).abs() < 1e-12, "j={j} k={k}: {m} vs {want}");
            }
            let odd = q.integrate(|w| w[j].powi(3)) / S3_AREA;
            assert!(odd.abs() < 1e-13, "odd moment {odd}");
        }
    }

    #[test]
    fn mode_functions_are_orthonormal() {
        let q = S3Quadrature::default_rule();
        assert!((q.integrate(|_| theta0() * theta0()) - 1.0).abs() < 1e-12);
        for j in 1..=4 {
            assert!((q.integrate(|w| theta_j(j, w).powi(2)) - 1.0).abs() < 1e-12);
            assert!(q.integrate(|w| theta0() * theta_j(j, w)).abs() < 1e-13);
            for k in (j + 1)..=4 {
                assert!(q.integrate(|w| theta_j(j, w) * theta_j(k, w)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn projection_recovers_planted_coefficients() {
        let q = S3Quadrature::default_rule();
        // Plant modes plus a degree-2 harmonic (ω₁ω₂), orthogonal to all five.
        let f = |w: Vec4| {
            2.0 * theta0() - 3.0 * theta_j(2, w) + 5.0 * theta_j(4, w) + 1.7 * w[0] * w[1]
        };
        let c = project_modes(&q, &f);
        assert!((c.c0 - 2.0).abs() < 1e-11, "c0 = {}", c.c0);
        let want = [0.0, -3.0, 0.0, 5.0];
        for j in 0..4 {
            assert!((c.c[j] - want[j]).abs() < 1e-11, "c[{j}] = {}", c.c[j]);
        }
        // Shell projection at ρ = 2 of the radial extension scales the same way.
        let phi = |y: Vec4| {
            let r = crate::profile::norm4(y);
            let w = [y[0] / r, y[1] / r, y[2] / r, y[3] / r];
            f(w) * r
        };
        let cs = project_shell(&q, &phi, 2.0);
        assert!((cs.c0 - 4.0).abs() < 1e-10);
        assert!((cs.c[1] + 6.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_spectrum_table() {
        assert_eq!(sphere_eigenvalue(0), 0.0);
        assert_eq!(sphere_eigenvalue(1), 3.0);
        assert_eq!(sphere_eigenvalue(2), 8.0);
        assert_eq!(sphere_multiplicity(0), 1);
        assert_eq!(sphere_multiplicity(1), 4);
        assert_eq!(sphere_multiplicity(2), 10);
        assert_eq!(sphere_multiplicity(3), 20);
    }

    #[test]
    fn inner_norms_have_exact_unit_semantics() {
        let t_end = 0.05;
        let (nu, a) = (0.985, 0.045);
        let grid = SpaceTimeGrid::new(
            vec![[0.3, 0.0, 0.0, 0.0], [1.0, 2.0, 0.0, 0.0], [0.0, 0.0, 3.0, 4.0]],
            vec![0.01, 0.02, 0.04],
            0.0499,
        );
        // φ built to make the ν,a weight exactly c at every sample.
        let c = 0.73;
        let phi = move |y: Vec4, t: f64| {
            let r = crate::profile::norm4(y);
            c * lambda_star(t, t_end).powf(nu) / (1.0 + r.powf(a))
        };
        let zero_grad = |_: Vec4, _: f64| [0.0; 4];
        let rep = norm_nu_a(&phi, &zero_grad, nu, a, t_end, &grid);
        assert!((rep.value - c).abs() < 1e-12, "value {}", rep.value);
        // Homogeneity.
        let phi2 = move |y: Vec4, t: f64| 2.0 * phi(y, t);
        let rep2 = norm_nu_a(&phi2, &zero_grad, nu, a, t_end, &grid);
        assert!((rep2.value - 2.0 * c).abs() < 1e-12);
        // The 2+a variant without gradient factor.
        let h = move |y: Vec4, t: f64| {
            let r = crate::profile::norm4(y);
            c * lambda_star(t, t_end).powf(nu) / (1.0 + r.powf(2.0 + a))
        };
        let reph = norm_nu_2pa(&h, nu, a, t_end, &grid);
        assert!((reph.value - c).abs() < 1e-12);
    }

    #[test]
    fn star_norm_clause_one_isolates_a_static_field() {
        let p = StarParams {
            n: 5,
            nu: 0.985,
            alpha: 0.04,
            beta: 0.49,
            gamma_h: 0.5,
            t_end: 0.05,
        };
        let grid = SpaceTimeGrid::new(
            vec![[0.1, 0.0, 0.0, 0.0], [0.5, 0.2, 0.0, 0.3]],
            vec![0.01, 0.03],
            0.0495,
        );
        let nf = p.n as f64;
        let ls0 = lambda_star(0.0, p.t_end);
        let w1 = ls0.powf(2.0 - p.nu - 4.0 / nf)
            * ls0.powf(-p.beta * (2.0 + p.alpha - 8.0 / nf))
            / p.t_end.ln().abs();
        let c = 1.3;
        let psi = move |_: Vec4, _: f64| c / w1;
        let zero_grad = |_: Vec4, _: f64| [0.0; 4];
        let rep = norm_star(&psi, &zero_grad, &p, &grid);
        assert!((rep.value - c).abs() < 1e-10, "value {}", rep.value);
        // Time-independent field: every difference clause vanishes.
        for (label, v) in &rep.clauses {
            if label.contains("difference") || label.contains("Holder") {
                assert!(v.abs() < 1e-14, "{label}: {v}");
            }
        }
    }

    #[test]
    fn star_star_weight_cancels_for_its_own_shape() {
        let p = StarStarParams {
            n: 5,
            nu: 0.985,
            nu2: 0.9,
            alpha: 0.04,
            beta: 0.49,
            delta: 0.3,
            t_end: 0.05,
        };
        let hist = StarHistory { t_end: p.t_end, n: p.n };
        let mut xs = Vec::new();
        for f in [0.0, 0.5, 1.5, 40.0, 300.0] {
            let t = 0.02;
            let ls = lambda_star(t, p.t_end);
            let xi = hist.xi(t);
            xs.push([xi[0] + f * ls * ls.powf(-p.beta), xi[1], xi[2], xi[3]]);
        }
        let grid = SpaceTimeGrid::new(xs, vec![0.01, 0.02, 0.04], 0.0495);
        let c = 2.41;
        let f = move |x: Vec4, t: f64| c * star_star_weight(x, t, &p, &StarHistory { t_end: p.t_end, n: p.n });
        let rep = norm_star_star(&f, &p, &hist, &grid);
        assert!((rep.value - c).abs() < 1e-12, "value {}", rep.value);
    }
}
