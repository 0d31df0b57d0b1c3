//! Numerical toolkit for ring blow-up in the supercritical heat equation.
//!
//! The object of study is the Cauchy problem
//!
//! ```text
//! u_t = Δu + u³   in R^n × (0, T),    n ∈ {5, 6, 7},
//! ```
//!
//! restricted to the symmetry class u = u(r, z), r = |x'|, x = (x', z) ∈ R^{n−3} × R³,
//! where solutions can concentrate on a shrinking (n−4)-sphere ("ring") of radius
//! ξ_r(t) → 0 as t → T. In the half-space variables the equation becomes
//!
//! ```text
//! u_t = u_rr + ((n−4)/r) u_r + Δ_z u + u³,
//! ```
//!
//! i.e. a 4D semilinear heat equation with a drift ((n−4)/r)∂_r. The scale-invariant
//! core is the 4D Aubin–Talenti bubble U(y) = α₀/(1+|y|²), α₀ = 2√2, glued onto the
//! ring at scale λ(t) ≪ √(T−t) (type II). This crate implements, and verifies at desk
//! scale, the constructive ingredients of that regime:
//!
//! * [`profile`] — bubble, its linearization kernels Z₁..Z₅ and unstable pair (μ₀, Z₀),
//!   cutoffs, and the error operator 𝒮(u),
//! * [`corrections`] — the nonlocal heat correction Ψ₀ built from the kernel
//!   k(ζ,t) = (1−e^{−ζ²/4t})/ζ², the remainder ℛ[λ], the outer error 𝒮_out, and
//!   Monte-Carlo Duhamel machinery for Ψ₁ and the a-priori heat estimates,
//! * [`reduced_dynamics`] — the Γ kernel, the constants (c₀, **c₀**, c*, κ*), the
//!   leading-order laws λ*(t), ξ_r*(t), the nonlocal operator B₀[λ], and solvers for
//!   the reduced λ- and ξ-equations,
//! * [`modes_norms`] — S³ spherical-harmonic machinery and the weighted space-time
//!   norms used by the inner/outer a-priori estimates,
//! * [`pde_sim`] — a dimension-reduced (r,s) finite-difference simulator with graded
//!   tensor grids, IMEX stepping, and the 1D inner (mode-by-mode) linear evolver,
//! * [`harness`] — parameter extraction, law fitting, config, artifacts, and the
//!   verification suite behind the CLI.
//!
//! Numerical conventions used throughout:
//! * all lengths/times are in the units of the PDE above (no rescaling),
//! * `T` is the configured end time; fitted blow-up times are written `t_hat`,
//! * sup-norms are taken over explicitly recorded finite sample sets,
//! * every Monte-Carlo routine takes an explicit seed and reports its standard error.

pub mod corrections;
pub mod harness;
pub mod modes_norms;
pub mod pde_sim;
pub mod profile;
pub mod quad;
pub mod reduced_dynamics;
pub mod special;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A requested evaluation left the validity domain of a formula or grid.
    #[error("domain error: {0}")]
    Domain(String),
    /// An iterative solver failed to reach its tolerance.
    #[error("convergence failure: {0}")]
    Convergence(String),
    /// Configuration file / parameter problems.
    #[error("config error: {0}")]
    Config(String),
    /// Underlying I/O failure while writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
