//! Run configuration, artifact writers, scaling-law fits, and the
//! verification suite shared by the CLI and the acceptance tests.
//!
//! The verification suite turns the a-priori estimates into *fitted-constant*
//! checks: each estimate |Q| ≤ C·bound is sampled over a desk-scale
//! space-time set, the smallest admissible C is reported, and the check
//! passes when C stays under an explicit threshold and is stable under
//! refinement (double sampling density, or doubled Monte Carlo budget).
//! Thresholds are generous by design — the point is to catch wrong powers or
//! missing factors, which show up as C growing without bound, not to certify
//! sharp constants.

use std::collections::BTreeMap;
use std::path::Path;

use crate::corrections::{
    duhamel_check, psi0, psi0_drho, psi1_mc, remainder_r, DuhamelConfig, OuterSourceCtx,
    RingHistory, SourceKind,
};
use crate::pde_sim::{DiagRow, SimConfig, SimResult, StopReason};
use crate::reduced_dynamics::{lambda_star, LambdaSolution, StarHistory, XiSolution};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------------

/// Minimal INI reader: `[section]` headers flatten to `section.key`; `#` and
/// `;` start comments.
pub fn parse_ini(text: &str) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    let mut section = String::new();
    for raw in text.lines() {
        let line = raw
            .split(['#', ';'])
            .next()
            .unwrap_or("")
            .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            section = line[1..line.len() - 1].trim().to_string();
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            map.insert(key, v.trim().to_string());
        }
    }
    map
}

fn ini_get<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T> {
    let raw = map
        .get(&format!("sim.{key}"))
        .or_else(|| map.get(key));
    match raw {
        None => Ok(default),
        Some(s) => s
            .parse()
            .map_err(|_| Error::Config(format!("bad value for {key}: {s:?}"))),
    }
}

/// Build a [`SimConfig`] from INI text, on top of the desk-scale defaults.
pub fn sim_config_from_ini(text: &str) -> Result<SimConfig> {
    let map = parse_ini(text);
    let n: usize = ini_get(&map, "n", 5)?;
    let mut cfg = SimConfig::desk(n);
    cfg.t_end = ini_get(&map, "t_end", cfg.t_end)?;
    cfg.t0 = ini_get(&map, "t0", cfg.t0)?;
    cfg.t_stop = ini_get(&map, "t_stop", cfg.t_stop)?;
    cfg.delta = ini_get(&map, "delta", cfg.delta)?;
    cfg.a_star = ini_get(&map, "a_star", cfg.a_star)?;
    cfg.kappa = ini_get(&map, "kappa", cfg.kappa)?;
    cfg.core_cells = ini_get(&map, "core_cells", cfg.core_cells)?;
    cfg.base_h_rel = ini_get(&map, "base_h_rel", cfg.base_h_rel)?;
    cfg.domain_factor = ini_get(&map, "domain_factor", cfg.domain_factor)?;
    cfg.cfl = ini_get(&map, "cfl", cfg.cfl)?;
    cfg.dt_max = ini_get(&map, "dt_max", cfg.dt_max)?;
    cfg.u_cap = ini_get(&map, "u_cap", cfg.u_cap)?;
    cfg.include_psi0 = ini_get(&map, "include_psi0", cfg.include_psi0)?;
    cfg.include_psi1 = ini_get(&map, "include_psi1", cfg.include_psi1)?;
    cfg.max_steps = ini_get(&map, "max_steps", cfg.max_steps)?;
    cfg.regrid_every = ini_get(&map, "regrid_every", cfg.regrid_every)?;
    if let Some(s) = map.get("sim.snapshot_times").or_else(|| map.get("snapshot_times")) {
        cfg.snapshot_times = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad snapshot time {p:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        cfg.snapshot_times
            .sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialize {}: {e}", path.display())))?;
    std::fs::write(path, s + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub lambda: f64,
    pub dlambda: f64,
    pub xi_r: f64,
    pub xi_z: f64,
    pub residual: f64,
}

/// Merge the λ and ξ solutions (same grid) into trajectory rows.
pub fn trajectory_rows(lam: &LambdaSolution, xi: &XiSolution) -> Vec<TrajectoryRow> {
    lam.t
        .iter()
        .enumerate()
        .map(|(k, &t)| TrajectoryRow {
            t,
            lambda: lam.lambda[k],
            dlambda: lam.dlambda[k],
            xi_r: xi.xi_r[k],
            xi_z: {
                let z = xi.xi_z[k];
                (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt()
            },
            residual: lam.residual_nodes[k],
        })
        .collect()
}

pub fn write_trajectory_csv(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let mut out = String::from("t,lambda,dlambda,xi_r,xi_z,residual\n");
    for r in rows {
        out.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.6e}\n",
            r.t, r.lambda, r.dlambda, r.xi_r, r.xi_z, r.residual
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_sim_diagnostics_csv(path: &Path, rows: &[DiagRow]) -> Result<()> {
    let mut out = String::from("t,dt,u_max,r_hat,s_hat,lambda_hat\n");
    for r in rows {
        out.push_str(&format!(
            "{:.12e},{:.6e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            r.t, r.dt, r.u_max, r.r_hat, r.s_hat, r.lambda_hat
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write snapshot files `snap_XXXX.txt` under `dir`; header carries the time,
/// grid hash, and ansatz metadata, then the two axes and the field matrix.
pub fn write_snapshots(dir: &Path, sim: &SimResult, n: usize, t_end: f64) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for (idx, snap) in sim.snapshots.iter().enumerate() {
        let name = format!("snap_{idx:04}.txt");
        let mut out = String::new();
        out.push_str(&format!(
            "# t={:.12e} grid_hash={:016x} n={} T={:.6e} nr={} ns={}\n",
            snap.t,
            snap.grid.hash(),
            n,
            t_end,
            snap.grid.nr(),
            snap.grid.ns()
        ));
        out.push('r');
        for &x in &snap.grid.r {
            out.push_str(&format!(" {x:.12e}"));
        }
        out.push_str("\ns");
        for &x in &snap.grid.s {
            out.push_str(&format!(" {x:.12e}"));
        }
        out.push('\n');
        for j in 0..snap.grid.ns() {
            for i in 0..snap.grid.nr() {
                if i > 0 {
                    out.push(' ');
                }
                out.push_str(&format!("{:.9e}", snap.field.at(i, j)));
            }
            out.push('\n');
        }
        std::fs::write(dir.join(&name), out)?;
        names.push(name);
    }
    Ok(names)
}

// ---------------------------------------------------------------------------
// Scaling-law fits
// ---------------------------------------------------------------------------

fn linfit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    (slope, (sy - slope * sx) / m)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FitReport {
    /// Blow-up time estimated from the zero crossing of 1/u_max.
    pub t_hat: f64,
    /// Slope of log λ̂ against log(T̂−t).
    pub lambda_exponent: f64,
    /// Slope and prefactor of the ring-radius law ξ̂_r ≈ c (T̂−t)^p.
    pub ring_exponent: f64,
    pub ring_coeff: f64,
    /// λ̂/√(T̂−t) at the window ends; a decreasing ratio is the type II
    /// signature (the scale collapses faster than the parabolic one).
    pub type_ii_ratio_start: f64,
    pub type_ii_ratio_end: f64,
    pub rows_used: usize,
}

pub fn fit_law(rows: &[DiagRow], n: usize) -> Result<FitReport> {
    if rows.len() < 8 {
        return Err(Error::Domain("need at least 8 diagnostic rows to fit".into()));
    }
    let window = &rows[rows.len() / 2..];
    let ts: Vec<f64> = window.iter().map(|r| r.t).collect();
    let inv_u: Vec<f64> = window.iter().map(|r| 1.0 / r.u_max).collect();
    let (m, b) = linfit(&ts, &inv_u);
    let t_hat = -b / m;
    if !(t_hat.is_finite() && t_hat > *ts.last().unwrap()) {
        return Err(Error::Domain(format!(
            "u_max trend does not extrapolate to a blow-up time (t_hat = {t_hat})"
        )));
    }
    let log_rem: Vec<f64> = window.iter().map(|r| (t_hat - r.t).ln()).collect();
    let log_lam: Vec<f64> = window.iter().map(|r| r.lambda_hat.ln()).collect();
    let (lambda_exponent, _) = linfit(&log_rem, &log_lam);
    let log_ring: Vec<f64> = window.iter().map(|r| r.r_hat.ln()).collect();
    let (ring_exponent, ring_b) = linfit(&log_rem, &log_ring);
    let _ = n;
    let ratio = |r: &DiagRow| r.lambda_hat / (t_hat - r.t).sqrt();
    Ok(FitReport {
        t_hat,
        lambda_exponent,
        ring_exponent,
        ring_coeff: ring_b.exp(),
        type_ii_ratio_start: ratio(&window[0]),
        type_ii_ratio_end: ratio(window.last().unwrap()),
        rows_used: window.len(),
    })
}

// ---------------------------------------------------------------------------
// Verification suite
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckResult {
    pub name: String,
    pub fitted_c: f64,
    pub threshold: f64,
    /// Refinement ratio (doubled sampling/budget): should stay near 1.
    pub stability: f64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

struct Desk {
    hist: StarHistory,
    delta: f64,
    beta: f64,
}

fn desk() -> Desk {
    Desk { hist: StarHistory { t_end: 0.05, n: 5 }, delta: 0.3, beta: 0.49 }
}

fn log_spaced(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| a * (b / a).powf(i as f64 / (m - 1) as f64))
        .collect()
}

/// |Ψ₀| ≤ C |λ̇| [ |log(ρ²+λ²)| + 1 ].
fn check_est_psi0() -> CheckResult {
    let d = desk();
    let t_end = d.hist.t_end;
    let fit = |m: usize| -> f64 {
        let mut c = 0.0_f64;
        for &t in &[0.3 * t_end, 0.6 * t_end, 0.9 * t_end] {
            let lam = d.hist.lambda(t);
            let dl = d.hist.dlambda(t).abs();
            for rho in log_spaced(0.5 * lam, 3.0 * d.delta * (t_end - t).sqrt(), m) {
                let v = psi0(rho, t, &d.hist, 1e-10).abs();
                let bound = dl * ((rho * rho + lam * lam).ln().abs() + 1.0);
                c = c.max(v / bound);
            }
        }
        c
    };
    let (c1, c2) = (fit(12), fit(24));
    let threshold = 6.0;
    CheckResult {
        name: "est-psi0: |Psi0| <= C |dlambda| (|log(rho^2+lambda^2)|+1)".into(),
        fitted_c: c2,
        threshold,
        stability: c2 / c1,
        pass: c2 <= threshold && c2 / c1 <= 1.25,
        detail: format!("sampled 3 times x {{12,24}} radii; C_12 = {c1:.3}, C_24 = {c2:.3}"),
    }
}

/// |∂_rΨ₀| ≤ C |r−ξ_r| max{ |λ̇|/(T−t), |λ̇|/(ρ²+λ²) }.
fn check_est_drpsi0() -> CheckResult {
    let d = desk();
    let t_end = d.hist.t_end;
    let fit = |m: usize| -> f64 {
        let mut c = 0.0_f64;
        for &t in &[0.3 * t_end, 0.6 * t_end, 0.9 * t_end] {
            let lam = d.hist.lambda(t);
            let dl = d.hist.dlambda(t).abs();
            for rho in log_spaced(0.5 * lam, 3.0 * d.delta * (t_end - t).sqrt(), m) {
                let v = psi0_drho(rho, t, &d.hist, 1e-10).abs();
                let bound = rho * (dl / (t_end - t)).max(dl / (rho * rho + lam * lam));
                c = c.max(v / bound);
            }
        }
        c
    };
    let (c1, c2) = (fit(12), fit(24));
    let threshold = 6.0;
    CheckResult {
        name: "est-drpsi0: |dr Psi0| <= C |r-xi_r| max(|dl|/(T-t), |dl|/(rho^2+lambda^2))".into(),
        fitted_c: c2,
        threshold,
        stability: c2 / c1,
        pass: c2 <= threshold && c2 / c1 <= 1.25,
        detail: format!("radial derivative along the ring axis; C_12 = {c1:.3}, C_24 = {c2:.3}"),
    }
}

/// ℛ[λ] ≤ C |λ̇| ( 1/((T−t)(1+|y|²)) + λ²/(T−t)² + 1/(λ²(1+|y|²)²)
///                 + λ(|y·ξ̇|+|λ̇|)/(T−t) + (|y·ξ̇|+|λ̇|)/(λ(1+|y|²)) ).
fn check_est_mr() -> CheckResult {
    let d = desk();
    let t_end = d.hist.t_end;
    let dirs = [
        [1.0, 0.0, 0.0, 0.0],
        [0.6, 0.64, 0.48, 0.0],
        [0.0, 0.0, 0.6, 0.8],
    ];
    let fit = |radii: &[f64]| -> f64 {
        let mut c = 0.0_f64;
        for &t in &[0.3 * t_end, 0.6 * t_end, 0.9 * t_end] {
            let lam = d.hist.lambda(t);
            let dl = d.hist.dlambda(t).abs();
            let xi = d.hist.xi(t);
            let dxi = d.hist.dxi(t);
            for &ry in radii {
                for dir in dirs {
                    let y = [ry * dir[0], ry * dir[1], ry * dir[2], ry * dir[3]];
                    let x = [
                        xi[0] + lam * y[0],
                        xi[1] + lam * y[1],
                        xi[2] + lam * y[2],
                        xi[3] + lam * y[3],
                    ];
                    let v = remainder_r(x, t, &d.hist, 1e-10).abs();
                    let y2 = 1.0 + ry * ry;
                    let ydxi =
                        (y[0] * dxi[0] + y[1] * dxi[1] + y[2] * dxi[2] + y[3] * dxi[3]).abs();
                    let bound = dl
                        * (1.0 / ((t_end - t) * y2)
                            + lam * lam / ((t_end - t) * (t_end - t))
                            + 1.0 / (lam * lam * y2 * y2)
                            + lam * (ydxi + dl) / (t_end - t)
                            + (ydxi + dl) / (lam * y2));
                    c = c.max(v / bound);
                }
            }
        }
        c
    };
    let (c1, c2) = (fit(&[0.5, 2.0, 8.0, 25.0]), fit(&[0.5, 1.0, 2.0, 4.0, 8.0, 15.0, 25.0]));
    let threshold = 8.0;
    CheckResult {
        name: "est-mr: |R[lambda]| <= C |dlambda| (five-term bracket)".into(),
        fitted_c: c2,
        threshold,
        stability: c2 / c1,
        pass: c2 <= threshold && c2 / c1 <= 1.25,
        detail: format!("3 directions x radii x 3 times; C_coarse = {c1:.3}, C_fine = {c2:.3}"),
    }
}

/// |Ψ₁| ≤ C |log(T−t)| λ*^{2β−1}(t) — Monte Carlo, so the fitted constant
/// uses the conservative side |v|+3σ.
fn check_est_psi1(samples: usize) -> CheckResult {
    let d = desk();
    let t_end = d.hist.t_end;
    let ctx = OuterSourceCtx {
        n: 5,
        delta: d.delta,
        beta: d.beta,
        hist: &d.hist,
        quad_tol: 1e-8,
    };
    let eval = |samples: usize, seed: u64| -> f64 {
        let mut c = 0.0_f64;
        for &t in &[0.3 * t_end, 0.6 * t_end] {
            let lam = d.hist.lambda(t);
            let xi = d.hist.xi(t);
            let r_cap = ctx.r_cap(t);
            let shell = 2.0 * d.delta * (t_end - t).sqrt();
            let offsets = [0.0, lam * r_cap, 0.5 * (lam * r_cap + shell)];
            for (i, &off) in offsets.iter().enumerate() {
                let x = [xi[0] + off, xi[1], xi[2], xi[3]];
                let est = psi1_mc(x, t, &ctx, samples, seed + i as u64);
                let bound =
                    (t_end - t).ln().abs() * lambda_star(t, t_end).powf(2.0 * d.beta - 1.0);
                c = c.max((est.value.abs() + 3.0 * est.std_error) / bound);
            }
        }
        c
    };
    let c_half = eval(samples / 2, 901);
    let c_full = eval(samples, 17);
    let threshold = 10.0;
    let stability = c_full / c_half;
    CheckResult {
        name: "est-psi1: |Psi1| <= C |log(T-t)| lambda*^(2 beta - 1)".into(),
        fitted_c: c_full,
        threshold,
        stability,
        pass: c_full.is_finite()
            && c_full <= threshold
            && stability < 2.5
            && stability > 1.0 / 2.5,
        detail: format!(
            "Monte Carlo Duhamel with {samples} paths (conservative |v|+3s); half-budget C = {c_half:.3}"
        ),
    }
}

fn duhamel_as_check(kind: SourceKind, samples: usize) -> CheckResult {
    let d = desk();
    let cfg = DuhamelConfig {
        n: 5,
        nu: 0.985,
        nu2: 0.9,
        alpha: 0.04,
        beta: d.beta,
        delta: d.delta,
        holder_mu: 1.5,
        samples,
        seed: 20240915,
    };
    let rep = duhamel_check(kind, &cfg, &d.hist);
    let fitted = rep
        .clauses
        .iter()
        .map(|c| c.fitted_c)
        .fold(0.0_f64, f64::max);
    let detail = rep
        .clauses
        .iter()
        .map(|c| format!("{}: C = {:.3}{}", c.name, c.fitted_c, if c.pass { "" } else { " (FAIL)" }))
        .collect::<Vec<_>>()
        .join("; ");
    CheckResult {
        name: format!("duhamel lemma [{}]", rep.kind),
        fitted_c: fitted,
        threshold: f64::INFINITY,
        stability: 1.0,
        pass: rep.pass,
        detail,
    }
}

/// Decade-tracking check for the nonlinear simulator.  The corrected ansatz
/// is linearly unstable along the positive eigenvalue μ₀ (growth e^{μ₀ t/λ²}),
/// so without modulation feedback the peak departs from κλ* long before λ
/// shrinks by 10×; this check reports the departure honestly.
fn check_sim_tracking() -> CheckResult {
    let mut cfg = SimConfig::desk(5);
    cfg.t_stop = 8e-3;
    cfg.u_cap = 3e3;
    cfg.max_steps = 12_000;
    let threshold = 0.15;
    match crate::pde_sim::run_blowup(&cfg) {
        Err(e) => CheckResult {
            name: "sim tracks kappa lambda* over a decade".into(),
            fitted_c: f64::INFINITY,
            threshold,
            stability: 1.0,
            pass: false,
            detail: format!("simulation error: {e}"),
        },
        Ok(res) => {
            let mut worst = 0.0_f64;
            let mut departure_t = None;
            for row in &res.rows {
                let target = cfg.kappa * lambda_star(row.t, cfg.t_end);
                let dev = (row.lambda_hat / target - 1.0).abs();
                worst = worst.max(dev);
                if dev > threshold && departure_t.is_none() {
                    departure_t = Some(row.t);
                }
            }
            let pass = departure_t.is_none() && res.stop == StopReason::ReachedHorizon;
            CheckResult {
                name: "sim tracks kappa lambda* over a decade".into(),
                fitted_c: worst,
                threshold,
                stability: 1.0,
                pass,
                detail: match departure_t {
                    Some(t) => format!(
                        "departed at t = {t:.4e} (stop: {:?}); expected — the ansatz is \
                         linearly unstable (rate mu0/lambda^2) absent modulation feedback",
                        res.stop
                    ),
                    None => format!("tracked to t = {:.4e} (stop: {:?})", cfg.t_stop, res.stop),
                },
            }
        }
    }
}

/// Run one of the named suites: "estimates", "duhamel", "sim", or "all".
pub fn run_verify(suite: &str) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    match suite {
        "estimates" => {
            checks.push(check_est_psi0());
            checks.push(check_est_drpsi0());
            checks.push(check_est_mr());
            checks.push(check_est_psi1(16_000));
        }
        "duhamel" => {
            checks.push(duhamel_as_check(SourceKind::InnerBall, 12_000));
            checks.push(duhamel_as_check(SourceKind::Annulus, 12_000));
            checks.push(duhamel_as_check(SourceKind::Constant, 12_000));
        }
        "sim" => checks.push(check_sim_tracking()),
        "all" => {
            checks.push(check_est_psi0());
            checks.push(check_est_drpsi0());
            checks.push(check_est_mr());
            checks.push(check_est_psi1(16_000));
            checks.push(duhamel_as_check(SourceKind::InnerBall, 12_000));
            checks.push(duhamel_as_check(SourceKind::Annulus, 12_000));
            checks.push(duhamel_as_check(SourceKind::Constant, 12_000));
            checks.push(check_sim_tracking());
        }
        other => return Err(Error::Config(format!("unknown verify suite {other:?}"))),
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { suite: suite.to_string(), checks, pass })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
