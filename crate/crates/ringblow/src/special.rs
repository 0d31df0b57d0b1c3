//! Small special-function helpers shared by the correction kernels and Γ.
//!
//! Everything here revolves around
//!
//! ```text
//! g(x)  = (1 − e^{−x})/x,
//! g'(x) = (e^{−x}(1+x) − 1)/x²,
//! g''(x)= (2 − e^{−x}(x²+2x+2))/x³,
//! ```
//!
//! which suffer catastrophic cancellation as x → 0 in the closed forms. Below the
//! switch point the alternating Taylor series are used instead:
//! g = Σ_{j≥0} (−x)^j/(j+1)!, g' = Σ_{j≥1} j(−1)^j x^{j−1}/(j+1)!, etc. With 24 terms
//! the truncation error stays below f64 roundoff for all |x| ≤ 2, so the series and
//! closed forms can be cross-checked well past the switch.

/// Series/closed-form switch point; either branch is accurate at the boundary.
const SWITCH: f64 = 0.5;
/// Number of Taylor terms kept below the switch point.
const NTERMS: usize = 24;

/// g(x) = (1 − e^{−x})/x, extended continuously by g(0) = 1.
pub fn em1_over_x(x: f64) -> f64 {
    if x.abs() < SWITCH {
        // Σ (−x)^j / (j+1)!
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..NTERMS {
            term *= -x / (j as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        (1.0 - (-x).exp()) / x
    }
}

/// g'(x) = d/dx (1 − e^{−x})/x = (e^{−x}(1+x) − 1)/x², with g'(0) = −1/2.
pub fn em1_over_x_d1(x: f64) -> f64 {
    if x.abs() < SWITCH {
        // Σ_{j≥1} j (−1)^j x^{j−1} / (j+1)!
        let mut pow = 1.0; // x^{j-1} with sign folded in below
        let mut fact = 2.0; // (j+1)!
        let mut sum = 0.0;
        let mut sign = -1.0;
        for j in 1..NTERMS {
            sum += sign * (j as f64) * pow / fact;
            pow *= x;
            fact *= j as f64 + 2.0;
            sign = -sign;
        }
        sum
    } else {
        ((-x).exp() * (1.0 + x) - 1.0) / (x * x)
    }
}

/// g''(x) = (2 − e^{−x}(x²+2x+2))/x³, with g''(0) = 1/3.
pub fn em1_over_x_d2(x: f64) -> f64 {
    if x.abs() < SWITCH {
        // Σ_{j≥2} j(j−1) (−1)^j x^{j−2} / (j+1)!
        let mut pow = 1.0; // x^{j-2}
        let mut fact = 6.0; // (j+1)! at j=2
        let mut sum = 0.0;
        let mut sign = 1.0;
        for j in 2..NTERMS {
            sum += sign * (j as f64) * (j as f64 - 1.0) * pow / fact;
            pow *= x;
            fact *= j as f64 + 2.0;
            sign = -sign;
        }
        sum
    } else {
        (2.0 - (-x).exp() * (x * x + 2.0 * x + 2.0)) / (x * x * x)
    }
}
