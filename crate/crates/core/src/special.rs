//! Elementary complex helpers and the incomplete-gamma pieces needed by the
//! closed-form ball center.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::quad::{integrate, Breaks, Tolerance};

/// `exp(z) - 1` without cancellation for small `|z|`.
#[inline]
pub fn expm1c(z: C64) -> C64 {
    let (s, c) = z.im.sin_cos();
    let sh = (0.5 * z.im).sin();
    C64::new(z.re.exp_m1() * c - 2.0 * sh * sh, z.re.exp() * s)
}

/// `(exp(z t) - 1)/z`, the integral of `exp(z s)` over `[0, t]`.
#[inline]
pub fn exp_integral(z: C64, t: f64) -> C64 {
    let zt = z * t;
    if zt.norm_sqr() < 1e-16 {
        return t * (1.0 + 0.5 * zt + zt * zt / 6.0);
    }
    expm1c(zt) / z
}

/// `(1 - exp(-x))/x`, equal to 1 at the origin.
#[inline]
pub fn one_minus_exp_over(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - 0.5 * x + x * x / 6.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// `expm1(y)/y`, equal to 1 at the origin.
#[inline]
pub fn expm1_over(y: f64) -> f64 {
    if y.abs() < 1e-6 {
        1.0 + 0.5 * y + y * y / 6.0
    } else {
        y.exp_m1() / y
    }
}

/// `ln(expm1(y)/y)`, valid for any real `y` including large positive values.
pub fn ln_expm1_over(y: f64) -> f64 {
    if y > 30.0 {
        y - y.ln() + (-(-y).exp()).ln_1p()
    } else {
        expm1_over(y).ln()
    }
}

/// `I_B(x) = int_0^inf (1+w)^(-B-1) exp(-x w) dw` for `x >= 0`, `B > 0`.
///
/// The scaled upper incomplete gamma: `Gamma(-B, x) = x^-B e^-x I_B(x)`.
/// The integrand is bounded by one, so no overflow arises even when the
/// gamma functions themselves are far outside double range.
pub fn scaled_upper_gamma(b: f64, x: f64) -> Result<f64> {
    if !(b > 0.0) || !(x >= 0.0) {
        return Err(Error::Special(format!("scaled upper gamma needs B > 0, x >= 0 (B={b}, x={x})")));
    }
    let decay = b + 1.0 + x;
    let log_f = |w: f64| -(b + 1.0) * w.ln_1p() - x * w;
    // Upper limit where the integrand has dropped below e^-745.
    let mut hi = 1.0 / decay;
    while log_f(hi) > -745.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Special(format!("tail of I_B(x) does not decay (B={b}, x={x})")));
        }
    }
    let bk = Breaks::new(0.0, hi).graded(0.0, 0.125 / decay, 2.0, hi).build();
    let tol = Tolerance::new(0.0, 1e-13, 20_000);
    let (v, _) = integrate(|w| log_f(w).exp(), &bk, &tol).or_else(|_| {
        let loose = Tolerance::new(0.0, 1e-10, 200_000);
        integrate(|w| log_f(w).exp(), &bk, &loose)
    })?;
    Ok(v)
}

/// `L * E[phi((K - B) L)]` with `K ~ Poisson(mu)` and `phi(y) = expm1(y)/y`.
///
/// This is the combination `e^{-mu} sum_k mu^k/k! (e^{-B L} - e^{-k L})/(k - B)`
/// obtained from the power series of the lower incomplete gamma function.
/// Every term is positive, so it is summed in log space outward from the
/// Poisson mode.
pub fn poisson_gamma_sum(mu: f64, b: f64, l: f64) -> Result<f64> {
    if !(mu >= 0.0) || !(b > 0.0) || !(l > 0.0) {
        return Err(Error::Special(format!("invalid series arguments mu={mu}, B={b}, L={l}")));
    }
    if mu == 0.0 {
        return Ok(l * expm1_over(-b * l));
    }
    let mode = mu.floor();
    let ln_mu = mu.ln();
    let term = |k: f64, ln_p: f64| ln_p + ln_expm1_over((k - b) * l);
    // ln p_k relative to the mode; normalised at the end.
    let mut logs: Vec<f64> = Vec::new();
    let mut ln_p_rel: Vec<f64> = Vec::new();
    {
        let mut lp = 0.0;
        let mut k = mode;
        let peak = term(k, lp);
        let mut best = peak;
        loop {
            let t = term(k, lp);
            best = best.max(t);
            logs.push(t);
            ln_p_rel.push(lp);
            let next = k + 1.0;
            lp += ln_mu - next.ln();
            k = next;
            if t < best - 60.0 && lp < -60.0 {
                break;
            }
            if k - mode > 1e8 {
                return Err(Error::Special("Poisson series did not terminate".into()));
            }
        }
    }
    {
        let mut lp = 0.0;
        let mut k = mode;
        let mut best = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        while k >= 1.0 {
            lp += k.ln() - ln_mu;
            k -= 1.0;
            let t = term(k, lp);
            best = best.max(t);
            logs.push(t);
            ln_p_rel.push(lp);
            if t < best - 60.0 && lp < -60.0 {
                break;
            }
        }
    }
    let lse = |v: &[f64]| {
        let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    };
    // Normalise with the exact Poisson mass when the window starts at k = 0,
    // otherwise by the sum of the retained weights.
    let ln_norm = lse(&ln_p_rel);
    Ok(l * (lse(&logs) - ln_norm).exp())
}
