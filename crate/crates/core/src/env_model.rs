//! Spectral densities, thermal occupations and the parameter types of the
//! system and its composite environments.
//!
//! Frequencies are measured in units of the level splitting by convention,
//! but every routine takes `omega0` explicitly so any choice of unit works.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Caldeira-Leggett parameters of one bath: `J(w) = g wc^(1-s) w^s exp(-w/wc)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralParams {
    pub g: f64,
    pub s: f64,
    pub omega_c: f64,
}

impl SpectralParams {
    pub fn new(g: f64, s: f64, omega_c: f64) -> Result<Self> {
        let p = Self { g, s, omega_c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(Error::InvalidParams(format!("coupling g must be finite and >= 0, got {}", self.g)));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::InvalidParams(format!("ohmicity s must be > 0, got {}", self.s)));
        }
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(Error::InvalidParams(format!("cutoff omega_c must be > 0, got {}", self.omega_c)));
        }
        Ok(())
    }

    /// Unchecked evaluation for `omega >= 0`.
    #[inline]
    pub fn density(&self, omega: f64) -> f64 {
        if omega <= 0.0 || self.g == 0.0 {
            return 0.0;
        }
        let x = omega / self.omega_c;
        self.g * self.omega_c * x.powf(self.s) * (-x).exp()
    }
}

/// Spectral density `J(omega)`; zero at the origin.
pub fn spectral_density(p: &SpectralParams, omega: f64) -> Result<f64> {
    if omega.is_nan() || omega < 0.0 {
        return Err(Error::Domain(format!("spectral density needs omega >= 0, got {omega}")));
    }
    Ok(p.density(omega))
}

/// Bose-Einstein occupation `1/(exp(beta omega) - 1)`.
pub fn bose_occupation(beta: f64, omega: f64) -> Result<f64> {
    if omega.is_nan() || omega <= 0.0 {
        return Err(Error::Domain(format!("occupation needs omega > 0, got {omega}")));
    }
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::Domain(format!("occupation needs beta > 0, got {beta}")));
    }
    Ok(occupation(beta, omega))
}

#[inline]
pub(crate) fn occupation(beta: f64, omega: f64) -> f64 {
    1.0 / (beta * omega).exp_m1()
}

/// A thermal bath: spectral density plus inverse temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSpec {
    pub spectral: SpectralParams,
    pub beta: f64,
}

impl BathSpec {
    pub fn new(spectral: SpectralParams, beta: f64) -> Result<Self> {
        let b = Self { spectral, beta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        self.spectral.validate()?;
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "inverse temperature must be finite and > 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn j(&self, omega: f64) -> f64 {
        self.spectral.density(omega)
    }

    #[inline]
    pub fn n(&self, omega: f64) -> f64 {
        occupation(self.beta, omega)
    }

    /// `J(w) n(w)`, continued to its finite limit at `w = 0` when `s = 1`.
    #[inline]
    pub fn jn(&self, omega: f64) -> f64 {
        let p = &self.spectral;
        if p.g == 0.0 {
            return 0.0;
        }
        let x = omega / p.omega_c;
        let bw = self.beta * omega;
        // x^s/(e^bw - 1) = x^(s-1) (bw/(e^bw - 1)) / (beta omega_c), finite at the origin.
        let ratio = if bw < 1e-300 { 1.0 } else { bw / bw.exp_m1() };
        p.g * x.powf(p.s - 1.0) * ratio * (-x).exp() / self.beta
    }

    /// `J(w) (n(w) + 1)`.
    #[inline]
    pub fn jn1(&self, omega: f64) -> f64 {
        self.jn(omega) + self.j(omega)
    }

    /// Bloch z-component of the thermal state at this temperature.
    pub fn thermal_pz(&self, omega0: f64) -> f64 {
        -(0.5 * self.beta * omega0).tanh()
    }
}

/// The directly coupled reservoir RI and the reservoir RII that drives it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeEnvSpec {
    pub r1: BathSpec,
    pub r2: BathSpec,
}

impl CompositeEnvSpec {
    pub fn new(r1: BathSpec, r2: BathSpec) -> Result<Self> {
        let c = Self { r1, r2 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.r1.validate()?;
        self.r2.validate()
    }

    /// Weisskopf-Wigner damping `J_II(w)/2` of an RI mode at frequency `w`.
    #[inline]
    pub fn damping(&self, omega: f64) -> f64 {
        0.5 * self.r2.j(omega)
    }

    /// Spectral values at the system frequency.
    pub fn resonant(&self, omega0: f64) -> Resonant {
        Resonant {
            j1: self.r1.j(omega0),
            j2: self.r2.j(omega0),
            n1: self.r1.n(omega0),
            n2: self.r2.n(omega0),
        }
    }

    /// Convenience constructor for the common case of equal ohmicity and cutoff.
    pub fn ohmic(g1: f64, g2: f64, omega_c: f64, beta1: f64, beta2: f64) -> Result<Self> {
        Self::new(
            BathSpec::new(SpectralParams::new(g1, 1.0, omega_c)?, beta1)?,
            BathSpec::new(SpectralParams::new(g2, 1.0, omega_c)?, beta2)?,
        )
    }
}

/// `J_I, J_II, n_I, n_II` evaluated at the system frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonant {
    pub j1: f64,
    pub j2: f64,
    pub n1: f64,
    pub n2: f64,
}

impl Resonant {
    /// `gamma_+ + gamma_-` never exceeds this under the approximate rates.
    pub fn total_rate_bound(&self) -> f64 {
        self.j1 * (2.0 * self.n1.max(self.n2) + 1.0)
    }
}

/// The two-level system `H_S = omega0 sigma_z / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub omega0: f64,
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self { omega0: 1.0 }
    }
}

impl SystemSpec {
    pub fn new(omega0: f64) -> Result<Self> {
        let s = Self { omega0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::InvalidParams(format!("omega0 must be > 0, got {}", self.omega0)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn density_examples() {
        let p = SpectralParams::new(1e-2, 1.0, 10.0).unwrap();
        assert!(rel(spectral_density(&p, 1.0).unwrap(), 1e-2 * (-0.1f64).exp()) < 1e-14);
        assert!(rel(spectral_density(&p, 1.0).unwrap(), 9.048e-3) < 1e-4);
        assert_eq!(spectral_density(&p, 0.0).unwrap(), 0.0);
        let q = SpectralParams::new(1e-5, 1.0, 10.0).unwrap();
        assert!(rel(spectral_density(&q, 1.0).unwrap(), 9.048e-6) < 1e-4);
        assert!(spectral_density(&p, -1.0).is_err());
    }

    #[test]
    fn occupation_examples() {
        assert!(rel(bose_occupation(1.0, 1.0).unwrap(), 0.58198) < 1e-5);
        assert!(rel(bose_occupation(0.1, 1.0).unwrap(), 9.5083) < 1e-5);
        assert!(bose_occupation(1e3, 1.0).unwrap() < 1e-300);
        assert!(bose_occupation(1.0, 0.0).is_err());
        assert!(bose_occupation(0.0, 1.0).is_err());
    }

    #[test]
    fn jn_limit_at_origin() {
        let b = BathSpec::new(SpectralParams::new(2e-2, 1.0, 10.0).unwrap(), 0.5).unwrap();
        assert!(rel(b.jn(0.0), 2e-2 / 0.5) < 1e-14);
        let w = 0.7;
        assert!(rel(b.jn(w), b.j(w) * b.n(w)) < 1e-13);
        let sub = BathSpec::new(SpectralParams::new(1e-2, 2.5, 3.0).unwrap(), 2.0).unwrap();
        assert!(rel(sub.jn(1.3), sub.j(1.3) * sub.n(1.3)) < 1e-13);
    }

    #[test]
    fn rejects_invalid() {
        assert!(SpectralParams::new(-1.0, 1.0, 1.0).is_err());
        assert!(SpectralParams::new(1.0, 0.0, 1.0).is_err());
        assert!(SpectralParams::new(1.0, 1.0, 0.0).is_err());
        let p = SpectralParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(BathSpec::new(p, 0.0).is_err());
        assert!(BathSpec::new(p, f64::INFINITY).is_err());
        assert!(SystemSpec::new(-1.0).is_err());
    }
}
