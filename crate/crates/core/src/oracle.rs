//! Finite-mode reference for the environment statistics.
//!
//! Both reservoirs are discretized on uniform midpoint grids. Each RI mode
//! together with its own RII sub-bath is a quadratic Hamiltonian, so its
//! Heisenberg evolution is the exponential of a `(M+1) x (M+1)` real
//! symmetric matrix. One eigendecomposition per mode gives the propagator at
//! every time; no Markov treatment of the RI damping is involved.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::correlations::{AlphaValue, RateTrace};
use crate::env_model::{occupation, CompositeEnvSpec};
use crate::error::{Error, Result};
use crate::special::exp_integral;

/// One RI mode with its RII sub-bath.
#[derive(Debug, Clone, PartialEq)]
pub struct RiMode {
    pub omega: f64,
    pub g: f64,
    pub sub_omega: Vec<f64>,
    pub sub_g: Vec<f64>,
}

/// Discretized composite environment.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteBath {
    pub spec: CompositeEnvSpec,
    pub omega_max: f64,
    pub d_omega_i: f64,
    pub d_omega_ii: f64,
    pub modes: Vec<RiMode>,
}

/// Inverse temperatures of the two reservoirs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Betas {
    pub beta_i: f64,
    pub beta_ii: f64,
}

impl Betas {
    pub fn of(spec: &CompositeEnvSpec) -> Self {
        Self { beta_i: spec.r1.beta, beta_ii: spec.r2.beta }
    }
}

/// Midpoint grids with `|g|^2 = J(w) dw / 2pi`. `m = 0` gives an RI-only bath.
pub fn discretize(spec: &CompositeEnvSpec, n: usize, m: usize, omega_max: f64) -> Result<FiniteBath> {
    spec.validate()?;
    if n < 2 || m == 1 {
        return Err(Error::Domain(format!("need N >= 2 and M = 0 or M >= 2, got N = {n}, M = {m}")));
    }
    if !(omega_max > 0.0 && omega_max.is_finite()) {
        return Err(Error::Domain(format!("omega_max must be > 0, got {omega_max}")));
    }
    let dw = omega_max / n as f64;
    let dv = if m > 0 { omega_max / m as f64 } else { 0.0 };
    let sub_omega: Vec<f64> = (0..m).map(|k| (k as f64 + 0.5) * dv).collect();
    let sub_g: Vec<f64> = sub_omega.iter().map(|&v| (spec.r2.j(v) * dv / (2.0 * PI)).sqrt()).collect();
    let modes = (0..n)
        .map(|l| {
            let w = (l as f64 + 0.5) * dw;
            RiMode {
                omega: w,
                g: (spec.r1.j(w) * dw / (2.0 * PI)).sqrt(),
                sub_omega: sub_omega.clone(),
                sub_g: sub_g.clone(),
            }
        })
        .collect();
    Ok(FiniteBath { spec: *spec, omega_max, d_omega_i: dw, d_omega_ii: dv, modes })
}

impl FiniteBath {
    /// Revival time of the discretization, `2 pi / max(dw, dw')`.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * PI / self.d_omega_i.max(self.d_omega_ii)
    }

    /// Times beyond 80% of the revival time are refused unless `force`.
    pub fn guard(&self, t: f64, force: bool) -> Result<()> {
        let limit = 0.8 * self.recurrence_time();
        if !force && t.abs() > limit {
            return Err(Error::Recurrence { t, limit });
        }
        Ok(())
    }

    pub fn block(&self, lambda: usize) -> Result<OneParticleBlock> {
        let mode = self
            .modes
            .get(lambda)
            .ok_or_else(|| Error::Domain(format!("mode index {lambda} out of range 0..{}", self.modes.len())))?;
        Ok(OneParticleBlock::new(mode))
    }

    /// `sum_lambda |g_lambda|^2`.
    pub fn coupling_weight(&self) -> f64 {
        self.modes.iter().map(|m| m.g * m.g).sum()
    }

    fn occupations(&self, mode: &RiMode, betas: &Betas, shift: f64) -> Vec<f64> {
        let mut n = Vec::with_capacity(mode.sub_omega.len() + 1);
        n.push(occupation(betas.beta_i, mode.omega) + shift);
        n.extend(mode.sub_omega.iter().map(|&v| occupation(betas.beta_ii, v) + shift));
        n
    }

    /// Reconstruct `alpha_+-` at each pair from the exact propagators.
    pub fn alpha_batch(&self, betas: &Betas, pairs: &[(f64, f64)], force: bool) -> Result<Vec<AlphaValue>> {
        for &(t, tau) in pairs {
            self.guard(t, force)?;
            self.guard(tau, force)?;
        }
        let mut times: Vec<f64> = pairs.iter().flat_map(|p| [p.0, p.1]).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let index = |x: f64| times.binary_search_by(|v| v.total_cmp(&x)).unwrap();
        let idx: Vec<(usize, usize)> = pairs.iter().map(|&(t, s)| (index(t), index(s))).collect();

        let partial: Vec<Vec<(C64, C64)>> = self
            .modes
            .par_iter()
            .map(|mode| {
                let block = OneParticleBlock::new(mode);
                let rows: Vec<Vec<C64>> = times.iter().map(|&t| block.propagator_row(t)).collect();
                let np = self.occupations(mode, betas, 0.0);
                let g2 = mode.g * mode.g;
                idx.iter()
                    .map(|&(i, j)| {
                        let (ut, us) = (&rows[i], &rows[j]);
                        let mut plus = C64::new(0.0, 0.0);
                        let mut minus = C64::new(0.0, 0.0);
                        for k in 0..np.len() {
                            let z = ut[k].conj() * us[k];
                            plus += z * np[k];
                            minus += z.conj() * (np[k] + 1.0);
                        }
                        (plus * g2, minus * g2)
                    })
                    .collect()
            })
            .collect();
        Ok(pairs
            .iter()
            .enumerate()
            .map(|(p, &(t, tau))| {
                let (mut plus, mut minus) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
                for part in &partial {
                    plus += part[p].0;
                    minus += part[p].1;
                }
                AlphaValue { t, tau, plus, minus }
            })
            .collect())
    }

    /// Rates from the finite-bath correlations, with the lag integral done
    /// exactly mode by mode.
    pub fn rates(&self, betas: &Betas, omega0: f64, t_grid: &[f64], force: bool) -> Result<RateTrace> {
        for &t in t_grid {
            self.guard(t, force)?;
        }
        let partial: Vec<Vec<(C64, C64)>> = self
            .modes
            .par_iter()
            .map(|mode| {
                let block = OneParticleBlock::new(mode);
                let np = self.occupations(mode, betas, 0.0);
                let g2 = mode.g * mode.g;
                let d = block.energies.len();
                t_grid
                    .iter()
                    .map(|&t| {
                        let row = block.propagator_row(t);
                        let lag: Vec<C64> =
                            block.energies.iter().map(|&e| exp_integral(C64::new(0.0, omega0 - e), t)).collect();
                        let ph = C64::from_polar(1.0, -omega0 * t);
                        let mut p = C64::new(0.0, 0.0);
                        let mut q = C64::new(0.0, 0.0);
                        for j in 0..d {
                            let mut s = C64::new(0.0, 0.0);
                            for (mi, l) in lag.iter().enumerate() {
                                s += *l * block.weights[j * d + mi];
                            }
                            let z = row[j].conj() * s * ph;
                            p += z * np[j];
                            q += z * (np[j] + 1.0);
                        }
                        (p * g2, q * g2)
                    })
                    .collect()
            })
            .collect();
        let mut gp = Vec::with_capacity(t_grid.len());
        let mut gm = Vec::with_capacity(t_grid.len());
        let mut dw = Vec::with_capacity(t_grid.len());
        for i in 0..t_grid.len() {
            let (mut p, mut q) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for part in &partial {
                p += part[i].0;
                q += part[i].1;
            }
            let m = q.conj();
            gp.push(2.0 * p.re);
            gm.push(2.0 * m.re);
            dw.push(-p.im + m.im);
        }
        Ok(RateTrace { times: t_grid.to_vec(), gamma_plus: gp, gamma_minus: gm, delta_omega: dw })
    }
}

/// Exact one-particle propagator of one RI mode and its sub-bath.
#[derive(Debug, Clone)]
pub struct OneParticleBlock {
    pub h: DMatrix<f64>,
    pub energies: Vec<f64>,
    /// `V_{0m} V_{jm}` laid out row-major in `(j, m)`.
    weights: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl OneParticleBlock {
    pub fn new(mode: &RiMode) -> Self {
        let d = mode.sub_omega.len() + 1;
        let mut h = DMatrix::<f64>::zeros(d, d);
        h[(0, 0)] = mode.omega;
        for k in 1..d {
            h[(k, k)] = mode.sub_omega[k - 1];
            h[(0, k)] = mode.sub_g[k - 1];
            h[(k, 0)] = mode.sub_g[k - 1];
        }
        let eig = SymmetricEigen::new(h.clone());
        let v = eig.eigenvectors;
        let mut weights = vec![0.0; d * d];
        for j in 0..d {
            for m in 0..d {
                weights[j * d + m] = v[(0, m)] * v[(j, m)];
            }
        }
        Self { h, energies: eig.eigenvalues.iter().copied().collect(), weights, vectors: v }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// First row `[U(t)]_{0j}` of `U(t) = exp(-i h t)`.
    pub fn propagator_row(&self, t: f64) -> Vec<C64> {
        let d = self.dim();
        let ph: Vec<C64> = self.energies.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect();
        (0..d)
            .map(|j| {
                let w = &self.weights[j * d..(j + 1) * d];
                w.iter().zip(&ph).map(|(a, p)| p * *a).sum()
            })
            .collect()
    }

    /// Full propagator matrix.
    pub fn propagator(&self, t: f64) -> DMatrix<C64> {
        let d = self.dim();
        let v = self.vectors.map(|x| C64::new(x, 0.0));
        let ph = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d,
            self.energies.iter().map(|&e| C64::from_polar(1.0, -e * t)),
        ));
        &v * ph * v.transpose()
    }
}

/// `alpha_+-(t, tau)` of a finite bath; guarded against revivals.
pub fn alpha_exact_finite(bath: &FiniteBath, betas: &Betas, t: f64, tau: f64) -> Result<(C64, C64)> {
    if !(tau >= 0.0) || !(t >= tau) {
        return Err(Error::Domain(format!("oracle needs 0 <= tau <= t, got t = {t}, tau = {tau}")));
    }
    let v = bath.alpha_batch(betas, &[(t, tau)], false)?;
    Ok((v[0].plus, v[0].minus))
}

/// Deviation of the exact RI amplitude from its Weisskopf-Wigner form.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerWeisskopfReport {
    pub lambda: usize,
    pub omega: f64,
    pub damping: f64,
    pub max_abs_deviation: f64,
    pub at_time: f64,
}

pub fn validate_wigner_weisskopf(bath: &FiniteBath, lambda: usize, t_grid: &[f64]) -> Result<WignerWeisskopfReport> {
    let block = bath.block(lambda)?;
    let w = bath.modes[lambda].omega;
    let g = bath.spec.damping(w);
    let mut worst = 0.0;
    let mut at = 0.0;
    for &t in t_grid {
        bath.guard(t, false)?;
        let exact = block.propagator_row(t)[0];
        let approx = C64::new(-g * t, -w * t).exp();
        let d = (exact - approx).norm();
        if d > worst {
            worst = d;
            at = t;
        }
    }
    Ok(WignerWeisskopfReport { lambda, omega: w, damping: g, max_abs_deviation: worst, at_time: at })
}

/// Richardson-style error estimate: values at `(n, m)` and the deviation
/// from the `(n/2, m/2)` discretization divided by three.
pub fn alpha_with_error(
    spec: &CompositeEnvSpec,
    n: usize,
    m: usize,
    omega_max: f64,
    pairs: &[(f64, f64)],
) -> Result<Vec<(AlphaValue, f64)>> {
    let betas = Betas::of(spec);
    let fine = discretize(spec, n, m, omega_max)?.alpha_batch(&betas, pairs, false)?;
    let coarse = discretize(spec, n / 2, m / 2, omega_max)?.alpha_batch(&betas, pairs, true)?;
    Ok(fine
        .into_iter()
        .zip(coarse)
        .map(|(f, c)| {
            let e = (f.plus - c.plus).norm().max((f.minus - c.minus).norm()) / 3.0;
            (f, e)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CompositeEnvSpec {
        CompositeEnvSpec::ohmic(1e-2, 1e-3, 10.0, 1.0, 0.1).unwrap()
    }

    #[test]
    fn propagator_is_unitary_and_starts_at_identity() {
        let bath = discretize(&small(), 20, 40, 40.0).unwrap();
        let b = bath.block(3).unwrap();
        let u0 = b.propagator(0.0);
        let id = DMatrix::<C64>::identity(b.dim(), b.dim());
        assert!((&u0 - &id).norm() < 1e-12);
        let u = b.propagator(7.3);
        let prod = u.adjoint() * &u;
        assert!((prod - id).norm() < 1e-10);
        let row = b.propagator_row(7.3);
        for j in 0..b.dim() {
            assert!((row[j] - u[(0, j)]).norm() < 1e-12);
        }
    }

    #[test]
    fn decoupled_subbath_gives_stationary_sum() {
        let spec = CompositeEnvSpec::ohmic(1e-2, 0.0, 10.0, 1.0, 0.1).unwrap();
        let bath = discretize(&spec, 30, 10, 40.0).unwrap();
        let betas = Betas::of(&spec);
        let (p, _) = alpha_exact_finite(&bath, &betas, 1.2, 0.5).unwrap();
        let exact: C64 = bath
            .modes
            .iter()
            .map(|m| C64::from_polar(m.g * m.g * occupation(1.0, m.omega), m.omega * 0.7))
            .sum();
        assert!((p - exact).norm() < 1e-13);
    }

    #[test]
    fn commutator_sum_rule() {
        let bath = discretize(&small(), 25, 25, 40.0).unwrap();
        let (p, m) = alpha_exact_finite(&bath, &Betas::of(&small()), 0.0, 0.0).unwrap();
        assert!(((m - p).re - bath.coupling_weight()).abs() < 1e-14);
        assert!((m - p).im.abs() < 1e-14);
    }

    #[test]
    fn recurrence_guard() {
        let bath = discretize(&small(), 40, 40, 40.0).unwrap();
        let limit = 0.8 * bath.recurrence_time();
        assert!(alpha_exact_finite(&bath, &Betas::of(&small()), limit * 1.01, 0.0).is_err());
        assert!(bath.alpha_batch(&Betas::of(&small()), &[(limit * 1.01, 0.0)], true).is_ok());
    }

    #[test]
    fn ri_only_bath() {
        let bath = discretize(&small(), 10, 0, 40.0).unwrap();
        assert!(bath.modes.iter().all(|m| m.sub_omega.is_empty()));
        let r = validate_wigner_weisskopf(&bath, 2, &[0.0, 0.5, 1.0]).unwrap();
        // no sub-bath: the exact amplitude is a pure phase, the WW form decays
        assert!(r.max_abs_deviation <= r.damping * 1.0 + 1e-15);
    }
}
