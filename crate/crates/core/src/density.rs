//! Transition densities of the killed walks and their survival functions.

use crate::error::{Error, Result};
use crate::exittime::p2_series;
use crate::harmonic::{h_equal_raw, h_for_rates_raw};
use crate::mathcore::special::{gamma_lower_quantile, gamma_upper_quantile, ln_factorial, ln_gamma_density, ln_q_poly};
use crate::mathcore::{chamber_integrate_refined, log_det, log_det_of_logs, ChamberSpec, LogSigned, SquareMatrix};
use crate::mcsim::{self, SimConfig};
use crate::rng::{map_chunks, MeanVar};
use crate::walkmodel::{check_ordered, vandermonde, KillKind, Rates, Regime};
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Determinant density of the walk killed by `kill`, started at `x`.
///
/// Entries carry the factor e^{-c (z_j - x_i)} with `c` the mean rate so
/// they stay within floating range for long horizons.
#[derive(Debug, Clone)]
pub(crate) struct KilledKernel {
    x: Vec<f64>,
    n: i64,
    lam: Vec<f64>,
    c: f64,
    kill: KillKind,
    ln_lam_n: f64,
}

impl KilledKernel {
    pub(crate) fn new(x: &[f64], n: u32, rates: &Rates, kill: KillKind) -> Self {
        let c = rates.mean();
        let ln_lam_n = f64::from(n) * rates.rates.iter().map(|l| l.ln()).sum::<f64>();
        KilledKernel { x: x.to_vec(), n: i64::from(n), lam: rates.rates.clone(), c, kill, ln_lam_n }
    }

    fn index(&self, i: usize, j: usize) -> i64 {
        match self.kill {
            KillKind::Rho => self.n,
            KillKind::Tau => self.n + i as i64 - j as i64,
        }
    }

    pub(crate) fn eval(&self, z: &[f64]) -> Result<LogSigned> {
        let d = self.x.len();
        let mut small = [LogSigned::ZERO; 16];
        let mut heap = Vec::new();
        let entries: &mut [LogSigned] = if d <= 4 {
            &mut small[..d * d]
        } else {
            heap.resize(d * d, LogSigned::ZERO);
            &mut heap
        };
        let mut scale = 0.0;
        for i in 0..d {
            let mut row_max = f64::NEG_INFINITY;
            for j in 0..d {
                let t = z[j] - self.x[i];
                let l = ln_q_poly(self.index(i, j), t) - self.c * t;
                row_max = row_max.max(l);
                entries[i * d + j] = LogSigned::from_log(l);
            }
            scale += row_max;
        }
        let det = log_det_of_logs(d, entries)?;
        let det = if det.sign < 0 {
            if det.log_abs - scale > (1e-12f64).ln() {
                return Err(Error::NumericalConsistency(format!(
                    "negative killed density at {z:?} (relative size {:.3e})",
                    (det.log_abs - scale).exp()
                )));
            }
            LogSigned::ZERO
        } else {
            det
        };
        let tilt: f64 = (0..d).map(|j| (self.lam[j] - self.c) * (z[j] - self.x[j])).sum();
        Ok(det * LogSigned::from_log(self.ln_lam_n - tilt))
    }

    /// Plain value for integrands; failures become NaN and are caught by
    /// the caller.
    pub(crate) fn value(&self, z: &[f64]) -> f64 {
        self.eval(z).map(|v| v.value()).unwrap_or(f64::NAN)
    }
}

fn check_pair(x: &[f64], z: &[f64], n: u32, rates: &Rates) -> Result<()> {
    check_ordered(x, false)?;
    check_ordered(z, false)?;
    if x.len() != z.len() {
        return Err(Error::Dimension("start and end points differ in length".into()));
    }
    rates.check_dim(x.len())?;
    if n == 0 {
        return Err(Error::InvalidInput("number of steps must be at least 1".into()));
    }
    Ok(())
}

/// n-step density of the walk killed when interlacing fails.
pub fn g_tilde(x: &[f64], z: &[f64], n: u32, rates: &Rates) -> Result<LogSigned> {
    check_pair(x, z, n, rates)?;
    KilledKernel::new(x, n, rates, KillKind::Rho).eval(z)
}

/// n-step density of the walk killed on leaving the chamber.
pub fn g_killed(x: &[f64], z: &[f64], n: u32, rates: &Rates) -> Result<LogSigned> {
    check_pair(x, z, n, rates)?;
    KilledKernel::new(x, n, rates, KillKind::Tau).eval(z)
}

pub fn killed_density(x: &[f64], z: &[f64], n: u32, rates: &Rates, kill: KillKind) -> Result<LogSigned> {
    match kill {
        KillKind::Tau => g_killed(x, z, n, rates),
        KillKind::Rho => g_tilde(x, z, n, rates),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Unit equal rates: Monte Carlo over the gamma mixture representation of
/// the chamber-killed density (needs n >= d).
pub fn g_killed_mixture(x: &[f64], z: &[f64], n: u32, samples: u64, seed: u64, streams: u32) -> Result<Estimate> {
    let d = x.len();
    check_pair(x, z, n, &Rates::equal(d, 1.0)?)?;
    if (n as usize) < d {
        return Err(Error::InvalidInput(format!("mixture form needs n >= d ({n} < {d})")));
    }
    let shape = i64::from(n) - d as i64 + 1;
    let gammas: Vec<Option<Gamma<f64>>> =
        (0..d).map(|k| if k == 0 { None } else { Some(Gamma::new(k as f64, 1.0).unwrap()) }).collect();
    let parts = map_chunks(seed, samples, streams, |rng, _, _, len| {
        let mut acc = MeanVar::default();
        let mut eta = vec![0.0; d];
        let mut chi = vec![0.0; d];
        for _ in 0..len {
            for i in 0..d {
                eta[i] = gammas[i].as_ref().map_or(0.0, |g| g.sample(rng));
                chi[i] = gammas[d - 1 - i].as_ref().map_or(0.0, |g| g.sample(rng));
            }
            let m = SquareMatrix::from_fn(d, |i, j| ln_gamma_density(shape, z[j] - chi[j] - x[i] - eta[i]).exp());
            acc.push(log_det(&m).map(|v| v.value()).unwrap_or(f64::NAN));
        }
        acc
    });
    let mv = MeanVar::combine(parts);
    Ok(Estimate { value: mv.mean, stderr: mv.stderr() })
}

/// Density of the h-transformed (conditioned) walk.
pub fn conditioned_density(x: &[f64], z: &[f64], n: u32, rates: &Rates) -> Result<f64> {
    if !matches!(rates.regime, Regime::Equal | Regime::StrictlyDecreasing) {
        return Err(Error::Regime("conditioning needs equal or strictly decreasing rates".into()));
    }
    let g = g_killed(x, z, n, rates)?;
    Ok(g.value() * h_for_rates_raw(z, rates)? / h_for_rates_raw(x, rates)?)
}

/// Relative defect of the Chapman-Kolmogorov relation
/// int G_n(x, y) G_m(y, z) dy = G_{n+m}(x, z), by quadrature.
pub fn semigroup_residual(x: &[f64], z: &[f64], n: u32, m: u32, rates: &Rates, kill: KillKind) -> Result<f64> {
    check_pair(x, z, n, rates)?;
    if m == 0 {
        return Err(Error::InvalidInput("m must be at least 1".into()));
    }
    let d = x.len();
    if d > 3 {
        return Err(Error::Capability("semigroup check supports d <= 3".into()));
    }
    let k1 = KilledKernel::new(x, n, rates, kill);
    let target = KilledKernel::new(x, n + m, rates, kill).eval(z)?.value();
    if target == 0.0 {
        return Err(Error::Domain(format!("{z:?} is not reachable from {x:?} in {} steps", n + m)));
    }
    let ln_m = f64::from(m) * rates.rates.iter().map(|l| l.ln()).sum::<f64>();
    let c = rates.mean();
    let lam = rates.rates.clone();
    let zz = z.to_vec();
    let integrand = |y: &[f64]| {
        let a = k1.value(y);
        if a == 0.0 {
            return 0.0;
        }
        // second factor with its own start y
        let mut entries = [LogSigned::ZERO; 16];
        for i in 0..d {
            for j in 0..d {
                let idx = match kill {
                    KillKind::Rho => i64::from(m),
                    KillKind::Tau => i64::from(m) + i as i64 - j as i64,
                };
                let t = zz[j] - y[i];
                entries[i * d + j] = LogSigned::from_log(ln_q_poly(idx, t) - c * t);
            }
        }
        let tilt: f64 = (0..d).map(|j| (lam[j] - c) * (zz[j] - y[j])).sum();
        let b = log_det_of_logs(d, &entries[..d * d]).map(|v| v.value()).unwrap_or(f64::NAN);
        a * b * (ln_m - tilt).exp()
    };
    let spec = ChamberSpec::new(x.to_vec(), z.to_vec())
        .with_breakpoints(x.iter().chain(z).copied())
        .with_max_panel(2.0);
    let v = chamber_integrate_refined(&integrand, &spec, 8, 128, 1e-10, target.abs())?;
    if v.is_nan() {
        return Err(Error::NumericalConsistency("density evaluation failed inside the integral".into()));
    }
    Ok(((v - target) / target).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurvivalMethod {
    Quadrature,
    ExactD2,
    MonteCarlo,
}

impl std::str::FromStr for SurvivalMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quadrature" => Ok(Self::Quadrature),
            "exactd2" | "exact" => Ok(Self::ExactD2),
            "montecarlo" | "mc" => Ok(Self::MonteCarlo),
            _ => Err(Error::InvalidInput(format!("unknown survival method '{s}'"))),
        }
    }
}

/// Integration box for n-step positions: gamma quantiles per coordinate.
pub(crate) fn position_box(x: &[f64], n: u32, rates: &Rates, tail: f64) -> ChamberSpec {
    let a = f64::from(n);
    let lo_q = gamma_lower_quantile(a, tail);
    let hi_q = gamma_upper_quantile(a, tail);
    // Conditioned on a rare survival event the particles travel at a common
    // speed, so every coordinate gets the envelope over all rates.
    let lam_max = rates.rates.iter().cloned().fold(0.0, f64::max);
    let lam_min = rates.rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let lower: Vec<f64> = x.iter().map(|v| v + lo_q / lam_max).collect();
    let upper: Vec<f64> = x.iter().map(|v| v + hi_q / lam_min).collect();
    ChamberSpec::new(lower, upper)
        .with_breakpoints(x.iter().copied())
        .with_max_panel((1.5 * a.sqrt()).max(4.0) / lam_max)
}

/// P_x(kill > n).
pub fn survival(
    x: &[f64],
    n: u32,
    rates: &Rates,
    kill: KillKind,
    method: SurvivalMethod,
    mc: Option<&SimConfig>,
) -> Result<Estimate> {
    let d = x.len();
    rates.check_dim(d)?;
    check_ordered(x, false)?;
    if d == 1 {
        return Ok(Estimate { value: 1.0, stderr: 0.0 });
    }
    if n == 0 {
        return Ok(Estimate { value: 1.0, stderr: 0.0 });
    }
    match method {
        SurvivalMethod::Quadrature => {
            if d > 3 {
                return Err(Error::Capability("quadrature survival supports d <= 3".into()));
            }
            let k = KilledKernel::new(x, n, rates, kill);
            let spec = position_box(x, n, rates, 1e-17);
            let v = chamber_integrate_refined(&|y| k.value(y), &spec, 12, 192, 1e-9, 1e-300)?;
            if v.is_nan() {
                return Err(Error::NumericalConsistency("density evaluation failed inside the integral".into()));
            }
            Ok(Estimate { value: v, stderr: 0.0 })
        }
        SurvivalMethod::ExactD2 => {
            if d != 2 || kill != KillKind::Rho {
                return Err(Error::Capability("exact survival is available for d = 2 and the interlacing kill".into()));
            }
            if rates.regime != Regime::Equal {
                return Err(Error::Regime("exact survival needs equal rates".into()));
            }
            let l = rates.rates[0];
            Ok(Estimate { value: p2_series(l * x[0], l * x[1], n - 1)?, stderr: 0.0 })
        }
        SurvivalMethod::MonteCarlo => {
            let cfg = mc.cloned().unwrap_or_default();
            mcsim::survival_estimate(x, n, rates, kill, &cfg)
        }
    }
}

/// The constant in the local limit theorem, (2 pi)^{-d/2} / prod_{j<d} j!.
pub fn llt_constant(d: usize) -> f64 {
    let f: f64 = (1..d).map(|j| ln_factorial(j as u64)).sum();
    ((-(d as f64) / 2.0) * (2.0 * PI).ln() - f).exp()
}

/// Ratio of the killed density at n + z to its local-limit prediction
/// (unit equal rates).
pub fn llt_ratio(x: &[f64], z: &[f64], n: u32, kill: KillKind) -> Result<f64> {
    let d = x.len();
    let rates = Rates::equal(d, 1.0)?;
    let shifted: Vec<f64> = z.iter().map(|v| v + f64::from(n)).collect();
    let g = killed_density(x, &shifted, n, &rates, kill)?;
    let (hx, hz) = match kill {
        KillKind::Tau => {
            let r: Vec<f64> = z.iter().rev().map(|v| -v).collect();
            (h_equal_raw(x), h_equal_raw(&r))
        }
        KillKind::Rho => (vandermonde(x), vandermonde(z)),
    };
    let p = (d * (d - 1)) as f64 / 2.0 + d as f64 / 2.0;
    let ln = g.log_abs + p * f64::from(n).ln() - (llt_constant(d) * hx * hz).ln();
    Ok(f64::from(g.sign) * ln.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_step_values() {
        let r = Rates::equal(2, 1.0).unwrap();
        let e = (-1.5f64).exp();
        assert_relative_eq!(g_tilde(&[0.0, 1.0], &[0.5, 2.0], 1, &r).unwrap().value(), e, max_relative = 1e-14);
        assert_relative_eq!(g_killed(&[0.0, 1.0], &[0.5, 2.0], 1, &r).unwrap().value(), e, max_relative = 1e-14);
        assert_eq!(g_tilde(&[0.0, 1.0], &[1.5, 2.0], 1, &r).unwrap().value(), 0.0);
        // product of the two one-step densities e^{-1.5} e^{-1}
        let direct = (-2.5f64).exp();
        assert_relative_eq!(g_killed(&[0.0, 1.0], &[1.5, 2.0], 1, &r).unwrap().value(), direct, max_relative = 1e-14);
    }

    #[test]
    fn single_walk_is_gamma() {
        let r = Rates::equal(1, 1.0).unwrap();
        let v = g_killed(&[0.5], &[3.5], 4, &r).unwrap().value();
        assert_relative_eq!(v, ln_gamma_density(4, 3.0).exp(), max_relative = 1e-14);
    }

    #[test]
    fn survival_small_cases() {
        let r = Rates::equal(2, 1.0).unwrap();
        let rho = survival(&[0.0, 1.0], 1, &r, KillKind::Rho, SurvivalMethod::Quadrature, None).unwrap();
        assert!((rho.value - (1.0 - (-1f64).exp())).abs() < 1e-9);
        let tau = survival(&[0.0, 1.0], 1, &r, KillKind::Tau, SurvivalMethod::Quadrature, None).unwrap();
        assert!((tau.value - (1.0 - 0.5 * (-1f64).exp())).abs() < 1e-9);
        let ex = survival(&[0.0, 1.0], 1, &r, KillKind::Rho, SurvivalMethod::ExactD2, None).unwrap();
        assert!((ex.value - 0.632_120_6).abs() < 1e-7);
    }

    #[test]
    fn semigroup_small() {
        let r = Rates::equal(2, 1.0).unwrap();
        assert!(semigroup_residual(&[0.0, 1.0], &[3.0, 5.0], 2, 2, &r, KillKind::Tau).unwrap() < 1e-8);
        assert!(semigroup_residual(&[0.0, 1.0], &[3.0, 5.0], 1, 2, &r, KillKind::Rho).unwrap() < 1e-8);
    }
}
