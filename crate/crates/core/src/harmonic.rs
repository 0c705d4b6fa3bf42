//! Positive harmonic functions of the killed walks.
//!
//! For equal rates the function for the chamber exit time is
//! `h(x) = E[Vandermonde(x + eta)]` with independent `eta_j ~ Gamma(j-1)`;
//! for interlacing it is the plain Vandermonde product.

use crate::error::{Error, Result};
use crate::mathcore::special::{binom, gamma_upper_quantile, laguerre, ln_factorial, shifted_moments};
use crate::mathcore::{chamber_integrate_refined, log_det, log_det_of_logs, ChamberSpec, LogSigned, SquareMatrix};
use crate::rng::{map_chunks, MeanVar};
use crate::walkmodel::{check_ordered, vandermonde, KillKind, Rates, Regime};
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

fn sign_flip(d: usize) -> f64 {
    if (d * (d.saturating_sub(1)) / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// h for unit equal rates without any ordering check.
pub(crate) fn h_equal_raw(x: &[f64]) -> f64 {
    let d = x.len();
    if d <= 1 {
        return 1.0;
    }
    // h is translation invariant, so expand around the mean of x + E[eta]
    let c = x.iter().enumerate().map(|(j, v)| v + j as f64).sum::<f64>() / d as f64;
    let cols: Vec<Vec<f64>> = (0..d).map(|j| shifted_moments(x[j] - c, j as f64, d - 1)).collect();
    let m = SquareMatrix::from_fn(d, |i, j| cols[j][i]);
    log_det(&m).map(|v| v.value()).unwrap_or(f64::NAN)
}

/// Harmonic function for unit equal rates, as a moment determinant.
pub fn h_equal(x: &[f64]) -> Result<f64> {
    check_ordered(x, false)?;
    Ok(h_equal_raw(x))
}

/// Equal rates `rate`: h(x) = rate^{-d(d-1)/2} h_1(rate x).
pub fn h_equal_scaled(x: &[f64], rate: f64) -> Result<f64> {
    check_ordered(x, false)?;
    Ok(h_equal_scaled_raw(x, rate))
}

pub(crate) fn h_equal_scaled_raw(x: &[f64], rate: f64) -> f64 {
    let d = x.len() as i32;
    let y: Vec<f64> = x.iter().map(|v| v * rate).collect();
    h_equal_raw(&y) * rate.powi(-d * (d - 1) / 2)
}

/// Same function through derivatives of x^{i-1} e^{-x}.
pub fn h_equal_phi(x: &[f64]) -> Result<f64> {
    check_ordered(x, false)?;
    let d = x.len();
    // e^{x} d^k/dx^k (x^a e^{-x}) = sum_r C(k,r) (-1)^{k-r} a!/(a-r)! x^{a-r}
    let entry = |a: usize, k: usize, v: f64| -> f64 {
        (0..=k.min(a))
            .map(|r| {
                let s = if (k - r) % 2 == 0 { 1.0 } else { -1.0 };
                let falling = (ln_factorial(a as u64) - ln_factorial((a - r) as u64)).exp();
                s * binom(k as u32, r as u32) * falling * v.powi((a - r) as i32)
            })
            .sum()
    };
    let m = SquareMatrix::from_fn(d, |i, j| entry(i, d - 1 - j, x[j]));
    Ok(sign_flip(d) * log_det(&m)?.value())
}

/// Same function through generalized Laguerre polynomials; needs x_j != 0.
pub fn h_equal_laguerre(x: &[f64]) -> Result<f64> {
    check_ordered(x, false)?;
    if x.iter().any(|&v| v == 0.0) {
        return Err(Error::Domain("Laguerre form needs nonzero coordinates".into()));
    }
    let d = x.len() as i64;
    let m = SquareMatrix::from_fn(x.len(), |i0, j0| {
        let (i, j) = (i0 as i64 + 1, j0 as i64 + 1);
        let alpha = j + i - 1 - d;
        x[j0].powi(alpha as i32) * laguerre((d - j) as u32, alpha, x[j0])
    });
    let fact: f64 = (1..d).map(|j| ln_factorial(j as u64)).sum::<f64>().exp();
    Ok(sign_flip(x.len()) * fact * log_det(&m)?.value())
}

fn require_distinct(rates: &Rates) -> Result<()> {
    if rates.regime == Regime::Equal || !rates.all_distinct() {
        return Err(Error::Regime("this form needs pairwise distinct rates".into()));
    }
    Ok(())
}

pub(crate) fn h_distinct_raw(x: &[f64], lam: &[f64]) -> f64 {
    let d = x.len();
    // row i carries the prefactor e^{lam_i x_i}
    let entries: Vec<LogSigned> = (0..d)
        .flat_map(|i| {
            (0..d).map(move |j| {
                LogSigned::from_log((i as f64 - j as f64) * lam[i].ln() - lam[i] * (x[j] - x[i]))
            })
        })
        .collect();
    log_det_of_logs(d, &entries).map(|v| v.value()).unwrap_or(f64::NAN)
}

/// Harmonic function for pairwise distinct rates.
pub fn h_distinct(x: &[f64], rates: &Rates) -> Result<f64> {
    check_ordered(x, false)?;
    rates.check_dim(x.len())?;
    require_distinct(rates)?;
    Ok(h_distinct_raw(x, &rates.rates))
}

/// Chamber harmonic function for whichever rate regime applies.
pub fn h_for_rates(x: &[f64], rates: &Rates) -> Result<f64> {
    check_ordered(x, false)?;
    rates.check_dim(x.len())?;
    h_for_rates_raw(x, rates)
}

pub(crate) fn h_for_rates_raw(x: &[f64], rates: &Rates) -> Result<f64> {
    match rates.regime {
        Regime::Equal => Ok(h_equal_scaled_raw(x, rates.rates[0])),
        _ if rates.all_distinct() => Ok(h_distinct_raw(x, &rates.rates)),
        _ => Err(Error::Regime("rates with ties are not covered".into())),
    }
}

/// h evaluated at the reflected point (-z_d, ..., -z_1).
pub fn h_hat(z: &[f64]) -> Result<f64> {
    check_ordered(z, false)?;
    let r: Vec<f64> = z.iter().rev().map(|v| -v).collect();
    Ok(h_equal_raw(&r))
}

pub(crate) fn frak_h_raw(x: &[f64], rates: &Rates) -> Result<f64> {
    match rates.regime {
        Regime::Equal => Ok(vandermonde(x)),
        _ if rates.all_distinct() => {
            let lam = &rates.rates;
            let d = x.len();
            let entries: Vec<LogSigned> = (0..d)
                .flat_map(|i| (0..d).map(move |j| LogSigned::from_log(-lam[i] * (x[j] - x[i]))))
                .collect();
            Ok(log_det_of_logs(d, &entries)?.value())
        }
        _ => Err(Error::Regime("rates with ties are not covered".into())),
    }
}

/// Harmonic function for the interlacing-killed walk.
pub fn frak_h(x: &[f64], rates: &Rates) -> Result<f64> {
    check_ordered(x, false)?;
    rates.check_dim(x.len())?;
    frak_h_raw(x, rates)
}

fn one_step_box(x: &[f64], rates: &Rates, kill: KillKind) -> ChamberSpec {
    let d = x.len();
    let lam_min = rates.rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let reach = gamma_upper_quantile(d as f64 + 3.0, 1e-18) / lam_min;
    let lower = x.to_vec();
    let upper: Vec<f64> = match kill {
        KillKind::Tau => x.iter().map(|v| v + reach).collect(),
        KillKind::Rho => (0..d).map(|j| if j + 1 < d { x[j + 1] } else { x[j] + reach }).collect(),
    };
    ChamberSpec::new(lower, upper)
        .with_breakpoints(x.iter().copied())
        .with_max_panel(8.0 / lam_min)
}

/// Relative defect of the one-step mean-value property, by quadrature.
pub fn harmonicity_residual(x: &[f64], rates: &Rates, kill: KillKind) -> Result<f64> {
    let d = x.len();
    rates.check_dim(d)?;
    check_ordered(x, kill == KillKind::Rho)?;
    if d > 3 {
        return Err(Error::Capability("harmonicity check supports d <= 3".into()));
    }
    let lam = rates.rates.clone();
    let func = |y: &[f64]| -> Result<f64> {
        match kill {
            KillKind::Tau => h_for_rates_raw(y, rates),
            KillKind::Rho => frak_h_raw(y, rates),
        }
    };
    let target = func(x)?;
    let ln_lam: f64 = lam.iter().map(|l| l.ln()).sum();
    let integrand = |y: &[f64]| {
        let e: f64 = (0..d).map(|j| lam[j] * (y[j] - x[j])).sum();
        (ln_lam - e).exp() * func(y).unwrap_or(f64::NAN)
    };
    let spec = one_step_box(x, rates, kill);
    let v = chamber_integrate_refined(&integrand, &spec, 8, 128, 1e-8, target.abs())?;
    Ok(((v - target) / target).abs())
}

/// Relative defect of lambda_j h = d h / d x_j on the face x_{j-1} = x_j
/// (j is 1-based, 2 <= j <= d), by a central difference.
pub fn boundary_residual(x: &[f64], j: usize, rates: &Rates) -> Result<f64> {
    let d = x.len();
    rates.check_dim(d)?;
    check_ordered(x, false)?;
    if j < 2 || j > d {
        return Err(Error::InvalidInput(format!("face index {j} outside 2..={d}")));
    }
    if x[j - 2] != x[j - 1] {
        return Err(Error::Domain(format!("point is not on the face x_{} = x_{j}", j - 1)));
    }
    let step = 1e-5 * (1.0 + x[j - 1].abs());
    let mut up = x.to_vec();
    let mut dn = x.to_vec();
    up[j - 1] += step;
    dn[j - 1] -= step;
    let deriv = (h_for_rates_raw(&up, rates)? - h_for_rates_raw(&dn, rates)?) / (2.0 * step);
    let h = h_for_rates_raw(x, rates)?;
    Ok((rates.rates[j - 1] * h - deriv).abs() / h.abs())
}

/// Distance between h for rates (1+(d-1)eps, ..., 1+eps, 1), divided by
/// the absolute Vandermonde of the rates, and h / prod_{j<d} j!.
/// Returned relative to the limit.
pub fn distinct_to_equal_limit(x: &[f64], eps: f64) -> Result<f64> {
    check_ordered(x, false)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    let d = x.len();
    let lam: Vec<f64> = (0..d).map(|i| 1.0 + (d - 1 - i) as f64 * eps).collect();
    let rates = Rates::new(lam.clone())?;
    let num = h_distinct(x, &rates)? / vandermonde(&lam).abs();
    let fact: f64 = (1..d).map(|j| ln_factorial(j as u64)).sum::<f64>().exp();
    let lim = h_equal(x)? / fact;
    Ok(((num - lim) / lim).abs())
}

/// Which mean-value identity for the auxiliary array to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsiPart {
    /// equal rates, Vandermonde weight
    Equal,
    /// distinct rates, exponential determinant weight
    Distinct,
    /// any rates, Vandermonde weight tilted by deviations from the mean rate
    MeanTilted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiCheck {
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub z: f64,
}

/// Monte Carlo check of the auxiliary-array identities; returns the
/// z-score of the sample mean against the closed form.
pub fn psi_identity_check(
    x: &[f64],
    rates: &Rates,
    part: PsiPart,
    samples: u64,
    seed: u64,
    streams: u32,
) -> Result<PsiCheck> {
    let d = x.len();
    rates.check_dim(d)?;
    check_ordered(x, false)?;
    let lam = rates.rates.clone();
    let lbar = rates.mean();
    let (prefactor, target) = match part {
        PsiPart::Equal => {
            if rates.regime != Regime::Equal {
                return Err(Error::Regime("equal-rate identity needs equal rates".into()));
            }
            (1.0, h_equal_scaled_raw(x, lam[0]))
        }
        PsiPart::Distinct => {
            require_distinct(rates)?;
            (1.0, h_distinct_raw(x, &lam))
        }
        PsiPart::MeanTilted => {
            let ln_pre = (d * (d - 1) / 2) as f64 * lbar.ln()
                + (0..d).map(|j| -(j as f64) * lam[j].ln()).sum::<f64>();
            let tilt: f64 = (0..d).map(|i| (lam[i] - lbar) * x[i]).sum();
            (ln_pre.exp(), tilt.exp() * h_equal_scaled_raw(x, lbar))
        }
    };
    let exps: Vec<Exp<f64>> = lam.iter().map(|&l| Exp::new(l).unwrap()).collect();
    let parts = map_chunks(seed, samples, streams, |rng, _, _, len| {
        let mut acc = MeanVar::default();
        // v[j][i] = V_j^i, i < j (0-based particle index j)
        let mut v = vec![vec![0.0; d]; d];
        let mut y = vec![0.0; d];
        for _ in 0..len {
            for j in 1..d {
                for i in 1..=j {
                    v[j][i] = v[j][i - 1] + exps[j].sample(rng);
                }
            }
            let mut in_a = true;
            'outer: for j in 1..d.saturating_sub(1) {
                for i in 1..=j {
                    if x[j] + v[j][i] > x[j + 1] + v[j + 1][i] {
                        in_a = false;
                        break 'outer;
                    }
                }
            }
            let stat = if in_a {
                for j in 0..d {
                    y[j] = x[j] + if j > 0 { v[j][j] } else { 0.0 };
                }
                match part {
                    PsiPart::Equal => vandermonde(&y),
                    PsiPart::Distinct => frak_h_raw(&y, rates).unwrap_or(f64::NAN),
                    PsiPart::MeanTilted => {
                        let t: f64 = (0..d).map(|i| (lam[i] - lbar) * y[i]).sum();
                        prefactor * t.exp() * vandermonde(&y)
                    }
                }
            } else {
                0.0
            };
            acc.push(stat);
        }
        acc
    });
    let mv = MeanVar::combine(parts);
    let se = mv.stderr();
    Ok(PsiCheck { estimate: mv.mean, stderr: se, target, z: (mv.mean - target) / se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn equal_rate_values() {
        assert_relative_eq!(h_equal(&[0.0, 1.0]).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(h_equal(&[0.0, 1.0, 2.0]).unwrap(), 16.0, max_relative = 1e-13);
        assert_relative_eq!(h_equal_phi(&[0.0, 1.0]).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(h_equal_phi(&[0.0, 1.0, 2.0]).unwrap(), 16.0, max_relative = 1e-13);
        assert_relative_eq!(h_equal_laguerre(&[1.0, 2.0]).unwrap(), 2.0, max_relative = 1e-13);
        assert_relative_eq!(h_equal_laguerre(&[1.0, 2.0, 3.0]).unwrap(), 16.0, max_relative = 1e-12);
        assert!(matches!(h_equal_laguerre(&[0.0, 1.0]), Err(Error::Domain(_))));
        assert_eq!(h_equal(&[4.2]).unwrap(), 1.0);
        assert!(matches!(h_equal(&[1.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn distinct_rate_values() {
        let r = Rates::new(vec![2.0, 1.0]).unwrap();
        // 1 - (1/2) e^{-1}
        assert_relative_eq!(h_distinct(&[0.0, 1.0], &r).unwrap(), 1.0 - 0.5 * (-1f64).exp(), max_relative = 1e-14);
        assert!((h_distinct(&[0.0, 1.0], &r).unwrap() - 0.816_060_3).abs() < 1e-7);
        assert_relative_eq!(h_distinct(&[0.3, 0.3], &r).unwrap(), 0.5, max_relative = 1e-14);
        let eq = Rates::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(h_distinct(&[0.0, 1.0], &eq), Err(Error::Regime(_))));
        let tie = Rates::new(vec![1.0, 2.0, 1.0]).unwrap();
        assert!(matches!(h_distinct(&[0.0, 1.0, 2.0], &tie), Err(Error::Regime(_))));
    }

    #[test]
    fn frak_values() {
        let r = Rates::new(vec![2.0, 1.0]).unwrap();
        // 1 - e^{-1}
        assert_relative_eq!(frak_h(&[0.0, 1.0], &r).unwrap(), 1.0 - (-1f64).exp(), max_relative = 1e-14);
        assert!((frak_h(&[0.0, 1.0], &r).unwrap() - 0.632_121).abs() < 1e-6);
        let eq = Rates::equal(3, 1.0).unwrap();
        assert_eq!(frak_h(&[0.0, 1.0, 3.0], &eq).unwrap(), 6.0);
    }

    #[test]
    fn reflected() {
        // h_hat(z) = h(-z2, -z1) = z2 - z1 + 1 for d = 2
        assert_relative_eq!(h_hat(&[0.0, 2.5]).unwrap(), 3.5, max_relative = 1e-14);
    }

    #[test]
    fn one_step_mean_value() {
        let eq2 = Rates::equal(2, 1.0).unwrap();
        assert!(harmonicity_residual(&[0.0, 1.0], &eq2, KillKind::Tau).unwrap() < 1e-9);
        assert!(harmonicity_residual(&[0.0, 1.0], &eq2, KillKind::Rho).unwrap() < 1e-9);
        let dec = Rates::new(vec![3.0, 2.0, 1.0]).unwrap();
        assert!(harmonicity_residual(&[0.0, 0.5, 1.5], &dec, KillKind::Tau).unwrap() < 1e-9);
        assert!(harmonicity_residual(&[0.0, 0.5, 1.5], &dec, KillKind::Rho).unwrap() < 1e-9);
        let eq4 = Rates::equal(4, 1.0).unwrap();
        assert!(matches!(
            harmonicity_residual(&[0.0, 1.0, 2.0, 3.0], &eq4, KillKind::Tau),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn boundary_faces() {
        let eq = Rates::equal(2, 1.0).unwrap();
        assert!(boundary_residual(&[1.0, 1.0], 2, &eq).unwrap() < 1e-8);
        let dec = Rates::new(vec![3.0, 2.0, 1.0]).unwrap();
        assert!(boundary_residual(&[0.0, 0.0, 1.0], 2, &dec).unwrap() < 1e-8);
        assert!(matches!(boundary_residual(&[0.0, 1.0], 2, &eq), Err(Error::Domain(_))));
    }

    #[test]
    fn limit_to_equal() {
        assert!(distinct_to_equal_limit(&[0.0, 1.0], 1e-3).unwrap() < 5e-3);
        assert!(distinct_to_equal_limit(&[0.0, 1.0, 2.5], 1e-3).unwrap() < 2e-2);
    }
}
