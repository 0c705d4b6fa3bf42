//! Exit-time laws: exact two-walk survival, Pfaffian survival, tail
//! constants and decay rates.

use crate::density::llt_constant;
use crate::error::{Error, Result};
use crate::harmonic::{h_distinct_raw, h_equal_raw, h_equal_scaled_raw};
use crate::mathcore::special::{gamma_upper_quantile, ln_factorial, ln_gamma, reg_lower_gamma};
use crate::mathcore::{chamber_integrate_refined, pfaffian, ChamberSpec, SquareMatrix};
use crate::walkmodel::{check_ordered, vandermonde, KillKind, Rates, Regime};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use twofloat::TwoFloat;

fn tf(v: f64) -> TwoFloat {
    TwoFloat::from(v)
}

/// Alternating series for two walks at gap y = x2 - x1:
/// (-1)^n sum_{k>=1} (-1)^{k+1} C(k/2 - 1, n) y^k / k!, which equals
/// P(rho > n + 1). Extended antisymmetrically to y < 0.
pub fn p2_series(x1: f64, x2: f64, n: u32) -> Result<f64> {
    if !(x1.is_finite() && x2.is_finite()) {
        return Err(Error::InvalidInput("non-finite coordinates".into()));
    }
    let y = x2 - x1;
    if y == 0.0 {
        return Ok(0.0);
    }
    if y < 0.0 {
        return Ok(-p2_series(x2, x1, n)?);
    }
    let (v, biggest) = p2_series_dd(y, n);
    // double-double keeps ~31 digits; beyond that the cancellation wins and
    // the all-positive integrated form of the same probability is used
    if biggest * 1e-30 > 1e-14 * v.abs() {
        return p2_bessel(0.0, y, n + 1);
    }
    Ok(v)
}

/// Raw series sum and the magnitude of its largest term.
fn p2_series_dd(y: f64, n: u32) -> (f64, f64) {
    let mut biggest: f64 = 0.0;
    let nf = f64::from(n);
    let y2 = tf(y) * tf(y);
    let mut sum = tf(0.0);

    // odd k: C(k/2 - 1, n) starts at C(-1/2, n); terms keep sign +1
    let mut b = tf(1.0);
    for i in 0..n {
        b = b * (-0.5 - f64::from(i)) / f64::from(i + 1);
    }
    // divisions are always by plain f64 values: exact double-double by f64
    let mut pw = tf(y); // y^k / k!
    let mut k = 1u64;
    let mut odd_sum = tf(0.0);
    loop {
        let term = b * pw;
        biggest = biggest.max(term.hi().abs());
        odd_sum += term;
        let a = k as f64 / 2.0 - 1.0;
        let kf = k as f64;
        // step k -> k + 2
        b = b * (a + 1.0) / (a + 1.0 - nf);
        pw = pw * y2 / ((kf + 1.0) * (kf + 2.0));
        k += 2;
        if stop_now(k, n, y, term.hi(), odd_sum.hi()) {
            break;
        }
    }
    sum += odd_sum;

    // even k: C(k/2 - 1, n) vanishes for k/2 - 1 in [0, n), first nonzero at k = 2n + 2
    let k0 = 2 * u64::from(n) + 2;
    let mut pw = tf(1.0);
    for i in 1..=k0 {
        pw = pw * y / i as f64;
        if pw.hi() == 0.0 {
            break;
        }
    }
    let mut b = tf(1.0);
    let mut k = k0;
    let mut even_sum = tf(0.0);
    if pw.hi() != 0.0 {
        loop {
            let term = -(b * pw);
            biggest = biggest.max(term.hi().abs());
            even_sum += term;
            let a = k as f64 / 2.0 - 1.0;
            let kf = k as f64;
            b = b * (a + 1.0) / (a + 1.0 - nf);
            pw = pw * y2 / ((kf + 1.0) * (kf + 2.0));
            k += 2;
            if stop_now(k, n, y, term.hi(), even_sum.hi()) {
                break;
            }
        }
    }
    sum += even_sum;
    let s = if n % 2 == 0 { sum } else { -sum };
    (s.hi() + s.lo(), biggest)
}

fn stop_now(k: u64, n: u32, y: f64, term: f64, partial: f64) -> bool {
    if k > 50_000_000 {
        return true;
    }
    // past k = 2n+2 the ratio of successive terms is at most y^2 / (2k)
    k >= 2 * u64::from(n) + 2 && y * y / (2.0 * k as f64) < 0.5 && term.abs() <= 1e-17 * partial.abs().max(1e-300)
}

/// P(rho > n) for two walks through integrated half-integer Bessel terms:
/// sum_{k<n} C(n-1+k, k) 2^{-(n-1+k)} P(n-k, y).
pub fn p2_bessel(x1: f64, x2: f64, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if !(x1 < x2) {
        return Err(Error::Domain("p2_bessel needs x1 < x2".into()));
    }
    let y = x2 - x1;
    let m = u64::from(n) - 1;
    let mut s = 0.0;
    for k in 0..=m {
        let lw = ln_factorial(m + k) - ln_factorial(k) - ln_factorial(m) - (m + k) as f64 * 2f64.ln();
        s += lw.exp() * reg_lower_gamma((m + 1 - k) as f64, y);
    }
    Ok(s)
}

/// K_{m+1/2}(z) from its terminating series.
pub fn bessel_k_half(m: u32, z: f64) -> f64 {
    let pref = (PI / (2.0 * z)).sqrt() * (-z).exp();
    let s: f64 = (0..=m)
        .map(|k| {
            let k = u64::from(k);
            let m = u64::from(m);
            (ln_factorial(m + k) - ln_factorial(k) - ln_factorial(m - k) - k as f64 * (2.0 * z).ln()).exp()
        })
        .sum();
    pref * s
}

/// P_x(rho > n) for unit equal rates, as a Pfaffian of two-walk survivals.
pub fn rho_survival_pf(x: &[f64], n: u32) -> Result<f64> {
    check_ordered(x, false)?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let d = x.len();
    if d == 1 {
        return Ok(1.0);
    }
    let mut m = SquareMatrix::zeros(d);
    for i in 0..d {
        for j in i + 1..d {
            let v = p2_series(x[i], x[j], n - 1)?;
            m.set(i, j, v);
            m.set(j, i, -v);
        }
    }
    let v = if d % 2 == 0 {
        pfaffian(&m)?.value()
    } else {
        let mut acc = 0.0;
        for l in 0..d {
            let keep: Vec<usize> = (0..d).filter(|&i| i != l).collect();
            let s = if l % 2 == 0 { 1.0 } else { -1.0 };
            acc += s * pfaffian(&m.submatrix(&keep))?.value();
        }
        acc
    };
    if v < -1e-10 {
        return Err(Error::NumericalConsistency(format!("negative survival {v:.3e}")));
    }
    Ok(v.clamp(0.0, 1.0))
}

/// prod_{j<=d} Gamma(j/2) / (pi^{d/2} prod_{j<d} j!)
pub fn x_const(d: usize) -> f64 {
    let g: f64 = (1..=d).map(|j| ln_gamma(j as f64 / 2.0)).sum();
    let f: f64 = (1..d).map(|j| ln_factorial(j as u64)).sum();
    (g - d as f64 / 2.0 * PI.ln() - f).exp()
}

/// d log(arithmetic mean / geometric mean) of the rates.
pub fn gamma_rate(rates: &Rates) -> f64 {
    rates.dim() as f64 * (rates.mean() / rates.geomean()).ln()
}

/// Power of n in the survival asymptotics for increasing rates:
/// the chamber LLT exponent d(d-1)/2 + d/2, less 1/2 for the free
/// diagonal direction.
pub fn increasing_rate_power(d: usize) -> f64 {
    ((d * d) as f64 - 1.0) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KMode {
    GapIntegral,
    /// Fit over the listed horizons using quadrature survivals from `x`.
    Empirical { x: Vec<f64>, horizons: Vec<u32> },
}

fn require_increasing(rates: &Rates) -> Result<()> {
    if rates.regime != Regime::StrictlyIncreasing {
        return Err(Error::Regime("needs strictly increasing rates".into()));
    }
    Ok(())
}

/// Start-point factor multiplying the constant in the increasing-rate tail.
fn increasing_start_factor(x: &[f64], rates: &Rates, kill: KillKind) -> f64 {
    let lbar = rates.mean();
    let tilt: f64 = x.iter().zip(&rates.rates).map(|(v, l)| (l - lbar) * v).sum();
    let base = match kill {
        KillKind::Tau => h_equal_scaled_raw(x, lbar),
        KillKind::Rho => vandermonde(x),
    };
    tilt.exp() * base
}

/// Constant of the increasing-rate survival tail, in the form multiplying
/// n^{-(d^2-1)/2} e^{-gamma n} e^{sum (lambda_i - mean) x_i} H(x), where H is
/// the equal-rate chamber function at the mean rate (tau) or the
/// Vandermonde product (rho).
pub fn constant_k(rates: &Rates, kill: KillKind, mode: &KMode) -> Result<f64> {
    let d = rates.dim();
    if d == 1 {
        return Ok(1.0);
    }
    require_increasing(rates)?;
    match mode {
        KMode::GapIntegral => {
            if d > 3 {
                return Err(Error::Capability("gap integral supports d <= 3".into()));
            }
            let lbar = rates.mean();
            let mu: Vec<f64> = rates.rates.iter().map(|l| l / lbar).collect();
            // decay rate of gap k is the tail sum of (mu_j - 1) over j > k
            let slowest = (1..d).map(|k| mu[k..].iter().map(|m| m - 1.0).sum::<f64>()).fold(f64::INFINITY, f64::min);
            let integral = if d == 1 {
                1.0
            } else {
                let shape = (d * (d - 1) / 2 + d + 2) as f64;
                let reach = gamma_upper_quantile(shape, 1e-17) / slowest;
                let spec = ChamberSpec::new(vec![0.0; d - 1], vec![reach; d - 1]).with_max_panel(2.0 / slowest);
                let f = |g: &[f64]| {
                    let mut w = Vec::with_capacity(d);
                    w.push(0.0);
                    w.extend_from_slice(g);
                    let e: f64 = (0..d).map(|j| (mu[j] - 1.0) * w[j]).sum();
                    let poly = match kill {
                        KillKind::Tau => {
                            let r: Vec<f64> = w.iter().rev().map(|v| -v).collect();
                            h_equal_raw(&r)
                        }
                        KillKind::Rho => vandermonde(&w),
                    };
                    (-e).exp() * poly
                };
                chamber_integrate_refined(&f, &spec, 12, 192, 1e-11, 1e-300)?
            };
            let k_unit = llt_constant(d) * (2.0 * PI / d as f64).sqrt() * integral;
            Ok(lbar.powi((d * (d - 1) / 2) as i32) * k_unit)
        }
        KMode::Empirical { x, horizons } => {
            if horizons.is_empty() {
                return Err(Error::InvalidInput("no horizons to fit".into()));
            }
            rates.check_dim(x.len())?;
            let g = gamma_rate(rates);
            let p = increasing_rate_power(d);
            let base = increasing_start_factor(x, rates, kill);
            let mut acc = 0.0;
            for &n in horizons {
                let s = crate::density::survival(x, n, rates, kill, crate::density::SurvivalMethod::Quadrature, None)?;
                let nf = f64::from(n);
                acc += s.value.ln() + g * nf + p * nf.ln() - base.ln();
            }
            Ok((acc / horizons.len() as f64).exp())
        }
    }
}

/// Leading-order prediction of P_x(kill > n).
pub fn tail_predict(x: &[f64], n: u32, rates: &Rates, kill: KillKind) -> Result<f64> {
    check_ordered(x, false)?;
    rates.check_dim(x.len())?;
    let d = x.len();
    let nf = f64::from(n);
    match rates.regime {
        Regime::Equal => {
            let l = rates.rates[0];
            let y: Vec<f64> = x.iter().map(|v| v * l).collect();
            let base = match kill {
                KillKind::Tau => h_equal_raw(&y),
                KillKind::Rho => vandermonde(&y),
            };
            Ok(x_const(d) * base * nf.powf(-((d * (d - 1)) as f64) / 4.0))
        }
        Regime::StrictlyDecreasing => match kill {
            KillKind::Tau => Ok(h_distinct_raw(x, &rates.rates)),
            KillKind::Rho => Err(Error::Regime(
                "no tail prediction for the interlacing kill with decreasing rates".into(),
            )),
        },
        Regime::StrictlyIncreasing => {
            let k = constant_k(rates, kill, &KMode::GapIntegral)?;
            Ok(k * nf.powf(-increasing_rate_power(d)) * (-gamma_rate(rates) * nf).exp()
                * increasing_start_factor(x, rates, kill))
        }
        Regime::General => Err(Error::Regime("no tail prediction for mixed rate orderings".into())),
    }
}

/// Exponential decay rate from survivals at two horizons, with the
/// polynomial prefactor of the given power removed.
pub fn decay_rate_estimate(p1: f64, n1: u32, p2: f64, n2: u32, power: f64) -> f64 {
    let (a, b) = (f64::from(n1), f64::from(n2));
    ((p1 / p2).ln() - power * (b / a).ln()) / (b - a)
}
