//! Simulation of the walks and of the growth models they are coupled to.

mod lpp;
mod pushblock;
pub mod stats;

pub use lpp::{lpp_dp, queue_departures, sample_field, sample_z_from_zero, Grid};
pub use pushblock::{pushblock_evolve, pushblock_top_samples};

use crate::density::Estimate;
use crate::error::{Error, Result};
use crate::harmonic::h_for_rates_raw;
use crate::rng::{map_chunks, MeanVar, StreamRng};
use crate::walkmodel::{check_ordered, interlaces, KillKind, Rates, Regime};
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// Number of independent RNG streams (fixed chunks); results do not
    /// depend on the thread count.
    pub streams: u32,
    pub samples: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { seed: 7, streams: 64, samples: 100_000 }
    }
}

impl SimConfig {
    pub fn new(seed: u64, samples: u64) -> Self {
        SimConfig { seed, samples, ..Default::default() }
    }
}

pub(crate) fn exps(rates: &Rates) -> Vec<Exp<f64>> {
    rates.rates.iter().map(|&l| Exp::new(l).expect("positive rate")).collect()
}

pub(crate) fn in_open_chamber(s: &[f64]) -> bool {
    s.windows(2).all(|w| w[0] < w[1])
}

fn step(rng: &mut StreamRng, exps: &[Exp<f64>], s: &mut [f64]) {
    for (v, e) in s.iter_mut().zip(exps) {
        *v += e.sample(rng);
    }
}

/// First step at which the kill condition holds, or None within `horizon`.
fn first_kill(prev: &[f64], cur: &[f64], kill: KillKind) -> bool {
    match kill {
        KillKind::Tau => !in_open_chamber(cur),
        KillKind::Rho => !interlaces(prev, cur),
    }
}

/// Stored trajectories with their kill times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub d: usize,
    pub horizon: u32,
    /// path-major, then step, then coordinate
    pub positions: Vec<f64>,
    pub tau: Vec<Option<u32>>,
    pub rho: Vec<Option<u32>>,
}

impl PathEnsemble {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn at(&self, path: usize, step: u32) -> &[f64] {
        let stride = (self.horizon as usize + 1) * self.d;
        let o = path * stride + step as usize * self.d;
        &self.positions[o..o + self.d]
    }

    /// One row per (path, step): path-id, step, coordinates, and 0/1 marks
    /// for whether each kill time has occurred by that step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,step");
        for j in 1..=self.d {
            let _ = write!(out, ",x{j}");
        }
        out.push_str(",tau_mark,rho_mark\n");
        for p in 0..self.len() {
            for s in 0..=self.horizon {
                let _ = write!(out, "{p},{s}");
                for v in self.at(p, s) {
                    let _ = write!(out, ",{v}");
                }
                let mark = |k: Option<u32>| u8::from(k.is_some_and(|t| t <= s));
                let _ = writeln!(out, ",{},{}", mark(self.tau[p]), mark(self.rho[p]));
            }
        }
        out
    }
}

/// Simulate `cfg.samples` full trajectories of length `horizon`.
pub fn sample_paths(x: &[f64], rates: &Rates, horizon: u32, cfg: &SimConfig) -> Result<PathEnsemble> {
    check_ordered(x, false)?;
    rates.check_dim(x.len())?;
    let d = x.len();
    let ex = exps(rates);
    let chunks = map_chunks(cfg.seed, cfg.samples, cfg.streams, |rng, _, _, len| {
        let mut pos = Vec::with_capacity(len as usize * (horizon as usize + 1) * d);
        let mut taus = Vec::with_capacity(len as usize);
        let mut rhos = Vec::with_capacity(len as usize);
        for _ in 0..len {
            let mut s = x.to_vec();
            let mut prev = s.clone();
            pos.extend_from_slice(&s);
            let (mut tau, mut rho) = (None, None);
            for n in 1..=horizon {
                prev.copy_from_slice(&s);
                step(rng, &ex, &mut s);
                pos.extend_from_slice(&s);
                if tau.is_none() && first_kill(&prev, &s, KillKind::Tau) {
                    tau = Some(n);
                }
                if rho.is_none() && first_kill(&prev, &s, KillKind::Rho) {
                    rho = Some(n);
                }
            }
            taus.push(tau);
            rhos.push(rho);
        }
        (pos, taus, rhos)
    });
    let mut out = PathEnsemble { d, horizon, positions: Vec::new(), tau: Vec::new(), rho: Vec::new() };
    for (p, t, r) in chunks {
        out.positions.extend(p);
        out.tau.extend(t);
        out.rho.extend(r);
    }
    Ok(out)
}

/// Fraction of paths not yet killed after n steps, with its standard error.
/// Paths are abandoned at their first violation.
pub fn survival_estimate(x: &[f64], n: u32, rates: &Rates, kill: KillKind, cfg: &SimConfig) -> Result<Estimate> {
    check_ordered(x, false)?;
    rates.check_dim(x.len())?;
    let ex = exps(rates);
    let counts = map_chunks(cfg.seed, cfg.samples, cfg.streams, |rng, _, _, len| {
        let mut alive = 0u64;
        let mut s = x.to_vec();
        let mut prev = s.clone();
        for _ in 0..len {
            s.copy_from_slice(x);
            let mut ok = true;
            for _ in 0..n {
                prev.copy_from_slice(&s);
                step(rng, &ex, &mut s);
                if first_kill(&prev, &s, kill) {
                    ok = false;
                    break;
                }
            }
            alive += u64::from(ok);
        }
        alive
    });
    let alive: u64 = counts.iter().sum();
    let p = alive as f64 / cfg.samples as f64;
    Ok(Estimate { value: p, stderr: (p * (1.0 - p) / cfg.samples as f64).sqrt() })
}

/// Positions at steps 0..=n of one simulated walk.
pub struct Trajectory<'a> {
    pub d: usize,
    pub positions: &'a [f64],
}

impl Trajectory<'_> {
    pub fn at(&self, step: usize) -> &[f64] {
        &self.positions[step * self.d..(step + 1) * self.d]
    }

    pub fn steps(&self) -> usize {
        self.positions.len() / self.d - 1
    }
}

/// Mean of `statistic` under the conditioned (h-transformed) walk, computed
/// from unconditioned paths weighted by h(S_n)/h(x) on survival.
pub fn htransform_estimate(
    x: &[f64],
    n: u32,
    rates: &Rates,
    statistic: &(dyn Fn(&Trajectory) -> f64 + Sync),
    cfg: &SimConfig,
) -> Result<Estimate> {
    check_ordered(x, false)?;
    rates.check_dim(x.len())?;
    if !matches!(rates.regime, Regime::Equal | Regime::StrictlyDecreasing) {
        return Err(Error::Regime("conditioning needs equal or strictly decreasing rates".into()));
    }
    let d = x.len();
    let hx = h_for_rates_raw(x, rates)?;
    let ex = exps(rates);
    let parts = map_chunks(cfg.seed, cfg.samples, cfg.streams, |rng, _, _, len| {
        let mut acc = MeanVar::default();
        let mut pos = vec![0.0; (n as usize + 1) * d];
        for _ in 0..len {
            pos[..d].copy_from_slice(x);
            let mut ok = true;
            for m in 1..=n as usize {
                let (done, rest) = pos.split_at_mut(m * d);
                let cur = &mut rest[..d];
                cur.copy_from_slice(&done[(m - 1) * d..]);
                step(rng, &ex, cur);
                if !in_open_chamber(cur) {
                    ok = false;
                    break;
                }
            }
            let w = if ok {
                let end = &pos[n as usize * d..];
                h_for_rates_raw(end, rates).unwrap_or(f64::NAN) / hx * statistic(&Trajectory { d, positions: &pos })
            } else {
                0.0
            };
            acc.push(w);
        }
        acc
    });
    let mv = MeanVar::combine(parts);
    Ok(Estimate { value: mv.mean, stderr: mv.stderr() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub trials: u64,
    /// trials where some S_j(m) differs from T_j(m + d - j)
    pub value_failures: u64,
    /// trials where the ordering event and the interlacing event disagree
    pub event_failures: u64,
}

/// Drive an ordered walk S and an interlaced walk T from one increment
/// field and check S_j(m) = T_j(m + d - j) and that ordering of S up to n
/// matches interlacing of T on the corresponding steps.
pub fn coupling_check(d: usize, n: u32, rates: &Rates, cfg: &SimConfig) -> Result<CouplingReport> {
    rates.check_dim(d)?;
    let ex = exps(rates);
    let n = n as usize;
    let parts = map_chunks(cfg.seed, cfg.samples, cfg.streams, |rng, _, _, len| {
        let (mut vf, mut ef) = (0u64, 0u64);
        let mut field = vec![0.0; n * d];
        let horizon_t = n + d - 1;
        let mut s = vec![0.0; (n + 1) * d];
        let mut t = vec![0.0; (horizon_t + 1) * d];
        for _ in 0..len {
            for i in 0..n {
                for j in 0..d {
                    field[i * d + j] = ex[j].sample(rng);
                }
            }
            // S: row i of the field is step i+1 for every coordinate
            for i in 1..=n {
                for j in 0..d {
                    s[i * d + j] = s[(i - 1) * d + j] + field[(i - 1) * d + j];
                }
            }
            // T: coordinate j (1-based jj) starts moving at step d - jj + 1
            for m in 1..=horizon_t {
                for j in 0..d {
                    let jj = j + 1;
                    let inc = if m + jj > d && m + jj - d <= n { field[(m + jj - d - 1) * d + j] } else { 0.0 };
                    t[m * d + j] = t[(m - 1) * d + j] + inc;
                }
            }
            let mut vals_ok = true;
            for m in 0..=n {
                for j in 0..d {
                    if s[m * d + j] != t[(m + d - j - 1) * d + j] {
                        vals_ok = false;
                    }
                }
            }
            let ordered = (1..=n).all(|m| (0..d - 1).all(|j| s[m * d + j] <= s[m * d + j + 1]));
            // T_j(i) <= T_{j+1}(i-1) for steps whose S-time i - d + jj lies in 1..=n
            let mut inter = true;
            for i in 1..=horizon_t {
                for j in 0..d - 1 {
                    let jj = j + 1;
                    let m = i as i64 - d as i64 + jj as i64;
                    if m >= 1 && m <= n as i64 && t[i * d + j] > t[(i - 1) * d + j + 1] {
                        inter = false;
                    }
                }
            }
            vf += u64::from(!vals_ok);
            ef += u64::from(ordered != inter);
        }
        (vf, ef)
    });
    Ok(CouplingReport {
        trials: cfg.samples,
        value_failures: parts.iter().map(|p| p.0).sum(),
        event_failures: parts.iter().map(|p| p.1).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_survival() {
        let r = Rates::equal(2, 1.0).unwrap();
        let cfg = SimConfig::new(7, 200_000);
        let tau = survival_estimate(&[0.0, 1.0], 1, &r, KillKind::Tau, &cfg).unwrap();
        assert!((tau.value - (1.0 - 0.5 * (-1f64).exp())).abs() < 4.0 * tau.stderr);
        let rho = survival_estimate(&[0.0, 1.0], 1, &r, KillKind::Rho, &cfg).unwrap();
        assert!((rho.value - (1.0 - (-1f64).exp())).abs() < 4.0 * rho.stderr);
    }

    #[test]
    fn paths_are_increasing_and_marked() {
        let r = Rates::equal(2, 1.0).unwrap();
        let e = sample_paths(&[0.0, 1.0], &r, 5, &SimConfig::new(3, 50)).unwrap();
        assert_eq!(e.len(), 50);
        for p in 0..e.len() {
            for s in 1..=5 {
                assert!(e.at(p, s).iter().zip(e.at(p, s - 1)).all(|(a, b)| a > b));
            }
            if let (Some(t), Some(r)) = (e.tau[p], e.rho[p]) {
                assert!(r <= t);
            }
        }
        let csv = e.to_csv();
        assert!(csv.starts_with("path,step,x1,x2,tau_mark,rho_mark\n"));
        assert_eq!(csv.lines().count(), 1 + 50 * 6);
    }

    #[test]
    fn determinism_across_runs() {
        let r = Rates::equal(3, 1.0).unwrap();
        let cfg = SimConfig::new(11, 10_000);
        let a = survival_estimate(&[0.0, 1.0, 2.0], 4, &r, KillKind::Rho, &cfg).unwrap();
        let b = survival_estimate(&[0.0, 1.0, 2.0], 4, &r, KillKind::Rho, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coupling_small() {
        let r = Rates::equal(3, 1.0).unwrap();
        let rep = coupling_check(3, 6, &r, &SimConfig::new(5, 500)).unwrap();
        assert_eq!(rep.value_failures, 0);
        assert_eq!(rep.event_failures, 0);
    }
}
