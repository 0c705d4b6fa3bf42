//! Laws of the largest and smallest particle of the conditioned walk (equal
//! unit rates) at finitely many times, as Fredholm determinants of an
//! extended kernel, plus a direct single-time integral used as a cross-check.

use crate::error::{Error, Result};
use crate::harmonic::h_equal_raw;
use crate::mathcore::special::{gamma_upper_quantile, ln_gamma_density, reg_lower_gamma, reg_upper_gamma, shifted_moments};
use crate::mathcore::{chamber_integrate_refined, log_det, mat_inverse, ChamberSpec, QuadratureRule, SquareMatrix};
use crate::walkmodel::{check_ordered, vandermonde};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extreme {
    Largest,
    Smallest,
}

impl FromStr for Extreme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "largest" | "max" => Ok(Extreme::Largest),
            "smallest" | "min" => Ok(Extreme::Smallest),
            other => Err(Error::InvalidInput(format!("unknown extreme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSettings {
    /// Gauss-Legendre nodes per panel on the first pass.
    pub nodes: usize,
    /// Keep doubling the nodes until two passes agree.
    pub refine: bool,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings { nodes: 12, refine: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(alias = "x")]
    pub start: Vec<f64>,
    pub times: Vec<u32>,
    pub thresholds: Vec<f64>,
    pub extreme: Extreme,
    #[serde(default)]
    pub quad: QuadSettings,
}

impl KernelSpec {
    pub fn new(start: Vec<f64>, times: Vec<u32>, thresholds: Vec<f64>, extreme: Extreme) -> Result<Self> {
        let s = KernelSpec { start, times, thresholds, extreme, quad: QuadSettings::default() };
        s.validate()?;
        Ok(s)
    }

    pub fn with_quad(mut self, quad: QuadSettings) -> Self {
        self.quad = quad;
        self
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.start.len();
        if d == 0 {
            return Err(Error::Dimension("empty start point".into()));
        }
        check_ordered(&self.start, false)?;
        let m = self.times.len();
        if m == 0 {
            return Err(Error::InvalidInput("at least one time is needed".into()));
        }
        if self.thresholds.len() != m {
            return Err(Error::Dimension(format!("{m} times but {} thresholds", self.thresholds.len())));
        }
        if self.thresholds.iter().any(|t| t.is_nan()) {
            return Err(Error::InvalidInput("threshold is NaN".into()));
        }
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("times must be strictly increasing".into()));
        }
        if self.quad.nodes == 0 {
            return Err(Error::InvalidInput("quadrature needs at least one node".into()));
        }
        match self.extreme {
            Extreme::Largest => {
                if (self.times[0] as usize) < d {
                    return Err(Error::Domain(format!("largest particle needs n_1 >= d ({} < {d})", self.times[0])));
                }
            }
            Extreme::Smallest => {
                if self.times[0] == 0 {
                    return Err(Error::Domain("times must be positive".into()));
                }
                if m >= 2 && ((self.times[m - 1] - self.times[m - 2]) as usize) + 1 < d {
                    return Err(Error::Domain("smallest particle needs n_m - n_{m-1} >= d - 1".into()));
                }
            }
        }
        Ok(())
    }
}

fn moment_matrix(x: &[f64], shape0: i64, center: f64, scale: f64) -> SquareMatrix {
    let d = x.len();
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let mom = shifted_moments(x[k] - center, (shape0 + k as i64 + 1) as f64, d - 1);
            mom.iter().enumerate().map(|(l, v)| v / scale.powi(l as i32)).collect()
        })
        .collect();
    SquareMatrix::from_fn(d, |k, l| rows[k][l])
}

/// A_{kl} = E[(x_k + G)^{l-1}] with G ~ Gamma(n-d+k); rows are particles.
pub fn matrix_a(x: &[f64], n: u32, d: usize) -> Result<SquareMatrix> {
    if x.len() != d {
        return Err(Error::Dimension(format!("start has length {} but d = {d}", x.len())));
    }
    if (n as usize) < d {
        return Err(Error::Domain(format!("A needs n >= d ({n} < {d})")));
    }
    Ok(moment_matrix(x, i64::from(n) - d as i64, 0.0, 1.0))
}

/// B_{kl} = E[(x_k + G)^{l-1}] with G ~ Gamma(n-1+k).
pub fn matrix_b(x: &[f64], n: u32, d: usize) -> Result<SquareMatrix> {
    if x.len() != d {
        return Err(Error::Dimension(format!("start has length {} but d = {d}", x.len())));
    }
    if n == 0 {
        return Err(Error::Domain("B needs n >= 1".into()));
    }
    let b = moment_matrix(x, i64::from(n) - 1, 0.0, 1.0);
    mat_inverse(&b)?;
    Ok(b)
}

fn basis_for(x: &[f64], shape0: i64) -> (f64, f64) {
    let d = x.len() as f64;
    let center = x.iter().enumerate().map(|(k, v)| v + (shape0 + k as i64 + 1) as f64).sum::<f64>() / d;
    let scale = ((shape0 + x.len() as i64) as f64).sqrt().max(1.0);
    (center, scale)
}

/// ln det A, computed in a centred and scaled power basis so the moment
/// matrix stays well conditioned for long horizons.
pub fn log_det_a(x: &[f64], n: u32) -> Result<f64> {
    let d = x.len();
    matrix_a(x, n, d)?;
    let shape0 = i64::from(n) - d as i64;
    let (c, s) = basis_for(x, shape0);
    let det = log_det(&moment_matrix(x, shape0, c, s))?;
    if det.sign <= 0 {
        return Err(Error::NumericalConsistency("det A is not positive".into()));
    }
    Ok(det.log_abs + (d * (d - 1) / 2) as f64 * s.ln())
}

/// Extended kernel with the moment inverse folded in.
#[derive(Debug, Clone)]
struct ExtendedKernel {
    x: Vec<f64>,
    times: Vec<i64>,
    extreme: Extreme,
    center: f64,
    scale: f64,
    inv: SquareMatrix,
}

impl ExtendedKernel {
    fn new(spec: &KernelSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.dim();
        let times: Vec<i64> = spec.times.iter().map(|&t| i64::from(t)).collect();
        let nm = *times.last().unwrap();
        let shape0 = Self::shape_offset(spec.extreme, nm, d);
        let (center, scale) = basis_for(&spec.start, shape0);
        let inv = mat_inverse(&moment_matrix(&spec.start, shape0, center, scale))?;
        Ok(ExtendedKernel { x: spec.start.clone(), times, extreme: spec.extreme, center, scale, inv })
    }

    fn shape_offset(extreme: Extreme, n: i64, d: usize) -> i64 {
        match extreme {
            Extreme::Largest => n - d as i64,
            Extreme::Smallest => n - 1,
        }
    }

    fn dim(&self) -> usize {
        self.x.len()
    }

    /// Row factor: the polynomial moments at (time i, y) pushed through the
    /// inverse moment matrix; one entry per particle.
    fn left(&self, i: usize, y: f64) -> Vec<f64> {
        let d = self.dim();
        let shape = (self.times[self.times.len() - 1] - self.times[i]) as f64;
        let mom = shifted_moments(y - self.center, shape, d - 1);
        (0..d)
            .map(|l| (0..d).map(|k| mom[k] / self.scale.powi(k as i32) * self.inv.get(k, l)).sum())
            .collect()
    }

    /// Column factor: the start densities at (time j, z).
    fn right(&self, j: usize, z: f64) -> Vec<f64> {
        let off = Self::shape_offset(self.extreme, self.times[j], self.dim());
        (0..self.dim()).map(|l| ln_gamma_density(off + l as i64 + 1, z - self.x[l]).exp()).collect()
    }

    fn propagator(&self, i: usize, y: f64, j: usize, z: f64) -> f64 {
        if i < j {
            ln_gamma_density(self.times[j] - self.times[i], z - y).exp()
        } else {
            0.0
        }
    }

    fn eval(&self, i: usize, y: f64, j: usize, z: f64) -> f64 {
        let a = self.left(i, y);
        let b = self.right(j, z);
        a.iter().zip(&b).map(|(p, q)| p * q).sum::<f64>() - self.propagator(i, y, j, z)
    }
}

/// Kernel value K(n_i, y; n_j, z) (time indices are 0-based).
pub fn kernel_eval(spec: &KernelSpec, i: usize, y: f64, j: usize, z: f64) -> Result<f64> {
    let k = ExtendedKernel::new(spec)?;
    let m = spec.times.len();
    if i >= m || j >= m {
        return Err(Error::InvalidInput(format!("time index out of range (m = {m})")));
    }
    Ok(k.eval(i, y, j, z))
}

const TAIL: f64 = 1e-15;
const PANEL: f64 = 2.0;
const MAX_NODES: usize = 96;
const AGREE: f64 = 1e-6;

/// Integration windows per time: the part of the line the indicator keeps.
fn windows(spec: &KernelSpec) -> Vec<Option<(f64, f64)>> {
    let x = &spec.start;
    let d = x.len();
    spec.times
        .iter()
        .zip(&spec.thresholds)
        .map(|(&n, &xi)| {
            let top = x[d - 1] + gamma_upper_quantile(f64::from(n) + d as f64, TAIL);
            let (a, b) = match spec.extreme {
                Extreme::Largest => (xi.max(x[0]), top),
                Extreme::Smallest => (x[0], xi.min(top)),
            };
            (b > a).then_some((a, b))
        })
        .collect()
}

fn nodes_for(window: (f64, f64), x: &[f64], per_panel: usize) -> Result<Vec<(f64, f64)>> {
    let (a, b) = window;
    let mut cuts: Vec<f64> = vec![a, b];
    cuts.extend(x.iter().copied().filter(|v| *v > a && *v < b));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let rule = QuadratureRule::gauss_legendre(per_panel)?;
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let pieces = ((w[1] - w[0]) / PANEL).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / pieces as f64;
        for p in 0..pieces {
            let lo = w[0] + h * p as f64;
            out.extend(rule.mapped(lo, lo + h));
        }
    }
    Ok(out)
}

fn nystrom(kernel: &ExtendedKernel, spec: &KernelSpec, per_panel: usize) -> Result<f64> {
    let mut pts: Vec<(usize, f64, f64)> = Vec::new();
    for (t, w) in windows(spec).into_iter().enumerate() {
        if let Some(win) = w {
            pts.extend(nodes_for(win, &spec.start, per_panel)?.into_iter().map(|(z, wt)| (t, z, wt)));
        }
    }
    let size = pts.len();
    if size == 0 {
        return Ok(1.0);
    }
    let lefts: Vec<Vec<f64>> = pts.iter().map(|&(t, y, _)| kernel.left(t, y)).collect();
    let rights: Vec<Vec<f64>> = pts.iter().map(|&(t, z, _)| kernel.right(t, z)).collect();
    let roots: Vec<f64> = pts.iter().map(|p| p.2.sqrt()).collect();
    let m = SquareMatrix::from_fn(size, |a, b| {
        let (ta, ya, _) = pts[a];
        let (tb, zb, _) = pts[b];
        let k: f64 = lefts[a].iter().zip(&rights[b]).map(|(p, q)| p * q).sum::<f64>()
            - kernel.propagator(ta, ya, tb, zb);
        let delta = if a == b { 1.0 } else { 0.0 };
        delta - roots[a] * k * roots[b]
    });
    Ok(log_det(&m)?.value())
}

/// Largest: P(max particle at n_j <= xi_j for all j).
/// Smallest: P(min particle at n_j > xi_j for all j).
pub fn extreme_cdf(spec: &KernelSpec) -> Result<f64> {
    let kernel = ExtendedKernel::new(spec)?;
    let mut nodes = spec.quad.nodes;
    let mut prev = nystrom(&kernel, spec, nodes)?;
    if !spec.quad.refine {
        return Ok(prev);
    }
    let cap = MAX_NODES.max(nodes);
    let mut coarse = prev;
    while nodes * 2 <= cap {
        nodes *= 2;
        let next = nystrom(&kernel, spec, nodes)?;
        if (next - prev).abs() <= AGREE {
            return Ok(next);
        }
        coarse = prev;
        prev = next;
    }
    Err(Error::Accuracy { coarse, fine: prev })
}

/// Single-time law by direct integration of the transition density of the
/// conditioned walk (d <= 3). Same convention as `extreme_cdf`.
pub fn direct_cdf_single(x: &[f64], n: u32, xi: f64, extreme: Extreme) -> Result<f64> {
    KernelSpec::new(x.to_vec(), vec![n], vec![xi], extreme)?;
    let d = x.len();
    if d == 1 {
        let t = xi - x[0];
        return Ok(match extreme {
            Extreme::Largest => reg_lower_gamma(f64::from(n), t.max(0.0)),
            Extreme::Smallest => reg_upper_gamma(f64::from(n), t.max(0.0)),
        });
    }
    if d > 3 {
        return Err(Error::Capability("direct integration supports d <= 3".into()));
    }
    let top = x[d - 1] + gamma_upper_quantile(f64::from(n) + d as f64, TAIL);
    let (lo, hi) = match extreme {
        Extreme::Largest => (x[0], xi.min(top)),
        Extreme::Smallest => (xi.max(x[0]), top),
    };
    if hi <= lo {
        return Ok(0.0);
    }
    let (lower, upper) = (vec![lo; d], vec![hi; d]);
    let off = ExtendedKernel::shape_offset(extreme, i64::from(n), d);
    let hx = h_equal_raw(x);
    let xs = x.to_vec();
    let integrand = move |z: &[f64]| {
        let m = SquareMatrix::from_fn(d, |i, j| ln_gamma_density(off + i as i64 + 1, z[j] - xs[i]).exp());
        log_det(&m).map(|v| v.value()).unwrap_or(f64::NAN) * vandermonde(z)
    };
    let spec = ChamberSpec::new(lower, upper).with_breakpoints(x.iter().copied()).with_max_panel(PANEL);
    let v = chamber_integrate_refined(&integrand, &spec, 12, 192, 1e-10, 1e-13)?;
    Ok(v / hx)
}
