use super::SimConfig;
use crate::error::{Error, Result};
use crate::rng::{map_chunks, StreamRng};
use crate::walkmodel::Rates;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

/// Row-major rectangular table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!("{} values for a {rows}x{cols} grid", data.len())));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        Ok(Grid { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> Grid {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Grid { rows: self.cols, cols: self.rows, data }
    }

    pub fn corner(&self) -> f64 {
        self.data.last().copied().unwrap_or(0.0)
    }
}

/// Last-passage times L(i, j) = max(L(i-1, j), L(i, j-1)) + w(i, j).
pub fn lpp_dp(field: &Grid) -> Grid {
    let (r, c) = (field.rows, field.cols);
    let mut l = vec![0.0f64; r * c];
    for i in 0..r {
        for j in 0..c {
            let up = if i > 0 { l[(i - 1) * c + j] } else { 0.0 };
            let left = if j > 0 { l[i * c + j - 1] } else { 0.0 };
            l[i * c + j] = up.max(left) + field.get(i, j);
        }
    }
    Grid { rows: r, cols: c, data: l }
}

/// Tandem queues: `service` row k is customer k, column j is queue j.
/// Returns D with D(j, k) the time customer k leaves queue j, where queue 0
/// emits the arrivals.
pub fn queue_departures(service: &Grid) -> Grid {
    let (customers, queues) = (service.rows, service.cols);
    let mut dep = vec![0.0f64; queues * customers];
    for j in 0..queues {
        for k in 0..customers {
            let prev_customer = if k > 0 { dep[j * customers + k - 1] } else { 0.0 };
            let arrival = if j > 0 { dep[(j - 1) * customers + k] } else { 0.0 };
            dep[j * customers + k] = prev_customer.max(arrival) + service.get(k, j);
        }
    }
    Grid { rows: queues, cols: customers, data: dep }
}

/// n x d field with column j exponential of rate lambda_j.
pub fn sample_field(rng: &mut StreamRng, n: usize, rates: &Rates) -> Grid {
    let ex: Vec<Exp<f64>> = rates.rates.iter().map(|&l| Exp::new(l).unwrap()).collect();
    let d = rates.dim();
    let data = (0..n * d).map(|k| ex[k % d].sample(rng)).collect();
    Grid { rows: n, cols: d, data }
}

/// Samples of the top particle after n steps for the walk started at the
/// origin, via last passage to the corner of an n x d field.
pub fn sample_z_from_zero(n: u32, rates: &Rates, cfg: &SimConfig) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let chunks = map_chunks(cfg.seed, cfg.samples, cfg.streams, |rng, _, _, len| {
        (0..len).map(|_| lpp_dp(&sample_field(rng, n as usize, rates)).corner()).collect::<Vec<f64>>()
    });
    Ok(chunks.concat())
}
