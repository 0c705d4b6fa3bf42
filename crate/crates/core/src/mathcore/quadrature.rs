use crate::error::{Error, Result};
use gauss_quad::GaussLegendre;
use rayon::prelude::*;
use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gauss_legendre(n: usize) -> Result<Arc<QuadratureRule>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(r) = cache.lock().unwrap().get(&n) {
            return Ok(r.clone());
        }
        let nz = NonZeroUsize::new(n).ok_or_else(|| Error::InvalidInput("zero quadrature nodes".into()))?;
        let gl = GaussLegendre::new(nz);
        let mut pairs: Vec<(f64, f64)> = gl.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let rule = Arc::new(QuadratureRule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        });
        cache.lock().unwrap().insert(n, rule.clone());
        Ok(rule)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let m = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (m + h * x, h * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Integration region: the ordered chamber z_1 <= ... <= z_d intersected
/// with a box, plus the locations where the integrand has kinks.
#[derive(Debug, Clone)]
pub struct ChamberSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Points where the integrand (in any coordinate) is not smooth.
    pub breakpoints: Vec<f64>,
    /// Longest panel before it is subdivided.
    pub max_panel: f64,
}

impl ChamberSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        ChamberSpec { lower, upper, breakpoints: Vec::new(), max_panel: f64::INFINITY }
    }

    pub fn with_breakpoints(mut self, b: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(b);
        self
    }

    pub fn with_max_panel(mut self, w: f64) -> Self {
        self.max_panel = w;
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn cuts(&self) -> Vec<f64> {
        let mut c: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(&self.lower)
            .chain(&self.upper)
            .copied()
            .filter(|v| v.is_finite())
            .collect();
        c.sort_by(f64::total_cmp);
        c.dedup();
        c
    }
}

/// Panels covering [a, b], cut at `cuts` and at most `max_panel` wide.
pub fn panels(a: f64, b: f64, cuts: &[f64], max_panel: f64) -> Vec<(f64, f64)> {
    let mut pts = vec![a];
    pts.extend(cuts.iter().copied().filter(|&c| c > a && c < b));
    pts.push(b);
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let k = if max_panel.is_finite() { (len / max_panel).ceil().max(1.0) as usize } else { 1 };
        for i in 0..k {
            out.push((w[0] + len * i as f64 / k as f64, w[0] + len * (i + 1) as f64 / k as f64));
        }
    }
    out
}

fn nested(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    spec: &ChamberSpec,
    cuts: &[f64],
    rule: &QuadratureRule,
    axis: usize,
    z: &mut [f64],
) -> f64 {
    // axis runs from d-1 (outermost) down to 0
    let a = spec.lower[axis];
    let b = if axis + 1 < z.len() { spec.upper[axis].min(z[axis + 1]) } else { spec.upper[axis] };
    if b <= a {
        return 0.0;
    }
    let mut acc = 0.0;
    for (p, q) in panels(a, b, cuts, spec.max_panel) {
        for (x, w) in rule.mapped(p, q) {
            z[axis] = x;
            acc += w * if axis == 0 { f(z) } else { nested(f, spec, cuts, rule, axis - 1, z) };
        }
    }
    acc
}

/// Iterated Gauss-Legendre over the ordered chamber within the box, with
/// `nodes` points per panel. Outermost nodes are spread over threads and
/// summed in a fixed order.
pub fn chamber_integrate(f: &(dyn Fn(&[f64]) -> f64 + Sync), spec: &ChamberSpec, nodes: usize) -> Result<f64> {
    let d = spec.dim();
    if d == 0 || spec.upper.len() != d {
        return Err(Error::Dimension("chamber box bounds".into()));
    }
    if d > 4 {
        return Err(Error::Capability(format!("chamber quadrature supports d <= 4, got {d}")));
    }
    if spec.lower.iter().chain(&spec.upper).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("chamber box must be finite".into()));
    }
    let rule = QuadratureRule::gauss_legendre(nodes)?;
    let cuts = spec.cuts();
    let top = d - 1;
    let outer: Vec<(f64, f64)> = panels(spec.lower[top], spec.upper[top], &cuts, spec.max_panel)
        .into_iter()
        .flat_map(|(p, q)| rule.mapped(p, q).collect::<Vec<_>>())
        .collect();
    let parts: Vec<f64> = outer
        .par_iter()
        .map(|&(x, w)| {
            let mut z = vec![0.0; d];
            z[top] = x;
            w * if top == 0 { f(&z) } else { nested(f, spec, &cuts, &rule, top - 1, &mut z) }
        })
        .collect();
    Ok(parts.iter().sum())
}

/// Repeats `chamber_integrate`, doubling the nodes per panel until two
/// successive results agree to `tol` (relative to max(|I|, floor)).
pub fn chamber_integrate_refined(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    spec: &ChamberSpec,
    start_nodes: usize,
    max_nodes: usize,
    tol: f64,
    floor: f64,
) -> Result<f64> {
    let mut n = start_nodes.max(1);
    let mut prev = chamber_integrate(f, spec, n)?;
    loop {
        let next_n = n * 2;
        if next_n > max_nodes {
            return Err(Error::Accuracy { coarse: prev, fine: prev });
        }
        let cur = chamber_integrate(f, spec, next_n)?;
        if (cur - prev).abs() <= tol * cur.abs().max(floor) {
            return Ok(cur);
        }
        if next_n * 2 > max_nodes {
            return Err(Error::Accuracy { coarse: prev, fine: cur });
        }
        prev = cur;
        n = next_n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::special::{gamma_density, reg_lower_gamma};

    #[test]
    fn simplex_volumes() {
        let two = ChamberSpec::new(vec![0.0; 2], vec![1.0; 2]);
        assert!((chamber_integrate(&|_| 1.0, &two, 8).unwrap() - 0.5).abs() < 1e-14);
        let three = ChamberSpec::new(vec![0.0; 3], vec![1.0; 3]);
        assert!((chamber_integrate(&|_| 1.0, &three, 8).unwrap() - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn gamma_normalisation() {
        let spec = ChamberSpec::new(vec![0.0], vec![40.0]).with_max_panel(5.0);
        let v = chamber_integrate(&|z| gamma_density(5, z[0]), &spec, 32).unwrap();
        assert!((v - reg_lower_gamma(5.0, 40.0)).abs() < 1e-12);
    }

    #[test]
    fn too_many_dims() {
        let spec = ChamberSpec::new(vec![0.0; 5], vec![1.0; 5]);
        assert!(matches!(chamber_integrate(&|_| 1.0, &spec, 4), Err(Error::Capability(_))));
    }

    #[test]
    fn kinks_handled_by_breakpoints() {
        // |z - 0.3| on [0, 1]: exact with a cut at 0.3
        let spec = ChamberSpec::new(vec![0.0], vec![1.0]).with_breakpoints([0.3]);
        let v = chamber_integrate(&|z| (z[0] - 0.3).abs(), &spec, 4).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-14);
    }
}
