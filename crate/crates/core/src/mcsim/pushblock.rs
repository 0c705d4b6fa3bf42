use super::SimConfig;
use crate::error::{Error, Result};
use crate::rng::{map_chunks, StreamRng};
use crate::walkmodel::{GTPattern, Rates};
use rand_distr::{Distribution, Exp};

fn check_rates(rates: &Rates) -> Result<()> {
    if rates.rates.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Regime("push-block dynamics need weakly decreasing rates".into()));
    }
    Ok(())
}

/// One sweep of the push-block update; layer k uses rate lambda_k.
fn sweep(rng: &mut StreamRng, ex: &[Exp<f64>], layers: &mut [Vec<f64>]) {
    for k in 0..layers.len() {
        let (below, rest) = layers.split_at_mut(k);
        let cur = &mut rest[0];
        let lower = below.last();
        for j in 0..cur.len() {
            let old = cur[j];
            // pushed by the updated left neighbour in the layer below
            let base = match lower {
                Some(l) if j > 0 && l[j - 1] > old => l[j - 1],
                _ => old,
            };
            let cand = base + ex[k].sample(rng);
            // blocked by the updated right neighbour in the layer below
            cur[j] = match lower {
                Some(l) if j < l.len() && cand > l[j] => l[j],
                _ => cand,
            };
        }
    }
}

/// Patterns at times 0..=n starting from the all-zero pattern.
pub fn pushblock_evolve(n: u32, rates: &Rates, rng: &mut StreamRng) -> Result<Vec<GTPattern>> {
    check_rates(rates)?;
    let ex: Vec<Exp<f64>> = rates.rates.iter().map(|&l| Exp::new(l).unwrap()).collect();
    let mut p = GTPattern::zeros(rates.dim());
    let mut out = vec![p.clone()];
    for _ in 0..n {
        sweep(rng, &ex, &mut p.layers);
        out.push(GTPattern::new(p.layers.clone())?);
    }
    Ok(out)
}

/// Samples of the top entry of the last layer after n sweeps.
pub fn pushblock_top_samples(n: u32, rates: &Rates, cfg: &SimConfig) -> Result<Vec<f64>> {
    check_rates(rates)?;
    let ex: Vec<Exp<f64>> = rates.rates.iter().map(|&l| Exp::new(l).unwrap()).collect();
    let d = rates.dim();
    let chunks = map_chunks(cfg.seed, cfg.samples, cfg.streams, |rng, _, _, len| {
        (0..len)
            .map(|_| {
                let mut layers = GTPattern::zeros(d).layers;
                for _ in 0..n {
                    sweep(rng, &ex, &mut layers);
                }
                layers[d - 1][d - 1]
            })
            .collect::<Vec<f64>>()
    });
    Ok(chunks.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn patterns_interlace_and_grow() {
        let r = Rates::equal(4, 1.0).unwrap();
        let traj = pushblock_evolve(20, &r, &mut stream_rng(3, 0)).unwrap();
        assert_eq!(traj.len(), 21);
        for w in traj.windows(2) {
            for (a, b) in w[0].layers.iter().flatten().zip(w[1].layers.iter().flatten()) {
                assert!(b >= a);
            }
        }
    }

    #[test]
    fn rejects_increasing_rates() {
        let r = Rates::new(vec![1.0, 2.0]).unwrap();
        assert!(pushblock_evolve(2, &r, &mut stream_rng(1, 0)).is_err());
    }
}
