use crate::params::Params;
use clap::ValueEnum;
use ordwalk::fredholm::Extreme;
use ordwalk::mcsim::stats::ks_two_sample;
use ordwalk::mcsim::{
    coupling_check, htransform_estimate, lpp_dp, pushblock_top_samples, queue_departures, sample_field, sample_paths,
    sample_z_from_zero, survival_estimate, Trajectory,
};
use ordwalk::rng::{stream_rng, MeanVar};
use ordwalk::{Error, Result};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Paths,
    Survival,
    Htransform,
    Lpp,
    Queues,
    Pushblock,
    Coupling,
    Zfromzero,
}

impl Experiment {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }

    pub fn parse(s: &str) -> Result<Self> {
        <Self as ValueEnum>::from_str(s, true).map_err(|_| Error::InvalidInput(format!("unknown experiment '{s}'")))
    }
}

fn summary(values: &[f64]) -> Value {
    let mut mv = MeanVar::default();
    values.iter().for_each(|&v| mv.push(v));
    json!({ "estimate": mv.mean, "stderr": mv.stderr(), "samples": values.len() })
}

pub fn run(what: Experiment, p: &Params, seed: u64) -> Result<Value> {
    let mut out = match what {
        Experiment::Paths => {
            let cfg = p.sim(seed, 1_000);
            let n = p.n()?;
            let ens = sample_paths(p.x()?, &p.rates()?, n, &cfg)?;
            if let Some(path) = &p.csv {
                std::fs::write(path, ens.to_csv()).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
            }
            let alive = |k: &[Option<u32>]| k.iter().filter(|t| t.is_none()).count();
            json!({
                "paths": ens.len(),
                "horizon": n,
                "tau_survivors": alive(&ens.tau),
                "rho_survivors": alive(&ens.rho),
            })
        }
        Experiment::Survival => {
            let cfg = p.sim(seed, 100_000);
            let e = survival_estimate(p.x()?, p.n()?, &p.rates()?, p.kill(), &cfg)?;
            json!({ "estimate": e.value, "stderr": e.stderr, "samples": cfg.samples })
        }
        Experiment::Htransform => {
            let cfg = p.sim(seed, 100_000);
            let x = p.x()?;
            let d = x.len();
            let times = if p.times.is_empty() { vec![p.n()?] } else { p.times.clone() };
            if !p.thresholds.is_empty() && p.thresholds.len() != times.len() {
                return Err(Error::Dimension("one threshold per time".into()));
            }
            let horizon = *times.iter().max().expect("at least one time");
            let thresholds = p.thresholds.clone();
            let extreme = p.extreme.unwrap_or(Extreme::Largest);
            // with thresholds: probability of the extreme-particle event, else 1
            let stat = move |tr: &Trajectory| -> f64 {
                let hit = times.iter().zip(&thresholds).all(|(&n, &xi)| {
                    let s = tr.at(n as usize);
                    match extreme {
                        Extreme::Largest => s[d - 1] <= xi,
                        Extreme::Smallest => s[0] > xi,
                    }
                });
                f64::from(u8::from(hit))
            };
            let e = htransform_estimate(x, horizon, &p.rates()?, &stat, &cfg)?;
            json!({ "estimate": e.value, "stderr": e.stderr, "samples": cfg.samples })
        }
        Experiment::Lpp | Experiment::Zfromzero => {
            let cfg = p.sim(seed, 100_000);
            let z = sample_z_from_zero(p.n()?, &p.rates()?, &cfg)?;
            summary(&z)
        }
        Experiment::Queues => {
            let trials = p.trials.unwrap_or(1_000);
            let (n, rates) = (p.n()? as usize, p.rates()?);
            let mismatches = (0..trials)
                .filter(|&k| {
                    let field = sample_field(&mut stream_rng(seed, k), n, &rates);
                    queue_departures(&field) != lpp_dp(&field).transpose()
                })
                .count();
            json!({ "trials": trials, "mismatches": mismatches })
        }
        Experiment::Pushblock => {
            let (n, rates) = (p.n()?, p.rates()?);
            let cfg = p.sim(seed, 100_000);
            let top = pushblock_top_samples(n, &rates, &cfg)?;
            // reference sample from last passage on an independent seed
            let reference = sample_z_from_zero(n, &rates, &p.sim(seed.wrapping_add(1), cfg.samples))?;
            let (ks_d, ks_p) = ks_two_sample(&top, &reference);
            let mut s = summary(&top);
            s["ks_statistic"] = json!(ks_d);
            s["ks_p_value"] = json!(ks_p);
            s
        }
        Experiment::Coupling => {
            let mut cfg = p.sim(seed, 10_000);
            if let Some(t) = p.trials {
                cfg.samples = t;
            }
            let rates = p.rates()?;
            let rep = coupling_check(rates.dim(), p.n()?, &rates, &cfg)?;
            json!({
                "trials": rep.trials,
                "value_failures": rep.value_failures,
                "event_failures": rep.event_failures,
                "failures": rep.value_failures + rep.event_failures,
            })
        }
    };
    out["seed"] = json!(seed);
    Ok(out)
}
