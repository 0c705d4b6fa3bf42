use crate::params::Params;
use clap::ValueEnum;
use ordwalk::density::{killed_density, survival, SurvivalMethod};
use ordwalk::exittime::{gamma_rate, p2_series, rho_survival_pf, tail_predict, x_const};
use ordwalk::fredholm::extreme_cdf;
use ordwalk::harmonic::{frak_h, h_for_rates, h_hat};
use ordwalk::mathcore::LogSigned;
use ordwalk::{Error, Result};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    H,
    Hfrak,
    Hhat,
    Density,
    Survival,
    P2,
    Pfsurvival,
    Xconst,
    Gamma,
    Tailpredict,
    Fredholm,
}

impl Quantity {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }

    pub fn parse(s: &str) -> Result<Self> {
        <Self as ValueEnum>::from_str(s, true).map_err(|_| Error::InvalidInput(format!("unknown quantity '{s}'")))
    }
}

fn number(v: f64) -> Value {
    logged(LogSigned::from_f64(v), v)
}

fn logged(l: LogSigned, v: f64) -> Value {
    json!({ "value": v, "log_value": l.log_abs, "sign": l.sign })
}

pub fn run(what: Quantity, p: &Params) -> Result<Value> {
    Ok(match what {
        Quantity::H => number(h_for_rates(p.x()?, &p.rates()?)?),
        Quantity::Hfrak => number(frak_h(p.x()?, &p.rates()?)?),
        Quantity::Hhat => number(h_hat(p.z()?)?),
        Quantity::Density => {
            let v = killed_density(p.x()?, p.z()?, p.n()?, &p.rates()?, p.kill())?;
            logged(v, v.value())
        }
        Quantity::Survival => {
            let method = p.method.unwrap_or(SurvivalMethod::Quadrature);
            let cfg = p.sim(p.seed.unwrap_or(crate::DEFAULT_SEED), 100_000);
            let e = survival(p.x()?, p.n()?, &p.rates()?, p.kill(), method, Some(&cfg))?;
            let mut out = number(e.value);
            out["stderr"] = json!(e.stderr);
            out
        }
        Quantity::P2 => {
            let x = p.x()?;
            if x.len() != 2 {
                return Err(Error::Dimension("p2 needs two coordinates".into()));
            }
            number(p2_series(x[0], x[1], p.n()?)?)
        }
        Quantity::Pfsurvival => number(rho_survival_pf(p.x()?, p.n()?)?),
        Quantity::Xconst => number(x_const(p.dim()?)),
        Quantity::Gamma => number(gamma_rate(&p.rates()?)),
        Quantity::Tailpredict => number(tail_predict(p.x()?, p.n()?, &p.rates()?, p.kill())?),
        Quantity::Fredholm => {
            let spec = p.kernel_spec()?;
            let mut out = number(extreme_cdf(&spec)?);
            out["spec"] = serde_json::to_value(&spec).expect("plain data serializes");
            out
        }
    })
}
