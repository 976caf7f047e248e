use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Pareto, StandardNormal};

use super::kernel::Alphabet;
use crate::error::{Error, Result};

/// Distribution of the i.i.d. sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    Alphabet(Alphabet),
    /// Uniform on `[0, 1]`.
    Uniform,
    StandardNormal,
    Rademacher,
    /// `±Y` with `Y` Pareto of scale 1 and the given tail index.
    ParetoSym { tail_index: f64 },
    /// `±(exp(σ|Z|) - 1)`: the tail decays like `exp(-C ln² x)`, the
    /// log-tail regime of the exponential-power envelopes with `β = 1`.
    LogNormalSym { sigma: f64 },
}

impl Sampler {
    pub fn validate(&self) -> Result<()> {
        match self {
            Sampler::ParetoSym { tail_index } if !(tail_index.is_finite() && *tail_index > 0.0) => {
                Err(Error::InvalidValue(format!("Pareto tail index must be positive, got {tail_index}")))
            }
            Sampler::LogNormalSym { sigma } if !(sigma.is_finite() && *sigma > 0.0) => {
                Err(Error::InvalidValue(format!("log-normal sigma must be positive, got {sigma}")))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Alphabet(a) => a.quantile(rng.random::<f64>()),
            Sampler::Uniform => rng.random::<f64>(),
            Sampler::StandardNormal => StandardNormal.sample(rng),
            Sampler::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Sampler::ParetoSym { tail_index } => {
                let y = Pareto::new(1.0, *tail_index).expect("validated").sample(rng);
                if rng.random::<bool>() {
                    y
                } else {
                    -y
                }
            }
            Sampler::LogNormalSym { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                let y = (sigma * z.abs()).exp_m1();
                if rng.random::<bool>() {
                    y
                } else {
                    -y
                }
            }
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.sample(rng);
        }
    }

    /// The finite law, when there is one.
    pub fn alphabet(&self) -> Option<Alphabet> {
        match self {
            Sampler::Alphabet(a) => Some(a.clone()),
            Sampler::Rademacher => Some(Alphabet::uniform(vec![-1.0, 1.0]).expect("valid")),
            _ => None,
        }
    }
}

/// Parses `normal`, `uniform`, `rademacher`, `pareto(3)`, `lognormal(0.5)`
/// and `alphabet(-1:0.25, 0:0.5, 1:0.25)`.
impl FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.find('(') {
            Some(i) if s.ends_with(')') => (&s[..i], Some(&s[i + 1..s.len() - 1])),
            _ => (s, None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::InvalidValue(format!("sampler `{name}` needs an argument")))?;
            a.trim()
                .parse()
                .map_err(|_| Error::InvalidValue(format!("bad sampler argument `{a}`")))
        };
        let sampler = match (name.trim().to_ascii_lowercase().as_str(), arg) {
            ("uniform", None) => Sampler::Uniform,
            ("normal" | "standard_normal", None) => Sampler::StandardNormal,
            ("rademacher", None) => Sampler::Rademacher,
            ("pareto" | "pareto_sym", a) => Sampler::ParetoSym { tail_index: number(a)? },
            ("lognormal" | "lognormal_sym", a) => Sampler::LogNormalSym { sigma: number(a)? },
            ("alphabet", Some(a)) => {
                let mut values = Vec::new();
                let mut weights = Vec::new();
                for item in a.split(',') {
                    let (v, w) = item
                        .split_once(':')
                        .ok_or_else(|| Error::InvalidValue(format!("alphabet entry `{item}` is not value:weight")))?;
                    values.push(number(Some(v))?);
                    weights.push(number(Some(w))?);
                }
                Sampler::Alphabet(Alphabet::new(values, weights)?)
            }
            (other, _) => {
                return Err(Error::Unknown {
                    kind: "sampler",
                    name: other.to_string(),
                })
            }
        };
        sampler.validate()?;
        Ok(sampler)
    }
}

impl std::fmt::Display for Sampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sampler::Alphabet(a) => {
                write!(f, "alphabet(")?;
                for (i, (v, w)) in a.values().iter().zip(a.weights()).enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}:{w}")?;
                }
                write!(f, ")")
            }
            Sampler::Uniform => write!(f, "uniform"),
            Sampler::StandardNormal => write!(f, "normal"),
            Sampler::Rademacher => write!(f, "rademacher"),
            Sampler::ParetoSym { tail_index } => write!(f, "pareto({tail_index})"),
            Sampler::LogNormalSym { sigma } => write!(f, "lognormal({sigma})"),
        }
    }
}
