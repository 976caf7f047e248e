//! Text record form of [`PsiFunction`]: a family tag followed by `key=value`
//! tokens, e.g. `MR m=2 r=0 d=1` or `TABULATED p=2;4;8 v=1;1.5;2`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{PsiFamily, PsiFunction};
use crate::error::{Error, Result};

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

impl fmt::Display for PsiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family() {
            PsiFamily::PowerLog { m, r } => write!(f, "MR m={m} r={r}")?,
            PsiFamily::ExpPower { c3, beta } => write!(f, "BETA c3={c3} beta={beta}")?,
            PsiFamily::Constant { c, b } => write!(f, "CONST_B c={c} b={b}")?,
            PsiFamily::Tabulated { p_grid, values } => {
                write!(f, "TABULATED p={} v={}", join(p_grid), join(values))?
            }
        }
        if self.rosenthal_degree() > 0 {
            write!(f, " d={}", self.rosenthal_degree())?;
        }
        Ok(())
    }
}

fn number(fields: &BTreeMap<&str, &str>, key: &str) -> Result<f64> {
    let raw = fields
        .get(key)
        .ok_or_else(|| Error::parse(1, format!("psi record is missing `{key}`")))?;
    raw.parse()
        .map_err(|_| Error::parse(1, format!("`{key}` is not a number: {raw}")))
}

fn list(fields: &BTreeMap<&str, &str>, key: &str) -> Result<Vec<f64>> {
    let raw = fields
        .get(key)
        .ok_or_else(|| Error::parse(1, format!("psi record is missing `{key}`")))?;
    raw.split(';')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::parse(1, format!("`{key}` entry is not a number: {s}")))
        })
        .collect()
}

impl FromStr for PsiFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut tokens = s.split_whitespace();
        let tag = tokens
            .next()
            .ok_or_else(|| Error::parse(1, "empty psi record"))?;
        let mut fields = BTreeMap::new();
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::parse(1, format!("expected key=value, got `{tok}`")))?;
            fields.insert(k, v);
        }
        let psi = match tag.to_ascii_uppercase().as_str() {
            "MR" => PsiFunction::power_log(number(&fields, "m")?, number(&fields, "r")?)?,
            "BETA" => PsiFunction::exp_power(number(&fields, "c3")?, number(&fields, "beta")?)?,
            "CONST_B" => PsiFunction::constant(number(&fields, "c")?, number(&fields, "b")?)?,
            "TABULATED" => PsiFunction::tabulated(list(&fields, "p")?, list(&fields, "v")?)?,
            other => {
                return Err(Error::Unknown {
                    kind: "psi family",
                    name: other.to_string(),
                })
            }
        };
        let d = match fields.get("d") {
            Some(raw) => raw
                .parse::<u32>()
                .map_err(|_| Error::parse(1, format!("`d` must be a nonnegative integer: {raw}")))?,
            None => 0,
        };
        Ok(psi.rosenthal_lift(d))
    }
}
