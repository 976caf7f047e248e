//! Moment envelopes ("ψ-functions") and the Grand Lebesgue norm calculus.
//!
//! A [`PsiFunction`] is a positive function on `[2, b)` that bounds the growth
//! of `L_p` norms. Together with a [`MomentTable`] it yields the `Gψ` norm
//! `sup_p |η|_p / ψ(p)`; the Young-Fenchel transform of `ν(p) = p ln ψ(p)`
//! turns that norm into an exponential tail bound.
//!
//! All extrema over `p` are taken on a log-spaced grid followed by one
//! golden-section refinement of the bracketing cell (see [`GridConfig`]).

mod fenchel;
mod record;

pub use fenchel::{
    gls_norm, golden_max, golden_min, nu_star, nu_star_at, tail_bound, v_inf, FenchelValue,
};

use crate::error::{Error, Result};

/// Relative slack allowed when checking a point against the support ends.
const SUPPORT_SLACK: f64 = 1e-12;

/// Discretization of the `p` axis used by every sup/inf over `Ψ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub points: usize,
    /// Truncation point for families with `b = ∞`.
    pub p_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            points: 257,
            p_max: 64.0,
        }
    }
}

impl GridConfig {
    pub fn with_p_max(p_max: f64) -> Self {
        Self {
            p_max,
            ..Self::default()
        }
    }

    /// Same range, twice the density.
    pub fn refined(&self) -> Self {
        Self {
            points: 2 * self.points - 1,
            p_max: self.p_max,
        }
    }
}

/// A grid of `p` values together with the truncation flag.
#[derive(Debug, Clone, PartialEq)]
pub struct PGrid {
    pub points: Vec<f64>,
    /// Set when the support extends beyond `p_max` and was cut there.
    pub truncated: bool,
}

/// `n` log-spaced points on `[lo, hi]`, both ends included exactly.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || hi <= lo {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut out: Vec<f64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect();
    out[0] = lo;
    out[n - 1] = hi;
    out
}

/// `n` evenly spaced points on `[lo, hi]`, both ends included exactly.
pub fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let mut out: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    out[n - 1] = hi;
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum PsiFamily {
    /// `p^{1/m} ln^r p`, `b = ∞`.
    PowerLog { m: f64, r: f64 },
    /// `exp(c3 p^β)`, `b = ∞`.
    ExpPower { c3: f64, beta: f64 },
    /// Constant `c` on `[2, b]`; only `b`-th moments are controlled.
    Constant { c: f64, b: f64 },
    /// Moment envelope known on a grid; `ln ψ` is interpolated linearly in `p`.
    Tabulated { p_grid: Vec<f64>, values: Vec<f64> },
}

/// A member of `Ψ(b)`, optionally multiplied by the Rosenthal factor
/// `(p / ln p)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiFunction {
    family: PsiFamily,
    rosenthal_degree: u32,
}

impl PsiFunction {
    /// Validates the family parameters and builds the function.
    pub fn new(family: PsiFamily) -> Result<Self> {
        match &family {
            PsiFamily::PowerLog { m, r } => {
                if !(m.is_finite() && *m > 0.0) || !r.is_finite() {
                    return Err(Error::InvalidValue(format!(
                        "power-log family needs m > 0 and finite r, got m = {m}, r = {r}"
                    )));
                }
            }
            PsiFamily::ExpPower { c3, beta } => {
                if !(c3.is_finite() && *c3 > 0.0 && beta.is_finite() && *beta > 0.0) {
                    return Err(Error::InvalidValue(format!(
                        "exp-power family needs c3 > 0 and beta > 0, got c3 = {c3}, beta = {beta}"
                    )));
                }
            }
            PsiFamily::Constant { c, b } => {
                if b.is_nan() || *b <= 2.0 {
                    return Err(Error::InvalidDomain(format!("b must exceed 2, got {b}")));
                }
                if !(c.is_finite() && *c > 0.0) {
                    return Err(Error::InvalidValue(format!("constant must be positive, got {c}")));
                }
            }
            PsiFamily::Tabulated { p_grid, values } => {
                if p_grid.is_empty() || p_grid.len() != values.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "tabulated psi needs matching nonempty arrays, got {} p values and {} values",
                        p_grid.len(),
                        values.len()
                    )));
                }
                if p_grid[0] < 2.0 || p_grid.iter().any(|p| !p.is_finite()) {
                    return Err(Error::InvalidDomain(format!(
                        "tabulated grid must lie in [2, inf), starts at {}",
                        p_grid[0]
                    )));
                }
                if p_grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidDomain(
                        "tabulated grid must be strictly increasing".into(),
                    ));
                }
                if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    return Err(Error::InvalidValue(format!(
                        "tabulated psi values must be positive, got {v}"
                    )));
                }
            }
        }
        Ok(Self {
            family,
            rosenthal_degree: 0,
        })
    }

    pub fn power_log(m: f64, r: f64) -> Result<Self> {
        Self::new(PsiFamily::PowerLog { m, r })
    }

    pub fn exp_power(c3: f64, beta: f64) -> Result<Self> {
        Self::new(PsiFamily::ExpPower { c3, beta })
    }

    pub fn constant(c: f64, b: f64) -> Result<Self> {
        Self::new(PsiFamily::Constant { c, b })
    }

    pub fn tabulated(p_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(PsiFamily::Tabulated { p_grid, values })
    }

    pub fn family(&self) -> &PsiFamily {
        &self.family
    }

    pub fn rosenthal_degree(&self) -> u32 {
        self.rosenthal_degree
    }

    /// Multiplies by `(p / ln p)^d`. Degrees add under composition.
    pub fn rosenthal_lift(&self, d: u32) -> Self {
        Self {
            family: self.family.clone(),
            rosenthal_degree: self.rosenthal_degree + d,
        }
    }

    /// The same envelope without the Rosenthal factor.
    pub fn base(&self) -> Self {
        Self {
            family: self.family.clone(),
            rosenthal_degree: 0,
        }
    }

    /// Supremum of the finite support; `f64::INFINITY` for the unbounded families.
    pub fn b(&self) -> f64 {
        self.support().1
    }

    /// Closed interval on which the function may be evaluated.
    pub fn support(&self) -> (f64, f64) {
        match &self.family {
            PsiFamily::PowerLog { .. } | PsiFamily::ExpPower { .. } => (2.0, f64::INFINITY),
            PsiFamily::Constant { b, .. } => (2.0, *b),
            PsiFamily::Tabulated { p_grid, .. } => (p_grid[0], p_grid[p_grid.len() - 1]),
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        let (lo, hi) = self.support();
        p >= lo * (1.0 - SUPPORT_SLACK) && p <= hi * (1.0 + SUPPORT_SLACK)
    }

    /// `ln ψ(p)` including the Rosenthal factor.
    pub fn ln_eval(&self, p: f64) -> Result<f64> {
        if !self.contains(p) {
            let (lo, hi) = self.support();
            return Err(Error::OutsideSupport { p, lo, hi });
        }
        let (lo, hi) = self.support();
        let p = p.clamp(lo, hi);
        let base = match &self.family {
            PsiFamily::PowerLog { m, r } => {
                let lp = p.ln();
                lp / m + if *r == 0.0 { 0.0 } else { r * lp.ln() }
            }
            PsiFamily::ExpPower { c3, beta } => c3 * p.powf(*beta),
            PsiFamily::Constant { c, .. } => c.ln(),
            PsiFamily::Tabulated { p_grid, values } => interpolate_log(p_grid, values, p),
        };
        Ok(base + self.rosenthal_degree as f64 * rosenthal_ln_factor(p))
    }

    pub fn eval(&self, p: f64) -> Result<f64> {
        self.ln_eval(p).map(f64::exp)
    }

    /// Log-spaced grid on `[lo, min(b, p_max)]`.
    pub fn p_grid(&self, cfg: &GridConfig) -> PGrid {
        let (lo, hi) = self.support();
        let truncated = hi > cfg.p_max;
        let top = hi.min(cfg.p_max).max(lo);
        PGrid {
            points: log_space(lo, top, cfg.points),
            truncated,
        }
    }
}

/// `ln (p / ln p)`.
fn rosenthal_ln_factor(p: f64) -> f64 {
    p.ln() - p.ln().ln()
}

fn interpolate_log(p_grid: &[f64], values: &[f64], p: f64) -> f64 {
    let last = p_grid.len() - 1;
    if p <= p_grid[0] {
        return values[0].ln();
    }
    if p >= p_grid[last] {
        return values[last].ln();
    }
    // first knot strictly above p
    let hi = p_grid.partition_point(|&q| q <= p);
    let lo = hi - 1;
    let w = (p - p_grid[lo]) / (p_grid[hi] - p_grid[lo]);
    (1.0 - w) * values[lo].ln() + w * values[hi].ln()
}

/// Empirical or exact `L_p` norms of one random quantity over a `p` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub p_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub sample_count: usize,
    pub label: String,
    /// Index of the first grid point beyond the reliable range, if any.
    pub low_confidence_from: Option<usize>,
    /// Largest monotonicity violation removed by the isotonic correction.
    pub max_violation: f64,
}

impl MomentTable {
    /// A table of exactly known norms (no correction, no confidence cap).
    pub fn exact(p_grid: Vec<f64>, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if p_grid.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} p values vs {} norms",
                p_grid.len(),
                values.len()
            )));
        }
        if let Some(p) = p_grid.iter().find(|p| !(**p >= 2.0)) {
            return Err(Error::InvalidDomain(format!("moment grid must be >= 2, got {p}")));
        }
        Ok(Self {
            p_grid,
            values,
            sample_count: 0,
            label: label.into(),
            low_confidence_from: None,
            max_violation: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.p_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_grid.is_empty()
    }

    /// Multiplies every norm by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * a).collect(),
            ..self.clone()
        }
    }

    /// The prefix of the table flagged as reliable.
    pub fn confident(&self) -> Self {
        let end = self.low_confidence_from.unwrap_or(self.len());
        Self {
            p_grid: self.p_grid[..end].to_vec(),
            values: self.values[..end].to_vec(),
            low_confidence_from: None,
            ..self.clone()
        }
    }
}
