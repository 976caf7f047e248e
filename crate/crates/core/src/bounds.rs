//! Uniform tail bounds for the normalized deviation field and their
//! comparison with Monte Carlo evidence.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::empirics::{
    column_moments, empirical_moments, empirical_tail, natural_distance, natural_psi_from_tables, CurveKind,
    FieldSampleMatrix, TailCurve,
};
use crate::entropy::{
    default_eps_grid, entropy_integral, refinement_trend, CoverEstimator, EntropyIntegral, RefinementTrend,
};
use crate::error::{Error, Result};
use crate::psi::{gls_norm, nu_star, GridConfig, MomentTable, PsiFunction};

/// Source of the norm `K` that scales the uniform bound.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Calibration {
    /// `Gτ` norm of the empirical sup-statistic.
    #[default]
    Empirical,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundConfig {
    pub degree: u32,
    /// Moment grid for the natural envelope and the calibration.
    pub p_grid: Vec<f64>,
    pub u_grid: Vec<f64>,
    /// Radii for the entropy integral; defaults to [`default_eps_grid`].
    pub eps_grid: Option<Vec<f64>>,
    /// Replaces the natural envelope.
    pub psi_override: Option<PsiFunction>,
    pub estimator: CoverEstimator,
    pub fenchel: GridConfig,
    pub calibration: Calibration,
    /// A refinement step that multiplies the entropy integral by more than
    /// this marks it as diverging.
    pub divergence_factor: f64,
}

impl BoundConfig {
    pub fn new(degree: u32, p_grid: Vec<f64>, u_grid: Vec<f64>) -> Self {
        Self {
            degree,
            p_grid,
            u_grid,
            eps_grid: None,
            psi_override: None,
            estimator: CoverEstimator::default(),
            fenchel: GridConfig::default(),
            calibration: Calibration::Empirical,
            divergence_factor: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub psi_used: PsiFunction,
    pub psi_source: String,
    pub tau: PsiFunction,
    pub degree: u32,
    pub t_count: usize,
    pub replications: usize,
    pub entropy: EntropyIntegral,
    pub trend: Option<RefinementTrend>,
    /// False when the entropy integral looks divergent.
    pub certified: bool,
    pub scalar_degenerate: bool,
    pub diam: f64,
    /// `Gτ` norm of `sup_t |φ_n(t)|`.
    pub sup_norm_gnorm: f64,
    pub upper: TailCurve,
    /// `-ln` of the upper curve; finite where the probability underflows.
    pub upper_exponent: Vec<f64>,
    pub empirical: TailCurve,
    pub lower: Option<TailCurve>,
    pub notes: Vec<String>,
}

/// Uniform bound `u ↦ exp(-ν*_τ(ln(u / K)))` for `sup_t |φ_n(t)|`.
///
/// `τ` is the Rosenthal lift of the natural envelope (or the override), the
/// entropy integral runs over the natural distance of the field, and `K` is
/// the calibrated `Gτ` norm of the sup-statistic.
pub fn uniform_tail_bound(field: &FieldSampleMatrix, cfg: &BoundConfig) -> Result<BoundReport> {
    if cfg.degree == 0 {
        return Err(Error::InvalidValue("kernel degree must be at least 1".into()));
    }
    let mut notes = Vec::new();
    let tables = column_moments(field, &cfg.p_grid, false)?;
    if let Some(i) = tables.iter().filter_map(|t| t.low_confidence_from).min() {
        notes.push(format!(
            "moments beyond p = {} rest on fewer than e^(p/4) replications",
            cfg.p_grid[i]
        ));
    }
    let (psi, psi_source) = match &cfg.psi_override {
        Some(p) => (p.clone(), "override".to_string()),
        None => (natural_psi_from_tables(&tables)?, "natural".to_string()),
    };
    let tau = psi.rosenthal_lift(cfg.degree);

    let space = natural_distance(field, &psi, &cfg.p_grid)?;
    let diam = space.diameter();
    let eps_grid = cfg.eps_grid.clone().unwrap_or_else(|| default_eps_grid(diam));
    let entropy = entropy_integral(&space, &tau, &eps_grid, cfg.estimator, &cfg.fenchel)?;
    let trend = if field.width() >= 4 {
        let nested: Vec<_> = [4usize, 2, 1]
            .iter()
            .map(|&step| {
                let idx: Vec<usize> = (0..field.width()).step_by(step).collect();
                space.subspace(&idx)
            })
            .collect::<Result<_>>()?;
        Some(refinement_trend(
            &nested,
            &tau,
            &eps_grid,
            cfg.estimator,
            &cfg.fenchel,
            cfg.divergence_factor,
        )?)
    } else {
        None
    };
    let certified = entropy.finite && !trend.as_ref().is_some_and(|t| t.diverging);
    if !certified {
        notes.push("entropy integral does not stabilize: bound NOT-CERTIFIED".into());
    }

    let sup = field.sup_abs();
    let sup_norm_gnorm = match cfg.calibration {
        Calibration::Empirical => gls_norm(&empirical_moments(&sup, &cfg.p_grid)?, &tau)?,
        Calibration::Fixed(k) if k > 0.0 && k.is_finite() => k,
        Calibration::Fixed(k) => return Err(Error::InvalidValue(format!("calibration norm must be positive, got {k}"))),
    };
    notes.push(match cfg.calibration {
        Calibration::Empirical => "K calibrated as the G-tau norm of the empirical sup-statistic".into(),
        Calibration::Fixed(_) => "K fixed by configuration".into(),
    });

    let upper_exponent: Vec<f64> = cfg
        .u_grid
        .iter()
        .map(|&u| upper_exponent(&tau, sup_norm_gnorm, u, &cfg.fenchel))
        .collect();
    let upper = TailCurve::new(
        cfg.u_grid.clone(),
        upper_exponent.iter().map(|e| (-e).exp()).collect(),
        CurveKind::UpperBound,
        format!("uniform bound, tau = {tau}"),
    )?;
    let empirical = empirical_tail(&sup, &cfg.u_grid)?;
    Ok(BoundReport {
        psi_used: psi,
        psi_source,
        tau,
        degree: cfg.degree,
        t_count: field.width(),
        replications: field.replications(),
        entropy,
        trend,
        certified,
        scalar_degenerate: field.width() == 1,
        diam,
        sup_norm_gnorm,
        upper,
        upper_exponent,
        empirical,
        lower: None,
        notes,
    })
}

/// `-ln` of [`crate::psi::tail_bound`]; 0 where the bound is void.
fn upper_exponent(tau: &PsiFunction, k: f64, u: f64, cfg: &GridConfig) -> f64 {
    if k <= 0.0 {
        return if u > 0.0 { f64::INFINITY } else { 0.0 };
    }
    if u <= std::f64::consts::E * k {
        return 0.0;
    }
    nu_star(tau, (u / k).ln(), cfg).value.max(0.0)
}

impl BoundReport {
    pub fn verdict(&self) -> &'static str {
        if self.certified {
            "CERTIFIED"
        } else {
            "NOT-CERTIFIED"
        }
    }

    /// `key = value` summary; numbers use shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("verdict", self.verdict().into());
        kv("scalar_degenerate", self.scalar_degenerate.to_string());
        kv("psi_source", self.psi_source.clone());
        kv("psi", self.psi_used.to_string());
        kv("tau", self.tau.to_string());
        kv("degree", self.degree.to_string());
        kv("t_count", self.t_count.to_string());
        kv("replications", self.replications.to_string());
        kv("diam", self.diam.to_string());
        kv("entropy_integral", self.entropy.value.to_string());
        kv("entropy_finite", self.entropy.finite.to_string());
        kv("entropy_saturated_fraction", self.entropy.saturated_fraction.to_string());
        if let Some(t) = &self.trend {
            kv("refinement_values", join(&t.values));
            kv("refinement_ratios", join(&t.ratios));
            kv("refinement_diverging", t.diverging.to_string());
        }
        kv("sup_norm_gnorm", self.sup_norm_gnorm.to_string());
        kv("upper_exponent", join(&self.upper_exponent));
        for (i, n) in self.notes.iter().enumerate() {
            kv(&format!("note.{i}"), n.clone());
        }
        s
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Exponent convention `E` in `(ln(1 + u))^E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExponentConvention {
    /// `E = 1 + β`.
    #[default]
    OnePlusBeta,
    /// `E = 1 + 1/β`, the growth produced by the Fenchel transform of
    /// `exp(C p^β)` envelopes.
    OnePlusInvBeta,
}

impl ExponentConvention {
    pub fn exponent(self, beta: f64) -> f64 {
        match self {
            ExponentConvention::OnePlusBeta => 1.0 + beta,
            ExponentConvention::OnePlusInvBeta => 1.0 + 1.0 / beta,
        }
    }
}

impl FromStr for ExponentConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1+beta" | "one_plus_beta" => Ok(Self::OnePlusBeta),
            "1+1/beta" | "one_plus_inv_beta" => Ok(Self::OnePlusInvBeta),
            other => Err(Error::Unknown {
                kind: "exponent convention",
                name: other.into(),
            }),
        }
    }
}

impl std::fmt::Display for ExponentConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::OnePlusBeta => "1+beta",
            Self::OnePlusInvBeta => "1+1/beta",
        })
    }
}

/// Closed-form bound families `exp(-C · shape(u))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    /// Envelope `p^{1/m} ln^r p` lifted by degree `d`:
    /// shape `u^l (ln u)^{-l g}` with `l = m / (1 + d m)`, `g = r - d`.
    PowerLog { m: f64, r: f64, d: u32 },
    /// shape `(ln(1 + u))^E`.
    ExpPower { beta: f64, convention: ExponentConvention },
}

impl ClosedForm {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ClosedForm::PowerLog { m, r, .. } if !(m > 0.0 && m.is_finite() && r.is_finite()) => {
                Err(Error::InvalidValue(format!("power-log bound needs m > 0, got m = {m}, r = {r}")))
            }
            ClosedForm::ExpPower { beta, .. } if !(beta > 0.0 && beta.is_finite()) => {
                Err(Error::InvalidValue(format!("beta must be positive, got {beta}")))
            }
            _ => Ok(()),
        }
    }

    /// `l(m, d)` for the power-log family.
    pub fn l(&self) -> Option<f64> {
        match *self {
            ClosedForm::PowerLog { m, d, .. } => Some(m / (1.0 + d as f64 * m)),
            ClosedForm::ExpPower { .. } => None,
        }
    }

    /// `shape(u)`, or `None` where the family gives only the void bound.
    pub fn shape(&self, u: f64) -> Option<f64> {
        match *self {
            ClosedForm::PowerLog { r, d, .. } => {
                if u <= std::f64::consts::E {
                    return None;
                }
                let l = self.l().unwrap();
                let g = r - d as f64;
                Some(u.powf(l) * u.ln().powf(-l * g))
            }
            ClosedForm::ExpPower { beta, convention } => {
                (u >= 0.0).then(|| u.ln_1p().powf(convention.exponent(beta)))
            }
        }
    }
}

pub fn closed_form_bound(family: &ClosedForm, c: f64, u: f64) -> f64 {
    match family.shape(u) {
        Some(s) => (-c * s).exp().min(1.0),
        None => 1.0,
    }
}

/// `exp(-C1 (ln(1 + u))^E)`.
pub fn lower_bound(beta: f64, c1: f64, u: f64, convention: ExponentConvention) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    (-c1 * u.ln_1p().powf(convention.exponent(beta))).exp()
}

/// Largest lower-bound curve of the given shape lying below `empirical`:
/// `C1 = max_u -ln T(u) / (ln(1 + u))^E` over the thresholds with `T(u) > 0`.
pub fn calibrate_lower(empirical: &TailCurve, beta: f64, convention: ExponentConvention) -> Result<f64> {
    let e = convention.exponent(beta);
    empirical
        .u_grid
        .iter()
        .zip(&empirical.probs)
        .filter(|(u, p)| **u > 0.0 && **p > 0.0)
        .map(|(u, p)| -p.ln() / u.ln_1p().powf(e))
        .reduce(f64::max)
        .map(|c| c.max(f64::MIN_POSITIVE))
        .ok_or_else(|| Error::InvalidValue("no threshold with positive empirical tail".into()))
}

pub fn lower_curve(u_grid: &[f64], beta: f64, c1: f64, convention: ExponentConvention) -> Result<TailCurve> {
    TailCurve::new(
        u_grid.to_vec(),
        u_grid.iter().map(|&u| lower_bound(beta, c1, u, convention)).collect(),
        CurveKind::LowerBound,
        format!("lower bound, beta = {beta}, C1 = {c1}, exponent {convention}"),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentGrowth {
    /// `max` over `(n, p, t)` of `|φ_n(t)|_p / τ(p)`.
    pub fitted_c: f64,
    /// `(n, C_n)` with `C_n` the maximum at sample size `n`.
    pub per_n: Vec<(usize, f64)>,
    /// `(n, p, t label, ratio)`.
    pub table: Vec<(usize, f64, String, f64)>,
    pub pass: bool,
}

/// Stability of `|φ_n(t)|_p / ((p / ln p)^d ψ(p))` across sample sizes.
pub fn moment_growth_check(
    panels: &[(usize, FieldSampleMatrix)],
    psi: &PsiFunction,
    degree: u32,
    p_grid: &[f64],
) -> Result<MomentGrowth> {
    if panels.len() < 3 {
        return Err(Error::InvalidValue("moment growth needs at least three sample sizes".into()));
    }
    let tau = psi.rosenthal_lift(degree);
    let mut table = Vec::new();
    let mut per_n = Vec::new();
    for (n, field) in panels {
        let tables = column_moments(field, p_grid, false)?;
        let mut c_n = 0.0f64;
        for t in &tables {
            for (&p, &v) in t.p_grid.iter().zip(&t.values) {
                let ratio = v / tau.eval(p)?;
                c_n = c_n.max(ratio);
                table.push((*n, p, t.label.clone(), ratio));
            }
        }
        per_n.push((*n, c_n));
    }
    let fitted_c = per_n.iter().map(|x| x.1).fold(0.0, f64::max);
    let min_c = per_n.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let pass = fitted_c == 0.0 || (min_c > 0.0 && fitted_c / min_c < 2.0);
    Ok(MomentGrowth {
        fitted_c,
        per_n,
        table,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub u: f64,
    pub kind: CurveKind,
    pub empirical: f64,
    pub bound: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub violations: Vec<Violation>,
    /// `(u, ln(empirical / upper))`; `-inf` where the empirical tail is 0.
    pub log_ratio: Vec<(f64, f64)>,
}

/// Checks `lower - 3σ <= empirical <= upper + 3σ` pointwise, with
/// `σ = sqrt(b (1 - b) / R)` at the bound value `b`.
pub fn verify_report(empirical: &TailCurve, bounds: &[TailCurve]) -> Result<ComparisonReport> {
    let reps = empirical.sample_count.map(|r| r as f64);
    let mut violations = Vec::new();
    let mut log_ratio = Vec::new();
    for b in bounds {
        if b.u_grid != empirical.u_grid {
            return Err(Error::DimensionMismatch(format!(
                "{} curve does not share the empirical threshold grid",
                b.kind
            )));
        }
        for ((&u, &e), &v) in b.u_grid.iter().zip(&empirical.probs).zip(&b.probs) {
            let sigma = reps.map_or(0.0, |r| (v * (1.0 - v) / r).sqrt());
            let bad = match b.kind {
                CurveKind::UpperBound => e > v + 3.0 * sigma,
                CurveKind::LowerBound => e < v - 3.0 * sigma,
                CurveKind::Empirical => false,
            };
            if bad {
                violations.push(Violation {
                    u,
                    kind: b.kind,
                    empirical: e,
                    bound: v,
                    sigma,
                });
            }
            if b.kind == CurveKind::UpperBound {
                log_ratio.push((u, (e / v).ln()));
            }
        }
    }
    Ok(ComparisonReport {
        violations,
        log_ratio,
    })
}

/// Moment table of the sup-statistic, as used for the calibration.
pub fn sup_moments(field: &FieldSampleMatrix, p_grid: &[f64]) -> Result<MomentTable> {
    empirical_moments(&field.sup_abs(), p_grid)
}
