//! Pipeline stages. Each reads the artifacts of the previous one, so a staged
//! run reproduces the monolithic one byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use uclt_core::bounds::{
    calibrate_lower, lower_curve, moment_growth_check, uniform_tail_bound, verify_report, BoundConfig, ComparisonReport,
};
use uclt_core::empirics::{column_moments, empirical_tail, natural_distance, natural_psi, FieldSampleMatrix, TailCurve};
use uclt_core::entropy::{default_eps_grid, entropy_integral};
use uclt_core::psi::{GridConfig, MomentTable, PsiFunction};
use uclt_core::ustat::{simulate_panel, PanelOptions};

use crate::config::ExperimentConfig;
use crate::svg;

pub const STAMP: &str = "simulate.stamp";

pub fn panel_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("panel_n{n}.csv"))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

pub fn simulate(cfg: &ExperimentConfig, fingerprint: &str) -> Result<Vec<(usize, FieldSampleMatrix)>> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let opts = PanelOptions {
        rank: cfg.rank,
        convention: cfg.convention,
        exact_budget: cfg.exact_budget,
        incomplete_subsets: cfg.subsets,
    };
    let mut panels = Vec::new();
    for &n in &cfg.n_grid {
        let panel = simulate_panel(&cfg.kernel, &cfg.sampler, n, cfg.reps, cfg.seed, &opts)
            .with_context(|| format!("simulation at n = {n}"))?;
        for w in &panel.warnings {
            eprintln!("warning (n = {n}): {w}");
        }
        panel.field.write_csv(panel_path(dir, n))?;
        let tables = column_moments(&panel.field, &cfg.p_grid, false)?;
        write(&dir.join(format!("moments_n{n}.csv")), &moments_csv(&tables))?;
        panels.push((n, panel.field));
    }
    write(&dir.join(STAMP), fingerprint)?;
    Ok(panels)
}

/// Reads the panels written by [`simulate`], refusing stale ones.
pub fn load_panels(cfg: &ExperimentConfig, fingerprint: &str) -> Result<Vec<(usize, FieldSampleMatrix)>> {
    let dir = &cfg.output_dir;
    let stamp = dir.join(STAMP);
    let found = fs::read_to_string(&stamp)
        .with_context(|| format!("missing upstream artifact {} (run `simulate` first)", stamp.display()))?;
    if found != fingerprint {
        bail!(
            "stale upstream artifact {}: panels were simulated with a different configuration",
            stamp.display()
        );
    }
    cfg.n_grid
        .iter()
        .map(|&n| {
            let path = panel_path(dir, n);
            if !path.exists() {
                bail!("missing upstream artifact {}", path.display());
            }
            let field = FieldSampleMatrix::read_csv(&path).with_context(|| format!("reading {}", path.display()))?;
            Ok((n, field))
        })
        .collect()
}

fn fenchel_grid(cfg: &ExperimentConfig) -> GridConfig {
    GridConfig::with_p_max(cfg.p_max)
}

fn psi_for(cfg: &ExperimentConfig, field: &FieldSampleMatrix) -> Result<PsiFunction> {
    match &cfg.psi {
        Some(p) => Ok(p.clone()),
        None => Ok(natural_psi(field, &cfg.p_grid, false)?),
    }
}

pub struct EntropySummary {
    pub value: f64,
    pub finite: bool,
    pub diam: f64,
}

/// Natural distance and entropy-integral profile of the largest panel.
pub fn entropy(cfg: &ExperimentConfig, panels: &[(usize, FieldSampleMatrix)]) -> Result<EntropySummary> {
    let (_, field) = largest(panels);
    let psi = psi_for(cfg, field)?;
    let tau = psi.rosenthal_lift(cfg.degree);
    let space = natural_distance(field, &psi, &cfg.p_grid)?;
    space.write_csv(cfg.output_dir.join("distance.csv"))?;
    let eps = cfg.eps_grid.clone().unwrap_or_else(|| default_eps_grid(space.diameter()));
    let integral = entropy_integral(&space, &tau, &eps, cfg.estimator, &fenchel_grid(cfg))?;
    let mut csv = String::from("eps,covering,entropy,integrand\n");
    for s in &integral.profile {
        csv.push_str(&format!("{},{},{},{}\n", s.eps, s.covering, s.entropy, s.integrand));
    }
    write(&cfg.output_dir.join("entropy_profile.csv"), &csv)?;
    Ok(EntropySummary {
        value: integral.value,
        finite: integral.finite,
        diam: space.diameter(),
    })
}

fn largest(panels: &[(usize, FieldSampleMatrix)]) -> &(usize, FieldSampleMatrix) {
    panels.iter().max_by_key(|p| p.0).expect("nonempty n grid")
}

pub struct BoundsOutcome {
    pub certified: bool,
    pub scalar_degenerate: bool,
    pub violations: usize,
}

pub fn bounds(cfg: &ExperimentConfig, panels: &[(usize, FieldSampleMatrix)]) -> Result<BoundsOutcome> {
    let dir = &cfg.output_dir;
    let (n, field) = largest(panels);
    let mut bc = BoundConfig::new(cfg.degree, cfg.p_grid.clone(), cfg.u_grid.clone());
    bc.eps_grid = cfg.eps_grid.clone();
    bc.psi_override = cfg.psi.clone();
    bc.estimator = cfg.estimator;
    bc.fenchel = fenchel_grid(cfg);
    bc.calibration = cfg.calibration;
    let mut report = uniform_tail_bound(field, &bc)?;

    let mut text = format!("n = {n}\n");
    if let Some(beta) = cfg.lower_beta {
        let c1 = match cfg.lower_c1 {
            Some(c) => {
                report.notes.push("lower-bound constant fixed by configuration".into());
                c
            }
            None => {
                // calibrate on the even replications, keep the odd ones honest
                let sup = field.sup_abs();
                let half: Vec<f64> = sup.iter().step_by(2).copied().collect();
                let c = calibrate_lower(&empirical_tail(&half, &cfg.u_grid)?, beta, cfg.lower_convention)?;
                report
                    .notes
                    .push("lower-bound constant calibrated on the even-indexed replications".into());
                c
            }
        };
        text.push_str(&format!(
            "lower_beta = {beta}\nlower_c1 = {c1}\nlower_convention = {}\n",
            cfg.lower_convention
        ));
        report.lower = Some(lower_curve(&cfg.u_grid, beta, c1, cfg.lower_convention)?);
    }

    let mut curves = vec![report.upper.clone()];
    curves.extend(report.lower.clone());
    let cmp = verify_report(&report.empirical, &curves)?;
    text.push_str(&format!("violations = {}\n", cmp.violations.len()));

    if panels.len() >= 3 {
        let psi = psi_for(cfg, field)?;
        let growth = moment_growth_check(panels, &psi, cfg.degree, &cfg.p_grid)?;
        text.push_str(&format!(
            "moment_growth_fitted_c = {}\nmoment_growth_verdict = {}\n",
            growth.fitted_c,
            if growth.pass { "PASS" } else { "FAIL" }
        ));
        let mut csv = String::from("n,p,t,ratio\n");
        for (n, p, t, r) in &growth.table {
            csv.push_str(&format!("{n},{p},{t},{r}\n"));
        }
        write(&dir.join("moment_growth.csv"), &csv)?;
    }

    report.empirical.write_csv(dir.join("empirical_tail.csv"))?;
    report.upper.write_csv(dir.join("upper_bound.csv"))?;
    let lower_path = dir.join("lower_bound.csv");
    match &report.lower {
        Some(l) => l.write_csv(&lower_path)?,
        None if lower_path.exists() => fs::remove_file(&lower_path)?,
        None => {}
    }
    write(&dir.join("report.txt"), &(report.to_text() + &text))?;
    if cfg.plot {
        let mut refs = vec![&report.empirical, &report.upper];
        refs.extend(report.lower.as_ref());
        write(&dir.join("tails.svg"), &svg::tail_plot(&refs, &format!("sup-tail at n = {n}")))?;
    }
    Ok(BoundsOutcome {
        certified: report.certified,
        scalar_degenerate: report.scalar_degenerate,
        violations: cmp.violations.len(),
    })
}

pub fn verify(empirical: &Path, bound_files: &[PathBuf]) -> Result<ComparisonReport> {
    let emp = TailCurve::read_csv(empirical).with_context(|| format!("reading {}", empirical.display()))?;
    let curves = bound_files
        .iter()
        .map(|p| TailCurve::read_csv(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    Ok(verify_report(&emp, &curves)?)
}

fn moments_csv(tables: &[MomentTable]) -> String {
    let mut s = String::from("t,p,norm,samples,low_confidence\n");
    for t in tables {
        for (i, (p, v)) in t.p_grid.iter().zip(&t.values).enumerate() {
            let low = t.low_confidence_from.is_some_and(|k| i >= k);
            s.push_str(&format!("{},{p},{v},{},{low}\n", t.label, t.sample_count));
        }
    }
    s
}
