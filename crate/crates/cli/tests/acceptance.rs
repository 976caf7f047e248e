//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use uclt_core::bounds::{
    calibrate_lower, closed_form_bound, lower_curve, moment_growth_check, uniform_tail_bound, verify_report,
    BoundConfig, ClosedForm, ExponentConvention,
};
use uclt_core::empirics::{empirical_moments, empirical_tail, natural_psi, FieldSampleMatrix};
use uclt_core::entropy::{
    covering_profile, entropy_integral, exact_cover, greedy_upper, packing_lower, CoverEstimator,
    FiniteMetricSpace,
};
use uclt_core::psi::{gls_norm, lin_space, log_space, nu_star, tail_bound, GridConfig, PsiFunction};
use uclt_core::ustat::rng::stream;
use uclt_core::ustat::{
    hoeffding_decompose, simulate_panel, simulate_u_matrix, u_stat, variance_slope, variance_u, Alphabet,
    KernelFamily, KernelSpec, KernelTable, Link, PanelOptions, Sampler, UStatMode,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

fn fenchel_oracle() -> Outcome {
    let cfg = GridConfig::with_p_max(1e9);
    let mut worst = 0.0f64;
    for m in [1.0f64, 2.0, 4.0] {
        let psi = PsiFunction::power_log(m, 0.0).unwrap();
        for u in lin_space(0.2, 5.0, 49) {
            let p_star = (m * u - 1.0).exp();
            let want = if p_star >= 2.0 {
                p_star / m
            } else {
                2.0 * u - 2.0 / m * 2f64.ln()
            };
            let got = nu_star(&psi, u, &cfg).value;
            worst = worst.max((got - want).abs() / want.abs().max(1.0));
        }
    }
    check(worst < 1e-6, format!("max relative error {worst:.2e}"))
}

fn variance_scaling() -> Outcome {
    let n_grid: Vec<usize> = (3..=8).map(|k| 1 << k).collect();
    let ln_n: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let reps = 20_000;
    let opts = PanelOptions::default();
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, kernel, sampler, rank) in [
        ("sum", KernelSpec::sum(2), Sampler::StandardNormal, 1.0),
        ("product", KernelSpec::product(2), Sampler::StandardNormal, 2.0),
    ] {
        let ln_var: Vec<f64> = n_grid
            .iter()
            .map(|&n| {
                let paths = simulate_u_matrix(&kernel, &sampler, n, reps, 1000 + n as u64, &opts).unwrap();
                let u: Vec<f64> = paths.iter().map(|p| p.values[0]).collect();
                sample_variance(&u).ln()
            })
            .collect();
        let s = slope(&ln_n, &ln_var);
        ok &= (s + rank).abs() <= 0.15;
        detail.push(format!("{name} MC slope {s:.3}"));
    }
    let rademacher = Alphabet::uniform(vec![-1.0, 1.0]).unwrap();
    let grid: Vec<usize> = (4..=8).map(|k| 1 << k).collect();
    for (name, kernel, rank) in [("sum", KernelSpec::sum(2), 1.0), ("product", KernelSpec::product(2), 2.0)] {
        let h = hoeffding_decompose(&kernel.with_alphabet(rademacher.clone()).unwrap(), "t0").unwrap();
        let s = variance_slope(&h, &grid).unwrap();
        ok &= (s + rank).abs() <= 0.05;
        detail.push(format!("{name} analytic slope {s:.4}"));
    }
    check(ok, detail.join(", "))
}

fn brute_variance(kernel: &KernelSpec, alphabet: &Alphabet, n: usize) -> f64 {
    let k = alphabet.len();
    let (mut m1, mut m2) = (0.0, 0.0);
    let mut data = vec![0.0; n];
    for mut idx in 0..k.pow(n as u32) {
        let mut w = 1.0;
        for x in data.iter_mut() {
            *x = alphabet.values()[idx % k];
            w *= alphabet.weights()[idx % k];
            idx /= k;
        }
        let u = u_stat(kernel, &data, UStatMode::Exact).unwrap().values[0];
        m1 += w * u;
        m2 += w * u * u;
    }
    m2 - m1 * m1
}

fn hoeffding_equivalence() -> Outcome {
    use rand::Rng;
    let mut worst_var = 0.0f64;
    let mut worst_orth = 0.0f64;
    for case in 0..4u64 {
        let mut rng = stream(77, case);
        let letters = vec![-1.3, 0.4, 2.0];
        let mut w: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let alphabet = Alphabet::new(letters.clone(), w).unwrap();
        let kernel = if case == 0 {
            KernelSpec::product(2)
        } else {
            let table = KernelTable::from_fn(letters, 2, vec!["a".into()], |_, _| rng.random_range(-1.0..1.0)).unwrap();
            KernelSpec::new(KernelFamily::Tabulated(table)).unwrap()
        }
        .with_alphabet(alphabet.clone())
        .unwrap();
        let label = kernel.t_labels()[0].clone();
        let h = hoeffding_decompose(&kernel, &label).unwrap();
        for n in 3..=6 {
            let diff = (variance_u(&h, n).unwrap() - brute_variance(&kernel, &alphabet, n)).abs();
            worst_var = worst_var.max(diff);
        }
        // E h_1(X1) h_1(X2), E h_1(X1) h_2(X1, X2), E h_2(X1, X2) h_2(X1, X3)
        let wts = alphabet.weights();
        let (mut c12, mut c11, mut c22) = (0.0, 0.0, 0.0);
        for a in 0..3 {
            for b in 0..3 {
                c11 += wts[a] * wts[b] * h.projection(&[a]) * h.projection(&[b]);
                c12 += wts[a] * wts[b] * h.projection(&[a]) * h.projection(&[a, b]);
                for c in 0..3 {
                    c22 += wts[a] * wts[b] * wts[c] * h.projection(&[a, b]) * h.projection(&[a, c]);
                }
            }
        }
        worst_orth = worst_orth.max(c11.abs()).max(c12.abs()).max(c22.abs());
    }
    check(
        worst_var < 1e-12 && worst_orth < 1e-12,
        format!("max |variance_u - brute force| {worst_var:.1e}, max projection covariance {worst_orth:.1e}"),
    )
}

fn tail_dominance() -> Outcome {
    let draws = 100_000;
    let cap = 4.0 * (draws as f64).ln();
    let p_grid = lin_space(2.0, cap, 40);
    let cfg = GridConfig::default();
    let mut detail = Vec::new();
    let mut violations = 0;
    for (name, sampler) in [("normal", Sampler::StandardNormal), ("rademacher", Sampler::Rademacher)] {
        let mut rng = stream(4, 0);
        let mut xs = vec![0.0; draws];
        sampler.fill(&mut rng, &mut xs);
        let field = FieldSampleMatrix::new(vec!["x".into()], xs.clone()).unwrap();
        let psi = natural_psi(&field, &p_grid, false).unwrap();
        let gnorm = gls_norm(&empirical_moments(&xs, &p_grid).unwrap(), &psi).unwrap();
        let lo = std::f64::consts::E * gnorm * (1.0 + 1e-9);
        let u_grid = log_space(lo, 30.0 * lo, 60);
        let emp = empirical_tail(&xs, &u_grid).unwrap();
        for (u, e) in u_grid.iter().zip(&emp.probs) {
            let b = tail_bound(&psi, gnorm, *u, &cfg);
            if *e > b + 3.0 * (b * (1.0 - b) / draws as f64).sqrt() {
                violations += 1;
            }
        }
        detail.push(format!("{name} gnorm {gnorm:.4}"));
    }
    check(violations == 0, format!("{violations} violations; {}", detail.join(", ")))
}

fn covering_sandwich() -> Outcome {
    use rand::Rng;
    let mut violations = 0;
    for case in 0..200u64 {
        let mut rng = stream(5, case);
        let size = rng.random_range(2..=12);
        let pts: Vec<(f64, f64)> = (0..size).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
        let labels = (0..size).map(|i| format!("x{i}")).collect();
        let space = FiniteMetricSpace::from_fn(labels, |i, j| {
            ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt()
        })
        .unwrap();
        let eps = rng.random_range(0.02..0.6);
        let exact = exact_cover(&space, eps, 10_000_000).expect("small spaces fit the budget");
        if !(packing_lower(&space, eps) <= exact && exact <= greedy_upper(&space, eps)) {
            violations += 1;
        }
    }
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let line = FiniteMetricSpace::from_line(&grid, 1.0).unwrap();
    let n = exact_cover(&line, 0.25, 10_000_000);
    check(
        violations == 0 && n == Some(2),
        format!("{violations} sandwich violations in 200 spaces; exact N on the [0,1] grid at 0.25 = {n:?}"),
    )
}

fn pisier_reduction() -> Outcome {
    let (c, b) = (1.7, 6.0);
    let psi = PsiFunction::constant(c, b).unwrap();
    let eps = log_space(1e-3, 1.0, 80);
    let spaces = [
        FiniteMetricSpace::from_line(&lin_space(0.0, 1.0, 60), 1.0).unwrap(),
        FiniteMetricSpace::from_line(&lin_space(0.0, 1.0, 40), 0.5).unwrap(),
        {
            let mut rng = stream(6, 0);
            let pts: Vec<f64> = (0..30).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            FiniteMetricSpace::from_fn((0..30).map(|i| format!("s{i}")).collect(), |i, j| {
                (pts[i] - pts[j]).abs().sqrt()
            })
            .unwrap()
        },
    ];
    let mut worst = 0.0f64;
    for s in &spaces {
        let generic = entropy_integral(s, &psi, &eps, CoverEstimator::Greedy, &GridConfig::default())
            .unwrap()
            .value;
        let f: Vec<f64> = covering_profile(s, &eps, CoverEstimator::Greedy)
            .iter()
            .map(|&n| c * (n as f64).powf(1.0 / b))
            .collect();
        let direct: f64 = eps
            .windows(2)
            .zip(f.windows(2))
            .map(|(e, v)| 0.5 * (v[0] + v[1]) * (e[1] - e[0]))
            .sum();
        worst = worst.max((generic - direct).abs() / direct);
    }
    check(worst < 1e-3, format!("max relative gap {worst:.2e} over 3 spaces"))
}

fn moment_growth() -> Outcome {
    let kernel = KernelSpec::product(2);
    let opts = PanelOptions::default();
    let panels: Vec<(usize, FieldSampleMatrix)> = [16usize, 64, 256]
        .iter()
        .map(|&n| {
            let p = simulate_panel(&kernel, &Sampler::Rademacher, n, 20_000, 9, &opts).unwrap();
            (n, p.field)
        })
        .collect();
    let psi = PsiFunction::constant(1.0, 10.0).unwrap();
    let g = moment_growth_check(&panels, &psi, 2, &lin_space(2.0, 10.0, 9)).unwrap();
    let c: Vec<String> = g.per_n.iter().map(|(n, c)| format!("C_{n}={c:.4}")).collect();
    check(g.pass, format!("fitted C {:.4}; {}", g.fitted_c, c.join(" ")))
}

/// Field of a degree-`d` parametric product kernel on normal data.
fn product_field(d: usize, reps: usize, seed: u64) -> FieldSampleMatrix {
    let kernel = KernelSpec::parametric(
        KernelFamily::ParametricProduct {
            degree: d,
            link: Link::Identity,
        },
        vec![0.5, 1.0, 1.5, 2.0],
    )
    .unwrap();
    let opts = PanelOptions {
        rank: Some(d),
        ..Default::default()
    };
    simulate_panel(&kernel, &Sampler::StandardNormal, 32, reps, seed, &opts)
        .unwrap()
        .field
}

/// Rescales the field so that the calibrated norm equals `target`.
fn calibrated(field: &FieldSampleMatrix, cfg: &BoundConfig, target: f64) -> uclt_core::bounds::BoundReport {
    let k = uniform_tail_bound(field, cfg).unwrap().sup_norm_gnorm;
    uniform_tail_bound(&field.scaled(target / k), cfg).unwrap()
}

fn bound_shapes() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    let p_grid = lin_space(2.0, 20.0, 10);
    // power-log envelopes with r = d, so that g = r - d = 0
    for (m, d) in [(2.0, 1u32), (1.0, 1), (4.0, 2)] {
        let field = product_field(d as usize, 2000, 30 + d as u64);
        let u = log_space(10.0, 1e4, 30);
        let mut cfg = BoundConfig::new(d, p_grid.clone(), u.clone());
        cfg.psi_override = Some(PsiFunction::power_log(m, d as f64).unwrap());
        cfg.fenchel = GridConfig::with_p_max(1e4);
        let r = calibrated(&field, &cfg, 0.1);
        let ln_u: Vec<f64> = u.iter().map(|x| x.ln()).collect();
        let ln_e: Vec<f64> = r.upper_exponent.iter().map(|x| x.ln()).collect();
        let s = slope(&ln_u, &ln_e);
        let l = ClosedForm::PowerLog { m, r: d as f64, d }.l().unwrap();
        ok &= (s - l).abs() <= 0.02;
        detail.push(format!("MR(m={m},d={d}) slope {s:.4} vs l {l:.4}"));
    }
    // exponential-power envelope, beta = 1: both exponent conventions give 2.
    // The lift adds an O(ln v / v) term to the exponent, so the asymptotic
    // slope is read off the far tail, ln u in [200, 700].
    let field = product_field(1, 2000, 40);
    let u = log_space(200f64.exp(), 700f64.exp(), 30);
    let mut cfg = BoundConfig::new(1, p_grid.clone(), u.clone());
    cfg.psi_override = Some(PsiFunction::exp_power(1.0, 1.0).unwrap());
    cfg.fenchel = GridConfig::with_p_max(1e4);
    let r = calibrated(&field, &cfg, 1.0);
    let lll: Vec<f64> = u.iter().map(|x| x.ln_1p().ln()).collect();
    let ln_e: Vec<f64> = r.upper_exponent.iter().map(|x| x.ln()).collect();
    let s = slope(&lll, &ln_e);
    ok &= (s - 2.0).abs() <= 0.02;
    detail.push(format!("BETA(1) slope {s:.4} vs 2"));
    // closed forms reproduce their configured exponent
    for conv in [ExponentConvention::OnePlusBeta, ExponentConvention::OnePlusInvBeta] {
        let fam = ClosedForm::ExpPower { beta: 0.5, convention: conv };
        let u = log_space(10.0, 1e6, 20);
        let x: Vec<f64> = u.iter().map(|v| v.ln_1p().ln()).collect();
        let y: Vec<f64> = u.iter().map(|&v| (-closed_form_bound(&fam, 1e-3, v).ln()).ln()).collect();
        let s = slope(&x, &y);
        ok &= (s - conv.exponent(0.5)).abs() <= 0.02;
        detail.push(format!("closed form {conv} slope {s:.3}"));
    }
    check(ok, detail.join(", "))
}

fn ordering() -> Outcome {
    let kernel = KernelSpec::parametric(
        KernelFamily::ParametricSum {
            degree: 1,
            link: Link::Identity,
        },
        vec![0.5, 1.0, 1.5, 2.0],
    )
    .unwrap();
    let opts = PanelOptions {
        rank: Some(1),
        ..Default::default()
    };
    let reps = 100_000;
    let panel = simulate_panel(&kernel, &Sampler::LogNormalSym { sigma: 1.0 }, 2, reps, 11, &opts).unwrap();
    let field = panel.field;
    let labels = field.t_labels().to_vec();
    let split = |parity: usize| -> FieldSampleMatrix {
        let rows: Vec<Vec<f64>> = (parity..reps).step_by(2).map(|i| field.row(i).to_vec()).collect();
        FieldSampleMatrix::from_rows(labels.clone(), &rows).unwrap()
    };
    let (calib, eval) = (split(0), split(1));
    // thresholds where the calibration half still has 100 exceedances
    let mut sup = calib.sup_abs();
    sup.sort_by(f64::total_cmp);
    let top = sup[sup.len() - 100];
    let u_grid = log_space(0.5, top, 30);

    let conv = ExponentConvention::OnePlusBeta;
    let c1 = calibrate_lower(&empirical_tail(&calib.sup_abs(), &u_grid).unwrap(), 1.0, conv).unwrap();
    let lower = lower_curve(&u_grid, 1.0, c1, conv).unwrap();
    let cap = 4.0 * ((reps / 2) as f64).ln();
    let cfg = BoundConfig::new(1, lin_space(2.0, cap, 30), u_grid);
    let report = uniform_tail_bound(&eval, &cfg).unwrap();
    let cmp = verify_report(&report.empirical, &[report.upper.clone(), lower]).unwrap();
    check(
        cmp.violations.is_empty(),
        format!(
            "{} violations; C1 {c1:.4}, K {:.4}, u up to {top:.1}",
            cmp.violations.len(),
            report.sup_norm_gnorm
        ),
    )
}

const DETERMINISM_CONFIG: &str = "\
run.seed = 99
kernel.family = param_product
kernel.degree = 2
kernel.link = cos
kernel.t_grid = lin(0.5, 2, 6)
kernel.rank = 1
sampler.dist = normal
sim.n_grid = 8, 16, 32
sim.reps = 800
grid.p = lin(2, 10, 9)
grid.u = log(0.1, 20, 25)
bounds.lower_beta = 1
bounds.plot = true
";

fn run_pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let cfg = dir.join("exp.cfg");
    std::fs::write(&cfg, DETERMINISM_CONFIG).map_err(|e| e.to_string())?;
    let status = Command::new(env!("CARGO_BIN_EXE_uclt"))
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--run.output_dir")
        .arg(dir.join("out"))
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.code() == Some(1) {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.join("out"))
        .map_err(|e| e.to_string())?
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = run_pipeline(a.path())?;
    let fb = run_pipeline(b.path())?;
    let csvs = fa.iter().filter(|f| f.0.ends_with(".csv")).count();
    let same = fa == fb;
    check(same && csvs >= 8, format!("{csvs} CSV files compared, identical = {same}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 10] = [
        ("Fenchel oracle", fenchel_oracle, Some(Duration::from_secs(1))),
        ("variance-scaling law", variance_scaling, Some(Duration::from_secs(60))),
        ("Hoeffding oracle equivalence", hoeffding_equivalence, None),
        ("tail-bound dominance", tail_dominance, None),
        ("covering sandwich", covering_sandwich, None),
        ("Pisier reduction", pisier_reduction, None),
        ("moment growth", moment_growth, Some(Duration::from_secs(120))),
        ("bound shapes", bound_shapes, None),
        ("lower/empirical/upper ordering", ordering, None),
        ("end-to-end determinism", determinism, None),
    ];
    let mut failed = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = f();
        let took = start.elapsed();
        if let (Ok(d), Some(l)) = (&outcome, limit) {
            if took > *l {
                outcome = Err(format!("{d}; took {took:.2?}, limit {l:?}"));
            }
        }
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} [{tag}] {name}: {detail} ({took:.2?})", i + 1);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
