//! Flat `section.key = value` experiment files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

use uclt_core::bounds::{Calibration, ExponentConvention};
use uclt_core::entropy::CoverEstimator;
use uclt_core::psi::{lin_space, log_space, PsiFunction};
use uclt_core::ustat::{Alphabet, KernelFamily, KernelSpec, KernelTable, Link, NormConvention, Sampler};

pub const OUTPUT_DIR_ENV: &str = "UCLT_OUTPUT_DIR";

const KEYS: &[&str] = &[
    "run.seed",
    "run.output_dir",
    "kernel.family",
    "kernel.degree",
    "kernel.center",
    "kernel.link",
    "kernel.t_grid",
    "kernel.value",
    "kernel.table",
    "kernel.rank",
    "kernel.alphabet",
    "sampler.dist",
    "sim.n_grid",
    "sim.reps",
    "sim.norm_convention",
    "sim.subsets",
    "sim.exact_budget",
    "grid.p",
    "grid.eps",
    "grid.u",
    "grid.p_max",
    "bounds.psi",
    "bounds.degree",
    "bounds.estimator",
    "bounds.calibration",
    "bounds.lower_beta",
    "bounds.lower_convention",
    "bounds.lower_c1",
    "bounds.plot",
];

/// Sections whose values decide the simulated panels.
const SIMULATION_SECTIONS: &[&str] = &["run.seed", "kernel.", "sampler.", "sim."];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: String,
}

#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
    base_dir: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str, source: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = RawConfig {
            base_dir: base_dir.to_path_buf(),
            ..Default::default()
        };
        for (i, raw) in text.lines().enumerate() {
            let origin = format!("{source}:{}", i + 1);
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}: expected `section.key = value`"))?;
            cfg.set(key.trim(), value.trim(), origin)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    pub fn set(&mut self, key: &str, value: &str, origin: String) -> Result<()> {
        if !KEYS.contains(&key) {
            bail!("{origin}: unknown key `{key}`");
        }
        if value.is_empty() {
            bail!("{origin}: `{key}` has an empty value");
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                origin,
            },
        );
        Ok(())
    }

    /// Applies `--section.key value` or `--section.key=value` pairs.
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<()> {
        let mut it = args.iter();
        while let Some(a) = it.next() {
            let flag = a
                .strip_prefix("--")
                .ok_or_else(|| anyhow!("unexpected argument `{a}`"))?;
            let (key, value) = match flag.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it.next().ok_or_else(|| anyhow!("override `{a}` needs a value"))?;
                    (flag.to_string(), v.clone())
                }
            };
            self.set(&key, &value, format!("override --{key}"))?;
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn parsed<T>(&self, key: &str, f: impl FnOnce(&str) -> Result<T>) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => f(&e.value)
                .map(Some)
                .with_context(|| format!("{}: invalid `{key}`", e.origin)),
        }
    }

    fn typed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(key, |s| s.parse::<T>().map_err(|e| anyhow!("{e}")))
    }

    fn required<T>(&self, key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| anyhow!("missing required key `{key}`"))
    }

    /// Canonical text of the keys that decide the simulated panels.
    pub fn simulation_fingerprint(&self) -> String {
        self.entries
            .iter()
            .filter(|(k, _)| SIMULATION_SECTIONS.iter().any(|s| k.starts_with(s)))
            .map(|(k, e)| format!("{k} = {}\n", e.value))
            .collect()
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let seed = self
            .typed::<u64>("run.seed")?
            .ok_or_else(|| anyhow!("missing required key `run.seed`: runs are never seeded from the clock"))?;
        let output_dir = match self.get("run.output_dir") {
            Some(e) => self.base_dir.join(&e.value),
            None => std::env::var_os(OUTPUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("uclt_out")),
        };
        let kernel = self.kernel()?;
        let sampler = self.required("sampler.dist", self.typed::<Sampler>("sampler.dist")?)?;
        let n_grid = self.required("sim.n_grid", self.parsed("sim.n_grid", parse_usize_list)?)?;
        let reps = self.required("sim.reps", self.typed::<usize>("sim.reps")?)?;
        let d = kernel.degree() as u32;
        let cfg = ExperimentConfig {
            seed,
            output_dir,
            sampler,
            n_grid,
            reps,
            rank: self.typed("kernel.rank")?,
            convention: self.typed("sim.norm_convention")?.unwrap_or_default(),
            subsets: self.typed("sim.subsets")?,
            exact_budget: self.typed("sim.exact_budget")?.unwrap_or(uclt_core::ustat::DEFAULT_EXACT_BUDGET),
            p_grid: self.required("grid.p", self.parsed("grid.p", parse_grid)?)?,
            eps_grid: self.parsed("grid.eps", parse_grid)?,
            u_grid: self.required("grid.u", self.parsed("grid.u", parse_grid)?)?,
            p_max: self.typed("grid.p_max")?.unwrap_or(64.0),
            psi: self.parsed("bounds.psi", |s| {
                if s.eq_ignore_ascii_case("natural") {
                    Ok(None)
                } else {
                    Ok(Some(s.parse::<PsiFunction>()?))
                }
            })?
            .flatten(),
            degree: self.typed("bounds.degree")?.unwrap_or(d),
            estimator: self.typed("bounds.estimator")?.unwrap_or_default(),
            calibration: self
                .parsed("bounds.calibration", |s| {
                    if s.eq_ignore_ascii_case("empirical") {
                        Ok(Calibration::Empirical)
                    } else {
                        Ok(Calibration::Fixed(s.parse()?))
                    }
                })?
                .unwrap_or_default(),
            lower_beta: self.typed("bounds.lower_beta")?,
            lower_convention: self.typed("bounds.lower_convention")?.unwrap_or_default(),
            lower_c1: self.typed("bounds.lower_c1")?,
            plot: self.typed("bounds.plot")?.unwrap_or(false),
            kernel,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        let family = self.required("kernel.family", self.get("kernel.family").map(|e| e.value.to_ascii_lowercase()))?;
        let degree = self.typed::<usize>("kernel.degree")?;
        let need_degree = || self.required("kernel.degree", degree);
        let link = || -> Result<Link> { Ok(self.typed("kernel.link")?.unwrap_or(Link::Identity)) };
        let t_grid = || self.required("kernel.t_grid", self.parsed("kernel.t_grid", parse_grid)?);
        let origin = &self.get("kernel.family").unwrap().origin;
        let spec = match family.as_str() {
            "product" => KernelSpec::new(KernelFamily::Product {
                degree: need_degree()?,
                center: self.typed("kernel.center")?.unwrap_or(0.0),
            })?,
            "sum" => KernelSpec::new(KernelFamily::Sum { degree: need_degree()? })?,
            "half_sq_diff" => KernelSpec::new(KernelFamily::HalfSquaredDifference)?,
            "constant" => KernelSpec::new(KernelFamily::Constant {
                degree: need_degree()?,
                value: self.required("kernel.value", self.typed("kernel.value")?)?,
            })?,
            "param_product" => KernelSpec::parametric(
                KernelFamily::ParametricProduct {
                    degree: need_degree()?,
                    link: link()?,
                },
                t_grid()?,
            )?,
            "param_sum" => KernelSpec::parametric(
                KernelFamily::ParametricSum {
                    degree: need_degree()?,
                    link: link()?,
                },
                t_grid()?,
            )?,
            "tabulated" => {
                let entry = self.required("kernel.table", self.get("kernel.table"))?;
                let path = self.base_dir.join(&entry.value);
                let table = KernelTable::read_csv(&path, need_degree()?)
                    .with_context(|| format!("{}: cannot load kernel table {}", entry.origin, path.display()))?;
                KernelSpec::new(KernelFamily::Tabulated(table))?
            }
            other => bail!("{origin}: unknown kernel family `{other}`"),
        };
        match self.parsed("kernel.alphabet", |s| {
            match s.parse::<Sampler>()? {
                Sampler::Alphabet(a) => Ok(a),
                _ => bail!("expected alphabet(value:weight, ...)"),
            }
        })? {
            Some(a) => Ok(spec.with_alphabet(a)?),
            None => Ok(spec),
        }
    }

    pub fn alphabet_for_decompose(&self) -> Result<Option<Alphabet>> {
        let kernel = self.kernel()?;
        if let Some(a) = kernel.alphabet() {
            return Ok(Some(a.clone()));
        }
        Ok(self.typed::<Sampler>("sampler.dist")?.and_then(|s| s.alphabet()))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub kernel: KernelSpec,
    pub sampler: Sampler,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub rank: Option<usize>,
    pub convention: NormConvention,
    pub subsets: Option<u64>,
    pub exact_budget: u64,
    pub p_grid: Vec<f64>,
    pub eps_grid: Option<Vec<f64>>,
    pub u_grid: Vec<f64>,
    pub p_max: f64,
    pub psi: Option<PsiFunction>,
    pub degree: u32,
    pub estimator: CoverEstimator,
    pub calibration: Calibration,
    pub lower_beta: Option<f64>,
    pub lower_convention: ExponentConvention,
    pub lower_c1: Option<f64>,
    pub plot: bool,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.p_grid.is_empty() || self.u_grid.is_empty() {
            bail!("grids must be nonempty");
        }
        if self.eps_grid.as_ref().is_some_and(|g| g.is_empty()) {
            bail!("grid.eps must be nonempty");
        }
        if self.reps < 2 {
            bail!("sim.reps must be at least 2");
        }
        if !(self.p_max >= 2.0) {
            bail!("grid.p_max must be at least 2");
        }
        Ok(())
    }
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|_| anyhow!("not an integer: `{}`", x.trim())))
        .collect()
}

/// `lin(a, b, n)`, `log(a, b, n)` or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    for (name, f) in [("lin(", lin_space as fn(f64, f64, usize) -> Vec<f64>), ("log(", log_space)] {
        if let Some(rest) = s.strip_prefix(name) {
            let inner = rest.strip_suffix(')').ok_or_else(|| anyhow!("unclosed `{name}`"))?;
            let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                bail!("`{name}a, b, n)` takes three arguments");
            }
            let a: f64 = parts[0].parse().map_err(|_| anyhow!("bad bound `{}`", parts[0]))?;
            let b: f64 = parts[1].parse().map_err(|_| anyhow!("bad bound `{}`", parts[1]))?;
            let n: usize = parts[2].parse().map_err(|_| anyhow!("bad count `{}`", parts[2]))?;
            if n < 2 || !(b > a) || (name == "log(" && !(a > 0.0)) {
                bail!("degenerate grid `{s}`");
            }
            return Ok(f(a, b, n));
        }
    }
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| anyhow!("not a number: `{}`", x.trim())))
        .collect::<Result<Vec<_>>>()?;
    if v.windows(2).any(|w| w[1] <= w[0]) {
        bail!("grid must be increasing");
    }
    Ok(v)
}
