//! Monte Carlo panels of a random field turned into moment tables, natural
//! envelopes, natural semi-distances and empirical tail curves.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::entropy::FiniteMetricSpace;
use crate::error::{Error, Result};
use crate::psi::{gls_norm, MomentTable, PsiFunction};

/// `R` independent replications of a field observed on `|T|` labels,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSampleMatrix {
    t_labels: Vec<String>,
    values: Vec<f64>,
}

impl FieldSampleMatrix {
    pub fn new(t_labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let width = t_labels.len();
        if width == 0 {
            return Err(Error::InvalidValue("field needs at least one column".into()));
        }
        if values.len() % width != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not fill rows of width {width}",
                values.len()
            )));
        }
        if values.len() / width < 2 {
            return Err(Error::InvalidValue("field needs at least two replications".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "missing or non-finite entry in row {}, column {}",
                i / width,
                i % width
            )));
        }
        if t_labels.iter().any(|l| l.is_empty()) {
            return Err(Error::InvalidValue("every column needs a label".into()));
        }
        Ok(Self { t_labels, values })
    }

    pub fn from_rows(t_labels: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != t_labels.len()) {
            return Err(Error::DimensionMismatch(format!(
                "row of length {} for {} labels",
                r.len(),
                t_labels.len()
            )));
        }
        Self::new(t_labels, rows.concat())
    }

    pub fn replications(&self) -> usize {
        self.values.len() / self.width()
    }

    pub fn width(&self) -> usize {
        self.t_labels.len()
    }

    pub fn t_labels(&self) -> &[String] {
        &self.t_labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width()..(i + 1) * self.width()]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().skip(j).step_by(self.width()).copied().collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            t_labels: self.t_labels.clone(),
            values: self.values.iter().map(|v| v * a).collect(),
        }
    }

    /// Keeps the given columns, in order.
    pub fn select_columns(&self, idx: &[usize]) -> Result<Self> {
        let labels = idx.iter().map(|&j| self.t_labels[j].clone()).collect();
        let values = (0..self.replications())
            .flat_map(|i| idx.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.values[i * self.width() + j])
            .collect();
        Self::new(labels, values)
    }

    /// `sup_t |Φ(t)|` per replication.
    pub fn sup_abs(&self) -> Vec<f64> {
        (0..self.replications())
            .map(|i| self.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect()
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_csv_reader(file)
    }

    /// Header row of t-labels, then one row per replication.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let labels: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::parse(1, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut values = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
            for field in rec.iter() {
                values.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::parse(line, format!("not a number: `{field}`")))?,
                );
            }
        }
        Self::new(labels, values)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path, |w| self.to_csv_writer(w))
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.t_labels).map_err(csv_err)?;
        for i in 0..self.replications() {
            wtr.write_record(self.row(i).iter().map(|v| v.to_string()))
                .map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::Io {
            path: "<csv>".into(),
            msg: e.to_string(),
        })
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io {
        path: "<csv>".into(),
        msg: e.to_string(),
    }
}

pub(crate) fn write_file<F>(path: impl AsRef<Path>, body: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>,
{
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    let mut w = std::io::BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|e| Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Empirical,
    UpperBound,
    LowerBound,
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveKind::Empirical => "EMPIRICAL",
            CurveKind::UpperBound => "UPPER_BOUND",
            CurveKind::LowerBound => "LOWER_BOUND",
        })
    }
}

impl FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "EMPIRICAL" => Ok(Self::Empirical),
            "UPPER_BOUND" => Ok(Self::UpperBound),
            "LOWER_BOUND" => Ok(Self::LowerBound),
            other => Err(Error::Unknown {
                kind: "curve kind",
                name: other.into(),
            }),
        }
    }
}

/// Tail probabilities over an increasing threshold grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCurve {
    pub u_grid: Vec<f64>,
    pub probs: Vec<f64>,
    pub kind: CurveKind,
    pub meta: String,
    /// Number of draws behind an empirical curve.
    pub sample_count: Option<usize>,
}

impl TailCurve {
    pub fn new(u_grid: Vec<f64>, probs: Vec<f64>, kind: CurveKind, meta: impl Into<String>) -> Result<Self> {
        if u_grid.len() != probs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} thresholds vs {} probabilities",
                u_grid.len(),
                probs.len()
            )));
        }
        check_u_grid(&u_grid)?;
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
            return Err(Error::InvalidValue(format!("probability out of [0,1]: {p}")));
        }
        Ok(Self {
            u_grid,
            probs,
            kind,
            meta: meta.into(),
            sample_count: None,
        })
    }

    pub fn with_sample_count(mut self, n: usize) -> Self {
        self.sample_count = Some(n);
        self
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_csv_reader(file)
    }

    /// Columns `u,prob,kind`; an optional fourth column `samples` carries the
    /// draw count of empirical curves.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut u_grid = Vec::new();
        let mut probs = Vec::new();
        let mut kind = None;
        let mut samples = None;
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
            if rec.len() < 3 {
                return Err(Error::parse(line, "expected columns u,prob,kind"));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("not a number: `{s}`")))
            };
            u_grid.push(num(&rec[0])?);
            probs.push(num(&rec[1])?);
            let k: CurveKind = rec[2].parse().map_err(|e: Error| Error::parse(line, e.to_string()))?;
            if kind.is_some_and(|prev| prev != k) {
                return Err(Error::parse(line, "mixed curve kinds in one file"));
            }
            kind = Some(k);
            if let Some(s) = rec.get(3).filter(|s| !s.is_empty()) {
                samples = Some(
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::parse(line, format!("bad sample count `{s}`")))?,
                );
            }
        }
        let kind = kind.ok_or_else(|| Error::parse(1, "empty curve file"))?;
        let mut curve = Self::new(u_grid, probs, kind, "")?;
        curve.sample_count = samples;
        Ok(curve)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path, |w| self.to_csv_writer(w))
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["u", "prob", "kind", "samples"]).map_err(csv_err)?;
        let samples = self.sample_count.map(|n| n.to_string()).unwrap_or_default();
        for (u, p) in self.u_grid.iter().zip(&self.probs) {
            wtr.write_record([u.to_string(), p.to_string(), self.kind.to_string(), samples.clone()])
                .map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::Io {
            path: "<csv>".into(),
            msg: e.to_string(),
        })
    }
}

fn check_u_grid(u_grid: &[f64]) -> Result<()> {
    if u_grid.iter().any(|u| !(u.is_finite() && *u >= 0.0)) {
        return Err(Error::InvalidDomain("thresholds must be finite and nonnegative".into()));
    }
    if u_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidDomain("thresholds must be increasing".into()));
    }
    Ok(())
}

/// Options for [`empirical_moments_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentOptions {
    /// Grid points with `p > kappa · ln R` are flagged low-confidence.
    pub kappa: f64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self { kappa: 4.0 }
    }
}

/// Pool-adjacent-violators fit of a nondecreasing sequence (equal weights).
/// Returns the fit and the largest drop found in the input.
pub fn isotonic_nondecreasing(values: &[f64]) -> (Vec<f64>, f64) {
    let mut max_violation = 0.0f64;
    let mut running_max = f64::NEG_INFINITY;
    for &v in values {
        max_violation = max_violation.max(running_max - v);
        running_max = running_max.max(v);
    }
    // blocks of (sum, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s0 / c0 as f64 <= s1 / c1 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s0 + s1, c0 + c1);
        }
    }
    let fit = blocks
        .iter()
        .flat_map(|&(s, c)| std::iter::repeat_n(s / c as f64, c))
        .collect();
    (fit, max_violation.max(0.0))
}

/// `(mean |x|^p)^{1/p}`, computed relative to `max |x|` to avoid overflow.
fn lp_norm(samples: &[f64], p: f64) -> f64 {
    let scale = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let mean = samples.iter().map(|v| (v.abs() / scale).powf(p)).sum::<f64>() / samples.len() as f64;
    scale * mean.powf(1.0 / p)
}

pub fn empirical_moments(samples: &[f64], p_grid: &[f64]) -> Result<MomentTable> {
    empirical_moments_with(samples, p_grid, "", &MomentOptions::default())
}

/// Empirical `L_p` norms with an isotonic correction and a confidence cap.
pub fn empirical_moments_with(
    samples: &[f64],
    p_grid: &[f64],
    label: &str,
    opts: &MomentOptions,
) -> Result<MomentTable> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if samples.len() < 2 {
        return Err(Error::InvalidValue("moment estimation needs at least two draws".into()));
    }
    if p_grid.is_empty() || p_grid.iter().any(|p| !(*p >= 2.0 && p.is_finite())) {
        return Err(Error::InvalidDomain("moment grid must be nonempty and >= 2".into()));
    }
    if p_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidDomain("moment grid must be increasing".into()));
    }
    let raw: Vec<f64> = p_grid.iter().map(|&p| lp_norm(samples, p)).collect();
    let (values, max_violation) = isotonic_nondecreasing(&raw);
    let cap = opts.kappa * (samples.len() as f64).ln();
    let low_confidence_from = p_grid.iter().position(|&p| p > cap);
    Ok(MomentTable {
        p_grid: p_grid.to_vec(),
        values,
        sample_count: samples.len(),
        label: label.to_string(),
        low_confidence_from,
        max_violation,
    })
}

fn centered(mut col: Vec<f64>) -> Vec<f64> {
    let mean = col.iter().sum::<f64>() / col.len() as f64;
    col.iter_mut().for_each(|v| *v -= mean);
    col
}

/// Moment table of every column, optionally centered by its empirical mean.
pub fn column_moments(
    field: &FieldSampleMatrix,
    p_grid: &[f64],
    center: bool,
) -> Result<Vec<MomentTable>> {
    (0..field.width())
        .into_par_iter()
        .map(|j| {
            let col = field.column(j);
            let col = if center { centered(col) } else { col };
            empirical_moments_with(&col, p_grid, &field.t_labels()[j], &MomentOptions::default())
        })
        .collect()
}

/// Natural envelope `ψ(p) = sup_t |Φ(t)|_p` as a tabulated function.
pub fn natural_psi(field: &FieldSampleMatrix, p_grid: &[f64], center: bool) -> Result<PsiFunction> {
    let tables = column_moments(field, p_grid, center)?;
    natural_psi_from_tables(&tables)
}

/// Pointwise supremum of moment tables sharing one grid.
pub fn natural_psi_from_tables(tables: &[MomentTable]) -> Result<PsiFunction> {
    let first = tables
        .first()
        .ok_or_else(|| Error::InvalidValue("no moment tables".into()))?;
    if tables.iter().any(|t| t.p_grid != first.p_grid) {
        return Err(Error::DimensionMismatch("moment tables use different grids".into()));
    }
    let values: Vec<f64> = (0..first.len())
        .map(|i| tables.iter().fold(0.0f64, |m, t| m.max(t.values[i])))
        .collect();
    if values.iter().any(|v| *v <= 0.0) {
        return Err(Error::InvalidValue(
            "field is identically zero; its natural envelope is not positive".into(),
        ));
    }
    PsiFunction::tabulated(first.p_grid.clone(), values)
}

/// Natural semi-distance `d(t, s) = ||Φ(t) - Φ(s)||_{Gψ}` from empirical
/// moments of the difference columns.
pub fn natural_distance(
    field: &FieldSampleMatrix,
    psi: &PsiFunction,
    p_grid: &[f64],
) -> Result<FiniteMetricSpace> {
    let n = field.width();
    let cols: Vec<Vec<f64>> = (0..n).map(|j| field.column(j)).collect();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let diff: Vec<f64> = cols[i].iter().zip(&cols[j]).map(|(a, b)| a - b).collect();
            let table = empirical_moments(&diff, p_grid)?;
            gls_norm(&table, psi)
        })
        .collect::<Result<_>>()?;
    let mut matrix = vec![0.0; n * n];
    for (&(i, j), &d) in pairs.iter().zip(&dists) {
        matrix[i * n + j] = d;
        matrix[j * n + i] = d;
    }
    FiniteMetricSpace::new(field.t_labels().to_vec(), matrix)
}

/// `T(u) = max(P(η > u), P(η < -u))` estimated by frequencies.
pub fn empirical_tail(samples: &[f64], u_grid: &[f64]) -> Result<TailCurve> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    check_u_grid(u_grid)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let probs = u_grid
        .iter()
        .map(|&u| {
            let above = n - sorted.partition_point(|&x| x <= u);
            let below = sorted.partition_point(|&x| x < -u);
            above.max(below) as f64 / n as f64
        })
        .collect();
    Ok(TailCurve::new(u_grid.to_vec(), probs, CurveKind::Empirical, "empirical frequencies")?
        .with_sample_count(n))
}
