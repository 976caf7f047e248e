use std::collections::HashMap;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Finite sample space with probability weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    values: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Alphabet {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "alphabet of {} values with {} weights",
                values.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidValue("alphabet weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidValue(format!("alphabet weights sum to {total}, not 1")));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidValue("alphabet values must be distinct".into()));
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc / total
            })
            .collect();
        Ok(Self {
            values,
            weights,
            cumulative,
        })
    }

    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let w = 1.0 / values.len() as f64;
        let weights = vec![w; values.len()];
        Self::new(values, weights)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, x: f64) -> Option<usize> {
        self.values.iter().position(|v| *v == x)
    }

    /// Maps a uniform draw on `[0, 1)` to a letter.
    pub(crate) fn quantile(&self, u: f64) -> f64 {
        let i = self.cumulative.partition_point(|c| *c <= u);
        self.values[i.min(self.values.len() - 1)]
    }
}

/// Scalar link `g` of the parametric families `Φ(x; t) = g(t x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Identity,
    Sin,
    Cos,
    Tanh,
}

impl Link {
    pub fn apply(self, s: f64) -> f64 {
        match self {
            Link::Identity => s,
            Link::Sin => s.sin(),
            Link::Cos => s.cos(),
            Link::Tanh => s.tanh(),
        }
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "linear" => Ok(Link::Identity),
            "sin" => Ok(Link::Sin),
            "cos" => Ok(Link::Cos),
            "tanh" => Ok(Link::Tanh),
            other => Err(Error::Unknown {
                kind: "link",
                name: other.into(),
            }),
        }
    }
}

/// Kernel values over every multiset of alphabet letters, one column per t.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    degree: usize,
    letters: Vec<f64>,
    t_labels: Vec<String>,
    entries: HashMap<Vec<usize>, Vec<f64>>,
}

impl KernelTable {
    pub fn read_csv(path: impl AsRef<Path>, degree: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_csv_reader(file, degree)
    }

    /// Header `x1,...,xd,<t labels>`; one row per tuple of letters. Rows for
    /// permutations of a tuple must agree.
    pub fn from_csv_reader<R: Read>(reader: R, degree: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
        if header.len() <= degree {
            return Err(Error::parse(1, format!("need {degree} argument columns and at least one t column")));
        }
        let t_labels: Vec<String> = header.iter().skip(degree).map(str::to_string).collect();
        let mut rows: Vec<(usize, Vec<f64>, Vec<f64>)> = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
            let nums = rec
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::parse(line, format!("not a number: `{f}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push((line, nums[..degree].to_vec(), nums[degree..].to_vec()));
        }
        let mut letters: Vec<f64> = rows.iter().flat_map(|r| r.1.iter().copied()).collect();
        letters.sort_by(f64::total_cmp);
        letters.dedup();
        let mut entries: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
        for (line, args, vals) in rows {
            let mut key: Vec<usize> = args
                .iter()
                .map(|x| letters.iter().position(|l| l == x).unwrap())
                .collect();
            key.sort_unstable();
            if let Some(prev) = entries.get(&key) {
                if *prev != vals {
                    return Err(Error::parse(line, "kernel table is not symmetric"));
                }
            }
            entries.insert(key, vals);
        }
        let table = Self {
            degree,
            letters,
            t_labels,
            entries,
        };
        let expected = multiset_count(table.letters.len(), degree);
        if table.entries.len() != expected {
            return Err(Error::parse(
                1,
                format!("kernel table covers {} of {expected} letter multisets", table.entries.len()),
            ));
        }
        Ok(table)
    }

    /// Tabulates `f(multiset, t)` over every sorted letter multiset.
    pub fn from_fn(
        letters: Vec<f64>,
        degree: usize,
        t_labels: Vec<String>,
        mut f: impl FnMut(&[f64], usize) -> f64,
    ) -> Result<Self> {
        if letters.is_empty() || degree == 0 || t_labels.is_empty() {
            return Err(Error::InvalidValue("kernel table needs letters, a degree and t labels".into()));
        }
        let mut entries = HashMap::new();
        let mut key = vec![0usize; degree];
        loop {
            let args: Vec<f64> = key.iter().map(|&i| letters[i]).collect();
            entries.insert(key.clone(), (0..t_labels.len()).map(|t| f(&args, t)).collect());
            // next nondecreasing key
            let mut k = degree;
            while k > 0 && key[k - 1] == letters.len() - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            key[k - 1] += 1;
            for j in k..degree {
                key[j] = key[k - 1];
            }
        }
        Ok(Self {
            degree,
            letters,
            t_labels,
            entries,
        })
    }

    pub fn letters(&self) -> &[f64] {
        &self.letters
    }

    pub fn t_labels(&self) -> &[String] {
        &self.t_labels
    }

    fn eval(&self, xs: &[f64], t: usize) -> f64 {
        let mut key: Vec<usize> = xs
            .iter()
            .map(|x| {
                self.letters
                    .iter()
                    .position(|l| l == x)
                    .unwrap_or_else(|| panic!("value {x} is not a letter of the kernel table"))
            })
            .collect();
        key.sort_unstable();
        self.entries[&key][t]
    }
}

fn multiset_count(k: usize, d: usize) -> usize {
    binomial(k + d - 1, d) as usize
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    /// `Π (x_i - center)`.
    Product { degree: usize, center: f64 },
    /// `Σ x_i`.
    Sum { degree: usize },
    /// `(x_1 - x_2)^2 / 2`; its U-statistic is the sample variance.
    HalfSquaredDifference,
    /// `Π g(t x_i)`.
    ParametricProduct { degree: usize, link: Link },
    /// `Σ g(t x_i)`.
    ParametricSum { degree: usize, link: Link },
    Constant { degree: usize, value: f64 },
    Tabulated(KernelTable),
}

impl KernelFamily {
    pub fn degree(&self) -> usize {
        match self {
            KernelFamily::Product { degree, .. }
            | KernelFamily::Sum { degree }
            | KernelFamily::ParametricProduct { degree, .. }
            | KernelFamily::ParametricSum { degree, .. }
            | KernelFamily::Constant { degree, .. } => *degree,
            KernelFamily::HalfSquaredDifference => 2,
            KernelFamily::Tabulated(t) => t.degree,
        }
    }

    fn is_parametric(&self) -> bool {
        matches!(
            self,
            KernelFamily::ParametricProduct { .. } | KernelFamily::ParametricSum { .. }
        )
    }
}

/// A symmetric kernel of degree `d` over a parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    t_values: Vec<f64>,
    t_labels: Vec<String>,
    alphabet: Option<Alphabet>,
}

impl KernelSpec {
    /// A kernel that does not depend on `t`; it carries the single label `t0`.
    pub fn new(family: KernelFamily) -> Result<Self> {
        if family.is_parametric() {
            return Err(Error::InvalidValue(
                "parametric families need a t grid; use KernelSpec::parametric".into(),
            ));
        }
        if family.degree() == 0 {
            return Err(Error::InvalidValue("kernel degree must be at least 1".into()));
        }
        let (t_values, t_labels) = match &family {
            KernelFamily::Tabulated(t) => (
                (0..t.t_labels.len()).map(|i| i as f64).collect(),
                t.t_labels.clone(),
            ),
            _ => (vec![0.0], vec!["t0".to_string()]),
        };
        Ok(Self {
            family,
            t_values,
            t_labels,
            alphabet: None,
        })
    }

    pub fn parametric(family: KernelFamily, t_values: Vec<f64>) -> Result<Self> {
        if !family.is_parametric() {
            return Err(Error::InvalidValue("only parametric families take a t grid".into()));
        }
        if family.degree() == 0 {
            return Err(Error::InvalidValue("kernel degree must be at least 1".into()));
        }
        if t_values.is_empty() || t_values.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidValue("t grid must be nonempty and finite".into()));
        }
        let t_labels = t_values.iter().map(|t| format!("t={t}")).collect();
        Ok(Self {
            family,
            t_values,
            t_labels,
            alphabet: None,
        })
    }

    pub fn product(degree: usize) -> Self {
        Self::new(KernelFamily::Product { degree, center: 0.0 }).expect("valid degree")
    }

    pub fn sum(degree: usize) -> Self {
        Self::new(KernelFamily::Sum { degree }).expect("valid degree")
    }

    pub fn with_alphabet(mut self, alphabet: Alphabet) -> Result<Self> {
        if let KernelFamily::Tabulated(t) = &self.family {
            if let Some(x) = alphabet.values().iter().find(|x| !t.letters.contains(x)) {
                return Err(Error::InvalidValue(format!("letter {x} is missing from the kernel table")));
            }
        }
        self.alphabet = Some(alphabet);
        Ok(self)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn degree(&self) -> usize {
        self.family.degree()
    }

    pub fn alphabet(&self) -> Option<&Alphabet> {
        self.alphabet.as_ref()
    }

    pub fn t_labels(&self) -> &[String] {
        &self.t_labels
    }

    pub fn t_values(&self) -> &[f64] {
        &self.t_values
    }

    pub fn t_count(&self) -> usize {
        self.t_labels.len()
    }

    /// `Φ(x_1, ..., x_d; t)` with `t` given by its grid index.
    pub fn eval(&self, xs: &[f64], t: usize) -> f64 {
        debug_assert_eq!(xs.len(), self.degree());
        let tv = self.t_values[t];
        match &self.family {
            KernelFamily::Product { center, .. } => xs.iter().map(|x| x - center).product(),
            KernelFamily::Sum { .. } => xs.iter().sum(),
            KernelFamily::HalfSquaredDifference => 0.5 * (xs[0] - xs[1]).powi(2),
            KernelFamily::ParametricProduct { link, .. } => {
                xs.iter().map(|x| link.apply(tv * x)).product()
            }
            KernelFamily::ParametricSum { link, .. } => xs.iter().map(|x| link.apply(tv * x)).sum(),
            KernelFamily::Constant { value, .. } => *value,
            KernelFamily::Tabulated(table) => table.eval(xs, t),
        }
    }

    /// Closed-form `U_n` in `O(n d)` for the families that admit one.
    pub(crate) fn u_stat_fast(&self, data: &[f64], t: usize) -> Option<f64> {
        let n = data.len();
        let d = self.degree();
        let tv = self.t_values[t];
        let mean_of = |f: &dyn Fn(f64) -> f64| data.iter().map(|&x| f(x)).sum::<f64>() * d as f64 / n as f64;
        match &self.family {
            KernelFamily::Product { center, .. } => Some(
                elementary_symmetric(data.iter().map(|x| x - center), d) / binomial(n, d),
            ),
            KernelFamily::ParametricProduct { link, .. } => Some(
                elementary_symmetric(data.iter().map(|x| link.apply(tv * x)), d) / binomial(n, d),
            ),
            KernelFamily::Sum { .. } => Some(mean_of(&|x| x)),
            KernelFamily::ParametricSum { link, .. } => Some(mean_of(&|x| link.apply(tv * x))),
            KernelFamily::HalfSquaredDifference => {
                let mean = data.iter().sum::<f64>() / n as f64;
                Some(data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64)
            }
            KernelFamily::Constant { value, .. } => Some(*value),
            KernelFamily::Tabulated(_) => None,
        }
    }

    /// Checks symmetry on `trials` random argument permutations.
    pub fn check_symmetry<R: rand::Rng>(&self, args: &[f64], trials: usize, rng: &mut R) -> bool {
        use rand::seq::SliceRandom;
        let mut perm = args.to_vec();
        (0..self.t_count()).all(|t| {
            let base = self.eval(args, t);
            (0..trials).all(|_| {
                perm.shuffle(rng);
                let v = self.eval(&perm, t);
                (v - base).abs() <= 1e-12 * base.abs().max(1.0)
            })
        })
    }
}

/// `e_d(y_1, ..., y_n)` by the standard one-pass recursion.
fn elementary_symmetric<I: Iterator<Item = f64>>(ys: I, d: usize) -> f64 {
    let mut e = vec![0.0; d + 1];
    e[0] = 1.0;
    for y in ys {
        for k in (1..=d).rev() {
            e[k] += y * e[k - 1];
        }
    }
    e[d]
}
