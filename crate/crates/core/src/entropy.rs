//! Covering numbers, metric entropy and entropy integrals of finite
//! semi-metric spaces.
//!
//! Balls are closed, `S(t, ε) = {s : d(s, t) <= ε}`, and centers are taken
//! from the space itself. Three covering estimates are provided:
//!
//! - a packing lower bound (maximal `2ε`-separated set, farthest-point greedy),
//! - the greedy set-cover upper bound (the default estimator),
//! - the exact minimal cover by branch-and-bound, for small spaces.
//!
//! On any instance `packing <= exact <= greedy`.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::psi::{log_space, v_inf, GridConfig, PsiFunction};

/// Relative slack on ball membership so that grid distances such as
/// `0.75 - 0.5` are not excluded by rounding.
const BALL_SLACK: f64 = 1e-12;

/// Labelled points with a symmetric semi-distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    dist: Vec<f64>,
    diameter: f64,
}

impl FiniteMetricSpace {
    /// Builds a space from a row-major `n × n` matrix.
    pub fn new(labels: Vec<String>, dist: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidValue("metric space needs at least one point".into()));
        }
        if dist.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{n} labels need a {n}x{n} matrix, got {} entries",
                dist.len()
            )));
        }
        let mut diameter = 0.0f64;
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(Error::InvalidValue(format!(
                    "diagonal entry ({i},{i}) is {}",
                    dist[i * n + i]
                )));
            }
            for j in 0..n {
                let d = dist[i * n + j];
                if !(d.is_finite() && d >= 0.0) {
                    return Err(Error::InvalidValue(format!("entry ({i},{j}) is {d}")));
                }
                if d != dist[j * n + i] {
                    return Err(Error::InvalidValue(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
                diameter = diameter.max(d);
            }
        }
        Ok(Self {
            labels,
            dist,
            diameter,
        })
    }

    /// Builds a space from a distance function evaluated on `i < j`.
    pub fn from_fn<F: Fn(usize, usize) -> f64>(labels: Vec<String>, f: F) -> Result<Self> {
        let n = labels.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Self::new(labels, dist)
    }

    /// Points on the real line with distance `|x - y|^alpha`.
    pub fn from_line(points: &[f64], alpha: f64) -> Result<Self> {
        let labels = points.iter().map(|x| x.to_string()).collect();
        Self::from_fn(labels, |i, j| (points[i] - points[j]).abs().powf(alpha))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.len() + j]
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Row-major matrix.
    pub fn matrix(&self) -> &[f64] {
        &self.dist
    }

    /// The subspace on the given point indices, in the given order.
    pub fn subspace(&self, idx: &[usize]) -> Result<Self> {
        let labels = idx.iter().map(|&i| self.labels[i].clone()).collect();
        Self::from_fn(labels, |a, b| self.dist(idx[a], idx[b]))
    }

    /// Reads a CSV distance matrix: header `label,<l1>,...,<ln>`, then one
    /// row per point starting with its label.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::parse(1, e.to_string()))?
            .clone();
        let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let n = labels.len();
        let mut dist = Vec::with_capacity(n * n);
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
            if rec.len() != n + 1 {
                return Err(Error::parse(
                    line,
                    format!("expected {} fields, found {}", n + 1, rec.len()),
                ));
            }
            if rec[0] != labels[row.min(n.saturating_sub(1))] {
                return Err(Error::parse(
                    line,
                    format!("row label `{}` does not match header", &rec[0]),
                ));
            }
            for field in rec.iter().skip(1) {
                dist.push(field.trim().parse::<f64>().map_err(|_| {
                    Error::parse(line, format!("not a number: `{field}`"))
                })?);
            }
        }
        if dist.len() != n * n {
            return Err(Error::parse(
                n + 1,
                format!("expected {n} rows, found {}", dist.len() / n.max(1)),
            ));
        }
        Self::new(labels, dist)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        self.to_csv_writer(file)
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let io = |e: csv::Error| Error::Io {
            path: "<distance csv>".into(),
            msg: e.to_string(),
        };
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["label".to_string()];
        header.extend(self.labels.iter().cloned());
        wtr.write_record(&header).map_err(io)?;
        let n = self.len();
        for i in 0..n {
            let mut rec = vec![self.labels[i].clone()];
            rec.extend(self.dist[i * n..(i + 1) * n].iter().map(|d| d.to_string()));
            wtr.write_record(&rec).map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::Io {
            path: "<distance csv>".into(),
            msg: e.to_string(),
        })
    }
}

/// Dense bitset rows; `balls[c]` is the closed `ε`-ball around point `c`.
struct Balls {
    words: usize,
    bits: Vec<u64>,
    n: usize,
}

impl Balls {
    fn new(space: &FiniteMetricSpace, eps: f64) -> Self {
        let n = space.len();
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; n * words];
        let radius = eps * (1.0 + BALL_SLACK);
        for c in 0..n {
            for s in 0..n {
                if space.dist(c, s) <= radius {
                    bits[c * words + s / 64] |= 1 << (s % 64);
                }
            }
        }
        Self { words, bits, n }
    }

    fn row(&self, c: usize) -> &[u64] {
        &self.bits[c * self.words..(c + 1) * self.words]
    }

    fn full(&self) -> Vec<u64> {
        let mut v = vec![u64::MAX; self.words];
        let rem = self.n % 64;
        if rem != 0 {
            v[self.words - 1] = (1u64 << rem) - 1;
        }
        v
    }
}

fn first_set(bits: &[u64]) -> Option<usize> {
    bits.iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

/// Size of a maximal `2ε`-separated set built by farthest-point insertion
/// from the first point. Every such set lower-bounds the covering number.
pub fn packing_lower(space: &FiniteMetricSpace, eps: f64) -> usize {
    let n = space.len();
    let separation = 2.0 * eps * (1.0 + BALL_SLACK);
    let mut min_dist: Vec<f64> = (0..n).map(|j| space.dist(0, j)).collect();
    let mut count = 1;
    loop {
        let mut far = 0;
        for j in 1..n {
            if min_dist[j] > min_dist[far] {
                far = j;
            }
        }
        if min_dist[far] <= separation {
            return count;
        }
        count += 1;
        for j in 0..n {
            min_dist[j] = min_dist[j].min(space.dist(far, j));
        }
    }
}

/// Greedy set cover with balls centered at points of the space. Ties pick the
/// smallest center index.
pub fn greedy_upper(space: &FiniteMetricSpace, eps: f64) -> usize {
    let balls = Balls::new(space, eps);
    let mut uncovered = balls.full();
    let mut count = 0;
    while uncovered.iter().any(|w| *w != 0) {
        let mut best = 0;
        let mut best_gain = 0u32;
        for c in 0..balls.n {
            let gain: u32 = balls
                .row(c)
                .iter()
                .zip(&uncovered)
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            if gain > best_gain {
                best = c;
                best_gain = gain;
            }
        }
        for (u, b) in uncovered.iter_mut().zip(balls.row(best)) {
            *u &= !b;
        }
        count += 1;
    }
    count
}

/// Exact minimal cover by iterative deepening: the first uncovered point must
/// lie in the ball of some chosen center, so branch over those centers.
///
/// Returns `None` once more than `budget` search nodes have been visited.
pub fn exact_cover(space: &FiniteMetricSpace, eps: f64, budget: u64) -> Option<usize> {
    let lower = packing_lower(space, eps);
    let upper = greedy_upper(space, eps);
    if lower == upper {
        return Some(upper);
    }
    let balls = Balls::new(space, eps);
    let mut nodes = 0u64;
    for k in lower..upper {
        match cover_within(&balls, &balls.full(), k, &mut nodes, budget) {
            Some(true) => return Some(k),
            Some(false) => {}
            None => return None,
        }
    }
    Some(upper)
}

fn cover_within(
    balls: &Balls,
    uncovered: &[u64],
    k: usize,
    nodes: &mut u64,
    budget: u64,
) -> Option<bool> {
    let Some(point) = first_set(uncovered) else {
        return Some(true);
    };
    if k == 0 {
        return Some(false);
    }
    // centers covering `point` are exactly the members of its own ball
    let candidates = balls.row(point).to_vec();
    let mut next = vec![0u64; balls.words];
    for c in (0..balls.n).filter(|c| candidates[c / 64] >> (c % 64) & 1 == 1) {
        *nodes += 1;
        if *nodes > budget {
            return None;
        }
        for ((dst, u), b) in next.iter_mut().zip(uncovered).zip(balls.row(c)) {
            *dst = u & !b;
        }
        if cover_within(balls, &next.clone(), k - 1, nodes, budget)? {
            return Some(true);
        }
    }
    Some(false)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoveringOptions {
    /// Largest space for which the exact cover is attempted.
    pub exact_threshold: usize,
    /// Node budget of the exact search.
    pub exact_budget: u64,
}

impl Default for CoveringOptions {
    fn default() -> Self {
        Self {
            exact_threshold: 16,
            exact_budget: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoveringBounds {
    pub packing_lower: usize,
    pub greedy_upper: usize,
    pub exact: Option<usize>,
}

pub fn covering_bounds(space: &FiniteMetricSpace, eps: f64) -> CoveringBounds {
    covering_bounds_with(space, eps, &CoveringOptions::default())
}

pub fn covering_bounds_with(
    space: &FiniteMetricSpace,
    eps: f64,
    opts: &CoveringOptions,
) -> CoveringBounds {
    let exact = if space.len() <= opts.exact_threshold {
        exact_cover(space, eps, opts.exact_budget)
    } else {
        None
    };
    CoveringBounds {
        packing_lower: packing_lower(space, eps),
        greedy_upper: greedy_upper(space, eps),
        exact,
    }
}

/// Which covering estimate feeds the entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoverEstimator {
    Packing,
    #[default]
    Greedy,
    /// Exact when within the budget, greedy otherwise.
    Exact,
}

impl std::str::FromStr for CoverEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "packing" => Ok(Self::Packing),
            "greedy" => Ok(Self::Greedy),
            "exact" => Ok(Self::Exact),
            other => Err(Error::Unknown {
                kind: "covering estimator",
                name: other.into(),
            }),
        }
    }
}

pub fn covering_number(space: &FiniteMetricSpace, eps: f64, estimator: CoverEstimator) -> usize {
    match estimator {
        CoverEstimator::Packing => packing_lower(space, eps),
        CoverEstimator::Greedy => greedy_upper(space, eps),
        CoverEstimator::Exact => exact_cover(space, eps, CoveringOptions::default().exact_budget)
            .unwrap_or_else(|| greedy_upper(space, eps)),
    }
}

/// `H(ε) = ln N(ε)`.
pub fn entropy(space: &FiniteMetricSpace, eps: f64, estimator: CoverEstimator) -> f64 {
    (covering_number(space, eps, estimator) as f64).ln()
}

/// Covering numbers over a grid of radii, made monotone: a cover at `ε` is a
/// cover at every larger radius, and a packing bound at `ε` holds at every
/// smaller one.
pub fn covering_profile(
    space: &FiniteMetricSpace,
    eps_grid: &[f64],
    estimator: CoverEstimator,
) -> Vec<usize> {
    let mut counts: Vec<usize> = eps_grid
        .par_iter()
        .map(|&eps| covering_number(space, eps, estimator))
        .collect();
    let mut order: Vec<usize> = (0..eps_grid.len()).collect();
    order.sort_by(|&a, &b| eps_grid[a].total_cmp(&eps_grid[b]));
    match estimator {
        CoverEstimator::Packing => {
            for w in (1..order.len()).rev() {
                let (small, large) = (order[w - 1], order[w]);
                counts[small] = counts[small].max(counts[large]);
            }
        }
        _ => {
            for w in 1..order.len() {
                let (small, large) = (order[w - 1], order[w]);
                counts[large] = counts[large].min(counts[small]);
            }
        }
    }
    counts
}

/// Default radius grid: 64 log-spaced points on `[diam / 1024, 1]`.
pub fn default_eps_grid(diameter: f64) -> Vec<f64> {
    let lo = if diameter > 0.0 {
        (diameter / 1024.0).min(0.5)
    } else {
        1.0 / 1024.0
    };
    log_space(lo, 1.0, 64)
}

/// One sample of the entropy-integral integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrandSample {
    pub eps: f64,
    pub covering: usize,
    pub entropy: f64,
    pub integrand: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyIntegral {
    pub value: f64,
    /// False when more than half of the mass comes from radii at which every
    /// point needs its own ball, i.e. the discretization rather than the
    /// geometry drives the integral.
    pub finite: bool,
    pub saturated_fraction: f64,
    pub profile: Vec<IntegrandSample>,
}

/// Trapezoid quadrature of `exp(v_ψ(H(ε)))` over `eps_grid ⊂ (0, 1]`.
pub fn entropy_integral(
    space: &FiniteMetricSpace,
    psi: &PsiFunction,
    eps_grid: &[f64],
    estimator: CoverEstimator,
    cfg: &GridConfig,
) -> Result<EntropyIntegral> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidValue("empty radius grid".into()));
    }
    if eps_grid.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(Error::InvalidDomain("radius grid must lie in (0, 1]".into()));
    }
    if eps_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidDomain("radius grid must be increasing".into()));
    }
    let counts = covering_profile(space, eps_grid, estimator);
    let profile: Vec<IntegrandSample> = eps_grid
        .iter()
        .zip(&counts)
        .map(|(&eps, &n)| {
            let h = (n as f64).ln();
            IntegrandSample {
                eps,
                covering: n,
                entropy: h,
                integrand: v_inf(psi, h, cfg).value.exp(),
            }
        })
        .collect();
    let saturated = |s: &IntegrandSample| space.len() > 1 && s.covering == space.len();
    let mut value = 0.0;
    let mut plateau = 0.0;
    for w in profile.windows(2) {
        let area = 0.5 * (w[0].integrand + w[1].integrand) * (w[1].eps - w[0].eps);
        value += area;
        if saturated(&w[0]) && saturated(&w[1]) {
            plateau += area;
        }
    }
    let saturated_fraction = if value > 0.0 { plateau / value } else { 0.0 };
    Ok(EntropyIntegral {
        value,
        finite: saturated_fraction < 0.5,
        saturated_fraction,
        profile,
    })
}

/// Trend of the entropy integral over nested discretizations of one
/// underlying space.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementTrend {
    pub values: Vec<f64>,
    /// `values[i + 1] / values[i]`.
    pub ratios: Vec<f64>,
    pub diverging: bool,
}

/// Computes the integral on each space (coarse to fine) and flags divergence
/// when any refinement multiplies it by more than `factor`.
pub fn refinement_trend(
    spaces: &[FiniteMetricSpace],
    psi: &PsiFunction,
    eps_grid: &[f64],
    estimator: CoverEstimator,
    cfg: &GridConfig,
    factor: f64,
) -> Result<RefinementTrend> {
    let values = spaces
        .iter()
        .map(|s| entropy_integral(s, psi, eps_grid, estimator, cfg).map(|i| i.value))
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = values.windows(2).map(|w| w[1] / w[0]).collect();
    let diverging = ratios.iter().any(|r| *r > factor);
    Ok(RefinementTrend {
        values,
        ratios,
        diverging,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyDimension {
    pub value: f64,
    /// Fewer than four radii with `1 < N < |T|`; `value` is then 0.
    pub undefined: bool,
    pub points_used: usize,
}

/// Least-squares slope of `H(ε)` against `ln(1/ε)` over the radii where the
/// cover is neither a single ball nor saturated at `|T|`.
pub fn entropy_dimension(
    space: &FiniteMetricSpace,
    eps_range: &[f64],
    estimator: CoverEstimator,
) -> EntropyDimension {
    let counts = covering_profile(space, eps_range, estimator);
    let pts: Vec<(f64, f64)> = eps_range
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n > 1 && n < space.len())
        .map(|(&e, &n)| ((1.0 / e).ln(), (n as f64).ln()))
        .collect();
    if pts.len() < 4 {
        return EntropyDimension {
            value: 0.0,
            undefined: true,
            points_used: pts.len(),
        };
    }
    EntropyDimension {
        value: ols_slope(&pts),
        undefined: false,
        points_used: pts.len(),
    }
}

pub(crate) fn ols_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psi::lin_space;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_grid(n: usize) -> FiniteMetricSpace {
        FiniteMetricSpace::from_line(&lin_space(0.0, 1.0, n), 1.0).unwrap()
    }

    fn random_space(rng: &mut ChaCha8Rng, n: usize) -> FiniteMetricSpace {
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
        let labels = (0..n).map(|i| format!("t{i}")).collect();
        FiniteMetricSpace::from_fn(labels, |i, j| {
            ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt()
        })
        .unwrap()
    }

    /// Minimal cover by enumerating center subsets in order of size.
    fn brute_force_cover(space: &FiniteMetricSpace, eps: f64) -> usize {
        let n = space.len();
        assert!(n <= 20);
        let r = eps * (1.0 + BALL_SLACK);
        (1u32..(1 << n))
            .filter(|mask| {
                (0..n).all(|s| {
                    (0..n).any(|c| mask >> c & 1 == 1 && space.dist(c, s) <= r)
                })
            })
            .map(|mask| mask.count_ones() as usize)
            .min()
            .unwrap()
    }

    #[test]
    fn rejects_malformed_matrices() {
        let l = vec!["a".to_string(), "b".to_string()];
        assert!(FiniteMetricSpace::new(l.clone(), vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(FiniteMetricSpace::new(l.clone(), vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(FiniteMetricSpace::new(l.clone(), vec![0.0, -1.0, -1.0, 0.0]).is_err());
        assert!(FiniteMetricSpace::new(l, vec![0.0, 1.0, 1.0]).is_err());
        assert_eq!(unit_grid(11).diameter(), 1.0);
    }

    #[test]
    fn one_ball_when_eps_reaches_diameter() {
        let space = unit_grid(21);
        for eps in [1.0, 1.5] {
            let b = covering_bounds(&space, eps);
            assert_eq!((b.packing_lower, b.greedy_upper), (1, 1));
            assert_eq!(exact_cover(&space, eps, 1000), Some(1));
        }
    }

    #[test]
    fn unit_grid_quarter_radius_needs_two_balls() {
        let space = unit_grid(101);
        // brute force over center pairs and singletons
        let r = 0.25 * (1.0 + BALL_SLACK);
        let covers = |centers: &[usize]| {
            (0..101).all(|s| centers.iter().any(|&c| space.dist(c, s) <= r))
        };
        assert!(!(0..101).any(|c| covers(&[c])));
        let pair = (0..101).flat_map(|a| (a + 1..101).map(move |b| (a, b))).find(|&(a, b)| covers(&[a, b]));
        assert!(pair.is_some());

        assert_eq!(exact_cover(&space, 0.25, 1_000_000), Some(2));
        let opts = CoveringOptions {
            exact_threshold: 101,
            ..CoveringOptions::default()
        };
        let b = covering_bounds_with(&space, 0.25, &opts);
        assert_eq!(b.exact, Some(2));
        assert_eq!(b.greedy_upper, 2);
        assert!((entropy(&space, 0.25, CoverEstimator::Exact) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&space, 2.0, CoverEstimator::Greedy), 0.0);
    }

    #[test]
    fn sandwich_on_random_spaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let n = rng.random_range(1..=12);
            let space = random_space(&mut rng, n);
            let eps = rng.random_range(0.01..0.8);
            let b = covering_bounds(&space, eps);
            let exact = b.exact.unwrap();
            assert_eq!(exact, brute_force_cover(&space, eps));
            assert!(b.packing_lower <= exact && exact <= b.greedy_upper);
        }
    }

    #[test]
    fn entropy_nonincreasing_in_eps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let space = random_space(&mut rng, 60);
        let grid = log_space(0.01, 1.0, 40);
        for est in [CoverEstimator::Packing, CoverEstimator::Greedy] {
            let counts = covering_profile(&space, &grid, est);
            assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{est:?}: {counts:?}");
        }
    }

    #[test]
    fn single_point_integral_is_rectangle() {
        let space = FiniteMetricSpace::new(vec!["t".into()], vec![0.0]).unwrap();
        let psi = PsiFunction::power_log(2.0, 0.0).unwrap();
        let cfg = GridConfig::default();
        let grid = log_space(0.01, 1.0, 30);
        let i = entropy_integral(&space, &psi, &grid, CoverEstimator::Greedy, &cfg).unwrap();
        let expected = v_inf(&psi, 0.0, &cfg).value.exp() * (1.0 - 0.01);
        assert!((i.value - expected).abs() < 1e-12);
        assert!(i.finite);
    }

    #[test]
    fn constant_psi_integrand_is_pisier_form() {
        let space = unit_grid(41);
        let (c, b) = (1.7, 4.0);
        let psi = PsiFunction::constant(c, b).unwrap();
        let grid = log_space(0.005, 1.0, 64);
        let i = entropy_integral(&space, &psi, &grid, CoverEstimator::Greedy, &GridConfig::default())
            .unwrap();
        for s in &i.profile {
            let direct = c * (s.covering as f64).powf(1.0 / b);
            assert!((s.integrand - direct).abs() < 1e-9 * direct);
        }
    }

    #[test]
    fn radius_grid_validation() {
        let space = unit_grid(5);
        let psi = PsiFunction::power_log(2.0, 0.0).unwrap();
        let cfg = GridConfig::default();
        for bad in [vec![0.0, 0.5], vec![0.5, 1.5], vec![0.5, 0.2]] {
            assert!(entropy_integral(&space, &psi, &bad, CoverEstimator::Greedy, &cfg).is_err());
        }
    }

    #[test]
    fn dimension_of_unit_interval() {
        let space = unit_grid(1001);
        let grid = log_space(0.01, 0.2, 16);
        let dim = entropy_dimension(&space, &grid, CoverEstimator::Greedy);
        assert!(!dim.undefined);
        assert!((dim.value - 1.0).abs() < 0.1, "{dim:?}");
    }

    #[test]
    fn dimension_of_holder_rescaled_interval() {
        let pts = lin_space(0.0, 1.0, 1001);
        for alpha in [0.5, 0.75] {
            let space = FiniteMetricSpace::from_line(&pts, alpha).unwrap();
            let lo = 0.01f64.powf(alpha);
            let grid = log_space(lo, 0.2f64.powf(alpha), 16);
            let dim = entropy_dimension(&space, &grid, CoverEstimator::Greedy);
            assert!((dim.value - 1.0 / alpha).abs() < 0.15, "alpha {alpha}: {dim:?}");
        }
    }

    #[test]
    fn dimension_of_point_is_zero() {
        let space = FiniteMetricSpace::new(vec!["t".into()], vec![0.0]).unwrap();
        let dim = entropy_dimension(&space, &log_space(0.01, 1.0, 10), CoverEstimator::Greedy);
        assert_eq!(dim.value, 0.0);
        assert!(dim.undefined);
    }

    #[test]
    fn csv_round_trip() {
        let space = unit_grid(4);
        let mut buf = Vec::new();
        space.to_csv_writer(&mut buf).unwrap();
        let back = FiniteMetricSpace::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(back, space);
        let bad = "label,a,b\na,0,1\nb,1\n";
        assert!(matches!(
            FiniteMetricSpace::from_csv_reader(bad.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
    }
}
