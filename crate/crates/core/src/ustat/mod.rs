//! Parametric U-statistics, the Hoeffding decomposition and the seeded panel
//! simulator.

mod hoeffding;
mod kernel;
mod panel;
pub mod rng;
mod sampler;

use std::str::FromStr;

use rand::seq::index::sample as sample_indices;

pub use hoeffding::{
    classical_variance, hoeffding_decompose, hoeffding_decompose_all, rank_of, variance_slope, variance_u,
    HoeffdingDecomposition, RankSummary, RANK_TOLERANCE,
};
pub use kernel::{Alphabet, KernelFamily, KernelSpec, KernelTable, Link};
pub use panel::{simulate_panel, simulate_u_matrix, MeanSource, Panel, PanelOptions};
pub use sampler::Sampler;

use crate::error::{Error, Result};
use kernel::binomial;

/// Default cap on the number of index tuples enumerated in exact mode.
pub const DEFAULT_EXACT_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UStatMode {
    Exact,
    Incomplete { subsets: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct UStatPath {
    pub n: usize,
    pub values: Vec<f64>,
    pub mode: UStatMode,
    pub warning: Option<String>,
}

/// Direction of the rank normalization of the deviation field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormConvention {
    /// `n^{r/2} (U_n - E U_n)`.
    #[default]
    Multiply,
    /// `n^{-r/2} (U_n - E U_n)`.
    Divide,
}

impl NormConvention {
    pub fn factor(self, n: usize, rank: usize) -> f64 {
        let f = (n as f64).powf(rank as f64 / 2.0);
        match self {
            NormConvention::Multiply => f,
            NormConvention::Divide => 1.0 / f,
        }
    }
}

impl FromStr for NormConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "multiply" => Ok(NormConvention::Multiply),
            "divide" => Ok(NormConvention::Divide),
            other => Err(Error::Unknown {
                kind: "norm convention",
                name: other.into(),
            }),
        }
    }
}

impl std::fmt::Display for NormConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormConvention::Multiply => "multiply",
            NormConvention::Divide => "divide",
        })
    }
}

pub fn u_stat(kernel: &KernelSpec, data: &[f64], mode: UStatMode) -> Result<UStatPath> {
    u_stat_with_budget(kernel, data, mode, DEFAULT_EXACT_BUDGET, 0)
}

/// `U_n(t)` for every `t` of the kernel grid.
///
/// Exact mode uses a closed form when the family has one and otherwise
/// enumerates increasing index tuples; past `budget` tuples it falls back to
/// `budget` random subsets drawn with `fallback_seed` and records a warning.
pub fn u_stat_with_budget(
    kernel: &KernelSpec,
    data: &[f64],
    mode: UStatMode,
    budget: u64,
    fallback_seed: u64,
) -> Result<UStatPath> {
    let n = data.len();
    let d = kernel.degree();
    if n <= d {
        return Err(Error::InvalidValue(format!("sample size {n} must exceed the kernel degree {d}")));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidValue("sample contains a non-finite value".into()));
    }
    let total = binomial(n, d);
    let mut warning = None;
    let mode = match mode {
        UStatMode::Incomplete { subsets: 0, .. } => {
            return Err(Error::InvalidValue("incomplete mode needs at least one subset".into()))
        }
        UStatMode::Incomplete { subsets, .. } if subsets as f64 >= total => UStatMode::Exact,
        m => m,
    };
    let values = match mode {
        UStatMode::Exact => {
            if let Some(v) = (0..kernel.t_count())
                .map(|t| kernel.u_stat_fast(data, t))
                .collect::<Option<Vec<_>>>()
            {
                v
            } else if total <= budget as f64 {
                exact_enumeration(kernel, data)
            } else {
                let seed = fallback_seed;
                warning = Some(format!(
                    "exact mode needs {total:.3e} tuples, above the budget {budget}; used {budget} random subsets"
                ));
                return Ok(UStatPath {
                    n,
                    values: incomplete(kernel, data, budget, seed),
                    mode: UStatMode::Incomplete { subsets: budget, seed },
                    warning,
                });
            }
        }
        UStatMode::Incomplete { subsets, seed } => incomplete(kernel, data, subsets, seed),
    };
    Ok(UStatPath {
        n,
        values,
        mode,
        warning,
    })
}

fn exact_enumeration(kernel: &KernelSpec, data: &[f64]) -> Vec<f64> {
    let n = data.len();
    let d = kernel.degree();
    let tc = kernel.t_count();
    let mut sums = vec![0.0; tc];
    let mut idx: Vec<usize> = (0..d).collect();
    let mut args = vec![0.0; d];
    let mut count = 0u64;
    loop {
        for (a, &i) in args.iter_mut().zip(&idx) {
            *a = data[i];
        }
        for (t, s) in sums.iter_mut().enumerate() {
            *s += kernel.eval(&args, t);
        }
        count += 1;
        // next increasing tuple
        let mut k = d;
        while k > 0 && idx[k - 1] == n - d + k - 1 {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        idx[k - 1] += 1;
        for j in k..d {
            idx[j] = idx[j - 1] + 1;
        }
    }
    sums.iter().map(|s| s / count as f64).collect()
}

fn incomplete(kernel: &KernelSpec, data: &[f64], subsets: u64, seed: u64) -> Vec<f64> {
    let d = kernel.degree();
    let mut rng = rng::stream(seed, 0);
    let mut sums = vec![0.0; kernel.t_count()];
    let mut args = vec![0.0; d];
    for _ in 0..subsets {
        for (a, i) in args.iter_mut().zip(sample_indices(&mut rng, data.len(), d).iter()) {
            *a = data[i];
        }
        for (t, s) in sums.iter_mut().enumerate() {
            *s += kernel.eval(&args, t);
        }
    }
    sums.iter().map(|s| s / subsets as f64).collect()
}

/// Normalized deviation `n^{±r/2} (U_n(t) - E U_n(t))`.
pub fn phi_n(path: &UStatPath, rank: usize, mean_per_t: &[f64], convention: NormConvention) -> Result<Vec<f64>> {
    if rank == 0 {
        return Err(Error::InvalidValue("rank must be at least 1".into()));
    }
    if mean_per_t.len() != path.values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} means for {} parameter values",
            mean_per_t.len(),
            path.values.len()
        )));
    }
    let f = convention.factor(path.n, rank);
    Ok(path.values.iter().zip(mean_per_t).map(|(u, m)| f * (u - m)).collect())
}
