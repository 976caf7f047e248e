use rayon::prelude::*;

use super::hoeffding::{hoeffding_decompose_all, rank_of};
use super::kernel::{KernelFamily, KernelSpec};
use super::rng::{derived_seed, stream};
use super::sampler::Sampler;
use super::{phi_n, u_stat_with_budget, NormConvention, UStatMode, UStatPath, DEFAULT_EXACT_BUDGET};
use crate::empirics::FieldSampleMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PanelOptions {
    /// Overrides the rank; required when the law has no finite alphabet.
    pub rank: Option<usize>,
    pub convention: NormConvention,
    pub exact_budget: u64,
    /// Use this many random subsets per replication instead of exact mode.
    pub incomplete_subsets: Option<u64>,
}

impl Default for PanelOptions {
    fn default() -> Self {
        Self {
            rank: None,
            convention: NormConvention::Multiply,
            exact_budget: DEFAULT_EXACT_BUDGET,
            incomplete_subsets: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanSource {
    /// `E Φ` by exact summation over the alphabet.
    Analytic,
    /// Grand mean of `U_n` over all replications; biased by `O(1/√reps)`.
    MonteCarlo,
}

impl std::fmt::Display for MeanSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MeanSource::Analytic => "analytic",
            MeanSource::MonteCarlo => "monte_carlo",
        })
    }
}

/// Replications of the normalized deviation field.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub field: FieldSampleMatrix,
    pub n: usize,
    pub rank: usize,
    pub means: Vec<f64>,
    pub mean_source: MeanSource,
    pub warnings: Vec<String>,
}

/// Raw `U_n` paths, one per replication, in replication order.
pub fn simulate_u_matrix(
    kernel: &KernelSpec,
    sampler: &Sampler,
    n: usize,
    reps: usize,
    seed: u64,
    opts: &PanelOptions,
) -> Result<Vec<UStatPath>> {
    if reps < 2 {
        return Err(Error::InvalidValue(format!("need at least 2 replications, got {reps}")));
    }
    sampler.validate()?;
    if let KernelFamily::Tabulated(table) = kernel.family() {
        let ok = sampler
            .alphabet()
            .is_some_and(|a| a.values().iter().all(|x| table.letters().contains(x)));
        if !ok {
            return Err(Error::InvalidValue(
                "a tabulated kernel needs a sampler whose letters appear in the table".into(),
            ));
        }
    }
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(seed, rep as u64);
            let mut data = vec![0.0; n];
            sampler.fill(&mut rng, &mut data);
            let aux = derived_seed(seed, rep as u64 + 1);
            let mode = match opts.incomplete_subsets {
                Some(subsets) => UStatMode::Incomplete { subsets, seed: aux },
                None => UStatMode::Exact,
            };
            u_stat_with_budget(kernel, &data, mode, opts.exact_budget, aux)
        })
        .collect()
}

/// `reps` independent replications of `φ_n` over the kernel's t grid.
///
/// Replication `i` draws from stream `(seed, i)`, so the output is identical
/// for a fixed seed whatever the thread count.
pub fn simulate_panel(
    kernel: &KernelSpec,
    sampler: &Sampler,
    n: usize,
    reps: usize,
    seed: u64,
    opts: &PanelOptions,
) -> Result<Panel> {
    let alphabet = kernel.alphabet().cloned().or_else(|| sampler.alphabet());
    let decomps = match &alphabet {
        Some(a) => Some(hoeffding_decompose_all(&kernel.clone().with_alphabet(a.clone())?)?),
        None => None,
    };
    let rank = match (opts.rank, &decomps) {
        (Some(r), _) if r >= 1 => r,
        (Some(_), _) => return Err(Error::InvalidValue("rank must be at least 1".into())),
        (None, Some(d)) => rank_of(d)?.rank,
        (None, None) => {
            return Err(Error::InvalidValue(
                "the rank cannot be derived without a finite alphabet; set it explicitly".into(),
            ))
        }
    };

    let paths = simulate_u_matrix(kernel, sampler, n, reps, seed, opts)?;
    let mut warnings: Vec<String> = paths.iter().filter_map(|p| p.warning.clone()).take(1).collect();
    let tc = kernel.t_count();
    let (means, mean_source) = match &decomps {
        Some(d) => (d.iter().map(|h| h.mean).collect(), MeanSource::Analytic),
        None => {
            let mut m = vec![0.0; tc];
            for p in &paths {
                for (acc, v) in m.iter_mut().zip(&p.values) {
                    *acc += v;
                }
            }
            m.iter_mut().for_each(|v| *v /= reps as f64);
            warnings.push(format!("E U_n estimated by the grand mean of {reps} replications"));
            (m, MeanSource::MonteCarlo)
        }
    };
    let mut values = Vec::with_capacity(reps * tc);
    for p in &paths {
        values.extend(phi_n(p, rank, &means, opts.convention)?);
    }
    Ok(Panel {
        field: FieldSampleMatrix::new(kernel.t_labels().to_vec(), values)?,
        n,
        rank,
        means,
        mean_source,
        warnings,
    })
}
