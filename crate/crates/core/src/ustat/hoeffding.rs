use std::collections::BTreeMap;

use super::kernel::{binomial, Alphabet, KernelSpec};
use crate::entropy::ols_slope;
use crate::error::{Error, Result};

/// Relative threshold below which a component variance counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Cap on `|X|^d` for exact summation.
const MAX_CELLS: usize = 1 << 24;

/// Hoeffding decomposition of `Φ(·; t)` for one `t` under a finite law.
#[derive(Debug, Clone, PartialEq)]
pub struct HoeffdingDecomposition {
    pub t_label: String,
    pub degree: usize,
    pub mean: f64,
    /// Variances of the canonical projections `h_1..h_d`.
    pub zetas: Vec<f64>,
    /// Variances of the conditional expectations `E[Φ | X_1..X_c]`, `c = 1..d`.
    pub conditional: Vec<f64>,
    pub rank: usize,
    /// All components vanish: the kernel is a.s. constant.
    pub trivial: bool,
    alphabet: Alphabet,
    /// `h_c` over `X^c`, row-major with the first argument slowest.
    projections: Vec<Vec<f64>>,
}

impl HoeffdingDecomposition {
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// `h_c(x_1, ..., x_c)` with arguments given as letter indices.
    pub fn projection(&self, letters: &[usize]) -> f64 {
        let k = self.alphabet.len();
        let idx = letters.iter().fold(0, |acc, &i| acc * k + i);
        self.projections[letters.len() - 1][idx]
    }
}

pub fn hoeffding_decompose(kernel: &KernelSpec, t_label: &str) -> Result<HoeffdingDecomposition> {
    let t = kernel
        .t_labels()
        .iter()
        .position(|l| l == t_label)
        .ok_or_else(|| Error::Unknown {
            kind: "t label",
            name: t_label.to_string(),
        })?;
    decompose_index(kernel, t)
}

pub fn hoeffding_decompose_all(kernel: &KernelSpec) -> Result<Vec<HoeffdingDecomposition>> {
    (0..kernel.t_count()).map(|t| decompose_index(kernel, t)).collect()
}

fn decompose_index(kernel: &KernelSpec, t: usize) -> Result<HoeffdingDecomposition> {
    let alphabet = kernel.alphabet().ok_or(Error::MissingAlphabet)?.clone();
    let d = kernel.degree();
    let k = alphabet.len();
    let cells = k.checked_pow(d as u32).filter(|c| *c <= MAX_CELLS).ok_or_else(|| {
        Error::InvalidValue(format!("alphabet of {k} letters to the power {d} is too large to sum exactly"))
    })?;
    let letters = alphabet.values();
    let w = alphabet.weights();

    // g[c] = E[Φ | X_1..X_c] over X^c
    let mut g = vec![Vec::new(); d + 1];
    let mut args = vec![0.0; d];
    g[d] = (0..cells)
        .map(|mut idx| {
            for a in args.iter_mut().rev() {
                *a = letters[idx % k];
                idx /= k;
            }
            kernel.eval(&args, t)
        })
        .collect();
    for c in (0..d).rev() {
        g[c] = g[c + 1]
            .chunks(k)
            .map(|row| row.iter().zip(w).map(|(v, wi)| v * wi).sum())
            .collect();
    }
    let mean = g[0][0];

    // h_c(x) = Σ_{B ⊆ [c]} (-1)^{c-|B|} g_{|B|}(x_B)
    let mut projections = Vec::with_capacity(d);
    let mut zetas = Vec::with_capacity(d);
    let mut conditional = Vec::with_capacity(d);
    for c in 1..=d {
        let size = k.pow(c as u32);
        let mut h = vec![0.0; size];
        let mut zeta = 0.0;
        let mut second = 0.0;
        let mut digits = vec![0usize; c];
        for (idx, slot) in h.iter_mut().enumerate() {
            let mut rest = idx;
            for dg in digits.iter_mut().rev() {
                *dg = rest % k;
                rest /= k;
            }
            let mut v = 0.0;
            for mask in 0u32..(1 << c) {
                let sub = digits
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .fold(0, |acc, (_, &dg)| acc * k + dg);
                let sign = if (c - mask.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
                v += sign * g[mask.count_ones() as usize][sub];
            }
            *slot = v;
            let weight: f64 = digits.iter().map(|&dg| w[dg]).product();
            zeta += weight * v * v;
            second += weight * g[c][idx] * g[c][idx];
        }
        projections.push(h);
        zetas.push(zeta);
        conditional.push((second - mean * mean).max(0.0));
    }

    let max_zeta = zetas.iter().cloned().fold(0.0, f64::max);
    let trivial = max_zeta <= 1e-24 * (1.0 + mean * mean);
    let rank = if trivial {
        1
    } else {
        zetas.iter().position(|z| *z > RANK_TOLERANCE * max_zeta).unwrap() + 1
    };
    Ok(HoeffdingDecomposition {
        t_label: kernel.t_labels()[t].clone(),
        degree: d,
        mean,
        zetas,
        conditional,
        rank,
        trivial,
        alphabet,
        projections,
    })
}

/// `Var U_n = Σ_c C(d,c)² / C(n,c) · ζ_c` with `ζ_c` the canonical variances.
pub fn variance_u(decomp: &HoeffdingDecomposition, n: usize) -> Result<f64> {
    let d = decomp.degree;
    if n <= d {
        return Err(Error::InvalidValue(format!("sample size {n} must exceed the kernel degree {d}")));
    }
    Ok((1..=d)
        .map(|c| binomial(d, c).powi(2) / binomial(n, c) * decomp.zetas[c - 1])
        .sum())
}

/// The same variance written with conditional variances:
/// `C(n,d)^{-1} Σ_c C(d,c) C(n-d,d-c) σ_c²`.
pub fn classical_variance(decomp: &HoeffdingDecomposition, n: usize) -> Result<f64> {
    let d = decomp.degree;
    if n <= d {
        return Err(Error::InvalidValue(format!("sample size {n} must exceed the kernel degree {d}")));
    }
    Ok((1..=d)
        .map(|c| binomial(d, c) * binomial(n - d, d - c) * decomp.conditional[c - 1])
        .sum::<f64>()
        / binomial(n, d))
}

/// Log-log slope of `variance_u` over `n_grid`; close to `-rank`.
pub fn variance_slope(decomp: &HoeffdingDecomposition, n_grid: &[usize]) -> Result<f64> {
    if n_grid.len() < 2 {
        return Err(Error::InvalidValue("slope needs at least two sample sizes".into()));
    }
    let pts = n_grid
        .iter()
        .map(|&n| Ok(((n as f64).ln(), variance_u(decomp, n)?.ln())))
        .collect::<Result<Vec<_>>>()?;
    Ok(ols_slope(&pts))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankSummary {
    pub rank: usize,
    /// t labels grouped by their own rank.
    pub partition: BTreeMap<usize, Vec<String>>,
}

/// Maximal rank over the grid, with the partition of the grid by rank.
pub fn rank_of(decomps: &[HoeffdingDecomposition]) -> Result<RankSummary> {
    if decomps.is_empty() {
        return Err(Error::InvalidValue("rank of an empty grid".into()));
    }
    let mut partition: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for d in decomps {
        partition.entry(d.rank).or_default().push(d.t_label.clone());
    }
    let rank = *partition.keys().next_back().unwrap();
    Ok(RankSummary { rank, partition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ustat::{rng, u_stat, KernelFamily, KernelTable, UStatMode};
    use rand::Rng;

    fn rademacher() -> Alphabet {
        Alphabet::uniform(vec![-1.0, 1.0]).unwrap()
    }

    #[test]
    fn product_and_sum_on_rademacher() {
        let prod = KernelSpec::product(2).with_alphabet(rademacher()).unwrap();
        let h = hoeffding_decompose(&prod, "t0").unwrap();
        assert_eq!(h.zetas, vec![0.0, 1.0]);
        assert_eq!(h.rank, 2);
        assert_eq!(h.mean, 0.0);

        let sum = KernelSpec::sum(2).with_alphabet(rademacher()).unwrap();
        let h = hoeffding_decompose(&sum, "t0").unwrap();
        assert_eq!(h.zetas, vec![1.0, 0.0]);
        assert_eq!(h.rank, 1);
    }

    #[test]
    fn missing_alphabet_is_an_error() {
        assert_eq!(
            hoeffding_decompose(&KernelSpec::product(2), "t0").unwrap_err(),
            Error::MissingAlphabet
        );
        assert_eq!(
            Error::MissingAlphabet.to_string(),
            "decomposition requires finite alphabet"
        );
    }

    #[test]
    fn constant_kernel_is_trivial() {
        let k = KernelSpec::new(KernelFamily::Constant { degree: 2, value: 2.0 })
            .unwrap()
            .with_alphabet(rademacher())
            .unwrap();
        let h = hoeffding_decompose(&k, "t0").unwrap();
        assert!(h.trivial);
        assert_eq!(h.mean, 2.0);
    }

    #[test]
    fn degenerate_product_variance_at_four() {
        let prod = KernelSpec::product(2).with_alphabet(rademacher()).unwrap();
        let h = hoeffding_decompose(&prod, "t0").unwrap();
        // brute force over all 2^4 datasets
        let mut m2 = 0.0;
        for mask in 0..16u32 {
            let data: Vec<f64> = (0..4).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            m2 += u_stat(&prod, &data, UStatMode::Exact).unwrap().values[0].powi(2) / 16.0;
        }
        assert!((m2 - 1.0 / 6.0).abs() < 1e-15);
        assert!((variance_u(&h, 4).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((classical_variance(&h, 4).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!(variance_u(&h, 2).is_err());
    }

    #[test]
    fn degree_one_variance() {
        let a = Alphabet::new(vec![0.0, 1.0, 5.0], vec![0.2, 0.5, 0.3]).unwrap();
        let k = KernelSpec::sum(1).with_alphabet(a).unwrap();
        let h = hoeffding_decompose(&k, "t0").unwrap();
        let var = 0.5 + 0.3 * 25.0 - (0.5f64 + 1.5).powi(2);
        assert!((h.zetas[0] - var).abs() < 1e-12);
        assert!((variance_u(&h, 7).unwrap() - var / 7.0).abs() < 1e-14);
    }

    fn random_kernel(degree: usize, seed: u64) -> KernelSpec {
        let mut r = rng::stream(seed, 0);
        let table = KernelTable::from_fn(vec![-1.0, 0.5, 2.0], degree, vec!["a".into()], |_, _| {
            r.random_range(-1.0..1.0)
        })
        .unwrap();
        let w: f64 = 0.2 + 0.3 * rng::stream(seed, 1).random::<f64>();
        KernelSpec::new(KernelFamily::Tabulated(table))
            .unwrap()
            .with_alphabet(Alphabet::new(vec![-1.0, 0.5, 2.0], vec![w, 0.5 - w / 2.0, 0.5 - w / 2.0]).unwrap())
            .unwrap()
    }

    #[test]
    fn projections_are_orthogonal() {
        for degree in [2, 3] {
            let k = random_kernel(degree, 40 + degree as u64);
            let h = hoeffding_decompose(&k, "a").unwrap();
            let a = h.alphabet().clone();
            let m = degree + 1;
            // every (component, variable subset) pair evaluated over X^m
            let subsets: Vec<Vec<usize>> = (1u32..(1 << m))
                .filter(|s| s.count_ones() as usize <= degree)
                .map(|s| (0..m).filter(|i| s >> i & 1 == 1).collect())
                .collect();
            let cells = a.len().pow(m as u32);
            for (i, s1) in subsets.iter().enumerate() {
                for s2 in &subsets[i..] {
                    let mut cov = 0.0;
                    for mut idx in 0..cells {
                        let mut digits = vec![0; m];
                        for dg in digits.iter_mut().rev() {
                            *dg = idx % a.len();
                            idx /= a.len();
                        }
                        let w: f64 = digits.iter().map(|&dg| a.weights()[dg]).product();
                        let x1: Vec<usize> = s1.iter().map(|&j| digits[j]).collect();
                        let x2: Vec<usize> = s2.iter().map(|&j| digits[j]).collect();
                        cov += w * h.projection(&x1) * h.projection(&x2);
                    }
                    if s1 == s2 {
                        assert!((cov - h.zetas[s1.len() - 1]).abs() < 1e-12);
                    } else {
                        assert!(cov.abs() < 1e-12, "{s1:?} {s2:?}: {cov}");
                    }
                }
            }
        }
    }

    #[test]
    fn variance_formulas_agree() {
        for degree in [2, 3] {
            let k = random_kernel(degree, degree as u64);
            let h = hoeffding_decompose(&k, "a").unwrap();
            for n in degree + 1..20 {
                let a = variance_u(&h, n).unwrap();
                let b = classical_variance(&h, n).unwrap();
                assert!((a - b).abs() < 1e-12 * a.max(1e-300), "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn slope_tracks_rank() {
        let k = random_kernel(2, 3);
        let h = hoeffding_decompose(&k, "a").unwrap();
        assert_eq!(h.rank, 1);
        let grid = [16, 32, 64, 128, 256];
        assert!((variance_slope(&h, &grid).unwrap() + 1.0).abs() < 0.05);
        let prod = KernelSpec::product(2).with_alphabet(rademacher()).unwrap();
        let hp = hoeffding_decompose(&prod, "t0").unwrap();
        assert!((variance_slope(&hp, &grid).unwrap() + 2.0).abs() < 0.05);
    }

    #[test]
    fn rank_partition() {
        let k = KernelSpec::parametric(
            KernelFamily::ParametricProduct {
                degree: 2,
                link: crate::ustat::Link::Identity,
            },
            vec![1.0, 2.0],
        )
        .unwrap()
        .with_alphabet(rademacher())
        .unwrap();
        let mut all = hoeffding_decompose_all(&k).unwrap();
        assert_eq!(rank_of(&all).unwrap().rank, 2);
        assert_eq!(rank_of(&all[..1]).unwrap().rank, 2);
        let sum = KernelSpec::sum(2).with_alphabet(rademacher()).unwrap();
        all.push(hoeffding_decompose(&sum, "t0").unwrap());
        let r = rank_of(&all).unwrap();
        assert_eq!(r.rank, 2);
        assert_eq!(r.partition[&1].len(), 1);
        assert_eq!(r.partition[&2].len(), 2);
        assert!(rank_of(&[]).is_err());
    }
}
