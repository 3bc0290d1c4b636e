//! Correlation structures for the simulated statistics and exact samplers for them.
//!
//! Every structured kind is sampled in O(m) per draw without forming Σ:
//! autoregressive by the AR(1) recursion, blocks by a shared per-block term,
//! and the one-factor model through its rank-one loading. Only explicit
//! matrices are factored densely.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, FncError, Result};
use crate::rng::{substream, DOMAIN_BLOCK_SIZES, DOMAIN_FACTOR_LOADINGS};
use crate::statistic::{Sidedness, StatisticVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceKind {
    Identity,
    /// `σ_ij = λ^|i−j|`.
    Autoregressive { lambda: f64 },
    /// Diagonal blocks of size `k` with off-diagonal `r`; a trailing partial block
    /// takes the remainder when `k` does not divide `m`.
    Block { k: usize, r: f64 },
    /// `n_blocks` blocks with sizes drawn uniformly from `size_min..=size_max`,
    /// rescaled so they sum to `m`.
    RandomBlocks { n_blocks: usize, size_min: usize, size_max: usize, r: f64, seed: u64 },
    /// Correlation of `V = τhhᵀ + I` with `h ~ N(0, I)` drawn from `h_seed`.
    Factor { tau: f64, h_seed: u64 },
    Explicit { matrix: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceModel {
    pub m: usize,
    #[serde(flatten)]
    pub kind: CovarianceKind,
}

impl CovarianceModel {
    pub fn new(m: usize, kind: CovarianceKind) -> Result<Self> {
        let model = Self { m, kind };
        model.validate()?;
        Ok(model)
    }

    pub fn identity(m: usize) -> Result<Self> {
        Self::new(m, CovarianceKind::Identity)
    }

    pub fn autoregressive(m: usize, lambda: f64) -> Result<Self> {
        Self::new(m, CovarianceKind::Autoregressive { lambda })
    }

    pub fn block(m: usize, k: usize, r: f64) -> Result<Self> {
        Self::new(m, CovarianceKind::Block { k, r })
    }

    pub fn random_blocks(m: usize, n_blocks: usize, size_min: usize, size_max: usize, r: f64, seed: u64) -> Result<Self> {
        Self::new(m, CovarianceKind::RandomBlocks { n_blocks, size_min, size_max, r, seed })
    }

    pub fn factor(m: usize, tau: f64, h_seed: u64) -> Result<Self> {
        Self::new(m, CovarianceKind::Factor { tau, h_seed })
    }

    pub fn explicit(matrix: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(matrix.len(), CovarianceKind::Explicit { matrix })
    }

    /// Parse a compact description such as `ar:0.2`, `block:40:0.5`,
    /// `random-blocks:20:10:100:0.5:SEED`, `factor:0.5:SEED` or `identity`.
    pub fn parse(spec: &str, m: usize) -> Result<Self> {
        let parts: Vec<&str> = spec.trim().split(':').collect();
        let bad = || FncError::Config(format!("cannot parse covariance model {spec:?}"));
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let int = |s: &str| s.parse::<u64>().map_err(|_| bad());
        let kind = match parts.as_slice() {
            ["identity"] | ["iid"] => CovarianceKind::Identity,
            ["ar" | "autoregressive", lambda] => CovarianceKind::Autoregressive { lambda: num(lambda)? },
            ["block", k, r] => CovarianceKind::Block { k: int(k)? as usize, r: num(r)? },
            ["random-blocks" | "random_blocks", n, lo, hi, r, rest @ ..] if rest.len() <= 1 => {
                CovarianceKind::RandomBlocks {
                    n_blocks: int(n)? as usize,
                    size_min: int(lo)? as usize,
                    size_max: int(hi)? as usize,
                    r: num(r)?,
                    seed: rest.first().map(|s| int(s)).transpose()?.unwrap_or(0),
                }
            }
            ["factor", tau, rest @ ..] if rest.len() <= 1 => CovarianceKind::Factor {
                tau: num(tau)?,
                h_seed: rest.first().map(|s| int(s)).transpose()?.unwrap_or(0),
            },
            _ => return Err(bad()),
        };
        Self::new(m, kind)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m;
        if m < 2 {
            return domain(format!("covariance dimension must be at least 2, got {m}"));
        }
        match &self.kind {
            CovarianceKind::Identity => {}
            CovarianceKind::Autoregressive { lambda } => {
                if lambda.is_nan() || lambda.abs() >= 1.0 {
                    return domain(format!("autoregressive lambda must lie in (-1, 1), got {lambda}"));
                }
            }
            CovarianceKind::Block { k, r } => {
                if *k == 0 || *k > m {
                    return domain(format!("block size must lie in 1..={m}, got {k}"));
                }
                check_block_r(*k, *r)?;
            }
            CovarianceKind::RandomBlocks { .. } => {
                let sizes = self.block_sizes()?.unwrap_or_default();
                let largest = sizes.iter().copied().max().unwrap_or(1);
                if let CovarianceKind::RandomBlocks { r, .. } = &self.kind {
                    check_block_r(largest, *r)?;
                }
            }
            CovarianceKind::Factor { tau, .. } => {
                if !(*tau > 0.0 && *tau < 1.0) {
                    return domain(format!("factor tau must lie in (0, 1), got {tau}"));
                }
            }
            CovarianceKind::Explicit { matrix } => {
                for (i, row) in matrix.iter().enumerate() {
                    if row.len() != m {
                        return domain(format!("row {i} has {} entries, expected {m}", row.len()));
                    }
                    if (row[i] - 1.0).abs() > 1e-12 {
                        return domain(format!("diagonal entry {i} is {}, expected 1", row[i]));
                    }
                    for (j, &v) in row.iter().enumerate() {
                        if !v.is_finite() || (v - matrix[j][i]).abs() > 1e-12 {
                            return domain(format!("matrix is not symmetric/finite at ({i}, {j})"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Block sizes for the block kinds, `None` otherwise.
    pub fn block_sizes(&self) -> Result<Option<Vec<usize>>> {
        let m = self.m;
        match &self.kind {
            CovarianceKind::Block { k, .. } => {
                let mut sizes = vec![*k; m / k];
                if !m.is_multiple_of(*k) {
                    sizes.push(m % k);
                }
                Ok(Some(sizes))
            }
            CovarianceKind::RandomBlocks { n_blocks, size_min, size_max, seed, .. } => {
                if *n_blocks == 0 || *size_min == 0 || size_min > size_max {
                    return domain("random blocks need n_blocks >= 1 and 1 <= size_min <= size_max");
                }
                let mut rng = substream(*seed, DOMAIN_BLOCK_SIZES, 0);
                let raw: Vec<usize> = (0..*n_blocks).map(|_| rng.random_range(*size_min..=*size_max)).collect();
                let total: usize = raw.iter().sum();
                let mut sizes: Vec<usize> = raw[..raw.len() - 1].iter().map(|&b| b * m / total).collect();
                let used: usize = sizes.iter().sum();
                sizes.push(m - used);
                if sizes.contains(&0) {
                    return domain(format!("m = {m} is too small for {n_blocks} random blocks"));
                }
                Ok(Some(sizes))
            }
            _ => Ok(None),
        }
    }

    /// A copy with the structural seed replaced (random blocks / factor loadings).
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out.kind {
            CovarianceKind::RandomBlocks { seed: s, .. } => *s = seed,
            CovarianceKind::Factor { h_seed, .. } => *h_seed = seed,
            _ => {}
        }
        out
    }

    /// True when the structure depends on a seed.
    pub fn is_seeded(&self) -> bool {
        matches!(self.kind, CovarianceKind::RandomBlocks { .. } | CovarianceKind::Factor { .. })
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        match &self.kind {
            CovarianceKind::Identity => "identity".into(),
            CovarianceKind::Autoregressive { lambda } => format!("ar:{lambda}"),
            CovarianceKind::Block { k, r } => format!("block:{k}:{r}"),
            CovarianceKind::RandomBlocks { n_blocks, size_min, size_max, r, seed } => {
                format!("random-blocks:{n_blocks}:{size_min}:{size_max}:{r}:{seed}")
            }
            CovarianceKind::Factor { tau, h_seed } => format!("factor:{tau}:{h_seed}"),
            CovarianceKind::Explicit { .. } => "explicit".into(),
        }
    }
}

fn check_block_r(k: usize, r: f64) -> Result<()> {
    let lower = if k > 1 { -1.0 / (k as f64 - 1.0) } else { f64::NEG_INFINITY };
    if !(r > lower && r < 1.0) {
        return domain(format!("block correlation r = {r} must lie in ({lower}, 1) for blocks of size {k}"));
    }
    Ok(())
}

#[derive(Clone, Debug)]
enum Structure {
    Identity,
    Autoregressive { lambda: f64, innovation_sd: f64 },
    Blocks { starts: Vec<usize>, sizes: Vec<usize>, r: f64 },
    Factor { loading: Vec<f64>, scale: Vec<f64> },
    Dense { sigma: DMatrix<f64> },
}

impl Structure {
    fn from_model(model: &CovarianceModel) -> Result<Self> {
        model.validate()?;
        let m = model.m;
        Ok(match &model.kind {
            CovarianceKind::Identity => Structure::Identity,
            CovarianceKind::Autoregressive { lambda } => Structure::Autoregressive {
                lambda: *lambda,
                innovation_sd: (1.0 - lambda * lambda).sqrt(),
            },
            CovarianceKind::Block { r, .. } | CovarianceKind::RandomBlocks { r, .. } => {
                let sizes = model.block_sizes()?.expect("block kinds have sizes");
                let starts = sizes
                    .iter()
                    .scan(0, |acc, &b| {
                        let start = *acc;
                        *acc += b;
                        Some(start)
                    })
                    .collect();
                Structure::Blocks { starts, sizes, r: *r }
            }
            CovarianceKind::Factor { tau, h_seed } => {
                let mut rng = substream(*h_seed, DOMAIN_FACTOR_LOADINGS, 0);
                let h: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                let loading = h.iter().map(|&hi| tau.sqrt() * hi).collect();
                let scale = h.iter().map(|&hi| 1.0 / (1.0 + tau * hi * hi).sqrt()).collect();
                Structure::Factor { loading, scale }
            }
            CovarianceKind::Explicit { matrix } => {
                Structure::Dense { sigma: DMatrix::from_fn(m, m, |i, j| matrix[i][j]) }
            }
        })
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 1.0;
        }
        match self {
            Structure::Identity => 0.0,
            Structure::Autoregressive { lambda, .. } => lambda.powi(i.abs_diff(j) as i32),
            Structure::Blocks { starts, r, .. } => {
                let block = |x: usize| starts.partition_point(|&s| s <= x);
                if block(i) == block(j) {
                    *r
                } else {
                    0.0
                }
            }
            Structure::Factor { loading, scale } => loading[i] * loading[j] * scale[i] * scale[j],
            Structure::Dense { sigma } => sigma[(i, j)],
        }
    }

    fn l1_norm(&self, m: usize) -> f64 {
        match self {
            Structure::Identity => m as f64,
            Structure::Autoregressive { lambda, .. } => {
                let a = lambda.abs();
                let mut off = 0.0;
                let mut power = 1.0;
                for d in 1..m {
                    power *= a;
                    if power == 0.0 {
                        break;
                    }
                    off += (m - d) as f64 * power;
                }
                m as f64 + 2.0 * off
            }
            Structure::Blocks { sizes, r, .. } => sizes
                .iter()
                .map(|&b| {
                    let b = b as f64;
                    b + b * (b - 1.0) * r.abs()
                })
                .sum(),
            Structure::Factor { loading, scale } => {
                // |σ_ij| = a_i a_j off the diagonal with a_i = |loading_i| scale_i.
                let (sum, sum_sq) = loading.iter().zip(scale).fold((0.0, 0.0), |(s, q), (l, c)| {
                    let a = l.abs() * c;
                    (s + a, q + a * a)
                });
                m as f64 + sum * sum - sum_sq
            }
            Structure::Dense { sigma } => sigma.iter().map(|v| v.abs()).sum(),
        }
    }
}

/// Entry access to Σ plus an exact Gaussian sampler with correlation Σ.
#[derive(Clone, Debug)]
pub struct CovarianceSampler {
    m: usize,
    structure: Structure,
    dense_factor: Option<DMatrix<f64>>,
}

/// Prepare `model` for sampling. Explicit matrices are Cholesky-factored, with a
/// symmetric eigendecomposition fallback for singular but PSD input.
pub fn build_covariance(model: &CovarianceModel) -> Result<CovarianceSampler> {
    let structure = Structure::from_model(model)?;
    let dense_factor = match &structure {
        Structure::Dense { sigma } => Some(dense_factor(sigma)?),
        _ => None,
    };
    Ok(CovarianceSampler { m: model.m, structure, dense_factor })
}

fn dense_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = sigma.clone().cholesky() {
        return Ok(chol.l());
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let n = sigma.nrows();
    let min = eig.eigenvalues.min();
    if min < -1e-10 * n as f64 {
        return Err(FncError::Decomposition(format!(
            "explicit covariance is not positive semidefinite (smallest eigenvalue {min:e})"
        )));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

impl CovarianceSampler {
    pub fn m(&self) -> usize {
        self.m
    }

    /// `σ_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.structure.entry(i, j)
    }

    /// Overwrite `out` with a draw from `N(0, Σ)`.
    pub fn fill_noise<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        assert_eq!(out.len(), self.m, "output length must equal m");
        match &self.structure {
            Structure::Identity => out.iter_mut().for_each(|x| *x = rng.sample(StandardNormal)),
            Structure::Autoregressive { lambda, innovation_sd } => {
                let mut prev: f64 = rng.sample(StandardNormal);
                out[0] = prev;
                for x in out.iter_mut().skip(1) {
                    let g: f64 = rng.sample(StandardNormal);
                    prev = lambda * prev + innovation_sd * g;
                    *x = prev;
                }
            }
            Structure::Blocks { starts, sizes, r } => {
                for (&start, &size) in starts.iter().zip(sizes) {
                    let block = &mut out[start..start + size];
                    let k = size as f64;
                    // z_i = a g_i + b Σ_l g_l has unit variance and correlation r.
                    let a = (1.0 - r).sqrt();
                    let b = (-a + (1.0 + (k - 1.0) * r).sqrt()) / k;
                    let mut total = 0.0;
                    for x in block.iter_mut() {
                        let g: f64 = rng.sample(StandardNormal);
                        total += g;
                        *x = g;
                    }
                    for x in block.iter_mut() {
                        *x = a * *x + b * total;
                    }
                }
            }
            Structure::Factor { loading, scale } => {
                let common: f64 = rng.sample(StandardNormal);
                for ((x, l), c) in out.iter_mut().zip(loading).zip(scale) {
                    let g: f64 = rng.sample(StandardNormal);
                    *x = (l * common + g) * c;
                }
            }
            Structure::Dense { .. } => {
                let lower = self.dense_factor.as_ref().expect("dense structures are factored");
                let g = DVector::from_fn(self.m, |_, _| rng.sample(StandardNormal));
                out.copy_from_slice((lower * g).as_slice());
            }
        }
    }

    /// Overwrite `out` with `mu + L g`.
    pub fn fill_sample<R: Rng + ?Sized>(&self, rng: &mut R, mu: &[f64], out: &mut [f64]) {
        self.fill_noise(rng, out);
        for (x, m) in out.iter_mut().zip(mu) {
            *x += m;
        }
    }

    /// One draw of `N(mu, Σ)` from the stream seeded by `seed`, on the z-scale.
    pub fn sample_mvn(&self, mu: &[f64], seed: u64, sidedness: Sidedness) -> Result<StatisticVector> {
        if mu.len() != self.m {
            return domain(format!("mean vector has length {}, expected {}", mu.len(), self.m));
        }
        let mut rng = substream(seed, crate::rng::DOMAIN_NOISE, 0);
        let mut z = vec![0.0; self.m];
        self.fill_sample(&mut rng, mu, &mut z);
        StatisticVector::z(z, sidedness)
    }

    /// ‖Σ‖₁ from the structure's closed form.
    pub fn l1_norm(&self) -> f64 {
        self.structure.l1_norm(self.m)
    }

    /// ‖Σ‖₁ by summing all m² entries.
    pub fn l1_norm_direct(&self) -> f64 {
        (0..self.m).map(|i| (0..self.m).map(|j| self.entry(i, j).abs()).sum::<f64>()).sum()
    }
}

/// ‖Σ‖₁ = Σ_ij |σ_ij| without factoring Σ.
pub fn sigma_l1_norm(model: &CovarianceModel) -> Result<f64> {
    Ok(Structure::from_model(model)?.l1_norm(model.m))
}

/// ‖Σ‖₁ by direct O(m²) summation over entries.
pub fn sigma_l1_norm_direct(model: &CovarianceModel) -> Result<f64> {
    let structure = Structure::from_model(model)?;
    let m = model.m;
    Ok((0..m).map(|i| (0..m).map(|j| structure.entry(i, j).abs()).sum::<f64>()).sum())
}
