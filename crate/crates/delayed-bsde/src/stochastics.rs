//! Seeded Brownian simulation and regression-based conditional expectation.
//!
//! Conditional expectations are estimated Longstaff-Schwartz style: project
//! per-path targets onto basis functions of the current Brownian state and
//! read the fitted values back per path. Every operation is a pure function
//! of `(inputs, seed, chunk size)`; reductions are chunked so summation
//! order, hence results, are bit-reproducible.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::delay::TimeGrid;
use crate::error::{Error, Result};

/// Sum with a fixed chunked accumulation order.
pub(crate) fn chunked_sum(values: &[f64], chunk_size: usize) -> f64 {
    let c = chunk_size.max(1);
    values.chunks(c).map(|ch| ch.iter().sum::<f64>()).sum()
}

pub(crate) fn chunked_mean(values: &[f64], chunk_size: usize) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    chunked_sum(values, chunk_size) / values.len() as f64
}

/// Mean and standard error of the mean, chunk-deterministic.
pub(crate) fn mean_and_stderr(values: &[f64], chunk_size: usize) -> (f64, f64) {
    let n = values.len();
    if n < 2 {
        return (chunked_mean(values, chunk_size), 0.0);
    }
    let mean = chunked_mean(values, chunk_size);
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = chunked_sum(&sq, chunk_size) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// `M` simulated Brownian trajectories on a time grid.
///
/// Layout: `increments[(m * N + i) * d + c]` is `ΔW_i` component `c` of
/// path `m`; `values[(m * (N+1) + i) * d + c]` is `W(t_i)`.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    grid: TimeGrid,
    n_paths: usize,
    dim: usize,
    seed: u64,
    chunk_size: usize,
    increments: Vec<f64>,
    values: Vec<f64>,
}

/// Simulate a `dim`-dimensional standard Brownian motion on the grid.
///
/// Each path uses its own ChaCha stream, so the ensemble is deterministic
/// in `(seed, grid, n_paths, dim)` regardless of how callers chunk later
/// reductions.
pub fn simulate(
    grid: &TimeGrid,
    n_paths: usize,
    dim: usize,
    seed: u64,
    chunk_size: usize,
) -> Result<PathEnsemble> {
    if n_paths == 0 {
        return Err(Error::invalid("ensemble needs at least one path"));
    }
    if dim == 0 {
        return Err(Error::invalid("Brownian dimension must be at least 1"));
    }
    let n = grid.n_steps();
    let sqrt_dt = grid.dt().sqrt();
    let mut increments = vec![0.0; n_paths * n * dim];
    let mut values = vec![0.0; n_paths * (n + 1) * dim];
    for m in 0..n_paths {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(m as u64);
        for i in 0..n {
            for c in 0..dim {
                let g: f64 = StandardNormal.sample(&mut rng);
                let dw = g * sqrt_dt;
                increments[(m * n + i) * dim + c] = dw;
                let prev = values[(m * (n + 1) + i) * dim + c];
                values[(m * (n + 1) + i + 1) * dim + c] = prev + dw;
            }
        }
    }
    Ok(PathEnsemble {
        grid: grid.clone(),
        n_paths,
        dim,
        seed,
        chunk_size: chunk_size.max(1),
        increments,
        values,
    })
}

impl PathEnsemble {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    /// `ΔW_i` component `c` of path `m`.
    pub fn increment(&self, m: usize, i: usize, c: usize) -> f64 {
        self.increments[(m * self.grid.n_steps() + i) * self.dim + c]
    }

    /// `W(t_i)` component `c` of path `m`.
    pub fn value(&self, m: usize, i: usize, c: usize) -> f64 {
        self.values[(m * (self.grid.n_steps() + 1) + i) * self.dim + c]
    }

    pub fn terminal(&self, m: usize, c: usize) -> f64 {
        self.value(m, self.grid.n_steps(), c)
    }

    pub fn increments_raw(&self) -> &[f64] {
        &self.increments
    }

    pub fn values_raw(&self) -> &[f64] {
        &self.values
    }
}

/// Regression basis for the conditional-expectation estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressionBasis {
    /// Monomials of the Brownian state up to the given total degree.
    Polynomial { degree: usize, ridge: f64 },
    /// Indicator functions of equal-width bins of the first component.
    PiecewiseBins { bins: usize, ridge: f64 },
}

impl RegressionBasis {
    pub const DEFAULT_RIDGE: f64 = 1e-10;

    pub fn polynomial(degree: usize) -> Self {
        RegressionBasis::Polynomial {
            degree,
            ridge: Self::DEFAULT_RIDGE,
        }
    }

    pub fn piecewise_bins(bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("piecewise basis needs at least one bin"));
        }
        Ok(RegressionBasis::PiecewiseBins {
            bins,
            ridge: Self::DEFAULT_RIDGE,
        })
    }

    fn ridge(&self) -> f64 {
        match self {
            RegressionBasis::Polynomial { ridge, .. } => *ridge,
            RegressionBasis::PiecewiseBins { ridge, .. } => *ridge,
        }
    }
}

/// Multi-indices over `dim` variables with total degree at most `degree`,
/// in a fixed deterministic order.
fn multi_indices(dim: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, budget: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if dim == 0 {
            out.push(prefix.clone());
            return;
        }
        for k in 0..=budget {
            prefix.push(k);
            rec(dim - 1, budget - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, degree, &mut Vec::new(), &mut out);
    out
}

/// Evaluate the basis features for every path at time index `i`.
fn features(ensemble: &PathEnsemble, i: usize, basis: &RegressionBasis) -> (Vec<f64>, usize) {
    let m_paths = ensemble.n_paths();
    match basis {
        RegressionBasis::Polynomial { degree, .. } => {
            let idxs = multi_indices(ensemble.dim(), *degree);
            let nb = idxs.len();
            let mut feat = vec![0.0; m_paths * nb];
            for m in 0..m_paths {
                for (j, mi) in idxs.iter().enumerate() {
                    let mut v = 1.0;
                    for (c, &k) in mi.iter().enumerate() {
                        v *= ensemble.value(m, i, c).powi(k as i32);
                    }
                    feat[m * nb + j] = v;
                }
            }
            (feat, nb)
        }
        RegressionBasis::PiecewiseBins { bins, .. } => {
            let nb = *bins;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for m in 0..m_paths {
                let w = ensemble.value(m, i, 0);
                lo = lo.min(w);
                hi = hi.max(w);
            }
            let width = if hi > lo { (hi - lo) / nb as f64 } else { 1.0 };
            let mut feat = vec![0.0; m_paths * nb];
            for m in 0..m_paths {
                let w = ensemble.value(m, i, 0);
                let b = (((w - lo) / width) as usize).min(nb - 1);
                feat[m * nb + b] = 1.0;
            }
            (feat, nb)
        }
    }
}

/// Least-squares projection of per-path `targets` onto basis functions of
/// `W(t_i)`, returning the fitted value on every path. At time index 0 the
/// filtration is trivial and the plain (chunked) sample mean is returned.
pub fn conditional_expectation(
    targets: &[f64],
    ensemble: &PathEnsemble,
    time_index: usize,
    basis: &RegressionBasis,
) -> Result<Vec<f64>> {
    let m_paths = ensemble.n_paths();
    if targets.len() != m_paths {
        return Err(Error::invalid(format!(
            "expected one target per path ({m_paths}), got {}",
            targets.len()
        )));
    }
    if time_index > ensemble.grid().n_steps() {
        return Err(Error::invalid(format!(
            "time index {time_index} beyond grid"
        )));
    }
    if time_index == 0 {
        let mean = chunked_mean(targets, ensemble.chunk_size());
        return Ok(vec![mean; m_paths]);
    }

    let (feat, nb) = features(ensemble, time_index, basis);
    let chunk = ensemble.chunk_size();

    // normal equations accumulated chunk by chunk in path order
    let mut gram = DMatrix::<f64>::zeros(nb, nb);
    let mut rhs = DVector::<f64>::zeros(nb);
    let mut start = 0;
    while start < m_paths {
        let end = (start + chunk).min(m_paths);
        let mut g_loc = DMatrix::<f64>::zeros(nb, nb);
        let mut r_loc = DVector::<f64>::zeros(nb);
        for m in start..end {
            let row = &feat[m * nb..(m + 1) * nb];
            let y = targets[m];
            for a in 0..nb {
                r_loc[a] += row[a] * y;
                for b in a..nb {
                    g_loc[(a, b)] += row[a] * row[b];
                }
            }
        }
        gram += &g_loc;
        rhs += &r_loc;
        start = end;
    }
    for a in 0..nb {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }

    let trace: f64 = (0..nb).map(|a| gram[(a, a)]).sum();
    let lambda = basis.ridge() * trace / nb as f64;
    for a in 0..nb {
        gram[(a, a)] += lambda;
    }

    let chol = gram.cholesky().ok_or_else(|| {
        Error::numerical(
            format!("conditional_expectation at time index {time_index}"),
            "design matrix rank-deficient after ridge augmentation",
        )
    })?;
    let beta = chol.solve(&rhs);

    let mut fitted = vec![0.0; m_paths];
    for m in 0..m_paths {
        let row = &feat[m * nb..(m + 1) * nb];
        fitted[m] = row.iter().zip(beta.iter()).map(|(f, b)| f * b).sum();
    }
    Ok(fitted)
}

/// Empirical p-norm `((1/M) Σ |v|^p)^{1 ∧ 1/p}`.
pub fn mc_norm(values: &[f64], p: f64, chunk_size: usize) -> f64 {
    assert!(p > 0.0, "mc_norm needs p > 0");
    let pow: Vec<f64> = values.iter().map(|v| v.abs().powf(p)).collect();
    let mean = chunked_mean(&pow, chunk_size);
    mean.powf((1.0f64).min(1.0 / p))
}
