//! Regression-based backward sweep, Picard outer iteration, truncation
//! ladder for merely integrable data, class-(D) norm estimation and
//! uniqueness diagnostics.
//!
//! Each Picard step solves the linear BSDE with the generator frozen at
//! the previous iterate, so a sweep is a single backward pass with no
//! implicit solve inside a time step. The conditional expectations are
//! least-squares Monte Carlo projections; the Z estimator regresses the
//! martingale increment of the centered continuation value, which has the
//! same exact conditional expectation as `Y(t_{i+1}) ΔWᵀ / Δt` with far
//! less variance.

use crate::delay::{Channel, SegmentFrame, TimeGrid};
use crate::error::{Error, Result};
use crate::model::{evaluate_generator, DelayedProblem};
use crate::stochastics::{
    chunked_mean, conditional_expectation, mean_and_stderr, PathEnsemble, RegressionBasis,
};

/// Per-iteration convergence record.
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `E[sup_t |ΔY|]` between successive iterates.
    pub dy_sup_norm: f64,
    /// `E[(∫ |ΔZ|² dt)^{1/2}]` between successive iterates.
    pub dz_h_norm: f64,
    /// Ratio of successive `dy_sup_norm`s; 0 on the first iteration.
    pub contraction_ratio: f64,
}

/// Grid-indexed `(Y, Z)` path arrays plus iteration history.
///
/// Layout: `y[m * (N+1) + i]`, `z[(m * N + i) * d + c]`.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dim: usize,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub truncation_level: Option<f64>,
    pub converged: bool,
    pub seed: u64,
    pub chunk_size: usize,
}

impl DiscreteSolution {
    /// The all-zero start `(Y⁰, Z⁰) = (0, 0)`.
    pub fn zero(ensemble: &PathEnsemble) -> Self {
        Self::constant(ensemble, 0.0)
    }

    /// Constant-Y start with `Z ≡ 0`.
    pub fn constant(ensemble: &PathEnsemble, value: f64) -> Self {
        let m = ensemble.n_paths();
        let n = ensemble.grid().n_steps();
        let d = ensemble.dim();
        DiscreteSolution {
            n_paths: m,
            n_steps: n,
            dim: d,
            y: vec![value; m * (n + 1)],
            z: vec![0.0; m * n * d],
            history: Vec::new(),
            truncation_level: None,
            converged: false,
            seed: ensemble.seed(),
            chunk_size: ensemble.chunk_size(),
        }
    }

    pub fn y(&self, m: usize, i: usize) -> f64 {
        self.y[m * (self.n_steps + 1) + i]
    }

    pub fn z(&self, m: usize, i: usize, c: usize) -> f64 {
        self.z[(m * self.n_steps + i) * self.dim + c]
    }

    /// All paths' Y at one time index.
    pub fn y_column(&self, i: usize) -> Vec<f64> {
        (0..self.n_paths).map(|m| self.y(m, i)).collect()
    }

    fn y_path(&self, m: usize) -> &[f64] {
        &self.y[m * (self.n_steps + 1)..(m + 1) * (self.n_steps + 1)]
    }

    fn z_path(&self, m: usize) -> &[f64] {
        &self.z[m * self.n_steps * self.dim..(m + 1) * self.n_steps * self.dim]
    }

    /// `E[sup_t |Y - other.Y|]`.
    pub fn sup_gap(&self, other: &DiscreteSolution) -> f64 {
        let per_path: Vec<f64> = (0..self.n_paths)
            .map(|m| {
                (0..=self.n_steps)
                    .map(|i| (self.y(m, i) - other.y(m, i)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        chunked_mean(&per_path, self.chunk_size)
    }

    /// `E[(∫ |Z - other.Z|² dt)^{1/2}]`.
    pub fn z_h_gap(&self, other: &DiscreteSolution, dt: f64) -> f64 {
        let per_path: Vec<f64> = (0..self.n_paths)
            .map(|m| {
                let q: f64 = (0..self.n_steps)
                    .map(|i| {
                        (0..self.dim)
                            .map(|c| {
                                let dz = self.z(m, i, c) - other.z(m, i, c);
                                dz * dz
                            })
                            .sum::<f64>()
                            * dt
                    })
                    .sum();
                q.sqrt()
            })
            .collect();
        chunked_mean(&per_path, self.chunk_size)
    }
}

/// Radial truncation `q_n(x) = n x / (|x| ∨ n)`: identity below level `n`,
/// projection onto the ball of radius `n` above it.
pub fn truncate_scalar(x: f64, n: f64) -> f64 {
    assert!(n > 0.0, "truncation level must be positive");
    // branch instead of computing n·x/(|x| ∨ n) so the identity below the
    // level is bit-exact
    if x.abs() <= n {
        x
    } else {
        n.copysign(x)
    }
}

/// Vector form of the radial truncation.
pub fn truncate(x: &[f64], n: f64) -> Vec<f64> {
    assert!(n > 0.0, "truncation level must be positive");
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= n {
        x.to_vec()
    } else {
        let scale = n / norm;
        x.iter().map(|v| v * scale).collect()
    }
}

fn sweep_internal(
    problem: &DelayedProblem,
    ensemble: &PathEnsemble,
    frozen: &DiscreteSolution,
    terminal: &[f64],
    basis: &RegressionBasis,
    truncation: Option<f64>,
) -> Result<DiscreteSolution> {
    let m_paths = ensemble.n_paths();
    let n = ensemble.grid().n_steps();
    let d = ensemble.dim();
    let dt = ensemble.grid().dt();
    if terminal.len() != m_paths {
        return Err(Error::invalid("terminal samples must match the ensemble"));
    }
    if frozen.n_paths != m_paths || frozen.n_steps != n || frozen.dim != d {
        return Err(Error::invalid("frozen solution shape mismatch"));
    }

    let mut out = DiscreteSolution::zero(ensemble);
    for m in 0..m_paths {
        out.y[m * (n + 1) + n] = terminal[m];
    }

    // generator term is frozen, hence F_{t_i}-measurable: compute it per
    // (path, time) once and add outside the projection
    let mut gen_term = vec![0.0; m_paths * n];
    for m in 0..m_paths {
        let y_path = frozen.y_path(m);
        let z_path = frozen.z_path(m);
        for i in 0..n {
            let fy = SegmentFrame::contiguous(y_path, i, Channel::Y);
            let fz: Vec<SegmentFrame<'_>> = (0..d)
                .map(|c| SegmentFrame::new(&z_path[c..], d, i, Channel::Z))
                .collect();
            let mut f_val = evaluate_generator(problem, i as i64, &fy, &fz).map_err(|e| {
                Error::numerical(
                    format!("backward_sweep path {m} time index {i}"),
                    e.to_string(),
                )
            })?;
            if let Some(level) = truncation {
                f_val = truncate_scalar(f_val, level);
            }
            gen_term[m * n + i] = f_val;
        }
    }

    let mut y_next: Vec<f64> = terminal.to_vec();
    let mut targets = vec![0.0; m_paths];
    for i in (0..n).rev() {
        let cont = conditional_expectation(&y_next, ensemble, i, basis)?;
        for c in 0..d {
            for m in 0..m_paths {
                targets[m] = (y_next[m] - cont[m]) * ensemble.increment(m, i, c) / dt;
            }
            let zfit = conditional_expectation(&targets, ensemble, i, basis)?;
            for m in 0..m_paths {
                out.z[(m * n + i) * d + c] = zfit[m];
            }
        }
        for m in 0..m_paths {
            let y_i = cont[m] + gen_term[m * n + i] * dt;
            if !y_i.is_finite() {
                return Err(Error::numerical(
                    format!("backward_sweep path {m} time index {i}"),
                    "non-finite Y value",
                ));
            }
            out.y[m * (n + 1) + i] = y_i;
            y_next[m] = y_i;
        }
    }
    out.truncation_level = truncation;
    Ok(out)
}

/// One Picard step: solve the BSDE with the generator frozen at `frozen`.
pub fn backward_sweep(
    problem: &DelayedProblem,
    ensemble: &PathEnsemble,
    frozen: &DiscreteSolution,
    terminal: &[f64],
    basis: &RegressionBasis,
) -> Result<DiscreteSolution> {
    sweep_internal(problem, ensemble, frozen, terminal, basis, None)
}

/// Picard iteration from an arbitrary start, recording per-iteration norms
/// and contraction ratios. Divergence is reported via `converged = false`,
/// never masked.
#[allow(clippy::too_many_arguments)]
pub fn picard_solve_from(
    problem: &DelayedProblem,
    ensemble: &PathEnsemble,
    terminal: &[f64],
    basis: &RegressionBasis,
    start: DiscreteSolution,
    max_iters: usize,
    tol: f64,
    truncation: Option<f64>,
) -> Result<DiscreteSolution> {
    if !(tol > 0.0) {
        return Err(Error::invalid("picard tolerance must be positive"));
    }
    if max_iters == 0 {
        return Err(Error::invalid("picard needs at least one iteration"));
    }
    let dt = ensemble.grid().dt();
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut prev = start;
    let mut converged = false;
    let mut current = prev.clone();
    for it in 1..=max_iters {
        current = sweep_internal(problem, ensemble, &prev, terminal, basis, truncation)?;
        let dy = current.sup_gap(&prev);
        let dz = current.z_h_gap(&prev, dt);
        if !dy.is_finite() || !dz.is_finite() {
            return Err(Error::numerical(
                format!("picard_solve iteration {it}"),
                format!("non-finite norms dy={dy} dz={dz}"),
            ));
        }
        let ratio = match history.last() {
            Some(last) if last.dy_sup_norm > 0.0 => dy / last.dy_sup_norm,
            _ => 0.0,
        };
        history.push(IterationRecord {
            iteration: it,
            dy_sup_norm: dy,
            dz_h_norm: dz,
            contraction_ratio: ratio,
        });
        if dy <= tol && dz <= tol {
            converged = true;
            break;
        }
        prev = current.clone();
    }
    current.history = history;
    current.converged = converged;
    Ok(current)
}

/// Picard iteration from the zero start `(Y⁰, Z⁰) = (0, 0)`.
pub fn picard_solve(
    problem: &DelayedProblem,
    ensemble: &PathEnsemble,
    terminal: &[f64],
    basis: &RegressionBasis,
    max_iters: usize,
    tol: f64,
) -> Result<DiscreteSolution> {
    picard_solve_from(
        problem,
        ensemble,
        terminal,
        basis,
        DiscreteSolution::zero(ensemble),
        max_iters,
        tol,
        None,
    )
}

/// Families of stopping times for the class-(D) norm. Each member decides
/// at `t_i` using only path data up to `t_i`.
#[derive(Debug, Clone)]
pub enum StoppingFamily {
    /// All deterministic grid times (always included by `class_d_norm`).
    DeterministicTimes,
    /// First time `|Y| ≥ level`, capped at `T`.
    AbsYHitting { levels: Vec<f64> },
    /// First boundary where the running sum `Σ |Z_i|² Δt ≥ level`, capped
    /// at `T`; the crossing is checked after each step.
    ZQuadVarHitting { levels: Vec<f64> },
}

/// Empirical class-(D) norm: the largest Monte Carlo estimate of `E|Y(τ)|`
/// over the supplied stopping families plus all deterministic grid times.
pub fn class_d_norm(
    solution: &DiscreteSolution,
    families: &[StoppingFamily],
    grid: &TimeGrid,
) -> f64 {
    let m_paths = solution.n_paths;
    let n = solution.n_steps;
    let dt = grid.dt();
    let chunk = solution.chunk_size;

    let mut best = f64::NEG_INFINITY;
    // deterministic grid times
    for i in 0..=n {
        let abs: Vec<f64> = (0..m_paths).map(|m| solution.y(m, i).abs()).collect();
        best = best.max(chunked_mean(&abs, chunk));
    }
    for family in families {
        match family {
            StoppingFamily::DeterministicTimes => {}
            StoppingFamily::AbsYHitting { levels } => {
                for level in levels {
                    let vals: Vec<f64> = (0..m_paths)
                        .map(|m| {
                            let tau = (0..=n)
                                .find(|&i| solution.y(m, i).abs() >= *level)
                                .unwrap_or(n);
                            solution.y(m, tau).abs()
                        })
                        .collect();
                    best = best.max(chunked_mean(&vals, chunk));
                }
            }
            StoppingFamily::ZQuadVarHitting { levels } => {
                for level in levels {
                    let vals: Vec<f64> = (0..m_paths)
                        .map(|m| {
                            let mut running = 0.0;
                            let mut tau = n;
                            for i in 0..n {
                                let q: f64 = (0..solution.dim)
                                    .map(|c| {
                                        let z = solution.z(m, i, c);
                                        z * z
                                    })
                                    .sum();
                                running += q * dt;
                                if running >= *level {
                                    tau = i + 1;
                                    break;
                                }
                            }
                            solution.y(m, tau).abs()
                        })
                        .collect();
                    best = best.max(chunked_mean(&vals, chunk));
                }
            }
        }
    }
    best
}

/// Per-β sides of the tail-moment inequality bounding successive truncation
/// gaps.
#[derive(Debug, Clone, Copy)]
pub struct TailMomentCheck {
    pub beta: f64,
    /// `E[sup_t |ΔY|^β]` between adjacent levels.
    pub lhs: f64,
    pub lhs_stderr: f64,
    /// `(1/(1-β)) (E[|ξ| 1_{|ξ|>n} + ∫|f(s,0,0)| 1_{|ξ|>n} ds])^β`, the
    /// Doob-type bound for β ∈ (0,1) with the power outside the
    /// expectation. The power must sit outside: `sup_t |ΔY(t)| ≥ |ΔY(0)|`
    /// and `ΔY(0)` already equals the expected tail quantity, so the
    /// β-moment of the tail (smaller by Jensen) could not dominate.
    pub rhs: f64,
    pub rhs_stderr: f64,
}

/// Gap diagnostics between two adjacent truncation levels.
#[derive(Debug, Clone)]
pub struct LevelGap {
    pub level: f64,
    pub next_level: f64,
    /// `E[sup_t |Y^{(n_j)} - Y^{(n_{j+1})}|]`.
    pub sup_gap: f64,
    /// `max_i E|ΔY(t_i)|`, the deterministic-time class-(D) gap.
    pub l1_gap: f64,
    /// Standard error of the mean at the maximizing time.
    pub l1_gap_stderr: f64,
    /// Monte Carlo estimate of the tail moment `E[|ξ|1 + ∫|f|1 ds]`.
    pub tail_moment: f64,
    pub tail_moment_stderr: f64,
    pub beta_checks: Vec<TailMomentCheck>,
}

/// Report of the truncation ladder: one solve per level with the data
/// clipped by `q_n`, plus pairwise gap diagnostics.
#[derive(Debug)]
pub struct LadderReport {
    pub levels: Vec<f64>,
    pub solutions: Vec<DiscreteSolution>,
    pub gaps: Vec<LevelGap>,
}

/// Solve the problem at each truncation level `ξ_n = q_n(ξ)`, `f_n = q_n(f)`
/// and report the decay of the gaps between adjacent levels.
#[allow(clippy::too_many_arguments)]
pub fn truncation_ladder(
    problem: &DelayedProblem,
    levels: &[f64],
    ensemble: &PathEnsemble,
    terminal: &[f64],
    basis: &RegressionBasis,
    max_iters: usize,
    tol: f64,
    betas: &[f64],
) -> Result<LadderReport> {
    if levels.is_empty() {
        return Err(Error::invalid("truncation ladder needs at least one level"));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) || levels[0] <= 0.0 {
        return Err(Error::invalid(
            "truncation levels must be positive and strictly increasing",
        ));
    }
    if betas.iter().any(|b| !(0.0..1.0).contains(b)) {
        return Err(Error::invalid("beta exponents must lie in (0,1)"));
    }

    let chunk = ensemble.chunk_size();
    let dt = ensemble.grid().dt();
    let f0_abs_integral: f64 = problem.f_at_zero[..problem.grid.n_steps()]
        .iter()
        .map(|f| f.abs())
        .sum::<f64>()
        * dt;

    let mut solutions = Vec::with_capacity(levels.len());
    for &level in levels {
        let xi_n: Vec<f64> = terminal.iter().map(|x| truncate_scalar(*x, level)).collect();
        let mut sol = picard_solve_from(
            problem,
            ensemble,
            &xi_n,
            basis,
            DiscreteSolution::zero(ensemble),
            max_iters,
            tol,
            Some(level),
        )?;
        sol.truncation_level = Some(level);
        solutions.push(sol);
    }

    let mut gaps = Vec::new();
    for j in 0..levels.len().saturating_sub(1) {
        let a = &solutions[j];
        let b = &solutions[j + 1];
        let n_level = levels[j];

        let per_path_sup: Vec<f64> = (0..a.n_paths)
            .map(|m| {
                (0..=a.n_steps)
                    .map(|i| (a.y(m, i) - b.y(m, i)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let sup_gap = chunked_mean(&per_path_sup, chunk);

        let mut l1_gap = f64::NEG_INFINITY;
        let mut l1_se = 0.0;
        for i in 0..=a.n_steps {
            let abs: Vec<f64> = (0..a.n_paths)
                .map(|m| (a.y(m, i) - b.y(m, i)).abs())
                .collect();
            let (mean, se) = mean_and_stderr(&abs, chunk);
            if mean > l1_gap {
                l1_gap = mean;
                l1_se = se;
            }
        }

        let tail: Vec<f64> = terminal
            .iter()
            .map(|x| {
                if x.abs() > n_level {
                    x.abs() + f0_abs_integral
                } else {
                    0.0
                }
            })
            .collect();
        let (tail_moment, tail_se) = mean_and_stderr(&tail, chunk);

        let beta_checks = betas
            .iter()
            .map(|&beta| {
                let lhs_vals: Vec<f64> =
                    per_path_sup.iter().map(|s| s.powf(beta)).collect();
                let (lhs, lhs_se) = mean_and_stderr(&lhs_vals, chunk);
                // delta method for the stderr of (E[tail])^β / (1-β)
                let rhs = tail_moment.powf(beta) / (1.0 - beta);
                let rhs_se = if tail_moment > 0.0 {
                    beta * tail_moment.powf(beta - 1.0) * tail_se / (1.0 - beta)
                } else {
                    0.0
                };
                TailMomentCheck {
                    beta,
                    lhs,
                    lhs_stderr: lhs_se,
                    rhs,
                    rhs_stderr: rhs_se,
                }
            })
            .collect();

        gaps.push(LevelGap {
            level: n_level,
            next_level: levels[j + 1],
            sup_gap,
            l1_gap,
            l1_gap_stderr: l1_se,
            tail_moment,
            tail_moment_stderr: tail_se,
            beta_checks,
        });
    }

    Ok(LadderReport {
        levels: levels.to_vec(),
        solutions,
        gaps,
    })
}

/// Localized gap at one quadratic-variation level.
#[derive(Debug, Clone, Copy)]
pub struct LocalizedGap {
    pub level: f64,
    /// `E[sup_{t ≤ τ_n} |ΔY|]` where `τ_n` is the first boundary at which
    /// the combined running sum `Σ (|Z|² + |Z'|²) Δt` reaches the level.
    pub gap: f64,
}

/// Pairwise gap between two Picard runs from different starts.
#[derive(Debug, Clone)]
pub struct PairGap {
    pub start_a: usize,
    pub start_b: usize,
    pub sup_gap: f64,
    pub localized: Vec<LocalizedGap>,
}

#[derive(Debug)]
pub struct UniquenessReport {
    pub solutions: Vec<DiscreteSolution>,
    pub pairs: Vec<PairGap>,
}

/// Run the Picard iteration from several distinct starts and measure how
/// close the final solutions are, globally and localized at the discrete
/// stopping times `τ_n`.
#[allow(clippy::too_many_arguments)]
pub fn uniqueness_probe(
    problem: &DelayedProblem,
    ensemble: &PathEnsemble,
    terminal: &[f64],
    basis: &RegressionBasis,
    starts: Vec<DiscreteSolution>,
    max_iters: usize,
    tol: f64,
    levels: &[f64],
) -> Result<UniquenessReport> {
    if starts.len() < 2 {
        return Err(Error::invalid("uniqueness probe needs at least two starts"));
    }
    let dt = ensemble.grid().dt();
    let chunk = ensemble.chunk_size();
    let solutions: Vec<DiscreteSolution> = starts
        .into_iter()
        .map(|s| {
            picard_solve_from(problem, ensemble, terminal, basis, s, max_iters, tol, None)
        })
        .collect::<Result<_>>()?;

    let mut pairs = Vec::new();
    for a_idx in 0..solutions.len() {
        for b_idx in a_idx + 1..solutions.len() {
            let a = &solutions[a_idx];
            let b = &solutions[b_idx];
            let sup_gap = a.sup_gap(b);
            let localized = levels
                .iter()
                .map(|&level| {
                    let per_path: Vec<f64> = (0..a.n_paths)
                        .map(|m| {
                            let mut running = 0.0;
                            let mut tau = a.n_steps;
                            for i in 0..a.n_steps {
                                let q: f64 = (0..a.dim)
                                    .map(|c| {
                                        let za = a.z(m, i, c);
                                        let zb = b.z(m, i, c);
                                        za * za + zb * zb
                                    })
                                    .sum();
                                running += q * dt;
                                if running >= level {
                                    tau = i + 1;
                                    break;
                                }
                            }
                            (0..=tau)
                                .map(|i| (a.y(m, i) - b.y(m, i)).abs())
                                .fold(0.0, f64::max)
                        })
                        .collect();
                    LocalizedGap {
                        level,
                        gap: chunked_mean(&per_path, chunk),
                    }
                })
                .collect();
            pairs.push(PairGap {
                start_a: a_idx,
                start_b: b_idx,
                sup_gap,
                localized,
            });
        }
    }
    Ok(UniquenessReport { solutions, pairs })
}
