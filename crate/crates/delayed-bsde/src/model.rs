//! Problem definitions: terminal conditions, delayed generators, empirical
//! assumption checks and the portfolio-insurance scenario.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::delay::{delay_average, Channel, DelayMeasure, SegmentFrame, TimeGrid};
use crate::error::{Error, Result};
use crate::stochastics::{mean_and_stderr, PathEnsemble};

/// Terminal condition `ξ`, always measurable with respect to `W(T)` so the
/// discrete filtration contract holds path by path. Heavy-tail kinds map
/// the terminal Gaussian quantile through an inverse CDF, which keeps
/// `F_T`-measurability while producing merely integrable data.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminalCondition {
    Constant(f64),
    /// First component of `W(T)`.
    BrownianEndpoint,
    /// Bounded transform of `W(T)`: `lo + (hi - lo) Φ(W(T)/√T)`.
    Uniform { lo: f64, hi: f64 },
    /// Pareto variate `scale · (1 - U)^{-1/a}` with `U = Φ(W(T)/√T)`.
    /// Integrable iff `a > 1`; infinite variance for `a ≤ 2`.
    Pareto { tail_index: f64, scale: f64 },
    /// `floor + (ξ_base - floor)^+`, the portfolio-insurance target.
    PortfolioTarget {
        base: Box<TerminalCondition>,
        floor: f64,
    },
}

impl TerminalCondition {
    fn validate(&self) -> Result<()> {
        match self {
            TerminalCondition::Pareto { tail_index, scale } => {
                if !(*tail_index > 1.0) {
                    return Err(Error::invalid(format!(
                        "pareto tail index must exceed 1 for an integrable terminal, got {tail_index}"
                    )));
                }
                if !(*scale > 0.0) {
                    return Err(Error::invalid("pareto scale must be positive"));
                }
                Ok(())
            }
            TerminalCondition::Uniform { lo, hi } => {
                if !(hi > lo) {
                    return Err(Error::invalid("uniform terminal needs lo < hi"));
                }
                Ok(())
            }
            TerminalCondition::PortfolioTarget { base, .. } => base.validate(),
            _ => Ok(()),
        }
    }

    /// True when `E|ξ|^p` is finite.
    pub fn has_finite_p_moment(&self, p: f64) -> bool {
        match self {
            TerminalCondition::Pareto { tail_index, .. } => p < *tail_index,
            TerminalCondition::PortfolioTarget { base, .. } => base.has_finite_p_moment(p),
            _ => true,
        }
    }
}

/// One `ξ` draw per path from the ensemble's terminal Brownian values.
pub fn sample_terminal(cond: &TerminalCondition, ensemble: &PathEnsemble) -> Result<Vec<f64>> {
    cond.validate()?;
    if let TerminalCondition::PortfolioTarget { base, floor } = cond {
        let xi = sample_terminal(base, ensemble)?;
        return Ok(xi.iter().map(|x| floor + (x - floor).max(0.0)).collect());
    }
    let m_paths = ensemble.n_paths();
    let t = ensemble.grid().horizon();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let quantile = |w: f64| -> f64 {
        let u = normal.cdf(w / t.sqrt());
        u.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16)
    };
    let out = (0..m_paths)
        .map(|m| {
            let w = ensemble.terminal(m, 0);
            match cond {
                TerminalCondition::Constant(c) => *c,
                TerminalCondition::BrownianEndpoint => w,
                TerminalCondition::Uniform { lo, hi } => lo + (hi - lo) * quantile(w),
                TerminalCondition::Pareto { tail_index, scale } => {
                    scale * (1.0 - quantile(w)).powf(-1.0 / tail_index)
                }
                TerminalCondition::PortfolioTarget { .. } => unreachable!(),
            }
        })
        .collect::<Vec<f64>>();
    Ok(out)
}

/// Generator `f(s, Y_s, Z_s)`; every kind returns exactly 0 for negative
/// times, matching the convention `f(t,·,·) = 0` for `t < 0`.
#[derive(Clone)]
pub enum GeneratorSpec {
    Zero,
    /// Constant in time: `f ≡ value` on `[0, T]`.
    Constant(f64),
    /// `c · (∫ Y α(du) [+ Σ_c ∫ Z_c α(du)])`; delayed-Lipschitz with
    /// constant exactly `|c|`.
    DelayedLinear { c: f64, use_y: bool, use_z: bool },
    /// `γ ∫ (g(s+u) + |Y(s+u)| + |Z(s+u)|)^δ α(du)`, the sublinear growth
    /// form with `δ ∈ (0,1)`.
    DelayedPower { gamma: f64, delta: f64 },
    /// Arbitrary pure callback `(time_index, Y frame, Z frames) -> value`.
    Custom(Arc<dyn Fn(usize, &SegmentFrame<'_>, &[SegmentFrame<'_>]) -> f64 + Send + Sync>),
}

impl fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::Zero => write!(f, "Zero"),
            GeneratorSpec::Constant(v) => write!(f, "Constant({v})"),
            GeneratorSpec::DelayedLinear { c, use_y, use_z } => {
                write!(f, "DelayedLinear {{ c: {c}, use_y: {use_y}, use_z: {use_z} }}")
            }
            GeneratorSpec::DelayedPower { gamma, delta } => {
                write!(f, "DelayedPower {{ gamma: {gamma}, delta: {delta} }}")
            }
            GeneratorSpec::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// The data `(ξ, f, α, T, K, γ, δ, g)` of a delayed BSDE together with the
/// declared assumption constants.
#[derive(Debug, Clone)]
pub struct DelayedProblem {
    pub terminal: TerminalCondition,
    pub generator: GeneratorSpec,
    pub delay: DelayMeasure,
    pub grid: TimeGrid,
    pub dim: usize,
    pub lipschitz_k: f64,
    pub growth_gamma: f64,
    pub growth_delta: f64,
    /// The nonnegative process `g(t)` on the grid (zero for `t < 0` by
    /// convention, so only `[0, T]` is stored).
    pub g_process: Vec<f64>,
    /// `f(t, 0, 0)` on the grid.
    pub f_at_zero: Vec<f64>,
}

impl DelayedProblem {
    pub fn new(
        terminal: TerminalCondition,
        generator: GeneratorSpec,
        delay: DelayMeasure,
        grid: TimeGrid,
        dim: usize,
        lipschitz_k: f64,
        growth_gamma: f64,
        growth_delta: f64,
        g_process: Vec<f64>,
    ) -> Result<Self> {
        terminal.validate()?;
        if !(growth_delta > 0.0 && growth_delta < 1.0) {
            return Err(Error::invalid(format!(
                "growth exponent delta must lie strictly inside (0,1), got {growth_delta}"
            )));
        }
        if lipschitz_k < 0.0 || growth_gamma < 0.0 {
            return Err(Error::invalid("K and gamma must be nonnegative"));
        }
        if g_process.len() != grid.n_steps() + 1 {
            return Err(Error::invalid("g process must be defined on every grid point"));
        }
        if g_process.iter().any(|g| *g < 0.0) {
            return Err(Error::invalid("g process must be nonnegative"));
        }
        if delay
            .atoms()
            .iter()
            .any(|a| a.lag < -grid.horizon() - 1e-12)
        {
            return Err(Error::invalid(
                "delay measure support exceeds the grid horizon",
            ));
        }
        let mut problem = DelayedProblem {
            terminal,
            generator,
            delay,
            grid,
            dim,
            lipschitz_k,
            growth_gamma,
            growth_delta,
            g_process,
            f_at_zero: Vec::new(),
        };
        problem.f_at_zero = problem.compute_f_at_zero();
        Ok(problem)
    }

    /// Convenience constructor for generator-free problems.
    pub fn driverless(
        terminal: TerminalCondition,
        grid: TimeGrid,
        dim: usize,
    ) -> Result<Self> {
        let n = grid.n_steps();
        DelayedProblem::new(
            terminal,
            GeneratorSpec::Zero,
            DelayMeasure::point_mass_at_zero(),
            grid,
            dim,
            0.0,
            0.0,
            0.5,
            vec![0.0; n + 1],
        )
    }

    fn compute_f_at_zero(&self) -> Vec<f64> {
        let n = self.grid.n_steps();
        let zeros_y = vec![0.0; n + 1];
        let zeros_z = vec![0.0; n * self.dim.max(1)];
        (0..=n)
            .map(|i| {
                let fy = SegmentFrame::contiguous(&zeros_y, i, Channel::Y);
                let zi = i.min(n.saturating_sub(1));
                let fz: Vec<SegmentFrame<'_>> = (0..self.dim)
                    .map(|c| SegmentFrame::new(&zeros_z[c..], self.dim, zi, Channel::Z))
                    .collect();
                evaluate_generator(self, i as i64, &fy, &fz).unwrap_or(0.0)
            })
            .collect()
    }

    /// `g(t_i + lag_steps·Δt)` with `g = 0` on negative times.
    fn g_at(&self, idx: i64) -> f64 {
        if idx < 0 {
            0.0
        } else {
            self.g_process[idx as usize]
        }
    }
}

/// Evaluate `f(t_i, Y_{t_i}, Z_{t_i})` using the delay average over `α`.
/// Returns exact 0 for negative time indices.
pub fn evaluate_generator(
    problem: &DelayedProblem,
    time_index: i64,
    frame_y: &SegmentFrame<'_>,
    frames_z: &[SegmentFrame<'_>],
) -> Result<f64> {
    if time_index < 0 {
        return Ok(0.0);
    }
    let value = match &problem.generator {
        GeneratorSpec::Zero => 0.0,
        GeneratorSpec::Constant(v) => *v,
        GeneratorSpec::DelayedLinear { c, use_y, use_z } => {
            let mut acc = 0.0;
            if *use_y {
                acc += delay_average(frame_y, &problem.delay, |v| v);
            }
            if *use_z {
                for fz in frames_z {
                    acc += delay_average(fz, &problem.delay, |v| v);
                }
            }
            c * acc
        }
        GeneratorSpec::DelayedPower { gamma, delta } => {
            let mut acc = 0.0;
            for atom in problem.delay.atoms() {
                let y = frame_y.value_at_lag(atom.lag_steps).abs();
                let z2: f64 = frames_z
                    .iter()
                    .map(|fz| {
                        let v = fz.value_at_lag(atom.lag_steps);
                        v * v
                    })
                    .sum();
                let g = problem.g_at(frame_y.idx() as i64 + atom.lag_steps);
                acc += atom.weight * (g + y + z2.sqrt()).powf(*delta);
            }
            gamma * acc
        }
        GeneratorSpec::Custom(f) => f(time_index as usize, frame_y, frames_z),
    };
    if !value.is_finite() {
        return Err(Error::numerical(
            format!("generator evaluation at time index {time_index}"),
            format!("non-finite value {value}"),
        ));
    }
    Ok(value)
}

/// Outcome of the randomized delayed-Lipschitz probe.
#[derive(Debug, Clone, Copy)]
pub struct LipschitzReport {
    /// Max over probe pairs of `|Δf| / ∫(|Δy| + |Δz|) α(du)`.
    pub empirical_k: f64,
    /// True when every probe pair had a zero denominator.
    pub inconclusive: bool,
}

/// Outcome of the randomized sublinear-growth probe.
#[derive(Debug, Clone, Copy)]
pub struct GrowthReport {
    /// Max over probes of `|f - f(·,0,0)| / (γ ∫ (g+|y|+|z|)^δ α(du))`.
    pub worst_ratio: f64,
    /// True when some probe had a zero denominator but nonzero numerator.
    pub violation: bool,
}

struct Probe {
    y: Vec<f64>,
    z: Vec<f64>, // interleaved, dim components per step
    idx: usize,
}

fn random_probe(rng: &mut ChaCha8Rng, n: usize, dim: usize, amplitude: f64) -> Probe {
    let y: Vec<f64> = (0..=n).map(|_| amplitude * (rng.gen::<f64>() * 2.0 - 1.0)).collect();
    let z: Vec<f64> = (0..n * dim)
        .map(|_| amplitude * (rng.gen::<f64>() * 2.0 - 1.0))
        .collect();
    let idx = rng.gen_range(0..n);
    Probe { y, z, idx }
}

fn eval_on_probe(problem: &DelayedProblem, p: &Probe) -> Result<f64> {
    let fy = SegmentFrame::contiguous(&p.y, p.idx, Channel::Y);
    let fz: Vec<SegmentFrame<'_>> = (0..problem.dim)
        .map(|c| SegmentFrame::new(&p.z[c..], problem.dim, p.idx, Channel::Z))
        .collect();
    evaluate_generator(problem, p.idx as i64, &fy, &fz)
}

/// Empirical Lipschitz ratio of the generator over random segment pairs.
///
/// Probes mix fully random pairs with pairs that perturb only one channel
/// with a constant sign, so linear generators attain their exact constant.
pub fn check_lipschitz(
    problem: &DelayedProblem,
    n_probe_pairs: usize,
    seed: u64,
) -> Result<LipschitzReport> {
    if n_probe_pairs == 0 {
        return Err(Error::invalid("need at least one probe pair"));
    }
    let n = problem.grid.n_steps();
    let dim = problem.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    let mut seen = false;
    for k in 0..n_probe_pairs {
        let amplitude = 10f64.powf(rng.gen_range(-2.0..2.0));
        let a = random_probe(&mut rng, n, dim, amplitude);
        let mut b = random_probe(&mut rng, n, dim, amplitude);
        b.idx = a.idx;
        match k % 3 {
            1 => {
                // isolate the Y channel with a constant-sign perturbation
                b.z.copy_from_slice(&a.z);
                let bump = amplitude * rng.gen::<f64>();
                for (bv, av) in b.y.iter_mut().zip(a.y.iter()) {
                    *bv = av + bump;
                }
            }
            2 => {
                // isolate the Z channel
                b.y.copy_from_slice(&a.y);
                let bump = amplitude * rng.gen::<f64>();
                for (bv, av) in b.z.iter_mut().zip(a.z.iter()) {
                    *bv = av + bump;
                }
            }
            _ => {}
        }
        let fa = eval_on_probe(problem, &a)?;
        let fb = eval_on_probe(problem, &b)?;
        // denominator: ∫ (|Δy| + |Δz|) α(du) with the extension convention
        let dy: Vec<f64> = a.y.iter().zip(b.y.iter()).map(|(x, y)| x - y).collect();
        let dz: Vec<f64> = a.z.iter().zip(b.z.iter()).map(|(x, y)| x - y).collect();
        let fdy = SegmentFrame::contiguous(&dy, a.idx, Channel::Y);
        let mut den = delay_average(&fdy, &problem.delay, f64::abs);
        for atom in problem.delay.atoms() {
            let z2: f64 = (0..dim)
                .map(|c| {
                    let f = SegmentFrame::new(&dz[c..], dim, a.idx, Channel::Z);
                    let v = f.value_at_lag(atom.lag_steps);
                    v * v
                })
                .sum();
            den += atom.weight * z2.sqrt();
        }
        if den == 0.0 {
            continue;
        }
        seen = true;
        best = best.max((fa - fb).abs() / den);
    }
    Ok(LipschitzReport {
        empirical_k: best,
        inconclusive: !seen,
    })
}

/// Empirical check of the sublinear growth bound
/// `|f(s,y,z) - f(s,0,0)| ≤ γ ∫ (g(s+u) + |y| + |z|)^δ α(du)`.
pub fn check_growth(problem: &DelayedProblem, n_probes: usize, seed: u64) -> Result<GrowthReport> {
    if n_probes == 0 {
        return Err(Error::invalid("need at least one probe"));
    }
    let n = problem.grid.n_steps();
    let dim = problem.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut violation = false;
    for _ in 0..n_probes {
        let amplitude = 10f64.powf(rng.gen_range(-2.0..3.0));
        let p = random_probe(&mut rng, n, dim, amplitude);
        let f_val = eval_on_probe(problem, &p)?;
        let f_zero = problem.f_at_zero[p.idx];
        let lhs = (f_val - f_zero).abs();
        let mut rhs = 0.0;
        for atom in problem.delay.atoms() {
            let fy = SegmentFrame::contiguous(&p.y, p.idx, Channel::Y);
            let y = fy.value_at_lag(atom.lag_steps).abs();
            let z2: f64 = (0..dim)
                .map(|c| {
                    let f = SegmentFrame::new(&p.z[c..], dim, p.idx, Channel::Z);
                    let v = f.value_at_lag(atom.lag_steps);
                    v * v
                })
                .sum();
            let g = problem.g_at(p.idx as i64 + atom.lag_steps);
            rhs += atom.weight * (g + y + z2.sqrt()).powf(problem.growth_delta);
        }
        rhs *= problem.growth_gamma;
        if rhs == 0.0 {
            if lhs > 0.0 {
                violation = true;
                worst = f64::INFINITY;
            }
            continue;
        }
        worst = worst.max(lhs / rhs);
    }
    Ok(GrowthReport {
        worst_ratio: worst,
        violation,
    })
}

/// Discretized market from the wealth-replication setting: rate, volatility
/// and risk premium as grid functions.
#[derive(Debug, Clone)]
pub struct MarketModel {
    pub rate: Vec<f64>,
    pub volatility: Vec<f64>,
    pub premium: Vec<f64>,
    pub initial_wealth: f64,
    pub initial_bond_price: f64,
}

impl MarketModel {
    pub fn new(
        rate: Vec<f64>,
        volatility: Vec<f64>,
        premium: Vec<f64>,
        initial_wealth: f64,
        initial_bond_price: f64,
    ) -> Result<Self> {
        if volatility.iter().any(|s| *s < 1e-12) {
            return Err(Error::invalid(
                "volatility must be bounded away from zero (it divides the strategy)",
            ));
        }
        if !(initial_bond_price > 0.0) {
            return Err(Error::invalid("initial bond price must be positive"));
        }
        if rate.len() != volatility.len() || rate.len() != premium.len() {
            return Err(Error::invalid("market grid functions must share a length"));
        }
        Ok(MarketModel {
            rate,
            volatility,
            premium,
            initial_wealth,
            initial_bond_price,
        })
    }

    /// Flat-coefficient market.
    pub fn flat(rate: f64, volatility: f64, premium: f64, x0: f64, grid: &TimeGrid) -> Result<Self> {
        let n = grid.n_steps() + 1;
        MarketModel::new(vec![rate; n], vec![volatility; n], vec![premium; n], x0, 1.0)
    }

    /// `exp(-∫_0^{t_i} r ds)` by a left Riemann sum.
    pub fn discount_factor(&self, grid: &TimeGrid, i: usize) -> f64 {
        let dt = grid.dt();
        let integral: f64 = self.rate[..i].iter().sum::<f64>() * dt;
        (-integral).exp()
    }

    /// Amount invested in the bond recovered from the discounted loading:
    /// `π(t_i) = Z(t_i) e^{∫ r} / σ(t_i)`.
    pub fn strategy_from_z(&self, z: f64, grid: &TimeGrid, i: usize) -> f64 {
        z / (self.discount_factor(grid, i) * self.volatility[i])
    }
}

/// Feasibility report for the self-referencing replication target
/// `Y(0) + (ξ - Y(0))^+`.
#[derive(Debug, Clone)]
pub struct PortfolioReport {
    /// Monte Carlo estimate of `E[(ξ - Y(0))^+]`.
    pub shortfall_mean: f64,
    pub shortfall_stderr: f64,
    /// A solution with the proposed `Y(0)` exists iff the shortfall
    /// vanishes, i.e. `ξ ≤ Y(0)` almost surely.
    pub feasible: bool,
    /// When feasible the solution is flat: `Y ≡ Y(0)`, `Z ≡ 0`.
    pub analytic_y0: Option<f64>,
}

/// Encode the replication target as a delayed problem and report the
/// analytic fixed-point characterization of the proposed initial value.
pub fn portfolio_insurance_problem(
    market: &MarketModel,
    target: &TerminalCondition,
    guess_y0: f64,
    ensemble: &PathEnsemble,
) -> Result<(DelayedProblem, PortfolioReport)> {
    // market invariants were validated at construction; the problem itself
    // lives under the risk-neutral measure where the drift is gone
    let _ = market;
    let grid = ensemble.grid().clone();
    let terminal = TerminalCondition::PortfolioTarget {
        base: Box::new(target.clone()),
        floor: guess_y0,
    };
    // the target references Y(0) through the full-horizon lag
    let delay = DelayMeasure::snap(&[(-grid.horizon(), 1.0)], &grid)?;
    let n = grid.n_steps();
    let problem = DelayedProblem::new(
        terminal,
        GeneratorSpec::Zero,
        delay,
        grid,
        ensemble.dim(),
        0.0,
        0.0,
        0.5,
        vec![0.0; n + 1],
    )?;

    let xi = sample_terminal(target, ensemble)?;
    let shortfall: Vec<f64> = xi.iter().map(|x| (x - guess_y0).max(0.0)).collect();
    let (mean, stderr) = mean_and_stderr(&shortfall, ensemble.chunk_size());
    let feasible = mean <= 3.0 * stderr;
    Ok((
        problem,
        PortfolioReport {
            shortfall_mean: mean,
            shortfall_stderr: stderr,
            feasible,
            analytic_y0: feasible.then_some(guess_y0),
        },
    ))
}
