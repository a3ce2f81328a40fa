//! Approximation ladder for merely integrable terminal data.
//!
//! A Pareto(1.5) terminal has a finite mean but infinite variance, so the
//! regression pipeline cannot digest it directly. Clipping the data at
//! increasing levels n with q_n(x) = n·x/(|x| ∨ n) yields a ladder of
//! well-behaved problems whose solutions form a Cauchy sequence; the gap
//! between consecutive rungs is controlled by the closed-form Pareto tail
//! mean E[ξ 1(ξ > n)] = 3/√n for tail index 1.5 and unit scale.

use delayed_bsde::model::{sample_terminal, DelayedProblem, TerminalCondition};
use delayed_bsde::solver::truncation_ladder;
use delayed_bsde::stochastics::{simulate, RegressionBasis};
use delayed_bsde::{Result, TimeGrid};

fn main() -> Result<()> {
    let grid = TimeGrid::new(1.0, 50)?;
    let ensemble = simulate(&grid, 20_000, 1, 1515, 1024)?;
    let problem = DelayedProblem::driverless(
        TerminalCondition::Pareto {
            tail_index: 1.5,
            scale: 1.0,
        },
        grid,
        1,
    )?;
    let terminal = sample_terminal(&problem.terminal, &ensemble)?;
    // local bins rather than global polynomials: the level-difference
    // targets vanish off the tail paths and polynomial fits chase them
    let basis = RegressionBasis::PiecewiseBins {
        bins: 16,
        ridge: RegressionBasis::DEFAULT_RIDGE,
    };
    let levels = [2.0, 4.0, 8.0, 16.0, 32.0];
    let report = truncation_ladder(
        &problem, &levels, &ensemble, &terminal, &basis, 10, 1e-6, &[0.5, 0.9],
    )?;

    println!("level   L1 gap to next   tail-mean bound   sup-moment margin (beta 0.5)");
    let mut prev = f64::INFINITY;
    for gap in &report.gaps {
        let oracle = 3.0 / gap.level.sqrt();
        let e3 = &gap.beta_checks[0];
        println!(
            "{:5}   {:.4e}       {:.4e}        {:+.4e}",
            gap.level,
            gap.l1_gap,
            oracle,
            e3.rhs - e3.lhs
        );
        assert!(gap.l1_gap <= prev, "gaps must decay monotonically");
        assert!(gap.l1_gap <= oracle + 3.0 * gap.l1_gap_stderr);
        assert!(e3.rhs - e3.lhs >= -3.0 * (e3.lhs_stderr + e3.rhs_stderr));
        prev = gap.l1_gap;
    }
    println!("ladder is Cauchy within the closed-form tail bounds");
    Ok(())
}
