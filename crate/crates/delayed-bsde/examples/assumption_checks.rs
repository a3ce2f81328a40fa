//! Empirical audits of the structural assumptions on a generator before
//! trusting a solve: the delayed Lipschitz constant, the sublinear growth
//! bound, and the discrete Fubini identity behind all delay-integral swaps.

use delayed_bsde::delay::{fubini_identity_check, DelayMeasure};
use delayed_bsde::model::{check_growth, check_lipschitz, DelayedProblem, GeneratorSpec, TerminalCondition};
use delayed_bsde::{Result, TimeGrid};

fn main() -> Result<()> {
    let grid = TimeGrid::new(1.0, 50)?;
    let delay = DelayMeasure::snap(&[(-0.5, 0.5), (0.0, 0.5)], &grid)?;
    let n = grid.n_steps();

    // linear generator: the probe should bracket |c| tightly
    let c = 0.3;
    let linear = DelayedProblem::new(
        TerminalCondition::BrownianEndpoint,
        GeneratorSpec::DelayedLinear {
            c,
            use_y: true,
            use_z: false,
        },
        delay.clone(),
        grid.clone(),
        1,
        c.abs(),
        0.0,
        0.5,
        vec![0.0; n + 1],
    )?;
    let rep = check_lipschitz(&linear, 2000, 17)?;
    println!(
        "delayed-linear c = {c}: empirical Lipschitz constant {:.6} (true {c})",
        rep.empirical_k
    );
    assert!((rep.empirical_k - c).abs() <= 1e-6);

    // sublinear power generator: not Lipschitz near the origin, but the
    // growth bound holds with its own (gamma, delta)
    let power = DelayedProblem::new(
        TerminalCondition::BrownianEndpoint,
        GeneratorSpec::DelayedPower {
            gamma: 0.2,
            delta: 0.5,
        },
        delay.clone(),
        grid.clone(),
        1,
        0.0,
        0.2,
        0.5,
        vec![0.0; n + 1],
    )?;
    let lip = check_lipschitz(&power, 3000, 5)?;
    let growth = check_growth(&power, 3000, 9)?;
    println!(
        "delayed-power: empirical Lipschitz ratio {:.3} (unbounded in theory), \
         growth ratio {:.3} (must stay <= 1) -> violation = {}",
        lip.empirical_k, growth.worst_ratio, growth.violation
    );
    assert!(!growth.violation);

    // Fubini swap of time integral and delay average, two summation orders
    let values: Vec<f64> = (0..=n).map(|i| (i as f64 * 0.13).sin() + 1.5).collect();
    let (lhs, rhs) = fubini_identity_check(&values, &delay, &grid);
    println!("fubini swap: {lhs:.12e} vs {rhs:.12e}");
    assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    println!("all assumption checks passed");
    Ok(())
}
