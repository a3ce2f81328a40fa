//! Time grids, discrete delay measures and segment views.
//!
//! A delayed generator reads the whole past of the solution through a
//! probability measure on `[-T, 0]`. Everything here is exact index
//! arithmetic on a uniform grid: delay atoms are snapped to grid
//! multiples, and the extension convention `Y(s) = Y(0)`, `Z(s) = 0`
//! for `s < 0` is applied at lookup time so no evaluation ever reads
//! out of bounds.

use crate::error::{Error, Result};

/// Uniform time grid `t_0 = 0 < t_1 < … < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(format!(
                "time grid horizon must be positive and finite, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::invalid("time grid needs at least one step"));
        }
        let mut times: Vec<f64> = (0..=n_steps)
            .map(|i| i as f64 * horizon / n_steps as f64)
            .collect();
        // pin endpoints exactly
        times[0] = 0.0;
        times[n_steps] = horizon;
        Ok(TimeGrid {
            horizon,
            n_steps,
            times,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }
}

/// One atom of a discrete delay measure: a nonpositive lag (stored both in
/// time units and in grid steps) and its probability weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayAtom {
    pub lag: f64,
    pub lag_steps: i64,
    pub weight: f64,
}

/// Discrete probability measure on `[-T, 0]` with grid-aligned atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayMeasure {
    atoms: Vec<DelayAtom>,
}

impl DelayMeasure {
    /// Point mass at lag zero: the classical no-delay case.
    pub fn point_mass_at_zero() -> Self {
        DelayMeasure {
            atoms: vec![DelayAtom {
                lag: 0.0,
                lag_steps: 0,
                weight: 1.0,
            }],
        }
    }

    /// Snap raw `(lag, weight)` atoms to the grid: each lag is rounded to
    /// the nearest multiple of `Δt` (ties toward 0), colliding atoms are
    /// merged and weights renormalized to sum 1.
    pub fn snap(raw: &[(f64, f64)], grid: &TimeGrid) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::invalid("delay measure needs at least one atom"));
        }
        let t = grid.horizon();
        let dt = grid.dt();
        let mut merged: std::collections::BTreeMap<i64, f64> = std::collections::BTreeMap::new();
        let mut total = 0.0;
        for &(lag, weight) in raw {
            if !(-t..=0.0).contains(&lag) || !lag.is_finite() {
                return Err(Error::invalid(format!(
                    "delay lag {lag} outside [-{t}, 0]"
                )));
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::invalid(format!(
                    "delay weight {weight} must be positive"
                )));
            }
            let x = lag / dt; // x <= 0
            let lo = x.floor();
            let hi = x.ceil();
            // tie -> the candidate closer to 0, i.e. ceil for nonpositive x
            let steps = if (x - lo).abs() < (hi - x).abs() {
                lo
            } else {
                hi
            } as i64;
            let steps = steps.clamp(-(grid.n_steps() as i64), 0);
            *merged.entry(steps).or_insert(0.0) += weight;
            total += weight;
        }
        let atoms = merged
            .into_iter()
            .map(|(steps, weight)| DelayAtom {
                lag: steps as f64 * dt,
                lag_steps: steps,
                weight: weight / total,
            })
            .collect();
        Ok(DelayMeasure { atoms })
    }

    pub fn atoms(&self) -> &[DelayAtom] {
        &self.atoms
    }

    /// True when the measure is exactly the point mass at lag zero.
    pub fn is_point_mass_at_zero(&self) -> bool {
        self.atoms.len() == 1 && self.atoms[0].lag_steps == 0
    }
}

/// Which channel a segment view reads; the extension convention differs:
/// the Y channel holds its time-zero value on `s < 0`, the Z channel is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Y,
    Z,
}

/// Per-path view of a grid-indexed value array giving access to past
/// values `value(t_i + u)` with the extension convention built in.
///
/// `stride` allows viewing one component of an interleaved layout.
#[derive(Debug, Clone, Copy)]
pub struct SegmentFrame<'a> {
    values: &'a [f64],
    stride: usize,
    idx: usize,
    channel: Channel,
}

impl<'a> SegmentFrame<'a> {
    pub fn new(values: &'a [f64], stride: usize, idx: usize, channel: Channel) -> Self {
        debug_assert!(stride >= 1);
        debug_assert!(idx * stride < values.len() || values.is_empty());
        SegmentFrame {
            values,
            stride,
            idx,
            channel,
        }
    }

    /// Contiguous single-component view.
    pub fn contiguous(values: &'a [f64], idx: usize, channel: Channel) -> Self {
        Self::new(values, 1, idx, channel)
    }

    pub fn idx(&self) -> usize {
        self.idx
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    /// Value at `t_idx + u` where `u = lag_steps · Δt` (lag_steps ≤ 0).
    pub fn value_at_lag(&self, lag_steps: i64) -> f64 {
        let j = self.idx as i64 + lag_steps;
        if j < 0 {
            match self.channel {
                Channel::Y => self.values[0],
                Channel::Z => 0.0,
            }
        } else {
            self.values[j as usize * self.stride]
        }
    }

    pub fn current(&self) -> f64 {
        self.value_at_lag(0)
    }
}

/// Delay-averaged integral `∫_{-T}^0 transform(value(t_i + u)) α(du)` as an
/// exact finite sum over the measure's atoms.
pub fn delay_average<F: Fn(f64) -> f64>(
    frame: &SegmentFrame<'_>,
    measure: &DelayMeasure,
    transform: F,
) -> f64 {
    measure
        .atoms()
        .iter()
        .map(|a| a.weight * transform(frame.value_at_lag(a.lag_steps)))
        .sum()
}

/// Both sides of the discrete Fubini swap
/// `∫_0^T ∫_{-T}^0 h(s+u) α(du) ds  =  ∫_{-T}^0 ∫_u^{T+u} h(s) ds α(du)`,
/// computed by independent summation orders (left Riemann sums). Negative
/// times read `h(0)` per the extension convention.
pub fn fubini_identity_check(
    values: &[f64],
    measure: &DelayMeasure,
    grid: &TimeGrid,
) -> (f64, f64) {
    let n = grid.n_steps();
    let dt = grid.dt();
    let h = |j: i64| -> f64 {
        if j < 0 {
            values[0]
        } else {
            values[j as usize]
        }
    };

    // lhs: outer sum over time, inner over atoms
    let mut lhs = 0.0;
    for i in 0..n as i64 {
        let mut inner = 0.0;
        for a in measure.atoms() {
            inner += a.weight * h(i + a.lag_steps);
        }
        lhs += inner * dt;
    }

    // rhs: outer sum over atoms, inner over shifted time
    let mut rhs = 0.0;
    for a in measure.atoms() {
        let mut inner = 0.0;
        for i in 0..n as i64 {
            inner += h(i + a.lag_steps) * dt;
        }
        rhs += a.weight * inner;
    }

    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_uniform() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert_eq!(g.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = TimeGrid::new(2.0, 1).unwrap();
        assert_eq!(g.times(), &[0.0, 2.0]);
    }

    #[test]
    fn grid_rejects_bad_args() {
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(-1.0, 4).is_err());
    }

    #[test]
    fn grid_endpoints_exact() {
        let g = TimeGrid::new(0.7, 7).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(7), 0.7);
        assert!((g.dt() * g.n_steps() as f64 - g.horizon()).abs() <= f64::EPSILON);
    }

    #[test]
    fn snap_point_mass() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let m = DelayMeasure::snap(&[(0.0, 1.0)], &g).unwrap();
        assert_eq!(m.atoms().len(), 1);
        assert_eq!(m.atoms()[0].lag_steps, 0);
        assert_eq!(m.atoms()[0].weight, 1.0);
        assert!(m.is_point_mass_at_zero());
    }

    #[test]
    fn snap_merges_colliding_lags() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let m = DelayMeasure::snap(&[(-0.26, 0.5), (-0.24, 0.5)], &g).unwrap();
        assert_eq!(m.atoms().len(), 1);
        assert_eq!(m.atoms()[0].lag_steps, -1);
        assert_eq!(m.atoms()[0].lag, -0.25);
        assert!((m.atoms()[0].weight - 1.0).abs() < 1e-15);
    }

    #[test]
    fn snap_renormalizes_weights() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let m = DelayMeasure::snap(&[(-0.5, 2.0), (0.0, 2.0)], &g).unwrap();
        assert_eq!(m.atoms().len(), 2);
        assert_eq!(m.atoms()[0].lag, -0.5);
        assert_eq!(m.atoms()[0].weight, 0.5);
        assert_eq!(m.atoms()[1].lag, 0.0);
        assert_eq!(m.atoms()[1].weight, 0.5);
    }

    #[test]
    fn snap_rejects_out_of_range() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert!(DelayMeasure::snap(&[(-1.5, 1.0)], &g).is_err());
        assert!(DelayMeasure::snap(&[(0.5, 1.0)], &g).is_err());
        assert!(DelayMeasure::snap(&[], &g).is_err());
        assert!(DelayMeasure::snap(&[(0.0, -1.0)], &g).is_err());
    }

    #[test]
    fn snap_tie_goes_toward_zero() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        // -0.125 is exactly between steps -1 and 0
        let m = DelayMeasure::snap(&[(-0.125, 1.0)], &g).unwrap();
        assert_eq!(m.atoms()[0].lag_steps, 0);
    }

    #[test]
    fn frame_extension_convention() {
        let y = [3.0, 4.0, 5.0];
        let fy = SegmentFrame::contiguous(&y, 1, Channel::Y);
        assert_eq!(fy.value_at_lag(0), 4.0);
        assert_eq!(fy.value_at_lag(-1), 3.0);
        assert_eq!(fy.value_at_lag(-2), 3.0); // t < 0 -> Y(0)
        let z = [7.0, 8.0];
        let fz = SegmentFrame::contiguous(&z, 1, Channel::Z);
        assert_eq!(fz.value_at_lag(-1), 7.0);
        assert_eq!(fz.value_at_lag(-2), 0.0); // t < 0 -> 0
    }

    #[test]
    fn frame_strided_lookup() {
        // two interleaved components, read the second
        let z = [1.0, 10.0, 2.0, 20.0, 3.0, 30.0];
        let f = SegmentFrame::new(&z[1..], 2, 2, Channel::Z);
        assert_eq!(f.value_at_lag(0), 30.0);
        assert_eq!(f.value_at_lag(-2), 10.0);
    }

    #[test]
    fn delay_average_point_mass_is_lookup() {
        let y = [1.0, 2.0, 3.0];
        let m = DelayMeasure::point_mass_at_zero();
        for i in 0..3 {
            let f = SegmentFrame::contiguous(&y, i, Channel::Y);
            assert_eq!(delay_average(&f, &m, |v| v), y[i]);
        }
    }

    #[test]
    fn delay_average_extension_at_time_zero() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let m = DelayMeasure::snap(&[(-1.0, 0.5), (0.0, 0.5)], &g).unwrap();
        let y = [6.0, 1.0, 2.0, 3.0, 4.0];
        let f = SegmentFrame::contiguous(&y, 0, Channel::Y);
        // both atoms hit Y(0) through the extension rule
        assert_eq!(delay_average(&f, &m, |v| v), 6.0);
    }

    #[test]
    fn delay_average_matches_brute_force() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let m = DelayMeasure::snap(&[(-0.75, 0.2), (-0.25, 0.3), (0.0, 0.5)], &g).unwrap();
        let y: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin() + 0.2).collect();
        for i in 0..9usize {
            let f = SegmentFrame::contiguous(&y, i, Channel::Y);
            let got = delay_average(&f, &m, |v| v * v + 1.0);
            // independent brute-force loop
            let mut want = 0.0;
            for a in m.atoms() {
                let j = i as i64 + a.lag_steps;
                let v = if j < 0 { y[0] } else { y[j as usize] };
                want += a.weight * (v * v + 1.0);
            }
            assert!((got - want).abs() <= 1e-15 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn fubini_constant_integrates_to_horizon() {
        let g = TimeGrid::new(2.0, 8).unwrap();
        let m = DelayMeasure::snap(&[(-2.0, 0.25), (-1.0, 0.25), (0.0, 0.5)], &g).unwrap();
        let h = vec![1.0; 9];
        let (lhs, rhs) = fubini_identity_check(&h, &m, &g);
        assert!((lhs - 2.0).abs() < 1e-12);
        assert!((rhs - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fubini_zero() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let m = DelayMeasure::point_mass_at_zero();
        let (lhs, rhs) = fubini_identity_check(&[0.0; 5], &m, &g);
        assert_eq!(lhs, 0.0);
        assert_eq!(rhs, 0.0);
    }

    proptest! {
        #[test]
        fn fubini_sides_agree(
            vals in proptest::collection::vec(-100.0f64..100.0, 11),
            raw in proptest::collection::vec(((-1.0f64..0.0), (0.01f64..1.0)), 1..5),
        ) {
            let g = TimeGrid::new(1.0, 10).unwrap();
            let m = DelayMeasure::snap(&raw, &g).unwrap();
            let (lhs, rhs) = fubini_identity_check(&vals, &m, &g);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn delay_average_monotone_in_transform(
            vals in proptest::collection::vec(-10.0f64..10.0, 9),
            idx in 0usize..9,
            raw in proptest::collection::vec(((-1.0f64..0.0), (0.01f64..1.0)), 1..4),
        ) {
            let g = TimeGrid::new(1.0, 8).unwrap();
            let m = DelayMeasure::snap(&raw, &g).unwrap();
            let f = SegmentFrame::contiguous(&vals, idx, Channel::Y);
            let a1 = delay_average(&f, &m, |v| v.abs());
            let a2 = delay_average(&f, &m, |v| v.abs() + 1.0);
            prop_assert!(a1 <= a2);
            // linearity in the transform output
            let s = delay_average(&f, &m, |v| 2.0 * v.abs() + 3.0);
            prop_assert!((s - (2.0 * a1 + 3.0 * 1.0)).abs() <= 1e-12 * (1.0 + s.abs()));
        }
    }
}
