//! Time-dependent inputs: piecewise-linear trajectories for rest lengths,
//! nodal forces and prescribed boundary motion.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// A piecewise-linear signal through `(time, value)` knots.
///
/// Outside the knot range the signal is held at its end values. The first
/// derivative is the segment slope; the second derivative is zero everywhere
/// (kinks are not resolved as impulses).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "trajectory needs matching non-empty knot lists (got {} times, {} values)",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "trajectory knot times must be strictly increasing".into(),
            ));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "trajectory knots must be finite".into(),
            ));
        }
        Ok(Self { times, values })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            times: vec![0.0],
            values: vec![value],
        }
    }

    /// Linear ramp from `from` at `t0` to `to` at `t1`, held afterwards.
    pub fn ramp(t0: f64, t1: f64, from: f64, to: f64) -> Result<Self> {
        Self::new(vec![t0, t1], vec![from, to])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn segment(&self, t: f64) -> Option<usize> {
        if t <= self.times[0] || t >= self.end() {
            return None;
        }
        // index of the segment [times[i], times[i+1]) containing t
        Some(self.times.partition_point(|&x| x <= t) - 1)
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.end() {
            return *self.values.last().unwrap();
        }
        let i = self.segment(t).unwrap();
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn rate(&self, t: f64) -> f64 {
        match self.segment(t) {
            Some(i) => (self.values[i + 1] - self.values[i]) / (self.times[i + 1] - self.times[i]),
            None => 0.0,
        }
    }

    pub fn acceleration(&self, _t: f64) -> f64 {
        0.0
    }

    /// The same trajectory shifted by a constant.
    pub fn offset(&self, by: f64) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(|v| v + by).collect(),
        }
    }
}

/// A trajectory bound to one coordinate (or element) index, 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedTrajectory {
    pub index: usize,
    pub trajectory: Trajectory,
}

/// Prescribed inputs over an integration window.
///
/// Rest-length trajectories are absolute clustered rest lengths; elements
/// without a trajectory keep the rest length carried by the state. Force
/// trajectories act on full coordinates; boundary trajectories must address
/// constrained coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActuationSchedule {
    pub rest_lengths: Vec<IndexedTrajectory>,
    pub forces: Vec<IndexedTrajectory>,
    pub boundary: Vec<IndexedTrajectory>,
}

impl ActuationSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Linear rest-length change over `[t0, t1]`, starting from `base`.
    ///
    /// `changes` holds `(element, delta)` pairs; the element's rest length moves
    /// from `base[element]` to `base[element] + delta`.
    pub fn rest_length_ramp(
        base: &DVector<f64>,
        changes: &[(usize, f64)],
        t0: f64,
        t1: f64,
    ) -> Result<Self> {
        let mut schedule = Self::new();
        for &(element, delta) in changes {
            if element >= base.len() {
                return Err(Error::IndexOutOfRange {
                    index: element,
                    len: base.len(),
                });
            }
            let from = base[element];
            schedule.rest_lengths.push(IndexedTrajectory {
                index: element,
                trajectory: Trajectory::ramp(t0, t1, from, from + delta)?,
            });
        }
        Ok(schedule)
    }

    /// Clustered rest lengths at time `t`, falling back to `current` for
    /// elements without a trajectory.
    pub fn rest_lengths_at(&self, current: &DVector<f64>, t: f64) -> DVector<f64> {
        let mut out = current.clone();
        for entry in &self.rest_lengths {
            out[entry.index] = entry.trajectory.value(t);
        }
        out
    }

    /// External nodal force vector (full coordinates) at time `t`.
    pub fn forces_at(&self, n_coords: usize, t: f64) -> DVector<f64> {
        let mut f = DVector::zeros(n_coords);
        for entry in &self.forces {
            f[entry.index] += entry.trajectory.value(t);
        }
        f
    }

    /// Overwrites prescribed constrained coordinates (position, velocity,
    /// acceleration) in full-length vectors.
    pub fn apply_boundary(
        &self,
        t: f64,
        n: &mut DVector<f64>,
        velocity: &mut DVector<f64>,
        acceleration: &mut DVector<f64>,
    ) {
        for entry in &self.boundary {
            n[entry.index] = entry.trajectory.value(t);
            velocity[entry.index] = entry.trajectory.rate(t);
            acceleration[entry.index] = entry.trajectory.acceleration(t);
        }
    }

    /// Latest knot time over all trajectories (0 for an empty schedule).
    pub fn end_time(&self) -> f64 {
        self.rest_lengths
            .iter()
            .chain(&self.forces)
            .chain(&self.boundary)
            .map(|e| e.trajectory.end())
            .fold(0.0, f64::max)
    }

    pub fn is_empty(&self) -> bool {
        self.rest_lengths.is_empty() && self.forces.is_empty() && self.boundary.is_empty()
    }

    pub fn validate_rest_lengths(&self) -> Result<()> {
        for entry in &self.rest_lengths {
            if entry.trajectory.values().iter().any(|&v| v <= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "rest-length trajectory for element {} is not strictly positive",
                    entry.index + 1
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_values_and_rates() {
        let tr = Trajectory::ramp(0.0, 2.0, 1.0, 3.0).unwrap();
        assert_eq!(tr.value(-1.0), 1.0);
        assert_eq!(tr.value(1.0), 2.0);
        assert_eq!(tr.value(5.0), 3.0);
        assert_eq!(tr.rate(1.0), 1.0);
        assert_eq!(tr.rate(3.0), 0.0);
    }

    #[test]
    fn rejects_unsorted_knots() {
        assert!(Trajectory::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(Trajectory::new(vec![], vec![]).is_err());
    }

    #[test]
    fn multi_segment_lookup() {
        let tr = Trajectory::new(vec![0.0, 1.0, 3.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert!((tr.value(2.0) - 0.5).abs() < 1e-15);
        assert!((tr.rate(2.0) + 0.5).abs() < 1e-15);
        assert!((tr.rate(0.5) - 1.0).abs() < 1e-15);
    }
}
