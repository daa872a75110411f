//! Time grids, measurement protocols and coherence traces shared by the
//! simulation engines.

use crate::{cst, Error, Real, Result};

/// Pulse protocol under which the coherence is recorded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    /// Free induction decay: prepare a superposition, evolve, read out.
    Fid,
    /// Hahn echo: a refocusing flip of the defect spin at half the
    /// evolution time.
    HahnEcho,
}

impl Protocol {
    /// Command-line name of the protocol.
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Fid => "fid",
            Protocol::HahnEcho => "hahn-echo",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fid" => Ok(Protocol::Fid),
            "hahn-echo" => Ok(Protocol::HahnEcho),
            other => Err(Error::domain(
                "protocol",
                format!("unknown protocol {other:?}, expected \"fid\" or \"hahn-echo\""),
            )),
        }
    }
}

/// Uniform time grid from 0 to `t_max` inclusive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<T> {
    /// Final evolution time (s).
    pub t_max: T,
    /// Number of grid points, including both endpoints.
    pub n_points: usize,
}

impl<T: Real> TimeGrid<T> {
    /// Validated grid constructor; requires `t_max > 0` and at least two
    /// points.
    pub fn new(t_max: T, n_points: usize) -> Result<Self> {
        if !(t_max > T::zero()) || !t_max.is_finite() {
            return Err(Error::domain(
                "t_max",
                format!("must be positive and finite, got {t_max}"),
            ));
        }
        if n_points < 2 {
            return Err(Error::domain(
                "n_points",
                format!("must be at least 2, got {n_points}"),
            ));
        }
        Ok(TimeGrid { t_max, n_points })
    }

    /// Spacing between consecutive grid points.
    pub fn spacing(&self) -> T {
        self.t_max / cst(self.n_points as f64 - 1.0)
    }

    /// All grid times; the first is exactly 0 and the last exactly `t_max`.
    pub fn times(&self) -> Vec<T> {
        let denom = cst::<T>(self.n_points as f64 - 1.0);
        (0..self.n_points)
            .map(|k| self.t_max * cst::<T>(k as f64) / denom)
            .collect()
    }
}

/// Computed coherence of the defect spin over a time grid.
///
/// `sx` holds the rotating-frame in-plane spin expectation, normalised so
/// that `sx = 1` at time 0 for every protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceTrace<T> {
    /// Evolution times (s).
    pub times: Vec<T>,
    /// Coherence signal at the corresponding times.
    pub sx: Vec<T>,
    /// Optional standard error of the mean at each time, present when the
    /// engine averaged rows of sampled bath configurations.
    pub stderr: Option<Vec<T>>,
    /// Number of bath samples averaged into this trace (1 for
    /// deterministic engines).
    pub n_samples: usize,
}

impl<T: Real> CoherenceTrace<T> {
    /// Number of time points.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// Whether the trace holds no points.
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Checks structural invariants: equal column lengths, strictly
    /// increasing times starting at 0, finite values, signal starting at 1
    /// and bounded by 1 in magnitude (with a small numerical allowance).
    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.sx.len() {
            return Err(Error::domain("trace", "times and sx lengths differ"));
        }
        if let Some(se) = &self.stderr {
            if se.len() != self.times.len() {
                return Err(Error::domain("trace", "stderr length differs"));
            }
            if se.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
                return Err(Error::domain(
                    "trace",
                    "stderr must be finite and non-negative",
                ));
            }
        }
        if self.times.is_empty() {
            return Err(Error::domain("trace", "must contain at least one point"));
        }
        if self.times[0].abs() > cst(1e-300) {
            return Err(Error::domain("trace", "first time must be 0"));
        }
        for pair in self.times.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(Error::domain("trace", "times must increase strictly"));
            }
        }
        let slack = cst::<T>(1e-6);
        for &v in &self.sx {
            if !v.is_finite() || v.abs() > T::one() + slack {
                return Err(Error::domain(
                    "trace",
                    format!("signal value {v} outside [-1, 1]"),
                ));
            }
        }
        if (self.sx[0] - T::one()).abs() > slack {
            return Err(Error::domain(
                "trace",
                format!("signal must start at 1, got {}", self.sx[0]),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_times_hit_both_endpoints() {
        let grid = TimeGrid::new(1e-6_f64, 5).unwrap();
        let times = grid.times();
        assert_eq!(times.len(), 5);
        assert_eq!(times[0], 0.0);
        assert_eq!(times[4], 1e-6);
        assert!((grid.spacing() - 2.5e-7).abs() < 1e-22);
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert!(TimeGrid::new(0.0_f64, 5).is_err());
        assert!(TimeGrid::new(-1.0_f64, 5).is_err());
        assert!(TimeGrid::new(f64::INFINITY, 5).is_err());
        assert!(TimeGrid::new(1.0_f64, 1).is_err());
    }

    #[test]
    fn trace_validation_catches_malformed_data() {
        let good = CoherenceTrace {
            times: vec![0.0, 1.0, 2.0],
            sx: vec![1.0, 0.5, -0.2],
            stderr: None,
            n_samples: 1,
        };
        assert!(good.validate().is_ok());

        let mut bad = good.clone();
        bad.sx[0] = 0.2;
        assert!(bad.validate().is_err());

        let mut bad = good.clone();
        bad.sx[2] = 1.5;
        assert!(bad.validate().is_err());

        let mut bad = good.clone();
        bad.times[2] = 1.0;
        assert!(bad.validate().is_err());

        let mut bad = good;
        bad.stderr = Some(vec![0.0, 0.1]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in [Protocol::Fid, Protocol::HahnEcho] {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
        assert!("ramsey".parse::<Protocol>().is_err());
    }
}
