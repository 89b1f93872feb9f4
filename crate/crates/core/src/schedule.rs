//! Diminishing step sizes `alpha_k = scale / (k + 1)^q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `q = 1/2`
    InverseSqrt,
    /// `q = 1`
    Inverse,
    /// `q` given by `exponent`
    InversePow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    pub scale: f64,
    /// Only read for `inverse_pow`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Persistence {
    /// `sum alpha = inf` and `sum alpha^2 < inf`.
    SatisfiesBoth,
    /// `sum alpha = inf` but `sum alpha^2 = inf` too.
    DivergingSumOnly,
    /// `sum alpha < inf`.
    Neither,
}

impl StepSchedule {
    pub fn inverse_sqrt(scale: f64) -> Self {
        Self {
            kind: ScheduleKind::InverseSqrt,
            scale,
            exponent: None,
        }
    }

    pub fn inverse(scale: f64) -> Self {
        Self {
            kind: ScheduleKind::Inverse,
            scale,
            exponent: None,
        }
    }

    pub fn inverse_pow(scale: f64, exponent: f64) -> Self {
        Self {
            kind: ScheduleKind::InversePow,
            scale,
            exponent: Some(exponent),
        }
    }

    pub fn exponent(&self) -> f64 {
        match self.kind {
            ScheduleKind::InverseSqrt => 0.5,
            ScheduleKind::Inverse => 1.0,
            ScheduleKind::InversePow => self.exponent.unwrap_or(f64::NAN),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::config(
                "schedule.scale",
                format!("must be > 0, got {}", self.scale),
            ));
        }
        match (self.kind, self.exponent) {
            (ScheduleKind::InversePow, None) => Err(Error::config(
                "schedule.exponent",
                "required for inverse_pow",
            )),
            (ScheduleKind::InversePow, Some(q)) if !(q.is_finite() && q > 0.0) => Err(
                Error::config("schedule.exponent", format!("must be > 0, got {q}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn alpha(&self, k: usize) -> f64 {
        let base = (k + 1) as f64;
        match self.kind {
            ScheduleKind::InverseSqrt => self.scale / base.sqrt(),
            ScheduleKind::Inverse => self.scale / base,
            ScheduleKind::InversePow => self.scale / base.powf(self.exponent()),
        }
    }

    /// Analytic p-series classification by exponent.
    pub fn persistence(&self) -> Persistence {
        let q = self.exponent();
        if q > 1.0 {
            Persistence::Neither
        } else if q > 0.5 {
            Persistence::SatisfiesBoth
        } else {
            Persistence::DivergingSumOnly
        }
    }

    /// `(sum_{k<=K} alpha_k, sum_{k<=K} alpha_k^2)`.
    pub fn partial_sums(&self, last_k: usize) -> (f64, f64) {
        (0..=last_k).fold((0.0, 0.0), |(s1, s2), k| {
            let a = self.alpha(k);
            (s1 + a, s2 + a * a)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn alpha_values() {
        assert_eq!(StepSchedule::inverse_sqrt(1.0).alpha(0), 1.0);
        assert_eq!(StepSchedule::inverse_sqrt(1.0).alpha(3), 0.5);
        assert_eq!(StepSchedule::inverse(2.0).alpha(1), 1.0);
        assert!((StepSchedule::inverse_pow(1.0, 0.75).alpha(15) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn persistence_classes() {
        assert_eq!(
            StepSchedule::inverse(1.0).persistence(),
            Persistence::SatisfiesBoth
        );
        assert_eq!(
            StepSchedule::inverse_sqrt(1.0).persistence(),
            Persistence::DivergingSumOnly
        );
        assert_eq!(
            StepSchedule::inverse_pow(1.0, 0.75).persistence(),
            Persistence::SatisfiesBoth
        );
        assert_eq!(
            StepSchedule::inverse_pow(1.0, 1.5).persistence(),
            Persistence::Neither
        );
        assert_eq!(
            StepSchedule::inverse_pow(1.0, 0.3).persistence(),
            Persistence::DivergingSumOnly
        );
    }

    #[test]
    fn validation() {
        assert!(StepSchedule::inverse(0.0).validate().is_err());
        let missing = StepSchedule {
            kind: ScheduleKind::InversePow,
            scale: 1.0,
            exponent: None,
        };
        assert!(
            matches!(missing.validate(), Err(Error::Config { key, .. }) if key == "schedule.exponent")
        );
        assert!(StepSchedule::inverse_pow(1.0, 0.75).validate().is_ok());
    }

    #[test]
    fn partial_sums_follow_classification() {
        // Growth of the tail from 10^5 to 10^6 distinguishes divergence from a
        // plateau: it is large for a divergent series and tiny for a
        // convergent one.
        let tail = |s: &StepSchedule| {
            let (a1, a2) = s.partial_sums(100_000);
            let (b1, b2) = s.partial_sums(1_000_000);
            (b1 - a1, b2 - a2)
        };
        let (d1, d2) = tail(&StepSchedule::inverse_sqrt(1.0));
        assert!(d1 > 1000.0 && d2 > 2.0); // ln 10 ~ 2.3
        let (d1, d2) = tail(&StepSchedule::inverse(1.0));
        assert!(d1 > 2.0 && d2 < 1e-4);
        let (d1, d2) = tail(&StepSchedule::inverse_pow(1.0, 0.75));
        assert!(d1 > 10.0 && d2 < 1e-2);
        let (d1, _) = tail(&StepSchedule::inverse_pow(1.0, 2.0));
        assert!(d1 < 1e-4);
    }

    #[test]
    fn config_json_shape() {
        let s: StepSchedule =
            serde_json::from_str(r#"{"kind":"inverse_pow","scale":0.5,"exponent":0.75}"#).unwrap();
        assert_eq!(s, StepSchedule::inverse_pow(0.5, 0.75));
        assert!(serde_json::from_str::<StepSchedule>(
            r#"{"kind":"inverse","scale":1,"exponnt":1}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn alpha_is_positive_and_non_increasing(
            scale in 1e-3f64..10.0, q in 0.1f64..2.0, k in 0usize..100_000, kind in 0u8..3
        ) {
            let s = match kind {
                0 => StepSchedule::inverse_sqrt(scale),
                1 => StepSchedule::inverse(scale),
                _ => StepSchedule::inverse_pow(scale, q),
            };
            prop_assert!(s.alpha(k) > 0.0);
            prop_assert!(s.alpha(k + 1) <= s.alpha(k));
        }
    }
}
