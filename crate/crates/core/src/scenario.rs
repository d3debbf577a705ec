//! Stress scenarios as time-varying Hawkes parameter schedules.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hawkes::HawkesParams;

pub const HORIZON_DAYS: f64 = 92.0;

/// Time constant (days) of the post-shock recovery in the single-shock scenario.
pub const RECOVERY_DAYS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    SingleShock,
    ProlongedClustering,
    FalseAlarm,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 3] = [
        ScenarioId::SingleShock,
        ScenarioId::ProlongedClustering,
        ScenarioId::FalseAlarm,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioId::SingleShock => "single_shock",
            ScenarioId::ProlongedClustering => "prolonged_clustering",
            ScenarioId::FalseAlarm => "false_alarm",
        }
    }

    /// Day on which the stress begins.
    pub fn onset_day(&self) -> f64 {
        30.0
    }

    pub(crate) fn index(&self) -> u64 {
        match self {
            ScenarioId::SingleShock => 0,
            ScenarioId::ProlongedClustering => 1,
            ScenarioId::FalseAlarm => 2,
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario '{s}'")))
    }
}

/// How the redemption baseline multiplier behaves inside a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Multiplier {
    Constant { value: f64 },
    /// 1 + (chi − 1)·exp(−(t − from_day)/tau_days)
    Recovery { chi: f64, from_day: f64, tau_days: f64 },
}

impl Multiplier {
    fn at(&self, t_days: f64) -> f64 {
        match *self {
            Multiplier::Constant { value } => value,
            Multiplier::Recovery { chi, from_day, tau_days } => {
                1.0 + (chi - 1.0) * (-(t_days - from_day) / tau_days).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub lambda0_r: Multiplier,
    pub lambda0_m: f64,
    pub kappa_r: Option<f64>,
    pub kappa_m: Option<f64>,
}

impl Segment {
    fn baseline(t_start: f64, t_end: f64) -> Self {
        Self {
            t_start,
            t_end,
            lambda0_r: Multiplier::Constant { value: 1.0 },
            lambda0_m: 1.0,
            kappa_r: None,
            kappa_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSchedule {
    pub id: ScenarioId,
    pub segments: Vec<Segment>,
    /// Realized shock multiplier (single shock only).
    pub chi: Option<f64>,
}

/// Build the schedule; `rng` is only consumed by the single-shock scenario.
pub fn build_schedule<R: Rng + ?Sized>(id: ScenarioId, rng: &mut R) -> ScenarioSchedule {
    match id {
        ScenarioId::SingleShock => single_shock(rng.random_range(2.0..=4.0)),
        ScenarioId::ProlongedClustering => ScenarioSchedule {
            id,
            segments: vec![
                Segment::baseline(0.0, 30.0),
                Segment {
                    kappa_r: Some(1.7),
                    kappa_m: Some(1.275),
                    ..Segment::baseline(30.0, 70.0)
                },
                Segment::baseline(70.0, HORIZON_DAYS),
            ],
            chi: None,
        },
        ScenarioId::FalseAlarm => ScenarioSchedule {
            id,
            segments: vec![
                Segment::baseline(0.0, 30.0),
                Segment {
                    lambda0_m: 3.0,
                    ..Segment::baseline(30.0, 32.0)
                },
                Segment {
                    lambda0_r: Multiplier::Constant { value: 1.5 },
                    ..Segment::baseline(32.0, 35.0)
                },
                Segment::baseline(35.0, HORIZON_DAYS),
            ],
            chi: None,
        },
    }
}

/// Single-shock schedule with a given multiplier.
pub fn single_shock(chi: f64) -> ScenarioSchedule {
    ScenarioSchedule {
        id: ScenarioId::SingleShock,
        segments: vec![
            Segment::baseline(0.0, 30.0),
            Segment {
                lambda0_r: Multiplier::Constant { value: chi },
                ..Segment::baseline(30.0, 45.0)
            },
            Segment {
                lambda0_r: Multiplier::Recovery {
                    chi,
                    from_day: 45.0,
                    tau_days: RECOVERY_DAYS,
                },
                ..Segment::baseline(45.0, HORIZON_DAYS)
            },
        ],
        chi: Some(chi),
    }
}

/// Parameters in force at `t_days`. Segments are half-open except the last.
pub fn params_at(
    schedule: &ScenarioSchedule,
    t_days: f64,
    base_r: &HawkesParams,
    base_m: &HawkesParams,
) -> Result<(HawkesParams, HawkesParams)> {
    if !(0.0..=HORIZON_DAYS).contains(&t_days) {
        return Err(Error::InvalidArgument(format!(
            "time {t_days} days outside [0, {HORIZON_DAYS}]"
        )));
    }
    let last = schedule.segments.len() - 1;
    let seg = schedule
        .segments
        .iter()
        .enumerate()
        .find(|(i, s)| t_days >= s.t_start && (t_days < s.t_end || *i == last))
        .map(|(_, s)| s)
        .ok_or_else(|| Error::InvalidArgument(format!("no segment covers day {t_days}")))?;
    let r = HawkesParams {
        lambda0: base_r.lambda0 * seg.lambda0_r.at(t_days),
        kappa: seg.kappa_r.unwrap_or(base_r.kappa),
        ..*base_r
    };
    let m = HawkesParams {
        lambda0: base_m.lambda0 * seg.lambda0_m,
        kappa: seg.kappa_m.unwrap_or(base_m.kappa),
        ..*base_m
    };
    Ok((r, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base() -> (HawkesParams, HawkesParams) {
        (
            HawkesParams::new(100.0, 0.8, 2.0, 250_000.0).unwrap(),
            HawkesParams::new(80.0, 0.6, 1.5, 300_000.0).unwrap(),
        )
    }

    fn tiles(s: &ScenarioSchedule) -> bool {
        s.segments[0].t_start == 0.0
            && s.segments.last().unwrap().t_end == HORIZON_DAYS
            && s.segments.windows(2).all(|w| w[0].t_end == w[1].t_start)
    }

    #[test]
    fn schedules_tile_the_horizon() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for id in ScenarioId::ALL {
            let s = build_schedule(id, &mut rng);
            assert!(tiles(&s), "{id}");
            assert_eq!(s.chi.is_some(), id == ScenarioId::SingleShock);
        }
        let chi = build_schedule(ScenarioId::SingleShock, &mut rng).chi.unwrap();
        assert!((2.0..=4.0).contains(&chi));
    }

    #[test]
    fn single_shock_values() {
        let (r, m) = base();
        let s = single_shock(3.0);
        let (pr, _) = params_at(&s, 35.0, &r, &m).unwrap();
        assert_relative_eq!(pr.lambda0, 300.0);
        let (pr, _) = params_at(&s, 55.0, &r, &m).unwrap();
        assert_relative_eq!(pr.lambda0, 100.0 * (1.0 + 2.0 * (-1.0f64).exp()), max_relative = 1e-12);
        let (pr, pm) = params_at(&s, 10.0, &r, &m).unwrap();
        assert_eq!((pr, pm), (r, m));
        let (before, _) = params_at(&s, 45.0 - 1e-9, &r, &m).unwrap();
        let (after, _) = params_at(&s, 45.0, &r, &m).unwrap();
        assert_relative_eq!(before.lambda0, after.lambda0, max_relative = 1e-12);
    }

    #[test]
    fn clustering_and_false_alarm_values() {
        let (r, m) = base();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s2 = build_schedule(ScenarioId::ProlongedClustering, &mut rng);
        let (pr, pm) = params_at(&s2, 50.0, &r, &m).unwrap();
        assert_relative_eq!(pr.kappa, 1.7);
        assert_relative_eq!(pr.kappa / pr.theta, 0.85);
        assert_relative_eq!(pm.kappa / pm.theta, 0.85);

        let s3 = build_schedule(ScenarioId::FalseAlarm, &mut rng);
        let (pr, pm) = params_at(&s3, 33.0, &r, &m).unwrap();
        assert_eq!((pr.lambda0, pm.lambda0), (150.0, 80.0));
        let (pr, pm) = params_at(&s3, 31.0, &r, &m).unwrap();
        assert_eq!((pr.lambda0, pm.lambda0), (100.0, 240.0));
        assert_eq!(params_at(&s3, 35.0, &r, &m).unwrap(), (r, m));
        for id in ScenarioId::ALL {
            assert_eq!(params_at(&build_schedule(id, &mut rng), 5.0, &r, &m).unwrap(), (r, m));
        }
        assert!(params_at(&s3, 92.5, &r, &m).is_err());
        assert!(params_at(&s3, -0.1, &r, &m).is_err());
    }

    #[test]
    fn scenario_tags_round_trip() {
        for id in ScenarioId::ALL {
            assert_eq!(id.as_str().parse::<ScenarioId>().unwrap(), id);
        }
        assert!("meteor".parse::<ScenarioId>().is_err());
    }
}
