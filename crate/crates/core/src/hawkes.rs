//! Marked self-exciting mint/redemption flows.
//!
//! Each stream is a univariate Hawkes process with exponential kernel,
//!
//! ```text
//! λ(t) = λ0 + Σ_{t_i < t} κ·exp(−θ (t − t_i))     (+ ζ·ΔP(t)² for redemptions)
//! ```
//!
//! and exponentially distributed marks (transaction sizes in dollars).
//! The intensity is tracked with the exact two-step filter: decay between
//! events, jump by κ at an event.
//!
//! Event generation uses a Poisson embedding: every stream owns a Poisson
//! random measure on `time × height`, laid out in horizontal bands of fixed
//! height per simulation segment, and a candidate point is accepted when its
//! height lies below the current intensity. Each (segment, band) cell draws
//! from its own keyed random stream, so runs that differ only in intensity
//! share the same candidate points. This yields the thinning coupling (more
//! baseline intensity never removes events) on top of plain determinism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Height of one candidate band (events/hour).
const BAND_HEIGHT: f64 = 64.0;

/// Realized intensities above this abort the simulation.
pub const EXPLOSION_GUARD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Mint,
    Redemption,
}

/// Parameters of one marked Hawkes stream. Rates are per hour, marks in dollars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    pub lambda0: f64,
    pub kappa: f64,
    pub theta: f64,
    pub mark_mean: f64,
}

impl HawkesParams {
    /// Validated constructor. Supercritical kernels are accepted here; the
    /// scenario layer decides whether near-critical operation is allowed.
    pub fn new(lambda0: f64, kappa: f64, theta: f64, mark_mean: f64) -> Result<Self> {
        let p = Self {
            lambda0,
            kappa,
            theta,
            mark_mean,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.lambda0.is_finite() && self.lambda0 >= 0.0, || {
            format!("lambda0 must be >= 0, got {}", self.lambda0)
        })?;
        ensure(self.kappa.is_finite() && self.kappa > 0.0, || {
            format!("kappa must be > 0, got {}", self.kappa)
        })?;
        ensure(self.theta.is_finite() && self.theta > 0.0, || {
            format!("theta must be > 0, got {}", self.theta)
        })?;
        ensure(self.mark_mean.is_finite() && self.mark_mean > 0.0, || {
            format!("mark_mean must be > 0, got {}", self.mark_mean)
        })
    }

    /// Long-run mean intensity λ0/(1 − κ/θ) of a subcritical stream.
    pub fn stationary_intensity(&self) -> Option<f64> {
        let n = self.kappa / self.theta;
        (n < 1.0).then(|| self.lambda0 / (1.0 - n))
    }
}

/// Expected number of direct offspring per event, κ/θ.
pub fn branching_ratio(params: &HawkesParams) -> Result<f64> {
    ensure(params.theta > 0.0, || {
        format!("theta must be > 0, got {}", params.theta)
    })?;
    Ok(params.kappa / params.theta)
}

/// Filtered intensity λ0 + excitation of one stream (peg feedback excluded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityState {
    pub current: f64,
    pub last_update: f64,
}

impl IntensityState {
    pub fn at_baseline(params: &HawkesParams, t: f64) -> Self {
        Self {
            current: params.lambda0,
            last_update: t,
        }
    }

    /// Shift the intensity when the baseline changes from `old` to `new`;
    /// accumulated excitation is preserved.
    pub fn rebase(&mut self, old_lambda0: f64, new_lambda0: f64) {
        self.current += new_lambda0 - old_lambda0;
    }
}

/// Between-event update: λ0 + (λ − λ0)·exp(−θ·dt).
pub fn decay_intensity(
    state: IntensityState,
    params: &HawkesParams,
    dt: f64,
) -> Result<IntensityState> {
    ensure(dt >= 0.0, || format!("decay step must be >= 0, got {dt}"))?;
    if dt == 0.0 {
        return Ok(state);
    }
    Ok(IntensityState {
        current: params.lambda0 + (state.current - params.lambda0) * (-params.theta * dt).exp(),
        last_update: state.last_update + dt,
    })
}

/// At-event update: λ + κ.
pub fn apply_event_jump(state: IntensityState, params: &HawkesParams) -> IntensityState {
    IntensityState {
        current: state.current + params.kappa,
        last_update: state.last_update,
    }
}

/// Strength ζ of the redemption response to peg deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PegFeedback {
    pub zeta: f64,
}

impl PegFeedback {
    pub fn new(zeta: f64) -> Result<Self> {
        ensure(zeta.is_finite() && zeta >= 0.0, || {
            format!("zeta must be >= 0, got {zeta}")
        })?;
        Ok(Self { zeta })
    }

    /// Additive redemption intensity ζ·ΔP².
    pub fn intensity(&self, delta_p: f64) -> f64 {
        self.zeta * delta_p * delta_p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkedEvent {
    pub time: f64,
    pub kind: EventKind,
    pub size: f64,
    /// Total stream intensity just before the event (feedback included).
    pub intensity: f64,
}

/// Exponential transaction size with the given mean.
pub fn sample_mark<R: Rng + ?Sized>(mark_mean: f64, rng: &mut R) -> f64 {
    let exp = Exp::new(1.0 / mark_mean).expect("mark_mean must be > 0");
    // Exp can return exactly 0 with vanishing probability; sizes are strictly positive.
    loop {
        let z: f64 = exp.sample(rng);
        if z > 0.0 {
            return z;
        }
    }
}

/// Intensity states of both streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityPair {
    pub redemption: IntensityState,
    pub mint: IntensityState,
}

impl IntensityPair {
    pub fn at_baseline(params_r: &HawkesParams, params_m: &HawkesParams, t: f64) -> Self {
        Self {
            redemption: IntensityState::at_baseline(params_r, t),
            mint: IntensityState::at_baseline(params_m, t),
        }
    }
}

/// Keyed random source backing the Poisson embedding.
#[derive(Debug, Clone)]
pub struct EventSource {
    base: ChaCha8Rng,
}

impl EventSource {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn cell_rng(&self, kind: EventKind, segment: u64, band: u32) -> ChaCha8Rng {
        debug_assert!(segment < (1 << 42));
        let kind_bit = match kind {
            EventKind::Redemption => 0u64,
            EventKind::Mint => 1u64,
        };
        let mut rng = self.base.clone();
        rng.set_stream((kind_bit << 63) | (segment << 20) | u64::from(band));
        rng.set_word_pos(0);
        rng
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    time: f64,
    height: f64,
    unit_mark: f64,
}

/// Candidate points of one stream over one segment, generated band by band.
struct Embedding<'a> {
    source: &'a EventSource,
    kind: EventKind,
    segment: u64,
    t0: f64,
    t1: f64,
    bands: u32,
    /// Unprocessed candidates, sorted by descending time (next one is last).
    pending: Vec<Candidate>,
}

impl<'a> Embedding<'a> {
    fn new(source: &'a EventSource, kind: EventKind, segment: u64, t0: f64, t1: f64) -> Self {
        Self {
            source,
            kind,
            segment,
            t0,
            t1,
            bands: 0,
            pending: Vec::new(),
        }
    }

    fn ceiling(&self) -> f64 {
        f64::from(self.bands) * BAND_HEIGHT
    }

    /// Make sure bands cover `level`; keeps only new points strictly after `after`.
    fn cover(&mut self, level: f64, after: f64) {
        if level <= self.ceiling() {
            return;
        }
        let poisson = Poisson::new(BAND_HEIGHT * (self.t1 - self.t0)).expect("positive mean");
        let mut added = false;
        while self.ceiling() < level {
            let band = self.bands;
            let mut rng = self.source.cell_rng(self.kind, self.segment, band);
            let n = poisson.sample(&mut rng) as usize;
            let floor = f64::from(band) * BAND_HEIGHT;
            for _ in 0..n {
                let time = self.t0 + (self.t1 - self.t0) * rng.random::<f64>();
                let height = floor + BAND_HEIGHT * rng.random::<f64>();
                let unit_mark: f64 = Exp1.sample(&mut rng);
                if time > after {
                    self.pending.push(Candidate {
                        time,
                        height,
                        unit_mark,
                    });
                    added = true;
                }
            }
            self.bands += 1;
        }
        if added {
            self.pending
                .sort_by(|a, b| b.time.total_cmp(&a.time));
        }
    }
}

/// Output of [`simulate_stream_segment`].
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentOutcome {
    pub events: Vec<MarkedEvent>,
    pub states: IntensityPair,
}

/// Stream-specific inputs of the thinning loop.
struct StreamSpec<'a> {
    kind: EventKind,
    params: &'a HawkesParams,
    feedback: Option<PegFeedback>,
}

/// Simulate both streams on `[t0, t1)`; `segment` keys the random cells.
///
/// Returned states are the exact filter values at `t1`. The embedding is
/// keyed by `segment`, so callers simulating a horizon must use a fixed
/// segment grid and number segments consecutively.
#[allow(clippy::too_many_arguments)]
pub fn simulate_stream_segment(
    params_r: &HawkesParams,
    params_m: &HawkesParams,
    feedback: PegFeedback,
    peg_lookup: impl Fn(f64) -> f64,
    t0: f64,
    t1: f64,
    states: IntensityPair,
    source: &EventSource,
    segment: u64,
) -> Result<SegmentOutcome> {
    ensure(t0 < t1, || format!("segment needs t0 < t1, got [{t0}, {t1})"))?;
    let redemption = StreamSpec {
        kind: EventKind::Redemption,
        params: params_r,
        feedback: Some(feedback),
    };
    let mint = StreamSpec {
        kind: EventKind::Mint,
        params: params_m,
        feedback: None,
    };
    let mut events = Vec::new();
    let r = thin_stream(&redemption, &peg_lookup, t0, t1, states.redemption, source, segment, &mut events)?;
    let m = thin_stream(&mint, &peg_lookup, t0, t1, states.mint, source, segment, &mut events)?;
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(SegmentOutcome {
        events,
        states: IntensityPair {
            redemption: r,
            mint: m,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn thin_stream(
    spec: &StreamSpec<'_>,
    peg_lookup: &impl Fn(f64) -> f64,
    t0: f64,
    t1: f64,
    state: IntensityState,
    source: &EventSource,
    segment: u64,
    out: &mut Vec<MarkedEvent>,
) -> Result<IntensityState> {
    let params = spec.params;
    let extra = |t: f64| -> Result<f64> {
        match spec.feedback {
            Some(fb) if fb.zeta > 0.0 => {
                let dp = peg_lookup(t);
                if !dp.is_finite() {
                    return Err(Error::Simulation {
                        time: t,
                        reason: format!("peg lookup returned {dp}"),
                    });
                }
                Ok(fb.intensity(dp))
            }
            _ => Ok(0.0),
        }
    };
    let guard = |t: f64, level: f64| -> Result<()> {
        if level.is_finite() && level <= EXPLOSION_GUARD {
            Ok(())
        } else {
            Err(Error::Simulation {
                time: t,
                reason: format!(
                    "{:?} intensity {level:.3e}/h exceeds explosion guard",
                    spec.kind
                ),
            })
        }
    };

    let mut state = if state.last_update < t0 {
        decay_intensity(state, params, t0 - state.last_update)?
    } else {
        state
    };
    let mut emb = Embedding::new(source, spec.kind, segment, t0, t1);
    let start_level = state.current + extra(t0)?;
    guard(t0, start_level)?;
    emb.cover(start_level, f64::NEG_INFINITY);

    while let Some(c) = emb.pending.pop() {
        state = decay_intensity(state, params, c.time - state.last_update)?;
        let level = state.current + extra(c.time)?;
        if level > emb.ceiling() {
            // Only reachable through a rising peg path inside the segment.
            emb.pending.push(c);
            emb.cover(level, c.time);
            continue;
        }
        if c.height < level {
            out.push(MarkedEvent {
                time: c.time,
                kind: spec.kind,
                size: (c.unit_mark * params.mark_mean).max(f64::MIN_POSITIVE),
                intensity: level,
            });
            state = apply_event_jump(state, params);
            let after = state.current + extra(c.time)?;
            guard(c.time, after)?;
            emb.cover(after, c.time);
        }
    }
    decay_intensity(state, params, t1 - state.last_update)
}
