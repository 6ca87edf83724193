//! Wall-clock performance sessions around the logical engine.

use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, Sender};
use log::warn;
use ntscore_core::engine::{check_event, Ack, EngineError, Snapshot};
use ntscore_core::score::Tu;
use ntscore_core::{ChoicePolicy, CompiledScore, Engine, Event, UnitRecord};

use crate::formats::TraceLine;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OverrunPolicy {
    #[default]
    Log,
    Abort,
}

impl FromStr for OverrunPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "log" => Ok(OverrunPolicy::Log),
            "abort" => Ok(OverrunPolicy::Abort),
            _ => Err(format!("unknown overrun policy `{s}` (log|abort)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RuntimeConfig {
    pub tu_period: Duration,
    pub policy: ChoicePolicy,
    /// Clamped to the score horizon.
    pub max_units: Tu,
    pub overrun: OverrunPolicy,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            tu_period: Duration::from_millis(50),
            policy: ChoicePolicy::deterministic(),
            max_units: Tu::MAX,
            overrun: OverrunPolicy::Log,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub unit: UnitRecord,
    pub compute_ms: f64,
}

impl TraceRecord {
    pub fn line(&self) -> TraceLine {
        TraceLine { tu: self.unit.tu, messages: self.unit.messages.clone(), compute_ms: self.compute_ms }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SessionState {
    Ready,
    Running,
    Completed,
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("already running")]
    AlreadyRunning,
    #[error("session not running")]
    NotRunning,
    #[error("tu-period must be at least 1 ms")]
    Period,
    #[error("unit {tu} took {ms:.3} ms, over the {period_ms} ms period")]
    Overrun { tu: Tu, ms: f64, period_ms: u128 },
    #[error("constraint failure at unit {0}")]
    ConstraintFailure(Tu),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Cloneable, non-blocking event sender for other threads. Events become
/// visible to the next tick that starts after `inject` returns.
#[derive(Clone)]
pub struct Injector {
    tx: Sender<Event>,
    cs: Arc<CompiledScore>,
}

impl Injector {
    pub fn inject(&self, ev: Event) -> Result<(), EngineError> {
        // vocabulary only; window state belongs to the engine thread
        check_event(&self.cs, &ev)?;
        let _ = self.tx.send(ev);
        Ok(())
    }
}

pub struct Session {
    engine: Engine,
    cfg: RuntimeConfig,
    state: SessionState,
    trace: Vec<TraceRecord>,
    pending: Vec<Event>,
    tx: Sender<Event>,
    rx: Receiver<Event>,
}

impl Session {
    pub fn new(cs: Arc<CompiledScore>, cfg: RuntimeConfig) -> Result<Self, SessionError> {
        if cfg.tu_period < Duration::from_millis(1) {
            return Err(SessionError::Period);
        }
        let engine = Engine::new(cs, cfg.policy, cfg.max_units)?;
        let (tx, rx) = crossbeam_channel::unbounded();
        Ok(Session { engine, cfg, state: SessionState::Ready, trace: Vec::new(), pending: Vec::new(), tx, rx })
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn is_ready(&self) -> bool {
        self.state == SessionState::Ready
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.cfg
    }

    pub fn compiled(&self) -> &Arc<CompiledScore> {
        self.engine.compiled()
    }

    pub fn start(&mut self) -> Result<(), SessionError> {
        if self.state != SessionState::Ready {
            return Err(SessionError::AlreadyRunning);
        }
        self.state = if self.engine.is_complete() { SessionState::Completed } else { SessionState::Running };
        Ok(())
    }

    pub fn injector(&self) -> Injector {
        Injector { tx: self.tx.clone(), cs: self.engine.compiled().clone() }
    }

    /// Offers a live event for the next unit.
    pub fn inject(&mut self, ev: Event) -> Result<Ack, SessionError> {
        let ack = self.engine.admit(&ev)?;
        if ack == Ack::Queued {
            self.pending.push(ev);
        }
        Ok(ack)
    }

    /// Queues a scripted event without the live window filter.
    pub fn schedule(&mut self, ev: Event) -> Result<(), SessionError> {
        self.engine.check_event(&ev)?;
        self.pending.push(ev);
        Ok(())
    }

    pub fn tick(&mut self) -> Result<&TraceRecord, SessionError> {
        match self.state {
            SessionState::Running => {}
            SessionState::Completed => return Err(EngineError::Completed.into()),
            SessionState::Ready => return Err(SessionError::NotRunning),
        }
        self.pending.extend(self.rx.try_iter());
        let inputs = std::mem::take(&mut self.pending);
        let begin = Instant::now();
        let unit = self.engine.tick(inputs)?;
        let compute_ms = begin.elapsed().as_secs_f64() * 1e3;
        let tu = unit.tu;
        let failure = unit.failure;
        self.trace.push(TraceRecord { unit, compute_ms });
        if self.engine.is_complete() {
            self.state = SessionState::Completed;
        }
        let abort = self.cfg.overrun == OverrunPolicy::Abort;
        if failure {
            warn!("constraint failure at unit {tu}");
            if abort {
                self.state = SessionState::Completed;
                return Err(SessionError::ConstraintFailure(tu));
            }
        }
        let period = self.cfg.tu_period;
        if compute_ms > period.as_secs_f64() * 1e3 {
            warn!("unit {tu} overran: {compute_ms:.3} ms");
            if abort {
                self.state = SessionState::Completed;
                return Err(SessionError::Overrun { tu, ms: compute_ms, period_ms: period.as_millis() });
            }
        }
        Ok(self.trace.last().expect("just pushed"))
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn snapshot(&self) -> Snapshot {
        self.engine.snapshot()
    }

    /// Next unit to run.
    pub fn tu(&self) -> Tu {
        self.engine.tu()
    }

    /// Runs to completion with scripted events, one unit per period when
    /// `clock` is set and back to back otherwise.
    pub fn run(
        &mut self,
        script: &[(Tu, Event)],
        clock: bool,
        mut observe: impl FnMut(&TraceRecord),
    ) -> Result<(), SessionError> {
        if self.state == SessionState::Ready {
            self.start()?;
        }
        let origin = Instant::now();
        let mut k: u32 = 0;
        while self.state == SessionState::Running {
            if clock {
                let deadline = origin + self.cfg.tu_period * k;
                let now = Instant::now();
                if deadline > now {
                    std::thread::sleep(deadline - now);
                }
            }
            let t = self.engine.tu();
            for (_, ev) in script.iter().filter(|(u, _)| *u == t) {
                self.schedule(ev.clone())?;
            }
            let rec = self.tick()?;
            observe(rec);
            k += 1;
        }
        Ok(())
    }
}
