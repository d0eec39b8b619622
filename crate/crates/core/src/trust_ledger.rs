//! Trust accounting: credits, clamped penalties and the service gate.

use std::fmt;
use std::io;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PeerId(pub u32);

impl PeerId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("unknown peer id {0}")]
    UnknownPeer(PeerId),
    #[error("invalid ledger config: {0}")]
    InvalidConfig(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerConfig {
    pub floor: f64,
    pub threshold: f64,
    pub penalty: f64,
}

impl LedgerConfig {
    pub fn new(floor: f64, threshold: f64, penalty: f64) -> Result<Self, LedgerError> {
        let config = Self {
            floor,
            threshold,
            penalty,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), LedgerError> {
        if !self.floor.is_finite() || !self.threshold.is_finite() {
            return Err(LedgerError::InvalidConfig("floor and threshold must be finite".into()));
        }
        if self.threshold < self.floor {
            return Err(LedgerError::InvalidConfig(format!(
                "threshold {} is below floor {}",
                self.threshold, self.floor
            )));
        }
        if !(self.penalty > 0.0) || !self.penalty.is_finite() {
            return Err(LedgerError::InvalidConfig(format!(
                "penalty K = {} must be positive",
                self.penalty
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrustEventKind {
    VolunteerCredit,
    SelectedTruthfulCredit,
    Penalty,
}

impl TrustEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TrustEventKind::VolunteerCredit => "volunteer_credit",
            TrustEventKind::SelectedTruthfulCredit => "selected_truthful_credit",
            TrustEventKind::Penalty => "penalty",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustEvent {
    pub round: u64,
    pub peer: PeerId,
    pub kind: TrustEventKind,
    /// Penalty in force; 0 for credits.
    pub penalty: f64,
    /// Change actually applied after clamping.
    pub delta: f64,
    pub new_value: f64,
}

/// Clamped update rule shared by live accounting and replay.
fn apply(value: f64, kind: TrustEventKind, penalty: f64, floor: f64) -> f64 {
    match kind {
        TrustEventKind::VolunteerCredit | TrustEventKind::SelectedTruthfulCredit => value + 1.0,
        TrustEventKind::Penalty => (value - penalty).max(floor),
    }
}

/// Single-writer store of every peer's cumulative trust.
#[derive(Debug, Clone)]
pub struct TrustLedger {
    config: LedgerConfig,
    scores: Vec<f64>,
    log: Option<Vec<TrustEvent>>,
}

impl TrustLedger {
    pub fn new(config: LedgerConfig) -> Result<Self, LedgerError> {
        config.validate()?;
        Ok(Self {
            config,
            scores: Vec::new(),
            log: None,
        })
    }

    /// Same as `new`, but every mutation is also appended to an event log.
    pub fn with_log(config: LedgerConfig) -> Result<Self, LedgerError> {
        let mut ledger = Self::new(config)?;
        ledger.log = Some(Vec::new());
        Ok(ledger)
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.config
    }

    /// New peers start at the floor.
    pub fn register(&mut self) -> PeerId {
        let id = PeerId(self.scores.len() as u32);
        self.scores.push(self.config.floor);
        id
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn trust(&self, peer: PeerId) -> Result<f64, LedgerError> {
        self.scores
            .get(peer.index())
            .copied()
            .ok_or(LedgerError::UnknownPeer(peer))
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn events(&self) -> Option<&[TrustEvent]> {
        self.log.as_deref()
    }

    pub fn take_events(&mut self) -> Vec<TrustEvent> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn credit(&mut self, peer: PeerId) -> Result<f64, LedgerError> {
        self.record(peer, TrustEventKind::VolunteerCredit, 0)
    }

    pub fn penalize(&mut self, peer: PeerId) -> Result<f64, LedgerError> {
        self.record(peer, TrustEventKind::Penalty, 0)
    }

    pub fn passes_threshold(&self, peer: PeerId) -> Result<bool, LedgerError> {
        Ok(self.trust(peer)? >= self.config.threshold)
    }

    /// Applies one event of `kind` at `round` and returns the new value.
    pub fn record(&mut self, peer: PeerId, kind: TrustEventKind, round: u64) -> Result<f64, LedgerError> {
        let cfg = self.config;
        let slot = self
            .scores
            .get_mut(peer.index())
            .ok_or(LedgerError::UnknownPeer(peer))?;
        let old = *slot;
        let new = apply(old, kind, cfg.penalty, cfg.floor);
        *slot = new;
        if let Some(log) = self.log.as_mut() {
            log.push(TrustEvent {
                round,
                peer,
                kind,
                penalty: if kind == TrustEventKind::Penalty { cfg.penalty } else { 0.0 },
                delta: new - old,
                new_value: new,
            });
        }
        Ok(new)
    }
}

/// Rebuilds scores for `peers` peers by folding `events` from the floor.
pub fn replay(events: &[TrustEvent], floor: f64, peers: usize) -> Result<Vec<f64>, LedgerError> {
    let mut scores = vec![floor; peers];
    for ev in events {
        let slot = scores
            .get_mut(ev.peer.index())
            .ok_or(LedgerError::UnknownPeer(ev.peer))?;
        *slot = apply(*slot, ev.kind, ev.penalty, floor);
    }
    Ok(scores)
}

pub const EVENT_CSV_HEADER: [&str; 5] = ["round", "peer_id", "kind", "delta", "new_value"];

/// Writes `round,peer_id,kind,delta,new_value` rows.
pub fn write_events_csv<W: io::Write>(events: &[TrustEvent], out: W) -> Result<(), LedgerError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_CSV_HEADER)?;
    for ev in events {
        w.write_record([
            ev.round.to_string(),
            ev.peer.to_string(),
            ev.kind.as_str().to_string(),
            format!("{:.6}", ev.delta),
            format!("{:.6}", ev.new_value),
        ])?;
    }
    w.flush()?;
    Ok(())
}
