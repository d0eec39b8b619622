//! Agent-based simulation of the trust mechanism.
//!
//! A population of typed peers plays repeated request rounds. A cycle is a
//! fixed batch of `queries_per_cycle` rounds; after each cycle the average
//! trust per category is recorded.
//!
//! Every round `r` (counted from 0 over the whole run) draws from its own
//! stream `StreamRng::new(seed).derive(ROUND, r)`, in this order:
//!
//! 1. requester: `below(joined)`;
//! 2. file: `below(catalog_size)` repeated until the requester does not hold it;
//! 3. reach sample: Floyd's algorithm over the `joined - 1` other peers;
//! 4. gate check (no draw), then selection mode: `next_f64() < p` means BT;
//! 5. pick: `below(#ties)` for BT, `below(#volunteers)` for R.
//!
//! Holdings of peer `i` come from `derive(HOLDINGS, i)` via Floyd's algorithm.

use std::collections::BTreeMap;
use std::io;

use rayon::prelude::*;
use thiserror::Error;

use crate::game_model;
use crate::rng::{domain, StreamRng};
use crate::trust_ledger::{LedgerConfig, LedgerError, PeerId, TrustEvent, TrustEventKind, TrustLedger};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config key `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error("requester {0} has not joined")]
    NotJoined(PeerId),
    #[error("empty volunteer set")]
    NoVolunteers,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("metrics schema: {0}")]
    Schema(String),
}

fn bad_config(key: &'static str, reason: impl Into<String>) -> SimError {
    SimError::InvalidConfig {
        key,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Behavior {
    /// Answers truthfully and serves well.
    GoodServer,
    /// Answers truthfully, serves badly when selected.
    BadServer,
    /// Answers every query, never serves.
    Liar,
}

impl Behavior {
    pub const ALL: [Behavior; 3] = [Behavior::GoodServer, Behavior::BadServer, Behavior::Liar];

    pub fn answers_truthfully(self) -> bool {
        !matches!(self, Behavior::Liar)
    }

    pub fn serves_well(self) -> bool {
        matches!(self, Behavior::GoodServer)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Behavior::GoodServer => "good",
            Behavior::BadServer => "bad",
            Behavior::Liar => "liar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "good" | "good_server" | "goodserver" => Some(Behavior::GoodServer),
            "bad" | "bad_server" | "badserver" => Some(Behavior::BadServer),
            "liar" => Some(Behavior::Liar),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Peer {
    pub id: PeerId,
    pub behavior: Behavior,
    /// Sorted file ids.
    pub holdings: Vec<u32>,
    pub join_cycle: u64,
}

impl Peer {
    pub fn holds(&self, file: u32) -> bool {
        self.holdings.binary_search(&file).is_ok()
    }

    pub fn is_founder(&self) -> bool {
        self.join_cycle == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NewcomerBatch {
    pub cycle: u64,
    pub count: u32,
    pub behavior: Behavior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub good: u32,
    pub bad: u32,
    pub liar: u32,
    pub newcomers: Vec<NewcomerBatch>,
    pub catalog_size: u32,
    pub n: u32,
    pub p: f64,
    pub k: f64,
    pub threshold: f64,
    pub floor: f64,
    pub queries_per_cycle: u32,
    pub reach: u32,
    pub total_cycles: u64,
    pub seed: u64,
    /// Requester's profit from a successful download.
    pub profit: f64,
    /// Requester's transaction cost.
    pub cost: f64,
    /// Successful downloads join the requester's holdings.
    pub acquire_on_success: bool,
}

pub const DEFAULT_TARGET_VOLUNTEERS: u32 = 30;

impl SimConfig {
    /// 2000 founders (70/15/15), 100 good newcomers at cycle 300,
    /// n = 100, p = 0.9, K = 1.1 x 299, threshold 50, one query per founder
    /// per cycle, 1000 cycles.
    pub fn desk_scale(seed: u64) -> Self {
        let (good, bad, liar) = (1400, 300, 300);
        let n = 100;
        let p = 0.9;
        let k = game_model::recommended_k(DEFAULT_TARGET_VOLUNTEERS, p, game_model::DEFAULT_K_MARGIN)
            .expect("valid defaults");
        Self {
            good,
            bad,
            liar,
            newcomers: vec![NewcomerBatch {
                cycle: 300,
                count: 100,
                behavior: Behavior::GoodServer,
            }],
            catalog_size: 1000,
            n,
            p,
            k,
            threshold: 50.0,
            floor: 0.0,
            queries_per_cycle: good + bad + liar,
            reach: calibrated_reach(good, bad, liar, n, DEFAULT_TARGET_VOLUNTEERS),
            total_cycles: 1000,
            seed,
            profit: 10.0,
            cost: 1.0,
            acquire_on_success: false,
        }
    }

    pub fn founders(&self) -> u32 {
        self.good + self.bad + self.liar
    }

    pub fn population(&self) -> u32 {
        self.founders() + self.newcomers.iter().map(|b| b.count).sum::<u32>()
    }

    pub fn holdings_size(&self) -> u32 {
        (f64::from(self.catalog_size) / f64::from(self.n)).round() as u32
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.founders() < 2 {
            return Err(bad_config("good", "at least two founders are required"));
        }
        if self.n == 0 {
            return Err(bad_config("n", "must be at least 1"));
        }
        if self.catalog_size < self.n {
            return Err(bad_config(
                "catalog_size",
                format!("{} < n = {}, holdings would be empty", self.catalog_size, self.n),
            ));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(bad_config("p", format!("{} is not in [0, 1]", self.p)));
        }
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(bad_config("k", format!("{} must be positive", self.k)));
        }
        if !self.floor.is_finite() {
            return Err(bad_config("floor", "must be finite"));
        }
        if !self.threshold.is_finite() || self.threshold < self.floor {
            return Err(bad_config(
                "threshold",
                format!("{} must be finite and at least floor {}", self.threshold, self.floor),
            ));
        }
        if self.queries_per_cycle == 0 {
            return Err(bad_config("queries_per_cycle", "must be positive"));
        }
        if self.reach == 0 {
            return Err(bad_config("reach", "must be positive"));
        }
        if self.reach > self.founders() {
            return Err(bad_config(
                "reach",
                format!("{} exceeds the population of {}", self.reach, self.founders()),
            ));
        }
        if self.total_cycles == 0 {
            return Err(bad_config("total_cycles", "must be positive"));
        }
        if !(self.cost > 0.0) || !(self.profit > self.cost) {
            return Err(bad_config("profit", "need profit > cost > 0"));
        }
        for b in &self.newcomers {
            if b.cycle == 0 {
                return Err(bad_config("newcomers", "newcomers join at cycle 1 or later"));
            }
            if b.count == 0 {
                return Err(bad_config("newcomers", "batch count must be positive"));
            }
        }
        Ok(())
    }

    fn ledger_config(&self) -> LedgerConfig {
        LedgerConfig {
            floor: self.floor,
            threshold: self.threshold,
            penalty: self.k,
        }
    }
}

/// Reach making the expected volunteer count about `target`:
/// `reach * (liar_frac + truthful_frac / n) = target`, capped at the
/// founder count.
pub fn calibrated_reach(good: u32, bad: u32, liar: u32, n: u32, target: u32) -> u32 {
    let total = f64::from(good + bad + liar);
    if total == 0.0 || n == 0 {
        return 1;
    }
    let rate = f64::from(liar) / total + f64::from(good + bad) / total / f64::from(n);
    let reach = (f64::from(target) / rate).round();
    reach.clamp(1.0, total) as u32
}

/// Floyd's sampling of `k` distinct values from `[0, m)`, in draw order.
fn floyd_sample(rng: &mut StreamRng, m: u32, k: u32, marks: &mut Vec<bool>, out: &mut Vec<u32>) {
    out.clear();
    if marks.len() < m as usize {
        marks.resize(m as usize, false);
    }
    for j in (m - k)..m {
        let t = rng.below(u64::from(j) + 1) as u32;
        let pick = if marks[t as usize] { j } else { t };
        marks[pick as usize] = true;
        out.push(pick);
    }
    for &x in out.iter() {
        marks[x as usize] = false;
    }
}

/// All peers of the run, founders first, then newcomer batches ordered by
/// join cycle. Ids are dense and ascend with join order.
pub fn build_population(config: &SimConfig, root: &StreamRng) -> Result<Vec<Peer>, SimError> {
    config.validate()?;
    let mut kinds: Vec<(Behavior, u64)> = Vec::with_capacity(config.population() as usize);
    for (behavior, count) in [
        (Behavior::GoodServer, config.good),
        (Behavior::BadServer, config.bad),
        (Behavior::Liar, config.liar),
    ] {
        kinds.extend(std::iter::repeat_n((behavior, 0), count as usize));
    }
    let mut batches = config.newcomers.clone();
    batches.sort_by_key(|b| b.cycle);
    for b in &batches {
        kinds.extend(std::iter::repeat_n((b.behavior, b.cycle), b.count as usize));
    }

    let size = config.holdings_size();
    let mut marks = Vec::new();
    let mut files = Vec::new();
    Ok(kinds
        .into_iter()
        .enumerate()
        .map(|(i, (behavior, join_cycle))| {
            let mut rng = root.derive(domain::HOLDINGS, i as u64);
            floyd_sample(&mut rng, config.catalog_size, size, &mut marks, &mut files);
            let mut holdings = files.clone();
            holdings.sort_unstable();
            Peer {
                id: PeerId(i as u32),
                behavior,
                holdings,
                join_cycle,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionMode {
    ByTrust,
    Random,
}

/// Picks a server among `volunteers`: with probability `p` one of maximal
/// trust (uniform among ties), otherwise a uniform volunteer.
pub fn select_server(
    volunteers: &[PeerId],
    scores: &[f64],
    p: f64,
    rng: &mut StreamRng,
) -> Result<(PeerId, SelectionMode), SimError> {
    if volunteers.is_empty() {
        return Err(SimError::NoVolunteers);
    }
    let mode = if rng.next_f64() < p {
        SelectionMode::ByTrust
    } else {
        SelectionMode::Random
    };
    Ok((select_in_mode(volunteers, scores, mode, rng)?, mode))
}

pub fn select_in_mode(
    volunteers: &[PeerId],
    scores: &[f64],
    mode: SelectionMode,
    rng: &mut StreamRng,
) -> Result<PeerId, SimError> {
    if volunteers.is_empty() {
        return Err(SimError::NoVolunteers);
    }
    match mode {
        SelectionMode::Random => Ok(volunteers[rng.index(volunteers.len())]),
        SelectionMode::ByTrust => {
            let trust = |id: PeerId| scores[id.index()];
            let best = volunteers
                .iter()
                .map(|&v| trust(v))
                .fold(f64::NEG_INFINITY, f64::max);
            let ties: Vec<PeerId> = volunteers.iter().copied().filter(|&v| trust(v) == best).collect();
            Ok(ties[rng.index(ties.len())])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateOutcome {
    Served,
    /// Requester below threshold: volunteers are credited, nobody serves.
    ReputationOnly,
    NoVolunteers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransactionOutcome {
    Success,
    Failure,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: u64,
    pub requester: PeerId,
    pub file: Option<u32>,
    pub volunteers: Vec<PeerId>,
    pub gate: GateOutcome,
    pub mode: Option<SelectionMode>,
    pub selected: Option<PeerId>,
    pub outcome: TransactionOutcome,
    /// Requester utility: profit - cost on success, -cost on failure.
    pub requester_utility: Option<f64>,
    pub deltas: Vec<(PeerId, f64)>,
}

impl RoundRecord {
    pub fn credits(&self) -> usize {
        self.deltas.iter().filter(|(_, d)| *d > 0.0).count()
    }

    pub fn penalized(&self) -> bool {
        matches!(self.outcome, TransactionOutcome::Failure)
    }
}

/// Applies the trust consequences of one round. `selection` is `None` for
/// reputation-only rounds. Returns the deltas and the transaction outcome.
pub fn settle_round(
    ledger: &mut TrustLedger,
    peers: &[Peer],
    volunteers: &[PeerId],
    selection: Option<PeerId>,
    round: u64,
) -> Result<(Vec<(PeerId, f64)>, TransactionOutcome), SimError> {
    let mut deltas = Vec::with_capacity(volunteers.len());
    let mut outcome = TransactionOutcome::None;
    for &v in volunteers {
        let before = ledger.trust(v)?;
        let kind = match selection {
            Some(s) if s == v => {
                if peers[v.index()].behavior.serves_well() {
                    outcome = TransactionOutcome::Success;
                    TrustEventKind::SelectedTruthfulCredit
                } else {
                    outcome = TransactionOutcome::Failure;
                    TrustEventKind::Penalty
                }
            }
            _ => TrustEventKind::VolunteerCredit,
        };
        let after = ledger.record(v, kind, round)?;
        deltas.push((v, after - before));
    }
    Ok((deltas, outcome))
}

/// Aggregates over one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleMetrics {
    pub cycle: u64,
    pub avg_trust_good: Option<f64>,
    pub avg_trust_bad: Option<f64>,
    pub avg_trust_liar: Option<f64>,
    pub avg_trust_newcomer_good: Option<f64>,
    /// Successes over served transactions; `None` with no transactions.
    pub success_rate: Option<f64>,
    pub penalties: u64,
}

/// Per-cycle trust curves, exported as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsSeries {
    pub rows: Vec<CycleMetrics>,
}

pub const METRICS_CSV_HEADER: [&str; 7] = [
    "cycle",
    "avg_trust_good",
    "avg_trust_bad",
    "avg_trust_liar",
    "avg_trust_newcomer_good",
    "success_rate",
    "penalties",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn parse_opt(field: &str, column: &str, line: usize) -> Result<Option<f64>, SimError> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| SimError::Schema(format!("line {line}: `{field}` in column {column} is not a number")))
}

impl MetricsSeries {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, f: impl Fn(&CycleMetrics) -> Option<f64>) -> Vec<Option<f64>> {
        self.rows.iter().map(f).collect()
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(METRICS_CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.cycle.to_string(),
                fmt_opt(r.avg_trust_good),
                fmt_opt(r.avg_trust_bad),
                fmt_opt(r.avg_trust_liar),
                fmt_opt(r.avg_trust_newcomer_good),
                fmt_opt(r.success_rate),
                r.penalties.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Parses the CSV written by [`MetricsSeries::write_csv`]; the header
    /// must match exactly.
    pub fn read_csv<R: io::Read>(input: R) -> Result<Self, SimError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = rdr.headers()?.clone();
        if header.iter().ne(METRICS_CSV_HEADER.iter().copied()) {
            return Err(SimError::Schema(format!(
                "expected header `{}`, found `{}`",
                METRICS_CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != METRICS_CSV_HEADER.len() {
                return Err(SimError::Schema(format!("line {line}: expected 7 fields")));
            }
            let int = |idx: usize| -> Result<u64, SimError> {
                rec[idx].parse::<u64>().map_err(|_| {
                    SimError::Schema(format!(
                        "line {line}: `{}` in column {} is not an integer",
                        &rec[idx], METRICS_CSV_HEADER[idx]
                    ))
                })
            };
            let real = |idx: usize| parse_opt(&rec[idx], METRICS_CSV_HEADER[idx], line);
            rows.push(CycleMetrics {
                cycle: int(0)?,
                avg_trust_good: real(1)?,
                avg_trust_bad: real(2)?,
                avg_trust_liar: real(3)?,
                avg_trust_newcomer_good: real(4)?,
                success_rate: real(5)?,
                penalties: int(6)?,
            });
        }
        Ok(Self { rows })
    }
}

/// Owns the population and the ledger; rounds run strictly in sequence.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    root: StreamRng,
    peers: Vec<Peer>,
    ledger: TrustLedger,
    joined: u32,
    cycle: u64,
    round: u64,
    marks: Vec<bool>,
    sample: Vec<u32>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        Self::build(config, false)
    }

    /// Like `new`, but the ledger keeps the full event log.
    pub fn with_trace(config: SimConfig) -> Result<Self, SimError> {
        Self::build(config, true)
    }

    fn build(config: SimConfig, trace: bool) -> Result<Self, SimError> {
        let root = StreamRng::new(config.seed);
        let peers = build_population(&config, &root)?;
        let mut ledger = if trace {
            TrustLedger::with_log(config.ledger_config())?
        } else {
            TrustLedger::new(config.ledger_config())?
        };
        for _ in &peers {
            ledger.register();
        }
        let joined = config.founders();
        Ok(Self {
            config,
            root,
            peers,
            ledger,
            joined,
            cycle: 0,
            round: 0,
            marks: Vec::new(),
            sample: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn peers(&self) -> &[Peer] {
        &self.peers
    }

    pub fn ledger(&self) -> &TrustLedger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut TrustLedger {
        &mut self.ledger
    }

    pub fn joined(&self) -> &[Peer] {
        &self.peers[..self.joined as usize]
    }

    pub fn trust(&self, peer: PeerId) -> f64 {
        self.ledger.scores()[peer.index()]
    }

    /// Stream for the next round.
    pub fn round_rng(&self) -> StreamRng {
        self.root.derive(domain::ROUND, self.round)
    }

    /// Admits every peer whose join cycle has arrived.
    pub fn inject_newcomers(&mut self) {
        while (self.joined as usize) < self.peers.len() && self.peers[self.joined as usize].join_cycle <= self.cycle {
            self.joined += 1;
        }
    }

    /// Requester drawn uniformly from joined peers.
    pub fn draw_requester(&self, rng: &mut StreamRng) -> PeerId {
        PeerId(rng.below(u64::from(self.joined)) as u32)
    }

    /// Runs one round of the request/answer/transaction protocol.
    pub fn run_round(&mut self, requester: PeerId, rng: &mut StreamRng) -> Result<RoundRecord, SimError> {
        if requester.0 >= self.joined {
            return Err(SimError::NotJoined(requester));
        }
        let round = self.round;
        self.round += 1;
        let mut record = RoundRecord {
            round,
            requester,
            file: None,
            volunteers: Vec::new(),
            gate: GateOutcome::NoVolunteers,
            mode: None,
            selected: None,
            outcome: TransactionOutcome::None,
            requester_utility: None,
            deltas: Vec::new(),
        };

        let req = &self.peers[requester.index()];
        if req.holdings.len() >= self.config.catalog_size as usize {
            return Ok(record);
        }
        let file = loop {
            let f = rng.below(u64::from(self.config.catalog_size)) as u32;
            if !req.holds(f) {
                break f;
            }
        };
        record.file = Some(file);

        let others = self.joined - 1;
        let reach = self.config.reach.min(others);
        floyd_sample(rng, others, reach, &mut self.marks, &mut self.sample);
        self.sample.sort_unstable();
        let volunteers: Vec<PeerId> = self
            .sample
            .iter()
            .map(|&x| if x >= requester.0 { x + 1 } else { x })
            .map(PeerId)
            .filter(|id| {
                let peer = &self.peers[id.index()];
                !peer.behavior.answers_truthfully() || peer.holds(file)
            })
            .collect();
        record.volunteers = volunteers;
        if record.volunteers.is_empty() {
            return Ok(record);
        }

        if !self.ledger.passes_threshold(requester)? {
            record.gate = GateOutcome::ReputationOnly;
            let (deltas, _) = settle_round(&mut self.ledger, &self.peers, &record.volunteers, None, round)?;
            record.deltas = deltas;
            return Ok(record);
        }

        record.gate = GateOutcome::Served;
        let (selected, mode) = select_server(&record.volunteers, self.ledger.scores(), self.config.p, rng)?;
        record.mode = Some(mode);
        record.selected = Some(selected);
        let (deltas, outcome) =
            settle_round(&mut self.ledger, &self.peers, &record.volunteers, Some(selected), round)?;
        record.deltas = deltas;
        record.outcome = outcome;
        record.requester_utility = Some(match outcome {
            TransactionOutcome::Success => self.config.profit - self.config.cost,
            _ => -self.config.cost,
        });
        if outcome == TransactionOutcome::Success && self.config.acquire_on_success {
            let holdings = &mut self.peers[requester.index()].holdings;
            if let Err(pos) = holdings.binary_search(&file) {
                holdings.insert(pos, file);
            }
        }
        Ok(record)
    }

    /// Runs one full cycle and returns its metrics row.
    pub fn run_cycle(&mut self) -> Result<CycleMetrics, SimError> {
        self.run_cycle_with(|_| {})
    }

    pub fn run_cycle_with(&mut self, mut observe: impl FnMut(&RoundRecord)) -> Result<CycleMetrics, SimError> {
        self.inject_newcomers();
        let (mut successes, mut failures) = (0u64, 0u64);
        for _ in 0..self.config.queries_per_cycle {
            let mut rng = self.round_rng();
            let requester = self.draw_requester(&mut rng);
            let record = self.run_round(requester, &mut rng)?;
            match record.outcome {
                TransactionOutcome::Success => successes += 1,
                TransactionOutcome::Failure => failures += 1,
                TransactionOutcome::None => {}
            }
            observe(&record);
        }
        let row = self.snapshot(successes, failures);
        self.cycle += 1;
        Ok(row)
    }

    fn snapshot(&self, successes: u64, failures: u64) -> CycleMetrics {
        let scores = self.ledger.scores();
        let mean = |filter: &dyn Fn(&Peer) -> bool| -> Option<f64> {
            let (sum, count) = self
                .joined()
                .iter()
                .filter(|p| filter(p))
                .fold((0.0, 0u64), |(s, c), p| (s + scores[p.id.index()], c + 1));
            (count > 0).then(|| sum / count as f64)
        };
        let founder = |b: Behavior| move |p: &Peer| p.is_founder() && p.behavior == b;
        let transactions = successes + failures;
        CycleMetrics {
            cycle: self.cycle,
            avg_trust_good: mean(&founder(Behavior::GoodServer)),
            avg_trust_bad: mean(&founder(Behavior::BadServer)),
            avg_trust_liar: mean(&founder(Behavior::Liar)),
            avg_trust_newcomer_good: mean(&|p: &Peer| !p.is_founder() && p.behavior == Behavior::GoodServer),
            success_rate: (transactions > 0).then(|| successes as f64 / transactions as f64),
            penalties: failures,
        }
    }

    pub fn run(&mut self) -> Result<MetricsSeries, SimError> {
        self.run_observed(|_| {})
    }

    pub fn run_observed(&mut self, mut observe: impl FnMut(&RoundRecord)) -> Result<MetricsSeries, SimError> {
        let mut rows = Vec::with_capacity(self.config.total_cycles as usize);
        while self.cycle < self.config.total_cycles {
            rows.push(self.run_cycle_with(&mut observe)?);
        }
        Ok(MetricsSeries { rows })
    }

    pub fn take_events(&mut self) -> Vec<TrustEvent> {
        self.ledger.take_events()
    }
}

pub fn run_simulation(config: SimConfig) -> Result<MetricsSeries, SimError> {
    Simulation::new(config)?.run()
}

/// Independent runs, one per seed, executed in parallel. Results follow
/// the order of `seeds`.
pub fn run_replicates(config: &SimConfig, seeds: &[u64]) -> Result<Vec<MetricsSeries>, SimError> {
    seeds
        .par_iter()
        .map(|&seed| run_simulation(SimConfig { seed, ..config.clone() }))
        .collect()
}

fn order_free_mean(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Cycle-wise mean over replicates. Each cell is summed in sorted order, so
/// the result does not depend on the order of `series`.
pub fn average_replicates(series: &[MetricsSeries]) -> MetricsSeries {
    let cycles = series.iter().map(MetricsSeries::len).min().unwrap_or(0);
    let cell = |i: usize, f: fn(&CycleMetrics) -> Option<f64>| {
        let mut vals: Vec<f64> = series.iter().filter_map(|s| f(&s.rows[i])).collect();
        order_free_mean(&mut vals)
    };
    let rows = (0..cycles)
        .map(|i| {
            let mut penalties: Vec<f64> = series.iter().map(|s| s.rows[i].penalties as f64).collect();
            CycleMetrics {
                cycle: series[0].rows[i].cycle,
                avg_trust_good: cell(i, |r| r.avg_trust_good),
                avg_trust_bad: cell(i, |r| r.avg_trust_bad),
                avg_trust_liar: cell(i, |r| r.avg_trust_liar),
                avg_trust_newcomer_good: cell(i, |r| r.avg_trust_newcomer_good),
                success_rate: cell(i, |r| r.success_rate),
                penalties: order_free_mean(&mut penalties).unwrap_or(0.0).round() as u64,
            }
        })
        .collect();
    MetricsSeries { rows }
}

/// Counts of each behavior among founders, for reporting.
pub fn founder_mix(config: &SimConfig) -> BTreeMap<Behavior, u32> {
    BTreeMap::from([
        (Behavior::GoodServer, config.good),
        (Behavior::BadServer, config.bad),
        (Behavior::Liar, config.liar),
    ])
}
