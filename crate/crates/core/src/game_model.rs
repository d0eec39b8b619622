//! Closed-form analysis of the request/answer game.
//!
//! One requester faces `j` responders. The requester either picks a
//! responder by trust (BT) or uniformly at random (R); each responder either
//! answers only when it holds the file (T) or answers every query (L). A
//! responder that is not picked earns one trust unit; a picked liar pays the
//! penalty `K`.
//!
//! Everything here is a pure function of its arguments.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("calibration infeasible: {0}")]
    CalibrationInfeasible(String),
}

fn invalid(name: &'static str, reason: impl Into<String>) -> GameError {
    GameError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

fn check_responders(j: u32) -> Result<(), GameError> {
    if j == 0 {
        return Err(invalid("j", "at least one responder is required"));
    }
    Ok(())
}

fn check_probability(name: &'static str, p: f64) -> Result<(), GameError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(name, format!("{p} is not in [0, 1]")));
    }
    Ok(())
}

fn check_calibratable(p: f64) -> Result<(), GameError> {
    check_probability("p", p)?;
    if p >= 1.0 {
        return Err(GameError::CalibrationInfeasible(
            "p = 1 means selection by trust only; a liar is never punished at random and no finite K works"
                .into(),
        ));
    }
    Ok(())
}

/// Mechanism constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams {
    /// Each truthful peer holds `1/n` of the catalog.
    pub n: u32,
    /// Number of responders to a query.
    pub j: u32,
    /// Probability the requester selects by trust.
    pub p: f64,
    /// Penalty for a selected liar.
    pub k: f64,
    /// Requester's profit from obtaining a file.
    pub profit: f64,
    /// Requester's transaction cost.
    pub cost: f64,
}

impl GameParams {
    pub fn new(n: u32, j: u32, p: f64, k: f64, profit: f64, cost: f64) -> Result<Self, GameError> {
        let params = Self {
            n,
            j,
            p,
            k,
            profit,
            cost,
        };
        params.validate()?;
        Ok(params)
    }

    /// Parameters for responder-side questions, with a nominal
    /// profit/cost pair (10, 1) for the requester.
    pub fn responder_side(n: u32, j: u32, p: f64, k: f64) -> Result<Self, GameError> {
        Self::new(n, j, p, k, 10.0, 1.0)
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        check_responders(self.j)?;
        check_probability("p", self.p)?;
        if !(self.k >= 0.0) || !self.k.is_finite() {
            return Err(invalid("K", format!("{} must be a finite nonnegative number", self.k)));
        }
        if !(self.cost > 0.0) {
            return Err(invalid("M", "transaction cost must be positive"));
        }
        if !(self.profit > self.cost) {
            return Err(invalid(
                "N",
                format!(
                    "profit {} must exceed cost {}, otherwise nobody requests",
                    self.profit, self.cost
                ),
            ));
        }
        Ok(())
    }

    /// Per-round expected trust gain of a truthful responder.
    pub fn truthful_rate(&self) -> f64 {
        1.0 / f64::from(self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RequesterStrategy {
    /// Choose by trust.
    ByTrust,
    /// Choose randomly.
    Random,
}

impl RequesterStrategy {
    pub const ALL: [RequesterStrategy; 2] = [RequesterStrategy::ByTrust, RequesterStrategy::Random];

    pub fn label(self) -> &'static str {
        match self {
            RequesterStrategy::ByTrust => "BT",
            RequesterStrategy::Random => "R",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResponderStrategy {
    /// Answer only when holding the file.
    Truthful,
    /// Answer every query.
    Lie,
}

impl ResponderStrategy {
    pub const ALL: [ResponderStrategy; 2] = [ResponderStrategy::Truthful, ResponderStrategy::Lie];

    pub fn label(self) -> &'static str {
        match self {
            ResponderStrategy::Truthful => "T",
            ResponderStrategy::Lie => "L",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Requester mixture `(p, 1 - p)` over BT and R.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedStrategy {
    p_by_trust: f64,
}

impl MixedStrategy {
    pub fn new(p_by_trust: f64) -> Result<Self, GameError> {
        check_probability("p", p_by_trust)?;
        Ok(Self { p_by_trust })
    }

    pub fn weight(&self, strategy: RequesterStrategy) -> f64 {
        match strategy {
            RequesterStrategy::ByTrust => self.p_by_trust,
            RequesterStrategy::Random => 1.0 - self.p_by_trust,
        }
    }

    /// Expected responder payoff against this mixture.
    pub fn responder_payoff(&self, matrix: &GameMatrix, response: ResponderStrategy) -> f64 {
        RequesterStrategy::ALL
            .iter()
            .map(|&r| self.weight(r) * matrix.cell(r, response).responder)
            .sum()
    }
}

/// Payoff pair of one matrix cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payoff {
    pub requester: f64,
    pub responder: f64,
}

/// The 2x2 game: requester rows {BT, R}, responder columns {T, L}.
#[derive(Debug, Clone, PartialEq)]
pub struct GameMatrix {
    cells: [[Payoff; 2]; 2],
}

impl GameMatrix {
    pub fn cell(&self, row: RequesterStrategy, col: ResponderStrategy) -> Payoff {
        self.cells[row.index()][col.index()]
    }
}

impl fmt::Display for GameMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>6} | {:>24} | {:>24}", "", "T (u1, u-1)", "L (u1, u-1)")?;
        for row in RequesterStrategy::ALL {
            write!(f, "{:>6}", row.label())?;
            for col in ResponderStrategy::ALL {
                let c = self.cell(row, col);
                write!(f, " | {:>11.6}, {:>11.6}", c.requester, c.responder)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Liar's expected payoff when the requester picks uniformly among `j`
/// responders: `(-K + j - 1) / j`.
pub fn liar_round_payoff_z(k: f64, j: u32) -> Result<f64, GameError> {
    check_responders(j)?;
    let j = f64::from(j);
    Ok((-k + j - 1.0) / j)
}

/// Infimum of the penalties that make lying dominated by telling the truth
/// under the mixture `(p, 1 - p)`. Any strictly larger `K` works.
pub fn k_min_dominance(n: u32, j: u32, p: f64) -> Result<f64, GameError> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    check_responders(j)?;
    check_calibratable(p)?;
    let (n, j) = (f64::from(n), f64::from(j));
    Ok(j - 1.0 - j * (1.0 - n * p) / (n * (1.0 - p)))
}

/// Infimum of the penalties that make a liar's expected per-round payoff
/// negative, so its cumulative trust drifts downwards.
pub fn k_min_descending(j: u32, p: f64) -> Result<f64, GameError> {
    check_responders(j)?;
    check_calibratable(p)?;
    Ok((f64::from(j) + p - 1.0) / (1.0 - p))
}

/// Penalty actually used: the descending bound plus a relative margin.
pub fn recommended_k(j: u32, p: f64, margin: f64) -> Result<f64, GameError> {
    if !(margin > 0.0) {
        return Err(invalid("margin", "must be positive; the bound itself is not sufficient"));
    }
    Ok(k_min_descending(j, p)? * (1.0 + margin))
}

pub const DEFAULT_K_MARGIN: f64 = 0.1;

/// `p * 1 + (1 - p) * Z(K, j)`.
pub fn expected_liar_per_round(p: f64, k: f64, j: u32) -> Result<f64, GameError> {
    check_probability("p", p)?;
    let z = liar_round_payoff_z(k, j)?;
    Ok(p + (1.0 - p) * z)
}

/// True iff truth-telling strictly beats lying against the requester mixture.
pub fn is_lying_dominated(params: &GameParams) -> bool {
    let liar = p_weighted_liar(params);
    params.truthful_rate() > liar
}

fn p_weighted_liar(params: &GameParams) -> f64 {
    let j = f64::from(params.j);
    params.p + (1.0 - params.p) * ((-params.k + j - 1.0) / j)
}

pub fn build_game_matrix(params: &GameParams) -> GameMatrix {
    let gain = params.profit - params.cost;
    let truthful = params.truthful_rate();
    let z = p_weighted_liar(&GameParams { p: 0.0, ..*params });
    let cell = |requester, responder| Payoff {
        requester,
        responder,
    };
    GameMatrix {
        cells: [
            // BT always lands on a truthful server.
            [cell(gain, truthful), cell(gain, 1.0)],
            [cell(gain, truthful), cell(-params.cost, z)],
        ],
    }
}

/// Result of iterated elimination of weakly dominated pure strategies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EliminationOutcome {
    Unique(RequesterStrategy, ResponderStrategy),
    /// Elimination stalled with more than one strategy left for some player.
    Tie {
        requester: Vec<RequesterStrategy>,
        responder: Vec<ResponderStrategy>,
    },
}

fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Iterated elimination of weakly dominated pure strategies. Each pass
/// removes the requester's dominated rows, then the responders' dominated
/// columns, until nothing changes. Ties are reported, never broken.
pub fn pure_strategy_elimination(matrix: &GameMatrix) -> EliminationOutcome {
    let mut rows: Vec<RequesterStrategy> = RequesterStrategy::ALL.to_vec();
    let mut cols: Vec<ResponderStrategy> = ResponderStrategy::ALL.to_vec();

    loop {
        let row_payoffs = |r: RequesterStrategy, cols: &[ResponderStrategy]| -> Vec<f64> {
            cols.iter().map(|&c| matrix.cell(r, c).requester).collect()
        };
        let dominated_rows: Vec<RequesterStrategy> = rows
            .iter()
            .copied()
            .filter(|&r| {
                rows.iter()
                    .any(|&o| o != r && weakly_dominates(&row_payoffs(o, &cols), &row_payoffs(r, &cols)))
            })
            .collect();
        rows.retain(|r| !dominated_rows.contains(r));

        let col_payoffs = |c: ResponderStrategy, rows: &[RequesterStrategy]| -> Vec<f64> {
            rows.iter().map(|&r| matrix.cell(r, c).responder).collect()
        };
        let dominated_cols: Vec<ResponderStrategy> = cols
            .iter()
            .copied()
            .filter(|&c| {
                cols.iter()
                    .any(|&o| o != c && weakly_dominates(&col_payoffs(o, &rows), &col_payoffs(c, &rows)))
            })
            .collect();
        cols.retain(|c| !dominated_cols.contains(c));

        if dominated_rows.is_empty() && dominated_cols.is_empty() {
            break;
        }
    }

    match (rows.as_slice(), cols.as_slice()) {
        ([r], [c]) => EliminationOutcome::Unique(*r, *c),
        _ => EliminationOutcome::Tie {
            requester: rows,
            responder: cols,
        },
    }
}

/// Expected cumulative trust of an always-truthful peer after `rounds`.
pub fn truthful_trajectory(rounds: u64, n: u32) -> Result<f64, GameError> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    Ok(rounds as f64 / f64::from(n))
}

/// Expected cumulative trust of an always-lying peer after `rounds`,
/// ignoring any floor.
pub fn liar_trajectory(rounds: u64, p: f64, k: f64, j: u32) -> Result<f64, GameError> {
    if rounds == 0 {
        return Ok(0.0);
    }
    Ok(rounds as f64 * expected_liar_per_round(p, k, j)?)
}

/// Probability that a persistent liar collects `t` consecutive credits
/// before its first penalty: `((j + p - 1) / j)^t`.
pub fn escape_probability(j: u32, p: f64, t: u32) -> Result<f64, GameError> {
    check_responders(j)?;
    check_probability("p", p)?;
    let survive = (f64::from(j) + p - 1.0) / f64::from(j);
    if survive < 0.0 {
        return Err(invalid("j", "j + p - 1 must be nonnegative"));
    }
    Ok(pow_u32(survive, t))
}

fn pow_u32(base: f64, exp: u32) -> f64 {
    match i32::try_from(exp) {
        Ok(e) => base.powi(e),
        Err(_) => base.powf(f64::from(exp)),
    }
}

/// Smallest service threshold `t + 1` such that a liar reaches it by
/// luck with probability at most `epsilon`.
pub fn recommend_threshold(j: u32, p: f64, epsilon: f64) -> Result<u32, GameError> {
    check_responders(j)?;
    check_calibratable(p)?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(invalid("epsilon", format!("{epsilon} is not in (0, 1]")));
    }
    let survive = (f64::from(j) + p - 1.0) / f64::from(j);
    if survive <= 0.0 {
        return Ok(1);
    }
    // Start from the log estimate, then settle on the exact integer.
    let guess = (epsilon.ln() / survive.ln()).ceil().max(0.0);
    if guess > f64::from(u32::MAX - 2) {
        return Err(GameError::CalibrationInfeasible(format!(
            "threshold for epsilon {epsilon} overflows"
        )));
    }
    let mut t = guess as u32;
    while t > 0 && escape_probability(j, p, t - 1)? <= epsilon {
        t -= 1;
    }
    while escape_probability(j, p, t)? > epsilon {
        t += 1;
    }
    Ok(t + 1)
}

/// Everything an operator needs to pick `K` and the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub n: u32,
    pub j: u32,
    pub p: f64,
    pub epsilon: f64,
    pub k_min_dominance: f64,
    pub k_min_descending: f64,
    pub recommended_k: f64,
    pub z_at_recommended_k: f64,
    pub liar_per_round_at_recommended_k: f64,
    pub threshold: u32,
    pub matrix: GameMatrix,
}

pub fn calibrate(n: u32, j: u32, p: f64, epsilon: f64) -> Result<CalibrationReport, GameError> {
    let k_dom = k_min_dominance(n, j, p)?;
    let k_desc = k_min_descending(j, p)?;
    let k = recommended_k(j, p, DEFAULT_K_MARGIN)?;
    let params = GameParams::responder_side(n, j, p, k)?;
    Ok(CalibrationReport {
        n,
        j,
        p,
        epsilon,
        k_min_dominance: k_dom,
        k_min_descending: k_desc,
        recommended_k: k,
        z_at_recommended_k: liar_round_payoff_z(k, j)?,
        liar_per_round_at_recommended_k: expected_liar_per_round(p, k, j)?,
        threshold: recommend_threshold(j, p, epsilon)?,
        matrix: build_game_matrix(&params),
    })
}
