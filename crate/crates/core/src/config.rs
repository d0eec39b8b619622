//! Run configuration files: flat UTF-8 `key = value` lines, `#` comments.
//!
//! ```text
//! # founders
//! good = 1400
//! bad = 300
//! liar = 300
//! newcomers = 300:100:good
//! catalog_size = 1000
//! n = 100
//! p = 0.9
//! threshold = 50
//! total_cycles = 1000
//! seed = 7
//! output = metrics.csv
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::game_model;
use crate::sim_engine::{calibrated_reach, Behavior, NewcomerBatch, SimConfig, SimError, DEFAULT_TARGET_VOLUNTEERS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    /// The key the error is about, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Syntax { .. } => None,
            ConfigError::UnknownKey(k) | ConfigError::DuplicateKey(k) => Some(k),
            ConfigError::Missing(k) => Some(k),
            ConfigError::Invalid { key, .. } => Some(key),
        }
    }
}

pub const REQUIRED_KEYS: [&str; 8] = ["good", "bad", "liar", "catalog_size", "n", "p", "threshold", "total_cycles"];

pub const OPTIONAL_KEYS: [&str; 14] = [
    "newcomers",
    "k",
    "j",
    "floor",
    "queries_per_cycle",
    "reach",
    "seed",
    "seeds",
    "profit",
    "cost",
    "acquire_on_success",
    "output",
    "trace",
    "plot",
];

fn is_known(key: &str) -> bool {
    REQUIRED_KEYS.contains(&key) || OPTIONAL_KEYS.contains(&key)
}

/// A parsed simulation run: the simulator config plus output locations.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    /// Extra seeds; when non-empty one CSV is written per seed.
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    pub trace: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

/// Splits a document into raw key/value pairs, rejecting unknown and
/// repeated keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut pairs = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            reason: format!("expected `key = value`, found `{line}`"),
        })?;
        let key = key.trim().to_string();
        if !is_known(&key) {
            return Err(ConfigError::UnknownKey(key));
        }
        if pairs.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(ConfigError::DuplicateKey(key));
        }
    }
    Ok(pairs)
}

fn field<T: std::str::FromStr>(pairs: &BTreeMap<String, String>, key: &'static str) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    pairs
        .get(key)
        .map(|v| {
            v.replace('_', "").parse::<T>().map_err(|e| ConfigError::Invalid {
                key: key.into(),
                reason: format!("`{v}`: {e}"),
            })
        })
        .transpose()
}

/// Integers also accept scientific notation such as `1e6`.
fn integer(pairs: &BTreeMap<String, String>, key: &'static str) -> Result<Option<u64>, ConfigError> {
    let Some(raw) = pairs.get(key) else {
        return Ok(None);
    };
    parse_count(raw).map(Some).map_err(|reason| ConfigError::Invalid { key: key.into(), reason })
}

/// Parses a nonnegative integer, allowing `1e6`-style notation.
pub fn parse_count(raw: &str) -> Result<u64, String> {
    let v = raw.trim().replace('_', "");
    if let Ok(x) = v.parse::<u64>() {
        return Ok(x);
    }
    match v.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 => Ok(x as u64),
        _ => Err(format!("`{raw}` is not a nonnegative integer")),
    }
}

fn required<T>(value: Option<T>, key: &'static str) -> Result<T, ConfigError> {
    value.ok_or(ConfigError::Missing(key))
}

fn narrow(key: &'static str, v: u64) -> Result<u32, ConfigError> {
    u32::try_from(v).map_err(|_| ConfigError::Invalid {
        key: key.into(),
        reason: format!("{v} is too large"),
    })
}

fn parse_bool(key: &'static str, raw: &str) -> Result<bool, ConfigError> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(ConfigError::Invalid {
            key: key.into(),
            reason: format!("`{raw}` is not a boolean"),
        }),
    }
}

/// `cycle:count:behavior` batches separated by commas.
pub fn parse_newcomers(raw: &str) -> Result<Vec<NewcomerBatch>, ConfigError> {
    let invalid = |reason: String| ConfigError::Invalid {
        key: "newcomers".into(),
        reason,
    };
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty() && *s != "none")
        .map(|entry| {
            let parts: Vec<&str> = entry.split(':').map(str::trim).collect();
            let [cycle, count, behavior] = parts.as_slice() else {
                return Err(invalid(format!("`{entry}` is not cycle:count:behavior")));
            };
            Ok(NewcomerBatch {
                cycle: parse_count(cycle).map_err(invalid)?,
                count: u32::try_from(parse_count(count).map_err(invalid)?)
                    .map_err(|_| invalid(format!("count in `{entry}` is too large")))?,
                behavior: Behavior::parse(behavior)
                    .ok_or_else(|| invalid(format!("unknown behavior `{behavior}`")))?,
            })
        })
        .collect()
}

fn parse_seeds(raw: &str) -> Result<Vec<u64>, ConfigError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            parse_count(s).map_err(|reason| ConfigError::Invalid {
                key: "seeds".into(),
                reason,
            })
        })
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    /// Parses `text`, then lets `overrides` replace or add keys.
    pub fn parse_with_overrides<'a>(
        text: &str,
        overrides: impl IntoIterator<Item = (&'a str, String)>,
    ) -> Result<Self, ConfigError> {
        let mut pairs = parse_pairs(text)?;
        for (key, value) in overrides {
            if !is_known(key) {
                return Err(ConfigError::UnknownKey(key.into()));
            }
            pairs.insert(key.into(), value);
        }
        Self::from_pairs(&pairs)
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let count = |key| -> Result<Option<u32>, ConfigError> { integer(pairs, key)?.map(|v| narrow(key, v)).transpose() };
        let good = required(count("good")?, "good")?;
        let bad = required(count("bad")?, "bad")?;
        let liar = required(count("liar")?, "liar")?;
        let catalog_size = required(count("catalog_size")?, "catalog_size")?;
        let n = required(count("n")?, "n")?;
        let p: f64 = required(field(pairs, "p")?, "p")?;
        let threshold: f64 = required(field(pairs, "threshold")?, "threshold")?;
        let total_cycles = required(integer(pairs, "total_cycles")?, "total_cycles")?;

        if !(0.0..=1.0).contains(&p) {
            return Err(ConfigError::Invalid {
                key: "p".into(),
                reason: format!("{p} is not in [0, 1]"),
            });
        }
        let j = count("j")?.unwrap_or(DEFAULT_TARGET_VOLUNTEERS);
        if j == 0 {
            return Err(ConfigError::Invalid {
                key: "j".into(),
                reason: "target volunteer count must be positive".into(),
            });
        }
        let k = match field::<f64>(pairs, "k")? {
            Some(k) => k,
            None => game_model::recommended_k(j, p, game_model::DEFAULT_K_MARGIN).map_err(|e| ConfigError::Invalid {
                key: "k".into(),
                reason: format!("no default penalty: {e}"),
            })?,
        };
        let founders = good.saturating_add(bad).saturating_add(liar);

        let sim = SimConfig {
            good,
            bad,
            liar,
            newcomers: pairs.get("newcomers").map(|v| parse_newcomers(v)).transpose()?.unwrap_or_default(),
            catalog_size,
            n,
            p,
            k,
            threshold,
            floor: field(pairs, "floor")?.unwrap_or(0.0),
            queries_per_cycle: count("queries_per_cycle")?.unwrap_or(founders.max(1)),
            reach: match count("reach")? {
                Some(r) => r,
                None => calibrated_reach(good, bad, liar, n, j),
            },
            total_cycles,
            seed: integer(pairs, "seed")?.unwrap_or(0),
            profit: field(pairs, "profit")?.unwrap_or(10.0),
            cost: field(pairs, "cost")?.unwrap_or(1.0),
            acquire_on_success: pairs
                .get("acquire_on_success")
                .map(|v| parse_bool("acquire_on_success", v))
                .transpose()?
                .unwrap_or(false),
        };
        sim.validate().map_err(|e| match e {
            SimError::InvalidConfig { key, reason } => ConfigError::Invalid {
                key: key.into(),
                reason,
            },
            other => ConfigError::Invalid {
                key: "config".into(),
                reason: other.to_string(),
            },
        })?;

        Ok(Self {
            sim,
            seeds: pairs.get("seeds").map(|v| parse_seeds(v)).transpose()?.unwrap_or_default(),
            output: pairs.get("output").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("metrics.csv")),
            trace: pairs.get("trace").map(PathBuf::from),
            plot: pairs.get("plot").map(PathBuf::from),
        })
    }

    /// Output path for one replicate seed: `stem_seed<N>.ext`.
    pub fn output_for_seed(&self, seed: u64) -> PathBuf {
        let stem = self.output.file_stem().and_then(|s| s.to_str()).unwrap_or("metrics");
        let ext = self.output.extension().and_then(|s| s.to_str()).unwrap_or("csv");
        self.output.with_file_name(format!("{stem}_seed{seed}.{ext}"))
    }
}

/// A ready-to-edit config reproducing the desk-scale experiment.
pub fn desk_scale_document(seed: u64) -> String {
    format!(
        "# 2000 founders, 70% good / 15% bad / 15% liar\n\
         good = 1400\n\
         bad = 300\n\
         liar = 300\n\
         newcomers = 300:100:good\n\
         catalog_size = 1000\n\
         n = 100\n\
         p = 0.9\n\
         # k defaults to 1.1 x (j + p - 1) / (1 - p)\n\
         j = 30\n\
         threshold = 50\n\
         floor = 0\n\
         queries_per_cycle = 2000\n\
         # reach defaults to the value giving about j volunteers per query\n\
         total_cycles = 1000\n\
         seed = {seed}\n\
         output = metrics.csv\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_document_matches_builtin_config() {
        let cfg = RunConfig::parse(&desk_scale_document(9)).unwrap();
        assert_eq!(cfg.sim, SimConfig::desk_scale(9));
        assert_eq!(cfg.output, PathBuf::from("metrics.csv"));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "good=10 # ten\n\n# whole line\nbad=0\nliar=2\ncatalog_size=20\nn=2\np=0.5\nthreshold=1\ntotal_cycles=3\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.sim.good, 10);
        assert_eq!(cfg.sim.queries_per_cycle, 12);
    }

    #[test]
    fn unknown_duplicate_and_missing_keys() {
        let base = desk_scale_document(1);
        assert_eq!(
            RunConfig::parse(&format!("{base}colour = red\n")).unwrap_err(),
            ConfigError::UnknownKey("colour".into())
        );
        assert_eq!(
            RunConfig::parse(&format!("{base}n = 5\n")).unwrap_err(),
            ConfigError::DuplicateKey("n".into())
        );
        let without_p: String = base.lines().filter(|l| !l.starts_with("p ")).map(|l| format!("{l}\n")).collect();
        assert_eq!(RunConfig::parse(&without_p).unwrap_err(), ConfigError::Missing("p"));
        assert!(matches!(RunConfig::parse("just words\n"), Err(ConfigError::Syntax { line: 1, .. })));
    }

    #[test]
    fn range_errors_name_the_key() {
        let err = RunConfig::parse_with_overrides(&desk_scale_document(1), [("reach", "5000".to_string())]).unwrap_err();
        assert_eq!(err.key(), Some("reach"));
        let err = RunConfig::parse_with_overrides(&desk_scale_document(1), [("p", "1.5".to_string())]).unwrap_err();
        assert_eq!(err.key(), Some("p"));
    }

    #[test]
    fn overrides_replace_file_values() {
        let cfg = RunConfig::parse_with_overrides(&desk_scale_document(1), [("seed", "77".to_string())]).unwrap();
        assert_eq!(cfg.sim.seed, 77);
        assert!(RunConfig::parse_with_overrides(&desk_scale_document(1), [("bogus", "1".to_string())]).is_err());
    }

    #[test]
    fn newcomer_and_seed_lists() {
        let batches = parse_newcomers("300:100:good, 500:5:liar").unwrap();
        assert_eq!(batches.len(), 2);
        assert_eq!(batches[1].behavior, Behavior::Liar);
        assert!(parse_newcomers("300:good").is_err());
        assert!(parse_newcomers("1:2:saint").is_err());
        let cfg = RunConfig::parse_with_overrides(&desk_scale_document(1), [("seeds", "3, 4,5".to_string())]).unwrap();
        assert_eq!(cfg.seeds, vec![3, 4, 5]);
        assert_eq!(cfg.output_for_seed(4), PathBuf::from("metrics_seed4.csv"));
    }

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!(parse_count("1e6").unwrap(), 1_000_000);
        assert_eq!(parse_count("1_000").unwrap(), 1000);
        assert!(parse_count("2.5").is_err());
        assert!(parse_count("-3").is_err());
    }
}
