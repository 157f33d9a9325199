//! Duration-driven choice of segmentation strategy.
//!
//! A [`PolicyTable`] is an ordered list of rules; a video of duration `D`
//! takes the first rule whose `max_duration_sec` is at least `D`. The last
//! rule is unbounded, so every duration resolves.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::{DetectError, DetectorParams};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("cannot parse policy config: {0}")]
    Parse(String),
    #[error("rule {index} has max duration {value}, not above the previous rule's {previous}")]
    NonMonotoneDurations {
        index: usize,
        value: f64,
        previous: f64,
    },
    #[error("policy table must end with exactly one rule without max_duration_sec")]
    MissingUnboundedRow,
    #[error("rule {index}: {source}")]
    InvalidParams { index: usize, source: DetectError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Adaptive,
    Content,
    Fallback,
    RegularSplit,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Adaptive => "adaptive",
            StrategyKind::Content => "content",
            StrategyKind::Fallback => "fallback",
            StrategyKind::RegularSplit => "regular_split",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A strategy together with the parameters it runs with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    Adaptive(DetectorParams),
    Content(DetectorParams),
    Fallback {
        adaptive: DetectorParams,
        content: DetectorParams,
    },
    RegularSplit(DetectorParams),
}

impl Strategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::Adaptive(_) => StrategyKind::Adaptive,
            Strategy::Content(_) => StrategyKind::Content,
            Strategy::Fallback { .. } => StrategyKind::Fallback,
            Strategy::RegularSplit(_) => StrategyKind::RegularSplit,
        }
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        match self {
            Strategy::Adaptive(p) | Strategy::Content(p) | Strategy::RegularSplit(p) => p.validate(),
            Strategy::Fallback { adaptive, content } => {
                adaptive.validate()?;
                content.validate()
            }
        }
    }

    /// Applies `f` to every parameter set the strategy carries.
    pub fn map_params(&mut self, mut f: impl FnMut(&mut DetectorParams)) {
        match self {
            Strategy::Adaptive(p) | Strategy::Content(p) | Strategy::RegularSplit(p) => f(p),
            Strategy::Fallback { adaptive, content } => {
                f(adaptive);
                f(content);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyRule {
    /// Inclusive upper bound; absent means unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_duration_sec: Option<f64>,
    #[serde(flatten)]
    pub strategy: Strategy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    #[serde(rename = "rule")]
    rules: Vec<PolicyRule>,
}

/// Outcome of [`resolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub strategy: Strategy,
    /// Duration range of the matched rule, e.g. `(120, 1800]`.
    pub matched_rule: String,
}

impl PolicySpec {
    pub fn kind(&self) -> StrategyKind {
        self.strategy.kind()
    }
}

fn table_params(threshold: f64, minlen_sec: f64) -> DetectorParams {
    DetectorParams {
        threshold,
        minlen_sec,
        ..DetectorParams::default()
    }
}

/// The five built-in duration bands.
pub fn default_table() -> PolicyTable {
    let rule = |max: Option<f64>, strategy| PolicyRule {
        max_duration_sec: max,
        strategy,
    };
    PolicyTable {
        rules: vec![
            rule(Some(120.0), Strategy::Adaptive(table_params(1.0, 15.0))),
            rule(Some(1800.0), Strategy::Adaptive(table_params(1.2, 15.0))),
            rule(
                Some(7200.0),
                Strategy::Fallback {
                    adaptive: table_params(1.4, 15.0),
                    content: table_params(15.0, 15.0),
                },
            ),
            rule(Some(10800.0), Strategy::Content(table_params(12.0, 15.0))),
            rule(
                None,
                Strategy::RegularSplit(DetectorParams {
                    interval_sec: 30.0,
                    ..DetectorParams::default()
                }),
            ),
        ],
    }
}

impl Default for PolicyTable {
    fn default() -> Self {
        default_table()
    }
}

impl PolicyTable {
    pub fn new(rules: Vec<PolicyRule>) -> Result<Self, PolicyError> {
        let table = PolicyTable { rules };
        table.validate()?;
        Ok(table)
    }

    pub fn rules(&self) -> &[PolicyRule] {
        &self.rules
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let last = self.rules.len().checked_sub(1).ok_or(PolicyError::MissingUnboundedRow)?;
        let mut previous = 0.0;
        for (index, rule) in self.rules.iter().enumerate() {
            match rule.max_duration_sec {
                Some(value) if index != last => {
                    if !(value > previous) || !value.is_finite() {
                        return Err(PolicyError::NonMonotoneDurations {
                            index,
                            value,
                            previous,
                        });
                    }
                    previous = value;
                }
                Some(_) => return Err(PolicyError::MissingUnboundedRow),
                None if index != last => {
                    return Err(PolicyError::NonMonotoneDurations {
                        index,
                        value: f64::INFINITY,
                        previous,
                    })
                }
                None => {}
            }
            rule.strategy
                .validate()
                .map_err(|source| PolicyError::InvalidParams { index, source })?;
        }
        Ok(())
    }

    /// First rule of the given kind, if any.
    pub fn first_of(&self, kind: StrategyKind) -> Option<&PolicyRule> {
        self.rules.iter().find(|r| r.strategy.kind() == kind)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("policy tables always serialize")
    }
}

fn describe_range(lower: Option<f64>, upper: Option<f64>) -> String {
    let lo = lower.unwrap_or(0.0);
    match upper {
        Some(hi) => format!("({lo}, {hi}]"),
        None => format!("({lo}, inf)"),
    }
}

/// Picks the first rule with `duration_sec <= max_duration_sec`.
pub fn resolve(duration_sec: f64, table: &PolicyTable) -> PolicySpec {
    let mut lower = None;
    for rule in &table.rules {
        let fits = rule.max_duration_sec.map_or(true, |max| duration_sec <= max);
        if fits {
            return PolicySpec {
                strategy: rule.strategy.clone(),
                matched_rule: describe_range(lower, rule.max_duration_sec),
            };
        }
        lower = rule.max_duration_sec;
    }
    // Validated tables end unbounded; an unvalidated one falls back to its
    // last rule.
    let last = table.rules.last().cloned().unwrap_or_else(|| default_table().rules[4].clone());
    PolicySpec {
        strategy: last.strategy,
        matched_rule: describe_range(lower, None),
    }
}

/// Parses a TOML policy table and checks its invariants.
pub fn load_table(config: &str) -> Result<PolicyTable, PolicyError> {
    let table: PolicyTable = toml::from_str(config).map_err(|e| PolicyError::Parse(e.to_string()))?;
    table.validate()?;
    Ok(table)
}

pub fn load_table_file(path: &Path) -> Result<PolicyTable, PolicyError> {
    load_table(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};
    use super::Strategy;

    fn threshold_of(spec: &PolicySpec) -> f64 {
        match &spec.strategy {
            Strategy::Adaptive(p) | Strategy::Content(p) => p.threshold,
            Strategy::Fallback { adaptive, .. } => adaptive.threshold,
            Strategy::RegularSplit(p) => p.interval_sec,
        }
    }

    #[test]
    fn default_rows() {
        let table = default_table();
        assert_eq!(table.rules().len(), 5);
        match &table.rules()[3].strategy {
            Strategy::Content(p) => assert_eq!(p.threshold, 12.0),
            other => panic!("row 4 is {other:?}"),
        }
        match &table.rules()[2].strategy {
            Strategy::Fallback { adaptive, content } => {
                assert_eq!(adaptive.threshold, 1.4);
                assert_eq!(content.threshold, 15.0);
                assert_eq!(adaptive.fallback_min_scenes, 3);
            }
            other => panic!("row 3 is {other:?}"),
        }
        assert!(table.validate().is_ok());
    }

    #[test]
    fn resolve_examples() {
        let table = default_table();
        let short = resolve(90.0, &table);
        assert_eq!(short.kind(), StrategyKind::Adaptive);
        assert_eq!(threshold_of(&short), 1.0);
        match short.strategy {
            Strategy::Adaptive(p) => assert_eq!(p.minlen_sec, 15.0),
            _ => unreachable!(),
        }
        let hour = resolve(3600.0, &table);
        match hour.strategy {
            Strategy::Fallback { adaptive, content } => {
                assert_eq!(adaptive.threshold, 1.4);
                assert_eq!(content.threshold, 15.0);
            }
            _ => panic!("expected fallback"),
        }
        let long = resolve(20000.0, &table);
        assert_eq!(long.kind(), StrategyKind::RegularSplit);
        assert_eq!(threshold_of(&long), 30.0);
        assert_eq!(long.matched_rule, "(10800, inf)");
        let edge = resolve(120.0, &table);
        assert_eq!(threshold_of(&edge), 1.0);
        assert_eq!(edge.matched_rule, "(0, 120]");
        assert_eq!(resolve(1800.0, &table).matched_rule, "(120, 1800]");
    }

    #[test]
    fn default_table_round_trips() {
        let text = default_table().to_toml();
        assert_eq!(load_table(&text).unwrap(), default_table());
    }

    #[test]
    fn partial_rules_take_parameter_defaults() {
        let table = load_table(
            r#"
            [[rule]]
            max_duration_sec = 60
            strategy = "content"
            threshold = 20.0

            [[rule]]
            strategy = "regular_split"
            interval_sec = 10.0
            "#,
        )
        .unwrap();
        match &table.rules()[0].strategy {
            Strategy::Content(p) => {
                assert_eq!(p.threshold, 20.0);
                assert_eq!(p.smoothing_window, 3);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn invalid_tables() {
        let decreasing = r#"
            [[rule]]
            max_duration_sec = 600.0
            strategy = "adaptive"
            [[rule]]
            max_duration_sec = 300.0
            strategy = "content"
            [[rule]]
            strategy = "regular_split"
        "#;
        assert!(matches!(
            load_table(decreasing),
            Err(PolicyError::NonMonotoneDurations { index: 1, .. })
        ));
        let bounded = r#"
            [[rule]]
            max_duration_sec = 600.0
            strategy = "adaptive"
        "#;
        assert!(matches!(load_table(bounded), Err(PolicyError::MissingUnboundedRow)));
        assert!(matches!(load_table("rule = []"), Err(PolicyError::MissingUnboundedRow)));
        assert!(matches!(load_table("[[rule]]\nstrategy = \"warp\""), Err(PolicyError::Parse(_))));
        let even = "[[rule]]\nstrategy = \"content\"\nsmoothing_window = 4\n";
        assert!(matches!(load_table(even), Err(PolicyError::InvalidParams { index: 0, .. })));
    }

    proptest! {
        #[test]
        fn resolve_is_total_and_monotone(a in 0.001f64..1e6, b in 0.001f64..1e6) {
            let table = default_table();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let rank = |d: f64| {
                let spec = resolve(d, &table);
                table.rules().iter().position(|r| r.strategy == spec.strategy).unwrap()
            };
            prop_assert!(rank(lo) <= rank(hi));
        }
    }
}
