//! Domain types: arms, principal strata, outcomes, covariates, records, and
//! estimand specifications.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Arms
// ---------------------------------------------------------------------------

/// Randomized arm indicator. Exactly two levels; 0 is control, 1 is test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Control,
    Test,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Test];

    /// Accepts only the 0/1 encoding.
    pub fn from_binary(value: u8) -> Result<Self> {
        match value {
            0 => Ok(Arm::Control),
            1 => Ok(Arm::Test),
            other => Err(Error::invalid(format!(
                "arm must be 0 (control) or 1 (test), got {other}"
            ))),
        }
    }

    pub fn as_binary(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Test => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Arm::Control => Arm::Test,
            Arm::Test => Arm::Control,
        }
    }

    pub(crate) fn label(self) -> &'static str {
        match self {
            Arm::Control => "control",
            Arm::Test => "treated",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

// ---------------------------------------------------------------------------
// Principal strata
// ---------------------------------------------------------------------------

/// One cell of the two-by-two table of joint intercurrent-event statuses
/// `(S(0), S(1))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrincipalStratum {
    /// Event under both arms: S(0)=1, S(1)=1.
    EventBoth,
    /// Event under control only: S(0)=1, S(1)=0.
    EventControlOnly,
    /// Event under neither arm: S(0)=0, S(1)=0.
    EventNeither,
    /// Event under test only: S(0)=0, S(1)=1.
    EventTestOnly,
}

impl PrincipalStratum {
    /// Canonical cell order used for fixed stratum proportions and reports.
    pub const ALL: [PrincipalStratum; 4] = [
        PrincipalStratum::EventBoth,
        PrincipalStratum::EventControlOnly,
        PrincipalStratum::EventNeither,
        PrincipalStratum::EventTestOnly,
    ];

    /// Joint statuses `(S(0), S(1))` of this cell.
    pub fn statuses(self) -> (bool, bool) {
        match self {
            PrincipalStratum::EventBoth => (true, true),
            PrincipalStratum::EventControlOnly => (true, false),
            PrincipalStratum::EventNeither => (false, false),
            PrincipalStratum::EventTestOnly => (false, true),
        }
    }

    /// Event status this cell implies under the given arm.
    pub fn status_under(self, arm: Arm) -> bool {
        let (s0, s1) = self.statuses();
        match arm {
            Arm::Control => s0,
            Arm::Test => s1,
        }
    }

    /// Position in [`PrincipalStratum::ALL`].
    pub fn index(self) -> usize {
        match self {
            PrincipalStratum::EventBoth => 0,
            PrincipalStratum::EventControlOnly => 1,
            PrincipalStratum::EventNeither => 2,
            PrincipalStratum::EventTestOnly => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PrincipalStratum::EventBoth => "event_both",
            PrincipalStratum::EventControlOnly => "event_control_only",
            PrincipalStratum::EventNeither => "event_neither",
            PrincipalStratum::EventTestOnly => "event_test_only",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "event_both" => Ok(PrincipalStratum::EventBoth),
            "event_control_only" => Ok(PrincipalStratum::EventControlOnly),
            "event_neither" => Ok(PrincipalStratum::EventNeither),
            "event_test_only" => Ok(PrincipalStratum::EventTestOnly),
            other => Err(Error::invalid(format!("unknown stratum cell '{other}'"))),
        }
    }
}

impl fmt::Display for PrincipalStratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Maps joint statuses to the unique table cell containing them.
pub fn classify_stratum(s0: bool, s1: bool) -> PrincipalStratum {
    match (s0, s1) {
        (true, true) => PrincipalStratum::EventBoth,
        (true, false) => PrincipalStratum::EventControlOnly,
        (false, false) => PrincipalStratum::EventNeither,
        (false, true) => PrincipalStratum::EventTestOnly,
    }
}

/// Nonempty subset of the four principal-stratum cells.
///
/// Covers the four single cells, the four one-arm unions such as `{S(1)=1}`,
/// and the full set. Parsed from and rendered to a compact text form:
/// `"s1=1"`, `"s0=0"`, `"all"`, a single cell name, or cell names joined by
/// `|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StratumSet {
    mask: u8,
}

impl StratumSet {
    pub fn single(cell: PrincipalStratum) -> Self {
        StratumSet {
            mask: 1 << cell.index(),
        }
    }

    /// The union `{S(arm)=value}` of the two cells sharing one arm's status.
    pub fn with_status(arm: Arm, value: bool) -> Self {
        let mut mask = 0u8;
        for cell in PrincipalStratum::ALL {
            if cell.status_under(arm) == value {
                mask |= 1 << cell.index();
            }
        }
        StratumSet { mask }
    }

    pub fn all() -> Self {
        StratumSet { mask: 0b1111 }
    }

    pub fn from_members(cells: &[PrincipalStratum]) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::invalid("stratum set must be nonempty"));
        }
        let mut mask = 0u8;
        for cell in cells {
            mask |= 1 << cell.index();
        }
        Ok(StratumSet { mask })
    }

    pub fn contains(&self, cell: PrincipalStratum) -> bool {
        self.mask & (1 << cell.index()) != 0
    }

    pub fn members(&self) -> Vec<PrincipalStratum> {
        PrincipalStratum::ALL
            .into_iter()
            .filter(|c| self.contains(*c))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    /// `Some(cell)` when the set is a single cell.
    pub fn as_single_cell(&self) -> Option<PrincipalStratum> {
        let m = self.members();
        if m.len() == 1 {
            Some(m[0])
        } else {
            None
        }
    }

    /// When the set is `{S(arm)=value}` for one arm (a row or column of the
    /// table), returns that arm and value. Single-arm sets are the ones whose
    /// membership is observable on the defining arm.
    pub fn defining_status(&self) -> Option<(Arm, bool)> {
        for arm in Arm::BOTH {
            for value in [false, true] {
                if *self == StratumSet::with_status(arm, value) {
                    return Some((arm, value));
                }
            }
        }
        None
    }

    /// `Some(value)` when the set is a single concordant cell
    /// (`event_both` yields `true`, `event_neither` yields `false`).
    pub fn concordant_value(&self) -> Option<bool> {
        match self.as_single_cell() {
            Some(PrincipalStratum::EventBoth) => Some(true),
            Some(PrincipalStratum::EventNeither) => Some(false),
            _ => None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        match t {
            "all" => return Ok(StratumSet::all()),
            "s0=0" => return Ok(StratumSet::with_status(Arm::Control, false)),
            "s0=1" => return Ok(StratumSet::with_status(Arm::Control, true)),
            "s1=0" => return Ok(StratumSet::with_status(Arm::Test, false)),
            "s1=1" => return Ok(StratumSet::with_status(Arm::Test, true)),
            _ => {}
        }
        let cells = t
            .split('|')
            .map(|p| PrincipalStratum::parse(p.trim()))
            .collect::<Result<Vec<_>>>()?;
        StratumSet::from_members(&cells)
    }
}

impl fmt::Display for StratumSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == StratumSet::all() {
            return f.write_str("all");
        }
        for arm in Arm::BOTH {
            for value in [false, true] {
                if *self == StratumSet::with_status(arm, value) {
                    return write!(f, "s{}={}", arm.as_binary(), u8::from(value));
                }
            }
        }
        let names: Vec<&str> = self.members().iter().map(|c| c.name()).collect();
        f.write_str(&names.join("|"))
    }
}

impl TryFrom<String> for StratumSet {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        StratumSet::parse(&value)
    }
}

impl From<StratumSet> for String {
    fn from(value: StratumSet) -> String {
        value.to_string()
    }
}

// ---------------------------------------------------------------------------
// Outcomes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Binary,
    Continuous,
    TimeToEvent,
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OutcomeKind::Binary => "binary",
            OutcomeKind::Continuous => "continuous",
            OutcomeKind::TimeToEvent => "time_to_event",
        };
        f.write_str(s)
    }
}

/// Observed or potential outcome value.
///
/// Time-to-event pairs carry the follow-up time and an event indicator;
/// `event == false` is censoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Binary { value: bool },
    Continuous { value: f64 },
    TimeToEvent { time: f64, event: bool },
}

impl Outcome {
    pub fn binary(value: bool) -> Self {
        Outcome::Binary { value }
    }

    pub fn continuous(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::invalid("continuous outcome must be finite"));
        }
        Ok(Outcome::Continuous { value })
    }

    pub fn time_to_event(time: f64, event: bool) -> Result<Self> {
        if !time.is_finite() || time < 0.0 {
            return Err(Error::invalid(format!(
                "event time must be finite and nonnegative, got {time}"
            )));
        }
        Ok(Outcome::TimeToEvent { time, event })
    }

    pub fn kind(&self) -> OutcomeKind {
        match self {
            Outcome::Binary { .. } => OutcomeKind::Binary,
            Outcome::Continuous { .. } => OutcomeKind::Continuous,
            Outcome::TimeToEvent { .. } => OutcomeKind::TimeToEvent,
        }
    }

    /// Value used in mean contrasts; errors for time-to-event outcomes.
    pub fn numeric_value(&self) -> Result<f64> {
        match self {
            Outcome::Binary { value } => Ok(f64::from(u8::from(*value))),
            Outcome::Continuous { value } => Ok(*value),
            Outcome::TimeToEvent { .. } => Err(Error::invalid(
                "time-to-event outcome has no scalar value; use survival contrasts",
            )),
        }
    }

    pub fn time_event(&self) -> Result<(f64, bool)> {
        match self {
            Outcome::TimeToEvent { time, event } => Ok((*time, *event)),
            _ => Err(Error::invalid("outcome is not time-to-event")),
        }
    }
}

// ---------------------------------------------------------------------------
// Covariates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovariateValue {
    Continuous(f64),
    Categorical(String),
}

impl fmt::Display for CovariateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovariateValue::Continuous(v) => write!(f, "{v}"),
            CovariateValue::Categorical(l) => f.write_str(l),
        }
    }
}

/// Ordered named covariate values for one subject. Names are unique; every
/// record in a dataset must carry the same names in the same order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CovariateVector {
    entries: Vec<(String, CovariateValue)>,
}

impl CovariateVector {
    pub fn empty() -> Self {
        CovariateVector::default()
    }

    pub fn from_pairs(pairs: Vec<(String, CovariateValue)>) -> Result<Self> {
        let mut v = CovariateVector::default();
        for (name, value) in pairs {
            v.push(name, value)?;
        }
        Ok(v)
    }

    pub fn push(&mut self, name: impl Into<String>, value: CovariateValue) -> Result<()> {
        let name = name.into();
        if self.entries.iter().any(|(n, _)| *n == name) {
            return Err(Error::invalid(format!("duplicate covariate name '{name}'")));
        }
        self.entries.push((name, value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&CovariateValue> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &CovariateValue)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnKind {
    Continuous,
    /// Levels sorted alphabetically; the first level is the reference.
    Categorical {
        levels: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateColumn {
    pub name: String,
    pub kind: ColumnKind,
}

/// Dataset-level covariate schema with the deterministic reference coding:
/// categorical levels are sorted alphabetically and expand to one indicator
/// column per non-reference level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSchema {
    pub columns: Vec<CovariateColumn>,
}

impl CovariateSchema {
    /// Infers the shared schema of a set of covariate vectors. Errors when
    /// vectors disagree on names, order, or value kinds.
    pub fn infer<'a>(vectors: impl IntoIterator<Item = &'a CovariateVector>) -> Result<Self> {
        let mut columns: Option<Vec<CovariateColumn>> = None;
        let mut level_sets: Vec<std::collections::BTreeSet<String>> = Vec::new();

        for x in vectors {
            match &mut columns {
                None => {
                    let mut cols = Vec::with_capacity(x.len());
                    for (name, value) in x.iter() {
                        let kind = match value {
                            CovariateValue::Continuous(_) => ColumnKind::Continuous,
                            CovariateValue::Categorical(_) => {
                                ColumnKind::Categorical { levels: Vec::new() }
                            }
                        };
                        cols.push(CovariateColumn {
                            name: name.to_string(),
                            kind,
                        });
                        level_sets.push(std::collections::BTreeSet::new());
                    }
                    columns = Some(cols);
                }
                Some(cols) => {
                    if x.len() != cols.len() {
                        return Err(Error::invalid(
                            "records disagree on the covariate schema (column count)",
                        ));
                    }
                }
            }
            let cols = columns.as_ref().unwrap();
            for (i, (name, value)) in x.iter().enumerate() {
                if name != cols[i].name {
                    return Err(Error::invalid(format!(
                        "records disagree on the covariate schema: expected column '{}', got '{}'",
                        cols[i].name, name
                    )));
                }
                match (&cols[i].kind, value) {
                    (ColumnKind::Continuous, CovariateValue::Continuous(v)) => {
                        if !v.is_finite() {
                            return Err(Error::invalid(format!(
                                "covariate '{name}' has a non-finite value"
                            )));
                        }
                    }
                    (ColumnKind::Categorical { .. }, CovariateValue::Categorical(level)) => {
                        level_sets[i].insert(level.clone());
                    }
                    _ => {
                        return Err(Error::invalid(format!(
                            "covariate '{name}' mixes continuous and categorical values"
                        )));
                    }
                }
            }
        }

        let mut columns = columns.ok_or_else(|| Error::invalid("no records to infer schema"))?;
        for (col, levels) in columns.iter_mut().zip(level_sets) {
            if let ColumnKind::Categorical { levels: stored } = &mut col.kind {
                *stored = levels.into_iter().collect();
            }
        }
        Ok(CovariateSchema { columns })
    }

    pub fn column(&self, name: &str) -> Option<&CovariateColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Expanded design-column names for the selected covariates, in selection
    /// order. Categorical columns contribute `name=level` indicators for each
    /// non-reference level.
    pub fn expanded_names(&self, selected: &[String]) -> Result<Vec<String>> {
        let mut names = Vec::new();
        for sel in selected {
            let col = self
                .column(sel)
                .ok_or_else(|| Error::invalid(format!("unknown covariate '{sel}'")))?;
            match &col.kind {
                ColumnKind::Continuous => names.push(col.name.clone()),
                ColumnKind::Categorical { levels } => {
                    for level in levels.iter().skip(1) {
                        names.push(format!("{}={}", col.name, level));
                    }
                }
            }
        }
        Ok(names)
    }

    /// Expanded design values for one record over the selected covariates
    /// (no intercept).
    pub fn design_row(&self, x: &CovariateVector, selected: &[String]) -> Result<Vec<f64>> {
        let mut row = Vec::new();
        for sel in selected {
            let col = self
                .column(sel)
                .ok_or_else(|| Error::invalid(format!("unknown covariate '{sel}'")))?;
            let value = x
                .get(sel)
                .ok_or_else(|| Error::invalid(format!("record is missing covariate '{sel}'")))?;
            match (&col.kind, value) {
                (ColumnKind::Continuous, CovariateValue::Continuous(v)) => row.push(*v),
                (ColumnKind::Categorical { levels }, CovariateValue::Categorical(level)) => {
                    if !levels.contains(level) {
                        return Err(Error::invalid(format!(
                            "level '{level}' of covariate '{sel}' is not in the schema"
                        )));
                    }
                    for candidate in levels.iter().skip(1) {
                        row.push(if candidate == level { 1.0 } else { 0.0 });
                    }
                }
                _ => {
                    return Err(Error::invalid(format!(
                        "covariate '{sel}' value kind does not match the schema"
                    )));
                }
            }
        }
        Ok(row)
    }
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// One subject's observed trial row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedRecord {
    pub id: String,
    pub z: Arm,
    /// Observed intercurrent status; absent when unobservable (for example a
    /// primary event before the landmark).
    pub s: Option<bool>,
    pub y: Outcome,
    pub x: CovariateVector,
}

/// One subject's full potential-outcome vector. Simulator and oracle only;
/// never observable in a real trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialRecord {
    pub id: String,
    pub s0: bool,
    pub s1: bool,
    pub y0: Outcome,
    pub y1: Outcome,
    /// True uncensored event times `(t0, t1)`; present exactly when the
    /// outcomes are time-to-event. The stored `y0`/`y1` already include
    /// censoring so that revealing them is exact.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_event_times: Option<(f64, f64)>,
    pub x: CovariateVector,
}

impl PotentialRecord {
    pub fn stratum(&self) -> PrincipalStratum {
        classify_stratum(self.s0, self.s1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.y0.kind() != self.y1.kind() {
            return Err(Error::invalid(format!(
                "potential outcomes of record '{}' have different kinds",
                self.id
            )));
        }
        let is_tte = self.y0.kind() == OutcomeKind::TimeToEvent;
        if is_tte != self.true_event_times.is_some() {
            return Err(Error::invalid(format!(
                "record '{}': true event times must be present exactly for time-to-event outcomes",
                self.id
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Estimand specification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Contrast {
    RiskDifference,
    RiskRatio,
    MeanDifference,
    SurvivalDifferenceAt { t_star: f64 },
    RmstDifference { t_star: f64 },
}

impl Contrast {
    pub fn is_survival(&self) -> bool {
        matches!(
            self,
            Contrast::SurvivalDifferenceAt { .. } | Contrast::RmstDifference { .. }
        )
    }

    pub fn is_ratio(&self) -> bool {
        matches!(self, Contrast::RiskRatio)
    }

    pub fn t_star(&self) -> Option<f64> {
        match self {
            Contrast::SurvivalDifferenceAt { t_star } | Contrast::RmstDifference { t_star } => {
                Some(*t_star)
            }
            _ => None,
        }
    }

    /// The no-effect value: 1 for ratios, 0 for differences.
    pub fn null_value(&self) -> f64 {
        if self.is_ratio() {
            1.0
        } else {
            0.0
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Contrast::RiskDifference => "risk_difference",
            Contrast::RiskRatio => "risk_ratio",
            Contrast::MeanDifference => "mean_difference",
            Contrast::SurvivalDifferenceAt { .. } => "survival_difference_at",
            Contrast::RmstDifference { .. } => "rmst_difference",
        }
    }

    /// Combines the two arm components (test, control) on the contrast scale.
    pub(crate) fn combine(&self, test: f64, control: f64) -> Result<f64> {
        match self {
            Contrast::RiskDifference | Contrast::MeanDifference => Ok(test - control),
            Contrast::SurvivalDifferenceAt { .. } | Contrast::RmstDifference { .. } => {
                Ok(test - control)
            }
            Contrast::RiskRatio => {
                if control == 0.0 {
                    Err(Error::UndefinedRatio)
                } else {
                    Ok(test / control)
                }
            }
        }
    }
}

/// Target stratum, contrast, and optional landmark time at which the
/// intercurrent status is assessed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimandSpec {
    pub stratum: StratumSet,
    pub contrast: Contrast,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmark: Option<f64>,
}

impl EstimandSpec {
    pub fn new(stratum: StratumSet, contrast: Contrast) -> Self {
        EstimandSpec {
            stratum,
            contrast,
            landmark: None,
        }
    }

    pub fn with_landmark(mut self, landmark: f64) -> Self {
        self.landmark = Some(landmark);
        self
    }

    /// Checks the contrast/landmark against an outcome kind.
    pub fn validate_for(&self, kind: OutcomeKind) -> Result<()> {
        match self.contrast {
            Contrast::RiskDifference | Contrast::RiskRatio => {
                if kind != OutcomeKind::Binary {
                    return Err(Error::invalid(format!(
                        "{} requires a binary outcome, got {kind}",
                        self.contrast.label()
                    )));
                }
            }
            Contrast::MeanDifference => {
                if kind == OutcomeKind::TimeToEvent {
                    return Err(Error::invalid(
                        "mean_difference requires a binary or continuous outcome",
                    ));
                }
            }
            Contrast::SurvivalDifferenceAt { t_star } | Contrast::RmstDifference { t_star } => {
                if kind != OutcomeKind::TimeToEvent {
                    return Err(Error::invalid(format!(
                        "{} requires a time-to-event outcome, got {kind}",
                        self.contrast.label()
                    )));
                }
                if !t_star.is_finite() || t_star <= 0.0 {
                    return Err(Error::invalid("t* must be positive and finite"));
                }
            }
        }
        if let Some(landmark) = self.landmark {
            if kind != OutcomeKind::TimeToEvent {
                return Err(Error::invalid(
                    "a landmark time applies only to time-to-event outcomes",
                ));
            }
            if !landmark.is_finite() || landmark < 0.0 {
                return Err(Error::invalid("landmark must be nonnegative and finite"));
            }
            if let Some(t_star) = self.contrast.t_star() {
                if t_star <= landmark {
                    return Err(Error::invalid(format!(
                        "t* ({t_star}) must exceed the landmark ({landmark})"
                    )));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Estimate results
// ---------------------------------------------------------------------------

/// Point estimate with percentile-bootstrap interval and diagnostics.
///
/// `ci_lower`/`ci_upper` are absent for methods that do not offer a bootstrap
/// interval (the mixture likelihood reports multi-start stability instead).
/// `n_effective` is the effective sample size of the analysis weights,
/// `(sum w)^2 / sum w^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub estimate: f64,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub method: String,
    pub n_effective: f64,
    pub diagnostics: BTreeMap<String, serde_json::Value>,
}

impl EstimateResult {
    pub fn new(method: impl Into<String>, estimate: f64, n_effective: f64) -> Self {
        EstimateResult {
            estimate,
            ci_lower: None,
            ci_upper: None,
            method: method.into(),
            n_effective,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn with_ci(mut self, lower: f64, upper: f64) -> Self {
        self.ci_lower = Some(lower);
        self.ci_upper = Some(upper);
        self
    }

    pub fn with_diag(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.diagnostics.insert(key.to_string(), value.into());
        self
    }
}

/// Direction of the monotonicity assumption on the intercurrent event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotonicityDirection {
    /// `S(0) >= S(1)`: test treatment can only prevent the event; the
    /// event-under-test-only cell is empty.
    S0GeS1,
    /// `S(1) >= S(0)`: test treatment can only cause the event; the
    /// event-under-control-only cell is empty.
    S1GeS0,
}

impl MonotonicityDirection {
    pub fn excluded_cell(self) -> PrincipalStratum {
        match self {
            MonotonicityDirection::S0GeS1 => PrincipalStratum::EventTestOnly,
            MonotonicityDirection::S1GeS0 => PrincipalStratum::EventControlOnly,
        }
    }
}

impl fmt::Display for MonotonicityDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MonotonicityDirection::S0GeS1 => f.write_str("S(0) >= S(1)"),
            MonotonicityDirection::S1GeS0 => f.write_str("S(1) >= S(0)"),
        }
    }
}
