//! Fusion rules combining the outputs of several base classifiers for a
//! single instance. Every tie breaks toward the lowest class index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::linear_svm::{argmax, ClassSupport};

const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// L classifiers by C classes of support values for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionProfile {
    rows: Vec<[f64; NUM_CLASSES]>,
}

impl DecisionProfile {
    pub fn new(rows: Vec<[f64; NUM_CLASSES]>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::MalformedProfile("no classifier rows".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::MalformedProfile(format!("row {i} has a negative or NaN entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::MalformedProfile(format!("row {i} sums to {sum}")));
            }
        }
        Ok(DecisionProfile { rows })
    }

    pub fn from_supports(supports: &[ClassSupport]) -> Result<Self> {
        DecisionProfile::new(supports.iter().map(|s| s.0).collect())
    }

    pub fn rows(&self) -> &[[f64; NUM_CLASSES]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn column(&self, c: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[c]).collect()
    }

    /// Per-class support totals.
    pub fn column_sums(&self) -> [f64; NUM_CLASSES] {
        let mut sums = [0.0; NUM_CLASSES];
        for row in &self.rows {
            for c in 0..NUM_CLASSES {
                sums[c] += row[c];
            }
        }
        sums
    }

    /// Arg-max label of each row.
    pub fn row_predictions(&self) -> Vec<Label> {
        self.rows.iter().map(|r| Label::ALL[argmax(r)]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionRule {
    #[serde(alias = "plurality")]
    Vote,
    Mean,
    Median,
    Borda,
}

impl FusionRule {
    pub const ALL: [FusionRule; 4] = [FusionRule::Vote, FusionRule::Mean, FusionRule::Median, FusionRule::Borda];

    pub fn name(self) -> &'static str {
        match self {
            FusionRule::Vote => "vote",
            FusionRule::Mean => "mean",
            FusionRule::Median => "median",
            FusionRule::Borda => "borda",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            FusionRule::Vote => "Plurality Voting",
            FusionRule::Mean => "Mean Probability Rule",
            FusionRule::Median => "Median Probability Rule",
            FusionRule::Borda => "Borda Count",
        }
    }

    pub fn combine(self, profile: &DecisionProfile) -> Label {
        match self {
            FusionRule::Vote => plurality_vote(&profile.row_predictions()).expect("profile is non-empty"),
            FusionRule::Mean => mean_probability(profile),
            FusionRule::Median => median_probability(profile),
            FusionRule::Borda => borda_count(profile),
        }
    }
}

impl fmt::Display for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vote" | "plurality" => Ok(FusionRule::Vote),
            "mean" => Ok(FusionRule::Mean),
            "median" => Ok(FusionRule::Median),
            "borda" => Ok(FusionRule::Borda),
            _ => Err(Error::UnknownName(s.to_string())),
        }
    }
}

/// Modal label among the predictions.
pub fn plurality_vote(predictions: &[Label]) -> Result<Label> {
    if predictions.is_empty() {
        return Err(Error::EmptySelection("no predictions to vote on"));
    }
    let mut tally = [0.0; NUM_CLASSES];
    for p in predictions {
        tally[p.index()] += 1.0;
    }
    Ok(Label::ALL[argmax(&tally)])
}

/// Arg-max of the per-class mean support (same as the sum rule).
pub fn mean_probability(profile: &DecisionProfile) -> Label {
    let n = profile.len() as f64;
    let means = profile.column_sums().map(|s| s / n);
    Label::ALL[argmax(&means)]
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn median_scores(profile: &DecisionProfile) -> [f64; NUM_CLASSES] {
    std::array::from_fn(|c| median(profile.column(c)))
}

/// Arg-max of the per-class median support.
pub fn median_probability(profile: &DecisionProfile) -> Label {
    Label::ALL[argmax(&median_scores(profile))]
}

/// Borda points per class: in each row the top-ranked class gets N points,
/// the next N-1, down to 1.
pub fn borda_points(profile: &DecisionProfile) -> [u64; NUM_CLASSES] {
    let mut points = [0u64; NUM_CLASSES];
    for row in profile.rows() {
        let mut order: [usize; NUM_CLASSES] = std::array::from_fn(|c| c);
        // Stable sort keeps lower indices first among equal supports.
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
        for (rank, &class) in order.iter().enumerate() {
            points[class] += (NUM_CLASSES - rank) as u64;
        }
    }
    points
}

pub fn borda_count(profile: &DecisionProfile) -> Label {
    let points = borda_points(profile).map(|p| p as f64);
    Label::ALL[argmax(&points)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile(rows: &[[f64; 3]]) -> DecisionProfile {
        DecisionProfile::new(rows.to_vec()).unwrap()
    }

    #[test]
    fn plurality_examples() {
        use Label::*;
        assert_eq!(plurality_vote(&[Hate, Hate, Ok]).unwrap(), Hate);
        assert_eq!(plurality_vote(&[Hate, Ok]).unwrap(), Hate);
        assert_eq!(plurality_vote(&[Ok, Hate]).unwrap(), Hate);
        assert_eq!(plurality_vote(&[Offensive]).unwrap(), Offensive);
        assert!(plurality_vote(&[]).is_err());
    }

    #[test]
    fn mean_example() {
        let p = profile(&[[0.6, 0.3, 0.1], [0.1, 0.6, 0.3]]);
        assert_eq!(mean_probability(&p), Label::Offensive);
        let p1 = profile(&[[0.2, 0.3, 0.5]]);
        assert_eq!(mean_probability(&p1), Label::Ok);
    }

    #[test]
    fn median_ignores_outlier() {
        let p = profile(&[[0.9, 0.05, 0.05], [0.1, 0.8, 0.1], [0.15, 0.8, 0.05]]);
        assert_eq!(median_scores(&p), [0.15, 0.8, 0.05]);
        assert_eq!(median_probability(&p), Label::Offensive);
        assert_eq!(mean_probability(&p), Label::Offensive);
    }

    #[test]
    fn borda_example() {
        let p = profile(&[[0.5, 0.3, 0.2], [0.1, 0.5, 0.4]]);
        assert_eq!(borda_points(&p), [4, 5, 3]);
        assert_eq!(borda_count(&p), Label::Offensive);
        // within-row ties rank the lower index first
        let tie = profile(&[[0.4, 0.4, 0.2]]);
        assert_eq!(borda_points(&tie), [3, 2, 1]);
    }

    #[test]
    fn plurality_and_mean_can_disagree() {
        let p = profile(&[[0.34, 0.33, 0.33], [0.34, 0.33, 0.33], [0.0, 0.98, 0.02]]);
        assert_eq!(FusionRule::Vote.combine(&p), Label::Hate);
        assert_eq!(FusionRule::Mean.combine(&p), Label::Offensive);
    }

    #[test]
    fn malformed_profiles() {
        assert!(DecisionProfile::new(vec![]).is_err());
        assert!(DecisionProfile::new(vec![[0.5, 0.5, 0.5]]).is_err());
        assert!(DecisionProfile::new(vec![[1.5, -0.5, 0.0]]).is_err());
        assert!(DecisionProfile::new(vec![[f64::NAN, 0.5, 0.5]]).is_err());
    }

    #[test]
    fn rule_names_parse() {
        for rule in FusionRule::ALL {
            assert_eq!(rule.name().parse::<FusionRule>().unwrap(), rule);
        }
        assert_eq!("plurality".parse::<FusionRule>().unwrap(), FusionRule::Vote);
        assert!("max".parse::<FusionRule>().is_err());
    }

    fn row() -> impl Strategy<Value = [f64; 3]> {
        prop::array::uniform3(0.0f64..1.0).prop_filter_map("non-zero", |r| {
            let s: f64 = r.iter().sum();
            (s > 1e-6).then(|| r.map(|v| v / s))
        })
    }

    proptest! {
        #[test]
        fn single_row_identity(r in row()) {
            let p = profile(&[r]);
            let expected = Label::ALL[argmax(&r)];
            for rule in FusionRule::ALL {
                prop_assert_eq!(rule.combine(&p), expected);
            }
        }

        #[test]
        fn borda_totals_conserved(rows in prop::collection::vec(row(), 1..20)) {
            let p = profile(&rows);
            let total: u64 = borda_points(&p).iter().sum();
            prop_assert_eq!(total, (rows.len() * 3 * 4 / 2) as u64);
        }

        #[test]
        fn mean_equals_sum_rule_and_ignores_order(rows in prop::collection::vec(row(), 1..20), rot in 0usize..20) {
            let p = profile(&rows);
            prop_assert_eq!(mean_probability(&p), Label::ALL[argmax(&p.column_sums())]);
            let mut rotated = rows.clone();
            rotated.reverse();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            prop_assert_eq!(mean_probability(&profile(&rotated)), mean_probability(&p));
        }

        #[test]
        fn median_of_two_is_mean(a in row(), b in row()) {
            let p = profile(&[a, b]);
            prop_assert_eq!(median_probability(&p), mean_probability(&p));
        }
    }
}
