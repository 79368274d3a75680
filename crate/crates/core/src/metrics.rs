//! Precision/recall/F1, per-iteration averaging, logarithmic trendlines and
//! the live F1 estimator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::RelevanceLabel;

/// `counts[truth][predicted]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts(pub [[u64; 3]; 3]);

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn get(&self, truth: RelevanceLabel, predicted: RelevanceLabel) -> u64 {
        self.0[truth.index()][predicted.index()]
    }

    pub fn add(&mut self, truth: RelevanceLabel, predicted: RelevanceLabel) {
        self.0[truth.index()][predicted.index()] += 1;
    }

    fn support(&self, class: usize) -> u64 {
        self.0[class].iter().sum()
    }

    fn predicted(&self, class: usize) -> u64 {
        self.0.iter().map(|row| row[class]).sum()
    }
}

pub fn confusion(truth: &[RelevanceLabel], predicted: &[RelevanceLabel]) -> Result<ConfusionCounts> {
    if truth.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "{} truth labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut counts = ConfusionCounts::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        counts.add(t, p);
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

impl ScoreTriple {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        ScoreTriple {
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }
}

/// How per-class counts collapse into one score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AverageMode {
    /// Mean precision and recall over classes with non-zero support, then
    /// F1 of those means.
    #[default]
    #[serde(rename = "macro")]
    Macro,
    /// Relevant is the positive class, everything else negative.
    #[serde(rename = "binary-relevant")]
    BinaryRelevant,
}

impl fmt::Display for AverageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AverageMode::Macro => "macro",
            AverageMode::BinaryRelevant => "binary-relevant",
        })
    }
}

impl FromStr for AverageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "macro" => Ok(AverageMode::Macro),
            "binary" | "binary-relevant" => Ok(AverageMode::BinaryRelevant),
            _ => Err(Error::InvalidArgument(format!("unknown averaging mode {s:?}"))),
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn score(counts: &ConfusionCounts, mode: AverageMode) -> ScoreTriple {
    match mode {
        AverageMode::Macro => {
            let supported: Vec<usize> = (0..3).filter(|&c| counts.support(c) > 0).collect();
            if supported.is_empty() {
                return ScoreTriple::default();
            }
            let n = supported.len() as f64;
            let p = supported
                .iter()
                .map(|&c| ratio(counts.0[c][c], counts.predicted(c)))
                .sum::<f64>()
                / n;
            let r = supported
                .iter()
                .map(|&c| ratio(counts.0[c][c], counts.support(c)))
                .sum::<f64>()
                / n;
            ScoreTriple::from_pr(p, r)
        }
        AverageMode::BinaryRelevant => {
            let pos = RelevanceLabel::Relevant.index();
            let tp = counts.0[pos][pos];
            ScoreTriple::from_pr(ratio(tp, counts.predicted(pos)), ratio(tp, counts.support(pos)))
        }
    }
}

/// Component-wise arithmetic mean; F1 is averaged, not recomputed.
pub fn average_f1(per_iteration: &[ScoreTriple]) -> Result<ScoreTriple> {
    if per_iteration.is_empty() {
        return Err(Error::InvalidArgument("cannot average an empty score list".into()));
    }
    let n = per_iteration.len() as f64;
    let sum = per_iteration.iter().fold((0.0, 0.0, 0.0), |acc, s| {
        (acc.0 + s.precision, acc.1 + s.recall, acc.2 + s.f1)
    });
    Ok(ScoreTriple {
        precision: sum.0 / n,
        recall: sum.1 / n,
        f1: sum.2 / n,
    })
}

/// `y = a·ln(x) + b`, fitted by least squares on `(ln x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendlineFit {
    pub a: f64,
    pub b: f64,
    /// Target score whose crossing was requested, if any.
    pub target: Option<f64>,
    /// Smallest `x` (rounded) at which the curve reaches `target`.
    pub crossing_n: Option<u64>,
}

impl TrendlineFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.a * x.ln() + self.b
    }

    /// Solves `a·ln(x) + b = y` and rounds to the nearest integer.
    pub fn crossing(&self, y: f64) -> Option<u64> {
        if self.a == 0.0 {
            return None;
        }
        let x = ((y - self.b) / self.a).exp();
        (x.is_finite() && x >= 0.0 && x < u64::MAX as f64).then(|| x.round() as u64)
    }

    pub fn with_target(mut self, y: f64) -> Self {
        self.target = Some(y);
        self.crossing_n = self.crossing(y);
        self
    }

    /// Sum of squared residuals over `points`.
    pub fn residual(&self, points: &[(f64, f64)]) -> f64 {
        points.iter().map(|&(x, y)| (self.eval(x) - y).powi(2)).sum()
    }
}

pub fn fit_log(points: &[(f64, f64)]) -> Result<TrendlineFit> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("logarithmic fit needs at least two points".into()));
    }
    if let Some(&(x, _)) = points.iter().find(|(x, _)| x.is_nan() || *x < 1.0 || !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("fit abscissa {x} must be ≥ 1")));
    }
    let n = points.len() as f64;
    let mean_u = points.iter().map(|(x, _)| x.ln()).sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in points {
        let du = x.ln() - mean_u;
        sxy += du * (y - mean_y);
        sxx += du * du;
    }
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all abscissae equal; fit is singular".into()));
    }
    let a = sxy / sxx;
    Ok(TrendlineFit {
        a,
        b: mean_y - a * mean_u,
        target: None,
        crossing_n: None,
    })
}

/// Live F1 proxy from the number of user-labeled examples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceEstimator {
    pub a: f64,
    pub b: f64,
}

impl Default for PerformanceEstimator {
    /// Coefficients fitted on the Colorado wildfires replay.
    fn default() -> Self {
        PerformanceEstimator { a: 0.09, b: 0.22 }
    }
}

impl PerformanceEstimator {
    pub fn estimate(&self, n_trained: u64) -> f64 {
        if n_trained == 0 {
            return 0.0;
        }
        (self.a * (n_trained as f64).ln() + self.b).clamp(0.0, 1.0)
    }
}

/// [`PerformanceEstimator::estimate`] with the default coefficients.
pub fn estimate_f1(n_trained: u64) -> f64 {
    PerformanceEstimator::default().estimate(n_trained)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use RelevanceLabel::{CantDecide as C, NotRelevant as N, Relevant as R};

    #[test]
    fn confusion_examples() {
        let c = confusion(&[R, R, N], &[R, R, N]).unwrap();
        assert_eq!(c.0, [[2, 0, 0], [0, 1, 0], [0, 0, 0]]);
        assert_eq!(confusion(&[], &[]).unwrap(), ConfusionCounts::default());
        let c = confusion(&[R, R, R, N, N], &[R, R, N, R, N]).unwrap();
        assert_eq!((c.get(R, R), c.get(R, N), c.get(N, R), c.get(N, N)), (2, 1, 1, 1));
        assert!(confusion(&[R], &[]).is_err());
    }

    #[test]
    fn binary_hand_example() {
        // TP = 3, FP = 1, FN = 2
        let mut c = ConfusionCounts::default();
        c.0[0][0] = 3;
        c.0[1][0] = 1;
        c.0[1][1] = 4;
        c.0[0][1] = 2;
        let s = score(&c, AverageMode::BinaryRelevant);
        assert!((s.precision - 0.75).abs() < 1e-12);
        assert!((s.recall - 0.6).abs() < 1e-12);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn macro_skips_unsupported_classes() {
        let c = confusion(&[R, R, N, N], &[R, C, N, N]).unwrap();
        let s = score(&c, AverageMode::Macro);
        // R: p 1, r 0.5; N: p 1, r 1. Can't Decide has no support.
        assert!((s.precision - 1.0).abs() < 1e-12);
        assert!((s.recall - 0.75).abs() < 1e-12);
        assert_eq!(score(&ConfusionCounts::default(), AverageMode::Macro), ScoreTriple::default());
    }

    #[test]
    fn f1_of_cnn_scores_rounds_down() {
        let f1 = f1_score(0.74, 0.73);
        assert!((f1 - 0.734966).abs() < 1e-6);
        assert_eq!(format!("{f1:.2}"), "0.73");
        assert!((f1_score(0.4, 0.4) - 0.4).abs() < 1e-15);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn average_examples() {
        let s = ScoreTriple::from_pr(0.5, 0.7);
        assert_eq!(average_f1(&[s]).unwrap(), s);
        let a = ScoreTriple { precision: 0.6, recall: 0.6, f1: 0.6 };
        let b = ScoreTriple { precision: 0.8, recall: 0.8, f1: 0.8 };
        assert!((average_f1(&[a, b]).unwrap().f1 - 0.7).abs() < 1e-12);
        assert!(average_f1(&[]).is_err());
    }

    #[test]
    fn fit_recovers_exact_curve() {
        let pts: Vec<(f64, f64)> = (1..=20).map(|i| {
            let x = 10.0 * i as f64;
            (x, 0.09 * x.ln() + 0.22)
        }).collect();
        let fit = fit_log(&pts).unwrap();
        assert!((fit.a - 0.09).abs() < 1e-9 && (fit.b - 0.22).abs() < 1e-9);
        assert!(fit.residual(&pts) < 1e-20);
    }

    #[test]
    fn crossing_at_reported_average() {
        let fit = TrendlineFit { a: 0.09, b: 0.22, target: None, crossing_n: None }.with_target(0.7086);
        assert_eq!(fit.crossing_n, Some(228));
    }

    #[test]
    fn two_points_interpolate() {
        let fit = fit_log(&[(2.0, 0.3), (50.0, 0.8)]).unwrap();
        assert!((fit.eval(2.0) - 0.3).abs() < 1e-12);
        assert!((fit.eval(50.0) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        assert!(fit_log(&[(10.0, 0.5)]).is_err());
        assert!(fit_log(&[(10.0, 0.5), (10.0, 0.6)]).is_err());
        assert!(fit_log(&[(0.5, 0.5), (10.0, 0.6)]).is_err());
    }

    #[test]
    fn estimator_values() {
        assert!((estimate_f1(100) - 0.634465).abs() < 1e-6);
        assert_eq!(format!("{:.4}", estimate_f1(100)), "0.6345");
        assert_eq!(estimate_f1(0), 0.0);
        assert!((estimate_f1(228) - 0.7086).abs() < 1e-4);
        assert!((estimate_f1(228) - 0.7134).abs() < 0.01);
        assert_eq!(estimate_f1(1), 0.22);
    }

    fn arb_label() -> impl Strategy<Value = RelevanceLabel> {
        prop_oneof![Just(R), Just(N), Just(C)]
    }

    proptest! {
        #[test]
        fn f1_between_min_and_max(p in 0.0f64..=1.0, r in 0.0f64..=1.0) {
            let f = f1_score(p, r);
            if p > 0.0 && r > 0.0 {
                prop_assert!(f <= p.max(r) + 1e-12 && f >= p.min(r) - 1e-12);
            } else {
                prop_assert_eq!(f, 0.0);
            }
        }

        #[test]
        fn score_is_permutation_invariant(
            pairs in proptest::collection::vec((arb_label(), arb_label()), 0..40),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let (t, p): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (ts, ps): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
            for mode in [AverageMode::Macro, AverageMode::BinaryRelevant] {
                prop_assert_eq!(
                    score(&confusion(&t, &p).unwrap(), mode),
                    score(&confusion(&ts, &ps).unwrap(), mode)
                );
            }
        }

        #[test]
        fn estimator_is_monotone(n in 0u64..100_000) {
            prop_assert!(estimate_f1(n + 1) >= estimate_f1(n));
        }
    }
}
