use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use crate::error::{Error, Result};

/// Train/validation/test fractions plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train,
            validation,
            test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 80/10/10, used for hyperparameter search.
    pub fn tuning(seed: u64) -> Self {
        SplitSpec {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
            seed,
        }
    }

    /// 50/0/50, used for the event-corpus evaluation.
    pub fn evaluation(seed: u64) -> Self {
        SplitSpec {
            train: 0.5,
            validation: 0.0,
            test: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::InvalidArgument(format!("split fractions {parts:?} must be non-negative")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!("split fractions {parts:?} must sum to 1")));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}",
            self.train * 100.0,
            self.validation * 100.0,
            self.test * 100.0
        )
    }
}

impl FromStr for SplitSpec {
    type Err = Error;

    /// Parses `"80/10/10"` (percentages) or `"0.5/0/0.5"` (fractions); seed 0.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split('/')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidArgument(format!("bad split {s:?}, expected e.g. 80/10/10")))?;
        if parts.len() != 3 {
            return Err(Error::InvalidArgument(format!("bad split {s:?}, expected three parts")));
        }
        let total: f64 = parts.iter().sum();
        let scale = if (total - 100.0).abs() < 1e-6 { 100.0 } else { 1.0 };
        SplitSpec::new(parts[0] / scale, parts[1] / scale, parts[2] / scale, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Corpus,
    pub validation: Corpus,
    pub test: Corpus,
}

fn portion(fraction: f64, n: usize) -> usize {
    // Tolerate representation error such as 0.1 * 30 = 2.9999999999999996.
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Seeded shuffle, then contiguous slices: train gets `⌊f_train·N⌋`,
/// validation the next `⌊f_val·N⌋`, test the remainder.
pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let n = corpus.len();
    let mut examples = corpus.examples.clone();
    examples.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let n_train = portion(spec.train, n);
    let n_val = portion(spec.validation, n).min(n - n_train);
    let test = examples.split_off(n_train + n_val);
    let validation = examples.split_off(n_train);
    if examples.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "split {spec} of {n} examples leaves an empty training or test partition"
        )));
    }
    if spec.validation > 0.0 && validation.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "split {spec} of {n} examples leaves the validation partition empty"
        )));
    }
    let part = |suffix: &str, examples| Corpus {
        name: format!("{}:{suffix}", corpus.name),
        examples,
    };
    Ok(Split {
        train: part("train", examples),
        validation: part("validation", validation),
        test: part("test", test),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::RelevanceLabel;
    use crate::simulation::RawExample;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn corpus(n: usize) -> Corpus {
        Corpus::new(
            "c",
            (0..n)
                .map(|i| RawExample {
                    id: i.to_string(),
                    text: format!("t{i}"),
                    label: RelevanceLabel::Relevant,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn figure_eight_sizes() {
        let s = split(&corpus(10_876), &SplitSpec::tuning(1)).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (8700, 1087, 1089));
    }

    #[test]
    fn half_half() {
        let s = split(&corpus(10), &SplitSpec::evaluation(3)).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (5, 0, 5));
    }

    #[test]
    fn deterministic() {
        let c = corpus(50);
        assert_eq!(split(&c, &SplitSpec::tuning(9)).unwrap(), split(&c, &SplitSpec::tuning(9)).unwrap());
        assert_ne!(split(&c, &SplitSpec::tuning(9)).unwrap(), split(&c, &SplitSpec::tuning(10)).unwrap());
    }

    #[test]
    fn empty_partition_is_an_error() {
        assert!(split(&corpus(1), &SplitSpec::evaluation(0)).is_err());
        assert!(split(&corpus(5), &SplitSpec::new(1.0, 0.0, 0.0, 0).unwrap()).is_err());
    }

    #[test]
    fn parse_spec() {
        let s: SplitSpec = "80/10/10".parse().unwrap();
        assert!((s.train - 0.8).abs() < 1e-12 && (s.test - 0.1).abs() < 1e-12);
        let s: SplitSpec = "0.5/0/0.5".parse().unwrap();
        assert_eq!(s.validation, 0.0);
        assert!("50/50".parse::<SplitSpec>().is_err());
        assert!("60/30/30".parse::<SplitSpec>().is_err());
    }

    proptest! {
        #[test]
        fn partitions_are_disjoint_and_exhaustive(n in 2usize..300, seed in any::<u64>(), tr in 1u32..9) {
            let train = f64::from(tr) / 10.0;
            let spec = SplitSpec::new(train, 0.0, 1.0 - train, seed).unwrap();
            let c = corpus(n);
            if let Ok(s) = split(&c, &spec) {
                prop_assert_eq!(s.train.len(), ((train * n as f64) + 1e-9).floor() as usize);
                prop_assert_eq!(s.train.len() + s.validation.len() + s.test.len(), n);
                let mut ids = HashSet::new();
                for ex in s.train.examples.iter().chain(&s.validation.examples).chain(&s.test.examples) {
                    prop_assert!(ids.insert(ex.id.clone()));
                }
            }
        }
    }
}
