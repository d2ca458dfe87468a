use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Train/validation/test timestamp counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

impl SplitSpec {
    pub fn new(n_train: usize, n_val: usize, n_test: usize) -> Self {
        Self {
            n_train,
            n_val,
            n_test,
        }
    }

    /// Rounds the train and validation fractions; the test split takes the rest.
    pub fn from_fractions(timestamps: usize, train: f64, val: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&train) || !(0.0..=1.0).contains(&val) || train + val > 1.0 {
            return Err(Error::Config(format!("split fractions {train}/{val} out of range")));
        }
        let n_train = (train * timestamps as f64).round() as usize;
        let n_val = ((val * timestamps as f64).round() as usize).min(timestamps - n_train);
        Ok(Self::new(n_train, n_val, timestamps - n_train - n_val))
    }

    /// The default 70/10/20 chronological split.
    pub fn default_for(timestamps: usize) -> Self {
        Self::from_fractions(timestamps, 0.7, 0.1).expect("static fractions are valid")
    }

    pub fn total(&self) -> usize {
        self.n_train + self.n_val + self.n_test
    }
}

/// Contiguous chronological timestamp ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl Split {
    pub fn new(timestamps: usize, spec: SplitSpec) -> Result<Self> {
        if spec.total() != timestamps {
            return Err(Error::Config(format!(
                "split {}/{}/{} does not cover {timestamps} timestamps",
                spec.n_train, spec.n_val, spec.n_test
            )));
        }
        let a = spec.n_train;
        let b = a + spec.n_val;
        Ok(Self {
            train: 0..a,
            val: a..b,
            test: b..timestamps,
        })
    }

    pub fn spec(&self) -> SplitSpec {
        SplitSpec::new(self.train.len(), self.val.len(), self.test.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_fractions() {
        assert_eq!(SplitSpec::default_for(50), SplitSpec::new(35, 5, 10));
        assert_eq!(SplitSpec::default_for(90), SplitSpec::new(63, 9, 18));
        assert_eq!(SplitSpec::default_for(100), SplitSpec::new(70, 10, 20));
    }

    #[test]
    fn explicit_ranges() {
        let s = Split::new(10, SplitSpec::new(8, 1, 1)).unwrap();
        assert_eq!((s.train, s.val, s.test), (0..8, 8..9, 9..10));
    }

    #[test]
    fn mismatched_sum_is_rejected() {
        assert!(Split::new(10, SplitSpec::new(8, 1, 2)).is_err());
    }
}
