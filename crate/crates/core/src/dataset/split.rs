use crate::error::{HdaError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Valid,
    Test,
    Discard,
}

impl Split {
    pub fn tag(self) -> f64 {
        match self {
            Split::Train => 0.0,
            Split::Valid => 1.0,
            Split::Test => 2.0,
            Split::Discard => 3.0,
        }
    }

    pub fn from_tag(tag: f64) -> Option<Split> {
        [Split::Train, Split::Valid, Split::Test, Split::Discard]
            .into_iter()
            .find(|s| s.tag() == tag)
    }
}

/// Segment lengths repeated after the training block.
pub const PATTERN: [(Split, usize); 4] = [
    (Split::Discard, 4),
    (Split::Valid, 8),
    (Split::Discard, 4),
    (Split::Test, 8),
];

/// One label per day, chronological.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub labels: Vec<Split>,
    pub train_days: usize,
}

impl SplitSpec {
    pub fn days(&self, which: Split) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == which)
            .map(|(d, _)| d)
            .collect()
    }

    pub fn count(&self, which: Split) -> usize {
        self.labels.iter().filter(|&&l| l == which).count()
    }

    /// Number of valid/test pattern repetitions that reached their test segment.
    pub fn n_batches(&self) -> usize {
        let mut n = 0;
        let mut prev = Split::Train;
        for &l in &self.labels {
            if l == Split::Test && prev != Split::Test {
                n += 1;
            }
            prev = l;
        }
        n
    }
}

/// First `train_days` days train; the rest follow the repeating
/// discard/valid/discard/test pattern, the last repetition truncated.
pub fn partition(n_days: usize, train_days: usize) -> Result<SplitSpec> {
    if n_days <= train_days {
        return Err(HdaError::InsufficientDays {
            total: n_days,
            train: train_days,
        });
    }
    let mut labels = vec![Split::Train; train_days];
    'fill: loop {
        for &(label, len) in &PATTERN {
            for _ in 0..len {
                if labels.len() == n_days {
                    break 'fill;
                }
                labels.push(label);
            }
        }
    }
    Ok(SplitSpec { labels, train_days })
}

/// Dataset-size strategies for subsetting the training days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizeStrategy {
    /// Equal stride over all training days.
    OldAndNew,
    /// Earliest block.
    Old,
    /// Latest block.
    New,
}

/// Picks `count` of the given chronological days.
pub fn select_days(days: &[usize], count: usize, strategy: SizeStrategy) -> Vec<usize> {
    let count = count.min(days.len());
    match strategy {
        SizeStrategy::Old => days[..count].to_vec(),
        SizeStrategy::New => days[days.len() - count..].to_vec(),
        SizeStrategy::OldAndNew => (0..count).map(|k| days[k * days.len() / count]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_cycle_after_training() {
        let s = partition(30 + 24, 30).unwrap();
        assert_eq!(s.count(Split::Valid), 8);
        assert_eq!(s.count(Split::Test), 8);
        assert_eq!(s.n_batches(), 1);
    }

    #[test]
    fn truncated_trailing_segment() {
        let s = partition(10 + 30, 10).unwrap();
        // 24 full + discard 4 + valid 2.
        assert_eq!(s.count(Split::Valid), 10);
        assert_eq!(s.count(Split::Test), 8);
        assert_eq!(s.labels.len(), 40);
    }

    #[test]
    fn insufficient_days() {
        assert!(matches!(partition(5, 5), Err(HdaError::InsufficientDays { .. })));
    }

    #[test]
    fn size_strategies() {
        let days: Vec<usize> = (0..10).collect();
        assert_eq!(select_days(&days, 3, SizeStrategy::Old), vec![0, 1, 2]);
        assert_eq!(select_days(&days, 3, SizeStrategy::New), vec![7, 8, 9]);
        assert_eq!(select_days(&days, 5, SizeStrategy::OldAndNew), vec![0, 2, 4, 6, 8]);
        assert_eq!(select_days(&days, 10, SizeStrategy::OldAndNew), days);
    }
}
