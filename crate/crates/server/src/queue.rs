use crate::wire::LabeledTweet;

/// Client-side buffer of relabeled tweets. A batch is released exactly when
/// the number of distinct pending ids reaches the threshold; relabeling a
/// pending id replaces its label without counting twice.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingQueue {
    threshold: usize,
    pending: Vec<LabeledTweet>,
}

impl Default for PendingQueue {
    fn default() -> Self {
        PendingQueue::new(10)
    }
}

impl PendingQueue {
    pub fn new(threshold: usize) -> Self {
        PendingQueue {
            threshold: threshold.max(1),
            pending: Vec::new(),
        }
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    /// Distinct pending ids.
    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Queues one relabel; returns the batch to send once the threshold is met.
    pub fn push(&mut self, item: LabeledTweet) -> Option<Vec<LabeledTweet>> {
        match self.pending.iter_mut().find(|p| p.id == item.id) {
            Some(p) => *p = item,
            None => self.pending.push(item),
        }
        (self.pending.len() >= self.threshold).then(|| std::mem::take(&mut self.pending))
    }

    /// Releases whatever is pending regardless of the threshold.
    pub fn drain(&mut self) -> Vec<LabeledTweet> {
        std::mem::take(&mut self.pending)
    }
}
