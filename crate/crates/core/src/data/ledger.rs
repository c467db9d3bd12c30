use crate::error::{Error, Result};

/// Last observed training loss of every sample.
///
/// Unseen samples hold no loss. Values are the losses as observed when the
/// sample was processed; they are never refreshed under a newer model.
#[derive(Debug, Clone, PartialEq)]
pub struct LossLedger {
    last_loss: Vec<Option<f64>>,
    last_round: Vec<Option<u64>>,
}

impl LossLedger {
    pub fn new(n: usize) -> Self {
        Self { last_loss: vec![None; n], last_round: vec![None; n] }
    }

    pub fn len(&self) -> usize {
        self.last_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.last_loss.is_empty()
    }

    pub fn loss(&self, id: usize) -> Option<f64> {
        self.last_loss[id]
    }

    pub fn last_round(&self, id: usize) -> Option<u64> {
        self.last_round[id]
    }

    pub fn seen_count(&self) -> usize {
        self.last_loss.iter().filter(|l| l.is_some()).count()
    }

    /// Mean over samples that have been seen at least once.
    pub fn mean_seen_loss(&self) -> Option<f64> {
        let (sum, count) = self
            .last_loss
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, c), l| (s + l, c + 1));
        (count > 0).then(|| sum / count as f64)
    }

    /// Overwrites the entries for `ids` in order, so a later occurrence of
    /// the same id wins. Nothing is written if any input is invalid.
    pub fn record(&mut self, ids: &[usize], losses: &[f64], round: u64) -> Result<()> {
        if ids.len() != losses.len() {
            return Err(Error::LengthMismatch { expected: ids.len(), found: losses.len() });
        }
        if let Some(&id) = ids.iter().find(|&&id| id >= self.len()) {
            return Err(Error::IdOutOfRange { id, n: self.len() });
        }
        if losses.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::InvalidArgument("recorded losses must be finite and nonnegative".into()));
        }
        for (&id, &loss) in ids.iter().zip(losses) {
            self.last_loss[id] = Some(loss);
            self.last_round[id] = Some(round);
        }
        Ok(())
    }

    /// Same as [`record`](Self::record) for `(id, loss)` pairs.
    pub fn record_pairs(&mut self, pairs: &[(usize, f64)], round: u64) -> Result<()> {
        let (ids, losses): (Vec<usize>, Vec<f64>) = pairs.iter().copied().unzip();
        self.record(&ids, &losses, round)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_and_read_back() {
        let mut ledger = LossLedger::new(4);
        assert_eq!(ledger.mean_seen_loss(), None);
        ledger.record(&[1, 3], &[0.5, 2.0], 0).unwrap();
        assert_eq!(ledger.loss(1), Some(0.5));
        assert_eq!(ledger.loss(0), None);
        assert_eq!(ledger.last_round(3), Some(0));
        assert_eq!(ledger.seen_count(), 2);
        assert_eq!(ledger.mean_seen_loss(), Some(1.25));
    }

    #[test]
    fn last_write_wins() {
        let mut ledger = LossLedger::new(3);
        ledger.record_pairs(&[(2, 1.0), (2, 0.25)], 4).unwrap();
        ledger.record_pairs(&[(2, 0.75)], 4).unwrap();
        assert_eq!(ledger.loss(2), Some(0.75));
        assert_eq!(ledger.last_round(2), Some(4));
    }

    #[test]
    fn rejects_bad_input_atomically() {
        let mut ledger = LossLedger::new(2);
        assert!(matches!(ledger.record(&[0, 2], &[1.0, 1.0], 0), Err(Error::IdOutOfRange { id: 2, n: 2 })));
        assert!(ledger.record(&[0], &[1.0, 2.0], 0).is_err());
        assert!(ledger.record(&[0, 1], &[1.0, -0.1], 0).is_err());
        assert!(ledger.record(&[0], &[f64::NAN], 0).is_err());
        assert_eq!(ledger.seen_count(), 0);
    }
}
