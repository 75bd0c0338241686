//! Call-order logging for the multi-learner round protocols.

/// What happened to learner `learner` during round `round`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallKind {
    /// The learner's prediction was read.
    Predict,
    /// A random direction for the learner's estimate was drawn.
    DrawDirection,
    /// Feedback (gradient or loss value) for the learner was requested.
    Feedback,
    /// The learner received its linear loss.
    Update,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallEvent {
    pub round: u64,
    pub learner: usize,
    pub kind: CallKind,
}

#[derive(Debug, Clone, Default)]
pub struct CallLog {
    events: Vec<CallEvent>,
}

impl CallLog {
    pub fn push(&mut self, round: u64, learner: usize, kind: CallKind) {
        self.events.push(CallEvent {
            round,
            learner,
            kind,
        });
    }

    pub fn events(&self) -> &[CallEvent] {
        &self.events
    }

    /// Checks that, for every `(round, learner)`, the prediction was read
    /// before any direction draw, feedback request or update for that pair,
    /// and that every pair saw exactly one prediction.
    pub fn check_predict_first(&self) -> Result<(), String> {
        use std::collections::HashMap;
        let mut predicted: HashMap<(u64, usize), bool> = HashMap::new();
        for e in &self.events {
            let key = (e.round, e.learner);
            match e.kind {
                CallKind::Predict => {
                    if predicted.insert(key, true).is_some() {
                        return Err(format!("learner {} predicted twice in round {}", e.learner, e.round));
                    }
                }
                other => {
                    if !predicted.contains_key(&key) {
                        return Err(format!(
                            "{other:?} for learner {} in round {} preceded its prediction",
                            e.learner, e.round
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_feedback_before_prediction() {
        let mut log = CallLog::default();
        log.push(1, 0, CallKind::Predict);
        log.push(1, 0, CallKind::Feedback);
        assert!(log.check_predict_first().is_ok());
        log.push(1, 1, CallKind::Feedback);
        assert!(log.check_predict_first().is_err());
    }
}
