/// Patience-based stopping on a metric where larger is better.
///
/// Only a strictly greater value counts as an improvement; ties neither
/// reset patience nor move the best epoch.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    epochs: usize,
    since_best: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            best_epoch: 0,
            epochs: 0,
            since_best: 0,
        }
    }

    /// Records the metric of the next epoch (epochs are numbered from 1).
    pub fn observe(&mut self, metric: f64) -> Observation {
        self.epochs += 1;
        let improved = self.best.is_none_or(|b| metric > b);
        if improved {
            self.best = Some(metric);
            self.best_epoch = self.epochs;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        Observation {
            improved,
            stop: self.since_best >= self.patience,
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Replays a validation curve and returns `(best_epoch, last_epoch_run)`.
pub fn replay(curve: &[f64], patience: usize, max_epochs: usize) -> (usize, usize) {
    let mut stopper = EarlyStopping::new(patience);
    let mut last = 0;
    for (i, &m) in curve.iter().take(max_epochs).enumerate() {
        last = i + 1;
        if stopper.observe(m).stop {
            break;
        }
    }
    (stopper.best_epoch(), last)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_stops_after_patience() {
        let mut curve = vec![0.1, 0.2];
        curve.extend(std::iter::repeat_n(0.2, 50));
        assert_eq!(replay(&curve, 10, 200), (2, 12));
    }

    #[test]
    fn increasing_curve_runs_to_cap() {
        let curve: Vec<f64> = (0..200).map(|i| i as f64).collect();
        assert_eq!(replay(&curve, 10, 200), (200, 200));
    }

    #[test]
    fn later_improvement_resets_patience() {
        let mut curve = vec![0.5; 9];
        curve[0] = 0.3;
        curve.push(0.6);
        curve.extend(std::iter::repeat_n(0.1, 20));
        // best at 10, stop at 20
        assert_eq!(replay(&curve, 10, 200), (10, 20));
    }
}
