use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub patience: usize,
    pub min_delta_psnr: f64,
    pub min_delta_ssim: f64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            patience: 2,
            min_delta_psnr: 0.05,
            min_delta_ssim: 0.001,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Stop once the last `patience` stages each failed to beat the best earlier
/// PSNR by `min_delta_psnr` and the best earlier SSIM by `min_delta_ssim`.
///
/// `history` holds one `(psnr, ssim)` pair per completed stage.
pub fn stopping_check(history: &[(f64, f64)], rule: &StoppingRule) -> StopDecision {
    if rule.patience == 0 || history.len() <= rule.patience {
        return StopDecision::Continue;
    }
    let mut best = history[0];
    let mut stalled = 0;
    for &(p, s) in &history[1..] {
        let improved = p > best.0 + rule.min_delta_psnr || s > best.1 + rule.min_delta_ssim;
        stalled = if improved { 0 } else { stalled + 1 };
        best = (best.0.max(p), best.1.max(s));
    }
    if stalled >= rule.patience {
        StopDecision::Stop
    } else {
        StopDecision::Continue
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improving_history_continues() {
        let h = [(20.0, 0.5), (22.0, 0.6), (23.0, 0.65), (23.5, 0.7)];
        assert_eq!(stopping_check(&h, &StoppingRule::default()), StopDecision::Continue);
    }

    #[test]
    fn flat_history_of_three_stops() {
        let h = [(25.0, 0.8); 3];
        assert_eq!(stopping_check(&h, &StoppingRule::default()), StopDecision::Stop);
        assert_eq!(stopping_check(&h[..2], &StoppingRule::default()), StopDecision::Continue);
    }

    #[test]
    fn either_metric_counts_as_progress() {
        let h = [(25.0, 0.80), (25.01, 0.81), (25.02, 0.82)];
        assert_eq!(stopping_check(&h, &StoppingRule::default()), StopDecision::Continue);
        let h = [(25.0, 0.80), (25.01, 0.8005), (25.5, 0.8006), (25.51, 0.8007), (25.52, 0.8008)];
        assert_eq!(stopping_check(&h, &StoppingRule::default()), StopDecision::Stop);
    }

    #[test]
    fn regression_counts_as_stall() {
        let h = [(25.0, 0.8), (24.0, 0.7), (24.5, 0.75)];
        assert_eq!(stopping_check(&h, &StoppingRule::default()), StopDecision::Stop);
    }
}
