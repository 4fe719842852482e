//! Training-loss telemetry: windowed means and their relative changes.
//!
//! Window `a ≥ 1` covers batches `(a−1)·W .. a·W`. Window means are
//! normalized by the loss of the very first (untrained) batch, which plays the
//! role of window 0, so `ξ_avg^0 = 1` and `ξ_cg^0 = 0`.

/// A window is stable once its relative change stays below this.
pub const STABILITY_THRESHOLD: f64 = 0.1;

/// Relative slack applied to the threshold so that changes equal to it up to
/// rounding are not counted as below it.
const THRESHOLD_SLACK: f64 = 1e-9;

/// Per-batch training losses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    losses: Vec<f64>,
    rejected: usize,
}

impl LossTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_losses(losses: Vec<f64>) -> Self {
        LossTrace { losses, rejected: 0 }
    }

    pub fn push(&mut self, loss: f64) {
        self.losses.push(loss);
    }

    /// Counts a sample whose loss or gradient was not finite.
    pub fn reject(&mut self) {
        self.rejected += 1;
    }

    pub fn rejected(&self) -> usize {
        self.rejected
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    /// Normalized means `ξ_avg^0..` over complete windows of `window` batches.
    pub fn xi_avg(&self, window: usize) -> Vec<f64> {
        assert!(window > 0, "window must be positive");
        let Some(&reference) = self.losses.first() else {
            return Vec::new();
        };
        let mut xi = vec![1.0];
        xi.extend(
            self.losses
                .chunks_exact(window)
                .map(|w| w.iter().sum::<f64>() / window as f64 / reference),
        );
        xi
    }

    /// `ξ_cg^a = |(ξ_avg^a − ξ_avg^{a−1}) / ξ_avg^{a−1}|`, with `ξ_cg^0 = 0`.
    pub fn xi_cg(&self, window: usize) -> Vec<f64> {
        relative_changes(&self.xi_avg(window))
    }

    /// Stability index over windows of `window` batches.
    pub fn stability_reached(&self, window: usize) -> Option<usize> {
        stability_index(&self.xi_avg(window))
    }
}

fn relative_changes(xi_avg: &[f64]) -> Vec<f64> {
    let mut cg = Vec::with_capacity(xi_avg.len());
    if !xi_avg.is_empty() {
        cg.push(0.0);
    }
    cg.extend(xi_avg.windows(2).map(|w| ((w[1] - w[0]) / w[0]).abs()));
    cg
}

/// First window index `a ≥ 1` after which every later window changes by less
/// than [`STABILITY_THRESHOLD`]; `xi_avg[0]` is window 0. At least one later
/// window must exist, so the last window never qualifies on its own.
pub fn stability_index(xi_avg: &[f64]) -> Option<usize> {
    let cg = relative_changes(xi_avg);
    let limit = STABILITY_THRESHOLD * (1.0 - THRESHOLD_SLACK);
    let mut candidate = None;
    // Walk backwards while the tail stays below the threshold.
    for a in (1..cg.len().saturating_sub(1)).rev() {
        if cg[a + 1] < limit {
            candidate = Some(a);
        } else {
            break;
        }
    }
    candidate
}

/// The two curves of the loss figure: fine-grained normalized means and the
/// coarse windows used for the stability rule.
#[derive(Debug, Clone, PartialEq)]
pub struct LossCurve {
    pub fine_window: usize,
    pub coarse_window: usize,
    /// `ξ_avg` per fine window, index 0 is the normalized initial loss.
    pub fine: Vec<f64>,
    /// `ξ_avg` per coarse window.
    pub coarse: Vec<f64>,
    /// `ξ_cg` per coarse window.
    pub change: Vec<f64>,
    pub stable_at: Option<usize>,
}

/// Builds both curves from a trace (the paper-scale windows are 10³ and 5·10³).
pub fn loss_curve(trace: &LossTrace, fine_window: usize, coarse_window: usize) -> LossCurve {
    let coarse = trace.xi_avg(coarse_window);
    LossCurve {
        fine_window,
        coarse_window,
        fine: trace.xi_avg(fine_window),
        change: relative_changes(&coarse),
        stable_at: stability_index(&coarse),
        coarse,
    }
}

impl LossCurve {
    /// CSV rows `kind,window_index,batch_end,xi_avg,xi_cg`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,window_index,batch_end,xi_avg,xi_cg\n");
        for (a, xi) in self.fine.iter().enumerate() {
            out.push_str(&format!("fine,{a},{},{xi},\n", a * self.fine_window));
        }
        for (a, (xi, cg)) in self.coarse.iter().zip(&self.change).enumerate() {
            out.push_str(&format!("coarse,{a},{},{xi},{cg}\n", a * self.coarse_window));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn synthetic_trace_stabilizes_at_two() {
        assert_eq!(stability_index(&[1.0, 0.5, 0.45, 0.44, 0.438]), Some(2));
    }

    #[test]
    fn constant_trace_stable_at_one() {
        assert_eq!(stability_index(&[1.0, 1.0, 1.0, 1.0]), Some(1));
        let trace = LossTrace::from_losses(vec![2.0; 30]);
        assert_eq!(trace.xi_avg(10), vec![1.0; 4]);
        assert_eq!(trace.xi_cg(10), vec![0.0; 4]);
        assert_eq!(trace.stability_reached(10), Some(1));
    }

    #[test]
    fn halving_trace_never_stable() {
        let xi: Vec<f64> = (0..8).map(|a| 0.5f64.powi(a)).collect();
        assert_eq!(stability_index(&xi), None);
        let mut tail = xi.clone();
        tail.extend([tail[7] * 0.95, tail[7] * 0.95 * 0.95]);
        assert_eq!(stability_index(&tail), Some(7));
    }

    #[test]
    fn too_short_traces() {
        assert_eq!(stability_index(&[]), None);
        assert_eq!(stability_index(&[1.0]), None);
        assert_eq!(stability_index(&[1.0, 0.99]), None);
    }

    #[test]
    fn geometric_window_means() {
        // Window a has mean 0.9^a relative to the first batch.
        let mut losses = Vec::new();
        for a in 1..=6 {
            losses.extend(std::iter::repeat_n(0.9f64.powi(a), 50));
        }
        losses[0] = 1.0;
        let mut trace = LossTrace::from_losses(losses);
        trace.losses[1] += 0.9 - 1.0;
        let cg = trace.xi_cg(50);
        for a in 2..cg.len() {
            assert_abs_diff_eq!(cg[a], 0.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_decay_curve() {
        let losses: Vec<f64> = (0..400).map(|b| 1.0 - b as f64 / 1000.0).collect();
        let curve = loss_curve(&LossTrace::from_losses(losses), 50, 100);
        assert_eq!(curve.fine.len(), 9);
        assert!(curve.fine.windows(2).skip(1).all(|w| w[1] < w[0]));
        for a in 2..curve.coarse.len() {
            let expected = (curve.coarse[a] - curve.coarse[a - 1]).abs() / curve.coarse[a - 1];
            assert_abs_diff_eq!(curve.change[a], expected, epsilon = 1e-15);
        }
        assert!(curve.to_csv().starts_with("kind,window_index"));
    }
}
