//! Learning-rate schedule: linear warmup from zero to the peak, then linear
//! decay to the final rate, measured in optimizer steps.

/// Rate at `step` of `total_steps`, warming up over `warmup_steps`.
///
/// step = warmup_steps hits `peak_lr` exactly; step = total_steps hits
/// `final_lr` exactly. Each parameter group passes its own peak.
pub fn lr_at(
    step: usize,
    total_steps: usize,
    warmup_steps: usize,
    peak_lr: f64,
    final_lr: f64,
) -> f64 {
    debug_assert!(step <= total_steps, "step {step} past total {total_steps}");
    debug_assert!(warmup_steps <= total_steps);
    if step <= warmup_steps {
        if warmup_steps == 0 {
            return peak_lr;
        }
        return peak_lr * step as f64 / warmup_steps as f64;
    }
    let span = (total_steps - warmup_steps) as f64;
    if span == 0.0 {
        return final_lr;
    }
    // Endpoint form: exact at frac 0 and 1, unlike peak + (final-peak)*frac.
    let frac = (step - warmup_steps) as f64 / span;
    peak_lr * (1.0 - frac) + final_lr * frac
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn warmup_end_hits_peak_exactly() {
        assert_eq!(lr_at(50, 300, 50, 1e-4, 1e-6), 1e-4);
    }

    #[test]
    fn final_step_hits_final_lr_exactly() {
        assert_eq!(lr_at(300, 300, 50, 1e-4, 1e-6), 1e-6);
    }

    #[test]
    fn half_warmup_is_half_peak() {
        assert_abs_diff_eq!(lr_at(25, 300, 50, 1e-4, 1e-6), 5e-5, epsilon = 1e-20);
    }

    #[test]
    fn schedule_starts_at_zero_and_is_piecewise_linear() {
        assert_eq!(lr_at(0, 300, 50, 1e-4, 1e-6), 0.0);
        // Midpoint of the decay segment.
        let mid = lr_at(175, 300, 50, 1e-4, 1e-6);
        assert_abs_diff_eq!(mid, (1e-4 + 1e-6) / 2.0, epsilon = 1e-20);
    }

    #[test]
    fn degenerate_spans_are_safe() {
        assert_eq!(lr_at(0, 10, 0, 1e-4, 1e-6), 1e-4);
        assert_eq!(lr_at(10, 10, 10, 1e-4, 1e-6), 1e-4);
    }

    #[test]
    fn group_peaks_scale_independently() {
        for peak in [5e-6, 1e-4, 1e-6] {
            assert_eq!(lr_at(50, 300, 50, peak, 1e-6), peak);
            assert_eq!(lr_at(300, 300, 50, peak, 1e-6), 1e-6);
        }
    }
}
