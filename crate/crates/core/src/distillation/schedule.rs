use std::f64::consts::PI;

/// Linear warmup from 0 to `peak_lr`, then cosine decay to
/// `peak_lr * final_fraction` at the last step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarmupCosine {
    pub peak_lr: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
    pub final_fraction: f64,
}

impl WarmupCosine {
    pub fn lr(&self, step: u64) -> f64 {
        lr_schedule(step, self.peak_lr, self.warmup_steps, self.total_steps, self.final_fraction)
    }
}

pub fn lr_schedule(step: u64, peak_lr: f64, warmup_steps: u64, total_steps: u64, final_fraction: f64) -> f64 {
    if step < warmup_steps {
        return peak_lr * step as f64 / warmup_steps as f64;
    }
    let last = total_steps.saturating_sub(1);
    if last <= warmup_steps {
        return peak_lr;
    }
    let progress = ((step - warmup_steps) as f64 / (last - warmup_steps) as f64).min(1.0);
    let floor = peak_lr * final_fraction;
    floor + (peak_lr - floor) * 0.5 * (1.0 + (PI * progress).cos())
}
