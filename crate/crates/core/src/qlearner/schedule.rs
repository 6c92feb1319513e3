use serde::{Deserialize, Serialize};

/// Linear decay from `start` to `end` over `decay_frames`, then constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_frames: u64,
}

impl EpsilonSchedule {
    /// Default training schedule: 1.0 to 0.05 over the first tenth of training.
    pub fn for_total_frames(total: u64) -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_frames: (total / 10).max(1),
        }
    }

    pub fn epsilon_at(&self, frame: u64) -> f64 {
        if frame >= self.decay_frames {
            return self.end;
        }
        let t = frame as f64 / self.decay_frames as f64;
        (self.start + (self.end - self.start) * t).clamp(0.0, 1.0)
    }
}
