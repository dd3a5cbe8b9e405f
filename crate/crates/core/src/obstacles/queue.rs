use std::collections::VecDeque;
use std::sync::Mutex;

use super::SensorEvent;

/// FIFO hand-off of sensor events from producer threads to the control loop.
///
/// Events keep their push order, so each source's ordering is preserved.
#[derive(Debug, Default)]
pub struct EventQueue {
    inner: Mutex<VecDeque<SensorEvent>>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, event: SensorEvent) {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).push_back(event);
    }

    /// Takes every queued event.
    pub fn drain(&self) -> Vec<SensorEvent> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).drain(..).collect()
    }
}
