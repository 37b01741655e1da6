use std::time::{Duration, Instant};

use crate::error::BackendError;

/// Cooperative wall-clock limit shared by the long-running loops.
#[derive(Clone, Copy, Debug, Default)]
pub struct Deadline(Option<Instant>);

impl Deadline {
    pub fn none() -> Self {
        Deadline(None)
    }

    pub fn after(timeout: Option<Duration>) -> Self {
        Deadline(timeout.map(|t| Instant::now() + t))
    }

    pub fn expired(&self) -> bool {
        self.0.is_some_and(|t| Instant::now() >= t)
    }

    pub fn check(&self) -> Result<(), BackendError> {
        if self.expired() {
            Err(BackendError::Timeout)
        } else {
            Ok(())
        }
    }
}
