use std::collections::HashMap;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

type Pairs = Vec<(Vec<u8>, Vec<u8>)>;

/// Shared mailbox standing in for an ideal OT functionality. The sender's
/// transcript is empty; only the receiver's choice selects messages.
#[derive(Debug, Default)]
pub struct Dealer {
    slots: Mutex<HashMap<(u64, String), Pairs>>,
    ready: Condvar,
}

impl Dealer {
    pub fn deposit(&self, exec_id: u64, label: &str, pairs: Pairs) {
        self.slots.lock().unwrap().insert((exec_id, label.to_string()), pairs);
        self.ready.notify_all();
    }

    pub fn take(&self, exec_id: u64, label: &str, wait: Duration) -> Option<Pairs> {
        let key = (exec_id, label.to_string());
        let deadline = Instant::now() + wait;
        let mut slots = self.slots.lock().unwrap();
        loop {
            if let Some(p) = slots.remove(&key) {
                return Some(p);
            }
            let now = Instant::now();
            if now >= deadline {
                return None;
            }
            slots = self.ready.wait_timeout(slots, deadline - now).unwrap().0;
        }
    }
}
