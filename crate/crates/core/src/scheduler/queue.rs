//! Lower scheduling level: one priority queue per device.
//!
//! Dequeue order is highest priority first, FIFO by sequence number within a
//! priority. Priorities are fixed by the submitter; there is no aging, so a
//! steady stream of high-priority work can starve lower priorities.
//!
//! Reservations carve out windows during which only the owning session's
//! jobs are served. Outside a window, a job from another session is only
//! started if its estimated run time ends before the next window opens.

use std::cmp::Reverse;
use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qdmi::{JobId, SessionId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueueError {
    #[error("queue is empty")]
    EmptyQueue,
    #[error("reservation window overlaps an existing reservation")]
    Overlap,
    #[error("invalid reservation window: {0}")]
    InvalidWindow(String),
    #[error("unknown reservation {0}")]
    UnknownReservation(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub job_id: JobId,
    pub priority: u8,
    pub seq: u64,
    pub session: SessionId,
    pub est_exec_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservation {
    pub id: u64,
    pub device_id: String,
    pub start: f64,
    pub end: f64,
    pub owner: SessionId,
}

impl Reservation {
    pub fn is_active(&self, now: f64) -> bool {
        self.start <= now && now < self.end
    }
}

type Key = (Reverse<u8>, u64);

#[derive(Debug, Default)]
struct State {
    entries: BTreeMap<Key, QueueEntry>,
    next_seq: u64,
    reservations: Vec<Reservation>,
    next_reservation: u64,
}

impl State {
    fn pick(&self, now: f64) -> Option<Key> {
        if let Some(active) = self.reservations.iter().find(|r| r.is_active(now)) {
            return self
                .entries
                .iter()
                .find(|(_, e)| e.session == active.owner)
                .map(|(k, _)| *k);
        }
        let upcoming = self
            .reservations
            .iter()
            .filter(|r| r.start > now)
            .min_by(|a, b| a.start.total_cmp(&b.start));
        self.entries
            .iter()
            .find(|(_, e)| match upcoming {
                None => true,
                Some(r) => e.session == r.owner || now + e.est_exec_s <= r.start,
            })
            .map(|(k, _)| *k)
    }
}

/// A popped entry plus the sequence watermark at pop time: every entry with
/// `seq < watermark` had been enqueued when the pop happened.
#[derive(Debug, Clone, PartialEq)]
pub struct Dequeued {
    pub entry: QueueEntry,
    pub watermark: u64,
}

/// Thread-safe priority queue for one device.
#[derive(Debug)]
pub struct DeviceQueue {
    device_id: String,
    state: Mutex<State>,
    changed: Condvar,
}

impl DeviceQueue {
    pub fn new(device_id: impl Into<String>) -> Self {
        DeviceQueue { device_id: device_id.into(), state: Mutex::new(State::default()), changed: Condvar::new() }
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn device_id(&self) -> &str {
        &self.device_id
    }

    /// Adds a job and returns its sequence number.
    pub fn enqueue(&self, job_id: JobId, priority: u8, session: SessionId, est_exec_s: f64) -> u64 {
        let mut st = self.lock();
        let seq = st.next_seq;
        st.next_seq += 1;
        let entry = QueueEntry { job_id, priority, seq, session, est_exec_s };
        st.entries.insert((Reverse(priority), seq), entry);
        drop(st);
        self.changed.notify_all();
        seq
    }

    /// Pops the next servable entry at time `now`.
    pub fn next(&self, now: f64) -> Result<QueueEntry, QueueError> {
        self.next_traced(now).map(|d| d.entry)
    }

    pub fn next_traced(&self, now: f64) -> Result<Dequeued, QueueError> {
        let mut st = self.lock();
        let key = st.pick(now).ok_or(QueueError::EmptyQueue)?;
        let entry = st.entries.remove(&key).expect("picked key present");
        Ok(Dequeued { entry, watermark: st.next_seq })
    }

    /// Blocks up to `timeout` for a servable entry.
    pub fn wait_next(&self, now: impl Fn() -> f64, timeout: Duration) -> Option<QueueEntry> {
        let mut st = self.lock();
        if let Some(key) = st.pick(now()) {
            return st.entries.remove(&key);
        }
        st = self.changed.wait_timeout(st, timeout).unwrap_or_else(|p| p.into_inner()).0;
        let key = st.pick(now())?;
        st.entries.remove(&key)
    }

    pub fn wake(&self) {
        self.changed.notify_all();
    }

    pub fn remove(&self, job_id: &JobId) -> bool {
        let mut st = self.lock();
        let key = st.entries.iter().find(|(_, e)| &e.job_id == job_id).map(|(k, _)| *k);
        key.and_then(|k| st.entries.remove(&k)).is_some()
    }

    pub fn len(&self) -> usize {
        self.lock().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entries in dequeue order (ignoring reservations).
    pub fn entries(&self) -> Vec<QueueEntry> {
        self.lock().entries.values().cloned().collect()
    }

    /// Σ of estimated run times of everything queued.
    pub fn pending_estimate(&self) -> f64 {
        self.lock().entries.values().map(|e| e.est_exec_s.max(0.0)).sum()
    }

    pub fn reserve(&self, start: f64, end: f64, owner: SessionId) -> Result<Reservation, QueueError> {
        if !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(QueueError::InvalidWindow(format!("[{start}, {end})")));
        }
        let mut st = self.lock();
        if st.reservations.iter().any(|r| start < r.end && r.start < end) {
            return Err(QueueError::Overlap);
        }
        let id = st.next_reservation;
        st.next_reservation += 1;
        let r = Reservation { id, device_id: self.device_id.clone(), start, end, owner };
        st.reservations.push(r.clone());
        drop(st);
        self.changed.notify_all();
        Ok(r)
    }

    pub fn release(&self, id: u64) -> Result<(), QueueError> {
        let mut st = self.lock();
        let before = st.reservations.len();
        st.reservations.retain(|r| r.id != id);
        if st.reservations.len() == before {
            return Err(QueueError::UnknownReservation(id));
        }
        drop(st);
        self.changed.notify_all();
        Ok(())
    }

    pub fn reservations(&self) -> Vec<Reservation> {
        self.lock().reservations.clone()
    }

    /// Reservation covering `now`, if any.
    pub fn active_reservation(&self, now: f64) -> Option<Reservation> {
        self.lock().reservations.iter().find(|r| r.is_active(now)).cloned()
    }
}
