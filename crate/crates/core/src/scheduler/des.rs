//! Discrete-event harness for one device queue shared by background jobs and
//! a hybrid job that alternates classical phases with bursts of quantum work.
//!
//! The hybrid job can reserve the device for each burst at the start of the
//! preceding classical phase. All times are multiples of 2⁻¹⁰ s so sums stay
//! exact and reservation boundaries line up with job completions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::queue::DeviceQueue;
use crate::qdmi::{JobId, SessionId};

const TICK: f64 = 1.0 / 1024.0;

fn quantize(t: f64) -> f64 {
    (t / TICK).round().max(1.0) * TICK
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesConfig {
    pub seed: u64,
    /// Background arrivals are generated over `[0, horizon_s)`.
    pub horizon_s: f64,
    /// Mean background arrivals per second.
    pub background_rate: f64,
    /// Background run times are uniform in `[min, max]`.
    pub background_exec_s: (f64, f64),
    pub hybrid_iterations: usize,
    pub classical_phase_s: f64,
    pub burst_jobs: usize,
    pub burst_exec_s: f64,
    pub hybrid_priority: u8,
    pub use_reservations: bool,
}

impl Default for DesConfig {
    fn default() -> Self {
        DesConfig {
            seed: 1,
            horizon_s: 3600.0,
            background_rate: 0.05,
            background_exec_s: (2.0, 18.0),
            hybrid_iterations: 10,
            classical_phase_s: 120.0,
            burst_jobs: 5,
            burst_exec_s: 4.0,
            hybrid_priority: 5,
            use_reservations: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesReport {
    /// `[submit, submit + burst length)` of every hybrid burst.
    pub windows: Vec<(f64, f64)>,
    /// Device busy time inside the windows over their total length.
    pub busy_fraction_in_windows: f64,
    /// Share of the windows spent running the hybrid job's own bursts.
    pub hybrid_fraction_in_windows: f64,
    pub overall_busy_fraction: f64,
    /// Time the classical side spent waiting beyond the bursts' own run time.
    pub hpc_wait_s: f64,
    /// Time other sessions' jobs ran inside an active reservation.
    pub foreign_in_reservation_s: f64,
    pub jobs_completed: usize,
    pub makespan_s: f64,
}

struct Running {
    session: SessionId,
    start: f64,
    end: f64,
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

pub fn run(cfg: &DesConfig) -> DesReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let hybrid = SessionId::from("hybrid");
    let queue = DeviceQueue::new("des");

    let mut arrivals: Vec<(f64, f64, u8)> = Vec::new();
    let mut t = 0.0;
    loop {
        t += -(1.0 - rng.random::<f64>()).ln() / cfg.background_rate;
        if t >= cfg.horizon_s {
            break;
        }
        let exec = rng.random_range(cfg.background_exec_s.0..=cfg.background_exec_s.1);
        arrivals.push((quantize(t), quantize(exec), rng.random_range(0..=9)));
    }
    let burst_exec = quantize(cfg.burst_exec_s);
    let burst_len = burst_exec * cfg.burst_jobs as f64;
    let classical = quantize(cfg.classical_phase_s);

    let mut next_arrival = 0;
    let mut running: Option<Running> = None;
    let mut busy: Vec<(f64, f64, bool)> = Vec::new();
    let mut windows = Vec::new();
    let mut hpc_wait = 0.0;
    let mut iteration = 0;
    let mut burst_submit = if cfg.hybrid_iterations > 0 { Some(classical) } else { None };
    let mut burst_left = 0usize;
    let mut job_counter = 0u64;
    if cfg.use_reservations && cfg.hybrid_iterations > 0 {
        queue.reserve(classical, classical + burst_len, hybrid.clone()).expect("first reservation");
    }

    let mut now = 0.0;
    loop {
        if let Some(r) = running.as_ref().filter(|r| r.end <= now) {
            busy.push((r.start, r.end, r.session == hybrid));
            if r.session == hybrid {
                burst_left -= 1;
                if burst_left == 0 {
                    let (start, _) = *windows.last().expect("burst has a window");
                    hpc_wait += now - start - burst_len;
                    iteration += 1;
                    if iteration < cfg.hybrid_iterations {
                        let submit = now + classical;
                        burst_submit = Some(submit);
                        if cfg.use_reservations {
                            queue.reserve(submit, submit + burst_len, hybrid.clone()).expect("reservations are disjoint");
                        }
                    }
                }
            }
            running = None;
        }
        while next_arrival < arrivals.len() && arrivals[next_arrival].0 <= now {
            let (_, exec, prio) = arrivals[next_arrival];
            queue.enqueue(JobId(format!("bg-{next_arrival}")), prio, SessionId(format!("bg-{next_arrival}")), exec);
            next_arrival += 1;
        }
        if let Some(s) = burst_submit.filter(|s| *s <= now) {
            for _ in 0..cfg.burst_jobs {
                job_counter += 1;
                queue.enqueue(JobId(format!("hy-{job_counter}")), cfg.hybrid_priority, hybrid.clone(), burst_exec);
            }
            windows.push((s, s + burst_len));
            burst_left = cfg.burst_jobs;
            burst_submit = None;
        }
        if running.is_none() {
            if let Ok(e) = queue.next(now) {
                running = Some(Running { session: e.session, start: now, end: now + e.est_exec_s });
            }
        }

        let mut next = f64::INFINITY;
        if let Some(r) = &running {
            next = next.min(r.end);
        }
        if let Some(a) = arrivals.get(next_arrival) {
            next = next.min(a.0);
        }
        if let Some(s) = burst_submit {
            next = next.min(s);
        }
        if running.is_none() && !queue.is_empty() {
            for r in queue.reservations() {
                for b in [r.start, r.end] {
                    if b > now {
                        next = next.min(b);
                    }
                }
            }
        }
        if !next.is_finite() {
            break;
        }
        now = next;
    }

    let makespan = busy.iter().map(|b| b.1).fold(0.0, f64::max);
    let window_total: f64 = windows.iter().map(|w| w.1 - w.0).sum();
    let busy_in_windows: f64 = busy.iter().map(|b| windows.iter().map(|w| overlap((b.0, b.1), *w)).sum::<f64>()).sum();
    let hybrid_in_windows: f64 =
        busy.iter().filter(|b| b.2).map(|b| windows.iter().map(|w| overlap((b.0, b.1), *w)).sum::<f64>()).sum();
    let reservations = queue.reservations();
    let foreign: f64 = busy
        .iter()
        .filter(|b| !b.2)
        .map(|b| reservations.iter().map(|r| overlap((b.0, b.1), (r.start, r.end))).sum::<f64>())
        .sum();
    DesReport {
        busy_fraction_in_windows: if window_total > 0.0 { busy_in_windows / window_total } else { 0.0 },
        hybrid_fraction_in_windows: if window_total > 0.0 { hybrid_in_windows / window_total } else { 0.0 },
        overall_busy_fraction: if makespan > 0.0 { busy.iter().map(|b| b.1 - b.0).sum::<f64>() / makespan } else { 0.0 },
        windows,
        hpc_wait_s: hpc_wait,
        foreign_in_reservation_s: foreign,
        jobs_completed: busy.len(),
        makespan_s: makespan,
    }
}
