//! Append-only JSON-lines job log and replay after a restart.
//!
//! Every state change appends the job's full record; a `DONE` job later gets
//! its result envelope appended too. On replay the last record of each job
//! wins, and jobs that were still in flight come back as `FAILED`.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use ministack_core::orchestrator::{Orchestrator, ResultEnvelope};
use ministack_core::qdmi::{JobId, JobRecord, JobState, StateStamp};
use serde::{Deserialize, Serialize};

pub const RESTART_ERROR: &str = "service restarted before the job finished";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LogEntry {
    Record(JobRecord),
    Envelope(ResultEnvelope),
}

#[derive(Debug, Default)]
pub struct Replay {
    /// Latest record per job, in order of first appearance.
    pub records: Vec<JobRecord>,
    pub envelopes: HashMap<JobId, ResultEnvelope>,
    pub skipped_lines: usize,
}

#[derive(Debug, Clone)]
pub struct JobLog {
    file: Arc<Mutex<File>>,
}

impl JobLog {
    /// Opens (creating if needed) the log and reads back what it holds.
    pub fn open(path: &Path) -> std::io::Result<(JobLog, Replay)> {
        let replay = if path.exists() { read(path)? } else { Replay::default() };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok((JobLog { file: Arc::new(Mutex::new(file)) }, replay))
    }

    pub fn append(&self, entry: &LogEntry) {
        let mut line = serde_json::to_string(entry).expect("log entries serialize");
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        if let Err(e) = f.write_all(line.as_bytes()).and_then(|_| f.flush()) {
            log::error!("job log write failed: {e}");
        }
    }

    /// Restores replayed jobs into `orch` and starts logging its transitions.
    pub fn attach(&self, orch: &Orchestrator, replay: Replay) {
        let now = orch.qdmi().now();
        let mut envelopes = replay.envelopes;
        for mut rec in replay.records {
            if !rec.state.is_terminal() {
                rec.state = JobState::Failed;
                rec.transitions.push(StateStamp { state: JobState::Failed, at: now });
                rec.error = Some(RESTART_ERROR.into());
                self.append(&LogEntry::Record(rec.clone()));
            }
            let id = rec.job_id.clone();
            let done = rec.state == JobState::Done;
            if let Err(e) = orch.qdmi().restore_job(rec) {
                log::warn!("skipping replayed job {id}: {e}");
                continue;
            }
            if let Some(env) = envelopes.remove(&id).filter(|_| done) {
                orch.restore_envelope(env);
            }
        }

        let log = self.clone();
        let orch = orch.clone();
        orch.clone().qdmi().on_transition(move |_, rec| {
            log.append(&LogEntry::Record(rec.clone()));
            if rec.state == JobState::Done {
                // the job is locked while observers run, so build the envelope elsewhere
                let (log, orch, id) = (log.clone(), orch.clone(), rec.job_id.clone());
                std::thread::spawn(move || match orch.result(&id) {
                    Ok(env) => log.append(&LogEntry::Envelope(env)),
                    Err(e) => log::warn!("no envelope for {id}: {e}"),
                });
            }
        });
    }
}

fn read(path: &Path) -> std::io::Result<Replay> {
    let mut replay = Replay::default();
    let mut index: HashMap<JobId, usize> = HashMap::new();
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogEntry>(&line) {
            Ok(LogEntry::Record(rec)) => match index.get(&rec.job_id) {
                Some(&i) => replay.records[i] = rec,
                None => {
                    index.insert(rec.job_id.clone(), replay.records.len());
                    replay.records.push(rec);
                }
            },
            Ok(LogEntry::Envelope(env)) => {
                replay.envelopes.insert(env.job_id.clone(), env);
            }
            Err(e) => {
                log::warn!("{}:{}: unreadable log line: {e}", path.display(), n + 1);
                replay.skipped_lines += 1;
            }
        }
    }
    Ok(replay)
}
