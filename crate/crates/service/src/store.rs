//! Append-only NDJSON event log with an occasional state snapshot.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::state::{Event, ServiceState};
use crate::ServiceError;

const EVENTS: &str = "events.ndjson";
const SNAPSHOT: &str = "snapshot.json";

pub struct Store {
    dir: PathBuf,
    log: File,
}

impl Store {
    /// Open (creating if needed) the store in `dir` and read back its events.
    /// A torn final line left by a crash mid-append is dropped.
    pub fn open(dir: &Path) -> Result<(Self, Vec<Event>), ServiceError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(EVENTS);
        let mut events = Vec::new();
        let mut good_len = 0u64;
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (n, line) in reader.split(b'\n').enumerate() {
                let line = line?;
                match serde_json::from_slice::<Event>(&line) {
                    Ok(e) => {
                        events.push(e);
                        good_len += line.len() as u64 + 1;
                    }
                    Err(e) => {
                        log::warn!(
                            "dropping unreadable event at line {} and everything after it: {e}",
                            n + 1
                        );
                        break;
                    }
                }
            }
            let actual = fs::metadata(&path)?.len();
            if actual > good_len {
                OpenOptions::new()
                    .write(true)
                    .open(&path)?
                    .set_len(good_len)?;
            }
        }
        let mut log = OpenOptions::new().create(true).append(true).open(&path)?;
        if path.exists() && fs::metadata(&path)?.len() + 1 == good_len {
            // last event complete but its newline never made it
            log.write_all(b"\n")?;
        }
        Ok((
            Self {
                dir: dir.to_path_buf(),
                log,
            },
            events,
        ))
    }

    pub fn append(&mut self, event: &Event) -> Result<(), ServiceError> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        self.log.write_all(&line)?;
        self.log.sync_data()?;
        Ok(())
    }

    pub fn write_snapshot(&self, state: &ServiceState) -> Result<(), ServiceError> {
        let tmp = self.dir.join(format!("{SNAPSHOT}.tmp"));
        fs::write(&tmp, serde_json::to_vec(state)?)?;
        fs::rename(&tmp, self.dir.join(SNAPSHOT))?;
        log::debug!("snapshot at event {}", state.events);
        Ok(())
    }

    pub fn read_snapshot(&self) -> Result<Option<ServiceState>, ServiceError> {
        let path = self.dir.join(SNAPSHOT);
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_slice(&fs::read(path)?)?))
    }
}
