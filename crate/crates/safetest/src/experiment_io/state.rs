//! Persistent monitor state.
//!
//! One JSON document per experiment id, carrying a mandatory
//! `schema_version` and the full resumable state of a monitor. The write
//! path goes through a temp file plus rename, so a crash mid-write leaves
//! either the old document or the new one, never a torn file. Round-trips
//! are bit-exact: serde_json emits the shortest decimal that parses back to
//! the identical f64, so a resumed monitor continues from exactly the
//! accumulated log e-value it was saved with. That is what makes optional
//! continuation across sessions safe: stopping tonight and resuming
//! tomorrow is the same e-process as never stopping.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eprocess::EProcess;
use crate::error::{Error, Result};
use crate::safe_prop::{SequentialTwoSampleProp, SrmMonitor};

/// Version of [`PersistedState`]'s on-disk layout.
pub const STATE_SCHEMA_VERSION: u32 = 1;

/// The test-specific resumable payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonitorState {
    Srm(SrmMonitor),
    Proportion(SequentialTwoSampleProp),
    /// A bare e-process, for tests accumulating externally computed
    /// segment e-values.
    Process(EProcess),
}

/// On-disk document: schema version, owner, payload, and (for day-stream
/// replays) the last ingested day so a resumed run can skip consumed rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistedState {
    pub schema_version: u32,
    pub experiment_id: String,
    pub state: MonitorState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cursor_day: Option<chrono::NaiveDate>,
}

impl PersistedState {
    pub fn new(experiment_id: impl Into<String>, state: MonitorState) -> Self {
        PersistedState {
            schema_version: STATE_SCHEMA_VERSION,
            experiment_id: experiment_id.into(),
            state,
            cursor_day: None,
        }
    }

    pub fn with_cursor(mut self, day: chrono::NaiveDate) -> Self {
        self.cursor_day = Some(day);
        self
    }
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

/// Directory of per-experiment state documents.
///
/// Concurrent writers for different experiment ids are fine (they touch
/// different files); writers for the same id must be serialized by the
/// caller.
#[derive(Debug, Clone)]
pub struct StateStore {
    dir: PathBuf,
}

impl StateStore {
    /// Opens a state directory, creating it if needed.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(StateStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Ids must be usable as file names: nonempty, no path separators, no
    /// leading dot.
    fn file_path(&self, experiment_id: &str) -> Result<PathBuf> {
        if experiment_id.is_empty()
            || experiment_id.starts_with('.')
            || experiment_id.contains(['/', '\\', '\0'])
        {
            return Err(Error::invalid(format!(
                "experiment_id `{experiment_id}` is not a valid state file name"
            )));
        }
        Ok(self.dir.join(format!("{experiment_id}.json")))
    }

    /// Writes the document atomically (temp file in the same directory,
    /// then rename).
    pub fn save(&self, state: &PersistedState) -> Result<()> {
        let path = self.file_path(&state.experiment_id)?;
        let tmp = path.with_extension("json.tmp");
        let mut bytes = serde_json::to_vec_pretty(state)?;
        bytes.push(b'\n');
        fs::write(&tmp, &bytes)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Loads and version-checks a document. A version mismatch or a file
    /// that does not parse yields an error and no partial state.
    pub fn load(&self, experiment_id: &str) -> Result<PersistedState> {
        let bytes = fs::read(self.file_path(experiment_id)?)?;
        let probe: VersionProbe = serde_json::from_slice(&bytes)?;
        if probe.schema_version != STATE_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: STATE_SCHEMA_VERSION,
                found: probe.schema_version,
            });
        }
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Experiment ids with a stored document, sorted.
    pub fn list(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let name = entry?.file_name();
            if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(".json")) {
                ids.push(id.to_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }
}
