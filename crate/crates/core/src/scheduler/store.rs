use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use super::ledger::{Ledger, SampleLedgerEntry};
use super::SampleKey;
use crate::error::{Error, Result};

/// Environment variable naming the store root.
pub const STORE_ENV: &str = "OFMLMC_STORE";

const LEDGER_MAGIC: &str = "# ofmlmc-ledger v1";
const CONFIG_FILE: &str = "campaign.cfg";
const LEDGER_FILE: &str = "ledger.jsonl";
const STATE_FILE: &str = "state.jsonl";

/// Store root from an explicit flag, else `OFMLMC_STORE`, else `./ofmlmc-store`.
pub fn resolve_store_root(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(STORE_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("ofmlmc-store"),
    }
}

/// One line of the campaign state log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateEvent {
    pub event: String,
    pub iteration: usize,
    #[serde(default)]
    pub payload: serde_json::Value,
}

/// On-disk campaign directory.
///
/// ```text
/// <root>/<id>/campaign.cfg          configuration as given
/// <root>/<id>/ledger.jsonl          append-only sample ledger, magic header first
/// <root>/<id>/state.jsonl           plans, iteration states, final summary
/// <root>/<id>/samples/L<l>/<i>/     sandbox: input.json, output.json, log.txt
/// <root>/<id>/report/               post-processing products
/// ```
#[derive(Clone, Debug)]
pub struct CampaignStore {
    id: String,
    dir: PathBuf,
}

impl CampaignStore {
    /// Create a new campaign directory. Fails if the campaign already exists.
    pub fn create(root: &Path, id: &str, config_text: &str) -> Result<Self> {
        validate_id(id)?;
        let dir = root.join(id);
        if dir.join(LEDGER_FILE).exists() {
            return Err(Error::InvalidArgument(format!(
                "campaign `{id}` already exists in {}; resume it instead",
                root.display()
            )));
        }
        fs::create_dir_all(dir.join("samples")).map_err(|e| Error::storage(&dir, e))?;
        let store = Self {
            id: id.to_string(),
            dir,
        };
        write_file(&store.dir.join(CONFIG_FILE), config_text.as_bytes())?;
        write_file(&store.dir.join(LEDGER_FILE), format!("{LEDGER_MAGIC}\n").as_bytes())?;
        write_file(&store.dir.join(STATE_FILE), b"")?;
        Ok(store)
    }

    /// Open an existing campaign.
    pub fn open(root: &Path, id: &str) -> Result<Self> {
        validate_id(id)?;
        let dir = root.join(id);
        if !dir.join(CONFIG_FILE).is_file() || !dir.join(LEDGER_FILE).is_file() {
            return Err(Error::UnknownCampaign(id.to_string()));
        }
        Ok(Self {
            id: id.to_string(),
            dir,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config_text(&self) -> Result<String> {
        let p = self.dir.join(CONFIG_FILE);
        fs::read_to_string(&p).map_err(|e| Error::storage(p, e))
    }

    pub fn append_entry(&self, entry: &SampleLedgerEntry) -> Result<()> {
        let line =
            serde_json::to_string(entry).map_err(|e| Error::Numerical(format!("cannot encode ledger entry: {e}")))?;
        append_line(&self.dir.join(LEDGER_FILE), &line)
    }

    /// Read the ledger back.
    ///
    /// A final record without its line terminator was cut off by an
    /// interruption before it was committed; it is dropped and truncated from
    /// the file so the sample runs again. Other records that cannot be decoded
    /// are downgraded to failed entries when their key is recoverable and
    /// dropped otherwise.
    pub fn load_ledger(&self) -> Result<(Ledger, Vec<String>)> {
        let path = self.dir.join(LEDGER_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::storage(&path, e))?;
        let mut lines = text.split_inclusive('\n');
        match lines.next() {
            Some(h) if h.trim_end() == LEDGER_MAGIC => {}
            _ => {
                return Err(Error::Corrupt {
                    path,
                    reason: format!("missing header `{LEDGER_MAGIC}`"),
                })
            }
        }
        let mut ledger = Ledger::new();
        let mut warnings = Vec::new();
        for (n, raw) in lines.enumerate() {
            if !raw.ends_with('\n') {
                let msg = format!("ledger line {} was not completed and is discarded", n + 2);
                warn!("{msg}");
                warnings.push(msg);
                let f = OpenOptions::new()
                    .write(true)
                    .open(&path)
                    .map_err(|e| Error::storage(&path, e))?;
                f.set_len((text.len() - raw.len()) as u64)
                    .map_err(|e| Error::storage(&path, e))?;
                break;
            }
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            match serde_json::from_str::<SampleLedgerEntry>(line) {
                Ok(entry) => ledger.insert(entry),
                Err(e) => match (extract_u64(line, "level"), extract_u64(line, "index")) {
                    (Some(level), Some(index)) => {
                        let key = SampleKey::new(level as usize, index);
                        let msg = format!(
                            "ledger line {} for sample {level}/{index} is corrupt ({e}); marked failed",
                            n + 2
                        );
                        warn!("{msg}");
                        warnings.push(msg);
                        let work = extract_f64(line, "work").unwrap_or(0.0);
                        ledger.insert(SampleLedgerEntry::failed(key, work, "corrupt ledger record"));
                    }
                    _ => {
                        let msg = format!("ledger line {} is unreadable and was skipped", n + 2);
                        warn!("{msg}");
                        warnings.push(msg);
                    }
                },
            }
        }
        Ok((ledger, warnings))
    }

    pub fn sandbox_dir(&self, key: &SampleKey) -> PathBuf {
        self.dir
            .join("samples")
            .join(format!("L{}", key.level))
            .join(format!("{:06}", key.index))
    }

    /// Create the sandbox of `key` and write a file into it.
    pub fn write_sandbox_file(&self, key: &SampleKey, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let dir = self.sandbox_dir(key);
        fs::create_dir_all(&dir).map_err(|e| Error::storage(&dir, e))?;
        write_file(&dir.join(name), contents)?;
        Ok(dir)
    }

    pub fn reset_state(&self) -> Result<()> {
        write_file(&self.dir.join(STATE_FILE), b"")
    }

    pub fn append_state(&self, event: &StateEvent) -> Result<()> {
        let line = serde_json::to_string(event).map_err(|e| Error::Numerical(format!("cannot encode state: {e}")))?;
        append_line(&self.dir.join(STATE_FILE), &line)
    }

    pub fn read_state(&self) -> Result<Vec<StateEvent>> {
        let path = self.dir.join(STATE_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::storage(path, e)),
        };
        let mut events = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match serde_json::from_str(line) {
                Ok(ev) => events.push(ev),
                Err(e) => warn!("skipping unreadable state record: {e}"),
            }
        }
        Ok(events)
    }

    /// The `report` directory, created on demand.
    pub fn report_dir(&self) -> Result<PathBuf> {
        let dir = self.dir.join("report");
        fs::create_dir_all(&dir).map_err(|e| Error::storage(&dir, e))?;
        Ok(dir)
    }
}

fn validate_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::config(
            "campaign.id",
            format!("`{id}` is not a valid campaign id"),
        ))
    }
}

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::storage(path, e))
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = OpenOptions::new()
        .append(true)
        .create(true)
        .open(path)
        .map_err(|e| Error::storage(path, e))?;
    let mut record = String::with_capacity(line.len() + 1);
    record.push_str(line);
    record.push('\n');
    f.write_all(record.as_bytes()).map_err(|e| Error::storage(path, e))
}

fn field_start<'a>(line: &'a str, field: &str) -> Option<&'a str> {
    let pat = format!("\"{field}\":");
    let at = line.find(&pat)? + pat.len();
    Some(line[at..].trim_start())
}

fn extract_u64(line: &str, field: &str) -> Option<u64> {
    let rest = field_start(line, field)?;
    let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
    if end == 0 || end == rest.len() {
        // a number running into the end of a truncated line may be cut short
        return None;
    }
    rest[..end].parse().ok()
}

fn extract_f64(line: &str, field: &str) -> Option<f64> {
    let rest = field_start(line, field)?;
    let end = rest
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(rest.len());
    if end == rest.len() {
        return None;
    }
    rest[..end].parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSample;

    #[test]
    fn ledger_round_trip_is_exact() {
        let tmp = tempfile::tempdir().unwrap();
        let store = CampaignStore::create(tmp.path(), "c1", "[campaign]\n").unwrap();
        let mut original = Ledger::new();
        for i in 0..5u64 {
            let v = (i as f64 + 0.1).sqrt() * std::f64::consts::PI;
            let e = SampleLedgerEntry::done(
                SampleKey::new(1, i),
                ModelSample::new(3.0).with_qoi("q", v),
                Some(ModelSample::new(1.0).with_qoi("q", -v / 3.0)),
            );
            store.append_entry(&e).unwrap();
            original.insert(e);
        }
        let (restored, warnings) = CampaignStore::open(tmp.path(), "c1").unwrap().load_ledger().unwrap();
        assert!(warnings.is_empty());
        assert_eq!(restored, original);
    }

    #[test]
    fn torn_tail_is_discarded_and_truncated() {
        let tmp = tempfile::tempdir().unwrap();
        let store = CampaignStore::create(tmp.path(), "c2", "").unwrap();
        let e = SampleLedgerEntry::done(SampleKey::new(0, 3), ModelSample::new(1.0).with_qoi("q", 1.5), None);
        store.append_entry(&e).unwrap();
        let line = serde_json::to_string(&SampleLedgerEntry::done(
            SampleKey::new(0, 4),
            ModelSample::new(1.0).with_qoi("q", 2.5),
            None,
        ))
        .unwrap();
        let path = store.dir().join(LEDGER_FILE);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        write!(f, "{}", &line[..line.len() / 2]).unwrap();
        let (ledger, warnings) = store.load_ledger().unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(ledger.len(), 1);
        store.append_entry(&e).unwrap();
        let (again, warnings) = store.load_ledger().unwrap();
        assert!(warnings.is_empty());
        assert_eq!(again.len(), 1);
    }

    #[test]
    fn corrupt_committed_record_becomes_failed() {
        let tmp = tempfile::tempdir().unwrap();
        let store = CampaignStore::create(tmp.path(), "c4", "").unwrap();
        let path = store.dir().join(LEDGER_FILE);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        writeln!(f, "{{\"level\":0,\"index\":7,\"status\":\"do").unwrap();
        let e = SampleLedgerEntry::done(SampleKey::new(0, 3), ModelSample::new(1.0).with_qoi("q", 1.5), None);
        store.append_entry(&e).unwrap();
        let (ledger, warnings) = store.load_ledger().unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(ledger.done_count(0), 1);
        assert_eq!(ledger.failed_count(0), 1);
        assert!(!ledger.get(&SampleKey::new(0, 7)).unwrap().is_done());
    }

    #[test]
    fn missing_campaign_and_bad_header() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            CampaignStore::open(tmp.path(), "nope"),
            Err(Error::UnknownCampaign(_))
        ));
        let store = CampaignStore::create(tmp.path(), "c3", "").unwrap();
        write_file(&store.dir().join(LEDGER_FILE), b"garbage\n").unwrap();
        assert!(matches!(store.load_ledger(), Err(Error::Corrupt { .. })));
        assert!(CampaignStore::create(tmp.path(), "c3", "").is_err());
        assert!(CampaignStore::create(tmp.path(), "../x", "").is_err());
    }

    #[test]
    fn store_root_precedence() {
        assert_eq!(resolve_store_root(Some(Path::new("/a"))), PathBuf::from("/a"));
    }
}
