//! Content-addressed store for ladder records.
//!
//! An entry is `LadderRecord::to_bytes()` followed by the 32-byte SHA-256 of
//! those bytes. Entries whose checksum or layout is broken are moved to
//! `quarantine/`; entries written by another format version are dropped and
//! recomputed.

use cuspwave::norms::{LadderRecord, LADDER_MAGIC, LADDER_VERSION};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const CACHE_ENV: &str = "CUSPWAVE_CACHE_DIR";
const SUM_LEN: usize = 32;

#[derive(Debug, PartialEq)]
pub enum Lookup {
    Hit(LadderRecord),
    Miss,
    /// readable entry from a different format version
    Stale(u8),
    /// damaged entry, moved to the given path
    Quarantined(PathBuf),
}

#[derive(Clone, Debug)]
pub struct Cache {
    dir: PathBuf,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of `kind` and a canonical key/value map.
pub fn cache_key(kind: &str, canon: &BTreeMap<&'static str, String>) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    h.update(b"\n");
    for (k, v) in canon {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    hex(&h.finalize())
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: dir.into() }
    }

    /// `$CUSPWAVE_CACHE_DIR`, else `<out>/.cache`.
    pub fn default_dir(out: &Path) -> PathBuf {
        std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| out.join(".cache"))
    }

    fn entry(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.cwlr"))
    }

    pub fn load(&self, key: &str) -> io::Result<Lookup> {
        let path = self.entry(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Lookup::Miss),
            Err(e) => return Err(e),
        };
        if bytes.len() < LADDER_MAGIC.len() + 1 + SUM_LEN {
            return self.quarantine(&path, key).map(Lookup::Quarantined);
        }
        let (body, sum) = bytes.split_at(bytes.len() - SUM_LEN);
        if Sha256::digest(body).as_slice() != sum || &body[..4] != LADDER_MAGIC {
            return self.quarantine(&path, key).map(Lookup::Quarantined);
        }
        if body[4] != LADDER_VERSION {
            fs::remove_file(&path)?;
            return Ok(Lookup::Stale(body[4]));
        }
        match LadderRecord::from_bytes(body) {
            Ok(rec) => Ok(Lookup::Hit(rec)),
            Err(_) => self.quarantine(&path, key).map(Lookup::Quarantined),
        }
    }

    fn quarantine(&self, path: &Path, key: &str) -> io::Result<PathBuf> {
        let qdir = self.dir.join("quarantine");
        fs::create_dir_all(&qdir)?;
        let mut k = 0;
        let dest = loop {
            let d = qdir.join(format!("{key}.{k}.cwlr"));
            if !d.exists() {
                break d;
            }
            k += 1;
        };
        fs::rename(path, &dest)?;
        Ok(dest)
    }

    /// Writes through a temporary file so readers never see half an entry.
    pub fn store(&self, key: &str, rec: &LadderRecord) -> io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let mut bytes = rec.to_bytes();
        let sum = Sha256::digest(&bytes);
        bytes.extend_from_slice(&sum);
        let tmp = self.dir.join(format!("{key}.tmp"));
        fs::write(&tmp, &bytes)?;
        fs::rename(&tmp, self.entry(key))
    }
}
