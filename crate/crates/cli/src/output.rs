use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// CSV table in which every numeric column `x` is followed by `x_err`.
#[derive(Clone, Debug)]
pub struct Table {
    text: Vec<String>,
    nums: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// Shortest string that parses back to the same f64.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

impl Table {
    pub fn new(text: &[&str], nums: &[&str]) -> Self {
        Table { text: text.iter().map(|s| s.to_string()).collect(), nums: nums.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = self.text.clone();
        for n in &self.nums {
            h.push(n.clone());
            h.push(format!("{n}_err"));
        }
        h
    }

    pub fn push(&mut self, text: Vec<String>, nums: &[(f64, f64)]) {
        assert_eq!(text.len(), self.text.len(), "text column count");
        assert_eq!(nums.len(), self.nums.len(), "numeric column count");
        let mut r = text;
        for (v, e) in nums {
            r.push(num(*v));
            r.push(num(*e));
        }
        self.rows.push(r);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(self.header())?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
    }
}

/// Single writer for one suite's directory. Remembers what it wrote so a
/// failed run can list its partial artifacts.
#[derive(Debug)]
pub struct Output {
    dir: PathBuf,
    written: Vec<String>,
    summary: Vec<(String, String)>,
}

pub const PARTIAL_MARKER: &str = "PARTIAL";
pub const SUMMARY_FILE: &str = "summary.txt";

impl Output {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let stale = dir.join(PARTIAL_MARKER);
        if stale.exists() {
            fs::remove_file(stale)?;
        }
        Ok(Output { dir: dir.to_path_buf(), written: Vec::new(), summary: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_table(&mut self, name: &str, t: &Table) -> anyhow::Result<()> {
        let b = t.to_bytes()?;
        self.write_bytes(name, &b)?;
        Ok(())
    }

    pub fn note(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.summary.push((key.into(), value.into()));
    }

    fn summary_text(&self, status: &str) -> String {
        let mut rows = vec![("status".to_string(), status.to_string())];
        rows.extend(self.summary.iter().cloned());
        let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
    }

    pub fn finish(mut self) -> io::Result<()> {
        let s = self.summary_text("ok");
        self.write_bytes(SUMMARY_FILE, s.as_bytes())
    }

    /// Writes the summary and a marker naming the error and the files that
    /// did get written.
    pub fn finish_partial(mut self, err: &str) -> io::Result<()> {
        let s = self.summary_text("partial");
        self.write_bytes(SUMMARY_FILE, s.as_bytes())?;
        let mut m = format!("error: {err}\n");
        for f in &self.written {
            m.push_str(&format!("written: {f}\n"));
        }
        fs::write(self.dir.join(PARTIAL_MARKER), m)
    }
}
