//! Append-only JSON-lines logs with fsync on every append.
//!
//! A crash can leave a partial last line. Reading drops it and truncates the
//! file back to the last complete record; a bad line anywhere else is
//! corruption.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

impl LogError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        LogError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub struct Log {
    path: PathBuf,
    file: File,
}

impl Log {
    /// Opens (creating if needed) and replays the log.
    pub fn open<T: DeserializeOwned>(path: &Path) -> Result<(Log, Vec<T>), LogError> {
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(path)
            .map_err(|e| LogError::io(path, e))?;
        let (records, good_len, total) = read_records(path, &file)?;
        if good_len < total {
            tracing::warn!(path = %path.display(), dropped = total - good_len, "discarding torn tail of log");
            file.set_len(good_len).map_err(|e| LogError::io(path, e))?;
            file.sync_all().map_err(|e| LogError::io(path, e))?;
        }
        file.seek(SeekFrom::End(0)).map_err(|e| LogError::io(path, e))?;
        Ok((
            Log {
                path: path.to_path_buf(),
                file,
            },
            records,
        ))
    }

    pub fn append<T: Serialize>(&mut self, record: &T) -> Result<(), LogError> {
        self.append_all(std::slice::from_ref(record))
    }

    /// Writes all records with a single fsync.
    pub fn append_all<T: Serialize>(&mut self, records: &[T]) -> Result<(), LogError> {
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r).expect("log records serialize");
            buf.push(b'\n');
        }
        self.file.write_all(&buf).map_err(|e| LogError::io(&self.path, e))?;
        self.file.sync_data().map_err(|e| LogError::io(&self.path, e))
    }

    /// Atomically replaces the log with `records`.
    pub fn rewrite<T: Serialize>(&mut self, records: &[T]) -> Result<(), LogError> {
        let tmp = self.path.with_extension("jsonl.tmp");
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r).expect("log records serialize");
            buf.push(b'\n');
        }
        write_durably(&tmp, &buf)?;
        fs::rename(&tmp, &self.path).map_err(|e| LogError::io(&self.path, e))?;
        sync_parent(&self.path)?;
        self.file = OpenOptions::new()
            .append(true)
            .read(true)
            .open(&self.path)
            .map_err(|e| LogError::io(&self.path, e))?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

fn read_records<T: DeserializeOwned>(path: &Path, file: &File) -> Result<(Vec<T>, u64, u64), LogError> {
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut offset = 0u64;
    let mut good = 0u64;
    let mut line = String::new();
    let mut lineno = 0;
    let mut pending_error: Option<(usize, String)> = None;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| LogError::io(path, e))?;
        if n == 0 {
            break;
        }
        lineno += 1;
        offset += n as u64;
        if let Some((at, message)) = pending_error.take() {
            // a bad line followed by more data is not a torn tail
            return Err(LogError::Corrupt {
                path: path.to_path_buf(),
                line: at,
                message,
            });
        }
        let complete = line.ends_with('\n');
        let text = line.trim();
        if text.is_empty() {
            good = offset;
            continue;
        }
        match serde_json::from_str::<T>(text) {
            Ok(r) if complete => {
                records.push(r);
                good = offset;
            }
            Ok(_) => pending_error = Some((lineno, "unterminated last line".into())),
            Err(e) => pending_error = Some((lineno, e.to_string())),
        }
    }
    Ok((records, good, offset))
}

/// Writes `bytes` to `path` and fsyncs the file.
pub fn write_durably(path: &Path, bytes: &[u8]) -> Result<(), LogError> {
    let mut f = File::create(path).map_err(|e| LogError::io(path, e))?;
    f.write_all(bytes).map_err(|e| LogError::io(path, e))?;
    f.sync_all().map_err(|e| LogError::io(path, e))
}

/// Writes through a temporary file and renames over `path`.
pub fn replace_durably(path: &Path, bytes: &[u8]) -> Result<(), LogError> {
    let tmp = path.with_extension("tmp");
    write_durably(&tmp, bytes)?;
    fs::rename(&tmp, path).map_err(|e| LogError::io(path, e))?;
    sync_parent(path)
}

fn sync_parent(path: &Path) -> Result<(), LogError> {
    if let Some(dir) = path.parent() {
        // directories cannot be opened for sync on every platform
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}
