//! Human-readable records on stderr and JSON lines in a file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use log::{Level, LevelFilter, Log, Metadata, Record};
use serde_json::json;

struct Logger {
    stderr_level: LevelFilter,
    file: Option<Mutex<BufWriter<File>>>,
    start: Instant,
}

impl Log for Logger {
    fn enabled(&self, metadata: &Metadata) -> bool {
        metadata.level() <= Level::Info || metadata.level() <= self.stderr_level
    }

    fn log(&self, record: &Record) {
        if !self.enabled(record.metadata()) {
            return;
        }
        let elapsed = self.start.elapsed().as_secs_f64();
        if record.level() <= self.stderr_level {
            eprintln!("[{elapsed:8.2}s {:5}] {}", record.level(), record.args());
        }
        if let Some(file) = &self.file {
            if record.level() <= Level::Info {
                let line = json!({
                    "elapsed_seconds": elapsed,
                    "level": record.level().as_str(),
                    "target": record.target(),
                    "message": record.args().to_string(),
                });
                if let Ok(mut f) = file.lock() {
                    let _ = writeln!(f, "{line}");
                }
            }
        }
    }

    fn flush(&self) {
        if let Some(file) = &self.file {
            if let Ok(mut f) = file.lock() {
                let _ = f.flush();
            }
        }
    }
}

/// Installs the process logger. `log_file` receives info and above.
pub fn init(stderr_level: LevelFilter, log_file: Option<&Path>) -> std::io::Result<()> {
    let file = match log_file {
        Some(p) => Some(Mutex::new(BufWriter::new(
            std::fs::OpenOptions::new().create(true).append(true).open(p)?,
        ))),
        None => None,
    };
    let logger = Logger {
        stderr_level,
        file,
        start: Instant::now(),
    };
    let max = stderr_level.max(LevelFilter::Info);
    if log::set_boxed_logger(Box::new(logger)).is_ok() {
        log::set_max_level(max);
    }
    Ok(())
}
