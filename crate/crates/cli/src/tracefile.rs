//! Trace file IO. The on-disk format is the core trace text format; files
//! ending in `.gz` are gzip-compressed transparently.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use xorht_core::workload::trace::{format_trace, parse_trace, TraceData};

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

pub fn read_trace(path: &Path) -> Result<TraceData> {
    let file =
        File::open(path).with_context(|| format!("cannot open trace {}", path.display()))?;
    let mut text = String::new();
    if is_gz(path) {
        GzDecoder::new(file)
            .read_to_string(&mut text)
            .with_context(|| format!("cannot decompress trace {}", path.display()))?;
    } else {
        let mut file = file;
        file.read_to_string(&mut text)
            .with_context(|| format!("cannot read trace {}", path.display()))?;
    }
    parse_trace(&text).with_context(|| format!("malformed trace {}", path.display()))
}

pub fn write_trace(path: &Path, data: &TraceData) -> Result<()> {
    let text = format_trace(data);
    let file =
        File::create(path).with_context(|| format!("cannot create trace {}", path.display()))?;
    if is_gz(path) {
        let mut enc = GzEncoder::new(file, flate2::Compression::default());
        enc.write_all(text.as_bytes())?;
        enc.finish()?;
    } else {
        let mut file = file;
        file.write_all(text.as_bytes())?;
    }
    Ok(())
}
