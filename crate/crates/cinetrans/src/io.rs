//! Reading and writing artifacts. Every write goes to a temporary file in
//! the target directory and is renamed into place, so a reader never sees
//! a partial file.

use std::fs;
use std::io::Write;
use std::path::Path;

use cinetrans_core::analysis::AttnMaps;
use cinetrans_core::codec::{self, Embeddings};
use cinetrans_core::curation::Segment;
use cinetrans_core::{AttnMask, FrameSequence};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::CliError;

pub type Result<T> = std::result::Result<T, CliError>;

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("artifact types always serialize");
    out.push(b'\n');
    out
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json_bytes(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_ctf(path: &Path) -> Result<FrameSequence> {
    Ok(codec::decode_ctf(&read_bytes(path)?)?)
}

pub fn write_ctf(path: &Path, seq: &FrameSequence) -> Result<()> {
    write_atomic(path, &codec::encode_ctf(seq)?)
}

pub fn read_mask(path: &Path) -> Result<AttnMask> {
    Ok(codec::decode_mask(&read_bytes(path)?)?)
}

pub fn write_mask(path: &Path, mask: &AttnMask) -> Result<()> {
    write_atomic(path, &codec::encode_mask(mask)?)
}

pub fn read_attn(path: &Path) -> Result<AttnMaps> {
    Ok(codec::decode_attn(&read_bytes(path)?)?)
}

pub fn write_attn(path: &Path, maps: &AttnMaps) -> Result<()> {
    write_atomic(path, &codec::encode_attn(maps)?)
}

pub fn read_emb(path: &Path) -> Result<Embeddings> {
    Ok(codec::decode_emb(&read_bytes(path)?)?)
}

pub fn write_emb(path: &Path, emb: &Embeddings) -> Result<()> {
    write_atomic(path, &codec::encode_emb(emb)?)
}

/// Segments from either an `EMBv1` file, whose rows alternate first-frame
/// and last-frame embeddings (lengths are unknown and recorded as 1), or a
/// JSON array of segment objects.
pub fn read_segments(path: &Path) -> Result<Vec<Segment>> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(codec::EMB_MAGIC) {
        let emb = codec::decode_emb(&bytes)?;
        if emb.count % 2 != 0 {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                message: format!("{} embedding rows do not pair into segments", emb.count),
            });
        }
        return (0..emb.count / 2)
            .map(|i| Ok(Segment::new(i, emb.row_f64(2 * i), emb.row_f64(2 * i + 1), 1)?))
            .collect();
    }
    let segments: Vec<Segment> = serde_json::from_slice(&bytes).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    for s in &segments {
        s.validate()?;
    }
    Ok(segments)
}

/// One score per line; blank lines are skipped.
pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scores(&text).map_err(|message| CliError::Parse {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_scores(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| format!("line {}: {e}", i + 1))
        })
        .collect()
}
