//! Plain-text stream format: one `item,weight` pair of decimal integers per
//! line. Blank lines and lines starting with `#` are ignored; a `#` after the
//! pair starts a trailing comment.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::StreamUpdate;

#[derive(Debug, Error)]
pub enum StreamFormatError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_line(text: &str, line: usize) -> Result<Option<StreamUpdate>, StreamFormatError> {
    let content = text.split('#').next().unwrap_or("").trim();
    if content.is_empty() {
        return Ok(None);
    }
    let malformed = |message: String| StreamFormatError::Malformed { line, message };
    let mut fields = content.split(',');
    let (Some(item), Some(weight), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err(malformed(format!("expected `item,weight`, found `{content}`")));
    };
    let item: u64 = item.trim().parse().map_err(|e| malformed(format!("bad item `{}`: {e}", item.trim())))?;
    if item == 0 {
        return Err(malformed("items are numbered from 1".into()));
    }
    let weight: i64 = weight.trim().parse().map_err(|e| malformed(format!("bad weight `{}`: {e}", weight.trim())))?;
    Ok(Some(StreamUpdate { item, weight }))
}

pub fn read_stream<R: BufRead>(reader: R) -> Result<Vec<StreamUpdate>, StreamFormatError> {
    let mut updates = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        if let Some(u) = parse_line(&line?, idx + 1)? {
            updates.push(u);
        }
    }
    Ok(updates)
}

pub fn parse_stream(text: &str) -> Result<Vec<StreamUpdate>, StreamFormatError> {
    read_stream(text.as_bytes())
}

pub fn write_stream<W: Write>(mut out: W, updates: &[StreamUpdate]) -> io::Result<()> {
    for u in updates {
        writeln!(out, "{},{}", u.item, u.weight)?;
    }
    Ok(())
}
