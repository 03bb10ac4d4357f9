//! Manifest CSV: header `frame_id,video_id,frame_index,labels`, labels as a
//! `;`-separated list of canonical names. UTF-8, LF or CRLF.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use capsule_core::taxonomy::{parse_label, LabelSet};
use capsule_core::{FrameRecord, Manifest};
use rayon::prelude::*;

use crate::error::{csv_error, Error, Result};

pub const MANIFEST_HEADER: [&str; 4] = ["frame_id", "video_id", "frame_index", "labels"];

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let file = File::open(path).map_err(Error::io(path))?;
    read_manifest_from(BufReader::with_capacity(1 << 20, file), path)
}

/// Streams records from `reader`; `source` is recorded as the manifest path
/// and used in IO diagnostics.
pub fn read_manifest_from<R: Read>(reader: R, source: &Path) -> Result<Manifest> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut record = csv::StringRecord::new();
    let mut manifest = Manifest::new(source.to_string_lossy());

    if !rdr.read_record(&mut record).map_err(|e| csv_error(source, e))? {
        return Err(Error::SchemaMismatch("manifest is empty; header row required".into()));
    }
    if record.iter().ne(MANIFEST_HEADER) {
        return Err(Error::SchemaMismatch(format!(
            "manifest header must be {:?}, got {:?}",
            MANIFEST_HEADER.join(","),
            record.iter().collect::<Vec<_>>().join(",")
        )));
    }

    while rdr.read_record(&mut record).map_err(|e| csv_error(source, e))? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |reason: String| Error::MalformedRow { line, reason };
        let [frame_id, video_id, frame_index, labels] = [0, 1, 2, 3].map(|i| record.get(i).unwrap_or(""));
        if frame_id.is_empty() || video_id.is_empty() {
            return Err(malformed("frame_id and video_id must be non-empty".into()));
        }
        let frame_index: u64 = frame_index
            .trim()
            .parse()
            .map_err(|_| malformed(format!("frame_index {frame_index:?} is not a non-negative integer")))?;
        let labels = parse_labels_field(labels).map_err(|reason| match reason {
            None => Error::EmptyLabelSet { line },
            Some(reason) => malformed(reason),
        })?;
        manifest
            .push(FrameRecord {
                frame_id: frame_id.to_string(),
                video_id: video_id.to_string(),
                frame_index,
                labels,
            })
            .map_err(|e| match e {
                capsule_core::Error::DuplicateFrameId(frame_id) => Error::DuplicateFrameId { frame_id, line },
                capsule_core::Error::EmptyLabelSet(_) => Error::EmptyLabelSet { line },
                e => Error::Core(e),
            })?;
    }
    Ok(manifest)
}

/// `Err(None)` for an empty field, `Err(Some(reason))` for a bad token.
fn parse_labels_field(field: &str) -> std::result::Result<LabelSet, Option<String>> {
    if field.trim().is_empty() {
        return Err(None);
    }
    let mut set = LabelSet::EMPTY;
    for token in field.split(';') {
        if token.trim().is_empty() {
            return Err(Some(format!("empty label in {field:?}")));
        }
        set.insert(parse_label(token).map_err(|e| Some(e.to_string()))?);
    }
    Ok(set)
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(Error::io(path))?;
    let mut out = BufWriter::new(file);
    write_manifest_to(manifest, &mut out).map_err(Error::io(path))?;
    out.flush().map_err(Error::io(path))
}

pub fn write_manifest_to<W: Write>(manifest: &Manifest, out: W) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(MANIFEST_HEADER)?;
    for r in manifest.records() {
        w.write_record([
            r.frame_id.as_str(),
            r.video_id.as_str(),
            &r.frame_index.to_string(),
            &r.labels.to_field(),
        ])?;
    }
    w.flush()
}

/// Statistics over `threads` workers (all cores when `None`). Counts are
/// integers merged per chunk, so the result does not depend on the thread
/// count.
pub fn compute_stats_parallel(manifest: &Manifest, threads: Option<usize>) -> Result<capsule_core::DatasetStats> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::SchemaMismatch(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(|| {
        manifest
            .records()
            .par_chunks(1 << 14)
            .map(capsule_core::manifest::compute_stats)
            .reduce(Default::default, |mut a, b| {
                a.merge(&b);
                a
            })
    }))
}
