//! Prediction CSV: `frame_id,video_id,` then the 17 canonical label names in
//! frozen order, one row per frame.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use capsule_core::metrics::{check_scores, PredictionRow, PredictionSet};
use capsule_core::taxonomy::{LabelId, NUM_LABELS};

use crate::error::{csv_error, Error, Result};

pub fn prediction_header() -> Vec<&'static str> {
    let mut h = vec!["frame_id", "video_id"];
    h.extend(LabelId::all().map(LabelId::canonical_name));
    h
}

pub fn write_predictions(set: &PredictionSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(Error::io(path))?;
    let mut out = BufWriter::new(file);
    write_predictions_to(set, &mut out).map_err(Error::io(path))?;
    out.flush().map_err(Error::io(path))
}

/// Scores use Rust's shortest round-trip float formatting.
pub fn write_predictions_to<W: Write>(set: &PredictionSet, out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(prediction_header())?;
    for row in &set.rows {
        let mut fields = vec![row.frame_id.clone(), row.video_id.clone()];
        fields.extend(row.scores.iter().map(|s| s.to_string()));
        w.write_record(&fields)?;
    }
    w.flush()
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<PredictionSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(Error::io(path))?;
    read_predictions_from(BufReader::new(file), path)
}

pub fn read_predictions_from<R: Read>(reader: R, source: &Path) -> Result<PredictionSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut record = csv::StringRecord::new();
    if !rdr.read_record(&mut record).map_err(|e| csv_error(source, e))? {
        return Err(Error::SchemaMismatch("prediction file is empty; header row required".into()));
    }
    let header = prediction_header();
    if record.iter().ne(header.iter().copied()) {
        return Err(Error::SchemaMismatch(format!(
            "prediction header must be frame_id,video_id followed by the 17 labels in order; got {} columns",
            record.len()
        )));
    }
    let mut set = PredictionSet::default();
    while rdr.read_record(&mut record).map_err(|e| csv_error(source, e))? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != NUM_LABELS + 2 {
            return Err(Error::SchemaMismatch(format!(
                "line {line}: expected {} columns, got {}",
                NUM_LABELS + 2,
                record.len()
            )));
        }
        let mut scores = [0.0; NUM_LABELS];
        for (slot, field) in scores.iter_mut().zip(record.iter().skip(2)) {
            *slot = field.trim().parse().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("score {field:?} is not a number"),
            })?;
        }
        let frame_id = record[0].to_string();
        check_scores(&frame_id, &scores)?;
        set.rows.push(PredictionRow {
            frame_id,
            video_id: record[1].to_string(),
            scores,
        });
    }
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        prediction_header().join(",")
    }

    #[test]
    fn round_trip_bytes() {
        let set = PredictionSet {
            rows: vec![PredictionRow {
                frame_id: "f1".into(),
                video_id: "v".into(),
                scores: std::array::from_fn(|i| (i as f64 + 0.1) / 17.3),
            }],
        };
        let mut a = Vec::new();
        write_predictions_to(&set, &mut a).unwrap();
        let back = read_predictions_from(a.as_slice(), Path::new("p.csv")).unwrap();
        assert_eq!(back, set);
        let mut b = Vec::new();
        write_predictions_to(&back, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_column_count_is_schema_mismatch() {
        let short = format!("{}\nf1,v,0.5\n", header());
        assert!(matches!(
            read_predictions_from(short.as_bytes(), Path::new("p")),
            Err(Error::SchemaMismatch(_))
        ));
        let bad_header = "frame_id,video_id,mouth\n";
        assert!(matches!(
            read_predictions_from(bad_header.as_bytes(), Path::new("p")),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn rejects_bad_scores() {
        let row = |s: &str| format!("{}\nf1,v{}\n", header(), format!(",{s}").repeat(17));
        assert!(matches!(
            read_predictions_from(row("NaN").as_bytes(), Path::new("p")),
            Err(Error::Core(capsule_core::Error::InvalidScore(_)))
        ));
        assert!(matches!(
            read_predictions_from(row("abc").as_bytes(), Path::new("p")),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        assert!(read_predictions_from(row("1.5").as_bytes(), Path::new("p")).is_err());
        assert_eq!(read_predictions_from(row("0.25").as_bytes(), Path::new("p")).unwrap().rows.len(), 1);
    }
}
