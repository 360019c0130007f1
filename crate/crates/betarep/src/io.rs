//! Annotation and detection ingestion/serialization.
//!
//! Annotations use the odgt JSON-lines convention: one object per line with
//! an `ID` and a `gtboxes` array carrying `fbox`/`vbox` as `[x, y, w, h]`
//! plus an optional `extra.ignore` flag. Detections are JSON lines of
//! `{"image": ..., "score": ..., "beta": [l, t, r, b, ax, bx, ay, by]}`.
//! Coordinates are `[l, t, r, b]` floats everywhere inside the library;
//! `[x, y, w, h]` appears only at the ingestion boundary.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beta::BetaPedestrian;
use crate::error::{Error, Result};
use crate::eval::PairRecord;
use crate::geometry::{BBox, PairedBoxes};
use crate::nms::Detection;

/// One annotated pedestrian: paired boxes plus the ignore flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotatedPerson {
    pub boxes: PairedBoxes,
    pub ignore: bool,
}

/// One image's ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneAnnotation {
    pub id: String,
    pub persons: Vec<AnnotatedPerson>,
    pub image_size: Option<(f64, f64)>,
}

/// A record that could not be converted into a valid pedestrian and was
/// skipped instead of failing the whole file.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestWarning {
    pub line: usize,
    pub record: usize,
    pub reason: String,
}

impl std::fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "line {}, record {}: {} (record skipped)",
            self.line, self.record, self.reason
        )
    }
}

#[derive(Deserialize)]
struct OdgtLine {
    #[serde(rename = "ID")]
    id: String,
    #[serde(default)]
    gtboxes: Vec<OdgtBox>,
}

#[derive(Deserialize)]
struct OdgtBox {
    #[serde(default)]
    tag: Option<String>,
    #[serde(default)]
    fbox: Option<[f64; 4]>,
    #[serde(default)]
    vbox: Option<[f64; 4]>,
    #[serde(default)]
    extra: Option<OdgtExtra>,
}

#[derive(Deserialize)]
struct OdgtExtra {
    #[serde(default)]
    ignore: Option<i64>,
}

#[derive(Serialize)]
struct OdgtLineOut<'a> {
    #[serde(rename = "ID")]
    id: &'a str,
    gtboxes: Vec<OdgtBoxOut>,
}

#[derive(Serialize)]
struct OdgtBoxOut {
    tag: &'static str,
    fbox: [f64; 4],
    vbox: [f64; 4],
    extra: OdgtExtraOut,
}

#[derive(Serialize)]
struct OdgtExtraOut {
    ignore: i64,
}

/// Parse one odgt line (`line_no` is 1-based, used in errors and warnings).
///
/// `[x, y, w, h]` converts to `[l, t, r, b]`; the visible box is clipped
/// into the full box. Entries tagged non-person or flagged `ignore` are kept
/// with the ignore flag set. Records with missing or degenerate boxes are
/// skipped with a warning.
pub fn parse_odgt_line(line: &str, line_no: usize) -> Result<(SceneAnnotation, Vec<IngestWarning>)> {
    let parsed: OdgtLine = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        msg: e.to_string(),
    })?;
    let mut persons = Vec::with_capacity(parsed.gtboxes.len());
    let mut warnings = Vec::new();
    for (record, gtbox) in parsed.gtboxes.into_iter().enumerate() {
        let mut skip = |reason: String| {
            warnings.push(IngestWarning {
                line: line_no,
                record,
                reason,
            });
        };
        let (fbox, vbox) = match (gtbox.fbox, gtbox.vbox) {
            (Some(f), Some(v)) => (f, v),
            _ => {
                skip("missing fbox or vbox".into());
                continue;
            }
        };
        let full = match BBox::from_xywh(fbox[0], fbox[1], fbox[2], fbox[3]) {
            Ok(b) => b,
            Err(e) => {
                skip(format!("bad fbox: {e}"));
                continue;
            }
        };
        let visible = match BBox::from_xywh(vbox[0], vbox[1], vbox[2], vbox[3]) {
            Ok(b) => b,
            Err(e) => {
                skip(format!("bad vbox: {e}"));
                continue;
            }
        };
        let boxes = match PairedBoxes::new(full, visible) {
            Ok(p) => p,
            Err(e) => {
                skip(format!("bad pair: {e}"));
                continue;
            }
        };
        let non_person = gtbox.tag.as_deref().is_some_and(|t| t != "person");
        let ignored = gtbox
            .extra
            .as_ref()
            .and_then(|e| e.ignore) == Some(1);
        persons.push(AnnotatedPerson {
            boxes,
            ignore: non_person || ignored,
        });
    }
    Ok((
        SceneAnnotation {
            id: parsed.id,
            persons,
            image_size: None,
        },
        warnings,
    ))
}

/// Read a whole odgt file. Scene ids must be unique.
pub fn read_odgt(path: &Path) -> Result<(Vec<SceneAnnotation>, Vec<IngestWarning>)> {
    read_odgt_from(BufReader::new(File::open(path)?))
}

pub fn read_odgt_from<R: Read>(reader: BufReader<R>) -> Result<(Vec<SceneAnnotation>, Vec<IngestWarning>)> {
    let mut scenes = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (scene, mut w) = parse_odgt_line(&line, idx + 1)?;
        if !seen.insert(scene.id.clone()) {
            return Err(Error::Schema {
                record: idx + 1,
                msg: format!("duplicate scene id '{}'", scene.id),
            });
        }
        warnings.append(&mut w);
        scenes.push(scene);
    }
    Ok((scenes, warnings))
}

/// Serialize one scene as a canonical odgt line (tag `person`, ignore flag
/// in `extra`).
pub fn odgt_line(scene: &SceneAnnotation) -> String {
    let out = OdgtLineOut {
        id: &scene.id,
        gtboxes: scene
            .persons
            .iter()
            .map(|p| {
                let f = p.boxes.full();
                let v = p.boxes.visible();
                OdgtBoxOut {
                    tag: "person",
                    fbox: [f.l, f.t, f.r - f.l, f.b - f.t],
                    vbox: [v.l, v.t, v.r - v.l, v.b - v.t],
                    extra: OdgtExtraOut {
                        ignore: i64::from(p.ignore),
                    },
                }
            })
            .collect(),
    };
    serde_json::to_string(&out).expect("odgt serialization cannot fail")
}

pub fn write_odgt<W: Write>(writer: &mut W, scenes: &[SceneAnnotation]) -> Result<()> {
    for scene in scenes {
        writeln!(writer, "{}", odgt_line(scene))?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct DetectionLine {
    image: String,
    score: f64,
    beta: [f64; 8],
}

/// A detection tagged with its source image.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub image: String,
    pub detection: Detection,
}

/// Read JSON-lines detections; ids are assigned from the record index so
/// downstream tie-breaking is reproducible.
pub fn read_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    read_detections_from(BufReader::new(File::open(path)?))
}

pub fn read_detections_from<R: Read>(reader: BufReader<R>) -> Result<Vec<DetectionRecord>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: DetectionLine = serde_json::from_str(&line).map_err(|e| Error::Schema {
            record: idx + 1,
            msg: e.to_string(),
        })?;
        let pedestrian = BetaPedestrian::from_flat(parsed.beta).map_err(|e| Error::Schema {
            record: idx + 1,
            msg: e.to_string(),
        })?;
        let detection =
            Detection::new(pedestrian, parsed.score, idx as u64).map_err(|e| Error::Schema {
                record: idx + 1,
                msg: e.to_string(),
            })?;
        out.push(DetectionRecord {
            image: parsed.image,
            detection,
        });
    }
    Ok(out)
}

pub fn write_detections<W: Write>(writer: &mut W, records: &[DetectionRecord]) -> Result<()> {
    for r in records {
        let line = DetectionLine {
            image: r.image.clone(),
            score: r.detection.score,
            beta: r.detection.pedestrian.to_flat(),
        };
        writeln!(
            writer,
            "{}",
            serde_json::to_string(&line).expect("detection serialization cannot fail")
        )?;
    }
    Ok(())
}

/// Write pair records as CSV with header `image,idx_a,idx_b,fiou,viou,symkl`.
pub fn write_pair_records<W: Write>(writer: W, records: &[PairRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["image", "idx_a", "idx_b", "fiou", "viou", "symkl"])
        .map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.image.as_str(),
            &r.idx_a.to_string(),
            &r.idx_b.to_string(),
            &r.fiou.to_string(),
            &r.viou.to_string(),
            &r.sym_kl.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
