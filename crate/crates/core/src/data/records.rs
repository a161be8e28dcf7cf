use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on frame-interval uniformity (s).
const DT_TOLERANCE: f64 = 1e-6;

/// One row of a trajectory recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub vehicle_id: u64,
    pub frame: i64,
    /// s
    pub t: f64,
    /// m
    pub x: f64,
    /// m
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane: Option<i64>,
}

/// Validated rows of one recording plus its inferred frame interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub name: String,
    pub dt: f64,
    pub records: Vec<TrajectoryRecord>,
}

impl Recording {
    /// Rows grouped per vehicle, each sorted by frame.
    pub fn by_vehicle(&self) -> BTreeMap<u64, Vec<&TrajectoryRecord>> {
        let mut map: BTreeMap<u64, Vec<&TrajectoryRecord>> = BTreeMap::new();
        for r in &self.records {
            map.entry(r.vehicle_id).or_default().push(r);
        }
        for rows in map.values_mut() {
            rows.sort_by_key(|r| r.frame);
        }
        map
    }
}

/// Input file dialects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrajectoryFormat {
    /// `vehicle_id,frame,t,x,y[,lane]`
    #[default]
    GenericCsv,
}

const REQUIRED: [&str; 5] = ["vehicle_id", "frame", "t", "x", "y"];

/// Loads and validates a trajectory CSV.
///
/// Rows must have strictly increasing frames per vehicle and a uniform
/// frame interval across the file. Errors name the offending data row
/// (1-based, header excluded).
pub fn load_trajectories(path: &Path, format: TrajectoryFormat) -> Result<Recording> {
    let TrajectoryFormat::GenericCsv = format;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "recording".into());
    parse_trajectories(file, path, name)
}

pub(crate) fn parse_trajectories(reader: impl std::io::Read, path: &Path, name: String) -> Result<Recording> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::data(path, format!("unreadable header: {e}")))?
        .clone();
    for col in REQUIRED {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::data(path, format!("missing column `{col}`")));
        }
    }
    if let Some(extra) = headers.iter().find(|h| !REQUIRED.contains(h) && *h != "lane") {
        return Err(Error::data(path, format!("unexpected column `{extra}`")));
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut last_frame: BTreeMap<u64, (i64, f64)> = BTreeMap::new();
    let mut dt: Option<f64> = None;
    for (idx, row) in rdr.deserialize::<TrajectoryRecord>().enumerate() {
        let line = idx + 1;
        let rec = row.map_err(|e| Error::data(path, format!("row {line}: {e}")))?;
        if ![rec.t, rec.x, rec.y].iter().all(|v| v.is_finite()) {
            return Err(Error::data(path, format!("row {line}: non-finite value")));
        }
        if !seen.insert((rec.vehicle_id, rec.frame)) {
            return Err(Error::data(
                path,
                format!(
                    "row {line}: duplicate (vehicle {}, frame {})",
                    rec.vehicle_id, rec.frame
                ),
            ));
        }
        if let Some(&(pf, pt)) = last_frame.get(&rec.vehicle_id) {
            if rec.frame <= pf {
                return Err(Error::data(
                    path,
                    format!(
                        "row {line}: frame {} of vehicle {} not after {pf}",
                        rec.frame, rec.vehicle_id
                    ),
                ));
            }
            let step = (rec.t - pt) / (rec.frame - pf) as f64;
            match dt {
                None if step > 0.0 => dt = Some(step),
                None => {
                    return Err(Error::data(path, format!("row {line}: time does not advance")));
                }
                Some(d) if (step - d).abs() > DT_TOLERANCE => {
                    return Err(Error::data(
                        path,
                        format!("row {line}: frame interval {step} s differs from {d} s"),
                    ));
                }
                Some(_) => {}
            }
        }
        last_frame.insert(rec.vehicle_id, (rec.frame, rec.t));
        records.push(rec);
    }
    let dt = dt.ok_or_else(|| Error::data(path, "cannot infer frame interval: no vehicle has two frames"))?;
    Ok(Recording { name, dt, records })
}

/// Writes records in the generic CSV layout.
pub fn write_trajectories(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::data(path, e.to_string()))?;
    let with_lane = records.iter().any(|r| r.lane.is_some());
    let mut header = REQUIRED.to_vec();
    if with_lane {
        header.push("lane");
    }
    w.write_record(&header).map_err(|e| Error::data(path, e.to_string()))?;
    for r in records {
        let mut row = vec![
            r.vehicle_id.to_string(),
            r.frame.to_string(),
            format!("{}", r.t),
            format!("{}", r.x),
            format!("{}", r.y),
        ];
        if with_lane {
            row.push(r.lane.map(|l| l.to_string()).unwrap_or_default());
        }
        w.write_record(&row).map_err(|e| Error::data(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
