//! CSV ingestion and serialization.
//!
//! Observed files carry `unit_id,entry_time,w,pi_1,t_obs,y_obs`. Oracle files
//! carry `unit_id,entry_time,w,pi_1,t0,t1,y0,y1`; the observed columns follow
//! from them by switching on `w`. Floats are written in shortest round-trip
//! form, so reading a written file reproduces the values bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use csv::StringRecord;

use crate::error::{Error, Result};
use crate::model::{
    Arm, AssignmentVector, Bounds, ObservedDataset, ObservedUnit, PotentialOutcomeTable, PotentialUnit,
};

pub const OBSERVED_COLUMNS: [&str; 6] = ["unit_id", "entry_time", "w", "pi_1", "t_obs", "y_obs"];
pub const ORACLE_COLUMNS: [&str; 8] = ["unit_id", "entry_time", "w", "pi_1", "t0", "t1", "y0", "y1"];

struct Columns<'a> {
    path: &'a Path,
    index: Vec<usize>,
}

impl<'a> Columns<'a> {
    fn locate(path: &'a Path, headers: &StringRecord, wanted: &[&str]) -> Result<Self> {
        let index = wanted
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h.trim() == *name)
                    .ok_or_else(|| Error::MissingColumn {
                        path: path.to_path_buf(),
                        column: name.to_string(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Columns { path, index })
    }

    fn cell<'r>(&self, rec: &'r StringRecord, row: usize, k: usize) -> Result<&'r str> {
        rec.get(self.index[k]).map(str::trim).ok_or_else(|| Error::BadRow {
            path: self.path.to_path_buf(),
            row,
            message: format!("expected at least {} fields, found {}", self.index[k] + 1, rec.len()),
        })
    }

    fn float(&self, rec: &StringRecord, row: usize, k: usize, name: &str) -> Result<f64> {
        let s = self.cell(rec, row, k)?;
        s.parse::<f64>().map_err(|_| Error::BadRow {
            path: self.path.to_path_buf(),
            row,
            message: format!("column `{name}`: `{s}` is not a number"),
        })
    }

    fn int(&self, rec: &StringRecord, row: usize, k: usize, name: &str) -> Result<i64> {
        let s = self.cell(rec, row, k)?;
        s.parse::<i64>().map_err(|_| Error::BadRow {
            path: self.path.to_path_buf(),
            row,
            message: format!("column `{name}`: `{s}` is not an integer"),
        })
    }

    fn unit_id(&self, rec: &StringRecord, row: usize) -> Result<usize> {
        let v = self.int(rec, row, 0, "unit_id")?;
        usize::try_from(v).map_err(|_| Error::BadRow {
            path: self.path.to_path_buf(),
            row,
            message: format!("column `unit_id`: {v} is negative"),
        })
    }

    fn arm(&self, rec: &StringRecord, row: usize) -> Result<Arm> {
        Arm::from_label(self.int(rec, row, 2, "w")?)
    }
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn reader<R: Read>(src: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(src)
}

// Row numbers are file line numbers, with the header on line 1.
fn records<R: Read>(rdr: &mut csv::Reader<R>) -> impl Iterator<Item = (usize, csv::Result<StringRecord>)> + '_ {
    rdr.records().enumerate().map(|(k, r)| (k + 2, r))
}

pub fn read_observed_csv(path: impl AsRef<Path>, bounds: Bounds) -> Result<ObservedDataset> {
    let path = path.as_ref();
    read_observed_from(open(path)?, path, bounds)
}

/// Parses an observed file from any reader; `path` labels errors.
pub fn read_observed_from<R: Read>(src: R, path: &Path, bounds: Bounds) -> Result<ObservedDataset> {
    let mut rdr = reader(src);
    let cols = Columns::locate(path, rdr.headers()?, &OBSERVED_COLUMNS)?;
    let mut units = Vec::new();
    for (row, rec) in records(&mut rdr) {
        let rec = rec?;
        units.push(ObservedUnit {
            unit_id: cols.unit_id(&rec, row)?,
            entry_time: cols.float(&rec, row, 1, "entry_time")?,
            arm: cols.arm(&rec, row)?,
            propensity: cols.float(&rec, row, 3, "pi_1")?,
            time: cols.float(&rec, row, 4, "t_obs")?,
            value: cols.float(&rec, row, 5, "y_obs")?,
        });
    }
    ObservedDataset::new(units, bounds)
}

/// Reads a potential-outcome table and the assignment stored beside it,
/// aligned with the table's (entry time, unit id) order.
pub fn read_oracle_csv(path: impl AsRef<Path>, bounds: Bounds) -> Result<(PotentialOutcomeTable, AssignmentVector)> {
    let path = path.as_ref();
    read_oracle_from(open(path)?, path, bounds)
}

pub fn read_oracle_from<R: Read>(
    src: R,
    path: &Path,
    bounds: Bounds,
) -> Result<(PotentialOutcomeTable, AssignmentVector)> {
    let mut rdr = reader(src);
    let cols = Columns::locate(path, rdr.headers()?, &ORACLE_COLUMNS)?;
    let mut rows = Vec::new();
    for (row, rec) in records(&mut rdr) {
        let rec = rec?;
        let unit = PotentialUnit {
            unit_id: cols.unit_id(&rec, row)?,
            entry_time: cols.float(&rec, row, 1, "entry_time")?,
            propensity: cols.float(&rec, row, 3, "pi_1")?,
            event_time: [cols.float(&rec, row, 4, "t0")?, cols.float(&rec, row, 5, "t1")?],
            outcome: [cols.float(&rec, row, 6, "y0")?, cols.float(&rec, row, 7, "y1")?],
        };
        rows.push((unit, cols.arm(&rec, row)?));
    }
    rows.sort_by(|(a, _), (b, _)| a.entry_time.total_cmp(&b.entry_time).then(a.unit_id.cmp(&b.unit_id)));
    let (units, arms): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok((PotentialOutcomeTable::new(units, bounds)?, AssignmentVector::new(arms)))
}

/// Which of the two input layouts a file uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Observed,
    Oracle,
}

/// Classifies a file by its header: oracle if it has `t0`, observed otherwise.
pub fn detect_schema(path: impl AsRef<Path>) -> Result<Schema> {
    let path = path.as_ref();
    let mut rdr = reader(open(path)?);
    let oracle = rdr.headers()?.iter().any(|h| h.trim() == "t0");
    Ok(if oracle { Schema::Oracle } else { Schema::Observed })
}

pub(crate) fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn finish<W: Write>(wtr: csv::Writer<W>, path: &Path) -> Result<()> {
    wtr.into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

pub fn write_observed_csv(path: impl AsRef<Path>, obs: &ObservedDataset) -> Result<()> {
    let path = path.as_ref();
    write_observed_to(create(path)?, path, obs)
}

pub fn write_observed_to<W: Write>(dst: W, path: &Path, obs: &ObservedDataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(dst);
    wtr.write_record(OBSERVED_COLUMNS)?;
    for u in obs.units() {
        wtr.write_record([
            u.unit_id.to_string(),
            u.entry_time.to_string(),
            u.arm.to_string(),
            u.propensity.to_string(),
            u.time.to_string(),
            u.value.to_string(),
        ])?;
    }
    finish(wtr, path)
}

pub fn write_oracle_csv(
    path: impl AsRef<Path>,
    table: &PotentialOutcomeTable,
    assignment: &AssignmentVector,
) -> Result<()> {
    let path = path.as_ref();
    write_oracle_to(create(path)?, path, table, assignment)
}

pub fn write_oracle_to<W: Write>(
    dst: W,
    path: &Path,
    table: &PotentialOutcomeTable,
    assignment: &AssignmentVector,
) -> Result<()> {
    assignment.check_len(table.len())?;
    let mut wtr = csv::Writer::from_writer(dst);
    wtr.write_record(ORACLE_COLUMNS)?;
    for (u, arm) in table.units().iter().zip(assignment.arms()) {
        wtr.write_record([
            u.unit_id.to_string(),
            u.entry_time.to_string(),
            arm.to_string(),
            u.propensity.to_string(),
            u.event_time[0].to_string(),
            u.event_time[1].to_string(),
            u.outcome[0].to_string(),
            u.outcome[1].to_string(),
        ])?;
    }
    finish(wtr, path)
}

/// Long-format `time,series,value` rows.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct SeriesTable {
    pub rows: Vec<(f64, String, f64)>,
}

impl SeriesTable {
    pub fn push(&mut self, time: f64, series: &str, value: f64) {
        self.rows.push((time, series.to_string(), value));
    }

    /// Values of one series in emission order.
    pub fn series(&self, name: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|(_, s, _)| s == name)
            .map(|&(t, _, v)| (t, v))
            .collect()
    }

    pub fn write_to<W: Write>(&self, dst: W, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(dst);
        wtr.write_record(["time", "series", "value"])?;
        for (t, s, v) in &self.rows {
            wtr.write_record([t.to_string(), s.clone(), v.to_string()])?;
        }
        finish(wtr, path)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.write_to(create(path)?, path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = reader(open(path)?);
        let cols = Columns::locate(path, rdr.headers()?, &["time", "series", "value"])?;
        let mut rows = Vec::new();
        for (row, rec) in records(&mut rdr) {
            let rec = rec?;
            rows.push((
                cols.float(&rec, row, 0, "time")?,
                cols.cell(&rec, row, 1)?.to_string(),
                cols.float(&rec, row, 2, "value")?,
            ));
        }
        Ok(SeriesTable { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{apply_switching, fixtures};

    fn oracle_text(table: &PotentialOutcomeTable, a: &AssignmentVector) -> String {
        let mut buf = Vec::new();
        write_oracle_to(&mut buf, Path::new("mem"), table, a).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn oracle_round_trip_is_exact() {
        let (table, a) = fixtures::five_rows();
        let text = oracle_text(&table, &a);
        assert!(text.starts_with("unit_id,entry_time,w,pi_1,t0,t1,y0,y1\n"));
        let (back, a2) = read_oracle_from(text.as_bytes(), Path::new("mem"), table.bounds()).unwrap();
        assert_eq!(back, table);
        assert_eq!(a2, a);
    }

    #[test]
    fn awkward_floats_survive() {
        let units = vec![PotentialUnit {
            unit_id: 3,
            entry_time: 0.1 + 0.2,
            event_time: [1.0 / 3.0, std::f64::consts::PI],
            outcome: [-1e-300, 2.0f64.sqrt()],
            propensity: 0.3,
        }];
        let table = PotentialOutcomeTable::new(units, Bounds::default()).unwrap();
        let a = AssignmentVector::new(vec![Arm::Control]);
        let text = oracle_text(&table, &a);
        let (back, _) = read_oracle_from(text.as_bytes(), Path::new("mem"), Bounds::default()).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn observed_round_trip_and_switching() {
        let (table, a) = fixtures::five_rows();
        let obs = apply_switching(&table, &a).unwrap();
        let mut buf = Vec::new();
        write_observed_to(&mut buf, Path::new("mem"), &obs).unwrap();
        let back = read_observed_from(buf.as_slice(), Path::new("mem"), Bounds::default()).unwrap();
        assert_eq!(back, obs);
        let t: Vec<f64> = back.units().iter().map(|u| u.time).collect();
        assert_eq!(t, vec![0.94, 1.40, 4.96, 1.65, 2.93]);
    }

    #[test]
    fn missing_column_is_named() {
        let text = "unit_id,entry_time,w,pi_1,t_obs\n0,0,1,0.5,1\n";
        let err = read_observed_from(text.as_bytes(), Path::new("x.csv"), Bounds::default()).unwrap_err();
        assert!(
            matches!(err, Error::MissingColumn { ref column, .. } if column == "y_obs"),
            "{err}"
        );
    }

    #[test]
    fn bad_cell_reports_row() {
        let text = "unit_id,entry_time,w,pi_1,t_obs,y_obs\n0,0,1,0.5,1,0.2\n1,0,1,0.5,abc,0.2\n";
        let err = read_observed_from(text.as_bytes(), Path::new("x.csv"), Bounds::default()).unwrap_err();
        match err {
            Error::BadRow { row, message, .. } => {
                assert_eq!(row, 3);
                assert!(message.contains("t_obs"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn zero_propensity_rejected() {
        let text = "unit_id,entry_time,w,pi_1,t0,t1,y0,y1\n4,0,1,0,1,1,0.1,0.1\n";
        let err = read_oracle_from(text.as_bytes(), Path::new("x.csv"), Bounds::default()).unwrap_err();
        assert!(matches!(err, Error::PropensityOutOfBounds { unit_id: 4, .. }), "{err}");
    }

    #[test]
    fn column_order_is_free() {
        let text = "y_obs,t_obs,pi_1,w,entry_time,unit_id\n0.2,1.5,0.5,0,0.25,9\n";
        let obs = read_observed_from(text.as_bytes(), Path::new("x.csv"), Bounds::default()).unwrap();
        assert_eq!(obs.units()[0].unit_id, 9);
        assert_eq!(obs.units()[0].time, 1.5);
    }

    #[test]
    fn invalid_arm_label() {
        let text = "unit_id,entry_time,w,pi_1,t_obs,y_obs\n0,0,2,0.5,1,0.2\n";
        let err = read_observed_from(text.as_bytes(), Path::new("x.csv"), Bounds::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidArm(2)));
    }

    #[test]
    fn series_round_trip() {
        let mut s = SeriesTable::default();
        s.push(0.5, "delta_hat", -0.25);
        s.push(1.0, "delta_hat", 1.0 / 3.0);
        let dir = std::env::temp_dir().join(format!("avdelay-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("s.csv");
        s.write(&p).unwrap();
        assert_eq!(SeriesTable::read(&p).unwrap(), s);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
