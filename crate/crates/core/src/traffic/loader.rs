use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::Deserialize;

use super::{LoadUnits, TrafficError, TrafficSeries};

#[derive(Deserialize)]
struct Row {
    cell_id: String,
    timestamp: String,
    load: f64,
}

/// Epoch milliseconds (the open-data convention) or RFC 3339.
fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(ms) = raw.parse::<i64>() {
        return DateTime::from_timestamp_millis(ms);
    }
    DateTime::parse_from_rfc3339(raw).ok().map(|t| t.with_timezone(&Utc))
}

/// Per-cell series from `cell_id,timestamp,load` rows, in raw units.
///
/// Rows sharing a cell and timestamp are summed. The bucket width is the smallest gap between
/// consecutive samples of any one cell and must be a whole number of minutes; missing buckets
/// inside a cell's span are filled with zero.
pub fn read_traffic_csv<R: Read>(reader: R) -> Result<BTreeMap<String, TrafficSeries>, TrafficError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut cells: BTreeMap<String, BTreeMap<i64, f64>> = BTreeMap::new();
    for (k, row) in csv.deserialize::<Row>().enumerate() {
        let line = k as u64 + 2;
        let row = row?;
        let t = parse_timestamp(&row.timestamp).ok_or_else(|| TrafficError::Record {
            line,
            reason: format!("unparseable timestamp `{}`", row.timestamp),
        })?;
        if !row.load.is_finite() || row.load < 0.0 {
            return Err(TrafficError::Record {
                line,
                reason: format!("load must be finite and >= 0, got {}", row.load),
            });
        }
        *cells.entry(row.cell_id).or_default().entry(t.timestamp()).or_insert(0.0) += row.load;
    }
    if cells.is_empty() {
        return Err(TrafficError::InvalidSeries("traffic CSV has no rows".into()));
    }

    let step_s = cells
        .values()
        .flat_map(|samples| samples.keys().zip(samples.keys().skip(1)).map(|(a, b)| b - a))
        .min();
    let bucket_minutes = match step_s {
        None => 1,
        Some(s) if s % 60 == 0 => (s / 60) as u32,
        Some(s) => {
            return Err(TrafficError::InvalidSeries(format!(
                "sample spacing of {s} s is not a whole number of minutes"
            )))
        }
    };
    let step_s = bucket_minutes as i64 * 60;

    let mut out = BTreeMap::new();
    for (cell, samples) in cells {
        let (&first, _) = samples.first_key_value().expect("cells are non-empty");
        let (&last, _) = samples.last_key_value().expect("cells are non-empty");
        if let Some(off) = samples.keys().find(|&&t| (t - first) % step_s != 0) {
            return Err(TrafficError::InvalidSeries(format!(
                "cell {cell}: timestamp {off} is off the {bucket_minutes}-minute grid"
            )));
        }
        let len = ((last - first) / step_s + 1) as usize;
        let mut values = vec![0.0; len];
        for (t, v) in samples {
            values[((t - first) / step_s) as usize] = v;
        }
        let start = DateTime::from_timestamp(first, 0).expect("parsed timestamps are in range");
        out.insert(cell, TrafficSeries::new(values, bucket_minutes, start, LoadUnits::Raw)?);
    }
    Ok(out)
}

pub fn load_traffic_csv(path: &Path) -> Result<BTreeMap<String, TrafficSeries>, TrafficError> {
    let file = std::fs::File::open(path)
        .map_err(|e| TrafficError::InvalidSeries(format!("cannot open {}: {e}", path.display())))?;
    read_traffic_csv(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_duplicates_and_fills_gaps() {
        let data = "cell_id,timestamp,load\n\
                    7,1383264000000,1.5\n\
                    7,1383264000000,0.5\n\
                    7,1383264600000,4\n\
                    9,2013-11-01T00:10:00Z,3\n\
                    9,1383265200000,1\n";
        let cells = read_traffic_csv(data.as_bytes()).unwrap();
        let c7 = &cells["7"];
        assert_eq!(c7.bucket_minutes(), 10);
        assert_eq!(c7.values(), &[2.0, 4.0]);
        assert_eq!(c7.units(), LoadUnits::Raw);
        let c9 = &cells["9"];
        assert_eq!(c9.start_time().timestamp(), 1_383_264_600);
        assert_eq!(c9.values(), &[3.0, 1.0]);

        let gappy = "cell_id,timestamp,load\na,0,1\na,60000,2\na,240000,5\n";
        let cells = read_traffic_csv(gappy.as_bytes()).unwrap();
        assert_eq!(cells["a"].values(), &[1.0, 2.0, 0.0, 0.0, 5.0]);
    }

    #[test]
    fn bad_rows_name_their_line() {
        let data = "cell_id,timestamp,load\na,0,1\na,yesterday,2\n";
        assert!(matches!(read_traffic_csv(data.as_bytes()), Err(TrafficError::Record { line: 3, .. })));
        let data = "cell_id,timestamp,load\na,0,1\na,90000,2\n";
        assert!(read_traffic_csv(data.as_bytes()).is_err());
        let data = "cell_id,timestamp,load\n";
        assert!(read_traffic_csv(data.as_bytes()).is_err());
    }
}
