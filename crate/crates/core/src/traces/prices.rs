use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TraceError;

/// One hourly price of one market region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRow {
    pub region: String,
    pub hour: usize,
    pub price: f64,
}

/// Parses `region,hour,price` CSV with a header row.
pub fn parse_prices<R: Read>(reader: R) -> Result<Vec<PriceRow>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| TraceError::Parse { line: 1, msg: e.to_string() })?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| TraceError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row: PriceRow = rec
            .deserialize(Some(&headers))
            .map_err(|e| TraceError::Parse { line, msg: e.to_string() })?;
        if !(row.price.is_finite() && row.price >= 0.0) {
            return Err(TraceError::Parse {
                line,
                msg: format!("price {} must be finite and >= 0", row.price),
            });
        }
        out.push(row);
    }
    if out.is_empty() {
        return Err(TraceError::Empty("price file"));
    }
    Ok(out)
}

pub fn read_prices(path: &Path) -> Result<Vec<PriceRow>, TraceError> {
    let file = std::fs::File::open(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_prices(std::io::BufReader::new(file))
}

pub fn write_prices<W: Write>(rows: &[PriceRow], writer: W) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "region,hour,price")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.region, r.hour, r.price)?;
    }
    w.flush()
}

/// Per-slot prices of the IDCs mapped to `regions` (one region per IDC),
/// holding each hourly value over the slots that start within that hour.
/// Returns `[slot][idc]`.
pub fn load_prices(
    rows: &[PriceRow],
    regions: &[String],
    slot_length: f64,
    n_slots: usize,
) -> Result<Vec<Vec<f64>>, TraceError> {
    if !(slot_length.is_finite() && slot_length > 0.0) {
        return Err(TraceError::Invalid(format!("slot_length must be > 0, got {slot_length}")));
    }
    let mut table: HashMap<&str, BTreeMap<usize, f64>> = HashMap::new();
    for r in rows {
        if table.entry(&r.region).or_default().insert(r.hour, r.price).is_some() {
            return Err(TraceError::Invalid(format!(
                "region {:?} lists hour {} twice",
                r.region, r.hour
            )));
        }
    }
    let series: Vec<&BTreeMap<usize, f64>> = regions
        .iter()
        .map(|name| table.get(name.as_str()).ok_or_else(|| TraceError::UnknownRegion(name.clone())))
        .collect::<Result<_, _>>()?;
    (0..n_slots)
        .map(|t| {
            let hour = (t as f64 * slot_length / 3600.0).floor() as usize;
            regions
                .iter()
                .zip(&series)
                .map(|(name, s)| {
                    s.get(&hour).copied().ok_or_else(|| TraceError::MissingHour {
                        region: name.clone(),
                        hour,
                    })
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(region: &str, prices: &[f64]) -> Vec<PriceRow> {
        prices
            .iter()
            .enumerate()
            .map(|(hour, &price)| PriceRow {
                region: region.into(),
                hour,
                price,
            })
            .collect()
    }

    #[test]
    fn constant_day_holds_everywhere() {
        let r = rows("a", &[1.0; 24]);
        let p = load_prices(&r, &["a".into()], 20.0, 4320).unwrap();
        assert_eq!(p.len(), 4320);
        assert!(p.iter().all(|row| row == &vec![1.0]));
    }

    #[test]
    fn hourly_values_are_held() {
        let r = rows("a", &[2.0, 4.0]);
        let p = load_prices(&r, &["a".into()], 20.0, 360).unwrap();
        assert_eq!(p[179][0], 2.0);
        assert_eq!(p[180][0], 4.0);
        assert!(matches!(
            load_prices(&r, &["a".into()], 20.0, 361),
            Err(TraceError::MissingHour { hour: 2, .. })
        ));
    }

    #[test]
    fn regions_map_to_distinct_series() {
        let names = ["east", "west", "north", "south", "central"];
        let mut all = Vec::new();
        for (k, n) in names.iter().enumerate() {
            all.extend(rows(n, &[k as f64 + 1.0; 24]));
        }
        let regions: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let p = load_prices(&all, &regions, 20.0, 10).unwrap();
        assert_eq!(p[0], vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(matches!(
            load_prices(&all, &["nowhere".into()], 20.0, 10),
            Err(TraceError::UnknownRegion(_))
        ));
    }

    #[test]
    fn parse_and_write_round_trip() {
        let r = rows("a", &[0.5, 0.25]);
        let mut buf = Vec::new();
        write_prices(&r, &mut buf).unwrap();
        assert_eq!(parse_prices(buf.as_slice()).unwrap(), r);
        match parse_prices("region,hour,price\na,0,1\na,x,2\n".as_bytes()) {
            Err(TraceError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_prices("region,hour,price\na,0,-1\n".as_bytes()), Err(TraceError::Parse { line: 2, .. })));
        assert!(matches!(parse_prices("region,hour,price\n".as_bytes()), Err(TraceError::Empty(_))));
        let dup = [rows("a", &[1.0]), rows("a", &[2.0])].concat();
        assert!(load_prices(&dup, &["a".into()], 20.0, 1).is_err());
    }
}
