//! Aggregation of result files into per-cell means with normal-approximation 95% intervals.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::trial::{Method, SweepRecord, CSV_HEADER};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Aggregate of one (sweep, value, method, bits) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub sweep_name: String,
    pub sweep_value: f64,
    pub method: Method,
    pub bits: u32,
    pub n: usize,
    pub mean_wsr: f64,
    pub std_wsr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_iterations: f64,
}

impl SummaryRow {
    pub fn ci_half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// Mean, sample standard deviation and 95% interval of `values`. One value gives a zero-width
/// interval.
pub fn mean_ci(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let half = Z95 * std / n.sqrt();
    (mean, std, mean - half, mean + half)
}

/// Groups records by cell; output order is by sweep name, value, method, bits and does not
/// depend on input order.
pub fn summarize_records(records: &[SweepRecord]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(String, u64, Method, u32), Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        // order-preserving key for finite floats
        let bits = r.sweep_value.to_bits();
        let key = if r.sweep_value.is_sign_negative() { !bits } else { bits | (1 << 63) };
        cells.entry((r.sweep_name.clone(), key, r.method, r.bits)).or_default().push(r);
    }
    cells
        .into_values()
        .map(|rows| {
            let mut wsr: Vec<f64> = rows.iter().map(|r| r.wsr_bps_hz).collect();
            // summation order independent of input order
            wsr.sort_by(f64::total_cmp);
            let mut its: Vec<f64> = rows.iter().map(|r| r.outer_iterations as f64).collect();
            its.sort_by(f64::total_cmp);
            let (mean, std, lo, hi) = mean_ci(&wsr);
            let first = rows[0];
            SummaryRow {
                sweep_name: first.sweep_name.clone(),
                sweep_value: first.sweep_value,
                method: first.method,
                bits: first.bits,
                n: rows.len(),
                mean_wsr: mean,
                std_wsr: std,
                ci_low: lo,
                ci_high: hi,
                mean_iterations: its.iter().sum::<f64>() / its.len() as f64,
            }
        })
        .collect()
}

/// Parses a result file, checking the header column by column.
pub fn read_records<R: Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.clone();
    for (i, expected) in CSV_HEADER.iter().enumerate() {
        if header.get(i) != Some(*expected) {
            return Err(Error::Schema { column: expected.to_string() });
        }
    }
    if header.len() > CSV_HEADER.len() {
        return Err(Error::Schema { column: header[CSV_HEADER.len()].to_string() });
    }
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let rec: SweepRecord = row.deserialize(Some(&header)).map_err(|e| {
            let field = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.field(),
                _ => None,
            };
            let column = field
                .and_then(|f| CSV_HEADER.get(f as usize))
                .map_or_else(|| format!("row {}", line + 2), |c| c.to_string());
            Error::Schema { column }
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn summarize(path: &Path) -> Result<Vec<SummaryRow>> {
    let file = std::fs::File::open(path)?;
    Ok(summarize_records(&read_records(std::io::BufReader::new(file))?))
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn rec(value: f64, method: Method, wsr: f64) -> SweepRecord {
        SweepRecord {
            sweep_name: "nmse".into(),
            sweep_value: value,
            method,
            bits: 2,
            seed: 1,
            wsr_bps_hz: wsr,
            outer_iterations: 3,
            wall_time_ms: 0.0,
        }
    }

    #[test]
    fn single_and_equal_records_have_zero_width() {
        let rows = summarize_records(&[rec(0.0, Method::Mm, 2.5)]);
        assert_eq!((rows[0].mean_wsr, rows[0].ci_half_width()), (2.5, 0.0));
        let rows = summarize_records(&[rec(0.0, Method::Mm, 2.5), rec(0.0, Method::Mm, 2.5)]);
        assert_eq!(rows[0].ci_half_width(), 0.0);
    }

    #[test]
    fn synthetic_mean_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dist = Normal::new(4.0, 1.5).unwrap();
        let records: Vec<_> = (0..1000).map(|_| rec(0.1, Method::Sca, dist.sample(&mut rng))).collect();
        let row = &summarize_records(&records)[0];
        let se = 1.5 / 1000f64.sqrt();
        assert!((row.mean_wsr - 4.0).abs() < 3.0 * se);
        assert!((row.ci_half_width() - Z95 * row.std_wsr / 1000f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ordering_is_input_order_invariant() {
        let mut records = vec![
            rec(0.1, Method::NoIrs, 1.0),
            rec(-5.0, Method::Mm, 2.0),
            rec(0.1, Method::Mm, 3.0),
            rec(0.0, Method::Sca, 4.0),
            rec(0.1, Method::Mm, 3.5),
        ];
        let a = summarize_records(&records);
        records.reverse();
        assert_eq!(a, summarize_records(&records));
        let values: Vec<f64> = a.iter().map(|r| r.sweep_value).collect();
        assert_eq!(values, vec![-5.0, 0.0, 0.1, 0.1]);
    }

    #[test]
    fn schema_mismatch_names_the_column() {
        let text = "sweep_name,sweep_value,method,bits,seed,wsr,outer_iterations,wall_time_ms\n";
        match read_records(text.as_bytes()) {
            Err(Error::Schema { column }) => assert_eq!(column, "wsr_bps_hz"),
            other => panic!("{other:?}"),
        }
        let text = format!("{}\nnmse,0.1,MM,2,1,oops,3,0\n", CSV_HEADER.join(","));
        match read_records(text.as_bytes()) {
            Err(Error::Schema { column }) => assert_eq!(column, "wsr_bps_hz"),
            other => panic!("{other:?}"),
        }
    }
}
