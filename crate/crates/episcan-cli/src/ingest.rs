//! CSV ingestion: generic `date,new_cases` files and multi-location files
//! with a `location` column, as published by common surveillance
//! repositories.

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use episcan_core::ObservationSeries;
use log::warn;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

/// What happened while reading an input file.
#[derive(Clone, Debug, Serialize)]
pub struct IngestReport {
    /// Data rows in the file (header excluded).
    pub rows_read: usize,
    /// Rows not usable for the selected series: other locations, missing or
    /// malformed dates, unreadable lines.
    pub rows_dropped: usize,
    /// Count values imputed to zero: missing, unparseable, or negative.
    pub imputed_zeros: usize,
    /// Calendar dates absent from the input and filled with zero counts.
    pub gap_filled: usize,
    /// First and last date of the resulting series.
    pub date_range: Option<[NaiveDate; 2]>,
    /// Observation spacing in days (1 = daily, 7 = weekly), inferred as the
    /// most common gap between consecutive dates.
    pub cadence_days: u32,
}

fn parse_count(raw: Option<&str>) -> (u64, bool) {
    let raw = raw.unwrap_or("").trim();
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => (v.round() as u64, false),
        _ => (0, true), // missing, unparseable, or a negative correction
    }
}

/// Most common gap between consecutive dates; ties prefer the smaller gap.
fn modal_gap(dates: &[NaiveDate]) -> i64 {
    let mut freq: BTreeMap<i64, usize> = BTreeMap::new();
    for w in dates.windows(2) {
        *freq.entry((w[1] - w[0]).num_days()).or_default() += 1;
    }
    freq.into_iter().max_by_key(|&(gap, n)| (n, -gap)).map_or(1, |(gap, _)| gap)
}

/// Read a count series from a CSV file.
///
/// Two schemas are accepted, chosen by the header row:
/// - generic: `date` and `new_cases` columns (extras ignored);
/// - multi-location: the same plus a `location` column, in which case
///   `location` must name the location to keep.
///
/// Dates may arrive unsorted; duplicates are an error. Missing dates are
/// filled with zero counts (warned and counted), so the result is gap-free
/// at the inferred cadence. Missing, unparseable, or negative count values
/// are imputed to zero and counted.
pub fn parse_counts_csv(
    path: &Path,
    location: Option<&str>,
) -> Result<(ObservationSeries, IngestReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;

    let headers = reader.headers().context("missing header row")?.clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let date_col = column("date");
    let cases_col = column("new_cases");
    let (Some(date_col), Some(cases_col)) = (date_col, cases_col) else {
        bail!(
            "no recognizable schema in {}: need `date` and `new_cases` columns, found [{}]",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(", ")
        );
    };
    let location_col = column("location");
    match (location_col, location) {
        (Some(_), None) => bail!(
            "{} has a `location` column; pass --location to select one",
            path.display()
        ),
        (None, Some(_)) => bail!(
            "--location was given but {} has no `location` column",
            path.display()
        ),
        _ => {}
    }

    let mut rows_read = 0usize;
    let mut rows_dropped = 0usize;
    let mut imputed_zeros = 0usize;
    let mut entries: Vec<(NaiveDate, u64)> = Vec::new();
    for record in reader.records() {
        rows_read += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                warn!("dropping unreadable row {rows_read}: {e}");
                rows_dropped += 1;
                continue;
            }
        };
        if let (Some(col), Some(want)) = (location_col, location) {
            if record.get(col) != Some(want) {
                rows_dropped += 1;
                continue;
            }
        }
        let date = record
            .get(date_col)
            .and_then(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok());
        let Some(date) = date else {
            warn!(
                "dropping row {rows_read}: unparseable date {:?}",
                record.get(date_col).unwrap_or("")
            );
            rows_dropped += 1;
            continue;
        };
        let (count, imputed) = parse_count(record.get(cases_col));
        if imputed {
            imputed_zeros += 1;
        }
        entries.push((date, count));
    }

    if entries.is_empty() {
        match location {
            Some(loc) => bail!("empty series: no rows for location {loc:?} in {}", path.display()),
            None => bail!("empty series: no usable rows in {}", path.display()),
        }
    }
    entries.sort_by_key(|&(date, _)| date);
    for w in entries.windows(2) {
        if w[0].0 == w[1].0 {
            bail!("duplicate date {} in {}", w[0].0, path.display());
        }
    }

    let dates_seen: Vec<NaiveDate> = entries.iter().map(|&(d, _)| d).collect();
    let cadence = modal_gap(&dates_seen);
    let mut dates: Vec<NaiveDate> = Vec::with_capacity(entries.len());
    let mut counts: Vec<u64> = Vec::with_capacity(entries.len());
    let mut gap_filled = 0usize;
    for (date, count) in entries {
        if let Some(&prev) = dates.last() {
            let gap = (date - prev).num_days();
            if gap % cadence != 0 {
                bail!(
                    "irregular spacing in {}: {} to {} is {} days, not a multiple of the {}-day cadence",
                    path.display(),
                    prev,
                    date,
                    gap,
                    cadence
                );
            }
            let mut cursor = prev + chrono::Duration::days(cadence);
            while cursor < date {
                dates.push(cursor);
                counts.push(0);
                gap_filled += 1;
                cursor += chrono::Duration::days(cadence);
            }
        }
        dates.push(date);
        counts.push(count);
    }
    if gap_filled > 0 {
        warn!("filled {gap_filled} missing dates with zero counts");
    }

    let report = IngestReport {
        rows_read,
        rows_dropped,
        imputed_zeros,
        gap_filled,
        date_range: Some([dates[0], *dates.last().unwrap()]),
        cadence_days: cadence as u32,
    };
    let obs = ObservationSeries::with_dates(counts, dates, cadence as u32)?;
    Ok((obs, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn generic_three_row_file_parses_directly() {
        let f = write_csv("date,new_cases\n2020-01-01,5\n2020-01-02,7\n2020-01-03,6\n");
        let (obs, report) = parse_counts_csv(f.path(), None).unwrap();
        assert_eq!(obs.counts(), &[5, 7, 6]);
        assert_eq!(obs.period_days(), 1);
        assert_eq!(report.rows_read, 3);
        assert_eq!(report.rows_dropped, 0);
        assert_eq!(report.imputed_zeros, 0);
        assert_eq!(
            report.date_range.unwrap()[0],
            NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
        );
    }

    #[test]
    fn location_filter_selects_one_country() {
        let f = write_csv(
            "iso_code,location,date,new_cases\n\
             KOR,South Korea,2020-02-01,2\n\
             DEU,Germany,2020-02-01,9\n\
             KOR,South Korea,2020-02-02,4\n\
             DEU,Germany,2020-02-02,11\n",
        );
        let (obs, report) = parse_counts_csv(f.path(), Some("South Korea")).unwrap();
        assert_eq!(obs.counts(), &[2, 4]);
        assert_eq!(report.rows_read, 4);
        assert_eq!(report.rows_dropped, 2);
    }

    #[test]
    fn multi_location_file_without_filter_is_an_error() {
        let f = write_csv("location,date,new_cases\nA,2020-01-01,1\n");
        let err = parse_counts_csv(f.path(), None).unwrap_err().to_string();
        assert!(err.contains("--location"), "{err}");
    }

    #[test]
    fn filter_against_generic_file_is_an_error() {
        let f = write_csv("date,new_cases\n2020-01-01,1\n");
        assert!(parse_counts_csv(f.path(), Some("Nowhere")).is_err());
    }

    #[test]
    fn unknown_location_yields_empty_series_error() {
        let f = write_csv("location,date,new_cases\nA,2020-01-01,1\n");
        let err = parse_counts_csv(f.path(), Some("B")).unwrap_err().to_string();
        assert!(err.contains("empty series"), "{err}");
    }

    #[test]
    fn negative_correction_is_imputed_zero() {
        let f = write_csv("date,new_cases\n2020-01-01,5\n2020-01-02,-3\n2020-01-03,6\n");
        let (obs, report) = parse_counts_csv(f.path(), None).unwrap();
        assert_eq!(obs.counts(), &[5, 0, 6]);
        assert_eq!(report.imputed_zeros, 1);
    }

    #[test]
    fn missing_value_is_imputed_zero() {
        let f = write_csv("date,new_cases\n2020-01-01,5\n2020-01-02,\n2020-01-03,6\n");
        let (obs, report) = parse_counts_csv(f.path(), None).unwrap();
        assert_eq!(obs.counts(), &[5, 0, 6]);
        assert_eq!(report.imputed_zeros, 1);
    }

    #[test]
    fn date_gaps_are_filled_with_zeros() {
        let f = write_csv("date,new_cases\n2020-01-01,5\n2020-01-02,7\n2020-01-05,6\n");
        let (obs, report) = parse_counts_csv(f.path(), None).unwrap();
        assert_eq!(obs.counts(), &[5, 7, 0, 0, 6]);
        assert_eq!(report.gap_filled, 2);
        assert_eq!(report.cadence_days, 1);
    }

    #[test]
    fn unsorted_dates_are_sorted() {
        let f = write_csv("date,new_cases\n2020-01-03,6\n2020-01-01,5\n2020-01-02,7\n");
        let (obs, _) = parse_counts_csv(f.path(), None).unwrap();
        assert_eq!(obs.counts(), &[5, 7, 6]);
    }

    #[test]
    fn duplicate_dates_are_an_error() {
        let f = write_csv("date,new_cases\n2020-01-01,5\n2020-01-01,7\n");
        assert!(parse_counts_csv(f.path(), None).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn weekly_cadence_is_inferred() {
        let f = write_csv(
            "date,new_cases\n2021-01-04,5\n2021-01-11,7\n2021-01-18,6\n2021-02-01,9\n",
        );
        let (obs, report) = parse_counts_csv(f.path(), None).unwrap();
        assert_eq!(report.cadence_days, 7);
        assert_eq!(obs.counts(), &[5, 7, 6, 0, 9]);
        assert_eq!(obs.period_days(), 7);
        assert_eq!(report.gap_filled, 1);
    }

    #[test]
    fn irregular_spacing_is_an_error() {
        let f = write_csv("date,new_cases\n2021-01-04,5\n2021-01-11,7\n2021-01-14,6\n");
        assert!(parse_counts_csv(f.path(), None).unwrap_err().to_string().contains("irregular"));
    }

    #[test]
    fn unrecognizable_schema_is_an_error() {
        let f = write_csv("day,cases\n1,5\n");
        let err = parse_counts_csv(f.path(), None).unwrap_err().to_string();
        assert!(err.contains("no recognizable schema"), "{err}");
    }

    #[test]
    fn bad_dates_are_dropped_with_count() {
        let f = write_csv("date,new_cases\n2020-01-01,5\nnot-a-date,7\n2020-01-02,6\n");
        let (obs, report) = parse_counts_csv(f.path(), None).unwrap();
        assert_eq!(obs.counts(), &[5, 6]);
        assert_eq!(report.rows_dropped, 1);
        assert_eq!(report.rows_read, 3);
    }
}
