//! CSV ingestion and export with canonical column names.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{Cohort, FeatureVector, Label, Observation, FEATURE_NAMES, N_PQ, PQ_ITEMS, SBR_COLUMNS};
use crate::error::{Error, Result};

/// Maps canonical column names to the names used in a particular file.
/// Columns not mentioned are looked up under their canonical name.
#[derive(Debug, Clone, Default)]
pub struct ColumnMapping {
    renames: HashMap<String, String>,
}

impl ColumnMapping {
    pub fn canonical() -> Self {
        Self::default()
    }

    pub fn rename(mut self, canonical: &str, file_column: &str) -> Self {
        self.renames.insert(canonical.to_string(), file_column.to_string());
        self
    }

    fn column_for<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.renames.get(canonical).map(String::as_str).unwrap_or(canonical)
    }
}

struct Columns {
    subject: usize,
    visit: usize,
    label: usize,
    features: [usize; 22],
    hy: Option<usize>,
    sbr: Option<[usize; 4]>,
}

fn resolve(headers: &csv::StringRecord, mapping: &ColumnMapping) -> Result<Columns> {
    let lookup = |canonical: &str| -> Option<usize> {
        let want = mapping.column_for(canonical);
        headers.iter().position(|h| h.trim() == want)
    };
    let require = |canonical: &str| -> Result<usize> {
        lookup(canonical).ok_or_else(|| Error::MissingColumn(mapping.column_for(canonical).to_string()))
    };
    let mut features = [0usize; 22];
    for (slot, name) in features.iter_mut().zip(FEATURE_NAMES) {
        *slot = require(name)?;
    }
    let sbr: Vec<Option<usize>> = SBR_COLUMNS.iter().map(|c| lookup(c)).collect();
    let sbr = if sbr.iter().all(Option::is_some) {
        Some([sbr[0].unwrap(), sbr[1].unwrap(), sbr[2].unwrap(), sbr[3].unwrap()])
    } else if sbr.iter().any(Option::is_some) {
        return Err(Error::MissingColumn("SBR_RC/SBR_LC/SBR_RP/SBR_LP (all four or none)".into()));
    } else {
        None
    };
    Ok(Columns {
        subject: require("SUBJECT_ID")?,
        visit: require("VISIT")?,
        label: require("LABEL")?,
        features,
        hy: lookup("HY"),
        sbr,
    })
}

pub fn load_cohort(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<Cohort> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    read_cohort(file, mapping)
}

pub fn read_cohort<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<Cohort> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = resolve(&headers, mapping)?;
    let mut observations = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // line 1 is the header
        let row = record.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        observations.push(parse_row(&record, &cols, row, mapping)?);
    }
    Cohort::new(observations)
}

fn parse_row(
    record: &csv::StringRecord,
    cols: &Columns,
    row: usize,
    mapping: &ColumnMapping,
) -> Result<Observation> {
    let field = |idx: usize| record.get(idx).unwrap_or("").trim();
    let invalid = |canonical: &str, message: String| Error::InvalidValue {
        row,
        column: mapping.column_for(canonical).to_string(),
        message,
    };

    let subject_id = field(cols.subject).to_string();
    if subject_id.is_empty() {
        return Err(invalid("SUBJECT_ID", "empty subject identifier".into()));
    }
    let visit: u32 = field(cols.visit)
        .parse()
        .map_err(|_| invalid("VISIT", format!("'{}' is not a non-negative integer", field(cols.visit))))?;
    let label = match field(cols.label) {
        "0" | "Normal" | "HC" => Label::Normal,
        "1" | "EarlyPD" | "PD" => Label::EarlyPd,
        other => return Err(invalid("LABEL", format!("'{other}' is not 0 or 1"))),
    };

    let mut pq = [0u8; N_PQ];
    for (k, name) in PQ_ITEMS.iter().enumerate() {
        let raw = field(cols.features[k]);
        let v: u8 = raw
            .parse()
            .map_err(|_| invalid(name, format!("'{raw}' is not an integer severity")))?;
        if v > 4 {
            return Err(invalid(name, format!("severity {v} outside 0..=4")));
        }
        pq[k] = v;
    }
    let gender_raw = field(cols.features[20]);
    let gender: u8 = match gender_raw {
        "0" => 0,
        "1" => 1,
        other => return Err(invalid("GENDER", format!("'{other}' is not 0 or 1"))),
    };
    let age_raw = field(cols.features[21]);
    let age: f64 = age_raw
        .parse()
        .map_err(|_| invalid("AGE", format!("'{age_raw}' is not a number")))?;
    if !(0.0..=130.0).contains(&age) {
        return Err(invalid("AGE", format!("{age} outside [0, 130]")));
    }

    let hy_stage = match cols.hy.map(field) {
        None | Some("") => None,
        Some(raw) => Some(
            raw.parse::<u8>()
                .map_err(|_| invalid("HY", format!("'{raw}' is not an ordinal stage")))?,
        ),
    };
    let sbr = match cols.sbr {
        None => None,
        Some(idx) => {
            let raw: Vec<&str> = idx.iter().map(|&i| field(i)).collect();
            if raw.iter().all(|s| s.is_empty()) {
                None
            } else {
                let mut vals = [0.0; 4];
                for (k, s) in raw.iter().enumerate() {
                    vals[k] = s
                        .parse()
                        .map_err(|_| invalid(SBR_COLUMNS[k], format!("'{s}' is not a number")))?;
                }
                Some(vals)
            }
        }
    };

    Ok(Observation {
        subject_id,
        visit,
        features: FeatureVector::new(pq, age, gender)?,
        label,
        hy_stage,
        sbr,
    })
}

pub fn write_cohort(cohort: &Cohort, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    write_cohort_to(cohort, std::io::BufWriter::new(file))
}

/// Writes canonical CSV. HY and SBR columns appear only when some
/// observation carries them.
pub fn write_cohort_to<W: Write>(cohort: &Cohort, writer: W) -> Result<()> {
    let with_hy = cohort.has_hy();
    let with_sbr = cohort.has_sbr();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = vec!["SUBJECT_ID", "VISIT", "LABEL"];
    header.extend(FEATURE_NAMES);
    if with_hy {
        header.push("HY");
    }
    if with_sbr {
        header.extend(SBR_COLUMNS);
    }
    w.write_record(&header)?;
    for o in cohort.observations() {
        let mut rec: Vec<String> = vec![
            o.subject_id.clone(),
            o.visit.to_string(),
            o.label.code().to_string(),
        ];
        rec.extend(o.features.pq().iter().map(|s| s.to_string()));
        rec.push(o.features.gender().to_string());
        rec.push(o.features.age().to_string());
        if with_hy {
            rec.push(o.hy_stage.map(|h| h.to_string()).unwrap_or_default());
        }
        if with_sbr {
            match o.sbr {
                Some(v) => rec.extend(v.iter().map(|x| x.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), 4)),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
