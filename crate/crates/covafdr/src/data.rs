//! Test-record data model and tabular ingestion.
//!
//! A dataset is an ordered collection of hypothesis tests, each carrying an
//! id, a p-value, and a real covariate. When the input provides z-scores
//! instead of p-values, the one-sided upper-tail conversion p = 1 − F₀(z) is
//! applied at load time. All p-values are clipped once into
//! [`P_CLIP`, 1 − `P_CLIP`] so that downstream log-density evaluations stay
//! finite.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::special::normal_upper_tail;

/// Clipping bound applied to every ingested p-value.
pub const P_CLIP: f64 = 1e-12;

/// Null reference distribution for the test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NullDist {
    /// Z ~ N(0, 1) under the null.
    #[default]
    StandardNormal,
}

/// One hypothesis test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestRecord {
    pub id: String,
    /// p-value in [P_CLIP, 1 − P_CLIP].
    pub p: f64,
    /// External covariate.
    pub x: f64,
    /// Original test statistic, when the input supplied one.
    pub z: Option<f64>,
}

/// Ordered, immutable collection of test records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<TestRecord>,
}

impl Dataset {
    /// Validates uniqueness of ids and non-emptiness; clips p-values.
    pub fn new(mut records: Vec<TestRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::input("dataset must contain at least one record"));
        }
        let mut seen = HashSet::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if !seen.insert(r.id.clone()) {
                return Err(Error::input(format!(
                    "duplicate id `{}` at record {}",
                    r.id,
                    i + 1
                )));
            }
            if !r.p.is_finite() || !(0.0..=1.0).contains(&r.p) {
                return Err(Error::input(format!(
                    "p-value {} out of [0,1] at record {}",
                    r.p,
                    i + 1
                )));
            }
            if !r.x.is_finite() {
                return Err(Error::input(format!(
                    "non-finite covariate at record {}",
                    i + 1
                )));
            }
        }
        for r in &mut records {
            r.p = clip_p(r.p);
        }
        Ok(Dataset { records })
    }

    pub fn records(&self) -> &[TestRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn p_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.p).collect()
    }

    pub fn covariates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.x).collect()
    }
}

/// Clip a probability into [P_CLIP, 1 − P_CLIP].
pub fn clip_p(p: f64) -> f64 {
    p.clamp(P_CLIP, 1.0 - P_CLIP)
}

/// One-sided upper-tail p-value p = 1 − F₀(z).
///
/// Large z is evidence against the null, so the map is strictly decreasing.
/// The result is unclipped; ingestion clips.
pub fn z_to_p(z: f64, null_dist: NullDist) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::input(format!("non-finite z-score: {z}")));
    }
    match null_dist {
        NullDist::StandardNormal => Ok(normal_upper_tail(z)),
    }
}

/// Column mapping for tabular input.
#[derive(Debug, Clone)]
pub struct Schema {
    pub id_col: String,
    pub x_col: String,
    pub value_col: ValueColumn,
}

#[derive(Debug, Clone)]
pub enum ValueColumn {
    PValue(String),
    ZScore(String),
}

impl Schema {
    /// Standard schema: columns `id`, `x`, and one of `p` | `z`.
    pub fn detect(header_fields: &[&str]) -> Result<Schema> {
        let has = |name: &str| header_fields.contains(&name);
        if !has("id") || !has("x") {
            return Err(Error::parse(
                1,
                format!(
                    "header must contain `id` and `x` columns, got: {}",
                    header_fields.join(",")
                ),
            ));
        }
        let value_col = match (has("p"), has("z")) {
            (true, false) => ValueColumn::PValue("p".into()),
            (false, true) => ValueColumn::ZScore("z".into()),
            (true, true) => {
                return Err(Error::parse(1, "header contains both `p` and `z` columns"))
            }
            (false, false) => {
                return Err(Error::parse(1, "header must contain a `p` or `z` column"))
            }
        };
        Ok(Schema {
            id_col: "id".into(),
            x_col: "x".into(),
            value_col,
        })
    }
}

fn detect_delimiter(header: &str) -> char {
    if header.contains('\t') {
        '\t'
    } else {
        ','
    }
}

fn parse_field(fields: &[&str], idx: usize, row: usize, what: &str) -> Result<f64> {
    let raw = fields
        .get(idx)
        .ok_or_else(|| Error::parse(row, format!("missing {what} field")))?;
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(row, format!("non-numeric {what} field `{raw}`")))
}

/// Parse a delimiter-separated stream (comma or tab, auto-detected from the
/// header line) into a [`Dataset`], preserving row order.
///
/// If the schema maps a z column, p-values are computed via [`z_to_p`] with
/// the given null distribution; otherwise the p column must lie in [0, 1]
/// before clipping. Row numbers in errors are 1-based and count the header.
pub fn parse_dataset<R: BufRead>(
    source: R,
    schema: Option<Schema>,
    null_dist: NullDist,
) -> Result<Dataset> {
    let mut lines = source.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty input"))??;
    let delim = detect_delimiter(&header);
    let header_fields: Vec<&str> = header.split(delim).map(str::trim).collect();
    let schema = match schema {
        Some(s) => s,
        None => Schema::detect(&header_fields)?,
    };

    let col_index = |name: &str| -> Result<usize> {
        header_fields
            .iter()
            .position(|f| *f == name)
            .ok_or_else(|| Error::parse(1, format!("missing column `{name}` in header")))
    };
    let id_idx = col_index(&schema.id_col)?;
    let x_idx = col_index(&schema.x_col)?;
    let (value_idx, value_is_z) = match &schema.value_col {
        ValueColumn::PValue(c) => (col_index(c)?, false),
        ValueColumn::ZScore(c) => (col_index(c)?, true),
    };

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in lines.enumerate() {
        let row = lineno + 2; // 1-based, after the header
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delim).collect();
        let id = fields
            .get(id_idx)
            .ok_or_else(|| Error::parse(row, "missing id field"))?
            .trim()
            .to_string();
        if id.is_empty() {
            return Err(Error::parse(row, "empty id field"));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::parse(row, format!("duplicate id `{id}`")));
        }
        let x = parse_field(&fields, x_idx, row, "covariate")?;
        if !x.is_finite() {
            return Err(Error::parse(row, "non-finite covariate"));
        }
        let (p, z) = if value_is_z {
            let z = parse_field(&fields, value_idx, row, "z-score")?;
            let p = z_to_p(z, null_dist).map_err(|e| Error::parse(row, e.to_string()))?;
            (p, Some(z))
        } else {
            let p = parse_field(&fields, value_idx, row, "p-value")?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::parse(row, format!("p-value {p} outside [0,1]")));
            }
            (p, None)
        };
        records.push(TestRecord {
            id,
            p: clip_p(p),
            x,
            z,
        });
    }
    if records.is_empty() {
        return Err(Error::parse(2, "no data rows"));
    }
    Ok(Dataset { records })
}

/// Serialize a dataset as comma-separated text with 17 significant digits.
///
/// Datasets whose records all carry z-scores round-trip through the z column;
/// otherwise the clipped p column is written.
pub fn write_dataset<W: Write>(dataset: &Dataset, mut w: W) -> Result<()> {
    let all_z = dataset.records().iter().all(|r| r.z.is_some());
    if all_z {
        writeln!(w, "id,x,z")?;
        for r in dataset.records() {
            writeln!(w, "{},{:.16e},{:.16e}", r.id, r.x, r.z.unwrap())?;
        }
    } else {
        writeln!(w, "id,x,p")?;
        for r in dataset.records() {
            writeln!(w, "{},{:.16e},{:.16e}", r.id, r.x, r.p)?;
        }
    }
    Ok(())
}
