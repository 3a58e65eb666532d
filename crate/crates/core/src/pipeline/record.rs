use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column names of the household-year CSV, in emission order.
pub const COLUMNS: [&str; 21] = [
    "household_id",
    "year",
    "n_adults",
    "n_children",
    "wage_1",
    "wage_2",
    "work_1",
    "work_2",
    "childcare_1",
    "childcare_2",
    "private_exp_1",
    "private_exp_2",
    "public_exp",
    "child_exp",
    "income",
    "age_1",
    "age_2",
    "child_age_mean",
    "educ_1",
    "educ_2",
    "dwelling",
];

/// One household-year in survey units: wages in EUR per hour, time in hours
/// per week, expenditures and income in EUR per month. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawRecord {
    pub household_id: String,
    pub year: i32,
    pub n_adults: Option<f64>,
    pub n_children: Option<f64>,
    pub wage: [Option<f64>; 2],
    pub work: [Option<f64>; 2],
    pub childcare: [Option<f64>; 2],
    pub private_exp: [Option<f64>; 2],
    pub public_exp: Option<f64>,
    pub child_exp: Option<f64>,
    pub income: Option<f64>,
    pub age: [Option<f64>; 2],
    pub child_age_mean: Option<f64>,
    pub educ: [Option<f64>; 2],
    pub dwelling: Option<f64>,
}

impl RawRecord {
    /// Numeric demographic by column name.
    pub fn demographic(&self, name: &str) -> Option<Option<f64>> {
        Some(match name {
            "n_adults" => self.n_adults,
            "n_children" => self.n_children,
            "age_1" => self.age[0],
            "age_2" => self.age[1],
            "child_age_mean" => self.child_age_mean,
            "educ_1" => self.educ[0],
            "educ_2" => self.educ[1],
            "dwelling" => self.dwelling,
            "income" => self.income,
            _ => return None,
        })
    }

    fn numeric(&self) -> [Option<f64>; 19] {
        [
            self.n_adults,
            self.n_children,
            self.wage[0],
            self.wage[1],
            self.work[0],
            self.work[1],
            self.childcare[0],
            self.childcare[1],
            self.private_exp[0],
            self.private_exp[1],
            self.public_exp,
            self.child_exp,
            self.income,
            self.age[0],
            self.age[1],
            self.child_age_mean,
            self.educ[0],
            self.educ[1],
            self.dwelling,
        ]
    }

    fn from_numeric(household_id: String, year: i32, v: [Option<f64>; 19]) -> Self {
        Self {
            household_id,
            year,
            n_adults: v[0],
            n_children: v[1],
            wage: [v[2], v[3]],
            work: [v[4], v[5]],
            childcare: [v[6], v[7]],
            private_exp: [v[8], v[9]],
            public_exp: v[10],
            child_exp: v[11],
            income: v[12],
            age: [v[13], v[14]],
            child_age_mean: v[15],
            educ: [v[16], v[17]],
            dwelling: v[18],
        }
    }
}

/// Parses household-year records. Every column of [`COLUMNS`] must be
/// present in the header; extra columns are ignored. Empty cells are missing.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(false).from_reader(reader);
    let mut rows = rdr.records();
    let Some(header) = rows.next() else {
        return Ok(Vec::new());
    };
    let header = header?;
    let idx: Vec<usize> = COLUMNS
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h.trim() == *c)
                .ok_or_else(|| Error::Header(format!("missing column {c}")))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (n, row) in rows.enumerate() {
        let line = n + 2;
        let row = row?;
        let cell = |k: usize| row.get(idx[k]).unwrap_or("").trim();
        let id = cell(0).to_string();
        if id.is_empty() {
            return Err(Error::Malformed {
                row: line,
                column: COLUMNS[0].into(),
                message: "empty household id".into(),
            });
        }
        let year = cell(1).parse::<i32>().map_err(|e| Error::Malformed {
            row: line,
            column: COLUMNS[1].into(),
            message: e.to_string(),
        })?;
        let mut v = [None; 19];
        for (k, slot) in v.iter_mut().enumerate() {
            let s = cell(k + 2);
            if !s.is_empty() {
                let x = s.parse::<f64>().map_err(|e| Error::Malformed {
                    row: line,
                    column: COLUMNS[k + 2].into(),
                    message: format!("{s:?}: {e}"),
                })?;
                *slot = Some(x);
            }
        }
        out.push(RawRecord::from_numeric(id, year, v));
    }
    Ok(out)
}

/// Loads records from a CSV file; see [`read_records`].
pub fn load_panel(path: &Path) -> Result<Vec<RawRecord>> {
    read_records(std::fs::File::open(path)?)
}

/// Writes records with the [`COLUMNS`] header. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_records<W: Write>(writer: W, records: &[RawRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    for r in records {
        let mut row = vec![r.household_id.clone(), r.year.to_string()];
        row.extend(r.numeric().iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
