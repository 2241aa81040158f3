use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::Serialize;

use super::schema::{CovariateKind, Schema};
use super::utility::compute_utility;
use crate::error::{Error, Result};

/// Category labels of one discrete covariate; label `levels[k]` has code `k + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryEncoding {
    pub covariate: String,
    pub levels: Vec<String>,
}

impl CategoryEncoding {
    pub fn categories(&self) -> usize {
        self.levels.len()
    }

    pub fn code_of(&self, label: &str) -> Option<u32> {
        self.levels
            .iter()
            .position(|l| l == label)
            .map(|p| p as u32 + 1)
    }

    pub fn label_of(&self, code: u32) -> &str {
        &self.levels[code as usize - 1]
    }
}

/// A validated trial dataset: treatment in 1..=K, a real outcome, and
/// covariates split into a continuous block and an encoded discrete block.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    ids: Vec<String>,
    treatment: Vec<usize>,
    outcome: Vec<f64>,
    benefit_risk: Option<(Vec<f64>, Vec<f64>)>,
    /// n × p1, row-major.
    continuous: Vec<f64>,
    /// n × p2, row-major, codes 1..=K_j.
    discrete: Vec<u32>,
    encodings: Vec<CategoryEncoding>,
}

/// Orders labels numerically when every label parses as a number, otherwise
/// lexicographically.
fn sort_levels(levels: &mut [String]) {
    let numeric: Option<Vec<f64>> = levels.iter().map(|l| l.trim().parse::<f64>().ok()).collect();
    if numeric.is_some() {
        levels.sort_by(|a, b| {
            let x: f64 = a.trim().parse().unwrap();
            let y: f64 = b.trim().parse().unwrap();
            x.partial_cmp(&y).unwrap_or(Ordering::Equal).then_with(|| a.cmp(b))
        });
    } else {
        levels.sort();
    }
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

fn parse_real(cell: &str, row: usize, column: &str) -> Result<f64> {
    if is_missing(cell) {
        return Err(Error::MissingValue {
            row,
            column: column.to_string(),
        });
    }
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        value: cell.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            value: cell.to_string(),
        });
    }
    Ok(v)
}

impl Dataset {
    /// Builds a dataset from already-encoded parts, checking every invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        schema: Schema,
        ids: Vec<String>,
        treatment: Vec<usize>,
        outcome: Vec<f64>,
        benefit_risk: Option<(Vec<f64>, Vec<f64>)>,
        continuous: Vec<f64>,
        discrete: Vec<u32>,
        encodings: Vec<CategoryEncoding>,
    ) -> Result<Self> {
        schema.validate()?;
        let n = treatment.len();
        let p1 = schema.n_continuous();
        let p2 = schema.n_discrete();
        if ids.len() != n || outcome.len() != n {
            return Err(Error::Dimension(format!(
                "{n} treatments but {} ids and {} outcomes",
                ids.len(),
                outcome.len()
            )));
        }
        if continuous.len() != n * p1 || discrete.len() != n * p2 {
            return Err(Error::Dimension(format!(
                "covariate blocks have {} and {} cells, expected {} and {}",
                continuous.len(),
                discrete.len(),
                n * p1,
                n * p2
            )));
        }
        if encodings.len() != p2 {
            return Err(Error::Dimension(format!(
                "{} encoding tables for {p2} discrete covariates",
                encodings.len()
            )));
        }
        if let Some((g, r)) = &benefit_risk {
            if g.len() != n || r.len() != n {
                return Err(Error::Dimension("benefit/risk length differs from n".into()));
            }
        }
        for (i, &a) in treatment.iter().enumerate() {
            if a < 1 || a > schema.arms {
                return Err(Error::TreatmentOutOfRange {
                    row: i + 1,
                    column: schema.treatment.clone(),
                    value: a.to_string(),
                    arms: schema.arms,
                });
            }
        }
        for (i, &y) in outcome.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::MissingValue {
                    row: i + 1,
                    column: schema.outcome.clone(),
                });
            }
        }
        for (cell, &v) in continuous.iter().enumerate() {
            if !v.is_finite() {
                let name = schema.continuous().nth(cell % p1).unwrap().name.clone();
                return Err(Error::MissingValue {
                    row: cell / p1 + 1,
                    column: name,
                });
            }
        }
        for (cell, &code) in discrete.iter().enumerate() {
            let enc = &encodings[cell % p2];
            if code < 1 || code as usize > enc.categories() {
                return Err(Error::Data(format!(
                    "row {}, column `{}`: code {code} outside 1..={}",
                    cell / p2 + 1,
                    enc.covariate,
                    enc.categories()
                )));
            }
        }
        for enc in &encodings {
            if enc.categories() < 2 {
                return Err(Error::Data(format!(
                    "discrete covariate `{}` has fewer than 2 categories",
                    enc.covariate
                )));
            }
        }
        Ok(Dataset {
            schema,
            ids,
            treatment,
            outcome,
            benefit_risk,
            continuous,
            discrete,
            encodings,
        })
    }

    /// Reads a comma-separated file with a header row.
    pub fn load(path: impl AsRef<Path>, schema: &Schema) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, schema)
    }

    pub fn from_reader<R: std::io::Read>(reader: R, schema: &Schema) -> Result<Self> {
        schema.validate()?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
        let column = |name: &str| -> Result<usize> {
            index.get(name).copied().ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })
        };

        let id_col = schema.id.as_deref().map(column).transpose()?;
        let treat_col = column(&schema.treatment)?;
        let (outcome_col, util_cols) = match &schema.utility {
            Some(u) => (None, Some((column(&u.benefit)?, column(&u.risk)?, u.config()?))),
            None => (Some(column(&schema.outcome)?), None),
        };
        let cont_cols: Vec<(usize, &str)> = schema
            .continuous()
            .map(|c| column(&c.name).map(|i| (i, c.name.as_str())))
            .collect::<Result<_>>()?;
        let disc_cols: Vec<(usize, &str)> = schema
            .discrete()
            .map(|c| column(&c.name).map(|i| (i, c.name.as_str())))
            .collect::<Result<_>>()?;

        let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
        let n = records.len();

        let mut ids = Vec::with_capacity(n);
        let mut treatment = Vec::with_capacity(n);
        let mut outcome = Vec::with_capacity(n);
        let mut benefit = Vec::new();
        let mut risk = Vec::new();
        let mut continuous = Vec::with_capacity(n * cont_cols.len());
        let mut raw_discrete: Vec<&str> = Vec::with_capacity(n * disc_cols.len());

        for (r, rec) in records.iter().enumerate() {
            let row = r + 1;
            let cell = |i: usize| rec.get(i).unwrap_or("");
            ids.push(match id_col {
                Some(i) => {
                    let v = cell(i);
                    if is_missing(v) {
                        return Err(Error::MissingValue {
                            row,
                            column: schema.id.clone().unwrap(),
                        });
                    }
                    v.to_string()
                }
                None => row.to_string(),
            });

            let t = cell(treat_col);
            if is_missing(t) {
                return Err(Error::MissingValue {
                    row,
                    column: schema.treatment.clone(),
                });
            }
            let a: i64 = t.parse().map_err(|_| Error::Parse {
                row,
                column: schema.treatment.clone(),
                value: t.to_string(),
            })?;
            if a < 1 || a as usize > schema.arms {
                return Err(Error::TreatmentOutOfRange {
                    row,
                    column: schema.treatment.clone(),
                    value: t.to_string(),
                    arms: schema.arms,
                });
            }
            treatment.push(a as usize);

            match (outcome_col, &util_cols) {
                (Some(i), _) => outcome.push(parse_real(cell(i), row, &schema.outcome)?),
                (None, Some((gi, ri, cfg))) => {
                    let u = schema.utility.as_ref().unwrap();
                    let g = parse_real(cell(*gi), row, &u.benefit)?;
                    let rr = parse_real(cell(*ri), row, &u.risk)?;
                    benefit.push(g);
                    risk.push(rr);
                    outcome.push(compute_utility(g, rr, cfg));
                }
                _ => unreachable!(),
            }

            for &(i, name) in &cont_cols {
                continuous.push(parse_real(cell(i), row, name)?);
            }
            for &(i, name) in &disc_cols {
                let v = cell(i);
                if is_missing(v) {
                    return Err(Error::MissingValue {
                        row,
                        column: name.to_string(),
                    });
                }
                raw_discrete.push(v);
            }
        }

        let p2 = disc_cols.len();
        let mut encodings = Vec::with_capacity(p2);
        for (j, spec) in schema.discrete().enumerate() {
            let levels = match &spec.levels {
                Some(l) => l.clone(),
                None => {
                    let distinct: BTreeSet<&str> =
                        (0..n).map(|i| raw_discrete[i * p2 + j]).collect();
                    let mut levels: Vec<String> = distinct.into_iter().map(String::from).collect();
                    sort_levels(&mut levels);
                    if levels.len() < 2 {
                        return Err(Error::Data(format!(
                            "discrete covariate `{}` takes fewer than 2 distinct values",
                            spec.name
                        )));
                    }
                    levels
                }
            };
            encodings.push(CategoryEncoding {
                covariate: spec.name.clone(),
                levels,
            });
        }
        let mut discrete = Vec::with_capacity(n * p2);
        for i in 0..n {
            for (j, enc) in encodings.iter().enumerate() {
                let label = raw_discrete[i * p2 + j];
                let code = enc.code_of(label).ok_or_else(|| Error::UnknownCategory {
                    row: i + 1,
                    column: enc.covariate.clone(),
                    value: label.to_string(),
                })?;
                discrete.push(code);
            }
        }

        let benefit_risk = util_cols.map(|_| (benefit, risk));
        Self::from_parts(
            schema.clone(),
            ids,
            treatment,
            outcome,
            benefit_risk,
            continuous,
            discrete,
            encodings,
        )
    }

    /// Writes the dataset in the same CSV layout [`Dataset::load`] reads.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(file)
    }

    pub fn write_to<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = Vec::new();
        if let Some(id) = &self.schema.id {
            header.push(id.clone());
        }
        header.push(self.schema.treatment.clone());
        match &self.schema.utility {
            Some(u) => {
                header.push(u.benefit.clone());
                header.push(u.risk.clone());
            }
            None => header.push(self.schema.outcome.clone()),
        }
        // Covariates in schema order.
        header.extend(self.schema.covariates.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;

        let p1 = self.n_continuous();
        let p2 = self.n_discrete();
        for i in 0..self.n() {
            let mut rec: Vec<String> = Vec::with_capacity(header.len());
            if self.schema.id.is_some() {
                rec.push(self.ids[i].clone());
            }
            rec.push(self.treatment[i].to_string());
            match &self.benefit_risk {
                Some((g, r)) => {
                    rec.push(g[i].to_string());
                    rec.push(r[i].to_string());
                }
                None => rec.push(self.outcome[i].to_string()),
            }
            let (mut jc, mut jd) = (0, 0);
            for c in &self.schema.covariates {
                match c.kind {
                    CovariateKind::Continuous => {
                        rec.push(self.continuous[i * p1 + jc].to_string());
                        jc += 1;
                    }
                    CovariateKind::Discrete => {
                        let code = self.discrete[i * p2 + jd];
                        rec.push(self.encodings[jd].label_of(code).to_string());
                        jd += 1;
                    }
                }
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Encoding tables as CSV rows `(covariate, label, code)`.
    pub fn write_encodings(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["covariate", "label", "code"])?;
        for enc in &self.encodings {
            for (k, l) in enc.levels.iter().enumerate() {
                w.write_record([enc.covariate.as_str(), l.as_str(), &(k + 1).to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.treatment.len()
    }

    pub fn arms(&self) -> usize {
        self.schema.arms
    }

    pub fn n_continuous(&self) -> usize {
        self.schema.n_continuous()
    }

    pub fn n_discrete(&self) -> usize {
        self.schema.n_discrete()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn treatment(&self) -> &[usize] {
        &self.treatment
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn continuous_row(&self, i: usize) -> &[f64] {
        let p1 = self.n_continuous();
        &self.continuous[i * p1..(i + 1) * p1]
    }

    pub fn discrete_row(&self, i: usize) -> &[u32] {
        let p2 = self.n_discrete();
        &self.discrete[i * p2..(i + 1) * p2]
    }

    pub fn continuous_column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let p1 = self.n_continuous();
        self.continuous.iter().skip(j).step_by(p1.max(1)).copied()
    }

    pub fn discrete_column(&self, j: usize) -> impl Iterator<Item = u32> + '_ {
        let p2 = self.n_discrete();
        self.discrete.iter().skip(j).step_by(p2.max(1)).copied()
    }

    pub fn encodings(&self) -> &[CategoryEncoding] {
        &self.encodings
    }

    /// Category counts K_j of the discrete covariates.
    pub fn categories(&self) -> Vec<usize> {
        self.encodings.iter().map(|e| e.categories()).collect()
    }

    /// Copy with continuous covariates centred and scaled to unit variance.
    /// Constant columns are only centred.
    pub fn standardized(&self) -> Dataset {
        let n = self.n();
        let p1 = self.n_continuous();
        let mut out = self.clone();
        for j in 0..p1 {
            let mean = self.continuous_column(j).sum::<f64>() / n as f64;
            let var = self
                .continuous_column(j)
                .map(|v| (v - mean).powi(2))
                .sum::<f64>()
                / (n.max(2) - 1) as f64;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for i in 0..n {
                out.continuous[i * p1 + j] = (self.continuous[i * p1 + j] - mean) / sd;
            }
        }
        out
    }

    /// Copy with the treatment of every subject replaced.
    pub fn with_treatment(&self, treatment: Vec<usize>) -> Result<Dataset> {
        Dataset::from_parts(
            self.schema.clone(),
            self.ids.clone(),
            treatment,
            self.outcome.clone(),
            self.benefit_risk.clone(),
            self.continuous.clone(),
            self.discrete.clone(),
            self.encodings.clone(),
        )
    }

    /// Copy restricted to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let p1 = self.n_continuous();
        let p2 = self.n_discrete();
        let pick = |v: &Vec<f64>| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Dataset {
            schema: self.schema.clone(),
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            treatment: rows.iter().map(|&i| self.treatment[i]).collect(),
            outcome: pick(&self.outcome),
            benefit_risk: self.benefit_risk.as_ref().map(|(g, r)| (pick(g), pick(r))),
            continuous: rows
                .iter()
                .flat_map(|&i| self.continuous[i * p1..(i + 1) * p1].iter().copied())
                .collect(),
            discrete: rows
                .iter()
                .flat_map(|&i| self.discrete[i * p2..(i + 1) * p2].iter().copied())
                .collect(),
            encodings: self.encodings.clone(),
        }
    }
}
