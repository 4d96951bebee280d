use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::schema::Schema;
use crate::error::{Error, Result};

/// One record in composite-index form. `y` is absent for apply-mode data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Record {
    pub d: usize,
    pub x: usize,
    pub y: Option<usize>,
}

impl Record {
    pub fn new(d: usize, x: usize, y: usize) -> Self {
        Record { d, x, y: Some(y) }
    }

    pub fn unlabeled(d: usize, x: usize) -> Self {
        Record { d, x, y: None }
    }
}

/// A categorical dataset bound to a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    records: Vec<Record>,
}

impl Dataset {
    pub fn new(schema: Schema, records: Vec<Record>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, r) in records.iter().enumerate() {
            let y_ok = r.y.is_none_or(|y| y < 2);
            if r.d >= schema.d_card() || r.x >= schema.x_card() || !y_ok {
                return Err(Error::Parse { row: i, msg: format!("index out of range: {r:?}") });
            }
        }
        Ok(Dataset { schema, records })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.records.iter().all(|r| r.y.is_some())
    }

    /// Drops outcomes, producing apply-mode data.
    pub fn without_outcomes(&self) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: self.records.iter().map(|r| Record::unlabeled(r.d, r.x)).collect(),
        }
    }

    /// Writes the schema columns (D, X, and Y when every record has one) with a
    /// header row. Multi-variable D and X are written back as one column per variable.
    pub fn write_delimited<W: Write>(
        &self,
        writer: W,
        delimiter: u8,
        stream_index: bool,
    ) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        let labeled = self.is_labeled();
        let mut header: Vec<String> = Vec::new();
        for v in self.schema.d_vars().iter().chain(self.schema.x_vars()) {
            header.push(v.column().to_string());
        }
        if labeled {
            header.push(self.schema.y_var().column().to_string());
        }
        if stream_index {
            header.push("stream_index".into());
        }
        w.write_record(&header)?;
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        for (i, r) in self.records.iter().enumerate() {
            row.clear();
            for (v, k) in self.schema.d_vars().iter().zip(self.schema.d_digits(r.d)) {
                row.push(v.alphabet.categories[k].clone());
            }
            for (v, k) in self.schema.x_vars().iter().zip(self.schema.x_digits(r.x)) {
                row.push(v.alphabet.categories[k].clone());
            }
            if labeled {
                row.push(self.schema.y_label(r.y.unwrap_or(0)).to_string());
            }
            if stream_index {
                row.push(i.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Comparison applied to a raw column before quantization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RowFilter {
    In { column: String, values: Vec<String> },
    NotIn { column: String, values: Vec<String> },
    Between { column: String, min: f64, max: f64 },
}

impl RowFilter {
    fn column(&self) -> &str {
        match self {
            RowFilter::In { column, .. }
            | RowFilter::NotIn { column, .. }
            | RowFilter::Between { column, .. } => column,
        }
    }

    fn keep(&self, raw: &str) -> bool {
        let raw = raw.trim();
        match self {
            RowFilter::In { values, .. } => values.iter().any(|v| v == raw),
            RowFilter::NotIn { values, .. } => !values.iter().any(|v| v == raw),
            RowFilter::Between { min, max, .. } => {
                raw.parse::<f64>().is_ok_and(|v| v >= *min && v <= *max)
            }
        }
    }
}

/// How delimiter-separated input is read and encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Column names for header-less files; when set the first line is data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filters: Vec<RowFilter>,
    /// Skip rows whose values cannot be encoded instead of failing.
    #[serde(default)]
    pub skip_invalid: bool,
}

fn default_delimiter() -> char {
    ','
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            delimiter: default_delimiter(),
            column_names: None,
            filters: Vec::new(),
            skip_invalid: false,
        }
    }
}

/// Reads delimiter-separated records and encodes them with the schema's quantizers.
/// A missing outcome column (or an empty outcome value) yields unlabeled records.
pub fn read_delimited<R: Read>(reader: R, schema: &Schema, opts: &IngestOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter as u8)
        .has_headers(opts.column_names.is_none())
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header: Vec<String> = match &opts.column_names {
        Some(names) => names.clone(),
        None => rdr.headers()?.iter().map(str::to_string).collect(),
    };
    let find = |name: &str| header.iter().position(|h| h == name);

    let mut d_cols = Vec::new();
    for v in schema.d_vars() {
        d_cols.push(find(v.column()).ok_or_else(|| Error::UnknownVariable(v.column().into()))?);
    }
    let mut x_cols = Vec::new();
    for v in schema.x_vars() {
        x_cols.push(find(v.column()).ok_or_else(|| Error::UnknownVariable(v.column().into()))?);
    }
    let y_col = find(schema.y_var().column());
    let filters: Vec<(usize, &RowFilter)> = opts
        .filters
        .iter()
        .map(|f| find(f.column()).map(|c| (c, f)).ok_or_else(|| Error::UnknownVariable(f.column().into())))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut d_digits = vec![0; d_cols.len()];
    let mut x_digits = vec![0; x_cols.len()];
    'rows: for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        if !filters.iter().all(|(c, f)| f.keep(field(*c))) {
            continue;
        }
        for (slot, (v, &c)) in schema.d_vars().iter().zip(&d_cols).enumerate() {
            match v.encode(field(c)) {
                Some(k) => d_digits[slot] = k,
                None if opts.skip_invalid => continue 'rows,
                None => {
                    return Err(Error::Parse {
                        row,
                        msg: format!("value `{}` not in alphabet `{}`", field(c), v.name()),
                    })
                }
            }
        }
        for (slot, (v, &c)) in schema.x_vars().iter().zip(&x_cols).enumerate() {
            match v.encode(field(c)) {
                Some(k) => x_digits[slot] = k,
                None if opts.skip_invalid => continue 'rows,
                None => {
                    return Err(Error::Parse {
                        row,
                        msg: format!("value `{}` not in alphabet `{}`", field(c), v.name()),
                    })
                }
            }
        }
        let y = match y_col.map(field) {
            None | Some("") => None,
            Some(raw) => match schema.y_var().encode(raw) {
                Some(k) => Some(k),
                None if opts.skip_invalid => continue 'rows,
                None => {
                    return Err(Error::Parse {
                        row,
                        msg: format!("value `{raw}` not in outcome alphabet"),
                    })
                }
            },
        };
        records.push(Record { d: schema.d_from_digits(&d_digits), x: schema.x_from_digits(&x_digits), y });
    }
    Dataset::new(schema.clone(), records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::schema::{Alphabet, Quantizer, Role, Variable};

    fn schema() -> Schema {
        Schema::new(vec![
            Variable::new(Alphabet::new("race", &["A", "C"], false).unwrap(), Role::D),
            Variable::new(Alphabet::new("priors", &["0", "1-3", ">3"], true).unwrap(), Role::X)
                .with_quantizer(Quantizer::Bins {
                    edges: vec![1.0, 4.0],
                    labels: vec!["0".into(), "1-3".into(), ">3".into()],
                }),
            Variable::new(Alphabet::new("recid", &["0", "1"], false).unwrap(), Role::Y),
        ])
        .unwrap()
    }

    #[test]
    fn reads_with_quantizer_and_filter() {
        let text = "race,priors,recid,other\nA,0,1,x\nC,5,0,y\nB,2,1,z\nC,2,,w\n";
        let opts = IngestOptions {
            filters: vec![RowFilter::In { column: "race".into(), values: vec!["A".into(), "C".into()] }],
            ..Default::default()
        };
        let ds = read_delimited(text.as_bytes(), &schema(), &opts).unwrap();
        assert_eq!(
            ds.records(),
            &[Record::new(0, 0, 1), Record::new(1, 2, 0), Record::unlabeled(1, 1)]
        );
        assert!(!ds.is_labeled());
    }

    #[test]
    fn missing_outcome_column_gives_unlabeled() {
        let text = "race,priors\nA,0\n";
        let ds = read_delimited(text.as_bytes(), &schema(), &IngestOptions::default()).unwrap();
        assert_eq!(ds.records(), &[Record::unlabeled(0, 0)]);
    }

    #[test]
    fn unknown_value_is_an_error_unless_skipped() {
        let text = "race,priors,recid\nZ,0,1\nA,1,0\n";
        assert!(read_delimited(text.as_bytes(), &schema(), &IngestOptions::default()).is_err());
        let opts = IngestOptions { skip_invalid: true, ..Default::default() };
        let ds = read_delimited(text.as_bytes(), &schema(), &opts).unwrap();
        assert_eq!(ds.len(), 1);
    }

    #[test]
    fn empty_input_is_empty_dataset() {
        let text = "race,priors,recid\n";
        let err = read_delimited(text.as_bytes(), &schema(), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
    }

    #[test]
    fn write_then_read_is_identity_on_labels() {
        let s = schema();
        let ds = Dataset::new(s.clone(), vec![Record::new(0, 2, 1), Record::new(1, 1, 0)]).unwrap();
        let mut buf = Vec::new();
        ds.write_delimited(&mut buf, b',', false).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "race,priors,recid\nA,>3,1\nC,1-3,0\n");
        // labels are already categories; drop the quantizer to read them back
        let plain = s.without_quantizers();
        let back = read_delimited(buf.as_slice(), &plain, &IngestOptions::default()).unwrap();
        assert_eq!(back.records(), ds.records());
    }
}
