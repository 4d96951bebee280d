use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Separator used for composite labels of multi-variable D and X cells.
pub const COMPOSITE_SEP: &str = "|";

/// Role of a variable in the pre-processing problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    /// Protected (discriminatory) attribute, retained as-is.
    D,
    /// Decision attribute, randomized by the transform.
    X,
    /// Binary outcome, randomized by the transform.
    Y,
}

/// A named finite categorical domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alphabet {
    pub name: String,
    pub categories: Vec<String>,
    #[serde(default)]
    pub ordinal: bool,
}

impl Alphabet {
    pub fn new<S: Into<String>>(name: S, categories: &[&str], ordinal: bool) -> Result<Self> {
        let a = Alphabet {
            name: name.into(),
            categories: categories.iter().map(|c| c.to_string()).collect(),
            ordinal,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::InvalidSchema(format!("alphabet `{}` has no categories", self.name)));
        }
        let mut seen = HashSet::new();
        for c in &self.categories {
            if !seen.insert(c.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "alphabet `{}` repeats category `{c}`",
                    self.name
                )));
            }
            if c.contains(COMPOSITE_SEP) {
                return Err(Error::InvalidSchema(format!(
                    "category `{c}` of `{}` contains the composite separator",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }
}

/// Maps a raw column value onto a category label at ingestion time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantizer {
    /// Lookup table from raw strings to labels, with an optional fallback label.
    Map {
        map: BTreeMap<String, String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<String>,
    },
    /// Numeric binning: value `v` falls in the first bin whose upper edge exceeds it.
    /// `labels.len()` must be `edges.len() + 1`.
    Bins { edges: Vec<f64>, labels: Vec<String> },
    /// Numeric value divided by `width` and floored, then looked up as an integer label,
    /// with values at or above `cap` collapsed into `cap_label` and values below `floor`
    /// collapsed into `floor_label`.
    Floor {
        width: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor_label: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap_label: Option<String>,
    },
}

impl Quantizer {
    pub fn apply(&self, raw: &str) -> Option<String> {
        let raw = raw.trim();
        match self {
            Quantizer::Map { map, default } => map.get(raw).cloned().or_else(|| default.clone()),
            Quantizer::Bins { edges, labels } => {
                let v: f64 = raw.parse().ok()?;
                let i = edges.iter().position(|&e| v < e).unwrap_or(edges.len());
                labels.get(i).cloned()
            }
            Quantizer::Floor { width, floor, floor_label, cap, cap_label } => {
                let v: f64 = raw.parse().ok()?;
                if let (Some(c), Some(l)) = (cap, cap_label) {
                    if v >= *c {
                        return Some(l.clone());
                    }
                }
                if let (Some(f), Some(l)) = (floor, floor_label) {
                    if v < *f {
                        return Some(l.clone());
                    }
                }
                let q = (v / width).floor() * width;
                Some(format!("{}", q as i64))
            }
        }
    }
}

/// A schema variable: alphabet, role, source column and optional quantizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    #[serde(flatten)]
    pub alphabet: Alphabet,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantizer: Option<Quantizer>,
}

impl Variable {
    pub fn new(alphabet: Alphabet, role: Role) -> Self {
        Variable { alphabet, role, column: None, quantizer: None }
    }

    pub fn with_column<S: Into<String>>(mut self, column: S) -> Self {
        self.column = Some(column.into());
        self
    }

    pub fn with_quantizer(mut self, q: Quantizer) -> Self {
        self.quantizer = Some(q);
        self
    }

    pub fn name(&self) -> &str {
        &self.alphabet.name
    }

    pub fn column(&self) -> &str {
        self.column.as_deref().unwrap_or(&self.alphabet.name)
    }

    pub fn card(&self) -> usize {
        self.alphabet.len()
    }

    /// Raw column value to category index.
    pub fn encode(&self, raw: &str) -> Option<usize> {
        let label = match &self.quantizer {
            Some(q) => q.apply(raw)?,
            None => raw.trim().to_string(),
        };
        self.alphabet.index_of(&label)
    }
}

/// Variables in canonical order (all D, then all X, then Y) with the product
/// layout used by every dense array in the crate: cell = (d * |X| + x) * |Y| + y.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    variables: Vec<Variable>,
    n_d_vars: usize,
    n_x_vars: usize,
    d_card: usize,
    x_card: usize,
}

impl Schema {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        let mut names = HashSet::new();
        for v in &variables {
            v.alphabet.validate()?;
            if !names.insert(v.name().to_string()) {
                return Err(Error::InvalidSchema(format!("duplicate variable `{}`", v.name())));
            }
        }
        let mut ordered: Vec<Variable> = Vec::with_capacity(variables.len());
        for role in [Role::D, Role::X, Role::Y] {
            ordered.extend(variables.iter().filter(|v| v.role == role).cloned());
        }
        let n_d_vars = ordered.iter().filter(|v| v.role == Role::D).count();
        let n_x_vars = ordered.iter().filter(|v| v.role == Role::X).count();
        let ys: Vec<&Variable> = ordered.iter().filter(|v| v.role == Role::Y).collect();
        if n_d_vars == 0 {
            return Err(Error::InvalidSchema("at least one D variable is required".into()));
        }
        if n_x_vars == 0 {
            return Err(Error::InvalidSchema("at least one X variable is required".into()));
        }
        if ys.len() != 1 {
            return Err(Error::InvalidSchema(format!(
                "exactly one Y variable is required, found {}",
                ys.len()
            )));
        }
        if ys[0].card() != 2 {
            return Err(Error::InvalidSchema(format!(
                "outcome `{}` must be binary, has {} categories",
                ys[0].name(),
                ys[0].card()
            )));
        }
        let d_card = ordered[..n_d_vars].iter().map(Variable::card).product();
        let x_card = ordered[n_d_vars..n_d_vars + n_x_vars].iter().map(Variable::card).product();
        Ok(Schema { variables: ordered, n_d_vars, n_x_vars, d_card, x_card })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    /// Same schema reading category labels directly (for already-encoded files).
    pub fn without_quantizers(&self) -> Schema {
        let mut s = self.clone();
        for v in &mut s.variables {
            v.quantizer = None;
        }
        s
    }

    pub fn d_vars(&self) -> &[Variable] {
        &self.variables[..self.n_d_vars]
    }

    pub fn x_vars(&self) -> &[Variable] {
        &self.variables[self.n_d_vars..self.n_d_vars + self.n_x_vars]
    }

    pub fn y_var(&self) -> &Variable {
        &self.variables[self.n_d_vars + self.n_x_vars]
    }

    pub fn variable(&self, name: &str) -> Option<(usize, &Variable)> {
        self.variables.iter().enumerate().find(|(_, v)| v.name() == name)
    }

    pub fn d_card(&self) -> usize {
        self.d_card
    }

    pub fn x_card(&self) -> usize {
        self.x_card
    }

    pub fn y_card(&self) -> usize {
        2
    }

    /// Number of (d, x, y) cells.
    pub fn n_cells(&self) -> usize {
        self.d_card * self.x_card * 2
    }

    /// Number of (x, y) cells, i.e. the output alphabet of the transform.
    pub fn n_xy(&self) -> usize {
        self.x_card * 2
    }

    pub fn cell(&self, d: usize, x: usize, y: usize) -> usize {
        (d * self.x_card + x) * 2 + y
    }

    pub fn split_cell(&self, cell: usize) -> (usize, usize, usize) {
        let y = cell % 2;
        let dx = cell / 2;
        (dx / self.x_card, dx % self.x_card, y)
    }

    pub fn xy(&self, x: usize, y: usize) -> usize {
        x * 2 + y
    }

    pub fn split_xy(&self, xy: usize) -> (usize, usize) {
        (xy / 2, xy % 2)
    }

    /// Per-variable category indices of a composite D index.
    pub fn d_digits(&self, d: usize) -> Vec<usize> {
        digits(d, self.d_vars())
    }

    /// Per-variable category indices of a composite X index.
    pub fn x_digits(&self, x: usize) -> Vec<usize> {
        digits(x, self.x_vars())
    }

    pub fn d_from_digits(&self, ds: &[usize]) -> usize {
        from_digits(ds, self.d_vars())
    }

    pub fn x_from_digits(&self, xs: &[usize]) -> usize {
        from_digits(xs, self.x_vars())
    }

    pub fn d_label(&self, d: usize) -> String {
        composite_label(&self.d_digits(d), self.d_vars())
    }

    pub fn x_label(&self, x: usize) -> String {
        composite_label(&self.x_digits(x), self.x_vars())
    }

    pub fn y_label(&self, y: usize) -> &str {
        &self.y_var().alphabet.categories[y]
    }

    pub fn parse_d_label(&self, label: &str) -> Option<usize> {
        parse_composite(label, self.d_vars()).map(|ds| self.d_from_digits(&ds))
    }

    pub fn parse_x_label(&self, label: &str) -> Option<usize> {
        parse_composite(label, self.x_vars()).map(|xs| self.x_from_digits(&xs))
    }

    pub fn parse_y_label(&self, label: &str) -> Option<usize> {
        self.y_var().alphabet.index_of(label)
    }

    /// Human-readable label of a full (d, x, y) cell.
    pub fn cell_label(&self, cell: usize) -> String {
        let (d, x, y) = self.split_cell(cell);
        format!("({}, {}, {})", self.d_label(d), self.x_label(x), self.y_label(y))
    }
}

fn digits(mut idx: usize, vars: &[Variable]) -> Vec<usize> {
    let mut out = vec![0; vars.len()];
    for (i, v) in vars.iter().enumerate().rev() {
        out[i] = idx % v.card();
        idx /= v.card();
    }
    out
}

fn from_digits(ds: &[usize], vars: &[Variable]) -> usize {
    ds.iter().zip(vars).fold(0, |acc, (&d, v)| acc * v.card() + d)
}

fn composite_label(ds: &[usize], vars: &[Variable]) -> String {
    ds.iter()
        .zip(vars)
        .map(|(&d, v)| v.alphabet.categories[d].as_str())
        .collect::<Vec<_>>()
        .join(COMPOSITE_SEP)
}

fn parse_composite(label: &str, vars: &[Variable]) -> Option<Vec<usize>> {
    let parts: Vec<&str> = label.split(COMPOSITE_SEP).collect();
    if parts.len() != vars.len() {
        return None;
    }
    parts.iter().zip(vars).map(|(p, v)| v.alphabet.index_of(p)).collect()
}
