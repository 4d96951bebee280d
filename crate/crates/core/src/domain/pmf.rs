use super::dataset::Dataset;
use super::schema::Schema;
use super::{ROW_TOL, STORAGE_TOL};
use crate::error::{Error, Result};

/// Name and cardinality of one axis of a dense distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDim {
    pub name: String,
    pub card: usize,
}

/// Dense pmf over a product of named finite variables, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    vars: Vec<VarDim>,
    mass: Vec<f64>,
}

impl Distribution {
    pub fn new(vars: Vec<VarDim>, mass: Vec<f64>) -> Result<Self> {
        let size: usize = vars.iter().map(|v| v.card).product();
        if size != mass.len() {
            return Err(Error::SupportMismatch(size, mass.len()));
        }
        let mass = normalized(mass)?;
        Ok(Distribution { vars, mass })
    }

    pub fn vars(&self) -> &[VarDim] {
        &self.vars
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut pos = Vec::with_capacity(names.len());
        for n in names {
            let p = self
                .vars
                .iter()
                .position(|v| v.name == *n)
                .ok_or_else(|| Error::UnknownVariable(n.to_string()))?;
            if !pos.contains(&p) {
                pos.push(p);
            }
        }
        pos.sort_unstable();
        Ok(pos)
    }

    /// Sums out every variable not in `keep`. Kept variables stay in their original order.
    pub fn marginalize(&self, keep: &[&str]) -> Result<Distribution> {
        let pos = self.positions(keep)?;
        let cards: Vec<usize> = self.vars.iter().map(|v| v.card).collect();
        let sub_cards: Vec<usize> = pos.iter().map(|&p| cards[p]).collect();
        let mut out = vec![0.0; sub_cards.iter().product()];
        for_each_cell(&cards, |flat, digits| {
            out[sub_index(digits, &pos, &sub_cards)] += self.mass[flat];
        });
        Ok(Distribution { vars: pos.iter().map(|&p| self.vars[p].clone()).collect(), mass: out })
    }

    /// Conditional distribution of the remaining variables given `given`.
    /// Given-cells with zero marginal mass are reported as absent rows.
    pub fn condition(&self, given: &[&str]) -> Result<ConditionalPmf> {
        let gpos = self.positions(given)?;
        let tpos: Vec<usize> = (0..self.vars.len()).filter(|p| !gpos.contains(p)).collect();
        let cards: Vec<usize> = self.vars.iter().map(|v| v.card).collect();
        let gcards: Vec<usize> = gpos.iter().map(|&p| cards[p]).collect();
        let tcards: Vec<usize> = tpos.iter().map(|&p| cards[p]).collect();
        let n_rows: usize = gcards.iter().product();
        let n_cols: usize = tcards.iter().product();
        let mut joint = vec![vec![0.0; n_cols]; n_rows];
        for_each_cell(&cards, |flat, digits| {
            joint[sub_index(digits, &gpos, &gcards)][sub_index(digits, &tpos, &tcards)] +=
                self.mass[flat];
        });
        let rows = joint
            .into_iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                (total > 0.0).then(|| row.iter().map(|m| m / total).collect())
            })
            .collect();
        Ok(ConditionalPmf {
            all: self.vars.clone(),
            given_pos: gpos,
            target_pos: tpos,
            rows,
        })
    }
}

/// Rows of a conditional pmf, indexed by the flattened given-cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPmf {
    all: Vec<VarDim>,
    given_pos: Vec<usize>,
    target_pos: Vec<usize>,
    rows: Vec<Option<Vec<f64>>>,
}

impl ConditionalPmf {
    pub fn given(&self) -> Vec<&VarDim> {
        self.given_pos.iter().map(|&p| &self.all[p]).collect()
    }

    pub fn target(&self) -> Vec<&VarDim> {
        self.target_pos.iter().map(|&p| &self.all[p]).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Probability vector over target cells, or `None` for a zero-mass given-cell.
    pub fn row(&self, given_cell: usize) -> Option<&[f64]> {
        self.rows.get(given_cell).and_then(|r| r.as_deref())
    }

    pub fn absent_rows(&self) -> Vec<usize> {
        self.rows.iter().enumerate().filter(|(_, r)| r.is_none()).map(|(i, _)| i).collect()
    }

    /// Rebuilds the joint from this conditional and the marginal of the given variables
    /// (in the original variable order). Absent rows contribute zero mass.
    pub fn recombine(&self, given_marginal: &[f64]) -> Result<Distribution> {
        if given_marginal.len() != self.rows.len() {
            return Err(Error::SupportMismatch(self.rows.len(), given_marginal.len()));
        }
        let cards: Vec<usize> = self.all.iter().map(|v| v.card).collect();
        let gcards: Vec<usize> = self.given_pos.iter().map(|&p| cards[p]).collect();
        let tcards: Vec<usize> = self.target_pos.iter().map(|&p| cards[p]).collect();
        let mut mass = vec![0.0; cards.iter().product()];
        for_each_cell(&cards, |flat, digits| {
            let g = sub_index(digits, &self.given_pos, &gcards);
            if let Some(row) = &self.rows[g] {
                mass[flat] = given_marginal[g] * row[sub_index(digits, &self.target_pos, &tcards)];
            }
        });
        Distribution::new(self.all.clone(), mass)
    }
}

/// Dense joint pmf over (D, X, Y) in the schema's cell layout.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    schema: Schema,
    mass: Vec<f64>,
    n: Option<usize>,
}

impl JointPmf {
    pub fn from_mass(schema: Schema, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != schema.n_cells() {
            return Err(Error::SupportMismatch(schema.n_cells(), mass.len()));
        }
        Ok(JointPmf { schema, mass: normalized(mass)?, n: None })
    }

    /// Normalizes nonnegative weights (e.g. counts) into a pmf.
    pub fn from_weights(schema: Schema, weights: Vec<f64>) -> Result<Self> {
        if let Some(bad) = weights.iter().find(|m| !m.is_finite() || **m < 0.0) {
            return Err(Error::InvalidPmf(format!("weight {bad} is negative or not finite")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidPmf("weights sum to zero".into()));
        }
        Self::from_mass(schema, weights.into_iter().map(|w| w / total).collect())
    }

    /// Empirical distribution: `count(d, x, y) / n`.
    pub fn estimate_empirical(dataset: &Dataset) -> Result<Self> {
        let schema = dataset.schema();
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut counts = vec![0usize; schema.n_cells()];
        for (i, r) in dataset.records().iter().enumerate() {
            let y = r.y.ok_or(Error::MissingOutcome(i))?;
            counts[schema.cell(r.d, r.x, y)] += 1;
        }
        let n = dataset.len();
        let mass = counts.iter().map(|&c| c as f64 / n as f64).collect();
        Ok(JointPmf { schema: schema.clone(), mass: normalized(mass)?, n: Some(n) })
    }

    pub fn with_sample_count(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn at(&self, d: usize, x: usize, y: usize) -> f64 {
        self.mass[self.schema.cell(d, x, y)]
    }

    /// Number of samples behind an empirical estimate.
    pub fn sample_count(&self) -> Option<usize> {
        self.n
    }

    pub fn as_distribution(&self) -> Distribution {
        Distribution {
            vars: self
                .schema
                .variables()
                .iter()
                .map(|v| VarDim { name: v.name().to_string(), card: v.card() })
                .collect(),
            mass: self.mass.clone(),
        }
    }

    pub fn p_d(&self) -> Vec<f64> {
        let nx2 = self.schema.n_xy();
        self.mass.chunks(nx2).map(|c| c.iter().sum()).collect()
    }

    pub fn p_y(&self) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, m) in self.mass.iter().enumerate() {
            out[c % 2] += m;
        }
        out
    }

    /// Marginal over the output alphabet, indexed by `schema.xy(x, y)`.
    pub fn p_xy(&self) -> Vec<f64> {
        let nxy = self.schema.n_xy();
        let mut out = vec![0.0; nxy];
        for (c, m) in self.mass.iter().enumerate() {
            out[c % nxy] += m;
        }
        out
    }

    pub fn p_x(&self) -> Vec<f64> {
        self.p_xy().chunks(2).map(|c| c[0] + c[1]).collect()
    }

    /// Joint of (D, Y), indexed `[d][y]`.
    pub fn p_dy(&self) -> Vec<[f64; 2]> {
        self.mass
            .chunks(self.schema.n_xy())
            .map(|c| {
                let mut dy = [0.0; 2];
                for (i, m) in c.iter().enumerate() {
                    dy[i % 2] += m;
                }
                dy
            })
            .collect()
    }

    /// `p_{X,Y|D}(.|d)` indexed by `schema.xy(x, y)`; `None` when `p_D(d) = 0`.
    pub fn xy_given_d(&self, d: usize) -> Option<Vec<f64>> {
        let nxy = self.schema.n_xy();
        let chunk = &self.mass[d * nxy..(d + 1) * nxy];
        let total: f64 = chunk.iter().sum();
        (total > 0.0).then(|| chunk.iter().map(|m| m / total).collect())
    }

    /// `p_{Y|X,D}(.|x,d)`; `None` when `p_{X,D}(x,d) = 0`.
    pub fn y_given_xd(&self, d: usize, x: usize) -> Option<[f64; 2]> {
        let m0 = self.at(d, x, 0);
        let m1 = self.at(d, x, 1);
        let t = m0 + m1;
        (t > 0.0).then(|| [m0 / t, m1 / t])
    }

    /// `p_{Y|X}(.|x)`; `None` when `p_X(x) = 0`.
    pub fn y_given_x(&self, x: usize) -> Option<[f64; 2]> {
        let pxy = self.p_xy();
        let t = pxy[2 * x] + pxy[2 * x + 1];
        (t > 0.0).then(|| [pxy[2 * x] / t, pxy[2 * x + 1] / t])
    }

    /// `p_{Y|D}(.|d)`; `None` when `p_D(d) = 0`.
    pub fn y_given_d(&self, d: usize) -> Option<[f64; 2]> {
        let dy = self.p_dy()[d];
        let t = dy[0] + dy[1];
        (t > 0.0).then(|| [dy[0] / t, dy[1] / t])
    }

    /// Cells with positive mass, in layout order.
    pub fn support(&self) -> Vec<usize> {
        self.mass.iter().enumerate().filter(|(_, &m)| m > 0.0).map(|(c, _)| c).collect()
    }
}

/// Sums out every schema variable not named in `keep`.
pub fn marginalize(pmf: &JointPmf, keep: &[&str]) -> Result<Distribution> {
    pmf.as_distribution().marginalize(keep)
}

/// Conditions the joint on the named variables.
pub fn condition(pmf: &JointPmf, given: &[&str]) -> Result<ConditionalPmf> {
    pmf.as_distribution().condition(given)
}

fn normalized(mut mass: Vec<f64>) -> Result<Vec<f64>> {
    if let Some(bad) = mass.iter().find(|m| !m.is_finite() || **m < 0.0) {
        return Err(Error::InvalidPmf(format!("entry {bad} is negative or not finite")));
    }
    let total: f64 = mass.iter().sum();
    if (total - 1.0).abs() > ROW_TOL {
        return Err(Error::InvalidPmf(format!("total mass {total} is not 1")));
    }
    if (total - 1.0).abs() > STORAGE_TOL / 4.0 {
        for m in &mut mass {
            *m /= total;
        }
    }
    Ok(mass)
}

/// Calls `f(flat, digits)` for every cell of a row-major product space.
fn for_each_cell<F: FnMut(usize, &[usize])>(cards: &[usize], mut f: F) {
    let size: usize = cards.iter().product();
    let mut digits = vec![0usize; cards.len()];
    for flat in 0..size {
        f(flat, &digits);
        for i in (0..cards.len()).rev() {
            digits[i] += 1;
            if digits[i] < cards[i] {
                break;
            }
            digits[i] = 0;
        }
    }
}

fn sub_index(digits: &[usize], pos: &[usize], cards: &[usize]) -> usize {
    pos.iter().zip(cards).fold(0, |acc, (&p, &c)| acc * c + digits[p])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::dataset::Record;
    use crate::domain::schema::{Alphabet, Role, Variable};

    fn schema_dxy(nd: usize, nx: usize) -> Schema {
        let labels = |n: usize| (0..n).map(|i| format!("c{i}")).collect::<Vec<_>>();
        let mk = |name: &str, n: usize, role| {
            let l = labels(n);
            let refs: Vec<&str> = l.iter().map(String::as_str).collect();
            Variable::new(Alphabet::new(name, &refs, false).unwrap(), role)
        };
        Schema::new(vec![mk("d", nd, Role::D), mk("x", nx, Role::X), mk("y", 2, Role::Y)]).unwrap()
    }

    fn dist(cards: &[(&str, usize)], mass: Vec<f64>) -> Distribution {
        Distribution::new(
            cards.iter().map(|(n, c)| VarDim { name: n.to_string(), card: *c }).collect(),
            mass,
        )
        .unwrap()
    }

    #[test]
    fn point_mass_from_degenerate_dataset() {
        let s = schema_dxy(2, 2);
        let ds = Dataset::new(s.clone(), vec![Record::new(0, 0, 1); 4]).unwrap();
        let p = JointPmf::estimate_empirical(&ds).unwrap();
        assert_eq!(p.at(0, 0, 1), 1.0);
        assert_eq!(p.mass().iter().filter(|&&m| m > 0.0).count(), 1);
        assert_eq!(p.sample_count(), Some(4));
    }

    #[test]
    fn two_records_split_evenly() {
        let s = schema_dxy(1, 1);
        let ds = Dataset::new(s, vec![Record::new(0, 0, 0), Record::new(0, 0, 1)]).unwrap();
        let p = JointPmf::estimate_empirical(&ds).unwrap();
        assert_eq!(p.mass(), &[0.5, 0.5]);
    }

    #[test]
    fn missing_outcome_is_rejected() {
        let s = schema_dxy(1, 1);
        let ds = Dataset::new(s, vec![Record::new(0, 0, 0), Record::unlabeled(0, 0)]).unwrap();
        assert!(matches!(JointPmf::estimate_empirical(&ds), Err(Error::MissingOutcome(1))));
    }

    #[test]
    fn marginalize_identity_and_uniform() {
        let p = dist(&[("a", 2), ("b", 2)], vec![0.25; 4]);
        assert_eq!(p.marginalize(&["a", "b"]).unwrap(), p);
        assert_eq!(p.marginalize(&["a"]).unwrap().mass(), &[0.5, 0.5]);
        assert!(matches!(p.marginalize(&["z"]), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn condition_hand_normalized() {
        let p = dist(&[("d", 2), ("y", 2)], vec![0.4, 0.1, 0.2, 0.3]);
        let c = p.condition(&["d"]).unwrap();
        let r0 = c.row(0).unwrap();
        assert!((r0[0] - 0.8).abs() < 1e-15 && (r0[1] - 0.2).abs() < 1e-15);
        let r1 = c.row(1).unwrap();
        assert!((r1[0] - 0.4).abs() < 1e-15 && (r1[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn condition_on_independent_gives_marginal_rows() {
        let pd = [0.3, 0.7];
        let py = [0.6, 0.4];
        let mass = vec![pd[0] * py[0], pd[0] * py[1], pd[1] * py[0], pd[1] * py[1]];
        let c = dist(&[("d", 2), ("y", 2)], mass).condition(&["d"]).unwrap();
        for d in 0..2 {
            let r = c.row(d).unwrap();
            assert!((r[0] - 0.6).abs() < 1e-12 && (r[1] - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn condition_on_nothing_is_identity_and_zero_rows_absent() {
        let p = dist(&[("d", 2), ("y", 2)], vec![0.5, 0.5, 0.0, 0.0]);
        let c = p.condition(&[]).unwrap();
        assert_eq!(c.n_rows(), 1);
        assert_eq!(c.row(0).unwrap(), p.mass());
        let c = p.condition(&["d"]).unwrap();
        assert_eq!(c.absent_rows(), vec![1]);
    }

    #[test]
    fn role_helpers_match_generic_marginals() {
        let s = schema_dxy(2, 3);
        let mass: Vec<f64> = (1..=12).map(|i| i as f64 / 78.0).collect();
        let p = JointPmf::from_mass(s, mass).unwrap();
        let dy = marginalize(&p, &["d", "y"]).unwrap();
        let helper = p.p_dy();
        for d in 0..2 {
            for y in 0..2 {
                assert!((dy.mass()[d * 2 + y] - helper[d][y]).abs() < 1e-15);
            }
        }
        let xy = marginalize(&p, &["x", "y"]).unwrap();
        for (a, b) in xy.mass().iter().zip(p.p_xy()) {
            assert!((a - b).abs() < 1e-15);
        }
        let c = condition(&p, &["d", "x"]).unwrap();
        for d in 0..2 {
            for x in 0..3 {
                let r = c.row(d * 3 + x).unwrap();
                let h = p.y_given_xd(d, x).unwrap();
                assert!((r[0] - h[0]).abs() < 1e-15 && (r[1] - h[1]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_unnormalized_mass() {
        let s = schema_dxy(1, 1);
        assert!(JointPmf::from_mass(s.clone(), vec![0.5, 0.6]).is_err());
        assert!(JointPmf::from_mass(s, vec![-0.1, 1.1]).is_err());
    }
}
