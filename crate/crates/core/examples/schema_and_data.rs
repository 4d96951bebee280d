//! Declare a schema, ingest delimited text with quantizers and filters, and
//! query the empirical joint distribution.
//!
//! ```text
//! cargo run --example schema_and_data
//! ```

use std::collections::BTreeMap;
use std::io::Cursor;

use fairprep::domain::{
    condition, marginalize, read_delimited, Alphabet, IngestOptions, JointPmf, Quantizer, Role, RowFilter, Schema,
    Variable,
};

const CSV: &str = "\
applicant_group,age,income_band,approved
north,23,low,0
north,37,mid,1
north,52,high,1
south,29,low,0
south,44,mid,0
south,61,high,1
south,35,mid,1
north,19,low,1
south,200,low,0
";

fn main() -> fairprep::Result<()> {
    let age = Quantizer::Bins { edges: vec![30.0, 50.0], labels: vec!["young".into(), "middle".into(), "senior".into()] };
    let income = Quantizer::Map {
        map: BTreeMap::from([("low".into(), "L".into()), ("mid".into(), "M".into()), ("high".into(), "H".into())]),
        default: None,
    };
    let schema = Schema::new(vec![
        Variable::new(Alphabet::new("region", &["north", "south"], false)?, Role::D).with_column("applicant_group"),
        Variable::new(Alphabet::new("age", &["young", "middle", "senior"], true)?, Role::X).with_quantizer(age),
        Variable::new(Alphabet::new("income", &["L", "M", "H"], true)?, Role::X)
            .with_column("income_band")
            .with_quantizer(income),
        Variable::new(Alphabet::new("approved", &["0", "1"], false)?, Role::Y),
    ])?;
    println!("{} groups, {} feature combinations, {} cells", schema.d_card(), schema.x_card(), schema.n_cells());

    // drop implausible ages before encoding
    let opts = IngestOptions {
        filters: vec![RowFilter::Between { column: "age".into(), min: 0.0, max: 120.0 }],
        ..IngestOptions::default()
    };
    let data = read_delimited(Cursor::new(CSV), &schema, &opts)?;
    println!("kept {} of 9 rows", data.len());
    for r in data.records().iter().take(3) {
        println!("  {} / {} / {}", schema.d_label(r.d), schema.x_label(r.x), schema.y_label(r.y.unwrap()));
    }

    let pmf = JointPmf::estimate_empirical(&data)?;
    println!("p(approved) = {:?}", pmf.p_y());
    for d in 0..schema.d_card() {
        println!("p(approved | {}) = {:?}", schema.d_label(d), pmf.y_given_d(d));
    }
    let by_income = marginalize(&pmf, &["income", "approved"])?;
    println!("p(income, approved) = {:?}", by_income.mass());
    let cond = condition(&pmf, &["region"])?;
    println!("rows of p(. | region): {}, absent: {:?}", cond.n_rows(), cond.absent_rows());
    Ok(())
}
