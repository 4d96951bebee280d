//! Fit a bundled preset on its public dataset and sweep the tolerance.
//!
//! ```text
//! cargo run --release --example reproduce_preset -- compas /path/to/compas-scores-two-years.csv
//! cargo run --release --example reproduce_preset -- adult /path/to/adult.data
//! ```

use fairprep::audit::{audit_kernel, AuditOptions};
use fairprep::domain::JointPmf;
use fairprep::optimizer::{solve, sweep_epsilon, SolveStatus};
use fairprep::pipeline::{parse_grid, presets};

fn main() -> fairprep::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (Some(name), Some(path)) = (args.first(), args.get(1)) else {
        eprintln!("usage: reproduce_preset <{}> <data file>", presets::NAMES.join("|"));
        return Ok(());
    };
    let cfg = presets::preset(name).ok_or_else(|| fairprep::Error::Config(format!("unknown preset `{name}`")))?;
    let data = cfg.read_data(path.as_ref())?;
    let pmf = JointPmf::estimate_empirical(&data)?;
    println!("{name}: {} records, {} cells", data.len(), pmf.schema().n_cells());

    let spec = cfg.problem_spec();
    let sol = solve(&spec.assemble(&pmf)?, &cfg.solver)?;
    println!("fit: {} with loss {:.5}", sol.status, sol.objective);
    if sol.status == SolveStatus::Optimal {
        print!("{}", audit_kernel(&pmf, &sol.kernel, &spec, &AuditOptions::default())?.render_text());
    } else if let Some(v) = sol.violated {
        println!("closest kernel still violates {:?} by {:.4}", v.label, v.amount);
    }

    let grid = parse_grid("0:0.05:0.8")?;
    let sweep = sweep_epsilon(&pmf, &spec, &grid, &cfg.solver)?;
    println!("sweep at the preset budget: infeasible up to {:?}, zero loss from {:?}", sweep.infeasible_below, sweep.zero_from);
    for p in &sweep.points {
        println!("  eps {:.2}: {:<10} {:.5}", p.epsilon, p.status.to_string(), p.objective);
    }
    Ok(())
}
