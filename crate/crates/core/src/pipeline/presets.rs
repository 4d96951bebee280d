//! Built-in configurations for the two reference datasets.

use super::config::PipelineConfig;

pub const NAMES: [&str; 2] = ["compas", "adult"];

const COMPAS: &str = include_str!("../../presets/compas.toml");
const ADULT: &str = include_str!("../../presets/adult.toml");

/// TOML text of a preset, comments included.
pub fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "compas" => Some(COMPAS),
        "adult" => Some(ADULT),
        _ => None,
    }
}

pub fn preset(name: &str) -> Option<PipelineConfig> {
    preset_text(name).map(|t| PipelineConfig::from_toml(t).expect("built-in preset is valid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{DiscriminationMode, DistortionBudget};
    use crate::optimizer::Objective;

    #[test]
    fn compas_metric_values() {
        let cfg = preset("compas").unwrap();
        let s = cfg.schema().unwrap();
        assert_eq!((s.d_card(), s.x_card()), (4, 18));
        assert_eq!(cfg.objective, Objective::Kl);
        assert_eq!(cfg.discrimination.mode, DiscriminationMode::PairwiseDistance);
        let m = cfg.distortion.metric.compile(&s).unwrap();
        let x = |age: &str, charge: &str, priors: &str| {
            s.parse_x_label(&[age, charge, priors].join(crate::domain::COMPOSITE_SEP)).unwrap()
        };
        let base = x("<25", "F", "0");
        // outcome raised: forbidden
        assert!(m.get(s.xy(base, 0), s.xy(base, 1)) >= 1e4);
        // one age step plus outcome lowered: 1^2 + 2^2
        assert_eq!(m.get(s.xy(base, 1), s.xy(x("25-45", "F", "0"), 0)), 5.0);
        assert_eq!(m.get(s.xy(base, 0), s.xy(x("<25", "M", "0"), 0)), 4.0);
        assert!(m.get(s.xy(base, 0), s.xy(x("<25", "F", ">3"), 0)) >= 1e4);
        assert_eq!(cfg.distortion.budget.expected_for(0), Some(0.5));
    }

    #[test]
    fn adult_metric_values() {
        let cfg = preset("adult").unwrap();
        let s = cfg.schema().unwrap();
        assert_eq!((s.d_card(), s.x_card()), (4, 9 * 16));
        let m = cfg.distortion.metric.compile(&s).unwrap();
        let x = |age: &str, edu: &str| s.parse_x_label(&format!("{age}{}{edu}", crate::domain::COMPOSITE_SEP)).unwrap();
        let from = s.xy(x("30", "10"), 1);
        assert_eq!(m.get(from, s.xy(x("30", "10"), 0)), 1.0);
        assert_eq!(m.get(from, s.xy(x("30", "11"), 0)), 1.0);
        assert_eq!(m.get(from, s.xy(x("30", "11"), 1)), 0.0);
        assert_eq!(m.get(from, s.xy(x("40", "11"), 1)), 2.0);
        assert_eq!(m.get(from, s.xy(x("20", "10"), 0)), 2.0);
        assert_eq!(m.get(from, s.xy(x("50", "10"), 1)), 3.0);
        assert_eq!(m.get(from, s.xy(x("30", "9"), 1)), 3.0);
        assert_eq!(m.get(from, s.xy(x("30", "12"), 1)), 3.0);
        match &cfg.distortion.budget {
            DistortionBudget::Thresholded { default: Some(l), .. } => {
                let t: Vec<(f64, f64)> = l.iter().map(|l| (l.threshold, l.budget)).collect();
                assert_eq!(t, vec![(0.9, 0.1), (1.9, 0.05), (2.9, 0.0)]);
            }
            b => panic!("unexpected budget {b:?}"),
        }
    }

    #[test]
    fn quantizers_encode_raw_values() {
        let cfg = preset("adult").unwrap();
        let age = &cfg.variables[2];
        assert_eq!(age.encode("37"), Some(2));
        assert_eq!(age.encode("90"), Some(8));
        let income = &cfg.variables[4];
        assert_eq!(income.encode(">50K."), Some(1));
        assert_eq!(cfg.variables[0].encode("Black"), Some(1));
        let cfg = preset("compas").unwrap();
        let priors = cfg.variables.iter().find(|v| v.name() == "priors").unwrap();
        assert_eq!([priors.encode("0"), priors.encode("3"), priors.encode("4")], [Some(0), Some(1), Some(2)]);
        assert!(preset("nope").is_none());
    }
}
