//! TOML run configuration. Every section and key is optional; unknown keys
//! are errors.

use std::path::Path;

use crate::coupling::RunConfig;
use crate::error::{Error, Result};

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::ConfigParse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    cfg.check()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Full configuration with every default written out.
pub fn dump_config(cfg: &RunConfig) -> String {
    toml::to_string_pretty(cfg).expect("configuration is always representable as TOML")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::SplittingOrder;
    use crate::fluid::BodyForce;
    use crate::initial::VelocityInit;
    use proptest::prelude::*;

    #[test]
    fn grid_only_config_gets_defaults() {
        let c = parse_config("[grid]\nnx = 16\nny = 8\n").unwrap();
        assert_eq!((c.grid.nx, c.grid.ny), (16, 8));
        let d = RunConfig::default();
        assert_eq!(c.coefficients, d.coefficients);
        assert_eq!(c.time, d.time);
    }

    #[test]
    fn negative_tau_names_assumption() {
        let err = parse_config("[coefficients]\ntau_max = -1.0\n").unwrap_err();
        match err {
            Error::ConfigConstraint { rule, .. } => assert!(rule.contains("A2"), "{rule}"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_config("[grid]\nnx = 16\n\n[time]\nbogus = 3\n").unwrap_err();
        match err {
            Error::ConfigParse { line, message } => {
                assert_eq!(line, 5);
                assert!(message.contains("bogus"), "{message}");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn defaults_round_trip() {
        let d = RunConfig::default();
        assert_eq!(parse_config(&dump_config(&d)).unwrap(), d);
    }

    proptest! {
        #[test]
        fn round_trip(nx in 2usize..200, lx in 0.1f64..100.0, k in 1.0f64..50.0, amp in -3.0f64..3.0,
                      mode in 1u32..5, seq in any::<bool>(), trunc in prop::option::of(1.0f64..100.0),
                      seed in any::<u64>(), dt in prop::option::of(1e-4f64..1e-2)) {
            let mut c = RunConfig::default();
            c.grid.nx = nx;
            c.grid.lx = lx;
            c.coefficients.k_const = k;
            c.forcing = BodyForce::Kolmogorov { amplitude: amp, mode };
            c.initial.velocity = VelocityInit::Random { amplitude: amp.abs(), modes: mode };
            c.initial.seed = seed;
            c.time.splitting = if seq { SplittingOrder::Sequential } else { SplittingOrder::Coupled };
            c.time.phi_truncation = trunc;
            c.zero_dim.dt = dt;
            let text = dump_config(&c);
            let back = parse_config(&text).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(dump_config(&back), text);
        }
    }
}
