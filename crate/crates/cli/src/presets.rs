//! Embedded sweep configurations for the two reproduction runs.
//!
//! `onebit_sensing`: one-bit Gaussian sensing at 20x20, rank one, unit
//! Frobenius truth, 1000 samples. PG runs at the default step `1 / (2 beta_hat)`.
//!
//! `onebit_mc`: one-bit completion at 100x100 with half the entries observed.
//! The step `20000` is `1 / (2 * 0.25 / (d1 d2))`: the loss is averaged over
//! `p d1 d2` observed cells, so the expected curvature per entry is at most
//! `0.25 / (d1 d2)`. The clipping bounds are
//! read off the true matrix, so the regularised arm is an oracle-informed
//! heuristic and not a practical estimator.

use crate::config::SweepConfig;

pub const ONEBIT_SENSING: &str = include_str!("../presets/onebit_sensing.json");
pub const ONEBIT_MC: &str = include_str!("../presets/onebit_mc.json");

fn parse(text: &str) -> SweepConfig {
    serde_json::from_str(text).expect("embedded preset parses")
}

pub fn onebit_sensing() -> SweepConfig {
    parse(ONEBIT_SENSING)
}

pub fn onebit_mc() -> SweepConfig {
    parse(ONEBIT_MC)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        onebit_sensing().validate().unwrap();
        onebit_mc().validate().unwrap();
        assert_eq!(onebit_sensing().combinations().len(), 10);
        assert_eq!(onebit_mc().combinations().len(), 8);
    }
}
