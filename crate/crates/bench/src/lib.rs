//! Shared fixtures for the criterion benchmarks.

use horizon_core::dataset::{prepare, EmbedConfig, Prepared};
use horizon_core::seriesgen::{generate, ChaosParams};
use horizon_core::{build, Model, ModelKind, ModelSpec, Rng};

/// Embedded Lorenz data with the default configuration.
pub fn lorenz_data() -> Prepared {
    let cfg = EmbedConfig::default();
    let series = generate(&ChaosParams::lorenz(), cfg.max_points).expect("lorenz generates");
    prepare(&series, &cfg).expect("lorenz prepares")
}

/// Freshly initialised model of `kind` for 5 inputs and 10 outputs.
pub fn model(kind: ModelKind) -> Model {
    build(&ModelSpec::new(kind, 5, 10), &mut Rng::new(7)).expect("valid spec")
}
