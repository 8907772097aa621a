use proptest::prelude::*;

use lsto::presets::{preset, PresetName};
use lsto::RunConfig;

proptest! {
    #[test]
    fn presets_round_trip_through_toml(index in 0usize..PresetName::ALL.len(), scale in 1usize..9) {
        let cfg = preset(PresetName::ALL[index], scale);
        let back = RunConfig::parse(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_survive_round_trip(w1 in 0.5f64..1.0, stride in 1usize..50, move_limit in 0.01f64..0.5) {
        let text = format!(
            "preset = \"beam2d-sfc\"\n[weights]\nw1 = {w1:?}\n[solver]\nmove_limit = {move_limit:?}\n[output]\nstride = {stride}\n"
        );
        let cfg = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(cfg.weights.w1, w1);
        prop_assert_eq!(cfg.solver.move_limit, move_limit);
        prop_assert_eq!(cfg.output.stride, stride);
        prop_assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }
}
