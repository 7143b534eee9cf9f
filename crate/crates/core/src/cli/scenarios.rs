//! Scenario files shipped inside the binary.

use super::config::{parse_config_str, ConfigError, Scenario};

pub const BUNDLED: &[(&str, &str)] = &[
    ("example1", include_str!("../../scenarios/example1.toml")),
    ("example3-multiplicative", include_str!("../../scenarios/example3-multiplicative.toml")),
    ("example4-kpz", include_str!("../../scenarios/example4-kpz.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn bundled(name: &str) -> Option<Result<Scenario, ConfigError>> {
    source(name).map(|text| parse_config_str(text, name))
}
