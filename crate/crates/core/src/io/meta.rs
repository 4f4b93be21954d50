//! `# key=value` header lines shared by every output file.

use std::collections::BTreeMap;
use std::fmt::Display;

use crate::params::{ModelParams, NumericsConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Ordered key/value pairs describing how an artefact was produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Version, every model parameter, every numerics setting and `N`.
    pub fn new(params: &ModelParams, cfg: &NumericsConfig, grid_size: usize) -> Self {
        Self::empty()
            .with("version", VERSION)
            .with("mu", params.mu)
            .with("sigma", params.sigma)
            .with("F", params.fixed_input)
            .with("tau", params.tau)
            .with("v", params.migration_speed)
            .with("Lambda", params.lambda_total)
            .with("Phi", params.phi_total)
            .with("rho", params.rho)
            .with("grid_size", grid_size)
            .with("dt", cfg.dt)
            .with("fp_tol", cfg.fp_tol)
            .with("fp_max_iter", cfg.fp_max_iter)
            .with("stat_tol", cfg.stat_tol)
            .with("max_steps", cfg.max_steps)
            .with("seed", cfg.seed)
            .with("perturb_amplitude", cfg.perturb_amplitude)
    }

    /// Model parameters only, for outputs that do not touch the grid.
    pub fn for_model(params: &ModelParams) -> Self {
        Self::empty()
            .with("version", VERSION)
            .with("mu", params.mu)
            .with("sigma", params.sigma)
            .with("F", params.fixed_input)
            .with("tau", params.tau)
            .with("v", params.migration_speed)
            .with("Lambda", params.lambda_total)
            .with("Phi", params.phi_total)
            .with("rho", params.rho)
    }

    /// Appends or replaces `key`.
    pub fn with(mut self, key: &str, value: impl Display) -> Self {
        self.set(key, value);
        self
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string().replace(['\n', '\r'], " ");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        self.entries.iter().cloned().collect()
    }

    /// Lines of the form `{prefix}key=value`.
    pub fn render(&self, prefix: &str) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(prefix);
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Collects `# key=value` lines from the top of a text file.
    pub fn parse_header(text: &str) -> Self {
        let mut meta = Self::empty();
        for line in text.lines() {
            let Some(rest) = line.strip_prefix('#') else { break };
            if let Some((k, v)) = rest.trim_start().split_once('=') {
                meta.set(k.trim(), v.trim());
            }
        }
        meta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let m = Metadata::new(&ModelParams::default(), &NumericsConfig::default(), 255).with("note", "a=b");
        let back = Metadata::parse_header(&m.render("# "));
        assert_eq!(back, m);
        assert_eq!(back.get("seed"), Some("42"));
        assert_eq!(back.get("note"), Some("a=b"));
    }

    #[test]
    fn set_replaces() {
        let m = Metadata::empty().with("a", 1).with("a", 2);
        assert_eq!(m.entries().len(), 1);
        assert_eq!(m.get("a"), Some("2"));
    }
}
