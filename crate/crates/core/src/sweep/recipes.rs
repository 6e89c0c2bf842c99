//! Configurations bundled with the binary, one per figure-class computation.

use std::path::Path;

use super::RunConfig;
use crate::error::{Error, Result};

const BUNDLED: &[(&str, &str)] = &[
    ("fig2a", include_str!("../../recipes/fig2a.toml")),
    ("fig2b", include_str!("../../recipes/fig2b.toml")),
    ("fig2c", include_str!("../../recipes/fig2c.toml")),
    ("fig3a", include_str!("../../recipes/fig3a.toml")),
    ("fig3b", include_str!("../../recipes/fig3b.toml")),
    ("fig4a", include_str!("../../recipes/fig4a.toml")),
    ("fig4b", include_str!("../../recipes/fig4b.toml")),
    ("fig5", include_str!("../../recipes/fig5.toml")),
    ("fig6a", include_str!("../../recipes/fig6a.toml")),
    ("fig6b", include_str!("../../recipes/fig6b.toml")),
    ("fig7", include_str!("../../recipes/fig7.toml")),
    ("fig8", include_str!("../../recipes/fig8.toml")),
    ("fig9", include_str!("../../recipes/fig9.toml")),
    ("fig10", include_str!("../../recipes/fig10.toml")),
];

#[derive(Debug, Clone, Copy)]
pub struct Recipe {
    pub name: &'static str,
    pub text: &'static str,
}

impl Recipe {
    /// First comment line of the file.
    pub fn description(&self) -> &'static str {
        self.text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .map(str::trim)
            .unwrap_or("")
    }

    pub fn config(&self) -> Result<RunConfig> {
        RunConfig::parse(self.text, Path::new(self.name))
    }
}

pub fn recipes() -> Vec<Recipe> {
    BUNDLED.iter().map(|&(name, text)| Recipe { name, text }).collect()
}

pub fn recipe(name: &str) -> Result<Recipe> {
    recipes()
        .into_iter()
        .find(|r| r.name == name)
        .ok_or_else(|| Error::config("recipe", format!("unknown recipe `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_recipe_validates() {
        for r in recipes() {
            let cfg = r.config().unwrap_or_else(|e| panic!("{}: {e}", r.name));
            assert!(!r.description().is_empty(), "{}", r.name);
            assert!(!cfg.variants().unwrap().is_empty());
        }
        assert!(recipe("fig2a").is_ok());
        assert!(recipe("fig99").is_err());
    }
}
