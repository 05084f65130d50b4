//! Run configuration: flat `key = value` pairs grouped under `[section]`
//! headers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ini::Ini;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Keys accepted in each section. Anything else is rejected so typos surface
/// as configuration errors instead of silently falling back to defaults.
const SCHEMA: &[(&str, &[&str])] = &[
    ("run", &["seed"]),
    ("mesh", &["generator", "n", "file", "refine"]),
    (
        "coefficients",
        &[
            "family", "p", "s", "variant", "a0", "a0_bounds", "b0", "h0", "omega", "reaction", "boundary_reaction", "source", "boundary_load",
            "rotation", "nu", "mu",
        ],
    ),
    ("boundary", &["mode", "beta"]),
    ("solver", &["tol", "max_newton", "max_picard", "armijo", "max_halvings", "linear_tol", "strategy", "mass"]),
    ("evolution", &["t_final", "steps", "stride", "initial", "forcing"]),
    ("reference", &["exact", "series", "x_factor", "y_factor", "modes"]),
    ("checks", &["samples", "magnitude", "grid", "magnitudes", "radial_points", "radial_max", "radial_samples"]),
    ("study", &["kind", "family", "base", "levels", "quantity", "alpha", "pair_budget", "norm", "max_variation", "n_list", "t", "s"]),
    ("output", &["vtk", "csv"]),
];

#[derive(Debug, Clone)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
    /// Directory of the config file, for resolving relative paths.
    pub base_dir: PathBuf,
    /// SHA-256 of the raw config bytes.
    pub hash: String,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base_dir)
    }

    pub fn parse(text: &str, base_dir: PathBuf) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(format!("line {}: {}", e.line, e.msg)))?;
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(CliError::Config(format!("key '{k}' appears before any [section] header")));
                }
                continue;
            };
            let allowed = SCHEMA
                .iter()
                .find(|(s, _)| *s == name)
                .map(|(_, keys)| *keys)
                .ok_or_else(|| CliError::Config(format!("unknown section [{name}]")))?;
            let entry = sections.entry(name.to_string()).or_default();
            for (k, v) in props.iter() {
                if !allowed.contains(&k) {
                    return Err(CliError::Config(format!("unknown key '{k}' in [{name}]")));
                }
                if entry.insert(k.to_string(), strip_comment(v).to_string()).is_some() {
                    return Err(CliError::Config(format!("duplicate key '{k}' in [{name}]")));
                }
            }
        }
        let hash = format!("{:x}", Sha256::digest(text.as_bytes()));
        Ok(Self { sections, base_dir, hash })
    }

    pub fn str(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|s| s.get(key)).map(String::as_str)
    }

    pub fn str_or<'a>(&'a self, section: &str, key: &str, default: &'a str) -> &'a str {
        self.str(section, key).unwrap_or(default)
    }

    pub fn f64(&self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        self.str(section, key)
            .map(|v| v.parse::<f64>().map_err(|_| bad(section, key, v, "a number")))
            .transpose()
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64(section, key)?.unwrap_or(default))
    }

    pub fn usize(&self, section: &str, key: &str) -> Result<Option<usize>, CliError> {
        self.str(section, key)
            .map(|v| v.parse::<usize>().map_err(|_| bad(section, key, v, "a nonnegative integer")))
            .transpose()
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self.usize(section, key)?.unwrap_or(default))
    }

    pub fn u64(&self, section: &str, key: &str) -> Result<Option<u64>, CliError> {
        self.str(section, key)
            .map(|v| v.parse::<u64>().map_err(|_| bad(section, key, v, "an unsigned integer")))
            .transpose()
    }

    pub fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool, CliError> {
        match self.str(section, key) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(bad(section, key, v, "true or false")),
        }
    }

    /// Comma separated list; an empty value gives an empty list.
    pub fn list<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>, CliError> {
        let Some(v) = self.str(section, key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|_| bad(section, key, v, "a comma separated list of numbers")))
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    /// All entries sorted by section and key, for the manifest.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.sections.iter().flat_map(|(s, kv)| kv.iter().map(move |(k, v)| (s.as_str(), k.as_str(), v.as_str())))
    }
}

fn strip_comment(v: &str) -> &str {
    match v.find(" #") {
        Some(i) => v[..i].trim_end(),
        None => v,
    }
}

fn bad(section: &str, key: &str, value: &str, what: &str) -> CliError {
    CliError::Config(format!("[{section}] {key} = '{value}' is not {what}"))
}
