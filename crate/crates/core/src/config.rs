//! Loading a [`ModelConfig`] from a TOML file, with scalar overrides.
//!
//! ```toml
//! example = 1            # optional preset supplying the coefficient functions
//! rho = 0.5
//! M = 400
//!
//! [tables]               # CSV files, paths relative to this file
//! u0 = "u0.csv"          # columns a,x,u0
//! u0_bar = "u0_bar.csv"  # columns t,x,u0_bar
//! D = "D.csv"            # columns t,a,D
//! mu = "mu.csv"          # columns a,mu
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{FkError, Result};
use crate::model::{preset, Coef2, ModelConfig, Mortality};
use crate::table::{Table1, Table2};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    example: Option<u32>,
    rho: Option<f64>,
    #[serde(rename = "K_gomp")]
    k_gomp: Option<f64>,
    d_gomp: Option<f64>,
    ell: Option<f64>,
    a_max: Option<f64>,
    #[serde(rename = "T")]
    t_final: Option<f64>,
    #[serde(rename = "M")]
    steps: Option<usize>,
    #[serde(rename = "N")]
    cutoff: Option<usize>,
    dx: Option<f64>,
    #[serde(default)]
    tables: Tables,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Tables {
    u0: Option<PathBuf>,
    u0_bar: Option<PathBuf>,
    #[serde(rename = "D")]
    diffusion: Option<PathBuf>,
    mu: Option<PathBuf>,
}

/// Reads a configuration file. Without `example`, every scalar key and the
/// `u0`, `u0_bar` and `D` tables are required.
pub fn load_config(path: &Path) -> Result<ModelConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| FkError::io(path, e))?;
    let raw: RawConfig = toml::from_str(&text).map_err(|e| FkError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base_dir = path.parent().unwrap_or(Path::new("."));
    from_raw(raw, base_dir)
}

fn from_raw(raw: RawConfig, base_dir: &Path) -> Result<ModelConfig> {
    let mut missing = Vec::new();
    let base = match raw.example {
        Some(id) => Some(preset(id)?),
        None => None,
    };
    macro_rules! scalar {
        ($field:ident, $key:literal) => {
            match (raw.$field, base.as_ref()) {
                (Some(v), _) => v,
                (None, Some(b)) => b.$field,
                (None, None) => {
                    missing.push(format!("missing key `{}`", $key));
                    Default::default()
                }
            }
        };
    }
    let rho = scalar!(rho, "rho");
    let k_gomp = scalar!(k_gomp, "K_gomp");
    let d_gomp = scalar!(d_gomp, "d_gomp");
    let ell = scalar!(ell, "ell");
    let a_max = scalar!(a_max, "a_max");
    let t_final = scalar!(t_final, "T");
    let steps = scalar!(steps, "M");
    let cutoff = scalar!(cutoff, "N");
    let dx = scalar!(dx, "dx");

    let resolve = |p: &PathBuf| base_dir.join(p);
    let mut table2 =
        |p: &Option<PathBuf>, name: &str, fallback: Option<Coef2>| -> Result<Option<Coef2>> {
            match p {
                Some(p) => {
                    let t = Table2::load(&resolve(p))?;
                    let (r, s, v) = t.min_entry();
                    if name != "D" && !(v > 0.0) {
                        missing.push(format!("{name} table not positive at ({r}, x={s}): {v}"));
                    }
                    if name == "D" && !(v >= 0.0) {
                        missing.push(format!("D table negative at (t={r}, a={s}): {v}"));
                    }
                    Ok(Some(Coef2::table(t)))
                }
                None if fallback.is_some() => Ok(fallback),
                None => {
                    missing.push(format!("missing table `{name}`"));
                    Ok(None)
                }
            }
        };
    let u0 = table2(&raw.tables.u0, "u0", base.as_ref().map(|b| b.u0.clone()))?;
    let u0_bar = table2(
        &raw.tables.u0_bar,
        "u0_bar",
        base.as_ref().map(|b| b.u0_bar.clone()),
    )?;
    let diffusion = table2(
        &raw.tables.diffusion,
        "D",
        base.as_ref().map(|b| b.diffusion.clone()),
    )?;
    let mortality = match &raw.tables.mu {
        Some(p) => Mortality::Table(Table1::load(&resolve(p), "mu")?),
        None => base
            .as_ref()
            .map_or(Mortality::Standard, |b| b.mortality.clone()),
    };

    match (u0, u0_bar, diffusion) {
        (Some(u0), Some(u0_bar), Some(diffusion)) if missing.is_empty() => Ok(ModelConfig {
            example: raw.example,
            rho,
            k_gomp,
            d_gomp,
            ell,
            a_max,
            t_final,
            steps,
            cutoff,
            dx,
            diffusion,
            mortality,
            u0,
            u0_bar,
        }),
        _ => Err(FkError::InvalidConfig(missing)),
    }
}

/// Applies `key=value` to a scalar field.
pub fn apply_override(cfg: &mut ModelConfig, assignment: &str) -> Result<()> {
    let bad = |m: String| FkError::InvalidConfig(vec![m]);
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| bad(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let value = value.trim();
    let real = || {
        value
            .parse::<f64>()
            .map_err(|e| bad(format!("override {key}: {e}")))
    };
    let int = || {
        value
            .parse::<usize>()
            .map_err(|e| bad(format!("override {key}: {e}")))
    };
    match key {
        "rho" => cfg.rho = real()?,
        "K_gomp" => cfg.k_gomp = real()?,
        "d_gomp" => cfg.d_gomp = real()?,
        "ell" => cfg.ell = real()?,
        "a_max" => cfg.a_max = real()?,
        "T" => cfg.t_final = real()?,
        "M" => cfg.steps = int()?,
        "N" => cfg.cutoff = int()?,
        "dx" => cfg.dx = real()?,
        other => return Err(bad(format!("unknown scalar key `{other}`"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_based_file_with_overrides() {
        let raw: RawConfig = toml::from_str("example = 2\nM = 400\nrho = 1.5\n").unwrap();
        let cfg = from_raw(raw, Path::new(".")).unwrap();
        assert_eq!(cfg.steps, 400);
        assert_eq!(cfg.rho, 1.5);
        assert_eq!(cfg.cutoff, 6);
        assert!((cfg.u0.eval(7.0, 0.0) - 1.0 / 1.075).abs() < 1e-15);
    }

    #[test]
    fn missing_keys_all_listed() {
        let raw: RawConfig = toml::from_str("rho = 1.0\n").unwrap();
        match from_raw(raw, Path::new(".")) {
            Err(FkError::InvalidConfig(p)) => assert_eq!(p.len(), 11, "{p:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RawConfig>("bogus = 1\n").is_err());
    }

    #[test]
    fn overrides() {
        let mut cfg = preset(1).unwrap();
        apply_override(&mut cfg, "M=800").unwrap();
        apply_override(&mut cfg, "T = 1.5").unwrap();
        assert_eq!(cfg.steps, 800);
        assert_eq!(cfg.t_final, 1.5);
        assert!(apply_override(&mut cfg, "colour=red").is_err());
        assert!(apply_override(&mut cfg, "M=x").is_err());
        assert!(apply_override(&mut cfg, "M").is_err());
    }
}
