//! Run configuration as flat `key = value` text.
//!
//! Every key can also be set from the command line; flags are applied after
//! the file, so they win. Map parameters use the key `param.<name>`.

use crate::certificate::{Flavor, DEFAULT_SLACK};
use crate::error::{Error, Result};
use crate::foliation::{GridOptions, Rect};
use crate::linalg::Vec2;
use crate::maps::{builtin, MapSpec};
use std::path::PathBuf;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "HYPCOORDS_OUT";
pub const DEFAULT_OUT_DIR: &str = "hypcoords-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        self != OutputFormat::Json
    }
    pub fn json(self) -> bool {
        self != OutputFormat::Csv
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub map: String,
    /// Parameter overrides in the order they were given.
    pub params: Vec<(String, f64)>,
    pub x0: f64,
    pub y0: f64,
    /// Iterates applied to `(x0, y0)` before the orbit starts.
    pub burn_in: usize,
    pub k: usize,
    pub flavor: Flavor,
    pub eta: f64,
    pub h: f64,
    pub rect: [f64; 4],
    pub spacing: f64,
    pub half_length: f64,
    pub step: f64,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub trials: usize,
    pub grid: usize,
    pub format: OutputFormat,
    /// A ledger file to check instead of fitting one.
    pub ledger: Option<PathBuf>,
    pub scan_gamma: f64,
    pub scan_n: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            map: "henon".into(),
            params: Vec::new(),
            x0: 0.0,
            y0: 0.0,
            burn_in: 0,
            k: 20,
            flavor: Flavor::SingularII,
            eta: DEFAULT_SLACK,
            h: crate::bounds::slow::DEFAULT_FD_STEP,
            rect: [-1.5, 1.5, -0.5, 0.5],
            spacing: 0.25,
            half_length: 0.1,
            step: crate::foliation::DEFAULT_STEP,
            out_dir: None,
            seed: 0,
            trials: 1000,
            grid: 1_000_000,
            format: OutputFormat::Both,
            ledger: None,
            scan_gamma: 2.0,
            scan_n: 9,
        }
    }
}

/// Parses a float, accepting the Unicode minus sign.
pub fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let s = v.trim().replace('\u{2212}', "-");
    s.parse::<f64>().map_err(|_| Error::Config(format!("`{key}`: bad number `{v}`")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse::<usize>().map_err(|_| Error::Config(format!("`{key}`: bad count `{v}`")))
}

fn parse_list(key: &str, v: &str, n: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = v.split(',').map(|p| parse_f64(key, p)).collect::<Result<_>>()?;
    if vals.len() != n {
        return Err(Error::Config(format!("`{key}` needs {n} comma-separated numbers, got {}", vals.len())));
    }
    Ok(vals)
}

impl RunConfig {
    /// Parses configuration text over the defaults and validates it.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are
    /// skipped; unknown keys are errors.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Sets one key. Does not validate cross-field constraints.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        if let Some(name) = key.strip_prefix("param.") {
            if name.is_empty() {
                return Err(Error::Config("empty parameter name".into()));
            }
            self.params.push((name.to_string(), parse_f64(key, v)?));
            return Ok(());
        }
        match key {
            "map" => self.map = v.to_string(),
            "matrix" => {
                let m = parse_list(key, v, 4)?;
                for (name, x) in ["m11", "m12", "m21", "m22"].iter().zip(m) {
                    self.params.push((name.to_string(), x));
                }
            }
            "x0" => self.x0 = parse_f64(key, v)?,
            "y0" => self.y0 = parse_f64(key, v)?,
            "burn_in" => self.burn_in = parse_usize(key, v)?,
            "k" => self.k = parse_usize(key, v)?,
            "flavor" => self.flavor = v.parse()?,
            "eta" => self.eta = parse_f64(key, v)?,
            "h" => self.h = parse_f64(key, v)?,
            "rect" => {
                let r = parse_list(key, v, 4)?;
                self.rect = [r[0], r[1], r[2], r[3]];
            }
            "spacing" => self.spacing = parse_f64(key, v)?,
            "half_length" => self.half_length = parse_f64(key, v)?,
            "step" => self.step = parse_f64(key, v)?,
            "out" => self.out_dir = Some(PathBuf::from(v)),
            "seed" => self.seed = v.parse().map_err(|_| Error::Config(format!("`seed`: bad value `{v}`")))?,
            "trials" => self.trials = parse_usize(key, v)?,
            "grid" => self.grid = parse_usize(key, v)?,
            "format" => {
                self.format = match v {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    "both" => OutputFormat::Both,
                    _ => return Err(Error::Config(format!("`format` must be csv, json or both, got `{v}`"))),
                }
            }
            "ledger" => self.ledger = Some(PathBuf::from(v)),
            "scan_gamma" => self.scan_gamma = parse_f64(key, v)?,
            "scan_n" => self.scan_n = parse_usize(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("`{name}` must be positive, got {v}")))
            }
        };
        if self.k == 0 {
            return Err(Error::Config("`k` must be at least 1".into()));
        }
        if !(self.eta > 1.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("`eta` must exceed 1, got {}", self.eta)));
        }
        pos("h", self.h)?;
        pos("spacing", self.spacing)?;
        pos("half_length", self.half_length)?;
        pos("step", self.step)?;
        pos("scan_gamma", self.scan_gamma)?;
        if !(self.x0.is_finite() && self.y0.is_finite()) {
            return Err(Error::Config("start point must be finite".into()));
        }
        if self.trials == 0 || self.scan_n == 0 {
            return Err(Error::Config("`trials` and `scan_n` must be at least 1".into()));
        }
        if self.grid < 4 {
            return Err(Error::Config("`grid` must be at least 4".into()));
        }
        Rect::new(self.rect[0], self.rect[1], self.rect[2], self.rect[3])
            .map_err(|e| Error::Config(format!("`rect`: {e}")))?;
        Ok(())
    }

    pub fn map_spec(&self) -> Result<MapSpec> {
        builtin(&self.map, &self.params)
    }

    /// `(x0, y0)` after the burn-in iterates.
    pub fn start(&self, spec: &MapSpec) -> Result<Vec2> {
        let mut p = Vec2::new(self.x0, self.y0);
        for _ in 0..self.burn_in {
            p = spec.eval_map(p)?;
        }
        Ok(p)
    }

    pub fn rect(&self) -> Result<Rect> {
        Rect::new(self.rect[0], self.rect[1], self.rect[2], self.rect[3])
    }

    pub fn grid_options(&self) -> GridOptions {
        GridOptions { spacing: self.spacing, half_length: self.half_length, step: self.step }
    }

    /// The explicit directory, else `$HYPCOORDS_OUT`, else `hypcoords-out`.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let mut cfg = RunConfig::from_kv("map = linear\nmatrix = 2, 0, 0, −0.5 # diagonal\nk = 7\n\nflavor = I\n").unwrap();
        assert_eq!(cfg.k, 7);
        assert_eq!(cfg.flavor, Flavor::SingularI);
        assert_eq!(cfg.params.len(), 4);
        assert_eq!(cfg.params[3], ("m22".to_string(), -0.5));
        cfg.set("k", "3").unwrap();
        assert_eq!(cfg.k, 3);
        assert!(cfg.map_spec().is_ok());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(RunConfig::from_kv("colour = red"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_kv("eta = 1.0"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_kv("h = -1e-5"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_kv("k = 0"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_kv("rect = 1,0,0,1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_kv("matrix = 1,2,3"), Err(Error::Config(_))));
        assert!(RunConfig::from_kv("k").is_err());
    }

    #[test]
    fn map_parameters_reach_the_map() {
        let cfg = RunConfig::from_kv("param.a = 1.2\nparam.b = 0.2").unwrap();
        let spec = cfg.map_spec().unwrap();
        assert_eq!(spec.parameter("a"), Some(1.2));
        let bad = RunConfig::from_kv("param.q = 1").unwrap();
        assert!(matches!(bad.map_spec(), Err(Error::BadParameter(_))));
    }
}
