//! Flat `key=value` configuration with `#` comments, merged with command-line
//! flags. Every value read by an experiment is recorded so the output header
//! can echo the effective configuration, defaults included.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Keys that are never experiment parameters.
pub const META_KEYS: [&str; 4] = ["experiment", "format", "version", "out"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::config(
                "format",
                format!("unknown format `{other}` (csv|json)"),
            )),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Lowercase, `-` to `_`: `l-over-L` and `l_over_l` name the same key.
pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

/// Parses a config file. Accepts the flat text format, a CSV output file (its
/// `# key=value` header) or a JSON output file (its `config` object).
pub fn load_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        return parse_json(&text);
    }
    parse_text(&text)
}

pub fn parse_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    let mut seen_header = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        // output headers are `# key=value`; plain comments carry no `=`
        let line = match line.strip_prefix('#') {
            Some(rest) if rest.contains('=') => {
                seen_header = true;
                rest.trim()
            }
            Some(_) => continue,
            None => line,
        };
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            // the column names of a CSV output end its header
            if seen_header {
                break;
            }
            return Err(CliError::config(
                "config",
                format!("line {}: expected key=value", lineno + 1),
            ));
        };
        let key = normalize_key(k);
        if key.is_empty() {
            return Err(CliError::config("config", format!("line {}: empty key", lineno + 1)));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn parse_json(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::config("config", format!("bad JSON: {e}")))?;
    let obj = value
        .get("config")
        .and_then(|c| c.as_object())
        .ok_or_else(|| CliError::config("config", "JSON file has no `config` object"))?;
    obj.iter()
        .map(|(k, v)| {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            Ok((normalize_key(k), s))
        })
        .collect()
}

/// Typed, validated access to the merged configuration.
#[derive(Debug)]
pub struct Params {
    raw: BTreeMap<String, String>,
    used: RefCell<BTreeMap<String, String>>,
}

impl Params {
    pub fn new(raw: BTreeMap<String, String>) -> Self {
        Params {
            raw,
            used: RefCell::new(BTreeMap::new()),
        }
    }

    fn lookup(&self, key: &str, default: &str) -> String {
        let v = self.raw.get(key).cloned().unwrap_or_else(|| default.to_string());
        self.used.borrow_mut().insert(key.to_string(), v.clone());
        v
    }

    pub fn f64(&self, key: &'static str, default: &str) -> Result<f64, CliError> {
        let v = self.lookup(key, default);
        let x: f64 = v
            .parse()
            .map_err(|_| CliError::config(key, format!("`{v}` is not a number")))?;
        if !x.is_finite() {
            return Err(CliError::config(key, format!("`{v}` is not finite")));
        }
        Ok(x)
    }

    /// A real in `[lo, hi]`.
    pub fn f64_in(&self, key: &'static str, default: &str, lo: f64, hi: f64) -> Result<f64, CliError> {
        let x = self.f64(key, default)?;
        if !(lo..=hi).contains(&x) {
            return Err(CliError::config(key, format!("{x} outside [{lo}, {hi}]")));
        }
        Ok(x)
    }

    pub fn usize(&self, key: &'static str, default: &str, min: usize) -> Result<usize, CliError> {
        let v = self.lookup(key, default);
        let n: usize = v
            .parse()
            .map_err(|_| CliError::config(key, format!("`{v}` is not a nonnegative integer")))?;
        if n < min {
            return Err(CliError::config(key, format!("{n} is below the minimum {min}")));
        }
        Ok(n)
    }

    pub fn u64(&self, key: &'static str, default: &str) -> Result<u64, CliError> {
        let v = self.lookup(key, default);
        v.parse()
            .map_err(|_| CliError::config(key, format!("`{v}` is not a nonnegative integer")))
    }

    /// An optional integer; `auto` means "derive it".
    pub fn opt_usize(&self, key: &'static str, min: usize) -> Result<Option<usize>, CliError> {
        match self.lookup(key, "auto").as_str() {
            "auto" => Ok(None),
            _ => self.usize(key, "auto", min).map(Some),
        }
    }

    pub fn choice(&self, key: &'static str, default: &str, allowed: &[&str]) -> Result<String, CliError> {
        let v = self.lookup(key, default);
        if allowed.contains(&v.as_str()) {
            Ok(v)
        } else {
            Err(CliError::config(
                key,
                format!("`{v}` is not one of {}", allowed.join("|")),
            ))
        }
    }

    pub fn grid(&self, key: &'static str, default: &str) -> Result<Vec<f64>, CliError> {
        let v = self.lookup(key, default);
        parse_grid(&v).map_err(|reason| CliError::config(key, reason))
    }

    /// A grid whose points all lie in `[lo, hi]`.
    pub fn grid_in(&self, key: &'static str, default: &str, lo: f64, hi: f64) -> Result<Vec<f64>, CliError> {
        let g = self.grid(key, default)?;
        if let Some(x) = g.iter().find(|x| !(lo..=hi).contains(*x)) {
            return Err(CliError::config(key, format!("grid point {x} outside [{lo}, {hi}]")));
        }
        Ok(g)
    }

    /// Effective values, defaults included.
    pub fn effective(&self) -> BTreeMap<String, String> {
        self.used.borrow().clone()
    }
}

/// `a:b:step` (inclusive of `b`) or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| -> Result<f64, String> {
        let t = t.trim();
        let bad = || format!("`{t}` is not a number");
        // `2pi`, `0.5pi`, `pi` for phase grids
        let x = match t.strip_suffix("pi") {
            Some("") => std::f64::consts::PI,
            Some("-") => -std::f64::consts::PI,
            Some(c) => c.parse::<f64>().map_err(|_| bad())? * std::f64::consts::PI,
            None => t.parse().map_err(|_| bad())?,
        };
        if x.is_finite() {
            Ok(x)
        } else {
            Err(format!("`{t}` is not finite"))
        }
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts[..] else {
            return Err(format!("range `{s}` is not a:b:step"));
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if step == 0.0 || (b - a) * step < 0.0 {
            return Err(format!("step {step} does not lead from {a} to {b}"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        if n > 10_000_000 {
            return Err(format!("range `{s}` has too many points"));
        }
        // 0:1:0.01 should yield 0.07, not 0.07000000000000001; only rounding
        // noise is removed, so pi multiples keep their full precision
        return Ok((0..=n)
            .map(|i| {
                let x = a + i as f64 * step;
                let snapped = (x * 1e12).round() / 1e12;
                if (x - snapped).abs() <= 8.0 * f64::EPSILON * x.abs().max(1.0) {
                    snapped
                } else {
                    x
                }
            })
            .collect());
    }
    let values = s.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err("empty grid".into());
    }
    Ok(values)
}
