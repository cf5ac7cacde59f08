//! Run configuration: a versioned TOML file merged with command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use oscillate::bench::Field;
use oscillate::operator::{builtin, OperatorSpec};
use oscillate::SymMatrix;

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Cell,
    Effective,
    Check,
    Solve,
    Blayer,
    Sweep,
    Campanato,
    Certify,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Cell => "cell",
            Self::Effective => "effective",
            Self::Check => "check",
            Self::Solve => "solve",
            Self::Blayer => "blayer",
            Self::Sweep => "sweep",
            Self::Campanato => "campanato",
            Self::Certify => "certify",
        }
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every overridable setting. The same struct is read from the config file
/// and from flags; flags win.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Schema version of the config file.
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
    /// Subcommand the file was written for.
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandKind>,
    /// Built-in operator name or path to an operator TOML file.
    #[arg(long)]
    pub spec: Option<String>,
    /// Anchor matrix: `m` in 1-d, `m11,m22,m12` in 2-d.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub m: Option<Vec<f64>>,
    /// Cell resolution, or grid intervals for `solve`.
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Holder exponent of the certificates.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Contraction factor of the Campanato cascade.
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Grid points per period.
    #[arg(long)]
    pub p: Option<usize>,
    /// `mean-correction` or `vanishing-discount`.
    #[arg(long)]
    pub method: Option<String>,
    /// Property checks run by `check`.
    #[arg(long, value_delimiter = ',')]
    pub lemma: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    /// Constant part of the right-hand side.
    #[arg(long, allow_hyphen_values = true)]
    pub rhs: Option<f64>,
    /// Gradient of the right-hand side.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub rhs_gradient: Option<Vec<f64>>,
    /// Constant boundary value.
    #[arg(long, allow_hyphen_values = true)]
    pub boundary: Option<f64>,
    /// Lower end of each tabulated matrix coordinate.
    #[arg(long, allow_hyphen_values = true)]
    pub lower: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub upper: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Number of property-check samples.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

macro_rules! merge_fields {
    ($flags:expr, $file:expr, $($f:ident),*) => {
        Settings { $($f: $flags.$f.clone().or_else(|| $file.$f.clone())),* }
    };
}

impl Settings {
    fn merged(flags: &Settings, file: &Settings) -> Settings {
        merge_fields!(
            flags, file, version, command, spec, m, resolution, epsilons, tol, alpha, mu, depth, p, method, lemma,
            center, rhs, rhs_gradient, boundary, lower, upper, step, samples, out, seed
        )
    }
}

/// Where a setting came from, for error messages.
#[derive(Clone, Debug)]
struct Origin {
    path: PathBuf,
    text: String,
}

impl Origin {
    fn line_of(&self, key: &str) -> Option<usize> {
        self.text.lines().position(|l| {
            let t = l.trim_start();
            t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
        })
    }
}

/// Settings after merging, with defaults still unresolved.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: CommandKind,
    pub settings: Settings,
    pub operator: OperatorSpec,
    pub out: PathBuf,
    pub force: bool,
    pub cache_dir: Option<PathBuf>,
    flags: Settings,
    origin: Option<Origin>,
}

impl RunConfig {
    /// Merges the file (if any) with flags and checks every setting before
    /// any numerical work.
    pub fn load(
        command: CommandKind,
        flags: Settings,
        config: Option<&Path>,
        force: bool,
        cache_dir: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        let (file, origin) = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: cannot read config: {e}", path.display())))?;
                let file: Settings = toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.to_string().trim_end())))?;
                (file, Some(Origin { path: path.to_path_buf(), text }))
            }
            None => (Settings::default(), None),
        };
        let mut cfg = RunConfig {
            command,
            settings: Settings::merged(&flags, &file),
            operator: builtin("cos1d").expect("builtin"),
            out: PathBuf::new(),
            force,
            cache_dir,
            flags,
            origin,
        };
        if cfg.origin.is_some() && cfg.settings.version != Some(CONFIG_VERSION) {
            return Err(cfg.error("version", format!("config schema version must be {CONFIG_VERSION}")));
        }
        if let Some(c) = cfg.settings.command {
            if c != command {
                return Err(cfg.error("command", format!("file is for `{c}` but `{command}` was requested")));
            }
        }
        cfg.operator = cfg.resolve_operator()?;
        cfg.out = cfg.settings.out.clone().unwrap_or_else(|| PathBuf::from("oscillate-out").join(command.name()));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Error anchored at the flag or config line that set `key`.
    pub fn error(&self, key: &str, message: impl fmt::Display) -> CliError {
        let flag_set = serde_json::to_value(&self.flags)
            .ok()
            .and_then(|v| v.get(key).cloned())
            .is_some_and(|v| !v.is_null());
        if flag_set {
            return CliError::Config(format!("--{}: {message}", key.replace('_', "-")));
        }
        match &self.origin {
            Some(o) => match o.line_of(key) {
                Some(line) => CliError::Config(format!("{}:{}: {key}: {message}", o.path.display(), line + 1)),
                None => CliError::Config(format!("{}: {key}: {message}", o.path.display())),
            },
            None => CliError::Config(format!("{key}: {message}")),
        }
    }

    fn resolve_operator(&self) -> Result<OperatorSpec, CliError> {
        let default = match self.command {
            CommandKind::Blayer => "separable2d",
            _ => "cos1d",
        };
        let name = self.settings.spec.clone().unwrap_or_else(|| default.into());
        if let Ok(spec) = builtin(&name) {
            return Ok(spec);
        }
        let mut path = PathBuf::from(&name);
        let from_file = self.flags.spec.is_none() && self.origin.is_some();
        if path.is_relative() && from_file {
            if let Some(dir) = self.origin.as_ref().and_then(|o| o.path.parent()) {
                path = dir.join(path);
            }
        }
        let text = std::fs::read_to_string(&path)
            .map_err(|e| self.error("spec", format!("`{name}` is neither a built-in nor a readable file ({e})")))?;
        OperatorSpec::from_toml(&text).map_err(|e| self.error("spec", format!("{}: {e}", path.display())))
    }

    fn validate(&self) -> Result<(), CliError> {
        let s = &self.settings;
        let dim = self.operator.dim;
        let positive = |key: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(self.error(key, format!("{x} must be positive"))),
            _ => Ok(()),
        };
        positive("tol", s.tol)?;
        positive("mu", s.mu)?;
        positive("step", s.step)?;
        if let Some(a) = s.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(self.error("alpha", format!("{a} must lie in (0, 1]")));
            }
        }
        if let Some(mu) = s.mu {
            if mu >= 1.0 {
                return Err(self.error("mu", format!("{mu} must be below 1")));
            }
        }
        if let Some(m) = &s.m {
            let want = if dim == 1 { 1 } else { 3 };
            if m.len() != want || m.iter().any(|v| !v.is_finite()) {
                return Err(self.error("m", format!("expected {want} finite coordinates for a {dim}-d operator")));
            }
        }
        if let Some(c) = &s.center {
            if c.len() != dim || c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(self.error("center", format!("expected {dim} coordinates in [0, 1]")));
            }
        }
        if let Some(g) = &s.rhs_gradient {
            if g.len() != dim {
                return Err(self.error("rhs_gradient", format!("expected {dim} components")));
            }
        }
        if let Some(eps) = &s.epsilons {
            if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
                return Err(self.error("epsilons", "need a non-empty list of values in (0, 1]"));
            }
        }
        if let Some(method) = &s.method {
            method.parse::<oscillate::CellMethod>().map_err(|e| self.error("method", e))?;
        }
        if let Some(lemmas) = &s.lemma {
            for l in lemmas {
                if !crate::lemmas::NAMES.contains(&l.as_str()) && l != "all" {
                    return Err(self.error("lemma", format!("unknown check `{l}`; known: {}", crate::lemmas::NAMES.join(", "))));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (s.lower, s.upper) {
            if lo >= hi {
                return Err(self.error("upper", format!("{hi} must exceed lower {lo}")));
            }
        }
        if self.out.join("manifest.json").exists() && !self.force {
            return Err(self.error("out", format!("{} already holds a run; pass --force to overwrite", self.out.display())));
        }
        if self.out.exists() && !self.out.is_dir() {
            return Err(self.error("out", format!("{} is not a directory", self.out.display())));
        }
        if let Some(dir) = &self.cache_dir {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Config(format!("OSCILLATE_CACHE_DIR {}: {e}", dir.display())))?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.operator.dim
    }

    pub fn anchor(&self) -> SymMatrix {
        match &self.settings.m {
            Some(m) => SymMatrix::from_coords(self.dim(), m),
            None => SymMatrix::identity(self.dim()),
        }
    }

    pub fn tol(&self, default: f64) -> f64 {
        self.settings.tol.unwrap_or(default)
    }

    pub fn cell_resolution(&self) -> usize {
        self.settings.resolution.unwrap_or(if self.dim() == 1 { 256 } else { 32 })
    }

    pub fn points_per_period(&self) -> usize {
        self.settings.p.unwrap_or(if self.dim() == 1 { 32 } else { 8 })
    }

    pub fn epsilons(&self, default: &[f64]) -> Vec<f64> {
        self.settings.epsilons.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn rhs(&self, default: f64) -> Field {
        let value = self.settings.rhs.unwrap_or(default);
        match &self.settings.rhs_gradient {
            Some(g) => Field::Polynomial { value, gradient: [g[0], g.get(1).copied().unwrap_or(0.0)], hessian: [0.0; 3] },
            None => Field::constant(value),
        }
    }

    pub fn boundary(&self) -> Field {
        Field::constant(self.settings.boundary.unwrap_or(0.0))
    }

    pub fn center(&self) -> [f64; 2] {
        match &self.settings.center {
            Some(c) => [c[0], c.get(1).copied().unwrap_or(0.0)],
            None if self.dim() == 1 => [0.5, 0.0],
            None => [0.5, 0.5],
        }
    }

    pub fn seed(&self) -> u64 {
        self.settings.seed.unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file = Settings { tol: Some(1e-6), p: Some(16), ..Settings::default() };
        let flags = Settings { tol: Some(1e-9), ..Settings::default() };
        let merged = Settings::merged(&flags, &file);
        assert_eq!(merged.tol, Some(1e-9));
        assert_eq!(merged.p, Some(16));
    }

    #[test]
    fn line_lookup_ignores_prefix_matches() {
        let o = Origin { path: "run.toml".into(), text: "version = 1\nmu_extra = 2\nmu = 3\n".into() };
        assert_eq!(o.line_of("mu"), Some(2));
        assert_eq!(o.line_of("tol"), None);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<Settings>("version = 1\nbogus = 2\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
