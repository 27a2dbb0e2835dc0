//! Run configuration: built-in defaults, optional experiment preset, optional
//! key-value file, then command-line flags, each layer overriding the previous one.
//!
//! The file format is one `key = value` per line with the flag names as keys
//! (without the leading dashes); `#` starts a comment.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use polyedge::BasisKind;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Ground truth: Sobel on the clean image.
    pub gt: f64,
    /// Baseline: Sobel on the noisy image.
    pub sobel: f64,
    /// Sobel on the synthesized image.
    pub synth: f64,
    /// Combined Sobel magnitudes of the parameter maps.
    pub parmap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub denoised: bool,
    pub mosaic: bool,
    pub gradmaps: bool,
    pub edges: bool,
    pub csv: bool,
}

impl Emit {
    pub const ALL: Emit = Emit {
        denoised: true,
        mosaic: true,
        gradmaps: true,
        edges: true,
        csv: true,
    };
}

impl FromStr for Emit {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let mut e = Emit {
            denoised: false,
            mosaic: false,
            gradmaps: false,
            edges: false,
            csv: false,
        };
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match item {
                "denoised" => e.denoised = true,
                "mosaic" => e.mosaic = true,
                "gradmaps" => e.gradmaps = true,
                "edges" => e.edges = true,
                "csv" => e.csv = true,
                "all" => e = Emit::ALL,
                other => return Err(CliError::Config(format!("unknown emit item `{other}`"))),
            }
        }
        Ok(e)
    }
}

/// Threshold grid `start:step:end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub step: f64,
    pub end: f64,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        let grid = polyedge::eval::threshold_grid(self.start, self.step, self.end)?;
        if self.start < 0.0 || self.end > 1.0 {
            return Err(CliError::Config(format!(
                "sweep grid must lie within [0, 1], got {}:{}:{}",
                self.start, self.step, self.end
            )));
        }
        Ok(grid)
    }
}

impl FromStr for GridSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || CliError::Config(format!("sweep grid must be start:step:end, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        Ok(GridSpec {
            start: num(parts[0])?,
            step: num(parts[1])?,
            end: num(parts[2])?,
        })
    }
}

/// Named parameter sets of the five reference experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    CoinsSigma20,
    CoinsSigma30,
    CoinsSigma30Orthonormal,
    Cameraman,
    Rice,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::CoinsSigma20,
        Preset::CoinsSigma30,
        Preset::CoinsSigma30Orthonormal,
        Preset::Cameraman,
        Preset::Rice,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::CoinsSigma20 => "coins-s20",
            Preset::CoinsSigma30 => "coins-s30",
            Preset::CoinsSigma30Orthonormal => "coins-s30-ortho",
            Preset::Cameraman => "cameraman",
            Preset::Rice => "rice",
        }
    }

    /// Values the preset fixes; input and output paths are always left to the user.
    pub fn layer(self) -> RawConfig {
        let (sigma, delta, iters, basis, t) = match self {
            Preset::CoinsSigma20 => (
                20.0,
                4000.0,
                500,
                BasisKind::Standard,
                [0.15, 0.24, 0.14, 0.12],
            ),
            Preset::CoinsSigma30 => (
                30.0,
                6000.0,
                500,
                BasisKind::Standard,
                [0.15, 0.29, 0.16, 0.18],
            ),
            Preset::CoinsSigma30Orthonormal => (
                30.0,
                8000.0,
                10_000,
                BasisKind::Orthonormal,
                [0.15, 0.29, 0.14, 0.14],
            ),
            Preset::Cameraman => (
                30.0,
                7000.0,
                500,
                BasisKind::Standard,
                [0.25, 0.29, 0.18, 0.16],
            ),
            Preset::Rice => (
                30.0,
                8000.0,
                500,
                BasisKind::Standard,
                [0.24, 0.4, 0.2, 0.18],
            ),
        };
        RawConfig {
            degree: Some(2),
            basis: Some(basis),
            sigma: Some(sigma),
            delta: Some(delta),
            iters: Some(iters),
            thresh_gt: Some(t[0]),
            thresh_sobel: Some(t[1]),
            thresh_synth: Some(t[2]),
            thresh_parmap: Some(t[3]),
            ..RawConfig::default()
        }
    }
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown preset `{s}`")))
    }
}

/// One configuration layer; unset fields fall through to the layer below.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub degree: Option<usize>,
    pub basis: Option<BasisKind>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    pub iters: Option<usize>,
    pub thresh_gt: Option<f64>,
    pub thresh_sobel: Option<f64>,
    pub thresh_synth: Option<f64>,
    pub thresh_parmap: Option<f64>,
    pub emit: Option<Emit>,
    pub sweep_grid: Option<GridSpec>,
    pub tolerance_px: Option<usize>,
    pub preset: Option<Preset>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse `{value}` for key `{key}`")))
}

impl RawConfig {
    /// Sets one field from its flag name and textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "out-dir" => self.out_dir = Some(PathBuf::from(value)),
            "degree" => self.degree = Some(parse(key, value)?),
            "basis" => self.basis = Some(value.parse()?),
            "sigma" => self.sigma = Some(parse(key, value)?),
            "seed" => self.seed = Some(parse(key, value)?),
            "delta" => self.delta = Some(parse(key, value)?),
            "lambda" => self.lambda = Some(parse(key, value)?),
            "iters" => self.iters = Some(parse(key, value)?),
            "thresh-gt" => self.thresh_gt = Some(parse(key, value)?),
            "thresh-sobel" => self.thresh_sobel = Some(parse(key, value)?),
            "thresh-synth" => self.thresh_synth = Some(parse(key, value)?),
            "thresh-parmap" => self.thresh_parmap = Some(parse(key, value)?),
            "emit" => self.emit = Some(value.parse()?),
            "sweep-grid" => self.sweep_grid = Some(value.parse()?),
            "tolerance-px" => self.tolerance_px = Some(parse(key, value)?),
            "preset" => self.preset = Some(value.parse()?),
            other => {
                return Err(CliError::Config(format!(
                    "unknown configuration key `{other}`"
                )))
            }
        }
        Ok(())
    }

    pub fn from_file_contents(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            raw.set(key.trim(), value.trim())?;
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_file_contents(&text)
    }

    /// Fields set in `self` win over those in `lower`.
    pub fn over(self, lower: RawConfig) -> RawConfig {
        RawConfig {
            input: self.input.or(lower.input),
            out_dir: self.out_dir.or(lower.out_dir),
            degree: self.degree.or(lower.degree),
            basis: self.basis.or(lower.basis),
            sigma: self.sigma.or(lower.sigma),
            seed: self.seed.or(lower.seed),
            delta: self.delta.or(lower.delta),
            lambda: self.lambda.or(lower.lambda),
            iters: self.iters.or(lower.iters),
            thresh_gt: self.thresh_gt.or(lower.thresh_gt),
            thresh_sobel: self.thresh_sobel.or(lower.thresh_sobel),
            thresh_synth: self.thresh_synth.or(lower.thresh_synth),
            thresh_parmap: self.thresh_parmap.or(lower.thresh_parmap),
            emit: self.emit.or(lower.emit),
            sweep_grid: self.sweep_grid.or(lower.sweep_grid),
            tolerance_px: self.tolerance_px.or(lower.tolerance_px),
            preset: self.preset.or(lower.preset),
        }
    }

    /// Stacks `flags` over the optional file and preset, applies defaults and validates.
    pub fn resolve(flags: RawConfig, file: Option<RawConfig>) -> Result<RunConfig> {
        let upper = match file {
            Some(file) => flags.over(file),
            None => flags,
        };
        let merged = match upper.preset {
            Some(p) => upper.over(p.layer()),
            None => upper,
        };
        merged.finish()
    }

    fn finish(self) -> Result<RunConfig> {
        let input = self
            .input
            .ok_or_else(|| CliError::Config("missing required key `input`".into()))?;
        let cfg = RunConfig {
            input,
            out_dir: self.out_dir.unwrap_or_else(|| PathBuf::from("out")),
            degree: self.degree.unwrap_or(2),
            basis: self.basis.unwrap_or(BasisKind::Standard),
            sigma: self.sigma.unwrap_or(20.0),
            seed: self.seed.unwrap_or(0),
            delta: self.delta.unwrap_or(4000.0),
            lambda: self.lambda.unwrap_or(1.0),
            iters: self.iters.unwrap_or(500),
            thresholds: Thresholds {
                gt: self.thresh_gt.unwrap_or(0.15),
                sobel: self.thresh_sobel.unwrap_or(0.24),
                synth: self.thresh_synth.unwrap_or(0.14),
                parmap: self.thresh_parmap.unwrap_or(0.12),
            },
            emit: self.emit.unwrap_or(Emit::ALL),
            sweep_grid: self.sweep_grid.unwrap_or(GridSpec {
                start: 0.0,
                step: 0.01,
                end: 1.0,
            }),
            tolerance_px: self.tolerance_px.unwrap_or(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub out_dir: PathBuf,
    pub degree: usize,
    pub basis: BasisKind,
    pub sigma: f64,
    pub seed: u64,
    pub delta: f64,
    pub lambda: f64,
    pub iters: usize,
    pub thresholds: Thresholds,
    pub emit: Emit,
    pub sweep_grid: GridSpec,
    pub tolerance_px: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !self.input.is_file() {
            return bad(format!(
                "input {} is not a readable file",
                self.input.display()
            ));
        }
        if self.out_dir.exists() && !self.out_dir.is_dir() {
            return bad(format!(
                "out-dir {} is not a directory",
                self.out_dir.display()
            ));
        }
        if self.degree > 8 {
            return bad(format!(
                "degree {} is unreasonably large (max 8)",
                self.degree
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be nonnegative, got {}", self.delta));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.iters == 0 {
            return bad("iters must be positive".into());
        }
        let t = self.thresholds;
        for (name, v) in [
            ("gt", t.gt),
            ("sobel", t.sobel),
            ("synth", t.synth),
            ("parmap", t.parmap),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("thresh-{name} must lie in [0, 1], got {v}"));
            }
        }
        self.sweep_grid.values()?;
        Ok(())
    }
}
