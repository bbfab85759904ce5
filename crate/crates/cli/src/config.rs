//! Run configuration: defaults, a strict `key = value` file and command-line
//! flags, applied in that order.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use qmem::kernel::{DEFAULT_DURATION, DEFAULT_LENGTH, DEFAULT_RESOLUTION};
use qmem::{CoordinateTransform, CycleParams, MixNorm, StorageModel, DEFAULT_MODES};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TransformArg {
    Scalar,
    Density,
    Atomic,
}

impl From<TransformArg> for CoordinateTransform {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::Scalar => CoordinateTransform::Scalar,
            TransformArg::Density => CoordinateTransform::Density,
            TransformArg::Atomic => CoordinateTransform::Atomic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MixNormArg {
    Excitation,
    Amplitude,
}

impl From<MixNormArg> for MixNorm {
    fn from(n: MixNormArg) -> Self {
        match n {
            MixNormArg::Excitation => MixNorm::Excitation,
            MixNormArg::Amplitude => MixNorm::Amplitude,
        }
    }
}

/// Every setting of one run after all layers are applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub length: f64,
    pub write_duration: f64,
    pub read_duration: f64,
    pub nz: usize,
    pub nt: usize,
    pub inner_n: usize,
    pub modes: usize,
    pub storage: StorageModel,
    pub out: PathBuf,
    pub format: Format,
}

impl RunConfig {
    pub fn params(&self) -> Result<CycleParams, CliError> {
        let p = CycleParams::new(self.length, self.write_duration, self.read_duration)?
            .with_resolution(self.nz, self.nt)?
            .with_inner_nodes(self.inner_n)?;
        Ok(p)
    }
}

/// One source of settings; unset fields leave lower layers in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Layer {
    pub length: Option<f64>,
    pub write_duration: Option<f64>,
    pub read_duration: Option<f64>,
    pub duration: Option<f64>,
    pub nz: Option<usize>,
    pub nt: Option<usize>,
    pub inner_n: Option<usize>,
    pub modes: Option<usize>,
    pub delta_l: Option<f64>,
    pub mixing: Option<bool>,
    pub transform: Option<TransformArg>,
    pub mix_norm: Option<MixNormArg>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default)]
struct Builder {
    length: f64,
    write_duration: f64,
    read_duration: f64,
    nz: usize,
    nt: usize,
    inner_n: Option<usize>,
    modes: usize,
    delta_l: Option<f64>,
    mixing: bool,
    transform: Option<TransformArg>,
    mix_norm: Option<MixNormArg>,
    out: PathBuf,
    format: Option<Format>,
}

impl Builder {
    fn defaults() -> Self {
        Builder {
            length: DEFAULT_LENGTH,
            write_duration: DEFAULT_DURATION,
            read_duration: DEFAULT_DURATION,
            nz: DEFAULT_RESOLUTION,
            nt: DEFAULT_RESOLUTION,
            modes: DEFAULT_MODES,
            out: PathBuf::from("qmem-out"),
            ..Default::default()
        }
    }

    fn apply(&mut self, layer: &Layer) {
        // a specific duration in the same layer beats the shared one
        if let Some(t) = layer.duration {
            self.write_duration = t;
            self.read_duration = t;
        }
        set(&mut self.length, layer.length);
        set(&mut self.write_duration, layer.write_duration);
        set(&mut self.read_duration, layer.read_duration);
        set(&mut self.nz, layer.nz);
        set(&mut self.nt, layer.nt);
        set(&mut self.modes, layer.modes);
        set(&mut self.mixing, layer.mixing);
        set(&mut self.out, layer.out.clone());
        self.inner_n = layer.inner_n.or(self.inner_n);
        self.delta_l = layer.delta_l.or(self.delta_l);
        self.transform = layer.transform.or(self.transform);
        self.mix_norm = layer.mix_norm.or(self.mix_norm);
        self.format = layer.format.or(self.format);
    }

    fn finish(self) -> Result<RunConfig, CliError> {
        let storage = match (self.mixing, self.delta_l) {
            (true, Some(_)) => {
                return Err(CliError::Config(
                    "choose either mixing or a mean extension, not both".into(),
                ));
            }
            (true, None) => StorageModel::FullMixing {
                norm: self.mix_norm.map(Into::into).unwrap_or_default(),
            },
            (false, Some(delta_l)) => StorageModel::FreeExpansion {
                delta_l,
                transform: self.transform.map(Into::into).unwrap_or_default(),
            },
            (false, None) => StorageModel::None,
        };
        Ok(RunConfig {
            length: self.length,
            write_duration: self.write_duration,
            read_duration: self.read_duration,
            nz: self.nz,
            nt: self.nt,
            inner_n: self.inner_n.unwrap_or(self.nt),
            modes: self.modes,
            storage,
            out: self.out,
            format: self.format.unwrap_or(Format::Csv),
        })
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Resolves defaults, then the file (if any), then the flags.
pub fn resolve(file: Option<&Layer>, flags: &Layer) -> Result<RunConfig, CliError> {
    let mut b = Builder::defaults();
    if let Some(file) = file {
        b.apply(file);
    }
    b.apply(flags);
    b.finish()
}

/// Reads a configuration file.
pub fn load_config(path: &Path) -> Result<Layer, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses `key = value` lines; `#` starts a comment, keys may use `-` or `_`.
pub fn parse_config(text: &str) -> Result<Layer, CliError> {
    let mut layer = Layer::default();
    let mut seen = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| CliError::Config(format!("line {}: {msg}", lineno + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        if seen.contains(&key) {
            return Err(at(format!("duplicate key `{key}`")));
        }
        match key.as_str() {
            "length" => layer.length = Some(parse(&key, value).map_err(at)?),
            "write_duration" => layer.write_duration = Some(parse(&key, value).map_err(at)?),
            "read_duration" => layer.read_duration = Some(parse(&key, value).map_err(at)?),
            "duration" => layer.duration = Some(parse(&key, value).map_err(at)?),
            "nz" => layer.nz = Some(parse(&key, value).map_err(at)?),
            "nt" => layer.nt = Some(parse(&key, value).map_err(at)?),
            "inner_n" => layer.inner_n = Some(parse(&key, value).map_err(at)?),
            "modes" => layer.modes = Some(parse(&key, value).map_err(at)?),
            "delta_l" => layer.delta_l = Some(parse(&key, value).map_err(at)?),
            "mixing" => layer.mixing = Some(parse(&key, value).map_err(at)?),
            "transform" => layer.transform = Some(parse_enum(&key, value).map_err(at)?),
            "mix_norm" => layer.mix_norm = Some(parse_enum(&key, value).map_err(at)?),
            "out" => layer.out = Some(PathBuf::from(value)),
            "format" => layer.format = Some(parse_enum(&key, value).map_err(at)?),
            _ => return Err(at(format!("unknown key `{key}`"))),
        }
        seen.push(key);
    }
    Ok(layer)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse `{value}` for `{key}`"))
}

fn parse_enum<T: clap::ValueEnum>(key: &str, value: &str) -> Result<T, String> {
    T::from_str(value, true).map_err(|_| {
        let allowed: Vec<String> = T::value_variants()
            .iter()
            .filter_map(|v| v.to_possible_value())
            .map(|v| v.get_name().to_string())
            .collect();
        format!(
            "`{value}` is not a valid {key} (expected one of {})",
            allowed.join(", ")
        )
    })
}
