//! On-disk formats.
//!
//! Tensors are raw little-endian `f32` blobs, row-major, one per file. Every
//! other document is JSON carrying a `format` tag and a schema `version`.
//! Reals are written rounded to 9 significant digits; infinities are the
//! strings `"inf"` and `"-inf"`. Emission is deterministic, so
//! emit → parse → emit reproduces the same bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bft::{BftStepRecord, BftTrace, Direction, Quantity};
use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointFormat;
use crate::netsim::{LayerKind, LayerQuant, LayerSpec, NetworkModel, QuantConfig, Tensor};
use crate::pipeline::{CalibrationStats, LayerRecord, NetworkMetrics, QuantReport, SchemeTag, SiteStats};
use crate::quantizers::{DoubleSidedStats, SampleStats, SearchMode};

pub const SCHEMA_VERSION: u32 = 1;

pub const MODEL_FORMAT: &str = "gammaquant-model";
pub const DATASET_FORMAT: &str = "gammaquant-dataset";
pub const STATS_FORMAT: &str = "gammaquant-stats";
pub const CONFIG_FORMAT: &str = "gammaquant-config";
pub const REPORT_FORMAT: &str = "gammaquant-report";
pub const TRACE_FORMAT: &str = "gammaquant-trace";

/// Round to 9 significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

mod real {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_nan() {
            return Err(serde::ser::Error::custom("NaN cannot be written"));
        }
        if x.is_infinite() {
            return s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" });
        }
        s.serialize_f64(super::round_sig9(*x))
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(de::Error::custom(format!("expected a number, \"inf\" or \"-inf\", got \"{t}\""))),
        }
    }

    pub mod opt {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match x {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct W(#[serde(with = "super")] f64);
            Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
        }
    }
}

// ---------------------------------------------------------------------------
// Shared helpers

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn emit<T: Serialize>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

fn parse<T: DeserializeOwned>(text: &str, path: &Path, format: &str) -> Result<T> {
    let header: Header = serde_json::from_str(text).map_err(|e| Error::parse(path, e.to_string()))?;
    if header.format != format {
        return Err(Error::parse(
            path,
            format!("expected a `{format}` document, found `{}`", header.format),
        ));
    }
    if header.version != SCHEMA_VERSION {
        return Err(Error::parse(
            path,
            format!("unsupported schema version {} (expected {SCHEMA_VERSION})", header.version),
        ));
    }
    serde_json::from_str(text).map_err(|e| Error::parse(path, e.to_string()))
}

fn base_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// Tensor blobs

pub fn encode_blob(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

pub fn decode_blob(bytes: &[u8], path: &Path) -> Result<Vec<f64>> {
    if bytes.len() % 4 != 0 {
        return Err(Error::parse(path, format!("blob length {} is not a multiple of 4", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

pub fn read_blob(path: &Path, shape: &[usize]) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let values = decode_blob(&bytes, path)?;
    let expected: usize = shape.iter().product();
    if values.len() != expected {
        return Err(Error::parse(
            path,
            format!("blob holds {} values but shape {shape:?} needs {expected}", values.len()),
        ));
    }
    Tensor::new(shape.to_vec(), values).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn write_blob(path: &Path, tensor: &Tensor) -> Result<()> {
    fs::write(path, encode_blob(tensor.data())).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRef {
    pub path: String,
    pub shape: Vec<usize>,
}

// ---------------------------------------------------------------------------
// Model manifest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerEntryKind {
    Conv {
        stride: usize,
        padding: usize,
        weight: TensorRef,
        bias: TensorRef,
    },
    Fc {
        weight: TensorRef,
        bias: TensorRef,
    },
    Relu,
    MaxPool {
        size: usize,
        stride: usize,
    },
    AvgPool {
        size: usize,
        stride: usize,
    },
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerEntryKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format: String,
    pub version: u32,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerEntry>,
}

impl ModelManifest {
    /// Manifest for `model` with blobs named `<layer>.weight.bin` and
    /// `<layer>.bias.bin`.
    pub fn describe(model: &NetworkModel) -> Self {
        let r = |name: &str, what: &str, t: &Tensor| TensorRef {
            path: format!("{name}.{what}.bin"),
            shape: t.shape().to_vec(),
        };
        let layers = model
            .layers()
            .iter()
            .map(|l| {
                let kind = match &l.kind {
                    LayerKind::Conv {
                        weight,
                        bias,
                        stride,
                        padding,
                    } => LayerEntryKind::Conv {
                        stride: *stride,
                        padding: *padding,
                        weight: r(&l.name, "weight", weight),
                        bias: r(&l.name, "bias", bias),
                    },
                    LayerKind::Fc { weight, bias } => LayerEntryKind::Fc {
                        weight: r(&l.name, "weight", weight),
                        bias: r(&l.name, "bias", bias),
                    },
                    LayerKind::Relu => LayerEntryKind::Relu,
                    LayerKind::MaxPool { size, stride } => LayerEntryKind::MaxPool {
                        size: *size,
                        stride: *stride,
                    },
                    LayerKind::AvgPool { size, stride } => LayerEntryKind::AvgPool {
                        size: *size,
                        stride: *stride,
                    },
                    LayerKind::Softmax => LayerEntryKind::Softmax,
                };
                LayerEntry {
                    name: l.name.clone(),
                    kind,
                }
            })
            .collect();
        Self {
            format: MODEL_FORMAT.into(),
            version: SCHEMA_VERSION,
            input_shape: model.input_shape().to_vec(),
            layers,
        }
    }

    pub fn emit(&self) -> Result<String> {
        emit(self)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        parse(text, path, MODEL_FORMAT)
    }

    /// Loads the referenced blobs (relative to `base`) and builds the model.
    pub fn resolve(&self, base: &Path, manifest_path: &Path) -> Result<NetworkModel> {
        let load = |r: &TensorRef| read_blob(&base.join(&r.path), &r.shape);
        let mut layers = Vec::with_capacity(self.layers.len());
        for entry in &self.layers {
            let kind = match &entry.kind {
                LayerEntryKind::Conv {
                    stride,
                    padding,
                    weight,
                    bias,
                } => LayerKind::Conv {
                    weight: load(weight)?,
                    bias: load(bias)?,
                    stride: *stride,
                    padding: *padding,
                },
                LayerEntryKind::Fc { weight, bias } => LayerKind::Fc {
                    weight: load(weight)?,
                    bias: load(bias)?,
                },
                LayerEntryKind::Relu => LayerKind::Relu,
                LayerEntryKind::MaxPool { size, stride } => LayerKind::MaxPool {
                    size: *size,
                    stride: *stride,
                },
                LayerEntryKind::AvgPool { size, stride } => LayerKind::AvgPool {
                    size: *size,
                    stride: *stride,
                },
                LayerEntryKind::Softmax => LayerKind::Softmax,
            };
            layers.push(LayerSpec::new(entry.name.clone(), kind));
        }
        NetworkModel::new(self.input_shape.clone(), layers).map_err(|e| Error::parse(manifest_path, e.to_string()))
    }
}

pub fn load_model(manifest: &Path) -> Result<NetworkModel> {
    let m = ModelManifest::parse(&read_text(manifest)?, manifest)?;
    m.resolve(&base_dir(manifest), manifest)
}

/// Writes the manifest and its blobs next to it.
pub fn save_model(model: &NetworkModel, manifest: &Path) -> Result<()> {
    let m = ModelManifest::describe(model);
    let base = base_dir(manifest);
    for (layer, entry) in model.layers().iter().zip(&m.layers) {
        if let (Some((w, b)), LayerEntryKind::Conv { weight, bias, .. } | LayerEntryKind::Fc { weight, bias }) =
            (layer.kind.params(), &entry.kind)
        {
            write_blob(&base.join(&weight.path), w)?;
            write_blob(&base.join(&bias.path), b)?;
        }
    }
    write_text(manifest, &m.emit()?)
}

// ---------------------------------------------------------------------------
// Datasets

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    /// `[count, item dims…]`.
    pub shape: Vec<usize>,
    pub blob: String,
}

impl DatasetManifest {
    pub fn emit(&self) -> Result<String> {
        emit(self)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        parse(text, path, DATASET_FORMAT)
    }
}

pub fn load_dataset(manifest: &Path) -> Result<Tensor> {
    let m = DatasetManifest::parse(&read_text(manifest)?, manifest)?;
    if m.shape.len() < 2 || m.shape[0] == 0 {
        return Err(Error::parse(manifest, format!("dataset shape {:?} needs [count ≥ 1, …]", m.shape)));
    }
    read_blob(&base_dir(manifest).join(&m.blob), &m.shape)
}

/// Writes `<manifest stem>.bin` and the manifest referencing it.
pub fn save_dataset(data: &Tensor, manifest: &Path) -> Result<()> {
    let stem = manifest
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidParameter(format!("bad dataset path {}", manifest.display())))?;
    let blob = format!("{stem}.bin");
    write_blob(&base_dir(manifest).join(&blob), data)?;
    let m = DatasetManifest {
        format: DATASET_FORMAT.into(),
        version: SCHEMA_VERSION,
        shape: data.shape().to_vec(),
        blob,
    };
    write_text(manifest, &m.emit()?)
}

// ---------------------------------------------------------------------------
// Calibration statistics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsEntry {
    #[serde(with = "real")]
    pub mean_excl_zero: f64,
    #[serde(with = "real")]
    pub var_excl_zero: f64,
    pub count_total: u64,
    pub count_zero: u64,
    pub count_negative: u64,
    #[serde(with = "real")]
    pub rho: f64,
}

impl From<&SampleStats> for MomentsEntry {
    fn from(s: &SampleStats) -> Self {
        Self {
            mean_excl_zero: s.mean_excl_zero,
            var_excl_zero: s.var_excl_zero,
            count_total: s.count_total,
            count_zero: s.count_zero,
            count_negative: s.count_negative,
            rho: s.rho,
        }
    }
}

impl From<&MomentsEntry> for SampleStats {
    fn from(m: &MomentsEntry) -> Self {
        Self {
            mean_excl_zero: m.mean_excl_zero,
            var_excl_zero: m.var_excl_zero,
            count_total: m.count_total,
            count_zero: m.count_zero,
            count_negative: m.count_negative,
            rho: m.rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteEntry {
    pub layer: String,
    #[serde(with = "real")]
    pub min: f64,
    #[serde(with = "real")]
    pub max: f64,
    pub stats: Option<MomentsEntry>,
    /// Magnitudes of the negative samples.
    pub negative: Option<MomentsEntry>,
    /// Zero-and-positive samples, zeros excluded from the moments.
    pub positive: Option<MomentsEntry>,
    pub degenerate: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub format: String,
    pub version: u32,
    pub items: usize,
    pub sites: Vec<SiteEntry>,
}

impl StatsFile {
    pub fn from_stats(s: &CalibrationStats) -> Self {
        Self {
            format: STATS_FORMAT.into(),
            version: SCHEMA_VERSION,
            items: s.item_count,
            sites: s
                .sites
                .iter()
                .map(|site| SiteEntry {
                    layer: site.layer.clone(),
                    min: site.min,
                    max: site.max,
                    stats: site.stats.as_ref().map(Into::into),
                    negative: site.groups.as_ref().map(|g| (&g.negative).into()),
                    positive: site.groups.as_ref().map(|g| (&g.positive).into()),
                    degenerate: site.degenerate.clone(),
                })
                .collect(),
        }
    }

    pub fn to_stats(&self, path: &Path) -> Result<CalibrationStats> {
        let sites = self
            .sites
            .iter()
            .map(|e| {
                let stats: Option<SampleStats> = e.stats.as_ref().map(Into::into);
                let groups = match (&e.negative, &e.positive, &stats) {
                    (Some(n), Some(p), Some(s)) => Some(DoubleSidedStats {
                        negative: n.into(),
                        positive: p.into(),
                        rho: s.rho,
                    }),
                    (None, None, _) => None,
                    _ => {
                        return Err(Error::parse(
                            path,
                            format!("layer `{}`: sign groups need both groups and overall stats", e.layer),
                        ))
                    }
                };
                Ok(SiteStats {
                    layer: e.layer.clone(),
                    stats,
                    groups,
                    min: e.min,
                    max: e.max,
                    degenerate: e.degenerate.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(CalibrationStats {
            item_count: self.items,
            sites,
        })
    }

    pub fn emit(&self) -> Result<String> {
        emit(self)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        parse(text, path, STATS_FORMAT)
    }
}

pub fn save_stats(stats: &CalibrationStats, path: &Path) -> Result<()> {
    write_text(path, &StatsFile::from_stats(stats).emit()?)
}

pub fn load_stats(path: &Path) -> Result<CalibrationStats> {
    StatsFile::parse(&read_text(path)?, path)?.to_stats(path)
}

// ---------------------------------------------------------------------------
// Quantization configs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEntry {
    pub layer: String,
    pub weight_bw: u32,
    pub weight_fl: i32,
    pub bias_bw: u32,
    pub bias_fl: i32,
    /// `null` for all three keeps the feature map in floating point.
    pub fm_bw: Option<u32>,
    pub fm_fl: Option<i32>,
    pub fm_signed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub format: String,
    pub version: u32,
    pub scheme: String,
    pub layers: Vec<ConfigEntry>,
}

impl ConfigFile {
    pub fn from_config(q: &QuantConfig, scheme: SchemeTag) -> Self {
        Self {
            format: CONFIG_FORMAT.into(),
            version: SCHEMA_VERSION,
            scheme: scheme.to_string(),
            layers: q
                .layers
                .iter()
                .map(|l| ConfigEntry {
                    layer: l.layer.clone(),
                    weight_bw: l.weight.bit_width,
                    weight_fl: l.weight.fractional_length,
                    bias_bw: l.bias.bit_width,
                    bias_fl: l.bias.fractional_length,
                    fm_bw: l.fm.map(|f| f.bit_width),
                    fm_fl: l.fm.map(|f| f.fractional_length),
                    fm_signed: l.fm.map(|f| f.signed),
                })
                .collect(),
        }
    }

    pub fn to_config(&self, path: &Path) -> Result<(QuantConfig, SchemeTag)> {
        let scheme = SchemeTag::parse(&self.scheme)
            .ok_or_else(|| Error::parse(path, format!("unknown scheme tag `{}`", self.scheme)))?;
        let bad = |layer: &str, e: Error| Error::parse(path, format!("layer `{layer}`: {e}"));
        let layers = self
            .layers
            .iter()
            .map(|e| {
                let fm = match (e.fm_bw, e.fm_fl, e.fm_signed) {
                    (Some(bw), Some(fl), Some(signed)) => {
                        Some(FixedPointFormat::new(bw, fl, signed).map_err(|x| bad(&e.layer, x))?)
                    }
                    (None, None, None) => None,
                    _ => {
                        return Err(Error::parse(
                            path,
                            format!("layer `{}`: fm_bw, fm_fl and fm_signed must be all set or all null", e.layer),
                        ))
                    }
                };
                Ok(LayerQuant {
                    layer: e.layer.clone(),
                    weight: FixedPointFormat::signed(e.weight_bw, e.weight_fl).map_err(|x| bad(&e.layer, x))?,
                    bias: FixedPointFormat::signed(e.bias_bw, e.bias_fl).map_err(|x| bad(&e.layer, x))?,
                    fm,
                })
            })
            .collect::<Result<_>>()?;
        Ok((QuantConfig { layers }, scheme))
    }

    pub fn emit(&self) -> Result<String> {
        emit(self)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        parse(text, path, CONFIG_FORMAT)
    }
}

pub fn save_config(q: &QuantConfig, scheme: SchemeTag, path: &Path) -> Result<()> {
    write_text(path, &ConfigFile::from_config(q, scheme).emit()?)
}

pub fn load_config(path: &Path) -> Result<(QuantConfig, SchemeTag)> {
    ConfigFile::parse(&read_text(path)?, path)?.to_config(path)
}

// ---------------------------------------------------------------------------
// Tuning traces

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub fl: i32,
    #[serde(with = "real")]
    pub score: f64,
}

fn scored(v: &[(i32, f64)]) -> Vec<Scored> {
    v.iter().map(|&(fl, score)| Scored { fl, score }).collect()
}

fn unscored(v: &[Scored]) -> Vec<(i32, f64)> {
    v.iter().map(|s| (s.fl, s.score)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub layer: String,
    pub direction: Direction,
    pub quantity: Quantity,
    pub incumbent: i32,
    pub candidates: Vec<Scored>,
    pub clamped: Vec<i32>,
    pub chosen: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceBody {
    #[serde(with = "real")]
    pub initial_score: f64,
    #[serde(with = "real")]
    pub final_score: f64,
    pub backward_changes: usize,
    pub forward_changes: usize,
    pub steps: Vec<TraceStep>,
}

impl From<&BftTrace> for TraceBody {
    fn from(t: &BftTrace) -> Self {
        Self {
            initial_score: t.initial_score,
            final_score: t.final_score,
            backward_changes: t.changes(Direction::Backward),
            forward_changes: t.changes(Direction::Forward),
            steps: t
                .steps
                .iter()
                .map(|s| TraceStep {
                    layer: s.layer.clone(),
                    direction: s.direction,
                    quantity: s.quantity,
                    incumbent: s.incumbent,
                    candidates: scored(&s.candidates),
                    clamped: s.clamped.clone(),
                    chosen: s.chosen,
                })
                .collect(),
        }
    }
}

impl From<&TraceBody> for BftTrace {
    fn from(t: &TraceBody) -> Self {
        Self {
            initial_score: t.initial_score,
            final_score: t.final_score,
            steps: t
                .steps
                .iter()
                .map(|s| BftStepRecord {
                    layer: s.layer.clone(),
                    direction: s.direction,
                    quantity: s.quantity,
                    incumbent: s.incumbent,
                    candidates: unscored(&s.candidates),
                    clamped: s.clamped.clone(),
                    chosen: s.chosen,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub format: String,
    pub version: u32,
    pub scheme: String,
    #[serde(flatten)]
    pub trace: TraceBody,
}

impl TraceFile {
    pub fn new(trace: &BftTrace, scheme: SchemeTag) -> Self {
        Self {
            format: TRACE_FORMAT.into(),
            version: SCHEMA_VERSION,
            scheme: scheme.to_string(),
            trace: trace.into(),
        }
    }

    pub fn emit(&self) -> Result<String> {
        emit(self)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        parse(text, path, TRACE_FORMAT)
    }
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportLayer {
    pub layer: String,
    pub scheme: String,
    pub weight_bw: u32,
    pub weight_fl: i32,
    pub bias_bw: u32,
    pub bias_fl: i32,
    pub fm_bw: Option<u32>,
    pub fm_fl: Option<i32>,
    pub fm_signed: Option<bool>,
    #[serde(with = "real")]
    pub weight_sqnr_db: f64,
    #[serde(with = "real::opt")]
    pub bias_sqnr_db: Option<f64>,
    #[serde(with = "real::opt")]
    pub fm_sqnr_db: Option<f64>,
    #[serde(with = "real::opt")]
    pub fm_predicted_distortion: Option<f64>,
    #[serde(with = "real::opt")]
    pub fm_empirical_distortion: Option<f64>,
    pub weight_candidates: Vec<Scored>,
    pub fm_candidates: Vec<Scored>,
    pub promoted_weights: bool,
    pub promoted_fm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportNetwork {
    #[serde(with = "real")]
    pub top1_agreement: f64,
    #[serde(with = "real")]
    pub top5_agreement: f64,
    pub eval_items: usize,
    pub eval_set: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub format: String,
    pub version: u32,
    pub scheme: String,
    pub mode: SearchMode,
    pub assumptions: Vec<String>,
    pub layers: Vec<ReportLayer>,
    #[serde(with = "real::opt")]
    pub promoted_weights_ratio: Option<f64>,
    #[serde(with = "real::opt")]
    pub promoted_fm_ratio: Option<f64>,
    pub network: Option<ReportNetwork>,
    pub bft: Option<TraceBody>,
}

impl ReportFile {
    pub fn from_report(r: &QuantReport) -> Self {
        let scheme = r.scheme.to_string();
        Self {
            format: REPORT_FORMAT.into(),
            version: SCHEMA_VERSION,
            scheme: scheme.clone(),
            mode: r.mode,
            assumptions: r.assumptions.clone(),
            layers: r
                .layers
                .iter()
                .map(|l| ReportLayer {
                    layer: l.layer.clone(),
                    scheme: scheme.clone(),
                    weight_bw: l.weight.bit_width,
                    weight_fl: l.weight.fractional_length,
                    bias_bw: l.bias.bit_width,
                    bias_fl: l.bias.fractional_length,
                    fm_bw: l.fm.map(|f| f.bit_width),
                    fm_fl: l.fm.map(|f| f.fractional_length),
                    fm_signed: l.fm.map(|f| f.signed),
                    weight_sqnr_db: l.weight_sqnr_db,
                    bias_sqnr_db: l.bias_sqnr_db,
                    fm_sqnr_db: l.fm_sqnr_db,
                    fm_predicted_distortion: l.fm_predicted_distortion,
                    fm_empirical_distortion: l.fm_empirical_distortion,
                    weight_candidates: scored(&l.weight_candidates),
                    fm_candidates: scored(&l.fm_candidates),
                    promoted_weights: l.promoted_weights,
                    promoted_fm: l.promoted_fm,
                })
                .collect(),
            promoted_weights_ratio: r.promoted_weights_ratio,
            promoted_fm_ratio: r.promoted_fm_ratio,
            network: r.network.as_ref().map(|n| ReportNetwork {
                top1_agreement: n.top1_agreement,
                top5_agreement: n.top5_agreement,
                eval_items: n.eval_items,
                eval_set: n.eval_set.clone(),
            }),
            bft: r.bft.as_ref().map(Into::into),
        }
    }

    pub fn to_report(&self, path: &Path) -> Result<QuantReport> {
        let scheme = SchemeTag::parse(&self.scheme)
            .ok_or_else(|| Error::parse(path, format!("unknown scheme tag `{}`", self.scheme)))?;
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let bad = |e: Error| Error::parse(path, format!("layer `{}`: {e}", l.layer));
                let fm = match (l.fm_bw, l.fm_fl, l.fm_signed) {
                    (Some(bw), Some(fl), Some(s)) => Some(FixedPointFormat::new(bw, fl, s).map_err(bad)?),
                    _ => None,
                };
                Ok(LayerRecord {
                    layer: l.layer.clone(),
                    weight: FixedPointFormat::signed(l.weight_bw, l.weight_fl).map_err(bad)?,
                    bias: FixedPointFormat::signed(l.bias_bw, l.bias_fl).map_err(bad)?,
                    fm,
                    weight_sqnr_db: l.weight_sqnr_db,
                    bias_sqnr_db: l.bias_sqnr_db,
                    fm_sqnr_db: l.fm_sqnr_db,
                    fm_predicted_distortion: l.fm_predicted_distortion,
                    fm_empirical_distortion: l.fm_empirical_distortion,
                    weight_candidates: unscored(&l.weight_candidates),
                    fm_candidates: unscored(&l.fm_candidates),
                    promoted_weights: l.promoted_weights,
                    promoted_fm: l.promoted_fm,
                })
            })
            .collect::<Result<_>>()?;
        Ok(QuantReport {
            scheme,
            mode: self.mode,
            layers,
            promoted_weights_ratio: self.promoted_weights_ratio,
            promoted_fm_ratio: self.promoted_fm_ratio,
            network: self.network.as_ref().map(|n| NetworkMetrics {
                top1_agreement: n.top1_agreement,
                top5_agreement: n.top5_agreement,
                eval_items: n.eval_items,
                eval_set: n.eval_set.clone(),
            }),
            bft: self.bft.as_ref().map(Into::into),
            assumptions: self.assumptions.clone(),
        })
    }

    pub fn emit(&self) -> Result<String> {
        emit(self)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        parse(text, path, REPORT_FORMAT)
    }
}

pub fn save_report(r: &QuantReport, path: &Path) -> Result<()> {
    write_text(path, &ReportFile::from_report(r).emit()?)
}

pub fn load_report(path: &Path) -> Result<QuantReport> {
    ReportFile::parse(&read_text(path)?, path)?.to_report(path)
}

/// Fixed-width table of a report for terminals.
pub fn render_report_text(r: &QuantReport) -> String {
    let db = |x: Option<f64>| match x {
        None => "-".to_string(),
        Some(v) if v.is_infinite() => "inf".to_string(),
        Some(v) => format!("{v:.2}"),
    };
    let fmt = |f: Option<FixedPointFormat>| f.map_or("float".to_string(), |f| f.to_string());
    let mut out = format!("scheme {}\n", r.scheme);
    out.push_str(&format!(
        "{:<12} {:>8} {:>8} {:>8} {:>10} {:>10} {:>10}\n",
        "layer", "weight", "bias", "fm", "w SQNR", "b SQNR", "fm SQNR"
    ));
    for l in &r.layers {
        out.push_str(&format!(
            "{:<12} {:>8} {:>8} {:>8} {:>10} {:>10} {:>10}\n",
            l.layer,
            l.weight.to_string(),
            l.bias.to_string(),
            fmt(l.fm),
            db(Some(l.weight_sqnr_db)),
            db(l.bias_sqnr_db),
            db(l.fm_sqnr_db),
        ));
    }
    if let Some(p) = r.promoted_weights_ratio {
        out.push_str(&format!("weights promoted: {:.1}%\n", 100.0 * p));
    }
    if let Some(p) = r.promoted_fm_ratio {
        out.push_str(&format!("feature maps promoted: {:.1}%\n", 100.0 * p));
    }
    if let Some(n) = &r.network {
        out.push_str(&format!(
            "top-1 agreement {:.4}, top-5 agreement {:.4} over {} items ({})\n",
            n.top1_agreement, n.top5_agreement, n.eval_items, n.eval_set
        ));
    }
    out
}
