//! Whole-network workflows: calibration summaries, per-layer format design
//! for each scheme, SQNR-floor promotion and evaluation reports.

use std::fmt;

use rayon::prelude::*;

use crate::bft::{BftTarget, BftTrace};
use crate::error::{Error, Result};
use crate::fixedpoint::{measure_error, FixedPointFormat};
use crate::netsim::{
    capture_activations, forward_float, Activations, Evaluator, FixedNetwork, LayerQuant, NetworkModel, QuantConfig,
    Tensor,
};
use crate::quantizers::{
    collect_stats, quantize_fm_double_sided_with, quantize_fm_single_sided, quantize_weights_layer, ristretto_fl,
    DoubleSidedStats, FlSearchConfig, LayerQuantResult, SampleStats, SearchMode, TensorKind,
};

/// Calibration summary of one quantization site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteStats {
    pub layer: String,
    /// `None` when every sample is zero.
    pub stats: Option<SampleStats>,
    /// Sign-group moments, present when both groups are usable.
    pub groups: Option<DoubleSidedStats>,
    pub min: f64,
    pub max: f64,
    /// Why the site cannot be designed by the distribution-based path.
    pub degenerate: Option<String>,
}

impl SiteStats {
    pub fn from_samples(layer: impl Into<String>, samples: &[f64]) -> Result<Self> {
        let layer = layer.into();
        let stats = match collect_stats(samples) {
            Ok(s) => Some(s),
            Err(Error::DegenerateStatistics(_) | Error::AllZero(_)) => None,
            Err(e) => return Err(e.in_layer(layer)),
        };
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut degenerate = None;
        let mut groups = None;
        match &stats {
            None => degenerate = Some("all samples are zero".to_string()),
            Some(s) if s.count_negative > 0 => match DoubleSidedStats::from_samples(samples) {
                Ok(g) => groups = Some(g),
                Err(e) => degenerate = Some(e.to_string()),
            },
            Some(s) if s.var_excl_zero <= 0.0 => degenerate = Some("zero variance".to_string()),
            Some(_) => {}
        }
        Ok(Self {
            layer,
            stats,
            groups,
            min,
            max,
            degenerate,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }

    pub fn double_sided(&self) -> bool {
        self.min < 0.0
    }
}

/// Calibration summary of every site, in network order.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationStats {
    pub item_count: usize,
    pub sites: Vec<SiteStats>,
}

impl CalibrationStats {
    pub fn site(&self, layer: &str) -> Option<&SiteStats> {
        self.sites.iter().find(|s| s.layer == layer)
    }

    pub fn from_activations(acts: &Activations, item_count: usize) -> Result<Self> {
        let sites = acts
            .sites
            .iter()
            .map(|(name, samples)| SiteStats::from_samples(name.clone(), samples))
            .collect::<Result<_>>()?;
        Ok(Self { item_count, sites })
    }
}

/// Float activations and their summaries. Degenerate sites are flagged, not
/// fatal.
pub fn calibrate(model: &NetworkModel, inputs: &[Tensor]) -> Result<(CalibrationStats, Activations)> {
    let acts = capture_activations(model, inputs)?;
    let items = inputs.iter().map(Tensor::batch).sum();
    Ok((CalibrationStats::from_activations(&acts, items)?, acts))
}

/// How per-layer fractional lengths are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Weights and biases only; feature maps stay in floating point.
    Wq,
    /// Weights, biases and feature maps by the distribution-based search.
    WqFq,
    /// Max-based baseline for every tensor.
    Ristretto,
}

impl Scheme {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "wq" => Some(Scheme::Wq),
            "wq-fq" => Some(Scheme::WqFq),
            "ristretto" => Some(Scheme::Ristretto),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Wq => "wq",
            Scheme::WqFq => "wq-fq",
            Scheme::Ristretto => "ristretto",
        }
    }
}

/// Scheme plus which quantities have been through backward-forward tuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeTag {
    pub scheme: Scheme,
    pub weights_tuned: bool,
    pub fm_tuned: bool,
}

impl SchemeTag {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            weights_tuned: false,
            fm_tuned: false,
        }
    }

    /// Tag after a tuning run with `target`. Feature maps left in floating
    /// point cannot become tuned.
    pub fn tuned(self, target: BftTarget) -> Self {
        let w = matches!(target, BftTarget::Weights | BftTarget::Both);
        let f = matches!(target, BftTarget::FeatureMaps | BftTarget::Both) && self.scheme != Scheme::Wq;
        Self {
            weights_tuned: self.weights_tuned || w,
            fm_tuned: self.fm_tuned || f,
            ..self
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let (scheme, w, f) = match s {
            "WQ" => (Scheme::Wq, false, false),
            "WQ⁺" => (Scheme::Wq, true, false),
            "WQ_FQ" => (Scheme::WqFq, false, false),
            "WQ_FQ⁺" => (Scheme::WqFq, false, true),
            "WQ⁺_FQ" => (Scheme::WqFq, true, false),
            "WQ⁺_FQ⁺" => (Scheme::WqFq, true, true),
            "ristretto" => (Scheme::Ristretto, false, false),
            "ristretto⁺" => (Scheme::Ristretto, true, true),
            _ => return None,
        };
        Some(Self {
            scheme,
            weights_tuned: w,
            fm_tuned: f,
        })
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let plus = |b: bool| if b { "⁺" } else { "" };
        match self.scheme {
            Scheme::Wq => write!(f, "WQ{}", plus(self.weights_tuned)),
            Scheme::WqFq => write!(f, "WQ{}_FQ{}", plus(self.weights_tuned), plus(self.fm_tuned)),
            Scheme::Ristretto => write!(f, "ristretto{}", plus(self.weights_tuned || self.fm_tuned)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizeOptions {
    pub scheme: Scheme,
    pub bw_weights: u32,
    pub bw_bias: u32,
    pub bw_fm: u32,
    pub mode: SearchMode,
    pub k_w: u32,
    /// Per-layer feature-map bit-widths that replace `bw_fm`.
    pub fm_bw_overrides: Vec<(String, u32)>,
    pub sqnr_floor_weights: Option<f64>,
    pub sqnr_floor_fm: Option<f64>,
    /// Bit-width given to layers whose SQNR falls below a floor.
    pub fallback_bw: u32,
}

impl QuantizeOptions {
    pub fn new(scheme: Scheme, bw: u32) -> Self {
        Self {
            scheme,
            bw_weights: bw,
            bw_bias: bw,
            bw_fm: bw,
            mode: SearchMode::Default,
            k_w: 2,
            fm_bw_overrides: Vec::new(),
            sqnr_floor_weights: None,
            sqnr_floor_fm: None,
            fallback_bw: 8,
        }
    }

    fn fm_bw(&self, layer: &str) -> u32 {
        self.fm_bw_overrides
            .iter()
            .rev()
            .find(|(l, _)| l == layer)
            .map_or(self.bw_fm, |(_, bw)| *bw)
    }
}

/// Per-layer outcome of format design.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    pub layer: String,
    pub weight: FixedPointFormat,
    pub bias: FixedPointFormat,
    pub fm: Option<FixedPointFormat>,
    pub weight_sqnr_db: f64,
    /// `None` for an all-zero bias.
    pub bias_sqnr_db: Option<f64>,
    /// Feature-map SQNR: on the site's calibration samples after design,
    /// on the propagated fixed-point activations after evaluation.
    pub fm_sqnr_db: Option<f64>,
    /// Closed-form distortion of the chosen feature-map FL (per nonzero sample).
    pub fm_predicted_distortion: Option<f64>,
    /// Measured mean squared error per nonzero calibration sample.
    pub fm_empirical_distortion: Option<f64>,
    pub weight_candidates: Vec<(i32, f64)>,
    pub fm_candidates: Vec<(i32, f64)>,
    pub promoted_weights: bool,
    pub promoted_fm: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMetrics {
    pub top1_agreement: f64,
    pub top5_agreement: f64,
    pub eval_items: usize,
    pub eval_set: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantReport {
    pub scheme: SchemeTag,
    pub mode: SearchMode,
    pub layers: Vec<LayerRecord>,
    /// Fraction of layers whose weights were promoted to the fallback width.
    pub promoted_weights_ratio: Option<f64>,
    pub promoted_fm_ratio: Option<f64>,
    pub network: Option<NetworkMetrics>,
    pub bft: Option<BftTrace>,
    pub assumptions: Vec<String>,
}

impl QuantReport {
    pub fn layer(&self, name: &str) -> Option<&LayerRecord> {
        self.layers.iter().find(|l| l.layer == name)
    }

    pub fn mean_fm_sqnr_db(&self) -> Option<f64> {
        mean(self.layers.iter().filter_map(|l| l.fm_sqnr_db))
    }

    pub fn mean_weight_sqnr_db(&self) -> Option<f64> {
        mean(self.layers.iter().map(|l| l.weight_sqnr_db))
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Conventions every report states, since they are not recoverable from the
/// numbers alone.
pub fn standard_assumptions() -> Vec<String> {
    vec![
        "the network input is quantized with the first layer's feature-map format".into(),
        "single-sided feature maps use N = 2^bw levels per side (symmetric design over 2^(bw+1) levels); \
         double-sided ones use 2^(bw-1) per side"
            .into(),
        "fast-mode scoring sets the support to N·2^-FL/2 with the symmetric N above".into(),
        "accumulation inside a layer is exact; quantization happens at tensor boundaries".into(),
    ]
}

/// Fixed-point formats of one parameterized layer.
struct Designed {
    weight: FixedPointFormat,
    weight_candidates: Vec<(i32, f64)>,
    bias: FixedPointFormat,
    fm: Option<(FixedPointFormat, LayerQuantResult)>,
}

fn weight_format(values: &[f64], bw: u32, opts: &QuantizeOptions) -> Result<(FixedPointFormat, Vec<(i32, f64)>)> {
    if values.iter().all(|&v| v == 0.0) {
        // Nothing to represent; keep the widest-range grid.
        return Ok((FixedPointFormat::signed(bw, 0)?, Vec::new()));
    }
    match opts.scheme {
        Scheme::Ristretto => {
            let max = values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            Ok((FixedPointFormat::signed(bw, ristretto_fl(max, bw, TensorKind::Weight)?)?, Vec::new()))
        }
        Scheme::Wq | Scheme::WqFq => {
            let cfg = FlSearchConfig::new(bw).with_k_w(opts.k_w);
            let r = quantize_weights_layer(values, &cfg)?;
            Ok((FixedPointFormat::signed(bw, r.fractional_length)?, r.candidates_evaluated))
        }
    }
}

fn fm_format(
    site: &SiteStats,
    samples: Option<&[f64]>,
    bw: u32,
    opts: &QuantizeOptions,
) -> Result<Option<(FixedPointFormat, LayerQuantResult)>> {
    match opts.scheme {
        Scheme::Wq => Ok(None),
        Scheme::Ristretto => {
            let max = site.max_abs();
            let fmt = if site.double_sided() {
                FixedPointFormat::signed(bw, ristretto_fl(max, bw, TensorKind::Weight)?)?
            } else {
                FixedPointFormat::unsigned(bw, ristretto_fl(max, bw, TensorKind::FeatureMap)?)?
            };
            let r = LayerQuantResult {
                fractional_length: fmt.fractional_length,
                distortion: f64::NAN,
                candidates_evaluated: Vec::new(),
                predicted_distortion: None,
            };
            Ok(Some((fmt, r)))
        }
        Scheme::WqFq => {
            if let Some(why) = &site.degenerate {
                return Err(Error::DegenerateStatistics(why.clone()));
            }
            let stats = site.stats.as_ref().expect("non-degenerate sites have stats");
            let cfg = FlSearchConfig::new(bw).with_k_w(opts.k_w).with_mode(opts.mode);
            let samples = match (opts.mode, samples) {
                (SearchMode::Fast, _) => &[][..],
                (SearchMode::Default, Some(s)) => s,
                (SearchMode::Default, None) => {
                    return Err(Error::Config(
                        "default mode scores candidates on calibration samples; none were given".into(),
                    ))
                }
            };
            if site.double_sided() {
                let groups = site.groups.as_ref().expect("double-sided sites have groups");
                let r = quantize_fm_double_sided_with(groups, samples, &cfg)?;
                Ok(Some((FixedPointFormat::signed(bw, r.fractional_length)?, r)))
            } else {
                let r = quantize_fm_single_sided(samples, stats, &cfg)?;
                Ok(Some((FixedPointFormat::unsigned(bw, r.fractional_length)?, r)))
            }
        }
    }
}

fn sqnr_of(values: &[f64], fmt: FixedPointFormat) -> Result<Option<f64>> {
    match measure_error(values, fmt)?.sqnr_db() {
        Ok(s) => Ok(Some(s)),
        Err(Error::ZeroSignalPower) => Ok(None),
        Err(e) => Err(e),
    }
}

fn nonzero_mse(samples: &[f64], fmt: FixedPointFormat) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0u64);
    for &x in samples.iter().filter(|&&x| x != 0.0) {
        let d = x - fmt.quantize_finite(x);
        sum += d * d;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Designs formats for every parameterized layer.
///
/// `activations` supplies the calibration samples needed by default-mode
/// scoring and by feature-map SQNR; fast mode and the baseline work from
/// `stats` alone.
pub fn quantize_model(
    model: &NetworkModel,
    stats: &CalibrationStats,
    activations: Option<&Activations>,
    opts: &QuantizeOptions,
) -> Result<(QuantConfig, QuantReport)> {
    if opts.sqnr_floor_fm.is_some() && activations.is_none() && opts.scheme != Scheme::Wq {
        return Err(Error::Config("a feature-map SQNR floor needs calibration samples".into()));
    }
    for (layer, _) in &opts.fm_bw_overrides {
        if model.site(layer).is_none() {
            return Err(Error::Config(format!("bit-width override for unknown layer `{layer}`")));
        }
    }
    let mut layers = Vec::new();
    let mut records = Vec::new();
    for site in model.sites() {
        let name = &site.name;
        let st = stats
            .site(name)
            .ok_or_else(|| Error::Config(format!("statistics have no entry for layer `{name}`")))?;
        let samples = activations.and_then(|a| a.site(name));
        let (w, b) = model.layers()[site.layer_index].kind.params().expect("site has params");
        let design = |bw_w: u32, bw_b: u32, bw_fm: u32| -> Result<Designed> {
            let (weight, weight_candidates) = weight_format(w.data(), bw_w, opts)?;
            let (bias, _) = weight_format(b.data(), bw_b, opts)?;
            let fm = fm_format(st, samples, bw_fm, opts)?;
            Ok(Designed {
                weight,
                weight_candidates,
                bias,
                fm,
            })
        };
        let layer_err = |e: Error| e.in_layer(name.clone());
        let mut d = design(opts.bw_weights, opts.bw_bias, opts.fm_bw(name)).map_err(layer_err)?;
        let mut weight_sqnr = sqnr_of(w.data(), d.weight)?.unwrap_or(f64::INFINITY);
        let mut promoted_weights = false;
        if let Some(floor) = opts.sqnr_floor_weights {
            if weight_sqnr < floor && d.weight.bit_width < opts.fallback_bw {
                let (fmt, cands) = weight_format(w.data(), opts.fallback_bw, opts).map_err(layer_err)?;
                d.weight = fmt;
                d.weight_candidates = cands;
                weight_sqnr = sqnr_of(w.data(), fmt)?.unwrap_or(f64::INFINITY);
                promoted_weights = true;
            }
        }
        let fm_sqnr = |fm: &Option<(FixedPointFormat, LayerQuantResult)>| -> Result<Option<f64>> {
            match (fm, samples) {
                (Some((fmt, _)), Some(s)) => sqnr_of(s, *fmt),
                _ => Ok(None),
            }
        };
        let mut fm_sqnr_db = fm_sqnr(&d.fm)?;
        let mut promoted_fm = false;
        if let (Some(floor), Some(current), Some((fmt, _))) = (opts.sqnr_floor_fm, fm_sqnr_db, &d.fm) {
            if current < floor && fmt.bit_width < opts.fallback_bw {
                d.fm = fm_format(st, samples, opts.fallback_bw, opts).map_err(layer_err)?;
                fm_sqnr_db = fm_sqnr(&d.fm)?;
                promoted_fm = true;
            }
        }
        let fm = d.fm.as_ref().map(|(f, _)| *f);
        records.push(LayerRecord {
            layer: name.clone(),
            weight: d.weight,
            bias: d.bias,
            fm,
            weight_sqnr_db: weight_sqnr,
            bias_sqnr_db: sqnr_of(b.data(), d.bias)?,
            fm_sqnr_db,
            fm_predicted_distortion: d.fm.as_ref().and_then(|(_, r)| r.predicted_distortion),
            fm_empirical_distortion: fm.zip(samples).and_then(|(f, s)| nonzero_mse(s, f)),
            weight_candidates: d.weight_candidates,
            fm_candidates: d.fm.map(|(_, r)| r.candidates_evaluated).unwrap_or_default(),
            promoted_weights,
            promoted_fm,
        });
        layers.push(LayerQuant {
            layer: name.clone(),
            weight: d.weight,
            bias: d.bias,
            fm,
        });
    }
    let n = records.len().max(1) as f64;
    let ratio = |floor: Option<f64>, f: fn(&LayerRecord) -> bool| {
        floor.map(|_| records.iter().filter(|r| f(r)).count() as f64 / n)
    };
    let report = QuantReport {
        scheme: SchemeTag::new(opts.scheme),
        mode: opts.mode,
        promoted_weights_ratio: ratio(opts.sqnr_floor_weights, |r| r.promoted_weights),
        promoted_fm_ratio: ratio(opts.sqnr_floor_fm, |r| r.promoted_fm),
        layers: records,
        network: None,
        bft: None,
        assumptions: standard_assumptions(),
    };
    Ok((QuantConfig { layers }, report))
}

/// Per-layer SQNR of a config on an evaluation set plus network agreement.
///
/// Feature-map SQNR compares each site's float activations with the
/// fixed-point network's activations at the same site, so it includes error
/// propagated from earlier layers.
pub fn evaluate(
    model: &NetworkModel,
    q: &QuantConfig,
    inputs: &[Tensor],
    scheme: SchemeTag,
    eval_set: impl Into<String>,
) -> Result<QuantReport> {
    let evaluator = Evaluator::new(model, inputs)?;
    let net = FixedNetwork::prepare(model, q)?;
    let metrics = evaluator.metrics_of(&net)?;
    let sites = model.sites();
    // (signal, noise) per site summed over items.
    let per_input: Vec<Vec<(f64, f64)>> = inputs
        .par_iter()
        .map(|x| {
            let float = forward_float(model, x)?;
            let fixed = net.forward(x)?;
            Ok(sites
                .iter()
                .map(|s| {
                    let (a, b) = (float[s.tap_index].data(), fixed[s.tap_index].data());
                    a.iter().zip(b).fold((0.0, 0.0), |(sig, noise), (u, v)| {
                        (sig + u * u, noise + (u - v) * (u - v))
                    })
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut layers = Vec::new();
    for (i, site) in sites.iter().enumerate() {
        let entry = q.entry(&site.name)?;
        let (w, b) = model.layers()[site.layer_index].kind.params().expect("site has params");
        let (sig, noise) = per_input
            .iter()
            .fold((0.0, 0.0), |(s, n), v| (s + v[i].0, n + v[i].1));
        let fm_sqnr_db = match entry.fm {
            None => None,
            Some(_) if sig == 0.0 => None,
            Some(_) if noise == 0.0 => Some(f64::INFINITY),
            Some(_) => Some(10.0 * (sig / noise).log10()),
        };
        layers.push(LayerRecord {
            layer: site.name.clone(),
            weight: entry.weight,
            bias: entry.bias,
            fm: entry.fm,
            weight_sqnr_db: sqnr_of(w.data(), entry.weight)?.unwrap_or(f64::INFINITY),
            bias_sqnr_db: sqnr_of(b.data(), entry.bias)?,
            fm_sqnr_db,
            fm_predicted_distortion: None,
            fm_empirical_distortion: None,
            weight_candidates: Vec::new(),
            fm_candidates: Vec::new(),
            promoted_weights: false,
            promoted_fm: false,
        });
    }
    Ok(QuantReport {
        scheme,
        mode: SearchMode::Default,
        layers,
        promoted_weights_ratio: None,
        promoted_fm_ratio: None,
        network: Some(NetworkMetrics {
            top1_agreement: metrics.top1,
            top5_agreement: metrics.top5,
            eval_items: evaluator.item_count(),
            eval_set: eval_set.into(),
        }),
        bft: None,
        assumptions: standard_assumptions(),
    })
}
