//! Per-layer fractional-length search.
//!
//! Weights and biases: try the fractional lengths that start at the largest
//! one that still covers `max|W|` and keep the one with the smallest total
//! squared error. Feature maps: fit a gamma density to the zero-excluded
//! activation moments, take the closed-form optimal step, and score the two
//! fractional lengths bracketing it (single-sided), or the range spanned by
//! both sign groups (double-sided). The max-based baseline rule lives here
//! too.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{check_finite, measure_error_unchecked, pow2, FixedPointFormat};
use crate::ggd::{self, GgdParams, QuantizerDesign};

/// Zero-excluded moments plus sign/zero counts of one sample stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub mean_excl_zero: f64,
    pub var_excl_zero: f64,
    pub count_total: u64,
    pub count_zero: u64,
    pub count_negative: u64,
    pub rho: f64,
}

impl SampleStats {
    pub fn count_nonzero(&self) -> u64 {
        self.count_total - self.count_zero
    }
}

/// Moments over the nonzero samples (population variance), counts over all.
pub fn collect_stats(samples: &[f64]) -> Result<SampleStats> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("collect_stats"));
    }
    check_finite(samples)?;
    let mut count_zero = 0u64;
    let mut count_negative = 0u64;
    let mut sum = 0.0;
    for &x in samples {
        if x == 0.0 {
            count_zero += 1;
        } else {
            if x < 0.0 {
                count_negative += 1;
            }
            sum += x;
        }
    }
    let count_total = samples.len() as u64;
    let nonzero = count_total - count_zero;
    if nonzero == 0 {
        return Err(Error::DegenerateStatistics("all samples are zero".into()));
    }
    let mean = sum / nonzero as f64;
    let var = samples
        .iter()
        .filter(|&&x| x != 0.0)
        .map(|&x| (x - mean) * (x - mean))
        .sum::<f64>()
        / nonzero as f64;
    Ok(SampleStats {
        mean_excl_zero: mean,
        var_excl_zero: var,
        count_total,
        count_zero,
        count_negative,
        rho: count_negative as f64 / count_total as f64,
    })
}

/// Moments of the two sign groups of a double-sided sample set.
///
/// `negative` describes the magnitudes of the negative samples; `positive`
/// the zero-and-positive group with zeros excluded from its moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleSidedStats {
    pub negative: SampleStats,
    pub positive: SampleStats,
    pub rho: f64,
}

impl DoubleSidedStats {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("double-sided statistics"));
        }
        check_finite(samples)?;
        let neg: Vec<f64> = samples.iter().filter(|&&x| x < 0.0).map(|x| -x).collect();
        let pos: Vec<f64> = samples.iter().copied().filter(|&x| x >= 0.0).collect();
        check_group("negative", &neg)?;
        check_group("zero-and-positive", &pos)?;
        Ok(Self {
            negative: collect_stats(&neg)?,
            positive: collect_stats(&pos)?,
            rho: neg.len() as f64 / samples.len() as f64,
        })
    }
}

fn check_group(name: &str, group: &[f64]) -> Result<()> {
    let mut nonzero = group.iter().copied().filter(|&x| x != 0.0);
    let distinct = match nonzero.next() {
        None => 0,
        Some(first) => {
            if nonzero.any(|x| x != first) {
                2
            } else {
                1
            }
        }
    };
    if distinct < 2 {
        return Err(Error::DegenerateStatistics(format!(
            "{name} group has fewer than 2 distinct nonzero values"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Score candidates by empirical squared error on the samples.
    #[default]
    Default,
    /// Score candidates by the predicted distortion of the fitted density.
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlSearchConfig {
    pub bit_width: u32,
    pub k_w: u32,
    pub mode: SearchMode,
}

impl FlSearchConfig {
    pub fn new(bit_width: u32) -> Self {
        Self {
            bit_width,
            k_w: 2,
            mode: SearchMode::Default,
        }
    }

    pub fn with_mode(mut self, mode: SearchMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_k_w(mut self, k_w: u32) -> Self {
        self.k_w = k_w;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.k_w < 1 {
            return Err(Error::InvalidParameter("k_w must be at least 1".into()));
        }
        FixedPointFormat::new(self.bit_width, 0, true).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerQuantResult {
    pub fractional_length: i32,
    /// Score of the chosen candidate under the mode's objective.
    pub distortion: f64,
    pub candidates_evaluated: Vec<(i32, f64)>,
    /// Per-sample distortion the fitted density predicts at the chosen FL.
    pub predicted_distortion: Option<f64>,
}

/// First strict minimum over the candidates in the order given.
fn pick_min(candidates: Vec<(i32, f64)>) -> Result<(i32, f64, Vec<(i32, f64)>)> {
    let mut best: Option<(i32, f64)> = None;
    for &(fl, d) in &candidates {
        if d.is_nan() {
            return Err(Error::InvalidParameter(format!("NaN distortion at FL {fl}")));
        }
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((fl, d)),
        }
    }
    let (fl, d) = best.ok_or(Error::EmptyInput("candidate set"))?;
    Ok((fl, d, candidates))
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Largest FL whose signed range covers `max|W|`, then the next `k_w − 1`.
pub fn weight_fl_candidates(weights: &[f64], cfg: &FlSearchConfig) -> Result<Vec<i32>> {
    if weights.is_empty() {
        return Err(Error::EmptyInput("weight tensor"));
    }
    check_finite(weights)?;
    cfg.validate()?;
    let m = max_abs(weights);
    if m == 0.0 {
        return Err(Error::AllZero("weight tensor"));
    }
    let first = cfg.bit_width as i32 - 1 - m.log2().ceil() as i32;
    Ok((0..cfg.k_w as i32).map(|k| first + k).collect())
}

/// Fractional length minimizing the total squared error over the candidate set.
///
/// Biases use the same search on the bias vector.
pub fn quantize_weights_layer(weights: &[f64], cfg: &FlSearchConfig) -> Result<LayerQuantResult> {
    let candidates = weight_fl_candidates(weights, cfg)?;
    let scored = candidates
        .into_iter()
        .map(|fl| {
            let fmt = FixedPointFormat::signed(cfg.bit_width, fl)?;
            Ok((fl, measure_error_unchecked(weights, fmt).sum_squared_error))
        })
        .collect::<Result<Vec<_>>>()?;
    let (fractional_length, distortion, candidates_evaluated) = pick_min(scored)?;
    Ok(LayerQuantResult {
        fractional_length,
        distortion,
        candidates_evaluated,
        predicted_distortion: None,
    })
}

/// `{−⌈log₂ Δ⌉, −⌊log₂ Δ⌋}`, ascending, deduplicated.
pub fn fl_candidates_from_step(step: f64) -> Result<Vec<i32>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidParameter(format!("step {step} must be positive")));
    }
    let l = step.log2();
    let a = -(l.ceil() as i32);
    let b = -(l.floor() as i32);
    Ok(if a == b { vec![a] } else { vec![a, b] })
}

/// Single-sided level count for an unsigned `bit_width` format.
pub fn single_sided_levels(bit_width: u32) -> u64 {
    1u64 << bit_width
}

/// Fitted density and closed-form design of a single-sided layer.
pub fn single_sided_design(stats: &SampleStats, bit_width: u32) -> Result<(GgdParams, QuantizerDesign)> {
    let p = ggd::estimate_from_moments(stats.mean_excl_zero, stats.var_excl_zero)?;
    let design = ggd::design_single_sided(single_sided_levels(bit_width), &p)?;
    Ok((p, design))
}

/// Predicted distortion of the `n_sym`-level symmetric quantizer with step `2^-FL`.
fn fast_score(n_sym: u64, fl: i32, p: &GgdParams) -> Result<f64> {
    let support = n_sym as f64 * pow2(-fl) / 2.0;
    ggd::predicted_distortion(n_sym, support, p)
}

fn check_samples_for_scoring(samples: &[f64], mode: SearchMode) -> Result<()> {
    if mode == SearchMode::Default {
        if samples.is_empty() {
            return Err(Error::EmptyInput("default-mode scoring needs the samples"));
        }
        check_finite(samples)?;
    }
    Ok(())
}

/// Feature-map search for non-negative (post-ReLU) samples.
///
/// Fast mode never reads `samples`; an empty slice is accepted there.
pub fn quantize_fm_single_sided(
    samples: &[f64],
    stats: &SampleStats,
    cfg: &FlSearchConfig,
) -> Result<LayerQuantResult> {
    cfg.validate()?;
    check_samples_for_scoring(samples, cfg.mode)?;
    if cfg.mode == SearchMode::Default {
        if let Some(i) = samples.iter().position(|&x| x < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "single-sided samples must be non-negative (index {i} is {})",
                samples[i]
            )));
        }
    }
    let (p, design) = single_sided_design(stats, cfg.bit_width)?;
    let n_sym = design.levels_n;
    let candidates = fl_candidates_from_step(design.step_size)?;
    let scored = candidates
        .into_iter()
        .map(|fl| {
            let score = match cfg.mode {
                SearchMode::Default => {
                    let fmt = FixedPointFormat::unsigned(cfg.bit_width, fl)?;
                    measure_error_unchecked(samples, fmt).sum_squared_error
                }
                SearchMode::Fast => fast_score(n_sym, fl, &p)?,
            };
            Ok((fl, score))
        })
        .collect::<Result<Vec<_>>>()?;
    let (fractional_length, distortion, candidates_evaluated) = pick_min(scored)?;
    Ok(LayerQuantResult {
        fractional_length,
        distortion,
        candidates_evaluated,
        predicted_distortion: Some(fast_score(n_sym, fractional_length, &p)?),
    })
}

/// Feature-map search for samples of both signs.
///
/// `stats` is accepted for symmetry with the single-sided entry point; the
/// group moments are recomputed from `samples`.
pub fn quantize_fm_double_sided(
    samples: &[f64],
    _stats: &SampleStats,
    cfg: &FlSearchConfig,
) -> Result<LayerQuantResult> {
    let groups = DoubleSidedStats::from_samples(samples)?;
    quantize_fm_double_sided_with(&groups, samples, cfg)
}

/// Fitted densities of both sign groups and the candidate FLs they span.
pub fn double_sided_candidates(
    groups: &DoubleSidedStats,
    bit_width: u32,
) -> Result<(GgdParams, GgdParams, Vec<i32>)> {
    let per_side_levels = single_sided_levels(bit_width - 1);
    let mut collected = Vec::with_capacity(4);
    let mut fit = |s: &SampleStats| -> Result<GgdParams> {
        let p = ggd::estimate_from_moments(s.mean_excl_zero, s.var_excl_zero)?;
        let design = ggd::design_single_sided(per_side_levels, &p)?;
        collected.extend(fl_candidates_from_step(design.step_size)?);
        Ok(p)
    };
    let p_neg = fit(&groups.negative)?;
    let p_pos = fit(&groups.positive)?;
    let lo = *collected.iter().min().expect("two groups fitted");
    let hi = *collected.iter().max().expect("two groups fitted");
    Ok((p_neg, p_pos, (lo..=hi).collect()))
}

/// Double-sided search from precomputed group statistics.
///
/// Fast mode never reads `samples`; an empty slice is accepted there.
pub fn quantize_fm_double_sided_with(
    groups: &DoubleSidedStats,
    samples: &[f64],
    cfg: &FlSearchConfig,
) -> Result<LayerQuantResult> {
    cfg.validate()?;
    check_samples_for_scoring(samples, cfg.mode)?;
    let (p_neg, p_pos, candidates) = double_sided_candidates(groups, cfg.bit_width)?;
    let n_sym = single_sided_levels(cfg.bit_width);
    let rho = groups.rho;
    let weighted = |fl: i32| -> Result<f64> {
        Ok(rho * fast_score(n_sym, fl, &p_neg)? + (1.0 - rho) * fast_score(n_sym, fl, &p_pos)?)
    };
    let scored = candidates
        .into_iter()
        .map(|fl| {
            let score = match cfg.mode {
                SearchMode::Default => {
                    let fmt = FixedPointFormat::signed(cfg.bit_width, fl)?;
                    measure_error_unchecked(samples, fmt).sum_squared_error
                }
                SearchMode::Fast => weighted(fl)?,
            };
            Ok((fl, score))
        })
        .collect::<Result<Vec<_>>>()?;
    let (fractional_length, distortion, candidates_evaluated) = pick_min(scored)?;
    Ok(LayerQuantResult {
        fractional_length,
        distortion,
        candidates_evaluated,
        predicted_distortion: Some(weighted(fractional_length)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Weight,
    FeatureMap,
}

/// Max-based baseline: `bw − 1 − ⌈log₂ max|W|⌉` for weights,
/// `bw − ⌈log₂ max x⌉` for (unsigned) feature maps.
pub fn ristretto_fl(max_abs: f64, bit_width: u32, kind: TensorKind) -> Result<i32> {
    if !(max_abs.is_finite() && max_abs > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "baseline needs a positive maximum, got {max_abs}"
        )));
    }
    let c = max_abs.log2().ceil() as i32;
    Ok(match kind {
        TensorKind::Weight => bit_width as i32 - 1 - c,
        TensorKind::FeatureMap => bit_width as i32 - c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::measure_error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, Gamma, Normal};

    fn cfg(bw: u32) -> FlSearchConfig {
        FlSearchConfig::new(bw)
    }

    fn sse(xs: &[f64], fmt: FixedPointFormat) -> f64 {
        measure_error(xs, fmt).unwrap().sum_squared_error
    }

    #[test]
    fn weight_candidates_follow_max() {
        assert_eq!(weight_fl_candidates(&[0.9, -0.1], &cfg(8)).unwrap(), vec![7, 8]);
        assert_eq!(weight_fl_candidates(&[-1.0, 0.3], &cfg(8)).unwrap(), vec![7, 8]);
        assert_eq!(
            weight_fl_candidates(&[5.2, 1.0], &cfg(6).with_k_w(3)).unwrap(),
            vec![2, 3, 4]
        );
        assert!(matches!(
            weight_fl_candidates(&[0.0, 0.0], &cfg(8)),
            Err(Error::AllZero(_))
        ));
    }

    #[test]
    fn weights_on_a_power_of_two_max() {
        // max|W| = 0.5 gives m = 4; the signed range at FL 4 tops out at
        // 0.4375, so 0.5 saturates. FL 3 would be exact but is outside the set.
        let w = [0.5, -0.25, 0.125];
        let r = quantize_weights_layer(&w, &cfg(4)).unwrap();
        assert_eq!(r.candidates_evaluated.iter().map(|c| c.0).collect::<Vec<_>>(), vec![4, 5]);
        assert_eq!(r.fractional_length, 4);
        assert_eq!(r.distortion, 0.0625 * 0.0625);
        assert_eq!(sse(&w, FixedPointFormat::signed(4, 3).unwrap()), 0.0);
    }

    #[test]
    fn exact_weights_give_zero_distortion() {
        let w = [0.375, -0.25, 0.125];
        let r = quantize_weights_layer(&w, &cfg(4)).unwrap();
        assert_eq!(r.fractional_length, 4);
        assert_eq!(r.distortion, 0.0);
    }

    #[test]
    fn constant_weights_prefer_range() {
        let w = vec![0.9; 64];
        let r = quantize_weights_layer(&w, &cfg(8)).unwrap();
        let d7 = sse(&w, FixedPointFormat::signed(8, 7).unwrap());
        let d8 = sse(&w, FixedPointFormat::signed(8, 8).unwrap());
        assert!(d7 < d8);
        assert_eq!(r.fractional_length, 7);
        assert_eq!(r.distortion, d7);
    }

    #[test]
    fn gaussian_weights_match_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let normal = Normal::new(0.0, 0.1).unwrap();
        let w: Vec<f64> = (0..512).map(|_| normal.sample(&mut rng)).collect();
        let r = quantize_weights_layer(&w, &cfg(6)).unwrap();
        let m = weight_fl_candidates(&w, &cfg(6)).unwrap()[0];
        let mut best = (m - 2, f64::INFINITY);
        for fl in m - 2..=m + 6 {
            let d = sse(&w, FixedPointFormat::signed(6, fl).unwrap());
            if d < best.1 {
                best = (fl, d);
            }
        }
        assert_eq!(r.fractional_length, best.0);
    }

    #[test]
    fn ties_keep_the_smaller_fl() {
        let (fl, _, _) = pick_min(vec![(3, 1.0), (4, 1.0)]).unwrap();
        assert_eq!(fl, 3);
    }

    #[test]
    fn stats_exclude_zeros() {
        let s = collect_stats(&[0.0, 0.0, 2.0, 4.0]).unwrap();
        assert_eq!(s.mean_excl_zero, 3.0);
        assert_eq!(s.var_excl_zero, 1.0);
        assert_eq!(s.rho, 0.0);
        assert_eq!(s.count_zero, 2);
        let s = collect_stats(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.rho, 1.0 / 3.0);
        assert_eq!(s.count_zero, 1);
        assert_eq!(s.count_negative, 1);
        assert!(matches!(collect_stats(&[0.0; 5]), Err(Error::DegenerateStatistics(_))));
        assert!(collect_stats(&[]).is_err());
    }

    #[test]
    fn stats_with_injected_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = Gamma::new(2.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..100_000)
            .map(|i| if i % 10 < 3 { 0.0 } else { g.sample(&mut rng) })
            .collect();
        let s = collect_stats(&xs).unwrap();
        assert_eq!(s.count_zero, 30_000);
        assert!((s.mean_excl_zero - 2.0).abs() / 2.0 < 0.02);
    }

    #[test]
    fn power_of_two_step_gives_one_candidate() {
        assert_eq!(fl_candidates_from_step(pow2(-5)).unwrap(), vec![5]);
        assert_eq!(fl_candidates_from_step(0.05).unwrap(), vec![4, 5]);
        assert_eq!(fl_candidates_from_step(3.0).unwrap(), vec![-2, -1]);
    }

    fn gamma_samples(kappa: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Gamma::new(kappa, 1.0).unwrap();
        (0..n).map(|_| g.sample(&mut rng)).collect()
    }

    #[test]
    fn single_sided_default_beats_neighbouring_fls() {
        let xs = gamma_samples(1.0, 1_000_000, 1);
        let stats = collect_stats(&xs).unwrap();
        let r = quantize_fm_single_sided(&xs, &stats, &cfg(6)).unwrap();
        let chosen = sse(&xs, FixedPointFormat::unsigned(6, r.fractional_length).unwrap());
        assert_eq!(chosen, r.distortion);
        for fl in r.fractional_length - 3..=r.fractional_length + 3 {
            assert!(chosen <= sse(&xs, FixedPointFormat::unsigned(6, fl).unwrap()), "FL {fl}");
        }
    }

    #[test]
    fn fast_and_default_share_candidates() {
        let xs = gamma_samples(2.0, 200_000, 2);
        let stats = collect_stats(&xs).unwrap();
        let d = quantize_fm_single_sided(&xs, &stats, &cfg(8)).unwrap();
        let f = quantize_fm_single_sided(&[], &stats, &cfg(8).with_mode(SearchMode::Fast)).unwrap();
        let set = |r: &LayerQuantResult| r.candidates_evaluated.iter().map(|c| c.0).collect::<Vec<_>>();
        assert_eq!(set(&d), set(&f));
        let emp = |fl| sse(&xs, FixedPointFormat::unsigned(8, fl).unwrap());
        assert!(emp(d.fractional_length) <= emp(f.fractional_length));
    }

    #[test]
    fn single_sided_rejects_negative_samples() {
        let xs = [1.0, 2.0, -0.5, 3.0];
        let stats = collect_stats(&xs).unwrap();
        assert!(quantize_fm_single_sided(&xs, &stats, &cfg(8)).is_err());
    }

    fn laplace_samples(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = Exp::new(1.0).unwrap();
        (0..n)
            .map(|i| {
                let m: f64 = e.sample(&mut rng);
                if i % 2 == 0 { m } else { -m }
            })
            .collect()
    }

    #[test]
    fn symmetric_input_gives_consistent_groups() {
        let base = gamma_samples(1.5, 50_000, 3);
        let xs: Vec<f64> = base.iter().flat_map(|&x| [x, -x]).collect();
        let groups = DoubleSidedStats::from_samples(&xs).unwrap();
        assert!((groups.rho - 0.5).abs() < 1e-12);
        let (_, _, cands) = double_sided_candidates(&groups, 8).unwrap();
        assert!(cands.len() <= 2, "{cands:?}");
    }

    #[test]
    fn double_sided_default_beats_neighbouring_fls() {
        let xs = laplace_samples(1_000_000, 4);
        let stats = collect_stats(&xs).unwrap();
        let r = quantize_fm_double_sided(&xs, &stats, &cfg(8)).unwrap();
        let chosen = sse(&xs, FixedPointFormat::signed(8, r.fractional_length).unwrap());
        for fl in r.fractional_length - 3..=r.fractional_length + 3 {
            assert!(chosen <= sse(&xs, FixedPointFormat::signed(8, fl).unwrap()), "FL {fl}");
        }
    }

    #[test]
    fn fast_double_sided_weights_groups_by_rho() {
        // Rare negatives: 1% of the samples.
        let pos = gamma_samples(2.0, 99_000, 5);
        let neg = gamma_samples(1.0, 1_000, 6);
        let xs: Vec<f64> = pos.into_iter().chain(neg.into_iter().map(|x| -3.0 * x)).collect();
        let groups = DoubleSidedStats::from_samples(&xs).unwrap();
        assert!((groups.rho - 0.01).abs() < 1e-12);
        let c = cfg(8).with_mode(SearchMode::Fast);
        let r = quantize_fm_double_sided_with(&groups, &[], &c).unwrap();
        let p_neg = ggd::estimate_from_moments(groups.negative.mean_excl_zero, groups.negative.var_excl_zero).unwrap();
        let p_pos = ggd::estimate_from_moments(groups.positive.mean_excl_zero, groups.positive.var_excl_zero).unwrap();
        for &(fl, score) in &r.candidates_evaluated {
            let support = 256.0 * pow2(-fl) / 2.0;
            let dn = ggd::predicted_distortion(256, support, &p_neg).unwrap();
            let dp = ggd::predicted_distortion(256, support, &p_pos).unwrap();
            let by_hand = 0.01 * dn + 0.99 * dp;
            assert!((score - by_hand).abs() <= 1e-12 * by_hand);
        }
    }

    #[test]
    fn double_sided_needs_both_groups() {
        let xs = [1.0, 2.0, 3.0, -1.0];
        let stats = collect_stats(&xs).unwrap();
        assert!(matches!(
            quantize_fm_double_sided(&xs, &stats, &cfg(8)),
            Err(Error::DegenerateStatistics(_))
        ));
    }

    #[test]
    fn baseline_formula() {
        assert_eq!(ristretto_fl(0.9, 8, TensorKind::Weight).unwrap(), 7);
        assert_eq!(ristretto_fl(5.2, 8, TensorKind::FeatureMap).unwrap(), 5);
        assert_eq!(ristretto_fl(4.0, 6, TensorKind::FeatureMap).unwrap(), 4);
        assert!(ristretto_fl(0.0, 8, TensorKind::Weight).is_err());
    }
}
