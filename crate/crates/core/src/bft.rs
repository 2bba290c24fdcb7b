//! Backward-forward tuning: coordinate ascent over per-layer fractional
//! lengths against a network-level agreement score.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointFormat;
use crate::netsim::{forward_float, Evaluator, NetworkModel, QuantConfig, Tensor};

/// Which fractional lengths a run may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BftTarget {
    Weights,
    #[serde(rename = "fm")]
    FeatureMaps,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Backward,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Weight,
    #[serde(rename = "fm")]
    FeatureMap,
}

/// One entry of the visiting order: a quantization site (index into
/// [`NetworkModel::sites`]) and the pass it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BftStep {
    pub site: usize,
    pub direction: Direction,
}

/// Number of metrics `metric_weights` can address: top-1 and top-5 agreement.
pub const METRIC_COUNT: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct BftConfig {
    pub order: Vec<BftStep>,
    /// Half-width K of the candidate window `[FL − K, FL + K]`.
    pub window: u32,
    /// `c_n` for `P_overall = Σ c_n P_n` with `P_0` = top-1 and `P_1` = top-5
    /// agreement. Missing trailing weights are zero.
    pub metric_weights: Vec<f64>,
    pub target: BftTarget,
    /// Drop candidates that would shrink the range below the largest
    /// magnitude seen on the evaluation set.
    pub clamp_to_observed_max: bool,
}

impl BftConfig {
    /// Output to input, then input to output; K = 1; top-1 only.
    pub fn new(model: &NetworkModel, target: BftTarget) -> Self {
        Self {
            order: default_order(model),
            window: 1,
            metric_weights: vec![1.0, 0.0],
            target,
            clamp_to_observed_max: true,
        }
    }

    pub fn with_window(mut self, window: u32) -> Self {
        self.window = window;
        self
    }

    pub fn validate(&self, model: &NetworkModel) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidParameter("tuning window must be at least 1".into()));
        }
        if self.metric_weights.is_empty() || self.metric_weights.len() > METRIC_COUNT {
            return Err(Error::InvalidParameter(format!(
                "expected 1 to {METRIC_COUNT} metric weights, got {}",
                self.metric_weights.len()
            )));
        }
        if self.metric_weights.iter().any(|c| !c.is_finite() || *c < 0.0)
            || self.metric_weights.iter().all(|&c| c == 0.0)
        {
            return Err(Error::InvalidParameter(
                "metric weights must be non-negative, finite and not all zero".into(),
            ));
        }
        if let Some(bad) = self.order.iter().find(|s| s.site >= model.sites().len()) {
            return Err(Error::InvalidParameter(format!(
                "order refers to site {} but the model has {}",
                bad.site,
                model.sites().len()
            )));
        }
        Ok(())
    }
}

pub fn default_order(model: &NetworkModel) -> Vec<BftStep> {
    let n = model.sites().len();
    (0..n)
        .rev()
        .map(|site| BftStep { site, direction: Direction::Backward })
        .chain((0..n).map(|site| BftStep { site, direction: Direction::Forward }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BftStepRecord {
    pub layer: String,
    pub direction: Direction,
    pub quantity: Quantity,
    pub incumbent: i32,
    /// `(FL, P_overall)` in ascending FL order.
    pub candidates: Vec<(i32, f64)>,
    /// Window members dropped by the observed-max clamp.
    pub clamped: Vec<i32>,
    pub chosen: i32,
}

impl BftStepRecord {
    pub fn changed(&self) -> bool {
        self.chosen != self.incumbent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BftTrace {
    pub initial_score: f64,
    pub final_score: f64,
    pub steps: Vec<BftStepRecord>,
}

impl BftTrace {
    pub fn changes(&self, direction: Direction) -> usize {
        self.steps
            .iter()
            .filter(|s| s.direction == direction && s.changed())
            .count()
    }

    pub fn unchanged(&self) -> bool {
        self.steps.iter().all(|s| !s.changed())
    }
}

/// `P_overall` of one config.
pub fn score(evaluator: &Evaluator<'_>, q: &QuantConfig, weights: &[f64]) -> Result<f64> {
    let m = evaluator.metrics(q)?;
    let p = [m.top1, m.top5];
    Ok(weights.iter().zip(p).map(|(c, p)| c * p).sum())
}

/// Best of `(FL, P)` pairs: highest P, then closest to the incumbent, then
/// the larger FL.
pub fn pick_best(candidates: &[(i32, f64)], incumbent: i32) -> i32 {
    let mut best = candidates[0];
    for &c in &candidates[1..] {
        let better = c.1 > best.1
            || (c.1 == best.1
                && ((c.0 - incumbent).abs() < (best.0 - incumbent).abs()
                    || ((c.0 - incumbent).abs() == (best.0 - incumbent).abs() && c.0 > best.0)));
        if better {
            best = c;
        }
    }
    best.0
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Largest magnitude per site: weights from the model, feature maps from
/// float passes over the evaluation set.
struct ObservedMax {
    weight: Vec<f64>,
    fm: Vec<f64>,
}

impl ObservedMax {
    fn measure(model: &NetworkModel, inputs: &[Tensor]) -> Result<Self> {
        let sites = model.sites();
        let weight = sites
            .iter()
            .map(|s| {
                let (w, _) = model.layers()[s.layer_index].kind.params().expect("site has params");
                max_abs(w.data())
            })
            .collect();
        let per_input: Vec<Vec<f64>> = inputs
            .par_iter()
            .map(|x| {
                let out = forward_float(model, x)?;
                Ok(sites.iter().map(|s| max_abs(out[s.tap_index].data())).collect())
            })
            .collect::<Result<_>>()?;
        let fm = (0..sites.len())
            .map(|i| per_input.iter().fold(0.0, |m, v| f64::max(m, v[i])))
            .collect();
        Ok(Self { weight, fm })
    }
}

fn format_of(q: &QuantConfig, layer: &str, quantity: Quantity) -> Result<Option<FixedPointFormat>> {
    let e = q.entry(layer)?;
    Ok(match quantity {
        Quantity::Weight => Some(e.weight),
        Quantity::FeatureMap => e.fm,
    })
}

fn set_format(q: &mut QuantConfig, layer: &str, quantity: Quantity, fmt: FixedPointFormat) -> Result<()> {
    let e = q.entry_mut(layer)?;
    match quantity {
        Quantity::Weight => e.weight = fmt,
        Quantity::FeatureMap => e.fm = Some(fmt),
    }
    Ok(())
}

/// Tunes fractional lengths one layer at a time in `cfg.order`, committing
/// the best candidate in each window before moving on. Only fractional
/// lengths change; bit-widths, signedness and model parameters do not.
pub fn run_bft(
    model: &NetworkModel,
    q: &QuantConfig,
    eval_inputs: &[Tensor],
    cfg: &BftConfig,
) -> Result<(QuantConfig, BftTrace)> {
    cfg.validate(model)?;
    q.validate(model)?;
    let evaluator = Evaluator::new(model, eval_inputs)?;
    let observed = if cfg.clamp_to_observed_max {
        Some(ObservedMax::measure(model, eval_inputs)?)
    } else {
        None
    };
    let quantities: &[Quantity] = match cfg.target {
        BftTarget::Weights => &[Quantity::Weight],
        BftTarget::FeatureMaps => &[Quantity::FeatureMap],
        BftTarget::Both => &[Quantity::Weight, Quantity::FeatureMap],
    };

    let initial_score = score(&evaluator, q, &cfg.metric_weights)?;
    let mut current = q.clone();
    let mut steps = Vec::new();
    let k = cfg.window as i32;
    for step in &cfg.order {
        let layer = &model.sites()[step.site].name;
        for &quantity in quantities {
            let Some(fmt) = format_of(&current, layer, quantity)? else {
                continue; // float feature map: nothing to tune
            };
            let incumbent = fmt.fractional_length;
            let limit = observed.as_ref().map(|o| match quantity {
                Quantity::Weight => o.weight[step.site],
                Quantity::FeatureMap => o.fm[step.site],
            });
            let mut window = Vec::new();
            let mut clamped = Vec::new();
            for fl in incumbent - k..=incumbent + k {
                let Ok(candidate) = fmt.with_fractional_length(fl) else {
                    continue; // outside the supported FL range
                };
                if fl > incumbent && limit.is_some_and(|m| candidate.max_value() < m) {
                    clamped.push(fl);
                    continue;
                }
                window.push(candidate);
            }
            let candidates: Vec<(i32, f64)> = window
                .par_iter()
                .map(|&candidate| {
                    let mut trial = current.clone();
                    set_format(&mut trial, layer, quantity, candidate)?;
                    let p = score(&evaluator, &trial, &cfg.metric_weights).map_err(|e| Error::Tuning {
                        layer: layer.clone(),
                        fl: candidate.fractional_length,
                        source: Box::new(e),
                    })?;
                    Ok((candidate.fractional_length, p))
                })
                .collect::<Result<_>>()?;
            let chosen = pick_best(&candidates, incumbent);
            set_format(&mut current, layer, quantity, fmt.with_fractional_length(chosen)?)?;
            steps.push(BftStepRecord {
                layer: layer.clone(),
                direction: step.direction,
                quantity,
                incumbent,
                candidates,
                clamped,
                chosen,
            });
        }
    }
    let final_score = score(&evaluator, &current, &cfg.metric_weights)?;
    Ok((current, BftTrace { initial_score, final_score, steps }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::{fixture, LayerKind, LayerQuant, LayerSpec};

    fn coarse(model: &NetworkModel, fm_bw: u32, fl: i32) -> QuantConfig {
        let mut q = QuantConfig::generous(model);
        for l in &mut q.layers {
            l.weight = FixedPointFormat::signed(6, 5).unwrap();
            l.fm = Some(FixedPointFormat::signed(fm_bw, fl).unwrap());
        }
        q
    }

    fn small_fixture(n: usize) -> (NetworkModel, Vec<Tensor>) {
        let m = fixture::reference_network(0);
        let x = fixture::synthetic_inputs(0, 4, n).split_batches(20);
        (m, x)
    }

    #[test]
    fn tie_break_prefers_incumbent_then_larger_fl() {
        assert_eq!(pick_best(&[(3, 0.5), (4, 0.5), (5, 0.5)], 4), 4);
        assert_eq!(pick_best(&[(3, 0.5), (4, 0.4), (5, 0.5)], 4), 5);
        assert_eq!(pick_best(&[(3, 0.6), (4, 0.4), (5, 0.5)], 4), 3);
    }

    #[test]
    fn config_validation() {
        let (m, _) = small_fixture(1);
        let cfg = BftConfig::new(&m, BftTarget::Both);
        assert_eq!(cfg.order.len(), 2 * m.sites().len());
        assert_eq!(cfg.order[0], BftStep { site: 3, direction: Direction::Backward });
        assert!(cfg.clone().with_window(0).validate(&m).is_err());
        let mut bad = cfg.clone();
        bad.metric_weights = vec![0.0, 0.0];
        assert!(bad.validate(&m).is_err());
        bad.metric_weights = vec![1.0, -0.1];
        assert!(bad.validate(&m).is_err());
        bad.metric_weights = vec![1.0, 0.0, 0.0];
        assert!(bad.validate(&m).is_err());
    }

    #[test]
    fn single_layer_equals_exhaustive_window() {
        // One fc layer feeding softmax; only its fm FL is tuned.
        let w = Tensor::new(vec![4, 3], (0..12).map(|i| ((i * 7 % 11) as f64 - 5.0) / 4.0).collect()).unwrap();
        let m = NetworkModel::new(
            vec![3],
            vec![
                LayerSpec::new("fc", LayerKind::Fc { weight: w, bias: Tensor::zeros(vec![4]) }),
                LayerSpec::new("sm", LayerKind::Softmax),
            ],
        )
        .unwrap();
        let x: Vec<Tensor> = (0..40)
            .map(|i| Tensor::new(vec![1, 3], vec![(i % 5) as f64 / 3.0, (i % 7) as f64 / 5.0, (i % 3) as f64 / 2.0]).unwrap())
            .collect();
        let wide = FixedPointFormat::signed(16, 10).unwrap();
        for fl in [-1, 0, 1, 2] {
            let q = QuantConfig {
                layers: vec![LayerQuant {
                    layer: "fc".into(),
                    weight: wide,
                    bias: wide,
                    fm: Some(FixedPointFormat::signed(3, fl).unwrap()),
                }],
            };
            let mut cfg = BftConfig::new(&m, BftTarget::FeatureMaps);
            cfg.order = vec![BftStep { site: 0, direction: Direction::Forward }];
            cfg.clamp_to_observed_max = false;
            let (tuned, trace) = run_bft(&m, &q, &x, &cfg).unwrap();
            let ev = Evaluator::new(&m, &x).unwrap();
            let exhaustive: Vec<(i32, f64)> = (fl - 1..=fl + 1)
                .map(|f| {
                    let mut t = q.clone();
                    t.layers[0].fm = Some(FixedPointFormat::signed(3, f).unwrap());
                    (f, ev.metrics(&t).unwrap().top1)
                })
                .collect();
            assert_eq!(trace.steps[0].candidates, exhaustive);
            let best = pick_best(&exhaustive, fl);
            assert_eq!(tuned.layers[0].fm.unwrap().fractional_length, best);
        }
    }

    #[test]
    fn locally_optimal_config_is_a_fixed_point() {
        let (m, x) = small_fixture(60);
        let cfg = BftConfig::new(&m, BftTarget::Both);
        let (once, _) = run_bft(&m, &coarse(&m, 4, 1), &x, &cfg).unwrap();
        // Re-running from the result may still move (coordinate ascent is not
        // a local-optimum certificate), so iterate until stable.
        let mut q = once;
        for _ in 0..10 {
            let (next, trace) = run_bft(&m, &q, &x, &cfg).unwrap();
            if trace.unchanged() {
                assert_eq!(next, q);
                assert!(trace.steps.iter().all(|s| s.chosen == s.incumbent));
                return;
            }
            q = next;
        }
        panic!("coordinate ascent did not settle");
    }

    #[test]
    fn never_decreases_and_replays_exactly() {
        let (m, x) = small_fixture(60);
        let q = coarse(&m, 4, 0);
        let cfg = BftConfig::new(&m, BftTarget::Both);
        let (tuned, trace) = run_bft(&m, &q, &x, &cfg).unwrap();
        assert!(trace.final_score >= trace.initial_score);
        let ev = Evaluator::new(&m, &x).unwrap();
        assert_eq!(score(&ev, &tuned, &cfg.metric_weights).unwrap(), trace.final_score);
        // Scores along the committed path never drop.
        let mut prev = trace.initial_score;
        for s in &trace.steps {
            let p = s.candidates.iter().find(|c| c.0 == s.chosen).unwrap().1;
            assert!(p >= prev, "{s:?}");
            prev = p;
        }
        let (again, trace2) = run_bft(&m, &q, &x, &cfg).unwrap();
        assert_eq!((again, trace2), (tuned, trace));
    }

    #[test]
    fn clamp_drops_saturating_candidates() {
        let (m, x) = small_fixture(20);
        // fm FL 3 at 4 bits tops out at 15/8, below every site's float max.
        let q = coarse(&m, 4, 3);
        let mut cfg = BftConfig::new(&m, BftTarget::FeatureMaps);
        let (_, trace) = run_bft(&m, &q, &x, &cfg).unwrap();
        assert!(trace.steps.iter().any(|s| !s.clamped.is_empty()));
        for s in &trace.steps {
            assert!(s.clamped.iter().all(|&fl| fl > s.incumbent));
            assert!(s.candidates.iter().all(|c| !s.clamped.contains(&c.0)));
        }
        cfg.clamp_to_observed_max = false;
        let (_, trace) = run_bft(&m, &q, &x, &cfg).unwrap();
        assert!(trace.steps.iter().all(|s| s.clamped.is_empty() && s.candidates.len() == 3));
    }

    #[test]
    fn float_feature_maps_are_skipped() {
        let (m, x) = small_fixture(20);
        let mut q = coarse(&m, 4, 1);
        for l in &mut q.layers {
            l.fm = None;
        }
        let (_, trace) = run_bft(&m, &q, &x, &BftConfig::new(&m, BftTarget::FeatureMaps)).unwrap();
        assert!(trace.steps.is_empty());
        let (_, trace) = run_bft(&m, &q, &x, &BftConfig::new(&m, BftTarget::Weights)).unwrap();
        assert_eq!(trace.steps.len(), 8);
        assert!(trace.steps.iter().all(|s| s.quantity == Quantity::Weight));
    }
}
