use rayon::prelude::*;

use super::{LayerKind, NetworkModel, QuantConfig, Tensor};
use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointFormat;
use crate::quantizers::{collect_stats, SampleStats};

fn check_input(model: &NetworkModel, input: &Tensor) -> Result<()> {
    let shape = input.shape();
    if shape.len() != model.input_shape().len() + 1 || &shape[1..] != model.input_shape() || shape[0] == 0 {
        return Err(Error::Shape {
            layer: "input".into(),
            message: format!(
                "expected [N, {:?}] with N ≥ 1, got {shape:?}",
                model.input_shape()
            ),
        });
    }
    Ok(())
}

fn quantize_in_place(t: &mut Tensor, fmt: FixedPointFormat) {
    for x in t.data_mut() {
        *x = fmt.quantize_finite(*x);
    }
}

/// Runs every layer. `params` overrides parameters per layer index and
/// `tap_formats[i]` quantizes layer `i`'s output.
fn execute(
    model: &NetworkModel,
    params: &[Option<(Tensor, Tensor)>],
    input: &Tensor,
    input_format: Option<FixedPointFormat>,
    tap_formats: &[Option<FixedPointFormat>],
) -> Result<Vec<Tensor>> {
    check_input(model, input)?;
    let mut current = input.clone();
    if let Some(fmt) = input_format {
        quantize_in_place(&mut current, fmt);
    }
    let mut outputs = Vec::with_capacity(model.layers().len());
    for (i, layer) in model.layers().iter().enumerate() {
        let n = current.batch();
        let mut out_shape = vec![n];
        out_shape.extend_from_slice(model.output_shape(i));
        let mut next = match &layer.kind {
            LayerKind::Conv {
                weight,
                bias,
                stride,
                padding,
            } => {
                let (w, b) = match &params[i] {
                    Some((w, b)) => (w, b),
                    None => (weight, bias),
                };
                conv2d(&current, w, b, *stride, *padding, out_shape)
            }
            LayerKind::Fc { weight, bias } => {
                let (w, b) = match &params[i] {
                    Some((w, b)) => (w, b),
                    None => (weight, bias),
                };
                fully_connected(&current, w, b, out_shape)
            }
            LayerKind::Relu => {
                let mut t = current.clone();
                for x in t.data_mut() {
                    *x = x.max(0.0);
                }
                t
            }
            LayerKind::MaxPool { size, stride } => pool(&current, *size, *stride, out_shape, true),
            LayerKind::AvgPool { size, stride } => pool(&current, *size, *stride, out_shape, false),
            LayerKind::Softmax => softmax(&current),
        };
        if let Some(fmt) = tap_formats[i] {
            quantize_in_place(&mut next, fmt);
        }
        outputs.push(next.clone());
        current = next;
    }
    Ok(outputs)
}

fn conv2d(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, pad: usize, out_shape: Vec<usize>) -> Tensor {
    let (n, cin, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (cout, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
    let (oh, ow) = (out_shape[2], out_shape[3]);
    let xd = x.data();
    let wdat = w.data();
    let mut out = vec![0.0; n * cout * oh * ow];
    for item in 0..n {
        let xbase = item * cin * h * wd;
        for oc in 0..cout {
            let obase = ((item * cout) + oc) * oh * ow;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.data()[oc];
                    for ic in 0..cin {
                        let wbase = (oc * cin + ic) * kh * kw;
                        let cbase = xbase + ic * h * wd;
                        for ky in 0..kh {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let row = cbase + iy as usize * wd;
                            for kx in 0..kw {
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if ix < 0 || ix >= wd as isize {
                                    continue;
                                }
                                acc += wdat[wbase + ky * kw + kx] * xd[row + ix as usize];
                            }
                        }
                    }
                    out[obase + oy * ow + ox] = acc;
                }
            }
        }
    }
    Tensor::from_parts(out_shape, out)
}

fn fully_connected(x: &Tensor, w: &Tensor, b: &Tensor, out_shape: Vec<usize>) -> Tensor {
    let n = x.batch();
    let (outs, ins) = (w.shape()[0], w.shape()[1]);
    let mut out = Vec::with_capacity(n * outs);
    for item in 0..n {
        let xi = x.item(item);
        for o in 0..outs {
            let row = &w.data()[o * ins..(o + 1) * ins];
            let dot: f64 = row.iter().zip(xi).map(|(a, b)| a * b).sum();
            out.push(dot + b.data()[o]);
        }
    }
    Tensor::from_parts(out_shape, out)
}

fn pool(x: &Tensor, size: usize, stride: usize, out_shape: Vec<usize>, max: bool) -> Tensor {
    let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (oh, ow) = (out_shape[2], out_shape[3]);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let area = (size * size) as f64;
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = if max { f64::NEG_INFINITY } else { 0.0 };
                for ky in 0..size {
                    for kx in 0..size {
                        let v = x.data()[base + (oy * stride + ky) * w + ox * stride + kx];
                        if max {
                            acc = acc.max(v);
                        } else {
                            acc += v;
                        }
                    }
                }
                out.push(if max { acc } else { acc / area });
            }
        }
    }
    Tensor::from_parts(out_shape, out)
}

fn softmax(x: &Tensor) -> Tensor {
    let n = x.batch();
    let mut out = Vec::with_capacity(x.len());
    for item in 0..n {
        let v = x.item(item);
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = v.iter().map(|&a| (a - m).exp()).collect();
        let s: f64 = exps.iter().sum();
        out.extend(exps.into_iter().map(|e| e / s));
    }
    Tensor::from_parts(x.shape().to_vec(), out)
}

/// Every layer's output in floating point.
pub fn forward_float(model: &NetworkModel, input: &Tensor) -> Result<Vec<Tensor>> {
    let n = model.layers().len();
    execute(model, &vec![None; n], input, None, &vec![None; n])
}

/// A network with its parameters quantized once, ready for repeated
/// fixed-point forward passes.
#[derive(Debug, Clone)]
pub struct FixedNetwork<'a> {
    model: &'a NetworkModel,
    params: Vec<Option<(Tensor, Tensor)>>,
    input_format: Option<FixedPointFormat>,
    tap_formats: Vec<Option<FixedPointFormat>>,
}

impl<'a> FixedNetwork<'a> {
    pub fn prepare(model: &'a NetworkModel, q: &QuantConfig) -> Result<Self> {
        q.validate(model)?;
        let mut params = vec![None; model.layers().len()];
        let mut tap_formats = vec![None; model.layers().len()];
        for site in model.sites() {
            let entry = q.entry(&site.name)?;
            let (w, b) = model.layers()[site.layer_index]
                .kind
                .params()
                .expect("sites are parameterized layers");
            let quantize = |t: &Tensor, fmt: FixedPointFormat| {
                let data = t.data().iter().map(|&x| fmt.quantize_finite(x)).collect();
                Tensor::from_parts(t.shape().to_vec(), data)
            };
            params[site.layer_index] = Some((quantize(w, entry.weight), quantize(b, entry.bias)));
            tap_formats[site.tap_index] = entry.fm;
        }
        Ok(Self {
            model,
            params,
            input_format: q.input_format(model),
            tap_formats,
        })
    }

    pub fn forward(&self, input: &Tensor) -> Result<Vec<Tensor>> {
        execute(self.model, &self.params, input, self.input_format, &self.tap_formats)
    }

    /// Format applied to layer `i`'s output, if any.
    pub fn tap_format(&self, layer: usize) -> Option<FixedPointFormat> {
        self.tap_formats[layer]
    }
}

/// Every layer's output with weights, biases, the input and the feature
/// maps at quantization sites rounded to their formats.
pub fn forward_fixed(model: &NetworkModel, input: &Tensor, q: &QuantConfig) -> Result<Vec<Tensor>> {
    FixedNetwork::prepare(model, q)?.forward(input)
}

/// Float activations concatenated over a set of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    /// `(layer name, samples at its quantization site)`, in site order.
    pub sites: Vec<(String, Vec<f64>)>,
}

impl Activations {
    pub fn site(&self, name: &str) -> Option<&[f64]> {
        self.sites
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

pub fn capture_activations(model: &NetworkModel, inputs: &[Tensor]) -> Result<Activations> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput("calibration inputs"));
    }
    let runs: Vec<Vec<Tensor>> = inputs
        .par_iter()
        .map(|x| forward_float(model, x))
        .collect::<Result<_>>()?;
    let sites = model
        .sites()
        .iter()
        .map(|site| {
            let mut samples = Vec::new();
            for run in &runs {
                samples.extend_from_slice(run[site.tap_index].data());
            }
            (site.name.clone(), samples)
        })
        .collect();
    Ok(Activations { sites })
}

/// Zero-excluded statistics of every quantization site over `inputs`.
pub fn capture_calibration(model: &NetworkModel, inputs: &[Tensor]) -> Result<Vec<(String, SampleStats)>> {
    let acts = capture_activations(model, inputs)?;
    acts.sites
        .into_iter()
        .map(|(name, samples)| match collect_stats(&samples) {
            Ok(s) => Ok((name, s)),
            Err(e) => Err(e.in_layer(name)),
        })
        .collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn top_k(xs: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[b].total_cmp(&xs[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Agreement of a fixed-point network with the float network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Fraction of items whose fixed-point argmax equals the float argmax.
    pub top1: f64,
    /// Fraction of items whose float argmax is among the fixed-point top 5.
    pub top5: f64,
}

/// Float reference decisions for a fixed evaluation set, computed once.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    model: &'a NetworkModel,
    inputs: &'a [Tensor],
    reference: Vec<usize>,
}

impl<'a> Evaluator<'a> {
    pub fn new(model: &'a NetworkModel, inputs: &'a [Tensor]) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("evaluation inputs"));
        }
        let per_input: Vec<Vec<usize>> = inputs
            .par_iter()
            .map(|x| {
                let out = forward_float(model, x)?;
                let last = out.last().ok_or(Error::EmptyInput("model has no layers"))?;
                Ok((0..last.batch()).map(|n| argmax(last.item(n))).collect())
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            model,
            inputs,
            reference: per_input.into_iter().flatten().collect(),
        })
    }

    pub fn model(&self) -> &'a NetworkModel {
        self.model
    }

    pub fn inputs(&self) -> &'a [Tensor] {
        self.inputs
    }

    pub fn item_count(&self) -> usize {
        self.reference.len()
    }

    pub fn metrics(&self, q: &QuantConfig) -> Result<Metrics> {
        let net = FixedNetwork::prepare(self.model, q)?;
        self.metrics_of(&net)
    }

    pub fn metrics_of(&self, net: &FixedNetwork<'_>) -> Result<Metrics> {
        let per_input: Vec<Vec<(usize, Vec<usize>)>> = self
            .inputs
            .par_iter()
            .map(|x| {
                let out = net.forward(x)?;
                let last = out.last().expect("validated non-empty");
                Ok((0..last.batch())
                    .map(|n| {
                        let item = last.item(n);
                        (argmax(item), top_k(item, 5.min(item.len())))
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        let (mut top1, mut top5) = (0usize, 0usize);
        for ((fixed, top), &reference) in per_input.into_iter().flatten().zip(&self.reference) {
            top1 += usize::from(fixed == reference);
            top5 += usize::from(top.contains(&reference));
        }
        let total = self.reference.len() as f64;
        Ok(Metrics {
            top1: top1 as f64 / total,
            top5: top5 as f64 / total,
        })
    }
}

/// Fraction of inputs on which the fixed-point and float networks agree on
/// the top class.
pub fn top1_agreement(model: &NetworkModel, q: &QuantConfig, inputs: &[Tensor]) -> Result<f64> {
    Ok(Evaluator::new(model, inputs)?.metrics(q)?.top1)
}
