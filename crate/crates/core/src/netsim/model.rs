use std::collections::HashSet;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    /// Weight `[out, in, kh, kw]`, bias `[out]`, zero padding on both sides.
    Conv {
        weight: Tensor,
        bias: Tensor,
        stride: usize,
        padding: usize,
    },
    /// Weight `[out, in]`, bias `[out]`; the input is flattened per item.
    Fc { weight: Tensor, bias: Tensor },
    Relu,
    MaxPool { size: usize, stride: usize },
    AvgPool { size: usize, stride: usize },
    Softmax,
}

impl LayerKind {
    pub fn tag(&self) -> &'static str {
        match self {
            LayerKind::Conv { .. } => "conv",
            LayerKind::Fc { .. } => "fc",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool { .. } => "maxpool",
            LayerKind::AvgPool { .. } => "avgpool",
            LayerKind::Softmax => "softmax",
        }
    }

    pub fn params(&self) -> Option<(&Tensor, &Tensor)> {
        match self {
            LayerKind::Conv { weight, bias, .. } | LayerKind::Fc { weight, bias } => {
                Some((weight, bias))
            }
            _ => None,
        }
    }

    pub fn is_parameterized(&self) -> bool {
        self.params().is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// Where a parameterized layer's feature map is quantized.
///
/// The tap is the last layer of the block that starts at the parameterized
/// layer and runs up to the next one, skipping a trailing softmax: for
/// `conv → relu → maxpool` it is the pooled, post-ReLU output; for a
/// classifier feeding softmax it is the classifier output itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantSite {
    pub name: String,
    pub layer_index: usize,
    pub tap_index: usize,
}

/// Validated layer graph with per-item output shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    output_shapes: Vec<Vec<usize>>,
    sites: Vec<QuantSite>,
}

impl NetworkModel {
    /// Shape-checks the layer chain. `input_shape` excludes the batch dimension.
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::Shape {
                layer: "input".into(),
                message: format!("invalid input shape {input_shape:?}"),
            });
        }
        let mut names = HashSet::new();
        let mut shapes = Vec::with_capacity(layers.len());
        let mut current = input_shape.clone();
        for layer in &layers {
            if !names.insert(layer.name.as_str()) {
                return Err(Error::Shape {
                    layer: layer.name.clone(),
                    message: "duplicate layer name".into(),
                });
            }
            current = output_shape(layer, &current).map_err(|message| Error::Shape {
                layer: layer.name.clone(),
                message,
            })?;
            shapes.push(current.clone());
        }
        let sites = find_sites(&layers);
        Ok(Self {
            input_shape,
            layers,
            output_shapes: shapes,
            sites,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn output_shape(&self, layer: usize) -> &[usize] {
        &self.output_shapes[layer]
    }

    pub fn num_classes(&self) -> usize {
        self.output_shapes
            .last()
            .map(|s| s.iter().product())
            .unwrap_or(0)
    }

    /// Quantization sites, one per parameterized layer, in network order.
    pub fn sites(&self) -> &[QuantSite] {
        &self.sites
    }

    pub fn site(&self, name: &str) -> Option<&QuantSite> {
        self.sites.iter().find(|s| s.name == name)
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    /// Replace the parameters of a parameterized layer, keeping shapes.
    pub fn with_params(&self, replacements: &[(usize, Tensor, Tensor)]) -> Result<Self> {
        let mut layers = self.layers.clone();
        for (index, w, b) in replacements {
            match &mut layers[*index].kind {
                LayerKind::Conv { weight, bias, .. } | LayerKind::Fc { weight, bias } => {
                    *weight = w.clone();
                    *bias = b.clone();
                }
                _ => {
                    return Err(Error::Shape {
                        layer: layers[*index].name.clone(),
                        message: "layer has no parameters".into(),
                    })
                }
            }
        }
        Self::new(self.input_shape.clone(), layers)
    }
}

fn find_sites(layers: &[LayerSpec]) -> Vec<QuantSite> {
    let mut sites = Vec::new();
    for (i, layer) in layers.iter().enumerate() {
        if !layer.kind.is_parameterized() {
            continue;
        }
        let mut tap = i;
        for (j, next) in layers.iter().enumerate().skip(i + 1) {
            if next.kind.is_parameterized() || next.kind == LayerKind::Softmax {
                break;
            }
            tap = j;
        }
        sites.push(QuantSite {
            name: layer.name.clone(),
            layer_index: i,
            tap_index: tap,
        });
    }
    sites
}

fn pooled(extent: usize, size: usize, stride: usize) -> std::result::Result<usize, String> {
    if size == 0 || stride == 0 {
        return Err("pool size and stride must be positive".into());
    }
    if extent < size {
        return Err(format!("pool window {size} larger than input extent {extent}"));
    }
    Ok((extent - size) / stride + 1)
}

fn output_shape(layer: &LayerSpec, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
    match &layer.kind {
        LayerKind::Conv {
            weight,
            bias,
            stride,
            padding,
        } => {
            let [c, h, w] = input else {
                return Err(format!("conv expects a [C, H, W] input, got {input:?}"));
            };
            let ws = weight.shape();
            if ws.len() != 4 || ws[1] != *c {
                return Err(format!("weight shape {ws:?} does not match {c} input channels"));
            }
            if bias.shape() != [ws[0]] {
                return Err(format!("bias shape {:?} does not match {} outputs", bias.shape(), ws[0]));
            }
            if *stride == 0 {
                return Err("stride must be positive".into());
            }
            let (kh, kw) = (ws[2], ws[3]);
            if h + 2 * padding < kh || w + 2 * padding < kw {
                return Err("kernel larger than padded input".into());
            }
            Ok(vec![
                ws[0],
                (h + 2 * padding - kh) / stride + 1,
                (w + 2 * padding - kw) / stride + 1,
            ])
        }
        LayerKind::Fc { weight, bias } => {
            let features: usize = input.iter().product();
            let ws = weight.shape();
            if ws.len() != 2 || ws[1] != features {
                return Err(format!("weight shape {ws:?} does not match {features} input features"));
            }
            if bias.shape() != [ws[0]] {
                return Err(format!("bias shape {:?} does not match {} outputs", bias.shape(), ws[0]));
            }
            Ok(vec![ws[0]])
        }
        LayerKind::Relu => Ok(input.to_vec()),
        LayerKind::MaxPool { size, stride } | LayerKind::AvgPool { size, stride } => {
            let [c, h, w] = input else {
                return Err(format!("pooling expects a [C, H, W] input, got {input:?}"));
            };
            Ok(vec![*c, pooled(*h, *size, *stride)?, pooled(*w, *size, *stride)?])
        }
        LayerKind::Softmax => {
            if input.len() != 1 {
                return Err(format!("softmax expects a flat input, got {input:?}"));
            }
            Ok(input.to_vec())
        }
    }
}
