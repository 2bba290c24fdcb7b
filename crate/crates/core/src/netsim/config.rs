use super::NetworkModel;
use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointFormat;

/// Formats of one parameterized layer. `fm: None` keeps its feature map in
/// floating point.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerQuant {
    pub layer: String,
    pub weight: FixedPointFormat,
    pub bias: FixedPointFormat,
    pub fm: Option<FixedPointFormat>,
}

/// Per-layer fixed-point assignment for a whole network.
///
/// The network input has no entry of its own: it is quantized with the
/// first parameterized layer's feature-map format.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuantConfig {
    pub layers: Vec<LayerQuant>,
}

impl QuantConfig {
    pub fn get(&self, layer: &str) -> Option<&LayerQuant> {
        self.layers.iter().find(|l| l.layer == layer)
    }

    pub fn get_mut(&mut self, layer: &str) -> Option<&mut LayerQuant> {
        self.layers.iter_mut().find(|l| l.layer == layer)
    }

    pub fn entry(&self, layer: &str) -> Result<&LayerQuant> {
        self.get(layer)
            .ok_or_else(|| Error::Config(format!("no entry for layer `{layer}`")))
    }

    pub fn entry_mut(&mut self, layer: &str) -> Result<&mut LayerQuant> {
        self.get_mut(layer)
            .ok_or_else(|| Error::Config(format!("no entry for layer `{layer}`")))
    }

    /// Format applied to the network input.
    pub fn input_format(&self, model: &NetworkModel) -> Option<FixedPointFormat> {
        let first = model.sites().first()?;
        self.get(&first.name)?.fm
    }

    /// Every parameterized layer has exactly one entry, with valid signed
    /// weight/bias formats, and nothing else is listed.
    pub fn validate(&self, model: &NetworkModel) -> Result<()> {
        for site in model.sites() {
            let n = self.layers.iter().filter(|l| l.layer == site.name).count();
            if n != 1 {
                return Err(Error::Config(format!(
                    "layer `{}` must have exactly one entry, found {n}",
                    site.name
                )));
            }
        }
        for entry in &self.layers {
            if model.site(&entry.layer).is_none() {
                return Err(Error::Config(format!(
                    "entry for `{}`, which is not a parameterized layer",
                    entry.layer
                )));
            }
            entry.weight.validate()?;
            entry.bias.validate()?;
            if !entry.weight.signed || !entry.bias.signed {
                return Err(Error::Config(format!(
                    "layer `{}`: weight and bias formats must be signed",
                    entry.layer
                )));
            }
            if let Some(f) = &entry.fm {
                f.validate()?;
            }
        }
        Ok(())
    }

    /// Config whose formats are wide enough that quantization is a no-op
    /// for values of moderate magnitude.
    pub fn generous(model: &NetworkModel) -> Self {
        let wide = FixedPointFormat {
            bit_width: 32,
            fractional_length: 24,
            signed: true,
        };
        // Weights are small, so they get four more fractional bits.
        let fine = FixedPointFormat {
            fractional_length: 28,
            ..wide
        };
        Self {
            layers: model
                .sites()
                .iter()
                .map(|s| LayerQuant {
                    layer: s.name.clone(),
                    weight: fine,
                    bias: wide,
                    fm: Some(wide),
                })
                .collect(),
        }
    }
}
