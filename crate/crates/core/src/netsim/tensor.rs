use crate::error::{Error, Result};

/// Dense `f64` tensor in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidParameter(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        crate::fixedpoint::check_finite(&data)?;
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leading (batch) dimension.
    pub fn batch(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Values of batch item `n`.
    pub fn item(&self, n: usize) -> &[f64] {
        let per = self.len() / self.batch().max(1);
        &self.data[n * per..(n + 1) * per]
    }

    /// Splits along the batch dimension into chunks of at most `size` items.
    pub fn split_batches(&self, size: usize) -> Vec<Tensor> {
        let size = size.max(1);
        let per = self.len() / self.batch().max(1);
        let mut out = Vec::new();
        let mut start = 0;
        while start < self.batch() {
            let n = size.min(self.batch() - start);
            let mut shape = self.shape.clone();
            shape[0] = n;
            out.push(Tensor::from_parts(
                shape,
                self.data[start * per..(start + n) * per].to_vec(),
            ));
            start += n;
        }
        out
    }

    /// Stacks tensors of equal item shape along the batch dimension.
    pub fn concat(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or(Error::EmptyInput("tensors to concatenate"))?;
        let mut shape = first.shape.clone();
        shape[0] = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.shape.len() != shape.len() || p.shape[1..] != shape[1..] {
                return Err(Error::InvalidParameter(format!(
                    "cannot concatenate {:?} with {:?}",
                    p.shape, first.shape
                )));
            }
            shape[0] += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor::from_parts(shape, data))
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }
}
