//! Fixed-point number formats and the rounding/saturating quantizer.
//!
//! A [`FixedPointFormat`] describes the grid `k · 2^-FL` for integer codes
//! `k` in the two's-complement (signed) or natural (unsigned) range of the
//! bit-width. Values are simulated in `f64`; because every step is a power
//! of two, grid points are exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest and largest accepted bit-width.
pub const MIN_BIT_WIDTH: u32 = 2;
pub const MAX_BIT_WIDTH: u32 = 32;

/// Fractional lengths beyond this magnitude push `2^FL` out of comfortable
/// `f64` range and are rejected.
pub const MAX_ABS_FRACTIONAL_LENGTH: i32 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedPointFormat {
    pub bit_width: u32,
    pub fractional_length: i32,
    pub signed: bool,
}

impl FixedPointFormat {
    pub fn new(bit_width: u32, fractional_length: i32, signed: bool) -> Result<Self> {
        let fmt = Self {
            bit_width,
            fractional_length,
            signed,
        };
        fmt.validate()?;
        Ok(fmt)
    }

    pub fn signed(bit_width: u32, fractional_length: i32) -> Result<Self> {
        Self::new(bit_width, fractional_length, true)
    }

    pub fn unsigned(bit_width: u32, fractional_length: i32) -> Result<Self> {
        Self::new(bit_width, fractional_length, false)
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_BIT_WIDTH..=MAX_BIT_WIDTH).contains(&self.bit_width) {
            return Err(Error::InvalidFormat(format!(
                "bit-width {} outside [{MIN_BIT_WIDTH}, {MAX_BIT_WIDTH}]",
                self.bit_width
            )));
        }
        if self.fractional_length.abs() > MAX_ABS_FRACTIONAL_LENGTH {
            return Err(Error::InvalidFormat(format!(
                "fractional length {} outside ±{MAX_ABS_FRACTIONAL_LENGTH}",
                self.fractional_length
            )));
        }
        Ok(())
    }

    /// Same bit-width and signedness, different fractional length.
    pub fn with_fractional_length(self, fractional_length: i32) -> Result<Self> {
        Self::new(self.bit_width, fractional_length, self.signed)
    }

    /// Grid spacing `2^-FL`.
    pub fn step(&self) -> f64 {
        pow2(-self.fractional_length)
    }

    pub fn min_code(&self) -> i64 {
        if self.signed {
            -(1i64 << (self.bit_width - 1))
        } else {
            0
        }
    }

    pub fn max_code(&self) -> i64 {
        if self.signed {
            (1i64 << (self.bit_width - 1)) - 1
        } else {
            (1i64 << self.bit_width) - 1
        }
    }

    pub fn min_value(&self) -> f64 {
        self.min_code() as f64 * self.step()
    }

    pub fn max_value(&self) -> f64 {
        self.max_code() as f64 * self.step()
    }

    /// Number of representable values, `2^bw`.
    pub fn levels(&self) -> u64 {
        1u64 << self.bit_width
    }

    /// True when `x` is exactly a representable value of this format.
    pub fn contains(&self, x: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        let scaled = x * pow2(self.fractional_length);
        scaled.fract() == 0.0
            && scaled >= self.min_code() as f64
            && scaled <= self.max_code() as f64
    }

    /// Round to nearest (ties away from zero), then saturate.
    pub fn quantize(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFiniteSample { index: 0, value: x });
        }
        Ok(self.quantize_finite(x))
    }

    /// [`quantize`](Self::quantize) without the finiteness check, for hot
    /// loops over inputs that were validated up front.
    #[inline]
    pub fn quantize_finite(&self, x: f64) -> f64 {
        let scale = pow2(self.fractional_length);
        let code = (x * scale)
            .round()
            .clamp(self.min_code() as f64, self.max_code() as f64);
        code / scale
    }
}

impl std::fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}{}.{}",
            if self.signed { "s" } else { "u" },
            self.bit_width,
            self.fractional_length
        )
    }
}

/// `2^e` computed exactly for the supported exponent range.
#[inline]
pub fn pow2(e: i32) -> f64 {
    f64::powi(2.0, e)
}

/// Accumulated squared error and signal power of a quantized tensor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QuantizationError {
    pub sum_squared_error: f64,
    pub sum_signal_power: f64,
    pub sample_count: u64,
}

impl QuantizationError {
    pub fn accumulate(&mut self, original: f64, quantized: f64) {
        let e = original - quantized;
        self.sum_squared_error += e * e;
        self.sum_signal_power += original * original;
        self.sample_count += 1;
    }

    pub fn merge(&mut self, other: &QuantizationError) {
        self.sum_squared_error += other.sum_squared_error;
        self.sum_signal_power += other.sum_signal_power;
        self.sample_count += other.sample_count;
    }

    pub fn mean_squared_error(&self) -> f64 {
        if self.sample_count == 0 {
            0.0
        } else {
            self.sum_squared_error / self.sample_count as f64
        }
    }

    pub fn sqnr_db(&self) -> Result<f64> {
        sqnr_db(self)
    }
}

/// Signal-to-quantization-noise ratio in dB.
///
/// Returns `f64::INFINITY` when the noise is exactly zero.
pub fn sqnr_db(err: &QuantizationError) -> Result<f64> {
    if err.sample_count == 0 {
        return Err(Error::EmptyInput("SQNR of zero samples"));
    }
    if err.sum_signal_power <= 0.0 {
        return Err(Error::ZeroSignalPower);
    }
    if err.sum_squared_error == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (err.sum_signal_power / err.sum_squared_error).log10())
}

pub(crate) fn check_finite(xs: &[f64]) -> Result<()> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFiniteSample {
            index,
            value: xs[index],
        }),
        None => Ok(()),
    }
}

/// Quantize every element and accumulate the error statistics.
pub fn quantize_tensor(xs: &[f64], fmt: FixedPointFormat) -> Result<(Vec<f64>, QuantizationError)> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("quantize_tensor"));
    }
    check_finite(xs)?;
    fmt.validate()?;
    let mut err = QuantizationError::default();
    let out = xs
        .iter()
        .map(|&x| {
            let q = fmt.quantize_finite(x);
            err.accumulate(x, q);
            q
        })
        .collect();
    Ok((out, err))
}

/// Error statistics of quantizing `xs` without materializing the output.
pub fn measure_error(xs: &[f64], fmt: FixedPointFormat) -> Result<QuantizationError> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("measure_error"));
    }
    check_finite(xs)?;
    fmt.validate()?;
    Ok(measure_error_unchecked(xs, fmt))
}

pub(crate) fn measure_error_unchecked(xs: &[f64], fmt: FixedPointFormat) -> QuantizationError {
    let mut err = QuantizationError::default();
    for &x in xs {
        err.accumulate(x, fmt.quantize_finite(x));
    }
    err
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fmt(bw: u32, fl: i32, signed: bool) -> FixedPointFormat {
        FixedPointFormat::new(bw, fl, signed).unwrap()
    }

    #[test]
    fn zero_is_always_on_grid() {
        for &(bw, fl, s) in &[(2, 0, true), (8, -3, false), (16, 20, true), (32, 40, false)] {
            assert_eq!(fmt(bw, fl, s).quantize(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn rounds_to_nearest_grid_point() {
        assert_eq!(fmt(8, 2, true).quantize(0.3).unwrap(), 0.25);
    }

    #[test]
    fn saturates_at_positive_limit() {
        assert_eq!(fmt(8, 2, true).quantize(100.0).unwrap(), 31.75);
        assert_eq!(fmt(8, 2, true).quantize(-100.0).unwrap(), -32.0);
        assert_eq!(fmt(4, 0, false).quantize(-3.0).unwrap(), 0.0);
    }

    #[test]
    fn representable_values_pass_through() {
        assert_eq!(fmt(4, 3, true).quantize(-0.375).unwrap(), -0.375);
    }

    #[test]
    fn ties_round_away_from_zero() {
        let f = fmt(8, 0, true);
        assert_eq!(f.quantize(2.5).unwrap(), 3.0);
        assert_eq!(f.quantize(-2.5).unwrap(), -3.0);
    }

    #[test]
    fn rejects_non_finite() {
        let f = fmt(8, 2, true);
        assert!(matches!(f.quantize(f64::NAN), Err(Error::NonFiniteSample { .. })));
        assert!(f.quantize(f64::INFINITY).is_err());
        assert!(matches!(
            quantize_tensor(&[1.0, f64::NEG_INFINITY], f),
            Err(Error::NonFiniteSample { index: 1, .. })
        ));
    }

    #[test]
    fn rejects_bad_bit_width() {
        assert!(FixedPointFormat::new(1, 0, true).is_err());
        assert!(FixedPointFormat::new(33, 0, true).is_err());
        assert!(FixedPointFormat::new(32, 0, false).is_ok());
    }

    #[test]
    fn exact_tensor_has_infinite_sqnr() {
        let (q, err) = quantize_tensor(&[0.5, -0.5], fmt(8, 1, true)).unwrap();
        assert_eq!(q, vec![0.5, -0.5]);
        assert_eq!(err.sum_squared_error, 0.0);
        assert_eq!(sqnr_db(&err).unwrap(), f64::INFINITY);
    }

    #[test]
    fn tensor_error_accumulates() {
        let (_, err) = quantize_tensor(&[0.3, 0.3], fmt(8, 2, true)).unwrap();
        assert!((err.sum_squared_error - 0.005).abs() < 1e-15);
        assert!((err.sum_signal_power - 0.18).abs() < 1e-15);
        assert_eq!(err.sample_count, 2);
    }

    #[test]
    fn empty_tensor_is_an_error() {
        assert!(matches!(
            quantize_tensor(&[], fmt(8, 2, true)),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn sqnr_definition() {
        let e = QuantizationError {
            sum_squared_error: 1.0,
            sum_signal_power: 100.0,
            sample_count: 10,
        };
        assert!((sqnr_db(&e).unwrap() - 20.0).abs() < 1e-12);
        let silent = QuantizationError {
            sum_squared_error: 1.0,
            sum_signal_power: 0.0,
            sample_count: 3,
        };
        assert!(matches!(sqnr_db(&silent), Err(Error::ZeroSignalPower)));
    }

    #[test]
    fn gaussian_sqnr_matches_direct_recomputation() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let best = (0..8)
            .map(|fl| {
                let f = fmt(8, fl, true);
                (fl, quantize_tensor(&xs, f).unwrap().1.sum_squared_error)
            })
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0;
        let f = fmt(8, best, true);
        let (_, err) = quantize_tensor(&xs, f).unwrap();

        // Straightforward loop: nearest multiple of the step, clipped by hand.
        let step = 2f64.powi(-best);
        let (mut sig, mut noise) = (0.0, 0.0);
        for &x in &xs {
            let mut k = (x / step).round();
            k = k.max(-128.0).min(127.0);
            let q = k * step;
            sig += x * x;
            noise += (x - q) * (x - q);
        }
        let direct = 10.0 * (sig / noise).log10();
        assert!((sqnr_db(&err).unwrap() - direct).abs() < 1e-9);
    }

    fn any_format() -> impl Strategy<Value = FixedPointFormat> {
        (2u32..=16, -8i32..=16, any::<bool>()).prop_map(|(bw, fl, s)| fmt(bw, fl, s))
    }

    proptest! {
        #[test]
        fn idempotent(x in -1e4f64..1e4, f in any_format()) {
            let q = f.quantize(x).unwrap();
            prop_assert_eq!(f.quantize(q).unwrap(), q);
        }

        #[test]
        fn monotone(a in -1e4f64..1e4, b in -1e4f64..1e4, f in any_format()) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(f.quantize(lo).unwrap() <= f.quantize(hi).unwrap());
        }

        #[test]
        fn lands_on_grid(x in -1e4f64..1e4, f in any_format()) {
            let q = f.quantize(x).unwrap();
            let code = q * pow2(f.fractional_length);
            prop_assert_eq!(code.fract(), 0.0);
            prop_assert!(code >= f.min_code() as f64 && code <= f.max_code() as f64);
            prop_assert!(f.contains(q));
        }

        #[test]
        fn wider_format_never_worse(x in -1e4f64..1e4, bw in 2u32..=16, fl in -8i32..=16, s in any::<bool>()) {
            let narrow = fmt(bw, fl, s);
            let wide = fmt(bw + 1, fl, s);
            let en = (x - narrow.quantize(x).unwrap()).abs();
            let ew = (x - wide.quantize(x).unwrap()).abs();
            prop_assert!(ew <= en);
        }

        #[test]
        fn on_grid_values_are_fixed_points(code in -32768i64..32768, f in any_format()) {
            let code = code.clamp(f.min_code(), f.max_code());
            let x = code as f64 * f.step();
            prop_assert_eq!(f.quantize(x).unwrap(), x);
        }
    }
}
