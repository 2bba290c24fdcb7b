//! Seeded reference network and synthetic inputs for tests and benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use super::{forward_float, LayerKind, LayerSpec, NetworkModel, Tensor};

pub const INPUT_SHAPE: [usize; 3] = [3, 16, 16];
pub const NUM_CLASSES: usize = 10;

// Stream offsets so the network, prototypes and samples never share a stream.
const NET_STREAM: u64 = 1;
const PROTO_STREAM: u64 = 2;
const SAMPLE_STREAM: u64 = 3;

/// Values are stored as `f32` on disk; generating them at that precision
/// keeps in-memory and reloaded fixtures identical.
fn f32_exact(x: f64) -> f64 {
    x as f32 as f64
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn he_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize) -> Tensor {
    let gain: f64 = rng.random_range(0.6..1.6);
    let normal = Normal::new(0.0, gain * (2.0 / fan_in as f64).sqrt()).expect("valid sigma");
    let n = shape.iter().product();
    let data = (0..n).map(|_| f32_exact(normal.sample(rng))).collect();
    Tensor::from_parts(shape, data)
}

fn small_bias(rng: &mut ChaCha8Rng, n: usize) -> Tensor {
    let data = (0..n).map(|_| f32_exact(rng.random_range(-0.05..0.05))).collect();
    Tensor::from_parts(vec![n], data)
}

fn conv(rng: &mut ChaCha8Rng, name: &str, cin: usize, cout: usize) -> LayerSpec {
    LayerSpec::new(
        name,
        LayerKind::Conv {
            weight: he_tensor(rng, vec![cout, cin, 3, 3], cin * 9),
            bias: small_bias(rng, cout),
            stride: 1,
            padding: 1,
        },
    )
}

/// Smooth non-negative class templates, one per class.
fn prototypes(seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed, PROTO_STREAM);
    let gamma = Gamma::new(1.5, 1.0).expect("valid gamma");
    let [c, h, w] = INPUT_SHAPE;
    (0..NUM_CLASSES)
        .map(|_| {
            let raw: Vec<f64> = (0..c * h * w).map(|_| gamma.sample(&mut r)).collect();
            // 3×3 box blur per channel gives spatial structure for the convs.
            let mut out = vec![0.0; raw.len()];
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        let (mut acc, mut cnt) = (0.0, 0.0);
                        for dy in -1i64..=1 {
                            for dx in -1i64..=1 {
                                let (yy, xx) = (y as i64 + dy, x as i64 + dx);
                                if yy >= 0 && yy < h as i64 && xx >= 0 && xx < w as i64 {
                                    acc += raw[(ch * h + yy as usize) * w + xx as usize];
                                    cnt += 1.0;
                                }
                            }
                        }
                        out[(ch * h + y) * w + x] = acc / cnt;
                    }
                }
            }
            out
        })
        .collect()
}

fn feature_stack(seed: u64) -> Vec<LayerSpec> {
    let mut r = rng(seed, NET_STREAM);
    vec![
        conv(&mut r, "conv1", 3, 8),
        LayerSpec::new("relu1", LayerKind::Relu),
        LayerSpec::new("pool1", LayerKind::MaxPool { size: 2, stride: 2 }),
        conv(&mut r, "conv2", 8, 16),
        LayerSpec::new("relu2", LayerKind::Relu),
        LayerSpec::new("pool2", LayerKind::MaxPool { size: 2, stride: 2 }),
        conv(&mut r, "conv3", 16, 16),
        LayerSpec::new("relu3", LayerKind::Relu),
    ]
}

/// Small four-site CNN: three conv/ReLU(/max-pool) blocks and a classifier
/// feeding softmax. Convolutions are random; the classifier is a
/// nearest-class-mean readout of the class templates' features, so the float
/// network spreads its decisions over all classes.
pub fn reference_network(seed: u64) -> NetworkModel {
    let features = feature_stack(seed);
    let stack = NetworkModel::new(INPUT_SHAPE.to_vec(), features.clone()).expect("fixture shapes are valid");
    let protos = prototypes(seed);
    let mut data = Vec::new();
    for p in &protos {
        data.extend_from_slice(p);
    }
    let mut shape = vec![NUM_CLASSES];
    shape.extend_from_slice(&INPUT_SHAPE);
    let batch = Tensor::from_parts(shape, data);
    let out = forward_float(&stack, &batch).expect("fixture forward");
    let feats = out.last().expect("non-empty stack");
    let dim = feats.len() / NUM_CLASSES;
    let mean: Vec<f64> = (0..dim)
        .map(|j| (0..NUM_CLASSES).map(|c| feats.item(c)[j]).sum::<f64>() / NUM_CLASSES as f64)
        .collect();
    let mut weight = Vec::with_capacity(NUM_CLASSES * dim);
    let mut bias = Vec::with_capacity(NUM_CLASSES);
    for c in 0..NUM_CLASSES {
        let centered: Vec<f64> = feats.item(c).iter().zip(&mean).map(|(f, m)| f - m).collect();
        let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        // Unit-norm rows scaled so template logits differ by a few units.
        let row: Vec<f64> = centered.iter().map(|v| 4.0 * v / norm / norm.sqrt()).collect();
        bias.push(f32_exact(-row.iter().zip(&mean).map(|(w, m)| w * m).sum::<f64>()));
        weight.extend(row.into_iter().map(f32_exact));
    }
    let mut layers = features;
    layers.push(LayerSpec::new(
        "fc",
        LayerKind::Fc {
            weight: Tensor::from_parts(vec![NUM_CLASSES, dim], weight),
            bias: Tensor::from_parts(vec![NUM_CLASSES], bias),
        },
    ));
    layers.push(LayerSpec::new("softmax", LayerKind::Softmax));
    NetworkModel::new(INPUT_SHAPE.to_vec(), layers).expect("fixture shapes are valid")
}

/// `count` non-negative inputs `[count, 3, 16, 16]`: a random class template
/// at a random amplitude plus gamma noise. `stream` separates independent
/// sets (calibration, tuning, evaluation) drawn for the same `seed`.
pub fn synthetic_inputs(seed: u64, stream: u64, count: usize) -> Tensor {
    let protos = prototypes(seed);
    let mut r = rng(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15), SAMPLE_STREAM);
    let noise = Gamma::new(1.0, 0.35).expect("valid gamma");
    let per: usize = INPUT_SHAPE.iter().product();
    let mut data = Vec::with_capacity(count * per);
    for _ in 0..count {
        let class = r.random_range(0..NUM_CLASSES);
        let amp: f64 = r.random_range(0.7..1.3);
        data.extend(protos[class].iter().map(|&p| f32_exact(amp * p + noise.sample(&mut r))));
    }
    let mut shape = vec![count];
    shape.extend_from_slice(&INPUT_SHAPE);
    Tensor::from_parts(shape, data)
}
