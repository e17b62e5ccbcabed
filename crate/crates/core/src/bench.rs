//! Wall-clock timing of the forward pass.

use std::time::Instant;

use rand::{Rng, SeedableRng};

use crate::inference::model_forward;
use crate::model::ModelSpec;
use crate::plane::ImagePlane;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchStats {
    pub samples_ms: Vec<f64>,
    pub mean_ms: f64,
    pub std_ms: f64,
}

impl BenchStats {
    /// Population mean and standard deviation of the samples.
    pub fn from_samples(samples_ms: Vec<f64>) -> Self {
        let n = samples_ms.len().max(1) as f64;
        let mean_ms = samples_ms.iter().sum::<f64>() / n;
        let var = samples_ms.iter().map(|s| (s - mean_ms).powi(2)).sum::<f64>() / n;
        BenchStats { samples_ms, mean_ms, std_ms: var.sqrt() }
    }
}

/// Times `repeats` forward passes on a seeded random `height × width` input,
/// after one discarded warm-up pass. The caller picks the thread pool.
pub fn bench_runtime(model: &ModelSpec, height: usize, width: usize, repeats: usize, seed: u64) -> BenchStats {
    assert!(repeats >= 1, "repeats must be at least 1");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let img = ImagePlane::from_fn(height, width, |_, _| rng.gen());
    std::hint::black_box(model_forward(&img, model));
    let samples = (0..repeats)
        .map(|_| {
            let start = Instant::now();
            std::hint::black_box(model_forward(std::hint::black_box(&img), model));
            start.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    BenchStats::from_samples(samples)
}
