//! Synthetic inputs shared by the benchmarks.

use absakit::{AbsaExample, AspectSpan, Polarity};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 16] = [
    "the", "food", "was", "really", "good", "but", "service", "slow", "screen", "is", "bad", "battery", "great",
    "staff", "price", "ok",
];

/// `n` sentences of 6 to 30 tokens with up to three single-token aspects.
pub fn examples(n: usize, seed: u64) -> Vec<AbsaExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(6..=30);
            let tokens: Vec<String> = (0..len).map(|_| WORDS.choose(&mut rng).unwrap().to_string()).collect();
            let mut starts: Vec<usize> = (0..len).step_by(5).collect();
            starts.shuffle(&mut rng);
            let spans = starts
                .into_iter()
                .take(rng.gen_range(0..=3))
                .map(|s| AspectSpan::new(s, s, Polarity::ALL[rng.gen_range(0..3)]))
                .collect();
            AbsaExample::new(tokens, spans).unwrap()
        })
        .collect()
}

/// Normal-ish samples around `mean` (sum of uniforms).
pub fn sample(n: usize, mean: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| mean + (0..4).map(|_| rng.gen::<f64>() - 0.5).sum::<f64>()).collect()
}
