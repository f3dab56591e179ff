//! Counter-based streams: values depend only on (seed, level, index).

use ofmlmc::rng::SampleStream;
use rand_distr::{Distribution, StandardNormal};

fn main() {
    let seed = 42;
    for (level, index) in [(0, 0), (0, 1), (2, 7)] {
        let mut s = SampleStream::for_sample(seed, level, index);
        let z: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut s)).collect();
        println!("seed {seed} level {level} index {index}: {z:.4?}");
    }
    let a: f64 = StandardNormal.sample(&mut SampleStream::for_sample(seed, 2, 7));
    let b: f64 = StandardNormal.sample(&mut SampleStream::for_sample(seed, 2, 7));
    println!("regenerated draw matches: {}", a == b);

    let parent = SampleStream::for_sample(seed, 1, 3);
    let mut cloud = parent.derive_named("cloud");
    println!("derived stream first uniform {:.6}", cloud.next_f64());
}
