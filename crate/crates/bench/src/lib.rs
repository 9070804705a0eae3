//! Deterministic inputs shared by the benchmarks.

use delimiter_core::dataset::{synth_track, SynthOptions};
use delimiter_core::AudioBuffer;

/// Stereo mixture of one procedural track.
pub fn mixture(seconds: f64, sample_rate: u32) -> AudioBuffer {
    let opts = SynthOptions {
        tracks: 1,
        seconds,
        sample_rate,
        channels: 2,
        seed: 42,
    };
    let stems = synth_track(&opts, 0).expect("synthetic track").stems;
    let mut data = stems[0].data().to_vec();
    for s in &stems[1..] {
        for (acc, ch) in data.iter_mut().zip(s.data()) {
            acc.iter_mut().zip(ch).for_each(|(a, b)| *a += b);
        }
    }
    AudioBuffer::new(sample_rate, data).expect("mixture")
}
