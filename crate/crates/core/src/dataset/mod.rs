//! Paired (limited, original) training data from randomly mixed stems.

mod builder;
mod pool;
mod synth;

pub use builder::{
    build_dataset, build_segment, load_dataset, mix_from_provenance, random_mix, rebuild_segment, sample_limiter_params,
    segment_rng, DatasetManifest, MixOptions, MixProvenance, OnTheFlySampler, Segment, SegmentRecord, StemDraw,
    MANIFEST_FILE, MANIFEST_SCHEMA_VERSION,
};
pub use pool::{StemPool, Track, STEM_ROLES};
pub use synth::{synth_pool, synth_track, write_pool, SynthOptions};
