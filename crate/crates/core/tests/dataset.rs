use delimiter_core::dataset::{
    build_dataset, build_segment, load_dataset, random_mix, rebuild_segment, sample_limiter_params, segment_rng,
    synth_pool, write_pool, DatasetManifest, MixOptions, OnTheFlySampler, StemPool, SynthOptions, Track, MANIFEST_FILE,
};
use delimiter_core::metrics::si_sdr;
use delimiter_core::{AudioBuffer, Error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_pool() -> StemPool {
    synth_pool(&SynthOptions {
        tracks: 3,
        seconds: 6.0,
        sample_rate: 8000,
        channels: 2,
        seed: 1,
    })
    .unwrap()
}

#[test]
fn forced_zero_gains_sum_the_stems() {
    let full = small_pool();
    let seg = 8000;
    let track = Track {
        mixture: None,
        ..full.tracks()[0].clone()
    };
    let stems: Vec<AudioBuffer> = track.stems.iter().map(|s| s.slice(0, seg).unwrap().scaled(0.1)).collect();
    let pool = StemPool::new(vec![Track {
        name: "one".into(),
        stems: stems.clone(),
        mixture: None,
    }])
    .unwrap();
    let options = MixOptions {
        max_gain_db: 0.0,
        swap_probability: 0.0,
        ..Default::default()
    };
    let (mix, prov) = random_mix(&pool, &mut ChaCha8Rng::seed_from_u64(0), seg, &options).unwrap();
    assert_eq!(prov.peak_scale, 1.0);
    for c in 0..2 {
        for n in 0..seg {
            let sum: f64 = stems.iter().map(|s| s.channel(c)[n]).sum();
            assert!((mix.channel(c)[n] - sum).abs() < 1e-15);
        }
    }
}

#[test]
fn same_rng_state_same_mix() {
    let pool = small_pool();
    let a = random_mix(&pool, &mut segment_rng(5, 2), 16000, &MixOptions::default()).unwrap();
    let b = random_mix(&pool, &mut segment_rng(5, 2), 16000, &MixOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gain_draws_are_centered_and_bounded() {
    let pool = small_pool();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut gains = Vec::new();
    for _ in 0..1000 {
        let (mix, prov) = random_mix(&pool, &mut rng, 4000, &MixOptions::default()).unwrap();
        assert!(mix.peak() <= 0.99 + 1e-12);
        gains.extend(prov.stems.iter().map(|s| s.gain_db));
    }
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    assert!(mean.abs() < 0.5, "{mean}");
    assert!(gains.iter().all(|g| (-6.0..=6.0).contains(g)));
}

#[test]
fn short_tracks_are_skipped_and_empty_pool_fails() {
    let pool = small_pool();
    assert!(matches!(
        random_mix(&pool, &mut ChaCha8Rng::seed_from_u64(0), 8000 * 7, &MixOptions::default()),
        Err(Error::Build(_))
    ));
    assert!(matches!(StemPool::new(Vec::new()), Err(Error::Build(_))));
}

#[test]
fn limiter_params_stay_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let p = sample_limiter_params(&mut rng);
        p.validate().unwrap();
        assert!((2.0..=12.0).contains(&p.input_gain_db));
        assert_eq!(p.ceiling, 0.98);
        assert!((1.0..=5.0).contains(&p.attack_ms));
        assert!((30.0..=300.0 + 1e-9).contains(&p.release_ms));
        assert_eq!(p.lookahead_ms, p.attack_ms + 1.0);
    }
    let a = sample_limiter_params(&mut ChaCha8Rng::seed_from_u64(4));
    let b = sample_limiter_params(&mut ChaCha8Rng::seed_from_u64(4));
    assert_eq!(a, b);
}

#[test]
fn limiting_engages_on_guarded_mixtures() {
    let pool = small_pool();
    let mut engaged = 0;
    let draws = 200;
    for id in 0..draws {
        let seg = build_segment(&pool, 9, id, 4000, &MixOptions::default()).unwrap();
        let normalized = seg.target.scaled(0.99 / seg.target.peak());
        let (_, env) = delimiter_core::apply_limiter(&normalized, &seg.record.limiter).unwrap();
        if env.min() < 1.0 {
            engaged += 1;
        }
    }
    assert!(engaged as f64 > 0.99 * draws as f64, "{engaged}/{draws}");
}

#[test]
fn segments_satisfy_the_limiter_relation_and_rebuild_exactly() {
    let pool = small_pool();
    for id in 0..10 {
        let seg = build_segment(&pool, 2, id, 8000, &MixOptions::default()).unwrap();
        let drive = seg.record.limiter.input_gain();
        for c in 0..2 {
            for ((l, t), g) in seg.limited.channel(c).iter().zip(seg.target.channel(c)).zip(seg.envelope.gains()) {
                assert!((l - t * g * drive).abs() < 1e-9);
            }
        }
        assert!(seg.limited.peak() <= 0.98);
        assert!(seg.target.peak() <= 1.0);
        assert!(si_sdr(&seg.limited, &seg.target).unwrap().is_finite());
        assert_eq!(rebuild_segment(&pool, &seg.record).unwrap(), seg);
    }
}

fn files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["input", "target"] {
        let mut names: Vec<_> = std::fs::read_dir(dir.join(sub)).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        for p in names {
            out.push((format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap()));
        }
    }
    out.push((MANIFEST_FILE.into(), std::fs::read(dir.join(MANIFEST_FILE)).unwrap()));
    out
}

#[test]
fn build_is_byte_identical_and_manifest_complete() {
    let pool = small_pool();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let m = build_dataset(&pool, a.path(), 10, 1.0, 7, &MixOptions::default()).unwrap();
    build_dataset(&pool, b.path(), 10, 1.0, 7, &MixOptions::default()).unwrap();
    let fa = files(a.path());
    assert_eq!(fa, files(b.path()));
    assert_eq!(fa.len(), 21);
    assert_eq!(DatasetManifest::read(a.path().join(MANIFEST_FILE)).unwrap(), m);
    let (_, pairs) = load_dataset(a.path()).unwrap();
    assert_eq!(pairs.len(), 10);
    for r in &m.records {
        assert!(a.path().join(&r.input).exists() && a.path().join(&r.target).exists());
    }
}

#[test]
fn zero_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(build_dataset(&small_pool(), dir.path(), 0, 1.0, 1, &MixOptions::default()).is_err());
}

#[test]
fn failed_build_cleans_up() {
    let pool = small_pool();
    let dir = tempfile::tempdir().unwrap();
    // Segments longer than every track fail on the first draw.
    let err = build_dataset(&pool, dir.path(), 3, 10.0, 1, &MixOptions::default());
    assert!(err.is_err());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn pool_round_trips_through_disk() {
    let pool = small_pool();
    let dir = tempfile::tempdir().unwrap();
    write_pool(&pool, dir.path()).unwrap();
    assert_eq!(StemPool::load(dir.path()).unwrap(), pool);
    assert!(StemPool::load(dir.path().join("missing")).is_err());
}

#[test]
fn on_the_fly_batches_are_pure_functions_of_the_index() {
    let pool = small_pool();
    let sampler = OnTheFlySampler::new(&pool, 3, 4, 4000, MixOptions::default()).unwrap();
    assert_eq!(sampler.batch(7).unwrap(), sampler.batch(7).unwrap());
    assert_ne!(sampler.batch(7).unwrap(), sampler.batch(8).unwrap());
    let items: Vec<_> = sampler.iter().take(25).flat_map(|b| b.unwrap()).collect();
    assert_eq!(items.len(), 100);
    for seg in &items {
        let drive = seg.record.limiter.input_gain();
        let n = 1234;
        assert!((seg.limited.channel(0)[n] - seg.target.channel(0)[n] * seg.envelope.gains()[n] * drive).abs() < 1e-9);
    }
    assert!(items.iter().any(|s| s.envelope.min() < 0.9));
}
