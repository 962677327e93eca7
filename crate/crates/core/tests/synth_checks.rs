mod support;

use std::collections::BTreeMap;

use snowdwell_core::model::{dwell_cdf_marginal, dwell_time};
use snowdwell_core::synth::{
    generate, BackgroundSpec, EdgeTrack, PolarityPattern, Scene, SynthConfig,
};
use snowdwell_core::{CameraGeometry, DiameterDensity, MotionParams, Polarity};
use support::{ks_statistic, road_scene};

/// Per pixel: (first positive time, first negative time, positives, negatives).
fn per_pixel(scene: &Scene) -> BTreeMap<(u16, u16), (u64, u64, usize, usize)> {
    let mut map: BTreeMap<(u16, u16), (u64, u64, usize, usize)> = BTreeMap::new();
    for e in &scene.stream.events {
        let entry = map.entry((e.x, e.y)).or_insert((u64::MAX, u64::MAX, 0, 0));
        if e.polarity == Polarity::Positive {
            entry.0 = entry.0.min(e.t);
            entry.2 += 1;
        } else {
            entry.1 = entry.1.min(e.t);
            entry.3 += 1;
        }
    }
    map
}

fn single_flake_configs(motion: MotionParams) -> Vec<SynthConfig> {
    (0..400)
        .map(|seed| SynthConfig {
            motion,
            duration_us: 1000,
            flake_rate: 1000.0,
            seed,
            ..SynthConfig::default()
        })
        .filter(|cfg| {
            let s = generate(cfg).unwrap();
            s.flakes.len() == 1 && s.flakes[0].pixels > 0
        })
        .collect()
}

#[test]
fn single_flake_gaps_equal_model_dwell() {
    let motion = MotionParams::from_kmh(20.0);
    let configs = single_flake_configs(motion);
    assert!(configs.len() > 50, "{}", configs.len());
    for cfg in configs {
        let scene = generate(&cfg).unwrap();
        let d = scene.flakes[0].flake.d_mm;
        let pixels = per_pixel(&scene);
        assert_eq!(pixels.len() as u32, scene.flakes[0].pixels);
        for ((x, y), (tp, tn, np, nn)) in pixels {
            let r = cfg.geom.pixel_radius(u32::from(x), u32::from(y)).unwrap();
            let expected = dwell_time(d, &cfg.geom, &motion, r)
                .unwrap()
                .round()
                .max(1.0) as u64;
            assert_eq!(tn - tp, expected, "seed {} pixel ({x},{y})", cfg.seed);
            assert_eq!(
                (np, nn),
                (
                    1 + cfg.trailing_count as usize,
                    1 + cfg.trailing_count as usize
                )
            );
        }
    }
}

#[test]
fn doubling_speed_halves_every_gap() {
    let slow = MotionParams::from_kmh(30.0);
    let fast = MotionParams::new(2.0 * slow.velocity_mm_s);
    for cfg in single_flake_configs(slow) {
        let a = per_pixel(&generate(&cfg).unwrap());
        let b = per_pixel(
            &generate(&SynthConfig {
                motion: fast,
                ..cfg.clone()
            })
            .unwrap(),
        );
        assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
        for (pa, pb) in a.values().zip(b.values()) {
            let (ga, gb) = ((pa.1 - pa.0) as f64, (pb.1 - pb.0) as f64);
            assert!(
                (gb - ga / 2.0).abs() <= 1.0,
                "seed {}: {ga} vs {gb}",
                cfg.seed
            );
        }
    }
}

#[test]
fn generation_is_deterministic_and_seed_dependent() {
    let cfg = road_scene(20.0, 4, 0.3, true, true);
    let a = generate(&cfg).unwrap();
    assert_eq!(a, generate(&cfg).unwrap());
    let b = generate(&SynthConfig { seed: 5, ..cfg }).unwrap();
    assert_ne!(a.stream, b.stream);
}

#[test]
fn truth_flags_cover_every_event() {
    let scene = generate(&road_scene(20.0, 1, 0.5, true, true)).unwrap();
    assert!(scene.stream.sort_check());
    let snow = scene
        .stream
        .events
        .iter()
        .filter(|e| e.truth == Some(true))
        .count();
    let bg = scene
        .stream
        .events
        .iter()
        .filter(|e| e.truth == Some(false))
        .count();
    assert!(snow > 0 && bg > 0);
    assert_eq!(snow + bg, scene.stream.len());
}

#[test]
fn per_flake_dwell_matches_marginal_cdf() {
    let motion = MotionParams::from_kmh(20.0);
    for density in [
        DiameterDensity::Uniform { max_mm: 5.0 },
        DiameterDensity::TruncatedLogNormal {
            mu: 0.2,
            sigma: 0.5,
            max_mm: 5.0,
        },
    ] {
        let cfg = SynthConfig {
            motion,
            duration_us: 1_000_000,
            flake_rate: 100_000.0,
            diameter_density: density,
            streak_px: 0,
            seed: 21,
            ..SynthConfig::default()
        };
        let scene = generate(&cfg).unwrap();
        assert!(scene.flakes.len() > 99_000);
        assert!(scene.stream.is_empty());
        let mut dwells: Vec<f64> = scene.flakes.iter().map(|f| f.dwell_us).collect();
        let ks = ks_statistic(&mut dwells, |t| {
            dwell_cdf_marginal(t, &density, &cfg.geom, &motion)
        });
        assert!(ks < 0.02, "{density:?}: KS {ks}");
    }
}

#[test]
fn fall_speed_changes_the_stream() {
    let base = road_scene(20.0, 8, 0.3, true, false);
    let still = generate(&base).unwrap();
    let falling = generate(&SynthConfig {
        fall_speed_mm_s: 1500.0,
        ..base
    })
    .unwrap();
    assert!(falling.stream.sort_check());
    assert!(!falling.stream.is_empty());
    assert_ne!(still.stream, falling.stream);
    assert_eq!(still.flakes.len(), falling.flakes.len());
}

#[test]
fn track_patterns_set_edge_polarities() {
    let geom = CameraGeometry::default();
    for (pattern, lead, trail) in [
        (
            PolarityPattern::BrightDetail,
            Polarity::Positive,
            Polarity::Negative,
        ),
        (
            PolarityPattern::DarkDetail,
            Polarity::Negative,
            Polarity::Positive,
        ),
        (
            PolarityPattern::RisingStep,
            Polarity::Positive,
            Polarity::Positive,
        ),
        (
            PolarityPattern::FallingStep,
            Polarity::Negative,
            Polarity::Negative,
        ),
    ] {
        let cfg = SynthConfig {
            geom,
            flake_rate: 0.0,
            trailing_count: 0,
            background: BackgroundSpec {
                tracks: vec![EdgeTrack {
                    start_px: (300.0, 100.0),
                    t0_us: 0.0,
                    detail_mm: 80.0,
                    depth_mm: 6000.0,
                    length_px: 1,
                    pattern,
                    trailing_count: 0,
                }],
                field: None,
            },
            ..SynthConfig::default()
        };
        let s = generate(&cfg).unwrap().stream;
        assert_eq!(s.len(), 2);
        assert_eq!((s.events[0].polarity, s.events[1].polarity), (lead, trail));
        assert_eq!(
            (s.events[0].x, s.events[0].y),
            (s.events[1].x, s.events[1].y)
        );
    }
}
