//! Behavioral tests for the selection policies on controlled scenes.

use roma::estimator::Estimator;
use roma::geometry::RegionBoundaries;
use roma::policy::{LadPolicy, OverheadModel, Policy, PolicyInput, RomaPolicy, TodPolicy};
use roma::prior::PriorModel;
use roma::simulator::{run_simulation, SimulatorConfig, WorkloadSchedule};
use roma::synthetic::{generate_synthetic_scenario, DetectorSpec, ScenarioSpec, SegmentSpec};
use roma::trace::{BoundingBox, FrameDetections, VideoMeta};

fn two_detector_prior() -> PriorModel {
    // Heavy detector (row 1) finds strictly more objects in every region.
    PriorModel::new(
        vec![vec![200.0, 400.0, 450.0], vec![800.0, 500.0, 480.0]],
        RegionBoundaries::default_three_region(),
        vec![0, 1],
    )
    .unwrap()
}

fn static_frame() -> FrameDetections {
    FrameDetections::new(
        0,
        vec![
            BoundingBox::new(10.0, 10.0, 30.0, 30.0, 1.0).unwrap(),
            BoundingBox::new(200.0, 200.0, 90.0, 90.0, 1.0).unwrap(),
            BoundingBox::new(400.0, 100.0, 110.0, 110.0, 1.0).unwrap(),
        ],
    )
}

#[test]
fn roma_prefers_heavy_on_static_scene_with_budget() {
    let meta = VideoMeta::new(300, 30.0, 640, 480).unwrap();
    let mut est = Estimator::new(two_detector_prior(), vec![0.01, 0.03], 30.0, 0.5).unwrap();
    let frame = static_frame();
    for _ in 0..5 {
        let step = est.step(&frame, &meta, 0.03).unwrap();
        // No motion: gamma is 1 everywhere, so the larger estimated count wins.
        for g in &step.gamma {
            assert!((g - 1.0).abs() < 1e-12);
        }
        assert_eq!(step.chosen, 1);
    }
}

#[test]
fn roma_downgrades_when_latency_explodes_and_objects_move() {
    let meta = VideoMeta::new(300, 30.0, 640, 480).unwrap();
    let mut est = Estimator::new(two_detector_prior(), vec![0.02, 0.2], 30.0, 0.5).unwrap();
    // Consecutive analyzed frames share no overlap at all: every object is
    // lost, and the heavy detector's latency is eight times its nominal.
    let field = |offset: f64| {
        FrameDetections::new(
            0,
            (0..6)
                .map(|i| {
                    BoundingBox::new(
                        (offset + 100.0 * i as f64) % 560.0,
                        (offset * 2.0 + 70.0 * i as f64) % 400.0,
                        170.0,
                        170.0,
                        1.0,
                    )
                    .unwrap()
                })
                .collect(),
        )
    };
    let mut chosen = est.current_detector();
    for t in 0..3 {
        let frame = field(t as f64 * 300.0 + 37.0);
        let step = est.step(&frame, &meta, 0.2 * 8.0).unwrap();
        chosen = step.chosen;
        if chosen == 0 {
            break;
        }
    }
    assert_eq!(chosen, 0, "light detector must win within three steps");
}

#[test]
fn roma_single_detector_pool_is_constant() {
    let prior = PriorModel::new(
        vec![vec![5.0, 5.0, 5.0]],
        RegionBoundaries::default_three_region(),
        vec![0],
    )
    .unwrap();
    let meta = VideoMeta::new(100, 30.0, 640, 480).unwrap();
    let mut est = Estimator::new(prior, vec![0.1], 30.0, 0.5).unwrap();
    for _ in 0..4 {
        assert_eq!(est.step(&static_frame(), &meta, 0.1).unwrap().chosen, 0);
    }
}

#[test]
fn roma_decision_invariant_under_detector_permutation() {
    let meta = VideoMeta::new(400, 30.0, 640, 480).unwrap();
    let scenario = ScenarioSpec {
        version: 1,
        meta,
        thresholds: vec![2500.0, 7500.0],
        reference: (640, 480),
        segments: vec![
            SegmentSpec {
                start_frame: 0,
                object_count: 9,
                region_weights: vec![0.5, 0.3, 0.2],
                speed: 1.5,
            },
            SegmentSpec {
                start_frame: 200,
                object_count: 9,
                region_weights: vec![0.1, 0.3, 0.6],
                speed: 4.0,
            },
        ],
        detectors: vec![
            DetectorSpec {
                name: "light".into(),
                latency: 0.08,
                recall: vec![0.4, 0.8, 0.95],
                jitter: 0.4,
            },
            DetectorSpec {
                name: "mid".into(),
                latency: 0.12,
                recall: vec![0.7, 0.9, 0.97],
                jitter: 0.4,
            },
            DetectorSpec {
                name: "heavy".into(),
                latency: 0.18,
                recall: vec![0.95, 0.97, 0.99],
                jitter: 0.4,
            },
        ],
    };
    let (_, traces, meta) = generate_synthetic_scenario(&scenario, 13).unwrap();
    let prior = roma::prior::build_prior(
        &traces,
        &RegionBoundaries::default_three_region(),
        &meta,
        0.3,
    )
    .unwrap();
    let latencies = vec![0.08, 0.12, 0.18];

    // The permutation sends original detector i to position perm[i].
    let perm = [2usize, 0, 1];
    let mut permuted_matrix = vec![vec![]; 3];
    let mut permuted_latencies = vec![0.0; 3];
    for i in 0..3 {
        permuted_matrix[perm[i]] = prior.matrix[i].clone();
        permuted_latencies[perm[i]] = latencies[i];
    }
    let permuted_order: Vec<usize> = prior.detector_order.iter().map(|&d| perm[d]).collect();
    let permuted_prior = PriorModel::new(
        permuted_matrix,
        RegionBoundaries::default_three_region(),
        permuted_order,
    )
    .unwrap();

    let mut base = Estimator::new(prior, latencies, 30.0, 0.5).unwrap();
    let mut renamed = Estimator::new(permuted_prior, permuted_latencies, 30.0, 0.5).unwrap();
    assert_eq!(perm[base.current_detector()], renamed.current_detector());

    // Feed both the observations of the same underlying run: detections come
    // from the original trace indices, renamed for the permuted estimator.
    let mut detector = base.current_detector();
    let mut frame = 0usize;
    while frame < meta.frame_count {
        let dets = traces[detector].detections_at(frame).unwrap();
        let latency = traces[detector].latency.at(frame).unwrap();
        let step = base.step(dets, &meta, latency).unwrap();
        let renamed_step = renamed.step(dets, &meta, latency).unwrap();
        assert_eq!(
            perm[step.chosen], renamed_step.chosen,
            "diverged at frame {frame}"
        );
        for (rap, &target) in step.rap.iter().zip(&perm) {
            assert!((rap - renamed_step.rap[target]).abs() < 1e-9);
        }
        detector = step.chosen;
        frame += roma::estimator::frame_block_size(30.0, latency);
    }
}

#[test]
fn tod_decision_ignores_latency_in_simulation() {
    let scenario = ScenarioSpec {
        version: 1,
        meta: VideoMeta::new(200, 30.0, 640, 480).unwrap(),
        thresholds: vec![2500.0, 7500.0],
        reference: (640, 480),
        segments: vec![SegmentSpec {
            start_frame: 0,
            object_count: 8,
            region_weights: vec![0.4, 0.4, 0.2],
            speed: 2.0,
        }],
        detectors: vec![
            DetectorSpec {
                name: "light".into(),
                latency: 0.05,
                recall: vec![0.5, 0.8, 0.9],
                jitter: 0.2,
            },
            DetectorSpec {
                name: "heavy".into(),
                latency: 0.15,
                recall: vec![0.9, 0.95, 0.99],
                jitter: 0.2,
            },
        ],
    };
    let (_, traces, meta) = generate_synthetic_scenario(&scenario, 3).unwrap();
    let boundaries = RegionBoundaries::default_three_region();
    let order = vec![0, 1];

    // Same content, very different workload: TOD's choices at each analyzed
    // frame depend only on the boxes it sees there.
    let mut tod = TodPolicy::with_default_mapping(boundaries.clone(), &order).unwrap();
    let run = run_simulation(
        &traces,
        &meta,
        &WorkloadSchedule::constant(1.0).unwrap(),
        &mut tod,
        &SimulatorConfig::default(),
    )
    .unwrap();
    for a in &run.analyzed {
        let dets = traces[a.detector]
            .detections_at(a.frame_index)
            .unwrap()
            .filtered(0.3);
        let mut probe = TodPolicy::with_default_mapping(boundaries.clone(), &order).unwrap();
        for fake_latency in [0.001, 0.05, 2.0] {
            let decision = probe.step(&PolicyInput {
                analyzed_frame_index: a.frame_index,
                current_detector: a.detector,
                detections_now: &dets,
                detections_prev: None,
                measured_latency: fake_latency,
                fps: meta.fps,
                meta: &meta,
            });
            assert_eq!(decision.next_detector, a.next_detector);
        }
    }
}

#[test]
fn lad_moves_at_most_one_rank_per_step() {
    let meta = VideoMeta::new(100, 30.0, 640, 480).unwrap();
    let order = vec![0, 1, 2, 3];
    let mut lad = LadPolicy::new(order.clone()).unwrap();
    let frame = static_frame();
    let mut current = lad.initial_detector();
    let mut state = 11u64;
    for _ in 0..200 {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
        let latency = ((state >> 33) % 100) as f64 / 1000.0 + 0.001;
        let decision = lad.step(&PolicyInput {
            analyzed_frame_index: 0,
            current_detector: current,
            detections_now: &frame,
            detections_prev: None,
            measured_latency: latency,
            fps: meta.fps,
            meta: &meta,
        });
        let rank_before = order.iter().position(|&d| d == current).unwrap();
        let rank_after = order
            .iter()
            .position(|&d| d == decision.next_detector)
            .unwrap();
        assert!(rank_before.abs_diff(rank_after) <= 1);
        current = decision.next_detector;
    }
}

#[test]
fn roma_overhead_extends_the_frame_block() {
    let scenario = ScenarioSpec {
        version: 1,
        meta: VideoMeta::new(120, 30.0, 640, 480).unwrap(),
        thresholds: vec![2500.0, 7500.0],
        reference: (640, 480),
        segments: vec![SegmentSpec {
            start_frame: 0,
            object_count: 10,
            region_weights: vec![0.4, 0.4, 0.2],
            speed: 0.0,
        }],
        detectors: vec![DetectorSpec {
            name: "only".into(),
            latency: 0.1,
            recall: vec![1.0, 1.0, 1.0],
            jitter: 0.0,
        }],
    };
    let (_, traces, meta) = generate_synthetic_scenario(&scenario, 5).unwrap();
    let prior = roma::prior::build_prior(
        &traces,
        &RegionBoundaries::default_three_region(),
        &meta,
        0.3,
    )
    .unwrap();

    let run_with_kappa = |kappa: f64| {
        let mut policy = RomaPolicy::new(
            prior.clone(),
            vec![0.1],
            meta.fps,
            0.5,
            OverheadModel { kappa },
        )
        .unwrap();
        run_simulation(
            &traces,
            &meta,
            &WorkloadSchedule::constant(1.0).unwrap(),
            &mut policy,
            &SimulatorConfig::default(),
        )
        .unwrap()
    };
    let free = run_with_kappa(0.0);
    // 10 detections at 4e-4 s per squared count adds 40 ms per decision,
    // one more dropped frame per block at 30 fps.
    let costed = run_with_kappa(4e-4);
    assert_eq!(free.analyzed[0].block_size, 4);
    assert_eq!(costed.analyzed[0].block_size, 5);
    assert!(costed.analyzed.len() < free.analyzed.len());
    assert!((costed.analyzed[0].overhead - 0.04).abs() < 1e-12);
}
