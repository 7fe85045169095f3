use proptest::prelude::*;
use speckle_ghost::gi::{bucket_sum, dgi_correlate, gi_correlate, BucketSpec, CorrAccumulator, Selection};
use speckle_ghost::io::{export_image, read_exported, read_stack, write_stack, Scaling, StackReader};
use speckle_ghost::masks::{apply_mask, ObjectMask};
use speckle_ghost::metrology::{resolution_r, visibility, SectionProfile};
use speckle_ghost::speckle::{gen_stack, SimConfig};
use speckle_ghost::{ArmLayout, Error, Frame, FrameSource, FrameStack, LightKind, Parallelism, Roi};

fn stack_strategy() -> impl Strategy<Value = FrameStack> {
    (4usize..12, 4usize..12, 2usize..40).prop_flat_map(|(w, h, n)| {
        prop::collection::vec(prop::collection::vec(1u16..1000, w * h), n).prop_map(move |frames| {
            let frames = frames
                .into_iter()
                .map(|d| Frame::from_vec(w, h, d.into_iter().map(f32::from).collect()).unwrap())
                .collect();
            FrameStack::new(w, h, frames, 0, LightKind::Ingested).unwrap()
        })
    })
}

fn roi_within(w: usize, h: usize) -> impl Strategy<Value = Roi> {
    (0..w, 0..h).prop_flat_map(move |(x, y)| (1..=w - x, 1..=h - y).prop_map(move |(rw, rh)| Roi::new(x, y, rw, rh)))
}

fn stack_and_bucket() -> impl Strategy<Value = (FrameStack, Roi)> {
    stack_strategy().prop_flat_map(|s| {
        let (w, h) = (s.width(), s.height());
        (Just(s), roi_within(w, h))
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn accumulate(
    stack: &FrameStack,
    buckets: Vec<BucketSpec>,
    range: std::ops::Range<usize>,
    par: Parallelism,
) -> CorrAccumulator {
    let mut acc = CorrAccumulator::new(
        stack.width(),
        stack.height(),
        Roi::full(stack.width(), stack.height()),
        buckets,
    )
    .unwrap();
    acc.accumulate_source(stack, range, par).unwrap();
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn streaming_matches_two_pass((stack, roi) in stack_and_bucket()) {
        let bucket = BucketSpec::open(roi).unwrap();
        let full = Roi::full(stack.width(), stack.height());
        let acc = accumulate(&stack, vec![bucket.clone()], 0..stack.len(), Parallelism::serial());
        let streamed = acc.finalize(Selection::Gi { bucket: 0 }).unwrap();
        let batch = gi_correlate(&stack, &bucket, full, Parallelism::serial()).unwrap();
        prop_assert!(max_abs_diff(streamed.values(), batch.values()) < 1e-9);
    }

    #[test]
    fn merging_partial_accumulators_equals_one_pass((stack, roi) in stack_and_bucket(), cut in 0.0f64..1.0) {
        let split = ((stack.len() as f64 * cut) as usize).min(stack.len());
        let buckets = vec![BucketSpec::open(roi).unwrap(), BucketSpec::open(Roi::full(stack.width(), stack.height())).unwrap()];
        let whole = accumulate(&stack, buckets.clone(), 0..stack.len(), Parallelism::serial());
        let mut first = accumulate(&stack, buckets.clone(), 0..split, Parallelism::serial());
        let second = accumulate(&stack, buckets, split..stack.len(), Parallelism::serial());
        first.merge(&second).unwrap();
        prop_assert_eq!(first.n_frames(), whole.n_frames());
        for sel in [Selection::Gi { bucket: 0 }, Selection::Dgi { test: 0, reference: 1 }] {
            let a = first.finalize(sel).unwrap();
            let b = whole.finalize(sel).unwrap();
            prop_assert!(max_abs_diff(a.values(), b.values()) < 1e-9);
        }
    }

    #[test]
    fn correlation_is_independent_of_worker_count((stack, roi) in stack_and_bucket(), workers in 2usize..5) {
        let bucket = BucketSpec::open(roi).unwrap();
        let full = Roi::full(stack.width(), stack.height());
        let one = dgi_correlate(&stack, &bucket, &BucketSpec::open(full).unwrap(), full, Parallelism::serial()).unwrap();
        let many = dgi_correlate(&stack, &bucket, &BucketSpec::open(full).unwrap(), full, Parallelism::workers(workers)).unwrap();
        prop_assert_eq!(one.values(), many.values());
    }

    #[test]
    fn correlation_is_scale_invariant((stack, roi) in stack_and_bucket(), k in 1u32..64) {
        // Factors k/8 keep every product and partial sum exactly representable.
        let lambda = k as f32 / 8.0;
        let bucket = BucketSpec::open(roi).unwrap();
        let scaled = stack.scaled(lambda);
        let full = Roi::full(stack.width(), stack.height());
        let a = gi_correlate(&stack, &bucket, full, Parallelism::serial()).unwrap();
        let b = gi_correlate(&scaled, &bucket, full, Parallelism::serial()).unwrap();
        prop_assert!(max_abs_diff(a.values(), b.values()) < 1e-12);
        let sa = accumulate(&stack, vec![bucket.clone()], 0..stack.len(), Parallelism::serial());
        let sb = accumulate(&scaled, vec![bucket], 0..stack.len(), Parallelism::serial());
        let (a, b) = (sa.finalize(Selection::Gi { bucket: 0 }).unwrap(), sb.finalize(Selection::Gi { bucket: 0 }).unwrap());
        prop_assert!(max_abs_diff(a.values(), b.values()) < 1e-12);
    }

    #[test]
    fn correlation_scale_invariance_for_arbitrary_factors((stack, roi) in stack_and_bucket(), lambda in 1e-3f32..1e3) {
        let bucket = BucketSpec::open(roi).unwrap();
        let full = Roi::full(stack.width(), stack.height());
        let a = gi_correlate(&stack, &bucket, full, Parallelism::serial()).unwrap();
        let b = gi_correlate(&stack.scaled(lambda), &bucket, full, Parallelism::serial()).unwrap();
        // Rescaled frames are rounded to f32.
        prop_assert!(max_abs_diff(a.values(), b.values()) < 1e-5);
    }

    #[test]
    fn visibility_is_antisymmetric(a in 0.01f64..10.0, b in 0.01f64..10.0) {
        let v = visibility(a, b).unwrap();
        prop_assert!((v + visibility(b, a).unwrap()).abs() < 1e-15);
        prop_assert!(v.abs() <= 1.0);
    }

    #[test]
    fn resolution_lies_in_unit_interval_and_is_scale_invariant(
        values in prop::collection::vec(0.0f64..10.0, 5..60),
        lambda in 0.01f64..100.0,
    ) {
        let positions: Vec<usize> = (0..values.len()).collect();
        let section = SectionProfile::new(positions.clone(), values.clone()).unwrap();
        match resolution_r(&section, 3) {
            Ok(res) => {
                prop_assert!((0.0..=1.0).contains(&res.r), "R = {}", res.r);
                let scaled = SectionProfile::new(positions, values.iter().map(|v| v * lambda).collect()).unwrap();
                let again = resolution_r(&scaled, 3).unwrap();
                prop_assert!((again.r - res.r).abs() < 1e-12);
                prop_assert_eq!(again.maxima, res.maxima);
            }
            Err(e) => prop_assert!(matches!(e, Error::Unresolved | Error::Degenerate(_)), "{e}"),
        }
    }

    #[test]
    fn spks_round_trip_is_bitwise(stack in stack_strategy(), seed in any::<u64>(), with_layout in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.spks");
        let mut stack = FrameStack::new(
            stack.width(),
            stack.height(),
            stack.frames().iter().map(|f| f.scaled(0.1)).collect(),
            seed,
            LightKind::Superthermal,
        )
        .unwrap();
        if with_layout {
            stack.arm_layout = Some(ArmLayout {
                bucket: Roi::new(0, 0, 2, stack.height()),
                reference: Roi::new(2, 0, stack.width() - 2, stack.height()),
            });
        }
        write_stack(&stack, &path).unwrap();
        let back = read_stack(&path).unwrap();
        prop_assert_eq!(back.master_seed, seed);
        prop_assert_eq!(back.arm_layout, stack.arm_layout);
        for (a, b) in back.frames().iter().zip(stack.frames()) {
            let bits = |f: &Frame| f.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(a), bits(b));
        }
        prop_assert_eq!(back, stack);
    }

    #[test]
    fn truncated_spks_is_rejected(stack in stack_strategy(), cut in 1u64..64) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.spks");
        write_stack(&stack, &path).unwrap();
        let len = std::fs::metadata(&path).unwrap().len();
        let file = std::fs::OpenOptions::new().write(true).open(&path).unwrap();
        file.set_len(len - cut.min(len)).unwrap();
        prop_assert!(matches!(StackReader::open(&path), Err(Error::Format(_))));
    }

    #[test]
    fn masking_is_idempotent_and_never_adds_signal(
        (stack, roi) in stack_and_bucket(),
        bits in prop::collection::vec(any::<bool>(), 144),
    ) {
        let frame = &stack.frames()[0];
        let values: Vec<u8> = (0..roi.area()).map(|i| bits[i % bits.len()] as u8).collect();
        let Ok(mask) = ObjectMask::from_values(roi.width, roi.height, values) else {
            return Ok(());
        };
        let once = apply_mask(frame, &mask, roi.x, roi.y).unwrap();
        let twice = apply_mask(&once, &mask, roi.x, roi.y).unwrap();
        prop_assert_eq!(&once, &twice);
        let masked = bucket_sum(frame, &BucketSpec::new(roi, Some(mask)).unwrap()).unwrap();
        let open = bucket_sum(frame, &BucketSpec::open(roi).unwrap()).unwrap();
        prop_assert!(masked <= open);
        prop_assert!(masked >= 0.0);
    }

    #[test]
    fn export_round_trip_within_one_level(stack in stack_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let frame = &stack.frames()[0];
        export_image(frame, &path, Scaling::Linear).unwrap();
        let (w, h, back) = read_exported(&path).unwrap();
        prop_assert_eq!((w, h), (frame.width(), frame.height()));
        let (min, max) = frame.data().iter().fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v as f64), hi.max(v as f64)));
        let tol = (max - min) / 65535.0 + 1e-12;
        for (a, &b) in back.iter().zip(frame.data()) {
            prop_assert!((a - b as f64).abs() <= tol);
        }
    }

    #[test]
    fn ingested_graymaps_keep_their_values(stack in stack_strategy(), sixteen in any::<bool>()) {
        use speckle_ghost::io::{ingest_images, write_pgm, Graymap};
        let dir = tempfile::tempdir().unwrap();
        let max_value = if sixteen { 65535 } else { 255 };
        for (i, f) in stack.frames().iter().enumerate() {
            let map = Graymap {
                width: f.width(),
                height: f.height(),
                max_value,
                data: f.data().iter().map(|&v| (v as u16).min(max_value)).collect(),
            };
            write_pgm(dir.path().join(format!("frame_{i:04}.pgm")), &map).unwrap();
        }
        let ingested = ingest_images(dir.path(), None).unwrap();
        prop_assert_eq!(ingested.light_kind, LightKind::Ingested);
        prop_assert_eq!(ingested.frames().len(), stack.len());
        for (a, b) in ingested.frames().iter().zip(stack.frames()) {
            for (&x, &y) in a.data().iter().zip(b.data()) {
                prop_assert_eq!(x, y.min(max_value as f32));
            }
        }
    }
}

#[test]
fn generated_stacks_are_reproducible_across_runs_and_workers() {
    let config = SimConfig {
        grid_width: 32,
        grid_height: 32,
        ..SimConfig::default()
    };
    for kind in [LightKind::Thermal, LightKind::Superthermal] {
        let a = gen_stack(&config, 40, 9, kind, Parallelism::serial()).unwrap();
        let b = gen_stack(&config, 40, 9, kind, Parallelism::workers(3)).unwrap();
        let c = gen_stack(&config, 40, 9, kind, Parallelism::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        let other = gen_stack(&config, 40, 10, kind, Parallelism::serial()).unwrap();
        assert_ne!(a, other);
    }
}

#[test]
fn simulated_source_matches_generated_stack() {
    use speckle_ghost::speckle::SpeckleSimulator;
    let config = SimConfig {
        grid_width: 24,
        grid_height: 24,
        ..SimConfig::default()
    };
    let stack = gen_stack(&config, 12, 3, LightKind::Superthermal, Parallelism::default()).unwrap();
    let sim = SpeckleSimulator::new(&config, LightKind::Superthermal).unwrap();
    let source = sim.source(12, 3);
    let mut buf = Frame::zeros(1, 1);
    for (i, f) in stack.frames().iter().enumerate() {
        source.load(i, &mut buf).unwrap();
        assert_eq!(&buf, f);
    }
}

#[test]
fn multi_chunk_analyses_are_independent_of_worker_count() {
    use speckle_ghost::speckle::SpeckleSimulator;
    use speckle_ghost::stats::spatial_autocorrelation;
    let config = SimConfig {
        grid_width: 24,
        grid_height: 24,
        ..SimConfig::default()
    };
    let sim = SpeckleSimulator::new(&config, LightKind::Superthermal).unwrap();
    let source = sim.source(1100, 21);
    let full = Roi::full(24, 24);
    let test = BucketSpec::open(Roi::new(4, 4, 6, 9)).unwrap();
    let reference = BucketSpec::open(full).unwrap();
    let run = |par: Parallelism| {
        let dgi = dgi_correlate(&source, &test, &reference, full, par).unwrap();
        let mut acc = CorrAccumulator::new(24, 24, full, vec![test.clone(), reference.clone()]).unwrap();
        acc.accumulate_source(&source, 0..1100, par).unwrap();
        let ac = spatial_autocorrelation(&source, full, par).unwrap();
        (dgi, acc, ac)
    };
    let serial = run(Parallelism::serial());
    for workers in [2, 4] {
        let other = run(Parallelism::workers(workers));
        assert_eq!(serial.0, other.0);
        assert_eq!(serial.1, other.1);
        assert_eq!(serial.2, other.2);
    }
}
