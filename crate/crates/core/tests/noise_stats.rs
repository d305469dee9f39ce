use jumpflux::noisegen::{
    compensated_integral, sample_brownian_steps, sample_prm, Atom, JumpEvent, JumpTrain,
    LevyMeasureSpec, NoiseRecord, PathSeed, StreamPurpose, TimeGrid,
};
use proptest::prelude::*;

fn two_atoms() -> LevyMeasureSpec {
    LevyMeasureSpec::atomic(
        2,
        vec![
            Atom {
                location: vec![0.5, 0.0],
                mass: 1.0,
            },
            Atom {
                location: vec![0.0, -0.3],
                mass: 2.0,
            },
        ],
    )
    .unwrap()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

#[test]
fn poisson_count_mean_and_variance() {
    let levy = two_atoms();
    let horizon = 1.5;
    let lambda = levy.total_mass() * horizon;
    let seeds = 10_000u64;
    let counts: Vec<f64> = (0..seeds)
        .map(|i| {
            sample_prm(&levy, horizon, PathSeed::new(7, i))
                .unwrap()
                .len() as f64
        })
        .collect();
    let (m, v) = mean_var(&counts);
    let n = seeds as f64;
    let mean_band = 4.0 * (lambda / n).sqrt();
    // Var(s²) ≈ (μ₄ − σ⁴)/N with μ₄ = λ + 3λ² for a Poisson count.
    let var_band = 4.0 * ((lambda + 2.0 * lambda * lambda) / n).sqrt();
    assert!((m - lambda).abs() <= mean_band, "mean {m} vs {lambda}");
    assert!((v - lambda).abs() <= var_band, "variance {v} vs {lambda}");
}

#[test]
fn marks_follow_atom_weights() {
    let levy = two_atoms();
    let mut first = 0usize;
    let mut total = 0usize;
    for i in 0..5_000 {
        for e in sample_prm(&levy, 1.0, PathSeed::new(11, i))
            .unwrap()
            .events()
        {
            total += 1;
            if e.mark == [0.5, 0.0] {
                first += 1;
            } else {
                assert_eq!(e.mark, vec![0.0, -0.3]);
            }
        }
    }
    let p = first as f64 / total as f64;
    let band = 4.0 * (1.0 / 3.0 * 2.0 / 3.0 / total as f64).sqrt();
    assert!((p - 1.0 / 3.0).abs() <= band, "{p}");
}

#[test]
fn jump_times_are_uniform_on_horizon() {
    let levy = two_atoms();
    let mut times = Vec::new();
    for i in 0..4_000 {
        let train = sample_prm(&levy, 2.0, PathSeed::new(3, i)).unwrap();
        let ts: Vec<f64> = train.events().iter().map(|e| e.time).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert!(ts.iter().all(|&t| t > 0.0 && t <= 2.0));
        times.extend(ts);
    }
    let (m, v) = mean_var(&times);
    let band = 4.0 * (v / times.len() as f64).sqrt();
    assert!((m - 1.0).abs() <= band, "{m}");
    assert!((v - 4.0 / 12.0).abs() <= 0.02, "{v}");
}

#[test]
fn compensated_integral_has_zero_mean() {
    let levy = two_atoms();
    let g = |x: &[f64]| 3.0 * x[0] - x[1] + x[1] * x[1];
    let g_mean = levy.integrate_atomic(g).unwrap();
    let values: Vec<f64> = (0..20_000)
        .map(|i| {
            compensated_integral(
                &sample_prm(&levy, 1.0, PathSeed::new(5, i)).unwrap(),
                g,
                g_mean,
            )
        })
        .collect();
    let (m, v) = mean_var(&values);
    assert!(m.abs() <= 4.0 * (v / values.len() as f64).sqrt(), "{m}");
}

#[test]
fn ito_isometry_for_jumps() {
    let levy = two_atoms();
    let horizon = 1.0;
    let g = |x: &[f64]| 2.0 * x[0] + x[1];
    let g_mean = levy.integrate_atomic(g).unwrap();
    let target = horizon * levy.integrate_atomic(|x| g(x) * g(x)).unwrap();
    let values: Vec<f64> = (0..100_000)
        .map(|i| {
            compensated_integral(
                &sample_prm(&levy, horizon, PathSeed::new(13, i)).unwrap(),
                g,
                g_mean,
            )
        })
        .collect();
    let (_, v) = mean_var(&values);
    assert!((v / target - 1.0).abs() <= 0.05, "{v} vs {target}");
}

#[test]
fn brownian_increments_have_step_variance() {
    let steps = [0.1, 0.25, 0.05, 0.6];
    let mut totals = Vec::new();
    let mut weighted = Vec::new();
    for i in 0..20_000u64 {
        let mut rng = PathSeed::new(17, i).stream(StreamPurpose::Brownian);
        let inc = sample_brownian_steps(&steps, 1, &mut rng);
        totals.push(inc.iter().sum::<f64>());
        weighted.push(
            inc.iter()
                .enumerate()
                .map(|(j, w)| (j as f64 + 1.0) * w)
                .sum::<f64>(),
        );
    }
    let (m, v) = mean_var(&totals);
    assert!(
        m.abs() <= 4.0 * (1.0f64 / totals.len() as f64).sqrt(),
        "{m}"
    );
    assert!((v - 1.0).abs() <= 0.05, "{v}");
    // ∫ f dW with f = j+1 on step j.
    let want: f64 = steps
        .iter()
        .enumerate()
        .map(|(j, h)| (j as f64 + 1.0).powi(2) * h)
        .sum();
    let (_, vw) = mean_var(&weighted);
    assert!((vw / want - 1.0).abs() <= 0.05, "{vw} vs {want}");
}

#[test]
fn annulus_marks_are_centred() {
    let levy = LevyMeasureSpec::annulus_uniform(2, 4.0, 0.2, 0.8).unwrap();
    assert!(levy.m1().iter().all(|&m| m == 0.0));
    let mut sum = [0.0; 2];
    let mut count = 0usize;
    for i in 0..3_000 {
        for e in sample_prm(&levy, 1.0, PathSeed::new(19, i))
            .unwrap()
            .events()
        {
            let r: f64 = e.mark.iter().map(|v| v.abs()).sum();
            assert!((0.2..=0.8).contains(&r), "{r}");
            sum[0] += e.mark[0];
            sum[1] += e.mark[1];
            count += 1;
        }
    }
    for s in sum {
        assert!((s / count as f64).abs() <= 4.0 * (0.64 / count as f64).sqrt());
    }
}

#[test]
fn streams_are_distinct_per_path_and_purpose() {
    use rand::Rng;
    let a: u64 = PathSeed::new(1, 0).stream(StreamPurpose::Brownian).random();
    let b: u64 = PathSeed::new(1, 1).stream(StreamPurpose::Brownian).random();
    let c: u64 = PathSeed::new(1, 0)
        .stream(StreamPurpose::JumpCount)
        .random();
    let d: u64 = PathSeed::new(2, 0).stream(StreamPurpose::Brownian).random();
    assert!(a != b && a != c && a != d);
}

#[test]
fn noise_record_replays_bitwise() {
    let levy = two_atoms();
    let a = NoiseRecord::generate(&levy, 1.0, 0.1, 0.002, PathSeed::new(23, 4)).unwrap();
    let b = NoiseRecord::generate(&levy, 1.0, 0.1, 0.002, PathSeed::new(23, 4)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.fingerprint(), b.fingerprint());
    assert_eq!(a.increments().len(), a.grid().step_count() * 2);
    let c = NoiseRecord::generate(&levy, 1.0, 0.1, 0.002, PathSeed::new(23, 5)).unwrap();
    assert_ne!(a.fingerprint(), c.fingerprint());
}

#[test]
fn empty_measure_gives_no_jumps() {
    let levy = LevyMeasureSpec::none(2);
    assert!(sample_prm(&levy, 5.0, PathSeed::new(0, 0))
        .unwrap()
        .is_empty());
}

fn jump_train(horizon: f64) -> impl Strategy<Value = JumpTrain> {
    prop::collection::vec(1e-6..1.0f64, 0..12).prop_map(move |mut fr| {
        fr.sort_by(f64::total_cmp);
        fr.dedup();
        let events = fr
            .into_iter()
            .map(|f| JumpEvent {
                time: f * horizon,
                mark: vec![0.1],
            })
            .collect();
        JumpTrain::new(horizon, events).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn grid_contains_samples_and_jumps(
        horizon in 0.3..3.0f64,
        delta in 0.01..0.5f64,
        frac in 0.01..0.5f64,
        jumps in jump_train(1.0),
    ) {
        let events: Vec<JumpEvent> = jumps
            .events()
            .iter()
            .map(|e| JumpEvent { time: e.time * horizon, mark: e.mark.clone() })
            .filter(|e| e.time <= horizon)
            .collect();
        let mut events = events;
        events.dedup_by(|a, b| a.time == b.time);
        let train = JumpTrain::new(horizon, events).unwrap();
        let h = delta * frac;
        let grid = TimeGrid::build(horizon, delta, h, &train).unwrap();
        let times: Vec<f64> = grid.times().collect();
        prop_assert_eq!(times[0], 0.0);
        prop_assert_eq!(*times.last().unwrap(), horizon);
        prop_assert!(times.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(grid.steps().iter().all(|&s| s > 0.0 && s <= h * (1.0 + 1e-12)));
        for e in train.events() {
            prop_assert!(grid.contains_time(e.time));
        }
        let samples: Vec<usize> = grid.sample_node_indices().collect();
        for (k, &j) in samples.iter().enumerate() {
            prop_assert_eq!(grid.node(j).sample_index, k as u64);
            prop_assert!((grid.node(j).time - k as f64 * delta).abs() <= 1e-12 * horizon.max(1.0));
        }
        for (j, node) in grid.nodes().iter().enumerate() {
            let (t_k, _) = grid.pi_delta(j);
            prop_assert!(t_k <= node.time + 1e-12 && node.time < t_k + delta + 1e-12);
        }
    }
}
