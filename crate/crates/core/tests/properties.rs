//! Property tests over the time-series core and metrics.

use nilmcomp::metrics::{evr, nar, rmse, tsr};
use nilmcomp::timeseries::{
    detect_gaps, effective_duration, resample, sum_channels, FillPolicy, PowerSeries, PowerType,
};
use proptest::prelude::*;

fn series_strategy(max_len: usize) -> impl Strategy<Value = PowerSeries> {
    (
        proptest::collection::vec(1i64..300, 2..max_len),
        1i64..600,
    )
        .prop_flat_map(|(deltas, interval)| {
            let mut ts = Vec::with_capacity(deltas.len());
            let mut t = 0i64;
            for d in &deltas {
                ts.push(t);
                t += d;
            }
            let n = ts.len();
            proptest::collection::vec(0.0f64..5000.0, n)
                .prop_map(move |vs| PowerSeries::new(ts.clone(), vs, PowerType::P, interval).unwrap())
        })
}

proptest! {
    #[test]
    fn resampling_constant_series_stays_constant(
        n in 2usize..200,
        interval in 1i64..120,
        out_interval in 1i64..600,
        value in 0.0f64..4000.0,
    ) {
        let ts: Vec<i64> = (0..n as i64).map(|i| i * interval).collect();
        let s = PowerSeries::new(ts, vec![value; n], PowerType::P, interval).unwrap();
        for policy in [FillPolicy::MeanDownsample, FillPolicy::ForwardFillBounded(3)] {
            let r = resample(&s, out_interval, policy).unwrap();
            for &v in r.values() {
                prop_assert_eq!(v, value);
            }
        }
    }

    #[test]
    fn mean_downsample_preserves_time_weighted_mean(
        n in 4usize..400,
        value_seed in proptest::collection::vec(0.0f64..2000.0, 400),
        factor in 2i64..10,
    ) {
        // gap-free regular window: the grid mean must match the input mean
        // over any whole number of bins
        let interval = 10i64;
        let out = interval * factor;
        let whole = (n as i64 / factor * factor) as usize;
        prop_assume!(whole >= factor as usize);
        let ts: Vec<i64> = (0..whole as i64).map(|i| i * interval).collect();
        let vs: Vec<f64> = value_seed[..whole].to_vec();
        let s = PowerSeries::new(ts, vs.clone(), PowerType::P, interval).unwrap();
        let r = resample(&s, out, FillPolicy::MeanDownsample).unwrap();
        let input_mean: f64 = vs.iter().sum::<f64>() / whole as f64;
        let output_mean: f64 = r.values().iter().sum::<f64>() / r.len() as f64;
        prop_assert!((input_mean - output_mean).abs() <= 1e-9 * input_mean.abs().max(1.0));
    }

    #[test]
    fn gaps_are_disjoint_and_ordered(s in series_strategy(300), gap_factor in 1.0f64..5.0) {
        let gaps = detect_gaps(&s, gap_factor);
        for g in &gaps {
            prop_assert!(g.end > g.start);
        }
        for w in gaps.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }
    }

    #[test]
    fn effective_duration_bounded_by_wall_clock(s in series_strategy(300), gap_factor in 1.0f64..5.0) {
        let eff = effective_duration(&s, gap_factor);
        let wall = s.wall_clock_duration();
        prop_assert!(eff >= 0);
        prop_assert!(eff <= wall);
        if detect_gaps(&s, gap_factor).is_empty() {
            prop_assert_eq!(eff, wall);
        }
    }

    #[test]
    fn sum_channels_matches_pointwise_oracle(
        n in 2usize..100,
        a_vals in proptest::collection::vec(0.0f64..1000.0, 100),
        b_vals in proptest::collection::vec(0.0f64..1000.0, 100),
    ) {
        let interval = 60i64;
        let ts: Vec<i64> = (0..n as i64).map(|i| i * interval).collect();
        let a = PowerSeries::new(ts.clone(), a_vals[..n].to_vec(), PowerType::P, interval).unwrap();
        let b = PowerSeries::new(ts, b_vals[..n].to_vec(), PowerType::P, interval).unwrap();
        let r = sum_channels(&[&a, &b], interval).unwrap();
        prop_assert_eq!(r.len(), n);
        for i in 0..n {
            prop_assert!((r.values()[i] - (a_vals[i] + b_vals[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn nar_invariant_under_uniform_scaling(
        n in 2usize..100,
        y_vals in proptest::collection::vec(1.0f64..1000.0, 100),
        x_vals in proptest::collection::vec(0.0f64..1000.0, 100),
        scale in 0.01f64..100.0,
    ) {
        let interval = 60i64;
        let ts: Vec<i64> = (0..n as i64).map(|i| i * interval).collect();
        let y = PowerSeries::new(ts.clone(), y_vals[..n].to_vec(), PowerType::P, interval).unwrap();
        let x = PowerSeries::new(ts.clone(), x_vals[..n].to_vec(), PowerType::P, interval).unwrap();
        let base = nar(&y, &[&x], interval).unwrap().ratio;
        let ys: Vec<f64> = y_vals[..n].iter().map(|v| v * scale).collect();
        let xs: Vec<f64> = x_vals[..n].iter().map(|v| v * scale).collect();
        let y2 = PowerSeries::new(ts.clone(), ys, PowerType::P, interval).unwrap();
        let x2 = PowerSeries::new(ts, xs, PowerType::P, interval).unwrap();
        let scaled = nar(&y2, &[&x2], interval).unwrap().ratio;
        prop_assert!((base - scaled).abs() < 1e-9);
    }

    #[test]
    fn tsr_evr_stay_in_unit_interval(test in 0i64..1000, extra in 0i64..1000, te in 0usize..500, extra_e in 0usize..500) {
        let total = test + extra + 1;
        let r = tsr(test, total).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        let total_e = te + extra_e + 1;
        let e = evr(te, total_e).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn rmse_symmetric_property(
        n in 1usize..100,
        a_vals in proptest::collection::vec(0.0f64..1000.0, 100),
        b_vals in proptest::collection::vec(0.0f64..1000.0, 100),
    ) {
        let interval = 60i64;
        let ts: Vec<i64> = (0..n as i64).map(|i| i * interval).collect();
        let a = PowerSeries::new(ts.clone(), a_vals[..n].to_vec(), PowerType::P, interval).unwrap();
        let b = PowerSeries::new(ts, b_vals[..n].to_vec(), PowerType::P, interval).unwrap();
        prop_assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
    }
}

#[test]
fn rmse_triangle_inequality_on_random_triples() {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let n = rng.gen_range(2..200);
        let ts: Vec<i64> = (0..n as i64).map(|i| i * 60).collect();
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            let vs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2000.0)).collect();
            PowerSeries::new(ts.clone(), vs, PowerType::P, 60).unwrap()
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        let c = mk(&mut rng);
        let ab = rmse(&a, &b).unwrap();
        let bc = rmse(&b, &c).unwrap();
        let ac = rmse(&a, &c).unwrap();
        assert!(ac <= ab + bc + 1e-9);
    }
}
