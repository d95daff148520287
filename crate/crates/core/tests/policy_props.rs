use proptest::prelude::*;
use regbat_core::*;

#[derive(Debug, Clone)]
struct Case {
    params: BatteryParams,
    prices: MarketPrices,
    e0: f64,
    setpoints: Vec<f64>,
}

fn case() -> impl Strategy<Value = Case> {
    (
        0.6..1.0f64,
        prop_oneof![Just(0.1), Just(0.25), Just(1.0 / 1800.0), 0.01..1.0f64],
        0.0..400.0f64,
        0.0..400.0f64,
        0.0..1.0f64,
        prop::collection::vec(-1.5..1.5f64, 1..300),
    )
        .prop_map(|(eta, interval, theta, pi, at, setpoints)| {
            let mut params = BatteryParams::default().with_round_trip(eta);
            params.interval = interval;
            let e0 = params.e_min + at * (params.e_max - params.e_min);
            Case {
                params,
                prices: MarketPrices { theta, pi },
                e0,
                setpoints,
            }
        })
}

fn run(c: &Case) -> (ThresholdPolicy, Dispatch, SocSeries, RegulationTrace) {
    let trace =
        RegulationTrace::new(c.params.interval, c.setpoints.clone(), c.params.power).unwrap();
    let mut p = ThresholdPolicy::new(c.e0, &c.prices, &c.params, &PowerLaw::LITHIUM_ION).unwrap();
    let (d, soc) = rollout(&mut p, &trace, &c.params, c.e0).unwrap();
    (p, d, soc, trace)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn never_exceeds_the_instruction(c in case()) {
        let (_, d, _, trace) = run(&c);
        for (n, &r) in trace.setpoints.iter().enumerate() {
            let (ch, dis) = (d.charge[n], d.discharge[n]);
            prop_assert!(ch >= 0.0 && dis >= 0.0);
            prop_assert!(ch == 0.0 || dis == 0.0, "step {n} both charges and discharges");
            prop_assert!(ch <= r.max(0.0) && dis <= (-r).max(0.0), "step {n}: r {r}, c {ch}, d {dis}");
        }
    }

    #[test]
    fn span_never_exceeds_threshold(c in case()) {
        let (p, _, soc, _) = run(&c);
        let span = p.u_hat() * c.params.capacity;
        let (mut hi, mut lo) = (c.e0, c.e0);
        for &e in soc.as_slice() {
            prop_assert!(c.params.contains(e));
            hi = hi.max(e);
            lo = lo.min(e);
            prop_assert!(hi - lo <= span, "{} > {span}", hi - lo);
        }
    }

    #[test]
    fn full_cycles_stay_within_threshold(c in case()) {
        let (p, _, soc, _) = run(&c);
        let cs = rainflow_count(&extract_extrema(&soc.normalized(c.params.capacity), 1e-12));
        if let Some(m) = cs.max_full_depth() {
            prop_assert!(m <= p.u_hat() + 1e-9, "{m} > {}", p.u_hat());
        }
    }

    #[test]
    fn simple_policy_follows_inside_bounds(c in case()) {
        let trace = RegulationTrace::new(c.params.interval, c.setpoints.clone(), c.params.power).unwrap();
        let mut p = SimplePolicy::new(&c.params);
        let (d, soc) = rollout(&mut p, &trace, &c.params, c.e0).unwrap();
        for (n, &r) in trace.setpoints.iter().enumerate() {
            let target = c.params.next_soc(soc.0[n], r.max(0.0), (-r).max(0.0));
            if c.params.contains(target) {
                prop_assert_eq!(d.charge[n] - d.discharge[n], r);
            }
        }
    }

    #[test]
    fn u_hat_grows_with_prices(c in case(), more in 0.0..200.0f64) {
        let phi = PowerLaw::LITHIUM_ION;
        let base = compute_u_hat(&c.prices, &c.params, &phi);
        let theta_up = MarketPrices { theta: c.prices.theta + more, ..c.prices };
        let pi_up = MarketPrices { pi: c.prices.pi + more, ..c.prices };
        prop_assert!(compute_u_hat(&theta_up, &c.params, &phi) >= base);
        prop_assert!(compute_u_hat(&pi_up, &c.params, &phi) >= base);
    }

    #[test]
    fn price_scaling_law(beta in 1.2..3.5f64, slope in 1e-6..1e-2f64, k in 0.1..10.0f64) {
        let phi = PowerLaw::new(5.24e-4, beta).unwrap();
        let ratio = phi.derivative_inverse_unclamped(k * slope) / phi.derivative_inverse_unclamped(slope);
        let expected = k.powf(1.0 / (beta - 1.0));
        prop_assert!((ratio / expected - 1.0).abs() <= 1e-9, "{ratio} vs {expected}");
    }
}

#[test]
fn u_hat_reference_value() {
    // Phi'(u) = alpha beta u^(beta - 1) = 100 / 3e5, solved by hand.
    let u = (100.0_f64 / 3e5 / (5.24e-4 * 2.03)).powf(1.0 / 1.03);
    let got = compute_u_hat(
        &MarketPrices::balanced(50.0),
        &BatteryParams::default(),
        &PowerLaw::LITHIUM_ION,
    );
    assert!((got - u).abs() < 1e-9, "{got} vs {u}");
    assert!((got - 0.3241).abs() < 1e-4);
}

#[test]
fn free_battery_follows_fully() {
    let params = BatteryParams {
        replacement_price: 0.0,
        ..BatteryParams::default()
    };
    assert_eq!(
        compute_u_hat(
            &MarketPrices::balanced(1.0),
            &params,
            &PowerLaw::LITHIUM_ION
        ),
        1.0
    );
    assert_eq!(
        compute_u_hat(
            &MarketPrices::balanced(0.0),
            &BatteryParams::default(),
            &PowerLaw::LITHIUM_ION
        ),
        0.0
    );
}
