use degkdv_core::grid::{Field, Grid};
use degkdv_core::profiles::{compacton_halfwidth, conserved_quantities, EndpointDecay, Mu, ProfileSpec};
use proptest::prelude::*;

fn mu_strategy() -> impl Strategy<Value = Mu> {
    prop::sample::select(Mu::ALL.to_vec())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Smooth periodic field on `[0, 2π)`.
fn smooth_field(coeffs: &[(f64, f64)]) -> Field {
    let grid = Grid::new(256, 2.0 * std::f64::consts::PI, 0.0).unwrap();
    Field::from_fn(grid, |x| {
        coeffs.iter().enumerate().map(|(k, (a, b))| a * (k as f64 * x).cos() + b * (k as f64 * x).sin()).sum()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compacton_is_even_peaked_and_decreasing(b in 0.0..3.0f64, c in 0.2..3.0f64, mu in mu_strategy()) {
        let spec = ProfileSpec::compacton(b, c, mu).unwrap();
        let half = compacton_halfwidth(b, c).unwrap();
        let peak = (c + (4.0 * b + c * c).sqrt()).sqrt();
        prop_assert!(rel(spec.profile_eval(0.0), peak) < 1e-14);
        let xs: Vec<f64> = (1..200).map(|i| half * i as f64 / 200.0).collect();
        for &x in &xs {
            prop_assert!((spec.profile_eval(x) - spec.profile_eval(-x)).abs() <= 1e-14 * peak);
        }
        let values: Vec<f64> = xs.iter().map(|&x| spec.profile_eval(x)).collect();
        prop_assert!(spec.profile_eval(0.0) > values[0]);
        prop_assert!(values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn conserved_quantities_survive_node_shifts(
        coeffs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..12),
        shift in 1..256usize,
        mu in mu_strategy(),
    ) {
        let u = smooth_field(&coeffs);
        let mut shifted = u.values().to_vec();
        shifted.rotate_left(shift);
        let v = Field::new(*u.grid(), shifted).unwrap();
        let (a, b) = (conserved_quantities(&u, mu).unwrap(), conserved_quantities(&v, mu).unwrap());
        let scale = 1.0 + a.mass + a.hamiltonian.abs();
        for (x, y) in [(a.mass, b.mass), (a.momentum, b.momentum),
                       (a.positive_momentum, b.positive_momentum), (a.hamiltonian, b.hamiltonian)] {
            prop_assert!((x - y).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn mass_and_energy_scale(
        coeffs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..12),
        lambda in 0.1..10.0f64,
        mu in mu_strategy(),
    ) {
        let u = smooth_field(&coeffs);
        let scaled = u.scale(lambda.sqrt()).unwrap();
        let (a, b) = (conserved_quantities(&u, mu).unwrap(), conserved_quantities(&scaled, mu).unwrap());
        prop_assert!(rel(b.mass, lambda * a.mass) < 1e-12);
        let h_scale = a.hamiltonian.abs().max(1e-12 * (1.0 + a.mass * a.mass));
        prop_assert!((b.hamiltonian - lambda * lambda * a.hamiltonian).abs() <= 1e-11 * lambda * lambda * h_scale.max(1.0));
    }

    #[test]
    fn power_endpoints_are_classified_by_exponent(left in 0.5..10.0f64, right in 0.5..10.0f64) {
        let class = ProfileSpec::power(left, right, 1.0, 1.0, Mu::Focusing).unwrap().classify_endpoints().unwrap();
        let expect = |alpha: f64| if alpha > 3.0 { EndpointDecay::Subcritical } else { EndpointDecay::Supercritical };
        prop_assert_eq!(class.left, expect(left));
        prop_assert_eq!(class.right, expect(right));
    }
}

#[test]
fn cubic_endpoint_is_critical() {
    let class = ProfileSpec::power(3.0, 5.0, 1.0, 1.0, Mu::Neutral).unwrap().classify_endpoints().unwrap();
    assert_eq!(class.left, EndpointDecay::Critical);
    assert_eq!(class.right, EndpointDecay::Subcritical);
    assert_eq!(class.first_failure(), Some(("left", EndpointDecay::Critical)));
}
