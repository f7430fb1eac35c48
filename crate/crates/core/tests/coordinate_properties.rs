use degkdv_core::coordinates::{
    frame_fields, g_field, reconstruct_eulerian, w_from_z, CoordinateMap, FrameFields, LagrangianSnapshot,
};
use degkdv_core::grid::{integrate, Field, Grid};
use degkdv_core::profiles::{Mu, ProfileSpec};
use proptest::prelude::*;

fn spec() -> ProfileSpec {
    ProfileSpec::power(6.0, 6.0, 1.0, 30.0, Mu::Focusing).unwrap()
}

fn frame(n: usize) -> FrameFields {
    let spec = spec();
    let map = CoordinateMap::for_y_span(&spec, 500.0, 8192).unwrap();
    frame_fields(&spec, &map, Grid::centered(n, 500.0).unwrap(), 6).unwrap()
}

/// Smooth localized perturbation `Z` with `|Z| < 1/2`.
fn bump(grid: Grid, amp: f64, center: f64, width: f64) -> Field {
    Field::from_fn(grid, |y| amp * (-((y - center) / width).powi(2)).exp()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn g_of_w_matches_power_of_one_plus_z(
        amp in -0.45..0.45f64,
        center in -200.0..200.0f64,
        width in 10.0..80.0f64,
    ) {
        let frame = frame(512);
        let z = bump(frame.grid, amp, center, width);
        let g = g_field(&w_from_z(&z, &frame).unwrap(), &frame).unwrap();
        for (gv, zv) in g.values().iter().zip(z.values()) {
            prop_assert!((gv - ((1.0 + zv).powi(5) - 1.0)).abs() <= 1e-12);
        }
    }

    #[test]
    fn map_round_trips(xs in prop::collection::vec(-29.0..29.0f64, 1000)) {
        let spec = spec();
        let map = CoordinateMap::for_y_span(&spec, 500.0, 8192).unwrap();
        for x in xs {
            let back = map.x_of_y(map.y_exact(x).unwrap()).unwrap();
            prop_assert!((back - x).abs() <= 1e-10 * (1.0 + x.abs()), "x = {x}, back = {back}");
            prop_assert!((map.inverse(map.forward(x)) - x).abs() <= 1e-6 * (1.0 + x.abs()));
        }
    }
}

#[test]
fn reconstruction_preserves_mass() {
    let frame = frame(2048);
    let rho43 = frame.rho.zip_with(&frame.rho13, |r, c| r * c).unwrap();
    let x_grid = Grid::new(1 << 14, 80.0, -40.0).unwrap();
    for (amp, center) in [(0.0, 0.0), (0.3, 40.0), (-0.2, -100.0)] {
        let z = bump(frame.grid, amp, center, 30.0);
        let snap = LagrangianSnapshot { t: 0.0, z: z.clone(), xi: Some(0.0) };
        let u = &reconstruct_eulerian(&[snap], &frame, &x_grid).unwrap()[0].u;
        let eulerian = integrate(&u.map(|v| v * v).unwrap());
        let lagrangian = integrate(&z.zip_with(&rho43, |a, r| (1.0 + a) * r).unwrap());
        assert!(
            (eulerian - lagrangian).abs() <= 1e-6 * lagrangian,
            "amp {amp}: {eulerian} vs {lagrangian}"
        );
    }
}
