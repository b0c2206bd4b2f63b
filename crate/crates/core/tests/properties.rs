use std::f64::consts::PI;

use axmhd::diagnostics::DiagnosticsRecord;
use axmhd::evolve::SimState;
use axmhd::geometry::{build_geometry, FlowMapState};
use axmhd::grid::{hardy_ratio, Grid, Parity, ScalarField};
use axmhd::harness::output::Snapshot;
use axmhd::harness::Preset;
use axmhd::pressure::{pressure_tensor, EllipticSystem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(n: usize) -> Grid {
    Grid::new(n, n, 1.0, 2.0 * PI).unwrap()
}

fn mapped_system(g: Grid, w: f64, k: f64) -> EllipticSystem {
    let m = FlowMapState::from_displacements(
        g,
        move |r, z| w * r * (k * z).cos(),
        move |r, z| w * (k * z).sin() * r.cos(),
    );
    let geo = build_geometry(&m).unwrap();
    EllipticSystem::from_parts(
        m.radius(),
        pressure_tensor(&geo.cofactor, &geo.jacobian),
        ScalarField::zeros(g, Parity::Even),
        vec![0.0; g.nz],
    )
    .unwrap()
}

fn random_field(g: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let values = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ScalarField::from_values(g, Parity::Even, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pressure_operator_is_symmetric(w in 0.0..0.1f64, k in 1u32..3, seed in any::<u64>()) {
        let g = grid(16);
        let sys = mapped_system(g, w, k as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (random_field(g, &mut rng), random_field(g, &mut rng));
        let a = sys.inner(&sys.apply(&x), &y);
        let b = sys.inner(&x, &sys.apply(&y));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
    }

    #[test]
    fn pressure_operator_is_positive(w in 0.0..0.1f64, k in 1u32..3, seed in any::<u64>()) {
        let g = grid(16);
        let sys = mapped_system(g, w, k as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_field(g, &mut rng);
        prop_assert!(sys.inner(&sys.apply(&x), &x) > 0.0);
    }

    #[test]
    fn hardy_ratio_is_stable_under_refinement(
        coeffs in prop::collection::vec(-1.0..1.0f64, 4),
        b in 0u32..4,
    ) {
        prop_assume!(coeffs.iter().any(|c| c.abs() > 0.1));
        let field = |g: Grid| {
            let c = coeffs.clone();
            ScalarField::from_fn(g, Parity::Odd, move |r, z| {
                let poly = c[0] * r + c[1] * r.powi(3) + c[2] * r.powi(5);
                poly * (1.0 + 0.5 * (b as f64 * z).cos()) + c[3] * r.sin()
            })
        };
        let coarse = hardy_ratio(&field(grid(32)), 1).unwrap();
        let fine = hardy_ratio(&field(grid(64)), 1).unwrap();
        prop_assert!(coarse.is_finite() && fine.is_finite());
        prop_assert!(fine <= 1.1 * coarse);
    }

    #[test]
    fn records_round_trip(vals in prop::collection::vec(-1e6..1e6f64, 11), has_psi in any::<bool>()) {
        let r = DiagnosticsRecord {
            t: vals[0].abs(),
            energy: vals[1].abs(),
            c: vals[2],
            a: vals[3],
            div_v: vals[4].abs(),
            piola: vals[5].abs(),
            curl_v: vals[6].abs(),
            frozen_div: vals[7].abs(),
            max_a_dev: vals[8].abs(),
            delta: vals[9].abs(),
            psi: has_psi.then_some(vals[10].abs()),
        };
        let text = serde_json::to_string(&r).unwrap();
        let back: DiagnosticsRecord = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn snapshots_round_trip_bitwise(seed in any::<u64>(), t in 0.0..10.0f64) {
        let g = Grid::new(8, 9, 1.3, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = SimState::rest(g, 1.0, 2.0);
        s.t = t;
        let mut fill = |f: &mut ScalarField| {
            for v in f.values_mut() {
                *v = rng.gen::<f64>() * 10f64.powi(rng.gen_range(-300..300));
            }
        };
        fill(&mut s.q);
        fill(&mut s.kin.vr);
        fill(&mut s.map.theta_hat);
        let snap = Snapshot::from_state(&s, "h");
        let back = Snapshot::parse(&snap.to_text()).unwrap();
        prop_assert_eq!(back.t.to_bits(), snap.t.to_bits());
        for (a, b) in back.columns.iter().zip(&snap.columns) {
            prop_assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn presets_print_and_parse(c0 in -5.0..5.0f64, c1 in -5.0..5.0f64, amp in 0.0..1.0f64, id in 0u32..100) {
        for p in [
            Preset::Rest,
            Preset::ScrewPinch { c0, c1 },
            Preset::RigidRotation { omega: c0 },
            Preset::PerturbedPinch { c0, c1, amp },
            Preset::Mms { case_id: id },
        ] {
            prop_assert_eq!(p.to_string().parse::<Preset>().unwrap(), p);
        }
    }
}
