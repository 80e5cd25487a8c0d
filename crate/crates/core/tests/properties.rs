//! Property tests for the state-algebra and metric invariants.

use mpemba_core::dynamics::evolve_spectral;
use mpemba_core::mpemba::{relative_entropy, trace_distance};
use mpemba_core::qstate::{
    bloch_vector, from_bloch, spectral_decompose, thermal_state,
};
use mpemba_core::SystemParams;
use proptest::prelude::*;

fn bloch_strategy() -> impl Strategy<Value = [f64; 3]> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| {
        let n = (x * x + y * y + z * z).sqrt();
        if n > 1.0 {
            [x / n, y / n, z / n]
        } else {
            [x, y, z]
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bloch_roundtrip_identity(v in bloch_strategy()) {
        let rho = from_bloch(v).unwrap();
        let w = bloch_vector(&rho);
        for i in 0..3 {
            prop_assert!((v[i] - w[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn decompose_reconstruct_identity(v in bloch_strategy()) {
        let rho = from_bloch(v).unwrap();
        let back = spectral_decompose(&rho).unwrap().reconstruct().unwrap();
        prop_assert!(rho.max_dev(&back) < 1e-12);
    }

    #[test]
    fn trace_distance_bounds_and_symmetry(a in bloch_strategy(), b in bloch_strategy()) {
        let (ra, rb) = (from_bloch(a).unwrap(), from_bloch(b).unwrap());
        let d = trace_distance(&ra, &rb);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        prop_assert!((d - trace_distance(&rb, &ra)).abs() < 1e-14);
    }

    #[test]
    fn trace_distance_contracts_under_evolution(
        a in bloch_strategy(),
        b in bloch_strategy(),
        t in 1e-3..2.0f64,
    ) {
        let p = SystemParams::symmetric(0.01, 2.0, 5.0).unwrap();
        let (ra, rb) = (from_bloch(a).unwrap(), from_bloch(b).unwrap());
        let ta = evolve_spectral(&ra, &p, &[t / 2.0, t]).unwrap();
        let tb = evolve_spectral(&rb, &p, &[t / 2.0, t]).unwrap();
        let d0 = trace_distance(&ra, &rb);
        let d_mid = trace_distance(&ta.states[0], &tb.states[0]);
        let d1 = trace_distance(&ta.states[1], &tb.states[1]);
        prop_assert!(d_mid <= d0 + 1e-10);
        prop_assert!(d1 <= d_mid + 1e-10);
    }

    #[test]
    fn relative_entropy_nonnegative(a in bloch_strategy(), b in bloch_strategy()) {
        let (ra, rb) = (from_bloch(a).unwrap(), from_bloch(b).unwrap());
        let s = relative_entropy(&ra, &rb);
        prop_assert!(s >= 0.0);
        if ra.max_dev(&rb) < 1e-15 {
            prop_assert!(s < 1e-10);
        }
    }

    #[test]
    fn thermal_purity_monotone_in_temperature(
        wy in 0.0..0.1f64,
        wz in 0.5..4.0f64,
        t1 in 0.1..50.0f64,
        ratio in 1.01..20.0f64,
    ) {
        let p = SystemParams::symmetric(wy, wz, 1.0).unwrap();
        let hot = thermal_state(&p, t1 * ratio).unwrap();
        let cold = thermal_state(&p, t1).unwrap();
        prop_assert!(cold.purity() >= hot.purity() - 1e-15);
    }
}
