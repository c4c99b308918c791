use crom_core::adaptivity::inherit;
use crom_core::clustering::ClusterMap;
use crom_core::materials::{ClusterState, PhaseMaterial};
use crom_core::solver::{compute_toughness, self_consistent_fit, FitStatus};
use crom_core::spectral::{ReferenceMaterial, VoxelGrid};
use crom_core::tensor::{isotropic_elasticity, sym2, von_mises};
use crom_core::{ClusterId, PhaseId};
use proptest::prelude::*;

fn strain() -> impl Strategy<Value = (f64, f64, f64)> {
    (-0.02..0.02f64, -0.02..0.02f64, -0.02..0.02f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn return_mapping_stays_on_or_inside_yield_surface(steps in prop::collection::vec(strain(), 1..6)) {
        let m = PhaseMaterial::benchmark_matrix();
        let mut state = ClusterState::default();
        for (a, b, c) in steps {
            let (next, _) = m.state_update(&state, &sym2(a, b, c)).unwrap();
            prop_assert!(next.acc_p >= state.acc_p);
            let q = von_mises(&next.stress);
            let sy = m.hardening_stress(next.acc_p).unwrap();
            if next.acc_p > state.acc_p {
                prop_assert!((q - sy).abs() <= 1e-10 * 0.5);
            } else {
                prop_assert!(q <= sy * (1.0 + 1e-12));
            }
            state = next;
        }
    }

    #[test]
    fn fit_recovers_planted_moduli(lambda in 0.1..100.0f64, mu in 0.1..100.0f64, e in strain()) {
        let e = sym2(e.0, e.1, e.2);
        let tr = e[0] + e[1];
        let dev = (e - sym2(tr / 2.0, tr / 2.0, 0.0)).norm();
        prop_assume!(tr.abs() > 0.1 * e.norm() && dev > 0.1 * e.norm());
        let fit = self_consistent_fit(&e, &(isotropic_elasticity(lambda, mu) * e), &ReferenceMaterial::new(1.0, 1.0).unwrap());
        prop_assert_eq!(fit.status, FitStatus::Fitted);
        prop_assert!((fit.reference.lambda - lambda).abs() <= 1e-11 * lambda.max(mu));
        prop_assert!((fit.reference.mu - mu).abs() <= 1e-11 * lambda.max(mu));
    }

    #[test]
    fn splits_partition_voxels_and_inherit_parent_values(k in 1u32..5, cut in 1usize..15, parent in 0u32..5) {
        let grid = VoxelGrid::uniform(vec![4, 4], vec![1.0, 1.0], PhaseId(0)).unwrap();
        let labels: Vec<ClusterId> = (0..16).map(|v| ClusterId(v as u32 % k)).collect();
        let map = ClusterMap::from_labels(&grid, labels).unwrap();
        let parent = ClusterId(parent % k);
        let voxels = map.record(parent).unwrap().voxels.clone();
        prop_assume!(cut < voxels.len());
        let mut refined = map.clone();
        let kids = refined.split(parent, vec![voxels[..cut].to_vec(), voxels[cut..].to_vec()], 1).unwrap();
        refined.validate(&grid).unwrap();
        prop_assert_eq!(refined.n_clusters(), map.n_clusters() + 1);
        prop_assert!((refined.fractions().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let values: Vec<u32> = map.ids().iter().map(|id| id.0 * 10).collect();
        let inherited = inherit(&map.ids(), &values, &refined).unwrap();
        for (id, v) in refined.ids().iter().zip(inherited) {
            let expected = if kids.contains(id) { parent.0 * 10 } else { id.0 * 10 };
            prop_assert_eq!(v, expected);
        }
    }

    #[test]
    fn toughness_of_linear_curve_is_triangle(slope in 0.1..10.0f64, n in 1usize..50) {
        let points: Vec<(f64, f64)> = (1..=n).map(|k| (k as f64 * 1e-3, slope * k as f64 * 1e-3)).collect();
        let end = n as f64 * 1e-3;
        prop_assert!((compute_toughness(&points, None) - 0.5 * slope * end * end).abs() <= 1e-12);
    }
}
