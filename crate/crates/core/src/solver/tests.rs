use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::cit::{assemble_matrix, CitContext, InteractionMatrix};
use crate::clustering::ClusterMap;
use crate::materials::{ClusterState, PhaseMaterial};
use crate::spectral::{ReferenceMaterial, VoxelGrid};
use crate::tensor::{component, components, in_plane, sym2, sym4_component, Sym2, Sym4};
use crate::{ClusterId, PhaseId};

struct Fixture {
    grid: VoxelGrid,
    map: ClusterMap,
    cit: InteractionMatrix,
    materials: BTreeMap<PhaseId, PhaseMaterial>,
}

/// Two-phase 6×6 grid: particle voxels in the left columns, `k` clusters.
fn fixture(k: usize) -> Fixture {
    let (n1, n2) = (6, 6);
    let labels: Vec<PhaseId> = (0..n1 * n2).map(|v| PhaseId(u32::from(v % n2 < 2))).collect();
    let grid = VoxelGrid::new(vec![n1, n2], vec![1.0, 1.0], labels).unwrap();
    let cl: Vec<ClusterId> = (0..n1 * n2)
        .map(|v| {
            if grid.phase(v) == PhaseId(1) {
                ClusterId(0)
            } else {
                ClusterId(1 + ((v / n2) * (k - 1) / n1) as u32)
            }
        })
        .collect();
    let map = ClusterMap::from_labels(&grid, cl).unwrap();
    let cit = assemble_matrix(&CitContext::new(&grid).unwrap(), &map).unwrap();
    let materials = BTreeMap::from([
        (PhaseId(0), PhaseMaterial::benchmark_matrix()),
        (PhaseId(1), PhaseMaterial::benchmark_particles()),
    ]);
    Fixture { grid, map, cit, materials }
}

fn voigt(f: &Fixture) -> ReferenceMaterial {
    let fr = f.grid.phase_fractions();
    crate::materials::voigt_reference(f.materials.iter().map(|(p, m)| (m, fr[p]))).unwrap()
}

#[test]
fn zero_loading_zero_residual() {
    let f = fixture(3);
    let model = ReducedModel::new(&f.map, &f.cit, &f.materials).unwrap();
    let r = voigt(&f);
    let t = f.cit.combined(&r);
    let z = vec![Sym2::zeros(); 3];
    let res = assemble_residual(&model.fractions, &t, &r.elasticity(), &z, &Sym2::zeros(), &z, &MacroConstraint::strain(Sym2::zeros())).unwrap();
    assert_eq!(res.norm(), 0.0);
}

#[test]
fn single_cluster_without_interaction() {
    let t = vec![Sym4::zeros()];
    let d0 = Sym4::identity();
    let e = sym2(0.1, 0.2, 0.3);
    let e0 = sym2(0.05, 0.0, -0.1);
    let macro_e = sym2(0.01, 0.02, 0.0);
    let res = assemble_residual(&[1.0], &t, &d0, &[e], &e0, &[sym2(1.0, 2.0, 3.0)], &MacroConstraint::strain(macro_e)).unwrap();
    let expect: Vec<f64> = (e - e0).iter().chain((e - macro_e).iter()).copied().collect();
    assert!(res.iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-15));
    let jac = assemble_jacobian(&[1.0], &t, &d0, &[d0], &MacroConstraint::strain(macro_e)).unwrap();
    for r in 0..6 {
        for c in 0..6 {
            let expect = match (r < 3, c < 3) {
                (true, true) => f64::from(r == c),
                (true, false) => -f64::from(r == c - 3),
                (false, true) => f64::from(r - 3 == c),
                (false, false) => 0.0,
            };
            assert_eq!(jac[(r, c)], expect);
        }
    }
}

#[test]
fn residual_matches_component_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 2;
    let fractions = [0.3, 0.7];
    let mut rand4 = || Sym4::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let tensors: Vec<Sym4> = (0..4).map(|_| rand4()).collect();
    let d0 = crate::tensor::isotropic_elasticity(1.3, 0.8);
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut rand2 = || sym2(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let de: Vec<Sym2> = (0..n).map(|_| rand2()).collect();
    let ds: Vec<Sym2> = (0..n).map(|_| rand2()).collect();
    let e0 = rand2();
    let target = rand2();
    let constraint = MacroConstraint { control: [Control::Strain, Control::Stress, Control::Strain], values: target };
    let res = assemble_residual(&fractions, &tensors, &d0, &de, &e0, &ds, &constraint).unwrap();
    for i in 0..n {
        let mut r = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let mut v = component(&de[i], a, b) - component(&e0, a, b);
                for j in 0..n {
                    for k in 0..2 {
                        for l in 0..2 {
                            let mut pol = component(&ds[j], k, l);
                            for m in 0..2 {
                                for q in 0..2 {
                                    pol -= sym4_component(&d0, k, l, m, q) * component(&de[j], m, q);
                                }
                            }
                            v += sym4_component(&tensors[i * n + j], a, b, k, l) * pol;
                        }
                    }
                }
                r[a][b] = v;
            }
        }
        let got = components(&Sym2::new(res[3 * i], res[3 * i + 1], res[3 * i + 2]));
        for (g, e) in got.iter().zip([r[0][0], r[1][1], r[0][1]]) {
            assert!((g - e).abs() < 1e-14, "{g} vs {e}");
        }
    }
    let me: Sym2 = de[0] * 0.3 + de[1] * 0.7;
    let ms: Sym2 = ds[0] * 0.3 + ds[1] * 0.7;
    assert!((res[6] - (me[0] - target[0])).abs() < 1e-14);
    assert!((res[7] - (ms[1] - target[1])).abs() < 1e-14);
    assert!((res[8] - (me[2] - target[2])).abs() < 1e-14);
}

#[test]
fn jacobian_matches_finite_differences() {
    let f = fixture(3);
    let model = ReducedModel::new(&f.map, &f.cit, &f.materials).unwrap();
    let r = voigt(&f);
    let t = f.cit.combined(&r);
    let d0 = r.elasticity();
    // pre-yielded states so the matrix clusters respond plastically
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let states: Vec<ClusterState> = (0..3)
        .map(|i| model.materials[i].state_update(&ClusterState::default(), &sym2(0.01, -0.004, 0.002)).unwrap().0)
        .collect();
    let x: Vec<Sym2> = (0..3)
        .map(|_| sym2(rng.random_range(0.004..0.01), rng.random_range(-0.004..0.0), rng.random_range(-0.002..0.002)))
        .collect();
    let e0 = sym2(0.003, -0.001, 0.0005);
    let constraint = MacroConstraint { control: [Control::Strain, Control::Stress, Control::Strain], values: sym2(0.005, 0.0, 0.0) };
    let eval = |x: &[Sym2], e0: &Sym2| {
        let ds: Vec<Sym2> = (0..3)
            .map(|i| in_plane(&model.materials[i].state_update(&states[i], &x[i]).unwrap().0.delta_stress))
            .collect();
        assemble_residual(&model.fractions, &t, &d0, x, e0, &ds, &constraint).unwrap()
    };
    let tangents: Vec<Sym4> = (0..3).map(|i| model.materials[i].state_update(&states[i], &x[i]).unwrap().1).collect();
    let jac = assemble_jacobian(&model.fractions, &t, &d0, &tangents, &constraint).unwrap();
    let h = 1e-7;
    let mut fd = nalgebra::DMatrix::zeros(12, 12);
    for col in 0..12 {
        let (mut xp, mut xm, mut ep, mut em) = (x.clone(), x.clone(), e0, e0);
        if col < 9 {
            xp[col / 3][col % 3] += h;
            xm[col / 3][col % 3] -= h;
        } else {
            ep[col - 9] += h;
            em[col - 9] -= h;
        }
        fd.set_column(col, &((eval(&xp, &ep) - eval(&xm, &em)) / (2.0 * h)));
    }
    assert!((fd - &jac).norm() <= 1e-5 * jac.norm());
}

#[test]
fn reference_tangents_decouple_clusters() {
    let f = fixture(3);
    let model = ReducedModel::new(&f.map, &f.cit, &f.materials).unwrap();
    let r = voigt(&f);
    let d0 = r.elasticity();
    let jac = assemble_jacobian(&model.fractions, &f.cit.combined(&r), &d0, &[d0; 3], &MacroConstraint::strain(Sym2::zeros())).unwrap();
    for i in 0..3 {
        for k in 0..3 {
            let block = jac.view((3 * i, 3 * k), (3, 3));
            let expect = if i == k { Sym4::identity() } else { Sym4::zeros() };
            assert!((block - expect).norm() < 1e-14);
        }
    }
}

#[test]
fn elastic_and_zero_increments_take_one_iteration() {
    let mut f = fixture(3);
    f.materials.insert(PhaseId(0), PhaseMaterial::elastic(100.0, 0.3).unwrap());
    let model = ReducedModel::new(&f.map, &f.cit, &f.materials).unwrap();
    let r = voigt(&f);
    let cfg = SolverConfig::default();
    let s0 = vec![ClusterState::default(); 3];
    let c = MacroConstraint::strain(sym2(1e-3, 0.0, 0.0));
    let sol = newton_solve_increment(&model, &s0, &[Sym2::zeros(); 3], &c, &r, &cfg).unwrap();
    assert_eq!(sol.iterations, 1);
    let h = homogenize(&sol.states, &model.fractions).unwrap();
    assert!((h.strain - c.values).norm() < 1e-6 * c.values.norm());
    let zero = newton_solve_increment(&model, &s0, &[Sym2::zeros(); 3], &MacroConstraint::strain(Sym2::zeros()), &r, &cfg).unwrap();
    assert_eq!(zero.iterations, 1);
    assert!(zero.states.iter().all(|s| s.strain == Sym2::zeros()));
}

#[test]
fn mixed_control_satisfies_both_constraints() {
    let f = fixture(3);
    let model = ReducedModel::new(&f.map, &f.cit, &f.materials).unwrap();
    let r = voigt(&f);
    let cfg = SolverConfig::default();
    let c = MacroConstraint { control: [Control::Strain, Control::Stress, Control::Stress], values: sym2(2e-3, 0.0, 0.0) };
    let mut states = vec![ClusterState::default(); 3];
    let mut guess = vec![Sym2::zeros(); 3];
    for _ in 0..10 {
        let sol = solve_increment_with_cuts(&model, &states, &guess, &c, &r, &cfg).unwrap();
        let h = homogenize(&sol.states, &model.fractions).unwrap();
        assert!((h.delta_strain[0] - 2e-3).abs() < 1e-6 * 2e-3);
        assert!(h.delta_stress[1].abs() < 1e-6 * h.delta_stress.norm());
        guess = sol.states.iter().map(|s| s.delta_strain).collect();
        states = sol.states;
    }
    assert!(states.iter().any(|s| s.acc_p > 0.0));
}

#[test]
fn fit_recovers_planted_moduli() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let prev = ReferenceMaterial::new(1.0, 1.0).unwrap();
    for _ in 0..200 {
        let (l, m) = (rng.random_range(0.1..50.0), rng.random_range(0.1..50.0));
        let e = sym2(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let s = crate::tensor::isotropic_elasticity(l, m) * e;
        let fit = self_consistent_fit(&e, &s, &prev);
        assert_eq!(fit.status, FitStatus::Fitted);
        assert!((fit.reference.lambda - l).abs() <= 1e-12 * l.max(m));
        assert!((fit.reference.mu - m).abs() <= 1e-12 * l.max(m));
    }
}

#[test]
fn fit_degenerate_cases() {
    let prev = ReferenceMaterial::new(3.0, 2.0).unwrap();
    let e = sym2(0.01, -0.01, 0.004);
    let fit = self_consistent_fit(&e, &(e * (2.0 * 5.0)), &prev);
    assert_eq!(fit.status, FitStatus::ShearOnly);
    assert!((fit.reference.mu - 5.0).abs() < 1e-12);
    assert_eq!(fit.reference.lambda, 3.0);
    let vol = sym2(0.01, 0.01, 0.0);
    assert_eq!(self_consistent_fit(&vol, &(vol * 4.0), &prev).status, FitStatus::Kept);
    assert_eq!(self_consistent_fit(&Sym2::zeros(), &Sym2::zeros(), &prev).reference, prev);
    // negative shear response is rejected
    let bad = self_consistent_fit(&e, &(e * -1.0), &prev);
    assert_eq!(bad.reference, prev);
}

#[test]
fn fit_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let prev = ReferenceMaterial::new(1.0, 1.0).unwrap();
    for _ in 0..5 {
        let e = sym2(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let s = crate::tensor::isotropic_elasticity(4.0, 3.0) * e + sym2(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
        let fit = self_consistent_fit(&e, &s, &prev);
        let objective = |l: f64, m: f64| (s - crate::tensor::isotropic_elasticity(l, m) * e).norm_squared();
        let (mut cl, mut cm, mut width) = (5.0, 5.0, 10.0);
        for _ in 0..40 {
            let mut best = (f64::INFINITY, cl, cm);
            for a in 0..=20 {
                for b in 0..=20 {
                    let l = cl - width / 2.0 + width * a as f64 / 20.0;
                    let m = cm - width / 2.0 + width * b as f64 / 20.0;
                    let o = objective(l, m);
                    if o < best.0 {
                        best = (o, l, m);
                    }
                }
            }
            (cl, cm) = (best.1, best.2);
            width *= 0.5;
        }
        assert!((fit.reference.lambda - cl).abs() <= 1e-4 * cl.abs());
        assert!((fit.reference.mu - cm).abs() <= 1e-4 * cm.abs());
    }
}

#[test]
fn homogeneous_phase_fits_itself_in_one_pass() {
    let grid = VoxelGrid::uniform(vec![4, 4], vec![1.0, 1.0], PhaseId(0)).unwrap();
    let map = ClusterMap::from_labels(&grid, (0..16).map(|v| ClusterId(u32::from(v % 4 < 2))).collect()).unwrap();
    let cit = assemble_matrix(&CitContext::new(&grid).unwrap(), &map).unwrap();
    let mat = PhaseMaterial::elastic(10.0, 0.25).unwrap();
    let materials = BTreeMap::from([(PhaseId(0), mat)]);
    let model = ReducedModel::new(&map, &cit, &materials).unwrap();
    let (l, m) = mat.lame();
    let r = ReferenceMaterial::new(l, m).unwrap();
    let out = run_self_consistent_increment(&model, &[ClusterState::default(); 2], &[Sym2::zeros(); 2], &MacroConstraint::strain(sym2(1e-3, 2e-4, 1e-4)), &r, &SolverConfig::default()).unwrap();
    assert_eq!(out.sc_iterations, 1);
    assert!((out.reference.lambda - l).abs() < 1e-10 && (out.reference.mu - m).abs() < 1e-10);
}

#[test]
fn laminate_fit_lies_between_phases() {
    let labels: Vec<PhaseId> = (0..64).map(|v| PhaseId(u32::from(v / 8 < 4))).collect();
    let grid = VoxelGrid::new(vec![8, 8], vec![1.0, 1.0], labels).unwrap();
    let map = ClusterMap::from_labels(&grid, grid.labels().iter().map(|p| ClusterId(p.0)).collect()).unwrap();
    let cit = assemble_matrix(&CitContext::new(&grid).unwrap(), &map).unwrap();
    let (a, b) = (PhaseMaterial::elastic(10.0, 0.3).unwrap(), PhaseMaterial::elastic(1.0, 0.2).unwrap());
    let materials = BTreeMap::from([(PhaseId(0), a), (PhaseId(1), b)]);
    let model = ReducedModel::new(&map, &cit, &materials).unwrap();
    let r = crate::materials::voigt_reference([(&a, 0.5), (&b, 0.5)]).unwrap();
    let out = run_self_consistent_increment(&model, &[ClusterState::default(); 2], &[Sym2::zeros(); 2], &MacroConstraint::strain(sym2(1e-3, 3e-4, 5e-4)), &r, &SolverConfig::default()).unwrap();
    let (lo, hi) = (b.lame(), a.lame());
    assert!(out.reference.mu > lo.1 && out.reference.mu < hi.1, "{:?}", out.reference);
    assert!(out.sc_converged);
}

#[test]
fn infinite_tolerance_is_a_single_solve() {
    let f = fixture(3);
    let model = ReducedModel::new(&f.map, &f.cit, &f.materials).unwrap();
    let r = voigt(&f);
    let cfg = SolverConfig { sc_tol: f64::INFINITY, ..SolverConfig::default() };
    let s0 = [ClusterState::default(); 3];
    let c = MacroConstraint::strain(sym2(4e-3, 0.0, 0.0));
    let a = run_self_consistent_increment(&model, &s0, &[Sym2::zeros(); 3], &c, &r, &cfg).unwrap();
    let b = solve_increment_with_cuts(&model, &s0, &[Sym2::zeros(); 3], &c, &r, &cfg).unwrap();
    assert_eq!(a.solution, b);
    assert_eq!((a.sc_iterations, a.reference), (1, r));
}

#[test]
fn homogenize_examples() {
    let s = ClusterState { strain: sym2(0.1, 0.2, 0.3), ..Default::default() };
    assert_eq!(homogenize(&[s], &[1.0]).unwrap().strain, s.strain);
    let t = ClusterState { strain: -s.strain, ..Default::default() };
    assert_eq!(homogenize(&[s, t], &[0.5, 0.5]).unwrap().strain, Sym2::zeros());
}

#[test]
fn fracture_examples() {
    // 1000 matrix voxels in a 10×100 grid plus one particle column
    let labels: Vec<PhaseId> = (0..1100).map(|v| PhaseId(u32::from(v >= 1000))).collect();
    let grid = VoxelGrid::new(vec![11, 100], vec![1.0, 1.0], labels).unwrap();
    let crit = FractureCriterion { phase: PhaseId(0), volume_fraction_threshold: 0.005, acc_p_threshold: 0.25 };
    let make = |n_hot: usize| {
        let labels = (0..1100)
            .map(|v| ClusterId(if v >= 1000 { 2 } else if v < n_hot { 0 } else { 1 }))
            .collect();
        ClusterMap::from_labels(&grid, labels).unwrap()
    };
    let hot = ClusterState { acc_p: 0.3, ..Default::default() };
    let cold = ClusterState::default();
    assert!(check_fracture(&[hot, cold, cold], &make(6), &crit).unwrap());
    assert!(!check_fracture(&[hot, cold, cold], &make(4), &crit).unwrap());
    assert!(!check_fracture(&[cold, cold, cold], &make(6), &crit).unwrap());
    assert!(check_fracture(&[hot, hot, cold], &make(6), &crit).unwrap());
    let other = FractureCriterion { phase: PhaseId(9), ..crit };
    assert!(check_fracture(&[hot, cold, cold], &make(6), &other).is_err());
}

#[test]
fn toughness_examples() {
    let elastic: Vec<(f64, f64)> = (1..=10).map(|i| (i as f64 * 0.1, i as f64 * 2.0)).collect();
    assert!((compute_toughness(&elastic, None) - 0.5 * 1.0 * 20.0).abs() < 1e-12);
    assert_eq!(compute_toughness(&[(0.1, 0.0), (0.2, 0.0)], None), 0.0);
    // polygon: (0,0) -> (1,2) -> (2,3) -> (3,1), cut after increment 2
    let pts = [(1.0, 2.0), (2.0, 3.0), (3.0, 1.0)];
    assert!((compute_toughness(&pts, None) - (1.0 + 2.5 + 2.0)).abs() < 1e-12);
    assert!((compute_toughness(&pts, Some(2)) - 3.5).abs() < 1e-12);
}
