use std::sync::Arc;

use proptest::prelude::*;

use phi_heat_core::geometry::{Grid, ManifoldModel};
use phi_heat_core::partition::{normalize, normalize_fields, phi_total, raw_bumps, raw_pair_at, sigma, Anchor, PartitionConfig};
use phi_heat_core::PhiError;

const EPS: f64 = 0.125;

fn family(model: ManifoldModel<f64>, nx: usize, ny: usize, nz: usize) -> phi_heat_core::partition::BumpFamily<f64> {
    let g = Arc::new(Grid::new(model, nx, ny, nz).unwrap());
    normalize(g.clone(), PartitionConfig::lattice(&g, EPS, EPS / 2.0).unwrap()).unwrap()
}

#[test]
fn profile_examples() {
    assert_eq!(sigma(0.3).unwrap(), 1.0);
    assert_eq!(sigma(2.0).unwrap(), 0.0);
    // quintic smoothstep at the midpoint of [1/2, 1]
    assert_eq!(sigma(0.75).unwrap(), 0.5);
    assert!(matches!(sigma(-0.1), Err(PhiError::Domain(_))));
}

#[test]
fn raw_bump_examples() {
    let a = Anchor { y: Some(1.0), z: Some(2.0) };
    assert_eq!(raw_pair_at(&a, EPS, EPS, 1.0, 2.0).0, 0.0);
    assert_eq!(raw_pair_at(&a, EPS, 0.06, 1.0, 2.0), (1.0, 1.0));
    let g = Grid::new(ManifoldModel::model_b(), 65, 32, 16).unwrap();
    let (phi, psi) = raw_bumps(&a, EPS, &g);
    for n in 0..g.len() {
        if phi[n] > 0.0 {
            assert_eq!(psi[n], 1.0);
        }
    }
}

#[test]
fn normalization_examples() {
    let g = Grid::new(ManifoldModel::model_a(), 65, 16, 1).unwrap();
    let one = vec![1.0; g.len()];
    let (phi, _) = normalize_fields(&g, EPS, &[one.clone()], &[one.clone()]).unwrap();
    let (two, _) = normalize_fields(&g, EPS, &[one.clone(), one.clone()], &[one.clone(), one.clone()]).unwrap();
    for n in 0..g.len() {
        if g.x_of(n) <= EPS / 2.0 {
            assert_eq!(phi[0][n], 1.0);
            assert_eq!(two[0][n], 0.5);
            assert_eq!(two[1][n], 0.5);
        }
    }
    let empty = vec![0.0; g.len()];
    assert!(matches!(normalize_fields(&g, EPS, &[empty.clone()], &[empty]), Err(PhiError::Configuration(_))));
}

#[test]
fn total_examples() {
    for fam in [family(ManifoldModel::model_a(), 129, 64, 1), family(ManifoldModel::model_b(), 65, 32, 16)] {
        let g = fam.grid.clone();
        let total = phi_total(&fam);
        for n in 0..g.len() {
            let x = g.x_of(n);
            assert!((0.0..=1.0).contains(&total[n]));
            if x <= EPS / 2.0 {
                assert!((total[n] - 1.0).abs() <= 1e-12);
            }
            if x >= EPS {
                assert_eq!(total[n], 0.0);
            }
        }
    }
}

#[test]
fn overlap_is_resolution_independent() {
    let coarse = family(ManifoldModel::model_a(), 65, 32, 1).overlap_counts().into_iter().max().unwrap();
    let fine = family(ManifoldModel::model_a(), 257, 128, 1).overlap_counts().into_iter().max().unwrap();
    assert!(fine <= coarse + 1, "{coarse} vs {fine}");
}

proptest! {
    #[test]
    fn profile_is_a_monotone_cutoff(s in 0.0..2.0f64, t in 0.0..2.0f64) {
        let (a, b) = (sigma(s).unwrap(), sigma(t).unwrap());
        prop_assert!((0.0..=1.0).contains(&a));
        if s <= t {
            prop_assert!(a >= b);
        }
    }

    #[test]
    fn psi_is_one_on_phi_support(x in 1.0 / 64.0..0.2f64, y in 0.0..std::f64::consts::TAU, z in 0.0..std::f64::consts::TAU, ay in 0.0..std::f64::consts::TAU, az in 0.0..std::f64::consts::TAU) {
        let a = Anchor { y: Some(ay), z: Some(az) };
        let (phi, psi) = raw_pair_at(&a, EPS, x, y, z);
        prop_assert!((0.0..=1.0).contains(&phi));
        if phi > 0.0 {
            prop_assert_eq!(psi, 1.0);
        }
    }
}

#[test]
fn partition_of_unity_at_random_nodes() {
    let fam = family(ManifoldModel::model_b(), 65, 32, 16);
    let g = fam.grid.clone();
    let phis: Vec<Vec<f64>> = (0..fam.len()).map(|k| fam.phi(k)).collect();
    let mut runner = proptest::test_runner::TestRunner::default();
    runner
        .run(&(0..g.len()), |n| {
            if g.x_of(n) <= EPS / 2.0 {
                let s: f64 = phis.iter().map(|f| f[n]).sum();
                prop_assert!((s - 1.0).abs() <= 1e-12);
            }
            Ok(())
        })
        .unwrap();
}
