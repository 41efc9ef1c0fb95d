use std::sync::Arc;

use proptest::prelude::*;

use phi_heat_core::geometry::{Grid, ManifoldModel};
use phi_heat_core::operators::{
    annulus_leakage, assemble_laplacian, consistency_residual, heat_convolve, heat_propagate, oracle_check, oracle_kernel, BlobSpec, CoefficientField,
    Propagator,
};
use phi_heat_core::principle::steps_are_monotone;
use phi_heat_core::spaces::{uniform_times, SpaceTimeField};

fn model_b(nx: usize, ny: usize, nz: usize) -> Arc<Grid<f64>> {
    Arc::new(Grid::new(ManifoldModel::model_b(), nx, ny, nz).unwrap())
}

fn propagator(g: &Grid<f64>, c: f64, ht: f64) -> Propagator<f64> {
    Propagator::new(Arc::new(assemble_laplacian(g).unwrap()), CoefficientField::constant(c).unwrap(), ht, 0.5).unwrap()
}

#[test]
fn laplacian_examples() {
    let g = model_b(33, 16, 32);
    let op = assemble_laplacian(&g).unwrap();
    let lap = op.apply(&vec![1.0; g.len()]);
    assert!(lap.iter().all(|v| v.abs() <= 1e-12));

    let u = g.sample(|_, _, z| z.sin());
    let lap = op.apply(&u);
    let h = std::f64::consts::TAU / 32.0;
    for n in 0..g.len() {
        assert!((lap[n] - u[n]).abs() <= h * h);
    }
    assert!(assemble_laplacian(&Grid::new(ManifoldModel::<f64>::model_a(), 8, 16, 1).unwrap()).is_err());
}

/// `max |Δ_h u − (−(f'' + f'/r))|` over nodes two cells from either end.
fn radial_error(nx: usize) -> f64 {
    let g = Grid::new(ManifoldModel::<f64>::model_a(), nx, 16, 1).unwrap();
    let op = assemble_laplacian(&g).unwrap();
    let f = |r: f64| (-(r - 3.0).powi(2)).exp();
    let lap_f = |r: f64| {
        let e = f(r);
        let d1 = -2.0 * (r - 3.0) * e;
        let d2 = (4.0 * (r - 3.0).powi(2) - 2.0) * e;
        -(d2 + d1 / r)
    };
    let u = g.sample(|x, _, _| f(1.0 / x));
    let lap = op.apply(&u);
    (0..g.len())
        .filter(|&n| {
            let (i, _, _) = g.ijl(n);
            i >= 2 && i + 2 < nx
        })
        .map(|n| (lap[n] - lap_f(1.0 / g.x_of(n))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn radial_laplacian_is_second_order() {
    let (e1, e2) = (radial_error(513), radial_error(1025));
    let order = (e1 / e2).log2();
    assert!((order - 2.0).abs() < 0.3, "{e1} {e2} {order}");
}

#[test]
fn propagate_examples() {
    let g = model_b(33, 16, 32);
    let p = propagator(&g, 1.0, 1e-3);
    let u0 = g.sample(|_, _, z| z.sin());
    assert_eq!(heat_propagate(&p, &u0, 0.0).unwrap(), u0);
    assert!(heat_propagate(&p, &u0, -0.1).is_err());
    let u = heat_propagate(&p, &u0, 0.05).unwrap();
    let decay = (-0.05f64).exp();
    let h = std::f64::consts::TAU / 32.0;
    for n in 0..g.len() {
        assert!((u[n] - decay * u0[n]).abs() <= 0.05 * h * h);
    }

    let ga = Grid::new(ManifoldModel::<f64>::model_a(), 128, 64, 1).unwrap();
    let pa = propagator(&ga, 1.0, 1e-3);
    let rows = oracle_check(&pa, &ga, BlobSpec::default(), &uniform_times(0.05, 50), 0.05).unwrap();
    assert!(rows[0].sup_err <= 0.02);
}

#[test]
fn convolve_examples() {
    let g = model_b(33, 16, 32);
    let p = propagator(&g, 1.0, 1e-3);
    let times = uniform_times(0.05, 50);
    let zero = SpaceTimeField::zeros(g.clone(), times.clone());
    assert!(heat_convolve(&p, &zero).unwrap().values.iter().all(|&v| v == 0.0));

    let l = SpaceTimeField::from_fn(g.clone(), times.clone(), |_, _, z, _| z.sin());
    let u = heat_convolve(&p, &l).unwrap();
    let exact = SpaceTimeField::from_fn(g.clone(), times.clone(), |_, _, z, t| (1.0 - (-t).exp()) * z.sin());
    assert!(u.max_abs_diff(&exact).unwrap() <= 1e-3);

    let r = consistency_residual(&p, &u, Some(&l)).unwrap();
    let tail = r.values[g.len()..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(tail <= 1e-2, "{tail}");
}

#[test]
fn kernel_examples() {
    let m = ManifoldModel::<f64>::model_b();
    let p = phi_heat_core::geometry::Point::new(0.2, vec![0.3], vec![1.0]);
    let q = phi_heat_core::geometry::Point::new(0.25, vec![0.1], vec![5.0]);
    assert_eq!(oracle_kernel(&m, 0.05, &p, &q).unwrap(), oracle_kernel(&m, 0.05, &q, &p).unwrap());
}

#[test]
fn leakage_grows_toward_the_truncation() {
    // the mass the exact kernel puts outside the chart, for blobs moving toward x_min
    let l: Vec<f64> = [30.0, 45.0, 55.0].iter().map(|&r0| annulus_leakage(20.0, r0, 1.0, 64.0)).collect();
    assert!(l[0] < l[1] && l[1] < l[2], "{l:?}");
}

#[test]
fn rescaling_identity() {
    let g = model_b(33, 16, 16);
    let u0 = g.sample(|x, y, z| (-((x - 0.5) / 0.1).powi(2)).exp() * (1.0 + y.cos() * z.sin()));
    let a = heat_propagate(&propagator(&g, 2.0, 1e-3), &u0, 0.02).unwrap();
    let b = heat_propagate(&propagator(&g, 1.0, 2e-3), &u0, 0.04).unwrap();
    let d = a.iter().zip(&b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    assert!(d <= 1e-10, "{d}");
}

#[test]
fn stability_of_the_step() {
    let g = model_b(33, 16, 16);
    let p = propagator(&g, 1.0, 1e-2);
    let mut u: Vec<f64> = (0..g.len()).map(|n| ((n * 7919) % 101) as f64 / 50.0 - 1.0).collect();
    let op = p.op();
    let mut e = op.inner(&u, &u);
    for k in 0..20 {
        u = p.step(&u, k as f64 * 1e-2, (k + 1) as f64 * 1e-2, None).unwrap();
        let e1 = op.inner(&u, &u);
        assert!(e1 <= e * (1.0 + 1e-12));
        e = e1;
    }
}

fn field_values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0..1.0f64, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn laplacian_is_self_adjoint_and_positive(u in field_values(17 * 16 * 16), v in field_values(17 * 16 * 16)) {
        let g = model_b(17, 16, 16);
        let op = assemble_laplacian(&g).unwrap();
        let (lu, lv) = (op.apply(&u), op.apply(&v));
        let (a, b) = (op.inner(&lu, &v), op.inner(&u, &lv));
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        prop_assert!(op.inner(&lu, &u) >= -1e-10);
    }

    #[test]
    fn monotone_steps_keep_the_envelope(u0 in field_values(17 * 16)) {
        let g = Grid::new(ManifoldModel::<f64>::model_a(), 17, 16, 1).unwrap();
        let p = Propagator::new(Arc::new(assemble_laplacian(&g).unwrap()), CoefficientField::constant(1.0).unwrap(), 1e-3, 1.0).unwrap();
        let times = uniform_times(0.01, 10);
        prop_assert!(steps_are_monotone(&p, &times));
        let mut u = u0.clone();
        for w in times.windows(2) {
            let next = p.step(&u, w[0], w[1], None).unwrap();
            let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(max(&next) <= max(&u) + 1e-14);
            prop_assert!(min(&next) >= min(&u) - 1e-14);
            u = next;
        }
    }
}
