//! Exact finite-M agreement between the path-integral pipeline and the
//! Trotterized operator reference, on every contour and for both statistics.

use cohpath_core::contour::build_grid;
use cohpath_core::influence::{build_boson_kernel_for_bath, build_fermion_kernel_for_bath};
use cohpath_core::linalg::CMat;
use cohpath_core::oracle::{EdSystem, FockTruncation, TrotterOracle};
use cohpath_core::pathsum::{self, correlator_boson, fermion_green_table, partition_function_boson, partition_function_fermion};
use cohpath_core::{Bath, Convention, FermionDot, FermionPairing, GridKind, PathSumMethod, SpectralFunction, Statistics, SystemModel, C64};

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn spin(delta: f64, rho: Option<CMat>) -> SystemModel {
    let h = CMat::from_row_slice(2, 2, &[c(0.2), c(delta), c(delta), c(-0.2)]);
    let s = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
    SystemModel::new(h, s, rho).unwrap()
}

fn rho0() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0.7), C64::new(0.1, -0.2), C64::new(0.1, 0.2), c(0.3)])
}

fn boson_case(kind: GridKind, m: usize, n: usize, conv: Convention) {
    let beta = 1.3;
    let env_beta = if kind == GridKind::Keldysh { 0.8 } else { beta };
    let spec = SpectralFunction::single(Statistics::Boson, 1.1, 0.6).unwrap();
    let rho = rho0();
    let model = spin(0.5, Some(rho.clone()));
    let g = build_grid(kind, beta, 1.2, m, n).unwrap();
    let bath = Bath::new(spec.clone(), env_beta).unwrap();
    let k = build_boson_kernel_for_bath(&g, &bath, conv).unwrap();
    let z = partition_function_boson(&model, &g, &k, PathSumMethod::Enumerate).unwrap().value;
    let sys = EdSystem::boson(&model, &spec, FockTruncation::new(40).unwrap()).unwrap();
    let t = TrotterOracle::boson(&sys, &g, conv, Some(&rho), Some(&[env_beta])).unwrap();
    let want = t.z_s();
    assert!((z - want).norm() < 1e-9 * want.norm(), "{kind:?} {conv:?}: {z} vs {want}");
    let l = g.len();
    let (p, q) = (l - 2, 1);
    let cs = correlator_boson(&model, &g, &k, &[g.points[p], g.points[q]]).unwrap();
    let ct = t.two_point(&sys.system_op, p, &sys.system_op, q);
    assert!((cs - ct).norm() < 1e-9, "{kind:?}: correlator {cs} vs {ct}");
}

#[test]
fn boson_imaginary_axis() {
    boson_case(GridKind::ImaginaryAxis, 8, 0, Convention::Exponential);
    boson_case(GridKind::ImaginaryAxis, 6, 0, Convention::Linearized);
}

#[test]
fn boson_keldysh() {
    boson_case(GridKind::Keldysh, 1, 4, Convention::Exponential);
    // |1 - i w dt| > 1 amplifies high Fock states, so keep dt small against the cutoff
    boson_case(GridKind::Keldysh, 1, 8, Convention::Linearized);
}

#[test]
fn boson_kadanoff() {
    boson_case(GridKind::Kadanoff, 4, 3, Convention::Exponential);
}

fn fermion_case(kind: GridKind, m: usize, n: usize, conv: Convention, pairing: FermionPairing) -> f64 {
    let beta = 1.4;
    let env_beta = if kind == GridKind::Keldysh { 0.6 } else { beta };
    let spec = SpectralFunction::new(
        Statistics::Fermion,
        vec![cohpath_core::Mode { freq: -0.5, coupling: 0.6 }, cohpath_core::Mode { freq: 0.8, coupling: 0.4 }],
    )
    .unwrap();
    let p1 = if kind == GridKind::Keldysh { 0.3 } else { 0.0 };
    let dot = FermionDot::new(0.25, p1, conv).unwrap();
    let g = build_grid(kind, beta, 1.5, m, n).unwrap();
    let bath = Bath::new(spec.clone(), env_beta).unwrap();
    let k = build_fermion_kernel_for_bath(&g, &bath, pairing, conv).unwrap();
    let z = partition_function_fermion(&g, &dot, &k).unwrap();
    let sys = EdSystem::fermion(0.25, &spec).unwrap();
    let t = TrotterOracle::fermion(&sys, &g, conv, p1, Some(&[env_beta, env_beta])).unwrap();
    let want = t.z_s();
    let (table, early) = fermion_green_table(&g, &dot, &k).unwrap();
    let a = sys.system_op.clone();
    let ad = a.adjoint();
    let mut worst = (z - want).norm() / want.norm();
    for p in 0..g.len() {
        for q in 0..g.len() {
            let want = t.two_point(&a, p, &ad, q);
            worst = worst.max((table[(p, q)] - want).norm());
        }
        let e = t.two_point(&ad, p, &a, p) * -1.0;
        worst = worst.max((early[p] - e).norm());
    }
    worst
}

#[test]
fn fermion_all_contours_unshifted_exact() {
    for conv in [Convention::Exponential, Convention::Linearized] {
        assert!(fermion_case(GridKind::ImaginaryAxis, 6, 0, conv, FermionPairing::Unshifted) < 1e-11);
        assert!(fermion_case(GridKind::Keldysh, 1, 4, conv, FermionPairing::Unshifted) < 1e-11);
        assert!(fermion_case(GridKind::Kadanoff, 4, 3, conv, FermionPairing::Unshifted) < 1e-11);
    }
}

#[test]
fn fermion_shifted_pairing_is_not_exact() {
    let e = fermion_case(GridKind::ImaginaryAxis, 6, 0, Convention::Exponential, FermionPairing::Shifted);
    assert!(e > 1e-6);
}

#[test]
fn four_point_matches_operator_reference() {
    let spec = SpectralFunction::single(Statistics::Fermion, -0.3, 0.5).unwrap();
    let dot = FermionDot::new(0.2, 0.25, Convention::Exponential).unwrap();
    let g = build_grid(GridKind::Keldysh, 1.0, 1.0, 1, 3).unwrap();
    let k = build_fermion_kernel_for_bath(&g, &Bath::new(spec.clone(), 1.0).unwrap(), FermionPairing::Unshifted, Convention::Exponential).unwrap();
    let sys = EdSystem::fermion(0.2, &spec).unwrap();
    let t = TrotterOracle::fermion(&sys, &g, Convention::Exponential, 0.25, None).unwrap();
    let a = sys.system_op.clone();
    let ad = a.adjoint();
    // a(5) a(2) a^dagger(4) a^dagger(1): contour order 1 < 2 < 4 < 5, reached by one
    // transposition from the written order
    let v = pathsum::four_point_fermion(&g, &dot, &k, [&g.points[5], &g.points[2], &g.points[4], &g.points[1]]).unwrap();
    let z = t.partition();
    let op = t.trace(&[(1, &ad), (2, &a), (4, &ad), (5, &a)]) / z * -1.0;
    assert!((v - op).norm() < 1e-11, "{v} vs {op}");
}

/// At V != 0 the split Trotter factors are not unitary, so Z_S = Tr rho holds
/// only as dt -> 0 (at least first order).
#[test]
fn keldysh_norm_converges_at_finite_coupling() {
    let rho = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
    let model = spin(0.5, Some(rho.clone()));
    let spec = SpectralFunction::single(Statistics::Boson, 1.0, 0.4).unwrap();
    let sys = EdSystem::boson(&model, &spec, FockTruncation::new(40).unwrap()).unwrap();
    let dev: Vec<f64> = [8, 16, 32, 64]
        .iter()
        .map(|&n| {
            let g = build_grid(GridKind::Keldysh, 1.0, 2.0, 1, n).unwrap();
            let z = TrotterOracle::boson(&sys, &g, Convention::Exponential, Some(&rho), Some(&[1.0])).unwrap().z_s();
            if n == 8 {
                let k = build_boson_kernel_for_bath(&g, &Bath::new(spec.clone(), 1.0).unwrap(), Convention::Exponential).unwrap();
                let p = partition_function_boson(&model, &g, &k, PathSumMethod::Enumerate).unwrap().value;
                assert!((p - z).norm() < 1e-10);
            }
            (z - c(1.0)).norm()
        })
        .collect();
    assert!(dev[0] > 1e-3 && dev[3] < 1e-3, "{dev:?}");
    for w in dev.windows(2) {
        let r = w[0] / w[1];
        assert!(r > 1.8, "{dev:?}");
    }
}
