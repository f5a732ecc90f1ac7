//! Observable formulas fed with exact correlators, compared with direct ED.

use cohpath_core::contour::build_grid;
use cohpath_core::linalg::CMat;
use cohpath_core::observables::{coupling_energy, currents_fermion, dressed_environment_green, heat_current_boson};
use cohpath_core::oracle::{thermal_expectation, EdSystem, FockTruncation, InitialState, RealTimeEd};
use cohpath_core::{Bath, FermionCurrent, GridKind, Mode, SpectralFunction, Statistics, SystemModel, TableProvider, C64, I};

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn spin(delta: f64, rho: CMat) -> SystemModel {
    let h = CMat::from_row_slice(2, 2, &[c(0.3), c(delta), c(delta), c(-0.3)]);
    let s = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
    SystemModel::new(h, s, Some(rho)).unwrap()
}

fn up() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)])
}

fn rel(series: &[f64], want: &[f64]) -> f64 {
    let peak = want.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    series.iter().zip(want).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / peak
}

#[test]
fn boson_keldysh_energy_and_current() {
    let (w, v, beta) = (1.0, 0.3, 1.0);
    let spec = SpectralFunction::single(Statistics::Boson, w, v).unwrap();
    let model = spin(0.5, up());
    let sys = EdSystem::boson(&model, &spec, FockTruncation::new(30).unwrap()).unwrap();
    let rt = RealTimeEd::new(&sys, &InitialState::Product { rho_system: up(), env_betas: vec![beta] }).unwrap();
    let n = 128;
    let g = build_grid(GridKind::Keldysh, beta, 4.0, 1, n).unwrap();
    let p = TableProvider::ed(&rt, &g, &sys.system_op, &sys.system_op, Statistics::Boson).unwrap();
    let bath = Bath::new(spec, beta).unwrap();
    let times: Vec<f64> = (0..=n).map(|k| g.points[k].real_time()).collect();
    let hse: Vec<f64> = rt.series(&sys.h_se, &times).iter().map(|z| z.re).collect();
    let cur: Vec<f64> = rt.series(&sys.outflow_operator(&[0], true), &times).iter().map(|z| z.re).collect();
    let e: Vec<f64> = (0..=n).map(|k| coupling_energy(&p, &bath, k).unwrap()).collect();
    let j: Vec<f64> = (0..=n).map(|k| heat_current_boson(&p, &bath, k).unwrap()).collect();
    assert!(rel(&e, &hse) < 5e-4, "coupling energy {:.3e}", rel(&e, &hse));
    assert!(rel(&j, &cur) < 5e-4, "heat current {:.3e}", rel(&j, &cur));
    // the backward copy of a time gives the same expectation
    let b = g.backward(32).unwrap();
    assert!((coupling_energy(&p, &bath, b).unwrap() - e[32]).abs() < 1e-12);
}

#[test]
fn fermion_keldysh_currents() {
    let spec = SpectralFunction::single(Statistics::Fermion, 0.4, 0.35).unwrap();
    let sys = EdSystem::fermion(-0.2, &spec).unwrap();
    let beta = 2.0;
    let rho = CMat::from_row_slice(2, 2, &[c(0.2), c(0.0), c(0.0), c(0.8)]);
    let rt = RealTimeEd::new(&sys, &InitialState::Product { rho_system: rho, env_betas: vec![beta] }).unwrap();
    let n = 128;
    let g = build_grid(GridKind::Keldysh, beta, 4.0, 1, n).unwrap();
    let a = sys.system_op.clone();
    let p = TableProvider::ed(&rt, &g, &a, &a.adjoint(), Statistics::Fermion).unwrap();
    let bath = Bath::new(spec, beta).unwrap();
    let times: Vec<f64> = (0..=n).map(|k| g.points[k].real_time()).collect();
    let hse: Vec<f64> = rt.series(&sys.h_se, &times).iter().map(|z| z.re).collect();
    let jp: Vec<f64> = rt.series(&sys.outflow_operator(&[0], false), &times).iter().map(|z| z.re).collect();
    let je: Vec<f64> = rt.series(&sys.outflow_operator(&[0], true), &times).iter().map(|z| z.re).collect();
    let e: Vec<f64> = (0..=n).map(|k| coupling_energy(&p, &bath, k).unwrap()).collect();
    let pp: Vec<f64> = (0..=n).map(|k| currents_fermion(&p, &bath, k, FermionCurrent::Particle).unwrap()).collect();
    let pe: Vec<f64> = (0..=n).map(|k| currents_fermion(&p, &bath, k, FermionCurrent::Energy).unwrap()).collect();
    for (name, got, want) in [("energy", &e, &hse), ("particle", &pp, &jp), ("energy current", &pe, &je)] {
        assert!(rel(got, want) < 5e-4, "{name}: {:.3e}", rel(got, want));
    }
    // one mode: the energy current is the mode energy times the particle current
    for k in 0..=n {
        assert!((pe[k] - 0.4 * pp[k]).abs() < 1e-12);
    }
}

#[test]
fn dressed_greens() {
    let (w, v, beta) = (1.0, 0.4, 1.0);
    let spec = SpectralFunction::single(Statistics::Boson, w, v).unwrap();
    let model = spin(0.5, up());
    let sys = EdSystem::boson(&model, &spec, FockTruncation::new(40).unwrap()).unwrap();
    let rt = RealTimeEd::new(&sys, &InitialState::Thermal { beta }).unwrap();
    let nb = thermal_expectation(&sys, beta, &sys.number_op(0)).re;
    let bath = Bath::new(spec.clone(), beta).unwrap();
    let mut errs = Vec::new();
    for m in [32, 64, 128] {
        let g = build_grid(GridKind::ImaginaryAxis, beta, 0.0, m, 0).unwrap();
        let p = TableProvider::ed(&rt, &g, &sys.system_op, &sys.system_op, Statistics::Boson).unwrap();
        // D_C(tau, tau') with tau' later: -i <b^dagger b>
        let d = dressed_environment_green(&p, &bath, 0, 3, 4).unwrap();
        let (e_tab, _) = rt.contour_table(&g, &sys.env_ops[0], &sys.env_ops[0].adjoint(), false).unwrap();
        let exact = e_tab[(3, 4)] * -I;
        errs.push((d - exact).norm());
        // i D at coincident points is <b^dagger b>, with the thermal value as the M -> infinity limit
        assert!(((d * I).re - nb).abs() < 0.05);
    }
    assert!(errs[2] < 5e-6 && errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0, "{errs:?}");
    // boson Keldysh
    let rtk = RealTimeEd::new(&sys, &InitialState::Product { rho_system: up(), env_betas: vec![beta] }).unwrap();
    let g = build_grid(GridKind::Keldysh, beta, 3.0, 1, 128).unwrap();
    let p = TableProvider::ed(&rtk, &g, &sys.system_op, &sys.system_op, Statistics::Boson).unwrap();
    let (e_tab, _) = rtk.contour_table(&g, &sys.env_ops[0], &sys.env_ops[0].adjoint(), false).unwrap();
    for (x, y) in [(100, 40), (40, 200), (200, 60)] {
        let d = dressed_environment_green(&p, &bath, 0, x, y).unwrap();
        let want = e_tab[(x, y)] * -I;
        assert!((d - want).norm() < 1e-4 * want.norm(), "boson keldysh ({x},{y}): {d} vs {want}");
    }
    // fermion Kadanoff and Keldysh
    let fs = SpectralFunction::new(Statistics::Fermion, vec![Mode { freq: 0.4, coupling: 0.35 }]).unwrap();
    let fsys = EdSystem::fermion(-0.2, &fs).unwrap();
    let a = fsys.system_op.clone();
    let cc = fsys.env_ops[0].clone();
    let fbath = Bath::new(fs.clone(), beta).unwrap();
    let rt = RealTimeEd::new(&fsys, &InitialState::Thermal { beta }).unwrap();
    let g = build_grid(GridKind::Kadanoff, beta, 2.0, 64, 64).unwrap();
    let p = TableProvider::ed(&rt, &g, &a, &a.adjoint(), Statistics::Fermion).unwrap();
    let (e_tab, _) = rt.contour_table(&g, &cc, &cc.adjoint(), true).unwrap();
    for (x, y) in [(40, 150), (150, 40), (70, 20)] {
        let d = dressed_environment_green(&p, &fbath, 0, x, y).unwrap();
        let want = e_tab[(x, y)] * -I;
        assert!((d - want).norm() < 1e-4 * want.norm(), "fermion kadanoff ({x},{y}): {d} vs {want}");
    }
    let rho = CMat::from_row_slice(2, 2, &[c(0.2), c(0.0), c(0.0), c(0.8)]);
    let rt = RealTimeEd::new(&fsys, &InitialState::Product { rho_system: rho, env_betas: vec![beta] }).unwrap();
    let g = build_grid(GridKind::Keldysh, beta, 3.0, 1, 128).unwrap();
    let p = TableProvider::ed(&rt, &g, &a, &a.adjoint(), Statistics::Fermion).unwrap();
    let (e_tab, _) = rt.contour_table(&g, &cc, &cc.adjoint(), true).unwrap();
    for (x, y) in [(100, 40), (40, 200), (200, 60)] {
        let d = dressed_environment_green(&p, &fbath, 0, x, y).unwrap();
        let want = e_tab[(x, y)] * -I;
        assert!((d - want).norm() < 1e-4 * want.norm(), "fermion keldysh ({x},{y}): {d} vs {want}");
    }
}

#[test]
fn imaginary_coupling_energy_is_tau_independent() {
    let spec = SpectralFunction::single(Statistics::Boson, 1.0, 0.5).unwrap();
    let bath = Bath::new(spec.clone(), 1.0).unwrap();
    let model = SystemModel::new(
        CMat::from_row_slice(2, 2, &[c(0.0), c(0.5), c(0.5), c(0.0)]),
        CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]),
        None,
    )
    .unwrap();
    let m = 12;
    let g = build_grid(GridKind::ImaginaryAxis, 1.0, 0.0, m, 0).unwrap();
    let k = cohpath_core::influence::build_boson_kernel_for_bath(&g, &bath, cohpath_core::Convention::Exponential).unwrap();
    let p = TableProvider::boson_pathsum(&model, &g, &k).unwrap();
    let e: Vec<f64> = [0, 5, 11].iter().map(|&t| coupling_energy(&p, &bath, t).unwrap()).collect();
    assert!(e[0] < 0.0);
    for x in &e[1..] {
        assert!((x - e[0]).abs() < 1e-6, "{e:?}");
    }
    // fermion determinant route
    let fspec = SpectralFunction::single(Statistics::Fermion, -0.4, 0.5).unwrap();
    let fbath = Bath::new(fspec, 2.0).unwrap();
    let g = build_grid(GridKind::ImaginaryAxis, 2.0, 0.0, 32, 0).unwrap();
    let dot = cohpath_core::FermionDot::new(0.3, 0.0, cohpath_core::Convention::Exponential).unwrap();
    let k = cohpath_core::influence::build_fermion_kernel_for_bath(&g, &fbath, cohpath_core::FermionPairing::Unshifted, cohpath_core::Convention::Exponential).unwrap();
    let p = TableProvider::fermion_pathsum(&g, &dot, &k).unwrap();
    let e: Vec<f64> = [1, 14, 30].iter().map(|&t| coupling_energy(&p, &fbath, t).unwrap()).collect();
    for x in &e[1..] {
        assert!((x - e[0]).abs() < 1e-6, "{e:?}");
    }
}
