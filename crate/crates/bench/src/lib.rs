//! Fixtures shared by the benchmarks: the spin-boson and dot-plus-level
//! benchmark models at a given grid size.

use cohpath_core::contour::build_grid;
use cohpath_core::influence::{build_boson_kernel_for_bath, build_fermion_kernel_for_bath};
use cohpath_core::linalg::CMat;
use cohpath_core::{Bath, ContourGrid, Convention, FermionDot, FermionPairing, GridKind, KernelMatrix, SpectralFunction, Statistics, SystemModel, C64};

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn grid(kind: GridKind, size: usize) -> ContourGrid {
    match kind {
        GridKind::ImaginaryAxis => build_grid(kind, 1.0, 0.0, size, 0),
        GridKind::Keldysh => build_grid(kind, 1.0, 2.0, 1, size),
        GridKind::Kadanoff => build_grid(kind, 1.0, 2.0, size, size),
    }
    .expect("benchmark grid")
}

/// H_S = 0.5 sigma_x, s = sigma_z, starting in the up state.
pub fn spin_boson() -> SystemModel {
    let h = CMat::from_row_slice(2, 2, &[c(0.0), c(0.5), c(0.5), c(0.0)]);
    let s = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
    let rho = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
    SystemModel::new(h, s, Some(rho)).expect("benchmark model")
}

pub fn boson_bath() -> Bath {
    Bath::new(SpectralFunction::single(Statistics::Boson, 1.0, 0.5).expect("mode"), 1.0).expect("bath")
}

pub fn fermion_bath() -> Bath {
    Bath::new(SpectralFunction::single(Statistics::Fermion, -0.4, 0.5).expect("level"), 1.0).expect("bath")
}

pub fn dot(kind: GridKind) -> FermionDot {
    let p1 = if kind == GridKind::Keldysh { 0.3 } else { 0.0 };
    FermionDot::new(0.3, p1, Convention::Exponential).expect("dot")
}

pub fn boson_kernel(g: &ContourGrid) -> KernelMatrix {
    build_boson_kernel_for_bath(g, &boson_bath(), Convention::Exponential).expect("kernel")
}

pub fn fermion_kernel(g: &ContourGrid) -> KernelMatrix {
    build_fermion_kernel_for_bath(g, &fermion_bath(), FermionPairing::Unshifted, Convention::Exponential).expect("kernel")
}
