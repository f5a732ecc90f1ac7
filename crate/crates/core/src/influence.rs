//! Influence kernels obtained by integrating out the environment exactly.
//!
//! Boson: with the system value `s_j` at contour point `j`, the coupling enters a
//! step `j -> j+1` of measure `dt` as `-i dt V (s_{j+1} phi-bar_{j+1} + s_j phi_j)`.
//! The Gaussian integral then gives `I[s] = exp(-sum_jk s_j K_jk s_k)` with
//! `K_jk = a_j b_k V^2 S^{-1}_jk = a_j b_k Lambda(p_j, p_k)`, where `a_j` is the
//! measure of the step leaving `j`, `b_k` that of the step arriving at `k`, and
//! `Lambda = i V^2 D_0`. On the imaginary axis this is `dtau^2 V^2 D_0`.
//!
//! Fermion: the dot action becomes `A_sys + Delta` with
//! `Delta_jk = dt_in(j) dt_out(k) i P_jk V^2 G_0(from(in j), to(out k))`, the
//! unshifted pairing `a-bar_{k+1} c_k`. The shifted variant samples
//! `G_0(p_j, p_k)` instead. `P` is the Keldysh branch parity.

use crate::contour::{ContourGrid, GridKind};
use crate::error::{Error, Result};
use crate::gaussian::{self, boson_gaussian_integral, build_action_with_beta, closed_form_determinant, Convention};
use crate::greens::{bose_occupation, contour_green_ordered, Bath, SpectralFunction, Statistics};
use crate::linalg::{CMat, CVec};
use crate::{C64, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FermionPairing {
    /// `a-bar_{k+1} c_k`: exact at finite M.
    Unshifted,
    /// `a-bar_k c_k`: the simplified pairing, correct to first order.
    Shifted,
}

#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub grid: ContourGrid,
    pub statistics: Statistics,
    /// Measure-weighted entries: the path weight is a plain bilinear form.
    pub entries: CMat,
}

impl KernelMatrix {
    pub fn zeros(grid: &ContourGrid, statistics: Statistics) -> Self {
        let n = grid.len();
        KernelMatrix { grid: grid.clone(), statistics, entries: CMat::zeros(n, n) }
    }

    /// Kernel of two environments coupled to the same system operator.
    pub fn sum(&self, other: &KernelMatrix) -> Result<KernelMatrix> {
        if !self.grid.same_grid(&other.grid) {
            return Err(Error::GridMismatch("kernels live on different grids".into()));
        }
        if self.statistics != other.statistics {
            return Err(Error::StatisticsMismatch("cannot add boson and fermion kernels".into()));
        }
        Ok(KernelMatrix { grid: self.grid.clone(), statistics: self.statistics, entries: &self.entries + &other.entries })
    }

    /// Zeroes entries whose branch-time separation exceeds `k_mem` steps.
    pub fn windowed(&self, k_mem: usize) -> KernelMatrix {
        let mut out = self.clone();
        let n = self.grid.len();
        for j in 0..n {
            for k in 0..n {
                if step_separation(&self.grid, j, k) > k_mem {
                    out.entries[(j, k)] = C64::new(0.0, 0.0);
                }
            }
        }
        out
    }
}

/// Separation of two points in elementary steps of their own time axes: real
/// branches compare `t_k`, the imaginary branch compares `tau_m`, and mixed
/// real/imaginary pairs count the steps through `t_0`.
pub fn step_separation(grid: &ContourGrid, j: usize, k: usize) -> usize {
    use crate::contour::Branch::*;
    let p = &grid.points[j];
    let q = &grid.points[k];
    match (p.branch, q.branch) {
        (Imaginary, Imaginary) => p.k.abs_diff(q.k),
        (Imaginary, _) => p.k + q.k,
        (_, Imaginary) => p.k + q.k,
        _ => p.k.abs_diff(q.k),
    }
}

/// A boson system path: one eigenvalue of the coupling operator per grid point.
/// Closure (`s_M = s_0`, shared turning point) holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PathConfiguration {
    pub grid_id: u64,
    pub values: Vec<f64>,
}

impl PathConfiguration {
    pub fn new(grid: &ContourGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("path has {} values for {} grid points", values.len(), grid.len())));
        }
        Ok(PathConfiguration { grid_id: grid.id(), values })
    }
}

fn out_measure(grid: &ContourGrid, j: usize) -> C64 {
    grid.outgoing(j).map(|s| s.dt).unwrap_or(C64::new(0.0, 0.0))
}

fn in_measure(grid: &ContourGrid, j: usize) -> C64 {
    grid.incoming(j).map(|s| s.dt).unwrap_or(C64::new(0.0, 0.0))
}

fn check_bath(grid: &ContourGrid, bath: &Bath, stat: Statistics) -> Result<()> {
    if bath.spectral.statistics != stat {
        return Err(Error::StatisticsMismatch(format!("expected a {stat:?} environment")));
    }
    if grid.kind != GridKind::Keldysh && bath.beta != grid.beta {
        return Err(Error::Unsupported("thermal contours need every bath at the grid temperature".into()));
    }
    Ok(())
}

/// Continuum boson kernel `Lambda(p, q) = i sum_k V_k^2 D_0(w_k; p, q)`.
pub fn lambda_value(spectral: &SpectralFunction, beta: f64, zp: C64, zq: C64, p_succeeds: bool) -> C64 {
    spectral
        .modes
        .iter()
        .map(|m| I * m.coupling * m.coupling * contour_green_ordered(Statistics::Boson, m.freq, zp, zq, p_succeeds, beta))
        .sum()
}

/// Continuum hybridization `Delta(p, q) = i P_pq sum_k V_k^2 G_0(e_k; p, q)`,
/// weighted per mode by `weight(e_k)` (1 for the plain hybridization).
pub fn delta_value(spectral: &SpectralFunction, beta: f64, zp: C64, zq: C64, p_succeeds: bool, parity: f64, weight: impl Fn(f64) -> f64) -> C64 {
    spectral
        .modes
        .iter()
        .map(|m| I * parity * m.coupling * m.coupling * weight(m.freq) * contour_green_ordered(Statistics::Fermion, m.freq, zp, zq, p_succeeds, beta))
        .sum()
}

pub fn build_boson_kernel_for_bath(grid: &ContourGrid, bath: &Bath, convention: Convention) -> Result<KernelMatrix> {
    check_bath(grid, bath, Statistics::Boson)?;
    let n = grid.len();
    let mut k = KernelMatrix::zeros(grid, Statistics::Boson);
    let a: Vec<C64> = (0..n).map(|j| out_measure(grid, j)).collect();
    let b: Vec<C64> = (0..n).map(|j| in_measure(grid, j)).collect();
    match convention {
        Convention::Exponential => {
            for m in &bath.spectral.modes {
                bose_occupation(m.freq, bath.beta)?;
            }
            for j in 0..n {
                for l in 0..n {
                    let p = &grid.points[j];
                    let q = &grid.points[l];
                    k.entries[(j, l)] = a[j] * b[l] * lambda_value(&bath.spectral, bath.beta, p.time, q.time, j >= l);
                }
            }
        }
        Convention::Linearized => {
            for m in &bath.spectral.modes {
                let s = build_action_with_beta(grid, Statistics::Boson, *m, convention, bath.beta)?;
                let inv = gaussian::inverse(&s)?;
                let v2 = m.coupling * m.coupling;
                for j in 0..n {
                    for l in 0..n {
                        k.entries[(j, l)] += a[j] * b[l] * v2 * inv[(j, l)];
                    }
                }
            }
        }
    }
    Ok(k)
}

/// Boson kernel with the environment at the grid temperature.
pub fn build_boson_kernel(grid: &ContourGrid, spectral: &SpectralFunction, convention: Convention) -> Result<KernelMatrix> {
    build_boson_kernel_for_bath(grid, &Bath { spectral: spectral.clone(), beta: grid.beta }, convention)
}

pub fn build_fermion_kernel_for_bath(grid: &ContourGrid, bath: &Bath, pairing: FermionPairing, convention: Convention) -> Result<KernelMatrix> {
    check_bath(grid, bath, Statistics::Fermion)?;
    let n = grid.len();
    let mut k = KernelMatrix::zeros(grid, Statistics::Fermion);
    let keldysh = grid.kind == GridKind::Keldysh;
    // (row point, column point) at which the bath propagator is sampled
    let sample = |j: usize, l: usize| -> Option<(usize, usize, C64)> {
        let sin = grid.incoming(j)?;
        let sout = grid.outgoing(l)?;
        let w = sin.dt * sout.dt;
        Some(match pairing {
            FermionPairing::Unshifted => {
                let sign = if sin.closes_trace { -1.0 } else { 1.0 } * if sout.closes_trace { -1.0 } else { 1.0 };
                (sin.from, sout.to, w * sign)
            }
            FermionPairing::Shifted => (j, l, w),
        })
    };
    match convention {
        Convention::Exponential => {
            for j in 0..n {
                for l in 0..n {
                    let Some((u, v, w)) = sample(j, l) else { continue };
                    let (p, q) = (&grid.points[u], &grid.points[v]);
                    let parity = if keldysh { grid.keldysh_parity(u) * grid.keldysh_parity(v) } else { 1.0 };
                    k.entries[(j, l)] = w * delta_value(&bath.spectral, bath.beta, p.time, q.time, u >= v, parity, |_| 1.0);
                }
            }
        }
        Convention::Linearized => {
            for m in &bath.spectral.modes {
                let s = build_action_with_beta(grid, Statistics::Fermion, *m, convention, bath.beta)?;
                let inv = gaussian::inverse(&s)?;
                let v2 = m.coupling * m.coupling;
                for j in 0..n {
                    for l in 0..n {
                        let Some((u, v, w)) = sample(j, l) else { continue };
                        // the numeric inverse already carries the branch parity
                        k.entries[(j, l)] += w * v2 * inv[(u, v)];
                    }
                }
            }
        }
    }
    Ok(k)
}

/// Fermion hybridization kernel with the bath at the grid temperature.
pub fn build_fermion_kernel(grid: &ContourGrid, spectral: &SpectralFunction, pairing: FermionPairing, convention: Convention) -> Result<KernelMatrix> {
    build_fermion_kernel_for_bath(grid, &Bath { spectral: spectral.clone(), beta: grid.beta }, pairing, convention)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Imag,
    Real,
}

/// Bath autocorrelation `alpha = sum_k V_k^2 [(1 + n) e^{-w x} + n e^{w x}]` with
/// `x = tau` (imaginary axis) or `x = i t` (real time).
pub fn autocorrelation(x: f64, spectral: &SpectralFunction, beta: f64, axis: Axis) -> Result<C64> {
    if spectral.statistics != Statistics::Boson {
        return Err(Error::StatisticsMismatch("autocorrelation is defined for boson baths".into()));
    }
    if axis == Axis::Imag && !(x >= 0.0 && x <= beta) {
        return Err(Error::Domain(format!("tau = {x} outside [0, {beta}]")));
    }
    let mut acc = C64::new(0.0, 0.0);
    for m in &spectral.modes {
        let n = bose_occupation(m.freq, beta)?;
        let v2 = m.coupling * m.coupling;
        acc += match axis {
            Axis::Imag => C64::new(v2 * ((1.0 + n) * (-m.freq * x).exp() + n * (m.freq * x).exp()), 0.0),
            Axis::Real => v2 * ((1.0 + n) * (-I * m.freq * x).exp() + n * (I * m.freq * x).exp()),
        };
    }
    Ok(acc)
}

/// `sum_jk s_j K_jk s_k`.
pub fn bilinear_exponent(values: &[f64], kernel: &KernelMatrix) -> C64 {
    let n = values.len();
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..n {
        if values[j] == 0.0 {
            continue;
        }
        let mut row = C64::new(0.0, 0.0);
        for l in 0..n {
            row += kernel.entries[(j, l)] * values[l];
        }
        acc += row * values[j];
    }
    acc
}

/// `I[s] = exp(-sum_jk s_j K_jk s_k)`.
pub fn influence_weight(path: &PathConfiguration, kernel: &KernelMatrix) -> Result<C64> {
    if kernel.statistics != Statistics::Boson {
        return Err(Error::StatisticsMismatch("influence weights need a boson kernel".into()));
    }
    if path.grid_id != kernel.grid.id() || path.values.len() != kernel.grid.len() {
        return Err(Error::GridMismatch("path and kernel are on different grids".into()));
    }
    Ok((-bilinear_exponent(&path.values, kernel)).exp())
}

/// The same weight from the coherent-state Gaussian integral mode by mode,
/// `(1/Z_E^0) det(S)^{-1} exp(Jt S^{-1} J)`, with the closed-form `Z_E^0`.
pub fn gaussian_route_weight(path: &PathConfiguration, grid: &ContourGrid, bath: &Bath) -> Result<C64> {
    check_bath(grid, bath, Statistics::Boson)?;
    if path.grid_id != grid.id() {
        return Err(Error::GridMismatch("path is on a different grid".into()));
    }
    let n = grid.len();
    let mut total = C64::new(1.0, 0.0);
    for m in &bath.spectral.modes {
        let s = build_action_with_beta(grid, Statistics::Boson, *m, Convention::Exponential, bath.beta)?;
        let jt = CVec::from_fn(n, |j, _| -I * out_measure(grid, j) * m.coupling * path.values[j]);
        let jv = CVec::from_fn(n, |j, _| -I * in_measure(grid, j) * m.coupling * path.values[j]);
        let z_e0 = 1.0 / closed_form_determinant(Statistics::Boson, m.freq, bath.beta);
        total *= boson_gaussian_integral(&s.entries, &jt, &jv)? / z_e0;
    }
    Ok(total)
}

/// Exponent of the imaginary-axis weight written with the autocorrelation:
/// `-dtau^2 sum_{j>k} s_j alpha(tau_j - tau_k) s_k + dtau^2 sum_j Lambda(tau_j, tau_j) s_j^2`.
pub fn triangular_exponent(values: &[f64], grid: &ContourGrid, spectral: &SpectralFunction) -> Result<f64> {
    if grid.kind != GridKind::ImaginaryAxis {
        return Err(Error::Unsupported("triangular form is written for the imaginary axis".into()));
    }
    let dtau = grid.dtau();
    let mut acc = 0.0;
    for j in 0..grid.len() {
        for k in 0..j {
            let a = autocorrelation(grid.points[j].tau() - grid.points[k].tau(), spectral, grid.beta, Axis::Imag)?;
            acc -= dtau * dtau * values[j] * a.re * values[k];
        }
    }
    let diag: f64 = spectral
        .modes
        .iter()
        .map(|m| -m.coupling * m.coupling * (1.0 + bose_occupation(m.freq, grid.beta).unwrap_or(0.0)))
        .sum();
    for v in values {
        acc += dtau * dtau * diag * v * v;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::build_grid;
    use crate::greens::{matsubara_green, Mode};
    use crate::linalg::max_abs_diff;

    fn boson(w: f64, v: f64) -> SpectralFunction {
        SpectralFunction::single(Statistics::Boson, w, v).unwrap()
    }

    #[test]
    fn imaginary_kernel_matches_inverse() {
        let g = build_grid(GridKind::ImaginaryAxis, 1.5, 0.0, 6, 0).unwrap();
        let (w, v) = (1.2, 0.7);
        let k = build_boson_kernel(&g, &boson(w, v), Convention::Exponential).unwrap();
        let s = gaussian::build_action(&g, Statistics::Boson, Mode { freq: w, coupling: v }, Convention::Exponential).unwrap();
        let inv = gaussian::inverse(&s).unwrap();
        let dtau = g.dtau();
        for j in 0..6 {
            for l in 0..6 {
                // K = dtau^2 V^2 D_0 = -dtau^2 V^2 S^{-1}
                assert!((k.entries[(j, l)] + dtau * dtau * v * v * inv[(j, l)]).norm() < 1e-13);
                let d = matsubara_green(Statistics::Boson, w, g.points[j].tau(), g.points[l].tau(), 1.5).unwrap();
                assert!((k.entries[(j, l)] - dtau * dtau * v * v * d).norm() < 1e-13);
                assert!(k.entries[(j, l)].im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_coupling_and_additivity() {
        let g = build_grid(GridKind::Keldysh, 1.0, 2.0, 1, 5).unwrap();
        let k0 = build_boson_kernel(&g, &boson(1.0, 0.0), Convention::Exponential).unwrap();
        assert!(k0.entries.iter().all(|z| *z == C64::new(0.0, 0.0)));
        let one = build_boson_kernel(&g, &boson(1.0, 0.8), Convention::Exponential).unwrap();
        let v = 0.8 / 2f64.sqrt();
        let two = SpectralFunction::new(Statistics::Boson, vec![Mode { freq: 1.0, coupling: v }, Mode { freq: 1.0, coupling: v }]).unwrap();
        let k2 = build_boson_kernel(&g, &two, Convention::Exponential).unwrap();
        assert!(max_abs_diff(&one.entries, &k2.entries) < 1e-14);
    }

    #[test]
    fn gaussian_route_example() {
        let g = build_grid(GridKind::ImaginaryAxis, 1.0, 0.0, 4, 0).unwrap();
        let spec = boson(1.3, 0.6);
        let k = build_boson_kernel(&g, &spec, Convention::Exponential).unwrap();
        let p = PathConfiguration::new(&g, vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        let a = influence_weight(&p, &k).unwrap();
        let b = gaussian_route_weight(&p, &g, &Bath { spectral: spec, beta: 1.0 }).unwrap();
        assert!((a - b).norm() < 1e-12);
        let zero = PathConfiguration::new(&g, vec![0.0; 4]).unwrap();
        assert_eq!(influence_weight(&zero, &k).unwrap(), C64::new(1.0, 0.0));
        let kz = KernelMatrix::zeros(&g, Statistics::Boson);
        assert_eq!(influence_weight(&p, &kz).unwrap(), C64::new(1.0, 0.0));
    }

    #[test]
    fn autocorrelation_examples() {
        let spec = boson(3.0, 1.0);
        let beta = 1.0;
        let t = 0.2 * beta;
        let a = autocorrelation(t, &spec, beta, Axis::Imag).unwrap();
        let b = autocorrelation(beta - t, &spec, beta, Axis::Imag).unwrap();
        assert!((a - b).norm() < 1e-12);
        let spec = boson(0.7, 0.4);
        let a0 = autocorrelation(0.0, &spec, 2.0, Axis::Real).unwrap();
        let coth = 1.0 / (0.7f64).tanh();
        assert!((a0 - C64::new(0.16 * coth, 0.0)).norm() < 1e-14);
        let cold = autocorrelation(1.3, &spec, 1e4, Axis::Real).unwrap();
        assert!((cold - 0.16 * (-I * 0.7 * 1.3).exp()).norm() < 1e-14);
        assert!(autocorrelation(1.5, &spec, 1.0, Axis::Imag).is_err());
    }

    #[test]
    fn keldysh_mirror_conjugation() {
        let n = 6;
        let g = build_grid(GridKind::Keldysh, 0.9, 3.0, 1, n).unwrap();
        let k = build_boson_kernel(&g, &boson(1.1, 0.5), Convention::Exponential).unwrap();
        for j in 0..n {
            for l in 1..=n {
                let f = k.entries[(g.forward(j).unwrap(), g.forward(l).unwrap())];
                let b = k.entries[(g.backward(l).unwrap(), g.backward(j).unwrap())];
                assert!((f - b.conj()).norm() < 1e-14, "{j} {l}");
            }
        }
    }

    #[test]
    fn fermion_kernel_signs() {
        let (beta, e, v) = (1.0, 0.4, 0.6);
        let spec = SpectralFunction::single(Statistics::Fermion, e, v).unwrap();
        let g = build_grid(GridKind::ImaginaryAxis, beta, 0.0, 5, 0).unwrap();
        let k = build_fermion_kernel(&g, &spec, FermionPairing::Shifted, Convention::Exponential).unwrap();
        let d = g.dtau();
        for j in 0..5 {
            for l in 0..5 {
                let gm = matsubara_green(Statistics::Fermion, e, g.points[j].tau(), g.points[l].tau(), beta).unwrap();
                assert!((k.entries[(j, l)] - d * d * v * v * gm).norm() < 1e-14);
            }
        }
        let g = build_grid(GridKind::Keldysh, beta, 1.0, 1, 4).unwrap();
        let k = build_fermion_kernel(&g, &spec, FermionPairing::Shifted, Convention::Exponential).unwrap();
        let (p, q) = (g.forward(1).unwrap(), g.backward(2).unwrap());
        let g12 = crate::greens::contour_green(Statistics::Fermion, e, &g.points[p], &g.points[q], beta).unwrap();
        let meas = g.incoming(p).unwrap().dt * g.outgoing(q).unwrap().dt;
        assert!((k.entries[(p, q)] - (-I * v * v * g12 * meas)).norm() < 1e-14);
        let g = build_grid(GridKind::Kadanoff, beta, 1.0, 4, 4).unwrap();
        let k = build_fermion_kernel(&g, &spec, FermionPairing::Shifted, Convention::Exponential).unwrap();
        let (p, q) = (g.forward(1).unwrap(), g.imaginary(2).unwrap());
        let g13 = crate::greens::contour_green(Statistics::Fermion, e, &g.points[p], &g.points[q], beta).unwrap();
        let meas = g.incoming(p).unwrap().dt * g.outgoing(q).unwrap().dt;
        assert!((k.entries[(p, q)] - (I * v * v * g13 * meas)).norm() < 1e-14);
    }

    #[test]
    fn linearized_kernel_tends_to_exponential() {
        let spec = boson(1.0, 0.5);
        let mut prev = f64::INFINITY;
        for m in [8usize, 16, 32] {
            let g = build_grid(GridKind::ImaginaryAxis, 1.0, 0.0, m, 0).unwrap();
            let a = build_boson_kernel(&g, &spec, Convention::Exponential).unwrap();
            let b = build_boson_kernel(&g, &spec, Convention::Linearized).unwrap();
            let d = max_abs_diff(&a.entries, &b.entries) / (g.dtau() * g.dtau());
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn statistics_checked() {
        let g = build_grid(GridKind::ImaginaryAxis, 1.0, 0.0, 4, 0).unwrap();
        let fs = SpectralFunction::single(Statistics::Fermion, 0.3, 0.2).unwrap();
        assert!(build_boson_kernel(&g, &fs, Convention::Exponential).is_err());
        assert!(build_fermion_kernel(&g, &boson(1.0, 1.0), FermionPairing::Unshifted, Convention::Exponential).is_err());
        assert!(autocorrelation(0.1, &fs, 1.0, Axis::Imag).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn triangular_form(m in 2usize..64, w in 0.2f64..4.0, v in 0.1f64..1.5, beta in 0.2f64..4.0, bits in any::<u64>()) {
                let g = build_grid(GridKind::ImaginaryAxis, beta, 0.0, m, 0).unwrap();
                let spec = boson(w, v);
                let k = build_boson_kernel(&g, &spec, Convention::Exponential).unwrap();
                let vals: Vec<f64> = (0..m).map(|j| if bits >> (j % 64) & 1 == 1 { 1.0 } else { -1.0 }).collect();
                let full = bilinear_exponent(&vals, &k);
                let tri = triangular_exponent(&vals, &g, &spec).unwrap();
                prop_assert!((full.re - tri).abs() < 1e-10 * (1.0 + tri.abs()));
                prop_assert!(full.im.abs() < 1e-12);
            }

            #[test]
            fn multi_bath_factorizes(n in 1usize..6, w1 in 0.2f64..3.0, w2 in 0.2f64..3.0, bits in any::<u32>()) {
                let g = build_grid(GridKind::Keldysh, 1.0, 1.5, 1, n).unwrap();
                let ka = build_boson_kernel(&g, &boson(w1, 0.4), Convention::Exponential).unwrap();
                let kb = build_boson_kernel(&g, &boson(w2, 0.7), Convention::Exponential).unwrap();
                let kab = build_boson_kernel(&g, &boson(w1, 0.4).merged(&boson(w2, 0.7)).unwrap(), Convention::Exponential).unwrap();
                prop_assert!(max_abs_diff(&ka.sum(&kb).unwrap().entries, &kab.entries) < 1e-14);
                let vals: Vec<f64> = (0..g.len()).map(|j| if bits >> j & 1 == 1 { 1.0 } else { -1.0 }).collect();
                let p = PathConfiguration::new(&g, vals).unwrap();
                let whole = influence_weight(&p, &ka.sum(&kb).unwrap()).unwrap();
                let parts = influence_weight(&p, &ka).unwrap() * influence_weight(&p, &kb).unwrap();
                prop_assert!((whole - parts).norm() < 1e-12 * whole.norm().max(1.0));
            }
        }
    }
}
