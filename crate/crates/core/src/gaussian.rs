//! Discretized Gaussian actions `S` of a single free environment mode, their
//! determinants and inverses, and the boson/fermion Gaussian integrals.
//!
//! Each contour step `from -> to` contributes `-u` at `S[to, from]` with
//! `u = e^{-i w dt}` (or `1 - i w dt`), so `u` is `h`, `g` or `g-bar` depending on
//! the branch. The step closing the trace carries `+u` for fermions (the `<-c|`
//! rule). On the Keldysh contour the thermal initial state adds `-e^{-beta w}`
//! at `S[t_0^+, t_0^-]`.

use crate::contour::{ContourGrid, GridKind};
use crate::error::{Error, Result};
use crate::greens::{contour_green, Mode, Statistics};
use crate::linalg::{self, CMat, CVec};
use crate::{C64, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Convention {
    /// `h = e^{-dtau w}`, `g = e^{-i w dt}`: every finite-M identity is exact.
    Exponential,
    /// `h = 1 - dtau w`, `g = 1 - i w dt`.
    Linearized,
}

#[derive(Debug, Clone)]
pub struct ActionMatrix {
    pub grid: ContourGrid,
    pub statistics: Statistics,
    pub mode: Mode,
    pub convention: Convention,
    pub entries: CMat,
}

/// Per-step factor `u` for frequency `freq` over contour measure `dt`.
pub fn step_factor(freq: f64, dt: C64, convention: Convention) -> C64 {
    match convention {
        Convention::Exponential => (-I * freq * dt).exp(),
        Convention::Linearized => C64::new(1.0, 0.0) - I * freq * dt,
    }
}

/// Action matrix of a free mode along the grid's steps. `initial_weight` is the
/// coefficient `r` of the Keldysh initial-state element `e^{r x-bar(t_0^+) x(t_0^-)}`.
pub fn step_action(grid: &ContourGrid, stat: Statistics, freq: f64, convention: Convention, initial_weight: C64) -> CMat {
    let n = grid.len();
    let mut s = linalg::eye(n);
    for st in grid.steps() {
        let u = step_factor(freq, st.dt, convention);
        let sign = if stat == Statistics::Fermion && st.closes_trace { -1.0 } else { 1.0 };
        s[(st.to, st.from)] -= u * sign;
    }
    if let Some((bra, ket)) = grid.initial_link() {
        s[(bra, ket)] -= initial_weight;
    }
    s
}

/// Environment action with bath temperature `beta_env` for the Keldysh initial state.
pub fn build_action_with_beta(grid: &ContourGrid, stat: Statistics, mode: Mode, convention: Convention, beta_env: f64) -> Result<ActionMatrix> {
    if stat == Statistics::Boson && !(mode.freq > 0.0) {
        return Err(Error::InvalidParameter(format!("boson mode frequency must be positive, got {}", mode.freq)));
    }
    if !(beta_env > 0.0) {
        return Err(Error::InvalidParameter("bath beta must be positive".into()));
    }
    if grid.kind != GridKind::Keldysh && beta_env != grid.beta {
        return Err(Error::Unsupported("thermal contours need the bath at the grid temperature".into()));
    }
    let w = C64::new((-beta_env * mode.freq).exp(), 0.0);
    let entries = step_action(grid, stat, mode.freq, convention, w);
    Ok(ActionMatrix { grid: grid.clone(), statistics: stat, mode, convention, entries })
}

pub fn build_action(grid: &ContourGrid, stat: Statistics, mode: Mode, convention: Convention) -> Result<ActionMatrix> {
    build_action_with_beta(grid, stat, mode, convention, grid.beta)
}

pub fn determinant(s: &ActionMatrix) -> C64 {
    linalg::determinant(&s.entries)
}

/// `1 - e^{-beta w}` (boson) or `1 + e^{-beta e}` (fermion).
pub fn closed_form_determinant(stat: Statistics, freq: f64, beta: f64) -> f64 {
    match stat {
        Statistics::Boson => -(-beta * freq).exp_m1(),
        Statistics::Fermion => 1.0 + (-beta * freq).exp(),
    }
}

pub fn inverse(s: &ActionMatrix) -> Result<CMat> {
    linalg::inverse(&s.entries)
}

/// The Green's-function form `S^{-1} = i P G P` of the inverse, with `P` the
/// Keldysh branch parity for fermions (identity otherwise).
pub fn green_block_form(grid: &ContourGrid, stat: Statistics, freq: f64, beta_env: f64) -> Result<CMat> {
    let n = grid.len();
    let mut out = CMat::zeros(n, n);
    let signed = stat == Statistics::Fermion && grid.kind == GridKind::Keldysh;
    for (j, p) in grid.points.iter().enumerate() {
        for (k, q) in grid.points.iter().enumerate() {
            let mut v = I * contour_green(stat, freq, p, q, beta_env)?;
            if signed {
                v *= grid.keldysh_parity(j) * grid.keldysh_parity(k);
            }
            out[(j, k)] = v;
        }
    }
    Ok(out)
}

/// `int prod dphi-bar dphi / pi  e^{-phi-bar S phi + jt.phi + phi-bar.j} = det(S)^{-1} e^{jt S^{-1} j}`.
pub fn boson_gaussian_integral(s: &CMat, jt: &CVec, j: &CVec) -> Result<C64> {
    if !s.is_square() || jt.len() != s.nrows() || j.len() != s.nrows() {
        return Err(Error::InvalidParameter("dimension mismatch in Gaussian integral".into()));
    }
    let lu = s.clone().lu();
    let det = lu.determinant();
    if det.norm() == 0.0 {
        return Err(Error::Singular("Gaussian kernel is singular".into()));
    }
    let x = lu.solve(j).ok_or_else(|| Error::Singular("Gaussian solve failed".into()))?;
    let expo: C64 = jt.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    Ok(expo.exp() / det)
}

/// Fermionic Gaussian integral `int prod dc-bar dc e^{-c-bar S c} = det S`.
pub fn fermion_gaussian_normalization(s: &CMat) -> C64 {
    linalg::determinant(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::build_grid;
    use crate::linalg::max_abs_diff;

    const B: Statistics = Statistics::Boson;
    const F: Statistics = Statistics::Fermion;

    fn mode(w: f64) -> Mode {
        Mode { freq: w, coupling: 0.0 }
    }

    #[test]
    fn imaginary_corners() {
        let g = build_grid(GridKind::ImaginaryAxis, 1.0, 0.0, 3, 0).unwrap();
        let h = (-1.0f64 / 3.0 * 0.8).exp();
        let sb = build_action(&g, B, mode(0.8), Convention::Exponential).unwrap();
        assert!((sb.entries[(0, 2)] - C64::new(-h, 0.0)).norm() < 1e-15);
        assert!((sb.entries[(1, 0)] - C64::new(-h, 0.0)).norm() < 1e-15);
        assert!((sb.entries[(2, 1)] - C64::new(-h, 0.0)).norm() < 1e-15);
        assert_eq!(sb.entries[(0, 0)], C64::new(1.0, 0.0));
        let sf = build_action(&g, F, mode(0.8), Convention::Exponential).unwrap();
        assert!((sf.entries[(0, 2)] - C64::new(h, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn keldysh_entries() {
        let beta = 1.0;
        let w = 0.6;
        let g = build_grid(GridKind::Keldysh, beta, 1.0, 1, 2).unwrap();
        let sb = build_action(&g, B, mode(w), Convention::Exponential).unwrap();
        assert!((sb.entries[(0, 4)] + (-beta * w).exp()).norm() < 1e-15);
        let gf = (-I * w * 0.5).exp();
        assert!((sb.entries[(1, 0)] + gf).norm() < 1e-15);
        assert!((sb.entries[(3, 2)] + gf.conj()).norm() < 1e-15);
        // fermion: sign-flipped +g on the turning row
        let sf = build_action(&g, F, mode(w), Convention::Exponential).unwrap();
        assert!((sf.entries[(2, 1)] - gf).norm() < 1e-15);
        assert!((sf.entries[(1, 0)] + gf).norm() < 1e-15);
        assert!((sf.entries[(0, 4)] + (-beta * w).exp()).norm() < 1e-15);
    }

    #[test]
    fn determinant_examples() {
        let g = build_grid(GridKind::ImaginaryAxis, 1.0, 0.0, 7, 0).unwrap();
        let d = determinant(&build_action(&g, B, mode(2.0), Convention::Exponential).unwrap());
        assert!((d - C64::new(0.8646647168, 0.0)).norm() < 1e-10);
        let g = build_grid(GridKind::Keldysh, 1.0, 2.0, 1, 5).unwrap();
        let d = determinant(&build_action(&g, F, mode(1.0), Convention::Exponential).unwrap());
        assert!((d - C64::new(1.3678794412, 0.0)).norm() < 1e-10);
        let g = build_grid(GridKind::Kadanoff, 1.0, 2.0, 6, 5).unwrap();
        let d = determinant(&build_action(&g, B, mode(2.0), Convention::Exponential).unwrap());
        assert!((d - C64::new(0.8646647168, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn single_point_imaginary_grid() {
        let g = build_grid(GridKind::ImaginaryAxis, 1.5, 0.0, 1, 0).unwrap();
        for stat in [B, F] {
            let d = determinant(&build_action(&g, stat, mode(0.7), Convention::Exponential).unwrap());
            assert!((d.re - closed_form_determinant(stat, 0.7, 1.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_identity_small() {
        for kind in [GridKind::ImaginaryAxis, GridKind::Keldysh, GridKind::Kadanoff] {
            let g = build_grid(kind, 1.3, 1.7, 5, 4).unwrap();
            for stat in [B, F] {
                let s = build_action(&g, stat, mode(0.9), Convention::Exponential).unwrap();
                let inv = inverse(&s).unwrap();
                let resid = max_abs_diff(&(&s.entries * &inv), &linalg::eye(g.len()));
                assert!(resid < 1e-11);
                let form = green_block_form(&g, stat, 0.9, 1.3).unwrap();
                assert!(max_abs_diff(&inv, &form) < 1e-10, "{kind:?} {stat:?}");
            }
        }
    }

    #[test]
    fn imaginary_inverse_is_minus_matsubara() {
        let g = build_grid(GridKind::ImaginaryAxis, 2.0, 0.0, 6, 0).unwrap();
        let s = build_action(&g, B, mode(1.1), Convention::Exponential).unwrap();
        let inv = inverse(&s).unwrap();
        for j in 0..6 {
            for k in 0..6 {
                let d = crate::greens::matsubara_green(B, 1.1, g.points[j].tau(), g.points[k].tau(), 2.0).unwrap();
                assert!((inv[(j, k)] + d).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_integral_examples() {
        let s = linalg::eye(3);
        let z = CVec::zeros(3);
        assert!((boson_gaussian_integral(&s, &z, &z).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        let mut e1 = CVec::zeros(3);
        e1[0] = C64::new(1.0, 0.0);
        let v = boson_gaussian_integral(&s, &e1, &e1).unwrap();
        assert!((v - C64::new(1f64.exp(), 0.0)).norm() < 1e-14);
        let s = CMat::from_diagonal(&CVec::from_vec(vec![C64::new(2.0, 0.0), C64::new(3.0, 0.0)]));
        let one = CVec::from_element(2, C64::new(1.0, 0.0));
        let v = boson_gaussian_integral(&s, &one, &one).unwrap();
        assert!((v - C64::new((0.5f64 + 1.0 / 3.0).exp() / 6.0, 0.0)).norm() < 1e-14);
        let one1 = CMat::from_element(1, 1, C64::new(2.5, -1.0));
        assert_eq!(fermion_gaussian_normalization(&one1), C64::new(2.5, -1.0));
        assert!((fermion_gaussian_normalization(&linalg::eye(3)) - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn boson_frequency_must_be_positive() {
        let g = build_grid(GridKind::ImaginaryAxis, 1.0, 0.0, 3, 0).unwrap();
        assert!(build_action(&g, B, mode(0.0), Convention::Exponential).is_err());
        assert!(build_action(&g, F, mode(-1.0), Convention::Exponential).is_ok());
    }

    #[test]
    fn linearized_determinant_converges_first_order() {
        let (beta, w) = (1.0, 2.0);
        let exact = closed_form_determinant(B, w, beta);
        let errs: Vec<f64> = [16usize, 32, 64, 128]
            .iter()
            .map(|&m| {
                let g = build_grid(GridKind::ImaginaryAxis, beta, 0.0, m, 0).unwrap();
                (determinant(&build_action(&g, B, mode(w), Convention::Linearized).unwrap()).re - exact).abs()
            })
            .collect();
        for w2 in errs.windows(2) {
            let r = w2[0] / w2[1];
            assert!(r > 1.8 && r < 2.2, "ratio {r}");
        }
    }

    #[test]
    fn inverse_involution() {
        let g = build_grid(GridKind::Keldysh, 1.0, 1.0, 1, 6).unwrap();
        let s = build_action(&g, B, mode(1.0), Convention::Exponential).unwrap();
        let inv = inverse(&s).unwrap();
        let back = linalg::inverse(&inv).unwrap();
        assert!(max_abs_diff(&back, &s.entries) < 1e-9);
    }
}
