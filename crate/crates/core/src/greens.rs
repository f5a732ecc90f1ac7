//! Environment descriptions, occupation factors and free environment Green's
//! functions on every contour.
//!
//! All contour Green's functions follow one rule,
//! `G(p, q) = -i <T_C x(p) x^dagger(q)>_0` with complex times `z = t` or `z = -i tau`:
//!
//! * boson:   `-i (1 + n) e^{-i w (z_p - z_q)}` if `p` succeeds or equals `q`, else `-i n e^{...}`
//! * fermion: `-i (1 - f) e^{-i e (z_p - z_q)}` if `p` succeeds or equals `q`, else `+i f e^{...}`
//!
//! which reproduces every block (11, 12, 21, 22 and the Kadanoff mixed blocks).
//! Equal points resolve to the "succeeds or equals" branch.

use crate::contour::{contour_precedes, ContourPoint};
use crate::error::{Error, Result};
use crate::{C64, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistics {
    Boson,
    Fermion,
}

/// One environment mode: frequency (or level energy) and real coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub freq: f64,
    pub coupling: f64,
}

/// Discretized spectral density `J(w) = sum_k V_k^2 delta(w - w_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunction {
    pub statistics: Statistics,
    pub modes: Vec<Mode>,
}

impl SpectralFunction {
    pub fn new(statistics: Statistics, modes: Vec<Mode>) -> Result<Self> {
        for m in &modes {
            if !(m.freq.is_finite() && m.coupling.is_finite()) {
                return Err(Error::InvalidParameter("non-finite mode parameter".into()));
            }
            if statistics == Statistics::Boson && m.freq <= 0.0 {
                return Err(Error::InvalidParameter(format!("boson frequency must be positive, got {}", m.freq)));
            }
        }
        Ok(SpectralFunction { statistics, modes })
    }

    pub fn single(statistics: Statistics, freq: f64, coupling: f64) -> Result<Self> {
        Self::new(statistics, vec![Mode { freq, coupling }])
    }

    /// Mode list of two environments side by side (kernels add).
    pub fn merged(&self, other: &SpectralFunction) -> Result<Self> {
        if self.statistics != other.statistics {
            return Err(Error::StatisticsMismatch("cannot merge boson and fermion baths".into()));
        }
        let mut modes = self.modes.clone();
        modes.extend_from_slice(&other.modes);
        Ok(SpectralFunction { statistics: self.statistics, modes })
    }

    pub fn is_decoupled(&self) -> bool {
        self.modes.iter().all(|m| m.coupling == 0.0)
    }
}

/// An environment together with its own inverse temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct Bath {
    pub spectral: SpectralFunction,
    pub beta: f64,
}

impl Bath {
    pub fn new(spectral: SpectralFunction, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!("bath beta must be positive, got {beta}")));
        }
        Ok(Bath { spectral, beta })
    }
}

/// Bose-Einstein factor `1 / (e^{beta w} - 1)`.
pub fn bose_occupation(omega: f64, beta: f64) -> Result<f64> {
    let x = beta * omega;
    if x == 0.0 || !x.is_finite() {
        return Err(Error::Domain(format!("Bose factor undefined at beta*omega = {x}")));
    }
    Ok(1.0 / x.exp_m1())
}

/// Fermi-Dirac factor `1 / (e^{beta e} + 1)`, evaluated without overflow.
pub fn fermi_occupation(eps: f64, beta: f64) -> f64 {
    let x = beta * eps;
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Free Green's function between complex contour times, with the ordering of the
/// two arguments given explicitly (`p_succeeds` also decides coincident points).
pub fn contour_green_ordered(stat: Statistics, freq: f64, zp: C64, zq: C64, p_succeeds: bool, beta: f64) -> C64 {
    let phase = (-I * freq * (zp - zq)).exp();
    match stat {
        Statistics::Boson => {
            let n = 1.0 / (beta * freq).exp_m1();
            if p_succeeds {
                -I * (1.0 + n) * phase
            } else {
                -I * n * phase
            }
        }
        Statistics::Fermion => {
            if p_succeeds {
                // 1 - f(e) = f(-e), without the cancellation
                -I * fermi_occupation(-freq, beta) * phase
            } else {
                I * fermi_occupation(freq, beta) * phase
            }
        }
    }
}

/// Matsubara Green's function `-<T x(tau1) x^dagger(tau2)>_0`.
pub fn matsubara_green(stat: Statistics, freq: f64, tau1: f64, tau2: f64, beta: f64) -> Result<C64> {
    let tol = 1e-12 * beta.max(1.0);
    for t in [tau1, tau2] {
        if !(t >= -tol && t <= beta + tol) {
            return Err(Error::Domain(format!("tau = {t} outside [0, {beta}]")));
        }
    }
    if stat == Statistics::Boson {
        bose_occupation(freq, beta)?;
    }
    let g = contour_green_ordered(stat, freq, C64::new(0.0, -tau1), C64::new(0.0, -tau2), tau1 >= tau2, beta);
    Ok(-I * g)
}

/// Contour Green's function `-i <T_C x(p) x^dagger(q)>_0`; on imaginary points this
/// is `i` times the Matsubara function.
pub fn contour_green(stat: Statistics, freq: f64, p: &ContourPoint, q: &ContourPoint, beta: f64) -> Result<C64> {
    let q_first = contour_precedes(q, p)?;
    if stat == Statistics::Boson {
        bose_occupation(freq, beta)?;
    }
    Ok(contour_green_ordered(stat, freq, p.time, q.time, q_first || p.index == q.index, beta))
}
