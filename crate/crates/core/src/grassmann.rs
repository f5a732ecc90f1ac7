//! Brute-force Grassmann algebra and Berezin integration over at most 24
//! generators, used to check fermionic coherent-state identities directly.
//!
//! Generators of `n` modes occupy slots `2k` (`c-bar_k`) and `2k + 1` (`c_k`).
//! A monomial is a bitmask; its coefficient refers to the product written in
//! ascending slot order.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::C64;

pub const MAX_SLOTS: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannPoly {
    pub n_modes: usize,
    pub coeffs: BTreeMap<u32, C64>,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Sign of reordering the concatenation `a b` of two ascending monomials.
fn merge_sign(a: u32, b: u32) -> f64 {
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let bit = rest.trailing_zeros();
        swaps += (a >> bit >> 1).count_ones();
        rest &= rest - 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl GrassmannPoly {
    pub fn zero(n_modes: usize) -> Result<Self> {
        if 2 * n_modes > MAX_SLOTS || n_modes == 0 {
            return Err(Error::SizeLimit(format!("{n_modes} modes exceed the 2n <= {MAX_SLOTS} oracle limit")));
        }
        Ok(GrassmannPoly { n_modes, coeffs: BTreeMap::new() })
    }

    pub fn scalar(n_modes: usize, x: C64) -> Result<Self> {
        let mut p = Self::zero(n_modes)?;
        p.add_term(0, x);
        Ok(p)
    }

    pub fn one(n_modes: usize) -> Result<Self> {
        Self::scalar(n_modes, C64::new(1.0, 0.0))
    }

    pub fn slots(&self) -> usize {
        2 * self.n_modes
    }

    pub fn generator(n_modes: usize, slot: usize) -> Result<Self> {
        let mut p = Self::zero(n_modes)?;
        if slot >= p.slots() {
            return Err(Error::InvalidParameter(format!("slot {slot} out of range")));
        }
        p.add_term(1 << slot, C64::new(1.0, 0.0));
        Ok(p)
    }

    /// `c-bar_k` (0-based mode index).
    pub fn cbar(n_modes: usize, k: usize) -> Result<Self> {
        Self::generator(n_modes, 2 * k)
    }

    /// `c_k` (0-based mode index).
    pub fn c(n_modes: usize, k: usize) -> Result<Self> {
        Self::generator(n_modes, 2 * k + 1)
    }

    /// Adds `x` times the ascending-order monomial `mask`.
    pub fn add_term(&mut self, mask: u32, x: C64) {
        if x == zero() {
            return;
        }
        let e = self.coeffs.entry(mask).or_insert_with(zero);
        *e += x;
        if *e == zero() {
            self.coeffs.remove(&mask);
        }
    }

    /// Adds `x` times the product of generators in the given (arbitrary) order.
    pub fn add_ordered(&mut self, slots: &[usize], x: C64) {
        let mut mask = 0u32;
        let mut sign = 1.0;
        for &s in slots {
            let bit = 1u32 << s;
            if mask & bit != 0 {
                return;
            }
            sign *= merge_sign(mask, bit);
            mask |= bit;
        }
        self.add_term(mask, x * sign);
    }

    pub fn coefficient(&self, mask: u32) -> C64 {
        self.coeffs.get(&mask).copied().unwrap_or_else(zero)
    }

    pub fn scalar_part(&self) -> C64 {
        self.coefficient(0)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.n_modes != other.n_modes {
            return Err(Error::InvalidParameter("generator count mismatch".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        for (&m, &x) in &other.coeffs {
            out.add_term(m, x);
        }
        Ok(out)
    }

    pub fn scale(&self, x: C64) -> Self {
        let mut out = GrassmannPoly { n_modes: self.n_modes, coeffs: BTreeMap::new() };
        for (&m, &y) in &self.coeffs {
            out.add_term(m, x * y);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn is_even(&self) -> bool {
        self.coeffs.keys().all(|m| m.count_ones() % 2 == 0)
    }

    /// Even and odd parts.
    pub fn split_parity(&self) -> (Self, Self) {
        let mut even = GrassmannPoly { n_modes: self.n_modes, coeffs: BTreeMap::new() };
        let mut odd = even.clone();
        for (&m, &x) in &self.coeffs {
            if m.count_ones() % 2 == 0 {
                even.add_term(m, x);
            } else {
                odd.add_term(m, x);
            }
        }
        (even, odd)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for (&m, &x) in &self.coeffs {
            d = d.max((x - other.coefficient(m)).norm());
        }
        for (&m, &x) in &other.coeffs {
            if !self.coeffs.contains_key(&m) {
                d = d.max(x.norm());
            }
        }
        d
    }
}

/// Product with signs from sorting the concatenated monomial.
pub fn g_mul(a: &GrassmannPoly, b: &GrassmannPoly) -> Result<GrassmannPoly> {
    a.check(b)?;
    let mut out = GrassmannPoly { n_modes: a.n_modes, coeffs: BTreeMap::new() };
    for (&ma, &xa) in &a.coeffs {
        for (&mb, &xb) in &b.coeffs {
            if ma & mb != 0 {
                continue;
            }
            out.add_term(ma | mb, xa * xb * merge_sign(ma, mb));
        }
    }
    Ok(out)
}

/// Exponential of a nilpotent element; the series stops by nilpotency.
pub fn g_exp(a: &GrassmannPoly) -> Result<GrassmannPoly> {
    if a.scalar_part() != zero() {
        return Err(Error::InvalidParameter("exponent has a nonzero scalar part".into()));
    }
    let mut sum = GrassmannPoly::one(a.n_modes)?;
    let mut term = sum.clone();
    for k in 1..=a.slots() {
        term = g_mul(&term, a)?.scale(C64::new(1.0 / k as f64, 0.0));
        if term.coeffs.is_empty() {
            break;
        }
        sum = sum.add(&term)?;
    }
    Ok(sum)
}

/// `int d theta_slot` acting from the left: move the generator to the front, drop it.
pub fn berezin(poly: &GrassmannPoly, slot: usize) -> Result<GrassmannPoly> {
    if slot >= poly.slots() {
        return Err(Error::InvalidParameter(format!("slot {slot} out of range")));
    }
    let bit = 1u32 << slot;
    let mut out = GrassmannPoly { n_modes: poly.n_modes, coeffs: BTreeMap::new() };
    for (&m, &x) in &poly.coeffs {
        if m & bit == 0 {
            continue;
        }
        let before = (m & (bit - 1)).count_ones();
        let sign = if before % 2 == 0 { 1.0 } else { -1.0 };
        out.add_term(m & !bit, x * sign);
    }
    Ok(out)
}

/// Full integration with the measure `prod_k dc-bar_k dc_k`.
pub fn integrate_all(poly: &GrassmannPoly) -> Result<C64> {
    let mut p = poly.clone();
    for k in (0..poly.n_modes).rev() {
        p = berezin(&p, 2 * k + 1)?;
        p = berezin(&p, 2 * k)?;
    }
    Ok(p.scalar_part())
}

/// The bilinear `sum_jk c-bar_j S_jk c_k`.
pub fn bilinear(s: &CMat) -> Result<GrassmannPoly> {
    let n = s.nrows();
    if !s.is_square() {
        return Err(Error::InvalidParameter("matrix must be square".into()));
    }
    let mut p = GrassmannPoly::zero(n)?;
    for j in 0..n {
        for k in 0..n {
            p.add_ordered(&[2 * j, 2 * k + 1], s[(j, k)]);
        }
    }
    Ok(p)
}

/// `int prod dc-bar dc e^{-c-bar S c}` by literal expansion.
pub fn brute_force_fermion_gaussian(s: &CMat) -> Result<C64> {
    if 2 * s.nrows() > MAX_SLOTS {
        return Err(Error::SizeLimit(format!("{}x{} exceeds the oracle limit", s.nrows(), s.ncols())));
    }
    let expo = bilinear(s)?.scale(C64::new(-1.0, 0.0));
    integrate_all(&g_exp(&expo)?)
}

/// A Fock-space vector with Grassmann coefficients, `sum_F g_F |F>`, basis states
/// `|F> = prod_{k in F, ascending} c_k^dagger |0>`.
#[derive(Debug, Clone)]
pub struct GrassmannFockVector {
    pub n_modes: usize,
    pub components: Vec<GrassmannPoly>,
}

fn jw_sign(occ: usize, k: usize) -> f64 {
    if (occ & ((1 << k) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl GrassmannFockVector {
    pub fn vacuum(n_modes: usize) -> Result<Self> {
        let mut components = vec![GrassmannPoly::zero(n_modes)?; 1 << n_modes];
        components[0] = GrassmannPoly::one(n_modes)?;
        Ok(GrassmannFockVector { n_modes, components })
    }

    /// Applies `c_k` (`create = false`) or `c_k^dagger`; the operator anticommutes
    /// with odd Grassmann coefficients.
    pub fn apply_mode(&self, k: usize, create: bool) -> Result<Self> {
        let mut out = GrassmannFockVector { n_modes: self.n_modes, components: vec![GrassmannPoly::zero(self.n_modes)?; self.components.len()] };
        for (occ, g) in self.components.iter().enumerate() {
            if g.coeffs.is_empty() {
                continue;
            }
            let has = occ & (1 << k) != 0;
            if has == create {
                continue;
            }
            let target = occ ^ (1 << k);
            let (even, odd) = g.split_parity();
            let moved = even.sub(&odd)?.scale(C64::new(jw_sign(occ, k), 0.0));
            out.components[target] = out.components[target].add(&moved)?;
        }
        Ok(out)
    }

    /// Left multiplication of every coefficient by a Grassmann element.
    pub fn left_mul(&self, g: &GrassmannPoly) -> Result<Self> {
        let components = self.components.iter().map(|c| g_mul(g, c)).collect::<Result<Vec<_>>>()?;
        Ok(GrassmannFockVector { n_modes: self.n_modes, components })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let components = self.components.iter().zip(&other.components).map(|(a, b)| a.add(b)).collect::<Result<Vec<_>>>()?;
        Ok(GrassmannFockVector { n_modes: self.n_modes, components })
    }

    /// Applies an ordinary even operator given as a Fock-space matrix.
    pub fn apply_even_operator(&self, op: &CMat) -> Result<Self> {
        let dim = self.components.len();
        if op.nrows() != dim || op.ncols() != dim {
            return Err(Error::InvalidParameter("operator dimension mismatch".into()));
        }
        let mut out = GrassmannFockVector { n_modes: self.n_modes, components: vec![GrassmannPoly::zero(self.n_modes)?; dim] };
        for i in 0..dim {
            for j in 0..dim {
                let x = op[(i, j)];
                if x != zero() {
                    if (i.count_ones() + j.count_ones()) % 2 == 1 {
                        return Err(Error::InvalidParameter("operator does not conserve fermion parity".into()));
                    }
                    out.components[i] = out.components[i].add(&self.components[j].scale(x))?;
                }
            }
        }
        Ok(out)
    }
}

/// Ket `|mu c> = prod_k (1 - mu_k c_k c_k^dagger)|0>` with `c_k` in the ket slots.
fn coherent_ket(n: usize, mu: &[C64]) -> Result<GrassmannFockVector> {
    let mut v = GrassmannFockVector::vacuum(n)?;
    for k in 0..n {
        let term = v.apply_mode(k, true)?.left_mul(&GrassmannPoly::c(n, k)?.scale(-mu[k]))?;
        v = v.add(&term)?;
    }
    Ok(v)
}

/// `<lambda c| v` with `<lambda c| = <0| prod_k (1 + lambda_k c-bar_k c_k)`.
fn coherent_bra_apply(n: usize, lambda: &[C64], v: &GrassmannFockVector) -> Result<GrassmannPoly> {
    let mut w = v.clone();
    for k in 0..n {
        let term = w.apply_mode(k, false)?.left_mul(&GrassmannPoly::cbar(n, k)?.scale(lambda[k]))?;
        w = w.add(&term)?;
    }
    Ok(w.components[0].clone())
}

/// `<c|c'>` built from the operator definition in the `2^n` Fock space, with bra
/// generators scaled by `cbar` and ket generators by `cprime`. The result is
/// checked against `e^{sum_k cbar_k cprime_k c-bar_k c_k}`.
pub fn coherent_overlap(n: usize, cbar: &[C64], cprime: &[C64]) -> Result<GrassmannPoly> {
    if cbar.len() != n || cprime.len() != n {
        return Err(Error::InvalidParameter("coefficient vectors must have length n".into()));
    }
    let ket = coherent_ket(n, cprime)?;
    let overlap = coherent_bra_apply(n, cbar, &ket)?;
    let mut expo = GrassmannPoly::zero(n)?;
    for k in 0..n {
        expo.add_ordered(&[2 * k, 2 * k + 1], cbar[k] * cprime[k]);
    }
    let closed = g_exp(&expo)?;
    let d = overlap.max_abs_diff(&closed);
    if d > 1e-13 {
        return Err(Error::Consistency(format!("coherent overlap differs from exponential form by {d}")));
    }
    Ok(overlap)
}

/// `int prod dc-bar dc e^{-c-bar c} <-c| A |c>` for an even operator on `2^n` states.
pub fn coherent_trace(n: usize, op: &CMat) -> Result<C64> {
    let ones = vec![C64::new(1.0, 0.0); n];
    let minus = vec![C64::new(-1.0, 0.0); n];
    let ket = coherent_ket(n, &ones)?.apply_even_operator(op)?;
    let elem = coherent_bra_apply(n, &minus, &ket)?;
    let measure = g_exp(&bilinear(&crate::linalg::eye(n))?.scale(C64::new(-1.0, 0.0)))?;
    integrate_all(&g_mul(&measure, &elem)?)
}
