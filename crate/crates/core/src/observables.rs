//! Environment observables from system correlators: coupling energy, heat and
//! particle currents, and dressed environment Green's functions.
//!
//! Contour integrals use the trapezoid rule over grid steps. Each step
//! contributes `dt/2` at its two end points; an end point that coincides with
//! a fixed argument is evaluated on the side of the step (after it for the
//! step's start, before it for the step's end), so the jump of an ordered
//! function at equal times is integrated correctly. Correlators are physical
//! (no Grassmann branch signs), which makes the fermion formulas free of the
//! Keldysh parity.

use crate::contour::{ContourGrid, GridKind};
use crate::error::{Error, Result};
use crate::greens::{contour_green_ordered, Bath, Statistics};
use crate::influence::KernelMatrix;
use crate::linalg::CMat;
use crate::oracle::RealTimeEd;
use crate::pathsum::{correlator_table_boson, fermion_green_table, FermionDot, SystemModel};
use crate::{C64, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderSource {
    PathSum,
    Ed,
}

/// Contour-ordered system two-point function `<T_C x(j) x^dagger(k)>` on grid points.
pub trait CorrelatorProvider {
    fn grid(&self) -> &ContourGrid;
    fn statistics(&self) -> Statistics;
    fn source(&self) -> ProviderSource;
    /// Value at `(j, k)`; for `j == k` the flag says whether `x(j)` is the later factor.
    fn ordered(&self, j: usize, k: usize, j_later: bool) -> C64;
}

#[derive(Debug, Clone)]
pub struct TableProvider {
    pub grid: ContourGrid,
    pub statistics: Statistics,
    pub source: ProviderSource,
    /// `j`-later convention on the diagonal.
    pub values: CMat,
    pub earlier: Vec<C64>,
}

impl TableProvider {
    pub fn new(grid: &ContourGrid, statistics: Statistics, source: ProviderSource, values: CMat, earlier: Vec<C64>) -> Result<Self> {
        let l = grid.len();
        if values.shape() != (l, l) || earlier.len() != l {
            return Err(Error::GridMismatch("correlator table does not match the grid".into()));
        }
        if values.iter().chain(earlier.iter()).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Consistency("correlator table holds non-finite values".into()));
        }
        Ok(TableProvider { grid: grid.clone(), statistics, source, values, earlier })
    }

    /// `<T_C s s>` by path enumeration.
    pub fn boson_pathsum(model: &SystemModel, grid: &ContourGrid, kernel: &KernelMatrix) -> Result<Self> {
        let (t, _) = correlator_table_boson(model, grid, kernel)?;
        let earlier = (0..grid.len()).map(|j| t[(j, j)]).collect();
        Self::new(grid, Statistics::Boson, ProviderSource::PathSum, t, earlier)
    }

    /// `<T_C a a^dagger>` from the dot action.
    pub fn fermion_pathsum(grid: &ContourGrid, dot: &FermionDot, kernel: &KernelMatrix) -> Result<Self> {
        let (t, e) = fermion_green_table(grid, dot, kernel)?;
        Self::new(grid, Statistics::Fermion, ProviderSource::PathSum, t, e)
    }

    /// Exact `<T_C X Y>` for an operator pair, typically `(s, s)` or `(a, a^dagger)`.
    pub fn ed(rt: &RealTimeEd, grid: &ContourGrid, x: &CMat, y: &CMat, statistics: Statistics) -> Result<Self> {
        let (t, e) = rt.contour_table(grid, x, y, statistics == Statistics::Fermion)?;
        Self::new(grid, statistics, ProviderSource::Ed, t, e)
    }
}

impl CorrelatorProvider for TableProvider {
    fn grid(&self) -> &ContourGrid {
        &self.grid
    }
    fn statistics(&self) -> Statistics {
        self.statistics
    }
    fn source(&self) -> ProviderSource {
        self.source
    }
    fn ordered(&self, j: usize, k: usize, j_later: bool) -> C64 {
        if j == k && !j_later {
            self.earlier[j]
        } else {
            self.values[(j, k)]
        }
    }
}

/// Trapezoid node: grid point, side (`+1` just after, `-1` just before) and weight.
#[derive(Debug, Clone, Copy)]
struct Sample {
    node: usize,
    side: i8,
    weight: C64,
}

fn samples(grid: &ContourGrid) -> Vec<Sample> {
    let mut out = Vec::with_capacity(2 * grid.steps().len());
    for s in grid.steps() {
        let w = s.dt * 0.5;
        out.push(Sample { node: s.from, side: 1, weight: w });
        // the closing step ends at point 0 on the far side; periodicity lets
        // us evaluate it as "before" point 0
        out.push(Sample { node: s.to, side: -1, weight: w });
    }
    out
}

/// `Some(x later than y)`, or `None` when both sit on the same side of one node.
fn later(xn: usize, xs: i8, yn: usize, ys: i8) -> Option<bool> {
    if xn != yn {
        Some(xn > yn)
    } else if xs != ys {
        Some(xs > ys)
    } else {
        None
    }
}

fn ordered(f: impl Fn(bool) -> C64, cmp: Option<bool>) -> C64 {
    match cmp {
        Some(b) => f(b),
        None => (f(true) + f(false)) * 0.5,
    }
}

fn check(provider: &dyn CorrelatorProvider, bath: &Bath, t1: usize) -> Result<()> {
    if provider.statistics() != bath.spectral.statistics {
        return Err(Error::StatisticsMismatch("provider and environment statistics differ".into()));
    }
    let g = provider.grid();
    if t1 >= g.len() {
        return Err(Error::GridMismatch(format!("point {t1} is not on the grid")));
    }
    if g.kind != GridKind::Keldysh && bath.beta != g.beta {
        return Err(Error::Unsupported("thermal contours need the bath at the grid temperature".into()));
    }
    Ok(())
}

/// `sum_k weight_k V_k^2 F_0(w_k; p, q)` with the free function chosen by ordering.
fn bath_function(bath: &Bath, zp: C64, zq: C64, p_later: bool, weight: &dyn Fn(f64) -> f64) -> C64 {
    let stat = bath.spectral.statistics;
    bath.spectral
        .modes
        .iter()
        .map(|m| contour_green_ordered(stat, m.freq, zp, zq, p_later, bath.beta) * (m.coupling * m.coupling * weight(m.freq)))
        .sum()
}

/// `sum_x w_x F(t1, x) C(x, t1)` over the trapezoid nodes.
fn kernel_row_integral(provider: &dyn CorrelatorProvider, bath: &Bath, t1: usize, weight: &dyn Fn(f64) -> f64) -> C64 {
    let g = provider.grid();
    let z1 = g.points[t1].time;
    let mut acc = C64::new(0.0, 0.0);
    for s in samples(g) {
        let zx = g.points[s.node].time;
        let cmp = later(t1, 0, s.node, s.side);
        let v = ordered(|t1_later| bath_function(bath, z1, zx, t1_later, weight) * provider.ordered(s.node, t1, !t1_later), cmp);
        acc += v * s.weight;
    }
    acc
}

/// `<H_SE>` at contour point `t1`: `2 Re V<s b>` with `V<s b> = -i int_C Lambda C`
/// (bosons), or `2 Re V<a^dagger c>` with `V<a^dagger c> = i int_C Delta G_a` (fermions).
pub fn coupling_energy(provider: &dyn CorrelatorProvider, bath: &Bath, t1: usize) -> Result<f64> {
    check(provider, bath, t1)?;
    // Lambda = i V^2 D_0 and Delta = i V^2 G_0 in physical form
    let x = kernel_row_integral(provider, bath, t1, &|_| 1.0) * I;
    Ok(match provider.statistics() {
        Statistics::Boson => 2.0 * (x * -I).re,
        Statistics::Fermion => 2.0 * (x * I).re,
    })
}

fn keldysh_only(provider: &dyn CorrelatorProvider) -> Result<()> {
    if provider.grid().kind != GridKind::Keldysh {
        return Err(Error::Unsupported("currents are evaluated on the Keldysh contour".into()));
    }
    Ok(())
}

/// Energy flowing out of the bath, `-d<H_E>/dt = sum_k 2 w_k Im V_k<s b_k>`.
pub fn heat_current_boson(provider: &dyn CorrelatorProvider, bath: &Bath, t1: usize) -> Result<f64> {
    check(provider, bath, t1)?;
    keldysh_only(provider)?;
    if provider.statistics() != Statistics::Boson {
        return Err(Error::StatisticsMismatch("heat current of a boson bath".into()));
    }
    // V_k<s b_k> = -i int_C (i V_k^2 D_0) C = int_C V_k^2 D_0 C
    let x = kernel_row_integral(provider, bath, t1, &|w| w);
    Ok(2.0 * x.im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FermionCurrent {
    Energy,
    Particle,
}

/// Outflow from a fermion bath, `-d<N_E>/dt` or `-d<H_E>/dt`:
/// `2 Re int_C Delta_w(t1, t') <T_C a(t') a^dagger(t1)>` with `Delta_w = i sum_k w_k V_k^2 G_0`.
pub fn currents_fermion(provider: &dyn CorrelatorProvider, bath: &Bath, t1: usize, which: FermionCurrent) -> Result<f64> {
    check(provider, bath, t1)?;
    keldysh_only(provider)?;
    if provider.statistics() != Statistics::Fermion {
        return Err(Error::StatisticsMismatch("currents of a fermion bath".into()));
    }
    let x = match which {
        FermionCurrent::Particle => kernel_row_integral(provider, bath, t1, &|_| 1.0),
        FermionCurrent::Energy => kernel_row_integral(provider, bath, t1, &|e| e),
    };
    Ok(2.0 * (x * I).re)
}

/// Dressed Green's function of environment mode `mode`:
/// `F(p, q) = F_0(p, q) - i V^2 int_C int_C F_0(p, t') C(t', t'') F_0(t'', q)`.
pub fn dressed_environment_green(provider: &dyn CorrelatorProvider, bath: &Bath, mode: usize, p: usize, q: usize) -> Result<C64> {
    check(provider, bath, p)?;
    check(provider, bath, q)?;
    let m = *bath
        .spectral
        .modes
        .get(mode)
        .ok_or_else(|| Error::InvalidParameter(format!("bath has no mode {mode}")))?;
    let stat = bath.spectral.statistics;
    let g = provider.grid();
    let f0 = |zp: C64, zq: C64, later: bool| contour_green_ordered(stat, m.freq, zp, zq, later, bath.beta);
    let (zp, zq) = (g.points[p].time, g.points[q].time);
    let free = f0(zp, zq, p >= q);
    if m.coupling == 0.0 {
        return Ok(free);
    }
    let ss = samples(g);
    let left: Vec<C64> = ss
        .iter()
        .map(|s| s.weight * ordered(|p_later| f0(zp, g.points[s.node].time, p_later), later(p, 0, s.node, s.side)))
        .collect();
    let right: Vec<C64> = ss
        .iter()
        .map(|s| s.weight * ordered(|y_later| f0(g.points[s.node].time, zq, y_later), later(s.node, s.side, q, 0)))
        .collect();
    let mut acc = C64::new(0.0, 0.0);
    for (x, lx) in ss.iter().zip(left.iter()) {
        let mut row = C64::new(0.0, 0.0);
        for (y, ry) in ss.iter().zip(right.iter()) {
            let c = ordered(|x_later| provider.ordered(x.node, y.node, x_later), later(x.node, x.side, y.node, y.side));
            row += c * ry;
        }
        acc += lx * row;
    }
    Ok(free - I * m.coupling * m.coupling * acc)
}
