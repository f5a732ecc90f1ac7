//! System path sums. Bosons: explicit enumeration of coupling-operator
//! eigenvalue paths weighted by the bare propagator and the influence
//! functional. Fermions: the dot action plus hybridization is Gaussian, so the
//! partition function is a determinant and correlators are inverse elements.

use rayon::prelude::*;

use crate::contour::{ContourGrid, ContourPoint, GridKind};
use crate::error::{Error, Result};
use crate::gaussian::{step_action, Convention};
use crate::greens::Statistics;
use crate::influence::{step_separation, KernelMatrix};
use crate::linalg::{self, CMat, HermitianEigen};
use crate::C64;

/// Hard cap on enumerated paths.
pub const MAX_PATHS: u64 = 1 << 24;
const BLOCKS: u64 = 64;

#[derive(Debug, Clone)]
pub struct SystemModel {
    pub dimension: usize,
    pub hamiltonian: CMat,
    /// Written in its own eigenbasis, so it must be diagonal.
    pub coupling_operator: CMat,
    /// `rho_S(0)`, used on the Keldysh contour only.
    pub initial_density: Option<CMat>,
}

impl SystemModel {
    pub fn new(hamiltonian: CMat, coupling_operator: CMat, initial_density: Option<CMat>) -> Result<Self> {
        let d = hamiltonian.nrows();
        if d == 0 || !hamiltonian.is_square() || coupling_operator.shape() != (d, d) {
            return Err(Error::InvalidParameter("system matrices must be square and of equal size".into()));
        }
        if !linalg::is_hermitian(&hamiltonian, 1e-12) {
            return Err(Error::NonHermitian("system Hamiltonian".into()));
        }
        for i in 0..d {
            for j in 0..d {
                let z = coupling_operator[(i, j)];
                if (i != j && z.norm() > 0.0) || (i == j && z.im != 0.0) {
                    return Err(Error::InvalidParameter("coupling operator must be real diagonal in the path basis".into()));
                }
            }
        }
        if let Some(rho) = &initial_density {
            if rho.shape() != (d, d) || !linalg::is_hermitian(rho, 1e-12) {
                return Err(Error::InvalidParameter("initial density must be a Hermitian d x d matrix".into()));
            }
            if (linalg::trace(rho) - C64::new(1.0, 0.0)).norm() > 1e-12 {
                return Err(Error::InvalidParameter("initial density must have unit trace".into()));
            }
            if HermitianEigen::new(rho)?.min_value() < -1e-12 {
                return Err(Error::InvalidParameter("initial density must be positive".into()));
            }
        }
        Ok(SystemModel { dimension: d, hamiltonian, coupling_operator, initial_density })
    }

    pub fn coupling_values(&self) -> Vec<f64> {
        (0..self.dimension).map(|i| self.coupling_operator[(i, i)].re).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathSumMethod {
    Enumerate,
    /// Kernel entries further apart than `k_mem` steps are dropped.
    MemoryTruncated { k_mem: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSumResult {
    pub value: C64,
    pub n_paths: u64,
    pub method: PathSumMethod,
}

/// Precomputed bare propagator elements per step.
struct Propagators {
    steps: Vec<(usize, usize, CMat)>,
    rho: Option<(usize, usize, CMat)>,
}

impl Propagators {
    fn new(model: &SystemModel, grid: &ContourGrid) -> Result<Self> {
        let eig = HermitianEigen::new(&model.hamiltonian)?;
        let steps = grid.steps().iter().map(|s| (s.from, s.to, eig.apply(|e| (-crate::I * s.dt * e).exp()))).collect();
        let rho = match grid.initial_link() {
            Some((bra, ket)) => {
                let r = model
                    .initial_density
                    .clone()
                    .ok_or_else(|| Error::InvalidParameter("Keldysh contour needs an initial system density".into()))?;
                Some((bra, ket, r))
            }
            None => None,
        };
        Ok(Propagators { steps, rho })
    }

    fn weight(&self, states: &[usize]) -> C64 {
        let mut w = C64::new(1.0, 0.0);
        for (from, to, u) in &self.steps {
            w *= u[(states[*to], states[*from])];
            if w == C64::new(0.0, 0.0) {
                return w;
            }
        }
        if let Some((bra, ket, r)) = &self.rho {
            w *= r[(states[*bra], states[*ket])];
        }
        w
    }
}

/// Bare system weight `K[s]` of a path given as basis indices, one per point.
pub fn system_propagator_weight(states: &[usize], model: &SystemModel, grid: &ContourGrid) -> Result<C64> {
    if states.len() != grid.len() {
        return Err(Error::InvalidParameter(format!("path has {} entries for {} grid points", states.len(), grid.len())));
    }
    if states.iter().any(|&s| s >= model.dimension) {
        return Err(Error::InvalidParameter("path state outside the system basis".into()));
    }
    Ok(Propagators::new(model, grid)?.weight(states))
}

fn path_count(d: usize, l: usize) -> Result<u64> {
    let count = (d as u128).checked_pow(l as u32).unwrap_or(u128::MAX);
    if count > MAX_PATHS as u128 {
        return Err(Error::PathCountOverflow { count, limit: MAX_PATHS });
    }
    Ok(count as u64)
}

fn check_kernel(model: &SystemModel, grid: &ContourGrid, kernel: &KernelMatrix) -> Result<()> {
    if !kernel.grid.same_grid(grid) {
        return Err(Error::GridMismatch("kernel was built on another grid".into()));
    }
    if kernel.statistics != Statistics::Boson {
        return Err(Error::StatisticsMismatch("boson path sum needs a boson kernel".into()));
    }
    if grid.kind == GridKind::Keldysh && model.initial_density.is_none() {
        return Err(Error::InvalidParameter("Keldysh contour needs an initial system density".into()));
    }
    Ok(())
}

/// Visits every path in modular Gray-code order, keeping the bilinear
/// exponent `sum s K s` up to date with O(L) work per path. Blocks are reduced
/// in a fixed order so results do not depend on scheduling.
fn enumerate<A, V, F>(model: &SystemModel, grid: &ContourGrid, kernel: &CMat, init: impl Fn() -> A + Sync, visit: V, merge: F) -> Result<(A, u64)>
where
    A: Send,
    V: Fn(&mut A, &[usize], &[f64], C64) + Sync,
    F: Fn(&mut A, A),
{
    let d = model.dimension;
    let l = grid.len();
    let total = path_count(d, l)?;
    let props = Propagators::new(model, grid)?;
    let eig = model.coupling_values();
    let nblocks = BLOCKS.min(total);
    let parts: Vec<A> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let start = b * total / nblocks;
            let end = (b + 1) * total / nblocks;
            let mut acc = init();
            // counter digits (base d, least significant first) and Gray digits
            let mut a = vec![0usize; l];
            let mut c = start;
            for digit in a.iter_mut() {
                *digit = (c % d as u64) as usize;
                c /= d as u64;
            }
            let mut g: Vec<usize> = (0..l).map(|i| (a[i] + d - if i + 1 < l { a[i + 1] } else { 0 }) % d).collect();
            let mut v: Vec<f64> = g.iter().map(|&s| eig[s]).collect();
            let mut r: Vec<C64> = (0..l).map(|j| (0..l).map(|k| kernel[(j, k)] * v[k]).sum()).collect();
            let mut cc: Vec<C64> = (0..l).map(|k| (0..l).map(|j| v[j] * kernel[(j, k)]).sum()).collect();
            let mut w: C64 = (0..l).map(|j| r[j] * v[j]).sum();
            let mut n = start;
            loop {
                let kw = props.weight(&g);
                if kw != C64::new(0.0, 0.0) {
                    visit(&mut acc, &g, &v, kw * (-w).exp());
                }
                n += 1;
                if n >= end {
                    break;
                }
                let mut k = 0;
                while a[k] == d - 1 {
                    a[k] = 0;
                    k += 1;
                }
                a[k] += 1;
                let new = (g[k] + 1) % d;
                let delta = eig[new] - eig[g[k]];
                g[k] = new;
                if delta != 0.0 {
                    w += (r[k] + cc[k]) * delta + kernel[(k, k)] * delta * delta;
                    for j in 0..l {
                        r[j] += kernel[(j, k)] * delta;
                        cc[j] += kernel[(k, j)] * delta;
                    }
                    v[k] = eig[new];
                }
            }
            acc
        })
        .collect();
    let mut parts = parts.into_iter();
    let mut acc = parts.next().unwrap_or_else(&init);
    for p in parts {
        merge(&mut acc, p);
    }
    Ok((acc, total))
}

fn max_separation(grid: &ContourGrid) -> usize {
    let mut m = 0;
    for j in 0..grid.len() {
        for k in 0..grid.len() {
            m = m.max(step_separation(grid, j, k));
        }
    }
    m
}

fn effective_kernel(grid: &ContourGrid, kernel: &KernelMatrix, method: PathSumMethod) -> KernelMatrix {
    match method {
        PathSumMethod::MemoryTruncated { k_mem } if k_mem < max_separation(grid) => kernel.windowed(k_mem),
        _ => kernel.clone(),
    }
}

pub fn partition_function_boson(model: &SystemModel, grid: &ContourGrid, kernel: &KernelMatrix, method: PathSumMethod) -> Result<PathSumResult> {
    check_kernel(model, grid, kernel)?;
    let k = effective_kernel(grid, kernel, method);
    let (value, n_paths) = enumerate(model, grid, &k.entries, || C64::new(0.0, 0.0), |acc, _, _, w| *acc += w, |a, b| *a += b)?;
    Ok(PathSumResult { value, n_paths, method })
}

fn insertion_indices(grid: &ContourGrid, points: &[ContourPoint]) -> Result<Vec<usize>> {
    points
        .iter()
        .map(|p| if grid.contains(p) { Ok(p.index) } else { Err(Error::GridMismatch("insertion point is not on the grid".into())) })
        .collect()
}

/// `<T_C s(p_1) ... s(p_n)>` by the same enumeration.
pub fn correlator_boson(model: &SystemModel, grid: &ContourGrid, kernel: &KernelMatrix, insertions: &[ContourPoint]) -> Result<C64> {
    check_kernel(model, grid, kernel)?;
    let idx = insertion_indices(grid, insertions)?;
    let (acc, _) = enumerate(
        model,
        grid,
        &kernel.entries,
        || (C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
        |acc, _, v, w| {
            acc.0 += w;
            acc.1 += w * idx.iter().map(|&j| v[j]).product::<f64>();
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
        },
    )?;
    if acc.0.norm() == 0.0 {
        return Err(Error::Singular("partition function vanished".into()));
    }
    Ok(acc.1 / acc.0)
}

/// All two-point functions `<T_C s(j) s(k)>` in one enumeration, plus `Z_S`.
pub fn correlator_table_boson(model: &SystemModel, grid: &ContourGrid, kernel: &KernelMatrix) -> Result<(CMat, C64)> {
    check_kernel(model, grid, kernel)?;
    let l = grid.len();
    let (acc, _) = enumerate(
        model,
        grid,
        &kernel.entries,
        || (C64::new(0.0, 0.0), CMat::zeros(l, l)),
        |acc, _, v, w| {
            acc.0 += w;
            for j in 0..l {
                let wj = w * v[j];
                for k in 0..l {
                    acc.1[(j, k)] += wj * v[k];
                }
            }
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
        },
    )?;
    if acc.0.norm() == 0.0 {
        return Err(Error::Singular("partition function vanished".into()));
    }
    Ok((acc.1 / acc.0, acc.0))
}

/// Noninteracting dot `H_S = eps_d a^dagger a` with initial occupation `p_1`
/// (Keldysh only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FermionDot {
    pub eps_d: f64,
    pub initial_occupation: f64,
    pub convention: Convention,
}

impl FermionDot {
    pub fn new(eps_d: f64, initial_occupation: f64, convention: Convention) -> Result<Self> {
        if !eps_d.is_finite() {
            return Err(Error::InvalidParameter("dot level must be finite".into()));
        }
        if !(0.0..1.0).contains(&initial_occupation) {
            return Err(Error::Unsupported(format!("initial dot occupation must lie in [0, 1), got {initial_occupation}")));
        }
        Ok(FermionDot { eps_d, initial_occupation, convention })
    }
}

/// Full quadratic dot action `A = A_sys + Delta`.
pub fn fermion_action(grid: &ContourGrid, dot: &FermionDot, kernel: &KernelMatrix) -> Result<CMat> {
    if !kernel.grid.same_grid(grid) {
        return Err(Error::GridMismatch("kernel was built on another grid".into()));
    }
    if kernel.statistics != Statistics::Fermion {
        return Err(Error::StatisticsMismatch("fermion action needs a hybridization kernel".into()));
    }
    let p1 = dot.initial_occupation;
    if !(0.0..1.0).contains(&p1) {
        return Err(Error::Unsupported("initial dot occupation must lie in [0, 1)".into()));
    }
    let r = C64::new(p1 / (1.0 - p1), 0.0);
    Ok(step_action(grid, Statistics::Fermion, dot.eps_d, dot.convention, r) + &kernel.entries)
}

/// `Z_S = det A` (times `p_0` on the Keldysh contour, where `Tr rho_S = 1`).
pub fn partition_function_fermion(grid: &ContourGrid, dot: &FermionDot, kernel: &KernelMatrix) -> Result<C64> {
    let a = fermion_action(grid, dot, kernel)?;
    let det = linalg::determinant(&a);
    Ok(if grid.kind == GridKind::Keldysh { det * (1.0 - dot.initial_occupation) } else { det })
}

/// Physical correlators: `table[(j, k)] = <T_C a(j) a^dagger(k)>` with the
/// annihilator taken later at coincident points, and the `a^dagger`-later
/// diagonal `-<a^dagger a>` returned separately.
pub fn fermion_green_table(grid: &ContourGrid, dot: &FermionDot, kernel: &KernelMatrix) -> Result<(CMat, Vec<C64>)> {
    let a = fermion_action(grid, dot, kernel)?;
    let mut inv = linalg::inverse(&a)?;
    let l = grid.len();
    for j in 0..l {
        for k in 0..l {
            inv[(j, k)] *= grid.keldysh_parity(j) * grid.keldysh_parity(k);
        }
    }
    let earlier = (0..l).map(|j| inv[(j, j)] - 1.0).collect();
    Ok((inv, earlier))
}

pub fn correlator_fermion(grid: &ContourGrid, dot: &FermionDot, kernel: &KernelMatrix, p: &ContourPoint, q: &ContourPoint) -> Result<C64> {
    let idx = insertion_indices(grid, &[*p, *q])?;
    let a = fermion_action(grid, dot, kernel)?;
    let inv = linalg::inverse(&a)?;
    Ok(inv[(idx[0], idx[1])] * grid.keldysh_parity(idx[0]) * grid.keldysh_parity(idx[1]))
}

fn distinct_pair(i: usize, j: usize) -> Result<()> {
    if i == j {
        return Err(Error::InvalidParameter("four-point insertions need distinct annihilator and creator points".into()));
    }
    Ok(())
}

fn parity4(grid: &ContourGrid, idx: &[usize]) -> f64 {
    idx.iter().map(|&j| grid.keldysh_parity(j)).product()
}

/// `<T_C a(i) a(j) a^dagger(k) a^dagger(l)>` by Wick pairing of inverse elements.
pub fn four_point_fermion(grid: &ContourGrid, dot: &FermionDot, kernel: &KernelMatrix, pts: [&ContourPoint; 4]) -> Result<C64> {
    let idx = insertion_indices(grid, &[*pts[0], *pts[1], *pts[2], *pts[3]])?;
    distinct_pair(idx[0], idx[1])?;
    distinct_pair(idx[2], idx[3])?;
    let g = linalg::inverse(&fermion_action(grid, dot, kernel)?)?;
    let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
    Ok((g[(i, l)] * g[(j, k)] - g[(i, k)] * g[(j, l)]) * parity4(grid, &idx))
}

/// The same four-point function from the complementary minor of `A`
/// (Jacobi's identity), without forming the inverse.
pub fn four_point_fermion_minor(grid: &ContourGrid, dot: &FermionDot, kernel: &KernelMatrix, pts: [&ContourPoint; 4]) -> Result<C64> {
    let idx = insertion_indices(grid, &[*pts[0], *pts[1], *pts[2], *pts[3]])?;
    distinct_pair(idx[0], idx[1])?;
    distinct_pair(idx[2], idx[3])?;
    let a = fermion_action(grid, dot, kernel)?;
    let n = a.nrows();
    // det (A^{-1})[rows {i,j}, cols {l,k}] = (-1)^{sum} det A[without {l,k}, without {i,j}] / det A
    let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
    let (r0, r1) = (i.min(j), i.max(j));
    let (c0, c1) = (l.min(k), l.max(k));
    let mut sign = if (i > j) != (l > k) { -1.0 } else { 1.0 };
    let rows: Vec<usize> = (0..n).filter(|&x| x != c0 && x != c1).collect();
    let cols: Vec<usize> = (0..n).filter(|&x| x != r0 && x != r1).collect();
    let sub = CMat::from_fn(n - 2, n - 2, |x, y| a[(rows[x], cols[y])]);
    if (r0 + r1 + c0 + c1) % 2 == 1 {
        sign = -sign;
    }
    let det = linalg::determinant(&a);
    if det.norm() == 0.0 {
        return Err(Error::Singular("dot action is singular".into()));
    }
    Ok(linalg::determinant(&sub) / det * sign * parity4(grid, &idx))
}
