//! Discretized time contours: the imaginary axis, the closed Keldysh contour and
//! the L-shaped Kadanoff-Baym contour.
//!
//! Points are stored in contour order. The Keldysh turning point `t_N` exists once
//! and is tagged [`Branch::Forward`]. On the Kadanoff contour the last backward
//! point `t_0^-` coincides with the start of the imaginary branch, so it is stored
//! as the imaginary point `tau = 0`; the end of the imaginary branch (`tau = beta`)
//! closes back onto `t_0^+`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Forward,
    Backward,
    Imaginary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridKind {
    ImaginaryAxis,
    Keldysh,
    Kadanoff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourPoint {
    pub branch: Branch,
    /// Position along the full contour, strictly increasing in contour order.
    pub index: usize,
    /// `t` on real branches, `-i tau` on the imaginary branch.
    pub time: C64,
    /// Step count along the point's own branch (`k` in `t_k`, `m` in `tau_m`).
    pub k: usize,
    grid_id: u64,
}

impl ContourPoint {
    pub fn tau(&self) -> f64 {
        -self.time.im
    }

    pub fn real_time(&self) -> f64 {
        self.time.re
    }
}

/// One elementary propagation step `from -> to` along the contour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub from: usize,
    pub to: usize,
    /// Contour measure of the step: `+dt`, `-dt` or `-i dtau`.
    pub dt: C64,
    /// The step whose bra is the trace state: it carries the `<-c|` sign for fermions.
    pub closes_trace: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourGrid {
    pub kind: GridKind,
    pub beta: f64,
    pub t_f: f64,
    pub m: usize,
    pub n: usize,
    pub points: Vec<ContourPoint>,
    steps: Vec<Step>,
    incoming: Vec<Option<usize>>,
    outgoing: Vec<Option<usize>>,
    id: u64,
}

fn grid_id(kind: GridKind, beta: f64, t_f: f64, m: usize, n: usize) -> u64 {
    let mut h = DefaultHasher::new();
    kind.hash(&mut h);
    beta.to_bits().hash(&mut h);
    t_f.to_bits().hash(&mut h);
    m.hash(&mut h);
    n.hash(&mut h);
    h.finish()
}

/// Builds a grid. `t_f` and `n` are ignored for the imaginary axis; `m` only sets
/// `beta / m` bookkeeping on the Keldysh contour (the initial bath state is exact).
pub fn build_grid(kind: GridKind, beta: f64, t_f: f64, m: usize, n: usize) -> Result<ContourGrid> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    let (t_f, n) = match kind {
        GridKind::ImaginaryAxis => (0.0, 0),
        _ => {
            if !(t_f.is_finite() && t_f > 0.0) {
                return Err(Error::InvalidParameter(format!("t_f must be positive, got {t_f}")));
            }
            if n == 0 {
                return Err(Error::InvalidParameter("N must be at least 1".into()));
            }
            (t_f, n)
        }
    };
    let id = grid_id(kind, beta, t_f, m, n);
    let dtau = beta / m as f64;
    let dt = if n > 0 { t_f / n as f64 } else { 0.0 };
    let mut points = Vec::new();
    let mut push = |branch: Branch, time: C64, k: usize| {
        let index = points.len();
        points.push(ContourPoint { branch, index, time, k, grid_id: id });
    };
    let real = |k: usize| C64::new(k as f64 * dt, 0.0);
    let imag = |k: usize| C64::new(0.0, -(k as f64) * dtau);
    match kind {
        GridKind::ImaginaryAxis => {
            for k in 0..m {
                push(Branch::Imaginary, imag(k), k);
            }
        }
        GridKind::Keldysh => {
            for k in 0..=n {
                push(Branch::Forward, real(k), k);
            }
            for k in (0..n).rev() {
                push(Branch::Backward, real(k), k);
            }
        }
        GridKind::Kadanoff => {
            for k in 0..=n {
                push(Branch::Forward, real(k), k);
            }
            for k in (1..n).rev() {
                push(Branch::Backward, real(k), k);
            }
            for k in 0..m {
                push(Branch::Imaginary, imag(k), k);
            }
        }
    }

    let np = points.len();
    let fwd = C64::new(dt, 0.0);
    let bwd = C64::new(-dt, 0.0);
    let im = C64::new(0.0, -dtau);
    let mut steps = Vec::new();
    match kind {
        GridKind::ImaginaryAxis => {
            for j in 0..np - 1 {
                steps.push(Step { from: j, to: j + 1, dt: im, closes_trace: false });
            }
            steps.push(Step { from: np - 1, to: 0, dt: im, closes_trace: true });
        }
        GridKind::Keldysh => {
            for j in 0..n {
                steps.push(Step { from: j, to: j + 1, dt: fwd, closes_trace: j + 1 == n });
            }
            for j in n..2 * n {
                steps.push(Step { from: j, to: j + 1, dt: bwd, closes_trace: false });
            }
        }
        GridKind::Kadanoff => {
            for j in 0..n {
                steps.push(Step { from: j, to: j + 1, dt: fwd, closes_trace: false });
            }
            for j in n..2 * n {
                steps.push(Step { from: j, to: j + 1, dt: bwd, closes_trace: false });
            }
            for j in 2 * n..np - 1 {
                steps.push(Step { from: j, to: j + 1, dt: im, closes_trace: false });
            }
            steps.push(Step { from: np - 1, to: 0, dt: im, closes_trace: true });
        }
    }
    let mut incoming = vec![None; np];
    let mut outgoing = vec![None; np];
    for (s, st) in steps.iter().enumerate() {
        incoming[st.to] = Some(s);
        outgoing[st.from] = Some(s);
    }
    Ok(ContourGrid { kind, beta, t_f, m, n, points, steps, incoming, outgoing, id })
}

impl ContourGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dtau(&self) -> f64 {
        self.beta / self.m as f64
    }

    pub fn dt(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.t_f / self.n as f64
        }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// The step arriving at point `j`, if any (Keldysh `t_0^+` has none).
    pub fn incoming(&self, j: usize) -> Option<&Step> {
        self.incoming[j].map(|s| &self.steps[s])
    }

    /// The step leaving point `j`, if any (Keldysh `t_0^-` has none).
    pub fn outgoing(&self, j: usize) -> Option<&Step> {
        self.outgoing[j].map(|s| &self.steps[s])
    }

    /// Keldysh only: `(bra, ket)` point indices of the initial density matrix element.
    pub fn initial_link(&self) -> Option<(usize, usize)> {
        match self.kind {
            GridKind::Keldysh => Some((0, 2 * self.n)),
            _ => None,
        }
    }

    pub fn point(&self, index: usize) -> Result<&ContourPoint> {
        self.points
            .get(index)
            .ok_or_else(|| Error::InvalidParameter(format!("point index {index} outside grid of {} points", self.len())))
    }

    pub fn contains(&self, p: &ContourPoint) -> bool {
        p.grid_id == self.id && p.index < self.points.len() && self.points[p.index] == *p
    }

    /// Fingerprint of the construction parameters.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn same_grid(&self, other: &ContourGrid) -> bool {
        self.id == other.id && self.points.len() == other.points.len()
    }

    pub fn forward(&self, k: usize) -> Result<usize> {
        match self.kind {
            GridKind::Keldysh | GridKind::Kadanoff if k <= self.n => Ok(k),
            _ => Err(Error::InvalidParameter(format!("no forward point t_{k}"))),
        }
    }

    /// Backward point `t_k^-`; `k = N` resolves to the shared turning point.
    /// On the Kadanoff contour `t_0^-` is the imaginary point `tau = 0`.
    pub fn backward(&self, k: usize) -> Result<usize> {
        match self.kind {
            GridKind::Keldysh | GridKind::Kadanoff if k <= self.n => Ok(2 * self.n - k),
            _ => Err(Error::InvalidParameter(format!("no backward point t_{k}"))),
        }
    }

    pub fn imaginary(&self, m: usize) -> Result<usize> {
        match self.kind {
            GridKind::ImaginaryAxis if m < self.m => Ok(m),
            GridKind::Kadanoff if m < self.m => Ok(2 * self.n + m),
            _ => Err(Error::InvalidParameter(format!("no imaginary point tau_{m}"))),
        }
    }

    /// Relative Keldysh branch sign with the turning point counted on the
    /// backward branch; `+1` everywhere on other contours.
    pub fn keldysh_parity(&self, j: usize) -> f64 {
        if self.kind == GridKind::Keldysh && j >= self.n {
            -1.0
        } else {
            1.0
        }
    }
}

/// Integration measure attached to a point by its branch.
pub fn measure(point: &ContourPoint, grid: &ContourGrid) -> Result<C64> {
    if !grid.contains(point) {
        return Err(Error::GridMismatch("point does not belong to grid".into()));
    }
    Ok(match point.branch {
        Branch::Forward => C64::new(grid.dt(), 0.0),
        Branch::Backward => C64::new(-grid.dt(), 0.0),
        Branch::Imaginary => C64::new(0.0, -grid.dtau()),
    })
}

/// Strict contour order: true iff `p` comes earlier than `q`.
pub fn contour_precedes(p: &ContourPoint, q: &ContourPoint) -> Result<bool> {
    if p.grid_id != q.grid_id {
        return Err(Error::GridMismatch("points come from different grids".into()));
    }
    Ok(p.index < q.index)
}
