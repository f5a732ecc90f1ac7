//! Independent references: exact diagonalization in a truncated Fock space
//! (bosons) or the full Fock space of dot plus levels (fermions), and the
//! Trotterized finite-M propagator that the path-integral pipeline must match
//! exactly.

use crate::contour::{ContourGrid, GridKind};
use crate::error::{Error, Result};
use crate::gaussian::{self, build_action_with_beta, step_factor, Convention};
use crate::greens::{fermi_occupation, Mode, SpectralFunction, Statistics};
use crate::linalg::{self, kron, CMat, HermitianEigen};
use crate::pathsum::SystemModel;
use crate::{C64, I};

/// Tail weights above this are flagged.
pub const TAIL_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockTruncation {
    pub n_max: usize,
}

impl FockTruncation {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be positive".into()));
        }
        Ok(FockTruncation { n_max })
    }

    /// Thermal weight `e^{-beta w n_max}` of the first discarded level.
    pub fn tail_weight(&self, beta: f64, omega: f64) -> f64 {
        (-beta * omega * self.n_max as f64).exp()
    }

    pub fn check(&self, beta: f64, spectral: &SpectralFunction) -> Result<()> {
        for m in &spectral.modes {
            let t = self.tail_weight(beta, m.freq);
            if t >= TAIL_LIMIT {
                return Err(Error::Truncation(format!("Fock tail e^(-beta w n_max) = {t:.3e} for w = {}", m.freq)));
            }
        }
        Ok(())
    }
}

/// `b` on `{|0>, ..., |n_max>}`.
pub fn boson_annihilation(n_max: usize) -> CMat {
    let mut b = CMat::zeros(n_max + 1, n_max + 1);
    for n in 1..=n_max {
        b[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    b
}

/// Annihilators `c_0 .. c_{n-1}` in the basis `prod_{i in S, ascending} c_i^dagger |0>`,
/// indexed by the bitmask of `S`.
pub fn fermion_annihilators(n: usize) -> Vec<CMat> {
    let dim = 1usize << n;
    (0..n)
        .map(|i| {
            let mut c = CMat::zeros(dim, dim);
            for s in 0..dim {
                if s >> i & 1 == 1 {
                    let below = (s & ((1 << i) - 1)).count_ones();
                    c[(s & !(1 << i), s)] = C64::new(if below % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
                }
            }
            c
        })
        .collect()
}

/// Many-body operator `Gamma(T)` with `Gamma(T) c_j^dagger |0> = sum_i T_ij c_i^dagger |0>`;
/// its elements are the minors `det T[R, S]`. Coherent-state elements are `e^{psi-bar T psi}`.
pub fn fock_gamma(t: &CMat) -> CMat {
    let n = t.nrows();
    let dim = 1usize << n;
    let mut out = CMat::zeros(dim, dim);
    let bits = |s: usize| -> Vec<usize> { (0..n).filter(|&i| s >> i & 1 == 1).collect() };
    for r in 0..dim {
        let rb = bits(r);
        for s in 0..dim {
            if r.count_ones() != s.count_ones() {
                continue;
            }
            let sb = bits(s);
            out[(r, s)] = if rb.is_empty() { C64::new(1.0, 0.0) } else { linalg::determinant(&CMat::from_fn(rb.len(), rb.len(), |x, y| t[(rb[x], sb[y])])) };
        }
    }
    out
}

/// Single-particle matrix of the dot (orbital 0) hybridized with bath levels.
pub fn single_particle_hamiltonian(eps_d: f64, spectral: &SpectralFunction) -> CMat {
    let n = spectral.modes.len() + 1;
    let mut h = CMat::zeros(n, n);
    h[(0, 0)] = C64::new(eps_d, 0.0);
    for (k, m) in spectral.modes.iter().enumerate() {
        h[(k + 1, k + 1)] = C64::new(m.freq, 0.0);
        h[(0, k + 1)] = C64::new(m.coupling, 0.0);
        h[(k + 1, 0)] = C64::new(m.coupling, 0.0);
    }
    h
}

/// Exact Hamiltonian and its parts on the full Hilbert space.
#[derive(Debug, Clone)]
pub struct EdSystem {
    pub statistics: Statistics,
    pub h: CMat,
    pub h_s: CMat,
    pub h_e: CMat,
    pub h_se: CMat,
    /// `s` (boson) or the dot annihilator `a` (fermion).
    pub system_op: CMat,
    /// `b_k` or `c_k`.
    pub env_ops: Vec<CMat>,
    /// Per-mode coupling terms, summing to `h_se`.
    pub coupling_terms: Vec<CMat>,
    pub modes: Vec<Mode>,
    /// Small system matrices used by the Trotterized reference.
    pub system_hamiltonian: CMat,
    pub system_coupling: CMat,
    pub truncation: Option<FockTruncation>,
    pub eigen: HermitianEigen,
}

impl EdSystem {
    /// System of dimension d times one truncated oscillator per mode,
    /// `H = H_S + sum w_k b_k^dagger b_k + s sum V_k (b_k + b_k^dagger)`.
    pub fn boson(model: &SystemModel, spectral: &SpectralFunction, truncation: FockTruncation) -> Result<Self> {
        if spectral.statistics != Statistics::Boson {
            return Err(Error::StatisticsMismatch("boson ED needs boson modes".into()));
        }
        let d = model.dimension;
        let nb = truncation.n_max + 1;
        let n_modes = spectral.modes.len();
        let env_dim = nb.pow(n_modes as u32);
        if d * env_dim > 4096 {
            return Err(Error::SizeLimit(format!("Hilbert space of dimension {} is too large for dense ED", d * env_dim)));
        }
        let b = boson_annihilation(truncation.n_max);
        let id_b = linalg::eye(nb);
        let id_s = linalg::eye(d);
        // embeds a single-mode operator on mode k
        let embed = |op: &CMat, k: usize| -> CMat {
            let mut env = linalg::eye(1);
            for j in 0..n_modes {
                env = kron(&env, if j == k { op } else { &id_b });
            }
            kron(&id_s, &env)
        };
        let id_e = linalg::eye(env_dim);
        let h_s = kron(&model.hamiltonian, &id_e);
        let s_full = kron(&model.coupling_operator, &id_e);
        let mut h_e = CMat::zeros(d * env_dim, d * env_dim);
        let mut h_se = h_e.clone();
        let mut env_ops = Vec::new();
        let mut coupling_terms = Vec::new();
        for (k, m) in spectral.modes.iter().enumerate() {
            let bk = embed(&b, k);
            let nk = bk.adjoint() * &bk;
            h_e += nk * C64::new(m.freq, 0.0);
            let term = &s_full * (&bk + bk.adjoint()) * C64::new(m.coupling, 0.0);
            h_se += &term;
            coupling_terms.push(term);
            env_ops.push(bk);
        }
        let h = &h_s + &h_e + &h_se;
        let eigen = HermitianEigen::new(&h)?;
        Ok(EdSystem {
            statistics: Statistics::Boson,
            h,
            h_s,
            h_e,
            h_se,
            system_op: s_full,
            env_ops,
            coupling_terms,
            modes: spectral.modes.clone(),
            system_hamiltonian: model.hamiltonian.clone(),
            system_coupling: model.coupling_operator.clone(),
            truncation: Some(truncation),
            eigen,
        })
    }

    /// Dot `eps_d a^dagger a` hybridized with levels, `sum V_k (a^dagger c_k + c_k^dagger a)`.
    pub fn fermion(eps_d: f64, spectral: &SpectralFunction) -> Result<Self> {
        if spectral.statistics != Statistics::Fermion {
            return Err(Error::StatisticsMismatch("fermion ED needs fermion levels".into()));
        }
        let n = spectral.modes.len() + 1;
        if n > 11 {
            return Err(Error::SizeLimit("too many levels for dense Fock-space ED".into()));
        }
        let c = fermion_annihilators(n);
        let dim = 1usize << n;
        let a = c[0].clone();
        let h_s = a.adjoint() * &a * C64::new(eps_d, 0.0);
        let mut h_e = CMat::zeros(dim, dim);
        let mut h_se = CMat::zeros(dim, dim);
        let mut coupling_terms = Vec::new();
        for (k, m) in spectral.modes.iter().enumerate() {
            let ck = &c[k + 1];
            h_e += ck.adjoint() * ck * C64::new(m.freq, 0.0);
            let hop = a.adjoint() * ck;
            let term = (&hop + hop.adjoint()) * C64::new(m.coupling, 0.0);
            h_se += &term;
            coupling_terms.push(term);
        }
        let h = &h_s + &h_e + &h_se;
        let eigen = HermitianEigen::new(&h)?;
        Ok(EdSystem {
            statistics: Statistics::Fermion,
            h,
            h_s,
            h_e,
            h_se,
            system_op: a,
            env_ops: c[1..].to_vec(),
            coupling_terms,
            modes: spectral.modes.clone(),
            system_hamiltonian: CMat::from_element(1, 1, C64::new(eps_d, 0.0)),
            system_coupling: CMat::zeros(1, 1),
            truncation: None,
            eigen,
        })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn number_op(&self, k: usize) -> CMat {
        self.env_ops[k].adjoint() * &self.env_ops[k]
    }

    /// `-i [H_SE^k, O_k]` summed over the selected modes, with `O_k = w_k n_k`
    /// (energy) or `n_k` (particles): the rate of loss from those modes.
    pub fn outflow_operator(&self, modes: &[usize], energy: bool) -> CMat {
        let dim = self.dim();
        let mut out = CMat::zeros(dim, dim);
        for &k in modes {
            let mut o = self.number_op(k);
            if energy {
                o *= C64::new(self.modes[k].freq, 0.0);
            }
            let t = &self.coupling_terms[k];
            out += (t * &o - &o * t) * (-I);
        }
        out
    }

    /// Eigenvalues shifted so the ground state sits at zero.
    fn shifted(&self) -> (Vec<f64>, f64) {
        let e0 = self.eigen.min_value();
        (self.eigen.values.iter().map(|e| e - e0).collect(), e0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdPartition {
    pub z: f64,
    pub z_e0: f64,
    pub z_s: f64,
}

/// `Z = Tr e^{-beta H}`, the free environment `Z_E^0` and `Z_S = Z / Z_E^0`.
pub fn ed_partition(sys: &EdSystem, beta: f64) -> Result<EdPartition> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter("beta must be positive".into()));
    }
    let z: f64 = sys.eigen.values.iter().map(|e| (-beta * e).exp()).sum();
    let z_e0: f64 = sys
        .modes
        .iter()
        .map(|m| {
            let det = gaussian::closed_form_determinant(sys.statistics, m.freq, beta);
            if sys.statistics == Statistics::Boson { 1.0 / det } else { det }
        })
        .product();
    Ok(EdPartition { z, z_e0, z_s: z / z_e0 })
}

/// Dot plus levels through the single-particle spectrum:
/// `Z = prod (1 + e^{-beta lambda})` and `Z_S = Z / prod (1 + e^{-beta e_k})`.
pub fn fermion_single_particle_partition(eps_d: f64, spectral: &SpectralFunction, beta: f64) -> Result<EdPartition> {
    let h = single_particle_hamiltonian(eps_d, spectral);
    let e = HermitianEigen::new(&h)?;
    let z: f64 = e.values.iter().map(|l| 1.0 + (-beta * l).exp()).product();
    let z_e0: f64 = spectral.modes.iter().map(|m| 1.0 + (-beta * m.freq).exp()).product();
    Ok(EdPartition { z, z_e0, z_s: z / z_e0 })
}

/// `Tr[e^{-beta H} O] / Z`.
pub fn thermal_expectation(sys: &EdSystem, beta: f64, op: &CMat) -> C64 {
    let (e, _) = sys.shifted();
    let o = sys.eigen.to_eigenbasis(op);
    let mut num = C64::new(0.0, 0.0);
    let mut z = 0.0;
    for (m, em) in e.iter().enumerate() {
        let w = (-beta * em).exp();
        z += w;
        num += o[(m, m)] * w;
    }
    num / z
}

/// `<T A(tau1) B(tau2)>` with `X(tau) = e^{tau H} X e^{-tau H}`; `fermionic`
/// adds the reordering sign. Coincident times put `A` on the left.
pub fn ed_imaginary_correlator(sys: &EdSystem, beta: f64, tau1: f64, tau2: f64, a: &CMat, b: &CMat, fermionic: bool) -> Result<C64> {
    for t in [tau1, tau2] {
        if !(0.0..=beta).contains(&t) {
            return Err(Error::Domain(format!("tau = {t} outside [0, {beta}]")));
        }
    }
    let (x, y, hi, lo, sign) = if tau1 >= tau2 { (a, b, tau1, tau2, 1.0) } else { (b, a, tau2, tau1, if fermionic { -1.0 } else { 1.0 }) };
    let (e, _) = sys.shifted();
    let xe = sys.eigen.to_eigenbasis(x);
    let ye = sys.eigen.to_eigenbasis(y);
    let d = hi - lo;
    let mut num = C64::new(0.0, 0.0);
    let mut z = 0.0;
    for m in 0..e.len() {
        z += (-beta * e[m]).exp();
        for n in 0..e.len() {
            num += xe[(m, n)] * ye[(n, m)] * (-(beta - d) * e[m] - d * e[n]).exp();
        }
    }
    Ok(num * sign / z)
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// `rho_S(0) (x) prod_k e^{-beta_k H_E,k} / Z_E` with per-mode inverse temperatures.
    Product { rho_system: CMat, env_betas: Vec<f64> },
    /// `e^{-beta H} / Z`.
    Thermal { beta: f64 },
}

/// Exact dynamics from a given initial state, in the eigenbasis of `H`.
#[derive(Debug, Clone)]
pub struct RealTimeEd {
    energies: Vec<f64>,
    vectors: CMat,
    rho: CMat,
    thermal: Option<f64>,
}

impl RealTimeEd {
    pub fn new(sys: &EdSystem, init: &InitialState) -> Result<Self> {
        let (energies, _) = sys.shifted();
        let vectors = sys.eigen.vectors.clone();
        match init {
            InitialState::Thermal { beta } => {
                let w: Vec<f64> = energies.iter().map(|e| (-beta * e).exp()).collect();
                let z: f64 = w.iter().sum();
                let rho = CMat::from_diagonal(&nalgebra::DVector::from_iterator(w.len(), w.iter().map(|x| C64::new(x / z, 0.0))));
                Ok(RealTimeEd { energies, vectors, rho, thermal: Some(*beta) })
            }
            InitialState::Product { rho_system, env_betas } => {
                if env_betas.len() != sys.modes.len() {
                    return Err(Error::InvalidParameter("one inverse temperature per environment mode".into()));
                }
                let dim = sys.dim();
                let mut diag = vec![0.0; dim];
                for (i, x) in diag.iter_mut().enumerate() {
                    *x = -sys.modes.iter().enumerate().map(|(k, m)| env_betas[k] * m.freq * sys.number_op(k)[(i, i)].re).sum::<f64>();
                }
                let mx = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let env = CMat::from_diagonal(&nalgebra::DVector::from_iterator(dim, diag.iter().map(|x| C64::new((x - mx).exp(), 0.0))));
                let sys_part = match sys.statistics {
                    Statistics::Boson => {
                        let d = rho_system.nrows();
                        kron(rho_system, &linalg::eye(dim / d))
                    }
                    Statistics::Fermion => {
                        // rho_dot = p0 |0><0| + p1 |1><1| as p0 + (p1 - p0) n_d
                        let n_d = sys.system_op.adjoint() * &sys.system_op;
                        let p0 = rho_system[(0, 0)];
                        let p1 = rho_system[(1, 1)];
                        linalg::eye(dim) * p0 + n_d * (p1 - p0)
                    }
                };
                let full = &sys_part * &env;
                let tr = linalg::trace(&full);
                let rho = sys.eigen.to_eigenbasis(&(full / tr));
                Ok(RealTimeEd { energies, vectors, rho, thermal: None })
            }
        }
    }

    fn rotate(&self, op: &CMat) -> CMat {
        self.vectors.adjoint() * op * &self.vectors
    }

    fn heisenberg(&self, op_e: &CMat, t: f64) -> CMat {
        let n = self.energies.len();
        CMat::from_fn(n, n, |m, k| op_e[(m, k)] * (I * (self.energies[m] - self.energies[k]) * t).exp())
    }

    /// `<O(t)>` for each time.
    pub fn series(&self, op: &CMat, times: &[f64]) -> Vec<C64> {
        let o = self.rotate(op);
        times.iter().map(|&t| linalg::trace_product(&self.rho, &self.heisenberg(&o, t))).collect()
    }

    /// Contour-ordered `<T_C X(p) Y(q)>` for every pair of grid points, with
    /// `X` later at coincident points; the second return is the diagonal with
    /// `Y` later (sign included).
    pub fn contour_table(&self, grid: &ContourGrid, x: &CMat, y: &CMat, fermionic: bool) -> Result<(CMat, Vec<C64>)> {
        let sign = if fermionic { -1.0 } else { 1.0 };
        let l = grid.len();
        let xe = self.rotate(x);
        let ye = self.rotate(y);
        let mut table = CMat::zeros(l, l);
        let mut earlier = vec![C64::new(0.0, 0.0); l];
        match (grid.kind, self.thermal) {
            (GridKind::Keldysh, None) => {
                let n = grid.n;
                let dt = grid.dt();
                let xs: Vec<CMat> = (0..=n).map(|k| self.heisenberg(&xe, k as f64 * dt)).collect();
                let ys: Vec<CMat> = (0..=n).map(|k| self.heisenberg(&ye, k as f64 * dt)).collect();
                let yr: Vec<CMat> = ys.iter().map(|yk| yk * &self.rho).collect();
                let ry: Vec<CMat> = ys.iter().map(|yk| &self.rho * yk).collect();
                let mut xy = CMat::zeros(n + 1, n + 1);
                let mut yx = CMat::zeros(n + 1, n + 1);
                for k1 in 0..=n {
                    for k2 in 0..=n {
                        xy[(k1, k2)] = linalg::trace_product(&xs[k1], &yr[k2]);
                        yx[(k1, k2)] = linalg::trace_product(&xs[k1], &ry[k2]);
                    }
                }
                for p in 0..l {
                    for q in 0..l {
                        let (kp, kq) = (grid.points[p].k, grid.points[q].k);
                        table[(p, q)] = if p >= q { xy[(kp, kq)] } else { yx[(kp, kq)] * sign };
                    }
                    earlier[p] = yx[(grid.points[p].k, grid.points[p].k)] * sign;
                }
            }
            (GridKind::Keldysh, Some(_)) => return Err(Error::Unsupported("Keldysh tables use a product initial state".into())),
            (_, None) => return Err(Error::Unsupported("thermal contours need the thermal initial state".into())),
            (_, Some(beta)) => {
                if beta != grid.beta {
                    return Err(Error::GridMismatch("initial state and grid temperatures differ".into()));
                }
                let e = &self.energies;
                let z: f64 = e.iter().map(|em| (-beta * em).exp()).sum();
                // later operator first; the exponent is bounded since Im(z1 - z2) is in [-beta, 0]
                let pair = |a: &CMat, b: &CMat, z1: C64, z2: C64| -> C64 {
                    let dz = z1 - z2;
                    let mut acc = C64::new(0.0, 0.0);
                    for m in 0..e.len() {
                        for k in 0..e.len() {
                            let ab = a[(m, k)] * b[(k, m)];
                            if ab == C64::new(0.0, 0.0) {
                                continue;
                            }
                            acc += ab * (C64::new(-beta * e[m], 0.0) + I * (e[m] - e[k]) * dz).exp();
                        }
                    }
                    acc / z
                };
                for p in 0..l {
                    for q in 0..l {
                        let (zp, zq) = (grid.points[p].time, grid.points[q].time);
                        table[(p, q)] = if p >= q { pair(&xe, &ye, zp, zq) } else { pair(&ye, &xe, zq, zp) * sign };
                    }
                    let zp = grid.points[p].time;
                    earlier[p] = pair(&ye, &xe, zp, zp) * sign;
                }
            }
        }
        Ok((table, earlier))
    }
}

/// `<T_C a(t1) a^dagger(t2)>` on the Keldysh contour from the single-particle
/// propagator: `[U(t1)(1 - n0)U(t2)^dagger]_00` if `t1` is later, else
/// `-[U(t1) n0 U(t2)^dagger]_00`. `n0` holds the initial level occupations.
pub fn fermion_sp_keldysh_green(eps_d: f64, p1: f64, spectral: &SpectralFunction, env_betas: &[f64], t1: f64, t2: f64, t1_later: bool) -> Result<C64> {
    let h = single_particle_hamiltonian(eps_d, spectral);
    let mut n0 = vec![p1];
    for (k, m) in spectral.modes.iter().enumerate() {
        n0.push(fermi_occupation(m.freq, env_betas[k]));
    }
    let u1 = linalg::exp_hermitian(&h, C64::new(t1, 0.0))?;
    let u2 = linalg::exp_hermitian(&h, C64::new(t2, 0.0))?;
    let mut acc = C64::new(0.0, 0.0);
    for (j, nj) in n0.iter().enumerate() {
        let w = if t1_later { 1.0 - nj } else { -nj };
        acc += u1[(0, j)] * u2[(0, j)].conj() * w;
    }
    Ok(acc)
}

/// Trotterized finite-M reference: the ordered product of per-step operators
/// whose coherent-state elements are exactly the discretized action.
#[derive(Debug, Clone)]
pub struct TrotterOracle {
    pub statistics: Statistics,
    grid: ContourGrid,
    steps: Vec<Option<CMat>>,
    initial: Option<CMat>,
    /// Discrete free-environment partition function used for `Z_S`.
    pub z_e0: C64,
}

fn boson_step(sys: &EdSystem, dt: C64, convention: Convention) -> CMat {
    let d = sys.system_hamiltonian.nrows();
    let dim = sys.dim();
    let env_dim = dim / d;
    let s = kron(&sys.system_coupling, &linalg::eye(env_dim));
    let mut up = CMat::zeros(dim, dim);
    let mut down = CMat::zeros(dim, dim);
    for (k, m) in sys.modes.iter().enumerate() {
        let b = &sys.env_ops[k];
        up += &s * b.adjoint() * (-I * dt * m.coupling);
        down += &s * b * (-I * dt * m.coupling);
    }
    let hs = linalg::exp_hermitian(&sys.system_hamiltonian, dt).expect("system Hamiltonian is Hermitian");
    let mut diag = vec![C64::new(1.0, 0.0); dim];
    for (k, m) in sys.modes.iter().enumerate() {
        let u = step_factor(m.freq, dt, convention);
        let nk = sys.number_op(k);
        for (i, x) in diag.iter_mut().enumerate() {
            *x *= u.powi(nk[(i, i)].re.round() as i32);
        }
    }
    let free = kron(&hs, &linalg::eye(env_dim)) * CMat::from_diagonal(&nalgebra::DVector::from_vec(diag));
    linalg::expm(&up) * free * linalg::expm(&down)
}

fn fermion_step(sys: &EdSystem, dt: C64, convention: Convention) -> CMat {
    let n = sys.modes.len() + 1;
    let mut t = CMat::zeros(n, n);
    t[(0, 0)] = step_factor(sys.system_hamiltonian[(0, 0)].re, dt, convention);
    for (k, m) in sys.modes.iter().enumerate() {
        t[(k + 1, k + 1)] = step_factor(m.freq, dt, convention);
        t[(0, k + 1)] = -I * dt * m.coupling;
        t[(k + 1, 0)] = -I * dt * m.coupling;
    }
    fock_gamma(&t)
}

impl TrotterOracle {
    /// Boson reference. `rho_system` and `env_betas` are used on the Keldysh
    /// contour only; thermal contours take the grid temperature.
    pub fn boson(sys: &EdSystem, grid: &ContourGrid, convention: Convention, rho_system: Option<&CMat>, env_betas: Option<&[f64]>) -> Result<Self> {
        if sys.statistics != Statistics::Boson {
            return Err(Error::StatisticsMismatch("boson reference needs a boson system".into()));
        }
        let betas = env_betas.map(|b| b.to_vec()).unwrap_or_else(|| vec![grid.beta; sys.modes.len()]);
        let steps = Self::step_ops(grid, |dt| boson_step(sys, dt, convention));
        let initial = if grid.kind == GridKind::Keldysh {
            let rho = rho_system.ok_or_else(|| Error::InvalidParameter("Keldysh reference needs rho_S(0)".into()))?;
            let d = rho.nrows();
            let dim = sys.dim();
            let mut diag = vec![C64::new(1.0, 0.0); dim];
            for (k, m) in sys.modes.iter().enumerate() {
                let nk = sys.number_op(k);
                for (i, x) in diag.iter_mut().enumerate() {
                    *x *= (-betas[k] * m.freq * nk[(i, i)].re).exp();
                }
            }
            Some(kron(rho, &linalg::eye(dim / d)) * CMat::from_diagonal(&nalgebra::DVector::from_vec(diag)))
        } else {
            None
        };
        let z_e0 = Self::discrete_z_e0(grid, Statistics::Boson, &sys.modes, convention, &betas)?;
        Ok(TrotterOracle { statistics: Statistics::Boson, grid: grid.clone(), steps, initial, z_e0 })
    }

    /// Fermion reference for the dot with initial occupation `p1` (Keldysh).
    pub fn fermion(sys: &EdSystem, grid: &ContourGrid, convention: Convention, p1: f64, env_betas: Option<&[f64]>) -> Result<Self> {
        if sys.statistics != Statistics::Fermion {
            return Err(Error::StatisticsMismatch("fermion reference needs a fermion system".into()));
        }
        let betas = env_betas.map(|b| b.to_vec()).unwrap_or_else(|| vec![grid.beta; sys.modes.len()]);
        let steps = Self::step_ops(grid, |dt| fermion_step(sys, dt, convention));
        let initial = if grid.kind == GridKind::Keldysh {
            let n = sys.modes.len() + 1;
            if !(0.0..1.0).contains(&p1) {
                return Err(Error::Unsupported("initial dot occupation must lie in [0, 1)".into()));
            }
            let p0 = 1.0 - p1;
            let mut t = CMat::zeros(n, n);
            t[(0, 0)] = C64::new(p1 / p0, 0.0);
            for (k, m) in sys.modes.iter().enumerate() {
                t[(k + 1, k + 1)] = C64::new((-betas[k] * m.freq).exp(), 0.0);
            }
            Some(fock_gamma(&t) * C64::new(p0, 0.0))
        } else {
            None
        };
        let z_e0 = Self::discrete_z_e0(grid, Statistics::Fermion, &sys.modes, convention, &betas)?;
        Ok(TrotterOracle { statistics: Statistics::Fermion, grid: grid.clone(), steps, initial, z_e0 })
    }

    fn step_ops(grid: &ContourGrid, build: impl Fn(C64) -> CMat) -> Vec<Option<CMat>> {
        // one operator per distinct measure, shared by all steps carrying it
        let mut cache: Vec<(C64, CMat)> = Vec::new();
        (0..grid.len())
            .map(|j| {
                grid.outgoing(j).map(|s| {
                    if let Some((_, m)) = cache.iter().find(|(dt, _)| *dt == s.dt) {
                        return m.clone();
                    }
                    let m = build(s.dt);
                    cache.push((s.dt, m.clone()));
                    m
                })
            })
            .collect()
    }

    fn discrete_z_e0(grid: &ContourGrid, stat: Statistics, modes: &[Mode], convention: Convention, betas: &[f64]) -> Result<C64> {
        let mut z = C64::new(1.0, 0.0);
        for (k, m) in modes.iter().enumerate() {
            let s = build_action_with_beta(grid, stat, *m, convention, betas[k])?;
            let det = gaussian::determinant(&s);
            z *= match stat {
                Statistics::Boson => 1.0 / det,
                Statistics::Fermion => det,
            };
        }
        Ok(z)
    }

    /// `Tr[... W_j X_j ... W_0 X_0 R]` with operators inserted at grid points;
    /// within one point the list order is the application order.
    pub fn trace(&self, insertions: &[(usize, &CMat)]) -> C64 {
        let dim = self.steps.iter().flatten().next().map(|m| m.nrows()).unwrap_or(1);
        let mut p = self.initial.clone().unwrap_or_else(|| linalg::eye(dim));
        for j in 0..self.grid.len() {
            for (at, op) in insertions {
                if *at == j {
                    p = *op * p;
                }
            }
            if let Some(w) = &self.steps[j] {
                p = w * p;
            }
        }
        linalg::trace(&p)
    }

    /// Unnormalized `Z` of the Trotterized product.
    pub fn partition(&self) -> C64 {
        self.trace(&[])
    }

    /// `Z_S = Z / Z_E^0`.
    pub fn z_s(&self) -> C64 {
        self.partition() / self.z_e0
    }

    /// `<T_C X(p) Y(q)>` with `X` later at `p == q`; fermionic reorderings carry `-1`.
    pub fn two_point(&self, x: &CMat, p: usize, y: &CMat, q: usize) -> C64 {
        let z = self.partition();
        let fermionic = self.statistics == Statistics::Fermion;
        if p >= q {
            self.trace(&[(q, y), (p, x)]) / z
        } else {
            let s = if fermionic { -1.0 } else { 1.0 };
            self.trace(&[(p, x), (q, y)]) * s / z
        }
    }
}
