//! The physics tasks: each turns a validated configuration into result rows.

use crate::config::{Formalism, Resolved, RunConfig, Task};
use crate::emit::Record;
use crate::failure::{CliResult, Failure, InModule};
use cohpath_core::influence::{build_boson_kernel_for_bath, build_fermion_kernel_for_bath};
use cohpath_core::linalg::CMat;
use cohpath_core::observables::{coupling_energy, currents_fermion, dressed_environment_green, heat_current_boson};
use cohpath_core::oracle::{ed_partition, fermion_single_particle_partition, EdSystem, FockTruncation, InitialState, RealTimeEd, TrotterOracle};
use cohpath_core::pathsum::{correlator_table_boson, fermion_green_table, partition_function_boson, partition_function_fermion};
use cohpath_core::greens::contour_green;
use cohpath_core::{Branch, ContourGrid, ContourPoint, FermionCurrent, GridKind, KernelMatrix, Statistics, TableProvider, C64, I};
use rayon::prelude::*;

fn echo(cfg: &RunConfig, task: Task, grid: &ContourGrid) -> Record {
    Record::new()
        .with("task", task.name())
        .with("formalism", cfg.formalism.name())
        .with("statistics", cfg.statistics.name())
        .with("convention", cfg.grid.convention.name())
        .with("m", if grid.kind == GridKind::Keldysh { 0 } else { grid.m })
        .with("n", grid.n)
}

fn branch_name(p: &ContourPoint) -> &'static str {
    match p.branch {
        Branch::Forward => "forward",
        Branch::Backward => "backward",
        Branch::Imaginary => "imaginary",
    }
}

/// `t` on real branches, `tau` on the imaginary one.
fn point_time(p: &ContourPoint) -> f64 {
    match p.branch {
        Branch::Imaginary => p.tau(),
        _ => p.real_time(),
    }
}

fn point_columns(r: Record, tag: &str, p: &ContourPoint) -> Record {
    r.with(tag, p.index).with(&format!("{tag}_branch"), branch_name(p)).with(&format!("{tag}_time"), point_time(p))
}

fn kernel(res: &Resolved, grid: &ContourGrid) -> CliResult<KernelMatrix> {
    let mut total = KernelMatrix::zeros(grid, res.statistics);
    for b in &res.baths {
        let k = match res.statistics {
            Statistics::Boson => build_boson_kernel_for_bath(grid, b, res.convention),
            Statistics::Fermion => build_fermion_kernel_for_bath(grid, b, res.pairing, res.convention),
        }
        .in_module("influence")?;
        total = total.sum(&k).in_module("influence")?;
    }
    Ok(total)
}

/// Exact system for the references, built once per run.
fn ed_system(cfg: &RunConfig, res: &Resolved) -> CliResult<EdSystem> {
    match res.statistics {
        Statistics::Boson => {
            let t = FockTruncation::new(cfg.reference.n_max).in_module("oracle")?;
            for b in &res.baths {
                t.check(b.beta, &b.spectral).in_module("oracle")?;
            }
            EdSystem::boson(res.model.as_ref().unwrap(), &res.all_modes, t).in_module("oracle")
        }
        Statistics::Fermion => EdSystem::fermion(res.dot.unwrap().eps_d, &res.all_modes).in_module("oracle"),
    }
}

fn initial_state(cfg: &RunConfig, res: &Resolved) -> InitialState {
    if res.kind != GridKind::Keldysh {
        return InitialState::Thermal { beta: cfg.grid.beta };
    }
    let rho_system = match res.statistics {
        Statistics::Boson => res.model.as_ref().unwrap().initial_density.clone().unwrap(),
        Statistics::Fermion => {
            let p1 = res.dot.unwrap().initial_occupation;
            CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.0 - p1, 0.0), C64::new(p1, 0.0)]))
        }
    };
    InitialState::Product { rho_system, env_betas: res.mode_betas.clone() }
}

fn trotter(sys: &EdSystem, res: &Resolved, grid: &ContourGrid) -> CliResult<TrotterOracle> {
    match res.statistics {
        Statistics::Boson => {
            let rho = res.model.as_ref().unwrap().initial_density.as_ref();
            TrotterOracle::boson(sys, grid, res.convention, rho, Some(&res.mode_betas))
        }
        Statistics::Fermion => TrotterOracle::fermion(sys, grid, res.convention, res.dot.unwrap().initial_occupation, Some(&res.mode_betas)),
    }
    .in_module("oracle")
}

fn err(a: C64, b: Option<C64>) -> Option<f64> {
    b.map(|b| (a - b).norm())
}

/// Every size of the ladder, in parallel, rows kept in ladder order.
fn sweep(cfg: &RunConfig, res: &Resolved, f: impl Fn(ContourGrid) -> CliResult<Vec<Record>> + Sync) -> CliResult<Vec<Record>> {
    let grids = cfg.sizes().into_iter().map(|(m, n)| res.grid(cfg, m, n)).collect::<CliResult<Vec<_>>>()?;
    let parts: Vec<CliResult<Vec<Record>>> = grids.into_par_iter().map(&f).collect();
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn partition(cfg: &RunConfig) -> CliResult<Vec<Record>> {
    let res = Resolved::new(cfg)?;
    let sys = if cfg.reference.oracle || (cfg.reference.exact && res.statistics == Statistics::Boson && res.kind != GridKind::Keldysh) {
        Some(ed_system(cfg, &res)?)
    } else {
        None
    };
    let exact = if !cfg.reference.exact {
        None
    } else if res.kind == GridKind::Keldysh {
        // unitary evolution of a normalized initial state
        Some(C64::new(1.0, 0.0))
    } else {
        let z = match res.statistics {
            Statistics::Boson => ed_partition(sys.as_ref().unwrap(), cfg.grid.beta).in_module("oracle")?,
            Statistics::Fermion => fermion_single_particle_partition(res.dot.unwrap().eps_d, &res.all_modes, cfg.grid.beta).in_module("oracle")?,
        };
        Some(C64::new(z.z_s, 0.0))
    };
    sweep(cfg, &res, |grid| {
        let k = kernel(&res, &grid)?;
        let (value, n_paths) = match res.statistics {
            Statistics::Boson => {
                let r = partition_function_boson(res.model.as_ref().unwrap(), &grid, &k, res.method).in_module("pathsum")?;
                (r.value, Some(r.n_paths))
            }
            Statistics::Fermion => (partition_function_fermion(&grid, res.dot.as_ref().unwrap(), &k).in_module("pathsum")?, None),
        };
        let tz = match &sys {
            Some(s) if cfg.reference.oracle => Some(trotter(s, &res, &grid)?.z_s()),
            _ => None,
        };
        Ok(vec![echo(cfg, Task::Partition, &grid)
            .complex("value", Some(value))
            .with("n_paths", n_paths)
            .complex("oracle", tz)
            .with("oracle_err", err(value, tz))
            .complex("exact", exact)
            .with("exact_err", err(value, exact))])
    })
}

fn pairs(cfg: &RunConfig, grid: &ContourGrid) -> CliResult<Vec<(usize, usize)>> {
    let l = grid.len();
    let list: Vec<(usize, usize)> = match &cfg.observe.pairs {
        Some(p) => p.iter().map(|&[a, b]| (a, b)).collect(),
        None => (0..l).map(|j| (j, 0)).collect(),
    };
    if let Some(&(a, b)) = list.iter().find(|&&(a, b)| a >= l || b >= l) {
        return Err(Failure::schema(format!("observe.pairs entry [{a}, {b}] is outside a grid of {l} points")));
    }
    Ok(list)
}

fn system_ops(sys: &EdSystem) -> (CMat, CMat) {
    match sys.statistics {
        Statistics::Boson => (sys.system_op.clone(), sys.system_op.clone()),
        Statistics::Fermion => (sys.system_op.clone(), sys.system_op.adjoint()),
    }
}

pub fn correlator(cfg: &RunConfig) -> CliResult<Vec<Record>> {
    let res = Resolved::new(cfg)?;
    let fermionic = res.statistics == Statistics::Fermion;
    let sys = if cfg.reference.oracle || cfg.reference.exact { Some(ed_system(cfg, &res)?) } else { None };
    let rt = match &sys {
        Some(s) if cfg.reference.exact => Some(RealTimeEd::new(s, &initial_state(cfg, &res)).in_module("oracle")?),
        _ => None,
    };
    sweep(cfg, &res, |grid| {
        let list = pairs(cfg, &grid)?;
        let k = kernel(&res, &grid)?;
        let table = match res.statistics {
            Statistics::Boson => correlator_table_boson(res.model.as_ref().unwrap(), &grid, &k).in_module("pathsum")?.0,
            Statistics::Fermion => fermion_green_table(&grid, res.dot.as_ref().unwrap(), &k).in_module("pathsum")?.0,
        };
        let ops = sys.as_ref().map(system_ops);
        let t = match &sys {
            Some(s) if cfg.reference.oracle => Some(trotter(s, &res, &grid)?),
            _ => None,
        };
        let exact = match (&rt, &ops) {
            (Some(rt), Some((x, y))) => Some(rt.contour_table(&grid, x, y, fermionic).in_module("oracle")?.0),
            _ => None,
        };
        Ok(list
            .into_iter()
            .map(|(p, q)| {
                let v = table[(p, q)];
                let tv = t.as_ref().map(|t| {
                    let (x, y) = ops.as_ref().unwrap();
                    t.two_point(x, p, y, q)
                });
                let ev = exact.as_ref().map(|e| e[(p, q)]);
                let r = point_columns(echo(cfg, Task::Correlator, &grid), "p", &grid.points[p]);
                point_columns(r, "q", &grid.points[q])
                    .complex("value", Some(v))
                    .complex("oracle", tv)
                    .with("oracle_err", err(v, tv))
                    .complex("exact", ev)
                    .with("exact_err", err(v, ev))
            })
            .collect())
    })
}

fn provider(res: &Resolved, grid: &ContourGrid) -> CliResult<TableProvider> {
    let k = kernel(res, grid)?;
    match res.statistics {
        Statistics::Boson => TableProvider::boson_pathsum(res.model.as_ref().unwrap(), grid, &k),
        Statistics::Fermion => TableProvider::fermion_pathsum(grid, res.dot.as_ref().unwrap(), &k),
    }
    .in_module("pathsum")
}

pub fn current(cfg: &RunConfig) -> CliResult<Vec<Record>> {
    if cfg.formalism != Formalism::Keldysh {
        return Err(Failure::schema("the current task runs on the Keldysh contour"));
    }
    let res = Resolved::new(cfg)?;
    let rt = if cfg.reference.exact {
        let sys = ed_system(cfg, &res)?;
        let rt = RealTimeEd::new(&sys, &initial_state(cfg, &res)).in_module("oracle")?;
        Some((sys, rt))
    } else {
        None
    };
    let quantities: &[&str] = match res.statistics {
        Statistics::Boson => &["coupling_energy", "heat_current"],
        Statistics::Fermion => &["coupling_energy", "energy_current", "particle_current"],
    };
    sweep(cfg, &res, |grid| {
        let steps: Vec<usize> = cfg.observe.steps.clone().unwrap_or_else(|| (0..=grid.n).collect());
        if let Some(s) = steps.iter().find(|&&s| s > grid.n) {
            return Err(Failure::schema(format!("observe.steps entry {s} exceeds n = {}", grid.n)));
        }
        let p = provider(&res, &grid)?;
        let idx: Vec<usize> = steps.iter().map(|&s| grid.forward(s)).collect::<cohpath_core::Result<_>>().in_module("contour")?;
        let times: Vec<f64> = idx.iter().map(|&j| grid.points[j].real_time()).collect();
        let mut rows = Vec::new();
        for (b, bath) in res.baths.iter().enumerate() {
            let modes: Vec<usize> = res.bath_modes[b].clone().collect();
            for &q in quantities {
                let reference = rt.as_ref().map(|(sys, rt)| {
                    let op = match q {
                        "coupling_energy" => modes.iter().fold(CMat::zeros(sys.dim(), sys.dim()), |acc, &k| acc + &sys.coupling_terms[k]),
                        "particle_current" => sys.outflow_operator(&modes, false),
                        _ => sys.outflow_operator(&modes, true),
                    };
                    rt.series(&op, &times)
                });
                for (i, (&j, &s)) in idx.iter().zip(&steps).enumerate() {
                    let v = match q {
                        "coupling_energy" => coupling_energy(&p, bath, j),
                        "heat_current" => heat_current_boson(&p, bath, j),
                        "energy_current" => currents_fermion(&p, bath, j, FermionCurrent::Energy),
                        _ => currents_fermion(&p, bath, j, FermionCurrent::Particle),
                    }
                    .in_module("observables")?;
                    let e = reference.as_ref().map(|r| r[i].re);
                    rows.push(
                        echo(cfg, Task::Current, &grid)
                            .with("step", s)
                            .with("time", times[i])
                            .with("bath", b)
                            .with("quantity", q)
                            .with("value", v)
                            .with("exact", e)
                            .with("exact_err", e.map(|e| (v - e).abs())),
                    );
                }
            }
        }
        Ok(rows)
    })
}

pub fn green(cfg: &RunConfig) -> CliResult<Vec<Record>> {
    let res = Resolved::new(cfg)?;
    let (b, k) = (cfg.observe.bath, cfg.observe.mode);
    let bath = res.baths.get(b).ok_or_else(|| Failure::schema(format!("observe.bath = {b} but only {} baths", res.baths.len())))?;
    let mode = *bath.spectral.modes.get(k).ok_or_else(|| Failure::schema(format!("observe.mode = {k} is not a mode of bath {b}")))?;
    let fermionic = res.statistics == Statistics::Fermion;
    let rt = if cfg.reference.exact {
        let sys = ed_system(cfg, &res)?;
        let rt = RealTimeEd::new(&sys, &initial_state(cfg, &res)).in_module("oracle")?;
        Some((sys, rt))
    } else {
        None
    };
    sweep(cfg, &res, |grid| {
        let list = pairs(cfg, &grid)?;
        let p = provider(&res, &grid)?;
        let exact = match &rt {
            Some((sys, rt)) => {
                let c = &sys.env_ops[res.bath_modes[b].start + k];
                Some(rt.contour_table(&grid, c, &c.adjoint(), fermionic).in_module("oracle")?.0 * -I)
            }
            None => None,
        };
        list.into_iter()
            .map(|(x, y)| {
                let v = dressed_environment_green(&p, bath, k, x, y).in_module("observables")?;
                let free = contour_green(res.statistics, mode.freq, &grid.points[x], &grid.points[y], bath.beta).in_module("greens")?;
                let ev = exact.as_ref().map(|e| e[(x, y)]);
                let r = echo(cfg, Task::Green, &grid).with("bath", b).with("mode", k);
                let r = point_columns(point_columns(r, "p", &grid.points[x]), "q", &grid.points[y]);
                Ok(r.complex("value", Some(v)).complex("free", Some(free)).complex("exact", ev).with("exact_err", err(v, ev)))
            })
            .collect()
    })
}
