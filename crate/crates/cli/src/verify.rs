//! Built-in verification suites: closed forms and oracle identities that must
//! hold to rounding on any build.

use crate::config::VerifyConfig;
use crate::emit::Record;
use crate::failure::{CliResult, InModule};
use cohpath_core::contour::build_grid;
use cohpath_core::gaussian::{build_action, closed_form_determinant, determinant, green_block_form, inverse};
use cohpath_core::grassmann::{berezin, brute_force_fermion_gaussian, g_mul};
use cohpath_core::influence::{build_boson_kernel_for_bath, gaussian_route_weight, influence_weight};
use cohpath_core::linalg::{self, max_abs_diff, CMat};
use cohpath_core::oracle::{EdSystem, FockTruncation, TrotterOracle};
use cohpath_core::pathsum::partition_function_boson;
use cohpath_core::{
    Bath, Convention, GrassmannPoly, GridKind, Mode, PathConfiguration, PathSumMethod, SpectralFunction, Statistics, SystemModel, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// One suite's outcome: worst error over its cases against the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.max_error.is_finite() && self.max_error < self.tolerance
    }

    pub fn record(&self) -> Record {
        Record::new()
            .with("task", "verify")
            .with("suite", self.name)
            .with("cases", self.cases)
            .with("max_error", self.max_error)
            .with("tolerance", self.tolerance)
            .with("passed", self.passed())
    }
}

const KINDS: [GridKind; 3] = [GridKind::ImaginaryAxis, GridKind::Keldysh, GridKind::Kadanoff];
const STATS: [Statistics; 2] = [Statistics::Boson, Statistics::Fermion];

fn grid_for(kind: GridKind, size: usize, beta: f64) -> CliResult<cohpath_core::ContourGrid> {
    let (m, n) = match kind {
        GridKind::ImaginaryAxis => (size, 0),
        GridKind::Keldysh => (1, size),
        GridKind::Kadanoff => (size, size),
    };
    build_grid(kind, beta, 1.0, m, n).in_module("contour")
}

fn worst(errors: Vec<CliResult<f64>>) -> CliResult<(usize, f64)> {
    let n = errors.len();
    let mut w = 0.0f64;
    let mut nan = false;
    for e in errors {
        let e = e?;
        nan |= e.is_nan();
        w = w.max(e);
    }
    // a NaN anywhere must fail the suite
    Ok((n, if nan { f64::NAN } else { w }))
}

fn determinants(cfg: &VerifyConfig) -> CliResult<SuiteResult> {
    let mut cases = Vec::new();
    for kind in KINDS {
        for stat in STATS {
            for &size in &cfg.sizes {
                for bw in [0.1, 1.0, 5.0, 20.0] {
                    cases.push((kind, stat, size, bw));
                }
            }
        }
    }
    let errs = cases
        .par_iter()
        .map(|&(kind, stat, size, bw)| {
            let g = grid_for(kind, size, 1.0)?;
            let s = build_action(&g, stat, Mode { freq: bw, coupling: 0.0 }, Convention::Exponential).in_module("gaussian")?;
            Ok((determinant(&s) - C64::new(closed_form_determinant(stat, bw, 1.0), 0.0)).norm())
        })
        .collect();
    let (cases, max_error) = worst(errs)?;
    Ok(SuiteResult { name: "determinant", cases, max_error, tolerance: 1e-12 })
}

fn inverses(cfg: &VerifyConfig) -> CliResult<SuiteResult> {
    let mut cases = Vec::new();
    for kind in KINDS {
        for stat in STATS {
            for &size in cfg.sizes.iter().filter(|&&s| s <= 64) {
                for bw in [0.5, 3.0] {
                    cases.push((kind, stat, size, bw));
                }
            }
        }
    }
    let errs = cases
        .par_iter()
        .map(|&(kind, stat, size, bw)| {
            let g = grid_for(kind, size, 1.3)?;
            let s = build_action(&g, stat, Mode { freq: bw, coupling: 0.0 }, Convention::Exponential).in_module("gaussian")?;
            let inv = inverse(&s).in_module("gaussian")?;
            let want = green_block_form(&g, stat, bw, 1.3).in_module("gaussian")?;
            Ok(max_abs_diff(&inv, &want))
        })
        .collect();
    let (cases, max_error) = worst(errs)?;
    Ok(SuiteResult { name: "inverse", cases, max_error, tolerance: 1e-10 })
}

fn grassmann(cfg: &VerifyConfig) -> CliResult<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(cfg.seed));
    let mut errs = Vec::new();
    for _ in 0..cfg.samples {
        let n = rng.gen_range(1..=4);
        let s = CMat::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        errs.push(brute_force_fermion_gaussian(&s).in_module("grassmann").map(|b| (b - linalg::determinant(&s)).norm()));
    }
    // int dc c = 1 and int dc (c-bar c) = -c-bar
    let rule = || -> cohpath_core::Result<f64> {
        let one = berezin(&GrassmannPoly::c(1, 0)?, 1)?;
        let pair = g_mul(&GrassmannPoly::cbar(1, 0)?, &GrassmannPoly::c(1, 0)?)?;
        let minus_cbar = GrassmannPoly::cbar(1, 0)?.scale(C64::new(-1.0, 0.0));
        Ok(one.max_abs_diff(&GrassmannPoly::one(1)?) + berezin(&pair, 1)?.max_abs_diff(&minus_cbar))
    };
    errs.push(rule().in_module("grassmann"));
    let (cases, max_error) = worst(errs)?;
    Ok(SuiteResult { name: "grassmann", cases, max_error, tolerance: 1e-12 })
}

fn kernel_equivalence() -> CliResult<SuiteResult> {
    let spec = SpectralFunction::single(Statistics::Boson, 1.2, 0.7).in_module("greens")?;
    let mut errs = Vec::new();
    for (kind, m, n) in [(GridKind::ImaginaryAxis, 8, 0), (GridKind::Keldysh, 1, 3)] {
        let g = build_grid(kind, 1.5, 1.0, m, n).in_module("contour")?;
        let bath = Bath::new(spec.clone(), if kind == GridKind::Keldysh { 0.7 } else { 1.5 }).in_module("greens")?;
        let k = build_boson_kernel_for_bath(&g, &bath, Convention::Exponential).in_module("influence")?;
        let l = g.len();
        let part: Vec<CliResult<f64>> = (0..1u32 << l)
            .into_par_iter()
            .map(|bits| {
                let values = (0..l).map(|j| if bits >> j & 1 == 1 { 1.0 } else { -1.0 }).collect();
                let path = PathConfiguration::new(&g, values).in_module("influence")?;
                let a = influence_weight(&path, &k).in_module("influence")?;
                let b = gaussian_route_weight(&path, &g, &bath).in_module("influence")?;
                Ok((a - b).norm() / b.norm())
            })
            .collect();
        errs.extend(part);
    }
    let (cases, max_error) = worst(errs)?;
    Ok(SuiteResult { name: "kernel-equivalence", cases, max_error, tolerance: 1e-11 })
}

fn trotter_bridge() -> CliResult<SuiteResult> {
    let c = |x: f64| C64::new(x, 0.0);
    let h = CMat::from_row_slice(2, 2, &[c(0.0), c(0.5), c(0.5), c(0.0)]);
    let s = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
    let rho = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
    let model = SystemModel::new(h, s, Some(rho.clone())).in_module("pathsum")?;
    let spec = SpectralFunction::single(Statistics::Boson, 1.0, 0.4).in_module("greens")?;
    let sys = EdSystem::boson(&model, &spec, FockTruncation::new(40).in_module("oracle")?).in_module("oracle")?;
    let mut errs = Vec::new();
    for (kind, m, n) in [(GridKind::ImaginaryAxis, 8, 0), (GridKind::Keldysh, 1, 6)] {
        let g = build_grid(kind, 1.0, 1.0, m, n).in_module("contour")?;
        let bath = Bath::new(spec.clone(), 1.0).in_module("greens")?;
        let k = build_boson_kernel_for_bath(&g, &bath, Convention::Exponential).in_module("influence")?;
        let z = partition_function_boson(&model, &g, &k, PathSumMethod::Enumerate).in_module("pathsum")?.value;
        let t = TrotterOracle::boson(&sys, &g, Convention::Exponential, Some(&rho), Some(&[1.0])).in_module("oracle")?;
        let want = t.z_s();
        errs.push(Ok((z - want).norm() / want.norm()));
    }
    let (cases, max_error) = worst(errs)?;
    Ok(SuiteResult { name: "pathsum-vs-trotter", cases, max_error, tolerance: 1e-8 })
}

pub fn run(cfg: &VerifyConfig) -> CliResult<Vec<SuiteResult>> {
    Ok(vec![determinants(cfg)?, inverses(cfg)?, grassmann(cfg)?, kernel_equivalence()?, trotter_bridge()?])
}

pub fn table(results: &[SuiteResult]) -> String {
    let mut out = format!("{:<20} {:>6} {:>12} {:>10}  result\n", "suite", "cases", "max_error", "tolerance");
    for r in results {
        out += &format!(
            "{:<20} {:>6} {:>12.3e} {:>10.1e}  {}\n",
            r.name,
            r.cases,
            r.max_error,
            r.tolerance,
            if r.passed() { "PASS" } else { "FAIL" }
        );
    }
    out
}
