//! Thin wrappers: compacton, rays, norms, linear-check and virial.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use degkdv_core::analysis::norms::{weighted_norm, NormRequest};
use degkdv_core::analysis::rays::trace_ray;
use degkdv_core::analysis::virial::drift_report;
use degkdv_core::evolution::RunManifest;
use degkdv_core::grid::{Field, Grid};
use degkdv_core::linear_models::{kernel_l1_norm, loglog_slope, mizohata_functional, solve_model_linear, ModelCoefficients};
use degkdv_core::profiles::{compacton_grid, compacton_halfwidth, conserved_quantities, Density, Mu, PowerLaw, ProfileSpec};
use rayon::prelude::*;
use serde_json::json;

use crate::Failure;

/// Prints pretty JSON; a closed pipe on the reading side is not an error.
fn print_json(v: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("json value");
    match writeln!(io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn cmd_compacton(b: f64, c: f64, mu: i8, n: usize) -> Result<(), Failure> {
    let mu = Mu::try_from(mu).map_err(Failure::usage)?;
    let spec = ProfileSpec::compacton(b, c, mu)?;
    let grid = compacton_grid(b, c, n)?;
    let set = conserved_quantities(&spec.sample_u(&grid)?, mu)?;
    let halfwidth = if b >= 0.0 { Some(compacton_halfwidth(b, c)?) } else { None };
    print_json(&json!({
        "B": b,
        "c": c,
        "mu": i8::from(mu),
        "halfwidth": halfwidth,
        "period": if b < 0.0 { Some(grid.length()) } else { None },
        "max": spec.profile_eval(0.0),
        "M": set.mass,
        "J": set.momentum,
        "Jplus": set.positive_momentum,
        "H": set.hamiltonian,
    }))
}

pub fn cmd_rays(x0: f64, xi0: f64, t: f64, dt: f64, power: Option<f64>, profile: Option<PathBuf>) -> Result<(), Failure> {
    let density: Box<dyn Density> = match (power, profile) {
        (Some(k), _) => Box::new(PowerLaw { exponent: k }),
        (None, Some(path)) => {
            let text = fs::read_to_string(&path)?;
            let spec: ProfileSpec = serde_json::from_str(&text)
                .map_err(|e| Failure::usage(format!("invalid profile {}: {e}", path.display())))?;
            spec.validate()?;
            Box::new(spec)
        }
        (None, None) => return Err(Failure::usage("rays needs --power or --profile")),
    };
    let trace = trace_ray(density.as_ref(), x0, xi0, t, dt)?;
    let mut out = csv::Writer::from_writer(io::stdout().lock());
    out.write_record(["t", "x", "xi", "symbol"]).map_err(csv_failure)?;
    for s in &trace.states {
        let symbol = -density.rho(s.x) * s.xi.powi(3);
        out.write_record([s.t, s.x, s.xi, symbol].iter().map(|v| format!("{v:.17e}"))).map_err(csv_failure)?;
    }
    out.flush()?;
    if let Some(tb) = trace.blowup {
        eprintln!("degkdv: frequency blowup at t = {tb:.10}");
    }
    Ok(())
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure::usage(format!("csv error: {e}"))
}

/// Reads a uniform-grid field from `coordinate,value` CSV with a header.
pub fn read_field(path: &Path) -> Result<Field, Failure> {
    let mut r = csv::Reader::from_path(path).map_err(csv_failure)?;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_failure)?;
        let parse = |i: usize| -> Result<f64, Failure> {
            rec.get(i)
                .ok_or_else(|| Failure::usage(format!("{}: row has fewer than 2 columns", path.display())))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
        };
        xs.push(parse(0)?);
        vs.push(parse(1)?);
    }
    if xs.len() < 2 {
        return Err(Failure::usage(format!("{}: need at least two samples", path.display())));
    }
    let h = xs[1] - xs[0];
    if !(h > 0.0) || xs.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(Failure::usage(format!("{}: coordinates must be uniformly increasing", path.display())));
    }
    let grid = Grid::new(xs.len(), h * xs.len() as f64, xs[0])?;
    Ok(Field::new(grid, vs)?)
}

pub fn cmd_norms(path: &Path, n: u32, k: u32) -> Result<(), Failure> {
    let f = read_field(path)?;
    println!("{:.17e}", weighted_norm(&f, NormRequest::new(n, k))?);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Semigroup,
    Energy,
    Mizohata,
}

pub fn cmd_linear_check(suite: Suite, seeds: u64, out: Option<PathBuf>) -> Result<(), Failure> {
    match suite {
        Suite::Semigroup => {
            let grid = Grid::new(4096, 2.0 * PI, 0.0)?;
            let s: Vec<f64> = (0..=16).map(|i| 10f64.powf(-6.0 + 0.25 * i as f64)).collect();
            let mut rows = Vec::new();
            for n in 1..=3u32 {
                let norms = s.iter().map(|&v| kernel_l1_norm(&grid, v, n)).collect::<Result<Vec<_>, _>>()?;
                let slope = loglog_slope(&s, &norms);
                rows.push(json!({ "n": n, "slope": slope, "expected": -(n as f64) / 4.0,
                    "pass": (slope + n as f64 / 4.0).abs() <= 0.02 }));
            }
            print_json(&json!({ "suite": "semigroup", "kernels": rows }))?;
        }
        Suite::Energy => {
            if seeds == 0 {
                return Err(Failure::usage("--seeds must be at least 1"));
            }
            let run = |seed: u64| -> Result<_, Failure> { Ok((seed, solve_model_linear(&ModelCoefficients::manufactured(seed)?)?.1)) };
            let calibration = (0..seeds).into_par_iter().map(run).collect::<Result<Vec<_>, _>>()?;
            let validation = (1000..1000 + seeds).into_par_iter().map(run).collect::<Result<Vec<_>, _>>()?;
            let c = calibration.iter().map(|(_, l)| l.fit_constant()).fold(0.0, f64::max);
            let c_alt = calibration.iter().map(|(_, l)| l.fit_constant_alt()).fold(0.0, f64::max);
            let c_weighted = calibration.iter().map(|(_, l)| l.fit_weighted_constant()).fold(0.0, f64::max);
            let needed = validation.iter().map(|(_, l)| l.fit_constant()).fold(0.0, f64::max);
            let violations: usize = validation.iter().map(|(_, l)| l.violations(2.0 * c).len()).sum();
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                for (seed, ledger) in calibration.iter().chain(&validation) {
                    let file = BufWriter::new(File::create(dir.join(format!("ledger_{seed:04}.csv")))?);
                    ledger.write_csv(file, c)?;
                }
            }
            print_json(&json!({
                "suite": "energy",
                "fitted_C": c,
                "fitted_C_alt": c_alt,
                "fitted_C_weighted": c_weighted,
                "validation_C": needed,
                "violations_at_2C": violations,
                "pass": violations == 0,
            }))?;
        }
        Suite::Mizohata => {
            let mut rows = Vec::new();
            for m in [1.0, 2.0] {
                for l in [10.0, 100.0, 1000.0] {
                    let grid = Grid::new(1 << 16, 2.0 * l, -l)?;
                    let a = Field::from_fn(grid, |y| -5.0 * m * y / (1.0 + y * y))?;
                    let value = mizohata_functional(&a);
                    let expected = 2.5 * m * (1.0f64 + l * l).ln();
                    rows.push(json!({ "m": m, "L": l, "value": value, "expected": expected }));
                }
            }
            print_json(&json!({ "suite": "mizohata", "cases": rows }))?;
        }
    }
    Ok(())
}

fn read_manifest(path: &Path) -> Result<RunManifest, Failure> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("invalid manifest {}: {e}", path.display())))
}

/// Run directories under `dir` (itself and its immediate children) that
/// hold a manifest.
fn run_dirs(dir: &Path) -> Result<Vec<(PathBuf, RunManifest)>, Failure> {
    let mut found = Vec::new();
    if dir.join("manifest.json").is_file() {
        found.push(dir.to_path_buf());
    }
    let mut children: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("manifest.json").is_file())
        .collect();
    children.sort();
    found.extend(children);
    found.into_iter().map(|d| read_manifest(&d.join("manifest.json")).map(|m| (d, m))).collect()
}

pub fn cmd_virial(dir: &Path) -> Result<(), Failure> {
    let runs = run_dirs(dir)?;
    if runs.is_empty() {
        return Err(Failure::usage(format!("{}: no manifest.json found", dir.display())));
    }
    let hashes: BTreeSet<&str> = runs.iter().map(|(_, m)| m.config_hash.as_str()).collect();
    if hashes.len() > 1 {
        return Err(Failure::usage(format!(
            "{}: runs come from {} different configs; refusing to mix them",
            dir.display(),
            hashes.len()
        )));
    }
    let mut out = csv::Writer::from_writer(io::stdout().lock());
    out.write_record(["run", "nu", "max_dM", "max_dH", "xu2_mismatch", "xu_mismatch", "max_leak"])
        .map_err(csv_failure)?;
    for (run, manifest) in &runs {
        let mu = Mu::try_from(manifest.mu).map_err(Failure::usage)?;
        let mut fields = Vec::with_capacity(manifest.files.len());
        for name in &manifest.files {
            let u_name = name.replacen("snap_", "u_", 1);
            fields.push(read_field(&run.join(&u_name))?);
        }
        let record = drift_report(&manifest.times, &fields, mu)?;
        record.write_csv(BufWriter::new(File::create(run.join("virial.csv"))?))?;
        let max = |f: fn(&degkdv_core::analysis::virial::DiagnosticsRow) -> f64| {
            record.rows.iter().map(|r| f(r).abs()).fold(0.0, f64::max)
        };
        let (xu2, xu) = record.virial_mismatch();
        let label = run.strip_prefix(dir).ok().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        out.write_record([
            label.display().to_string(),
            format!("{:e}", manifest.nu),
            format!("{:.6e}", max(|r| r.mass_drift)),
            format!("{:.6e}", max(|r| r.hamiltonian_drift)),
            format!("{xu2:.6e}"),
            format!("{xu:.6e}"),
            format!("{:.6e}", max(|r| r.leak)),
        ])
        .map_err(csv_failure)?;
    }
    out.flush()?;
    io::stdout().flush()?;
    Ok(())
}
