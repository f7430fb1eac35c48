//! `degkdv simulate`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use degkdv_core::analysis::norms::weighted_norm;
use degkdv_core::analysis::virial::drift_report;
use degkdv_core::coordinates::{frame_fields, reconstruct_eulerian, CoordinateMap, FrameFields, LagrangianSnapshot};
use degkdv_core::evolution::{evolve, evolve_z, write_snapshot_csv, RunManifest, Trajectory, Variable};
use degkdv_core::grid::Grid;
use degkdv_core::profiles::ProfileSpec;
use degkdv_core::Error;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::Failure;

/// `--out`, then `DEGKDV_OUT`, then the config, then `degkdv-out`.
pub fn resolve_output(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os("DEGKDV_OUT").filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("degkdv-out"))
}

/// Weight exponent for the run, or the admissibility failure.
fn choose_k0(cfg: &RunConfig, spec: &ProfileSpec) -> Result<u32, Failure> {
    let class = spec.classify_endpoints()?;
    if let Some((side, decay)) = class.first_failure() {
        return Err(Failure::admissibility(format!(
            "{} {side} endpoint decay: rho must vanish faster than dist^3 at a finite endpoint",
            decay.name()
        )));
    }
    match (cfg.k0, spec.admissible_k0()) {
        (Some(k), Ok(w)) => {
            if !w.integers.contains(&(k as i64)) {
                eprintln!(
                    "degkdv: K0 = {k} lies outside the admissible window ({:.4}, {:.4}); proceeding as configured",
                    w.lower, w.upper
                );
            }
            Ok(k)
        }
        (Some(k), Err(Error::Unsupported(_))) => Ok(k),
        (None, Ok(w)) => w.integers.first().map(|&k| k as u32).ok_or_else(|| {
            Failure::admissibility(format!(
                "no integer K0 in the admissible window ({:.4}, {:.4}); the direct decay check needs K0 >= {}; set k0 to override",
                w.lower, w.upper, w.direct_min
            ))
        }),
        (None, Err(Error::Unsupported(msg))) => {
            Err(Failure::admissibility(format!("{msg}; set k0 in the config to choose a weight")))
        }
        (_, Err(e)) => Err(e.into()),
    }
}

/// `x`-grid for reconstructed fields: the support with a 25% margin, or the
/// span of the flattened window for unbounded support.
fn eulerian_grid(spec: &ProfileSpec, map: &CoordinateMap, n: usize) -> Result<Grid, Failure> {
    let (lo, hi) = spec.support();
    let (a, b) = if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        let (xa, xb) = map.x_range();
        (if lo.is_finite() { lo } else { xa }, if hi.is_finite() { hi } else { xb })
    };
    let pad = 0.25 * (b - a);
    Ok(Grid::new(n, b - a + 2.0 * pad, a - pad)?)
}

fn csv_writer(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_diagnostics(
    path: &Path,
    traj: &Trajectory,
    keep: &[usize],
    frame: &FrameFields,
    cfg: &RunConfig,
) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(csv_writer(path)?);
    let mut header: Vec<String> = ["t", "xi", "max_g", "max_deviation", "boundary_leak"].map(String::from).to_vec();
    header.extend(cfg.diagnostics.norms.iter().map(|r| format!("H{}_{}", r.n, r.k)));
    w.write_record(&header).map_err(csv_failure)?;
    let fields = traj.w_fields(frame)?;
    for &k in keep {
        let (snap, report, field) = (&traj.snapshots[k], &traj.reports[k], &fields[k]);
        let mut row = vec![snap.t, snap.xi.unwrap_or(f64::NAN), report.max_g, report.max_deviation, report.boundary_leak];
        for req in &cfg.diagnostics.norms {
            row.push(weighted_norm(field, *req)?);
        }
        w.write_record(row.iter().map(|v| format!("{v:.17e}"))).map_err(csv_failure)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure::usage(format!("csv error: {e}"))
}

struct RunOutcome {
    failure: Option<Error>,
}

fn run_one(
    cfg: &RunConfig,
    spec: &ProfileSpec,
    map: &CoordinateMap,
    frame: &FrameFields,
    nu: f64,
    dir: &Path,
    hash: &str,
) -> Result<RunOutcome, Failure> {
    fs::create_dir_all(dir)?;
    frame.write_csv(csv_writer(&dir.join("frame.csv"))?)?;
    let traj = match cfg.variable {
        Variable::W => evolve(frame, None, nu, cfg.t_final, &cfg.solver)?,
        Variable::Z => evolve_z(frame, None, nu, cfg.t_final, &cfg.solver)?,
    };
    let stride = cfg.diagnostics.stride;
    let last = traj.snapshots.len() - 1;
    let keep: Vec<usize> = (0..=last).filter(|k| k % stride == 0 || *k == last).collect();
    let mut files = Vec::new();
    for &k in &keep {
        let name = format!("snap_{k:05}.csv");
        write_snapshot_csv(csv_writer(&dir.join(&name))?, &traj.snapshots[k], traj.variable, frame)?;
        files.push(name);
    }
    write_diagnostics(&dir.join("diagnostics.csv"), &traj, &keep, frame, cfg)?;

    if cfg.diagnostics.eulerian {
        let history: Vec<LagrangianSnapshot> = traj
            .z_fields(frame)?
            .into_iter()
            .zip(&traj.snapshots)
            .map(|(z, s)| LagrangianSnapshot { t: s.t, z, xi: s.xi })
            .collect();
        let x_grid = eulerian_grid(spec, map, cfg.diagnostics.eulerian_n)?;
        match reconstruct_eulerian(&history, frame, &x_grid) {
            Ok(euler) => {
                for &k in &keep {
                    let mut w = csv::Writer::from_writer(csv_writer(&dir.join(format!("u_{k:05}.csv")))?);
                    w.write_record(["x", "u"]).map_err(csv_failure)?;
                    for (x, u) in x_grid.nodes().iter().zip(euler[k].u.values()) {
                        w.write_record([format!("{x:.17e}"), format!("{u:.17e}")]).map_err(csv_failure)?;
                    }
                    w.flush()?;
                }
                let times: Vec<f64> = euler.iter().map(|e| e.t).collect();
                let us: Vec<_> = euler.into_iter().map(|e| e.u).collect();
                drift_report(&times, &us, cfg.mu)?.write_csv(csv_writer(&dir.join("eulerian.csv"))?)?;
            }
            Err(e) => eprintln!("degkdv: skipping Eulerian reconstruction: {e}"),
        }
    }

    let manifest = RunManifest {
        config_hash: hash.to_string(),
        nu,
        mu: cfg.mu.into(),
        k0: frame.k0,
        grid: frame.grid,
        dt: traj.dt,
        steps: traj.steps,
        solver: cfg.solver,
        times: keep.iter().map(|&k| traj.snapshots[k].t).collect(),
        files,
        failure: traj.failure.as_ref().map(|e| e.to_string()),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(RunOutcome { failure: traj.failure })
}

pub fn cmd_simulate(path: &Path, nu: Option<f64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(nu) = nu {
        cfg.nu = Some(nu);
        cfg.nu_ladder = None;
        cfg.validate()?;
    }
    let out_dir = resolve_output(out, &cfg);
    let spec = cfg.spec()?;
    let k0 = choose_k0(&cfg, &spec)?;
    let half = 0.5 * cfg.grid.l_y;
    let map = CoordinateMap::for_y_span(&spec, half, cfg.map_resolution)?;
    let frame = frame_fields(&spec, &map, Grid::centered(cfg.grid.n, half)?, k0)?;
    let hash = cfg.content_hash();

    let ladder = cfg.viscosities();
    let outcomes: Vec<Result<RunOutcome, Failure>> = if ladder.len() == 1 {
        vec![run_one(&cfg, &spec, &map, &frame, ladder[0], &out_dir, &hash)]
    } else {
        ladder
            .par_iter()
            .enumerate()
            .map(|(i, &nu)| {
                let dir = out_dir.join(format!("nu_{i:02}_{nu:.0e}"));
                run_one(&cfg, &spec, &map, &frame, nu, &dir, &hash)
            })
            .collect()
    };
    let mut worst: Option<Failure> = None;
    for outcome in outcomes {
        let f = match outcome {
            Ok(RunOutcome { failure: Some(e) }) => Failure::from(e),
            Ok(RunOutcome { failure: None }) => continue,
            Err(f) => f,
        };
        if worst.as_ref().is_none_or(|w| f.code > w.code) {
            worst = Some(f);
        }
    }
    match worst {
        Some(f) => Err(f),
        None => {
            eprintln!("degkdv: wrote {}", out_dir.display());
            Ok(())
        }
    }
}
