//! The `forge` command line: validate developments, run the reconstruction,
//! and the random roundtrip check.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{error, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::embed::{congruence_check, embed_solution, EmbeddedPolytope};
use crate::error::Error;
use crate::samples;
use crate::solver::{solve_path, Aborted, Solution, SolverOptions};
use crate::surface::{build_metric, parse_development, PolyhedralMetric};
use crate::triangulation::CornerMesh;

pub const EXIT_OK: i32 = 0;
pub const EXIT_MALFORMED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_ABORTED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "forge", version, about = "Convex polytopes from polyhedral metrics by curvature continuation")]
pub struct Cli {
    /// Log filter (error, warn, info, debug, trace); FORGE_LOG overrides it.
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that a development describes a convex polyhedral metric.
    Validate { input: PathBuf },
    /// Reconstruct the polytope and write the mesh and a report.
    Solve {
        input: PathBuf,
        /// Mesh output; `.json` selects JSON, anything else OBJ.
        #[arg(long, default_value = "mesh.obj")]
        out: PathBuf,
        /// Stop once ‖κ‖∞ ≤ kappa_stop·‖κ(1)‖∞.
        #[arg(long, default_value_t = 1e-9, value_parser = parse_kappa_stop)]
        kappa_stop: f64,
        /// Merge triangles across flat edges into polygons.
        #[arg(long)]
        merge_coplanar: bool,
        #[arg(long, default_value = "report.json")]
        report: PathBuf,
    },
    /// Hull of random sphere points → development → solve → embed → compare.
    Roundtrip {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(4..))]
        points: u64,
    },
}

fn parse_kappa_stop(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x < 1e-3 {
        Ok(x)
    } else {
        Err("must lie in (0, 1e-3)".into())
    }
}

pub fn init_logging(filter: &str) {
    let mut b = env_logger::Builder::new();
    b.parse_filters(filter);
    if let Ok(env) = std::env::var("FORGE_LOG") {
        b.parse_filters(&env);
    }
    b.format_timestamp(None).target(env_logger::Target::Stderr);
    let _ = b.try_init();
}

pub fn run(cli: Cli) -> i32 {
    init_logging(&cli.log);
    match cli.command {
        Command::Validate { input } => validate(&input),
        Command::Solve { input, out, kappa_stop, merge_coplanar, report } => {
            solve(&input, &out, kappa_stop, merge_coplanar, &report)
        }
        Command::Roundtrip { seed, points } => roundtrip(seed, points as usize),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Json(_) | Error::Io(_) => EXIT_MALFORMED,
        _ => EXIT_INVALID,
    }
}

fn load(input: &Path) -> std::result::Result<PolyhedralMetric, i32> {
    let parsed = std::fs::read_to_string(input)
        .map_err(Error::from)
        .and_then(|text| parse_development(&text))
        .and_then(build_metric);
    parsed.map_err(|e| {
        eprintln!("{}: {e}", input.display());
        exit_code(&e)
    })
}

fn validate(input: &Path) -> i32 {
    let m = match load(input) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let (v, e, f) = m.euler;
    println!("{v} vertices, {e} edges, {f} faces");
    for i in 0..v {
        println!("vertex {i}: cone angle {:.12}, δ = {:.12} ({:.6}π)", m.cone_angles[i], m.deficits[i], m.deficits[i] / PI);
    }
    println!("Σδ − 4π = {:e}", m.gauss_bonnet_residual());
    println!("valid convex metric");
    EXIT_OK
}

fn write(path: &Path, text: &str) -> std::result::Result<(), i32> {
    std::fs::write(path, text).map_err(|e| {
        eprintln!("cannot write {}: {e}", path.display());
        EXIT_MALFORMED
    })
}

fn dump_state(out: &Path, abort: &Aborted) -> PathBuf {
    let path = out.with_file_name("forge-state.json");
    let state = json!({
        "error": abort.error.to_string(),
        "t": abort.t,
        "r": abort.polytope.r,
        "r_lo": abort.polytope.r_lo,
        "mesh": abort.polytope.mesh.to_json(),
        "progress": abort.progress,
    });
    if let Err(e) = std::fs::write(&path, serde_json::to_string_pretty(&state).unwrap()) {
        error!("cannot write state dump: {e}");
    }
    path
}

/// Deterministic summary of a run: no timings, keys in sorted order.
pub fn report(m: &PolyhedralMetric, sol: &Solution, e: &EmbeddedPolytope, apex_residual: f64) -> serde_json::Value {
    json!({
        "schema": 1,
        "vertices": m.vertex_count(),
        "R_initial": sol.r_initial,
        "termination": sol.termination,
        "t_final": sol.t,
        "steps": sol.steps,
        "rejected_steps": sol.rejections,
        "flip_events": sol.flips,
        "kappa_final_inf": sol.kappa_inf(),
        "closure_residual": e.closure_residual,
        "length_residual": e.length_residual,
        "apex": e.apex,
        "apex_residual": apex_residual,
        "apex_depth": e.depth(e.apex),
        "r0": sol.polytope.r,
        "volume": e.volume,
        "diameter": e.diameter,
        "degenerate": e.degenerate,
        "faces": e.faces.len(),
    })
}

fn solve(input: &Path, out: &Path, kappa_stop: f64, merge: bool, report_path: &Path) -> i32 {
    let m = match load(input) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let mesh = CornerMesh::from_metric(&m);
    let opts = SolverOptions { kappa_stop, ..Default::default() };
    let sol = match solve_path(&m, &mesh, &opts) {
        Ok(s) => s,
        Err(abort) => {
            let dump = dump_state(out, &abort);
            eprintln!("solver aborted: {}; state written to {}", abort.error, dump.display());
            return EXIT_ABORTED;
        }
    };
    let (e, apex) = match embed_solution(&sol, merge).and_then(|(e, a)| e.check_closure().map(|_| (e, a))) {
        Ok(x) => x,
        Err(err) => {
            let abort = Aborted { error: err, t: sol.t, polytope: sol.polytope.clone(), progress: sol.progress.clone() };
            let dump = dump_state(out, &abort);
            eprintln!("embedding failed: {}; state written to {}", abort.error, dump.display());
            return EXIT_ABORTED;
        }
    };
    if e.degenerate {
        eprintln!("warning: the limit is flat (volume {:e}); the metric is a doubly covered polygon", e.volume);
    }
    let mesh_text = if out.extension().is_some_and(|x| x == "json") {
        serde_json::to_string_pretty(&e.to_json()).unwrap()
    } else {
        e.to_obj()
    };
    let rep = report(&m, &sol, &e, apex.residual);
    if let Err(code) = write(out, &mesh_text) {
        return code;
    }
    if let Err(code) = write(report_path, &(serde_json::to_string_pretty(&rep).unwrap() + "\n")) {
        return code;
    }
    info!("wrote {} and {}", out.display(), report_path.display());
    println!(
        "{} vertices, {} faces, volume {:.9}, ‖κ‖∞ = {:e}, {} flips",
        e.vertices.len(),
        e.faces.len(),
        e.volume,
        sol.kappa_inf(),
        sol.flips.len()
    );
    EXIT_OK
}

fn roundtrip(seed: u64, points: usize) -> i32 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hull = samples::random_hull(&mut rng, points);
    let (dev, _) = hull.development();
    let m = match build_metric(dev) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("hull development rejected: {e}");
            return EXIT_INVALID;
        }
    };
    let mesh = CornerMesh::from_metric(&m);
    let sol = match solve_path(&m, &mesh, &SolverOptions::default()) {
        Ok(s) => s,
        Err(abort) => {
            eprintln!("solver aborted: {}", abort.error);
            return EXIT_ABORTED;
        }
    };
    let (e, _) = match embed_solution(&sol, true) {
        Ok(x) => x,
        Err(err) => {
            eprintln!("embedding failed: {err}");
            return EXIT_ABORTED;
        }
    };
    let rms = congruence_check(&e.vertices, &hull.vertex_points(&m)).expect("same vertex labels");
    println!(
        "seed {seed}, {} hull vertices, {} flips, rms {rms:e}, diameter {:.6}, rms/diameter {:e}",
        m.vertex_count(),
        sol.flips.len(),
        e.diameter,
        rms / e.diameter
    );
    EXIT_OK
}
