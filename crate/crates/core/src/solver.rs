//! Continuation along the curvature path `κ(t) = t·κ(1)` from equal large
//! radii at `t = 1` towards zero curvature.

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::jacobian::{assemble_from_pyramids, assemble_jacobian};
use crate::polytope::GeneralizedPolytope;
use crate::surface::PolyhedralMetric;
use crate::triangulation::{self, CornerMesh};

pub const MAX_DOUBLINGS: usize = 60;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Stop once `t` (equivalently `‖κ‖∞ / ‖κ(1)‖∞`) reaches this value.
    pub kappa_stop: f64,
    /// Newton tolerance relative to `max(1, ‖κ(1)‖∞)`.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub dt_initial: f64,
    pub dt_min: f64,
    pub max_steps: usize,
    /// Also stop once the radii can move by at most this fraction of the
    /// largest radius over the rest of the path, estimated as `t·‖dr/dt‖∞`.
    /// Only reached first when the limit is flat and `r − r(0)` vanishes
    /// faster than `t`.
    pub radius_stop: f64,
    /// Keep a copy of the polytope after every accepted step.
    pub keep_states: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kappa_stop: 1e-9,
            newton_tol: 1e-10,
            max_newton: 8,
            dt_initial: 1.0 / 64.0,
            dt_min: 1e-12,
            max_steps: 1_000_000,
            radius_stop: 1e-10,
            keep_states: false,
        }
    }
}

/// One line of the progress stream, written per accepted step.
#[derive(Debug, Clone, Serialize)]
pub struct Progress {
    pub t: f64,
    pub kappa_inf: f64,
    pub flips_so_far: usize,
    pub newton_iters: usize,
    pub cond: f64,
}

/// A change of triangulation, located on the accepted step where it
/// happened.
#[derive(Debug, Clone, Serialize)]
pub struct FlipRecord {
    pub t: f64,
    pub removed: (usize, usize),
    pub inserted: (usize, usize),
    /// `|θ − π|` at the removed edge where the flip was located.
    pub theta_gap: f64,
    /// Largest entry of the change of the Jacobian across the flip.
    pub jacobian_jump: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    KappaStop,
    RadiiStationary,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub termination: Termination,
    pub polytope: GeneralizedPolytope,
    pub r_initial: f64,
    pub kappa_initial: Vec<f64>,
    pub t: f64,
    pub steps: usize,
    pub rejections: usize,
    pub flips: Vec<FlipRecord>,
    pub progress: Vec<Progress>,
    pub states: Vec<(f64, GeneralizedPolytope)>,
}

impl Solution {
    pub fn kappa_inf(&self) -> f64 {
        self.progress.last().map_or(f64::NAN, |p| p.kappa_inf)
    }
}

/// The solver gave up; carries the last accepted state.
#[derive(Debug)]
pub struct Aborted {
    pub error: Error,
    pub t: f64,
    pub polytope: GeneralizedPolytope,
    pub progress: Vec<Progress>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Smallest `R = 2^k · max edge` for which equal radii `R` give a polytope
/// with `0 < κ_i < δ_i` and `Σ_{j≠i} κ_j > 2π` for every `i`.
pub fn choose_initial_radius(metric: &PolyhedralMetric, mesh: &CornerMesh) -> Result<(f64, GeneralizedPolytope)> {
    let n = metric.vertex_count();
    let mut mesh = mesh.clone();
    let limit = triangulation::default_max_flips(&mesh);
    triangulation::weighted_delaunay(&mut mesh, &vec![0.0; n], limit)?;
    let mut r = metric.max_edge();
    for _ in 0..=MAX_DOUBLINGS {
        if let Ok(p) = start_candidate(&mesh, r, &metric.deficits) {
            return Ok((r, p));
        }
        r *= 2.0;
    }
    Err(Error::InitialRadius { doublings: MAX_DOUBLINGS })
}

fn start_candidate(mesh: &CornerMesh, r: f64, deficits: &[f64]) -> Result<GeneralizedPolytope> {
    let (p, _) = GeneralizedPolytope::with_radii(mesh.clone(), vec![r; deficits.len()])?;
    p.validate()?;
    let k = p.curvatures()?.kappa;
    let total: f64 = k.iter().sum();
    for i in 0..k.len() {
        if !(k[i] > 0.0 && k[i] < deficits[i]) {
            return Err(Error::InvalidPolytope(format!("κ_{i} = {} outside (0, δ_{i})", k[i])));
        }
        if total - k[i] <= 2.0 * std::f64::consts::PI {
            return Err(Error::InvalidPolytope(format!("curvature away from vertex {i} is at most 2π")));
        }
    }
    Ok(p)
}

/// The curvatures of the polytope with radii `r`, after updating the mesh to
/// the weighted Delaunay triangulation for `r²`.
fn evaluate(mesh: &mut CornerMesh, r: &[TwoFloat]) -> Result<(GeneralizedPolytope, Vec<f64>)> {
    if r.iter().any(|x| !(x.hi().is_finite() && x.hi() > 0.0)) {
        return Err(Error::InvalidPolytope("nonpositive radius".into()));
    }
    let hi = r.iter().map(|x| x.hi()).collect();
    let lo = r.iter().map(|x| x.lo()).collect();
    let (p, _) = GeneralizedPolytope::with_split_radii(mesh.clone(), hi, lo)?;
    let k = p.curvatures()?.kappa;
    *mesh = p.mesh.clone();
    Ok((p, k))
}

fn solve_linear(j: &DMatrix<f64>, rhs: &[f64]) -> Result<DVector<f64>> {
    let svd = j.clone().svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if !(min > 1e-12 * max) {
        return Err(Error::NearDegenerate(min / max));
    }
    j.clone()
        .lu()
        .solve(&DVector::from_column_slice(rhs))
        .ok_or(Error::NearDegenerate(0.0))
}

struct StepOutcome {
    polytope: GeneralizedPolytope,
    kappa: Vec<f64>,
    iterations: usize,
}

/// Predictor along the path tangent followed by Newton on `κ(r) = t·κ(1)`.
fn tangent(state: &GeneralizedPolytope, kappa1: &[f64]) -> Result<DVector<f64>> {
    solve_linear(&assemble_jacobian(state)?, kappa1)
}

fn step(state: &GeneralizedPolytope, tangent: &DVector<f64>, kappa1: &[f64], target_t: f64, dt: f64, tol: f64, max_newton: usize) -> Result<StepOutcome> {
    let mut r: Vec<TwoFloat> = (0..state.r.len())
        .map(|i| TwoFloat::new_add(state.r[i], state.r_lo[i]) - dt * tangent[i])
        .collect();
    let mut mesh = state.mesh.clone();
    let target: Vec<f64> = kappa1.iter().map(|k| target_t * k).collect();
    for it in 0..=max_newton {
        let (p, k) = evaluate(&mut mesh, &r)?;
        let res: Vec<f64> = k.iter().zip(&target).map(|(a, b)| a - b).collect();
        if inf_norm(&res) <= tol {
            return Ok(StepOutcome { polytope: p, kappa: k, iterations: it });
        }
        if it == max_newton {
            break;
        }
        let jp = assemble_from_pyramids(&p, &p.pyramids()?)?;
        let delta = solve_linear(&jp, &res)?;
        for (x, d) in r.iter_mut().zip(delta.iter()) {
            *x -= *d;
        }
    }
    Err(Error::StepTooSmall { t: target_t, dt, reason: "Newton did not converge".into() })
}

/// Locates the triangulation changes between two accepted states: for every
/// edge of the old triangulation that is bad at the new radii, bisect along
/// the straight segment of radii for the point where it becomes flat.
fn locate_flips(old: &GeneralizedPolytope, new_r: &[f64], t_old: f64, t_new: f64) -> Vec<FlipRecord> {
    let mesh = &old.mesh;
    let at = |s: f64| -> Vec<f64> { old.r.iter().zip(new_r).map(|(a, b)| a + s * (b - a)).collect() };
    let sq = |r: &[f64]| -> Vec<f64> { r.iter().map(|x| x * x).collect() };
    let mut out = Vec::new();
    for h in mesh.edges() {
        let gap = |s: f64| mesh.concavity_gap(h, &sq(&at(s)));
        if !(gap(1.0) < 0.0) || !(gap(0.0) >= 0.0) {
            continue;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if gap(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = 0.5 * (lo + hi);
        let r = at(s);
        let before = GeneralizedPolytope::new(mesh.clone(), r.clone());
        let theta_gap = before
            .pyramids()
            .map(|p| (before.report_unchecked(&p).theta[h] - std::f64::consts::PI).abs())
            .unwrap_or(f64::NAN);
        let mut flipped = mesh.clone();
        let (mut inserted, mut jump) = ((usize::MAX, usize::MAX), f64::NAN);
        if flipped.flip(h).is_ok() {
            let d = 3 * (h / 3) + 1;
            inserted = (flipped.tail(d), flipped.head(d));
            let after = GeneralizedPolytope::new(flipped, r);
            if let (Ok(a), Ok(b)) = (assemble_jacobian(&before), assemble_jacobian(&after)) {
                jump = (a - b).amax();
            }
        }
        out.push(FlipRecord {
            t: t_old + s * (t_new - t_old),
            removed: (mesh.tail(h), mesh.head(h)),
            inserted,
            theta_gap,
            jacobian_jump: jump,
        });
    }
    out.sort_by(|a, b| b.t.total_cmp(&a.t));
    out
}

/// Marches from `P(1)` down to `t = kappa_stop`.
pub fn solve_path(metric: &PolyhedralMetric, mesh: &CornerMesh, opts: &SolverOptions) -> std::result::Result<Solution, Box<Aborted>> {
    let abort = |error: Error, t: f64, polytope: GeneralizedPolytope, progress: Vec<Progress>| {
        Box::new(Aborted { error, t, polytope, progress })
    };
    let (r0, mut state) = match choose_initial_radius(metric, mesh) {
        Ok(x) => x,
        Err(e) => {
            let n = metric.vertex_count();
            return Err(abort(e, 1.0, GeneralizedPolytope::new(mesh.clone(), vec![0.0; n]), Vec::new()));
        }
    };
    let kappa1 = match state.curvatures() {
        Ok(rep) => rep.kappa,
        Err(e) => return Err(abort(e, 1.0, state, Vec::new())),
    };
    info!("initial radius {r0:e}, ‖κ(1)‖∞ = {:e}", inf_norm(&kappa1));
    let tol = opts.newton_tol * inf_norm(&kappa1).max(1.0);
    let t_stop = opts.kappa_stop;
    let (mut t, mut dt) = (1.0f64, opts.dt_initial);
    let mut sol = Solution {
        termination: Termination::KappaStop,
        polytope: state.clone(),
        r_initial: r0,
        kappa_initial: kappa1.clone(),
        t,
        steps: 0,
        rejections: 0,
        flips: Vec::new(),
        progress: Vec::new(),
        states: Vec::new(),
    };
    if opts.keep_states {
        sol.states.push((t, state.clone()));
    }
    while t > t_stop {
        if sol.steps >= opts.max_steps {
            return Err(abort(Error::StepTooSmall { t, dt, reason: "step limit reached".into() }, t, state, sol.progress));
        }
        let tan = match tangent(&state, &kappa1) {
            Ok(x) => x,
            Err(e) => return Err(abort(e, t, state, sol.progress)),
        };
        let rmax = state.r.iter().copied().fold(0.0, f64::max);
        if t * tan.amax() <= opts.radius_stop * rmax {
            info!("radii stationary at t = {t:e}");
            sol.termination = Termination::RadiiStationary;
            break;
        }
        let target = (t - dt).max(t_stop);
        let h = t - target;
        let outcome = step(&state, &tan, &kappa1, target, h, tol, opts.max_newton).and_then(|o| {
            check_invariants(&o, metric, r0, target, t_stop).map(|cond| (o, cond))
        });
        match outcome {
            Ok((o, cond)) => {
                if o.polytope.mesh != state.mesh {
                    let located = locate_flips(&state, &o.polytope.r, t, target);
                    for f in &located {
                        debug!("flip {:?} -> {:?} at t = {:e}, |θ − π| = {:e}", f.removed, f.inserted, f.t, f.theta_gap);
                        debug_assert!(f.theta_gap.is_nan() || f.theta_gap < 1e-7);
                    }
                    sol.flips.extend(located);
                }
                t = target;
                state = o.polytope;
                sol.steps += 1;
                let rec = Progress {
                    t,
                    kappa_inf: inf_norm(&o.kappa),
                    flips_so_far: sol.flips.len(),
                    newton_iters: o.iterations,
                    cond,
                };
                info!(target: "progress", "{}", serde_json::to_string(&rec).expect("progress serializes"));
                sol.progress.push(rec);
                if opts.keep_states {
                    sol.states.push((t, state.clone()));
                }
                if o.iterations <= 3 {
                    dt *= 1.5;
                }
            }
            Err(e) => {
                debug!("step at t = {t:e} with dt = {h:e} rejected: {e}");
                sol.rejections += 1;
                dt = 0.5 * h;
                if dt < opts.dt_min {
                    let err = Error::StepTooSmall { t, dt, reason: e.to_string() };
                    return Err(abort(err, t, state, sol.progress));
                }
            }
        }
    }
    sol.t = t;
    sol.polytope = state;
    Ok(sol)
}

/// Returns the condition number of the Jacobian at the accepted state.
fn check_invariants(o: &StepOutcome, metric: &PolyhedralMetric, r0: f64, t: f64, t_stop: f64) -> Result<f64> {
    for (i, (k, d)) in o.kappa.iter().zip(&metric.deficits).enumerate() {
        if !(*k > 0.0 && k < d) {
            return Err(Error::InvalidPolytope(format!("κ_{i} = {k} left (0, δ_{i})")));
        }
    }
    let rmax = o.polytope.r.iter().copied().fold(0.0, f64::max);
    if rmax > 2.0 * r0 {
        return Err(Error::InvalidPolytope(format!("radius {rmax} exceeds twice the initial radius")));
    }
    let j = assemble_jacobian(&o.polytope)?;
    let sv = j.svd(false, false).singular_values;
    let cond = sv.max() / sv.min();
    if t > t_stop && !(sv.min() > 1e-12 * sv.max()) {
        return Err(Error::NearDegenerate(sv.min() / sv.max()));
    }
    Ok(cond)
}
