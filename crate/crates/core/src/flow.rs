//! Explicit time integration of the graphical flow
//! `u_t + psi(-grad u, 1) div(grad_x phi(-grad u, 1)) = 0`
//! and of its self-similar rescaling
//! `w_tau = -w + y . grad w - psi(-grad w, 1) L[w]`.
//!
//! Forward Euler with the CFL time step recomputed every step; the advection
//! term of the rescaled flow is first-order upwind so the whole update stays
//! monotone, which is what the discrete comparison tests lean on. Blow-up is
//! loud: any non-finite nodal value aborts with the step index.

use crate::anisotropy::{AnisotropyModel, MobilityModel, MAX_DIM};
use crate::error::{Error, Result};
use crate::grid::{apply_boundary, BoundaryPolicy, GraphField};
use crate::operator::{
    check_lift_dim, face_extrema, face_gradients_from, lift, nodal_gradients, FaceGradients,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SnapshotCadence {
    EverySteps(usize),
    EveryTime(f64),
}

#[derive(Clone, Debug)]
pub struct FlowParams {
    /// CFL safety factor in (0, 0.5].
    pub cfl_factor: f64,
    /// End time (or end rescaled time for the rescaled flow).
    pub t_end: f64,
    pub cadence: SnapshotCadence,
    /// Stationarity tolerance on the sup norm of the time derivative.
    pub tol_stat: f64,
    /// Times the integrator must land on exactly (snapshots are taken there).
    pub exact_times: Vec<f64>,
    pub max_steps: usize,
}

impl FlowParams {
    pub fn new(t_end: f64) -> Self {
        FlowParams {
            cfl_factor: 0.25,
            t_end,
            cadence: SnapshotCadence::EverySteps(usize::MAX),
            tol_stat: 1e-8,
            exact_times: Vec::new(),
            max_steps: 50_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= 0.5) {
            return Err(Error::Config(format!(
                "cfl factor must lie in (0, 0.5], got {}",
                self.cfl_factor
            )));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::Config(format!("end time must be positive, got {}", self.t_end)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepRecord {
    pub step: usize,
    /// Time (or rescaled time) of the recorded state.
    pub t: f64,
    /// Step size used to reach this state (0 for the initial record).
    pub dt: f64,
    /// Sup norm of the instantaneous speed of the recorded state.
    pub sup_speed: f64,
    /// Sup norm of the recorded state itself (not part of the CSV layout).
    pub sup_abs: f64,
    pub lipschitz: f64,
    /// Discrete anisotropic area of the graph.
    pub area: f64,
    /// Cumulative `integral of u_t^2 / psi(-grad u, 1)`.
    pub dissipation: f64,
}

#[derive(Debug)]
pub struct Trajectory {
    pub snapshots: Vec<GraphField>,
    pub records: Vec<StepRecord>,
    /// Set when the discrete Lipschitz constant exceeded its initial value by
    /// more than 1e-6 at some step (flagged, not fatal).
    pub lipschitz_flag: bool,
}

impl Trajectory {
    pub fn final_field(&self) -> &GraphField {
        self.snapshots.last().expect("trajectory holds at least the initial snapshot")
    }

    pub fn final_record(&self) -> &StepRecord {
        self.records.last().expect("trajectory holds at least the initial record")
    }

    /// Largest Lipschitz overshoot above the initial constant.
    pub fn lipschitz_excess(&self) -> f64 {
        let lip0 = self.records[0].lipschitz;
        self.records.iter().fold(0.0f64, |m, r| m.max(r.lipschitz - lip0))
    }

    /// Snapshot closest to time `t`.
    pub fn snapshot_at(&self, t: f64) -> &GraphField {
        self.snapshots
            .iter()
            .min_by(|a, b| {
                (a.time - t).abs().partial_cmp(&(b.time - t).abs()).expect("finite times")
            })
            .expect("non-empty trajectory")
    }

    /// Per-step records as CSV (`step,t,dt,sup_speed,lipschitz,area,dissipation`).
    pub fn write_records_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "step,t,dt,sup_speed,lipschitz,area,dissipation")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.step, r.t, r.dt, r.sup_speed, r.lipschitz, r.area, r.dissipation
            )?;
        }
        Ok(())
    }

    pub fn save_records_csv(&self, path: &std::path::Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_records_csv(&mut f)?;
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Physical,
    Rescaled,
}

/// Everything one explicit step needs to know about a state.
struct StepEval {
    speed: Vec<f64>,
    dt_limit: f64,
    sup_speed: f64,
    sup_abs: f64,
    lipschitz: f64,
    area: f64,
    /// `h^N * sum speed^2 / psi` over nodes: dissipation per unit time.
    diss_rate: f64,
}

/// One sweep over the faces: flux, per-face axis diffusion coefficient (the
/// matching diagonal Hessian entry, which is what multiplies the second
/// difference in the linearized operator), CFL extrema, area and Lipschitz
/// reductions.
struct FacePass {
    flux_x: Vec<f64>,
    flux_y: Vec<f64>,
    diff_x: Vec<f64>,
    diff_y: Vec<f64>,
    lam_max: f64,
    psi_face_max: f64,
    area: f64,
    lip: f64,
}

fn fused_face_pass(
    faces: &FaceGradients,
    g: &crate::grid::GraphGrid,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
) -> FacePass {
    let n = g.dim;
    let (nx, ny) = (g.counts[0], g.counts[1]);
    let periodic = matches!(g.policy, BoundaryPolicy::Periodic);
    let weight = g.h.powi(n as i32) / n as f64;
    let mut p = [0.0f64; MAX_DIM];
    let mut grad = [0.0f64; MAX_DIM];
    let mut hess = crate::anisotropy::SymMat::zeros(n + 1);

    let mut out = FacePass {
        flux_x: vec![0.0; faces.x.len()],
        flux_y: vec![0.0; faces.y.len()],
        diff_x: vec![0.0; faces.x.len()],
        diff_y: vec![0.0; faces.y.len()],
        lam_max: 0.0,
        psi_face_max: 0.0,
        area: 0.0,
        lip: 0.0,
    };

    let x_range = if periodic { 0..nx } else { 1..nx };
    for iy in 0..ny {
        let row = iy * (nx + 1);
        for k in 0..=nx {
            let f = row + k;
            let gr = &faces.x[f];
            lift(gr, n, &mut p);
            phi.gradient_raw(&p[..n + 1], &mut grad);
            out.flux_x[f] = grad[0];
            phi.hessian_raw(&p[..n + 1], &mut hess);
            out.diff_x[f] = hess.get(0, 0);
            out.lam_max = out.lam_max.max(crate::operator::xblock_max_eig(&hess, n));
            out.psi_face_max = out.psi_face_max.max(psi.value_raw(&p[..n + 1]));
            if x_range.contains(&k) {
                out.area += weight * phi.value_raw(&p[..n + 1]);
                out.lip = out.lip.max(gr[0].abs());
            }
        }
    }
    if n == 2 {
        let y_range = if periodic { 0..ny } else { 1..ny };
        for k in 0..=ny {
            for ix in 0..nx {
                let f = k * nx + ix;
                let gr = &faces.y[f];
                lift(gr, n, &mut p);
                phi.gradient_raw(&p[..n + 1], &mut grad);
                out.flux_y[f] = grad[1];
                phi.hessian_raw(&p[..n + 1], &mut hess);
                out.diff_y[f] = hess.get(1, 1);
                out.lam_max = out.lam_max.max(crate::operator::xblock_max_eig(&hess, n));
                out.psi_face_max = out.psi_face_max.max(psi.value_raw(&p[..n + 1]));
                if y_range.contains(&k) {
                    out.area += weight * phi.value_raw(&p[..n + 1]);
                    out.lip = out.lip.max(gr[1].abs());
                }
            }
        }
    }
    out
}

fn eval_state(
    u: &GraphField,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
    c_cfl: f64,
    mode: Mode,
    coords: &[[f64; 2]],
    max_abs_coord: f64,
) -> StepEval {
    let g = &u.grid;
    let n = g.dim;
    let h = g.h;
    let ghost = apply_boundary(u);
    let faces = face_gradients_from(&ghost, g);
    let pass = fused_face_pass(&faces, g, phi, psi);
    let gnodal = nodal_gradients(&faces, g);

    let mut speed = vec![0.0f64; g.len()];
    let mut p = [0.0f64; MAX_DIM];
    let mut sup_speed = 0.0f64;
    let mut sup_abs = 0.0f64;
    let mut diss_rate = 0.0f64;
    let (nx, ny) = (g.counts[0], g.counts[1]);
    for iy in 0..ny {
        for ix in 0..nx {
            let i = iy * nx + ix;
            let row = iy * (nx + 1);
            let div = {
                let mut d = (pass.flux_x[row + ix + 1] - pass.flux_x[row + ix]) / h;
                if n == 2 {
                    d += (pass.flux_y[(iy + 1) * nx + ix] - pass.flux_y[iy * nx + ix]) / h;
                }
                d
            };
            lift(&gnodal[i], n, &mut p);
            let psi_i = psi.value_raw(&p[..n + 1]);
            let mut s = -psi_i * div;
            if mode == Mode::Rescaled {
                let y = &coords[i];
                let (ixi, iyi) = (ix as isize, iy as isize);
                // advection: centered where the face diffusion dominates the
                // cell Peclet number with a factor-2 margin (second order),
                // first-order upwind otherwise (monotone unconditionally)
                let mut adv = 0.0;
                if y[0] != 0.0 {
                    let d_face = psi_i * pass.diff_x[row + ix].min(pass.diff_x[row + ix + 1]);
                    adv += if h * y[0].abs() <= d_face {
                        y[0] * (ghost.get(ixi + 1, iyi) - ghost.get(ixi - 1, iyi)) / (2.0 * h)
                    } else if y[0] > 0.0 {
                        y[0] * (ghost.get(ixi + 1, iyi) - u.values[i]) / h
                    } else {
                        y[0] * (u.values[i] - ghost.get(ixi - 1, iyi)) / h
                    };
                }
                if n == 2 && y[1] != 0.0 {
                    let d_face =
                        psi_i * pass.diff_y[iy * nx + ix].min(pass.diff_y[(iy + 1) * nx + ix]);
                    adv += if h * y[1].abs() <= d_face {
                        y[1] * (ghost.get(ixi, iyi + 1) - ghost.get(ixi, iyi - 1)) / (2.0 * h)
                    } else if y[1] > 0.0 {
                        y[1] * (ghost.get(ixi, iyi + 1) - u.values[i]) / h
                    } else {
                        y[1] * (u.values[i] - ghost.get(ixi, iyi - 1)) / h
                    };
                }
                s += -u.values[i] + adv;
            }
            speed[i] = s;
            sup_speed = sup_speed.max(s.abs());
            sup_abs = sup_abs.max(u.values[i].abs());
            diss_rate += s * s / psi_i;
        }
    }
    diss_rate *= h.powi(n as i32);

    let mut dt_limit = if pass.lam_max * pass.psi_face_max > 0.0 {
        c_cfl * h * h / (n as f64 * pass.psi_face_max * pass.lam_max)
    } else {
        f64::INFINITY
    };
    if mode == Mode::Rescaled {
        if max_abs_coord > 0.0 {
            dt_limit = dt_limit.min(c_cfl * h / max_abs_coord);
        }
        dt_limit = dt_limit.min(0.5);
    }

    StepEval {
        speed,
        dt_limit,
        sup_speed,
        sup_abs,
        lipschitz: pass.lip,
        area: pass.area,
        diss_rate,
    }
}

/// Largest stable explicit step for the current field:
/// `c_cfl * h^2 / (N * psi_max_loc * Lambda)` with `Lambda` the largest
/// x-block Hessian eigenvalue of the surface tension over the faces and
/// `psi_max_loc` the largest mobility value over the faces.
pub fn cfl_dt(
    u: &GraphField,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
    c_cfl: f64,
) -> Result<f64> {
    check_lift_dim(&u.grid, phi.dim)?;
    check_lift_dim(&u.grid, psi.dim)?;
    let faces = face_gradients_from(&apply_boundary(u), &u.grid);
    let (lam, psi_face_max) = face_extrema(&faces, phi, psi);
    if lam * psi_face_max <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(c_cfl * u.grid.h * u.grid.h / (u.grid.dim as f64 * psi_face_max * lam))
}

/// One forward-Euler step `u' = u - dt psi(-G, 1) L[u]`. Errors if `dt`
/// exceeds the stability bound (the CFL formula at factor 0.5).
pub fn step_explicit(
    u: &GraphField,
    dt: f64,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
) -> Result<GraphField> {
    let hard = cfl_dt(u, phi, psi, 0.5)?;
    if dt > hard * (1.0 + 1e-9) {
        return Err(Error::Usage(format!(
            "dt = {dt} exceeds the CFL bound {hard}"
        )));
    }
    let eval = eval_state(u, phi, psi, 0.5, Mode::Physical, &[], 0.0);
    let mut out = u.clone();
    for (v, s) in out.values.iter_mut().zip(&eval.speed) {
        *v += dt * s;
    }
    out.time += dt;
    Ok(out)
}

fn drive(
    fields: &[GraphField],
    params: &FlowParams,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
    mode: Mode,
) -> Result<Vec<Trajectory>> {
    params.validate()?;
    if fields.is_empty() {
        return Err(Error::Usage("no fields to evolve".into()));
    }
    let g0 = &fields[0].grid;
    for f in fields {
        check_lift_dim(&f.grid, phi.dim)?;
        check_lift_dim(&f.grid, psi.dim)?;
        if !f.grid.same_geometry(g0) {
            return Err(Error::Usage("lockstep evolution requires identical grids".into()));
        }
        if !f.is_finite() {
            return Err(Error::Usage("initial field has non-finite values".into()));
        }
    }
    if mode == Mode::Rescaled {
        for f in fields {
            match f.grid.policy {
                BoundaryPolicy::ConeExtension(_) | BoundaryPolicy::DirichletExact(_) => {}
                _ => {
                    return Err(Error::Config(
                        "rescaled flow requires a cone-extension or exact-Dirichlet boundary"
                            .into(),
                    ))
                }
            }
        }
    }

    let coords: Vec<[f64; 2]> = if mode == Mode::Rescaled {
        (0..g0.len()).map(|i| g0.node_coord(i)).collect()
    } else {
        Vec::new()
    };
    let max_abs_coord = coords
        .iter()
        .flat_map(|c| c[..g0.dim].iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));

    let mut exact_times = params.exact_times.clone();
    exact_times.retain(|t| *t > 0.0 && *t <= params.t_end * (1.0 + 1e-12));
    exact_times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    let mut next_exact = 0usize;

    let mut states: Vec<GraphField> = fields.to_vec();
    let mut t = 0.0f64;
    for s in states.iter_mut() {
        s.time = 0.0;
    }
    let mut evals: Vec<StepEval> = states
        .iter()
        .map(|u| eval_state(u, phi, psi, params.cfl_factor, mode, &coords, max_abs_coord))
        .collect();

    let mut trajectories: Vec<Trajectory> = states
        .iter()
        .zip(&evals)
        .map(|(u, e)| Trajectory {
            snapshots: vec![u.clone()],
            records: vec![StepRecord {
                step: 0,
                t: 0.0,
                dt: 0.0,
                sup_speed: e.sup_speed,
                sup_abs: e.sup_abs,
                lipschitz: e.lipschitz,
                area: e.area,
                dissipation: 0.0,
            }],
            lipschitz_flag: false,
        })
        .collect();
    let lip0: Vec<f64> = evals.iter().map(|e| e.lipschitz).collect();
    let mut residual_history: Vec<f64> = Vec::new();

    let mut step = 0usize;
    let mut next_cadence_t = match params.cadence {
        SnapshotCadence::EveryTime(dt_snap) => dt_snap,
        _ => f64::INFINITY,
    };

    let time_eps = 1e-12 * params.t_end.max(1.0);
    loop {
        let stationary = evals.iter().all(|e| e.sup_speed < params.tol_stat);
        let done = t >= params.t_end - time_eps;
        if stationary || done {
            for (traj, u) in trajectories.iter_mut().zip(&states) {
                if traj.snapshots.last().map(|s| s.time) != Some(u.time) {
                    traj.snapshots.push(u.clone());
                }
            }
            return Ok(trajectories);
        }
        if step >= params.max_steps {
            return Err(Error::Convergence {
                message: format!(
                    "no stationarity after {step} steps (t = {t}, target {})",
                    params.t_end
                ),
                residual_history,
            });
        }

        let mut dt = evals.iter().fold(f64::INFINITY, |m, e| m.min(e.dt_limit));
        dt = dt.min(params.t_end - t);
        if next_exact < exact_times.len() {
            let et = exact_times[next_exact];
            if et > t + time_eps {
                dt = dt.min(et - t);
            }
        }
        debug_assert!(dt > 0.0 && dt.is_finite());

        step += 1;
        t += dt;
        for (i, (u, e)) in states.iter_mut().zip(&evals).enumerate() {
            for (v, s) in u.values.iter_mut().zip(&e.speed) {
                *v += dt * s;
            }
            u.time = t;
            if !u.is_finite() {
                return Err(Error::Numerical {
                    step,
                    message: format!(
                        "non-finite value in field {i} at t = {t}; CFL violation or bad data"
                    ),
                });
            }
        }
        let diss_inc: Vec<f64> = evals.iter().map(|e| dt * e.diss_rate).collect();

        evals = states
            .iter()
            .map(|u| eval_state(u, phi, psi, params.cfl_factor, mode, &coords, max_abs_coord))
            .collect();
        residual_history.push(evals.iter().fold(0.0f64, |m, e| m.max(e.sup_speed)));
        if residual_history.len() > 64 {
            residual_history.remove(0);
        }

        let hit_exact = next_exact < exact_times.len()
            && (t - exact_times[next_exact]).abs() <= time_eps;
        if hit_exact {
            next_exact += 1;
        }
        let cadence_hit = match params.cadence {
            SnapshotCadence::EverySteps(k) => k != usize::MAX && step % k == 0,
            SnapshotCadence::EveryTime(_) => {
                if t >= next_cadence_t - time_eps {
                    while t >= next_cadence_t - time_eps {
                        next_cadence_t += match params.cadence {
                            SnapshotCadence::EveryTime(dt_snap) => dt_snap,
                            _ => unreachable!(),
                        };
                    }
                    true
                } else {
                    false
                }
            }
        };

        for (i, traj) in trajectories.iter_mut().enumerate() {
            let r = StepRecord {
                step,
                t,
                dt,
                sup_speed: evals[i].sup_speed,
                sup_abs: evals[i].sup_abs,
                lipschitz: evals[i].lipschitz,
                area: evals[i].area,
                dissipation: traj.records.last().expect("record 0 exists").dissipation
                    + diss_inc[i],
            };
            if r.lipschitz > lip0[i] + 1e-6 {
                traj.lipschitz_flag = true;
            }
            traj.records.push(r);
            if cadence_hit || hit_exact {
                traj.snapshots.push(states[i].clone());
            }
        }
    }
}

/// Integrates the physical flow from `u0` until `t_end` or stationarity.
pub fn evolve(
    u0: &GraphField,
    params: &FlowParams,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
) -> Result<Trajectory> {
    Ok(drive(std::slice::from_ref(u0), params, phi, psi, Mode::Physical)?
        .pop()
        .expect("one trajectory per field"))
}

/// Evolves several fields in lockstep with a shared time step (the minimum
/// of the individual CFL bounds), so their snapshots line up for comparison.
pub fn evolve_many(
    fields: &[GraphField],
    params: &FlowParams,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
) -> Result<Vec<Trajectory>> {
    drive(fields, params, phi, psi, Mode::Physical)
}

/// Integrates the rescaled flow `w_tau = -w + y . grad w - psi L[w]` whose
/// stationary points are the expander profiles.
pub fn evolve_rescaled(
    w0: &GraphField,
    params: &FlowParams,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
) -> Result<Trajectory> {
    Ok(drive(std::slice::from_ref(w0), params, phi, psi, Mode::Rescaled)?
        .pop()
        .expect("one trajectory per field"))
}

pub fn evolve_rescaled_many(
    fields: &[GraphField],
    params: &FlowParams,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
) -> Result<Vec<Trajectory>> {
    drive(fields, params, phi, psi, Mode::Rescaled)
}

/// Runs exactly `steps` rescaled-flow steps at CFL factor `c_cfl` and
/// returns the final state together with the largest instantaneous speed
/// seen along the way. Used for fixed-point residual checks on expander
/// profiles.
pub fn run_steps_rescaled(
    w0: &GraphField,
    steps: usize,
    c_cfl: f64,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
) -> Result<(GraphField, f64)> {
    check_lift_dim(&w0.grid, phi.dim)?;
    check_lift_dim(&w0.grid, psi.dim)?;
    let g = &w0.grid;
    let coords: Vec<[f64; 2]> = (0..g.len()).map(|i| g.node_coord(i)).collect();
    let max_abs_coord = coords
        .iter()
        .flat_map(|c| c[..g.dim].iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let mut u = w0.clone();
    let mut worst = 0.0f64;
    for step in 1..=steps {
        let eval = eval_state(&u, phi, psi, c_cfl, Mode::Rescaled, &coords, max_abs_coord);
        worst = worst.max(eval.sup_speed);
        let dt = eval.dt_limit;
        for (v, s) in u.values.iter_mut().zip(&eval.speed) {
            *v += dt * s;
        }
        u.time += dt;
        if !u.is_finite() {
            return Err(Error::Numerical { step, message: "non-finite value".into() });
        }
    }
    let eval = eval_state(&u, phi, psi, c_cfl, Mode::Rescaled, &coords, max_abs_coord);
    worst = worst.max(eval.sup_speed);
    Ok((u, worst))
}

/// Change of variables `tau = log(2t + 1) / 2`,
/// `w(y) = e^{-tau} u(y e^{tau})` by multilinear interpolation on the
/// physical grid. Errors if a scaled query leaves the physical domain.
pub fn rescale_transform(u: &GraphField, rescaled_grid: &crate::grid::GraphGrid) -> Result<GraphField> {
    if u.time < 0.0 {
        return Err(Error::Usage(format!("physical time must be nonnegative, got {}", u.time)));
    }
    if rescaled_grid.dim != u.grid.dim {
        return Err(Error::Usage("rescaled grid dimension mismatch".into()));
    }
    let tau = (2.0 * u.time + 1.0).ln() / 2.0;
    let scale = (2.0 * u.time + 1.0).sqrt();
    let mut values = Vec::with_capacity(rescaled_grid.len());
    for i in 0..rescaled_grid.len() {
        let y = rescaled_grid.node_coord(i);
        let x = [y[0] * scale, y[1] * scale];
        values.push(u.sample(&x[..u.grid.dim])? / scale);
    }
    Ok(GraphField { grid: rescaled_grid.clone(), values, time: tau })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::ConeSpec;
    use crate::grid::{BoundaryPolicy, ExactSolution, GraphGrid};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn euclid() -> (AnisotropyModel, MobilityModel) {
        (AnisotropyModel::euclidean(2), MobilityModel::euclidean(2))
    }

    #[test]
    fn cfl_formula_on_flat_field() {
        let (phi, psi) = euclid();
        let grid = GraphGrid::symmetric(1, 0.01, 0.5, BoundaryPolicy::LinearExtrapolation)
            .unwrap();
        let u = GraphField::zeros(grid);
        // Lambda = 1 and psi = 1 at zero gradient: dt = c h^2 / N
        let dt = cfl_dt(&u, &phi, &psi, 0.25).unwrap();
        assert!((dt - 2.5e-5).abs() < 1e-18);

        let grid2 = GraphGrid::symmetric(1, 0.02, 0.5, BoundaryPolicy::LinearExtrapolation)
            .unwrap();
        let dt2 = cfl_dt(&GraphField::zeros(grid2), &phi, &psi, 0.25).unwrap();
        assert!((dt2 / dt - 4.0).abs() < 1e-12);
    }

    #[test]
    fn affine_data_is_stationary() {
        let (phi, psi) = euclid();
        let grid = GraphGrid::symmetric(1, 0.05, 1.0, BoundaryPolicy::LinearExtrapolation)
            .unwrap();
        let u = GraphField::from_fn(grid, 0.0, |x| 0.7 * x[0] + 0.2);
        let dt = cfl_dt(&u, &phi, &psi, 0.25).unwrap();
        let v = step_explicit(&u, dt, &phi, &psi).unwrap();
        // nodal rounding of the affine samples leaves last-ulp wiggle in the
        // face differences; the update is zero to machine precision
        for (a, b) in u.values.iter().zip(&v.values) {
            assert!((a - b).abs() < 1e-15);
        }

        let params = FlowParams { t_end: 0.1, ..FlowParams::new(0.1) };
        let traj = evolve(&u, &params, &phi, &psi).unwrap();
        assert!(traj.final_record().sup_speed < 1e-12);
    }

    #[test]
    fn step_rejects_unstable_dt() {
        let (phi, psi) = euclid();
        let grid = GraphGrid::symmetric(1, 0.01, 0.5, BoundaryPolicy::LinearExtrapolation)
            .unwrap();
        let u = GraphField::from_fn(grid, 0.0, |x| (3.0 * x[0]).sin() * 0.2);
        let hard = cfl_dt(&u, &phi, &psi, 0.5).unwrap();
        assert!(matches!(
            step_explicit(&u, 2.0 * hard, &phi, &psi),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn vertical_translation_rides_along() {
        // the update is built from differences, so shifted data moves
        // identically (up to float associativity)
        let (phi, psi) = euclid();
        let grid = GraphGrid::periodic_1d(2.0, 64).unwrap();
        let u = GraphField::from_fn(grid.clone(), 0.0, |x| (std::f64::consts::PI * x[0]).sin() * 0.3);
        let mut shifted = u.clone();
        for v in shifted.values.iter_mut() {
            *v += 0.1;
        }
        let params = FlowParams::new(0.01);
        let a = evolve(&u, &params, &phi, &psi).unwrap();
        let b = evolve(&shifted, &params, &phi, &psi).unwrap();
        for (x, y) in a.final_field().values.iter().zip(&b.final_field().values) {
            assert!((y - x - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn grim_reaper_translates_at_unit_speed() {
        let (phi, psi) = euclid();
        let h = 0.01;
        let grid = GraphGrid::symmetric(
            1,
            h,
            1.2,
            BoundaryPolicy::DirichletExact(ExactSolution::grim_reaper()),
        )
        .unwrap();
        let u = GraphField::from_fn(grid, 0.0, |x| -x[0].cos().ln());
        let dt = cfl_dt(&u, &phi, &psi, 0.25).unwrap();
        let v = step_explicit(&u, dt, &phi, &psi).unwrap();
        for i in 1..u.values.len() - 1 {
            let rate = (v.values[i] - u.values[i]) / dt;
            assert!((rate - 1.0).abs() < 10.0 * h * h, "node {i}: rate {rate}");
        }
    }

    #[test]
    fn zero_data_terminates_immediately() {
        let (phi, psi) = euclid();
        let grid = GraphGrid::periodic_1d(2.0, 32).unwrap();
        let u = GraphField::zeros(grid);
        let traj = evolve(&u, &FlowParams::new(10.0), &phi, &psi).unwrap();
        assert_eq!(traj.records.len(), 1);
        assert!(traj.final_field().values.iter().all(|v| *v == 0.0));
    }

    fn random_trig(rng: &mut impl Rng, period: f64, amp: f64) -> impl Fn(f64) -> f64 {
        let coef: Vec<(f64, f64, f64)> = (1..=3)
            .map(|k| {
                (
                    rng.gen_range(-amp..amp),
                    k as f64 * std::f64::consts::TAU / period,
                    rng.gen_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        move |x| coef.iter().map(|&(a, w, p)| a * (w * x + p).sin()).sum()
    }

    #[test]
    fn ordered_pairs_stay_ordered() {
        // short version of the acceptance suite's comparison criterion
        let (phi, psi) = euclid();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let grid = GraphGrid::periodic_1d(2.0, 100).unwrap();
        for pair in 0..20 {
            let f = random_trig(&mut rng, 2.0, 0.15);
            let gap = random_trig(&mut rng, 2.0, 0.1);
            let lower = GraphField::from_fn(grid.clone(), 0.0, |x| f(x[0]));
            let upper = GraphField::from_fn(grid.clone(), 0.0, |x| {
                let g: f64 = gap(x[0]);
                f(x[0]) + g * g + 0.01
            });
            let params = FlowParams {
                cadence: SnapshotCadence::EverySteps(10),
                ..FlowParams::new(0.02)
            };
            let trajs = evolve_many(&[lower, upper], &params, &phi, &psi).unwrap();
            for (a, b) in trajs[0].snapshots.iter().zip(&trajs[1].snapshots) {
                assert_eq!(a.time, b.time);
                for (x, y) in a.values.iter().zip(&b.values) {
                    assert!(x - y <= 1e-10, "pair {pair}: ordering broken by {}", x - y);
                }
            }
        }
    }

    #[test]
    fn monotonicity_probe_single_node_bumps() {
        // raising one nodal value must not push the update at its neighbors
        // down (beyond roundoff) when dt honors the CFL bound
        let (phi, psi) = euclid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = GraphGrid::periodic_1d(2.0, 64).unwrap();
        let f = random_trig(&mut rng, 2.0, 0.15);
        let u = GraphField::from_fn(grid, 0.0, |x| f(x[0]));
        let dt = cfl_dt(&u, &phi, &psi, 0.25).unwrap();
        let base = step_explicit(&u, dt, &phi, &psi).unwrap();
        let delta = u.grid.h / 2.0;
        let n = u.values.len();
        for i in (0..n).step_by(7) {
            let mut pert = u.clone();
            pert.values[i] += delta;
            let stepped = step_explicit(&pert, dt, &phi, &psi).unwrap();
            for off in [n - 1, 0, 1] {
                let j = (i + off) % n;
                assert!(
                    stepped.values[j] >= base.values[j] - 1e-12,
                    "bump at {i} decreased update at {j} by {}",
                    base.values[j] - stepped.values[j]
                );
            }
        }
    }

    #[test]
    fn rescaled_zero_is_stationary() {
        let (phi, psi) = euclid();
        let cone = ConeSpec::abs_cone(1, 0.0);
        let grid =
            GraphGrid::symmetric(1, 0.05, 2.0, BoundaryPolicy::ConeExtension(cone)).unwrap();
        let u = GraphField::zeros(grid);
        let traj = evolve_rescaled(&u, &FlowParams::new(5.0), &phi, &psi).unwrap();
        assert_eq!(traj.records.len(), 1);
    }

    #[test]
    fn rescale_transform_times_and_identity() {
        let cone = ConeSpec::abs_cone(1, 1.0);
        let grid = GraphGrid::symmetric(
            1,
            0.05,
            4.0,
            BoundaryPolicy::ConeExtension(cone.clone()),
        )
        .unwrap();
        let target =
            GraphGrid::symmetric(1, 0.05, 1.0, BoundaryPolicy::ConeExtension(cone.clone()))
                .unwrap();

        // t = 0 is the identity on the restricted grid
        let u0 = GraphField::from_fn(grid.clone(), 0.0, |x| cone.evaluate(x));
        let w = rescale_transform(&u0, &target).unwrap();
        assert_eq!(w.time, 0.0);
        for i in 0..target.len() {
            let y = target.node_coord(i)[0];
            assert!((w.values[i] - y.abs()).abs() < 1e-12);
        }

        // t = (e^2 - 1)/2 maps to tau = 1
        let t1 = (std::f64::consts::E.powi(2) - 1.0) / 2.0;
        let u1 = GraphField { time: t1, ..u0.clone() };
        let w1 = rescale_transform(&u1, &target).unwrap();
        assert!((w1.time - 1.0).abs() < 1e-14);
        // the cone is scale invariant, so the rescaled field is again the cone
        for i in 0..target.len() {
            let y = target.node_coord(i)[0];
            assert!((w1.values[i] - y.abs()).abs() < 1e-12);
        }

        // scaled queries outside the physical box are a domain error
        let small = GraphGrid::symmetric(
            1,
            0.05,
            1.0,
            BoundaryPolicy::ConeExtension(cone.clone()),
        )
        .unwrap();
        let u_small = GraphField { time: t1, grid: small, values: w1.values.clone() };
        let wide =
            GraphGrid::symmetric(1, 0.05, 2.0, BoundaryPolicy::ConeExtension(cone)).unwrap();
        assert!(matches!(rescale_transform(&u_small, &wide), Err(Error::Domain(_))));
    }

    #[test]
    fn exact_times_are_hit() {
        let (phi, psi) = euclid();
        let grid = GraphGrid::periodic_1d(2.0, 32).unwrap();
        let u = GraphField::from_fn(grid, 0.0, |x| 0.2 * (std::f64::consts::PI * x[0]).sin());
        let params = FlowParams {
            exact_times: vec![0.004, 0.01],
            ..FlowParams::new(0.02)
        };
        let traj = evolve(&u, &params, &phi, &psi).unwrap();
        for t in [0.004, 0.01] {
            assert!(
                traj.snapshots.iter().any(|s| (s.time - t).abs() < 1e-12),
                "missing snapshot at {t}"
            );
        }
    }
}
