//! Theorem-level verification runners.
//!
//! Each runner evolves the flow in a configuration matching one of the
//! qualitative statements about it (rescaled convergence to expanders,
//! flattening toward hyperplanes, stability of mean convex cones) or against
//! an independent exact solution (grim reaper, the stationary expander ODE),
//! and produces a structured pass/fail report. Every runner echoes its
//! configuration and is deterministic: fixed iteration order, randomness only
//! through an explicit seed.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::anisotropy::{AnisotropyModel, Family, MobilityModel};
use crate::barriers::{comparison_check, periodic_barrier_profile, PeriodicBarrierSpec};
use crate::cone::ConeSpec;
use crate::error::{Error, Result};
use crate::flow::{
    evolve, evolve_many, evolve_rescaled_many, FlowParams, SnapshotCadence, Trajectory,
};
use crate::grid::{BoundaryPolicy, ExactSolution, GraphField, GraphGrid};
use crate::operator::curvature_operator;
use crate::report::{ExperimentReport, Sense};
use crate::selfsimilar::{compute_expander, expander_params, make_cone_field};

/// Compactly supported `cos^2` profile: 1 at 0, 0 for `|s| >= 1`, C^{1,1}.
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let c = (std::f64::consts::FRAC_PI_2 * s).cos();
        c * c
    }
}

/// Perturbations of the initial data used by the stability experiments.
#[derive(Clone, Debug)]
pub enum PerturbationSpec {
    /// `K (1 + |x|)^{1 - delta} bump(|x| / width)`: the sublinear class of
    /// the rescaled-convergence statement. Support `|x| <= width`.
    SublinearBump { k: f64, delta: f64, width: f64 },
    /// `amplitude * bump(2|x| / width)`: compactly supported with full
    /// support width `width`.
    VanishingBump { amplitude: f64, width: f64 },
    /// A constant vertical offset.
    BoundedOffset { offset: f64 },
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PerturbationSpec::SublinearBump { k, delta, width } => {
                if *k < 0.0 {
                    return Err(Error::Config(format!("k must be nonnegative, got {k}")));
                }
                if !(*delta > 0.0 && *delta < 1.0) {
                    return Err(Error::Config(format!("delta out of (0,1): {delta}")));
                }
                if !(*width > 0.0) {
                    return Err(Error::Config(format!("width must be positive, got {width}")));
                }
            }
            PerturbationSpec::VanishingBump { width, .. } => {
                if !(*width > 0.0) {
                    return Err(Error::Config(format!("width must be positive, got {width}")));
                }
            }
            PerturbationSpec::BoundedOffset { .. } => {}
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self {
            PerturbationSpec::SublinearBump { k, delta, width } => {
                k * (1.0 + r).powf(1.0 - delta) * bump(r / width)
            }
            PerturbationSpec::VanishingBump { amplitude, width } => {
                amplitude * bump(2.0 * r / width)
            }
            PerturbationSpec::BoundedOffset { offset } => *offset,
        }
    }

    pub fn echo(&self) -> String {
        match self {
            PerturbationSpec::SublinearBump { k, delta, width } => {
                format!("sublinear k={k} delta={delta} width={width}")
            }
            PerturbationSpec::VanishingBump { amplitude, width } => {
                format!("vanishing amplitude={amplitude} width={width}")
            }
            PerturbationSpec::BoundedOffset { offset } => format!("offset m={offset}"),
        }
    }
}

fn sup_on_unit_ball(a: &GraphField, b: &GraphField) -> f64 {
    let grid = &a.grid;
    let mut sup = 0.0f64;
    for idx in 0..grid.len() {
        let x = grid.node_coord(idx);
        let r2: f64 = x[..grid.dim].iter().map(|v| v * v).sum();
        if r2 <= 1.0 {
            sup = sup.max((a.values[idx] - b.values[idx]).abs());
        }
    }
    sup
}

fn max_consecutive_increase(series: &[f64]) -> f64 {
    series.windows(2).fold(0.0f64, |m, w| m.max(w[1] - w[0]))
}

// ---------------------------------------------------------------------------
// rescaled convergence toward the expander
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct RescaledConvergenceConfig {
    pub h: f64,
    pub half_width: f64,
    pub tol_stat: f64,
    /// Threshold on the final local gap `D`.
    pub final_gap_tol: f64,
    pub cfl_factor: f64,
    pub snapshot_dt: f64,
}

impl Default for RescaledConvergenceConfig {
    fn default() -> Self {
        RescaledConvergenceConfig {
            h: 0.02,
            half_width: 8.0,
            tol_stat: 1e-8,
            final_gap_tol: 1e-2,
            cfl_factor: 0.25,
            snapshot_dt: 0.25,
        }
    }
}

/// Runs the rescaled flow from the perturbed cone and the cone itself in
/// lockstep; the local gap `D(tau) = sup over |y| <= 1 of |perturbed - cone|`
/// must shrink, the cone leg must land on the expander, and a constant
/// offset must decay at unit rate.
pub fn exp_rescaled_convergence(
    cone: &ConeSpec,
    pert: &PerturbationSpec,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
    cfg: &RescaledConvergenceConfig,
) -> Result<ExperimentReport> {
    pert.validate()?;
    let is_offset = matches!(pert, PerturbationSpec::BoundedOffset { .. });
    if !matches!(pert, PerturbationSpec::SublinearBump { .. }) && !is_offset {
        return Err(Error::Config(
            "rescaled convergence takes a sublinear bump (or the constant-offset limit case)"
                .into(),
        ));
    }
    let grid = GraphGrid::symmetric(
        cone.dim(),
        cfg.h,
        cfg.half_width,
        BoundaryPolicy::ConeExtension(cone.clone()),
    )?;
    let base = make_cone_field(cone, &grid)?;
    let mut perturbed = base.clone();
    for idx in 0..grid.len() {
        let x = grid.node_coord(idx);
        perturbed.values[idx] += pert.evaluate(&x[..grid.dim]);
    }

    let params = FlowParams {
        cfl_factor: cfg.cfl_factor,
        tol_stat: cfg.tol_stat,
        cadence: SnapshotCadence::EveryTime(cfg.snapshot_dt),
        ..FlowParams::new(40.0)
    };
    let trajs = evolve_rescaled_many(&[perturbed, base], &params, phi, psi)?;
    let (pert_traj, cone_traj) = (&trajs[0], &trajs[1]);

    let gaps: Vec<(f64, f64)> = pert_traj
        .snapshots
        .iter()
        .zip(&cone_traj.snapshots)
        .map(|(a, b)| (a.time, sup_on_unit_ball(a, b)))
        .collect();

    let mut report = ExperimentReport::new("rescaled-convergence");
    let echo = format!("{} h={} half_width={}", pert.echo(), cfg.h, cfg.half_width);
    report.config_echo = echo.clone();

    let last_half: Vec<f64> =
        gaps.iter().skip(gaps.len() / 2).map(|(_, d)| *d).collect();
    report.push(
        "gap_increase_last_half",
        &echo,
        max_consecutive_increase(&last_half),
        1e-10,
        Sense::AtMost,
    );
    let final_gap = gaps.last().map(|(_, d)| *d).unwrap_or(0.0);
    report.push("final_gap", &echo, final_gap, cfg.final_gap_tol, Sense::AtMost);

    // the cone leg must agree with the independently computed expander
    let profile = compute_expander(cone, &expander_params(cfg.tol_stat), phi, psi, &grid)?;
    let mut sup = 0.0f64;
    for (a, b) in cone_traj.final_field().values.iter().zip(&profile.field.values) {
        sup = sup.max((a - b).abs());
    }
    report.push("cone_leg_vs_expander", &echo, sup, 10.0 * cfg.tol_stat, Sense::AtMost);

    if is_offset {
        // the rescaled equation contracts additive constants at unit rate:
        // fit the decay exponent of D over an early window
        let window: Vec<(f64, f64)> = gaps
            .iter()
            .filter(|(tau, d)| *tau >= 1.0 && *tau <= 5.0 && *d > 0.0)
            .cloned()
            .collect();
        if window.len() >= 2 {
            let (t0, d0) = window[0];
            let (t1, d1) = window[window.len() - 1];
            let rate = -(d1.ln() - d0.ln()) / (t1 - t0);
            report.push("offset_decay_rate_error", &echo, (rate - 1.0).abs(), 0.1, Sense::AtMost);
        } else {
            report.push("offset_decay_rate_error", &echo, f64::INFINITY, 0.1, Sense::AtMost);
        }
    }

    report.push(
        "lipschitz_excess",
        &echo,
        pert_traj.lipschitz_excess().max(cone_traj.lipschitz_excess()),
        1e-6,
        Sense::AtMost,
    );
    Ok(report)
}

// ---------------------------------------------------------------------------
// hyperplane stability
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct HyperplaneConfig {
    pub period: f64,
    pub h: f64,
    pub t_end: f64,
    /// `M(T) / M(0)` must fall below this.
    pub decay_target: f64,
    pub cfl_factor: f64,
    pub snapshot_dt: f64,
}

impl Default for HyperplaneConfig {
    fn default() -> Self {
        HyperplaneConfig {
            period: 16.0,
            h: 0.02,
            t_end: 30.0,
            decay_target: 0.1,
            cfl_factor: 0.25,
            snapshot_dt: 0.5,
        }
    }
}

/// Evolves a compactly supported bump on a periodic grid (periodization
/// stands in for decay at infinity). `M(t) = sup |u|` must be nonincreasing
/// and fall below `decay_target * M(0)`; a matched periodic barrier
/// dominates the solution whenever it dominates the initial bump; the
/// energy-dissipation inequality holds; flipping the bump's sign mirrors
/// `M(t)` exactly for coordinatewise-even tensions.
pub fn exp_hyperplane_stability(
    pert: &PerturbationSpec,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
    cfg: &HyperplaneConfig,
) -> Result<ExperimentReport> {
    pert.validate()?;
    let PerturbationSpec::VanishingBump { amplitude, width } = pert else {
        return Err(Error::Config("hyperplane stability takes a vanishing bump".into()));
    };
    if cfg.period < 8.0 * width {
        return Err(Error::Config(format!(
            "period {} below 8x the bump width {width}",
            cfg.period
        )));
    }
    let n = (cfg.period / cfg.h).round() as usize;
    let grid = GraphGrid::periodic_1d(cfg.period, n)?;
    let u0 = GraphField::from_fn(grid.clone(), 0.0, |x| pert.evaluate(x));

    let mut report = ExperimentReport::new("hyperplane-stability");
    let echo = format!("{} period={} h={}", pert.echo(), cfg.period, cfg.h);
    report.config_echo = echo.clone();

    // matched periodic barrier: plateau above the bump, same period
    let barrier_spec = if *amplitude > 0.0 {
        Some(PeriodicBarrierSpec::new(cfg.period / 8.0, *amplitude, *amplitude / 4.0)?)
    } else {
        None
    };
    let mut legs = vec![u0.clone()];
    if let Some(spec) = &barrier_spec {
        let f0 = periodic_barrier_profile(spec, &grid)?;
        let dominated = u0.values.iter().zip(&f0.values).all(|(a, b)| a <= b);
        if !dominated {
            return Err(Error::Config(
                "initial bump is not dominated by the matched periodic barrier".into(),
            ));
        }
        legs.push(f0);
    }
    // sign-flipped leg, meaningful when phi(-p1, .., 1) = phi(p1, .., 1)
    let even = tension_is_coordinatewise_even(phi) && tension_is_coordinatewise_even_psi(psi);
    if even {
        let mut flipped = u0.clone();
        for v in flipped.values.iter_mut() {
            *v = -*v;
        }
        legs.push(flipped);
    }

    let params = FlowParams {
        cfl_factor: cfg.cfl_factor,
        cadence: SnapshotCadence::EveryTime(cfg.snapshot_dt),
        tol_stat: 1e-9,
        ..FlowParams::new(cfg.t_end)
    };
    let trajs = evolve_many(&legs, &params, phi, psi)?;
    let bump_traj = &trajs[0];

    // (a) M(t) nonincreasing, checked at every step
    let m_series: Vec<f64> = bump_traj.records.iter().map(|r| r.sup_abs).collect();
    report.push(
        "sup_norm_increase",
        &echo,
        max_consecutive_increase(&m_series),
        1e-12,
        Sense::AtMost,
    );

    // (b) decay of the sup norm
    let m0 = m_series[0];
    let m_end = *m_series.last().expect("records nonempty");
    let ratio = if m0 > 0.0 { m_end / m0 } else { 0.0 };
    report.push("sup_norm_ratio", &echo, ratio, cfg.decay_target, Sense::AtMost);

    // barrier domination at every snapshot
    if barrier_spec.is_some() {
        let check = comparison_check(bump_traj, &trajs[1])?;
        report.push(
            "barrier_domination_violation",
            &echo,
            check.metrics[0].value,
            1e-10,
            Sense::AtMost,
        );
    }

    // (c) energy dissipation against the anisotropic-area drop
    let rec = bump_traj.records.as_slice();
    let area0 = rec[0].area;
    let area_end = rec[rec.len() - 1].area;
    let dissipated = rec[rec.len() - 1].dissipation;
    let dt_max = rec.iter().fold(0.0f64, |m, r| m.max(r.dt));
    let slack = 5.0 * dt_max / (cfg.h * cfg.h);
    let drop = area0 - area_end;
    report.push(
        "dissipation_vs_area_drop",
        &echo,
        dissipated,
        drop * (1.0 + slack),
        Sense::AtMost,
    );
    report.push(
        "dissipation_excess_fraction",
        &echo,
        (dissipated - drop) / area0,
        0.01,
        Sense::AtMost,
    );

    if even {
        let flip_traj = trajs.last().expect("flip leg present");
        let mut worst = 0.0f64;
        for (a, b) in bump_traj.records.iter().zip(&flip_traj.records) {
            worst = worst.max((a.sup_abs - b.sup_abs).abs());
        }
        report.push("sign_flip_asymmetry", &echo, worst, 1e-12, Sense::AtMost);
    }

    report.push(
        "lipschitz_excess",
        &echo,
        bump_traj.lipschitz_excess(),
        1e-6,
        Sense::AtMost,
    );
    Ok(report)
}

fn tension_is_coordinatewise_even(phi: &AnisotropyModel) -> bool {
    probe_even(|p| phi.value_raw(p), phi.dim)
}

fn tension_is_coordinatewise_even_psi(psi: &MobilityModel) -> bool {
    probe_even(|p| psi.value_raw(p), psi.dim)
}

fn probe_even(f: impl Fn(&[f64]) -> f64, dim: usize) -> bool {
    let probes: [[f64; 3]; 4] =
        [[0.7, 1.0, 0.3], [-1.3, 0.4, 1.0], [0.2, -0.9, 0.5], [1.0, 0.0, -0.6]];
    for p in &probes {
        let v = f(&p[..dim]);
        for a in 0..dim {
            let mut q = *p;
            q[a] = -q[a];
            if (f(&q[..dim]) - v).abs() > 1e-13 * v.abs().max(1.0) {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// stability of mean convex cones (N = 2)
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct MeanConvexConfig {
    pub h: f64,
    pub half_width: f64,
    pub t_end: f64,
    /// Threshold on the final local gap `sup over |x| <= 1 of |u - cone
    /// evolution|`.
    pub gap_tol: f64,
    pub cfl_factor: f64,
    pub snapshot_dt: f64,
}

impl Default for MeanConvexConfig {
    fn default() -> Self {
        MeanConvexConfig {
            h: 0.05,
            half_width: 6.4,
            t_end: 6.0,
            gap_tol: 2e-2,
            cfl_factor: 0.25,
            snapshot_dt: 0.25,
        }
    }
}

/// Evolves a compact perturbation of a rotationally symmetric cone in two
/// dimensions alongside the cone itself. Preconditions: the discrete
/// curvature of the cone is strictly negative away from the apex (mean
/// convexity for this tension). The cone evolution must dominate the cone
/// and grow like `sqrt(t)` at the apex; the local gap must shrink below
/// tolerance.
pub fn exp_meanconvex_stability(
    cone: &ConeSpec,
    pert: &PerturbationSpec,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
    cfg: &MeanConvexConfig,
) -> Result<ExperimentReport> {
    pert.validate()?;
    let ConeSpec::AbsCone { dim: 2, slope } = cone else {
        return Err(Error::Config(
            "mean convex stability runs on a rotationally symmetric cone in two dimensions"
                .into(),
        ));
    };
    if !matches!(pert, PerturbationSpec::VanishingBump { .. }) {
        return Err(Error::Config("mean convex stability takes a vanishing bump".into()));
    }
    let grid = GraphGrid::symmetric(
        2,
        cfg.h,
        cfg.half_width,
        BoundaryPolicy::ConeExtension(cone.clone()),
    )?;
    let base = make_cone_field(cone, &grid)?;

    let mut report = ExperimentReport::new("meanconvex-stability");
    let echo = format!(
        "{} slope={slope} h={} half_width={} T={}",
        pert.echo(),
        cfg.h,
        cfg.half_width,
        cfg.t_end
    );
    report.config_echo = echo.clone();

    // precondition: strict mean convexity away from the apex
    let curv = curvature_operator(&base, phi)?;
    let mut worst_sign = f64::NEG_INFINITY;
    let mut at_unit = f64::NAN;
    for idx in 0..grid.len() {
        let x = grid.node_coord(idx);
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r >= 0.25 && r <= 0.9 * cfg.half_width {
            worst_sign = worst_sign.max(curv.values[idx]);
        }
        if (x[0] - 1.0).abs() < 0.25 * cfg.h && x[1].abs() < 0.25 * cfg.h {
            at_unit = curv.values[idx];
        }
    }
    report.push("cone_curvature_max_off_apex", &echo, worst_sign, -1e-3, Sense::AtMost);
    // closed form for the Euclidean tension: -slope / (r sqrt(1 + slope^2))
    if matches!(phi.family, Family::Euclidean) {
        let exact = -slope / (1.0 + slope * slope).sqrt();
        report.push(
            "cone_curvature_at_r1_error",
            &echo,
            (at_unit - exact).abs(),
            10.0 * cfg.h * cfg.h,
            Sense::AtMost,
        );
    }
    if worst_sign > -1e-3 {
        return Err(Error::Config(format!(
            "cone is not strictly mean convex for this tension (max curvature off apex \
             {worst_sign})"
        )));
    }

    let mut perturbed = base.clone();
    for idx in 0..grid.len() {
        let x = grid.node_coord(idx);
        perturbed.values[idx] += pert.evaluate(&x[..2]);
    }

    let params = FlowParams {
        cfl_factor: cfg.cfl_factor,
        cadence: SnapshotCadence::EveryTime(cfg.snapshot_dt),
        tol_stat: 0.0,
        ..FlowParams::new(cfg.t_end)
    };
    let trajs = evolve_many(&[perturbed, base.clone()], &params, phi, psi)?;
    let (pert_traj, cone_traj) = (&trajs[0], &trajs[1]);

    // cone evolution dominates the cone
    let mut min_gap = f64::INFINITY;
    for snap in &cone_traj.snapshots {
        for (v, c) in snap.values.iter().zip(&base.values) {
            min_gap = min_gap.min(v - c);
        }
    }
    report.push(
        "cone_evolution_below_cone",
        &echo,
        -min_gap,
        5.0 * cfg.h * cfg.h,
        Sense::AtMost,
    );

    // apex grows like sqrt(t): u(0, t) / sqrt(t) constant over the later half
    let mut quotients = Vec::new();
    for snap in &cone_traj.snapshots {
        if snap.time >= cfg.t_end / 2.0 {
            quotients.push(snap.center_value() / snap.time.sqrt());
        }
    }
    let spread = if quotients.len() >= 2 {
        let (lo, hi) = quotients
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| (lo.min(*q), hi.max(*q)));
        (hi - lo) / lo.abs().max(1e-30)
    } else {
        f64::INFINITY
    };
    report.push("apex_sqrt_growth_spread", &echo, spread, 0.02, Sense::AtMost);

    // the local gap shrinks and ends below tolerance
    let gaps: Vec<f64> = pert_traj
        .snapshots
        .iter()
        .zip(&cone_traj.snapshots)
        .map(|(a, b)| sup_on_unit_ball(a, b))
        .collect();
    let last_half: Vec<f64> = gaps.iter().skip(gaps.len() / 2).cloned().collect();
    report.push(
        "gap_increase_last_half",
        &echo,
        max_consecutive_increase(&last_half),
        1e-10,
        Sense::AtMost,
    );
    report.push("final_gap", &echo, *gaps.last().expect("snapshots"), cfg.gap_tol, Sense::AtMost);
    report.push(
        "lipschitz_excess",
        &echo,
        pert_traj.lipschitz_excess().max(cone_traj.lipschitz_excess()),
        1e-6,
        Sense::AtMost,
    );
    Ok(report)
}

// ---------------------------------------------------------------------------
// exact-solution oracles
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct GrimReaperConfig {
    pub h: f64,
    pub half_width: f64,
    pub t_end: f64,
    pub sup_error_tol: f64,
    pub cfl_factor: f64,
    /// Also run at `h/2` and report the observed order.
    pub refine: bool,
}

impl Default for GrimReaperConfig {
    fn default() -> Self {
        GrimReaperConfig {
            h: 0.01,
            half_width: 1.2,
            t_end: 1.0,
            sup_error_tol: 1e-3,
            cfl_factor: 0.25,
            refine: true,
        }
    }
}

fn grim_reaper_error(cfg: &GrimReaperConfig, h: f64, phi: &AnisotropyModel, psi: &MobilityModel)
    -> Result<(f64, f64)> {
    let grid = GraphGrid::symmetric(
        1,
        h,
        cfg.half_width,
        BoundaryPolicy::DirichletExact(ExactSolution::grim_reaper()),
    )?;
    let u0 = GraphField::from_fn(grid.clone(), 0.0, |x| -x[0].cos().ln());
    let params = FlowParams {
        cfl_factor: cfg.cfl_factor,
        exact_times: vec![cfg.t_end],
        tol_stat: 0.0,
        ..FlowParams::new(cfg.t_end)
    };
    let traj = evolve(&u0, &params, phi, psi)?;
    let end = traj.final_field();
    let mut sup = 0.0f64;
    for idx in 0..grid.len() {
        let x = grid.node_coord(idx)[0];
        let exact = cfg.t_end - x.cos().ln();
        sup = sup.max((end.values[idx] - exact).abs());
    }
    Ok((sup, traj.lipschitz_excess()))
}

/// Validates the integrator against the translating exact solution
/// `u(x, t) = t - log cos x` of the isotropic 1-D flow.
pub fn oracle_grim_reaper(
    phi: &AnisotropyModel,
    psi: &MobilityModel,
    cfg: &GrimReaperConfig,
) -> Result<ExperimentReport> {
    if !matches!(phi.family, Family::Euclidean) || !matches!(psi.family, Family::Euclidean) {
        return Err(Error::Config(
            "the grim reaper solves the isotropic flow; use Euclidean tension and mobility"
                .into(),
        ));
    }
    let mut report = ExperimentReport::new("grim-reaper");
    let echo = format!("h={} T={} half_width={}", cfg.h, cfg.t_end, cfg.half_width);
    report.config_echo = echo.clone();
    let (err, lip_excess) = grim_reaper_error(cfg, cfg.h, phi, psi)?;
    report.push("sup_error", &echo, err, cfg.sup_error_tol, Sense::AtMost);
    if cfg.refine {
        let (err_fine, _) = grim_reaper_error(cfg, cfg.h / 2.0, phi, psi)?;
        let order = (err / err_fine).log2();
        report.push("observed_order", &echo, order, 1.9, Sense::AtLeast);
    }
    report.push("lipschitz_excess", &echo, lip_excess, 1e-6, Sense::AtMost);
    Ok(report)
}

/// Solves the stationary rescaled profile equation in one dimension,
/// `w'' / (1 + w'^2) = w - y w'`, by shooting on `w(0)` with `w'(0) = 0`
/// until the far slope matches `alpha`; returns `w(0)`.
///
/// This is the independent oracle for [`compute_expander`]: the profile
/// solves the same stationarity relation but is found by time marching.
pub fn oracle_expander_ode(alpha: f64, tol: f64) -> Result<f64> {
    if alpha < 0.0 {
        return Err(Error::Usage(format!("slope must be nonnegative, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let y_max = 10.0;
    let steps = 40_000usize;
    let dy = y_max / steps as f64;
    // returns the far slope, or +inf on blow-up (overshoot)
    let shoot = |a: f64| -> f64 {
        let mut w = a;
        let mut v = 0.0f64;
        let mut y = 0.0f64;
        let f = |y: f64, w: f64, v: f64| (1.0 + v * v) * (w - y * v);
        for _ in 0..steps {
            let k1v = f(y, w, v);
            let k1w = v;
            let k2v = f(y + 0.5 * dy, w + 0.5 * dy * k1w, v + 0.5 * dy * k1v);
            let k2w = v + 0.5 * dy * k1v;
            let k3v = f(y + 0.5 * dy, w + 0.5 * dy * k2w, v + 0.5 * dy * k2v);
            let k3w = v + 0.5 * dy * k2v;
            let k4v = f(y + dy, w + dy * k3w, v + dy * k3v);
            let k4w = v + dy * k3v;
            w += dy / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
            v += dy / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            y += dy;
            if !v.is_finite() || !w.is_finite() || v > alpha + 5.0 {
                return f64::INFINITY;
            }
        }
        v
    };

    let mut lo = 0.0f64; // shoot(0) = 0 < alpha
    let mut hi = alpha.max(1.0);
    let mut grow = 0;
    while shoot(hi) < alpha {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::Convergence {
                message: format!("could not bracket the shooting parameter for slope {alpha}"),
                residual_history: vec![],
            });
        }
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if shoot(mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// seeded comparison suite
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ComparisonConfig {
    pub pairs: usize,
    pub seed: u64,
    pub period: f64,
    pub nodes: usize,
    pub t_end: f64,
    /// Target Lipschitz constant of the generated data.
    pub lipschitz: f64,
    pub cfl_factor: f64,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            pairs: 100,
            seed: 42,
            period: 2.0,
            nodes: 100,
            t_end: 0.04,
            lipschitz: 0.8,
            cfl_factor: 0.25,
        }
    }
}

/// A seeded random Lipschitz field on a periodic grid (a low-order random
/// trigonometric polynomial rescaled to the requested Lipschitz constant).
pub fn random_lipschitz_field(
    rng: &mut ChaCha8Rng,
    grid: &GraphGrid,
    lipschitz: f64,
) -> GraphField {
    let period = grid.period(0);
    let coef: Vec<(f64, f64, f64)> = (1..=4)
        .map(|k| {
            (
                rng.gen_range(-1.0..1.0) / k as f64,
                k as f64 * std::f64::consts::TAU / period,
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let mut u = GraphField::from_fn(grid.clone(), 0.0, |x| {
        coef.iter().map(|&(a, w, p)| a * (w * x[0] + p).sin()).sum()
    });
    let lip = u.lipschitz();
    if lip > 0.0 {
        let scale = lipschitz / lip;
        for v in u.values.iter_mut() {
            *v *= scale;
        }
    }
    u
}

/// Evolves seeded random ordered pairs in lockstep and reports the worst
/// ordering violation across every step.
pub fn comparison_suite(
    phi: &AnisotropyModel,
    psi: &MobilityModel,
    cfg: &ComparisonConfig,
) -> Result<ExperimentReport> {
    let grid = GraphGrid::periodic_1d(cfg.period, cfg.nodes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = f64::NEG_INFINITY;
    let mut lip_excess = 0.0f64;
    for _ in 0..cfg.pairs {
        let lower = random_lipschitz_field(&mut rng, &grid, cfg.lipschitz);
        let gap = random_lipschitz_field(&mut rng, &grid, cfg.lipschitz / 4.0);
        let mut upper = lower.clone();
        for (v, g) in upper.values.iter_mut().zip(&gap.values) {
            *v += g.abs();
        }
        let params = FlowParams {
            cfl_factor: cfg.cfl_factor,
            cadence: SnapshotCadence::EverySteps(1),
            tol_stat: 0.0,
            ..FlowParams::new(cfg.t_end)
        };
        let trajs = evolve_many(&[lower, upper], &params, phi, psi)?;
        let check = comparison_check(&trajs[0], &trajs[1])?;
        worst = worst.max(check.metrics[0].value);
        lip_excess = lip_excess
            .max(trajs[0].lipschitz_excess())
            .max(trajs[1].lipschitz_excess());
    }
    let mut report = ExperimentReport::new("comparison-suite");
    let echo = format!(
        "pairs={} seed={} nodes={} t_end={} family={:?}",
        cfg.pairs, cfg.seed, cfg.nodes, cfg.t_end, phi.family
    );
    report.config_echo = echo.clone();
    report.push("max_ordering_violation", &echo, worst, 1e-10, Sense::AtMost);
    report.push("lipschitz_excess", &echo, lip_excess, 1e-6, Sense::AtMost);
    Ok(report)
}

/// Helper shared by trajectory-level dissipation checks: returns
/// `(dissipated, area_drop, slack)` for the acceptance inequality
/// `dissipated <= area_drop * (1 + slack)`.
pub fn dissipation_budget(traj: &Trajectory, h: f64) -> (f64, f64, f64) {
    let rec = &traj.records;
    let area0 = rec[0].area;
    let area_end = rec[rec.len() - 1].area;
    let dissipated = rec[rec.len() - 1].dissipation;
    let dt_max = rec.iter().fold(0.0f64, |m, r| m.max(r.dt));
    (dissipated, area0 - area_end, 5.0 * dt_max / (h * h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid() -> (AnisotropyModel, MobilityModel) {
        (AnisotropyModel::euclidean(2), MobilityModel::euclidean(2))
    }

    #[test]
    fn perturbation_shapes() {
        let p = PerturbationSpec::SublinearBump { k: 1.0, delta: 0.5, width: 4.0 };
        p.validate().unwrap();
        // |p(x)| <= K (1 + |x|)^{1 - delta} everywhere
        for i in 0..200 {
            let x = -6.0 + i as f64 * 0.06;
            let v = p.evaluate(&[x]);
            assert!(v.abs() <= (1.0 + x.abs()).powf(0.5) + 1e-12);
        }
        assert_eq!(p.evaluate(&[4.0]), 0.0);

        let v = PerturbationSpec::VanishingBump { amplitude: 2.0, width: 2.0 };
        assert_eq!(v.evaluate(&[0.0]), 2.0);
        assert_eq!(v.evaluate(&[1.0]), 0.0);
        assert!(v.evaluate(&[0.5]) > 0.0);

        let bad = PerturbationSpec::SublinearBump { k: 1.0, delta: 1.5, width: 4.0 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn expander_ode_oracle_basics() {
        assert_eq!(oracle_expander_ode(0.0, 1e-10).unwrap(), 0.0);
        // w(0) grows with the cone slope (ordered cones give ordered
        // expanders)
        let w_half = oracle_expander_ode(0.5, 1e-10).unwrap();
        let w_one = oracle_expander_ode(1.0, 1e-10).unwrap();
        let w_two = oracle_expander_ode(2.0, 1e-10).unwrap();
        assert!(w_half > 0.0);
        assert!(w_half < w_one && w_one < w_two, "{w_half} {w_one} {w_two}");
    }

    #[test]
    fn grim_reaper_exact_values() {
        // u(0, 1) = 1 and u(1, 0) = -log cos 1
        let exact = ExactSolution::grim_reaper();
        assert_eq!(exact.evaluate(&[0.0], 1.0), 1.0);
        assert!((exact.evaluate(&[1.0], 0.0) - 0.6156264703860141).abs() < 1e-15);
    }

    #[test]
    fn grim_reaper_oracle_coarse() {
        let (phi, psi) = euclid();
        // coarse but fast; the acceptance suite runs the spec resolution
        let cfg = GrimReaperConfig { h: 0.02, sup_error_tol: 4e-3, ..Default::default() };
        let report = oracle_grim_reaper(&phi, &psi, &cfg).unwrap();
        assert!(report.pass(), "{report:?}");
    }

    #[test]
    fn comparison_suite_small() {
        let (phi, psi) = euclid();
        let cfg = ComparisonConfig { pairs: 10, t_end: 0.02, ..Default::default() };
        let report = comparison_suite(&phi, &psi, &cfg).unwrap();
        assert!(report.pass(), "{report:?}");
    }

    #[test]
    fn rescaled_convergence_zero_perturbation() {
        let (phi, psi) = euclid();
        let cone = ConeSpec::abs_cone(1, 1.0);
        let pert = PerturbationSpec::SublinearBump { k: 0.0, delta: 0.5, width: 4.0 };
        let cfg = RescaledConvergenceConfig {
            h: 0.05,
            half_width: 6.0,
            tol_stat: 1e-7,
            ..Default::default()
        };
        let report = exp_rescaled_convergence(&cone, &pert, &phi, &psi, &cfg).unwrap();
        assert!(report.pass(), "{report:?}");
        // D(tau) vanishes identically for the zero perturbation
        let final_gap =
            report.metrics.iter().find(|m| m.name == "final_gap").expect("final_gap").value;
        assert_eq!(final_gap, 0.0);
    }

    #[test]
    fn hyperplane_zero_bump_is_trivial() {
        let (phi, psi) = euclid();
        let pert = PerturbationSpec::VanishingBump { amplitude: 0.0, width: 2.0 };
        let cfg = HyperplaneConfig { t_end: 0.5, h: 0.05, ..Default::default() };
        let report = exp_hyperplane_stability(&pert, &phi, &psi, &cfg).unwrap();
        assert!(report.pass(), "{report:?}");
    }

    #[test]
    fn hyperplane_rejects_small_periods() {
        let (phi, psi) = euclid();
        let pert = PerturbationSpec::VanishingBump { amplitude: 1.0, width: 3.0 };
        let cfg = HyperplaneConfig { period: 16.0, ..Default::default() };
        assert!(matches!(
            exp_hyperplane_stability(&pert, &phi, &psi, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn meanconvex_rejects_wrong_cones() {
        let (phi, psi) = (AnisotropyModel::euclidean(3), MobilityModel::euclidean(3));
        let cone = ConeSpec::abs_cone(1, 1.0);
        let pert = PerturbationSpec::VanishingBump { amplitude: 0.5, width: 1.0 };
        assert!(matches!(
            exp_meanconvex_stability(&cone, &pert, &phi, &psi, &MeanConvexConfig::default()),
            Err(Error::Config(_))
        ));
        // a flat cone is not strictly mean convex
        let flat = ConeSpec::abs_cone(2, 0.0);
        assert!(matches!(
            exp_meanconvex_stability(&flat, &pert, &phi, &psi, &MeanConvexConfig {
                h: 0.1,
                half_width: 2.0,
                t_end: 0.1,
                ..Default::default()
            }),
            Err(Error::Config(_))
        ));
    }
}
