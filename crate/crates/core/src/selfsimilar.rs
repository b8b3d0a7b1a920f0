//! Cones, expanding self-similar solutions and the scaling identities that
//! connect them.
//!
//! The flow started from a cone is homothetic: `u(x, t) = sqrt(t) u(x /
//! sqrt(t), 1)`, so `u(0, t)` grows like `sqrt(t)`. In the rescaled variables
//! expanders are stationary, which is how [`compute_expander`] finds them:
//! run the rescaled flow from the cone until the time derivative is below
//! tolerance. The backward extension recovers the cone as the rescaling
//! parameter shrinks to zero.

use crate::anisotropy::{AnisotropyModel, MobilityModel};
use crate::cone::ConeSpec;
use crate::error::{Error, Result};
use crate::flow::{
    evolve, evolve_rescaled, run_steps_rescaled, FlowParams, SnapshotCadence, Trajectory,
};
use crate::grid::{BoundaryPolicy, GraphField, GraphGrid};
use crate::report::{ExperimentReport, Sense};

/// A stationary profile of the rescaled flow: the time-1 slice of the
/// expanding homothetic solution with expansion constant `c = 1`.
#[derive(Clone, Debug)]
pub struct ExpanderProfile {
    pub field: GraphField,
    /// Sup norm of the rescaled-flow right-hand side at the profile.
    pub residual: f64,
    /// The constant of the stationarity relation the profile solves
    /// (1 for profiles produced by the rescaled flow).
    pub expansion_rate: f64,
    /// Largest Lipschitz overshoot above the cone's constant along the run.
    pub lipschitz_excess: f64,
}

/// Nodal evaluation of the cone at time 0.
pub fn make_cone_field(cone: &ConeSpec, grid: &GraphGrid) -> Result<GraphField> {
    if cone.dim() != grid.dim {
        return Err(Error::Usage(format!(
            "cone dimension {} does not match grid dimension {}",
            cone.dim(),
            grid.dim
        )));
    }
    Ok(GraphField::from_fn(grid.clone(), 0.0, |x| cone.evaluate(x)))
}

#[derive(Clone, Debug)]
pub struct ScalingCheckConfig {
    pub t1: f64,
    pub t2: f64,
    /// Tolerance on `u(0,t2)/u(0,t1)` against `sqrt(t2/t1)`, relative.
    pub ratio_tol: f64,
    /// Tolerance on the rescaled full-profile mismatch over `|x| <= 1`.
    pub profile_tol: f64,
    pub cfl_factor: f64,
}

impl Default for ScalingCheckConfig {
    fn default() -> Self {
        ScalingCheckConfig { t1: 1.0, t2: 4.0, ratio_tol: 0.02, profile_tol: 0.02, cfl_factor: 0.25 }
    }
}

/// Evolves the cone and compares `u(0, t2) / u(0, t1)` with `sqrt(t2 / t1)`,
/// plus the full-profile homothety `u(x, t2) = sqrt(t2/t1) u(x sqrt(t1/t2),
/// t1)` over `|x| <= 1`.
pub fn scaling_check(
    cone: &ConeSpec,
    grid: &GraphGrid,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
    cfg: &ScalingCheckConfig,
) -> Result<ExperimentReport> {
    if !(cfg.t1 > 0.0) || cfg.t2 < cfg.t1 {
        return Err(Error::Usage(format!(
            "need 0 < t1 <= t2, got t1 = {}, t2 = {}",
            cfg.t1, cfg.t2
        )));
    }
    // boundary influence heuristic: half-width >= 8 sqrt(t2 psi_max)
    let half_width = grid_half_width(grid);
    let needed = 8.0 * (cfg.t2 * psi.psi_max()).sqrt();
    if half_width < needed - 1e-9 {
        return Err(Error::Config(format!(
            "domain half-width {half_width} below the boundary-influence heuristic {needed} \
             (8 sqrt(t2 psi_max))"
        )));
    }

    let u0 = make_cone_field(cone, grid)?;
    let params = FlowParams {
        cfl_factor: cfg.cfl_factor,
        exact_times: vec![cfg.t1, cfg.t2],
        tol_stat: 0.0,
        ..FlowParams::new(cfg.t2)
    };
    let traj = evolve(&u0, &params, phi, psi)?;
    let u1 = traj.snapshot_at(cfg.t1).clone();
    let u2 = traj.snapshot_at(cfg.t2).clone();

    let mut report = ExperimentReport::new("scaling-check");
    let params_echo = format!("t1={} t2={} h={}", cfg.t1, cfg.t2, grid.h);

    let v1 = u1.center_value();
    let v2 = u2.center_value();
    let degenerate = v1.abs() < 1e-12 && v2.abs() < 1e-12;
    report.push(
        "degenerate_flat_cone",
        &params_echo,
        if degenerate { 1.0 } else { 0.0 },
        f64::NAN,
        Sense::Info,
    );
    if degenerate {
        // flat cone: u(0, t) = 0 for all t, the ratio is 0/0
        report.push("ratio_error", &params_echo, 0.0, cfg.ratio_tol, Sense::AtMost);
        report.push("profile_error", &params_echo, 0.0, cfg.profile_tol, Sense::AtMost);
        return Ok(report);
    }

    let r_exact = (cfg.t2 / cfg.t1).sqrt();
    let r_measured = v2 / v1;
    report.info("ratio_measured", &params_echo, r_measured);
    report.info("ratio_exact", &params_echo, r_exact);
    report.push(
        "ratio_error",
        &params_echo,
        (r_measured - r_exact).abs() / r_exact,
        cfg.ratio_tol,
        Sense::AtMost,
    );

    // sup over |x| <= 1 of |u(x, t2) - sqrt(t2/t1) u(x sqrt(t1/t2), t1)|
    let shrink = (cfg.t1 / cfg.t2).sqrt();
    let mut sup = 0.0f64;
    for idx in 0..grid.len() {
        let x = grid.node_coord(idx);
        let r2: f64 = x[..grid.dim].iter().map(|v| v * v).sum();
        if r2 > 1.0 {
            continue;
        }
        let inner = [x[0] * shrink, x[1] * shrink];
        let predicted = r_exact * u1.sample(&inner[..grid.dim])?;
        sup = sup.max((u2.values[idx] - predicted).abs());
    }
    let scale = v2.abs().max(1.0);
    report.push("profile_error", &params_echo, sup / scale, cfg.profile_tol, Sense::AtMost);
    report.push(
        "lipschitz_excess",
        &params_echo,
        traj.lipschitz_excess(),
        1e-6,
        Sense::AtMost,
    );
    Ok(report)
}

fn grid_half_width(grid: &GraphGrid) -> f64 {
    let mut w = f64::INFINITY;
    for a in 0..grid.dim {
        let lo = grid.origin[a].abs();
        let hi = grid.axis_coord(a, grid.counts[a] - 1).abs();
        w = w.min(lo.min(hi));
    }
    w
}

/// Runs the rescaled flow from the cone until stationarity and returns the
/// profile. Errors with the residual history if the step budget runs out
/// first.
pub fn compute_expander(
    cone: &ConeSpec,
    params: &FlowParams,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
    grid: &GraphGrid,
) -> Result<ExpanderProfile> {
    if !matches!(grid.policy, BoundaryPolicy::ConeExtension(_)) {
        return Err(Error::Config(
            "compute_expander needs a cone-extension boundary on the grid".into(),
        ));
    }
    let w0 = make_cone_field(cone, grid)?;
    let traj = evolve_rescaled(&w0, params, phi, psi)?;
    let residual = traj.final_record().sup_speed;
    if residual >= params.tol_stat {
        return Err(Error::Convergence {
            message: format!(
                "rescaled flow not stationary by tau = {} (residual {residual}, tolerance {})",
                params.t_end, params.tol_stat
            ),
            residual_history: traj.records.iter().rev().take(32).map(|r| r.sup_speed).collect(),
        });
    }
    Ok(ExpanderProfile {
        field: traj.final_field().clone(),
        residual,
        expansion_rate: 1.0,
        lipschitz_excess: traj.lipschitz_excess(),
    })
}

/// Re-inserts the profile into the rescaled flow for `steps` steps and
/// reports the largest residual seen (fixed-point self-consistency).
pub fn expander_fixed_point_residual(
    profile: &ExpanderProfile,
    steps: usize,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
) -> Result<f64> {
    let (_, worst) = run_steps_rescaled(&profile.field, steps, 0.25, phi, psi)?;
    Ok(worst)
}

/// Far-field report: `d(rho) = max over |y| = rho of |profile - cone|` on
/// nested rings; asserts `d` is nonincreasing over the outer half of the
/// domain. With `expect_above_cone` (mean convex cones) also checks the
/// profile dominates the cone nodewise.
pub fn expander_far_field(
    profile: &ExpanderProfile,
    cone: &ConeSpec,
    expect_above_cone: bool,
) -> Result<ExperimentReport> {
    let field = &profile.field;
    let grid = &field.grid;
    if cone.dim() != grid.dim {
        return Err(Error::Usage("cone dimension does not match the profile grid".into()));
    }
    let half_width = grid_half_width(grid);
    let rings = 16usize;
    let mut d = vec![0.0f64; rings + 1];
    let mut seen = vec![false; rings + 1];
    for idx in 0..grid.len() {
        let x = grid.node_coord(idx);
        let r: f64 = x[..grid.dim].iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > half_width {
            continue;
        }
        // nearest ring; ring k has radius k * half_width / rings
        let k = (r / (half_width / rings as f64)).round() as usize;
        if k == 0 || k > rings {
            continue;
        }
        let gap = (field.values[idx] - cone.evaluate(&x[..grid.dim])).abs();
        if gap > d[k] {
            d[k] = gap;
        }
        seen[k] = true;
    }

    let mut report = ExperimentReport::new("expander-far-field");
    let echo = format!("half_width={half_width} rings={rings}");
    for k in 1..=rings {
        if seen[k] {
            report.info(
                &format!("d_ring_{k}"),
                &format!("rho={}", k as f64 * half_width / rings as f64),
                d[k],
            );
        }
    }
    // nonincreasing over the outer half
    let mut worst_increase = 0.0f64;
    let mut prev: Option<f64> = None;
    for k in (rings / 2)..=rings {
        if !seen[k] {
            continue;
        }
        if let Some(p) = prev {
            worst_increase = worst_increase.max(d[k] - p);
        }
        prev = Some(d[k]);
    }
    report.push("far_field_increase", &echo, worst_increase, 1e-10, Sense::AtMost);
    if expect_above_cone {
        let mut min_gap = f64::INFINITY;
        for idx in 0..grid.len() {
            let x = grid.node_coord(idx);
            min_gap = min_gap.min(field.values[idx] - cone.evaluate(&x[..grid.dim]));
        }
        // the homothetic solution of a mean convex cone sits above the cone
        let tol = 5.0 * grid.h * grid.h;
        report.push("profile_above_cone", &echo, -min_gap, tol, Sense::AtMost);
    }
    Ok(report)
}

/// Backward extension of an expander slice: `u(x, t) = lambda(t) u1(x /
/// lambda(t))` with `lambda(t) = sqrt(2c(t - 1) + 1)`, defined for
/// `t > t0 = 1 - 1/(2c)`. As `t` drops to `t0` the output approaches the
/// cone the profile is asymptotic to.
pub fn backward_extend(profile_at_1: &GraphField, c: f64, t: f64) -> Result<GraphField> {
    if !(c > 0.0) {
        return Err(Error::Usage(format!("expansion constant must be positive, got {c}")));
    }
    let t0 = 1.0 - 1.0 / (2.0 * c);
    if t <= t0 {
        return Err(Error::Domain(format!(
            "backward extension only reaches t > {t0}, got {t}"
        )));
    }
    let lambda = (2.0 * c * (t - 1.0) + 1.0).sqrt();
    let grid = &profile_at_1.grid;
    let mut values = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let x = grid.node_coord(idx);
        let q = [x[0] / lambda, x[1] / lambda];
        values.push(lambda * profile_at_1.sample_extended(&q[..grid.dim]));
    }
    Ok(GraphField { grid: grid.clone(), values, time: t })
}

/// Convenience: evolve the cone in rescaled variables and report snapshots
/// (used by several experiments).
pub fn rescaled_cone_run(
    cone: &ConeSpec,
    grid: &GraphGrid,
    params: &FlowParams,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
) -> Result<Trajectory> {
    let w0 = make_cone_field(cone, grid)?;
    evolve_rescaled(&w0, params, phi, psi)
}

/// Evolves the cone and returns `(t, u(0, t))` at the requested times; feeds
/// the Hoelder-in-time fit `|u(0,t) - u(0,s)| <= K sqrt(|t - s|)`.
pub fn cone_center_history(
    cone: &ConeSpec,
    grid: &GraphGrid,
    phi: &AnisotropyModel,
    psi: &MobilityModel,
    times: &[f64],
    cfl_factor: f64,
) -> Result<Vec<(f64, f64)>> {
    let u0 = make_cone_field(cone, grid)?;
    let t_end = times.iter().fold(0.0f64, |m, t| m.max(*t));
    let params = FlowParams {
        cfl_factor,
        exact_times: times.to_vec(),
        tol_stat: 0.0,
        ..FlowParams::new(t_end)
    };
    let traj = evolve(&u0, &params, phi, psi)?;
    Ok(times
        .iter()
        .map(|&t| {
            let s = traj.snapshot_at(t);
            (s.time, s.center_value())
        })
        .collect())
}

/// Largest quotient `|v(t) - v(s)| / sqrt(|t - s|)` over the sample pairs.
pub fn holder_quotient(history: &[(f64, f64)]) -> f64 {
    let mut k = 0.0f64;
    for i in 0..history.len() {
        for j in (i + 1)..history.len() {
            let (t, vt) = history[i];
            let (s, vs) = history[j];
            if (t - s).abs() > 1e-12 {
                k = k.max((vt - vs).abs() / (t - s).abs().sqrt());
            }
        }
    }
    k
}

/// Flow parameters tuned for expander searches: long horizon, snapshots off.
pub fn expander_params(tol_stat: f64) -> FlowParams {
    FlowParams {
        tol_stat,
        cadence: SnapshotCadence::EverySteps(usize::MAX),
        ..FlowParams::new(40.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid() -> (AnisotropyModel, MobilityModel) {
        (AnisotropyModel::euclidean(2), MobilityModel::euclidean(2))
    }

    fn cone_grid(h: f64, half_width: f64, cone: &ConeSpec) -> GraphGrid {
        GraphGrid::symmetric(1, h, half_width, BoundaryPolicy::ConeExtension(cone.clone()))
            .unwrap()
    }

    #[test]
    fn cone_field_values() {
        let cone = ConeSpec::abs_cone(1, 1.0);
        let grid = cone_grid(0.25, 2.0, &cone);
        let u = make_cone_field(&cone, &grid).unwrap();
        let idx = grid.len() / 2 + 2; // x = 0.5
        assert_eq!(u.values[idx], 0.5);

        let max_affine = ConeSpec::max_affine(1, vec![vec![1.0], vec![-2.0]]);
        let v = make_cone_field(&max_affine, &grid).unwrap();
        let idx = grid.len() / 2 - 2; // x = -0.5
        assert_eq!(v.values[idx], 1.0);

        let flat = ConeSpec::abs_cone(1, 0.0);
        let w = make_cone_field(&flat, &grid).unwrap();
        assert!(w.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn flat_cone_expander_is_zero() {
        let (phi, psi) = euclid();
        let cone = ConeSpec::abs_cone(1, 0.0);
        let grid = cone_grid(0.1, 2.0, &cone);
        let profile =
            compute_expander(&cone, &expander_params(1e-8), &phi, &psi, &grid).unwrap();
        assert_eq!(profile.residual, 0.0);
        assert!(profile.field.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn expander_is_a_fixed_point_and_sits_above_the_cone() {
        let (phi, psi) = euclid();
        let cone = ConeSpec::abs_cone(1, 1.0);
        let grid = cone_grid(0.05, 6.0, &cone);
        let tol = 1e-7;
        let profile = compute_expander(&cone, &expander_params(tol), &phi, &psi, &grid).unwrap();
        assert!(profile.residual < tol);
        assert!(profile.field.center_value() > 0.0);

        let worst = expander_fixed_point_residual(&profile, 100, &phi, &psi).unwrap();
        assert!(worst < 10.0 * tol, "fixed-point residual {worst}");

        let report = expander_far_field(&profile, &cone, true).unwrap();
        assert!(report.pass(), "{report:?}");
    }

    #[test]
    fn far_field_of_flat_cone_vanishes() {
        let (phi, psi) = euclid();
        let cone = ConeSpec::abs_cone(1, 0.0);
        let grid = cone_grid(0.1, 4.0, &cone);
        let profile =
            compute_expander(&cone, &expander_params(1e-8), &phi, &psi, &grid).unwrap();
        let report = expander_far_field(&profile, &cone, true).unwrap();
        assert!(report.pass());
        for m in &report.metrics {
            if m.name.starts_with("d_ring") {
                assert_eq!(m.value, 0.0);
            }
        }
    }

    #[test]
    fn backward_extension_identity_and_scaling() {
        let cone = ConeSpec::abs_cone(1, 1.0);
        let grid = cone_grid(0.05, 4.0, &cone);
        // a synthetic smooth expander-like slice
        let u1 = GraphField::from_fn(grid, 1.0, |x| (x[0] * x[0] + 0.3).sqrt());

        // t = 1: lambda = 1, identity
        let same = backward_extend(&u1, 1.0, 1.0).unwrap();
        for (a, b) in same.values.iter().zip(&u1.values) {
            assert!((a - b).abs() < 1e-13);
        }

        // c = 1, t = 0.625: lambda = 0.5, u(x) = 0.5 u1(2x)
        let half = backward_extend(&u1, 1.0, 0.625).unwrap();
        for idx in 0..u1.grid.len() {
            let x = u1.grid.node_coord(idx)[0];
            if x.abs() <= 2.0 {
                let expect = 0.5 * u1.sample(&[2.0 * x]).unwrap();
                assert!((half.values[idx] - expect).abs() < 1e-12);
            }
        }

        // t at or below t0 = 0.5 is out of range
        assert!(matches!(backward_extend(&u1, 1.0, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn backward_extension_recovers_the_cone() {
        let (phi, psi) = euclid();
        let cone = ConeSpec::abs_cone(1, 1.0);
        let grid = cone_grid(0.05, 6.0, &cone);
        let profile =
            compute_expander(&cone, &expander_params(1e-7), &phi, &psi, &grid).unwrap();
        let mut u1 = profile.field.clone();
        u1.time = 1.0;
        // lambda = 1e-2: t = (lambda^2 - 1)/2 + 1
        let lambda = 1e-2;
        let t = (lambda * lambda - 1.0) / 2.0 + 1.0;
        let back = backward_extend(&u1, 1.0, t).unwrap();
        let mut sup = 0.0f64;
        for idx in 0..back.grid.len() {
            let x = back.grid.node_coord(idx)[0];
            if x.abs() <= 1.0 {
                sup = sup.max((back.values[idx] - cone.evaluate(&[x])).abs());
            }
        }
        assert!(sup < 1e-2, "cone recovery error {sup}");
    }

    #[test]
    fn scaling_check_flags_degenerate_and_validates_domain() {
        let (phi, psi) = euclid();
        let flat = ConeSpec::abs_cone(1, 0.0);
        let grid = cone_grid(0.1, 18.0, &flat);
        let cfg = ScalingCheckConfig { t1: 1.0, t2: 4.0, ..Default::default() };
        let report = scaling_check(&flat, &grid, &phi, &psi, &cfg).unwrap();
        assert!(report.pass());
        assert!(report.metrics.iter().any(|m| m.name == "degenerate_flat_cone" && m.value == 1.0));

        // too small a domain violates the boundary-influence heuristic
        let small = cone_grid(0.1, 4.0, &flat);
        assert!(matches!(
            scaling_check(&flat, &small, &phi, &psi, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn scaling_check_equal_times_gives_unit_ratio() {
        let (phi, psi) = euclid();
        let cone = ConeSpec::abs_cone(1, 1.0);
        let grid = cone_grid(0.05, 9.0, &cone);
        let cfg = ScalingCheckConfig { t1: 1.0, t2: 1.0, ..Default::default() };
        let report = scaling_check(&cone, &grid, &phi, &psi, &cfg).unwrap();
        let ratio = report
            .metrics
            .iter()
            .find(|m| m.name == "ratio_measured")
            .expect("ratio metric")
            .value;
        assert_eq!(ratio, 1.0);
    }

    #[test]
    fn rescaled_cone_is_monotone_in_tau_for_convex_cones() {
        let (phi, psi) = euclid();
        let cone = ConeSpec::abs_cone(1, 1.0);
        let grid = cone_grid(0.05, 4.0, &cone);
        let params = FlowParams {
            cadence: SnapshotCadence::EverySteps(200),
            tol_stat: 1e-6,
            ..FlowParams::new(3.0)
        };
        let traj = rescaled_cone_run(&cone, &grid, &params, &phi, &psi).unwrap();
        assert!(traj.snapshots.len() > 3);
        for pair in traj.snapshots.windows(2) {
            for (a, b) in pair[0].values.iter().zip(&pair[1].values) {
                assert!(b >= &(a - 1e-10), "rescaled cone run not monotone in tau");
            }
        }
    }

    #[test]
    fn sublinear_perturbations_share_the_expander() {
        let (phi, psi) = euclid();
        let cone = ConeSpec::abs_cone(1, 1.0);
        let grid = cone_grid(0.05, 6.0, &cone);
        let tol = 1e-7;
        let base = compute_expander(&cone, &expander_params(tol), &phi, &psi, &grid).unwrap();

        // K (1 + |x|)^{1 - delta} cos^2 bump, the hypothesis class of the
        // rescaled-convergence statement
        let (k, delta, width) = (0.5, 0.5, 3.0);
        let w0 = GraphField::from_fn(grid.clone(), 0.0, |x| {
            let r = x[0].abs();
            let bump = if r < width {
                (std::f64::consts::FRAC_PI_2 * r / width).cos().powi(2)
            } else {
                0.0
            };
            cone.evaluate(x) + k * (1.0 + r).powf(1.0 - delta) * bump
        });
        let params = expander_params(tol);
        let traj = evolve_rescaled(&w0, &params, &phi, &psi).unwrap();
        assert!(traj.final_record().sup_speed < tol);
        let mut sup = 0.0f64;
        for (a, b) in traj.final_field().values.iter().zip(&base.field.values) {
            sup = sup.max((a - b).abs());
        }
        assert!(sup < 50.0 * tol, "perturbed and cone expanders differ by {sup}");
    }

    #[test]
    fn homothety_error_shrinks_under_refinement() {
        let (phi, psi) = euclid();
        let cone = ConeSpec::abs_cone(1, 1.0);
        let t_end = 2.0;
        let mut sups = Vec::new();
        for &h in &[0.08, 0.04] {
            let grid = cone_grid(h, 12.0, &cone);
            let u0 = make_cone_field(&cone, &grid).unwrap();
            let params = FlowParams {
                exact_times: vec![1.0, t_end],
                tol_stat: 0.0,
                ..FlowParams::new(t_end)
            };
            let traj = evolve(&u0, &params, &phi, &psi).unwrap();
            let u1 = traj.snapshot_at(1.0);
            let u2 = traj.snapshot_at(t_end);
            let mut sup = 0.0f64;
            for idx in 0..grid.len() {
                let x = grid.node_coord(idx)[0];
                if x.abs() <= 1.0 {
                    let predicted = t_end.sqrt() * u1.sample(&[x / t_end.sqrt()]).unwrap();
                    sup = sup.max((u2.values[idx] - predicted).abs());
                }
            }
            sups.push(sup);
        }
        assert!(
            sups[1] < 0.6 * sups[0],
            "homothety defect did not shrink under refinement: {sups:?}"
        );
        assert!(sups[1] < 5e-3, "homothety defect too large: {sups:?}");
    }
}
