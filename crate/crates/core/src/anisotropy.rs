//! Surface tensions and mobilities.
//!
//! A surface tension is a positively 1-homogeneous convex function on
//! `R^{N+1}`, positive away from the origin and C^2 there; it weights surface
//! area by normal direction. Its dual norm's unit ball is the Wulff shape,
//! the anisotropic analogue of the round ball. A mobility is a positive
//! 1-homogeneous function scaling the normal velocity; convexity is not
//! required of it.
//!
//! Closed-form families: the Euclidean norm, p-norms with exponent `m > 1`
//! (large even `m` is the documented smooth surrogate for crystalline
//! tensions), and elliptic norms `sqrt(p' A p)`. A black-box family accepts
//! user-supplied value/gradient/Hessian callbacks.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GraphField, GraphGrid};

/// Maximum ambient dimension (`N + 1` with `N <= 2`).
pub const MAX_DIM: usize = 3;

/// Dense symmetric matrix up to 3x3, stored row major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat {
    pub dim: usize,
    pub a: [[f64; MAX_DIM]; MAX_DIM],
}

impl SymMat {
    pub fn from_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::Usage(format!(
                "matrix needs {} entries for dimension {dim}, got {}",
                dim * dim,
                rows.len()
            )));
        }
        let mut a = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..dim {
            for j in 0..dim {
                a[i][j] = rows[i * dim + j];
            }
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (a[i][j] - a[j][i]).abs() > 1e-12 * a[i][j].abs().max(1.0) {
                    return Err(Error::Usage(format!(
                        "matrix not symmetric at ({i},{j}): {} vs {}",
                        a[i][j], a[j][i]
                    )));
                }
            }
        }
        Ok(SymMat { dim, a })
    }

    pub fn zeros(dim: usize) -> Self {
        SymMat { dim, a: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    pub fn mat_vec(&self, p: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            let mut s = 0.0;
            for j in 0..self.dim {
                s += self.a[i][j] * p[j];
            }
            out[i] = s;
        }
    }

    pub fn quad_form(&self, p: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += p[i] * self.a[i][j] * p[j];
            }
        }
        s
    }

    /// Positive definiteness via Cholesky pivots.
    pub fn is_spd(&self) -> bool {
        let n = self.dim;
        let mut l = [[0.0f64; MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.a[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if s <= 0.0 {
                        return false;
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        true
    }

    /// Inverse by adjugate (dim <= 3).
    pub fn inverse(&self) -> Result<SymMat> {
        let a = &self.a;
        let mut out = SymMat::zeros(self.dim);
        match self.dim {
            1 => {
                if a[0][0] == 0.0 {
                    return Err(Error::Usage("singular 1x1 matrix".into()));
                }
                out.a[0][0] = 1.0 / a[0][0];
            }
            2 => {
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                if det == 0.0 {
                    return Err(Error::Usage("singular 2x2 matrix".into()));
                }
                out.a[0][0] = a[1][1] / det;
                out.a[1][1] = a[0][0] / det;
                out.a[0][1] = -a[0][1] / det;
                out.a[1][0] = -a[1][0] / det;
            }
            3 => {
                let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
                if det == 0.0 {
                    return Err(Error::Usage("singular 3x3 matrix".into()));
                }
                for i in 0..3 {
                    for j in 0..3 {
                        let r0 = (i + 1) % 3;
                        let r1 = (i + 2) % 3;
                        let c0 = (j + 1) % 3;
                        let c1 = (j + 2) % 3;
                        // cofactor transpose
                        out.a[j][i] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / det;
                    }
                }
            }
            d => return Err(Error::Usage(format!("unsupported matrix dimension {d}"))),
        }
        Ok(out)
    }
}

/// Black-box smooth family: value, gradient and Hessian away from the origin.
pub trait SmoothFamily: Send + Sync {
    fn value(&self, p: &[f64]) -> f64;
    fn gradient(&self, p: &[f64], out: &mut [f64]);
    fn hessian(&self, p: &[f64], out: &mut SymMat);
}

#[derive(Clone)]
pub enum Family {
    Euclidean,
    PowerNorm { exponent: f64 },
    Elliptic { matrix: SymMat },
    UserSmooth(Arc<dyn SmoothFamily>),
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Euclidean => write!(f, "Euclidean"),
            Family::PowerNorm { exponent } => write!(f, "PowerNorm(m={exponent})"),
            Family::Elliptic { matrix } => write!(f, "Elliptic({:?})", matrix.a),
            Family::UserSmooth(_) => write!(f, "UserSmooth"),
        }
    }
}

/// The surface tension: evaluation, derivatives, dual norm, Wulff geometry.
#[derive(Clone, Debug)]
pub struct AnisotropyModel {
    pub family: Family,
    /// Ambient dimension `N + 1`.
    pub dim: usize,
}

impl AnisotropyModel {
    pub fn euclidean(dim: usize) -> Self {
        AnisotropyModel { family: Family::Euclidean, dim }
    }

    pub fn power_norm(dim: usize, exponent: f64) -> Result<Self> {
        if !(exponent > 1.0) {
            return Err(Error::Config(format!(
                "power norm exponent must exceed 1, got {exponent}"
            )));
        }
        Ok(AnisotropyModel { family: Family::PowerNorm { exponent }, dim })
    }

    pub fn elliptic(dim: usize, matrix: SymMat) -> Result<Self> {
        if matrix.dim != dim {
            return Err(Error::Usage(format!(
                "elliptic matrix dimension {} does not match model dimension {dim}",
                matrix.dim
            )));
        }
        if !matrix.is_spd() {
            return Err(Error::Config("elliptic matrix must be positive definite".into()));
        }
        Ok(AnisotropyModel { family: Family::Elliptic { matrix }, dim })
    }

    pub fn user(dim: usize, family: Arc<dyn SmoothFamily>) -> Self {
        AnisotropyModel { family: Family::UserSmooth(family), dim }
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::Usage(format!(
                "vector has dimension {}, model expects {}",
                p.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// phi(p). Zero exactly at the origin.
    pub fn value(&self, p: &[f64]) -> Result<f64> {
        self.check_dim(p)?;
        Ok(self.value_raw(p))
    }

    #[inline]
    pub(crate) fn value_raw(&self, p: &[f64]) -> f64 {
        match &self.family {
            Family::Euclidean => norm2(p),
            Family::PowerNorm { exponent } => {
                let m = *exponent;
                p.iter().map(|v| v.abs().powf(m)).sum::<f64>().powf(1.0 / m)
            }
            Family::Elliptic { matrix } => matrix.quad_form(p).sqrt(),
            Family::UserSmooth(f) => f.value(p),
        }
    }

    /// grad phi(p); 0-homogeneous and satisfying `grad phi(p) . p = phi(p)`.
    pub fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(p)?;
        if p.iter().all(|v| *v == 0.0) {
            return Err(Error::Singularity("gradient of phi is undefined at 0".into()));
        }
        let mut out = [0.0; MAX_DIM];
        self.gradient_raw(p, &mut out);
        Ok(out[..self.dim].to_vec())
    }

    #[inline]
    pub(crate) fn gradient_raw(&self, p: &[f64], out: &mut [f64; MAX_DIM]) {
        match &self.family {
            Family::Euclidean => {
                let n = norm2(p);
                for i in 0..p.len() {
                    out[i] = p[i] / n;
                }
            }
            Family::PowerNorm { exponent } => {
                let m = *exponent;
                let s: f64 = p.iter().map(|v| v.abs().powf(m)).sum();
                let scale = s.powf(1.0 / m - 1.0);
                for i in 0..p.len() {
                    out[i] = p[i].abs().powf(m - 1.0) * p[i].signum() * scale;
                }
            }
            Family::Elliptic { matrix } => {
                let phi = matrix.quad_form(p).sqrt();
                matrix.mat_vec(p, out);
                for v in out[..p.len()].iter_mut() {
                    *v /= phi;
                }
            }
            Family::UserSmooth(f) => f.gradient(p, &mut out[..p.len()]),
        }
    }

    /// Hessian of phi at `p != 0`; symmetric with `H p = 0`.
    pub fn hessian(&self, p: &[f64]) -> Result<SymMat> {
        self.check_dim(p)?;
        if p.iter().all(|v| *v == 0.0) {
            return Err(Error::Singularity("Hessian of phi is undefined at 0".into()));
        }
        let mut out = SymMat::zeros(self.dim);
        self.hessian_raw(p, &mut out);
        Ok(out)
    }

    #[inline]
    pub(crate) fn hessian_raw(&self, p: &[f64], out: &mut SymMat) {
        let n = p.len();
        out.dim = n;
        match &self.family {
            Family::Euclidean => {
                let nrm = norm2(p);
                for i in 0..n {
                    for j in 0..n {
                        let id = if i == j { 1.0 } else { 0.0 };
                        out.a[i][j] = (id - p[i] * p[j] / (nrm * nrm)) / nrm;
                    }
                }
            }
            Family::PowerNorm { exponent } => {
                let m = *exponent;
                let s: f64 = p.iter().map(|v| v.abs().powf(m)).sum();
                let s1 = s.powf(1.0 / m - 1.0);
                let s2 = s.powf(1.0 / m - 2.0);
                let mut sig = [0.0; MAX_DIM];
                for i in 0..n {
                    sig[i] = p[i].abs().powf(m - 1.0) * p[i].signum();
                }
                for i in 0..n {
                    for j in 0..n {
                        let diag = if i == j {
                            p[i].abs().powf(m - 2.0) * s1
                        } else {
                            0.0
                        };
                        out.a[i][j] = (m - 1.0) * (diag - sig[i] * sig[j] * s2);
                    }
                }
            }
            Family::Elliptic { matrix } => {
                let phi = matrix.quad_form(p).sqrt();
                let mut ap = [0.0; MAX_DIM];
                matrix.mat_vec(p, &mut ap);
                for i in 0..n {
                    for j in 0..n {
                        out.a[i][j] = matrix.a[i][j] / phi - ap[i] * ap[j] / (phi * phi * phi);
                    }
                }
            }
            Family::UserSmooth(f) => f.hessian(p, out),
        }
    }

    /// Dual norm `phi0(q) = sup { p.q : phi(p) <= 1 }`.
    ///
    /// Closed forms: Euclidean is self dual, the p-norm dualizes to its
    /// Hoelder conjugate, the elliptic norm to its inverse matrix. The
    /// black-box family maximizes over a dense direction sample followed by
    /// local ascent (accuracy about 1e-6).
    pub fn dual_value(&self, q: &[f64]) -> Result<f64> {
        self.check_dim(q)?;
        match &self.family {
            Family::Euclidean => Ok(norm2(q)),
            Family::PowerNorm { exponent } => {
                let m_dual = exponent / (exponent - 1.0);
                Ok(q.iter().map(|v| v.abs().powf(m_dual)).sum::<f64>().powf(1.0 / m_dual))
            }
            Family::Elliptic { matrix } => Ok(matrix.inverse()?.quad_form(q).sqrt()),
            Family::UserSmooth(_) => {
                Ok(sup_linear_over_unit_ball(|p| self.value_raw(p), q, self.dim))
            }
        }
    }

    /// Closed-form dual model where one exists.
    pub fn dual_model(&self) -> Option<AnisotropyModel> {
        match &self.family {
            Family::Euclidean => Some(AnisotropyModel::euclidean(self.dim)),
            Family::PowerNorm { exponent } => Some(AnisotropyModel {
                family: Family::PowerNorm { exponent: exponent / (exponent - 1.0) },
                dim: self.dim,
            }),
            Family::Elliptic { matrix } => Some(AnisotropyModel {
                family: Family::Elliptic { matrix: matrix.inverse().ok()? },
                dim: self.dim,
            }),
            Family::UserSmooth(_) => None,
        }
    }
}

#[inline]
fn norm2(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `sup { p.q : norm(p) <= 1 }` for a positively 1-homogeneous `norm`:
/// equals `max_d (d.q) / norm(d)` over unit directions. Dense sample plus
/// golden-section refinement in the sphere angles.
pub(crate) fn sup_linear_over_unit_ball(
    norm: impl Fn(&[f64]) -> f64,
    q: &[f64],
    dim: usize,
) -> f64 {
    let objective = |d: &[f64]| {
        let n = norm(d);
        debug_assert!(n > 0.0);
        d.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() / n
    };
    let samples = unit_sphere_samples(dim, if dim == 2 { 3600 } else { 10_000 });
    let mut best = f64::NEG_INFINITY;
    let mut best_dir = [0.0; MAX_DIM];
    for d in &samples {
        let v = objective(&d[..dim]);
        if v > best {
            best = v;
            best_dir = *d;
        }
    }
    if dim == 2 {
        let theta0 = best_dir[1].atan2(best_dir[0]);
        let half = std::f64::consts::TAU / 3600.0;
        let f = |t: f64| objective(&[t.cos(), t.sin()]);
        golden_max(f, theta0 - half, theta0 + half, 1e-12).1
    } else {
        // spherical angles (theta, phi); alternate golden sweeps
        let r_xy = (best_dir[0] * best_dir[0] + best_dir[1] * best_dir[1]).sqrt();
        let mut theta = r_xy.atan2(best_dir[2]);
        let mut phi = best_dir[1].atan2(best_dir[0]);
        let dir = |t: f64, p: f64| [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()];
        let mut width = 0.05;
        let mut val = best;
        for _ in 0..8 {
            let (t, v) = golden_max(|t| objective(&dir(t, phi)), theta - width, theta + width, 1e-12);
            theta = t;
            val = v;
            let (p, v) = golden_max(|p| objective(&dir(theta, p)), phi - width, phi + width, 1e-12);
            phi = p;
            val = val.max(v);
            width *= 0.5;
        }
        val.max(best)
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = 0.618_033_988_749_894_8;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm)
}

/// Dense unit-sphere sample: uniform angles in the plane, a Fibonacci sphere
/// in three dimensions.
pub fn unit_sphere_samples(dim: usize, n: usize) -> Vec<[f64; MAX_DIM]> {
    let mut out = Vec::with_capacity(n);
    match dim {
        2 => {
            for k in 0..n {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                out.push([t.cos(), t.sin(), 0.0]);
            }
        }
        3 => {
            let golden_angle = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            for k in 0..n {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let t = golden_angle * k as f64;
                out.push([r * t.cos(), r * t.sin(), z]);
            }
        }
        1 => {
            out.push([1.0, 0.0, 0.0]);
            out.push([-1.0, 0.0, 0.0]);
        }
        _ => unreachable!("dimension {} not supported", dim),
    }
    out
}

/// The mobility: positive, continuous, positively 1-homogeneous. The sphere
/// extrema are cached at construction (dense sampling; used in barrier radii
/// and CFL bounds where a 0.1% error is immaterial).
#[derive(Clone, Debug)]
pub struct MobilityModel {
    pub family: Family,
    pub dim: usize,
    psi_max: f64,
    psi_min: f64,
}

impl MobilityModel {
    pub fn new(dim: usize, family: Family) -> Result<Self> {
        let probe = AnisotropyModel { family: family.clone(), dim };
        let n = if dim == 2 { 3600 } else { 10_000 };
        let mut psi_max = f64::NEG_INFINITY;
        let mut psi_min = f64::INFINITY;
        for d in unit_sphere_samples(dim, n) {
            let v = probe.value_raw(&d[..dim]);
            if !(v > 0.0) {
                return Err(Error::Config(format!(
                    "mobility must be positive on the sphere; got {v} at {:?}",
                    &d[..dim]
                )));
            }
            psi_max = psi_max.max(v);
            psi_min = psi_min.min(v);
        }
        Ok(MobilityModel { family, dim, psi_max, psi_min })
    }

    pub fn euclidean(dim: usize) -> Self {
        MobilityModel::new(dim, Family::Euclidean).expect("Euclidean mobility is positive")
    }

    pub fn value(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.dim {
            return Err(Error::Usage(format!(
                "vector has dimension {}, mobility expects {}",
                p.len(),
                self.dim
            )));
        }
        Ok(self.value_raw(p))
    }

    #[inline]
    pub(crate) fn value_raw(&self, p: &[f64]) -> f64 {
        AnisotropyModel { family: self.family.clone(), dim: self.dim }.value_raw(p)
    }

    /// `max_{|v| = 1} psi(v)`.
    pub fn psi_max(&self) -> f64 {
        self.psi_max
    }

    /// `min_{|v| = 1} psi(v)`.
    pub fn psi_min(&self) -> f64 {
        self.psi_min
    }
}

/// Graph sample of the lower boundary of `R * W` where `W` is the Wulff shape
/// of the model's dual norm.
#[derive(Clone, Debug)]
pub struct WulffCap {
    pub radius: f64,
    pub cap: GraphField,
}

/// Per node `x` of `base`, the smallest `z` with `phi0(x, z) <= R`, found by
/// bisection to tolerance `1e-10 * R`.
pub fn wulff_lower_cap(
    model: &AnisotropyModel,
    radius: f64,
    base: &GraphGrid,
) -> Result<WulffCap> {
    if !(radius > 0.0) {
        return Err(Error::Usage(format!("Wulff radius must be positive, got {radius}")));
    }
    if base.dim + 1 != model.dim {
        return Err(Error::Usage(format!(
            "base grid dimension {} does not lift to model dimension {}",
            base.dim, model.dim
        )));
    }
    let n = base.dim;
    let mut values = vec![0.0f64; base.len()];
    for idx in 0..base.len() {
        let x = base.node_coord(idx);
        values[idx] = wulff_cap_height(model, radius, &x[..n]).map_err(|e| match e {
            Error::Domain(m) => {
                Error::Domain(format!("node {idx} at {:?}: {m}", &x[..n]))
            }
            other => other,
        })?;
    }
    let cap = GraphField { grid: base.clone(), values, time: 0.0 };
    Ok(WulffCap { radius, cap })
}

/// Height of the lower boundary of `radius * W` over the base point `x`:
/// the smallest `z` with `phi0(x, z) <= radius`. Errors if `x` falls outside
/// the projection of the scaled Wulff shape.
pub fn wulff_cap_height(model: &AnisotropyModel, radius: f64, x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n + 1 != model.dim {
        return Err(Error::Usage(format!(
            "base point dimension {n} does not lift to model dimension {}",
            model.dim
        )));
    }
    let mut q = [0.0f64; MAX_DIM];
    q[..n].copy_from_slice(x);
    lower_cap_height(model, radius, &mut q, n)
}

fn lower_cap_height(
    model: &AnisotropyModel,
    radius: f64,
    q: &mut [f64; MAX_DIM],
    n: usize,
) -> Result<f64> {
    let dual_at = |q: &mut [f64; MAX_DIM], z: f64| -> f64 {
        q[n] = z;
        model
            .dual_value(&q[..n + 1])
            .expect("dimension checked by caller")
    };
    // bracket the section: phi0(x, .) is convex with a unique minimum
    q[n] = 0.0;
    let mid = dual_at(q, 0.0);
    let unit_down = {
        let mut e = [0.0f64; MAX_DIM];
        e[n] = -1.0;
        model.dual_value(&e[..n + 1]).expect("dimension checked")
    };
    // phi0(x, z) >= |z| phi0(0, -1) - phi0(x, 0) for z < 0
    let mut z_out = -(radius + mid + 1.0) / unit_down;
    while dual_at(q, z_out) <= radius {
        z_out *= 2.0;
        if !z_out.is_finite() {
            return Err(Error::Domain("could not bracket the Wulff section".into()));
        }
    }
    // minimize phi0(x, .) over [z_out, -z_out] to find an inside point
    let (z_min, f_min) = {
        let mut a = z_out;
        let mut b = -z_out;
        let inv_phi = 0.618_033_988_749_894_8;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = dual_at(q, c);
        let mut fd = dual_at(q, d);
        for _ in 0..200 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = dual_at(q, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = dual_at(q, d);
            }
            if (b - a).abs() < 1e-14 * radius.max(1.0) {
                break;
            }
        }
        let m = 0.5 * (a + b);
        (m, dual_at(q, m))
    };
    if f_min >= radius {
        return Err(Error::Domain(format!(
            "outside the projection of the Wulff shape (min section value {f_min} >= {radius})"
        )));
    }
    // lower root of phi0(x, z) = R on [z_out, z_min]; the contract tolerance
    // is 1e-10 R, the extra depth keeps second differences of the sampled
    // cap out of the solver noise
    let mut lo = z_out; // phi0 > R
    let mut hi = z_min; // phi0 < R
    let tol = 1e-14 * radius;
    for _ in 0..120 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if dual_at(q, mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryPolicy;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// phi = |p| + 0.2 * (sum p_i^4)^{1/4}: 1-homogeneous, convex, smooth
    /// away from 0; exercises the black-box path.
    struct Blend;

    impl SmoothFamily for Blend {
        fn value(&self, p: &[f64]) -> f64 {
            let e = AnisotropyModel::euclidean(p.len());
            let q = AnisotropyModel::power_norm(p.len(), 4.0).unwrap();
            e.value_raw(p) + 0.2 * q.value_raw(p)
        }
        fn gradient(&self, p: &[f64], out: &mut [f64]) {
            let e = AnisotropyModel::euclidean(p.len());
            let q = AnisotropyModel::power_norm(p.len(), 4.0).unwrap();
            let mut ge = [0.0; MAX_DIM];
            let mut gq = [0.0; MAX_DIM];
            e.gradient_raw(p, &mut ge);
            q.gradient_raw(p, &mut gq);
            for i in 0..p.len() {
                out[i] = ge[i] + 0.2 * gq[i];
            }
        }
        fn hessian(&self, p: &[f64], out: &mut SymMat) {
            let e = AnisotropyModel::euclidean(p.len());
            let q = AnisotropyModel::power_norm(p.len(), 4.0).unwrap();
            let mut he = SymMat::zeros(p.len());
            let mut hq = SymMat::zeros(p.len());
            e.hessian_raw(p, &mut he);
            q.hessian_raw(p, &mut hq);
            out.dim = p.len();
            for i in 0..p.len() {
                for j in 0..p.len() {
                    out.a[i][j] = he.a[i][j] + 0.2 * hq.a[i][j];
                }
            }
        }
    }

    fn models(dim: usize) -> Vec<(AnisotropyModel, bool)> {
        vec![
            (AnisotropyModel::euclidean(dim), true),
            (AnisotropyModel::power_norm(dim, 4.0).unwrap(), true),
            (
                AnisotropyModel::elliptic(
                    dim,
                    SymMat::from_rows(
                        dim,
                        if dim == 2 {
                            &[2.0, 0.3, 0.3, 1.0][..]
                        } else {
                            &[1.5, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 0.8][..]
                        },
                    )
                    .unwrap(),
                )
                .unwrap(),
                true,
            ),
            (AnisotropyModel::user(dim, Arc::new(Blend)), false),
        ]
    }

    #[test]
    fn closed_form_values() {
        let e = AnisotropyModel::euclidean(2);
        assert_eq!(e.value(&[3.0, 4.0]).unwrap(), 5.0);

        let p4 = AnisotropyModel::power_norm(2, 4.0).unwrap();
        assert!((p4.value(&[1.0, 1.0]).unwrap() - 2.0f64.powf(0.25)).abs() < 1e-15);

        let el = AnisotropyModel::elliptic(2, SymMat::from_rows(2, &[4.0, 0.0, 0.0, 1.0]).unwrap())
            .unwrap();
        assert_eq!(el.value(&[1.0, 0.0]).unwrap(), 2.0);

        assert_eq!(e.value(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(e.value(&[1.0]).is_err());
    }

    #[test]
    fn gradient_examples_and_errors() {
        let e = AnisotropyModel::euclidean(2);
        let g = e.gradient(&[3.0, 4.0]).unwrap();
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        assert!(matches!(e.gradient(&[0.0, 0.0]), Err(Error::Singularity(_))));
        assert!(matches!(e.hessian(&[0.0, 0.0]), Err(Error::Singularity(_))));
    }

    #[test]
    fn euler_relation_and_gradient_homogeneity() {
        for (m, _) in models(2) {
            let p = [1.0, 2.0];
            let g = m.gradient(&p).unwrap();
            let dot: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
            assert!(
                (dot - m.value(&p).unwrap()).abs() < 1e-10,
                "{:?}: Euler relation off: {dot}",
                m.family
            );

            let p = [1.0, -1.0];
            let g1 = m.gradient(&p).unwrap();
            let g2 = m.gradient(&[2.0, -2.0]).unwrap();
            for (a, b) in g1.iter().zip(&g2) {
                assert!((a - b).abs() < 1e-10, "{:?}: gradient not 0-homogeneous", m.family);
            }
        }
    }

    #[test]
    fn hessian_identities() {
        let e = AnisotropyModel::euclidean(2);
        let h = e.hessian(&[0.0, 1.0]).unwrap();
        assert!((h.get(0, 0) - 1.0).abs() < 1e-15);
        assert!(h.get(0, 1).abs() < 1e-15 && h.get(1, 1).abs() < 1e-15);

        for (m, _) in models(2) {
            let p = [2.0, 1.0];
            let h = m.hessian(&p).unwrap();
            let mut hp = [0.0; MAX_DIM];
            h.mat_vec(&p, &mut hp);
            for v in &hp[..2] {
                assert!(v.abs() < 1e-8, "{:?}: H p != 0: {hp:?}", m.family);
            }
        }
    }

    #[test]
    fn hessian_matches_central_differences() {
        // central-difference oracle with step 1e-4 at p = (1, 3)
        let step = 1e-4;
        let p = [1.0, 3.0];
        for (m, _) in models(2) {
            let h = m.hessian(&p).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let mut pp = p;
                    let mut pm = p;
                    let mut mp = p;
                    let mut mm = p;
                    pp[i] += step;
                    pp[j] += step;
                    pm[i] += step;
                    pm[j] -= step;
                    mp[i] -= step;
                    mp[j] += step;
                    mm[i] -= step;
                    mm[j] -= step;
                    let fd = (m.value(&pp).unwrap() - m.value(&pm).unwrap()
                        - m.value(&mp).unwrap()
                        + m.value(&mm).unwrap())
                        / (4.0 * step * step);
                    assert!(
                        (fd - h.get(i, j)).abs() < 1e-5,
                        "{:?} H[{i}][{j}]: analytic {} vs fd {fd}",
                        m.family,
                        h.get(i, j)
                    );
                }
            }
        }
    }

    #[test]
    fn random_sample_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for dim in [2usize, 3] {
            for (m, closed_form) in models(dim) {
                let tol_hom = if closed_form { 1e-12 } else { 1e-8 };
                for _ in 0..1000 {
                    let mut p = [0.0f64; MAX_DIM];
                    let mut q = [0.0f64; MAX_DIM];
                    for i in 0..dim {
                        p[i] = rng.gen_range(-2.0..2.0);
                        q[i] = rng.gen_range(-2.0..2.0);
                    }
                    if norm2(&p[..dim]) < 1e-6 || norm2(&q[..dim]) < 1e-6 {
                        continue;
                    }
                    let vp = m.value(&p[..dim]).unwrap();
                    assert!(vp > 0.0);

                    // positive 1-homogeneity
                    let lambda = rng.gen_range(0.1..10.0);
                    let scaled: Vec<f64> = p[..dim].iter().map(|v| lambda * v).collect();
                    let vs = m.value(&scaled).unwrap();
                    assert!((vs - lambda * vp).abs() <= tol_hom * vs.abs().max(1.0));

                    // midpoint convexity
                    let mid: Vec<f64> =
                        p[..dim].iter().zip(&q[..dim]).map(|(a, b)| 0.5 * (a + b)).collect();
                    let vm = m.value(&mid).unwrap();
                    let vq = m.value(&q[..dim]).unwrap();
                    assert!(vm <= 0.5 * (vp + vq) + 1e-12);

                    // Euler relation
                    let g = m.gradient(&p[..dim]).unwrap();
                    let dot: f64 = g.iter().zip(&p[..dim]).map(|(a, b)| a * b).sum();
                    assert!((dot - vp).abs() < 1e-10 * vp.max(1.0));

                    // gradient 0-homogeneity
                    let g2 = m.gradient(&scaled).unwrap();
                    for (a, b) in g.iter().zip(&g2) {
                        assert!((a - b).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn dual_closed_forms_and_oracle() {
        let e = AnisotropyModel::euclidean(2);
        assert_eq!(e.dual_value(&[0.0, 2.0]).unwrap(), 2.0);

        // elliptic diag(4,1): dual at (2,0) is sqrt(4 * 1/4) = 1, and the
        // sampled-sup oracle agrees
        let el = AnisotropyModel::elliptic(2, SymMat::from_rows(2, &[4.0, 0.0, 0.0, 1.0]).unwrap())
            .unwrap();
        let d = el.dual_value(&[2.0, 0.0]).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        let oracle = sup_linear_over_unit_ball(|p| el.value_raw(p), &[2.0, 0.0], 2);
        assert!((oracle - d).abs() < 1e-6);

        // power norm m = 4: Hoelder dual at (1,1) is 2^{3/4}
        let p4 = AnisotropyModel::power_norm(2, 4.0).unwrap();
        let d = p4.dual_value(&[1.0, 1.0]).unwrap();
        assert!((d - 2.0f64.powf(0.75)).abs() < 1e-12);
        let oracle = sup_linear_over_unit_ball(|p| p4.value_raw(p), &[1.0, 1.0], 2);
        assert!((oracle - d).abs() < 1e-6);
    }

    #[test]
    fn dual_of_dual_recovers_phi() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (m, closed_form) in models(2) {
            if !closed_form {
                continue;
            }
            let dual = m.dual_model().unwrap();
            for _ in 0..100 {
                let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                if norm2(&p) < 1e-3 {
                    continue;
                }
                let via_dual = dual.dual_value(&p).unwrap();
                let direct = m.value(&p).unwrap();
                assert!(
                    (via_dual - direct).abs() < 1e-5 * direct.max(1.0),
                    "{:?}: (phi0)0 = {via_dual} vs phi = {direct}",
                    m.family
                );
            }
        }
    }

    #[test]
    fn mobility_bounds_by_sphere_sampling() {
        let psi = MobilityModel::euclidean(2);
        assert!((psi.psi_max() - 1.0).abs() < 1e-12);
        assert!((psi.psi_min() - 1.0).abs() < 1e-12);

        let el = MobilityModel::new(
            2,
            Family::Elliptic { matrix: SymMat::from_rows(2, &[4.0, 0.0, 0.0, 1.0]).unwrap() },
        )
        .unwrap();
        // psi on the unit circle is sqrt(4 cos^2 + sin^2): extrema 2 and 1
        assert!((el.psi_max() - 2.0).abs() < 1e-3);
        assert!((el.psi_min() - 1.0).abs() < 1e-3);
        assert!(el.psi_min() > 0.0 && el.psi_min() <= el.psi_max());
    }

    fn base_1d(h: f64, half_width: f64) -> GraphGrid {
        GraphGrid::symmetric(1, h, half_width, BoundaryPolicy::LinearExtrapolation).unwrap()
    }

    #[test]
    fn wulff_cap_euclidean_circle() {
        let e = AnisotropyModel::euclidean(2);
        let cap = wulff_lower_cap(&e, 1.0, &base_1d(0.05, 0.5)).unwrap();
        let at0 = cap.cap.sample(&[0.0]).unwrap();
        assert!((at0 + 1.0).abs() < 1e-9);

        let cap2 = wulff_lower_cap(&e, 2.0, &base_1d(0.05, 1.5)).unwrap();
        let at1 = cap2.cap.sample(&[1.0]).unwrap();
        assert!((at1 + 3.0f64.sqrt()).abs() < 1e-9);

        // residual invariant: every sampled point sits on the Wulff boundary
        for idx in 0..cap2.cap.grid.len() {
            let x = cap2.cap.grid.node_coord(idx)[0];
            let v = e.dual_value(&[x, cap2.cap.values[idx]]).unwrap();
            assert!((v - 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn wulff_cap_elliptic_matches_dual_formula() {
        // phi = sqrt(p' diag(1,4) p): phi0(0, z) = |z| / 2, so the unit cap
        // reaches z = -2 at the apex
        let el = AnisotropyModel::elliptic(2, SymMat::from_rows(2, &[1.0, 0.0, 0.0, 4.0]).unwrap())
            .unwrap();
        let cap = wulff_lower_cap(&el, 1.0, &base_1d(0.05, 0.4)).unwrap();
        let at0 = cap.cap.sample(&[0.0]).unwrap();
        assert!((at0 + 2.0).abs() < 1e-9, "apex height {at0}");
    }

    #[test]
    fn wulff_cap_is_convex_and_rejects_outside_nodes() {
        let e = AnisotropyModel::euclidean(2);
        let cap = wulff_lower_cap(&e, 1.0, &base_1d(0.02, 0.8)).unwrap();
        let w = &cap.cap.values;
        for i in 1..w.len() - 1 {
            let second = w[i + 1] - 2.0 * w[i] + w[i - 1];
            assert!(second >= -1e-8, "cap not convex at {i}: {second}");
        }
        assert!(matches!(
            wulff_lower_cap(&e, 1.0, &base_1d(0.05, 1.2)),
            Err(Error::Domain(_))
        ));
    }
}
