//! Positively 1-homogeneous Lipschitz initial data ("cones").
//!
//! A cone is the graph of a function with `f(r x) = r f(x)` for `r > 0`;
//! subgraphs of such functions are the initial data class whose evolutions
//! are self-similar expanders.

use std::fmt;
use std::sync::Arc;

/// A positively 1-homogeneous Lipschitz function on `R^N`.
#[derive(Clone)]
pub enum ConeSpec {
    /// `slope * |x|` (Euclidean norm). `slope = 0` is the flat cone.
    AbsCone { dim: usize, slope: f64 },
    /// `max_i a_i . x` over a finite list of slope vectors.
    MaxAffine { dim: usize, slopes: Vec<Vec<f64>> },
    /// `|x| * profile(x / |x|)` with a user profile on the unit sphere,
    /// extended by positive 1-homogeneity (value 0 at the apex).
    RadialProfile {
        dim: usize,
        profile: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for ConeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConeSpec::AbsCone { dim, slope } => {
                write!(f, "AbsCone {{ dim: {dim}, slope: {slope} }}")
            }
            ConeSpec::MaxAffine { dim, slopes } => {
                write!(f, "MaxAffine {{ dim: {dim}, slopes: {slopes:?} }}")
            }
            ConeSpec::RadialProfile { dim, .. } => {
                write!(f, "RadialProfile {{ dim: {dim} }}")
            }
        }
    }
}

impl ConeSpec {
    pub fn abs_cone(dim: usize, slope: f64) -> Self {
        ConeSpec::AbsCone { dim, slope }
    }

    pub fn max_affine(dim: usize, slopes: Vec<Vec<f64>>) -> Self {
        ConeSpec::MaxAffine { dim, slopes }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConeSpec::AbsCone { dim, .. }
            | ConeSpec::MaxAffine { dim, .. }
            | ConeSpec::RadialProfile { dim, .. } => *dim,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            ConeSpec::AbsCone { slope, .. } => {
                slope * x.iter().map(|v| v * v).sum::<f64>().sqrt()
            }
            ConeSpec::MaxAffine { slopes, .. } => slopes
                .iter()
                .map(|a| a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max),
            ConeSpec::RadialProfile { profile, .. } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r == 0.0 {
                    return 0.0;
                }
                let unit: Vec<f64> = x.iter().map(|v| v / r).collect();
                r * profile(&unit)
            }
        }
    }

    /// Lipschitz constant: exact for the closed-form families, a dense
    /// directional sample for `RadialProfile`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            ConeSpec::AbsCone { slope, .. } => slope.abs(),
            ConeSpec::MaxAffine { slopes, .. } => slopes
                .iter()
                .map(|a| a.iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
            ConeSpec::RadialProfile { dim, .. } => {
                // sup |u(x) - u(y)| / |x - y| over sphere sample pairs; the
                // homogeneous extension attains its Lipschitz constant on
                // secants of the unit sphere and spokes through the apex.
                let dirs = crate::anisotropy::unit_sphere_samples(*dim, 720);
                let vals: Vec<f64> = dirs.iter().map(|d| self.evaluate(&d[..*dim])).collect();
                let mut lip = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for i in 0..dirs.len() {
                    for j in (i + 1)..dirs.len() {
                        let mut d2 = 0.0;
                        for k in 0..*dim {
                            let d = dirs[i][k] - dirs[j][k];
                            d2 += d * d;
                        }
                        if d2 > 1e-12 {
                            lip = lip.max((vals[i] - vals[j]).abs() / d2.sqrt());
                        }
                    }
                }
                lip
            }
        }
    }
}
