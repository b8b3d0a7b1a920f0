//! Run configuration: a flat sectioned key-value format.
//!
//! The format is INI-like UTF-8 text: `[section]` headers, `key = value`
//! lines, `#` comments. Every key has a default; parsing fills defaults and
//! the emitted echo lists every key, so `parse(emit(c)) == c`. Unknown
//! sections or keys and out-of-range values are reported with the line
//! number.
//!
//! Sections and keys (defaults in parentheses):
//!
//! | section        | keys |
//! |----------------|------|
//! | `experiment`   | `id` (grim-reaper), `alpha` (1), `t1` (1), `t2` (4), `pairs` (100), `radius` (2), `core_fraction` (0.25), `ratio_tol` (0.02), `final_gap_tol` (0.01), `gap_tol` (0.02), `decay_target` (0.1), `sup_error_tol` (0.001) |
//! | `anisotropy`   | `family` (euclidean \| power \| elliptic), `exponent` (4), `matrix` (identity, row major, (N+1)^2 entries) |
//! | `mobility`     | same keys as `anisotropy` |
//! | `grid`         | `dim` (1), `h` (0.02), `half_width` (8), `period` (16), `boundary` (cone \| dirichlet \| periodic \| linear) |
//! | `cone`         | `family` (abs \| max-affine), `slope` (1), `slopes` (semicolon-separated vectors) |
//! | `perturbation` | `kind` (sublinear \| vanishing \| offset), `k` (1), `delta` (0.5), `width` (4), `amplitude` (1), `offset` (0.1) |
//! | `barrier`      | `r` (2), `m_bar` (1), `eps` (0.2) |
//! | `flow`         | `cfl` (0.25), `t_end` (1), `snapshot_dt` (0.25), `tol_stat` (1e-8), `max_steps` (50000000) |
//! | `output`       | `dir` (out), `seed` (42) |
//!
//! Experiment ids: `grim-reaper`, `expander-ode`, `scaling`, `expander`,
//! `rescaled-convergence`, `hyperplane-stability`, `meanconvex-stability`,
//! `wulff-barrier`, `periodic-barrier`, `comparison`.

use crate::anisotropy::{AnisotropyModel, MobilityModel, SymMat};
use crate::cone::ConeSpec;
use crate::error::{Error, Result};
use crate::experiments::PerturbationSpec;

pub const EXPERIMENT_IDS: &[&str] = &[
    "grim-reaper",
    "expander-ode",
    "scaling",
    "expander",
    "rescaled-convergence",
    "hyperplane-stability",
    "meanconvex-stability",
    "wulff-barrier",
    "periodic-barrier",
    "comparison",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSection {
    pub id: String,
    pub alpha: f64,
    pub t1: f64,
    pub t2: f64,
    pub pairs: usize,
    pub radius: f64,
    pub core_fraction: f64,
    pub ratio_tol: f64,
    pub final_gap_tol: f64,
    pub gap_tol: f64,
    pub decay_target: f64,
    pub sup_error_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilySection {
    pub family: String,
    pub exponent: f64,
    pub matrix: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSection {
    pub dim: usize,
    pub h: f64,
    pub half_width: f64,
    pub period: f64,
    pub boundary: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeSection {
    pub family: String,
    pub slope: f64,
    pub slopes: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSection {
    pub kind: String,
    pub k: f64,
    pub delta: f64,
    pub width: f64,
    pub amplitude: f64,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierSection {
    pub r: f64,
    pub m_bar: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSection {
    pub cfl: f64,
    pub t_end: f64,
    pub snapshot_dt: f64,
    pub tol_stat: f64,
    pub max_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSection {
    pub dir: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentSection,
    pub anisotropy: FamilySection,
    pub mobility: FamilySection,
    pub grid: GridSection,
    pub cone: ConeSection,
    pub perturbation: PerturbationSection,
    pub barrier: BarrierSection,
    pub flow: FlowSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: ExperimentSection {
                id: "grim-reaper".into(),
                alpha: 1.0,
                t1: 1.0,
                t2: 4.0,
                pairs: 100,
                radius: 2.0,
                core_fraction: 0.25,
                ratio_tol: 0.02,
                final_gap_tol: 0.01,
                gap_tol: 0.02,
                decay_target: 0.1,
                sup_error_tol: 0.001,
            },
            anisotropy: FamilySection { family: "euclidean".into(), exponent: 4.0, matrix: vec![] },
            mobility: FamilySection { family: "euclidean".into(), exponent: 4.0, matrix: vec![] },
            grid: GridSection {
                dim: 1,
                h: 0.02,
                half_width: 8.0,
                period: 16.0,
                boundary: "cone".into(),
            },
            cone: ConeSection { family: "abs".into(), slope: 1.0, slopes: vec![] },
            perturbation: PerturbationSection {
                kind: "sublinear".into(),
                k: 1.0,
                delta: 0.5,
                width: 4.0,
                amplitude: 1.0,
                offset: 0.1,
            },
            barrier: BarrierSection { r: 2.0, m_bar: 1.0, eps: 0.2 },
            flow: FlowSection {
                cfl: 0.25,
                t_end: 1.0,
                snapshot_dt: 0.25,
                tol_stat: 1e-8,
                max_steps: 50_000_000,
            },
            output: OutputSection { dir: "out".into(), seed: 42 },
        }
    }
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Config(format!("line {line}: {}", msg.into()))
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| bad(line, format!("{key}: expected a number, got '{v}'")))
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>().map_err(|_| bad(line, format!("{key}: expected an integer, got '{v}'")))
}

impl RunConfig {
    /// Applies one `section.key = value` assignment (also the CLI override
    /// path). `line` is used for error reporting.
    pub fn set(&mut self, section: &str, key: &str, value: &str, line: usize) -> Result<()> {
        let v = value.trim();
        match (section, key) {
            ("experiment", "id") => {
                if !EXPERIMENT_IDS.contains(&v) {
                    return Err(bad(
                        line,
                        format!("id: unknown experiment '{v}' (known: {})", EXPERIMENT_IDS.join(", ")),
                    ));
                }
                self.experiment.id = v.into();
            }
            ("experiment", "alpha") => self.experiment.alpha = parse_f64(line, key, v)?,
            ("experiment", "t1") => self.experiment.t1 = parse_f64(line, key, v)?,
            ("experiment", "t2") => self.experiment.t2 = parse_f64(line, key, v)?,
            ("experiment", "pairs") => self.experiment.pairs = parse_usize(line, key, v)?,
            ("experiment", "radius") => self.experiment.radius = parse_f64(line, key, v)?,
            ("experiment", "core_fraction") => {
                self.experiment.core_fraction = parse_f64(line, key, v)?
            }
            ("experiment", "ratio_tol") => self.experiment.ratio_tol = parse_f64(line, key, v)?,
            ("experiment", "final_gap_tol") => {
                self.experiment.final_gap_tol = parse_f64(line, key, v)?
            }
            ("experiment", "gap_tol") => self.experiment.gap_tol = parse_f64(line, key, v)?,
            ("experiment", "decay_target") => {
                self.experiment.decay_target = parse_f64(line, key, v)?
            }
            ("experiment", "sup_error_tol") => {
                self.experiment.sup_error_tol = parse_f64(line, key, v)?
            }
            ("anisotropy", _) | ("mobility", _) => {
                let s = if section == "anisotropy" { &mut self.anisotropy } else { &mut self.mobility };
                match key {
                    "family" => {
                        if !["euclidean", "power", "elliptic"].contains(&v) {
                            return Err(bad(line, format!("family: unknown '{v}'")));
                        }
                        s.family = v.into();
                    }
                    "exponent" => {
                        let m = parse_f64(line, key, v)?;
                        if !(m > 1.0) {
                            return Err(bad(line, format!("exponent must exceed 1, got {m}")));
                        }
                        s.exponent = m;
                    }
                    "matrix" => {
                        s.matrix = v
                            .split_whitespace()
                            .map(|t| parse_f64(line, "matrix", t))
                            .collect::<Result<Vec<f64>>>()?;
                    }
                    other => return Err(bad(line, format!("unknown key '{other}' in [{section}]"))),
                }
            }
            ("grid", "dim") => {
                let d = parse_usize(line, key, v)?;
                if d != 1 && d != 2 {
                    return Err(bad(line, format!("dim must be 1 or 2, got {d}")));
                }
                self.grid.dim = d;
            }
            ("grid", "h") => {
                let h = parse_f64(line, key, v)?;
                if !(h > 0.0) {
                    return Err(bad(line, format!("h must be positive, got {h}")));
                }
                self.grid.h = h;
            }
            ("grid", "half_width") => self.grid.half_width = parse_f64(line, key, v)?,
            ("grid", "period") => self.grid.period = parse_f64(line, key, v)?,
            ("grid", "boundary") => {
                if !["cone", "dirichlet", "periodic", "linear"].contains(&v) {
                    return Err(bad(line, format!("boundary: unknown policy '{v}'")));
                }
                self.grid.boundary = v.into();
            }
            ("cone", "family") => {
                if !["abs", "max-affine"].contains(&v) {
                    return Err(bad(line, format!("cone family: unknown '{v}'")));
                }
                self.cone.family = v.into();
            }
            ("cone", "slope") => self.cone.slope = parse_f64(line, key, v)?,
            ("cone", "slopes") => {
                self.cone.slopes = v
                    .split(';')
                    .filter(|part| !part.trim().is_empty())
                    .map(|part| {
                        part.split_whitespace()
                            .map(|t| parse_f64(line, "slopes", t))
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<Vec<Vec<f64>>>>()?;
            }
            ("perturbation", "kind") => {
                if !["sublinear", "vanishing", "offset"].contains(&v) {
                    return Err(bad(line, format!("perturbation kind: unknown '{v}'")));
                }
                self.perturbation.kind = v.into();
            }
            ("perturbation", "k") => self.perturbation.k = parse_f64(line, key, v)?,
            ("perturbation", "delta") => {
                let d = parse_f64(line, key, v)?;
                if !(d > 0.0 && d < 1.0) {
                    return Err(bad(line, format!("delta out of (0,1): {d}")));
                }
                self.perturbation.delta = d;
            }
            ("perturbation", "width") => self.perturbation.width = parse_f64(line, key, v)?,
            ("perturbation", "amplitude") => {
                self.perturbation.amplitude = parse_f64(line, key, v)?
            }
            ("perturbation", "offset") => self.perturbation.offset = parse_f64(line, key, v)?,
            ("barrier", "r") => self.barrier.r = parse_f64(line, key, v)?,
            ("barrier", "m_bar") => self.barrier.m_bar = parse_f64(line, key, v)?,
            ("barrier", "eps") => self.barrier.eps = parse_f64(line, key, v)?,
            ("flow", "cfl") => {
                let c = parse_f64(line, key, v)?;
                if !(c > 0.0 && c <= 0.5) {
                    return Err(bad(line, format!("cfl must lie in (0, 0.5], got {c}")));
                }
                self.flow.cfl = c;
            }
            ("flow", "t_end") => self.flow.t_end = parse_f64(line, key, v)?,
            ("flow", "snapshot_dt") => self.flow.snapshot_dt = parse_f64(line, key, v)?,
            ("flow", "tol_stat") => self.flow.tol_stat = parse_f64(line, key, v)?,
            ("flow", "max_steps") => self.flow.max_steps = parse_usize(line, key, v)?,
            ("output", "dir") => self.output.dir = v.into(),
            ("output", "seed") => {
                self.output.seed = v
                    .parse::<u64>()
                    .map_err(|_| bad(line, format!("seed: expected an integer, got '{v}'")))?
            }
            (s, k) => return Err(bad(line, format!("unknown key '{k}' in section [{s}]"))),
        }
        Ok(())
    }

    /// Full echo of the configuration; floats print in shortest
    /// round-trip form, so parsing the echo reproduces the config exactly.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        use std::fmt::Write;
        let e = &self.experiment;
        writeln!(s, "[experiment]").unwrap();
        writeln!(s, "id = {}", e.id).unwrap();
        writeln!(s, "alpha = {}", e.alpha).unwrap();
        writeln!(s, "t1 = {}", e.t1).unwrap();
        writeln!(s, "t2 = {}", e.t2).unwrap();
        writeln!(s, "pairs = {}", e.pairs).unwrap();
        writeln!(s, "radius = {}", e.radius).unwrap();
        writeln!(s, "core_fraction = {}", e.core_fraction).unwrap();
        writeln!(s, "ratio_tol = {}", e.ratio_tol).unwrap();
        writeln!(s, "final_gap_tol = {}", e.final_gap_tol).unwrap();
        writeln!(s, "gap_tol = {}", e.gap_tol).unwrap();
        writeln!(s, "decay_target = {}", e.decay_target).unwrap();
        writeln!(s, "sup_error_tol = {}", e.sup_error_tol).unwrap();
        for (name, fam) in [("anisotropy", &self.anisotropy), ("mobility", &self.mobility)] {
            writeln!(s, "\n[{name}]").unwrap();
            writeln!(s, "family = {}", fam.family).unwrap();
            writeln!(s, "exponent = {}", fam.exponent).unwrap();
            if !fam.matrix.is_empty() {
                let row: Vec<String> = fam.matrix.iter().map(|v| format!("{v}")).collect();
                writeln!(s, "matrix = {}", row.join(" ")).unwrap();
            }
        }
        let g = &self.grid;
        writeln!(s, "\n[grid]").unwrap();
        writeln!(s, "dim = {}", g.dim).unwrap();
        writeln!(s, "h = {}", g.h).unwrap();
        writeln!(s, "half_width = {}", g.half_width).unwrap();
        writeln!(s, "period = {}", g.period).unwrap();
        writeln!(s, "boundary = {}", g.boundary).unwrap();
        let c = &self.cone;
        writeln!(s, "\n[cone]").unwrap();
        writeln!(s, "family = {}", c.family).unwrap();
        writeln!(s, "slope = {}", c.slope).unwrap();
        if !c.slopes.is_empty() {
            let parts: Vec<String> = c
                .slopes
                .iter()
                .map(|vec| vec.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" "))
                .collect();
            writeln!(s, "slopes = {}", parts.join("; ")).unwrap();
        }
        let p = &self.perturbation;
        writeln!(s, "\n[perturbation]").unwrap();
        writeln!(s, "kind = {}", p.kind).unwrap();
        writeln!(s, "k = {}", p.k).unwrap();
        writeln!(s, "delta = {}", p.delta).unwrap();
        writeln!(s, "width = {}", p.width).unwrap();
        writeln!(s, "amplitude = {}", p.amplitude).unwrap();
        writeln!(s, "offset = {}", p.offset).unwrap();
        let b = &self.barrier;
        writeln!(s, "\n[barrier]").unwrap();
        writeln!(s, "r = {}", b.r).unwrap();
        writeln!(s, "m_bar = {}", b.m_bar).unwrap();
        writeln!(s, "eps = {}", b.eps).unwrap();
        let f = &self.flow;
        writeln!(s, "\n[flow]").unwrap();
        writeln!(s, "cfl = {}", f.cfl).unwrap();
        writeln!(s, "t_end = {}", f.t_end).unwrap();
        writeln!(s, "snapshot_dt = {}", f.snapshot_dt).unwrap();
        writeln!(s, "tol_stat = {}", f.tol_stat).unwrap();
        writeln!(s, "max_steps = {}", f.max_steps).unwrap();
        let o = &self.output;
        writeln!(s, "\n[output]").unwrap();
        writeln!(s, "dir = {}", o.dir).unwrap();
        writeln!(s, "seed = {}", o.seed).unwrap();
        s
    }

    /// The model dimension `N + 1`.
    pub fn lifted_dim(&self) -> usize {
        self.grid.dim + 1
    }

    pub fn anisotropy_model(&self) -> Result<AnisotropyModel> {
        family_model(&self.anisotropy, self.lifted_dim())
    }

    pub fn mobility_model(&self) -> Result<MobilityModel> {
        let probe = family_model(&self.mobility, self.lifted_dim())?;
        MobilityModel::new(self.lifted_dim(), probe.family)
    }

    pub fn cone_spec(&self) -> Result<ConeSpec> {
        match self.cone.family.as_str() {
            "abs" => Ok(ConeSpec::abs_cone(self.grid.dim, self.cone.slope)),
            "max-affine" => {
                if self.cone.slopes.is_empty() {
                    return Err(Error::Config(
                        "max-affine cone needs at least one slope vector".into(),
                    ));
                }
                for sl in &self.cone.slopes {
                    if sl.len() != self.grid.dim {
                        return Err(Error::Config(format!(
                            "max-affine slope vector {sl:?} does not have dimension {}",
                            self.grid.dim
                        )));
                    }
                }
                Ok(ConeSpec::max_affine(self.grid.dim, self.cone.slopes.clone()))
            }
            other => Err(Error::Config(format!("unknown cone family '{other}'"))),
        }
    }

    pub fn perturbation_spec(&self) -> Result<PerturbationSpec> {
        let p = &self.perturbation;
        let spec = match p.kind.as_str() {
            "sublinear" => {
                PerturbationSpec::SublinearBump { k: p.k, delta: p.delta, width: p.width }
            }
            "vanishing" => {
                PerturbationSpec::VanishingBump { amplitude: p.amplitude, width: p.width }
            }
            "offset" => PerturbationSpec::BoundedOffset { offset: p.offset },
            other => return Err(Error::Config(format!("unknown perturbation kind '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn family_model(sec: &FamilySection, dim: usize) -> Result<AnisotropyModel> {
    match sec.family.as_str() {
        "euclidean" => Ok(AnisotropyModel::euclidean(dim)),
        "power" => AnisotropyModel::power_norm(dim, sec.exponent),
        "elliptic" => {
            if sec.matrix.len() != dim * dim {
                return Err(Error::Config(format!(
                    "elliptic matrix needs {} entries for dimension {dim}, got {}",
                    dim * dim,
                    sec.matrix.len()
                )));
            }
            let m = SymMat::from_rows(dim, &sec.matrix).map_err(|e| match e {
                Error::Usage(m) => Error::Config(m),
                other => other,
            })?;
            AnisotropyModel::elliptic(dim, m)
        }
        other => Err(Error::Config(format!("unknown family '{other}'"))),
    }
}

/// Parses the sectioned key-value text into a fully defaulted `RunConfig`.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| bad(line_no, "unterminated section header"))?
                .trim();
            const SECTIONS: &[&str] = &[
                "experiment",
                "anisotropy",
                "mobility",
                "grid",
                "cone",
                "perturbation",
                "barrier",
                "flow",
                "output",
            ];
            if !SECTIONS.contains(&name) {
                return Err(bad(line_no, format!("unknown section '[{name}]'")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(line_no, format!("expected 'key = value', got '{line}'")))?;
        if section.is_empty() {
            return Err(bad(line_no, "key outside any section"));
        }
        cfg.set(&section, key.trim(), value, line_no)?;
    }
    Ok(cfg)
}

/// Parses a repeatable `section.key=value` override.
pub fn apply_override(cfg: &mut RunConfig, assignment: &str) -> Result<()> {
    let (path, value) = assignment.split_once('=').ok_or_else(|| {
        Error::Config(format!("override '{assignment}' is not of the form section.key=value"))
    })?;
    let (section, key) = path.trim().split_once('.').ok_or_else(|| {
        Error::Config(format!("override key '{path}' is not of the form section.key"))
    })?;
    cfg.set(section.trim(), key.trim(), value, 0)
}
