//! Convergence studies over a hierarchy of refined meshes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{fit_order, l2_scalar_diff, l2_vector_diff, DiscreteFlux, FnScalar, FnVector};
use crate::assembly::{solve_problem, Discretization};
use crate::cr::{apply_kh, apply_ktilde, averaged_gradient, cr_flux, rt_interpolate_tri, solve_cr};
use crate::mesh::{TensorMesh, TriMesh};
use crate::problems::{by_name, ProblemSpec};
use crate::recovery::{corrected_flux, recover, rt_interpolate, LoadSample};
use crate::sparse::SolverOptions;
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Ncrt2d,
    Ncrt3d,
    Cr,
}

impl ElementKind {
    pub fn dim(self) -> usize {
        match self {
            ElementKind::Ncrt3d => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementKind::Ncrt2d => "ncrt2d",
            ElementKind::Ncrt3d => "ncrt3d",
            ElementKind::Cr => "cr",
        })
    }
}

impl FromStr for ElementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ncrt2d" => Ok(ElementKind::Ncrt2d),
            "ncrt3d" => Ok(ElementKind::Ncrt3d),
            "cr" => Ok(ElementKind::Cr),
            other => Err(Error::Parse(format!("unknown element '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub problem: String,
    pub element: ElementKind,
    pub levels: usize,
    /// Gridline perturbation as a fraction of the smallest interval per axis.
    pub perturb: f64,
    pub seed: u64,
    /// Leading rows left out of the order fits.
    pub skip: usize,
    pub solver: SolverOptions,
    /// How the residual load enters the corrected flux.
    #[serde(default)]
    pub load_sample: LoadSampleName,
}

/// Serializable name for [`LoadSample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadSampleName {
    #[default]
    Centroid,
    Mean,
}

impl From<LoadSampleName> for LoadSample {
    fn from(n: LoadSampleName) -> Self {
        match n {
            LoadSampleName::Centroid => LoadSample::Centroid,
            LoadSampleName::Mean => LoadSample::CellMean,
        }
    }
}

impl StudyConfig {
    /// Defaults for each element: problem 1 over 7 levels (2D), problem 2
    /// over 5 levels (3D), and the smooth variable-coefficient problem over 4
    /// levels of uniform-parallel triangulations.
    pub fn for_element(element: ElementKind) -> Self {
        let (problem, levels, perturb, skip) = match element {
            ElementKind::Ncrt2d => ("p1", 7, 0.2, 3),
            ElementKind::Ncrt3d => ("p2", 5, 0.2, 2),
            ElementKind::Cr => ("custom", 4, 0.0, 0),
        };
        StudyConfig {
            problem: problem.into(),
            element,
            levels,
            perturb,
            seed: 2024,
            skip,
            solver: SolverOptions::default(),
            load_sample: LoadSampleName::Centroid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidInput("a study needs at least 2 levels".into()));
        }
        if self.skip >= self.levels {
            return Err(Error::InvalidInput(format!(
                "skip ({}) must be smaller than levels ({})",
                self.skip, self.levels
            )));
        }
        if !(0.0..0.5).contains(&self.perturb) {
            return Err(Error::InvalidInput(format!("perturb must lie in [0, 0.5), got {}", self.perturb)));
        }
        if self.element == ElementKind::Cr && self.perturb != 0.0 {
            log::warn!("perturbation is ignored for triangular studies");
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::InvalidInput("solver tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Errors measured on one mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub ne: usize,
    pub h: f64,
    /// `||u - u_h||`
    pub err_u: f64,
    /// `||a grad u - a grad_h u_h||`
    pub err_flux_raw: f64,
    /// Distance between the interpolated exact flux and the corrected discrete flux.
    pub err_superclose: f64,
    /// `||a grad u - recovered flux||`
    pub err_recovered: f64,
    /// Error of the nodal-averaging recovery; triangular studies only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub err_nodal: Option<f64>,
}

/// Fitted orders per column; `None` when too few rows remain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orders {
    pub err_u: Option<f64>,
    pub err_flux_raw: Option<f64>,
    pub err_superclose: Option<f64>,
    pub err_recovered: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub err_nodal: Option<f64>,
}

impl Orders {
    pub fn fit(records: &[LevelRecord], skip: usize) -> Self {
        let h: Vec<f64> = records.iter().map(|r| r.h).collect();
        let col = |f: fn(&LevelRecord) -> f64| {
            let e: Vec<f64> = records.iter().map(f).collect();
            fit_order(&h, &e, skip)
        };
        let nodal = if records.iter().all(|r| r.err_nodal.is_some()) && !records.is_empty() {
            col(|r| r.err_nodal.unwrap_or(0.0))
        } else {
            None
        };
        Orders {
            err_u: col(|r| r.err_u),
            err_flux_raw: col(|r| r.err_flux_raw),
            err_superclose: col(|r| r.err_superclose),
            err_recovered: col(|r| r.err_recovered),
            err_nodal: nodal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub records: Vec<LevelRecord>,
    pub orders: Orders,
}

/// Seed used to perturb level `level` (1-based; level 1 is never perturbed).
pub fn level_seed(seed: u64, level: usize) -> u64 {
    seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(level as u64))
}

/// The unperturbed starting mesh of a tensor study.
pub fn initial_mesh(element: ElementKind) -> Result<TensorMesh> {
    match element {
        ElementKind::Ncrt2d => TensorMesh::new(vec![vec![0.0, 0.4, 0.8, 1.0], vec![0.0, 0.7, 1.0]]),
        ElementKind::Ncrt3d => TensorMesh::new(vec![
            vec![0.0, 0.5, 1.0],
            vec![0.0, 0.6, 1.0],
            vec![0.0, 0.4, 1.0],
        ]),
        ElementKind::Cr => Err(Error::InvalidInput("triangular studies use uniform-parallel meshes".into())),
    }
}

/// The tensor mesh of a given level: refine the previous level, then perturb.
pub fn tensor_hierarchy(config: &StudyConfig) -> Result<Vec<TensorMesh>> {
    let mut meshes = vec![initial_mesh(config.element)?];
    for level in 2..=config.levels {
        let refined = meshes.last().expect("non-empty").refine_midpoint();
        meshes.push(refined.perturb(config.perturb, level_seed(config.seed, level))?);
    }
    Ok(meshes)
}

/// Runs a study on the registered problem named in the configuration.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    let problem = by_name(&config.problem, config.element.dim())?;
    run_study_with(config, &problem)
}

/// Runs a study on an explicit problem.
pub fn run_study_with(config: &StudyConfig, problem: &ProblemSpec) -> Result<StudyResult> {
    config.validate()?;
    if problem.dim() != config.element.dim() {
        return Err(Error::DimensionMismatch {
            expected: config.element.dim(),
            found: problem.dim(),
        });
    }
    let mut records = Vec::with_capacity(config.levels);
    match config.element {
        ElementKind::Ncrt2d | ElementKind::Ncrt3d => {
            let mut mesh = initial_mesh(config.element)?;
            for level in 1..=config.levels {
                if level > 1 {
                    mesh = mesh
                        .refine_midpoint()
                        .perturb(config.perturb, level_seed(config.seed, level))?;
                }
                mesh.check_nondegenerate(crate::mesh::DEFAULT_NONDEGENERACY);
                let rec = tensor_level(&mesh, problem, config)?;
                log::info!("level {level}: ne = {}, h = {:.4e}", rec.ne, rec.h);
                records.push(rec);
            }
        }
        ElementKind::Cr => {
            for level in 1..=config.levels {
                let n = 8 << (level - 1);
                let mesh = TriMesh::uniform_parallel(n, n)?;
                let rec = tri_level(&mesh, problem, config)?;
                log::info!("level {level}: ne = {}, h = {:.4e}", rec.ne, rec.h);
                records.push(rec);
            }
        }
    }
    let orders = Orders::fit(&records, config.skip);
    Ok(StudyResult {
        config: config.clone(),
        records,
        orders,
    })
}

/// All error columns on one tensor mesh.
pub fn tensor_level(mesh: &TensorMesh, problem: &ProblemSpec, config: &StudyConfig) -> Result<LevelRecord> {
    let (field, report) = solve_problem(mesh, problem, &config.solver)?;
    log::debug!(
        "{:?}: {} iterations, residual {:.2e}",
        report.kind,
        report.iterations,
        report.relative_residual
    );
    let exact_u = FnScalar(|x: &Point| problem.u(x));
    let exact_flux = FnVector(|x: &Point| problem.flux(x));
    let err_u = l2_scalar_diff(mesh, &exact_u, &field)?;
    let err_flux_raw = l2_vector_diff(
        mesh,
        &exact_flux,
        &DiscreteFlux {
            field: &field,
            problem,
        },
    )?;
    let sigma = corrected_flux(&field, problem, config.load_sample.into())?;
    let pi = rt_interpolate(mesh, |x| problem.flux(x));
    let err_superclose = l2_vector_diff(mesh, &pi, &sigma)?;
    let recovered = recover(mesh, &sigma)?;
    let err_recovered = l2_vector_diff(mesh, &exact_flux, &recovered)?;
    Ok(LevelRecord {
        ne: mesh.num_elements(),
        h: mesh.h(),
        err_u,
        err_flux_raw,
        err_superclose,
        err_recovered,
        err_nodal: None,
    })
}

/// All error columns on one triangulation.
pub fn tri_level(mesh: &TriMesh, problem: &ProblemSpec, config: &StudyConfig) -> Result<LevelRecord> {
    let (field, _) = solve_cr(mesh, problem, &config.solver)?;
    let exact_u = FnScalar(|x: &Point| problem.u(x));
    let exact_flux = FnVector(|x: &Point| problem.flux(x));
    let err_u = l2_scalar_diff(mesh, &exact_u, &field)?;
    let err_flux_raw = l2_vector_diff(
        mesh,
        &exact_flux,
        &DiscreteFlux {
            field: &field,
            problem,
        },
    )?;
    let sigma = cr_flux(&field, problem)?;
    let pi = rt_interpolate_tri(mesh, |x| problem.flux(x))?;
    let err_superclose = l2_vector_diff(mesh, &pi, &sigma)?;
    let abar_grad = averaged_gradient(&field, problem)?;
    let err_recovered = l2_vector_diff(mesh, &exact_flux, &apply_kh(mesh, &abar_grad)?)?;
    let err_nodal = l2_vector_diff(mesh, &exact_flux, &apply_ktilde(mesh, &abar_grad)?)?;
    Ok(LevelRecord {
        ne: mesh.num_elements(),
        h: mesh.mesh_size(),
        err_u,
        err_flux_raw,
        err_superclose,
        err_recovered,
        err_nodal: Some(err_nodal),
    })
}
