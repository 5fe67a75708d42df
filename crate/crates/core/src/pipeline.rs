//! Configuration, stage orchestration and the run report.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::correctors::{solve_phi, solve_psi, CellContext, CorrectorSet};
use crate::effective::{
    compute_c, compute_d, default_metadata, energy_consistency_check, gradient_moments, random_macro_samples,
    HomogenizationResult,
};
use crate::error::GradhomError;
use crate::fem::assembly::{mesh_geometry, TetGeometry};
use crate::fem::periodic::default_tolerance;
use crate::fem::{assemble_stiffness, build_periodic_map_pinned, LinearSolver, MaterialTable, PeriodicMap, SolverOptions};
use crate::mesh::gmsh::import_msh;
use crate::mesh::vtk::write_vtk;
use crate::mesh::{first_moment, generate, geometric_center, second_moment, MaterialField, RveGeometry, TetMesh};
use crate::tensors::{isotropic_stiffness, IsotropicPhase, VoigtPair, VoigtTriple};

/// Largest accepted relative mismatch between the two energy evaluations.
pub const ENERGY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Determinism {
    /// Sequential factorization kernels; byte-identical reruns.
    #[default]
    Deterministic,
    ParallelFast,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<PathBuf>,
    /// Directory receiving one legacy VTK file per corrector field.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vtk_dir: Option<PathBuf>,
    /// Reduced stiffness matrix in Matrix Market form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix_market: Option<PathBuf>,
}

/// Run configuration, read from JSON. Exactly one of `geometry` and
/// `import` must be given. Imported meshes take one phase per physical tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<RveGeometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub import: Option<PathBuf>,
    pub phases: Vec<IsotropicPhase>,
    /// Stiffness ratio of the generated void phase to the first phase.
    #[serde(default = "default_void_contrast")]
    pub void_contrast: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub determinism: Determinism,
    /// Random macro states for the energy cross-check.
    #[serde(default = "default_energy_samples")]
    pub energy_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_void_contrast() -> f64 {
    1e-6
}

fn default_epsilon() -> f64 {
    1.0
}

fn default_energy_samples() -> usize {
    10
}

impl RunConfig {
    pub fn new(geometry: RveGeometry, phases: Vec<IsotropicPhase>) -> Self {
        Self {
            geometry: Some(geometry),
            import: None,
            phases,
            void_contrast: default_void_contrast(),
            epsilon: default_epsilon(),
            solver: SolverOptions::default(),
            outputs: Outputs::default(),
            determinism: Determinism::default(),
            energy_samples: default_energy_samples(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, GradhomError> {
        serde_json::from_str(text).map_err(|e| GradhomError::Config(e.to_string()))
    }

    /// Reads a config file; a relative `import` path is taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GradhomError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GradhomError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        if let (Some(import), Some(dir)) = (&config.import, path.parent()) {
            if import.is_relative() {
                config.import = Some(dir.join(import));
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), GradhomError> {
        let bad = |m: String| Err(GradhomError::Config(m));
        match (&self.geometry, &self.import) {
            (Some(_), Some(_)) => return bad("set either geometry or import, not both".into()),
            (None, None) => return bad("one of geometry or import is required".into()),
            _ => {}
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive and finite, got {}", self.epsilon));
        }
        if !(self.void_contrast > 0.0 && self.void_contrast <= 1.0) {
            return bad(format!("void_contrast must lie in (0, 1], got {}", self.void_contrast));
        }
        if self.phases.is_empty() {
            return bad("at least one phase is required".into());
        }
        let mut ids = BTreeSet::new();
        for p in &self.phases {
            p.validate().map_err(|e| GradhomError::Config(format!("phase {}: {e}", p.phase_id)))?;
            if !ids.insert(p.phase_id) {
                return bad(format!("phase id {} appears twice", p.phase_id));
            }
        }
        if !(self.solver.residual_tolerance > 0.0 && self.solver.iterative_tolerance > 0.0) {
            return bad("solver tolerances must be positive".into());
        }
        Ok(())
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions { parallel: self.determinism == Determinism::ParallelFast, ..self.solver }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub mesh: f64,
    pub periodic_map: f64,
    pub assembly: f64,
    pub factorization: f64,
    pub phi_solves: f64,
    pub c_integration: f64,
    pub psi_loads_and_solves: f64,
    pub psi_solves: f64,
    pub g_d_integration: f64,
    pub energy_check: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub nodes: usize,
    pub tets: usize,
    pub reduced_dofs: usize,
    pub stored_matrix_entries: usize,
    pub face_pairs_per_axis: [usize; 3],
    pub phase_volume_fractions: Vec<(u32, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_thickness: Option<f64>,
    pub reoriented_tets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config: RunConfig,
    pub timings: StageTimings,
    pub mesh: MeshSummary,
    pub factorizations: usize,
    pub phi_solves: usize,
    pub psi_solves: usize,
    pub refinement_steps: usize,
    pub phi_residuals: Vec<f64>,
    pub psi_residuals: Vec<f64>,
    pub energy_mismatch: f64,
    pub checks: Vec<InvariantCheck>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Everything a run produced, including the cell data needed to evaluate
/// fields afterwards.
pub struct CompletedRun {
    pub mesh: TetMesh,
    pub geometry: Vec<TetGeometry>,
    pub table: MaterialTable,
    pub map: PeriodicMap,
    pub correctors: CorrectorSet,
    pub result: HomogenizationResult,
    pub report: RunReport,
}

impl CompletedRun {
    pub fn context(&self) -> CellContext<'_> {
        CellContext {
            mesh: &self.mesh,
            geometry: &self.geometry,
            table: &self.table,
            map: &self.map,
            center: self.result.center,
            volume: self.result.volume,
        }
    }
}

struct PreparedMesh {
    mesh: TetMesh,
    materials: MaterialField,
    wall_thickness: Option<f64>,
    reoriented: usize,
}

fn prepare_mesh(config: &RunConfig) -> Result<PreparedMesh, GradhomError> {
    if let Some(geom) = &config.geometry {
        let rve = generate(geom, &config.phases, config.void_contrast)?;
        return Ok(PreparedMesh {
            mesh: rve.mesh,
            materials: rve.materials,
            wall_thickness: rve.wall_thickness,
            reoriented: 0,
        });
    }
    let path = config.import.as_ref().expect("validated");
    let imported = import_msh(path)?;
    let mut materials = MaterialField::new();
    for p in &config.phases {
        let c = isotropic_stiffness(p).map_err(|e| GradhomError::Config(e.to_string()))?;
        materials.insert(p.phase_id, c);
    }
    materials.validate(&imported.mesh)?;
    Ok(PreparedMesh { mesh: imported.mesh, materials, wall_thickness: None, reoriented: imported.reoriented })
}

/// Nodes touching a tet of the stiffest material.
fn stiff_phase_nodes(mesh: &TetMesh, table: &MaterialTable) -> Vec<bool> {
    let size = |c: &crate::tensors::Rank4| c.iter().flatten().flatten().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let stiffest = table.tensors.iter().map(size).fold(0.0, f64::max);
    let mut out = vec![false; mesh.n_nodes()];
    for (t, tet) in mesh.tets.iter().enumerate() {
        if size(table.of(t)) >= stiffest * (1.0 - 1e-12) {
            tet.iter().for_each(|&v| out[v] = true);
        }
    }
    out
}

fn check(checks: &mut Vec<InvariantCheck>, name: &str, value: f64, limit: f64) -> bool {
    let passed = value <= limit;
    checks.push(InvariantCheck { name: name.into(), value, limit, passed });
    passed
}

pub fn run(config: &RunConfig) -> Result<(HomogenizationResult, RunReport), GradhomError> {
    let done = run_full(config)?;
    Ok((done.result, done.report))
}

/// Runs the whole pipeline: mesh, periodic map, assembly and factorization,
/// the six first-order solves, C, the eighteen second-order solves, G and
/// D, then the energy cross-check and output files.
pub fn run_full(config: &RunConfig) -> Result<CompletedRun, GradhomError> {
    config.validate()?;
    let start = Instant::now();
    let mut timings = StageTimings::default();
    let mut warnings = Vec::new();
    let mut checks = Vec::new();
    for p in config.phases.iter().filter(|p| p.near_incompressible()) {
        warnings.push(format!("phase {} is nearly incompressible (nu = {})", p.phase_id, p.poisson_ratio));
    }

    let t = Instant::now();
    let prepared = prepare_mesh(config)?;
    let mesh = prepared.mesh;
    timings.mesh = t.elapsed().as_secs_f64();
    log::info!("mesh: {} nodes, {} tets", mesh.n_nodes(), mesh.n_tets());

    let t = Instant::now();
    let tol = default_tolerance(&mesh);
    let table = MaterialTable::new(&mesh, &prepared.materials)?;
    let map = build_periodic_map_pinned(&mesh, tol, &stiff_phase_nodes(&mesh, &table))?;
    timings.periodic_map = t.elapsed().as_secs_f64();

    let center = geometric_center(&mesh)?;
    let volume = mesh.total_volume();
    let diag = mesh.bbox.diagonal();
    let offset = first_moment(&mesh, center)?;
    let offset_norm = offset.iter().map(|x| x * x).sum::<f64>().sqrt();
    check(&mut checks, "first moment about the center / diagonal", offset_norm / diag, 1e-12);
    let i_bar = second_moment(&mesh, center, 1.0)?;

    let t = Instant::now();
    let geometry = mesh_geometry(&mesh);
    let system = assemble_stiffness(&mesh, &geometry, &table, &map);
    timings.assembly = t.elapsed().as_secs_f64();
    if let Some(path) = &config.outputs.matrix_market {
        system.write_matrix_market(path).map_err(|source| GradhomError::Output { path: path.clone(), source })?;
    }
    let stored = system.nnz_lower();

    let solver = LinearSolver::new(system, config.solver_options())?;
    timings.factorization = solver.setup_seconds;

    let ctx = CellContext { mesh: &mesh, geometry: &geometry, table: &table, map: &map, center, volume };

    let t = Instant::now();
    let phi = solve_phi(&ctx, &solver)?;
    timings.phi_solves = t.elapsed().as_secs_f64();
    let phi_solves = solver.counters.solves();

    let t = Instant::now();
    let c_m = compute_c(&ctx, &phi.fields)?;
    timings.c_integration = t.elapsed().as_secs_f64();
    let spectrum = crate::tensors::check_spectrum(&c_m);
    if spectrum[0] <= 0.0 {
        return Err(GradhomError::Consistency(format!(
            "effective stiffness is not positive definite, smallest eigenvalue {:.4e} Pa",
            spectrum[0]
        )));
    }

    let t = Instant::now();
    let psi = solve_psi(&ctx, &solver, &phi.fields, &c_m.unpack())?;
    timings.psi_loads_and_solves = t.elapsed().as_secs_f64();
    timings.psi_solves = psi.solve_seconds;
    let psi_solves = solver.counters.solves() - phi_solves;
    check(&mut checks, "second-order load net force / (max stiffness * volume)", psi.compatibility, crate::correctors::COMPATIBILITY_TOL);

    let correctors = CorrectorSet { phi: phi.fields, psi: psi.fields };

    let t = Instant::now();
    let (g_bar, d_raw) = gradient_moments(&ctx, &correctors);
    let (d_m, d_bar, asym) = compute_d(&d_raw, &c_m, &i_bar)?;
    timings.g_d_integration = t.elapsed().as_secs_f64();
    check(&mut checks, "D integral relative asymmetry", asym, crate::effective::D_ASYMMETRY_TOL);

    let result = HomogenizationResult {
        c_m,
        g_m_per_eps: g_bar,
        d_m_per_eps2: d_m,
        d_bar_per_eps2: d_bar,
        i_bar,
        volume,
        center,
        epsilon: config.epsilon,
        box_diagonal: diag,
        metadata: default_metadata(&d_m, &c_m, c_m.max_abs() * diag * diag, asym, psi.compatibility),
    };
    if !result.metadata.d_positive_semidefinite {
        warnings.push(format!(
            "strain-gradient stiffness is indefinite (smallest packed eigenvalue {:.4e} N)",
            result.metadata.d_min_eigenvalue
        ));
    }

    let t = Instant::now();
    let samples = random_macro_samples(config.seed, config.energy_samples, diag);
    let energy_mismatch = energy_consistency_check(&ctx, &correctors, &result, &samples);
    timings.energy_check = t.elapsed().as_secs_f64();

    let max_phi = phi.residuals.iter().copied().fold(0.0, f64::max);
    let max_psi = psi.residuals.iter().copied().fold(0.0, f64::max);
    check(&mut checks, "first-order relative residual", max_phi, config.solver.residual_tolerance);
    check(&mut checks, "second-order relative residual", max_psi, config.solver.residual_tolerance);
    let factorizations = solver.counters.factorizations();
    let expected_factorizations = match config.solver.kind {
        crate::fem::SolverKind::Direct => 1,
        crate::fem::SolverKind::Iterative => 0,
    };
    check(&mut checks, "factorizations beyond the expected count", factorizations.abs_diff(expected_factorizations) as f64, 0.0);
    check(&mut checks, "first-order solves beyond 6", phi_solves.abs_diff(6) as f64, 0.0);
    check(&mut checks, "second-order solves beyond 18", psi_solves.abs_diff(18) as f64, 0.0);
    check(&mut checks, "energy two-path relative mismatch", energy_mismatch, ENERGY_TOL);

    let mut fractions: Vec<(u32, f64)> =
        mesh.tags().into_iter().map(|tag| (tag, mesh.region_volume(tag) / volume)).collect();
    fractions.sort_by_key(|f| f.0);

    if let Some(dir) = &config.outputs.vtk_dir {
        export_fields(&mesh, &correctors, dir)?;
    }

    timings.total = start.elapsed().as_secs_f64();
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        timings,
        mesh: MeshSummary {
            nodes: mesh.n_nodes(),
            tets: mesh.n_tets(),
            reduced_dofs: map.n_reduced,
            stored_matrix_entries: stored,
            face_pairs_per_axis: map.pairs_per_axis,
            phase_volume_fractions: fractions,
            wall_thickness: prepared.wall_thickness,
            reoriented_tets: prepared.reoriented,
        },
        factorizations,
        phi_solves,
        psi_solves,
        refinement_steps: solver.counters.refinements(),
        phi_residuals: phi.residuals,
        psi_residuals: psi.residuals,
        energy_mismatch,
        checks,
        warnings,
    };
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if let Some(failed) = report.checks.iter().find(|c| !c.passed) {
        return Err(GradhomError::Consistency(format!(
            "{}: {:.3e} exceeds {:.1e}",
            failed.name, failed.value, failed.limit
        )));
    }
    if let Some(path) = &config.outputs.result {
        std::fs::write(path, result.to_json()).map_err(|source| GradhomError::Output { path: path.clone(), source })?;
    }
    Ok(CompletedRun { mesh, geometry, table, map, correctors, result, report })
}

/// Writes `phi_<pair>.vtk` and `psi_<triple>.vtk` into `dir`.
pub fn export_fields(mesh: &TetMesh, correctors: &CorrectorSet, dir: &Path) -> Result<(), GradhomError> {
    std::fs::create_dir_all(dir).map_err(|source| GradhomError::Output { path: dir.to_path_buf(), source })?;
    let named = VoigtPair::all()
        .map(|p| (format!("phi_{}", p.label()), &correctors.phi[p.index()]))
        .chain(VoigtTriple::all().map(|t| (format!("psi_{}", t.label()), &correctors.psi[t.index()])));
    for (name, field) in named {
        let path = dir.join(format!("{name}.vtk"));
        write_vtk(mesh, &[(name.as_str(), &field.values)], &path).map_err(|e| match e {
            crate::mesh::MeshError::Io(source) => GradhomError::Output { path: path.clone(), source },
            other => GradhomError::Mesh(other),
        })?;
    }
    Ok(())
}
