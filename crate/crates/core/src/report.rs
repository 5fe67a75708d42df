//! Plain-text tables of the effective tensors.

use std::fmt::Write;

use crate::effective::HomogenizationResult;
use crate::pipeline::RunReport;
use crate::tensors::{pair_labels, triple_labels};

/// Display-only zero flush relative to each tensor's natural scale.
pub const DISPLAY_FLUSH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DisplayUnits {
    /// GPa, kN/mm and TN.
    #[default]
    Engineering,
    /// Pa, N/m and N.
    Si,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReportOptions {
    pub units: DisplayUnits,
    /// Multiply G by ε and D by ε² using the result's ε.
    pub apply_epsilon: bool,
}

fn table(out: &mut String, title: &str, rows: &[String], cols: &[String], values: &[Vec<f64>], flush: f64) {
    let shown: Vec<Vec<f64>> =
        values.iter().map(|r| r.iter().map(|&v| if v.abs() < flush { 0.0 } else { v }).collect()).collect();
    let max = shown.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let fixed = max == 0.0 || (1e-2..1e5).contains(&max);
    let cell = |v: f64| {
        if v == 0.0 {
            "0".to_string()
        } else if fixed {
            format!("{v:.3}")
        } else {
            format!("{v:.3e}")
        }
    };
    let width = shown.iter().flatten().map(|&v| cell(v).len()).chain(cols.iter().map(String::len)).max().unwrap_or(1);
    let _ = writeln!(out, "{title}");
    let _ = write!(out, "{:>5}", "");
    for c in cols {
        let _ = write!(out, " {c:>width$}");
    }
    let _ = writeln!(out);
    for (label, row) in rows.iter().zip(&shown) {
        let _ = write!(out, "{label:>5}");
        for &v in row {
            let _ = write!(out, " {:>width$}", cell(v));
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out);
}

pub fn render_report(result: &HomogenizationResult, options: &ReportOptions) -> String {
    let (c_unit, g_unit, d_unit, c_div, g_div, d_div) = match options.units {
        DisplayUnits::Engineering => ("GPa", "kN/mm", "TN", 1e9, 1e6, 1e12),
        DisplayUnits::Si => ("Pa", "N/m", "N", 1.0, 1.0, 1.0),
    };
    let eps = result.epsilon;
    let (g_mul, d_mul, g_tag, d_tag) = if options.apply_epsilon {
        (eps, eps * eps, format!("at eps = {eps}"), format!("at eps = {eps}"))
    } else {
        (1.0, 1.0, "per eps".to_string(), "per eps^2".to_string())
    };
    let [sc, sg, sd] = result.scales();
    let pairs = pair_labels();
    let triples = triple_labels();
    let mut out = String::new();
    let c: Vec<Vec<f64>> = result.c_m.entries.iter().map(|r| r.iter().map(|v| v / c_div).collect()).collect();
    table(&mut out, &format!("C ({c_unit})"), &pairs, &pairs, &c, DISPLAY_FLUSH * sc / c_div);
    let g: Vec<Vec<f64>> =
        result.g_m_per_eps.entries.iter().map(|r| r.iter().map(|v| v * g_mul / g_div).collect()).collect();
    table(&mut out, &format!("G ({g_unit}, {g_tag})"), &pairs, &triples, &g, DISPLAY_FLUSH * sg * g_mul / g_div);
    let d: Vec<Vec<f64>> =
        result.d_m_per_eps2.entries.iter().map(|r| r.iter().map(|v| v * d_mul / d_div).collect()).collect();
    table(&mut out, &format!("D ({d_unit}, {d_tag})"), &triples, &triples, &d, DISPLAY_FLUSH * sd * d_mul / d_div);
    let m = &result.metadata;
    let _ = writeln!(out, "volume {:.6e} m^3, center {:?} m", result.volume, result.center);
    let _ = writeln!(out, "C eigenvalues ({c_unit}): {:?}", m.c_eigenvalues.map(|v| v / c_div));
    let _ = writeln!(
        out,
        "D {}: smallest packed eigenvalue {:.4e} N",
        if m.d_positive_semidefinite { "positive semidefinite" } else { "INDEFINITE" },
        m.d_min_eigenvalue
    );
    let _ = writeln!(out, "D asymmetry before symmetrization {:.3e}", m.d_asymmetry_before_symmetrization);
    let _ = writeln!(out, "gauge: {}", m.corrector_gauge);
    let _ = writeln!(out, "rigid modes: {}", m.rigid_mode_policy);
    let _ = writeln!(out, "moment: {}", m.moment_normalization);
    let _ = writeln!(out, "position term: {}", m.position_dependent_term);
    let _ = writeln!(out, "epsilon: {}", m.epsilon_convention);
    out
}

/// Run summary: mesh size, solve schedule, timings and checks.
pub fn render_run_summary(report: &RunReport) -> String {
    let mut out = String::new();
    let m = &report.mesh;
    let t = &report.timings;
    let _ = writeln!(out, "gradhom {}", report.version);
    let _ = writeln!(
        out,
        "mesh: {} nodes, {} tets, {} reduced dofs, face pairs {:?}",
        m.nodes, m.tets, m.reduced_dofs, m.face_pairs_per_axis
    );
    for (tag, f) in &m.phase_volume_fractions {
        let _ = writeln!(out, "  phase {tag}: volume fraction {f:.4}");
    }
    if let Some(w) = m.wall_thickness {
        let _ = writeln!(out, "  wall thickness {w:.4e} m");
    }
    let _ = writeln!(
        out,
        "solves: {} factorization(s), {} first-order, {} second-order, {} refinement step(s)",
        report.factorizations, report.phi_solves, report.psi_solves, report.refinement_steps
    );
    let _ = writeln!(
        out,
        "time (s): mesh {:.3}, map {:.3}, assembly {:.3}, factorization {:.3}, first-order solves {:.3}, second-order solves {:.3}, integrals {:.3}, energy check {:.3}, total {:.3}",
        t.mesh, t.periodic_map, t.assembly, t.factorization, t.phi_solves, t.psi_solves,
        t.c_integration + t.g_d_integration, t.energy_check, t.total
    );
    for c in &report.checks {
        let _ = writeln!(
            out,
            "check {}: {} ({:.3e} <= {:.1e})",
            c.name,
            if c.passed { "ok" } else { "FAILED" },
            c.value,
            c.limit
        );
    }
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}
