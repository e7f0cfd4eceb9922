//! eigs, sweep and spectrum drivers.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use shellnp::geometry::LayeredGeometry;
use shellnp::np_spectrum::{disk_oracle_eigs, Branch};
use shellnp::perturbation::{corrected_frequencies, first_order_analysis, CorrectedFrequency};
use shellnp::potentials::Trace;
use shellnp::resonance::frequencies_from_eigenvalues;
use shellnp::scattering::{intensity_spectrum, IncidentField, PROBE_POINTS};

use crate::config::RunConfig;
use crate::format::{g17, write_csv, write_text};
use crate::CliError;

/// Disk eigenvalues below this magnitude are not resolved in double precision
/// and their harmonics are left out of the tables.
pub const MIN_RESOLVED_EIGENVALUE: f64 = 1e-9;

/// Harmonics 1..=k with k <= `max` whose disk eigenvalue is resolvable.
pub fn resolvable_harmonics(g: &LayeredGeometry, max: usize) -> usize {
    (1..=max).take_while(|&n| 0.5 * g.rho().powi(n as i32) >= MIN_RESOLVED_EIGENVALUE).count()
}

/// First-order corrected frequencies of harmonics 1..=k, k as in `resolvable_harmonics`.
pub fn corrected_table(g: &LayeredGeometry, harmonics: usize, omega_p: f64, trace: Trace) -> Result<Vec<CorrectedFrequency>, CliError> {
    g.validate()?;
    let k = resolvable_harmonics(g, harmonics);
    if k == 0 {
        return Ok(Vec::new());
    }
    let an = first_order_analysis(g, 4 * k, trace)?;
    let mut f = corrected_frequencies(&an.corrected, omega_p)?;
    f.retain(|c| (1..=k).contains(&c.harmonic));
    f.sort_by(|a, b| {
        a.harmonic
            .cmp(&b.harmonic)
            .then(a.branch.cmp(&b.branch))
            .then(b.lambda_tilde.total_cmp(&a.lambda_tilde))
    });
    Ok(f)
}

#[derive(Serialize)]
struct EigsMeta<'a> {
    geometry: &'a LayeredGeometry,
    omega_p: f64,
    trace: Trace,
    harmonics_reported: usize,
    branch_convention: &'static str,
}

pub fn cmd_eigs(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    cfg.require_unit_background()?;
    let g = cfg.layered();
    let wp = cfg.model.omega_p;
    let table = corrected_table(&g, cfg.solver.harmonics, wp, cfg.solver.trace)?;
    let with_oracle = g.is_unperturbed();
    let oracle = if with_oracle { disk_oracle_eigs(g.r1, g.r2, g.delta1, g.delta2, cfg.solver.harmonics)? } else { Vec::new() };
    let mut header = vec!["n", "branch", "lambda", "lambda_tilde", "omega", "omega_tilde"];
    if with_oracle {
        header.extend(["lambda_oracle", "omega_oracle"]);
    }
    let mut rows = Vec::with_capacity(table.len());
    for c in &table {
        let mut r = vec![
            c.harmonic.to_string(),
            c.branch.symbol().to_string(),
            g17(c.lambda),
            g17(c.lambda_tilde),
            g17(c.omega),
            g17(c.omega_tilde),
        ];
        if with_oracle {
            let o = oracle
                .iter()
                .find(|o| o.n == c.harmonic && o.branch == c.branch)
                .expect("oracle covers reported harmonics");
            let w = frequencies_from_eigenvalues(&[o.lambda], wp)?[0];
            r.extend([g17(o.lambda), g17(w)]);
        }
        rows.push(r);
    }
    let csv = cfg.output_path(out, "eigs.csv");
    write_csv(&csv, &header, &rows)?;
    let meta = EigsMeta {
        geometry: &g,
        omega_p: wp,
        trace: cfg.solver.trace,
        harmonics_reported: resolvable_harmonics(&g, cfg.solver.harmonics),
        branch_convention: "+ for positive lambda (bonding, lower frequency), - for negative lambda (antibonding)",
    };
    let json = cfg.output_path(out, "eigs.json");
    write_text(&json, &serde_json::to_string_pretty(&meta).expect("metadata serializes"))?;
    Ok(vec![csv, json])
}

fn sweep_rows(cfg: &RunConfig, value: f64) -> Result<Vec<(f64, usize, usize, f64, f64)>, CliError> {
    let g = cfg.layered_at(value);
    let table = corrected_table(&g, cfg.solver.harmonics, cfg.model.omega_p, cfg.solver.trace)?;
    let mut rows = Vec::new();
    for n in 1..=cfg.solver.harmonics {
        let pick = |b: Branch| {
            let mut v: Vec<f64> = table.iter().filter(|c| c.harmonic == n && c.branch == b).map(|c| c.omega_tilde).collect();
            v.sort_by(|a, b| a.total_cmp(b));
            v
        };
        let (plus, minus) = (pick(Branch::Minus), pick(Branch::Plus));
        for (k, (p, m)) in plus.iter().zip(&minus).enumerate() {
            rows.push((value, n, k + 1, *p, *m));
        }
    }
    Ok(rows)
}

/// One row per sweep value, harmonic and doublet member; `omega_tilde_plus`
/// is the antibonding (higher) frequency.
pub fn cmd_sweep(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    cfg.require_unit_background()?;
    let values = cfg.sweep_values().ok_or_else(|| CliError::Config("sweep: section is required".into()))?;
    let reference = cfg.model.omega_p / 2f64.sqrt();
    let per_value: Vec<_> = values
        .par_iter()
        .map(|&v| sweep_rows(cfg, v))
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut rows: Vec<_> = per_value.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let text: Vec<Vec<String>> = rows
        .iter()
        .map(|&(v, n, k, p, m)| vec![g17(v), n.to_string(), k.to_string(), g17(p), g17(m), g17(reference)])
        .collect();
    let csv = cfg.output_path(out, "sweep.csv");
    write_csv(
        &csv,
        &["sweep_value", "n", "branch", "omega_tilde_plus", "omega_tilde_minus", "omega_reference"],
        &text,
    )?;
    Ok(vec![csv])
}

#[derive(Serialize)]
struct SpectrumMeta<'a> {
    sweep_value: Option<f64>,
    geometry: &'a LayeredGeometry,
    omega_p: f64,
    gamma: f64,
    eps_m: f64,
    incident: IncidentField,
    probe_radius: f64,
    probe_points: usize,
    observable: &'static str,
    peaks: Vec<f64>,
}

pub fn cmd_spectrum(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let grid = cfg.omega_grid().ok_or_else(|| CliError::Config("spectrum: section is required".into()))?;
    let sp = cfg.spectrum.as_ref().expect("checked above");
    let model = cfg.spectrum_model();
    let inc = cfg.incident()?;
    let values: Vec<Option<f64>> = match cfg.sweep_values() {
        Some(v) => v.into_iter().map(Some).collect(),
        None => vec![None],
    };
    let mut files = Vec::new();
    let mut plots = Vec::new();
    let mut peak_rows = Vec::new();
    for v in values {
        let g = match v {
            Some(x) => cfg.layered_at(x),
            None => cfg.layered(),
        };
        let curve = intensity_spectrum(&g, &inc, &model, &grid, sp.probe_factor)?;
        let tag = match v {
            Some(x) => format!("spectrum_{}", g17(x)),
            None => "spectrum".to_string(),
        };
        let rows: Vec<Vec<String>> = curve.omega.iter().zip(&curve.intensity).map(|(w, i)| vec![g17(*w), g17(*i)]).collect();
        let csv = cfg.output_path(out, &format!("{tag}.csv"));
        write_csv(&csv, &["omega", "intensity"], &rows)?;
        let peaks: Vec<f64> = curve.peaks_above(1e-3).iter().map(|&i| curve.omega[i]).collect();
        for &i in &curve.peaks_above(1e-3) {
            peak_rows.push(vec![v.map(g17).unwrap_or_default(), g17(curve.omega[i]), g17(curve.intensity[i])]);
        }
        let meta = SpectrumMeta {
            sweep_value: v,
            geometry: &g,
            omega_p: model.omega_p,
            gamma: model.gamma,
            eps_m: model.eps_m,
            incident: inc,
            probe_radius: curve.probe_radius,
            probe_points: PROBE_POINTS,
            observable: "mean |u^s|^2 over the probe circle",
            peaks,
        };
        let json = cfg.output_path(out, &format!("{tag}.json"));
        write_text(&json, &serde_json::to_string_pretty(&meta).expect("metadata serializes"))?;
        let title = match (v, cfg.sweep.as_ref()) {
            (Some(x), Some(s)) => format!("{:?} = {}", s.variable, g17(x)).to_lowercase(),
            _ => "spectrum".into(),
        };
        let name = csv.file_name().expect("file name").to_string_lossy().into_owned();
        plots.push(format!("\"{name}\" every ::1 using 1:2 with lines title \"{title}\""));
        files.push(csv);
        files.push(json);
    }
    let peaks = cfg.output_path(out, "peaks.csv");
    write_csv(&peaks, &["sweep_value", "omega", "intensity"], &peak_rows)?;
    files.push(peaks);
    let script = format!(
        "set datafile separator \",\"\nset xlabel \"omega (eV)\"\nset ylabel \"mean |u^s|^2\"\nset logscale y\nplot {}\n",
        plots.join(", \\\n     ")
    );
    let gp = cfg.output_path(out, "spectrum.gp");
    write_text(&gp, &script)?;
    files.push(gp);
    Ok(files)
}
