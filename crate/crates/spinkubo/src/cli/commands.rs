//! One function per subcommand. Each writes its artifacts into the output
//! directory and returns a JSON summary.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{RunConfig, SweepAxis};
use super::CliError;
use crate::lattice_model::HoppingKernel;
use crate::spectral::{
    band_spectrum, detect_gap, fermi_projection, BzGrid, FermiProjectionKernel, GapInfo, KernelDump,
};
use crate::torus_oracle::oracle_check;
use crate::transport::{
    conductance_gk, gk_decomposition, invariants, sigma_k, torque_response, InvariantReport,
    TransportReport,
};

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    text.push('\n');
    fs::write(dir.join(name), text).map_err(|e| CliError::Output(format!("{name}: {e}")))
}

fn create(dir: &Path, name: &str) -> Result<fs::File, CliError> {
    fs::File::create(dir.join(name)).map_err(|e| CliError::Output(format!("{name}: {e}")))
}

fn csv_err(name: &str) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Output(format!("{name}: {e}"))
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

struct Model {
    h: HoppingKernel,
    filled: usize,
}

fn model(cfg: &RunConfig) -> Result<Model, CliError> {
    let h = cfg.model.hamiltonian()?;
    let filled = cfg.filled_bands(h.dim());
    Ok(Model { h, filled })
}

fn projection(cfg: &RunConfig, m: &Model) -> Result<(GapInfo, FermiProjectionKernel), CliError> {
    let n = &cfg.numerics;
    let (gap, _, p) =
        fermi_projection(&m.h, n.m, n.r, m.filled, n.mu).map_err(CliError::numerical)?;
    Ok((gap, p))
}

pub fn bands(cfg: &RunConfig, dir: &Path) -> Result<Value, CliError> {
    let m = model(cfg)?;
    let grid = BzGrid::new(cfg.numerics.m).map_err(CliError::numerical)?;
    let table = band_spectrum(&m.h, grid);
    let mut w = csv::Writer::from_writer(create(dir, "bands.csv")?);
    let mut header = vec!["k1".to_string(), "k2".to_string()];
    header.extend((1..=table.n_bands()).map(|b| format!("e{b}")));
    w.write_record(&header).map_err(csv_err("bands.csv"))?;
    for ([i, j], e) in table.rows() {
        let k = grid.point(i, j);
        let row: Vec<String> = k.iter().chain(e).map(|&x| num(x)).collect();
        w.write_record(&row).map_err(csv_err("bands.csv"))?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))?;
    Ok(json!({ "grid_m": grid.m(), "n_bands": table.n_bands(), "points": grid.len() }))
}

pub fn gap(cfg: &RunConfig, dir: &Path) -> Result<Value, CliError> {
    let m = model(cfg)?;
    let grid = BzGrid::new(cfg.numerics.m).map_err(CliError::numerical)?;
    let g = detect_gap(&band_spectrum(&m.h, grid), m.filled, cfg.numerics.mu)
        .map_err(CliError::numerical)?;
    let v = json!({ "gap": g, "width": g.width(), "grid_m": grid.m() });
    write_json(dir, "gap.json", &v)?;
    Ok(v)
}

pub fn projector(cfg: &RunConfig, dir: &Path) -> Result<Value, CliError> {
    let m = model(cfg)?;
    let (gap, p) = projection(cfg, &m)?;
    write_json(
        dir,
        "projector_kernel.json",
        &KernelDump::from_kernel(p.kernel()),
    )?;
    let v = json!({
        "gap": gap,
        "grid_m": p.grid_m(),
        "radius": p.radius(),
        "torus_complete": p.is_torus_complete(),
        "decay": p.decay(),
        "tail_estimate": p.tail_estimate(),
        "idempotency_residual": p.idempotency_residual(),
    });
    write_json(dir, "projector.json", &v)?;
    Ok(v)
}

pub fn sigma(cfg: &RunConfig, dir: &Path) -> Result<Value, CliError> {
    let m = model(cfg)?;
    let (_, p) = projection(cfg, &m)?;
    let report = TransportReport::assemble(&p).map_err(CliError::numerical)?;
    write_json(dir, "sigma.json", &report)?;
    Ok(serde_json::to_value(report).expect("report serializes"))
}

pub fn torque(cfg: &RunConfig, dir: &Path) -> Result<Value, CliError> {
    let m = model(cfg)?;
    let (_, p) = projection(cfg, &m)?;
    let tau = torque_response(p.kernel()).map_err(CliError::numerical)?;
    let v = json!({ "tau": tau, "grid_m": p.grid_m(), "radius": p.radius(), "kernel_tail": p.tail_estimate() });
    write_json(dir, "torque.json", &v)?;
    Ok(v)
}

pub fn conductance(cfg: &RunConfig, dir: &Path) -> Result<Value, CliError> {
    let m = model(cfg)?;
    let (_, p) = projection(cfg, &m)?;
    let (l1, l2) = cfg.switches.functions();
    let n = &cfg.numerics;
    let g = conductance_gk(p.kernel(), &l1, &l2, n.l_max, n.transverse_cutoff)
        .map_err(CliError::numerical)?;
    g.series
        .write_csv_with_header(
            create(dir, "conductance.csv")?,
            ["L", "GK_re", "GK_im", "tail_bound"],
        )
        .map_err(csv_err("conductance.csv"))?;
    let v = json!({
        "value": g.value,
        "verdict": g.series.verdict,
        "switches": [l1, l2],
        "grid_m": p.grid_m(),
        "radius": p.radius(),
        "l_max": n.l_max,
    });
    write_json(dir, "conductance.json", &v)?;
    Ok(v)
}

fn chern_report(
    h: &HoppingKernel,
    cfg: &RunConfig,
    filled: usize,
) -> Result<InvariantReport, CliError> {
    invariants(h, cfg.numerics.m, filled, cfg.numerics.mu).map_err(CliError::numerical)
}

pub fn chern(cfg: &RunConfig, dir: &Path) -> Result<Value, CliError> {
    let m = model(cfg)?;
    let r = chern_report(&m.h, cfg, m.filled)?;
    let v = json!({ "invariants": r, "spin_chern": r.spin_chern(), "grid_m": cfg.numerics.m });
    write_json(dir, "chern.json", &v)?;
    Ok(v)
}

pub fn decomposition(cfg: &RunConfig, dir: &Path) -> Result<Value, CliError> {
    let m = model(cfg)?;
    let (_, p) = projection(cfg, &m)?;
    let (_, l2) = cfg.switches.functions();
    let d = gk_decomposition(
        p.kernel(),
        cfg.numerics.decomposition_l,
        &l2,
        cfg.numerics.l_max,
    )
    .map_err(CliError::numerical)?;
    d.g_b_series
        .write_csv(create(dir, "g_b_series.csv")?)
        .map_err(csv_err("g_b_series.csv"))?;
    let v = json!({
        "l": d.l,
        "g_a_over_l": d.g_a_over_l,
        "g_b_max_abs": d.g_b_max_abs,
        "g_b_verdict": d.g_b_series.verdict,
        "grid_m": p.grid_m(),
        "radius": p.radius(),
    });
    write_json(dir, "decomposition.json", &v)?;
    Ok(v)
}

pub fn oracle(cfg: &RunConfig, dir: &Path) -> Result<Value, CliError> {
    let m = model(cfg)?;
    let rows = cfg
        .numerics
        .oracle_sides
        .iter()
        .map(|&l| oracle_check(&m.h, l, m.filled, cfg.numerics.mu).map_err(CliError::numerical))
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = csv::Writer::from_writer(create(dir, "oracle.csv")?);
    w.write_record([
        "L",
        "sigma_pipeline",
        "sigma_torus",
        "sigma_diff",
        "projector_diff",
        "spectral_residual",
        "projector_residual",
    ])
    .map_err(csv_err("oracle.csv"))?;
    for r in &rows {
        let mut rec = vec![r.l.to_string()];
        rec.extend(
            [
                r.sigma_pipeline,
                r.sigma_torus,
                r.sigma_diff,
                r.projector_diff,
                r.spectral_residual,
                r.projector_residual,
            ]
            .map(num),
        );
        w.write_record(&rec).map_err(csv_err("oracle.csv"))?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))?;
    let v = json!({ "comparisons": rows });
    write_json(dir, "oracle.json", &v)?;
    Ok(v)
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    values: Vec<f64>,
    status: String,
    gap_lower: Option<f64>,
    gap_upper: Option<f64>,
    sigma_k: Option<f64>,
    sigma_k_bound: Option<f64>,
    tau: Option<f64>,
    tau_bound: Option<f64>,
    chern_up: Option<i64>,
    chern_down: Option<i64>,
}

fn sweep_point(cfg: &RunConfig, values: Vec<f64>) -> SweepRow {
    let mut row = SweepRow {
        values,
        status: "ok".into(),
        gap_lower: None,
        gap_upper: None,
        sigma_k: None,
        sigma_k_bound: None,
        tau: None,
        tau_bound: None,
        chern_up: None,
        chern_down: None,
    };
    let result = (|| -> Result<(), CliError> {
        let m = model(cfg)?;
        let grid = BzGrid::new(cfg.numerics.m).map_err(CliError::numerical)?;
        let bands = band_spectrum(&m.h, grid);
        let filled = m.filled;
        if filled < bands.n_bands() {
            let top = bands
                .rows()
                .map(|(_, e)| e[filled - 1])
                .fold(f64::NEG_INFINITY, f64::max);
            let bottom = bands
                .rows()
                .map(|(_, e)| e[filled])
                .fold(f64::INFINITY, f64::min);
            row.gap_lower = Some(top);
            row.gap_upper = Some(bottom);
        }
        let (_, p) = projection(cfg, &m)?;
        let s = sigma_k(p.kernel()).map_err(CliError::numerical)?;
        let t = torque_response(p.kernel()).map_err(CliError::numerical)?;
        row.sigma_k = Some(s.value);
        row.sigma_k_bound = Some(s.bound);
        row.tau = Some(t.value);
        row.tau_bound = Some(t.bound);
        let inv = chern_report(&m.h, cfg, filled)?;
        row.chern_up = inv.chern_up.map(|c| c.value);
        row.chern_down = inv.chern_down.map(|c| c.value);
        Ok(())
    })();
    if let Err(e) = result {
        row.status = e.kind();
    }
    row
}

pub fn sweep(cfg: &RunConfig, dir: &Path) -> Result<Value, CliError> {
    let plan = cfg.sweep.as_ref().ok_or_else(|| {
        CliError::Config(super::config::ConfigError::Invalid(
            "sweep needs a [sweep] section".into(),
        ))
    })?;
    let axes: Vec<SweepAxis> = std::iter::once(plan.first).chain(plan.second).collect();
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for a in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                a.values()
                    .into_iter()
                    .map(move |v| [p.clone(), vec![v]].concat())
            })
            .collect();
    }
    let rows: Vec<SweepRow> = points
        .into_par_iter()
        .map(|values| {
            let mut c = cfg.clone();
            for (a, &v) in axes.iter().zip(&values) {
                a.parameter.apply(&mut c.model, v);
            }
            sweep_point(&c, values)
        })
        .collect();

    let mut w = csv::Writer::from_writer(create(dir, "sweep.csv")?);
    let mut header: Vec<String> = axes
        .iter()
        .map(|a| a.parameter.name().to_string())
        .collect();
    header.extend(
        [
            "status",
            "gap_lower",
            "gap_upper",
            "sigma_K",
            "sigma_K_bound",
            "tau",
            "tau_bound",
            "chern_up",
            "chern_down",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(csv_err("sweep.csv"))?;
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let opti = |x: Option<i64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in &rows {
        let mut rec: Vec<String> = r.values.iter().map(|&v| num(v)).collect();
        rec.push(r.status.clone());
        rec.extend(
            [
                r.gap_lower,
                r.gap_upper,
                r.sigma_k,
                r.sigma_k_bound,
                r.tau,
                r.tau_bound,
            ]
            .map(opt),
        );
        rec.extend([r.chern_up, r.chern_down].map(opti));
        w.write_record(&rec).map_err(csv_err("sweep.csv"))?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    Ok(
        json!({ "points": rows.len(), "failed_points": failed, "parameters": header[..axes.len()].to_vec() }),
    )
}

/// Prints the summary as one JSON line on stdout.
pub fn print_summary(v: &Value) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{v}");
}
