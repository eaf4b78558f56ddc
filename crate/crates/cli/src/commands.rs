use std::fs;
use std::path::Path;

use dampwave::goursat::{convergence_study, extract_trace, forward_trace, solve_goursat, ObservedOrder};
use dampwave::identity::{breakdown_csv, identity_residual, volterra_check};
use dampwave::inversion::invert_layer_stripping;
use dampwave::oracle::oracle_trace_constant;
use dampwave::{SolverConfig64, Trace64};
use serde_json::json;

use crate::config::{DataSource, RunConfig};
use crate::Failure;

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

fn plot_script(cfg: &RunConfig, body: &str) -> Result<(), Failure> {
    if cfg.emit_plot_script {
        let script = format!("set datafile separator ','\nset key autotitle columnhead\n{body}\npause -1\n");
        write(&cfg.out_dir(), "plot.gp", &script)?;
    }
    Ok(())
}

const TRACE_PLOT: &str = "set xlabel 't'\nplot 'trace.csv' using 1:2 with lines";

pub fn forward(cfg: &RunConfig) -> Result<(), Failure> {
    let (t, h) = cfg.grid()?;
    let p = cfg.profile()?;
    let field = solve_goursat(p, &SolverConfig64::new(t, h))?;
    let trace = extract_trace(&field)?;
    let out = cfg.out_dir();
    write(&out, "trace.csv", &trace.to_csv())?;
    write(&out, "profile.json", &p.to_json()?)?;
    if cfg.write_field {
        write(&out, "field.csv", &field.to_csv())?;
    }
    plot_script(cfg, TRACE_PLOT)?;
    println!("forward: {} samples, d0 = {}", trace.values().len(), trace.values()[0]);
    Ok(())
}

pub fn oracle(cfg: &RunConfig) -> Result<(), Failure> {
    let (t, h) = cfg.grid()?;
    let a = match (cfg.a, &cfg.profile) {
        (Some(a), _) => a,
        (None, Some(p)) => p
            .as_constant()
            .ok_or_else(|| Failure::config("oracle needs a constant profile or field a"))?,
        (None, None) => return Err(Failure::config("oracle needs field a or a constant profile")),
    };
    let trace = oracle_trace_constant(a, t, 2.0 * h)?;
    write(&cfg.out_dir(), "trace.csv", &trace.to_csv())?;
    plot_script(cfg, TRACE_PLOT)?;
    println!("oracle: a = {a}, {} samples", trace.values().len());
    Ok(())
}

pub fn identity(cfg: &RunConfig) -> Result<(), Failure> {
    let (t, h) = cfg.grid()?;
    let (p1, p2) = (cfg.profile()?, cfg.profile2()?);
    let rows = identity_residual(p1, p2, t, h)?;
    let volterra = volterra_check(p1, p2, t, h)?;
    let max_residual = rows.iter().map(|b| b.residual.abs()).fold(0.0, f64::max);
    let out = cfg.out_dir();
    write(&out, "breakdown.csv", &breakdown_csv(&rows))?;
    let report = json!({
        "T": t,
        "h": h,
        "max_residual": max_residual,
        "max_volterra_defect": volterra.max_defect,
    });
    write(&out, "report.json", &serde_json::to_string_pretty(&report).expect("plain JSON value"))?;
    plot_script(
        cfg,
        "set xlabel 'sigma'\nplot for [c=2:8] 'breakdown.csv' using 1:c with lines",
    )?;
    println!("identity: max residual {max_residual:e}, max Volterra defect {:e}", volterra.max_defect);
    Ok(())
}

fn load_data(cfg: &RunConfig, source: &DataSource, solver_h: f64) -> Result<Trace64, Failure> {
    let horizon = cfg.horizon;
    match source {
        DataSource::File(path) => {
            let path = cfg.resolve(path);
            let text = fs::read_to_string(&path)
                .map_err(|e| Failure::config(format!("cannot read trace {}: {e}", path.display())))?;
            let trace = Trace64::from_csv(&text)?;
            match horizon {
                Some(t) => truncate(trace, t),
                None => Ok(trace),
            }
        }
        DataSource::Oracle { oracle } => {
            let t = horizon.ok_or_else(|| Failure::config("oracle data needs field T"))?;
            Ok(oracle_trace_constant(*oracle, t, solver_h)?)
        }
        DataSource::Synthetic { profile, h } => {
            let t = horizon.ok_or_else(|| Failure::config("synthetic data needs field T"))?;
            Ok(forward_trace(profile, t, *h)?)
        }
    }
}

fn truncate(trace: Trace64, horizon: f64) -> Result<Trace64, Failure> {
    let last = trace.index_of(horizon)?;
    Ok(Trace64::new(trace.dt(), trace.values()[..=last].to_vec()))
}

pub fn invert(cfg: &RunConfig) -> Result<(), Failure> {
    let inv = cfg
        .inversion
        .as_ref()
        .ok_or_else(|| Failure::config("invert needs an inversion block"))?;
    let source = cfg.data.as_ref().ok_or_else(|| Failure::config("invert needs a data source"))?;
    let data = load_data(cfg, source, inv.solver_h)?;
    let report = invert_layer_stripping(&data, inv)?;
    let fitted = forward_trace(&report.profile, data.horizon(), inv.solver_h)?;
    let out = cfg.out_dir();
    write(&out, "report.json", &serde_json::to_string_pretty(&report).expect("report serialises"))?;
    write(&out, "profile.json", &report.profile.to_json()?)?;
    write(&out, "misfit.csv", &report.misfit_csv())?;
    write(&out, "trace.csv", &fitted.to_csv())?;
    plot_script(
        cfg,
        "set multiplot layout 2,1\nset xlabel 't'\nplot 'trace.csv' using 1:2 with lines\nset xlabel 'iter'\nset logscale y\nplot 'misfit.csv' using 1:2 with linespoints\nunset multiplot",
    )?;
    println!(
        "invert: {} nodes, final misfit {:e}",
        report.nodes().len(),
        report.final_misfit
    );
    Ok(())
}

pub fn convergence(cfg: &RunConfig) -> Result<(), Failure> {
    let p = cfg.profile()?;
    let t = cfg.horizon()?;
    let steps = match &cfg.steps {
        Some(s) => s.clone(),
        None => {
            let h = cfg.step()?;
            vec![h, h / 2.0, h / 4.0]
        }
    };
    let rows = convergence_study(p, t, &steps)?;
    let mut csv = String::from("h,error,order\n");
    for r in &rows {
        let order = match r.order {
            ObservedOrder::NotApplicable => String::new(),
            ObservedOrder::Exact => "exact".into(),
            ObservedOrder::Rate(q) => q.to_string(),
        };
        csv.push_str(&format!("{},{},{}\n", r.h, r.error, order));
    }
    write(&cfg.out_dir(), "convergence.csv", &csv)?;
    plot_script(
        cfg,
        "set logscale xy\nset xlabel 'h'\nplot 'convergence.csv' using 1:2 with linespoints",
    )?;
    for r in &rows {
        println!("convergence: h = {}, error = {:e}", r.h, r.error);
    }
    Ok(())
}
