//! Command-line front end: boundary Gram data, metric solves, envelopes,
//! reference fields, curvature checks, and full level-ladder studies, all
//! driven by one JSON config.
//!
//! Exit codes: 0 on success, 2 when the relaxation fails to converge, 3 for
//! an invalid or ill-posed config, 1 for anything else.

use clap::{Parser, Subcommand};
use hymlab::analysis::{
    characteristic_form, dirichlet_energy, k_density, mixed_hessian, wzw_residual,
};
use hymlab::envelope::{
    graph_sweep_envelope_with_report, save_potential_field, HolomorphicGraphFamily,
};
use hymlab::experiments::{
    boundary_slices, reference_field, run_convergence_study, run_property_suites, BoundarySpec,
    ExperimentConfig,
};
use hymlab::geometry::{toric_potential, SphereGrid};
use hymlab::hym::{
    boundary_from_potentials, residual_ratios, save_checkpoint, solve_hym_with_report,
};
use hymlab::linalg::CMat;
use hymlab::quantization::{dual_gram, fs_values, hilbert_map};
use hymlab::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hymlab",
    version,
    about = "Metric relaxation, envelopes, and level-ladder studies on an annular base"
)]
struct Cli {
    /// JSON experiment config; required by every subcommand
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's outdir, else ./out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config's seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Gram matrices of the boundary profiles at one level
    Hilbert {
        /// Level; defaults to the last entry of the config's ladder
        #[arg(long)]
        k: Option<usize>,
    },
    /// Potentials induced by the dual Gram matrices on the window
    Fs {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Solve the metric Dirichlet problem at one level and dump the field
    HymSolve {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Sweep the graph-probe envelope of the boundary family
    Envelope,
    /// Write the study's reference field
    Oracle,
    /// Curvature and residual diagnostics of the reference field
    WzwCheck,
    /// Run the full level ladder and write report.json plus errors.csv
    Converge,
    /// Run the aggregated invariant suites
    Props,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap's own usage-error code collides with the solver one
            let ok = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return ExitCode::from(if ok { 0 } else { 3 });
        }
    };
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(code_for(&e))
        }
    }
}

fn code_for(e: &Error) -> u8 {
    match e.root() {
        Error::NonConvergence { .. } => 2,
        Error::InvalidConfig(_) | Error::Mismatch(_) | Error::Capacity { .. } | Error::Json(_) => {
            3
        }
        _ => 1,
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.outdir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn level(cfg: &ExperimentConfig, k: Option<usize>) -> usize {
    k.unwrap_or(*cfg.k_list.last().unwrap())
}

/// The family's distinct boundary profiles sampled on a grid, labelled.
fn endpoint_profiles(spec: &BoundarySpec, sg: &SphereGrid) -> Vec<(&'static str, Vec<f64>)> {
    let prof = |amp: f64, shift: f64| -> Vec<f64> {
        (0..sg.n_nodes())
            .map(|xi| toric_potential(sg.t(xi), amp, shift))
            .collect()
    };
    match *spec {
        BoundarySpec::Constant { value } => vec![("uniform", vec![value; sg.n_nodes()])],
        BoundarySpec::AnalyticFormula { amp, shift } => vec![("uniform", prof(amp, shift))],
        BoundarySpec::ToricEndpoints {
            amp0,
            shift0,
            amp1,
            shift1,
        } => vec![("outer", prof(amp0, shift0)), ("inner", prof(amp1, shift1))],
    }
}

fn matrix_json(m: &CMat) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect();
    serde_json::json!(rows)
}

fn write_json(path: &Path, value: serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    let out = out_dir(cli, &cfg)?;
    match cli.cmd {
        Cmd::Hilbert { k } => {
            let qgrid = cfg.quadrature.build()?;
            let k = level(&cfg, k);
            for (label, slice) in endpoint_profiles(&cfg.boundary, &qgrid) {
                let primal = hilbert_map(k, &slice, &qgrid)?;
                let dual = dual_gram(&primal)?;
                let path = out.join(format!("hilbert_{label}_k{k}.json"));
                write_json(
                    &path,
                    serde_json::json!({
                        "k": k,
                        "profile": label,
                        "primal": matrix_json(&primal.mat),
                        "dual": matrix_json(&dual.mat),
                    }),
                )?;
                println!("hilbert k={k} {label}: dim {} -> {}", k + 1, path.display());
            }
        }
        Cmd::Fs { k } => {
            let qgrid = cfg.quadrature.build()?;
            let win = cfg.window.build()?;
            let k = level(&cfg, k);
            let on_window = endpoint_profiles(&cfg.boundary, &win);
            for ((label, slice), (_, wprof)) in
                endpoint_profiles(&cfg.boundary, &qgrid).iter().zip(&on_window)
            {
                let g = hilbert_map(k, slice, &qgrid)?;
                let vals = fs_values(&g, &win)?;
                let gap = vals
                    .iter()
                    .zip(wprof)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                let path = out.join(format!("fs_{label}_k{k}.json"));
                write_json(
                    &path,
                    serde_json::json!({
                        "k": k,
                        "profile": label,
                        "t": (0..win.n_nodes()).map(|xi| win.t(xi)).collect::<Vec<_>>(),
                        "theta": (0..win.n_nodes()).map(|xi| win.theta(xi)).collect::<Vec<_>>(),
                        "values": vals,
                        "sup_gap_to_weight": gap,
                    }),
                )?;
                println!("fs k={k} {label}: sup gap to weight {gap:.6e} -> {}", path.display());
            }
        }
        Cmd::HymSolve { k } => {
            let dgrid = cfg.domain.build()?;
            let qgrid = cfg.quadrature.build()?;
            let k = level(&cfg, k);
            let slices = boundary_slices(&cfg.boundary, &dgrid, &qgrid);
            let boundary = boundary_from_potentials(k, &slices, &dgrid, &qgrid)?;
            let (field, rep) =
                solve_hym_with_report(&boundary, &dgrid, cfg.solver_tol, cfg.max_sweeps)?;
            let worst_ratio = residual_ratios(&field)
                .into_iter()
                .fold(0.0f64, f64::max);
            let bin = out.join(format!("solution_k{k}.bin"));
            save_checkpoint(&field, &bin)?;
            write_json(
                &out.join(format!("solve_k{k}.json")),
                serde_json::json!({
                    "k": k,
                    "sweeps": rep.sweeps,
                    "residual": rep.residual,
                    "energy_monotone": rep.energy_monotone,
                    "worst_local_ratio": worst_ratio,
                }),
            )?;
            println!(
                "hym-solve k={k}: {} sweeps, residual {:.3e}, energy monotone {} -> {}",
                rep.sweeps,
                rep.residual,
                rep.energy_monotone,
                bin.display()
            );
        }
        Cmd::Envelope => {
            let dgrid = cfg.domain.build()?;
            let win = cfg.window.build()?;
            let v = boundary_slices(&cfg.boundary, &dgrid, &win);
            let family = HolomorphicGraphFamily::default();
            let (field, rep) = graph_sweep_envelope_with_report(
                &v,
                &family,
                &dgrid,
                &win,
                cfg.envelope_tol,
                cfg.envelope_sweeps,
            )?;
            let bin = out.join("envelope.bin");
            save_potential_field(&field, &bin)?;
            write_json(
                &out.join("envelope.json"),
                serde_json::json!({
                    "sweeps": rep.sweeps,
                    "last_decrement": rep.last_decrement,
                }),
            )?;
            println!(
                "envelope: {} sweeps, last decrement {:.3e} -> {}",
                rep.sweeps,
                rep.last_decrement,
                bin.display()
            );
        }
        Cmd::Oracle => {
            let dgrid = cfg.domain.build()?;
            let win = cfg.window.build()?;
            let vref = reference_field(&cfg, &dgrid, &win)?;
            let (lo, hi) = vref
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                });
            let bin = out.join("reference.bin");
            save_potential_field(&vref, &bin)?;
            write_json(
                &out.join("reference.json"),
                serde_json::json!({ "min": lo, "max": hi }),
            )?;
            println!("oracle: range [{lo:.6}, {hi:.6}] -> {}", bin.display());
        }
        Cmd::WzwCheck => {
            let dgrid = cfg.domain.build()?;
            let win = cfg.window.build()?;
            let u = reference_field(&cfg, &dgrid, &win)?;
            let ch = characteristic_form(&u)?;
            let kd = k_density(&u)?;
            let h = mixed_hessian(&u)?;
            let r = wzw_residual(&u)?;
            let energy = dirichlet_energy(&u)?;
            let k_min = kd.values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            let trailing_min = h.trailing.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            write_json(
                &out.join("wzw.json"),
                serde_json::json!({
                    "char_sup": ch.sup_abs(),
                    "k_density_min": k_min,
                    "trailing_min": trailing_min,
                    "residual_sup": r.sup_abs(),
                    "path_energy": energy,
                }),
            )?;
            println!(
                "wzw-check: residual sup {:.3e}, char sup {:.3e}, k density min {:.3e}",
                r.sup_abs(),
                ch.sup_abs(),
                k_min
            );
        }
        Cmd::Converge => {
            let report = run_convergence_study(&cfg)?;
            report.write(&out)?;
            for r in &report.rows {
                let sup = r
                    .sup_error
                    .map(|v| format!("{v:.6e}"))
                    .unwrap_or_else(|| "flagged".into());
                println!(
                    "k={:>3} sup_error={sup} residual={:.3e} iters={} seconds={:.3}",
                    r.k, r.hym_residual, r.iters, r.seconds
                );
            }
            if let (Some(c), Some(res)) = (report.fit_constant, report.fit_residual) {
                println!("fit: C={c:.4} against log(k+1)/k, relative residual {res:.4}");
            }
            println!("digest: {}", report.determinism_digest);
            println!("wrote {} and {}", out.join("report.json").display(), out.join("errors.csv").display());
        }
        Cmd::Props => {
            let summary = run_property_suites(&cfg)?;
            write_json(&out.join("props.json"), serde_json::to_value(&summary)?)?;
            for line in summary.lines() {
                println!("{line}");
            }
            if !summary.all_passed {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
