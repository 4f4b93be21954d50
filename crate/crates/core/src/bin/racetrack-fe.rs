use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use racetrack_fe::analysis::{count_spikes, monotonicity_breaks, run_sigma_sweep, run_tau_sweep, SweepOptions, SweepRow};
use racetrack_fe::dynamics::simulate;
use racetrack_fe::equilibrium::instantaneous_equilibrium;
use racetrack_fe::io::config::{parse_config, RunConfig};
use racetrack_fe::io::csv::{read_field_table, write_eigen_csv, write_field_csv, write_numeric_csv, write_sweep_csv, EigenRow};
use racetrack_fe::io::meta::Metadata;
use racetrack_fe::io::report::{theory_block, write_report};
use racetrack_fe::io::svg::{write_heatmap, write_line_chart, Heatmap, LineChart, Series};
use racetrack_fe::stability::{critical_curve, heatmap, StabilityReport};
use racetrack_fe::theory::{apriori_bounds, contraction_modulus, default_radius};
use racetrack_fe::{make_grid, perturbed_uniform, uniform_field, Error, Field, KernelMatrix, ModelParams};

#[derive(Parser, Debug)]
#[command(name = "racetrack-fe", version, about = "Footloose Entrepreneur model on a racetrack economy")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "RACETRACK_FE_OUT", value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed of the initial perturbation.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    tau: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    sigma: Option<f64>,
    /// Number of grid nodes.
    #[arg(long, global = true, value_name = "N")]
    grid: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the instantaneous equilibrium for one population field.
    Equilibrium {
        /// `theta,value` CSV of lambda; perturbed uniform when omitted.
        #[arg(long, value_name = "PATH")]
        lambda: Option<PathBuf>,
    },
    /// Integrate the migration dynamics to a stationary pattern.
    Simulate {
        /// `theta,value` CSV of the initial lambda; perturbed uniform when omitted.
        #[arg(long, value_name = "PATH")]
        from: Option<PathBuf>,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Eigenvalue table of the homogeneous state.
    Stability {
        #[arg(long)]
        k_max: Option<i64>,
        /// Also list negative frequencies.
        #[arg(long)]
        both_signs: bool,
    },
    /// Critical transport cost per frequency over a sigma grid.
    CriticalCurve,
    /// Gamma_k over a tau x sigma grid.
    Heatmap,
    /// Stationary spike counts over a list of tau values.
    SweepTau {
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Stationary spike counts over a list of sigma values.
    SweepSigma {
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// A-priori constants of the existence theory.
    Diagnostics {
        /// Ball radius, default Lambda/2.
        #[arg(long)]
        b: Option<f64>,
    },
}

type CliResult = Result<(), Error>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code.clamp(0, 255) as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = cli.seed {
        cfg.numerics.seed = v;
    }
    if let Some(v) = cli.workers {
        cfg.workers = v;
    }
    if let Some(v) = cli.tau {
        cfg.model.tau = v;
    }
    if let Some(v) = cli.sigma {
        cfg.model.sigma = v;
    }
    if let Some(v) = cli.grid {
        cfg.grid_size = v;
    }
    if let Some(v) = cli.dt {
        cfg.numerics.dt = v;
    }
    if let Some(dir) = &cli.out {
        cfg.out_dir = Some(dir.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn warn_contraction(params: &ModelParams) {
    if let Ok(q) = contraction_modulus(params, params.lambda_total, params.lambda_total) {
        if q >= 1.0 {
            eprintln!(
                "warning: contraction modulus {q:.4e} >= 1 (tau = {}, sigma = {}); the fixed point is not guaranteed unique",
                params.tau, params.sigma
            );
        }
    }
}

fn meta(cfg: &RunConfig, command: &str) -> Metadata {
    Metadata::new(&cfg.model, &cfg.numerics, cfg.grid_size).with("command", command)
}

fn field_series(label: &str, f: &Field) -> Series {
    Series {
        label: label.to_string(),
        points: f.grid().theta().iter().copied().zip(f.values().iter().copied()).collect(),
    }
}

fn load_field(path: &Path, cfg: &RunConfig) -> Result<Field, Error> {
    let (theta, _, _) = read_field_table(path)?;
    if theta.len() != cfg.grid_size {
        eprintln!("note: using N = {} nodes from {}", theta.len(), path.display());
    }
    let grid = make_grid(theta.len(), cfg.model.rho)?;
    racetrack_fe::io::csv::read_field_csv(path, &grid)
}

fn run(cli: Cli) -> CliResult {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Equilibrium { lambda } => cmd_equilibrium(&cfg, lambda.as_deref()),
        Command::Simulate { from, max_steps } => cmd_simulate(&cfg, from.as_deref(), *max_steps),
        Command::Stability { k_max, both_signs } => {
            cmd_stability(&cfg, k_max.unwrap_or(cfg.stability.k_max), *both_signs || cfg.stability.both_signs)
        }
        Command::CriticalCurve => cmd_critical_curve(&cfg),
        Command::Heatmap => cmd_heatmap(&cfg),
        Command::SweepTau { values } => {
            let values = values.clone().unwrap_or_else(|| cfg.sweep.tau_values.clone());
            cmd_sweep(&cfg, "tau", &values)
        }
        Command::SweepSigma { values } => {
            let values = values.clone().unwrap_or_else(|| cfg.sweep.sigma_values.clone());
            cmd_sweep(&cfg, "sigma", &values)
        }
        Command::Diagnostics { b } => cmd_diagnostics(&cfg, b.or(cfg.diagnostics.b)),
    }
}

fn cmd_equilibrium(cfg: &RunConfig, lambda_path: Option<&Path>) -> CliResult {
    let params = &cfg.model;
    warn_contraction(params);
    let lambda = match lambda_path {
        Some(p) => load_field(p, cfg)?,
        None => perturbed_uniform(&make_grid(cfg.grid_size, params.rho)?, params.lambda_total, &cfg.numerics)?,
    };
    let grid = lambda.grid().clone();
    let kernel = KernelMatrix::build(&grid, params);
    let phi = uniform_field(&grid, params.phi_total)?;
    let eq = instantaneous_equilibrium(&lambda, &phi, &kernel, params, &cfg.numerics, None)?;

    let dir = out_dir(cfg);
    let m = meta(cfg, "equilibrium").with("grid_size", grid.n_nodes());
    write_field_csv(&lambda, &dir.join("lambda.csv"), &m)?;
    write_field_csv(&eq.w, &dir.join("wage.csv"), &m)?;
    write_field_csv(&eq.price_index, &dir.join("price_index.csv"), &m)?;
    write_field_csv(&eq.income, &dir.join("income.csv"), &m)?;
    write_field_csv(&eq.omega, &dir.join("real_wage.csv"), &m)?;
    let summary = json!({
        "iterations": eq.iterations,
        "residual": eq.residual,
        "w": {"min": eq.w.min(), "max": eq.w.max()},
        "price_index": {"min": eq.price_index.min(), "max": eq.price_index.max()},
        "omega": {"min": eq.omega.min(), "max": eq.omega.max()},
    });
    write_report(&dir.join("equilibrium.json"), &m, Some(theory_block(params, None)), &summary)?;
    write_line_chart(
        &LineChart {
            title: "Instantaneous equilibrium".into(),
            x_label: "theta".into(),
            y_label: "value".into(),
            series: vec![field_series("w", &eq.w), field_series("omega", &eq.omega), field_series("G", &eq.price_index)],
        },
        &dir.join("equilibrium.svg"),
        &m,
    )?;
    println!("iterations={} residual={:.3e}", eq.iterations, eq.residual);
    println!("w in [{:.10}, {:.10}]", eq.w.min(), eq.w.max());
    println!("omega in [{:.10}, {:.10}]", eq.omega.min(), eq.omega.max());
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, from: Option<&Path>, max_steps: Option<usize>) -> CliResult {
    let params = &cfg.model;
    let mut numerics = cfg.numerics;
    if let Some(n) = max_steps {
        numerics.max_steps = n;
    }
    numerics.validate()?;
    warn_contraction(params);
    let lambda0 = match from {
        Some(p) => load_field(p, cfg)?,
        None => perturbed_uniform(&make_grid(cfg.grid_size, params.rho)?, params.lambda_total, &numerics)?,
    };
    let grid = lambda0.grid().clone();
    let kernel = KernelMatrix::build(&grid, params);
    let phi = uniform_field(&grid, params.phi_total)?;
    let res = simulate(&lambda0, &phi, &kernel, params, &numerics)?;
    let spikes = count_spikes(&res.final_lambda, cfg.sweep.threshold_ratio);

    let dir = out_dir(cfg);
    let m = Metadata::new(params, &numerics, grid.n_nodes())
        .with("command", "simulate")
        .with("converged", res.converged)
        .with("steps", res.steps_taken);
    write_field_csv(&lambda0, &dir.join("lambda_initial.csv"), &m)?;
    write_field_csv(&res.final_lambda, &dir.join("lambda_final.csv"), &m)?;
    write_field_csv(&res.final_equilibrium.omega, &dir.join("real_wage_final.csv"), &m)?;
    for (t, f) in &res.trajectory_samples {
        write_field_csv(f, &dir.join(format!("lambda_t{t:.4}.csv")), &m.clone().with("time", t))?;
    }
    let summary = json!({
        "converged": res.converged,
        "steps": res.steps_taken,
        "time": res.steps_taken as f64 * numerics.dt,
        "last_change": res.last_change,
        "mass_drift": res.mass_drift,
        "wage_sweeps": res.wage_sweeps,
        "spike_count": if res.converged { Some(spikes) } else { None },
        "threshold_ratio": cfg.sweep.threshold_ratio,
        "max_lambda": res.final_lambda.max(),
        "min_lambda": res.final_lambda.min(),
    });
    write_report(&dir.join("simulate.json"), &m, Some(theory_block(params, None)), &summary)?;
    write_line_chart(
        &LineChart {
            title: format!("Stationary population (sigma={}, tau={})", params.sigma, params.tau),
            x_label: "theta".into(),
            y_label: "lambda".into(),
            series: vec![field_series("final", &res.final_lambda), field_series("initial", &lambda0)],
        },
        &dir.join("simulate.svg"),
        &m,
    )?;
    println!(
        "converged={} steps={} last_change={:.3e} mass_drift={:.3e} wage_sweeps/step={:.2}",
        res.converged,
        res.steps_taken,
        res.last_change,
        res.mass_drift,
        res.wage_sweeps as f64 / res.steps_taken.max(1) as f64
    );
    if res.converged {
        println!("spikes={spikes}");
    } else {
        println!("spikes=n/a (not stationary after {} steps)", res.steps_taken);
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_stability(cfg: &RunConfig, k_max: i64, both_signs: bool) -> CliResult {
    if k_max < 1 {
        return Err(Error::InvalidParameter { name: "k_max", reason: "must be >= 1".into() });
    }
    let params = &cfg.model;
    let report = StabilityReport::build(params, k_max);
    let rows: Vec<EigenRow> = report
        .modes
        .iter()
        .filter(|m| both_signs || m.k > 0)
        .map(|m| EigenRow { k: m.k, tau: params.tau, sigma: params.sigma, z: m.z_k, gamma: m.gamma_k })
        .collect();
    let changes = report.sign_changes();

    let dir = out_dir(cfg);
    let m = Metadata::for_model(params).with("command", "stability").with("k_max", k_max);
    write_eigen_csv(&rows, &dir.join("eigenvalues.csv"), &m)?;
    let body = json!({ "stability": report, "sign_changes": changes });
    write_report(&dir.join("stability.json"), &m, Some(theory_block(params, None)), &body)?;
    let positive: Vec<(f64, f64)> = report.modes.iter().filter(|m| m.k > 0).map(|m| (m.k as f64, m.gamma_k)).collect();
    write_line_chart(
        &LineChart {
            title: format!("Gamma_k (sigma={}, tau={})", params.sigma, params.tau),
            x_label: "k".into(),
            y_label: "Gamma_k".into(),
            series: vec![Series { label: "Gamma_k".into(), points: positive }],
        },
        &dir.join("stability.svg"),
        &m,
    )?;

    println!("Z*={:.10} no_black_hole={}", report.z_star, report.no_black_hole);
    println!("{:>4} {:>14} {:>16}  stable", "k", "Z_k", "Gamma_k");
    for r in &rows {
        let mark = if changes.contains(&r.k) { "  <- sign change" } else { "" };
        println!("{:>4} {:>14.10} {:>16.8e}  {}{}", r.k, r.z, r.gamma, r.gamma < 0.0, mark);
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_critical_curve(cfg: &RunConfig) -> CliResult {
    let params = &cfg.model;
    let sigmas = cfg.critical_curve.sigma.values();
    let modes = &cfg.critical_curve.modes;
    let curves: Vec<_> = modes.iter().map(|&k| critical_curve(k, &sigmas, params)).collect();

    let mut header = vec!["sigma".to_string()];
    header.extend(modes.iter().map(|k| format!("tau_k{k}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = sigmas
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut row = vec![*s];
            row.extend(curves.iter().map(|c| c[i].tau.unwrap_or(f64::NAN)));
            row
        })
        .collect();
    let dir = out_dir(cfg);
    let m = Metadata::for_model(params)
        .with("command", "critical-curve")
        .with("sigma_grid", format!("{}:{}:{}", cfg.critical_curve.sigma.min, cfg.critical_curve.sigma.max, cfg.critical_curve.sigma.count));
    write_numeric_csv(&header_refs, &rows, &dir.join("critical_curve.csv"), &m)?;
    write_line_chart(
        &LineChart {
            title: "Critical transport cost".into(),
            x_label: "tau".into(),
            y_label: "sigma".into(),
            series: modes
                .iter()
                .zip(&curves)
                .map(|(k, c)| Series {
                    label: format!("k={k}"),
                    points: c.iter().map(|p| (p.tau.unwrap_or(f64::NAN), p.sigma)).collect(),
                })
                .collect(),
        },
        &dir.join("critical_curve.svg"),
        &m,
    )?;
    for (k, c) in modes.iter().zip(&curves) {
        let found = c.iter().filter(|p| p.tau.is_some()).count();
        println!("k={k}: {found}/{} sigma points bracketed", c.len());
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_heatmap(cfg: &RunConfig) -> CliResult {
    let params = &cfg.model;
    let taus = cfg.heatmap.tau.values();
    let sigmas = cfg.heatmap.sigma.values();
    let dir = out_dir(cfg);
    for &k in &cfg.heatmap.modes {
        let cells = heatmap(k, &taus, &sigmas, params);
        let rows: Vec<EigenRow> = cells
            .iter()
            .map(|c| EigenRow { k: c.k, tau: c.tau, sigma: c.sigma, z: c.z_k, gamma: c.gamma_k })
            .collect();
        let m = Metadata::for_model(params)
            .with("command", "heatmap")
            .with("k", k)
            .with("tau_grid", format!("{}:{}:{}", cfg.heatmap.tau.min, cfg.heatmap.tau.max, cfg.heatmap.tau.count))
            .with("sigma_grid", format!("{}:{}:{}", cfg.heatmap.sigma.min, cfg.heatmap.sigma.max, cfg.heatmap.sigma.count));
        write_eigen_csv(&rows, &dir.join(format!("heatmap_k{k}.csv")), &m)?;
        let values = cells.chunks(taus.len().max(1)).map(|row| row.iter().map(|c| c.gamma_k).collect()).collect();
        write_heatmap(
            &Heatmap {
                title: format!("Gamma_{k}"),
                x_label: "tau".into(),
                y_label: "sigma".into(),
                xs: taus.clone(),
                ys: sigmas.clone(),
                values,
            },
            &dir.join(format!("heatmap_k{k}.svg")),
            &m,
        )?;
        let unstable = cells.iter().filter(|c| c.gamma_k > 0.0).count();
        println!("k={k}: {unstable}/{} cells with Gamma_k > 0", cells.len());
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, which: &str, values: &[f64]) -> CliResult {
    let params = &cfg.model;
    let dir = out_dir(cfg);
    let fields_dir = dir.join(format!("sweep_{which}"));
    let opts = SweepOptions {
        grid_size: cfg.grid_size,
        threshold_ratio: cfg.sweep.threshold_ratio,
        workers: cfg.workers,
        out_dir: Some(fields_dir),
    };
    let (rows, fixed): (Vec<SweepRow>, (&str, f64)) = if which == "tau" {
        let sigma = cfg.sweep.sigma.unwrap_or(params.sigma);
        (run_tau_sweep(sigma, values, params, &cfg.numerics, &opts)?, ("sigma", sigma))
    } else {
        let tau = cfg.sweep.tau.unwrap_or(params.tau);
        (run_sigma_sweep(tau, values, params, &cfg.numerics, &opts)?, ("tau", tau))
    };
    for r in &rows {
        if !r.no_black_hole {
            eprintln!("warning: {}={} violates sigma - 1 > mu", r.param_name, r.param_value);
        }
    }
    let breaks = monotonicity_breaks(&rows);
    let m = meta(cfg, &format!("sweep-{which}"))
        .with(fixed.0, fixed.1)
        .with("values", values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"))
        .with("threshold_ratio", cfg.sweep.threshold_ratio);
    write_sweep_csv(&rows, &dir.join(format!("sweep_{which}.csv")), &m)?;
    write_report(
        &dir.join(format!("sweep_{which}.json")),
        &m,
        None,
        &json!({ "rows": rows, "monotonicity_breaks": breaks }),
    )?;
    println!("{:>10} {:>7} {:>10} {:>10}  max_lambda", which, "spikes", "converged", "steps");
    for r in &rows {
        let spikes = r.spike_count.map(|c| c.to_string()).unwrap_or_else(|| "-".into());
        println!("{:>10} {:>7} {:>10} {:>10}  {:.6}", r.param_value, spikes, r.converged, r.steps, r.max_lambda);
        if let Some(e) = &r.error {
            eprintln!("  row {}={} failed: {e}", r.param_name, r.param_value);
        }
    }
    for i in &breaks {
        eprintln!("note: spike count not monotone between rows {} and {}", i - 1, i);
    }
    println!("wrote {}", dir.display());
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        return Err(Error::SweepRowsFailed { failed, total: rows.len() });
    }
    Ok(())
}

fn cmd_diagnostics(cfg: &RunConfig, b: Option<f64>) -> CliResult {
    let params = &cfg.model;
    let b = b.unwrap_or_else(|| default_radius(params));
    let q = contraction_modulus(params, params.lambda_total, params.lambda_total)?;
    warn_contraction(params);
    let dir = out_dir(cfg);
    let m = Metadata::for_model(params).with("command", "diagnostics").with("b", b);
    let theory = theory_block(params, Some(b));
    write_report(&dir.join("diagnostics.json"), &m, Some(theory.clone()), &json!({}))?;
    println!("contraction modulus (Lambda1 = Lambda2 = Lambda): {q:.10e}");
    match apriori_bounds(params, b) {
        Ok(bd) => {
            println!("b={b}");
            println!("modulus on ball   q     = {:.10e}", bd.contraction_modulus);
            println!("G range           [{:.10e}, {:.10e}]", bd.g_lower, bd.g_upper);
            println!("w upper           {:.10e}", bd.w_upper);
            println!("omega upper       {:.10e}", bd.omega_upper);
            println!("K                 {:.10e}", bd.k_bound);
            println!("L_G, L_w, L_omega {:.6e} {:.6e} {:.6e}", bd.l_g, bd.l_w, bd.l_omega);
            println!("L                 {:.10e}", bd.l_psi);
            println!("b/K               {:.10e}", bd.horizon_b_over_k);
            println!("1/L               {:.10e}", bd.horizon_inv_l);
        }
        Err(na) => println!("{na}"),
    }
    println!("wrote {}", dir.display());
    Ok(())
}
