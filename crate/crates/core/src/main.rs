use clap::{Parser, Subcommand};
use fvmpm::error::Result;
use fvmpm::integrator::{DtControl, Observer};
use fvmpm::scenario::{self, Built, ScenarioConfig};
use fvmpm::snapshot::{conservation_report, write_manifest, SnapshotWriter, StepLogger};
use fvmpm::validation::bench::{self, MmsStudy};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "fvmpm", about = "Coupled finite-volume / material-point mixture solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a TOML config file.
    Run {
        config: PathBuf,
        /// Override with a fixed time increment.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the end time.
        #[arg(long)]
        t_end: Option<f64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite against its analytic oracle.
    Verify {
        /// One of: darcy, terzaghi, mms, sod.
        suite: String,
        /// Mesh levels for convergence studies.
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a built-in scenario preset as TOML.
    Preset { name: String },
}

fn out_root(cli_out: Option<PathBuf>, cfg_dir: &str) -> PathBuf {
    cli_out
        .or_else(|| std::env::var("FVMPM_OUT").ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(cfg_dir))
}

fn cmd_run(config: &Path, dt: Option<f64>, t_end: Option<f64>, out: Option<PathBuf>) -> Result<i32> {
    let text = fs::read_to_string(config).map_err(|e| fvmpm::Error::Io {
        path: config.display().to_string(),
        source: e,
    })?;
    let mut cfg = ScenarioConfig::from_toml(&text)?;
    if let Some(dt) = dt {
        if let Some(ic) = cfg.integrator.as_mut() {
            ic.dt = DtControl::Fixed { dt };
        }
    }
    if let Some(te) = t_end {
        if let Some(ic) = cfg.integrator.as_mut() {
            ic.t_end = te;
        }
    }
    let Built {
        mut sim,
        t_end,
        output,
        name,
        config_hash,
        ..
    } = scenario::build(&cfg)?;
    let dir = out_root(out, &output.dir);
    fs::create_dir_all(&dir).map_err(|e| fvmpm::Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let dt_policy = match sim.plan.dt {
        DtControl::Fixed { dt } => format!("fixed:{dt}"),
        DtControl::Adaptive { safety } => format!("adaptive:{safety}"),
    };
    write_manifest(&dir.join("manifest.txt"), &config_hash, &dt_policy)?;
    let rho_s = sim.models.solid.as_ref().map(|s| s.rho_s).unwrap_or(1.0);
    let mut snap = SnapshotWriter {
        dir: dir.clone(),
        every_steps: output.every_steps,
        vtk: output.vtk,
        eos: sim.models.fluid.eos,
        rho_s,
        frames: 0,
    };
    snap.write_now(&sim.state)?;
    let log_file = fs::File::create(dir.join("run.log")).map_err(|e| fvmpm::Error::Io {
        path: dir.join("run.log").display().to_string(),
        source: e,
    })?;
    let mut logger = StepLogger {
        sink: std::io::BufWriter::new(log_file),
        every_steps: output.log_every.max(1),
    };
    println!("running '{name}' to t = {t_end} (output in {})", dir.display());
    let started = Instant::now();
    let result = {
        let mut obs: Vec<&mut dyn Observer> = vec![&mut logger];
        if output.every_steps > 0 {
            obs.push(&mut snap);
        }
        sim.run(t_end, &mut obs)
    };
    drop(logger);
    match result {
        Ok(()) => {
            snap.write_now(&sim.state)?;
            fs::write(
                dir.join("conservation.txt"),
                conservation_report(&sim.state),
            )
            .ok();
            println!(
                "done: {} steps, t = {:.6e} s, wall = {:.1} s",
                sim.state.step,
                sim.state.time,
                started.elapsed().as_secs_f64()
            );
            Ok(0)
        }
        Err(e) => {
            // Best-effort snapshot of the last state for post-mortem.
            let _ = snap.write_now(&sim.state);
            eprintln!("aborted: {e}");
            Ok(1)
        }
    }
}

fn cmd_verify(suite: &str, levels: usize, out: Option<PathBuf>) -> Result<i32> {
    let started = Instant::now();
    let budget_s = match suite {
        "darcy" => 21.0 * 600.0,
        "terzaghi" => 900.0,
        "mms" => 1800.0,
        "sod" => 300.0,
        other => {
            eprintln!("usage: verify <darcy|terzaghi|mms|sod> (got '{other}')");
            return Ok(2);
        }
    };
    let mut all_pass = true;
    let mut table = String::new();
    match suite {
        "darcy" => {
            let results = bench::run_darcy_suite()?;
            table.push_str("phi,dp,v_sim,v_exact,rel_err,steps,t_final\n");
            for r in &results {
                let pass = r.rel_err <= 0.05;
                all_pass &= pass;
                println!(
                    "[{}] darcy phi={:.2} dp={:>6.0} v_sim={:.5} v_exact={:.5} err={:.2}%",
                    if pass { "PASS" } else { "FAIL" },
                    r.phi,
                    r.dp,
                    r.v_sim,
                    r.v_exact,
                    100.0 * r.rel_err
                );
                table.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.phi, r.dp, r.v_sim, r.v_exact, r.rel_err, r.steps, r.t_final
                ));
            }
        }
        "terzaghi" => {
            let stations = bench::run_terzaghi()?;
            table.push_str("tv,z,p_sim,p_exact\n");
            for s in &stations {
                let pass = s.max_err_frac <= 0.05;
                all_pass &= pass;
                println!(
                    "[{}] terzaghi T_v={:<4} max |dp|/sigma0 = {:.3}% over z in [0, 0.9H]",
                    if pass { "PASS" } else { "FAIL" },
                    s.tv,
                    100.0 * s.max_err_frac
                );
                for (z, p_sim, p_exact) in &s.profile {
                    table.push_str(&format!("{},{},{},{}\n", s.tv, z, p_sim, p_exact));
                }
            }
        }
        "mms" => {
            table.push_str("study,scale,e_vs,e_vf\n");
            for (study, lo, hi, name) in [
                (MmsStudy::FluidGrid, 0.7, 1.3, "fv-grid"),
                (MmsStudy::FeGrid, 1.7, 2.3, "fe-grid"),
                (MmsStudy::PointRatio, 0.7, 1.3, "point-ratio"),
            ] {
                let r = bench::run_mms_study(study, levels)?;
                let pass = r.controlling.slope >= lo && r.controlling.slope <= hi;
                all_pass &= pass;
                println!(
                    "[{}] mms {}: slope {:.2} ({})",
                    if pass { "PASS" } else { "FAIL" },
                    name,
                    r.controlling.slope,
                    r.controlling.label
                );
                for (scale, e_vs, e_vf) in &r.rows {
                    table.push_str(&format!("{name},{scale},{e_vs},{e_vf}\n"));
                }
            }
        }
        "sod" => {
            let coarse = bench::run_sod(400)?;
            let fine = bench::run_sod(800)?;
            let ratio = coarse.l1_density_error / fine.l1_density_error;
            let pass = coarse.l1_density_error < 0.02 && ratio >= 1.5;
            all_pass &= pass;
            println!(
                "[{}] sod: L1(400) = {:.5}, L1(800) = {:.5}, ratio = {:.2}",
                if pass { "PASS" } else { "FAIL" },
                coarse.l1_density_error,
                fine.l1_density_error,
                ratio
            );
            table.push_str(&format!(
                "cells,l1\n400,{}\n800,{}\n",
                coarse.l1_density_error, fine.l1_density_error
            ));
        }
        _ => unreachable!(),
    }
    let elapsed = started.elapsed().as_secs_f64();
    if elapsed > budget_s {
        return Err(fvmpm::Error::Timeout {
            suite: suite.into(),
            budget_s,
        });
    }
    if let Some(dir) = out {
        fs::create_dir_all(&dir).ok();
        fs::write(dir.join(format!("{suite}_report.csv")), table).ok();
    }
    println!(
        "{suite}: {} ({elapsed:.1} s)",
        if all_pass { "all criteria PASS" } else { "FAILURES present" }
    );
    Ok(if all_pass { 0 } else { 1 })
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            dt,
            t_end,
            out,
        } => cmd_run(&config, dt, t_end, out),
        Command::Verify { suite, levels, out } => cmd_verify(&suite, levels, out),
        Command::Preset { name } => scenario::preset(&name).map(|cfg| {
            println!("{}", cfg.to_toml());
            0
        }),
    };
    match code {
        Ok(c) => std::process::exit(c),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
