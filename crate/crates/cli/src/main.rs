use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cfcs::config::{presets, Mode, RunConfig};
use cfcs::driver::{self, AnalysisResult, Study};
use cfcs::output;
use cfcs::Error;
use clap::{Args, Parser, Subcommand};
use log::{error, info, LevelFilter};

#[derive(Parser)]
#[command(name = "cfcs", version, about = "Topography optimization of stretched membranes with pores")]
struct Cli {
    /// Worker threads for finite-element assembly (0 = all cores).
    #[arg(long, global = true, env = "CFCS_THREADS", default_value_t = 0)]
    threads: usize,

    #[arg(long, global = true, default_value = "info")]
    log_level: LevelFilter,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the thickness field for the configured pore targets.
    Optimize {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Stretch a fixed design and record hydraulic diameters.
    Analyze {
        #[command(flatten)]
        run: RunArgs,
        /// Design CSV as written by `optimize` (the thickness column is used).
        #[arg(long)]
        design: PathBuf,
    },
    /// Stretch a uniform sheet at the minimum thickness.
    FlatSheet {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print a built-in configuration.
    Preset { name: String },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration, or the name of a built-in preset.
    #[arg(long)]
    config: String,

    /// Output directory; falls back to `output_dir` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override the element counts, e.g. `40x64`.
    #[arg(long, value_parser = parse_resolution)]
    resolution: Option<(usize, usize)>,

    /// Override the number of design iterations.
    #[arg(long)]
    iterations: Option<usize>,

    /// Write per-step solver states of the final solve to `<out>/states`.
    #[arg(long)]
    dump_states: bool,
}

fn parse_resolution(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once('x').ok_or("expected NELXxNELY")?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

impl RunArgs {
    fn load(&self, mode: Mode) -> cfcs::Result<(RunConfig, PathBuf)> {
        let path = Path::new(&self.config);
        let mut config = if path.exists() || presets::source(&self.config).is_none() {
            RunConfig::load(path)?
        } else {
            presets::load(&self.config)?
        };
        if let Some((nelx, nely)) = self.resolution {
            config = config.with_resolution(nelx, nely);
        }
        if let Some(n) = self.iterations {
            config.optimizer.iterations = n;
        }
        config.mode = Some(mode);
        config.validate()?;
        let out = self
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .ok_or_else(|| Error::Config("no output directory (use --out or output_dir)".into()))?;
        output::ensure_dir(&out)?;
        std::fs::write(out.join("config.json"), config.to_json()).map_err(|e| Error::Io {
            path: out.join("config.json"),
            source: e,
        })?;
        Ok((config, out))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } => 2,
        Error::Io { .. } => 3,
        Error::PoreAlignment { .. } | Error::Geometry(_) | Error::Topology { .. } => 4,
        Error::InvertedMaterial { .. }
        | Error::ElementInversion { .. }
        | Error::PlaneStress { .. }
        | Error::ElementPlaneStress { .. }
        | Error::SingularMatrix { .. }
        | Error::NonConvergence { .. } => 5,
        Error::CollapsedPore { .. } => 6,
        Error::Optimizer(_) | Error::NonFinite(_) => 7,
    }
}

fn write_analysis(study: &Study, result: &AnalysisResult, out: &Path, dump: bool) -> cfcs::Result<()> {
    let last = result.trajectory.final_state();
    output::write_hd_curve(&out.join(output::CURVE_FILE), &result.curve)?;
    output::write_deformed_nodes(&out.join(output::DEFORMED_FILE), &study.mesh, &last.u)?;
    output::write_vtk(
        &out.join(output::DESIGN_VTK_FILE),
        &study.mesh,
        Some(&last.u),
        &[("thickness", &result.thickness)],
    )?;
    if dump {
        output::write_state_dump(&out.join("states"), &study.mesh, &result.trajectory)?;
    }
    info!("final hydraulic diameters {:?}", driver::final_hydraulic_diameters(&result.curve));
    Ok(())
}

fn optimize(run: &RunArgs) -> cfcs::Result<()> {
    let (config, out) = run.load(Mode::Optimize)?;
    let study = Study::new(config)?;
    info!(
        "optimizing {} elements for {} iterations",
        study.num_elements(),
        study.config.optimizer.iterations
    );
    let result = driver::run_optimization(&study, |_| {})?;
    let eval = &result.final_evaluation;
    let last = eval.trajectory.final_state();
    output::write_convergence(&out.join(output::CONVERGENCE_FILE), &result.history)?;
    output::write_hd_curve(&out.join(output::INITIAL_CURVE_FILE), &result.initial_curve)?;
    output::write_hd_curve(&out.join(output::FINAL_CURVE_FILE), &result.final_curve)?;
    let rows = output::design_rows(&result.z, &eval.z_phys, &study.map);
    output::write_design(&out.join(output::DESIGN_FILE), &rows)?;
    output::write_vtk(
        &out.join(output::DESIGN_VTK_FILE),
        &study.mesh,
        None,
        &[("zeta", &result.z), ("zeta_filtered", &eval.z_phys), ("thickness", &eval.thickness)],
    )?;
    output::write_deformed_nodes(&out.join(output::DEFORMED_FILE), &study.mesh, &last.u)?;
    if run.dump_states {
        output::write_state_dump(&out.join("states"), &study.mesh, &eval.trajectory)?;
    }
    let rec = result.final_record();
    info!(
        "done: f0/finit {:.5}, V/Vmax {:.4}, HD {:?}",
        rec.f0_over_finit,
        rec.volume_fraction,
        driver::final_hydraulic_diameters(&result.final_curve)
    );
    Ok(())
}

fn analyze(run: &RunArgs, design: &Path) -> cfcs::Result<()> {
    let (config, out) = run.load(Mode::Analyze)?;
    let study = Study::new(config)?;
    let thickness = output::read_design(design)?.into_iter().map(|r| r.thickness).collect();
    let result = driver::run_analysis(&study, thickness)?;
    write_analysis(&study, &result, &out, run.dump_states)
}

fn flat_sheet(run: &RunArgs) -> cfcs::Result<()> {
    let (config, out) = run.load(Mode::FlatSheet)?;
    let study = Study::new(config)?;
    let result = driver::run_flat_sheet(&study)?;
    write_analysis(&study, &result, &out, run.dump_states)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp_millis()
        .init();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            error!("could not configure {} threads: {e}", cli.threads);
        }
    }
    let result = match &cli.command {
        Command::Optimize { run } => optimize(run),
        Command::Analyze { run, design } => analyze(run, design),
        Command::FlatSheet { run } => flat_sheet(run),
        Command::Preset { name } => presets::source(name)
            .map(|s| print!("{s}"))
            .ok_or_else(|| Error::Config(format!("unknown preset '{name}'"))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(exit_code(&e))
        }
    }
}
