//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{apply_override, load_config};
use crate::error::{FkError, Result};
use crate::model::{preset, ModelConfig};
use crate::postprocess::{
    export_density, export_population, export_summary, export_truncation, population_series,
    truncation_study, EmaxGrid, SummaryRow,
};
use crate::stepper::{
    admissibility_precheck, reconstruct, time_index, QuadratureRule, SolveOptions,
};
use crate::{assemble_structure, build_basis, run_model};

#[derive(Debug, Parser)]
#[command(
    name = "fkgompertz",
    version,
    about = "Fourier-Klibanov solver for the age-structured Gompertz model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve, reconstruct the density at report times and write CSV output.
    Run(RunArgs),
    /// Relative max error of the truncated series of the transformed initial data.
    TruncationStudy(StudyArgs),
    /// Solve and print the stability diagnostics only.
    StabilityReport(RunArgs),
    /// Check a configuration and the step-size condition without solving.
    Validate(Source),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SourceChoice {
    /// Reference experiment 1, 2 or 3.
    #[arg(long)]
    pub preset: Option<u32>,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Source {
    #[command(flatten)]
    pub choice: SourceChoice,
    /// Number of time steps.
    #[arg(long = "M")]
    pub steps: Option<usize>,
    /// Cut-off constant.
    #[arg(long = "N")]
    pub cutoff: Option<usize>,
    /// Scalar override `key=value`, repeatable.
    #[arg(long = "set")]
    pub overrides: Vec<String>,
    /// Quadrature for projecting the boundary data.
    #[arg(long, value_enum, default_value_t = Rule::Simpson)]
    pub quadrature: Rule,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Rule {
    Simpson,
    Trapezoid,
}

impl From<Rule> for QuadratureRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::Simpson => QuadratureRule::Simpson,
            Rule::Trapezoid => QuadratureRule::Trapezoid,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Report times for the density slices.
    #[arg(long, value_delimiter = ',', default_values_t = [2.5, 5.0, 7.5, 10.0])]
    pub times: Vec<f64>,
    /// Run several M values concurrently, one subdirectory each.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GridChoice {
    /// 41 uniform age nodes.
    #[value(alias = "paper41")]
    Uniform41,
    /// Age nodes at the time step.
    Dt,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Reference experiment; all three when omitted.
    #[arg(long)]
    pub preset: Option<u32>,
    #[arg(long = "N", value_delimiter = ',', default_values_t = [2usize, 4, 6])]
    pub cutoffs: Vec<usize>,
    #[arg(long = "emax-grid", value_enum, default_value_t = GridChoice::Uniform41)]
    pub emax_grid: GridChoice,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl Source {
    pub fn resolve(&self) -> Result<ModelConfig> {
        let mut cfg = match (&self.choice.preset, &self.choice.config) {
            (Some(id), None) => preset(*id)?,
            (None, Some(path)) => load_config(path)?,
            _ => {
                return Err(FkError::InvalidConfig(vec![
                    "exactly one of --preset / --config is required".into(),
                ]))
            }
        };
        for o in &self.overrides {
            apply_override(&mut cfg, o)?;
        }
        if let Some(m) = self.steps {
            cfg.steps = m;
        }
        if let Some(n) = self.cutoff {
            cfg.cutoff = n;
        }
        Ok(cfg)
    }

    fn options(&self) -> SolveOptions {
        SolveOptions {
            rule: self.quadrature.into(),
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| FkError::io(dir, e))
}

/// Outcome of one solve written to `dir`.
struct RunOutcome {
    summary: SummaryRow,
    failure: Option<FkError>,
}

fn run_one(cfg: &ModelConfig, opts: SolveOptions, times: &[f64], dir: &Path) -> Result<RunOutcome> {
    create_dir(dir)?;
    let (basis, _sys, sol) = run_model(cfg, opts)?;
    let summary = SummaryRow::from_solution(cfg, &sol);
    export_summary(std::slice::from_ref(&summary), &dir.join("summary.csv"))?;
    let series = population_series(&sol, &basis, cfg)?;
    export_population(&series, &dir.join("total_population.csv"))?;

    let limit = sol.blowup.as_ref().map_or(sol.grid.n_t(), |b| b.i);
    let indices = times
        .iter()
        .map(|&t| time_index(&sol.grid, t))
        .collect::<Result<Vec<_>>>()?;
    let (ok, late): (Vec<usize>, Vec<usize>) = indices.into_iter().partition(|&i| i < limit);
    let density = reconstruct(&sol.field, &basis, cfg, &sol.grid, &ok)?;
    export_density(&density, dir)?;

    let failure = sol.blowup.clone().map(|b| {
        log_line(&format!(
            "blow-up: {} density slices after t = {} not written",
            late.len(),
            sol.grid.t_nodes[b.i]
        ));
        b.into_error()
    });
    Ok(RunOutcome { summary, failure })
}

fn log_line(msg: &str) {
    eprintln!("fkgompertz: {msg}");
}

fn print_report(row: &SummaryRow, threshold_margin: Option<f64>) {
    println!("example            {}", row.example);
    println!(
        "M, N, dt           {}, {}, {}",
        row.steps, row.cutoff, row.dt
    );
    println!("C                  {:.6e}", row.c);
    println!("|S_N^-1|_F         {:.6e}", row.s_inv_frob);
    println!("sum P              {:.6e}", row.p_sum);
    println!("dt admissible      {}", row.dt_admissible);
    if let Some(m) = threshold_margin {
        println!("margin (thr/lhs)   {m:.6e}");
    }
    println!("max |V|_2          {:.6e}", row.max_norm_observed);
    println!("2C                 {:.6e}", row.bound_2c);
    println!("amplification      {:.6}", row.amplification);
    println!("blow-up node       {}", row.blowup_node);
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = args.source.resolve()?;
    let opts = args.source.options();
    create_dir(&args.out)?;
    let outcomes: Vec<Result<RunOutcome>> = match &args.sweep {
        None => vec![run_one(&cfg, opts, &args.times, &args.out)],
        Some(ms) => std::thread::scope(|scope| {
            let handles: Vec<_> = ms
                .iter()
                .map(|&m| {
                    let mut c = cfg.clone();
                    c.steps = m;
                    let dir = args.out.join(format!("M{m}"));
                    let times = &args.times;
                    scope.spawn(move || run_one(&c, opts, times, &dir))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sweep worker panicked"))
                .collect()
        }),
    };
    let mut rows = Vec::new();
    let mut first_err = None;
    for o in outcomes {
        match o {
            Ok(RunOutcome { summary, failure }) => {
                rows.push(summary);
                if let Some(e) = failure {
                    first_err.get_or_insert(e);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if args.sweep.is_some() && !rows.is_empty() {
        export_summary(&rows, &args.out.join("summary.csv"))?;
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_stability(args: &RunArgs) -> Result<()> {
    let cfg = args.source.resolve()?;
    create_dir(&args.out)?;
    let (_, _, sol) = run_model(&cfg, args.source.options())?;
    let row = SummaryRow::from_solution(&cfg, &sol);
    export_summary(std::slice::from_ref(&row), &args.out.join("summary.csv"))?;
    print_report(&row, Some(sol.report.margin()));
    if !sol.report.within_bound {
        println!("note: max |V|_2 exceeds 2C");
    }
    match sol.blowup {
        Some(b) => Err(b.into_error()),
        None => Ok(()),
    }
}

fn cmd_study(args: &StudyArgs) -> Result<()> {
    let grid = match args.emax_grid {
        GridChoice::Uniform41 => EmaxGrid::Uniform41,
        GridChoice::Dt => EmaxGrid::TimeStep,
    };
    let ids: Vec<u32> = match args.preset {
        Some(id) => vec![id],
        None => vec![1, 2, 3],
    };
    let mut rows = Vec::new();
    for id in ids {
        rows.extend(truncation_study(id, &args.cutoffs, grid)?);
    }
    create_dir(&args.out)?;
    export_truncation(&rows, &args.out.join("truncation_study.csv"))?;
    println!("example,N,E_max_percent");
    for r in &rows {
        println!("{},{},{:.6}", r.example, r.cutoff, r.e_max_percent);
    }
    Ok(())
}

fn cmd_validate(src: &Source) -> Result<()> {
    let cfg = src.resolve()?;
    let grid = cfg.validate()?;
    println!(
        "grid ok: dt = {}, {} time levels, {} ages (last {}), {} x nodes",
        grid.dt,
        grid.n_t(),
        grid.n_a(),
        grid.a_nodes.last().copied().unwrap_or(0.0),
        grid.n_x()
    );
    println!("compatibility ok");
    println!("positivity ok");
    let basis = build_basis(cfg.cutoff, cfg.ell)?;
    let sys = assemble_structure(&basis)?;
    let pre = admissibility_precheck(&cfg, &basis, &sys, src.options())?;
    println!(
        "dt admissible: {} (dt |S^-1|_F sum P = {:.6e}, threshold {:.6e}, largest admissible dt {:.6e})",
        pre.admissible,
        pre.lhs,
        pre.threshold,
        pre.max_admissible_dt()
    );
    Ok(())
}

/// Parses arguments and runs; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::TruncationStudy(a) => cmd_study(a),
        Command::StabilityReport(a) => cmd_stability(a),
        Command::Validate(s) => cmd_validate(s),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            log_line(&format!("error: {e}"));
            1
        }
    }
}
