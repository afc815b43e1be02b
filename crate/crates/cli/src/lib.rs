//! Command-line frontend for the foliage-link engine.
//!
//! Exit codes: 0 on success, 1 when the model or a solver rejects the
//! request, 2 for malformed invocations.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use foliage_link::budget::{
    link_margin, max_loss_budget, required_tx_power, FrontierPolicy, LinkSolver, RadioConfig,
    SolveResult, SolverOptions,
};
use foliage_link::propagation::{delta_bounds, LinkGeometry, LossBreakdown, PropagationModel};
use foliage_link::scenario::{
    emit_csv, emit_json, evaluate_scenario_with, parse_scenario, NodeReport,
};
use foliage_link::sweep::{preset, run_sweep_with, Preset, SweepBase, SweepSpec, SweepVariable};

mod render;

use render::{Cell, Table};

/// Overrides the free-space constant (default 32.45).
pub const FSPL_CONST_ENV: &str = "FOLIAGE_LINK_FSPL_CONST";

#[derive(Debug, Parser)]
#[command(
    name = "foliage-link",
    version,
    about = "Foliage-aware link budget planning for IoT links"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Path loss breakdown for one link.
    Loss(LossArgs),
    /// One-dimensional parameter sweep.
    Sweep(SweepArgs),
    /// Link budget evaluation and inverse solves.
    Budget(BudgetArgs),
    /// Evaluate every node of a deployment scenario file.
    Scenario(ScenarioArgs),
    /// Admissible band for a nominal foliage cover factor.
    Bounds(BoundsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DeltaSource {
    /// Foliage cover factor in [0, 1].
    #[arg(long, conflicts_with_all = ["h_m", "h_f_m"])]
    delta: Option<f64>,
    /// Base station antenna height above the sensor antenna (m).
    #[arg(long, requires = "h_f_m")]
    h_m: Option<f64>,
    /// Foliage height above the sensor antenna (m).
    #[arg(long, requires = "h_m")]
    h_f_m: Option<f64>,
}

impl DeltaSource {
    fn geometry(&self, d_km: f64) -> LinkGeometry {
        LinkGeometry {
            d_km,
            h_m: self.h_m,
            h_f_m: self.h_f_m,
            delta: self.delta,
        }
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").args(["delta", "h_m"]).required(true)))]
struct LossArgs {
    #[arg(long)]
    d_km: f64,
    #[arg(long)]
    f_mhz: f64,
    #[command(flatten)]
    source: DeltaSource,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetName {
    Figure2,
    Figure3,
    Figure4,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepVar {
    Delta,
    #[value(name = "h-f-m")]
    FoliageHeight,
    #[value(name = "d-km")]
    Distance,
    #[value(name = "f-mhz")]
    Frequency,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").args(["preset", "var"]).required(true)))]
struct SweepArgs {
    #[arg(long, value_enum, conflicts_with_all = ["start", "stop", "steps", "d_km", "f_mhz", "delta", "h_m", "h_f_m", "delta_cap"])]
    preset: Option<PresetName>,
    #[arg(long, value_enum, requires_all = ["start", "stop", "steps"])]
    var: Option<SweepVar>,
    #[arg(long, allow_negative_numbers = true)]
    start: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    stop: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    d_km: Option<f64>,
    #[arg(long)]
    f_mhz: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    h_m: Option<f64>,
    #[arg(long)]
    h_f_m: Option<f64>,
    /// Largest foliage cover factor a sweep may reach.
    #[arg(long)]
    delta_cap: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolveFor {
    Range,
    Delta,
    Height,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyName {
    First,
    Largest,
}

#[derive(Debug, Args)]
struct BudgetArgs {
    /// Quantity to solve for; without it the link at the given geometry is evaluated.
    #[arg(long, value_enum)]
    solve: Option<SolveFor>,
    #[arg(long, allow_negative_numbers = true)]
    tx_dbm: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    tx_gain: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    rx_gain: f64,
    #[arg(long, allow_negative_numbers = true)]
    sensitivity_dbm: f64,
    #[arg(long, default_value_t = 0.0)]
    margin_db: f64,
    #[arg(long)]
    d_km: Option<f64>,
    #[arg(long)]
    f_mhz: f64,
    #[arg(long, conflicts_with_all = ["h_m", "h_f_m"])]
    delta: Option<f64>,
    #[arg(long)]
    h_m: Option<f64>,
    #[arg(long)]
    h_f_m: Option<f64>,
    #[arg(long, default_value_t = 0.95)]
    delta_cap: f64,
    /// Which feasibility frontier the delta and height solves report.
    #[arg(long, value_enum, default_value_t = PolicyName::First)]
    policy: PolicyName,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    #[arg(long)]
    file: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long)]
    delta_min: f64,
    #[arg(long)]
    delta_max: f64,
    #[arg(long)]
    sigma: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failed(String),
}

impl CliError {
    fn failed(e: impl Display) -> Self {
        CliError::Failed(e.to_string())
    }
}

/// Runs the CLI, reading the free-space constant override from the environment.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let fspl = std::env::var(FSPL_CONST_ENV).ok();
    run_with_env(args, fspl.as_deref(), stdout, stderr)
}

pub fn run_with_env<I, T>(
    args: I,
    fspl_const: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let mut text = e.render().to_string();
            if code == 2 && !text.contains("Usage:") {
                let sub = args.get(1).and_then(|a| a.to_str()).unwrap_or_default();
                text = text.replacen(
                    "\nFor more information",
                    &format!("\n{}\n\nFor more information", usage(sub)),
                    1,
                );
            }
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let name = cli.command.name();
    match execute(cli, fspl_const, stdout) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(
                stderr,
                "error: {msg}\n\n{}\n\nFor more information, try '--help'.",
                usage(name)
            );
            2
        }
        Err(CliError::Failed(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Loss(_) => "loss",
            Command::Sweep(_) => "sweep",
            Command::Budget(_) => "budget",
            Command::Scenario(_) => "scenario",
            Command::Bounds(_) => "bounds",
        }
    }
}

fn usage(subcommand: &str) -> String {
    let mut cmd = <Cli as clap::CommandFactory>::command();
    cmd.build();
    match cmd.find_subcommand_mut(subcommand) {
        Some(sub) => sub.render_usage().to_string(),
        None => cmd.render_usage().to_string(),
    }
}

fn model_from_env(value: Option<&str>) -> Result<PropagationModel, CliError> {
    match value {
        None => Ok(PropagationModel::default()),
        Some(raw) => raw
            .trim()
            .parse::<f64>()
            .ok()
            .and_then(|k| PropagationModel::new(k).ok())
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "{FSPL_CONST_ENV} must be a finite number, got {raw:?}"
                ))
            }),
    }
}

fn execute(cli: Cli, fspl_const: Option<&str>, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let model = model_from_env(fspl_const)?;
    let (text, output, code) = match cli.command {
        Command::Loss(args) => (loss(&model, &args)?, args.output, 0),
        Command::Sweep(args) => (sweep(&model, &args)?, args.output, 0),
        Command::Budget(args) => (budget(&model, &args)?, args.output, 0),
        Command::Bounds(args) => (bounds(&args)?, args.output, 0),
        Command::Scenario(args) => {
            let (text, failures) = scenario(&model, &args)?;
            write_output(&args.output, &text, stdout)?;
            if failures.is_empty() {
                return Ok(0);
            }
            return Err(CliError::Failed(failures.join("\nerror: ")));
        }
    };
    write_output(&output, &text, stdout)?;
    Ok(code)
}

fn write_output(output: &OutputArgs, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &output.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Failed(format!("cannot write output: {e}"))),
    }
}

fn breakdown_table(b: &LossBreakdown) -> Table {
    Table::single(vec![
        ("delta", Cell::Float(b.split.delta)),
        ("d_f_m", Cell::Float(b.split.d_f_m)),
        ("d_fsp_m", Cell::Float(b.split.d_fsp_m)),
        ("l_foliage_db", Cell::Float(b.l_foliage_db)),
        ("l_fsp_db", Cell::Float(b.l_fsp_db)),
        ("l_total_db", Cell::Float(b.l_total_db)),
        ("regime", Cell::Text(b.foliage.regime.to_string())),
        ("validity", Cell::Text(b.foliage.validity.to_string())),
    ])
}

fn loss(model: &PropagationModel, args: &LossArgs) -> Result<String, CliError> {
    let b = model
        .total_loss(&args.source.geometry(args.d_km), args.f_mhz)
        .map_err(CliError::failed)?;
    Ok(breakdown_table(&b).render(args.output.format))
}

fn sweep_spec(args: &SweepArgs) -> Result<SweepSpec, CliError> {
    if let Some(name) = args.preset {
        return Ok(preset(match name {
            PresetName::Figure2 => Preset::Figure2,
            PresetName::Figure3 => Preset::Figure3,
            PresetName::Figure4 => Preset::Figure4,
        }));
    }
    let var = args.var.expect("clap enforces --preset or --var");
    let variable = match var {
        SweepVar::Delta => SweepVariable::Delta,
        SweepVar::FoliageHeight => SweepVariable::FoliageHeight,
        SweepVar::Distance => SweepVariable::Distance,
        SweepVar::Frequency => SweepVariable::FrequencyMHz,
    };
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| CliError::Usage(format!("a {variable} sweep needs {flag}")))
    };
    let d_km = match variable {
        SweepVariable::Distance => 1.0,
        _ => need(args.d_km, "--d-km")?,
    };
    let f_mhz = match variable {
        SweepVariable::FrequencyMHz => 1.0,
        _ => need(args.f_mhz, "--f-mhz")?,
    };
    let geometry = match variable {
        SweepVariable::Delta => LinkGeometry::with_delta(d_km, 0.0),
        SweepVariable::FoliageHeight => {
            LinkGeometry::with_heights(d_km, need(args.h_m, "--h-m")?, 0.0)
        }
        SweepVariable::Distance | SweepVariable::FrequencyMHz => {
            match (args.delta, args.h_m, args.h_f_m) {
                (Some(delta), None, None) => LinkGeometry::with_delta(d_km, delta),
                (None, Some(h_m), Some(h_f_m)) => LinkGeometry::with_heights(d_km, h_m, h_f_m),
                _ => {
                    return Err(CliError::Usage(format!(
                        "a {variable} sweep needs either --delta or both --h-m and --h-f-m"
                    )))
                }
            }
        }
    };
    let mut spec = SweepSpec::new(
        variable,
        need(args.start, "--start")?,
        need(args.stop, "--stop")?,
        args.steps.expect("clap enforces --steps with --var"),
        SweepBase { geometry, f_mhz },
    );
    if let Some(cap) = args.delta_cap {
        spec.delta_cap = cap;
    }
    spec.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

fn sweep(model: &PropagationModel, args: &SweepArgs) -> Result<String, CliError> {
    let spec = sweep_spec(args)?;
    let table = run_sweep_with(model, &spec).map_err(CliError::failed)?;
    Ok(match args.output.format {
        Format::Csv => emit_csv(&table).map_err(CliError::failed)?,
        Format::Json => {
            serde_json::to_string_pretty(&table).expect("sweep table serializes") + "\n"
        }
        Format::Table => {
            let rows = table
                .rows
                .iter()
                .map(|r| {
                    vec![
                        Cell::Float(r.x),
                        Cell::Float(r.delta),
                        Cell::Float(r.d_f_m),
                        Cell::Float(r.d_fsp_m),
                        Cell::Float(r.l_foliage_db),
                        Cell::Float(r.l_fsp_db),
                        Cell::Float(r.l_total_db),
                        Cell::Text(r.regime.to_string()),
                        Cell::Text(r.validity.to_string()),
                    ]
                })
                .collect();
            let mut columns = foliage_link::scenario::SWEEP_COLUMNS.to_vec();
            columns[0] = table.variable.name();
            Table::new(columns, rows).render(Format::Table)
        }
    })
}

impl BudgetArgs {
    // delta or the full height pair, as for `loss`
    fn source(&self) -> Result<DeltaSource, CliError> {
        if self.h_m.is_some() != self.h_f_m.is_some() {
            return Err(CliError::Usage(
                "--h-m and --h-f-m must be given together".into(),
            ));
        }
        if self.delta.is_none() && self.h_m.is_none() {
            return Err(CliError::Usage(
                "this budget mode needs --delta or --h-m/--h-f-m".into(),
            ));
        }
        Ok(DeltaSource {
            delta: self.delta,
            h_m: self.h_m,
            h_f_m: self.h_f_m,
        })
    }
}

fn budget(model: &PropagationModel, args: &BudgetArgs) -> Result<String, CliError> {
    let radio = RadioConfig {
        tx_power_dbm: args.tx_dbm,
        tx_gain_dbi: args.tx_gain,
        rx_gain_dbi: args.rx_gain,
        rx_sensitivity_dbm: args.sensitivity_dbm,
        required_margin_db: args.margin_db,
    };
    radio
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let solver = LinkSolver::new(
        *model,
        SolverOptions {
            delta_cap: args.delta_cap,
            policy: match args.policy {
                PolicyName::First => FrontierPolicy::FirstCrossing,
                PolicyName::Largest => FrontierPolicy::LargestFeasible,
            },
            ..SolverOptions::default()
        },
    );
    let need_d = || {
        args.d_km
            .ok_or_else(|| CliError::Usage("this budget mode needs --d-km".into()))
    };
    let (result, unit) = match args.solve {
        None => {
            let b = model
                .total_loss(&args.source()?.geometry(need_d()?), args.f_mhz)
                .map_err(CliError::failed)?;
            let mut table = breakdown_table(&b);
            table.extend(vec![
                ("loss_budget_db", Cell::Float(max_loss_budget(&radio))),
                ("margin_db", Cell::Float(link_margin(&radio, b.l_total_db))),
                (
                    "required_tx_dbm",
                    Cell::Float(required_tx_power(&radio, b.l_total_db)),
                ),
                (
                    "link_ok",
                    Cell::Bool(link_margin(&radio, b.l_total_db) >= radio.required_margin_db),
                ),
            ]);
            return Ok(table.render(args.output.format));
        }
        Some(SolveFor::Range) => {
            if args.d_km.is_some() {
                return Err(CliError::Usage("--solve range takes no --d-km".into()));
            }
            let delta = args
                .source()?
                .geometry(1.0)
                .resolve_delta()
                .map_err(CliError::failed)?;
            (solver.max_range(&radio, delta, args.f_mhz), "km")
        }
        Some(SolveFor::Delta) => {
            if args.delta.is_some() || args.h_m.is_some() || args.h_f_m.is_some() {
                return Err(CliError::Usage(
                    "--solve delta takes no foliage flags".into(),
                ));
            }
            (
                solver.max_foliage_factor(&radio, need_d()?, args.f_mhz, args.delta_cap),
                "delta",
            )
        }
        Some(SolveFor::Height) => {
            if args.delta.is_some() || args.h_f_m.is_some() {
                return Err(CliError::Usage(
                    "--solve height takes --h-m only, not --delta or --h-f-m".into(),
                ));
            }
            let h_m = args
                .h_m
                .ok_or_else(|| CliError::Usage("--solve height needs --h-m".into()))?;
            (
                solver.max_foliage_height(&radio, need_d()?, h_m, args.f_mhz),
                "m",
            )
        }
    };
    let r = result.map_err(CliError::failed)?;
    Ok(solve_table(&r, unit).render(args.output.format))
}

fn solve_table(r: &SolveResult, unit: &str) -> Table {
    Table::single(vec![
        ("value", Cell::Float(r.value)),
        ("unit", Cell::Text(unit.to_string())),
        ("achieved_loss_db", Cell::Float(r.achieved_loss_db)),
        ("iterations", Cell::Int(r.iterations.into())),
        ("converged", Cell::Bool(r.converged)),
        ("all_feasible", Cell::Bool(r.all_feasible)),
    ])
}

fn scenario(
    model: &PropagationModel,
    args: &ScenarioArgs,
) -> Result<(String, Vec<String>), CliError> {
    let text = fs::read_to_string(&args.file)
        .map_err(|e| CliError::Failed(format!("cannot read {}: {e}", args.file.display())))?;
    let scenario = parse_scenario(&text).map_err(CliError::failed)?;
    let mut reports: Vec<NodeReport> = Vec::new();
    let mut failures = Vec::new();
    for outcome in evaluate_scenario_with(model, &scenario) {
        match outcome {
            Ok(r) => reports.push(r),
            Err(f) => failures.push(f.to_string()),
        }
    }
    let out = match args.output.format {
        Format::Json => emit_json(&reports) + "\n",
        Format::Csv if reports.is_empty() => String::new(),
        Format::Csv => emit_csv(&reports[..]).map_err(CliError::failed)?,
        Format::Table => {
            let rows = reports
                .iter()
                .map(|r| {
                    vec![
                        Cell::Text(r.id.clone()),
                        Cell::Float(r.delta),
                        Cell::Float(r.d_f_m),
                        Cell::Float(r.d_fsp_m),
                        Cell::Float(r.l_foliage_db),
                        Cell::Float(r.l_fsp_db),
                        Cell::Float(r.l_total_db),
                        Cell::Text(r.regime.to_string()),
                        Cell::Text(r.validity.to_string()),
                        Cell::Float(r.margin_db),
                        Cell::Float(r.required_tx_dbm),
                        Cell::Bool(r.link_ok),
                    ]
                })
                .collect();
            Table::new(foliage_link::scenario::REPORT_COLUMNS.to_vec(), rows).render(Format::Table)
        }
    };
    Ok((out, failures))
}

fn bounds(args: &BoundsArgs) -> Result<String, CliError> {
    let b = delta_bounds(args.delta_min, args.delta_max, args.sigma).map_err(CliError::failed)?;
    Ok(Table::single(vec![
        ("delta_min", Cell::Float(b.delta_min)),
        ("delta_max", Cell::Float(b.delta_max)),
        ("sigma", Cell::Float(b.sigma)),
        ("alpha_low_min", Cell::Float(b.alpha_low_min)),
        ("alpha_high_max", Cell::Float(b.alpha_high_max)),
    ])
    .render(args.output.format))
}
