use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smallnoise_gof::calibration::DEFAULT_ALPHAS;
use smallnoise_gof::harness::{self, AlternativeSpec, RunConfig, Study};
use smallnoise_gof::limit_transform::build_profile;
use smallnoise_gof::{solve_flow, Result, Trajectory};

#[derive(Parser)]
#[command(name = "sngof", version, about = "Goodness-of-fit testing for small-noise diffusions")]
struct Cli {
    /// TOML run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    n_steps: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    n_reps: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    r_cut: Option<f64>,
    /// Quantile table CSV (defaults to the bundled table).
    #[arg(long, global = true)]
    table: Option<PathBuf>,
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone, Copy)]
struct AltArgs {
    /// Amplitude of the `sin` perturbation added to the hypothesis drift.
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    frequency: Option<f64>,
    /// Additive constant in the alternative drift.
    #[arg(long)]
    shift: Option<f64>,
}

impl AltArgs {
    fn any(&self) -> bool {
        self.amplitude.is_some() || self.frequency.is_some() || self.shift.is_some()
    }

    fn apply(&self, base: Option<AlternativeSpec>) -> Option<AlternativeSpec> {
        if !self.any() {
            return base;
        }
        let mut a = base.unwrap_or_default();
        if let Some(v) = self.amplitude {
            a.amplitude = v;
        }
        if let Some(v) = self.frequency {
            a.frequency = v;
        }
        if let Some(v) = self.shift {
            a.shift = v;
        }
        Some(a)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and write it as `t,X` CSV.
    Simulate {
        #[arg(long, default_value_t = 0)]
        replication: u64,
        #[command(flatten)]
        alt: AltArgs,
    },
    /// Run the test on a trajectory CSV and print the JSON report.
    Test { trajectory: PathBuf },
    /// Rejection rate under the hypothesis.
    Size,
    /// Rejection rate under an alternative.
    Power {
        #[command(flatten)]
        alt: AltArgs,
    },
    /// Monte Carlo critical values for the configured r_cut.
    Calibrate {
        #[arg(long, default_value_t = 1_000_000)]
        n_paths: usize,
        #[arg(long, default_value_t = 2000)]
        grid_steps: usize,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// Numerical identity and invariant checks for the configured model.
    Validate {
        /// Also dump the transform profile CSV here.
        #[arg(long)]
        profile_out: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    ShowConfig,
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(v) = &o.model {
        c.model = v.clone();
    }
    macro_rules! set {
        ($($field:ident <- $opt:ident),*) => { $( if let Some(v) = o.$opt { c.$field = v; } )* };
    }
    set!(theta_true <- theta, epsilon <- epsilon, horizon <- horizon, n_steps <- n_steps, alpha <- alpha,
         n_reps <- n_reps, base_seed <- seed, r_cut <- r_cut);
    if let Some(p) = &o.table {
        c.quantile_table = Some(p.clone());
    }
    if let Some(p) = &o.output {
        c.output = Some(p.clone());
    }
    Ok(c)
}

fn output(config: &RunConfig) -> Result<Box<dyn Write>> {
    Ok(match &config.output {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn report_study(config: &RunConfig, study: &Study) -> Result<()> {
    if config.output.is_some() {
        study.write_csv(output(config)?)?;
    }
    for (rep, msg) in &study.failures {
        eprintln!("rep {rep} failed: {msg}");
    }
    println!("{}", serde_json::to_string_pretty(&study.summary).expect("summary serializes"));
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let mut config = effective_config(&cli)?;
    match cli.command {
        Command::Simulate { replication, alt } => {
            config.alternative = alt.apply(config.alternative);
            let traj = harness::cmd_simulate(&config, replication)?;
            traj.write_csv(output(&config)?)?;
        }
        Command::Test { trajectory } => {
            config.validate()?;
            let traj = Trajectory::load(trajectory, config.epsilon)?;
            let out = harness::cmd_test(&config, &traj)?;
            writeln!(output(&config)?, "{}", serde_json::to_string_pretty(&out).expect("report serializes"))?;
        }
        Command::Size => report_study(&config, &harness::cmd_size(&config)?)?,
        Command::Power { alt } => {
            config.alternative = alt.apply(config.alternative).or(Some(AlternativeSpec::default()));
            report_study(&config, &harness::cmd_power(&config)?)?;
        }
        Command::Calibrate { n_paths, grid_steps, alphas } => {
            let alphas = alphas.unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
            let table = harness::cmd_calibrate(&config, &alphas, n_paths, grid_steps)?;
            table.write_csv(output(&config)?)?;
        }
        Command::Validate { profile_out } => {
            let outcome = harness::cmd_validate(&config)?;
            if let Some(p) = profile_out {
                let model = config.model_spec()?;
                let flow = solve_flow(&model, config.theta_true, config.grid()?)?;
                build_profile(&model, &flow)?.save(p)?;
            }
            let mut out = output(&config)?;
            for c in &outcome.checks {
                writeln!(out, "{c}")?;
            }
            let r0 = &outcome.r0;
            writeln!(
                out,
                "INFO r0_condition={} phi2_positive_on_open_interval={} phi2_min={:.3e} at r={:.4}",
                r0.r0_holds, r0.phi2_positive, r0.phi2_min, r0.phi2_min_at
            )?;
            return Ok(outcome.all_pass());
        }
        Command::ShowConfig => {
            config.validate()?;
            write!(output(&config)?, "{}", config.to_toml())?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
