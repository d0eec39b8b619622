use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coldstart::config::{parse_count, ConfigError, RunConfig};
use coldstart::game_model::{self, RequesterStrategy, ResponderStrategy};
use coldstart::oracle::{self, McResult};
use coldstart::plot;
use coldstart::sim_engine::{self, MetricsSeries, SimError, Simulation};
use coldstart::trust_ledger;

#[derive(Parser)]
#[command(name = "coldstart", version)]
#[command(about = "Calibrate, simulate and validate the volunteer trust-credit mechanism")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the penalty bounds, recommended K and threshold, and the game matrix
    Analyze {
        /// Each truthful peer holds 1/n of the catalog
        #[arg(long)]
        n: u32,
        /// Number of responders per query
        #[arg(long)]
        j: u32,
        /// Probability of selecting by trust
        #[arg(long)]
        p: f64,
        /// Acceptable probability that a liar reaches the threshold
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
    },
    /// Run a simulation from a config file and write the metrics CSV
    Simulate(SimulateArgs),
    /// Compare a Monte-Carlo estimate with its closed form
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Render a metrics CSV as an SVG line chart
    Plot {
        csv: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = "Average trust value of peers")]
        title: String,
    },
}

/// Every flag overrides the config key of the same name.
#[derive(Args)]
struct SimulateArgs {
    config: PathBuf,
    #[arg(long)]
    good: Option<String>,
    #[arg(long)]
    bad: Option<String>,
    #[arg(long)]
    liar: Option<String>,
    /// cycle:count:behavior[,...]
    #[arg(long)]
    newcomers: Option<String>,
    #[arg(long)]
    catalog_size: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    k: Option<String>,
    /// Target volunteers per query (reach and default K)
    #[arg(long)]
    j: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    floor: Option<String>,
    #[arg(long)]
    queries_per_cycle: Option<String>,
    #[arg(long)]
    reach: Option<String>,
    #[arg(long)]
    total_cycles: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Comma-separated seeds; one CSV per seed
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    profit: Option<String>,
    #[arg(long)]
    cost: Option<String>,
    #[arg(long)]
    acquire_on_success: Option<String>,
    #[arg(long)]
    output: Option<String>,
    /// Round-level trust event CSV
    #[arg(long)]
    trace: Option<String>,
    /// Also render the chart to this SVG path
    #[arg(long)]
    plot: Option<String>,
}

impl SimulateArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        [
            ("good", &self.good),
            ("bad", &self.bad),
            ("liar", &self.liar),
            ("newcomers", &self.newcomers),
            ("catalog_size", &self.catalog_size),
            ("n", &self.n),
            ("p", &self.p),
            ("k", &self.k),
            ("j", &self.j),
            ("threshold", &self.threshold),
            ("floor", &self.floor),
            ("queries_per_cycle", &self.queries_per_cycle),
            ("reach", &self.reach),
            ("total_cycles", &self.total_cycles),
            ("seed", &self.seed),
            ("seeds", &self.seeds),
            ("profit", &self.profit),
            ("cost", &self.cost),
            ("acquire_on_success", &self.acquire_on_success),
            ("output", &self.output),
            ("trace", &self.trace),
            ("plot", &self.plot),
        ]
        .into_iter()
        .filter_map(|(key, value)| value.clone().map(|v| (key, v)))
        .collect()
    }
}

fn count_arg(raw: &str) -> Result<u64, String> {
    parse_count(raw)
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Mean per-round payoff of a persistent liar
    LiarPayoff {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        j: u32,
        #[arg(long, value_parser = count_arg, default_value = "1000000")]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also append the record to this CSV file
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Frequency of t consecutive credits before the first penalty
    Escape {
        #[arg(long)]
        j: u32,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        t: u32,
        #[arg(long, value_parser = count_arg, default_value = "100000")]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

enum Failure {
    /// Oracle disagreed with the closed form.
    Check,
    Usage(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

fn io_failure(path: &Path, err: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {err}", path.display()))
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(format!("config error: {e}"))
    }
}

fn analyze(n: u32, j: u32, p: f64, epsilon: f64) -> Result<(), Failure> {
    let r = game_model::calibrate(n, j, p, epsilon).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "n={} j={} p={} epsilon={}", r.n, r.j, r.p, r.epsilon);
    let _ = writeln!(out, "k_min_dominance={}", r.k_min_dominance);
    let _ = writeln!(out, "k_min_descending={}", r.k_min_descending);
    let _ = writeln!(out, "recommended_k={}", r.recommended_k);
    let _ = writeln!(out, "z_at_recommended_k={}", r.z_at_recommended_k);
    let _ = writeln!(out, "liar_per_round_at_recommended_k={}", r.liar_per_round_at_recommended_k);
    let _ = writeln!(out, "recommended_threshold={}", r.threshold);
    let _ = writeln!(out, "matrix (u1 = requester, u-1 = responder):");
    for row in RequesterStrategy::ALL {
        for col in ResponderStrategy::ALL {
            let c = r.matrix.cell(row, col);
            let _ = writeln!(
                out,
                "cell({},{}) u1={} u-1={}",
                row.label(),
                col.label(),
                c.requester,
                c.responder
            );
        }
    }
    let _ = write!(out, "{}", r.matrix);
    Ok(())
}

fn write_file(path: &Path, write: impl FnOnce(fs::File) -> Result<(), SimError>) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_failure(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| io_failure(path, e))?;
    write(file).map_err(|e| io_failure(path, e))
}

fn fmt_avg(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into())
}

fn summarize(seed: u64, path: &Path, series: &MetricsSeries) {
    if let Some(last) = series.rows.last() {
        println!(
            "seed={seed} cycles={} csv={} good={} bad={} liar={} newcomer_good={} success_rate={}",
            series.len(),
            path.display(),
            fmt_avg(last.avg_trust_good),
            fmt_avg(last.avg_trust_bad),
            fmt_avg(last.avg_trust_liar),
            fmt_avg(last.avg_trust_newcomer_good),
            fmt_avg(last.success_rate),
        );
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_failure(&args.config, e))?;
    let run = RunConfig::parse_with_overrides(&text, args.overrides())?;
    let sim_failure = |e: SimError| match e {
        SimError::InvalidConfig { .. } => Failure::Usage(format!("config error: {e}")),
        other => Failure::Io(other.to_string()),
    };

    if !run.seeds.is_empty() {
        let all = sim_engine::run_replicates(&run.sim, &run.seeds).map_err(sim_failure)?;
        for (&seed, series) in run.seeds.iter().zip(&all) {
            let path = run.output_for_seed(seed);
            write_file(&path, |f| series.write_csv(f))?;
            summarize(seed, &path, series);
        }
        return Ok(());
    }

    let mut sim = if run.trace.is_some() {
        Simulation::with_trace(run.sim.clone())
    } else {
        Simulation::new(run.sim.clone())
    }
    .map_err(sim_failure)?;
    let series = sim.run().map_err(sim_failure)?;
    write_file(&run.output, |f| series.write_csv(f))?;
    if let Some(trace) = &run.trace {
        let events = sim.take_events();
        write_file(trace, |f| trust_ledger::write_events_csv(&events, f).map_err(SimError::from))?;
    }
    if let Some(svg) = &run.plot {
        let chart = plot::render_svg(&series, "Average trust value of peers");
        fs::write(svg, chart).map_err(|e| io_failure(svg, e))?;
    }
    summarize(run.sim.seed, &run.output, &series);
    Ok(())
}

fn report_oracle(name: &str, params: &str, closed: f64, mc: &McResult, csv: Option<&Path>) -> Result<(), Failure> {
    let pass = mc.agrees_with(closed);
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!(
        "oracle={name} {params} trials={} closed_form={closed} mc_mean={} std_error={} z={:.3} result={verdict}",
        mc.trials,
        mc.mean,
        mc.std_error,
        mc.z_score(closed)
    );
    if let Some(path) = csv {
        let fresh = !path.exists();
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| io_failure(path, e))?;
        let mut text = String::new();
        if fresh {
            text.push_str("oracle,params,trials,closed_form,mc_mean,std_error,result\n");
        }
        text.push_str(&format!(
            "{name},{params},{},{closed:.6},{:.6},{:.6},{verdict}\n",
            mc.trials, mc.mean, mc.std_error
        ));
        file.write_all(text.as_bytes()).map_err(|e| io_failure(path, e))?;
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn run_oracle(cmd: &OracleCommand) -> Result<(), Failure> {
    let usage = |e: &dyn std::fmt::Display| Failure::Usage(e.to_string());
    match cmd {
        OracleCommand::LiarPayoff {
            p,
            k,
            j,
            trials,
            seed,
            csv,
        } => {
            let closed = game_model::expected_liar_per_round(*p, *k, *j).map_err(|e| usage(&e))?;
            let mc = oracle::mc_liar_payoff(*p, *k, *j, *trials, *seed).map_err(|e| usage(&e))?;
            report_oracle("liar-payoff", &format!("p={p} k={k} j={j} seed={seed}"), closed, &mc, csv.as_deref())
        }
        OracleCommand::Escape {
            j,
            p,
            t,
            trials,
            seed,
            csv,
        } => {
            let closed = game_model::escape_probability(*j, *p, *t).map_err(|e| usage(&e))?;
            let mc = oracle::mc_escape_frequency(*j, *p, *t, *trials, *seed).map_err(|e| usage(&e))?;
            report_oracle("escape", &format!("j={j} p={p} t={t} seed={seed}"), closed, &mc, csv.as_deref())
        }
    }
}

fn run_plot(csv: &Path, output: &Path, title: &str) -> Result<(), Failure> {
    let file = fs::File::open(csv).map_err(|e| io_failure(csv, e))?;
    let series = MetricsSeries::read_csv(file).map_err(|e| match e {
        SimError::Io(io) => io_failure(csv, io),
        other => Failure::Usage(format!("{}: {other}", csv.display())),
    })?;
    fs::write(output, plot::render_svg(&series, title)).map_err(|e| io_failure(output, e))?;
    println!("wrote {}", output.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze { n, j, p, epsilon } => analyze(*n, *j, *p, *epsilon),
        Command::Simulate(args) => simulate(args),
        Command::Oracle(cmd) => run_oracle(cmd),
        Command::Plot { csv, output, title } => run_plot(csv, output, title),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Check => {}
                Failure::Usage(msg) | Failure::Io(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(failure.code())
        }
    }
}
