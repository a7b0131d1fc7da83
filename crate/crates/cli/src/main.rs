use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use encounter_core::adp::{extract_post_decision_weights, projected_value_iteration, ActionSet, IterationDiagnostics};
use encounter_core::artifact::{write_json, FeatureLayout, RunManifest, WeightsFile, WEIGHTS_FORMAT};
use encounter_core::config::{load_config, RunConfig, Scale};
use encounter_core::eval::{generate_nmac_filtered_set, run_episodes, unfiltered_set, EvalReport, Scenario};
use encounter_core::export::{
    policy_slice, read_scenarios_csv, value_slice, write_diagnostics_jsonl, write_pareto_csv, write_scenarios_csv,
    write_slice_csv, SliceSpec,
};
use encounter_core::pareto::{pareto_sweep, Family, SweepSetup};
use encounter_core::policy::Policy;
use encounter_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "encounter", version, about = "Collision-avoidance policy training and evaluation")]
struct Cli {
    /// Flat key/value configuration file; omitted keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides both the solver and the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = ScaleArg::Desk)]
    scale: ScaleArg,
    #[arg(long, global = true, value_enum, default_value_t = FamilyArg::OptimizedTrl)]
    family: FamilyArg,
    /// Weight of the NMAC penalty.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Separation parameter of the static resolution logic, m.
    #[arg(long, global = true, default_value_t = 300.0)]
    dbar: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Static,
    OptimizedTrl,
    Direct,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Static => Family::Static,
            FamilyArg::OptimizedTrl => Family::OptimizedTrl,
            FamilyArg::Direct => Family::Direct,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run value iteration and write weights.json.
    Train,
    /// Fit post-decision weights into an existing weights.json.
    ExtractPd,
    /// Write the unfiltered and NMAC-filtered scenario sets.
    FilterScenarios,
    /// Evaluate one policy on the scenario sets.
    Evaluate,
    /// Train and evaluate every parameter of a family; writes pareto_<family>.csv.
    Sweep {
        /// Comma-separated parameter list; defaults to the family's standard values.
        #[arg(long, value_delimiter = ',')]
        params: Option<Vec<f64>>,
    },
    /// Value function over own position; writes value_slice.csv.
    SliceValue,
    /// Chosen action over own position; writes policy_slice.csv.
    SlicePolicy,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::ExtractPd => "extract-pd",
            Command::FilterScenarios => "filter-scenarios",
            Command::Evaluate => "evaluate",
            Command::Sweep { .. } => "sweep",
            Command::SliceValue => "slice-value",
            Command::SlicePolicy => "slice-policy",
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::UnknownKey { .. } | Error::InvalidValue { .. } | Error::ConfigParse(_) | Error::Incompatible(_) => {
            EXIT_CONFIG
        }
        Error::SingularSystem { .. } | Error::FilterStarved { .. } | Error::LengthMismatch { .. } | Error::TerminalState => {
            EXIT_NUMERIC
        }
        Error::MissingArtifact { .. } | Error::Malformed { .. } | Error::Io(_) | Error::Json(_) | Error::Csv(_) => {
            EXIT_USAGE
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn resolve_config(cli: &Cli) -> encounter_core::Result<RunConfig> {
    let scale = match cli.scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Paper => Scale::Paper,
    };
    let mut cfg = match &cli.config {
        Some(path) => {
            if !path.exists() {
                return Err(Error::MissingArtifact {
                    path: path.clone(),
                    hint: "configuration file not found".into(),
                });
            }
            load_config(path, scale)?
        }
        None => RunConfig::defaults(scale),
    };
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
        cfg.eval.seed = seed;
    }
    if let Some(lambda) = cli.lambda {
        cfg.scenario.lambda = lambda;
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Paths {
    out: PathBuf,
}

impl Paths {
    fn weights(&self) -> PathBuf {
        self.out.join("weights.json")
    }
    fn unfiltered(&self) -> PathBuf {
        self.out.join("scenarios_unfiltered.csv")
    }
    fn filtered(&self) -> PathBuf {
        self.out.join("scenarios_filtered.csv")
    }
    fn manifest(&self, command: &str) -> PathBuf {
        self.out.join(format!("manifest_{command}.json"))
    }
}

fn run(cli: &Cli) -> encounter_core::Result<()> {
    let cfg = resolve_config(cli)?;
    let paths = Paths { out: cli.out.clone() };
    std::fs::create_dir_all(&paths.out)?;
    let mut manifest = RunManifest::start(cli.command.name(), &cfg);
    let family = Family::from(cli.family);
    let outputs = match &cli.command {
        Command::Train => train(&cfg, family, &paths, &manifest)?,
        Command::ExtractPd => extract_pd(&cfg, &paths, &manifest)?,
        Command::FilterScenarios => filter_scenarios(&cfg, &paths)?,
        Command::Evaluate => evaluate(&cfg, family, cli.dbar, &paths)?,
        Command::Sweep { params } => sweep(&cfg, family, params.as_deref(), &paths)?,
        Command::SliceValue => slice(&cfg, &paths, false)?,
        Command::SlicePolicy => slice(&cfg, &paths, true)?,
    };
    manifest.outputs = outputs;
    manifest.finish();
    manifest.save(&paths.manifest(cli.command.name()))
}

fn progress(d: &IterationDiagnostics) {
    eprintln!(
        "{} {:>3}: residual {:.4e}  |theta| {:.4e}  mean target {:.4e}",
        d.stage, d.iteration, d.residual_rms, d.theta_norm, d.mean_target
    );
}

fn trainable(family: Family) -> encounter_core::Result<()> {
    match family {
        Family::Static => Err(Error::Incompatible("the static family has no weights to train".into())),
        _ => Ok(()),
    }
}

fn train(cfg: &RunConfig, family: Family, paths: &Paths, manifest: &RunManifest) -> encounter_core::Result<Vec<PathBuf>> {
    trainable(family)?;
    let model = cfg.model()?;
    let mut solver = cfg.solver.clone();
    solver.action_set = family.action_set(&model.scenario).expect("trainable family");
    let vi = projected_value_iteration(&model, &model.features, &solver, progress)?;
    let weights = WeightsFile {
        format: WEIGHTS_FORMAT,
        family,
        lambda: model.scenario.lambda,
        action_set: solver.action_set,
        layout: FeatureLayout::of(&model.features),
        theta: vi.theta,
        theta_q: None,
        manifest: manifest.clone(),
    };
    let diag = paths.out.join("diagnostics_train.jsonl");
    write_diagnostics_jsonl(&diag, &vi.diagnostics)?;
    weights.save(&paths.weights())?;
    Ok(vec![paths.weights(), diag])
}

/// The model the weights were trained for: configuration plus the stored `λ`.
fn load_weights(cfg: &RunConfig, paths: &Paths) -> encounter_core::Result<(WeightsFile, RunConfig)> {
    let path = paths.weights();
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path,
            hint: "run `train` first".into(),
        });
    }
    let mut cfg = cfg.clone();
    let model = cfg.model()?;
    let weights = WeightsFile::load_for(&path, &model.features)?;
    cfg.scenario.lambda = weights.lambda;
    cfg.solver.action_set = weights.action_set.clone();
    Ok((weights, cfg))
}

fn extract_pd(cfg: &RunConfig, paths: &Paths, manifest: &RunManifest) -> encounter_core::Result<Vec<PathBuf>> {
    let (mut weights, cfg) = load_weights(cfg, paths)?;
    let model = cfg.model()?;
    let pd = extract_post_decision_weights(&weights.theta, &model, &model.features, &cfg.solver)?;
    pd.diagnostics.iter().for_each(progress);
    weights.theta_q = Some(pd.theta);
    weights.manifest = manifest.clone();
    let diag = paths.out.join("diagnostics_pd.jsonl");
    write_diagnostics_jsonl(&diag, &pd.diagnostics)?;
    weights.save(&paths.weights())?;
    Ok(vec![paths.weights(), diag])
}

fn filter_scenarios(cfg: &RunConfig, paths: &Paths) -> encounter_core::Result<Vec<PathBuf>> {
    let model = cfg.model()?;
    let unfiltered = unfiltered_set(&model, &cfg.eval);
    let filtered = generate_nmac_filtered_set(&model, &cfg.eval)?;
    write_scenarios_csv(&paths.unfiltered(), &unfiltered)?;
    write_scenarios_csv(&paths.filtered(), &filtered)?;
    Ok(vec![paths.unfiltered(), paths.filtered()])
}

fn scenario_sets(paths: &Paths) -> encounter_core::Result<(Vec<Scenario>, Vec<Scenario>)> {
    Ok((read_scenarios_csv(&paths.unfiltered())?, read_scenarios_csv(&paths.filtered())?))
}

fn trained_policy(weights: &WeightsFile) -> encounter_core::Result<Policy> {
    let theta_q = weights.theta_q.clone().ok_or_else(|| Error::MissingArtifact {
        path: PathBuf::from("weights.json"),
        hint: "post-decision weights are missing; run `extract-pd` first".into(),
    })?;
    Ok(match &weights.action_set {
        ActionSet::Separation(ds) => Policy::OptimizedTrl {
            theta_q,
            actions: ds.clone(),
        },
        ActionSet::TurnRate(rs) => Policy::DirectTurn {
            theta_q,
            actions: rs.clone(),
        },
    })
}

fn evaluate(cfg: &RunConfig, family: Family, dbar: f64, paths: &Paths) -> encounter_core::Result<Vec<PathBuf>> {
    let (unfiltered, filtered) = scenario_sets(paths)?;
    let (policy, cfg) = match family {
        Family::Static => (Policy::StaticTrl(dbar), cfg.clone()),
        _ => {
            let (weights, cfg) = load_weights(cfg, paths)?;
            if weights.family != family {
                return Err(Error::Incompatible(format!(
                    "weights.json holds a {} policy, not {}",
                    weights.family.name(),
                    family.name()
                )));
            }
            (trained_policy(&weights)?, cfg)
        }
    };
    let model = cfg.model()?;
    let un = EvalReport::from_episodes(&run_episodes(&policy, &unfiltered, &model)?);
    let fi = EvalReport::from_episodes(&run_episodes(&policy, &filtered, &model)?);
    let path = paths.out.join(format!("eval_{}.json", family.name()));
    write_json(
        &path,
        &json!({
            "policy": policy.name(),
            "param": if family == Family::Static { dbar } else { cfg.scenario.lambda },
            "unfiltered": un,
            "filtered": fi,
            "risk_ratio": fi.nmac_fraction(),
        }),
    )?;
    println!(
        "{}: deviations {}/{}  risk ratio {:.4} ({}/{})",
        policy.name(),
        un.n_deviations,
        un.n_episodes,
        fi.nmac_fraction(),
        fi.n_nmacs,
        fi.n_episodes
    );
    Ok(vec![path])
}

fn sweep(cfg: &RunConfig, family: Family, params: Option<&[f64]>, paths: &Paths) -> encounter_core::Result<Vec<PathBuf>> {
    let mut outputs = Vec::new();
    if !(paths.unfiltered().exists() && paths.filtered().exists()) {
        outputs = filter_scenarios(cfg, paths)?;
    }
    let (unfiltered, filtered) = scenario_sets(paths)?;
    let params = params.map_or_else(|| family.default_params(), <[f64]>::to_vec);
    let setup = SweepSetup {
        scenario: &cfg.scenario,
        features: &cfg.features,
        solver: &cfg.solver,
        unfiltered: &unfiltered,
        filtered: &filtered,
    };
    let points = pareto_sweep(family, &params, &setup, |p| match &p.error {
        None => println!(
            "{} {}: deviations {}  risk ratio {:.4}",
            p.family.name(),
            p.param,
            p.deviations,
            p.risk_ratio
        ),
        Some(e) => eprintln!("{} {}: failed: {e}", p.family.name(), p.param),
    })?;
    let path = paths.out.join(format!("pareto_{}.csv", family.name()));
    write_pareto_csv(&path, &points)?;
    outputs.push(path);
    Ok(outputs)
}

fn slice(cfg: &RunConfig, paths: &Paths, policy: bool) -> encounter_core::Result<Vec<PathBuf>> {
    let (weights, cfg) = load_weights(cfg, paths)?;
    let model = cfg.model()?;
    let spec = SliceSpec {
        region: cfg.solver.sample_box,
        ..SliceSpec::default()
    };
    let (path, rows) = if policy {
        let rows = policy_slice(&trained_policy(&weights)?, &model, &spec)?;
        (paths.out.join("policy_slice.csv"), (rows, "action"))
    } else {
        let rows = value_slice(&weights.theta, &model, &spec)?;
        (paths.out.join("value_slice.csv"), (rows, "value"))
    };
    write_slice_csv(&path, rows.1, &rows.0)?;
    Ok(vec![path])
}
