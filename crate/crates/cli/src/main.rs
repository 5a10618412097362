//! `bnnq`: command-line front end for the verification pipeline.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage error, 3 unusable input
//! files, 4 exact solver refused an instance over its size cap.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use bnn_qubo::bnn::{BinarizedSample, BnnModel, Dataset};
use bnn_qubo::encoder::{build_verification_qubo, EncodeOptions, PenaltyWeight, PerturbationSpec, TieRule};
use bnn_qubo::ir::{coo, qubo_to_ising, QuboInstance};
use bnn_qubo::render::{render_pgm, render_text};
use bnn_qubo::solvers::*;
use bnn_qubo::verifier::{
    enumerate_perturbations, select_perturbable_pixels, verify, SolverChoice, Verdict, VerifyOptions,
};
use bnn_qubo::{Coeff, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "bnnq", version, about = "Robustness verification of binarized networks via QUBO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predict labels for dataset samples.
    Infer(InferArgs),
    /// Write the verification QUBO of one sample with its variable map.
    Encode(EncodeArgs),
    /// Minimize a QUBO read from a coordinate file.
    Solve(SolveArgs),
    /// Encode, solve, decode and check one or more samples.
    Verify(VerifyArgs),
    /// Enumerate perturbation masks for ground truth on small pixel sets.
    Oracle(OracleArgs),
    /// Draw the original and perturbed input of a verification report.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Model weight file (JSON).
    #[arg(long)]
    model: PathBuf,
    /// IDX image file.
    #[arg(long)]
    images: PathBuf,
    /// IDX label file.
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Args, Clone)]
struct QueryArgs {
    /// Number of perturbable pixels.
    #[arg(long)]
    pmax: usize,
    /// Maximum number of flipped pixels.
    #[arg(long)]
    eps: usize,
    /// Penalty weight: `dominant` (budget + 1) or a number applied to every constraint.
    #[arg(long, default_value = "dominant")]
    penalty: String,
    /// How an exact score tie with the true class is counted.
    #[arg(long, value_enum, default_value_t = TieArg::MatchClassifier)]
    tie: TieArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    MatchClassifier,
    Adversarial,
    NotAdversarial,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverKind {
    /// Exhaustive enumeration, exact elimination above the enumeration cap.
    Brute,
    Sa,
    Fem,
}

#[derive(Clone, Copy, ValueEnum)]
enum GradientArg {
    FreeEnergy,
    Printed,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = SolverKind::Sa)]
    solver: SolverKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    restarts: Option<usize>,
    /// Annealing sweeps per restart.
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    beta_initial: Option<f64>,
    #[arg(long)]
    beta_final: Option<f64>,
    /// FEM iterations per restart.
    #[arg(long)]
    n_step: Option<usize>,
    #[arg(long)]
    t_init: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum)]
    fem_gradient: Option<GradientArg>,
    /// Run the FEM temperature schedule as printed (heating) instead of cooling.
    #[arg(long)]
    printed_schedule: bool,
    /// FEM grid search axes (comma separated); any non-empty axis enables the search.
    #[arg(long, value_delimiter = ',')]
    grid_eta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    grid_t_init: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    grid_t_final: Vec<f64>,
    /// Largest variable count for exhaustive enumeration.
    #[arg(long, default_value_t = BRUTE_FORCE_CAP)]
    cap: usize,
    /// Largest induced width for exact elimination.
    #[arg(long, default_value_t = ELIMINATION_WIDTH_CAP)]
    width_cap: usize,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Only this sample.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long)]
    sample: usize,
    /// Directory for `instance.qubo` and `instance.map.json`.
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write `instance.ising` (same grammar, header `p ising`).
    #[arg(long)]
    export_ising: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// QUBO coordinate file.
    #[arg(long)]
    qubo: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    query: QueryArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Sample index.
    #[arg(long, conflicts_with = "batch", required_unless_present = "batch")]
    sample: Option<usize>,
    /// Inclusive sample range `START-END`; each sample gets its own report.
    #[arg(long)]
    batch: Option<String>,
    /// Worker threads for `--batch`.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Record wall time in the reports (makes reruns differ).
    #[arg(long)]
    timings: bool,
    /// Directory receiving `report-<sample>.json`.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    pmax: usize,
    #[arg(long)]
    eps: usize,
    #[arg(long)]
    sample: usize,
    /// Largest perturbable pixel count to enumerate.
    #[arg(long, default_value_t = BRUTE_FORCE_CAP)]
    cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Pgm,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Verification report JSON.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Pixel block size for PGM output.
    #[arg(long, default_value_t = 8)]
    scale: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(Error::TooLarge { .. }) => 4,
            Some(
                Error::Io(_)
                | Error::Json(_)
                | Error::Format(_)
                | Error::InvalidModel(_)
                | Error::Dimension { .. }
                | Error::InvalidSpec(_)
                | Error::CleanPredictionWrong { .. },
            ) => 3,
            Some(Error::InvalidParams(_) | Error::EmptyGrid) => 2,
            _ => 1,
        };
        Failure { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn bad_input(msg: String) -> Failure {
    Failure {
        code: 3,
        error: anyhow::anyhow!(msg),
    }
}

fn usage(msg: String) -> Failure {
    Failure {
        code: 2,
        error: anyhow::anyhow!(msg),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn require_files(paths: &[&Path]) -> CliResult<()> {
    for p in paths {
        if !p.is_file() {
            return Err(bad_input(format!("{}: no such file", p.display())));
        }
    }
    Ok(())
}

fn prepare_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(|error| Failure { code: 3, error })
}

fn write_out(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(|error| Failure { code: 3, error }),
        None => {
            use std::io::Write;
            // a closed pipe (`bnnq infer | head`) is not an error
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

impl DataArgs {
    fn paths(&self) -> [&Path; 3] {
        [&self.model, &self.images, &self.labels]
    }

    fn load(&self) -> CliResult<(BnnModel, Dataset)> {
        require_files(&self.paths())?;
        let model = BnnModel::load(&self.model).with_context(|| format!("loading {}", self.model.display()))?;
        let data = Dataset::load_idx(&self.images, &self.labels, model.binarization_threshold())
            .with_context(|| format!("loading {}", self.images.display()))?;
        if data.input_width() != Some(model.input_width()) {
            return Err(bad_input(format!(
                "dataset width {:?} does not match model input width {}",
                data.input_width(),
                model.input_width()
            )));
        }
        Ok((model, data))
    }

    fn echo(&self) -> Value {
        json!({
            "model": self.model.display().to_string(),
            "images": self.images.display().to_string(),
            "labels": self.labels.display().to_string(),
        })
    }
}

fn sample_at(data: &Dataset, index: usize) -> CliResult<&BinarizedSample> {
    data.samples
        .get(index)
        .ok_or_else(|| bad_input(format!("sample {index} out of range (dataset has {})", data.len())))
}

impl QueryArgs {
    fn options(&self) -> CliResult<EncodeOptions> {
        let penalty_weight = if self.penalty == "dominant" {
            PenaltyWeight::Dominant
        } else {
            let w = coo::parse_coeff(&self.penalty).map_err(|_| usage(format!("bad --penalty {:?}", self.penalty)))?;
            if w <= Coeff::from_integer(0) {
                return Err(usage("--penalty must be positive".into()));
            }
            PenaltyWeight::Uniform(w)
        };
        let tie_rule = match self.tie {
            TieArg::MatchClassifier => TieRule::MatchClassifier,
            TieArg::Adversarial => TieRule::Adversarial,
            TieArg::NotAdversarial => TieRule::NotAdversarial,
        };
        Ok(EncodeOptions {
            penalty_weight,
            tie_rule,
        })
    }

    fn spec(&self, model: &BnnModel, data: &Dataset) -> CliResult<PerturbationSpec> {
        let pixels = select_perturbable_pixels(model, &data.samples, self.pmax)?;
        Ok(PerturbationSpec::new(pixels, self.eps)?)
    }

    fn echo(&self) -> Value {
        json!({ "pmax": self.pmax, "eps": self.eps, "penalty": self.penalty, "tie": tie_name(self.tie) })
    }
}

fn tie_name(t: TieArg) -> &'static str {
    match t {
        TieArg::MatchClassifier => "match-classifier",
        TieArg::Adversarial => "adversarial",
        TieArg::NotAdversarial => "not-adversarial",
    }
}

impl SolverArgs {
    fn sa(&self) -> SaParams {
        let d = SaParams::default();
        SaParams {
            seed: self.seed,
            restarts: self.restarts.unwrap_or(d.restarts),
            sweeps: self.sweeps.unwrap_or(d.sweeps),
            beta_initial: self.beta_initial.unwrap_or(d.beta_initial),
            beta_final: self.beta_final.unwrap_or(d.beta_final),
            ..d
        }
    }

    fn fem(&self) -> FemParams {
        let d = FemParams::default();
        FemParams {
            seed: self.seed,
            restarts: self.restarts.unwrap_or(d.restarts),
            n_step: self.n_step.unwrap_or(d.n_step),
            t_init: self.t_init.unwrap_or(d.t_init),
            t_final: self.t_final.unwrap_or(d.t_final),
            eta: self.eta.unwrap_or(d.eta),
            order: if self.printed_schedule {
                TemperatureOrder::Printed
            } else {
                TemperatureOrder::Cooling
            },
            gradient: match self.fem_gradient {
                Some(GradientArg::Printed) => FemGradient::Printed,
                Some(GradientArg::FreeEnergy) => FemGradient::FreeEnergy,
                None => d.gradient,
            },
            ..d
        }
    }

    fn grid(&self) -> Option<FemGrid> {
        let grid = FemGrid {
            eta: self.grid_eta.clone(),
            t_init: self.grid_t_init.clone(),
            t_final: self.grid_t_final.clone(),
        };
        (!grid.eta.is_empty() || !grid.t_init.is_empty() || !grid.t_final.is_empty()).then_some(grid)
    }

    fn choice(&self) -> CliResult<SolverChoice> {
        if self.grid().is_some() && self.solver != SolverKind::Fem {
            return Err(usage("grid search axes need --solver fem".into()));
        }
        let choice = match self.solver {
            SolverKind::Brute => SolverChoice::Exact {
                cap: self.cap,
                width_cap: self.width_cap,
            },
            SolverKind::Sa => {
                let p = self.sa();
                p.validate().map_err(|e| usage(e.to_string()))?;
                SolverChoice::Annealing(p)
            }
            SolverKind::Fem => {
                let p = self.fem();
                p.validate().map_err(|e| usage(e.to_string()))?;
                match self.grid() {
                    Some(g) => SolverChoice::FemSearch(p, g),
                    None => SolverChoice::Fem(p),
                }
            }
        };
        Ok(choice)
    }
}

fn infer(args: InferArgs) -> CliResult<()> {
    let (model, data) = args.data.load()?;
    let indices: Vec<usize> = match args.sample {
        Some(i) => {
            sample_at(&data, i)?;
            vec![i]
        }
        None => (0..data.len()).collect(),
    };
    let mut correct = 0;
    let mut predictions = Vec::new();
    for &i in &indices {
        let s = &data.samples[i];
        let predicted = model.predict(&s.input)?;
        correct += (predicted == s.label) as usize;
        predictions.push(json!({ "sample": i, "label": s.label, "predicted": predicted }));
    }
    let out = json!({
        "config": { "data": args.data.echo(), "sample": args.sample },
        "model_fingerprint": model.fingerprint(),
        "accuracy": correct as f64 / indices.len().max(1) as f64,
        "predictions": predictions,
    });
    write_out(args.out.as_deref(), &pretty(&out))
}

fn encode(args: EncodeArgs) -> CliResult<()> {
    require_files(&args.data.paths())?;
    prepare_dir(&args.out_dir)?;
    let (model, data) = args.data.load()?;
    let options = args.query.options()?;
    let sample = sample_at(&data, args.sample)?;
    let spec = args.query.spec(&model, &data)?;
    let mut inst = build_verification_qubo(&model, sample, &spec, options)?;
    inst.meta.sample_id = Some(args.sample);

    let header = format!(
        "c bnnq encode sample {} pmax {} eps {}\nc vars {} constraints {}\n",
        args.sample, args.query.pmax, args.query.eps, inst.meta.num_vars, inst.meta.num_constraints
    );
    write_out(
        Some(&args.out_dir.join("instance.qubo")),
        &(header.clone() + &coo::write_qubo(&inst.qubo)),
    )?;
    if args.export_ising {
        let ising = qubo_to_ising(&inst.qubo);
        write_out(Some(&args.out_dir.join("instance.ising")), &(header + &coo::write_ising(&ising)))?;
    }
    let mut map = serde_json::to_value(inst.variable_map()).map_err(Error::from)?;
    map["config"] = json!({ "data": args.data.echo(), "query": args.query.echo(), "sample": args.sample });
    write_out(Some(&args.out_dir.join("instance.map.json")), &pretty(&map))?;
    log::info!("encoded {} vars, {} constraints", inst.meta.num_vars, inst.meta.num_constraints);
    Ok(())
}

fn solve(args: SolveArgs) -> CliResult<()> {
    require_files(&[&args.qubo])?;
    let choice = args.solver.choice()?;
    let text = fs::read_to_string(&args.qubo).map_err(Error::from)?;
    let q: QuboInstance = coo::read_qubo(&text)?;
    let (result, params) = match &choice {
        SolverChoice::Exact { cap, width_cap } => {
            let r = if q.num_vars() <= *cap {
                brute_force(&q, *cap)?
            } else {
                exact_minimize(&q, *width_cap)?
            };
            (r, json!({ "cap": cap, "width_cap": width_cap }))
        }
        SolverChoice::Annealing(p) => (simulated_annealing(&q, p)?, json!(p)),
        SolverChoice::Fem(p) => (fem_solve(&q, p)?, json!(p)),
        SolverChoice::FemSearch(base, grid) => {
            let (p, r) = hyperparameter_search(&q, base, grid)?;
            (r, json!({ "selected": p, "grid": grid }))
        }
    };
    let out = json!({
        "config": { "qubo": args.qubo.display().to_string(), "seed": args.solver.seed, "params": params },
        "result": result,
    });
    write_out(args.out.as_deref(), &pretty(&out))
}

fn parse_batch(s: &str) -> CliResult<Vec<usize>> {
    let bad = || usage(format!("bad --batch {s:?}, expected START-END"));
    let (a, b) = s.split_once('-').ok_or_else(bad)?;
    let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn verify_cmd(args: VerifyArgs) -> CliResult<()> {
    require_files(&args.data.paths())?;
    let ids = match (&args.batch, args.sample) {
        (Some(b), _) => parse_batch(b)?,
        (None, Some(i)) => vec![i],
        (None, None) => unreachable!("clap requires --sample or --batch"),
    };
    let solver = args.solver.choice()?;
    let encode = args.query.options()?;
    prepare_dir(&args.out_dir)?;
    let (model, data) = args.data.load()?;
    for &i in &ids {
        sample_at(&data, i)?;
    }
    let spec = args.query.spec(&model, &data)?;

    let run_one = |i: usize| -> CliResult<(usize, Verdict)> {
        let options = VerifyOptions {
            encode,
            solver: solver.clone(),
            sample_id: Some(i),
            timings: args.timings,
        };
        let report = verify(&model, &data.samples[i], &spec, &options).map_err(|e| {
            let f = Failure::from(e);
            Failure {
                code: f.code,
                error: f.error.context(format!("sample {i}")),
            }
        })?;
        write_out(Some(&args.out_dir.join(format!("report-{i}.json"))), &report.to_json())?;
        Ok((i, report.verdict))
    };
    let results: Vec<CliResult<(usize, Verdict)>> = if ids.len() > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs.max(1))
            .build()
            .context("building worker pool")?;
        pool.install(|| ids.par_iter().map(|&i| run_one(i)).collect())
    } else {
        ids.iter().map(|&i| run_one(i)).collect()
    };
    let mut first_error = None;
    for r in results {
        match r {
            Ok((i, verdict)) => println!("sample {i}: {}", verdict_name(&verdict)),
            Err(e) if first_error.is_none() => first_error = Some(e),
            Err(e) => eprintln!("error: {:#}", e.error),
        }
    }
    first_error.map_or(Ok(()), Err)
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::NonRobust { .. } => "non_robust",
        Verdict::Unresolved => "unresolved",
        Verdict::RobustWithinModel { .. } => "robust_within_model",
    }
}

fn oracle(args: OracleArgs) -> CliResult<()> {
    let (model, data) = args.data.load()?;
    let sample = sample_at(&data, args.sample)?;
    let pixels = select_perturbable_pixels(&model, &data.samples, args.pmax)?;
    let spec = PerturbationSpec::new(pixels, args.eps)?;
    let predicted = model.predict(&sample.input)?;
    if predicted != sample.label {
        return Err(Error::CleanPredictionWrong {
            predicted,
            label: sample.label,
        }
        .into());
    }
    let r = enumerate_perturbations(&model, &sample.input, &spec, args.cap)?;
    let verdict = if r.witness.is_some() { "non_robust" } else { "robust" };
    let out = json!({
        "config": { "data": args.data.echo(), "pmax": args.pmax, "eps": args.eps, "sample": args.sample, "cap": args.cap },
        "verdict": verdict,
        "min_flips": r.min_flips(),
        "result": r,
    });
    write_out(args.out.as_deref(), &pretty(&out))
}

fn report(args: ReportArgs) -> CliResult<()> {
    require_files(&[&args.report])?;
    let (model, data) = args.data.load()?;
    let text = fs::read_to_string(&args.report).map_err(Error::from)?;
    let v: Value = serde_json::from_str(&text).map_err(Error::from)?;
    let id = v["sample_id"]
        .as_u64()
        .ok_or_else(|| bad_input(format!("{}: report has no sample_id", args.report.display())))? as usize;
    let sample = sample_at(&data, id)?;
    let geometry = model
        .geometry()
        .ok_or_else(|| bad_input("model has no input geometry to draw".into()))?;
    let mut mask = vec![0u8; model.input_width()];
    let mut new_label = v["clean_label"].as_u64().unwrap_or(sample.label as u64) as usize;
    if v["verdict"]["kind"] == "non_robust" {
        let runs = v["verdict"]["flipped"]
            .as_array()
            .ok_or_else(|| bad_input("report verdict lacks flipped ranges".into()))?;
        for run in runs {
            let (start, len) = (run[0].as_u64(), run[1].as_u64());
            let (Some(start), Some(len)) = (start, len) else {
                return Err(bad_input(format!("bad flipped range {run}")));
            };
            let range = start as usize..(start + len) as usize;
            if range.end > mask.len() {
                return Err(bad_input(format!("flipped range {run} exceeds input width")));
            }
            mask[range].fill(1);
        }
        new_label = v["verdict"]["new_label"].as_u64().unwrap_or(0) as usize;
    }
    let drawing = match args.format {
        Format::Text => render_text(geometry, &sample.input, &mask, sample.label, new_label)?,
        Format::Pgm => render_pgm(geometry, &sample.input, &mask, args.scale)?,
    };
    write_out(args.out.as_deref(), &drawing)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Infer(a) => infer(a),
        Command::Encode(a) => encode(a),
        Command::Solve(a) => solve(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Oracle(a) => oracle(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
