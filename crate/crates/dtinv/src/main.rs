//! Command-line front end.
//!
//! Exit codes: 0 verified (or artifact written), 1 candidate refuted,
//! 2 program unsafe, 3 any error.

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dtinv::dtlearn::SplitCriterion;
use dtinv::features::{
    collect_literals, constant_slopes, extended_meta, octagon_slopes, pca_slopes, AugmentTerm,
    SlopeMatrix,
};
use dtinv::formula::{parse_formula, resolve, simplify, Formula};
use dtinv::io::{formula_from_json, formula_to_json, tree_to_json, FormulaJson};
use dtinv::pipeline::{
    detect_mod_terms, infer_invariant, AugmentPolicy, InferOutcome, PipelineConfig, SlopeDomain,
    VerifyMode,
};
use dtinv::program::{parse, TransitionSystem};
use dtinv::sampler::{sample, SampleOutcome, SampleSet, SamplerBounds, SamplerConfig};
use dtinv::suite::{render_csv, render_table, run_suite, SuiteConfig};
use dtinv::verifier::{check_bounded, emit_smt, Verdict};

#[derive(Parser)]
#[command(
    name = "dtinv",
    version,
    about = "Infers safe inductive loop invariants by decision-tree learning"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample good and bad states from a program.
    Sample(SampleArgs),
    /// Build a slope matrix for a program.
    Slopes(SlopesArgs),
    /// Learn a decision tree from a sample and slope matrix.
    Learn(LearnArgs),
    /// Check a candidate invariant against a program.
    Verify(VerifyArgs),
    /// Run the whole pipeline on one program.
    Infer(InferArgs),
    /// Print PAC sample-size bounds for the tree hypothesis class.
    PacBound(PacBoundArgs),
    /// Run a directory of benchmark programs.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SamplerOpts {
    /// Box radius for a single sampling round (replaces the schedule).
    #[arg(long = "L", value_name = "RADIUS")]
    box_radius: Option<i64>,
    /// Loop-iteration budget for a single sampling round.
    #[arg(long = "I", value_name = "ITERS")]
    iterations: Option<u32>,
    /// Perturbation margin for a single sampling round.
    #[arg(long = "M", value_name = "MARGIN")]
    margin: Option<i64>,
    /// Cap on the total number of labeled states.
    #[arg(long, default_value_t = 100_000)]
    max_states: usize,
    /// Recorded in reports for reproducibility.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SamplerOpts {
    fn to_config(&self) -> SamplerConfig {
        let mut cfg = SamplerConfig {
            max_states: self.max_states,
            seed: self.seed,
            ..Default::default()
        };
        if self.box_radius.is_some() || self.iterations.is_some() || self.margin.is_some() {
            cfg.schedule = vec![SamplerBounds::new(
                self.box_radius.unwrap_or(32),
                self.iterations.unwrap_or(256),
                self.margin.unwrap_or(2),
            )];
        }
        cfg
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DomainOpt {
    Octagon,
    Constants,
    Pca,
}

#[derive(Args)]
struct DomainOpts {
    /// Slope family.
    #[arg(long, value_enum, default_value_t = DomainOpt::Octagon)]
    domain: DomainOpt,
    /// Principal components to keep with --domain pca.
    #[arg(long, default_value_t = 2)]
    components: usize,
    /// Extra feature column: square:VAR, prod:VAR:VAR, or mod:VAR:K.
    #[arg(long = "augment", value_name = "TERM")]
    augment: Vec<String>,
    /// Do not derive mod columns from the program text.
    #[arg(long)]
    no_auto_augment: bool,
}

impl DomainOpts {
    fn slope_domain(&self) -> SlopeDomain {
        match self.domain {
            DomainOpt::Octagon => SlopeDomain::Octagon,
            DomainOpt::Constants => SlopeDomain::Constants,
            DomainOpt::Pca => SlopeDomain::Pca { components: self.components },
        }
    }

    fn augment_policy(&self) -> Result<AugmentPolicy, Box<dyn Error>> {
        if !self.augment.is_empty() {
            let terms = self
                .augment
                .iter()
                .map(|s| s.parse::<AugmentTerm>())
                .collect::<Result<Vec<_>, _>>()?;
            Ok(AugmentPolicy::Explicit(terms))
        } else if self.no_auto_augment {
            Ok(AugmentPolicy::None)
        } else {
            Ok(AugmentPolicy::Auto)
        }
    }

    fn augment_terms(&self, ts: &TransitionSystem) -> Result<Vec<AugmentTerm>, Box<dyn Error>> {
        Ok(match self.augment_policy()? {
            AugmentPolicy::Auto => detect_mod_terms(ts),
            AugmentPolicy::None => Vec::new(),
            AugmentPolicy::Explicit(terms) => terms,
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CriterionOpt {
    Gini,
    Entropy,
}

impl From<CriterionOpt> for SplitCriterion {
    fn from(c: CriterionOpt) -> Self {
        match c {
            CriterionOpt::Gini => SplitCriterion::Gini,
            CriterionOpt::Entropy => SplitCriterion::Entropy,
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    /// Program file.
    file: PathBuf,
    #[command(flatten)]
    sampler: SamplerOpts,
    /// Write the sample JSON here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SlopesArgs {
    /// Program file.
    file: PathBuf,
    #[command(flatten)]
    domain: DomainOpts,
    /// Sample JSON, required for --domain pca.
    #[arg(long)]
    sample: Option<PathBuf>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    /// Sample JSON produced by `sample`.
    #[arg(long)]
    sample: PathBuf,
    /// Slope matrix JSON produced by `slopes`.
    #[arg(long)]
    slopes: PathBuf,
    #[arg(long, value_enum, default_value_t = CriterionOpt::Gini)]
    criterion: CriterionOpt,
    /// Tree node budget.
    #[arg(long, default_value_t = 63)]
    max_nodes: usize,
    /// Output the simplified formula JSON instead of the tree JSON.
    #[arg(long)]
    to_formula: bool,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Program file.
    file: PathBuf,
    /// Candidate invariant as text, e.g. "x + y != 0".
    #[arg(long, conflicts_with = "formula_json")]
    formula: Option<String>,
    /// Candidate invariant as formula JSON.
    #[arg(long)]
    formula_json: Option<PathBuf>,
    /// Box radius for bounded checking.
    #[arg(long, default_value_t = 50)]
    bound: i64,
    /// Write SMT-LIB2 conditions here instead of checking.
    #[arg(long, value_name = "PATH")]
    emit_smt: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    /// Program file.
    file: PathBuf,
    #[command(flatten)]
    sampler: SamplerOpts,
    #[command(flatten)]
    domain: DomainOpts,
    #[arg(long, value_enum, default_value_t = CriterionOpt::Gini)]
    criterion: CriterionOpt,
    /// Tree node budget.
    #[arg(long, default_value_t = 63)]
    max_nodes: usize,
    /// Box radius for bounded checking.
    #[arg(long, default_value_t = 50)]
    bound: i64,
    /// Write SMT-LIB2 conditions here instead of checking.
    #[arg(long, value_name = "PATH")]
    emit_smt: Option<PathBuf>,
    /// Print the run report as JSON on stdout.
    #[arg(long)]
    report_json: bool,
}

#[derive(Args)]
struct PacBoundArgs {
    /// Admissible error rate.
    #[arg(long)]
    epsilon: f64,
    /// Admissible failure probability.
    #[arg(long)]
    delta: f64,
    /// Tree node budget.
    #[arg(long, default_value_t = 63)]
    max_nodes: usize,
    /// Number of features.
    #[arg(long)]
    dim: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of .inv programs.
    dir: PathBuf,
    /// Per-benchmark timeout in seconds.
    #[arg(long, default_value_t = 300)]
    timeout_secs: u64,
    /// Per-benchmark address-space limit in megabytes.
    #[arg(long, default_value_t = 8192)]
    memory_mb: u64,
    /// Also write the results as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn write_out(path: Option<&Path>, content: &str) -> Result<(), Box<dyn Error>> {
    match path {
        Some(p) => fs::write(p, content)?,
        None => println!("{content}"),
    }
    Ok(())
}

fn load_program(path: &Path) -> Result<TransitionSystem, Box<dyn Error>> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("reading {}: {e}", path.display()))?;
    Ok(parse(&text)?)
}

fn program_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn run_sample(a: &SampleArgs) -> Result<u8, Box<dyn Error>> {
    let ts = load_program(&a.file)?;
    match sample(&ts, &a.sampler.to_config())? {
        SampleOutcome::Labeled(set) => {
            write_out(a.out.as_deref(), &serde_json::to_string_pretty(&set)?)?;
            Ok(0)
        }
        SampleOutcome::Unsafe { witness } => {
            eprintln!("unsafe: failing state {witness} is reachable");
            Ok(2)
        }
    }
}

fn run_slopes(a: &SlopesArgs) -> Result<u8, Box<dyn Error>> {
    let ts = load_program(&a.file)?;
    let terms = a.domain.augment_terms(&ts)?;
    let meta = extended_meta(&ts.vars, &terms)?;
    let h = match a.domain.slope_domain() {
        SlopeDomain::Octagon => octagon_slopes(meta.len()),
        SlopeDomain::Constants => constant_slopes(meta.len(), &collect_literals(&ts)),
        SlopeDomain::Pca { components } => {
            let path = a
                .sample
                .as_ref()
                .ok_or("--domain pca needs --sample with sampled states")?;
            let set: SampleSet = serde_json::from_str(&fs::read_to_string(path)?)?;
            pca_slopes(&set, &meta, components)?
        }
    };
    let slopes = SlopeMatrix::new(h, meta)?;
    write_out(a.out.as_deref(), &serde_json::to_string_pretty(&slopes)?)?;
    Ok(0)
}

fn run_learn(a: &LearnArgs) -> Result<u8, Box<dyn Error>> {
    let set: SampleSet = serde_json::from_str(&fs::read_to_string(&a.sample)?)?;
    let slopes: SlopeMatrix = serde_json::from_str(&fs::read_to_string(&a.slopes)?)?;
    let z = dtinv::features::transform(&set, &slopes)?;
    let tree = dtinv::dtlearn::learn(&z, a.criterion.into(), a.max_nodes)?;
    let out = if a.to_formula {
        let f = simplify(&dtinv::formula::dt_to_form(&tree, &slopes)?)?;
        serde_json::to_string_pretty(&formula_to_json(&f))?
    } else {
        serde_json::to_string_pretty(&tree_to_json(&tree))?
    };
    write_out(a.out.as_deref(), &out)?;
    Ok(0)
}

fn load_candidate(a: &VerifyArgs, ts: &TransitionSystem) -> Result<Formula, Box<dyn Error>> {
    if let Some(text) = &a.formula {
        Ok(parse_formula(text, &ts.vars)?)
    } else if let Some(path) = &a.formula_json {
        let j: FormulaJson = serde_json::from_str(&fs::read_to_string(path)?)?;
        Ok(formula_from_json(&j)?)
    } else {
        Err("need --formula or --formula-json".into())
    }
}

fn run_verify(a: &VerifyArgs) -> Result<u8, Box<dyn Error>> {
    let ts = load_program(&a.file)?;
    let candidate = load_candidate(a, &ts)?;
    if let Some(path) = &a.emit_smt {
        fs::write(path, emit_smt(&ts, &candidate)?)?;
        println!("wrote SMT conditions to {}", path.display());
        return Ok(0);
    }
    let resolved = resolve(&candidate, &ts.vars)?;
    match check_bounded(&ts, &resolved, a.bound)? {
        Verdict::Valid { bound } => {
            println!("verified: invariant holds on [-{bound}, {bound}]^{}", ts.dim());
            Ok(0)
        }
        violation => {
            println!("refuted: {violation}");
            Ok(1)
        }
    }
}

fn run_infer(a: &InferArgs) -> Result<u8, Box<dyn Error>> {
    let ts = load_program(&a.file)?;
    let config = PipelineConfig {
        sampler: a.sampler.to_config(),
        domain: a.domain.slope_domain(),
        augment: a.domain.augment_policy()?,
        criterion: a.criterion.into(),
        max_nodes: a.max_nodes,
        verify: if a.emit_smt.is_some() {
            VerifyMode::EmitSmt
        } else {
            VerifyMode::Bounded { bound: a.bound }
        },
    };
    let result = infer_invariant(&ts, &program_name(&a.file), &config)?;
    if let InferOutcome::Emitted { smt, .. } = &result.outcome {
        let path = a.emit_smt.as_ref().expect("emit mode implies a path");
        fs::write(path, smt)?;
    }
    if a.report_json {
        println!("{}", serde_json::to_string_pretty(&result.report)?);
    } else {
        let r = &result.report;
        println!("program: {} ({} vars)", r.program, r.vars.len());
        println!("sample: {} good, {} bad", r.good_states, r.bad_states);
        println!("features: {}, tree nodes: {}", r.features, r.tree_nodes);
        if !r.formula.is_empty() {
            println!("formula: {} ({} predicates)", r.formula, r.predicates);
        }
        match &result.outcome {
            InferOutcome::Verified { bound, .. } => {
                println!("verdict: verified on [-{bound}, {bound}]^{}", ts.dim());
            }
            InferOutcome::Refuted { verdict, .. } => println!("verdict: refuted: {verdict}"),
            InferOutcome::Emitted { .. } => {
                let path = a.emit_smt.as_ref().expect("emit mode implies a path");
                println!("verdict: conditions written to {}", path.display());
            }
            InferOutcome::Unsafe { witness } => {
                println!("verdict: unsafe, failing state {witness} is reachable");
            }
        }
        let t = r.times_ms;
        println!(
            "times: sample {} ms, learn {} ms, verify {} ms, total {} ms",
            t.sample, t.learn, t.verify, t.total
        );
    }
    Ok(match &result.outcome {
        InferOutcome::Verified { .. } | InferOutcome::Emitted { .. } => 0,
        InferOutcome::Refuted { .. } => 1,
        InferOutcome::Unsafe { .. } => 2,
    })
}

fn run_pac_bound(a: &PacBoundArgs) -> Result<u8, Box<dyn Error>> {
    let vc = dtinv::pac::dt_vc_bound(a.max_nodes, a.dim)?;
    let n = dtinv::pac::sample_size_for(a.epsilon, a.delta, a.max_nodes, a.dim)?;
    println!("vc dimension bound: {vc}");
    println!("required sample size: {n}");
    Ok(0)
}

fn run_bench(a: &BenchArgs) -> Result<u8, Box<dyn Error>> {
    let runner = std::env::current_exe()?;
    let config = SuiteConfig {
        dir: a.dir.clone(),
        runner_exe: runner,
        timeout_secs: a.timeout_secs,
        memory_mb: a.memory_mb,
    };
    let rows = run_suite(&config)?;
    print!("{}", render_table(&rows));
    if let Some(path) = &a.csv {
        fs::write(path, render_csv(&rows))?;
    }
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8, Box<dyn Error>> {
    match &cli.cmd {
        Cmd::Sample(a) => run_sample(a),
        Cmd::Slopes(a) => run_slopes(a),
        Cmd::Learn(a) => run_learn(a),
        Cmd::Verify(a) => run_verify(a),
        Cmd::Infer(a) => run_infer(a),
        Cmd::PacBound(a) => run_pac_bound(a),
        Cmd::Bench(a) => run_bench(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
