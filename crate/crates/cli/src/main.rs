//! `regrank`: simulate comparison data, fit rankings, score them, run sweeps
//! and evaluate the closed-form bounds.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 the estimator
//! could not produce a ranking (e.g. a non-ergodic comparison chain).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use regrank::experiment::{run_sweep, GeneratorKind};
use regrank::io;
use regrank::markov::{check_ergodicity, empirical_transition_matrix};
use regrank::metrics::{kendall_tau_b, pairwise_test_error, relative_l2_error};
use regrank::model::{
    generate_clustered, generate_experiment_a, generate_experiment_b, sample_comparisons, scores_linear,
    scores_random_exp, uniform_mu, DEFAULT_CLUSTER_SEPARATION,
};
use regrank::rank::{lambda_schedule, rank_centrality, regularized_rank_centrality};
use regrank::regularize::{apply_regularizer, decayed_mix, diffusion_regularizer, lambda_regularizer};
use regrank::theory::{self, BoundInputs};
use regrank::{Error, Regularizer};

#[derive(Parser)]
#[command(
    name = "regrank",
    version,
    about = "Regularized spectral ranking from pairwise comparisons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw BTL comparisons under uniform pair sampling.
    Simulate(SimulateArgs),
    /// Fit scores with (regularized) RankCentrality.
    Rank(RankArgs),
    /// Score an estimate against ground truth and/or held-out comparisons.
    Eval(EvalArgs),
    /// Run a configured Monte-Carlo sweep.
    Sweep(SweepArgs),
    /// Evaluate spectral-gap and sample-complexity bounds.
    Bounds(BoundsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreGenerator {
    Random,
    Linear,
    ExpA,
    ExpB,
    Clustered,
}

impl From<ScoreGenerator> for GeneratorKind {
    fn from(g: ScoreGenerator) -> Self {
        match g {
            ScoreGenerator::Random => Self::Random,
            ScoreGenerator::Linear => Self::Linear,
            ScoreGenerator::ExpA => Self::ExpA,
            ScoreGenerator::ExpB => Self::ExpB,
            ScoreGenerator::Clustered => Self::Clustered,
        }
    }
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Number of items. For `clustered`, must be a multiple of --clusters.
    #[arg(long)]
    n: usize,
    /// Number of comparisons.
    #[arg(long)]
    m: usize,
    #[arg(long, value_enum)]
    scores: ScoreGenerator,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    clusters: usize,
    #[arg(long, default_value_t = DEFAULT_CLUSTER_SEPARATION)]
    separation: f64,
    #[arg(long)]
    out_comparisons: PathBuf,
    #[arg(long)]
    out_truth: PathBuf,
    /// Written only by generators that produce features.
    #[arg(long)]
    out_features: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegularizerArg {
    None,
    Lambda,
    Diffusion,
    DecayedDiffusion,
}

#[derive(clap::Args)]
struct RankArgs {
    #[arg(long)]
    comparisons: PathBuf,
    /// Item count, when larger than the largest index in the file + 1.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value = "none")]
    regularizer: RegularizerArg,
    /// Fixed mixing weight for `lambda`.
    #[arg(long, conflicts_with = "eta")]
    lambda: Option<f64>,
    /// Use `λ = η/√m` for `lambda`.
    #[arg(long)]
    eta: Option<f64>,
    /// Kernel width for the diffusion kinds.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    test_comparisons: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(clap::Args)]
struct BoundsArgs {
    #[arg(long)]
    n: usize,
    /// Upper bound on the score ratio.
    #[arg(long)]
    b: f64,
    #[arg(long)]
    mu_min: f64,
    #[arg(long)]
    mu_max: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 1,
        Error::NotErgodic(_) | Error::MaxIterationsExceeded { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Rank(a) => rank(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Bounds(a) => bounds(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::NotErgodic(_)) {
                eprintln!("hint: --regularizer lambda --lambda 0.1 yields a ranking for any comparison set");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

fn simulate(a: SimulateArgs) -> regrank::Result<()> {
    let (features, truth) = match a.scores {
        ScoreGenerator::Random => (None, scores_random_exp(a.n, a.seed)?),
        ScoreGenerator::Linear => (None, scores_linear(a.n)?),
        ScoreGenerator::ExpA => {
            let (x, w) = generate_experiment_a(a.seed, a.n)?;
            (Some(x), w)
        }
        ScoreGenerator::ExpB => {
            let (x, w) = generate_experiment_b(a.seed, a.n)?;
            (Some(x), w)
        }
        ScoreGenerator::Clustered => {
            if a.clusters == 0 || !a.n.is_multiple_of(a.clusters) {
                return Err(Error::InvalidInput(format!(
                    "--n {} is not a multiple of --clusters {}",
                    a.n, a.clusters
                )));
            }
            let (x, w) = generate_clustered(a.clusters, a.n / a.clusters, a.separation, a.seed)?;
            (Some(x), w)
        }
    };
    let data = sample_comparisons(&truth, &uniform_mu(truth.len())?, a.m, a.seed)?;
    io::write_comparisons(&a.out_comparisons, &data)?;
    io::write_score_vector(&a.out_truth, truth.as_slice())?;
    match (features, &a.out_features) {
        (Some(x), Some(path)) => io::write_features(path, &x)?,
        (None, Some(_)) => eprintln!(
            "note: generator `{}` has no features; --out-features ignored",
            GeneratorKind::from(a.scores).as_str()
        ),
        _ => {}
    }
    Ok(())
}

fn rank(a: RankArgs) -> regrank::Result<()> {
    let data = io::read_comparisons(&a.comparisons, a.n)?;
    let needs_sigma = matches!(
        a.regularizer,
        RegularizerArg::Diffusion | RegularizerArg::DecayedDiffusion
    );
    if needs_sigma && (a.features.is_none() || a.sigma.is_none()) {
        return Err(Error::InvalidInput(
            "diffusion regularizers require --features and --sigma".into(),
        ));
    }
    if a.regularizer == RegularizerArg::Lambda && a.lambda.is_none() && a.eta.is_none() {
        return Err(Error::InvalidInput(
            "--regularizer lambda requires --lambda or --eta".into(),
        ));
    }
    let n = data.n();
    let reg: Option<Regularizer> = match a.regularizer {
        RegularizerArg::None => None,
        RegularizerArg::Lambda => {
            let l = match (a.lambda, a.eta) {
                (Some(l), _) => l,
                (None, Some(eta)) if eta.is_finite() && eta > 0.0 => lambda_schedule(eta, data.len()),
                (None, eta) => return Err(Error::InvalidInput(format!("--eta must be positive, got {eta:?}"))),
            };
            Some(lambda_regularizer(n, l)?)
        }
        RegularizerArg::Diffusion | RegularizerArg::DecayedDiffusion => {
            let x = io::read_features(a.features.as_ref().expect("checked above"))?;
            if x.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: x.n(),
                });
            }
            let kernel = diffusion_regularizer(&x, a.sigma.expect("checked above"))?;
            Some(if a.regularizer == RegularizerArg::Diffusion {
                kernel
            } else {
                decayed_mix(&kernel, data.len())?
            })
        }
    };

    let qhat = empirical_transition_matrix(&data)?;
    let chain = match &reg {
        Some(r) => apply_regularizer(&qhat, r)?,
        None => qhat,
    };
    let report = check_ergodicity(&chain);
    eprintln!(
        "chain: ergodic={} strongly_connected={} aperiodic={} components={}",
        report.ergodic, report.strongly_connected, report.aperiodic, report.component_count
    );
    let result = match &reg {
        Some(r) => regularized_rank_centrality(&data, r)?,
        None => rank_centrality(&data)?,
    };
    eprintln!("{}: {} iterations", result.info.name, result.info.iterations);
    io::write_scores(&a.out, &result)
}

fn eval(a: EvalArgs) -> regrank::Result<()> {
    if a.truth.is_none() && a.test_comparisons.is_none() {
        return Err(Error::InvalidInput(
            "eval needs --truth, --test-comparisons, or both".into(),
        ));
    }
    let scores = io::read_scores(&a.scores)?;
    let (mut tau, mut l2, mut test_err) = (None, None, None);
    if let Some(path) = &a.truth {
        let truth = io::read_scores(path)?;
        tau = Some(kendall_tau_b(&scores, &truth)?);
        l2 = Some(relative_l2_error(&scores, &truth)?);
    }
    if let Some(path) = &a.test_comparisons {
        let test = io::read_comparisons(path, Some(scores.len()))?;
        test_err = Some(pairwise_test_error(&scores, &test)?);
    }
    let cell = |v: Option<f64>| v.map(io::format_float).unwrap_or_default();
    println!("kendall_tau,l2_rel_err,test_err");
    println!("{},{},{}", cell(tau), cell(l2), cell(test_err));
    Ok(())
}

fn sweep(a: SweepArgs) -> regrank::Result<()> {
    let config = io::read_config(&a.config)?;
    let out = run_sweep(&config)?;
    out.write(&config.output)?;
    let failures: usize = out
        .aggregates
        .iter()
        .filter(|r| !r.algorithm.ends_with("-best"))
        .map(|r| r.failures)
        .sum();
    eprintln!(
        "wrote {} trial rows, {} aggregate rows ({failures} failed runs) to {}",
        out.rows.len(),
        out.aggregates.len(),
        config.output.display()
    );
    Ok(())
}

fn bounds(a: BoundsArgs) -> regrank::Result<()> {
    let mut inputs = BoundInputs::new(a.n, a.b, a.mu_min, a.mu_max, a.eps, a.delta)?;
    let mut rows: Vec<(&str, String)> = vec![
        (
            "spectral_gap_lower_bound",
            io::format_float(theory::spectral_gap_lower_bound(&inputs)),
        ),
        ("gamma", io::format_float(theory::gamma(&inputs))),
        (
            "perturbation_threshold",
            io::format_float(theory::perturbation_threshold(&inputs)),
        ),
        (
            "rc_sample_complexity",
            theory::rc_sample_complexity(&inputs).to_string(),
        ),
    ];
    if let Some(lambda) = a.lambda {
        inputs = inputs.with_lambda(lambda)?;
        rows.push((
            "bias_bound",
            io::format_float(theory::bias_bound(lambda, theory::gamma(&inputs))?),
        ));
        rows.push((
            "reg_rc_sample_complexity",
            theory::reg_rc_sample_complexity(&inputs)?.to_string(),
        ));
        if let Some(m) = a.m {
            inputs = inputs.with_m(m);
            rows.push((
                "reg_rc_error_bound",
                io::format_float(theory::reg_rc_error_bound(&inputs)?),
            ));
        }
    } else if a.m.is_some() {
        return Err(Error::InvalidInput("--m is only used together with --lambda".into()));
    }
    println!("quantity,value");
    for (k, v) in rows {
        println!("{k},{v}");
    }
    Ok(())
}
