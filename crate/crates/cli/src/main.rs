//! `repsim`: representational similarity from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use repsim::harness::{
    cross_domain_consistency, diagnose, in_domain_consistency, layerwise_grid, null_detection, ood_correlation,
    score_correlation, Alternatives, ConsistencySpec, InputDist, InputRsms, NullGenerator, NullSpec, PreparedModel,
    ReportKind, RunOptions, SimSetup, ThresholdRule,
};
use repsim::indices::{score, Metric};
use repsim::ingest::{
    load_activation_matrix, load_manifest, load_score_table, render_report, value_to_json_string, write_npy,
    ActivationFileRef, ExperimentReport, ModelActivations, ReportFormat,
};
use repsim::netsim::{default_domains, forward_model, Activation};
use repsim::{Error, RepMatrix, RsmKind};

#[derive(Parser)]
#[command(name = "repsim", version, about = "Deconfounded representational similarity (CKA, RSA and variants)")]
struct Cli {
    /// Worker threads for the experiment harness (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Similarity of one layer of model A to one layer of model B.
    Compare(CompareArgs),
    /// Every layer of A against every layer of B.
    Layerwise(LayerwiseArgs),
    /// Detection of perturbed networks against a random-network null.
    Nulltest(NulltestArgs),
    /// Ordering consistency across noise levels over domains or input sets.
    Consistency(ConsistencyArgs),
    /// Rank correlation between dissimilarity and accuracy gap.
    Oodcorr(OodcorrArgs),
    /// Polynomial BIC scan and residual Durbin-Watson per layer.
    Diagnose(DiagnoseArgs),
    /// Generate a synthetic MLP and optionally dump its activations.
    Simnet(SimnetArgs),
    /// Spearman and Kendall correlation between two score tables.
    Scorecorr(ScorecorrArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricName {
    Cka,
    Dcka,
    Rdcka,
    Rsa,
    Drsa,
    Rdrsa,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RsaVariantArg {
    Spearman,
    Pearson,
}

#[derive(Args)]
struct MetricOpts {
    /// Correlation used by plain rsa.
    #[arg(long, value_enum, default_value = "spearman")]
    rsa_variant: RsaVariantArg,
    /// Build the input RSM from the inputs as given, without preprocessing.
    #[arg(long)]
    raw_input_rsm: bool,
}

impl MetricOpts {
    fn resolve(&self, m: MetricName) -> Metric {
        match m {
            MetricName::Cka => Metric::Cka,
            MetricName::Dcka => Metric::Dcka,
            MetricName::Rdcka => Metric::Rdcka,
            MetricName::Rsa => match self.rsa_variant {
                RsaVariantArg::Spearman => Metric::RsaSpearman,
                RsaVariantArg::Pearson => Metric::RsaPearson,
            },
            MetricName::Drsa => Metric::Drsa,
            MetricName::Rdrsa => Metric::Rdrsa,
        }
    }

    fn resolve_all(&self, ms: &[MetricName]) -> Vec<Metric> {
        let mut out: Vec<Metric> = Vec::new();
        for &m in ms {
            let m = self.resolve(m);
            if !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputOpts {
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimOpts {
    /// Layer widths of the reference MLP, input width first.
    #[arg(long, value_delimiter = ',', default_value = "32,64,64,32")]
    sizes: Vec<usize>,
    #[arg(long, value_enum, default_value = "relu")]
    activation: ActivationArg,
    /// Examples per input set.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Column variance decay exponent of the simulated inputs (0: i.i.d.).
    #[arg(long, default_value_t = 0.0)]
    input_decay: f64,
    /// Master seed.
    #[arg(long)]
    seed: u64,
}

impl SimOpts {
    fn setup(&self) -> SimSetup {
        SimSetup {
            sizes: self.sizes.clone(),
            activation: self.activation.into(),
            inputs: InputDist { n: self.n, decay: self.input_decay },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivationArg {
    Relu,
    Tanh,
    Identity,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Tanh => Activation::Tanh,
            ActivationArg::Identity => Activation::Identity,
        }
    }
}

#[derive(Args)]
struct CompareArgs {
    /// Manifest of model A.
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    layer_a: String,
    /// Manifest of model B.
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    layer_b: String,
    /// Input matrix (.npy or .csv) shared by both models.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricName,
    #[command(flatten)]
    metric_opts: MetricOpts,
}

#[derive(Args)]
struct LayerwiseArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricName,
    #[command(flatten)]
    metric_opts: MetricOpts,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorArg {
    Permute,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum ThresholdArg {
    #[value(name = "percentile_97_5")]
    Percentile,
    #[value(name = "mean_plus_1_96_sd")]
    MeanSd,
}

#[derive(Args)]
struct NulltestArgs {
    #[command(flatten)]
    sim: SimOpts,
    #[arg(long, value_enum, default_value = "gaussian")]
    generator: GeneratorArg,
    /// Noise scale of the gaussian null generator.
    #[arg(long, default_value_t = 10.0)]
    null_sigma: f64,
    /// Random pairs in the null sample.
    #[arg(long, default_value_t = 50)]
    pairs: usize,
    #[arg(long, default_value_t = 50)]
    alternatives: usize,
    /// Noise scale of the perturbed alternatives.
    #[arg(long, default_value_t = 0.3)]
    alt_sigma: f64,
    /// Draw the alternatives from the null generator (false-positive check).
    #[arg(long)]
    alt_from_null: bool,
    #[arg(long, value_enum, default_value = "percentile_97_5")]
    threshold_rule: ThresholdArg,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "cka,dcka")]
    metrics: Vec<MetricName>,
    #[command(flatten)]
    metric_opts: MetricOpts,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Cross,
    In,
}

#[derive(Args)]
struct ConsistencyArgs {
    #[command(flatten)]
    sim: SimOpts,
    #[arg(long, value_enum, default_value = "cross")]
    mode: ModeArg,
    /// Number of noise levels σ₀, 2σ₀, ….
    #[arg(long, default_value_t = 6)]
    levels: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma0: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Resampled input sets per trial in `in` mode.
    #[arg(long, default_value_t = 20)]
    sets: usize,
    /// Reuse a single input set in `in` mode.
    #[arg(long)]
    fixed_inputs: bool,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "cka,dcka")]
    metrics: Vec<MetricName>,
    #[command(flatten)]
    metric_opts: MetricOpts,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct OodcorrArgs {
    /// Manifest of the reference model.
    #[arg(long)]
    reference: PathBuf,
    /// Manifests of the compared models.
    #[arg(long, value_delimiter = ',', required = true)]
    models: Vec<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    /// CSV of `model_id,accuracy` rows.
    #[arg(long)]
    accuracy: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricName,
    #[command(flatten)]
    metric_opts: MetricOpts,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Kernel,
    Distance,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "kernel")]
    kind: KindArg,
    #[arg(long, default_value_t = 4)]
    max_order: usize,
    #[arg(long)]
    raw_input_rsm: bool,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct SimnetArgs {
    /// Layer widths, input width first.
    #[arg(long, value_delimiter = ',', required = true)]
    layers: Vec<usize>,
    #[arg(long, value_enum, default_value = "relu")]
    activation: ActivationArg,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    input_decay: f64,
    #[arg(long)]
    seed: u64,
    /// Directory receiving inputs.npy, one NPY per layer and manifest.json.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct ScorecorrArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[command(flatten)]
    output: OutputOpts,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Io(String),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Compare(a) => compare(a),
        Command::Layerwise(a) => layerwise(a),
        Command::Nulltest(a) => nulltest(a),
        Command::Consistency(a) => consistency(a),
        Command::Oodcorr(a) => oodcorr(a),
        Command::Diagnose(a) => diagnose_cmd(a),
        Command::Simnet(a) => simnet(a),
        Command::Scorecorr(a) => scorecorr(a),
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

fn load_inputs(path: &Path) -> CliResult<RepMatrix> {
    Ok(load_activation_matrix(&ActivationFileRef::from_path(path)?)?)
}

fn check_n(models: &[&ModelActivations], inputs: &RepMatrix) -> CliResult<()> {
    for m in models {
        if m.n() != inputs.nrows() {
            return Err(invalid(format!("model {} has n={}, inputs have n={}", m.model_id, m.n(), inputs.nrows())));
        }
    }
    Ok(())
}

fn layer_index(model: &ModelActivations, name: &str) -> CliResult<usize> {
    model
        .layer_names()
        .iter()
        .position(|l| l == name)
        .ok_or_else(|| invalid(format!("model {} has no layer {name:?}", model.model_id)))
}

fn emit(report: &ExperimentReport, out: &OutputOpts, summary: &str) -> CliResult<()> {
    let format = match out.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Csv => ReportFormat::Csv,
    };
    let text = render_report(report, format)?;
    match &out.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            println!("{summary}");
        }
        None => {
            print!("{text}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

fn compare(a: CompareArgs) -> CliResult<()> {
    let metric = a.metric_opts.resolve(a.metric);
    let ma = load_manifest(&a.a)?;
    let mb = load_manifest(&a.b)?;
    let ia = layer_index(&ma, &a.layer_a)?;
    let ib = layer_index(&mb, &a.layer_b)?;
    let inputs = load_inputs(&a.input)?;
    check_n(&[&ma, &mb], &inputs)?;
    let k0 = InputRsms::new(&inputs, &[metric], a.metric_opts.raw_input_rsm)?;
    // Whole models are prepared so recursive metrics see earlier layers.
    let pa = PreparedModel::new(&ma, &[metric], &k0)?;
    let pb = PreparedModel::new(&mb, &[metric], &k0)?;
    let mut s = score(&pa.layers(metric)[ia], &pb.layers(metric)[ib])?;
    s.pair = (format!("{}/{}", ma.model_id, a.layer_a), format!("{}/{}", mb.model_id, a.layer_b));
    let value = serde_json::to_value(&s).expect("score serializes");
    print!("{}", value_to_json_string(&value));
    Ok(())
}

fn layerwise(a: LayerwiseArgs) -> CliResult<()> {
    let metric = a.metric_opts.resolve(a.metric);
    let ma = load_manifest(&a.a)?;
    let mb = load_manifest(&a.b)?;
    let inputs = load_inputs(&a.input)?;
    check_n(&[&ma, &mb], &inputs)?;
    let grid = layerwise_grid(&ma, &mb, metric, &inputs, a.metric_opts.raw_input_rsm)?;
    let summary = format!(
        "layerwise {metric}: {}x{} grid, {} degenerate cells",
        grid.layers_a.len(),
        grid.layers_b.len(),
        grid.degenerate.len()
    );
    emit(&grid.report(a.metric_opts.raw_input_rsm), &a.output, &summary)
}

fn nulltest(a: NulltestArgs) -> CliResult<()> {
    let metrics = a.metric_opts.resolve_all(&a.metrics);
    let generator = match a.generator {
        GeneratorArg::Permute => NullGenerator::Permute,
        GeneratorArg::Gaussian => NullGenerator::Gaussian { sigma: a.null_sigma },
    };
    let rule = match a.threshold_rule {
        ThresholdArg::Percentile => ThresholdRule::Percentile97_5,
        ThresholdArg::MeanSd => ThresholdRule::MeanPlus196Sd,
    };
    let spec = NullSpec::new(generator, a.pairs, rule)?;
    let alternatives = if a.alt_from_null {
        Alternatives::FromNull { count: a.alternatives }
    } else {
        Alternatives::Perturbed { count: a.alternatives, sigma: a.alt_sigma }
    };
    let setup = a.sim.setup();
    let (net, inputs) = setup.build(a.sim.seed)?;
    let options = RunOptions { seed: a.sim.seed, raw_input_rsm: a.metric_opts.raw_input_rsm };
    let result = null_detection(&net, &alternatives, &spec, &metrics, &inputs, options)?;
    let mut report = result.report(&spec, &alternatives, options);
    report.params.insert("setup".into(), json!(setup));
    let summary = result
        .metrics
        .iter()
        .map(|m| format!("{}={}", m.metric, fmt_opt(m.mean_proportion)))
        .collect::<Vec<_>>()
        .join(" ");
    emit(&report, &a.output, &format!("nulltest mean detection: {summary}"))
}

fn consistency(a: ConsistencyArgs) -> CliResult<()> {
    let metrics = a.metric_opts.resolve_all(&a.metrics);
    let spec = ConsistencySpec::linear(a.sigma0, a.levels, a.trials);
    let setup = a.sim.setup();
    let options = RunOptions { seed: a.sim.seed, raw_input_rsm: a.metric_opts.raw_input_rsm };
    let (net, inputs) = setup.build(a.sim.seed)?;
    let (result, kind, extra) = match a.mode {
        ModeArg::Cross => {
            let domains = default_domains();
            let r = cross_domain_consistency(&net, &spec, &domains, &metrics, &inputs, options)?;
            (r, ReportKind::CrossDomain, json!({"domains": domains, "setup": setup}))
        }
        ModeArg::In => {
            let r = in_domain_consistency(&net, &spec, a.sets, setup.inputs, &metrics, a.fixed_inputs, options)?;
            (r, ReportKind::InDomain, json!({"fixed_inputs": a.fixed_inputs, "setup": setup}))
        }
    };
    let summary = result
        .metrics
        .iter()
        .map(|m| format!("{}={:.4}", m.metric, m.mean_proportion))
        .collect::<Vec<_>>()
        .join(" ");
    emit(&result.report(kind, &spec, extra, options), &a.output, &format!("consistency mean identified: {summary}"))
}

fn oodcorr(a: OodcorrArgs) -> CliResult<()> {
    let metric = a.metric_opts.resolve(a.metric);
    let reference = load_manifest(&a.reference)?;
    let models = a.models.iter().map(|p| load_manifest(p)).collect::<Result<Vec<_>, _>>()?;
    let inputs = load_inputs(&a.input)?;
    let mut all: Vec<&ModelActivations> = models.iter().collect();
    all.push(&reference);
    check_n(&all, &inputs)?;
    let accuracy = load_score_table(&a.accuracy)?;
    let r = ood_correlation(&models, &reference, &inputs, metric, &accuracy, a.metric_opts.raw_input_rsm)?;
    let summary = format!(
        "oodcorr {metric}: mean spearman {} mean kendall {}",
        fmt_opt(r.mean_spearman_rho),
        fmt_opt(r.mean_kendall_tau)
    );
    emit(&r.report(a.metric_opts.raw_input_rsm), &a.output, &summary)
}

fn diagnose_cmd(a: DiagnoseArgs) -> CliResult<()> {
    let model = load_manifest(&a.manifest)?;
    let inputs = load_inputs(&a.input)?;
    check_n(&[&model], &inputs)?;
    let kind = match a.kind {
        KindArg::Kernel => RsmKind::Kernel,
        KindArg::Distance => RsmKind::SquaredDistance,
    };
    let d = diagnose(&model, &inputs, kind, a.max_order, a.raw_input_rsm)?;
    let orders = d.layers.iter().map(|l| format!("{}:{}", l.layer, l.best_bic_order)).collect::<Vec<_>>().join(" ");
    emit(&d.report(a.raw_input_rsm), &a.output, &format!("diagnose best BIC order: {orders}"))
}

fn simnet(a: SimnetArgs) -> CliResult<()> {
    let setup = SimSetup {
        sizes: a.layers.clone(),
        activation: a.activation.into(),
        inputs: InputDist { n: a.n, decay: a.input_decay },
    };
    let (net, inputs) = setup.build(a.seed)?;
    let model = forward_model(&net, &inputs)?;
    let mut files = Vec::new();
    if let Some(dir) = &a.dump_dir {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        write_npy(&dir.join("inputs.npy"), inputs.data())?;
        let mut layers = Vec::new();
        for (name, m) in &model.layers {
            let file = format!("{name}.npy");
            write_npy(&dir.join(&file), m.data())?;
            layers.push(json!({"name": name, "path": file, "format": "npy"}));
            files.push(file);
        }
        let manifest = json!({"model_id": net.net_id, "layers": layers});
        let path = dir.join("manifest.json");
        std::fs::write(&path, value_to_json_string(&manifest))
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        files.push("inputs.npy".into());
        files.push("manifest.json".into());
    }
    let mut params = serde_json::Map::new();
    params.insert("setup".into(), json!(setup));
    params.insert("seed".into(), json!(a.seed));
    let results = json!({
        "net_id": net.net_id,
        "sizes": net.sizes(),
        "parameter_count": net.parameter_count(),
        "layers": model.layer_names(),
        "files": files,
    });
    let report = ExperimentReport::new(ReportKind::Simnet, params, results);
    emit(&report, &a.output, &format!("simnet {}: {} layers, {} parameters", net.net_id, model.len(), net.parameter_count()))
}

fn scorecorr(a: ScorecorrArgs) -> CliResult<()> {
    let xs = load_score_table(&a.x)?;
    let ys = load_score_table(&a.y)?;
    let r = score_correlation(&xs, &ys)?;
    let summary = format!("scorecorr: spearman {:.4} kendall {:.4}", r.spearman_rho, r.kendall_tau);
    emit(&r.report(), &a.output, &summary)
}
