mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vm_auctions::general::{lexi_payments_on_grid, AffineParams, AuctionResult, TypeGrid};
use vm_auctions::generate::{generate, Preset};
use vm_auctions::io::{dataset_to_jsonl, parse_dataset, parse_instance, Instance, InstanceFile};
use vm_auctions::robustness::gamma_curve;
use vm_auctions::slots::{
    critical_bid, critical_price_on_grid, gsp_allocation_rule, AllocationRule,
    SingleParameterDomain, SlotDomain,
};
use vm_auctions::verification::{
    dsic_ae_check, DsicReport, GeneralMechanism, Mechanism, SlotMechanism, SlotRule, DEFAULT_EPS,
};
use vm_auctions::{Error, SlotAuctionInstance, ValuationMatrix};

use config::{Alpha, MechanismKind, ModelKind, PhiKind, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Deviation(String),
    Invariant(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Deviation(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Invariant(_) | Error::NegativeExternality(_) | Error::OutcomeMismatch { .. } => {
                CliError::Invariant(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "vm-auctions",
    version,
    about = "Auctions for value-maximizing bidders"
)]
struct Cli {
    /// JSON run config; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random draw (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mechanism on an instance and print the result as JSON.
    Run(RunArgs),
    /// Critical-value price of one bidder in a slot auction.
    Price(PriceArgs),
    /// Search for profitable deviations; exits 3 if one is found.
    Verify(VerifyArgs),
    /// Minimum-ROI curve of a slot-auction dataset as CSV.
    Robustness(RobustnessArgs),
    /// Write a synthetic dataset as JSON Lines.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct MechanismArgs {
    #[arg(long, value_enum)]
    mechanism: Option<MechanismKind>,
    /// Exponent of lp, lp-affine and hybrid-gsp: a number >= 1 or `inf`.
    #[arg(long)]
    alpha: Option<Alpha>,
    /// Virtual value function applied to every bidder.
    #[arg(long, value_enum)]
    phi: Option<PhiKind>,
    /// Bidder weights of lp-affine.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Outcome offsets of lp-affine.
    #[arg(long, value_delimiter = ',')]
    offsets: Option<Vec<f64>>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    mechanism: MechanismArgs,
    #[arg(long)]
    instance: PathBuf,
    /// Round payments up to the next point of a type grid with this step.
    #[arg(long)]
    type_grid: Option<f64>,
    /// Include the lexicographic allocation trace.
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PriceArgs {
    #[arg(long, value_enum)]
    mechanism: Option<MechanismKind>,
    #[arg(long)]
    instance: PathBuf,
    /// Bidder index, starting at 0.
    #[arg(long)]
    bidder: usize,
    #[arg(long)]
    type_grid: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    mechanism: MechanismArgs,
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// Exponent of alpha-hybrid preferences; defaults to --alpha.
    #[arg(long)]
    model_alpha: Option<Alpha>,
    /// ROI requirement of roi-vm and roi-hybrid bidders.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    instance: PathBuf,
    /// Deviation grid `lo:hi:step`; default 0:2*max value:0.05.
    #[arg(long)]
    grid: Option<String>,
    /// Tie band: deviations deciding within eps of a tie are skipped.
    #[arg(long)]
    eps: Option<f64>,
    /// CSV report path; stdout if absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RobustnessArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// `lo:hi:step`, inclusive of lo, up to hi.
    #[arg(long)]
    gammas: String,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write `id,gamma_star` per auction.
    #[arg(long)]
    per_auction: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    preset: String,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Deviation(msg) => eprintln!("{msg}"),
                CliError::Usage(msg) => eprintln!("usage error: {msg}"),
                CliError::Input(msg) => eprintln!("input error: {msg}"),
                CliError::Invariant(msg) => eprintln!("internal error: {msg}"),
            }
            ExitCode::from(e.code())
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("VM_AUCTIONS_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "VM_AUCTIONS_THREADS={raw:?} is not a positive integer"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Invariant(e.to_string()))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let with_seed = |flags: RunConfig| {
        let flags = RunConfig {
            seed: cli.seed,
            ..flags
        };
        base.clone().merged(&flags)
    };
    match cli.command {
        Command::Run(args) => {
            let config = with_seed(RunConfig {
                command: Some("run".into()),
                type_grid: args.type_grid,
                output: args.output.clone(),
                ..mechanism_flags(&args.mechanism)
            });
            output::echo(&config);
            run(&config, &args.instance, args.trace)
        }
        Command::Price(args) => {
            let config = with_seed(RunConfig {
                command: Some("price".into()),
                mechanism: args.mechanism,
                type_grid: args.type_grid,
                ..RunConfig::default()
            });
            output::echo(&config);
            price(&config, &args.instance, args.bidder)
        }
        Command::Verify(args) => {
            let mut config = with_seed(RunConfig {
                command: Some("verify".into()),
                model: args.model,
                model_alpha: args.model_alpha,
                gamma: args.gamma,
                grid: args.grid.clone(),
                eps: args.eps,
                output: args.output.clone(),
                ..mechanism_flags(&args.mechanism)
            });
            config.eps.get_or_insert(DEFAULT_EPS);
            output::echo(&config);
            verify(&config, &args.instance)
        }
        Command::Robustness(args) => {
            let config = with_seed(RunConfig {
                command: Some("robustness".into()),
                grid: Some(args.gammas.clone()),
                output: args.output.clone(),
                ..RunConfig::default()
            });
            output::echo(&config);
            robustness(&config, &args.dataset, args.per_auction.as_deref())
        }
        Command::Generate(args) => {
            let mut config = with_seed(RunConfig {
                command: Some("generate".into()),
                output: args.output.clone(),
                ..RunConfig::default()
            });
            config.seed.get_or_insert(0);
            output::echo(&config);
            let preset: Preset = args
                .preset
                .parse()
                .map_err(|e: Error| CliError::Usage(e.to_string()))?;
            let files = generate(preset, args.count, config.seed.unwrap_or(0));
            output::emit(config.output.as_deref(), &dataset_to_jsonl(&files))
        }
    }
}

fn mechanism_flags(args: &MechanismArgs) -> RunConfig {
    RunConfig {
        mechanism: args.mechanism,
        alpha_param: args.alpha,
        phi: args.phi,
        weights: args.weights.clone(),
        offsets: args.offsets.clone(),
        ..RunConfig::default()
    }
}

fn read_instance(path: &Path) -> Result<InstanceFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_instance(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn type_grid(config: &RunConfig) -> Result<Option<TypeGrid>, CliError> {
    config
        .type_grid
        .map(TypeGrid::new)
        .transpose()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn general_mechanism(
    config: &RunConfig,
    values: &ValuationMatrix,
) -> Result<GeneralMechanism, CliError> {
    let kind = config.mechanism()?;
    Ok(match kind {
        MechanismKind::Lexi | MechanismKind::GgspV1 => GeneralMechanism::Lexi,
        MechanismKind::Lp => GeneralMechanism::Lp {
            alpha: config.alpha()?,
        },
        MechanismKind::LpAffine => {
            let weights = config
                .weights
                .clone()
                .unwrap_or_else(|| vec![1.0; values.bidders()]);
            let offsets = config
                .offsets
                .clone()
                .unwrap_or_else(|| vec![0.0; values.outcomes()]);
            let params = AffineParams::new(weights, offsets, config.alpha()?)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            GeneralMechanism::LpAffine(params)
        }
        MechanismKind::Virtual => {
            let phi = config.phi.unwrap_or(PhiKind::Identity).function();
            GeneralMechanism::Virtual(vec![phi; values.bidders()])
        }
        MechanismKind::Gsp | MechanismKind::GgspV2 | MechanismKind::HybridGsp => {
            return Err(CliError::Input(format!(
                "mechanism {kind} needs a slot instance"
            )));
        }
    })
}

fn slot_rule(config: &RunConfig) -> Result<SlotRule, CliError> {
    let kind = config.mechanism()?;
    Ok(match kind {
        MechanismKind::Gsp => SlotRule::Gsp,
        MechanismKind::GgspV1 => SlotRule::GgspV1,
        MechanismKind::GgspV2 => SlotRule::GgspV2,
        MechanismKind::HybridGsp => SlotRule::Hybrid {
            alpha: config.alpha()?,
        },
        _ => {
            return Err(CliError::Input(format!(
                "mechanism {kind} needs a general instance"
            )))
        }
    })
}

fn run(config: &RunConfig, path: &Path, trace: bool) -> Result<(), CliError> {
    let file = read_instance(path)?;
    let grid = type_grid(config)?;
    let json = match &file.instance {
        Instance::General { outcomes, values } => {
            let mechanism = general_mechanism(config, values)?;
            let mut result: AuctionResult = mechanism.run(values)?;
            if let Some(grid) = grid {
                if !matches!(mechanism, GeneralMechanism::Lexi) {
                    return Err(CliError::Usage(
                        "--type-grid applies to lexi, ggsp-v1 and slot mechanisms".into(),
                    ));
                }
                result.payments = lexi_payments_on_grid(values, result.outcome, grid)?;
            }
            output::general_result(
                &result,
                outcomes.label(result.outcome).unwrap_or_default(),
                trace,
            )
        }
        Instance::Slot(instance) => {
            let rule = slot_rule(config)?;
            let mut assignment = SlotMechanism::new(instance, rule).run(instance)?;
            if let Some(grid) = grid {
                for i in 0..instance.bidders() {
                    if assignment.slot_of[i].is_some() {
                        let level = assignment.level(instance, i);
                        let per_click = grid.next_above(assignment.per_click_price[i]);
                        assignment.per_click_price[i] = per_click;
                        assignment.expected_payment[i] = per_click * level;
                    }
                }
            }
            output::to_json(&assignment)
        }
    };
    output::emit(config.output.as_deref(), &(json + "\n"))
}

fn price(config: &RunConfig, path: &Path, bidder: usize) -> Result<(), CliError> {
    let file = read_instance(path)?;
    let Instance::Slot(instance) = &file.instance else {
        return Err(CliError::Input("price needs a slot instance".into()));
    };
    if bidder >= instance.bidders() {
        return Err(CliError::Usage(format!(
            "bidder {bidder} out of range for {} bidders",
            instance.bidders()
        )));
    }
    let rule = match config.mechanism.unwrap_or(MechanismKind::Gsp) {
        MechanismKind::Gsp => gsp_allocation_rule(instance, bidder),
        MechanismKind::GgspV2 => single_param_rule(instance, bidder)?,
        other => {
            return Err(CliError::Usage(format!(
                "price supports gsp and ggsp-v2, not {other}"
            )))
        }
    };
    let bid = instance.bids()[bidder];
    let critical = critical_bid(&rule, bid)?;
    let level = rule.level(bid);
    let payment = match type_grid(config)? {
        Some(grid) => critical_price_on_grid(&rule, bid, grid)?,
        None => critical * level,
    };
    let json = serde_json::json!({
        "bidder": bidder,
        "critical_bid": critical,
        "level": level,
        "payment": payment,
    });
    output::emit(None, &(output::tidy(json).to_string() + "\n"))
}

fn single_param_rule(
    instance: &SlotAuctionInstance,
    bidder: usize,
) -> Result<AllocationRule<'_>, CliError> {
    let domain = SlotDomain::new(instance);
    let bids = instance.bids().to_vec();
    let top = 10.0 * bids.iter().copied().fold(0.0, f64::max);
    Ok(AllocationRule::new(
        move |b| {
            let mut deviated = bids.clone();
            deviated[bidder] = b;
            domain.level(&domain.allocate(&deviated), bidder)
        },
        if top > 0.0 { top } else { 1.0 },
    )?)
}

fn verify(config: &RunConfig, path: &Path) -> Result<(), CliError> {
    let file = read_instance(path)?;
    let model = config.preference()?;
    let grid = config.grid()?;
    let eps = config.eps.unwrap_or(DEFAULT_EPS);
    let report = match &file.instance {
        Instance::General { values, .. } => {
            let mechanism = general_mechanism(config, values)?;
            check(&mechanism, &model, values.rows(), grid.as_ref(), eps)?
        }
        Instance::Slot(instance) => {
            let mechanism = SlotMechanism::new(instance, slot_rule(config)?);
            check(
                &mechanism,
                &model,
                instance.true_types(),
                grid.as_ref(),
                eps,
            )?
        }
    };
    output::emit(
        config.output.as_deref(),
        &output::deviation_csv(&report.reports)?,
    )?;
    let found = report.profitable().next().map(|r| {
        format!(
            "bidder {} gains by reporting {:?}: {:?} beats truthful {:?}",
            r.bidder, r.best_bid, r.best_bundle, r.truthful_bundle
        )
    });
    match found {
        Some(msg) => Err(CliError::Deviation(msg)),
        None => Ok(()),
    }
}

fn check<M: Mechanism>(
    mechanism: &M,
    model: &vm_auctions::PreferenceModel,
    truths: &[M::Bid],
    grid: Option<&vm_auctions::verification::GridSpec>,
    eps: f64,
) -> Result<DsicReport, CliError> {
    Ok(dsic_ae_check(mechanism, model, truths, grid, eps)?)
}

fn robustness(config: &RunConfig, path: &Path, per_auction: Option<&Path>) -> Result<(), CliError> {
    let grid = config.grid()?.expect("gammas are always set");
    let gammas = grid.points();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let files =
        parse_dataset(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut ids = Vec::with_capacity(files.len());
    let mut dataset = Vec::with_capacity(files.len());
    for (k, file) in files.into_iter().enumerate() {
        match file.instance {
            Instance::Slot(inst) => {
                ids.push(file.id.unwrap_or_else(|| format!("{k}")));
                dataset.push(inst);
            }
            Instance::General { .. } => {
                return Err(CliError::Input(format!(
                    "{}: item {} is not a slot instance",
                    path.display(),
                    k + 1
                )));
            }
        }
    }
    let report = gamma_curve(&dataset, &gammas)?;
    output::emit(config.output.as_deref(), &output::curve_csv(&report)?)?;
    if let Some(per_auction) = per_auction {
        output::emit(Some(per_auction), &output::per_auction_csv(&ids, &report)?)?;
    }
    Ok(())
}
