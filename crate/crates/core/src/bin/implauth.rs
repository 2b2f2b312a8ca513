use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use implauth_core::auth::SimilarityTable;
use implauth_core::client::{self, Sample};
use implauth_core::harness::bench::{self, BenchConfig};
use implauth_core::harness::oracle;
use implauth_core::inputs::{self, TokenEncoding};
use implauth_core::profile::{FeatureSet, Mode, SetupParams, SolverVariant};
use implauth_core::service::{CarrierConfig, CarrierServer, DEFAULT_LISTEN};
use implauth_core::{Error, Result};

#[derive(Parser)]
#[command(name = "implauth", version, about = "Privacy-preserving implicit authentication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the carrier service.
    Serve {
        #[arg(long, default_value = DEFAULT_LISTEN)]
        listen: String,
        /// Directory holding the encrypted profiles.
        #[arg(long)]
        data: PathBuf,
        /// Seconds an unanswered challenge stays valid.
        #[arg(long, default_value_t = 60)]
        session_timeout: u64,
        /// Deterministic session randomness. Test mode only.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build a profile, upload it and store the device secret.
    Setup(SetupArgs),
    /// Authenticate a fresh sample. Exit status 0 accept, 1 reject, 2 error.
    Auth(AuthArgs),
    /// Time set-up and authentication over a grid of set sizes.
    Bench(BenchArgs),
    /// Plaintext reference scores.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    CaseA,
    CaseB,
    CaseC,
}

#[derive(Args)]
struct InputArgs {
    /// Feature list, one per line (cases A and B).
    #[arg(long, conflicts_with = "vector")]
    features: Option<PathBuf>,
    /// Numeric feature vector (case C).
    #[arg(long)]
    vector: Option<PathBuf>,
    /// Treat feature tokens as decimal integers instead of hashing them.
    #[arg(long)]
    integer_features: bool,
    /// Deterministic randomness. Test mode only.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SetupArgs {
    #[arg(long, default_value = DEFAULT_LISTEN)]
    connect: String,
    #[arg(long)]
    user: String,
    #[arg(long, value_enum, default_value = "case-a")]
    mode: ModeArg,
    /// Upper bound of the similarity weights (case B).
    #[arg(long, default_value_t = 1)]
    max_weight: u64,
    /// Per-feature cap M (case C).
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long, default_value_t = 1024)]
    key_bits: u64,
    #[arg(long, default_value = "closed-form")]
    solver: SolverVariant,
    /// Decision threshold; defaults depend on the mode.
    #[arg(long)]
    threshold: Option<u64>,
    /// Where to write the device secret.
    #[arg(long, default_value = "device.secret")]
    secret: PathBuf,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args)]
struct AuthArgs {
    #[arg(long, default_value = DEFAULT_LISTEN)]
    connect: String,
    #[arg(long, default_value = "device.secret")]
    secret: PathBuf,
    /// Similarity table with lines `y z weight` (case B).
    #[arg(long)]
    similarity: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated set sizes.
    #[arg(long, value_delimiter = ',', default_values_t = bench::REFERENCE_SIZES)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 1024)]
    key_bits: u64,
    #[arg(long, default_value = "closed-form")]
    solver: SolverVariant,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write the records as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// |X ∩ Y| of two feature lists.
    Intersection {
        x: PathBuf,
        y: PathBuf,
        #[arg(long)]
        integer_features: bool,
    },
    /// Weighted similarity sum of two feature lists.
    Weighted {
        x: PathBuf,
        y: PathBuf,
        #[arg(long)]
        similarity: PathBuf,
        #[arg(long)]
        integer_features: bool,
    },
    /// L1 distance of two numeric vectors.
    L1 { u: PathBuf, v: PathBuf },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => {
            warn!("using a fixed seed: output is deterministic and NOT secure");
            ChaCha20Rng::seed_from_u64(s)
        }
        None => ChaCha20Rng::from_entropy(),
    }
}

fn encoding(integer: bool) -> TokenEncoding {
    if integer {
        TokenEncoding::Integer
    } else {
        TokenEncoding::Hashed
    }
}

fn load_sample(input: &InputArgs, mode: Mode) -> Result<FeatureSet> {
    match (mode, &input.features, &input.vector) {
        (Mode::CaseC { features, cap }, _, Some(path)) => {
            let u = inputs::parse_vector(&read(path)?)?;
            if u.len() as u64 != features {
                return Err(Error::InvalidInput(format!("expected {features} numeric features, got {}", u.len())));
            }
            implauth_core::profile::encode_numeric(&u, cap)
        }
        (Mode::CaseC { .. }, _, None) => Err(Error::InvalidInput("case C needs --vector".into())),
        (_, Some(path), _) => inputs::parse_features(&read(path)?, mode, encoding(input.integer_features)),
        (_, None, _) => Err(Error::InvalidInput("--features is required".into())),
    }
}

fn setup(args: SetupArgs) -> Result<()> {
    let features = match args.mode {
        ModeArg::CaseA => load_sample(&args.input, Mode::CaseA)?,
        ModeArg::CaseB => load_sample(&args.input, Mode::CaseB { max_weight: args.max_weight })?,
        ModeArg::CaseC => {
            let cap = args.cap.ok_or_else(|| Error::InvalidInput("case C needs --cap".into()))?;
            let path = args.input.vector.as_ref().ok_or_else(|| Error::InvalidInput("case C needs --vector".into()))?;
            inputs::parse_numeric_features(&read(path)?, cap)?
        }
    };
    let params = SetupParams { key_bits: args.key_bits, solver: args.solver, threshold: args.threshold };
    let secret = client::device_setup(&args.connect, &args.user, &features, &params, &args.secret, &mut rng(args.input.seed))?;
    println!("profile for {} stored ({} values, {}); secret in {}", secret.user_id, features.len(), secret.mode, args.secret.display());
    Ok(())
}

fn authenticate(args: AuthArgs) -> Result<bool> {
    let secret = client::read_secret(&args.secret)?;
    let sample = load_sample(&args.input, secret.mode)?;
    let table: Option<SimilarityTable> = match &args.similarity {
        Some(path) => Some(inputs::parse_similarity(&read(path)?, encoding(args.input.integer_features))?),
        None => None,
    };
    let sample = match &table {
        Some(t) => Sample::Weighted(&sample, t),
        None => Sample::Plain(&sample),
    };
    let decision = client::device_auth(&args.connect, &secret, sample, &mut rng(args.input.seed))?;
    println!("{decision}");
    Ok(decision.accepted)
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let config = BenchConfig {
        sizes: args.sizes,
        key_bits: args.key_bits,
        solver: args.solver,
        repetitions: args.repetitions,
        seed: args.seed,
        threads: args.threads,
    };
    let records = bench::bench_run(&config)?;
    print!("{}", bench::render_table(&records));
    if let Some(path) = args.csv {
        bench::write_csv(&records, fs::File::create(path)?)?;
    }
    Ok(())
}

fn run_oracle(cmd: OracleCommand) -> Result<()> {
    let list = |path: &Path, integer: bool| -> Result<Vec<_>> {
        Ok(inputs::parse_features(&read(path)?, Mode::CaseA, encoding(integer))?.values().to_vec())
    };
    let value = match cmd {
        OracleCommand::Intersection { x, y, integer_features } => {
            oracle::oracle_intersection(&list(&x, integer_features)?, &list(&y, integer_features)?)
        }
        OracleCommand::Weighted { x, y, similarity, integer_features } => {
            let table = inputs::parse_similarity(&read(&similarity)?, encoding(integer_features))?;
            oracle::oracle_weighted(&list(&x, integer_features)?, &list(&y, integer_features)?, |z, b| table.weight(z, b))
        }
        OracleCommand::L1 { u, v } => oracle::oracle_l1(&inputs::parse_vector(&read(&u)?)?, &inputs::parse_vector(&read(&v)?)?)?,
    };
    println!("{value}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Serve { listen, data, session_timeout, seed } => {
            if seed.is_some() {
                warn!("carrier running with a fixed seed: test mode only");
            }
            let config = CarrierConfig { listen, store_root: data, session_timeout: Duration::from_secs(session_timeout), seed };
            CarrierServer::bind(&config).and_then(CarrierServer::run).map(|()| true)
        }
        Command::Setup(args) => setup(args).map(|()| true),
        Command::Auth(args) => authenticate(args),
        Command::Bench(args) => run_bench(args).map(|()| true),
        Command::Oracle(cmd) => run_oracle(cmd).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
