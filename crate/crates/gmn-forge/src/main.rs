use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gmn_core::verify::Family;
use gmn_forge::commands::{
    cmd_check_data, cmd_eval, cmd_export, cmd_frobenius, cmd_region, cmd_verify, Common, FamilyChoice, FormChoice,
    Outcome,
};
use gmn_forge::error::CliError;

/// Model geometries of multi-Ooguri-Vafa type: evaluation and certificates.
///
/// Exit codes: 0 all checks pass, 1 a certificate fails, 2 invalid model or input.
/// Log level from GMN_FORGE_LOG (default warn).
#[derive(Parser)]
#[command(name = "gmn-forge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArgs {
    /// Model file or run configuration (JSON).
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated twistor parameters, e.g. `0.5,1+2i,-0.3i`.
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    zeta: Option<String>,
    /// `rect:X0:X1:NX,Y0:Y1:NY` or `polar:R0:R1:NR,A0:A1:NA` over the first base coordinate.
    #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
    grid: Option<String>,
    /// Tolerance override (closedness for verify).
    #[arg(long, value_name = "X")]
    tol: Option<f64>,
    /// Sample seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

impl From<ModelArgs> for Common {
    fn from(a: ModelArgs) -> Self {
        Common { model: a.model, out: a.out, zeta: a.zeta, grid: a.grid, tol: a.tol, seed: a.seed, jobs: a.jobs }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    SemiFlat,
    Model,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Varpi,
    OmegaPlus,
}

#[derive(Subcommand)]
enum Command {
    /// Frobenius basis of an antisymmetric integer pairing.
    Frobenius {
        /// Lattice file: a matrix or {"pairing": matrix}.
        input: PathBuf,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Validate a model against the standing assumptions.
    CheckData {
        #[command(flatten)]
        args: ModelArgs,
    },
    /// V, A and 2-form components on a grid (CSV).
    Eval {
        #[command(flatten)]
        args: ModelArgs,
        /// Twistor family.
        #[arg(long, value_enum, default_value = "model")]
        family: FamilyArg,
        /// 2-form to report.
        #[arg(long, value_enum, default_value = "varpi")]
        form: FormArg,
    },
    /// Certificate bundle with negative controls.
    Verify {
        #[command(flatten)]
        args: ModelArgs,
        /// Families to certify.
        #[arg(long, value_enum, default_value = "all")]
        family: FamilyArg,
    },
    /// Positivity region: the root r0 and the certified annulus.
    Region {
        #[command(flatten)]
        args: ModelArgs,
    },
    /// Plot-ready data files.
    Export {
        #[command(flatten)]
        args: ModelArgs,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Frobenius { input, out } => cmd_frobenius(&input, out.as_deref()),
        Command::CheckData { args } => cmd_check_data(&args.into()),
        Command::Eval { args, family, form } => {
            let family = match family {
                FamilyArg::SemiFlat => Family::SemiFlat,
                FamilyArg::Model => Family::Model,
                FamilyArg::All => return Err(CliError::Usage(String::from("eval takes one family"))),
            };
            let form = match form {
                FormArg::Varpi => FormChoice::Varpi,
                FormArg::OmegaPlus => FormChoice::OmegaPlus,
            };
            cmd_eval(&args.into(), family, form)
        }
        Command::Verify { args, family } => {
            let choice = match family {
                FamilyArg::SemiFlat => FamilyChoice::SemiFlat,
                FamilyArg::Model => FamilyChoice::Model,
                FamilyArg::All => FamilyChoice::All,
            };
            cmd_verify(&args.into(), choice)
        }
        Command::Region { args } => cmd_region(&args.into()),
        Command::Export { args } => cmd_export(&args.into()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GMN_FORGE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            let text = match &out.csv {
                Some(csv) => csv.clone(),
                None => format!("{}\n", serde_json::to_string_pretty(&out.report).unwrap_or_default()),
            };
            // a closed pipe is not an error of the run
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
