mod args;
mod commands;
mod config;
mod report;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{Ctx, Failure};
use config::RunConfig;
use report::{Format, Report};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::DenseExact { .. } => "dense-exact",
        Command::DenseAsymptotic(_) => "dense-asymptotic",
        Command::DenseCompare(_) => "dense-compare",
        Command::RsDet(_) => "rs-det",
        Command::RsCorrection(_) => "rs-correction",
        Command::Sk(_) => "sk",
        Command::FgExact { .. } => "fg-exact",
        Command::FgAsymptotic(_) => "fg-asymptotic",
        Command::FgCompare(_) => "fg-compare",
        Command::FgS(_) => "fg-s",
        Command::LdpcCodewords(_) => "ldpc-codewords",
        Command::CltCov(_) => "clt-cov",
        Command::Selftest { .. } => "selftest",
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(text) = std::env::var("CENTRAL_APPROX_THREADS") else { return Ok(()) };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("CENTRAL_APPROX_THREADS must be a positive integer (got '{text}')"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

/// The report plus whether every check passed (false only for a failing selftest).
fn dispatch(ctx: &Ctx, command: Command) -> Result<(Report, bool), Failure> {
    let ok = |r: Report| Ok((r, true));
    match command {
        Command::DenseExact { model, brute } => ok(commands::dense_exact(ctx, &model, brute)?),
        Command::DenseAsymptotic(a) => ok(commands::dense_asymptotic(ctx, &a)?),
        Command::DenseCompare(a) => ok(commands::dense_compare(ctx, &a)?),
        Command::RsDet(a) => ok(commands::rs_det(ctx, &a)?),
        Command::RsCorrection(a) => ok(commands::rs_correction(ctx, &a)?),
        Command::Sk(a) => ok(commands::sk(ctx, &a)?),
        Command::FgExact { model, rational } => ok(commands::fg_exact(ctx, &model, rational)?),
        Command::FgAsymptotic(a) => ok(commands::fg_asymptotic(ctx, &a)?),
        Command::FgCompare(a) => ok(commands::fg_compare(ctx, &a)?),
        Command::FgS(a) => ok(commands::fg_s(ctx, &a)?),
        Command::LdpcCodewords(a) => ok(commands::ldpc(ctx, &a)?),
        Command::CltCov(a) => ok(commands::clt_cov(ctx, &a)?),
        Command::Selftest { only } => commands::selftest(&only),
    }
}

fn emit(report: &Report, format: Format, out: Option<&std::path::Path>) -> Result<(), String> {
    let text = report.render(format);
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let name = command_name(&cli.command);
    let cfg = match &cli.config {
        Some(path) => config::load(path),
        None => Ok(RunConfig::empty()),
    }
    .and_then(|cfg| match &cfg.command {
        Some(c) if c != name => Err(format!("config is for command '{c}', not '{name}'")),
        _ => Ok(cfg),
    });
    let format = cli.format.or(cfg.as_ref().ok().and_then(|c| c.format)).unwrap_or(Format::Csv);
    let out = cli.out.clone();

    let result = cfg.map_err(Failure::Validation).and_then(|cfg| {
        configure_threads().map_err(Failure::Validation)?;
        let seed = cli.seed.or(cfg.seed).unwrap_or(0);
        dispatch(&Ctx { cfg, seed }, cli.command)
    });
    let (report, code) = match result {
        Ok((report, true)) => (report, 0),
        Ok((report, false)) => (report, EXIT_NUMERICAL),
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            (Report::failure(name, msg), EXIT_VALIDATION)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            (Report::failure(name, msg), EXIT_NUMERICAL)
        }
    };
    if let Err(msg) = emit(&report, format, out.as_deref()) {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_VALIDATION);
    }
    ExitCode::from(code)
}
