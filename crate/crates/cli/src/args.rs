use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::report::Format;

#[derive(Debug, Parser)]
#[command(
    name = "central-approx",
    version,
    about = "Exponents and constant factors of partition-function asymptotics, checked against exact sums"
)]
pub struct Cli {
    /// JSON run configuration; command-line flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed of the solvers' random restarts.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// log E[Zⁿ] by exact summation over types.
    DenseExact {
        #[command(flatten)]
        model: DenseArgs,
        /// Also sum over all |Xⁿ|^N configurations.
        #[arg(long)]
        brute: bool,
    },
    /// N F + log C from the central approximation.
    DenseAsymptotic(DenseArgs),
    /// Exact and asymptotic side by side, with their ratio.
    DenseCompare(DenseArgs),
    /// Replica-symmetric determinant, closed form and direct.
    RsDet(RsArgs),
    /// Finite-size correction of the replica-symmetric free energy at n → 0.
    RsCorrection(RsArgs),
    /// SK paramagnetic correction (1/(4N)) log(1 − β²).
    Sk(SkArgs),
    /// log E[Z] of the configuration-model ensemble, exactly.
    FgExact {
        #[command(flatten)]
        model: FgArgs,
        /// Also print E[Z] as an exact fraction.
        #[arg(long)]
        rational: bool,
    },
    /// Bethe exponent plus the constant factor.
    FgAsymptotic(FgArgs),
    /// Exact and asymptotic side by side, with their ratio.
    FgCompare(FgArgs),
    /// Step size s by every available route.
    FgS(FgArgs),
    /// Expected codeword counts of (l, r)-regular LDPC ensembles.
    LdpcCodewords(LdpcArgs),
    /// Limiting covariance matrices (long format: kind, row, col, value).
    CltCov(CltArgs),
    /// Runs the invariant battery; nonzero exit on any failure.
    Selftest {
        /// Only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct DenseArgs {
    /// Replica count.
    #[arg(long)]
    pub n: Option<usize>,
    /// `spins`, `binary` or comma-separated values.
    #[arg(long)]
    pub alphabet: Option<String>,
    /// Local term: `zero` or `field:<h>`.
    #[arg(long)]
    pub f: Option<String>,
    /// Global term: `zero`, `quadratic:<diag>,<offdiag>` or `pspin:<beta>,<p>`.
    #[arg(long)]
    pub g: Option<String>,
    /// Comma-separated system sizes.
    #[arg(long = "N", value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FgArgs {
    /// Variable degree.
    #[arg(long)]
    pub l: Option<usize>,
    /// Factor degree.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub alphabet: Option<String>,
    /// `parity`, `all-equal`, `uniform` or `table:<path>`.
    #[arg(long)]
    pub factor: Option<String>,
    /// Comma-separated system sizes.
    #[arg(long = "N", value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Args)]
pub struct RsArgs {
    /// Replica count (real values use the continued closed form).
    #[arg(long, allow_negative_numbers = true)]
    pub n: Option<f64>,
    /// Two-replica overlap.
    #[arg(long, allow_negative_numbers = true)]
    pub q: Option<f64>,
    /// Four-replica moment.
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    /// Coefficients P, Q, R of the quadratic form in the overlaps.
    #[arg(long = "P", allow_negative_numbers = true)]
    pub p: Option<f64>,
    #[arg(long = "Q", allow_negative_numbers = true)]
    pub q_coef: Option<f64>,
    #[arg(long = "R", allow_negative_numbers = true)]
    pub r_coef: Option<f64>,
    /// Comma-separated system sizes.
    #[arg(long = "N", value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Args)]
pub struct SkArgs {
    /// Inverse temperature, below 1.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Comma-separated system sizes.
    #[arg(long = "N", value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Args)]
pub struct LdpcArgs {
    /// Variable degree.
    #[arg(long)]
    pub l: Option<usize>,
    /// Factor degree.
    #[arg(long)]
    pub r: Option<usize>,
    /// Relative weights; omit for the total count.
    #[arg(long, value_delimiter = ',')]
    pub omega: Option<Vec<f64>>,
    /// Add the exact count.
    #[arg(long)]
    pub exact: bool,
    /// Comma-separated system sizes.
    #[arg(long = "N", value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CltKind {
    /// Dense-model type covariance.
    Type,
    /// Dense-model overlap covariance.
    Overlap,
    /// Factor-graph variable-type covariance.
    Variable,
    /// Factor-graph factor-type covariance on the support.
    Factor,
}

#[derive(Debug, Clone, Args)]
pub struct CltArgs {
    #[arg(long, value_enum)]
    pub kind: CltKind,
    /// Replicas kept in the overlap covariance.
    #[arg(long)]
    pub m: Option<usize>,
    /// Exact finite-N covariance instead of the limit.
    #[arg(long = "exact-N")]
    pub exact_n: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub g: Option<String>,
    /// Variable degree.
    #[arg(long)]
    pub l: Option<usize>,
    /// Factor degree.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub alphabet: Option<String>,
    #[arg(long)]
    pub factor: Option<String>,
}

impl CltArgs {
    pub fn dense(&self) -> DenseArgs {
        DenseArgs { n: self.n, alphabet: self.alphabet.clone(), f: self.f.clone(), g: self.g.clone(), n_list: None }
    }

    pub fn fg(&self) -> FgArgs {
        FgArgs { l: self.l, r: self.r, alphabet: self.alphabet.clone(), factor: self.factor.clone(), n_list: None }
    }
}
