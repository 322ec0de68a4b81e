//! Run configuration: the JSON file format and the command-line overrides.

use std::path::Path;
use std::sync::Arc;

use central_approx::dense::terms::{FieldTerm, Monomial, OverlapPolynomial, PSpin, QuadraticOverlap, ZeroGlobal, ZeroLocal};
use central_approx::dense::{DenseModelSpec, GlobalTerm, LocalTerm};
use central_approx::factor_graph::EnsembleSpec;
use central_approx::replica::RsParams;
use central_approx::Alphabet;
use serde::Deserialize;

use crate::report::Format;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub model: Option<ModelBlock>,
    #[serde(default, rename = "N")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub guards: Guards,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Guards {
    /// Cap on the number of types an exact sum may enumerate.
    pub type_limit: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ModelBlock {
    Dense(DenseBlock),
    FactorGraph(FgBlock),
    Rs(RsBlock),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseBlock {
    pub n: Option<usize>,
    pub alphabet: Option<AlphabetSpec>,
    pub local: Option<LocalSpec>,
    pub global: Option<GlobalSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FgBlock {
    pub l: Option<usize>,
    pub r: Option<usize>,
    pub alphabet: Option<AlphabetSpec>,
    pub factor: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsBlock {
    pub n: Option<f64>,
    pub q: Option<f64>,
    pub r: Option<f64>,
    #[serde(rename = "P")]
    pub p_coef: Option<f64>,
    #[serde(rename = "Q")]
    pub q_coef: Option<f64>,
    #[serde(rename = "R")]
    pub r_coef: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AlphabetSpec {
    Named(String),
    Values(Vec<f64>),
}

impl AlphabetSpec {
    pub fn parse(text: &str) -> Result<Self, String> {
        match text {
            "spins" | "binary" => Ok(AlphabetSpec::Named(text.to_string())),
            _ => text
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad alphabet value '{t}'")))
                .collect::<Result<Vec<_>, _>>()
                .map(AlphabetSpec::Values),
        }
    }

    pub fn build(&self) -> Result<Alphabet, String> {
        match self {
            AlphabetSpec::Named(n) if n == "spins" => Ok(Alphabet::spins()),
            AlphabetSpec::Named(n) if n == "binary" => Ok(Alphabet::binary()),
            AlphabetSpec::Named(n) => Err(format!("unknown alphabet '{n}' (expected spins, binary or a value list)")),
            AlphabetSpec::Values(v) => Alphabet::new(v.clone()).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LocalSpec {
    Zero,
    Field { h: f64 },
}

impl LocalSpec {
    /// `zero` or `field:<h>`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let (kind, args) = split_kind(text);
        match (kind, args.as_slice()) {
            ("zero", []) => Ok(LocalSpec::Zero),
            ("field", [h]) => Ok(LocalSpec::Field { h: *h }),
            _ => Err(format!("bad local term '{text}' (expected zero or field:<h>)")),
        }
    }

    fn build(&self) -> Arc<dyn LocalTerm> {
        match *self {
            LocalSpec::Zero => Arc::new(ZeroLocal),
            LocalSpec::Field { h } => Arc::new(FieldTerm { h }),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GlobalSpec {
    Zero,
    Quadratic { diag: f64, offdiag: f64 },
    Pspin { beta: f64, p: u32 },
    Polynomial { terms: Vec<Monomial> },
}

impl GlobalSpec {
    /// `zero`, `quadratic:<diag>,<offdiag>` or `pspin:<beta>,<p>`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let (kind, args) = split_kind(text);
        match (kind, args.as_slice()) {
            ("zero", []) => Ok(GlobalSpec::Zero),
            ("quadratic", [d, o]) => Ok(GlobalSpec::Quadratic { diag: *d, offdiag: *o }),
            ("pspin", [b, p]) if p.fract() == 0.0 && *p >= 1.0 => Ok(GlobalSpec::Pspin { beta: *b, p: *p as u32 }),
            _ => Err(format!("bad global term '{text}' (expected zero, quadratic:<diag>,<offdiag> or pspin:<beta>,<p>)")),
        }
    }

    fn build(&self, n: usize) -> Arc<dyn GlobalTerm> {
        match self {
            GlobalSpec::Zero => Arc::new(ZeroGlobal),
            GlobalSpec::Quadratic { diag, offdiag } => Arc::new(QuadraticOverlap::new(n, *diag, *offdiag)),
            GlobalSpec::Pspin { beta, p } => Arc::new(PSpin::new(n, *beta, *p)),
            GlobalSpec::Polynomial { terms } => Arc::new(OverlapPolynomial { terms: terms.clone() }),
        }
    }
}

fn split_kind(text: &str) -> (&str, Vec<f64>) {
    match text.split_once(':') {
        None => (text, Vec::new()),
        Some((kind, rest)) => {
            let args: Option<Vec<f64>> = rest.split(',').map(|t| t.trim().parse().ok()).collect();
            // An unparsable argument list matches no pattern.
            (kind, args.unwrap_or_else(|| vec![f64::NAN; 8]))
        }
    }
}

pub fn load(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, String> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| format!("invalid config: {e}"))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", cfg.schema_version));
    }
    Ok(cfg)
}

impl RunConfig {
    /// What runs without `--config`.
    pub fn empty() -> Self {
        RunConfig { schema_version: SCHEMA_VERSION, command: None, model: None, n_list: None, format: None, seed: None, guards: Guards::default() }
    }

    pub fn dense_block(&self) -> Result<DenseBlock, String> {
        match &self.model {
            None => Ok(DenseBlock::default()),
            Some(ModelBlock::Dense(b)) => Ok(b.clone()),
            Some(_) => Err("this command needs a dense model block".into()),
        }
    }

    pub fn fg_block(&self) -> Result<FgBlock, String> {
        match &self.model {
            None => Ok(FgBlock::default()),
            Some(ModelBlock::FactorGraph(b)) => Ok(b.clone()),
            Some(_) => Err("this command needs a factor-graph model block".into()),
        }
    }

    pub fn rs_block(&self) -> Result<RsBlock, String> {
        match &self.model {
            None => Ok(RsBlock::default()),
            Some(ModelBlock::Rs(b)) => Ok(b.clone()),
            Some(_) => Err("this command needs an rs model block".into()),
        }
    }
}

impl DenseBlock {
    pub fn build(&self) -> Result<DenseModelSpec, String> {
        let n = self.n.ok_or("dense model needs n (replica count)")?;
        let alphabet = self.alphabet.clone().unwrap_or(AlphabetSpec::Named("spins".into())).build()?;
        let local = self.local.clone().unwrap_or(LocalSpec::Zero).build();
        let global = self.global.as_ref().ok_or("dense model needs a global term g")?.build(n);
        DenseModelSpec::new(n, alphabet, local, global).map_err(|e| e.to_string())
    }
}

impl FgBlock {
    pub fn build(&self) -> Result<EnsembleSpec, String> {
        let l = self.l.ok_or("factor-graph model needs l")?;
        let r = self.r.ok_or("factor-graph model needs r")?;
        let alphabet = self.alphabet.clone().unwrap_or(AlphabetSpec::Named("binary".into())).build()?;
        let factor = self.factor.as_deref().unwrap_or("parity");
        EnsembleSpec::from_name(l, r, alphabet, factor).map_err(|e| e.to_string())
    }
}

impl RsBlock {
    /// `(q, r, P, Q, R)` with unset entries zero.
    pub fn params(&self) -> Result<RsParams, String> {
        let z = |x: Option<f64>| x.unwrap_or(0.0);
        RsParams::new(z(self.q), z(self.r), z(self.p_coef), z(self.q_coef), z(self.r_coef)).map_err(|e| e.to_string())
    }
}
