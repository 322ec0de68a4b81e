//! One function per subcommand; each builds a [`Report`].

use central_approx::clt::{
    dense_type_covariance, empirical_type_covariance_oracle, fg_exact_covariances, fg_type_covariances,
    overlap_covariance, CovarianceResult,
};
use central_approx::dense::{
    brute_force_expectation, central_approx_constant, exact_type_sum_with_limit, solve_variational_with,
    CentralApproxResult, DenseModelSpec, SolverOptions,
};
use central_approx::factor_graph::{
    exact_expected_z_rational, exact_expected_z_with_limit, fg_central_constant, lattice_step_report,
    solve_bethe_with, EnsembleSpec, FgCentralResult, EXACT_RATIONAL_MAX_EDGES,
};
use central_approx::factor_graph::{ldpc_exact_codewords, ldpc_expected_codewords};
use central_approx::replica::{
    build_pqr_matrix, pqr_eigenvalues, rs_correction_n0, rs_determinant, rs_determinant_continued,
    sk_paramagnetic_correction,
};
use central_approx::selftest;
use central_approx::types::DEFAULT_TYPE_LIMIT;
use central_approx::{Error, Matrix};

use crate::args::{CltArgs, CltKind, DenseArgs, FgArgs, LdpcArgs, RsArgs, SkArgs};
use crate::config::{AlphabetSpec, DenseBlock, FgBlock, GlobalSpec, LocalSpec, RsBlock, RunConfig};
use crate::report::{Report, Value};

/// Why a command failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Validation(s)
    }
}

pub type Outcome = Result<Report, Failure>;

pub struct Ctx {
    pub cfg: RunConfig,
    pub seed: u64,
}

impl Ctx {
    fn solver(&self) -> SolverOptions {
        SolverOptions { seed: self.seed, ..SolverOptions::default() }
    }

    fn type_limit(&self) -> f64 {
        self.cfg.guards.type_limit.unwrap_or(DEFAULT_TYPE_LIMIT)
    }

    fn n_list(&self, flag: &Option<Vec<usize>>) -> Result<Vec<usize>, Failure> {
        let list = flag.clone().or_else(|| self.cfg.n_list.clone()).ok_or("this command needs --N".to_string())?;
        if list.is_empty() || list.contains(&0) {
            return Err(Failure::Validation("--N entries must be positive".into()));
        }
        Ok(list)
    }

    fn dense(&self, a: &DenseArgs) -> Result<DenseModelSpec, Failure> {
        let base = self.cfg.dense_block()?;
        let block = DenseBlock {
            n: a.n.or(base.n),
            alphabet: a.alphabet.as_deref().map(AlphabetSpec::parse).transpose()?.or(base.alphabet),
            local: a.f.as_deref().map(LocalSpec::parse).transpose()?.or(base.local),
            global: a.g.as_deref().map(GlobalSpec::parse).transpose()?.or(base.global),
        };
        Ok(block.build()?)
    }

    fn ensemble(&self, a: &FgArgs) -> Result<EnsembleSpec, Failure> {
        let base = self.cfg.fg_block()?;
        let block = FgBlock {
            l: a.l.or(base.l),
            r: a.r.or(base.r),
            alphabet: a.alphabet.as_deref().map(AlphabetSpec::parse).transpose()?.or(base.alphabet),
            factor: a.factor.clone().or(base.factor),
        };
        Ok(block.build()?)
    }

    fn rs(&self, a: &RsArgs) -> Result<RsBlock, Failure> {
        let base = self.cfg.rs_block()?;
        Ok(RsBlock {
            n: a.n.or(base.n),
            q: a.q.or(base.q),
            r: a.r.or(base.r),
            p_coef: a.p.or(base.p_coef),
            q_coef: a.q_coef.or(base.q_coef),
            r_coef: a.r_coef.or(base.r_coef),
            beta: base.beta,
        })
    }

    fn dense_central(&self, spec: &DenseModelSpec) -> Result<CentralApproxResult, Failure> {
        let sol = solve_variational_with(spec, &self.solver())?;
        Ok(central_approx_constant(spec, &sol)?)
    }

    fn fg_central(&self, ens: &EnsembleSpec) -> Result<FgCentralResult, Failure> {
        let sol = solve_bethe_with(ens, &self.solver())?;
        Ok(fg_central_constant(ens, &sol)?)
    }
}

fn list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|&x| crate::report::format_float(x)).collect();
    format!("[{}]", parts.join(" "))
}

pub fn dense_exact(ctx: &Ctx, a: &DenseArgs, brute: bool) -> Outcome {
    let spec = ctx.dense(a)?;
    let cols: &[&str] = if brute { &["N", "log_exact", "log_brute"] } else { &["N", "log_exact"] };
    let mut rep = Report::new("dense-exact", cols);
    for n in ctx.n_list(&a.n_list)? {
        let mut row = vec![Value::from(n), Value::from(exact_type_sum_with_limit(&spec, n, ctx.type_limit())?)];
        if brute {
            row.push(Value::from(brute_force_expectation(&spec, n)?));
        }
        rep.push(row);
    }
    Ok(rep)
}

fn dense_meta(rep: &mut Report, c: &CentralApproxResult) {
    rep.meta("exponent", c.exponent);
    rep.meta("log_constant", c.log_constant);
    rep.meta("det", c.det_value);
    rep.meta("maximizers", c.maximizers.len());
    rep.meta("nu_star", list(c.maximizers[0].as_slice()));
}

pub fn dense_asymptotic(ctx: &Ctx, a: &DenseArgs) -> Outcome {
    let spec = ctx.dense(a)?;
    let c = ctx.dense_central(&spec)?;
    let mut rep = Report::new("dense-asymptotic", &["N", "log_asymptotic"]);
    dense_meta(&mut rep, &c);
    for n in ctx.n_list(&a.n_list)? {
        rep.push(vec![n.into(), c.log_estimate(n).into()]);
    }
    Ok(rep)
}

pub fn dense_compare(ctx: &Ctx, a: &DenseArgs) -> Outcome {
    let spec = ctx.dense(a)?;
    let c = ctx.dense_central(&spec)?;
    let mut rep = Report::new("dense-compare", &["N", "log_exact", "log_asymptotic", "ratio"]);
    dense_meta(&mut rep, &c);
    for n in ctx.n_list(&a.n_list)? {
        let exact = exact_type_sum_with_limit(&spec, n, ctx.type_limit())?;
        let est = c.log_estimate(n);
        rep.push(vec![n.into(), exact.into(), est.into(), (exact - est).exp().into()]);
    }
    Ok(rep)
}

pub fn rs_det(ctx: &Ctx, a: &RsArgs) -> Outcome {
    let block = ctx.rs(a)?;
    let p = block.params()?;
    let n = block.n.ok_or("rs-det needs --n".to_string())?;
    let mut rep = Report::new("rs-det", &["n", "det_closed_form", "det_direct"]);
    let (l1, l2, l3) = pqr_eigenvalues(n, p.p_coef, p.q_coef, p.r_coef);
    rep.meta("eigenvalues_d2g", list(&[l1, l2, l3]));
    let (a1, b1, c1) = p.fluctuation_pattern();
    let (u1, u2, u3) = pqr_eigenvalues(n, a1, b1, c1);
    rep.meta("eigenvalues_fluctuation", list(&[u1, u2, u3]));
    let integral = n.fract() == 0.0 && (2.0..=64.0).contains(&n);
    if integral {
        let k = n as usize;
        let ag = build_pqr_matrix(k, p.p_coef, p.q_coef, p.r_coef)?;
        let au = build_pqr_matrix(k, a1, b1, c1)?;
        let direct = (&Matrix::identity(ag.rows()) - &(&ag * &au)).det()?;
        rep.push(vec![n.into(), rs_determinant(k, &p)?.into(), direct.into()]);
    } else {
        rep.push(vec![n.into(), rs_determinant_continued(n, &p).into(), "n/a".into()]);
    }
    Ok(rep)
}

pub fn rs_correction(ctx: &Ctx, a: &RsArgs) -> Outcome {
    let p = ctx.rs(a)?.params()?;
    let mut rep = Report::new("rs-correction", &["N", "correction"]);
    for n in ctx.n_list(&a.n_list)? {
        rep.push(vec![n.into(), rs_correction_n0(n, &p)?.into()]);
    }
    Ok(rep)
}

pub fn sk(ctx: &Ctx, a: &SkArgs) -> Outcome {
    let beta = a.beta.or(ctx.cfg.rs_block()?.beta).ok_or("sk needs --beta".to_string())?;
    let mut rep = Report::new("sk", &["beta", "N", "correction"]);
    for n in ctx.n_list(&a.n_list)? {
        rep.push(vec![beta.into(), n.into(), sk_paramagnetic_correction(beta, n)?.into()]);
    }
    Ok(rep)
}

pub fn fg_exact(ctx: &Ctx, a: &FgArgs, rational: bool) -> Outcome {
    let ens = ctx.ensemble(a)?;
    let cols: &[&str] = if rational { &["N", "log_expected_z", "expected_z"] } else { &["N", "log_expected_z"] };
    let mut rep = Report::new("fg-exact", cols);
    for n in ctx.n_list(&a.n_list)? {
        let mut row = vec![n.into(), exact_expected_z_with_limit(&ens, n, ctx.type_limit())?.into()];
        if rational {
            let text = if n * ens.l() <= EXACT_RATIONAL_MAX_EDGES {
                exact_expected_z_rational(&ens, n)?.to_string()
            } else {
                "n/a".to_string()
            };
            row.push(text.into());
        }
        rep.push(row);
    }
    Ok(rep)
}

fn fg_meta(rep: &mut Report, c: &FgCentralResult) {
    rep.meta("exponent", c.exponent);
    rep.meta("log_constant", c.log_constant);
    rep.meta("s", c.lattice.s);
    rep.meta("dets", list(&c.dets));
}

pub fn fg_asymptotic(ctx: &Ctx, a: &FgArgs) -> Outcome {
    let ens = ctx.ensemble(a)?;
    let c = ctx.fg_central(&ens)?;
    let mut rep = Report::new("fg-asymptotic", &["N", "log_estimate"]);
    fg_meta(&mut rep, &c);
    for n in ctx.n_list(&a.n_list)? {
        ens.factor_count(n)?;
        rep.push(vec![n.into(), c.log_estimate(n).into()]);
    }
    Ok(rep)
}

pub fn fg_compare(ctx: &Ctx, a: &FgArgs) -> Outcome {
    let ens = ctx.ensemble(a)?;
    let c = ctx.fg_central(&ens)?;
    let mut rep = Report::new("fg-compare", &["N", "log_exact", "log_estimate", "ratio"]);
    fg_meta(&mut rep, &c);
    for n in ctx.n_list(&a.n_list)? {
        let exact = exact_expected_z_with_limit(&ens, n, ctx.type_limit())?;
        let est = c.log_estimate(n);
        rep.push(vec![n.into(), exact.into(), est.into(), (exact - est).exp().into()]);
    }
    Ok(rep)
}

pub fn fg_s(ctx: &Ctx, a: &FgArgs) -> Outcome {
    let ens = ctx.ensemble(a)?;
    let step = lattice_step_report(&ens);
    let mut rep = Report::new("fg-s", &["method", "s", "agrees"]);
    rep.meta("s", step.s);
    rep.meta("divisors", format!("{:?}", step.divisors));
    rep.meta("density_half_width", step.density_half_width as u64);
    rep.push(vec!["snf".into(), step.s.into(), true.into()]);
    match step.prime_rank_s {
        Some(p) => rep.push(vec!["prime-rank".into(), p.into(), (p == step.s).into()]),
        None => rep.push(vec!["prime-rank".into(), "n/a".into(), "n/a".into()]),
    }
    match step.binary_gcd_s {
        Some(g) => rep.push(vec!["gcd".into(), g.into(), (g == step.s).into()]),
        None => rep.push(vec!["gcd".into(), "n/a".into(), "n/a".into()]),
    }
    rep.push(vec!["empirical".into(), (1.0 / step.density).into(), step.density_agrees().into()]);
    Ok(rep)
}

pub fn ldpc(ctx: &Ctx, a: &LdpcArgs) -> Outcome {
    let base = ctx.cfg.fg_block()?;
    let l = a.l.or(base.l).ok_or("ldpc-codewords needs --l".to_string())?;
    let r = a.r.or(base.r).ok_or("ldpc-codewords needs --r".to_string())?;
    let omegas: Vec<Option<f64>> = match &a.omega {
        Some(v) => v.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut cols = vec!["N", "omega", "weight", "log_count", "growth_rate", "log_constant"];
    if a.exact {
        cols.push("log_exact");
    }
    let mut rep = Report::new("ldpc-codewords", &cols);
    for n in ctx.n_list(&a.n_list)? {
        for &omega in &omegas {
            let res = ldpc_expected_codewords(l, r, n, omega)?;
            let mut row = vec![
                n.into(),
                omega.map_or(Value::from("total"), Value::from),
                res.weight.map_or(Value::from("all"), Value::from),
                res.log_count.into(),
                res.growth_rate.into(),
                res.log_constant.into(),
            ];
            if a.exact {
                row.push(ldpc_exact_codewords(l, r, n, omega)?.into());
            }
            rep.push(row);
        }
    }
    Ok(rep)
}

fn covariance_report(kind: &str, cov: &CovarianceResult, rep: &mut Report) {
    if let Some(rank) = cov.rank {
        rep.meta(&format!("{kind}_rank"), rank);
    }
    if let (Some(lo), Some(hi)) = (cov.min_eigenvalue, cov.max_eigenvalue) {
        rep.meta(&format!("{kind}_min_eigenvalue"), lo);
        rep.meta(&format!("{kind}_max_eigenvalue"), hi);
    }
    rep.meta(&format!("{kind}_asymmetry"), cov.asymmetry);
    for (i, ri) in cov.labels.iter().enumerate() {
        for (j, cj) in cov.labels.iter().enumerate() {
            rep.push(vec![kind.into(), ri.as_str().into(), cj.as_str().into(), cov.matrix[(i, j)].into()]);
        }
    }
}

pub fn clt_cov(ctx: &Ctx, a: &CltArgs) -> Outcome {
    let mut rep = Report::new("clt-cov", &["kind", "row", "col", "value"]);
    match a.kind {
        CltKind::Type | CltKind::Overlap => {
            let spec = ctx.dense(&a.dense())?;
            let nu = solve_variational_with(&spec, &ctx.solver())?.nu_star;
            rep.meta("nu_star", list(nu.as_slice()));
            let cov = match (a.kind, a.exact_n) {
                (CltKind::Type, None) => dense_type_covariance(&spec, &nu)?,
                (CltKind::Type, Some(n)) => empirical_type_covariance_oracle(&spec, n)?,
                (_, Some(_)) => return Err(Failure::Validation("--exact-N applies to type, variable and factor".into())),
                _ => overlap_covariance(&spec, &nu, a.m.unwrap_or(spec.replicas()))?,
            };
            let kind = if a.kind == CltKind::Type { "type" } else { "overlap" };
            covariance_report(kind, &cov, &mut rep);
        }
        CltKind::Variable | CltKind::Factor => {
            let ens = ctx.ensemble(&a.fg())?;
            let covs = match a.exact_n {
                None => fg_type_covariances(&ens, &solve_bethe_with(&ens, &ctx.solver())?)?,
                Some(n) => fg_exact_covariances(&ens, n)?,
            };
            if a.kind == CltKind::Variable {
                covariance_report("variable", &covs.variable, &mut rep);
            } else {
                covariance_report("factor", &covs.factor, &mut rep);
            }
        }
    }
    Ok(rep)
}

/// Runs the checks; the second value is false if any failed.
pub fn selftest(ids: &[u8]) -> Result<(Report, bool), Failure> {
    let ids = if ids.is_empty() { selftest::check_ids() } else { ids.to_vec() };
    let mut rep = Report::new("selftest", &["criterion", "name", "passed", "detail"]);
    let mut all = true;
    for id in ids {
        let o = selftest::run_check(id).ok_or_else(|| Failure::Validation(format!("unknown check {id}")))?;
        // Timings go to stderr so the report stays reproducible.
        eprintln!("[{}] criterion {:>2} {:<36} {:.3}s (budget {}s)", if o.passed { "pass" } else { "FAIL" }, o.id, o.name, o.seconds, o.budget_seconds);
        all &= o.passed;
        rep.push(vec![(o.id as u64).into(), o.name.into(), o.passed.into(), o.detail.into()]);
    }
    Ok((rep, all))
}
