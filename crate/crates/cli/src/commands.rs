//! Argument model, validation and subcommand dispatch.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use slnq_core::bogolyubov::{bogolyubov_search, density_bogolyubov, easy_set_cover, pigeonhole, GroupSet};
use slnq_core::fqlin::DOMAIN_CAP;
use slnq_core::gf::{FieldCtx, SUPPORTED_Q};
use slnq_core::globality::{global_audit, influence_audit, lp_global_audit, zeta_threshold, BumpConfig, GlobalnessReport};
use slnq_core::groups::{group_order, isotypic_refine, GroupKind, GroupTable, LevelBasisSet, LevelMode, LevelOptions, GROUP_CAP};
use slnq_core::scheme::{DegreeMode, FnTable, SchemeCtx, TAU};
use slnq_core::spectra::{count_convolution, mixing_experiment, operator_norm_report, product_mixing};
use slnq_core::suite::{run_criterion, CriterionResult, SuiteOptions, CRITERIA};
use slnq_core::{Error, Result};

use crate::io::{function_csv, parse_inputs, Artifacts, InputKind, Parsed, Target};

pub const DEFAULT_SEED: u64 = 20240611;

#[derive(Parser, Debug)]
#[command(name = "slnq", version, about = "Fourier analysis on L(V,W) and SL_n/GL_n over small finite fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum KindArg {
    Sl,
    Gl,
}

impl From<KindArg> for GroupKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Sl => GroupKind::SL,
            KindArg::Gl => GroupKind::GL,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// field size
    #[arg(long, global = true)]
    pub q: Option<usize>,
    /// dim V, and the matrix size for groups
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// dim W (defaults to n)
    #[arg(long, global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub group: Option<KindArg>,
    /// largest degree / restriction order examined
    #[arg(long, global = true)]
    pub dmax: Option<usize>,
    /// hypercontractive exponents
    #[arg(long, global = true, value_delimiter = ',', default_value = "4,8")]
    pub ell: Vec<u32>,
    /// globalness threshold exponent: order-d restrictions may carry q^{zeta d n} ||f||^2
    #[arg(long, global = true, default_value_t = 0.5)]
    pub zeta: f64,
    /// reporting constant c in the q^{-c d n} operator-norm target
    #[arg(long, global = true, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// cap on scheme size q^{nm}
    #[arg(long, global = true, default_value_t = DOMAIN_CAP as u64)]
    pub cap: u64,
    /// cap on group order
    #[arg(long, global = true, default_value_t = GROUP_CAP as u64)]
    pub group_cap: u64,
    #[arg(long, global = true, env = "SLNQ_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, global = true, env = "SLNQ_THREADS", default_value_t = 1)]
    pub threads: usize,
    /// directory for CSV/JSON artifacts and the manifest
    #[arg(long, global = true, default_value = "slnq-out")]
    pub out: PathBuf,
    /// function CSV (index,re,im)
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true)]
    pub input2: Option<PathBuf>,
    /// set file (one matrix per line)
    #[arg(long, global = true)]
    pub set: Option<PathBuf>,
    #[arg(long, global = true)]
    pub set2: Option<PathBuf>,
    #[arg(long, global = true)]
    pub set3: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// field parameters and additive character table
    FieldInfo,
    /// Fourier spectrum of a function on L(F_q^n, F_q^m)
    Fourier,
    /// degree projection f^{=d} or f^{<=d}
    ProjectDegree {
        #[arg(long)]
        d: usize,
        /// keep rank exactly d instead of rank <= d
        #[arg(long)]
        pure: bool,
    },
    /// exact restriction norms per order, optionally in L^{l'}
    GlobalAudit {
        #[arg(long)]
        lp: Option<f64>,
    },
    /// maximal generalized influences per order
    InfluenceAudit,
    /// level bases of L^2(G)
    Levels {
        #[arg(long)]
        include_dual: bool,
        #[arg(long)]
        twisted: bool,
    },
    /// isotypic refinement of every level
    Isotypic,
    /// operator norms of T_f per level against the trace bound
    Opnorm,
    /// group convolution f * g (or 1_A * 1_B)
    Convolve,
    /// mixing of 1_A * 1_B across levels
    Mixing,
    /// <1_A * 1_B, 1_C> and its level decomposition
    ProductMixing,
    /// Bogolyubov set, best groumvirate, density bump
    Bogolyubov,
    /// approximate-group statistics and easy-set cover
    ApproxGroup,
    /// acceptance criteria table
    Verify {
        /// run only these criteria
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

/// Fully resolved configuration, recorded in the manifest.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub q: usize,
    pub n: usize,
    pub m: usize,
    pub group: GroupKind,
    pub dmax: Option<usize>,
    pub ell: Vec<u32>,
    pub zeta: f64,
    pub c: f64,
    pub seed: u64,
    pub cap: u64,
    pub group_cap: u64,
    pub cache_dir: Option<PathBuf>,
    pub threads: usize,
    pub out: PathBuf,
    pub input: Option<PathBuf>,
    pub input2: Option<PathBuf>,
    pub set: Option<PathBuf>,
    pub set2: Option<PathBuf>,
    pub set3: Option<PathBuf>,
    /// group options given explicitly (restricts `verify` to that group)
    pub group_given: bool,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let c = cli.common;
        let q = c.q.unwrap_or(2);
        let n = c.n.unwrap_or(2);
        let m = c.m.unwrap_or(n);
        if !SUPPORTED_Q.contains(&q) {
            return Err(Error::UnsupportedField(q));
        }
        if n == 0 {
            return Err(Error::Invalid("n must be at least 1".into()));
        }
        if c.threads == 0 {
            return Err(Error::Invalid("--threads must be at least 1".into()));
        }
        if c.ell.iter().any(|&l| l < 3) {
            return Err(Error::Invalid("every ell must be at least 3".into()));
        }
        let group_given = c.q.is_some() || c.n.is_some() || c.group.is_some();
        Ok(RunConfig {
            command: cli.command,
            q,
            n,
            m,
            group: c.group.map(Into::into).unwrap_or(GroupKind::SL),
            dmax: c.dmax,
            ell: c.ell,
            zeta: c.zeta,
            c: c.c,
            seed: c.seed,
            cap: c.cap,
            group_cap: c.group_cap,
            cache_dir: c.cache_dir,
            threads: c.threads,
            out: c.out,
            input: c.input,
            input2: c.input2,
            set: c.set,
            set2: c.set2,
            set3: c.set3,
            group_given,
        })
    }

    fn field(&self) -> Result<Arc<FieldCtx>> {
        Ok(Arc::new(FieldCtx::new(self.q)?))
    }

    fn scheme(&self) -> Result<SchemeCtx> {
        let size = (self.q as u128).checked_pow((self.n * self.m) as u32).unwrap_or(u128::MAX);
        if size > self.cap as u128 {
            return Err(Error::CapExceeded { what: "scheme size q^{nm}", count: size, cap: self.cap as u128 });
        }
        SchemeCtx::with_cap(self.field()?, self.n, self.m, self.cap as u128)
    }

    fn group_table(&self) -> Result<GroupTable> {
        let order = group_order(self.group, self.n, self.q);
        if order > self.group_cap as u128 {
            return Err(Error::CapExceeded { what: "group order", count: order, cap: self.group_cap as u128 });
        }
        GroupTable::enumerate_with_cap(self.group, self.n, self.field()?, self.group_cap as u128)
    }

    fn levels(&self, g: &GroupTable, include_dual: bool, mode: LevelMode) -> Result<LevelBasisSet> {
        let options = LevelOptions { mode, include_dual, dmax: self.dmax.unwrap_or(g.n).min(g.n) };
        LevelBasisSet::build_cached(g, options, self.cache_dir.as_deref())
    }
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Missing(format!("this command needs --{flag} <file>")))
}

fn scheme_function(cfg: &RunConfig, ctx: &SchemeCtx) -> Result<FnTable> {
    match parse_inputs(need(&cfg.input, "input")?, InputKind::Function, Target::Scheme { tag: ctx.tag(), len: ctx.size() })? {
        Parsed::Function(f) => Ok(f),
        Parsed::Set(_) => unreachable!("function parse"),
    }
}

fn group_function(g: &GroupTable, path: &Path) -> Result<FnTable> {
    match parse_inputs(path, InputKind::Function, Target::Group(g))? {
        Parsed::Function(f) => Ok(f),
        Parsed::Set(_) => unreachable!("function parse"),
    }
}

fn group_set(g: &GroupTable, path: &Path) -> Result<GroupSet> {
    match parse_inputs(path, InputKind::Set, Target::Group(g))? {
        Parsed::Set(s) => Ok(s),
        Parsed::Function(_) => unreachable!("set parse"),
    }
}

/// A set file when given, otherwise a function file.
fn group_input(g: &GroupTable, set: &Option<PathBuf>, input: &Option<PathBuf>, flags: (&str, &str)) -> Result<FnTable> {
    match (set, input) {
        (Some(p), _) => Ok(group_set(g, p)?.indicator(g)),
        (None, Some(p)) => group_function(g, p),
        (None, None) => Err(Error::Missing(format!("this command needs --{} or --{}", flags.0, flags.1))),
    }
}

fn audit_csv(r: &GlobalnessReport) -> String {
    let mut s = String::from("order,max,threshold,pass,v_basis,w_basis,t\n");
    for row in &r.rows {
        let (v, w, t) = match &row.witness {
            Some(w) => (format!("{:?}", w.v_basis), format!("{:?}", w.w_basis), w.t.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        let th = row.threshold.map(|t| format!("{t:e}")).unwrap_or_default();
        s.push_str(&format!("{},{:e},{th},{},\"{v}\",\"{w}\",{t}\n", row.order, row.max, row.pass));
    }
    s
}

/// Result of one invocation: human-readable summary plus the exit verdict.
pub struct Outcome {
    pub ok: bool,
    pub summary: String,
    pub artifacts: Vec<String>,
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let mut art = Artifacts::new(&cfg.out)?;
    let (ok, summary) = dispatch(cfg, &mut art)?;
    let mut files = art.written.clone();
    files.push("manifest.json".into());
    let manifest = json!({
        "tool": "slnq",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "ok": ok,
        "outputs": files,
    });
    art.json("manifest.json", &manifest)?;
    Ok(Outcome { ok, summary, artifacts: art.written })
}

fn dispatch(cfg: &RunConfig, art: &mut Artifacts) -> Result<(bool, String)> {
    match &cfg.command {
        Command::FieldInfo => field_info(cfg, art),
        Command::Fourier => fourier(cfg, art),
        Command::ProjectDegree { d, pure } => project_degree(cfg, art, *d, *pure),
        Command::GlobalAudit { lp } => global(cfg, art, *lp),
        Command::InfluenceAudit => influences(cfg, art),
        Command::Levels { include_dual, twisted } => levels(cfg, art, *include_dual, *twisted),
        Command::Isotypic => isotypic(cfg, art),
        Command::Opnorm => opnorm(cfg, art),
        Command::Convolve => convolve(cfg, art),
        Command::Mixing => mixing(cfg, art, false),
        Command::ProductMixing => mixing(cfg, art, true),
        Command::Bogolyubov => bogolyubov(cfg, art),
        Command::ApproxGroup => approx_group(cfg, art),
        Command::Verify { only } => verify(cfg, art, only),
    }
}

fn field_info(cfg: &RunConfig, art: &mut Artifacts) -> Result<(bool, String)> {
    let f = cfg.field()?;
    let chars: Vec<[f64; 2]> = f.character_table().iter().map(|c| [c.re, c.im]).collect();
    let info = json!({
        "q": f.q,
        "p": f.p,
        "degree": f.m,
        "modulus": f.modulus,
        "primitive_element": f.primitive_element(),
        "character": chars,
    });
    art.json("field.json", &info)?;
    let mut s = format!("F_{}: p = {}, degree {}, modulus {:?}, primitive element {}\n", f.q, f.p, f.m, f.modulus, f.primitive_element());
    for (x, c) in f.character_table().iter().enumerate() {
        s.push_str(&format!("phi({x}) = {:.6} {:+.6}i\n", c.re, c.im));
    }
    Ok((true, s))
}

fn fourier(cfg: &RunConfig, art: &mut Artifacts) -> Result<(bool, String)> {
    let ctx = cfg.scheme()?;
    let f = scheme_function(cfg, &ctx)?;
    let s = ctx.forward(&f);
    let back = ctx.inverse(&s);
    let residual = back.max_abs_diff(&f);
    let parseval = (s.energy() - f.norm2_sq()).abs();
    let mut csv = String::from("x,rank,re,im\n");
    let mut out = String::new();
    for (x, c) in s.coeffs.iter().enumerate() {
        csv.push_str(&format!("{x},{},{:e},{:e}\n", ctx.dual_rank[x], c.re, c.im));
        if c.norm() > TAU {
            out.push_str(&format!("X={x} rank {}: {:.6} {:+.6}i\n", ctx.dual_rank[x], c.re, c.im));
        }
    }
    art.text("spectrum.csv", &csv)?;
    let ok = residual <= TAU && parseval <= TAU;
    out.push_str(&format!("inversion residual {residual:.1e}, parseval residual {parseval:.1e}\n"));
    Ok((ok, out))
}

fn project_degree(cfg: &RunConfig, art: &mut Artifacts, d: usize, pure: bool) -> Result<(bool, String)> {
    let ctx = cfg.scheme()?;
    let f = scheme_function(cfg, &ctx)?;
    let mode = if pure { DegreeMode::Pure } else { DegreeMode::Cumulative };
    let p = ctx.degree_project(&f, d, mode)?;
    art.text("projection.csv", &function_csv(&p))?;
    let kind = if pure { "=" } else { "<=" };
    Ok((true, format!("||f^{{{kind}{d}}}||_2^2 = {:.12e} of ||f||_2^2 = {:.12e}\n", p.norm2_sq(), f.norm2_sq())))
}

fn global(cfg: &RunConfig, art: &mut Artifacts, lp: Option<f64>) -> Result<(bool, String)> {
    let ctx = cfg.scheme()?;
    let f = scheme_function(cfg, &ctx)?;
    let dmax = cfg.dmax.unwrap_or(ctx.n.min(ctx.m)).min(ctx.n + ctx.m);
    let report = match lp {
        Some(p) => lp_global_audit(&ctx, &f, dmax, p)?,
        None => global_audit(&ctx, &f, dmax, &zeta_threshold(cfg.zeta, ctx.q(), ctx.n, f.norm2_sq()))?,
    };
    art.json("global_audit.json", &report)?;
    art.text("global_audit.csv", &audit_csv(&report))?;
    let mut s = String::new();
    if lp.is_none() {
        for &ell in &cfg.ell {
            let l = ell as f64;
            let lr = lp_global_audit(&ctx, &f, dmax, l / (l - 1.0))?;
            art.text(&format!("lp_audit_ell{ell}.csv"), &audit_csv(&lr))?;
            let maxes: Vec<String> = lr.rows.iter().map(|r| format!("{:.6e}", r.max)).collect();
            s.push_str(&format!("L^{{{ell}/{}}} restriction norms by order: {}\n", ell - 1, maxes.join(", ")));
        }
    }
    for r in &report.rows {
        let th = r.threshold.map(|t| format!(" (threshold {t:.6e}{})", if r.pass { "" } else { ", exceeded" })).unwrap_or_default();
        s.push_str(&format!("order {}: max {:.6e}{th}\n", r.order, r.max));
    }
    Ok((true, s))
}

fn influences(cfg: &RunConfig, art: &mut Artifacts) -> Result<(bool, String)> {
    let ctx = cfg.scheme()?;
    let f = scheme_function(cfg, &ctx)?;
    let d = cfg.dmax.unwrap_or(ctx.n.min(ctx.m)).min(ctx.n + ctx.m);
    let report = influence_audit(&ctx, &f, d)?;
    art.json("influence_audit.json", &report)?;
    art.text("influence_audit.csv", &audit_csv(&report))?;
    let s = report.rows.iter().map(|r| format!("order {}: max influence {:.6e}\n", r.order, r.max)).collect();
    Ok((true, s))
}

fn levels(cfg: &RunConfig, art: &mut Artifacts, include_dual: bool, twisted: bool) -> Result<(bool, String)> {
    let g = cfg.group_table()?;
    let mode = if twisted { LevelMode::Twisted } else { LevelMode::Strict };
    let lv = cfg.levels(&g, include_dual, mode)?;
    let mut csv = String::from("d,dim_le_d,dim_eq_d\n");
    let mut s = format!("{} (order {}), {:?} levels{}\n", g.name(), g.order(), mode, if include_dual { " with dual action" } else { "" });
    for d in 0..=lv.dmax() {
        csv.push_str(&format!("{d},{},{}\n", lv.dims[d], lv.level_dim(d)));
        s.push_str(&format!("level {d}: dim V_<=d = {}, dim V_=d = {}\n", lv.dims[d], lv.level_dim(d)));
    }
    art.text("levels.csv", &csv)?;
    Ok((true, s))
}

fn isotypic(cfg: &RunConfig, art: &mut Artifacts) -> Result<(bool, String)> {
    let g = cfg.group_table()?;
    let lv = cfg.levels(&g, false, LevelMode::Strict)?;
    let rep = isotypic_refine(&g, &lv, 3, cfg.seed)?;
    art.json("isotypic.json", &rep)?;
    let mut s = String::new();
    for l in &rep.levels {
        s.push_str(&format!("level {}: dim {}, irreducible dims {:?}, m_d = {:?}\n", l.d, l.level_dim, l.irrep_dims, l.m_d));
    }
    let ok = rep.sum_of_squares == g.order() && rep.cluster_count == rep.class_count;
    s.push_str(&format!(
        "sum of squared dims {} (|G| = {}), {} clusters, {} conjugacy classes\n",
        rep.sum_of_squares,
        g.order(),
        rep.cluster_count,
        rep.class_count
    ));
    Ok((ok, s))
}

fn opnorm(cfg: &RunConfig, art: &mut Artifacts) -> Result<(bool, String)> {
    let g = cfg.group_table()?;
    let f = group_input(&g, &cfg.set, &cfg.input, ("set", "input"))?;
    let lv = cfg.levels(&g, false, LevelMode::Strict)?;
    let iso = isotypic_refine(&g, &lv, 3, cfg.seed)?;
    let rep = operator_norm_report(&g, &lv, &iso, &f, cfg.c)?;
    art.json("opnorm.json", &rep)?;
    let mut csv = String::from("d,level_dim,m_d,norm_exact,norm_power,sx_bound,trace_matrix,trace_norm,target,empirical_c\n");
    let mut s = String::new();
    for r in &rep.rows {
        let md = r.m_d.map(|m| m.to_string()).unwrap_or_default();
        let ec = r.empirical_c.map(|c| format!("{c:e}")).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{md},{:e},{:e},{:e},{:e},{:e},{:e},{ec}\n",
            r.d, r.level_dim, r.norm_exact, r.norm_power, r.sx_bound, r.trace_matrix, r.trace_norm, r.target
        ));
        s.push_str(&format!(
            "level {}: ||T_f|| = {:.6e} (power {:.6e}), trace bound {:.6e}, q^(-c d n) E f = {:.6e}\n",
            r.d, r.norm_exact, r.norm_power, r.sx_bound, r.target
        ));
    }
    art.text("opnorm.csv", &csv)?;
    Ok((rep.ok(), s))
}

fn convolve(cfg: &RunConfig, art: &mut Artifacts) -> Result<(bool, String)> {
    let g = cfg.group_table()?;
    let (h, oracle) = match (&cfg.set, &cfg.set2) {
        (Some(a), Some(b)) => {
            let (a, b) = (group_set(&g, a)?, group_set(&g, b)?);
            (g.convolve(&a.indicator(&g), &b.indicator(&g)), Some(count_convolution(&g, &a, &b)))
        }
        _ => {
            let f = group_function(&g, need(&cfg.input, "input")?)?;
            let k = group_function(&g, need(&cfg.input2, "input2")?)?;
            (g.convolve(&f, &k), None)
        }
    };
    art.text("convolution.csv", &function_csv(&h))?;
    let mut s = format!("E[f*g] = {:.6e}, ||f*g||_2^2 = {:.6e}\n", h.mean().re, h.norm2_sq());
    let ok = match oracle {
        Some(o) => {
            let r = o.max_abs_diff(&h);
            s.push_str(&format!("double-loop oracle residual {r:.1e}\n"));
            r <= TAU
        }
        None => true,
    };
    Ok((ok, s))
}

fn mixing(cfg: &RunConfig, art: &mut Artifacts, triple: bool) -> Result<(bool, String)> {
    let g = cfg.group_table()?;
    let a = group_set(&g, need(&cfg.set, "set")?)?;
    let b = group_set(&g, need(&cfg.set2, "set2")?)?;
    let lv = cfg.levels(&g, false, LevelMode::Strict)?;
    let rep = if triple {
        let c = group_set(&g, need(&cfg.set3, "set3")?)?;
        product_mixing(&g, &lv, &a, &b, &c)?
    } else {
        mixing_experiment(&g, &lv, &a, &b)?
    };
    art.json(if triple { "product_mixing.json" } else { "mixing.json" }, &rep)?;
    let mut s = format!(
        "mu(A) = {:.6}, mu(B) = {:.6}; ||1_A*1_B - mu(A)mu(B)||^2 = {:.6e}; per level {:?}\n",
        rep.mu_a, rep.mu_b, rep.deviation, rep.per_level
    );
    s.push_str(&format!(
        "decomposition residual {:.1e}, oracle residual {:.1e}, bound {:.6e}, ratio {:.6}\n",
        rep.decomposition_residual, rep.oracle_residual, rep.bound, rep.ratio
    ));
    if let (Some(t), Some(l)) = (rep.triple, rep.triple_levels) {
        s.push_str(&format!("<1_A*1_B, 1_C> = {t:.6e}, by levels {l:.6e}, covers G: {}\n", rep.covers));
    }
    Ok((rep.ok(), s))
}

fn bogolyubov(cfg: &RunConfig, art: &mut Artifacts) -> Result<(bool, String)> {
    let g = cfg.group_table()?;
    let a = group_set(&g, need(&cfg.set, "set")?)?;
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    let rep = bogolyubov_search(&g, &a)?;
    let pig = pigeonhole(&g, &a);
    let bump = density_bogolyubov(&g, &a, BumpConfig::from_zeta(cfg.zeta, g.q(), g.n, 2.min(2 * g.n - 1)))?;
    art.json("bogolyubov.json", &json!({ "search": rep, "pigeonhole": pig, "density": bump }))?;
    let mut s = format!(
        "mu(A) = {:.6}; |AA^-1AA^-1| = {}; contains a good {}-groumvirate of density {:.6} ({}/{})\n",
        rep.density,
        rep.bogolyubov_size,
        rep.contained_at_k,
        rep.best_density,
        rep.best.members.len(),
        g.order()
    );
    if let Some(e) = rep.exponent {
        s.push_str(&format!("density exponent log(1/mu(U)) / log(1/mu(A)) = {e:.4}\n"));
    }
    if pig.applies {
        s.push_str(&format!("mu(A) > 1/2: AA^-1 = G is {}, AA^-1AA^-1 = G is {}\n", pig.difference_is_group, pig.bogolyubov_is_group));
    }
    s.push_str(&format!(
        "density bump ends at a {}-umvirate with relative density {:.6}; difference density {:.6}\n",
        bump.bump.umvirate.k, bump.bump.restricted_density, bump.difference_density
    ));
    Ok((pig.holds(), s))
}

fn approx_group(cfg: &RunConfig, art: &mut Artifacts) -> Result<(bool, String)> {
    let g = cfg.group_table()?;
    let a = group_set(&g, need(&cfg.set, "set")?)?;
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    let a2 = a.power(&g, 2);
    let k = a2.len() as f64 / a.len() as f64;
    let cover = if a.is_symmetric(&g) { Some(easy_set_cover(&g, &a)?) } else { None };
    art.json("approx_group.json", &json!({ "size": a.len(), "square_size": a2.len(), "k": k, "symmetric": a.is_symmetric(&g), "cover": cover }))?;
    let mut s = format!("|A| = {}, |A^2| = {}, K = |A^2|/|A| = {k:.4}\n", a.len(), a2.len());
    let ok = match &cover {
        Some(c) => {
            s.push_str(&format!(
                "easy set: {} cosets of a good {}-groumvirate; A inside XU: {}; XU inside A^5: {}\n",
                c.cover_size, c.easy.k, c.covers, c.inside_fifth_power
            ));
            c.covers && c.inside_fifth_power
        }
        None => {
            s.push_str("A is not symmetric; no easy-set cover computed\n");
            true
        }
    };
    Ok((ok, s))
}

#[derive(Serialize)]
struct VerifyRow<'a> {
    id: u8,
    name: &'a str,
    pass: bool,
    detail: &'a str,
}

fn verify(cfg: &RunConfig, art: &mut Artifacts, only: &[u8]) -> Result<(bool, String)> {
    let opts = SuiteOptions {
        seed: cfg.seed,
        groups: cfg.group_given.then(|| vec![(cfg.group, cfg.n, cfg.q)]),
    };
    if let Some(gs) = &opts.groups {
        for &(kind, n, q) in gs {
            let order = group_order(kind, n, q);
            if order > cfg.group_cap as u128 {
                return Err(Error::CapExceeded { what: "group order", count: order, cap: cfg.group_cap as u128 });
            }
        }
    }
    let ids: Vec<u8> = CRITERIA.iter().map(|c| c.0).filter(|id| only.is_empty() || only.contains(id)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Invalid(e.to_string()))?;
    let results: Vec<CriterionResult> = pool.install(|| ids.par_iter().map(|&id| run_criterion(id, &opts)).collect());
    let rows: Vec<VerifyRow> = results.iter().map(|r| VerifyRow { id: r.id, name: r.name, pass: r.pass, detail: &r.detail }).collect();
    art.json("verify.json", &rows)?;
    let mut csv = String::from("criterion,name,pass\n");
    for r in &results {
        csv.push_str(&format!("{},{},{}\n", r.id, r.name, r.pass));
    }
    art.text("verify.csv", &csv)?;
    let ok = results.iter().all(|r| r.pass);
    let mut s: String = results.iter().map(|r| r.line() + "\n").collect();
    s.push_str(&format!("{} of {} criteria passed\n", results.iter().filter(|r| r.pass).count(), results.len()));
    Ok((ok, s))
}
