//! Falsification suites for the globalness, hypercontractive and level
//! inequalities. Every epsilon is the exact audited value of the instance;
//! both sides are compared in the log domain.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calculus::{all_directions, avg_direction, derivative, direction_subspaces, Direction, RestrictionSite};
use crate::error::Result;
use crate::fqlin::vec_from_index;
use crate::gf::FieldCtx;
use crate::globality::{global_audit_with, influence_audit_with, lp_global_audit_with, GoodUmvirate, SiteCatalog, Umvirate};
use crate::groups::{isotypic_components, GroupKind, GroupTable, IsotypicComponent, LevelBasisSet, LevelOptions};
use crate::scheme::{DegreeMode, FnTable, RestrictionFrame, SchemeCtx};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Which {
    /// globalness versus small influences and its companions
    Equivalence,
    Hyper,
    Level,
    LevelG,
}

impl Which {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "equivalence" => Some(Which::Equivalence),
            "hyper" => Some(Which::Hyper),
            "level" => Some(Which::Level),
            "level-G" | "level-g" => Some(Which::LevelG),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InequalityRow {
    pub instance: usize,
    pub domain: String,
    pub family: String,
    pub seed: u64,
    pub inequality: &'static str,
    pub d: usize,
    pub ell: Option<u32>,
    pub r: Option<usize>,
    pub lhs: f64,
    /// natural log of the right-hand side
    pub log_rhs: f64,
    /// log_rhs - ln(lhs)
    pub log_margin: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SuiteReport {
    pub instances: usize,
    pub rows: Vec<InequalityRow>,
}

impl SuiteReport {
    pub fn violations(&self) -> Vec<&InequalityRow> {
        self.rows.iter().filter(|r| !r.holds).collect()
    }

    pub fn merge(&mut self, other: SuiteReport) {
        self.instances += other.instances;
        self.rows.extend(other.rows);
    }

    /// smallest log margin per inequality name
    pub fn tightest(&self) -> Vec<(&'static str, f64)> {
        let mut out: Vec<(&'static str, f64)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(n, _)| *n == r.inequality) {
                Some((_, m)) => *m = m.min(r.log_margin),
                None => out.push((r.inequality, r.log_margin)),
            }
        }
        out
    }
}

fn ln(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// lhs <= rhs (1 + 1e-9) + 1e-12 with rhs given by its log
pub fn holds_log(lhs: f64, log_rhs: f64) -> bool {
    lhs <= 1e-12 || ln(lhs - 1e-12) <= log_rhs + 1e-9
}

struct Sink<'a> {
    out: &'a mut Vec<InequalityRow>,
    instance: usize,
    domain: String,
    family: String,
    seed: u64,
}

impl Sink<'_> {
    fn push(&mut self, inequality: &'static str, d: usize, ell: Option<u32>, r: Option<usize>, lhs: f64, log_rhs: f64) {
        self.out.push(InequalityRow {
            instance: self.instance,
            domain: self.domain.clone(),
            family: self.family.clone(),
            seed: self.seed,
            inequality,
            d,
            ell,
            r,
            lhs,
            log_rhs,
            log_margin: log_rhs - ln(lhs),
            holds: holds_log(lhs, log_rhs),
        });
    }
}

/// Function families of a corpus instance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Family {
    /// each point kept with probability 2^{-k}
    Boolean(u32),
    /// a restriction coset (scheme) or umvirate / good-umvirate coset (group) plus sparse noise
    Concentrated,
    /// random coefficients on the rank-d characters (scheme) or in level d (group)
    PureDegree(usize),
    /// random coefficients on all ranks <= d
    LowDegree(usize),
    /// random element of one isotypic component
    Isotypic,
}

impl Family {
    fn label(&self) -> String {
        match self {
            Family::Boolean(k) => format!("boolean-2^-{k}"),
            Family::Concentrated => "concentrated".into(),
            Family::PureDegree(d) => format!("pure-degree-{d}"),
            Family::LowDegree(d) => format!("degree-le-{d}"),
            Family::Isotypic => "isotypic".into(),
        }
    }

    fn boolean(&self) -> bool {
        matches!(self, Family::Boolean(_) | Family::Concentrated)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SchemeCorpus {
    pub q: usize,
    pub n: usize,
    pub m: usize,
    /// (family, count)
    pub families: Vec<(Family, usize)>,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupCorpus {
    pub kind: GroupKind,
    pub n: usize,
    pub q: usize,
    pub families: Vec<(Family, usize)>,
    pub seed: u64,
}

fn complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_subset(rng: &mut ChaCha8Rng, size: usize, p: f64) -> Vec<usize> {
    loop {
        let s: Vec<usize> = (0..size).filter(|_| rng.gen_bool(p)).collect();
        if !s.is_empty() {
            return s;
        }
    }
}

/// random function on a scheme from a family
pub fn scheme_instance(ctx: &SchemeCtx, cat: &SiteCatalog, family: &Family, rng: &mut ChaCha8Rng) -> FnTable {
    let size = ctx.size();
    match family {
        Family::Boolean(k) => FnTable::indicator(ctx.tag(), size, random_subset(rng, size, 0.5f64.powi(*k as i32))),
        Family::Concentrated => {
            let orders: Vec<usize> = (1..=cat.dmax()).filter(|&o| !cat.by_order[o].is_empty()).collect();
            let o = orders[rng.gen_range(0..orders.len())];
            let class = &cat.by_order[o][rng.gen_range(0..cat.by_order[o].len())];
            let (_, members) = &class.cosets[rng.gen_range(0..class.cosets.len())];
            let mut set = members.clone();
            set.extend((0..size).filter(|_| rng.gen_bool(1.0 / size as f64)));
            FnTable::indicator(ctx.tag(), size, set)
        }
        Family::PureDegree(d) | Family::LowDegree(d) => {
            let pure = matches!(family, Family::PureDegree(_));
            let noise = ctx.table((0..size).map(|_| complex(rng)).collect());
            let d = *d;
            ctx.spectral_filter(&noise, |x| {
                let r = ctx.dual_rank[x] as usize;
                (if pure { r == d } else { r <= d }).then_some(1.0)
            })
        }
        Family::Isotypic => ctx.table((0..size).map(|_| complex(rng)).collect()),
    }
}

struct DirSetup {
    frame: RestrictionFrame,
    dir: Direction,
    site_v: crate::fqlin::Subspace,
    site_w: crate::fqlin::Subspace,
    reps: Vec<usize>,
    cat: SiteCatalog,
}

struct SchemeSetup {
    ctx: SchemeCtx,
    cat: SiteCatalog,
    dirs: Vec<DirSetup>,
}

const RMAX: usize = 3;

impl SchemeSetup {
    fn new(q: usize, n: usize, m: usize, with_dirs: bool) -> Result<Self> {
        let ctx = SchemeCtx::new(Arc::new(FieldCtx::new(q)?), n, m)?;
        let cat = SiteCatalog::new(&ctx, (n + m).min(2 * ctx.max_degree().min(2)).max(RMAX.min(n + m)))?;
        let mut dirs = Vec::new();
        if with_dirs {
            for dir in all_directions(&ctx)? {
                let (v1, w1) = direction_subspaces(&ctx, &dir);
                let frame = RestrictionFrame::new(&ctx, &v1, &w1)?;
                let reps = frame.coset_reps(&ctx);
                let lc = &frame.local;
                let c = SiteCatalog::new(lc, RMAX.min(lc.n + lc.m))?;
                dirs.push(DirSetup { frame, dir, site_v: v1, site_w: w1, reps, cat: c });
            }
        }
        Ok(SchemeSetup { ctx, cat, dirs })
    }

    fn label(&self) -> String {
        format!("L(F_{}^{},F_{}^{})", self.ctx.q(), self.ctx.n, self.ctx.q(), self.ctx.m)
    }
}

struct Audits<'a> {
    setup: &'a SchemeSetup,
}

impl Audits<'_> {
    /// max ||f_{(V',W')->T}||_2^2 over sites of order exactly r
    fn global(&self, f: &FnTable, r: usize) -> f64 {
        global_audit_with(&self.setup.cat, f, r, &|_| None).max_at(r)
    }

    /// max generalized influence over orders <= d
    fn influence(&self, f: &FnTable, d: usize) -> f64 {
        influence_audit_with(&self.setup.ctx, &self.setup.cat, f, d, &|_| None).max_upto(d)
    }

    fn lp_global(&self, f: &FnTable, r: usize, ellp: f64) -> f64 {
        lp_global_audit_with(&self.setup.cat, f, r, ellp).expect("exponent >= 1").max_at(r)
    }
}

fn scheme_checks(setup: &SchemeSetup, f: &FnTable, family: &Family, which: Which, sink: &mut Sink) -> Result<()> {
    let ctx = &setup.ctx;
    let au = Audits { setup };
    let lq = (ctx.q() as f64).ln();
    let dmax = ctx.max_degree().min(2);
    let order_max = setup.cat.dmax();
    let boolean = family.boolean();
    for d in 0..=dmax {
        let fle = ctx.degree_project(f, d, DegreeMode::Cumulative)?;
        let feq = ctx.degree_project(f, d, DegreeMode::Pure)?;
        let dd = (d * d) as f64;
        match which {
            Which::Equivalence => {
                let eps = au.global(f, d);
                sink.push("globalness-to-influence", d, None, None, au.influence(&feq, d), 10.0 * dd * lq + ln(eps));
                let inf = au.influence(&fle, d);
                for r in d..=RMAX.min(order_max) {
                    sink.push("influence-to-globalness", d, None, Some(r), au.global(&fle, r), 10.0 * (d * r) as f64 * lq + ln(inf));
                }
                if 2 * d <= order_max {
                    let sq = fle.pointwise(&fle);
                    sink.push("square-globalness", d, None, None, au.global(&sq, 2 * d), 144.0 * dd * lq + 2.0 * ln(au.global(&fle, d)));
                }
                for r in 1..=RMAX.min(order_max) {
                    let mut eps1: f64 = 0.0;
                    for ds in &setup.dirs {
                        if r - 1 > ds.cat.dmax() {
                            continue;
                        }
                        for &t in &ds.reps {
                            let site = RestrictionSite { v1: ds.site_v.clone(), w1: ds.site_w.clone(), t };
                            let (der, _) = derivative(ctx, &feq, &site)?;
                            eps1 = eps1.max(global_audit_with(&ds.cat, &der, r - 1, &|_| None).max_at(r - 1));
                        }
                    }
                    let eps2 = au.global(&feq, r - 1);
                    let rhs = 2.0 * eps1 + 4.0 * (ctx.q() as f64).powi(2 * d as i32) * eps2;
                    sink.push("derivative-globalness", d, None, Some(r), au.global(&feq, r), ln(rhs));
                }
            }
            Which::Hyper => {
                let inf = au.influence(&fle, d);
                sink.push("fourth-moment", d, None, None, fle.mean_abs_pow(4.0), 103.0 * dd * lq + ln(inf) + ln(fle.norm2_sq()));
                let eps = au.global(&fle, d);
                for ell in [4u32, 8] {
                    let l = ell as f64;
                    sink.push("hypercontractivity", d, Some(ell), None, fle.mean_abs_pow(l), 200.0 * dd * l * l * lq + ln(fle.norm2_sq()) + (l / 2.0 - 1.0) * ln(eps));
                }
            }
            Which::Level => {
                let eps_f = au.global(f, d);
                let eps_eq = au.global(&feq, d);
                let inf_eq = au.influence(&feq, d);
                let nsq = feq.norm2_sq();
                let mean = f.mean().re;
                if boolean {
                    let t = (-ln(eps_f) / lq).max(0.0).sqrt();
                    sink.push("level-small", d, None, None, nsq, 922.0 * (d as f64) * t * lq + ln(eps_f) + ln(mean));
                }
                for ell in [4u32, 8] {
                    let l = ell as f64;
                    let lp = l / (l - 1.0);
                    if boolean {
                        sink.push("level", d, Some(ell), None, nsq, 460.0 * dd * l * lq + ln(mean) + (1.0 - 2.0 / l) * ln(eps_f));
                    }
                    sink.push("level-of-global-part", d, Some(ell), None, nsq, 300.0 * dd * l * lq + (l - 2.0) / (2.0 * l - 2.0) * ln(eps_eq) + ln(f.mean_abs_pow(lp)));
                    let beta = if nsq > 0.0 { (inf_eq / nsq).max(1.0) } else { 1.0 };
                    sink.push("level-from-influences", d, Some(ell), None, nsq, 420.0 * dd * l * lq + (1.0 - 2.0 / l) * ln(beta) + 2.0 * ln(f.lp_norm(lp)));
                    let eps_lp = au.lp_global(f, d, lp);
                    sink.push("lp-global-influences", d, Some(ell), None, inf_eq, 500.0 * dd * l * lq + 2.0 * ln(eps_lp));
                    sink.push("lp-global-level", d, Some(ell), None, nsq, 460.0 * dd * l * lq + (l - 2.0) / (l - 1.0) * ln(eps_lp) + ln(f.mean_abs_pow(lp)));
                }
            }
            Which::LevelG => {}
        }
    }
    if which == Which::Equivalence {
        for r in 0..=RMAX {
            let eps = if r <= order_max { au.global(f, r) } else { continue };
            let mut lhs: f64 = 0.0;
            let mut any = false;
            for ds in &setup.dirs {
                if r > ds.cat.dmax() {
                    continue;
                }
                any = true;
                let e = avg_direction(ctx, f, &ds.dir)?;
                for &t in &ds.reps {
                    let local = ds.frame.restrict(ctx, &e, t);
                    lhs = lhs.max(global_audit_with(&ds.cat, &local, r, &|_| None).max_at(r));
                }
            }
            if any {
                sink.push("average-globalness", 0, None, Some(r), lhs, 2f64.ln() + ln(eps));
            }
        }
    }
    Ok(())
}

pub fn scheme_suite(corpus: &SchemeCorpus, which: Which) -> Result<SuiteReport> {
    let setup = SchemeSetup::new(corpus.q, corpus.n, corpus.m, which == Which::Equivalence)?;
    let mut report = SuiteReport::default();
    let mut id = 0;
    for (family, count) in &corpus.families {
        for _ in 0..*count {
            let seed = corpus.seed.wrapping_mul(1_000_003).wrapping_add(id as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = scheme_instance(&setup.ctx, &setup.cat, family, &mut rng);
            let mut sink = Sink { out: &mut report.rows, instance: id, domain: setup.label(), family: family.label(), seed };
            scheme_checks(&setup, &f, family, which, &mut sink)?;
            id += 1;
        }
    }
    report.instances = id;
    Ok(report)
}

struct GroupSetup {
    g: GroupTable,
    levels: LevelBasisSet,
    components: Vec<IsotypicComponent>,
    sch: SchemeSetup,
}

fn random_umvirate_set(g: &GroupTable, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let f = &g.field;
    let n = g.n;
    let nv = g.q().pow(n as u32);
    loop {
        let k = rng.gen_range(1..=2usize.min(2 * n - 1));
        let mut rows = Vec::new();
        let mut funcs = Vec::new();
        for _ in 0..k {
            let pair = (vec_from_index(n, g.q(), rng.gen_range(1..nv)), vec_from_index(n, g.q(), rng.gen_range(1..nv)));
            if rng.gen_bool(0.5) {
                rows.push(pair);
            } else {
                funcs.push(pair);
            }
        }
        let Ok(u) = Umvirate::new(f, n, &rows, &funcs) else { continue };
        let mut mem = u.members(g);
        if mem.is_empty() {
            continue;
        }
        mem.extend((0..g.order()).filter(|_| rng.gen_bool(1.0 / g.order() as f64)));
        return mem;
    }
}

fn group_instance(s: &GroupSetup, family: &Family, rng: &mut ChaCha8Rng) -> Result<(FnTable, Option<usize>)> {
    let g = &s.g;
    let ord = g.order();
    Ok(match family {
        Family::Boolean(k) => (g.indicator(random_subset(rng, ord, 0.5f64.powi(*k as i32))), None),
        Family::Concentrated => {
            if rng.gen_bool(0.5) {
                (g.indicator(random_umvirate_set(g, rng)), None)
            } else {
                let k = 1.min(g.n - 1);
                let u = GoodUmvirate { k, g: g.mat(rng.gen_range(0..ord)).clone(), h: g.mat(rng.gen_range(0..ord)).clone() };
                let mut mem = u.members(g);
                mem.extend((0..ord).filter(|_| rng.gen_bool(1.0 / ord as f64)));
                (g.indicator(mem), None)
            }
        }
        Family::PureDegree(d) | Family::LowDegree(d) => {
            let noise = g.table((0..ord).map(|_| complex(rng)).collect());
            let mode = if matches!(family, Family::PureDegree(_)) { DegreeMode::Pure } else { DegreeMode::Cumulative };
            (s.levels.level_project(&noise, *d, mode)?, None)
        }
        Family::Isotypic => {
            let nontrivial: Vec<&IsotypicComponent> = s.components.iter().filter(|c| c.d >= 1).collect();
            let c = nontrivial[rng.gen_range(0..nontrivial.len())];
            let noise = g.table((0..ord).map(|_| complex(rng)).collect());
            (c.project(&noise), Some(c.d))
        }
    })
}

fn group_checks(s: &GroupSetup, f: &FnTable, family: &Family, rho_level: Option<usize>, sink: &mut Sink) -> Result<()> {
    let g = &s.g;
    let jf = g.transfer_j(f, &s.sch.ctx)?;
    let au = Audits { setup: &s.sch };
    let lq = (g.q() as f64).ln();
    for d in 1..=g.n.min(2).min(s.levels.dmax()) {
        let dd = (d * d) as f64;
        let eps = au.global(&jf, d);
        let low = s.levels.level_project(f, d, DegreeMode::Cumulative)?.norm2_sq();
        if family.boolean() {
            let t = (-ln(eps) / lq).max(0.0).sqrt();
            sink.push("group-level-flexible", d, None, None, low, 926.0 * (d as f64) * t * lq + ln(f.mean().re) + ln(eps));
        }
        for ell in [4u32, 8] {
            let l = ell as f64;
            let lp = l / (l - 1.0);
            let eps_lp = au.lp_global(&jf, d, lp);
            sink.push("group-level", d, Some(ell), None, low, 462.0 * dd * l * lq + ln(f.mean_abs_pow(lp)) + ln(eps_lp));
            if rho_level == Some(d) {
                sink.push("group-bonami", d, Some(ell), None, f.mean_abs_pow(l), 1212.0 * dd * l * l * lq + ln(f.norm2_sq()) + (l / 2.0 - 1.0) * ln(eps));
            }
        }
    }
    Ok(())
}

pub fn group_suite(corpus: &GroupCorpus) -> Result<SuiteReport> {
    let field = Arc::new(FieldCtx::new(corpus.q)?);
    let g = GroupTable::enumerate(corpus.kind, corpus.n, field)?;
    let levels = LevelBasisSet::build(&g, LevelOptions::strict(corpus.n))?;
    let components = isotypic_components(&g, &levels, 3, 0)?;
    let sch = SchemeSetup::new(corpus.q, corpus.n, corpus.n, false)?;
    let setup = GroupSetup { g, levels, components, sch };
    let mut report = SuiteReport::default();
    let mut id = 0;
    for (family, count) in &corpus.families {
        for _ in 0..*count {
            let seed = corpus.seed.wrapping_mul(1_000_003).wrapping_add(id as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (f, rho) = group_instance(&setup, family, &mut rng)?;
            let mut sink = Sink { out: &mut report.rows, instance: id, domain: setup.g.name(), family: family.label(), seed };
            group_checks(&setup, &f, family, rho, &mut sink)?;
            id += 1;
        }
    }
    report.instances = id;
    Ok(report)
}

/// scheme corpus shared by the acceptance run and the CLI default
pub fn default_scheme_corpus(q: usize, n: usize, m: usize, per_family: usize, seed: u64) -> SchemeCorpus {
    let mut families: Vec<(Family, usize)> = (1..=4).map(|k| (Family::Boolean(k), per_family)).collect();
    families.push((Family::Concentrated, per_family));
    let dmax = n.min(m).min(2);
    families.extend((0..=dmax).map(|d| (Family::PureDegree(d), per_family.div_ceil(2))));
    SchemeCorpus { q, n, m, families, seed }
}

pub fn default_group_corpus(kind: GroupKind, n: usize, q: usize, per_family: usize, seed: u64) -> GroupCorpus {
    let mut families: Vec<(Family, usize)> = (1..=4).map(|k| (Family::Boolean(k), per_family)).collect();
    families.push((Family::Concentrated, per_family));
    families.push((Family::Isotypic, per_family));
    families.push((Family::LowDegree(1), per_family.div_ceil(2)));
    GroupCorpus { kind, n, q, families, seed }
}
