//! The acceptance suite: eight property checks over fixed domains and
//! groups, each reduced to a pass/fail verdict with its worst residual.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bogolyubov::{bogolyubov_search, easy_set_cover, groumvirate_enumerate, pigeonhole, GroupSet};
use crate::calculus::{
    all_directions, avg_direction, avg_dual_composite, avg_dual_spectral, avg_quotient_direct, avg_quotient_spectral,
    avg_vector_hyperplanes, avg_vector_spectral, direction_laplacian, joint_distribution_check, laplacian, laplacian_mask,
    t_operator, BvDistribution, Direction,
};
use crate::error::Result;
use crate::fqlin::{all_vectors, enumerate_all_subspaces, rref_in_place, Subspace, SUBSPACE_CAP};
use crate::gf::FieldCtx;
use crate::globality::{good_umvirate_partition, SiteCatalog, Umvirate};
use crate::groups::{isotypic_refine, GroupKind, GroupTable, LevelBasisSet, LevelOptions};
use crate::scheme::{DegreeMode, FnTable, RestrictionFrame, SchemeCtx, SpectrumTable};
use crate::spectra::inequalities::{default_group_corpus, default_scheme_corpus, group_suite, scheme_suite, Family, SchemeCorpus, SuiteReport, Which};
use crate::spectra::{level_invariance_residual, mixing_experiment, operator_norm_report};

pub const FOURIER_TOL: f64 = 1e-9;
pub const IDENTITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    /// seconds
    pub elapsed: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {} {:<22} {}  {} ({:.2} s)",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.detail,
            self.elapsed
        )
    }
}

pub type GroupSpec = (GroupKind, usize, usize);

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    /// replaces the built-in group lists of the group criteria
    pub groups: Option<Vec<GroupSpec>>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { seed: 20240611, groups: None }
    }
}

impl SuiteOptions {
    fn groups_or(&self, default: &[GroupSpec]) -> Vec<GroupSpec> {
        self.groups.clone().unwrap_or_else(|| default.to_vec())
    }
}

pub const TARGET_GROUPS: [GroupSpec; 3] = [(GroupKind::SL, 2, 3), (GroupKind::SL, 2, 5), (GroupKind::SL, 3, 2)];
pub const SPECTRAL_GROUPS: [GroupSpec; 3] = [(GroupKind::SL, 2, 2), (GroupKind::SL, 2, 3), (GroupKind::SL, 3, 2)];

pub const CRITERIA: [(u8, &str); 8] = [
    (1, "fourier"),
    (2, "operator-identities"),
    (3, "globalness-equivalence"),
    (4, "inequalities"),
    (5, "junta-level-bridge"),
    (6, "spectral"),
    (7, "mixing"),
    (8, "bogolyubov"),
];

pub fn run_criterion(id: u8, opts: &SuiteOptions) -> CriterionResult {
    let name = CRITERIA.iter().find(|c| c.0 == id).map(|c| c.1).unwrap_or("unknown");
    let start = Instant::now();
    let out = match id {
        1 => fourier(opts),
        2 => identities(opts),
        3 => equivalence(opts),
        4 => inequalities(opts),
        5 => junta_bridge(opts),
        6 => spectral(opts),
        7 => mixing(opts),
        8 => bogolyubov(opts),
        _ => Err(crate::Error::Invalid(format!("no criterion {id}"))),
    };
    let (pass, detail) = out.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult { id, name, pass, detail, elapsed: start.elapsed().as_secs_f64() }
}

pub fn run_all(opts: &SuiteOptions) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|&(id, _)| run_criterion(id, opts)).collect()
}

type Verdict = Result<(bool, String)>;

fn rng_for(opts: &SuiteOptions, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(0x9e37_79b9).wrapping_add(salt))
}

fn random_table(ctx_len: usize, tag: crate::scheme::Domain, rng: &mut ChaCha8Rng) -> FnTable {
    FnTable::new(tag, (0..ctx_len).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
}

fn scheme(q: usize, n: usize, m: usize) -> Result<SchemeCtx> {
    SchemeCtx::new(Arc::new(FieldCtx::new(q)?), n, m)
}

fn group(spec: GroupSpec) -> Result<GroupTable> {
    GroupTable::enumerate(spec.0, spec.1, Arc::new(FieldCtx::new(spec.2)?))
}

/// every (q, n, m) with q in {2,3,4,5} and q^{nm} <= 4096
pub fn fourier_domains() -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for q in [2usize, 3, 4, 5] {
        for n in 1..=12 {
            for m in 1..=12 {
                if (q as f64).powi((n * m) as i32) <= 4096.0 {
                    out.push((q, n, m));
                }
            }
        }
    }
    out
}

fn fourier(opts: &SuiteOptions) -> Verdict {
    let mut rng = rng_for(opts, 1);
    let mut parseval: f64 = 0.0;
    let mut inversion: f64 = 0.0;
    let mut ortho: f64 = 0.0;
    let mut direct: f64 = 0.0;
    let domains = fourier_domains();
    for &(q, n, m) in &domains {
        let ctx = scheme(q, n, m)?;
        let size = ctx.size();
        for i in 0..100 {
            let f = random_table(size, ctx.tag(), &mut rng);
            let s = ctx.forward(&f);
            parseval = parseval.max((s.energy() - f.norm2_sq()).abs());
            inversion = inversion.max(ctx.inverse(&s).max_abs_diff(&f));
            if i < 2 && size <= 1024 {
                let d = ctx.forward_direct(&f);
                let gap = s.coeffs.iter().zip(&d.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                direct = direct.max(gap);
            }
        }
        let chars: Vec<usize> = if size <= 256 { (0..size).collect() } else { (0..64).map(|_| rng.gen_range(0..size)).collect() };
        let tables: Vec<FnTable> = chars.iter().map(|&x| ctx.character(x)).collect();
        if size <= 256 {
            for (a, ua) in tables.iter().enumerate() {
                for (b, ub) in tables.iter().enumerate() {
                    let want = if a == b { 1.0 } else { 0.0 };
                    ortho = ortho.max((ua.inner(ub) - want).norm());
                }
            }
        } else {
            for (k, &x) in chars.iter().enumerate() {
                let s = ctx.forward(&tables[k]);
                for (y, c) in s.coeffs.iter().enumerate() {
                    let want = if y == x { 1.0 } else { 0.0 };
                    ortho = ortho.max((c - want).norm());
                }
                let other = &tables[(k + 1) % tables.len()];
                let want = if chars[(k + 1) % chars.len()] == x { 1.0 } else { 0.0 };
                ortho = ortho.max((tables[k].inner(other) - want).norm());
            }
        }
    }
    let worst = parseval.max(inversion).max(ortho).max(direct);
    Ok((
        worst < FOURIER_TOL,
        format!(
            "{} domains; parseval {parseval:.1e}, inversion {inversion:.1e}, orthonormality {ortho:.1e}, direct {direct:.1e}",
            domains.len()
        ),
    ))
}

#[derive(Default)]
struct Residuals(Vec<(&'static str, f64)>);

impl Residuals {
    fn note(&mut self, what: &'static str, r: f64) {
        match self.0.iter_mut().find(|e| e.0 == what) {
            Some(e) => e.1 = e.1.max(r),
            None => self.0.push((what, r)),
        }
    }

    fn worst(&self) -> f64 {
        self.0.iter().map(|e| e.1).fold(0.0, f64::max)
    }

    fn summary(&self) -> String {
        self.0.iter().map(|(w, r)| format!("{w} {r:.1e}")).collect::<Vec<_>>().join(", ")
    }
}

pub const IDENTITY_DOMAINS: [(usize, usize, usize); 9] =
    [(2, 1, 1), (2, 2, 1), (2, 1, 2), (2, 2, 2), (3, 2, 2), (2, 2, 3), (2, 3, 2), (4, 1, 2), (5, 2, 1)];

/// restriction predicted by the Fourier expansion of f through the restricted characters
fn restriction_by_characters(ctx: &SchemeCtx, frame: &RestrictionFrame, s: &SpectrumTable, ychar: &[usize], t: usize) -> FnTable {
    let mut local = vec![Complex64::new(0.0, 0.0); frame.local.size()];
    for (x, c) in s.coeffs.iter().enumerate() {
        local[ychar[x]] += c * ctx.character(x).values[t];
    }
    frame.local.inverse(&SpectrumTable { q: ctx.q(), n: frame.local.n, m: frame.local.m, coeffs: local })
}

fn pivots_of(w: &Subspace, fq: &FieldCtx) -> Vec<usize> {
    let mut b = w.basis.clone();
    rref_in_place(fq, &mut b)
}

/// D_{V1/V2, W1, S} D_{V2, W2, T} f against D_{V1, W1, T+S} f, matched pointwise in L(V,W)
fn composition_residual(ctx: &SchemeCtx, f: &FnTable, v1: &Subspace, v2: &Subspace, w1: &Subspace, w2: &Subspace, t: usize, s: usize) -> Result<f64> {
    let fq = &ctx.field;
    let frame2 = RestrictionFrame::new(ctx, v2, w2)?;
    let g = frame2.restrict(ctx, &laplacian(ctx, f, v2, w2), t);
    let local2 = &frame2.local;
    let v1loc: Vec<Vec<u8>> = v1.basis_vecs().iter().map(|v| frame2.lambda.mul_vec(fq, v)).collect();
    let v1loc = Subspace::span(fq, local2.n, &v1loc);
    let piv = pivots_of(w2, fq);
    let w1loc: Vec<Vec<u8>> = w1.basis_vecs().iter().map(|w| piv.iter().map(|&p| w[p]).collect()).collect();
    let w1loc = Subspace::span(fq, local2.m, &w1loc);
    let inner = RestrictionFrame::new(local2, &v1loc, &w1loc)?;
    let h = inner.restrict(local2, &laplacian(local2, &g, &v1loc, &w1loc), s);
    let frame1 = RestrictionFrame::new(ctx, v1, w1)?;
    let shift = ctx.domain.add(fq, t, frame2.embed[s]);
    let k = frame1.restrict(ctx, &laplacian(ctx, f, v1, w1), shift);
    let at: HashMap<usize, Complex64> =
        frame1.embed.iter().enumerate().map(|(c, &e)| (ctx.domain.add(fq, e, shift), k.values[c])).collect();
    let mut worst: f64 = 0.0;
    for (c, &e) in inner.embed.iter().enumerate() {
        let p = ctx.domain.add(fq, frame2.embed[e], shift);
        match at.get(&p) {
            Some(v) => worst = worst.max((v - h.values[c]).norm()),
            None => return Ok(f64::INFINITY),
        }
    }
    Ok(worst)
}

fn identities(opts: &SuiteOptions) -> Verdict {
    let mut rng = rng_for(opts, 2);
    let mut res = Residuals::default();
    for (q, n, m) in IDENTITY_DOMAINS {
        let ctx = scheme(q, n, m)?;
        let fq = ctx.field.clone();
        let qf = q as f64;
        let cat = SiteCatalog::new(&ctx, 2.min(n + m))?;
        let classes: Vec<_> = cat.by_order.iter().flatten().collect();
        let masks: Vec<Vec<bool>> = classes.iter().map(|c| laplacian_mask(&ctx, &c.frame.vsub, &c.frame.wsub)).collect();
        let ychars: Vec<Vec<usize>> =
            classes.iter().map(|c| (0..ctx.size()).map(|x| c.frame.restricted_character(&ctx, x)).collect()).collect();
        let vsubs = enumerate_all_subspaces(&fq, n, SUBSPACE_CAP)?;
        let wsubs = enumerate_all_subspaces(&fq, m, SUBSPACE_CAP)?;
        let dirs = all_directions(&ctx)?;
        let bvs: Vec<Option<BvDistribution>> = dirs
            .iter()
            .map(|d| match d {
                Direction::Vector(v) => BvDistribution::new(&ctx, v).map(Some),
                Direction::Hyperplane(_) => Ok(None),
            })
            .collect::<Result<_>>()?;
        let chains: Vec<(usize, usize)> = (0..vsubs.len())
            .flat_map(|a| (0..vsubs.len()).map(move |b| (a, b)))
            .filter(|&(a, b)| vsubs[b].is_subspace_of(&fq, &vsubs[a]))
            .collect();
        let wchains: Vec<(usize, usize)> = (0..wsubs.len())
            .flat_map(|a| (0..wsubs.len()).map(move |b| (a, b)))
            .filter(|&(a, b)| wsubs[a].is_subspace_of(&fq, &wsubs[b]))
            .collect();
        let top = ctx.max_degree();
        for _ in 0..100 {
            let f = random_table(ctx.size(), ctx.tag(), &mut rng);
            let s = ctx.forward(&f);
            let pure: Vec<FnTable> = (0..=top).map(|d| ctx.degree_project(&f, d, DegreeMode::Pure)).collect::<Result<_>>()?;
            for (ci, class) in classes.iter().enumerate() {
                let frame = &class.frame;
                let i = frame.order();
                let t = rng.gen_range(0..ctx.size());
                let by_chars = restriction_by_characters(&ctx, frame, &s, &ychars[ci], t);
                res.note("restricted characters", by_chars.max_abs_diff(&frame.restrict(&ctx, &f, t)));
                let mask = &masks[ci];
                let df = frame.restrict(&ctx, &ctx.spectral_filter(&f, |x| mask[x].then_some(1.0)), t);
                for (d, fd) in pure.iter().enumerate() {
                    let lhs = frame.restrict(&ctx, &ctx.spectral_filter(fd, |x| mask[x].then_some(1.0)), t);
                    let rhs = if d < i || d - i > frame.local.max_degree() {
                        frame.local.constant(0.0)
                    } else {
                        frame.local.degree_project(&df, d - i, DegreeMode::Pure)?
                    };
                    res.note("derivative of pure part", lhs.max_abs_diff(&rhs));
                }
            }
            let (a, b) = chains[rng.gen_range(0..chains.len())];
            let (c, e) = wchains[rng.gen_range(0..wchains.len())];
            let (v1, v2, w1, w2) = (&vsubs[a], &vsubs[b], &wsubs[c], &wsubs[e]);
            let local2 = (n - v2.dim(), w2.dim());
            let s_idx = rng.gen_range(0..q.pow((local2.0 * local2.1) as u32));
            let t = rng.gen_range(0..ctx.size());
            res.note("nested derivatives", composition_residual(&ctx, &f, v1, v2, w1, w2, t, s_idx)?);
            for vp in &vsubs {
                res.note("quotient average", avg_quotient_direct(&ctx, &f, vp)?.max_abs_diff(&avg_quotient_spectral(&ctx, &f, vp)));
            }
            for (di, dir) in dirs.iter().enumerate() {
                let spec = avg_direction(&ctx, &f, dir)?;
                match dir {
                    Direction::Vector(v) => {
                        res.note("vector average", spec.max_abs_diff(&avg_vector_hyperplanes(&ctx, &f, v)?));
                        let bv = bvs[di].as_ref().expect("vector direction");
                        res.note("rank-one law", spec.max_abs_diff(&bv.average(&ctx, &f)));
                        res.note("vector average", spec.max_abs_diff(&avg_vector_spectral(&ctx, &f, v)?));
                    }
                    Direction::Hyperplane(wp) => {
                        res.note("dual average", avg_dual_spectral(&ctx, &f, wp)?.max_abs_diff(&avg_dual_composite(&ctx, &f, wp)?));
                    }
                }
                for i in 1..=top {
                    let fi = &pure[i];
                    let lhs = direction_laplacian(&ctx, fi, dir);
                    let avg = avg_direction(&ctx, fi, dir)?;
                    let rhs = fi.sub(&avg.scale(Complex64::new(qf.powi(i as i32), 0.0)));
                    res.note("laplacian on pure degree", lhs.max_abs_diff(&rhs));
                    let tf = t_operator(&ctx, &f, i, dir)?;
                    let hi = ctx.degree_project(&tf, i, DegreeMode::Pure)?;
                    let lo = ctx.degree_project(&tf, i - 1, DegreeMode::Pure)?;
                    res.note("T operator", lhs.max_abs_diff(&hi));
                    res.note("T operator", direction_laplacian(&ctx, &pure[i - 1], dir).max_abs_diff(&lo));
                }
            }
        }
    }
    let mut law_fail = 0usize;
    let mut law_cases = 0usize;
    for q in [2usize, 3] {
        let ctx = scheme(q, 2, 2)?;
        let fq = ctx.field.clone();
        let subs = enumerate_all_subspaces(&fq, 2, SUBSPACE_CAP)?;
        for vp in &subs {
            for wp in &subs {
                for v in vp.members(&fq).into_iter().filter(|v| v.iter().any(|&x| x != 0)) {
                    law_cases += 1;
                    if !joint_distribution_check(&ctx, vp, wp, &v)?.ok {
                        law_fail += 1;
                    }
                }
            }
        }
    }
    let worst = res.worst();
    Ok((
        worst < IDENTITY_TOL && law_fail == 0,
        format!("{} domains x 100 functions; {}; joint law {}/{} cases uniform", IDENTITY_DOMAINS.len(), res.summary(), law_cases - law_fail, law_cases),
    ))
}

fn suite_verdict(report: &SuiteReport, min_instances: usize) -> (bool, String) {
    let bad = report.violations();
    let tight = report
        .tightest()
        .into_iter()
        .map(|(w, m)| format!("{w} {m:.1}"))
        .collect::<Vec<_>>()
        .join(", ");
    let mut detail = format!("{} instances, {} rows, {} violations; least log-margins: {tight}", report.instances, report.rows.len(), bad.len());
    if let Some(v) = bad.first() {
        detail.push_str(&format!("; first violation {} on {} seed {}", v.inequality, v.domain, v.seed));
    }
    (bad.is_empty() && report.instances >= min_instances, detail)
}

pub const EQUIVALENCE_DOMAINS: [(usize, usize, usize); 2] = [(2, 2, 2), (3, 2, 2)];

fn equivalence(opts: &SuiteOptions) -> Verdict {
    let mut report = SuiteReport::default();
    for (i, (q, n, m)) in EQUIVALENCE_DOMAINS.into_iter().enumerate() {
        let mut families: Vec<(Family, usize)> = (1..=4).map(|k| (Family::Boolean(k), 25)).collect();
        families.push((Family::LowDegree(2), 100));
        let corpus = SchemeCorpus { q, n, m, families, seed: opts.seed.wrapping_add(30 + i as u64) };
        report.merge(scheme_suite(&corpus, Which::Equivalence)?);
    }
    Ok(suite_verdict(&report, 400))
}

fn inequalities(opts: &SuiteOptions) -> Verdict {
    let mut report = SuiteReport::default();
    for (i, (q, n, m)) in EQUIVALENCE_DOMAINS.into_iter().enumerate() {
        for which in [Which::Hyper, Which::Level] {
            let corpus = default_scheme_corpus(q, n, m, 20, opts.seed.wrapping_add(40 + i as u64));
            report.merge(scheme_suite(&corpus, which)?);
        }
    }
    for (i, spec) in opts.groups_or(&TARGET_GROUPS).into_iter().enumerate() {
        let corpus = default_group_corpus(spec.0, spec.1, spec.2, 10, opts.seed.wrapping_add(50 + i as u64));
        report.merge(group_suite(&corpus)?);
    }
    Ok(suite_verdict(&report, 400))
}

/// right cosets of the pointwise stabilizer of U against the fibers of A -> A|_U
fn junta_stab_exhaustive(g: &GroupTable) -> Result<(usize, bool)> {
    let fq = &g.field;
    let mut ok = true;
    let subs = enumerate_all_subspaces(fq, g.n, SUBSPACE_CAP)?;
    for u in &subs {
        let h = g.pointwise_stabilizer(u);
        let basis = u.basis_vecs();
        let coset_of = |a: usize| h.iter().map(|&s| g.mul(a, s)).min().expect("stabilizer holds the identity");
        let fiber_of = |a: usize| basis.iter().map(|b| g.mat(a).mul_vec(fq, b)).collect::<Vec<_>>();
        let mut c2f: HashMap<usize, Vec<Vec<u8>>> = HashMap::new();
        let mut f2c: HashMap<Vec<Vec<u8>>, usize> = HashMap::new();
        for a in 0..g.order() {
            let (c, fb) = (coset_of(a), fiber_of(a));
            ok &= *c2f.entry(c).or_insert_with(|| fb.clone()) == fb;
            ok &= *f2c.entry(fb).or_insert(c) == c;
        }
    }
    Ok((subs.len(), ok))
}

fn junta_bridge(opts: &SuiteOptions) -> Verdict {
    let mut rng = rng_for(opts, 5);
    let sl23 = group((GroupKind::SL, 2, 3))?;
    let (subspaces, stab_ok) = junta_stab_exhaustive(&sl23)?;
    let mut junta_ok = true;
    let mut junta_margin = f64::INFINITY;
    let mut level_ok = true;
    let mut level_margin = f64::INFINITY;
    let mut checks = 0usize;
    for spec in opts.groups_or(&TARGET_GROUPS) {
        let g = group(spec)?;
        let sctx = g.scheme()?;
        let levels = LevelBasisSet::build(&g, LevelOptions::strict(g.n))?;
        let rho = g.density_in_scheme();
        for d in 0..=g.n {
            let subs = crate::fqlin::enumerate_subspaces(&g.field, g.n, d, SUBSPACE_CAP)?;
            for _ in 0..50 {
                let f = random_table(g.order(), g.tag(), &mut rng);
                let u = &subs[rng.gen_range(0..subs.len())];
                let junta = g.junta_project(&f, u);
                junta_ok &= g.junta_test(&junta, u);
                let low = sctx.degree_project(&g.transfer_j(&junta, &sctx)?, d, DegreeMode::Cumulative)?.norm2();
                let need = rho * junta.norm2();
                junta_margin = junta_margin.min(low / need);
                junta_ok &= low >= need - 1e-12;
                if levels.level_dim(d) > 0 {
                    let r = crate::groups::level_lower_check(&g, &levels, &sctx, &f, d)?;
                    level_ok &= r.ok;
                    level_margin = level_margin.min(r.scheme_ratio.min(r.td_ratio) / r.bound);
                }
                checks += 1;
            }
        }
    }
    Ok((
        stab_ok && junta_ok && level_ok,
        format!(
            "stabilizer cosets match restriction fibers on {subspaces} subspaces: {stab_ok}; {checks} random functions; junta ratio/bound >= {junta_margin:.3}; level ratio/bound >= {level_margin:.3}"
        ),
    ))
}

fn spectral(opts: &SuiteOptions) -> Verdict {
    let mut rng = rng_for(opts, 6);
    let mut ok = true;
    let mut notes = Vec::new();
    let mut invariance: f64 = 0.0;
    let mut trace_gap: f64 = 0.0;
    for spec in opts.groups_or(&SPECTRAL_GROUPS) {
        let g = group(spec)?;
        let levels = LevelBasisSet::build(&g, LevelOptions::strict(g.n))?;
        let iso = isotypic_refine(&g, &levels, 3, opts.seed)?;
        let exact = iso.sum_of_squares == g.order() && iso.cluster_count == g.class_count();
        ok &= exact;
        notes.push(format!("{}: sum dim^2 = {} of {}, {} clusters / {} classes", g.name(), iso.sum_of_squares, g.order(), iso.cluster_count, g.class_count()));
        for k in 0..6 {
            let f = if k % 2 == 0 {
                g.indicator((0..g.order()).filter(|_| rng.gen_bool(0.3)))
            } else {
                random_table(g.order(), g.tag(), &mut rng)
            };
            let rep = operator_norm_report(&g, &levels, &iso, &f, 1.0)?;
            ok &= rep.ok();
            for r in &rep.rows {
                trace_gap = trace_gap.max((r.trace_matrix - r.trace_norm).abs());
            }
            for d in 0..=levels.dmax() {
                if levels.level_dim(d) > 0 {
                    invariance = invariance.max(level_invariance_residual(&g, &levels, &f, d)?);
                }
            }
        }
    }
    ok &= invariance < 1e-9 && trace_gap < 1e-8;
    Ok((ok, format!("{}; trace gap {trace_gap:.1e}; invariance {invariance:.1e}", notes.join("; "))))
}

fn random_set(g: &GroupTable, rng: &mut ChaCha8Rng) -> Result<GroupSet> {
    loop {
        let p = rng.gen_range(0.05..0.7);
        let s: Vec<usize> = (0..g.order()).filter(|_| rng.gen_bool(p)).collect();
        if !s.is_empty() {
            return GroupSet::new(g, s);
        }
    }
}

fn mixing(opts: &SuiteOptions) -> Verdict {
    let mut rng = rng_for(opts, 7);
    let mut ok = true;
    let mut decomp: f64 = 0.0;
    let mut oracle: f64 = 0.0;
    let mut pairs = 0;
    for spec in opts.groups_or(&TARGET_GROUPS) {
        let g = group(spec)?;
        let levels = LevelBasisSet::build(&g, LevelOptions::strict(g.n))?;
        for _ in 0..50 {
            let a = random_set(&g, &mut rng)?;
            let b = random_set(&g, &mut rng)?;
            let r = mixing_experiment(&g, &levels, &a, &b)?;
            ok &= r.ok();
            decomp = decomp.max(r.decomposition_residual);
            oracle = oracle.max(r.oracle_residual);
            pairs += 1;
        }
    }
    Ok((ok, format!("{pairs} set pairs; decomposition residual {decomp:.1e}; oracle residual {oracle:.1e}")))
}

/// nonzero (v, w) pairs in F_q^n
fn constraint_pairs(n: usize, q: usize) -> Vec<(Vec<u8>, Vec<u8>)> {
    let nz: Vec<Vec<u8>> = all_vectors(n, q).into_iter().filter(|v| v.iter().any(|&x| x != 0)).collect();
    nz.iter().flat_map(|v| nz.iter().map(move |w| (v.clone(), w.clone()))).collect()
}

/// every nonempty umvirate of order 1 or 2 in G
pub fn small_umvirates(g: &GroupTable) -> Vec<Umvirate> {
    let fq = &g.field;
    let pairs = constraint_pairs(g.n, g.q());
    let mut out = std::collections::BTreeSet::new();
    let mut add = |rows: &[(Vec<u8>, Vec<u8>)], funcs: &[(Vec<u8>, Vec<u8>)]| {
        if let Ok(u) = Umvirate::new(fq, g.n, rows, funcs) {
            if u.order() == rows.len() + funcs.len() {
                out.insert(u);
            }
        }
    };
    for (i, p) in pairs.iter().enumerate() {
        add(std::slice::from_ref(p), &[]);
        add(&[], std::slice::from_ref(p));
        for p2 in &pairs[i + 1..] {
            add(&[p.clone(), p2.clone()], &[]);
            add(&[], &[p.clone(), p2.clone()]);
        }
        for p2 in &pairs {
            add(std::slice::from_ref(p), std::slice::from_ref(p2));
        }
    }
    out.into_iter().filter(|u| !u.members(g).is_empty()).collect()
}

fn symmetric_set(g: &GroupTable, rng: &mut ChaCha8Rng, i: usize) -> Result<GroupSet> {
    let base = if i % 2 == 0 && g.n >= 2 {
        let k = rng.gen_range(1..g.n);
        let e = groumvirate_enumerate(g, k)?;
        let h = &e.groumvirates[rng.gen_range(0..e.groumvirates.len())].members;
        let x = rng.gen_range(0..g.order());
        let mut s: Vec<usize> = h.clone();
        s.extend(h.iter().map(|&y| g.mul(x, y)));
        s.extend((0..g.order()).filter(|_| rng.gen_bool(0.02)));
        GroupSet::new(g, s)?
    } else {
        random_set(g, rng)?
    };
    Ok(base.union(&base.inverse(g)))
}

fn bogolyubov(opts: &SuiteOptions) -> Verdict {
    let mut rng = rng_for(opts, 8);
    let mut ok = true;
    let mut notes = Vec::new();
    let groups = opts.groups_or(&TARGET_GROUPS);
    for &spec in &groups {
        let g = group(spec)?;
        let whole = bogolyubov_search(&g, &GroupSet::full(&g))?;
        let mut structural = whole.best.good.k == 0 && whole.best.members.len() == g.order();
        let mut cases = 1;
        for k in 0..g.n {
            let e = groumvirate_enumerate(&g, k)?;
            let len = e.groumvirates.len();
            for gi in [0, len / 2, len - 1] {
                let gr = &e.groumvirates[gi];
                let sub = bogolyubov_search(&g, &GroupSet::new(&g, gr.members.iter().copied())?)?;
                structural &= sub.best.members == gr.members;
                let h = g.mat(rng.gen_range(0..g.order())).clone();
                let coset = crate::globality::GoodUmvirate { h, ..gr.good.clone() };
                let cs = bogolyubov_search(&g, &GroupSet::new(&g, coset.members(&g))?)?;
                structural &= cs.best.members == gr.members;
                cases += 2;
            }
        }
        let mut pig = 0;
        for _ in 0..20 {
            let size = rng.gen_range(g.order() / 2 + 1..=g.order());
            let mut pool: Vec<usize> = (0..g.order()).collect();
            let mut chosen = Vec::with_capacity(size);
            for _ in 0..size {
                chosen.push(pool.swap_remove(rng.gen_range(0..pool.len())));
            }
            let p = pigeonhole(&g, &GroupSet::new(&g, chosen)?);
            if p.applies && p.holds() {
                pig += 1;
            }
        }
        ok &= structural && pig == 20;
        notes.push(format!("{}: {cases} structural cases {}, pigeonhole {pig}/20", g.name(), if structural { "exact" } else { "WRONG" }));
    }
    let cover_groups = opts.groups.clone().unwrap_or_else(|| vec![(GroupKind::SL, 3, 2)]);
    for spec in cover_groups {
        let g = group(spec)?;
        let mut easy = 0;
        for i in 0..20 {
            let a = symmetric_set(&g, &mut rng, i)?;
            let r = easy_set_cover(&g, &a)?;
            if r.covers && r.inside_fifth_power {
                easy += 1;
            }
        }
        let ums = small_umvirates(&g);
        let mut parted = 0;
        for u in &ums {
            let parts = good_umvirate_partition(&g, u)?;
            let mut all: Vec<usize> = parts.iter().flat_map(|p| p.members(&g)).collect();
            let total = all.len();
            all.sort_unstable();
            all.dedup();
            if all.len() == total && all == u.members(&g) {
                parted += 1;
            }
        }
        ok &= easy == 20 && parted == ums.len();
        notes.push(format!("{}: easy covers {easy}/20, umvirate partitions {parted}/{}", g.name(), ums.len()));
    }
    Ok((ok, notes.join("; ")))
}
