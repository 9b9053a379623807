//! Convolution operators T_f h = f * h restricted to the level spaces
//! V_{=d}, their norms, and mixing experiments on G.

pub mod inequalities;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bogolyubov::GroupSet;
use crate::error::{Error, Result};
use crate::globality::{density_bump_search, set_global_audit, BumpConfig, BumpOutcome, SetGlobalReport};
use crate::groups::{convolution_matrix, GroupTable, IsotypicReport, LevelBasisSet};
use crate::scheme::{DegreeMode, FnTable, TAU};

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 10_000;
pub const EXACT_DIM_MAX: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NormMethod {
    Exact,
    Power,
}

/// f~(x) = conj f(x^{-1}), so that T_f^* = T_{f~}
pub fn adjoint_kernel(g: &GroupTable, f: &FnTable) -> FnTable {
    g.table((0..g.order()).map(|x| f.values[g.inv(x)].conj()).collect())
}

/// matrix of T_f on the orthonormal basis of V_{=d}
pub fn operator_matrix(g: &GroupTable, levels: &LevelBasisSet, f: &FnTable, d: usize) -> DMatrix<Complex64> {
    convolution_matrix(g, levels, f, d)
}

fn exact_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

fn power_norm(g: &GroupTable, levels: &LevelBasisSet, f: &FnTable, d: usize, seed: u64) -> Result<f64> {
    let ft = adjoint_kernel(g, f);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = g.table((0..g.order()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect());
    let mut h = levels.level_project(&start, d, DegreeMode::Pure)?;
    let mut prev = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let nh = h.norm2();
        if nh < 1e-300 {
            return Ok(0.0);
        }
        h = h.scale(Complex64::new(1.0 / nh, 0.0));
        let th = g.convolve(f, &h);
        let lambda = th.norm2_sq();
        if lambda < 1e-300 {
            return Ok(0.0);
        }
        let next = levels.level_project(&g.convolve(&ft, &th), d, DegreeMode::Pure)?;
        if (lambda - prev).abs() <= POWER_TOL * lambda.max(1e-300) {
            return Ok(lambda.sqrt());
        }
        prev = lambda;
        h = next;
    }
    Ok(prev.sqrt())
}

/// ||T_f||_{V_{=d}}; 0 on an empty level
pub fn conv_operator_norm(g: &GroupTable, levels: &LevelBasisSet, f: &FnTable, d: usize, method: NormMethod) -> Result<f64> {
    if levels.domain != g.tag() || f.domain != g.tag() {
        return Err(Error::Missing(format!("level basis or function not on {}", g.name())));
    }
    if levels.level_dim(d) == 0 {
        return Ok(0.0);
    }
    match method {
        NormMethod::Exact if levels.level_dim(d) <= EXACT_DIM_MAX => Ok(exact_norm(&operator_matrix(g, levels, f, d))),
        _ => power_norm(g, levels, f, d, d as u64),
    }
}

/// One level of the operator-norm report.
#[derive(Clone, Debug, Serialize)]
pub struct OperatorNormRow {
    pub d: usize,
    pub level_dim: usize,
    pub m_d: Option<usize>,
    pub norm_exact: f64,
    pub norm_power: f64,
    /// ||f_{=d}||_2 / sqrt(m_d)
    pub sx_bound: f64,
    /// tr(M^* M) for the matrix M of T_{f_{=d}} on V_{=d}
    pub trace_matrix: f64,
    /// ||f_{=d}||_2^2
    pub trace_norm: f64,
    /// q^{-c d n} E[f] for the configured c
    pub target: f64,
    /// largest c with ||T_f|| <= q^{-c d n} E[f]
    pub empirical_c: Option<f64>,
    /// max entry of M_f - M_{f_{=d}}
    pub pure_agreement: f64,
    pub trace_ok: bool,
    pub sx_ok: bool,
    pub methods_agree: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OperatorNormReport {
    pub group: String,
    pub mean: f64,
    pub c: f64,
    pub rows: Vec<OperatorNormRow>,
}

impl OperatorNormReport {
    pub fn ok(&self) -> bool {
        self.rows.iter().all(|r| r.trace_ok && r.sx_ok && r.methods_agree)
    }
}

pub fn sarnak_xue_check(g: &GroupTable, levels: &LevelBasisSet, iso: &IsotypicReport, f: &FnTable, d: usize, c: f64) -> Result<OperatorNormRow> {
    let level = iso
        .levels
        .iter()
        .find(|l| l.d == d)
        .ok_or_else(|| Error::Missing(format!("isotypic report has no level {d}")))?;
    let fd = levels.level_project(f, d, DegreeMode::Pure)?;
    let dim = levels.level_dim(d);
    let mf = operator_matrix(g, levels, f, d);
    let mfd = operator_matrix(g, levels, &fd, d);
    let trace_matrix: f64 = mfd.iter().map(|z| z.norm_sqr()).sum();
    let trace_norm = fd.norm2_sq();
    let norm_exact = conv_operator_norm(g, levels, f, d, NormMethod::Exact)?;
    let norm_power = conv_operator_norm(g, levels, f, d, NormMethod::Power)?;
    let sx_bound = match level.m_d {
        Some(m) => fd.norm2() / (m as f64).sqrt(),
        None => 0.0,
    };
    let q = g.q() as f64;
    let mean = f.mean().re;
    let dn = (d * g.n) as f64;
    let target = q.powf(-c * dn) * mean;
    let empirical_c = (d > 0 && norm_exact > 0.0 && mean > 0.0).then(|| -(norm_exact / mean).ln() / (dn * q.ln()));
    let pure_agreement = if dim == 0 { 0.0 } else { (&mf - &mfd).iter().map(|z| z.norm()).fold(0.0, f64::max) };
    Ok(OperatorNormRow {
        d,
        level_dim: dim,
        m_d: level.m_d,
        norm_exact,
        norm_power,
        sx_bound,
        trace_matrix,
        trace_norm,
        target,
        empirical_c,
        pure_agreement,
        trace_ok: (trace_matrix - trace_norm).abs() <= 1e-8 * trace_norm.max(1.0),
        sx_ok: norm_exact <= sx_bound + TAU,
        methods_agree: (norm_exact - norm_power).abs() <= 1e-6 * norm_exact.max(1.0),
    })
}

pub fn operator_norm_report(g: &GroupTable, levels: &LevelBasisSet, iso: &IsotypicReport, f: &FnTable, c: f64) -> Result<OperatorNormReport> {
    let rows = (0..=levels.dmax()).map(|d| sarnak_xue_check(g, levels, iso, f, d, c)).collect::<Result<_>>()?;
    Ok(OperatorNormReport { group: g.name(), mean: f.mean().re, c, rows })
}

/// max over basis vectors h of V_{=d} of ||T_f h - (T_f h)_{=d}|| / ||h||
pub fn level_invariance_residual(g: &GroupTable, levels: &LevelBasisSet, f: &FnTable, d: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for b in &levels.basis[levels.level_range(d)] {
        let h = g.table(b.clone());
        let th = g.convolve(f, &h);
        let inside = levels.level_project(&th, d, DegreeMode::Pure)?;
        worst = worst.max(th.sub(&inside).norm2() / h.norm2());
    }
    Ok(worst)
}

/// (1_A * 1_B)(x) by counting pairs a b = x
pub fn count_convolution(g: &GroupTable, a: &GroupSet, b: &GroupSet) -> FnTable {
    let mut counts = vec![0usize; g.order()];
    for &x in &a.elems {
        for &y in &b.elems {
            counts[g.mul(x, y)] += 1;
        }
    }
    g.table(counts.into_iter().map(|c| Complex64::new(c as f64 / g.order() as f64, 0.0)).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingReport {
    pub mu_a: f64,
    pub mu_b: f64,
    pub mu_c: Option<f64>,
    /// ||f*g - E[f]E[g]||_2
    pub deviation: f64,
    /// ||T_f g_{=d}||_2 for d = 1..
    pub per_level: Vec<f64>,
    /// | deviation^2 - sum per_level^2 |
    pub decomposition_residual: f64,
    /// max |f*g - counting oracle|
    pub oracle_residual: f64,
    /// q^{-n/4} E[f]E[g], or q^{-n/5} E[f]E[g]E[h]
    pub bound: f64,
    pub ratio: f64,
    pub triple: Option<f64>,
    pub triple_deviation: Option<f64>,
    /// sum_d <T_f g_{=d}, h_{=d}>
    pub triple_levels: Option<f64>,
    /// AB = G, or ABC = G
    pub covers: bool,
}

impl MixingReport {
    pub fn ok(&self) -> bool {
        let triple_ok = match (self.triple, self.triple_levels) {
            (Some(t), Some(l)) => (t - l).abs() <= 1e-8,
            _ => true,
        };
        self.decomposition_residual <= 1e-8 && self.oracle_residual == 0.0 && triple_ok
    }
}

fn check_sets(g: &GroupTable, sets: &[&GroupSet]) -> Result<()> {
    for s in sets {
        if s.is_empty() {
            return Err(Error::EmptySet);
        }
        if s.tag != g.tag() {
            return Err(Error::Shape(format!("set belongs to {:?}, not {}", s.tag, g.name())));
        }
    }
    Ok(())
}

fn full_levels(g: &GroupTable, levels: &LevelBasisSet) -> Result<()> {
    if levels.dims.last() != Some(&g.order()) {
        return Err(Error::Missing(format!("level basis does not exhaust L^2({})", g.name())));
    }
    Ok(())
}

pub fn mixing_experiment(g: &GroupTable, levels: &LevelBasisSet, a: &GroupSet, b: &GroupSet) -> Result<MixingReport> {
    check_sets(g, &[a, b])?;
    full_levels(g, levels)?;
    let f = a.indicator(g);
    let h = b.indicator(g);
    let conv = g.convolve(&f, &h);
    let oracle = count_convolution(g, a, b);
    let oracle_residual = conv.max_abs_diff(&oracle);
    let (mu_a, mu_b) = (a.density(), b.density());
    let dev = conv.sub(&g.constant(mu_a * mu_b));
    let deviation = dev.norm2();
    let mut per_level = Vec::new();
    for d in 1..=levels.dmax() {
        let hd = levels.level_project(&h, d, DegreeMode::Pure)?;
        per_level.push(g.convolve(&f, &hd).norm2());
    }
    let sum: f64 = per_level.iter().map(|x| x * x).sum();
    let bound = (g.q() as f64).powf(-(g.n as f64) / 4.0) * mu_a * mu_b;
    Ok(MixingReport {
        mu_a,
        mu_b,
        mu_c: None,
        deviation,
        per_level,
        decomposition_residual: (deviation * deviation - sum).abs(),
        oracle_residual,
        bound,
        ratio: deviation / bound,
        triple: None,
        triple_deviation: None,
        triple_levels: None,
        covers: a.product(g, b).is_full(),
    })
}

pub fn product_mixing(g: &GroupTable, levels: &LevelBasisSet, a: &GroupSet, b: &GroupSet, c: &GroupSet) -> Result<MixingReport> {
    check_sets(g, &[c])?;
    let mut rep = mixing_experiment(g, levels, a, b)?;
    let f = a.indicator(g);
    let h = b.indicator(g);
    let k = c.indicator(g);
    let conv = g.convolve(&f, &h);
    let triple = conv.inner(&k).re;
    let mut levels_sum = 0.0;
    for d in 0..=levels.dmax() {
        let hd = levels.level_project(&h, d, DegreeMode::Pure)?;
        let kd = levels.level_project(&k, d, DegreeMode::Pure)?;
        levels_sum += g.convolve(&f, &hd).inner(&kd).re;
    }
    let mu_c = c.density();
    let prod = rep.mu_a * rep.mu_b * mu_c;
    let bound = (g.q() as f64).powf(-(g.n as f64) / 5.0) * prod;
    let triple_deviation = (triple - prod).abs();
    rep.mu_c = Some(mu_c);
    rep.triple = Some(triple);
    rep.triple_deviation = Some(triple_deviation);
    rep.triple_levels = Some(levels_sum);
    rep.bound = bound;
    rep.ratio = triple_deviation / bound;
    rep.covers = a.product(g, b).product(g, c).is_full();
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct ProductFreeReport {
    pub size: usize,
    /// |A^2 cap A|
    pub square_hits: usize,
    pub product_free: bool,
    pub audit: Option<SetGlobalReport>,
    pub bump: Option<BumpOutcome>,
}

pub fn product_free_witness(g: &GroupTable, a: &GroupSet, cfg: BumpConfig) -> Result<ProductFreeReport> {
    let mut hits = vec![false; g.order()];
    for &x in &a.elems {
        for &y in &a.elems {
            let p = g.mul(x, y);
            if a.contains(p) {
                hits[p] = true;
            }
        }
    }
    let square_hits = hits.iter().filter(|&&h| h).count();
    let product_free = square_hits == 0;
    let (audit, bump) = if product_free && !a.is_empty() {
        (Some(set_global_audit(g, &a.elems, cfg.rmax, cfg.r)?), Some(density_bump_search(g, &a.elems, cfg)?))
    } else {
        (None, None)
    };
    Ok(ProductFreeReport { size: a.len(), square_hits, product_free, audit, bump })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bogolyubov::groumvirate_enumerate;
    use crate::gf::FieldCtx;
    use crate::globality::GoodUmvirate;
    use crate::groups::{isotypic_refine, GroupKind, LevelOptions};
    use std::sync::Arc;

    fn setup(n: usize, q: usize) -> (GroupTable, LevelBasisSet, IsotypicReport) {
        let g = GroupTable::enumerate(GroupKind::SL, n, Arc::new(FieldCtx::new(q).unwrap())).unwrap();
        let lv = LevelBasisSet::build(&g, LevelOptions::strict(n)).unwrap();
        let iso = isotypic_refine(&g, &lv, 3, 0).unwrap();
        (g, lv, iso)
    }

    #[test]
    fn norms_of_unit_and_constant() {
        let (g, lv, iso) = setup(2, 3);
        let one = g.constant(1.0);
        for d in 1..=2 {
            assert!(conv_operator_norm(&g, &lv, &one, d, NormMethod::Exact).unwrap() < 1e-9);
        }
        let delta = g.delta();
        for d in 0..=2 {
            if lv.level_dim(d) > 0 {
                let e = conv_operator_norm(&g, &lv, &delta, d, NormMethod::Exact).unwrap();
                assert!((e - 1.0).abs() < 1e-9);
            }
        }
        let row = sarnak_xue_check(&g, &lv, &iso, &delta, 0, 0.1).unwrap();
        assert!(row.trace_ok && row.sx_ok);
        let total: f64 = (0..=2).map(|d| sarnak_xue_check(&g, &lv, &iso, &delta, d, 0.1).unwrap().trace_matrix).sum();
        assert!((total - 24.0).abs() < 1e-8);
    }

    #[test]
    fn random_boolean_methods_agree() {
        let (g, lv, iso) = setup(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let f = g.indicator((0..24).filter(|_| rng.gen_bool(0.5)));
            let rep = operator_norm_report(&g, &lv, &iso, &f, 0.1).unwrap();
            assert!(rep.ok(), "{rep:?}");
            for d in 0..=2 {
                assert!(level_invariance_residual(&g, &lv, &f, d).unwrap() < 1e-9);
                assert!(rep.rows[d].pure_agreement < 1e-9);
            }
        }
    }

    #[test]
    fn mixing_examples() {
        let (g, lv, _) = setup(2, 3);
        let all = GroupSet::full(&g);
        let r = mixing_experiment(&g, &lv, &all, &all).unwrap();
        assert!(r.deviation < 1e-12 && r.ok());
        let a = GroupSet::new(&g, [0, 3, 7, 8, 20]).unwrap();
        let r = mixing_experiment(&g, &lv, &a, &all).unwrap();
        assert!(r.deviation < 1e-12);
        let r = product_mixing(&g, &lv, &all, &all, &all).unwrap();
        assert!((r.triple.unwrap() - 1.0).abs() < 1e-12 && r.covers && r.ok());
        let ab = a.product(&g, &a);
        let rest: Vec<usize> = (0..24).filter(|&o| !ab.contains(o)).collect();
        if !rest.is_empty() {
            let c = GroupSet::new(&g, rest).unwrap();
            let r = product_mixing(&g, &lv, &a, &a, &c).unwrap();
            assert!(r.triple.unwrap().abs() < 1e-12 && r.ok());
        }
    }

    #[test]
    fn product_free_cases() {
        let g = GroupTable::enumerate(GroupKind::SL, 3, Arc::new(FieldCtx::new(2).unwrap())).unwrap();
        let cfg = BumpConfig::from_zeta(0.01, 2, 3, 2);
        let r = product_free_witness(&g, &GroupSet::full(&g), cfg).unwrap();
        assert!(!r.product_free);
        let x = (0..g.order()).find(|&x| g.mul(x, x) != x).unwrap();
        let r = product_free_witness(&g, &GroupSet::new(&g, [x]).unwrap(), cfg).unwrap();
        assert!(r.product_free && r.audit.is_some());
        let e1 = groumvirate_enumerate(&g, 1).unwrap();
        let gr = &e1.groumvirates[0].good;
        for y in 0..g.order() {
            let coset = GoodUmvirate { h: g.mat(y).clone(), ..gr.clone() };
            let a = GroupSet::new(&g, coset.members(&g)).unwrap();
            let brute = a.elems.iter().all(|&u| a.elems.iter().all(|&v| !a.contains(g.mul(u, v))));
            let r = product_free_witness(&g, &a, cfg).unwrap();
            assert_eq!(r.product_free, brute);
        }
    }
}
