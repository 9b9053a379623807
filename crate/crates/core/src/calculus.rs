//! Laplacians, derivatives, influences and averaging operators on L(V,W).
//!
//! Operators with both a spectral and a combinatorial description expose
//! each realization; the checked entry points compute all of them and fail
//! with [`Error::Disagreement`] if they differ by more than [`TAU`].

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fqlin::{all_vectors, canonicalize, dot, enumerate_subspaces, MatFq, QuotientFrame, Subspace, SUBSPACE_CAP};
use crate::scheme::{FnTable, RestrictionFrame, SchemeCtx, TAU};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RestrictionSite {
    pub v1: Subspace,
    pub w1: Subspace,
    /// index of T in L(V,W)
    pub t: usize,
}

impl RestrictionSite {
    pub fn order(&self) -> usize {
        self.v1.dim() + self.w1.codim()
    }
}

/// A one-dimensional subspace of V (given by a spanning vector) or a
/// hyperplane of W.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Direction {
    Vector(Vec<u8>),
    Hyperplane(Subspace),
}

fn check_agree(what: &str, a: &FnTable, b: &FnTable) -> Result<()> {
    let residual = a.max_abs_diff(b);
    if residual > TAU {
        return Err(Error::Disagreement { what: what.into(), residual });
    }
    Ok(())
}

/// X in L(W,V) with Im(X) containing V1 and X^{-1}(V1) inside W1
pub fn laplacian_mask(ctx: &SchemeCtx, v1: &Subspace, w1: &Subspace) -> Vec<bool> {
    let f = &ctx.field;
    let lambda = QuotientFrame::new(v1).lift_functionals(f);
    (0..ctx.size())
        .map(|x| {
            let xm = ctx.dual.mat(x);
            let image = canonicalize(f, &xm).image;
            if !v1.is_subspace_of(f, &image) {
                return false;
            }
            let pre = canonicalize(f, &lambda.mul(f, &xm).expect("shapes")).kernel;
            pre.is_subspace_of(f, w1)
        })
        .collect()
}

pub fn laplacian(ctx: &SchemeCtx, f: &FnTable, v1: &Subspace, w1: &Subspace) -> FnTable {
    let mask = laplacian_mask(ctx, v1, w1);
    ctx.spectral_filter(f, |x| mask[x].then_some(1.0))
}

/// D_{V1,W1,T}(f) on its local domain L(V/V1, W1)
pub fn derivative(ctx: &SchemeCtx, f: &FnTable, site: &RestrictionSite) -> Result<(FnTable, RestrictionFrame)> {
    let frame = RestrictionFrame::new(ctx, &site.v1, &site.w1)?;
    let lf = laplacian(ctx, f, &site.v1, &site.w1);
    Ok((frame.restrict(ctx, &lf, site.t), frame))
}

/// ||D_{V1,W1,T} f||_2^2
pub fn influence(ctx: &SchemeCtx, f: &FnTable, site: &RestrictionSite) -> Result<f64> {
    Ok(derivative(ctx, f, site)?.0.norm2_sq())
}

/// E over B in L(V/V',W) of f(A+B), by direct averaging
pub fn avg_quotient_direct(ctx: &SchemeCtx, f: &FnTable, vp: &Subspace) -> Result<FnTable> {
    let frame = RestrictionFrame::new(ctx, vp, &Subspace::full(ctx.m))?;
    let fq = &ctx.field;
    let k = frame.embed.len() as f64;
    let vals = (0..ctx.size())
        .map(|a| frame.embed.iter().map(|&b| f.values[ctx.domain.add(fq, a, b)]).sum::<Complex64>() / k)
        .collect();
    Ok(ctx.table(vals))
}

/// keep the coefficients with Im(X) inside V'
pub fn avg_quotient_spectral(ctx: &SchemeCtx, f: &FnTable, vp: &Subspace) -> FnTable {
    let fq = &ctx.field;
    ctx.spectral_filter(f, |x| {
        let image = canonicalize(fq, &ctx.dual.mat(x)).image;
        image.is_subspace_of(fq, vp).then_some(1.0)
    })
}

pub fn avg_quotient(ctx: &SchemeCtx, f: &FnTable, vp: &Subspace) -> Result<FnTable> {
    let a = avg_quotient_direct(ctx, f, vp)?;
    let b = avg_quotient_spectral(ctx, f, vp);
    check_agree("quotient average", &a, &b)?;
    Ok(b)
}

fn check_vector(ctx: &SchemeCtx, v: &[u8]) -> Result<()> {
    if v.len() != ctx.n || v.iter().any(|&x| x as usize >= ctx.q()) {
        return Err(Error::Shape(format!("vector of length {} in a space of dimension {}", v.len(), ctx.n)));
    }
    if v.iter().all(|&x| x == 0) {
        return Err(Error::Invalid("averaging direction must be a nonzero vector".into()));
    }
    Ok(())
}

/// average of the quotient averages over hyperplanes V' not containing v
pub fn avg_vector_hyperplanes(ctx: &SchemeCtx, f: &FnTable, v: &[u8]) -> Result<FnTable> {
    check_vector(ctx, v)?;
    let fq = &ctx.field;
    let hyper: Vec<Subspace> = enumerate_subspaces(fq, ctx.n, ctx.n - 1, SUBSPACE_CAP)?
        .into_iter()
        .filter(|h| !h.contains(fq, v))
        .collect();
    let mut acc = FnTable::zeros(ctx.tag(), ctx.size());
    for h in &hyper {
        acc = acc.add(&avg_quotient_direct(ctx, f, h)?);
    }
    Ok(acc.scale(Complex64::new(1.0 / hyper.len() as f64, 0.0)))
}

/// q^{-rank X} on the coefficients with v outside Im(X)
pub fn avg_vector_spectral(ctx: &SchemeCtx, f: &FnTable, v: &[u8]) -> Result<FnTable> {
    check_vector(ctx, v)?;
    let fq = &ctx.field;
    let q = ctx.q() as f64;
    Ok(ctx.spectral_filter(f, |x| {
        let image = canonicalize(fq, &ctx.dual.mat(x)).image;
        (!image.contains(fq, v)).then(|| q.powi(-(ctx.dual_rank[x] as i32)))
    }))
}

/// uniform law on the rank-one maps w (x) phi with w in W and phi(v) = 1
#[derive(Clone, Debug)]
pub struct BvDistribution {
    pub v: Vec<u8>,
    /// one domain index per (w, phi) pair
    pub support: Vec<usize>,
}

impl BvDistribution {
    pub fn new(ctx: &SchemeCtx, v: &[u8]) -> Result<Self> {
        check_vector(ctx, v)?;
        let fq = &ctx.field;
        let mut support = Vec::new();
        for phi in all_vectors(ctx.n, ctx.q()).into_iter().filter(|p| dot(fq, p, v) == 1) {
            for w in all_vectors(ctx.m, ctx.q()) {
                support.push(ctx.domain.index(&outer(fq, &w, &phi)));
            }
        }
        Ok(BvDistribution { v: v.to_vec(), support })
    }

    pub fn average(&self, ctx: &SchemeCtx, f: &FnTable) -> FnTable {
        let fq = &ctx.field;
        let k = self.support.len() as f64;
        let vals = (0..ctx.size())
            .map(|a| self.support.iter().map(|&b| f.values[ctx.domain.add(fq, a, b)]).sum::<Complex64>() / k)
            .collect();
        ctx.table(vals)
    }
}

/// the map x -> phi(x) w, as an m x n matrix
pub fn outer(f: &crate::gf::FieldCtx, w: &[u8], phi: &[u8]) -> MatFq {
    let mut out = MatFq::zeros(w.len(), phi.len());
    for (r, &wr) in w.iter().enumerate() {
        for (c, &pc) in phi.iter().enumerate() {
            out.set(r, c, f.mul(wr, pc));
        }
    }
    out
}

pub fn avg_vector_bv(ctx: &SchemeCtx, f: &FnTable, v: &[u8]) -> Result<FnTable> {
    Ok(BvDistribution::new(ctx, v)?.average(ctx, f))
}

/// E_v(f) by all three realizations, asserting agreement
pub fn avg_vector(ctx: &SchemeCtx, f: &FnTable, v: &[u8]) -> Result<FnTable> {
    let a = avg_vector_spectral(ctx, f, v)?;
    check_agree("vector average (hyperplanes)", &a, &avg_vector_hyperplanes(ctx, f, v)?)?;
    check_agree("vector average (rank-one law)", &a, &avg_vector_bv(ctx, f, v)?)?;
    Ok(a)
}

fn check_hyperplane(ctx: &SchemeCtx, wp: &Subspace) -> Result<()> {
    if wp.ambient != ctx.m || wp.codim() != 1 {
        return Err(Error::Invalid(format!(
            "dual average needs a hyperplane of W (dim {}), got dim {} in ambient {}",
            ctx.m,
            wp.dim(),
            wp.ambient
        )));
    }
    Ok(())
}

/// q^{-rank X} on the coefficients with Ker(X) + W' = W
pub fn avg_dual_spectral(ctx: &SchemeCtx, f: &FnTable, wp: &Subspace) -> Result<FnTable> {
    check_hyperplane(ctx, wp)?;
    let fq = &ctx.field;
    let q = ctx.q() as f64;
    Ok(ctx.spectral_filter(f, |x| {
        let ker = canonicalize(fq, &ctx.dual.mat(x)).kernel;
        (!ker.is_subspace_of(fq, wp)).then(|| q.powi(-(ctx.dual_rank[x] as i32)))
    }))
}

/// dualize, average along the normal functional of W', dualize back
pub fn avg_dual_composite(ctx: &SchemeCtx, f: &FnTable, wp: &Subspace) -> Result<FnTable> {
    check_hyperplane(ctx, wp)?;
    let dual = ctx.transposed()?;
    let normal = wp.annihilator(&ctx.field).basis_vecs().remove(0);
    let fstar = ctx.dualize(f, &dual);
    let avg = avg_vector_bv(&dual, &fstar, &normal)?;
    Ok(dual.dualize(&avg, ctx))
}

pub fn avg_dual(ctx: &SchemeCtx, f: &FnTable, wp: &Subspace) -> Result<FnTable> {
    let a = avg_dual_spectral(ctx, f, wp)?;
    check_agree("dual average", &a, &avg_dual_composite(ctx, f, wp)?)?;
    Ok(a)
}

/// E_U(f), spectral realization
pub fn avg_direction(ctx: &SchemeCtx, f: &FnTable, dir: &Direction) -> Result<FnTable> {
    match dir {
        Direction::Vector(v) => avg_vector_spectral(ctx, f, v),
        Direction::Hyperplane(wp) => avg_dual_spectral(ctx, f, wp),
    }
}

/// E_U(f) with every realization cross-checked
pub fn avg_direction_checked(ctx: &SchemeCtx, f: &FnTable, dir: &Direction) -> Result<FnTable> {
    match dir {
        Direction::Vector(v) => avg_vector(ctx, f, v),
        Direction::Hyperplane(wp) => avg_dual(ctx, f, wp),
    }
}

/// f - E_U(f)
pub fn comb_laplacian(ctx: &SchemeCtx, f: &FnTable, dir: &Direction) -> Result<FnTable> {
    Ok(f.sub(&avg_direction(ctx, f, dir)?))
}

/// the (V1, W1) pair of the order-one site attached to U
pub fn direction_subspaces(ctx: &SchemeCtx, dir: &Direction) -> (Subspace, Subspace) {
    match dir {
        Direction::Vector(v) => (Subspace::span(&ctx.field, ctx.n, &[v.clone()]), Subspace::full(ctx.m)),
        Direction::Hyperplane(wp) => (Subspace::zero(ctx.n), wp.clone()),
    }
}

/// the spectral Laplacian L_U: L_{span v, W} or L_{0, W'}
pub fn direction_laplacian(ctx: &SchemeCtx, f: &FnTable, dir: &Direction) -> FnTable {
    let (v1, w1) = direction_subspaces(ctx, dir);
    laplacian(ctx, f, &v1, &w1)
}

/// f - (q^i + q^{i-1}) E_U f + q^{2i-1} E_U^2 f
pub fn t_operator(ctx: &SchemeCtx, f: &FnTable, i: usize, dir: &Direction) -> Result<FnTable> {
    if i == 0 {
        return Err(Error::Invalid("the T operator needs i >= 1".into()));
    }
    let q = ctx.q() as f64;
    let e1 = avg_direction(ctx, f, dir)?;
    let e2 = avg_direction(ctx, &e1, dir)?;
    let a = q.powi(i as i32) + q.powi(i as i32 - 1);
    let b = q.powi(2 * i as i32 - 1);
    Ok(f.sub(&e1.scale(Complex64::new(a, 0.0))).add(&e2.scale(Complex64::new(b, 0.0))))
}

/// every direction: lines of V and hyperplanes of W
pub fn all_directions(ctx: &SchemeCtx) -> Result<Vec<Direction>> {
    let fq = &ctx.field;
    let mut out: Vec<Direction> = enumerate_subspaces(fq, ctx.n, 1, SUBSPACE_CAP)?
        .into_iter()
        .map(|s| Direction::Vector(s.basis_vecs().remove(0)))
        .collect();
    if ctx.m >= 1 {
        out.extend(enumerate_subspaces(fq, ctx.m, ctx.m - 1, SUBSPACE_CAP)?.into_iter().map(Direction::Hyperplane));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistributionCheck {
    /// number of (V'', W'') conditioning classes examined
    pub classes: usize,
    pub uniform_same_w: usize,
    pub uniform_escaping: usize,
    pub ok: bool,
}

/// Exhaustive joint law of (A, w (x) phi) with A uniform on L(V/V',W'),
/// phi(v) = 1, w uniform in W, conditioned on V'' = ker(phi) inside V'
/// and W'' = W' + span(w).
pub fn joint_distribution_check(ctx: &SchemeCtx, vp: &Subspace, wp: &Subspace, v: &[u8]) -> Result<DistributionCheck> {
    check_vector(ctx, v)?;
    let fq = &ctx.field;
    if !vp.contains(fq, v) {
        return Err(Error::Invalid("v must lie in V'".into()));
    }
    let frame = RestrictionFrame::new(ctx, vp, wp)?;
    let mut law: HashMap<(Subspace, Subspace), HashMap<usize, usize>> = HashMap::new();
    for phi in all_vectors(ctx.n, ctx.q()).into_iter().filter(|p| dot(fq, p, v) == 1) {
        let kerphi = Subspace::span(fq, ctx.n, &[phi.clone()]).annihilator(fq);
        let v2 = vp.intersection(fq, &kerphi);
        for w in all_vectors(ctx.m, ctx.q()) {
            let w2 = wp.sum(fq, &Subspace::span(fq, ctx.m, &[w.clone()]));
            let b = ctx.domain.index(&outer(fq, &w, &phi));
            let cell = law.entry((v2.clone(), w2)).or_default();
            for &a in &frame.embed {
                *cell.entry(ctx.domain.add(fq, a, b)).or_default() += 1;
            }
        }
    }
    let mut out = DistributionCheck { classes: law.len(), uniform_same_w: 0, uniform_escaping: 0, ok: true };
    for ((v2, w2), counts) in &law {
        let target_frame = RestrictionFrame::new(ctx, v2, w2)?;
        let escaping = w2 != wp;
        let target: Vec<usize> = target_frame
            .embed
            .iter()
            .copied()
            .filter(|&s| !escaping || !wp.contains(fq, &ctx.domain.mat(s).mul_vec(fq, v)))
            .collect();
        let first = counts.values().next().copied().unwrap_or(0);
        let uniform = counts.len() == target.len()
            && target.iter().all(|s| counts.get(s) == Some(&first));
        if uniform {
            if escaping {
                out.uniform_escaping += 1;
            } else {
                out.uniform_same_w += 1;
            }
        } else {
            out.ok = false;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fqlin::enumerate_all_subspaces;
    use crate::gf::FieldCtx;
    use crate::scheme::DegreeMode;
    use std::sync::Arc;

    fn ctx(q: usize, n: usize, m: usize) -> SchemeCtx {
        SchemeCtx::new(Arc::new(FieldCtx::new(q).unwrap()), n, m).unwrap()
    }

    fn wiggle(c: &SchemeCtx, seed: f64) -> FnTable {
        c.table(
            (0..c.size())
                .map(|i| Complex64::new((i as f64 * seed).sin(), (i as f64 * 0.7 + seed).cos()))
                .collect(),
        )
    }

    #[test]
    fn laplacian_examples() {
        let c = ctx(2, 2, 2);
        let f = wiggle(&c, 0.3);
        let full = Subspace::full(2);
        let zero = Subspace::zero(2);
        assert!(laplacian(&c, &f, &zero, &full).max_abs_diff(&f) < 1e-12);
        let line = Subspace::span(&c.field, 2, &[vec![1, 0]]);
        let l1 = laplacian(&c, &c.constant(1.0), &line, &full);
        assert!(l1.max_abs() < 1e-12);
        let once = laplacian(&c, &f, &line, &full);
        assert!(laplacian(&c, &once, &line, &full).max_abs_diff(&once) < 1e-12);
    }

    #[test]
    fn averages_agree_on_small_domains() {
        for (q, n, m) in [(2, 2, 2), (3, 2, 1), (2, 1, 3), (4, 1, 2)] {
            let c = ctx(q, n, m);
            let f = wiggle(&c, 0.41);
            for vp in enumerate_all_subspaces(&c.field, n, SUBSPACE_CAP).unwrap() {
                avg_quotient(&c, &f, &vp).unwrap();
            }
            for dir in all_directions(&c).unwrap() {
                avg_direction_checked(&c, &f, &dir).unwrap();
            }
        }
    }

    #[test]
    fn average_examples() {
        let c = ctx(2, 1, 1);
        let u1 = c.character(1);
        assert!(avg_vector(&c, &u1, &[1]).unwrap().max_abs() < 1e-12);
        let one = avg_vector(&c, &c.constant(1.0), &[1]).unwrap();
        assert!(one.max_abs_diff(&c.constant(1.0)) < 1e-12);
        let c = ctx(2, 2, 2);
        let f = wiggle(&c, 0.2);
        let full = avg_quotient(&c, &f, &Subspace::full(2)).unwrap();
        assert!(full.max_abs_diff(&f) < 1e-12);
        let zero = avg_quotient(&c, &f, &Subspace::zero(2)).unwrap();
        assert!(zero.max_abs_diff(&c.constant(0.0).add(&FnTable::constant(c.tag(), 16, f.mean()))) < 1e-12);
        assert!(avg_dual(&c, &f, &Subspace::full(2)).is_err());
        assert!(avg_vector(&c, &f, &[0, 0]).is_err());
    }

    #[test]
    fn comb_laplacian_on_characters() {
        let c = ctx(3, 2, 2);
        let fq = c.field.clone();
        let v = vec![1u8, 2];
        for x in 0..c.size() {
            let ux = c.character(x);
            let got = comb_laplacian(&c, &ux, &Direction::Vector(v.clone())).unwrap();
            let image = canonicalize(&fq, &c.dual.mat(x)).image;
            let want = if image.contains(&fq, &v) {
                ux.clone()
            } else {
                ux.scale(Complex64::new(1.0 - 3f64.powi(-(c.dual_rank[x] as i32)), 0.0))
            };
            assert!(got.max_abs_diff(&want) < 1e-12);
        }
    }

    #[test]
    fn t_operator_on_constants_vanishes() {
        let c = ctx(3, 2, 2);
        let t = t_operator(&c, &c.constant(1.0), 1, &Direction::Vector(vec![0, 1])).unwrap();
        assert!(t.max_abs() < 1e-12);
        let f = wiggle(&c, 0.9);
        let dir = Direction::Vector(vec![1, 1]);
        let t = t_operator(&c, &f, 2, &dir).unwrap();
        let lf = direction_laplacian(&c, &f, &dir);
        let lhs = c.degree_project(&lf, 2, DegreeMode::Pure).unwrap();
        assert!(lhs.max_abs_diff(&c.degree_project(&t, 2, DegreeMode::Pure).unwrap()) < 1e-10);
    }

    #[test]
    fn influence_examples() {
        let c = ctx(2, 2, 2);
        let line = Subspace::span(&c.field, 2, &[vec![1, 1]]);
        let site = RestrictionSite { v1: line.clone(), w1: Subspace::full(2), t: 5 };
        assert!(influence(&c, &c.constant(2.0), &site).unwrap() < 1e-20);
        let f = wiggle(&c, 0.5);
        let site0 = RestrictionSite { v1: Subspace::zero(2), w1: Subspace::full(2), t: 0 };
        assert!((influence(&c, &f, &site0).unwrap() - f.norm2_sq()).abs() < 1e-12);
        let mask = laplacian_mask(&c, &line, &Subspace::full(2));
        let x = mask.iter().position(|&b| b).unwrap();
        assert!((influence(&c, &c.character(x), &site).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn joint_distribution_small() {
        let c = ctx(2, 2, 2);
        let fq = c.field.clone();
        for vp in enumerate_all_subspaces(&fq, 2, SUBSPACE_CAP).unwrap() {
            for wp in enumerate_all_subspaces(&fq, 2, SUBSPACE_CAP).unwrap() {
                for v in vp.members(&fq).into_iter().filter(|v| v.iter().any(|&x| x != 0)) {
                    let r = joint_distribution_check(&c, &vp, &wp, &v).unwrap();
                    assert!(r.ok, "{vp:?} {wp:?} {v:?}");
                }
            }
        }
    }
}
