//! Globalness audits on L(V,W) and on G, umvirates in block normal form,
//! partitions into good umvirates, and the density-bump search.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::calculus::laplacian;
use crate::error::{Error, Result};
use crate::fqlin::{enumerate_all_subspaces, enumerate_subspaces, rref_in_place, vec_from_index, vec_index, MatFq, QuotientFrame, Subspace, SUBSPACE_CAP};
use crate::gf::FieldCtx;
use crate::groups::{GroupKind, GroupTable};
use crate::scheme::{FnTable, RestrictionFrame, SchemeCtx};

const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SiteWitness {
    pub v_index: usize,
    pub w_index: usize,
    /// least index of the coset
    pub t: usize,
    pub v_basis: Vec<Vec<u8>>,
    pub w_basis: Vec<Vec<u8>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditRow {
    pub order: usize,
    pub max: f64,
    pub witness: Option<SiteWitness>,
    pub threshold: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GlobalnessReport {
    pub rows: Vec<AuditRow>,
}

impl GlobalnessReport {
    pub fn max_at(&self, d: usize) -> f64 {
        self.rows.iter().find(|r| r.order == d).map_or(0.0, |r| r.max)
    }

    /// the largest value over all orders <= d
    pub fn max_upto(&self, d: usize) -> f64 {
        self.rows.iter().filter(|r| r.order <= d).map(|r| r.max).fold(0.0, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// one (V', W') pair with its restriction frame and cosets
#[derive(Clone, Debug)]
pub struct SiteClass {
    pub v_index: usize,
    pub w_index: usize,
    pub frame: RestrictionFrame,
    pub cosets: Vec<(usize, Vec<usize>)>,
}

/// Every restriction site of order <= dmax, grouped by order. Subspace
/// indices refer to `enumerate_all_subspaces` order.
#[derive(Clone, Debug)]
pub struct SiteCatalog {
    pub vsubs: Vec<Subspace>,
    pub wsubs: Vec<Subspace>,
    pub by_order: Vec<Vec<SiteClass>>,
}

impl SiteCatalog {
    pub fn new(ctx: &SchemeCtx, dmax: usize) -> Result<Self> {
        if dmax > ctx.n + ctx.m {
            return Err(Error::Invalid(format!("restriction order {dmax} exceeds dim V + dim W = {}", ctx.n + ctx.m)));
        }
        let f = &ctx.field;
        let vsubs = enumerate_all_subspaces(f, ctx.n, SUBSPACE_CAP)?;
        let wsubs = enumerate_all_subspaces(f, ctx.m, SUBSPACE_CAP)?;
        let mut by_order: Vec<Vec<SiteClass>> = vec![Vec::new(); dmax + 1];
        for (vi, v) in vsubs.iter().enumerate() {
            for (wi, w) in wsubs.iter().enumerate() {
                let order = v.dim() + w.codim();
                if order > dmax {
                    continue;
                }
                let frame = RestrictionFrame::new(ctx, v, w)?;
                let cosets = frame.cosets(ctx);
                by_order[order].push(SiteClass { v_index: vi, w_index: wi, frame, cosets });
            }
        }
        Ok(SiteCatalog { vsubs, wsubs, by_order })
    }

    pub fn dmax(&self) -> usize {
        self.by_order.len() - 1
    }

    fn witness(&self, class: &SiteClass, t: usize) -> SiteWitness {
        SiteWitness {
            v_index: class.v_index,
            w_index: class.w_index,
            t,
            v_basis: self.vsubs[class.v_index].basis_vecs(),
            w_basis: self.wsubs[class.w_index].basis_vecs(),
        }
    }

    /// max over order-d cosets of the mean of `weights`, first witness in
    /// (V' index, W' index, representative) order
    pub fn max_coset_mean(&self, weights: &[f64], d: usize) -> (f64, Option<SiteWitness>) {
        let mut best = f64::NEG_INFINITY;
        let mut wit = None;
        for class in &self.by_order[d] {
            for (t, members) in &class.cosets {
                let m = members.iter().map(|&a| weights[a]).sum::<f64>() / members.len() as f64;
                if improves(m, best) {
                    best = m;
                    wit = Some((class, *t));
                }
            }
        }
        match wit {
            Some((c, t)) => (best, Some(self.witness(c, t))),
            None => (0.0, None),
        }
    }
}

fn improves(x: f64, best: f64) -> bool {
    best == f64::NEG_INFINITY || x > best + TIE_TOL * best.abs().max(1.0)
}

/// q^{zeta d n} ||f||_2^2
pub fn zeta_threshold(zeta: f64, q: usize, n: usize, norm2sq: f64) -> impl Fn(usize) -> Option<f64> {
    move |d| Some((q as f64).powf(zeta * d as f64 * n as f64) * norm2sq)
}

fn rows_from(dmax: usize, threshold: &dyn Fn(usize) -> Option<f64>, value: impl Fn(usize) -> (f64, Option<SiteWitness>)) -> GlobalnessReport {
    let rows = (0..=dmax)
        .map(|d| {
            let (max, witness) = value(d);
            let threshold = threshold(d);
            let pass = threshold.is_none_or(|t| max <= t * (1.0 + 1e-9) + 1e-12);
            AuditRow { order: d, max, witness, threshold, pass }
        })
        .collect();
    GlobalnessReport { rows }
}

/// max ||f_{(V',W')->T}||_2^2 per order, on a prebuilt catalog
pub fn global_audit_with(cat: &SiteCatalog, f: &FnTable, dmax: usize, threshold: &dyn Fn(usize) -> Option<f64>) -> GlobalnessReport {
    let weights: Vec<f64> = f.values.iter().map(|v| v.norm_sqr()).collect();
    rows_from(dmax.min(cat.dmax()), threshold, |d| cat.max_coset_mean(&weights, d))
}

pub fn global_audit(ctx: &SchemeCtx, f: &FnTable, dmax: usize, threshold: &dyn Fn(usize) -> Option<f64>) -> Result<GlobalnessReport> {
    let cat = SiteCatalog::new(ctx, dmax)?;
    Ok(global_audit_with(&cat, f, dmax, threshold))
}

/// max ||f_{(V',W')->T}||_{l'} per order
pub fn lp_global_audit_with(cat: &SiteCatalog, f: &FnTable, rmax: usize, ellp: f64) -> Result<GlobalnessReport> {
    if ellp < 1.0 {
        return Err(Error::Invalid(format!("norm exponent must be at least 1, got {ellp}")));
    }
    let weights: Vec<f64> = f.values.iter().map(|v| v.norm().powf(ellp)).collect();
    Ok(rows_from(rmax.min(cat.dmax()), &|_| None, |d| {
        let (m, w) = cat.max_coset_mean(&weights, d);
        (m.powf(1.0 / ellp), w)
    }))
}

pub fn lp_global_audit(ctx: &SchemeCtx, f: &FnTable, rmax: usize, ellp: f64) -> Result<GlobalnessReport> {
    let cat = SiteCatalog::new(ctx, rmax)?;
    lp_global_audit_with(&cat, f, rmax, ellp)
}

/// max generalized influence I_{V1,W1,T}(f) per order <= d
pub fn influence_audit_with(ctx: &SchemeCtx, cat: &SiteCatalog, f: &FnTable, d: usize, threshold: &dyn Fn(usize) -> Option<f64>) -> GlobalnessReport {
    let d = d.min(cat.dmax());
    rows_from(d, threshold, |i| {
        let mut best = f64::NEG_INFINITY;
        let mut wit = None;
        for class in &cat.by_order[i] {
            let lf = laplacian(ctx, f, &class.frame.vsub, &class.frame.wsub);
            for (t, members) in &class.cosets {
                let m = members.iter().map(|&a| lf.values[a].norm_sqr()).sum::<f64>() / members.len() as f64;
                if improves(m, best) {
                    best = m;
                    wit = Some((class, *t));
                }
            }
        }
        match wit {
            Some((c, t)) => (best, Some(cat.witness(c, t))),
            None => (0.0, None),
        }
    })
}

pub fn influence_audit(ctx: &SchemeCtx, f: &FnTable, d: usize) -> Result<GlobalnessReport> {
    let cat = SiteCatalog::new(ctx, d)?;
    Ok(influence_audit_with(ctx, &cat, f, d, &|_| None))
}

/// reduce augmented constraint rows [a | b] on the `a` part; `None` if inconsistent
fn normalize_constraints(f: &FieldCtx, n: usize, pairs: &[(Vec<u8>, Vec<u8>)]) -> Option<Vec<(Vec<u8>, Vec<u8>)>> {
    let mut m = MatFq::zeros(pairs.len(), 2 * n);
    for (i, (a, b)) in pairs.iter().enumerate() {
        for j in 0..n {
            m.set(i, j, a[j]);
            m.set(i, n + j, b[j]);
        }
    }
    let pivots = rref_in_place(f, &mut m);
    let mut out = Vec::new();
    for (i, &p) in pivots.iter().enumerate() {
        if p >= n {
            return None;
        }
        let row = m.row(i);
        out.push((row[..n].to_vec(), row[n..].to_vec()));
    }
    Some(out)
}

/// {x : x v_i = w_i, x^T phi_j = psi_j}
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Umvirate {
    pub n: usize,
    pub rows: Vec<(Vec<u8>, Vec<u8>)>,
    pub funcs: Vec<(Vec<u8>, Vec<u8>)>,
}

impl Umvirate {
    /// normalizes each constraint family to reduced echelon form; an
    /// inconsistent family is rejected as empty
    pub fn new(f: &FieldCtx, n: usize, rows: &[(Vec<u8>, Vec<u8>)], funcs: &[(Vec<u8>, Vec<u8>)]) -> Result<Self> {
        for (a, b) in rows.iter().chain(funcs) {
            if a.len() != n || b.len() != n {
                return Err(Error::Shape(format!("umvirate constraint vectors must have length {n}")));
            }
        }
        let rows = normalize_constraints(f, n, rows).ok_or(Error::EmptySet)?;
        let funcs = normalize_constraints(f, n, funcs).ok_or(Error::EmptySet)?;
        Ok(Umvirate { n, rows, funcs })
    }

    pub fn whole(n: usize) -> Self {
        Umvirate { n, rows: vec![], funcs: vec![] }
    }

    pub fn order(&self) -> usize {
        self.rows.len() + self.funcs.len()
    }

    pub fn contains(&self, f: &FieldCtx, x: &MatFq) -> bool {
        self.rows.iter().all(|(v, w)| &x.mul_vec(f, v) == w) && {
            let xt = x.transpose();
            self.funcs.iter().all(|(p, s)| &xt.mul_vec(f, p) == s)
        }
    }

    pub fn members(&self, g: &GroupTable) -> Vec<usize> {
        (0..g.order()).filter(|&o| self.contains(&g.field, g.mat(o))).collect()
    }
}

/// x with top-left I_k and zero off-diagonal blocks
pub fn in_block_subgroup(x: &MatFq, k: usize) -> bool {
    let n = x.rows;
    for i in 0..n {
        for j in 0..n {
            if (i < k || j < k) && x.get(i, j) != u8::from(i == j) {
                return false;
            }
        }
    }
    true
}

/// U = g L_k h, with L_k = { diag(I_k, Y) } inside the ambient group
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GoodUmvirate {
    pub k: usize,
    pub g: MatFq,
    pub h: MatFq,
}

impl GoodUmvirate {
    pub fn whole(n: usize) -> Self {
        GoodUmvirate { k: 0, g: MatFq::identity(n), h: MatFq::identity(n) }
    }

    /// the groumvirate g L_k g^{-1}
    pub fn groumvirate(f: &FieldCtx, k: usize, g: &MatFq) -> Self {
        GoodUmvirate { k, g: g.clone(), h: g.inverse(f).expect("invertible") }
    }

    pub fn contains(&self, f: &FieldCtx, x: &MatFq) -> bool {
        let gi = self.g.inverse(f).expect("invertible");
        let hi = self.h.inverse(f).expect("invertible");
        in_block_subgroup(&gi.mul(f, x).and_then(|y| y.mul(f, &hi)).expect("square"), self.k)
    }

    pub fn members(&self, grp: &GroupTable) -> Vec<usize> {
        let f = &grp.field;
        let gi = self.g.inverse(f).expect("invertible");
        let hi = self.h.inverse(f).expect("invertible");
        (0..grp.order())
            .filter(|&o| in_block_subgroup(&gi.mul(f, grp.mat(o)).and_then(|y| y.mul(f, &hi)).expect("square"), self.k))
            .collect()
    }

    /// the 2k constraints x (h^{-1} e_i) = g e_i and (g^{-1})^T e_i -> h^T e_i
    pub fn as_umvirate(&self, f: &FieldCtx) -> Umvirate {
        let n = self.g.rows;
        let gi = self.g.inverse(f).expect("invertible");
        let hi = self.h.inverse(f).expect("invertible");
        let rows: Vec<_> = (0..self.k).map(|i| (hi.col(i), self.g.col(i))).collect();
        let funcs: Vec<_> = (0..self.k).map(|i| (gi.row(i).to_vec(), self.h.row(i).to_vec())).collect();
        Umvirate::new(f, n, &rows, &funcs).expect("consistent by construction")
    }
}

/// E with E m in reduced row-echelon form, and the pivot columns
fn rref_transform(f: &FieldCtx, m: &MatFq) -> (MatFq, Vec<usize>) {
    let mut aug = MatFq::zeros(m.rows, m.cols + m.rows);
    aug.set_block(0, 0, m);
    aug.set_block(0, m.cols, &MatFq::identity(m.rows));
    let pivots = rref_in_place(f, &mut aug);
    (aug.block(0, m.rows, m.cols, m.cols + m.rows), pivots.into_iter().filter(|&p| p < m.cols).collect())
}

fn block_diag(a: &MatFq, b: &MatFq) -> MatFq {
    let mut out = MatFq::zeros(a.rows + b.rows, a.cols + b.cols);
    out.set_block(0, 0, a);
    out.set_block(a.rows, a.cols, b);
    out
}

/// columns `cols` of the basis completed by the standard vectors off its pivots
fn complete_columns(f: &FieldCtx, n: usize, vecs: &[Vec<u8>]) -> MatFq {
    let frame = QuotientFrame::new(&Subspace::span(f, n, vecs));
    let mut cols: Vec<Vec<u8>> = vecs.to_vec();
    cols.extend(frame.lift_basis.row_vecs());
    MatFq::from_cols(n, &cols)
}

/// Change of bases (xi, basis) under which U = { x : xi x basis has
/// blocks (M P; N *) } with M = (I_h 0; 0 0), the first h rows of P zero and
/// the first h columns of N zero.
#[derive(Clone, Debug, Serialize)]
pub struct NormalForm {
    pub xi: MatFq,
    pub basis: MatFq,
    /// number of fixed rows (functional constraints)
    pub fixed_rows: usize,
    /// number of fixed columns (row constraints)
    pub fixed_cols: usize,
    pub rank_m: usize,
    pub m: MatFq,
    pub p: MatFq,
    pub nblk: MatFq,
    /// M square and invertible
    pub good: bool,
}

impl NormalForm {
    pub fn transform(&self, f: &FieldCtx, x: &MatFq) -> MatFq {
        self.xi.mul(f, x).and_then(|y| y.mul(f, &self.basis)).expect("square")
    }

    pub fn contains(&self, f: &FieldCtx, x: &MatFq) -> bool {
        let z = self.transform(f, x);
        let (k, l, n) = (self.fixed_rows, self.fixed_cols, self.xi.rows);
        z.block(0, k, 0, l) == self.m && z.block(0, k, l, n) == self.p && z.block(k, n, 0, l) == self.nblk
    }

    /// P' and N', the blocks whose ranks decide invertibility
    fn reduced_blocks(&self) -> (MatFq, MatFq) {
        let (k, l, h, n) = (self.fixed_rows, self.fixed_cols, self.rank_m, self.xi.rows);
        (self.p.block(h, k, 0, n - l), self.nblk.block(0, n - k, h, l))
    }
}

pub fn umvirate_normal_form(f: &FieldCtx, u: &Umvirate) -> Result<NormalForm> {
    let n = u.n;
    let (l, k) = (u.rows.len(), u.funcs.len());
    let vs: Vec<Vec<u8>> = u.rows.iter().map(|r| r.0.clone()).collect();
    let ws: Vec<Vec<u8>> = u.rows.iter().map(|r| r.1.clone()).collect();
    let phis: Vec<Vec<u8>> = u.funcs.iter().map(|r| r.0.clone()).collect();
    let psis: Vec<Vec<u8>> = u.funcs.iter().map(|r| r.1.clone()).collect();
    let mut basis = complete_columns(f, n, &vs);
    let mut xi = complete_columns(f, n, &phis).transpose();
    // fixed blocks from the constraints: top rows psi^T basis, left columns xi w
    let psi_t = MatFq::from_rows(n, &psis);
    let wmat = MatFq::from_cols(n, &ws);
    let mut top = psi_t.mul(f, &basis)?;
    let mut left = xi.mul(f, &wmat)?;
    if top.block(0, k, 0, l) != left.block(0, k, 0, l) {
        return Err(Error::EmptySet);
    }
    // M -> (I_h 0; 0 0)
    let m0 = top.block(0, k, 0, l);
    let (e, piv) = rref_transform(f, &m0);
    let em = e.mul(f, &m0)?;
    let (ft, _) = rref_transform(f, &em.transpose());
    let h = piv.len();
    let rowop = block_diag(&e, &MatFq::identity(n - k));
    let colop = block_diag(&ft.transpose(), &MatFq::identity(n - l));
    xi = rowop.mul(f, &xi)?;
    basis = basis.mul(f, &colop)?;
    top = e.mul(f, &top)?.mul(f, &colop)?;
    left = rowop.mul(f, &left)?.mul(f, &ft.transpose())?;
    // clear the first h rows of P by column operations
    let mut r2 = MatFq::identity(n);
    for i in 0..h {
        for j in l..n {
            r2.set(i, j, f.neg(top.get(i, j)));
        }
    }
    basis = basis.mul(f, &r2)?;
    top = top.mul(f, &r2)?;
    // clear the first h columns of N by row operations
    let mut l3 = MatFq::identity(n);
    for r in k..n {
        for i in 0..h {
            l3.set(r, i, f.neg(left.get(r, i)));
        }
    }
    xi = l3.mul(f, &xi)?;
    left = l3.mul(f, &left)?;
    let nf = NormalForm {
        good: k == l && h == k,
        m: top.block(0, k, 0, l),
        p: top.block(0, k, l, n),
        nblk: left.block(k, n, 0, l),
        xi,
        basis,
        fixed_rows: k,
        fixed_cols: l,
        rank_m: h,
    };
    let (pp, np) = nf.reduced_blocks();
    if pp.rank(f) != pp.rows || np.rank(f) != np.cols {
        return Err(Error::NoInvertible);
    }
    Ok(nf)
}

fn permute_rows(m: &MatFq, order: &[usize]) -> MatFq {
    MatFq::from_rows(m.cols, &order.iter().map(|&r| m.row(r).to_vec()).collect::<Vec<_>>())
}

fn permute_cols(m: &MatFq, order: &[usize]) -> MatFq {
    MatFq::from_cols(m.rows, &order.iter().map(|&c| m.col(c)).collect::<Vec<_>>())
}

/// g, h with fiber = g L_s h, from bases that put the fixed rows and columns first
fn good_from_bases(f: &FieldCtx, kind: GroupKind, xi: &MatFq, basis: &MatFq, s: usize, rep: &MatFq) -> Result<GoodUmvirate> {
    let n = xi.rows;
    if s == n {
        return Ok(GoodUmvirate { k: n, g: rep.clone(), h: MatFq::identity(n) });
    }
    let z = xi.mul(f, rep)?.mul(f, basis)?;
    let m = z.block(0, s, 0, s);
    let mi = m.inverse(f).ok_or(Error::NoInvertible)?;
    let p = z.block(0, s, s, n);
    let nb = z.block(s, n, 0, s);
    let mut lm = MatFq::identity(n);
    lm.set_block(0, 0, &mi);
    lm.set_block(s, 0, &nb.mul(f, &mi)?.neg(f));
    let mut rm = MatFq::identity(n);
    rm.set_block(0, s, &mi.mul(f, &p)?.neg(f));
    let gm = lm.mul(f, xi)?;
    let hm = basis.mul(f, &rm)?;
    let mut g = gm.inverse(f).ok_or(Error::NoInvertible)?;
    let mut h = hm.inverse(f).ok_or(Error::NoInvertible)?;
    if kind == GroupKind::SL {
        // det Y is constant on the fiber; absorb it, then make det g = 1
        let c = f.mul(gm.det(f)?, hm.det(f)?);
        let mut dc = MatFq::identity(n);
        dc.set(n - 1, n - 1, c);
        g = g.mul(f, &dc)?;
        let dg = g.det(f)?;
        let mut d = MatFq::identity(n);
        d.set(n - 1, n - 1, f.inv_nz(dg));
        let mut dinv = MatFq::identity(n);
        dinv.set(n - 1, n - 1, dg);
        g = g.mul(f, &d)?;
        h = dinv.mul(f, &h)?;
    }
    Ok(GoodUmvirate { k: s, g, h })
}

/// Disjoint good umvirates of common order 2s <= 2t covering U inside G.
pub fn good_umvirate_partition(grp: &GroupTable, u: &Umvirate) -> Result<Vec<GoodUmvirate>> {
    let f = &grp.field;
    let n = u.n;
    let members = u.members(grp);
    if members.is_empty() {
        return Err(Error::NoInvertible);
    }
    let nf = umvirate_normal_form(f, u)?;
    let (k, l, h) = (nf.fixed_rows, nf.fixed_cols, nf.rank_m);
    let (pp, np) = nf.reduced_blocks();
    let mut pr = pp.clone();
    let cprime: Vec<usize> = rref_in_place(f, &mut pr).into_iter().map(|c| l + c).collect();
    let mut nt = np.transpose();
    let rprime: Vec<usize> = rref_in_place(f, &mut nt).into_iter().map(|r| k + r).collect();
    let s = l + k - h;
    let mut row_order: Vec<usize> = (0..k).chain(rprime.iter().copied()).collect();
    row_order.extend((k..n).filter(|r| !rprime.contains(r)));
    let mut col_order: Vec<usize> = (0..l).chain(cprime.iter().copied()).collect();
    col_order.extend((l..n).filter(|c| !cprime.contains(c)));
    let xi2 = permute_rows(&nf.xi, &row_order);
    let basis2 = permute_cols(&nf.basis, &col_order);
    let mut fibers: BTreeMap<(Vec<u8>, Vec<u8>), usize> = BTreeMap::new();
    for &o in &members {
        let z = nf.transform(f, grp.mat(o));
        let rows: Vec<u8> = rprime.iter().flat_map(|&r| z.row(r).to_vec()).collect();
        let cols: Vec<u8> = cprime.iter().flat_map(|&c| z.col(c)).collect();
        fibers.entry((rows, cols)).or_insert(o);
    }
    fibers
        .values()
        .map(|&o| good_from_bases(f, grp.kind, &xi2, &basis2, s, grp.mat(o)))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SetAuditRow {
    pub order: usize,
    /// max over d-umvirates of mu(A | U) / mu(A)
    pub max_ratio: f64,
    pub witness: Option<Umvirate>,
    /// r^d
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SetGlobalReport {
    pub density: f64,
    pub rows: Vec<SetAuditRow>,
}

impl SetGlobalReport {
    pub fn passes(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// the failing row with the largest ratio / r^d
    pub fn worst_violation(&self) -> Option<&SetAuditRow> {
        self.rows
            .iter()
            .filter(|r| !r.pass)
            .max_by(|a, b| (a.max_ratio / a.threshold).total_cmp(&(b.max_ratio / b.threshold)))
    }
}

fn bits_of(ord: usize, pred: impl Fn(usize) -> bool) -> Vec<u64> {
    let mut b = vec![0u64; ord.div_ceil(64)];
    for o in 0..ord {
        if pred(o) {
            b[o / 64] |= 1 << (o % 64);
        }
    }
    b
}

fn popcount(b: &[u64]) -> usize {
    b.iter().map(|w| w.count_ones() as usize).sum()
}

/// Exhaustive r-globalness audit of a set on G over umvirates mixing row
/// and functional constraints; pass iff every ratio is at most r^d.
pub fn set_global_audit(grp: &GroupTable, set: &[usize], rmax: usize, r: f64) -> Result<SetGlobalReport> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let f = &grp.field;
    let n = grp.n;
    let q = grp.q();
    let ord = grp.order();
    let nv = q.pow(n as u32);
    let aset = bits_of(ord, |o| set.binary_search(&o).is_ok());
    let mu = set.len() as f64 / ord as f64;
    let acts: Vec<Vec<usize>> = (0..ord).map(|o| (0..nv).map(|v| vec_index(q, &grp.mat(o).mul_vec(f, &vec_from_index(n, q, v)))).collect()).collect();
    let dacts: Vec<Vec<usize>> = (0..ord)
        .map(|o| {
            let t = grp.mat(o).transpose();
            (0..nv).map(|v| vec_index(q, &t.mul_vec(f, &vec_from_index(n, q, v)))).collect()
        })
        .collect();
    let mut rows = Vec::new();
    for d in 0..=rmax.min(2 * n) {
        let mut best = f64::NEG_INFINITY;
        let mut wit: Option<Umvirate> = None;
        for a in d.saturating_sub(n)..=d.min(n) {
            let b = d - a;
            for vsub in enumerate_subspaces(f, n, a, SUBSPACE_CAP)? {
                for fsub in enumerate_subspaces(f, n, b, SUBSPACE_CAP)? {
                    let slots: Vec<(bool, usize)> = vsub
                        .basis_vecs()
                        .iter()
                        .map(|v| (false, vec_index(q, v)))
                        .chain(fsub.basis_vecs().iter().map(|p| (true, vec_index(q, p))))
                        .collect();
                    let mut stack: Vec<(usize, Vec<usize>, Vec<u64>)> = vec![(0, vec![], bits_of(ord, |_| true))];
                    while let Some((depth, targets, cur)) = stack.pop() {
                        if depth == slots.len() {
                            let size = popcount(&cur);
                            let hit: usize = cur.iter().zip(&aset).map(|(x, y)| (x & y).count_ones() as usize).sum();
                            let ratio = hit as f64 / size as f64 / mu;
                            if improves(ratio, best) {
                                best = ratio;
                                let mut rws = Vec::new();
                                let mut fns = Vec::new();
                                for (&(dual, src), &t) in slots.iter().zip(&targets) {
                                    let pair = (vec_from_index(n, q, src), vec_from_index(n, q, t));
                                    if dual {
                                        fns.push(pair);
                                    } else {
                                        rws.push(pair);
                                    }
                                }
                                wit = Some(Umvirate::new(f, n, &rws, &fns)?);
                            }
                            continue;
                        }
                        let (dual, src) = slots[depth];
                        let table = if dual { &dacts } else { &acts };
                        for t in (0..nv).rev() {
                            let next: Vec<u64> = cur
                                .iter()
                                .enumerate()
                                .map(|(w, &bits)| {
                                    let mut out = 0u64;
                                    let mut rem = bits;
                                    while rem != 0 {
                                        let i = rem.trailing_zeros() as usize;
                                        if table[w * 64 + i][src] == t {
                                            out |= 1 << i;
                                        }
                                        rem &= rem - 1;
                                    }
                                    out
                                })
                                .collect();
                            if next.iter().any(|&x| x != 0) {
                                let mut tg = targets.clone();
                                tg.push(t);
                                stack.push((depth + 1, tg, next));
                            }
                        }
                    }
                }
            }
        }
        let threshold = r.powi(d as i32);
        let pass = best <= threshold * (1.0 + 1e-9) + 1e-12;
        rows.push(SetAuditRow { order: d, max_ratio: best, witness: wit, threshold, pass });
    }
    Ok(SetGlobalReport { density: mu, rows })
}

/// diag(I_k, y)
pub fn block_embed(k: usize, y: &MatFq) -> MatFq {
    block_diag(&MatFq::identity(k), y)
}

#[derive(Clone, Debug, Serialize)]
pub struct BumpStep {
    pub from_k: usize,
    pub to_k: usize,
    /// order of the violating umvirate
    pub t: usize,
    /// order of the chosen good umvirate, 2 (to_k - from_k)
    pub s: usize,
    pub density_before: f64,
    pub density_after: f64,
    pub gain: f64,
    /// r^t, the proof's per-step guarantee
    pub proof_bound: f64,
    /// r^{t/2}, the stated guarantee
    pub stated_bound: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BumpOutcome {
    pub umvirate: GoodUmvirate,
    /// density of A in the final good umvirate
    pub restricted_density: f64,
    pub trace: Vec<BumpStep>,
    /// the restricted set passed the audit
    pub global_reached: bool,
    /// stopped because the residual group SL_{n-k} became trivial
    pub trivial_residual: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BumpConfig {
    pub r: f64,
    pub rmax: usize,
}

impl BumpConfig {
    /// r = q^{zeta n / 2}
    pub fn from_zeta(zeta: f64, q: usize, n: usize, rmax: usize) -> Self {
        BumpConfig { r: (q as f64).powf(zeta * n as f64 / 2.0), rmax }
    }
}

/// Repeatedly pass to the densest good sub-umvirate of the worst
/// violating umvirate, until A is global relative to U.
pub fn density_bump_search(grp: &GroupTable, set: &[usize], cfg: BumpConfig) -> Result<BumpOutcome> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let f = grp.field.clone();
    let n = grp.n;
    let mut inset = vec![false; grp.order()];
    for &o in set {
        inset[o] = true;
    }
    let mut cur = GoodUmvirate::whole(n);
    let mut trace = Vec::new();
    loop {
        let k = cur.k;
        if n - k < 2 {
            let members = cur.members(grp);
            let hit = members.iter().filter(|&&o| inset[o]).count();
            return Ok(BumpOutcome {
                restricted_density: hit as f64 / members.len() as f64,
                umvirate: cur,
                trace,
                global_reached: false,
                trivial_residual: true,
            });
        }
        let sub = GroupTable::enumerate(grp.kind, n - k, f.clone())?;
        let lift = |y: &MatFq, g: &MatFq, h: &MatFq| -> usize {
            let x = g.mul(&f, &block_embed(k, y)).and_then(|t| t.mul(&f, h)).expect("square");
            grp.ordinal(&x).expect("lifted element lies in G")
        };
        let restricted: Vec<usize> = (0..sub.order()).filter(|&y| inset[lift(sub.mat(y), &cur.g, &cur.h)]).collect();
        let density_before = restricted.len() as f64 / sub.order() as f64;
        if restricted.is_empty() {
            return Err(Error::EmptySet);
        }
        let audit = set_global_audit(&sub, &restricted, cfg.rmax.min(2 * (n - k)), cfg.r)?;
        let Some(worst) = audit.worst_violation() else {
            return Ok(BumpOutcome { umvirate: cur, restricted_density: density_before, trace, global_reached: true, trivial_residual: false });
        };
        let t = worst.order;
        let witness = worst.witness.clone().expect("violating row has a witness");
        let parts = good_umvirate_partition(&sub, &witness)?;
        let mut best: Option<(f64, GoodUmvirate)> = None;
        for p in parts {
            let mem = p.members(&sub);
            let dens = mem.iter().filter(|y| restricted.binary_search(y).is_ok()).count() as f64 / mem.len() as f64;
            if best.as_ref().is_none_or(|(b, _)| dens > *b + TIE_TOL) {
                best = Some((dens, p));
            }
        }
        let (density_after, part) = best.expect("nonempty partition");
        let g = cur.g.mul(&f, &block_embed(k, &part.g))?;
        let h = block_embed(k, &part.h).mul(&f, &cur.h)?;
        let next = GoodUmvirate { k: k + part.k, g, h };
        let gain = density_after / density_before;
        let proof_bound = cfg.r.powi(t as i32);
        trace.push(BumpStep {
            from_k: k,
            to_k: next.k,
            t,
            s: 2 * part.k,
            density_before,
            density_after,
            gain,
            proof_bound,
            stated_bound: cfg.r.powf(t as f64 / 2.0),
            certified: gain >= proof_bound * (1.0 - 1e-12),
        });
        if part.k == 0 {
            return Err(Error::Invalid("density bump made no progress".into()));
        }
        cur = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fqlin::all_vectors;
    use num_complex::Complex64;
    use std::sync::Arc;

    fn sl(n: usize, q: usize) -> GroupTable {
        GroupTable::enumerate(GroupKind::SL, n, Arc::new(FieldCtx::new(q).unwrap())).unwrap()
    }

    #[test]
    fn audit_matches_brute_force() {
        let ctx = SchemeCtx::new(Arc::new(FieldCtx::new(2).unwrap()), 2, 2).unwrap();
        let fq = ctx.field.clone();
        let f = FnTable::from_real(ctx.tag(), &(0..16).map(|i| ((i * 7 + 3) % 5 < 2) as u8 as f64).collect::<Vec<_>>());
        let rep = global_audit(&ctx, &f, 4, &|_| None).unwrap();
        for d in 0..=4 {
            let mut best: f64 = 0.0;
            for v in enumerate_all_subspaces(&fq, 2, 100).unwrap() {
                for w in enumerate_all_subspaces(&fq, 2, 100).unwrap() {
                    if v.dim() + w.codim() != d {
                        continue;
                    }
                    for t in 0..16 {
                        let tm = ctx.domain.mat(t);
                        let mut sum = 0.0;
                        let mut cnt = 0.0;
                        for a in 0..16 {
                            let am = ctx.domain.mat(a);
                            let diff = am.sub(&fq, &tm).unwrap();
                            let kills = v.basis_vecs().iter().all(|b| diff.mul_vec(&fq, b).iter().all(|&x| x == 0));
                            let into = (0..2).all(|c| w.contains(&fq, &diff.col(c)));
                            if kills && into {
                                sum += f.values[a].norm_sqr();
                                cnt += 1.0;
                            }
                        }
                        best = best.max(sum / cnt);
                    }
                }
            }
            assert!((rep.max_at(d) - best).abs() < 1e-12, "order {d}: {} vs {best} {:?}", rep.max_at(d), rep.rows[d]);
        }
        assert!((rep.max_at(0) - f.norm2_sq()).abs() < 1e-15);
    }

    #[test]
    fn audit_examples() {
        let ctx = SchemeCtx::new(Arc::new(FieldCtx::new(3).unwrap()), 2, 2).unwrap();
        let rep = global_audit(&ctx, &ctx.constant(1.0), 2, &|_| Some(1.0)).unwrap();
        assert!(rep.passes());
        let fq = ctx.field.clone();
        let members: Vec<usize> = (0..ctx.size()).filter(|&a| ctx.domain.mat(a).mul_vec(&fq, &[1, 0]) == vec![2, 1]).collect();
        let f = FnTable::indicator(ctx.tag(), ctx.size(), members);
        assert!((global_audit(&ctx, &f, 1, &|_| None).unwrap().max_at(1) - 1.0).abs() < 1e-12);
        let l2 = lp_global_audit(&ctx, &f, 2, 2.0).unwrap();
        let g2 = global_audit(&ctx, &f, 2, &|_| None).unwrap();
        for d in 0..=2 {
            assert!((l2.max_at(d).powi(2) - g2.max_at(d)).abs() < 1e-12);
        }
        let inf = influence_audit(&ctx, &ctx.constant(3.0), 2).unwrap();
        assert!(inf.max_at(1) < 1e-20 && inf.max_at(2) < 1e-20);
        assert!((inf.max_at(0) - 9.0).abs() < 1e-12);
        let _ = Complex64::new(0.0, 0.0);
    }

    #[test]
    fn normal_form_recomposes_membership() {
        let g = sl(3, 2);
        let f = g.field.clone();
        let vs = all_vectors(3, 2);
        let mut checked = 0;
        for a in 1..8 {
            for b in 0..8 {
                for c in 1..8 {
                    for d in 0..8 {
                        let u = Umvirate::new(&f, 3, &[(vs[a].clone(), vs[b].clone())], &[(vs[c].clone(), vs[d].clone())]);
                        let Ok(u) = u else { continue };
                        let direct = u.members(&g);
                        match umvirate_normal_form(&f, &u) {
                            Ok(nf) => {
                                let via: Vec<usize> = (0..g.order()).filter(|&o| nf.contains(&f, g.mat(o))).collect();
                                assert_eq!(via, direct);
                                checked += 1;
                            }
                            Err(Error::NoInvertible) => assert!(direct.is_empty()),
                            Err(Error::EmptySet) => assert!(direct.is_empty()),
                            Err(e) => panic!("{e}"),
                        }
                    }
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn partitions_cover_one_umvirates() {
        let g = sl(3, 2);
        let f = g.field.clone();
        let vs = all_vectors(3, 2);
        for v in 1..8 {
            for w in 1..8 {
                for dual in [false, true] {
                    let pair = vec![(vs[v].clone(), vs[w].clone())];
                    let u = if dual { Umvirate::new(&f, 3, &[], &pair) } else { Umvirate::new(&f, 3, &pair, &[]) }.unwrap();
                    let parts = good_umvirate_partition(&g, &u).unwrap();
                    let mut all: Vec<usize> = parts.iter().flat_map(|p| p.members(&g)).collect();
                    let total = all.len();
                    all.sort();
                    all.dedup();
                    assert_eq!(all.len(), total);
                    assert_eq!(all, u.members(&g));
                    assert!(parts.iter().all(|p| 2 * p.k <= 2 * u.order()));
                }
            }
        }
    }

    #[test]
    fn good_umvirate_round_trip() {
        let g = sl(3, 2);
        let f = g.field.clone();
        let gm = g.mat(17).clone();
        let hm = g.mat(101).clone();
        let good = GoodUmvirate { k: 1, g: gm, h: hm };
        let mem = good.members(&g);
        assert_eq!(mem.len(), 6);
        let u = good.as_umvirate(&f);
        assert_eq!(u.members(&g), mem);
        let parts = good_umvirate_partition(&g, &u).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].members(&g), mem);
        let whole = good_umvirate_partition(&g, &Umvirate::whole(3)).unwrap();
        assert_eq!(whole.len(), 1);
        assert_eq!(whole[0].k, 0);
    }

    #[test]
    fn bump_lands_on_coset() {
        let g = sl(3, 2);
        let good = GoodUmvirate { k: 1, g: g.mat(40).clone(), h: g.mat(77).clone() };
        let set = good.members(&g);
        let out = density_bump_search(&g, &set, BumpConfig::from_zeta(0.01, 2, 3, 2)).unwrap();
        assert_eq!(out.trace.len(), 1);
        assert!((out.restricted_density - 1.0).abs() < 1e-12);
        assert_eq!(out.umvirate.members(&g), set);
        let all: Vec<usize> = (0..g.order()).collect();
        let out = density_bump_search(&g, &all, BumpConfig::from_zeta(0.01, 2, 3, 2)).unwrap();
        assert!(out.trace.is_empty() && out.global_reached);
    }
}
