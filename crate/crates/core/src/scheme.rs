//! Fourier analysis on L(V,W).
//!
//! `A in L(V,W)` is an `m x n` matrix (`n = dim V`, `m = dim W`), indexed by
//! an [`IndexMap`] with `m` rows and `n` columns. Characters are indexed by
//! `X in L(W,V)`, an `n x m` matrix with its own index map, and
//! `u_X(A) = phi(tr(XA))`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fqlin::{rank_table, IndexMap, MatFq, QuotientFrame, Subspace, DOMAIN_CAP};
use crate::gf::FieldCtx;
use crate::groups::GroupKind;

pub const TAU: f64 = 1e-9;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    Scheme { q: usize, n: usize, m: usize },
    Group { kind: GroupKind, n: usize, q: usize },
}

/// A complex function on an enumerated domain. Inner products and norms are
/// taken with respect to the uniform probability measure.
#[derive(Clone, Debug, PartialEq)]
pub struct FnTable {
    pub domain: Domain,
    pub values: Vec<Complex64>,
}

impl FnTable {
    pub fn new(domain: Domain, values: Vec<Complex64>) -> Self {
        FnTable { domain, values }
    }

    pub fn zeros(domain: Domain, len: usize) -> Self {
        FnTable { domain, values: vec![ZERO; len] }
    }

    pub fn constant(domain: Domain, len: usize, c: Complex64) -> Self {
        FnTable { domain, values: vec![c; len] }
    }

    pub fn from_real(domain: Domain, vals: &[f64]) -> Self {
        FnTable { domain, values: vals.iter().map(|&x| Complex64::new(x, 0.0)).collect() }
    }

    pub fn indicator(domain: Domain, len: usize, members: impl IntoIterator<Item = usize>) -> Self {
        let mut t = Self::zeros(domain, len);
        for i in members {
            t.values[i] = Complex64::new(1.0, 0.0);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.len() as f64
    }

    /// E |f|^p
    pub fn mean_abs_pow(&self, p: f64) -> f64 {
        let s: f64 = if p == 2.0 {
            self.values.iter().map(|v| v.norm_sqr()).sum()
        } else {
            self.values.iter().map(|v| v.norm().powf(p)).sum()
        };
        s / self.len() as f64
    }

    pub fn norm2_sq(&self) -> f64 {
        self.mean_abs_pow(2.0)
    }

    pub fn norm2(&self) -> f64 {
        self.norm2_sq().sqrt()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        self.mean_abs_pow(p).powf(1.0 / p)
    }

    /// E[f conj(g)]
    pub fn inner(&self, g: &FnTable) -> Complex64 {
        self.check(g);
        self.values.iter().zip(&g.values).map(|(a, b)| a * b.conj()).sum::<Complex64>() / self.len() as f64
    }

    pub fn scale(&self, c: Complex64) -> FnTable {
        FnTable { domain: self.domain, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, g: &FnTable) -> FnTable {
        self.check(g);
        FnTable { domain: self.domain, values: self.values.iter().zip(&g.values).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, g: &FnTable) -> FnTable {
        self.check(g);
        FnTable { domain: self.domain, values: self.values.iter().zip(&g.values).map(|(a, b)| a - b).collect() }
    }

    pub fn pointwise(&self, g: &FnTable) -> FnTable {
        self.check(g);
        FnTable { domain: self.domain, values: self.values.iter().zip(&g.values).map(|(a, b)| a * b).collect() }
    }

    pub fn conj(&self) -> FnTable {
        FnTable { domain: self.domain, values: self.values.iter().map(|v| v.conj()).collect() }
    }

    pub fn real_part(&self) -> FnTable {
        FnTable { domain: self.domain, values: self.values.iter().map(|v| Complex64::new(v.re, 0.0)).collect() }
    }

    pub fn max_abs_diff(&self, g: &FnTable) -> f64 {
        self.check(g);
        self.values.iter().zip(&g.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn check(&self, g: &FnTable) {
        assert_eq!(self.domain, g.domain, "functions on different domains");
        assert_eq!(self.len(), g.len(), "functions of different length");
    }
}

/// Fourier coefficients indexed by `X in L(W,V)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumTable {
    pub q: usize,
    pub n: usize,
    pub m: usize,
    pub coeffs: Vec<Complex64>,
}

impl SpectrumTable {
    /// sum of |f^(X)|^2
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegreeMode {
    Pure,
    Cumulative,
}

#[derive(Clone, Debug)]
pub struct SchemeCtx {
    pub field: Arc<FieldCtx>,
    pub n: usize,
    pub m: usize,
    /// L(V,W): m rows, n columns
    pub domain: IndexMap,
    /// L(W,V): n rows, m columns
    pub dual: IndexMap,
    pub dual_rank: Vec<u8>,
    /// position in A-digit layout -> dual index of the paired X
    layout_to_dual: Vec<u32>,
    /// kernel[y * q + a] = phi(y a)
    kernel: Vec<Complex64>,
}

impl SchemeCtx {
    pub fn new(field: Arc<FieldCtx>, n: usize, m: usize) -> Result<Self> {
        Self::with_cap(field, n, m, DOMAIN_CAP)
    }

    pub fn with_cap(field: Arc<FieldCtx>, n: usize, m: usize, cap: u128) -> Result<Self> {
        let q = field.q;
        let domain = IndexMap::new(m, n, q, cap)?;
        let dual = IndexMap::new(n, m, q, cap)?;
        let dual_rank = rank_table(&field, &dual, cap)?;
        // A-entry (j,i) sits at digit j*n+i and pairs with X-entry (i,j) at digit i*m+j
        let digits = n * m;
        let mut weight = vec![0usize; digits];
        for j in 0..m {
            for i in 0..n {
                weight[j * n + i] = q.pow((i * m + j) as u32);
            }
        }
        let layout_to_dual = (0..domain.size)
            .map(|y| {
                let mut r = y;
                let mut x = 0usize;
                for w in &weight {
                    x += (r % q) * w;
                    r /= q;
                }
                x as u32
            })
            .collect();
        let mut kernel = vec![ZERO; q * q];
        for y in 0..q {
            for a in 0..q {
                kernel[y * q + a] = field.character(field.mul(y as u8, a as u8));
            }
        }
        Ok(SchemeCtx { field, n, m, domain, dual, dual_rank, layout_to_dual, kernel })
    }

    pub fn size(&self) -> usize {
        self.domain.size
    }

    pub fn q(&self) -> usize {
        self.field.q
    }

    pub fn tag(&self) -> Domain {
        Domain::Scheme { q: self.field.q, n: self.n, m: self.m }
    }

    pub fn table(&self, values: Vec<Complex64>) -> FnTable {
        assert_eq!(values.len(), self.size());
        FnTable::new(self.tag(), values)
    }

    pub fn constant(&self, c: f64) -> FnTable {
        FnTable::constant(self.tag(), self.size(), Complex64::new(c, 0.0))
    }

    pub fn max_degree(&self) -> usize {
        self.n.min(self.m)
    }

    /// phi(tr(XA)) for X in L(W,V), A in L(V,W)
    pub fn char_value(&self, x: &MatFq, a: &MatFq) -> Result<Complex64> {
        if (x.rows, x.cols) != (self.n, self.m) || (a.rows, a.cols) != (self.m, self.n) {
            return Err(Error::Shape(format!(
                "character needs X {}x{} and A {}x{}, got {}x{} and {}x{}",
                self.n, self.m, self.m, self.n, x.rows, x.cols, a.rows, a.cols
            )));
        }
        let xa = x.mul(&self.field, a)?;
        Ok(self.field.character(xa.trace(&self.field)))
    }

    /// the character u_X as a table, evaluated entry by entry from the trace formula
    pub fn character(&self, x_idx: usize) -> FnTable {
        let x = self.dual.mat(x_idx);
        let vals = (0..self.size()).map(|a| self.char_value(&x, &self.domain.mat(a)).unwrap()).collect();
        self.table(vals)
    }

    fn tensor_apply(&self, vals: &mut [Complex64], conj: bool) {
        let q = self.q();
        let size = vals.len();
        let mut buf = vec![ZERO; q];
        let mut stride = 1;
        for _ in 0..self.domain.digits() {
            let span = stride * q;
            let mut block = 0;
            while block < size {
                for off in 0..stride {
                    let base = block + off;
                    for (a, b) in buf.iter_mut().enumerate() {
                        *b = vals[base + a * stride];
                    }
                    for y in 0..q {
                        let row = &self.kernel[y * q..(y + 1) * q];
                        let mut s = ZERO;
                        for (k, b) in row.iter().zip(&buf) {
                            s += if conj { k.conj() * b } else { k * b };
                        }
                        vals[base + y * stride] = s;
                    }
                }
                block += span;
            }
            stride = span;
        }
    }

    /// f^(X) = <f, u_X>, computed coordinate by coordinate
    pub fn forward(&self, f: &FnTable) -> SpectrumTable {
        assert_eq!(f.domain, self.tag(), "function is not on this scheme");
        let mut work = f.values.clone();
        self.tensor_apply(&mut work, true);
        let scale = 1.0 / self.size() as f64;
        let mut coeffs = vec![ZERO; self.size()];
        for (y, v) in work.into_iter().enumerate() {
            coeffs[self.layout_to_dual[y] as usize] = v * scale;
        }
        SpectrumTable { q: self.q(), n: self.n, m: self.m, coeffs }
    }

    /// f = sum_X s(X) u_X
    pub fn inverse(&self, s: &SpectrumTable) -> FnTable {
        assert_eq!((s.q, s.n, s.m), (self.q(), self.n, self.m), "spectrum is not on this scheme");
        let mut work: Vec<Complex64> = (0..self.size()).map(|y| s.coeffs[self.layout_to_dual[y] as usize]).collect();
        self.tensor_apply(&mut work, false);
        self.table(work)
    }

    /// O(N^2) transform straight from the definition
    pub fn forward_direct(&self, f: &FnTable) -> SpectrumTable {
        let n_dom = self.size();
        let a_mats: Vec<MatFq> = (0..n_dom).map(|a| self.domain.mat(a)).collect();
        let coeffs = (0..n_dom)
            .map(|x| {
                let xm = self.dual.mat(x);
                let s: Complex64 = a_mats
                    .iter()
                    .zip(&f.values)
                    .map(|(a, v)| v * self.pairing_char(&xm, a).conj())
                    .sum();
                s / n_dom as f64
            })
            .collect();
        SpectrumTable { q: self.q(), n: self.n, m: self.m, coeffs }
    }

    pub fn inverse_direct(&self, s: &SpectrumTable) -> FnTable {
        let n_dom = self.size();
        let x_mats: Vec<MatFq> = (0..n_dom).map(|x| self.dual.mat(x)).collect();
        let vals = (0..n_dom)
            .map(|a| {
                let am = self.domain.mat(a);
                x_mats.iter().zip(&s.coeffs).map(|(x, c)| c * self.pairing_char(x, &am)).sum()
            })
            .collect();
        self.table(vals)
    }

    fn pairing_char(&self, x: &MatFq, a: &MatFq) -> Complex64 {
        let f = &self.field;
        let mut t = 0u8;
        for i in 0..self.n {
            for j in 0..self.m {
                t = f.add(t, f.mul(x.get(i, j), a.get(j, i)));
            }
        }
        f.character(t)
    }

    /// keep the coefficients where `weight` is `Some`, scaled by it
    pub fn spectral_filter(&self, f: &FnTable, weight: impl Fn(usize) -> Option<f64>) -> FnTable {
        let mut s = self.forward(f);
        for (x, c) in s.coeffs.iter_mut().enumerate() {
            match weight(x) {
                Some(w) => *c *= w,
                None => *c = ZERO,
            }
        }
        self.inverse(&s)
    }

    pub fn degree_project(&self, f: &FnTable, d: usize, mode: DegreeMode) -> Result<FnTable> {
        if d > self.max_degree() {
            return Err(Error::Invalid(format!("degree {d} exceeds min(n,m) = {}", self.max_degree())));
        }
        Ok(self.spectral_filter(f, |x| {
            let r = self.dual_rank[x] as usize;
            let keep = match mode {
                DegreeMode::Pure => r == d,
                DegreeMode::Cumulative => r <= d,
            };
            keep.then_some(1.0)
        }))
    }

    /// the scheme L(W^*, V^*) ~ L(W,V) holding dualized functions
    pub fn transposed(&self) -> Result<SchemeCtx> {
        SchemeCtx::new(self.field.clone(), self.m, self.n)
    }

    /// f^*(B) = f(B^T) for B in the transposed scheme
    pub fn dualize(&self, f: &FnTable, dual: &SchemeCtx) -> FnTable {
        let vals = (0..dual.size())
            .map(|b| f.values[self.domain.index(&dual.domain.mat(b).transpose())])
            .collect();
        dual.table(vals)
    }

    /// (f*g)(A) = E_B f(A-B) g(B) on the additive group L(V,W)
    pub fn abelian_convolve(&self, f: &FnTable, g: &FnTable) -> FnTable {
        let fq = &self.field;
        let n_dom = self.size();
        let negs: Vec<usize> = (0..n_dom).map(|b| self.domain.neg(fq, b)).collect();
        let vals = (0..n_dom)
            .map(|a| {
                let s: Complex64 = (0..n_dom).map(|b| f.values[self.domain.add(fq, a, negs[b])] * g.values[b]).sum();
                s / n_dom as f64
            })
            .collect();
        self.table(vals)
    }
}

/// The identified copy of L(V/V', W') inside L(V,W): maps killing `vsub`
/// with image in `wsub`, coordinatized by the lift basis of V/V' and the
/// RREF basis of W'.
#[derive(Clone, Debug)]
pub struct RestrictionFrame {
    pub vsub: Subspace,
    pub wsub: Subspace,
    pub vframe: QuotientFrame,
    /// rows read off the lift coordinates of V/V'
    pub lambda: MatFq,
    pub local: SchemeCtx,
    /// local index -> index in L(V,W) of the embedded map
    pub embed: Vec<usize>,
}

impl RestrictionFrame {
    pub fn new(ctx: &SchemeCtx, vsub: &Subspace, wsub: &Subspace) -> Result<Self> {
        if vsub.ambient != ctx.n || wsub.ambient != ctx.m {
            return Err(Error::Shape("restriction subspaces do not live in V and W".into()));
        }
        let f = &ctx.field;
        let vframe = QuotientFrame::new(vsub);
        let lambda = vframe.lift_functionals(f);
        let local = SchemeCtx::new(ctx.field.clone(), ctx.n - vsub.dim(), wsub.dim())?;
        let wt = wsub.basis.transpose();
        let embed = (0..local.size())
            .map(|c| {
                let cm = local.domain.mat(c);
                let s = wt.mul(f, &cm).and_then(|t| t.mul(f, &lambda)).expect("frame shapes");
                ctx.domain.index(&s)
            })
            .collect();
        Ok(RestrictionFrame { vsub: vsub.clone(), wsub: wsub.clone(), vframe, lambda, local, embed })
    }

    /// dim V' + codim W'
    pub fn order(&self) -> usize {
        self.vsub.dim() + self.wsub.codim()
    }

    pub fn restrict(&self, ctx: &SchemeCtx, f: &FnTable, t: usize) -> FnTable {
        let vals = self.embed.iter().map(|&s| f.values[ctx.domain.add(&ctx.field, s, t)]).collect();
        self.local.table(vals)
    }

    /// least index of each coset T + L(V/V',W'), ascending
    pub fn coset_reps(&self, ctx: &SchemeCtx) -> Vec<usize> {
        let mut seen = vec![false; ctx.size()];
        let mut reps = Vec::with_capacity(ctx.size() / self.embed.len());
        for t in 0..ctx.size() {
            if seen[t] {
                continue;
            }
            reps.push(t);
            for &s in &self.embed {
                seen[ctx.domain.add(&ctx.field, s, t)] = true;
            }
        }
        reps
    }

    /// every coset as (least representative, members in local order)
    pub fn cosets(&self, ctx: &SchemeCtx) -> Vec<(usize, Vec<usize>)> {
        let mut seen = vec![false; ctx.size()];
        let mut out = Vec::with_capacity(ctx.size() / self.embed.len());
        for t in 0..ctx.size() {
            if seen[t] {
                continue;
            }
            let members: Vec<usize> = self.embed.iter().map(|&s| ctx.domain.add(&ctx.field, s, t)).collect();
            for &x in &members {
                seen[x] = true;
            }
            out.push((t, members));
        }
        out
    }

    /// index in the local dual of Y = X restricted to W' and composed with V -> V/V'
    pub fn restricted_character(&self, ctx: &SchemeCtx, x_idx: usize) -> usize {
        let f = &ctx.field;
        let x = ctx.dual.mat(x_idx);
        let y = self
            .lambda
            .mul(f, &x)
            .and_then(|t| t.mul(f, &self.wsub.basis.transpose()))
            .expect("frame shapes");
        self.local.dual.index(&y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fqlin::enumerate_all_subspaces;

    fn ctx(q: usize, n: usize, m: usize) -> SchemeCtx {
        SchemeCtx::new(Arc::new(FieldCtx::new(q).unwrap()), n, m).unwrap()
    }

    #[test]
    fn char_value_examples() {
        let c = ctx(2, 2, 2);
        let i = MatFq::identity(2);
        assert!((c.char_value(&i, &i).unwrap() - 1.0).norm() < 1e-15);
        let c1 = ctx(2, 1, 1);
        let one = MatFq::identity(1);
        assert!((c1.char_value(&one, &one).unwrap() + 1.0).norm() < 1e-15);
        assert!(c.char_value(&MatFq::zeros(2, 3), &i).is_err());
    }

    #[test]
    fn transform_examples() {
        let c = ctx(3, 2, 1);
        let s = c.forward(&c.constant(1.0));
        assert!((s.coeffs[0] - 1.0).norm() < 1e-12);
        assert!(s.coeffs[1..].iter().all(|v| v.norm() < 1e-12));
        let y = 5;
        let s = c.forward(&c.character(y));
        for (x, v) in s.coeffs.iter().enumerate() {
            let want = if x == y { 1.0 } else { 0.0 };
            assert!((v - want).norm() < 1e-12);
        }
        let delta = FnTable::indicator(c.tag(), c.size(), [0]);
        let s = c.forward(&delta);
        assert!(s.coeffs.iter().all(|v| (v - 1.0 / 9.0).norm() < 1e-12));
    }

    #[test]
    fn fast_matches_direct_non_square_and_extension_field() {
        for (q, n, m) in [(2, 2, 3), (3, 1, 2), (4, 2, 1), (4, 1, 3), (5, 2, 1)] {
            let c = ctx(q, n, m);
            let vals = (0..c.size())
                .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
                .collect();
            let f = c.table(vals);
            let a = c.forward(&f);
            let b = c.forward_direct(&f);
            let err = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "q={q} n={n} m={m} err={err}");
            assert!(c.inverse(&a).max_abs_diff(&f) < 1e-12);
            assert!(c.inverse_direct(&b).max_abs_diff(&f) < 1e-12);
        }
    }

    #[test]
    fn degree_projection_examples() {
        let c = ctx(2, 1, 1);
        let delta = FnTable::indicator(c.tag(), 2, [0]);
        let p0 = c.degree_project(&delta, 0, DegreeMode::Pure).unwrap();
        let p1 = c.degree_project(&delta, 1, DegreeMode::Pure).unwrap();
        assert!(p0.values.iter().all(|v| (v - 0.5).norm() < 1e-12));
        assert!((p1.values[0] - 0.5).norm() < 1e-12);
        assert!((p1.values[1] + 0.5).norm() < 1e-12);
        assert!(c.degree_project(&delta, 2, DegreeMode::Pure).is_err());
    }

    #[test]
    fn restriction_of_character_formula() {
        let c = ctx(3, 2, 2);
        let f = &c.field;
        let subs_v = enumerate_all_subspaces(f, 2, 1 << 20).unwrap();
        let subs_w = enumerate_all_subspaces(f, 2, 1 << 20).unwrap();
        for vs in &subs_v {
            for ws in &subs_w {
                let fr = RestrictionFrame::new(&c, vs, ws).unwrap();
                for x in [0, 7, 40, 80] {
                    let ux = c.character(x);
                    for t in [0, 13, 55] {
                        let r = fr.restrict(&c, &ux, t);
                        let y = fr.restricted_character(&c, x);
                        let want = fr.local.character(y).scale(ux.values[t]);
                        assert!(r.max_abs_diff(&want) < 1e-12);
                    }
                }
                // embedded maps kill V' and land in W'
                for &s in &fr.embed {
                    let sm = c.domain.mat(s);
                    for v in vs.basis_vecs() {
                        assert!(sm.mul_vec(f, &v).iter().all(|&e| e == 0));
                    }
                    for col in 0..2 {
                        assert!(ws.contains(f, &sm.col(col)));
                    }
                }
                let mut sorted = fr.embed.clone();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted.len(), fr.embed.len());
            }
        }
    }
}
