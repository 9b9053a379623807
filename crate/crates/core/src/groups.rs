//! SL_n(F_q) and GL_n(F_q) as enumerated subsets of L(V,V), their group
//! algebra, and the tensor-rank level filtration of L^2(G).

use std::collections::{HashSet, VecDeque};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fqlin::{vec_from_index, vec_index, IndexMap, MatFq, Subspace};
use crate::gf::FieldCtx;
use crate::scheme::{DegreeMode, Domain, FnTable, SchemeCtx, TAU};

pub const GROUP_CAP: u128 = 100_000;
const MULT_TABLE_MAX: usize = 2048;
const DROP_TOL: f64 = 1e-8;
const CLUSTER_TOL: f64 = 1e-6;
const CACHE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    SL,
    GL,
}

impl GroupKind {
    pub fn name(self) -> &'static str {
        match self {
            GroupKind::SL => "sl",
            GroupKind::GL => "gl",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sl" => Ok(GroupKind::SL),
            "gl" => Ok(GroupKind::GL),
            other => Err(Error::Invalid(format!("unknown group kind '{other}' (expected sl or gl)"))),
        }
    }
}

/// |GL_n(F_q)| or |SL_n(F_q)|
pub fn group_order(kind: GroupKind, n: usize, q: usize) -> u128 {
    let qn = (q as u128).pow(n as u32);
    let gl: u128 = (0..n).map(|i| qn - (q as u128).pow(i as u32)).product();
    match kind {
        GroupKind::GL => gl,
        GroupKind::SL => gl / (q as u128 - 1),
    }
}

#[derive(Clone, Debug)]
pub struct GroupTable {
    pub kind: GroupKind,
    pub n: usize,
    pub field: Arc<FieldCtx>,
    /// index map of L(V,V), n x n
    pub index: IndexMap,
    /// matrix indices of the elements, ascending
    pub elements: Vec<usize>,
    mats: Vec<MatFq>,
    pos: Vec<u32>,
    inverse: Vec<usize>,
    dets: Vec<u8>,
    identity: usize,
    mult: Option<Vec<u32>>,
    classes: Vec<usize>,
    class_sizes: Vec<usize>,
}

impl GroupTable {
    pub fn enumerate(kind: GroupKind, n: usize, field: Arc<FieldCtx>) -> Result<Self> {
        Self::enumerate_with_cap(kind, n, field, GROUP_CAP)
    }

    pub fn enumerate_with_cap(kind: GroupKind, n: usize, field: Arc<FieldCtx>, cap: u128) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("group dimension must be at least 1".into()));
        }
        let q = field.q;
        let expected = group_order(kind, n, q);
        if expected > cap {
            return Err(Error::CapExceeded { what: "group elements", count: expected, cap });
        }
        let index = IndexMap::new(n, n, q, crate::fqlin::DOMAIN_CAP)?;
        let mut elements = Vec::with_capacity(expected as usize);
        let mut mats = Vec::with_capacity(expected as usize);
        let mut dets = Vec::with_capacity(expected as usize);
        for i in 0..index.size {
            let a = index.mat(i);
            let d = a.det(&field)?;
            let member = match kind {
                GroupKind::SL => d == 1,
                GroupKind::GL => d != 0,
            };
            if member {
                elements.push(i);
                mats.push(a);
                dets.push(d);
            }
        }
        debug_assert_eq!(elements.len() as u128, expected);
        let mut pos = vec![u32::MAX; index.size];
        for (o, &e) in elements.iter().enumerate() {
            pos[e] = o as u32;
        }
        let inverse = mats
            .iter()
            .map(|a| pos[index.index(&a.inverse(&field).expect("group element"))] as usize)
            .collect();
        let identity = pos[index.index(&MatFq::identity(n))] as usize;
        let mut g = GroupTable {
            kind,
            n,
            field,
            index,
            elements,
            mats,
            pos,
            inverse,
            dets,
            identity,
            mult: None,
            classes: Vec::new(),
            class_sizes: Vec::new(),
        };
        if g.order() <= MULT_TABLE_MAX {
            let ord = g.order();
            let mut t = vec![0u32; ord * ord];
            for a in 0..ord {
                for b in 0..ord {
                    t[a * ord + b] = g.mul_slow(a, b) as u32;
                }
            }
            g.mult = Some(t);
        }
        g.compute_classes();
        Ok(g)
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn q(&self) -> usize {
        self.field.q
    }

    pub fn tag(&self) -> Domain {
        Domain::Group { kind: self.kind, n: self.n, q: self.field.q }
    }

    pub fn name(&self) -> String {
        format!("{}_{}(F_{})", self.kind.name().to_uppercase(), self.n, self.field.q)
    }

    pub fn mat(&self, o: usize) -> &MatFq {
        &self.mats[o]
    }

    pub fn det(&self, o: usize) -> u8 {
        self.dets[o]
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn inv(&self, o: usize) -> usize {
        self.inverse[o]
    }

    /// ordinal of the element with matrix index `idx`
    pub fn ordinal_of_index(&self, idx: usize) -> Option<usize> {
        self.pos.get(idx).and_then(|&p| (p != u32::MAX).then_some(p as usize))
    }

    pub fn ordinal(&self, a: &MatFq) -> Option<usize> {
        if (a.rows, a.cols) != (self.n, self.n) {
            return None;
        }
        self.ordinal_of_index(self.index.index(a))
    }

    fn mul_slow(&self, a: usize, b: usize) -> usize {
        let p = self.mats[a].mul(&self.field, &self.mats[b]).expect("square");
        self.pos[self.index.index(&p)] as usize
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        match &self.mult {
            Some(t) => t[a * self.order() + b] as usize,
            None => self.mul_slow(a, b),
        }
    }

    pub fn table(&self, values: Vec<Complex64>) -> FnTable {
        assert_eq!(values.len(), self.order());
        FnTable::new(self.tag(), values)
    }

    pub fn constant(&self, c: f64) -> FnTable {
        FnTable::constant(self.tag(), self.order(), Complex64::new(c, 0.0))
    }

    pub fn indicator(&self, members: impl IntoIterator<Item = usize>) -> FnTable {
        FnTable::indicator(self.tag(), self.order(), members)
    }

    /// |G| times the point mass at the identity, the unit for convolution
    pub fn delta(&self) -> FnTable {
        let mut t = self.constant(0.0);
        t.values[self.identity] = Complex64::new(self.order() as f64, 0.0);
        t
    }

    /// a generating set: all transvections, plus a diagonal generator for GL
    pub fn generators(&self) -> Vec<usize> {
        let f = &self.field;
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if i == j {
                    continue;
                }
                for a in 1..f.q as u8 {
                    let mut t = MatFq::identity(self.n);
                    t.set(i, j, a);
                    out.push(self.ordinal(&t).expect("transvection"));
                }
            }
        }
        if self.kind == GroupKind::GL && f.q > 2 {
            let mut d = MatFq::identity(self.n);
            d.set(0, 0, f.primitive_element());
            out.push(self.ordinal(&d).expect("diagonal"));
        }
        if out.is_empty() {
            out.push(self.identity);
        }
        out
    }

    fn compute_classes(&mut self) {
        let gens = self.generators();
        let ginv: Vec<usize> = gens.iter().map(|&s| self.inv(s)).collect();
        let mut label = vec![usize::MAX; self.order()];
        let mut sizes = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..self.order() {
            if label[start] != usize::MAX {
                continue;
            }
            let c = sizes.len();
            label[start] = c;
            queue.push_back(start);
            let mut size = 0;
            while let Some(x) = queue.pop_front() {
                size += 1;
                for (&s, &si) in gens.iter().zip(&ginv) {
                    let y = self.mul(self.mul(s, x), si);
                    if label[y] == usize::MAX {
                        label[y] = c;
                        queue.push_back(y);
                    }
                }
            }
            sizes.push(size);
        }
        self.classes = label;
        self.class_sizes = sizes;
    }

    /// conjugacy class label of each element (labels in order of least member)
    pub fn conjugacy_classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn class_sizes(&self) -> &[usize] {
        &self.class_sizes
    }

    pub fn class_count(&self) -> usize {
        self.class_sizes.len()
    }

    /// label of the class of inverses, per class
    pub fn class_inverses(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.class_count()];
        for o in 0..self.order() {
            out[self.classes[o]] = self.classes[self.inverse[o]];
        }
        out
    }

    /// extension by zero to L(V,V)
    pub fn transfer_j(&self, f: &FnTable, sctx: &SchemeCtx) -> Result<FnTable> {
        self.check_scheme(sctx)?;
        let mut out = sctx.constant(0.0);
        for (o, &e) in self.elements.iter().enumerate() {
            out.values[e] = f.values[o];
        }
        Ok(out)
    }

    /// restriction from L(V,V) to G
    pub fn transfer_i(&self, f: &FnTable, sctx: &SchemeCtx) -> Result<FnTable> {
        self.check_scheme(sctx)?;
        Ok(self.table(self.elements.iter().map(|&e| f.values[e]).collect()))
    }

    /// L(V,V) over the same field
    pub fn scheme(&self) -> Result<SchemeCtx> {
        SchemeCtx::new(self.field.clone(), self.n, self.n)
    }

    fn check_scheme(&self, sctx: &SchemeCtx) -> Result<()> {
        if sctx.n != self.n || sctx.m != self.n || sctx.q() != self.q() {
            return Err(Error::Shape(format!("{} does not sit inside L(F_{}^{}, F_{}^{})", self.name(), sctx.q(), sctx.n, sctx.q(), sctx.m)));
        }
        Ok(())
    }

    /// (f*g)(x) = E_y f(x y^{-1}) g(y)
    pub fn convolve(&self, f: &FnTable, g: &FnTable) -> FnTable {
        let ord = self.order();
        let vals = (0..ord)
            .map(|x| {
                (0..ord)
                    .map(|y| f.values[self.mul(x, self.inverse[y])] * g.values[y])
                    .sum::<Complex64>()
                    / ord as f64
            })
            .collect();
        self.table(vals)
    }

    /// x v for every element x and every vector index v
    fn action_table(&self, transpose: bool) -> Vec<u32> {
        let q = self.q();
        let nv = q.pow(self.n as u32);
        let mut out = vec![0u32; self.order() * nv];
        for (o, m) in self.mats.iter().enumerate() {
            let m = if transpose { m.transpose() } else { m.clone() };
            for v in 0..nv {
                out[o * nv + v] = vec_index(q, &m.mul_vec(&self.field, &vec_from_index(self.n, q, v))) as u32;
            }
        }
        out
    }

    /// elements with x v = u
    pub fn dictator(&self, v: &[u8], u: &[u8]) -> Vec<usize> {
        (0..self.order()).filter(|&o| self.mats[o].mul_vec(&self.field, v) == u).collect()
    }

    /// pointwise stabilizer of U
    pub fn pointwise_stabilizer(&self, u: &Subspace) -> Vec<usize> {
        let basis = u.basis_vecs();
        (0..self.order())
            .filter(|&o| basis.iter().all(|b| &self.mats[o].mul_vec(&self.field, b) == b))
            .collect()
    }

    /// true iff f(ah) = f(a) for all h fixing U pointwise
    pub fn junta_test(&self, f: &FnTable, u: &Subspace) -> bool {
        let h = self.pointwise_stabilizer(u);
        (0..self.order()).all(|a| h.iter().all(|&s| (f.values[self.mul(a, s)] - f.values[a]).norm() <= TAU))
    }

    /// average of f over right cosets of the pointwise stabilizer of U
    pub fn junta_project(&self, f: &FnTable, u: &Subspace) -> FnTable {
        let h = self.pointwise_stabilizer(u);
        let vals = (0..self.order())
            .map(|a| h.iter().map(|&s| f.values[self.mul(a, s)]).sum::<Complex64>() / h.len() as f64)
            .collect();
        self.table(vals)
    }

    /// |G| / q^{n^2}
    pub fn density_in_scheme(&self) -> f64 {
        self.order() as f64 / self.index.size as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LevelMode {
    Strict,
    Twisted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelOptions {
    pub mode: LevelMode,
    pub include_dual: bool,
    pub dmax: usize,
}

impl LevelOptions {
    pub fn strict(dmax: usize) -> Self {
        LevelOptions { mode: LevelMode::Strict, include_dual: false, dmax }
    }
}

/// Nested orthonormal bases of L^2(G)_{<=d}. Basis vectors are orthonormal
/// for the counting inner product; the first `dims[d]` span level `<= d`.
#[derive(Clone, Debug)]
pub struct LevelBasisSet {
    pub domain: Domain,
    pub options: LevelOptions,
    pub order: usize,
    pub basis: Vec<Vec<Complex64>>,
    /// cumulative dimensions, dims[d] = dim L^2(G)_{<=d}
    pub dims: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    domain: Domain,
    options: LevelOptions,
    order: usize,
    dims: Vec<usize>,
    version: u32,
}

struct Orthogonalizer {
    basis: Vec<Vec<Complex64>>,
}

impl Orthogonalizer {
    /// modified Gram-Schmidt with one re-orthogonalization pass
    fn offer(&mut self, v: Vec<Complex64>) -> bool {
        let norm0 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            return false;
        }
        let mut w = v;
        for _ in 0..2 {
            for b in &self.basis {
                let c: Complex64 = b.iter().zip(&w).map(|(bi, wi)| bi.conj() * wi).sum();
                if c.norm() > 0.0 {
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi -= c * bi;
                    }
                }
            }
        }
        let norm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm <= DROP_TOL * norm0 {
            return false;
        }
        w.iter_mut().for_each(|x| *x /= norm);
        self.basis.push(w);
        true
    }
}

fn bitset_and(a: &[u64], b: &[u64], out: &mut [u64]) -> bool {
    let mut any = false;
    for i in 0..a.len() {
        out[i] = a[i] & b[i];
        any |= out[i] != 0;
    }
    any
}

impl LevelBasisSet {
    pub fn build(g: &GroupTable, options: LevelOptions) -> Result<Self> {
        let ord = g.order();
        let dmax = options.dmax.min(g.n);
        let q = g.q();
        let nv = q.pow(g.n as u32);
        let words = ord.div_ceil(64);
        // dictator bitsets, nonzero v and nonempty support only
        let mut dicts: Vec<Vec<u64>> = Vec::new();
        let actions: Vec<Vec<u32>> = if options.include_dual {
            vec![g.action_table(false), g.action_table(true)]
        } else {
            vec![g.action_table(false)]
        };
        for act in &actions {
            for v in 1..nv {
                for u in 0..nv {
                    let mut bits = vec![0u64; words];
                    let mut any = false;
                    for o in 0..ord {
                        if act[o * nv + v] as usize == u {
                            bits[o / 64] |= 1 << (o % 64);
                            any = true;
                        }
                    }
                    if any {
                        dicts.push(bits);
                    }
                }
            }
        }
        let twists: Vec<Vec<Complex64>> = match options.mode {
            LevelMode::Strict => vec![vec![Complex64::new(1.0, 0.0); ord]],
            LevelMode::Twisted => (0..q - 1)
                .map(|k| (0..ord).map(|o| g.field.mult_character(k, g.det(o))).collect())
                .collect(),
        };
        let mut orth = Orthogonalizer { basis: Vec::new() };
        let mut seen: HashSet<Vec<u64>> = HashSet::new();
        let offer_support = |bits: &[u64], orth: &mut Orthogonalizer| {
            for tw in &twists {
                if orth.basis.len() == ord {
                    return;
                }
                let v = (0..ord)
                    .map(|o| if bits[o / 64] >> (o % 64) & 1 == 1 { tw[o] } else { Complex64::new(0.0, 0.0) })
                    .collect();
                orth.offer(v);
            }
        };
        let mut full = vec![0u64; words];
        for o in 0..ord {
            full[o / 64] |= 1 << (o % 64);
        }
        seen.insert(full.clone());
        offer_support(&full, &mut orth);
        let mut dims = vec![orth.basis.len()];
        for d in 1..=dmax {
            // depth-first over nondecreasing d-tuples, pruning empty partial products
            let mut stack: Vec<(usize, usize, Vec<u64>)> = vec![(0, 0, full.clone())];
            while let Some((start, depth, cur)) = stack.pop() {
                if orth.basis.len() == ord {
                    break;
                }
                if depth == d {
                    if seen.insert(cur.clone()) {
                        offer_support(&cur, &mut orth);
                    }
                    continue;
                }
                for p in (start..dicts.len()).rev() {
                    let mut next = vec![0u64; words];
                    if bitset_and(&cur, &dicts[p], &mut next) {
                        stack.push((p, depth + 1, next));
                    }
                }
            }
            dims.push(orth.basis.len());
        }
        Ok(LevelBasisSet { domain: g.tag(), options: LevelOptions { dmax, ..options }, order: ord, basis: orth.basis, dims })
    }

    pub fn dmax(&self) -> usize {
        self.dims.len() - 1
    }

    /// dim L^2(G)_{=d}
    pub fn level_dim(&self, d: usize) -> usize {
        match d {
            0 => self.dims[0],
            _ if d > self.dmax() => 0,
            _ => self.dims[d] - self.dims[d - 1],
        }
    }

    /// basis vectors of L^2(G)_{=d}
    pub fn level_range(&self, d: usize) -> std::ops::Range<usize> {
        if d > self.dmax() {
            return self.basis.len()..self.basis.len();
        }
        let lo = if d == 0 { 0 } else { self.dims[d - 1] };
        lo..self.dims[d]
    }

    fn check(&self, f: &FnTable) -> Result<()> {
        if f.domain != self.domain || f.len() != self.order {
            return Err(Error::Missing(format!("no level basis for {:?}", f.domain)));
        }
        Ok(())
    }

    fn project_range(&self, f: &FnTable, range: std::ops::Range<usize>) -> FnTable {
        let mut out = vec![Complex64::new(0.0, 0.0); self.order];
        for b in &self.basis[range] {
            let c: Complex64 = b.iter().zip(&f.values).map(|(bi, fi)| bi.conj() * fi).sum();
            for (o, bi) in out.iter_mut().zip(b) {
                *o += c * bi;
            }
        }
        FnTable::new(self.domain, out)
    }

    /// f_{<=d} (Cumulative) or f_{=d} (Pure)
    pub fn level_project(&self, f: &FnTable, d: usize, mode: DegreeMode) -> Result<FnTable> {
        self.check(f)?;
        if d > self.dmax() {
            return match mode {
                DegreeMode::Pure => Ok(f.scale(Complex64::new(0.0, 0.0))),
                DegreeMode::Cumulative => self.level_project(f, self.dmax(), mode),
            };
        }
        Ok(match mode {
            DegreeMode::Cumulative => self.project_range(f, 0..self.dims[d]),
            DegreeMode::Pure => self.project_range(f, self.level_range(d)),
        })
    }

    /// coordinates of f on the basis of L^2(G)_{=d}
    pub fn coords(&self, f: &FnTable, d: usize) -> Vec<Complex64> {
        self.basis[self.level_range(d)]
            .iter()
            .map(|b| b.iter().zip(&f.values).map(|(bi, fi)| bi.conj() * fi).sum())
            .collect()
    }

    fn cache_name(&self) -> String {
        cache_file_name(self.domain, &self.options)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(self.cache_name());
        let header = CacheHeader {
            domain: self.domain,
            options: self.options,
            order: self.order,
            dims: self.dims.clone(),
            version: CACHE_VERSION,
        };
        let mut buf = serde_json::to_vec(&header).map_err(|e| Error::Invalid(e.to_string()))?;
        buf.push(b'\n');
        for b in &self.basis {
            for z in b {
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        let tmp = path.with_extension("tmp");
        fs::File::create(&tmp)?.write_all(&buf)?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// `None` when no matching cache file exists
    pub fn load(dir: &Path, g: &GroupTable, options: LevelOptions) -> Result<Option<Self>> {
        let options = LevelOptions { dmax: options.dmax.min(g.n), ..options };
        let path = dir.join(cache_file_name(g.tag(), &options));
        let mut buf = Vec::new();
        match fs::File::open(&path) {
            Ok(mut file) => file.read_to_end(&mut buf)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let nl = buf.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Invalid("cache file has no header".into()))?;
        let header: CacheHeader = serde_json::from_slice(&buf[..nl]).map_err(|e| Error::Invalid(e.to_string()))?;
        if header.version != CACHE_VERSION || header.domain != g.tag() || header.options != options || header.order != g.order() {
            return Ok(None);
        }
        let count = *header.dims.last().unwrap_or(&0);
        let body = &buf[nl + 1..];
        if body.len() != count * header.order * 16 {
            return Err(Error::Invalid(format!("cache file {} is truncated", path.display())));
        }
        let mut it = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let basis = (0..count)
            .map(|_| (0..header.order).map(|_| Complex64::new(it.next().unwrap(), it.next().unwrap())).collect())
            .collect();
        Ok(Some(LevelBasisSet { domain: header.domain, options, order: header.order, basis, dims: header.dims }))
    }

    /// load from `dir` if present, otherwise build and store
    pub fn build_cached(g: &GroupTable, options: LevelOptions, dir: Option<&Path>) -> Result<Self> {
        if let Some(dir) = dir {
            if let Some(set) = Self::load(dir, g, options)? {
                return Ok(set);
            }
            let set = Self::build(g, options)?;
            set.save(dir)?;
            return Ok(set);
        }
        Self::build(g, options)
    }
}

fn cache_file_name(domain: Domain, options: &LevelOptions) -> String {
    let (kind, n, q) = match domain {
        Domain::Group { kind, n, q } => (kind.name(), n, q),
        Domain::Scheme { q, n, m } => ("scheme", n * 100 + m, q),
    };
    let mode = match options.mode {
        LevelMode::Strict => "strict",
        LevelMode::Twisted => "twisted",
    };
    let dual = if options.include_dual { "-dual" } else { "" };
    format!("levels-{kind}-n{n}-q{q}-{mode}{dual}-d{}-v{CACHE_VERSION}.bin", options.dmax)
}

/// A random class function with c(C^{-1}) = conj(c(C)), scaled by sqrt|G|.
pub fn random_hermitian_class_function(g: &GroupTable, rng: &mut impl Rng) -> FnTable {
    let inv = g.class_inverses();
    let mut per_class = vec![Complex64::new(0.0, 0.0); g.class_count()];
    let scale = (g.order() as f64).sqrt();
    for c in 0..g.class_count() {
        if inv[c] == c {
            per_class[c] = Complex64::new(rng.gen_range(-1.0..1.0) * scale, 0.0);
        } else if inv[c] > c {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale;
            per_class[c] = z;
            per_class[inv[c]] = z.conj();
        }
    }
    g.table((0..g.order()).map(|o| per_class[g.conjugacy_classes()[o]]).collect())
}

/// matrix of h -> c*h on the basis of L^2(G)_{=d}
pub fn convolution_matrix(g: &GroupTable, levels: &LevelBasisSet, c: &FnTable, d: usize) -> DMatrix<Complex64> {
    let range = levels.level_range(d);
    let dim = range.len();
    let mut m = DMatrix::zeros(dim, dim);
    let basis = &levels.basis[range];
    for (j, b) in basis.iter().enumerate() {
        let img = g.convolve(c, &g.table(b.clone()));
        for (i, bi) in basis.iter().enumerate() {
            m[(i, j)] = bi.iter().zip(&img.values).map(|(x, y)| x.conj() * y).sum();
        }
    }
    m
}

#[derive(Clone, Debug, Serialize)]
pub struct IsotypicLevel {
    pub d: usize,
    pub level_dim: usize,
    /// dimensions of the final eigenspace clusters, ascending
    pub eigenspace_dims: Vec<usize>,
    /// square roots of the cluster dimensions
    pub irrep_dims: Vec<usize>,
    pub m_d: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IsotypicReport {
    pub group: String,
    pub levels: Vec<IsotypicLevel>,
    pub sum_of_squares: usize,
    pub cluster_count: usize,
    pub class_count: usize,
}

fn cluster(vals: &[f64]) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for i in idx {
        if vals[i] - last > CLUSTER_TOL || out.is_empty() {
            out.push(Vec::new());
        }
        out.last_mut().unwrap().push(i);
        last = vals[i];
    }
    out
}

fn class_functions(g: &GroupTable, trials: usize, seed: u64) -> Vec<FnTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials.max(1)).map(|_| random_hermitian_class_function(g, &mut rng)).collect()
}

/// orthonormal coordinate bases of the eigenspace clusters at level d
fn refine_level(g: &GroupTable, levels: &LevelBasisSet, cfs: &[FnTable], d: usize) -> Vec<DMatrix<Complex64>> {
    let dim = levels.level_dim(d);
    if dim == 0 {
        return Vec::new();
    }
    let mut clusters: Vec<DMatrix<Complex64>> = vec![DMatrix::identity(dim, dim)];
    for c in cfs {
        let m = convolution_matrix(g, levels, c, d);
        let mut next = Vec::new();
        for q in &clusters {
            let local = q.adjoint() * &m * q;
            let local = (&local + local.adjoint()) * Complex64::new(0.5, 0.0);
            let eig = SymmetricEigen::new(local);
            let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            for group in cluster(&vals) {
                let cols: Vec<_> = group.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
                next.push(q * DMatrix::from_columns(&cols));
            }
        }
        clusters = next;
    }
    clusters
}

/// One isotypic component of L^2(G): its level and an orthonormal basis
/// of functions (counting inner product).
#[derive(Clone, Debug)]
pub struct IsotypicComponent {
    pub d: usize,
    pub basis: Vec<Vec<Complex64>>,
}

impl IsotypicComponent {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn project(&self, f: &FnTable) -> FnTable {
        let mut out = vec![Complex64::new(0.0, 0.0); f.len()];
        for b in &self.basis {
            let c: Complex64 = b.iter().zip(&f.values).map(|(bi, fi)| bi.conj() * fi).sum();
            for (o, bi) in out.iter_mut().zip(b) {
                *o += c * bi;
            }
        }
        FnTable::new(f.domain, out)
    }
}

/// the clusters of [`isotypic_refine`] as explicit function spaces
pub fn isotypic_components(g: &GroupTable, levels: &LevelBasisSet, trials: usize, seed: u64) -> Result<Vec<IsotypicComponent>> {
    if levels.domain != g.tag() {
        return Err(Error::Missing(format!("level basis is for {:?}, not {}", levels.domain, g.name())));
    }
    let cfs = class_functions(g, trials, seed);
    let mut out = Vec::new();
    for d in 0..=levels.dmax() {
        let lb = &levels.basis[levels.level_range(d)];
        for c in refine_level(g, levels, &cfs, d) {
            let basis = (0..c.ncols())
                .map(|j| {
                    let mut v = vec![Complex64::new(0.0, 0.0); g.order()];
                    for (i, b) in lb.iter().enumerate() {
                        let w = c[(i, j)];
                        for (o, bi) in v.iter_mut().zip(b) {
                            *o += w * bi;
                        }
                    }
                    v
                })
                .collect();
            out.push(IsotypicComponent { d, basis });
        }
    }
    Ok(out)
}

/// Split each level into isotypic components by eigendecomposing
/// convolution with random Hermitian class functions, refining the
/// clustering once per trial.
pub fn isotypic_refine(g: &GroupTable, levels: &LevelBasisSet, trials: usize, seed: u64) -> Result<IsotypicReport> {
    if levels.domain != g.tag() {
        return Err(Error::Missing(format!("level basis is for {:?}, not {}", levels.domain, g.name())));
    }
    let cfs = class_functions(g, trials, seed);
    let mut out = Vec::new();
    for d in 0..=levels.dmax() {
        let dim = levels.level_dim(d);
        if dim == 0 {
            out.push(IsotypicLevel { d, level_dim: 0, eigenspace_dims: vec![], irrep_dims: vec![], m_d: None });
            continue;
        }
        let clusters = refine_level(g, levels, &cfs, d);
        let mut eigenspace_dims: Vec<usize> = clusters.iter().map(|c| c.ncols()).collect();
        eigenspace_dims.sort_unstable();
        let mut irrep_dims = Vec::new();
        for &e in &eigenspace_dims {
            let r = (e as f64).sqrt().round() as usize;
            if r * r != e {
                return Err(Error::Refinement(format!(
                    "level {d} of {} has an eigenspace of dimension {e}, not a square; raise the trial count",
                    g.name()
                )));
            }
            irrep_dims.push(r);
        }
        let m_d = irrep_dims.iter().copied().min();
        out.push(IsotypicLevel { d, level_dim: dim, eigenspace_dims, irrep_dims, m_d });
    }
    let sum_of_squares = out.iter().flat_map(|l| l.eigenspace_dims.iter()).sum();
    let cluster_count = out.iter().map(|l| l.eigenspace_dims.len()).sum();
    if sum_of_squares != g.order() {
        return Err(Error::Refinement(format!(
            "irreducible dimensions of {} square-sum to {sum_of_squares}, expected {}",
            g.name(),
            g.order()
        )));
    }
    if cluster_count != g.class_count() {
        return Err(Error::Refinement(format!(
            "{} isotypic components found for {} but {} conjugacy classes",
            cluster_count,
            g.name(),
            g.class_count()
        )));
    }
    Ok(IsotypicReport { group: g.name(), levels: out, sum_of_squares, cluster_count, class_count: g.class_count() })
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelLowerReport {
    pub d: usize,
    /// ||j(f)^{<=d}||_2 / ||f||_2
    pub scheme_ratio: f64,
    /// ||T_d f||_2 / ||f||_2
    pub td_ratio: f64,
    /// |G| / q^{n^2}
    pub bound: f64,
    /// 1 / 4q
    pub weak_bound: f64,
    pub ok: bool,
}

/// f is first projected to L^2(G)_{=d}; both ratios are compared with |G|/q^{n^2}.
pub fn level_lower_check(g: &GroupTable, levels: &LevelBasisSet, sctx: &SchemeCtx, f: &FnTable, d: usize) -> Result<LevelLowerReport> {
    let fd = levels.level_project(f, d, DegreeMode::Pure)?;
    let norm = fd.norm2();
    if norm < TAU {
        return Err(Error::Invalid(format!("function has negligible level-{d} part ({norm:.3e})")));
    }
    let jf = g.transfer_j(&fd, sctx)?;
    let low = sctx.degree_project(&jf, d, DegreeMode::Cumulative)?;
    let scheme_ratio = low.norm2() / norm;
    let td = g.transfer_i(&low, sctx)?;
    let td_ratio = td.norm2() / norm;
    let bound = g.density_in_scheme();
    let weak_bound = 1.0 / (4.0 * g.q() as f64);
    let ok = scheme_ratio >= bound - TAU && td_ratio >= bound - TAU && bound >= weak_bound;
    Ok(LevelLowerReport { d, scheme_ratio, td_ratio, bound, weak_bound, ok })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(kind: GroupKind, n: usize, q: usize) -> GroupTable {
        GroupTable::enumerate(kind, n, Arc::new(FieldCtx::new(q).unwrap())).unwrap()
    }

    #[test]
    fn orders() {
        assert_eq!(group(GroupKind::SL, 2, 2).order(), 6);
        assert_eq!(group(GroupKind::SL, 2, 3).order(), 24);
        assert_eq!(group(GroupKind::GL, 2, 2).order(), 6);
        assert_eq!(group(GroupKind::GL, 2, 3).order(), 48);
        assert_eq!(group(GroupKind::SL, 3, 2).order(), 168);
        let f = Arc::new(FieldCtx::new(3).unwrap());
        assert!(matches!(
            GroupTable::enumerate_with_cap(GroupKind::SL, 3, f, 1000),
            Err(Error::CapExceeded { count: 5616, .. })
        ));
    }

    #[test]
    fn inverses_and_closure() {
        let g = group(GroupKind::SL, 2, 3);
        for a in 0..g.order() {
            assert_eq!(g.mul(a, g.inv(a)), g.identity());
            for b in 0..g.order() {
                let p = g.mat(a).mul(&g.field, g.mat(b)).unwrap();
                assert_eq!(g.ordinal(&p), Some(g.mul(a, b)));
            }
        }
    }

    #[test]
    fn class_examples() {
        let g = group(GroupKind::SL, 2, 2);
        let mut sizes = g.class_sizes().to_vec();
        sizes.sort();
        assert_eq!(sizes, vec![1, 2, 3]);
        assert_eq!(g.class_sizes()[g.conjugacy_classes()[g.identity()]], 1);
        assert_eq!(group(GroupKind::SL, 2, 3).class_count(), 7);
        assert_eq!(group(GroupKind::SL, 3, 2).class_count(), 6);
        let gl = group(GroupKind::GL, 2, 3);
        assert_eq!(gl.class_count(), 8);
        for g in [gl, group(GroupKind::SL, 2, 5)] {
            // brute-force orbits
            let mut label = vec![usize::MAX; g.order()];
            let mut count = 0;
            for x in 0..g.order() {
                if label[x] != usize::MAX {
                    continue;
                }
                for y in 0..g.order() {
                    label[g.mul(g.mul(y, x), g.inv(y))] = count;
                }
                count += 1;
            }
            assert_eq!(count, g.class_count());
        }
    }

    #[test]
    fn transfer_examples() {
        let g = group(GroupKind::SL, 2, 2);
        let s = g.scheme().unwrap();
        let j1 = g.transfer_j(&g.constant(1.0), &s).unwrap();
        assert!((j1.mean().re - 0.375).abs() < 1e-15);
        let f = g.table((0..6).map(|i| Complex64::new(i as f64, -1.0)).collect());
        let back = g.transfer_i(&g.transfer_j(&f, &s).unwrap(), &s).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn convolution_examples() {
        let g = group(GroupKind::SL, 2, 3);
        let one = g.constant(1.0);
        assert!(g.convolve(&one, &one).max_abs_diff(&one) < 1e-12);
        let f = g.table((0..24).map(|i| Complex64::new((i as f64).sin(), 0.3)).collect());
        assert!(g.convolve(&g.delta(), &f).max_abs_diff(&f) < 1e-12);
        assert!(g.convolve(&f, &g.delta()).max_abs_diff(&f) < 1e-12);
    }

    #[test]
    fn levels_sl22_and_gl() {
        let g = group(GroupKind::SL, 2, 2);
        let lv = LevelBasisSet::build(&g, LevelOptions::strict(2)).unwrap();
        assert_eq!(lv.dims[0], 1);
        assert_eq!(*lv.dims.last().unwrap(), 6);
        let g = group(GroupKind::GL, 2, 3);
        let tw = LevelBasisSet::build(&g, LevelOptions { mode: LevelMode::Twisted, include_dual: false, dmax: 2 }).unwrap();
        assert_eq!(tw.dims[0], 2);
        assert_eq!(*tw.dims.last().unwrap(), 48);
    }

    #[test]
    fn isotypic_small_groups() {
        for (n, q, classes) in [(2, 2, 3), (2, 3, 7), (3, 2, 6)] {
            let g = group(GroupKind::SL, n, q);
            let lv = LevelBasisSet::build(&g, LevelOptions::strict(n)).unwrap();
            let rep = isotypic_refine(&g, &lv, 3, 0).unwrap();
            assert_eq!(rep.sum_of_squares, g.order());
            assert_eq!(rep.cluster_count, classes);
        }
    }

    #[test]
    fn cache_round_trip() {
        let dir = std::env::temp_dir().join(format!("slnq-cache-test-{}", std::process::id()));
        let g = group(GroupKind::SL, 2, 3);
        let opts = LevelOptions::strict(2);
        assert!(LevelBasisSet::load(&dir, &g, opts).unwrap().is_none());
        let built = LevelBasisSet::build_cached(&g, opts, Some(&dir)).unwrap();
        let loaded = LevelBasisSet::load(&dir, &g, opts).unwrap().unwrap();
        assert_eq!(built.dims, loaded.dims);
        assert_eq!(built.basis, loaded.basis);
        fs::remove_dir_all(&dir).unwrap();
    }
}
