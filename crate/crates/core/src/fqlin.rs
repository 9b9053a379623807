//! Dense linear algebra over F_q.
//!
//! Vectors are plain `Vec<u8>` of field encodings. A map `A in L(V,W)`
//! with `dim V = n`, `dim W = m` is an `m x n` matrix acting on column
//! vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{FieldCtx, FieldElem};

pub const DOMAIN_CAP: u128 = 1 << 24;
pub const SUBSPACE_CAP: u128 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatFq {
    pub rows: usize,
    pub cols: usize,
    /// row-major
    pub entries: Vec<FieldElem>,
}

impl MatFq {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        MatFq { rows, cols, entries: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = 1;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, entries: Vec<FieldElem>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!("{} entries for a {rows}x{cols} matrix", entries.len())));
        }
        Ok(MatFq { rows, cols, entries })
    }

    /// matrix whose rows are the given vectors (all of length `cols`)
    pub fn from_rows(cols: usize, rows: &[Vec<FieldElem>]) -> Self {
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "row length");
            entries.extend_from_slice(r);
        }
        MatFq { rows: rows.len(), cols, entries }
    }

    /// matrix whose columns are the given vectors (all of length `rows`)
    pub fn from_cols(rows: usize, cols: &[Vec<FieldElem>]) -> Self {
        Self::from_rows(rows, cols).transpose()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> FieldElem {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: FieldElem) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[FieldElem] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<FieldElem> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn row_vecs(&self) -> Vec<Vec<FieldElem>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn mul(&self, f: &FieldCtx, b: &MatFq) -> Result<MatFq> {
        if self.cols != b.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, b.rows, b.cols
            )));
        }
        let mut out = Self::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..b.cols {
                    let idx = i * b.cols + j;
                    out.entries[idx] = f.add(out.entries[idx], f.mul(a, b.get(k, j)));
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, f: &FieldCtx, v: &[FieldElem]) -> Vec<FieldElem> {
        assert_eq!(v.len(), self.cols, "vector length");
        (0..self.rows)
            .map(|r| dot(f, self.row(r), v))
            .collect()
    }

    pub fn add(&self, f: &FieldCtx, b: &MatFq) -> Result<MatFq> {
        if (self.rows, self.cols) != (b.rows, b.cols) {
            return Err(Error::Shape("matrix sum of different shapes".into()));
        }
        let entries = self.entries.iter().zip(&b.entries).map(|(&x, &y)| f.add(x, y)).collect();
        Ok(MatFq { rows: self.rows, cols: self.cols, entries })
    }

    pub fn sub(&self, f: &FieldCtx, b: &MatFq) -> Result<MatFq> {
        self.add(f, &b.neg(f))
    }

    pub fn neg(&self, f: &FieldCtx) -> MatFq {
        MatFq { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(|&x| f.neg(x)).collect() }
    }

    pub fn scale(&self, f: &FieldCtx, c: FieldElem) -> MatFq {
        MatFq { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(|&x| f.mul(c, x)).collect() }
    }

    pub fn trace(&self, f: &FieldCtx) -> FieldElem {
        (0..self.rows.min(self.cols)).fold(0, |acc, i| f.add(acc, self.get(i, i)))
    }

    /// rows `r0..r1`, columns `c0..c1`
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> MatFq {
        let mut out = Self::zeros(r1 - r0, c1 - c0);
        for r in r0..r1 {
            for c in c0..c1 {
                out.set(r - r0, c - c0, self.get(r, c));
            }
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &MatFq) {
        for r in 0..b.rows {
            for c in 0..b.cols {
                self.set(r0 + r, c0 + c, b.get(r, c));
            }
        }
    }

    pub fn rank(&self, f: &FieldCtx) -> usize {
        let mut m = self.clone();
        rref_in_place(f, &mut m).len()
    }

    pub fn det(&self, f: &FieldCtx) -> Result<FieldElem> {
        if !self.is_square() {
            return Err(Error::Shape("determinant of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1u8;
        for c in 0..n {
            let Some(p) = (c..n).find(|&r| a.get(r, c) != 0) else {
                return Ok(0);
            };
            if p != c {
                swap_rows(&mut a, p, c);
                det = f.neg(det);
            }
            let piv = a.get(c, c);
            det = f.mul(det, piv);
            let pinv = f.inv_nz(piv);
            for r in c + 1..n {
                let factor = f.mul(a.get(r, c), pinv);
                if factor != 0 {
                    for k in c..n {
                        let v = f.sub(a.get(r, k), f.mul(factor, a.get(c, k)));
                        a.set(r, k, v);
                    }
                }
            }
        }
        Ok(det)
    }

    pub fn inverse(&self, f: &FieldCtx) -> Option<MatFq> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        if n == 0 {
            return Some(self.clone());
        }
        let mut aug = Self::zeros(n, 2 * n);
        aug.set_block(0, 0, self);
        aug.set_block(0, n, &Self::identity(n));
        let piv = rref_in_place(f, &mut aug);
        if piv.len() < n || piv[n - 1] != n - 1 {
            return None;
        }
        Some(aug.block(0, n, n, 2 * n))
    }
}

pub fn dot(f: &FieldCtx, a: &[FieldElem], b: &[FieldElem]) -> FieldElem {
    a.iter().zip(b).fold(0, |acc, (&x, &y)| f.add(acc, f.mul(x, y)))
}

fn swap_rows(a: &mut MatFq, i: usize, j: usize) {
    if i == j {
        return;
    }
    for c in 0..a.cols {
        a.entries.swap(i * a.cols + c, j * a.cols + c);
    }
}

/// reduce in place to reduced row-echelon form; returns the pivot columns
pub fn rref_in_place(f: &FieldCtx, a: &mut MatFq) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..a.cols {
        if r == a.rows {
            break;
        }
        let Some(p) = (r..a.rows).find(|&i| a.get(i, c) != 0) else {
            continue;
        };
        swap_rows(a, p, r);
        let inv = f.inv_nz(a.get(r, c));
        for k in 0..a.cols {
            let v = f.mul(inv, a.get(r, k));
            a.set(r, k, v);
        }
        for i in 0..a.rows {
            if i == r {
                continue;
            }
            let factor = a.get(i, c);
            if factor == 0 {
                continue;
            }
            for k in 0..a.cols {
                let v = f.sub(a.get(i, k), f.mul(factor, a.get(r, k)));
                a.set(i, k, v);
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

#[derive(Clone, Debug)]
pub struct Canonical {
    pub rref: MatFq,
    pub rank: usize,
    pub pivots: Vec<usize>,
    pub kernel: Subspace,
    pub image: Subspace,
}

pub fn canonicalize(f: &FieldCtx, a: &MatFq) -> Canonical {
    let mut rref = a.clone();
    let pivots = rref_in_place(f, &mut rref);
    let rank = pivots.len();
    let mut kernel_vecs = Vec::new();
    for free in (0..a.cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![0u8; a.cols];
        v[free] = 1;
        for (i, &p) in pivots.iter().enumerate() {
            v[p] = f.neg(rref.get(i, free));
        }
        kernel_vecs.push(v);
    }
    let kernel = Subspace::span(f, a.cols, &kernel_vecs);
    let cols: Vec<Vec<u8>> = (0..a.cols).map(|c| a.col(c)).collect();
    let image = Subspace::span(f, a.rows, &cols);
    Canonical { rref, rank, pivots, kernel, image }
}

/// a subspace of F_q^n stored by its RREF basis
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subspace {
    pub ambient: usize,
    pub basis: MatFq,
    pub pivots: Vec<usize>,
}

impl Subspace {
    pub fn zero(n: usize) -> Self {
        Subspace { ambient: n, basis: MatFq::zeros(0, n), pivots: vec![] }
    }

    pub fn full(n: usize) -> Self {
        Subspace { ambient: n, basis: MatFq::identity(n), pivots: (0..n).collect() }
    }

    pub fn span(f: &FieldCtx, n: usize, vectors: &[Vec<FieldElem>]) -> Self {
        let mut m = MatFq::from_rows(n, vectors);
        let pivots = rref_in_place(f, &mut m);
        let basis = m.block(0, pivots.len(), 0, n);
        Subspace { ambient: n, basis, pivots }
    }

    pub fn dim(&self) -> usize {
        self.basis.rows
    }

    pub fn codim(&self) -> usize {
        self.ambient - self.dim()
    }

    pub fn basis_vecs(&self) -> Vec<Vec<FieldElem>> {
        self.basis.row_vecs()
    }

    /// `v` minus its projection along the basis onto the pivot coordinates
    pub fn reduce(&self, f: &FieldCtx, v: &[FieldElem]) -> Vec<FieldElem> {
        let mut r = v.to_vec();
        for (i, &p) in self.pivots.iter().enumerate() {
            let c = r[p];
            if c == 0 {
                continue;
            }
            for (k, x) in r.iter_mut().enumerate() {
                *x = f.sub(*x, f.mul(c, self.basis.get(i, k)));
            }
        }
        r
    }

    pub fn contains(&self, f: &FieldCtx, v: &[FieldElem]) -> bool {
        self.reduce(f, v).iter().all(|&x| x == 0)
    }

    pub fn is_subspace_of(&self, f: &FieldCtx, other: &Subspace) -> bool {
        self.basis_vecs().iter().all(|v| other.contains(f, v))
    }

    pub fn sum(&self, f: &FieldCtx, other: &Subspace) -> Subspace {
        let mut vs = self.basis_vecs();
        vs.extend(other.basis_vecs());
        Subspace::span(f, self.ambient, &vs)
    }

    /// annihilator under the standard dot product
    pub fn annihilator(&self, f: &FieldCtx) -> Subspace {
        canonicalize(f, &self.basis).kernel
    }

    pub fn intersection(&self, f: &FieldCtx, other: &Subspace) -> Subspace {
        self.annihilator(f).sum(f, &other.annihilator(f)).annihilator(f)
    }

    /// every vector of the subspace, `q^dim` of them
    pub fn members(&self, f: &FieldCtx) -> Vec<Vec<FieldElem>> {
        let k = self.dim();
        let total = f.q.pow(k as u32);
        (0..total)
            .map(|i| {
                let coeffs = vec_from_index(k, f.q, i);
                combine(f, &self.basis, &coeffs)
            })
            .collect()
    }
}

/// sum of `coeffs[i] * row i`
pub fn combine(f: &FieldCtx, rows: &MatFq, coeffs: &[FieldElem]) -> Vec<FieldElem> {
    let mut out = vec![0u8; rows.cols];
    for (i, &c) in coeffs.iter().enumerate() {
        if c == 0 {
            continue;
        }
        for (k, x) in out.iter_mut().enumerate() {
            *x = f.add(*x, f.mul(c, rows.get(i, k)));
        }
    }
    out
}

/// vector of length n with entry i the i-th base-q digit of `idx`
pub fn vec_from_index(n: usize, q: usize, idx: usize) -> Vec<FieldElem> {
    let mut out = vec![0u8; n];
    let mut r = idx;
    for x in out.iter_mut() {
        *x = (r % q) as u8;
        r /= q;
    }
    out
}

pub fn vec_index(q: usize, v: &[FieldElem]) -> usize {
    v.iter().rev().fold(0, |acc, &x| acc * q + x as usize)
}

pub fn all_vectors(n: usize, q: usize) -> Vec<Vec<FieldElem>> {
    (0..q.pow(n as u32)).map(|i| vec_from_index(n, q, i)).collect()
}

/// Gaussian binomial [n choose k]_q by the product formula
pub fn gaussian_binomial(n: usize, k: usize, q: usize) -> u128 {
    if k > n {
        return 0;
    }
    let q = q as u128;
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..k {
        num *= q.pow((n - i) as u32) - 1;
        den *= q.pow((i + 1) as u32) - 1;
    }
    num / den
}

/// all subspaces of F_q^n of dimension `dim`, sorted by their RREF entries
pub fn enumerate_subspaces(f: &FieldCtx, n: usize, dim: usize, cap: u128) -> Result<Vec<Subspace>> {
    if dim > n {
        return Err(Error::Invalid(format!("subspace dimension {dim} exceeds ambient {n}")));
    }
    let count = gaussian_binomial(n, dim, f.q);
    if count > cap {
        return Err(Error::CapExceeded { what: "subspace count", count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    for pivots in combinations(n, dim) {
        let mut free = Vec::new();
        for (i, &p) in pivots.iter().enumerate() {
            for c in p + 1..n {
                if !pivots.contains(&c) {
                    free.push((i, c));
                }
            }
        }
        for code in 0..f.q.pow(free.len() as u32) {
            let mut basis = MatFq::zeros(dim, n);
            for (i, &p) in pivots.iter().enumerate() {
                basis.set(i, p, 1);
            }
            let vals = vec_from_index(free.len(), f.q, code);
            for (&(i, c), &v) in free.iter().zip(&vals) {
                basis.set(i, c, v);
            }
            out.push(Subspace { ambient: n, basis, pivots: pivots.clone() });
        }
    }
    out.sort_by(|a, b| a.basis.entries.cmp(&b.basis.entries));
    Ok(out)
}

/// all subspaces of every dimension, grouped by increasing dimension
pub fn enumerate_all_subspaces(f: &FieldCtx, n: usize, cap: u128) -> Result<Vec<Subspace>> {
    let total: u128 = (0..=n).map(|k| gaussian_binomial(n, k, f.q)).sum();
    if total > cap {
        return Err(Error::CapExceeded { what: "subspace count", count: total, cap });
    }
    let mut out = Vec::new();
    for k in 0..=n {
        out.extend(enumerate_subspaces(f, n, k, cap)?);
    }
    Ok(out)
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// A subspace together with a completion of its basis: the standard basis
/// vectors at the non-pivot coordinates.
#[derive(Clone, Debug)]
pub struct QuotientFrame {
    pub subspace: Subspace,
    pub lift_basis: MatFq,
    pub lift_cols: Vec<usize>,
}

impl QuotientFrame {
    pub fn new(sub: &Subspace) -> Self {
        let n = sub.ambient;
        let lift_cols: Vec<usize> = (0..n).filter(|c| !sub.pivots.contains(c)).collect();
        let mut lift_basis = MatFq::zeros(lift_cols.len(), n);
        for (i, &c) in lift_cols.iter().enumerate() {
            lift_basis.set(i, c, 1);
        }
        QuotientFrame { subspace: sub.clone(), lift_basis, lift_cols }
    }

    /// coordinates of `v` as (subspace part, lift part)
    pub fn decompose(&self, f: &FieldCtx, v: &[FieldElem]) -> (Vec<FieldElem>, Vec<FieldElem>) {
        let sub: Vec<u8> = self.subspace.pivots.iter().map(|&p| v[p]).collect();
        let residual = self.subspace.reduce(f, v);
        let lift = self.lift_cols.iter().map(|&c| residual[c]).collect();
        (sub, lift)
    }

    /// the functionals reading off the lift coordinates, as rows
    pub fn lift_functionals(&self, f: &FieldCtx) -> MatFq {
        let n = self.subspace.ambient;
        let mut out = MatFq::zeros(self.lift_cols.len(), n);
        for (a, &j) in self.lift_cols.iter().enumerate() {
            out.set(a, j, 1);
            for (i, &p) in self.subspace.pivots.iter().enumerate() {
                out.set(a, p, f.neg(self.subspace.basis.get(i, j)));
            }
        }
        out
    }
}

/// Bijection between `rows x cols` matrices and `[0, q^{rows cols})`:
/// entry (i,j) is the base-q digit at position `i*cols + j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexMap {
    pub rows: usize,
    pub cols: usize,
    pub q: usize,
    pub size: usize,
}

impl IndexMap {
    pub fn new(rows: usize, cols: usize, q: usize, cap: u128) -> Result<Self> {
        let count = (q as u128).checked_pow((rows * cols) as u32).unwrap_or(u128::MAX);
        if count > cap {
            return Err(Error::CapExceeded { what: "domain size", count, cap });
        }
        Ok(IndexMap { rows, cols, q, size: count as usize })
    }

    pub fn digits(&self) -> usize {
        self.rows * self.cols
    }

    pub fn to_int(&self, a: &MatFq) -> Result<usize> {
        if (a.rows, a.cols) != (self.rows, self.cols) {
            return Err(Error::Shape(format!(
                "{}x{} matrix for a {}x{} index map",
                a.rows, a.cols, self.rows, self.cols
            )));
        }
        if let Some(&bad) = a.entries.iter().find(|&&x| x as usize >= self.q) {
            return Err(Error::OutOfRange { index: bad as usize, size: self.q });
        }
        Ok(vec_index(self.q, &a.entries))
    }

    pub fn to_mat(&self, i: usize) -> Result<MatFq> {
        if i >= self.size {
            return Err(Error::OutOfRange { index: i, size: self.size });
        }
        Ok(self.mat(i))
    }

    /// unchecked `to_mat`
    #[inline]
    pub fn mat(&self, i: usize) -> MatFq {
        MatFq { rows: self.rows, cols: self.cols, entries: vec_from_index(self.digits(), self.q, i) }
    }

    #[inline]
    pub fn index(&self, a: &MatFq) -> usize {
        vec_index(self.q, &a.entries)
    }

    /// index of the sum of the matrices with indices a and b
    #[inline]
    pub fn add(&self, f: &FieldCtx, a: usize, b: usize) -> usize {
        let q = self.q;
        let (mut x, mut y, mut out, mut w) = (a, b, 0usize, 1usize);
        while x > 0 || y > 0 {
            out += f.add((x % q) as u8, (y % q) as u8) as usize * w;
            x /= q;
            y /= q;
            w *= q;
        }
        out
    }

    pub fn neg(&self, f: &FieldCtx, a: usize) -> usize {
        let q = self.q;
        let (mut x, mut out, mut w) = (a, 0usize, 1usize);
        while x > 0 {
            out += f.neg((x % q) as u8) as usize * w;
            x /= q;
            w *= q;
        }
        out
    }
}

/// rank of every matrix of the index map
pub fn rank_table(f: &FieldCtx, im: &IndexMap, cap: u128) -> Result<Vec<u8>> {
    if im.size as u128 > cap {
        return Err(Error::CapExceeded { what: "rank table", count: im.size as u128, cap });
    }
    Ok((0..im.size).map(|i| im.mat(i).rank(f) as u8).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(q: usize) -> FieldCtx {
        FieldCtx::new(q).unwrap()
    }

    #[test]
    fn canonical_examples() {
        let f2 = f(2);
        let c = canonicalize(&f2, &MatFq::identity(3));
        assert_eq!(c.rank, 3);
        assert_eq!(c.kernel.dim(), 0);
        assert_eq!(c.image, Subspace::full(3));
        let z = canonicalize(&f2, &MatFq::zeros(2, 3));
        assert_eq!(z.rank, 0);
        assert_eq!(z.kernel, Subspace::full(3));
        assert_eq!(z.image.dim(), 0);
        let a = MatFq::from_rows(2, &[vec![1, 1], vec![1, 1]]);
        let c = canonicalize(&f2, &a);
        assert_eq!(c.rank, 1);
        assert_eq!(c.kernel.basis_vecs(), vec![vec![1, 1]]);
        let again = canonicalize(&f2, &c.rref);
        assert_eq!(again.rref, c.rref);
    }

    #[test]
    fn subspace_counts() {
        assert_eq!(enumerate_subspaces(&f(2), 3, 0, SUBSPACE_CAP).unwrap().len(), 1);
        assert_eq!(enumerate_subspaces(&f(2), 3, 1, SUBSPACE_CAP).unwrap().len(), 7);
        assert_eq!(enumerate_subspaces(&f(3), 2, 1, SUBSPACE_CAP).unwrap().len(), 4);
        assert!(matches!(
            enumerate_subspaces(&f(2), 4, 2, 5),
            Err(Error::CapExceeded { count: 35, .. })
        ));
    }

    #[test]
    fn subspace_counts_match_distinct_spans() {
        // independent count: distinct spans of all k-tuples of vectors
        for q in [2, 3, 4, 5] {
            let fq = f(q);
            for n in 0..=3usize {
                if q.pow((n * n) as u32) > 20000 {
                    continue;
                }
                let vecs = all_vectors(n, q);
                for k in 0..=n.min(2) {
                    let mut seen = std::collections::BTreeSet::new();
                    let mut idx = vec![0usize; k];
                    loop {
                        let chosen: Vec<Vec<u8>> = idx.iter().map(|&i| vecs[i].clone()).collect();
                        let s = Subspace::span(&fq, n, &chosen);
                        if s.dim() == k {
                            seen.insert(s.basis.entries.clone());
                        }
                        let mut pos = 0;
                        while pos < k {
                            idx[pos] += 1;
                            if idx[pos] < vecs.len() {
                                break;
                            }
                            idx[pos] = 0;
                            pos += 1;
                        }
                        if pos == k {
                            break;
                        }
                    }
                    let listed = enumerate_subspaces(&fq, n, k, SUBSPACE_CAP).unwrap();
                    assert_eq!(listed.len() as u128, gaussian_binomial(n, k, q));
                    assert_eq!(listed.len(), seen.len(), "q={q} n={n} k={k}");
                    for (i, s) in listed.iter().enumerate() {
                        assert!(seen.contains(&s.basis.entries));
                        if i > 0 {
                            assert!(listed[i - 1].basis.entries < s.basis.entries);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gaussian_binomial_all_small() {
        // recurrence [n,k] = [n-1,k-1] + q^k [n-1,k]
        for q in 2..=5usize {
            for n in 1..=4usize {
                for k in 1..n {
                    let rec = gaussian_binomial(n - 1, k - 1, q)
                        + (q as u128).pow(k as u32) * gaussian_binomial(n - 1, k, q);
                    assert_eq!(gaussian_binomial(n, k, q), rec);
                }
            }
        }
        for q in [2, 3, 4, 5] {
            let fq = f(q);
            for n in 0..=4 {
                for k in 0..=n {
                    if gaussian_binomial(n, k, q) > 5000 {
                        continue;
                    }
                    let l = enumerate_subspaces(&fq, n, k, SUBSPACE_CAP).unwrap();
                    assert_eq!(l.len() as u128, gaussian_binomial(n, k, q));
                }
            }
        }
    }

    #[test]
    fn quotient_frame_decomposition_is_unique() {
        for q in [2, 3] {
            let fq = f(q);
            for n in 1..=3 {
                for sub in enumerate_all_subspaces(&fq, n, SUBSPACE_CAP).unwrap() {
                    let frame = QuotientFrame::new(&sub);
                    let mut full = sub.basis_vecs();
                    full.extend(frame.lift_basis.row_vecs());
                    assert_eq!(Subspace::span(&fq, n, &full).dim(), n);
                    let lam = frame.lift_functionals(&fq);
                    let mut seen = std::collections::HashSet::new();
                    for v in all_vectors(n, q) {
                        let (a, c) = frame.decompose(&fq, &v);
                        let mut rebuilt = combine(&fq, &sub.basis, &a);
                        let lifted = combine(&fq, &frame.lift_basis, &c);
                        for (x, y) in rebuilt.iter_mut().zip(&lifted) {
                            *x = fq.add(*x, *y);
                        }
                        assert_eq!(rebuilt, v);
                        assert_eq!(lam.mul_vec(&fq, &v), c);
                        assert!(seen.insert((a, c)));
                    }
                    // greedy lexicographically least completion picks the same vectors
                    let mut greedy = sub.clone();
                    let mut picked = Vec::new();
                    let mut order = all_vectors(n, q);
                    order.sort();
                    for v in order {
                        if !greedy.contains(&fq, &v) {
                            picked.push(v.clone());
                            greedy = greedy.sum(&fq, &Subspace::span(&fq, n, &[v]));
                        }
                    }
                    let mut mine = frame.lift_basis.row_vecs();
                    mine.sort();
                    picked.sort();
                    assert_eq!(mine, picked);
                }
            }
        }
    }

    #[test]
    fn index_map_examples() {
        let im = IndexMap::new(2, 2, 2, DOMAIN_CAP).unwrap();
        let a = MatFq::from_rows(2, &[vec![0, 1], vec![0, 0]]);
        assert_eq!(im.to_int(&a).unwrap(), 2);
        assert_eq!(im.to_mat(2).unwrap(), a);
        assert_eq!(im.to_int(&MatFq::zeros(2, 2)).unwrap(), 0);
        assert!(im.to_mat(16).is_err());
        let one = IndexMap::new(1, 1, 2, DOMAIN_CAP).unwrap();
        assert_eq!(one.to_int(&MatFq::identity(1)).unwrap(), 1);
        let im3 = IndexMap::new(2, 3, 3, DOMAIN_CAP).unwrap();
        let f3 = f(3);
        for i in 0..im3.size {
            assert_eq!(im3.to_int(&im3.mat(i)).unwrap(), i);
        }
        for (a, b) in [(5, 17), (100, 700), (728, 1)] {
            let s = im3.mat(a).add(&f3, &im3.mat(b)).unwrap();
            assert_eq!(im3.add(&f3, a, b), im3.index(&s));
            assert_eq!(im3.add(&f3, a, im3.neg(&f3, a)), 0);
        }
    }

    #[test]
    fn rank_histogram() {
        let f2 = f(2);
        let t = rank_table(&f2, &IndexMap::new(1, 1, 2, DOMAIN_CAP).unwrap(), DOMAIN_CAP).unwrap();
        assert_eq!(t, vec![0, 1]);
        let t = rank_table(&f2, &IndexMap::new(2, 2, 2, DOMAIN_CAP).unwrap(), DOMAIN_CAP).unwrap();
        let hist = (0..3).map(|r| t.iter().filter(|&&x| x == r).count()).collect::<Vec<_>>();
        assert_eq!(hist, vec![1, 9, 6]);
    }

    #[test]
    fn det_and_inverse() {
        let f5 = f(5);
        let a = MatFq::from_rows(2, &[vec![1, 2], vec![3, 4]]);
        // det = 4 - 6 = -2 = 3 mod 5
        assert_eq!(a.det(&f5).unwrap(), 3);
        let ai = a.inverse(&f5).unwrap();
        assert_eq!(a.mul(&f5, &ai).unwrap(), MatFq::identity(2));
        let s = MatFq::from_rows(2, &[vec![1, 2], vec![2, 4]]);
        assert_eq!(s.det(&f5).unwrap(), 0);
        assert!(s.inverse(&f5).is_none());
    }

    #[test]
    fn intersection_and_annihilator() {
        let f3 = f(3);
        let u = Subspace::span(&f3, 3, &[vec![1, 0, 0], vec![0, 1, 0]]);
        let w = Subspace::span(&f3, 3, &[vec![0, 1, 0], vec![0, 0, 1]]);
        let i = u.intersection(&f3, &w);
        assert_eq!(i, Subspace::span(&f3, 3, &[vec![0, 1, 0]]));
        assert_eq!(u.annihilator(&f3), Subspace::span(&f3, 3, &[vec![0, 0, 1]]));
    }
}
