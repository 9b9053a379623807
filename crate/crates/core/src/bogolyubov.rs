//! Product-set algebra on G, groumvirate enumeration, Bogolyubov-type
//! containment search and easy-set covers of approximate subgroups.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fqlin::{enumerate_subspaces, gaussian_binomial, MatFq, Subspace, SUBSPACE_CAP};
use crate::globality::{density_bump_search, umvirate_normal_form, BumpConfig, BumpOutcome, GoodUmvirate};
use crate::groups::{GroupKind, GroupTable};
use crate::scheme::{Domain, FnTable};

/// A subset of G by sorted element ordinals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GroupSet {
    pub tag: Domain,
    pub order: usize,
    pub elems: Vec<usize>,
}

impl GroupSet {
    pub fn new(g: &GroupTable, elems: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut elems: Vec<usize> = elems.into_iter().collect();
        elems.sort_unstable();
        elems.dedup();
        if let Some(&last) = elems.last() {
            if last >= g.order() {
                return Err(Error::OutOfRange { index: last, size: g.order() });
            }
        }
        Ok(GroupSet { tag: g.tag(), order: g.order(), elems })
    }

    fn from_mask(g: &GroupTable, mask: &[bool]) -> Self {
        GroupSet { tag: g.tag(), order: g.order(), elems: (0..mask.len()).filter(|&o| mask[o]).collect() }
    }

    pub fn full(g: &GroupTable) -> Self {
        GroupSet { tag: g.tag(), order: g.order(), elems: (0..g.order()).collect() }
    }

    pub fn identity(g: &GroupTable) -> Self {
        GroupSet { tag: g.tag(), order: g.order(), elems: vec![g.identity()] }
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn density(&self) -> f64 {
        self.elems.len() as f64 / self.order as f64
    }

    pub fn contains(&self, o: usize) -> bool {
        self.elems.binary_search(&o).is_ok()
    }

    pub fn is_subset(&self, other: &GroupSet) -> bool {
        self.elems.iter().all(|&o| other.contains(o))
    }

    pub fn is_full(&self) -> bool {
        self.elems.len() == self.order
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.order];
        for &o in &self.elems {
            m[o] = true;
        }
        m
    }

    pub fn intersection(&self, other: &GroupSet) -> GroupSet {
        GroupSet { elems: self.elems.iter().copied().filter(|&o| other.contains(o)).collect(), ..self.clone() }
    }

    pub fn union(&self, other: &GroupSet) -> GroupSet {
        let mut elems = self.elems.clone();
        elems.extend(&other.elems);
        elems.sort_unstable();
        elems.dedup();
        GroupSet { elems, ..self.clone() }
    }

    pub fn indicator(&self, g: &GroupTable) -> FnTable {
        g.indicator(self.elems.iter().copied())
    }

    /// {ab : a in self, b in other}
    pub fn product(&self, g: &GroupTable, other: &GroupSet) -> GroupSet {
        let mut mask = vec![false; g.order()];
        for &a in &self.elems {
            for &b in &other.elems {
                mask[g.mul(a, b)] = true;
            }
        }
        GroupSet::from_mask(g, &mask)
    }

    pub fn inverse(&self, g: &GroupTable) -> GroupSet {
        let mut elems: Vec<usize> = self.elems.iter().map(|&a| g.inv(a)).collect();
        elems.sort_unstable();
        GroupSet { elems, ..self.clone() }
    }

    /// A^k for k >= 1
    pub fn power(&self, g: &GroupTable, k: usize) -> GroupSet {
        let mut acc = self.clone();
        for _ in 1..k {
            acc = acc.product(g, self);
        }
        acc
    }

    pub fn is_symmetric(&self, g: &GroupTable) -> bool {
        self.inverse(g) == *self
    }

    /// closure under products and inverses, and nonempty
    pub fn is_subgroup(&self, g: &GroupTable) -> bool {
        !self.is_empty()
            && self.elems.iter().all(|&a| self.contains(g.inv(a)) && self.elems.iter().all(|&b| self.contains(g.mul(a, b))))
    }

    /// A A^{-1} A A^{-1}
    pub fn bogolyubov_set(&self, g: &GroupTable) -> GroupSet {
        let aa = self.product(g, &self.inverse(g));
        aa.product(g, &aa)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetOp {
    Product,
    Inverse,
    Power(usize),
}

pub fn set_algebra(g: &GroupTable, a: &GroupSet, b: Option<&GroupSet>, op: SetOp) -> Result<GroupSet> {
    for s in std::iter::once(a).chain(b) {
        if s.tag != g.tag() {
            return Err(Error::Shape(format!("set belongs to {:?}, not {}", s.tag, g.name())));
        }
    }
    match op {
        SetOp::Product => Ok(a.product(g, b.ok_or_else(|| Error::Invalid("product needs two sets".into()))?)),
        SetOp::Inverse => Ok(a.inverse(g)),
        SetOp::Power(0) => Ok(GroupSet::identity(g)),
        SetOp::Power(k) => Ok(a.power(g, k)),
    }
}

/// A conjugate g L_k g^{-1} with its invariant data.
#[derive(Clone, Debug, Serialize)]
pub struct Groumvirate {
    pub good: GoodUmvirate,
    /// pointwise-fixed k-subspace g span(e_1..e_k)
    pub fixed: Subspace,
    /// invariant complement g span(e_{k+1}..e_n)
    pub complement: Subspace,
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroumvirateEnumeration {
    pub k: usize,
    pub subgroup_order: usize,
    pub groumvirates: Vec<Groumvirate>,
    /// distinct conjugates found by orbit enumeration
    pub orbit_count: usize,
    /// [n,k]_q q^{k(n-k)} (fixed subspace, complement) pairs
    pub parametrization_count: u128,
    pub normalizer_order: usize,
    /// L_k is the trivial group
    pub trivial: bool,
}

fn trivial_block(kind: GroupKind, n: usize, k: usize) -> bool {
    match kind {
        GroupKind::SL => n - k <= 1,
        GroupKind::GL => n == k,
    }
}

/// {x in G : x fixes F pointwise and maps C into C}
fn members_by_parameters(g: &GroupTable, fixed: &Subspace, complement: &Subspace) -> Vec<usize> {
    let f = &g.field;
    let fb = fixed.basis_vecs();
    let cb = complement.basis_vecs();
    (0..g.order())
        .filter(|&o| {
            let x = g.mat(o);
            fb.iter().all(|b| &x.mul_vec(f, b) == b) && cb.iter().all(|c| complement.contains(f, &x.mul_vec(f, c)))
        })
        .collect()
}

fn parameters_of(g: &GroupTable, k: usize, conj: &MatFq) -> (Subspace, Subspace) {
    let f = &g.field;
    let n = g.n;
    let fixed = Subspace::span(f, n, &(0..k).map(|i| conj.col(i)).collect::<Vec<_>>());
    let complement = Subspace::span(f, n, &(k..n).map(|i| conj.col(i)).collect::<Vec<_>>());
    (fixed, complement)
}

/// All distinct conjugates of L_k, found by conjugating with every element
/// and deduplicating member sets; ordered by least member list.
pub fn groumvirate_enumerate(g: &GroupTable, k: usize) -> Result<GroumvirateEnumeration> {
    let n = g.n;
    if k > n {
        return Err(Error::Invalid(format!("k = {k} exceeds n = {n}")));
    }
    let f = &g.field;
    let trivial = trivial_block(g.kind, n, k);
    let base = GoodUmvirate::whole(n);
    let block = GoodUmvirate { k, ..base };
    let lk = block.members(g);
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut out = Vec::new();
    for c in 0..g.order() {
        let ci = g.inv(c);
        let mut mem: Vec<usize> = lk.iter().map(|&y| g.mul(g.mul(c, y), ci)).collect();
        mem.sort_unstable();
        if seen.insert(mem.clone()) {
            let conj = g.mat(c).clone();
            let (fixed, complement) = parameters_of(g, k, &conj);
            out.push(Groumvirate { good: GoodUmvirate::groumvirate(f, k, &conj), fixed, complement, members: mem });
        }
    }
    out.sort_by(|a, b| a.members.cmp(&b.members));
    let orbit_count = out.len();
    let parametrization_count = if trivial { 1 } else { gaussian_binomial(n, k, g.q()) * (g.q() as u128).pow((k * (n - k)) as u32) };
    Ok(GroumvirateEnumeration {
        k,
        subgroup_order: lk.len(),
        groumvirates: out,
        orbit_count,
        parametrization_count,
        normalizer_order: g.order() / orbit_count,
        trivial,
    })
}

/// Count distinct member sets over every (fixed subspace, complement)
/// pair directly from the parameters.
pub fn parametrized_groumvirates(g: &GroupTable, k: usize) -> Result<Vec<Vec<usize>>> {
    let f = &g.field;
    let n = g.n;
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    for fixed in enumerate_subspaces(f, n, k, SUBSPACE_CAP)? {
        for comp in enumerate_subspaces(f, n, n - k, SUBSPACE_CAP)? {
            if fixed.intersection(f, &comp).dim() != 0 {
                continue;
            }
            seen.insert(members_by_parameters(g, &fixed, &comp));
        }
    }
    Ok(seen.into_iter().collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct GroumvirateCheck {
    pub subgroup: bool,
    pub normal_form: bool,
    pub parametrization: bool,
}

impl GroumvirateCheck {
    pub fn ok(&self) -> bool {
        self.subgroup && self.normal_form && self.parametrization
    }
}

/// subgroup axioms, block normal form membership, and parameter membership
pub fn check_groumvirate(g: &GroupTable, gr: &Groumvirate) -> Result<GroumvirateCheck> {
    let f = &g.field;
    let set = GroupSet::new(g, gr.members.iter().copied())?;
    let nf = umvirate_normal_form(f, &gr.good.as_umvirate(f))?;
    let via_nf: Vec<usize> = (0..g.order()).filter(|&o| nf.contains(f, g.mat(o))).collect();
    Ok(GroumvirateCheck {
        subgroup: set.is_subgroup(g),
        normal_form: via_nf == gr.members && gr.good.members(g) == gr.members,
        parametrization: members_by_parameters(g, &gr.fixed, &gr.complement) == gr.members,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BogolyubovReport {
    pub density: f64,
    /// |A A^{-1} A A^{-1}|
    pub bogolyubov_size: usize,
    pub best: Groumvirate,
    pub best_density: f64,
    /// number of contained conjugates at the winning k
    pub contained_at_k: usize,
    /// log mu(U) / log mu(A), when mu(A) < 1
    pub exponent: Option<f64>,
    pub fallback: bool,
}

fn identity_groumvirate(g: &GroupTable) -> Groumvirate {
    let n = g.n;
    Groumvirate {
        good: GoodUmvirate { k: n, g: MatFq::identity(n), h: MatFq::identity(n) },
        fixed: Subspace::full(n),
        complement: Subspace::zero(n),
        members: vec![g.identity()],
    }
}

/// The densest groumvirate inside A A^{-1} A A^{-1}, scanning k upward.
pub fn bogolyubov_search(g: &GroupTable, a: &GroupSet) -> Result<BogolyubovReport> {
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    let s = a.bogolyubov_set(g);
    let mut found: Option<(Groumvirate, usize)> = None;
    for k in 0..=g.n {
        if k > 0 && trivial_block(g.kind, g.n, k) {
            break;
        }
        let en = groumvirate_enumerate(g, k)?;
        let inside: Vec<Groumvirate> = en.groumvirates.into_iter().filter(|gr| gr.members.iter().all(|&o| s.contains(o))).collect();
        if let Some(first) = inside.first() {
            found = Some((first.clone(), inside.len()));
            break;
        }
    }
    let fallback = found.is_none();
    let (best, contained_at_k) = found.unwrap_or_else(|| (identity_groumvirate(g), 1));
    let best_density = best.members.len() as f64 / g.order() as f64;
    let mu = a.density();
    let exponent = (mu < 1.0).then(|| best_density.ln() / mu.ln());
    Ok(BogolyubovReport { density: mu, bogolyubov_size: s.len(), best, best_density, contained_at_k, exponent, fallback })
}

#[derive(Clone, Debug, Serialize)]
pub struct PigeonholeCheck {
    pub density: f64,
    pub applies: bool,
    pub difference_is_group: bool,
    pub bogolyubov_is_group: bool,
}

impl PigeonholeCheck {
    pub fn holds(&self) -> bool {
        !self.applies || (self.difference_is_group && self.bogolyubov_is_group)
    }
}

/// mu(A) > 1/2 forces A A^{-1} = G
pub fn pigeonhole(g: &GroupTable, a: &GroupSet) -> PigeonholeCheck {
    let aa = a.product(g, &a.inverse(g));
    let s = aa.product(g, &aa);
    PigeonholeCheck { density: a.density(), applies: 2 * a.len() > g.order(), difference_is_group: aa.is_full(), bogolyubov_is_group: s.is_full() }
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityBogolyubovReport {
    pub bump: BumpOutcome,
    /// g L_k g^{-1}
    pub target: Groumvirate,
    /// |A A^{-1} cap U'| / |U'|
    pub difference_density: f64,
    pub dense: bool,
    /// every u in U' satisfies D cap uD nonempty, D = A A^{-1} cap U'
    pub dense_sets_meet: bool,
    /// U' inside A A^{-1} A A^{-1}
    pub contained: bool,
}

pub fn density_bogolyubov(g: &GroupTable, a: &GroupSet, cfg: BumpConfig) -> Result<DensityBogolyubovReport> {
    let bump = density_bump_search(g, &a.elems, cfg)?;
    let f = &g.field;
    let k = bump.umvirate.k;
    let conj = bump.umvirate.g.clone();
    let good = GoodUmvirate::groumvirate(f, k, &conj);
    let (fixed, complement) = parameters_of(g, k, &conj);
    let target = Groumvirate { members: good.members(g), good, fixed, complement };
    let u = GroupSet::new(g, target.members.iter().copied())?;
    let aa = a.product(g, &a.inverse(g));
    let dset = aa.intersection(&u);
    let difference_density = dset.len() as f64 / u.len() as f64;
    let dense = difference_density >= 0.99;
    let meet = u.elems.iter().all(|&x| dset.elems.iter().any(|&d| dset.contains(g.mul(x, d))));
    let s = aa.product(g, &aa);
    let contained = u.is_subset(&s);
    if dense && !(meet && contained) {
        return Err(Error::Invalid("dense difference set failed to generate its groumvirate".into()));
    }
    Ok(DensityBogolyubovReport { bump, target, difference_density, dense, dense_sets_meet: meet, contained })
}

/// A union of left cosets x U of a groumvirate.
#[derive(Clone, Debug, Serialize)]
pub struct EasySet {
    pub k: usize,
    pub conjugator: MatFq,
    pub reps: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EasyCoverReport {
    pub easy: EasySet,
    /// |A^2| / |A|
    pub k_ratio: f64,
    pub cover_size: usize,
    pub covers: bool,
    pub inside_fifth_power: bool,
    /// K^4 mu(A) / mu(U)
    pub coset_bound: f64,
    /// K^5 |A| / |U|
    pub coset_bound_weak: f64,
}

pub fn easy_set_cover(g: &GroupTable, a: &GroupSet) -> Result<EasyCoverReport> {
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    if !a.is_symmetric(g) {
        return Err(Error::Invalid("an approximate subgroup must satisfy A = A^{-1}".into()));
    }
    let k_ratio = a.product(g, a).len() as f64 / a.len() as f64;
    let bog = bogolyubov_search(g, a)?;
    let u = GroupSet::new(g, bog.best.members.iter().copied())?;
    let mut covered = vec![false; g.order()];
    let mut reps = Vec::new();
    let mut j = vec![false; g.order()];
    for x in 0..g.order() {
        if covered[x] {
            continue;
        }
        let coset: Vec<usize> = u.elems.iter().map(|&y| g.mul(x, y)).collect();
        for &c in &coset {
            covered[c] = true;
        }
        if coset.iter().any(|&c| a.contains(c)) {
            reps.push(x);
            for &c in &coset {
                j[c] = true;
            }
        }
    }
    let jset = GroupSet::from_mask(g, &j);
    let a5 = a.power(g, 5);
    let mu_u = u.density();
    let easy = EasySet {
        k: bog.best.good.k,
        conjugator: bog.best.good.g.clone(),
        reps: reps.clone(),
        alpha: mu_u,
        beta: jset.density(),
    };
    Ok(EasyCoverReport {
        easy,
        k_ratio,
        cover_size: reps.len(),
        covers: a.is_subset(&jset),
        inside_fifth_power: jset.is_subset(&a5),
        coset_bound: k_ratio.powi(4) * a.density() / mu_u,
        coset_bound_weak: k_ratio.powi(5) * a.len() as f64 / u.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::FieldCtx;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn sl(n: usize, q: usize) -> GroupTable {
        GroupTable::enumerate(GroupKind::SL, n, Arc::new(FieldCtx::new(q).unwrap())).unwrap()
    }

    #[test]
    fn product_sets() {
        let g = sl(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = GroupSet::new(&g, (0..5).map(|_| rng.gen_range(0..24))).unwrap();
        assert_eq!(a.product(&g, &GroupSet::identity(&g)), a);
        let mut brute = BTreeSet::new();
        for &x in &a.elems {
            for &y in &a.elems {
                brute.insert(g.mul(x, y));
            }
        }
        assert_eq!(a.power(&g, 2).elems, brute.into_iter().collect::<Vec<_>>());
        let h = GroupSet::new(&g, groumvirate_enumerate(&g, 0).unwrap().groumvirates[0].members.clone()).unwrap();
        assert!(h.is_full() && h.is_subgroup(&g));
    }

    #[test]
    fn groumvirates_of_sl32() {
        let g = sl(3, 2);
        let e0 = groumvirate_enumerate(&g, 0).unwrap();
        assert_eq!(e0.orbit_count, 1);
        assert_eq!(e0.groumvirates[0].members.len(), 168);
        let e1 = groumvirate_enumerate(&g, 1).unwrap();
        assert_eq!(e1.subgroup_order, 6);
        assert_eq!(e1.orbit_count as u128, e1.parametrization_count);
        assert_eq!(e1.orbit_count, 28);
        let param = parametrized_groumvirates(&g, 1).unwrap();
        let orbit: Vec<Vec<usize>> = e1.groumvirates.iter().map(|g| g.members.clone()).collect();
        assert_eq!(param, orbit);
        for gr in &e1.groumvirates {
            assert!(check_groumvirate(&g, gr).unwrap().ok());
        }
        assert!(groumvirate_enumerate(&g, 2).unwrap().trivial);
    }

    #[test]
    fn bogolyubov_cases() {
        let g = sl(3, 2);
        let r = bogolyubov_search(&g, &GroupSet::full(&g)).unwrap();
        assert_eq!(r.best.good.k, 0);
        let e1 = groumvirate_enumerate(&g, 1).unwrap();
        let gr = &e1.groumvirates[3];
        let coset = GoodUmvirate { h: g.mat(55).clone(), ..gr.good.clone() };
        let a = GroupSet::new(&g, coset.members(&g)).unwrap();
        let r = bogolyubov_search(&g, &a).unwrap();
        assert_eq!(r.best.members, gr.members);
        assert!((r.best_density - 6.0 / 168.0).abs() < 1e-15);
    }

    #[test]
    fn easy_cover_of_subgroup() {
        let g = sl(3, 2);
        let e1 = groumvirate_enumerate(&g, 1).unwrap();
        let a = GroupSet::new(&g, e1.groumvirates[0].members.clone()).unwrap();
        let r = easy_set_cover(&g, &a).unwrap();
        assert_eq!(r.k_ratio, 1.0);
        assert!(r.covers && r.inside_fifth_power);
        assert_eq!(r.cover_size, 1);
        let r = easy_set_cover(&g, &GroupSet::full(&g)).unwrap();
        assert_eq!(r.cover_size, 1);
    }
}
