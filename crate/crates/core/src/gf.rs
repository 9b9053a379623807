//! Finite fields F_q, q = p^m, for q <= 16.
//!
//! Elements are encoded as integers in `[0, q)`: the polynomial
//! `c_0 + c_1 x + ... + c_{m-1} x^{m-1}` is stored as `sum c_i p^i`.
//! All arithmetic goes through precomputed tables.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type FieldElem = u8;

pub const SUPPORTED_Q: [usize; 10] = [2, 3, 4, 5, 7, 8, 9, 11, 13, 16];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Mul,
    Neg,
    Inv,
}

#[derive(Clone, Debug)]
pub struct FieldCtx {
    pub p: usize,
    pub m: usize,
    pub q: usize,
    /// low-to-high coefficients of the monic modulus (length m+1)
    pub modulus: Vec<u8>,
    add: Vec<u8>,
    mul: Vec<u8>,
    neg: Vec<u8>,
    inv: Vec<u8>,
    exp: Vec<u8>,
    log: Vec<u32>,
    trace: Vec<u8>,
    chi: Vec<Complex64>,
}

fn split_prime_power(q: usize) -> Option<(usize, usize)> {
    if q < 2 {
        return None;
    }
    let mut p = 2;
    while q % p != 0 {
        p += 1;
    }
    let mut m = 0;
    let mut r = q;
    while r % p == 0 {
        r /= p;
        m += 1;
    }
    (r == 1).then_some((p, m))
}

fn builtin_modulus(q: usize) -> Option<Vec<u8>> {
    Some(match q {
        2 | 3 | 5 | 7 | 11 | 13 => vec![0, 1],
        4 => vec![1, 1, 1],
        8 => vec![1, 1, 0, 1],
        9 => vec![1, 0, 1],
        16 => vec![1, 1, 0, 0, 1],
        _ => return None,
    })
}

fn digits(x: usize, p: usize, m: usize) -> Vec<usize> {
    let mut out = vec![0; m];
    let mut r = x;
    for d in out.iter_mut() {
        *d = r % p;
        r /= p;
    }
    out
}

fn undigits(d: &[usize], p: usize) -> usize {
    d.iter().rev().fold(0, |acc, &c| acc * p + c)
}

/// remainder of `a` modulo the monic polynomial `b` over F_p (coefficients low to high)
fn poly_rem(a: &[usize], b: &[usize], p: usize) -> Vec<usize> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    while r.len() > db {
        let lead = *r.last().unwrap() % p;
        let shift = r.len() - 1 - db;
        if lead != 0 {
            for (i, &c) in b.iter().enumerate() {
                r[shift + i] = (r[shift + i] + p * p - lead * c % p) % p;
            }
        }
        r.pop();
    }
    r
}

fn is_irreducible(modulus: &[usize], p: usize) -> bool {
    let deg = modulus.len() - 1;
    if deg == 1 {
        return true;
    }
    // trial division by every monic polynomial of degree 1..=deg/2
    for k in 1..=deg / 2 {
        for low in 0..p.pow(k as u32) {
            let mut cand = digits(low, p, k);
            cand.push(1);
            if poly_rem(modulus, &cand, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

impl FieldCtx {
    /// field of size `q` with the built-in modulus
    pub fn new(q: usize) -> Result<Self> {
        let modulus = builtin_modulus(q).ok_or(Error::UnsupportedField(q))?;
        let (p, _) = split_prime_power(q).ok_or(Error::UnsupportedField(q))?;
        Self::with_modulus(p, modulus)
    }

    pub fn with_modulus(p: usize, modulus: Vec<u8>) -> Result<Self> {
        if split_prime_power(p) != Some((p, 1)) || modulus.len() < 2 {
            return Err(Error::Invalid(format!("bad prime {p} or modulus {modulus:?}")));
        }
        if modulus.iter().any(|&c| c as usize >= p) || *modulus.last().unwrap() != 1 {
            return Err(Error::Invalid(format!("modulus {modulus:?} is not monic over F_{p}")));
        }
        let m = modulus.len() - 1;
        let q = p.pow(m as u32);
        if !SUPPORTED_Q.contains(&q) {
            return Err(Error::UnsupportedField(q));
        }
        let md: Vec<usize> = modulus.iter().map(|&c| c as usize).collect();
        if !is_irreducible(&md, p) {
            return Err(Error::ReducibleModulus(modulus));
        }

        let mut add = vec![0u8; q * q];
        let mut mul = vec![0u8; q * q];
        for x in 0..q {
            let dx = digits(x, p, m);
            for y in 0..q {
                let dy = digits(y, p, m);
                let s: Vec<usize> = dx.iter().zip(&dy).map(|(a, b)| (a + b) % p).collect();
                add[x * q + y] = undigits(&s, p) as u8;
                let mut prod = vec![0usize; 2 * m - 1];
                for (i, a) in dx.iter().enumerate() {
                    for (j, b) in dy.iter().enumerate() {
                        prod[i + j] = (prod[i + j] + a * b) % p;
                    }
                }
                let r = if m == 1 { prod } else { poly_rem(&prod, &md, p) };
                mul[x * q + y] = undigits(&r, p) as u8;
            }
        }
        let mut neg = vec![0u8; q];
        let mut inv = vec![0u8; q];
        for x in 0..q {
            for y in 0..q {
                if add[x * q + y] == 0 {
                    neg[x] = y as u8;
                }
                if mul[x * q + y] == 1 {
                    inv[x] = y as u8;
                }
            }
        }

        // smallest primitive element
        let mut exp = Vec::new();
        for g in 2.min(q - 1)..q {
            let mut powers = vec![1u8];
            let mut cur = g as u8;
            while cur != 1 {
                powers.push(cur);
                cur = mul[cur as usize * q + g];
            }
            if powers.len() == q - 1 {
                exp = powers;
                break;
            }
        }
        let mut log = vec![u32::MAX; q];
        for (k, &e) in exp.iter().enumerate() {
            log[e as usize] = k as u32;
        }

        let mut ctx = FieldCtx {
            p,
            m,
            q,
            modulus,
            add,
            mul,
            neg,
            inv,
            exp,
            log,
            trace: vec![0; q],
            chi: vec![Complex64::new(1.0, 0.0); q],
        };
        for x in 0..q as u8 {
            // Tr(x) = x + x^p + ... + x^{p^{m-1}}
            let mut t = 0u8;
            let mut frob = x;
            for _ in 0..m {
                t = ctx.add(t, frob);
                frob = ctx.pow(frob, p as u64);
            }
            ctx.trace[x as usize] = t;
            let angle = 2.0 * PI * t as f64 / p as f64;
            ctx.chi[x as usize] = Complex64::from_polar(1.0, angle);
        }
        Ok(ctx)
    }

    #[inline]
    pub fn add(&self, x: FieldElem, y: FieldElem) -> FieldElem {
        self.add[x as usize * self.q + y as usize]
    }

    #[inline]
    pub fn sub(&self, x: FieldElem, y: FieldElem) -> FieldElem {
        self.add(x, self.neg[y as usize])
    }

    #[inline]
    pub fn mul(&self, x: FieldElem, y: FieldElem) -> FieldElem {
        self.mul[x as usize * self.q + y as usize]
    }

    #[inline]
    pub fn neg(&self, x: FieldElem) -> FieldElem {
        self.neg[x as usize]
    }

    pub fn inv(&self, x: FieldElem) -> Result<FieldElem> {
        if x == 0 {
            Err(Error::InverseOfZero)
        } else {
            Ok(self.inv[x as usize])
        }
    }

    /// inverse without the zero check; caller guarantees `x != 0`
    #[inline]
    pub fn inv_nz(&self, x: FieldElem) -> FieldElem {
        debug_assert!(x != 0);
        self.inv[x as usize]
    }

    pub fn pow(&self, x: FieldElem, mut e: u64) -> FieldElem {
        let mut base = x;
        let mut acc = 1u8;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn field_arith(&self, op: FieldOp, x: FieldElem, y: Option<FieldElem>) -> Result<FieldElem> {
        let need_y = || y.ok_or_else(|| Error::Invalid("binary operation needs two operands".into()));
        if x as usize >= self.q || y.is_some_and(|v| v as usize >= self.q) {
            return Err(Error::OutOfRange { index: x.max(y.unwrap_or(0)) as usize, size: self.q });
        }
        match op {
            FieldOp::Add => Ok(self.add(x, need_y()?)),
            FieldOp::Mul => Ok(self.mul(x, need_y()?)),
            FieldOp::Neg => Ok(self.neg(x)),
            FieldOp::Inv => self.inv(x),
        }
    }

    /// absolute trace, an element of the prime subfield
    pub fn trace(&self, x: FieldElem) -> FieldElem {
        self.trace[x as usize]
    }

    /// e^{2 pi i Tr(x) / p}
    pub fn character(&self, x: FieldElem) -> Complex64 {
        self.chi[x as usize]
    }

    pub fn character_table(&self) -> &[Complex64] {
        &self.chi
    }

    pub fn primitive_element(&self) -> FieldElem {
        self.exp[1.min(self.exp.len() - 1)]
    }

    /// discrete log to the primitive element base; `None` for zero
    pub fn log(&self, x: FieldElem) -> Option<usize> {
        let l = self.log[x as usize];
        (l != u32::MAX).then_some(l as usize)
    }

    pub fn exp(&self, k: usize) -> FieldElem {
        self.exp[k % (self.q - 1)]
    }

    /// the k-th multiplicative character x -> e^{2 pi i k log(x) / (q-1)}; zero at x = 0
    pub fn mult_character(&self, k: usize, x: FieldElem) -> Complex64 {
        match self.log(x) {
            None => Complex64::new(0.0, 0.0),
            Some(l) => {
                let angle = 2.0 * PI * ((k * l) % (self.q - 1)) as f64 / (self.q - 1) as f64;
                Complex64::from_polar(1.0, angle)
            }
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElem> {
        0..self.q as u8
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f4_omega_squared() {
        let f = FieldCtx::new(4).unwrap();
        assert_eq!(f.mul(2, 2), 3);
        assert_eq!(f.mul(2, 3), 1);
    }

    #[test]
    fn f5_inverse_of_two() {
        let f = FieldCtx::new(5).unwrap();
        assert_eq!(f.inv(2).unwrap(), 3);
        assert!(matches!(f.inv(0), Err(Error::InverseOfZero)));
    }

    #[test]
    fn f4_traces() {
        let f = FieldCtx::new(4).unwrap();
        assert_eq!(f.trace(1), 0);
        assert_eq!(f.trace(2), 1);
        assert_eq!(f.trace(3), 1);
    }

    #[test]
    fn prime_trace_is_identity() {
        for q in [2, 3, 5, 7, 11, 13] {
            let f = FieldCtx::new(q).unwrap();
            for x in f.elements() {
                assert_eq!(f.trace(x), x);
            }
        }
    }

    #[test]
    fn character_values() {
        let f2 = FieldCtx::new(2).unwrap();
        assert!((f2.character(1) - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let f3 = FieldCtx::new(3).unwrap();
        assert!((f3.character(1) - Complex64::new(-0.5, 0.75f64.sqrt())).norm() < 1e-15);
    }

    #[test]
    fn reducible_modulus_rejected() {
        // x^2 + 1 = (x+1)^2 over F_2
        assert!(matches!(FieldCtx::with_modulus(2, vec![1, 0, 1]), Err(Error::ReducibleModulus(_))));
        // x^4 + x^2 + 1 = (x^2+x+1)^2 over F_2
        assert!(FieldCtx::with_modulus(2, vec![1, 0, 1, 0, 1]).is_err());
        assert!(FieldCtx::new(6).is_err());
    }

    #[test]
    fn axioms_and_character_laws_all_fields() {
        for q in SUPPORTED_Q {
            let f = FieldCtx::new(q).unwrap();
            for x in f.elements() {
                assert_eq!(f.mul(1, x), x);
                assert_eq!(f.add(x, f.neg(x)), 0);
                if x != 0 {
                    assert_eq!(f.mul(x, f.inv(x).unwrap()), 1);
                }
                assert_eq!(f.trace(f.pow(x, f.p as u64)), f.trace(x));
                for y in f.elements() {
                    assert_eq!(f.mul(x, y), f.mul(y, x));
                    assert_eq!(f.trace(f.add(x, y)), f.add(f.trace(x), f.trace(y)));
                    let lhs = f.character(f.add(x, y));
                    assert!((lhs - f.character(x) * f.character(y)).norm() < 1e-12);
                    for z in f.elements() {
                        assert_eq!(f.mul(f.mul(x, y), z), f.mul(x, f.mul(y, z)));
                        assert_eq!(f.mul(x, f.add(y, z)), f.add(f.mul(x, y), f.mul(x, z)));
                    }
                }
                let sum: Complex64 = f.elements().map(|y| f.character(f.mul(x, y))).sum();
                let want = if x == 0 { q as f64 } else { 0.0 };
                assert!((sum - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
            assert_eq!(f.exp.len(), q - 1);
        }
    }

    #[test]
    fn multiplicative_characters_are_homomorphisms() {
        let f = FieldCtx::new(9).unwrap();
        for k in 0..8 {
            for x in 1..9u8 {
                for y in 1..9u8 {
                    let lhs = f.mult_character(k, f.mul(x, y));
                    let rhs = f.mult_character(k, x) * f.mult_character(k, y);
                    assert!((lhs - rhs).norm() < 1e-12);
                }
            }
        }
    }
}
