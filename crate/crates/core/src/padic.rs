//! Arithmetic in `O_E` for a two-step tower `Q_p ⊂ E_0 ⊂ E`, with `E_0`
//! unramified of degree `f` and `E / E_0` totally ramified of degree `e`.
//!
//! An element is stored by its `f·e` coordinates on the basis `u^j π^i`
//! (row-major in `(i, j)`), each reduced modulo the base modulus `p^K`.
//! `K = ceil(N/e) + G` carries `G` guard digits beyond the working
//! precision `N`, so the storage capacity is `e·K` ϖ-adic digits.
//!
//! Every element tracks its own absolute precision. For `x = Σ c_i π^i`
//! with `c_i ∈ O_{E_0}` we have `val_ϖ(x) = min_i (e·val_p(c_i) + i)`, so
//! valuations and reductions modulo `ϖ^n` are coordinatewise.

use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modint::{ModRing, MAX_MODULUS_BITS};

/// Default largest series truncation the guard digits are sized for.
pub const DEFAULT_M_MAX: usize = 64;

/// A coefficient of the Eisenstein polynomial: a plain integer or an
/// element of `O_{E_0}` given by its `f` coordinates in `u`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EisCoeff {
    Int(DecInt),
    Unram(Vec<DecInt>),
}

/// Integer that serializes as a decimal string and accepts either a string
/// or a JSON number on input.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DecInt(pub BigInt);

impl Serialize for DecInt {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for DecInt {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            S(String),
            I(i64),
        }
        match Raw::deserialize(d)? {
            Raw::S(s) => s
                .trim()
                .parse::<BigInt>()
                .map(DecInt)
                .map_err(|_| serde::de::Error::custom(format!("not a decimal integer: {s:?}"))),
            Raw::I(i) => Ok(DecInt(BigInt::from(i))),
        }
    }
}

impl From<i64> for DecInt {
    fn from(v: i64) -> Self {
        DecInt(BigInt::from(v))
    }
}

/// Serializable description of a field; validated by [`PadicField::new`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDesc {
    pub p: u64,
    pub f: usize,
    pub e: usize,
    /// Monic `m(u)`, coefficients from degree 0 to `f`. Ignored when `f = 1`.
    #[serde(default)]
    pub unram_poly: Vec<DecInt>,
    /// Monic Eisenstein `E(π)`, coefficients from degree 0 to `e`.
    pub eis_poly: Vec<EisCoeff>,
    #[serde(rename = "N")]
    pub n: u32,
    /// Largest series truncation in use; sizes the guard digits.
    #[serde(rename = "M_max", default, skip_serializing_if = "Option::is_none")]
    pub m_max: Option<usize>,
    /// Explicit guard digit count, overriding the `M_max` rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<u32>,
}

impl FieldDesc {
    /// `Q_p` with uniformizer `p`.
    pub fn qp(p: u64, n: u32) -> Self {
        FieldDesc {
            p,
            f: 1,
            e: 1,
            unram_poly: vec![],
            eis_poly: vec![EisCoeff::Int(DecInt(-BigInt::from(p))), EisCoeff::Int(1.into())],
            n,
            m_max: None,
            guard: None,
        }
    }

    /// Unramified extension of degree `f` defined by `unram_poly`.
    pub fn unramified(p: u64, unram_poly: &[i64], n: u32) -> Self {
        let mut d = Self::qp(p, n);
        d.f = unram_poly.len().saturating_sub(1);
        d.unram_poly = unram_poly.iter().map(|&c| c.into()).collect();
        d
    }

    /// Totally ramified extension of `Q_p` defined by an integer Eisenstein
    /// polynomial.
    pub fn ramified(p: u64, eis_poly: &[i64], n: u32) -> Self {
        let mut d = Self::qp(p, n);
        d.e = eis_poly.len().saturating_sub(1);
        d.eis_poly = eis_poly.iter().map(|&c| EisCoeff::Int(c.into())).collect();
        d
    }

    pub fn with_m_max(mut self, m: usize) -> Self {
        self.m_max = Some(m);
        self
    }

    pub fn with_guard(mut self, g: u32) -> Self {
        self.guard = Some(g);
        self
    }
}

/// A validated field descriptor together with precomputed arithmetic data.
#[derive(Clone, Debug)]
pub struct PadicField {
    desc: FieldDesc,
    p: u64,
    f: usize,
    e: usize,
    n: u32,
    guard: u32,
    k: u32,
    ring: ModRing,
    ppow: Vec<u128>,
    /// Low coefficients `m_0..m_{f-1}` of the monic unramified polynomial.
    unram: Vec<u128>,
    /// Low coefficients `a_0..a_{e-1}` of the Eisenstein polynomial.
    eis: Vec<Vec<u128>>,
    pi: Vec<u128>,
    p_over_pi: Vec<u128>,
}

impl PartialEq for PadicField {
    fn eq(&self, other: &Self) -> bool {
        self.desc == other.desc && self.k == other.k
    }
}

impl Eq for PadicField {}

pub(crate) fn vp_u128(mut c: u128, p: u64) -> Option<u32> {
    if c == 0 {
        return None;
    }
    if p == 2 {
        return Some(c.trailing_zeros());
    }
    let p = p as u128;
    let mut v = 0;
    while c.is_multiple_of(p) {
        c /= p;
        v += 1;
    }
    Some(v)
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

// Polynomials over F_p, low degree first, no trailing zeros.
mod fp_poly {
    pub fn trim(a: &mut Vec<u64>) {
        while a.last() == Some(&0) {
            a.pop();
        }
    }

    fn mulmod(a: u64, b: u64, p: u64) -> u64 {
        ((a as u128 * b as u128) % p as u128) as u64
    }

    fn inv(a: u64, p: u64) -> u64 {
        let mut acc = 1u64;
        let (mut b, mut e) = (a % p, p - 2);
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b, p);
            }
            b = mulmod(b, b, p);
            e >>= 1;
        }
        acc
    }

    pub fn rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
        let mut r = a.to_vec();
        trim(&mut r);
        let dm = m.len() - 1;
        let lead_inv = inv(m[dm], p);
        while r.len() > dm {
            let d = r.len() - 1;
            let c = mulmod(r[d], lead_inv, p);
            for (i, &mi) in m.iter().enumerate() {
                let idx = d - dm + i;
                r[idx] = (r[idx] + p - mulmod(c, mi, p)) % p;
            }
            trim(&mut r);
        }
        r
    }

    pub fn mul_mod(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
        if a.is_empty() || b.is_empty() {
            return vec![];
        }
        let mut t = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                t[i + j] = (t[i + j] + mulmod(x, y, p)) % p;
            }
        }
        rem(&t, m, p)
    }

    pub fn pow_mod(a: &[u64], mut e: u64, m: &[u64], p: u64) -> Vec<u64> {
        let mut acc = vec![1u64];
        let mut b = rem(a, m, p);
        while e > 0 {
            if e & 1 == 1 {
                acc = mul_mod(&acc, &b, m, p);
            }
            b = mul_mod(&b, &b, m, p);
            e >>= 1;
        }
        acc
    }

    pub fn gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        trim(&mut a);
        trim(&mut b);
        while !b.is_empty() {
            let r = rem(&a, &b, p);
            a = b;
            b = r;
        }
        a
    }

    /// Ben-Or irreducibility test for a monic polynomial of degree >= 1.
    pub fn is_irreducible(m: &[u64], p: u64) -> bool {
        let f = m.len() - 1;
        let x = vec![0u64, 1];
        let mut h = rem(&x, m, p);
        for _ in 1..=f / 2 {
            h = pow_mod(&h, p, m, p);
            let mut d = h.clone();
            d.resize(d.len().max(2), 0);
            d[1] = (d[1] + p - 1) % p;
            trim(&mut d);
            let g = gcd(m, &d, p);
            if g.len() > 1 {
                return false;
            }
        }
        true
    }
}

fn bigint_vp(x: &BigInt, p: u64) -> Option<u32> {
    if x.is_zero() {
        return None;
    }
    let pb = BigInt::from(p);
    let mut v = 0;
    let mut y = x.clone();
    while (&y % &pb).is_zero() {
        y /= &pb;
        v += 1;
    }
    Some(v)
}

impl PadicField {
    pub fn new(desc: &FieldDesc) -> Result<Arc<PadicField>> {
        let (p, f, e, n) = (desc.p, desc.f, desc.e, desc.n);
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if p >= 1 << 32 {
            return Err(Error::InvalidField("p must be below 2^32".into()));
        }
        if f == 0 || e == 0 || n == 0 {
            return Err(Error::InvalidField("f, e and N must be at least 1".into()));
        }
        let m_max = desc.m_max.unwrap_or(DEFAULT_M_MAX);
        let guard = desc
            .guard
            .unwrap_or_else(|| 2 + (m_max as u64).div_ceil(p - 1) as u32);
        let k = n.div_ceil(e as u32) + guard;
        let modulus = (0..k).try_fold(1u128, |acc, _| {
            acc.checked_mul(p as u128).filter(|m| m >> MAX_MODULUS_BITS == 0)
        });
        let modulus = modulus.ok_or_else(|| {
            Error::InvalidField(format!(
                "p^{k} exceeds {MAX_MODULUS_BITS} bits; lower N or the guard digits"
            ))
        })?;
        let ring = ModRing::new(modulus).expect("prime power modulus");
        let mut ppow = vec![1u128];
        for _ in 0..k {
            ppow.push(ppow.last().unwrap() * p as u128);
        }
        let red = |x: &BigInt| -> u128 {
            let m = BigInt::from(modulus);
            x.mod_floor(&m).to_u128().unwrap()
        };

        // Unramified part.
        let unram = if f == 1 {
            vec![]
        } else {
            if desc.unram_poly.len() != f + 1 {
                return Err(Error::InvalidField(format!(
                    "unram_poly must have f + 1 = {} coefficients",
                    f + 1
                )));
            }
            if !desc.unram_poly[f].0.is_one() {
                return Err(Error::InvalidField("unram_poly must be monic".into()));
            }
            let pb = BigInt::from(p);
            let mbar: Vec<u64> = desc
                .unram_poly
                .iter()
                .map(|c| c.0.mod_floor(&pb).to_u64().unwrap())
                .collect();
            if !fp_poly::is_irreducible(&mbar, p) {
                return Err(Error::NotIrreducibleModP);
            }
            desc.unram_poly[..f].iter().map(|c| red(&c.0)).collect()
        };

        // Eisenstein part, as O_{E_0} coordinates (exact integers first).
        if desc.eis_poly.len() != e + 1 {
            return Err(Error::InvalidField(format!(
                "eis_poly must have e + 1 = {} coefficients",
                e + 1
            )));
        }
        let mut eis_exact: Vec<Vec<BigInt>> = Vec::with_capacity(e + 1);
        for c in &desc.eis_poly {
            let v = match c {
                EisCoeff::Int(i) => {
                    let mut v = vec![BigInt::zero(); f];
                    v[0] = i.0.clone();
                    v
                }
                EisCoeff::Unram(cs) => {
                    if cs.len() > f {
                        return Err(Error::InvalidField(
                            "eis_poly coefficient has more than f coordinates".into(),
                        ));
                    }
                    let mut v: Vec<BigInt> = cs.iter().map(|x| x.0.clone()).collect();
                    v.resize(f, BigInt::zero());
                    v
                }
            };
            eis_exact.push(v);
        }
        let lead = &eis_exact[e];
        if !(lead[0].is_one() && lead[1..].iter().all(Zero::is_zero)) {
            return Err(Error::NotEisenstein("polynomial is not monic".into()));
        }
        let min_vp = |v: &[BigInt]| v.iter().filter_map(|c| bigint_vp(c, p)).min();
        match min_vp(&eis_exact[0]) {
            Some(1) => {}
            _ => {
                return Err(Error::NotEisenstein(
                    "constant term must have p-adic valuation exactly 1".into(),
                ))
            }
        }
        for (i, c) in eis_exact.iter().enumerate().take(e).skip(1) {
            if let Some(v) = min_vp(c) {
                if v < 1 {
                    return Err(Error::NotEisenstein(format!(
                        "coefficient of degree {i} is not divisible by p"
                    )));
                }
            }
        }
        let eis: Vec<Vec<u128>> = eis_exact[..e]
            .iter()
            .map(|c| c.iter().map(red).collect())
            .collect();

        let mut field = PadicField {
            desc: desc.clone(),
            p,
            f,
            e,
            n,
            guard,
            k,
            ring,
            ppow,
            unram,
            eis,
            pi: vec![],
            p_over_pi: vec![],
        };
        let d = f * e;
        // Uniformizer: π itself when e > 1; -a_0 when e = 1.
        let mut pi = vec![0u128; d];
        if e > 1 {
            pi[f] = 1;
        } else {
            for j in 0..f {
                pi[j] = field.ring.neg(field.eis[0][j]);
            }
        }
        field.pi = pi;

        // u0 = a_0 / p (exact), then p/π = -(Σ_{i=1}^{e} a_i π^{i-1}) / u0.
        let pb = BigInt::from(p);
        let u0: Vec<u128> = eis_exact[0].iter().map(|c| red(&(c / &pb))).collect();
        let mut u0_elem = vec![0u128; d];
        u0_elem[..f].copy_from_slice(&u0);
        let u0_inv = field
            .inv_raw(&u0_elem)
            .ok_or_else(|| Error::NotEisenstein("a_0 / p is not a unit".into()))?;
        let mut s = vec![0u128; d];
        for i in 1..=e {
            for j in 0..f {
                let c = if i == e {
                    if j == 0 {
                        1
                    } else {
                        0
                    }
                } else {
                    field.eis[i][j]
                };
                s[(i - 1) * f + j] = c;
            }
        }
        let mut t = vec![0u128; d];
        field.mul_into(&s, &u0_inv, &mut t);
        for x in t.iter_mut() {
            *x = field.ring.neg(*x);
        }
        field.p_over_pi = t;
        Ok(Arc::new(field))
    }

    pub fn desc(&self) -> &FieldDesc {
        &self.desc
    }
    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn f(&self) -> usize {
        self.f
    }
    pub fn e(&self) -> usize {
        self.e
    }
    /// Working precision `N` in ϖ-adic digits.
    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn guard(&self) -> u32 {
        self.guard
    }
    /// Base-coefficient digits `K`; coordinates live modulo `p^K`.
    pub fn base_digits(&self) -> u32 {
        self.k
    }
    /// Storage capacity `e·K` in ϖ-adic digits.
    pub fn capacity(&self) -> u32 {
        self.e as u32 * self.k
    }
    /// Residue field size `q = p^f`.
    pub fn q(&self) -> u64 {
        self.p.pow(self.f as u32)
    }
    /// Number of coordinates `f·e`.
    pub fn dim(&self) -> usize {
        self.f * self.e
    }
    pub(crate) fn ring(&self) -> &ModRing {
        &self.ring
    }

    // ---- raw coordinate arithmetic ---------------------------------------

    pub(crate) fn add_into(&self, a: &[u128], b: &[u128], out: &mut [u128]) {
        for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
            *o = self.ring.add(x, y);
        }
    }

    pub(crate) fn add_assign(&self, acc: &mut [u128], b: &[u128]) {
        for (o, &y) in acc.iter_mut().zip(b) {
            *o = self.ring.add(*o, y);
        }
    }

    pub(crate) fn sub_assign(&self, acc: &mut [u128], b: &[u128]) {
        for (o, &y) in acc.iter_mut().zip(b) {
            *o = self.ring.sub(*o, y);
        }
    }

    fn e0_mul(&self, a: &[u128], b: &[u128], out: &mut [u128]) {
        let f = self.f;
        if f == 1 {
            out[0] = self.ring.mul(a[0], b[0]);
            return;
        }
        let mut t = vec![0u128; 2 * f - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                t[i + j] = self.ring.add(t[i + j], self.ring.mul(x, y));
            }
        }
        for deg in (f..2 * f - 1).rev() {
            let c = t[deg];
            if c == 0 {
                continue;
            }
            for (j, &mj) in self.unram.iter().enumerate() {
                let idx = deg - f + j;
                t[idx] = self.ring.sub(t[idx], self.ring.mul(c, mj));
            }
        }
        out.copy_from_slice(&t[..f]);
    }

    /// `out = a · b` on raw coordinates.
    pub(crate) fn mul_into(&self, a: &[u128], b: &[u128], out: &mut [u128]) {
        if self.f == 1 && self.e == 1 {
            out[0] = self.ring.mul(a[0], b[0]);
            return;
        }
        let (f, e) = (self.f, self.e);
        let mut t = vec![0u128; (2 * e - 1) * f];
        let mut prod = vec![0u128; f];
        for i1 in 0..e {
            let x = &a[i1 * f..(i1 + 1) * f];
            if x.iter().all(|&c| c == 0) {
                continue;
            }
            for i2 in 0..e {
                let y = &b[i2 * f..(i2 + 1) * f];
                self.e0_mul(x, y, &mut prod);
                let dst = &mut t[(i1 + i2) * f..(i1 + i2 + 1) * f];
                for (d, &v) in dst.iter_mut().zip(&prod) {
                    *d = self.ring.add(*d, v);
                }
            }
        }
        for deg in (e..2 * e - 1).rev() {
            let c: Vec<u128> = t[deg * f..(deg + 1) * f].to_vec();
            if c.iter().all(|&v| v == 0) {
                continue;
            }
            for (i, ai) in self.eis.iter().enumerate() {
                self.e0_mul(&c, ai, &mut prod);
                let idx = deg - e + i;
                let dst = &mut t[idx * f..(idx + 1) * f];
                for (d, &v) in dst.iter_mut().zip(&prod) {
                    *d = self.ring.sub(*d, v);
                }
            }
        }
        out.copy_from_slice(&t[..e * f]);
    }

    /// `acc += a · b` on raw coordinates.
    #[inline]
    pub(crate) fn mul_acc(&self, acc: &mut [u128], a: &[u128], b: &[u128]) {
        if self.f == 1 && self.e == 1 {
            acc[0] = self.ring.add(acc[0], self.ring.mul(a[0], b[0]));
            return;
        }
        let mut t = vec![0u128; acc.len()];
        self.mul_into(a, b, &mut t);
        self.add_assign(acc, &t);
    }

    pub(crate) fn is_zero_raw(a: &[u128]) -> bool {
        a.iter().all(|&c| c == 0)
    }

    /// Lower bound on `val_ϖ` of a raw element; `None` when all coordinates
    /// vanish.
    pub(crate) fn val_raw(&self, a: &[u128]) -> Option<u32> {
        let mut best: Option<u32> = None;
        for i in 0..self.e {
            let vp = a[i * self.f..(i + 1) * self.f]
                .iter()
                .filter_map(|&c| vp_u128(c, self.p))
                .min();
            if let Some(v) = vp {
                let w = self.e as u32 * v + i as u32;
                best = Some(best.map_or(w, |b| b.min(w)));
            }
        }
        best
    }

    /// Reduces raw coordinates modulo `ϖ^prec` in place (canonical form).
    pub(crate) fn truncate_raw(&self, a: &mut [u128], prec: u32) {
        let e = self.e as u32;
        for i in 0..self.e {
            let digits = if prec > i as u32 { (prec - i as u32).div_ceil(e) } else { 0 };
            let digits = digits.min(self.k) as usize;
            let m = self.ppow[digits];
            for c in a[i * self.f..(i + 1) * self.f].iter_mut() {
                *c %= m;
            }
        }
    }

    /// Multiplicative inverse of a unit given in raw coordinates.
    pub(crate) fn inv_raw(&self, a: &[u128]) -> Option<Vec<u128>> {
        if self.val_raw(a) != Some(0) {
            return None;
        }
        let d = self.dim();
        if d == 1 {
            return self.ring.inv(a[0], self.p).map(|x| vec![x]);
        }
        // x^(q-2) inverts modulo ϖ, then Newton: y <- y (2 - x y).
        let q = self.q() as u128;
        let mut y = self.pow_raw(a, q - 2);
        let mut two = vec![0u128; d];
        two[0] = self.ring.reduce(2);
        let mut t = vec![0u128; d];
        let mut s = vec![0u128; d];
        let mut iters = 0;
        loop {
            self.mul_into(a, &y, &mut t);
            if t[0] == 1 && t[1..].iter().all(|&c| c == 0) {
                return Some(y);
            }
            iters += 1;
            if iters > 10 {
                return None;
            }
            for ((o, &x), &z) in s.iter_mut().zip(&two).zip(&t) {
                *o = self.ring.sub(x, z);
            }
            let mut ny = vec![0u128; d];
            self.mul_into(&y, &s, &mut ny);
            y = ny;
        }
    }

    pub(crate) fn pow_raw(&self, a: &[u128], mut e: u128) -> Vec<u128> {
        let d = self.dim();
        let mut acc = vec![0u128; d];
        acc[0] = 1;
        let mut b = a.to_vec();
        let mut t = vec![0u128; d];
        while e > 0 {
            if e & 1 == 1 {
                self.mul_into(&acc, &b, &mut t);
                acc.copy_from_slice(&t);
            }
            self.mul_into(&b, &b, &mut t);
            b.copy_from_slice(&t);
            e >>= 1;
        }
        acc
    }

    /// Divides by `ϖ` exactly; requires the element to lie in `𝔪_E` as stored.
    pub(crate) fn div_pi_raw(&self, a: &[u128]) -> Option<Vec<u128>> {
        let (f, e) = (self.f, self.e);
        let p = self.p as u128;
        if a[..f].iter().any(|&c| c % p != 0) {
            return None;
        }
        let d = self.dim();
        let mut c0 = vec![0u128; d];
        for j in 0..f {
            c0[j] = a[j] / p;
        }
        let mut out = vec![0u128; d];
        self.mul_into(&c0, &self.p_over_pi, &mut out);
        if e > 1 {
            for i in 1..e {
                for j in 0..f {
                    let idx = (i - 1) * f + j;
                    out[idx] = self.ring.add(out[idx], a[i * f + j]);
                }
            }
        }
        Some(out)
    }

    /// Reduces an arbitrary integer into the base ring.
    pub(crate) fn reduce_bigint(&self, x: &BigInt) -> u128 {
        let m = BigInt::from(self.ring.modulus());
        x.mod_floor(&m).to_u128().unwrap()
    }

    // ---- element constructors --------------------------------------------

    pub fn zero(self: &Arc<Self>) -> PadicElem {
        PadicElem { field: self.clone(), coords: vec![0; self.dim()], prec: self.capacity() }
    }

    pub fn one(self: &Arc<Self>) -> PadicElem {
        self.from_i64(1)
    }

    pub fn from_i64(self: &Arc<Self>, v: i64) -> PadicElem {
        self.from_bigint(&BigInt::from(v))
    }

    pub fn from_bigint(self: &Arc<Self>, v: &BigInt) -> PadicElem {
        let mut coords = vec![0; self.dim()];
        coords[0] = self.reduce_bigint(v);
        PadicElem { field: self.clone(), coords, prec: self.capacity() }
    }

    /// Element from its `f·e` integer coordinates (row-major in `(i, j)`).
    pub fn from_coords(self: &Arc<Self>, coords: &[BigInt], prec: u32) -> Result<PadicElem> {
        if coords.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                coords.len()
            )));
        }
        let mut c: Vec<u128> = coords.iter().map(|x| self.reduce_bigint(x)).collect();
        let prec = prec.min(self.capacity());
        self.truncate_raw(&mut c, prec);
        Ok(PadicElem { field: self.clone(), coords: c, prec })
    }

    pub(crate) fn elem_raw(self: &Arc<Self>, coords: Vec<u128>, prec: u32) -> PadicElem {
        PadicElem { field: self.clone(), coords, prec: prec.min(self.capacity()) }
    }

    /// The uniformizer ϖ (`π` when `e > 1`, `-a_0` when `e = 1`).
    pub fn uniformizer(self: &Arc<Self>) -> PadicElem {
        self.elem_raw(self.pi.clone(), self.capacity())
    }

    /// The generator `u` of `O_{E_0}` (equals 0 when `f = 1`).
    pub fn unram_generator(self: &Arc<Self>) -> PadicElem {
        let mut c = vec![0; self.dim()];
        if self.f > 1 {
            c[1] = 1;
        }
        self.elem_raw(c, self.capacity())
    }
}

/// A ϖ-adic valuation: exact, or only bounded below by the precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum Valuation {
    Exact(u32),
    AtLeast(u32),
}

impl Valuation {
    /// The certified lower bound.
    pub fn lower(self) -> u32 {
        match self {
            Valuation::Exact(v) | Valuation::AtLeast(v) => v,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Valuation::Exact(_))
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Exact(v) => write!(f, "{v}"),
            Valuation::AtLeast(v) => write!(f, ">={v}"),
        }
    }
}

/// Element of `O_E` known modulo `ϖ^prec`.
#[derive(Clone, Debug)]
pub struct PadicElem {
    field: Arc<PadicField>,
    coords: Vec<u128>,
    prec: u32,
}

fn same_field(a: &Arc<PadicField>, b: &Arc<PadicField>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl PadicElem {
    pub fn field(&self) -> &Arc<PadicField> {
        &self.field
    }

    /// Guaranteed absolute precision in ϖ-adic digits (at most the storage
    /// capacity; compare against [`PadicField::n`] for the working precision).
    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub(crate) fn raw(&self) -> &[u128] {
        &self.coords
    }

    pub(crate) fn into_raw(self) -> Vec<u128> {
        self.coords
    }

    /// Lowers the precision to `min(prec, self.prec)`.
    pub fn with_prec(&self, prec: u32) -> PadicElem {
        let prec = prec.min(self.prec);
        let mut c = self.coords.clone();
        self.field.truncate_raw(&mut c, prec);
        PadicElem { field: self.field.clone(), coords: c, prec }
    }

    fn check(&self, other: &PadicElem) -> Result<()> {
        if same_field(&self.field, &other.field) {
            Ok(())
        } else {
            Err(Error::FieldMismatch)
        }
    }

    pub fn valuation(&self) -> Valuation {
        match self.field.val_raw(&self.coords) {
            Some(v) if v < self.prec => Valuation::Exact(v),
            _ => Valuation::AtLeast(self.prec),
        }
    }

    /// `val_p = val_ϖ / e`.
    pub fn val_p(&self) -> (Ratio<i64>, bool) {
        let v = self.valuation();
        (Ratio::new(v.lower() as i64, self.field.e as i64), v.is_exact())
    }

    pub fn is_zero(&self) -> bool {
        !self.valuation().is_exact()
    }

    pub fn is_unit(&self) -> bool {
        self.valuation() == Valuation::Exact(0)
    }

    pub fn checked_add(&self, other: &PadicElem) -> Result<PadicElem> {
        self.check(other)?;
        let mut c = vec![0; self.coords.len()];
        self.field.add_into(&self.coords, &other.coords, &mut c);
        Ok(self.field.elem_raw(c, self.prec.min(other.prec)))
    }

    pub fn checked_sub(&self, other: &PadicElem) -> Result<PadicElem> {
        self.check(other)?;
        let mut c = self.coords.clone();
        self.field.sub_assign(&mut c, &other.coords);
        Ok(self.field.elem_raw(c, self.prec.min(other.prec)))
    }

    pub fn neg(&self) -> PadicElem {
        let c = self.coords.iter().map(|&x| self.field.ring.neg(x)).collect();
        self.field.elem_raw(c, self.prec)
    }

    /// Product; precision is `min(val x + prec y, val y + prec x)`, which is
    /// never below `min(prec x, prec y)`.
    pub fn checked_mul(&self, other: &PadicElem) -> Result<PadicElem> {
        self.check(other)?;
        let mut c = vec![0; self.coords.len()];
        self.field.mul_into(&self.coords, &other.coords, &mut c);
        let va = self.valuation().lower();
        let vb = other.valuation().lower();
        let prec = (va.saturating_add(other.prec)).min(vb.saturating_add(self.prec));
        Ok(self.field.elem_raw(c, prec))
    }

    pub fn pow(&self, e: u64) -> PadicElem {
        let mut acc = self.field.one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Inverse of a unit, via Newton iteration from the residue inverse.
    pub fn invert(&self) -> Result<PadicElem> {
        if !self.is_unit() {
            return Err(Error::NotAUnit);
        }
        let inv = self.field.inv_raw(&self.coords).ok_or(Error::NotAUnit)?;
        let mut out = self.field.elem_raw(inv, self.prec);
        self.field.truncate_raw(&mut out.coords, out.prec);
        Ok(out)
    }

    /// Reduction modulo `𝔪_E`: the `f` coordinates of the residue in
    /// `k_E = F_p[u]/(m̄(u))`.
    pub fn residue(&self) -> Vec<u64> {
        let p = self.field.p as u128;
        self.coords[..self.field.f].iter().map(|&c| (c % p) as u64).collect()
    }

    /// Exact division by `ϖ^k`.
    pub fn div_pi_pow(&self, k: u32) -> Result<PadicElem> {
        if k == 0 {
            return Ok(self.clone());
        }
        if self.valuation().lower() < k {
            return Err(if self.prec < k {
                Error::PrecisionExhausted(format!("cannot divide by ϖ^{k} at precision {}", self.prec))
            } else {
                Error::InvalidInput(format!("element is not divisible by ϖ^{k}"))
            });
        }
        let mut c = self.coords.clone();
        self.field.truncate_raw(&mut c, self.prec);
        for _ in 0..k {
            c = self.field.div_pi_raw(&c).expect("divisibility checked");
        }
        Ok(self.field.elem_raw(c, self.prec - k))
    }

    /// Exact division by `p^w`, coordinatewise; costs `e·w` digits.
    pub fn div_p_pow(&self, w: u32) -> Result<PadicElem> {
        if w == 0 {
            return Ok(self.clone());
        }
        let e = self.field.e as u32;
        if self.valuation().lower() < e * w {
            return Err(if self.prec < e * w {
                Error::PrecisionExhausted(format!("cannot divide by p^{w} at precision {}", self.prec))
            } else {
                Error::InvalidInput(format!("element is not divisible by p^{w}"))
            });
        }
        let m = self.field.ppow[w as usize];
        let c = self.reduced_coords().into_iter().map(|x| x / m).collect();
        Ok(self.field.elem_raw(c, self.prec - e * w))
    }

    /// Exact quotient `self / other` for `val(other) <= val(self)`.
    pub fn div_exact(&self, other: &PadicElem) -> Result<PadicElem> {
        self.check(other)?;
        let w = match other.valuation() {
            Valuation::Exact(w) => w,
            Valuation::AtLeast(_) => return Err(Error::NotAUnit),
        };
        let num = self.div_pi_pow(w)?;
        let den = other.div_pi_pow(w)?;
        Ok(&num * &den.invert()?)
    }

    /// Canonical coordinates reduced modulo `ϖ^prec`.
    pub fn reduced_coords(&self) -> Vec<u128> {
        let mut c = self.coords.clone();
        self.field.truncate_raw(&mut c, self.prec);
        c
    }

    /// Equality up to the common precision: `val(x - y) >= min(prec x, prec y)`.
    pub fn eq_at_prec(&self, other: &PadicElem) -> bool {
        match self.checked_sub(other) {
            Ok(d) => d.is_zero(),
            Err(_) => false,
        }
    }

    /// Coordinates as signed integers of least absolute value modulo the
    /// precision-dependent modulus (for display).
    pub fn coords_bigint(&self) -> Vec<BigInt> {
        self.reduced_coords().into_iter().map(BigInt::from).collect()
    }

    /// Interprets the element as an integer in `(-p^K/2, p^K/2]` when it lies
    /// in the `u^0 π^0` coordinate only.
    pub fn to_i128_balanced(&self) -> Option<i128> {
        let c = self.reduced_coords();
        if c[1..].iter().any(|&x| x != 0) {
            return None;
        }
        let m = self.field.ring.modulus();
        let v = c[0];
        if v > m / 2 {
            Some(-((m - v) as i128))
        } else {
            Some(v as i128)
        }
    }
}

impl PartialEq for PadicElem {
    fn eq(&self, other: &Self) -> bool {
        same_field(&self.field, &other.field)
            && self.prec == other.prec
            && self.reduced_coords() == other.reduced_coords()
    }
}

impl fmt::Display for PadicElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.reduced_coords();
        if c.len() == 1 {
            write!(f, "{} + O(ϖ^{})", c[0], self.prec)
        } else {
            write!(f, "{:?} + O(ϖ^{})", c, self.prec)
        }
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $checked:ident) => {
        impl std::ops::$tr<&PadicElem> for &PadicElem {
            type Output = PadicElem;
            /// Panics if the operands belong to different fields.
            fn $m(self, rhs: &PadicElem) -> PadicElem {
                self.$checked(rhs).expect("field mismatch")
            }
        }
    };
}
binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);

/// Serialized element: canonical coordinates as decimal strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElemJson {
    pub coords: Vec<DecInt>,
    pub prec: u32,
}

impl PadicElem {
    pub fn to_json(&self) -> ElemJson {
        ElemJson {
            coords: self.coords_bigint().into_iter().map(DecInt).collect(),
            prec: self.prec,
        }
    }

    pub fn from_json(field: &Arc<PadicField>, j: &ElemJson) -> Result<PadicElem> {
        let c: Vec<BigInt> = j.coords.iter().map(|x| x.0.clone()).collect();
        field.from_coords(&c, j.prec)
    }
}

/// Signed integer helper for tests and generators.
pub fn bigint_from_u128_balanced(v: u128, m: u128) -> BigInt {
    if v > m / 2 {
        BigInt::from_biguint(Sign::Minus, (m - v).into())
    } else {
        BigInt::from(v)
    }
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn is<T: Send + Sync>() {}
    is::<PadicElem>();
    is::<PadicField>();
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q3(n: u32) -> Arc<PadicField> {
        PadicField::new(&FieldDesc::qp(3, n).with_guard(0)).unwrap()
    }

    fn sqrt3() -> Arc<PadicField> {
        PadicField::new(&FieldDesc::ramified(3, &[-3, 0, 1], 8)).unwrap()
    }

    fn q4() -> Arc<PadicField> {
        PadicField::new(&FieldDesc::unramified(2, &[1, 1, 1], 10)).unwrap()
    }

    #[test]
    fn field_examples() {
        let f = PadicField::new(&FieldDesc::qp(3, 8)).unwrap();
        assert_eq!(f.q(), 3);
        let f = sqrt3();
        assert_eq!((f.e(), f.q()), (2, 3));
        let f = q4();
        assert_eq!((f.f(), f.q()), (2, 4));
    }

    #[test]
    fn field_errors() {
        assert_eq!(PadicField::new(&FieldDesc::qp(9, 8)).unwrap_err(), Error::NotPrime(9));
        // u^2 + 1 = (u + 1)^2 mod 2.
        assert_eq!(
            PadicField::new(&FieldDesc::unramified(2, &[1, 0, 1], 8)).unwrap_err(),
            Error::NotIrreducibleModP
        );
        assert!(matches!(
            PadicField::new(&FieldDesc::ramified(3, &[-9, 0, 1], 8)),
            Err(Error::NotEisenstein(_))
        ));
        assert!(matches!(
            PadicField::new(&FieldDesc::ramified(3, &[3, 1, 1], 8)),
            Err(Error::NotEisenstein(_))
        ));
    }

    #[test]
    fn ring_examples() {
        let f = q3(4);
        assert_eq!((&f.from_i64(2) + &f.from_i64(2)), f.from_i64(4));
        let g = sqrt3();
        let pi = g.uniformizer();
        assert!((&pi * &pi).eq_at_prec(&g.from_i64(3)));
        assert_eq!((&f.from_i64(41) * &f.from_i64(2)), f.from_i64(1));
    }

    #[test]
    fn valuation_examples() {
        let f = q3(8);
        assert_eq!(f.from_i64(9).valuation(), Valuation::Exact(2));
        assert_eq!(f.zero().valuation(), Valuation::AtLeast(f.capacity()));
        let g = sqrt3();
        assert_eq!(g.from_i64(3).valuation(), Valuation::Exact(2));
        assert_eq!(g.uniformizer().valuation(), Valuation::Exact(1));
        let z = f.zero().with_prec(8);
        assert_eq!(z.valuation(), Valuation::AtLeast(8));
    }

    #[test]
    fn invert_examples() {
        let f = q3(4);
        assert_eq!(f.one().invert().unwrap(), f.one());
        assert_eq!(f.from_i64(2).invert().unwrap(), f.from_i64(41));
        assert_eq!(sqrt3().uniformizer().invert().unwrap_err(), Error::NotAUnit);
    }

    #[test]
    fn residue_examples() {
        let f = q3(8);
        assert_eq!(f.from_i64(4).residue(), vec![1]);
        assert_eq!(sqrt3().uniformizer().residue(), vec![0]);
        assert_eq!(q4().unram_generator().residue(), vec![0, 1]);
    }

    #[test]
    fn division_by_uniformizer() {
        let g = sqrt3();
        let pi = g.uniformizer();
        assert!(g.from_i64(3).div_pi_pow(1).unwrap().eq_at_prec(&pi));
        assert!(g.from_i64(9).div_pi_pow(3).unwrap().eq_at_prec(&pi));
        let x = g.from_i64(6);
        assert_eq!(x.div_exact(&g.from_i64(3)).unwrap(), g.from_i64(2).with_prec(x.prec() - 2));
    }

    #[test]
    fn mismatch_is_reported() {
        let a = q3(4).one();
        let b = sqrt3().one();
        assert_eq!(a.checked_add(&b).unwrap_err(), Error::FieldMismatch);
    }

    /// Valuation by repeated exact division by ϖ.
    fn val_by_division(x: &PadicElem) -> u32 {
        let mut y = x.clone();
        let mut v = 0;
        while y.prec() > 0 && !y.residue().iter().any(|&c| c != 0) {
            match y.div_pi_pow(1) {
                Ok(z) => {
                    y = z;
                    v += 1;
                }
                Err(_) => break,
            }
        }
        v
    }

    fn fields() -> Vec<Arc<PadicField>> {
        vec![
            PadicField::new(&FieldDesc::qp(3, 8)).unwrap(),
            sqrt3(),
            q4(),
            // Q_4(√2): Eisenstein over O_{E_0} with a u-coordinate.
            PadicField::new(&FieldDesc {
                eis_poly: vec![
                    EisCoeff::Unram(vec![(-2).into(), 0.into()]),
                    EisCoeff::Unram(vec![2.into(), 2.into()]),
                    EisCoeff::Int(1.into()),
                ],
                e: 2,
                ..FieldDesc::unramified(2, &[1, 1, 1], 8)
            })
            .unwrap(),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn valuation_properties(
            fi in 0usize..4,
            ca in proptest::collection::vec(any::<u64>(), 4),
            cb in proptest::collection::vec(any::<u64>(), 4),
            sa in 0u64..6,
            sb in 0u64..6,
        ) {
            let field = fields()[fi].clone();
            let mk = |c: &[u64], s: u64| {
                let c: Vec<BigInt> = c[..field.dim()].iter().map(|&v| BigInt::from(v)).collect();
                &field.from_coords(&c, field.capacity()).unwrap() * &field.uniformizer().pow(s)
            };
            let (x, y) = (mk(&ca, sa), mk(&cb, sb));
            let (vx, vy) = (x.valuation(), y.valuation());
            if let (Valuation::Exact(a), Valuation::Exact(b)) = (vx, vy) {
                let xy = &x * &y;
                if a + b < xy.prec() {
                    prop_assert_eq!(xy.valuation(), Valuation::Exact(a + b));
                }
                prop_assert!((&x + &y).valuation().lower() >= a.min(b).min((&x + &y).prec()));
                prop_assert_eq!(val_by_division(&x), a);
            }
            if x.is_unit() {
                let xi = x.invert().unwrap();
                prop_assert!((&x * &xi).eq_at_prec(&field.one()));
                prop_assert!((&xi * &x).eq_at_prec(&field.one()));
            }
        }
    }

    #[test]
    fn invert_many_units() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for field in fields() {
            let mut done = 0;
            while done < 10_000 / 4 {
                let c: Vec<BigInt> = (0..field.dim()).map(|_| BigInt::from(rng.gen::<u64>())).collect();
                let x = field.from_coords(&c, field.capacity()).unwrap();
                if !x.is_unit() {
                    continue;
                }
                let y = x.invert().unwrap();
                assert!((&x * &y).eq_at_prec(&field.one()));
                done += 1;
            }
        }
    }
}
