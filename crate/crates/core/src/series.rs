//! Truncated power series over `O_E`, optionally shifted by a power of `T`.
//!
//! A series stores `M` coefficients of `T^{shift}, …, T^{shift+M-1}` and is
//! known modulo `T^{shift+M}`. Each coefficient carries its own guaranteed
//! ϖ-adic precision; [`TruncSeries::prec`] reports the minimum, capped at
//! the working precision `N`.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{ElemJson, PadicElem, PadicField, Valuation};

/// Effective lengths at or below this use plain Horner composition.
const HORNER_MAX: usize = 8;

#[derive(Clone, Debug)]
pub struct TruncSeries {
    field: Arc<PadicField>,
    shift: i64,
    coeffs: Vec<u128>,
    precs: Vec<u32>,
}

pub(crate) fn vlow(field: &PadicField, c: &[u128], prec: u32) -> u32 {
    field.val_raw(c).map_or(prec, |v| v.min(prec))
}

fn prefix_min(v: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(v.len());
    let mut m = u32::MAX;
    for &x in v {
        m = m.min(x);
        out.push(m);
    }
    out
}

/// First `m` coefficients of the product of two flat coefficient arrays.
pub(crate) fn mul_raw(field: &PadicField, a: &[u128], b: &[u128], m: usize) -> Vec<u128> {
    let d = field.dim();
    let la = effective_len(a, d).min(m);
    let lb = effective_len(b, d).min(m);
    let mut out = vec![0u128; m * d];
    if d == 1 {
        let r = field.ring();
        for i in 0..la {
            let x = a[i];
            if x == 0 {
                continue;
            }
            let top = lb.min(m - i);
            let dst = &mut out[i..i + top];
            for (o, &y) in dst.iter_mut().zip(&b[..top]) {
                *o = r.add(*o, r.mul(x, y));
            }
        }
        return out;
    }
    let mut t = vec![0u128; d];
    for i in 0..la {
        let x = &a[i * d..(i + 1) * d];
        if PadicField::is_zero_raw(x) {
            continue;
        }
        for j in 0..lb.min(m - i) {
            let y = &b[j * d..(j + 1) * d];
            if PadicField::is_zero_raw(y) {
                continue;
            }
            field.mul_into(x, y, &mut t);
            field.add_assign(&mut out[(i + j) * d..(i + j + 1) * d], &t);
        }
    }
    out
}

fn effective_len(a: &[u128], d: usize) -> usize {
    let n = a.len() / d;
    (0..n).rev().find(|&k| !PadicField::is_zero_raw(&a[k * d..(k + 1) * d])).map_or(0, |k| k + 1)
}

/// `acc += s · x` for a scalar `s` and a flat coefficient array `x`.
pub(crate) fn axpy(field: &PadicField, acc: &mut [u128], s: &[u128], x: &[u128]) {
    let d = field.dim();
    if PadicField::is_zero_raw(s) {
        return;
    }
    if d == 1 {
        let r = field.ring();
        let s = s[0];
        for (o, &y) in acc.iter_mut().zip(x) {
            *o = r.add(*o, r.mul(s, y));
        }
        return;
    }
    let mut t = vec![0u128; d];
    for (o, y) in acc.chunks_mut(d).zip(x.chunks(d)) {
        if PadicField::is_zero_raw(y) {
            continue;
        }
        field.mul_into(s, y, &mut t);
        field.add_assign(o, &t);
    }
}

impl TruncSeries {
    pub(crate) fn from_parts(field: Arc<PadicField>, shift: i64, coeffs: Vec<u128>, precs: Vec<u32>) -> Self {
        let cap = field.capacity();
        let precs = precs.into_iter().map(|p| p.min(cap)).collect();
        TruncSeries { field, shift, coeffs, precs }
    }

    /// Series from explicit coefficients of `T^{shift+k}`.
    pub fn new(field: &Arc<PadicField>, shift: i64, coeffs: &[PadicElem]) -> Result<Self> {
        let d = field.dim();
        let mut c = Vec::with_capacity(coeffs.len() * d);
        let mut p = Vec::with_capacity(coeffs.len());
        for x in coeffs {
            if **x.field() != **field {
                return Err(Error::FieldMismatch);
            }
            c.extend_from_slice(&x.reduced_coords());
            p.push(x.prec());
        }
        Ok(Self::from_parts(field.clone(), shift, c, p))
    }

    /// Exact polynomial with integer coefficients, padded to order `m`.
    pub fn from_i64s(field: &Arc<PadicField>, coeffs: &[i64], m: usize) -> Self {
        let big: Vec<BigInt> = coeffs.iter().map(|&c| BigInt::from(c)).collect();
        Self::from_bigints(field, &big, m)
    }

    pub fn from_bigints(field: &Arc<PadicField>, coeffs: &[BigInt], m: usize) -> Self {
        let d = field.dim();
        let mut c = vec![0u128; m * d];
        for (k, x) in coeffs.iter().enumerate().take(m) {
            c[k * d] = field.reduce_bigint(x);
        }
        Self::from_parts(field.clone(), 0, c, vec![field.capacity(); m])
    }

    pub fn zero(field: &Arc<PadicField>, m: usize) -> Self {
        Self::from_i64s(field, &[], m)
    }

    pub fn one(field: &Arc<PadicField>, m: usize) -> Self {
        Self::from_i64s(field, &[1], m)
    }

    /// The variable `T`.
    pub fn var(field: &Arc<PadicField>, m: usize) -> Self {
        Self::from_i64s(field, &[0, 1], m)
    }

    /// `x · T^k` as a power series of order `m`.
    pub fn monomial(x: &PadicElem, k: usize, m: usize) -> Self {
        let field = x.field();
        let d = field.dim();
        let mut c = vec![0u128; m * d];
        let mut p = vec![field.capacity(); m];
        if k < m {
            c[k * d..(k + 1) * d].copy_from_slice(&x.reduced_coords());
            p[k] = x.prec();
        }
        Self::from_parts(field.clone(), 0, c, p)
    }

    pub fn field(&self) -> &Arc<PadicField> {
        &self.field
    }

    pub fn shift(&self) -> i64 {
        self.shift
    }

    /// Truncation order `M`: the series is known modulo `T^{shift+M}`.
    pub fn order(&self) -> usize {
        self.precs.len()
    }

    /// Coefficient of `T^{shift+k}`.
    pub fn coeff(&self, k: usize) -> PadicElem {
        let d = self.field.dim();
        self.field.elem_raw(self.coeffs[k * d..(k + 1) * d].to_vec(), self.precs[k])
    }

    pub fn coeffs(&self) -> Vec<PadicElem> {
        (0..self.order()).map(|k| self.coeff(k)).collect()
    }

    pub(crate) fn raw(&self) -> &[u128] {
        &self.coeffs
    }

    pub(crate) fn raw_coeff(&self, k: usize) -> &[u128] {
        let d = self.field.dim();
        &self.coeffs[k * d..(k + 1) * d]
    }

    /// Per-coefficient guaranteed precision (not capped at `N`).
    pub fn precs(&self) -> &[u32] {
        &self.precs
    }

    /// Guaranteed precision of every coefficient, capped at `N`.
    pub fn prec(&self) -> u32 {
        self.precs.iter().copied().min().unwrap_or(u32::MAX).min(self.field.n())
    }

    /// Length of the longest prefix whose coefficients are all known to at
    /// least `min_prec` digits.
    pub fn certified_prefix(&self, min_prec: u32) -> usize {
        self.precs.iter().position(|&p| p < min_prec).unwrap_or(self.order())
    }

    /// Replaces the coefficient of `T^{shift+k}`.
    pub fn set_coeff(&mut self, k: usize, x: &PadicElem) {
        let d = self.field.dim();
        self.coeffs[k * d..(k + 1) * d].copy_from_slice(&x.reduced_coords());
        self.precs[k] = x.prec().min(self.field.capacity());
    }

    /// Keeps the first `m` coefficients.
    /// Reduces every coefficient modulo `ϖ^{prec}`.
    pub(crate) fn canonicalize(&mut self) {
        let d = self.field.dim();
        for (k, &p) in self.precs.iter().enumerate() {
            self.field.truncate_raw(&mut self.coeffs[k * d..(k + 1) * d], p);
        }
    }

    /// The same coefficients with shift 0, i.e. `T^{-shift}·self`.
    pub fn with_shift_zero(&self) -> Self {
        Self { shift: 0, ..self.clone() }
    }

    pub fn truncate(&self, m: usize) -> Self {
        let m = m.min(self.order());
        let d = self.field.dim();
        Self::from_parts(self.field.clone(), self.shift, self.coeffs[..m * d].to_vec(), self.precs[..m].to_vec())
    }

    /// Lowers every coefficient precision to at most `prec`.
    pub fn with_prec(&self, prec: u32) -> Self {
        let mut s = self.clone();
        for p in s.precs.iter_mut() {
            *p = (*p).min(prec);
        }
        s
    }

    /// Valuation of the whole series (minimum over coefficients).
    pub fn valuation(&self) -> Valuation {
        let d = self.field.dim();
        let mut exact = u32::MAX;
        let mut known = u32::MAX;
        for k in 0..self.order() {
            let p = self.precs[k];
            known = known.min(p);
            if let Some(v) = self.field.val_raw(&self.coeffs[k * d..(k + 1) * d]) {
                if v < p {
                    exact = exact.min(v);
                }
            }
        }
        if exact < known {
            Valuation::Exact(exact)
        } else {
            Valuation::AtLeast(known)
        }
    }

    /// Index of the first coefficient whose valuation is certified to be
    /// below `threshold`.
    pub fn first_below(&self, threshold: u32) -> Option<usize> {
        (0..self.order()).find(|&k| {
            let v = self.field.val_raw(self.raw_coeff(k));
            matches!(v, Some(v) if v < threshold && v < self.precs[k])
        })
    }

    /// True when every coefficient vanishes at its precision.
    pub fn is_zero(&self) -> bool {
        !self.valuation().is_exact()
    }

    fn check(&self, other: &TruncSeries) -> Result<()> {
        if Arc::ptr_eq(&self.field, &other.field) || *self.field == *other.field {
            Ok(())
        } else {
            Err(Error::FieldMismatch)
        }
    }

    fn require_power_series(&self) -> Result<()> {
        if self.shift != 0 {
            return Err(Error::InvalidInput(format!(
                "operation needs a power series, got shift {}",
                self.shift
            )));
        }
        Ok(())
    }

    fn lin_comb(&self, other: &TruncSeries, negate: bool) -> Result<TruncSeries> {
        self.check(other)?;
        let d = self.field.dim();
        let cap = self.field.capacity();
        let shift = self.shift.min(other.shift);
        let end = (self.shift + self.order() as i64).min(other.shift + other.order() as i64);
        let m = (end - shift).max(0) as usize;
        let mut c = vec![0u128; m * d];
        let mut p = vec![cap; m];
        for (s, sign) in [(self, false), (other, negate)] {
            let off = (s.shift - shift) as usize;
            for k in 0..m.saturating_sub(off) {
                let dst = &mut c[(k + off) * d..(k + off + 1) * d];
                if sign {
                    self.field.sub_assign(dst, s.raw_coeff(k));
                } else {
                    self.field.add_assign(dst, s.raw_coeff(k));
                }
                p[k + off] = p[k + off].min(s.precs[k]);
            }
        }
        Ok(Self::from_parts(self.field.clone(), shift, c, p))
    }

    pub fn checked_add(&self, other: &TruncSeries) -> Result<TruncSeries> {
        self.lin_comb(other, false)
    }

    pub fn checked_sub(&self, other: &TruncSeries) -> Result<TruncSeries> {
        self.lin_comb(other, true)
    }

    pub fn neg(&self) -> TruncSeries {
        let r = self.field.ring();
        let c = self.coeffs.iter().map(|&x| r.neg(x)).collect();
        Self::from_parts(self.field.clone(), self.shift, c, self.precs.clone())
    }

    pub fn checked_mul(&self, other: &TruncSeries) -> Result<TruncSeries> {
        self.check(other)?;
        let m = self.order().min(other.order());
        let c = mul_raw(&self.field, &self.coeffs, &other.coeffs, m);
        let p = self.mul_precs(other, m);
        Ok(Self::from_parts(self.field.clone(), self.shift + other.shift, c, p).normalized())
    }

    /// Drops exactly-zero leading coefficients of a Laurent series until the
    /// shift reaches 0.
    pub fn normalized(mut self) -> Self {
        let d = self.field.dim();
        let cap = self.field.capacity();
        let mut drop = 0;
        while self.shift + (drop as i64) < 0
            && drop < self.order()
            && self.precs[drop] == cap
            && PadicField::is_zero_raw(&self.coeffs[drop * d..(drop + 1) * d])
        {
            drop += 1;
        }
        if drop > 0 {
            self.coeffs.drain(..drop * d);
            self.precs.drain(..drop);
            self.shift += drop as i64;
        }
        self
    }

    fn lows(&self) -> Vec<u32> {
        (0..self.order()).map(|k| vlow(&self.field, self.raw_coeff(k), self.precs[k])).collect()
    }

    fn mul_precs(&self, other: &TruncSeries, m: usize) -> Vec<u32> {
        let (va, vb) = (self.lows(), other.lows());
        let (pa, pb) = (&self.precs, &other.precs);
        (0..m)
            .map(|n| {
                (0..=n)
                    .map(|i| {
                        let j = n - i;
                        (pa[i].saturating_add(vb[j])).min(va[i].saturating_add(pb[j]))
                    })
                    .min()
                    .unwrap()
            })
            .collect()
    }

    /// Multiplies every coefficient by `x`.
    pub fn scale(&self, x: &PadicElem) -> Result<TruncSeries> {
        if **x.field() != *self.field {
            return Err(Error::FieldMismatch);
        }
        let d = self.field.dim();
        let mut c = vec![0u128; self.coeffs.len()];
        axpy(&self.field, &mut c, x.raw(), &self.coeffs);
        let vx = x.valuation().lower();
        let p = (0..self.order())
            .map(|k| {
                let vk = vlow(&self.field, &self.coeffs[k * d..(k + 1) * d], self.precs[k]);
                (vx.saturating_add(self.precs[k])).min(vk.saturating_add(x.prec()))
            })
            .collect();
        Ok(Self::from_parts(self.field.clone(), self.shift, c, p))
    }

    /// `f(g(T))`. Requires power series with `val(g(0)) >= 1`.
    ///
    /// Coefficient `j` of the result is guaranteed to
    /// `min_k(prec f_k + (k-j)^+·v, min_{i<=j} prec g_i, (M_f - j)·v)` where
    /// `v = val(g(0))`; the last term accounts for the unknown tail of `f`.
    pub fn compose(&self, g: &TruncSeries) -> Result<TruncSeries> {
        self.check(g)?;
        self.require_power_series()?;
        g.require_power_series()?;
        let v = compose_constant_val(g)?;
        let m = self.order().min(g.order());
        let c = compose_raw(&self.field, &self.coeffs, self.order(), &g.coeffs, m);
        let p = compose_precs(&self.precs, self.order(), &g.precs, v, m);
        Ok(Self::from_parts(self.field.clone(), 0, c, p))
    }

    /// `f(g)` where `table` holds `g^0, g^1, …`; see [`PowerTable`].
    pub fn compose_with(&self, table: &PowerTable) -> Result<TruncSeries> {
        self.check(&table.powers[0])?;
        self.require_power_series()?;
        let m = self.order().min(table.order());
        let d = self.field.dim();
        let mut c = vec![0u128; m * d];
        let lf = effective_len(&self.coeffs, d).min(table.powers.len());
        if effective_len(&self.coeffs, d) > table.powers.len() {
            return Err(Error::InvalidInput("power table is too short".into()));
        }
        for k in 0..lf {
            axpy(&self.field, &mut c, self.raw_coeff(k), &table.powers[k].coeffs[..m * d]);
        }
        let p = compose_precs(&self.precs, self.order(), &table.g_precs, table.v, m);
        Ok(Self::from_parts(self.field.clone(), 0, c, p))
    }

    /// Compositional inverse of `f` with `f(0) = 0` and `f'(0)` a unit.
    pub fn comp_inverse(&self) -> Result<TruncSeries> {
        self.require_power_series()?;
        let m = self.order();
        if m < 2 || !self.coeff(0).is_zero() || !self.coeff(1).is_unit() {
            return Err(Error::NotInvertible);
        }
        let field = &self.field;
        let cap = field.capacity();
        let exact = Self::from_parts(field.clone(), 0, self.coeffs.clone(), vec![cap; m]);
        let mut exact0 = exact.clone();
        exact0.coeffs[..field.dim()].iter_mut().for_each(|x| *x = 0);
        let f1inv = exact.coeff(1).invert()?;
        let df = exact0.derivative()?;
        // Newton: g <- g - (f(g) - T) / f'(g), doubling the T-adic accuracy.
        let mut g = Self::monomial(&f1inv, 1, 2);
        let mut n = 2;
        while n < m {
            n = (2 * n).min(m);
            let gn = g.extend_exact(n);
            let fg = exact0.truncate(n).compose(&gn)?;
            let err = fg.checked_sub(&Self::var(field, n))?;
            let dfg = df.truncate(n).extend_exact(n).compose(&gn)?;
            let corr = err.checked_mul(&dfg.mul_inverse()?)?;
            g = gn.checked_sub(&corr)?;
        }
        let g = g.extend_exact(m).truncate(m);
        let pre = prefix_min(&self.precs);
        Ok(Self::from_parts(field.clone(), 0, g.coeffs, pre))
    }

    /// Pads with exact zero coefficients up to order `m`.
    fn extend_exact(&self, m: usize) -> TruncSeries {
        let d = self.field.dim();
        let mut s = self.clone();
        if m > s.order() {
            s.coeffs.resize(m * d, 0);
            s.precs.resize(m, self.field.capacity());
        }
        s
    }

    /// Multiplicative inverse in `O_E((T))`. Leading coefficients that vanish
    /// at their precision are dropped; the next one must be a unit.
    pub fn mul_inverse(&self) -> Result<TruncSeries> {
        let m0 = self.order();
        let lead = (0..m0).find(|&k| self.coeff(k).valuation().is_exact()).ok_or(Error::NotAUnit)?;
        let lead_c = self.coeff(lead);
        if !lead_c.is_unit() {
            return Err(Error::NotAUnit);
        }
        let dropped = self.precs[..lead].iter().copied().min().unwrap_or(u32::MAX);
        let a = &self.coeffs[lead * self.field.dim()..];
        let m = m0 - lead;
        let d = self.field.dim();
        let a0inv = lead_c.invert()?.into_raw();
        let mut b = vec![0u128; m * d];
        b[..d].copy_from_slice(&a0inv);
        let mut acc = vec![0u128; d];
        let mut t = vec![0u128; d];
        for n in 1..m {
            acc.iter_mut().for_each(|x| *x = 0);
            for i in 1..=n {
                self.field.mul_acc(&mut acc, &a[i * d..(i + 1) * d], &b[(n - i) * d..(n - i + 1) * d]);
            }
            self.field.mul_into(&acc, &a0inv, &mut t);
            for (o, &x) in b[n * d..(n + 1) * d].iter_mut().zip(&t) {
                *o = self.field.ring().neg(x);
            }
        }
        let p = prefix_min(&self.precs[lead..]).into_iter().map(|x| x.min(dropped)).collect();
        Ok(Self::from_parts(self.field.clone(), -(self.shift + lead as i64), b, p))
    }

    /// Formal derivative `d/dT`.
    pub fn derivative(&self) -> Result<TruncSeries> {
        let d = self.field.dim();
        let m = self.order();
        let mut c = vec![0u128; m * d];
        let r = self.field.ring();
        for k in 0..m {
            let n = r.from_i128((self.shift + k as i64) as i128);
            let mut nc = vec![0u128; d];
            nc[0] = n;
            self.field.mul_into(&nc, self.raw_coeff(k), &mut c[k * d..(k + 1) * d]);
        }
        let s = Self::from_parts(self.field.clone(), self.shift - 1, c, self.precs.clone());
        if self.shift == 0 {
            // The constant term differentiates to 0; stay a power series.
            let mut t = Self::from_parts(self.field.clone(), 0, s.coeffs[d.min(s.coeffs.len())..].to_vec(), s.precs[1.min(m)..].to_vec());
            t.shift = 0;
            return Ok(t);
        }
        Ok(s)
    }

    /// `f(T + a)` for `val(a) >= 1`.
    pub fn taylor_shift(&self, a: &PadicElem) -> Result<TruncSeries> {
        self.require_power_series()?;
        if **a.field() != *self.field {
            return Err(Error::FieldMismatch);
        }
        let v = a.valuation().lower();
        if v == 0 {
            return Err(Error::ShiftNotSmall);
        }
        let field = &self.field;
        let d = field.dim();
        let m = self.order();
        let r = field.ring();
        let apow = power_list(field, a.raw(), m);
        // Pascal rows of C(k, j) modulo the base modulus.
        let mut binom = vec![vec![0u128; m]; m];
        for k in 0..m {
            binom[k][0] = r.reduce(1);
            for j in 1..=k {
                binom[k][j] = r.add(binom[k - 1][j - 1], if j < k { binom[k - 1][j] } else { 0 });
            }
        }
        let mut c = vec![0u128; m * d];
        let mut t = vec![0u128; d];
        let mut s = vec![0u128; d];
        for j in 0..m {
            for k in j..m {
                let fk = self.raw_coeff(k);
                if PadicField::is_zero_raw(fk) {
                    continue;
                }
                field.mul_into(fk, &apow[(k - j) * d..(k - j + 1) * d], &mut t);
                s.iter_mut().for_each(|x| *x = 0);
                s[0] = binom[k][j];
                let dst = &mut c[j * d..(j + 1) * d];
                field.mul_acc(dst, &s, &t);
            }
        }
        let p = (0..m)
            .map(|j| {
                let mut best = ((m - j) as u32).saturating_mul(v);
                for k in j..m {
                    best = best.min(self.precs[k].saturating_add(((k - j) as u32).saturating_mul(v)));
                }
                if j + 1 < m {
                    best = best.min(a.prec());
                }
                best
            })
            .collect();
        Ok(Self::from_parts(field.clone(), 0, c, p))
    }

    /// `f(a)` for `val(a) >= 1`, guaranteed to
    /// `min_k(prec f_k + k·v, M·v, prec a)`.
    pub fn eval(&self, a: &PadicElem) -> Result<PadicElem> {
        self.require_power_series()?;
        if **a.field() != *self.field {
            return Err(Error::FieldMismatch);
        }
        let v = a.valuation().lower();
        if v == 0 {
            return Err(Error::ShiftNotSmall);
        }
        let d = self.field.dim();
        let m = self.order();
        let mut acc = vec![0u128; d];
        let mut t = vec![0u128; d];
        for k in (0..m).rev() {
            self.field.mul_into(&acc, a.raw(), &mut t);
            self.field.add_into(&t, self.raw_coeff(k), &mut acc);
        }
        let mut prec = (m as u32).saturating_mul(v);
        for k in 0..m {
            prec = prec.min(self.precs[k].saturating_add((k as u32).saturating_mul(v)));
        }
        if m > 1 {
            prec = prec.min(a.prec());
        }
        let mut out = self.field.elem_raw(acc, prec);
        out = out.with_prec(prec);
        Ok(out)
    }

    /// `(1+T)^c - 1` for `c ∈ O_E`, via `C(c,k) = C(c,k-1)(c-k+1)/k`.
    /// Each division by `k` costs `e·v_p(k)` digits.
    pub fn binomial_series(c: &PadicElem, m: usize) -> Result<TruncSeries> {
        let field = c.field();
        let mut coeffs = Vec::with_capacity(m);
        if m > 0 {
            coeffs.push(field.zero());
        }
        let mut prev = field.one();
        for k in 1..m {
            let num = &prev * &(c - &field.from_i64(k as i64 - 1));
            let (w, u) = split_p(k as u64, field.p());
            let q = num.div_p_pow(w)?;
            let next = &q * &field.from_i64(u as i64).invert()?;
            coeffs.push(next.clone());
            prev = next;
        }
        TruncSeries::new(field, 0, &coeffs)
    }

    /// `(1+T)^c - 1` for an integer exponent, computed exactly.
    pub fn binomial_series_int(field: &Arc<PadicField>, c: &BigInt, m: usize) -> TruncSeries {
        let mut out = Vec::with_capacity(m);
        let mut b = BigInt::one();
        for k in 0..m {
            if k > 0 {
                b = b * (c - BigInt::from(k - 1)) / BigInt::from(k);
                out.push(b.clone());
            } else {
                out.push(BigInt::zero());
            }
        }
        Self::from_bigints(field, &out, m)
    }

    /// Coefficientwise reduction modulo `𝔪_E`.
    pub fn reduce_mod_p(&self) -> ResidueSeries {
        let coeffs = (0..self.order())
            .map(|k| if self.precs[k] >= 1 { Some(self.coeff(k).residue()) } else { None })
            .collect();
        ResidueSeries { shift: self.shift, coeffs }
    }

    /// Powers `self^0, …, self^{count-1}` for repeated composition.
    pub fn power_table(&self, count: usize) -> Result<PowerTable> {
        self.require_power_series()?;
        let v = compose_constant_val(self)?;
        let m = self.order();
        let mut powers = Vec::with_capacity(count);
        powers.push(Self::one(&self.field, m));
        for k in 1..count {
            let next = if k == 1 { self.clone() } else { powers[k - 1].checked_mul(self)? };
            powers.push(next);
        }
        Ok(PowerTable { powers, g_precs: self.precs.clone(), v })
    }
}

fn split_p(mut k: u64, p: u64) -> (u32, u64) {
    let mut w = 0;
    while k.is_multiple_of(p) {
        k /= p;
        w += 1;
    }
    (w, k)
}

fn power_list(field: &PadicField, a: &[u128], n: usize) -> Vec<u128> {
    let d = field.dim();
    let mut out = vec![0u128; n * d];
    if n == 0 {
        return out;
    }
    out[0] = 1;
    for k in 1..n {
        let (lo, hi) = out.split_at_mut(k * d);
        field.mul_into(&lo[(k - 1) * d..], a, &mut hi[..d]);
    }
    out
}

fn compose_constant_val(g: &TruncSeries) -> Result<u32> {
    if g.order() == 0 {
        return Ok(u32::MAX);
    }
    let g0 = g.coeff(0);
    match g0.valuation() {
        Valuation::Exact(0) | Valuation::AtLeast(0) => Err(Error::ConstantTermNotSmall),
        v => Ok(v.lower()),
    }
}

fn compose_precs(pf: &[u32], mf: usize, pg: &[u32], v: u32, m: usize) -> Vec<u32> {
    let pre_g = prefix_min(pg);
    (0..m)
        .map(|j| {
            let mut best = pre_g[j].min(((mf - j) as u32).saturating_mul(v));
            for (k, &p) in pf.iter().enumerate() {
                let extra = (k.saturating_sub(j) as u32).saturating_mul(v);
                best = best.min(p.saturating_add(extra));
            }
            best
        })
        .collect()
}

/// Values of `f(g)` truncated to `m` terms (no precision bookkeeping).
pub(crate) fn compose_raw(field: &PadicField, f: &[u128], mf: usize, g: &[u128], m: usize) -> Vec<u128> {
    let d = field.dim();
    let lf = effective_len(&f[..mf * d], d);
    let g = &g[..m * d];
    let mut out = vec![0u128; m * d];
    if lf == 0 || m == 0 {
        return out;
    }
    if lf <= HORNER_MAX {
        out[..d].copy_from_slice(&f[(lf - 1) * d..lf * d]);
        for k in (0..lf - 1).rev() {
            out = mul_raw(field, &out, g, m);
            field.add_assign(&mut out[..d], &f[k * d..(k + 1) * d]);
        }
        return out;
    }
    // Baby-step giant-step: f = Σ_j B_j(g) · (g^b)^j with deg B_j < b.
    let b = (lf as f64).sqrt().ceil() as usize;
    let mut baby: Vec<Vec<u128>> = Vec::with_capacity(b + 1);
    let mut one = vec![0u128; m * d];
    one[0] = 1;
    baby.push(one);
    for i in 1..=b {
        let next = if i == 1 { g.to_vec() } else { mul_raw(field, &baby[i - 1], g, m) };
        baby.push(next);
    }
    let giant = baby[b].clone();
    let blocks = lf.div_ceil(b);
    for j in (0..blocks).rev() {
        if j + 1 < blocks {
            out = mul_raw(field, &out, &giant, m);
        }
        for i in 0..b {
            let k = j * b + i;
            if k >= lf {
                break;
            }
            axpy(field, &mut out, &f[k * d..(k + 1) * d], &baby[i]);
        }
    }
    out
}

/// Powers of a fixed series, reused across many compositions with it.
#[derive(Clone, Debug)]
pub struct PowerTable {
    powers: Vec<TruncSeries>,
    g_precs: Vec<u32>,
    v: u32,
}

impl PowerTable {
    pub fn order(&self) -> usize {
        self.powers[0].order()
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn power(&self, k: usize) -> &TruncSeries {
        &self.powers[k]
    }
}

/// A series over the residue field `k_E`; `None` marks coefficients known to
/// no digits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidueSeries {
    pub shift: i64,
    pub coeffs: Vec<Option<Vec<u64>>>,
}

impl ResidueSeries {
    /// True when the series equals `T^n` on every known coefficient and the
    /// coefficient of `T^n` is known.
    pub fn is_monomial(&self, n: i64) -> bool {
        let idx = n - self.shift;
        if idx < 0 || idx as usize >= self.coeffs.len() || self.coeffs[idx as usize].is_none() {
            return false;
        }
        self.coeffs.iter().enumerate().all(|(k, c)| match c {
            None => true,
            Some(c) => {
                let want_one = k as i64 == idx;
                c.iter().enumerate().all(|(j, &x)| x == if want_one && j == 0 { 1 } else { 0 })
            }
        })
    }

    /// Degrees `shift + k` of the nonzero known coefficients.
    pub fn support(&self) -> Vec<i64> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c, Some(c) if c.iter().any(|&x| x != 0)))
            .map(|(k, _)| self.shift + k as i64)
            .collect()
    }
}

impl fmt::Display for ResidueSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = vec![];
        for (k, c) in self.coeffs.iter().enumerate() {
            if let Some(c) = c {
                if c.iter().any(|&x| x != 0) {
                    let coef = if c.len() == 1 { c[0].to_string() } else { format!("{c:?}") };
                    terms.push(format!("{coef}*T^{}", self.shift + k as i64));
                }
            }
        }
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

impl PartialEq for TruncSeries {
    fn eq(&self, other: &Self) -> bool {
        self.shift == other.shift && self.order() == other.order() && self.coeffs() == other.coeffs()
    }
}

impl TruncSeries {
    /// Equality on the common range of known digits.
    pub fn eq_at_prec(&self, other: &TruncSeries) -> bool {
        self.checked_sub(other).map(|d| d.is_zero()).unwrap_or(false)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $checked:ident) => {
        impl std::ops::$tr<&TruncSeries> for &TruncSeries {
            type Output = TruncSeries;
            /// Panics if the operands belong to different fields.
            fn $m(self, rhs: &TruncSeries) -> TruncSeries {
                self.$checked(rhs).expect("field mismatch")
            }
        }
    };
}
binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);

/// Serialized series; coefficient precisions are capped at `N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesJson {
    pub shift: i64,
    pub coeffs: Vec<ElemJson>,
    pub prec: u32,
    #[serde(rename = "M")]
    pub m: usize,
}

impl TruncSeries {
    pub fn to_json(&self) -> SeriesJson {
        let n = self.field.n();
        let coeffs = (0..self.order()).map(|k| self.coeff(k).with_prec(n).to_json()).collect();
        SeriesJson { shift: self.shift, coeffs, prec: self.prec(), m: self.order() }
    }

    pub fn from_json(field: &Arc<PadicField>, j: &SeriesJson) -> Result<TruncSeries> {
        if j.coeffs.len() != j.m {
            return Err(Error::InvalidInput(format!(
                "series has M = {} but {} coefficients",
                j.m,
                j.coeffs.len()
            )));
        }
        let coeffs = j
            .coeffs
            .iter()
            .map(|c| PadicElem::from_json(field, c).map(|x| x.with_prec(j.prec)))
            .collect::<Result<Vec<_>>>()?;
        TruncSeries::new(field, j.shift, &coeffs)
    }
}

impl fmt::Display for TruncSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = vec![];
        for k in 0..self.order() {
            let c = self.coeff(k);
            if c.is_zero() {
                continue;
            }
            let coords = c.reduced_coords();
            let coef = if coords.len() == 1 { coords[0].to_string() } else { format!("{coords:?}") };
            terms.push(format!("{coef}*T^{}", self.shift + k as i64));
        }
        let body = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
        write!(f, "{body} + O(T^{}) [prec {}]", self.shift + self.order() as i64, self.prec())
    }
}
