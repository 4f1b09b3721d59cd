//! The logarithm `A(T)` with `A ≡ T mod T²` and `A∘P = π_1·A`, where
//! `π_1 = P'(0)`.
//!
//! Coefficients have denominators up to `π_1^{k-1}`, so they are kept as
//! `ϖ^shift · unit`; dividing by `π_1` is then a shift plus a unit inverse.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{ElemJson, PadicElem, PadicField, Valuation};
use crate::series::TruncSeries;

/// `ϖ^shift · unit`, where `unit` is a unit or zero at its precision. The
/// absolute precision is `shift + unit.prec()`.
#[derive(Clone, Debug)]
pub struct ScaledElem {
    pub shift: i64,
    pub unit: PadicElem,
}

impl ScaledElem {
    /// Normalizes `ϖ^shift · x` so that the stored part is a unit or zero.
    pub fn new(shift: i64, x: PadicElem) -> ScaledElem {
        match x.valuation() {
            Valuation::Exact(v) if v > 0 => {
                ScaledElem { shift: shift + v as i64, unit: x.div_pi_pow(v).expect("valuation is exact") }
            }
            _ => ScaledElem { shift, unit: x },
        }
    }

    pub fn zero(field: &Arc<PadicField>, abs_prec: i64) -> ScaledElem {
        ScaledElem { shift: abs_prec, unit: field.zero().with_prec(0) }
    }

    /// `num/den` for integers with `den != 0`.
    pub fn from_ratio(field: &Arc<PadicField>, num: i64, den: i64) -> ScaledElem {
        assert!(den != 0);
        if num == 0 {
            return ScaledElem::new(0, field.zero());
        }
        let p = field.p() as i64;
        let e = field.e() as i64;
        let split = |mut x: i64| {
            let mut w = 0i64;
            while x % p == 0 {
                x /= p;
                w += 1;
            }
            (w, x)
        };
        let (wn, n) = split(num);
        let (wd, d) = split(den);
        let w = wn - wd;
        // p = ϖ^e · u_p.
        let up = field.from_i64(p).div_pi_pow(e as u32).expect("p has valuation e");
        let upw = if w >= 0 { up.pow(w as u64) } else { up.invert().unwrap().pow((-w) as u64) };
        let unit = &(&field.from_i64(n) * &field.from_i64(d).invert().unwrap()) * &upw;
        ScaledElem { shift: w * e, unit }
    }

    pub fn abs_prec(&self) -> i64 {
        self.shift + self.unit.prec() as i64
    }

    pub fn is_zero(&self) -> bool {
        self.unit.is_zero()
    }

    /// Valuation when nonzero at precision.
    pub fn valuation(&self) -> Option<i64> {
        (!self.is_zero()).then_some(self.shift)
    }

    /// `ϖ^j · self` as an integral element when `shift + j >= 0`.
    pub fn to_integral(&self, j: i64) -> Option<PadicElem> {
        let s = self.shift + j;
        let field = self.unit.field();
        if self.is_zero() {
            let p = (self.abs_prec() + j).clamp(0, field.capacity() as i64);
            return Some(field.zero().with_prec(p as u32));
        }
        (s >= 0).then(|| &field.uniformizer().pow(s as u64) * &self.unit)
    }

    /// Equality to the smaller of the two absolute precisions.
    pub fn eq_at_prec(&self, other: &ScaledElem) -> bool {
        let t = self.abs_prec().min(other.abs_prec());
        let a_small = self.is_zero() || self.shift >= t;
        let b_small = other.is_zero() || other.shift >= t;
        match (a_small, b_small) {
            (true, true) => true,
            (false, false) => {
                self.shift == other.shift && {
                    let r = (t - self.shift) as u32;
                    self.unit.with_prec(r).eq_at_prec(&other.unit.with_prec(r))
                }
            }
            _ => false,
        }
    }

    pub fn to_json(&self) -> ScaledJson {
        ScaledJson { shift: self.shift, unit: self.unit.to_json() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaledJson {
    pub shift: i64,
    pub unit: ElemJson,
}

#[derive(Clone, Debug)]
pub struct LogSeries {
    /// `a_0 = 0, a_1 = 1, a_2, …, a_{M-1}`.
    pub coeffs: Vec<ScaledElem>,
    pub pi1: PadicElem,
    /// `val_ϖ(π_1)`.
    pub v1: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogJson {
    pub coeffs: Vec<ScaledJson>,
    pub pi1: ElemJson,
    #[serde(rename = "M")]
    pub m: usize,
    pub residual: LogResidual,
}

/// Residual of an identity `A∘G - c·A` after multiplying through by
/// `π_1^{M-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogResidual {
    /// Valuation of the cleared residual.
    pub cleared: Valuation,
    /// Least coefficient precision of the cleared residual.
    pub certified: u32,
    /// `cleared - (M-1)·val(π_1)`: the bound this gives on the uncleared
    /// residual, which may be negative.
    pub effective: i64,
}

impl LogSeries {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn field(&self) -> &Arc<PadicField> {
        self.pi1.field()
    }

    fn clearing(&self) -> i64 {
        (self.order().saturating_sub(1) as i64) * self.v1 as i64
    }

    /// `π_1^{M-1} · A`, an integral series.
    pub fn cleared(&self) -> Result<TruncSeries> {
        let field = self.field();
        let u1 = self.pi1.div_pi_pow(self.v1)?;
        let m = self.order();
        let scale = u1.pow(m.saturating_sub(1) as u64);
        let c = self.clearing();
        let coeffs = self
            .coeffs
            .iter()
            .map(|a| {
                a.to_integral(c)
                    .map(|x| &x * &scale)
                    .ok_or_else(|| Error::PrecisionExhausted("coefficient below the denominator bound".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        TruncSeries::new(field, 0, &coeffs)
    }

    fn residual_of(&self, r: &TruncSeries) -> LogResidual {
        let cleared = r.valuation();
        let certified = r.precs().iter().copied().min().unwrap_or(u32::MAX);
        LogResidual { cleared, certified, effective: cleared.lower() as i64 - self.clearing() }
    }

    /// `π_1^{M-1}·(A∘P - π_1·A)`.
    pub fn residual(&self, p: &TruncSeries) -> Result<LogResidual> {
        let a = self.cleared()?;
        let r = a.compose(&p.truncate(self.order()))?.checked_sub(&a.scale(&self.pi1)?)?;
        Ok(self.residual_of(&r))
    }

    /// Checks the denominator bound `a_k ∈ π_1^{1-k} O_E` for every nonzero
    /// coefficient.
    pub fn denominators_ok(&self) -> bool {
        self.coeffs.iter().enumerate().all(|(k, a)| match a.valuation() {
            Some(s) => s >= (1 - k as i64) * self.v1 as i64,
            None => true,
        })
    }

    pub fn to_json(&self, residual: LogResidual) -> LogJson {
        LogJson {
            coeffs: self.coeffs.iter().map(ScaledElem::to_json).collect(),
            pi1: self.pi1.to_json(),
            m: self.order(),
            residual,
        }
    }
}

/// Solves `A∘P = π_1·A` with `a_1 = 1` to order `m` via
/// `a_k (π_1 - π_1^k) = Σ_{i<k} a_i x_{k,i}`, `x_{k,i} = [T^k] P^i`.
pub fn logarithm(p: &TruncSeries, m: usize) -> Result<LogSeries> {
    let field = p.field().clone();
    if p.shift() != 0 || p.order() < 2 {
        return Err(Error::InvalidInput("P must be a power series of order at least 2".into()));
    }
    if p.coeff(0).valuation().is_exact() {
        return Err(Error::InvalidInput("P(0) must vanish".into()));
    }
    let pi1 = p.coeff(1);
    let v1 = match pi1.valuation() {
        Valuation::AtLeast(_) => return Err(Error::LinearCoefficientZero),
        Valuation::Exact(0) => return Err(Error::InvalidInput("P'(0) must lie in the maximal ideal".into())),
        Valuation::Exact(v) => v,
    };
    let m = m.min(p.order());
    let u1 = pi1.div_pi_pow(v1)?;
    let table = p.truncate(m).power_table(m)?;
    let pi = field.uniformizer();
    let n = field.n() as i64;

    let mut coeffs = vec![ScaledElem::new(0, field.zero())];
    if m > 1 {
        coeffs.push(ScaledElem::new(0, field.one()));
    }
    let mut pi1k = pi1.clone();
    for k in 2..m {
        pi1k = &pi1k * &pi1;
        let base = coeffs[1..k].iter().map(|a| a.shift).min().unwrap();
        let mut sum = field.zero();
        for (i, a) in coeffs.iter().enumerate().take(k).skip(1) {
            let x = table.power(i).coeff(k);
            let term = &(&a.unit * &x) * &pi.pow((a.shift - base) as u64);
            sum = &sum + &term;
        }
        let s = ScaledElem::new(base, sum);
        let den = &u1 * &(&field.one() - &(&pi1k * &u1.invert()?).div_pi_pow(v1)?);
        let a = ScaledElem { shift: s.shift - v1 as i64, unit: &s.unit * &den.invert()? };
        let bound = (1 - k as i64) * v1 as i64;
        if a.abs_prec() - bound < n {
            return Err(Error::PrecisionExhausted(format!(
                "a_{k} is known only to {} digits beyond its denominator bound",
                a.abs_prec() - bound
            )));
        }
        coeffs.push(a);
    }
    Ok(LogSeries { coeffs, pi1, v1 })
}

/// `π_1^{M-1}·(A∘F - f_1·A)`: zero for every `F` commuting with `P` whose
/// derivative at 0 is `f_1`.
pub fn eigen_check(a: &LogSeries, f: &TruncSeries, f1: &PadicElem) -> Result<LogResidual> {
    let c = a.cleared()?;
    let m = a.order().min(f.order());
    let r = c.truncate(m).compose(&f.truncate(m))?.checked_sub(&c.truncate(m).scale(f1)?)?;
    Ok(a.residual_of(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::FieldDesc;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn q3() -> Arc<PadicField> {
        PadicField::new(&FieldDesc::qp(3, 8)).unwrap()
    }

    fn cyc(k: &Arc<PadicField>, c: i64, m: usize) -> TruncSeries {
        TruncSeries::binomial_series_int(k, &BigInt::from(c), m)
    }

    #[test]
    fn cyclotomic_log_is_log_one_plus_t() {
        let k = q3();
        let m = 33;
        let a = logarithm(&cyc(&k, 3, m), m).unwrap();
        for j in 1..m {
            let sign = if j % 2 == 1 { 1 } else { -1 };
            let want = ScaledElem::from_ratio(&k, sign, j as i64);
            assert!(a.coeffs[j].eq_at_prec(&want), "a_{j}");
            assert!(a.coeffs[j].unit.prec() >= 8);
        }
        assert!(a.denominators_ok());
        let r = a.residual(&cyc(&k, 3, m)).unwrap();
        assert!(r.cleared.lower() >= 8 && r.certified >= 8, "{r:?}");
        let e = eigen_check(&a, &cyc(&k, 4, m), &k.from_i64(4)).unwrap();
        assert!(e.cleared.lower() >= 8, "{e:?}");
    }

    #[test]
    fn lubin_tate_log() {
        let k = q3();
        let m = 28;
        let p = TruncSeries::from_i64s(&k, &[0, 3, 0, 1], m);
        let a = logarithm(&p, m).unwrap();
        // Exact rational solution of the recurrence.
        let want = [(1, 1, 1), (3, -1, 24), (5, 3, 640), (7, -5, 7168), (9, 35, 294912), (11, -63, 2883584)];
        for (j, num, den) in want {
            assert!(a.coeffs[j].eq_at_prec(&ScaledElem::from_ratio(&k, num, den)), "a_{j}");
        }
        for j in (2..m).step_by(2) {
            assert!(a.coeffs[j].is_zero(), "a_{j} should vanish");
        }
        // Σ T^{3^n}/3^n is not the solution: a_5 = 3/640 is nonzero.
        assert_eq!(a.coeffs[5].valuation(), Some(1));
        assert!(a.denominators_ok());
        assert!(a.residual(&p).unwrap().cleared.lower() >= 8);
    }

    #[test]
    fn linear_p_gives_identity() {
        let k = q3();
        let p = TruncSeries::from_i64s(&k, &[0, 3], 10);
        let a = logarithm(&p, 10).unwrap();
        assert!(a.coeffs[1].eq_at_prec(&ScaledElem::new(0, k.one())));
        assert!(a.coeffs[2..].iter().all(ScaledElem::is_zero));
    }

    #[test]
    fn errors() {
        let k = q3();
        assert_eq!(logarithm(&TruncSeries::from_i64s(&k, &[0, 0, 0, 1], 8), 8).unwrap_err(), Error::LinearCoefficientZero);
        assert!(matches!(logarithm(&cyc(&k, 2, 8), 8), Err(Error::InvalidInput(_))));
        assert!(matches!(logarithm(&TruncSeries::from_i64s(&k, &[3, 3, 0, 1], 8), 8), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn eigen_check_examples() {
        let k = q3();
        let m = 32;
        let a = logarithm(&cyc(&k, 3, m), m).unwrap();
        let id = eigen_check(&a, &TruncSeries::var(&k, m), &k.one()).unwrap();
        assert!(!id.cleared.is_exact());
        let bumped = &cyc(&k, 4, m) + &TruncSeries::from_i64s(&k, &[0, 0, 3], m);
        let r = eigen_check(&a, &bumped, &k.from_i64(4)).unwrap();
        // The T² coefficient of A∘F - 4A changes by 3·a_1.
        assert_eq!(r.effective, 1);
        assert!(r.cleared.is_exact());
    }

    #[test]
    fn ramified_log() {
        // P = ϖT + T^3 over Q_3(√3): π_1 has valuation 1 in ϖ.
        let k = PadicField::new(&FieldDesc::ramified(3, &[-3, 0, 1], 6)).unwrap();
        let m = 20;
        let p = &TruncSeries::monomial(&k.uniformizer(), 1, m) + &TruncSeries::monomial(&k.one(), 3, m);
        let a = logarithm(&p, m).unwrap();
        assert!(a.denominators_ok());
        assert!(a.residual(&p).unwrap().cleared.lower() >= 6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn denominators_and_eigen_relation(c in prop::collection::vec(-40i64..40, 6), v in 1i64..3) {
            let k = q3();
            let m = 24;
            // P = 3^v·u·T + (1+3x)T^3 + 3·(rest): reduces to T^3.
            let mut cs = vec![0, 3i64.pow(v as u32) * (1 + 3 * c[0]).signum().max(1), 3 * c[1], 1 + 3 * c[2], 3 * c[3], 3 * c[4], 3 * c[5]];
            if cs[1] == 0 { cs[1] = 3; }
            let p = TruncSeries::from_i64s(&k, &cs, m);
            let a = logarithm(&p, m).unwrap();
            prop_assert!(a.denominators_ok());
            prop_assert!(a.residual(&p).unwrap().cleared.lower() >= 8);
        }
    }
}
