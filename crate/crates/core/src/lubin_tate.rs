//! Lubin–Tate endomorphisms `[a](T)` of a Frobenius series, built degree by
//! degree, and the cyclotomic and Lubin–Tate families of lift data.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::lift_checker::{LiftElement, LiftSpec};
use crate::padic::{PadicElem, PadicField, Valuation};
use crate::series::TruncSeries;

/// A series `f ≡ ϖT mod T²` with `f ≡ T^q mod ϖ`.
#[derive(Clone, Debug)]
pub struct FrobeniusSeries {
    series: TruncSeries,
}

impl FrobeniusSeries {
    pub fn new(series: TruncSeries) -> Result<FrobeniusSeries> {
        let field = series.field().clone();
        if series.shift() != 0 || series.order() < 2 {
            return Err(Error::InvalidInput("Frobenius series must be a power series of order >= 2".into()));
        }
        if series.coeff(0).valuation().is_exact() {
            return Err(Error::InvalidInput("Frobenius series must vanish at 0".into()));
        }
        if series.coeff(1).valuation() != Valuation::Exact(1) {
            return Err(Error::InvalidInput("linear coefficient must be a uniformizer".into()));
        }
        let q = field.q() as i64;
        if series.order() as i64 > q && !series.reduce_mod_p().is_monomial(q) {
            return Err(Error::InvalidInput(format!("series does not reduce to T^{q}")));
        }
        Ok(FrobeniusSeries { series })
    }

    /// `ϖT + T^q` to order `m`.
    pub fn standard(field: &Arc<PadicField>, m: usize) -> Result<FrobeniusSeries> {
        let q = field.q() as usize;
        let mut s = TruncSeries::monomial(&field.uniformizer(), 1, m);
        if q < m {
            s = &s + &TruncSeries::monomial(&field.one(), q, m);
        }
        FrobeniusSeries::new(s)
    }

    pub fn series(&self) -> &TruncSeries {
        &self.series
    }

    pub fn field(&self) -> &Arc<PadicField> {
        self.series.field()
    }
}

/// Guard digits that absorb the one-digit loss per degree of the
/// degree-by-degree construction to order `m` over a field of ramification
/// index `e`.
pub fn lubin_tate_guard(e: usize, m: usize) -> u32 {
    (m.div_ceil(e) + 2) as u32
}

/// The unique `F ≡ aT mod T²` with `f∘F = F∘g`, to order
/// `min(m, ord f, ord g)`.
///
/// Each degree costs one digit in the division by `f_1 - g_1^{n+1}`; fails
/// with `PrecisionExhausted` if the result is not certified to `N` digits.
pub fn lt_unique_series(f: &FrobeniusSeries, g: &FrobeniusSeries, a: &PadicElem, m: usize) -> Result<TruncSeries> {
    let field = f.field();
    if **g.field() != **field || **a.field() != **field {
        return Err(Error::FieldMismatch);
    }
    let (fs, gs) = (&f.series, &g.series);
    let f1 = fs.coeff(1);
    let g1 = gs.coeff(1);
    if !f1.eq_at_prec(&g1) {
        return Err(Error::InvalidInput("Frobenius series must share the linear coefficient".into()));
    }
    let m = m.min(fs.order()).min(gs.order());
    let cap = field.capacity();
    let mut big = TruncSeries::zero(field, m);
    if m >= 2 {
        big.set_coeff(1, a);
    }
    let mut g1pow = g1.clone();
    for n in 1..m.saturating_sub(1) {
        let k = n + 2;
        let head = big.truncate(k);
        let lhs = fs.truncate(k).compose(&head)?;
        let rhs = head.compose(&gs.truncate(k))?;
        let e = &lhs.coeff(n + 1) - &rhs.coeff(n + 1);
        g1pow = &g1pow * &g1;
        let den = &f1 - &g1pow;
        let c = e.div_exact(&den).map_err(|err| match err {
            Error::InvalidInput(_) | Error::NotAUnit => Error::PrecisionExhausted(format!(
                "degree {} of the endomorphism lost all precision",
                n + 1
            )),
            other => other,
        })?;
        big.set_coeff(n + 1, &c.neg());
    }
    let n = field.n();
    if big.prec() < n {
        return Err(Error::PrecisionExhausted(format!(
            "order {m} needs more guard digits: result certified to {} < {n} digits (capacity {cap})",
            big.prec()
        )));
    }
    Ok(big)
}

/// `[a]_f = lt_unique_series(f, f, a)`.
pub fn endomorphism(f: &FrobeniusSeries, a: &PadicElem, m: usize) -> Result<TruncSeries> {
    lt_unique_series(f, f, a, m)
}

/// Triples `(x, y, xy)` over ordered pairs `x <= y` whose product lies in
/// the sample.
fn product_triples(values: &[BigInt]) -> Vec<[String; 3]> {
    let index: BTreeMap<&BigInt, usize> = values.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut out = vec![];
    for i in 0..values.len() {
        for j in i..values.len() {
            let prod = &values[i] * &values[j];
            if index.contains_key(&prod) {
                out.push([values[i].to_string(), values[j].to_string(), prod.to_string()]);
            }
        }
    }
    out
}

fn dedup(values: &[BigInt]) -> Result<Vec<BigInt>> {
    let mut seen = std::collections::BTreeSet::new();
    for v in values {
        if !seen.insert(v.clone()) {
            return Err(Error::MalformedGroupData(format!("duplicate sample element {v}")));
        }
    }
    Ok(values.to_vec())
}

/// `P = (1+T)^q - 1` and `F_c = (1+T)^c - 1` for each exponent `c`, which
/// must be a `p`-adic unit. Products are those implied by multiplication of
/// exponents within the sample.
pub fn cyclotomic_lift(field: &Arc<PadicField>, exponents: &[BigInt], m: usize) -> Result<LiftSpec> {
    let values = dedup(exponents)?;
    let p = BigInt::from(field.p());
    for c in &values {
        if c.mod_floor(&p).is_zero() {
            return Err(Error::InvalidInput(format!("exponent {c} is not a p-adic unit")));
        }
    }
    let big_p = TruncSeries::binomial_series_int(field, &BigInt::from(field.q()), m);
    let elements = values
        .iter()
        .map(|c| LiftElement { label: c.to_string(), f: TruncSeries::binomial_series_int(field, c, m) })
        .collect();
    Ok(LiftSpec { field: field.clone(), p: big_p, elements, products: product_triples(&values), residue_action: None })
}

/// `P = f` and `F_a = [a]_f` for each integer `a` of the sample.
pub fn lubin_tate_lift(f: &FrobeniusSeries, ints: &[BigInt], m: usize) -> Result<LiftSpec> {
    let values = dedup(ints)?;
    let field = f.field();
    let elements = values
        .iter()
        .map(|a| Ok(LiftElement { label: a.to_string(), f: endomorphism(f, &field.from_bigint(a), m)? }))
        .collect::<Result<Vec<_>>>()?;
    let m = elements.iter().map(|e: &LiftElement| e.f.order()).min().unwrap_or(m).min(m);
    Ok(LiftSpec {
        field: field.clone(),
        p: f.series.truncate(m),
        elements,
        products: product_triples(&values),
        residue_action: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lift_checker::{check_lift, Verdict};
    use crate::padic::FieldDesc;
    use proptest::prelude::*;

    fn lt_field(m: usize) -> Arc<PadicField> {
        PadicField::new(&FieldDesc::qp(3, 6).with_guard(lubin_tate_guard(1, m))).unwrap()
    }

    #[test]
    fn trivial_endomorphisms() {
        let k = lt_field(24);
        let f = FrobeniusSeries::standard(&k, 24).unwrap();
        assert!(endomorphism(&f, &k.one(), 24).unwrap().eq_at_prec(&TruncSeries::var(&k, 24)));
        assert!(endomorphism(&f, &k.uniformizer(), 24).unwrap().eq_at_prec(f.series()));
    }

    #[test]
    fn two_commutes_and_squares_to_four() {
        let m = 40;
        let k = lt_field(m);
        let f = FrobeniusSeries::standard(&k, m).unwrap();
        let two = endomorphism(&f, &k.from_i64(2), m).unwrap();
        let four = endomorphism(&f, &k.from_i64(4), m).unwrap();
        assert!(two.prec() >= 6);
        let comm = &f.series().compose(&two).unwrap() - &two.compose(f.series()).unwrap();
        assert!(comm.valuation().lower() >= 6);
        let sq = &two.compose(&two).unwrap() - &four;
        assert!(sq.valuation().lower() >= 6);
        assert_eq!(two.coeff(1), k.from_i64(2).with_prec(two.precs()[1]));
    }

    #[test]
    fn composition_is_multiplicative() {
        let m = 30;
        let k = lt_field(m);
        let f = FrobeniusSeries::standard(&k, m).unwrap();
        let e = |a: i64| endomorphism(&f, &k.from_i64(a), m).unwrap();
        let (a, b, ab) = (e(2), e(5), e(10));
        assert!((&a.compose(&b).unwrap() - &ab).valuation().lower() >= 6);
        assert!((&b.compose(&a).unwrap() - &ab).valuation().lower() >= 6);
    }

    #[test]
    fn too_few_guard_digits() {
        let k = PadicField::new(&FieldDesc::qp(3, 6).with_guard(2)).unwrap();
        let f = FrobeniusSeries::standard(&k, 30).unwrap();
        assert!(matches!(endomorphism(&f, &k.from_i64(2), 30), Err(Error::PrecisionExhausted(_))));
    }

    #[test]
    fn rejects_non_frobenius() {
        let k = lt_field(8);
        assert!(FrobeniusSeries::new(TruncSeries::from_i64s(&k, &[0, 1, 0, 1], 8)).is_err());
        assert!(FrobeniusSeries::new(TruncSeries::from_i64s(&k, &[0, 3, 1, 1], 8)).is_err());
        assert!(FrobeniusSeries::new(TruncSeries::from_i64s(&k, &[0, 3, 3, 1], 8)).is_ok());
    }

    #[test]
    fn ramified_endomorphism() {
        // Q_3(√-3) via x² + 3: ϖ² = -3.
        let m = 20;
        let k = PadicField::new(&FieldDesc::ramified(3, &[3, 0, 1], 6).with_guard(lubin_tate_guard(2, m))).unwrap();
        let f = FrobeniusSeries::standard(&k, m).unwrap();
        let one_plus = &k.one() + &k.uniformizer();
        let a = endomorphism(&f, &one_plus, m).unwrap();
        let comm = &f.series().compose(&a).unwrap() - &a.compose(f.series()).unwrap();
        assert!(comm.valuation().lower() >= 6);
    }

    #[test]
    fn cyclotomic_examples() {
        let k3 = PadicField::new(&FieldDesc::qp(3, 8)).unwrap();
        let s = cyclotomic_lift(&k3, &[BigInt::from(4), BigInt::from(7)], 24).unwrap();
        assert_eq!(check_lift(&s).unwrap().verdict, Verdict::Accept);
        let id = cyclotomic_lift(&k3, &[BigInt::from(1)], 24).unwrap();
        assert!(id.elements[0].f.eq_at_prec(&TruncSeries::var(&k3, 24)));
        assert_eq!(id.products, vec![["1".to_string(), "1".into(), "1".into()]]);
        let k2 = PadicField::new(&FieldDesc::qp(2, 8)).unwrap();
        let s2 = cyclotomic_lift(&k2, &[BigInt::from(3)], 24).unwrap();
        assert_eq!(check_lift(&s2).unwrap().verdict, Verdict::Accept);
        assert!(cyclotomic_lift(&k3, &[BigInt::from(6)], 8).is_err());
    }

    #[test]
    fn lubin_tate_spec_is_accepted() {
        let m = 24;
        let k = lt_field(m);
        let f = FrobeniusSeries::standard(&k, m).unwrap();
        let ints: Vec<BigInt> = [2, 5, 10].iter().map(|&x| BigInt::from(x)).collect();
        let spec = lubin_tate_lift(&f, &ints, m).unwrap();
        assert_eq!(spec.products, vec![["2".to_string(), "5".into(), "10".into()]]);
        let rep = check_lift(&spec).unwrap();
        assert_eq!(rep.verdict, Verdict::Accept, "{:?}", rep.reasons);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn endomorphisms_commute(a in 1i64..200, b in 1i64..200) {
            let m = 16;
            let k = lt_field(m);
            let f = FrobeniusSeries::standard(&k, m).unwrap();
            let ea = endomorphism(&f, &k.from_i64(a), m).unwrap();
            let eb = endomorphism(&f, &k.from_i64(b), m).unwrap();
            let eab = endomorphism(&f, &k.from_i64(a * b), m).unwrap();
            prop_assert!((&ea.compose(&eb).unwrap() - &eab).valuation().lower() >= 6);
            prop_assert!((&eb.compose(&ea).unwrap() - &eab).valuation().lower() >= 6);
            prop_assert_eq!(ea.coeff(1).residue(), k.from_i64(a).residue());
        }
    }
}
