//! Verification of candidate lifts `(P, {F_g})`: reduction of `P` to the
//! `q`-power map, commutation `F_g∘P = P∘F_g`, the cocycle relation
//! `F_h∘F_g = F_{gh}` on a sampled multiplication table, and the character
//! `f_1(g) = F_g'(0)`.
//!
//! An `Accept` only means that no violation was found on the sample at the
//! working precision; the group is infinite and series are truncated.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::newton::fixed_point;
use crate::padic::{DecInt, ElemJson, FieldDesc, PadicElem, PadicField, Valuation};
use crate::series::{PowerTable, ResidueSeries, SeriesJson, TruncSeries};

pub const ACCEPT_NOTE: &str =
    "consistent at the stated precision on the given sample; this is not a proof that a lift exists";

#[derive(Clone, Debug)]
pub struct LiftElement {
    pub label: String,
    pub f: TruncSeries,
}

/// Candidate lift data over one field.
#[derive(Clone, Debug)]
pub struct LiftSpec {
    pub field: Arc<PadicField>,
    pub p: TruncSeries,
    pub elements: Vec<LiftElement>,
    /// Triples `(g, h, gh)` asserting `F_h ∘ F_g = F_{gh}`.
    pub products: Vec<[String; 3]>,
    /// Expected reductions `F̄_g ∈ k_E[[T]]`, by label.
    pub residue_action: Option<BTreeMap<String, ResidueSeries>>,
}

impl LiftSpec {
    pub fn element(&self, label: &str) -> Option<&TruncSeries> {
        self.elements.iter().find(|e| e.label == label).map(|e| &e.f)
    }

    /// Checks label uniqueness, product references and field agreement.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for e in &self.elements {
            if !seen.insert(e.label.as_str()) {
                return Err(Error::MalformedGroupData(format!("duplicate label {:?}", e.label)));
            }
            if **e.f.field() != *self.field {
                return Err(Error::FieldMismatch);
            }
        }
        if **self.p.field() != *self.field {
            return Err(Error::FieldMismatch);
        }
        for t in &self.products {
            for l in t {
                if !seen.contains(l.as_str()) {
                    return Err(Error::MalformedGroupData(format!("product refers to unknown label {l:?}")));
                }
            }
        }
        if let Some(ra) = &self.residue_action {
            for l in ra.keys() {
                if !seen.contains(l.as_str()) {
                    return Err(Error::MalformedGroupData(format!(
                        "residue action refers to unknown label {l:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Outcome of one residual condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Pass,
    Fail,
    Uncertified,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Residual {
    /// Valuation of the residual series (minimum over coefficients).
    pub valuation: Valuation,
    /// Digits to which every coefficient was compared: `min(prec_k, N)`.
    pub certified: u32,
    /// First coefficient whose valuation is certified below `min(prec_k, N)`.
    pub witness: Option<usize>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Residual {
    /// Judges a residual series against the working precision `n`.
    pub fn of_series(r: &TruncSeries, n: u32) -> Residual {
        let mut witness = None;
        let mut certified = n;
        for k in 0..r.order() {
            let t = r.precs()[k].min(n);
            certified = certified.min(t);
            if witness.is_none() {
                if let Valuation::Exact(v) = r.coeff(k).valuation() {
                    if v < t {
                        witness = Some(k);
                    }
                }
            }
        }
        Self::finish(r.valuation(), certified, witness, n)
    }

    pub fn of_elem(x: &PadicElem, n: u32) -> Residual {
        let t = x.prec().min(n);
        let v = x.valuation();
        let witness = matches!(v, Valuation::Exact(w) if w < t).then_some(0);
        Self::finish(v, t, witness, n)
    }

    fn finish(valuation: Valuation, certified: u32, witness: Option<usize>, n: u32) -> Residual {
        let status = if witness.is_some() {
            Status::Fail
        } else if certified < n {
            Status::Uncertified
        } else {
            Status::Pass
        };
        Residual { valuation, certified, witness, status, note: None }
    }

    fn failed(note: &str) -> Residual {
        Residual {
            valuation: Valuation::Exact(0),
            certified: 0,
            witness: Some(0),
            status: Status::Fail,
            note: Some(note.into()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accept,
    Reject,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductResidual {
    pub g: String,
    pub h: String,
    pub gh: String,
    pub residual: Residual,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterEntry {
    pub f1: ElemJson,
    pub unit: bool,
    /// Whether `F(0)` vanishes at its precision.
    pub constant_term_zero: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct P1Report {
    pub valuation: Valuation,
    pub nonzero: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub note: String,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "M")]
    pub m: usize,
    pub q: u64,
    pub frobenius_reduction_ok: bool,
    pub frobenius_reduction: String,
    pub residue_action: BTreeMap<String, bool>,
    pub commutation: BTreeMap<String, Residual>,
    pub cocycle: Vec<ProductResidual>,
    pub character: BTreeMap<String, CharacterEntry>,
    pub character_homomorphism: Vec<ProductResidual>,
    /// Label pairs with equal `f_1` at precision but different series.
    pub injectivity_collisions: Vec<[String; 2]>,
    pub p1: P1Report,
    /// Precision attrition: `N` minus the least precision any residual
    /// coefficient was certified to.
    pub delta: u32,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

/// Checker for a fixed `P`; reuses the powers of `P` across specs.
#[derive(Clone, Debug)]
pub struct LiftChecker {
    p: TruncSeries,
    table: Option<PowerTable>,
    exec: Execution,
}

/// `f_1 = F'(0)`.
pub fn character(f: &TruncSeries) -> Result<PadicElem> {
    if f.shift() != 0 || f.order() < 2 {
        return Err(Error::InvalidInput("character needs a power series of order at least 2".into()));
    }
    Ok(f.coeff(1))
}

pub fn check_lift(spec: &LiftSpec) -> Result<CheckReport> {
    LiftChecker::new(&spec.p)?.check(spec)
}

impl LiftChecker {
    pub fn new(p: &TruncSeries) -> Result<LiftChecker> {
        if p.shift() != 0 {
            return Err(Error::InvalidInput("P must be a power series".into()));
        }
        let table = p.power_table(p.order()).ok();
        Ok(LiftChecker { p: p.clone(), table, exec: Execution::default() })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// `F∘P - P∘F`.
    pub fn commutation_residual(&self, f: &TruncSeries) -> Result<TruncSeries> {
        let lhs = match &self.table {
            Some(t) if f.order() <= t.order() => f.compose_with(t)?,
            _ => f.compose(&self.p)?,
        };
        let rhs = self.p.compose(f)?;
        lhs.checked_sub(&rhs)
    }

    fn commutation(&self, f: &TruncSeries, n: u32) -> Residual {
        if f.shift() != 0 {
            return Residual::failed("F is not a power series");
        }
        match self.commutation_residual(f) {
            Ok(r) => Residual::of_series(&r, n),
            Err(Error::ConstantTermNotSmall) => Residual::failed("F(0) is not in the maximal ideal"),
            Err(e) => Residual::failed(&e.to_string()),
        }
    }

    pub fn check(&self, spec: &LiftSpec) -> Result<CheckReport> {
        spec.validate()?;
        if !spec.p.eq_at_prec(&self.p) || spec.p.order() != self.p.order() {
            return Err(Error::InvalidInput("spec P differs from the checker's P".into()));
        }
        let field = &spec.field;
        let n = field.n();
        let q = field.q();
        let red = spec.p.reduce_mod_p();
        let frob_ok = red.is_monomial(q as i64);
        let mut report = CheckReport {
            note: ACCEPT_NOTE.into(),
            n,
            m: spec.p.order(),
            q,
            frobenius_reduction_ok: frob_ok,
            frobenius_reduction: red.to_string(),
            residue_action: BTreeMap::new(),
            commutation: BTreeMap::new(),
            cocycle: vec![],
            character: BTreeMap::new(),
            character_homomorphism: vec![],
            injectivity_collisions: vec![],
            p1: P1Report { valuation: Valuation::AtLeast(0), nonzero: false },
            delta: 0,
            verdict: Verdict::Reject,
            reasons: vec![],
        };
        if !frob_ok {
            report.reasons.push(format!("P does not reduce to T^{q}"));
            return Ok(report);
        }

        let comm = self.exec.map(&spec.elements, |e| self.commutation(&e.f, n));
        for (e, r) in spec.elements.iter().zip(comm) {
            report.commutation.insert(e.label.clone(), r);
        }

        let cocycles = self.exec.map(&spec.products, |[g, h, gh]| {
            let (fg, fh, fgh) = (spec.element(g).unwrap(), spec.element(h).unwrap(), spec.element(gh).unwrap());
            let residual = match fh.compose(fg).and_then(|c| c.checked_sub(fgh)) {
                Ok(r) => Residual::of_series(&r, n),
                Err(Error::ConstantTermNotSmall) => Residual::failed("F_g(0) is not in the maximal ideal"),
                Err(e) => Residual::failed(&e.to_string()),
            };
            ProductResidual { g: g.clone(), h: h.clone(), gh: gh.clone(), residual }
        });
        report.cocycle = cocycles;

        let mut f1s: BTreeMap<&str, PadicElem> = BTreeMap::new();
        for e in &spec.elements {
            let Ok(f1) = character(&e.f) else {
                report.reasons.push(format!("{}: series too short for a character", e.label));
                continue;
            };
            report.character.insert(
                e.label.clone(),
                CharacterEntry { f1: f1.with_prec(n).to_json(), unit: f1.is_unit(), constant_term_zero: e.f.coeff(0).is_zero() },
            );
            f1s.insert(&e.label, f1);
        }
        // F_g'(0) is only multiplicative when the F_g fix 0.
        let fixes_zero = |l: &str| report.character.get(l).is_some_and(|c| c.constant_term_zero);
        for [g, h, gh] in &spec.products {
            if ![g, h, gh].iter().all(|l| fixes_zero(l)) {
                continue;
            }
            if let (Some(a), Some(b), Some(c)) = (f1s.get(g.as_str()), f1s.get(h.as_str()), f1s.get(gh.as_str())) {
                let r = &(a * b) - c;
                report.character_homomorphism.push(ProductResidual {
                    g: g.clone(),
                    h: h.clone(),
                    gh: gh.clone(),
                    residual: Residual::of_elem(&r, n),
                });
            }
        }
        let labels: Vec<&str> = f1s.keys().copied().collect();
        for (i, a) in labels.iter().enumerate() {
            for b in &labels[i + 1..] {
                let same_f1 = f1s[a].with_prec(n).eq_at_prec(&f1s[b].with_prec(n));
                let same_f = spec.element(a).unwrap().with_prec(n).eq_at_prec(&spec.element(b).unwrap().with_prec(n));
                if same_f1 && !same_f {
                    report.injectivity_collisions.push([a.to_string(), b.to_string()]);
                }
            }
        }

        if let Some(ra) = &spec.residue_action {
            for (label, want) in ra {
                let got = spec.element(label).unwrap().reduce_mod_p();
                report.residue_action.insert(label.clone(), residue_agrees(&got, want));
            }
        }

        let p1 = if spec.p.order() >= 2 { spec.p.coeff(1) } else { field.zero().with_prec(0) };
        let p1v = p1.valuation();
        report.p1 = P1Report { valuation: p1v, nonzero: p1v.is_exact() };

        // Verdict.
        let mut reject = vec![];
        let mut inconclusive = vec![];
        let mut min_cert = n;
        for (l, r) in &report.commutation {
            min_cert = min_cert.min(r.certified);
            match r.status {
                Status::Fail => reject.push(format!("commutation fails for {l} at coefficient {}", r.witness.unwrap())),
                Status::Uncertified => inconclusive.push(format!("commutation for {l} certified only to {} digits", r.certified)),
                Status::Pass => {}
            }
        }
        for (kind, list) in [("cocycle", &report.cocycle), ("character homomorphism", &report.character_homomorphism)] {
            for pr in list {
                let r = &pr.residual;
                min_cert = min_cert.min(r.certified);
                let what = format!("{kind} ({}, {}, {})", pr.g, pr.h, pr.gh);
                match r.status {
                    Status::Fail => reject.push(format!("{what} fails at coefficient {}", r.witness.unwrap())),
                    Status::Uncertified => inconclusive.push(format!("{what} certified only to {} digits", r.certified)),
                    Status::Pass => {}
                }
            }
        }
        for (l, c) in &report.character {
            if !c.unit {
                reject.push(format!("f_1({l}) is not a unit"));
            }
        }
        for (l, ok) in &report.residue_action {
            if !ok {
                reject.push(format!("reduction of F_{l} differs from the given residue action"));
            }
        }
        if !p1v.is_exact() {
            if p1v.lower() >= field.capacity() {
                reject.push("P'(0) = 0".into());
            } else {
                inconclusive.push(format!("P'(0) vanishes to the available {} digits", p1v.lower()));
            }
        }
        report.delta = n - min_cert;
        report.verdict = if !reject.is_empty() {
            Verdict::Reject
        } else if !inconclusive.is_empty() || report.reasons.iter().any(|_| true) {
            Verdict::Inconclusive
        } else {
            Verdict::Accept
        };
        report.reasons.extend(reject);
        report.reasons.extend(inconclusive);
        Ok(report)
    }
}

fn residue_agrees(got: &ResidueSeries, want: &ResidueSeries) -> bool {
    let lo = got.shift.max(want.shift);
    let hi = (got.shift + got.coeffs.len() as i64).min(want.shift + want.coeffs.len() as i64);
    (lo..hi).all(|d| {
        let a = &got.coeffs[(d - got.shift) as usize];
        let b = &want.coeffs[(d - want.shift) as usize];
        match (a, b) {
            (Some(a), Some(b)) => a == b,
            _ => true,
        }
    }) && {
        // Coefficients below the overlap must vanish on both sides.
        let zero = |s: &ResidueSeries, upto: i64| {
            s.coeffs.iter().enumerate().filter(|(k, _)| s.shift + (*k as i64) < upto).all(|(_, c)| {
                c.as_ref().is_none_or(|c| c.iter().all(|&x| x == 0))
            })
        };
        zero(got, lo) && zero(want, lo)
    }
}

/// Result of conjugating a spec by `T ↦ T + a`.
#[derive(Clone, Debug)]
pub struct Normalized {
    pub spec: LiftSpec,
    pub a: PadicElem,
    pub fixed_point_residual: Valuation,
    /// `val(F_g(0))` after conjugation, by label.
    pub constant_terms: BTreeMap<String, Valuation>,
    pub constant_terms_ok: bool,
}

/// Conjugates the whole spec by `T ↦ T + a` where `a` is the small fixed
/// point of `P`, so that the new `P` has zero constant term. Series are
/// truncated to the common prefix still certified to `N` digits.
pub fn normalize_lift(spec: &LiftSpec) -> Result<Normalized> {
    spec.validate()?;
    let field = &spec.field;
    let n = field.n();
    let fp = fixed_point(&spec.p)?;
    let a = fp.point.clone();
    let conj = |s: &TruncSeries| -> Result<TruncSeries> {
        if a.is_zero() {
            return Ok(s.clone());
        }
        let shifted = s.taylor_shift(&a)?;
        shifted.checked_sub(&TruncSeries::monomial(&a, 0, s.order()))
    };
    let p = conj(&spec.p)?;
    let fs = spec.elements.iter().map(|e| conj(&e.f)).collect::<Result<Vec<_>>>()?;
    let mut m = p.certified_prefix(n);
    for f in &fs {
        m = m.min(f.certified_prefix(n));
    }
    if m < 2 {
        return Err(Error::PrecisionExhausted(format!(
            "conjugation by a shift of valuation {} leaves fewer than 2 coefficients at precision {n}",
            a.valuation()
        )));
    }
    let mut constant_terms = BTreeMap::new();
    let mut ok = true;
    let elements = spec
        .elements
        .iter()
        .zip(fs)
        .map(|(e, f)| {
            let f = f.truncate(m);
            let v = f.coeff(0).valuation();
            ok &= !v.is_exact() || v.lower() >= n;
            constant_terms.insert(e.label.clone(), v);
            LiftElement { label: e.label.clone(), f }
        })
        .collect();
    let spec = LiftSpec {
        field: field.clone(),
        p: p.truncate(m),
        elements,
        products: spec.products.clone(),
        residue_action: spec.residue_action.clone(),
    };
    Ok(Normalized { spec, a, fixed_point_residual: fp.residual, constant_terms, constant_terms_ok: ok })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeadingEntry {
    pub f1: ElemJson,
    /// Lowest degree with a nonzero coefficient in `F_g - T`.
    pub lowest_degree: Option<usize>,
    /// Valuation of `f_1 π_k - π_k f_1^k`.
    pub constraint: Valuation,
    pub constraint_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeadingTermReport {
    /// Lowest degree of `P` with a coefficient nonzero at precision.
    pub k: Option<usize>,
    pub pi_k: Option<ElemJson>,
    pub entries: BTreeMap<String, LeadingEntry>,
}

/// The leading-term data `(k, π_k)` of `P` and, for each `g`, `f_1(g)` and
/// the constraint `f_1(g) π_k = π_k f_1(g)^k`.
pub fn leading_term_report(spec: &LiftSpec) -> Result<LeadingTermReport> {
    spec.validate()?;
    let n = spec.field.n();
    let k = (0..spec.p.order()).find(|&k| spec.p.coeff(k).valuation().is_exact());
    let pi_k = k.map(|k| spec.p.coeff(k));
    let mut entries = BTreeMap::new();
    for e in &spec.elements {
        let f1 = character(&e.f)?;
        let t = TruncSeries::var(&spec.field, e.f.order());
        let diff = e.f.checked_sub(&t)?;
        let lowest = (0..diff.order()).find(|&i| diff.coeff(i).valuation().is_exact());
        let constraint = match (&pi_k, k) {
            (Some(pk), Some(k)) => (&(&f1 * pk) - &(pk * &f1.pow(k as u64))).with_prec(n).valuation(),
            _ => Valuation::AtLeast(0),
        };
        let ok = !constraint.is_exact();
        entries.insert(e.label.clone(), LeadingEntry { f1: f1.with_prec(n).to_json(), lowest_degree: lowest, constraint, constraint_ok: ok });
    }
    Ok(LeadingTermReport { k, pi_k: pi_k.map(|x| x.with_prec(n).to_json()), entries })
}

// ---- JSON ------------------------------------------------------------------

/// A residue-field element: an integer (for `f = 1`) or `f` coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResidueCoeffJson {
    Int(DecInt),
    Coords(Vec<DecInt>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementJson {
    pub label: String,
    #[serde(rename = "F")]
    pub f: SeriesJson,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftSpecJson {
    pub field: FieldDesc,
    #[serde(rename = "P")]
    pub p: SeriesJson,
    pub elements: Vec<ElementJson>,
    #[serde(default)]
    pub products: Vec<[String; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residue_action: Option<BTreeMap<String, Vec<ResidueCoeffJson>>>,
}

impl LiftSpec {
    pub fn from_json(j: &LiftSpecJson) -> Result<LiftSpec> {
        let field = PadicField::new(&j.field)?;
        let p = TruncSeries::from_json(&field, &j.p)?;
        let elements = j
            .elements
            .iter()
            .map(|e| Ok(LiftElement { label: e.label.clone(), f: TruncSeries::from_json(&field, &e.f)? }))
            .collect::<Result<Vec<_>>>()?;
        let pb = num_bigint::BigInt::from(field.p());
        let residue_action = match &j.residue_action {
            None => None,
            Some(map) => {
                let mut out = BTreeMap::new();
                for (l, cs) in map {
                    let coeffs = cs
                        .iter()
                        .map(|c| {
                            let mut v: Vec<u64> = match c {
                                ResidueCoeffJson::Int(i) => vec![reduce_u64(&i.0, &pb)],
                                ResidueCoeffJson::Coords(cs) => cs.iter().map(|i| reduce_u64(&i.0, &pb)).collect(),
                            };
                            if v.len() > field.f() {
                                return Err(Error::InvalidInput(format!("residue coefficient for {l} has too many coordinates")));
                            }
                            v.resize(field.f(), 0);
                            Ok(Some(v))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    out.insert(l.clone(), ResidueSeries { shift: 0, coeffs });
                }
                Some(out)
            }
        };
        let spec = LiftSpec { field, p, elements, products: j.products.clone(), residue_action };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> LiftSpecJson {
        LiftSpecJson {
            field: self.field.desc().clone(),
            p: self.p.to_json(),
            elements: self.elements.iter().map(|e| ElementJson { label: e.label.clone(), f: e.f.to_json() }).collect(),
            products: self.products.clone(),
            residue_action: self.residue_action.as_ref().map(|m| {
                m.iter()
                    .map(|(l, s)| {
                        let cs = s
                            .coeffs
                            .iter()
                            .map(|c| {
                                let c = c.clone().unwrap_or_default();
                                ResidueCoeffJson::Coords(c.into_iter().map(|x| DecInt(x.into())).collect())
                            })
                            .collect();
                        (l.clone(), cs)
                    })
                    .collect()
            }),
        }
    }
}

fn reduce_u64(x: &num_bigint::BigInt, p: &num_bigint::BigInt) -> u64 {
    use num_integer::Integer;
    use num_traits::ToPrimitive;
    x.mod_floor(p).to_u64().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lubin_tate::cyclotomic_lift;
    use num_bigint::BigInt;

    fn q3() -> Arc<PadicField> {
        PadicField::new(&FieldDesc::qp(3, 8)).unwrap()
    }

    fn big(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn cyclotomic_spec_is_accepted() {
        let spec = cyclotomic_lift(&q3(), &big(&[4, 7, 28]), 32).unwrap();
        assert_eq!(spec.products, vec![["4".to_string(), "7".into(), "28".into()]]);
        let rep = check_lift(&spec).unwrap();
        assert_eq!(rep.verdict, Verdict::Accept, "{:?}", rep.reasons);
        assert_eq!(rep.delta, 0);
        let f1: Vec<String> = rep.character.values().map(|c| c.f1.coords[0].0.to_string()).collect();
        assert_eq!(f1, vec!["28", "4", "7"]);
    }

    #[test]
    fn identity_only_spec_is_accepted() {
        let f = q3();
        let p = TruncSeries::from_i64s(&f, &[0, 3, 0, 1, 3], 16);
        let spec = LiftSpec {
            field: f.clone(),
            p,
            elements: vec![LiftElement { label: "1".into(), f: TruncSeries::var(&f, 16) }],
            products: vec![["1".into(), "1".into(), "1".into()]],
            residue_action: None,
        };
        assert_eq!(check_lift(&spec).unwrap().verdict, Verdict::Accept);
    }

    /// First coefficient of `a∘b - c∘d` with valuation below 8, by naive
    /// power expansion.
    fn naive_first_failure(f: &TruncSeries, p: &TruncSeries) -> Option<usize> {
        let m = f.order();
        let expand = |outer: &TruncSeries, inner: &TruncSeries| {
            let mut acc = TruncSeries::zero(outer.field(), m);
            let mut pow = TruncSeries::one(outer.field(), m);
            for k in 0..m {
                acc = &acc + &pow.scale(&outer.coeff(k)).unwrap();
                pow = &pow * inner;
            }
            acc
        };
        let r = &expand(f, p) - &expand(p, f);
        (0..m).find(|&k| r.coeff(k).valuation().lower() < 8)
    }

    #[test]
    fn perturbation_is_rejected_with_witness() {
        let f = q3();
        let mut spec = cyclotomic_lift(&f, &big(&[4, 7, 28]), 24).unwrap();
        let bump = TruncSeries::from_i64s(&f, &[0, 0, 3], 24);
        spec.elements[0].f = &spec.elements[0].f + &bump;
        let rep = check_lift(&spec).unwrap();
        assert_eq!(rep.verdict, Verdict::Reject);
        let r = &rep.commutation["4"];
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.witness, naive_first_failure(&spec.elements[0].f, &spec.p));
    }

    #[test]
    fn malformed_products_are_reported() {
        let mut spec = cyclotomic_lift(&q3(), &big(&[4]), 8).unwrap();
        spec.products.push(["4".into(), "5".into(), "20".into()]);
        assert!(matches!(check_lift(&spec), Err(Error::MalformedGroupData(_))));
    }

    #[test]
    fn non_frobenius_p_is_rejected() {
        let f = q3();
        let mut spec = cyclotomic_lift(&f, &big(&[4]), 8).unwrap();
        spec.p = TruncSeries::from_i64s(&f, &[0, 3, 0, 2], 8);
        let rep = check_lift(&spec).unwrap();
        assert_eq!(rep.verdict, Verdict::Reject);
        assert!(!rep.frobenius_reduction_ok);
    }

    #[test]
    fn character_examples() {
        let f = q3();
        let c4 = TruncSeries::binomial_series_int(&f, &BigInt::from(4), 8);
        assert_eq!(character(&c4).unwrap(), f.from_i64(4));
        let t2 = TruncSeries::from_i64s(&f, &[0, 1, 1], 8);
        assert_eq!(character(&t2).unwrap(), f.one());
    }

    #[test]
    fn normalize_round_trip() {
        let f = q3();
        let spec = cyclotomic_lift(&f, &big(&[4, 7, 28]), 40).unwrap();
        let same = normalize_lift(&spec).unwrap();
        assert!(same.a.is_zero());
        assert!(same.spec.p.eq_at_prec(&spec.p));
        let b = f.from_i64(6);
        let conj = |s: &TruncSeries| &s.taylor_shift(&b).unwrap() - &TruncSeries::monomial(&b, 0, s.order());
        let moved = LiftSpec {
            p: conj(&spec.p),
            elements: spec.elements.iter().map(|e| LiftElement { label: e.label.clone(), f: conj(&e.f) }).collect(),
            ..spec.clone()
        };
        let back = normalize_lift(&moved).unwrap();
        assert!(back.a.eq_at_prec(&b.neg()));
        assert!(back.constant_terms_ok);
        let m = back.spec.p.order();
        assert!(back.spec.p.eq_at_prec(&spec.p.truncate(m)));
        for (e, o) in back.spec.elements.iter().zip(&spec.elements) {
            assert!(e.f.eq_at_prec(&o.f.truncate(m)));
            assert!(e.f.prec() >= 6);
        }
        assert_eq!(check_lift(&back.spec).unwrap().verdict, Verdict::Accept);
        let unit_p = LiftSpec { p: TruncSeries::from_i64s(&f, &[1, 3, 3, 1], 8), ..spec };
        assert!(matches!(normalize_lift(&unit_p), Err(Error::NoSmallFixedPoint(_))));
    }

    #[test]
    fn leading_terms() {
        let f = q3();
        let spec = cyclotomic_lift(&f, &big(&[4, 7]), 16).unwrap();
        let rep = leading_term_report(&spec).unwrap();
        assert_eq!(rep.k, Some(1));
        assert_eq!(rep.pi_k.unwrap().coords[0].0, BigInt::from(3));
        // P = T^3, F = -T: the torsion case with f_1^{q-1} = 1.
        let torsion = LiftSpec {
            field: f.clone(),
            p: TruncSeries::from_i64s(&f, &[0, 0, 0, 1], 16),
            elements: vec![LiftElement { label: "z".into(), f: TruncSeries::from_i64s(&f, &[0, -1], 16) }],
            products: vec![],
            residue_action: None,
        };
        let rep = leading_term_report(&torsion).unwrap();
        assert_eq!(rep.k, Some(3));
        assert!(rep.entries["z"].constraint_ok);
    }

    #[test]
    fn json_round_trip_and_residue_action() {
        let f = q3();
        let mut spec = cyclotomic_lift(&f, &big(&[4]), 8).unwrap();
        let mut ra = BTreeMap::new();
        ra.insert("4".to_string(), spec.elements[0].f.reduce_mod_p());
        spec.residue_action = Some(ra);
        let text = serde_json::to_string(&spec.to_json()).unwrap();
        let back = LiftSpec::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        let rep = check_lift(&back).unwrap();
        assert_eq!(rep.verdict, Verdict::Accept);
        assert!(rep.residue_action["4"]);
    }
}
