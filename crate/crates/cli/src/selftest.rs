//! Seeded randomized consistency checks across the library.

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use padic_lift::lift_checker::{check_lift, Verdict};
use padic_lift::lubin_tate::cyclotomic_lift;
use padic_lift::newton::fixed_point;
use padic_lift::weights::{circulant_det_eigen, circulant_det_elimination, WeightVector};
use padic_lift::{Execution, FieldDesc, PadicField, Result, TruncSeries};

fn random_unit(rng: &mut ChaCha8Rng, p: u64) -> i64 {
    loop {
        let c: i64 = rng.gen_range(2..500);
        if !(c as u64).is_multiple_of(p) {
            return c;
        }
    }
}

pub fn run(seed: u64, cases: usize, exec: Execution) -> Result<(Value, u8)> {
    let per_case = exec.map_range(cases, |case| one_case(seed, case));
    let mut failures: Vec<String> = vec![];
    for r in per_case {
        failures.extend(r?);
    }
    let code = if failures.is_empty() { 0 } else { 3 };
    Ok((json!({"seed": seed, "cases": cases, "failures": failures, "ok": code == 0}), code))
}

fn one_case(seed: u64, case: usize) -> Result<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (case as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut failures = vec![];
    let p = [2u64, 3, 5][rng.gen_range(0..3)];
    let field = PadicField::new(&FieldDesc::qp(p, 8))?;
    let c = random_unit(&mut rng, p);
    let spec = cyclotomic_lift(&field, &[BigInt::from(c)], 24)?;
    if check_lift(&spec)?.verdict != Verdict::Accept {
        failures.push(format!("case {case}: cyclotomic exponent {c} over Q_{p} not accepted"));
    }
    let mut bad = spec.clone();
    let j = rng.gen_range(1..5u32);
    let k = rng.gen_range(1..24);
    let bump = TruncSeries::monomial(&field.from_i64(p as i64).pow(j as u64), k, 24);
    bad.elements[0].f = &bad.elements[0].f + &bump;
    if check_lift(&bad)?.verdict != Verdict::Reject {
        failures.push(format!("case {case}: perturbation p^{j}·T^{k} not rejected"));
    }
    let b = field.from_i64(p as i64 * rng.gen_range(1..100));
    let moved = &spec.p.taylor_shift(&b)? - &TruncSeries::monomial(&b, 0, 24);
    let fp = fixed_point(&moved)?;
    if fp.residual.lower() < 8 || !fp.point.with_prec(8).eq_at_prec(&b.neg().with_prec(8)) {
        failures.push(format!("case {case}: fixed point of a shifted P is off"));
    }
    let d = rng.gen_range(2..7);
    let w = WeightVector::new((0..d).map(|_| rng.gen_range(0..6)).collect())?;
    if circulant_det_elimination(&w) != circulant_det_eigen(&w) {
        failures.push(format!("case {case}: circulant formulas disagree on {:?}", w.a));
    }
    Ok(failures)
}
