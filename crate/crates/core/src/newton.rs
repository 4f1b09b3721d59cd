//! Newton polygons of truncated series and small fixed points of
//! Frobenius-type series `P ≡ T^q mod ϖ`.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{PadicElem, Valuation};
use crate::series::TruncSeries;

/// Lower convex hull of the points `(k, val_p(c_k))`, as its vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewtonPolygon {
    pub vertices: Vec<(usize, Ratio<i64>)>,
}

/// One edge of a polygon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub slope: Ratio<i64>,
    pub length: usize,
}

impl NewtonPolygon {
    pub fn segments(&self) -> Vec<Segment> {
        self.vertices
            .windows(2)
            .map(|w| {
                let len = w[1].0 - w[0].0;
                Segment { slope: (w[1].1 - w[0].1) / Ratio::from_integer(len as i64), length: len }
            })
            .collect()
    }

    pub fn to_json(&self) -> Vec<VertexJson> {
        self.vertices
            .iter()
            .map(|(k, v)| VertexJson { deg: *k, valp: format!("{}/{}", v.numer(), v.denom()) })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexJson {
    pub deg: usize,
    pub valp: String,
}

fn cross(o: (i64, Ratio<i64>), a: (i64, Ratio<i64>), b: (i64, Ratio<i64>)) -> Ratio<i64> {
    Ratio::from_integer(a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * Ratio::from_integer(b.0 - o.0)
}

/// Lower hull of points sorted by abscissa, collinear points removed.
fn lower_hull(points: &[(usize, Ratio<i64>)]) -> Vec<(usize, Ratio<i64>)> {
    let mut hull: Vec<(usize, Ratio<i64>)> = Vec::new();
    for &pt in points {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let c = cross((o.0 as i64, o.1), (a.0 as i64, a.1), (pt.0 as i64, pt.1));
            if c <= Ratio::from_integer(0) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    hull
}

/// Newton polygon of `f` over degrees `0..=degree_cap`, with `val_p = val_ϖ/e`.
///
/// Coefficients that vanish at their precision are excluded from the hull.
/// Those before the first or after the last nonzero coefficient are ignored;
/// one in between whose precision bound falls strictly below the hull could
/// move a vertex, which is reported as [`Error::PrecisionAmbiguous`].
pub fn newton_polygon(f: &TruncSeries, degree_cap: usize) -> Result<NewtonPolygon> {
    if f.shift() != 0 {
        return Err(Error::InvalidInput("Newton polygon needs a power series".into()));
    }
    let e = f.field().e() as i64;
    let top = degree_cap.min(f.order().saturating_sub(1));
    let mut known = vec![];
    let mut unknown = vec![];
    for k in 0..=top.min(f.order().saturating_sub(1)) {
        if f.order() == 0 {
            break;
        }
        match f.coeff(k).valuation() {
            Valuation::Exact(v) => known.push((k, Ratio::new(v as i64, e))),
            Valuation::AtLeast(p) => unknown.push((k, Ratio::new(p as i64, e))),
        }
    }
    let hull = lower_hull(&known);
    if let (Some(first), Some(last)) = (hull.first(), hull.last()) {
        for &(k, bound) in &unknown {
            if k <= first.0 || k >= last.0 {
                continue;
            }
            let w = hull.windows(2).find(|w| w[0].0 < k && k < w[1].0).expect("interior point");
            let t = Ratio::new((k - w[0].0) as i64, (w[1].0 - w[0].0) as i64);
            let line = w[0].1 + (w[1].1 - w[0].1) * t;
            if bound < line {
                return Err(Error::PrecisionAmbiguous(k));
            }
        }
    }
    Ok(NewtonPolygon { vertices: hull })
}

/// A fixed point `a ∈ 𝔪_E` of `P` with its certified residual.
#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub point: PadicElem,
    /// `val_ϖ(P(a) - a)`, usually a lower bound set by the precision of `P`.
    pub residual: Valuation,
    pub iterations: usize,
}

/// The fixed point of `P` in `𝔪_E` on the first segment of the Newton
/// polygon of `P(T) - T`, by Newton iteration from `a_0 = P(0)`.
///
/// Requires `P ≡ T^q mod ϖ` and `val(P(0)) >= 1`. Since `P' ≡ 0 mod ϖ`,
/// `P'(a) - 1` is a unit on `𝔪_E`, so the fixed point there is unique and
/// the iteration converges quadratically. The residual is recomputed
/// independently before returning.
pub fn fixed_point(p: &TruncSeries) -> Result<FixedPoint> {
    let field = p.field().clone();
    if p.shift() != 0 {
        return Err(Error::InvalidInput("fixed point needs a power series".into()));
    }
    let p0 = p.coeff(0);
    let v0 = match p0.valuation() {
        Valuation::Exact(0) => {
            return Err(Error::NoSmallFixedPoint("P(0) is a unit".into()));
        }
        Valuation::AtLeast(prec) => {
            let z = field.zero().with_prec(prec);
            return Ok(FixedPoint { point: z, residual: Valuation::AtLeast(prec.min(field.n())), iterations: 0 });
        }
        Valuation::Exact(v) => v,
    };
    if !p.reduce_mod_p().is_monomial(field.q() as i64) {
        return Err(Error::NotDistinguished);
    }
    let t = TruncSeries::var(&field, p.order());
    let pm = p - &t;
    let poly = newton_polygon(&pm, field.q() as usize)?;
    let segs = poly.segments();
    match segs.first() {
        Some(s) if s.length == 1 && s.slope < Ratio::from_integer(0) && poly.vertices[0].0 == 0 => {}
        _ => {
            return Err(Error::NoSmallFixedPoint(
                "first segment of the Newton polygon of P(T) - T is not of length 1".into(),
            ))
        }
    }
    let dp = p.derivative()?;
    let one = field.one();
    let cap = field.capacity();
    let mut a = field.elem_raw(p0.reduced_coords(), cap);
    let mut last_res = u32::MAX;
    for it in 1..=64 {
        let pa = pm.eval(&a)?;
        let r = pa.valuation();
        if !r.is_exact() {
            return finish(p, a, it);
        }
        if last_res != u32::MAX && r.lower() <= last_res {
            break;
        }
        last_res = r.lower();
        let den = &dp.eval(&a)? - &one;
        let step = pa.div_exact(&den)?;
        let next = &a - &step;
        a = field.elem_raw(next.reduced_coords(), cap);
    }
    let res = pm.eval(&a)?;
    Err(Error::PrecisionExhausted(format!(
        "Newton iteration stalled with residual valuation {} (expected at least {v0})",
        res.valuation()
    )))
}

fn finish(p: &TruncSeries, a: PadicElem, iterations: usize) -> Result<FixedPoint> {
    // Independent check: evaluate P(a) - a directly.
    let pa = p.eval(&a)?;
    let r = (&pa - &a).valuation();
    if r.is_exact() {
        return Err(Error::PrecisionExhausted(format!("residual {r} after convergence")));
    }
    let prec = r.lower();
    let point = a.with_prec(prec);
    Ok(FixedPoint { point, residual: Valuation::AtLeast(prec), iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{FieldDesc, PadicField};
    use num_bigint::BigInt;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn q3() -> Arc<PadicField> {
        PadicField::new(&FieldDesc::qp(3, 8)).unwrap()
    }

    fn r(n: i64, d: i64) -> Ratio<i64> {
        Ratio::new(n, d)
    }

    #[test]
    fn polygon_examples() {
        let f = q3();
        let s = TruncSeries::from_i64s(&f, &[3, -1, 0, 1], 4);
        let poly = newton_polygon(&s, 3).unwrap();
        let segs: Vec<_> = poly.segments().into_iter().map(|s| (s.slope, s.length)).collect();
        assert_eq!(segs, vec![(r(-1, 1), 1), (r(0, 1), 2)]);
        let t = TruncSeries::var(&f, 4);
        let pt = newton_polygon(&t, 3).unwrap();
        assert_eq!(pt.vertices, vec![(1, r(0, 1))]);
        assert!(pt.segments().is_empty());
        let p = TruncSeries::from_i64s(&f, &[3, 3, 0, 1], 4);
        let pm = &p - &TruncSeries::var(&f, 4);
        let first = &newton_polygon(&pm, 3).unwrap().segments()[0];
        assert_eq!((first.slope, first.length), (r(-1, 1), 1));
    }

    #[test]
    fn ramified_valuations_are_scaled() {
        let g = PadicField::new(&FieldDesc::ramified(3, &[-3, 0, 1], 8)).unwrap();
        let pi = g.uniformizer();
        let s = TruncSeries::new(&g, 0, &[pi.clone(), g.one()]).unwrap();
        let poly = newton_polygon(&s, 1).unwrap();
        assert_eq!(poly.vertices, vec![(0, r(1, 2)), (1, r(0, 1))]);
    }

    #[test]
    fn ambiguous_vertex_is_reported() {
        let f = q3();
        // 3^6 + 0·T (known to 1 digit) + T^2: the middle point could dip.
        let c = [f.from_i64(729), f.zero().with_prec(1), f.one()];
        let s = TruncSeries::new(&f, 0, &c).unwrap();
        assert_eq!(newton_polygon(&s, 2).unwrap_err(), Error::PrecisionAmbiguous(1));
    }

    #[test]
    fn fixed_point_examples() {
        let f = q3();
        let p = TruncSeries::binomial_series_int(&f, &BigInt::from(3), 32);
        let fp = fixed_point(&p).unwrap();
        assert!(fp.point.is_zero());
        let unit = TruncSeries::from_i64s(&f, &[1, 3, 3, 1], 32);
        assert!(matches!(fixed_point(&unit), Err(Error::NoSmallFixedPoint(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(30))]
        #[test]
        fn conjugated_cyclotomic_fixed_point(b in 1i64..500) {
            let f = q3();
            let bb = f.from_i64(3 * b);
            // S(T + b) - b has fixed point -b when S(0) = 0.
            let s = TruncSeries::binomial_series_int(&f, &BigInt::from(3), 40);
            let pb = &s.taylor_shift(&bb).unwrap() - &TruncSeries::monomial(&bb, 0, 40);
            let fp = fixed_point(&pb).unwrap();
            prop_assert!(fp.point.eq_at_prec(&bb.neg()));
            prop_assert!(fp.residual.lower() >= 8);
            let res = &pb.eval(&fp.point).unwrap() - &fp.point;
            prop_assert!(res.valuation().lower() >= 8);
            prop_assert_eq!(fp.point.val_p().0, pb.coeff(0).val_p().0);
        }

        #[test]
        fn polygon_of_product_merges_slopes(
            a in proptest::collection::vec(1i64..200, 2..6),
            b in proptest::collection::vec(1i64..200, 2..6),
        ) {
            let f = q3();
            let m = a.len() + b.len();
            let sa = TruncSeries::from_i64s(&f, &a, m);
            let sb = TruncSeries::from_i64s(&f, &b, m);
            let prod = &sa * &sb;
            let slopes = |s: &TruncSeries, cap: usize| {
                let mut v = vec![];
                for seg in newton_polygon(s, cap).unwrap().segments() {
                    v.extend(std::iter::repeat_n(seg.slope, seg.length));
                }
                v.sort();
                v
            };
            let mut both = slopes(&sa, a.len() - 1);
            both.extend(slopes(&sb, b.len() - 1));
            both.sort();
            prop_assert_eq!(slopes(&prod, m - 2), both);
        }
    }
}
