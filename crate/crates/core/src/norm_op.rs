//! The norm operator `𝒩` attached to a Frobenius lift `P`: `O_E[[T]]` is free
//! of rank `q` over `O_E[[P(T)]]` with basis `1, T, …, T^{q-1}`, `𝒩(h)` is the
//! determinant of multiplication by `h` written in the variable `S = P(T)`,
//! then renamed back to `T`.
//!
//! Coordinates are found by the iteration `r ← r − Σ r_{i+qk} T^i P^k`, which
//! gains a factor of `ϖ` per round because `P ≡ T^q mod ϖ`. Precision of the
//! coordinates comes from the weighted Gauss norm `|Σ a_j T^j|_λ =
//! min(val a_j + λj)`, for which the decomposition is an isometry as long as
//! `T^q` strictly dominates `P`; this holds for every `λ` below
//! `min_{j<q} val(π_j)/(q-j)`.

use std::sync::Arc;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::padic::{PadicField, Valuation};
use crate::series::{axpy, vlow, TruncSeries};

/// Coordinates over `O_E[[P]]` of series known modulo `T^l`.
#[derive(Clone, Debug)]
pub struct Basis {
    field: Arc<PadicField>,
    q: usize,
    l: usize,
    /// `P^k mod T^l` for `k = 0, …, (l-1)/q`, flat raw coefficients.
    powers: Vec<Vec<u128>>,
    lambda: Ratio<i64>,
    p_prec: u32,
}

fn check_frobenius(p: &TruncSeries) -> Result<()> {
    if p.shift() != 0 {
        return Err(Error::InvalidInput("P must be a power series".into()));
    }
    if p.coeff(0).valuation().is_exact() {
        return Err(Error::InvalidInput("P(0) must vanish".into()));
    }
    let q = p.field().q();
    if p.order() as u64 <= q || !p.reduce_mod_p().is_monomial(q as i64) {
        return Err(Error::NotDistinguished);
    }
    Ok(())
}

impl Basis {
    /// Prepares coordinates for series known modulo `T^l` (at most the
    /// order of `P`).
    pub fn new(p: &TruncSeries, l: usize) -> Result<Basis> {
        check_frobenius(p)?;
        let field = p.field().clone();
        let q = field.q() as usize;
        let l = l.min(p.order());
        let d = field.dim();
        let lambda = (0..q)
            .map(|j| {
                let v = vlow(&field, p.raw_coeff(j), p.precs()[j]) as i64;
                Ratio::new(v, (q - j) as i64)
            })
            .min()
            .unwrap();
        let pt = p.truncate(l);
        let kmax = (l.saturating_sub(1)) / q;
        let mut powers = vec![];
        let mut cur = TruncSeries::one(&field, l);
        for k in 0..=kmax {
            if k > 0 {
                cur = cur.checked_mul(&pt)?;
            }
            let mut raw = cur.raw().to_vec();
            raw.resize(l * d, 0);
            powers.push(raw);
        }
        let p_prec = p.precs()[..l].iter().copied().min().unwrap_or(field.capacity());
        Ok(Basis { field, q, l, powers, lambda, p_prec })
    }

    pub fn lambda(&self) -> Ratio<i64> {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.l
    }

    pub fn is_empty(&self) -> bool {
        self.l == 0
    }

    /// `d_0, …, d_{q-1}` with `g = Σ T^i d_i(P(T))`, as series in `S`.
    pub fn coords(&self, g: &TruncSeries) -> Result<Vec<TruncSeries>> {
        if g.shift() != 0 {
            return Err(Error::InvalidInput("coordinates need a power series".into()));
        }
        let field = &self.field;
        let (d, q) = (field.dim(), self.q);
        let lg = g.order().min(self.l);
        let ms = lg.div_ceil(q).max(1);
        let mut r = g.raw()[..lg * d].to_vec();
        let mut c = vec![vec![0u128; ms * d]; q];
        let cap = field.capacity();
        let mut rounds = 0;
        while !PadicField::is_zero_raw(&r) {
            rounds += 1;
            if rounds > cap as usize + 2 {
                return Err(Error::NotDistinguished);
            }
            let snap = r.clone();
            for t in 0..lg {
                let rt = &snap[t * d..(t + 1) * d];
                if PadicField::is_zero_raw(rt) {
                    continue;
                }
                let (i, k) = (t % q, t / q);
                field.add_assign(&mut c[i][k * d..(k + 1) * d], rt);
                let neg: Vec<u128> = rt.iter().map(|&x| field.ring().neg(x)).collect();
                axpy(field, &mut r[i * d..], &neg, &self.powers[k][..(lg - i) * d]);
            }
        }
        // For every 0 < μ <= λ an error of weighted size B(μ) in g moves
        // c_ik by at most B(μ) - μ(i + qk), where B(μ) is the weighted size of
        // the unknown part of g; take the best μ among the breakpoints.
        let lam = self.lambda;
        let int = |x: usize| Ratio::from_integer(x as i64);
        let precs_g = &g.precs()[..lg];
        let mut mus: Vec<Ratio<i64>> = vec![lam, Ratio::new(self.p_prec as i64, lg.max(1) as i64)];
        for (j, &pj) in precs_g.iter().enumerate() {
            mus.push(Ratio::new(pj as i64, (lg - j) as i64));
        }
        mus.retain(|&mu| mu > Ratio::from_integer(0) && mu <= lam);
        mus.sort();
        mus.dedup();
        let weighted: Vec<(Ratio<i64>, Ratio<i64>)> = mus
            .iter()
            .map(|&mu| {
                let mut b = mu * int(lg);
                for (j, &pj) in precs_g.iter().enumerate() {
                    b = b.min(int(pj as usize) + mu * int(j));
                }
                (mu, b.min(int(self.p_prec as usize)))
            })
            .collect();
        Ok(c.into_iter()
            .enumerate()
            .map(|(i, raw)| {
                let precs = (0..ms)
                    .map(|k| {
                        let best = weighted.iter().map(|&(mu, b)| b - mu * int(i + q * k)).max().unwrap();
                        best.ceil().to_integer().clamp(0, cap as i64) as u32
                    })
                    .collect();
                let mut s = TruncSeries::from_parts(field.clone(), 0, raw, precs);
                s.canonicalize();
                s
            })
            .collect())
    }
}

fn shift_up(h: &TruncSeries, j: usize) -> TruncSeries {
    let field = h.field();
    let d = field.dim();
    let mut raw = vec![0u128; j * d];
    raw.extend_from_slice(h.raw());
    let mut precs = vec![field.capacity(); j];
    precs.extend_from_slice(h.precs());
    TruncSeries::from_parts(field.clone(), 0, raw, precs)
}

/// Determinant of a square matrix of series: Leibniz expansion for `n <= 5`,
/// Berkowitz' division-free algorithm above that.
pub fn determinant(m: &[Vec<TruncSeries>]) -> Result<TruncSeries> {
    let n = m.len();
    if n <= 5 {
        leibniz(m)
    } else {
        berkowitz(m)
    }
}

fn leibniz(m: &[Vec<TruncSeries>]) -> Result<TruncSeries> {
    let n = m.len();
    let field = m[0][0].field();
    let order = m.iter().flatten().map(TruncSeries::order).min().unwrap();
    let mut acc = TruncSeries::zero(field, order);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = true;
    // Heap's algorithm; each step is one transposition.
    let mut cnt = vec![0usize; n];
    let add = |perm: &[usize], sign: bool, acc: &mut TruncSeries| -> Result<()> {
        let mut t = m[perm[0]][0].clone();
        for (j, &i) in perm.iter().enumerate().skip(1) {
            t = t.checked_mul(&m[i][j])?;
        }
        *acc = if sign { acc.checked_add(&t)? } else { acc.checked_sub(&t)? };
        Ok(())
    };
    add(&perm, sign, &mut acc)?;
    let mut i = 0;
    while i < n {
        if cnt[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(cnt[i], i);
            }
            sign = !sign;
            add(&perm, sign, &mut acc)?;
            cnt[i] += 1;
            i = 0;
        } else {
            cnt[i] = 0;
            i += 1;
        }
    }
    Ok(acc)
}

fn berkowitz(m: &[Vec<TruncSeries>]) -> Result<TruncSeries> {
    let n = m.len();
    let field = m[0][0].field();
    let order = m.iter().flatten().map(TruncSeries::order).min().unwrap();
    let one = TruncSeries::one(field, order);
    let zero = TruncSeries::zero(field, order);
    // v holds the characteristic polynomial of the leading r×r block,
    // highest degree first.
    let mut v = vec![one.clone()];
    for r in 0..n {
        // Toeplitz column: 1, -a, -R·C, -R·A·C, …
        let a = &m[r][r];
        let mut col: Vec<TruncSeries> = (0..r).map(|i| m[i][r].clone()).collect();
        let row: Vec<&TruncSeries> = (0..r).map(|j| &m[r][j]).collect();
        let mut t = vec![one.clone(), a.neg()];
        for _ in 0..r {
            let mut dot = zero.clone();
            for (x, y) in row.iter().zip(&col) {
                dot = dot.checked_add(&x.checked_mul(y)?)?;
            }
            t.push(dot.neg());
            let mut next = vec![zero.clone(); r];
            for (i, out) in next.iter_mut().enumerate() {
                for (j, cj) in col.iter().enumerate() {
                    *out = out.checked_add(&m[i][j].checked_mul(cj)?)?;
                }
            }
            col = next;
        }
        let mut nv = vec![zero.clone(); r + 2];
        for (i, out) in nv.iter_mut().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                if i >= j {
                    *out = out.checked_add(&t[i - j].checked_mul(vj)?)?;
                }
            }
        }
        v = nv;
    }
    let det = v[n].clone();
    Ok(if n.is_multiple_of(2) { det } else { det.neg() })
}

/// The matrix of multiplication by `h` on `1, T, …, T^{q-1}`: column `j`
/// holds the coordinates of `T^j h`.
pub fn multiplication_matrix(h: &TruncSeries, basis: &Basis, exec: Execution) -> Result<Vec<Vec<TruncSeries>>> {
    let q = basis.q;
    let cols = exec.map_range(q, |j| basis.coords(&shift_up(h, j)));
    let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((0..q).map(|i| (0..q).map(|j| cols[j][i].clone()).collect()).collect())
}

fn norm_power_series(h: &TruncSeries, p: &TruncSeries, exec: Execution) -> Result<TruncSeries> {
    let basis = Basis::new(p, h.order() + basis_slack(p))?;
    let m = multiplication_matrix(h, &basis, exec)?;
    let det = determinant(&m)?;
    let n = p.field().n();
    let keep = det.certified_prefix(n);
    if keep == 0 {
        return Err(Error::PrecisionExhausted(format!(
            "no coefficient of the norm is certified to {n} digits; supply more terms"
        )));
    }
    Ok(det.truncate(keep))
}

fn basis_slack(p: &TruncSeries) -> usize {
    p.field().q() as usize
}

/// `𝒩(h)` for `h ∈ O_E((T))`. Laurent series are reduced to power series by
/// `𝒩(T^s h_0) = 𝒩(T)^s 𝒩(h_0)`, which needs `𝒩(T) = T·unit`.
pub fn norm_op(h: &TruncSeries, p: &TruncSeries) -> Result<TruncSeries> {
    norm_op_with(h, p, Execution::default())
}

pub fn norm_op_with(h: &TruncSeries, p: &TruncSeries, exec: Execution) -> Result<TruncSeries> {
    if **h.field() != **p.field() {
        return Err(Error::FieldMismatch);
    }
    let h = h.clone().normalized();
    if h.shift() >= 0 {
        let h0 = if h.shift() > 0 { shift_up(&h.with_shift_zero(), h.shift() as usize) } else { h };
        return norm_power_series(&h0, p, exec);
    }
    let s = h.shift();
    let h0 = h.with_shift_zero();
    let nt = norm_of_t(p, h0.order() + (-s) as usize)?;
    if nt.coeff(0).valuation().is_exact() || !nt.coeff(1).is_unit() {
        return Err(Error::NotAUnitTail(format!("𝒩(T) = {nt} is not T times a unit")));
    }
    let inv = nt.mul_inverse()?;
    let mut acc = norm_power_series(&h0, p, exec)?;
    for _ in 0..(-s) {
        acc = acc.checked_mul(&inv)?;
    }
    Ok(acc)
}

/// `𝒩(T)` computed from `T` known to order `m`.
pub fn norm_of_t(p: &TruncSeries, m: usize) -> Result<TruncSeries> {
    norm_power_series(&TruncSeries::var(p.field(), m), p, Execution::default())
}

/// `W(X) = X^q − Σ c_i(S) X^i` and `U(X, S)` with `W·U = P(X) − S`.
#[derive(Clone, Debug)]
pub struct WeierstrassData {
    /// `c_0, …, c_{q-1}` as series in `S`.
    pub c: Vec<TruncSeries>,
    /// `U` by powers of `X`, each a series in `S`.
    pub u: Vec<TruncSeries>,
    pub ms: usize,
    pub mx: usize,
    /// Valuation of `W·U − (P(X) − S)` modulo `(S^ms, X^mx)`.
    pub residual: Valuation,
    /// Least precision of the residual coefficients.
    pub prec: u32,
}

impl WeierstrassData {
    /// Coefficients of `W` by powers of `X`, `W_q = 1`.
    pub fn w(&self) -> Vec<TruncSeries> {
        let field = self.c[0].field();
        let mut out: Vec<TruncSeries> = self.c.iter().map(|c| c.neg()).collect();
        out.push(TruncSeries::one(field, self.ms));
        out
    }
}

/// Weierstrass preparation of `P(X) − S` over `O_E[[S]]`.
///
/// `U` solves `U = τ_q(D + U·w)` with `D = P(X) − S`, `w = Σ c_i X^i` and
/// `τ_q` dropping the terms below `X^q` and dividing by `X^q`; the map is a
/// contraction for the `(ϖ, S)`-adic topology. The returned residual is
/// recomputed from `W` and `U`. Terms of `P` beyond its order are unknown,
/// so `P` must be given well beyond `mx + q·(N + ms)` terms for a certified
/// residual.
pub fn weierstrass_prepare(p: &TruncSeries, ms: usize, mx: usize) -> Result<WeierstrassData> {
    check_frobenius(p)?;
    let field = p.field().clone();
    let q = field.q() as usize;
    let l = p.order();
    if mx + q > l {
        return Err(Error::InvalidInput(format!("P has {l} terms, need more than {}", mx + q)));
    }
    let basis = Basis::new(p, l)?;
    let tq = TruncSeries::monomial(&field.one(), q, l);
    let c: Vec<TruncSeries> = basis.coords(&tq)?.into_iter().map(|s| fit(&s, ms)).collect();
    // D by powers of X.
    let lu = l - q;
    let d: Vec<TruncSeries> = (0..l)
        .map(|j| {
            let mut s = TruncSeries::monomial(&p.coeff(j), 0, ms);
            if j == 0 && ms > 1 {
                s = &s - &TruncSeries::var(&field, ms);
            }
            s
        })
        .collect();
    let mut u = vec![TruncSeries::zero(&field, ms); lu];
    let rounds = field.capacity() as usize + ms + 2;
    for _ in 0..rounds {
        let mut next = Vec::with_capacity(lu);
        for n in 0..lu {
            let mut acc = d[n + q].clone();
            for (i, ci) in c.iter().enumerate() {
                let idx = n + q - i;
                if idx < lu {
                    acc = acc.checked_add(&ci.checked_mul(&u[idx])?)?;
                }
            }
            next.push(acc);
        }
        let done = next.iter().zip(&u).all(|(a, b)| a.raw() == b.raw() && a.precs() == b.precs());
        u = next;
        if done {
            break;
        }
    }
    let mut data = WeierstrassData { c, u, ms, mx, residual: Valuation::AtLeast(0), prec: 0 };
    let w = data.w();
    let mut min_exact: Option<u32> = None;
    let mut prec = field.capacity();
    for (deg, dd) in d.iter().enumerate().take(mx) {
        let mut acc = dd.neg();
        for (j, wj) in w.iter().enumerate() {
            if j <= deg {
                acc = acc.checked_add(&wj.checked_mul(&data.u[deg - j])?)?;
            }
        }
        if let Valuation::Exact(v) = acc.valuation() {
            min_exact = Some(min_exact.map_or(v, |m| m.min(v)));
        }
        prec = prec.min(acc.precs().iter().copied().min().unwrap_or(prec));
    }
    data.u.truncate(mx);
    data.residual = match min_exact {
        Some(v) => Valuation::Exact(v),
        None => Valuation::AtLeast(prec),
    };
    data.prec = prec;
    let n = field.n();
    let certified = data.residual.lower().min(prec);
    if certified < n {
        return Err(Error::PrecisionExhausted(format!(
            "W·U − (P(X) − S) is only certified to {certified} digits; give P more terms"
        )));
    }
    Ok(data)
}

fn fit(s: &TruncSeries, m: usize) -> TruncSeries {
    if s.order() >= m {
        return s.truncate(m);
    }
    let field = s.field();
    let d = field.dim();
    let mut raw = s.raw().to_vec();
    raw.resize(m * d, 0);
    let mut precs = s.precs().to_vec();
    precs.resize(m, 0);
    TruncSeries::from_parts(field.clone(), 0, raw, precs)
}

/// Exponent of the contraction `𝒩(1 + ϖ^k h) ∈ 1 + ϖ^{k+1}(·)`, for
/// reporting: the valuation of `𝒩(g) − 1`.
pub fn distance_from_one(n: &TruncSeries) -> Valuation {
    let one = TruncSeries::one(n.field(), n.order());
    (n - &one).valuation()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::FieldDesc;
    use num_bigint::BigInt;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q3() -> Arc<PadicField> {
        PadicField::new(&FieldDesc::qp(3, 8)).unwrap()
    }

    fn cyc(k: &Arc<PadicField>, m: usize) -> TruncSeries {
        TruncSeries::binomial_series_int(k, &BigInt::from(k.q()), m)
    }

    fn random_series(k: &Arc<PadicField>, m: usize, rng: &mut ChaCha8Rng) -> TruncSeries {
        let c: Vec<i64> = (0..m).map(|_| rng.gen_range(-40..40)).collect();
        TruncSeries::from_i64s(k, &c, m)
    }

    #[test]
    fn coordinates_reassemble() {
        let k = q3();
        let p = cyc(&k, 40);
        let basis = Basis::new(&p, 40).unwrap();
        assert_eq!(basis.lambda(), Ratio::new(1, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_series(&k, 40, &mut rng);
        let d = basis.coords(&g).unwrap();
        let mut back = TruncSeries::zero(&k, 40);
        for (i, di) in d.iter().enumerate() {
            let m = di.certified_prefix(1);
            let di = fit(di, 40).truncate(40);
            let part = di.truncate(m.max(1)).compose(&p).unwrap();
            back = &back + &shift_up(&fit(&part, 40), i).truncate(40);
        }
        // Agreement wherever both sides are certified.
        let diff = &back - &g;
        for j in 0..diff.order() {
            let c = diff.coeff(j);
            assert!(!c.valuation().is_exact(), "coefficient {j}: {c}");
        }
    }

    #[test]
    fn norm_of_t_cyclotomic() {
        let k = q3();
        let nt = norm_of_t(&cyc(&k, 64), 64).unwrap();
        assert!(nt.order() >= 10);
        assert!((&nt - &TruncSeries::var(&k, nt.order())).valuation().lower() >= 8);
        let k2 = PadicField::new(&FieldDesc::qp(2, 8)).unwrap();
        let nt2 = norm_of_t(&cyc(&k2, 64), 64).unwrap();
        assert!((&nt2 + &TruncSeries::var(&k2, nt2.order())).valuation().lower() >= 8);
    }

    #[test]
    fn norm_examples() {
        let k = q3();
        let p = cyc(&k, 64);
        let one_plus_t = TruncSeries::from_i64s(&k, &[1, 1], 64);
        let n = norm_op(&one_plus_t, &p).unwrap();
        assert!((&n - &one_plus_t.truncate(n.order())).valuation().lower() >= 8);
        let c = TruncSeries::from_i64s(&k, &[5], 64);
        let n = norm_op(&c, &p).unwrap();
        assert!((&n - &TruncSeries::from_i64s(&k, &[125], n.order())).valuation().lower() >= 8);
    }

    #[test]
    fn laurent_inputs() {
        let k = q3();
        let p = cyc(&k, 64);
        let tinv = TruncSeries::new(&k, -1, &vec![k.one(); 1].into_iter().chain((1..60).map(|_| k.zero())).collect::<Vec<_>>()).unwrap();
        let n = norm_op(&tinv, &p).unwrap();
        assert_eq!(n.shift(), -1);
        assert!(n.coeff(0).eq_at_prec(&k.one()));
    }

    fn root_product(h: &TruncSeries, e: &Arc<PadicField>) -> TruncSeries {
        let m = h.order();
        let zeta = &e.one() + &e.uniformizer();
        let mut acc = TruncSeries::one(e, m);
        let mut z = e.one();
        for _ in 0..3 {
            let inner = &TruncSeries::monomial(&(&z - &e.one()), 0, m) + &TruncSeries::monomial(&z, 1, m);
            acc = &acc * &h.compose(&inner).unwrap();
            z = &z * &zeta;
        }
        acc
    }

    #[test]
    fn matches_root_product() {
        // Q_3(ζ_3) with ϖ = ζ_3 − 1, ϖ² + 3ϖ + 3 = 0.
        let e = PadicField::new(&FieldDesc::ramified(3, &[3, 3, 1], 8)).unwrap();
        let m = 48;
        let p = cyc(&e, m);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let h = random_series(&e, m, &mut rng);
            let n = norm_op(&h, &p).unwrap();
            let lhs = n.compose(&p.truncate(n.order())).unwrap();
            let rhs = root_product(&h, &e).truncate(lhs.order());
            assert!((&lhs - &rhs).valuation().lower() >= 8, "{}", &lhs - &rhs);
        }
    }

    #[test]
    fn determinant_algorithms_agree() {
        let k = q3();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=5 {
            let m: Vec<Vec<TruncSeries>> =
                (0..n).map(|_| (0..n).map(|_| random_series(&k, 6, &mut rng)).collect()).collect();
            assert!(leibniz(&m).unwrap().eq_at_prec(&berkowitz(&m).unwrap()), "n = {n}");
        }
        let ints = |v: &[i64]| TruncSeries::from_i64s(&k, v, 2);
        let m = vec![vec![ints(&[2]), ints(&[1])], vec![ints(&[7]), ints(&[5])]];
        assert_eq!(determinant(&m).unwrap(), ints(&[3]));
    }

    #[test]
    fn weierstrass_examples() {
        let k = q3();
        let t3 = TruncSeries::from_i64s(&k, &[0, 0, 0, 1], 80);
        let w = weierstrass_prepare(&t3, 16, 16).unwrap();
        assert!(w.c[0].eq_at_prec(&TruncSeries::var(&k, 16)));
        assert!(w.c[1].is_zero() && w.c[2].is_zero());
        assert!(w.u[0].eq_at_prec(&TruncSeries::one(&k, 16)));
        assert!(w.u[1..].iter().all(TruncSeries::is_zero));
        for p in [cyc(&k, 100), TruncSeries::from_i64s(&k, &[0, 3, 0, 1], 100)] {
            let w = weierstrass_prepare(&p, 16, 16).unwrap();
            assert!(w.prec >= 8 && !w.residual.is_exact());
            // W(0) = −c_0 = −S·unit.
            assert!(w.c[0].coeff(0).is_zero() && w.c[0].coeff(1).is_unit());
            assert!(w.u[0].coeff(0).is_unit());
        }
        assert_eq!(weierstrass_prepare(&TruncSeries::from_i64s(&k, &[0, 1, 0, 1], 40), 8, 8).unwrap_err(), Error::NotDistinguished);
    }

    #[test]
    fn lifts_are_fixed() {
        let k = q3();
        let p = cyc(&k, 64);
        for c in [4, 7, -2] {
            let f = TruncSeries::binomial_series_int(&k, &BigInt::from(c), 64);
            let n = norm_op(&f, &p).unwrap();
            assert!((&n - &f.truncate(n.order())).valuation().lower() >= 8, "c = {c}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn multiplicative_and_contracting(seed in 0u64..1000, kk in 1u32..4) {
            let k = q3();
            let p = cyc(&k, 60);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b) = (random_series(&k, 60, &mut rng), random_series(&k, 60, &mut rng));
            let nab = norm_op(&(&a * &b), &p).unwrap();
            let prod = &norm_op(&a, &p).unwrap() * &norm_op(&b, &p).unwrap();
            let m = nab.order().min(prod.order());
            prop_assert!((&nab.truncate(m) - &prod.truncate(m)).valuation().lower() >= 8);
            let g = &TruncSeries::one(&k, 60) + &a.scale(&k.from_i64(3i64.pow(kk))).unwrap();
            let ng = norm_op(&g, &p).unwrap();
            prop_assert!(distance_from_one(&ng).lower() > kk);
        }
    }
}
