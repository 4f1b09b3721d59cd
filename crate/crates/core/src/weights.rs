//! Circulant determinants of nonnegative weight vectors and the
//! classification of `Σ a_h·h` for cyclic Galois groups of prime order.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Weights `a_0, …, a_{d-1}` indexed by `Z/dZ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightVector {
    pub a: Vec<u64>,
}

impl WeightVector {
    pub fn new(a: Vec<u64>) -> Result<WeightVector> {
        if a.len() < 2 {
            return Err(Error::InvalidInput("weight vector needs d >= 2 entries".into()));
        }
        Ok(WeightVector { a })
    }

    pub fn d(&self) -> usize {
        self.a.len()
    }

    /// Rotates the indices by `s`: `a'_i = a_{i+s}`.
    pub fn rotate(&self, s: usize) -> WeightVector {
        let d = self.d();
        WeightVector { a: (0..d).map(|i| self.a[(i + s) % d]).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImageClass {
    ZeroMap,
    TraceLine,
    Bijective,
}

/// Determinant of the circulant `C_{ij} = a_{j-i mod d}` by fraction-free
/// elimination.
pub fn circulant_det_elimination(w: &WeightVector) -> BigInt {
    let d = w.d();
    let mut m: Vec<Vec<BigInt>> =
        (0..d).map(|i| (0..d).map(|j| BigInt::from(w.a[(j + d - i) % d])).collect()).collect();
    bareiss(&mut m)
}

fn bareiss(m: &mut [Vec<BigInt>]) -> BigInt {
    let n = m.len();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&r| !m[r][k].is_zero()) {
                Some(r) => {
                    m.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = v / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    sign * &m[n - 1][n - 1]
}

/// `Φ_d` as a coefficient vector, lowest degree first.
fn cyclotomic_poly(d: usize) -> Vec<BigInt> {
    let mut num: Vec<BigInt> = vec![BigInt::zero(); d + 1];
    num[0] = -BigInt::one();
    num[d] = BigInt::one();
    for e in 1..d {
        if d.is_multiple_of(e) {
            num = poly_div_exact(&num, &cyclotomic_poly(e));
        }
    }
    num
}

fn poly_div_exact(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let mut q = vec![BigInt::zero(); a.len() - db];
    for i in (0..q.len()).rev() {
        let c = &r[i + db] / &b[db];
        for (j, bj) in b.iter().enumerate() {
            r[i + j] -= &c * bj;
        }
        q[i] = c;
    }
    debug_assert!(r.iter().all(Zero::is_zero));
    q
}

/// Multiplication in `Z[x]/Φ_d` (monic modulus).
fn mul_mod(a: &[BigInt], b: &[BigInt], phi: &[BigInt]) -> Vec<BigInt> {
    let n = phi.len() - 1;
    let mut prod = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            prod[i + j] += x * y;
        }
    }
    for i in (n..prod.len()).rev() {
        let c = std::mem::take(&mut prod[i]);
        if c.is_zero() {
            continue;
        }
        for j in 0..n {
            prod[i - n + j] -= &c * &phi[j];
        }
    }
    prod.truncate(n.max(1));
    prod
}

/// `∏_j Σ_i ζ_d^{ij} a_i`, evaluated in `Z[ζ_d] = Z[x]/Φ_d`.
pub fn circulant_det_eigen(w: &WeightVector) -> BigInt {
    let d = w.d();
    let phi = cyclotomic_poly(d);
    let n = phi.len() - 1;
    let mut acc = vec![BigInt::one()];
    for j in 0..d {
        // Σ_i a_i x^{ij mod d}, then reduced mod Φ_d.
        let mut f = vec![BigInt::zero(); d];
        for (i, &ai) in w.a.iter().enumerate() {
            f[(i * j) % d] += BigInt::from(ai);
        }
        let f = mul_mod(&f, &[BigInt::one()], &phi);
        acc = mul_mod(&acc, &f, &phi);
    }
    assert!(acc[1..].iter().all(Zero::is_zero) || n == 0, "eigenvalue product is not rational");
    acc[0].clone()
}

/// Determinant of the circulant of `w`, by elimination, cross-checked
/// against the eigenvalue product.
pub fn circulant_det(w: &WeightVector) -> BigInt {
    let det = circulant_det_elimination(w);
    let eig = circulant_det_eigen(w);
    assert_eq!(det, eig, "determinant formulas disagree for {:?}", w.a);
    det
}

fn is_prime(d: usize) -> bool {
    d >= 2 && (2..).take_while(|k| k * k <= d).all(|k| !d.is_multiple_of(k))
}

/// Image of `Σ a_h·h` on a cyclic extension of prime degree `d`.
pub fn classify_weights(w: &WeightVector) -> Result<ImageClass> {
    let d = w.d();
    if !is_prime(d) {
        return Err(Error::DNotPrime(d));
    }
    let class = if w.a.iter().all(|&x| x == 0) {
        ImageClass::ZeroMap
    } else if w.a.iter().all(|&x| x == w.a[0]) {
        ImageClass::TraceLine
    } else {
        ImageClass::Bijective
    };
    let singular = circulant_det(w).is_zero();
    assert_eq!(singular, class != ImageClass::Bijective, "classification disagrees with the determinant for {:?}", w.a);
    Ok(class)
}

/// Lexicographically smallest non-constant vector with entries in
/// `[0, bound]` whose circulant is singular.
pub fn search_singular_nonconstant(d: usize, bound: u64, exec: Execution) -> Result<Option<WeightVector>> {
    if d < 2 || bound < 1 {
        return Err(Error::InvalidInput("need d >= 2 and bound >= 1".into()));
    }
    let base = bound + 1;
    let tail = (d - 1) as u32;
    let block = base.checked_pow(tail).ok_or_else(|| Error::InvalidInput("search box too large".into()))?;
    let hits = exec.map_range(base as usize, |first| {
        let mut a = vec![0u64; d];
        for idx in 0..block {
            a[0] = first as u64;
            let mut r = idx;
            for k in (1..d).rev() {
                a[k] = r % base;
                r /= base;
            }
            if a.iter().all(|&x| x == a[0]) {
                continue;
            }
            let w = WeightVector { a: a.clone() };
            if circulant_det_elimination(&w).is_zero() {
                return Some(w);
            }
        }
        None
    });
    Ok(hits.into_iter().flatten().next())
}

/// `gcd` of the weights, for reporting.
pub fn weight_gcd(w: &WeightVector) -> u64 {
    w.a.iter().fold(0, |g, &x| g.gcd(&x))
}
