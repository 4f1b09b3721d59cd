//! Residues modulo a prime power `p^k < 2^126`, stored as plain `u128`.
//!
//! Odd moduli use a Montgomery reduction (two REDC passes per product so
//! values never leave the plain representation); powers of two reduce by
//! masking.

#[derive(Clone, Debug, PartialEq, Eq)]
enum Kind {
    Pow2 { mask: u128 },
    Odd { minv: u128, r2: u128 },
}

/// The ring `Z / m` for `m = p^k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModRing {
    m: u128,
    kind: Kind,
}

/// Largest supported modulus bit length.
pub const MAX_MODULUS_BITS: u32 = 126;

#[inline]
fn wide_mul(a: u128, b: u128) -> (u128, u128) {
    let (a1, a0) = (a >> 64, a & u64::MAX as u128);
    let (b1, b0) = (b >> 64, b & u64::MAX as u128);
    let p00 = a0 * b0;
    let p01 = a0 * b1;
    let p10 = a1 * b0;
    let p11 = a1 * b1;
    let mid = (p00 >> 64) + (p01 & u64::MAX as u128) + (p10 & u64::MAX as u128);
    let lo = (p00 & u64::MAX as u128) | (mid << 64);
    let hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
    (hi, lo)
}

impl ModRing {
    /// Builds `Z / m`. Returns `None` if `m < 2`, `m >= 2^126`, or `m` is even
    /// without being a power of two.
    pub fn new(m: u128) -> Option<Self> {
        if m < 2 || m >> MAX_MODULUS_BITS != 0 {
            return None;
        }
        if m.is_power_of_two() {
            return Some(ModRing { m, kind: Kind::Pow2 { mask: m - 1 } });
        }
        if m.is_multiple_of(2) {
            return None;
        }
        // Newton iteration for m^{-1} mod 2^128; x = m is correct to 3 bits.
        let mut x = m;
        for _ in 0..7 {
            x = x.wrapping_mul(2u128.wrapping_sub(m.wrapping_mul(x)));
        }
        debug_assert_eq!(m.wrapping_mul(x), 1);
        // R mod m, then R^2 mod m by 128 modular doublings.
        let mut r = (u128::MAX % m + 1) % m;
        for _ in 0..128 {
            r <<= 1;
            if r >= m {
                r -= m;
            }
        }
        Some(ModRing { m, kind: Kind::Odd { minv: x.wrapping_neg(), r2: r } })
    }

    #[inline]
    pub fn modulus(&self) -> u128 {
        self.m
    }

    #[inline]
    fn redc(&self, hi: u128, lo: u128, minv: u128) -> u128 {
        let u = lo.wrapping_mul(minv);
        let (uh, ul) = wide_mul(u, self.m);
        let (_, carry) = lo.overflowing_add(ul);
        let mut t = hi + uh + carry as u128;
        if t >= self.m {
            t -= self.m;
        }
        t
    }

    #[inline]
    pub fn reduce(&self, a: u128) -> u128 {
        match self.kind {
            Kind::Pow2 { mask } => a & mask,
            Kind::Odd { .. } => a % self.m,
        }
    }

    #[inline]
    pub fn add(&self, a: u128, b: u128) -> u128 {
        let s = a + b;
        if s >= self.m {
            s - self.m
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u128, b: u128) -> u128 {
        if a >= b {
            a - b
        } else {
            a + self.m - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u128) -> u128 {
        if a == 0 {
            0
        } else {
            self.m - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u128, b: u128) -> u128 {
        match self.kind {
            Kind::Pow2 { mask } => a.wrapping_mul(b) & mask,
            Kind::Odd { minv, r2 } => {
                let (h, l) = wide_mul(a, b);
                let t = self.redc(h, l, minv);
                let (h, l) = wide_mul(t, r2);
                self.redc(h, l, minv)
            }
        }
    }

    pub fn pow(&self, mut a: u128, mut e: u128) -> u128 {
        let mut acc = self.reduce(1);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        acc
    }

    /// Reduces a signed integer into `[0, m)`.
    pub fn from_i128(&self, a: i128) -> u128 {
        let m = self.m as i128;
        (a.rem_euclid(m)) as u128
    }

    /// Inverse of `a` assuming `gcd(a, m) = 1` and `m = p^k`; `p` is the
    /// underlying prime. Returns `None` if `a` is not invertible.
    pub fn inv(&self, a: u128, p: u64) -> Option<u128> {
        let a = self.reduce(a);
        if a.is_multiple_of(p as u128) {
            return None;
        }
        // Inverse mod p by Fermat, then Newton lifting x <- x(2 - ax).
        let pm = p as u128;
        let mut x = if p == 2 {
            1
        } else {
            ModRing::new(pm).map(|r| r.pow(a % pm, pm - 2)).unwrap_or(1)
        };
        for _ in 0..8 {
            let ax = self.mul(a, x);
            x = self.mul(x, self.sub(self.reduce(2), ax));
        }
        debug_assert_eq!(self.mul(a, x), self.reduce(1));
        Some(x)
    }
}
