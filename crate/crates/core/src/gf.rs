//! Arithmetic in GF(2^p), 1 <= p <= 8, and the fixed symbol <-> bit-vector
//! isomorphism.
//!
//! A symbol is stored as a `u8` whose bit pattern *is* its binary image:
//! bit `t` of the value (LSB-first) is the `t`-th coordinate over F_2.
//! Multiplication goes through discrete log / antilog tables; the decoder
//! additionally uses the full `q x q` product table for message permutation.

use thiserror::Error;

/// Field element. Always `< q` for the field it belongs to.
pub type Symbol = u8;

/// Largest supported extension degree.
pub const MAX_DEGREE: u32 = 8;

/// Canonical primitive polynomials, indexed by degree `p`.
///
/// Bit `k` of the mask is the coefficient of `x^k`.
pub const PRIMITIVE_POLYS: [u32; 9] = [
    0,
    0b11,        // x + 1
    0b111,       // x^2 + x + 1
    0b1011,      // x^3 + x + 1
    0b1_0011,    // x^4 + x + 1
    0b10_0101,   // x^5 + x^2 + 1
    0b100_0011,  // x^6 + x + 1
    0b1000_1001, // x^7 + x^3 + 1
    0x11d,       // x^8 + x^4 + x^3 + x^2 + 1
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("extension degree {0} outside supported range 1..=8")]
    InvalidDegree(u32),
    #[error("polynomial {poly:#x} is not primitive of degree {p}")]
    NotPrimitive { p: u32, poly: u32 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
}

/// Precomputed arithmetic for GF(2^p).
#[derive(Clone)]
pub struct Field {
    p: u32,
    q: usize,
    poly: u32,
    /// `log[a]` for `a != 0`; `log[0]` is unused.
    log: Vec<u16>,
    /// `exp[k] = alpha^k` for `k in 0..2(q-1)`, doubled so that log sums need no reduction.
    exp: Vec<Symbol>,
    inv: Vec<Symbol>,
    /// Row-major `q x q` product table.
    mul: Vec<Symbol>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("p", &self.p)
            .field("q", &self.q)
            .field("poly", &format_args!("{:#x}", self.poly))
            .finish()
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.poly == other.poly
    }
}

impl Eq for Field {}

impl Field {
    /// Field of order `2^p` with the canonical primitive polynomial.
    pub fn new(p: u32) -> Result<Self, GfError> {
        if p == 0 || p > MAX_DEGREE {
            return Err(GfError::InvalidDegree(p));
        }
        Self::with_poly(p, PRIMITIVE_POLYS[p as usize])
    }

    /// Field of order `q`, which must be a power of two in `2..=256`.
    pub fn with_order(q: usize) -> Result<Self, GfError> {
        if !q.is_power_of_two() || q < 2 {
            return Err(GfError::InvalidDegree(0));
        }
        Self::new(q.trailing_zeros())
    }

    /// Field built on an explicit polynomial; fails unless it is primitive of degree `p`.
    pub fn with_poly(p: u32, poly: u32) -> Result<Self, GfError> {
        if p == 0 || p > MAX_DEGREE {
            return Err(GfError::InvalidDegree(p));
        }
        if poly >> p != 1 {
            return Err(GfError::NotPrimitive { p, poly });
        }
        let q = 1usize << p;
        let order = q - 1;
        let mut log = vec![0u16; q];
        let mut exp = vec![0u8; 2 * order];
        let mut seen = vec![false; q];
        let mut x: u32 = 1;
        for k in 0..order {
            if seen[x as usize] {
                // root has order < q - 1
                return Err(GfError::NotPrimitive { p, poly });
            }
            seen[x as usize] = true;
            exp[k] = x as u8;
            exp[k + order] = x as u8;
            log[x as usize] = k as u16;
            x <<= 1;
            if x & (1 << p) != 0 {
                x ^= poly;
            }
        }
        if x != 1 {
            return Err(GfError::NotPrimitive { p, poly });
        }

        let mut inv = vec![0u8; q];
        for a in 1..q {
            inv[a] = exp[(order - log[a] as usize) % order];
        }
        let mut mul = vec![0u8; q * q];
        for a in 1..q {
            for b in 1..q {
                mul[a * q + b] = exp[log[a] as usize + log[b] as usize];
            }
        }

        Ok(Field {
            p,
            q,
            poly,
            log,
            exp,
            inv,
            mul,
        })
    }

    /// Bits per symbol.
    #[inline]
    pub fn p(&self) -> u32 {
        self.p
    }

    /// Field order.
    #[inline]
    pub fn q(&self) -> usize {
        self.q
    }

    /// Primitive polynomial as a bitmask.
    #[inline]
    pub fn primitive_poly(&self) -> u32 {
        self.poly
    }

    #[inline]
    pub fn add(&self, a: Symbol, b: Symbol) -> Symbol {
        debug_assert!((a as usize) < self.q && (b as usize) < self.q);
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: Symbol, b: Symbol) -> Symbol {
        self.mul[a as usize * self.q + b as usize]
    }

    /// Product through the log/antilog tables, bypassing the full product table.
    #[inline]
    pub fn mul_log(&self, a: Symbol, b: Symbol) -> Symbol {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
        }
    }

    pub fn inv(&self, a: Symbol) -> Result<Symbol, GfError> {
        if a == 0 {
            Err(GfError::ZeroInverse)
        } else {
            Ok(self.inv[a as usize])
        }
    }

    pub fn div(&self, a: Symbol, b: Symbol) -> Result<Symbol, GfError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// `alpha^k` for the primitive element `alpha` (the class of `x`).
    #[inline]
    pub fn pow_alpha(&self, k: usize) -> Symbol {
        self.exp[k % (self.q - 1)]
    }

    /// Row of the product table: `row[a] = h * a`.
    #[inline]
    pub fn mul_row(&self, h: Symbol) -> &[Symbol] {
        let start = h as usize * self.q;
        &self.mul[start..start + self.q]
    }

    /// Binary image of `a`, LSB first.
    pub fn symbol_to_bits(&self, a: Symbol) -> Vec<u8> {
        symbol_to_bits(a, self.p)
    }

    pub fn bits_to_symbol(&self, bits: &[u8]) -> Symbol {
        debug_assert_eq!(bits.len(), self.p as usize);
        bits_to_symbol(bits)
    }
}

/// Binary image of `a` on `p` bits, LSB first.
pub fn symbol_to_bits(a: Symbol, p: u32) -> Vec<u8> {
    (0..p).map(|t| (a >> t) & 1).collect()
}

/// Inverse of [`symbol_to_bits`]; `bits[t]` is the coefficient of `2^t`.
pub fn bits_to_symbol(bits: &[u8]) -> Symbol {
    bits.iter()
        .enumerate()
        .fold(0u8, |acc, (t, &b)| acc | ((b & 1) << t))
}
