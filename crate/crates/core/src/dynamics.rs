//! Exact Collatz/Syracuse iteration, 2-adic valuations, the composed affine
//! maps, and the offset map into Z[1/2] with its reduction mod 3^n.
//!
//! All orbit arithmetic is arbitrary precision; iteration caps are explicit
//! parameters and exceeding one is a typed outcome, never a panic.

use std::fmt;
use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// An odd positive integer, the domain of the Syracuse map.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OddNatural(BigUint);

impl OddNatural {
    pub fn new(value: BigUint) -> Result<Self> {
        if value.is_zero() || !value.is_odd() {
            return Err(Error::NotOdd);
        }
        Ok(OddNatural(value))
    }

    pub fn from_u64(value: u64) -> Result<Self> {
        Self::new(BigUint::from(value))
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_inner(self) -> BigUint {
        self.0
    }
}

impl fmt::Display for OddNatural {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// An element of Z[1/2], stored as `num / 2^denom_exp`.
///
/// The representation is canonical after every operation: `denom_exp` is
/// minimal, i.e. `num` is odd whenever `denom_exp > 0`, and zero is `(0, 0)`.
/// Equality of values is therefore structural equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    num: BigInt,
    denom_exp: u64,
}

impl DyadicRational {
    pub fn new(num: BigInt, denom_exp: u64) -> Self {
        let mut d = DyadicRational { num, denom_exp };
        d.canonicalize();
        d
    }

    pub fn zero() -> Self {
        DyadicRational { num: BigInt::zero(), denom_exp: 0 }
    }

    pub fn from_integer(num: BigInt) -> Self {
        DyadicRational { num, denom_exp: 0 }
    }

    pub fn numerator(&self) -> &BigInt {
        &self.num
    }

    pub fn denom_exp(&self) -> u64 {
        self.denom_exp
    }

    fn canonicalize(&mut self) {
        if self.num.is_zero() {
            self.denom_exp = 0;
            return;
        }
        let strip = self
            .num
            .trailing_zeros()
            .expect("nonzero")
            .min(self.denom_exp);
        if strip > 0 {
            self.num >>= strip;
            self.denom_exp -= strip;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let e = self.denom_exp.max(other.denom_exp);
        let a = &self.num << (e - self.denom_exp) as usize;
        let b = &other.num << (e - other.denom_exp) as usize;
        DyadicRational::new(a + b, e)
    }

    /// Multiply by an integer.
    pub fn mul_int(&self, k: &BigInt) -> Self {
        DyadicRational::new(&self.num * k, self.denom_exp)
    }

    /// Multiply by 2^k (k may be negative).
    pub fn mul_pow2(&self, k: i64) -> Self {
        if self.num.is_zero() {
            return Self::zero();
        }
        if k >= 0 {
            let k = k as u64;
            if self.denom_exp >= k {
                DyadicRational { num: self.num.clone(), denom_exp: self.denom_exp - k }
            } else {
                DyadicRational {
                    num: &self.num << (k - self.denom_exp) as usize,
                    denom_exp: 0,
                }
            }
        } else {
            DyadicRational::new(self.num.clone(), self.denom_exp + (-k) as u64)
        }
    }

    /// True when the value is an odd integer.
    pub fn is_odd_integer(&self) -> bool {
        self.denom_exp == 0 && self.num.is_odd()
    }

    pub fn to_f64(&self) -> f64 {
        let num = self.num.to_string().parse::<f64>().unwrap_or(f64::NAN);
        num / 2f64.powi(self.denom_exp.min(i32::MAX as u64) as i32)
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.num, self.denom_exp)
    }
}

/// A tuple of positive integers `(a_1, ..., a_n)` with cached prefix sums.
#[derive(Debug, Clone)]
pub struct ValuationTuple {
    entries: Vec<u64>,
    prefix: OnceLock<Vec<u64>>,
}

impl ValuationTuple {
    pub fn new(entries: Vec<u64>) -> Result<Self> {
        if entries.contains(&0) {
            return Err(Error::BadParameter("valuation entries must be >= 1".into()));
        }
        Ok(ValuationTuple { entries, prefix: OnceLock::new() })
    }

    pub fn empty() -> Self {
        ValuationTuple { entries: Vec::new(), prefix: OnceLock::new() }
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn prefix_sums(&self) -> &[u64] {
        self.prefix.get_or_init(|| {
            let mut p = Vec::with_capacity(self.entries.len() + 1);
            p.push(0);
            let mut acc = 0u64;
            for &a in &self.entries {
                acc += a;
                p.push(acc);
            }
            p
        })
    }

    /// `|a| = a_1 + ... + a_n`.
    pub fn size(&self) -> u64 {
        *self.prefix_sums().last().unwrap()
    }

    /// `a_{[j,k]} = a_j + ... + a_k` with 1-based inclusive indices.
    pub fn partial_sum(&self, j: usize, k: usize) -> u64 {
        assert!(1 <= j && j <= k && k <= self.entries.len(), "bad index range");
        let p = self.prefix_sums();
        p[k] - p[j - 1]
    }
}

impl PartialEq for ValuationTuple {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Eq for ValuationTuple {}

impl PartialOrd for ValuationTuple {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ValuationTuple {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.entries.cmp(&other.entries)
    }
}

impl std::hash::Hash for ValuationTuple {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.entries.hash(state);
    }
}

impl fmt::Display for ValuationTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// An element of Z/3^n Z together with its level n.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Residue3 {
    level: u32,
    value: BigUint,
}

impl Residue3 {
    pub fn new(level: u32, value: BigUint) -> Self {
        let modulus = BigUint::from(3u32).pow(level);
        Residue3 { level, value: value % modulus }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    /// Further reduce to a lower level k <= n.
    pub fn reduce(&self, k: u32) -> Result<Residue3> {
        if k > self.level {
            return Err(Error::BadLevel { requested: k, level: self.level });
        }
        Ok(Residue3::new(k, self.value.clone()))
    }
}

impl fmt::Display for Residue3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod 3^{}", self.value, self.level)
    }
}

/// One Collatz step: `3N+1` for odd N, `N/2` for even N.
pub fn collatz_step(n: &BigUint) -> BigUint {
    assert!(!n.is_zero(), "collatz_step requires N >= 1");
    if n.is_odd() {
        n * 3u32 + 1u32
    } else {
        n >> 1
    }
}

/// Outcome of a capped orbit-minimum search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitMin {
    /// Minimum over the orbit elements examined.
    pub min: BigUint,
    /// Whether the orbit reached 1 within the cap.  When false the true
    /// infimum is undetermined and `min` is only the running minimum.
    pub reached_one: bool,
}

/// Minimum of the Collatz orbit over the first `cap + 1` elements.
pub fn collatz_min(n: &BigUint, cap: u64) -> OrbitMin {
    let one = BigUint::one();
    let mut cur = n.clone();
    let mut min = cur.clone();
    for _ in 0..cap {
        if cur == one {
            return OrbitMin { min: one, reached_one: true };
        }
        cur = collatz_step(&cur);
        if cur < min {
            min = cur.clone();
        }
    }
    let reached_one = min == one;
    OrbitMin { min, reached_one }
}

/// The p-adic valuation of a nonzero integer: the largest a with p^a | M.
pub fn nu(p: u32, m: &BigInt) -> Result<u64> {
    if m.is_zero() {
        return Err(Error::ZeroInput);
    }
    if p == 2 {
        return Ok(m.trailing_zeros().expect("nonzero"));
    }
    let p = BigInt::from(p);
    let mut v = 0u64;
    let mut rest = m.abs();
    loop {
        let (q, r) = rest.div_rem(&p);
        if !r.is_zero() {
            return Ok(v);
        }
        v += 1;
        rest = q;
    }
}

/// One Syracuse step: the largest odd divisor of 3N+1.
pub fn syracuse_step(n: &OddNatural) -> OddNatural {
    let t = n.value() * 3u32 + 1u32;
    let a = t.trailing_zeros().expect("3N+1 > 0");
    OddNatural(t >> a)
}

/// The n-fold Syracuse iterate.
pub fn syr_iterate(n: &OddNatural, steps: u64) -> OddNatural {
    let mut cur = n.clone();
    for _ in 0..steps {
        cur = syracuse_step(&cur);
    }
    cur
}

/// Minimum of the Syracuse orbit over the first `cap + 1` elements.
pub fn syracuse_min(n: &OddNatural, cap: u64) -> OrbitMin {
    let one = BigUint::one();
    let mut cur = n.clone();
    let mut min = cur.0.clone();
    for _ in 0..cap {
        if cur.0 == one {
            return OrbitMin { min: one, reached_one: true };
        }
        cur = syracuse_step(&cur);
        if cur.0 < min {
            min = cur.0.clone();
        }
    }
    let reached_one = min == one;
    OrbitMin { min, reached_one }
}

/// The n-Syracuse valuation: the tuple of 2-valuations of `3 Syr^j(N) + 1`
/// for `j = 0, ..., n-1`.  It is the unique tuple whose composed affine map
/// sends N to an odd integer.
pub fn syracuse_valuation(n: &OddNatural, steps: u64) -> ValuationTuple {
    let mut entries = Vec::with_capacity(steps as usize);
    let mut cur = n.0.clone();
    for _ in 0..steps {
        let t = &cur * 3u32 + 1u32;
        let a = t.trailing_zeros().expect("3N+1 > 0");
        entries.push(a);
        cur = t >> a;
    }
    ValuationTuple { entries, prefix: OnceLock::new() }
}

/// The offset map: `F_n(a) = sum_{m=1}^{n} 3^{n-m} 2^{-a_{[m,n]}}`.
///
/// Over the common denominator `2^{|a|}` the numerator is
/// `sum_m 3^{n-m} 2^{a_{[1,m-1]}}`, whose first term is odd, so the result is
/// already canonical for n >= 1.  Satisfies `0 <= F_n(a) <= 3^n 2^{-a_n}`.
pub fn offset(a: &ValuationTuple) -> DyadicRational {
    let n = a.len();
    if n == 0 {
        return DyadicRational::zero();
    }
    let prefix = a.prefix_sums();
    let mut num = BigUint::zero();
    let mut pow3 = BigUint::from(3u32).pow((n - 1) as u32);
    for m in 1..=n {
        num += &pow3 << prefix[m - 1] as usize;
        if m < n {
            pow3 /= 3u32;
        }
    }
    DyadicRational::new(BigInt::from(num), a.size())
}

/// Apply the composed affine map `Aff_{a_n} o ... o Aff_{a_1}` to x:
/// `3^n 2^{-|a|} x + F_n(a)`.
pub fn affine_apply(a: &ValuationTuple, x: &DyadicRational) -> DyadicRational {
    let n = a.len() as u32;
    let scaled = x
        .mul_int(&BigInt::from(BigUint::from(3u32).pow(n)))
        .mul_pow2(-(a.size() as i64));
    scaled.add(&offset(a))
}

/// The image of x under the unique ring homomorphism Z[1/2] -> Z/3^n Z,
/// which sends 1/2 to `(3^n + 1)/2 mod 3^n`.
pub fn reduce_mod_3n(x: &DyadicRational, n: u32) -> Residue3 {
    let modulus = BigUint::from(3u32).pow(n);
    if modulus.is_one() {
        return Residue3 { level: n, value: BigUint::zero() };
    }
    let num = x.numerator().mod_floor(&BigInt::from(modulus.clone()));
    let num = num.to_biguint().expect("mod_floor is nonnegative");
    let inv2: BigUint = (&modulus + 1u32) >> 1;
    let scale = inv2.modpow(&BigUint::from(x.denom_exp()), &modulus);
    Residue3 { level: n, value: num * scale % modulus }
}

/// Both sides of the identity `Col_min(N) = Syr_min(N / 2^{nu_2(N)})` under a
/// shared cap.
#[derive(Debug, Clone)]
pub struct MinIdentity {
    pub collatz: OrbitMin,
    pub syracuse: OrbitMin,
    /// `Some(eq)` when neither side exhausted its cap; `None` otherwise.
    pub equal: Option<bool>,
}

pub fn collatz_syracuse_min_identity(n: &BigUint, cap: u64) -> MinIdentity {
    assert!(!n.is_zero(), "requires N >= 1");
    let collatz = collatz_min(n, cap);
    let odd_part = n >> n.trailing_zeros().expect("nonzero");
    let syracuse = syracuse_min(&OddNatural(odd_part), cap);
    let equal = if collatz.reached_one && syracuse.reached_one {
        Some(collatz.min == syracuse.min)
    } else {
        None
    };
    MinIdentity { collatz, syracuse, equal }
}
