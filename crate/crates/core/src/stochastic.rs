//! Seeded samplers (geometric, Pascal), the Chernoff-type weight G_n,
//! total-variation utilities, and the exact residue-class enumeration of the
//! valuation distribution.
//!
//! All randomness flows through ChaCha8 with explicit 64-bit stream ids:
//! identical `(seed, stream)` pairs reproduce identical draws bit-for-bit on
//! every platform, and parallel estimators give each sample its own stream so
//! results are independent of the worker count.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::Dist3;
use crate::dynamics::ValuationTuple;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Rational;

/// Default enumeration budget: odd residues mod 2^m for m up to 24.
pub const DEFAULT_ENUM_BUDGET: u32 = 24;

/// Root of a family of reproducible generator streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Seed(pub u64);

impl Seed {
    /// Independent substream `id`.  Streams with distinct ids never overlap.
    pub fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(id);
        rng
    }
}

/// A geometric variable of mean mu > 1: `P(a) = (1/mu)((mu-1)/mu)^{a-1}`,
/// sampled by inverting the CDF at a uniform draw.
pub fn sample_geom<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> Result<u64> {
    if mu.is_nan() || mu <= 1.0 {
        return Err(Error::BadParameter(format!("geometric mean must exceed 1, got {mu}")));
    }
    let r = (mu - 1.0) / mu;
    let u: f64 = rng.gen();
    let a = ((1.0 - u).ln() / r.ln()).ceil();
    Ok((a as u64).max(1))
}

/// Geom(2) sampled exactly from the generator's bit stream: the inverse CDF
/// of `P(a) = 2^-a` applied to a uniform bit sequence is one plus the number
/// of leading one-bits, so no floating point is involved.
pub fn sample_geom2<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    let mut a = 1u64;
    loop {
        let bits: u64 = rng.gen();
        let t = bits.trailing_ones() as u64;
        a += t;
        if t < 64 {
            return a;
        }
    }
}

/// A Pascal (negative binomial) variable `P(b) = (b-1)/2^b` on b >= 2, as the
/// sum of two independent Geom(2) draws.
pub fn sample_pascal<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    sample_geom2(rng) + sample_geom2(rng)
}

/// The Chernoff-type weight `G_n(x) = exp(-|x|^2/n) + exp(-|x|)`, with the
/// convention `exp(-infinity) = 0` so `G_0(x) = exp(-|x|)`.
pub fn g_weight(n: u64, x: &[f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0 {
        (-norm).exp()
    } else {
        (-norm * norm / n as f64).exp() + (-norm).exp()
    }
}

/// Counts of observed outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EmpiricalDist<K: Ord> {
    counts: BTreeMap<K, u64>,
    total: u64,
}

impl<K: Ord + Clone> EmpiricalDist<K> {
    pub fn new() -> Self {
        EmpiricalDist { counts: BTreeMap::new(), total: 0 }
    }

    pub fn record(&mut self, key: K) {
        self.record_n(key, 1);
    }

    pub fn record_n(&mut self, key: K, count: u64) {
        *self.counts.entry(key).or_insert(0) += count;
        self.total += count;
    }

    pub fn merge(&mut self, other: Self) {
        for (k, c) in other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &BTreeMap<K, u64> {
        &self.counts
    }

    pub fn prob(&self, key: &K) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        *self.counts.get(key).unwrap_or(&0) as f64 / self.total as f64
    }
}

/// Total variation between two empirical distributions over the union of
/// their supports.
///
/// This is the unnormalized convention `sum_r |P(r) - Q(r)|`, twice the
/// common half-normalized total variation.
pub fn tv_empirical<K: Ord + Clone>(p: &EmpiricalDist<K>, q: &EmpiricalDist<K>) -> f64 {
    let mut keys: Vec<&K> = p.counts.keys().chain(q.counts.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.iter().map(|key| (p.prob(key) - q.prob(key)).abs()).sum()
}

/// Total variation between two same-level 3-adic tables, in the
/// unnormalized convention `sum_r |P(r) - Q(r)|`.
pub fn tv_dist3<S: Scalar>(p: &Dist3<S>, q: &Dist3<S>) -> Result<S> {
    if p.level() != q.level() {
        return Err(Error::SpaceMismatch);
    }
    Ok(S::sum_fiber(
        p.probs().iter().zip(q.probs()).map(|(a, b)| (a.clone() - b.clone()).abs()),
    ))
}

/// The exact law of the n-step valuation tuple over a uniformly random odd
/// residue class mod 2^m, split at the point where the class stops
/// determining the orbit.
///
/// A class whose running valuation sum reaches m is terminal ("escaped"):
/// beyond that point the residue no longer pins down the next valuation.
// ValuationTuple's interior mutability is a prefix-sum cache that never
// affects Eq/Ord/Hash, so it is a sound map key.
#[allow(clippy::mutable_key_type)]
#[derive(Debug, Clone)]
pub struct TailMass {
    n: u32,
    m: u32,
    counts: BTreeMap<ValuationTuple, u64>,
    escaped_count: u64,
}

impl TailMass {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Number of odd residue classes mod 2^m.
    pub fn total(&self) -> u64 {
        1u64 << (self.m - 1)
    }

    #[allow(clippy::mutable_key_type)]
    pub fn counts(&self) -> &BTreeMap<ValuationTuple, u64> {
        &self.counts
    }

    pub fn escaped_count(&self) -> u64 {
        self.escaped_count
    }

    pub fn mass(&self, tuple: &ValuationTuple) -> Rational {
        ratio_u64(*self.counts.get(tuple).unwrap_or(&0), self.total())
    }

    pub fn escaped_mass(&self) -> Rational {
        ratio_u64(self.escaped_count, self.total())
    }

    pub fn in_range_mass(&self) -> Rational {
        ratio_u64(self.total() - self.escaped_count, self.total())
    }
}

fn ratio_u64(num: u64, den: u64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Enumerate all odd residues mod 2^m and record each class's valuation
/// tuple while its running sum stays below m.
pub fn exact_valuation_distribution(n: u32, m: u32) -> Result<TailMass> {
    exact_valuation_distribution_with_budget(n, m, DEFAULT_ENUM_BUDGET)
}

#[allow(clippy::mutable_key_type)]
pub fn exact_valuation_distribution_with_budget(n: u32, m: u32, budget: u32) -> Result<TailMass> {
    if m < 1 {
        return Err(Error::BadParameter("modulus exponent m must be >= 1".into()));
    }
    if m > budget {
        return Err(Error::BudgetExceeded { requested: m, budget });
    }
    // Orbit values stay below 2^m * (3/2)^n * 3; keep u128 iteration safe.
    if m as u64 + (n as u64) * 2 / 3 + 3 > 126 {
        return Err(Error::BudgetExceeded { requested: m + n, budget: 126 });
    }

    let half = 1u64 << (m - 1);
    let scan = |lo: u64, hi: u64| -> (BTreeMap<Vec<u64>, u64>, u64) {
        let mut counts: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
        let mut escaped = 0u64;
        for i in lo..hi {
            let r = 2 * i + 1;
            let mut v: u128 = r as u128;
            let mut sum = 0u64;
            let mut entries = Vec::with_capacity(n as usize);
            let mut fell_out = false;
            for _ in 0..n {
                let t = 3 * v + 1;
                let a = t.trailing_zeros() as u64;
                if sum + a >= m as u64 {
                    fell_out = true;
                    break;
                }
                sum += a;
                entries.push(a);
                v = t >> a;
            }
            if fell_out {
                escaped += 1;
            } else {
                *counts.entry(entries).or_insert(0) += 1;
            }
        }
        (counts, escaped)
    };

    let chunk = 1u64 << 16;
    let (raw_counts, escaped_count) = if half > chunk {
        (0..half.div_ceil(chunk))
            .into_par_iter()
            .map(|b| scan(b * chunk, ((b + 1) * chunk).min(half)))
            .reduce(
                || (BTreeMap::new(), 0),
                |(mut ca, ea), (cb, eb)| {
                    for (k, c) in cb {
                        *ca.entry(k).or_insert(0) += c;
                    }
                    (ca, ea + eb)
                },
            )
    } else {
        scan(0, half)
    };

    let counts = raw_counts
        .into_iter()
        .map(|(entries, c)| (ValuationTuple::new(entries).expect("entries >= 1"), c))
        .collect();
    Ok(TailMass { n, m, counts, escaped_count })
}

/// Exact TV comparison between the enumerated valuation law and the Geom(2)^n
/// product law `P(a) = 2^{-|a|}`.
///
/// The enumeration's escaped mass is a single terminal outcome with no
/// counterpart atom in the product law, and the product law's tail
/// `|a| >= m` has no counterpart in the enumeration, so on the union space
/// the two tails enter the sum separately.  The in-range discrepancy is zero
/// by the residue-class counting identity; it is computed anyway.
#[derive(Debug, Clone, Serialize)]
pub struct ValuationTv {
    pub n: u32,
    pub m: u32,
    #[serde(serialize_with = "crate::stochastic::serialize_rational")]
    pub tv: Rational,
    #[serde(serialize_with = "crate::stochastic::serialize_rational")]
    pub in_range_discrepancy: Rational,
    #[serde(serialize_with = "crate::stochastic::serialize_rational")]
    pub escaped_mass_model: Rational,
    #[serde(serialize_with = "crate::stochastic::serialize_rational")]
    pub escaped_mass_geom: Rational,
}

pub fn serialize_rational<Ser: serde::Serializer>(
    r: &Rational,
    s: Ser,
) -> std::result::Result<Ser::Ok, Ser::Error> {
    s.serialize_str(&r.to_string())
}

pub fn tv_valuation_vs_geom(n: u32, m: u32) -> Result<ValuationTv> {
    tv_valuation_vs_geom_with_budget(n, m, DEFAULT_ENUM_BUDGET)
}

pub fn tv_valuation_vs_geom_with_budget(n: u32, m: u32, budget: u32) -> Result<ValuationTv> {
    let tail = exact_valuation_distribution_with_budget(n, m, budget)?;

    let mut in_range = Rational::zero();
    let mut attained_geom = Rational::zero();
    for (tuple, &count) in tail.counts() {
        let geom = geom_tuple_mass(tuple.size());
        attained_geom += geom.clone();
        let model = ratio_u64(count, tail.total());
        in_range += Scalar::abs(&(model - geom));
    }
    // Geom mass on completed tuples the enumeration never attained (none, by
    // the counting identity, but the tally must not assume it).
    let completed_geom = geom_completed_mass(n, m);
    in_range += completed_geom.clone() - attained_geom;

    let escaped_geom = Rational::one() - completed_geom;
    let escaped_model = tail.escaped_mass();
    let tv = in_range.clone() + escaped_model.clone() + escaped_geom.clone();
    Ok(ValuationTv {
        n,
        m,
        tv,
        in_range_discrepancy: in_range,
        escaped_mass_model: escaped_model,
        escaped_mass_geom: escaped_geom,
    })
}

/// `P(Geom(2)^n = a) = 2^{-|a|}` for a fixed tuple of size s.
fn geom_tuple_mass(s: u64) -> Rational {
    BigRational::new(BigInt::one(), BigInt::from(BigUint::one() << s as usize))
}

/// `P(|Geom(2)^n| <= m-1)`: there are C(s-1, n-1) tuples of size s.
fn geom_completed_mass(n: u32, m: u32) -> Rational {
    if n == 0 {
        return Rational::one();
    }
    let mut total = Rational::zero();
    for s in n as u64..m as u64 {
        let ways = binomial(BigUint::from(s - 1), BigUint::from(n as u64 - 1));
        total += BigRational::new(
            BigInt::from(ways),
            BigInt::from(BigUint::one() << s as usize),
        );
    }
    total
}
