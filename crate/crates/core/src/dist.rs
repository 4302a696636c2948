//! Distributions of the Syracuse random variables on Z/3^n Z, built by the
//! level-raising recursion, together with their projections, the oscillation
//! functional at 3-adic scales, and character (Fourier) sums.
//!
//! The table type [`Dist3`] is generic over the scalar.  The exact
//! instantiation keeps every entry a reduced rational; internally the builder
//! works over a common denominator `prod (2^{2*3^k} - 1)` so a level raise is
//! pure shift-and-add on big integers.  The float instantiation runs the same
//! recursion in doubles, truncating the geometric weights once they underflow
//! (the discarded tail is below 2^-1074 per term).

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default ceiling for exact tables (3^8 = 6561 rationals).
pub const DEFAULT_EXACT_CEILING: u32 = 8;
/// Default ceiling for float tables (3^15 entries, about 115 MB).
pub const DEFAULT_FLOAT_CEILING: u32 = 15;
/// Hard cap so 4 * 3^n stays inside u64 index arithmetic.
pub const MAX_SUPPORTED_LEVEL: u32 = 39;

fn pow3_u64(n: u32) -> u64 {
    3u64.pow(n)
}

/// A probability table over Z/3^n Z.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist3<S> {
    level: u32,
    probs: Vec<S>,
}

impl<S: Scalar> Dist3<S> {
    pub fn from_probs(level: u32, probs: Vec<S>) -> Self {
        assert_eq!(probs.len() as u64, pow3_u64(level));
        Dist3 { level, probs }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn modulus(&self) -> u64 {
        pow3_u64(self.level)
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn total_mass(&self) -> S {
        S::sum_fiber(self.probs.iter().cloned())
    }

    /// Pushforward under reduction mod 3^k: sum each fiber `{Y' = Y mod 3^k}`.
    pub fn project(&self, k: u32) -> Result<Self> {
        if k > self.level {
            return Err(Error::BadLevel { requested: k, level: self.level });
        }
        let mk = pow3_u64(k) as usize;
        let count = pow3_u64(self.level - k) as usize;
        let probs = (0..mk)
            .map(|r| S::sum_fiber((0..count).map(|t| self.probs[r + t * mk].clone())))
            .collect();
        Ok(Dist3 { level: k, probs })
    }

    /// Oscillation at 3-adic scale 3^-m: the total absolute deviation of the
    /// table from its averages over the cosets of 3^m Z/3^n Z,
    /// `sum_Y |c_Y - 3^{m-n} sum_{Y' = Y mod 3^m} c_{Y'}|`.
    ///
    /// m = 0 is accepted (deviation from the global average); the
    /// characteristic-function comparison needs `Osc_{n-1,n}` down at n = 1.
    pub fn oscillation(&self, m: u32) -> Result<S> {
        if m > self.level {
            return Err(Error::BadLevel { requested: m, level: self.level });
        }
        let mm = pow3_u64(m) as usize;
        let count = pow3_u64(self.level - m) as usize;
        let scale = S::pow3(m as i32 - self.level as i32);
        let averages: Vec<S> = (0..mm)
            .map(|r| {
                S::sum_fiber((0..count).map(|t| self.probs[r + t * mm].clone()))
                    * scale.clone()
            })
            .collect();
        Ok(S::sum_fiber(
            self.probs
                .iter()
                .enumerate()
                .map(|(y, p)| (p.clone() - averages[y % mm].clone()).abs()),
        ))
    }

    /// The character sum `E e^{-2 pi i xi Y / 3^n}` of the table.
    pub fn char_sum(&self, xi: u64) -> Complex64 {
        let m = self.modulus();
        let xi = xi % m;
        let scale = -2.0 * PI / m as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (y, p) in self.probs.iter().enumerate() {
            let p = p.to_f64();
            if p == 0.0 {
                continue;
            }
            let r = ((xi as u128 * y as u128) % m as u128) as u64;
            let angle = scale * r as f64;
            re += p * angle.cos();
            im += p * angle.sin();
        }
        Complex64::new(re, im)
    }
}

/// Numerator table over the running common denominator `den`.
struct RawExact {
    level: u32,
    nums: Vec<BigUint>,
    den: BigUint,
}

impl RawExact {
    fn base() -> Self {
        RawExact { level: 0, nums: vec![BigUint::one()], den: BigUint::one() }
    }

    /// One application of the level-raising recursion
    /// `P(X_{n+1} = x) = [sum_{a} 2^{-a} P(X_n = (2^a x - 1)/3)] / (1 - 2^{-2*3^n})`,
    /// where a runs over the parity class with `2^a x = 1 mod 3`.  Multiplying
    /// through by `2^{2*3^n}` turns the inner sum into shift-and-add over the
    /// previous numerators.
    fn raise(&self) -> Self {
        let k = self.level;
        let period = 2 * pow3_u64(k);
        let m_new = pow3_u64(k + 1);
        let compute = |x: u64| -> BigUint {
            if x % 3 == 0 {
                return BigUint::zero();
            }
            let (mut a, mut v) =
                if x % 3 == 1 { (2u64, 4 * x % m_new) } else { (1u64, 2 * x % m_new) };
            let mut acc = BigUint::zero();
            while a <= period {
                debug_assert_eq!(v % 3, 1);
                let y = ((v - 1) / 3) as usize;
                if !self.nums[y].is_zero() {
                    acc += &self.nums[y] << (period - a) as usize;
                }
                a += 2;
                v = 4 * v % m_new;
            }
            acc
        };
        let nums: Vec<BigUint> = if m_new >= 2187 {
            (0..m_new).into_par_iter().map(compute).collect()
        } else {
            (0..m_new).map(compute).collect()
        };
        let den = &self.den * ((BigUint::one() << period as usize) - 1u32);
        let mass: BigUint = nums.iter().sum();
        assert_eq!(mass, den, "level {} table does not sum to 1", k + 1);
        RawExact { level: k + 1, nums, den }
    }

    fn to_dist(&self) -> crate::Dist3Adic {
        let den = BigInt::from(self.den.clone());
        let probs = self
            .nums
            .iter()
            .map(|m| BigRational::new(BigInt::from(m.clone()), den.clone()))
            .collect();
        Dist3 { level: self.level, probs }
    }
}

/// The exact distribution of `Syrac(Z/3^n Z)` under the default ceiling.
pub fn syracuse_dist_exact(n: u32) -> Result<crate::Dist3Adic> {
    syracuse_dist_exact_with_ceiling(n, DEFAULT_EXACT_CEILING)
}

pub fn syracuse_dist_exact_with_ceiling(n: u32, ceiling: u32) -> Result<crate::Dist3Adic> {
    Ok(syracuse_dist_exact_levels_with_ceiling(n, ceiling)?.pop().expect("nonempty"))
}

/// All exact levels 0..=n at once (they share the recursion).
pub fn syracuse_dist_exact_levels(n: u32) -> Result<Vec<crate::Dist3Adic>> {
    syracuse_dist_exact_levels_with_ceiling(n, DEFAULT_EXACT_CEILING)
}

pub fn syracuse_dist_exact_levels_with_ceiling(
    n: u32,
    ceiling: u32,
) -> Result<Vec<crate::Dist3Adic>> {
    let ceiling = ceiling.min(MAX_SUPPORTED_LEVEL);
    if n > ceiling {
        return Err(Error::LevelTooLarge { level: n, ceiling });
    }
    let mut raw = RawExact::base();
    let mut out = vec![raw.to_dist()];
    for _ in 0..n {
        raw = raw.raise();
        out.push(raw.to_dist());
    }
    Ok(out)
}

fn raise_float(prev: &[f64], k: u32) -> Vec<f64> {
    let period = 2 * pow3_u64(k);
    let m_new = pow3_u64(k + 1);
    // For period >= 54 the normalizer 1/(1 - 2^-period) rounds to 1.
    let normalizer =
        if period >= 54 { 1.0 } else { 1.0 / (1.0 - 0.5f64.powi(period as i32)) };
    let compute = |x: u64| -> f64 {
        if x % 3 == 0 {
            return 0.0;
        }
        let (mut a, mut v, mut w) = if x % 3 == 1 {
            (2u64, 4 * x % m_new, 0.25f64)
        } else {
            (1u64, 2 * x % m_new, 0.5f64)
        };
        let mut acc = 0.0;
        while a <= period && w > 0.0 {
            debug_assert_eq!(v % 3, 1);
            acc += w * prev[((v - 1) / 3) as usize];
            a += 2;
            w *= 0.25;
            v = 4 * v % m_new;
        }
        acc * normalizer
    };
    if m_new >= 2187 {
        (0..m_new).into_par_iter().map(compute).collect()
    } else {
        (0..m_new).map(compute).collect()
    }
}

/// The same recursion in double precision, for levels beyond the exact
/// ceiling.  Weights 2^-a are accumulated in decreasing order per entry.
pub fn syracuse_dist_float(n: u32) -> Result<crate::Dist3AdicFloat> {
    syracuse_dist_float_with_ceiling(n, DEFAULT_FLOAT_CEILING)
}

pub fn syracuse_dist_float_with_ceiling(n: u32, ceiling: u32) -> Result<crate::Dist3AdicFloat> {
    let ceiling = ceiling.min(MAX_SUPPORTED_LEVEL);
    if n > ceiling {
        return Err(Error::LevelTooLarge { level: n, ceiling });
    }
    let mut probs = vec![1.0f64];
    for k in 0..n {
        probs = raise_float(&probs, k);
    }
    Ok(Dist3 { level: n, probs })
}

/// Report of the triangle-inequality check `|char| <= Osc_{n-1,n}` over all
/// frequencies not divisible by 3.
#[derive(Debug, Clone, Serialize)]
pub struct CharOscReport {
    pub n: u32,
    pub oscillation: f64,
    pub max_abs_char: f64,
    /// Max over xi of |char| - Osc_{n-1,n}; the bound holds when this is
    /// below the tolerance.
    pub max_slack: f64,
    pub holds: bool,
    pub frequencies_checked: u64,
}

pub const CHAR_OSC_TOLERANCE: f64 = 1e-9;

/// Check `|E e^{-2 pi i xi X / 3^n}| <= Osc_{n-1,n}` for every xi with
/// `3 !| xi`, exactly as far as the oscillation side is concerned.
pub fn char_osc_inequality_check(n: u32) -> Result<CharOscReport> {
    char_osc_inequality_check_with_ceiling(n, DEFAULT_EXACT_CEILING)
}

pub fn char_osc_inequality_check_with_ceiling(n: u32, ceiling: u32) -> Result<CharOscReport> {
    if n < 1 {
        return Err(Error::BadLevel { requested: n, level: 0 });
    }
    let dist = syracuse_dist_exact_with_ceiling(n, ceiling)?;
    let osc = dist.oscillation(n - 1)?.to_f64();
    let m = dist.modulus();
    let mut max_abs = 0.0f64;
    let mut checked = 0u64;
    for xi in 1..m {
        if xi % 3 == 0 {
            continue;
        }
        checked += 1;
        let c = dist.char_sum(xi).norm();
        if c > max_abs {
            max_abs = c;
        }
    }
    let max_slack = max_abs - osc;
    Ok(CharOscReport {
        n,
        oscillation: osc,
        max_abs_char: max_abs,
        max_slack,
        holds: max_slack <= CHAR_OSC_TOLERANCE,
        frequencies_checked: checked,
    })
}

/// One row of a character-decay probe table.
#[derive(Debug, Clone, Serialize)]
pub struct CharProbe {
    pub n: u32,
    pub xi: u64,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
}

/// Fixed frequencies probed at every level.
pub const FIXED_PROBES: [u64; 4] = [1, 2, 5, 7];

/// Assemble the probe frequencies for level n: the candidates reduced mod
/// 3^n with multiples of 3 rejected, deduplicated, then `random` extra
/// frequencies coprime to 3 drawn from the seeded stream.
pub fn probe_set(n: u32, candidates: &[u64], random: usize, seed: u64) -> Vec<u64> {
    if n == 0 {
        return vec![0];
    }
    let m = pow3_u64(n);
    let mut out: Vec<u64> = Vec::new();
    for &c in candidates {
        let xi = c % m;
        if xi % 3 != 0 && !out.contains(&xi) {
            out.push(xi);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    let mut drawn = 0;
    while drawn < random {
        let xi = rng.gen_range(1..m);
        if xi % 3 == 0 {
            continue;
        }
        drawn += 1;
        if !out.contains(&xi) {
            out.push(xi);
        }
    }
    out
}

/// Probe |char_sum| on the float path for each requested level, at the fixed
/// frequencies {1,2,5,7} plus `random` seeded extras per level.
pub fn char_probe_table(n_list: &[u32], random: usize, seed: u64) -> Result<Vec<CharProbe>> {
    char_probe_table_with_ceiling(n_list, random, seed, DEFAULT_FLOAT_CEILING)
}

pub fn char_probe_table_with_ceiling(
    n_list: &[u32],
    random: usize,
    seed: u64,
    ceiling: u32,
) -> Result<Vec<CharProbe>> {
    let ceiling = ceiling.min(MAX_SUPPORTED_LEVEL);
    let max_n = n_list.iter().copied().max().unwrap_or(0);
    if max_n > ceiling {
        return Err(Error::LevelTooLarge { level: max_n, ceiling });
    }
    let mut rows = Vec::new();
    let mut probs = vec![1.0f64];
    for level in 0..=max_n {
        if level > 0 {
            probs = raise_float(&probs, level - 1);
        }
        if !n_list.contains(&level) {
            continue;
        }
        let dist = Dist3 { level, probs: probs.clone() };
        for xi in probe_set(level, &FIXED_PROBES, random, seed) {
            let c = dist.char_sum(xi);
            rows.push(CharProbe { n: level, xi, re: c.re, im: c.im, abs: c.norm() });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn ratio(num: i64, den: i64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    /// Direct transcription of the level-raising formula, summing over the
    /// full range 1 <= a <= 2*3^n with the congruence filter.  Slow; used as
    /// an independent oracle for the shift-and-add kernel.
    fn raise_direct(prev: &[BigRational], k: u32) -> Vec<BigRational> {
        let period = 2 * pow3_u64(k);
        let m_new = pow3_u64(k + 1);
        let m_prev = pow3_u64(k);
        let normalizer = BigRational::one()
            - BigRational::new(BigInt::one(), BigInt::from(BigUint::one() << period as usize));
        (0..m_new)
            .map(|x| {
                let mut acc = BigRational::zero();
                for a in 1..=period {
                    let pow = BigUint::from(2u32).modpow(
                        &BigUint::from(a),
                        &BigUint::from(m_new),
                    );
                    let v = (pow * x as u32 % m_new).to_u64().unwrap();
                    if v % 3 != 1 {
                        continue;
                    }
                    let y = ((v - 1) / 3 % m_prev) as usize;
                    let w = BigRational::new(
                        BigInt::one(),
                        BigInt::from(BigUint::one() << a as usize),
                    );
                    acc += w * prev[y].clone();
                }
                acc / normalizer.clone()
            })
            .collect()
    }

    #[test]
    fn exact_level_zero_is_point_mass() {
        let d = syracuse_dist_exact(0).unwrap();
        assert_eq!(d.probs(), &[BigRational::one()]);
    }

    #[test]
    fn exact_level_one_matches_published_table() {
        let d = syracuse_dist_exact(1).unwrap();
        assert_eq!(d.probs(), &[ratio(0, 1), ratio(1, 3), ratio(2, 3)]);
    }

    #[test]
    fn exact_level_two_matches_published_table() {
        let d = syracuse_dist_exact(2).unwrap();
        let expected: Vec<BigRational> = [
            (0, 1),
            (8, 63),
            (16, 63),
            (0, 1),
            (11, 63),
            (4, 63),
            (0, 1),
            (2, 63),
            (22, 63),
        ]
        .iter()
        .map(|&(p, q)| ratio(p, q))
        .collect();
        assert_eq!(d.probs(), &expected[..]);
    }

    #[test]
    fn kernel_agrees_with_direct_recursion() {
        let mut direct = vec![BigRational::one()];
        for k in 0..3 {
            direct = raise_direct(&direct, k);
            let fast = syracuse_dist_exact(k + 1).unwrap();
            assert_eq!(fast.probs(), &direct[..], "level {}", k + 1);
        }
    }

    #[test]
    fn float_matches_exact_small_levels() {
        for n in 0..=5 {
            let exact = syracuse_dist_exact(n).unwrap();
            let float = syracuse_dist_float(n).unwrap();
            for (e, f) in exact.probs().iter().zip(float.probs()) {
                assert!((ToPrimitive::to_f64(e).unwrap() - f).abs() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn float_level_six_mass() {
        let d = syracuse_dist_float(6).unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn float_mass_within_type_tolerance() {
        for n in [3u32, 7, 10] {
            let d = syracuse_dist_float(n).unwrap();
            let budget = 3f64.powi(n as i32) * 2f64.powi(-40);
            assert!((d.total_mass() - 1.0).abs() <= budget, "n={n}");
        }
    }

    #[test]
    fn float_zero_on_multiples_of_three() {
        let d = syracuse_dist_float(1).unwrap();
        assert_eq!(d.probs()[0], 0.0);
        let d = syracuse_dist_float(4).unwrap();
        for y in (0..d.modulus()).step_by(3) {
            assert_eq!(d.probs()[y as usize], 0.0);
        }
    }

    #[test]
    fn projection_examples() {
        let d2 = syracuse_dist_exact(2).unwrap();
        let d1 = syracuse_dist_exact(1).unwrap();
        assert_eq!(d2.project(1).unwrap(), d1);
        assert_eq!(d2.project(2).unwrap(), d2);
        let p0 = d2.project(0).unwrap();
        assert_eq!(p0.probs(), &[BigRational::one()]);
        assert!(matches!(d2.project(3), Err(Error::BadLevel { .. })));
    }

    #[test]
    fn projection_consistency_small_levels() {
        let levels = syracuse_dist_exact_levels(4).unwrap();
        for n in 0..levels.len() {
            for k in 0..=n {
                assert_eq!(levels[n].project(k as u32).unwrap(), levels[k]);
            }
        }
    }

    #[test]
    fn oscillation_values() {
        let d2 = syracuse_dist_exact(2).unwrap();
        assert!(d2.oscillation(2).unwrap().is_zero());
        assert_eq!(d2.oscillation(1).unwrap(), ratio(10, 21));
        let d1 = syracuse_dist_exact(1).unwrap();
        assert!(d1.oscillation(1).unwrap().is_zero());
        // Osc_{0,1}: deviation from the global average 1/3 is 2/3.
        assert_eq!(d1.oscillation(0).unwrap(), ratio(2, 3));
        assert!(matches!(d1.oscillation(2), Err(Error::BadLevel { .. })));
    }

    #[test]
    fn char_sum_values() {
        let d1 = syracuse_dist_exact(1).unwrap();
        let c = d1.char_sum(0);
        assert!((c.re - 1.0).abs() < 1e-15 && c.im.abs() < 1e-15);

        let c = d1.char_sum(1);
        assert!((c.re - (-0.5)).abs() < 1e-14);
        assert!((c.im - 3f64.sqrt() / 6.0).abs() < 1e-14);
        assert!((c.norm() - 1.0 / 3f64.sqrt()).abs() < 1e-14);

        let d0 = syracuse_dist_exact(0).unwrap();
        assert_eq!(d0.char_sum(0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn char_bounded_by_one() {
        let d = syracuse_dist_float(5).unwrap();
        for xi in [0u64, 1, 2, 5, 100] {
            assert!(d.char_sum(xi).norm() <= 1.0 + 1e-12);
        }
        assert!((d.char_sum(0).norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn char_osc_inequality_small_levels() {
        for n in 1..=4 {
            let report = char_osc_inequality_check(n).unwrap();
            assert!(report.holds, "n={n}: slack {}", report.max_slack);
        }
    }

    #[test]
    fn probe_set_rejects_multiples_of_three() {
        let probes = probe_set(2, &[1, 2, 3, 5, 7], 4, 99);
        assert!(!probes.contains(&3));
        assert!(probes.iter().all(|&xi| xi % 3 != 0 && xi < 9));
        assert_eq!(probe_set(0, &[1, 2], 3, 0), vec![0]);
    }

    #[test]
    fn probe_table_deterministic() {
        let a = char_probe_table(&[0, 1, 2], 2, 42).unwrap();
        let b = char_probe_table(&[0, 1, 2], 2, 42).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.n, x.xi), (y.n, y.xi));
            assert_eq!(x.abs.to_bits(), y.abs.to_bits());
        }
        assert_eq!(a[0].n, 0);
        assert_eq!(a[0].abs, 1.0);
    }

    #[test]
    fn level_ceiling_enforced() {
        assert!(matches!(
            syracuse_dist_exact(9),
            Err(Error::LevelTooLarge { level: 9, ceiling: 8 })
        ));
        assert!(matches!(
            syracuse_dist_float(16),
            Err(Error::LevelTooLarge { level: 16, ceiling: 15 })
        ));
        assert!(syracuse_dist_exact_with_ceiling(3, 3).is_ok());
    }
}
