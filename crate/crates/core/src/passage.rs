//! First passage times and locations of Syracuse orbits, logarithmically
//! uniform sampling over odd ranges, and the two-threshold stabilisation
//! experiment.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{syracuse_step, OddNatural};
use crate::error::{Error, Result};
use crate::stochastic::{tv_empirical, EmpiricalDist, Seed};

const LOG_4_3: f64 = 0.287_682_072_451_780_9; // ln(4/3)

/// When the orbit never dips to the threshold within the cap, the location
/// takes the conventional value 1 and the time is marked exhausted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PassageTime {
    Finite(u64),
    CapExhausted,
}

impl PassageTime {
    pub fn finite(&self) -> Option<u64> {
        match self {
            PassageTime::Finite(t) => Some(*t),
            PassageTime::CapExhausted => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PassageOutcome {
    pub time: PassageTime,
    pub location: OddNatural,
    /// Largest orbit element seen while searching.
    pub trajectory_max: BigUint,
}

/// The least n <= cap with Syr^n(N) <= x, together with the orbit value
/// there.  Cap exhaustion is a value, not an error.
pub fn first_passage(n: &OddNatural, x: &BigUint, cap: u64) -> PassageOutcome {
    let mut cur = n.clone();
    let mut max = cur.value().clone();
    for t in 0..=cap {
        if cur.value() <= x {
            return PassageOutcome {
                time: PassageTime::Finite(t),
                location: cur,
                trajectory_max: max,
            };
        }
        cur = syracuse_step(&cur);
        if cur.value() > &max {
            max = cur.value().clone();
        }
    }
    PassageOutcome {
        time: PassageTime::CapExhausted,
        location: OddNatural::from_u64(1).unwrap(),
        trajectory_max: max,
    }
}

/// Ranges wider than this use rejection from the continuous log density;
/// narrower ones get exact inverse-CDF sampling on the partial sums.
const EXACT_RANGE_MAX: u64 = 10_000_000;

/// Sampler for the logarithmically uniform distribution on the odd integers
/// of `[lo, hi]`: `P(N) proportional to 1/N`.
pub struct LogUniform {
    lo_odd: u64,
    hi_odd: u64,
    /// Cumulative 1/N weights for the exact path; empty on the rejection path.
    cumulative: Vec<f64>,
    log_lo: f64,
    log_hi: f64,
}

impl LogUniform {
    pub fn new(lo: &BigUint, hi: &BigUint) -> Result<Self> {
        if lo < &BigUint::from(3u32) {
            return Err(Error::BadParameter("log-uniform range must start at >= 3".into()));
        }
        if lo > hi {
            return Err(Error::EmptyRange);
        }
        if hi.bits() > 62 {
            return Err(Error::BadParameter(
                "log-uniform range beyond 2^62 not supported".into(),
            ));
        }
        let lo = lo.to_u64().unwrap();
        let hi = hi.to_u64().unwrap();
        let lo_odd = if lo % 2 == 0 { lo + 1 } else { lo };
        let hi_odd = if hi % 2 == 0 { hi - 1 } else { hi };
        if lo_odd > hi_odd {
            return Err(Error::EmptyRange);
        }
        let count = (hi_odd - lo_odd) / 2 + 1;
        let cumulative = if count <= EXACT_RANGE_MAX {
            let mut acc = 0.0;
            let mut cum = Vec::with_capacity(count as usize);
            for i in 0..count {
                acc += 1.0 / (lo_odd + 2 * i) as f64;
                cum.push(acc);
            }
            cum
        } else {
            Vec::new()
        };
        Ok(LogUniform {
            lo_odd,
            hi_odd,
            cumulative,
            log_lo: ((lo_odd - 1) as f64).ln(),
            log_hi: ((hi_odd + 1) as f64).ln(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> OddNatural {
        let n = if self.cumulative.is_empty() {
            self.sample_rejection(rng)
        } else {
            self.sample_exact(rng)
        };
        OddNatural::from_u64(n).expect("sampler yields odd values")
    }

    fn sample_exact<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let total = *self.cumulative.last().unwrap();
        let u: f64 = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c < u);
        self.lo_odd + 2 * (idx as u64).min((self.cumulative.len() - 1) as u64)
    }

    fn sample_rejection<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        loop {
            let u: f64 = rng.gen();
            let z = (self.log_lo + u * (self.log_hi - self.log_lo)).exp();
            // Snap to the nearest odd integer; its covering interval
            // (N-1, N+1) has log-length ln((N+1)/(N-1)) >= 2/N.
            let n = 2 * ((z - 1.0) / 2.0).round() as u64 + 1;
            if n < self.lo_odd || n > self.hi_odd {
                continue;
            }
            let nf = n as f64;
            let accept = (2.0 / nf) / ((nf + 1.0) / (nf - 1.0)).ln();
            if rng.gen::<f64>() < accept {
                return n;
            }
        }
    }
}

/// Draw one odd N in [lo, hi] with probability proportional to 1/N.
pub fn sample_log_uniform<R: Rng + ?Sized>(
    lo: &BigUint,
    hi: &BigUint,
    rng: &mut R,
) -> Result<OddNatural> {
    Ok(LogUniform::new(lo, hi)?.sample(rng))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    /// Threshold x >= 2.
    pub x: u64,
    /// Range exponent alpha > 1.
    pub alpha: f64,
    /// Samples per arm.
    pub samples: u64,
    pub seed: Seed,
    /// Per-sample iteration cap; `None` uses `10 ln(N) / ln(4/3)`.
    pub cap: Option<u64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.x < 2 {
            return Err(Error::BadParameter("threshold x must be >= 2".into()));
        }
        if self.alpha.is_nan() || self.alpha <= 1.0 {
            return Err(Error::BadParameter("alpha must exceed 1".into()));
        }
        if self.cap == Some(0) {
            return Err(Error::BadParameter("cap must be >= 1".into()));
        }
        if self.samples >= 1 << 32 {
            return Err(Error::BadParameter("at most 2^32 samples per arm".into()));
        }
        Ok(())
    }

    /// `n_0 = floor(log x / (10 log 2))`.
    pub fn n0(&self) -> u64 {
        ((self.x as f64).ln() / (10.0 * 2f64.ln())).floor() as u64
    }

    /// `m_0 = floor((alpha - 1)/100 * log x)`.
    pub fn m0(&self) -> u64 {
        ((self.alpha - 1.0) / 100.0 * (self.x as f64).ln()).floor() as u64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleRecord {
    pub n: u64,
    pub time: Option<u64>,
    pub location: u64,
    /// Passage-time prediction `ln(N/x) / ln(4/3)`.
    pub predicted_time: f64,
    /// `|ln Syr^p(N) - ln N - p ln(3/4)|` at the probe step p.
    pub probe_log_dev: f64,
}

#[derive(Debug, Clone)]
pub struct ArmReport {
    pub label: &'static str,
    pub lo: BigUint,
    pub hi: BigUint,
    pub exhausted: u64,
    /// Finite-time passage locations only; exhausted samples are excluded
    /// here and counted in the exhaustion rate.
    pub locations: EmpiricalDist<u64>,
    pub records: Vec<SampleRecord>,
    pub decay_probe_violations: u64,
    pub median_time_ratio: f64,
}

impl ArmReport {
    pub fn exhaustion_rate(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.exhausted as f64 / self.records.len() as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct PassageReport {
    pub config: ExperimentConfig,
    pub probe_step: u64,
    pub arms: [ArmReport; 2],
    /// Empirical TV (unnormalized convention) between the two location laws.
    pub tv: f64,
}

fn default_cap(n: &BigUint) -> u64 {
    (10.0 * ln_big(n) / LOG_4_3).ceil() as u64 + 1
}

/// Natural log of a big integer via its bit length.
pub(crate) fn ln_big(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 53 {
        return (n.to_u64().unwrap() as f64).ln();
    }
    let top = (n >> (bits - 53)).to_u64().unwrap();
    (top as f64).ln() + (bits - 53) as f64 * 2f64.ln()
}

fn run_sample(
    n: &OddNatural,
    x: &BigUint,
    cap: u64,
    probe_step: u64,
) -> (Option<u64>, u64, f64, f64) {
    let nf = ln_big(n.value());
    let xf = ln_big(x);
    let predicted = ((nf - xf) / LOG_4_3).max(0.0);

    let mut cur = n.clone();
    let mut probe_dev = 0.0;
    let mut time = None;
    for t in 0..=cap {
        if t == probe_step {
            probe_dev = (ln_big(cur.value()) - nf + t as f64 * LOG_4_3).abs();
        }
        if cur.value() <= x {
            time = Some(t);
            break;
        }
        cur = syracuse_step(&cur);
    }
    let location = match time {
        Some(_) => cur.value().to_u64().expect("location <= x fits u64"),
        None => 1,
    };
    (time, location, predicted, probe_dev)
}

/// Draw both arms (`y = x^alpha` and `y = x^alpha^2`), record passage data,
/// and compare the two location distributions.
pub fn passage_experiment(config: &ExperimentConfig) -> Result<PassageReport> {
    config.validate()?;
    let x_big = BigUint::from(config.x);
    let xf = config.x as f64;
    let probe_step = config.n0() / 2;
    let decay_budget = 10.0 * (xf.ln()).powf(0.6);

    let mut arms = Vec::with_capacity(2);
    for (arm_idx, label) in [(0u64, "x^alpha"), (1u64, "x^alpha^2")] {
        let y = xf.powf(config.alpha.powi(arm_idx as i32 + 1));
        let lo = BigUint::from(y.ceil() as u64);
        let hi = BigUint::from(y.powf(config.alpha).floor() as u64);
        let sampler = LogUniform::new(&lo, &hi)?;

        let records: Vec<SampleRecord> = (0..config.samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = config.seed.stream((arm_idx << 32) | i);
                let n = sampler.sample(&mut rng);
                let cap = config.cap.unwrap_or_else(|| default_cap(n.value()));
                let (time, location, predicted_time, probe_log_dev) =
                    run_sample(&n, &x_big, cap, probe_step);
                SampleRecord {
                    n: n.value().to_u64().expect("desk-scale sample"),
                    time,
                    location,
                    predicted_time,
                    probe_log_dev,
                }
            })
            .collect();

        let mut locations = EmpiricalDist::new();
        let mut exhausted = 0u64;
        let mut violations = 0u64;
        let mut ratios = Vec::new();
        for r in &records {
            match r.time {
                Some(t) => {
                    locations.record(r.location);
                    if r.predicted_time > 0.0 {
                        ratios.push(t as f64 / r.predicted_time);
                    }
                }
                None => exhausted += 1,
            }
            if r.probe_log_dev > decay_budget {
                violations += 1;
            }
        }
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median_time_ratio =
            if ratios.is_empty() { f64::NAN } else { ratios[ratios.len() / 2] };
        arms.push(ArmReport {
            label,
            lo,
            hi,
            exhausted,
            locations,
            records,
            decay_probe_violations: violations,
            median_time_ratio,
        });
    }

    let second = arms.pop().unwrap();
    let first = arms.pop().unwrap();
    let tv = tv_empirical(&first.locations, &second.locations);
    Ok(PassageReport { config: config.clone(), probe_step, arms: [first, second], tv })
}

/// Sanity of a finished report: every finite-time location is odd, at most
/// x, and above the x/2^64 floor; minimality is re-verified by re-iterating
/// a bounded subsample of orbits.
pub fn passage_support_check(report: &PassageReport) -> bool {
    let x = report.config.x;
    let floor = (x as u128) >> 64;
    for arm in &report.arms {
        for r in &arm.records {
            if r.time.is_some() {
                if r.location % 2 == 0 || r.location > x || (r.location as u128) <= floor {
                    return false;
                }
            } else if r.location != 1 {
                return false;
            }
        }
    }
    minimality_spot_check(report, 1000)
}

/// Re-iterate `count` orbits per arm and confirm the recorded passage time is
/// minimal: every earlier orbit value exceeds x and the location matches.
pub fn minimality_spot_check(report: &PassageReport, count: usize) -> bool {
    let x = BigUint::from(report.config.x);
    for arm in &report.arms {
        let step = (arm.records.len() / count.max(1)).max(1);
        for r in arm.records.iter().step_by(step).take(count) {
            let Some(t) = r.time else { continue };
            let mut cur = OddNatural::from_u64(r.n).unwrap();
            for _ in 0..t {
                if cur.value() <= &x {
                    return false;
                }
                cur = syracuse_step(&cur);
            }
            if cur.value() > &x || cur.value() != &BigUint::from(r.location) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::FromPrimitive;

    fn odd(n: u64) -> OddNatural {
        OddNatural::from_u64(n).unwrap()
    }

    #[test]
    fn first_passage_examples() {
        let out = first_passage(&odd(1), &BigUint::from(1u32), 10);
        assert_eq!(out.time, PassageTime::Finite(0));
        assert_eq!(out.location, odd(1));

        let out = first_passage(&odd(3), &BigUint::from(1u32), 10);
        assert_eq!(out.time, PassageTime::Finite(2));
        assert_eq!(out.location, odd(1));
        assert_eq!(out.trajectory_max, BigUint::from(5u32));

        // 7 <= 10 already, so passage is immediate.
        let out = first_passage(&odd(7), &BigUint::from(10u32), 50);
        assert_eq!(out.time, PassageTime::Finite(0));
        assert_eq!(out.location, odd(7));

        // From 11 the first iterate at or below 10 is Syr^3(11) = 5:
        // 11 -> 17 -> 13 -> 5.
        let out = first_passage(&odd(11), &BigUint::from(10u32), 50);
        assert_eq!(out.time, PassageTime::Finite(3));
        assert_eq!(out.location, odd(5));
    }

    #[test]
    fn first_passage_cap_convention() {
        let out = first_passage(&odd(27), &BigUint::from(2u32), 3);
        assert_eq!(out.time, PassageTime::CapExhausted);
        assert_eq!(out.location, odd(1));
    }

    #[test]
    fn log_uniform_degenerate_range() {
        let n = BigUint::from(101u32);
        let mut rng = Seed(5).stream(0);
        let s = sample_log_uniform(&n, &n, &mut rng).unwrap();
        assert_eq!(s, odd(101));
    }

    #[test]
    fn log_uniform_rejects_bad_ranges() {
        let mut err = LogUniform::new(&BigUint::from(9u32), &BigUint::from(7u32));
        assert!(matches!(err, Err(Error::EmptyRange)));
        err = LogUniform::new(&BigUint::from(4u32), &BigUint::from(4u32));
        assert!(matches!(err, Err(Error::EmptyRange)));
        err = LogUniform::new(&BigUint::from(1u32), &BigUint::from(7u32));
        assert!(matches!(err, Err(Error::BadParameter(_))));
    }

    #[test]
    fn log_uniform_chi_square_small_range() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let lo = BigUint::from(101u32);
        let hi = BigUint::from(199u32);
        let sampler = LogUniform::new(&lo, &hi).unwrap();
        let mut rng = Seed(31).stream(0);
        let draws = 1_000_000u64;
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..draws {
            let n = sampler.sample(&mut rng).value().to_u64().unwrap();
            *counts.entry(n).or_insert(0u64) += 1;
        }
        let total_weight: f64 = (101..=199).step_by(2).map(|n| 1.0 / n as f64).sum();
        let mut stat = 0.0;
        let mut cells = 0;
        for n in (101u64..=199).step_by(2) {
            let expected = draws as f64 * (1.0 / n as f64) / total_weight;
            let observed = *counts.get(&n).unwrap_or(&0) as f64;
            stat += (observed - expected) * (observed - expected) / expected;
            cells += 1;
        }
        let critical = ChiSquared::new((cells - 1) as f64).unwrap().inverse_cdf(1.0 - 1e-6);
        assert!(stat < critical, "chi2 {stat} >= {critical}");
    }

    #[test]
    fn log_uniform_midpoint_mass_wide_range() {
        // Wide enough to take the rejection path.
        let lo = BigUint::from(1_000_001u64);
        let hi = BigUint::from(40_000_000_001u64);
        let sampler = LogUniform::new(&lo, &hi).unwrap();
        assert!(sampler.cumulative.is_empty(), "expected rejection path");
        let mid = BigUint::from_f64((1e6f64 * 4e10).sqrt()).unwrap();
        let mut rng = Seed(32).stream(0);
        let draws = 100_000;
        let below = (0..draws)
            .filter(|_| sampler.sample(&mut rng).value() <= &mid)
            .count();
        let frac = below as f64 / draws as f64;
        assert!((frac - 0.5).abs() < 0.02, "fraction below log-midpoint: {frac}");
    }

    #[test]
    fn support_check_flags_corrupted_location() {
        let cfg = ExperimentConfig {
            x: 1000,
            alpha: 1.25,
            samples: 500,
            seed: Seed(21),
            cap: None,
        };
        let mut report = passage_experiment(&cfg).unwrap();
        assert!(passage_support_check(&report));
        let idx = report.arms[0]
            .records
            .iter()
            .position(|r| r.time.is_some())
            .expect("finite passage exists");
        report.arms[0].records[idx].location = 2 * cfg.x;
        assert!(!passage_support_check(&report));
    }

    #[test]
    fn experiment_identical_seeds_zero_tv() {
        let cfg = ExperimentConfig {
            x: 1000,
            alpha: 1.25,
            samples: 2000,
            seed: Seed(9),
            cap: None,
        };
        let r1 = passage_experiment(&cfg).unwrap();
        let r2 = passage_experiment(&cfg).unwrap();
        assert_eq!(
            tv_empirical(&r1.arms[0].locations, &r2.arms[0].locations),
            0.0
        );
        assert_eq!(r1.tv, r2.tv);
        assert!(passage_support_check(&r1));
    }

    /// Qualitative stability probe: medians of the empirical TV over five
    /// seed batches at two thresholds, recorded for inspection.  The
    /// raw-atom empirical TV carries a support-size bias that grows with the
    /// threshold, so no direction is asserted between thresholds; range and
    /// determinism are.
    #[test]
    fn tv_seed_batch_probe_recorded() {
        let run = |x: u64, seed: u64| {
            let cfg = ExperimentConfig {
                x,
                alpha: 1.25,
                samples: 20_000,
                seed: Seed(seed),
                cap: None,
            };
            passage_experiment(&cfg).unwrap().tv
        };
        let mut medians = Vec::new();
        for x in [10_000u64, 1_000_000] {
            let mut tvs: Vec<f64> = (0..5).map(|s| run(x, 3000 + s)).collect();
            tvs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for &tv in &tvs {
                assert!((0.0..=2.0).contains(&tv));
            }
            medians.push((x, tvs[2]));
        }
        println!("median empirical TV per threshold over 5 seed batches: {medians:?}");
        assert_eq!(run(10_000, 3000), run(10_000, 3000));
    }

    #[test]
    fn experiment_small_run_is_sane() {
        let cfg = ExperimentConfig {
            x: 10_000,
            alpha: 1.25,
            samples: 3000,
            seed: Seed(113),
            cap: None,
        };
        let report = passage_experiment(&cfg).unwrap();
        for arm in &report.arms {
            assert_eq!(arm.exhausted, 0, "verified territory must not exhaust");
            assert!(arm.median_time_ratio > 0.5 && arm.median_time_ratio < 2.0);
            assert_eq!(arm.decay_probe_violations, 0);
        }
        assert!(report.tv > 0.0 && report.tv < 2.0);
        assert!(minimality_spot_check(&report, 200));
    }
}
