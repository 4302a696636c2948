//! The exact-equality self-test suite: every check here is deterministic and
//! rational/integer exact (no Monte Carlo), and the whole suite runs in
//! seconds.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::dist::{syracuse_dist_exact_levels, Dist3};
use crate::dynamics::{
    affine_apply, offset, reduce_mod_3n, syr_iterate, syracuse_valuation, DyadicRational,
    OddNatural, Residue3, ValuationTuple,
};
use crate::geometry::{decompose_black, strip_bound_check, theta_identity_holds, FreqContext, Window};
use crate::stochastic::exact_valuation_distribution;
use crate::{Rational, Scalar};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(results: &mut Vec<CheckResult>, name: &'static str, outcome: Result<(), String>) {
    match outcome {
        Ok(()) => results.push(CheckResult { name, passed: true, detail: String::new() }),
        Err(detail) => results.push(CheckResult { name, passed: false, detail }),
    }
}

fn ratio(p: i64, q: i64) -> Rational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// Run the suite.  `corrupt` perturbs one distribution entry before the
/// table checks, to exercise the failure path.
pub fn run(corrupt: bool) -> Vec<CheckResult> {
    let mut results = Vec::new();

    let mut levels = match syracuse_dist_exact_levels(6) {
        Ok(l) => l,
        Err(e) => {
            check(&mut results, "dist-tables-build", Err(e.to_string()));
            return results;
        }
    };
    if corrupt {
        let mut probs = levels[2].probs().to_vec();
        probs[1] += ratio(1, 63);
        levels[2] = Dist3::from_probs(2, probs);
    }

    check(&mut results, "dist-level-1-published-table", {
        let expected = [ratio(0, 1), ratio(1, 3), ratio(2, 3)];
        if levels[1].probs() == expected {
            Ok(())
        } else {
            Err("level-1 table differs from (0, 1/3, 2/3)".into())
        }
    });

    check(&mut results, "dist-level-2-published-table", {
        let expected: Vec<Rational> =
            [(0, 1), (8, 63), (16, 63), (0, 1), (11, 63), (4, 63), (0, 1), (2, 63), (22, 63)]
                .iter()
                .map(|&(p, q)| ratio(p, q))
                .collect();
        if levels[2].probs() == expected {
            Ok(())
        } else {
            Err("level-2 table differs from the published nine rationals".into())
        }
    });

    check(&mut results, "dist-normalization-and-support", {
        let mut err = None;
        for d in &levels {
            if !(d.total_mass() - Rational::one()).is_zero() {
                err = Some(format!("level {} mass differs from 1", d.level()));
                break;
            }
            if d.level() >= 1 {
                for y in (0..d.modulus()).step_by(3) {
                    if !d.probs()[y as usize].is_zero() {
                        err = Some(format!("level {} has mass on 3 | Y", d.level()));
                        break;
                    }
                }
            }
        }
        err.map_or(Ok(()), Err)
    });

    check(&mut results, "dist-projection-consistency", {
        let mut err = None;
        'outer: for n in 0..levels.len() {
            for k in 0..=n {
                if levels[n].project(k as u32).unwrap() != levels[k] {
                    err = Some(format!("project(dist({n}), {k}) != dist({k})"));
                    break 'outer;
                }
            }
        }
        err.map_or(Ok(()), Err)
    });

    check(&mut results, "oscillation-values", {
        if levels[2].oscillation(1).unwrap() != ratio(10, 21) {
            Err("Osc_{1,2}(dist(2)) differs from 10/21".into())
        } else if (1..levels.len()).any(|n| !levels[n].oscillation(n as u32).unwrap().is_zero())
        {
            Err("Osc_{n,n} nonzero".into())
        } else {
            Ok(())
        }
    });

    check(&mut results, "char-values", {
        let c0 = levels[1].char_sum(0);
        let c1 = levels[1].char_sum(1);
        if (c0.re - 1.0).abs() > 1e-15 || c0.im.abs() > 1e-15 {
            Err("char at xi = 0 differs from 1".into())
        } else if (c1.norm() - 1.0 / 3f64.sqrt()).abs() > 1e-12 {
            Err("|char(dist(1), 1)| differs from 3^-1/2".into())
        } else {
            Ok(())
        }
    });

    check(&mut results, "char-osc-inequality", {
        let mut err = None;
        'outer: for n in 1..=4u32 {
            let osc = levels[n as usize].oscillation(n - 1).unwrap().to_f64();
            for xi in 1..levels[n as usize].modulus() {
                if xi % 3 == 0 {
                    continue;
                }
                let c = levels[n as usize].char_sum(xi).norm();
                if c > osc + 1e-9 {
                    err = Some(format!("n={n}, xi={xi}: |char| {c} > Osc {osc}"));
                    break 'outer;
                }
            }
        }
        err.map_or(Ok(()), Err)
    });

    check(&mut results, "valuation-counting-identity", {
        match exact_valuation_distribution(4, 14) {
            Ok(tail) => {
                let mut err = None;
                for (tuple, &count) in tail.counts() {
                    if tuple.size() <= 12 && count != 1u64 << (13 - tuple.size()) {
                        err = Some(format!("tuple {tuple} attained by {count} classes"));
                        break;
                    }
                }
                err.map_or(Ok(()), Err)
            }
            Err(e) => Err(e.to_string()),
        }
    });

    check(&mut results, "orbit-affine-identity", {
        let n = OddNatural::new(BigUint::parse_bytes(b"898712344556677889900112233445", 10).unwrap())
            .unwrap();
        let a = syracuse_valuation(&n, 20);
        let x = DyadicRational::from_integer(BigInt::from(n.value().clone()));
        let via_affine = affine_apply(&a, &x);
        let direct = syr_iterate(&n, 20);
        if !via_affine.is_odd_integer() {
            Err("affine image is not an odd integer".into())
        } else if via_affine.numerator().magnitude() != direct.value() {
            Err("affine image differs from the iterate".into())
        } else {
            Ok(())
        }
    });

    check(&mut results, "offset-reduction-examples", {
        let t = ValuationTuple::new(vec![1, 4]).unwrap();
        let f = offset(&t);
        if f != DyadicRational::new(BigInt::from(5), 5) {
            Err("offset(1,4) differs from 5/32".into())
        } else if reduce_mod_3n(&f, 2) != Residue3::new(2, BigUint::from(1u32)) {
            Err("5/32 mod 9 differs from 1".into())
        } else {
            Ok(())
        }
    });

    check(&mut results, "theta-and-triangles", {
        (|| -> Result<(), String> {
            let eps = ratio(1, 100);
            let ctx2 = FreqContext::new(2, 1, eps.clone()).map_err(|e| e.to_string())?;
            if ctx2.theta(1, 1).numerator() != &BigInt::one() {
                return Err("theta(1,1) at n=2, xi=1 differs from 1/9".into());
            }
            let ctx = FreqContext::new(12, 7, eps).map_err(|e| e.to_string())?;
            for (j, l, js, ls) in [(1u64, 5i64, 3u64, 1i64), (2, 10, 4, -2), (1, 0, 6, 0)] {
                if !theta_identity_holds(&ctx, j, l, js, ls) {
                    return Err(format!("theta identity fails at ({j},{l}) -> ({js},{ls})"));
                }
            }
            let window = Window { j_min: 1, j_max: 6, l_min: 0, l_max: 60 };
            let d = decompose_black(&ctx, window).map_err(|e| e.to_string())?;
            if !d.partition_ok || !d.triangles_black_ok {
                return Err("triangle decomposition failed partition checks".into());
            }
            if !strip_bound_check(&ctx, &d.black_points) {
                return Err("a black point violates the strip bound".into());
            }
            Ok(())
        })()
    });

    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes() {
        let results = run(false);
        assert!(!results.is_empty());
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn corruption_is_caught_and_named() {
        let results = run(true);
        let failed: Vec<_> = results.iter().filter(|r| !r.passed).collect();
        assert!(!failed.is_empty());
        assert!(failed.iter().any(|r| r.name == "dist-level-2-published-table"));
    }

    #[test]
    fn repeated_runs_identical() {
        let a = run(false);
        let b = run(false);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.passed, y.passed);
        }
    }
}
