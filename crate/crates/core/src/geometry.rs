//! The frequency geometry behind the character-sum bounds: the exact signed
//! fractional part theta(j, l), black/white classification of the lattice
//! strip, the triangle decomposition of the black set, the conditional
//! cancellation factor f(x, b), the two-dimensional holding-time renewal
//! process, and the Monte-Carlo white-hit functionals Q(j, l) and the
//! character upper bound.
//!
//! Classification is exact: theta is an integer numerator over 3^n and eps
//! is an exact rational, so black/white never depends on rounding.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::passage::ln_big;
use crate::stochastic::{sample_pascal, Seed};
use crate::Rational;


/// Frequency context: level n, frequency xi with 3 !| xi, and the exact
/// blackness threshold eps.
#[derive(Debug, Clone)]
pub struct FreqContext {
    n: u32,
    xi: BigUint,
    eps_num: BigUint,
    eps_den: BigUint,
    modulus: BigUint,
    half: BigUint,
    inv2: BigUint,
}

impl FreqContext {
    /// `eps` must lie in (0, 1/100]; the acceptance experiments use exactly
    /// 1/100, so the boundary is included.
    pub fn new(n: u32, xi: u64, eps: Rational) -> Result<Self> {
        if n < 1 {
            return Err(Error::BadParameter("level n must be >= 1".into()));
        }
        if xi % 3 == 0 {
            return Err(Error::BadParameter(format!("xi = {xi} is divisible by 3")));
        }
        if eps <= Rational::zero() || eps > Rational::new(BigInt::one(), BigInt::from(100)) {
            return Err(Error::BadParameter("eps must lie in (0, 1/100]".into()));
        }
        let modulus = BigUint::from(3u32).pow(n);
        let half = (&modulus - 1u32) >> 1;
        let inv2 = (&modulus + 1u32) >> 1;
        Ok(FreqContext {
            n,
            xi: BigUint::from(xi) % &modulus,
            eps_num: eps.numer().to_biguint().expect("eps > 0"),
            eps_den: eps.denom().to_biguint().expect("positive denominator"),
            modulus,
            half,
            inv2,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn eps(&self) -> Rational {
        Rational::new(
            BigInt::from(self.eps_num.clone()),
            BigInt::from(self.eps_den.clone()),
        )
    }

    pub fn eps_f64(&self) -> f64 {
        self.eps().to_f64().unwrap()
    }

    /// Right edge of the strip: floor(n/2).
    pub fn strip_max(&self) -> u64 {
        self.n as u64 / 2
    }

    /// `2^{-e} mod 3^n` for any sign of e.
    fn pow2_inv(&self, e: i64) -> BigUint {
        if e >= 0 {
            self.inv2.modpow(&BigUint::from(e as u64), &self.modulus)
        } else {
            BigUint::from(2u32).modpow(&BigUint::from((-e) as u64), &self.modulus)
        }
    }

    /// The exact signed fractional part
    /// `theta(j, l) = { xi 3^{2j-2} (2^{-l+1} mod 3^n) / 3^n }`,
    /// as a numerator in (-3^n/2, 3^n/2] over 3^n.
    pub fn theta(&self, j: u64, l: i64) -> ThetaValue {
        assert!(j >= 1, "theta requires j >= 1");
        let e2 = 2 * (j - 1);
        let pow3 = if e2 >= self.n as u64 {
            BigUint::zero()
        } else {
            BigUint::from(3u32).pow(e2 as u32)
        };
        let t = &self.xi * pow3 % &self.modulus * self.pow2_inv(l - 1) % &self.modulus;
        let numerator = if t > self.half {
            BigInt::from(t) - BigInt::from(self.modulus.clone())
        } else {
            BigInt::from(t)
        };
        ThetaValue { level: self.n, numerator }
    }

    /// Exact comparison `|theta| <= eps`.
    pub fn is_black_theta(&self, theta: &ThetaValue) -> bool {
        theta.numerator.magnitude() * &self.eps_den <= &self.eps_num * &self.modulus
    }

    /// Black/white classification inside the strip `1 <= j <= n/2`.
    pub fn classify(&self, j: u64, l: i64) -> Result<Color> {
        if j < 1 || j > self.strip_max() {
            return Err(Error::OutOfStrip { j, strip_max: self.strip_max() });
        }
        Ok(if self.is_black_theta(&self.theta(j, l)) { Color::Black } else { Color::White })
    }

    /// Membership in the white set W: inside the strip and white.  Points
    /// outside the strip are neither black nor white.
    pub fn is_white(&self, j: u64, l: i64) -> bool {
        j >= 1 && j <= self.strip_max() && !self.is_black_theta(&self.theta(j, l))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Color {
    Black,
    White,
}

/// Exact rational representative of theta: `numerator / 3^level` with the
/// numerator in (-3^level/2, 3^level/2].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThetaValue {
    level: u32,
    numerator: BigInt,
}

impl ThetaValue {
    pub fn numerator(&self) -> &BigInt {
        &self.numerator
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn to_rational(&self) -> Rational {
        Rational::new(
            self.numerator.clone(),
            BigInt::from(BigUint::from(3u32).pow(self.level)),
        )
    }

    pub fn to_f64(&self) -> f64 {
        self.to_rational().to_f64().unwrap()
    }
}

/// A lattice triangle from the black-set decomposition: all (j, l) with
/// `j >= corner_j`, `l <= corner_l`, and
/// `(j - corner_j) log 9 + (corner_l - l) log 2 <= size`.
#[derive(Debug, Clone, Serialize)]
pub struct Triangle {
    pub corner_j: u64,
    pub corner_l: i64,
    /// `size = log(eps / |theta(corner)|) >= 0`.
    pub size: f64,
    /// Whether the triangle extends beyond the scanned window.
    pub truncated: bool,
    #[serde(skip)]
    corner_theta_abs: BigUint,
}

impl Triangle {
    /// Exact membership: `|theta(corner)| 9^{j-j_c} 2^{l_c-l} <= eps`.
    pub fn contains(&self, ctx: &FreqContext, j: u64, l: i64) -> bool {
        if j < self.corner_j || l > self.corner_l {
            return false;
        }
        let dj = (j - self.corner_j) as u32;
        let dl = (self.corner_l - l) as u64;
        let lhs = (&self.corner_theta_abs * BigUint::from(9u32).pow(dj) * &ctx.eps_den)
            << dl as usize;
        lhs <= &ctx.eps_num * &ctx.modulus
    }

    /// Lattice points of the triangle (finite; the corner is its top left).
    pub fn lattice_points(&self, ctx: &FreqContext) -> Vec<(u64, i64)> {
        let mut pts = Vec::new();
        let mut j = self.corner_j;
        while self.contains(ctx, j, self.corner_l) {
            let mut l = self.corner_l;
            while self.contains(ctx, j, l) {
                pts.push((j, l));
                l -= 1;
            }
            j += 1;
        }
        pts
    }
}

/// Inclusive scan window inside the strip.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Window {
    pub j_min: u64,
    pub j_max: u64,
    pub l_min: i64,
    pub l_max: i64,
}

const WINDOW_POINT_BUDGET: u64 = 10_000_000;

/// Result of a window scan and triangle decomposition.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub window: Window,
    pub triangles: Vec<Triangle>,
    pub black_points: Vec<(u64, i64)>,
    /// Every black window point lies in exactly one returned triangle.
    pub partition_ok: bool,
    /// Every lattice point of every returned triangle is black.
    pub triangles_black_ok: bool,
    /// Minimum pairwise Euclidean distance between returned triangles.
    pub min_separation: Option<f64>,
}

/// Decompose the black points of a window into triangles by walking each
/// black point up then left to its corner `(j_*, l_*)` and solving
/// `|theta(j_*, l_*)| = eps exp(-s_*)` for the size.
pub fn decompose_black(ctx: &FreqContext, window: Window) -> Result<Decomposition> {
    if window.j_min < 1 || window.j_max > ctx.strip_max() {
        return Err(Error::OutOfStrip {
            j: if window.j_min < 1 { window.j_min } else { window.j_max },
            strip_max: ctx.strip_max(),
        });
    }
    if window.j_min > window.j_max || window.l_min > window.l_max {
        return Err(Error::WindowTooLarge("empty window".into()));
    }
    let width = window.j_max - window.j_min + 1;
    let height = (window.l_max - window.l_min + 1) as u64;
    if BigUint::from(height) >= BigUint::from(2u32) * BigUint::from(3u32).pow(ctx.n - 1) {
        return Err(Error::WindowTooLarge(
            "window height reaches the vertical period 2*3^(n-1)".into(),
        ));
    }
    if width.checked_mul(height).is_none_or(|p| p > WINDOW_POINT_BUDGET) {
        return Err(Error::WindowTooLarge(format!(
            "{width} x {height} points exceed the scan budget"
        )));
    }

    let black_points: Vec<(u64, i64)> = (window.j_min..=window.j_max)
        .into_par_iter()
        .flat_map_iter(|j| {
            let ctx = ctx.clone();
            (window.l_min..=window.l_max)
                .filter(move |&l| ctx.is_black_theta(&ctx.theta(j, l)))
                .map(move |l| (j, l))
        })
        .collect();

    // Walk up then left to the canonical corner of each black point.
    let mut groups: BTreeMap<(u64, i64), Vec<(u64, i64)>> = BTreeMap::new();
    for &(j, l) in &black_points {
        let mut l_star = l;
        while ctx.is_black_theta(&ctx.theta(j, l_star + 1)) {
            l_star += 1;
        }
        let mut j_star = j;
        while j_star > 1 && ctx.is_black_theta(&ctx.theta(j_star - 1, l_star)) {
            j_star -= 1;
        }
        groups.entry((j_star, l_star)).or_default().push((j, l));
    }

    let eps_f = ctx.eps_f64();
    let mut triangles = Vec::with_capacity(groups.len());
    let mut partition_ok = true;
    let mut triangles_black_ok = true;
    let mut point_sets: Vec<Vec<(u64, i64)>> = Vec::with_capacity(groups.len());
    for (&(corner_j, corner_l), members) in &groups {
        let corner_theta = ctx.theta(corner_j, corner_l);
        let corner_theta_abs = corner_theta.numerator().magnitude().clone();
        // |theta(corner)| = eps exp(-s) with s >= 0; theta never vanishes in
        // the strip because 3^{2j-2} stays a unit times a proper power of 3.
        assert!(!corner_theta_abs.is_zero(), "corner theta vanished inside the strip");
        let size = (eps_f.ln() - (ln_big(&corner_theta_abs) - ctx.n as f64 * 3f64.ln()))
            .max(0.0);
        let mut tri = Triangle {
            corner_j,
            corner_l,
            size,
            truncated: false,
            corner_theta_abs,
        };
        let pts = tri.lattice_points(ctx);
        for &(j, l) in &pts {
            let in_window = (window.j_min..=window.j_max).contains(&j)
                && (window.l_min..=window.l_max).contains(&l);
            if j > ctx.strip_max() || ctx.is_white(j, l) {
                triangles_black_ok = false;
            }
            if in_window && !members.contains(&(j, l)) {
                // A black window point inside the triangle must have walked
                // to this corner.
                partition_ok = false;
            }
        }
        for &(j, l) in members {
            if !tri.contains(ctx, j, l) {
                partition_ok = false;
            }
        }
        tri.truncated = pts.iter().any(|&(j, l)| {
            !((window.j_min..=window.j_max).contains(&j)
                && (window.l_min..=window.l_max).contains(&l))
        });
        triangles.push(tri);
        point_sets.push(pts);
    }

    // Cross-membership: each black window point in exactly one triangle.
    for &(j, l) in &black_points {
        let hits = triangles.iter().filter(|t| t.contains(ctx, j, l)).count();
        if hits != 1 {
            partition_ok = false;
        }
    }

    let mut min_separation: Option<f64> = None;
    for a in 0..point_sets.len() {
        for b in a + 1..point_sets.len() {
            for &(ja, la) in &point_sets[a] {
                for &(jb, lb) in &point_sets[b] {
                    let dj = ja as f64 - jb as f64;
                    let dl = la as f64 - lb as f64;
                    let d = (dj * dj + dl * dl).sqrt();
                    if min_separation.is_none_or(|m| d < m) {
                        min_separation = Some(d);
                    }
                }
            }
        }
    }

    Ok(Decomposition {
        window,
        triangles,
        black_points,
        partition_ok,
        triangles_black_ok,
        min_separation,
    })
}

impl Decomposition {
    /// Weak separation instance: every window lattice point within Euclidean
    /// distance `radius` of a triangle, but outside it, is white.
    pub fn neighborhood_white(&self, ctx: &FreqContext, radius: f64) -> bool {
        let r = radius.floor() as i64;
        let r2 = radius * radius;
        for tri in &self.triangles {
            for (j, l) in tri.lattice_points(ctx) {
                for dj in -r..=r {
                    for dl in -r..=r {
                        if (dj * dj + dl * dl) as f64 > r2 {
                            continue;
                        }
                        let nj = j as i64 + dj;
                        let nl = l + dl;
                        if nj < self.window.j_min as i64
                            || nj > self.window.j_max as i64
                            || nl < self.window.l_min
                            || nl > self.window.l_max
                        {
                            continue;
                        }
                        let nj = nj as u64;
                        if !tri.contains(ctx, nj, nl) && !ctx.is_white(nj, nl) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

/// Check `3^{n+1-2j} eps >= 1/3` for every given black point, exactly.
pub fn strip_bound_check(ctx: &FreqContext, black_points: &[(u64, i64)]) -> bool {
    black_points.iter().all(|&(j, _)| {
        // 3^{n+1-2j} eps >= 1/3  <=>  3^{n+2-2j} eps_num >= eps_den,
        // with the power moved across when the exponent is negative.
        let e = ctx.n as i64 + 2 - 2 * j as i64;
        if e >= 0 {
            BigUint::from(3u32).pow(e as u32) * &ctx.eps_num >= ctx.eps_den
        } else {
            ctx.eps_num >= BigUint::from(3u32).pow((-e) as u32) * &ctx.eps_den
        }
    })
}

/// The exact theta identity `3^{2(j*-j)} 2^{l-l*} theta(j,l) = theta(j*,l*)
/// mod 1` for j <= j*, l >= l*, as an integer congruence mod 3^n.
pub fn theta_identity_holds(
    ctx: &FreqContext,
    j: u64,
    l: i64,
    j_star: u64,
    l_star: i64,
) -> bool {
    assert!(j <= j_star && l >= l_star);
    let lhs = ctx.theta(j, l);
    let rhs = ctx.theta(j_star, l_star);
    let m = BigInt::from(ctx.modulus.clone());
    let scale = BigInt::from(
        BigUint::from(9u32).pow((j_star - j) as u32) << (l - l_star) as usize,
    );
    (lhs.numerator() * scale - rhs.numerator()).mod_floor(&m).is_zero()
}

/// The conditional cancellation factor
/// `f(x, b) = E(chi(x (2^{a_2} + 3)) | a_1 + a_2 = b)` at
/// `x = 3^{2j-2} 2^{-l}`, by enumerating the b-1 equally likely splittings.
pub fn f_cond(ctx: &FreqContext, j: u64, l: i64, b: u64) -> Result<Complex64> {
    const MAX_B: u64 = 12;
    if b < 2 {
        return Err(Error::BadParameter("b must be >= 2".into()));
    }
    if b > MAX_B {
        return Err(Error::UnsupportedB { b, max: MAX_B });
    }
    assert!(j >= 1);
    let e2 = 2 * (j - 1);
    let pow3 = if e2 >= ctx.n as u64 {
        BigUint::zero()
    } else {
        BigUint::from(3u32).pow(e2 as u32)
    };
    let x_res = pow3 * ctx.pow2_inv(l) % &ctx.modulus;
    let m_f64 = big_to_f64(&ctx.modulus);
    let mut sum = Complex64::new(0.0, 0.0);
    for a2 in 1..b {
        let factor = (BigUint::from(2u32).pow(a2 as u32) + 3u32) % &ctx.modulus;
        let r = &ctx.xi * &x_res % &ctx.modulus * factor % &ctx.modulus;
        let angle = -2.0 * PI * big_to_f64(&r) / m_f64;
        sum += Complex64::new(angle.cos(), angle.sin());
    }
    Ok(sum / (b - 1) as f64)
}

fn big_to_f64(n: &BigUint) -> f64 {
    n.to_f64().unwrap_or(f64::INFINITY)
}

/// One visited point of a realized renewal path, with its classification
/// and, when a triangle list is supplied, the index of the triangle that
/// contains it.
#[derive(Debug, Clone, Serialize)]
pub struct TracePoint {
    pub j: u64,
    pub l: i64,
    /// `None` outside the strip, where points are neither black nor white.
    pub color: Option<Color>,
    pub triangle: Option<usize>,
}

/// A realized two-dimensional renewal path: the start, the holding-time
/// increments, and the visited points `start + v_{[1,k]}` annotated with
/// color and triangle membership.
#[derive(Debug, Clone, Serialize)]
pub struct WalkTrace {
    pub start: (u64, i64),
    pub increments: Vec<(u64, u64)>,
    pub points: Vec<TracePoint>,
}

impl WalkTrace {
    /// Walk from `start` until the strip is exited or `max_steps` holding
    /// times have been drawn, annotating against `triangles`.
    pub fn sample<R: Rng + ?Sized>(
        ctx: &FreqContext,
        triangles: &[Triangle],
        start: (u64, i64),
        max_steps: usize,
        rng: &mut R,
    ) -> WalkTrace {
        let annotate = |j: u64, l: i64| TracePoint {
            j,
            l,
            color: ctx.classify(j, l).ok(),
            triangle: triangles.iter().position(|t| t.contains(ctx, j, l)),
        };
        let (mut j, mut l) = start;
        let mut increments = Vec::new();
        let mut points = vec![annotate(j, l)];
        while j <= ctx.strip_max() && increments.len() < max_steps {
            let (dj, dl) = sample_hold(rng);
            increments.push((dj, dl));
            j += dj;
            l += dl as i64;
            points.push(annotate(j, l));
        }
        WalkTrace { start, increments, points }
    }
}

/// One draw of the two-dimensional holding time: iid Pascal values until the
/// first equals 3, returning (index, partial sum).  The index is Geom(4).
pub fn sample_hold<R: Rng + ?Sized>(rng: &mut R) -> (u64, u64) {
    let mut j = 0u64;
    let mut l = 0u64;
    loop {
        let b = sample_pascal(rng);
        j += 1;
        l += b;
        if b == 3 {
            return (j, l);
        }
    }
}

/// Walk `v_{[1,k]}` by iid holding times until the second coordinate exceeds
/// s; returns the passage point.
pub fn renewal_first_passage<R: Rng + ?Sized>(s: u64, rng: &mut R) -> (u64, u64) {
    let mut j = 0u64;
    let mut l = 0u64;
    loop {
        let (dj, dl) = sample_hold(rng);
        j += dj;
        l += dl;
        if l > s {
            return (j, l);
        }
    }
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// Deterministic mean/stderr of `exp(-eps^3 * w)` over an integer histogram
/// of white-hit counts.  Summation order is fixed by the key order, so the
/// result does not depend on how worker threads merged the histogram.
fn exp_count_estimate(hist: &BTreeMap<u32, u64>, eps3: f64, samples: u64) -> McEstimate {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for (&w, &c) in hist {
        let v = (-eps3 * w as f64).exp();
        sum += c as f64 * v;
        sum_sq += c as f64 * v * v;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = if samples > 1 {
        ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    McEstimate { estimate: mean, stderr: (var / nf).sqrt(), samples }
}

fn collect_count_histogram<F>(samples: u64, seed: Seed, stream_base: u64, walk: F) -> BTreeMap<u32, u64>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> u32 + Sync,
{
    (0..samples)
        .into_par_iter()
        .fold(BTreeMap::new, |mut hist: BTreeMap<u32, u64>, i| {
            let mut rng = seed.stream(stream_base | i);
            *hist.entry(walk(&mut rng)).or_insert(0) += 1;
            hist
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, c) in b {
                *a.entry(k).or_insert(0) += c;
            }
            a
        })
}

/// Count of white points visited by the renewal walk started at (j, l),
/// including the start, truncated at strip exit (beyond which no point is
/// in W).
fn q_walk(ctx: &FreqContext, start: (u64, i64), rng: &mut impl Rng) -> u32 {
    let (mut j, mut l) = start;
    let mut whites = 0u32;
    while j <= ctx.strip_max() {
        if ctx.is_white(j, l) {
            whites += 1;
        }
        let (dj, dl) = sample_hold(rng);
        j += dj;
        l += dl as i64;
    }
    whites
}

/// Monte-Carlo estimate of `Q(j, l) = E prod_k exp(-eps^3 1_W((j,l) + v_{[1,k]}))`.
pub fn estimate_q(
    ctx: &FreqContext,
    j: u64,
    l: i64,
    samples: u64,
    seed: Seed,
) -> Result<McEstimate> {
    if j < 1 || j > ctx.strip_max() {
        return Err(Error::OutOfStrip { j, strip_max: ctx.strip_max() });
    }
    if samples < 1 {
        return Err(Error::BadParameter("samples must be >= 1".into()));
    }
    let eps3 = ctx.eps_f64().powi(3);
    let hist = collect_count_histogram(samples, seed, 0, |rng| q_walk(ctx, (j, l), rng));
    Ok(exp_count_estimate(&hist, eps3, samples))
}

/// Monte-Carlo estimate of the right-hand side of the Q recursion,
/// `exp(-eps^3 1_W(j,l)) E Q((j,l) + Hold)`, with fresh holding-time draws.
pub fn estimate_q_recursed(
    ctx: &FreqContext,
    j: u64,
    l: i64,
    samples: u64,
    seed: Seed,
) -> Result<McEstimate> {
    if j < 1 || j > ctx.strip_max() {
        return Err(Error::OutOfStrip { j, strip_max: ctx.strip_max() });
    }
    let eps3 = ctx.eps_f64().powi(3);
    let own = if ctx.is_white(j, l) { 1u32 } else { 0 };
    let hist = collect_count_histogram(samples, seed, 1 << 48, |rng| {
        let (dj, dl) = sample_hold(rng);
        own + q_walk(ctx, (j + dj, l + dl as i64), rng)
    });
    Ok(exp_count_estimate(&hist, eps3, samples))
}

/// Monte-Carlo mean of `exp(-eps^3 #white hits)` along the Pascal walk
/// `(j, b_{[1,j]})` over the strip, counting steps with `b_j = 3`.  By the
/// white-point cancellation bound this dominates `|char_sum(n, xi)|` up to
/// Monte-Carlo error.
pub fn white_hit_bound(
    ctx: &FreqContext,
    samples: u64,
    seed: Seed,
) -> Result<McEstimate> {
    let eps = ctx.eps_f64();
    let eps3 = eps.powi(3);
    if (PI * eps).cos() > (-eps3).exp() {
        return Err(Error::BadEps);
    }
    if samples < 1 {
        return Err(Error::BadParameter("samples must be >= 1".into()));
    }
    let strip_max = ctx.strip_max();
    let hist = collect_count_histogram(samples, seed, 0, |rng| {
        let mut l = 0u64;
        let mut whites = 0u32;
        for j in 1..=strip_max {
            let b = sample_pascal(rng);
            l += b;
            if b == 3 && ctx.is_white(j, l as i64) {
                whites += 1;
            }
        }
        whites
    });
    Ok(exp_count_estimate(&hist, eps3, samples))
}

/// Deterministic seeded sample statistics of the holding time.
#[derive(Debug, Clone, Serialize)]
pub struct HoldStats {
    pub samples: u64,
    pub mean_j: f64,
    pub mean_l: f64,
    /// Empirical P(Hold = (1,3)).
    pub p_13: f64,
    pub min_l: u64,
}

pub fn hold_stats(samples: u64, seed: Seed) -> HoldStats {
    let (sum_j, sum_l, c13, min_l) = (0..samples)
        .into_par_iter()
        .fold(
            || (0u128, 0u128, 0u64, u64::MAX),
            |(sj, sl, c, ml), i| {
                let mut rng = seed.stream(i);
                let (j, l) = sample_hold(&mut rng);
                (sj + j as u128, sl + l as u128, c + u64::from((j, l) == (1, 3)), ml.min(l))
            },
        )
        .reduce(
            || (0u128, 0u128, 0u64, u64::MAX),
            |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3.min(b.3)),
        );
    HoldStats {
        samples,
        mean_j: sum_j as f64 / samples as f64,
        mean_l: sum_l as f64 / samples as f64,
        p_13: c13 as f64 / samples as f64,
        min_l,
    }
}

/// Deterministic seeded statistics of the renewal first passage through
/// row s.
#[derive(Debug, Clone, Serialize)]
pub struct RenewalStats {
    pub s: u64,
    pub samples: u64,
    pub mean_j: f64,
    pub mean_l: f64,
    /// Empirical P(l - s > overshoot_threshold).
    pub overshoot_threshold: u64,
    pub p_overshoot: f64,
}

pub fn renewal_stats(s: u64, samples: u64, overshoot_threshold: u64, seed: Seed) -> RenewalStats {
    let (sum_j, sum_l, over) = (0..samples)
        .into_par_iter()
        .fold(
            || (0u128, 0u128, 0u64),
            |(sj, sl, ov), i| {
                let mut rng = seed.stream(i);
                let (j, l) = renewal_first_passage(s, &mut rng);
                (sj + j as u128, sl + l as u128, ov + u64::from(l - s > overshoot_threshold))
            },
        )
        .reduce(|| (0u128, 0u128, 0u64), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    RenewalStats {
        s,
        samples,
        mean_j: sum_j as f64 / samples as f64,
        mean_l: sum_l as f64 / samples as f64,
        overshoot_threshold,
        p_overshoot: over as f64 / samples as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(num: i64, den: i64) -> Rational {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn ctx(n: u32, xi: u64) -> FreqContext {
        FreqContext::new(n, xi, eps(1, 100)).unwrap()
    }

    #[test]
    fn context_validation() {
        assert!(FreqContext::new(2, 3, eps(1, 100)).is_err());
        assert!(FreqContext::new(2, 1, eps(1, 50)).is_err());
        assert!(FreqContext::new(2, 1, eps(0, 1)).is_err());
        assert!(FreqContext::new(0, 1, eps(1, 100)).is_err());
        assert!(FreqContext::new(2, 1, eps(1, 100)).is_ok());
    }

    #[test]
    fn theta_examples_level_two() {
        let c = ctx(2, 1);
        // theta(1,1) = {1 * 1 * (2^0 mod 9) / 9} = 1/9.
        assert_eq!(c.theta(1, 1).numerator(), &BigInt::from(1));
        // theta(1,0) = {2/9} = 2/9.
        assert_eq!(c.theta(1, 0).numerator(), &BigInt::from(2));
        // Signed representative: {5/9} = -4/9.
        let t = c.theta(1, -1); // 2^2 mod 9 = 4 -> 4/9
        assert_eq!(t.numerator(), &BigInt::from(4));
    }

    #[test]
    fn theta_doubling_and_ninefold_identities() {
        let c = ctx(6, 5);
        for (j, l) in [(1u64, 4i64), (2, 0), (1, -3), (3, 7)] {
            assert!(theta_identity_holds(&c, j, l, j + 1, l));
            assert!(theta_identity_holds(&c, j, l, j, l - 1));
            assert!(theta_identity_holds(&c, j, l + 5, j + 2, l));
        }
    }

    #[test]
    fn classify_examples() {
        let c = ctx(2, 1);
        // theta(1,1) = 1/9 > 1/100 -> white.
        assert_eq!(c.classify(1, 1).unwrap(), Color::White);
        assert!(matches!(c.classify(2, 0), Err(Error::OutOfStrip { .. })));

        // Threshold comparator on a synthetic zero numerator.
        let zero = ThetaValue { level: 2, numerator: BigInt::zero() };
        assert!(c.is_black_theta(&zero));
        let half = ThetaValue { level: 2, numerator: BigInt::from(4) }; // 4/9 near 1/2
        assert!(!c.is_black_theta(&half));
    }

    #[test]
    fn vertical_periodicity() {
        let c = ctx(4, 7);
        let period = 2 * 3i64.pow(3);
        for j in 1..=c.strip_max() {
            for l in -3..10 {
                assert_eq!(
                    c.classify(j, l).unwrap(),
                    c.classify(j, l + period).unwrap()
                );
            }
        }
    }

    #[test]
    fn decomposition_small_level() {
        let c = ctx(12, 7);
        let window = Window { j_min: 1, j_max: 6, l_min: 0, l_max: 80 };
        let d = decompose_black(&c, window).unwrap();
        assert!(d.partition_ok);
        assert!(d.triangles_black_ok);
        assert!(strip_bound_check(&c, &d.black_points));
        assert!(d.neighborhood_white(&c, 2.0));
        // Corner construction: the point above each corner is white.
        for t in &d.triangles {
            assert!(c.is_white(t.corner_j, t.corner_l + 1));
            if t.corner_j > 1 {
                assert!(c.is_white(t.corner_j - 1, t.corner_l));
            }
        }
    }

    #[test]
    fn decomposition_empty_window() {
        let c = ctx(12, 7);
        // A window of white points only: classify first to find one.
        let window = Window { j_min: 5, j_max: 6, l_min: 1000, l_max: 1001 };
        let d = decompose_black(&c, window).unwrap();
        if d.black_points.is_empty() {
            assert!(d.triangles.is_empty());
            assert!(d.partition_ok);
        }
    }

    #[test]
    fn window_validation() {
        let c = ctx(12, 7);
        assert!(matches!(
            decompose_black(&c, Window { j_min: 0, j_max: 3, l_min: 0, l_max: 5 }),
            Err(Error::OutOfStrip { .. })
        ));
        assert!(matches!(
            decompose_black(&c, Window { j_min: 1, j_max: 7, l_min: 0, l_max: 5 }),
            Err(Error::OutOfStrip { .. })
        ));
        assert!(matches!(
            decompose_black(&c, Window { j_min: 1, j_max: 6, l_min: 0, l_max: 2_000_000 }),
            Err(Error::WindowTooLarge(_))
        ));
    }

    #[test]
    fn strip_bound_edge_cases() {
        let c = ctx(12, 7);
        assert!(strip_bound_check(&c, &[]));
        // At j = n/2 with eps = 1/100 the bound reads 3 * 1/100 >= 1/3: false.
        assert!(!strip_bound_check(&c, &[(c.strip_max(), 0)]));
        assert!(strip_bound_check(&c, &[(1, 0)]));
    }

    #[test]
    fn walk_trace_annotations() {
        let c = ctx(12, 7);
        let window = Window { j_min: 1, j_max: 6, l_min: 0, l_max: 80 };
        let d = decompose_black(&c, window).unwrap();
        let mut rng = Seed(60).stream(0);
        for _ in 0..50 {
            let trace = WalkTrace::sample(&c, &d.triangles, (1, 5), 64, &mut rng);
            for &(dj, dl) in &trace.increments {
                assert!(dj >= 1 && dl >= 3);
            }
            let (mut j, mut l) = trace.start;
            for (k, p) in trace.points.iter().enumerate() {
                if k > 0 {
                    j += trace.increments[k - 1].0;
                    l += trace.increments[k - 1].1 as i64;
                }
                assert_eq!((p.j, p.l), (j, l));
                assert_eq!(p.color, c.classify(p.j, p.l).ok());
                if let Some(t) = p.triangle {
                    assert!(d.triangles[t].contains(&c, p.j, p.l));
                    assert_eq!(p.color, Some(Color::Black));
                }
            }
            // The walk only stops once it has left the strip.
            let last = trace.points.last().unwrap();
            assert!(last.j > c.strip_max());
        }
    }

    #[test]
    fn f_cond_matches_cosine() {
        let c = ctx(10, 7);
        for (j, l) in [(1u64, 0i64), (2, 5), (3, -4), (5, 17), (4, 100)] {
            let f = f_cond(&c, j, l, 3).unwrap();
            let theta = c.theta(j, l).to_f64();
            assert!(
                (f.norm() - (PI * theta).cos()).abs() < 1e-10,
                "({j},{l}): |f| = {} vs cos = {}",
                f.norm(),
                (PI * theta).cos()
            );
        }
    }

    #[test]
    fn f_cond_specialization_b3() {
        // f(x,3) = (chi(5x) + chi(7x)) / 2.
        let c = ctx(8, 1);
        let (j, l) = (2u64, 3i64);
        let f = f_cond(&c, j, l, 3).unwrap();
        let m = big_to_f64(c.modulus());
        let x = BigUint::from(3u32).pow(2) * c.pow2_inv(l) % c.modulus();
        let mut expected = Complex64::new(0.0, 0.0);
        for k in [5u32, 7] {
            let r = &c.xi * (&x * k % c.modulus()) % c.modulus();
            let angle = -2.0 * PI * big_to_f64(&r) / m;
            expected += Complex64::new(angle.cos(), angle.sin()) / 2.0;
        }
        assert!((f - expected).norm() < 1e-12);
    }

    #[test]
    fn f_cond_domain() {
        let c = ctx(8, 1);
        assert!(matches!(f_cond(&c, 1, 0, 1), Err(Error::BadParameter(_))));
        assert!(matches!(f_cond(&c, 1, 0, 13), Err(Error::UnsupportedB { .. })));
        assert!((f_cond(&c, 1, 0, 2).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hold_sample_properties() {
        let stats = hold_stats(200_000, Seed(41));
        assert!(stats.min_l >= 3);
        assert!((stats.mean_j - 4.0).abs() < 0.05, "mean j {}", stats.mean_j);
        assert!((stats.mean_l - 16.0).abs() < 0.2, "mean l {}", stats.mean_l);
        assert!((stats.p_13 - 0.25).abs() < 0.01);
    }

    #[test]
    fn renewal_passage_zero_threshold() {
        let mut rng = Seed(3).stream(0);
        for _ in 0..200 {
            let (j, l) = renewal_first_passage(0, &mut rng);
            assert!(l >= 3);
            assert!(j >= 1);
        }
    }

    #[test]
    fn q_estimates_in_unit_interval() {
        let c = ctx(10, 1);
        let q = estimate_q(&c, 1, 0, 4000, Seed(50)).unwrap();
        assert!(q.estimate > 0.0 && q.estimate <= 1.0);
        let q2 = estimate_q(&c, 1, 0, 4000, Seed(50)).unwrap();
        assert_eq!(q.estimate.to_bits(), q2.estimate.to_bits());
    }

    /// At n = 2 the strip is a single column, so every walk pays exactly the
    /// start point's factor and exits: Q is deterministic.
    #[test]
    fn q_single_forced_step() {
        let c = ctx(2, 1);
        assert!(c.is_white(1, 1)); // theta(1,1) = 1/9 > 1/100
        let eps3 = c.eps_f64().powi(3);
        let q = estimate_q(&c, 1, 1, 200, Seed(53)).unwrap();
        assert_eq!(q.estimate, (-eps3).exp());
        assert_eq!(q.stderr, 0.0);
    }

    #[test]
    fn white_bound_trivial_eps_guard() {
        let c = ctx(10, 1);
        let b = white_hit_bound(&c, 2000, Seed(51)).unwrap();
        assert!(b.estimate > 0.0 && b.estimate <= 1.0);
    }

    /// Monte-Carlo scaling: quadrupling the sample count halves the
    /// standard error, up to sampling noise.
    #[test]
    fn white_bound_stderr_scaling() {
        let c = ctx(12, 5);
        let small = white_hit_bound(&c, 20_000, Seed(52)).unwrap();
        let large = white_hit_bound(&c, 80_000, Seed(52)).unwrap();
        let ratio = small.stderr / large.stderr;
        assert!((ratio - 2.0).abs() < 0.4, "stderr ratio {ratio}");
    }
}
