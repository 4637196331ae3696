//! Dimension data from congruence quotient orders: the sequences `r_n` and
//! `s_n`, partial sums, densities and the finite-horizon dimension estimate.
//!
//! Logarithms are kept exact as rational combinations of logarithms of
//! pairwise coprime integers. Such logarithms are linearly independent over
//! the rationals, so zero tests and rationality tests are decidable; only
//! genuinely irrational values are evaluated, as rigorous dyadic intervals.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::permgroup::OrderSequence;
use crate::{Error, Result};

/// Default interval precision in bits.
pub const DEFAULT_PRECISION_BITS: u32 = 60;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn big_rat(x: &BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(x.clone()))
}

/// Splits `x` into the coprime set, refining the set as needed.
fn refine_into(set: &mut Vec<BigUint>, x: &BigUint) {
    let mut stack = vec![x.clone()];
    while let Some(y) = stack.pop() {
        if y.is_one() || y.is_zero() {
            continue;
        }
        match set.iter().position(|b| !b.gcd(&y).is_one()) {
            None => set.push(y),
            Some(i) => {
                let b = set.swap_remove(i);
                let g = b.gcd(&y);
                if b == y {
                    set.push(b);
                    continue;
                }
                stack.push(&b / &g);
                stack.push(&y / &g);
                stack.push(g);
            }
        }
    }
}

/// Exponents of `x` over a pairwise coprime set it factors over.
fn express(x: &BigUint, set: &[BigUint]) -> Vec<(BigUint, u64)> {
    let mut rest = x.clone();
    let mut out = Vec::new();
    for b in set {
        let mut e = 0;
        while (&rest % b).is_zero() {
            rest /= b;
            e += 1;
        }
        if e > 0 {
            out.push((b.clone(), e));
        }
    }
    debug_assert!(rest.is_one());
    out
}

/// A rational combination `sum c_k ln(k)` of logarithms of integers, stored
/// over pairwise coprime keys greater than one.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LogValue {
    terms: BTreeMap<BigUint, BigRational>,
}

impl LogValue {
    pub fn zero() -> Self {
        LogValue::default()
    }

    /// `ln(x)` for a positive integer.
    pub fn log(x: &BigUint) -> Self {
        assert!(!x.is_zero(), "logarithm of zero");
        let mut terms = BTreeMap::new();
        if !x.is_one() {
            terms.insert(x.clone(), BigRational::one());
        }
        LogValue { terms }
    }

    pub fn log_u64(x: u64) -> Self {
        LogValue::log(&BigUint::from(x))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BigUint, &BigRational)> {
        self.terms.iter()
    }

    fn rebased(&self, set: &[BigUint]) -> BTreeMap<BigUint, BigRational> {
        let mut out: BTreeMap<BigUint, BigRational> = BTreeMap::new();
        for (k, c) in &self.terms {
            for (b, e) in express(k, set) {
                *out.entry(b).or_insert_with(BigRational::zero) += c * BigRational::from_integer(BigInt::from(e));
            }
        }
        out
    }

    fn common_basis(&self, other: &LogValue) -> Vec<BigUint> {
        let mut set: Vec<BigUint> = Vec::new();
        for k in self.terms.keys().chain(other.terms.keys()) {
            refine_into(&mut set, k);
        }
        set.sort();
        set
    }

    fn combine(&self, other: &LogValue, sign: i64) -> LogValue {
        let set = self.common_basis(other);
        let mut terms = self.rebased(&set);
        for (b, c) in other.rebased(&set) {
            *terms.entry(b).or_insert_with(BigRational::zero) += c * rat(sign, 1);
        }
        terms.retain(|_, c| !c.is_zero());
        LogValue { terms }
    }

    pub fn add(&self, other: &LogValue) -> LogValue {
        self.combine(other, 1)
    }

    pub fn sub(&self, other: &LogValue) -> LogValue {
        self.combine(other, -1)
    }

    pub fn scale(&self, c: &BigRational) -> LogValue {
        if c.is_zero() {
            return LogValue::zero();
        }
        LogValue { terms: self.terms.iter().map(|(k, x)| (k.clone(), x * c)).collect() }
    }

    /// `self / unit` when it is rational.
    pub fn exact_ratio(&self, unit: &LogValue) -> Option<BigRational> {
        assert!(!unit.is_zero(), "zero unit");
        let set = self.common_basis(unit);
        let a = self.rebased(&set);
        let u = unit.rebased(&set);
        let (key, uc) = u.iter().find(|(_, c)| !c.is_zero())?;
        let t = a.get(key).cloned().unwrap_or_else(BigRational::zero) / uc;
        let ok = set.iter().all(|b| {
            let ac = a.get(b).cloned().unwrap_or_else(BigRational::zero);
            let ucb = u.get(b).cloned().unwrap_or_else(BigRational::zero);
            ac == &t * ucb
        });
        ok.then_some(t)
    }

    /// Bounds on `self / ln 2` from `bits`-bit logarithms of every key.
    fn log2_bounds(&self, bits: u32) -> (BigRational, BigRational) {
        let mut lo = BigRational::zero();
        let mut hi = BigRational::zero();
        for (k, c) in &self.terms {
            let (l, h) = log2_bounds(k, bits);
            if c.is_positive() {
                lo += c * l;
                hi += c * h;
            } else {
                lo += c * h;
                hi += c * l;
            }
        }
        (lo, hi)
    }

    /// Exact sign. Nonzero values are separated from zero by refining
    /// the interval until it excludes zero.
    pub fn sign(&self) -> Ordering {
        if self.is_zero() {
            return Ordering::Equal;
        }
        let mut bits = 64;
        loop {
            let (lo, hi) = self.log2_bounds(bits);
            if lo.is_positive() {
                return Ordering::Greater;
            }
            if hi.is_negative() {
                return Ordering::Less;
            }
            bits *= 2;
        }
    }

    /// `self / unit` as an exact rational when possible, otherwise an
    /// interval of width at most `2^-precision` rounded outward to dyadics.
    pub fn ratio(&self, unit: &LogValue, precision: Option<u32>) -> Result<Real> {
        if let Some(t) = self.exact_ratio(unit) {
            return Ok(Real::Exact(t));
        }
        match precision {
            Some(p) => Ok(self.ratio_interval(unit, p)),
            None => Err(Error::PrecisionRequired(
                "value is not a rational multiple of the unit logarithm".into(),
            )),
        }
    }

    /// Always evaluates as an interval, even when the ratio is rational.
    pub fn ratio_interval(&self, unit: &LogValue, precision: u32) -> Real {
        let target = BigRational::new(BigInt::one(), BigInt::one() << precision as usize);
        let mut bits = precision + 24;
        loop {
            let (nlo, nhi) = self.log2_bounds(bits);
            let (ulo, uhi) = unit.log2_bounds(bits);
            if ulo.is_positive() {
                let (lo, hi) = if !nlo.is_negative() {
                    (&nlo / &uhi, &nhi / &ulo)
                } else if !nhi.is_positive() {
                    (&nlo / &ulo, &nhi / &uhi)
                } else {
                    (&nlo / &ulo, &nhi / &ulo)
                };
                if &hi - &lo <= target {
                    let scale = BigInt::one() << precision as usize;
                    let lo = BigRational::new((&lo * BigRational::from_integer(scale.clone())).floor().to_integer(), scale.clone());
                    let hi = BigRational::new((&hi * BigRational::from_integer(scale.clone())).ceil().to_integer(), scale);
                    return Real::Interval { lo, hi };
                }
            }
            bits *= 2;
        }
    }
}

/// Rigorous bounds on `log2(x)` with `bits` fractional bits, by repeated
/// squaring on a rounded-down and a rounded-up fixed-point path.
pub fn log2_bounds(x: &BigUint, bits: u32) -> (BigRational, BigRational) {
    assert!(!x.is_zero());
    let n = x.bits() - 1;
    let w = bits as u64 + 8;
    let (mut lo, mut hi) = if n >= w {
        let lo = x >> (n - w) as usize;
        let exact = (&lo << (n - w) as usize) == *x;
        let hi = if exact { lo.clone() } else { &lo + 1u32 };
        (lo, hi)
    } else {
        let v = x << (w - n) as usize;
        (v.clone(), v)
    };
    let two = BigUint::one() << (w + 1) as usize;
    let mask = (BigUint::one() << w as usize) - 1u32;
    let mut frac_lo = BigUint::zero();
    let mut frac_hi = BigUint::zero();
    for _ in 0..bits {
        frac_lo <<= 1;
        frac_hi <<= 1;
        lo = (&lo * &lo) >> w as usize;
        let sq = &hi * &hi;
        hi = if (&sq & &mask).is_zero() { sq >> w as usize } else { (sq >> w as usize) + 1u32 };
        if lo >= two {
            lo >>= 1;
            frac_lo += 1u32;
        }
        if hi >= two {
            hi = if (&hi & BigUint::one()).is_zero() { hi >> 1 } else { (hi >> 1) + 1u32 };
            frac_hi += 1u32;
        }
    }
    let denom = BigInt::one() << bits as usize;
    let base = BigRational::from_integer(BigInt::from(n));
    let lower = &base + BigRational::new(BigInt::from(frac_lo), denom.clone());
    let upper = &base + BigRational::new(BigInt::from(frac_hi) + 1, denom);
    (lower, upper)
}

/// An exact rational or a closed interval with dyadic endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Real {
    Exact(BigRational),
    Interval { lo: BigRational, hi: BigRational },
}

impl Real {
    pub fn from_ratio(n: i64, d: i64) -> Real {
        Real::Exact(rat(n, d))
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            Real::Exact(x) => Some(x),
            Real::Interval { .. } => None,
        }
    }

    pub fn lo(&self) -> &BigRational {
        match self {
            Real::Exact(x) => x,
            Real::Interval { lo, .. } => lo,
        }
    }

    pub fn hi(&self) -> &BigRational {
        match self {
            Real::Exact(x) => x,
            Real::Interval { hi, .. } => hi,
        }
    }

    pub fn width(&self) -> BigRational {
        self.hi() - self.lo()
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        self.lo() <= x && x <= self.hi()
    }

    /// Pointwise minimum, sound for intervals.
    pub fn min(&self, other: &Real) -> Real {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(a.min(b).clone()),
            _ => Real::Interval {
                lo: self.lo().min(other.lo()).clone(),
                hi: self.hi().min(other.hi()).clone(),
            },
        }
    }

    pub fn to_f64(&self) -> f64 {
        let mid = (self.lo() + self.hi()) / rat(2, 1);
        mid.to_f64().unwrap_or(f64::NAN)
    }

    pub fn to_json(&self, digits: usize) -> Value {
        match self {
            Real::Exact(x) => json!(fraction(x)),
            Real::Interval { lo, hi } => json!([decimal(lo, digits, false), decimal(hi, digits, true)]),
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact(x) => write!(f, "{}", fraction(x)),
            Real::Interval { lo, hi } => write!(f, "[{}, {}]", decimal(lo, 20, false), decimal(hi, 20, true)),
        }
    }
}

/// `a/b`, always with a denominator.
pub fn fraction(x: &BigRational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Decimal expansion to `digits` places, rounded down or up.
pub fn decimal(x: &BigRational, digits: usize, round_up: bool) -> String {
    let scale = BigInt::from(10u32).pow(digits as u32);
    let scaled = x * BigRational::from_integer(scale.clone());
    let n = if round_up { scaled.ceil() } else { scaled.floor() }.to_integer();
    let neg = n.is_negative();
    let (int, frac) = n.abs().div_rem(&scale);
    let mut frac = frac.to_string();
    while frac.len() < digits {
        frac.insert(0, '0');
    }
    let sign = if neg { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

/// Sign pattern of the `s_n`, hence of `r_n` (which starts at zero).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    /// `r_n` non-negative and non-decreasing.
    NonNegative,
    /// `r_n` non-positive and non-increasing.
    NonPositive,
    Mixed,
}

impl Sign {
    pub fn is_uniform(self) -> bool {
        self != Sign::Mixed
    }
}

#[derive(Clone, Debug, Default)]
pub struct AnalysisOptions {
    /// Interval precision; `None` demands exact values.
    pub precision_bits: Option<u32>,
    /// A cap `c` with `|s_n| <= c` beyond the horizon, in units of `log m`.
    pub cap: Option<BigRational>,
}

/// Everything derived from an order sequence `|G/St(n)|`, `n = 1..=K`.
///
/// With `K` orders there are `r_1..r_K` and `s_1..s_N` for `N = K - 1`.
#[derive(Clone, Debug)]
pub struct DimensionReport {
    pub m: usize,
    pub orders: Vec<BigUint>,
    /// `|H|` for `G <= W_H`.
    pub ambient: BigUint,
    pub precision_bits: Option<u32>,
    /// In units of `log m`.
    pub r: Vec<Real>,
    pub s: Vec<Real>,
    /// `L_n = sum_{i<=n} r_i / m^i`.
    pub partial_sums: Vec<Real>,
    /// `log|G_n| / log|W_H / St(n)|`.
    pub density: Vec<Real>,
    /// Density against the full automorphism group, when computable.
    pub density_symmetric: Option<Vec<Real>>,
    /// Running minimum of `density`: a horizon-limited stand-in for the
    /// lower limit.
    pub density_running_min: Vec<Real>,
    /// `estimates[n-1] = (log|G_1| - sum_{i<=n} s_i / m^i) / log|H|`.
    pub estimates: Vec<Real>,
    pub estimate: Real,
    pub tail_bound: Option<Real>,
    pub bracket: Option<(Real, Real)>,
    pub sign: Sign,
    log_orders: Vec<LogValue>,
    r_forms: Vec<LogValue>,
    s_forms: Vec<LogValue>,
}

fn pow_rat(base: usize, e: usize) -> BigRational {
    big_rat(&BigUint::from(base).pow(e as u32))
}

fn inv_pow(base: usize, e: usize) -> BigRational {
    pow_rat(base, e).recip()
}

fn factorial(m: usize) -> BigUint {
    (1..=m as u64).map(BigUint::from).product()
}

/// Number of vertices at levels `0..n`: `(m^n - 1)/(m - 1)`.
fn vertices_below(m: usize, n: usize) -> BigRational {
    if m == 1 {
        return BigRational::from_integer(BigInt::from(n));
    }
    (pow_rat(m, n) - BigRational::one()) / BigRational::from_integer(BigInt::from(m - 1))
}

/// Computes the report for `orders` inside `W_H` with `|H| = ambient`.
pub fn analyze(orders: &OrderSequence, ambient: &BigUint, opts: &AnalysisOptions) -> Result<DimensionReport> {
    let m = orders.m;
    if m < 2 {
        return Err(Error::InvalidInput("the tree degree must be at least 2".into()));
    }
    if orders.orders.is_empty() {
        return Err(Error::InvalidInput("empty order sequence".into()));
    }
    if orders.orders.iter().any(Zero::is_zero) || ambient.is_zero() || ambient.is_one() {
        return Err(Error::InvalidInput("orders and |H| must be positive, |H| > 1".into()));
    }
    if !orders.is_consistent() {
        return Err(Error::InvalidInput("order sequence is not consistent with a group acting on the tree".into()));
    }
    let prec = opts.precision_bits;
    let log_m = LogValue::log(&BigUint::from(m));
    let log_h = LogValue::log(ambient);
    let logs: Vec<LogValue> = orders.orders.iter().map(LogValue::log).collect();
    let k = logs.len();
    let mr = BigRational::from_integer(BigInt::from(m));

    // r_n = m log|G_(n-1)| - log|G_n| + log|G_1|, with |G_0| = 1
    let r_forms: Vec<LogValue> = (0..k)
        .map(|i| {
            let prev = if i == 0 { LogValue::zero() } else { logs[i - 1].scale(&mr) };
            prev.sub(&logs[i]).add(&logs[0])
        })
        .collect();
    assert!(r_forms[0].is_zero(), "r_1 must vanish");
    let s_forms: Vec<LogValue> = (1..k).map(|i| r_forms[i].sub(&r_forms[i - 1])).collect();

    let in_m = |f: &LogValue| f.ratio(&log_m, prec);
    let r = r_forms.iter().map(in_m).collect::<Result<Vec<_>>>()?;
    let s = s_forms.iter().map(in_m).collect::<Result<Vec<_>>>()?;

    let mut partial = LogValue::zero();
    let mut partial_sums = Vec::with_capacity(k);
    for (i, f) in r_forms.iter().enumerate() {
        partial = partial.add(&f.scale(&inv_pow(m, i + 1)));
        partial_sums.push(in_m(&partial)?);
    }

    let density = (0..k)
        .map(|i| logs[i].ratio(&log_h.scale(&vertices_below(m, i + 1)), prec))
        .collect::<Result<Vec<_>>>()?;
    let log_sym = LogValue::log(&factorial(m));
    let density_symmetric = (0..k)
        .map(|i| logs[i].ratio(&log_sym.scale(&vertices_below(m, i + 1)), prec))
        .collect::<Result<Vec<_>>>()
        .ok();
    let mut density_running_min: Vec<Real> = Vec::with_capacity(k);
    for d in &density {
        let next = match density_running_min.last() {
            Some(prev) => prev.min(d),
            None => d.clone(),
        };
        density_running_min.push(next);
    }

    let mut est_form = logs[0].clone();
    let mut estimates = Vec::with_capacity(k - 1);
    for (i, f) in s_forms.iter().enumerate() {
        est_form = est_form.sub(&f.scale(&inv_pow(m, i + 1)));
        estimates.push(est_form.ratio(&log_h, prec)?);
    }
    let estimate = est_form.ratio(&log_h, prec)?;

    let signs: Vec<Ordering> = s_forms.iter().map(LogValue::sign).collect();
    let sign = if signs.iter().all(|&o| o != Ordering::Less) {
        Sign::NonNegative
    } else if signs.iter().all(|&o| o != Ordering::Greater) {
        Sign::NonPositive
    } else {
        Sign::Mixed
    };

    let n_s = s_forms.len();
    let (tail_bound, bracket) = match &opts.cap {
        Some(c) if sign.is_uniform() => {
            // sum_{n>N} c m^-n = c m^-N / (m - 1), in units of log|H|
            let t = c * inv_pow(m, n_s) / BigRational::from_integer(BigInt::from(m - 1));
            let tail_form = log_m.scale(&t);
            let tail = tail_form.ratio(&log_h, prec)?;
            let bracket = if sign == Sign::NonNegative {
                (est_form.sub(&tail_form).ratio(&log_h, prec)?, estimate.clone())
            } else {
                (estimate.clone(), est_form.add(&tail_form).ratio(&log_h, prec)?)
            };
            (Some(tail), Some(bracket))
        }
        Some(_) => {
            log::warn!("tail bound withheld: the s-sequence changes sign");
            (None, None)
        }
        None => (None, None),
    };

    Ok(DimensionReport {
        m,
        orders: orders.orders.clone(),
        ambient: ambient.clone(),
        precision_bits: prec,
        r,
        s,
        partial_sums,
        density,
        density_symmetric,
        density_running_min,
        estimates,
        estimate,
        tail_bound,
        bracket,
        sign,
        log_orders: logs,
        r_forms,
        s_forms,
    })
}

impl DimensionReport {
    /// Number of `s` values, the horizon of the estimate.
    pub fn horizon(&self) -> usize {
        self.s_forms.len()
    }

    fn log_m(&self) -> LogValue {
        LogValue::log(&BigUint::from(self.m))
    }

    /// The exact `s_n`, in units of `log m`, for every `n` where it is
    /// rational.
    pub fn s_exact(&self) -> Option<Vec<BigRational>> {
        self.s.iter().map(|x| x.exact().cloned()).collect()
    }

    pub fn to_json(&self) -> Value {
        let digits = self.precision_bits.map(|b| (b as usize * 3).div_ceil(10) + 1).unwrap_or(20);
        let list = |v: &[Real]| Value::Array(v.iter().map(|x| x.to_json(digits)).collect());
        json!({
            "format_version": 1,
            "m": self.m,
            "ambient_order": self.ambient.to_string(),
            "precision_bits": self.precision_bits,
            "orders": self.orders.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "r": list(&self.r),
            "s": list(&self.s),
            "partial_sums": list(&self.partial_sums),
            "density": list(&self.density),
            "density_symmetric": self.density_symmetric.as_ref().map(|d| list(d)),
            "density_running_min": list(&self.density_running_min),
            "density_running_min_note": "horizon-limited",
            "estimate": self.estimate.to_json(digits),
            "tail_bound": self.tail_bound.as_ref().map(|t| t.to_json(digits)),
            "bracket": self.bracket.as_ref().map(|(a, b)| json!([a.to_json(digits), b.to_json(digits)])),
            "sign": format!("{:?}", self.sign),
        })
    }

    /// One row per level: `n, log_m|G_n|, r_n, s_n, L_n, density`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("n\tlog_order\tr\ts\tL\tdensity\n");
        let log_m = self.log_m();
        for i in 0..self.orders.len() {
            let lo = match self.log_orders[i].ratio(&log_m, self.precision_bits.or(Some(DEFAULT_PRECISION_BITS))) {
                Ok(x) => x.to_string(),
                Err(_) => "-".into(),
            };
            let s = self.s.get(i).map(ToString::to_string).unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                i + 1,
                lo,
                self.r[i],
                s,
                self.partial_sums[i],
                self.density[i]
            ));
        }
        out
    }
}

/// `log|G_n| = ((m^n - 1)/(m - 1)) log|G_1| - sum_{i<=n} r_i m^(n-i)` for
/// every `n`, compared exactly.
pub fn lemma32_check(report: &DimensionReport) -> bool {
    let m = report.m;
    (0..report.log_orders.len()).all(|i| {
        let n = i + 1;
        let mut rhs = report.log_orders[0].scale(&vertices_below(m, n));
        for (j, r) in report.r_forms.iter().take(n).enumerate() {
            rhs = rhs.sub(&r.scale(&pow_rat(m, n - j - 1)));
        }
        rhs.sub(&report.log_orders[i]).is_zero()
    })
}

/// Both sides of `x S(x) = (1 - x) R(x)` truncated at the horizon `N`,
/// at `x = 1/m`, in units of `log m`.
#[derive(Clone, Debug)]
pub struct FunctionalIdentity {
    /// `sum_{n<=N} s_n x^(n+1)`.
    pub lhs: Real,
    /// `(1 - x) sum_{n<=N} r_n x^n`.
    pub rhs: Real,
    /// `r_(N+1) x^(N+1)`.
    pub boundary: Real,
    /// `lhs - rhs - boundary`; zero exactly.
    pub deviation: Real,
}

pub fn functional_identity_check(report: &DimensionReport) -> Result<FunctionalIdentity> {
    let m = report.m;
    let n = report.horizon();
    let log_m = report.log_m();
    let prec = report.precision_bits;
    let mut lhs = LogValue::zero();
    for (i, s) in report.s_forms.iter().enumerate() {
        lhs = lhs.add(&s.scale(&inv_pow(m, i + 2)));
    }
    let mut r_sum = LogValue::zero();
    for (i, r) in report.r_forms.iter().take(n).enumerate() {
        r_sum = r_sum.add(&r.scale(&inv_pow(m, i + 1)));
    }
    let rhs = r_sum.scale(&(BigRational::one() - inv_pow(m, 1)));
    let boundary = report.r_forms[n].scale(&inv_pow(m, n + 1));
    let deviation = lhs.sub(&rhs).sub(&boundary);
    Ok(FunctionalIdentity {
        lhs: lhs.ratio(&log_m, prec)?,
        rhs: rhs.ratio(&log_m, prec)?,
        boundary: boundary.ratio(&log_m, prec)?,
        deviation: deviation.ratio(&log_m, prec)?,
    })
}

/// For a non-negative report: `L_n` non-decreasing and bounded by
/// `log|G_1| / (m - 1)`. Returns the first failing `n`.
pub fn monotone_convergence_check(report: &DimensionReport) -> Option<usize> {
    let m = report.m;
    let bound = report.log_orders[0].scale(&BigRational::new(BigInt::one(), BigInt::from(m - 1)));
    let mut partial = LogValue::zero();
    for (i, r) in report.r_forms.iter().enumerate() {
        let next = partial.add(&r.scale(&inv_pow(m, i + 1)));
        if next.sub(&partial).sign() == Ordering::Less || bound.sub(&next).sign() == Ordering::Less {
            return Some(i + 1);
        }
        partial = next;
    }
    None
}

/// A bounded-horizon observation: `s_n = 0` for `start <= n <= horizon`.
/// It certifies nothing beyond the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HorizonCertificate {
    pub start: usize,
    pub horizon: usize,
}

impl fmt::Display for HorizonCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "s_n = 0 for {} <= n <= {} (bounded-horizon certificate, not a proof)",
            self.start, self.horizon
        )
    }
}

/// Smallest `M` with `s_n = 0` for every computed `n >= M`. `None` when the
/// last computed `s_n` is nonzero or the report is not non-negative.
pub fn regular_branch_horizon(report: &DimensionReport) -> Option<HorizonCertificate> {
    if report.sign != Sign::NonNegative {
        return None;
    }
    let n = report.horizon();
    let mut start = n + 1;
    while start > 1 && report.s_forms[start - 2].is_zero() {
        start -= 1;
    }
    (start <= n.max(1)).then_some(HorizonCertificate { start, horizon: n })
}

/// `1 - (1/log|G_1|) sum_{i<=n} s_i / m^i` for `n = 1..=N`: dimensions of
/// the finite-type approximations relative to `W_(G_1)`.
pub fn finite_type_dimensions(report: &DimensionReport) -> Result<Vec<Real>> {
    let m = report.m;
    let log_g1 = &report.log_orders[0];
    if log_g1.is_zero() {
        return Err(Error::InvalidInput("G acts trivially on the first level".into()));
    }
    let mut acc = log_g1.clone();
    let mut out = Vec::new();
    for (i, s) in report.s_forms.iter().enumerate() {
        acc = acc.sub(&s.scale(&inv_pow(m, i + 1)));
        out.push(acc.ratio(log_g1, report.precision_bits)?);
    }
    Ok(out)
}

/// Outcome of comparing quotient orders with those of `W_H`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FullDimension {
    pub holds: bool,
    /// Index of the first nonzero `s_n`, or 1 when `|G_1| != |H|`.
    pub first_failure: Option<usize>,
    /// `|W_H / St(n)| = |H|^((m^n - 1)/(m - 1))`.
    pub ambient_orders: Vec<BigUint>,
}

/// `|G_1| = |H|` and `s_n = 0` through the horizon, i.e. every computed
/// quotient order equals that of `W_H`. A bounded-horizon check.
pub fn full_dimension_detector(orders: &OrderSequence, h: &BigUint) -> FullDimension {
    let m = orders.m;
    let ambient_orders: Vec<BigUint> = (1..=orders.orders.len())
        .map(|n| {
            let e = (0..n).map(|j| BigUint::from(m).pow(j as u32)).sum::<BigUint>();
            h.pow(e.to_u32().expect("exponent fits"))
        })
        .collect();
    let first_failure = orders
        .orders
        .iter()
        .zip(&ambient_orders)
        .position(|(a, b)| a != b)
        .map(|i| i.max(1));
    FullDimension { holds: first_failure.is_none(), first_failure, ambient_orders }
}
