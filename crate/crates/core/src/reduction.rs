//! The map `theta_1` from real sequences into `[0,1]`-valued sequences at
//! finite truncation, the index pairing it relies on, and exact checks of the
//! block-sum sandwich.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phi::{eval_f, PhiFunction};
use crate::rational::Rational;
use crate::report::CertReport;

fn cantor(n: u64, k: u64) -> u64 {
    (n + k) * (n + k + 1) / 2 + k
}

/// `<i,n,k> = 2*C(n,k) + i` with Cantor's `C(n,k) = (n+k)(n+k+1)/2 + k`.
pub fn pair_index(i: u8, n: u64, k: u64) -> u64 {
    assert!(i <= 1, "parity bit must be 0 or 1");
    2 * cantor(n, k) + i as u64
}

pub fn unpair_index(m: u64) -> (u8, u64, u64) {
    let (i, c) = ((m & 1) as u8, m >> 1);
    // largest w with w(w+1)/2 <= c
    let mut w = (((8 * c as u128 + 1) as f64).sqrt() as u64).saturating_sub(1) / 2;
    while (w + 1) * (w + 2) / 2 <= c {
        w += 1;
    }
    while w * (w + 1) / 2 > c {
        w -= 1;
    }
    let k = c - w * (w + 1) / 2;
    (i, w - k, k)
}

/// Finitely supported sequence with values in `(0,1]`; absent indices are 0.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<u64, Rational>", into = "BTreeMap<u64, Rational>")]
pub struct SparseUnitVec(BTreeMap<u64, Rational>);

impl TryFrom<BTreeMap<u64, Rational>> for SparseUnitVec {
    type Error = Error;

    fn try_from(map: BTreeMap<u64, Rational>) -> Result<Self> {
        let mut v = SparseUnitVec::default();
        for (m, x) in map {
            v.insert(m, x)?;
        }
        Ok(v)
    }
}

impl From<SparseUnitVec> for BTreeMap<u64, Rational> {
    fn from(v: SparseUnitVec) -> Self {
        v.0
    }
}

impl SparseUnitVec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `y_m`; zero removes the entry.
    pub fn insert(&mut self, m: u64, value: Rational) -> Result<()> {
        if value.is_negative() || value > Rational::one() {
            return Err(Error::OutOfDomain(value));
        }
        if value.is_zero() {
            self.0.remove(&m);
        } else {
            self.0.insert(m, value);
        }
        Ok(())
    }

    pub fn get(&self, m: u64) -> Rational {
        self.0.get(&m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &Rational)> {
        self.0.iter().map(|(&m, v)| (m, v))
    }
}

/// Finite signed sequence `x_0, x_1, …`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RealVec(pub Vec<Rational>);

impl RealVec {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for RealVec {
    type Err = Error;

    /// Comma-separated rationals; the empty string is the empty vector.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().is_empty() {
            return Ok(RealVec::default());
        }
        s.split(',').map(|t| t.trim().parse()).collect::<Result<Vec<_>>>().map(RealVec)
    }
}

impl fmt::Display for RealVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// `c_n = 2^-(n+1)`, with `0 < f(c_n) < 2^-n` checked.
pub fn choose_cn(phi: &PhiFunction, n: usize) -> Result<Rational> {
    if n + 1 > phi.depth() {
        return Err(Error::DepthExceeded { n, depth: phi.depth() });
    }
    let c = Rational::pow2(-(n as i64 + 1));
    let fc = eval_f(phi, &c)?;
    if !fc.is_positive() || fc >= Rational::pow2(-(n as i64)) {
        return Err(Error::InvalidParams(format!("f(c_{n}) = {fc} is outside (0, 2^-{n})")));
    }
    Ok(c)
}

fn copies(x: &Rational, fc: &Rational) -> u64 {
    (x.abs() / fc).floor_int().to_u64().expect("copy count fits in u64")
}

/// `theta_1(x)`: coordinate `n` contributes `floor(|x_n|/f(c_n))` copies of
/// `c_n` at indices `<0,n,k>` when `x_n >= 0`, or `<1,n,k>` when `x_n < 0`.
pub fn theta1(x: &RealVec, phi: &PhiFunction) -> Result<SparseUnitVec> {
    let mut y = SparseUnitVec::new();
    for (n, xn) in x.0.iter().enumerate() {
        let c = choose_cn(phi, n)?;
        let fc = eval_f(phi, &c)?;
        let i = u8::from(xn.is_negative());
        for k in 0..copies(xn, &fc) {
            y.insert(pair_index(i, n as u64, k), c.clone())?;
        }
    }
    Ok(y)
}

/// `sum_m f(|y_m - yhat_m|)` over the union of supports.
pub fn f_sum(y: &SparseUnitVec, yhat: &SparseUnitVec, phi: &PhiFunction) -> Result<Rational> {
    let support: BTreeSet<u64> = y.0.keys().chain(yhat.0.keys()).copied().collect();
    support_sum(y, yhat, &support, phi)
}

/// Block-`n` part of the f-sum: indices `<i,n,k>` for both `i`.
pub fn block_sum(y: &SparseUnitVec, yhat: &SparseUnitVec, n: u64, phi: &PhiFunction) -> Result<Rational> {
    let blocks = block_supports(y, yhat);
    match blocks.get(&n) {
        Some(support) => support_sum(y, yhat, support, phi),
        None => Ok(Rational::zero()),
    }
}

fn block_supports(y: &SparseUnitVec, yhat: &SparseUnitVec) -> BTreeMap<u64, BTreeSet<u64>> {
    let mut blocks: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for &m in y.0.keys().chain(yhat.0.keys()) {
        blocks.entry(unpair_index(m).1).or_default().insert(m);
    }
    blocks
}

fn support_sum(
    y: &SparseUnitVec,
    yhat: &SparseUnitVec,
    support: &BTreeSet<u64>,
    phi: &PhiFunction,
) -> Result<Rational> {
    // theta_1 repeats one value per block, so most terms coincide
    let mut counts: BTreeMap<Rational, u64> = BTreeMap::new();
    for &m in support {
        let d = (y.get(m) - yhat.get(m)).abs();
        if !d.is_zero() {
            *counts.entry(d).or_default() += 1;
        }
    }
    let mut total = Rational::zero();
    for (d, c) in counts {
        total = total + eval_f(phi, &d)? * Rational::from_integer(c as i64);
    }
    Ok(total)
}

/// For every coordinate `n`,
/// `|x_n - xhat_n| - 2^(1-n) < block sum < |x_n - xhat_n| + 2^(1-n)`, exactly.
pub fn verify_theta1_bounds(x: &RealVec, xhat: &RealVec, phi: &PhiFunction) -> CertReport {
    const CHECK: &str = "theta1_sandwich";
    if x.len() != xhat.len() {
        return CertReport::fail(CHECK, 0, 0, format!("lengths {} and {} differ", x.len(), xhat.len()));
    }
    let (y, yhat) = match (theta1(x, phi), theta1(xhat, phi)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return CertReport::fail(CHECK, 0, 0, e.to_string()),
    };
    let blocks = block_supports(&y, &yhat);
    let empty = BTreeSet::new();
    for n in 0..x.len() {
        let dist = (&x.0[n] - &xhat.0[n]).abs();
        let margin = Rational::pow2(1 - n as i64);
        let support = blocks.get(&(n as u64)).unwrap_or(&empty);
        let sum = match support_sum(&y, &yhat, support, phi) {
            Ok(s) => s,
            Err(e) => return CertReport::fail(CHECK, n, n, e.to_string()),
        };
        if !(&dist - &margin < sum && sum < &dist + &margin) {
            return CertReport::fail(
                CHECK,
                n,
                n,
                format!("block sum {sum} not within {margin} of |x_n - xhat_n| = {dist}"),
            );
        }
    }
    CertReport::pass(CHECK, x.len())
}

/// Whether `theta1(x)` would emit at most `cap` entries.
pub fn copies_bounded(x: &RealVec, phi: &PhiFunction, cap: u64) -> Result<bool> {
    let mut total = BigInt::zero();
    for (n, xn) in x.0.iter().enumerate() {
        let fc = eval_f(phi, &choose_cn(phi, n)?)?;
        total += (xn.abs() / fc).floor_int();
    }
    Ok(total.abs() <= BigInt::from(cap))
}
