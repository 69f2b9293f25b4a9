//! The recursive sequence `u_n = phi(1/2^n)`.
//!
//! `u_0 = u_1 = 1`, and every later term either repeats its predecessor
//! (HOLD) or is `lambda*u_(n-1) + (1-lambda) * max_i delta*u_i*u_(n-i)`
//! (UPDATE). Any such sequence is nonincreasing and dominates
//! `delta*u_i*u_(n-i)` for every split `i`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::rational::{cmp_products, Rational};
use crate::report::CertReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Choice {
    Hold,
    Update,
}

impl Choice {
    pub fn as_char(self) -> char {
        match self {
            Choice::Hold => 'H',
            Choice::Update => 'U',
        }
    }
}

/// Choices for `n = 2, 3, …, N` (entry `k` drives index `k + 2`).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct UpdateMask(Vec<Choice>);

impl UpdateMask {
    pub fn new(choices: Vec<Choice>) -> Self {
        UpdateMask(choices)
    }

    pub fn choices(&self) -> &[Choice] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Choice that produced `u_n`, for `n >= 2`.
    pub fn at(&self, n: usize) -> Option<Choice> {
        n.checked_sub(2).and_then(|k| self.0.get(k).copied())
    }

    pub fn push(&mut self, c: Choice) {
        self.0.push(c);
    }
}

impl fmt::Display for UpdateMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|c| write!(f, "{}", c.as_char()))
    }
}

impl FromStr for UpdateMask {
    type Err = Error;

    /// `H`/`U` letters; whitespace is ignored.
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                'H' | 'h' => Ok(Choice::Hold),
                'U' | 'u' => Ok(Choice::Update),
                other => Err(Error::Parse(format!("mask entry {other:?} is not H or U"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(UpdateMask)
    }
}

impl Serialize for UpdateMask {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for UpdateMask {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let mask: UpdateMask = s.parse().map_err(serde::de::Error::custom)?;
        if mask.to_string() != s {
            return Err(serde::de::Error::custom("mask must be written as uppercase H/U with no separators"));
        }
        Ok(mask)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSeq", into = "RawSeq")]
pub struct DyadicSeq {
    params: Params,
    mask: UpdateMask,
    values: Vec<Rational>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeq {
    params: Params,
    mask: UpdateMask,
    values: Vec<Rational>,
}

impl TryFrom<RawSeq> for DyadicSeq {
    type Error = Error;

    fn try_from(raw: RawSeq) -> Result<Self> {
        if raw.values.len() < 2 || raw.values.len() != raw.mask.len() + 2 {
            return Err(Error::Parse(format!(
                "sequence has {} values but a mask of length {}",
                raw.values.len(),
                raw.mask.len()
            )));
        }
        Ok(DyadicSeq { params: raw.params, mask: raw.mask, values: raw.values })
    }
}

impl From<DyadicSeq> for RawSeq {
    fn from(s: DyadicSeq) -> Self {
        RawSeq { params: s.params, mask: s.mask, values: s.values }
    }
}

/// `max_{1<=i<=n-1} u_i * u_(n-i)` over the first `n` entries of `values`.
pub(crate) fn max_split_product(values: &[Rational], n: usize) -> Rational {
    debug_assert!(n >= 2 && values.len() >= n);
    let mut best = 1;
    for i in 2..=n / 2 {
        if cmp_products(&values[i], &values[n - i], &values[best], &values[n - best]) == Ordering::Greater {
            best = i;
        }
    }
    &values[best] * &values[n - best]
}

/// The UPDATE value for index `n = values.len()`.
pub(crate) fn update_value(params: &Params, values: &[Rational]) -> Rational {
    let n = values.len();
    let m = max_split_product(values, n);
    params.lambda() * &values[n - 1] + params.one_minus_lambda() * params.delta() * m
}

impl DyadicSeq {
    /// The two fixed leading terms `u_0 = u_1 = 1`.
    pub fn initial(params: Params) -> Self {
        DyadicSeq { params, mask: UpdateMask::default(), values: vec![Rational::one(), Rational::one()] }
    }

    pub fn from_mask(params: Params, mask: &UpdateMask) -> Self {
        let mut seq = DyadicSeq::initial(params);
        for &c in mask.choices() {
            seq.push(c);
        }
        seq
    }

    /// Wrap raw values, inferring the mask (equal to predecessor means HOLD).
    /// Nothing is validated; use [`verify_un_lemma`] for that.
    pub fn from_values(params: Params, values: Vec<Rational>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Parse("a sequence needs at least u_0 and u_1".into()));
        }
        let mask = UpdateMask(
            values.windows(2).skip(1).map(|w| if w[0] == w[1] { Choice::Hold } else { Choice::Update }).collect(),
        );
        Ok(DyadicSeq { params, mask, values })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn mask(&self) -> &UpdateMask {
        &self.mask
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    /// `N`, the largest index present.
    pub fn depth(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, n: usize) -> Option<&Rational> {
        self.values.get(n)
    }

    pub fn last(&self) -> &Rational {
        self.values.last().expect("sequence is never empty")
    }

    /// Append `u_(N+1)` in place.
    pub fn push(&mut self, choice: Choice) {
        let next = match choice {
            Choice::Hold => self.last().clone(),
            Choice::Update => update_value(&self.params, &self.values),
        };
        self.values.push(next);
        self.mask.push(choice);
    }

    pub fn into_values(self) -> Vec<Rational> {
        self.values
    }
}

pub fn extend_u(seq: &DyadicSeq, choice: Choice) -> DyadicSeq {
    let mut out = seq.clone();
    out.push(choice);
    out
}

/// Recheck `u_(n-1) >= u_n >= delta*u_i*u_(n-i)` for every `2 <= n <= N` and
/// every split, plus the fixed head and positivity. Reports the first failing `n`.
pub fn verify_un_lemma(seq: &DyadicSeq) -> CertReport {
    const CHECK: &str = "un_lemma";
    let u = seq.values();
    let delta = seq.params().delta();
    let one = Rational::one();
    for (n, v) in u.iter().enumerate().take(2) {
        if *v != one {
            return CertReport::fail(CHECK, n + 1, n, format!("u_{n} = {v}, expected 1/1"));
        }
    }
    for n in 2..u.len() {
        if !u[n].is_positive() {
            return CertReport::fail(CHECK, n - 1, n, format!("u_{n} = {} is not positive", u[n]));
        }
        if u[n] > u[n - 1] {
            return CertReport::fail(CHECK, n - 1, n, format!("u_{n} = {} exceeds u_{} = {}", u[n], n - 1, u[n - 1]));
        }
        // delta*u_i*u_(n-i) <= u_n, cross-multiplied
        let lhs_den = delta.denom() * u[n].numer();
        for i in 1..=n / 2 {
            let lhs = delta.numer() * u[i].numer() * u[n - i].numer() * u[n].denom();
            let rhs = &lhs_den * u[i].denom() * u[n - i].denom();
            if lhs > rhs {
                let bound = delta * &u[i] * &u[n - i];
                return CertReport::fail(
                    CHECK,
                    n - 1,
                    n,
                    format!("u_{n} = {} < delta*u_{i}*u_{} = {bound}", u[n], n - i),
                );
            }
        }
    }
    CertReport::pass(CHECK, u.len().saturating_sub(2))
}

/// `u_(2n) <= delta' * u_n`, meaningful when every step in `(n, 2n]` was UPDATE.
pub fn doubling_decay_holds(seq: &DyadicSeq, n: usize) -> Option<bool> {
    let v2n = seq.get(2 * n)?;
    Some(*v2n <= seq.params().delta_prime() * &seq.values()[n])
}
