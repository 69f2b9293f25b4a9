//! Construction parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// Exponents `alpha < beta`, the parameter `delta`, and the derived
/// `lambda = 2^(alpha - beta)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct Params {
    alpha: u32,
    beta: u32,
    delta: Rational,
    lambda: Rational,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    alpha: u32,
    beta: u32,
    delta: Rational,
    lambda: Rational,
}

impl TryFrom<RawParams> for Params {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        let p = make_params(raw.alpha, raw.beta, raw.delta)?;
        if p.lambda != raw.lambda {
            return Err(Error::InvalidParams(format!(
                "stored lambda {} disagrees with 2^(alpha-beta) = {}",
                raw.lambda, p.lambda
            )));
        }
        Ok(p)
    }
}

impl From<Params> for RawParams {
    fn from(p: Params) -> Self {
        RawParams { alpha: p.alpha, beta: p.beta, delta: p.delta, lambda: p.lambda }
    }
}

pub fn make_params(alpha: u32, beta: u32, delta: Rational) -> Result<Params> {
    if alpha < 1 || beta <= alpha {
        return Err(Error::InvalidExponents { alpha, beta });
    }
    if !delta.is_positive() || delta >= Rational::one() {
        return Err(Error::InvalidDelta(delta));
    }
    let lambda = Rational::pow2(i64::from(alpha) - i64::from(beta));
    Ok(Params { alpha, beta, delta, lambda })
}

impl Params {
    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    pub fn delta(&self) -> &Rational {
        &self.delta
    }

    pub fn lambda(&self) -> &Rational {
        &self.lambda
    }

    /// `1 - lambda`.
    pub fn one_minus_lambda(&self) -> Rational {
        Rational::one() - &self.lambda
    }

    /// Per-doubling decay factor `lambda + (1 - lambda) * delta`.
    pub fn delta_prime(&self) -> Rational {
        &self.lambda + self.one_minus_lambda() * &self.delta
    }

    /// `2^(-n * alpha)`, the factor `x^alpha` at `x = 1/2^n`.
    pub fn dyadic_power(&self, n: usize) -> Rational {
        Rational::pow2(-(n as i64) * i64::from(self.alpha))
    }
}
