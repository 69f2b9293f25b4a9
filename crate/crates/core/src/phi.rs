//! Piecewise-affine `phi` through the dyadic nodes `(1/2^n, u_n)` and the
//! induced `f(x) = x^alpha * phi(x)`.

use crate::dyadic::{verify_un_lemma, DyadicSeq};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::rational::Rational;
use crate::report::CertReport;

/// Continuous nondecreasing function on `[2^-N, 1]`, affine on every
/// `[1/2^(n+1), 1/2^n]`, with `phi(1/2^n) = u_n`. Below `2^-N` it is left
/// undefined.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhiFunction {
    seq: DyadicSeq,
}

pub fn build_phi(seq: DyadicSeq) -> Result<PhiFunction> {
    let report = verify_un_lemma(&seq);
    if let Some(v) = report.violation {
        return Err(Error::SeqInvalid { index: v.index, detail: v.detail });
    }
    Ok(PhiFunction { seq })
}

/// `n` with `2^n <= 1/x < 2^(n+1)`, for `0 < x <= 1`.
pub(crate) fn dyadic_band(x: &Rational) -> usize {
    let (a, b) = (x.numer(), x.denom());
    let mut n = (b.bits() as i64 - a.bits() as i64).max(0) as usize;
    // the bit-length estimate is off by at most one
    while (a << n) > *b {
        n -= 1;
    }
    while (a << (n + 1)) <= *b {
        n += 1;
    }
    n
}

impl PhiFunction {
    pub fn seq(&self) -> &DyadicSeq {
        &self.seq
    }

    pub fn params(&self) -> &Params {
        self.seq.params()
    }

    pub fn depth(&self) -> usize {
        self.seq.depth()
    }

    /// `phi(1/2^n) = u_n`.
    pub fn node(&self, n: usize) -> Option<&Rational> {
        self.seq.get(n)
    }

    /// Smallest point where `phi` is defined.
    pub fn resolution(&self) -> Rational {
        Rational::pow2(-(self.depth() as i64))
    }
}

pub fn eval_phi(phi: &PhiFunction, x: &Rational) -> Result<Rational> {
    if x.is_negative() || *x > Rational::one() {
        return Err(Error::OutOfDomain(x.clone()));
    }
    if x.is_zero() || *x < phi.resolution() {
        return Err(Error::BelowResolution { x: x.clone(), depth: phi.depth() });
    }
    let n = dyadic_band(x);
    let u = phi.seq.values();
    let t = x.mul_pow2(n as i64 + 1) - Rational::one();
    if t == Rational::one() {
        return Ok(u[n].clone());
    }
    // x in (1/2^(n+1), 1/2^n) and n < N here
    Ok(&u[n + 1] + t * (&u[n] - &u[n + 1]))
}

pub fn eval_f(phi: &PhiFunction, x: &Rational) -> Result<Rational> {
    if x.is_zero() {
        return Ok(Rational::zero());
    }
    let v = eval_phi(phi, x)?;
    Ok(x.pow(phi.params().alpha()) * v)
}

/// `f(1/2^n) = u_n / 2^(n*alpha)` straight from the nodes.
pub fn f_at_node(phi: &PhiFunction, n: usize) -> Option<Rational> {
    phi.node(n).map(|u| u * phi.params().dyadic_power(n))
}

/// The standing hypotheses on `phi`, evaluated through [`eval_phi`] at
/// the dyadic nodes: `phi(1/2) > 0`, `phi` nondecreasing along the nodes,
/// and `phi(1/2^n) >= delta*phi(1/2^i)*phi(1/2^(n-i))` for `2 <= n <= N`.
pub fn check_phi_hypothesis(phi: &PhiFunction) -> CertReport {
    const CHECK: &str = "phi_hypothesis";
    let nodes: Vec<Rational> = (0..=phi.depth())
        .map(|n| eval_phi(phi, &Rational::pow2(-(n as i64))).expect("nodes lie in the domain"))
        .collect();
    let delta = phi.params().delta();
    if nodes.len() < 2 || !nodes[1].is_positive() {
        return CertReport::fail(CHECK, 0, 1, "phi(1/2) is not positive");
    }
    for n in 1..nodes.len() {
        if nodes[n] > nodes[n - 1] {
            return CertReport::fail(CHECK, n, n, format!("phi(1/2^{n}) > phi(1/2^{})", n - 1));
        }
    }
    for n in 2..nodes.len() {
        let lhs_den = delta.denom() * nodes[n].numer();
        for i in 1..=n / 2 {
            // delta*phi_i*phi_(n-i) <= phi_n, cross-multiplied
            let lhs = delta.numer() * nodes[i].numer() * nodes[n - i].numer() * nodes[n].denom();
            let rhs = &lhs_den * nodes[i].denom() * nodes[n - i].denom();
            if lhs > rhs {
                let term = delta * &nodes[i] * &nodes[n - i];
                return CertReport::fail(
                    CHECK,
                    n - 1,
                    n,
                    format!("phi(1/2^{n}) = {} < delta*phi(1/2^{i})*phi(1/2^{}) = {term}", nodes[n], n - i),
                );
            }
        }
    }
    CertReport::pass(CHECK, nodes.len().saturating_sub(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{Choice, UpdateMask};
    use crate::params::make_params;
    use crate::rational::q;

    fn p(alpha: u32, beta: u32) -> Params {
        make_params(alpha, beta, q(1, 2)).unwrap()
    }

    fn phi_of(mask: &str, params: Params) -> PhiFunction {
        build_phi(DyadicSeq::from_mask(params, &mask.parse::<UpdateMask>().unwrap())).unwrap()
    }

    #[test]
    fn constant_phi() {
        let phi = phi_of("HHHHHHHH", p(1, 2));
        assert_eq!(eval_phi(&phi, &q(17, 32)).unwrap(), q(1, 1));
        assert_eq!(eval_phi(&phi, &q(1, 512)).unwrap(), q(1, 1));
        assert_eq!(eval_phi(&phi, &q(3, 1000)).unwrap(), q(1, 1));
    }

    #[test]
    fn interpolation_examples() {
        let phi = phi_of("U", p(1, 2));
        assert_eq!(eval_phi(&phi, &q(3, 8)).unwrap(), q(7, 8));
        assert_eq!(eval_phi(&phi, &q(1, 4)).unwrap(), q(3, 4));
        assert_eq!(eval_phi(&phi, &q(5, 16)).unwrap(), q(13, 16));
        assert_eq!(eval_phi(&phi, &q(1, 1)).unwrap(), q(1, 1));
    }

    #[test]
    fn domain_errors() {
        let phi = phi_of("U", p(1, 2));
        assert!(matches!(eval_phi(&phi, &q(0, 1)), Err(Error::BelowResolution { depth: 2, .. })));
        assert!(matches!(eval_phi(&phi, &q(1, 5)), Err(Error::BelowResolution { .. })));
        assert!(matches!(eval_phi(&phi, &q(-1, 5)), Err(Error::OutOfDomain(_))));
        assert!(matches!(eval_phi(&phi, &q(5, 4)), Err(Error::OutOfDomain(_))));
        assert!(matches!(eval_f(&phi, &q(1, 5)), Err(Error::BelowResolution { .. })));
    }

    #[test]
    fn f_examples() {
        let phi = phi_of("U", p(1, 2));
        assert_eq!(eval_f(&phi, &q(0, 1)).unwrap(), q(0, 1));
        assert_eq!(eval_f(&phi, &q(1, 4)).unwrap(), q(3, 16));
        assert_eq!(f_at_node(&phi, 2).unwrap(), q(3, 16));
        let ones = phi_of("HHH", p(2, 3));
        assert_eq!(eval_f(&ones, &q(1, 2)).unwrap(), q(1, 4));
    }

    #[test]
    fn build_rejects_invalid_seq() {
        let params = p(1, 2);
        let bad = DyadicSeq::from_values(params, vec![q(1, 1), q(1, 1), q(3, 4), q(1, 100)]).unwrap();
        assert!(matches!(build_phi(bad), Err(Error::SeqInvalid { index: 3, .. })));
    }

    #[test]
    fn hypothesis_examples() {
        assert!(check_phi_hypothesis(&phi_of("UUHUUHHU", p(1, 2))).passed);
        assert!(check_phi_hypothesis(&phi_of("HHHH", p(1, 2))).passed);
    }

    #[test]
    fn hypothesis_detects_tampering() {
        // bypass build_phi to hand the check a broken function
        let params = p(1, 2);
        let seq = DyadicSeq::from_values(params, vec![q(1, 1), q(1, 1), q(3, 4), q(1, 100)]).unwrap();
        let phi = PhiFunction { seq };
        let r = check_phi_hypothesis(&phi);
        assert!(!r.passed);
        assert_eq!(r.first_violation(), Some(3));
    }

    #[test]
    fn band_is_exact() {
        assert_eq!(dyadic_band(&q(1, 1)), 0);
        assert_eq!(dyadic_band(&q(3, 4)), 0);
        assert_eq!(dyadic_band(&q(1, 2)), 1);
        assert_eq!(dyadic_band(&q(3, 8)), 1);
        assert_eq!(dyadic_band(&q(1, 4)), 2);
        assert_eq!(dyadic_band(&q(255, 1024)), 2);
    }

    fn deep_phi() -> PhiFunction {
        let mut s = DyadicSeq::initial(p(1, 2));
        for k in 0..10 {
            s.push(if k % 3 == 1 { Choice::Hold } else { Choice::Update });
        }
        build_phi(s).unwrap()
    }

    proptest::proptest! {
        #[test]
        fn monotone_on_grid(a in 1i64..=2048, b in 1i64..=2048) {
            let phi = deep_phi();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (x, y) = (q(lo, 2048), q(hi, 2048));
            proptest::prop_assert!(eval_phi(&phi, &x).unwrap() <= eval_phi(&phi, &y).unwrap());
            proptest::prop_assert!(eval_f(&phi, &x).unwrap() <= eval_f(&phi, &y).unwrap());
        }
    }

    #[test]
    fn nodes_are_reproduced() {
        let phi = deep_phi();
        for n in 0..=phi.depth() {
            assert_eq!(&eval_phi(&phi, &Rational::pow2(-(n as i64))).unwrap(), phi.node(n).unwrap());
        }
    }
}
