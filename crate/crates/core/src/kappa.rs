//! The decomposition `kappa(1/2^n)^beta = f(1/2^n) - f(1/2^(n-1))/2^beta`
//! and the three conditions that make `E_f` embed into `R^omega/l_beta`.
//!
//! `kappa` itself is generally irrational, so only `kappa^beta` is stored
//! and every comparison is carried out in beta-th powers.

use serde::{Deserialize, Serialize};

use crate::canon::sha256_hex;
use crate::dyadic::{verify_un_lemma, DyadicSeq};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::rational::Rational;
use crate::report::CertReport;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KappaSeq {
    seq: DyadicSeq,
    kappa_beta: Vec<Rational>,
}

impl KappaSeq {
    pub fn params(&self) -> &Params {
        self.seq.params()
    }

    pub fn seq(&self) -> &DyadicSeq {
        &self.seq
    }

    /// Entry `n` is `kappa(1/2^n)^beta`.
    pub fn kappa_beta(&self) -> &[Rational] {
        &self.kappa_beta
    }

    pub fn depth(&self) -> usize {
        self.kappa_beta.len() - 1
    }

    /// `f(1/2^n) = u_n / 2^(n*alpha)`.
    pub fn f_node(&self, n: usize) -> Rational {
        &self.seq.values()[n] * self.params().dyadic_power(n)
    }
}

pub fn kappa_beta_seq(seq: &DyadicSeq) -> Result<KappaSeq> {
    if let Some(v) = verify_un_lemma(seq).violation {
        return Err(Error::SeqInvalid { index: v.index, detail: v.detail });
    }
    let params = seq.params();
    let u = seq.values();
    let mut kappa_beta = Vec::with_capacity(u.len());
    kappa_beta.push(Rational::one());
    for n in 1..u.len() {
        let gap = &u[n] - params.lambda() * &u[n - 1];
        if gap.is_negative() || gap > Rational::one() {
            return Err(Error::NotWellDefined(n));
        }
        kappa_beta.push(gap * params.dyadic_power(n));
    }
    Ok(KappaSeq { seq: seq.clone(), kappa_beta })
}

/// `L = max{A, 2, (delta*2^alpha)^(-1/beta)}` kept as its candidates; the
/// third is stored as its beta-th power.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LConstant {
    /// `sum_k 2^(-k*alpha) = 1/(1 - 2^-alpha)`.
    #[serde(rename = "A")]
    pub a: Rational,
    pub two: Rational,
    #[serde(rename = "thirdBeta")]
    pub third_beta: Rational,
    pub beta: u32,
}

impl LConstant {
    pub fn for_params(params: &Params) -> Self {
        let a = (Rational::one() - Rational::pow2(-i64::from(params.alpha()))).recip();
        let third_beta = (params.delta() * Rational::pow2(i64::from(params.alpha()))).recip();
        LConstant { a, two: Rational::from_integer(2), third_beta, beta: params.beta() }
    }

    /// The same candidates multiplied by `k`.
    pub fn scaled(&self, k: &Rational) -> Self {
        LConstant {
            a: &self.a * k,
            two: &self.two * k,
            third_beta: &self.third_beta * k.pow(self.beta),
            beta: self.beta,
        }
    }

    /// `L` as a rational when it is one: either a rational candidate wins or
    /// the third candidate is an exact beta-th power.
    pub fn effective(&self) -> Option<Rational> {
        let rational_max = std::cmp::max(&self.a, &self.two).clone();
        if self.third_beta <= rational_max.pow(self.beta) {
            Some(rational_max)
        } else {
            self.third_beta.exact_root(self.beta)
        }
    }

    /// `s <= L*r` for `s, r >= 0`, decided candidate by candidate.
    pub fn bounds(&self, s: &Rational, r: &Rational) -> bool {
        *s <= &self.a * r || *s <= &self.two * r || s.pow(self.beta) <= &self.third_beta * r.pow(self.beta)
    }

    /// `s <= L^beta * r` for beta-th powers `s, r >= 0`.
    pub fn bounds_in_powers(&self, s: &Rational, r: &Rational) -> bool {
        *s <= self.a.pow(self.beta) * r || *s <= self.two.pow(self.beta) * r || *s <= &self.third_beta * r
    }
}

/// `f(1/2^n) = sum_{i<=n} kappa(1/2^i)^beta / 2^((n-i)*beta)` exactly, for all `n <= N`.
pub fn verify_condition_i(kappa: &KappaSeq) -> CertReport {
    const CHECK: &str = "condition_i";
    let beta = i64::from(kappa.params().beta());
    let mut acc = Rational::zero();
    for (n, kb) in kappa.kappa_beta.iter().enumerate() {
        acc = acc.mul_pow2(-beta) + kb;
        let f = kappa.f_node(n);
        if acc != f {
            return CertReport::fail(CHECK, n, n, format!("f(1/2^{n}) = {f} but the kappa sum is {acc}"));
        }
    }
    CertReport::pass(CHECK, kappa.kappa_beta.len())
}

/// Certified bound on `sum_{i>N} kappa(1/2^i)^beta`: `u_N 2^(-(N+1)alpha) / (1 - 2^-alpha)`.
pub fn tail_bound(kappa: &KappaSeq) -> Rational {
    let n = kappa.depth();
    let alpha = i64::from(kappa.params().alpha());
    let u_last = kappa.seq.last();
    u_last * Rational::pow2(-((n as i64) + 1) * alpha) / (Rational::one() - Rational::pow2(-alpha))
}

/// `sum_{i>=n} kappa(1/2^i)^beta <= L * f(1/2^n)` for every `n <= N`, with the
/// sum beyond `N` replaced by [`tail_bound`].
pub fn verify_condition_ii(kappa: &KappaSeq, l: &LConstant) -> CertReport {
    const CHECK: &str = "condition_ii";
    let mut suffix = tail_bound(kappa);
    for n in (0..kappa.kappa_beta.len()).rev() {
        suffix = suffix + &kappa.kappa_beta[n];
        let r = kappa.f_node(n);
        if !l.bounds(&suffix, &r) {
            return CertReport::fail(
                CHECK,
                kappa.kappa_beta.len() - n,
                n,
                format!("tail sum {suffix} exceeds L*f(1/2^{n}) for f = {r}"),
            );
        }
    }
    CertReport::pass(CHECK, kappa.kappa_beta.len())
}

/// The case `n = 1` against `L*kappa(1)/2`, then for `n >= 2` the step
/// `kappa(1/2^n)^beta <= kappa(1/2^(n-1))^beta / (delta*2^alpha)`.
pub fn verify_condition_iii(kappa: &KappaSeq, l: &LConstant) -> CertReport {
    const CHECK: &str = "condition_iii";
    let kb = &kappa.kappa_beta;
    if kb.len() < 2 {
        return CertReport::pass(CHECK, 0);
    }
    let params = kappa.params();
    let beta = i64::from(params.beta());
    // kappa_1 <= L*kappa_0/2  <=>  kappa_1^beta * 2^beta <= L^beta * kappa_0^beta
    if !l.bounds_in_powers(&kb[1].mul_pow2(beta), &kb[0]) {
        return CertReport::fail(CHECK, 1, 1, format!("kappa(1/2)^beta = {} too large against kappa(1)", kb[1]));
    }
    let step = params.delta() * Rational::pow2(i64::from(params.alpha()));
    for n in 2..kb.len() {
        if &kb[n] * &step > kb[n - 1] {
            return CertReport::fail(
                CHECK,
                n,
                n,
                format!("kappa^beta ratio at n={n}: {} > {} / (delta*2^alpha)", kb[n], kb[n - 1]),
            );
        }
    }
    CertReport::pass(CHECK, kb.len() - 1)
}

/// The condition as literally stated, `kappa(1/2^n) <= L * max_{i<n} kappa(1/2^i)/2^(n-i)`,
/// with no intermediate step.
pub fn condition_iii_literal(kappa: &KappaSeq, l: &LConstant) -> CertReport {
    const CHECK: &str = "condition_iii_literal";
    let kb = &kappa.kappa_beta;
    let beta = i64::from(kappa.params().beta());
    // running max of kappa_i^beta / 2^((n-i)beta)
    let mut best = Rational::zero();
    for n in 1..kb.len() {
        best = std::cmp::max(best, kb[n - 1].clone()).mul_pow2(-beta);
        if !l.bounds_in_powers(&kb[n], &best) {
            return CertReport::fail(CHECK, n, n, format!("kappa(1/2^{n})^beta = {} exceeds L^beta * {best}", kb[n]));
        }
    }
    CertReport::pass(CHECK, kb.len().saturating_sub(1))
}

/// `kappa(1/2^n)^beta <= f(1/2^n)` for every `n`.
pub fn verify_domination(kappa: &KappaSeq) -> CertReport {
    const CHECK: &str = "kappa_domination";
    for (n, kb) in kappa.kappa_beta.iter().enumerate() {
        let f = kappa.f_node(n);
        if *kb > f {
            return CertReport::fail(CHECK, n, n, format!("kappa^beta {kb} exceeds f(1/2^{n}) = {f}"));
        }
    }
    CertReport::pass(CHECK, kappa.kappa_beta.len())
}

/// All kappa reports for one sequence, keyed to that sequence by hash.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaReport {
    #[serde(rename = "seqSha256")]
    pub seq_sha256: String,
    #[serde(rename = "L")]
    pub l: LConstant,
    /// Conditions are certified for `n <= certifiedThrough`; beyond that
    /// only the tail bound enters condition (ii).
    #[serde(rename = "certifiedThrough")]
    pub certified_through: usize,
    #[serde(rename = "tailBound")]
    pub tail_bound: Rational,
    pub reports: Vec<CertReport>,
}

impl KappaReport {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }
}

pub fn kappa_report(seq: &DyadicSeq) -> Result<KappaReport> {
    let kappa = kappa_beta_seq(seq)?;
    let l = LConstant::for_params(seq.params());
    Ok(KappaReport {
        seq_sha256: sha256_hex(seq)?,
        certified_through: kappa.depth(),
        tail_bound: tail_bound(&kappa),
        reports: vec![
            verify_condition_i(&kappa),
            verify_condition_ii(&kappa, &l),
            verify_condition_iii(&kappa, &l),
            verify_domination(&kappa),
        ],
        l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{Choice, UpdateMask};
    use crate::params::make_params;
    use crate::rational::q;

    fn seq(alpha: u32, beta: u32, delta: Rational, mask: &str) -> DyadicSeq {
        DyadicSeq::from_mask(make_params(alpha, beta, delta).unwrap(), &mask.parse::<UpdateMask>().unwrap())
    }

    /// Direct summation, no recurrence.
    fn oracle_sum(kappa: &KappaSeq, n: usize) -> Rational {
        let beta = kappa.params().beta();
        (0..=n).map(|i| &kappa.kappa_beta()[i] * Rational::pow2(-((n - i) as i64) * i64::from(beta))).sum()
    }

    #[test]
    fn kappa_examples() {
        let k = kappa_beta_seq(&seq(1, 2, q(1, 2), "U")).unwrap();
        assert_eq!(k.kappa_beta(), &[q(1, 1), q(1, 4), q(1, 16)]);
        let ones = kappa_beta_seq(&seq(1, 2, q(1, 2), "HHHHHH")).unwrap();
        for n in 1..=7 {
            assert_eq!(ones.kappa_beta()[n], q(1, 2) * Rational::pow2(-(n as i64)));
        }
        let p = make_params(2, 5, q(1, 3)).unwrap();
        let k = kappa_beta_seq(&DyadicSeq::from_mask(p.clone(), &"UH".parse().unwrap())).unwrap();
        assert_eq!(k.kappa_beta()[1], p.one_minus_lambda() * Rational::pow2(-2));
    }

    #[test]
    fn condition_i_examples() {
        let k = kappa_beta_seq(&seq(1, 2, q(1, 2), "U")).unwrap();
        assert_eq!(oracle_sum(&k, 2), q(3, 16));
        assert_eq!(oracle_sum(&k, 0), q(1, 1));
        assert_eq!(oracle_sum(&k, 1), q(1, 2));
        assert!(verify_condition_i(&k).passed);
    }

    #[test]
    fn effective_l() {
        let l = LConstant::for_params(&make_params(1, 2, q(1, 2)).unwrap());
        assert_eq!((l.a.clone(), l.two.clone(), l.third_beta.clone()), (q(2, 1), q(2, 1), q(1, 1)));
        assert_eq!(l.effective(), Some(q(2, 1)));
        let l = LConstant::for_params(&make_params(2, 4, q(1, 4)).unwrap());
        assert_eq!(l.a, q(4, 3));
        assert_eq!(l.effective(), Some(q(2, 1)));
        // third candidate wins and is a perfect square: (1/(1/32*2))^(1/2) = 4
        let l = LConstant::for_params(&make_params(1, 2, q(1, 32)).unwrap());
        assert_eq!(l.effective(), Some(q(4, 1)));
        // third candidate wins, irrational
        let l = LConstant::for_params(&make_params(1, 2, q(1, 16)).unwrap());
        assert_eq!(l.effective(), None);
    }

    #[test]
    fn condition_ii_examples() {
        let l = LConstant::for_params(&make_params(1, 2, q(1, 2)).unwrap());
        let ones = kappa_beta_seq(&seq(1, 2, q(1, 2), "HHHHHHHHH")).unwrap();
        assert_eq!(ones.depth(), 10);
        // S(0)+T = 1 + sum_{i=1}^{10} 2^-(i+1) + 2^-11/(1/2) = 3/2 + 2^-11
        let s0: Rational = ones.kappa_beta().iter().cloned().sum::<Rational>() + tail_bound(&ones);
        assert_eq!(s0, q(3073, 2048));
        assert!(s0 <= q(2, 1));
        assert!(verify_condition_ii(&ones, &l).passed);
    }

    #[test]
    fn condition_ii_catches_a_small_constant() {
        let l = LConstant { a: q(1, 1), two: q(1, 1), third_beta: q(1, 1), beta: 2 };
        let ones = kappa_beta_seq(&seq(1, 2, q(1, 2), "HHHH")).unwrap();
        let r = verify_condition_ii(&ones, &l);
        assert!(!r.passed);
    }

    #[test]
    fn condition_iii_examples() {
        let l = LConstant::for_params(&make_params(1, 2, q(1, 2)).unwrap());
        let k = kappa_beta_seq(&seq(1, 2, q(1, 2), "U")).unwrap();
        // 1/16 <= (1/4)/((1/2)*2)
        assert!(&k.kappa_beta()[2] * q(1, 1) <= q(1, 4));
        assert!(verify_condition_iii(&k, &l).passed);
        let ones = kappa_beta_seq(&seq(1, 2, q(1, 2), "HHHHHH")).unwrap();
        for n in 2..=ones.depth() {
            assert_eq!(&ones.kappa_beta()[n] / &ones.kappa_beta()[n - 1], q(1, 2));
        }
        assert!(verify_condition_iii(&ones, &l).passed);
    }

    #[test]
    fn literal_condition_iii_needs_doubled_constant_when_delta_small() {
        // delta*2^alpha = 1/2 < 1: the stepwise bound holds, the literal
        // statement with L fails, and holds again with 2L.
        let s = seq(1, 2, q(1, 4), "UUUUH");
        let k = kappa_beta_seq(&s).unwrap();
        let l = LConstant::for_params(s.params());
        assert!(verify_condition_iii(&k, &l).passed);
        let literal = condition_iii_literal(&k, &l);
        assert!(!literal.passed);
        assert_eq!(literal.first_violation(), Some(6));
        assert!(condition_iii_literal(&k, &l.scaled(&q(2, 1))).passed);
    }

    #[test]
    fn rejects_bad_input() {
        let p = make_params(1, 2, q(1, 2)).unwrap();
        let bad = DyadicSeq::from_values(p, vec![q(1, 1), q(1, 1), q(3, 4), q(1, 100)]).unwrap();
        assert!(matches!(kappa_beta_seq(&bad), Err(Error::SeqInvalid { index: 3, .. })));
    }

    #[test]
    fn report_is_tied_to_sequence() {
        let a = kappa_report(&seq(1, 2, q(1, 2), "UU")).unwrap();
        let b = kappa_report(&seq(1, 2, q(1, 2), "UH")).unwrap();
        assert!(a.passed() && b.passed());
        assert_ne!(a.seq_sha256, b.seq_sha256);
        assert_eq!(a.seq_sha256.len(), 64);
    }

    fn mask_strategy(max_len: usize) -> impl proptest::strategy::Strategy<Value = UpdateMask> {
        use proptest::prelude::*;
        proptest::collection::vec(any::<bool>(), 0..max_len).prop_map(|bits| {
            UpdateMask::new(bits.into_iter().map(|b| if b { Choice::Update } else { Choice::Hold }).collect())
        })
    }

    proptest::proptest! {
        #[test]
        fn conditions_hold_on_built_sequences(mask in mask_strategy(30), alpha in 1u32..3, gap in 1u32..3, dn in 1i64..8) {
            let s = DyadicSeq::from_mask(make_params(alpha, alpha + gap, q(dn, 8)).unwrap(), &mask);
            let k = kappa_beta_seq(&s).unwrap();
            let l = LConstant::for_params(s.params());
            proptest::prop_assert!(verify_condition_i(&k).passed);
            proptest::prop_assert!(verify_condition_ii(&k, &l).passed);
            proptest::prop_assert!(verify_condition_iii(&k, &l).passed);
            proptest::prop_assert!(verify_domination(&k).passed);
            for n in 0..=k.depth() {
                proptest::prop_assert_eq!(oracle_sum(&k, n), k.f_node(n));
            }
        }

        #[test]
        fn checks_are_monotone_in_depth(mask in mask_strategy(20), extra in mask_strategy(10)) {
            let p = make_params(1, 2, q(1, 2)).unwrap();
            let short = DyadicSeq::from_mask(p.clone(), &mask);
            let mut long = short.clone();
            for &c in extra.choices() { long.push(c); }
            let (ks, kl) = (kappa_beta_seq(&short).unwrap(), kappa_beta_seq(&long).unwrap());
            proptest::prop_assert_eq!(&kl.kappa_beta()[..ks.kappa_beta().len()], ks.kappa_beta());
            proptest::prop_assert!(tail_bound(&kl) <= tail_bound(&ks));
        }
    }
}
