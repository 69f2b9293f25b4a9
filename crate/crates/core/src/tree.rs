//! The binary-tree construction of finite sequences `w_s`, witness indices
//! `n_s`, and level lengths `k_l`.
//!
//! At level `l` the strings of `{0,1}^l` are visited in lexicographic order
//! `s_1, …, s_M`. While `s_j` is active it alone takes UPDATE steps, every
//! other string holds, and the phase ends at the first index `n_(s_j)` where
//! `w_(s_j)` has dropped below `2^-l` times every sibling. Then
//! `k_l = n_(s_M) + 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dyadic::{update_value, verify_un_lemma, Choice, DyadicSeq};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::phi::{build_phi, eval_phi, PhiFunction};
use crate::rational::Rational;
use crate::report::CertReport;

/// Default per-witness step budget.
pub const DEFAULT_SEARCH_CAP: usize = 1 << 20;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        BitString(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// `s|l`.
    pub fn prefix(&self, l: usize) -> BitString {
        BitString(self.0[..l.min(self.0.len())].to_vec())
    }

    pub fn child(&self, bit: bool) -> BitString {
        let mut bits = self.0.clone();
        bits.push(bit);
        BitString(bits)
    }

    /// All of `{0,1}^l`, lexicographic with `0 < 1`.
    pub fn enumerate(l: usize) -> Vec<BitString> {
        (0..1usize << l).map(|code| BitString((0..l).map(|k| code >> (l - 1 - k) & 1 == 1).collect())).collect()
    }

    /// Position of the first differing bit, if any, over the common length.
    pub fn first_difference(&self, other: &BitString) -> Option<usize> {
        self.0.iter().zip(&other.0).position(|(a, b)| a != b)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|&b| write!(f, "{}", if b { '1' } else { '0' }))
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("bit {other:?} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StringRecord {
    pub bits: BitString,
    /// `n_s`.
    pub n: usize,
    /// `w_s(0), …, w_s(k_l - 1)`.
    pub values: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelRecord {
    pub l: usize,
    /// `k_l`.
    pub k: usize,
    /// One record per string of length `l`, lexicographic.
    pub strings: Vec<StringRecord>,
}

impl LevelRecord {
    pub fn get(&self, s: &BitString) -> Option<&StringRecord> {
        self.strings.iter().find(|r| &r.bits == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTree", into = "RawTree")]
pub struct FamilyTree {
    params: Params,
    delta_prime: Rational,
    search_cap: usize,
    levels: Vec<LevelRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTree {
    params: Params,
    #[serde(rename = "deltaPrime")]
    delta_prime: Rational,
    #[serde(rename = "searchCap")]
    search_cap: usize,
    /// Always `"lexicographic"`.
    enumeration: String,
    /// Always `"minimal"`.
    #[serde(rename = "witnessRule")]
    witness_rule: String,
    levels: Vec<LevelRecord>,
}

const ENUMERATION: &str = "lexicographic";
const WITNESS_RULE: &str = "minimal";

impl TryFrom<RawTree> for FamilyTree {
    type Error = Error;

    fn try_from(raw: RawTree) -> Result<Self> {
        if raw.enumeration != ENUMERATION || raw.witness_rule != WITNESS_RULE {
            return Err(Error::ArchiveRejected("unknown enumeration or witness rule".into()));
        }
        let tree = FamilyTree {
            params: raw.params,
            delta_prime: raw.delta_prime,
            search_cap: raw.search_cap,
            levels: raw.levels,
        };
        let structural = validate_requirements(&tree);
        if let Some(bad) = structural.iter().find(|r| !r.passed) {
            let v = bad.violation.as_ref().expect("failed report carries a violation");
            return Err(Error::ArchiveRejected(format!("{} failed at {}: {}", bad.check, v.index, v.detail)));
        }
        Ok(tree)
    }
}

impl From<FamilyTree> for RawTree {
    fn from(t: FamilyTree) -> Self {
        RawTree {
            params: t.params,
            delta_prime: t.delta_prime,
            search_cap: t.search_cap,
            enumeration: ENUMERATION.into(),
            witness_rule: WITNESS_RULE.into(),
            levels: t.levels,
        }
    }
}

impl FamilyTree {
    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn delta_prime(&self) -> &Rational {
        &self.delta_prime
    }

    pub fn levels(&self) -> &[LevelRecord] {
        &self.levels
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn search_cap(&self) -> usize {
        self.search_cap
    }

    pub fn level(&self, l: usize) -> Result<&LevelRecord> {
        self.levels.get(l).ok_or(Error::LevelUnavailable { requested: l, built: self.max_level() })
    }

    pub fn record(&self, s: &BitString) -> Result<&StringRecord> {
        self.level(s.len())?
            .get(s)
            .ok_or_else(|| Error::ArchiveRejected(format!("string {s:?} missing from its level")))
    }
}

/// `a < 2^-l * b`, cross-multiplied.
fn ratio_below(a: &Rational, b: &Rational, l: usize) -> bool {
    (a.numer() << l) * b.denom() < b.numer() * a.denom()
}

pub fn build_tree(params: Params, max_level: usize, search_cap: usize) -> Result<FamilyTree> {
    let delta_prime = params.delta_prime();
    if delta_prime >= Rational::one() {
        return Err(Error::InvalidParams(format!("delta' = {delta_prime} is not below 1")));
    }
    if search_cap == 0 {
        return Err(Error::InvalidParams("search cap must be positive".into()));
    }
    let root = DyadicSeq::initial(params.clone());
    let mut levels = vec![LevelRecord {
        l: 0,
        k: 2,
        strings: vec![StringRecord { bits: BitString::default(), n: 1, values: root.values().to_vec() }],
    }];
    let mut working = vec![root];
    for l in 1..=max_level {
        let strings = BitString::enumerate(l);
        // children inherit their parent's sequence; `enumerate` keeps siblings adjacent
        let mut seqs: Vec<DyadicSeq> = working.iter().flat_map(|s| [s.clone(), s.clone()]).collect();
        let k_prev = levels[l - 1].k;
        let mut stop = k_prev - 1;
        let mut witnesses = Vec::with_capacity(strings.len());
        for j in 0..strings.len() {
            let mut steps = 0usize;
            loop {
                steps += 1;
                if steps > search_cap {
                    return Err(Error::SearchCapExceeded { level: l, string: j + 1, cap: search_cap });
                }
                for (idx, seq) in seqs.iter_mut().enumerate() {
                    seq.push(if idx == j { Choice::Update } else { Choice::Hold });
                }
                let active = seqs[j].last();
                let separated = seqs
                    .iter()
                    .enumerate()
                    .filter(|&(idx, _)| idx != j)
                    .all(|(_, other)| ratio_below(active, other.last(), l));
                if separated {
                    break;
                }
            }
            stop = seqs[j].depth();
            witnesses.push(stop);
        }
        let k = stop + 1;
        levels.push(LevelRecord {
            l,
            k,
            strings: strings
                .into_iter()
                .zip(&seqs)
                .zip(witnesses)
                .map(|((bits, seq), n)| StringRecord { bits, n, values: seq.values().to_vec() })
                .collect(),
        });
        working = seqs;
    }
    Ok(FamilyTree { params, delta_prime, search_cap, levels })
}

/// Requirements (a), (b), (c) and the root and level-length layout, read
/// straight from the stored values.
pub fn validate_requirements(tree: &FamilyTree) -> Vec<CertReport> {
    let levels = &tree.levels;
    let mut layout = CertReport::pass("tree_layout", levels.len());
    let mut req_a = CertReport::pass("requirement_a", 0);
    let mut req_b = CertReport::pass("requirement_b", 0);
    let mut req_c = CertReport::pass("requirement_c", 0);

    let one = Rational::one();
    if tree.delta_prime != tree.params.delta_prime() || tree.delta_prime >= one {
        layout = CertReport::fail("tree_layout", 0, 0, format!("deltaPrime {} is inconsistent", tree.delta_prime));
    } else if levels.is_empty() {
        layout = CertReport::fail("tree_layout", 0, 0, "no levels");
    } else {
        let root = &levels[0];
        let root_ok = root.l == 0
            && root.k == 2
            && root.strings.len() == 1
            && root.strings[0].bits.is_empty()
            && root.strings[0].n == 1
            && root.strings[0].values == [one.clone(), one.clone()];
        if !root_ok {
            layout = CertReport::fail("tree_layout", 1, 0, "root must be k_0=2, w=(1,1), n=1");
        }
        for (l, level) in levels.iter().enumerate().skip(1) {
            if !layout.passed {
                break;
            }
            let expected = BitString::enumerate(l);
            let bits: Vec<&BitString> = level.strings.iter().map(|r| &r.bits).collect();
            if level.l != l || bits != expected.iter().collect::<Vec<_>>() {
                layout = CertReport::fail("tree_layout", l + 1, l, "strings of the level are not {0,1}^l in order");
            } else if level.k <= levels[l - 1].k {
                layout = CertReport::fail("tree_layout", l + 1, l, format!("k_{l} = {} does not increase", level.k));
            }
        }
    }
    if !layout.passed {
        return vec![layout];
    }

    'outer: for (l, level) in levels.iter().enumerate() {
        for rec in &level.strings {
            req_a.checked += 1;
            if rec.values.len() != level.k {
                req_a = CertReport::fail(
                    "requirement_a",
                    req_a.checked,
                    l,
                    format!("w_{{{}}} has length {} but k_{l} = {}", rec.bits, rec.values.len(), level.k),
                );
                break 'outer;
            }
        }
    }
    if req_a.passed {
        'outer: for l in 1..levels.len() {
            let k_prev = levels[l - 1].k;
            for rec in &levels[l].strings {
                req_b.checked += 1;
                let parent = levels[l - 1].get(&rec.bits.prefix(l - 1)).expect("layout checked");
                if rec.values[..k_prev] != parent.values[..] {
                    req_b = CertReport::fail(
                        "requirement_b",
                        req_b.checked,
                        l,
                        format!("w_{{{}}} does not extend w_{{{}}}", rec.bits, parent.bits),
                    );
                    break 'outer;
                }
            }
        }
        'outer: for (l, level) in levels.iter().enumerate() {
            let k_prev = if l == 0 { 0 } else { levels[l - 1].k };
            for s in &level.strings {
                req_c.checked += 1;
                if s.n < k_prev || s.n >= level.k {
                    req_c = CertReport::fail(
                        "requirement_c",
                        req_c.checked,
                        l,
                        format!("n_{{{}}} = {} outside [k_(l-1), k_l) = [{k_prev}, {})", s.bits, s.n, level.k),
                    );
                    break 'outer;
                }
                for t in level.strings.iter().filter(|t| t.bits != s.bits) {
                    if !ratio_below(&s.values[s.n], &t.values[s.n], l) {
                        req_c = CertReport::fail(
                            "requirement_c",
                            req_c.checked,
                            l,
                            format!(
                                "w_{{{}}}(n)/w_{{{}}}(n) = {} is not below 2^-{l} at n = {}",
                                s.bits,
                                t.bits,
                                &s.values[s.n] / &t.values[s.n],
                                s.n
                            ),
                        );
                        break 'outer;
                    }
                }
            }
        }
    }
    vec![layout, req_a, req_b, req_c]
}

/// Everything [`validate_requirements`] checks, plus: every `w_s` follows
/// the HOLD/UPDATE recursion and passes the sequence lemma, each phase
/// updates exactly its own string, and each `n_s` is the first index that
/// works.
pub fn validate_tree(tree: &FamilyTree) -> Vec<CertReport> {
    let mut reports = validate_requirements(tree);
    if reports.iter().any(|r| !r.passed) {
        return reports;
    }
    let leaves = &tree.levels[tree.max_level()].strings;
    let mut recursion = CertReport::pass("tree_recursion", 0);
    let mut lemma = CertReport::pass("tree_un_lemma", 0);
    for (idx, rec) in leaves.iter().enumerate() {
        let values = &rec.values;
        for n in 2..values.len() {
            recursion.checked += 1;
            if values[n] != values[n - 1] && values[n] != update_value(&tree.params, &values[..n]) {
                recursion = CertReport::fail(
                    "tree_recursion",
                    recursion.checked,
                    n,
                    format!("w_{{{}}}({n}) = {} is neither HOLD nor UPDATE", rec.bits, values[n]),
                );
                break;
            }
        }
        if !recursion.passed {
            break;
        }
        let seq = DyadicSeq::from_values(tree.params.clone(), values.clone()).expect("length >= 2");
        let r = verify_un_lemma(&seq);
        lemma.checked += 1;
        if let Some(v) = r.violation {
            lemma = CertReport::fail("tree_un_lemma", idx + 1, v.index, format!("w_{{{}}}: {}", rec.bits, v.detail));
            break;
        }
    }
    reports.push(recursion);
    reports.push(lemma);
    reports.push(validate_schedule(tree));
    reports
}

/// Phase structure and minimality of every witness index.
fn validate_schedule(tree: &FamilyTree) -> CertReport {
    const CHECK: &str = "tree_schedule";
    let mut checked = 0;
    for l in 1..tree.levels.len() {
        let level = &tree.levels[l];
        let mut start = tree.levels[l - 1].k;
        for (j, active) in level.strings.iter().enumerate() {
            for n in start..=active.n {
                checked += 1;
                for (idx, rec) in level.strings.iter().enumerate() {
                    let moved = rec.values[n] != rec.values[n - 1];
                    if idx != j && moved {
                        return CertReport::fail(
                            CHECK,
                            checked,
                            n,
                            format!("w_{{{}}} changed at n={n} during the phase of {}", rec.bits, active.bits),
                        );
                    }
                    if idx == j && !moved {
                        return CertReport::fail(
                            CHECK,
                            checked,
                            n,
                            format!("active string {} held at n={n}", rec.bits),
                        );
                    }
                }
                let separated = level
                    .strings
                    .iter()
                    .filter(|t| t.bits != active.bits)
                    .all(|t| ratio_below(&active.values[n], &t.values[n], l));
                if separated != (n == active.n) {
                    return CertReport::fail(
                        CHECK,
                        checked,
                        n,
                        format!("n_{{{}}} = {} is not the first separating index (n={n})", active.bits, active.n),
                    );
                }
            }
            start = active.n + 1;
        }
        if start != level.k {
            return CertReport::fail(
                CHECK,
                checked,
                l,
                format!("k_{l} = {} but the last phase ends at {}", level.k, start - 1),
            );
        }
    }
    CertReport::pass(CHECK, checked)
}

/// `phi_xi` assembled band by band: `phi_xi(1/2^n) = w_(xi|l)(n)` for
/// `k_(l-1) <= n < k_l`, depth `k_(lh xi) - 1`.
pub fn member_phi(tree: &FamilyTree, xi: &BitString) -> Result<PhiFunction> {
    if xi.len() > tree.max_level() {
        return Err(Error::LevelUnavailable { requested: xi.len(), built: tree.max_level() });
    }
    let mut values = Vec::new();
    for l in 0..=xi.len() {
        let level = tree.level(l)?;
        let rec = level.get(&xi.prefix(l)).ok_or(Error::LevelUnavailable { requested: l, built: tree.max_level() })?;
        let lo = values.len();
        values.extend_from_slice(&rec.values[lo..level.k]);
    }
    let seq = DyadicSeq::from_values(tree.params.clone(), values)?;
    build_phi(seq)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessEntry {
    pub level: usize,
    /// `zeta|l`.
    pub s: BitString,
    /// `xi|l`.
    pub t: BitString,
    /// `n_s` and `w_s(n_s)/w_t(n_s)`: certifies `E_(f_zeta)` does not reduce to `E_(f_xi)`.
    pub n_s: usize,
    pub ratio_s: Rational,
    /// `n_t` and `w_t(n_t)/w_s(n_t)`: the symmetric direction.
    pub n_t: usize,
    pub ratio_t: Rational,
    pub bound: Rational,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessReport {
    pub xi: BitString,
    pub zeta: BitString,
    pub entries: Vec<WitnessEntry>,
    pub certified: bool,
}

/// Witness ratios for every level past the first difference of `xi` and
/// `zeta`, computed from the level records and cross-checked against the
/// member functions `phi_xi`, `phi_zeta`.
pub fn witness(tree: &FamilyTree, xi: &BitString, zeta: &BitString) -> Result<WitnessReport> {
    let len = xi.len().max(zeta.len());
    if len > tree.max_level() {
        return Err(Error::LevelUnavailable { requested: len, built: tree.max_level() });
    }
    if xi.len() != zeta.len() {
        return Err(Error::InvalidParams(format!("xi has length {} but zeta has length {}", xi.len(), zeta.len())));
    }
    let m = xi.first_difference(zeta).ok_or(Error::NotDistinct)?;
    let phi_xi = member_phi(tree, xi)?;
    let phi_zeta = member_phi(tree, zeta)?;
    let node = |phi: &PhiFunction, n: usize| eval_phi(phi, &Rational::pow2(-(n as i64)));
    let mut entries = Vec::new();
    for l in m + 1..=len {
        let (s, t) = (zeta.prefix(l), xi.prefix(l));
        let (rs, rt) = (tree.record(&s)?, tree.record(&t)?);
        let ratio_s = &rs.values[rs.n] / &rt.values[rs.n];
        let ratio_t = &rt.values[rt.n] / &rs.values[rt.n];
        let via_members_s = node(&phi_zeta, rs.n)? / node(&phi_xi, rs.n)?;
        let via_members_t = node(&phi_xi, rt.n)? / node(&phi_zeta, rt.n)?;
        let bound = Rational::pow2(-(l as i64));
        let certified = ratio_below(&rs.values[rs.n], &rt.values[rs.n], l)
            && ratio_below(&rt.values[rt.n], &rs.values[rt.n], l)
            && via_members_s == ratio_s
            && via_members_t == ratio_t;
        entries.push(WitnessEntry { level: l, s, t, n_s: rs.n, ratio_s, n_t: rt.n, ratio_t, bound, certified });
    }
    let certified = entries.iter().all(|e| e.certified);
    Ok(WitnessReport { xi: xi.clone(), zeta: zeta.clone(), entries, certified })
}
