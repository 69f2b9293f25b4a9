//! On-disk archive: a tree or a single sequence, every certificate computed
//! for it, and provenance. Loading recomputes everything and rejects the file
//! unless the recomputation passes and matches what is stored.

use serde::{Deserialize, Serialize};

use crate::canon::to_canonical_string;
use crate::certify::{certify_a1, certify_r2, A1Certificate, R2Certificate};
use crate::dyadic::{verify_un_lemma, DyadicSeq};
use crate::error::{Error, Result};
use crate::kappa::{kappa_beta_seq, kappa_report, KappaReport};
use crate::params::Params;
use crate::phi::{build_phi, check_phi_hypothesis, eval_f, eval_phi, PhiFunction};
use crate::rational::Rational;
use crate::report::CertReport;
use crate::tree::{member_phi, validate_tree, BitString, FamilyTree};

pub const ARCHIVE_VERSION: &str = "ef-family/1";
pub const DEFAULT_GRID_DEPTH: usize = 10;
pub const DEFAULT_N_MAX: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "lowercase")]
pub enum Payload {
    Tree(FamilyTree),
    Seq(DyadicSeq),
}

impl Payload {
    pub fn params(&self) -> &Params {
        match self {
            Payload::Tree(t) => t.params(),
            Payload::Seq(s) => s.params(),
        }
    }

    /// Members that carry certificates: the deepest level of a tree, or the
    /// sequence itself under the label `"seq"`.
    pub fn members(&self) -> Result<Vec<(String, PhiFunction)>> {
        match self {
            Payload::Tree(t) => t.levels()[t.max_level()]
                .strings
                .iter()
                .map(|r| Ok((r.bits.to_string(), member_phi(t, &r.bits)?)))
                .collect(),
            Payload::Seq(s) => Ok(vec![("seq".into(), build_phi(s.clone())?)]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberCertificates {
    pub member: String,
    pub depth: usize,
    pub reports: Vec<CertReport>,
    #[serde(rename = "R2")]
    pub r2: Option<R2Certificate>,
    #[serde(rename = "A1")]
    pub a1: Option<A1Certificate>,
    pub kappa: KappaReport,
}

impl MemberCertificates {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed) && self.kappa.passed()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificates {
    /// Whole-payload checks; for a tree these are the validator's reports.
    pub payload: Vec<CertReport>,
    pub members: Vec<MemberCertificates>,
}

impl Certificates {
    pub fn passed(&self) -> bool {
        self.payload.iter().all(|r| r.passed) && self.members.iter().all(|m| m.passed())
    }

    /// Every report, members prefixed by their label.
    pub fn all_reports(&self) -> Vec<(String, &CertReport)> {
        let mut out: Vec<(String, &CertReport)> = self.payload.iter().map(|r| (String::new(), r)).collect();
        for m in &self.members {
            out.extend(m.reports.iter().map(|r| (m.member.clone(), r)));
            out.extend(m.kappa.reports.iter().map(|r| (m.member.clone(), r)));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub command: String,
    pub timestamp: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Archive {
    pub version: String,
    pub params: Params,
    pub payload: Payload,
    pub certificates: Certificates,
    pub provenance: Provenance,
}

fn grid_report<T>(check: &str, result: Result<T>) -> (CertReport, Option<T>) {
    match result {
        Ok(cert) => (CertReport::pass(check, 1), Some(cert)),
        Err(Error::GridViolation { x, y, n }) => {
            let at = n.map(|n| format!(", n = {n}")).unwrap_or_default();
            (CertReport::fail(check, 1, 0, format!("violated at x = {x}, y = {y}{at}")), None)
        }
        Err(e) => (CertReport::fail(check, 1, 0, e.to_string()), None),
    }
}

fn member_certificates(member: String, phi: &PhiFunction) -> Result<MemberCertificates> {
    let depth = phi.depth();
    let (r2_report, r2) = grid_report("r2_grid", certify_r2(phi, DEFAULT_GRID_DEPTH));
    let (a1_report, a1) = grid_report("a1_grid", certify_a1(phi, DEFAULT_GRID_DEPTH, DEFAULT_N_MAX.min(depth)));
    Ok(MemberCertificates {
        member,
        depth,
        reports: vec![verify_un_lemma(phi.seq()), check_phi_hypothesis(phi), r2_report, a1_report],
        r2,
        a1,
        kappa: kappa_report(phi.seq())?,
    })
}

pub fn compute_certificates(payload: &Payload) -> Result<Certificates> {
    let payload_reports = match payload {
        Payload::Tree(t) => validate_tree(t),
        Payload::Seq(s) => vec![verify_un_lemma(s)],
    };
    if let Some(bad) = payload_reports.iter().find(|r| !r.passed) {
        return Err(rejection(bad));
    }
    let members = payload
        .members()?
        .into_iter()
        .map(|(label, phi)| member_certificates(label, &phi))
        .collect::<Result<Vec<_>>>()?;
    Ok(Certificates { payload: payload_reports, members })
}

fn rejection(bad: &CertReport) -> Error {
    match &bad.violation {
        Some(v) => Error::ArchiveRejected(format!("{} failed at index {}: {}", bad.check, v.index, v.detail)),
        None => Error::ArchiveRejected(format!("{} failed", bad.check)),
    }
}

impl Archive {
    pub fn new(payload: Payload, provenance: Provenance) -> Result<Archive> {
        let certificates = compute_certificates(&payload)?;
        Ok(Archive {
            version: ARCHIVE_VERSION.into(),
            params: payload.params().clone(),
            payload,
            certificates,
            provenance,
        })
    }

    /// Canonical JSON followed by a newline.
    pub fn to_canonical_json(&self) -> Result<String> {
        Ok(to_canonical_string(self)? + "\n")
    }

    pub fn tree(&self) -> Result<&FamilyTree> {
        match &self.payload {
            Payload::Tree(t) => Ok(t),
            Payload::Seq(_) => Err(Error::InvalidParams("archive holds a sequence, not a tree".into())),
        }
    }
}

/// Parses and fully re-verifies an archive. Any failing check, or any
/// stored certificate that differs from its recomputation, rejects it.
pub fn load_archive(text: &str) -> Result<Archive> {
    let archive: Archive =
        serde_json::from_str(text).map_err(|e| Error::ArchiveRejected(format!("malformed archive: {e}")))?;
    if archive.version != ARCHIVE_VERSION {
        return Err(Error::ArchiveRejected(format!("unsupported version {:?}", archive.version)));
    }
    if &archive.params != archive.payload.params() {
        return Err(Error::ArchiveRejected("params differ from the payload's params".into()));
    }
    let fresh = compute_certificates(&archive.payload)?;
    for (label, r) in fresh.all_reports() {
        if !r.passed {
            let err = rejection(r);
            return Err(if label.is_empty() {
                err
            } else {
                Error::ArchiveRejected(format!("member {label:?}: {err}"))
            });
        }
    }
    if fresh != archive.certificates {
        let which = fresh
            .members
            .iter()
            .zip(&archive.certificates.members)
            .find(|(a, b)| a != b)
            .map(|(a, _)| format!("member {:?}", a.member))
            .unwrap_or_else(|| "payload".into());
        return Err(Error::ArchiveRejected(format!("stored certificates for {which} differ from recomputation")));
    }
    Ok(archive)
}

/// One plot-ready row: `x = 1/2^n` and the member's values there.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExportRow {
    pub member: String,
    pub n: usize,
    pub x: Rational,
    pub u: Rational,
    pub u_decimal: String,
    pub phi: Rational,
    pub phi_decimal: String,
    pub f: Rational,
    pub f_decimal: String,
    pub kappa_beta: Rational,
    pub kappa_beta_decimal: String,
}

pub const EXPORT_DIGITS: usize = 20;

pub fn export_rows(payload: &Payload) -> Result<Vec<ExportRow>> {
    let mut rows = Vec::new();
    for (member, phi) in payload.members()? {
        let kappa = kappa_beta_seq(phi.seq())?;
        for n in 0..=phi.depth() {
            let x = Rational::pow2(-(n as i64));
            let u = phi.node(n).expect("n <= depth").clone();
            let phi_x = eval_phi(&phi, &x)?;
            let f = eval_f(&phi, &x)?;
            let kb = kappa.kappa_beta()[n].clone();
            rows.push(ExportRow {
                member: member.clone(),
                n,
                u_decimal: u.to_decimal(EXPORT_DIGITS),
                phi_decimal: phi_x.to_decimal(EXPORT_DIGITS),
                f_decimal: f.to_decimal(EXPORT_DIGITS),
                kappa_beta_decimal: kb.to_decimal(EXPORT_DIGITS),
                x,
                u,
                phi: phi_x,
                f,
                kappa_beta: kb,
            });
        }
    }
    Ok(rows)
}

/// Parses a member label of a tree archive.
pub fn parse_member(s: &str) -> Result<BitString> {
    s.parse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::UpdateMask;
    use crate::params::make_params;
    use crate::rational::q;
    use crate::tree::{build_tree, DEFAULT_SEARCH_CAP};

    fn prov() -> Provenance {
        Provenance { command: "test".into(), timestamp: "1970-01-01T00:00:00Z".into() }
    }

    fn level_one() -> Archive {
        let t = build_tree(make_params(1, 2, q(1, 2)).unwrap(), 1, DEFAULT_SEARCH_CAP).unwrap();
        Archive::new(Payload::Tree(t), prov()).unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let a = level_one();
        assert!(a.certificates.passed());
        let text = a.to_canonical_json().unwrap();
        let back = load_archive(&text).unwrap();
        assert_eq!(back.to_canonical_json().unwrap(), text);
        assert_eq!(level_one().to_canonical_json().unwrap(), text);
    }

    #[test]
    fn seq_archive() {
        let p = make_params(1, 2, q(1, 2)).unwrap();
        let s = DyadicSeq::from_mask(p, &"UUHUHHUUUU".parse::<UpdateMask>().unwrap());
        let a = Archive::new(Payload::Seq(s), prov()).unwrap();
        assert!(a.certificates.passed());
        assert_eq!(a.certificates.members[0].member, "seq");
        load_archive(&a.to_canonical_json().unwrap()).unwrap();
    }

    #[test]
    fn tampering_is_rejected() {
        let text = level_one().to_canonical_json().unwrap();
        let tampered = text.replacen("\"27/64\"", "\"27/65\"", 1);
        assert_ne!(tampered, text);
        assert!(matches!(load_archive(&tampered), Err(Error::ArchiveRejected(_))));
        let stale = text.replacen("\"checked\":", "\"checked\":1", 1);
        assert!(matches!(load_archive(&stale), Err(Error::ArchiveRejected(_))));
        let wrong_version = text.replacen(ARCHIVE_VERSION, "ef-family/0", 1);
        assert!(load_archive(&wrong_version).is_err());
    }

    #[test]
    fn export_rows_cover_every_node() {
        let a = level_one();
        let rows = export_rows(&a.payload).unwrap();
        let k1 = a.tree().unwrap().levels()[1].k;
        assert_eq!(rows.len(), 2 * k1);
        let r = rows.iter().find(|r| r.member == "0" && r.n == 4).unwrap();
        assert_eq!((&r.u, &r.phi, &r.f), (&q(27, 64), &q(27, 64), &q(27, 1024)));
        assert_eq!(r.u_decimal, "4.2187500000000000000e-1");
    }
}
