use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use ef_core::archive::{export_rows, load_archive, Archive, Payload, Provenance};
use ef_core::canon::to_canonical_string;
use ef_core::dyadic::{Choice, DyadicSeq, UpdateMask};
use ef_core::reduction::{copies_bounded, f_sum, theta1, verify_theta1_bounds, RealVec};
use ef_core::tree::{build_tree, member_phi, witness, BitString, DEFAULT_SEARCH_CAP};
use ef_core::{make_params, Error, Rational};

/// Upper limit on entries `reduce` will materialize.
const REDUCE_COPY_CAP: u64 = 1_000_000;

#[derive(Parser)]
#[command(name = "ef-family", version, about = "Build and verify certified families of gauge functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the family tree and write a certified archive.
    Build {
        #[arg(long)]
        alpha: u32,
        #[arg(long)]
        beta: u32,
        #[arg(long)]
        delta: Rational,
        #[arg(long)]
        levels: usize,
        /// Step budget per witness search; defaults to $EF_SEARCH_CAP or 2^20.
        #[arg(long = "search-cap")]
        search_cap: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build one sequence from a HOLD/UPDATE mask, cycled to the requested depth.
    Seq {
        #[arg(long)]
        mask: UpdateMask,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 1)]
        alpha: u32,
        #[arg(long, default_value_t = 2)]
        beta: u32,
        #[arg(long, default_value = "1/2")]
        delta: Rational,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute every check of an archive from its raw values.
    Verify { file: PathBuf },
    /// Incomparability witnesses for two members of one level.
    Witness {
        file: PathBuf,
        #[arg(long)]
        xi: BitString,
        #[arg(long)]
        zeta: BitString,
    },
    /// Apply theta_1 for one member and check the block-sum sandwich.
    Reduce {
        file: PathBuf,
        /// Member of a tree archive; omit for a sequence archive.
        #[arg(long)]
        xi: Option<BitString>,
        #[arg(long, allow_hyphen_values = true)]
        x: RealVec,
        #[arg(long, allow_hyphen_values = true)]
        xhat: RealVec,
    },
    /// Write node tables (u, phi, f, kappa^beta) for plotting.
    Export {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn provenance() -> anyhow::Result<Provenance> {
    let command = std::env::args().skip(1).collect::<Vec<_>>().join(" ");
    let when = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(s) => {
            let secs: i64 = s.trim().parse().context("SOURCE_DATE_EPOCH is not an integer")?;
            chrono::DateTime::from_timestamp(secs, 0).context("SOURCE_DATE_EPOCH out of range")?
        }
        Err(_) => chrono::Utc::now(),
    };
    Ok(Provenance {
        command: format!("ef-family {command}"),
        timestamp: when.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    })
}

fn search_cap(flag: Option<usize>) -> anyhow::Result<usize> {
    if let Some(cap) = flag {
        return Ok(cap);
    }
    match std::env::var("EF_SEARCH_CAP") {
        Ok(s) => s.trim().parse().context("EF_SEARCH_CAP is not a positive integer"),
        Err(_) => Ok(DEFAULT_SEARCH_CAP),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_archive(path: &Path) -> anyhow::Result<Archive> {
    let text = fs::read_to_string(path).map_err(Error::from)?;
    Ok(load_archive(&text)?)
}

fn emit(value: &serde_json::Value) -> anyhow::Result<()> {
    println!("{}", to_canonical_string(value)?);
    Ok(())
}

fn write_archive(archive: &Archive, out: Option<&Path>) -> anyhow::Result<bool> {
    let text = archive.to_canonical_json()?;
    write_output(out, &text)?;
    let passed = archive.certificates.passed();
    if out.is_some() {
        emit(&json!({ "passed": passed, "members": archive.certificates.members.len() }))?;
    }
    Ok(passed)
}

fn cycled_mask(mask: &UpdateMask, depth: usize) -> anyhow::Result<UpdateMask> {
    let steps = depth.checked_sub(1).filter(|&s| s > 0).context("depth must be at least 2")?;
    if mask.is_empty() {
        anyhow::bail!(Error::Parse("mask is empty".into()));
    }
    if mask.len() > steps {
        anyhow::bail!(Error::Parse(format!("mask has {} choices but depth {depth} takes {steps}", mask.len())));
    }
    let choices: Vec<Choice> = mask.choices().iter().copied().cycle().take(steps).collect();
    Ok(UpdateMask::new(choices))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Build { alpha, beta, delta, levels, search_cap: cap, out } => {
            let params = make_params(alpha, beta, delta)?;
            let tree = build_tree(params, levels, search_cap(cap)?)?;
            let archive = Archive::new(Payload::Tree(tree), provenance()?)?;
            write_archive(&archive, out.as_deref())
        }
        Command::Seq { mask, depth, alpha, beta, delta, out } => {
            let params = make_params(alpha, beta, delta)?;
            let seq = DyadicSeq::from_mask(params, &cycled_mask(&mask, depth)?);
            let archive = Archive::new(Payload::Seq(seq), provenance()?)?;
            write_archive(&archive, out.as_deref())
        }
        Command::Verify { file } => {
            let archive = read_archive(&file)?;
            let reports = archive.certificates.all_reports();
            emit(&json!({
                "verified": true,
                "version": archive.version,
                "members": archive.certificates.members.len(),
                "checks": reports.len(),
            }))?;
            Ok(true)
        }
        Command::Witness { file, xi, zeta } => {
            let archive = read_archive(&file)?;
            let report = witness(archive.tree()?, &xi, &zeta)?;
            emit(&serde_json::to_value(&report)?)?;
            Ok(report.certified)
        }
        Command::Reduce { file, xi, x, xhat } => {
            let archive = read_archive(&file)?;
            let phi = match (&archive.payload, xi) {
                (Payload::Tree(t), Some(xi)) => member_phi(t, &xi)?,
                (Payload::Tree(_), None) => {
                    anyhow::bail!(Error::InvalidParams("--xi is required for a tree archive".into()))
                }
                (Payload::Seq(_), _) => archive.payload.members()?.remove(0).1,
            };
            for v in [&x, &xhat] {
                if !copies_bounded(v, &phi, REDUCE_COPY_CAP)? {
                    anyhow::bail!(Error::InvalidParams(format!(
                        "theta_1 would emit more than {REDUCE_COPY_CAP} entries"
                    )));
                }
            }
            let report = verify_theta1_bounds(&x, &xhat, &phi);
            let (y, yhat) = (theta1(&x, &phi)?, theta1(&xhat, &phi)?);
            let sum = f_sum(&y, &yhat, &phi)?;
            emit(&json!({ "y": y, "yhat": yhat, "fSum": sum, "report": report }))?;
            Ok(report.passed)
        }
        Command::Export { file, format, out } => {
            let archive = read_archive(&file)?;
            let rows = export_rows(&archive.payload)?;
            let text = match format {
                Format::Json => to_canonical_string(&rows)? + "\n",
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    for row in &rows {
                        w.serialize(row)?;
                    }
                    String::from_utf8(w.into_inner()?)?
                }
            };
            write_output(out.as_deref(), &text)?;
            Ok(true)
        }
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    e.downcast_ref::<Error>().map(Error::kind).unwrap_or("Other")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let body = json!({ "error": error_kind(&e), "message": format!("{e:#}") });
            eprintln!("{body}");
            ExitCode::from(2)
        }
    }
}
