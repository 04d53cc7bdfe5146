//! Command-line front end for approximate dependence over multi-teams.
//!
//! Five workflows: `check` an atom against CSV data, `entail` and `prove`
//! an atom from a hypothesis file, build a `countermodel` when it does not
//! follow, and `mine` approximate dependencies from data. Exit codes are a
//! stable scripting contract: 0 for a positive answer, 1 for a negative
//! one, 2 for unusable input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use teamdep::{
    check_derivation, countermodel_report, derives, find_countermodel, min_derivable_weight,
    mine, mining_results_to_csv, mining_results_to_json, multiteam_to_json, read_multiteam_csv,
    semantic_entails_bruteforce, write_multiteam_csv, Atom, ErrorRate, MultiTeam, Rule, SigmaSet,
    Step,
};

#[derive(Parser)]
#[command(name = "teamdep", version, about = "Approximate dependence over teams: check, entail, prove, countermodel, mine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check one atom against a CSV team and report the minimal error.
    Check {
        /// CSV file; the first record names the variables.
        team: PathBuf,
        /// Atom such as "dep[1/4](x ; y)".
        atom: String,
        /// Collapse duplicate rows first (set instead of bag semantics).
        #[arg(long)]
        set_semantics: bool,
        /// Machine-readable output.
        #[arg(long)]
        json: bool,
    },
    /// Decide whether an atom is derivable from a hypothesis file.
    Entail {
        /// Hypothesis file: one atom per line, `#` comments.
        sigma: PathBuf,
        atom: String,
        #[arg(long)]
        json: bool,
        /// Also run the bounded semantic oracle up to this many rows.
        #[arg(long, requires = "domain_size")]
        max_rows: Option<usize>,
        /// Value count for the bounded semantic oracle.
        #[arg(long, requires = "max_rows")]
        domain_size: Option<usize>,
    },
    /// Derive an atom and emit a checkable proof.
    Prove {
        sigma: PathBuf,
        atom: String,
        #[arg(long)]
        json: bool,
        /// Write the proof JSON here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build a verified team that satisfies the hypotheses and falsifies
    /// the atom.
    Countermodel {
        sigma: PathBuf,
        atom: String,
        #[arg(long)]
        json: bool,
        /// Write the team CSV here (the report goes to `<stem>.report.json`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Mine approximate dependencies from a CSV team.
    Mine {
        team: PathBuf,
        /// Largest left-hand side to try.
        #[arg(long, default_value_t = 2)]
        max_lhs: usize,
        /// Report pairs with minimal error at most this rate (e.g. 1/6, 0.25).
        #[arg(long, default_value = "1")]
        threshold: String,
        #[arg(long)]
        set_semantics: bool,
        #[arg(long)]
        json: bool,
        /// Also write the results as CSV to this path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Check { team, atom, set_semantics, json } => {
            cmd_check(&team, &atom, set_semantics, json)
        }
        Command::Entail { sigma, atom, json, max_rows, domain_size } => {
            cmd_entail(&sigma, &atom, json, max_rows.zip(domain_size))
        }
        Command::Prove { sigma, atom, json, output } => {
            cmd_prove(&sigma, &atom, json, output.as_deref())
        }
        Command::Countermodel { sigma, atom, json, output } => {
            cmd_countermodel(&sigma, &atom, json, output.as_deref())
        }
        Command::Mine { team, max_lhs, threshold, set_semantics, json, output } => {
            cmd_mine(&team, max_lhs, &threshold, set_semantics, json, output.as_deref())
        }
    }
}

fn load_team(path: &Path, set_semantics: bool) -> Result<MultiTeam> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let team =
        read_multiteam_csv(file).with_context(|| format!("reading {}", path.display()))?;
    if set_semantics {
        let (collapsed, dropped) = team.dedup_rows();
        eprintln!("set semantics: {dropped} duplicate row(s) collapsed");
        Ok(collapsed)
    } else {
        Ok(team)
    }
}

fn load_sigma(path: &Path) -> Result<SigmaSet> {
    let text =
        fs::read_to_string(path).with_context(|| format!("opening {}", path.display()))?;
    SigmaSet::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_atom(text: &str) -> Result<Atom> {
    Atom::parse(text).with_context(|| format!("parsing atom {text:?}"))
}

fn cmd_check(team_path: &Path, atom_text: &str, set_semantics: bool, json: bool) -> Result<u8> {
    let team = load_team(team_path, set_semantics)?;
    let atom = parse_atom(atom_text)?;
    let (deletions, witness) = team.min_deletions(&atom.lhs, &atom.rhs)?;
    let error = ErrorRate::fraction_of(deletions, team.len());
    let satisfied = atom.p.at_least_fraction(deletions, team.len());
    // Witness rows are 1-based data-row numbers; the header is not a row.
    let witness_rows: Vec<usize> = witness.removed.iter().map(|id| id.0 + 1).collect();
    if json {
        let mut value = serde_json::json!({
            "atom": atom.to_string(),
            "rows": team.len(),
            "deletions": deletions,
            "minimalError": error.as_fraction(),
            "satisfied": satisfied,
        });
        if satisfied {
            value["witnessRows"] = serde_json::json!(witness_rows);
        }
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        println!("atom: {atom}");
        println!("rows: {}", team.len());
        println!("minimal error: {} ({} of {} rows deleted)", error.as_fraction(), deletions, team.len());
        println!("satisfied: {}", if satisfied { "yes" } else { "no" });
        if satisfied {
            let rows: Vec<String> = witness_rows.iter().map(|r| r.to_string()).collect();
            println!("witness rows: {}", if rows.is_empty() { "none needed".into() } else { rows.join(", ") });
        }
    }
    Ok(if satisfied { 0 } else { 1 })
}

fn cmd_entail(
    sigma_path: &Path,
    atom_text: &str,
    json: bool,
    oracle: Option<(usize, usize)>,
) -> Result<u8> {
    let sigma = load_sigma(sigma_path)?;
    let atom = parse_atom(atom_text)?;
    let weight = min_derivable_weight(&sigma, &atom.lhs.to_set(), &atom.rhs.to_set());
    let derivable = weight <= atom.p;
    let semantic = match oracle {
        Some((max_rows, domain_size)) => Some((
            max_rows,
            domain_size,
            semantic_entails_bruteforce(&sigma, &atom, max_rows, domain_size)?,
        )),
        None => None,
    };
    if json {
        let mut value = serde_json::json!({
            "atom": atom.to_string(),
            "derivable": derivable,
            "minimalWeight": weight.as_fraction(),
        });
        if let Some((max_rows, domain_size, entailed)) = semantic {
            value["semanticCheck"] = serde_json::json!({
                "maxRows": max_rows,
                "domainSize": domain_size,
                "entailed": entailed,
            });
        }
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        println!("atom: {atom}");
        println!("derivable: {}", if derivable { "yes" } else { "no" });
        println!("minimal weight: {}", weight.as_fraction());
        if let Some((max_rows, domain_size, entailed)) = semantic {
            println!(
                "semantic oracle (max {max_rows} rows, {domain_size} values): {}",
                if entailed { "entailed" } else { "not entailed" }
            );
        }
    }
    Ok(if derivable { 0 } else { 1 })
}

fn describe_step(step: &Step) -> String {
    let rule = match &step.rule {
        Rule::A5 { side, split } => format!(
            "A5[{} split {split}]",
            match side {
                teamdep::Side::Lhs => "lhs",
                teamdep::Side::Rhs => "rhs",
            }
        ),
        other => format!("{:?}", other).to_uppercase(),
    };
    let premises = if step.premises.is_empty() {
        String::new()
    } else {
        format!(
            "({})",
            step.premises.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", ")
        )
    };
    format!("{:>4}. {}{}  {}", step.id, rule, premises, step.atom)
}

fn cmd_prove(sigma_path: &Path, atom_text: &str, json: bool, output: Option<&Path>) -> Result<u8> {
    let sigma = load_sigma(sigma_path)?;
    let atom = parse_atom(atom_text)?;
    let weight = min_derivable_weight(&sigma, &atom.lhs.to_set(), &atom.rhs.to_set());
    let Some(derivation) = derives(&sigma, &atom) else {
        println!("not derivable: minimal weight is {}, above {}", weight.as_fraction(), atom.p);
        return Ok(1);
    };
    if let Err(err) = check_derivation(&derivation, &sigma) {
        bail!("internal: constructed proof failed its own check: {err}");
    }
    let proof_json = derivation.to_json();
    if let Some(path) = output {
        fs::write(path, format!("{}\n", serde_json::to_string_pretty(&proof_json)?))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let conclusion = derivation.conclusion().expect("nonempty proof").clone();
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "atom": atom.to_string(),
                "derivable": true,
                "minimalWeight": weight.as_fraction(),
                "conclusion": conclusion.to_string(),
                "proof": proof_json,
            }))?
        );
    } else {
        println!("atom: {atom}");
        println!("derivable: yes (minimal weight {})", weight.as_fraction());
        for step in &derivation.steps {
            println!("{}", describe_step(step));
        }
        if conclusion != atom {
            println!("note: conclusion {conclusion} keeps borrowed variables on the left; the rules cannot re-derive consumed or repeated occurrences at this weight");
        }
        if output.is_none() {
            println!("proof: {}", serde_json::to_string(&proof_json)?);
        }
    }
    Ok(0)
}

fn cmd_countermodel(
    sigma_path: &Path,
    atom_text: &str,
    json: bool,
    output: Option<&Path>,
) -> Result<u8> {
    let sigma = load_sigma(sigma_path)?;
    let atom = parse_atom(atom_text)?;
    let found = match find_countermodel(&sigma, &atom) {
        Ok(found) => found,
        Err(teamdep::CompletenessError::NotFoundWithinBounds) => {
            eprintln!("no countermodel found within bounds");
            return Ok(1);
        }
        Err(err) => return Err(err.into()),
    };
    let Some(cm) = found else {
        println!("derivable; no countermodel exists");
        return Ok(1);
    };
    let report = countermodel_report(&sigma, &atom, &cm.team)?;
    let mut csv = Vec::new();
    write_multiteam_csv(&mut csv, &cm.team)?;
    let csv = String::from_utf8(csv).expect("csv output is utf8");
    if let Some(path) = output {
        fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
        let report_path = path.with_extension("report.json");
        fs::write(&report_path, format!("{}\n", serde_json::to_string_pretty(&report)?))
            .with_context(|| format!("writing {}", report_path.display()))?;
        println!(
            "countermodel: {} rows -> {} (report {})",
            cm.team.len(),
            path.display(),
            report_path.display()
        );
    } else if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "team": multiteam_to_json(&cm.team),
                "report": report,
            }))?
        );
    } else {
        print!("{csv}");
        println!();
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    Ok(0)
}

fn cmd_mine(
    team_path: &Path,
    max_lhs: usize,
    threshold_text: &str,
    set_semantics: bool,
    json: bool,
    output: Option<&Path>,
) -> Result<u8> {
    let team = load_team(team_path, set_semantics)?;
    let threshold = ErrorRate::parse(threshold_text)
        .with_context(|| format!("parsing threshold {threshold_text:?}"))?;
    let results = mine(&team, max_lhs, &threshold)?;
    if let Some(path) = output {
        fs::write(path, mining_results_to_csv(&results))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&mining_results_to_json(&results))?);
    } else {
        for r in &results {
            let lhs = if r.lhs.is_empty() {
                "∅".to_string()
            } else {
                r.lhs.iter().map(|v| v.name()).collect::<Vec<_>>().join(" ")
            };
            println!("{lhs} → {} {} {}", r.rhs.name(), r.deletions, r.error.as_fraction());
        }
    }
    Ok(0)
}
