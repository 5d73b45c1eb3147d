use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use drivesafe::cpsnet::{run_scenario, Manifest, Mode};
use drivesafe::domain::{AffectiveState, Catalog, ContentId};
use drivesafe::evalstats::{
    anova_oneway, binom_ci, describe, groups_from_responses, successes_from_binary, CiMethod,
    GroupSample,
};
use drivesafe::mining::{
    mine_rules, read_transactions, write_rules, DEFAULT_MIN_CONFIDENCE, DEFAULT_MIN_SUPPORT,
};
use drivesafe::recommend::{plan_repair, Target, TransitionModel, DEFAULT_HORIZON};
use drivesafe::scenario::{emit_session, SessionScript};

#[derive(Parser)]
#[command(
    name = "drivesafe",
    version,
    about = "Driver context mining and mood-repair toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario manifest through the layered network simulator.
    Run {
        manifest: PathBuf,
        /// `simulated` (default) or `realtime`.
        #[arg(long, default_value = "simulated")]
        mode: Mode,
        /// Overrides the manifest seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for `events.log` and `report.json`; the log goes to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mine context -> content rules from a JSON-lines transaction file.
    Mine {
        transactions: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MIN_SUPPORT)]
        min_support: f64,
        #[arg(long, default_value_t = DEFAULT_MIN_CONFIDENCE)]
        min_confidence: f64,
        /// Output file for the rules; stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan a content sequence from a start mood to a target.
    Plan {
        /// Transition model in its TSV form.
        model: PathBuf,
        /// Start state as `valence,arousal`.
        start: AffectiveState,
        /// `positive`, `neutral`, `negative`, `valence>=N` or `v,a`.
        target: Target,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: usize,
        /// Comma-separated content ids; defaults to every catalog entry.
        #[arg(long, value_delimiter = ',')]
        candidates: Vec<u32>,
        /// Catalog TSV; the built-in catalog otherwise.
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Usability statistics: descriptive table, ANOVA and confidence intervals.
    Stats {
        /// Score table with `user`, `question` and `score` columns.
        responses: PathBuf,
        /// 0/1 questionnaire with `user`, `question` and `answer` columns.
        #[arg(long)]
        binary: Option<PathBuf>,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Render a session script into sensor files and a manifest.
    Synth { script: PathBuf, outdir: PathBuf },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn run(manifest: &Path, mode: Mode, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let mut m = Manifest::load(manifest)?;
    if let Some(seed) = seed {
        m.seed = seed;
    }
    let output = run_scenario(&m, mode)?;
    let log = output.log_text();
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            fs::write(dir.join("events.log"), &log)?;
            fs::write(
                dir.join("report.json"),
                serde_json::to_string_pretty(&output.report)? + "\n",
            )?;
        }
        None => io::stdout().write_all(log.as_bytes())?,
    }
    let r = &output.report;
    eprintln!(
        "{} notifications, {} deliveries, {} drops, {} periods, {} rule sets, {} plans ({} validated, {} rejected)",
        r.notifications,
        r.deliveries,
        r.drops,
        r.periods_processed,
        r.rule_sets,
        r.plans_sent,
        r.plans_validated,
        r.plans_rejected
    );
    Ok(())
}

fn mine(path: &Path, min_support: f64, min_confidence: f64, out: Option<&Path>) -> Result<()> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let db = read_transactions(BufReader::new(file))?;
    let rules = mine_rules(&db, min_support, min_confidence)?;
    match out {
        Some(p) => write_rules(fs::File::create(p)?, &rules)?,
        None => write_rules(io::stdout().lock(), &rules)?,
    }
    eprintln!("{} rules from {} transactions", rules.len(), db.len());
    Ok(())
}

fn plan(
    model: &Path,
    start: AffectiveState,
    target: Target,
    horizon: usize,
    candidates: Vec<u32>,
    catalog: Option<&Path>,
) -> Result<()> {
    let model = TransitionModel::from_tsv(&read(model)?)?;
    let candidates: Vec<ContentId> = if candidates.is_empty() {
        match catalog {
            Some(p) => Catalog::from_tsv(&read(p)?)?.ids().collect(),
            None => Catalog::builtin().ids().collect(),
        }
    } else {
        candidates.into_iter().map(ContentId).collect()
    };
    match plan_repair(&model, start, &target, horizon, &candidates)? {
        Some(p) => println!("{}", serde_json::to_string_pretty(&p)?),
        None => bail!("no plan reaches {target} from {start} within {horizon} steps"),
    }
    Ok(())
}

fn stats(responses: &Path, binary: Option<&Path>, level: f64) -> Result<()> {
    let groups = groups_from_responses(&read(responses)?)?;
    println!(
        "{:<10} {:>8} {:>10} {:>8}",
        "Group", "Mean", "Variance", "Std"
    );
    let all = GroupSample::new(
        "Overall",
        groups.iter().flat_map(|g| g.scores.clone()).collect(),
    );
    for g in groups.iter().chain(std::iter::once(&all)) {
        let d = describe(g)?;
        println!(
            "{:<10} {:>8.2} {:>10.2} {:>8.2}",
            g.label,
            d.mean,
            d.sample_variance,
            d.population_std()
        );
    }
    let a = anova_oneway(&groups)?;
    println!();
    println!(
        "{:<10} {:>8} {:>4} {:>8} {:>8} {:>8}",
        "Source", "SS", "df", "MS", "F", "p"
    );
    println!(
        "{:<10} {:>8.2} {:>4} {:>8.2} {:>8.2} {:>8.4}",
        "Model", a.ss_model, a.df_model, a.ms_model, a.f_value, a.p_value
    );
    println!(
        "{:<10} {:>8.2} {:>4} {:>8.2}",
        "Residual", a.ss_residual, a.df_residual, a.ms_residual
    );
    if let Some(path) = binary {
        let (x, n) = successes_from_binary(&read(path)?)?;
        println!();
        println!("{x} of {n} positive answers, {:.0}% level", level * 100.0);
        println!(
            "{:<24} {:>10} {:>8} {:>8}",
            "Method", "Prevalence", "Lower", "Upper"
        );
        for method in CiMethod::ALL {
            let ci = binom_ci(x, n, level, method)?;
            println!(
                "{:<24} {:>10.4} {:>8.4} {:>8.4}",
                method.to_string(),
                ci.prevalence,
                ci.lower,
                ci.upper
            );
        }
    }
    Ok(())
}

fn synth(script: &Path, outdir: &Path) -> Result<()> {
    let script = SessionScript::from_toml(&read(script)?)?;
    let bundle = emit_session(&script, outdir)?;
    println!("{}", bundle.manifest.display());
    eprintln!(
        "{} files written to {}",
        bundle.files.len(),
        bundle.dir.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            manifest,
            mode,
            seed,
            out,
        } => run(&manifest, mode, seed, out.as_deref()),
        Command::Mine {
            transactions,
            min_support,
            min_confidence,
            out,
        } => mine(&transactions, min_support, min_confidence, out.as_deref()),
        Command::Plan {
            model,
            start,
            target,
            horizon,
            candidates,
            catalog,
        } => plan(
            &model,
            start,
            target,
            horizon,
            candidates,
            catalog.as_deref(),
        ),
        Command::Stats {
            responses,
            binary,
            level,
        } => stats(&responses, binary.as_deref(), level),
        Command::Synth { script, outdir } => synth(&script, &outdir),
    }
}
