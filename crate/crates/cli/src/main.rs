use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use skillrepair::game::{build_game, extract_strategy, is_realizable};
use skillrepair::skill::assemble_spec;
use skillrepair::workbench::{
    emit_plots, read_report, run, run_scenario_suite, strategy_table, write_artifacts, write_atomic, CheckerKind,
    Workbench, WorkbenchError,
};

#[derive(Parser)]
#[command(name = "skillrepair", version, about = "Skill encoding, GR(1) synthesis and task repair")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Override the run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the outer repair iteration budget.
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Override the feasibility acceptance threshold.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Override the number of sampled rollouts per check.
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true, value_enum)]
    checker: Option<Checker>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Checker {
    Holonomic,
    ReachableBox,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load and check a spec and everything it references.
    Validate { spec: PathBuf },
    /// Decide realizability and write the strategy table.
    Synth {
        spec: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline and write report, strategy and plot data.
    Repair {
        spec: PathBuf,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
    },
    /// Run a scenario suite and print the pass/fail matrix.
    Suite { suite: PathBuf },
    /// Write plot data from a report.
    Plot {
        report: PathBuf,
        #[arg(long, short, default_value = "plots")]
        out: PathBuf,
    },
}

impl Cli {
    fn load(&self, path: &Path) -> Result<Workbench, WorkbenchError> {
        let mut wb = Workbench::load(path)?;
        let r = &mut wb.run;
        if let Some(s) = self.seed {
            r.seed = s;
        }
        if let Some(m) = self.max_iters {
            r.max_iterations = m;
        }
        if let Some(t) = self.threshold {
            r.threshold = t;
        }
        if let Some(n) = self.samples {
            r.samples = n;
        }
        if let Some(c) = self.checker {
            r.checker = match c {
                Checker::Holonomic => CheckerKind::Holonomic,
                Checker::ReachableBox => CheckerKind::ReachableBox,
            };
        }
        wb.revalidate()?;
        Ok(wb)
    }
}

fn main_inner(cli: &Cli) -> Result<u8, WorkbenchError> {
    match &cli.cmd {
        Cmd::Validate { spec } => {
            let wb = cli.load(spec)?;
            println!("ok: {} skills, {} admissible states", wb.skills.len(), wb.space.states(skillrepair::logic::Slice::All).len());
            Ok(0)
        }
        Cmd::Synth { spec, out } => {
            let wb = cli.load(spec)?;
            let g = build_game(&assemble_spec(&wb.vocab, &wb.grounding, &wb.skills, &wb.task), &wb.space)?;
            if !is_realizable(&g)? {
                println!("unrealizable");
                return Ok(2);
            }
            let table = strategy_table(&extract_strategy(&g)?, &wb.vocab);
            match out {
                Some(p) => write_atomic(p, table.as_bytes())?,
                None => print!("{table}"),
            }
            println!("realizable");
            Ok(0)
        }
        Cmd::Repair { spec, out } => {
            let wb = cli.load(spec)?;
            let result = run(&wb)?;
            write_artifacts(&result, out)?;
            let r = &result.report;
            println!("outcome: {:?}", r.outcome);
            for s in &r.suggestions {
                println!("suggestion for {}:", s.skill);
                for c in &s.chain {
                    println!("  {c}");
                }
            }
            println!("report: {}", out.join("report.toml").display());
            Ok(result.exit_code() as u8)
        }
        Cmd::Suite { suite } => {
            let results = run_scenario_suite(suite)?;
            for c in &results {
                println!("{:<4} {:<4} {:>7.1}s  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.seconds, c.detail);
            }
            Ok(if results.iter().all(|c| c.passed) { 0 } else { 1 })
        }
        Cmd::Plot { report, out } => {
            let r = read_report(report)?;
            for f in emit_plots(&r, out)? {
                println!("{}", f.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
