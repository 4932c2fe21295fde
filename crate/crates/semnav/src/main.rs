use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use semnav::{Error, Run, RunConfig};

#[derive(Parser)]
#[command(name = "semnav", version, about = "Semantic map prediction and uncertainty-driven object-goal navigation on gridworlds")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Generate train/eval worlds and evaluation episodes.
    GenWorlds(Args),
    /// Collect the offline dataset along shortest paths.
    CollectOffline(Args),
    /// Train the offline ensemble.
    Train(Args),
    /// Collect active datasets with the offline ensemble.
    CollectActive(Args),
    /// Fine-tune the offline ensemble on each active dataset.
    Finetune(Args),
    /// Evaluate map prediction against projection baselines.
    EvalMap(Args),
    /// Run navigation methods and ablations on the eval episodes.
    EvalNav(Args),
    /// Render worlds, belief maps and trajectories to PNG.
    Render {
        #[command(flatten)]
        args: Args,
        /// Episodes per method to render.
        #[arg(long, default_value_t = 2)]
        episodes: usize,
    },
    /// Print the result tables of a run.
    Report(Args),
    /// Run every stage in order.
    Run(Args),
    /// Print the default configuration as JSON.
    DefaultConfig,
}

#[derive(clap::Args)]
struct Args {
    /// Run configuration (JSON).
    #[arg(short, long)]
    config: PathBuf,
}

fn execute(verb: Verb) -> Result<(), Error> {
    let run = |a: &Args| Run::load(&a.config);
    match verb {
        Verb::GenWorlds(a) => run(&a)?.gen_worlds(),
        Verb::CollectOffline(a) => {
            let n = run(&a)?.collect_offline()?;
            eprintln!("collected {n} samples");
            Ok(())
        }
        Verb::Train(a) => run(&a)?.train(),
        Verb::CollectActive(a) => run(&a)?.collect_active(),
        Verb::Finetune(a) => run(&a)?.finetune(),
        Verb::EvalMap(a) => run(&a)?.eval_map().map(drop),
        Verb::EvalNav(a) => run(&a)?.eval_nav().map(drop),
        Verb::Render { args, episodes } => {
            for p in run(&args)?.render(episodes)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Verb::Report(a) => {
            print!("{}", run(&a)?.report()?);
            Ok(())
        }
        Verb::Run(a) => {
            let r = run(&a)?;
            r.run_all()?;
            print!("{}", r.report()?);
            Ok(())
        }
        Verb::DefaultConfig => {
            println!("{}", serde_json::to_string_pretty(&RunConfig::default()).expect("config serializes"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("semnav: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
