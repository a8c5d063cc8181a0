use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cca_core::analysis::{self, AnalysisError, AnalysisTask, Policy};
use cca_core::{oracle, HashMode, MasterKeySet};
use clap::{Args, Parser, Subcommand};
use log::warn;
use rand::rngs::StdRng;
use rand::SeedableRng;

use cca::config::RunConfig;
use cca::formats::{self, KeysFile};
use cca::{bench, db, pipeline, sources, Error};

#[derive(Parser)]
#[command(name = "cca", version, about = "Vulnerability detection over an encrypted code index")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct DbArgs {
    /// Rules database (TOML); the shipped defaults otherwise
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Task knowledge database (TOML); the shipped defaults otherwise
    #[arg(long)]
    knowledge: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a source tree into an index and a keys file
    Encrypt {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        out_index: PathBuf,
        #[arg(long)]
        out_keys: PathBuf,
        #[command(flatten)]
        db: DbArgs,
        /// Security parameter: 128 or 256
        #[arg(long, default_value_t = 128)]
        lambda: u32,
        /// DET hash: sha1 or sha256
        #[arg(long, default_value = "sha1")]
        hash: String,
        /// Store labels and numbers unencrypted
        #[arg(long)]
        no_encryption: bool,
        /// DET and RND only, numbers unencrypted inside RND
        #[arg(long)]
        no_ore: bool,
        /// Seed the RNG (reproducible test artifacts only; not secure)
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dump_lextokens: bool,
        #[arg(long)]
        dump_itl: bool,
        #[arg(long)]
        dump_dcfg: bool,
    },
    /// Issue a query file for one task
    Authorise {
        #[arg(long)]
        task: String,
        #[arg(long)]
        keys: PathBuf,
        /// Policy file; the shipped allow-all policy otherwise
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Name the policy is checked against
        #[arg(long, default_value = "analyser")]
        analyser: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        knowledge: Option<PathBuf>,
    },
    /// Run a query against an index
    Analyse {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decrypt an analysis report
    DecryptReport {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        keys: PathBuf,
        /// Also write the findings as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plaintext reference analysis of a source tree (JSON on stdout)
    Oracle {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        task: String,
        #[command(flatten)]
        db: DbArgs,
    },
    /// Time the code-privacy phase in every index mode
    Bench {
        #[arg(long)]
        src: PathBuf,
        #[arg(long, default_value_t = bench::DEFAULT_RUNS)]
        runs: usize,
        #[command(flatten)]
        db: DbArgs,
    },
    /// Print index size statistics
    Stats {
        #[arg(long)]
        index: PathBuf,
    },
}

fn rng(seed: Option<u64>) -> StdRng {
    match seed {
        Some(s) => StdRng::seed_from_u64(s),
        None => StdRng::from_entropy(),
    }
}

fn task(tk: &cca_core::TaskKnowledge, name: &str) -> Result<AnalysisTask, Error> {
    AnalysisTask::from_knowledge(tk, name).map_err(|_| {
        Error::Usage(format!("unknown task {name} (known: {})", tk.classes().join(", ")))
    })
}

fn compiled(src: &Path, cfg: &RunConfig) -> Result<pipeline::Compiled, Error> {
    let set = sources::collect_sources(src)?;
    let c = pipeline::compile(&set, &cfg.load_rules()?, &cfg.load_knowledge()?)?;
    for w in &c.warnings {
        warn!("{w}");
    }
    Ok(c)
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Encrypt {
            src,
            out_index,
            out_keys,
            db,
            lambda,
            hash,
            no_encryption,
            no_ore,
            seed,
            dump_lextokens,
            dump_itl,
            dump_dcfg,
        } => {
            let cfg = RunConfig { rules: db.rules, knowledge: db.knowledge, no_encryption, no_ore, ..RunConfig::developer() };
            cfg.validate()?;
            let hash = HashMode::from_name(&hash).ok_or_else(|| Error::Usage(format!("unknown hash {hash}")))?;
            let mut c = compiled(&src, &cfg)?;
            if dump_lextokens {
                print!("{}", pipeline::dump_lextokens(&c));
            }
            if dump_itl {
                print!("{}", pipeline::dump_itl(&c));
            }
            if dump_dcfg {
                print!("{}", pipeline::dump_dcfg(&c));
            }
            if seed.is_some() {
                warn!("--seed makes keys predictable; use it for tests only");
            }
            let mut rng = rng(seed);
            let mk = MasterKeySet::generate(lambda, hash, &mut rng).map_err(|e| Error::Usage(e.to_string()))?;
            let idx = pipeline::encrypt(&mut c, &mk, cfg.mode(), &mut rng)?;
            if idx.is_empty() {
                warn!("the index is empty");
            }
            let keys = KeysFile {
                mode: cfg.mode(),
                developer: analysis::DeveloperKeys::new(mk, &c.dcfg),
                files: c.files.clone(),
            };
            formats::write_index(&out_index, &idx)?;
            formats::write_keys(&out_keys, &keys)?;
            eprintln!("indexed {} files, {} entries ({} mode)", c.compiled.len(), idx.len(), cfg.mode());
            Ok(())
        }
        Command::Authorise { task: name, keys, policy, analyser, out, knowledge } => {
            let cfg = RunConfig { keys: Some(keys), knowledge, policy: policy.clone(), ..RunConfig::developer() };
            let t = task(&cfg.load_knowledge()?, &name)?;
            let kf = cfg.load_keys()?;
            let text = match &policy {
                Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
                None => db::DEFAULT_POLICY.to_string(),
            };
            let policy = Policy::parse(&text).map_err(|e| Error::Config(e.to_string()))?;
            let q = analysis::authorise(&t, &kf.developer.mk, kf.mode, &policy, &analyser).map_err(|e| match e {
                AnalysisError::Denied { .. } => Error::Denied(e.to_string()),
                other => Error::stage("authorise", other),
            })?;
            formats::write_atomic(&out, formats::query_to_text(&q).as_bytes(), true)
        }
        Command::Analyse { index, query, out } => {
            let cfg = RunConfig::analyser(index, query);
            let idx = cfg.load_index()?;
            let q = cfg.load_query()?;
            let r = analysis::analyse(&idx, &q).map_err(|e| Error::stage("analyse", e))?;
            if r.stats.probes == r.stats.misses {
                warn!("no index entry matched the query's sink token; the index may hold no sinks or come from another key set");
            }
            formats::write_atomic(&out, formats::report_to_json(&r).as_bytes(), false)?;
            eprintln!("{}: {} vulnerable path(s)", r.task, r.paths.len());
            Ok(())
        }
        Command::DecryptReport { report, keys, out } => {
            let cfg = RunConfig { keys: Some(keys), ..RunConfig::developer() };
            let kf = cfg.load_keys()?;
            let text = std::fs::read_to_string(&report).map_err(|e| Error::io(&report, e))?;
            let r = formats::report_from_json(&text)?;
            let plain = analysis::decrypt_report(&r, &kf.developer).map_err(|e| Error::stage("decrypt-report", e))?;
            if let Some(out) = out {
                formats::write_atomic(&out, formats::plain_report_to_json(&plain, &kf.files).as_bytes(), false)?;
            }
            print!("{}", formats::plain_report_to_text(&plain, &kf.files));
            Ok(())
        }
        Command::Oracle { src, task: name, db } => {
            let cfg = RunConfig { rules: db.rules, knowledge: db.knowledge, ..RunConfig::developer() };
            let t = task(&cfg.load_knowledge()?, &name)?;
            let c = compiled(&src, &cfg)?;
            let r = oracle::plaintext_analyse(&c.dcfg, &t).map_err(|e| Error::stage("oracle", e))?;
            print!("{}", formats::plain_report_to_json(&r, &c.files));
            Ok(())
        }
        Command::Bench { src, runs, db } => {
            let cfg = RunConfig { rules: db.rules, knowledge: db.knowledge, ..RunConfig::developer() };
            let set = sources::collect_sources(&src)?;
            let r = bench::bench(&set, &cfg.load_rules()?, &cfg.load_knowledge()?, runs)?;
            print!("{}", r.to_table());
            Ok(())
        }
        Command::Stats { index } => {
            let idx = formats::read_index(&index)?;
            let s = idx.stats();
            let m = idx.meta();
            println!("mode:      {}", m.mode);
            println!("hash:      {}", m.hash.name());
            println!("lambda:    {}", m.lambda);
            println!("entries:   {}", s.entries);
            println!("bytes:     {}", s.bytes);
            match s.value_len {
                Some(l) => println!("value_ind: {l} bytes each"),
                None if s.entries == 0 => println!("value_ind: -"),
                None => println!("value_ind: variable length"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
