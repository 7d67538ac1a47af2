//! Command-line front end: translation to SQL artifacts, in-memory and
//! DBMS-backed query evaluation, classification, normal forms, hard-instance
//! generation, and the benchmark runner.

mod bench;
mod dbms;

use clap::{Parser, Subcommand};
use rcq_core::aggs::cnt;
use rcq_core::datagolf::{
    check_dg_assumptions, dg_generate, gen_random_query, training_db, QueryProfile,
};
use rcq_core::eval::eval_ranf;
use rcq_core::normalize::{sr2ranf_qry, srnf};
use rcq_core::oracle::{capture_oracle, CaptureResult};
use rcq_core::parser::{parse_query, parse_query_infer};
use rcq_core::printer::print_query;
use rcq_core::ra::ranf2ra;
use rcq_core::ranges::{is_ranf, is_safe_range, nongens};
use rcq_core::sql::{ra2sql, Dialect, SqlOptions};
use rcq_core::structure::{parse_facts, write_facts, Structure};
use rcq_core::syntax::{Query, Signature};
use rcq_core::translate::{rw, split, Mode, TransConfig};
use rcq_core::vgt::{is_allowed, is_evaluable};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "rcq", version, about = "Relational calculus query compiler")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args, Clone)]
struct TranslateOpts {
    /// Training database (facts file) guiding nondeterministic choices.
    #[arg(long)]
    training_db: Option<PathBuf>,
    /// Translation mode: rc2sql or vgt.
    #[arg(long, default_value = "rc2sql")]
    mode: String,
    /// Disable the extra constant-propagation pass between rewriting steps.
    #[arg(long)]
    no_cp_extra: bool,
    /// Skip the count-aggregation optimization.
    #[arg(long)]
    no_agg: bool,
}

#[derive(clap::Args, Clone)]
struct SqlOpts {
    /// SQL dialect: postgresql or mysql.
    #[arg(long, default_value = "postgresql")]
    dialect: String,
    /// Type table columns as BIGINT instead of TEXT.
    #[arg(long)]
    int_columns: bool,
    /// Do not append a deterministic ORDER BY.
    #[arg(long)]
    no_order: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Translate a query into fin/inf RANF, RA, and SQL artifacts.
    Translate {
        query: PathBuf,
        #[command(flatten)]
        topts: TranslateOpts,
        #[command(flatten)]
        sopts: SqlOpts,
        /// Directory for the emitted artifacts (default: next to the query).
        #[arg(short, long)]
        out_dir: Option<PathBuf>,
    },
    /// Evaluate a query on a database: prints INFINITE or the result rows.
    Run {
        query: PathBuf,
        db: PathBuf,
        /// Evaluation engine: mem or dbms.
        #[arg(long, default_value = "mem")]
        engine: String,
        /// DBMS connection URL (or set RCQ_DB_URL).
        #[arg(long)]
        db_url: Option<String>,
        #[command(flatten)]
        topts: TranslateOpts,
        #[command(flatten)]
        sopts: SqlOpts,
    },
    /// Decide finiteness and enumerate: prints FINITE plus rows, or INFINITE.
    Eval {
        query: PathBuf,
        db: PathBuf,
        /// Use the brute-force extended-domain oracle instead of the
        /// translation pipeline.
        #[arg(long)]
        oracle: bool,
    },
    /// Print a normal form of the query.
    Normalize {
        query: PathBuf,
        /// Target form: srnf or ranf.
        #[arg(long)]
        to: String,
    },
    /// Print classification flags for the query.
    Classify { query: PathBuf },
    /// Generate a hard database instance for a query.
    Datagolf {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        strategy: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output facts file.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generate a pseudorandom query.
    Genquery {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 14)]
        size: usize,
        /// Profile: evaluable or infinite.
        #[arg(long, default_value = "evaluable")]
        profile: String,
    },
    /// Run the desk-scale benchmark over generated queries and instances.
    Bench {
        /// Number of generated queries.
        #[arg(long, default_value_t = 4)]
        seeds: u64,
        /// Generator size of each query.
        #[arg(long, default_value_t = 14)]
        size: usize,
        /// Divide the full-scale instance sizes (500 and 20000) by this.
        #[arg(long, default_value_t = 50)]
        scale: usize,
        /// Per-cell timeout in seconds.
        #[arg(long, default_value_t = 300)]
        timeout: u64,
        /// Output format: tsv or md.
        #[arg(long, default_value = "tsv")]
        format: String,
    },
}

fn main() -> ExitCode {
    // die quietly when a pipe consumer closes early
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) | Err(CliError::Semantic(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("io error: {msg}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Usage(String),
    Semantic(String),
    Io(String),
}

type CliResult = Result<(), CliError>;

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn load_query(path: &Path, sig: Option<&Signature>) -> Result<Query, CliError> {
    let text = read_to_string(path)?;
    match sig {
        Some(sig) => parse_query(&text, sig).map_err(|e| CliError::Semantic(e.to_string())),
        None => parse_query_infer(&text)
            .map(|(q, _)| q)
            .map_err(|e| CliError::Semantic(e.to_string())),
    }
}

fn load_db(path: &Path) -> Result<(Structure, Signature), CliError> {
    let text = read_to_string(path)?;
    parse_facts(&text).map_err(|e| CliError::Semantic(e.to_string()))
}

fn build_config(q: &Query, topts: &TranslateOpts) -> Result<TransConfig, CliError> {
    let mode = match topts.mode.as_str() {
        "rc2sql" => Mode::Rc2Sql,
        "vgt" => Mode::Vgt,
        other => return Err(CliError::Usage(format!("unknown mode {other}"))),
    };
    if mode == Mode::Vgt && !is_evaluable(q) {
        return Err(CliError::Semantic(
            "not evaluable: the vgt mode only accepts evaluable queries".into(),
        ));
    }
    let training = match &topts.training_db {
        Some(path) => load_db(path)?.0,
        None => training_db(q),
    };
    Ok(TransConfig {
        mode,
        cp_extra: !topts.no_cp_extra,
        training,
    })
}

fn sql_options(sopts: &SqlOpts) -> Result<SqlOptions, CliError> {
    let dialect = Dialect::parse(&sopts.dialect)
        .ok_or_else(|| CliError::Usage(format!("unknown dialect {}", sopts.dialect)))?;
    Ok(SqlOptions {
        dialect,
        order: !sopts.no_order,
    })
}

/// The full pipeline: translation, optional count optimization, RANF pair.
fn translate_pair(
    q: &Query,
    cfg: &TransConfig,
    no_agg: bool,
) -> Result<(Query, Query), CliError> {
    let (mut fin, mut inf) = rw(q, cfg).map_err(|e| CliError::Semantic(e.to_string()))?;
    if !no_agg {
        fin = cnt(&fin, &cfg.training);
        inf = cnt(&inf, &cfg.training);
    }
    Ok((fin, inf))
}

fn dispatch(cmd: Cmd) -> CliResult {
    match cmd {
        Cmd::Translate {
            query,
            topts,
            sopts,
            out_dir,
        } => {
            let q = load_query(&query, None)?;
            let cfg = build_config(&q, &topts)?;
            let opts = sql_options(&sopts)?;
            let pair = split(&q, &cfg).map_err(|e| CliError::Semantic(e.to_string()))?;
            let (fin, inf) = translate_pair(&q, &cfg, topts.no_agg)?;
            println!("fin: {}", print_query(&pair.fin));
            println!("inf: {}", print_query(&pair.inf));
            println!("fin (ranf): {}", print_query(&fin));
            println!("inf (ranf): {}", print_query(&inf));

            let stem = query
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "query".into());
            let dir = out_dir.unwrap_or_else(|| {
                query.parent().map(Path::to_path_buf).unwrap_or_default()
            });
            std::fs::create_dir_all(&dir)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
            for (suffix, component) in [("fin", &fin), ("inf", &inf)] {
                let ra = ranf2ra(component).map_err(|e| CliError::Semantic(e.to_string()))?;
                let sql = ra2sql(&ra, &opts);
                let ra_path = dir.join(format!("{stem}.{suffix}.ra"));
                let sql_path = dir.join(format!("{stem}.{suffix}.sql"));
                std::fs::write(&ra_path, ra.to_sexpr() + "\n")
                    .map_err(|e| CliError::Io(e.to_string()))?;
                std::fs::write(&sql_path, sql + "\n")
                    .map_err(|e| CliError::Io(e.to_string()))?;
                println!("wrote {}", ra_path.display());
                println!("wrote {}", sql_path.display());
            }
            Ok(())
        }
        Cmd::Run {
            query,
            db,
            engine,
            db_url,
            topts,
            sopts,
        } => {
            let (s, sig) = load_db(&db)?;
            let q = load_query(&query, Some(&sig)).or_else(|_| load_query(&query, None))?;
            let cfg = build_config(&q, &topts)?;
            let (fin, inf) = translate_pair(&q, &cfg, topts.no_agg)?;
            match engine.as_str() {
                "mem" => {
                    let inf_rel =
                        eval_ranf(&inf, &s).map_err(|e| CliError::Semantic(e.to_string()))?;
                    if !inf_rel.is_empty() {
                        println!("INFINITE");
                        return Ok(());
                    }
                    let rel =
                        eval_ranf(&fin, &s).map_err(|e| CliError::Semantic(e.to_string()))?;
                    print!("{rel}");
                    Ok(())
                }
                "dbms" => {
                    let url = db_url
                        .or_else(|| std::env::var("RCQ_DB_URL").ok())
                        .ok_or_else(|| {
                            CliError::Usage("dbms engine needs --db-url or RCQ_DB_URL".into())
                        })?;
                    let opts = SqlOptions {
                        dialect: dbms::dialect_for_url(&url).ok_or_else(|| {
                            CliError::Usage(format!("unsupported DBMS url {url}"))
                        })?,
                        order: !sopts.no_order,
                    };
                    let run_one = |component: &Query| -> Result<Vec<Vec<String>>, CliError> {
                        let ra =
                            ranf2ra(component).map_err(|e| CliError::Semantic(e.to_string()))?;
                        let sql = ra2sql(&ra, &opts);
                        dbms::execute(&url, &s, &sig, &sql, sopts.int_columns).map_err(|e| {
                            match e {
                                dbms::DbmsError::Connection(m) => CliError::Io(m),
                                dbms::DbmsError::Semantic(m) => CliError::Semantic(m),
                            }
                        })
                    };
                    if !run_one(&inf)?.is_empty() {
                        println!("INFINITE");
                        return Ok(());
                    }
                    let rows = run_one(&fin)?;
                    println!("({})", q.fvseq().join(", "));
                    for row in rows {
                        println!("{}", row.join("\t"));
                    }
                    Ok(())
                }
                other => Err(CliError::Usage(format!("unknown engine {other}"))),
            }
        }
        Cmd::Eval { query, db, oracle } => {
            let (s, sig) = load_db(&db)?;
            let q = load_query(&query, Some(&sig)).or_else(|_| load_query(&query, None))?;
            if oracle {
                match capture_oracle(&q, &s).map_err(|e| CliError::Semantic(e.to_string()))? {
                    CaptureResult::Infinite => println!("INFINITE"),
                    CaptureResult::Finite(rel) => {
                        println!("FINITE");
                        print!("{rel}");
                    }
                }
            } else {
                let cfg = TransConfig::with_training(training_db(&q));
                let (fin, inf) = translate_pair(&q, &cfg, false)?;
                let inf_rel =
                    eval_ranf(&inf, &s).map_err(|e| CliError::Semantic(e.to_string()))?;
                if !inf_rel.is_empty() {
                    println!("INFINITE");
                } else {
                    let rel =
                        eval_ranf(&fin, &s).map_err(|e| CliError::Semantic(e.to_string()))?;
                    println!("FINITE");
                    print!("{rel}");
                }
            }
            Ok(())
        }
        Cmd::Normalize { query, to } => {
            let q = load_query(&query, None)?;
            match to.as_str() {
                "srnf" => {
                    println!("{}", print_query(&srnf(&q)));
                    Ok(())
                }
                "ranf" => {
                    if !is_safe_range(&q) {
                        return Err(CliError::Semantic(
                            "not safe range: the ranf form needs a safe-range input".into(),
                        ));
                    }
                    let lowered = sr2ranf_qry(&q, &training_db(&q))
                        .map_err(|e| CliError::Semantic(e.to_string()))?;
                    println!("{}", print_query(&lowered));
                    Ok(())
                }
                other => Err(CliError::Usage(format!("unknown normal form {other}"))),
            }
        }
        Cmd::Classify { query } => {
            let q = load_query(&query, None)?;
            let ng = nongens(&q);
            println!("safe-range: {}", is_safe_range(&q));
            println!("evaluable: {}", is_evaluable(&q));
            println!("allowed: {}", is_allowed(&q));
            println!("ranf: {}", is_ranf(&q));
            println!("nongens: [{}]", ng.into_iter().collect::<Vec<_>>().join(", "));
            Ok(())
        }
        Cmd::Datagolf {
            query,
            n,
            strategy,
            seed,
            output,
        } => {
            let q = load_query(&query, None)?;
            let report = check_dg_assumptions(&q);
            if !report.ok {
                return Err(CliError::Semantic(format!(
                    "query violates the generator assumptions: {}",
                    report.violations.join("; ")
                )));
            }
            let (s, _) = dg_generate(&q, n, strategy, seed)
                .map_err(|e| CliError::Semantic(e.to_string()))?;
            let sig = s.signature();
            std::fs::write(&output, write_facts(&s, &sig))
                .map_err(|e| CliError::Io(e.to_string()))?;
            println!("wrote {} ({} tuples)", output.display(), s.total_tuples());
            Ok(())
        }
        Cmd::Genquery {
            seed,
            size,
            profile,
        } => {
            let profile = QueryProfile::parse(&profile)
                .ok_or_else(|| CliError::Usage(format!("unknown profile {profile}")))?;
            let q = gen_random_query(seed, size, profile);
            println!("{}", print_query(&q));
            Ok(())
        }
        Cmd::Bench {
            seeds,
            size,
            scale,
            timeout,
            format,
        } => {
            let markdown = match format.as_str() {
                "tsv" => false,
                "md" => true,
                other => return Err(CliError::Usage(format!("unknown format {other}"))),
            };
            let sizes_n = vec![
                (500 / scale.max(1)).max(2),
                (20_000 / scale.max(1)).max(5),
            ];
            let config = bench::BenchConfig {
                seeds,
                size,
                sizes_n,
                timeout: Duration::from_secs(timeout),
            };
            let rows = bench::run(&config);
            print!("{}", bench::render(&rows, markdown));
            Ok(())
        }
    }
}
