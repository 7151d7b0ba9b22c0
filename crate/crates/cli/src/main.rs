use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fspinn::config::parse_format_list;
use fspinn::dse::{run_dse, Budget, NetworkEvaluator, DSE_CSV_HEADER};
use fspinn::eval::pgm::weight_grid_pgm;
use fspinn::eval::{assign_classes, evaluate, memory_report};
use fspinn::idx::{load_idx, IdxDataset};
use fspinn::model_file::{load_model, save_model, ModelFile};
use fspinn::quantize::{sweep_quantization, SWEEP_CSV_HEADER};
use fspinn::topology::build_network;
use fspinn::train::{train, METRICS_CSV_HEADER};
use fspinn::{Error, RunConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "fspinn",
    version,
    about = "Train, quantize and explore spiking digit classifiers"
)]
struct Cli {
    /// Run configuration (flat key = value file).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "fspinn-out")]
    out: PathBuf,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Data {
    /// IDX images file.
    #[arg(long)]
    images: PathBuf,
    /// IDX labels file.
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network, label its neurons, and write metrics.csv and model.fspn.
    Train {
        #[command(flatten)]
        data: Data,
    },
    /// Classify a labeled set with a saved model; writes confusion.txt.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: Data,
    },
    /// Accuracy and size of a saved model across word lengths; writes sweep.csv.
    Quantize {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated word lengths; 32 or `ref` is binary32.
        #[arg(long)]
        formats: Option<String>,
        #[command(flatten)]
        data: Data,
    },
    /// Search network sizes under the configured budgets; writes dse.csv and best.fspn.
    Dse {
        #[arg(long)]
        train_images: PathBuf,
        #[arg(long)]
        train_labels: PathBuf,
        #[arg(long)]
        test_images: PathBuf,
        #[arg(long)]
        test_labels: PathBuf,
    },
    /// Summarize a saved model and render its weights as weights.pgm.
    Inspect {
        #[arg(long)]
        model: PathBuf,
    },
}

struct Ctx {
    config: RunConfig,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> fspinn::Result<PathBuf> {
        let p = self.out.join(name);
        fs::write(&p, contents).map_err(|e| io_error(&p, e))?;
        Ok(p)
    }

    fn load(&self, path: &Path) -> fspinn::Result<ModelFile> {
        load_model(path, &self.config.network_config())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn load_data(d: &Data) -> fspinn::Result<IdxDataset> {
    load_idx(&d.images, &d.labels)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Range { .. } => EXIT_USAGE,
        Error::NumericalFault(_) => EXIT_NUMERICAL,
        Error::Candidate { source, .. } => exit_code(source),
        _ => EXIT_DATA,
    }
}

fn run(cli: Cli) -> fspinn::Result<()> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    fs::create_dir_all(&cli.out).map_err(|e| io_error(&cli.out, e))?;
    let ctx = Ctx {
        config,
        out: cli.out,
        quiet: cli.quiet,
    };
    let cfg = &ctx.config;
    match cli.command {
        Command::Train { data } => {
            let set = load_data(&data)?;
            ctx.write("config.toml", cfg.dump())?;
            let mut net = build_network(&cfg.network_config())?;
            let metrics_path = ctx.out.join("metrics.csv");
            let mut csv = fs::File::create(&metrics_path).map_err(|e| io_error(&metrics_path, e))?;
            writeln!(csv, "{METRICS_CSV_HEADER}").map_err(|e| io_error(&metrics_path, e))?;
            train(&mut net, &set, &cfg.train_options(), |row| {
                ctx.say(format!(
                    "epoch {} samples {} accuracy {:.4}",
                    row.epoch, row.samples_seen, row.accuracy
                ));
                writeln!(csv, "{}", row.csv_line())
                    .and_then(|_| csv.flush())
                    .map_err(|e| io_error(&metrics_path, e))
            })?;
            let assignment = assign_classes(&mut net, &set, cfg.assign_samples, &cfg.encoding())?;
            let model = ctx.out.join("model.fspn");
            save_model(&model, &net, &assignment, cfg.seed)?;
            ctx.say(format!(
                "{} of {} neurons labeled; model written to {}",
                assignment.assigned_count(),
                assignment.len(),
                model.display()
            ));
        }
        Command::Infer { model, data } => {
            let mut m = ctx.load(&model)?;
            let set = load_data(&data)?;
            let eval = evaluate(&mut m.network, &m.assignment, &set, cfg.test_samples, &cfg.encoding())?;
            let grid = eval.confusion.to_string();
            ctx.write("confusion.txt", &grid)?;
            ctx.say(format!(
                "accuracy {:.4} over {} images ({} low confidence)",
                eval.accuracy,
                eval.confusion.total(),
                eval.low_confidence
            ));
            ctx.say(grid);
        }
        Command::Quantize { model, formats, data } => {
            let m = ctx.load(&model)?;
            let set = load_data(&data)?;
            let formats = match formats {
                Some(list) => parse_format_list(&list)?,
                None => cfg.sweep_precisions()?,
            };
            let rows = sweep_quantization(
                &m.network,
                &m.assignment,
                &set,
                cfg.test_samples,
                &cfg.encoding(),
                &formats,
                cfg.quantize_theta,
            )?;
            let mut csv = format!("{SWEEP_CSV_HEADER}\n");
            for r in &rows {
                csv.push_str(&r.csv_line());
                csv.push('\n');
            }
            ctx.write("sweep.csv", &csv)?;
            ctx.say(csv.trim_end());
        }
        Command::Dse {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => {
            let train_set = load_idx(&train_images, &train_labels)?;
            let test_set = load_idx(&test_images, &test_labels)?;
            let budget = Budget {
                mem: cfg.dse_mem_bytes,
                e_train: cfg.dse_e_train,
                e_inf: cfg.dse_e_inf,
            };
            let mut evaluator = NetworkEvaluator {
                config: cfg,
                train_set: &train_set,
                test_set: &test_set,
                precision: cfg.precision()?,
            };
            let outcome = run_dse(&budget, cfg.dse_n_add, &mut evaluator)?;
            let mut csv = format!("{DSE_CSV_HEADER}\n");
            for r in &outcome.records {
                csv.push_str(&r.csv_line());
                csv.push('\n');
            }
            ctx.write("dse.csv", &csv)?;
            ctx.say(csv.trim_end());
            match outcome.best {
                Some(best) => {
                    let m = best.model;
                    let assignment = m.assignment.expect("saved candidates were evaluated");
                    let p = ctx.out.join("best.fspn");
                    save_model(&p, &m.network, &assignment, cfg.seed)?;
                    ctx.say(format!(
                        "selected n_exc = {}, model written to {}",
                        best.n_exc,
                        p.display()
                    ));
                }
                None => ctx.say("no candidate met the budgets"),
            }
        }
        Command::Inspect { model } => {
            let m = ctx.load(&model)?;
            let net = &m.network;
            let side = (net.n_input() as f64).sqrt() as usize;
            let (rows, cols) = if side * side == net.n_input() {
                (side, side)
            } else {
                (1, net.n_input())
            };
            ctx.write("weights.pgm", weight_grid_pgm(&net.weights, rows, cols)?)?;
            let mem = memory_report(net, net.precision);
            let sizes = m.assignment.class_sizes();
            ctx.say(format!("inputs          {}", net.n_input()));
            ctx.say(format!("excitatory      {}", net.n_exc()));
            ctx.say(format!("inhibition      {:?}", net.mode()));
            ctx.say(format!("precision       {}", net.precision));
            ctx.say(format!("model bytes     {}", mem.total_bytes));
            ctx.say(format!("labeled neurons {}", m.assignment.assigned_count()));
            ctx.say(format!("per class       {sizes:?}"));
            ctx.say(format!("seed            {}", m.seed));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
