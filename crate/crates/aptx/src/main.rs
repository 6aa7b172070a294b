//! Command-line entry point: train the MNIST experiment, evaluate a
//! checkpoint, count parameters, or run the gradient self-check.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aptx::aptx::SharingMode;
use aptx::error::Error;
use aptx::gradcheck::{run_gradcheck, TOLERANCE};
use aptx::mnist::{load_test, load_train};
use aptx::network::{init_network, load_checkpoint, save_checkpoint, total_parameters, Network};
use aptx::tensor::Rng;
use aptx::train::{evaluate, train, write_metrics_csv, TrainConfig};

#[derive(Parser)]
#[command(name = "aptx", about = "Unified trainable neuron networks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the MNIST classifier and write per-epoch metrics as CSV
    Train(TrainArgs),
    /// Evaluate a saved checkpoint on the MNIST test set
    Eval(EvalArgs),
    /// Print the trainable-parameter breakdown for an architecture
    Count(CountArgs),
    /// Check analytic gradients against central finite differences
    Gradcheck(GradcheckArgs),
}

/// Comma-separated layer widths as a single CLI value.
#[derive(Debug, Clone)]
struct Arch(Vec<usize>);

fn parse_arch(s: &str) -> Result<Arch, String> {
    let widths: Result<Vec<usize>, _> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
    match widths {
        Ok(w) if w.len() >= 2 && w.iter().all(|&x| x > 0) => Ok(Arch(w)),
        _ => Err(format!(
            "malformed architecture '{s}': expected comma-separated positive widths like 784,128,64,32,10"
        )),
    }
}

fn parse_mode(s: &str) -> Result<SharingMode, String> {
    SharingMode::parse(s).map_err(|e| e.to_string())
}

#[derive(Args)]
struct TrainArgs {
    /// Comma-separated layer widths, input first, classes last
    #[arg(long, value_parser = parse_arch, default_value = "784,128,64,32,10")]
    arch: Arch,
    /// Parameter sharing: per-input, full-shared, or hybrid-alpha-fixed
    #[arg(long, value_parser = parse_mode, default_value = "per-input")]
    mode: SharingMode,
    #[arg(long, default_value_t = 20)]
    epochs: u32,
    /// Initial learning rate
    #[arg(long, default_value_t = 4e-3)]
    lr: f64,
    /// Epochs per learning-rate decay step
    #[arg(long, default_value_t = 5)]
    step_size: u32,
    /// Learning-rate decay factor
    #[arg(long, default_value_t = 0.25)]
    decay: f64,
    #[arg(long, default_value_t = 64)]
    train_batch: usize,
    #[arg(long, default_value_t = 1000)]
    test_batch: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Directory holding the four MNIST IDX files (raw or .gz)
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, default_value = "metrics.csv")]
    out_csv: PathBuf,
    /// Where to save the final checkpoint
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Standardize pixels with the usual MNIST mean/std after /255
    #[arg(long, default_value_t = false)]
    standardize: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, default_value_t = 1000)]
    test_batch: usize,
    #[arg(long, default_value_t = false)]
    standardize: bool,
}

#[derive(Args)]
struct CountArgs {
    #[arg(long, value_parser = parse_arch, default_value = "784,128,64,32,10")]
    arch: Arch,
    #[arg(long, value_parser = parse_mode, default_value = "per-input")]
    mode: SharingMode,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn cmd_train(args: TrainArgs) -> aptx::Result<()> {
    let config = TrainConfig {
        arch: args.arch.0.clone(),
        mode: args.mode,
        epochs: args.epochs,
        base_lr: args.lr,
        step_size: args.step_size,
        decay: args.decay,
        train_batch: args.train_batch,
        test_batch: args.test_batch,
        seed: args.seed,
        standardize: args.standardize,
        data_dir: args.data_dir.clone(),
        out_csv: Some(args.out_csv.clone()),
        checkpoint: args.checkpoint.clone(),
    };
    let train_set = load_train(&config.data_dir, config.standardize)?;
    let test_set = load_test(&config.data_dir, config.standardize)?;
    let mut stdout = std::io::stdout();
    let (metrics, net) = train(&config, &train_set, &test_set, &mut stdout)?;
    write_metrics_csv(&args.out_csv, &metrics)?;
    println!("wrote {}", args.out_csv.display());
    if let Some(path) = &args.checkpoint {
        save_checkpoint(&net, path)?;
        println!("saved checkpoint {}", path.display());
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> aptx::Result<()> {
    let net = load_checkpoint(&args.checkpoint)?;
    let test_set = load_test(&args.data_dir, args.standardize)?;
    let (loss, acc) = evaluate(&net, &test_set, args.test_batch)?;
    println!("test_loss {loss:.6}");
    println!("test_acc {acc:.2}%");
    Ok(())
}

fn cmd_count(args: CountArgs) -> aptx::Result<()> {
    let net: Network<f32> = init_network(&mut Rng::new(0), &args.arch.0, args.mode)?;
    for (idx, layer) in net.aptx_layers.iter().enumerate() {
        println!(
            "layer {} ({}x{}, {}): {}",
            idx + 1,
            layer.in_dim,
            layer.out_dim,
            args.mode.as_str(),
            aptx::aptx::trainable_count(layer)
        );
    }
    println!(
        "output layer ({}x{}, linear): {}",
        net.output_layer.weights.cols(),
        net.output_layer.weights.rows(),
        net.output_layer.trainable_count()
    );
    println!("total {}", total_parameters(&net));
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> aptx::Result<bool> {
    let report = run_gradcheck(args.seed)?;
    for f in &report.families {
        println!(
            "{:<18} {:<8} max_rel_err {:.3e}  {}",
            f.mode.as_str(),
            f.family,
            f.max_rel_err,
            if f.passed() { "ok" } else { "FAIL" }
        );
    }
    println!(
        "gradcheck {} (tolerance {TOLERANCE:.0e})",
        if report.passed() { "passed" } else { "FAILED" }
    );
    Ok(report.passed())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) | Error::Shape { .. } => 2,
        Error::DataFormat { .. } | Error::Checkpoint(_) | Error::Io(_) => 3,
        Error::NonFinite(_) | Error::LabelOutOfRange { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(args).map(|()| true),
        Command::Eval(args) => cmd_eval(args).map(|()| true),
        Command::Count(args) => cmd_count(args).map(|()| true),
        Command::Gradcheck(args) => cmd_gradcheck(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
