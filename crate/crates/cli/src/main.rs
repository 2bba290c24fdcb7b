use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gammaquant::bft::{run_bft, BftConfig, BftTarget};
use gammaquant::formats::{self, TraceFile};
use gammaquant::netsim::{fixture, NetworkModel, Tensor};
use gammaquant::pipeline::{self, QuantizeOptions, Scheme};
use gammaquant::{Error, Result, SearchMode};

/// Items per forward-pass batch; batches run in parallel.
const BATCH: usize = 32;

#[derive(Parser)]
#[command(name = "gammaquant", version, about = "Post-training fixed-point quantization for CNNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Wq,
    WqFq,
    Ristretto,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Default,
    Fast,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum TargetArg {
    Weights,
    Fm,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Collect zero-excluded activation statistics of every quantization site.
    Stats {
        #[arg(long)]
        model: PathBuf,
        /// Calibration dataset manifest.
        #[arg(long)]
        calib: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Choose per-layer formats and write a config and a report.
    Quantize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        stats: PathBuf,
        /// Calibration dataset; needed for default-mode scoring, feature-map
        /// SQNR and feature-map SQNR floors.
        #[arg(long)]
        calib: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "wq-fq")]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(2..=32))]
        bw_weights: u32,
        /// Defaults to the weight bit-width.
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..=32))]
        bw_bias: Option<u32>,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(2..=32))]
        bw_fm: u32,
        /// Per-layer feature-map bit-width, `LAYER=BW`; repeatable.
        #[arg(long = "fm-bw", value_parser = parse_override)]
        fm_bw_overrides: Vec<(String, u32)>,
        #[arg(long, value_enum, default_value = "default")]
        mode: ModeArg,
        /// Weight fractional-length candidates per layer.
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
        k_w: u32,
        #[arg(long, value_name = "DB", allow_negative_numbers = true)]
        sqnr_floor_weights: Option<f64>,
        #[arg(long, value_name = "DB", allow_negative_numbers = true)]
        sqnr_floor_fm: Option<f64>,
        /// Bit-width for layers promoted by an SQNR floor.
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(2..=32))]
        fallback_bw: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Backward-forward tuning of fractional lengths.
    Bft {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Dataset the tuning objective is evaluated on.
        #[arg(long)]
        eval: PathBuf,
        /// Half-width of the candidate window.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        window: u32,
        #[arg(long, value_enum, default_value = "both")]
        target: TargetArg,
        /// Weights of top-1 and top-5 agreement, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,0")]
        metric_weights: Vec<f64>,
        /// Keep candidates whose range is below the observed maximum.
        #[arg(long)]
        no_clamp: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Per-layer SQNR and agreement of a config on a dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        eval: PathBuf,
        /// Machine-readable report; a table is always printed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the seeded reference network and its datasets.
    GenFixture {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 256)]
        calib_count: usize,
        #[arg(long, default_value_t = 300)]
        tune_count: usize,
        #[arg(long, default_value_t = 1000)]
        eval_count: usize,
    },
}

fn parse_override(s: &str) -> std::result::Result<(String, u32), String> {
    let (layer, bw) = s.split_once('=').ok_or("expected LAYER=BW")?;
    let bw: u32 = bw.parse().map_err(|e| format!("bad bit-width `{bw}`: {e}"))?;
    if !(2..=32).contains(&bw) {
        return Err(format!("bit-width {bw} outside 2..=32"));
    }
    Ok((layer.to_string(), bw))
}

fn load_batches(path: &Path) -> Result<Vec<Tensor>> {
    Ok(formats::load_dataset(path)?.split_batches(BATCH))
}

fn set_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into())
}

fn cmd_stats(model: &Path, calib: &Path, out: &Path) -> Result<()> {
    let m = formats::load_model(model)?;
    let inputs = load_batches(calib)?;
    let (stats, _) = pipeline::calibrate(&m, &inputs)?;
    for s in &stats.sites {
        if let Some(why) = &s.degenerate {
            eprintln!("warning: layer `{}` is degenerate: {why}", s.layer);
        }
    }
    formats::save_stats(&stats, out)
}

fn cmd_quantize(
    model: &Path,
    stats: &Path,
    calib: Option<&Path>,
    opts: &QuantizeOptions,
    out: &Path,
    report: Option<&Path>,
) -> Result<()> {
    let m = formats::load_model(model)?;
    let st = formats::load_stats(stats)?;
    let acts = match calib {
        Some(p) => Some(gammaquant::netsim::capture_activations(&m, &load_batches(p)?)?),
        None => None,
    };
    let (q, r) = pipeline::quantize_model(&m, &st, acts.as_ref(), opts)?;
    formats::save_config(&q, r.scheme, out)?;
    if let Some(p) = report {
        formats::save_report(&r, p)?;
    }
    print!("{}", formats::render_report_text(&r));
    Ok(())
}

fn cmd_bft(model: &Path, config: &Path, eval: &Path, cfg: impl FnOnce(&NetworkModel) -> BftConfig, out: &Path, trace: Option<&Path>) -> Result<()> {
    let m = formats::load_model(model)?;
    let (q, tag) = formats::load_config(config)?;
    let inputs = load_batches(eval)?;
    let cfg = cfg(&m);
    let (tuned, t) = run_bft(&m, &q, &inputs, &cfg)?;
    let tag = tag.tuned(cfg.target);
    formats::save_config(&tuned, tag, out)?;
    if let Some(p) = trace {
        let text = TraceFile::new(&t, tag).emit()?;
        std::fs::write(p, text).map_err(|e| Error::Io { path: p.into(), source: e })?;
    }
    println!(
        "{tag}: score {:.4} -> {:.4}; {} backward and {} forward changes{}",
        t.initial_score,
        t.final_score,
        t.changes(gammaquant::bft::Direction::Backward),
        t.changes(gammaquant::bft::Direction::Forward),
        if t.unchanged() { " (config already locally optimal)" } else { "" }
    );
    Ok(())
}

fn cmd_evaluate(model: &Path, config: &Path, eval: &Path, out: Option<&Path>) -> Result<()> {
    let m = formats::load_model(model)?;
    let (q, tag) = formats::load_config(config)?;
    let inputs = load_batches(eval)?;
    let r = pipeline::evaluate(&m, &q, &inputs, tag, set_name(eval))?;
    if let Some(p) = out {
        formats::save_report(&r, p)?;
    }
    print!("{}", formats::render_report_text(&r));
    Ok(())
}

fn cmd_gen_fixture(seed: u64, dir: &Path, counts: [(&str, u64, usize); 3]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    formats::save_model(&fixture::reference_network(seed), &dir.join("model.json"))?;
    for (name, stream, count) in counts {
        if count == 0 {
            continue;
        }
        let data = fixture::synthetic_inputs(seed, stream, count);
        formats::save_dataset(&data, &dir.join(format!("{name}.json")))?;
    }
    println!("wrote fixture seed {seed} to {}", dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stats { model, calib, out } => cmd_stats(&model, &calib, &out),
        Command::Quantize {
            model,
            stats,
            calib,
            scheme,
            bw_weights,
            bw_bias,
            bw_fm,
            fm_bw_overrides,
            mode,
            k_w,
            sqnr_floor_weights,
            sqnr_floor_fm,
            fallback_bw,
            out,
            report,
        } => {
            let scheme = match scheme {
                SchemeArg::Wq => Scheme::Wq,
                SchemeArg::WqFq => Scheme::WqFq,
                SchemeArg::Ristretto => Scheme::Ristretto,
            };
            let mut opts = QuantizeOptions::new(scheme, bw_weights);
            opts.bw_bias = bw_bias.unwrap_or(bw_weights);
            opts.bw_fm = bw_fm;
            opts.fm_bw_overrides = fm_bw_overrides;
            opts.mode = match mode {
                ModeArg::Default => SearchMode::Default,
                ModeArg::Fast => SearchMode::Fast,
            };
            opts.k_w = k_w;
            opts.sqnr_floor_weights = sqnr_floor_weights;
            opts.sqnr_floor_fm = sqnr_floor_fm;
            opts.fallback_bw = fallback_bw;
            cmd_quantize(&model, &stats, calib.as_deref(), &opts, &out, report.as_deref())
        }
        Command::Bft {
            model,
            config,
            eval,
            window,
            target,
            metric_weights,
            no_clamp,
            out,
            trace,
        } => {
            let target = match target {
                TargetArg::Weights => BftTarget::Weights,
                TargetArg::Fm => BftTarget::FeatureMaps,
                TargetArg::Both => BftTarget::Both,
            };
            let cfg = move |m: &NetworkModel| {
                let mut c = BftConfig::new(m, target).with_window(window);
                c.metric_weights = metric_weights;
                c.clamp_to_observed_max = !no_clamp;
                c
            };
            cmd_bft(&model, &config, &eval, cfg, &out, trace.as_deref())
        }
        Command::Evaluate { model, config, eval, out } => cmd_evaluate(&model, &config, &eval, out.as_deref()),
        Command::GenFixture {
            seed,
            out_dir,
            calib_count,
            tune_count,
            eval_count,
        } => cmd_gen_fixture(
            seed,
            &out_dir,
            [("calib", 1, calib_count), ("tune", 3, tune_count), ("eval", 2, eval_count)],
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
