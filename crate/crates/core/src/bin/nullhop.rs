use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use nullhop::accel::{Fault, HardwareConfig};
use nullhop::check::selfcheck;
use nullhop::codec::{self, CompressedStream};
use nullhop::netmodel::{load_network, FeatureMapTensor};
use nullhop::report::{
    codec_sweep, corpus_comparison, load_any_tensor, parse_sweep, run_network, synthetic_input, RunOptions,
    SWEEP_DIMS,
};

#[derive(Parser)]
#[command(name = "nullhop", version, about = "Sparse CNN accelerator model")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a network and print its performance report.
    Run {
        #[arg(long)]
        net: PathBuf,
        /// Input image (.nht or .nhc). A dense random image is used if omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 500.0)]
        clock_mhz: f64,
        /// Timing-only run with random activations at this sparsity.
        #[arg(long)]
        synthetic_sparsity: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the report as JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write a per-cycle trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the last convolutional output here (.nht).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compress a .nht tensor into a .nhc stream.
    Encode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Expand a .nhc stream into a .nht tensor.
    Decode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare sparsity-map and run-length sizes.
    CompareCodecs {
        #[arg(long, default_value = "0.1:0.9:0.1")]
        sparsity_sweep: String,
        #[arg(long, default_value_t = 16)]
        precision: u32,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Use the .nht tensors in this directory instead of a synthetic sweep.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Check the pipeline against the golden model on random layers.
    Selfcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    Padding,
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Command::Run {
            net,
            input,
            clock_mhz,
            synthetic_sparsity,
            seed,
            report,
            trace,
            output,
        } => {
            let net = load_network(&net).with_context(|| format!("loading {}", net.display()))?;
            let hw = HardwareConfig::default().with_clock_mhz(clock_mhz);
            let image = match input {
                Some(p) => load_any_tensor(&p).with_context(|| format!("loading {}", p.display()))?,
                None => synthetic_input(&net, seed)?,
            };
            let mut trace_file = match trace {
                Some(p) => Some(BufWriter::new(
                    fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?,
                )),
                None => None,
            };
            let opts = RunOptions {
                synthetic_sparsity,
                seed,
                trace: trace_file.as_mut().map(|w| w as &mut dyn Write),
            };
            let result = run_network(&net, &image, &hw, opts)?;
            if let Some(mut w) = trace_file {
                w.flush()?;
            }
            print!("{}", result.report.to_table());
            if let Some(fc) = &result.fc_output {
                let raw: Vec<i16> = fc.iter().map(|v| v.0).collect();
                println!("fc_output             {raw:?}");
            }
            if let Some(p) = report {
                fs::write(&p, result.report.to_json()).with_context(|| format!("writing {}", p.display()))?;
            }
            if let Some(p) = output {
                result.output.save(&p)?;
            }
        }
        Command::Encode { input, out } => {
            let t = FeatureMapTensor::load(&input).with_context(|| format!("loading {}", input.display()))?;
            let s = codec::encode(&t);
            s.save(&out)?;
            println!(
                "{} -> {} words ({} bits, sparsity {:.4})",
                t.dims(),
                s.word_count(),
                s.bits(),
                t.sparsity()
            );
        }
        Command::Decode { input, out } => {
            let s = CompressedStream::load(&input).with_context(|| format!("loading {}", input.display()))?;
            let t = codec::decode(&s)?;
            t.save(&out)?;
            println!("{} words -> {}", s.word_count(), t.dims());
        }
        Command::CompareCodecs {
            sparsity_sweep,
            precision,
            trials,
            seed,
            corpus,
            json,
        } => {
            if precision == 0 {
                bail!("precision must be at least 1 bit");
            }
            if let Some(dir) = corpus {
                let cmp = corpus_comparison(&dir, precision)?;
                if json {
                    println!("{}", serde_json::to_string_pretty(&cmp)?);
                } else {
                    println!("tensors   {}", cmp.reports.len());
                    println!("sparsity  {:.4}", cmp.mean_sparsity);
                    println!("sm_ratio  {:.4}", cmp.sm_ratio());
                    println!("rl_ratio  {:.4}", cmp.rl_ratio());
                    println!("cis_ratio {:.4}", cmp.cis_ratio());
                }
            } else {
                let points = codec_sweep(&parse_sweep(&sparsity_sweep)?, precision, trials, SWEEP_DIMS, seed)?;
                if json {
                    println!("{}", serde_json::to_string_pretty(&points)?);
                } else {
                    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "sparsity", "measured", "sm_ratio", "rl_ratio", "cis_ratio");
                    for p in &points {
                        println!(
                            "{:>8.3} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                            p.target_sparsity, p.measured_sparsity, p.sm_ratio, p.rl_ratio, p.cis_ratio
                        );
                    }
                }
            }
        }
        Command::Selfcheck {
            seed,
            trials,
            inject_fault,
        } => {
            if trials == 0 {
                eprintln!("warning: 0 trials requested, nothing was checked");
                println!("selfcheck seed={seed} trials=0: PASS (vacuous)");
                return Ok(ExitCode::SUCCESS);
            }
            let fault = inject_fault.map(|FaultArg::Padding| Fault::PaddingOffByOne);
            let summary = selfcheck(seed, trials, fault);
            println!(
                "selfcheck seed={seed} trials={trials}: {} layer failures, {} codec failures",
                summary.layer_failures, summary.codec_failures
            );
            if let Some(f) = &summary.first_layer_failure {
                let l = &f.layer;
                println!(
                    "first layer failure: case seed {} n_in={} n_out={} k={} h={} w={} pad={} relu={} pool={} encode={} q={}/{}/{} mismatched={}{}",
                    f.seed,
                    l.n_in,
                    l.n_out,
                    l.k,
                    l.h,
                    l.w,
                    l.pad,
                    l.relu,
                    l.pool,
                    l.encode,
                    l.frac_in,
                    l.frac_w,
                    l.frac_out,
                    f.mismatched_pixels,
                    f.error.as_ref().map(|e| format!(" error={e}")).unwrap_or_default()
                );
            }
            if let Some(e) = &summary.first_codec_failure {
                println!("first codec failure: {e}");
            }
            if !summary.passed() {
                println!("FAIL");
                return Ok(ExitCode::FAILURE);
            }
            println!("PASS");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
