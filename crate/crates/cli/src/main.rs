mod args;
mod render;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::Parser;
use mcmatch::metrics::{weighted_prf, EvalReport, FForm};
use mcmatch::synth::generate_scene;
use mcmatch::{load_correspondences, load_result, run_pipeline_timed, save_correspondences, save_result, Error};

use args::{expand_config, Cli, Command, EvalArgs, MatchArgs, RenderArgs, SynthArgs};

const USAGE: u8 = 1;
const DATA: u8 = 2;
const PIPELINE: u8 = 3;

struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn new(code: u8, err: impl Into<anyhow::Error>) -> Self {
        Self { code, err: err.into() }
    }

    /// Bad settings are usage errors whatever stage reports them.
    fn from_lib(code: u8, err: Error, what: impl AsRef<Path>) -> Self {
        let code = if matches!(err, Error::Config(_)) { USAGE } else { code };
        let msg = match err {
            Error::Io { .. } => err.to_string(),
            _ => format!("{}: {err}", what.as_ref().display()),
        };
        Self::new(code, anyhow!(msg))
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(USAGE);
    }
    let outcome = match &cli.command {
        Command::Match(a) => cmd_match(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Render(a) => cmd_render(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_match(a: &MatchArgs) -> Outcome {
    let cfg = a.run.to_pipeline();
    cfg.validate().map_err(|e| Failure::new(USAGE, e))?;
    let start = Instant::now();
    let set = load_correspondences::<f64>(&a.input).map_err(|e| Failure::from_lib(DATA, e, &a.input))?;
    let load = start.elapsed();
    let (result, t) = run_pipeline_timed(&set, &cfg).map_err(|e| Failure::from_lib(PIPELINE, e, &a.input))?;
    let start = Instant::now();
    save_result(&result, &a.output).map_err(|e| Failure::from_lib(DATA, e, &a.output))?;
    let save = start.elapsed();

    let d = result.diagnostics;
    println!("correspondences   {}", set.len());
    println!("blocks kept       {}", d.blocks_kept);
    println!("game survivors    {}", d.game_survivors);
    println!("consistencies     {}", d.clusters_found);
    println!("recovered inliers {}", d.recovered_inliers);
    println!();
    for (stage, time) in [
        ("load", load),
        ("candidates", t.candidates),
        ("payoff matrix", t.matrix),
        ("clustering", t.clustering),
        ("recovery", t.recovery),
        ("save", save),
    ] {
        println!("{stage:<17} {:.3} ms", time.as_secs_f64() * 1e3);
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Outcome {
    let result = load_result::<f64>(&a.result).map_err(|e| Failure::from_lib(DATA, e, &a.result))?;
    let set = load_correspondences::<f64>(&a.truth).map_err(|e| Failure::from_lib(DATA, e, &a.truth))?;
    let truth = set
        .ground_truth()
        .ok_or_else(|| Failure::new(DATA, anyhow!("{}: no ground truth labels", a.truth.display())))?;
    let indices: Vec<u64> = set.items().iter().map(|c| c.index).collect();
    let form = if a.paper_literal_f {
        FForm::Literal
    } else {
        FForm::Harmonic
    };
    let report = weighted_prf(&result, &indices, truth, form).map_err(|e| Failure::from_lib(DATA, e, &a.result))?;
    print!("{}", format_report(&report));
    Ok(())
}

fn format_report(r: &EvalReport) -> String {
    let mut s = String::new();
    writeln!(s, "{:<10} {:>9} {:>9}", "metric", "plain", "weighted").unwrap();
    for (name, p, w) in [
        ("precision", r.precision, r.w_precision),
        ("recall", r.recall, r.w_recall),
        ("f-measure", r.f_measure, r.w_f_measure),
    ] {
        writeln!(s, "{name:<10} {p:>9.4} {w:>9.4}").unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "{:<12} {:>8} {:>8}", "consistency", "inliers", "weight").unwrap();
    for &(id, n, w) in &r.per_consistency {
        writeln!(s, "{id:<12} {n:>8} {w:>8.4}").unwrap();
    }
    writeln!(s, "{:<12} {:>8} {:>8.4}", "outlier", "", r.w_outlier).unwrap();
    writeln!(s).unwrap();
    writeln!(
        s,
        "tp {} fp {} fn {}, cluster purity {:.4}{}",
        r.counts.tp,
        r.counts.fp,
        r.counts.fn_,
        r.cluster_purity,
        if r.degenerate {
            ", degenerate ratios reported as 0"
        } else {
            ""
        }
    )
    .unwrap();
    writeln!(s).unwrap();
    for (k, v) in [
        ("P", r.precision),
        ("R", r.recall),
        ("F", r.f_measure),
        ("W-P", r.w_precision),
        ("W-R", r.w_recall),
        ("W-F", r.w_f_measure),
    ] {
        writeln!(s, "{k}={v}").unwrap();
    }
    writeln!(s, "K_pred={}", r.k_pred).unwrap();
    writeln!(s, "K_true={}", r.k_true).unwrap();
    s
}

/// `<scene>.planted.mres`.
fn planted_path(out: &Path) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(".planted.mres");
    p.into()
}

fn cmd_synth(a: &SynthArgs) -> Outcome {
    let cfg = a.to_config();
    cfg.validate().map_err(|e| Failure::new(USAGE, e))?;
    let scene = generate_scene::<f64>(&cfg).map_err(|e| Failure::from_lib(DATA, e, &a.output))?;
    save_correspondences(&scene.set, &a.output).map_err(|e| Failure::from_lib(DATA, e, &a.output))?;
    let planted = planted_path(&a.output);
    save_result(&scene.planted_result(), &planted).map_err(|e| Failure::from_lib(DATA, e, &planted))?;
    println!(
        "wrote {} correspondences ({} consistencies) to {}",
        scene.set.len(),
        cfg.k,
        a.output.display()
    );
    println!("planted result in {}", planted.display());
    Ok(())
}

fn cmd_render(a: &RenderArgs) -> Outcome {
    let set = load_correspondences::<f64>(&a.input).map_err(|e| Failure::from_lib(DATA, e, &a.input))?;
    let result = load_result::<f64>(&a.result).map_err(|e| Failure::from_lib(DATA, e, &a.result))?;
    let svg = render::render_svg(&set, &result).map_err(|e| Failure::new(DATA, anyhow!(e)))?;
    std::fs::write(&a.output, svg)
        .with_context(|| a.output.display().to_string())
        .map_err(|e| Failure::new(DATA, e))?;
    Ok(())
}
