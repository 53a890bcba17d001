use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pfops::experiment::{
    compare_presets, emit_front_csv, emit_front_svg, emit_report_json, lookup_preset, presets,
    run_experiment, AlgorithmConfig, ExperimentPreset, RunReport,
};
use pfops::pareto::{default_reference_resolution, ReferenceStore};
use pfops::{Error, Result};

#[derive(Parser)]
#[command(
    name = "pfops",
    version,
    about = "Run and compare multi-objective optimizers on benchmark problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one preset (or a TOML run file) and write CSV, SVG and JSON outputs
    Run {
        #[arg(long, required_unless_present = "config", conflicts_with = "config")]
        preset: Option<String>,
        /// TOML run file in place of a built-in preset
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Directory for cached reference fronts
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Run two presets on the same seeds and tabulate IGD, hypervolume and cost
    Compare {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// Seeds as a list and/or ranges, e.g. `0-29` or `1,2,5-7`
        #[arg(long, default_value = "0-9")]
        seeds: String,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Compute a reference front and write it as CSV
    Reference {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, default_value = "data/reference")]
        data_dir: PathBuf,
    },
    /// List the built-in presets
    List,
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidInput(format!("cannot parse seed list `{spec}`"));
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
                let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
                if hi < lo {
                    return Err(bad());
                }
                seeds.extend(lo..=hi);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(seeds)
}

fn store(data_dir: Option<PathBuf>) -> ReferenceStore {
    data_dir.map_or_else(ReferenceStore::in_memory, ReferenceStore::with_dir)
}

fn describe(p: &ExperimentPreset) -> String {
    match &p.algorithm {
        AlgorithmConfig::Pfops(c) => {
            let z = c
                .utopian
                .map(|z| format!(", z=({}, {})", z.f1(), z.f2()))
                .unwrap_or_default();
            format!(
                "pfops K={} N={} {}{z}, metropolis {}",
                c.targets,
                c.particles,
                c.scalarization,
                if c.metropolis_enabled { "on" } else { "off" }
            )
        }
        AlgorithmConfig::Nsga2(c) => format!("nsga2 pop={} gen={}", c.pop_size, c.generations),
    }
}

fn print_report(r: &RunReport, outputs: &[PathBuf]) {
    println!(
        "{} seed {}: IGD {:.6}, hypervolume {:.6}, {} evaluations, {:.3}s, {} archive points",
        r.preset,
        r.seed,
        r.igd,
        r.hypervolume,
        r.eval_count,
        r.wall_time.as_secs_f64(),
        r.archive.len()
    );
    for p in outputs {
        println!("  wrote {}", p.display());
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::List => {
            for p in presets() {
                println!("{:<26} {:<8} {}", p.name, p.problem, describe(&p));
            }
        }
        Command::Run {
            preset,
            config,
            seed,
            out,
            data_dir,
        } => {
            let preset = match (preset, config) {
                (_, Some(path)) => ExperimentPreset::from_toml_file(&path)?,
                (Some(name), None) => lookup_preset(&name)?,
                (None, None) => unreachable!("clap requires one of --preset/--config"),
            };
            let store = store(data_dir);
            let report = run_experiment(&preset, seed, &store)?;
            let reference = store.get(
                &preset.problem,
                default_reference_resolution(&preset.problem),
            )?;
            let stem = out.join(format!("{}_seed{seed}", preset.name));
            let paths = ["csv", "svg", "json"].map(|ext| stem.with_extension(ext));
            emit_front_csv(&report, &paths[0])?;
            emit_front_svg(std::slice::from_ref(&report), &reference, &paths[1])?;
            emit_report_json(&report, &paths[2])?;
            print_report(&report, &paths);
        }
        Command::Compare {
            a,
            b,
            seeds,
            out,
            data_dir,
        } => {
            let seeds = parse_seeds(&seeds)?;
            let (a, b) = (lookup_preset(&a)?, lookup_preset(&b)?);
            let store = store(data_dir);
            let cmp = compare_presets(&a, &b, &seeds, &store)?;
            let stem = out.join(format!("compare_{}_vs_{}", a.name, b.name));
            let table = stem.with_extension("csv");
            cmp.write_csv(&table)?;
            let plot = stem.with_extension("svg");
            let reference = store.get(&a.problem, default_reference_resolution(&a.problem))?;
            emit_front_svg(&cmp.reports[0], &reference, &plot)?;
            print!("{}", cmp.to_csv());
            println!("{}", cmp.summary());
            println!("  wrote {}", table.display());
            println!("  wrote {} (seed {})", plot.display(), seeds[0]);
        }
        Command::Reference {
            problem,
            resolution,
            data_dir,
        } => {
            let resolution = resolution.unwrap_or_else(|| default_reference_resolution(&problem));
            let store = ReferenceStore::with_dir(&data_dir);
            let front = store.regenerate(&problem, resolution)?;
            let path = store
                .path_for(&problem, resolution)
                .expect("store has a directory");
            println!("{problem} reference front: {} points", front.len());
            println!("  wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
