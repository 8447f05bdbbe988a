//! `scldpc`: command-line front end for the analysis library.
//!
//! Every run resolves its parameters (config file first, flags win), executes
//! one analysis, writes machine-readable outputs plus a gnuplot-friendly
//! variant, and emits a TOML manifest with digests of everything written.
//!
//! Exit codes: 0 ok, 2 bad spec/flags, 3 no bisection bracket or
//! unattainable target, 4 partial failure (too many curve points missing).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use scldpc::bec::{bec_bp_threshold, rateloss_sweep, sweep_csv};
use scldpc::de::{bp_threshold, run_forward_de};
use scldpc::ebp::{curve_area, default_anchors, fp_profile_report, maxwell_bound, trace_ebp, EbpPoint};
use scldpc::rates::design_rate;
use scldpc::{
    ChannelFamily, ChannelParam, CoupledSpec, Error, GridSpec, ScheduleSpec, StopRule,
};

#[derive(Parser)]
#[command(name = "scldpc", version, about = "Density evolution analysis for spatially coupled LDPC ensembles")]
struct Cli {
    /// key=value config file; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cap on worker threads
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory for CSVs and the manifest
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design rate of the ensemble
    Rate(EnsembleArgs),
    /// BP threshold (bisection)
    Threshold(ThresholdArgs),
    /// Trace the EBP GEXIT curve
    Ebp(EbpArgs),
    /// Maxwell-construction MAP threshold upper bound
    Maxwell(EbpArgs),
    /// Threshold-versus-delta rate-loss sweep (circular BEC)
    Sweep(SweepArgs),
    /// Fixed-point section profile at a given channel entropy
    Fp(FpArgs),
}

#[derive(Args, Clone)]
struct EnsembleArgs {
    /// Variable degree
    #[arg(long)]
    l: Option<u32>,
    /// Check degree
    #[arg(long)]
    r: Option<u32>,
    /// Line-ensemble half-length (positions -L..L); implies coupling
    #[arg(long = "L")]
    big_l: Option<usize>,
    /// Coupling width
    #[arg(long)]
    w: Option<usize>,
    /// Couple on the line even without --L (uses L from config or 16)
    #[arg(long)]
    coupled: bool,
    /// Circular topology with K positions
    #[arg(long)]
    circular: bool,
    /// One-sided terminated topology with K positions
    #[arg(long)]
    one_sided: bool,
    #[arg(long = "K")]
    k: Option<usize>,
    /// Comma-separated kappa values for positions 0,1,... (rest 0)
    #[arg(long, value_delimiter = ',')]
    kappa: Option<Vec<f64>>,
    /// Check-merge strength for the one-sided boundary
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args, Clone)]
struct ChannelArgs {
    #[arg(long, conflicts_with_all = ["bsc", "bawgn"])]
    bec: bool,
    #[arg(long, conflicts_with = "bawgn")]
    bsc: bool,
    #[arg(long)]
    bawgn: bool,
    /// LLR grid half-width
    #[arg(long)]
    llr_max: Option<f64>,
    /// Number of grid bins
    #[arg(long)]
    bins: Option<usize>,
    /// Stop tolerance on the Bhattacharyya trace
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Args, Clone)]
struct ThresholdArgs {
    #[command(flatten)]
    ens: EnsembleArgs,
    #[command(flatten)]
    ch: ChannelArgs,
    /// Bisection width (entropy for density families, epsilon for BEC)
    #[arg(long)]
    bisect_tol: Option<f64>,
}

#[derive(Args, Clone)]
struct EbpArgs {
    #[command(flatten)]
    ens: EnsembleArgs,
    #[command(flatten)]
    ch: ChannelArgs,
    /// Number of uniformly spaced anchors
    #[arg(long)]
    anchors: Option<usize>,
    /// Exit 4 if more than this fraction of anchors is unattainable
    #[arg(long)]
    max_fail_frac: Option<f64>,
}

#[derive(Args, Clone)]
struct SweepArgs {
    #[command(flatten)]
    ens: EnsembleArgs,
    /// Comma-separated delta values
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
}

#[derive(Args, Clone)]
struct FpArgs {
    #[command(flatten)]
    ens: EnsembleArgs,
    #[command(flatten)]
    ch: ChannelArgs,
    /// Channel entropy at which to run forward DE
    #[arg(long)]
    entropy: Option<f64>,
    /// Update schedule: parallel, round-robin or random
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

/// key=value file, '#' comments. Flags always win.
struct Config(BTreeMap<String, String>);

impl Config {
    fn load(path: Option<&Path>) -> Result<Config, Error> {
        let mut map = BTreeMap::new();
        if let Some(p) = path {
            for (ln, line) in fs::read_to_string(p)?.lines().enumerate() {
                let line = line.split('#').next().unwrap().trim();
                if line.is_empty() {
                    continue;
                }
                let (key, val) = line
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("{}:{}: expected key=value", p.display(), ln + 1)))?;
                map.insert(key.trim().to_string(), val.trim().to_string());
            }
        }
        Ok(Config(map))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, Error> {
        match self.0.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("config key {key}: bad value {s:?}"))),
        }
    }

    fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>, Error> {
        match self.0.get(key) {
            None => Ok(None),
            Some(s) => s
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map(Some)
                .map_err(|_| Error::Parse(format!("config key {key}: bad list {s:?}"))),
        }
    }
}

/// Fully resolved parameters, also serialized into the manifest.
#[derive(Serialize)]
struct Params {
    l: u32,
    r: u32,
    topology: String,
    big_l: usize,
    w: usize,
    k: usize,
    kappa: Vec<f64>,
    alpha: f64,
    family: String,
    llr_max: f64,
    bins: usize,
    tol: f64,
    max_iters: usize,
    bisect_tol: f64,
    anchors: usize,
    max_fail_frac: f64,
    deltas: Vec<f64>,
    entropy: f64,
    schedule: String,
    seed: u64,
    threads: usize,
}

impl Params {
    fn resolve(ens: &EnsembleArgs, ch: Option<&ChannelArgs>, cfg: &Config) -> Result<Params, Error> {
        let circular = ens.circular || cfg.get::<bool>("circular")?.unwrap_or(false);
        let one_sided = ens.one_sided || cfg.get::<bool>("one_sided")?.unwrap_or(false);
        let big_l = ens.big_l.or(cfg.get("L")?);
        let coupled = ens.coupled || big_l.is_some() || cfg.get::<bool>("coupled")?.unwrap_or(false);
        let family = match ch {
            Some(c) if c.bawgn => "bawgn",
            Some(c) if c.bsc => "bsc",
            Some(c) if c.bec => "bec",
            _ => match cfg.0.get("family").map(|s| s.as_str()) {
                Some("bawgn") => "bawgn",
                Some("bsc") => "bsc",
                _ => "bec",
            },
        };
        let topology = if circular {
            "circular"
        } else if one_sided {
            "one-sided"
        } else if coupled {
            "line"
        } else {
            "uncoupled"
        };
        Ok(Params {
            l: ens.l.or(cfg.get("l")?).unwrap_or(3),
            r: ens.r.or(cfg.get("r")?).unwrap_or(6),
            topology: topology.into(),
            big_l: big_l.unwrap_or(16),
            w: ens.w.or(cfg.get("w")?).unwrap_or(if coupled || circular || one_sided { 3 } else { 1 }),
            k: ens.k.or(cfg.get("K")?).unwrap_or(25),
            kappa: ens.kappa.clone().or(cfg.get_list("kappa")?).unwrap_or_default(),
            alpha: ens.alpha.or(cfg.get("alpha")?).unwrap_or(0.0),
            family: family.into(),
            llr_max: ch.and_then(|c| c.llr_max).or(cfg.get("llr_max")?).unwrap_or(25.0),
            bins: ch.and_then(|c| c.bins).or(cfg.get("bins")?).unwrap_or(2048),
            tol: ch.and_then(|c| c.tol).or(cfg.get("tol")?).unwrap_or(1e-9),
            max_iters: ch.and_then(|c| c.max_iters).or(cfg.get("max_iters")?).unwrap_or(2000),
            bisect_tol: cfg.get("bisect_tol")?.unwrap_or(1e-3),
            anchors: cfg.get("anchors")?.unwrap_or(200),
            max_fail_frac: cfg.get("max_fail_frac")?.unwrap_or(0.5),
            deltas: cfg.get_list("deltas")?.unwrap_or_default(),
            entropy: cfg.get("entropy")?.unwrap_or(0.5),
            schedule: cfg.0.get("schedule").cloned().unwrap_or_else(|| "parallel".into()),
            seed: cfg.get("seed")?.unwrap_or(0),
            threads: cfg.get("threads")?.unwrap_or(0),
        })
    }

    fn spec(&self) -> Result<CoupledSpec, Error> {
        match self.topology.as_str() {
            "circular" => {
                let kappa = if self.kappa.is_empty() {
                    None
                } else {
                    let mut v = vec![0.0; self.k];
                    for (i, &x) in self.kappa.iter().enumerate() {
                        if i >= self.k {
                            return Err(Error::InvalidSpec("more kappa values than positions".into()));
                        }
                        v[i] = x;
                    }
                    Some(v)
                };
                CoupledSpec::circular(self.l, self.r, self.k, self.w, kappa)
            }
            "one-sided" => CoupledSpec::one_sided(self.l, self.r, self.k, self.w, self.alpha),
            "line" => CoupledSpec::line(self.l, self.r, self.big_l, self.w),
            _ => CoupledSpec::uncoupled(self.l, self.r),
        }
    }

    fn family(&self) -> ChannelFamily {
        match self.family.as_str() {
            "bawgn" => ChannelFamily::Bawgn,
            "bsc" => ChannelFamily::Bsc,
            _ => ChannelFamily::Bec,
        }
    }

    fn grid(&self) -> Result<GridSpec, Error> {
        GridSpec::new(self.llr_max, self.bins)
    }

    fn stop(&self) -> StopRule {
        StopRule { tol_b: self.tol, max_iters: self.max_iters }
    }
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    version: String,
    params: Params,
    wall_time_ms: u64,
    outputs: BTreeMap<String, String>,
}

struct Run {
    out_dir: PathBuf,
    started: Instant,
    outputs: BTreeMap<String, String>,
}

impl Run {
    fn new(out_dir: &Path) -> Result<Run, Error> {
        fs::create_dir_all(out_dir)?;
        Ok(Run { out_dir: out_dir.to_path_buf(), started: Instant::now(), outputs: BTreeMap::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), Error> {
        fs::write(self.out_dir.join(name), contents)?;
        self.outputs.insert(name.to_string(), format!("{:x}", Sha256::digest(contents.as_bytes())));
        Ok(())
    }

    /// Space-separated gnuplot variant of a CSV (header becomes a comment).
    fn write_dat(&mut self, name: &str, csv: &str) -> Result<(), Error> {
        let mut s = String::new();
        for (i, line) in csv.lines().enumerate() {
            if i == 0 {
                s.push_str(&format!("# {}\n", line.replace(',', " ")));
            } else {
                s.push_str(&line.replace(',', " "));
                s.push('\n');
            }
        }
        self.write(name, &s)
    }

    fn finish(self, command: &str, params: Params) -> Result<(), Error> {
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            params,
            wall_time_ms: self.started.elapsed().as_millis() as u64,
            outputs: self.outputs,
        };
        let text = toml::to_string_pretty(&manifest)
            .map_err(|e| Error::Parse(format!("manifest serialization: {e}")))?;
        fs::write(self.out_dir.join("manifest.toml"), text)?;
        Ok(())
    }
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NoBracket(_) | Error::AnchorUnattainable(_) | Error::AreaShortfall { .. } => 3,
                _ => 2,
            }
        }
    });
}

fn run(cli: Cli) -> Result<i32, Error> {
    let cfg = Config::load(cli.config.as_deref())?;
    let threads = cli.threads.or(cfg.get("threads")?);
    if let Some(n) = threads {
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::InvalidParam(format!("--threads: {e}")))?;
        }
    }
    let mut run = Run::new(&cli.out)?;

    match &cli.command {
        Command::Rate(ens) => {
            let mut p = Params::resolve(ens, None, &cfg)?;
            p.threads = threads.unwrap_or(0);
            let rate = design_rate(&p.spec()?)?;
            println!("{rate:.6}");
            run.write("rate.txt", &format!("{rate:.6}\n"))?;
            run.finish("rate", p)?;
        }
        Command::Threshold(args) => {
            let mut p = Params::resolve(&args.ens, Some(&args.ch), &cfg)?;
            p.threads = threads.unwrap_or(0);
            p.bisect_tol = args.bisect_tol.or(cfg.get("bisect_tol")?).unwrap_or(match p.family() {
                ChannelFamily::Bec => 1e-5,
                _ => 1e-3,
            });
            let spec = p.spec()?;
            let (value, entropy) = match p.family() {
                ChannelFamily::Bec => {
                    let eps = bec_bp_threshold(&spec, None, p.bisect_tol)?;
                    (eps, eps)
                }
                fam => {
                    let ch = bp_threshold(fam, &spec, p.grid()?, p.bisect_tol, p.stop())?;
                    (ch.value, ch.entropy())
                }
            };
            println!("{value:.6}");
            run.write(
                "threshold.txt",
                &format!("family,{}\nparameter,{value:.6}\nentropy,{entropy:.6}\n", p.family),
            )?;
            run.finish("threshold", p)?;
        }
        Command::Ebp(args) | Command::Maxwell(args) => {
            let is_maxwell = matches!(cli.command, Command::Maxwell(_));
            let mut p = Params::resolve(&args.ens, Some(&args.ch), &cfg)?;
            p.threads = threads.unwrap_or(0);
            p.anchors = args.anchors.or(cfg.get("anchors")?).unwrap_or(200);
            p.max_fail_frac = args.max_fail_frac.or(cfg.get("max_fail_frac")?).unwrap_or(0.5);
            let spec = p.spec()?;
            let anchors = default_anchors(p.anchors);
            let curve = trace_ebp(p.family(), &spec, p.grid()?, &anchors)?;
            let missing = 1.0 - (curve.points.len().saturating_sub(1)) as f64 / p.anchors as f64;
            let max_fail_frac = p.max_fail_frac;
            let csv = curve.to_csv_string();
            run.write("ebp_curve.csv", &csv)?;
            run.write_dat("ebp_curve.dat", &csv)?;
            if is_maxwell {
                let rate = design_rate(&spec)?;
                let bound = maxwell_bound(&curve, rate)?;
                println!("{bound:.6}");
                run.write(
                    "maxwell.txt",
                    &format!("design_rate,{rate:.6}\nbound,{bound:.6}\ncurve_area,{:.6}\n", curve_area(&curve)),
                )?;
                run.finish("maxwell", p)?;
            } else {
                println!("{} points", curve.points.len());
                run.finish("ebp", p)?;
            }
            if missing > max_fail_frac {
                eprintln!("warning: {:.0}% of anchors unattainable", missing * 100.0);
                return Ok(4);
            }
        }
        Command::Sweep(args) => {
            let mut p = Params::resolve(&args.ens, None, &cfg)?;
            p.threads = threads.unwrap_or(0);
            p.topology = "circular".into();
            p.deltas = args
                .deltas
                .clone()
                .or(cfg.get_list("deltas")?)
                .unwrap_or_else(|| (1..=8).map(|i| 0.05 * i as f64).collect());
            let points = rateloss_sweep(p.l, p.r, p.k, p.w, &p.deltas);
            let failed = points.iter().filter(|q| !q.converged).count();
            let csv = sweep_csv(&points, p.w, p.k);
            print!("{csv}");
            run.write("sweep.csv", &csv)?;
            run.write_dat("sweep.dat", &csv)?;
            run.finish("sweep", p)?;
            if failed * 2 > points.len() {
                return Ok(4);
            }
        }
        Command::Fp(args) => {
            let mut p = Params::resolve(&args.ens, Some(&args.ch), &cfg)?;
            p.threads = threads.unwrap_or(0);
            p.entropy = args.entropy.or(cfg.get("entropy")?).unwrap_or(0.5);
            p.schedule = args.schedule.clone().or(cfg.0.get("schedule").cloned()).unwrap_or_else(|| "parallel".into());
            p.seed = args.seed.or(cfg.get("seed")?).unwrap_or(0);
            let spec = p.spec()?;
            let schedule = match p.schedule.as_str() {
                "parallel" => ScheduleSpec::Parallel,
                "round-robin" => ScheduleSpec::RoundRobin,
                "random" => ScheduleSpec::Random { seed: p.seed },
                other => return Err(Error::InvalidParam(format!("unknown schedule {other}"))),
            };
            let ch = ChannelParam::from_entropy(p.family(), p.entropy)?;
            let grid = p.grid()?;
            let (x, report) = run_forward_de(&ch.density(grid), &spec, schedule, p.stop())?;
            let point = EbpPoint {
                anchor: x.avg_entropy(),
                param: ch,
                h_channel: p.entropy,
                g_value: f64::NAN,
                residual: 0.0,
                fp_summary: x.entropies(),
            };
            let prof = fp_profile_report(&point, &spec, grid)?;
            let csv = prof.to_csv_string();
            run.write("fp_profile.csv", &csv)?;
            run.write_dat("fp_profile.dat", &csv)?;
            run.write("fp_trace.csv", &report.to_csv_string())?;
            println!(
                "stop={:?} iters={} unimodal={} middle={:.6} uncoupled_gap={:.3e}",
                report.stop_reason, report.iterations, prof.unimodal, prof.middle_entropy, prof.uncoupled_gap
            );
            run.finish("fp", p)?;
        }
    }
    Ok(0)
}
