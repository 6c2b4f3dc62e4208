//! `afarey`: command-line front end for the alpha-farey library.
//!
//! Every run echoes its fully resolved configuration alongside the result.
//! Exit codes: 0 success, 2 input error, 3 hypothesis violation (e.g. a
//! classification over the dyadic partition, or a level outside (s_-, s_+)).

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use alpha_farey::experiments::{
    level_set_census, singularity_experiment, spectrum_sweep, CensusEntry, ExperimentReport,
};
use alpha_farey::{
    alpha_rational_factor, check_conjugacy, classify_empirical, classify_finite,
    classify_oscillating, classify_periodic, conjugate_between, farey_map, free_energy_t,
    free_energy_v, legendre_sigma, luroth_digits, luroth_digits_exact, luroth_map, luroth_value,
    luroth_value_exact, lyapunov_cycle, lyapunov_farey, m_set, parse_real, partition_sum,
    pvb_threshold, s_range, tent, theorem_dimensions, theta, theta_at, theta_inverse,
    DerivativeVerdict, Error, LurothDigits, Partition, SumOutcome,
};

const LN2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Plain,
}

#[derive(Parser)]
#[command(name = "afarey", version, about = "alpha-Luroth / alpha-Farey systems: codecs, conjugacies, derivative classification and dimension spectra")]
struct Cli {
    /// Partition spec: `dyadic` | `harmonic` | `geometric:<tau>` | `powerlaw:<tau>` | `custom:<path>`
    #[arg(short = 'p', long, global = true, default_value = "harmonic")]
    partition: String,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Accept and emit levels in bits (divide nats by log 2)
    #[arg(long, global = true)]
    bits: bool,

    /// Digit extraction / tree descent depth
    #[arg(long, global = true, default_value_t = 24)]
    depth: u32,

    /// Target tolerance for certified series evaluations
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol: f64,

    /// RNG seed for experiments
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Partition interrogation
    Partition {
        #[command(subcommand)]
        sub: PartitionCmd,
    },
    /// Digit expansion of a point x
    Expand {
        #[arg(short = 'x')]
        x: String,
    },
    /// Value of a digit string, with certified error bound
    Value {
        #[arg(short = 'd', long)]
        digits: String,
    },
    /// Conjugacy map theta at a digit string or point
    Theta {
        #[arg(short = 'd', long)]
        digits: Option<String>,
        #[arg(short = 'x', conflicts_with = "digits")]
        x: Option<String>,
    },
    /// Invert theta by cylinder-tree descent
    ThetaInv {
        #[arg(short = 'x')]
        x: String,
    },
    /// Orbit of a point under a map
    Orbit {
        #[arg(short = 'x')]
        x: String,
        #[arg(long, default_value_t = 20)]
        steps: u32,
        #[arg(long, value_enum, default_value_t = MapKind::Farey)]
        map: MapKind,
    },
    /// Lyapunov exponent along a Farey orbit
    Lyapunov {
        #[arg(short = 'd', long)]
        digits: String,
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
    },
    /// Classify theta'(x): periodic digits, finite digits, oscillating blocks,
    /// or an empirical finite-data rule
    Classify {
        #[arg(short = 'd', long)]
        digits: Option<String>,
        /// Two block digits "a,b" for the oscillating construction
        #[arg(long, conflicts_with = "digits")]
        blocks: Option<String>,
        #[arg(long, default_value_t = 10.0)]
        run_growth: f64,
        /// Use the finite-data rule on the running level sequence
        #[arg(long)]
        empirical: bool,
        #[arg(long, default_value_t = 400)]
        n_max: u64,
        #[arg(long, default_value_t = 0.05)]
        margin: f64,
    },
    /// Dimension spectrum: a single level or a grid sweep
    Spectrum {
        /// Level s (nats unless --bits)
        #[arg(long)]
        s: Option<f64>,
        /// Grid "lo:hi:n" (levels; nats unless --bits); default: 21 interior points
        #[arg(long, conflicts_with = "s")]
        grid: Option<String>,
    },
    /// Hausdorff dimensions of the derivative sets
    Dims,
    /// Max residual of theta o F = T o theta along an orbit
    VerifyConjugacy {
        #[arg(short = 'd', long)]
        digits: String,
        #[arg(long, default_value_t = 20)]
        steps: u64,
    },
    /// Reproducible experiments emitting JSON + CSV reports
    Experiment {
        #[command(subcommand)]
        which: ExperimentCmd,
    },
    /// Cross-partition conjugacy theta_dst^{-1} o theta_src
    Convert {
        /// Destination partition spec
        #[arg(long)]
        to: String,
        #[arg(short = 'd', long)]
        digits: String,
    },
    /// Pressure sum over the partition with certified tail bound
    PartitionSum {
        #[arg(short = 'u', long)]
        u: f64,
        #[arg(short = 'r', long, default_value_t = 0.0)]
        r: f64,
    },
    /// Free energy v(u), or its dual t(v) when --v is given
    FreeEnergy {
        #[arg(long)]
        u: Option<f64>,
        #[arg(long, conflicts_with = "u")]
        v: Option<f64>,
    },
    /// Digit-frequency threshold K(tau) of the untwisted conjugacy
    PvbThreshold {
        #[arg(long)]
        tau: f64,
    },
}

#[derive(Subcommand)]
enum PartitionCmd {
    /// Classification, level range, tail factor and M set
    Info,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MapKind {
    Luroth,
    Farey,
    Tent,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Lebesgue-typical drift of the cylinder mass ratio
    Singularity {
        #[arg(long, default_value_t = 200)]
        samples: u32,
        #[arg(long, default_value_t = 300)]
        levels: u64,
        #[arg(long, default_value_t = 0.5)]
        margin: f64,
        #[arg(long, default_value_t = 0.95)]
        required_fraction: f64,
        #[arg(long)]
        out_dir: Option<std::path::PathBuf>,
    },
    /// Spectrum curve over an interior level grid
    Sweep {
        #[arg(long, default_value_t = 21)]
        points: u32,
        #[arg(long)]
        out_dir: Option<std::path::PathBuf>,
    },
    /// Level-set census of constructed digit families
    Census {
        /// Semicolon-separated digit strings or `osc:a,b[,growth]`
        #[arg(long, default_value = "[(2)];[(5)];[(1)];osc:5,2,10")]
        entries: String,
        #[arg(long)]
        out_dir: Option<std::path::PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = json!({
                "error": e.to_string(),
                "hypothesis_violation": e.is_hypothesis_violation(),
            });
            eprintln!("{payload}");
            if e.is_hypothesis_violation() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn level_out(cli: &Cli, nats: f64) -> f64 {
    if cli.bits {
        nats / LN2
    } else {
        nats
    }
}

fn level_in(cli: &Cli, level: f64) -> f64 {
    if cli.bits {
        level * LN2
    } else {
        level
    }
}

fn config_json(cli: &Cli, p: &Partition) -> Value {
    json!({
        "partition": p.spec_string(),
        "format": format!("{:?}", cli.format).to_lowercase(),
        "bits": cli.bits,
        "depth": cli.depth,
        "tol": cli.tol,
        "seed": cli.seed,
        "argv": std::env::args().skip(1).collect::<Vec<_>>(),
    })
}

fn emit(cli: &Cli, p: &Partition, result: Value, csv: Option<String>, plain: Vec<String>) -> Result<(), Error> {
    match cli.format {
        Format::Json => {
            let out = json!({ "config": config_json(cli, p), "result": result });
            println!("{}", serde_json::to_string_pretty(&out).expect("json output"));
        }
        Format::Csv => {
            let table = csv.ok_or_else(|| {
                Error::Precondition("csv output is not available for this command".into())
            })?;
            print!("{table}");
        }
        Format::Plain => {
            println!("# partition {}", p.spec_string());
            for line in plain {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn parse_digits(s: &str) -> Result<LurothDigits, Error> {
    LurothDigits::parse(s)
}

/// Digits of a point string: exact rational extraction when both the input
/// and the partition allow it, float extraction otherwise.
fn digits_of_point(p: &Partition, s: &str, depth: u32) -> Result<LurothDigits, Error> {
    let parsed = parse_real(s)?;
    match (&parsed.exact, p.has_exact_tails()) {
        (Some(x), true) => luroth_digits_exact(p, x, depth as usize),
        _ => luroth_digits(p, parsed.value, (depth as usize).min(alpha_farey::codec::FLOAT_DEPTH_CAP)),
    }
}

fn verdict_json(cli: &Cli, v: &DerivativeVerdict) -> Value {
    json!({
        "verdict": v.verdict,
        "rule": v.rule,
        "s_liminf": level_out(cli, v.s_liminf),
        "s_limsup": level_out(cli, v.s_limsup),
        "n_used": v.n_used,
        "note": v.note,
        "evidence": v.evidence.iter().map(|e| json!({"n": e.n, "log_ratio": e.log_ratio})).collect::<Vec<_>>(),
    })
}

fn experiment_output(
    cli: &Cli,
    p: &Partition,
    rep: &ExperimentReport,
    out_dir: &Option<std::path::PathBuf>,
) -> Result<(), Error> {
    let mut written = Vec::new();
    if let Some(dir) = out_dir {
        let (j, c) = rep.write_files(dir)?;
        written.push(j.display().to_string());
        written.push(c.display().to_string());
    }
    let mut result = serde_json::to_value(rep).expect("report json");
    if !written.is_empty() {
        result["files"] = json!(written);
    }
    let plain = vec![
        format!("experiment {} on {}: pass = {}", rep.name, rep.partition, rep.pass),
        serde_json::to_string(&rep.summary).expect("summary json"),
    ];
    emit(cli, p, result, Some(rep.to_csv()), plain)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let p = Partition::from_spec(&cli.partition)?;
    match &cli.cmd {
        Cmd::Partition { sub: PartitionCmd::Info } => {
            let c = p.classify();
            let r = s_range(&p);
            let m = m_set(&p, 64);
            let result = json!({
                "spec": p.spec_string(),
                "horizon": p.horizon(),
                "is_dyadic": p.is_dyadic(),
                "classification": c,
                "s_range": {
                    "s_minus": level_out(cli, r.s_minus),
                    "s_plus": level_out(cli, r.s_plus),
                    "minus_attained": r.minus_attained,
                    "plus_attained": r.plus_attained,
                },
                "alpha_rational_factor": alpha_rational_factor(&p),
                "m_set": m,
                "atoms": (1..=8u64).map(|n| p.atom(n).unwrap_or(f64::NAN)).collect::<Vec<_>>(),
                "tails": (1..=8u64).map(|n| p.tail(n).unwrap_or(f64::NAN)).collect::<Vec<_>>(),
            });
            let plain = vec![
                format!("classification: {:?}, eventually decreasing from {}", c.class, c.decreasing_from),
                format!("s range: [{}, {}]", level_out(cli, r.s_minus), level_out(cli, r.s_plus)),
            ];
            emit(cli, &p, result, None, plain)
        }
        Cmd::Expand { x } => {
            let d = digits_of_point(&p, x, cli.depth)?;
            let v = luroth_value(&p, &d, cli.depth as usize)?;
            let result = json!({
                "digits": d.to_string(),
                "kind": match d {
                    LurothDigits::Finite(_) => "finite",
                    LurothDigits::EventuallyPeriodic { .. } => "eventually_periodic",
                    LurothDigits::Truncated(_) => "truncated",
                },
                "value": v.value,
                "error_bound": v.error_bound,
            });
            let plain = vec![format!("{d}")];
            emit(cli, &p, result, None, plain)
        }
        Cmd::Value { digits } => {
            let d = parse_digits(digits)?;
            let v = luroth_value(&p, &d, cli.depth as usize)?;
            let exact = luroth_value_exact(&p, &d).ok().map(|r| r.to_string());
            let result = json!({"value": v.value, "error_bound": v.error_bound, "exact": exact});
            emit(cli, &p, result, None, vec![format!("{} +- {}", v.value, v.error_bound)])
        }
        Cmd::Theta { digits, x } => {
            let t = match (digits, x) {
                (Some(ds), None) => theta(&p, &parse_digits(ds)?, cli.tol)?,
                (None, Some(xs)) => {
                    let parsed = parse_real(xs)?;
                    theta_at(&p, parsed.value, cli.depth as usize, cli.tol)?
                }
                _ => return Err(Error::Precondition("theta needs exactly one of -d or -x".into())),
            };
            let result = json!({"value": t.value, "error_bound": t.error_bound, "terms_used": t.terms_used});
            emit(cli, &p, result, None, vec![format!("theta = {} +- {}", t.value, t.error_bound)])
        }
        Cmd::ThetaInv { x } => {
            let y = parse_real(x)?.value;
            let inv = theta_inverse(&p, y, cli.depth)?;
            let result = json!({
                "word": inv.word.to_string(),
                "interval": {
                    "left": inv.interval.left,
                    "right": inv.interval.right,
                    "level": inv.interval.level,
                    "log_lambda": inv.interval.log_lambda,
                    "log_mu": inv.interval.log_mu,
                },
                "theta_lo": inv.theta_lo,
                "theta_hi": inv.theta_hi,
            });
            let plain = vec![format!(
                "word {} brackets theta^-1({y}) in [{}, {}]",
                inv.word, inv.interval.left, inv.interval.right
            )];
            emit(cli, &p, result, None, plain)
        }
        Cmd::Orbit { x, steps, map } => {
            let x0 = parse_real(x)?.value;
            if !(0.0..=1.0).contains(&x0) {
                return Err(Error::OutOfDomain { value: x0, domain: "[0, 1]" });
            }
            let mut cur = x0;
            let mut rows = vec![(0u32, cur)];
            for n in 1..=*steps {
                cur = match map {
                    MapKind::Luroth => luroth_map(&p, cur)?,
                    MapKind::Farey => farey_map(&p, cur)?,
                    MapKind::Tent => tent(cur),
                };
                rows.push((n, cur));
            }
            let result = json!({
                "map": format!("{map:?}").to_lowercase(),
                "orbit": rows.iter().map(|(n, v)| json!({"n": n, "x": v})).collect::<Vec<_>>(),
            });
            let mut csv = String::from("n,x\n");
            for (n, v) in &rows {
                csv.push_str(&format!("{n},{v}\n"));
            }
            let plain = rows.iter().map(|(n, v)| format!("{n} {v}")).collect();
            emit(cli, &p, result, Some(csv), plain)
        }
        Cmd::Lyapunov { digits, steps } => {
            let d = parse_digits(digits)?;
            let estimate = lyapunov_farey(&p, &d, *steps)?;
            let exact = lyapunov_cycle(&p, &d).ok();
            let result = json!({
                "estimate": level_out(cli, estimate),
                "n_steps": steps,
                "exact_cycle": exact.map(|v| level_out(cli, v)),
                "units": if cli.bits { "bits" } else { "nats" },
            });
            emit(cli, &p, result, None, vec![format!("Lyapunov estimate {}", level_out(cli, estimate))])
        }
        Cmd::Classify { digits, blocks, run_growth, empirical, n_max, margin } => {
            let v = if let Some(bl) = blocks {
                let parts: Vec<&str> = bl.split(',').collect();
                if parts.len() != 2 {
                    return Err(Error::Parse(format!("--blocks needs `a,b`, got `{bl}`")));
                }
                let a: u64 = parts[0].trim().parse().map_err(|_| Error::Parse("bad block digit".into()))?;
                let b: u64 = parts[1].trim().parse().map_err(|_| Error::Parse("bad block digit".into()))?;
                classify_oscillating(&p, a, b, *run_growth)?
            } else {
                let ds = digits.as_ref().ok_or_else(|| {
                    Error::Precondition("classify needs -d digits or --blocks a,b".into())
                })?;
                let d = parse_digits(ds)?;
                if *empirical {
                    classify_empirical(&p, &d, *n_max, *margin)?
                } else {
                    match d {
                        LurothDigits::Finite(_) => classify_finite(&p, &d)?,
                        LurothDigits::EventuallyPeriodic { .. } => classify_periodic(&p, &d)?,
                        LurothDigits::Truncated(_) => classify_empirical(&p, &d, *n_max, *margin)?,
                    }
                }
            };
            let plain = vec![format!(
                "verdict {:?} (rule {:?}), s in [{}, {}]",
                v.verdict,
                v.rule,
                level_out(cli, v.s_liminf),
                level_out(cli, v.s_limsup)
            )];
            emit(cli, &p, verdict_json(cli, &v), None, plain)
        }
        Cmd::Spectrum { s, grid } => {
            if let Some(level) = s {
                let pt = legendre_sigma(&p, level_in(cli, *level))?;
                let result = json!({
                    "s": level_out(cli, pt.s),
                    "u_star": pt.u_star,
                    "v": pt.v_at_u,
                    "sigma": pt.sigma,
                    "boundary_branch": pt.boundary_branch,
                    "solver_tol": 1e-10,
                });
                return emit(cli, &p, result, None, vec![format!("sigma({level}) = {}", pt.sigma)]);
            }
            let grid_values: Vec<f64> = match grid {
                Some(spec) => {
                    let parts: Vec<&str> = spec.split(':').collect();
                    if parts.len() != 3 {
                        return Err(Error::Parse(format!("--grid needs `lo:hi:n`, got `{spec}`")));
                    }
                    let lo = level_in(cli, parts[0].parse().map_err(|_| Error::Parse("bad grid lo".into()))?);
                    let hi = level_in(cli, parts[1].parse().map_err(|_| Error::Parse("bad grid hi".into()))?);
                    let n: usize = parts[2].parse().map_err(|_| Error::Parse("bad grid n".into()))?;
                    if n < 2 || hi.is_nan() || lo.is_nan() || hi <= lo {
                        return Err(Error::Parse("grid needs hi > lo and n >= 2".into()));
                    }
                    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
                }
                None => {
                    let r = s_range(&p);
                    let w = r.s_plus - r.s_minus;
                    (0..21).map(|i| r.s_minus + w * (i as f64 + 0.5) / 21.0).collect()
                }
            };
            let rep = spectrum_sweep(&p, &grid_values)?;
            let result = serde_json::to_value(&rep).expect("report json");
            let plain = vec![serde_json::to_string(&rep.summary).expect("summary json")];
            emit(cli, &p, result, Some(rep.to_csv()), plain)
        }
        Cmd::Dims => {
            let dims = theorem_dimensions(&p)?;
            let result = json!({
                "dim_theta_inf": dims.dim_theta_inf,
                "dim_theta_sim": dims.dim_theta_sim,
                "dim_theta_0": dims.dim_theta_0,
                "at_log2": {
                    "s": level_out(cli, dims.at_log2.s),
                    "u_star": dims.at_log2.u_star,
                    "v": dims.at_log2.v_at_u,
                    "sigma": dims.at_log2.sigma,
                },
                "solver_tol": 1e-10,
            });
            let plain = vec![format!(
                "dim Theta_inf = dim Theta_sim = {} < dim Theta_0 = 1",
                dims.dim_theta_inf
            )];
            emit(cli, &p, result, None, plain)
        }
        Cmd::VerifyConjugacy { digits, steps } => {
            let d = parse_digits(digits)?;
            let residual = check_conjugacy(&p, &d, *steps)?;
            let result = json!({"max_residual": residual, "n_steps": steps, "series_tol": 1e-12});
            emit(cli, &p, result, None, vec![format!("max residual {residual:e} over {steps} steps")])
        }
        Cmd::Experiment { which } => match which {
            ExperimentCmd::Singularity { samples, levels, margin, required_fraction, out_dir } => {
                let rep = singularity_experiment(&p, *samples, *levels, cli.seed, *margin, *required_fraction)?;
                experiment_output(cli, &p, &rep, out_dir)
            }
            ExperimentCmd::Sweep { points, out_dir } => {
                let r = s_range(&p);
                let w = r.s_plus - r.s_minus;
                let n = (*points).max(2);
                let grid: Vec<f64> =
                    (0..n).map(|i| r.s_minus + w * (i as f64 + 0.5) / n as f64).collect();
                let rep = spectrum_sweep(&p, &grid)?;
                experiment_output(cli, &p, &rep, out_dir)
            }
            ExperimentCmd::Census { entries, out_dir } => {
                let mut parsed = Vec::new();
                for part in entries.split(';').filter(|s| !s.trim().is_empty()) {
                    let part = part.trim();
                    if let Some(rest) = part.strip_prefix("osc:") {
                        let nums: Vec<&str> = rest.split(',').collect();
                        if nums.len() < 2 || nums.len() > 3 {
                            return Err(Error::Parse(format!("bad census entry `{part}`")));
                        }
                        let low: u64 = nums[0].trim().parse().map_err(|_| Error::Parse("bad osc digit".into()))?;
                        let high: u64 = nums[1].trim().parse().map_err(|_| Error::Parse("bad osc digit".into()))?;
                        let growth: f64 = if nums.len() == 3 {
                            nums[2].trim().parse().map_err(|_| Error::Parse("bad osc growth".into()))?
                        } else {
                            10.0
                        };
                        parsed.push(CensusEntry::Oscillating { low, high, growth });
                    } else {
                        parsed.push(CensusEntry::Periodic(parse_digits(part)?));
                    }
                }
                let rep = level_set_census(&p, &parsed)?;
                experiment_output(cli, &p, &rep, out_dir)
            }
        },
        Cmd::Convert { to, digits } => {
            let p_dst = Partition::from_spec(to)?;
            let d = parse_digits(digits)?;
            let x = conjugate_between(&p, &p_dst, &d, cli.depth)?;
            let tol = (1.0 - cli.depth as f64).exp2();
            let result = json!({
                "value": x,
                "to": p_dst.spec_string(),
                "theta_tolerance": tol,
            });
            emit(cli, &p, result, None, vec![format!("{x} (theta matched within {tol:e})")])
        }
        Cmd::PartitionSum { u, r } => {
            let out = partition_sum(&p, *u, *r, cli.tol)?;
            let result = match out {
                SumOutcome::Converged { value, tail_bound, terms } => {
                    json!({"outcome": "converged", "value": value, "tail_bound": tail_bound, "terms": terms})
                }
                SumOutcome::Divergent => json!({"outcome": "divergent"}),
            };
            let line = result.to_string();
            emit(cli, &p, result, None, vec![line])
        }
        Cmd::FreeEnergy { u, v } => {
            let (label, fe) = match (u, v) {
                (Some(u), None) => ("v(u)", free_energy_v(&p, *u)?),
                (None, Some(v)) => ("t(v)", free_energy_t(&p, *v)?),
                _ => return Err(Error::Precondition("free-energy needs exactly one of --u or --v".into())),
            };
            let result = json!({
                "which": label,
                "value": fe.value,
                "boundary_branch": fe.boundary_branch,
                "bisection_tol": 1e-12,
            });
            emit(cli, &p, result, None, vec![format!("{label} = {}", fe.value)])
        }
        Cmd::PvbThreshold { tau } => {
            let k = pvb_threshold(*tau)?;
            let result = json!({"tau": tau, "k": k});
            emit(cli, &p, result, None, vec![format!("K({tau}) = {k}")])
        }
    }
}
