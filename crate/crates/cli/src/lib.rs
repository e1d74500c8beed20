//! Command-line front end: argument definitions, dispatch and output.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cocycle_core::measures::AscentOptions;
use cocycle_core::typicality::DEFAULT_TOL;
use cocycle_core::{
    check_dominated, check_typical, estimate_omega, load_cocycle, lyapunov_vector, parse_real_list,
    parse_usize_list, pressure_bracket, pressure_grid, search_homoclinic, BernoulliMeasure,
    DominationMode, DominationVerdict, EnumConfig, Error, ExponentVector, Family, HomoclinicSpec,
    MarkovMeasure, Measure, OneStepCocycle, PressureEstimate, SearchOutcome, SpectrumPoint,
    SpectrumSolver, TypicalityVerdict, Word,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cocycle", version, about = "Pressure, Lyapunov spectra and typicality checks for matrix cocycles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Cocycle file: {"d": .., "k": .., "matrices": [...]}
    #[arg(long, global = true, value_name = "FILE")]
    pub cocycle: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Bit-identical results for any worker count
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[arg(long, global = true, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Bernoulli,
    Markov,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Finite-depth pressure P_n(q); repeat --q for a grid
    Pressure {
        #[arg(long, required = true, allow_hyphen_values = true)]
        q: Vec<String>,
        #[arg(long, conflicts_with = "depths")]
        depth: Option<usize>,
        /// Several depths: adds Fekete brackets and the Cauchy gap
        #[arg(long)]
        depths: Option<String>,
    },
    /// Legendre spectrum S_n(alpha); repeat --alpha for a curve
    Spectrum {
        #[arg(long, required = true, allow_hyphen_values = true)]
        alpha: Vec<String>,
        #[arg(long)]
        depth: usize,
        /// Starting point of the minimization
        #[arg(long, allow_hyphen_values = true)]
        q: Option<String>,
    },
    /// Lyapunov vector of a Bernoulli or Markov measure
    Lyapunov {
        /// Bernoulli weights, or Markov transition rows flattened row by row
        #[arg(long)]
        measure: Option<String>,
        #[arg(long, value_enum, default_value_t = FamilyArg::Bernoulli)]
        family: FamilyArg,
        #[arg(long, default_value_t = 1)]
        memory: usize,
        #[arg(long)]
        depth: usize,
    },
    /// Exponent range from pressure gradients
    Omega {
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 8.0)]
        probe_radius: f64,
        #[arg(long, default_value_t = 32)]
        probe_count: usize,
    },
    /// Typicality along a homoclinic orbit, given or searched for
    CheckTypical {
        /// Periodic word, e.g. 12 or 1,2
        #[arg(long, requires = "bridge")]
        periodic: Option<String>,
        #[arg(long, requires = "periodic")]
        bridge: Option<String>,
        #[arg(long, default_value_t = 2)]
        max_period: usize,
        #[arg(long, default_value_t = 3)]
        max_bridge: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Decay of the singular value ratio sigma_{i+1}/sigma_i
    CheckDominated {
        #[arg(long, default_value_t = 1)]
        index: usize,
        /// Word lengths, e.g. 1..12 or 4,8,12
        #[arg(long, default_value = "1..12")]
        depths: String,
        /// Sample random words instead of enumerating all of them
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Best entropy plus exponent term over a measure family
    Crosscheck {
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        #[arg(long)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = FamilyArg::Bernoulli)]
        family: FamilyArg,
        #[arg(long, default_value_t = 1)]
        memory: usize,
    },
}

/// Failure of a run, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Budget { .. } => EXIT_BUDGET,
            Error::Input(_) | Error::Domain(_) | Error::Parse { .. } | Error::Validation(_) => EXIT_INVALID,
            Error::Numeric(_) => EXIT_FAILURE,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_FAILURE, message: e.to_string() }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_INVALID, message: message.into() }
}

fn vector_of_len(text: &str, d: usize, what: &str) -> Result<Vec<f64>, Failure> {
    let v = parse_real_list(text)?;
    if v.len() != d {
        return Err(invalid(format!("{what} '{text}' has {} entries, expected d = {d}", v.len())));
    }
    Ok(v)
}

fn depth_ok(n: usize) -> Result<usize, Failure> {
    if n == 0 {
        return Err(invalid("depth must be at least 1"));
    }
    Ok(n)
}

fn measure_from(
    cocycle: &OneStepCocycle,
    text: Option<&str>,
    family: FamilyArg,
    memory: usize,
) -> Result<Measure, Failure> {
    let k = cocycle.k();
    match family {
        FamilyArg::Bernoulli => match text {
            None => Ok(BernoulliMeasure::uniform(k).into()),
            Some(t) => Ok(BernoulliMeasure::new(parse_real_list(t)?)?.into()),
        },
        FamilyArg::Markov => {
            let Some(t) = text else {
                return Err(invalid("--family markov needs --measure with the transition rows"));
            };
            let flat = parse_real_list(t)?;
            if flat.len() % k != 0 {
                return Err(invalid(format!("{} transition entries do not split into rows of {k}", flat.len())));
            }
            let rows: Vec<Vec<f64>> = flat.chunks(k).map(<[f64]>::to_vec).collect();
            Ok(MarkovMeasure::new(k, memory, &rows)?.into())
        }
    }
}

fn family_from(family: FamilyArg, memory: usize) -> Family {
    match family {
        FamilyArg::Bernoulli => Family::Bernoulli,
        FamilyArg::Markov => Family::Markov { memory },
    }
}

#[derive(Serialize)]
struct LyapunovRecord<'a> {
    depth: usize,
    measure: &'a Measure,
    exponents: ExponentVector,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn numbered(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |i| format!("{prefix}_{i}"))
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn write(&self, out: &mut Vec<u8>) -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).map_err(csv_failure)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_failure)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure { code: EXIT_FAILURE, message: e.to_string() }
}

fn pressure_table(d: usize, rows: &[PressureEstimate]) -> Table {
    let header = numbered("q", d)
        .chain(["n".into(), "value".into()])
        .chain(numbered("grad", d))
        .chain(["upper".into(), "lower".into(), "gap".into()])
        .collect();
    let rows = rows
        .iter()
        .map(|e| {
            e.q.iter()
                .map(f64::to_string)
                .chain([e.depth.to_string(), e.value.to_string()])
                .chain(e.gradient.iter().map(f64::to_string))
                .chain([fmt_opt(e.upper_bound), fmt_opt(e.lower_bound), fmt_opt(e.cauchy_gap)])
                .collect()
        })
        .collect();
    Table { header, rows }
}

fn spectrum_table(d: usize, rows: &[SpectrumPoint]) -> Table {
    let header = numbered("alpha", d)
        .chain(["value".into(), "status".into()])
        .chain(numbered("q", d))
        .collect();
    let rows = rows
        .iter()
        .map(|p| {
            let status = serde_json::to_value(p.status)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            p.alpha
                .iter()
                .map(f64::to_string)
                .chain([p.value.to_string(), status])
                .chain(p.minimizer_q.iter().map(f64::to_string))
                .collect()
        })
        .collect();
    Table { header, rows }
}

fn emit_json<T: Serialize>(out: &mut Vec<u8>, records: &[T]) -> Result<(), Failure> {
    for r in records {
        serde_json::to_writer(&mut *out, r).map_err(|e| Failure { code: EXIT_FAILURE, message: e.to_string() })?;
        out.push(b'\n');
    }
    Ok(())
}

fn no_csv(command: &str) -> Failure {
    invalid(format!("--format csv is not available for {command}; use json"))
}

/// Runs one command and returns the exit code together with the rendered
/// output, which the caller writes to `--output` or standard output.
pub fn execute(cli: &Cli, cfg: &EnumConfig) -> Result<(i32, Vec<u8>), Failure> {
    let path = cli
        .common
        .cocycle
        .as_ref()
        .ok_or_else(|| invalid("--cocycle FILE is required"))?;
    let cocycle = load_cocycle(path)?;
    let d = cocycle.dim();
    let csv = cli.common.format == Format::Csv;
    let mut out = Vec::new();
    let mut code = EXIT_OK;

    match &cli.command {
        Command::Pressure { q, depth, depths } => {
            let grid = q
                .iter()
                .map(|t| vector_of_len(t, d, "q"))
                .collect::<Result<Vec<_>, _>>()?;
            let rows = match (depth, depths) {
                (Some(n), None) => pressure_grid(&cocycle, &grid, depth_ok(*n)?, cfg)?,
                (None, Some(list)) => {
                    let ns = parse_usize_list(list)?;
                    for &n in &ns {
                        depth_ok(n)?;
                    }
                    grid.iter()
                        .map(|q| pressure_bracket(&cocycle, q, &ns, cfg))
                        .collect::<Result<Vec<_>, _>>()?
                }
                _ => return Err(invalid("pressure needs --depth N or --depths N1,N2,...")),
            };
            if csv {
                pressure_table(d, &rows).write(&mut out)?;
            } else {
                emit_json(&mut out, &rows)?;
            }
        }
        Command::Spectrum { alpha, depth, q } => {
            let alphas = alpha
                .iter()
                .map(|t| Ok(ExponentVector::new(vector_of_len(t, d, "alpha")?)?))
                .collect::<Result<Vec<_>, Failure>>()?;
            let q0 = match q {
                Some(t) => vector_of_len(t, d, "q")?,
                None => vec![0.0; d],
            };
            let solver = SpectrumSolver::new(&cocycle, depth_ok(*depth)?, cfg)?;
            let rows = if alphas.len() == 1 {
                vec![solver.point(&alphas[0], &q0)?]
            } else {
                solver.curve(&alphas)?
            };
            if csv {
                spectrum_table(d, &rows).write(&mut out)?;
            } else {
                emit_json(&mut out, &rows)?;
            }
        }
        Command::Lyapunov { measure, family, memory, depth } => {
            let mu = measure_from(&cocycle, measure.as_deref(), *family, *memory)?;
            let n = depth_ok(*depth)?;
            let exponents = lyapunov_vector(&cocycle, &mu, n, cfg)?;
            if csv {
                Table {
                    header: std::iter::once("n".to_string()).chain(numbered("chi", d)).collect(),
                    rows: vec![std::iter::once(n.to_string()).chain(exponents.iter().map(f64::to_string)).collect()],
                }
                .write(&mut out)?;
            } else {
                emit_json(&mut out, &[LyapunovRecord { depth: n, measure: &mu, exponents }])?;
            }
        }
        Command::Omega { depth, probe_radius, probe_count } => {
            let omega = estimate_omega(&cocycle, depth_ok(*depth)?, *probe_radius, *probe_count, cfg)?;
            if csv {
                Table {
                    header: numbered("alpha", d).collect(),
                    rows: omega.vertices.iter().map(|v| v.iter().map(f64::to_string).collect()).collect(),
                }
                .write(&mut out)?;
            } else {
                emit_json(&mut out, &[&omega])?;
            }
        }
        Command::CheckTypical { periodic, bridge, max_period, max_bridge, tol } => {
            if csv {
                return Err(no_csv("check-typical"));
            }
            match (periodic, bridge) {
                (Some(p), Some(b)) => {
                    let spec = HomoclinicSpec::new(Word::parse(p)?, Word::parse(b)?)?;
                    let report = check_typical(&cocycle, &spec, *tol)?;
                    if report.overall == TypicalityVerdict::Inconclusive {
                        code = EXIT_INCONCLUSIVE;
                    }
                    emit_json(&mut out, &[report])?;
                }
                _ => {
                    let found = search_homoclinic(&cocycle, *max_period, *max_bridge, *tol, cfg)?;
                    if let SearchOutcome::NotFound { best: Some(b), .. } = &found {
                        if b.overall == TypicalityVerdict::Inconclusive {
                            code = EXIT_INCONCLUSIVE;
                        }
                    }
                    emit_json(&mut out, &[found])?;
                }
            }
        }
        Command::CheckDominated { index, depths, samples } => {
            let lengths = parse_usize_list(depths)?;
            let mode = match samples {
                Some(s) => DominationMode::Sampled { samples: *s, seed: AscentOptions::default().seed },
                None => DominationMode::Exhaustive,
            };
            let report = check_dominated(&cocycle, *index, &lengths, mode, cfg)?;
            if report.verdict == DominationVerdict::Inconclusive {
                code = EXIT_INCONCLUSIVE;
            }
            if csv {
                Table {
                    header: vec!["n".into(), "worst_log_ratio".into()],
                    rows: report
                        .lengths
                        .iter()
                        .zip(&report.worst_log_ratio)
                        .map(|(n, r)| vec![n.to_string(), r.to_string()])
                        .collect(),
                }
                .write(&mut out)?;
            } else {
                emit_json(&mut out, &[report])?;
            }
        }
        Command::Crosscheck { q, depth, family, memory } => {
            if csv {
                return Err(no_csv("crosscheck"));
            }
            let q = vector_of_len(q, d, "q")?;
            let r = cocycle_core::variational_crosscheck(
                &cocycle,
                &q,
                depth_ok(*depth)?,
                family_from(*family, *memory),
                cfg,
            )?;
            emit_json(&mut out, &[r])?;
        }
    }
    Ok((code, out))
}

/// Executes `cli`, writes the output and reports errors on
/// standard error. Returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = EnumConfig::from_env().map_err(Failure::from).and_then(|mut cfg| {
        cfg.threads = cli.common.threads;
        cfg.deterministic = cli.common.deterministic;
        if cfg.threads == Some(0) {
            return Err(invalid("--threads must be at least 1"));
        }
        execute(cli, &cfg)
    });
    match result {
        Ok((code, bytes)) => {
            let written = match &cli.common.output {
                Some(path) => std::fs::write(path, &bytes),
                None => std::io::stdout().lock().write_all(&bytes),
            };
            match written {
                Ok(()) => code,
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_FAILURE
                }
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
