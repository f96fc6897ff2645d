//! `blockspec`: analyse block-diagonal direct sums from the command line.
//!
//! Every invocation writes one JSON report to stdout. Exit codes: 0 on
//! success (including `unknown` verdicts), 1 on internal failure or a
//! failed oracle check, 2 on usage, parse, or domain errors.

mod pretty;

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::process::ExitCode;
use std::time::Instant;

use blockspec::{
    classify_point, compactness_verdict, minimal_support, oracle_check, point_spectrum,
    poly_bound_family, power_bound_family, resolvent_sup, schatten_decision, AlphaSpec,
    BlockFamily, BoundError, Envelope, FamilyDescription, FixtureName, FixtureParams,
    FormatError, OracleError, OracleOptions, PolyOptions, PowerOptions, SchattenError,
    SpectrumError, SpectrumOptions,
};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Blocks inspected for generator families when --truncate is absent.
const DEFAULT_GENERATOR_TRUNCATION: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "blockspec", version, about = "Spectral and boundedness analysis of block-diagonal operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    input: Input,
    /// Print a readable table instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,
    /// Include wall time in the report (breaks byte-identical output).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Debug, Args)]
struct Input {
    /// Family description file, or `-` for stdin.
    #[arg(long, global = true, value_name = "FILE", conflicts_with = "fixture")]
    family: Option<String>,
    /// Built-in fixture name.
    #[arg(long, global = true, value_name = "NAME")]
    fixture: Option<String>,
    /// Fixture weights: `1,2,3` (explicit list), `2` (constant), or an
    /// expression in `n` such as `1/n`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Fixture quadrature size.
    #[arg(long, global = true)]
    nq: Option<usize>,
    /// Fixture parameter `key=json`, e.g. `alpha=[1,2]` or `nq=100`.
    #[arg(long = "param", global = true, value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Number of leading blocks to inspect.
    #[arg(long, global = true, value_name = "N")]
    truncate: Option<usize>,
    /// Relative tolerance for spectral identifications and power rules.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Union of block eigenvalues with provenance.
    Spectrum,
    /// Classify τ as point, continuous, residual, or resolvent.
    Classify(TauArg),
    /// Supremum of block resolvent norms at τ.
    ResolventSup(TauArg),
    /// Inclusion-minimal set of blocks covering the point spectrum.
    MinimalSupport,
    /// Compactness verdict.
    Compact,
    /// Schatten class membership.
    Schatten {
        #[arg(long)]
        p: f64,
        /// Block indices to leave out, e.g. `1,3`.
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<usize>,
    },
    /// Power-boundedness constant.
    Powerbound {
        #[arg(long, default_value_t = PowerOptions::default().max_power)]
        powers: usize,
    },
    /// Polynomial-boundedness constant.
    Polybound {
        #[arg(long, default_value_t = PowerOptions::default().max_power)]
        powers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = PolyOptions::default().samples)]
        samples: usize,
    },
    /// Cross-check against the assembled dense matrix.
    Check {
        #[arg(long, default_value_t = OracleOptions::default().powers)]
        powers: usize,
    },
    /// List fixtures, or print the first blocks of one as an explicit family.
    Fixtures,
}

#[derive(Debug, Args)]
struct TauArg {
    /// Complex point as `re,im`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    tau: Complex64,
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let (re, im) = s.split_once(',').unwrap_or((s, "0"));
    let part = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    let z = Complex64::new(part(re)?, part(im)?);
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err("τ must be finite".into())
    }
}

#[derive(Debug)]
enum Failure {
    /// Bad arguments, unreadable input, or a request outside an
    /// operation's domain.
    Usage(String),
    Internal(String),
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<SpectrumError> for Failure {
    fn from(e: SpectrumError) -> Self {
        match e {
            SpectrumError::PointSpectrum { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

impl From<SchattenError> for Failure {
    fn from(e: SchattenError) -> Self {
        match e {
            SchattenError::Exponent(_) | SchattenError::ZeroExclusion | SchattenError::ZeroK => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Internal(e.to_string()),
        }
    }
}

impl From<BoundError> for Failure {
    fn from(e: BoundError) -> Self {
        match e {
            BoundError::ZeroPowers | BoundError::ZeroSamples => Failure::Usage(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        Failure::Internal(e.to_string())
    }
}

#[derive(Debug, Serialize)]
struct CliReport {
    command: String,
    argv: Vec<String>,
    /// SHA-256 of the family file bytes, or of the canonical fixture
    /// description.
    #[serde(skip_serializing_if = "Option::is_none")]
    input_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncate: Option<usize>,
    result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_s: Option<f64>,
}

struct Loaded {
    family: BlockFamily,
    digest: String,
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read_family_text(path: &str) -> Result<Vec<u8>, Failure> {
    let mut bytes = Vec::new();
    let res = if path == "-" {
        std::io::stdin().read_to_end(&mut bytes).map(|_| ())
    } else {
        std::fs::read(path).map(|b| bytes = b)
    };
    res.map_err(|e| Failure::Usage(format!("{path}: {e}")))?;
    Ok(bytes)
}

fn parse_alpha(text: &str) -> Result<AlphaSpec, Failure> {
    let t = text.trim();
    if t.contains(',') {
        let values = t
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::Usage(format!("--alpha `{t}`: {e}")))?;
        return Ok(AlphaSpec::List(values));
    }
    if let Ok(v) = t.parse::<f64>() {
        return Ok(AlphaSpec::Constant(v));
    }
    Envelope::parse(t)
        .map(AlphaSpec::Expr)
        .map_err(|e| Failure::Usage(format!("--alpha `{t}`: {e}")))
}

fn fixture_params(input: &Input) -> Result<FixtureParams, Failure> {
    let mut map = serde_json::Map::new();
    for p in &input.params {
        let (key, value) = p
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--param `{p}`: expected KEY=VALUE")))?;
        let value: Value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        map.insert(key.trim().to_string(), value);
    }
    let mut params: FixtureParams =
        serde_json::from_value(Value::Object(map)).map_err(|e| Failure::Usage(format!("--param: {e}")))?;
    if let Some(a) = &input.alpha {
        params.alpha = Some(parse_alpha(a)?);
    }
    if let Some(nq) = input.nq {
        params.nq = Some(nq);
    }
    Ok(params)
}

fn load(input: &Input) -> Result<Loaded, Failure> {
    if let Some(path) = &input.family {
        let bytes = read_family_text(path)?;
        let text = String::from_utf8(bytes.clone()).map_err(|e| Failure::Usage(format!("{path}: {e}")))?;
        let family = FamilyDescription::parse(&text)
            .and_then(|d| d.build())
            .map_err(|e| Failure::Usage(format!("{path}: {e}")))?;
        return Ok(Loaded {
            family,
            digest: digest(&bytes),
        });
    }
    let Some(name) = &input.fixture else {
        return Err(Failure::Usage("one of --family or --fixture is required".into()));
    };
    let name = FixtureName::parse(name).ok_or_else(|| {
        let known: Vec<&str> = FixtureName::ALL.iter().map(|f| f.as_str()).collect();
        Failure::Usage(format!("unknown fixture `{name}` (known: {})", known.join(", ")))
    })?;
    let desc = FamilyDescription::Generator {
        name,
        params: fixture_params(input)?,
        tail: None,
    };
    let family = desc.build()?;
    Ok(Loaded {
        family,
        digest: digest(desc.to_string().as_bytes()),
    })
}

fn truncation(input: &Input, family: &BlockFamily) -> Result<usize, Failure> {
    match (input.truncate, family.len()) {
        (Some(0), _) => Err(Failure::Usage("--truncate must be >= 1".into())),
        (Some(n), _) => Ok(n),
        (None, Some(len)) => Ok(len),
        (None, None) => Ok(DEFAULT_GENERATOR_TRUNCATION),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn fixture_catalogue() -> Value {
    let entries: Vec<Value> = FixtureName::ALL
        .iter()
        .map(|f| {
            let (params, blocks) = match f {
                FixtureName::ScalarOnes => ("none", "[1]"),
                FixtureName::Nilpotent2 => ("alpha", "[[0,0],[alpha_n,0]]"),
                FixtureName::Volterra => ("alpha, nq (even)", "midpoint Volterra matrix scaled by alpha_n"),
                FixtureName::DiagAccumulating => ("none", "[1 - 1/n]"),
                FixtureName::HarmonicDiag => ("none", "[1/n]"),
            };
            serde_json::json!({ "name": f.as_str(), "params": params, "blocks": blocks })
        })
        .collect();
    Value::Array(entries)
}

/// Runs one command. The trailing flag is false when an oracle check failed.
fn execute(cli: &Cli) -> Result<(Value, Option<String>, Option<usize>, bool), Failure> {
    let spec_opts = SpectrumOptions {
        rel_tol: cli.input.tol.unwrap_or(SpectrumOptions::default().rel_tol),
    };
    let power_opts = |powers: usize| PowerOptions {
        max_power: powers,
        rel_tol: cli.input.tol.unwrap_or(PowerOptions::default().rel_tol),
    };
    if let Command::Fixtures = cli.command {
        if cli.input.fixture.is_none() && cli.input.family.is_none() {
            return Ok((fixture_catalogue(), None, None, true));
        }
    }
    let Loaded { family, digest } = load(&cli.input)?;
    let n = truncation(&cli.input, &family)?;
    let mut ok = true;
    let result = match &cli.command {
        Command::Spectrum => to_value(&point_spectrum(&family, n, &spec_opts)?),
        Command::Classify(t) => to_value(&classify_point(&family, t.tau, n, &spec_opts)?),
        Command::ResolventSup(t) => to_value(&resolvent_sup(&family, t.tau, n, &spec_opts)?),
        Command::MinimalSupport => {
            serde_json::json!({ "blocks": minimal_support(&family, n, &spec_opts)? })
        }
        Command::Compact => to_value(&compactness_verdict(&family, n).map_err(Failure::from)?),
        Command::Schatten { p, exclude } => {
            let ex: BTreeSet<usize> = exclude.iter().copied().collect();
            to_value(&schatten_decision(&family, *p, n, &ex)?)
        }
        Command::Powerbound { powers } => to_value(&power_bound_family(&family, n, &power_opts(*powers))?),
        Command::Polybound { powers, seed, samples } => {
            let opts = PolyOptions {
                samples: *samples,
                seed: *seed,
                power: power_opts(*powers),
            };
            to_value(&poly_bound_family(&family, n, &opts)?)
        }
        Command::Check { powers } => {
            let opts = OracleOptions {
                powers: *powers,
                ..OracleOptions::default()
            };
            let report = oracle_check(&family, n, &opts)?;
            ok = report.passed();
            to_value(&report)
        }
        Command::Fixtures => {
            let t = family.truncate(n).map_err(|e| Failure::Internal(e.to_string()))?;
            to_value(&FamilyDescription::from_blocks(&t.blocks, family.measure().clone()))
        }
    };
    Ok((result, Some(digest), Some(n), ok))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Spectrum => "spectrum",
        Command::Classify(_) => "classify",
        Command::ResolventSup(_) => "resolvent-sup",
        Command::MinimalSupport => "minimal-support",
        Command::Compact => "compact",
        Command::Schatten { .. } => "schatten",
        Command::Powerbound { .. } => "powerbound",
        Command::Polybound { .. } => "polybound",
        Command::Check { .. } => "check",
        Command::Fixtures => "fixtures",
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    let outcome = execute(&cli);
    let (result, input_digest, truncate, code) = match outcome {
        Ok((result, d, n, ok)) => (result, d, n, if ok { 0 } else { 1 }),
        Err(f) => {
            let (kind, message, code) = match f {
                Failure::Usage(m) => ("usage", m, 2),
                Failure::Internal(m) => ("internal", m, 1),
            };
            eprintln!("blockspec: {message}");
            (serde_json::json!({ "error": { "kind": kind, "message": message } }), None, None, code)
        }
    };
    let report = CliReport {
        command: command_name(&cli.command).to_string(),
        argv: argv.into_iter().skip(1).collect(),
        input_digest,
        truncate,
        result,
        wall_time_s: cli.timing.then(|| start.elapsed().as_secs_f64()),
    };
    let text = if cli.pretty {
        pretty::render(&to_value(&report))
    } else {
        serde_json::to_string(&report).expect("report serializes") + "\n"
    };
    // a closed pipe downstream is not our failure
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    ExitCode::from(code)
}
