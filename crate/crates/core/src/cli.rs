//! The `hsop` command line.
//!
//! Every subcommand reads one JSON document (from `--in` or stdin) and writes
//! one report (to `--out` or stdout). Exit codes: `0` success, `1` invalid
//! input or violated hypothesis, `2` numerical failure.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::forms::{self, Form};
use crate::hs::{self, PositivityReport};
use crate::io;
use crate::linalg::C64;
use crate::posdecomp::{self, DecompositionTrace, SignedLRSum, ZetaCertificate};
use crate::superop::{self, BasisVariant, LRSum};

#[derive(Debug, Parser)]
#[command(
    name = "hsop",
    version,
    about = "Superoperators on Hilbert–Schmidt space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Input file (default: stdin)
    #[arg(long = "in", global = true, value_name = "FILE")]
    input: Option<PathBuf>,

    /// Output file (default: stdout)
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Relative positivity tolerance
    #[arg(long, global = true, default_value_t = crate::DEFAULT_TOL)]
    tol: f64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Swap the roles of the left and right factors
    #[arg(long, global = true)]
    mirror: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    Left,
    Right,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Positivity class of a sum (or of a single matrix)
    Classify,
    /// Apply a sum to the matrix in "eta"
    Apply,
    /// Liouville matrix of a sum
    Liouville,
    /// Basis decomposition over matrix units
    DecomposeBasis {
        #[arg(long, value_enum, default_value_t = Variant::Left)]
        variant: Variant,
    },
    /// Decomposition of a selfadjoint sum into Hermitian factors
    DecomposeSelfadjoint,
    /// Make left and right factors linearly independent
    Reduce,
    /// Adjoint superoperator
    Adjoint,
    /// Positive normalization of a single term
    OneSum,
    /// Positive rewrite of a positive definite two-term sum
    TwoSum,
    /// Negative-leading-term decomposition of a positive definite sum
    PdDecompose,
    /// Check a zeta certificate (searched for when --zeta is absent)
    ZetaCheck {
        #[arg(long, value_delimiter = ',')]
        zeta: Option<Vec<f64>>,
    },
    /// All-positive rewrite from a zeta certificate
    ZetaTransform {
        #[arg(long, value_delimiter = ',')]
        zeta: Option<Vec<f64>>,
    },
    /// The two-dimensional positive definite fixture operator
    Counterexample {
        #[arg(long, default_value_t = 0.25)]
        t: f64,
    },
    /// Inner product from factor lists "a" and "b"
    BuildIp,
    /// Evaluate the form of a sum at "eta", "tau"
    FormEval,
    /// Norm-equivalence constants between "phi1" and "phi2"
    Equiv,
    /// Diagonal blocks of the basis decomposition
    DiagBlocks,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Apply => "apply",
            Command::Liouville => "liouville",
            Command::DecomposeBasis { .. } => "decompose-basis",
            Command::DecomposeSelfadjoint => "decompose-selfadjoint",
            Command::Reduce => "reduce",
            Command::Adjoint => "adjoint",
            Command::OneSum => "one-sum",
            Command::TwoSum => "two-sum",
            Command::PdDecompose => "pd-decompose",
            Command::ZetaCheck { .. } => "zeta-check",
            Command::ZetaTransform { .. } => "zeta-transform",
            Command::Counterexample { .. } => "counterexample",
            Command::BuildIp => "build-ip",
            Command::FormEval => "form-eval",
            Command::Equiv => "equiv",
            Command::DiagBlocks => "diag-blocks",
        }
    }

    fn reads_input(&self) -> bool {
        !matches!(self, Command::Counterexample { .. })
    }
}

/// Report fields other than the bookkeeping ones.
#[derive(Default)]
struct Outcome {
    class: Option<String>,
    lambda_min: Option<f64>,
    kernel_dim: Option<usize>,
    terms_out: Option<Value>,
    trace: Option<Value>,
    result: Option<Value>,
}

impl Outcome {
    fn with_report(mut self, rep: &PositivityReport) -> Self {
        self.class = Some(rep.class.as_str().to_string());
        self.lambda_min = Some(rep.lambda_min);
        self.kernel_dim = Some(rep.kernel_dim);
        self
    }
}

fn vector_json(v: &[C64]) -> Value {
    Value::Array(v.iter().copied().map(io::complex_json).collect())
}

fn trace_json(t: &DecompositionTrace) -> Value {
    serde_json::to_value(t).expect("trace serializes")
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| Error::Schema(format!("missing \"{key}\"")))
}

fn expect_terms(s: &LRSum, n: usize) -> Result<()> {
    if s.len() != n {
        return Err(Error::Arity {
            expected: n,
            found: s.len(),
        });
    }
    Ok(())
}

fn certificate(
    zeta: &Option<Vec<f64>>,
    dec: &SignedLRSum,
    tol: f64,
) -> Result<Option<ZetaCertificate>> {
    match zeta {
        Some(z) => Ok(Some(ZetaCertificate::new(z.clone())?)),
        None => Ok(posdecomp::find_zeta(dec, tol)),
    }
}

fn matrix_list(v: &Value, key: &str, d: usize) -> Result<Vec<hs::HSMatrix>> {
    field(v, key)?
        .as_array()
        .ok_or_else(|| Error::Schema(format!("\"{key}\" must be an array of matrices")))?
        .iter()
        .map(|rows| io::parse_rows(rows, Some(d)))
        .collect()
}

fn execute(cmd: &Command, input: &Value, cli: &Cli) -> Result<Outcome> {
    let tol = cli.tol;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "--tol must be positive, got {tol}"
        )));
    }
    let out = match cmd {
        Command::Classify => {
            let obj = io::sum_object(input);
            if obj.get("rows").is_some() {
                let m = io::parse_matrix(obj)?;
                let rep = hs::classify_hermitian(&m, tol);
                Outcome {
                    result: Some(json!({
                        "subject": "matrix",
                        "witness": vector_json(rep.witness.entries()),
                        "hermitian_defect": m.hermitian_defect(),
                    })),
                    ..Outcome::default()
                }
                .with_report(&rep)
            } else {
                let s = io::parse_lrsum(input)?;
                let rep = superop::superop_classify(&s, tol);
                let liou = superop::to_liouville(&s);
                Outcome {
                    result: Some(json!({
                        "subject": "superoperator",
                        "witness": io::matrix_json(&hs::HSMatrix::unvec(s.dim(), rep.witness.as_vector())?),
                        "selfadjoint_defect": superop::selfadjoint_defect(&liou),
                    })),
                    ..Outcome::default()
                }
                .with_report(&rep)
            }
        }
        Command::Apply => {
            let s = io::parse_lrsum(input)?;
            let eta = io::parse_rows(field(input, "eta")?, Some(s.dim()))?;
            Outcome {
                result: Some(io::matrix_json(&superop::apply(&s, &eta)?)),
                ..Outcome::default()
            }
        }
        Command::Liouville => {
            let s = io::parse_lrsum(input)?;
            let m = hs::HSMatrix::new(superop::to_liouville(&s).into_matrix())?;
            Outcome {
                result: Some(io::matrix_json(&m)),
                ..Outcome::default()
            }
        }
        Command::DecomposeBasis { variant } => {
            let s = io::parse_lrsum(input)?;
            let v = match variant {
                Variant::Left => BasisVariant::LeftEps,
                Variant::Right => BasisVariant::RightEps,
            };
            let out = superop::from_liouville(&superop::to_liouville(&s), v);
            Outcome {
                terms_out: Some(io::lrsum_json(&out)),
                ..Outcome::default()
            }
        }
        Command::DecomposeSelfadjoint => {
            let s = io::parse_lrsum(input)?;
            let out = superop::selfadjoint_decompose(&s, tol)?;
            Outcome {
                terms_out: Some(io::lrsum_json(&out)),
                ..Outcome::default()
            }
            .with_report(&superop::superop_classify(&s, tol))
        }
        Command::Reduce => {
            let s = io::parse_lrsum(input)?;
            let out = superop::reduce_li(&s, tol);
            Outcome {
                terms_out: Some(io::lrsum_json(&out)),
                result: Some(json!({ "terms_in": s.len(), "terms_out": out.len() })),
                ..Outcome::default()
            }
        }
        Command::Adjoint => {
            let s = io::parse_lrsum(input)?;
            Outcome {
                terms_out: Some(io::lrsum_json(&superop::adjoint(&s))),
                ..Outcome::default()
            }
        }
        Command::OneSum => {
            let s = orient(io::parse_lrsum(input)?, cli.mirror);
            expect_terms(&s, 1)?;
            let t = &s.terms()[0];
            let (a, b, trace) = posdecomp::one_sum_positive(&t.a, &t.b, tol)?;
            let out = orient(LRSum::from_pairs(vec![(a, b)])?, cli.mirror);
            Outcome {
                terms_out: Some(io::lrsum_json(&out)),
                trace: Some(trace_json(&trace)),
                ..Outcome::default()
            }
            .with_report(&superop::superop_classify(&s, tol))
        }
        Command::TwoSum => {
            let s = orient(io::parse_lrsum(input)?, cli.mirror);
            expect_terms(&s, 2)?;
            let [t1, t2] = [&s.terms()[0], &s.terms()[1]];
            let (out, trace) = posdecomp::two_sum_pd(&t1.a, &t1.b, &t2.a, &t2.b, tol)?;
            let out = orient_signed(out, cli.mirror);
            Outcome {
                terms_out: Some(io::signed_json(&out)),
                trace: Some(trace_json(&trace)),
                ..Outcome::default()
            }
            .with_report(&superop::superop_classify(&s, tol))
        }
        Command::PdDecompose => {
            let s = orient(io::parse_lrsum(input)?, cli.mirror);
            let (out, trace) = posdecomp::pd_decompose(&s, tol)?;
            let out = orient_signed(out, cli.mirror);
            Outcome {
                terms_out: Some(io::signed_json(&out)),
                trace: Some(trace_json(&trace)),
                ..Outcome::default()
            }
            .with_report(&superop::superop_classify(&s, tol))
        }
        Command::ZetaCheck { zeta } => {
            let dec = orient_signed(io::parse_signed(input)?, cli.mirror);
            match certificate(zeta, &dec, tol)? {
                Some(z) => {
                    let rep = posdecomp::zeta_check(&dec, &z, tol)?;
                    let mut result = serde_json::to_value(&rep).expect("report serializes");
                    result["zetas"] = json!(z.zetas());
                    result["searched"] = json!(zeta.is_none());
                    Outcome {
                        result: Some(result),
                        ..Outcome::default()
                    }
                }
                None => Outcome {
                    result: Some(json!({ "valid": false, "zetas": null, "searched": true })),
                    ..Outcome::default()
                },
            }
        }
        Command::ZetaTransform { zeta } => {
            let dec = orient_signed(io::parse_signed(input)?, cli.mirror);
            let z = certificate(zeta, &dec, tol)?.ok_or_else(|| Error::NoProgress {
                stage: "zeta search".into(),
                trace: Box::default(),
            })?;
            let out = orient(posdecomp::zeta_transform(&dec, &z, tol)?, cli.mirror);
            Outcome {
                terms_out: Some(io::lrsum_json(&out)),
                result: Some(json!({ "zetas": z.zetas(), "searched": zeta.is_none() })),
                ..Outcome::default()
            }
        }
        Command::Counterexample { t } => {
            let s = posdecomp::counterexample_superop(*t)?;
            Outcome {
                terms_out: Some(io::lrsum_json(&s)),
                ..Outcome::default()
            }
            .with_report(&superop::superop_classify(&s, tol))
        }
        Command::BuildIp => {
            let d = io::parse_dim(input)?;
            let a = matrix_list(input, "a", d)?;
            let b = matrix_list(input, "b", d)?;
            let phi = if cli.mirror {
                forms::build_inner_product_mirrored(&a, &b, tol)?
            } else {
                forms::build_inner_product(&a, &b, tol)?
            };
            let cls = forms::form_classify(&phi, tol);
            Outcome {
                terms_out: Some(io::lrsum_json(&phi.op)),
                result: Some(json!({ "kind": cls.kind.as_str() })),
                ..Outcome::default()
            }
            .with_report(&superop::superop_classify(&phi.op, tol))
        }
        Command::FormEval => {
            let phi = Form::new(io::parse_lrsum(input)?);
            let eta = io::parse_rows(field(input, "eta")?, Some(phi.dim()))?;
            let tau = io::parse_rows(field(input, "tau")?, Some(phi.dim()))?;
            let value = forms::eval_form(&phi, &eta, &tau)?;
            let cls = forms::form_classify(&phi, tol);
            Outcome {
                result: Some(
                    json!({ "value": io::complex_json(value), "kind": cls.kind.as_str() }),
                ),
                ..Outcome::default()
            }
            .with_report(&superop::superop_classify(&phi.op, tol))
        }
        Command::Equiv => {
            let phi1 = Form::new(io::parse_lrsum(field(input, "phi1")?)?);
            let phi2 = Form::new(io::parse_lrsum(field(input, "phi2")?)?);
            let e = forms::equivalence_constants(&phi1, &phi2, tol)?;
            Outcome {
                result: Some(json!({
                    "c_lo": e.c_lo,
                    "c_hi": e.c_hi,
                    "witness_lo": io::matrix_json(&e.witness_lo),
                    "witness_hi": io::matrix_json(&e.witness_hi),
                    "operator_lo": e.operator_lo,
                    "operator_hi": e.operator_hi,
                })),
                ..Outcome::default()
            }
        }
        Command::DiagBlocks => {
            let s = io::parse_lrsum(input)?;
            let blocks = posdecomp::diag_blocks(&s, tol)?;
            let blocks: Vec<Value> = blocks
                .iter()
                .map(|(m, rep)| {
                    json!({
                        "block": io::matrix_json(m),
                        "class": rep.class.as_str(),
                        "lambda_min": rep.lambda_min,
                    })
                })
                .collect();
            Outcome {
                result: Some(Value::Array(blocks)),
                ..Outcome::default()
            }
            .with_report(&superop::superop_classify(&s, tol))
        }
    };
    Ok(out)
}

fn orient(s: LRSum, mirror: bool) -> LRSum {
    if mirror {
        s.transposed()
    } else {
        s
    }
}

fn orient_signed(s: SignedLRSum, mirror: bool) -> SignedLRSum {
    if mirror {
        s.transposed()
    } else {
        s
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

fn error_json(kind: &str, message: &str, code: i32) -> Value {
    json!({ "error": { "kind": kind, "message": message, "exit_code": code } })
}

fn render_text(report: &Value, color: bool) -> String {
    let mut out = String::new();
    let obj = report.as_object().expect("report is an object");
    for (k, v) in obj {
        if v.is_null() {
            continue;
        }
        let shown = match (k.as_str(), v) {
            ("terms_out", v) => format!("{} terms", v["terms"].as_array().map_or(0, Vec::len)),
            ("trace", v) => format!("{} steps", v["steps"].as_array().map_or(0, Vec::len)),
            ("class", Value::String(s)) if color => {
                let code = match s.as_str() {
                    "PositiveDefinite" => "32",
                    "PsdSingular" => "33",
                    _ => "31",
                };
                format!("\x1b[{code}m{s}\x1b[0m")
            }
            (_, Value::String(s)) => s.clone(),
            (_, v) => v.to_string(),
        };
        out.push_str(&format!("{k}: {shown}\n"));
    }
    out
}

fn read_input(cli: &Cli, stdin: &mut dyn Read) -> Result<Value> {
    let text = match &cli.input {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Error::Schema(format!("cannot read {}: {e}", path.display())))?,
        None => {
            let mut s = String::new();
            stdin
                .read_to_string(&mut s)
                .map_err(|e| Error::Schema(format!("cannot read stdin: {e}")))?;
            s
        }
    };
    io::parse(&text)
}

fn emit(cli: &Cli, text: &str, stdout: &mut dyn Write) -> std::io::Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text),
        None => stdout.write_all(text.as_bytes()),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(
    args: I,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let _ = write!(stderr, "{e}");
            let body = error_json("Usage", e.kind().to_string().as_str(), 1);
            let _ = writeln!(
                stdout,
                "{}",
                serde_json::to_string_pretty(&body).expect("json")
            );
            return 1;
        }
    };
    let start = Instant::now();
    let name = cli.command.name();

    let outcome = (|| {
        let input = if cli.command.reads_input() {
            read_input(&cli, stdin)?
        } else if let Command::Counterexample { t } = cli.command {
            json!({ "t": t })
        } else {
            Value::Null
        };
        let outcome = execute(&cli.command, &input, &cli)?;
        Ok::<_, Error>((io::canonical_digest(&input), outcome))
    })();

    let (digest, o) = match outcome {
        Ok(x) => x,
        Err(e) => {
            let code = exit_code(&e);
            let _ = writeln!(stderr, "hsop {name}: {e}");
            let mut body = error_json(e.kind(), &e.to_string(), code);
            if let Error::NoProgress { trace, .. } = &e {
                body["error"]["trace"] = trace_json(trace);
            }
            let text = format!("{}\n", serde_json::to_string_pretty(&body).expect("json"));
            let _ = emit(&cli, &text, stdout);
            return code;
        }
    };

    let mut report = Map::new();
    report.insert("command".into(), json!(name));
    report.insert("inputs_digest".into(), json!(digest));
    report.insert("class".into(), json!(o.class));
    report.insert("lambda_min".into(), json!(o.lambda_min));
    report.insert("kernel_dim".into(), json!(o.kernel_dim));
    report.insert("terms_out".into(), o.terms_out.unwrap_or(Value::Null));
    report.insert("trace".into(), o.trace.unwrap_or(Value::Null));
    report.insert("result".into(), o.result.unwrap_or(Value::Null));
    report.insert(
        "tolerances".into(),
        json!({ "tol": cli.tol, "mirror": cli.mirror }),
    );
    report.insert(
        "elapsed_ms".into(),
        json!(start.elapsed().as_secs_f64() * 1e3),
    );
    let report = Value::Object(report);

    let text = match cli.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&report).expect("json")),
        Format::Text => render_text(
            &report,
            std::env::var_os("NO_COLOR").is_none() && cli.out.is_none(),
        ),
    };
    if let Err(e) = emit(&cli, &text, stdout) {
        let _ = writeln!(stderr, "hsop {name}: cannot write output: {e}");
        return 1;
    }
    0
}
