use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde_json::Value;

pub struct Case {
    pub name: &'static str,
    pub args: &'static [&'static str],
    pub fixture: Option<&'static str>,
    pub exit: i32,
}

const fn case(
    name: &'static str,
    args: &'static [&'static str],
    fixture: Option<&'static str>,
    exit: i32,
) -> Case {
    Case {
        name,
        args,
        fixture,
        exit,
    }
}

/// One golden case per subcommand, plus error paths and output variants.
pub const CASES: &[Case] = &[
    case("classify", &["classify"], Some("identity2.json"), 0),
    case(
        "classify_matrix",
        &["classify"],
        Some("matrix_indefinite.json"),
        0,
    ),
    case(
        "classify_text",
        &["classify", "--format", "text"],
        Some("rank_one.json"),
        0,
    ),
    case("apply", &["apply"], Some("apply.json"), 0),
    case("liouville", &["liouville"], Some("rank_one.json"), 0),
    case(
        "decompose_basis_left",
        &["decompose-basis", "--variant", "left"],
        Some("mixed2.json"),
        0,
    ),
    case(
        "decompose_basis_right",
        &["decompose-basis", "--variant", "right"],
        Some("mixed2.json"),
        0,
    ),
    case(
        "decompose_selfadjoint",
        &["decompose-selfadjoint"],
        Some("hermitian2.json"),
        0,
    ),
    case(
        "decompose_selfadjoint_rejects",
        &["decompose-selfadjoint"],
        Some("eps12.json"),
        2,
    ),
    case("reduce", &["reduce"], Some("dependent.json"), 0),
    case("adjoint", &["adjoint"], Some("eps12.json"), 0),
    case("one_sum", &["one-sum"], Some("neg_identity.json"), 0),
    case("one_sum_arity", &["one-sum"], Some("two_sum.json"), 1),
    case("two_sum", &["two-sum"], Some("two_sum.json"), 0),
    case("pd_decompose", &["pd-decompose"], Some("identity2.json"), 0),
    case(
        "pd_decompose_mirror",
        &["pd-decompose", "--mirror"],
        Some("identity2.json"),
        0,
    ),
    case(
        "pd_decompose_indefinite",
        &["pd-decompose"],
        Some("indefinite.json"),
        2,
    ),
    case(
        "zeta_check_valid",
        &["zeta-check", "--zeta", "0.5"],
        Some("scalar_zeta.json"),
        0,
    ),
    case(
        "zeta_check_invalid",
        &["zeta-check", "--zeta", "3"],
        Some("scalar_zeta.json"),
        0,
    ),
    case(
        "zeta_check_search",
        &["zeta-check"],
        Some("scalar_zeta.json"),
        0,
    ),
    case(
        "zeta_transform",
        &["zeta-transform", "--zeta", "0.5"],
        Some("scalar_zeta.json"),
        0,
    ),
    case(
        "zeta_transform_invalid",
        &["zeta-transform", "--zeta", "3"],
        Some("scalar_zeta.json"),
        1,
    ),
    case(
        "counterexample",
        &["counterexample", "--t", "0.25"],
        None,
        0,
    ),
    case(
        "counterexample_range",
        &["counterexample", "--t", "0.5"],
        None,
        1,
    ),
    case("build_ip", &["build-ip"], Some("build_ip.json"), 0),
    case(
        "build_ip_kernel",
        &["build-ip"],
        Some("build_ip_kernel.json"),
        1,
    ),
    case("form_eval", &["form-eval"], Some("form_eval.json"), 0),
    case("equiv", &["equiv"], Some("equiv.json"), 0),
    case("diag_blocks", &["diag-blocks"], Some("identity2.json"), 0),
    case("malformed", &["classify"], Some("malformed.json"), 1),
];

pub fn tests_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests")
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
}

/// Runs `hsop` with `args`, feeding `stdin`.
pub fn run(args: &[&str], stdin: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_hsop"))
        .args(args)
        .env("NO_COLOR", "1")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn hsop");
    child
        .stdin
        .take()
        .expect("stdin")
        .write_all(stdin)
        .expect("write stdin");
    let out = child.wait_with_output().expect("wait for hsop");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).expect("utf-8 output"),
    }
}

pub fn run_case(c: &Case) -> Output {
    let mut args: Vec<String> = c.args.iter().map(|s| s.to_string()).collect();
    if let Some(f) = c.fixture {
        args.push("--in".into());
        args.push(tests_dir().join("fixtures").join(f).display().to_string());
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    run(&refs, b"")
}

/// Output with the timing field removed; text reports drop the
/// `elapsed_ms:` line.
pub fn normalize(stdout: &str) -> String {
    match serde_json::from_str::<Value>(stdout) {
        Ok(mut v) => {
            if let Some(obj) = v.as_object_mut() {
                obj.remove("elapsed_ms");
            }
            format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
        }
        Err(_) => stdout
            .lines()
            .filter(|l| !l.starts_with("elapsed_ms:"))
            .map(|l| format!("{l}\n"))
            .collect(),
    }
}

pub fn golden_path(c: &Case) -> PathBuf {
    tests_dir().join("golden").join(format!("{}.out", c.name))
}

/// Compares a case with its golden file; `UPDATE_GOLDEN=1` rewrites it.
pub fn check_golden(c: &Case) -> Result<(), String> {
    let out = run_case(c);
    if out.code != c.exit {
        return Err(format!(
            "{}: exit {} (expected {})\n{}",
            c.name, out.code, c.exit, out.stdout
        ));
    }
    let got = normalize(&out.stdout);
    let path = golden_path(c);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &got).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let want = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if got != want {
        return Err(format!(
            "{}: output differs from {}",
            c.name,
            path.display()
        ));
    }
    Ok(())
}
