//! Command-line front end. Exit codes: 0 pass, 1 verification failure,
//! 2 input error, 3 truncation cap reached.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::derived::{compose, compose_with_torsion, DerivedMorphism};
use crate::error::MirrorError;
use crate::fukaya::{m2, FukayaMorphism};
use crate::mirror::{phi_object, DerivedObj};
use crate::schema::{parse_complex, CaseSpec, ComplexRecord, MatrixRecord, MorphismReport};
use crate::sweep::{run_suite, Suite};
use crate::theta::{theta_eval, ModularParam, ThetaChar, TruncationSpec, DEFAULT_EPSILON, DEFAULT_MAX_TERMS};

pub const EPS_ENV: &str = "MIRROR_TORUS_EPS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CAP: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "mirror-torus", version, about = "Theta-function sections and Fukaya triangle products on the elliptic curve")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a theta function with characteristics (or a z-derivative).
    Theta {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        cprime: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        cdprime: f64,
        /// e.g. `i`, `2i`, `0.3+1.1i`
        #[arg(long, allow_hyphen_values = true)]
        tau: String,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        z: String,
        #[arg(long, default_value_t = 0)]
        order: u32,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Compose the two morphisms of a case file.
    Compose {
        case_file: PathBuf,
        #[arg(long, value_enum, default_value_t = Side::Derived)]
        side: Side,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Run a randomized verification sweep.
    Verify {
        /// addition | functoriality | assoc | isogeny | torsion | dims
        suite: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        /// Case file supplying seed, count and epsilon defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Side {
    Derived,
    Fukaya,
}

/// What a command printed and how it exits.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { code: EXIT_OK, stdout, stderr: String::new() }
    }

    fn input(msg: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, stdout: String::new(), stderr: msg.into() }
    }

    fn from_error(e: MirrorError) -> Self {
        let code = match e {
            MirrorError::TruncationCapExceeded { .. } => EXIT_CAP,
            _ => EXIT_INPUT,
        };
        Self { code, stdout: String::new(), stderr: format!("error: {e}") }
    }
}

fn epsilon(flag: Option<f64>, file: Option<f64>) -> Result<f64, String> {
    let eps = match (flag, file) {
        (Some(e), _) | (None, Some(e)) => e,
        (None, None) => match std::env::var(EPS_ENV) {
            Ok(v) => v.trim().parse::<f64>().map_err(|_| format!("{EPS_ENV} is not a number: {v:?}"))?,
            Err(_) => DEFAULT_EPSILON,
        },
    };
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(format!("epsilon must be positive, got {eps}"));
    }
    Ok(eps)
}

fn truncation(eps: f64) -> TruncationSpec {
    TruncationSpec { epsilon: eps, max_terms: DEFAULT_MAX_TERMS }
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK { Outcome::ok(text) } else { Outcome::input(text) };
        }
    };
    match cli.command {
        Command::Theta { cprime, cdprime, tau, z, order, eps } => cmd_theta(cprime, cdprime, &tau, &z, order, eps),
        Command::Compose { case_file, side, eps } => cmd_compose(&case_file, side, eps),
        Command::Verify { suite, seed, count, eps, spec } => cmd_verify(&suite, seed, count, eps, spec),
    }
}

fn cmd_theta(cprime: f64, cdprime: f64, tau: &str, z: &str, order: u32, eps: Option<f64>) -> Outcome {
    let tau = match parse_complex(tau) {
        Ok(t) => t,
        Err(e) => return Outcome::input(e),
    };
    let z = match parse_complex(z) {
        Ok(z) => z,
        Err(e) => return Outcome::input(e),
    };
    let eps = match epsilon(eps, None) {
        Ok(e) => e,
        Err(e) => return Outcome::input(e),
    };
    let value = ModularParam::new(tau)
        .and_then(|t| theta_eval(&ThetaChar::new(cprime, cdprime), &t, z, order, &truncation(eps)));
    match value {
        Ok(v) => Outcome::ok(json!({ "value": ComplexRecord::from(v) }).to_string()),
        Err(e) => Outcome::from_error(e),
    }
}

fn read_spec(path: &PathBuf) -> Result<CaseSpec, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("invalid case file {}: {e}", path.display()))
}

fn cmd_compose(path: &PathBuf, side: Side, eps: Option<f64>) -> Outcome {
    let spec = match read_spec(path) {
        Ok(s) => s,
        Err(e) => return Outcome::input(e),
    };
    let eps = match epsilon(eps, spec.epsilon) {
        Ok(e) => e,
        Err(e) => return Outcome::input(e),
    };
    match compose_case(&spec, side, &truncation(eps)) {
        Ok(report) => Outcome::ok(serde_json::to_string_pretty(&report).expect("serializable")),
        Err(e) => Outcome::from_error(e),
    }
}

fn line_of(objects: &[DerivedObj], i: usize) -> Result<crate::derived::LineBundleObj, MirrorError> {
    match &objects[i] {
        DerivedObj::Line(l) => Ok(l.clone()),
        _ => Err(MirrorError::ChainMismatch(format!("object {i} must be a line bundle"))),
    }
}

/// Composes `morphisms[1] ∘ morphisms[0]`. Coefficients in the file are read
/// in the basis of the chosen side (theta basis, or intersection points).
fn compose_case(spec: &CaseSpec, side: Side, trunc: &TruncationSpec) -> Result<MorphismReport, MirrorError> {
    let objects = spec.validate()?;
    let [m0, m1] = spec.morphisms.as_slice() else {
        return Err(MirrorError::ChainMismatch(format!("expected 2 morphisms, found {}", spec.morphisms.len())));
    };
    if m0.target != m1.source {
        return Err(MirrorError::ChainMismatch("the morphisms do not share a middle object".into()));
    }
    let (o1, o2) = (line_of(&objects, m0.source)?, line_of(&objects, m0.target)?);
    let (a, b) = (m0.matrices()?, m1.matrices()?);
    let coeffs = match (&objects[m1.target], side) {
        (DerivedObj::Line(o3), Side::Derived) => {
            let s = DerivedMorphism::new(o1, o2.clone(), a)?;
            let t = DerivedMorphism::new(o2, o3.clone(), b)?;
            compose(&s, &t, trunc)?.coeffs
        }
        (DerivedObj::Torsion(s), Side::Derived) => {
            let m = DerivedMorphism::new(o1, o2, a)?;
            let [bt] = b.as_slice() else {
                return Err(MirrorError::ShapeMismatch("a morphism into a torsion sheaf has one coefficient".into()));
            };
            vec![compose_with_torsion(&m, bt, s, trunc)?]
        }
        (target @ (DerivedObj::Line(_) | DerivedObj::Torsion(_)), Side::Fukaya) => {
            let l1 = phi_object(&DerivedObj::Line(o1));
            let l2 = phi_object(&DerivedObj::Line(o2));
            let l3 = phi_object(target);
            let u = FukayaMorphism::new(l1, l2.clone(), a)?;
            let v = FukayaMorphism::new(l2, l3, b)?;
            m2(&u, &v, trunc)?.coeffs
        }
        (DerivedObj::Pushforward(_), _) => {
            return Err(MirrorError::ChainMismatch("composition into a pushforward is not supported".into()))
        }
    };
    Ok(MorphismReport {
        side: match side {
            Side::Derived => "derived".into(),
            Side::Fukaya => "fukaya".into(),
        },
        source: m0.source,
        target: m1.target,
        coeffs: coeffs.iter().map(MatrixRecord::complex).collect(),
    })
}

fn cmd_verify(suite: &str, seed: Option<u64>, count: Option<usize>, eps: Option<f64>, spec: Option<PathBuf>) -> Outcome {
    let suite: Suite = match suite.parse() {
        Ok(s) => s,
        Err(e) => return Outcome::input(e),
    };
    let spec = match spec.as_ref().map(read_spec).transpose() {
        Ok(s) => s,
        Err(e) => return Outcome::input(e),
    };
    let eps = match epsilon(eps, spec.as_ref().and_then(|s| s.epsilon)) {
        Ok(e) => e,
        Err(e) => return Outcome::input(e),
    };
    let seed = seed.or(spec.as_ref().and_then(|s| s.seed)).unwrap_or(0);
    let count = count.or(spec.as_ref().and_then(|s| s.count)).unwrap_or(20);
    let report = run_suite(suite, seed, count, &truncation(eps));
    let code = if report.pass {
        EXIT_OK
    } else if report.hit_cap {
        EXIT_CAP
    } else {
        EXIT_FAIL
    };
    let mut stderr = String::new();
    for c in report.cases.iter().filter(|c| !c.pass) {
        stderr.push_str(&format!(
            "case {} ({}) failed: residual {:e} > {:e}{}\n",
            c.case,
            c.label,
            c.residual,
            c.tolerance,
            c.error.as_deref().map(|e| format!(" [{e}]")).unwrap_or_default()
        ));
    }
    Outcome { code, stdout: serde_json::to_string_pretty(&report).expect("serializable"), stderr }
}
