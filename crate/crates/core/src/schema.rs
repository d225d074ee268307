//! JSON records: complex numbers, matrices, case files and reports.
//!
//! Complex numbers are `{"re": .., "im": ..}`; a bare JSON number is accepted
//! as a real value. Matrices are row-major nested arrays of such entries.

use serde::{Deserialize, Serialize};

use crate::derived::{LineBundleObj, PushforwardObj, TorsionObj};
use crate::error::{MirrorError, Result};
use crate::linalg::{LocalSystemData, Matrix};
use crate::mirror::DerivedObj;
use crate::shift::Shift;
use crate::theta::{ModularParam, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexRecord {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl From<C64> for ComplexRecord {
    fn from(z: C64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<ComplexRecord> for C64 {
    fn from(r: ComplexRecord) -> Self {
        C64::new(r.re, r.im)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntryRecord {
    Real(f64),
    Complex(ComplexRecord),
}

impl EntryRecord {
    pub fn value(&self) -> C64 {
        match *self {
            EntryRecord::Real(x) => C64::new(x, 0.0),
            EntryRecord::Complex(c) => c.into(),
        }
    }
}

/// Row-major matrix; entries with zero imaginary part are written as plain numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixRecord(pub Vec<Vec<EntryRecord>>);

impl From<&Matrix> for MatrixRecord {
    fn from(m: &Matrix) -> Self {
        MatrixRecord(
            m.to_rows()
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|z| if z.im == 0.0 { EntryRecord::Real(z.re) } else { EntryRecord::Complex(z.into()) })
                        .collect()
                })
                .collect(),
        )
    }
}

impl MatrixRecord {
    pub fn to_matrix(&self) -> Result<Matrix> {
        let rows: Vec<Vec<C64>> = self.0.iter().map(|r| r.iter().map(EntryRecord::value).collect()).collect();
        Matrix::from_rows(&rows)
    }
}

impl MatrixRecord {
    /// Every entry written as `{re, im}`, the form used for reports.
    pub fn complex(m: &Matrix) -> Self {
        MatrixRecord(m.to_rows().into_iter().map(|row| row.into_iter().map(|z| EntryRecord::Complex(z.into())).collect()).collect())
    }
}

/// Parses `"i"`, `"-2i"`, `"0.3+1.1i"`, `"1e-3-0.5i"` or a plain real.
pub fn parse_complex(text: &str) -> std::result::Result<C64, String> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || format!("cannot parse complex number {text:?}");
    if t.is_empty() {
        return Err(err());
    }
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| err());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&j| (bytes[j] == b'+' || bytes[j] == b'-') && !matches!(bytes[j - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(j) => (&body[..j], &body[j..]),
        None => ("", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        s => s.parse::<f64>().map_err(|_| err())?,
    };
    let re = if re.is_empty() { 0.0 } else { re.parse::<f64>().map_err(|_| err())? };
    Ok(C64::new(re, im))
}

pub const SCHEMA_VERSION: u32 = 1;

fn default_local() -> MatrixRecord {
    MatrixRecord(vec![vec![EntryRecord::Real(0.0)]])
}

/// A normal-form object. `localSystem` is the nilpotent matrix `N`
/// (default `[[0]]`). Pushforward bases live over `r tau`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum ObjectRecord {
    #[serde(rename_all = "camelCase")]
    Line {
        degree: i64,
        #[serde(default)]
        alpha: Shift,
        #[serde(default)]
        beta: Shift,
        #[serde(default = "default_local")]
        local_system: MatrixRecord,
    },
    #[serde(rename_all = "camelCase")]
    Torsion {
        #[serde(default)]
        alpha: Shift,
        #[serde(default)]
        beta: Shift,
        #[serde(default = "default_local")]
        local_system: MatrixRecord,
    },
    #[serde(rename_all = "camelCase")]
    Pushforward {
        r: u32,
        degree: i64,
        #[serde(default)]
        alpha: Shift,
        #[serde(default)]
        beta: Shift,
        #[serde(default = "default_local")]
        local_system: MatrixRecord,
    },
}

/// Coefficients of a morphism between `objects[source]` and `objects[target]`,
/// one matrix per basis index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphismRecord {
    pub source: usize,
    pub target: usize,
    pub coeffs: Vec<MatrixRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CaseSpec {
    pub schema_version: u32,
    pub tau: ComplexRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default)]
    pub objects: Vec<ObjectRecord>,
    #[serde(default)]
    pub morphisms: Vec<MorphismRecord>,
}

impl CaseSpec {
    pub fn modular_param(&self) -> Result<ModularParam> {
        ModularParam::new(self.tau.into())
    }

    /// Checks the version, `Im tau`, epsilon and index ranges, and builds the objects.
    pub fn validate(&self) -> Result<Vec<DerivedObj>> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(MirrorError::Invalid(format!(
                "unsupported schemaVersion {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let tau = self.modular_param()?;
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) {
                return Err(MirrorError::Invalid(format!("epsilon must be positive, got {eps}")));
            }
        }
        let objects: Vec<DerivedObj> = self.objects.iter().map(|o| o.build(tau)).collect::<Result<_>>()?;
        for (i, m) in self.morphisms.iter().enumerate() {
            if m.source >= objects.len() || m.target >= objects.len() {
                return Err(MirrorError::Invalid(format!("morphism {i} refers to a missing object")));
            }
        }
        Ok(objects)
    }
}

impl ObjectRecord {
    pub fn build(&self, tau: ModularParam) -> Result<DerivedObj> {
        Ok(match self {
            ObjectRecord::Line { degree, alpha, beta, local_system } => {
                let local = LocalSystemData::new(local_system.to_matrix()?)?;
                DerivedObj::Line(LineBundleObj::new(tau, *degree, *alpha, *beta, local))
            }
            ObjectRecord::Torsion { alpha, beta, local_system } => {
                let local = LocalSystemData::new(local_system.to_matrix()?)?;
                DerivedObj::Torsion(TorsionObj::new(tau, *alpha, *beta, local))
            }
            ObjectRecord::Pushforward { r, degree, alpha, beta, local_system } => {
                if *r == 0 {
                    return Err(MirrorError::Invalid("pushforward level must be positive".into()));
                }
                let local = LocalSystemData::new(local_system.to_matrix()?)?;
                let base = LineBundleObj::new(tau.scaled(*r), *degree, *alpha, *beta, local);
                DerivedObj::Pushforward(PushforwardObj { r: *r, base })
            }
        })
    }
}

impl MorphismRecord {
    pub fn matrices(&self) -> Result<Vec<Matrix>> {
        self.coeffs.iter().map(MatrixRecord::to_matrix).collect()
    }
}

/// Output of `compose`: coefficients in the basis of the chosen side
/// (theta basis `f_k` or intersection points `e_k`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorphismReport {
    pub side: String,
    pub source: usize,
    pub target: usize,
    pub coeffs: Vec<MatrixRecord>,
}
