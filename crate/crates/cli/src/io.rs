//! Matrix and measurement files.
//!
//! A matrix file is `{"dim": d, "matrix": [[[re, im], ...], ...]}` with rows
//! in order; a measurement file is `{"dim": d, "elements": [m_1, m_2, ...]}`
//! with each `m_j` laid out like the `matrix` field.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use povm_coherence::numerics::{check_finite, CMatrix, Hermitian, Tolerances};
use povm_coherence::states::{validate_povm, DensityMatrix, Measurement};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub type MatrixArray = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub dim: usize,
    pub matrix: MatrixArray,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmFile {
    pub dim: usize,
    pub elements: Vec<MatrixArray>,
}

/// What a file is expected to contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    State,
    Povm,
    Observable,
}

#[derive(Debug, Clone)]
pub enum Parsed {
    State(DensityMatrix),
    Povm(Measurement),
    Observable(Hermitian),
}

pub fn matrix_to_array(m: &CMatrix) -> MatrixArray {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn array_to_matrix(rows: &MatrixArray, dim: usize) -> Result<CMatrix, CliError> {
    if dim == 0 {
        return Err(CliError::Parse("dim must be positive".into()));
    }
    if rows.len() != dim {
        return Err(CliError::Parse(format!("expected {dim} rows, found {}", rows.len())));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(CliError::Parse(format!("row {i} has {} entries, expected {dim}", row.len())));
        }
    }
    let m = CMatrix::from_fn(dim, dim, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1]));
    check_finite(&m)?;
    Ok(m)
}

impl MatrixFile {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self {
            dim: m.nrows(),
            matrix: matrix_to_array(m),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix, CliError> {
        array_to_matrix(&self.matrix, self.dim)
    }
}

impl PovmFile {
    pub fn from_matrices<'a, I: IntoIterator<Item = &'a CMatrix>>(dim: usize, ms: I) -> Self {
        Self {
            dim,
            elements: ms.into_iter().map(matrix_to_array).collect(),
        }
    }

    pub fn to_matrices(&self) -> Result<Vec<CMatrix>, CliError> {
        self.elements.iter().map(|e| array_to_matrix(e, self.dim)).collect()
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn decode<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn parse_matrix_file(path: &Path) -> Result<CMatrix, CliError> {
    decode::<MatrixFile>(path)?.to_matrix()
}

pub fn parse_state(path: &Path, tol: &Tolerances) -> Result<DensityMatrix, CliError> {
    Ok(DensityMatrix::new(parse_matrix_file(path)?, tol)?)
}

pub fn parse_observable(path: &Path, tol: &Tolerances) -> Result<Hermitian, CliError> {
    Ok(Hermitian::new(parse_matrix_file(path)?, tol)?)
}

pub fn parse_povm(path: &Path, tol: &Tolerances) -> Result<Measurement, CliError> {
    let file: PovmFile = decode(path)?;
    Ok(validate_povm(file.to_matrices()?, tol)?)
}

pub fn parse_input(path: &Path, role: Role, tol: &Tolerances) -> Result<Parsed, CliError> {
    Ok(match role {
        Role::State => Parsed::State(parse_state(path, tol)?),
        Role::Povm => Parsed::Povm(parse_povm(path, tol)?),
        Role::Observable => Parsed::Observable(parse_observable(path, tol)?),
    })
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable value")
}
