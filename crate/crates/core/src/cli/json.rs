//! Model files and report encoding.
//!
//! Numbers are written with 17 significant digits so every `f64` survives a
//! write/read cycle bit for bit; non-finite values become `null`. Object keys
//! come out sorted.

use num_complex::Complex64;
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::lti::StateSpace;

pub const SCHEMA_VERSION: i64 = 1;

/// A continuous-time model file: `{"v":1, "A", "B", "C", "D"?, "labels"?}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub ss: StateSpace,
    pub labels: Option<Vec<String>>,
}

/// A sampled-model file: `{"v":1, "Ad", "Qd" | "Bd", "Cd", "h"}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFile {
    pub ad: Matrix,
    pub qd: Option<Matrix>,
    pub bd: Option<Matrix>,
    pub cd: Matrix,
    pub h: Option<f64>,
}

fn parse_object(text: &str) -> Result<Map<String, Value>> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(Error::Parse("top level must be a JSON object".into()));
    };
    match obj.get("v") {
        None => return Err(Error::Parse("missing schema version field \"v\"".into())),
        Some(v) => match v.as_i64() {
            Some(SCHEMA_VERSION) => {}
            Some(other) => return Err(Error::SchemaVersionUnsupported(other)),
            None => return Err(Error::Parse(format!("schema version must be an integer, got {v}"))),
        },
    }
    Ok(obj)
}

/// Nested numeric array to a matrix. `[]` is a matrix with no rows; its
/// column count is taken from `cols_hint`.
fn matrix(obj: &Map<String, Value>, field: &str, cols_hint: usize) -> Result<Option<Matrix>> {
    let Some(v) = obj.get(field) else {
        return Ok(None);
    };
    let rows = v
        .as_array()
        .ok_or_else(|| Error::dims(field, "expected an array of rows"))?;
    if rows.is_empty() {
        return Ok(Some(Matrix::zeros(0, cols_hint)));
    }
    let mut data: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::dims(field, format!("row {i} is not an array")))?;
        let vals = row
            .iter()
            .enumerate()
            .map(|(j, x)| x.as_f64().ok_or_else(|| Error::Parse(format!("{field}[{i}][{j}] is not a number: {x}"))))
            .collect::<Result<Vec<f64>>>()?;
        data.push(vals);
    }
    let cols = data[0].len();
    if let Some(i) = data.iter().position(|r| r.len() != cols) {
        return Err(Error::dims(field, format!("row {i} has {} entries, row 0 has {cols}", data[i].len())));
    }
    Ok(Some(Matrix::from_fn(data.len(), cols, |i, j| data[i][j])))
}

fn required(m: Option<Matrix>, field: &str) -> Result<Matrix> {
    m.ok_or_else(|| Error::Parse(format!("missing field \"{field}\"")))
}

fn labels(obj: &Map<String, Value>) -> Result<Option<Vec<String>>> {
    let Some(v) = obj.get("labels") else {
        return Ok(None);
    };
    let arr = v.as_array().ok_or_else(|| Error::Parse("labels must be an array of strings".into()))?;
    arr.iter()
        .map(|x| x.as_str().map(str::to_owned).ok_or_else(|| Error::Parse(format!("label {x} is not a string"))))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// State-space data from a parsed object. `A`, `B`, `C` may all be omitted
/// for a static gain, in which case `D` is required.
fn state_space(obj: &Map<String, Value>) -> Result<StateSpace> {
    let a = matrix(obj, "A", 0)?;
    let n = a.as_ref().map_or(0, |a| a.nrows());
    let b = matrix(obj, "B", 0)?;
    let c = matrix(obj, "C", n)?;
    let d = matrix(obj, "D", b.as_ref().map_or(0, |b| b.ncols()))?;
    match (a, b, c) {
        (None, None, None) => Ok(StateSpace::gain(required(d, "D")?)),
        (a, b, c) => {
            let (a, b, c) = (required(a, "A")?, required(b, "B")?, required(c, "C")?);
            let d = d.unwrap_or_else(|| Matrix::zeros(c.nrows(), b.ncols()));
            StateSpace::new(a, b, c, d)
        }
    }
}

pub fn parse_model(text: &str) -> Result<ModelFile> {
    let obj = parse_object(text)?;
    for f in ["A", "B", "C"] {
        if !obj.contains_key(f) {
            return Err(Error::Parse(format!("missing field \"{f}\"")));
        }
    }
    Ok(ModelFile {
        ss: state_space(&obj)?,
        labels: labels(&obj)?,
    })
}

/// A transfer matrix file (`F` or `H`): same schema as a model, `D` allowed.
pub fn parse_system(text: &str) -> Result<StateSpace> {
    state_space(&parse_object(text)?)
}

pub fn parse_sampled(text: &str) -> Result<SampledFile> {
    let obj = parse_object(text)?;
    let ad = required(matrix(&obj, "Ad", 0)?, "Ad")?;
    let n = ad.nrows();
    let qd = matrix(&obj, "Qd", n)?;
    let bd = matrix(&obj, "Bd", 0)?;
    if qd.is_none() && bd.is_none() {
        return Err(Error::Parse("one of \"Qd\" or \"Bd\" is required".into()));
    }
    let cd = required(matrix(&obj, "Cd", n)?, "Cd")?;
    let h = match obj.get("h") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_f64().ok_or_else(|| Error::Parse(format!("h must be a number, got {v}")))?),
    };
    Ok(SampledFile { ad, qd, bd, cd, h })
}

pub fn read_file(path: &str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{path}: {e}")))
}

pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let text = format!("{x:.16e}");
    Value::Number(text.parse::<Number>().expect("formatted float is a JSON number"))
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn mat(m: &Matrix) -> Value {
    Value::Array(m.row_iter().map(|r| Value::Array(r.iter().map(|&x| num(x)).collect())).collect())
}

pub fn cplx(z: Complex64) -> Value {
    obj([("re", num(z.re)), ("im", num(z.im))])
}

pub fn cplx_list(zs: &[Complex64]) -> Value {
    Value::Array(zs.iter().map(|&z| cplx(z)).collect())
}

pub fn state_space_json(ss: &StateSpace) -> Value {
    obj([
        ("A", mat(&ss.a)),
        ("B", mat(&ss.b)),
        ("C", mat(&ss.c)),
        ("D", mat(&ss.d)),
        ("states", ss.states().into()),
        ("inputs", ss.inputs().into()),
        ("outputs", ss.outputs().into()),
    ])
}

pub fn obj<const N: usize>(fields: [(&str, Value); N]) -> Value {
    Value::Object(fields.into_iter().map(|(k, v)| (k.to_owned(), v)).collect())
}

/// Pretty-printed with a trailing newline.
pub fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}
