//! JSON system description.
//!
//! ```json
//! { "pattern": [[0,1],[1,0]],
//!   "dims": {"n": 2, "n_u": 1, "n_y": 0, "n_w": 1, "n_z": 1},
//!   "A": {"d": [[-1,0],[0,-1]], "i": [[0.1,0],[0,0]]},
//!   "B_u": {"d": [[1],[0]]} }
//! ```
//! Missing matrices and missing `i` parts are zero.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{ControllerGains, DecomposableMatrix, Dimensions, HomogeneousSystem, PatternGraph};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct DimsDoc {
    n: usize,
    n_u: usize,
    #[serde(default)]
    n_y: usize,
    n_w: usize,
    n_z: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_p: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct BlockDoc {
    d: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    i: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct SystemDoc {
    pattern: Vec<Vec<i64>>,
    dims: DimsDoc,
    #[serde(flatten)]
    blocks: BTreeMap<String, BlockDoc>,
}

const BLOCK_NAMES: [&str; 8] = ["A", "B_u", "B_w", "C_y", "D_yw", "C_z", "D_zu", "D_zw"];

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>], shape: (usize, usize)) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, shape.1));
    }
    let c = rows[0].len();
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::Parse("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn system_from_json(text: &str) -> Result<HomogeneousSystem> {
    let doc: SystemDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if let Some(unknown) = doc.blocks.keys().find(|k| !BLOCK_NAMES.contains(&k.as_str())) {
        return Err(Error::Parse(format!("unknown matrix '{unknown}'")));
    }
    let n = doc.pattern.len();
    if n == 0 || doc.pattern.iter().any(|r| r.len() != n) {
        return Err(Error::Parse("pattern must be a non-empty square integer matrix".into()));
    }
    let pattern = PatternGraph::new_unchecked(DMatrix::from_fn(n, n, |i, j| doc.pattern[i][j]))?;
    let dd = &doc.dims;
    let mut dims = Dimensions::new(dd.n, dd.n_u, dd.n_y, dd.n_w, dd.n_z);
    if let Some(q) = dd.n_q {
        dims.n_q = q;
    }
    if let Some(p) = dd.n_p {
        dims.n_p = p;
    }
    let mut sys = HomogeneousSystem::zeros(pattern, dims);
    for name in BLOCK_NAMES {
        let Some(b) = doc.blocks.get(name) else { continue };
        let target = block_mut(&mut sys, name);
        let shape = target.d.shape();
        let d = rows_to_matrix(&b.d, shape)?;
        let i = match &b.i {
            Some(rows) => rows_to_matrix(rows, shape)?,
            None => DMatrix::zeros(d.nrows(), d.ncols()),
        };
        *target = DecomposableMatrix { d, i };
    }
    sys.validated()
}

fn block_mut<'a>(sys: &'a mut HomogeneousSystem, name: &str) -> &'a mut DecomposableMatrix {
    match name {
        "A" => &mut sys.a,
        "B_u" => &mut sys.b_u,
        "B_w" => &mut sys.b_w,
        "C_y" => &mut sys.c_y,
        "D_yw" => &mut sys.d_yw,
        "C_z" => &mut sys.c_z,
        "D_zu" => &mut sys.d_zu,
        "D_zw" => &mut sys.d_zw,
        _ => unreachable!(),
    }
}

pub fn system_to_json(sys: &HomogeneousSystem) -> String {
    let p = sys.pattern.adjacency();
    let pattern = (0..p.nrows()).map(|i| p.row(i).iter().copied().collect()).collect();
    let d = sys.dims;
    let mut blocks = BTreeMap::new();
    for (name, m) in [
        ("A", &sys.a),
        ("B_u", &sys.b_u),
        ("B_w", &sys.b_w),
        ("C_y", &sys.c_y),
        ("D_yw", &sys.d_yw),
        ("C_z", &sys.c_z),
        ("D_zu", &sys.d_zu),
        ("D_zw", &sys.d_zw),
    ] {
        if m.d.iter().all(|v| *v == 0.0) && m.is_block_diagonal() {
            continue;
        }
        let i = (!m.is_block_diagonal()).then(|| matrix_to_rows(&m.i));
        blocks.insert(name.to_string(), BlockDoc { d: matrix_to_rows(&m.d), i });
    }
    let doc = SystemDoc {
        pattern,
        dims: DimsDoc { n: d.n, n_u: d.n_u, n_y: d.n_y, n_w: d.n_w, n_z: d.n_z, n_q: None, n_p: None },
        blocks,
    };
    serde_json::to_string_pretty(&doc).expect("system serializes")
}

pub fn gains_from_json(text: &str) -> Result<ControllerGains> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    // accept either bare gains or a synthesis report carrying them
    let g = v.get("gains").cloned().unwrap_or(v);
    serde_json::from_value(g).map_err(|e| Error::Parse(e.to_string()))
}

pub fn gains_to_json(k: &ControllerGains) -> String {
    serde_json::to_string_pretty(k).expect("gains serialize")
}

/// Serde adapter storing a matrix as a list of rows.
pub mod matrix_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Doc {
            rows: usize,
            cols: usize,
            data: Vec<Vec<f64>>,
        }
        Doc { rows: m.nrows(), cols: m.ncols(), data: matrix_to_rows(m) }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Doc {
            Sized { rows: usize, cols: usize, data: Vec<Vec<f64>> },
            Rows(Vec<Vec<f64>>),
        }
        let (shape, data) = match Doc::deserialize(d)? {
            Doc::Sized { rows, cols, data } => ((rows, cols), data),
            Doc::Rows(data) => ((data.len(), data.first().map_or(0, |r| r.len())), data),
        };
        let m = rows_to_matrix(&data, shape).map_err(serde::de::Error::custom)?;
        if m.shape() != shape {
            return Err(serde::de::Error::custom(format!("matrix shape {:?} does not match {:?}", m.shape(), shape)));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::paper_sec7;

    #[test]
    fn paper_fixture_round_trips_exactly() {
        let sys = paper_sec7();
        let text = system_to_json(&sys);
        let back = system_from_json(&text).unwrap();
        assert_eq!(back, sys);
        assert_eq!(system_to_json(&back), text);
    }

    #[test]
    fn seventeen_digit_literals_survive() {
        let text = r#"{"pattern": [[0,1],[1,0]], "dims": {"n":1,"n_u":1,"n_w":1,"n_z":1},
            "A": {"d": [[-0.12345678901234567]], "i": [[0.30000000000000004]]}}"#;
        let sys = system_from_json(text).unwrap();
        assert_eq!(sys.a.d[(0, 0)], -0.12345678901234567);
        assert_eq!(sys.a.i[(0, 0)], 0.30000000000000004);
        assert_eq!(system_from_json(&system_to_json(&sys)).unwrap(), sys);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(matches!(system_from_json("{"), Err(Error::Parse(_))));
        let bad_shape = r#"{"pattern": [[0,1],[1,0]], "dims": {"n":2,"n_u":1,"n_w":1,"n_z":1},
            "A": {"d": [[1]]}}"#;
        assert!(matches!(system_from_json(bad_shape), Err(Error::Validation(_))));
        let bad_channel = r#"{"pattern": [[0]], "dims": {"n":1,"n_u":1,"n_w":1,"n_z":1,"n_q":1}}"#;
        assert!(matches!(system_from_json(bad_channel), Err(Error::Validation(_))));
        let unknown = r#"{"pattern": [[0]], "dims": {"n":1,"n_u":1,"n_w":1,"n_z":1}, "Q": {"d": [[1]]}}"#;
        assert!(matches!(system_from_json(unknown), Err(Error::Parse(_))));
    }

    #[test]
    fn gains_accept_bare_and_report_forms() {
        let k = ControllerGains {
            k_d: DMatrix::from_row_slice(1, 2, &[1.5, -2.0]),
            k_i: DMatrix::from_row_slice(1, 2, &[0.25, 0.0]),
        };
        let text = gains_to_json(&k);
        assert_eq!(gains_from_json(&text).unwrap(), k);
        let wrapped = format!("{{\"gamma_certified\": 1.0, \"gains\": {text}}}");
        assert_eq!(gains_from_json(&wrapped).unwrap(), k);
        let rows = r#"{"k_d": [[1.5, -2.0]], "k_i": [[0.25, 0.0]]}"#;
        assert_eq!(gains_from_json(rows).unwrap(), k);
    }
}
