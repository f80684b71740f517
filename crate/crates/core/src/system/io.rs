//! JSON system files.
//!
//! ```json
//! {"name": "...", "n": 2, "k": 1, "m": 1, "p": 1,
//!  "A": [[..],[..]], "N": [[[..],[..]]], "B": [[..],[..]], "C": [[..]]}
//! ```
//! Numbers are written with 17 significant digits so a save/load cycle is lossless.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::StochasticSystem;
use crate::linalg::Matrix;
use crate::Error;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    #[serde(default)]
    name: Option<String>,
    n: usize,
    k: usize,
    m: usize,
    p: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "N")]
    n_list: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
}

fn to_matrix(field: &str, rows: &[Vec<f64>], shape: (usize, usize)) -> Result<Matrix, String> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(format!(
            "field `{field}` must be {}x{} (got {} rows)",
            shape.0,
            shape.1,
            rows.len()
        ));
    }
    Ok(Matrix::from_rows(rows))
}

/// Parses a system document; `origin` only labels errors.
pub fn from_json_str(text: &str, origin: &Path) -> Result<StochasticSystem, Error> {
    let parse_err = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        message,
    };
    let raw: RawSystem = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    if raw.n_list.len() != raw.k {
        return Err(parse_err(format!(
            "field `N` holds {} matrices but k = {}",
            raw.n_list.len(),
            raw.k
        )));
    }
    let a = to_matrix("A", &raw.a, (raw.n, raw.n)).map_err(parse_err)?;
    let n_list = raw
        .n_list
        .iter()
        .enumerate()
        .map(|(j, nj)| to_matrix(&format!("N[{j}]"), nj, (raw.n, raw.n)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(parse_err)?;
    let b = to_matrix("B", &raw.b, (raw.n, raw.m)).map_err(parse_err)?;
    let c = to_matrix("C", &raw.c, (raw.p, raw.n)).map_err(parse_err)?;
    let sys = StochasticSystem::new(a, n_list, b, c)?;
    Ok(match raw.name {
        Some(name) => sys.with_name(name),
        None => sys,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<StochasticSystem, Error> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_json_str(&text, path)
}

fn push_matrix(out: &mut String, m: &Matrix, indent: &str) {
    out.push('[');
    for i in 0..m.rows() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "\n{indent}  [");
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push(']');
    }
    let _ = write!(out, "\n{indent}]");
}

pub fn to_json_string(sys: &StochasticSystem) -> String {
    let d = sys.dims();
    let mut out = String::from("{\n");
    if let Some(name) = &sys.name {
        let _ = writeln!(
            out,
            "  \"name\": {},",
            serde_json::Value::from(name.as_str())
        );
    }
    let _ = writeln!(
        out,
        "  \"n\": {}, \"k\": {}, \"m\": {}, \"p\": {},",
        d.n, d.k, d.m, d.p
    );
    out.push_str("  \"A\": ");
    push_matrix(&mut out, &sys.a, "  ");
    out.push_str(",\n  \"N\": [");
    for (j, nj) in sys.n_list.iter().enumerate() {
        if j > 0 {
            out.push(',');
        }
        out.push_str("\n    ");
        push_matrix(&mut out, nj, "    ");
    }
    out.push_str("\n  ],\n  \"B\": ");
    push_matrix(&mut out, &sys.b, "  ");
    out.push_str(",\n  \"C\": ");
    push_matrix(&mut out, &sys.c, "  ");
    out.push_str("\n}\n");
    out
}

/// Writes `contents` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> Result<(), Error> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = match dir {
        Some(d) => d.join(format!(".{file_name}.tmp{}", std::process::id())),
        None => format!(".{file_name}.tmp{}", std::process::id()).into(),
    };
    let mut f = fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(contents).map_err(io_err)?;
    f.sync_all().map_err(io_err)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn save(sys: &StochasticSystem, path: impl AsRef<Path>) -> Result<(), Error> {
    write_atomic(path, to_json_string(sys).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{build_ladder, example_noerrbound, LadderParams};

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sys.json");
        let mut sys = build_ladder(8, LadderParams::default()).unwrap();
        sys.a[(0, 0)] = 1.0 / 3.0;
        sys.b[(1, 0)] = -2.5e-300;
        save(&sys, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back, sys);
    }

    #[test]
    fn missing_field_is_named() {
        let text = r#"{"n":1,"k":1,"m":1,"p":1,"N":[[[0]]],"B":[[1]],"C":[[1]]}"#;
        let err = from_json_str(text, Path::new("x.json")).unwrap_err();
        assert!(
            matches!(&err, Error::Parse { message, .. } if message.contains("`A`")),
            "{err}"
        );
    }

    #[test]
    fn two_noise_channels_accepted() {
        let text =
            r#"{"n":1,"k":2,"m":1,"p":1,"A":[[-1]],"N":[[[0.1]],[[0.2]]],"B":[[1]],"C":[[1]]}"#;
        let sys = from_json_str(text, Path::new("x.json")).unwrap();
        assert_eq!(sys.dims().k, 2);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let text = r#"{"n":2,"k":1,"m":1,"p":1,"A":[[-1]],"N":[[[0]]],"B":[[1]],"C":[[1]]}"#;
        let err = from_json_str(text, Path::new("x.json")).unwrap_err();
        assert!(matches!(&err, Error::Parse { message, .. } if message.contains("`A`")));
    }

    #[test]
    fn name_is_preserved() {
        let sys = example_noerrbound(2.0).unwrap();
        let text = to_json_string(&sys);
        let back = from_json_str(&text, Path::new("x")).unwrap();
        assert_eq!(back.name.as_deref(), Some("example1(a=2)"));
    }
}
