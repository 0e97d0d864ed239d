//! `zla-model v1` text parameter files.
//!
//! ```text
//! zla-model v1
//! kind prototype
//! attr tau 0.04
//! tensor w1 16 1024
//! <row-major values, space separated>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::numgrad::Tensor;

pub const HEADER: &str = "zla-model v1";

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("model kind is `{found}`, expected `{expected}`")]
    WrongKind { expected: String, found: String },
    #[error("missing {what} `{name}`")]
    Missing { what: &'static str, name: String },
    #[error("attribute `{name}` has invalid value `{value}`")]
    BadAttr { name: String, value: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub kind: String,
    pub attrs: Vec<(String, String)>,
    pub tensors: Vec<(String, Tensor)>,
}

impl ModelFile {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            attrs: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn attr(mut self, name: &str, value: impl ToString) -> Self {
        self.attrs.push((name.to_string(), value.to_string()));
        self
    }

    pub fn tensor(mut self, name: &str, t: &Tensor) -> Self {
        self.tensors.push((name.to_string(), t.clone()));
        self
    }

    pub fn expect_kind(&self, kind: &str) -> Result<(), ModelFileError> {
        if self.kind != kind {
            return Err(ModelFileError::WrongKind {
                expected: kind.to_string(),
                found: self.kind.clone(),
            });
        }
        Ok(())
    }

    pub fn get_attr(&self, name: &str) -> Result<&str, ModelFileError> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| ModelFileError::Missing {
                what: "attribute",
                name: name.to_string(),
            })
    }

    pub fn parse_attr<T: std::str::FromStr>(&self, name: &str) -> Result<T, ModelFileError> {
        let raw = self.get_attr(name)?;
        raw.parse().map_err(|_| ModelFileError::BadAttr {
            name: name.to_string(),
            value: raw.to_string(),
        })
    }

    pub fn get_tensor(&self, name: &str) -> Result<&Tensor, ModelFileError> {
        self.tensors
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, t)| t)
            .ok_or_else(|| ModelFileError::Missing {
                what: "tensor",
                name: name.to_string(),
            })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER}\nkind {}\n", self.kind);
        for (k, v) in &self.attrs {
            let _ = writeln!(out, "attr {k} {v}");
        }
        for (name, t) in &self.tensors {
            let _ = writeln!(out, "tensor {name} {} {}", t.rows(), t.cols());
            let vals: Vec<String> = t.data().iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&vals.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ModelFileError> {
        let err = |line: usize, msg: &str| ModelFileError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim() == HEADER => {}
            _ => return Err(err(1, "missing `zla-model v1` header")),
        }
        let kind = match lines.next() {
            Some((_, l)) if l.starts_with("kind ") => l[5..].trim().to_string(),
            Some((n, _)) => return Err(err(n, "expected `kind <name>`")),
            None => return Err(err(2, "expected `kind <name>`")),
        };
        let mut file = ModelFile::new(kind);
        while let Some((n, line)) = lines.next() {
            let mut parts = line.split_whitespace();
            match parts.next() {
                None => continue,
                Some("attr") => {
                    let name = parts.next().ok_or_else(|| err(n, "attr without name"))?;
                    let value = parts.collect::<Vec<_>>().join(" ");
                    file.attrs.push((name.to_string(), value));
                }
                Some("tensor") => {
                    let name = parts.next().ok_or_else(|| err(n, "tensor without name"))?;
                    let mut dim = || -> Result<usize, ModelFileError> {
                        parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| err(n, "tensor dims must be two integers"))
                    };
                    let (rows, cols) = (dim()?, dim()?);
                    let (vn, vline) = lines.next().ok_or_else(|| err(n + 1, "missing tensor values"))?;
                    let values = vline
                        .split_whitespace()
                        .map(|s| s.parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| err(vn, "malformed number"))?;
                    let t = Tensor::new(rows, cols, values).map_err(|e| err(vn, &e.to_string()))?;
                    file.tensors.push((name.to_string(), t));
                }
                Some(other) => return Err(err(n, &format!("unknown record `{other}`"))),
            }
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelFileError> {
        std::fs::write(path, self.to_text()).map_err(|source| ModelFileError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let t = Tensor::new(2, 2, vec![0.1, -1e-300, 3.0, 1.0 / 3.0]).unwrap();
        let f = ModelFile::new("mse_mapper").attr("slope", 0.2).tensor("w1", &t);
        let text = f.to_text();
        assert!(text.starts_with("zla-model v1\n"));
        assert_eq!(ModelFile::parse(&text).unwrap(), f);
    }

    #[test]
    fn bad_inputs_report_lines() {
        assert!(matches!(ModelFile::parse("nope"), Err(ModelFileError::Parse { line: 1, .. })));
        let text = "zla-model v1\nkind x\ntensor w 1 2\n1.0 abc\n";
        assert!(matches!(ModelFile::parse(text), Err(ModelFileError::Parse { line: 4, .. })));
        let text = "zla-model v1\nkind x\ntensor w 1 2\n1.0\n";
        assert!(ModelFile::parse(text).is_err());
    }
}
