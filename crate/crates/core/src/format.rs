//! JSON family descriptions.
//!
//! ```json
//! {"kind": "explicit", "blocks": [[[[2, 0]]], [[[0, 0], [0, 0]], [[1, 0], [0, 0]]]],
//!  "measure": "counting"}
//! {"kind": "generator", "name": "harmonic_diag", "tail": {"N0": 1, "upper": "1/n"}}
//! ```
//!
//! Blocks are lists of rows of `[re, im]` pairs. `"fixture"` is accepted as
//! a synonym of `"generator"`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{BlockFamily, BlockMatrix, FamilyError, MeasureSpec, TailCertificate};
use crate::fixtures::{make_fixture, FixtureError, FixtureName, FixtureParams, FixtureSpec};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0} flag entries for {1} blocks")]
    FlagCount(usize, usize),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockFlags {
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nilpotency_order: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)] // parsed once per run
pub enum FamilyDescription {
    Explicit {
        blocks: Vec<Vec<Vec<[f64; 2]>>>,
        #[serde(default)]
        measure: MeasureSpec,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        flags: Vec<BlockFlags>,
    },
    #[serde(alias = "fixture")]
    Generator {
        name: FixtureName,
        #[serde(default)]
        params: FixtureParams,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail: Option<TailCertificate>,
    },
}

impl FamilyDescription {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_blocks(blocks: &[BlockMatrix], measure: MeasureSpec) -> Self {
        let flags: Vec<BlockFlags> = blocks
            .iter()
            .map(|b| BlockFlags {
                normal: b.is_normal(),
                nilpotency_order: b.nilpotency_order(),
            })
            .collect();
        let any = flags.iter().any(|f| *f != BlockFlags::default());
        FamilyDescription::Explicit {
            blocks: blocks.iter().map(|b| b.to_rows()).collect(),
            measure,
            flags: if any { flags } else { Vec::new() },
        }
    }

    pub fn build(&self) -> Result<BlockFamily, FormatError> {
        match self {
            FamilyDescription::Explicit {
                blocks,
                measure,
                flags,
            } => {
                if !flags.is_empty() && flags.len() != blocks.len() {
                    return Err(FormatError::FlagCount(flags.len(), blocks.len()));
                }
                let built = blocks
                    .iter()
                    .enumerate()
                    .map(|(i, rows)| {
                        let rows: Vec<Vec<Complex64>> = rows
                            .iter()
                            .map(|r| r.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
                            .collect();
                        let mut b = BlockMatrix::from_rows(&rows)?;
                        if let Some(f) = flags.get(i) {
                            if f.normal {
                                b = b.with_normal()?;
                            }
                            if let Some(k) = f.nilpotency_order {
                                b = b.with_nilpotency(k)?;
                            }
                        }
                        Ok(b)
                    })
                    .enumerate()
                    .map(|(i, r)| {
                        r.map_err(|source| FamilyError::InvalidBlock {
                            index: i + 1,
                            source,
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(BlockFamily::explicit(built, measure.clone())?)
            }
            FamilyDescription::Generator { name, params, tail } => {
                let spec = FixtureSpec {
                    name: *name,
                    params: params.clone(),
                };
                Ok(make_fixture(&spec, tail.clone())?)
            }
        }
    }
}

impl fmt::Display for FamilyDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_string(self).map_err(|_| fmt::Error)?;
        f.write_str(&s)
    }
}

/// Parses and builds a family from JSON text.
pub fn parse_family(text: &str) -> Result<BlockFamily, FormatError> {
    FamilyDescription::parse(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_round_trip() {
        let text = r#"{"kind":"explicit","blocks":[[[[2,0]]],[[[0,0],[0,0]],[[1,0],[0,0]]]],"measure":"counting"}"#;
        let d = FamilyDescription::parse(text).unwrap();
        let f = d.build().unwrap();
        assert_eq!(f.len(), Some(2));
        assert_eq!(f.block(2).unwrap().get(1, 0), Complex64::new(1.0, 0.0));
        let again = FamilyDescription::parse(&d.to_string()).unwrap();
        assert_eq!(again, d);
    }

    #[test]
    fn generator_with_tail() {
        let f = parse_family(
            r#"{"kind":"generator","name":"harmonic_diag","tail":{"N0":1,"upper":"1/n"}}"#,
        )
        .unwrap();
        assert!(f.len().is_none());
        assert_eq!(f.tail().unwrap().upper.as_ref().unwrap().source(), "1/n");
        let f = parse_family(r#"{"kind":"fixture","name":"nilpotent2","params":{"alpha":[1,2,3]}}"#)
            .unwrap();
        assert_eq!(f.len(), Some(3));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_family("{\n  \"kind\": \"explicit\",\n  \"blocks\": [[[[1, 0]]],\n}").unwrap_err();
        let FormatError::Syntax { line, .. } = err else { panic!("{err:?}") };
        assert_eq!(line, 4);
        assert!(matches!(
            parse_family(r#"{"kind":"explicit","blocks":[[[[1,0],[2,0]]]]}"#),
            Err(FormatError::Family(FamilyError::InvalidBlock { index: 1, .. }))
        ));
        assert!(matches!(
            parse_family(r#"{"kind":"generator","name":"nope"}"#),
            Err(FormatError::Syntax { .. })
        ));
        assert!(matches!(
            parse_family(r#"{"kind":"explicit","blocks":[]}"#),
            Err(FormatError::Family(FamilyError::EmptyFamily))
        ));
    }

    #[test]
    fn weights_and_flags() {
        let f = parse_family(
            r#"{"kind":"explicit","blocks":[[[[0,0],[0,0]],[[5,0],[0,0]]]],
                "measure":{"weights":[0.5]},"flags":[{"nilpotency_order":2}]}"#,
        )
        .unwrap();
        assert_eq!(f.block(1).unwrap().nilpotency_order(), Some(2));
        assert_eq!(f.measure(), &MeasureSpec::Weights(vec![0.5]));
        assert!(parse_family(
            r#"{"kind":"explicit","blocks":[[[[1,0]]]],"flags":[{"nilpotency_order":1}]}"#
        )
        .is_err());
    }
}
