//! JSON operator literals and factory specs.
//!
//! Literal: `{"dim": d, "matrix": [[...], ...], "translation": [...]}` with the
//! matrix row-major and `translation` optional.
//! Factory: `{"kind": "rotation", "params": {"theta": 1.0}, "translation": [...]}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::operators::{synthesize_nonexpansive, AffineOperator, LinearOperator, SynthesisSpec};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum FactorySpec {
    Identity { dim: usize },
    NegativeIdentity { dim: usize },
    ScaledIdentity { dim: usize, factor: f64 },
    Diagonal { entries: Vec<f64> },
    Rotation { theta: f64 },
    Synthesized(SynthesisSpec),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<Vec<f64>>,
}

/// A parsed operator: linear, or affine when a translation was given.
#[derive(Debug, Clone)]
pub enum BuiltOperator<S> {
    Linear(LinearOperator<S>),
    Affine(AffineOperator<S>),
}

impl OperatorSpec {
    pub fn literal(matrix: Vec<Vec<f64>>) -> Self {
        Self { dim: Some(matrix.len()), matrix: Some(matrix), ..Self::default() }
    }

    pub fn factory(factory: &FactorySpec) -> Self {
        let value = serde_json::to_value(factory).expect("factory spec serializes");
        Self {
            kind: value.get("kind").and_then(|k| k.as_str()).map(str::to_owned),
            params: value.get("params").cloned(),
            ..Self::default()
        }
    }

    pub fn with_translation(mut self, translation: Vec<f64>) -> Self {
        self.translation = Some(translation);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("operator: {e}")))
    }

    /// The factory part, if this is a factory spec.
    pub fn factory_spec(&self) -> Result<Option<FactorySpec>> {
        let Some(kind) = &self.kind else { return Ok(None) };
        let mut obj = serde_json::Map::new();
        obj.insert("kind".into(), serde_json::Value::String(kind.clone()));
        if let Some(p) = &self.params {
            obj.insert("params".into(), p.clone());
        }
        serde_json::from_value(serde_json::Value::Object(obj))
            .map(Some)
            .map_err(|e| Error::Parse(format!("operator.params for kind '{kind}': {e}")))
    }

    pub fn build<S: Scalar>(&self) -> Result<BuiltOperator<S>> {
        let linear = match (&self.matrix, self.factory_spec()?) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid("operator: give either 'matrix' or 'kind', not both"))
            }
            (None, None) => return Err(Error::invalid("operator: missing 'matrix' or 'kind'")),
            (Some(rows), None) => {
                let dim = self.dim.ok_or_else(|| Error::invalid("operator.dim is required with 'matrix'"))?;
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::invalid(format!("operator.matrix must be {dim}x{dim}")));
                }
                let rows: Vec<Vec<S>> = rows.iter().map(|r| r.iter().map(|&v| S::lit(v)).collect()).collect();
                LinearOperator::new(Matrix::from_rows(&rows)?)?
            }
            (None, Some(factory)) => build_factory(&factory)?,
        };
        if let Some(dim) = self.dim {
            if dim != linear.dim() {
                return Err(Error::invalid(format!("operator.dim {dim} does not match operator dimension {}", linear.dim())));
            }
        }
        match &self.translation {
            None => Ok(BuiltOperator::Linear(linear)),
            Some(b) => {
                let b = Vector::from_f64_slice(b).map_err(|e| Error::invalid(format!("operator.translation: {e}")))?;
                if b.dim() != linear.dim() {
                    return Err(Error::invalid(format!(
                        "operator.translation has length {}, expected {}",
                        b.dim(),
                        linear.dim()
                    )));
                }
                Ok(BuiltOperator::Affine(AffineOperator::new(linear, b)?))
            }
        }
    }
}

fn build_factory<S: Scalar>(factory: &FactorySpec) -> Result<LinearOperator<S>> {
    let nonzero = |dim: usize| {
        if dim == 0 {
            Err(Error::invalid("operator.params.dim must be at least 1"))
        } else {
            Ok(dim)
        }
    };
    match factory {
        FactorySpec::Identity { dim } => Ok(LinearOperator::identity(nonzero(*dim)?)),
        FactorySpec::NegativeIdentity { dim } => Ok(LinearOperator::scaled_identity(nonzero(*dim)?, -S::one())),
        FactorySpec::ScaledIdentity { dim, factor } => {
            if !factor.is_finite() {
                return Err(Error::NonFinite("operator.params.factor".into()));
            }
            Ok(LinearOperator::scaled_identity(nonzero(*dim)?, S::lit(*factor)))
        }
        FactorySpec::Diagonal { entries } => {
            LinearOperator::diagonal(&entries.iter().map(|&v| S::lit(v)).collect::<Vec<_>>())
        }
        FactorySpec::Rotation { theta } => LinearOperator::rotation(S::lit(*theta)),
        FactorySpec::Synthesized(spec) => Ok(synthesize_nonexpansive::<S>(spec)?.operator),
    }
}

impl<S: Scalar> BuiltOperator<S> {
    pub fn dim(&self) -> usize {
        match self {
            BuiltOperator::Linear(t) => t.dim(),
            BuiltOperator::Affine(t) => t.dim(),
        }
    }

    pub fn linear(&self) -> &LinearOperator<S> {
        match self {
            BuiltOperator::Linear(t) => t,
            BuiltOperator::Affine(t) => t.linear(),
        }
    }
}

impl<S: Scalar> crate::operators::NonexpansiveMap<S> for BuiltOperator<S> {
    fn dim(&self) -> usize {
        BuiltOperator::dim(self)
    }

    fn linear_part(&self) -> &LinearOperator<S> {
        self.linear()
    }

    fn translation(&self) -> Option<&Vector<S>> {
        match self {
            BuiltOperator::Linear(_) => None,
            BuiltOperator::Affine(t) => Some(t.translation()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_round_trip() {
        let spec = OperatorSpec::from_json(r#"{"dim": 2, "matrix": [[0.0, -1.0], [1.0, 0.0]]}"#).unwrap();
        let op = spec.build::<f64>().unwrap();
        assert!(matches!(op, BuiltOperator::Linear(_)));
        assert_eq!(op.linear().matrix()[(0, 1)], -1.0);
    }

    #[test]
    fn literal_with_translation_is_affine() {
        let spec = OperatorSpec::from_json(
            r#"{"dim": 2, "matrix": [[1.0, 0.0], [0.0, 0.0]], "translation": [0.0, 1.0]}"#,
        )
        .unwrap();
        assert!(matches!(spec.build::<f64>().unwrap(), BuiltOperator::Affine(_)));
    }

    #[test]
    fn factories() {
        let rot = OperatorSpec::from_json(r#"{"kind": "rotation", "params": {"theta": 0.5}}"#).unwrap();
        assert_eq!(rot.build::<f64>().unwrap().dim(), 2);
        let syn = OperatorSpec::from_json(
            r#"{"kind": "synthesized", "params": {"seed": 3, "dim": 5, "fix_dim": 2, "gap": 1.0, "block": "quarter_turn"}}"#,
        )
        .unwrap();
        assert_eq!(syn.build::<f64>().unwrap().dim(), 5);
        let neg = OperatorSpec::factory(&FactorySpec::NegativeIdentity { dim: 3 });
        assert_eq!(neg.build::<f64>().unwrap().linear().matrix()[(2, 2)], -1.0);
    }

    #[test]
    fn field_level_errors() {
        let bad_dim = OperatorSpec::from_json(r#"{"dim": 3, "matrix": [[1.0, 0.0], [0.0, 1.0]]}"#).unwrap();
        let msg = bad_dim.build::<f64>().unwrap_err().to_string();
        assert!(msg.contains("operator.matrix"), "{msg}");

        let bad_b = OperatorSpec::literal(vec![vec![1.0]]).with_translation(vec![1.0, 2.0]);
        assert!(bad_b.build::<f64>().unwrap_err().to_string().contains("translation"));

        let bad_kind = OperatorSpec::from_json(r#"{"kind": "spiral", "params": {}}"#).unwrap();
        assert!(bad_kind.build::<f64>().is_err());

        assert!(OperatorSpec::from_json(r#"{"matrx": [[1.0]]}"#).is_err());
        assert!(OperatorSpec::default().build::<f64>().is_err());
    }
}
