//! Instance file format.
//!
//! ```json
//! {
//!   "name": "pf_variant",
//!   "leaders": [{"id": 1, "dim": 1, "lower": [0], "upper": [1], "phi": "0.5*x1"}],
//!   "h": "-w",
//!   "pi": "0.5*x1",
//!   "follower": {
//!     "dim": 1,
//!     "G": ["-1 + x1 + w"],
//!     "K": {"kind": "box", "lower": ["0"], "upper": [null]},
//!     "search_lower": [0], "search_upper": [2]
//!   }
//! }
//! ```
//!
//! Raw-mode instances replace `h` with `raw_h`, one string per leader.
//! Infinite K bounds are written as `null` or `"inf"`/`"-inf"`.

use serde::{Deserialize, Serialize};

use super::{CouplingDef, FollowerDef, GameInstance, InstanceParts, LeaderDef, ModelError};
use crate::expr::{parse_expression, Expr};
use crate::scalar::Scalar;
use crate::vi::FeasibleSetDef;

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    name: String,
    leaders: Vec<LeaderJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw_h: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pi: Option<String>,
    follower: FollowerJson,
}

#[derive(Debug, Serialize, Deserialize)]
struct LeaderJson {
    id: usize,
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    phi: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct FollowerJson {
    dim: usize,
    #[serde(rename = "G")]
    g: Vec<String>,
    #[serde(rename = "K")]
    k: KJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    search_lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    search_upper: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum KJson {
    Box {
        lower: Vec<Option<Scalarish>>,
        upper: Vec<Option<Scalarish>>,
    },
    Budget {
        b: Scalarish,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Scalarish {
    Num(f64),
    Text(String),
}

fn parse_field<T: Scalar>(field: impl Into<String>, text: &str) -> Result<Expr<T>, ModelError> {
    parse_expression(text).map_err(|source| ModelError::Parse {
        field: field.into(),
        source,
    })
}

fn bound_expr<T: Scalar>(
    field: String,
    b: Option<Scalarish>,
) -> Result<Option<Expr<T>>, ModelError> {
    match b {
        None => Ok(None),
        Some(Scalarish::Num(v)) if v.is_infinite() => Ok(None),
        Some(Scalarish::Num(v)) => Ok(Some(Expr::Const(T::lit(v)))),
        Some(Scalarish::Text(s)) => match s.trim() {
            "inf" | "+inf" | "-inf" | "infinity" | "-infinity" => Ok(None),
            other => parse_field(field, other).map(Some),
        },
    }
}

fn lits<T: Scalar>(v: Vec<f64>) -> Vec<T> {
    v.into_iter().map(T::lit).collect()
}

/// Parses and validates an instance file.
pub fn load_instance<T: Scalar>(json_text: &str) -> Result<GameInstance<T>, ModelError> {
    let file: InstanceFile =
        serde_json::from_str(json_text).map_err(|e| ModelError::Schema(e.to_string()))?;

    let mut leaders = Vec::with_capacity(file.leaders.len());
    for (pos, l) in file.leaders.into_iter().enumerate() {
        if l.id != pos + 1 {
            return Err(ModelError::Schema(format!(
                "leader ids must be 1..N in order; found id {} at position {}",
                l.id,
                pos + 1
            )));
        }
        if l.lower.len() != l.dim || l.upper.len() != l.dim {
            return Err(ModelError::DimensionMismatch {
                what: "leader bounds",
                expected: l.dim,
                found: l.lower.len().min(l.upper.len()),
            });
        }
        leaders.push(LeaderDef {
            lower: lits(l.lower),
            upper: lits(l.upper),
            phi: parse_field(format!("leaders[{pos}].phi"), &l.phi)?,
        });
    }

    let coupling = match (file.h, file.raw_h) {
        (Some(h), None) => CouplingDef::Shared(parse_field("h", &h)?),
        (None, Some(hs)) => CouplingDef::Raw(
            hs.iter()
                .enumerate()
                .map(|(i, h)| parse_field(format!("raw_h[{i}]"), h))
                .collect::<Result<_, _>>()?,
        ),
        (None, None) => return Err(ModelError::Schema("missing field `h`".into())),
        (Some(_), Some(_)) => {
            return Err(ModelError::Schema(
                "`h` and `raw_h` are mutually exclusive".into(),
            ))
        }
    };

    let pi = file.pi.map(|p| parse_field("pi", &p)).transpose()?;

    let f = file.follower;
    let g =
        f.g.iter()
            .enumerate()
            .map(|(j, s)| parse_field(format!("follower.G[{j}]"), s))
            .collect::<Result<Vec<_>, _>>()?;
    let k = match f.k {
        KJson::Box { lower, upper } => FeasibleSetDef::Box {
            lower: lower
                .into_iter()
                .enumerate()
                .map(|(j, b)| bound_expr(format!("follower.K.lower[{j}]"), b))
                .collect::<Result<_, _>>()?,
            upper: upper
                .into_iter()
                .enumerate()
                .map(|(j, b)| bound_expr(format!("follower.K.upper[{j}]"), b))
                .collect::<Result<_, _>>()?,
        },
        KJson::Budget { b } => FeasibleSetDef::Budget {
            b: bound_expr("follower.K.b".into(), Some(b))?
                .ok_or_else(|| ModelError::Invariant("budget must be finite".into()))?,
        },
    };
    let search = match (f.search_lower, f.search_upper) {
        (Some(lo), Some(hi)) => Some((lits(lo), lits(hi))),
        (None, None) => None,
        _ => {
            return Err(ModelError::Schema(
                "search_lower and search_upper must be given together".into(),
            ))
        }
    };

    GameInstance::from_parts(InstanceParts {
        name: file.name,
        leaders,
        coupling,
        pi,
        follower: FollowerDef {
            dim: f.dim,
            g,
            k,
            search,
        },
    })
}

impl<T: Scalar> GameInstance<T> {
    /// Serializes to the instance file format; `load_instance` reads it back.
    pub fn to_json(&self) -> String {
        let parts = self.to_parts();
        let f64s = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
        let text = |e: &Expr<T>| e.to_string();
        let bound = |b: &Option<Expr<T>>| b.as_ref().map(|e| Scalarish::Text(text(e)));
        let (h, raw_h) = match &parts.coupling {
            CouplingDef::Shared(h) => (Some(text(h)), None),
            CouplingDef::Raw(hs) => (None, Some(hs.iter().map(text).collect())),
        };
        let (search_lower, search_upper) = match &parts.follower.search {
            Some((lo, hi)) => (Some(f64s(lo)), Some(f64s(hi))),
            None => (None, None),
        };
        let file = InstanceFile {
            name: parts.name.clone(),
            leaders: parts
                .leaders
                .iter()
                .enumerate()
                .map(|(i, l)| LeaderJson {
                    id: i + 1,
                    dim: l.lower.len(),
                    lower: f64s(&l.lower),
                    upper: f64s(&l.upper),
                    phi: text(&l.phi),
                })
                .collect(),
            h,
            raw_h,
            pi: parts.pi.as_ref().map(text),
            follower: FollowerJson {
                dim: parts.follower.dim,
                g: parts.follower.g.iter().map(text).collect(),
                k: match &parts.follower.k {
                    FeasibleSetDef::Box { lower, upper } => KJson::Box {
                        lower: lower.iter().map(bound).collect(),
                        upper: upper.iter().map(bound).collect(),
                    },
                    FeasibleSetDef::Budget { b } => KJson::Budget {
                        b: Scalarish::Text(text(b)),
                    },
                },
                search_lower,
                search_upper,
            },
        };
        serde_json::to_string_pretty(&file).expect("instance file serializes")
    }
}
