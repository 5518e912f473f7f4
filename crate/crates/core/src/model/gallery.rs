//! Built-in instances: the Pang–Fukushima game, its quasi-potential
//! variants, a follower with a three-point solution set, and a parametric
//! congestion-control game.

use std::collections::BTreeMap;

use super::{CouplingDef, FollowerDef, GameInstance, InstanceParts, LeaderDef, ModelError};
use crate::expr::{parse_expression, Expr};
use crate::scalar::Scalar;
use crate::vi::FeasibleSetDef;

pub const GALLERY_NAMES: [&str; 4] = [
    "pang_fukushima",
    "pf_variant",
    "multivalued_vi_demo",
    "congestion_control",
];

fn e<T: Scalar>(text: &str) -> Result<Expr<T>, ModelError> {
    parse_expression(text).map_err(|source| ModelError::Parse {
        field: format!("gallery expression '{text}'"),
        source,
    })
}

fn unit_leaders<T: Scalar>(phis: &[&str]) -> Result<Vec<LeaderDef<T>>, ModelError> {
    phis.iter()
        .map(|phi| {
            Ok(LeaderDef {
                lower: vec![T::zero()],
                upper: vec![T::one()],
                phi: e(phi)?,
            })
        })
        .collect()
}

// Follower of the Pang–Fukushima game: min_{y>=0} y(-1+x1+x2) + y^2/2,
// i.e. G(w; x) = -1 + x1 + x2 + w on K = [0, inf). S(x) = max(0, 1-x1-x2).
fn pf_follower<T: Scalar>() -> Result<FollowerDef<T>, ModelError> {
    Ok(FollowerDef {
        dim: 1,
        g: vec![e("-1 + x1 + x2 + w")?],
        k: FeasibleSetDef::Box {
            lower: vec![Some(e("0")?)],
            upper: vec![None],
        },
        search: Some((vec![T::zero()], vec![T::lit(2.0)])),
    })
}

struct Params {
    map: BTreeMap<String, String>,
}

impl Params {
    fn take(&mut self, keys: &[&str]) -> Option<String> {
        keys.iter().find_map(|k| self.map.remove(*k))
    }

    fn scalar(&mut self, key: &str, default: f64) -> Result<f64, ModelError> {
        match self.take(&[key]) {
            None => Ok(default),
            Some(s) => s
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    ModelError::InvalidParams(format!("{key}='{s}' is not a finite number"))
                }),
        }
    }

    fn list(&mut self, key: &str, n: usize, default: f64) -> Result<Vec<f64>, ModelError> {
        match self.take(&[key]) {
            None => Ok(vec![default; n]),
            Some(s) => {
                let vals = s
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| {
                        ModelError::InvalidParams(format!("{key}='{s}' is not a number list"))
                    })?;
                match vals.len() {
                    1 => Ok(vec![vals[0]; n]),
                    m if m == n => Ok(vals),
                    m => Err(ModelError::InvalidParams(format!(
                        "{key} has {m} entries, expected {n}"
                    ))),
                }
            }
        }
    }

    fn finish(self) -> Result<(), ModelError> {
        match self.map.keys().next() {
            Some(k) => Err(ModelError::InvalidParams(format!(
                "unknown parameter '{k}'"
            ))),
            None => Ok(()),
        }
    }
}

/// Builds a named gallery instance.
///
/// * `pang_fukushima`: the original two-leader game (raw mode, no potential).
/// * `pf_variant`: shared `h = h_expr(w)` (param `h` or `h_expr`, default `-w`).
/// * `multivalued_vi_demo`: follower `G(w) = 1 − 2w` on `[0, 1]`.
/// * `congestion_control`: params `N`, `a`, `c`, `gamma`, `xbar`.
pub fn build_gallery<T: Scalar>(
    name: &str,
    params: &BTreeMap<String, String>,
) -> Result<GameInstance<T>, ModelError> {
    let mut p = Params {
        map: params.clone(),
    };
    let parts = match name {
        "pang_fukushima" => InstanceParts {
            name: "pang_fukushima".into(),
            leaders: unit_leaders(&["0.5*x1", "-0.5*x2"])?,
            coupling: CouplingDef::Raw(vec![e("w")?, e("-w")?]),
            pi: None,
            follower: pf_follower()?,
        },
        "pf_variant" => {
            let h = p.take(&["h", "h_expr"]).unwrap_or_else(|| "-w".to_string());
            let h_expr = e::<T>(&h)?;
            if let Some(v) = h_expr.variables().into_iter().find(|v| v != "w") {
                return Err(ModelError::InvalidParams(format!(
                    "h must be a function of w only, found '{v}'"
                )));
            }
            InstanceParts {
                name: format!("pf_variant(h={h})"),
                leaders: unit_leaders(&["0.5*x1", "-0.5*x2"])?,
                coupling: CouplingDef::Shared(h_expr),
                pi: Some(e("0.5*x1 - 0.5*x2")?),
                follower: pf_follower()?,
            }
        }
        "multivalued_vi_demo" => InstanceParts {
            name: "multivalued_vi_demo".into(),
            leaders: unit_leaders(&["0"])?,
            coupling: CouplingDef::Shared(e("w")?),
            pi: Some(e("0")?),
            follower: FollowerDef {
                dim: 1,
                g: vec![e("1 - 2*w")?],
                k: FeasibleSetDef::Box {
                    lower: vec![Some(e("0")?)],
                    upper: vec![Some(e("1")?)],
                },
                search: None,
            },
        },
        "congestion_control" => {
            let n = p.scalar("N", 2.0)?;
            if n < 1.0 || n.fract() != 0.0 {
                return Err(ModelError::InvalidParams(format!(
                    "N={n} must be an integer >= 1"
                )));
            }
            let n = n as usize;
            let a = p.list("a", n, 1.0)?;
            let xbar = p.list("xbar", n, 1.0)?;
            let c = p.scalar("c", 1.0)?;
            let gamma = p.scalar("gamma", 1.0)?;
            if c <= 0.0 {
                return Err(ModelError::InvalidParams(format!(
                    "budget c={c} must be positive"
                )));
            }
            if xbar.iter().any(|&v| v <= 0.0) {
                return Err(ModelError::InvalidParams(
                    "xbar entries must be positive".into(),
                ));
            }
            if gamma < 0.0 {
                return Err(ModelError::InvalidParams(
                    "gamma must be nonnegative".into(),
                ));
            }
            let names = (1..=n).map(|i| format!("x{i}")).collect::<Vec<_>>();
            let ws = super::follower_var_names(n);
            let leaders = (0..n)
                .map(|i| {
                    Ok(LeaderDef {
                        lower: vec![T::zero()],
                        upper: vec![T::lit(xbar[i])],
                        phi: e(&format!("-{}*log(1 + {})", a[i], names[i]))?,
                    })
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            let pi = (0..n)
                .map(|i| format!("{}*log(1 + {})", a[i], names[i]))
                .collect::<Vec<_>>()
                .join(" + ");
            let h = ws
                .iter()
                .map(|w| format!("{w}^2"))
                .collect::<Vec<_>>()
                .join(" + ");
            InstanceParts {
                name: format!("congestion_control(N={n})"),
                leaders,
                coupling: CouplingDef::Shared(e(&format!("{gamma}*({h})"))?),
                pi: Some(e(&format!("-({pi})"))?),
                follower: FollowerDef {
                    dim: n,
                    g: ws
                        .iter()
                        .zip(&names)
                        .map(|(w, x)| e(&format!("{w} - {x}")))
                        .collect::<Result<_, _>>()?,
                    k: FeasibleSetDef::Budget {
                        b: e(&format!("{c}"))?,
                    },
                    search: None,
                },
            }
        }
        other => return Err(ModelError::UnknownGallery(other.to_string())),
    };
    p.finish()?;
    GameInstance::from_parts(parts)
}
