//! On-disk formats: JSON for solutions, branches and reports, CSV for
//! profiles, fields and contours.

use std::collections::BTreeMap;
use std::path::Path;

use babenko_core::geometry::{default_samples, surface_curve};
use babenko_core::model::{GeneralParams, ModelParams, Params};
use babenko_core::solver::{AEnd, Branch, BranchEvent, EventKind, PathSpec, Termination};
use babenko_core::spectral::Depth;
use babenko_core::{GeometryTolerances, HoloTrace, Solution};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    #[serde(rename = "G")]
    pub gravity: f64,
    pub a: Option<f64>,
    pub l: Option<f64>,
    pub omega: f64,
    #[serde(rename = "B")]
    pub bernoulli: f64,
    /// Conformal depth; `null` on the half-plane.
    pub d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<Value>,
    pub params: ParamsRecord,
    pub n: usize,
    pub coeffs: Vec<f64>,
    pub residual_norm: f64,
    pub class: String,
    pub diagnostics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    #[serde(rename = "G")]
    pub gravity: f64,
    pub l: f64,
    pub a_start: f64,
    /// A number or `"touch"`.
    pub a_end: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub kind: String,
    pub a: f64,
    pub refined: bool,
    pub solution: SolutionRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<Value>,
    pub path: PathRecord,
    pub termination: Option<String>,
    pub points: Vec<SolutionRecord>,
    pub events: Vec<EventRecord>,
}

fn depth_value(d: Depth) -> Option<f64> {
    match d {
        Depth::Finite(v) => Some(v),
        Depth::Infinite => None,
    }
}

impl SolutionRecord {
    pub fn from_solution(s: &Solution, config: Option<Value>) -> Self {
        let flow = s.params.flow();
        let (a, l) = match s.params.family() {
            Some(p) => (Some(p.a), Some(p.l)),
            None => (None, None),
        };
        SolutionRecord {
            version: FORMAT_VERSION,
            config,
            params: ParamsRecord {
                gravity: flow.gravity,
                a,
                l,
                omega: flow.omega,
                bernoulli: flow.bernoulli,
                d: depth_value(flow.depth),
            },
            n: s.trace.order(),
            coeffs: s.trace.coeffs().to_vec(),
            residual_norm: s.residual_norm,
            class: s.class.as_str().to_string(),
            diagnostics: s
                .diagnostics
                .iter()
                .filter(|(_, v)| v.is_finite())
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let p = &self.params;
        Ok(match p.a {
            Some(a) => Params::new(p.gravity, a, p.l.unwrap_or(0.0))?.into(),
            None => GeneralParams {
                omega: p.omega,
                bernoulli: p.bernoulli,
                gravity: p.gravity,
                depth: match p.d {
                    Some(d) => Depth::new(d)?,
                    None => Depth::Infinite,
                },
            }
            .into(),
        })
    }

    pub fn trace(&self) -> Result<HoloTrace, CliError> {
        if self.coeffs.len() != self.n + 1 {
            return Err(CliError::Config(format!(
                "solution file declares n = {} but stores {} coefficients",
                self.n,
                self.coeffs.len()
            )));
        }
        Ok(HoloTrace::new(self.coeffs.clone())?)
    }

    /// Rebuilds the solution, recomputing residual and geometry.
    pub fn to_solution(&self, tols: &GeometryTolerances) -> Result<Solution, CliError> {
        Ok(Solution::new(self.trace()?, self.model_params()?, tols)?)
    }
}

impl BranchRecord {
    pub fn from_branch(b: &Branch, config: Option<Value>) -> Self {
        BranchRecord {
            version: FORMAT_VERSION,
            config,
            path: PathRecord {
                gravity: b.path.gravity,
                l: b.path.l,
                a_start: b.path.a_start,
                a_end: match b.path.a_end {
                    AEnd::Touch => Value::String("touch".into()),
                    AEnd::Value(v) => Value::from(v),
                },
            },
            termination: b.termination.map(|t| match t {
                Termination::ReachedEnd => "reached_end".to_string(),
                Termination::Touching => "touching".to_string(),
            }),
            points: b.points.iter().map(|s| SolutionRecord::from_solution(s, None)).collect(),
            events: b
                .events
                .iter()
                .map(|e| EventRecord {
                    kind: e.kind.as_str().to_string(),
                    a: e.a,
                    refined: e.refined,
                    solution: SolutionRecord::from_solution(&e.solution, None),
                })
                .collect(),
        }
    }

    pub fn to_branch(&self, tols: &GeometryTolerances) -> Result<Branch, CliError> {
        let a_end = match &self.path.a_end {
            Value::String(s) if s == "touch" => AEnd::Touch,
            v => AEnd::Value(
                v.as_f64()
                    .ok_or_else(|| CliError::Config(format!("bad a_end in branch file: {v}")))?,
            ),
        };
        let termination = match self.termination.as_deref() {
            None => None,
            Some("reached_end") => Some(Termination::ReachedEnd),
            Some("touching") => Some(Termination::Touching),
            Some(other) => return Err(CliError::Config(format!("unknown termination `{other}`"))),
        };
        let points = self
            .points
            .iter()
            .map(|p| p.to_solution(tols))
            .collect::<Result<Vec<_>, _>>()?;
        let events = self
            .events
            .iter()
            .map(|e| {
                Ok(BranchEvent {
                    kind: EventKind::parse(&e.kind)
                        .ok_or_else(|| CliError::Config(format!("unknown event kind `{}`", e.kind)))?,
                    a: e.a,
                    refined: e.refined,
                    solution: e.solution.to_solution(tols)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(Branch {
            points,
            path: PathSpec {
                gravity: self.path.gravity,
                l: self.path.l,
                a_start: self.path.a_start,
                a_end,
            },
            events,
            termination,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProfileRow {
    pub alpha: f64,
    pub x: f64,
    pub y: f64,
    pub x_alpha: f64,
}

pub fn profile_rows(s: &Solution) -> Result<Vec<ProfileRow>, CliError> {
    let c = surface_curve(&s.trace, s.params.flow().depth, default_samples(s.trace.order()))?;
    Ok((0..c.alphas.len())
        .map(|j| ProfileRow {
            alpha: c.alphas[j],
            x: c.xs[j],
            y: c.ys[j],
            x_alpha: c.x_slopes[j],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use babenko_core::model::exact_solution_n;

    #[test]
    fn awkward_coefficients_survive_json() {
        let coeffs = vec![
            0.1 + 0.2,
            -0.0,
            f64::MIN_POSITIVE,
            5e-324,
            1.0 / 3.0,
            -2.2250738585072014e-308,
            1e300,
            std::f64::consts::PI,
        ];
        let sol = Solution {
            trace: HoloTrace::new(coeffs.clone()).unwrap(),
            params: Params::new(0.01, 0.1, 0.2).unwrap().into(),
            residual_norm: 1e-15,
            class: babenko_core::WaveClass::Regular,
            diagnostics: BTreeMap::from([("x".to_string(), 1.0), ("bad".to_string(), f64::NAN)]),
        };
        let rec = SolutionRecord::from_solution(&sol, None);
        assert!(!rec.diagnostics.contains_key("bad"));
        let back: SolutionRecord = serde_json::from_str(&serde_json::to_string_pretty(&rec).unwrap()).unwrap();
        assert_eq!(back, rec);
        for (x, y) in back.coeffs.iter().zip(&coeffs) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(back.params.d, Some(Depth::from_l(0.2).value()));
    }

    #[test]
    fn reload_recomputes_the_solution() {
        let tols = GeometryTolerances::default();
        let t = exact_solution_n(0.1, 40).unwrap();
        let sol = Solution::new(t, Params::new(0.0, 0.1, 0.0).unwrap().into(), &tols).unwrap();
        let mut rec = SolutionRecord::from_solution(&sol, None);
        rec.residual_norm = 1.0;
        let again = rec.to_solution(&tols).unwrap();
        assert_eq!(again.residual_norm, sol.residual_norm);
        assert_eq!(again.class, sol.class);
        rec.n = 3;
        assert!(matches!(rec.trace(), Err(CliError::Config(_))));
    }
}
