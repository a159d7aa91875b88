//! Parameter sweeps, scheme comparisons and their CSV tables.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    depleted_energy_policy, no_transfer_policy, nonc_df_policy, uniform_power_policy, BaselineKind,
};
use crate::error::{ConstraintClass, Error, Result};
use crate::model::ScenarioConfig;
use crate::solver::{dinkelbach_optimize, SolveResult, SolveStatus, SolverOptions};

/// Quantity varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Outage threshold.
    PrOut0,
    /// Relay shift in meters: user-relay distances grow by the shift and
    /// relay-destination distances shrink by it.
    Delta,
    /// Transfer efficiency.
    Eta,
    /// Nakagami fading parameter.
    M,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::PrOut0 => "pr_out_0",
            Axis::Delta => "delta",
            Axis::Eta => "eta",
            Axis::M => "m",
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Axis::PrOut0, Axis::Delta, Axis::Eta, Axis::M]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown sweep axis `{s}` (pr_out_0, delta, eta, m)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: Axis,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = Error;

    /// Parses `axis=v1,v2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (axis, list) = s.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("sweep `{s}` must look like axis=v1,v2,..."))
        })?;
        let values = list
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidArgument(format!("sweep value `{v}` is not a number"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "sweep needs at least one value".into(),
            ));
        }
        Ok(Sweep {
            axis: axis.trim().parse()?,
            values,
        })
    }
}

/// Applies `key=value` overrides to a scenario document before it is
/// parsed. Keys are dotted paths into the document (`eta`, `d_g.2`,
/// `arrivals.0.3`); values are JSON, or plain strings when not valid JSON.
pub fn apply_overrides(doc: &mut serde_json::Value, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, raw) = item.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("override `{item}` must look like key=value"))
        })?;
        let value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut target = &mut *doc;
        for part in key.split('.') {
            target = match target {
                serde_json::Value::Object(map) => map
                    .get_mut(part)
                    .ok_or_else(|| Error::config(key, format!("no field `{part}`")))?,
                serde_json::Value::Array(items) => {
                    let idx: usize = part
                        .parse()
                        .map_err(|_| Error::config(key, format!("`{part}` is not an index")))?;
                    let len = items.len();
                    items.get_mut(idx).ok_or_else(|| {
                        Error::config(key, format!("index {idx} out of range (length {len})"))
                    })?
                }
                _ => {
                    return Err(Error::config(
                        key,
                        format!("`{part}` does not name a field"),
                    ))
                }
            };
        }
        *target = value;
    }
    Ok(())
}

/// Scenario with one sweep value applied.
pub fn apply_axis(config: &ScenarioConfig, axis: Axis, value: f64) -> Result<ScenarioConfig> {
    let mut c = config.clone();
    match axis {
        Axis::PrOut0 => c.pr_out_0 = value,
        Axis::Eta => c.eta = value,
        Axis::M => c.m = value,
        Axis::Delta => {
            if let Some((j, d)) = c.d_g.iter().enumerate().find(|(_, d)| **d - value <= 0.0) {
                return Err(Error::Infeasible {
                    class: ConstraintClass::Geometry,
                    detail: format!(
                        "shift {value} m leaves relay {j} at distance {} m",
                        d - value
                    ),
                });
            }
            c.d_h = c.d_h.map(|d| d + value);
            for d in &mut c.d_g {
                *d -= value;
            }
        }
    }
    c.validate()?;
    Ok(c)
}

/// Outcome of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis: Axis,
    pub value: f64,
    pub feasible: bool,
    /// `converged`, `max_iter`, `infeasible` or `error`.
    pub status: String,
    /// Binding constraint class or error text when not feasible.
    pub reason: String,
    pub ee: Option<f64>,
    pub q_star: Option<f64>,
    pub total_energy: Option<f64>,
    pub transferred: Option<f64>,
    pub pr_out: Vec<f64>,
}

fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIter => "max_iter",
        SolveStatus::Infeasible => "infeasible",
    }
}

fn point_from(axis: Axis, value: f64, outcome: Result<SolveResult>) -> SweepPoint {
    let mut point = SweepPoint {
        axis,
        value,
        feasible: false,
        status: String::new(),
        reason: String::new(),
        ee: None,
        q_star: None,
        total_energy: None,
        transferred: None,
        pr_out: vec![],
    };
    match outcome {
        Ok(r) => {
            point.feasible = r.status != SolveStatus::Infeasible && r.feasibility.feasible;
            point.status = status_name(r.status).into();
            if !point.feasible {
                point.reason = r
                    .feasibility
                    .violated_classes()
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join("+");
            }
            point.ee = Some(r.ee_exact);
            point.q_star = Some(r.q_star);
            point.total_energy = Some(r.total_energy);
            point.transferred = Some(r.policy.total_transferred());
            point.pr_out = r.outage.pr_out;
        }
        Err(Error::Infeasible { class, .. }) => {
            point.status = "infeasible".into();
            point.reason = class.to_string();
        }
        Err(e) => {
            point.status = "error".into();
            point.reason = e.to_string();
        }
    }
    point
}

/// Re-optimizes the scenario at every sweep value. Points run in parallel
/// and come back in the order of `sweep.values`.
pub fn run_sweep(
    config: &ScenarioConfig,
    sweep: &Sweep,
    options: &SolverOptions,
) -> Vec<SweepPoint> {
    sweep
        .values
        .par_iter()
        .map(|&v| {
            let outcome =
                apply_axis(config, sweep.axis, v).and_then(|c| dinkelbach_optimize(&c, options));
            point_from(sweep.axis, v, outcome)
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Header: `axis,value,feasible,status,reason,ee,q_star,total_energy,
/// transferred,pr_out_1..pr_out_K`.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], periods: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "axis",
        "value",
        "feasible",
        "status",
        "reason",
        "ee",
        "q_star",
        "total_energy",
        "transferred",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=periods).map(|k| format!("pr_out_{k}")));
    w.write_record(&header).map_err(csv_error)?;
    for p in points {
        let mut row = vec![
            p.axis.name().to_string(),
            p.value.to_string(),
            p.feasible.to_string(),
            p.status.clone(),
            p.reason.clone(),
            opt(p.ee),
            opt(p.q_star),
            opt(p.total_energy),
            opt(p.transferred),
        ];
        row.extend((0..periods).map(|k| opt(p.pr_out.get(k).copied())));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Label of the optimized scheme in comparison tables.
pub const PROPOSED: &str = "proposed";

/// One scheme at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub pr_out_0: f64,
    pub scheme: String,
    pub feasible: bool,
    /// Whether the scheme's own outage requirement is met; the uniform
    /// scheme does not impose one.
    pub meets_outage: bool,
    pub ee: Option<f64>,
    pub total_energy: Option<f64>,
    pub transferred: Option<f64>,
    pub max_pr_out: Option<f64>,
    pub note: String,
}

fn row_from(pr_out_0: f64, scheme: &str, outcome: &Result<SolveResult>) -> CompareRow {
    let mut row = CompareRow {
        pr_out_0,
        scheme: scheme.to_string(),
        feasible: false,
        meets_outage: false,
        ee: None,
        total_energy: None,
        transferred: None,
        max_pr_out: None,
        note: String::new(),
    };
    match outcome {
        Ok(r) => {
            row.feasible = r.status != SolveStatus::Infeasible && r.feasibility.feasible;
            row.meets_outage = row.feasible;
            row.ee = Some(r.ee_exact);
            row.total_energy = Some(r.total_energy);
            row.transferred = Some(r.policy.total_transferred());
            row.max_pr_out = Some(r.outage.max());
            row.note = status_name(r.status).into();
        }
        Err(Error::Infeasible { class, .. }) => row.note = format!("infeasible: {class}"),
        Err(e) => row.note = format!("error: {e}"),
    }
    row
}

/// Runs the proposed scheme and every baseline at each threshold. The
/// depleted-energy scheme allows transfers within a period.
pub fn run_compare(
    config: &ScenarioConfig,
    thresholds: &[f64],
    options: &SolverOptions,
) -> Vec<CompareRow> {
    thresholds
        .par_iter()
        .map(|&th| {
            let mut rows = Vec::new();
            let c = match apply_axis(config, Axis::PrOut0, th) {
                Ok(c) => c,
                Err(e) => {
                    let err: Result<SolveResult> = Err(e);
                    rows.push(row_from(th, PROPOSED, &err));
                    return rows;
                }
            };
            let proposed = dinkelbach_optimize(&c, options);
            rows.push(row_from(th, PROPOSED, &proposed));
            for kind in BaselineKind::ALL {
                let row = match kind {
                    BaselineKind::NoTransfer => {
                        row_from(th, kind.name(), &no_transfer_policy(&c, options))
                    }
                    BaselineKind::DepletedEnergy => {
                        row_from(th, kind.name(), &depleted_energy_policy(&c, true, options))
                    }
                    BaselineKind::NoncDf => row_from(th, kind.name(), &nonc_df_policy(&c, options)),
                    BaselineKind::UniformPower => match &proposed {
                        Ok(reference) => match uniform_power_policy(&c, reference) {
                            Ok(u) => CompareRow {
                                pr_out_0: th,
                                scheme: kind.name().into(),
                                feasible: u.feasibility.feasible,
                                meets_outage: u.meets_outage,
                                ee: Some(u.ee_exact),
                                total_energy: Some(u.total_energy),
                                transferred: Some(u.policy.total_transferred()),
                                max_pr_out: Some(u.outage.max()),
                                note: if u.power_reduced {
                                    format!("power lowered from {} to {}", u.nominal_power, u.power)
                                } else {
                                    String::new()
                                },
                            },
                            Err(e) => row_from(th, kind.name(), &Err(e)),
                        },
                        Err(_) => CompareRow {
                            note: "no relay powers: proposed scheme has no solution".into(),
                            ..row_from(th, kind.name(), &Err(Error::UndefinedRatio))
                        },
                    },
                };
                rows.push(row);
            }
            rows
        })
        .flatten()
        .collect()
}

/// Header: `pr_out_0,scheme,feasible,meets_outage,ee,total_energy,
/// transferred,max_pr_out,note`.
pub fn write_compare_csv<W: Write>(rows: &[CompareRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "pr_out_0",
        "scheme",
        "feasible",
        "meets_outage",
        "ee",
        "total_energy",
        "transferred",
        "max_pr_out",
        "note",
    ])
    .map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.pr_out_0.to_string(),
            r.scheme.clone(),
            r.feasible.to_string(),
            r.meets_outage.to_string(),
            opt(r.ee),
            opt(r.total_energy),
            opt(r.transferred),
            opt(r.max_pr_out),
            r.note.clone(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_sweep() {
        let s: Sweep = "delta=0,150,300".parse().unwrap();
        assert_eq!(s.axis, Axis::Delta);
        assert_eq!(s.values, vec![0.0, 150.0, 300.0]);
        assert!("speed=1".parse::<Sweep>().is_err());
        assert!("eta".parse::<Sweep>().is_err());
        assert!("eta=a".parse::<Sweep>().is_err());
    }

    #[test]
    fn overrides_follow_paths() {
        let mut doc = serde_json::json!({"eta": 0.6, "d_g": [1.0, 2.0], "arrivals": [[1.0, 2.0]]});
        apply_overrides(
            &mut doc,
            &[
                "eta=0.2".into(),
                "d_g.1=5".into(),
                "arrivals.0.0=3.5".into(),
            ],
        )
        .unwrap();
        assert_eq!(doc["eta"], 0.2);
        assert_eq!(doc["d_g"][1], 5);
        assert_eq!(doc["arrivals"][0][0], 3.5);
        assert!(apply_overrides(&mut doc, &["nope=1".into()]).is_err());
        assert!(apply_overrides(&mut doc, &["d_g.7=1".into()]).is_err());
        assert!(apply_overrides(&mut doc, &["eta".into()]).is_err());
    }

    #[test]
    fn relay_shift_moves_both_hops() {
        let c = ScenarioConfig::bundled();
        let s = apply_axis(&c, Axis::Delta, 150.0).unwrap();
        assert_eq!(s.d_h[(0, 0)], c.d_h[(0, 0)] + 150.0);
        assert_eq!(s.d_g[0], c.d_g[0] - 150.0);
    }

    #[test]
    fn relay_shift_geometry_guard() {
        let c = ScenarioConfig::bundled();
        let err = apply_axis(&c, Axis::Delta, 500.0).unwrap_err();
        assert!(matches!(
            err,
            Error::Infeasible {
                class: ConstraintClass::Geometry,
                ..
            }
        ));
        let p = point_from(Axis::Delta, 500.0, Err(err));
        assert!(!p.feasible);
        assert_eq!(p.reason, "geometry");
    }
}
