use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::localization::OrientationEstimate;
use crate::sim::{RunStatus, SimError, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub steps: usize,
    pub status: RunStatus,
    /// Largest recorded bearing spread of a tracker's MAVs, radians.
    pub max_separation: f64,
    /// Same, over the plan sampled at its own time step.
    pub planned_max_separation: Option<f64>,
    pub tour_lengths: Vec<f64>,
    pub total_tour_length: f64,
    /// Aligned planar RMSE at the last step with an estimate.
    pub rmse: Option<f64>,
    pub mean_rmse: Option<f64>,
    pub degraded_steps: usize,
    pub orientation: Option<OrientationEstimate<f64>>,
}

impl Summary {
    pub fn from_trace(trace: &Trace) -> Self {
        let rmses: Vec<f64> = trace.records.iter().filter_map(|r| r.rmse).collect();
        let tour_lengths: Vec<f64> = trace.plan.as_ref().map_or(Vec::new(), |p| p.tours.iter().map(|t| t.length).collect());
        Self {
            steps: trace.records.len(),
            status: trace.status.clone(),
            max_separation: trace.records.iter().filter_map(|r| r.separation).fold(0.0, f64::max),
            planned_max_separation: trace.plan.as_ref().map(|p| p.max_separation),
            total_tour_length: tour_lengths.iter().fold(0.0, |a, b| a + b),
            tour_lengths,
            rmse: rmses.last().copied(),
            mean_rmse: (!rmses.is_empty()).then(|| rmses.iter().sum::<f64>() / rmses.len() as f64),
            degraded_steps: trace.records.iter().filter(|r| r.degraded).count(),
            orientation: trace.orientation,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SimError {
    SimError::Io(format!("{}: {e}", path.display()))
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), SimError> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    w.write_record(header).map_err(|e| io_err(&path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

/// Writes the CSV series, `summary.json` and `trace.json` into `out_dir`,
/// creating it if needed.
pub fn emit_metrics(trace: &Trace, out_dir: impl AsRef<Path>) -> Result<Summary, SimError> {
    if trace.records.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    write_csv(
        dir,
        "eigenvalue.csv",
        &["t", "lambda4"],
        trace.records.iter().map(|r| vec![r.t.to_string(), r.rigidity_eigenvalue.to_string()]),
    )?;

    let poses = trace.records.iter().flat_map(|r| {
        r.truth.iter().enumerate().map(move |(i, tr)| {
            let est = r.estimate.as_ref().map(|e| e[i]);
            vec![
                r.t.to_string(),
                i.to_string(),
                format!("{:?}", trace.kinds[i]).to_lowercase(),
                tr.position.x.to_string(),
                tr.position.y.to_string(),
                tr.position.z.to_string(),
                tr.yaw.to_string(),
                opt(est.map(|e| e.position.x)),
                opt(est.map(|e| e.position.y)),
                opt(est.map(|e| e.position.z)),
                opt(est.map(|e| e.yaw)),
                r.degraded.to_string(),
            ]
        })
    });
    write_csv(
        dir,
        "poses.csv",
        &["t", "agent", "kind", "true_x", "true_y", "true_z", "true_yaw", "est_x", "est_y", "est_z", "est_yaw", "degraded"],
        poses,
    )?;

    write_csv(
        dir,
        "separation.csv",
        &["t", "separation"],
        trace.records.iter().filter_map(|r| r.separation.map(|s| vec![r.t.to_string(), s.to_string()])),
    )?;

    let t0 = trace.flight_start.unwrap_or(0.0);
    let profiles = trace.plan.iter().flat_map(|p| {
        p.trajectories.iter().flat_map(move |tr| {
            tr.samples.iter().map(move |s| {
                vec![(t0 + s.t).to_string(), tr.mav.to_string(), s.speed.to_string(), s.acceleration.to_string()]
            })
        })
    });
    write_csv(dir, "profiles.csv", &["t", "mav_id", "v", "a"], profiles)?;

    let tours = trace.plan.iter().flat_map(|p| {
        p.tours.iter().enumerate().flat_map(|(m, tour)| {
            tour.visits.iter().zip(&tour.legs).enumerate().map(move |(k, (v, leg))| {
                vec![
                    m.to_string(),
                    k.to_string(),
                    v.neighborhood.to_string(),
                    v.touch.position.x.to_string(),
                    v.touch.position.y.to_string(),
                    v.touch.yaw.to_string(),
                    leg.length().to_string(),
                ]
            })
        })
    });
    write_csv(dir, "tours.csv", &["mav_id", "order", "neighborhood", "x", "y", "heading", "leg_length"], tours)?;

    let summary = Summary::from_trace(trace);
    let write_json = |name: &str, body: String| -> Result<(), SimError> {
        let path = dir.join(name);
        let mut f = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
        f.write_all(body.as_bytes()).and_then(|_| f.flush()).map_err(|e| io_err(&path, e))
    };
    write_json("summary.json", serde_json::to_string_pretty(&summary).expect("summary serialises"))?;
    write_json("trace.json", trace.to_json())?;
    Ok(summary)
}
