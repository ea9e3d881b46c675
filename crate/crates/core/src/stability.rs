//! ZMP traces of walks and balance verdicts.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::dynamics::zmp;
use crate::error::{GaitError, Result};
use crate::gait::WalkSegment;
use crate::kinematics::{center_of_mass, polygon_margin, stance_support_polygon, SupportPolygon};
use crate::model::MechanismModel;

/// Smallest margin for a "balanced" verdict, m.
pub const DEFAULT_MARGIN_THRESHOLD: f64 = 5e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// World time, s.
    pub t: f64,
    pub half_step: usize,
    /// World ZMP (meaningless when `valid` is false).
    pub zmp: Vector2<f64>,
    /// Ground projection of the centre of mass, world.
    pub com: Vector2<f64>,
    pub margin: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ZmpTrace {
    pub entries: Vec<TraceEntry>,
    /// Support polygon of each half-step, indexed by `TraceEntry::half_step`.
    pub polygons: Vec<SupportPolygon>,
}

impl ZmpTrace {
    pub fn polygon(&self, entry: &TraceEntry) -> &SupportPolygon {
        &self.polygons[entry.half_step]
    }

    /// Largest distance between ZMP and COM projection over valid samples.
    pub fn max_zmp_com_distance(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.valid)
            .map(|e| (e.zmp - e.com).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Balanced,
    Marginal,
    Unbalanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    /// Smallest margin over valid samples, m.
    pub min_margin: f64,
    pub mean_margin: f64,
    /// Share of samples with a valid ZMP inside the polygon.
    pub fraction_inside: f64,
    /// RMS distance of the ZMP from its per-half-step mean, m.
    pub dispersion: f64,
    pub samples: usize,
    pub invalid_samples: usize,
    pub margin_threshold: f64,
    pub verdict: Verdict,
}

impl BalanceReport {
    pub fn from_trace(trace: &ZmpTrace, margin_threshold: f64) -> Self {
        let valid: Vec<&TraceEntry> = trace.entries.iter().filter(|e| e.valid).collect();
        let samples = trace.entries.len();
        let invalid_samples = samples - valid.len();
        let min_margin = valid.iter().map(|e| e.margin).fold(f64::INFINITY, f64::min);
        let mean_margin = valid.iter().map(|e| e.margin).sum::<f64>() / valid.len() as f64;
        let inside = valid.iter().filter(|e| e.margin >= 0.0).count();
        let fraction_inside = if samples == 0 {
            0.0
        } else {
            inside as f64 / samples as f64
        };

        let mut sq = 0.0;
        for h in 0..trace.polygons.len() {
            let pts: Vec<Vector2<f64>> = valid
                .iter()
                .filter(|e| e.half_step == h)
                .map(|e| e.zmp)
                .collect();
            if pts.is_empty() {
                continue;
            }
            let mean = pts.iter().sum::<Vector2<f64>>() / pts.len() as f64;
            sq += pts.iter().map(|p| (p - mean).norm_squared()).sum::<f64>();
        }
        let dispersion = (sq / valid.len() as f64).sqrt();

        let verdict = if invalid_samples > 0 || inside < samples {
            Verdict::Unbalanced
        } else if min_margin >= margin_threshold {
            Verdict::Balanced
        } else {
            Verdict::Marginal
        };
        Self {
            min_margin,
            mean_margin,
            fraction_inside,
            dispersion,
            samples,
            invalid_samples,
            margin_threshold,
            verdict,
        }
    }
}

/// Per-sample ZMP of a walk against its stance polygons.
pub fn zmp_trace(model: &MechanismModel, segment: &WalkSegment) -> Result<ZmpTrace> {
    let mut trace = ZmpTrace::default();
    for hs in &segment.half_steps {
        let poly = stance_support_polygon(&hs.stance_footprint)?;
        for (i, cfg) in hs.trajectory.samples.iter().enumerate() {
            let z = zmp(model, cfg);
            let com = center_of_mass(model, &cfg.q);
            let world = hs.stance.to_world_2d(z.position);
            trace.entries.push(TraceEntry {
                t: hs.start_time + hs.trajectory.time(i),
                half_step: hs.index,
                zmp: world,
                com: hs.stance.to_world_2d(com.xy()),
                margin: polygon_margin(world, &poly),
                valid: z.valid,
            });
        }
        trace.polygons.push(poly);
    }
    Ok(trace)
}

/// Trace and report with the default 5 mm threshold.
pub fn evaluate(model: &MechanismModel, segment: &WalkSegment) -> Result<(ZmpTrace, BalanceReport)> {
    evaluate_with_threshold(model, segment, DEFAULT_MARGIN_THRESHOLD)
}

pub fn evaluate_with_threshold(
    model: &MechanismModel,
    segment: &WalkSegment,
    margin_threshold: f64,
) -> Result<(ZmpTrace, BalanceReport)> {
    if segment.is_empty() {
        return Err(GaitError::Trajectory("cannot evaluate an empty walk".into()));
    }
    let trace = zmp_trace(model, segment)?;
    let report = BalanceReport::from_trace(&trace, margin_threshold);
    Ok((trace, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub index: usize,
    pub min_margin: f64,
    pub dispersion: f64,
    pub verdict: Verdict,
    /// Differences against the first report.
    pub min_margin_delta: f64,
    pub dispersion_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Report indices from largest to smallest min margin (stable on ties).
    pub ranking: Vec<usize>,
}

/// Deltas of every report against the first one.
pub fn compare(reports: &[BalanceReport]) -> Comparison {
    let Some(base) = reports.first() else {
        return Comparison {
            rows: Vec::new(),
            ranking: Vec::new(),
        };
    };
    let rows = reports
        .iter()
        .enumerate()
        .map(|(index, r)| ComparisonRow {
            index,
            min_margin: r.min_margin,
            dispersion: r.dispersion,
            verdict: r.verdict,
            min_margin_delta: r.min_margin - base.min_margin,
            dispersion_delta: r.dispersion - base.dispersion,
        })
        .collect();
    let mut ranking: Vec<usize> = (0..reports.len()).collect();
    ranking.sort_by(|&a, &b| reports[b].min_margin.total_cmp(&reports[a].min_margin));
    Comparison { rows, ranking }
}
