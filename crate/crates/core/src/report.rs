//! Scenario runs and their artifacts: ZMP trace CSV, footprint/ZMP SVG and
//! the JSON balance report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{debug, info};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gait::{synthesize_nominal, NominalGait, WalkSegment};
use crate::kinematics::Footprint;
use crate::model::MechanismModel;
use crate::modification::{apply_stack, ModificationStack};
use crate::scenario::Scenario;
use crate::stability::{compare, evaluate, BalanceReport, Verdict, ZmpTrace};

pub const REPORT_SCHEMA_VERSION: &str = "gaitmod-report/1";

pub const TRACE_CSV_HEADER: &str = "t,x_zmp,y_zmp,margin,valid,half_step";

/// Page pixels per world metre.
pub const SVG_SCALE: f64 = 200.0;

/// Exit status for a verdict: 0 when the ZMP never leaves the polygon.
pub fn exit_code(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Balanced | Verdict::Marginal => 0,
        Verdict::Unbalanced => 2,
    }
}

/// Model, nominal gait and modification stack of a scenario.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub model: MechanismModel,
    pub gait: NominalGait,
    pub stack: ModificationStack,
}

pub fn prepare(scenario: &Scenario, base_dir: &Path) -> Result<Prepared> {
    scenario.validate()?;
    let model = scenario.build_model(base_dir)?;
    let gait = synthesize_nominal(&model, &scenario.gait, &scenario.trunk)?;
    debug!(
        "nominal gait: beta_nom {:.3} deg, cyclic residual {:.2e} rad",
        gait.beta_nom(&model).to_degrees(),
        gait.cyclic_residual(&model)
    );
    let stack = scenario.stack.to_stack()?;
    Ok(Prepared { model, gait, stack })
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub segment: WalkSegment,
    pub trace: ZmpTrace,
    pub report: BalanceReport,
}

impl Prepared {
    pub fn simulate(&self, stack: &ModificationStack, n_steps: usize) -> Result<Simulation> {
        let segment = apply_stack(&self.model, &self.gait, stack, n_steps)?;
        let (trace, report) = evaluate(&self.model, &segment)?;
        Ok(Simulation {
            segment,
            trace,
            report,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineDelta {
    pub min_margin_delta: f64,
    pub dispersion_delta: f64,
}

/// The JSON report: the balance report plus walk geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: String,
    #[serde(flatten)]
    pub balance: BalanceReport,
    pub exit_code: i32,
    pub n_steps: usize,
    pub duration: f64,
    pub forward_progress: f64,
    pub final_heading_deg: f64,
    pub beta_nom_deg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineDelta>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub simulation: Simulation,
    pub report: RunReport,
    pub csv_path: PathBuf,
    pub svg_path: PathBuf,
    pub report_path: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_code
    }
}

fn num(v: f64) -> String {
    format!("{v:.8e}")
}

/// One row per trace entry, numbers with 9 significant digits.
pub fn trace_csv(trace: &ZmpTrace) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for e in &trace.entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(e.t),
            num(e.zmp.x),
            num(e.zmp.y),
            num(e.margin),
            e.valid,
            e.half_step
        );
    }
    out
}

struct PageMap {
    min: Vector2<f64>,
    max: Vector2<f64>,
}

impl PageMap {
    const PAD: f64 = 0.15;

    fn new(points: impl Iterator<Item = Vector2<f64>>) -> Self {
        let mut min = Vector2::repeat(f64::INFINITY);
        let mut max = Vector2::repeat(f64::NEG_INFINITY);
        for p in points {
            min = min.inf(&p);
            max = max.sup(&p);
        }
        if !min.x.is_finite() {
            min = Vector2::zeros();
            max = Vector2::zeros();
        }
        Self {
            min: min - Vector2::repeat(Self::PAD),
            max: max + Vector2::repeat(Self::PAD),
        }
    }

    fn width(&self) -> f64 {
        (self.max.x - self.min.x) * SVG_SCALE
    }

    fn height(&self) -> f64 {
        (self.max.y - self.min.y) * SVG_SCALE
    }

    /// World x to the right, world y up the page.
    fn px(&self, p: Vector2<f64>) -> (f64, f64) {
        ((p.x - self.min.x) * SVG_SCALE, (self.max.y - p.y) * SVG_SCALE)
    }
}

fn polygon_points(map: &PageMap, fp: &Footprint) -> String {
    fp.corners
        .iter()
        .map(|c| {
            let (x, y) = map.px(*c);
            format!("{x:.2},{y:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Footprints and ZMP samples, 1 m = 200 px; baseline footprints dashed.
pub fn footprint_svg(
    footprints: &[Footprint],
    trace: &ZmpTrace,
    baseline: Option<&[Footprint]>,
) -> String {
    let corners = footprints
        .iter()
        .chain(baseline.unwrap_or_default())
        .flat_map(|f| f.corners);
    let zmps = trace.entries.iter().filter(|e| e.valid).map(|e| e.zmp);
    let map = PageMap::new(corners.chain(zmps));
    let legend_h = 70.0;
    let (w, h) = (map.width().max(260.0), map.height() + legend_h);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.2}" height="{h:.2}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(base) = baseline {
        let _ = writeln!(s, r#"<g id="baseline" fill="none" stroke="gray" stroke-width="1" stroke-dasharray="5,3">"#);
        for fp in base {
            let _ = writeln!(s, r#"<polygon points="{}"/>"#, polygon_points(&map, fp));
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, r#"<g id="footprints" fill="none" stroke="black" stroke-width="1.5">"#);
    for fp in footprints {
        let _ = writeln!(s, r#"<polygon points="{}"/>"#, polygon_points(&map, fp));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="zmp">"#);
    for e in trace.entries.iter().filter(|e| e.valid) {
        let (x, y) = map.px(e.zmp);
        let fill = if e.margin >= 0.0 { "blue" } else { "red" };
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.5" fill="{fill}"/>"#);
    }
    let _ = writeln!(s, "</g>");

    let top = map.height() + 15.0;
    let _ = writeln!(s, r#"<g id="legend" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect x="10" y="{:.2}" width="20" height="8" fill="none" stroke="black"/>"#, top - 8.0);
    let _ = writeln!(s, r#"<text x="36" y="{top:.2}">footprint</text>"#);
    let _ = writeln!(s, r#"<circle cx="20" cy="{:.2}" r="2" fill="blue"/>"#, top + 12.0);
    let _ = writeln!(s, r#"<text x="36" y="{:.2}">ZMP inside / </text>"#, top + 16.0);
    let _ = writeln!(s, r#"<circle cx="112" cy="{:.2}" r="2" fill="red"/>"#, top + 12.0);
    let _ = writeln!(s, r#"<text x="120" y="{:.2}">outside</text>"#, top + 16.0);
    if baseline.is_some() {
        let _ = writeln!(
            s,
            r#"<rect x="10" y="{:.2}" width="20" height="8" fill="none" stroke="gray" stroke-dasharray="5,3"/>"#,
            top + 24.0
        );
        let _ = writeln!(s, r#"<text x="36" y="{:.2}">nominal footprint</text>"#, top + 32.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">1 m = {SVG_SCALE:.0} px</text>"#, w - 90.0, top);
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

fn build_report(
    prepared: &Prepared,
    sim: &Simulation,
    n_steps: usize,
    baseline: Option<&Simulation>,
) -> RunReport {
    let baseline = baseline.map(|b| {
        let cmp = compare(&[b.report.clone(), sim.report.clone()]);
        BaselineDelta {
            min_margin_delta: cmp.rows[1].min_margin_delta,
            dispersion_delta: cmp.rows[1].dispersion_delta,
        }
    });
    RunReport {
        schema_version: REPORT_SCHEMA_VERSION.to_string(),
        balance: sim.report.clone(),
        exit_code: exit_code(sim.report.verdict),
        n_steps,
        duration: sim.segment.duration(),
        forward_progress: sim.segment.forward_progress(),
        final_heading_deg: sim.segment.final_heading().unwrap_or(0.0).to_degrees(),
        beta_nom_deg: prepared.gait.beta_nom(&prepared.model).to_degrees(),
        baseline,
    }
}

/// Runs a scenario and writes its artifacts under `out_dir`. Relative model
/// paths resolve against `base_dir`.
pub fn run_scenario(
    scenario: &Scenario,
    base_dir: &Path,
    out_dir: &Path,
    baseline: Option<&Scenario>,
) -> Result<RunOutcome> {
    let prepared = prepare(scenario, base_dir)?;
    let sim = prepared.simulate(&prepared.stack, scenario.n_steps)?;
    let base_sim = match baseline {
        Some(b) => {
            let p = prepare(b, base_dir)?;
            Some(p.simulate(&p.stack, b.n_steps)?)
        }
        None => None,
    };
    let report = build_report(&prepared, &sim, scenario.n_steps, base_sim.as_ref());

    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(&scenario.outputs.csv);
    let svg_path = out_dir.join(&scenario.outputs.svg);
    let report_path = out_dir.join(&scenario.outputs.report);
    std::fs::write(&csv_path, trace_csv(&sim.trace))?;
    let base_fps = base_sim.as_ref().map(|b| b.segment.footprints());
    std::fs::write(
        &svg_path,
        footprint_svg(&sim.segment.footprints(), &sim.trace, base_fps.as_deref()),
    )?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    std::fs::write(&report_path, json)?;
    info!(
        "verdict {:?}: min margin {:.4} m, fraction inside {:.3}",
        report.balance.verdict, report.balance.min_margin, report.balance.fraction_inside
    );
    Ok(RunOutcome {
        simulation: sim,
        report,
        csv_path,
        svg_path,
        report_path,
    })
}
