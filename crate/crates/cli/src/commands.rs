//! The subcommands. Each one renders all of its files in memory first and
//! only then writes them, so a failing command leaves nothing behind.

use anyhow::{anyhow, bail, Result};
use pcmod::bloch::{bloch_of, two_step_feasible};
use pcmod::dynamics::{propagate, protocol_propagator};
use pcmod::isolator::{
    bloch_trajectory, contrast_sweep, directional_response, optimal_delta_theta,
    stage_closed_form_power,
};
use pcmod::planner::{min_switches_estimate, minimal_plan_search, segment_lower_bound};
use pcmod::transfer::{boundary_curve, feasibility_map, pushpull_times, solve_two_step, transfer_map};
use pcmod::{
    BlochVector, CouplerParams, Direction, Error, IsolatorSpec, ModeState, Protocol,
    SearchConfig, StaircasePlan,
};
use serde::{Deserialize, Serialize};

use crate::config::{from_protocol, to_protocol, RunConfig, SegmentSpec, Solver};
use crate::output::{bloch_svg, json, num, Bundle, Csv, Track};

/// Rendered files plus whether the command met its goal.
#[derive(Debug)]
pub struct Outcome {
    pub files: Bundle,
    pub ok: bool,
    pub summary: Vec<String>,
}

pub const TRAJECTORY_HEADER: [&str; 10] = [
    "time",
    "omega_t_over_pi",
    "re_a1",
    "im_a1",
    "re_a2",
    "im_a2",
    "u",
    "v",
    "w",
    "a2_power",
];

pub fn trajectory_csv(params: &CouplerParams, samples: &[(f64, ModeState)]) -> String {
    let mut csv = Csv::new(&TRAJECTORY_HEADER);
    for (t, s) in samples {
        let b = bloch_of(s);
        csv.numbers(&[
            *t,
            params.scaled_time(*t),
            s.a1.re,
            s.a1.im,
            s.a2.re,
            s.a2.im,
            b.u,
            b.v,
            b.w,
            s.mode2_power(),
        ]);
    }
    csv.into_string()
}

fn trajectory_files(
    files: &mut Bundle,
    params: &CouplerParams,
    protocol: &Protocol,
    samples: usize,
    title: &str,
) -> Result<f64> {
    let traj = propagate(params, protocol, &ModeState::mode1(), samples)?;
    files.add("trajectory.csv", trajectory_csv(params, &traj));
    let points: Vec<BlochVector> = traj.iter().map(|(_, s)| bloch_of(s)).collect();
    files.add(
        "bloch.svg",
        bloch_svg(
            title,
            &[Track {
                label: "state",
                color: "#c0392b",
                points: &points,
            }],
        ),
    );
    Ok(traj.last().expect("at least two samples").1.mode2_power())
}

fn simulation_protocol(cfg: &RunConfig, params: &CouplerParams) -> Result<Protocol> {
    match (&cfg.protocol, cfg.solver) {
        (Some(p), _) => to_protocol(p),
        (None, Some(Solver::PushPull)) => Ok(pushpull_times(params)?.protocol()?),
        (None, Some(Solver::TwoStep)) => Ok(solve_two_step(params, cfg.phi)?.solution().protocol()?),
        (None, None) => bail!("simulate needs either \"protocol\" or \"solver\" in the config"),
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let protocol = simulation_protocol(cfg, &params)?;
    let mut files = Bundle::default();
    let title = format!(
        "delta/kappa0 = {}, {} segments",
        params.ratio(),
        protocol.len()
    );
    let final_power = trajectory_files(&mut files, &params, &protocol, cfg.samples, &title)?;
    Ok(Outcome {
        files,
        ok: true,
        summary: vec![format!("final |a2|^2 = {}", num(final_power))],
    })
}

pub fn feasibility(cfg: &RunConfig) -> Result<Outcome> {
    let map = feasibility_map(cfg.grid)?;
    let mut grid = Csv::new(&["ratio", "phi", "feasible"]);
    for (i, &r) in map.ratios.iter().enumerate() {
        for (j, &phi) in map.phases.iter().enumerate() {
            grid.row(&[num(r), num(phi), u8::from(map.cells[i][j]).to_string()]);
        }
    }
    let mut boundary = Csv::new(&["ratio", "phi_c"]);
    for (r, phi) in boundary_curve(cfg.grid) {
        boundary.numbers(&[r, phi]);
    }
    let feasible = map.cells.iter().flatten().filter(|&&c| c).count();
    let mut files = Bundle::default();
    files.add("feasibility_map.csv", grid.into_string());
    files.add("boundary.csv", boundary.into_string());
    Ok(Outcome {
        files,
        ok: true,
        summary: vec![format!("{feasible} of {} cells feasible", cfg.grid * cfg.grid)],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub omega_t1_over_pi: f64,
    pub omega_t2_over_pi: f64,
    pub transfer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub delta: f64,
    pub kappa: f64,
    pub phi: f64,
    pub grid: usize,
    pub two_step_feasible: bool,
    pub grid_peak: PeakReport,
    /// Grid peak polished by a local search.
    pub refined_peak: PeakReport,
}

pub fn transfer_map_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let map = transfer_map(&params, cfg.phi, cfg.grid)?;
    let mut csv = Csv::new(&["omega_t1_over_pi", "omega_t2_over_pi", "transfer"]);
    for (i, row) in map.values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            csv.numbers(&[map.axis[i], map.axis[j], v]);
        }
    }
    let (value, i, j) = map.peak();
    let refined = map.refined_peak(&params);
    let (r1, r2) = refined.scaled_times(&params);
    let summary = MapSummary {
        delta: cfg.delta,
        kappa: cfg.kappa,
        phi: cfg.phi,
        grid: cfg.grid,
        two_step_feasible: two_step_feasible(&params, cfg.phi),
        grid_peak: PeakReport {
            omega_t1_over_pi: map.axis[i],
            omega_t2_over_pi: map.axis[j],
            transfer: value,
        },
        refined_peak: PeakReport {
            omega_t1_over_pi: r1,
            omega_t2_over_pi: r2,
            transfer: refined.achieved,
        },
    };
    let mut files = Bundle::default();
    files.add("map.csv", csv.into_string());
    files.add("map_summary.json", json(&summary)?);
    Ok(Outcome {
        files,
        ok: true,
        summary: vec![format!(
            "peak |a2|^2 = {} (grid {})",
            num(refined.achieved),
            num(value)
        )],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub segments: usize,
    pub switches: usize,
    pub achieved: f64,
}

/// Contents of `plan.json`. `switches` counts switching events, so a plan
/// has `switches + 1` segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub delta: f64,
    pub kappa: f64,
    pub threshold: f64,
    pub seed: u64,
    /// `"found"` or `"exhausted"` (best plan within the cap).
    pub status: String,
    pub segments: Vec<SegmentSpec>,
    pub achieved: f64,
    pub residual: f64,
    pub switches: usize,
    /// `ceil(pi / (4 atan(kappa0 / |delta|)))`; absent without detuning.
    pub estimate: Option<usize>,
    /// Fewest segments any plan can use to reach the threshold.
    pub segment_lower_bound: usize,
    pub log: Vec<LogEntry>,
}

impl PlanFile {
    pub fn protocol(&self) -> Result<Protocol> {
        to_protocol(&self.segments)
    }
}

pub fn plan(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let search = SearchConfig {
        threshold: cfg.threshold,
        seed: cfg.seed,
        restarts: cfg.restarts,
        cap: cfg.cap,
    };
    let (best, log, found): (StaircasePlan, _, bool) = match minimal_plan_search(&params, &search) {
        Ok(s) => (s.plan, s.log, true),
        Err(Error::SearchExhausted(f)) => (f.best, f.log, false),
        Err(e) => return Err(e.into()),
    };
    let ratio = params.ratio().abs();
    let report = PlanFile {
        delta: cfg.delta,
        kappa: cfg.kappa,
        threshold: cfg.threshold,
        seed: cfg.seed,
        status: if found { "found" } else { "exhausted" }.to_string(),
        segments: from_protocol(&best.protocol),
        achieved: best.achieved,
        residual: (1.0 - best.achieved).max(0.0),
        switches: best.switches,
        estimate: if ratio > 0.0 { Some(min_switches_estimate(ratio)?) } else { None },
        segment_lower_bound: segment_lower_bound(&params, cfg.threshold)?,
        log: log
            .iter()
            .map(|r| LogEntry {
                segments: r.segments,
                switches: r.segments - 1,
                achieved: r.achieved,
            })
            .collect(),
    };
    let mut files = Bundle::default();
    files.add("plan.json", json(&report)?);
    let title = format!("staircase, {} switches", best.switches);
    trajectory_files(&mut files, &params, &best.protocol, cfg.samples, &title)?;
    let mut summary = vec![format!(
        "{} switches ({} segments), |a2|^2 = {}",
        best.switches,
        best.segments(),
        num(best.achieved)
    )];
    if !found {
        summary.push(format!("no plan reached {} within the segment cap", cfg.threshold));
    }
    Ok(Outcome {
        files,
        ok: found,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolatorReport {
    pub stage: Vec<SegmentSpec>,
    /// Stage matrix elements as `[re, im]`.
    pub d: [f64; 2],
    pub o: [f64; 2],
    pub theta1: f64,
    pub theta2: f64,
    pub offset: f64,
    pub forward12: [f64; 2],
    pub backward12: [f64; 2],
    pub forward_power: f64,
    pub backward_power: f64,
    /// `10 log10(forward / backward)`, limited to +-120 dB.
    pub contrast_db: f64,
    pub closed_form_forward: f64,
    pub closed_form_backward: f64,
}

fn default_stage(params: &CouplerParams) -> Result<Protocol> {
    let pp = pushpull_times(params).map_err(|e| {
        anyhow!("{e}; give an explicit isolator.stage for this detuning")
    })?;
    Ok(Protocol::from_pairs(&[(0.0, pp.t1)])?)
}

pub fn isolator(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let iso = &cfg.isolator;
    let stage_protocol = match &iso.stage {
        Some(s) => to_protocol(s)?,
        None => default_stage(&params)?,
    };
    let stage = protocol_propagator(&params, &stage_protocol);
    let theta1 = iso
        .theta1
        .unwrap_or_else(|| iso.theta2 + optimal_delta_theta(&stage, iso.offset));
    let spec = IsolatorSpec::new(stage, theta1, iso.theta2, iso.offset)?;
    let r = directional_response(&spec);
    let pair = |z: num_complex::Complex64| [z.re, z.im];
    let report = IsolatorReport {
        stage: from_protocol(&stage_protocol),
        d: pair(stage.d()),
        o: pair(stage.o()),
        theta1,
        theta2: iso.theta2,
        offset: iso.offset,
        forward12: pair(r.forward12),
        backward12: pair(r.backward12),
        forward_power: r.forward_power,
        backward_power: r.backward_power,
        contrast_db: r.contrast_db,
        closed_form_forward: stage_closed_form_power(&spec, Direction::Forward),
        closed_form_backward: stage_closed_form_power(&spec, Direction::Backward),
    };
    let mut files = Bundle::default();
    files.add("response.json", json(&report)?);

    if iso.sweep {
        let grid = contrast_sweep(&stage, cfg.grid)?;
        let mut csv = Csv::new(&["delta_theta", "offset", "forward", "backward", "contrast_db"]);
        for (i, row) in grid.cells.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                csv.numbers(&[grid.axis[i], grid.axis[j], c.forward_power, c.backward_power, c.contrast_db]);
            }
        }
        files.add("contrast_map.csv", csv.into_string());
    }
    if iso.trajectories {
        let per_element = (cfg.samples / 3).max(2);
        for (name, dir, color) in [
            ("forward.svg", Direction::Forward, "#c0392b"),
            ("backward.svg", Direction::Backward, "#2471a3"),
        ] {
            let path = bloch_trajectory(
                &params,
                &stage_protocol,
                theta1,
                iso.theta2,
                iso.offset,
                dir,
                per_element,
            )?;
            let label = format!("{dir:?}, |T12|^2 = {:.6}", path.last().expect("non-empty").mode2_power());
            files.add(
                name,
                bloch_svg(&label, &[Track { label: &label, color, points: &path }]),
            );
        }
    }
    Ok(Outcome {
        files,
        ok: true,
        summary: vec![format!(
            "forward {} backward {} contrast {} dB",
            num(r.forward_power),
            num(r.backward_power),
            num(r.contrast_db)
        )],
    })
}
