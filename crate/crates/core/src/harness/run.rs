//! End-to-end run: initial data, Picard iteration, diagnostics, files.

use std::fs;
use std::path::PathBuf;

use crate::diagnostics::{trajectory_records, wellposedness_monitor, DiagnosticsRecord, MonitorFlags, MonitorThresholds};
use crate::error::HarnessError;
use crate::evolve::{picard_iterate, IterateTrajectory, PassParams, PicardParams, PsiOrders, StepParams};
use crate::harness::config::SimConfig;
use crate::harness::output::{write_diagnostics, write_snapshot, Snapshot, DIAGNOSTICS_FILE};
use crate::harness::presets::build_initial_state;
use crate::magnetics::SeedReport;

/// Progress reporting hooks. All default to doing nothing.
pub trait RunObserver {
    fn warning(&mut self, _message: &str) {}
    fn picard(&mut self, _pass: usize, _psi: f64) {}
}

/// Observer that discards everything.
pub struct Silent;

impl RunObserver for Silent {}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub trajectory: IterateTrajectory,
    pub records: Vec<DiagnosticsRecord>,
    pub psi_history: Vec<f64>,
    pub converged: bool,
    pub flags: MonitorFlags,
    pub seed: SeedReport,
    pub hash: String,
    pub files: Vec<PathBuf>,
}

/// Node indices that receive a snapshot: every `every`-th plus the last.
pub fn snapshot_nodes(nodes: usize, every: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..nodes).step_by(every.max(1)).collect();
    if nodes > 0 && out.last() != Some(&(nodes - 1)) {
        out.push(nodes - 1);
    }
    out
}

/// Computes the trajectory and its diagnostics without touching the disk.
pub fn simulate(cfg: &SimConfig, obs: &mut dyn RunObserver) -> Result<RunSummary, HarnessError> {
    let init = build_initial_state(cfg)?;
    if !(init.seed.divergence_ok && init.seed.boundary_ok) {
        obs.warning(&format!(
            "inadmissible magnetic seed accepted: div residual {:e}, boundary b0^r {:e}",
            init.seed.div_residual, init.seed.boundary_br
        ));
    }
    if !init.seed.noncollinear_ok {
        obs.warning(&format!(
            "min |b0^z| on the boundary is {:e}, below delta_min = {:e}",
            init.seed.delta, init.seed.delta_min
        ));
    }
    let params = PicardParams {
        pass: PassParams {
            step: StepParams {
                dt: init.dt,
                eps: cfg.eps,
                rel_tol: cfg.rel_tol,
            },
            steps: init.steps,
            c0: cfg.c0,
            rs: cfg.rs,
        },
        n_max: cfg.n_max,
        psi_tol: cfg.psi_tol,
        orders: PsiOrders::default(),
    };
    let outcome = picard_iterate(&init.state, &init.b0, &params, |n, psi| obs.picard(n, psi))?;
    if !outcome.converged {
        obs.warning(&format!(
            "Picard iteration reached n_max = {} without psi < {:e}",
            cfg.n_max, cfg.psi_tol
        ));
    }
    let psi = outcome.psi_history.last().copied();
    let records = trajectory_records(&outcome.trajectory, &init.b0, cfg.norm_order, psi)?;
    let thresholds = MonitorThresholds {
        m0: records.first().map_or(0.0, |r| r.energy),
        energy_margin: cfg.monitor.energy_margin,
        delta_min: cfg.delta_min,
    };
    let flags = wellposedness_monitor(&records, &thresholds);
    for line in flags.describe() {
        obs.warning(&line);
    }
    Ok(RunSummary {
        trajectory: outcome.trajectory,
        records,
        psi_history: outcome.psi_history,
        converged: outcome.converged,
        flags,
        seed: init.seed,
        hash: cfg.provenance_hash(),
        files: Vec::new(),
    })
}

/// [`simulate`], then writes the diagnostics stream and snapshots into
/// `cfg.output.directory`. With `monitor.abort` set, raised flags fail the
/// run after the files are written.
pub fn run_simulation(cfg: &SimConfig, obs: &mut dyn RunObserver) -> Result<RunSummary, HarnessError> {
    let mut summary = simulate(cfg, obs)?;
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let diag = dir.join(DIAGNOSTICS_FILE);
    write_diagnostics(&diag, &summary.records)?;
    summary.files.push(diag);
    if cfg.output.emit_fields {
        let snaps = &summary.trajectory.snapshots;
        for k in snapshot_nodes(snaps.len(), cfg.output.snapshot_every) {
            let snap = Snapshot::from_state(&snaps[k], &summary.hash);
            summary.files.push(write_snapshot(dir, k, &snap)?);
        }
    }
    if cfg.monitor.abort && summary.flags.any() {
        return Err(HarnessError::Monitor(summary.flags.describe().join("; ")));
    }
    Ok(summary)
}
