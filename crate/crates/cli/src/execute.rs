//! Runs one validated configuration and writes its artifacts.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use fsi_fem::analysis::{write_atomic, ConvergenceReport};
use fsi_fem::dofspace::{write_field_csv, FieldId};
use fsi_fem::experiments::{build_problem, build_problem_structured, ritz_sweep, self_convergence, space_sweep, time_sweep, Tolerances};
use fsi_fem::fsi_cn::{run_case, write_step_csv, ErrorSchedule};
use fsi_fem::manufactured::verify_sources;
use fsi_fem::ritz::write_ritz_csv;
use fsi_fem::Exec;

use crate::config::{Mode, RunConfig};

/// Whether every enabled gate passed, and the files written.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.bytes(name, s.as_bytes())
    }

    fn report(&mut self, stem: &str, report: &ConvergenceReport, extra: serde_json::Value) -> Result<()> {
        let mut csv = vec![];
        if stem == "ritz" {
            write_ritz_csv(report, &mut csv)?;
        } else {
            report.write_csv(&mut csv)?;
        }
        self.bytes(&format!("{stem}.csv"), &csv)?;
        let mut summary = report.summary();
        if let (Some(s), Some(e)) = (summary.as_object_mut(), extra.as_object()) {
            s.extend(e.clone());
        }
        self.json(&format!("{stem}.json"), &summary)?;
        let plots = report.write_plot_files(self.dir, stem)?;
        self.files.extend(plots);
        Ok(())
    }
}

fn tolerances(cfg: &RunConfig) -> Tolerances {
    Tolerances { rate: cfg.tolerance, h1_shortfall: cfg.tolerance }
}

/// Executes `cfg`, writing into `out` (created if missing).
pub fn execute(cfg: &RunConfig, out: &Path, exec: Exec) -> Result<Outcome> {
    std::fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
    let mut w = Writer { dir: out, files: vec![] };
    let case = cfg.build_case()?;
    let pass = match cfg.mode {
        Mode::Run => {
            let element = cfg.element()?;
            let problem = match (cfg.h, cfg.nx, &cfg.ny) {
                (Some(h), _, _) => build_problem(&case, element, h, exec),
                (None, Some(nx), Some(ny)) => build_problem_structured(&case, element, nx, ny, exec),
                _ => unreachable!("validated"),
            }
            .context("building the problem")?;
            let tau = cfg.tau.expect("validated");
            let run = run_case(&problem, cfg.t_final, tau, ErrorSchedule::EveryStep).context("time stepping")?;
            let mut csv = vec![];
            write_step_csv(&run.records, &mut csv)?;
            w.bytes("run_steps.csv", &csv)?;
            for f in [FieldId::U, FieldId::Eta, FieldId::W] {
                let mut csv = vec![];
                write_field_csv(&run.final_state.field(&problem, f), &mut csv)?;
                w.bytes(&format!("run_field_{}.csv", f.name()), &csv)?;
            }
            let summary = json!({
                "case": case.id.name(),
                "element": element.name(),
                "mode": "run",
                "T": cfg.t_final,
                "tau": run.tau,
                "steps": run.steps,
                "unknowns": problem.layout.n_unknowns,
                "final_errors": run.final_errors(),
                "final_energy": run.final_state.energy,
                "pass": true,
            });
            w.json("run.json", &summary)?;
            true
        }
        Mode::ConvergenceSpace => {
            let hs = cfg.h_list.as_ref().expect("validated");
            let r = space_sweep(&case, cfg.element()?, hs, cfg.t_final, cfg.tau.expect("validated"), tolerances(cfg), exec)?;
            w.report("convergence_space", &r, json!({ "mode": "convergence_space" }))?;
            r.pass
        }
        Mode::ConvergenceTime => {
            let taus = cfg.tau_list.as_ref().expect("validated");
            let r = time_sweep(&case, cfg.element()?, cfg.h.expect("validated"), taus, cfg.t_final, cfg.time_error, tolerances(cfg), exec)?;
            w.report("convergence_time", &r, json!({ "mode": "convergence_time", "time_error": cfg.time_error }))?;
            r.pass
        }
        Mode::Ritz => {
            let hs = cfg.h_list.as_ref().expect("validated");
            let r = ritz_sweep(&case, cfg.element()?, hs, cfg.t_final, tolerances(cfg), exec)?;
            w.report("ritz", &r, json!({ "mode": "ritz" }))?;
            r.pass
        }
        Mode::VerifySources => {
            let report = verify_sources(&case, cfg.samples, cfg.seed())?;
            w.json("verify_sources.json", &serde_json::to_value(&report)?)?;
            report.pass
        }
        Mode::SelfConvergence => {
            let hs = cfg.h_list.as_ref().expect("validated");
            let r = self_convergence(&case, cfg.element()?, hs, cfg.h_ref.expect("validated"), cfg.t_final, cfg.tau.expect("validated"), cfg.tolerance, exec)?;
            w.report("self_convergence", &r, json!({ "mode": "self_convergence", "h_ref": cfg.h_ref }))?;
            r.pass
        }
    };
    Ok(Outcome { pass, files: w.files })
}
