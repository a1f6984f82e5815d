//! Command dispatch and artifact writing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gauge_wigner::config::{parse_config, RunConfig};
use gauge_wigner::forward::{run_forward_ensemble, ForwardRequest};
use gauge_wigner::oracle::fredholm::fredholm_matrix_check;
use gauge_wigner::oracle::{backward_terms, forward_terms};
use gauge_wigner::rng::RNG_ALGORITHM;
use gauge_wigner::stats::with_workers;
use gauge_wigner::{run_backward, run_slices, Problem, Result, WignerError};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{Cli, Command};

const DEFAULT_OUTPUT_DIR: &str = "gauge-wigner-output";

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::RunForward => "run-forward",
            Command::RunBackward => "run-backward",
            Command::Oracle => "oracle",
            Command::Slice => "slice",
            Command::StencilDump => "stencil-dump",
        }
    }
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| WignerError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| WignerError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }
}

fn load(cli: &Cli) -> Result<(RunConfig, PathBuf)> {
    let (mut cfg, base) = match &cli.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| WignerError::Io(format!("{}: {e}", path.display())))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (parse_config(&text)?, base)
        }
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok((cfg, base))
}

/// Runs the selected command and returns the output directory.
pub fn dispatch(cli: &Cli) -> Result<PathBuf> {
    let started = Instant::now();
    let (cfg, base) = load(cli)?;
    let dir = cli
        .output
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    std::fs::create_dir_all(&dir).map_err(|e| WignerError::Io(format!("{}: {e}", dir.display())))?;
    let problem = cfg.problem(&base)?;
    let mut out = Artifacts { dir, files: Vec::new() };

    let stdout = with_workers(cli.workers, || match cli.command {
        Command::RunForward => forward(&cfg, &problem, &mut out),
        Command::RunBackward => backward(&cfg, &problem, &mut out),
        Command::Oracle => oracle(&cfg, &problem, &mut out),
        Command::Slice => slice(&cfg, &problem, &mut out),
        Command::StencilDump => stencil(&problem, &mut out),
    })?;

    let manifest = json!({
        "command": cli.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "rng_algorithm": RNG_ALGORITHM,
        "seed": cfg.seed,
        "workers": cli.workers,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "classical": cfg.is_classical(),
        "gamma": problem.gamma(),
        "config_path": cli.config.as_ref().map(|p| p.display().to_string()),
        "config": cfg,
        "files": out.files.clone(),
    });
    out.write_json("manifest.json", &manifest)?;
    print!("{stdout}");
    Ok(out.dir)
}

fn forward(cfg: &RunConfig, problem: &Problem, out: &mut Artifacts) -> Result<String> {
    let mut req = ForwardRequest::new(cfg.forward.trajectories, cfg.final_time, cfg.observable);
    req.event_cap = cfg.forward.event_cap;
    req.grid = cfg.forward.grid.clone();
    req.keep_samples = cfg.forward.dump_samples;
    let res = run_forward_ensemble(problem, &req, cfg.seed)?;
    let est = &res.estimate;
    let summary = json!({
        "observable": cfg.observable.name(),
        "final_time": cfg.final_time,
        "classical": cfg.is_classical(),
        "gamma": problem.gamma(),
        "trajectories": est.trajectories,
        "estimate": est.estimate,
        "std_err": est.std_err,
        "histogram": est.histogram,
        "capped": est.capped,
        "capped_fraction": est.capped_fraction,
        "cancellation_ratio": est.cancellation_ratio,
        "max_abs_weight": est.max_abs_weight,
    });
    out.write_json("summary.json", &summary)?;
    if let Some(grid) = &res.grid {
        out.write("grid.csv", &grid.to_csv())?;
    }
    if cfg.forward.dump_samples {
        let mut csv = String::from(
            "index,start_px,start_py,start_x,start_y,end_px,end_py,end_x,end_y,weight,events,start_ratio,capped\n",
        );
        for (i, s) in res.samples.iter().enumerate() {
            let (a, b) = (s.start, s.end);
            let _ = writeln!(
                csv,
                "{i},{},{},{},{},{},{},{},{},{},{},{},{}",
                a.px, a.py, a.x, a.y, b.px, b.py, b.x, b.y, s.weight, s.events, s.start_ratio, s.capped
            );
        }
        out.write("samples.csv", &csv)?;
    }
    Ok(format!(
        "{}\n",
        serde_json::to_string_pretty(&summary).unwrap_or_default()
    ))
}

fn backward(cfg: &RunConfig, problem: &Problem, out: &mut Artifacts) -> Result<String> {
    let plan = cfg.backward_plan()?;
    let res = run_backward(&plan, problem, &cfg.observable, cfg.seed)?;
    let mut csv = String::from("order,mean,std_err,count\n");
    for t in &res.terms {
        let _ = writeln!(csv, "{},{},{},{}", t.order, t.mean, t.std_err, t.count);
    }
    out.write("terms.csv", &csv)?;
    out.write_json(
        "summary.json",
        &json!({
            "observable": cfg.observable.name(),
            "final_time": cfg.final_time,
            "classical": cfg.is_classical(),
            "gamma": problem.gamma(),
            "plan": plan,
            "terms": res.terms,
            "total": res.total,
            "total_std_err": res.total_std_err,
        }),
    )?;
    Ok(csv)
}

fn oracle(cfg: &RunConfig, problem: &Problem, out: &mut Artifacts) -> Result<String> {
    let n = cfg.oracle.max_order;
    let quad = cfg.quadrature();
    let obs = [cfg.observable];
    let fw = forward_terms(n, cfg.final_time, &obs, problem, &quad)?;
    let bw = backward_terms(n, cfg.final_time, &obs, problem, &quad)?;
    let mut csv = String::from("order,forward,backward\n");
    for k in 0..=n {
        let _ = writeln!(csv, "{k},{},{}", fw.term(k, 0), bw.term(k, 0));
    }
    let _ = writeln!(csv, "sum,{},{}", fw.sum(0), bw.sum(0));
    out.write("oracle.csv", &csv)?;
    let fredholm = match &cfg.oracle.fredholm {
        Some(spec) => Some(fredholm_matrix_check(problem, &cfg.observable, cfg.final_time, spec)?),
        None => None,
    };
    out.write_json(
        "summary.json",
        &json!({
            "observable": cfg.observable.name(),
            "final_time": cfg.final_time,
            "gamma": problem.gamma(),
            "quadrature": quad,
            "forward": fw.values.iter().map(|v| v[0]).collect::<Vec<_>>(),
            "backward": bw.values.iter().map(|v| v[0]).collect::<Vec<_>>(),
            "forward_sum": fw.sum(0),
            "backward_sum": bw.sum(0),
            "fredholm": fredholm,
        }),
    )?;
    Ok(csv)
}

fn slice(cfg: &RunConfig, problem: &Problem, out: &mut Artifacts) -> Result<String> {
    let spec = cfg
        .slice
        .grid
        .clone()
        .ok_or_else(|| WignerError::config("slice.grid", "the slice command needs a grid"))?;
    let schedule = cfg.slice_schedule();
    let run = run_slices(
        &schedule,
        &spec,
        problem,
        &cfg.slice.observables,
        cfg.forward.event_cap,
        cfg.seed,
    )?;
    let mut entries: Vec<Value> = Vec::new();
    for s in &run.slices {
        let name = format!("slice_{:03}.csv", s.index);
        out.write(&name, &s.grid.to_csv())?;
        entries.push(json!({
            "index": s.index,
            "file": name,
            "t_start": s.t_start,
            "t_end": s.t_end,
            "lower": spec.lower,
            "upper": spec.upper,
            "cells": spec.cells,
            "scale_factor": s.scale_factor,
            "cumulative_scale": s.cumulative_scale,
            "out_of_bounds": s.grid.out_of_bounds * s.cumulative_scale,
            "out_of_bounds_abs": s.grid.out_of_bounds_abs * s.cumulative_scale,
            "observables": s.observables,
            "max_abs_weight": s.max_abs_weight,
            "max_events": s.max_events,
            "cancellation_ratio": s.cancellation_ratio,
            "capped": s.capped,
        }));
    }
    let summary = json!({
        "final_time": cfg.final_time,
        "slice_length": schedule.slice_length,
        "last_slice_shortened": run.last_slice_shortened,
        "classical": cfg.is_classical(),
        "gamma": problem.gamma(),
        "slices": entries,
    });
    out.write_json("slices.json", &summary)?;
    Ok(format!(
        "{}\n",
        serde_json::to_string_pretty(&summary).unwrap_or_default()
    ))
}

fn stencil(problem: &Problem, out: &mut Artifacts) -> Result<String> {
    let st = &problem.stencil;
    let mut csv = String::from("index,ix,iy,jx,jy,alpha,probability,gamma\n");
    for (k, t) in st.terms.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{k},{},{},{},{},{},{},{}",
            t.di[0],
            t.di[1],
            t.dj[0],
            t.dj[1],
            t.alpha,
            st.probability(k),
            st.gamma
        );
    }
    out.write("stencil.csv", &csv)?;
    out.write_json(
        "summary.json",
        &json!({
            "gamma": st.gamma,
            "alpha_abs_sum": st.alpha_abs_sum,
            "mirrored": st.mirrored,
            "classical": st.classical,
            "delta_p": st.disc.delta_p,
            "delta_x": st.disc.delta_x,
        }),
    )?;
    Ok(csv)
}
