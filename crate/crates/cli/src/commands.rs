use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use holoqutrit::benchmarking::{run_rb, RbConfig};
use holoqutrit::calibration::{fit_chevron, fit_rabi, fit_ramsey, fit_rate_equation, ChevronPoint, Trace};
use holoqutrit::evolution::{channel, Superoperator};
use holoqutrit::holonomic::{synthesize_qubit_gate, target_u1, GateSchedule};
use holoqutrit::model::collapse_operators;
use holoqutrit::operators::{gf_fidelity, gf_leakage, unitarity_error};
use holoqutrit::sweeps::{
    cavity_gate_loss, cavity_pipeline, crosstalk_sweep, linspace, CavityGate, PipelineResult, PipelineSettings,
    SweepGate, SweepSettings,
};
use holoqutrit::tomography::{run_qpt, Measurement, QptSettings};
use serde_json::{json, Value};

use crate::config::Config;
use crate::CliError;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Where a command writes and how it samples.
pub struct Run<'a> {
    pub cfg: &'a Config,
    pub config_dir: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub shots: Option<u64>,
    pub artifacts: Vec<String>,
}

impl Run<'_> {
    fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, v: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(v).expect("json value serializes");
        text.push('\n');
        self.write(name, &text)
    }

    fn read(&self, rel: &str) -> Result<String, CliError> {
        let path = self.config_dir.join(rel);
        fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))
    }

    fn measurement(&self) -> Measurement {
        match self.shots {
            Some(shots) => Measurement::Sampled { shots, seed: self.seed },
            None => Measurement::Exact,
        }
    }

    fn schedule(&self) -> Result<(String, GateSchedule<f64>), CliError> {
        let (name, p) = self.cfg.gate()?;
        let mut s = synthesize_qubit_gate(&p, &self.cfg.envelope()?)?;
        if let Some(d) = self.cfg.drag()? {
            s = s.with_drag(d);
        }
        Ok((name, s))
    }

    fn gate_channel(&self, sched: &GateSchedule<f64>) -> Result<Superoperator<f64>, CliError> {
        let jumps: Vec<_> = collapse_operators(&self.cfg.noise()?)?.iter().map(|c| c.weighted()).collect();
        let drive = sched.drive(&self.cfg.control_error()?)?;
        Ok(channel(&drive, &jumps, &sched.grid(self.cfg.steps)?)?)
    }
}

fn schedule_csv(s: &GateSchedule<f64>) -> String {
    let mut out = String::from("part,transition,phase,start_ns,end_ns,area\n");
    for (k, part) in s.parts.iter().enumerate() {
        for seg in part {
            let (a, b) = seg.active();
            let _ = writeln!(
                out,
                "{k},{},{:e},{:e},{:e},{:e}",
                seg.transition.name(),
                seg.phase,
                a * 1e9,
                b * 1e9,
                seg.area()
            );
        }
    }
    out
}

pub fn gate(run: &mut Run) -> Result<(), CliError> {
    let (name, sched) = run.schedule()?;
    let (_, p) = run.cfg.gate()?;
    let target = target_u1(&p);
    let u = sched.unitary_with_steps(&run.cfg.control_error()?, run.cfg.steps)?;
    let mut report = json!({
        "gate": name,
        "theta": p.theta,
        "gamma": p.gamma,
        "phi": p.phi,
        "duration_ns": sched.duration * 1e9,
        "fidelity": gf_fidelity(&target, &u),
        "leakage": gf_leakage(&u),
        "unitarity_error": unitarity_error(&u),
    });
    if !run.cfg.noise()?.is_noiseless() {
        let ch = run.gate_channel(&sched)?;
        let q = run_qpt(&ch, &target, &QptSettings::default())?;
        report["process"] = json!({"f_att": q.f_att, "f_unatt": q.f_unatt, "trace": q.trace});
    }
    run.write("schedule.csv", &schedule_csv(&sched))?;
    run.write_json("report.json", &report)
}

pub fn qpt(run: &mut Run) -> Result<(), CliError> {
    let (name, sched) = run.schedule()?;
    let (_, p) = run.cfg.gate()?;
    let ch = run.gate_channel(&sched)?;
    let settings = QptSettings {
        measurement: run.measurement(),
        simulated_prerotations: if run.cfg.qpt.simulated_prerotations { Some(run.cfg.envelope()?) } else { None },
        psd_projection: run.cfg.qpt.psd_projection,
    };
    let q = run_qpt(&ch, &target_u1(&p), &settings)?;
    run.write("chi_full.csv", &q.chi.chi.to_csv())?;
    run.write("chi_reduced.csv", &q.reduced.to_csv())?;
    run.write("chi_target.csv", &q.reduced_target.to_csv())?;
    run.write_json("record.json", &serde_json::to_value(&q.record).expect("record serializes"))?;
    run.write_json(
        "summary.json",
        &json!({
            "gate": name,
            "f_att": q.f_att,
            "f_unatt": q.f_unatt,
            "trace": q.trace,
            "chi_residual": q.chi.residual,
            "hermiticity_error": q.chi.chi.hermiticity_error(),
            "measurement": settings.measurement,
        }),
    )
}

pub fn rb(run: &mut Run) -> Result<(), CliError> {
    let sec = &run.cfg.rb;
    let cfg = RbConfig {
        lengths: sec.lengths.clone(),
        randomizations: sec.randomizations,
        seed: run.seed,
        interleaved: sec.interleaved.clone(),
        noise: run.cfg.noise()?,
        error: run.cfg.control_error()?,
        depolarizing: sec.depolarizing,
        envelope: run.cfg.envelope()?,
        steps: run.cfg.steps,
    };
    cfg.validate().map_err(|e| CliError::Config { path: "rb".into(), msg: e.to_string() })?;
    let out = run_rb(&cfg)?;
    run.write("rb_reference.csv", &out.reference.to_csv())?;
    if let Some(rec) = &out.interleaved {
        run.write("rb_interleaved.csv", &rec.to_csv())?;
    }
    run.write_json(
        "summary.json",
        &json!({
            "p_ref": out.reference.fit.p,
            "p_ref_stderr": out.reference.fit.p_stderr,
            "F_avg": out.reference.fit.f_avg,
            "saturated": out.reference.saturated,
            "gate": out.gate,
            "p_gate": out.interleaved.as_ref().map(|r| r.fit.p),
            "F_gate": out.f_gate,
            "outcome": out,
        }),
    )
}

pub fn sweep(run: &mut Run) -> Result<(), CliError> {
    let sec = &run.cfg.sweep;
    let gate = match sec.family.as_str() {
        "holonomic" => SweepGate::Holonomic(run.cfg.gate()?.1),
        "dynamic_hadamard" => SweepGate::DynamicHadamard,
        "dynamic_t" => SweepGate::DynamicT,
        other => {
            return Err(CliError::Config { path: "sweep.family".into(), msg: format!("unknown family {other:?}") })
        }
    };
    let dev = run.cfg.device();
    let settings = SweepSettings {
        epsilons: linspace(sec.epsilon.min, sec.epsilon.max, sec.epsilon.points),
        detunings: linspace(sec.detuning_mhz.min, sec.detuning_mhz.max, sec.detuning_mhz.points)
            .into_iter()
            .map(|f| TWO_PI * f * 1e6)
            .collect(),
        sigma: run.cfg.envelope.sigma_ns * 1e-9,
        total: run.cfg.envelope.total_ns * 1e-9,
        drag: run.cfg.envelope.drag.then(|| (dev.drag_coefficient, dev.q1.anharmonicity())),
        steps: sec.steps,
    };
    let grid = crosstalk_sweep(&gate, &settings)?;
    run.write("sweep_att.csv", &grid.to_csv(false))?;
    run.write("sweep_unatt.csv", &grid.to_csv(true))?;
    let cut: Vec<Value> = grid.zero_detuning_cut().iter().map(|&(e, f)| json!({"epsilon": e, "f_att": f})).collect();
    run.write_json(
        "sweep.json",
        &json!({
            "gate": gate.label(),
            "settings_hash": settings.hash(&gate),
            "settings": settings,
            "mean_att": grid.mean_att(),
            "zero_detuning_cut": cut,
        }),
    )
}

fn pipeline_json(r: &PipelineResult) -> Value {
    json!({
        "f_att": r.f_att,
        "f_unatt": r.f_unatt,
        "trace": r.trace,
        "decode_phase": r.decode_phase,
        "duration_ns": r.duration * 1e9,
    })
}

pub fn cavity(run: &mut Run) -> Result<(), CliError> {
    let sec = &run.cfg.cavity;
    let mut settings = PipelineSettings::paper_device(sec.decoherence);
    settings.dt = sec.dt_ns * 1e-9;
    settings.decode_phase = sec.decode_phase;
    let gate = match run.cfg.cavity_gate()? {
        Some((theta, phi, coupling)) => Some(CavityGate::u2(theta, phi, coupling, settings.ramp)?),
        None => None,
    };
    let (result, summary) = match &gate {
        Some(g) => {
            let (loss, reference, gated) = cavity_gate_loss(g, &settings)?;
            let s = json!({
                "gate": sec.gate,
                "gate_duration_ns": g.schedule.duration * 1e9,
                "loss": loss,
                "reference": pipeline_json(&reference),
                "gated": pipeline_json(&gated),
            });
            (gated, s)
        }
        None => {
            let r = cavity_pipeline(None, &settings)?;
            let s = json!({"gate": sec.gate, "gated": pipeline_json(&r)});
            (r, s)
        }
    };
    run.write("chi.csv", &result.chi.to_csv())?;
    run.write("chi_target.csv", &result.target.to_csv())?;
    run.write_json("summary.json", &summary)
}

fn chevron_points(text: &str) -> Result<Vec<ChevronPoint>, CliError> {
    let trace = Trace::from_csv("chevron", text)?;
    trace
        .times
        .iter()
        .zip(&trace.values)
        .map(|(&d, &r)| ChevronPoint::new(TWO_PI * d * 1e6, TWO_PI * r * 1e6).map_err(CliError::from))
        .collect()
}

pub fn calibrate(run: &mut Run) -> Result<(), CliError> {
    let sec = run.cfg.calibrate.clone().ok_or_else(|| CliError::Config {
        path: "calibrate".into(),
        msg: "section is required for this subcommand".into(),
    })?;
    let need = if sec.kind == "rate" { 3 } else { 1 };
    if sec.files.len() != need {
        return Err(CliError::Config {
            path: "calibrate.files".into(),
            msg: format!("{} needs {need} file(s)", sec.kind),
        });
    }
    let load = |run: &Run, i: usize| -> Result<Trace, CliError> {
        let t = Trace::from_csv(sec.files[i].clone(), &run.read(&sec.files[i])?)?;
        Ok(match sec.detrend {
            Some(deg) => t.detrended(deg)?,
            None => t,
        })
    };
    let out = match sec.kind.as_str() {
        "rate" => {
            let f = fit_rate_equation(&load(run, 0)?, &load(run, 1)?, &load(run, 2)?)?;
            json!({
                "kind": "rate",
                "t1_ge_us": 1e6 / f.gamma_eg,
                "t1_ef_us": 1e6 / f.gamma_fe,
                "gamma_fg_per_us": f.gamma_fg * 1e-6,
                "fit": f,
            })
        }
        "ramsey" => {
            let f = fit_ramsey(&load(run, 0)?)?;
            json!({"kind": "ramsey", "t2_star_us": f.t2_star * 1e6, "f1_mhz": f.f1 * 1e-6, "f2_mhz": f.f2 * 1e-6, "fit": f})
        }
        "rabi" => {
            let f = fit_rabi(&load(run, 0)?)?;
            json!({"kind": "rabi", "rabi_mhz": f.omega / TWO_PI * 1e-6, "fit": f})
        }
        "chevron" => {
            let f = fit_chevron(&chevron_points(&run.read(&sec.files[0])?)?)?;
            json!({
                "kind": "chevron",
                "center_mhz": f.center / TWO_PI * 1e-6,
                "coupling_mhz": f.coupling / TWO_PI * 1e-6,
                "fit": f,
            })
        }
        other => {
            return Err(CliError::Config { path: "calibrate.kind".into(), msg: format!("unknown fit kind {other:?}") })
        }
    };
    run.write_json("fit.json", &out)
}

pub fn config_dir(path: Option<&Path>) -> PathBuf {
    path.and_then(Path::parent).map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}
