//! Acceptance suite: seven criteria at their pinned tolerances, one PASS/FAIL line each.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::time::{Duration, Instant};

use holoqutrit::benchmarking::{run_rb_with, GateSet, RbConfig};
use holoqutrit::calibration::{
    cascade_populations, chevron_rabi, fit_chevron, fit_rabi, fit_ramsey, fit_rate_equation, ChevronPoint, Trace,
};
use holoqutrit::evolution::{channel, propagate_lindblad, propagate_unitary, FnHamiltonian, Superoperator, TimeGrid};
use holoqutrit::holonomic::{
    named_gate, synthesize_cavity_gate, synthesize_qubit_gate, target_u1, target_u2, HolonomicParams,
};
use holoqutrit::model::{collapse_operators, paper_device, ControlError, NoiseModel};
use holoqutrit::operators::{
    gate_fidelity, gf_fidelity, hermiticity_error, ket_bra, max_abs, unitarity_error, QutritKet, E, F, G,
};
use holoqutrit::pulses::Envelope;
use holoqutrit::sweeps::{
    cavity_gate_loss, crosstalk_sweep, linspace, CavityGate, PipelineSettings, SweepGate, SweepSettings,
};
use holoqutrit::tomography::{run_qpt, QptSettings};
use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(cond: bool, what: String, notes: &mut Vec<String>) -> bool {
    if !cond {
        notes.push(what);
    }
    cond
}

fn gaussian_gate() -> Envelope<f64> {
    let dev = paper_device::<f64>();
    Envelope::truncated_gaussian(dev.gate_sigma, dev.gate_total, 1.0).unwrap()
}

fn q1_jumps() -> Vec<DMatrix<Complex<f64>>> {
    collapse_operators(&paper_device::<f64>().noise_q1).unwrap().iter().map(|c| c.weighted()).collect()
}

fn criterion_1() -> Outcome {
    let base = gaussian_gate();
    let mut worst = 0.0f64;
    for &theta in &linspace(0.0, PI, 5) {
        for &gamma in &linspace(0.0, TAU, 5) {
            for &phi in &linspace(0.0, TAU, 5) {
                let p = HolonomicParams::new(theta, gamma, phi).unwrap();
                let u = synthesize_qubit_gate(&p, &base).unwrap().unitary(&ControlError::none()).unwrap();
                worst = worst.max(1.0 - gf_fidelity(&target_u1(&p), &u));
            }
        }
    }
    Outcome { pass: worst < 1e-6, detail: format!("worst infidelity {worst:.2e} over 125 gates (< 1e-6)") }
}

const FOUR: [&str; 4] = ["X_pi", "X_pi_2", "H", "Z_pi"];

fn criterion_2() -> Outcome {
    let base = gaussian_gate();
    let jumps = q1_jumps();
    let mut notes = Vec::new();
    let mut ok = true;
    let (mut sum_f, mut sum_tr) = (0.0, 0.0);
    let mut per_gate = Vec::new();
    for name in FOUR {
        let p = named_gate::<f64>(name).unwrap();
        let target = target_u1(&p);
        let sched = synthesize_qubit_gate(&p, &base).unwrap();
        let ideal = run_qpt(
            &Superoperator::from_unitary(&sched.unitary(&ControlError::none()).unwrap()),
            &target,
            &QptSettings::default(),
        )
        .unwrap();
        ok &= check(
            (ideal.f_unatt - 1.0).abs() < 1e-5,
            format!("{name} noiseless F_unatt {:.7}", ideal.f_unatt),
            &mut notes,
        );
        ok &= check((ideal.trace - 1.0).abs() < 1e-5, format!("{name} noiseless Tr {:.7}", ideal.trace), &mut notes);
        let drive = sched.drive(&ControlError::none()).unwrap();
        let ch = channel(&drive, &jumps, &sched.grid(4096).unwrap()).unwrap();
        let noisy = run_qpt(&ch, &target, &QptSettings::default()).unwrap();
        ok &= check(
            (0.990..=0.9995).contains(&noisy.f_unatt),
            format!("{name} F_unatt {:.6} outside [0.990, 0.9995]", noisy.f_unatt),
            &mut notes,
        );
        sum_f += noisy.f_unatt;
        sum_tr += noisy.trace;
        per_gate.push(format!("{name} F_unatt={:.6} F_att={:.4} Tr={:.4}", noisy.f_unatt, noisy.f_att, noisy.trace));
    }
    let (avg_f, avg_tr) = (sum_f / 4.0, sum_tr / 4.0);
    ok &=
        check((avg_f - 0.996).abs() <= 0.004, format!("mean F_unatt {avg_f:.6} not within 0.004 of 0.996"), &mut notes);
    ok &= check(avg_tr >= 0.985, format!("mean Tr {avg_tr:.4} < 0.985"), &mut notes);
    Outcome {
        pass: ok,
        detail: format!("{}; mean F_unatt={avg_f:.6} mean Tr={avg_tr:.4}{}", per_gate.join(", "), failures(&notes)),
    }
}

fn failures(notes: &[String]) -> String {
    if notes.is_empty() {
        String::new()
    } else {
        format!(" | failed: {}", notes.join("; "))
    }
}

fn criterion_3() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let ideal_cfg = RbConfig { steps: 1024, ..RbConfig::new(11) };
    let ideal = run_rb_with(&ideal_cfg, &GateSet::new(&ideal_cfg)).unwrap();
    ok &= check(
        (ideal.reference.fit.p - 1.0).abs() < 1e-4,
        format!("noiseless p {:.6}", ideal.reference.fit.p),
        &mut notes,
    );

    let cfg = RbConfig { noise: paper_device::<f64>().noise_q1, envelope: gaussian_gate(), ..RbConfig::new(2018) };
    let gates = GateSet::new(&cfg);
    let reference = run_rb_with(&cfg, &gates).unwrap();
    let f_avg = reference.reference.fit.f_avg;
    ok &= check((0.992..=0.999).contains(&f_avg), format!("F_avg {f_avg:.5} outside [0.992, 0.999]"), &mut notes);
    let mut parts = vec![format!("p_ref={:.5} F_avg={f_avg:.5}", reference.reference.fit.p)];
    for name in FOUR {
        let c = RbConfig { interleaved: Some(name.into()), ..cfg.clone() };
        let out = run_rb_with(&c, &gates).unwrap();
        let fg = out.f_gate.unwrap();
        ok &=
            check((0.992..=0.9995).contains(&fg), format!("{name} F_gate {fg:.5} outside [0.992, 0.9995]"), &mut notes);
        parts.push(format!("{name} F_gate={fg:.5}"));
    }
    Outcome {
        pass: ok,
        detail: format!("noiseless p={:.6}; {}{}", ideal.reference.fit.p, parts.join(", "), failures(&notes)),
    }
}

fn criterion_4() -> Outcome {
    let dev = paper_device::<f64>();
    let mut notes = Vec::new();
    let ramp = Envelope::square(0.0, dev.ramp, 1.0).unwrap();
    let p = HolonomicParams::new(dev.cavity_x.theta(), PI, 0.0).unwrap();
    let sched = synthesize_cavity_gate(&p, dev.cavity_x.coupling(), &ramp).unwrap();
    let u = sched.unitary(&ControlError::none()).unwrap();
    let block = DMatrix::from_fn(2, 2, |a, b| u[(a, b)]);
    let infid = 1.0 - gate_fidelity(&target_u2(FRAC_PI_2, 0.0), &block);
    let mut ok = check(infid < 1e-5, format!("schedule infidelity {infid:.2e}"), &mut notes);
    let gate = CavityGate::from_model(&dev.cavity_x, dev.ramp).unwrap();
    let (loss, reference, gated) = cavity_gate_loss(&gate, &PipelineSettings::paper_device(true)).unwrap();
    ok &= check((0.02..=0.09).contains(&loss), format!("loss {loss:.4} outside [0.02, 0.09]"), &mut notes);
    Outcome {
        pass: ok,
        detail: format!(
            "X_pi schedule {:.1} ns infidelity {infid:.2e}; pipeline F_att no-gate={:.4} gate={:.4} loss={loss:.4}{}",
            sched.duration * 1e9,
            reference.f_att,
            gated.f_att,
            failures(&notes)
        ),
    }
}

fn criterion_5() -> Outcome {
    let s = SweepSettings::default();
    let mut notes = Vec::new();
    let hh = crosstalk_sweep(&SweepGate::Holonomic(named_gate("H").unwrap()), &s).unwrap();
    let dh = crosstalk_sweep(&SweepGate::DynamicHadamard, &s).unwrap();
    let ht = crosstalk_sweep(&SweepGate::Holonomic(named_gate("T").unwrap()), &s).unwrap();
    let dt = crosstalk_sweep(&SweepGate::DynamicT, &s).unwrap();
    let mut ok = true;
    let mut worst_gap = f64::INFINITY;
    for ((e, fh), (_, fd)) in hh.zero_detuning_cut().into_iter().zip(dh.zero_detuning_cut()) {
        if e.abs() >= 0.02 - 1e-12 {
            worst_gap = worst_gap.min(fh - fd);
            ok &= check(fh >= fd, format!("Δ=0, ε={e:+.2}: holonomic {fh:.6} < dynamic {fd:.6}"), &mut notes);
        }
    }
    ok &= check(hh.mean_att() > dh.mean_att(), "Hadamard grid mean".into(), &mut notes);
    ok &= check(ht.mean_att() > dt.mean_att(), "T grid mean".into(), &mut notes);
    let shown: Vec<_> = notes.iter().take(3).cloned().collect();
    let more = notes.len().saturating_sub(3);
    Outcome {
        pass: ok,
        detail: format!(
            "grid means H: hol {:.4} vs dyn {:.4}; T: hol {:.4} vs dyn {:.4}; min Δ=0 gap (hol−dyn) {worst_gap:+.2e}{}{}",
            hh.mean_att(),
            dh.mean_att(),
            ht.mean_att(),
            dt.mean_att(),
            failures(&shown),
            if more > 0 { format!(" (+{more} more cut points)") } else { String::new() }
        ),
    }
}

fn grid(n: usize, t1: f64) -> Vec<f64> {
    (0..n).map(|i| t1 * i as f64 / (n - 1) as f64).collect()
}

fn criterion_6() -> Outcome {
    const DRAWS: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let noise = Normal::new(0.0, 1e-3).unwrap();
    let mut notes = Vec::new();
    let mut worst = [0.0f64; 4];
    let us = 1e-6;
    let t1_ge = [45.6, 42.2];
    let t1_ef = [20.3, 24.9];
    let t2s = [24.4, 8.3, 44.0, 13.6];
    for k in 0..DRAWS {
        // rate equation
        let r = [
            1.0 / (t1_ge[k % 2] * us * rng.random_range(0.8..1.2)),
            1.0 / (t1_ef[k % 2] * us * rng.random_range(0.8..1.2)),
            0.0,
        ];
        let ts = grid(60, 150.0 * us);
        let pops: Vec<_> = ts.iter().map(|&t| cascade_populations(r, [0.0, 0.0, 1.0], t)).collect();
        let tr = |i: usize, rng: &mut ChaCha8Rng| {
            Trace::new("p", ts.clone(), pops.iter().map(|p| p[i] + noise.sample(rng)).collect()).unwrap()
        };
        let (g, e, f) = (tr(0, &mut rng), tr(1, &mut rng), tr(2, &mut rng));
        match fit_rate_equation(&g, &e, &f) {
            Ok(fit) => {
                let err = (fit.gamma_eg / r[0] - 1.0).abs().max((fit.gamma_fe / r[1] - 1.0).abs());
                worst[0] = worst[0].max(err);
            }
            Err(e) => notes.push(format!("rate draw {k}: {e}")),
        }

        // Ramsey
        let t2 = t2s[k % 4] * us * rng.random_range(0.8..1.2);
        let f1 = rng.random_range(0.3e6..1.0e6);
        let a2 = if k % 2 == 0 { rng.random_range(0.1..0.25) } else { 0.0 };
        let f2 = f1 + rng.random_range(0.3e6..0.8e6);
        let (p1, p2) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        let ts = grid(301, 3.0 * t2);
        let ys = ts
            .iter()
            .map(|&t| {
                0.5 + (-t / t2).exp() * ((0.5 - a2) * (TAU * f1 * t + p1).cos() + a2 * (TAU * f2 * t + p2).cos())
                    + noise.sample(&mut rng)
            })
            .collect();
        match fit_ramsey(&Trace::new("ramsey", ts, ys).unwrap()) {
            Ok(fit) => worst[1] = worst[1].max((fit.t2_star / t2 - 1.0).abs()),
            Err(e) => notes.push(format!("ramsey draw {k}: {e}")),
        }

        // Rabi on the encode Raman transition
        let omega = 2.0 * TAU * 0.845e6 * rng.random_range(0.8..1.2);
        let tau = t1_ef[k % 2] * us * rng.random_range(0.8..1.2);
        let ph = rng.random_range(-0.5..0.5);
        let ts = grid(200, 5.0 * us);
        let ys = ts
            .iter()
            .map(|&t| 0.5 + 0.5 * (-t / tau).exp() * (omega * t + ph).cos() + noise.sample(&mut rng))
            .collect();
        match fit_rabi(&Trace::new("rabi", ts, ys).unwrap()) {
            Ok(fit) => worst[2] = worst[2].max((fit.omega / omega - 1.0).abs()),
            Err(e) => notes.push(format!("rabi draw {k}: {e}")),
        }

        // chevron
        let gc = TAU * 0.845e6 * rng.random_range(0.8..1.2);
        let center = TAU * rng.random_range(-0.3e6..0.3e6);
        let pts: Vec<_> = (-6..=6)
            .map(|j| {
                let d = j as f64 * TAU * 0.4e6;
                ChevronPoint::new(d, chevron_rabi(d, center, gc) * (1.0 + noise.sample(&mut rng))).unwrap()
            })
            .collect();
        match fit_chevron(&pts) {
            // the resonance is judged on the scale of the coupling, not of the carrier frequency
            Ok(fit) => worst[3] = worst[3].max((fit.coupling / gc - 1.0).abs()).max((fit.center - center).abs() / gc),
            Err(e) => notes.push(format!("chevron draw {k}: {e}")),
        }
    }
    let ok = notes.is_empty() && worst.iter().all(|&w| w < 0.02);
    Outcome {
        pass: ok,
        detail: format!(
            "worst relative errors over {DRAWS} draws: rate {:.2e}, Ramsey T2* {:.2e}, Rabi {:.2e}, chevron {:.2e}{}",
            worst[0],
            worst[1],
            worst[2],
            worst[3],
            failures(&notes.into_iter().take(3).collect::<Vec<_>>())
        ),
    }
}

fn criterion_7() -> Outcome {
    let mut notes = Vec::new();
    let c = |re: f64, im: f64| Complex::new(re, im);

    // unitarity over 10⁵ steps
    let sx = ket_bra::<f64>(3, G, E) + ket_bra::<f64>(3, E, F) * c(0.0, 1.0);
    let h = FnHamiltonian { dim: 3, f: move |t: f64| (&sx + sx.adjoint()) * c((1e4 * t).sin() * 1e3, 0.0) };
    let u = propagate_unitary(&h, &TimeGrid::with_steps(0.0, 1e-2, 100_000).unwrap()).unwrap();
    let drift = unitarity_error(&u);
    let mut ok = check(drift < 1e-8, format!("unitarity drift {drift:.2e}"), &mut notes);

    // hermiticity and positivity along a noisy gate
    let sched = synthesize_qubit_gate(&named_gate("H").unwrap(), &gaussian_gate()).unwrap();
    let drive = sched.drive(&ControlError::none()).unwrap();
    let strong = NoiseModel::from_coherence_times(2e-6, 1e-6, 1.5e-6, 0.8e-6, 1e5).unwrap();
    let jumps: Vec<_> = collapse_operators(&strong).unwrap().iter().map(|c| c.weighted()).collect();
    let psi = QutritKet::normalized([c(0.6, 0.0), c(0.0, 0.3), c(0.2, -0.7)]).unwrap();
    let traj = propagate_lindblad(&drive, &jumps, &psi.density(), &sched.grid(2048).unwrap(), 1).unwrap();
    let herm = traj.samples.iter().map(|(_, r)| hermiticity_error(r.matrix())).fold(0.0, f64::max);
    let min_eig = traj.samples.iter().map(|(_, r)| r.min_eigenvalue()).fold(f64::INFINITY, f64::min);
    ok &= check(herm < 1e-10, format!("hermiticity {herm:.2e}"), &mut notes);
    ok &= check(min_eig > -1e-8, format!("min eigenvalue {min_eig:.2e}"), &mut notes);

    // trace preservation of the device noise channel
    let ch = channel(&drive, &q1_jumps(), &sched.grid(4096).unwrap()).unwrap();
    let tp = ch.trace_preservation_error();
    ok &= check(tp < 1e-10, format!("trace preservation {tp:.2e}"), &mut notes);

    // fourth-order convergence of the master-equation integrator
    let final_state = |steps: usize| {
        let g = sched.grid(steps).unwrap();
        propagate_lindblad(&drive, &jumps, &psi.density(), &g, usize::MAX).unwrap().final_state().matrix().clone()
    };
    let reference = final_state(8192);
    let e1 = max_abs(&(final_state(32) - &reference));
    let e2 = max_abs(&(final_state(64) - &reference));
    let ratio = e1 / e2;
    ok &= check(ratio >= 8.0, format!("convergence ratio {ratio:.2}"), &mut notes);
    Outcome {
        pass: ok,
        detail: format!(
            "unitarity drift {drift:.1e}, hermiticity {herm:.1e}, min eig {min_eig:.1e}, TP {tp:.1e}, dt-halving ratio {ratio:.1}{}",
            failures(&notes)
        ),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 7] = [
        ("1 ideal synthesis", criterion_1, Duration::from_secs(30)),
        ("2 QPT pipeline", criterion_2, Duration::from_secs(300)),
        ("3 RB suite", criterion_3, Duration::from_secs(600)),
        ("4 cavity gates", criterion_4, Duration::from_secs(300)),
        ("5 robustness ordering", criterion_5, Duration::from_secs(u64::MAX / 4)),
        ("6 fit round-trips", criterion_6, Duration::from_secs(120)),
        ("7 numerical hygiene", criterion_7, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let t = Instant::now();
        let out = run();
        let took = t.elapsed();
        let in_time = took <= limit;
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        let timing = if in_time { String::new() } else { format!(" [over the {:?} budget]", limit) };
        println!(
            "{} criterion {name}: {} ({:.1} s){timing}",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64()
        );
    }
    println!("acceptance: {} of 7 criteria passed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
