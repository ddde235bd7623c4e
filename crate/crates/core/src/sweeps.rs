//! Crosstalk robustness grids and the cavity encode/gate/decode pipeline.

use nalgebra::DMatrix;
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolution::{evolve_density, propagate_unitary, SegmentDrive, TimeGrid};
use crate::holonomic::{
    dynamic_hadamard_schedule, dynamic_t_schedule, synthesize_cavity_gate, synthesize_qubit_gate, target_u1, target_u2,
    GateSchedule, HolonomicParams, Platform,
};
use crate::model::{collapse_operators, CavityCoherence, CavityModel, ControlError, NoiseModel};
use crate::operators::{gate_fidelity, gf_block, identity, ket_bra, kron, projector, ComplexMatrix, DensityMatrix};
use crate::pulses::{DragSetting, Envelope, PulseSegment, Transition};
use crate::tomography::{extract_chi, fidelity_att, fidelity_unatt, ChiMatrix, PAULI_LABELS};

type C = Complex<f64>;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Gate compared in a crosstalk sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepGate {
    Holonomic(HolonomicParams<f64>),
    DynamicHadamard,
    DynamicT,
}

impl SweepGate {
    pub fn label(&self) -> String {
        match self {
            SweepGate::Holonomic(p) => format!("holonomic({},{},{})", p.theta, p.gamma, p.phi),
            SweepGate::DynamicHadamard => "dynamic_H".into(),
            SweepGate::DynamicT => "dynamic_T".into(),
        }
    }

    /// Ideal `{g, f}` operator.
    pub fn target(&self) -> ComplexMatrix<f64> {
        match self {
            SweepGate::Holonomic(p) => target_u1(p),
            SweepGate::DynamicHadamard => {
                let r = 0.5f64.sqrt();
                DMatrix::from_row_slice(2, 2, &[C::new(r, 0.0), C::new(r, 0.0), C::new(r, 0.0), C::new(-r, 0.0)])
            }
            SweepGate::DynamicT => DMatrix::from_row_slice(
                2,
                2,
                &[
                    C::new(1.0, 0.0),
                    C::new(0.0, 0.0),
                    C::new(0.0, 0.0),
                    C::from_polar(1.0, std::f64::consts::FRAC_PI_4),
                ],
            ),
        }
    }

    pub fn schedule(&self, base: &Envelope<f64>, drag: Option<DragSetting<f64>>) -> Result<GateSchedule<f64>> {
        match self {
            SweepGate::Holonomic(p) => {
                let s = synthesize_qubit_gate(p, base)?;
                Ok(match drag {
                    Some(d) => s.with_drag(d),
                    None => s,
                })
            }
            SweepGate::DynamicHadamard => dynamic_hadamard_schedule(base, drag),
            SweepGate::DynamicT => dynamic_t_schedule(base, drag),
        }
    }
}

/// `n` evenly spaced points over `[a, b]`, endpoints included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Settings of one crosstalk grid; detunings in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub epsilons: Vec<f64>,
    pub detunings: Vec<f64>,
    /// Gaussian width and total length of the base envelope (s).
    pub sigma: f64,
    pub total: f64,
    pub drag: Option<(f64, f64)>,
    pub steps: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            epsilons: linspace(-0.1, 0.1, 21),
            detunings: linspace(-1.0, 1.0, 21).into_iter().map(|f| TWO_PI * f * 1e6).collect(),
            sigma: 30e-9,
            total: 120e-9,
            drag: None,
            steps: 1024,
        }
    }
}

impl SweepSettings {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.detunings.is_empty() {
            return Err(Error::InvalidInput("empty sweep grid".into()));
        }
        if self.epsilons.iter().chain(&self.detunings).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sweep grid values must be finite".into()));
        }
        if self.steps < 10 {
            return Err(Error::InvalidInput("at least 10 integration steps".into()));
        }
        Ok(())
    }

    fn envelope(&self) -> Result<Envelope<f64>> {
        Envelope::truncated_gaussian(self.sigma, self.total, 1.0)
    }

    fn drag_setting(&self) -> Result<Option<DragSetting<f64>>> {
        self.drag.map(|(c, a)| DragSetting::new(c, a)).transpose()
    }

    /// Hex SHA-256 of the canonical JSON of the gate label and settings.
    pub fn hash(&self, gate: &SweepGate) -> String {
        let json = serde_json::to_string(&(gate.label(), self)).expect("settings serialize");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Row-major grid: rows follow `epsilons`, columns follow `detunings`.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityGrid {
    pub gate: String,
    pub epsilons: Vec<f64>,
    pub detunings: Vec<f64>,
    /// `|Tr(U†V_gf)|²/4`, the attenuated overlap of the reduced process matrices.
    pub f_att: Vec<f64>,
    /// `f_att` divided by the retained `{g, f}` weight `‖V_gf‖²_F/2`.
    pub f_unatt: Vec<f64>,
}

impl FidelityGrid {
    pub fn at(&self, i: usize, j: usize) -> (f64, f64) {
        let k = i * self.detunings.len() + j;
        (self.f_att[k], self.f_unatt[k])
    }

    pub fn mean_att(&self) -> f64 {
        self.f_att.iter().sum::<f64>() / self.f_att.len() as f64
    }

    /// Cut at the detuning closest to zero.
    pub fn zero_detuning_cut(&self) -> Vec<(f64, f64)> {
        let j = self
            .detunings
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(j, _)| j)
            .unwrap_or(0);
        self.epsilons.iter().enumerate().map(|(i, &e)| (e, self.at(i, j).0)).collect()
    }

    /// Matrix CSV: header row of `Δ/2π` in MHz, one row per `ε`.
    pub fn to_csv(&self, unattenuated: bool) -> String {
        let data = if unattenuated { &self.f_unatt } else { &self.f_att };
        let mut s = String::from("epsilon\\delta_MHz");
        for d in &self.detunings {
            s.push_str(&format!(",{:e}", d / TWO_PI / 1e6));
        }
        s.push('\n');
        let n = self.detunings.len();
        for (i, e) in self.epsilons.iter().enumerate() {
            s.push_str(&format!("{e:e}"));
            for v in &data[i * n..(i + 1) * n] {
                s.push_str(&format!(",{v:e}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Reduced-χ fidelities of a noiseless qutrit propagator against a `{g, f}` target.
pub fn unitary_fidelities(target: &ComplexMatrix<f64>, u: &ComplexMatrix<f64>) -> (f64, f64) {
    let blk = gf_block(u);
    let att = gate_fidelity(target, &blk);
    let kept = blk.iter().map(|z| z.norm_sqr()).sum::<f64>() / 2.0;
    (att, if kept > 0.0 { att / kept } else { 0.0 })
}

/// Fidelity over the `(ε, Δ)` grid with decoherence off.
pub fn crosstalk_sweep(gate: &SweepGate, settings: &SweepSettings) -> Result<FidelityGrid> {
    settings.validate()?;
    let schedule = gate.schedule(&settings.envelope()?, settings.drag_setting()?)?;
    let target = gate.target();
    let cells: Vec<(f64, f64)> =
        settings.epsilons.iter().flat_map(|&e| settings.detunings.iter().map(move |&d| (e, d))).collect();
    let values = cells
        .par_iter()
        .map(|&(e, d)| {
            let u = schedule.unitary_with_steps(&ControlError::new(e, d)?, settings.steps)?;
            Ok(unitary_fidelities(&target, &u))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FidelityGrid {
        gate: gate.label(),
        epsilons: settings.epsilons.clone(),
        detunings: settings.detunings.clone(),
        f_att: values.iter().map(|v| v.0).collect(),
        f_unatt: values.iter().map(|v| v.1).collect(),
    })
}

// ---------------------------------------------------------------------------
// cavity pipeline on cavity{0,1} ⊗ Q1{g,e,f} ⊗ Q2{g,e,f}

/// Dimension of the pipeline Hilbert space.
pub const PIPELINE_DIM: usize = 18;

/// Index of `|n, q1, q2⟩`.
pub fn pipeline_index(n: usize, q1: usize, q2: usize) -> usize {
    n * 9 + q1 * 3 + q2
}

/// Holonomic cavity gate with its `{|0⟩, |1⟩}` target.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityGate {
    pub schedule: GateSchedule<f64>,
    pub target: ComplexMatrix<f64>,
}

impl CavityGate {
    /// `U₂(θ, φ)` with `θ, φ` and the coupling taken from the drive amplitudes.
    pub fn from_model(model: &CavityModel<f64>, ramp: f64) -> Result<Self> {
        Self::u2(model.theta(), model.phase, model.coupling(), ramp)
    }

    /// `U₂(θ, φ)` driven at total coupling `coupling` (rad/s).
    pub fn u2(theta: f64, phi: f64, coupling: f64, ramp: f64) -> Result<Self> {
        let p = HolonomicParams::new(theta, std::f64::consts::PI, phi)?;
        let base = Envelope::square(0.0, ramp, 1.0)?;
        Ok(Self { schedule: synthesize_cavity_gate(&p, coupling, &base)?, target: target_u2(theta, phi) })
    }
}

/// Decoherence of the three pipeline modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineNoise {
    pub q1: NoiseModel<f64>,
    pub q2: NoiseModel<f64>,
    pub storage: CavityCoherence<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSettings {
    /// Encode/decode Raman coupling (rad/s).
    pub encode_coupling: f64,
    pub ramp: f64,
    pub noise: Option<PipelineNoise>,
    /// Extra frame rotation of the decode pulse; `None` calibrates it.
    pub decode_phase: Option<f64>,
    /// Integration step (s).
    pub dt: f64,
}

impl PipelineSettings {
    pub fn paper_device(decoherence: bool) -> Self {
        let dev = crate::model::paper_device::<f64>();
        Self {
            encode_coupling: dev.encode_coupling,
            ramp: dev.ramp,
            noise: decoherence.then_some(PipelineNoise { q1: dev.noise_q1, q2: dev.noise_q2, storage: dev.storage }),
            decode_phase: None,
            dt: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub chi: ChiMatrix,
    pub target: ChiMatrix,
    pub f_att: f64,
    pub f_unatt: f64,
    pub trace: f64,
    pub decode_phase: f64,
    /// Encode + gate + decode (s).
    pub duration: f64,
}

/// The four `Q2` input states `|g⟩, |f⟩, (|g⟩+|f⟩)/√2, (|g⟩−i|f⟩)/√2` as `{g, f}` amplitudes.
pub fn pipeline_inputs() -> [[C; 2]; 4] {
    let r = 0.5f64.sqrt();
    [
        [C::new(1.0, 0.0), C::new(0.0, 0.0)],
        [C::new(0.0, 0.0), C::new(1.0, 0.0)],
        [C::new(r, 0.0), C::new(r, 0.0)],
        [C::new(r, 0.0), C::new(0.0, -r)],
    ]
}

/// Swap-pulse envelope: square with ramps, area π/2.
fn swap_envelope(coupling: f64, ramp: f64) -> Result<Envelope<f64>> {
    if !(coupling > 0.0) {
        return Err(Error::ZeroCoupling);
    }
    let flat = std::f64::consts::FRAC_PI_2 / coupling - ramp;
    if flat < 0.0 {
        return Err(Error::InvalidInput("swap coupling too strong for the ramp length".into()));
    }
    Envelope::square(flat, ramp, 1.0)?.normalize_to_area(std::f64::consts::FRAC_PI_2)
}

/// `Q2` Raman swap `|0,g,f⟩ ↔ |1,g,g⟩` with `Q1` idle in `|g⟩`.
fn swap_drive(env: &Envelope<f64>, phase: f64) -> Result<SegmentDrive<f64>> {
    let seg = PulseSegment::new(*env, Transition::Raman, phase, 0.0);
    let pair = (pipeline_index(1, 0, 0), pipeline_index(0, 0, 2));
    SegmentDrive::new(PIPELINE_DIM, crate::operators::zeros(PIPELINE_DIM, PIPELINE_DIM), vec![(seg, vec![pair])], 0.0)
}

/// Cavity gate on `Q1`: two-photon `|0,g⟩↔|0,f⟩` and Raman `|1,g⟩↔|0,f⟩`, for every `Q2` level.
fn gate_drive(s: &GateSchedule<f64>) -> Result<SegmentDrive<f64>> {
    if s.platform != Platform::Cavity {
        return Err(Error::InvalidInput("pipeline gates must be cavity schedules".into()));
    }
    let terms = s
        .segments()
        .map(|seg| {
            let pairs = (0..3)
                .map(|q2| match seg.transition {
                    Transition::TwoPhoton => Ok((pipeline_index(0, 0, q2), pipeline_index(0, 2, q2))),
                    Transition::Raman => Ok((pipeline_index(1, 0, q2), pipeline_index(0, 2, q2))),
                    other => Err(Error::BadTransition(other.name())),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((*seg, pairs))
        })
        .collect::<Result<Vec<_>>>()?;
    SegmentDrive::new(PIPELINE_DIM, crate::operators::zeros(PIPELINE_DIM, PIPELINE_DIM), terms, 0.0)
}

/// Jump operators of the pipeline space.
pub fn pipeline_jumps(noise: &PipelineNoise) -> Result<Vec<ComplexMatrix<f64>>> {
    let i2 = identity::<f64>(2);
    let i3 = identity::<f64>(3);
    let mut out = Vec::new();
    for c in collapse_operators(&noise.q1)? {
        out.push(kron(&i2, &kron(&c.weighted(), &i3)));
    }
    for c in collapse_operators(&noise.q2)? {
        out.push(kron(&i2, &kron(&i3, &c.weighted())));
    }
    let (relax, dephase) = noise.storage.rates()?;
    let rest = identity::<f64>(9);
    if relax > 0.0 {
        out.push(kron(&ket_bra::<f64>(2, 0, 1), &rest) * C::new(relax.sqrt(), 0.0));
    }
    if dephase > 0.0 {
        out.push(kron(&projector::<f64>(2, 1), &rest) * C::new((2.0 * dephase).sqrt(), 0.0));
    }
    Ok(out)
}

/// Unitary `e^{iφ P₁}` with `P₁` the one-photon projector.
fn photon_frame(phi: f64) -> ComplexMatrix<f64> {
    DMatrix::from_fn(PIPELINE_DIM, PIPELINE_DIM, |r, c| {
        if r != c {
            C::new(0.0, 0.0)
        } else if r >= 9 {
            C::from_polar(1.0, phi)
        } else {
            C::new(1.0, 0.0)
        }
    })
}

struct Stage {
    drive: SegmentDrive<f64>,
    grid: TimeGrid<f64>,
}

fn stage(drive: SegmentDrive<f64>, dt: f64) -> Result<Stage> {
    let end = drive.end();
    let steps = ((end / dt).ceil() as usize).max(16);
    let grid = TimeGrid::for_hamiltonian(&drive, 0.0, end, steps)?;
    Ok(Stage { drive, grid })
}

fn embed_q2(amps: &[C; 2]) -> DensityMatrix<f64> {
    let mut psi = crate::operators::ComplexVector::<f64>::zeros(PIPELINE_DIM);
    psi[pipeline_index(0, 0, 0)] = amps[0];
    psi[pipeline_index(0, 0, 2)] = amps[1];
    DensityMatrix::from_vector(&psi)
}

/// `{g, f}` block of the reduced `Q2` state.
fn q2_gf(rho: &ComplexMatrix<f64>) -> ComplexMatrix<f64> {
    let mut out = DMatrix::<C>::zeros(2, 2);
    for (a, qa) in [0usize, 2].into_iter().enumerate() {
        for (b, qb) in [0usize, 2].into_iter().enumerate() {
            for n in 0..2 {
                for q1 in 0..3 {
                    out[(a, b)] += rho[(pipeline_index(n, q1, qa), pipeline_index(n, q1, qb))];
                }
            }
        }
    }
    out
}

fn chi_from_outputs(outputs: &[ComplexMatrix<f64>], target: &ComplexMatrix<f64>) -> Result<(ChiMatrix, ChiMatrix)> {
    let basis = crate::operators::pauli_basis::<f64>();
    let inputs: Vec<_> = pipeline_inputs()
        .iter()
        .map(|a| DensityMatrix::from_vector(&crate::operators::ComplexVector::from_column_slice(a)))
        .collect();
    let outs: Vec<_> = outputs.iter().map(|m| DensityMatrix::new_unchecked(m.clone())).collect();
    let fit = extract_chi(&inputs, &outs, &basis, &PAULI_LABELS, false)?;
    Ok((fit.chi, ChiMatrix::from_unitary(target, &basis, &PAULI_LABELS)))
}

struct Pipeline {
    encode: Stage,
    gate: Option<Stage>,
    decode0: Stage,
    decode_env: Envelope<f64>,
    dt: f64,
}

impl Pipeline {
    fn new(gate: Option<&CavityGate>, s: &PipelineSettings) -> Result<Self> {
        use std::f64::consts::FRAC_PI_2;
        let env = swap_envelope(s.encode_coupling, s.ramp)?;
        Ok(Self {
            encode: stage(swap_drive(&env, FRAC_PI_2)?, s.dt)?,
            gate: gate.map(|g| stage(gate_drive(&g.schedule)?, s.dt)).transpose()?,
            decode0: stage(swap_drive(&env, -FRAC_PI_2)?, s.dt)?,
            decode_env: env,
            dt: s.dt,
        })
    }

    fn duration(&self) -> f64 {
        self.encode.grid.t1 + self.gate.as_ref().map_or(0.0, |g| g.grid.t1) + self.decode0.grid.t1
    }

    /// Noiseless pipeline unitary, decode rotated by `delta`.
    fn unitaries(&self) -> Result<(ComplexMatrix<f64>, ComplexMatrix<f64>)> {
        let e = propagate_unitary(&self.encode.drive, &self.encode.grid)?;
        let g = match &self.gate {
            Some(st) => propagate_unitary(&st.drive, &st.grid)?,
            None => identity(PIPELINE_DIM),
        };
        let d0 = propagate_unitary(&self.decode0.drive, &self.decode0.grid)?;
        Ok((&g * e, d0))
    }

    fn noiseless_outputs(before: &ComplexMatrix<f64>, d0: &ComplexMatrix<f64>, delta: f64) -> Vec<ComplexMatrix<f64>> {
        // rotating the drive phase by δ conjugates the decode by the photon frame
        let v = photon_frame(delta);
        let d = &v * d0 * v.adjoint();
        let u = d * before;
        pipeline_inputs()
            .iter()
            .map(|a| {
                let rho = embed_q2(a);
                q2_gf(&(&u * rho.matrix() * u.adjoint()))
            })
            .collect()
    }

    fn noisy_outputs(&self, jumps: &[ComplexMatrix<f64>], delta: f64) -> Result<Vec<ComplexMatrix<f64>>> {
        let decode = stage(swap_drive(&self.decode_env, -std::f64::consts::FRAC_PI_2 + delta)?, self.dt)?;
        pipeline_inputs()
            .par_iter()
            .map(|a| {
                let mut rho = evolve_density(&self.encode.drive, jumps, &embed_q2(a), &self.encode.grid)?;
                if let Some(g) = &self.gate {
                    rho = evolve_density(&g.drive, jumps, &rho, &g.grid)?;
                }
                rho = evolve_density(&decode.drive, jumps, &rho, &decode.grid)?;
                Ok(q2_gf(rho.matrix()))
            })
            .collect()
    }
}

/// Decode frame rotation maximizing the noiseless identity-pipeline fidelity.
pub fn calibrate_decode_phase(settings: &PipelineSettings) -> Result<f64> {
    let p = Pipeline::new(None, settings)?;
    let (before, d0) = p.unitaries()?;
    let id = identity::<f64>(2);
    let score = |delta: f64| -> Result<f64> {
        let outs = Pipeline::noiseless_outputs(&before, &d0, delta);
        let (chi, th) = chi_from_outputs(&outs, &id)?;
        fidelity_att(&chi, &th)
    };
    let n = 72;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..n {
        let x = -std::f64::consts::PI + TWO_PI * k as f64 / n as f64;
        let f = score(x)?;
        if f > best.1 {
            best = (x, f);
        }
    }
    // golden-section refinement inside the neighbouring grid cells
    let h = TWO_PI / n as f64;
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = score(x1)?;
    let mut f2 = score(x2)?;
    while b - a > 1e-9 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = score(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = score(x2)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x + std::f64::consts::PI).rem_euclid(TWO_PI) - std::f64::consts::PI)
}

/// Encode `Q2` into the cavity, apply `gate` (or nothing), decode and reconstruct the `4×4` χ.
pub fn cavity_pipeline(gate: Option<&CavityGate>, settings: &PipelineSettings) -> Result<PipelineResult> {
    if !(settings.dt > 0.0) {
        return Err(Error::InvalidInput("pipeline step must be positive".into()));
    }
    let delta = match settings.decode_phase {
        Some(d) => d,
        None => calibrate_decode_phase(settings)?,
    };
    let p = Pipeline::new(gate, settings)?;
    let outputs = match &settings.noise {
        None => {
            let (before, d0) = p.unitaries()?;
            Pipeline::noiseless_outputs(&before, &d0, delta)
        }
        Some(n) => p.noisy_outputs(&pipeline_jumps(n)?, delta)?,
    };
    let target = gate.map_or_else(|| identity::<f64>(2), |g| g.target.clone());
    let (chi, th) = chi_from_outputs(&outputs, &target)?;
    Ok(PipelineResult {
        f_att: fidelity_att(&chi, &th)?,
        f_unatt: fidelity_unatt(&chi, &th)?,
        trace: chi.trace(),
        chi,
        target: th,
        decode_phase: delta,
        duration: p.duration(),
    })
}

/// Attenuated-fidelity loss of the gate pipeline relative to the no-gate pipeline.
pub fn cavity_gate_loss(
    gate: &CavityGate,
    settings: &PipelineSettings,
) -> Result<(f64, PipelineResult, PipelineResult)> {
    let mut s = settings.clone();
    if s.decode_phase.is_none() {
        s.decode_phase = Some(calibrate_decode_phase(settings)?);
    }
    let reference = cavity_pipeline(None, &s)?;
    let gated = cavity_pipeline(Some(gate), &s)?;
    Ok((reference.f_att - gated.f_att, reference, gated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::Superoperator;
    use crate::holonomic::named_gate;
    use crate::model::paper_device;
    use crate::operators::{embed_gf, equal_up_to_phase};
    use crate::tomography::{run_qpt, QptSettings};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn small(eps: Vec<f64>, det_mhz: Vec<f64>) -> SweepSettings {
        SweepSettings {
            epsilons: eps,
            detunings: det_mhz.into_iter().map(|f| TWO_PI * f * 1e6).collect(),
            ..SweepSettings::default()
        }
    }

    #[test]
    fn default_grid_contains_exact_zeros() {
        let s = SweepSettings::default();
        assert_eq!(s.epsilons.len(), 21);
        assert_eq!(s.epsilons[10], 0.0);
        assert_eq!(s.detunings[10], 0.0);
        assert!((s.detunings[20] - TWO_PI * 1e6).abs() < 1e-6);
    }

    #[test]
    fn error_free_cell_is_exact_for_every_family() {
        let s = small(vec![0.0], vec![0.0]);
        for g in [
            SweepGate::Holonomic(named_gate("H").unwrap()),
            SweepGate::Holonomic(named_gate("T").unwrap()),
            SweepGate::DynamicHadamard,
            SweepGate::DynamicT,
        ] {
            let grid = crosstalk_sweep(&g, &s).unwrap();
            assert!(grid.f_att[0] > 1.0 - 1e-6, "{}: {}", g.label(), grid.f_att[0]);
            assert!(grid.f_unatt[0] > 1.0 - 1e-6);
        }
    }

    #[test]
    fn holonomic_targets_match_the_named_dynamic_targets() {
        let h = target_u1(&named_gate::<f64>("H").unwrap());
        assert!(equal_up_to_phase(&h, &SweepGate::DynamicHadamard.target(), 1e-12));
        let t = target_u1(&named_gate::<f64>("T").unwrap());
        assert!(equal_up_to_phase(&t, &SweepGate::DynamicT.target(), 1e-12));
    }

    #[test]
    fn dynamic_t_reproduces_t_exactly() {
        let s = SweepSettings::default();
        let u =
            SweepGate::DynamicT.schedule(&s.envelope().unwrap(), None).unwrap().unitary(&ControlError::none()).unwrap();
        assert!(equal_up_to_phase(&gf_block(&u), &SweepGate::DynamicT.target(), 1e-6));
    }

    #[test]
    fn holonomic_cut_is_symmetric_in_epsilon() {
        let eps = vec![-0.1, -0.05, 0.05, 0.1];
        let g = crosstalk_sweep(&SweepGate::Holonomic(named_gate("H").unwrap()), &small(eps, vec![0.0])).unwrap();
        assert!((g.f_att[0] - g.f_att[3]).abs() < 1e-3);
        assert!((g.f_att[1] - g.f_att[2]).abs() < 1e-3);
    }

    #[test]
    fn cells_are_bounded_and_rerun_is_bit_identical() {
        let s = small(vec![-0.1, 0.0, 0.07], vec![-1.0, 0.3, 1.0]);
        let a = crosstalk_sweep(&SweepGate::DynamicHadamard, &s).unwrap();
        let b = crosstalk_sweep(&SweepGate::DynamicHadamard, &s).unwrap();
        assert_eq!(a.to_csv(false), b.to_csv(false));
        for v in a.f_att.iter().chain(&a.f_unatt) {
            assert!(*v >= 0.0 && *v <= 1.0 + 1e-9);
        }
        let csv = a.to_csv(true);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("epsilon\\delta_MHz,-1e0,"));
    }

    #[test]
    fn sweep_metric_matches_full_tomography() {
        // oracle: the reduced-χ overlaps of the full qutrit QPT pipeline
        let gate = SweepGate::Holonomic(named_gate("X_pi_2").unwrap());
        let s = SweepSettings::default();
        let err = ControlError::new(0.08, TWO_PI * 0.6e6).unwrap();
        let u = gate.schedule(&s.envelope().unwrap(), None).unwrap().unitary_with_steps(&err, s.steps).unwrap();
        let (att, unatt) = unitary_fidelities(&gate.target(), &u);
        let q = run_qpt(&Superoperator::from_unitary(&u), &gate.target(), &QptSettings::default()).unwrap();
        assert!((att - q.f_att).abs() < 1e-8, "{att} {}", q.f_att);
        assert!((unatt - q.f_unatt).abs() < 1e-8);
    }

    #[test]
    fn settings_hash_tracks_content() {
        let s = SweepSettings::default();
        let g = SweepGate::DynamicT;
        assert_eq!(s.hash(&g), s.hash(&g));
        assert_eq!(s.hash(&g).len(), 64);
        let mut t = s.clone();
        t.steps += 1;
        assert_ne!(s.hash(&g), t.hash(&g));
        assert_ne!(s.hash(&g), s.hash(&SweepGate::DynamicHadamard));
        assert!(small(vec![], vec![0.0]).validate().is_err());
        assert!(small(vec![f64::NAN], vec![0.0]).validate().is_err());
    }

    #[test]
    fn swap_pulse_duration() {
        let dev = paper_device::<f64>();
        let env = swap_envelope(dev.encode_coupling, dev.ramp).unwrap();
        // π/2 area at 0.845 MHz: 296 ns flat-equivalent plus one ramp
        assert!((env.duration() * 1e9 - 305.9).abs() < 0.1, "{}", env.duration() * 1e9);
        assert!((env.area() - FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn encode_moves_q2_f_into_one_photon() {
        let dev = paper_device::<f64>();
        let env = swap_envelope(dev.encode_coupling, dev.ramp).unwrap();
        let st = stage(swap_drive(&env, FRAC_PI_2).unwrap(), 1e-9).unwrap();
        let u = propagate_unitary(&st.drive, &st.grid).unwrap();
        let out = u[(pipeline_index(1, 0, 0), pipeline_index(0, 0, 2))];
        assert!((out - C::new(1.0, 0.0)).norm() < 1e-6, "{out}");
        assert!((u[(0, 0)] - C::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn jumps_embed_every_channel() {
        let dev = paper_device::<f64>();
        let n = PipelineNoise { q1: dev.noise_q1, q2: dev.noise_q2, storage: dev.storage };
        let j = pipeline_jumps(&n).unwrap();
        let per_qutrit = collapse_operators(&dev.noise_q1).unwrap().len();
        assert_eq!(j.len(), 2 * per_qutrit + 2);
        assert!(j.iter().all(|m| m.shape() == (PIPELINE_DIM, PIPELINE_DIM)));
        // cavity decay takes |1,g,g⟩ to |0,g,g⟩
        let a = &j[2 * per_qutrit];
        assert!((a[(0, pipeline_index(1, 0, 0))].re - (1.0 / 135e-6f64).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn noiseless_identity_round_trip() {
        let s = PipelineSettings::paper_device(false);
        let r = cavity_pipeline(None, &s).unwrap();
        assert!(r.f_att > 1.0 - 1e-4, "{}", r.f_att);
        assert!(r.decode_phase.abs() < 1e-4);
        assert!((r.trace - 1.0).abs() < 1e-4);
    }

    #[test]
    fn noiseless_x_gate_concentrates_on_xx() {
        let dev = paper_device::<f64>();
        let g = CavityGate::from_model(&dev.cavity_x, dev.ramp).unwrap();
        let r = cavity_pipeline(Some(&g), &PipelineSettings::paper_device(false)).unwrap();
        assert!((r.chi.entries[(1, 1)].re - 1.0).abs() < 1e-4, "{}", r.chi.entries);
        assert!(r.f_unatt > 1.0 - 1e-4);
        let y = CavityModel::new(dev.cavity_x.g1, dev.cavity_x.g2, FRAC_PI_2).unwrap();
        let gy = CavityGate::from_model(&y, dev.ramp).unwrap();
        let ry = cavity_pipeline(Some(&gy), &PipelineSettings::paper_device(false)).unwrap();
        assert!((ry.chi.entries[(2, 2)].re - 1.0).abs() < 1e-4, "{}", ry.chi.entries);
    }

    #[test]
    fn pipeline_target_is_u2_embedding() {
        let g = CavityGate::u2(FRAC_PI_2, 0.0, TWO_PI * 0.3e6, 10e-9).unwrap();
        let emb = embed_gf(&g.target).unwrap();
        assert_eq!(emb.nrows(), 3);
        assert!(CavityGate::u2(PI + 0.1, 0.0, 1e6, 1e-9).is_err());
    }

    #[test]
    fn decoherence_costs_fidelity() {
        let dev = paper_device::<f64>();
        let g = CavityGate::from_model(&dev.cavity_x, dev.ramp).unwrap();
        let (loss, reference, gated) = cavity_gate_loss(&g, &PipelineSettings::paper_device(true)).unwrap();
        assert!(reference.f_att < 1.0 && reference.f_att > 0.9);
        assert!(gated.f_att < reference.f_att);
        assert!(loss > 0.0 && loss < 0.2, "{loss}");
        assert!((reference.duration * 1e9 - 611.8).abs() < 0.5);
    }
}
