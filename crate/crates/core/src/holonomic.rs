//! Gate synthesis for the single-loop protocol, ideal targets, dynamic
//! decompositions and the Clifford table.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::evolution::{content_key, propagate_unitary, SegmentDrive, TimeGrid, DEFAULT_STEPS};
use crate::model::ControlError;
use crate::operators::{equal_up_to_phase, ComplexMatrix};
use crate::pulses::{DragSetting, Envelope, PulseSegment, Shape, Transition};
use crate::scalar::{cis, is_nan, lit, to_f64, Real};

/// Rotation angle `γ` about the axis set by `θ ∈ [0, π]` and `φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolonomicParams<T: Real> {
    pub theta: T,
    pub gamma: T,
    pub phi: T,
}

impl<T: Real> HolonomicParams<T> {
    pub fn new(theta: T, gamma: T, phi: T) -> Result<Self> {
        let slack = lit::<T>(1e-12);
        if theta < -slack || theta > T::pi() + slack || is_nan(theta) {
            return Err(Error::InvalidInput(format!("theta {} outside [0, pi]", to_f64(theta))));
        }
        Ok(Self { theta, gamma, phi })
    }

    fn from_f64(theta: f64, gamma: f64, phi: f64) -> Self {
        Self { theta: lit(theta), gamma: lit(gamma), phi: lit(phi) }
    }
}

/// Two-level target
/// `[[cos γ/2 − i sin γ/2 cos θ, −i sin γ/2 sin θ e^{iφ}], [−i sin γ/2 sin θ e^{−iφ}, cos γ/2 + i sin γ/2 cos θ]]`.
///
/// In the standard Pauli convention this is a rotation by `γ` about `(sinθ cosφ, −sinθ sinφ, cosθ)`.
pub fn target_u1<T: Real>(p: &HolonomicParams<T>) -> ComplexMatrix<T> {
    let h = p.gamma * lit(0.5);
    let (s, c) = (h.sin(), h.cos());
    let (st, ct) = (p.theta.sin(), p.theta.cos());
    let mi = Complex::new(T::zero(), -T::one());
    DMatrix::from_row_slice(
        2,
        2,
        &[Complex::new(c, -s * ct), mi * cis(p.phi) * (s * st), mi * cis(-p.phi) * (s * st), Complex::new(c, s * ct)],
    )
}

/// `[[cos θ, sin θ e^{iφ}], [sin θ e^{−iφ}, −cos θ]]`, equal to `i·target_u1(θ, π, φ)`.
pub fn target_u2<T: Real>(theta: T, phi: T) -> ComplexMatrix<T> {
    let (st, ct) = (theta.sin(), theta.cos());
    DMatrix::from_row_slice(
        2,
        2,
        &[Complex::new(ct, T::zero()), cis(phi) * st, cis(-phi) * st, Complex::new(-ct, T::zero())],
    )
}

/// Which Hilbert space a schedule drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Platform {
    /// `{|g⟩, |e⟩, |f⟩}` of a transmon.
    Qutrit,
    /// `{|0g⟩, |1g⟩, |0f⟩}` of the cavity-qubit frame.
    Cavity,
}

/// How the two halves of a qubit gate share the envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfLayout {
    /// One envelope spanning the gate, split at its midpoint.
    Shared,
    /// Each half carries its own copy of the envelope.
    Separate,
}

/// Ordered pulse parts of one gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSchedule<T: Real> {
    pub platform: Platform,
    /// Consecutive parts; holonomic gates have two halves.
    pub parts: Vec<Vec<PulseSegment<T>>>,
    pub duration: T,
}

impl<T: Real> GateSchedule<T> {
    pub fn segments(&self) -> impl Iterator<Item = &PulseSegment<T>> {
        self.parts.iter().flatten()
    }

    pub fn drive(&self, err: &ControlError<T>) -> Result<SegmentDrive<T>> {
        let segs: Vec<_> = self.segments().copied().collect();
        match self.platform {
            Platform::Qutrit => SegmentDrive::qutrit(&segs, err),
            Platform::Cavity => SegmentDrive::cavity(&segs, err),
        }
    }

    /// Grid over `[0, duration]` aligned with every segment boundary.
    pub fn grid(&self, steps: usize) -> Result<TimeGrid<T>> {
        let d = self.drive(&ControlError::none())?;
        TimeGrid::for_hamiltonian(&d, T::zero(), self.duration, steps)
    }

    /// Noiseless propagator with the default step count.
    pub fn unitary(&self, err: &ControlError<T>) -> Result<ComplexMatrix<T>> {
        self.unitary_with_steps(err, DEFAULT_STEPS)
    }

    pub fn unitary_with_steps(&self, err: &ControlError<T>, steps: usize) -> Result<ComplexMatrix<T>> {
        propagate_unitary(&self.drive(err)?, &self.grid(steps)?)
    }

    /// Attach a DRAG correction to every segment.
    pub fn with_drag(mut self, drag: DragSetting<T>) -> Self {
        for part in &mut self.parts {
            for s in part.iter_mut() {
                *s = s.with_drag(drag);
            }
        }
        self
    }

    /// Area of `√(Σ Ω_k²)` per part, assuming all segments in a part share one shape.
    pub fn part_areas(&self) -> Vec<T> {
        self.parts.iter().map(|p| p.iter().map(|s| s.area() * s.area()).fold(T::zero(), |a, b| a + b).sqrt()).collect()
    }

    /// Content hash of the schedule.
    pub fn content_key(&self) -> [u8; 32] {
        let mut bytes = Vec::new();
        bytes.push(self.platform as u8);
        bytes.extend(to_f64(self.duration).to_le_bytes());
        for (i, part) in self.parts.iter().enumerate() {
            bytes.extend((i as u64).to_le_bytes());
            for s in part {
                bytes.push(s.transition as u8);
                let shape = match s.envelope.shape {
                    Shape::TruncatedGaussian { sigma, total } => [0.0, to_f64(sigma), to_f64(total)],
                    Shape::SquareWithRamps { flat, ramp } => [1.0, to_f64(flat), to_f64(ramp)],
                    Shape::Constant { duration } => [2.0, to_f64(duration), 0.0],
                };
                let drag = s.drag.map_or([0.0; 2], |d| [to_f64(d.coefficient), to_f64(d.anharmonicity)]);
                for x in shape.iter().chain(&drag).chain(&[
                    to_f64(s.envelope.peak),
                    to_f64(s.phase),
                    to_f64(s.start),
                    to_f64(s.window.0),
                    to_f64(s.window.1),
                ]) {
                    bytes.extend(x.to_le_bytes());
                }
            }
        }
        content_key(&[b"gate-schedule", &bytes])
    }
}

/// Phases `(φ₀, φ₁)` of the first and second half.
pub fn half_phases<T: Real>(p: &HolonomicParams<T>) -> [(T, T); 2] {
    [(p.phi, T::pi()), (p.phi + p.gamma - T::pi(), p.gamma)]
}

fn tone_amplitudes<T: Real>(theta: T) -> (T, T) {
    if theta == T::zero() {
        (T::zero(), T::one())
    } else if theta == T::pi() {
        (T::one(), T::zero())
    } else {
        let h = theta * lit(0.5);
        (h.sin(), h.cos())
    }
}

/// Two-half schedule with the envelope shared across the gate.
pub fn synthesize_qubit_gate<T: Real>(p: &HolonomicParams<T>, base: &Envelope<T>) -> Result<GateSchedule<T>> {
    synthesize_qubit_gate_with(p, base, HalfLayout::Shared)
}

/// Two-half schedule; every half has `∫Ω dt = π/2` and `Ω_ge/Ω_ef = tan(θ/2)`.
pub fn synthesize_qubit_gate_with<T: Real>(
    p: &HolonomicParams<T>,
    base: &Envelope<T>,
    layout: HalfLayout,
) -> Result<GateSchedule<T>> {
    let p = HolonomicParams::new(p.theta, p.gamma, p.phi)?;
    let d = base.duration();
    let half_area = T::frac_pi_2();
    let unit = base.with_peak(T::one());
    let windows = match layout {
        HalfLayout::Shared => {
            let mid = d * lit(0.5);
            [(T::zero(), T::zero(), mid), (T::zero(), mid, d)]
        }
        HalfLayout::Separate => [(T::zero(), T::zero(), d), (d, T::zero(), d)],
    };
    let (a_ge, a_ef) = tone_amplitudes(p.theta);
    let phases = half_phases(&p);
    let mut parts = Vec::with_capacity(2);
    for (k, &(start, w0, w1)) in windows.iter().enumerate() {
        let area = unit.integral(w0, w1);
        if !(area > T::zero()) {
            return Err(Error::ZeroArea);
        }
        let peak = half_area / area;
        let (ph0, ph1) = phases[k];
        let mut part = Vec::new();
        if a_ge > T::zero() {
            part.push(PulseSegment::new(unit.with_peak(peak * a_ge), Transition::Ge, ph0, start).with_window(w0, w1)?);
        }
        if a_ef > T::zero() {
            part.push(PulseSegment::new(unit.with_peak(peak * a_ef), Transition::Ef, ph1, start).with_window(w0, w1)?);
        }
        parts.push(part);
    }
    let duration = match layout {
        HalfLayout::Shared => d,
        HalfLayout::Separate => d * lit(2.0),
    };
    Ok(GateSchedule { platform: Platform::Qutrit, parts, duration })
}

/// Square-pulse schedule on the cavity frame with peak coupling `coupling`.
///
/// `γ = π` is a single pulse of area π; other angles use two halves of area π/2 each.
pub fn synthesize_cavity_gate<T: Real>(
    p: &HolonomicParams<T>,
    coupling: T,
    base: &Envelope<T>,
) -> Result<GateSchedule<T>> {
    let p = HolonomicParams::new(p.theta, p.gamma, p.phi)?;
    if !(coupling > T::zero()) {
        return Err(Error::ZeroCoupling);
    }
    let ramp = match base.shape {
        Shape::SquareWithRamps { ramp, .. } => ramp,
        _ => return Err(Error::InvalidInput("cavity gates use square pulses with ramps".into())),
    };
    let single = (p.gamma - T::pi()).abs() < lit(1e-12);
    let area = if single { T::pi() } else { T::frac_pi_2() };
    let flat = area / coupling - ramp;
    if flat < T::zero() {
        return Err(Error::InvalidInput("coupling too strong for the ramp length".into()));
    }
    let env = Envelope::square(flat, ramp, T::one())?.normalize_to_area(area)?;
    let (a1, a2) = tone_amplitudes(p.theta);
    let phases = half_phases(&p);
    let n = if single { 1 } else { 2 };
    let d = env.duration();
    let mut parts = Vec::new();
    for (k, &(ph0, ph1)) in phases.iter().enumerate().take(n) {
        let start = d * lit(k as f64);
        let mut part = Vec::new();
        if a1 > T::zero() {
            part.push(PulseSegment::new(env.with_peak(env.peak * a1), Transition::TwoPhoton, ph0, start));
        }
        if a2 > T::zero() {
            part.push(PulseSegment::new(env.with_peak(env.peak * a2), Transition::Raman, ph1, start));
        }
        parts.push(part);
    }
    Ok(GateSchedule { platform: Platform::Cavity, parts, duration: d * lit(n as f64) })
}

/// Single-tone rotation by `angle` about the axis at `axis` radians from x, on one transition.
fn rotation_part<T: Real>(
    transition: Transition,
    angle: T,
    axis: T,
    base: &Envelope<T>,
    start: T,
    drag: Option<DragSetting<T>>,
) -> Result<Vec<PulseSegment<T>>> {
    let env = base.normalize_to_area(angle * lit(0.5))?;
    let phase = match transition {
        Transition::Ge => -axis,
        _ => axis,
    };
    let mut seg = PulseSegment::new(env, transition, phase, start);
    if let Some(d) = drag {
        seg = seg.with_drag(d);
    }
    Ok(vec![seg])
}

/// Sequence of `(transition, angle, axis)` rotations in time order.
pub fn rotation_sequence<T: Real>(
    steps: &[(Transition, f64, f64)],
    base: &Envelope<T>,
    drag: Option<DragSetting<T>>,
) -> Result<GateSchedule<T>> {
    let d = base.duration();
    let mut parts = Vec::new();
    for (k, &(tr, angle, axis)) in steps.iter().enumerate() {
        parts.push(rotation_part(tr, lit(angle), lit(axis), base, d * lit(k as f64), drag)?);
    }
    Ok(GateSchedule { platform: Platform::Qutrit, parts, duration: d * lit(steps.len() as f64) })
}

/// `X^ge_π X^ef_{π/2} X^ge_π`, read right to left.
pub fn dynamic_hadamard_schedule<T: Real>(base: &Envelope<T>, drag: Option<DragSetting<T>>) -> Result<GateSchedule<T>> {
    use std::f64::consts::{FRAC_PI_2, PI};
    rotation_sequence(
        &[(Transition::Ge, PI, 0.0), (Transition::Ef, FRAC_PI_2, 0.0), (Transition::Ge, PI, 0.0)],
        base,
        drag,
    )
}

/// `X^ge_π Y^ef_π R^ef_π(−π/8) X^ge_π`, read right to left.
pub fn dynamic_t_schedule<T: Real>(base: &Envelope<T>, drag: Option<DragSetting<T>>) -> Result<GateSchedule<T>> {
    use std::f64::consts::{FRAC_PI_2, PI};
    rotation_sequence(
        &[
            (Transition::Ge, PI, 0.0),
            (Transition::Ef, PI, -PI / 8.0),
            (Transition::Ef, PI, FRAC_PI_2),
            (Transition::Ge, PI, 0.0),
        ],
        base,
        drag,
    )
}

/// Gate names accepted by [`named_gate`].
pub const GATE_NAMES: [&str; 8] = ["X_pi", "X_pi_2", "H", "Z_pi", "Y_pi", "H1", "H2", "T"];

/// Parameters of a named gate.
pub fn named_gate<T: Real>(name: &str) -> Option<HolonomicParams<T>> {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
    let (t, g, p) = match name {
        "X_pi" => (FRAC_PI_2, PI, 0.0),
        "X_pi_2" => (FRAC_PI_2, FRAC_PI_2, 0.0),
        "H" | "H1" => (FRAC_PI_4, PI, 0.0),
        "Z_pi" => (0.0, PI, 0.0),
        "Y_pi" => (FRAC_PI_2, PI, FRAC_PI_2),
        "H2" => (FRAC_PI_4, PI, FRAC_PI_2),
        "T" => (0.0, FRAC_PI_4, 0.0),
        _ => return None,
    };
    Some(HolonomicParams::from_f64(t, g, p))
}

/// Parameters realizing a rotation by `angle` about the unit axis `m` (standard Pauli convention).
pub fn params_for_rotation<T: Real>(m: [f64; 3], angle: f64) -> HolonomicParams<T> {
    let (m, angle) = if angle < 0.0 { ([-m[0], -m[1], -m[2]], -angle) } else { (m, angle) };
    if angle == 0.0 {
        return HolonomicParams::from_f64(0.0, 0.0, 0.0);
    }
    let norm = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    let z = (m[2] / norm).clamp(-1.0, 1.0);
    let theta = z.acos();
    let phi = if theta.sin().abs() < 1e-15 { 0.0 } else { (-m[1]).atan2(m[0]) };
    HolonomicParams::from_f64(theta, angle, phi)
}

/// The 24 single-qubit Cliffords as axis-angle parameters.
pub fn clifford_table<T: Real>() -> Vec<HolonomicParams<T>> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut out = vec![HolonomicParams::from_f64(0.0, 0.0, 0.0)];
    let faces = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for a in faces {
        out.push(params_for_rotation(a, PI));
    }
    for a in faces {
        out.push(params_for_rotation(a, FRAC_PI_2));
        out.push(params_for_rotation(a, -FRAC_PI_2));
    }
    let s = 1.0 / 3f64.sqrt();
    for d in [[s, s, s], [-s, s, s], [s, -s, s], [s, s, -s]] {
        out.push(params_for_rotation(d, 2.0 * PI / 3.0));
        out.push(params_for_rotation(d, -2.0 * PI / 3.0));
    }
    let r = 1.0 / 2f64.sqrt();
    for e in [[r, r, 0.0], [r, -r, 0.0], [r, 0.0, r], [r, 0.0, -r], [0.0, r, r], [0.0, r, -r]] {
        out.push(params_for_rotation(e, PI));
    }
    out
}

/// Index of the table element equal to `u` up to global phase.
pub fn find_clifford<T: Real>(table: &[ComplexMatrix<T>], u: &ComplexMatrix<T>) -> Option<usize> {
    table.iter().position(|c| equal_up_to_phase(c, u, lit(1e-6)))
}
