//! Drive Hamiltonians, device parameters and the decoherence model.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::evolution::Hamiltonian;
use crate::evolution::SegmentDrive;
use crate::operators::{ket_bra, projector, ComplexMatrix, QutritKet, E, F, G};
use crate::pulses::{Envelope, PulseSegment};
use crate::scalar::{cis, is_nan, lit, to_f64, Real};

/// Transmon transition frequencies (rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct QutritDevice<T: Real> {
    pub label: String,
    pub omega_ge: T,
    pub omega_ef: T,
}

impl<T: Real> QutritDevice<T> {
    pub fn new(label: impl Into<String>, omega_ge: T, omega_ef: T) -> Result<Self> {
        if omega_ge == omega_ef {
            return Err(Error::InvalidInput("device needs finite anharmonicity".into()));
        }
        Ok(Self { label: label.into(), omega_ge, omega_ef })
    }

    /// `ω_ef − ω_ge`.
    pub fn anharmonicity(&self) -> T {
        self.omega_ef - self.omega_ge
    }
}

/// Effective couplings of the two-photon and Raman drives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityModel<T: Real> {
    pub g1: T,
    pub g2: T,
    pub phase: T,
}

impl<T: Real> CavityModel<T> {
    pub fn new(g1: T, g2: T, phase: T) -> Result<Self> {
        if g1 < T::zero() || g2 < T::zero() || !((g1 * g1 + g2 * g2) > T::zero()) {
            return Err(Error::ZeroCoupling);
        }
        Ok(Self { g1, g2, phase })
    }

    /// `g̃ = √(g̃₁² + g̃₂²)`.
    pub fn coupling(&self) -> T {
        (self.g1 * self.g1 + self.g2 * self.g2).sqrt()
    }

    /// Mixing angle with `tan(θ/2) = g̃₁/g̃₂`.
    pub fn theta(&self) -> T {
        self.g1.atan2(self.g2) * lit(2.0)
    }
}

/// Markovian decoherence rates (1/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel<T: Real> {
    pub gamma_eg: T,
    pub gamma_fe: T,
    pub gamma_fg: T,
    pub gamma_phi_ge: T,
    pub gamma_phi_ef: T,
}

impl<T: Real> NoiseModel<T> {
    pub fn none() -> Self {
        Self {
            gamma_eg: T::zero(),
            gamma_fe: T::zero(),
            gamma_fg: T::zero(),
            gamma_phi_ge: T::zero(),
            gamma_phi_ef: T::zero(),
        }
    }

    /// Rates from relaxation times and Ramsey times of both transitions.
    ///
    /// The ge coherence decays at `Γ_eg/2 + γ_φ,ge`, the ef coherence at
    /// `(Γ_eg + Γ_fe + Γ_fg)/2 + γ_φ,ef`.
    pub fn from_coherence_times(t1_ge: T, t1_ef: T, t2s_ge: T, t2s_ef: T, gamma_fg: T) -> Result<Self> {
        for (name, v) in [("T1_ge", t1_ge), ("T1_ef", t1_ef), ("T2*_ge", t2s_ge), ("T2*_ef", t2s_ef)] {
            if !(v > T::zero()) {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        let gamma_eg = T::one() / t1_ge;
        let gamma_fe = T::one() / t1_ef;
        let half = lit::<T>(0.5);
        let n = Self {
            gamma_eg,
            gamma_fe,
            gamma_fg,
            gamma_phi_ge: T::one() / t2s_ge - gamma_eg * half,
            gamma_phi_ef: T::one() / t2s_ef - (gamma_eg + gamma_fe + gamma_fg) * half,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_eg", self.gamma_eg),
            ("gamma_fe", self.gamma_fe),
            ("gamma_fg", self.gamma_fg),
            ("gamma_phi_ge", self.gamma_phi_ge),
            ("gamma_phi_ef", self.gamma_phi_ef),
        ] {
            if v < T::zero() || is_nan(v) {
                return Err(Error::NegativeRate(format!("{name} = {}", to_f64(v))));
            }
        }
        Ok(())
    }

    /// Per-level dephasing rates `(γ_e, γ_f)` of the operators `√(2γ)|e⟩⟨e|`, `√(2γ)|f⟩⟨f|`.
    pub fn level_dephasing(&self) -> Result<(T, T)> {
        self.validate()?;
        let ge = self.gamma_phi_ge;
        let gf = self.gamma_phi_ef - self.gamma_phi_ge;
        if gf < T::zero() {
            return Err(Error::NegativeRate(format!(
                "ef pure dephasing {} is below ge pure dephasing {}",
                to_f64(self.gamma_phi_ef),
                to_f64(self.gamma_phi_ge)
            )));
        }
        Ok((ge, gf))
    }

    /// Population rate matrix with `dp/dt = Γ p` over `(P_g, P_e, P_f)`.
    pub fn rate_matrix(&self) -> DMatrix<T> {
        let (eg, fe, fg) = (self.gamma_eg, self.gamma_fe, self.gamma_fg);
        let z = T::zero();
        DMatrix::from_row_slice(3, 3, &[z, eg, fg, z, -eg, fe, z, z, -(fe + fg)])
    }

    pub fn is_noiseless(&self) -> bool {
        self.gamma_eg == T::zero()
            && self.gamma_fe == T::zero()
            && self.gamma_fg == T::zero()
            && self.gamma_phi_ge == T::zero()
            && self.gamma_phi_ef == T::zero()
    }
}

/// Relative Rabi error `ε` and frame detuning `Δ` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlError<T: Real> {
    pub epsilon: T,
    pub detuning: T,
}

impl<T: Real> ControlError<T> {
    pub fn new(epsilon: T, detuning: T) -> Result<Self> {
        if !(epsilon > -T::one()) {
            return Err(Error::InvalidInput("Rabi error must exceed -1".into()));
        }
        Ok(Self { epsilon, detuning })
    }

    pub fn none() -> Self {
        Self { epsilon: T::zero(), detuning: T::zero() }
    }
}

/// Labelled jump operator; the Lindblad term uses `√rate · operator`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseOperator<T: Real> {
    pub label: &'static str,
    pub rate: T,
    pub operator: ComplexMatrix<T>,
}

impl<T: Real> CollapseOperator<T> {
    pub fn weighted(&self) -> ComplexMatrix<T> {
        self.operator.map(|z| z * self.rate.sqrt())
    }
}

/// `Δ(|e⟩⟨e| + 2|f⟩⟨f|)`.
pub fn detuning_hamiltonian<T: Real>(delta: T) -> ComplexMatrix<T> {
    (projector::<T>(3, E) + projector::<T>(3, F) * Complex::new(lit::<T>(2.0), T::zero()))
        * Complex::new(delta, T::zero())
}

/// `H₁(t)` of the two-tone qutrit drive at time `t`.
pub fn qutrit_drive_hamiltonian<T: Real>(
    segments: &[PulseSegment<T>],
    err: &ControlError<T>,
    t: T,
) -> Result<ComplexMatrix<T>> {
    Ok(SegmentDrive::qutrit(segments, err)?.at(t))
}

/// Bright and dark states `(|b⟩, |d⟩)`.
pub fn bright_dark<T: Real>(theta: T, phi: T) -> (QutritKet<T>, QutritKet<T>) {
    let h = theta * lit(0.5);
    let (s, c) = (h.sin(), h.cos());
    let z = Complex::new(T::zero(), T::zero());
    let re = |x: T| Complex::new(x, T::zero());
    let b = QutritKet::normalized([cis(phi) * s, z, re(-c)]).unwrap();
    let d = QutritKet::normalized([re(c), z, cis(-phi) * s]).unwrap();
    (b, d)
}

/// Cavity-frame basis indices `{|0g⟩, |1g⟩, |0f⟩}`.
pub const C0G: usize = 0;
pub const C1G: usize = 1;
pub const C0F: usize = 2;

/// `H₂(t) = s(t)[g̃₁|0g⟩⟨0f| + g̃₂e^{iφ}|1g⟩⟨0f|] + h.c.` with `s` the unit-peak shape.
pub fn cavity_effective_hamiltonian<T: Real>(m: &CavityModel<T>, t: T, env: &Envelope<T>) -> Result<ComplexMatrix<T>> {
    let s = env.with_peak(T::one()).sample(t)?;
    let a = ket_bra::<T>(3, C0G, C0F) * Complex::new(m.g1 * s, T::zero())
        + ket_bra::<T>(3, C1G, C0F) * (cis(m.phase) * (m.g2 * s));
    Ok(&a + a.adjoint())
}

/// Photon-number-selective drive on `{|0g⟩,|0e⟩,|0f⟩,|1g⟩,|1e⟩,|1f⟩}`.
pub fn two_qubit_hamiltonian<T: Real>(
    segments: &[PulseSegment<T>],
    err: &ControlError<T>,
    t: T,
) -> Result<ComplexMatrix<T>> {
    Ok(SegmentDrive::two_qubit(segments, err)?.at(t))
}

/// Relaxation and dephasing jump operators on the qutrit.
pub fn collapse_operators<T: Real>(n: &NoiseModel<T>) -> Result<Vec<CollapseOperator<T>>> {
    let (ge, gf) = n.level_dephasing()?;
    let two = lit::<T>(2.0);
    let all = [
        ("relax_eg", n.gamma_eg, ket_bra::<T>(3, G, E)),
        ("relax_fe", n.gamma_fe, ket_bra::<T>(3, E, F)),
        ("relax_fg", n.gamma_fg, ket_bra::<T>(3, G, F)),
        ("dephase_e", ge * two, projector::<T>(3, E)),
        ("dephase_f", gf * two, projector::<T>(3, F)),
    ];
    Ok(all
        .into_iter()
        .filter(|(_, r, _)| *r > T::zero())
        .map(|(label, rate, operator)| CollapseOperator { label, rate, operator })
        .collect())
}

/// Coherence table of one harmonic mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityCoherence<T: Real> {
    pub t1: T,
    pub t2_star: T,
}

impl<T: Real> CavityCoherence<T> {
    /// `(Γ₁₀, γ_φ)`; the dephasing operator is `√(2γ_φ)|1⟩⟨1|`.
    pub fn rates(&self) -> Result<(T, T)> {
        let g = T::one() / self.t1;
        let phi = T::one() / self.t2_star - g * lit(0.5);
        if phi < T::zero() {
            return Err(Error::NegativeRate("cavity pure dephasing".into()));
        }
        Ok((g, phi))
    }
}

/// Built-in parameter set of the two-transmon, storage-cavity device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceParameters<T: Real> {
    pub q1: QutritDevice<T>,
    pub q2: QutritDevice<T>,
    pub noise_q1: NoiseModel<T>,
    pub noise_q2: NoiseModel<T>,
    pub storage: CavityCoherence<T>,
    /// Gaussian width of the qubit gate envelope (s).
    pub gate_sigma: T,
    /// Total gate duration (s).
    pub gate_total: T,
    /// Couplings of the θ = π/2 cavity gates (rad/s).
    pub cavity_x: CavityModel<T>,
    /// Couplings of the θ ≈ π/4 cavity gates (rad/s).
    pub cavity_h: CavityModel<T>,
    /// Encode/decode Raman coupling on Q2 (rad/s).
    pub encode_coupling: T,
    /// Sine-squared ramp of square pulses (s).
    pub ramp: T,
    pub drag_coefficient: T,
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// The `paper-device` parameter set.
pub fn paper_device<T: Real>() -> DeviceParameters<T> {
    let ghz = |f: f64| lit::<T>(TWO_PI * f * 1e9);
    let mhz = |f: f64| lit::<T>(TWO_PI * f * 1e6);
    let us = |t: f64| lit::<T>(t * 1e-6);
    let ns = |t: f64| lit::<T>(t * 1e-9);
    DeviceParameters {
        q1: QutritDevice::new("Q1", ghz(5.036), ghz(4.782)).unwrap(),
        q2: QutritDevice::new("Q2", ghz(5.605), ghz(5.367)).unwrap(),
        noise_q1: NoiseModel::from_coherence_times(us(45.6), us(20.3), us(24.4), us(8.3), T::zero()).unwrap(),
        noise_q2: NoiseModel::from_coherence_times(us(42.2), us(24.9), us(44.0), us(13.6), T::zero()).unwrap(),
        storage: CavityCoherence { t1: us(135.0), t2_star: us(193.0) },
        gate_sigma: ns(30.0),
        gate_total: ns(120.0),
        cavity_x: CavityModel::new(mhz(0.25), mhz(0.25), T::zero()).unwrap(),
        cavity_h: CavityModel::new(mhz(0.25), mhz(0.60), T::zero()).unwrap(),
        encode_coupling: mhz(0.845),
        ramp: ns(10.0),
        drag_coefficient: T::one(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{hermiticity_error, max_abs, zeros};
    use crate::pulses::Transition;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn constant_segment(peak: f64, tr: Transition, phase: f64) -> PulseSegment<f64> {
        PulseSegment::new(Envelope::constant(1e-6, peak).unwrap(), tr, phase, 0.0)
    }

    #[test]
    fn drive_examples() {
        let none = ControlError::none();
        let zero = vec![constant_segment(0.0, Transition::Ge, 0.3), constant_segment(0.0, Transition::Ef, 1.0)];
        assert_eq!(qutrit_drive_hamiltonian(&zero, &none, 5e-7).unwrap(), zeros(3, 3));

        let om = 2.0e7;
        let single = vec![constant_segment(om, Transition::Ge, 0.0)];
        let h = qutrit_drive_hamiltonian(&single, &none, 5e-7).unwrap();
        let expect = (ket_bra::<f64>(3, G, E) + ket_bra::<f64>(3, E, G)) * c(om, 0.0);
        assert!(max_abs(&(h - expect)) < 1e-6);

        let s = om / 2f64.sqrt();
        let pair = vec![constant_segment(s, Transition::Ge, 0.0), constant_segment(s, Transition::Ef, PI)];
        let h = qutrit_drive_hamiltonian(&pair, &none, 5e-7).unwrap();
        let (b, _) = bright_dark(FRAC_PI_2, 0.0);
        let e = QutritKet::<f64>::e();
        let be = b.vector() * e.vector().adjoint();
        let direct = (&be + be.adjoint()) * c(om, 0.0);
        assert!(max_abs(&(h - direct)) < 1e-6);

        let bad = vec![constant_segment(1.0, Transition::Raman, 0.0)];
        assert_eq!(qutrit_drive_hamiltonian(&bad, &none, 0.0), Err(Error::BadTransition("raman")));
    }

    #[test]
    fn control_error_enters_multiplicatively() {
        let err = ControlError::new(0.1, 3.0e6).unwrap();
        let seg = vec![constant_segment(1.0e7, Transition::Ef, 0.0)];
        let h = qutrit_drive_hamiltonian(&seg, &err, 1e-7).unwrap();
        assert!((h[(F, E)].re - 1.1e7).abs() < 1e-6);
        assert!((h[(E, E)].re - 3.0e6).abs() < 1e-9);
        assert!((h[(F, F)].re - 6.0e6).abs() < 1e-9);
        assert!(ControlError::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn bright_dark_examples() {
        let (b, d) = bright_dark(0.0, 0.7);
        assert!((b.amplitudes()[2] - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((d.amplitudes()[0] - c(1.0, 0.0)).norm() < 1e-15);
        let (b, d) = bright_dark(PI, 0.0);
        assert!((b.amplitudes()[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((d.amplitudes()[2] - c(1.0, 0.0)).norm() < 1e-15);
        let (b, _) = bright_dark(FRAC_PI_2, FRAC_PI_2);
        let r = 0.5f64.sqrt();
        let a = b.amplitudes();
        assert!((a[0] - c(0.0, r)).norm() < 1e-15 && a[1].norm() == 0.0 && (a[2] - c(-r, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cavity_examples() {
        let env = Envelope::square(1.0e-6, 1.0e-8, 1.0).unwrap();
        let m = CavityModel::new(0.0, 1.0e6, 0.0).unwrap();
        let h = cavity_effective_hamiltonian(&m, 5e-7, &env).unwrap();
        assert_eq!(h[(C0G, C0F)], c(0.0, 0.0));
        assert!((h[(C1G, C0F)].re - 1.0e6).abs() < 1e-9);
        let eq = CavityModel::new(1.0e6, 1.0e6, 0.3).unwrap();
        assert!((eq.theta() - FRAC_PI_2).abs() < 1e-15);
        let mhz = 2.0 * PI * 1e6;
        let hm = CavityModel::new(0.25 * mhz, 0.60 * mhz, 0.0).unwrap();
        let expect = 2.0 * (0.25f64 / 0.60).atan();
        assert!((hm.theta() - expect).abs() < 1e-14);
        assert!((hm.theta() - 0.7896).abs() < 1e-4);
        assert!(CavityModel::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn two_qubit_blocks() {
        let none = ControlError::none();
        let s = 1.0e7;
        let segs = vec![constant_segment(s, Transition::Ge, 0.4), constant_segment(2.0 * s, Transition::Ef, 2.0)];
        let h6 = two_qubit_hamiltonian(&segs, &none, 2e-7).unwrap();
        let h3 = qutrit_drive_hamiltonian(&segs, &none, 2e-7).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h6[(i, j)], h3[(i, j)]);
                assert_eq!(h6[(3 + i, 3 + j)], c(0.0, 0.0));
                assert_eq!(h6[(i, 3 + j)], c(0.0, 0.0));
            }
        }
    }

    #[test]
    fn collapse_examples() {
        assert!(collapse_operators(&NoiseModel::<f64>::none()).unwrap().is_empty());
        let us: f64 = 1e-6;
        let n = NoiseModel::<f64>::from_coherence_times(45.6 * us, 20.3 * us, 24.4 * us, 8.3 * us, 0.0).unwrap();
        assert!((n.gamma_eg - 1.0 / (45.6 * us)).abs() < 1e-9);
        let expect = 1.0 / (24.4 * us) - 1.0 / (2.0 * 45.6 * us);
        assert!((n.gamma_phi_ge - expect).abs() < 1e-9);
        let ops = collapse_operators(&n).unwrap();
        assert_eq!(ops.len(), 4);
        let (ge, gf) = n.level_dephasing().unwrap();
        assert!((ge * us - 0.0300).abs() < 1e-3 && (gf * us - 0.0549).abs() < 1e-3);
        let bad = NoiseModel { gamma_eg: -1.0, ..NoiseModel::none() };
        assert!(matches!(collapse_operators(&bad), Err(Error::NegativeRate(_))));
    }

    #[test]
    fn paper_device_defaults() {
        let p = paper_device::<f64>();
        assert!((p.q1.anharmonicity() / (2.0 * PI) + 254e6).abs() < 1.0);
        assert!((p.noise_q1.gamma_fe - 1.0 / 20.3e-6).abs() < 1e-6);
        let (g, phi) = p.storage.rates().unwrap();
        assert!((g - 1.0 / 135e-6).abs() < 1e-6 && phi > 0.0);
    }

    fn segment_strategy() -> impl Strategy<Value = Vec<PulseSegment<f64>>> {
        prop::collection::vec((0.0f64..5e7, any::<bool>(), -4.0f64..4.0, 0.0f64..1e-7, 1e-8f64..2e-7), 1..5).prop_map(
            |v| {
                v.into_iter()
                    .map(|(a, ge, ph, st, sig)| {
                        let tr = if ge { Transition::Ge } else { Transition::Ef };
                        PulseSegment::new(Envelope::gaussian(sig, a).unwrap(), tr, ph, st)
                    })
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn hamiltonians_are_hermitian(segs in segment_strategy(), t in 0.0f64..1e-6, eps in -0.5f64..0.5, d in -1e7f64..1e7) {
            let err = ControlError::new(eps, d).unwrap();
            let h = qutrit_drive_hamiltonian(&segs, &err, t).unwrap();
            prop_assert!(hermiticity_error(&h) <= 1e-12 * (1.0 + max_abs(&h)));
            let h6 = two_qubit_hamiltonian(&segs, &err, t).unwrap();
            prop_assert!(hermiticity_error(&h6) <= 1e-12 * (1.0 + max_abs(&h6)));
        }

        #[test]
        fn dark_state_decouples(theta in 0.0f64..PI, phi in -PI..PI, om in 1e6f64..1e8) {
            let segs = vec![
                constant_segment(om * (theta / 2.0).sin(), Transition::Ge, phi),
                constant_segment(om * (theta / 2.0).cos(), Transition::Ef, PI),
            ];
            let h = qutrit_drive_hamiltonian(&segs, &ControlError::none(), 3e-7).unwrap();
            let (b, d) = bright_dark(theta, phi);
            let hd = &h * d.vector();
            prop_assert!(hd.iter().all(|z| z.norm() < 1e-12 * om));
            let basis = [b.vector().clone(), d.vector().clone(), QutritKet::<f64>::e().vector().clone()];
            let m = DMatrix::from_fn(3, 3, |i, j| basis[i].dotc(&(&h * &basis[j])));
            prop_assert!(m[(0, 1)].norm() < 1e-12 * om && m[(1, 2)].norm() < 1e-12 * om);
            prop_assert!(m[(0, 0)].norm() < 1e-12 * om && m[(1, 1)].norm() < 1e-12 * om);
            prop_assert!((m[(0, 2)].norm() - om).abs() < 1e-9 * om);
        }
    }
}
