//! Drive envelopes, DRAG quadratures and pulse segments.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cis, is_nan, lit, to_f64, tol, Real};

/// Envelope shape; all times in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape<T: Real> {
    /// Gaussian centred in `[0, total]`, offset so both edges are exactly zero.
    TruncatedGaussian {
        sigma: T,
        total: T,
    },
    /// Flat top with sine-squared ramps on both sides.
    SquareWithRamps {
        flat: T,
        ramp: T,
    },
    Constant {
        duration: T,
    },
}

/// Real envelope with its peak amplitude in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope<T: Real> {
    pub shape: Shape<T>,
    pub peak: T,
}

const GL_NODES: [f64; 5] =
    [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
    0.236_926_885_056_189_08,
];
const PANELS: usize = 64;

/// Composite five-point Gauss-Legendre quadrature of `f` over `[a, b]`.
pub fn gauss_legendre<T: Real>(f: impl Fn(T) -> T, a: T, b: T, panels: usize) -> T {
    if b <= a {
        return T::zero();
    }
    let h = (b - a) / lit(panels as f64);
    let half = h * lit(0.5);
    let mut acc = T::zero();
    for p in 0..panels {
        let mid = a + h * lit(p as f64 + 0.5);
        for k in 0..5 {
            acc += f(mid + half * lit(GL_NODES[k])) * lit(GL_WEIGHTS[k]);
        }
    }
    acc * half
}

impl<T: Real> Envelope<T> {
    /// Truncated Gaussian over the standard `4σ` window.
    pub fn gaussian(sigma: T, peak: T) -> Result<Self> {
        Self::truncated_gaussian(sigma, sigma * lit(4.0), peak)
    }

    pub fn truncated_gaussian(sigma: T, total: T, peak: T) -> Result<Self> {
        if !(sigma > T::zero()) || !(total > T::zero()) {
            return Err(Error::InvalidInput("gaussian sigma and total must be positive".into()));
        }
        Ok(Self { shape: Shape::TruncatedGaussian { sigma, total }, peak })
    }

    pub fn square(flat: T, ramp: T, peak: T) -> Result<Self> {
        if flat < T::zero() || ramp < T::zero() || !(flat + ramp > T::zero()) {
            return Err(Error::InvalidInput("square pulse needs flat >= 0, ramp >= 0, duration > 0".into()));
        }
        Ok(Self { shape: Shape::SquareWithRamps { flat, ramp }, peak })
    }

    pub fn constant(duration: T, peak: T) -> Result<Self> {
        if !(duration > T::zero()) {
            return Err(Error::InvalidInput("duration must be positive".into()));
        }
        Ok(Self { shape: Shape::Constant { duration }, peak })
    }

    pub fn duration(&self) -> T {
        match self.shape {
            Shape::TruncatedGaussian { total, .. } => total,
            Shape::SquareWithRamps { flat, ramp } => flat + ramp * lit(2.0),
            Shape::Constant { duration } => duration,
        }
    }

    /// Same shape with peak `peak`.
    pub fn with_peak(&self, peak: T) -> Self {
        Self { shape: self.shape, peak }
    }

    /// Unit-peak shape value; `t` is clamped to the envelope.
    pub fn shape_value(&self, t: T) -> T {
        let dur = self.duration();
        let t = if t < T::zero() {
            T::zero()
        } else if t > dur {
            dur
        } else {
            t
        };
        match self.shape {
            Shape::Constant { .. } => T::one(),
            Shape::SquareWithRamps { flat, ramp } => {
                if ramp == T::zero() {
                    return T::one();
                }
                let x = if t < ramp {
                    t
                } else if t > ramp + flat {
                    dur - t
                } else {
                    return T::one();
                };
                let s = (T::pi() * x / (ramp * lit(2.0))).sin();
                s * s
            }
            Shape::TruncatedGaussian { sigma, total } => {
                let c = total * lit(0.5);
                let edge = (-(c * c) / (sigma * sigma * lit(2.0))).exp();
                let raw = (-((t - c) * (t - c)) / (sigma * sigma * lit(2.0))).exp();
                (raw - edge) / (T::one() - edge)
            }
        }
    }

    /// Unit-peak time derivative; `t` is clamped to the envelope.
    pub fn shape_derivative(&self, t: T) -> T {
        let dur = self.duration();
        let t = if t < T::zero() {
            T::zero()
        } else if t > dur {
            dur
        } else {
            t
        };
        match self.shape {
            Shape::Constant { .. } => T::zero(),
            Shape::SquareWithRamps { flat, ramp } => {
                if ramp == T::zero() {
                    return T::zero();
                }
                let (x, sign) = if t < ramp {
                    (t, T::one())
                } else if t > ramp + flat {
                    (dur - t, -T::one())
                } else {
                    return T::zero();
                };
                let w = T::pi() / (ramp * lit(2.0));
                sign * w * (w * x * lit(2.0)).sin()
            }
            Shape::TruncatedGaussian { sigma, total } => {
                let c = total * lit(0.5);
                let s2 = sigma * sigma;
                let edge = (-(c * c) / (s2 * lit(2.0))).exp();
                let raw = (-((t - c) * (t - c)) / (s2 * lit(2.0))).exp();
                -raw * (t - c) / s2 / (T::one() - edge)
            }
        }
    }

    /// Envelope value at local time `t ∈ [0, duration]`.
    pub fn sample(&self, t: T) -> Result<T> {
        self.check_range(t)?;
        Ok(self.peak * self.shape_value(t))
    }

    /// `d/dt sample`.
    pub fn derivative(&self, t: T) -> Result<T> {
        self.check_range(t)?;
        Ok(self.peak * self.shape_derivative(t))
    }

    fn check_range(&self, t: T) -> Result<()> {
        let dur = self.duration();
        let slack = tol::<T>(1e-12) * dur;
        if t < -slack || t > dur + slack || is_nan(t) {
            return Err(Error::OutOfRange { t: to_f64(t), duration: to_f64(dur) });
        }
        Ok(())
    }

    /// Smooth pieces of the envelope, used to place quadrature panels.
    fn joints(&self) -> Vec<T> {
        match self.shape {
            Shape::SquareWithRamps { flat, ramp } => vec![ramp, ramp + flat],
            _ => vec![],
        }
    }

    /// `∫_a^b sample dt` with `0 ≤ a ≤ b ≤ duration`.
    pub fn integral(&self, a: T, b: T) -> T {
        let mut cuts = vec![a];
        cuts.extend(self.joints().into_iter().filter(|&j| j > a && j < b));
        cuts.push(b);
        let mut acc = T::zero();
        for w in cuts.windows(2) {
            acc += gauss_legendre(|t| self.shape_value(t), w[0], w[1], PANELS);
        }
        acc * self.peak
    }

    /// Pulse area `∫ Ω dt` in radians.
    pub fn area(&self) -> T {
        self.integral(T::zero(), self.duration())
    }

    /// Rescale the peak so that the area equals `target`.
    pub fn normalize_to_area(&self, target: T) -> Result<Self> {
        let a = self.area();
        if a == T::zero() || is_nan(a) {
            return Err(Error::ZeroArea);
        }
        Ok(self.with_peak(self.peak * target / a))
    }
}

/// First-order DRAG correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DragSetting<T: Real> {
    pub enabled: bool,
    pub coefficient: T,
    /// Anharmonicity `ω_ef − ω_ge` in rad/s.
    pub anharmonicity: T,
}

impl<T: Real> DragSetting<T> {
    pub fn new(coefficient: T, anharmonicity: T) -> Result<Self> {
        if anharmonicity == T::zero() {
            return Err(Error::InvalidInput("DRAG anharmonicity must be nonzero".into()));
        }
        Ok(Self { enabled: true, coefficient, anharmonicity })
    }

    pub fn disabled() -> Self {
        Self { enabled: false, coefficient: T::one(), anharmonicity: T::one() }
    }
}

/// Out-of-phase quadrature `−c·Ω'(t)/α`.
pub fn drag_quadrature<T: Real>(env: &Envelope<T>, drag: &DragSetting<T>, t: T) -> Result<T> {
    if !drag.enabled {
        return Err(Error::InvalidInput("DRAG is disabled".into()));
    }
    if drag.anharmonicity == T::zero() {
        return Err(Error::InvalidInput("DRAG anharmonicity must be nonzero".into()));
    }
    Ok(-drag.coefficient * env.derivative(t)? / drag.anharmonicity)
}

/// Which pair of levels a segment drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transition {
    Ge,
    Ef,
    /// `|0g⟩ ↔ |0f⟩` two-photon drive in the qubit-cavity frame.
    TwoPhoton,
    /// Cavity-assisted `|1g⟩ ↔ |0f⟩` sideband.
    Raman,
}

impl Transition {
    pub fn name(&self) -> &'static str {
        match self {
            Transition::Ge => "ge",
            Transition::Ef => "ef",
            Transition::TwoPhoton => "two_photon",
            Transition::Raman => "raman",
        }
    }
}

/// One envelope on one transition, placed on the schedule clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSegment<T: Real> {
    pub envelope: Envelope<T>,
    pub transition: Transition,
    pub phase: T,
    /// Absolute time of the envelope origin.
    pub start: T,
    /// Active part of the envelope in local time; the drive is zero outside it.
    pub window: (T, T),
    pub drag: Option<DragSetting<T>>,
}

impl<T: Real> PulseSegment<T> {
    pub fn new(envelope: Envelope<T>, transition: Transition, phase: T, start: T) -> Self {
        let window = (T::zero(), envelope.duration());
        Self { envelope, transition, phase, start, window, drag: None }
    }

    pub fn with_window(mut self, from: T, to: T) -> Result<Self> {
        let d = self.envelope.duration();
        if from < T::zero() || to > d || !(to > from) {
            return Err(Error::InvalidInput("segment window outside envelope".into()));
        }
        self.window = (from, to);
        Ok(self)
    }

    pub fn with_drag(mut self, drag: DragSetting<T>) -> Self {
        self.drag = if drag.enabled { Some(drag) } else { None };
        self
    }

    /// Absolute `[begin, end]` during which the segment drives.
    pub fn active(&self) -> (T, T) {
        (self.start + self.window.0, self.start + self.window.1)
    }

    /// Half-open `[begin, end)`, so abutting segments never overlap.
    pub fn contains(&self, t: T) -> bool {
        let (a, b) = self.active();
        t >= a && t < b
    }

    /// Complex drive `(Ω + iΩ_drag) e^{iφ}` at absolute time `t`; zero when inactive.
    pub fn field(&self, t: T) -> Complex<T> {
        if !self.contains(t) {
            return Complex::new(T::zero(), T::zero());
        }
        let local = t - self.start;
        let x = self.envelope.peak * self.envelope.shape_value(local);
        let y = match &self.drag {
            Some(d) => -d.coefficient * self.envelope.peak * self.envelope.shape_derivative(local) / d.anharmonicity,
            None => T::zero(),
        };
        Complex::new(x, y) * cis(self.phase)
    }

    /// Area of the active window.
    pub fn area(&self) -> T {
        self.envelope.integral(self.window.0, self.window.1)
    }
}
