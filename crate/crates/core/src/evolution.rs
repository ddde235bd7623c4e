//! Time-ordered propagation: unitary propagators, Lindblad integration and channels.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use num_complex::Complex;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{detuning_hamiltonian, ControlError, C0F, C0G, C1G};
use crate::operators::{
    exp_hermitian, hermiticity_error, identity, kron, max_abs, zeros, ComplexMatrix, DensityMatrix, E, F, G,
};
use crate::pulses::{PulseSegment, Transition};
use crate::scalar::{lit, to_f64, tol, Real};

/// Time-dependent Hermitian generator.
pub trait Hamiltonian<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn at(&self, t: T) -> ComplexMatrix<T>;
    /// Times where the generator may be discontinuous.
    fn breakpoints(&self) -> Vec<T> {
        Vec::new()
    }
}

/// Closure-backed Hamiltonian.
pub struct FnHamiltonian<F> {
    pub dim: usize,
    pub f: F,
}

impl<T: Real, Fun: Fn(T) -> ComplexMatrix<T> + Sync> Hamiltonian<T> for FnHamiltonian<Fun> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn at(&self, t: T) -> ComplexMatrix<T> {
        (self.f)(t)
    }
}

/// Segments coupled through fixed lowering-type operators:
/// `H(t) = H₀ + (1+ε) Σ_k [z_k(t) A_k + h.c.]` with `A_k = Σ |r⟩⟨c|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDrive<T: Real> {
    dim: usize,
    static_h: ComplexMatrix<T>,
    terms: Vec<(PulseSegment<T>, Vec<(usize, usize)>)>,
    scale: T,
}

impl<T: Real> SegmentDrive<T> {
    pub fn new(
        dim: usize,
        static_h: ComplexMatrix<T>,
        terms: Vec<(PulseSegment<T>, Vec<(usize, usize)>)>,
        epsilon: T,
    ) -> Result<Self> {
        if static_h.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch(static_h.nrows(), dim));
        }
        if terms.iter().any(|(_, p)| p.iter().any(|&(r, c)| r >= dim || c >= dim)) {
            return Err(Error::InvalidInput("coupling index outside Hilbert space".into()));
        }
        Ok(Self { dim, static_h, terms, scale: T::one() + epsilon })
    }

    /// Two-tone qutrit drive on `{|g⟩, |e⟩, |f⟩}`.
    pub fn qutrit(segments: &[PulseSegment<T>], err: &ControlError<T>) -> Result<Self> {
        let terms = segments
            .iter()
            .map(|s| match s.transition {
                Transition::Ge => Ok((*s, vec![(G, E)])),
                Transition::Ef => Ok((*s, vec![(F, E)])),
                other => Err(Error::BadTransition(other.name())),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(3, detuning_hamiltonian(err.detuning), terms, err.epsilon)
    }

    /// Number-selective drive on `{|0g⟩,|0e⟩,|0f⟩,|1g⟩,|1e⟩,|1f⟩}`; only the `n = 0` block is driven.
    pub fn two_qubit(segments: &[PulseSegment<T>], err: &ControlError<T>) -> Result<Self> {
        let terms = segments
            .iter()
            .map(|s| match s.transition {
                Transition::Ge => Ok((*s, vec![(G, E)])),
                Transition::Ef => Ok((*s, vec![(F, E)])),
                other => Err(Error::BadTransition(other.name())),
            })
            .collect::<Result<Vec<_>>>()?;
        let d = detuning_hamiltonian(err.detuning);
        let static_h = kron(&identity::<T>(2), &d);
        Self::new(6, static_h, terms, err.epsilon)
    }

    /// Two-photon and Raman drives on `{|0g⟩, |1g⟩, |0f⟩}`.
    pub fn cavity(segments: &[PulseSegment<T>], err: &ControlError<T>) -> Result<Self> {
        let terms = segments
            .iter()
            .map(|s| match s.transition {
                Transition::TwoPhoton => Ok((*s, vec![(C0G, C0F)])),
                Transition::Raman => Ok((*s, vec![(C1G, C0F)])),
                other => Err(Error::BadTransition(other.name())),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut static_h = zeros::<T>(3, 3);
        static_h[(C0F, C0F)] = Complex::new(err.detuning, T::zero());
        Self::new(3, static_h, terms, err.epsilon)
    }

    pub fn segments(&self) -> impl Iterator<Item = &PulseSegment<T>> {
        self.terms.iter().map(|(s, _)| s)
    }

    /// Latest end of any segment.
    pub fn end(&self) -> T {
        self.segments().fold(T::zero(), |a, s| if s.active().1 > a { s.active().1 } else { a })
    }

    pub fn start(&self) -> T {
        self.segments()
            .map(|s| s.active().0)
            .fold(None, |a: Option<T>, b| Some(a.map_or(b, |a| if b < a { b } else { a })))
            .unwrap_or(T::zero())
    }
}

impl<T: Real> Hamiltonian<T> for SegmentDrive<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn at(&self, t: T) -> ComplexMatrix<T> {
        let mut h = self.static_h.clone();
        for (seg, pairs) in &self.terms {
            let z = seg.field(t) * self.scale;
            if z.re == T::zero() && z.im == T::zero() {
                continue;
            }
            for &(r, c) in pairs {
                h[(r, c)] += z;
                h[(c, r)] += z.conj();
            }
        }
        h
    }

    fn breakpoints(&self) -> Vec<T> {
        self.segments().flat_map(|s| [s.active().0, s.active().1]).collect()
    }
}

/// Fixed-step grid, refined so that every breakpoint is a step boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<T: Real> {
    pub t0: T,
    pub t1: T,
    pub dt: T,
    pub breakpoints: Vec<T>,
}

/// Default number of steps per gate.
pub const DEFAULT_STEPS: usize = 4096;

impl<T: Real> TimeGrid<T> {
    pub fn new(t0: T, t1: T, dt: T) -> Result<Self> {
        if !(dt > T::zero()) || !((t1 - t0) / dt >= lit(10.0 - 1e-9)) {
            return Err(Error::InvalidInput("time grid needs dt > 0 and at least 10 steps".into()));
        }
        Ok(Self { t0, t1, dt, breakpoints: Vec::new() })
    }

    /// `steps` equal steps over `[t0, t1]`.
    pub fn with_steps(t0: T, t1: T, steps: usize) -> Result<Self> {
        Self::new(t0, t1, (t1 - t0) / lit(steps as f64))
    }

    /// Default grid of a Hamiltonian over `[t0, t1]`, aligned with its breakpoints.
    pub fn for_hamiltonian(h: &impl Hamiltonian<T>, t0: T, t1: T, steps: usize) -> Result<Self> {
        Ok(Self::with_steps(t0, t1, steps)?.with_breakpoints(h.breakpoints()))
    }

    pub fn with_breakpoints(mut self, mut bps: Vec<T>) -> Self {
        let margin = self.dt * lit(1e-6);
        bps.retain(|&b| b > self.t0 + margin && b < self.t1 - margin);
        bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bps.dedup_by(|a, b| (*a - *b).abs() <= margin);
        self.breakpoints = bps;
        self
    }

    /// `(start, width)` of every step.
    pub fn steps(&self) -> Vec<(T, T)> {
        let mut cuts = vec![self.t0];
        cuts.extend(self.breakpoints.iter().copied());
        cuts.push(self.t1);
        let mut out = Vec::new();
        for w in cuts.windows(2) {
            let span = w[1] - w[0];
            let n = to_f64(span / self.dt - lit(1e-6)).ceil().max(1.0) as usize;
            let h = span / lit(n as f64);
            for k in 0..n {
                out.push((w[0] + h * lit(k as f64), h));
            }
        }
        out
    }

    /// Same grid with the step halved.
    pub fn refined(&self) -> Self {
        Self { dt: self.dt * lit(0.5), ..self.clone() }
    }
}

fn check_hermitian<T: Real>(h: &ComplexMatrix<T>) -> Result<()> {
    let err = hermiticity_error(h);
    if err > tol::<T>(1e-10) * (T::one() + max_abs(h)) {
        return Err(Error::NonHermitianInput(to_f64(err)));
    }
    Ok(())
}

/// `U = ∏ₖ exp(−i H(t_k + dt/2) dt)`, latest step leftmost.
pub fn propagate_unitary<T: Real>(h: &impl Hamiltonian<T>, grid: &TimeGrid<T>) -> Result<ComplexMatrix<T>> {
    let mut u = identity::<T>(h.dim());
    let half = lit::<T>(0.5);
    for (t, dt) in grid.steps() {
        let hm = h.at(t + dt * half);
        check_hermitian(&hm)?;
        u = exp_hermitian(&hm, dt) * u;
    }
    Ok(u)
}

/// Jump operator stored as `(row, col, value)` triplets.
#[derive(Debug, Clone, PartialEq)]
struct SparseOp<T: Real> {
    entries: Vec<(usize, usize, Complex<T>)>,
}

impl<T: Real> SparseOp<T> {
    fn from_dense(m: &ComplexMatrix<T>) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if z.re != T::zero() || z.im != T::zero() {
                    entries.push((i, j, z));
                }
            }
        }
        Self { entries }
    }

    /// `out += L ρ L†`.
    fn sandwich_into(&self, rho: &ComplexMatrix<T>, out: &mut ComplexMatrix<T>) {
        for &(ra, sa, ca) in &self.entries {
            for &(rb, sb, cb) in &self.entries {
                out[(ra, rb)] += ca * rho[(sa, sb)] * cb.conj();
            }
        }
    }
}

/// Dissipative part of the master equation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dissipator<T: Real> {
    dim: usize,
    jumps: Vec<SparseOp<T>>,
    dense: Vec<ComplexMatrix<T>>,
    /// `½ Σ L†L`.
    anti: ComplexMatrix<T>,
}

impl<T: Real> Dissipator<T> {
    /// From already-weighted jump operators `L_k`.
    pub fn new(dim: usize, jumps: &[ComplexMatrix<T>]) -> Result<Self> {
        let mut anti = zeros::<T>(dim, dim);
        for l in jumps {
            if l.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch(l.nrows(), dim));
            }
            anti += l.adjoint() * l;
        }
        anti = anti.map(|z| z * lit::<T>(0.5));
        Ok(Self { dim, jumps: jumps.iter().map(SparseOp::from_dense).collect(), dense: jumps.to_vec(), anti })
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    /// `−i(H_eff ρ − ρ H_eff†) + Σ L ρ L†` with `H_eff = H − i·½ΣL†L`.
    pub fn rhs(&self, h: &ComplexMatrix<T>, rho: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let mi = Complex::new(T::zero(), -T::one());
        let heff = h + &self.anti * mi;
        let a = &heff * rho;
        let mut out = (a - rho * heff.adjoint()) * mi;
        for j in &self.jumps {
            j.sandwich_into(rho, &mut out);
        }
        out
    }

    /// Liouvillian on column-stacked `vec(ρ)`.
    pub fn liouvillian(&self, h: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let d = self.dim;
        let mi = Complex::new(T::zero(), -T::one());
        let heff = h + &self.anti * mi;
        let id = identity::<T>(d);
        let mut l = (kron(&id, &heff) - kron(&heff.map(|z| z.conj()), &id)) * mi;
        for j in &self.dense {
            l += kron(&j.map(|z| z.conj()), j);
        }
        l
    }
}

/// Sampled states of a master-equation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub samples: Vec<(T, DensityMatrix<T>)>,
}

impl<T: Real> Trajectory<T> {
    pub fn final_state(&self) -> &DensityMatrix<T> {
        &self.samples.last().expect("trajectory has samples").1
    }

    /// CSV with `time_s`, populations and coherence magnitudes.
    pub fn to_csv(&self) -> String {
        let d = self.samples.first().map_or(0, |s| s.1.dim());
        let name = |i: usize| {
            if d == 3 {
                ["g", "e", "f"][i].to_string()
            } else {
                i.to_string()
            }
        };
        let mut out = String::from("time_s");
        for i in 0..d {
            let _ = write!(out, ",P_{}", name(i));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let _ = write!(out, ",abs_rho_{}{}", name(i), name(j));
            }
        }
        out.push('\n');
        for (t, rho) in &self.samples {
            let m = rho.matrix();
            let _ = write!(out, "{:e}", to_f64(*t));
            for i in 0..d {
                let _ = write!(out, ",{:.12e}", to_f64(m[(i, i)].re));
            }
            for i in 0..d {
                for j in (i + 1)..d {
                    let _ = write!(out, ",{:.12e}", to_f64(m[(i, j)].norm_sqr().sqrt()));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn drift_limit<T: Real>(steps: usize) -> T {
    let floor = lit::<T>(1e-6);
    let scaled = T::default_epsilon() * lit(1e3 * (steps as f64).sqrt());
    if scaled > floor {
        scaled
    } else {
        floor
    }
}

fn rk4_step<T: Real>(
    h: &impl Hamiltonian<T>,
    diss: &Dissipator<T>,
    rho: &ComplexMatrix<T>,
    t: T,
    dt: T,
) -> ComplexMatrix<T> {
    let half = lit::<T>(0.5);
    let hz = Complex::new(dt * half, T::zero());
    let full = Complex::new(dt, T::zero());
    let sixth = Complex::new(dt / lit(6.0), T::zero());
    let two = Complex::new(lit::<T>(2.0), T::zero());
    let h0 = h.at(t);
    let hm = h.at(t + dt * half);
    let h1 = h.at(t + dt);
    let k1 = diss.rhs(&h0, rho);
    let k2 = diss.rhs(&hm, &(rho + &k1 * hz));
    let k3 = diss.rhs(&hm, &(rho + &k2 * hz));
    let k4 = diss.rhs(&h1, &(rho + &k3 * full));
    rho + (k1 + (k2 + k3) * two + k4) * sixth
}

/// Evaluation time inside a step; endpoint samples are nudged inward so that
/// piecewise drives see the segment the step belongs to.
struct Nudged<'a, H> {
    inner: &'a H,
    lo: f64,
    hi: f64,
}

impl<'a, T: Real, H: Hamiltonian<T>> Hamiltonian<T> for Nudged<'a, H> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn at(&self, t: T) -> ComplexMatrix<T> {
        let x = to_f64(t);
        let x = x.clamp(self.lo, self.hi);
        self.inner.at(lit(x))
    }
}

fn nudged<T: Real, H: Hamiltonian<T>>(h: &H, t: T, dt: T) -> Nudged<'_, H> {
    let eps = to_f64(dt) * 1e-9;
    Nudged { inner: h, lo: to_f64(t) + eps, hi: to_f64(t + dt) - eps }
}

/// Integrate the master equation with fixed-step RK4, recording every `record_every` steps.
pub fn propagate_lindblad<T: Real>(
    h: &impl Hamiltonian<T>,
    jumps: &[ComplexMatrix<T>],
    rho0: &DensityMatrix<T>,
    grid: &TimeGrid<T>,
    record_every: usize,
) -> Result<Trajectory<T>> {
    let diss = Dissipator::new(h.dim(), jumps)?;
    if rho0.dim() != h.dim() {
        return Err(Error::DimensionMismatch(rho0.dim(), h.dim()));
    }
    let steps = grid.steps();
    let limit = drift_limit::<T>(steps.len());
    let every = record_every.max(1);
    let mut rho = rho0.matrix().clone();
    let mut samples = vec![(grid.t0, rho0.clone())];
    for (k, &(t, dt)) in steps.iter().enumerate() {
        rho = rk4_step(&nudged(h, t, dt), &diss, &rho, t, dt);
        let last = k + 1 == steps.len();
        if (k + 1) % every == 0 || last {
            let drift = (rho.trace().re - T::one()).abs();
            if drift > limit {
                return Err(Error::StepTooLarge(to_f64(drift)));
            }
            samples.push((t + dt, DensityMatrix::new_unchecked(rho.clone())));
        }
    }
    Ok(Trajectory { samples })
}

/// Final state only.
pub fn evolve_density<T: Real>(
    h: &impl Hamiltonian<T>,
    jumps: &[ComplexMatrix<T>],
    rho0: &DensityMatrix<T>,
    grid: &TimeGrid<T>,
) -> Result<DensityMatrix<T>> {
    let diss = Dissipator::new(h.dim(), jumps)?;
    if rho0.dim() != h.dim() {
        return Err(Error::DimensionMismatch(rho0.dim(), h.dim()));
    }
    let steps = grid.steps();
    let mut rho = rho0.matrix().clone();
    for &(t, dt) in &steps {
        rho = rk4_step(&nudged(h, t, dt), &diss, &rho, t, dt);
    }
    let drift = (rho.trace().re - T::one()).abs();
    if drift > drift_limit::<T>(steps.len()) {
        return Err(Error::StepTooLarge(to_f64(drift)));
    }
    Ok(DensityMatrix::new_unchecked(rho))
}

/// Linear map on `d×d` matrices acting on column-stacked vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator<T: Real> {
    pub dim: usize,
    pub matrix: ComplexMatrix<T>,
}

impl<T: Real> Superoperator<T> {
    pub fn identity(dim: usize) -> Self {
        Self { dim, matrix: identity(dim * dim) }
    }

    /// `ρ ↦ UρU†`.
    pub fn from_unitary(u: &ComplexMatrix<T>) -> Self {
        Self { dim: u.nrows(), matrix: kron(&u.map(|z| z.conj()), u) }
    }

    /// `ρ ↦ (1−p)ρ + p Tr(ρ) I/d`.
    pub fn depolarizing(dim: usize, p: T) -> Self {
        let d2 = dim * dim;
        let mut m = identity::<T>(d2).map(|z| z * (T::one() - p));
        let w = Complex::new(p / lit(dim as f64), T::zero());
        for i in 0..dim {
            for j in 0..dim {
                m[(i * dim + i, j * dim + j)] += w;
            }
        }
        Self { dim, matrix: m }
    }

    /// Apply `self` first, then `next`.
    pub fn then(&self, next: &Self) -> Self {
        Self { dim: self.dim, matrix: &next.matrix * &self.matrix }
    }

    pub fn apply(&self, rho: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let v = nalgebra::DVector::from_column_slice(rho.as_slice());
        let out = &self.matrix * v;
        DMatrix::from_column_slice(self.dim, self.dim, out.as_slice())
    }

    pub fn apply_density(&self, rho: &DensityMatrix<T>) -> DensityMatrix<T> {
        DensityMatrix::new_unchecked(self.apply(rho.matrix()))
    }

    /// `max |Tr(S(|i⟩⟨j|)) − δ_ij|`.
    pub fn trace_preservation_error(&self) -> T {
        let d = self.dim;
        let mut worst = T::zero();
        for i in 0..d {
            for j in 0..d {
                let col = i + j * d;
                let mut tr = Complex::new(T::zero(), T::zero());
                for k in 0..d {
                    tr += self.matrix[(k + k * d, col)];
                }
                if i == j {
                    tr -= Complex::new(T::one(), T::zero());
                }
                let a = tr.norm_sqr().sqrt();
                if a > worst {
                    worst = a;
                }
            }
        }
        worst
    }
}

/// Channel generated by the master equation over the grid.
pub fn channel<T: Real>(
    h: &impl Hamiltonian<T>,
    jumps: &[ComplexMatrix<T>],
    grid: &TimeGrid<T>,
) -> Result<Superoperator<T>> {
    let d = h.dim();
    let diss = Dissipator::new(d, jumps)?;
    let steps = grid.steps();
    let half = lit::<T>(0.5);
    let hz = Complex::new(half, T::zero());
    let two = Complex::new(lit::<T>(2.0), T::zero());
    let mut s = identity::<T>(d * d);
    for &(t, dt) in &steps {
        let hh = nudged(h, t, dt);
        let l0 = diss.liouvillian(&hh.at(t));
        let lm = diss.liouvillian(&hh.at(t + dt * half));
        let l1 = diss.liouvillian(&hh.at(t + dt));
        let c = Complex::new(dt, T::zero());
        let k1 = &l0 * &s * c;
        let k2 = &lm * (&s + &k1 * hz) * c;
        let k3 = &lm * (&s + &k2 * hz) * c;
        let k4 = &l1 * (&s + &k3) * c;
        s += (k1 + (k2 + k3) * two + k4) * Complex::new(T::one() / lit(6.0), T::zero());
    }
    let out = Superoperator { dim: d, matrix: s };
    let drift = out.trace_preservation_error();
    if drift > drift_limit::<T>(steps.len()) {
        return Err(Error::StepTooLarge(to_f64(drift)));
    }
    Ok(out)
}

/// Apply the channel of `h` (with `jumps`) to every input state.
pub fn process_map<T: Real>(
    h: &impl Hamiltonian<T>,
    jumps: &[ComplexMatrix<T>],
    inputs: &[DensityMatrix<T>],
    grid: &TimeGrid<T>,
) -> Result<Vec<DensityMatrix<T>>> {
    let s = channel(h, jumps, grid)?;
    Ok(inputs.iter().map(|r| s.apply_density(r)).collect())
}

/// SHA-256 over length-prefixed parts.
pub fn content_key(parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update((p.len() as u64).to_le_bytes());
        hasher.update(p);
    }
    hasher.finalize().into()
}

/// Concurrent insert-or-get cache keyed by content hash.
#[derive(Debug)]
pub struct PropagatorCache<V> {
    map: Mutex<HashMap<[u8; 32], Arc<V>>>,
}

impl<V> Default for PropagatorCache<V> {
    fn default() -> Self {
        Self { map: Mutex::new(HashMap::new()) }
    }
}

impl<V> PropagatorCache<V> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Computes outside the lock; if two workers race, the first insert wins.
    pub fn get_or_compute(&self, key: [u8; 32], compute: impl FnOnce() -> Result<V>) -> Result<Arc<V>> {
        if let Some(v) = self.map.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let v = Arc::new(compute()?);
        let mut map = self.map.lock().unwrap();
        Ok(map.entry(key).or_insert(v).clone())
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
