//! Process tomography on the qutrit: records, MLE state estimates, χ extraction and fidelities.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Superoperator;
use crate::holonomic::rotation_sequence;
use crate::lsq::{levenberg_marquardt, LsqOptions};
use crate::model::ControlError;
use crate::operators::{
    frobenius, gellmann_basis, hermiticity_error, identity, projector, zeros, ComplexMatrix, DensityMatrix,
    OperatorBasis, QutritKet, E, F, G,
};
use crate::pulses::{Envelope, Transition};

type C = Complex<f64>;

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
const PI: f64 = std::f64::consts::PI;

pub const INPUT_LABELS: [&str; 9] = ["g", "e", "f", "g+e", "e+f", "g+f", "g-ie", "e-if", "g-if"];

pub const PREROTATION_LABELS: [&str; 9] = [
    "I",
    "X_ge(pi/2)",
    "Y_ge(pi/2)",
    "X_ge(pi)",
    "X_ge(pi/2) X_ef(pi)",
    "Y_ge(pi/2) X_ef(pi)",
    "X_ge(pi) X_ef(pi/2)",
    "X_ge(pi) Y_ef(pi/2)",
    "X_ge(pi) X_ef(pi)",
];

pub const PROCESS_LABELS: [&str; 9] = ["I_gf", "X_gf", "-iY_gf", "Z_gf", "X_ge", "-iY_ge", "X_ef", "-iY_ef", "I_e"];

pub const PAULI_LABELS: [&str; 4] = ["I", "X", "-iY", "Z"];

/// The nine input states, in the order of [`INPUT_LABELS`].
pub fn initial_states() -> Vec<QutritKet<f64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = C::new(0.0, 0.0);
    let r = C::new(s, 0.0);
    let mi = C::new(0.0, -s);
    [
        [C::new(1.0, 0.0), z, z],
        [z, C::new(1.0, 0.0), z],
        [z, z, C::new(1.0, 0.0)],
        [r, r, z],
        [z, r, r],
        [r, z, r],
        [r, mi, z],
        [z, r, mi],
        [r, z, mi],
    ]
    .into_iter()
    .map(|a| QutritKet::new(a).expect("unit-norm literal"))
    .collect()
}

/// `exp(−i angle/2 (cos α σˣ + sin α σʸ))` on the `ge` or `ef` pair, identity elsewhere.
pub fn subspace_rotation(transition: Transition, angle: f64, axis: f64) -> Result<ComplexMatrix<f64>> {
    let (lo, hi) = match transition {
        Transition::Ge => (G, E),
        Transition::Ef => (E, F),
        _ => return Err(Error::BadTransition("qutrit rotations act on ge or ef")),
    };
    let (s, c) = (angle * 0.5).sin_cos();
    let mut u = identity::<f64>(3);
    u[(lo, lo)] = C::new(c, 0.0);
    u[(hi, hi)] = C::new(c, 0.0);
    u[(lo, hi)] = C::new(0.0, -s) * C::from_polar(1.0, -axis);
    u[(hi, lo)] = C::new(0.0, -s) * C::from_polar(1.0, axis);
    Ok(u)
}

/// Factors of each pre-rotation in operator order (leftmost acts last).
fn prerotation_factors() -> Vec<Vec<(Transition, f64, f64)>> {
    use Transition::{Ef, Ge};
    vec![
        vec![],
        vec![(Ge, HALF_PI, 0.0)],
        vec![(Ge, HALF_PI, HALF_PI)],
        vec![(Ge, PI, 0.0)],
        vec![(Ge, HALF_PI, 0.0), (Ef, PI, 0.0)],
        vec![(Ge, HALF_PI, HALF_PI), (Ef, PI, 0.0)],
        vec![(Ge, PI, 0.0), (Ef, HALF_PI, 0.0)],
        vec![(Ge, PI, 0.0), (Ef, HALF_PI, HALF_PI)],
        vec![(Ge, PI, 0.0), (Ef, PI, 0.0)],
    ]
}

/// Ideal pre-rotation unitaries, in the order of [`PREROTATION_LABELS`].
pub fn prerotations() -> Vec<ComplexMatrix<f64>> {
    prerotation_factors()
        .iter()
        .map(|fs| {
            fs.iter().fold(identity::<f64>(3), |acc, &(tr, a, ax)| {
                acc * subspace_rotation(tr, a, ax).expect("qutrit transition")
            })
        })
        .collect()
}

/// Pre-rotations realized as finite pulses with envelope `base`, noiseless.
pub fn simulated_prerotations(base: &Envelope<f64>, err: &ControlError<f64>) -> Result<Vec<ComplexMatrix<f64>>> {
    prerotation_factors()
        .iter()
        .map(|fs| {
            if fs.is_empty() {
                return Ok(identity(3));
            }
            let timed: Vec<_> = fs.iter().rev().copied().collect();
            rotation_sequence(&timed, base, None)?.unitary(err)
        })
        .collect()
}

/// `M_I = β_a λ₀ + β_b λ₃ + β_c λ₈`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    pub beta_a: f64,
    pub beta_b: f64,
    pub beta_c: f64,
}

impl MeasurementModel {
    pub fn operator(&self) -> ComplexMatrix<f64> {
        let gm = gellmann_basis::<f64>();
        &gm.elements[0] * C::new(self.beta_a, 0.0)
            + &gm.elements[3] * C::new(self.beta_b, 0.0)
            + &gm.elements[8] * C::new(self.beta_c, 0.0)
    }
}

/// Coefficients that make `M_I` the ground-state projector.
pub fn measurement_coefficients() -> MeasurementModel {
    let gm = gellmann_basis::<f64>();
    let a = DMatrix::from_fn(3, 3, |r, c| gm.elements[[0, 3, 8][c]][(r, r)].re);
    let b = DVector::from_column_slice(&[1.0, 0.0, 0.0]);
    let x = a.lu().solve(&b).expect("diagonal Gell-Mann elements are independent");
    MeasurementModel { beta_a: x[0], beta_b: x[1], beta_c: x[2] }
}

/// How expectation values are read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measurement {
    Exact,
    Sampled { shots: u64, seed: u64 },
}

/// Expectation values `values[input][prerotation]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyRecord {
    pub inputs: Vec<String>,
    pub prerotations: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
}

/// Effective observables `U_k† M_I U_k`.
pub fn measurement_operators(mm: &MeasurementModel, rotations: &[ComplexMatrix<f64>]) -> Vec<ComplexMatrix<f64>> {
    let m = mm.operator();
    rotations.iter().map(|u| u.adjoint() * &m * u).collect()
}

/// Record `⟨M_k⟩ = Tr(ρ U_k† M_I U_k)` for every output state and pre-rotation.
pub fn simulate_record(
    outputs: &[DensityMatrix<f64>],
    mm: &MeasurementModel,
    rotations: &[ComplexMatrix<f64>],
    measurement: Measurement,
) -> Result<TomographyRecord> {
    let ops = measurement_operators(mm, rotations);
    let mut values: Vec<Vec<f64>> = outputs.iter().map(|rho| ops.iter().map(|a| rho.expect(a).re).collect()).collect();
    let (shots, seed) = match measurement {
        Measurement::Exact => (None, None),
        Measurement::Sampled { shots, seed } => {
            if shots == 0 {
                return Err(Error::BadShotCount);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for row in values.iter_mut() {
                for v in row.iter_mut() {
                    let p = v.clamp(0.0, 1.0);
                    let dist = Binomial::new(shots, p).map_err(|e| Error::InvalidInput(e.to_string()))?;
                    *v = dist.sample(&mut rng) as f64 / shots as f64;
                }
            }
            (Some(shots), Some(seed))
        }
    };
    let label = |xs: &[&str], n: usize| (0..n).map(|i| xs.get(i).map_or(format!("{i}"), |s| s.to_string())).collect();
    Ok(TomographyRecord {
        inputs: label(&INPUT_LABELS, outputs.len()),
        prerotations: label(&PREROTATION_LABELS, rotations.len()),
        values,
        shots,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleEstimate {
    pub rho: DensityMatrix<f64>,
    /// Root of the summed squared residuals.
    pub residual: f64,
    pub iterations: usize,
}

fn t_from_params(p: &[f64]) -> ComplexMatrix<f64> {
    let mut t = zeros::<f64>(3, 3);
    for i in 0..3 {
        t[(i, i)] = C::new(p[i], 0.0);
    }
    for (k, &(r, c)) in [(1, 0), (2, 0), (2, 1)].iter().enumerate() {
        t[(r, c)] = C::new(p[3 + 2 * k], p[4 + 2 * k]);
    }
    t
}

fn params_from_t(t: &ComplexMatrix<f64>) -> Vec<f64> {
    let mut p = vec![t[(0, 0)].re, t[(1, 1)].re, t[(2, 2)].re];
    for &(r, c) in &[(1, 0), (2, 0), (2, 1)] {
        p.push(t[(r, c)].re);
        p.push(t[(r, c)].im);
    }
    p
}

fn rho_from_t(t: &ComplexMatrix<f64>) -> ComplexMatrix<f64> {
    let m = t.adjoint() * t;
    let tr = m.trace().re;
    &m * C::new(1.0 / tr, 0.0)
}

/// Clip negative eigenvalues and renormalize.
pub fn project_psd(m: &ComplexMatrix<f64>) -> ComplexMatrix<f64> {
    let h = (m + m.adjoint()) * C::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let vals: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = vals.iter().sum();
    let n = m.nrows();
    let mut out = zeros::<f64>(n, n);
    for (k, &v) in vals.iter().enumerate() {
        if v > 0.0 {
            let col = eig.eigenvectors.column(k);
            out += col * col.adjoint() * C::new(v, 0.0);
        }
    }
    if total > 0.0 {
        out * C::new(1.0 / total, 0.0)
    } else {
        identity::<f64>(n) * C::new(1.0 / n as f64, 0.0)
    }
}

/// Unconstrained linear estimate of `ρ` from one record row.
pub fn linear_density(row: &[f64], ops: &[ComplexMatrix<f64>]) -> Result<ComplexMatrix<f64>> {
    if row.len() != ops.len() {
        return Err(Error::DimensionMismatch(row.len(), ops.len()));
    }
    let gm = gellmann_basis::<f64>();
    let a = DMatrix::from_fn(ops.len(), 9, |k, j| (&gm.elements[j] * &ops[k]).trace().re);
    let b = DVector::from_column_slice(row);
    let svd = a.svd(true, true);
    let rank = svd.rank(1e-10 * svd.singular_values.max());
    if rank < 9 {
        return Err(Error::SingularInputSpan(rank));
    }
    let x = svd.solve(&b, 1e-12).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(gm.elements.iter().zip(x.iter()).fold(zeros::<f64>(3, 3), |acc, (l, &c)| acc + l * C::new(c, 0.0)))
}

/// Lower-triangular `T` with `T†T ≈ ρ`.
fn triangular_factor(rho: &ComplexMatrix<f64>) -> ComplexMatrix<f64> {
    let n = rho.nrows();
    let j = DMatrix::from_fn(n, n, |r, c| if r + c == n - 1 { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) });
    let flipped = &j * rho * &j + identity::<f64>(n) * C::new(1e-10, 0.0);
    let l = flipped.cholesky().expect("regularized PSD matrix").l();
    &j * l.adjoint() * &j
}

/// Least-squares estimate `ρ = T†T / Tr(T†T)` from one record row.
pub fn mle_density(row: &[f64], ops: &[ComplexMatrix<f64>]) -> Result<MleEstimate> {
    let start = project_psd(&linear_density(row, ops)?);
    let p0 = params_from_t(&triangular_factor(&start));
    let f = |p: &[f64]| -> Vec<f64> {
        let rho = rho_from_t(&t_from_params(p));
        ops.iter().zip(row).map(|(a, v)| (&rho * a).trace().re - v).collect()
    };
    let opts = LsqOptions { max_iterations: 2000, ..LsqOptions::default() };
    let res = levenberg_marquardt(&f, &p0, None, &opts)?;
    if !res.converged && res.cost > 1e-20 {
        return Err(Error::ConvergenceFailure { iterations: res.iterations, cost: res.cost });
    }
    let rho = rho_from_t(&t_from_params(&res.x));
    Ok(MleEstimate { rho: DensityMatrix::new_unchecked(rho), residual: res.cost.sqrt(), iterations: res.iterations })
}

/// Process matrix over an operator basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiMatrix {
    pub entries: ComplexMatrix<f64>,
    pub basis: OperatorBasis<f64>,
    pub labels: Vec<String>,
}

impl ChiMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.entries)
    }

    /// `‖Σ χ_mn E_n†E_m − I‖_max`.
    pub fn trace_preservation_error(&self) -> f64 {
        let d = self.basis.dim();
        let mut acc = zeros::<f64>(d, d);
        let el = &self.basis.elements;
        for m in 0..el.len() {
            for n in 0..el.len() {
                acc += el[n].adjoint() * &el[m] * self.entries[(m, n)];
            }
        }
        crate::operators::max_abs(&(acc - identity::<f64>(d)))
    }

    /// `χ_mn √(N_m N_n) / d`: the matrix over the trace-normalized basis, unit trace when trace preserving.
    pub fn normalized(&self) -> ComplexMatrix<f64> {
        let norms = self.basis.norms();
        let d = self.basis.dim() as f64;
        DMatrix::from_fn(self.dim(), self.dim(), |m, n| self.entries[(m, n)] * ((norms[m] * norms[n]).sqrt() / d))
    }

    /// Ideal `χ` of `ρ ↦ UρU†`: `χ_mn = c_m c_n*` with `c_m = Tr(E_m†U)/N_m`.
    pub fn from_unitary(u: &ComplexMatrix<f64>, basis: &OperatorBasis<f64>, labels: &[&str]) -> Self {
        let norms = basis.norms();
        let c: Vec<C> = basis.elements.iter().zip(&norms).map(|(e, n)| crate::operators::hs_inner(e, u) / *n).collect();
        let k = c.len();
        Self {
            entries: DMatrix::from_fn(k, k, |m, n| c[m] * c[n].conj()),
            basis: basis.clone(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Rows `m,n,label_m,label_n,re,im`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,n,label_m,label_n,re,im\n");
        for m in 0..self.dim() {
            for n in 0..self.dim() {
                let z = self.entries[(m, n)];
                s.push_str(&format!("{m},{n},{},{},{:.12e},{:.12e}\n", self.labels[m], self.labels[n], z.re, z.im));
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiFit {
    pub chi: ChiMatrix,
    /// `‖predicted − observed‖_F` over all inputs.
    pub residual: f64,
}

/// Solve `ρ_out,i = Σ χ_mn E_m ρ_in,i E_n†` for `χ` by least squares.
pub fn extract_chi(
    inputs: &[DensityMatrix<f64>],
    outputs: &[DensityMatrix<f64>],
    basis: &OperatorBasis<f64>,
    labels: &[&str],
    psd: bool,
) -> Result<ChiFit> {
    if inputs.len() != outputs.len() {
        return Err(Error::DimensionMismatch(inputs.len(), outputs.len()));
    }
    let d = basis.dim();
    let k = basis.len();
    if let Some(r) = inputs.iter().chain(outputs).find(|r| r.dim() != d) {
        return Err(Error::DimensionMismatch(r.dim(), d));
    }
    let el = &basis.elements;
    let rows = inputs.len() * d * d;
    let mut a = DMatrix::<C>::zeros(rows, k * k);
    let mut b = DVector::<C>::zeros(rows);
    for (i, (rin, rout)) in inputs.iter().zip(outputs).enumerate() {
        for m in 0..k {
            let left = &el[m] * rin.matrix();
            for n in 0..k {
                let term = &left * el[n].adjoint();
                for r in 0..d {
                    for c in 0..d {
                        a[(i * d * d + r * d + c, m * k + n)] = term[(r, c)];
                    }
                }
            }
        }
        for r in 0..d {
            for c in 0..d {
                b[i * d * d + r * d + c] = rout.matrix()[(r, c)];
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.rank(1e-10 * smax.max(1e-300));
    if rank < k * k {
        return Err(Error::SingularInputSpan(rank));
    }
    let x = svd.solve(&b, 1e-12 * smax).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let residual = (&a * &x - &b).norm();
    let mut chi = DMatrix::from_fn(k, k, |m, n| x[m * k + n]);
    chi = (&chi + chi.adjoint()) * C::new(0.5, 0.0);
    if psd {
        let tr = chi.trace().re;
        chi = project_psd(&chi) * C::new(tr, 0.0);
    }
    Ok(ChiFit {
        chi: ChiMatrix { entries: chi, basis: basis.clone(), labels: labels.iter().map(|s| s.to_string()).collect() },
        residual,
    })
}

/// The `{g, f}` block of the normalized full `χ`, scaled by 3/2.
///
/// With the unnormalized basis used here this equals the raw `4×4` block.
pub fn reduce_chi(full: &ChiMatrix) -> Result<ChiMatrix> {
    if full.dim() != 9 {
        return Err(Error::DimensionMismatch(full.dim(), 9));
    }
    let norm = full.normalized();
    let sub = OperatorBasis { label: "process-gf-reduced".into(), elements: full.basis.elements[..4].to_vec() };
    let entries = DMatrix::from_fn(4, 4, |m, n| norm[(m, n)] * 1.5);
    Ok(ChiMatrix { entries, basis: sub, labels: full.labels[..4].to_vec() })
}

/// `|Tr(χ_exp χ_th†)|`.
pub fn fidelity_att(exp: &ChiMatrix, th: &ChiMatrix) -> Result<f64> {
    if exp.dim() != th.dim() {
        return Err(Error::DimensionMismatch(exp.dim(), th.dim()));
    }
    Ok((&exp.entries * th.entries.adjoint()).trace().norm())
}

/// `|Tr(χ_exp χ_th†)| / √(Tr(χ_exp χ_exp†) Tr(χ_th χ_th†))`.
pub fn fidelity_unatt(exp: &ChiMatrix, th: &ChiMatrix) -> Result<f64> {
    let att = fidelity_att(exp, th)?;
    let ne = frobenius(&exp.entries);
    let nt = frobenius(&th.entries);
    if !(nt > 0.0) {
        return Err(Error::InvalidInput("theoretical chi is zero".into()));
    }
    if ne == 0.0 {
        return Ok(0.0);
    }
    Ok(att / (ne * nt))
}

/// Settings for a full tomography run.
#[derive(Debug, Clone, PartialEq)]
pub struct QptSettings {
    pub measurement: Measurement,
    /// Replace ideal pre-rotations with simulated pulses of this envelope.
    pub simulated_prerotations: Option<Envelope<f64>>,
    pub psd_projection: bool,
}

impl Default for QptSettings {
    fn default() -> Self {
        Self { measurement: Measurement::Exact, simulated_prerotations: None, psd_projection: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QptResult {
    pub record: TomographyRecord,
    pub estimates: Vec<MleEstimate>,
    pub chi: ChiFit,
    pub reduced: ChiMatrix,
    pub reduced_target: ChiMatrix,
    pub trace: f64,
    pub f_att: f64,
    pub f_unatt: f64,
}

/// Tomography of a qutrit channel against the `{g, f}` target `target2`.
pub fn run_qpt(
    channel: &Superoperator<f64>,
    target2: &ComplexMatrix<f64>,
    settings: &QptSettings,
) -> Result<QptResult> {
    if channel.dim != 3 {
        return Err(Error::DimensionMismatch(channel.dim, 3));
    }
    let inputs: Vec<_> = initial_states().iter().map(|k| k.density()).collect();
    let outputs: Vec<_> = inputs.iter().map(|r| channel.apply_density(r)).collect();
    let rotations = match &settings.simulated_prerotations {
        Some(env) => simulated_prerotations(env, &ControlError::none())?,
        None => prerotations(),
    };
    let mm = measurement_coefficients();
    let record = simulate_record(&outputs, &mm, &rotations, settings.measurement)?;
    let ops = measurement_operators(&mm, &rotations);
    let estimates = record.values.par_iter().map(|row| mle_density(row, &ops)).collect::<Result<Vec<_>>>()?;
    let est: Vec<_> = estimates.iter().map(|e| e.rho.clone()).collect();
    let basis = crate::operators::process_basis_gf::<f64>();
    let chi = extract_chi(&inputs, &est, &basis, &PROCESS_LABELS, settings.psd_projection)?;
    let reduced = reduce_chi(&chi.chi)?;
    let full_target = crate::operators::embed_gf(target2)?;
    let reduced_target = reduce_chi(&ChiMatrix::from_unitary(&full_target, &basis, &PROCESS_LABELS))?;
    let trace = reduced.trace();
    let f_att = fidelity_att(&reduced, &reduced_target)?;
    let f_unatt = fidelity_unatt(&reduced, &reduced_target)?;
    Ok(QptResult { record, estimates, chi, reduced, reduced_target, trace, f_att, f_unatt })
}

/// Leakage channel used in tests and diagnostics: g and f each leak to e with probability `p`.
pub fn leakage_channel(p: f64) -> Superoperator<f64> {
    let k0 = (projector::<f64>(3, G) + projector::<f64>(3, F)) * C::new((1.0 - p).sqrt(), 0.0) + projector(3, E);
    let k1 = crate::operators::ket_bra::<f64>(3, E, G) * C::new(p.sqrt(), 0.0);
    let k2 = crate::operators::ket_bra::<f64>(3, E, F) * C::new(p.sqrt(), 0.0);
    let mut m = zeros::<f64>(9, 9);
    for k in [k0, k1, k2] {
        m += crate::operators::kron(&k.map(|z| z.conj()), &k);
    }
    Superoperator { dim: 3, matrix: m }
}
