//! Complex linear algebra on small dense matrices and the fixed operator bases.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cis, lit, modulus, tol, Real};

pub type ComplexMatrix<T> = DMatrix<Complex<T>>;
pub type ComplexVector<T> = DVector<Complex<T>>;

/// Level indices.
pub const G: usize = 0;
pub const E: usize = 1;
pub const F: usize = 2;

pub fn zeros<T: Real>(rows: usize, cols: usize) -> ComplexMatrix<T> {
    DMatrix::zeros(rows, cols)
}

pub fn identity<T: Real>(n: usize) -> ComplexMatrix<T> {
    DMatrix::identity(n, n)
}

/// `|i⟩⟨j|` in dimension `n`.
pub fn ket_bra<T: Real>(n: usize, i: usize, j: usize) -> ComplexMatrix<T> {
    let mut m = zeros(n, n);
    m[(i, j)] = Complex::new(T::one(), T::zero());
    m
}

pub fn projector<T: Real>(n: usize, i: usize) -> ComplexMatrix<T> {
    ket_bra(n, i, i)
}

pub fn scale<T: Real>(m: &ComplexMatrix<T>, r: T) -> ComplexMatrix<T> {
    m.map(|z| z * r)
}

/// Largest entry modulus.
pub fn max_abs<T: Real>(m: &ComplexMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| {
        let a = modulus(*z);
        if a > acc {
            a
        } else {
            acc
        }
    })
}

pub fn frobenius<T: Real>(m: &ComplexMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

pub fn hermiticity_error<T: Real>(m: &ComplexMatrix<T>) -> T {
    max_abs(&(m - m.adjoint()))
}

pub fn unitarity_error<T: Real>(m: &ComplexMatrix<T>) -> T {
    let n = m.ncols();
    max_abs(&(m.adjoint() * m - identity::<T>(n)))
}

/// Hilbert-Schmidt inner product `Tr(a† b)`.
pub fn hs_inner<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Complex<T> {
    a.iter().zip(b.iter()).fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

pub fn kron<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    a.kronecker(b)
}

pub fn commutator<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    a * b - b * a
}

/// Normalized qutrit state over `{|g⟩, |e⟩, |f⟩}`.
#[derive(Debug, Clone, PartialEq)]
pub struct QutritKet<T: Real>(ComplexVector<T>);

impl<T: Real> QutritKet<T> {
    /// Requires unit norm within 1e-12.
    pub fn new(amplitudes: [Complex<T>; 3]) -> Result<Self> {
        let v = DVector::from_row_slice(&amplitudes);
        let n = v.iter().fold(T::zero(), |a, z| a + z.norm_sqr()).sqrt();
        if (n - T::one()).abs() > tol(1e-12) {
            return Err(Error::InvalidInput(format!("ket norm {} differs from 1", crate::scalar::to_f64(n))));
        }
        Ok(Self(v))
    }

    /// Rescale to unit norm.
    pub fn normalized(amplitudes: [Complex<T>; 3]) -> Result<Self> {
        let v = DVector::from_row_slice(&amplitudes);
        let n = v.iter().fold(T::zero(), |a, z| a + z.norm_sqr()).sqrt();
        if n <= T::default_epsilon() {
            return Err(Error::InvalidInput("zero ket".into()));
        }
        Ok(Self(v.map(|z| z / n)))
    }

    pub fn basis(level: usize) -> Self {
        let mut v = DVector::zeros(3);
        v[level] = Complex::new(T::one(), T::zero());
        Self(v)
    }

    pub fn g() -> Self {
        Self::basis(G)
    }

    pub fn e() -> Self {
        Self::basis(E)
    }

    pub fn f() -> Self {
        Self::basis(F)
    }

    pub fn amplitudes(&self) -> [Complex<T>; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn vector(&self) -> &ComplexVector<T> {
        &self.0
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.0.dotc(&other.0)
    }

    pub fn projector(&self) -> ComplexMatrix<T> {
        &self.0 * self.0.adjoint()
    }

    pub fn density(&self) -> DensityMatrix<T> {
        DensityMatrix(self.projector())
    }

    pub fn apply(&self, u: &ComplexMatrix<T>) -> ComplexVector<T> {
        u * &self.0
    }
}

/// Positive unit-trace Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real>(ComplexMatrix<T>);

impl<T: Real> DensityMatrix<T> {
    /// Validates Hermiticity (1e-10), unit trace (1e-8) and positivity (−1e-8).
    pub fn new(m: ComplexMatrix<T>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch(m.nrows(), m.ncols()));
        }
        let herm = hermiticity_error(&m);
        if herm > tol(1e-10) {
            return Err(Error::NonHermitianInput(crate::scalar::to_f64(herm)));
        }
        let tr = m.trace();
        if (tr.re - T::one()).abs() > tol(1e-8) {
            return Err(Error::InvalidInput(format!("trace {} differs from 1", crate::scalar::to_f64(tr.re))));
        }
        let d = Self(m);
        if d.min_eigenvalue() < -tol::<T>(1e-8) {
            return Err(Error::InvalidInput("matrix is not positive semidefinite".into()));
        }
        Ok(d)
    }

    /// Wrap without validation; callers guarantee the invariants.
    pub fn new_unchecked(m: ComplexMatrix<T>) -> Self {
        Self(m)
    }

    /// `|ψ⟩⟨ψ|` for a normalized vector.
    pub fn from_vector(psi: &ComplexVector<T>) -> Self {
        Self(psi * psi.adjoint())
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self(scale(&identity(n), T::one() / lit(n as f64)))
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> T {
        self.0.trace().re
    }

    pub fn populations(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }

    pub fn purity(&self) -> T {
        hs_inner(&self.0, &self.0).re
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        let h = (&self.0 + self.0.adjoint()).map(|z| z * lit::<T>(0.5));
        h.symmetric_eigenvalues().iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues().into_iter().fold(T::max_value().unwrap(), |a, b| if b < a { b } else { a })
    }

    /// `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &Self) -> T {
        let d = &self.0 - &other.0;
        let h = (&d + d.adjoint()).map(|z| z * lit::<T>(0.5));
        h.symmetric_eigenvalues().iter().fold(T::zero(), |a, l| a + l.abs()) * lit(0.5)
    }

    /// `U ρ U†`.
    pub fn evolve(&self, u: &ComplexMatrix<T>) -> Self {
        Self(u * &self.0 * u.adjoint())
    }

    /// Expectation `Tr(ρ O)`.
    pub fn expect(&self, o: &ComplexMatrix<T>) -> Complex<T> {
        (&self.0 * o).trace()
    }
}

/// Ordered operator basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBasis<T: Real> {
    pub label: String,
    pub elements: Vec<ComplexMatrix<T>>,
}

impl<T: Real> OperatorBasis<T> {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements.first().map_or(0, |m| m.nrows())
    }

    /// Gram matrix `Tr(E_i† E_j)`.
    pub fn gram(&self) -> ComplexMatrix<T> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| hs_inner(&self.elements[i], &self.elements[j]))
    }

    /// Squared Hilbert-Schmidt norms `Tr(E_i† E_i)`.
    pub fn norms(&self) -> Vec<T> {
        self.elements.iter().map(|e| hs_inner(e, e).re).collect()
    }
}

/// `λ₀ = I` followed by the eight standard Gell-Mann matrices.
pub fn gellmann_basis<T: Real>() -> OperatorBasis<T> {
    let one = Complex::new(T::one(), T::zero());
    let i = Complex::new(T::zero(), T::one());
    let mut el = vec![identity::<T>(3)];
    let sym = |a: usize, b: usize| ket_bra::<T>(3, a, b) + ket_bra::<T>(3, b, a);
    let asym = |a: usize, b: usize| (ket_bra::<T>(3, b, a) - ket_bra::<T>(3, a, b)) * i;
    el.push(sym(0, 1));
    el.push(asym(0, 1));
    el.push((ket_bra::<T>(3, 0, 0) - ket_bra::<T>(3, 1, 1)) * one);
    el.push(sym(0, 2));
    el.push(asym(0, 2));
    el.push(sym(1, 2));
    el.push(asym(1, 2));
    let s3 = lit::<T>(3.0).sqrt();
    el.push(scale(
        &(ket_bra::<T>(3, 0, 0) + ket_bra::<T>(3, 1, 1) - scale(&ket_bra::<T>(3, 2, 2), lit(2.0))),
        T::one() / s3,
    ));
    OperatorBasis { label: "gell-mann".into(), elements: el }
}

/// Pauli-type operators on levels `m < n` of a `d`-level system.
fn sigma_x<T: Real>(d: usize, m: usize, n: usize) -> ComplexMatrix<T> {
    ket_bra(d, m, n) + ket_bra(d, n, m)
}

/// `−iσʸ = |n⟩⟨m| − |m⟩⟨n|` on levels `m < n`.
fn minus_i_sigma_y<T: Real>(d: usize, m: usize, n: usize) -> ComplexMatrix<T> {
    ket_bra(d, n, m) - ket_bra(d, m, n)
}

fn sigma_z<T: Real>(d: usize, m: usize, n: usize) -> ComplexMatrix<T> {
    ket_bra(d, m, m) - ket_bra(d, n, n)
}

/// `{I_gf, σˣ_gf, −iσʸ_gf, σᶻ_gf, σˣ_ge, −iσʸ_ge, σˣ_ef, −iσʸ_ef, I_e}`.
pub fn process_basis_gf<T: Real>() -> OperatorBasis<T> {
    let el = vec![
        projector(3, G) + projector(3, F),
        sigma_x(3, G, F),
        minus_i_sigma_y(3, G, F),
        sigma_z(3, G, F),
        sigma_x(3, G, E),
        minus_i_sigma_y(3, G, E),
        sigma_x(3, E, F),
        minus_i_sigma_y(3, E, F),
        projector(3, E),
    ];
    OperatorBasis { label: "process-gf".into(), elements: el }
}

/// Two-level basis `{I, X, −iY, Z}`.
pub fn pauli_basis<T: Real>() -> OperatorBasis<T> {
    let el = vec![identity(2), sigma_x(2, 0, 1), minus_i_sigma_y(2, 0, 1), sigma_z(2, 0, 1)];
    OperatorBasis { label: "pauli".into(), elements: el }
}

pub fn pauli_x<T: Real>() -> ComplexMatrix<T> {
    sigma_x(2, 0, 1)
}

pub fn pauli_y<T: Real>() -> ComplexMatrix<T> {
    minus_i_sigma_y(2, 0, 1) * Complex::new(T::zero(), T::one())
}

pub fn pauli_z<T: Real>() -> ComplexMatrix<T> {
    sigma_z(2, 0, 1)
}

/// Lift a `{g, f}` gate to the qutrit, acting as identity on `|e⟩`.
pub fn embed_gf<T: Real>(u2: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    if u2.nrows() != 2 || u2.ncols() != 2 {
        return Err(Error::DimensionMismatch(u2.nrows(), 2));
    }
    let err = unitarity_error(u2);
    if err > tol(1e-10) {
        return Err(Error::NonUnitaryInput(crate::scalar::to_f64(err)));
    }
    let mut u = identity::<T>(3);
    let idx = [G, F];
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            u[(i, j)] = u2[(a, b)];
        }
    }
    Ok(u)
}

/// `{g, f}` block of a qutrit operator.
pub fn gf_block<T: Real>(u: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let idx = [G, F];
    DMatrix::from_fn(2, 2, |a, b| u[(idx[a], idx[b])])
}

/// `e^{−iht}` for Hermitian `h`.
pub fn matrix_exp<T: Real>(h: &ComplexMatrix<T>, t: T) -> Result<ComplexMatrix<T>> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch(h.nrows(), h.ncols()));
    }
    let err = hermiticity_error(h);
    if err > tol::<T>(1e-10) * (T::one() + max_abs(h)) {
        return Err(Error::NonHermitianInput(crate::scalar::to_f64(err)));
    }
    Ok(exp_hermitian(h, t))
}

/// Unchecked `e^{−iht}`; `h` is symmetrized before the eigendecomposition.
pub(crate) fn exp_hermitian<T: Real>(h: &ComplexMatrix<T>, t: T) -> ComplexMatrix<T> {
    let n = h.nrows();
    if h.iter().all(|z| z.re == T::zero() && z.im == T::zero()) {
        return identity(n);
    }
    let hs = (h + h.adjoint()).map(|z| z * lit::<T>(0.5));
    let eig = hs.symmetric_eigen();
    let v = &eig.eigenvectors;
    let mut vd = v.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let ph = cis(-l * t);
        for i in 0..n {
            vd[(i, j)] *= ph;
        }
    }
    vd * v.adjoint()
}

/// `min_φ ‖u − e^{iφ}v‖_F`, with the phase taken from `Tr(v†u)`.
pub fn global_phase_distance<T: Real>(u: &ComplexMatrix<T>, v: &ComplexMatrix<T>) -> T {
    let ov = hs_inner(v, u);
    let m = modulus(ov);
    let ph = if m > T::zero() { ov / m } else { Complex::new(T::one(), T::zero()) };
    frobenius(&(u - v * ph))
}

/// Equality up to a global phase.
pub fn equal_up_to_phase<T: Real>(u: &ComplexMatrix<T>, v: &ComplexMatrix<T>, tolerance: T) -> bool {
    u.shape() == v.shape() && global_phase_distance(u, v) < tolerance
}

/// Phase-insensitive gate fidelity `|Tr(u†v)|²/d²`.
pub fn gate_fidelity<T: Real>(u: &ComplexMatrix<T>, v: &ComplexMatrix<T>) -> T {
    let d = lit::<T>(u.nrows() as f64);
    hs_inner(u, v).norm_sqr() / (d * d)
}

/// Fidelity of a qutrit operator against a `{g, f}` target, ignoring `|e⟩`.
pub fn gf_fidelity<T: Real>(target: &ComplexMatrix<T>, u: &ComplexMatrix<T>) -> T {
    gate_fidelity(target, &gf_block(u))
}

/// Population leaked from the computational subspace into `|e⟩`.
pub fn gf_leakage<T: Real>(u: &ComplexMatrix<T>) -> T {
    u[(E, G)].norm_sqr() + u[(E, F)].norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;
    use proptest::prelude::*;

    type C = Complex<f64>;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn diag3(a: C, b: C, d: C) -> ComplexMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![a, b, d]))
    }

    #[test]
    fn gellmann_conventions() {
        let b = gellmann_basis::<f64>();
        assert_eq!(b.len(), 9);
        assert_eq!(b.elements[0], identity(3));
        assert_eq!(b.elements[3], diag3(c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)));
        let l8 = &b.elements[8];
        assert!((hs_inner(l8, l8).re - 2.0).abs() < 1e-14);
        let g = b.gram();
        for i in 1..9 {
            for j in 1..9 {
                let expect = if i == j { 2.0 } else { 0.0 };
                assert!((g[(i, j)] - c(expect, 0.0)).norm() < 1e-14, "({i},{j})");
            }
            assert!(b.elements[i].trace().norm() < 1e-14);
            assert!(hermiticity_error(&b.elements[i]) < 1e-15);
        }
    }

    #[test]
    fn process_basis_layout() {
        let b = process_basis_gf::<f64>();
        assert_eq!(b.elements[0], diag3(c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)));
        assert_eq!(b.elements[8], diag3(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)));
        let out = &b.elements[1] * QutritKet::<f64>::g().vector();
        assert_eq!(&out, QutritKet::<f64>::f().vector());
        let g = b.gram();
        let mut pairs = 0;
        for m in 0..9 {
            for n in (m + 1)..9 {
                assert!(g[(m, n)].norm() < 1e-15, "({m},{n})");
                pairs += 1;
            }
        }
        assert_eq!(pairs, 36);
        assert_eq!(b.norms(), vec![2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 1.0]);
    }

    #[test]
    fn embedding() {
        assert_eq!(embed_gf(&identity::<f64>(2)).unwrap(), identity(3));
        let x = embed_gf(&pauli_x::<f64>()).unwrap();
        let mut p = zeros::<f64>(3, 3);
        p[(0, 2)] = c(1.0, 0.0);
        p[(2, 0)] = c(1.0, 0.0);
        p[(1, 1)] = c(1.0, 0.0);
        assert_eq!(x, p);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0, -1.0), c(0.0, 1.0)]));
        assert_eq!(embed_gf(&d).unwrap(), diag3(c(0.0, -1.0), c(1.0, 0.0), c(0.0, 1.0)));
        let bad = scale(&identity::<f64>(2), 1.1);
        assert!(matches!(embed_gf(&bad), Err(Error::NonUnitaryInput(_))));
    }

    #[test]
    fn exp_examples() {
        let z = zeros::<f64>(3, 3);
        assert_eq!(matrix_exp(&z, 7.0).unwrap(), identity(3));
        let h = identity::<f64>(3);
        assert!(max_abs(&(matrix_exp(&h, 0.0).unwrap() - identity(3))) < 1e-15);
        let hx = scale(&pauli_x::<f64>(), std::f64::consts::FRAC_PI_2);
        let u = matrix_exp(&hx, 1.0).unwrap();
        let expect = pauli_x::<f64>() * c(0.0, -1.0);
        assert!(max_abs(&(u - expect)) < 1e-15);
        let mut nh = zeros::<f64>(2, 2);
        nh[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(matrix_exp(&nh, 1.0), Err(Error::NonHermitianInput(_))));
    }

    /// Scaling-and-squaring Taylor oracle for `e^{−iht}`.
    fn taylor_exp(h: &ComplexMatrix<f64>, t: f64) -> ComplexMatrix<f64> {
        let a = h * c(0.0, -t);
        let norm = frobenius(&a);
        let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
        let a = a / c(2f64.powi(s), 0.0);
        let n = h.nrows();
        let mut term = identity::<f64>(n);
        let mut sum = identity::<f64>(n);
        for k in 1..30 {
            term = &term * &a / c(k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    fn hermitian_from(v: &[f64]) -> ComplexMatrix<f64> {
        let mut h = zeros::<f64>(3, 3);
        let mut k = 0;
        for i in 0..3 {
            h[(i, i)] = c(v[k], 0.0);
            k += 1;
            for j in (i + 1)..3 {
                h[(i, j)] = c(v[k], v[k + 1]);
                h[(j, i)] = c(v[k], -v[k + 1]);
                k += 2;
            }
        }
        h
    }

    proptest! {
        #[test]
        fn exp_matches_series(v in prop::collection::vec(-2.0f64..2.0, 9), t in -3.0f64..3.0) {
            let h = hermitian_from(&v);
            let u = matrix_exp(&h, t).unwrap();
            prop_assert!(max_abs(&(&u - taylor_exp(&h, t))) < 1e-12);
            prop_assert!(unitarity_error(&u) < 1e-10);
        }

        #[test]
        fn phase_distance_ignores_global_phase(v in prop::collection::vec(-2.0f64..2.0, 9), ph in -3.2f64..3.2) {
            let u = matrix_exp(&hermitian_from(&v), 1.0).unwrap();
            let w = &u * cis(ph);
            prop_assert!(equal_up_to_phase(&u, &w, 1e-10));
            prop_assert!((gate_fidelity(&u, &w) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ket_validation() {
        let s = 0.5f64.sqrt();
        assert!(QutritKet::new([c(s, 0.0), c(0.0, 0.0), c(s, 0.0)]).is_ok());
        assert!(QutritKet::new([c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).is_err());
        let k = QutritKet::normalized([c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]).unwrap();
        assert!((k.inner(&k).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn density_validation() {
        let rho = DensityMatrix::<f64>::maximally_mixed(3);
        assert!(DensityMatrix::new(rho.matrix().clone()).is_ok());
        assert!((rho.purity() - 1.0 / 3.0).abs() < 1e-15);
        let bad = diag3(c(1.5, 0.0), c(-0.5, 0.0), c(0.0, 0.0));
        assert!(DensityMatrix::new(bad).is_err());
        let g = QutritKet::<f64>::g().density();
        let f = QutritKet::<f64>::f().density();
        assert!((g.trace_distance(&f) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_precision_substrate() {
        let hx = scale(&pauli_x::<f32>(), std::f32::consts::FRAC_PI_2);
        let u = matrix_exp(&hx, 1.0f32).unwrap();
        let expect = pauli_x::<f32>() * cplx::<f32>(0.0, -1.0);
        assert!(max_abs(&(u - expect)) < 1e-6);
        let b = process_basis_gf::<f32>();
        assert!(b.gram()[(0, 8)].norm() == 0.0);
    }
}
