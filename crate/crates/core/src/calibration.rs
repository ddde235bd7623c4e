//! Curve fits for decay, Ramsey, Rabi and chevron data.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{levenberg_marquardt, multistart, Bounds, LsqOptions, LsqResult};

const TAU: f64 = std::f64::consts::TAU;

/// Sampled `(time, value)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Trace {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch(times.len(), values.len()));
        }
        if times.len() < 8 {
            return Err(Error::InvalidInput(format!("trace has {} samples, need at least 8", times.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("times must be strictly increasing".into()));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("trace contains non-finite samples".into()));
        }
        Ok(Self { label: label.into(), times, values })
    }

    /// Sample `f` at `times`.
    pub fn from_fn(label: impl Into<String>, times: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(label, times, values)
    }

    /// Parse `time_s,value` rows; a non-numeric first line is taken as a header.
    pub fn from_csv(label: impl Into<String>, text: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::InvalidInput(format!("line {}: expected two columns", i + 1))),
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(t), Ok(v)) => {
                    times.push(t);
                    values.push(v);
                }
                _ if times.is_empty() && i == 0 => continue,
                _ => return Err(Error::InvalidInput(format!("line {}: not numeric", i + 1))),
            }
        }
        Self::new(label, times, values)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("time_s,value\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            s.push_str(&format!("{t:e},{v:e}\n"));
        }
        s
    }

    /// Subtract the least-squares polynomial of the given degree.
    pub fn detrended(&self, degree: usize) -> Result<Self> {
        let (t0, span) = (self.times[0], self.span());
        let n = self.times.len();
        let a = DMatrix::from_fn(n, degree + 1, |i, k| ((self.times[i] - t0) / span).powi(k as i32));
        let b = DVector::from_column_slice(&self.values);
        let c = a.clone().svd(true, true).solve(&b, 1e-12).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let fit = a * c;
        let values = self.values.iter().zip(fit.iter()).map(|(v, f)| v - f).collect();
        Self::new(self.label.clone(), self.times.clone(), values)
    }

    fn span(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    /// Times shifted to start at zero and scaled to unit span.
    fn unit_times(&self) -> Vec<f64> {
        let (t0, s) = (self.times[0], self.span());
        self.times.iter().map(|t| (t - t0) / s).collect()
    }
}

/// Parameters with their covariance, in the units of the parameter list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub names: Vec<String>,
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Root-mean-square residual.
    pub rms: f64,
    pub iterations: usize,
}

fn stats(res: &LsqResult, names: &[&str], scale: &[f64]) -> FitStats {
    let covariance = res
        .covariance()
        .map(|c| (0..c.nrows()).map(|i| (0..c.ncols()).map(|j| c[(i, j)] * scale[i] * scale[j]).collect()).collect());
    FitStats {
        names: names.iter().map(|s| s.to_string()).collect(),
        covariance,
        rms: (res.cost / res.residuals.len().max(1) as f64).sqrt(),
        iterations: res.iterations,
    }
}

fn diverged(what: &str, res: &LsqResult) -> Error {
    Error::FitDivergence(format!("{what}: cost {:.3e} after {} iterations", res.cost, res.iterations))
}

/// `(1 − e^{−xt})/x`, continuous at `x = 0`.
fn relax(x: f64, t: f64) -> f64 {
    if x == 0.0 {
        t
    } else {
        -(-x * t).exp_m1() / x
    }
}

/// Populations of `g, e, f` under the downward cascade with rates `(Γ_eg, Γ_fe, Γ_fg)`.
pub fn cascade_populations(rates: [f64; 3], p0: [f64; 3], t: f64) -> [f64; 3] {
    let [geg, gfe, gfg] = rates;
    let a = gfe + gfg;
    let pf = p0[2] * (-a * t).exp();
    // (e^{−at} − e^{−Γ_eg t})/(Γ_eg − a), factored around the slower exponential
    let feed = if geg >= a { (-a * t).exp() * relax(geg - a, t) } else { (-geg * t).exp() * relax(a - geg, t) };
    let pe = p0[1] * (-geg * t).exp() + gfe * p0[2] * feed;
    let total = p0[0] + p0[1] + p0[2];
    [total - pe - pf, pe, pf]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub gamma_eg: f64,
    pub gamma_fe: f64,
    pub gamma_fg: f64,
    pub initial: [f64; 3],
    pub stats: FitStats,
}

impl RateFit {
    pub fn populations(&self, t: f64) -> [f64; 3] {
        cascade_populations([self.gamma_eg, self.gamma_fe, self.gamma_fg], self.initial, t)
    }
}

/// Global fit of `P_g, P_e, P_f` traces to `exp(Γt) p₀` with non-negative rates.
///
/// `p₀` is the first sample of each trace.
pub fn fit_rate_equation(pg: &Trace, pe: &Trace, pf: &Trace) -> Result<RateFit> {
    if pg.times != pe.times || pg.times != pf.times {
        return Err(Error::InvalidInput("population traces must share time points".into()));
    }
    let span = pg.span();
    let ts = pg.unit_times();
    let p0 = [pg.values[0], pe.values[0], pf.values[0]];
    let f = |x: &[f64]| -> Vec<f64> {
        let mut r = Vec::with_capacity(3 * ts.len());
        for (k, &t) in ts.iter().enumerate() {
            let p = cascade_populations([x[0], x[1], x[2]], p0, t);
            r.push(p[0] - pg.values[k]);
            r.push(p[1] - pe.values[k]);
            r.push(p[2] - pf.values[k]);
        }
        r
    };
    let decay: Vec<(f64, f64)> =
        ts.iter().zip(&pf.values).filter(|(_, &v)| v > 0.05 * p0[2].max(1e-12)).map(|(&t, &v)| (t, v.ln())).collect();
    let a0 = if decay.len() >= 2 {
        let (t1, l1) = decay[decay.len() - 1];
        ((decay[0].1 - l1) / (t1 - decay[0].0)).max(0.1)
    } else {
        1.0
    };
    let mut starts = Vec::new();
    for m in [0.5, 1.0, 2.0] {
        starts.push(vec![a0 * m, a0, 0.0]);
        starts.push(vec![a0 * m, 0.8 * a0, 0.2 * a0]);
    }
    let bounds = Bounds::new(vec![0.0; 3], vec![1e4; 3])?;
    let res = multistart(&f, &starts, Some(&bounds), &LsqOptions::default())?;
    if !res.cost.is_finite() {
        return Err(diverged("rate equation", &res));
    }
    let s = 1.0 / span;
    Ok(RateFit {
        gamma_eg: res.x[0] * s,
        gamma_fe: res.x[1] * s,
        gamma_fg: res.x[2] * s,
        initial: p0,
        stats: stats(&res, &["gamma_eg", "gamma_fe", "gamma_fg"], &[s, s, s]),
    })
}

/// Magnitude-spectrum peaks of a uniformly sampled trace, strongest first, as `(frequency, magnitude)`.
///
/// Peaks within 2% in magnitude are ordered by frequency.
pub fn spectral_peaks(trace: &Trace) -> Result<Vec<(f64, f64)>> {
    let n = trace.times.len();
    let dt = trace.span() / (n - 1) as f64;
    let uniform = trace.times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-6 * dt);
    if !uniform {
        return Err(Error::InvalidInput("spectral initialization needs uniform sampling".into()));
    }
    let mean = trace.values.iter().sum::<f64>() / n as f64;
    let len = (16 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); len];
    for (i, v) in trace.values.iter().enumerate() {
        let w = 0.5 - 0.5 * (TAU * i as f64 / (n - 1) as f64).cos();
        buf[i] = Complex::new((v - mean) * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let mag: Vec<f64> = buf[..len / 2].iter().map(|z| z.norm()).collect();
    let df = 1.0 / (len as f64 * dt);
    let mut peaks: Vec<(f64, f64)> = (1..mag.len() - 1)
        .filter(|&k| mag[k] > mag[k - 1] && mag[k] >= mag[k + 1])
        .map(|k| {
            // parabolic interpolation on log magnitude
            let (a, b, c) = (mag[k - 1].max(1e-300).ln(), mag[k].ln(), mag[k + 1].max(1e-300).ln());
            let den = a - 2.0 * b + c;
            let off = if den.abs() > 1e-300 { 0.5 * (a - c) / den } else { 0.0 };
            ((k as f64 + off.clamp(-0.5, 0.5)) * df, mag[k])
        })
        .collect();
    peaks.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.total_cmp(&y.0)));
    // a pairwise 2% rule is not transitive; group against each group's strongest peak instead
    let mut out = Vec::with_capacity(peaks.len());
    let mut i = 0;
    while i < peaks.len() {
        let lead = peaks[i].1;
        let mut j = i + 1;
        while j < peaks.len() && lead - peaks[j].1 <= 0.02 * lead {
            j += 1;
        }
        let mut group = peaks[i..j].to_vec();
        group.sort_by(|x, y| x.0.total_cmp(&y.0));
        out.extend(group);
        i = j;
    }
    Ok(out)
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

/// Amplitudes of `y0 + e^{−κt} Σ (c_k cos ω_k t + s_k sin ω_k t)` for fixed `κ, ω`; returns the coefficients and cost.
fn linear_amplitudes(ts: &[f64], ys: &[f64], kappa: f64, omegas: &[f64]) -> (Vec<f64>, f64) {
    let n = ts.len();
    let cols = 1 + 2 * omegas.len();
    let a = DMatrix::from_fn(n, cols, |i, j| {
        let t = ts[i];
        if j == 0 {
            1.0
        } else {
            let w = omegas[(j - 1) / 2];
            let e = (-kappa * t).exp();
            if (j - 1) % 2 == 0 {
                e * (w * t).cos()
            } else {
                e * (w * t).sin()
            }
        }
    });
    let b = DVector::from_column_slice(ys);
    match a.clone().svd(true, true).solve(&b, 1e-12) {
        Ok(x) => {
            let cost = (a * &x - b).norm_squared();
            (x.iter().copied().collect(), cost)
        }
        Err(_) => (vec![0.0; cols], f64::INFINITY),
    }
}

/// Model `y0 + e^{−κt} Σ (c_k cos ω_k t + s_k sin ω_k t)` in unit time; parameters `[y0, κ, (c, s, ω)...]`.
fn damped_model(x: &[f64], t: f64) -> f64 {
    let e = (-x[1] * t).exp();
    let mut y = x[0];
    for k in 0..(x.len() - 2) / 3 {
        let (c, s, w) = (x[2 + 3 * k], x[3 + 3 * k], x[4 + 3 * k]);
        y += e * (c * (w * t).cos() + s * (w * t).sin());
    }
    y
}

struct Tones {
    y0: f64,
    kappa: f64,
    /// `(amplitude, phase, angular frequency)` per tone in unit time, referred to the first sample.
    tones: Vec<(f64, f64, f64)>,
    res: LsqResult,
}

fn fit_tones(ts: &[f64], ys: &[f64], omegas: &[f64]) -> Result<Tones> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for kappa in [0.0, 0.3, 1.0, 3.0, 10.0] {
        let (lin, cost) = linear_amplitudes(ts, ys, kappa, omegas);
        if best.as_ref().is_none_or(|b| cost < b.0) {
            let mut x = vec![lin[0], kappa];
            for (k, &w) in omegas.iter().enumerate() {
                x.extend([lin[1 + 2 * k], -lin[2 + 2 * k], w]);
            }
            best = Some((cost, x));
        }
    }
    let x0 = best.expect("non-empty grid").1;
    // the model uses c cos − s sin ⇒ flip the sine coefficient sign convention
    let f = |x: &[f64]| -> Vec<f64> {
        let mut xm = x.to_vec();
        for k in 0..(x.len() - 2) / 3 {
            xm[3 + 3 * k] = -x[3 + 3 * k];
        }
        ts.iter().zip(ys).map(|(&t, &y)| damped_model(&xm, t) - y).collect()
    };
    let mut lower = vec![f64::NEG_INFINITY, 0.0];
    let mut upper = vec![f64::INFINITY, 1e4];
    for _ in omegas {
        lower.extend([f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0]);
        upper.extend([f64::INFINITY, f64::INFINITY, f64::INFINITY]);
    }
    let bounds = Bounds::new(lower, upper)?;
    let res = levenberg_marquardt(&f, &x0, Some(&bounds), &LsqOptions::default())?;
    if !res.cost.is_finite() {
        return Err(diverged("damped sinusoid", &res));
    }
    let x = &res.x;
    let tones = (0..omegas.len())
        .map(|k| {
            let (c, s, w) = (x[2 + 3 * k], x[3 + 3 * k], x[4 + 3 * k]);
            // c cos ωt − s sin ωt = A cos(ωt + φ)
            ((c * c + s * s).sqrt(), s.atan2(c), w)
        })
        .collect();
    Ok(Tones { y0: x[0], kappa: x[1], tones, res })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyFit {
    pub t2_star: f64,
    pub y0: f64,
    /// Frequencies in Hz, lower first.
    pub f1: f64,
    pub f2: f64,
    pub a1: f64,
    pub a2: f64,
    pub phi1: f64,
    pub phi2: f64,
    /// Set when the second spectral peak was below the noise floor and `a2 = 0`.
    pub single_tone: bool,
    pub stats: FitStats,
}

impl RamseyFit {
    pub fn evaluate(&self, t: f64) -> f64 {
        let e = if self.t2_star.is_finite() { (-t / self.t2_star).exp() } else { 1.0 };
        self.y0
            + e * (self.a1 * (TAU * self.f1 * t + self.phi1).cos() + self.a2 * (TAU * self.f2 * t + self.phi2).cos())
    }
}

/// Refer `(A, φ)` fitted with time origin `t0` to absolute time.
fn to_absolute(a: f64, phi: f64, w_abs: f64, kappa_abs: f64, t0: f64) -> (f64, f64) {
    let phase = (phi - w_abs * t0).rem_euclid(TAU);
    let phase = if phase > std::f64::consts::PI { phase - TAU } else { phase };
    (a * (kappa_abs * t0).exp(), phase)
}

/// `y0 + e^{−t/T₂*}[A₁cos(2πf₁t+φ₁) + A₂cos(2πf₂t+φ₂)]`, frequencies seeded from the spectrum.
pub fn fit_ramsey(trace: &Trace) -> Result<RamseyFit> {
    let peaks = spectral_peaks(trace)?;
    if peaks.is_empty() {
        return Err(Error::FitDivergence("no spectral peak".into()));
    }
    let span = trace.span();
    let t0 = trace.times[0];
    let ts = trace.unit_times();
    let mut mags: Vec<f64> = peaks.iter().map(|p| p.1).collect();
    let floor = 6.0 * median(&mut mags);
    let first = peaks[0];
    let second = peaks.iter().skip(1).find(|p| (p.0 - first.0).abs() > 1.5 / span).copied();
    let two = matches!(second, Some(p) if p.1 > floor.max(0.1 * first.1));
    let w = |f: f64| TAU * f * span;
    let names2 = ["y0", "kappa", "c1", "s1", "w1", "c2", "s2", "w2"];
    let (fit, single) = if two {
        let p2 = second.expect("checked");
        let (lo, hi) = if first.0 <= p2.0 { (first.0, p2.0) } else { (p2.0, first.0) };
        (fit_tones(&ts, &trace.values, &[w(lo), w(hi)])?, false)
    } else {
        (fit_tones(&ts, &trace.values, &[w(first.0)])?, true)
    };
    let kappa = fit.kappa / span;
    let tone = |k: usize| {
        let (a, phi, wu) = fit.tones[k];
        let f = wu / (TAU * span);
        let (a, phi) = to_absolute(a, phi, TAU * f, kappa, t0);
        (a, phi, f)
    };
    let (a1, phi1, f1) = tone(0);
    let (a2, phi2, f2) = if single { (0.0, 0.0, 0.0) } else { tone(1) };
    let ((a1, phi1, f1), (a2, phi2, f2)) =
        if !single && f2 < f1 { ((a2, phi2, f2), (a1, phi1, f1)) } else { ((a1, phi1, f1), (a2, phi2, f2)) };
    let n = fit.res.x.len();
    let mut scale = vec![1.0, 1.0 / span];
    for _ in 0..(n - 2) / 3 {
        scale.extend([1.0, 1.0, 1.0 / (TAU * span)]);
    }
    Ok(RamseyFit {
        t2_star: if kappa > 0.0 { 1.0 / kappa } else { f64::INFINITY },
        y0: fit.y0,
        f1,
        f2,
        a1,
        a2,
        phi1,
        phi2,
        single_tone: single,
        stats: stats(&fit.res, &names2[..n], &scale),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiFit {
    /// Angular frequency (rad/s).
    pub omega: f64,
    pub y0: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub decay: f64,
    pub stats: FitStats,
}

/// `y0 + A e^{−κt} cos(Ωt + φ)`.
pub fn fit_rabi(trace: &Trace) -> Result<RabiFit> {
    let peaks = spectral_peaks(trace)?;
    let span = trace.span();
    let f0 = peaks.first().ok_or_else(|| Error::FitDivergence("no spectral peak".into()))?.0;
    let ts = trace.unit_times();
    let starts = [f0, f0 * 0.97, f0 * 1.03];
    let mut best: Option<Tones> = None;
    for f in starts {
        let t = fit_tones(&ts, &trace.values, &[TAU * f * span])?;
        if best.as_ref().is_none_or(|b| t.res.cost < b.res.cost) {
            best = Some(t);
        }
    }
    let fit = best.expect("non-empty starts");
    let (a, phi, wu) = fit.tones[0];
    let omega = wu / span;
    let kappa = fit.kappa / span;
    let (amplitude, phase) = to_absolute(a, phi, omega, kappa, trace.times[0]);
    if !(omega > 0.0) {
        return Err(diverged("rabi", &fit.res));
    }
    Ok(RabiFit {
        omega,
        y0: fit.y0,
        amplitude,
        phase,
        decay: kappa,
        stats: stats(&fit.res, &["y0", "kappa", "c", "s", "omega"], &[1.0, 1.0 / span, 1.0, 1.0, 1.0 / span]),
    })
}

/// Fitted oscillation frequency at one drive detuning (both rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChevronPoint {
    pub detuning: f64,
    pub rabi: f64,
}

impl ChevronPoint {
    pub fn new(detuning: f64, rabi: f64) -> Result<Self> {
        if !(rabi > 0.0) || !detuning.is_finite() {
            return Err(Error::InvalidInput(format!("Rabi frequency {rabi} must be positive")));
        }
        Ok(Self { detuning, rabi })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChevronFit {
    /// Resonance offset on the detuning axis (rad/s).
    pub center: f64,
    /// Effective coupling `g̃` (rad/s); on resonance `Ω_R = 2g̃`.
    pub coupling: f64,
    pub stats: FitStats,
}

/// `Ω_R = √((Δ − Δ₀)² + (2g̃)²)`.
pub fn chevron_rabi(detuning: f64, center: f64, coupling: f64) -> f64 {
    ((detuning - center).powi(2) + 4.0 * coupling * coupling).sqrt()
}

pub fn fit_chevron(points: &[ChevronPoint]) -> Result<ChevronFit> {
    if points.len() < 5 {
        return Err(Error::InvalidInput("chevron fit needs at least 5 points".into()));
    }
    if !(points.iter().any(|p| p.detuning < 0.0) && points.iter().any(|p| p.detuning > 0.0)) {
        return Err(Error::InvalidInput("chevron points must span both signs of detuning".into()));
    }
    let scale = points.iter().map(|p| p.rabi).fold(0.0, f64::max);
    let d: Vec<f64> = points.iter().map(|p| p.detuning / scale).collect();
    let r: Vec<f64> = points.iter().map(|p| p.rabi / scale).collect();
    // Ω² − Δ² = −2Δ₀Δ + (Δ₀² + 4g²) is linear in Δ
    let a = DMatrix::from_fn(d.len(), 2, |i, j| if j == 0 { 1.0 } else { d[i] });
    let b = DVector::from_iterator(d.len(), d.iter().zip(&r).map(|(x, y)| y * y - x * x));
    let lin = a.svd(true, true).solve(&b, 1e-14).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let c0 = -0.5 * lin[1];
    let g0 = ((lin[0] - c0 * c0).max(1e-6)).sqrt() / 2.0;
    let f = |x: &[f64]| -> Vec<f64> { d.iter().zip(&r).map(|(&di, &ri)| chevron_rabi(di, x[0], x[1]) - ri).collect() };
    let bounds = Bounds::new(vec![f64::NEG_INFINITY, 0.0], vec![f64::INFINITY, f64::INFINITY])?;
    let starts = [vec![c0, g0], vec![0.0, 0.5 * r.iter().cloned().fold(f64::INFINITY, f64::min)]];
    let res = multistart(&f, &starts, Some(&bounds), &LsqOptions::default())?;
    if !res.cost.is_finite() || !(res.x[1] > 0.0) {
        return Err(diverged("chevron", &res));
    }
    Ok(ChevronFit {
        center: res.x[0] * scale,
        coupling: res.x[1] * scale,
        stats: stats(&res, &["center", "coupling"], &[scale, scale]),
    })
}
