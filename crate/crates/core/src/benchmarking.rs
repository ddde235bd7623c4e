//! Clifford randomized benchmarking with the single-loop gate set.

use nalgebra::DVector;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{channel, content_key, PropagatorCache, Superoperator, DEFAULT_STEPS};
use crate::holonomic::{clifford_table, find_clifford, named_gate, synthesize_qubit_gate, target_u1, HolonomicParams};
use crate::lsq::{multistart, Bounds, LsqOptions};
use crate::model::{collapse_operators, ControlError, NoiseModel};
use crate::operators::{identity, ComplexMatrix, G};
use crate::pulses::Envelope;

#[derive(Debug, Clone, PartialEq)]
pub struct RbConfig {
    pub lengths: Vec<usize>,
    pub randomizations: usize,
    pub seed: u64,
    /// Gate inserted after every Clifford in the interleaved experiment.
    pub interleaved: Option<String>,
    pub noise: NoiseModel<f64>,
    pub error: ControlError<f64>,
    /// Extra depolarizing strength appended after every gate.
    pub depolarizing: Option<f64>,
    pub envelope: Envelope<f64>,
    pub steps: usize,
}

impl RbConfig {
    /// Lengths 1..=20, 100 sequences each, noiseless 120 ns gates.
    pub fn new(seed: u64) -> Self {
        Self {
            lengths: (1..=20).collect(),
            randomizations: 100,
            seed,
            interleaved: None,
            noise: NoiseModel::none(),
            error: ControlError::none(),
            depolarizing: None,
            envelope: Envelope::gaussian(30e-9, 1.0).expect("positive width"),
            steps: DEFAULT_STEPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() || self.lengths.contains(&0) {
            return Err(Error::InvalidInput("sequence lengths must be at least 1".into()));
        }
        if self.randomizations == 0 {
            return Err(Error::InvalidInput("at least one randomization is required".into()));
        }
        if let Some(d) = self.depolarizing {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::InvalidInput(format!("depolarizing strength {d} outside [0, 1]")));
            }
        }
        self.noise.validate()
    }
}

/// Fitted `F = A pᵐ + B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbFit {
    pub a: f64,
    pub p: f64,
    pub b: f64,
    pub p_stderr: Option<f64>,
    pub f_avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbRecord {
    pub lengths: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub randomizations: usize,
    pub fit: RbFit,
    /// True when every mean is within 1e-6 of unity and `p = 1` was set without fitting.
    pub saturated: bool,
}

impl RbRecord {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,mean,stddev,k\n");
        for ((m, mean), sd) in self.lengths.iter().zip(&self.means).zip(&self.stds) {
            s.push_str(&format!("{m},{mean:.12e},{sd:.12e},{}\n", self.randomizations));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbOutcome {
    pub reference: RbRecord,
    pub interleaved: Option<RbRecord>,
    pub gate: Option<String>,
    pub f_gate: Option<f64>,
}

/// `1 − (1 − p)/2`.
pub fn average_fidelity(p: f64) -> f64 {
    1.0 - (1.0 - p) / 2.0
}

/// `1 − (1 − p_gate/p_ref)/2`.
pub fn interleaved_fidelity(p_gate: f64, p_ref: f64) -> Result<f64> {
    if !(p_ref > 0.0 && p_ref <= 1.0) || !(p_gate > 0.0 && p_gate <= p_ref * (1.0 + 1e-6)) {
        return Err(Error::RatioOutOfRange(p_gate / p_ref));
    }
    Ok(1.0 - (1.0 - p_gate / p_ref) / 2.0)
}

/// Least-squares fit of `A pᵐ + B`.
pub fn fit_rb(lengths: &[usize], means: &[f64]) -> Result<RbFit> {
    if lengths.len() != means.len() {
        return Err(Error::DimensionMismatch(lengths.len(), means.len()));
    }
    let mut distinct = lengths.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidInput("at least three distinct lengths are required".into()));
    }
    let max = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = means.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max - min > 1e-12) {
        return Err(Error::Unidentifiable("survival is flat; decay constant has no support".into()));
    }
    let (a0, b0) = (max - min, min);
    let pts: Vec<(f64, f64)> = lengths
        .iter()
        .zip(means)
        .filter(|(_, &y)| y - b0 > 1e-3 * a0)
        .map(|(&m, &y)| (m as f64, (y - b0).ln()))
        .collect();
    let p0 = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
        let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        slope.exp().clamp(0.05, 0.999_999)
    } else {
        0.9
    };
    let f = |x: &[f64]| -> Vec<f64> {
        lengths.iter().zip(means).map(|(&m, &y)| x[0] * x[1].powi(m as i32) + x[2] - y).collect()
    };
    let bounds = Bounds::new(vec![-2.0, 0.0, -1.0], vec![2.0, 1.0, 2.0])?;
    let starts = [vec![a0, p0, b0], vec![a0, p0, 0.5 * (max + min) - 0.5 * a0]];
    let res = multistart(&f, &starts, Some(&bounds), &LsqOptions::default())?;
    let (a, p, b) = (res.x[0], res.x[1], res.x[2]);
    if !(p > 0.0 && p <= 1.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::FitDivergence(format!("A = {a}, p = {p}, B = {b}, cost = {}", res.cost)));
    }
    let p_stderr = res.std_errors().map(|s| s[1]);
    Ok(RbFit { a, p, b, p_stderr, f_avg: average_fidelity(p) })
}

/// Draw `m` Cliffords and the recovery element, as table indices.
pub fn random_sequence(
    m: usize,
    rng: &mut impl Rng,
    table: &[ComplexMatrix<f64>],
    interleaved: Option<&ComplexMatrix<f64>>,
) -> Result<(Vec<usize>, usize)> {
    let seq: Vec<usize> = (0..m).map(|_| rng.random_range(0..table.len())).collect();
    let recovery = recovery_index(&seq, table, interleaved)?;
    Ok((seq, recovery))
}

/// Table element whose unitary inverts the composed sequence.
pub fn recovery_index(
    seq: &[usize],
    table: &[ComplexMatrix<f64>],
    interleaved: Option<&ComplexMatrix<f64>>,
) -> Result<usize> {
    let mut prod = identity::<f64>(2);
    for &k in seq {
        prod = &table[k] * prod;
        if let Some(g) = interleaved {
            prod = g * prod;
        }
    }
    find_clifford(table, &prod.adjoint()).ok_or_else(|| Error::InvalidInput("sequence left the Clifford group".into()))
}

/// Noisy channels of the Clifford table and named gates, computed once per configuration.
pub struct GateSet {
    noise: NoiseModel<f64>,
    error: ControlError<f64>,
    depolarizing: Option<f64>,
    envelope: Envelope<f64>,
    steps: usize,
    cache: PropagatorCache<Superoperator<f64>>,
}

impl GateSet {
    pub fn new(cfg: &RbConfig) -> Self {
        Self {
            noise: cfg.noise,
            error: cfg.error,
            depolarizing: cfg.depolarizing,
            envelope: cfg.envelope,
            steps: cfg.steps,
            cache: PropagatorCache::new(),
        }
    }

    fn key(&self, p: &HolonomicParams<f64>) -> Result<[u8; 32]> {
        let sched = synthesize_qubit_gate(p, &self.envelope)?;
        let n = &self.noise;
        let nums: Vec<u8> = [
            n.gamma_eg,
            n.gamma_fe,
            n.gamma_fg,
            n.gamma_phi_ge,
            n.gamma_phi_ef,
            self.error.epsilon,
            self.error.detuning,
            self.depolarizing.unwrap_or(-1.0),
            self.steps as f64,
        ]
        .iter()
        .flat_map(|x| x.to_le_bytes())
        .collect();
        Ok(content_key(&[&sched.content_key(), &nums]))
    }

    /// Channel of one single-loop gate.
    pub fn channel(&self, p: &HolonomicParams<f64>) -> Result<std::sync::Arc<Superoperator<f64>>> {
        let key = self.key(p)?;
        self.cache.get_or_compute(key, || {
            let sched = synthesize_qubit_gate(p, &self.envelope)?;
            let drive = sched.drive(&self.error)?;
            let jumps: Vec<_> = collapse_operators(&self.noise)?.iter().map(|c| c.weighted()).collect();
            let mut s = channel(&drive, &jumps, &sched.grid(self.steps)?)?;
            if let Some(d) = self.depolarizing {
                s = s.then(&Superoperator::depolarizing(3, d));
            }
            Ok(s)
        })
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }
}

fn survival(
    seq: &[usize],
    recovery: usize,
    table: &[std::sync::Arc<Superoperator<f64>>],
    extra: Option<&Superoperator<f64>>,
) -> f64 {
    let mut v = DVector::<Complex<f64>>::zeros(9);
    v[G * 3 + G] = Complex::new(1.0, 0.0);
    for &k in seq {
        v = &table[k].matrix * v;
        if let Some(g) = extra {
            v = &g.matrix * v;
        }
    }
    v = &table[recovery].matrix * v;
    v[G * 3 + G].re
}

fn summarize(lengths: &[usize], survivals: &[Vec<f64>], k: usize) -> Result<RbRecord> {
    let means: Vec<f64> = survivals.iter().map(|s| s.iter().sum::<f64>() / s.len() as f64).collect();
    let stds: Vec<f64> = survivals
        .iter()
        .zip(&means)
        .map(|(s, m)| {
            if s.len() < 2 {
                0.0
            } else {
                (s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (s.len() - 1) as f64).sqrt()
            }
        })
        .collect();
    let saturated = means.iter().all(|&m| m >= 1.0 - 1e-6);
    let fit = if saturated {
        let b = means.iter().sum::<f64>() / means.len() as f64;
        RbFit { a: 0.0, p: 1.0, b, p_stderr: None, f_avg: 1.0 }
    } else {
        fit_rb(lengths, &means)?
    };
    Ok(RbRecord { lengths: lengths.to_vec(), means, stds, randomizations: k, fit, saturated })
}

/// Raw survivals `[length][sequence]` for the reference and, if configured, interleaved experiments.
pub fn rb_survivals(cfg: &RbConfig, gates: &GateSet) -> Result<(Vec<Vec<f64>>, Option<Vec<Vec<f64>>>)> {
    cfg.validate()?;
    let params = clifford_table::<f64>();
    let ideal: Vec<_> = params.iter().map(target_u1).collect();
    let channels = params.par_iter().map(|p| gates.channel(p)).collect::<Result<Vec<_>>>()?;
    let inter = match &cfg.interleaved {
        Some(name) => {
            let p = named_gate::<f64>(name).ok_or_else(|| Error::InvalidInput(format!("unknown gate {name}")))?;
            let u = target_u1(&p);
            if find_clifford(&ideal, &u).is_none() {
                return Err(Error::InvalidInput(format!("{name} is not a Clifford")));
            }
            Some((u, gates.channel(&p)?))
        }
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draws = Vec::new();
    for &m in &cfg.lengths {
        for _ in 0..cfg.randomizations {
            let seq: Vec<usize> = (0..m).map(|_| rng.random_range(0..ideal.len())).collect();
            draws.push(seq);
        }
    }
    let run = |extra: Option<(&ComplexMatrix<f64>, &Superoperator<f64>)>| -> Result<Vec<Vec<f64>>> {
        let flat = draws
            .par_iter()
            .map(|seq| {
                let rec = recovery_index(seq, &ideal, extra.map(|e| e.0))?;
                Ok(survival(seq, rec, &channels, extra.map(|e| e.1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(flat.chunks(cfg.randomizations).map(|c| c.to_vec()).collect())
    };
    let reference = run(None)?;
    let interleaved = match &inter {
        Some((u, ch)) => Some(run(Some((u, ch.as_ref())))?),
        None => None,
    };
    Ok((reference, interleaved))
}

/// Reference and optional interleaved benchmarking.
pub fn run_rb(cfg: &RbConfig) -> Result<RbOutcome> {
    let gates = GateSet::new(cfg);
    run_rb_with(cfg, &gates)
}

/// As [`run_rb`], reusing cached channels.
pub fn run_rb_with(cfg: &RbConfig, gates: &GateSet) -> Result<RbOutcome> {
    let (reference, interleaved) = rb_survivals(cfg, gates)?;
    let reference = summarize(&cfg.lengths, &reference, cfg.randomizations)?;
    let interleaved = interleaved.map(|s| summarize(&cfg.lengths, &s, cfg.randomizations)).transpose()?;
    let f_gate = match &interleaved {
        Some(rec) => Some(interleaved_fidelity(rec.fit.p, reference.fit.p)?),
        None => None,
    };
    Ok(RbOutcome { reference, interleaved, gate: cfg.interleaved.clone(), f_gate })
}
