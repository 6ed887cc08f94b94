//! Frequency analysis of sinusoids on a cycle graph.
//!
//! On the `n`-cycle the normalized Laplacian `I − A/2` has eigenvalues
//! `1 − cos(2πj/n)`, so `sin(πt/10)` and `sin(7πt/10)` are pure harmonics
//! whenever `n` is a multiple of 20 and occupy disjoint eigenspaces.

use std::f64::consts::PI;
use std::io::Write;
use std::str::FromStr;

use ndarray::{Array1, Array2};

use super::gft_1d;
use crate::error::{invalid, Result};
use crate::linalg::{dense_symmetric_eig, SparseSymmetricOperator, SpectralBasis};

/// Frequencies closer than this belong to the same eigenspace.
const EIGENSPACE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DemoSignal {
    /// `sin(π t / 10)`
    Low,
    /// `sin(7π t / 10)`
    High,
    /// Sum of both.
    Mixed,
}

impl FromStr for DemoSignal {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s1" => Ok(Self::Low),
            "s2" => Ok(Self::High),
            "s3" => Ok(Self::Mixed),
            other => Err(invalid(format!("unknown signal {other:?}, expected s1, s2 or s3"))),
        }
    }
}

impl DemoSignal {
    pub fn sample(self, n: usize) -> Array1<f64> {
        Array1::from_iter((0..n).map(|t| {
            let t = t as f64;
            let low = (PI * t / 10.0).sin();
            let high = (7.0 * PI * t / 10.0).sin();
            match self {
                Self::Low => low,
                Self::High => high,
                Self::Mixed => low + high,
            }
        }))
    }

    /// The frequency `1 − cos(ω)` a pure component sits at, if any.
    pub fn frequency(self) -> Option<f64> {
        match self {
            Self::Low => Some(1.0 - (PI / 10.0).cos()),
            Self::High => Some(1.0 - (7.0 * PI / 10.0).cos()),
            Self::Mixed => None,
        }
    }
}

/// `I − A/2` for the cycle on `n` nodes.
pub fn cycle_laplacian(n: usize) -> Result<SparseSymmetricOperator> {
    if n < 3 {
        return Err(invalid("cycle needs at least 3 nodes"));
    }
    let mut a = Array2::eye(n);
    for i in 0..n {
        let j = (i + 1) % n;
        a[[i, j]] -= 0.5;
        a[[j, i]] -= 0.5;
    }
    SparseSymmetricOperator::from_dense(a)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumRow {
    pub index: usize,
    pub frequency: f64,
    pub magnitude: f64,
}

#[derive(Clone, Debug)]
pub struct DemoOutcome {
    pub signal: Array1<f64>,
    pub basis: SpectralBasis,
    pub spectrum: Array1<f64>,
    /// Inverse transform of the gated spectrum.
    pub filtered: Array1<f64>,
    /// `‖filtered − s1‖ / ‖s1‖` for the mixed signal.
    pub reconstruction_error: Option<f64>,
}

impl DemoOutcome {
    pub fn rows(&self) -> Vec<SpectrumRow> {
        self.basis
            .frequencies()
            .iter()
            .zip(self.spectrum.iter())
            .enumerate()
            .map(|(index, (&frequency, s))| SpectrumRow { index, frequency, magnitude: s.abs() })
            .collect()
    }

    /// Share of spectral energy in the eigenspace at `frequency`.
    pub fn energy_fraction_at(&self, frequency: f64) -> f64 {
        energy_fraction(&self.spectrum, self.basis.frequencies(), frequency)
    }
}

pub fn energy_fraction(spectrum: &Array1<f64>, frequencies: &[f64], frequency: f64) -> f64 {
    let total: f64 = spectrum.iter().map(|s| s * s).sum();
    let inside: f64 = spectrum
        .iter()
        .zip(frequencies)
        .filter(|(_, f)| (*f - frequency).abs() < EIGENSPACE_TOL)
        .map(|(s, _)| s * s)
        .sum();
    inside / total
}

/// Keeps spectral components with frequency at most `cutoff` and inverts.
pub fn lowpass_1d(spectrum: &Array1<f64>, basis: &SpectralBasis, cutoff: f64) -> Array1<f64> {
    let gated = Array1::from_iter(
        spectrum
            .iter()
            .zip(basis.frequencies())
            .map(|(s, f)| if *f <= cutoff + EIGENSPACE_TOL { *s } else { 0.0 }),
    );
    basis.vectors().dot(&gated)
}

/// Runs the cycle demo. `passband` is the retained share of the frequency
/// range `[0, λ_max]`.
pub fn run_demo(n: usize, signal: DemoSignal, passband: f64) -> Result<DemoOutcome> {
    if n == 0 || !n.is_multiple_of(20) {
        return Err(invalid(format!("cycle length {n} must be a positive multiple of 20")));
    }
    if !(0.0..=1.0).contains(&passband) {
        return Err(invalid(format!("passband {passband} outside [0, 1]")));
    }
    let op = cycle_laplacian(n)?;
    let basis = dense_symmetric_eig(op.to_dense()?.view())?;
    let s = signal.sample(n);
    let spectrum = gft_1d(s.view(), &basis)?;
    let top = *basis.frequencies().last().expect("non-empty");
    let filtered = lowpass_1d(&spectrum, &basis, passband * top);
    let reconstruction_error = (signal == DemoSignal::Mixed).then(|| {
        let reference = DemoSignal::Low.sample(n);
        let diff = &filtered - &reference;
        diff.dot(&diff).sqrt() / reference.dot(&reference).sqrt()
    });
    Ok(DemoOutcome { signal: s, basis, spectrum, filtered, reconstruction_error })
}

/// Writes `index,frequency,magnitude` rows.
pub fn write_spectrum_csv<W: Write>(mut out: W, rows: &[SpectrumRow]) -> Result<()> {
    writeln!(out, "index,frequency,magnitude")?;
    for row in rows {
        writeln!(out, "{},{},{}", row.index, row.frequency, row.magnitude)?;
    }
    Ok(())
}
