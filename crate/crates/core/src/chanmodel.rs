//! Jakes spatial correlation for the FAS ports, its eigen-spectrum, and the
//! per-hop SNR distribution functions.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::special::{bessel_j0, gamma_p_int};

pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-9;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        CorrelationMatrix { n, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.get(i, j).powi(2);
                }
            }
        }
        s.sqrt()
    }

    fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `J_{mn} = J0(2πW (m - n) / (N - 1))`; `N = 1` gives `[1]`.
pub fn jakes_matrix(n: usize, aperture: f64) -> CorrelationMatrix {
    if n <= 1 {
        return CorrelationMatrix::identity(1);
    }
    let scale = 2.0 * PI * aperture / (n - 1) as f64;
    CorrelationMatrix::from_fn(n, |i, j| {
        if i == j {
            1.0
        } else {
            bessel_j0(scale * (i as f64 - j as f64))
        }
    })
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors stored as columns
/// of a row-major `n × n` buffer, unsorted.
pub fn symmetric_eigen(a: &CorrelationMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.dim();
    let mut m = a.clone();
    let mut v = CorrelationMatrix::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut sweeps = 0;
    while m.off_diagonal_norm() > 1e-15 * scale {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNoConvergence {
                sweeps,
                residual: m.off_diagonal_norm(),
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
        sweeps += 1;
    }
    let values = (0..n).map(|i| m.get(i, i)).collect();
    Ok((values, v.data))
}

/// Eigen-spectrum of the port correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FasSpectrum {
    pub n_ports: usize,
    /// Aperture in wavelengths; `None` when built from a raw matrix or spectrum.
    pub aperture: Option<f64>,
    /// All `N` eigenvalues, clipped at zero and sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors matching `eigenvalues`, one `Vec` per eigenvalue.
    pub eigenvectors: Vec<Vec<f64>>,
    pub n_eff: usize,
    pub rank_tolerance: f64,
}

impl FasSpectrum {
    /// Spectrum of the Jakes matrix for `n` ports over `aperture` wavelengths.
    pub fn new(n: usize, aperture: f64, rank_tolerance: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("port count must be at least 1"));
        }
        if !(aperture > 0.0) {
            return Err(Error::invalid(format!("aperture must be positive, got {aperture}")));
        }
        let mut s = eigen_spectrum(&jakes_matrix(n, aperture), rank_tolerance)?;
        s.aperture = Some(aperture);
        Ok(s)
    }

    /// Single fixed-position antenna.
    pub fn fixed_position() -> Self {
        Self::from_eigenvalues(vec![1.0], DEFAULT_RANK_TOLERANCE)
    }

    /// Spectrum with prescribed eigenvalues and canonical-basis eigenvectors.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, rank_tolerance: f64) -> Self {
        for l in eigenvalues.iter_mut() {
            *l = l.max(0.0);
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let n = eigenvalues.len();
        let eigenvectors = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let n_eff = count_retained(&eigenvalues, rank_tolerance);
        FasSpectrum {
            n_ports: n,
            aperture: None,
            eigenvalues,
            eigenvectors,
            n_eff,
            rank_tolerance,
        }
    }

    /// The `n_eff` leading eigenvalues treated as diversity branches.
    pub fn retained(&self) -> &[f64] {
        &self.eigenvalues[..self.n_eff]
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

fn count_retained(sorted: &[f64], tol: f64) -> usize {
    let lead = sorted.first().copied().unwrap_or(0.0);
    sorted.iter().filter(|&&l| l > tol * lead).count().max(1)
}

pub fn eigen_spectrum(j: &CorrelationMatrix, rank_tolerance: f64) -> Result<FasSpectrum> {
    if !j.is_symmetric(1e-12) {
        return Err(Error::domain("correlation matrix is not symmetric"));
    }
    let n = j.dim();
    let (values, vectors) = symmetric_eigen(j)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i].max(0.0)).collect();
    let eigenvectors = order
        .iter()
        .map(|&c| (0..n).map(|r| vectors[r * n + c]).collect())
        .collect();
    let n_eff = count_retained(&eigenvalues, rank_tolerance);
    Ok(FasSpectrum {
        n_ports: n,
        aperture: None,
        eigenvalues,
        eigenvectors,
        n_eff,
        rank_tolerance,
    })
}

/// First-hop SNR CDF `P(m, xϑ)`.
pub fn cdf_hop1(x: f64, vartheta: f64, m: u32) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::domain(format!("SNR must be non-negative, got {x}")));
    }
    Ok(gamma_p_int(m, x * vartheta))
}

/// Second-hop SNR CDF `Π_n P(m, xϑ/λ_n)` under selection over the branches.
pub fn cdf_hop2(x: f64, vartheta: f64, m: u32, lambdas: &[f64]) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::domain(format!("SNR must be non-negative, got {x}")));
    }
    if lambdas.is_empty() {
        return Err(Error::domain("no eigenvalue branches"));
    }
    Ok(lambdas
        .iter()
        .map(|&l| gamma_p_int(m, x * vartheta / l))
        .product())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const J0_PI: f64 = -0.304_242_177_644_093_9;
    const J0_HALF_PI: f64 = 0.472_001_215_768_234_7;

    #[test]
    fn jakes_entries() {
        let j = jakes_matrix(2, 0.5);
        assert_eq!(j.get(0, 0), 1.0);
        assert_relative_eq!(j.get(0, 1), J0_PI, max_relative = 1e-13);
        let j = jakes_matrix(3, 0.5);
        assert_relative_eq!(j.get(0, 1), J0_HALF_PI, max_relative = 1e-13);
        assert_relative_eq!(j.get(2, 0), J0_PI, max_relative = 1e-13);
        assert_eq!(jakes_matrix(1, 3.0), CorrelationMatrix::identity(1));
    }

    #[test]
    fn identity_and_all_ones_spectra() {
        let s = eigen_spectrum(&CorrelationMatrix::identity(4), 1e-9).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0; 4]);
        assert_eq!(s.n_eff, 4);
        let ones = CorrelationMatrix::from_fn(5, |_, _| 1.0);
        let s = eigen_spectrum(&ones, 1e-9).unwrap();
        assert_relative_eq!(s.eigenvalues[0], 5.0, max_relative = 1e-13);
        assert!(s.eigenvalues[1..].iter().all(|&l| l < 1e-13));
        assert_eq!(s.n_eff, 1);
    }

    #[test]
    fn two_port_half_wavelength() {
        let s = FasSpectrum::new(2, 0.5, 1e-9).unwrap();
        assert_relative_eq!(s.eigenvalues[0], 1.0 - J0_PI, max_relative = 1e-13);
        assert_relative_eq!(s.eigenvalues[1], 1.0 + J0_PI, max_relative = 1e-13);
        assert_eq!(s.n_eff, 2);
        assert_eq!(s.aperture, Some(0.5));
    }

    #[test]
    fn trace_and_reconstruction() {
        for &(n, w) in &[(8usize, 0.5), (8, 4.0), (20, 1.0), (3, 2.0)] {
            let j = jakes_matrix(n, w);
            let s = eigen_spectrum(&j, 1e-9).unwrap();
            assert!((s.trace() - n as f64).abs() < 1e-10 * n as f64);
            for r in 0..n {
                for c in 0..n {
                    let rebuilt: f64 = (0..n)
                        .map(|k| s.eigenvalues[k] * s.eigenvectors[k][r] * s.eigenvectors[k][c])
                        .sum();
                    assert!((rebuilt - j.get(r, c)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn small_aperture_truncates_rank() {
        let s = FasSpectrum::new(8, 0.5, 1e-9).unwrap();
        assert!(s.n_eff < 8);
        assert!(s.retained().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(cdf_hop1(0.0, 1.0, 3).unwrap(), 0.0);
        assert_relative_eq!(cdf_hop1(1.0, 1.0, 1).unwrap(), 1.0 - (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(cdf_hop1(1.0, 1.0, 2).unwrap(), 1.0 - 2.0 * (-1.0f64).exp(), max_relative = 1e-14);
        let e = 1.0 - (-1.0f64).exp();
        assert_relative_eq!(cdf_hop2(1.0, 1.0, 1, &[1.0, 1.0]).unwrap(), e * e, max_relative = 1e-14);
        assert_eq!(
            cdf_hop2(0.7, 2.0, 3, &[1.0]).unwrap(),
            cdf_hop1(0.7, 2.0, 3).unwrap()
        );
        assert!(cdf_hop1(-1.0, 1.0, 1).is_err());
        assert!(cdf_hop2(1.0, 1.0, 1, &[]).is_err());
    }
}
