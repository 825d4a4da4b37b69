//! Monte Carlo reference engine: samples channel gains directly and averages
//! the exact instantaneous BLER, sharing no code path with the closed forms.
//!
//! Randomness comes from ChaCha8 with an explicit 64-bit seed. Trials are
//! split into batches of `McConfig::batch`; batch `i` draws from stream `i`
//! of the seeded generator, so results do not depend on thread count.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::blercore::{e2e_bler, instantaneous_bler, FblParams};
use crate::chanmodel::{eigen_spectrum, CorrelationMatrix, FasSpectrum};
use crate::error::{Error, Result};
use crate::geometry::{hop_geometry, path_loss_coeff, Hop, LinkType, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum McMode {
    /// Independent branches scaled by the retained eigenvalues.
    #[default]
    Model,
    /// Correlated ports colored by `U Λ^{1/2}`.
    Physical,
}

impl McMode {
    pub fn name(self) -> &'static str {
        match self {
            McMode::Model => "model",
            McMode::Physical => "physical",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "model" => Some(McMode::Model),
            "physical" => Some(McMode::Physical),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct McConfig {
    pub seed: u64,
    pub trials: u64,
    pub mode: McMode,
    pub batch: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            seed: 1,
            trials: 1_000_000,
            mode: McMode::Model,
            batch: 65_536,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("Monte Carlo trials must be positive"));
        }
        if self.batch == 0 {
            return Err(Error::invalid("Monte Carlo batch size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Population standard deviation over `√trials`.
    pub std_error: f64,
    pub trials: u64,
}

/// Streaming first and second moments, merged in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Moments {
            n,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.n as f64 * w,
        }
    }

    fn estimate(self) -> McEstimate {
        let var = if self.n > 0 { self.m2 / self.n as f64 } else { 0.0 };
        McEstimate {
            mean: self.mean,
            std_error: (var.max(0.0) / self.n as f64).sqrt(),
            trials: self.n,
        }
    }
}

/// Unit-mean Gamma(m, 1/m) draw as a sum of `m` exponentials.
pub fn sample_hop1_gain<R: Rng + ?Sized>(m: u32, rng: &mut R) -> f64 {
    let s: f64 = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).sum();
    s / f64::from(m)
}

/// `max_n λ_n |g_n|²` over independent unit-mean Gamma branches.
pub fn sample_fas_gain_model<R: Rng + ?Sized>(m: u32, lambdas: &[f64], rng: &mut R) -> f64 {
    lambdas
        .iter()
        .map(|&l| l * sample_hop1_gain(m, rng))
        .fold(0.0, f64::max)
}

/// Coloring matrix `U Λ^{1/2}` of a port correlation matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PortColoring {
    n: usize,
    a: Vec<f64>,
}

impl PortColoring {
    pub fn new(j: &CorrelationMatrix) -> Result<Self> {
        Ok(Self::from_spectrum(&eigen_spectrum(j, 0.0)?))
    }

    pub fn from_spectrum(s: &FasSpectrum) -> Self {
        let n = s.n_ports;
        let mut a = vec![0.0; n * n];
        for (k, (&l, v)) in s.eigenvalues.iter().zip(&s.eigenvectors).enumerate() {
            let r = l.sqrt();
            for row in 0..n {
                a[row * n + k] = v[row] * r;
            }
        }
        PortColoring { n, a }
    }

    pub fn ports(&self) -> usize {
        self.n
    }

    /// Per-port powers `|h_n|²` of one colored `CN(0, J)` draw.
    pub fn port_powers<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.n;
        let g: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                (re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
            })
            .collect();
        for (row, o) in out.iter_mut().enumerate().take(n) {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &(gr, gi)) in g.iter().enumerate() {
                let c = self.a[row * n + k];
                re += c * gr;
                im += c * gi;
            }
            *o = re * re + im * im;
        }
    }
}

/// Selected port gain with correlated ports: per port, the mean of `m`
/// independent colored draws of `|h_n|²`, then the maximum over ports.
pub fn sample_fas_gain_physical<R: Rng + ?Sized>(m: u32, coloring: &PortColoring, rng: &mut R) -> f64 {
    let n = coloring.ports();
    let mut acc = vec![0.0; n];
    let mut draw = vec![0.0; n];
    for _ in 0..m {
        coloring.port_powers(rng, &mut draw);
        for (a, d) in acc.iter_mut().zip(&draw) {
            *a += d;
        }
    }
    acc.iter().map(|a| a / f64::from(m)).fold(0.0, f64::max)
}

/// Source of small-scale power gains for each hop.
pub trait ChannelDraw: Sync {
    fn hop1_gain(&self, m: u32, rng: &mut ChaCha8Rng) -> f64;
    fn hop2_gain(&self, m: u32, rng: &mut ChaCha8Rng) -> f64;
}

/// Nakagami fading on hop 1 and FAS selection on hop 2.
#[derive(Debug, Clone)]
pub struct FadingDraw {
    lambdas: Vec<f64>,
    coloring: Option<PortColoring>,
}

impl FadingDraw {
    pub fn new(fas: &FasSpectrum, mode: McMode) -> Self {
        FadingDraw {
            lambdas: fas.retained().to_vec(),
            coloring: (mode == McMode::Physical).then(|| PortColoring::from_spectrum(fas)),
        }
    }
}

impl ChannelDraw for FadingDraw {
    fn hop1_gain(&self, m: u32, rng: &mut ChaCha8Rng) -> f64 {
        sample_hop1_gain(m, rng)
    }

    fn hop2_gain(&self, m: u32, rng: &mut ChaCha8Rng) -> f64 {
        match &self.coloring {
            Some(c) => sample_fas_gain_physical(m, c, rng),
            None => sample_fas_gain_model(m, &self.lambdas, rng),
        }
    }
}

/// Deterministic gains, bypassing fading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedGain {
    pub hop1: f64,
    pub hop2: f64,
}

impl ChannelDraw for FixedGain {
    fn hop1_gain(&self, _m: u32, _rng: &mut ChaCha8Rng) -> f64 {
        self.hop1
    }

    fn hop2_gain(&self, _m: u32, _rng: &mut ChaCha8Rng) -> f64 {
        self.hop2
    }
}

/// Generator for batch `index` of a run seeded with `seed`.
pub fn batch_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// SplitMix64 mix of `seed` and `index`, for independent per-task seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trajectory- and fading-averaged end-to-end BLER with exact Q-function.
pub fn mc_average_bler(
    cfg: &ScenarioConfig,
    fas: &FasSpectrum,
    fbl: &FblParams,
    p2: f64,
    mc: &McConfig,
) -> Result<McEstimate> {
    mc_average_bler_with(cfg, fbl, p2, mc, &FadingDraw::new(fas, mc.mode))
}

/// [`mc_average_bler`] with a caller-supplied gain source.
pub fn mc_average_bler_with<D: ChannelDraw>(
    cfg: &ScenarioConfig,
    fbl: &FblParams,
    p2: f64,
    mc: &McConfig,
    draw: &D,
) -> Result<McEstimate> {
    cfg.validate()?;
    mc.validate()?;
    if !(p2 > 0.0) {
        return Err(Error::domain(format!("P2 must be positive, got {p2}")));
    }
    let batches = mc.trials.div_ceil(mc.batch);
    let parts: Vec<Result<Moments>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = mc.batch.min(mc.trials - b * mc.batch);
            let mut rng = batch_rng(mc.seed, b);
            let mut acc = Moments::default();
            for _ in 0..count {
                acc.push(one_trial(cfg, fbl, p2, draw, &mut rng)?);
            }
            Ok(acc)
        })
        .collect();
    let mut total = Moments::default();
    for p in parts {
        total = total.merge(p?);
    }
    Ok(total.estimate())
}

fn one_trial<D: ChannelDraw>(
    cfg: &ScenarioConfig,
    fbl: &FblParams,
    p2: f64,
    draw: &D,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let theta = 2.0 * PI * rng.random::<f64>();
    let mut eps = [0.0; 2];
    for (i, hop) in [Hop::First, Hop::Second].into_iter().enumerate() {
        let geo = hop_geometry(cfg, theta, hop)?;
        let k = if rng.random::<f64>() < geo.p_los {
            LinkType::Los
        } else {
            LinkType::Nlos
        };
        let beta = path_loss_coeff(geo.distance, cfg.carrier_freq, cfg.eta_db(k));
        let m = cfg.m_factor(k);
        let (power, gain) = match hop {
            Hop::First => (cfg.p1, draw.hop1_gain(m, rng)),
            Hop::Second => (p2, draw.hop2_gain(m, rng)),
        };
        let snr = power * beta * gain / cfg.noise_power;
        eps[i] = instantaneous_bler(snr, fbl.rate, fbl.blocklength);
    }
    Ok(e2e_bler(eps[0], eps[1]))
}

/// Kolmogorov–Smirnov distance between the sample and `cdf`. Sorts in place.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic two-sided KS critical value `√(−ln(α/2)/2)/√n`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(0.5 * alpha).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blercore::ChiVariant;

    #[test]
    fn hop1_gain_moments() {
        let mut rng = batch_rng(7, 0);
        let n = 200_000;
        let mut m = Moments::default();
        for _ in 0..n {
            m.push(sample_hop1_gain(1, &mut rng));
        }
        let e = m.estimate();
        assert!((e.mean - 1.0).abs() < 4.0 * e.std_error);
        let var = m.m2 / n as f64;
        assert!((var - 1.0).abs() < 0.03);
    }

    #[test]
    fn single_branch_model_matches_hop1_stream() {
        let mut a = batch_rng(3, 5);
        let mut b = batch_rng(3, 5);
        for _ in 0..100 {
            assert_eq!(sample_fas_gain_model(3, &[1.0], &mut a), sample_hop1_gain(3, &mut b));
        }
    }

    #[test]
    fn seeds_and_streams() {
        let mut a = batch_rng(1, 0);
        let mut b = batch_rng(1, 1);
        assert_ne!(a.random::<u64>(), b.random::<u64>());
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_eq!(derive_seed(9, 4), derive_seed(9, 4));
    }

    #[test]
    fn ks_critical_value_at_one_percent() {
        let c = ks_critical_value(100_000, 0.01) * (100_000f64).sqrt();
        assert!((c - 1.627_6).abs() < 1e-4);
    }

    #[test]
    fn fixed_gain_reduces_to_instantaneous_bler() {
        let cfg = ScenarioConfig::default();
        let fbl = FblParams::new(80.0, 100, ChiVariant::RateGap).unwrap();
        let mc = McConfig {
            trials: 2000,
            batch: 512,
            ..McConfig::default()
        };
        let huge = FixedGain { hop1: 1e9, hop2: 1e9 };
        let e = mc_average_bler_with(&cfg, &fbl, 1.0, &mc, &huge).unwrap();
        assert_eq!(e.mean, 0.0);
        assert_eq!(e.std_error, 0.0);
        let dead = FixedGain { hop1: 1e9, hop2: 0.0 };
        let e = mc_average_bler_with(&cfg, &fbl, 1.0, &mc, &dead).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.trials, 2000);
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 101.0).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        let merged = a.merge(b);
        assert!((merged.mean - whole.mean).abs() < 1e-14);
        assert!((merged.m2 - whole.m2).abs() < 1e-10);
    }
}
