//! Monte Carlo of the protocol's classical stages: homodyne sampling,
//! δ-window post-selection, binarization and advantage distillation.
//!
//! Randomness is split into fixed-size chunks. Chunk `k` draws from a
//! `ChaCha8Rng` seeded with the configured seed on stream `k`, so results do
//! not depend on how rayon schedules the chunks.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::state::{quadrature_density, GaussianState};

const CHUNK: u64 = 1 << 16;
/// Stream used by the distillation stage; disjoint from the sampling chunks.
const AD_STREAM_BASE: u64 = 1 << 62;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Draw from the full Gaussian and keep the draws that land in the
    /// window. `n_samples` counts raw draws.
    Direct,
    /// Draw exactly from the Gaussian restricted to the window by rejection
    /// against a uniform proposal. `n_samples` counts accepted pairs.
    Windowed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub x0: f64,
    /// Half-width of the acceptance window around `±x0`.
    pub delta: f64,
    /// Largest advantage-distillation block length; every `1..=n` is run.
    pub n: usize,
    pub n_samples: u64,
    pub seed: u64,
    pub sampler: Sampler,
}

impl ProtocolConfig {
    pub fn new(x0: f64, delta: f64, n: usize, n_samples: u64, seed: u64) -> Self {
        Self { x0, delta, n, n_samples, seed, sampler: Sampler::Direct }
    }

    pub fn with_sampler(mut self, sampler: Sampler) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return Err(Error::InvalidParameter(format!("X0 must be positive, got {}", self.x0)));
        }
        if !(self.delta > 0.0 && self.delta < self.x0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < delta < X0, got delta={} with X0={}",
                self.delta, self.x0
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("block length must be at least 1".into()));
        }
        if self.n_samples < 1000 {
            return Err(Error::InvalidParameter(format!("need at least 1000 samples, got {}", self.n_samples)));
        }
        Ok(())
    }
}

/// Post-selected outcome signs; bit 0 means `+X₀`, bit 1 means `−X₀`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BitPairs {
    pub alice: Vec<u8>,
    pub bob: Vec<u8>,
    /// Raw Gaussian draws (direct) or proposals (windowed) consumed.
    pub draws: u64,
}

impl BitPairs {
    pub fn len(&self) -> usize {
        self.alice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alice.is_empty()
    }

    pub fn errors(&self) -> usize {
        self.alice.iter().zip(&self.bob).filter(|(a, b)| a != b).count()
    }

    fn append(&mut self, mut other: BitPairs) {
        self.alice.append(&mut other.alice);
        self.bob.append(&mut other.bob);
        self.draws += other.draws;
    }
}

/// An error-rate estimate from `trials` Bernoulli trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
    pub errors: u64,
}

impl Estimate {
    /// Binomial standard error, floored at `1/trials` so it never vanishes.
    pub fn from_counts(errors: u64, trials: u64) -> Self {
        let p = errors as f64 / trials as f64;
        let k = trials as f64;
        let se = (p * (1.0 - p) / k).sqrt().max(1.0 / k);
        Self { value: p, std_error: se, trials, errors }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdEstimate {
    pub n: usize,
    pub blocks: u64,
    pub accepted_blocks: u64,
    pub ad_yield: f64,
    pub eps_bn: Option<Estimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationResult {
    pub config: ProtocolConfig,
    pub measured_coords: [usize; 2],
    pub draws: u64,
    pub accepted_pairs: u64,
    pub eps_b: Estimate,
    pub advantage_distillation: Vec<AdEstimate>,
}

impl SimulationResult {
    /// `n,eps_bn,std_error,accepted_blocks,errors` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,eps_bn,std_error,accepted_blocks,errors\n");
        for ad in &self.advantage_distillation {
            match ad.eps_bn {
                Some(e) => out.push_str(&format!("{},{},{},{},{}\n", ad.n, e.value, e.std_error, ad.accepted_blocks, e.errors)),
                None => out.push_str(&format!("{},,,{},0\n", ad.n, ad.accepted_blocks)),
            }
        }
        out
    }
}

/// Mean and Cholesky factor of the probability density of the two measured
/// quadratures, `N(d_x, γ_x / 2)`.
struct PairDensity {
    mean: [f64; 2],
    chol: [[f64; 2]; 2],
    precision: [[f64; 2]; 2],
}

impl PairDensity {
    fn new<T: Real>(s: &GaussianState<T>, coords: [usize; 2]) -> Result<Self> {
        let density = quadrature_density(&s.to_f64(), &coords)?;
        let cov: DMatrix<f64> = density.cov;
        let mean: DVector<f64> = density.mean;
        let l = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("measured quadratures have a singular density".into()))?
            .l();
        let p = cov.try_inverse().ok_or(Error::SingularBlock("gamma_x"))?;
        Ok(Self {
            mean: [mean[0], mean[1]],
            chol: [[l[(0, 0)], 0.0], [l[(1, 0)], l[(1, 1)]]],
            precision: [[p[(0, 0)], p[(0, 1)]], [p[(1, 0)], p[(1, 1)]]],
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> [f64; 2] {
        let z0: f64 = StandardNormal.sample(rng);
        let z1: f64 = StandardNormal.sample(rng);
        [
            self.mean[0] + self.chol[0][0] * z0,
            self.mean[1] + self.chol[1][0] * z0 + self.chol[1][1] * z1,
        ]
    }

    /// Mahalanobis form `(x − m)ᵀ Σ⁻¹ (x − m)`.
    fn q(&self, x: [f64; 2]) -> f64 {
        let (u, v) = (x[0] - self.mean[0], x[1] - self.mean[1]);
        let p = &self.precision;
        p[0][0] * u * u + 2.0 * p[0][1] * u * v + p[1][1] * v * v
    }

    /// Exact minimum of `q` over an axis-aligned square of half-width `h`.
    fn min_q_on_square(&self, centre: [f64; 2], h: f64) -> f64 {
        let inside = (self.mean[0] - centre[0]).abs() <= h && (self.mean[1] - centre[1]).abs() <= h;
        if inside {
            return 0.0;
        }
        let p = &self.precision;
        let mut best = f64::INFINITY;
        // On each edge one coordinate is fixed; q is a 1-D convex quadratic
        // in the other, minimized then clamped to the edge.
        for axis in 0..2 {
            let other = 1 - axis;
            for side in [-h, h] {
                let mut x = [0.0; 2];
                x[axis] = centre[axis] + side;
                let u = x[axis] - self.mean[axis];
                let t = self.mean[other] - p[axis][other] * u / p[other][other];
                x[other] = t.clamp(centre[other] - h, centre[other] + h);
                best = best.min(self.q(x));
            }
        }
        best
    }
}

fn in_window(x: f64, x0: f64, delta: f64) -> bool {
    (x.abs() - x0).abs() <= delta
}

fn bit(x: f64) -> u8 {
    u8::from(x < 0.0)
}

fn chunk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn chunk_sizes(total: u64) -> Vec<(u64, u64)> {
    let n_chunks = total.div_ceil(CHUNK);
    (0..n_chunks).map(|k| (k, CHUNK.min(total - k * CHUNK))).collect()
}

fn sample_direct(density: &PairDensity, cfg: &ProtocolConfig) -> BitPairs {
    let parts: Vec<BitPairs> = chunk_sizes(cfg.n_samples)
        .into_par_iter()
        .map(|(k, size)| {
            let mut rng = chunk_rng(cfg.seed, k);
            let mut out = BitPairs { draws: size, ..Default::default() };
            for _ in 0..size {
                let x = density.draw(&mut rng);
                if in_window(x[0], cfg.x0, cfg.delta) && in_window(x[1], cfg.x0, cfg.delta) {
                    out.alice.push(bit(x[0]));
                    out.bob.push(bit(x[1]));
                }
            }
            out
        })
        .collect();
    merge(parts)
}

fn sample_windowed(density: &PairDensity, cfg: &ProtocolConfig) -> Result<BitPairs> {
    let (x0, h) = (cfg.x0, cfg.delta);
    let centres = [[x0, x0], [x0, -x0], [-x0, x0], [-x0, -x0]];
    let q_min = centres
        .iter()
        .map(|&c| density.min_q_on_square(c, h))
        .fold(f64::INFINITY, f64::min);
    // Guard against proposals that essentially never get accepted.
    let q_far = centres.iter().map(|&c| density.q(c)).fold(f64::INFINITY, f64::min);
    if q_far - q_min > 1400.0 {
        return Err(Error::NumericalFailure("window is too far in the tail for rejection sampling".into()));
    }
    let parts: Vec<BitPairs> = chunk_sizes(cfg.n_samples)
        .into_par_iter()
        .map(|(k, size)| {
            let mut rng = chunk_rng(cfg.seed, k);
            let mut out = BitPairs::default();
            while (out.alice.len() as u64) < size {
                out.draws += 1;
                let c = centres[rng.random_range(0..4)];
                let x = [c[0] + rng.random_range(-h..=h), c[1] + rng.random_range(-h..=h)];
                let accept = (-0.5 * (density.q(x) - q_min)).exp();
                if rng.random::<f64>() < accept {
                    out.alice.push(bit(x[0]));
                    out.bob.push(bit(x[1]));
                }
            }
            out
        })
        .collect();
    Ok(merge(parts))
}

fn merge(parts: Vec<BitPairs>) -> BitPairs {
    let mut all = BitPairs::default();
    for p in parts {
        all.append(p);
    }
    all
}

/// Draws `(X_A, X_B)` and keeps the pairs with `||X_i| − X₀| ≤ δ` on both
/// sides simultaneously, returning the sign bits and the estimate of `ε_B`.
pub fn sample_postselected_bits<T: Real>(
    s: &GaussianState<T>,
    coords: [usize; 2],
    cfg: &ProtocolConfig,
) -> Result<(BitPairs, Estimate)> {
    cfg.validate()?;
    s.require_physical()?;
    let density = PairDensity::new(s, coords)?;
    let bits = match cfg.sampler {
        Sampler::Direct => sample_direct(&density, cfg),
        Sampler::Windowed => sample_windowed(&density, cfg)?,
    };
    if bits.is_empty() {
        return Err(Error::NoAcceptedSamples);
    }
    let est = Estimate::from_counts(bits.errors() as u64, bits.len() as u64);
    Ok((bits, est))
}

/// Outcome of one advantage-distillation pass.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Distilled {
    pub alice: Vec<u8>,
    pub bob: Vec<u8>,
    pub blocks: u64,
}

impl Distilled {
    pub fn accepted(&self) -> u64 {
        self.alice.len() as u64
    }

    pub fn errors(&self) -> u64 {
        self.alice.iter().zip(&self.bob).filter(|(a, b)| a != b).count() as u64
    }

    pub fn ad_yield(&self) -> f64 {
        if self.blocks == 0 {
            0.0
        } else {
            self.accepted() as f64 / self.blocks as f64
        }
    }
}

/// Repetition-code advantage distillation.
///
/// The symbols are split into random disjoint blocks of `n`. For each block
/// Alice draws a secret bit `c` and announces `c_i = A_i ⊕ c`; Bob computes
/// `c'_i = B_i ⊕ c_i` and keeps the block only when every `c'_i` agrees, in
/// which case his bit is that common value. All symbols of a block are
/// consumed whether or not it is kept.
pub fn advantage_distillation<R: Rng + ?Sized>(bits_a: &[u8], bits_b: &[u8], n: usize, rng: &mut R) -> Result<Distilled> {
    if bits_a.len() != bits_b.len() {
        return Err(Error::DimensionMismatch(format!(
            "bit streams of length {} and {}",
            bits_a.len(),
            bits_b.len()
        )));
    }
    if n == 0 || bits_a.len() < n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= n <= stream length, got n={n} for {} symbols",
            bits_a.len()
        )));
    }
    let mut order: Vec<usize> = (0..bits_a.len()).collect();
    order.shuffle(rng);
    let mut out = Distilled::default();
    for block in order.chunks_exact(n) {
        out.blocks += 1;
        let c: u8 = rng.random_range(0..=1);
        let mut common = None;
        let mut agree = true;
        for &i in block {
            let announced = bits_a[i] ^ c;
            let bob = bits_b[i] ^ announced;
            match common {
                None => common = Some(bob),
                Some(v) if v != bob => {
                    agree = false;
                    break;
                }
                Some(_) => {}
            }
        }
        if agree {
            out.alice.push(c);
            out.bob.push(common.expect("non-empty block"));
        }
    }
    Ok(out)
}

/// Post-selection followed by advantage distillation for every block length
/// `1..=cfg.n`.
pub fn simulate<T: Real>(s: &GaussianState<T>, coords: [usize; 2], cfg: &ProtocolConfig) -> Result<SimulationResult> {
    let (bits, eps_b) = sample_postselected_bits(s, coords, cfg)?;
    let ad: Vec<AdEstimate> = (1..=cfg.n)
        .into_par_iter()
        .map(|n| {
            if bits.len() < n {
                return AdEstimate { n, blocks: 0, accepted_blocks: 0, ad_yield: 0.0, eps_bn: None };
            }
            let mut rng = chunk_rng(cfg.seed, AD_STREAM_BASE + n as u64);
            let d = advantage_distillation(&bits.alice, &bits.bob, n, &mut rng).expect("lengths checked");
            let eps_bn = (d.accepted() > 0).then(|| Estimate::from_counts(d.errors(), d.accepted()));
            AdEstimate { n, blocks: d.blocks, accepted_blocks: d.accepted(), ad_yield: d.ad_yield(), eps_bn }
        })
        .collect();
    Ok(SimulationResult {
        config: *cfg,
        measured_coords: coords,
        draws: bits.draws,
        accepted_pairs: bits.len() as u64,
        eps_b,
        advantage_distillation: ad,
    })
}

/// Weighted least-squares fit of the distilled error against block length.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    /// Slope of `log(ε̂_BN / (1 − ε̂_BN))` in `N`; estimates `log(ε_B/(1−ε_B))`.
    pub slope: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    /// `slope / X₀²`, comparable with the analytic exponent.
    pub slope_per_x0_sq: f64,
    /// Slope of plain `log ε̂_BN`, which only approaches `slope` for large `N`.
    pub log_error_slope: f64,
    pub used: Vec<usize>,
    /// Block lengths with fewer than `min_errors` distilled errors.
    pub insufficient: Vec<usize>,
}

/// Fits over the block lengths in `n_values` that have at least
/// `min_errors` distilled errors and at least as many correct bits.
pub fn slope_check(result: &SimulationResult, n_values: &[usize], min_errors: u64) -> Result<SlopeFit> {
    let mut pts: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (mut used, mut insufficient) = (Vec::new(), Vec::new());
    for &n in n_values {
        let est = result.advantage_distillation.iter().find(|a| a.n == n).and_then(|a| a.eps_bn);
        match est {
            Some(e) if e.errors >= min_errors && e.trials - e.errors >= min_errors => {
                let p = e.value;
                let k = e.trials as f64;
                // Delta-method variance of the log-odds.
                let var = 1.0 / (k * p * (1.0 - p));
                pts.push((n as f64, (p / (1.0 - p)).ln(), p.ln(), 1.0 / var));
                used.push(n);
            }
            _ => insufficient.push(n),
        }
    }
    if pts.len() < 2 {
        return Err(Error::InsufficientStatistics(format!(
            "only {} block lengths reach {min_errors} errors; insufficient: {insufficient:?}",
            pts.len()
        )));
    }
    let fit = |ys: &dyn Fn(&(f64, f64, f64, f64)) -> f64| -> (f64, f64) {
        let sw: f64 = pts.iter().map(|p| p.3).sum();
        let mx = pts.iter().map(|p| p.3 * p.0).sum::<f64>() / sw;
        let my = pts.iter().map(|p| p.3 * ys(p)).sum::<f64>() / sw;
        let sxx: f64 = pts.iter().map(|p| p.3 * (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| p.3 * (p.0 - mx) * (ys(p) - my)).sum();
        (sxy / sxx, (1.0 / sxx).sqrt())
    };
    let (slope, se) = fit(&|p| p.1);
    let (log_error_slope, _) = fit(&|p| p.2);
    let x0 = result.config.x0;
    Ok(SlopeFit {
        slope,
        std_error: se,
        ci95: (slope - 1.96 * se, slope + 1.96 * se),
        slope_per_x0_sq: slope / (x0 * x0),
        log_error_slope,
        used,
        insufficient,
    })
}
