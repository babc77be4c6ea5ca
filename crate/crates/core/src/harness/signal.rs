use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};

use crate::block::{BlockStructure, BlockVector, HiSparsity};
use crate::error::{dim_err, Error, Result};
use crate::linalg::{c64, norm_sqr};
use crate::rng::{self, StreamRng};

use super::Snr;

/// Where the nonzeros of an active block may sit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Placement {
    Uniform,
    /// Designated blocks draw their positions from the first `window`
    /// coordinates; every other block is uniform.
    FrontLoaded {
        window: usize,
        designated: Vec<usize>,
    },
}

/// Standard complex Gaussian: independent real/imaginary parts of variance ½.
fn complex_normal(rng: &mut StreamRng) -> c64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Random `(s, σ)`-sparse signal: `s` active blocks chosen uniformly among
/// those with `σᵢ > 0`, `σᵢ` uniform positions in each, standard complex
/// Gaussian values.
pub fn generate_signal(
    structure: &BlockStructure,
    k: &HiSparsity,
    seed: u64,
    placement: &Placement,
) -> Result<BlockVector> {
    k.validate(structure)?;
    let window_of = |i: usize| -> Result<usize> {
        match placement {
            Placement::FrontLoaded { window, designated } if designated.contains(&i) => {
                let w = (*window).min(structure.block_len(i));
                if w < k.sigma[i] {
                    return Err(Error::InvalidArgument(format!(
                        "front-load window {window} is smaller than sigma_{i} = {}",
                        k.sigma[i]
                    )));
                }
                Ok(w)
            }
            _ => Ok(structure.block_len(i)),
        }
    };
    for i in 0..structure.num_blocks() {
        window_of(i)?;
    }

    let mut rng = rng::stream(seed);
    let eligible: Vec<usize> = (0..structure.num_blocks()).filter(|&i| k.sigma[i] > 0).collect();
    let s = k.s.min(eligible.len());
    let mut active: Vec<usize> = index::sample(&mut rng, eligible.len(), s)
        .into_iter()
        .map(|e| eligible[e])
        .collect();
    active.sort_unstable();

    let mut x = BlockVector::zeros(structure.clone());
    for i in active {
        let mut pos = index::sample(&mut rng, window_of(i)?, k.sigma[i]).into_vec();
        pos.sort_unstable();
        let blk = x.block_mut(i);
        for p in pos {
            blk[p] = complex_normal(&mut rng);
        }
    }
    Ok(x)
}

/// Per-entry noise variance that puts `y` at `snr` dB:
/// `‖y‖² / (len(y) · 10^(snr/10))`; zero when noiseless.
pub fn noise_variance(y: &[c64], snr: Snr) -> f64 {
    if snr.is_noiseless() || y.is_empty() {
        return 0.0;
    }
    norm_sqr(y) / (y.len() as f64 * 10f64.powf(snr.0 / 10.0))
}

/// `y + η` with i.i.d. circular complex Gaussian `η` at the requested SNR.
pub fn add_noise(y: &[c64], snr: Snr, seed: u64) -> Result<Vec<c64>> {
    if snr.is_noiseless() {
        return Ok(y.to_vec());
    }
    if norm_sqr(y) == 0.0 {
        return Err(Error::InvalidArgument(
            "cannot set a finite SNR on a zero signal".into(),
        ));
    }
    let sd = noise_variance(y, snr).sqrt();
    let mut rng = rng::stream(seed);
    Ok(y.iter().map(|v| v + complex_normal(&mut rng) * sd).collect())
}

/// `(1/n) Σ |x_k − x̂_k|²`.
pub fn mse(x: &BlockVector, xhat: &BlockVector) -> Result<f64> {
    if x.structure() != xhat.structure() {
        return Err(dim_err("estimate and signal have different block structures"));
    }
    let n = x.structure().total_dim() as f64;
    Ok(x.coeffs()
        .iter()
        .zip(xhat.coeffs())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / n)
}
