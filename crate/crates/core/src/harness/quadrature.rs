//! Empirical convergence rates of sampling-based quadrature.

use super::HarnessError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Least-squares slope of `log e` against `log M`, negated.
pub fn fit_convergence_rate(pairs: &[(f64, f64)]) -> Result<f64, HarnessError> {
    if pairs.len() < 2 {
        return Err(HarnessError::DegenerateFit(format!("{} points", pairs.len())));
    }
    if pairs.iter().any(|&(m, e)| !(m > 0.0 && e > 0.0 && m.is_finite() && e.is_finite())) {
        return Err(HarnessError::DegenerateFit("values must be positive and finite".into()));
    }
    let n = pairs.len() as f64;
    let lx: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::DegenerateFit("all sample counts equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(-sxy / sxx)
}

/// Smooth integrand on the unit cube.
pub fn mc_integrand(p: [f64; 3]) -> f64 {
    p[0].exp() * (PI * p[1]).sin() * (1.0 + p[2] * p[2])
}

/// Integral of [`mc_integrand`] over the unit cube.
pub const MC_EXACT: f64 = (std::f64::consts::E - 1.0) * (2.0 / PI) * (4.0 / 3.0);

/// Root-mean-square Monte-Carlo error over `reps` repetitions for each count.
pub fn mc_quadrature_errors(counts: &[usize], reps: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    counts
        .iter()
        .map(|&m| {
            let mut sq = 0.0;
            for _ in 0..reps {
                let mut acc = 0.0;
                for _ in 0..m {
                    acc += mc_integrand([rng.gen(), rng.gen(), rng.gen()]);
                }
                sq += (acc / m as f64 - MC_EXACT).powi(2);
            }
            (m as f64, (sq / reps as f64).sqrt())
        })
        .collect()
}
