//! Critical-density estimate from a failure-fraction curve.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::CliError;

/// Level at which the crossing is read off.
pub const LEVEL: f64 = 0.5;

/// First `c` at which the piecewise-linear interpolation of `(c, fraction)`
/// (sorted by `c`) passes through 0.5. `None` when it never does.
pub fn crossing(points: &[(f64, f64)]) -> Option<f64> {
    for (k, &(c, f)) in points.iter().enumerate() {
        if f == LEVEL {
            return Some(c);
        }
        if let Some(&(c2, f2)) = points.get(k + 1) {
            if (f - LEVEL) * (f2 - LEVEL) < 0.0 {
                return Some(c + (LEVEL - f) * (c2 - c) / (f2 - f));
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdEstimate {
    pub estimate: Option<f64>,
    /// Percentile interval of the bootstrap replicates that cross.
    pub interval: Option<(f64, f64)>,
    /// Replicates without a crossing.
    pub no_crossing: usize,
    pub replicates: usize,
}

/// `points` are `(c, failures, trials)`. The interval comes from a
/// parametric bootstrap: every replicate redraws the failure count at each
/// `c` from `Binomial(trials, failures / trials)`.
pub fn estimate(
    points: &[(f64, usize, usize)],
    replicates: usize,
    confidence: f64,
    seed: u64,
) -> Result<ThresholdEstimate, CliError> {
    if points.is_empty() {
        return Err(CliError::Usage("no sweep points".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(CliError::Usage(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(CliError::Usage("duplicate c values".into()));
    }
    if sorted.iter().any(|&(_, f, t)| t == 0 || f > t) {
        return Err(CliError::Usage(
            "every point needs 0 <= failures <= trials and trials >= 1".into(),
        ));
    }
    let fractions = |counts: &mut dyn Iterator<Item = usize>| -> Vec<(f64, f64)> {
        sorted
            .iter()
            .zip(counts)
            .map(|(&(c, _, t), f)| (c, f as f64 / t as f64))
            .collect()
    };
    let estimate = crossing(&fractions(&mut sorted.iter().map(|p| p.1)));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists: Vec<Binomial> = sorted
        .iter()
        .map(|&(_, f, t)| {
            Binomial::new(t as u64, f as f64 / t as f64).expect("probability in [0, 1]")
        })
        .collect();
    let mut values = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let mut draws = dists.iter().map(|d| d.sample(&mut rng) as usize);
        if let Some(c) = crossing(&fractions(&mut draws)) {
            values.push(c);
        }
    }
    let no_crossing = replicates - values.len();
    values.sort_by(f64::total_cmp);
    let interval = (!values.is_empty()).then(|| {
        let tail = (1.0 - confidence) / 2.0;
        (quantile(&values, tail), quantile(&values, 1.0 - tail))
    });
    Ok(ThresholdEstimate {
        estimate,
        interval,
        no_crossing,
        replicates,
    })
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
