//! Polynomial least squares on a normalised abscissa, and the iterative
//! RANSAC loop used for the road parabola and the vanishing-point quartic.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::math;

/// Least-squares polynomial `y = sum_k c_k x^k`.
///
/// The system is solved in `t = (x - center) / normalizer`, which maps the
/// abscissae onto `[-1, 1]`: every entry of the normal matrix stays below the
/// number of points times `kappa` and the matrix stays well conditioned.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyFit {
    /// Coefficients in the raw abscissa, lowest order first.
    pub coefficients: Vec<f64>,
    /// Coefficients in the normalised abscissa `t`.
    pub scaled: Vec<f64>,
    pub center: f64,
    pub normalizer: f64,
    pub kappa: f64,
}

impl PolyFit {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Evaluates with Horner's rule on the normalised abscissa.
    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.normalizer;
        self.scaled.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// Residuals `y - f(x)` for `(y, x)` points.
    pub fn residuals(&self, points: &[(f64, f64)]) -> Vec<f64> {
        points.iter().map(|&(y, x)| y - self.eval(x)).collect()
    }
}

/// `(center, half_range)` of the abscissae; the half range is 1 when all
/// abscissae coincide.
pub fn abscissa_frame(points: &[(f64, f64)]) -> (f64, f64) {
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, x)| {
            (lo.min(x), hi.max(x))
        });
    if !(lo <= hi) {
        return (0.0, 1.0);
    }
    let half = 0.5 * (hi - lo);
    (0.5 * (lo + hi), if half > 0.0 { half } else { 1.0 })
}

/// `(kappa P^T P, kappa P^T y)` for the Vandermonde matrix `P` of
/// `t = (x - center) / normalizer`, row-major `n x n` with `n = degree + 1`.
pub fn normal_system(
    points: &[(f64, f64)],
    degree: usize,
    kappa: f64,
    center: f64,
    normalizer: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = degree + 1;
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    let mut powers = vec![0.0; 2 * n - 1];
    for &(y, x) in points {
        let t = (x - center) / normalizer;
        let mut p = 1.0;
        for slot in powers.iter_mut() {
            *slot = p;
            p *= t;
        }
        for r in 0..n {
            for c in 0..n {
                a[r * n + c] += powers[r + c];
            }
            b[r] += powers[r] * y;
        }
    }
    for x in a.iter_mut().chain(b.iter_mut()) {
        *x *= kappa;
    }
    (a, b)
}

/// Converts coefficients in `t = (x - center) / normalizer` to the raw
/// abscissa. Each order is divided by the normaliser once per power, then the
/// polynomial in `x - center` is expanded by Horner steps.
pub fn to_raw_coefficients(scaled: &[f64], center: f64, normalizer: f64) -> Vec<f64> {
    let shifted: Vec<f64> = scaled
        .iter()
        .enumerate()
        .map(|(k, &c)| (0..k).fold(c, |acc, _| acc / normalizer))
        .collect();
    let mut raw = vec![0.0; scaled.len()];
    for &d in shifted.iter().rev() {
        // raw <- raw * (x - center) + d
        for k in (1..raw.len()).rev() {
            raw[k] = raw[k - 1] - center * raw[k];
        }
        raw[0] = d - center * raw[0];
    }
    raw
}

struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        let scale = a.iter().fold(0.0f64, |m, &x| m.max(math::abs(x)));
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::RankDeficient);
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            for r in k + 1..n {
                if math::abs(a[r * n + k]) > math::abs(a[p * n + k]) {
                    p = r;
                }
            }
            if math::abs(a[p * n + k]) <= 1e-13 * scale {
                return Err(Error::RankDeficient);
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            for r in k + 1..n {
                let f = a[r * n + k] / a[k * n + k];
                a[r * n + k] = f;
                for c in k + 1..n {
                    a[r * n + c] -= f * a[k * n + c];
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            for c in 0..r {
                x[r] -= self.lu[r * n + c] * x[c];
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                x[r] -= self.lu[r * n + c] * x[c];
            }
            x[r] /= self.lu[r * n + r];
        }
        x
    }
}

fn distinct_abscissae(points: &[(f64, f64)]) -> usize {
    let mut xs: Vec<f64> = points.iter().map(|p| p.1).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.len()
}

/// Solves the `kappa`-scaled normal equations of a degree-`degree` fit to
/// `(y, x)` points, with one step of iterative refinement.
pub fn polyfit(points: &[(f64, f64)], degree: usize, kappa: f64) -> Result<PolyFit> {
    let n = degree + 1;
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(invalid("kappa must be positive and finite"));
    }
    if points.iter().any(|&(y, x)| !y.is_finite() || !x.is_finite()) {
        return Err(invalid("non-finite point"));
    }
    if points.len() < n {
        return Err(Error::TooFewPoints {
            needed: n,
            got: points.len(),
        });
    }
    if distinct_abscissae(points) < n {
        return Err(Error::RankDeficient);
    }
    let (center, normalizer) = abscissa_frame(points);
    let (a, b) = normal_system(points, degree, kappa, center, normalizer);
    let lu = Lu::factor(a.clone(), n)?;
    let mut scaled = lu.solve(&b);
    let residual: Vec<f64> = (0..n)
        .map(|r| b[r] - (0..n).map(|c| a[r * n + c] * scaled[c]).sum::<f64>())
        .collect();
    for (s, d) in scaled.iter_mut().zip(lu.solve(&residual)) {
        *s += d;
    }
    Ok(PolyFit {
        coefficients: to_raw_coefficients(&scaled, center, normalizer),
        scaled,
        center,
        normalizer,
        kappa,
    })
}

/// Parameters of the iterative RANSAC loop.
#[derive(Clone, Debug, PartialEq)]
pub struct RansacConfig {
    /// A point is an inlier when its squared residual is below this.
    pub tolerance: f64,
    /// Stop once `n_inliers / n_candidates` reaches this fraction.
    pub inlier_fraction: f64,
    /// Points drawn per hypothesis.
    pub sample_size: usize,
    pub max_iterations: usize,
    pub rng_seed: u64,
    /// Outliers are only removed by a hypothesis whose consensus covers at
    /// least this fraction of all input points.
    pub min_consensus: f64,
}

impl RansacConfig {
    /// Parabola settings for the road profile.
    pub fn road() -> Self {
        Self {
            tolerance: 4.0,
            inlier_fraction: 0.99,
            sample_size: 3,
            max_iterations: 200,
            rng_seed: 0,
            min_consensus: 0.5,
        }
    }

    /// Quartic settings for the horizontal vanishing-point profile.
    pub fn vanishing() -> Self {
        Self {
            tolerance: 16.0,
            sample_size: 5,
            ..Self::road()
        }
    }

    pub fn validate(&self, degree: usize) -> Result<()> {
        if !(self.inlier_fraction > 0.0 && self.inlier_fraction <= 1.0) {
            return Err(invalid("inlier_fraction must lie in (0, 1]"));
        }
        if self.sample_size < degree + 1 {
            return Err(invalid("sample_size is smaller than the number of coefficients"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.min_consensus) {
            return Err(invalid("min_consensus must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Result of [`ransac_polyfit`].
#[derive(Clone, Debug, PartialEq)]
pub struct RansacOutcome {
    /// Final fit on the inliers.
    pub fit: PolyFit,
    /// Indices of the final inliers into the input points.
    pub inliers: Vec<usize>,
    /// Hypothesis that produced the final classification.
    pub hypothesis: PolyFit,
    pub iterations: usize,
    /// `n_inliers / n_candidates` when converged, otherwise the best
    /// consensus as a fraction of all points.
    pub inlier_fraction: f64,
    /// False when the loop hit `max_iterations` before the target fraction.
    pub converged: bool,
    /// Candidate-set size at the start of every iteration.
    pub candidate_sizes: Vec<usize>,
}

fn is_inlier(fit: &PolyFit, (y, x): (f64, f64), tolerance: f64) -> bool {
    let r = y - fit.eval(x);
    r * r < tolerance
}

/// Iterative RANSAC: draw a random sample from the current candidates, fit,
/// classify, stop once the inliers make up the target fraction of the
/// candidates, otherwise drop the outliers and repeat. The final model is
/// fitted to the inliers only.
///
/// Hypotheses are classified against every input point, and the candidate
/// set is replaced by a hypothesis' inliers only when that consensus is the
/// largest so far and covers `min_consensus` of the input. A poor early
/// hypothesis therefore cannot discard good points for good.
pub fn ransac_polyfit(points: &[(f64, f64)], degree: usize, kappa: f64, cfg: &RansacConfig) -> Result<RansacOutcome> {
    cfg.validate(degree)?;
    if points.len() < cfg.sample_size {
        return Err(Error::TooFewPoints {
            needed: cfg.sample_size,
            got: points.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut candidates: Vec<usize> = (0..points.len()).collect();
    let mut is_candidate = vec![true; points.len()];
    let mut candidate_sizes = Vec::new();
    let mut best: Option<(PolyFit, Vec<usize>, f64)> = None;
    let floor = cfg.min_consensus * points.len() as f64;
    let mut scratch = Vec::with_capacity(points.len());
    let mut sample = Vec::with_capacity(cfg.sample_size);

    for iteration in 1..=cfg.max_iterations {
        candidate_sizes.push(candidates.len());
        scratch.clear();
        scratch.extend_from_slice(&candidates);
        for k in 0..cfg.sample_size {
            let j = rng.random_range(k..scratch.len());
            scratch.swap(k, j);
        }
        sample.clear();
        sample.extend(scratch[..cfg.sample_size].iter().map(|&i| points[i]));
        let Ok(hypothesis) = polyfit(&sample, degree, kappa) else {
            continue;
        };
        let consensus: Vec<usize> = (0..points.len())
            .filter(|&i| is_inlier(&hypothesis, points[i], cfg.tolerance))
            .collect();
        let inliers: Vec<usize> = consensus.iter().copied().filter(|&i| is_candidate[i]).collect();
        let fraction = inliers.len() as f64 / candidates.len() as f64;
        if fraction >= cfg.inlier_fraction && inliers.len() > degree {
            let (fit, inliers) = refine(points, inliers, degree, kappa, cfg.tolerance)?;
            return Ok(RansacOutcome {
                fit,
                inliers,
                hypothesis,
                iterations: iteration,
                inlier_fraction: fraction,
                converged: true,
                candidate_sizes,
            });
        }
        let record = best.as_ref().is_none_or(|(_, b, _)| consensus.len() > b.len());
        if record {
            best = Some((
                hypothesis,
                consensus.clone(),
                consensus.len() as f64 / points.len() as f64,
            ));
            if consensus.len() as f64 >= floor && consensus.len() >= cfg.sample_size {
                is_candidate.iter_mut().for_each(|c| *c = false);
                for &i in &consensus {
                    is_candidate[i] = true;
                }
                candidates = consensus;
            }
        }
    }

    let iterations = candidate_sizes.len();
    let (hypothesis, inliers, fraction) = match best {
        Some((h, i, f)) if i.len() > degree => (h, i, f),
        _ => {
            let h = polyfit(&select(points, &candidates), degree, kappa)?;
            let n = candidates.len();
            (h, candidates, 1.0 / n as f64)
        }
    };
    let (fit, inliers) = refine(points, inliers, degree, kappa, cfg.tolerance)?;
    Ok(RansacOutcome {
        fit,
        inliers,
        hypothesis,
        iterations,
        inlier_fraction: fraction,
        converged: false,
        candidate_sizes,
    })
}

/// Least-squares fit on `inliers`, then a few rounds of reclassifying every
/// point against that fit and refitting until the inlier set settles. A
/// sampled hypothesis only sees its own neighbourhood; the refit is better
/// placed to pick up consistent points near the ends of the range.
fn refine(
    points: &[(f64, f64)],
    mut inliers: Vec<usize>,
    degree: usize,
    kappa: f64,
    tolerance: f64,
) -> Result<(PolyFit, Vec<usize>)> {
    const ROUNDS: usize = 8;
    let mut fit = polyfit(&select(points, &inliers), degree, kappa)?;
    for _ in 0..ROUNDS {
        let next: Vec<usize> = (0..points.len())
            .filter(|&i| is_inlier(&fit, points[i], tolerance))
            .collect();
        if next == inliers || next.len() < inliers.len() {
            break;
        }
        let Ok(f) = polyfit(&select(points, &next), degree, kappa) else {
            break;
        };
        fit = f;
        inliers = next;
    }
    Ok((fit, inliers))
}

fn select(points: &[(f64, f64)], idx: &[usize]) -> Vec<(f64, f64)> {
    idx.iter().map(|&i| points[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(c: &[f64], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    #[test]
    fn exact_parabola_is_recovered() {
        let beta = [10.0, 0.2, 0.001];
        let pts: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let v = 100.0 + 5.0 * i as f64;
                (poly(&beta, v), v)
            })
            .collect();
        let fit = polyfit(&pts, 2, 1.0).unwrap();
        for (got, want) in fit.coefficients.iter().zip(beta) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn three_points_interpolate_exactly() {
        let pts = [(3.0, 1.0), (-2.0, 4.0), (7.5, 9.0)];
        let fit = polyfit(&pts, 2, 1.0).unwrap();
        for r in fit.residuals(&pts) {
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let pts = [(1.0, 2.0), (3.0, 2.0), (5.0, 4.0)];
        assert_eq!(polyfit(&pts, 2, 1.0), Err(Error::RankDeficient));
        assert_eq!(
            polyfit(&pts[..2], 2, 1.0),
            Err(Error::TooFewPoints { needed: 3, got: 2 })
        );
    }

    #[test]
    fn kappa_cancels() {
        let gamma = [300.0, -1.0, 0.004, 0.0, 0.0];
        let pts: Vec<(f64, f64)> = (0..60)
            .map(|i| {
                let v = 120.0 + 4.0 * i as f64;
                (poly(&gamma, v) + if i % 3 == 0 { 0.7 } else { -0.2 }, v)
            })
            .collect();
        let reference = polyfit(&pts, 4, 1.0).unwrap();
        for kappa in [1e-6, 1e6] {
            let fit = polyfit(&pts, 4, kappa).unwrap();
            for (a, b) in fit.coefficients.iter().zip(&reference.coefficients) {
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-300), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn ransac_ignores_gross_outliers() {
        let beta = [-40.0, 0.4, 0.0005];
        let mut pts: Vec<(f64, f64)> = (0..100)
            .map(|i| {
                let v = 100.0 + 2.5 * i as f64;
                (poly(&beta, v), v)
            })
            .collect();
        for i in (0..100).step_by(5) {
            pts[i].0 += 25.0 + i as f64;
        }
        let out = ransac_polyfit(&pts, 2, 1.0, &RansacConfig::road()).unwrap();
        assert!(out.converged);
        assert_eq!(out.inliers.len(), 80);
        for (got, want) in out.fit.coefficients.iter().zip(beta) {
            assert!((got - want).abs() <= 1e-6 * want.abs());
        }
        assert!(out.candidate_sizes.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ransac_needs_a_full_sample() {
        let pts = [(1.0, 1.0), (2.0, 2.0)];
        assert!(matches!(
            ransac_polyfit(&pts, 2, 1.0, &RansacConfig::road()),
            Err(Error::TooFewPoints { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn ransac_config_is_validated() {
        let mut cfg = RansacConfig::road();
        cfg.sample_size = 2;
        assert!(cfg.validate(2).is_err());
        let mut cfg = RansacConfig::road();
        cfg.inlier_fraction = 0.0;
        assert!(cfg.validate(2).is_err());
    }
}
