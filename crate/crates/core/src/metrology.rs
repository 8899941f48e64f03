//! Cramér–Rao bounds, the coherence uncertainty budget, classical Fisher
//! information of concrete measurements and a Monte-Carlo estimation run.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::coherence::per_element_values;
use crate::error::{Error, Result};
use crate::numerics::{eigh, same_dim, CMatrix, Hermitian, Tolerances};
use crate::qfi::qfi;
use crate::states::{derive_seed, rng_from_seed, DensityMatrix, Povm};

/// Fisher information at or below this counts as zero.
pub const FISHER_FLOOR: f64 = 1e-12;
/// Step of the central difference used for `∂_θ p_m`.
pub const FD_STEP: f64 = 1e-5;
/// Outcomes less likely than this are left out of the classical sum.
pub const PROB_FLOOR: f64 = 1e-12;
/// Minimal classical Fisher information for a simulation to make sense.
pub const FLAT_CFI: f64 = 1e-6;
/// Half-width of the MLE search window around the true value.
pub const SEARCH_HALF_WIDTH: f64 = 1.0;
const GRID_POINTS: usize = 201;
const REFINE_TOL: f64 = 1e-6;

/// A variance lower bound, or no bound at all when the information vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    Unbounded,
}

impl Bound {
    pub fn value(self) -> Option<f64> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Bound::Unbounded)
    }
}

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bound::Finite(v) => s.serialize_f64(*v),
            Bound::Unbounded => s.serialize_str("Unbounded"),
        }
    }
}

fn check_repetitions(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::ConfigInvalid("repetitions must be positive".into()));
    }
    Ok(())
}

fn bound_from_fisher(f: f64, n: u64) -> Bound {
    if f <= FISHER_FLOOR {
        Bound::Unbounded
    } else {
        Bound::Finite(1.0 / (n as f64 * f))
    }
}

/// `1/(N F(ρ, A))`.
pub fn qcrb_bound(rho: &DensityMatrix, a: &Hermitian, n: u64, tol: &Tolerances) -> Result<Bound> {
    check_repetitions(n)?;
    Ok(bound_from_fisher(qfi(rho, a, tol)?, n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationBudget {
    pub per_parameter_bounds: Vec<Bound>,
    /// `Σ_j 1/b_j` over the finite bounds; equals `N·C_F` up to rounding and
    /// the dropped near-zero terms.
    pub sum_bound: f64,
    pub repetitions: u64,
}

impl EstimationBudget {
    /// `Σ_j 1/b_j` recomputed from the stored bounds.
    pub fn reciprocal_sum(&self) -> f64 {
        self.per_parameter_bounds
            .iter()
            .filter_map(|b| b.value())
            .map(|b| 1.0 / b)
            .sum()
    }
}

/// Per-element bounds for the family `exp(−iE_jθ_j)` and their summed
/// reciprocal.
pub fn uncertainty_budget(rho: &DensityMatrix, povm: &Povm, n: u64, tol: &Tolerances) -> Result<EstimationBudget> {
    check_repetitions(n)?;
    let values = per_element_values(rho, povm, tol)?;
    let per_parameter_bounds: Vec<Bound> = values.iter().map(|&f| bound_from_fisher(f, n)).collect();
    let mut budget = EstimationBudget {
        per_parameter_bounds,
        sum_bound: 0.0,
        repetitions: n,
    };
    budget.sum_bound = budget.reciprocal_sum();
    Ok(budget)
}

/// Outcome probabilities of `M` on `e^{−iAθ} ρ e^{iAθ}`, evaluated in the
/// eigenbasis of `A` so each θ costs `O(d²)` per outcome.
struct PhaseFamily {
    freqs: Vec<f64>,
    rho: CMatrix,
    elems: Vec<CMatrix>,
}

impl PhaseFamily {
    fn new(rho: &DensityMatrix, a: &Hermitian, povm: &Povm) -> Result<Self> {
        same_dim(rho.dim(), a.dim())?;
        same_dim(rho.dim(), povm.dim())?;
        let spec = eigh(a)?;
        Ok(Self {
            freqs: spec.values.clone(),
            rho: spec.in_eigenbasis(rho.matrix()),
            elems: povm.elements().iter().map(|m| spec.in_eigenbasis(m.matrix())).collect(),
        })
    }

    fn probabilities(&self, theta: f64) -> Vec<f64> {
        let d = self.freqs.len();
        let phases: Vec<Complex64> = self.freqs.iter().map(|&f| Complex64::from_polar(1.0, -f * theta)).collect();
        let rt = CMatrix::from_fn(d, d, |a, b| self.rho[(a, b)] * phases[a] * phases[b].conj());
        self.elems
            .iter()
            .map(|m| {
                // tr(M ρ(θ)) = Σ_ab ρ_ab M_ba
                let mut s = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        s += (rt[(a, b)] * m[(b, a)]).re;
                    }
                }
                s
            })
            .collect()
    }

    fn fisher(&self, theta: f64) -> f64 {
        let p = self.probabilities(theta);
        let hi = self.probabilities(theta + FD_STEP);
        let lo = self.probabilities(theta - FD_STEP);
        let mut total = 0.0;
        for m in 0..p.len() {
            if p[m] < PROB_FLOOR {
                continue;
            }
            let dp = (hi[m] - lo[m]) / (2.0 * FD_STEP);
            total += dp * dp / p[m];
        }
        total
    }

    fn log_likelihood(&self, counts: &[u64], theta: f64) -> f64 {
        self.probabilities(theta)
            .iter()
            .zip(counts)
            .filter(|(_, &c)| c > 0)
            .map(|(&p, &c)| c as f64 * p.max(f64::MIN_POSITIVE).ln())
            .sum()
    }
}

/// `Σ_m (∂_θ p_m)² / p_m` at `θ0`.
pub fn classical_fisher(rho: &DensityMatrix, a: &Hermitian, povm: &Povm, theta0: f64) -> Result<f64> {
    Ok(PhaseFamily::new(rho, a, povm)?.fisher(theta0))
}

/// Sample statistic that needs at least two trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleVariance {
    Value(f64),
    NotApplicable,
}

impl SampleVariance {
    pub fn value(self) -> Option<f64> {
        match self {
            SampleVariance::Value(v) => Some(v),
            SampleVariance::NotApplicable => None,
        }
    }
}

impl Serialize for SampleVariance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SampleVariance::Value(v) => s.serialize_f64(*v),
            SampleVariance::NotApplicable => s.serialize_str("NotApplicable"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationRecord {
    pub theta_true: f64,
    pub repetitions: u64,
    pub trials: usize,
    pub seed: u64,
    pub cfi: f64,
    pub qfi: f64,
    /// `1/(N·CFI)`.
    pub classical_bound: f64,
    pub quantum_bound: Bound,
    pub mean_estimate: f64,
    /// Unbiased sample variance of the estimates.
    pub variance: SampleVariance,
    /// `variance / classical_bound`.
    pub ratio: SampleVariance,
}

/// Repeated maximum-likelihood estimation of `θ_true` from `N` samples of
/// `M` on `ρ(θ_true)`. Trials run in parallel with seeds derived from
/// `seed` and the trial index, so the result does not depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn simulate_estimation(
    rho: &DensityMatrix,
    a: &Hermitian,
    povm: &Povm,
    theta_true: f64,
    n: u64,
    trials: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<EstimationRecord> {
    check_repetitions(n)?;
    if trials == 0 {
        return Err(Error::ConfigInvalid("at least one trial is required".into()));
    }
    let family = PhaseFamily::new(rho, a, povm)?;
    let cfi = family.fisher(theta_true);
    if cfi <= FLAT_CFI {
        return Err(Error::FlatLikelihood { cfi });
    }
    let probs: Vec<f64> = family.probabilities(theta_true).iter().map(|p| p.clamp(0.0, 1.0)).collect();

    let estimates: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(seed, &[t as u64]));
            let counts = sample_counts(&probs, n, &mut rng);
            maximize_likelihood(&family, &counts, theta_true)
        })
        .collect();

    let mean_estimate = estimates.iter().sum::<f64>() / trials as f64;
    let classical_bound = 1.0 / (n as f64 * cfi);
    let (variance, ratio) = if trials < 2 {
        (SampleVariance::NotApplicable, SampleVariance::NotApplicable)
    } else {
        let v = estimates.iter().map(|e| (e - mean_estimate).powi(2)).sum::<f64>() / (trials - 1) as f64;
        (SampleVariance::Value(v), SampleVariance::Value(v / classical_bound))
    };
    let q = qfi(rho, a, tol)?;
    Ok(EstimationRecord {
        theta_true,
        repetitions: n,
        trials,
        seed,
        cfi,
        qfi: q,
        classical_bound,
        quantum_bound: bound_from_fisher(q, n),
        mean_estimate,
        variance,
        ratio,
    })
}

/// Multinomial counts by chained binomial draws.
fn sample_counts<R: Rng>(probs: &[f64], n: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0; probs.len()];
    let mut left = n;
    let mut mass = probs.iter().sum::<f64>();
    for (m, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if m + 1 == probs.len() {
            counts[m] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let c = Binomial::new(left, q).map(|b| b.sample(rng)).unwrap_or(0);
        counts[m] = c;
        left -= c;
        mass -= p;
    }
    counts
}

/// Grid search over the window, then golden-section refinement around the
/// best grid point.
fn maximize_likelihood(family: &PhaseFamily, counts: &[u64], center: f64) -> f64 {
    let lo = center - SEARCH_HALF_WIDTH;
    let hi = center + SEARCH_HALF_WIDTH;
    let h = (hi - lo) / (GRID_POINTS - 1) as f64;
    let mut best = lo;
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..GRID_POINTS {
        let t = lo + h * i as f64;
        let v = family.log_likelihood(counts, t);
        if v > best_val {
            best_val = v;
            best = t;
        }
    }
    let ll = |t: f64| family.log_likelihood(counts, t);
    let mut a = (best - h).max(lo);
    let mut b = (best + h).min(hi);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = ll(c);
    let mut fd = ll(d);
    while b - a > REFINE_TOL {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = ll(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = ll(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::cf_direct;
    use crate::numerics::CVector;
    use crate::states::{random_povm, random_state, ProjectiveMeasurement};
    use approx::assert_abs_diff_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn plus() -> DensityMatrix {
        let r = 0.5f64.sqrt();
        let v = CVector::from_vec(vec![Complex64::new(r, 0.0), Complex64::new(r, 0.0)]);
        DensityMatrix::pure(&v, &tol()).unwrap()
    }

    fn pm_basis() -> Povm {
        let r = 0.5f64.sqrt();
        let plus = CVector::from_vec(vec![Complex64::new(r, 0.0), Complex64::new(r, 0.0)]);
        let minus = CVector::from_vec(vec![Complex64::new(r, 0.0), Complex64::new(-r, 0.0)]);
        Povm::from_hermitians(vec![Hermitian::outer(&plus), Hermitian::outer(&minus)], &tol()).unwrap()
    }

    #[test]
    fn qcrb_examples() {
        let a = Hermitian::basis_projector(2, 0);
        let b = qcrb_bound(&plus(), &a, 100, &tol()).unwrap().value().unwrap();
        assert_abs_diff_eq!(b, 0.01, epsilon = 1e-14);
        let b2 = qcrb_bound(&plus(), &a, 200, &tol()).unwrap().value().unwrap();
        assert_abs_diff_eq!(b2, b / 2.0, epsilon = 1e-16);
        assert!(qcrb_bound(&DensityMatrix::maximally_mixed(2), &a, 10, &tol()).unwrap().is_unbounded());
        assert!(matches!(qcrb_bound(&plus(), &a, 0, &tol()), Err(Error::ConfigInvalid(_))));
        assert!(matches!(
            qcrb_bound(&plus(), &Hermitian::identity(3), 1, &tol()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn budget_examples() {
        let rho = crate::convexroof::counterexample_state().unwrap();
        let comp = ProjectiveMeasurement::computational(3);
        let b = uncertainty_budget(&rho, comp.as_povm(), 1000, &tol()).unwrap();
        assert_abs_diff_eq!(b.sum_bound, 4000.0 / 3.0, epsilon = 1e-9);
        assert_eq!(b.reciprocal_sum(), b.sum_bound);

        let b = uncertainty_budget(&plus(), ProjectiveMeasurement::computational(2).as_povm(), 1, &tol()).unwrap();
        for x in &b.per_parameter_bounds {
            assert_abs_diff_eq!(x.value().unwrap(), 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(b.sum_bound, 2.0, epsilon = 1e-12);

        let diag = DensityMatrix::new(Hermitian::from_real_diagonal(&[0.7, 0.3]).into_inner(), &tol()).unwrap();
        let b = uncertainty_budget(&diag, ProjectiveMeasurement::computational(2).as_povm(), 5, &tol()).unwrap();
        assert!(b.per_parameter_bounds.iter().all(|x| x.is_unbounded()));
        assert_eq!(b.sum_bound, 0.0);
    }

    #[test]
    fn budget_matches_coherence() {
        for seed in 0..30 {
            let rho = random_state(3, 2, seed).unwrap();
            let e = random_povm(3, 3, seed + 50).unwrap();
            let b = uncertainty_budget(&rho, &e, 250, &tol()).unwrap();
            assert_eq!(b.reciprocal_sum(), b.sum_bound);
            let cf = cf_direct(&rho, &e, &tol()).unwrap();
            assert!((b.sum_bound - 250.0 * cf).abs() <= 1e-9 * (1.0 + 250.0 * cf));
        }
    }

    #[test]
    fn cfi_examples() {
        let a = Hermitian::basis_projector(2, 0);
        assert_abs_diff_eq!(classical_fisher(&plus(), &a, &pm_basis(), 0.3).unwrap(), 1.0, epsilon = 1e-6);
        let eig = ProjectiveMeasurement::computational(2);
        assert_abs_diff_eq!(classical_fisher(&plus(), &a, eig.as_povm(), 0.3).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cfi_below_qfi() {
        let mut rng = rng_from_seed(77);
        for _ in 0..100 {
            let d = rng.random_range(2..=4);
            let rho = random_state(d, rng.random_range(1..=d), rng.random()).unwrap();
            let a = crate::states::random_hermitian(d, &mut rng);
            let m = random_povm(d, rng.random_range(2..=4), rng.random()).unwrap();
            let theta = rng.random_range(-1.0..1.0);
            let c = classical_fisher(&rho, &a, &m, theta).unwrap();
            let q = qfi(&rho, &a, &tol()).unwrap();
            assert!(c >= -1e-9);
            assert!(c <= q + 1e-6, "{c} > {q}");
        }
    }

    #[test]
    fn sampler_preserves_total() {
        let mut rng = rng_from_seed(3);
        let c = sample_counts(&[0.2, 0.5, 0.3], 1000, &mut rng);
        assert_eq!(c.iter().sum::<u64>(), 1000);
        let c = sample_counts(&[1.0, 0.0], 50, &mut rng);
        assert_eq!(c, vec![50, 0]);
    }

    #[test]
    fn simulation_small_run() {
        let a = Hermitian::basis_projector(2, 0);
        let theta = std::f64::consts::FRAC_PI_2;
        let r = simulate_estimation(&plus(), &a, &pm_basis(), theta, 1000, 200, 5, &tol()).unwrap();
        assert_abs_diff_eq!(r.cfi, 1.0, epsilon = 1e-6);
        let ratio = r.ratio.value().unwrap();
        assert!((0.7..1.4).contains(&ratio), "{ratio}");
        let again = simulate_estimation(&plus(), &a, &pm_basis(), theta, 1000, 200, 5, &tol()).unwrap();
        assert_eq!(r, again);

        let one = simulate_estimation(&plus(), &a, &pm_basis(), theta, 1000, 1, 5, &tol()).unwrap();
        assert_eq!(one.variance, SampleVariance::NotApplicable);
    }

    #[test]
    fn simulation_rejects_flat_likelihood() {
        let a = Hermitian::basis_projector(2, 0);
        let eig = ProjectiveMeasurement::computational(2);
        assert!(matches!(
            simulate_estimation(&plus(), &a, eig.as_povm(), 0.3, 100, 10, 0, &tol()),
            Err(Error::FlatLikelihood { .. })
        ));
    }
}
