//! Convex-roof extension of the QFI coherence measure.
//!
//! Every pure-state ensemble `{p_k, ψ_k}` of `ρ` with `d'` members arises
//! from a `d' × d'` unitary `U` through `√p_k |ψ_k⟩ = Σ_l U_kl √λ_l |φ_l⟩`,
//! where `λ_l, φ_l` is the eigendecomposition of `ρ` padded with zero
//! eigenvalues. The roof is the minimum over `U` of the ensemble average of
//! the pure-state measure; it never falls below the measure itself, and it
//! equals it exactly when the `Y` matrices of the POVM elements commute.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::coherence::cf_direct;
use crate::error::{Error, Result};
use crate::numerics::{
    comm_norm, eigh, same_dim, trace_product_re, unitarity_residual, CMatrix, CVector, Hermitian,
    Spectrum, Tolerances, ZERO,
};
use crate::qfi::{effective_eigenvalues, pure_qfi};
use crate::states::{derive_seed, haar_unitary, rng_from_seed, DensityMatrix, Povm};

/// Ensemble members with weight at or below this are dropped.
pub const WEIGHT_FLOOR: f64 = 1e-14;

/// `Y_A` in the eigenbasis of `ρ`:
/// `Y_ll' = 2√(λ_lλ_l')/(λ_l + λ_l') ⟨φ_l|A|φ_l'⟩`, zero on zero pairs.
pub fn y_matrix(rho: &DensityMatrix, a: &Hermitian, tol: &Tolerances) -> Result<Hermitian> {
    same_dim(rho.dim(), a.dim())?;
    let lam = effective_eigenvalues(rho, tol);
    let thresh = tol.zero_eig * lam.iter().copied().fold(0.0, f64::max);
    let mut y = rho.spectrum().in_eigenbasis(a.matrix());
    let d = lam.len();
    for l in 0..d {
        for m in 0..d {
            let s = lam[l] + lam[m];
            let c = if s <= thresh {
                0.0
            } else {
                2.0 * (lam[l] * lam[m]).sqrt() / s
            };
            y[(l, m)] *= c;
        }
    }
    Ok(Hermitian::symmetrized(y))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub commutes: bool,
    pub max_comm_norm: f64,
    pub threshold: f64,
}

/// Whether the `Y` matrices of the given operators pairwise commute.
pub fn commutation_criterion_for(
    rho: &DensityMatrix,
    ops: &[Hermitian],
    tol: &Tolerances,
) -> Result<CriterionResult> {
    let ys: Vec<Hermitian> = ops.iter().map(|a| y_matrix(rho, a, tol)).collect::<Result<_>>()?;
    criterion_from_ys(&ys, tol)
}

pub fn commutation_criterion(rho: &DensityMatrix, povm: &Povm, tol: &Tolerances) -> Result<CriterionResult> {
    same_dim(povm.dim(), rho.dim())?;
    commutation_criterion_for(rho, povm.elements(), tol)
}

fn criterion_from_ys(ys: &[Hermitian], tol: &Tolerances) -> Result<CriterionResult> {
    let mut max_comm_norm: f64 = 0.0;
    for (j, a) in ys.iter().enumerate() {
        for b in &ys[j + 1..] {
            max_comm_norm = max_comm_norm.max(comm_norm(a, b)?);
        }
    }
    let max_y = ys.iter().map(|y| y.matrix().norm_squared()).fold(0.0, f64::max);
    let threshold = tol.commute * (1.0 + max_y);
    Ok(CriterionResult {
        commutes: max_comm_norm <= threshold,
        max_comm_norm,
        threshold,
    })
}

/// Weights and normalized member vectors (columns) of a pure-state ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct PureStateEnsemble {
    pub weights: Vec<f64>,
    pub vectors: CMatrix,
}

impl PureStateEnsemble {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn member(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }

    /// `Σ_k p_k |ψ_k⟩⟨ψ_k|`.
    pub fn reconstruct(&self) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for (k, &p) in self.weights.iter().enumerate() {
            let v = self.vectors.column(k);
            out += (v * v.adjoint()).scale(p);
        }
        out
    }

    pub fn reconstruction_residual(&self, rho: &DensityMatrix) -> f64 {
        (self.reconstruct() - rho.matrix()).norm()
    }
}

fn padded_eigenvalues(rho: &DensityMatrix, dprime: usize) -> Vec<f64> {
    let mut lam = rho.clipped_eigenvalues();
    lam.resize(dprime, 0.0);
    lam
}

fn check_ensemble_unitary(rho: &DensityMatrix, u: &CMatrix, tol: &Tolerances) -> Result<()> {
    if !u.is_square() || u.nrows() < rho.dim() {
        return Err(Error::BadDimension(format!(
            "ensemble unitary must be square with size >= {}, got {}x{}",
            rho.dim(),
            u.nrows(),
            u.ncols()
        )));
    }
    let residual = unitarity_residual(u);
    if residual > tol.ortho {
        return Err(Error::NotUnitary { residual });
    }
    Ok(())
}

/// Ensemble with `√p_k |ψ_k⟩ = Σ_l U_kl √λ_l |φ_l⟩`. Zero-weight members
/// are dropped.
pub fn ensemble_from_unitary(rho: &DensityMatrix, u: &CMatrix, tol: &Tolerances) -> Result<PureStateEnsemble> {
    check_ensemble_unitary(rho, u, tol)?;
    Ok(ensemble_unchecked(rho, u))
}

fn ensemble_unchecked(rho: &DensityMatrix, u: &CMatrix) -> PureStateEnsemble {
    let d = rho.dim();
    let lam = rho.clipped_eigenvalues();
    let phi = &rho.spectrum().vectors;
    let mut weights = Vec::new();
    let mut cols = Vec::new();
    for k in 0..u.nrows() {
        let mut x = CVector::zeros(d);
        for l in 0..d {
            let c = u[(k, l)] * lam[l].sqrt();
            if c != ZERO {
                x += phi.column(l) * c;
            }
        }
        let p = x.norm_squared();
        if p > WEIGHT_FLOOR {
            weights.push(p);
            cols.push(x.unscale(p.sqrt()));
        }
    }
    PureStateEnsemble {
        weights,
        vectors: if cols.is_empty() {
            CMatrix::zeros(d, 0)
        } else {
            CMatrix::from_columns(&cols)
        },
    }
}

/// `max_{j,k} |tr(Γ_jΓ_k)/√(p_jp_k) − δ_jk|` over members with nonzero
/// weight, with `Γ_k = Σ_{l,l'} √((λ_l+λ_l')/2) U_kl U*_kl' |φ_l⟩⟨φ_l'|`.
pub fn gamma_check(rho: &DensityMatrix, u: &CMatrix, tol: &Tolerances) -> Result<f64> {
    check_ensemble_unitary(rho, u, tol)?;
    let dp = u.nrows();
    let lam = padded_eigenvalues(rho, dp);
    // Γ_k in the padded eigenframe; trace is frame independent
    let mut gammas = Vec::new();
    let mut weights = Vec::new();
    for k in 0..dp {
        let p: f64 = (0..dp).map(|l| lam[l] * u[(k, l)].norm_sqr()).sum();
        if p <= WEIGHT_FLOOR {
            continue;
        }
        let g = CMatrix::from_fn(dp, dp, |l, m| {
            u[(k, l)] * u[(k, m)].conj() * ((lam[l] + lam[m]) / 2.0).sqrt()
        });
        gammas.push(g);
        weights.push(p);
    }
    let mut worst: f64 = 0.0;
    for (j, gj) in gammas.iter().enumerate() {
        for (k, gk) in gammas.iter().enumerate() {
            let ip = (gj * gk).trace().re / (weights[j] * weights[k]).sqrt();
            let target = if j == k { 1.0 } else { 0.0 };
            worst = worst.max((ip - target).abs());
        }
    }
    Ok(worst)
}

/// `Σ_k p_k Σ_j F(ψ_k, E_j)`.
pub fn average_pure_cf(ens: &PureStateEnsemble, povm: &Povm) -> Result<f64> {
    same_dim(povm.dim(), ens.dim())?;
    let mut total = 0.0;
    for (k, &p) in ens.weights.iter().enumerate() {
        if p <= WEIGHT_FLOOR {
            continue;
        }
        let psi = ens.member(k);
        let mut member = 0.0;
        for e in povm.elements() {
            member += pure_qfi(&psi, e)?;
        }
        total += p * member;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// optimizer

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoofConfig {
    /// Ensemble size; defaults to `dim(ρ)`.
    pub dprime: Option<usize>,
    pub starts: usize,
    pub max_iter: usize,
    /// Stop once the objective improves by less than this over
    /// [`STALL_WINDOW`] iterations.
    pub tol: f64,
    pub seed: u64,
}

impl Default for RoofConfig {
    fn default() -> Self {
        Self {
            dprime: None,
            starts: 16,
            max_iter: 2000,
            tol: 1e-10,
            seed: 0,
        }
    }
}

pub const STALL_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct RoofResult {
    pub lower_bound: f64,
    pub roof_value: f64,
    pub ensemble: PureStateEnsemble,
    pub unitary: CMatrix,
    pub criterion_commutes: bool,
    pub max_comm_norm: f64,
    pub starts_used: usize,
    pub best_start: usize,
    /// Iterations taken by the best start.
    pub iterations: usize,
    pub total_iterations: usize,
}

/// Ensemble average expressed through the unnormalized member coordinates.
///
/// With `u_k` the `k`-th row of `U` (as a column vector), `M_j = D Ẽ_j D`
/// and `N = D²` where `D = diag(√λ)` and `Ẽ_j` is `E_j` in the eigenframe,
/// the average equals `c − 4 Σ_k Σ_j (u_k†M_ju_k)² / (u_k†Nu_k)`.
struct RoofObjective {
    m: Vec<CMatrix>,
    lam: Vec<f64>,
    constant: f64,
}

impl RoofObjective {
    fn new(rho: &DensityMatrix, povm: &Povm, dprime: usize) -> Self {
        let d = rho.dim();
        let lam = padded_eigenvalues(rho, dprime);
        let spec: &Spectrum = rho.spectrum();
        let mut constant = 0.0;
        let m = povm
            .elements()
            .iter()
            .map(|e| {
                let e2 = e.matrix() * e.matrix();
                constant += 4.0 * trace_product_re(rho.matrix(), &e2);
                let et = spec.in_eigenbasis(e.matrix());
                CMatrix::from_fn(dprime, dprime, |l, k| {
                    if l < d && k < d {
                        et[(l, k)] * (lam[l] * lam[k]).sqrt()
                    } else {
                        ZERO
                    }
                })
            })
            .collect();
        Self { m, lam, constant }
    }

    /// Value and the Hermitian ascent direction `C` of the subtracted sum,
    /// for members stored as the columns of `r = Uᵀ`. Moving
    /// `r → exp(iεK) r` changes the value by `−4ε tr(KC) + O(ε²)`.
    fn evaluate(&self, r: &CMatrix) -> (f64, CMatrix) {
        let dp = r.nrows();
        let mut g = 0.0;
        let mut c = CMatrix::zeros(dp, dp);
        let i = num_complex::Complex64::new(0.0, 1.0);
        for k in 0..r.ncols() {
            let u = r.column(k);
            let n: f64 = (0..dp).map(|l| self.lam[l] * u[l].norm_sqr()).sum();
            if n <= WEIGHT_FLOOR {
                continue;
            }
            let mus: Vec<CVector> = self.m.iter().map(|m| m * u).collect();
            let a: Vec<f64> = mus.iter().map(|mu| u.dotc(mu).re).collect();
            let sq: f64 = a.iter().map(|x| x * x).sum();
            g += sq / n;
            // w = B u, B = Σ_j (2a_j/n) M_j − (Σ_j a_j²/n²) N
            let mut w = CVector::zeros(dp);
            for (aj, mu) in a.iter().zip(&mus) {
                w += mu * num_complex::Complex64::new(2.0 * aj / n, 0.0);
            }
            let s = sq / (n * n);
            for l in 0..dp {
                w[l] -= u[l] * (s * self.lam[l]);
            }
            let uw = u * w.adjoint();
            c += (&uw - uw.adjoint()) * i;
        }
        (self.constant - 4.0 * g, c)
    }
}

struct StartOutcome {
    value: f64,
    r: CMatrix,
    iterations: usize,
}

fn local_descent(obj: &RoofObjective, mut r: CMatrix, cfg: &RoofConfig) -> Result<StartOutcome> {
    let (mut f, mut c) = obj.evaluate(&r);
    let mut history = vec![f];
    let mut step = 0.1;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let slope = 4.0 * trace_product_re(&c, &c);
        if slope <= 1e-28 {
            break;
        }
        let spec = eigh(&Hermitian::symmetrized(c.clone()))?;
        let mut accepted = None;
        let mut trial_step = step * 2.0;
        while trial_step > 1e-16 {
            let rot = rotation(&spec, trial_step);
            let r_new = &rot * &r;
            let (f_new, c_new) = obj.evaluate(&r_new);
            if f_new <= f - 1e-4 * trial_step * slope {
                accepted = Some((r_new, f_new, c_new));
                break;
            }
            trial_step *= 0.5;
        }
        let Some((r_new, f_new, c_new)) = accepted else {
            break;
        };
        step = trial_step;
        r = r_new;
        f = f_new;
        c = c_new;
        iterations += 1;
        history.push(f);
        if history.len() > STALL_WINDOW && history[history.len() - 1 - STALL_WINDOW] - f < cfg.tol {
            break;
        }
    }
    Ok(StartOutcome {
        value: f,
        r,
        iterations,
    })
}

/// `exp(iεC)` from a cached eigendecomposition of `C`.
fn rotation(spec: &Spectrum, eps: f64) -> CMatrix {
    let v = &spec.vectors;
    let mut scaled = v.clone();
    for (l, &mu) in spec.values.iter().enumerate() {
        let ph = num_complex::Complex64::from_polar(1.0, eps * mu);
        for x in scaled.column_mut(l).iter_mut() {
            *x *= ph;
        }
    }
    scaled * v.adjoint()
}

/// Multi-start minimization of the ensemble-averaged measure over the
/// unitary group. Each local step moves along `exp(iεC)` with `C` the
/// Hermitian steepest-descent generator and `ε` chosen by backtracking.
/// Starts run in parallel; the winner is the lowest value, ties going to
/// the lower start index.
pub fn convex_roof_minimize(
    rho: &DensityMatrix,
    povm: &Povm,
    cfg: &RoofConfig,
    tol: &Tolerances,
) -> Result<RoofResult> {
    same_dim(povm.dim(), rho.dim())?;
    let d = rho.dim();
    let dprime = cfg.dprime.unwrap_or(d);
    if dprime < d || dprime > d * d {
        return Err(Error::ConfigInvalid(format!(
            "ensemble size must lie in [{d}, {}], got {dprime}",
            d * d
        )));
    }
    if cfg.starts == 0 {
        return Err(Error::ConfigInvalid("at least one start is required".into()));
    }
    if !(cfg.tol.is_finite() && cfg.tol >= 0.0) {
        return Err(Error::ConfigInvalid(format!("tolerance must be nonnegative, got {}", cfg.tol)));
    }

    let obj = RoofObjective::new(rho, povm, dprime);
    let outcomes: Vec<StartOutcome> = (0..cfg.starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, &[s as u64]));
            let r0 = haar_unitary(dprime, &mut rng);
            local_descent(&obj, r0, cfg)
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (s, o) in outcomes.iter().enumerate() {
        if o.value < outcomes[best].value {
            best = s;
        }
    }
    let total_iterations = outcomes.iter().map(|o| o.iterations).sum();
    let u = outcomes[best].r.transpose();
    let ensemble = ensemble_unchecked(rho, &u);
    let roof_value = average_pure_cf(&ensemble, povm)?;
    let lower_bound = cf_direct(rho, povm, tol)?;
    let crit = commutation_criterion(rho, povm, tol)?;
    Ok(RoofResult {
        lower_bound,
        roof_value,
        ensemble,
        unitary: u,
        criterion_commutes: crit.commutes,
        max_comm_norm: crit.max_comm_norm,
        starts_used: cfg.starts,
        best_start: best,
        iterations: outcomes[best].iterations,
        total_iterations,
    })
}

/// Ensemble generated by a joint diagonalizer of the `Y_{E_j}`, together
/// with the real coefficients `r_k` of each `Y_{E_j}` in that frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutingEnsemble {
    pub ensemble: PureStateEnsemble,
    pub unitary: CMatrix,
    /// `coefficients[j][k]` is the `k`-th eigenvalue of `Y_{E_j}`.
    pub coefficients: Vec<Vec<f64>>,
}

const JOINT_DIAG_ATTEMPTS: usize = 8;

/// `None` when the `Y` matrices do not commute.
///
/// A random combination `Σ_j w_j Y_j` is diagonalized and every `Y_j` is
/// checked to be diagonal in its eigenframe; degenerate combinations are
/// retried with fresh weights. The ensemble unitary has the eigenvectors as
/// its rows, i.e. `U = Qᵀ`.
pub fn commuting_optimal_ensemble(
    rho: &DensityMatrix,
    povm: &Povm,
    tol: &Tolerances,
) -> Result<Option<CommutingEnsemble>> {
    same_dim(povm.dim(), rho.dim())?;
    let ys: Vec<Hermitian> = povm
        .elements()
        .iter()
        .map(|e| y_matrix(rho, e, tol))
        .collect::<Result<_>>()?;
    if !criterion_from_ys(&ys, tol)?.commutes {
        return Ok(None);
    }
    let d = rho.dim();
    let mut rng = rng_from_seed(0x6a6f_696e_7464_6961);
    for _ in 0..JOINT_DIAG_ATTEMPTS {
        let mut s = CMatrix::zeros(d, d);
        for y in &ys {
            let w: f64 = rng.random_range(0.5..1.5);
            s += y.matrix().scale(w);
        }
        let q = eigh(&Hermitian::symmetrized(s))?.vectors;
        let mut ok = true;
        let mut coefficients = Vec::with_capacity(ys.len());
        for y in &ys {
            let t = q.adjoint() * y.matrix() * &q;
            let mut off: f64 = 0.0;
            for a in 0..d {
                for b in 0..d {
                    if a != b {
                        off = off.max(t[(a, b)].norm());
                    }
                }
            }
            if off > tol.commute * (1.0 + y.matrix().norm()) {
                ok = false;
                break;
            }
            coefficients.push((0..d).map(|k| t[(k, k)].re).collect());
        }
        if ok {
            let u = q.transpose();
            let ensemble = ensemble_from_unitary(rho, &u, tol)?;
            return Ok(Some(CommutingEnsemble {
                ensemble,
                unitary: u,
                coefficients,
            }));
        }
    }
    Err(Error::NumericalFailure(
        "joint diagonalization failed although the Y matrices commute".into(),
    ))
}

// ---------------------------------------------------------------------------
// the three-level counterexample

fn fourier_vectors() -> CMatrix {
    let w = num_complex::Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let s = 1.0 / 3f64.sqrt();
    let one = num_complex::Complex64::new(1.0, 0.0);
    let cols = [
        CVector::from_vec(vec![one, one, one]),
        CVector::from_vec(vec![one, w, w.conj()]),
        CVector::from_vec(vec![one, w.conj(), w]),
    ];
    CMatrix::from_columns(&cols).scale(s)
}

/// `ρ = (|φ_1⟩⟨φ_1| + |φ_2⟩⟨φ_2|)/2` with `φ_1 = (1,1,1)/√3` and
/// `φ_2 = (1, ω, ω*)/√3`, `ω = e^{2πi/3}`. The cached frame is
/// `(φ_1, φ_2, φ_3)` with `φ_3 = (1, ω*, ω)/√3` spanning the kernel.
pub fn counterexample_state() -> Result<DensityMatrix> {
    DensityMatrix::from_spectral(&[0.5, 0.5, 0.0], &fourier_vectors(), &Tolerances::default())
}

/// The expected `Y_{|j⟩⟨j|}` of the counterexample, `j = 1, 2, 3`.
pub fn counterexample_expected_y() -> [CMatrix; 3] {
    let w = num_complex::Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let one = num_complex::Complex64::new(1.0, 0.0);
    let make = |z: num_complex::Complex64| {
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 0)] = one;
        m[(1, 1)] = one;
        m[(0, 1)] = z;
        m[(1, 0)] = z.conj();
        m.scale(1.0 / 3.0)
    };
    [make(one), make(w), make(w.conj())]
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleReport {
    pub y_matrices: Vec<CMatrix>,
    pub expected_y: Vec<CMatrix>,
    pub max_entry_deviation: f64,
    /// `‖[Y_i, Y_j]‖_F` for `(i, j)` = (1,2), (1,3), (2,3).
    pub commutator_norms: Vec<f64>,
    pub criterion: CriterionResult,
    pub roof: RoofResult,
}

pub fn reproduce_counterexample(cfg: &RoofConfig, tol: &Tolerances) -> Result<CounterexampleReport> {
    let rho = counterexample_state()?;
    let basis = crate::states::ProjectiveMeasurement::computational(3);
    let ys: Vec<Hermitian> = basis
        .projectors()
        .iter()
        .map(|p| y_matrix(&rho, p, tol))
        .collect::<Result<_>>()?;
    let expected: Vec<CMatrix> = counterexample_expected_y().into_iter().collect();
    let mut max_entry_deviation: f64 = 0.0;
    for (y, e) in ys.iter().zip(&expected) {
        for (a, b) in y.matrix().iter().zip(e.iter()) {
            max_entry_deviation = max_entry_deviation.max((a - b).norm());
        }
    }
    let mut commutator_norms = Vec::new();
    for i in 0..3 {
        for j in i + 1..3 {
            commutator_norms.push(comm_norm(&ys[i], &ys[j])?);
        }
    }
    let criterion = criterion_from_ys(&ys, tol)?;
    let roof = convex_roof_minimize(&rho, basis.as_povm(), cfg, tol)?;
    Ok(CounterexampleReport {
        y_matrices: ys.into_iter().map(Hermitian::into_inner).collect(),
        expected_y: expected,
        max_entry_deviation,
        commutator_norms,
        criterion,
        roof,
    })
}
