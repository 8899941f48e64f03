//! Validated states and measurements, incoherence residuals, and seeded
//! random generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{
    check_finite, check_square, eigh, same_dim, CMatrix, CVector, Hermitian, Spectrum, Tolerances,
    ONE,
};

/// Trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-10;

/// Residual at or below which a state counts as incoherent.
pub const INCOHERENCE_TOL: f64 = 1e-10;

/// A unit-trace PSD operator with its cached spectral decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: Hermitian,
    spectrum: Spectrum,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity, in that order.
    pub fn new(m: CMatrix, tol: &Tolerances) -> Result<Self> {
        let h = Hermitian::new(m, tol)?;
        Self::from_hermitian(h, tol)
    }

    pub fn from_hermitian(h: Hermitian, tol: &Tolerances) -> Result<Self> {
        let residual = (h.trace_re() - 1.0).abs();
        if residual > TRACE_TOL {
            return Err(Error::TraceNotOne { residual });
        }
        let spectrum = eigh(&h)?;
        let min = spectrum.min_value();
        if min < -tol.psd {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        Ok(Self { matrix: h, spectrum })
    }

    /// Builds `Σ_l λ_l |φ_l⟩⟨φ_l|` and keeps the supplied frame as the cached
    /// spectrum instead of re-diagonalizing. `vectors` must be a unitary whose
    /// columns are the `|φ_l⟩`. Entries are reordered by descending weight
    /// (stable on ties).
    pub fn from_spectral(weights: &[f64], vectors: &CMatrix, tol: &Tolerances) -> Result<Self> {
        check_square(vectors)?;
        same_dim(vectors.nrows(), weights.len())?;
        crate::numerics::check_unitary(vectors, tol)?;
        if let Some(&w) = weights.iter().find(|w| !w.is_finite() || **w < -tol.psd) {
            return Err(Error::NotPsd { min_eigenvalue: w });
        }
        let sum: f64 = weights.iter().sum();
        let residual = (sum - 1.0).abs();
        if residual > TRACE_TOL {
            return Err(Error::TraceNotOne { residual });
        }
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
        let values: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
        let cols: Vec<CVector> = order.iter().map(|&i| vectors.column(i).into_owned()).collect();
        let spectrum = Spectrum {
            values,
            vectors: CMatrix::from_columns(&cols),
        };
        let matrix = Hermitian::symmetrized(spectrum.reconstruct());
        Ok(Self { matrix, spectrum })
    }

    /// `|ψ⟩⟨ψ|` for a normalized vector.
    pub fn pure(psi: &CVector, tol: &Tolerances) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Self::from_hermitian(Hermitian::outer(psi), tol)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        let h = Hermitian::identity(d).scale(1.0 / d as f64);
        let spectrum = Spectrum {
            values: vec![1.0 / d as f64; d],
            vectors: CMatrix::identity(d, d),
        };
        Self { matrix: h, spectrum }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.matrix.matrix()
    }

    pub fn hermitian(&self) -> &Hermitian {
        &self.matrix
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// Eigenvalues (descending) with small negative noise clipped to zero.
    pub fn clipped_eigenvalues(&self) -> Vec<f64> {
        self.spectrum.values.iter().map(|&l| l.max(0.0)).collect()
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &CMatrix, tol: &Tolerances) -> Result<Self> {
        Self::from_hermitian(self.matrix.conjugate_by(u), tol)
    }

    /// `p ρ_a + (1 − p) ρ_b`.
    pub fn mix(p: f64, a: &Self, b: &Self, tol: &Tolerances) -> Result<Self> {
        same_dim(a.dim(), b.dim())?;
        let m = a.matrix().scale(p) + b.matrix().scale(1.0 - p);
        Self::from_hermitian(Hermitian::symmetrized(m), tol)
    }
}

/// General measurement: PSD elements summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<Hermitian>,
    dim: usize,
}

impl Povm {
    pub fn new(ms: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        let first = ms.first().ok_or(Error::Empty("measurement"))?;
        check_square(first)?;
        let d = first.nrows();
        let mut elements = Vec::with_capacity(ms.len());
        for m in ms {
            check_square(&m)?;
            check_finite(&m)?;
            same_dim(d, m.nrows())?;
            elements.push(Hermitian::new(m, tol)?);
        }
        Self::from_hermitians(elements, tol)
    }

    pub fn from_hermitians(elements: Vec<Hermitian>, tol: &Tolerances) -> Result<Self> {
        let d = elements.first().ok_or(Error::Empty("measurement"))?.dim();
        for e in &elements {
            same_dim(d, e.dim())?;
            let min = eigh(e)?.min_value();
            if min < -tol.psd {
                return Err(Error::NotPsd { min_eigenvalue: min });
            }
        }
        let povm = Self { elements, dim: d };
        let residual = povm.completeness_residual();
        if residual > tol.recon {
            return Err(Error::CompletenessViolation { residual });
        }
        Ok(povm)
    }

    pub fn elements(&self) -> &[Hermitian] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `‖Σ_j E_j − I‖_F`.
    pub fn completeness_residual(&self) -> f64 {
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        for e in &self.elements {
            sum += e.matrix();
        }
        (sum - CMatrix::identity(self.dim, self.dim)).norm()
    }

    /// `max_{j,k} ‖E_jE_k − δ_jk E_j‖_F`.
    pub fn projectivity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, a) in self.elements.iter().enumerate() {
            for (k, b) in self.elements.iter().enumerate() {
                let mut prod = a.matrix() * b.matrix();
                if j == k {
                    prod -= a.matrix();
                }
                worst = worst.max(prod.norm());
            }
        }
        worst
    }
}

/// Projective measurement `P_jP_k = δ_jk P_j`, `Σ_j P_j = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveMeasurement {
    povm: Povm,
    block_dims: Vec<usize>,
}

impl ProjectiveMeasurement {
    pub fn new(ms: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        Self::from_povm(Povm::new(ms, tol)?, tol)
    }

    pub fn from_povm(povm: Povm, tol: &Tolerances) -> Result<Self> {
        let residual = povm.projectivity_residual();
        if residual > tol.recon {
            return Err(Error::NotProjective { residual });
        }
        let block_dims: Vec<usize> = povm
            .elements()
            .iter()
            .map(|p| p.trace_re().round().max(0.0) as usize)
            .collect();
        if block_dims.iter().sum::<usize>() != povm.dim() {
            return Err(Error::BadDimension(format!(
                "block ranks {block_dims:?} do not add up to {}",
                povm.dim()
            )));
        }
        Ok(Self { povm, block_dims })
    }

    /// Blocks spanned by consecutive columns of `basis` with the given sizes.
    pub fn from_blocks(basis: &CMatrix, block_dims: &[usize], tol: &Tolerances) -> Result<Self> {
        check_square(basis)?;
        crate::numerics::check_unitary(basis, tol)?;
        if block_dims.iter().sum::<usize>() != basis.nrows() {
            return Err(Error::BadDimension(format!(
                "block sizes {block_dims:?} do not add up to {}",
                basis.nrows()
            )));
        }
        let mut start = 0;
        let mut elements = Vec::with_capacity(block_dims.len());
        for &dj in block_dims {
            let q = basis.columns(start, dj);
            elements.push(Hermitian::symmetrized(q * q.adjoint()));
            start += dj;
        }
        let povm = Povm::from_hermitians(elements, tol)?;
        Ok(Self {
            povm,
            block_dims: block_dims.to_vec(),
        })
    }

    pub fn computational(d: usize) -> Self {
        let elements = (0..d).map(|j| Hermitian::basis_projector(d, j)).collect();
        Self {
            povm: Povm { elements, dim: d },
            block_dims: vec![1; d],
        }
    }

    pub fn as_povm(&self) -> &Povm {
        &self.povm
    }

    pub fn into_povm(self) -> Povm {
        self.povm
    }

    pub fn projectors(&self) -> &[Hermitian] {
        self.povm.elements()
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn len(&self) -> usize {
        self.povm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.povm.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.povm.dim()
    }

    /// Orthonormal basis of block `j` as the columns of a `d × d_j` matrix.
    pub fn block_isometry(&self, j: usize) -> Result<CMatrix> {
        let dj = self.block_dims[j];
        let spec = eigh(&self.projectors()[j])?;
        Ok(spec.vectors.columns(0, dj).into_owned())
    }

    pub fn is_rank_one(&self) -> bool {
        self.block_dims.iter().all(|&r| r == 1)
    }

    pub fn to_basis(&self, tol: &Tolerances) -> Option<BasisMeasurement> {
        if !self.is_rank_one() {
            return None;
        }
        let cols: Vec<CVector> = (0..self.len())
            .map(|j| self.block_isometry(j).map(|q| q.column(0).into_owned()))
            .collect::<Result<_>>()
            .ok()?;
        BasisMeasurement::new(CMatrix::from_columns(&cols), tol).ok()
    }
}

/// Rank-one projective measurement given by an orthonormal basis (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMeasurement {
    vectors: CMatrix,
}

impl BasisMeasurement {
    pub fn new(vectors: CMatrix, tol: &Tolerances) -> Result<Self> {
        check_square(&vectors)?;
        check_finite(&vectors)?;
        crate::numerics::check_unitary(&vectors, tol)?;
        Ok(Self { vectors })
    }

    pub fn computational(d: usize) -> Self {
        Self {
            vectors: CMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn projector(&self, j: usize) -> Hermitian {
        Hermitian::outer(&self.vectors.column(j).into_owned())
    }

    pub fn to_projective(&self) -> ProjectiveMeasurement {
        let d = self.dim();
        let elements = (0..d).map(|j| self.projector(j)).collect();
        ProjectiveMeasurement {
            povm: Povm { elements, dim: d },
            block_dims: vec![1; d],
        }
    }
}

/// Outcome of measurement validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Measurement {
    General(Povm),
    Projective(ProjectiveMeasurement),
}

impl Measurement {
    pub fn povm(&self) -> &Povm {
        match self {
            Measurement::General(p) => p,
            Measurement::Projective(p) => p.as_povm(),
        }
    }

    pub fn into_povm(self) -> Povm {
        match self {
            Measurement::General(p) => p,
            Measurement::Projective(p) => p.into_povm(),
        }
    }

    pub fn projective(&self) -> Option<&ProjectiveMeasurement> {
        match self {
            Measurement::Projective(p) => Some(p),
            Measurement::General(_) => None,
        }
    }

    pub fn is_basis(&self) -> bool {
        self.projective().is_some_and(|p| p.is_rank_one())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Measurement::General(_) => "povm",
            Measurement::Projective(p) if p.is_rank_one() => "basis",
            Measurement::Projective(_) => "projective",
        }
    }
}

/// Validates a POVM and upgrades it to a projective measurement when the
/// elements are orthogonal projectors.
pub fn validate_povm(ms: Vec<CMatrix>, tol: &Tolerances) -> Result<Measurement> {
    let povm = Povm::new(ms, tol)?;
    if povm.projectivity_residual() <= tol.recon {
        Ok(Measurement::Projective(ProjectiveMeasurement::from_povm(povm, tol)?))
    } else {
        Ok(Measurement::General(povm))
    }
}

/// `max_{j≠k} ‖E_j ρ E_k‖_F`; zero when the measurement has one element.
pub fn incoherence_residual(rho: &DensityMatrix, povm: &Povm) -> Result<f64> {
    same_dim(povm.dim(), rho.dim())?;
    let els = povm.elements();
    let left: Vec<CMatrix> = els.iter().map(|e| e.matrix() * rho.matrix()).collect();
    let mut worst: f64 = 0.0;
    for (j, lj) in left.iter().enumerate() {
        for (k, ek) in els.iter().enumerate() {
            if j != k {
                worst = worst.max((lj * ek.matrix()).norm());
            }
        }
    }
    Ok(worst)
}

/// `Σ_j P_j ρ P_j`.
pub fn block_dephase(rho: &CMatrix, p: &ProjectiveMeasurement) -> CMatrix {
    let d = rho.nrows();
    let mut out = CMatrix::zeros(d, d);
    for pj in p.projectors() {
        out += pj.matrix() * rho * pj.matrix();
    }
    out
}

// ---------------------------------------------------------------------------
// random generators

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with stream indices (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: &[u64]) -> u64 {
    let mut x = seed;
    for &s in stream {
        x ^= s.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(x << 6).wrapping_add(x >> 2);
        x = splitmix(x);
    }
    splitmix(x)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        num_complex::Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-random unitary (QR of a Ginibre matrix with the phase of `R` removed).
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(d, d, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let phase = if n > 0.0 { rjj / n } else { ONE };
        for x in q.column_mut(j).iter_mut() {
            *x *= phase;
        }
    }
    q
}

pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Hermitian {
    Hermitian::symmetrized(ginibre(d, d, rng))
}

/// Normalized Haar-random pure state vector.
pub fn random_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    let g = ginibre(d, 1, rng).column(0).into_owned();
    let n = g.norm();
    g.unscale(n)
}

pub fn random_state_with<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> Result<DensityMatrix> {
    if rank == 0 || rank > d {
        return Err(Error::BadRank { rank, dim: d });
    }
    let g = ginibre(d, rank, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::from_hermitian(Hermitian::symmetrized(m.unscale(tr)), &Tolerances::default())
}

/// Random state `GG†/tr(GG†)` with `G` a `d × rank` Ginibre matrix.
pub fn random_state(d: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    random_state_with(d, rank, &mut rng_from_seed(seed))
}

pub fn random_povm_with<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Result<Povm> {
    let tol = Tolerances::default();
    if n == 0 {
        return Err(Error::Empty("measurement"));
    }
    if d == 0 {
        return Err(Error::BadDimension("dimension must be positive".into()));
    }
    if n == 1 {
        return Povm::from_hermitians(vec![Hermitian::identity(d)], &tol);
    }
    let gs: Vec<CMatrix> = (0..n)
        .map(|_| {
            let x = ginibre(d, d, rng);
            &x * x.adjoint()
        })
        .collect();
    let mut s = CMatrix::zeros(d, d);
    for g in &gs {
        s += g;
    }
    let spec = eigh(&Hermitian::symmetrized(s))?;
    let min = spec.min_value();
    if min <= 1e-12 * spec.max_value() {
        return Err(Error::NumericalFailure(format!(
            "element sum is singular (min eigenvalue {min:e})"
        )));
    }
    let inv_sqrt: Vec<f64> = spec.values.iter().map(|&l| 1.0 / l.sqrt()).collect();
    let w = crate::numerics::spectral_function(&spec, &inv_sqrt);
    let elements = gs
        .iter()
        .map(|g| Hermitian::symmetrized(&w * g * &w))
        .collect();
    Povm::from_hermitians(elements, &tol)
}

/// Random POVM `E_j = S^{-1/2} G_j S^{-1/2}` with `S = Σ_j G_j` and Wishart `G_j`.
pub fn random_povm(d: usize, n: usize, seed: u64) -> Result<Povm> {
    random_povm_with(d, n, &mut rng_from_seed(seed))
}

/// Random composition of `d` into `blocks` positive parts.
pub fn random_block_dims<R: Rng + ?Sized>(d: usize, blocks: usize, rng: &mut R) -> Vec<usize> {
    assert!(blocks >= 1 && blocks <= d);
    let mut cuts: Vec<usize> = Vec::with_capacity(blocks - 1);
    while cuts.len() < blocks - 1 {
        let c = rng.random_range(1..d);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut dims = Vec::with_capacity(blocks);
    let mut prev = 0;
    for c in cuts.into_iter().chain(std::iter::once(d)) {
        dims.push(c - prev);
        prev = c;
    }
    dims
}

/// Random projective measurement with between `min_blocks` and `d` blocks in
/// a Haar-random frame.
pub fn random_projective_with<R: Rng + ?Sized>(
    d: usize,
    min_blocks: usize,
    rng: &mut R,
) -> Result<ProjectiveMeasurement> {
    let lo = min_blocks.clamp(1, d);
    let blocks = rng.random_range(lo..=d);
    let dims = random_block_dims(d, blocks, rng);
    let u = haar_unitary(d, rng);
    ProjectiveMeasurement::from_blocks(&u, &dims, &Tolerances::default())
}

pub fn random_projective(d: usize, seed: u64) -> Result<ProjectiveMeasurement> {
    random_projective_with(d, 2, &mut rng_from_seed(seed))
}

pub fn random_basis(d: usize, seed: u64) -> BasisMeasurement {
    BasisMeasurement {
        vectors: haar_unitary(d, &mut rng_from_seed(seed)),
    }
}

pub fn random_block_incoherent_state_with<R: Rng + ?Sized>(
    p: &ProjectiveMeasurement,
    rng: &mut R,
) -> Result<DensityMatrix> {
    let d = p.dim();
    let raw: Vec<f64> = p
        .block_dims()
        .iter()
        .map(|&dj| if dj == 0 { 0.0 } else { rng.random_range(0.05..1.0) })
        .collect();
    let total: f64 = raw.iter().sum();
    let mut out = CMatrix::zeros(d, d);
    for (pj, &w) in p.projectors().iter().zip(&raw) {
        if w == 0.0 {
            continue;
        }
        let sigma = random_state_with(d, d, rng)?;
        let block = pj.matrix() * sigma.matrix() * pj.matrix();
        let tr = block.trace().re;
        out += block.scale(w / (total * tr));
    }
    DensityMatrix::from_hermitian(Hermitian::symmetrized(out), &Tolerances::default())
}

/// `Σ_j p_j P_jσ_jP_j / tr(P_jσ_jP_j)` with random `σ_j` and weights.
pub fn random_block_incoherent_state(p: &ProjectiveMeasurement, seed: u64) -> Result<DensityMatrix> {
    random_block_incoherent_state_with(p, &mut rng_from_seed(seed))
}
