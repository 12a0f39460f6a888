//! Expanding matrices, their spectra, and the renormed vector norm.
//!
//! An expanding matrix stretches every direction eventually, but a single
//! application may still shrink some vectors (rotation + shear). The renormed
//! norm repairs that: with `θ` strictly between 1 and the smallest eigenvalue
//! modulus,
//!
//! ```text
//! ‖x‖′ = Σ_{k=0}^{m-1} θ^{-k} ‖A^k x‖₂
//! ```
//!
//! satisfies `‖Ax‖′ ≥ θ·‖x‖′` for every `x` as soon as `m` is large enough
//! that `σ_min(A^m) ≥ θ^m` (that condition is exactly what the telescoping of
//! the sum needs). Under `‖·‖′` the annulus between the unit ball and its
//! `A`-image is a genuine fundamental domain for the action of powers of `A`,
//! which is what the pseudo norm construction builds on.

use nalgebra::DMatrix;
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest supported ambient dimension (desk scale).
pub const MAX_DIM: usize = 8;

/// Renorming horizon cap: `build_renorm` fails past this.
pub const RENORM_HORIZON_CAP: usize = 64;

/// Length of the cached operator-norm tables (powers of A and A⁻¹).
const OP_TABLE_LEN: usize = 96;

// ---------------------------------------------------------------------------
// ExpandingMatrix
// ---------------------------------------------------------------------------

/// A validated expanding matrix with cached inverse, spectrum, and (when the
/// entries are integral/rational) exact representations.
#[derive(Debug, Clone)]
pub struct ExpandingMatrix {
    pub n: usize,
    mat: DMatrix<f64>,
    inv: DMatrix<f64>,
    /// Row-major integer entries when every entry is an exact integer.
    int_rows: Option<Vec<i64>>,
    /// Row-major rational entries when constructed from rationals.
    rat_rows: Option<Vec<BigRational>>,
    /// Eigenvalue moduli, ascending.
    pub eig_moduli: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub det: f64,
    /// `q = |det A|` — the volume expansion factor.
    pub q: f64,
}

/// Spectral summary of an expanding matrix.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub moduli: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub q: f64,
}

impl ExpandingMatrix {
    /// Build from row-major float entries. Rejects singular or non-expanding
    /// matrices and unsupported dimensions.
    pub fn from_f64(n: usize, entries: &[f64]) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::UnsupportedDimension { n, context: "matrix dimension".into() });
        }
        if entries.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "matrix needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        let mat = DMatrix::from_row_slice(n, n, entries);
        let det = mat.determinant();
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(Error::Singular { det });
        }
        let inv = mat
            .clone()
            .try_inverse()
            .ok_or(Error::Singular { det })?;
        let mut moduli: Vec<f64> = mat.complex_eigenvalues().iter().map(|z| z.norm()).collect();
        moduli.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lambda_min = moduli[0];
        let lambda_max = moduli[n - 1];
        if lambda_min <= 1.0 {
            return Err(Error::NotExpanding { modulus: lambda_min });
        }
        let int_rows = entries_as_i64(entries);
        Ok(Self {
            n,
            mat,
            inv,
            int_rows,
            rat_rows: None,
            eig_moduli: moduli,
            lambda_min,
            lambda_max,
            det,
            q: det.abs(),
        })
    }

    /// Build from row-major integer entries (exact representation retained).
    pub fn from_i64(n: usize, entries: &[i64]) -> Result<Self> {
        let floats: Vec<f64> = entries.iter().map(|&v| v as f64).collect();
        let mut m = Self::from_f64(n, &floats)?;
        m.int_rows = Some(entries.to_vec());
        // Integer matrices have integer determinants; snap q to kill float fuzz.
        m.q = m.det.abs().round();
        Ok(m)
    }

    /// Build from row-major rational entries (exact representation retained).
    pub fn from_rational(n: usize, entries: Vec<BigRational>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "matrix needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        let floats: Vec<f64> = entries
            .iter()
            .map(|r| r.to_f64().ok_or_else(|| Error::InvalidParameter("rational entry out of f64 range".into())))
            .collect::<Result<_>>()?;
        let mut m = Self::from_f64(n, &floats)?;
        m.rat_rows = Some(entries);
        Ok(m)
    }

    pub fn is_integral(&self) -> bool {
        self.int_rows.is_some()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inv
    }

    pub fn int_rows(&self) -> Option<&[i64]> {
        self.int_rows.as_deref()
    }

    pub fn rat_rows(&self) -> Option<&[BigRational]> {
        self.rat_rows.as_deref()
    }

    /// `A·x` in floats.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.mat, x)
    }

    /// `A⁻¹·x` in floats (cached inverse).
    pub fn apply_inv(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.inv, x)
    }

    /// `A·x` exactly over i128, with overflow detection.
    pub fn apply_int(&self, x: &[i128]) -> Result<Vec<i128>> {
        let rows = self
            .int_rows
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("matrix has no exact integer form".into()))?;
        let n = self.n;
        let mut out = vec![0i128; n];
        for i in 0..n {
            let mut acc: i128 = 0;
            for j in 0..n {
                let term = (rows[i * n + j] as i128)
                    .checked_mul(x[j])
                    .ok_or_else(|| Error::NumericOverflow { context: "A·x".into() })?;
                acc = acc
                    .checked_add(term)
                    .ok_or_else(|| Error::NumericOverflow { context: "A·x".into() })?;
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// `A·x` exactly over rationals.
    pub fn apply_rat(&self, x: &[BigRational]) -> Result<Vec<BigRational>> {
        let n = self.n;
        let rows: Vec<BigRational> = match (&self.rat_rows, &self.int_rows) {
            (Some(r), _) => r.clone(),
            (None, Some(ir)) => ir.iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect(),
            (None, None) => {
                return Err(Error::InvalidParameter("matrix has no exact rational form".into()))
            }
        };
        let mut out = vec![BigRational::zero(); n];
        for i in 0..n {
            let mut acc = BigRational::zero();
            for j in 0..n {
                acc += &rows[i * n + j] * &x[j];
            }
            out[i] = acc;
        }
        Ok(out)
    }
}

/// Spectral summary (eigenvalue moduli ascending, extremes, volume factor).
pub fn spectral_data(a: &ExpandingMatrix) -> SpectralData {
    SpectralData {
        moduli: a.eig_moduli.clone(),
        lambda_min: a.lambda_min,
        lambda_max: a.lambda_max,
        q: a.q,
    }
}

/// Apply `A^k` (k may be negative) to a float vector by repeated
/// multiplication with the cached matrix/inverse. For exact integer systems
/// and k ≥ 0 the float result coincides with the exact one as long as entries
/// stay below 2^53.
pub fn matrix_power_apply(a: &ExpandingMatrix, k: i64, x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    if k >= 0 {
        for _ in 0..k {
            v = a.apply(&v);
        }
    } else {
        for _ in 0..(-k) {
            v = a.apply_inv(&v);
        }
    }
    v
}

fn entries_as_i64(entries: &[f64]) -> Option<Vec<i64>> {
    let mut out = Vec::with_capacity(entries.len());
    for &v in entries {
        if v.fract() != 0.0 || v.abs() > 9.0e15 {
            return None;
        }
        out.push(v as i64);
    }
    Some(out)
}

fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let n = m.nrows();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += m[(i, j)] * x[j];
        }
        out[i] = acc;
    }
    out
}

// ---------------------------------------------------------------------------
// RenormedNorm
// ---------------------------------------------------------------------------

/// The renormed norm `‖x‖′ = Σ_{k<m} θ^{-k}‖A^k x‖₂`, together with certified
/// upper bounds on the `‖·‖′`-operator norms of powers of `A` and `A⁻¹`.
///
/// The operator bounds come from `‖Bx‖′ ≤ (Σ_k θ^{-k} σ_max(A^k B))·‖x‖₂` and
/// `‖x‖₂ ≤ ‖x‖′`; they are upper bounds up to SVD accuracy, which is the
/// certification level everything downstream inherits.
#[derive(Debug, Clone)]
pub struct RenormedNorm {
    pub n: usize,
    pub theta: f64,
    /// Number of terms in the defining sum.
    pub m: usize,
    /// θ^{-k} factors for k = 0..m.
    weights: Vec<f64>,
    /// Row-major A^k for k = 0..m.
    powers: Vec<Vec<f64>>,
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    /// `inv_ub[j]` ≥ ‖A^{-j}‖′_op (index 0 = 1), nonincreasing.
    inv_ub: Vec<f64>,
    /// `fwd_ub[j]` ≥ ‖A^{j}‖′_op (index 0 = 1), nondecreasing.
    fwd_ub: Vec<f64>,
}

impl RenormedNorm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for k in 0..self.m {
            let p = &self.powers[k];
            let mut sq = 0.0;
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += p[i * n + j] * x[j];
                }
                sq += acc * acc;
            }
            total += self.weights[k] * sq.sqrt();
        }
        total
    }

    /// Upper bound on the `‖·‖′`-operator norm of an arbitrary matrix.
    pub fn op_ub(&self, b: &DMatrix<f64>) -> f64 {
        let mut total = 0.0;
        for k in 0..self.m {
            let pk = DMatrix::from_row_slice(self.n, self.n, &self.powers[k]);
            let prod = &pk * b;
            total += self.weights[k] * sigma_max(&prod);
        }
        total
    }

    /// Upper bound on ‖A^{-j}‖′_op, j ≥ 0. Falls back to θ^{-j} beyond the
    /// cached table (valid because ‖A^{-1}‖′_op ≤ 1/θ by construction).
    pub fn inv_pow_ub(&self, j: usize) -> f64 {
        if j < self.inv_ub.len() {
            self.inv_ub[j]
        } else {
            let extra = j - (self.inv_ub.len() - 1);
            self.inv_ub[self.inv_ub.len() - 1] * self.theta.powi(-(extra as i32))
        }
    }

    /// Upper bound on ‖A^{j}‖′_op, j ≥ 0. Falls back to a power of the
    /// one-step bound beyond the table.
    pub fn fwd_pow_ub(&self, j: usize) -> f64 {
        if j < self.fwd_ub.len() {
            self.fwd_ub[j]
        } else {
            let extra = j - (self.fwd_ub.len() - 1);
            self.fwd_ub[self.fwd_ub.len() - 1] * self.fwd_ub[1].powi(extra as i32)
        }
    }

    /// Σ_{j≥1} ‖A^{-j}‖′_op upper bound (geometric tail past the table).
    pub fn sum_inv_ub(&self) -> f64 {
        let mut s = 0.0;
        for j in 1..self.inv_ub.len() {
            s += self.inv_ub[j];
        }
        s + self.inv_ub[self.inv_ub.len() - 1] / (self.theta - 1.0)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn a_inv(&self) -> &DMatrix<f64> {
        &self.a_inv
    }

    pub fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.a, x)
    }

    pub fn apply_a_inv(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.a_inv, x)
    }
}

/// Default renorming parameter: halfway between 1 and the smallest eigenvalue
/// modulus.
pub fn default_theta(a: &ExpandingMatrix) -> f64 {
    0.5 * (1.0 + a.lambda_min)
}

/// Build the renormed norm for `A` at parameter `θ ∈ (1, λ_min)`.
///
/// Finds the smallest horizon `m` with `σ_min(A^m) ≥ θ^m` (error if none up
/// to 64), caches the power tables, and spot-checks the one-step expansion
/// `‖Ax‖′ ≥ θ‖x‖′` on deterministic samples.
pub fn build_renorm(a: &ExpandingMatrix, theta: f64) -> Result<RenormedNorm> {
    if !(theta > 1.0 && theta < a.lambda_min) {
        return Err(Error::InvalidParameter(format!(
            "theta must lie in (1, λ_min) = (1, {}); got {}",
            a.lambda_min, theta
        )));
    }
    let n = a.n;
    // Find the horizon.
    let mut pow = DMatrix::<f64>::identity(n, n);
    let mut m_found = None;
    for m in 1..=RENORM_HORIZON_CAP {
        pow = &pow * a.as_dmatrix();
        if sigma_min(&pow) >= theta.powi(m as i32) {
            m_found = Some(m);
            break;
        }
    }
    let m = m_found.ok_or(Error::HorizonExceeded { theta, cap: RENORM_HORIZON_CAP })?;

    let mut powers = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    let mut pk = DMatrix::<f64>::identity(n, n);
    for k in 0..m {
        powers.push(pk.as_slice().to_vec()); // column-major; fix below
        weights.push(theta.powi(-(k as i32)));
        pk = &pk * a.as_dmatrix();
    }
    // nalgebra stores column-major; convert each power to row-major once.
    let powers: Vec<Vec<f64>> = powers
        .iter()
        .map(|cm| {
            let mut rm = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    rm[i * n + j] = cm[j * n + i];
                }
            }
            rm
        })
        .collect();

    let mut rn = RenormedNorm {
        n,
        theta,
        m,
        weights,
        powers,
        a: a.as_dmatrix().clone(),
        a_inv: a.inverse().clone(),
        inv_ub: vec![1.0],
        fwd_ub: vec![1.0],
    };

    // Operator-norm tables.
    let mut inv_ub = vec![1.0f64; OP_TABLE_LEN + 1];
    let mut fwd_ub = vec![1.0f64; OP_TABLE_LEN + 1];
    let mut inv_j = DMatrix::<f64>::identity(n, n);
    let mut fwd_j = DMatrix::<f64>::identity(n, n);
    for j in 1..=OP_TABLE_LEN {
        inv_j = &inv_j * a.inverse();
        fwd_j = &fwd_j * a.as_dmatrix();
        let direct_inv = rn.op_ub_internal(&inv_j);
        let theta_bound = theta.powi(-(j as i32));
        inv_ub[j] = direct_inv.min(theta_bound).min(inv_ub[j - 1]);
        let direct_fwd = rn.op_ub_internal(&fwd_j);
        let chain = if j > 1 { fwd_ub[j - 1] * fwd_ub[1] } else { direct_fwd };
        fwd_ub[j] = direct_fwd.min(chain).max(fwd_ub[j - 1]);
        // Guard against float blowup far out in the table.
        if !fwd_ub[j].is_finite() {
            fwd_ub.truncate(j);
            inv_ub.truncate(j);
            break;
        }
    }
    rn.inv_ub = inv_ub;
    rn.fwd_ub = fwd_ub;

    // Spot-check one-step expansion on deterministic samples.
    use rand::Rng;
    let mut rng = crate::rng::substream(0xA11A_5EED, crate::rng::Domain::NormSamples, 0);
    for _ in 0..64 {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nx = rn.eval(&x);
        if nx == 0.0 {
            continue;
        }
        let nax = rn.eval(&rn.apply_a(&x));
        if nax < theta * nx * (1.0 - 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "renorm self-check failed: ‖Ax‖′/‖x‖′ = {} < θ = {}",
                nax / nx,
                theta
            )));
        }
    }
    Ok(rn)
}

impl RenormedNorm {
    // Same as `op_ub`, usable before the tables are installed.
    fn op_ub_internal(&self, b: &DMatrix<f64>) -> f64 {
        let mut total = 0.0;
        for k in 0..self.m {
            let pk = DMatrix::from_row_slice(self.n, self.n, &self.powers[k]);
            let prod = &pk * b;
            total += self.weights[k] * sigma_max(&prod);
        }
        total
    }
}

fn sigma_max(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().cloned().fold(0.0, f64::max)
}

fn sigma_min(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// ExpandingSystem
// ---------------------------------------------------------------------------

/// How coordinates are represented and compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArithmeticMode {
    ExactInteger,
    ExactRational,
    /// Float coordinates; points within the same τ-grid cell are identified.
    Float { tau: f64 },
}

impl ArithmeticMode {
    pub fn tag(&self) -> u8 {
        match self {
            ArithmeticMode::ExactInteger => 0,
            ArithmeticMode::ExactRational => 1,
            ArithmeticMode::Float { .. } => 2,
        }
    }

    pub fn tau(&self) -> f64 {
        match self {
            ArithmeticMode::Float { tau } => *tau,
            _ => 0.0,
        }
    }
}

/// An expanding matrix with its digit set: the full input datum.
///
/// `s = n·ln N / ln q` is the similarity exponent of the system and
/// `contraction = q^{-1/n}` the per-level pseudo-norm contraction ratio.
#[derive(Debug, Clone)]
pub struct ExpandingSystem {
    pub matrix: ExpandingMatrix,
    /// Digits, flattened row-major (digit i occupies `[i*n, (i+1)*n)`).
    pub digits: Vec<f64>,
    pub digits_int: Option<Vec<i64>>,
    pub digits_rat: Option<Vec<BigRational>>,
    pub mode: ArithmeticMode,
    pub n: usize,
    pub n_digits: usize,
    pub q: f64,
    pub s: f64,
    pub contraction: f64,
    pub warnings: Vec<String>,
}

impl ExpandingSystem {
    pub fn new_integer(n: usize, mat: &[i64], digits_flat: &[i64]) -> Result<Self> {
        let matrix = ExpandingMatrix::from_i64(n, mat)?;
        let digits: Vec<f64> = digits_flat.iter().map(|&v| v as f64).collect();
        let mut sys = Self::assemble(matrix, digits, ArithmeticMode::ExactInteger)?;
        sys.digits_int = Some(digits_flat.to_vec());
        sys.validate_digits()?;
        Ok(sys)
    }

    pub fn new_float(n: usize, mat: &[f64], digits_flat: &[f64], tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidParameter(format!("tau must lie in (0,1); got {tau}")));
        }
        let matrix = ExpandingMatrix::from_f64(n, mat)?;
        let sys = Self::assemble(matrix, digits_flat.to_vec(), ArithmeticMode::Float { tau })?;
        sys.validate_digits()?;
        Ok(sys)
    }

    pub fn new_rational(
        n: usize,
        mat: Vec<BigRational>,
        digits_flat: Vec<BigRational>,
    ) -> Result<Self> {
        let matrix = ExpandingMatrix::from_rational(n, mat)?;
        let digits: Vec<f64> = digits_flat
            .iter()
            .map(|r| r.to_f64().ok_or_else(|| Error::InvalidParameter("digit out of f64 range".into())))
            .collect::<Result<_>>()?;
        let mut sys = Self::assemble(matrix, digits, ArithmeticMode::ExactRational)?;
        sys.digits_rat = Some(digits_flat);
        sys.validate_digits()?;
        Ok(sys)
    }

    fn assemble(matrix: ExpandingMatrix, digits: Vec<f64>, mode: ArithmeticMode) -> Result<Self> {
        let n = matrix.n;
        if digits.is_empty() || digits.len() % n != 0 {
            return Err(Error::InvalidParameter(format!(
                "digit list length {} is not a positive multiple of n = {}",
                digits.len(),
                n
            )));
        }
        let n_digits = digits.len() / n;
        if n_digits < 2 {
            return Err(Error::InvalidParameter("need at least 2 digits".into()));
        }
        let q = matrix.q;
        let s = (n as f64) * (n_digits as f64).ln() / q.ln();
        let contraction = q.powf(-1.0 / n as f64);
        let mut warnings = Vec::new();
        if (n_digits as f64) > q + 1e-9 {
            warnings.push(format!(
                "digit count {} exceeds |det A| = {}: s = {:.6} > n, expect zero measure",
                n_digits, q, s
            ));
        }
        Ok(Self {
            matrix,
            digits,
            digits_int: None,
            digits_rat: None,
            mode,
            n,
            n_digits,
            q,
            s,
            contraction,
            warnings,
        })
    }

    fn validate_digits(&self) -> Result<()> {
        let n = self.n;
        // Zero digit must be present exactly (all modes).
        let has_zero = (0..self.n_digits).any(|i| match self.mode {
            ArithmeticMode::ExactInteger => {
                self.digits_int.as_ref().unwrap()[i * n..(i + 1) * n].iter().all(|&v| v == 0)
            }
            ArithmeticMode::ExactRational => {
                self.digits_rat.as_ref().unwrap()[i * n..(i + 1) * n].iter().all(|v| v.is_zero())
            }
            ArithmeticMode::Float { .. } => self.digits[i * n..(i + 1) * n].iter().all(|&v| v == 0.0),
        });
        if !has_zero {
            return Err(Error::InvalidParameter("digit set must contain the zero vector".into()));
        }
        // Pairwise distinct per mode.
        for i in 0..self.n_digits {
            for j in (i + 1)..self.n_digits {
                let same = match self.mode {
                    ArithmeticMode::ExactInteger => {
                        let d = self.digits_int.as_ref().unwrap();
                        d[i * n..(i + 1) * n] == d[j * n..(j + 1) * n]
                    }
                    ArithmeticMode::ExactRational => {
                        let d = self.digits_rat.as_ref().unwrap();
                        d[i * n..(i + 1) * n] == d[j * n..(j + 1) * n]
                    }
                    ArithmeticMode::Float { tau } => {
                        let a = &self.digits[i * n..(i + 1) * n];
                        let b = &self.digits[j * n..(j + 1) * n];
                        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tau)
                    }
                };
                if same {
                    return Err(Error::InvalidParameter(format!(
                        "digits {i} and {j} are not distinct in the system's arithmetic mode"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn digit(&self, i: usize) -> &[f64] {
        &self.digits[i * self.n..(i + 1) * self.n]
    }

    pub fn digit_int(&self, i: usize) -> Option<&[i64]> {
        self.digits_int.as_ref().map(|d| &d[i * self.n..(i + 1) * self.n])
    }

    pub fn digit_rat(&self, i: usize) -> Option<&[BigRational]> {
        self.digits_rat.as_ref().map(|d| &d[i * self.n..(i + 1) * self.n])
    }

    /// Largest `‖d‖′` over the digit set.
    pub fn max_digit_renorm(&self, rn: &RenormedNorm) -> f64 {
        (0..self.n_digits)
            .map(|i| rn.eval(self.digit(i)))
            .fold(0.0, f64::max)
    }

    /// Words at depth M: N^M, as f64 (may round for huge M — callers compare
    /// against budgets, not count exactly).
    pub fn words_at_depth(&self, m: usize) -> f64 {
        (self.n_digits as f64).powi(m as i32)
    }
}

/// Parse a rational literal: an optional-sign integer, or `p/q`.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let t = text.trim();
    let parts: Vec<&str> = t.split('/').collect();
    let parse_int = |s: &str| -> Result<BigInt> {
        s.trim()
            .parse::<BigInt>()
            .map_err(|_| Error::InvalidParameter(format!("bad rational literal: {text}")))
    };
    match parts.as_slice() {
        [a] => Ok(BigRational::from_integer(parse_int(a)?)),
        [a, b] => {
            let num = parse_int(a)?;
            let den = parse_int(b)?;
            if den.is_zero() {
                return Err(Error::InvalidParameter(format!("zero denominator: {text}")));
            }
            Ok(BigRational::new(num, den))
        }
        _ => Err(Error::InvalidParameter(format!("bad rational literal: {text}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_non_expanding_and_singular() {
        // Eigenvalue 1 on the diagonal.
        let e = ExpandingMatrix::from_i64(2, &[1, 0, 0, 3]);
        assert!(matches!(e, Err(Error::NotExpanding { .. })));
        let e = ExpandingMatrix::from_f64(2, &[2.0, 0.0, 2.0, 0.0]);
        assert!(matches!(e, Err(Error::Singular { .. })));
    }

    #[test]
    fn spectral_data_diag() {
        let a = ExpandingMatrix::from_i64(2, &[2, 0, 0, 3]).unwrap();
        let sd = spectral_data(&a);
        assert_relative_eq!(sd.lambda_min, 2.0, max_relative = 1e-12);
        assert_relative_eq!(sd.lambda_max, 3.0, max_relative = 1e-12);
        assert_relative_eq!(sd.q, 6.0, max_relative = 1e-12);
    }

    #[test]
    fn spectral_data_rotation_scale() {
        // A = [[0,-2],[1,0]]: eigenvalues ±i√2, q = 2.
        let a = ExpandingMatrix::from_i64(2, &[0, -2, 1, 0]).unwrap();
        let sd = spectral_data(&a);
        assert_relative_eq!(sd.lambda_min, 2.0_f64.sqrt(), max_relative = 1e-9);
        assert_relative_eq!(sd.lambda_max, 2.0_f64.sqrt(), max_relative = 1e-9);
        assert_relative_eq!(sd.q, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn renorm_horizon_matches_geometry() {
        // Pure scaling: already expanding in one step.
        let a = ExpandingMatrix::from_i64(2, &[2, 0, 0, 3]).unwrap();
        let rn = build_renorm(&a, 1.5).unwrap();
        assert_eq!(rn.m, 1);

        // Rotation by 90° with scale √2: σ_min(A) = 1 < θ, but A² = -2I works.
        let a = ExpandingMatrix::from_i64(2, &[0, -2, 1, 0]).unwrap();
        let rn = build_renorm(&a, 1.2).unwrap();
        assert_eq!(rn.m, 2);
    }

    #[test]
    fn renorm_is_one_step_expanding() {
        use rand::Rng;
        let a = ExpandingMatrix::from_i64(2, &[0, -2, 1, 0]).unwrap();
        let rn = build_renorm(&a, 1.2).unwrap();
        let mut rng = crate::rng::substream(1, crate::rng::Domain::NormSamples, 9);
        for _ in 0..200 {
            let x = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let lhs = rn.eval(&rn.apply_a(&x));
            assert!(lhs >= rn.theta * rn.eval(&x) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn renorm_of_theta_out_of_range_fails() {
        let a = ExpandingMatrix::from_i64(1, &[2]).unwrap();
        assert!(build_renorm(&a, 2.5).is_err());
        assert!(build_renorm(&a, 1.0).is_err());
    }

    #[test]
    fn operator_bounds_are_bounds() {
        let a = ExpandingMatrix::from_i64(2, &[0, -2, 1, 0]).unwrap();
        let rn = build_renorm(&a, 1.2).unwrap();
        use rand::Rng;
        let mut rng = crate::rng::substream(2, crate::rng::Domain::NormSamples, 3);
        for j in 1..12usize {
            let ub = rn.inv_pow_ub(j);
            let fb = rn.fwd_pow_ub(j);
            for _ in 0..50 {
                let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let nx = rn.eval(&x);
                if nx == 0.0 {
                    continue;
                }
                let xi = matrix_power_apply(&a, -(j as i64), &x);
                assert!(rn.eval(&xi) <= ub * nx * (1.0 + 1e-9), "inv bound failed at j={j}");
                let xf = matrix_power_apply(&a, j as i64, &x);
                assert!(rn.eval(&xf) <= fb * nx * (1.0 + 1e-9), "fwd bound failed at j={j}");
            }
        }
    }

    #[test]
    fn matrix_power_apply_examples() {
        let a = ExpandingMatrix::from_i64(2, &[2, 0, 0, 3]).unwrap();
        assert_eq!(matrix_power_apply(&a, 0, &[4.0, 5.0]), vec![4.0, 5.0]);
        let b = ExpandingMatrix::from_i64(2, &[0, -2, 1, 0]).unwrap();
        let y = matrix_power_apply(&b, 2, &[1.0, 1.0]);
        assert_relative_eq!(y[0], -2.0, max_relative = 1e-12);
        assert_relative_eq!(y[1], -2.0, max_relative = 1e-12);
        let z = matrix_power_apply(&b, -2, &y);
        assert_relative_eq!(z[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(z[1], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn system_validation() {
        // Cantor system: s = ln2/ln3.
        let sys = ExpandingSystem::new_integer(1, &[3], &[0, 2]).unwrap();
        assert_relative_eq!(sys.s, 2.0_f64.ln() / 3.0_f64.ln(), max_relative = 1e-12);
        assert!(sys.warnings.is_empty());

        // Missing zero digit.
        assert!(ExpandingSystem::new_integer(1, &[3], &[1, 2]).is_err());
        // Duplicate digits.
        assert!(ExpandingSystem::new_integer(1, &[3], &[0, 2, 2]).is_err());
        // Too many digits → warning, not error.
        let sys = ExpandingSystem::new_integer(1, &[3], &[0, 1, 3, 4]).unwrap();
        assert!(!sys.warnings.is_empty());
    }

    #[test]
    fn rational_roundtrip() {
        let r = parse_rational("-3/6").unwrap();
        assert_eq!(r, BigRational::new(BigInt::from(-1), BigInt::from(2)));
        assert!(parse_rational("1/0").is_err());
        let sys = ExpandingSystem::new_rational(
            1,
            vec![parse_rational("5/2").unwrap()],
            vec![parse_rational("0").unwrap(), parse_rational("1").unwrap()],
        )
        .unwrap();
        assert_eq!(sys.mode, ArithmeticMode::ExactRational);
        assert_relative_eq!(sys.q, 2.5, max_relative = 1e-12);
    }
}
