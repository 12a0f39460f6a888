//! The pseudo norm adapted to an expanding matrix.
//!
//! Powers of `A` slice space into shells `A^{k+1}B′ \ A^k B′` (with `B′` the
//! renormed unit ball), and every nonzero point lies in exactly one shell.
//! The pseudo norm is built from a kernel `h` supported on the base shell
//! `V = AB′ \ B′`:
//!
//! ```text
//! w(x) = Σ_{j∈ℤ} q^{-j/n} h(A^j x),      q = |det A|
//! ```
//!
//! which makes `w(Ax) = q^{1/n} w(x)` hold exactly — `w` scales like the n-th
//! root of volume no matter how anisotropically `A` stretches. Evaluation
//! reduces to the base shell: find the shell index `k` of `x`, pull back to
//! `y = A^{-k}x`, and return `q^{k/n}·w₀(y)` where `w₀` is a finite window of
//! kernel terms (the kernel's support certifies the window width).
//!
//! Three kernels are offered:
//! * **Step** — `h = χ_V`. Because the shells tile space, the base value is
//!   identically 1 and `w` is exactly `q^{k/n}` on shell `k`.
//! * **Mollified** — `h = χ_V * φ_δ` with a bump mollifier supported in the
//!   renormed δ-ball, sampled on a grid and multilinearly interpolated. `w` is
//!   continuous away from 0.
//! * **ExactSimilarity** — when `AᵀA = q^{2/n}·I`, the Euclidean norm already
//!   scales exactly and `w = ‖·‖₂` (tightest possible bounds).
//!
//! Alongside evaluation the module certifies two-sided bounds linking `w` to
//! the renormed norm (used by every measure computation downstream) and
//! estimates the quasi-triangle and comparability behaviour by sampling.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{build_renorm, default_theta, ExpandingMatrix, RenormedNorm};
use crate::rng::{substream, Domain};

/// Kernel grid node cap for the mollified variant (memory guard).
const GRID_NODE_CAP: usize = 1 << 24;
/// Grid nodes per mollifier radius δ.
const GRID_NODES_PER_DELTA: f64 = 6.0;
/// Tensor quadrature nodes per axis for the mollifier convolution.
const QUAD_PER_AXIS: usize = 6;
/// Shell scan iteration guard.
const SHELL_SCAN_CAP: usize = 4096;

/// Which kernel the pseudo norm is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormVariant {
    /// Indicator of the base shell: `w = q^{k/n}` exactly on shell `k`.
    Step,
    /// Indicator convolved with a bump of renormed radius `delta` ∈ (0, 0.5].
    Mollified { delta: f64 },
    /// Euclidean norm; requires `AᵀA = q^{2/n}·I` within 1e-9.
    ExactSimilarity,
}

/// A certified two-sided bracket `lo ≤ value ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiamBracket {
    pub lo: f64,
    pub hi: f64,
}

/// Sampled base-shell statistics together with the certified envelope.
#[derive(Debug, Clone, Copy)]
pub struct AnnulusStats {
    pub empirical_min: f64,
    pub empirical_max: f64,
    pub cert_lo: f64,
    pub cert_hi: f64,
    pub samples: usize,
}

/// Result of the comparability probe: how `ln w` grows against `ln ‖·‖′`.
#[derive(Debug, Clone, Copy)]
pub struct ComparabilityFit {
    /// Least-squares slope of `ln w` vs `ln ‖x‖′` over the sampled scales.
    pub slope: f64,
    /// Spectral envelope the slope must land in.
    pub slope_env_lo: f64,
    pub slope_env_hi: f64,
    /// Spread factor: max over samples of `w / t^slope` divided by the min.
    pub c_est: f64,
    /// Samples falling outside their certified per-point bracket (should be 0).
    pub violations: usize,
    pub samples: usize,
}

/// The pseudo norm `w` for one expanding matrix.
#[derive(Debug, Clone)]
pub struct PseudoNorm {
    pub variant: NormVariant,
    rn: RenormedNorm,
    pub n: usize,
    pub q: f64,
    /// `q^{-1/n}` — the one-shell contraction ratio.
    pub contraction: f64,
    ln_q_over_n: f64,
    kernel: Option<MollifiedKernel>,
    /// Kernel window: terms `j ∈ [-window_neg, window_pos]` can be nonzero.
    window_neg: usize,
    window_pos: usize,
    /// Certified bounds on the base value `w₀` over shell-reduced points.
    pub w0_cert_lo: f64,
    pub w0_cert_hi: f64,
    /// Renormed-norm upper limit of the base shell (`‖y‖′ ≤ annulus_hi`).
    pub annulus_hi: f64,
}

#[derive(Debug, Clone)]
struct MollifiedKernel {

    /// Grid lower corner (same in every axis).
    origin: f64,
    step: f64,
    /// Nodes per axis.
    g: usize,
    /// Row-major values, axis 0 slowest.
    values: Vec<f64>,
    /// Euclidean Lipschitz bound of the interpolant.
    l_h: f64,
}

impl MollifiedKernel {
    /// Multilinear interpolation; 0 outside the grid.
    fn interp(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let g = self.g;
        let mut base = [0usize; 8];
        let mut frac = [0.0f64; 8];
        for d in 0..n {
            let u = (x[d] - self.origin) / self.step;
            if !(u >= 0.0 && u <= (g - 1) as f64) {
                return 0.0;
            }
            let mut b = u.floor() as usize;
            if b >= g - 1 {
                b = g - 2;
            }
            base[d] = b;
            frac[d] = u - b as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut weight = 1.0;
            let mut idx = 0usize;
            for d in 0..n {
                let hi = (corner >> d) & 1;
                weight *= if hi == 1 { frac[d] } else { 1.0 - frac[d] };
                idx = idx * g + base[d] + hi;
            }
            acc += weight * self.values[idx];
        }
        acc
    }

    /// Symmetrized value: the kernel is used only through this, which makes
    /// `h(-x) = h(x)` hold bit-for-bit (IEEE addition is commutative).
    fn eval_sym(&self, x: &[f64]) -> f64 {
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        0.5 * (self.interp(x) + self.interp(&neg))
    }
}

/// Build the pseudo norm for `A`. `theta = None` picks the default renorming
/// parameter halfway between 1 and the smallest eigenvalue modulus.
pub fn build_pseudo_norm(
    a: &ExpandingMatrix,
    variant: NormVariant,
    theta: Option<f64>,
) -> Result<PseudoNorm> {
    let theta = theta.unwrap_or_else(|| default_theta(a));
    let rn = build_renorm(a, theta)?;
    let n = a.n;
    let q = a.q;
    let ln_q_over_n = q.ln() / n as f64;
    let contraction = (-ln_q_over_n).exp();
    let annulus_hi = rn.fwd_pow_ub(1);

    let mut pn = PseudoNorm {
        variant,
        rn,
        n,
        q,
        contraction,
        ln_q_over_n,
        kernel: None,
        window_neg: 0,
        window_pos: 0,
        w0_cert_lo: 1.0,
        w0_cert_hi: 1.0,
        annulus_hi,
    };

    match variant {
        NormVariant::Step => {
            // Shells tile space, so the base value is exactly 1; the window is
            // kept only for the reference-sum cross-check.
            let (wn, wp) = pn.support_window(0.0)?;
            pn.window_neg = wn;
            pn.window_pos = wp;
            pn.w0_cert_lo = 1.0;
            pn.w0_cert_hi = 1.0;
        }
        NormVariant::ExactSimilarity => {
            let dev = similarity_deviation(a);
            if dev > 1e-9 {
                return Err(Error::NotSimilarity { deviation: dev });
            }
            let r = (ln_q_over_n).exp();
            pn.annulus_hi = r;
            pn.w0_cert_lo = 1.0;
            pn.w0_cert_hi = r;
        }
        NormVariant::Mollified { delta } => {
            if !(delta > 0.0 && delta <= 0.5) {
                return Err(Error::InvalidParameter(format!(
                    "mollifier radius must lie in (0, 0.5]; got {delta}"
                )));
            }
            let (wn, wp) = pn.support_window(delta)?;
            pn.window_neg = wn;
            pn.window_pos = wp;
            let kernel = build_mollified_kernel(&pn.rn, delta)?;
            pn.kernel = Some(kernel);
            // Certified ceiling: every window term is at most 1.
            let mut hi = 0.0;
            for j in -(wn as i64)..=(wp as i64) {
                hi += (-pn.ln_q_over_n * j as f64).exp();
            }
            pn.w0_cert_hi = hi;
            pn.w0_cert_lo = pn.certify_mollified_floor();
        }
    }
    Ok(pn)
}

fn similarity_deviation(a: &ExpandingMatrix) -> f64 {
    let m = a.as_dmatrix();
    let g = m.transpose() * m;
    let scale = a.q.powf(2.0 / a.n as f64);
    let mut dev = 0.0f64;
    for i in 0..a.n {
        for j in 0..a.n {
            let target = if i == j { scale } else { 0.0 };
            dev = dev.max((g[(i, j)] - target).abs() / scale);
        }
    }
    dev
}

impl PseudoNorm {
    pub fn renorm(&self) -> &RenormedNorm {
        &self.rn
    }

    pub fn eval_renorm(&self, x: &[f64]) -> f64 {
        self.rn.eval(x)
    }

    pub fn theta(&self) -> f64 {
        self.rn.theta
    }

    /// `q^{k/n}` via the exp/ln route (one deterministic code path for all k).
    pub fn q_pow(&self, k: i64) -> f64 {
        (self.ln_q_over_n * k as f64).exp()
    }

    /// Shell index `k` of `x` (`‖A^{-k}x‖′ > 1 ≥ ‖A^{-(k+1)}x‖′`) and the
    /// shell-reduced point `A^{-k}x`. `None` for zero / non-finite input.
    pub fn shell_reduce(&self, x: &[f64]) -> Option<(i64, Vec<f64>)> {
        let nx = self.rn.eval(x);
        if !(nx > 0.0) || !nx.is_finite() {
            return None;
        }
        if nx > 1.0 {
            let mut v = x.to_vec();
            let mut k: i64 = 0;
            for _ in 0..SHELL_SCAN_CAP {
                let v1 = self.rn.apply_a_inv(&v);
                if self.rn.eval(&v1) <= 1.0 {
                    return Some((k, v));
                }
                v = v1;
                k += 1;
            }
            None
        } else {
            // ‖x‖′ ≤ 1: ascend until we first exit the unit ball. The previous
            // iterate then witnesses the companion condition by construction.
            let mut v = x.to_vec();
            let mut k: i64 = 0;
            for _ in 0..SHELL_SCAN_CAP {
                v = self.rn.apply_a(&v);
                k -= 1;
                if self.rn.eval(&v) > 1.0 {
                    return Some((k, v));
                }
            }
            None
        }
    }

    /// The pseudo norm itself. `w(0) = 0`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.variant {
            NormVariant::ExactSimilarity => l2(x),
            NormVariant::Step => match self.shell_reduce(x) {
                None => 0.0,
                Some((k, _)) => self.q_pow(k),
            },
            NormVariant::Mollified { .. } => match self.shell_reduce(x) {
                None => 0.0,
                Some((k, y)) => self.q_pow(k) * self.base_value(&y),
            },
        }
    }

    /// `w` of a difference without allocating the caller side.
    pub fn eval_diff(&self, a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.eval(&d)
    }

    /// Base value `w₀(y)` for a shell-reduced `y` (kernel window sum).
    fn base_value(&self, y: &[f64]) -> f64 {
        let kernel = match &self.kernel {
            Some(k) => k,
            None => return 1.0,
        };
        let mut total = kernel.eval_sym(y);
        // Ascend: contributions from shells above, weights shrink.
        let mut v = y.to_vec();
        for j in 1..=self.window_pos as i64 {
            v = self.rn.apply_a(&v);
            total += self.q_pow(-j) * kernel.eval_sym(&v);
        }
        // Descend: contributions from shells below, weights grow.
        let mut v = y.to_vec();
        for j in 1..=self.window_neg as i64 {
            v = self.rn.apply_a_inv(&v);
            total += self.q_pow(j) * kernel.eval_sym(&v);
        }
        total
    }

    /// Kernel window certified from support: outside `[-neg, pos]` the kernel
    /// argument provably misses the (δ-dilated) base shell.
    fn support_window(&self, delta: f64) -> Result<(usize, usize)> {
        if delta >= 1.0 {
            return Err(Error::InvalidParameter("mollifier radius must be < 1".into()));
        }
        let hi_edge = self.annulus_hi + delta;
        let lo_edge = 1.0 - delta;
        // Positive j: ‖A^j y‖′ ≥ ‖y‖′ / ub(A^{-j}) > 1/ub — stop once that
        // clears the support's outer edge.
        let mut pos = None;
        for j in 1..256usize {
            if 1.0 / self.rn.inv_pow_ub(j) > hi_edge {
                pos = Some(j - 1);
                break;
            }
        }
        // Negative j: ‖A^{-i} y‖′ ≤ ub(A^{-i})·annulus_hi — stop once that
        // drops below the support's inner edge.
        let mut neg = None;
        for i in 1..256usize {
            if self.rn.inv_pow_ub(i) * self.annulus_hi < lo_edge {
                neg = Some(i - 1);
                break;
            }
        }
        match (neg, pos) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::InvalidParameter(
                "kernel support window did not close within 256 shells".into(),
            )),
        }
    }

    /// Reference evaluation straight from the defining sum (test oracle; the
    /// closed forms must agree with this wherever float shell tests are
    /// unambiguous).
    #[cfg(test)]
    fn eval_reference(&self, x: &[f64]) -> f64 {
        let (k, y) = match self.shell_reduce(x) {
            None => return 0.0,
            Some(p) => p,
        };
        let chi_v = |v: &[f64]| -> f64 {
            let nv = self.rn.eval(v);
            let inner = self.rn.eval(&self.rn.apply_a_inv(v));
            if nv > 1.0 && inner <= 1.0 {
                1.0
            } else {
                0.0
            }
        };
        let mut total = chi_v(&y);
        let mut v = y.clone();
        for j in 1..=(self.window_pos as i64 + 2) {
            v = self.rn.apply_a(&v);
            total += self.q_pow(-j) * chi_v(&v);
        }
        let mut v = y.clone();
        for j in 1..=(self.window_neg as i64 + 2) {
            v = self.rn.apply_a_inv(&v);
            total += self.q_pow(j) * chi_v(&v);
        }
        self.q_pow(k) * total
    }

    // -- certified bounds against the renormed norm ------------------------

    /// Largest shell index compatible with `‖x‖′ ≤ t`.
    pub fn shell_hi(&self, t: f64) -> i64 {
        // ub_shell(k) = certified UB of ‖A^{-k}x‖′; shell k needs it > 1.
        let ub_shell = |k: i64| -> f64 {
            if k >= 0 {
                t * self.rn.inv_pow_ub(k as usize)
            } else {
                t * self.rn.fwd_pow_ub((-k) as usize)
            }
        };
        largest_true(|k| ub_shell(k) > 1.0)
    }

    /// Smallest shell index compatible with `‖x‖′ ≥ t`.
    pub fn shell_lo(&self, t: f64) -> i64 {
        // lb_shell(j) = certified LB of ‖A^{-j}x‖′; shell k needs the index
        // k+1 value to be ≤ 1.
        let lb_shell = |j: i64| -> f64 {
            if j >= 0 {
                t / self.rn.fwd_pow_ub(j as usize)
            } else {
                t / self.rn.inv_pow_ub((-j) as usize)
            }
        };
        // Smallest j with lb_shell(j) ≤ 1, minus 1.
        let j_star = largest_true(|k| lb_shell(k) > 1.0) + 1;
        j_star - 1
    }

    /// Certified upper bound on `sup { w(x) : ‖x‖′ ≤ t }`.
    pub fn upper_bound_for_renorm(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return 0.0;
        }
        if matches!(self.variant, NormVariant::ExactSimilarity) {
            return t;
        }
        self.q_pow(self.shell_hi(t)) * self.w0_cert_hi
    }

    /// Certified lower bound on `inf { w(x) : ‖x‖′ ≥ t }`. Fails when the
    /// kernel admits no certified positive floor (possible for very coarse
    /// mollified grids).
    pub fn lower_bound_for_renorm(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Ok(0.0);
        }
        if matches!(self.variant, NormVariant::ExactSimilarity) {
            return Ok(t);
        }
        if self.w0_cert_lo <= 0.0 {
            return Err(Error::InvalidParameter(
                "kernel has no certified positive floor; use a finer mollifier grid, \
                 the step kernel, or the similarity variant"
                    .into(),
            ));
        }
        Ok(self.q_pow(self.shell_lo(t)) * self.w0_cert_lo)
    }

    /// Renormed radius whose ball is certified to contain `{w ≤ eps}`.
    pub fn renorm_radius_covering_w_ball(&self, eps: f64) -> Result<f64> {
        if matches!(self.variant, NormVariant::ExactSimilarity) {
            return Ok(eps);
        }
        // Find t with lower_bound(t) > eps, then anything of w-size ≤ eps has
        // ‖·‖′ < t. Grow t geometrically from eps.
        let mut t = eps.max(1e-300);
        for _ in 0..4096 {
            if self.lower_bound_for_renorm(t)? > eps {
                return Ok(t);
            }
            t *= 2.0;
        }
        Err(Error::NumericOverflow { context: "w-ball covering radius".into() })
    }

    /// Renormed radius whose ball is certified to sit inside `{w ≤ eps}`.
    pub fn renorm_radius_inside_w_ball(&self, eps: f64) -> f64 {
        if matches!(self.variant, NormVariant::ExactSimilarity) {
            return eps;
        }
        let mut t = eps.max(1e-300) * 4.0;
        for _ in 0..4096 {
            if self.upper_bound_for_renorm(t) <= eps {
                return t;
            }
            t *= 0.5;
        }
        0.0
    }

    // -- diameter brackets --------------------------------------------------

    /// Certified bracket for the `w`-diameter of a set approximated by a
    /// point cloud: every set point is within renormed distance `err_r` of a
    /// cloud point and vice versa. When `pts_in_set` the cloud points belong
    /// to the set exactly and pairwise `w` values are genuine lower bounds.
    pub fn diam_bracket(&self, pts: &[f64], err_r: f64, pts_in_set: bool) -> Result<DiamBracket> {
        let n = self.n;
        if pts.is_empty() || pts.len() % n != 0 {
            return Err(Error::EmptySet { context: "diameter of empty cloud".into() });
        }
        let p = pts.len() / n;
        if p == 1 {
            let hi = self.upper_bound_for_renorm(2.0 * err_r);
            return Ok(DiamBracket { lo: 0.0, hi });
        }
        // Renormed diameter of the cloud (exact over pairs), parallel over
        // rows with a max reduction (order-free, deterministic).
        let diam_renorm = crate::par::map_max(p, |i| {
            let a = &pts[i * n..(i + 1) * n];
            let mut best = 0.0f64;
            let mut d = vec![0.0; n];
            for j in 0..i {
                let b = &pts[j * n..(j + 1) * n];
                for t in 0..n {
                    d[t] = a[t] - b[t];
                }
                best = best.max(self.rn.eval(&d));
            }
            best
        });
        let hi = self.upper_bound_for_renorm(diam_renorm + 2.0 * err_r);
        let lo = if pts_in_set {
            crate::par::map_max(p, |i| {
                let a = &pts[i * n..(i + 1) * n];
                let mut best = 0.0f64;
                let mut d = vec![0.0; n];
                for j in 0..i {
                    let b = &pts[j * n..(j + 1) * n];
                    for t in 0..n {
                        d[t] = a[t] - b[t];
                    }
                    best = best.max(self.eval(&d));
                }
                best
            })
        } else {
            let t = diam_renorm - 2.0 * err_r;
            if t > 0.0 {
                self.lower_bound_for_renorm(t)?
            } else {
                0.0
            }
        };
        Ok(DiamBracket { lo: lo.min(hi), hi })
    }

    // -- sampled probes -----------------------------------------------------

    /// Draw a point with renormed norm spread across `[q^{-J/n}, q^{J/n}]`
    /// scales: a rejection-sampled base-shell point pushed through `A^j`.
    fn sample_scaled(&self, rng: &mut impl Rng, j_range: i64) -> Vec<f64> {
        let mut v = self.sample_annulus(rng);
        let j = rng.gen_range(-j_range..=j_range);
        if j >= 0 {
            for _ in 0..j {
                v = self.rn.apply_a(&v);
            }
        } else {
            for _ in 0..(-j) {
                v = self.rn.apply_a_inv(&v);
            }
        }
        v
    }

    /// Rejection-sample the base shell `1 < ‖y‖′ ≤ annulus_hi`.
    fn sample_annulus(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = self.n;
        let r = self.annulus_hi;
        loop {
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..r)).collect();
            let ny = self.rn.eval(&y);
            if ny > 1.0 && ny <= r {
                return y;
            }
        }
    }

    /// Sampled base-shell statistics next to the certified envelope.
    pub fn annulus_stats(&self, samples: usize, seed: u64) -> AnnulusStats {
        let mut rng = substream(seed, Domain::NormSamples, 1);
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for _ in 0..samples {
            let y = self.sample_annulus(&mut rng);
            let v = match self.variant {
                NormVariant::ExactSimilarity => l2(&y),
                NormVariant::Step => 1.0,
                NormVariant::Mollified { .. } => self.base_value(&y),
            };
            min = min.min(v);
            max = max.max(v);
        }
        AnnulusStats {
            empirical_min: min,
            empirical_max: max,
            cert_lo: self.w0_cert_lo,
            cert_hi: self.w0_cert_hi,
            samples,
        }
    }

    /// Sampled quasi-triangle constant: max of `w(x+y)/(w(x)+w(y))` over
    /// pairs, including the degenerate pairs (x, x) and (x, 0).
    pub fn beta_estimate(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = substream(seed, Domain::BetaPairs, 0);
        let mut beta: f64 = 0.0;
        for i in 0..samples {
            let x = self.sample_scaled(&mut rng, 6);
            let (y, wy) = match i % 4 {
                0 => {
                    let y = self.sample_scaled(&mut rng, 6);
                    let wy = self.eval(&y);
                    (y, wy)
                }
                1 => (x.clone(), self.eval(&x)),
                2 => (vec![0.0; self.n], 0.0),
                _ => {
                    let y: Vec<f64> = x.iter().map(|v| -v * 0.5).collect();
                    let wy = self.eval(&y);
                    (y, wy)
                }
            };
            let wx = self.eval(&x);
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let ws = self.eval(&sum);
            if wx + wy > 0.0 && ws > 0.0 {
                beta = beta.max(ws / (wx + wy));
            }
        }
        beta
    }

    /// Sampled small-perturbation constant: max of `w(x+y)/w(x)` over pairs
    /// with `w(y) ≤ eps·w(x)`.
    pub fn lambda_estimate(&self, eps: f64, samples: usize, seed: u64) -> f64 {
        let mut rng = substream(seed, Domain::LambdaPairs, 0);
        let mut lambda: f64 = 0.0;
        let mut used = 0usize;
        let mut attempts = 0usize;
        while used < samples && attempts < samples * 64 {
            attempts += 1;
            let x = self.sample_scaled(&mut rng, 6);
            let wx = self.eval(&x);
            if wx <= 0.0 {
                continue;
            }
            // Draw the perturbation near the right scale, then verify.
            let mut y = self.sample_scaled(&mut rng, 2);
            let wy = self.eval(&y);
            if wy <= 0.0 {
                continue;
            }
            let target = eps * wx * 0.9;
            // Scale y down by whole shells until it qualifies.
            let mut wy_s = wy;
            let mut guard = 0;
            while wy_s > eps * wx && guard < 512 {
                y = self.rn.apply_a_inv(&y);
                wy_s = self.eval(&y);
                guard += 1;
            }
            let _ = target;
            if wy_s > eps * wx {
                continue;
            }
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let ws = self.eval(&sum);
            if ws > 0.0 {
                lambda = lambda.max(ws / wx);
                used += 1;
            }
        }
        lambda
    }

    /// Fit `ln w` against `ln ‖·‖′` across scales and check every sample
    /// against its certified shell bracket.
    pub fn comparability(&self, samples: usize, seed: u64, c_cap: f64) -> Result<ComparabilityFit> {
        let mut rng = substream(seed, Domain::ComparabilitySamples, 0);
        let theta = self.rn.theta;
        let lam_max = self
            .rn
            .a()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        let env_lo = self.ln_q_over_n / (lam_max * 1.0001).ln();
        let env_hi = self.ln_q_over_n / theta.ln();
        let mut us = Vec::with_capacity(samples);
        let mut vs = Vec::with_capacity(samples);
        let mut violations = 0usize;
        for _ in 0..samples {
            let x = self.sample_scaled(&mut rng, 8);
            let t = self.rn.eval(&x);
            let w = self.eval(&x);
            if !(t > 0.0 && w > 0.0) {
                continue;
            }
            us.push(t.ln());
            vs.push(w.ln());
            // Certified per-point bracket.
            let hi = self.upper_bound_for_renorm(t) * (1.0 + 1e-12);
            let lo = match self.variant {
                NormVariant::Mollified { .. } if self.w0_cert_lo <= 0.0 => 0.0,
                _ => self.lower_bound_for_renorm(t)? * (1.0 - 1e-12),
            };
            if w > hi || w < lo {
                violations += 1;
            }
        }
        if us.len() < 8 {
            return Err(Error::EmptySet { context: "comparability fit sample".into() });
        }
        let (slope, _icept) = ols(&us, &vs);
        // Spread of w against the fitted power law.
        let mut lo_resid = f64::INFINITY;
        let mut hi_resid = f64::NEG_INFINITY;
        for (u, v) in us.iter().zip(&vs) {
            let r = v - slope * u;
            lo_resid = lo_resid.min(r);
            hi_resid = hi_resid.max(r);
        }
        let c_est = (hi_resid - lo_resid).exp();
        if c_est > c_cap {
            return Err(Error::FitViolation { c_est, cap: c_cap });
        }
        Ok(ComparabilityFit {
            slope,
            slope_env_lo: env_lo,
            slope_env_hi: env_hi,
            c_est,
            violations,
            samples: us.len(),
        })
    }

    fn certify_mollified_floor(&self) -> f64 {
        let kernel = match &self.kernel {
            Some(k) => k,
            None => return 1.0,
        };
        // Lipschitz bound for the base value in the Euclidean metric.
        let mut l_w0 = kernel.l_h;
        let a = self.rn.a();
        let mut p = a.clone_owned();
        for j in 1..=self.window_pos as i64 {
            l_w0 += self.q_pow(-j) * kernel.l_h * sig_max(&p);
            p = &p * a;
        }
        let ai = self.rn.a_inv();
        let mut p = ai.clone_owned();
        for j in 1..=self.window_neg as i64 {
            l_w0 += self.q_pow(j) * kernel.l_h * sig_max(&p);
            p = p * ai;
        }
        // Scan the annulus on a grid one quarter of the kernel step; subtract
        // the certified wiggle between grid nodes.
        let scan_step = kernel.step * 0.25;
        let reach = self.annulus_hi;
        let g = ((2.0 * reach) / scan_step).ceil() as usize + 1;
        let total = match g.checked_pow(self.n as u32) {
            Some(t) if t <= (1 << 26) => t,
            _ => return 0.0,
        };
        let slack = l_w0 * (self.n as f64).sqrt() * scan_step;
        let margin = (self.n as f64).sqrt() * scan_step * self.renorm_to_euclid_factor();
        let neg_min = crate::par::map_max(total, |flat| {
            let mut idx = flat;
            let mut y = vec![0.0; self.n];
            for d in (0..self.n).rev() {
                y[d] = -reach + (idx % g) as f64 * scan_step;
                idx /= g;
            }
            let ny = self.rn.eval(&y);
            // Keep nodes in a slightly dilated annulus so every true annulus
            // point has a node within the slack radius.
            if ny > 1.0 - margin && ny <= reach + margin {
                -self.base_value(&y)
            } else {
                f64::NEG_INFINITY
            }
        });
        if neg_min == f64::NEG_INFINITY {
            return 0.0;
        }
        let floor = -neg_min - slack;
        floor.max(0.0)
    }

    /// Upper bound on `‖x‖′ / ‖x‖₂`.
    fn renorm_to_euclid_factor(&self) -> f64 {
        let mut c = 0.0;
        let a = self.rn.a();
        let mut p = nalgebra::DMatrix::<f64>::identity(self.n, self.n);
        for k in 0..self.rn.m {
            c += self.rn.theta.powi(-(k as i32)) * sig_max(&p);
            p = &p * a;
        }
        c
    }
}

fn sig_max(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max)
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Ordinary least squares slope/intercept.
fn ols(us: &[f64], vs: &[f64]) -> (f64, f64) {
    let n = us.len() as f64;
    let mu = us.iter().sum::<f64>() / n;
    let mv = vs.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (u, v) in us.iter().zip(vs) {
        num += (u - mu) * (v - mv);
        den += (u - mu) * (u - mu);
    }
    (num / den, mv - mu * (num / den))
}

/// Largest integer k in a wide range with `pred(k)` true, assuming `pred` is
/// monotone (true below, false above).
fn largest_true(pred: impl Fn(i64) -> bool) -> i64 {
    let mut lo: i64 = -(1 << 20);
    let mut hi: i64 = 1 << 20;
    // Invariant: pred(lo) true, pred(hi) false; clamp degenerate cases.
    if !pred(lo) {
        return lo;
    }
    if pred(hi) {
        return hi;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn build_mollified_kernel(rn: &RenormedNorm, delta: f64) -> Result<MollifiedKernel> {
    let n = rn.n;
    let reach = rn.fwd_pow_ub(1) + delta;
    let step = delta / GRID_NODES_PER_DELTA;
    let g = ((2.0 * reach) / step).ceil() as usize + 2;
    let nodes = g
        .checked_pow(n as u32)
        .ok_or(Error::GridTooCoarse { bound: f64::INFINITY, cap: GRID_NODE_CAP as f64 })?;
    if nodes > GRID_NODE_CAP {
        return Err(Error::GridTooCoarse { bound: nodes as f64, cap: GRID_NODE_CAP as f64 });
    }
    let origin = -reach;

    // Quadrature nodes for the mollifier: a tensor midpoint rule over the
    // cube enclosing the renormed δ-ball, weighted by a smooth bump in the
    // renormed radius and normalized to total mass 1.
    let qn = QUAD_PER_AXIS;
    let qstep = 2.0 * delta / qn as f64;
    let mut qnodes: Vec<Vec<f64>> = Vec::new();
    let mut qweights: Vec<f64> = Vec::new();
    let qtotal = qn.pow(n as u32);
    for flat in 0..qtotal {
        let mut idx = flat;
        let mut z = vec![0.0; n];
        for d in (0..n).rev() {
            z[d] = -delta + (idx % qn) as f64 * qstep + 0.5 * qstep;
            idx /= qn;
        }
        let t = rn.eval(&z) / delta;
        if t < 1.0 {
            let wgt = (-1.0 / (1.0 - t * t)).exp();
            qnodes.push(z);
            qweights.push(wgt);
        }
    }
    let wsum: f64 = qweights.iter().sum();
    if !(wsum > 0.0) {
        return Err(Error::GridTooCoarse { bound: 0.0, cap: 1.0 });
    }
    for w in &mut qweights {
        *w /= wsum;
    }

    // h(node) = Σ_i weight_i · χ_V(node − z_i).
    let mut values = vec![0.0f64; nodes];
    crate::par::fill_chunks(&mut values, 4096, |start, chunk| {
        let mut y = vec![0.0; n];
        let mut shifted = vec![0.0; n];
        for (off, slot) in chunk.iter_mut().enumerate() {
            let mut idx = start + off;
            for d in (0..n).rev() {
                y[d] = origin + (idx % g) as f64 * step;
                idx /= g;
            }
            let mut acc = 0.0;
            for (z, wgt) in qnodes.iter().zip(&qweights) {
                for d in 0..n {
                    shifted[d] = y[d] - z[d];
                }
                let nv = rn.eval(&shifted);
                if nv > 1.0 {
                    let inner = rn.eval(&mat_vec_dm(rn.a_inv(), &shifted));
                    if inner <= 1.0 {
                        acc += wgt;
                    }
                }
            }
            *slot = acc;
        }
    });

    // Lipschitz bound of the interpolant: per-axis max slope between nodes.
    let mut axis_slopes = vec![0.0f64; n];
    for flat in 0..nodes {
        let mut idx = flat;
        let mut coords = vec![0usize; n];
        for d in (0..n).rev() {
            coords[d] = idx % g;
            idx /= g;
        }
        for d in 0..n {
            if coords[d] + 1 < g {
                let mut stride = 1usize;
                for _ in (d + 1)..n {
                    stride *= g;
                }
                let neighbor = flat + stride;
                let slope = (values[neighbor] - values[flat]).abs() / step;
                if slope > axis_slopes[d] {
                    axis_slopes[d] = slope;
                }
            }
        }
    }
    let l_h = axis_slopes.iter().map(|s| s * s).sum::<f64>().sqrt();

    let _ = delta;
    Ok(MollifiedKernel { origin, step, g, values, l_h })
}

fn mat_vec_dm(m: &nalgebra::DMatrix<f64>, x: &[f64]) -> Vec<f64> {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ExpandingMatrix;
    use approx::assert_relative_eq;

    fn cantor_matrix() -> ExpandingMatrix {
        ExpandingMatrix::from_i64(1, &[3]).unwrap()
    }

    fn rotation_matrix() -> ExpandingMatrix {
        ExpandingMatrix::from_i64(2, &[0, -2, 1, 0]).unwrap()
    }

    /// Rotation by 45° with scale √2: a genuine similarity (AᵀA = 2I).
    fn twin_matrix() -> ExpandingMatrix {
        ExpandingMatrix::from_i64(2, &[1, -1, 1, 1]).unwrap()
    }

    fn diag23() -> ExpandingMatrix {
        ExpandingMatrix::from_i64(2, &[2, 0, 0, 3]).unwrap()
    }

    #[test]
    fn step_scalar_values() {
        let pn = build_pseudo_norm(&cantor_matrix(), NormVariant::Step, None).unwrap();
        // Shell of 1 is -1 (the base shell is the half-open (1, 3]).
        assert_relative_eq!(pn.eval(&[1.0]), 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(pn.eval(&[2.0]), 1.0, max_relative = 1e-12);
        assert_relative_eq!(pn.eval(&[9.5]), 9.0, max_relative = 1e-12);
        assert_eq!(pn.eval(&[0.0]), 0.0);
    }

    #[test]
    fn similarity_is_euclidean() {
        let pn = build_pseudo_norm(&cantor_matrix(), NormVariant::ExactSimilarity, None).unwrap();
        assert_eq!(pn.eval(&[0.75]), 0.75);
        let pn = build_pseudo_norm(&twin_matrix(), NormVariant::ExactSimilarity, None).unwrap();
        assert_relative_eq!(pn.eval(&[3.0, 4.0]), 5.0, max_relative = 1e-12);
        // diag(2,3) stretches axes unequally; [[0,-2],[1,0]] has singular
        // values 2 and 1. Neither qualifies.
        for bad in [diag23(), rotation_matrix()] {
            let err = build_pseudo_norm(&bad, NormVariant::ExactSimilarity, None);
            assert!(matches!(err, Err(Error::NotSimilarity { .. })));
        }
    }

    #[test]
    fn step_matches_defining_sum() {
        use rand::Rng;
        for mat in [cantor_matrix(), rotation_matrix(), diag23()] {
            let pn = build_pseudo_norm(&mat, NormVariant::Step, None).unwrap();
            let mut rng = crate::rng::substream(7, Domain::NormSamples, 2);
            for _ in 0..500 {
                let x: Vec<f64> = (0..mat.n).map(|_| rng.gen_range(-20.0..20.0)).collect();
                let closed = pn.eval(&x);
                let reference = pn.eval_reference(&x);
                assert_relative_eq!(closed, reference, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn homogeneity_one_shell() {
        use rand::Rng;
        for variant in [NormVariant::Step, NormVariant::Mollified { delta: 0.25 }] {
            let mat = diag23();
            let pn = build_pseudo_norm(&mat, variant, None).unwrap();
            let scale = pn.q.powf(1.0 / pn.n as f64);
            let mut rng = crate::rng::substream(8, Domain::NormSamples, 3);
            for _ in 0..300 {
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-10.0..10.0)).collect();
                let w = pn.eval(&x);
                if w == 0.0 {
                    continue;
                }
                let ax = mat.apply(&x);
                assert_relative_eq!(pn.eval(&ax), scale * w, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn symmetry_is_bit_exact() {
        use rand::Rng;
        for variant in [
            NormVariant::Step,
            NormVariant::Mollified { delta: 0.25 },
            NormVariant::ExactSimilarity,
        ] {
            let mat = if matches!(variant, NormVariant::ExactSimilarity) {
                twin_matrix()
            } else {
                diag23()
            };
            let pn = build_pseudo_norm(&mat, variant, None).unwrap();
            let mut rng = crate::rng::substream(9, Domain::NormSamples, 4);
            for _ in 0..300 {
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-10.0..10.0)).collect();
                let neg: Vec<f64> = x.iter().map(|v| -v).collect();
                assert_eq!(pn.eval(&x).to_bits(), pn.eval(&neg).to_bits());
            }
        }
    }

    #[test]
    fn certified_bounds_bracket_samples() {
        use rand::Rng;
        for variant in [NormVariant::Step, NormVariant::Mollified { delta: 0.25 }] {
            let pn = build_pseudo_norm(&diag23(), variant, None).unwrap();
            let mut rng = crate::rng::substream(10, Domain::NormSamples, 5);
            for _ in 0..400 {
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-30.0..30.0)).collect();
                let t = pn.eval_renorm(&x);
                let w = pn.eval(&x);
                if t == 0.0 || w == 0.0 {
                    continue;
                }
                assert!(w <= pn.upper_bound_for_renorm(t) * (1.0 + 1e-12));
                if pn.w0_cert_lo > 0.0 {
                    let lo = pn.lower_bound_for_renorm(t).unwrap();
                    assert!(w >= lo * (1.0 - 1e-12), "w={w} lo={lo} t={t}");
                }
            }
        }
    }

    #[test]
    fn mollified_annulus_stats_respect_envelope() {
        let pn =
            build_pseudo_norm(&diag23(), NormVariant::Mollified { delta: 0.25 }, None).unwrap();
        let st = pn.annulus_stats(2000, 11);
        assert!(st.empirical_min > 0.0);
        assert!(st.empirical_max >= st.empirical_min);
        assert!(st.cert_hi >= st.empirical_max * (1.0 - 1e-12));
        assert!(st.cert_lo <= st.empirical_min * (1.0 + 1e-12));
    }

    #[test]
    fn beta_for_euclidean_is_triangle() {
        let pn = build_pseudo_norm(&twin_matrix(), NormVariant::ExactSimilarity, None).unwrap();
        let beta = pn.beta_estimate(2000, 12);
        assert!(beta <= 1.0 + 1e-12);
        assert!(beta > 0.99);
    }

    #[test]
    fn comparability_has_no_certified_violations() {
        for variant in [NormVariant::Step, NormVariant::Mollified { delta: 0.25 }] {
            let pn = build_pseudo_norm(&diag23(), variant, None).unwrap();
            let fit = pn.comparability(800, 13, 1e4).unwrap();
            assert_eq!(fit.violations, 0);
            assert!(fit.c_est < 1e3, "spread factor blew up: {}", fit.c_est);
            assert!(fit.slope > 0.0);
        }
    }

    #[test]
    fn diam_bracket_orders() {
        let pn = build_pseudo_norm(&diag23(), NormVariant::Step, None).unwrap();
        let pts = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let b = pn.diam_bracket(&pts, 0.0, true).unwrap();
        assert!(b.lo > 0.0 && b.lo <= b.hi);
        // The corner pair (0,0)-(1,1) is inside the bracket.
        let w = pn.eval(&[1.0, 1.0]);
        assert!(b.lo >= w * (1.0 - 1e-12));
        assert!(b.hi >= w);
    }

    #[test]
    fn oversized_mollifier_grid_is_rejected() {
        let a = ExpandingMatrix::from_i64(4, &[2, 0, 0, 0, 0, 2, 0, 0, 0, 0, 2, 0, 0, 0, 0, 2])
            .unwrap();
        let err = build_pseudo_norm(&a, NormVariant::Mollified { delta: 0.05 }, None);
        assert!(matches!(err, Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn radius_conversions_are_consistent() {
        let pn = build_pseudo_norm(&diag23(), NormVariant::Step, None).unwrap();
        let eps = 0.37;
        let cover = pn.renorm_radius_covering_w_ball(eps).unwrap();
        let inside = pn.renorm_radius_inside_w_ball(eps);
        assert!(inside <= cover);
        assert!(pn.upper_bound_for_renorm(inside) <= eps * (1.0 + 1e-12));
        assert!(pn.lower_bound_for_renorm(cover).unwrap() > eps * (1.0 - 1e-12));
    }
}
