//! The attractor, its cylinder decomposition, and the natural measure.
//!
//! The attractor `K` is the unique compact set with `K = ⋃_d A^{-1}(K + d)`;
//! concretely it is the set of convergent digit tails `Σ_{j≥1} A^{-j} d_j`.
//! Depth-`M` cylinders are its images under `M`-fold map compositions: the
//! cylinder of word `w` is `A^{-M}(x_w + K)` with `x_w` the expansion value of
//! `w`. Because the zero digit is always present, every cylinder center
//! `A^{-M}·x_w` is itself a point of `K` (the word continued by zeros), which
//! makes enumerated clouds exact subsets of the attractor rather than
//! approximations near it.
//!
//! The natural measure `σ` splits evenly over digits: `σ = Σ_d N^{-1}·(f_d)_*σ`.
//! A depth-`M` cylinder with `m` addressing words therefore carries mass
//! exactly `m·N^{-M}`, and certified inside/outside classification of
//! cylinders against a window turns those exact masses into two-sided
//! brackets on `σ(window)`.

use crate::error::{Error, Result};
use crate::linalg::{ArithmeticMode, ExpandingSystem, RenormedNorm};
use crate::norm::PseudoNorm;
use crate::par;
use crate::rng::{substream, Domain, CHUNK};
use crate::window::{CellClass, ConvexWindow};
use rand::Rng;

/// A finite set of attractor points with a certified covering radius.
#[derive(Debug, Clone)]
pub struct AttractorCloud {
    pub n: usize,
    /// Cylinder depth the cloud was enumerated at (0 for sampled clouds).
    pub depth: usize,
    pub count: usize,
    /// Flat n-stride coordinates.
    pub points: Vec<f64>,
    /// Renormed radius within which every attractor point has a cloud
    /// neighbour. Zero means the cloud only claims membership, not covering.
    pub covering_radius: f64,
    /// Whether each cloud point lies exactly on the attractor.
    pub on_attractor: bool,
}

/// The distinct depth-`M` cylinders with exact multiplicities.
#[derive(Debug, Clone)]
pub struct CylinderSet {
    pub n: usize,
    pub depth: usize,
    /// Number of distinct cylinder values.
    pub count: usize,
    /// Flat n-stride cylinder centers `A^{-M}·x_w`.
    pub centers: Vec<f64>,
    /// Words addressing each center.
    pub multiplicities: Vec<u64>,
    /// `multiplicity · N^{-M}` per center.
    pub masses: Vec<f64>,
    /// Renormed radius: the whole cylinder sits within this of its center.
    pub cell_radius: f64,
    /// Per-axis half-widths of a Euclidean box certified to contain each
    /// cylinder around its center.
    pub half_widths: Vec<f64>,
    pub max_multiplicity: u64,
}

/// Certified renormed radius of a ball around the origin containing the
/// attractor: `Σ_{j≥1} ‖A^{-j}‖′ · max_d ‖d‖′`.
pub fn attractor_radius(sys: &ExpandingSystem, rn: &RenormedNorm) -> f64 {
    sys.max_digit_renorm(rn) * rn.sum_inv_ub()
}

/// Enumerate every depth-`depth` cylinder center as an exact attractor point.
///
/// Points are built by the contraction recursion `P_{k+1} = ⋃_d A^{-1}(P_k+d)`
/// starting from `{0}`, deduplicated, in canonical order. Every attractor
/// point is within `‖A^{-depth}‖′ · R` of the cloud (`R` the attractor
/// radius), and every cloud point is on the attractor.
pub fn enumerate_cloud(
    sys: &ExpandingSystem,
    rn: &RenormedNorm,
    depth: usize,
    budget: usize,
) -> Result<AttractorCloud> {
    let cyl = build_cylinders(sys, rn, depth, budget)?;
    Ok(AttractorCloud {
        n: sys.n,
        depth,
        count: cyl.count,
        points: cyl.centers,
        covering_radius: cyl.cell_radius,
        on_attractor: true,
    })
}

/// Sample the attractor by random map iteration.
///
/// The zero word's value (the origin's image chain) starts on the attractor,
/// so every iterate stays on it exactly; the burn-in only decorrelates the
/// sample from the deterministic start. Chunks use independent substreams, so
/// output bytes are identical at any thread count.
pub fn chaos_game(sys: &ExpandingSystem, count: usize, seed: u64) -> AttractorCloud {
    const BURN: usize = 64;
    let n = sys.n;
    let chunks = count.div_ceil(CHUNK);
    let pts: Vec<Vec<f64>> = par::map_collect(chunks, |c| {
        let mut rng = substream(seed, Domain::ChaosGame, c as u64);
        let here = CHUNK.min(count - c * CHUNK);
        let mut x = vec![0.0f64; n];
        let mut out = Vec::with_capacity(here * n);
        for i in 0..BURN + here {
            let d = sys.digit(rng.gen_range(0..sys.n_digits));
            let shifted: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + b).collect();
            x = sys.matrix.apply_inv(&shifted);
            if i >= BURN {
                out.extend_from_slice(&x);
            }
        }
        out
    });
    let mut points = Vec::with_capacity(count * n);
    for p in pts {
        points.extend(p);
    }
    AttractorCloud {
        n,
        depth: 0,
        count,
        points,
        covering_radius: 0.0,
        on_attractor: true,
    }
}

/// Expansion values at one level with multiplicities, in the system's exact
/// arithmetic where available.
enum LevelValues {
    Int(Vec<(Vec<i128>, u64)>),
    Float(Vec<(Vec<f64>, u64)>),
}

/// Build the distinct depth-`depth` cylinders with exact masses.
///
/// Values are enumerated level by level with per-level deduplication, so the
/// working set stays at the number of *distinct* values rather than `N^M`.
/// Exact integer systems merge in `ℤⁿ`; other modes merge only bit-identical
/// values (a collision that float arithmetic does not reproduce exactly shows
/// up as two cylinders of smaller mass, which is still a valid decomposition).
pub fn build_cylinders(
    sys: &ExpandingSystem,
    rn: &RenormedNorm,
    depth: usize,
    budget: usize,
) -> Result<CylinderSet> {
    let n = sys.n;
    let nd = sys.n_digits;
    let mut level = match sys.mode {
        ArithmeticMode::ExactInteger => LevelValues::Int(vec![(vec![0i128; n], 1)]),
        _ => LevelValues::Float(vec![(vec![0.0f64; n], 1)]),
    };
    for step in 0..depth {
        let distinct = match &level {
            LevelValues::Int(v) => v.len(),
            LevelValues::Float(v) => v.len(),
        };
        if distinct.saturating_mul(nd) > budget {
            return Err(Error::BudgetExceeded {
                need: sys.words_at_depth(depth),
                budget: budget as f64,
                context: format!("cylinder enumeration at level {step}"),
            });
        }
        level = match level {
            LevelValues::Int(v) => {
                let mut next: Vec<(Vec<i128>, u64)> = Vec::with_capacity(v.len() * nd);
                for (val, mult) in &v {
                    let ax = sys.matrix.apply_int(val)?;
                    for di in 0..nd {
                        let d = sys.digit_int(di).unwrap();
                        let mut child = Vec::with_capacity(n);
                        for t in 0..n {
                            child.push(ax[t].checked_add(d[t] as i128).ok_or_else(|| {
                                Error::NumericOverflow { context: "cylinder value".into() }
                            })?);
                        }
                        next.push((child, *mult));
                    }
                }
                LevelValues::Int(merge_by_key(next)?)
            }
            LevelValues::Float(v) => {
                let mut next: Vec<(Vec<f64>, u64)> = Vec::with_capacity(v.len() * nd);
                for (val, mult) in &v {
                    let ax = sys.matrix.apply(val);
                    for di in 0..nd {
                        let d = sys.digit(di);
                        let child: Vec<f64> = (0..n).map(|t| ax[t] + d[t]).collect();
                        next.push((child, *mult));
                    }
                }
                let keyed: Vec<(Vec<u64>, (Vec<f64>, u64))> = next
                    .into_iter()
                    .map(|(val, m)| {
                        let key: Vec<u64> = val.iter().map(|x| x.to_bits()).collect();
                        (key, (val, m))
                    })
                    .collect();
                let mut sorted = keyed;
                sorted.sort_by(|a, b| a.0.cmp(&b.0));
                let mut merged: Vec<(Vec<f64>, u64)> = Vec::new();
                for (key, (val, m)) in sorted {
                    match merged.last_mut() {
                        Some((last, lm))
                            if last.iter().map(|x| x.to_bits()).eq(key.iter().copied()) =>
                        {
                            *lm = lm.checked_add(m).ok_or_else(|| Error::NumericOverflow {
                                context: "cylinder multiplicity".into(),
                            })?;
                        }
                        _ => merged.push((val, m)),
                    }
                }
                LevelValues::Float(merged)
            }
        };
    }

    let (centers, multiplicities) = match level {
        LevelValues::Int(v) => {
            let mut centers = Vec::with_capacity(v.len() * n);
            let mut mults = Vec::with_capacity(v.len());
            for (val, m) in v {
                let mut x: Vec<f64> = val.iter().map(|&t| t as f64).collect();
                for _ in 0..depth {
                    x = sys.matrix.apply_inv(&x);
                }
                centers.extend(x);
                mults.push(m);
            }
            (centers, mults)
        }
        LevelValues::Float(v) => {
            let mut centers = Vec::with_capacity(v.len() * n);
            let mut mults = Vec::with_capacity(v.len());
            for (val, m) in v {
                let mut x = val;
                for _ in 0..depth {
                    x = sys.matrix.apply_inv(&x);
                }
                centers.extend(x);
                mults.push(m);
            }
            (centers, mults)
        }
    };

    let count = multiplicities.len();
    let total = sys.words_at_depth(depth);
    let masses: Vec<f64> = multiplicities.iter().map(|&m| m as f64 / total).collect();
    let radius = attractor_radius(sys, rn);
    let cell_radius = rn.inv_pow_ub(depth) * radius;

    // Per-axis box: |(A^{-M} y)_i| ≤ ‖row_i(A^{-M})‖₂·‖y‖₂ and ‖y‖₂ ≤ ‖y‖′ ≤ R.
    let mut inv_pow = nalgebra::DMatrix::<f64>::identity(n, n);
    for _ in 0..depth {
        inv_pow = sys.matrix.inverse() * inv_pow;
    }
    let half_widths: Vec<f64> = (0..n)
        .map(|i| inv_pow.row(i).iter().map(|v| v * v).sum::<f64>().sqrt() * radius)
        .collect();

    let max_multiplicity = multiplicities.iter().copied().max().unwrap_or(0);
    Ok(CylinderSet {
        n,
        depth,
        count,
        centers,
        multiplicities,
        masses,
        cell_radius,
        half_widths,
        max_multiplicity,
    })
}

fn merge_by_key(mut vals: Vec<(Vec<i128>, u64)>) -> Result<Vec<(Vec<i128>, u64)>> {
    vals.sort_by(|a, b| a.0.cmp(&b.0));
    let mut merged: Vec<(Vec<i128>, u64)> = Vec::new();
    for (val, m) in vals {
        match merged.last_mut() {
            Some((last, lm)) if *last == val => {
                *lm = lm
                    .checked_add(m)
                    .ok_or_else(|| Error::NumericOverflow { context: "multiplicity".into() })?;
            }
            _ => merged.push((val, m)),
        }
    }
    Ok(merged)
}

/// Two-sided bracket on the natural measure of a window.
///
/// Each cylinder lies in the renormed ball of radius `cell_radius` around its
/// center, so a cell certified inside contributes its full mass to the lower
/// bound and a cell certified outside contributes nothing; straddling mass
/// widens the bracket. Exact masses make both ends certified up to the cell
/// classification, whose two certified branches are themselves sound.
pub fn sigma_mass_of_window(
    cyl: &CylinderSet,
    pn: &PseudoNorm,
    window: &ConvexWindow,
) -> (f64, f64) {
    let n = cyl.n;
    let classes: Vec<CellClass> = par::map_collect(cyl.count, |i| {
        window.classify_cell(pn, &cyl.centers[i * n..(i + 1) * n], cyl.cell_radius)
    });
    let mut lo = 0.0f64;
    let mut straddle = 0.0f64;
    for (i, class) in classes.iter().enumerate() {
        match class {
            CellClass::Inside => lo += cyl.masses[i],
            CellClass::Straddle => straddle += cyl.masses[i],
            CellClass::Outside => {}
        }
    }
    (lo, (lo + straddle).min(1.0))
}

/// Renormed distance from `x` to the nearest cylinder center.
pub fn distance_to_centers(cyl: &CylinderSet, rn: &RenormedNorm, x: &[f64]) -> f64 {
    let n = cyl.n;
    let mut best = f64::INFINITY;
    for i in 0..cyl.count {
        let d: Vec<f64> = (0..n).map(|t| x[t] - cyl.centers[i * n + t]).collect();
        best = best.min(rn.eval(&d));
    }
    best
}

/// Certify that `x` lies within `allowance` of the attractor, through the
/// cylinder cover: membership in some cylinder implies distance at most
/// `cell_radius` from a center.
pub fn point_on_attractor(
    cyl: &CylinderSet,
    rn: &RenormedNorm,
    x: &[f64],
    allowance: f64,
) -> Result<f64> {
    let d = distance_to_centers(cyl, rn, x);
    if d <= cyl.cell_radius + allowance {
        Ok(d)
    } else {
        Err(Error::PointNotOnAttractor { distance: d, allowance: cyl.cell_radius + allowance })
    }
}

/// Symmetric Hausdorff distance between two point clouds in the renormed
/// norm.
pub fn cloud_distance(rn: &RenormedNorm, n: usize, a: &[f64], b: &[f64]) -> f64 {
    let directed = |from: &[f64], to: &[f64]| -> f64 {
        let count = from.len() / n;
        par::map_max(count, |i| {
            let x = &from[i * n..(i + 1) * n];
            let mut best = f64::INFINITY;
            for j in 0..to.len() / n {
                let d: Vec<f64> = (0..n).map(|t| x[t] - to[j * n + t]).collect();
                best = best.min(rn.eval(&d));
            }
            best
        })
    };
    directed(a, b).max(directed(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{build_renorm, default_theta, ExpandingSystem};
    use crate::norm::{build_pseudo_norm, NormVariant};
    use approx::assert_relative_eq;

    fn cantor() -> (ExpandingSystem, RenormedNorm, PseudoNorm) {
        let sys = ExpandingSystem::new_integer(1, &[3], &[0, 2]).unwrap();
        let rn = build_renorm(&sys.matrix, default_theta(&sys.matrix)).unwrap();
        let pn = build_pseudo_norm(&sys.matrix, NormVariant::ExactSimilarity, None).unwrap();
        (sys, rn, pn)
    }

    #[test]
    fn cantor_radius_is_tight() {
        let (sys, rn, _) = cantor();
        // K = [0,1] and the certified ball radius lands on 1 up to rounding.
        let r = attractor_radius(&sys, &rn);
        assert_relative_eq!(r, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn enumerated_cloud_is_exact() {
        let (sys, rn, _) = cantor();
        let cloud = enumerate_cloud(&sys, &rn, 3, 1 << 20).unwrap();
        assert_eq!(cloud.count, 8);
        let mut pts = cloud.points.clone();
        pts.sort_by(f64::total_cmp);
        let expect: Vec<f64> =
            [0.0, 2.0, 6.0, 8.0, 18.0, 20.0, 24.0, 26.0].iter().map(|v| v / 27.0).collect();
        for (p, e) in pts.iter().zip(&expect) {
            assert_relative_eq!(p, e, max_relative = 1e-12);
        }
        assert_relative_eq!(cloud.covering_radius, 1.0 / 27.0, max_relative = 1e-9);
    }

    #[test]
    fn chaos_game_stays_on_attractor_and_is_deterministic() {
        let (sys, rn, _) = cantor();
        let cyl = build_cylinders(&sys, &rn, 10, 1 << 20).unwrap();
        let cloud = chaos_game(&sys, 2000, 7);
        assert_eq!(cloud.count, 2000);
        for i in 0..cloud.count {
            let d = distance_to_centers(&cyl, &rn, &cloud.points[i..i + 1]);
            assert!(d <= cyl.cell_radius * (1.0 + 1e-9), "sample {i} off-attractor by {d}");
        }
        let again = chaos_game(&sys, 2000, 7);
        assert_eq!(cloud.points, again.points);
        let other = chaos_game(&sys, 2000, 8);
        assert_ne!(cloud.points, other.points);
    }

    #[test]
    fn cylinder_masses_are_exact() {
        // A colliding system: distinct count < N^M and some multiplicity ≥ 2.
        let sys = ExpandingSystem::new_integer(1, &[3], &[0, 1, 3]).unwrap();
        let rn = build_renorm(&sys.matrix, default_theta(&sys.matrix)).unwrap();
        let cyl = build_cylinders(&sys, &rn, 4, 1 << 20).unwrap();
        assert!(cyl.count < 81, "colliding system must merge cylinders");
        assert!(cyl.max_multiplicity >= 2);
        let total: f64 = cyl.masses.iter().sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
        // Non-colliding comparison: full count, all multiplicities 1.
        let (csys, crn, _) = cantor();
        let ccyl = build_cylinders(&csys, &crn, 5, 1 << 20).unwrap();
        assert_eq!(ccyl.count, 32);
        assert_eq!(ccyl.max_multiplicity, 1);
    }

    #[test]
    fn sigma_brackets_are_ordered_and_converge() {
        let (sys, rn, pn) = cantor();
        let cyl = build_cylinders(&sys, &rn, 12, 1 << 20).unwrap();
        // Whole-space window: bracket collapses to [1, 1].
        let all = ConvexWindow::boxed(vec![0.5], vec![2.0]);
        let (lo, hi) = sigma_mass_of_window(&cyl, &pn, &all);
        assert_relative_eq!(lo, 1.0, max_relative = 1e-12);
        assert_relative_eq!(hi, 1.0, max_relative = 1e-12);
        // Far window: zero mass.
        let far = ConvexWindow::boxed(vec![10.0], vec![1.0]);
        let (lo, hi) = sigma_mass_of_window(&cyl, &pn, &far);
        assert_eq!((lo, hi), (0.0, 0.0));
        // Left third: exactly half the measure, bracket tightens around it.
        let left = ConvexWindow::boxed(vec![1.0 / 6.0], vec![1.0 / 6.0]);
        let (lo, hi) = sigma_mass_of_window(&cyl, &pn, &left);
        assert!(lo <= 0.5 + 1e-12 && 0.5 <= hi + 1e-12, "({lo}, {hi})");
        assert!(hi - lo < 0.02, "bracket too wide: ({lo}, {hi})");
    }

    #[test]
    fn membership_certificate() {
        let (sys, rn, _) = cantor();
        let cyl = build_cylinders(&sys, &rn, 10, 1 << 20).unwrap();
        assert!(point_on_attractor(&cyl, &rn, &[0.0], 0.0).is_ok());
        assert!(point_on_attractor(&cyl, &rn, &[1.0], 1e-12).is_ok());
        // Center of the removed middle third is far from the attractor.
        let err = point_on_attractor(&cyl, &rn, &[0.5], 1e-3).unwrap_err();
        match err {
            Error::PointNotOnAttractor { distance, .. } => {
                assert!(distance > 0.1, "distance {distance}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn cloud_distance_tracks_refinement() {
        let (sys, rn, _) = cantor();
        let c6 = enumerate_cloud(&sys, &rn, 6, 1 << 20).unwrap();
        let c10 = enumerate_cloud(&sys, &rn, 10, 1 << 20).unwrap();
        let d = cloud_distance(&rn, 1, &c6.points, &c10.points);
        // Deeper cloud refines the shallower: Hausdorff gap ≤ covering radius.
        assert!(d <= c6.covering_radius * (1.0 + 1e-9), "gap {d}");
        assert!(d > 0.0);
    }
}
