//! Browser bindings for the self-affine toolkit.
//!
//! Three operations are exported for the static page in `www/`:
//!
//! * [`render_attractor`] — sample the attractor of `x ↦ A⁻¹(x + d)` and
//!   rasterize it as RGBA pixels for a canvas,
//! * [`check_osc`] — run the separation decision and describe the verdict,
//! * [`norm_heatmap`] — color the plane by the pseudo norm built from `A`.
//!
//! Every function takes the matrix as a row-major `Float64Array` and the
//! digit set as a flat `Float64Array` of `n`-vectors, so the page needs no
//! JSON layer. Errors come back as strings.
//!
//! The crate compiles for the host too (the bindings are plain functions
//! off-wasm), which is how its tests run. To produce the browser build:
//!
//! ```text
//! rustup target add wasm32-unknown-unknown
//! cargo install wasm-pack
//! wasm-pack build crates/selfaffine-demo --target web --release
//! ```
//!
//! then serve `crates/selfaffine-demo/www/` with the generated `pkg/`
//! directory next to `index.html`.

use wasm_bindgen::prelude::wasm_bindgen;

use selfaffine::{
    build_pseudo_norm, build_renorm, chaos_game, decide_osc, default_theta, render,
    ExpandingMatrix, ExpandingSystem, NormVariant, OscVerdict,
};

/// Largest point budget the page may request; keeps a tab responsive.
const MAX_POINTS: usize = 2_000_000;
const MAX_PIXELS: usize = 4_000_000;

fn build_system(n: usize, matrix: &[f64], digits: &[f64]) -> Result<ExpandingSystem, String> {
    if n == 0 || n > 3 {
        return Err("dimension must be 1, 2, or 3".into());
    }
    if matrix.len() != n * n {
        return Err(format!("matrix needs {} entries, got {}", n * n, matrix.len()));
    }
    if digits.is_empty() || digits.len() % n != 0 {
        return Err(format!("digit list must be a multiple of {n} values"));
    }
    let integral = matrix.iter().chain(digits).all(|v| v.fract() == 0.0 && v.abs() < 2e9);
    if integral {
        let mat: Vec<i64> = matrix.iter().map(|&v| v as i64).collect();
        let dg: Vec<i64> = digits.iter().map(|&v| v as i64).collect();
        ExpandingSystem::new_integer(n, &mat, &dg).map_err(|e| e.to_string())
    } else {
        ExpandingSystem::new_float(n, matrix, digits, 1e-9).map_err(|e| e.to_string())
    }
}

fn check_size(width: usize, height: usize) -> Result<(), String> {
    if width == 0 || height == 0 || width * height > MAX_PIXELS {
        return Err(format!("image size {width}×{height} out of range"));
    }
    Ok(())
}

/// Sample `points` attractor points and return `width*height*4` RGBA bytes.
/// The view is fitted to the cloud with a small margin; same seed, same
/// picture.
#[wasm_bindgen]
pub fn render_attractor(
    n: usize,
    matrix: &[f64],
    digits: &[f64],
    points: usize,
    seed: u64,
    width: usize,
    height: usize,
) -> Result<Vec<u8>, String> {
    check_size(width, height)?;
    let sys = build_system(n, matrix, digits)?;
    let cloud = chaos_game(&sys, points.clamp(1, MAX_POINTS), seed);
    let pgm = render::render_cloud_pgm(&cloud.points, sys.n, width, height, 0.05)
        .map_err(|e| e.to_string())?;
    let gray = &pgm[pgm.len() - width * height..];
    Ok(render::rgba_from_gray(gray))
}

/// Decide the open set condition and describe the outcome in one line.
#[wasm_bindgen]
pub fn check_osc(n: usize, matrix: &[f64], digits: &[f64]) -> Result<String, String> {
    let sys = build_system(n, matrix, digits)?;
    let rn = build_renorm(&sys.matrix, default_theta(&sys.matrix)).map_err(|e| e.to_string())?;
    let report = decide_osc(&sys, &rn, 48, 200_000).map_err(|e| e.to_string())?;
    Ok(match report.verdict {
        OscVerdict::Holds => format!(
            "holds — all digit words reach distinct points ({} automaton states explored)",
            report.states_explored
        ),
        OscVerdict::Fails { witness } => format!(
            "fails — two depth-{} words land on the same point (verified: {})",
            witness.depth, witness.verified
        ),
        OscVerdict::Unknown { min_separation, depth_reached } => format!(
            "unknown — no collision down to depth {depth_reached}; closest approach {min_separation:.3e}"
        ),
    })
}

/// Color the plane by `ln w(x)` for the pseudo norm of `A`, as RGBA bytes.
/// `variant` is `"step"`, `"mollified"`, or `"similarity"`.
#[wasm_bindgen]
pub fn norm_heatmap(
    n: usize,
    matrix: &[f64],
    variant: &str,
    extent: f64,
    width: usize,
    height: usize,
) -> Result<Vec<u8>, String> {
    check_size(width, height)?;
    if !(extent.is_finite() && extent > 0.0) {
        return Err("extent must be positive".into());
    }
    if n == 0 || n > 3 {
        return Err("dimension must be 1, 2, or 3".into());
    }
    // The norm needs only the matrix, not a digit set.
    let a = ExpandingMatrix::from_f64(n, matrix).map_err(|e| e.to_string())?;
    let kind = match variant {
        "step" => NormVariant::Step,
        "mollified" => NormVariant::Mollified { delta: 0.25 },
        "similarity" => NormVariant::ExactSimilarity,
        other => return Err(format!("unknown norm variant \"{other}\"")),
    };
    let pn = build_pseudo_norm(&a, kind, None).map_err(|e| e.to_string())?;
    let vp = render::Viewport {
        n,
        axis_x: 0,
        axis_y: if n > 1 { 1 } else { 0 },
        min_x: -extent,
        max_x: extent,
        min_y: if n > 1 { -extent } else { 0.0 },
        max_y: if n > 1 { extent } else { 1.0 },
        width,
        height,
    };
    let rgb = render::norm_heatmap_rgb(&vp, &pn);
    let mut rgba = Vec::with_capacity(width * height * 4);
    for px in rgb.chunks_exact(3) {
        rgba.extend_from_slice(px);
        rgba.push(255);
    }
    Ok(rgba)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_the_twin_dragon_deterministically() {
        let matrix = [1.0, -1.0, 1.0, 1.0];
        let digits = [0.0, 0.0, 1.0, 0.0];
        let a = render_attractor(2, &matrix, &digits, 30_000, 7, 200, 150).unwrap();
        assert_eq!(a.len(), 200 * 150 * 4);
        let b = render_attractor(2, &matrix, &digits, 30_000, 7, 200, 150).unwrap();
        assert_eq!(a, b);
        assert!(a.chunks_exact(4).any(|px| px[0] > 0), "image is all black");
        assert!(a.chunks_exact(4).all(|px| px[3] == 255));
    }

    #[test]
    fn verdict_strings_cover_both_outcomes() {
        let holds = check_osc(1, &[3.0], &[0.0, 2.0]).unwrap();
        assert!(holds.starts_with("holds"), "{holds}");
        let fails = check_osc(1, &[3.0], &[0.0, 1.0, 3.0]).unwrap();
        assert!(fails.starts_with("fails"), "{fails}");
        assert!(fails.contains("depth-2"), "{fails}");
    }

    #[test]
    fn heatmap_is_well_formed_and_inputs_are_validated() {
        let rgba = norm_heatmap(2, &[2.0, 0.0, 0.0, 3.0], "step", 2.0, 120, 90)
            .unwrap_or_else(|e| panic!("heatmap failed: {e}"));
        assert_eq!(rgba.len(), 120 * 90 * 4);
        assert!(norm_heatmap(2, &[2.0, 0.0, 0.0, 3.0], "nope", 2.0, 64, 64).is_err());
        assert!(render_attractor(2, &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0], 100, 1, 64, 64).is_err());
        // A digit set without the zero vector is rejected in every mode.
        assert!(check_osc(1, &[3.0], &[0.5, 1.0]).is_err());
        assert!(build_system(2, &[2.0, 0.0, 0.0], &[0.0, 0.0]).is_err());
    }
}
