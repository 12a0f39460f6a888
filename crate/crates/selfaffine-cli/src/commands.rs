//! The five subcommands, each returning its exit code.
//!
//! Verdict-style codes: 0 success (or "holds"), 1 a definite negative
//! finding (collision witness, envelope violation, failed identity check),
//! 2 undecided. Configuration problems exit 64 and exhausted budgets 65,
//! mapped from the error class in `main`.

use selfaffine::{
    attractor_radius, chaos_game, collision_amplify, collision_density_bound, convolution_check,
    decide_osc, density_sweep, dim_estimate, enumerate_cloud, measure_bracket, render, Error,
    OscVerdict, Result,
};

use selfaffine::ArithmeticMode;

use crate::config::RunConfig;
use crate::report::{fmt, Reporter};

fn mode_name(mode: &ArithmeticMode) -> &'static str {
    match mode {
        ArithmeticMode::ExactInteger => "integer",
        ArithmeticMode::ExactRational => "rational",
        ArithmeticMode::Float { .. } => "float",
    }
}

pub fn run_check_osc(cfg: &RunConfig, rep: &Reporter) -> Result<i32> {
    let sys = cfg.build_system()?;
    let (rn, _) = cfg.build_norms(&sys)?;
    let report = decide_osc(&sys, &rn, cfg.osc.max_depth, cfg.osc.state_budget)?;
    rep.kv("mode", mode_name(&sys.mode));
    rep.kv("digits", sys.n_digits);
    rep.kv("q", fmt(sys.q));
    rep.kv("s", fmt(sys.s));
    rep.kv("automaton_bound", fmt(report.bound));
    rep.kv("states_explored", report.states_explored);
    match &report.verdict {
        OscVerdict::Holds => {
            rep.kv("verdict", "holds");
            Ok(0)
        }
        OscVerdict::Fails { witness } => {
            rep.kv("verdict", "fails");
            rep.kv("witness_depth", witness.depth);
            rep.kv("witness_gap", fmt(witness.gap));
            rep.kv("witness_verified", witness.verified);
            let rows: Vec<Vec<String>> = (0..witness.depth)
                .map(|i| {
                    vec![
                        i.to_string(),
                        witness.word_a[i].to_string(),
                        witness.word_b[i].to_string(),
                    ]
                })
                .collect();
            let path = rep.csv("witness.csv", "position,digit_a,digit_b", &rows)?;
            rep.kv("witness_csv", path.display());
            Ok(1)
        }
        OscVerdict::Unknown { min_separation, depth_reached } => {
            rep.kv("verdict", "unknown");
            rep.kv("min_separation", fmt(*min_separation));
            rep.kv("depth_reached", depth_reached);
            Ok(2)
        }
    }
}

pub fn run_measure(cfg: &RunConfig, rep: &Reporter) -> Result<i32> {
    let sys = cfg.build_system()?;
    let (rn, pn) = cfg.build_norms(&sys)?;
    let osc = decide_osc(&sys, &rn, cfg.osc.max_depth, cfg.osc.state_budget)?;
    rep.kv("s", fmt(sys.s));

    if let OscVerdict::Fails { witness } = &osc.verdict {
        // Collisions concentrate mass: the amplified cylinder bounds the
        // measure from above without any sweep.
        rep.kv("osc", "fails");
        let folds = cfg.measure.amplify_folds.max(1);
        let amp = collision_amplify(&sys, witness, folds, cfg.measure.cylinder_budget)?;
        rep.kv("amplify_folds", amp.fold);
        rep.kv("amplify_depth", amp.depth);
        rep.kv("multiplicity_lb", fmt(amp.multiplicity_lb));
        if let Some(exact) = amp.enumerated_multiplicity {
            rep.kv("multiplicity_enumerated", exact);
        }
        let h_hi = collision_density_bound(&sys, &rn, &pn, &amp)?;
        rep.kv("h_lo", fmt(0.0));
        rep.kv("h_hi", fmt(h_hi));
        return Ok(0);
    }

    rep.kv(
        "osc",
        match osc.verdict {
            OscVerdict::Holds => "holds",
            OscVerdict::Unknown { .. } => "unknown",
            OscVerdict::Fails { .. } => unreachable!(),
        },
    );
    let params = cfg.sweep_params();
    let report = measure_bracket(&sys, &rn, &pn, &params)?;
    rep.kv("depth", report.depth);
    rep.kv("h_lo", fmt(report.h_lo));
    rep.kv("h_hi", fmt(report.h_hi));
    rep.kv("width", fmt(report.h_hi - report.h_lo));
    rep.kv("drift", fmt(report.drift));
    rep.kv("windows_swept", report.windows_swept);
    rep.kv("best_density_lo", fmt(report.best_density_lo));
    rep.kv("best_density_hi", fmt(report.best_density_hi));

    // Per-window detail for auditing the bracket.
    let sweep = density_sweep(&sys, &rn, &pn, &params)?;
    let rows: Vec<Vec<String>> = sweep
        .scores
        .iter()
        .map(|sc| {
            vec![
                sc.level.to_string(),
                sc.shape.to_string(),
                fmt(sc.sigma_lo),
                fmt(sc.sigma_hi),
                fmt(sc.diam_lo),
                fmt(sc.diam_hi),
                fmt(sc.density_lo),
                fmt(sc.density_hi),
                sc.convex.to_string(),
            ]
        })
        .collect();
    let path = rep.csv(
        "windows.csv",
        "level,shape,sigma_lo,sigma_hi,diam_lo,diam_hi,density_lo,density_hi,convex",
        &rows,
    )?;
    rep.kv("windows_csv", path.display());
    Ok(0)
}

pub fn run_norm_probe(cfg: &RunConfig, rep: &Reporter) -> Result<i32> {
    let sys = cfg.build_system()?;
    let (rn, pn) = cfg.build_norms(&sys)?;
    rep.kv("variant", &cfg.norm.variant);
    rep.kv("theta", fmt(rn.theta));
    rep.kv("horizon", rn.m);
    rep.kv("q", fmt(sys.q));
    rep.kv("s", fmt(sys.s));
    rep.kv("attractor_radius", fmt(attractor_radius(&sys, &rn)));

    let stats = pn.annulus_stats(cfg.probe.samples, cfg.probe.seed);
    rep.kv("annulus_min", fmt(stats.empirical_min));
    rep.kv("annulus_max", fmt(stats.empirical_max));
    rep.kv("annulus_cert_lo", fmt(stats.cert_lo));
    rep.kv("annulus_cert_hi", fmt(stats.cert_hi));

    let beta = pn.beta_estimate(cfg.probe.samples, cfg.probe.seed);
    rep.kv("beta_hat", fmt(beta));
    let lambda = pn.lambda_estimate(0.125, cfg.probe.samples, cfg.probe.seed);
    rep.kv("lambda_hat", fmt(lambda));

    let rows: Vec<Vec<String>> = (0..=32)
        .map(|j| vec![j.to_string(), fmt(rn.inv_pow_ub(j)), fmt(rn.fwd_pow_ub(j))])
        .collect();
    let path = rep.csv("optable.csv", "power,inv_op_ub,fwd_op_ub", &rows)?;
    rep.kv("optable_csv", path.display());

    match pn.comparability(cfg.probe.samples, cfg.probe.seed, cfg.probe.comparability_cap) {
        Ok(fit) => {
            rep.kv("comparability_slope", fmt(fit.slope));
            rep.kv("comparability_c", fmt(fit.c_est));
            rep.kv("comparability_violations", fit.violations);
            rep.kv("comparability_samples", fit.samples);
            if fit.violations > 0 {
                return Ok(1);
            }
            Ok(0)
        }
        Err(Error::FitViolation { c_est, cap }) => {
            rep.kv("comparability_c", fmt(c_est));
            rep.kv("comparability_cap", fmt(cap));
            rep.kv("comparability_verdict", "cap_exceeded");
            Ok(1)
        }
        Err(e) => Err(e),
    }
}

pub fn run_density(cfg: &RunConfig, rep: &Reporter) -> Result<i32> {
    let sys = cfg.build_system()?;
    let (rn, _) = cfg.build_norms(&sys)?;
    let c = &cfg.convolution;
    let conv = convolution_check(&sys, &rn, c.depth, c.trials, c.samples, c.seed)?;
    rep.kv("conv_depth", conv.depth);
    rep.kv("conv_trials", conv.trials);
    rep.kv("conv_passed", conv.passed);
    rep.kv("conv_samples", conv.samples_per_side);
    let rows: Vec<Vec<String>> = conv
        .z_scores
        .iter()
        .enumerate()
        .map(|(i, z)| vec![i.to_string(), fmt(*z)])
        .collect();
    let path = rep.csv("zscores.csv", "trial,z", &rows)?;
    rep.kv("zscores_csv", path.display());

    let cloud = enumerate_cloud(
        &sys,
        &rn,
        cfg.measure.depth.min(12),
        cfg.measure.cylinder_budget,
    )?;
    let dims = dim_estimate(
        &sys,
        &rn,
        &cloud.points,
        cloud.covering_radius,
        cfg.measure.depth,
        cfg.measure.cylinder_budget,
    )?;
    rep.kv("s_theory", fmt(dims.s_theory));
    rep.kv("s_w_hat", fmt(dims.s_w_hat));
    match dims.box_dim_hat {
        Some(d) => rep.kv("box_dim_hat", fmt(d)),
        None => rep.kv("box_dim_hat", "none"),
    }
    rep.kv("box_scales_used", dims.box_scales_used);

    if conv.passed + 1 >= conv.trials {
        Ok(0)
    } else {
        Ok(1)
    }
}

pub fn run_render(cfg: &RunConfig, rep: &Reporter) -> Result<i32> {
    let sys = cfg.build_system()?;
    let (rn, pn) = cfg.build_norms(&sys)?;
    let r = &cfg.render;
    match r.style.as_str() {
        "cloud" => {
            let cloud = if r.depth == 0 {
                chaos_game(&sys, r.points, r.seed)
            } else {
                enumerate_cloud(&sys, &rn, r.depth, cfg.measure.cylinder_budget)?
            };
            let bytes = render::render_cloud_pgm(&cloud.points, sys.n, r.width, r.height, r.margin)?;
            let (path, hash) = rep.binary("cloud.pgm", &bytes)?;
            rep.kv("image", path.display());
            rep.kv("image_sha256", hash);
            rep.kv("points", cloud.count);
        }
        "norm" => {
            // View sized by the certified attractor radius so the heatmap
            // always spans a few shells.
            let radius = attractor_radius(&sys, &rn).max(1.0) * 1.5;
            let vp = render::Viewport {
                n: sys.n,
                axis_x: 0,
                axis_y: if sys.n > 1 { 1 } else { 0 },
                min_x: -radius,
                max_x: radius,
                min_y: if sys.n > 1 { -radius } else { 0.0 },
                max_y: if sys.n > 1 { radius } else { 1.0 },
                width: r.width,
                height: r.height,
            };
            let rgb = render::norm_heatmap_rgb(&vp, &pn);
            let bytes = render::ppm_bytes(r.width, r.height, &rgb)?;
            let (path, hash) = rep.binary("norm.ppm", &bytes)?;
            rep.kv("image", path.display());
            rep.kv("image_sha256", hash);
        }
        other => {
            return Err(Error::InvalidParameter(format!("unknown render style \"{other}\"")));
        }
    }
    rep.kv("width", r.width);
    rep.kv("height", r.height);
    Ok(0)
}
