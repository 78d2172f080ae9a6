//! Exit criteria. Prints one PASS/FAIL line per criterion.
//!
//! With `SPAN_ACCEPTANCE_STRICT=1` the process exits nonzero when any
//! criterion fails; otherwise failures are reported without aborting the
//! remaining test targets.

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use span_core::augment::{
    inter_intra_probability_summary, optimize_scheme, sample_view, AugmentationScheme,
    SchemeConfig, SchemeMode,
};
use span_core::baselines::{
    clustered_scheme, compare_spectral_change, spectral_clustering, uniform_scheme,
};
use span_core::gcl::{
    contrastive_loss, forward, gcn_forward, infonce_mi, linear_probe, one_hot_degree, train,
    ConvKind, EncoderState, NegativeMode, Representations, TrainConfig, L2_GRID,
};
use span_core::graph::{
    generate_random_geometric, generate_sbm, normalized_laplacian, DEGREE_FLOOR,
};
use span_core::oracle::{
    check_gcl_instance, check_gradient_instance, linearization_ratio, run_oracle_suite, FdConfig,
    GradFn, Outcome, Suite, SuiteConfig,
};
use span_core::rng::{derive_seed, seeded};
use span_core::spectral::{
    connected_components_spectral, eig_full, eig_selective, eigenvalues, spectrum_norm_grad,
    SpectralSelection,
};
use span_core::{Graph, Matrix, Result};

const SEED: u64 = 20240;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn gradient_matches_finite_differences() -> Result<Verdict> {
    let fd = FdConfig::default();
    let grad: &GradFn = &|g, c, d, s, n| Ok(spectrum_norm_grad(g, c, d, s, n)?.0);
    let mut checked = 0;
    let mut passed = 0;
    let mut skipped = 0;
    let mut worst: f64 = 0.0;
    let mut idx = 0;
    while checked < 100 {
        match check_gradient_instance(SEED, idx, grad, &fd)?.0 {
            Outcome::Skipped => skipped += 1,
            Outcome::Checked { pass, worst: w } => {
                checked += 1;
                passed += usize::from(pass);
                worst = worst.max(w);
            }
        }
        idx += 1;
    }
    verdict(
        passed == checked,
        format!(
            "{passed}/{checked} instances, worst rel err {worst:.2e}, {skipped} degenerate skipped"
        ),
    )
}

fn projection_is_correct() -> Result<Verdict> {
    let cfg = SuiteConfig {
        seed: SEED,
        suite: Suite::Proj,
        proj_instances: 50,
        ..SuiteConfig::default()
    };
    let report = run_oracle_suite(&cfg)?;
    let detail = report
        .checks
        .iter()
        .map(|c| {
            format!(
                "{} {}/{} worst {:.2e}",
                c.check_name, c.passes, c.instances, c.worst_rel_err
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    verdict(report.passed(), detail)
}

fn opposite_scheme_brackets_the_spectrum() -> Result<Verdict> {
    let runs: Vec<(f64, f64, usize, usize)> = (0..10u64)
        .into_par_iter()
        .map(|s| {
            let g = generate_random_geometric(50, 0.3, derive_seed(SEED, s));
            let eps = 0.05 * 2.0 * g.edge_count() as f64;
            let mut cfg = SchemeConfig::new(SchemeMode::Opposite, eps);
            cfg.noise_seed = s;
            cfg.init_seed = derive_seed(s, 1);
            let opp = optimize_scheme(&g, &cfg)?;
            let last = opp.trajectory.last().expect("50 steps");
            // monotonicity is audited at a small step
            cfg.mode = SchemeMode::Single;
            cfg.lr = 1e-3;
            let single = optimize_scheme(&g, &cfg)?;
            let values: Vec<f64> = single.trajectory.iter().map(|r| r.objective).collect();
            let decreasing = values.windows(2).filter(|w| w[1] < w[0]).count();
            Ok((
                last.ratio1,
                last.ratio2.expect("two branches"),
                decreasing,
                values.len(),
            ))
        })
        .collect::<Result<_>>()?;
    let bracketed = runs.iter().filter(|r| r.0 > 1.0 && r.1 < 1.0).count();
    let monotone = runs
        .iter()
        .filter(|r| r.2 as f64 <= 0.02 * r.3 as f64)
        .count();
    let min1 = runs.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let max2 = runs.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    verdict(
        bracketed == 10 && monotone == 10,
        format!("bracketed {bracketed}/10 (min ratio1 {min1:.6}, max ratio2 {max2:.6}), single-way monotone {monotone}/10"),
    )
}

fn case_study_prefers_inter_cluster_slots() -> Result<Verdict> {
    let factors: Vec<(f64, f64)> = (0..5u64)
        .into_par_iter()
        .map(|s| {
            let g = generate_sbm(40, 2, 0.8, 0.1, derive_seed(SEED, s))?;
            let labels = g.node_labels().expect("planted").to_vec();
            let mut cfg =
                SchemeConfig::new(SchemeMode::Opposite, 0.1 * 2.0 * g.edge_count() as f64);
            cfg.noise_seed = s;
            cfg.init_seed = derive_seed(s, 1);
            let scheme = optimize_scheme(&g, &cfg)?;
            let r1 = inter_intra_probability_summary(&g, scheme.branch(1)?, &labels)?;
            let r2 = inter_intra_probability_summary(&g, scheme.branch(2)?, &labels)?;
            Ok((
                r1.mean_inter_remove / r1.mean_intra_remove,
                r2.mean_inter_add / r2.mean_intra_add,
            ))
        })
        .collect::<Result<_>>()?;
    let removal = factors.iter().filter(|f| f.0 >= 1.2).count();
    let addition = factors.iter().filter(|f| f.1 >= 1.2).count();
    let fmt = |v: Vec<f64>| {
        v.iter()
            .map(|x| format!("{x:.3}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    verdict(
        removal >= 4 && addition >= 4,
        format!(
            "removal factor >= 1.2 on {removal}/5 [{}], addition on {addition}/5 [{}]",
            fmt(factors.iter().map(|f| f.0).collect()),
            fmt(factors.iter().map(|f| f.1).collect())
        ),
    )
}

fn first_order_change_is_linear() -> Result<Verdict> {
    let mut ratios = Vec::new();
    let mut idx = 0;
    while ratios.len() < 200 {
        if let Some(r) = linearization_ratio(SEED, idx)? {
            ratios.push(r);
        }
        idx += 1;
    }
    let inside = ratios.iter().filter(|r| (5.0..=20.0).contains(*r)).count();
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    verdict(
        inside as f64 >= 0.9 * ratios.len() as f64,
        format!("{inside}/200 ratios in [5, 20], median {:.3}", sorted[100]),
    )
}

fn clustered_dropping_moves_the_spectrum_more() -> Result<Verdict> {
    let g = generate_sbm(60, 2, 0.5, 0.05, SEED)?;
    let clusters = spectral_clustering(&g, 2, SEED)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for sigma in [0.1, 0.2, 0.3, 0.4, 0.5] {
        let schemes = vec![
            ("uniform".to_string(), uniform_scheme(&g, sigma)?),
            (
                "clustered".to_string(),
                clustered_scheme(&g, sigma, &clusters)?,
            ),
        ];
        let d = compare_spectral_change(
            &g,
            &schemes,
            sigma,
            100,
            derive_seed(SEED, (sigma * 10.0) as u64),
        )?;
        let (u, c) = (&d[0], &d[1]);
        let se = ((u.std.powi(2) + c.std.powi(2)) / 100.0).sqrt();
        let gap = c.mean_distance - u.mean_distance;
        pass &= gap > 0.0;
        if sigma >= 0.2 - 1e-12 {
            pass &= gap > 2.0 * se;
        }
        parts.push(format!("σ={sigma}: gap {gap:+.4} ({:+.2} SE)", gap / se));
    }
    verdict(pass, parts.join(", "))
}

fn check_invariants(g: &Graph) -> Result<(bool, f64)> {
    let n = g.n() as f64;
    let values = eigenvalues(&normalized_laplacian(g, DEGREE_FLOOR))?;
    let in_range = values.iter().all(|&l| (-1e-9..=2.0 + 1e-9).contains(&l));
    let sum_err = (values.iter().sum::<f64>() - n).abs();
    let comps = connected_components_spectral(g, 1e-8)? == g.component_count();
    Ok((in_range && sum_err <= 1e-8 * n && comps, sum_err / n))
}

fn spectral_invariants_hold() -> Result<Verdict> {
    let mut graphs = Vec::new();
    for i in 0..50u64 {
        let mut rng = seeded(derive_seed(SEED ^ 0x1a7, i));
        let n = rng.random_range(5..=120);
        let s = rng.random();
        graphs.push(match i % 3 {
            0 => generate_sbm(n, 2, 0.5, 0.05, s)?,
            1 => generate_random_geometric(n, rng.random_range(0.08..0.4), s),
            _ => generate_sbm(n, 3, 0.3, 0.0, s)?,
        });
    }
    let random = graphs.len();
    // views and fixtures from the other criteria
    for s in 0..5u64 {
        let g = generate_sbm(40, 2, 0.8, 0.1, derive_seed(SEED, s))?;
        let u = uniform_scheme(&g, 0.5)?;
        graphs.push(sample_view(&g, &u, s)?);
        graphs.push(g);
        graphs.push(generate_random_geometric(50, 0.3, derive_seed(SEED, s)));
        graphs.push(generate_sbm(120, 3, 0.3, 0.02, s)?);
    }
    let results: Vec<(bool, f64)> = graphs
        .par_iter()
        .map(check_invariants)
        .collect::<Result<_>>()?;
    let ok = results.iter().filter(|r| r.0).count();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    verdict(
        ok == graphs.len(),
        format!(
            "{ok}/{} graphs ({random} random), worst |Σλ − n|/n {worst:.2e}",
            graphs.len()
        ),
    )
}

fn selective_matches_full() -> Result<Verdict> {
    let results: Vec<(bool, f64)> = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded(derive_seed(SEED ^ 0x5e1, i));
            let n = rng.random_range(10..=200);
            let s = rng.random();
            let g = if i % 2 == 0 {
                generate_sbm(n, 2, 0.3, 0.05, s)?
            } else {
                generate_random_geometric(n, 0.25, s)
            };
            let l = normalized_laplacian(&g, DEGREE_FLOOR);
            let full = eig_full(&l)?;
            let mut pass = true;
            let mut worst: f64 = 0.0;
            for k in [1, 5, 20] {
                let (sel, _) = eig_selective(&l, SpectralSelection::new(k)?)?;
                let want: Vec<f64> = SpectralSelection::new(k)?
                    .indices(g.n())
                    .iter()
                    .map(|&i| full.values[i])
                    .collect();
                for (a, b) in sel.values.iter().zip(&want) {
                    worst = worst.max((a - b).abs());
                }
                pass &= sel.values.len() == want.len();
            }
            Ok((pass && worst <= 1e-8, worst))
        })
        .collect::<Result<_>>()?;
    let ok = results.iter().filter(|r| r.0).count();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    verdict(
        ok == 50,
        format!("{ok}/50 instances, worst abs err {worst:.2e}"),
    )
}

fn permute(g: &Graph, x: &Matrix, perm: &[usize]) -> Result<(Graph, Matrix)> {
    let n = g.n();
    let mut a = Matrix::zeros(n, n);
    let mut xp = Matrix::zeros(n, x.ncols());
    for i in 0..n {
        xp.set_row(perm[i], &x.row(i));
        for j in 0..n {
            a[(perm[i], perm[j])] = g.adjacency()[(i, j)];
        }
    }
    Ok((Graph::from_adjacency(a)?, xp))
}

fn contrastive_machinery_is_exact() -> Result<Verdict> {
    let fd = FdConfig {
        rtol: 1e-3,
        ..FdConfig::default()
    };
    let backprop: Vec<(bool, f64)> = (0..16)
        .into_par_iter()
        .map(|i| check_gcl_instance(SEED, i, &fd))
        .collect::<Result<_>>()?;
    let bp_ok = backprop.iter().filter(|r| r.0).count();
    let bp_worst = backprop.iter().map(|r| r.1).fold(0.0, f64::max);

    let mut equivariant = 0;
    for t in 0..20u64 {
        let mut rng = seeded(derive_seed(SEED ^ 0xe9, t));
        let n = rng.random_range(3..=30);
        let g = generate_sbm(n, 2, 0.5, 0.1, rng.random())?;
        let x = Matrix::from_fn(n, 5, |_, _| rng.random_range(-1.0..1.0));
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let enc = EncoderState::new(ConvKind::Gcn, &[5, 8, 4], 0.0, t)?;
        let h = gcn_forward(&g, &x, &enc)?;
        let (gp, xp) = permute(&g, &x, &perm)?;
        let hp = gcn_forward(&gp, &xp, &enc)?;
        let (_, h_moved) = permute(&g, &h, &perm)?;
        equivariant += usize::from(hp == h_moved);
    }

    let h = [0.3, -0.2, 0.9];
    let single = infonce_mi(&h, &[1.0, 1.0, 0.5], &Matrix::from_row_slice(1, 3, &h));
    let mut closed = single.abs() <= 1e-10;
    for n in [2usize, 5, 40] {
        let reps = Representations {
            node_reps: Matrix::from_fn(n, 3, |_, j| [0.5, 1.0, -2.0][j]),
            graph_rep: nalgebra::DVector::from_row_slice(&[0.5, 1.0, -2.0]),
        };
        for mode in [NegativeMode::SameView, NegativeMode::OppositeView] {
            let l = contrastive_loss(&reps, &reps, mode, None)?;
            closed &= (l - 2.0 * (n as f64).ln()).abs() <= 1e-10;
        }
    }
    verdict(
        bp_ok == backprop.len() && equivariant == 20 && closed,
        format!(
            "backprop vs fd {bp_ok}/{} (worst {bp_worst:.2e}), exact equivariance {equivariant}/20, closed forms {}",
            backprop.len(),
            if closed { "ok" } else { "off" }
        ),
    )
}

struct ProbeRow {
    trained: f64,
    untrained: f64,
    raw: f64,
    uniform: f64,
}

fn probe_accuracy(
    g: &Graph,
    x: &Matrix,
    enc: &EncoderState,
    labels: &[usize],
    seed: u64,
) -> Result<f64> {
    Ok(linear_probe(&forward(g, x, enc)?, labels, &L2_GRID, seed)?.test_metric)
}

fn learning_signal_seed(s: u64) -> Result<ProbeRow> {
    let g = generate_sbm(120, 3, 0.3, 0.02, s)?;
    let labels = g.node_labels().expect("planted").to_vec();
    let x = one_hot_degree(&g);
    let mut sc = SchemeConfig::new(SchemeMode::Opposite, 0.1 * 2.0 * g.edge_count() as f64);
    sc.noise_seed = s;
    sc.init_seed = derive_seed(s, 1);
    let scheme: AugmentationScheme = optimize_scheme(&g, &sc)?;
    let cfg = TrainConfig {
        epochs: 300,
        feature_mask_ratio: 0.2,
        seed: s,
        ..TrainConfig::default()
    };
    let span = vec![(scheme.branch(1)?.clone(), scheme.branch(2)?.clone())];
    let trained = train(
        std::slice::from_ref(&g),
        std::slice::from_ref(&x),
        &span,
        &cfg,
        None,
    )?;
    let u = uniform_scheme(&g, 0.1)?;
    let uni = train(
        std::slice::from_ref(&g),
        std::slice::from_ref(&x),
        &[(u.clone(), u)],
        &cfg,
        None,
    )?;
    let (fresh, _) = cfg.init_params(x.ncols())?;
    Ok(ProbeRow {
        trained: probe_accuracy(&g, &x, trained.encoder(), &labels, s)?,
        untrained: probe_accuracy(&g, &x, &fresh, &labels, s)?,
        raw: linear_probe(&x, &labels, &L2_GRID, s)?.test_metric,
        uniform: probe_accuracy(&g, &x, uni.encoder(), &labels, s)?,
    })
}

fn training_beats_baselines() -> Result<Verdict> {
    let rows: Vec<ProbeRow> = (0..5u64)
        .into_par_iter()
        .map(learning_signal_seed)
        .collect::<Result<_>>()?;
    let mean = |f: fn(&ProbeRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    let (t, u, r, uni) = (
        mean(|p| p.trained),
        mean(|p| p.untrained),
        mean(|p| p.raw),
        mean(|p| p.uniform),
    );
    let over_untrained = t - u >= 0.03;
    let over_raw = t - r >= 0.03;
    let vs_uniform = t >= uni - 0.01;
    verdict(
        over_untrained && over_raw && vs_uniform,
        format!(
            "trained {:.1}%, untrained {:.1}% ({}), raw {:.1}% ({}), uniform-scheme {:.1}% ({})",
            100.0 * t,
            100.0 * u,
            if over_untrained { "ok" } else { "margin < 3pp" },
            100.0 * r,
            if over_raw { "ok" } else { "margin < 3pp" },
            100.0 * uni,
            if vs_uniform { "ok" } else { "below" },
        ),
    )
}

type Criterion = (&'static str, fn() -> Result<Verdict>, Duration);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "gradient_vs_finite_differences",
            gradient_matches_finite_differences,
            Duration::from_secs(120),
        ),
        (
            "projection_correctness",
            projection_is_correct,
            Duration::from_secs(60),
        ),
        (
            "opposite_direction_bracketing",
            opposite_scheme_brackets_the_spectrum,
            Duration::from_secs(300),
        ),
        (
            "case_study_inter_cluster_preference",
            case_study_prefers_inter_cluster_slots,
            Duration::from_secs(300),
        ),
        (
            "first_order_linearization",
            first_order_change_is_linear,
            Duration::from_secs(120),
        ),
        (
            "clustered_vs_uniform_spectral_change",
            clustered_dropping_moves_the_spectrum_more,
            Duration::from_secs(180),
        ),
        (
            "spectral_invariants",
            spectral_invariants_hold,
            Duration::from_secs(60),
        ),
        (
            "selective_vs_full_decomposition",
            selective_matches_full,
            Duration::from_secs(120),
        ),
        (
            "contrastive_machinery",
            contrastive_machinery_is_exact,
            Duration::from_secs(120),
        ),
        (
            "end_to_end_learning_signal",
            training_beats_baselines,
            Duration::from_secs(1200),
        ),
    ];
    let mut failed = Vec::new();
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(v) => (v.pass && elapsed <= *budget, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed.push(i + 1);
        }
        println!(
            "{} [{:>2}] {name}: {detail} ({:.1}s of {}s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!(
        "acceptance: {}/{} criteria passed; failing: {:?}",
        criteria.len() - failed.len(),
        criteria.len(),
        failed
    );
    let strict = std::env::var("SPAN_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if !failed.is_empty() && strict {
        std::process::exit(1);
    }
}
