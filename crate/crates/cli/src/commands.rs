use std::path::Path;

use serde_json::{json, Map, Value};

use span_core::augment::{
    inter_intra_probability_summary, optimize_scheme, sample_view_with, AugmentationScheme,
    InitKind, ProbabilityMatrix, SchemeConfig, SchemeMode,
};
use span_core::baselines::{
    clustered_scheme, compare_spectral_change, eigengap_cluster_count, spectral_clustering,
    uniform_scheme, ClusterAssignment,
};
use span_core::gcl::{
    forward, linear_probe, one_hot_degree, ridge_probe, train as train_encoder, Checkpoint,
    ConvKind, NegativeMode, NegativeScope, Optimizer, Pool, TrainConfig,
};
use span_core::graph::{
    complement_direction, declared_node_count, generate_random_geometric, generate_sbm, load_graph,
    write_edge_list,
};
use span_core::io::{
    fmt_f64, read_labels_csv, read_matrix_csv, read_values_csv, write_labels_csv, write_matrix_csv,
    write_table,
};
use span_core::oracle::{run_oracle_suite, run_oracle_suite_with, Suite, SuiteConfig};
use span_core::rng::derive_seed;
use span_core::spectral::{
    algebraic_connectivity, connected_components_spectral, diameter_bounds, graph_spectrum,
    spectral_distance, spectrum_norm_grad, SpectralSelection,
};
use span_core::{Graph, Matrix};

use crate::args::*;
use crate::manifest::Run;
use crate::{CliError, CliResult};

fn load(path: &Path) -> CliResult<Graph> {
    let n = declared_node_count(path)?;
    let loaded = load_graph(path, n)?;
    if loaded.self_loops_dropped + loaded.duplicates_dropped > 0 {
        log::warn!(
            "{}: dropped {} self-loops and {} duplicate edges",
            path.display(),
            loaded.self_loops_dropped,
            loaded.duplicates_dropped
        );
    }
    Ok(loaded.graph)
}

fn graph_name(path: &Path) -> String {
    path.file_stem().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

fn json_cell(s: &str) -> Value {
    if let Ok(i) = s.parse::<i64>() {
        return Value::from(i);
    }
    match s.parse::<f64>() {
        Ok(f) if f.is_finite() => Value::from(f),
        _ => Value::from(s),
    }
}

/// Writes `name.csv` or `name.json` depending on `--format`.
fn write_rows(
    g: &Global,
    run: &mut Run,
    name: &str,
    header: &[&str],
    rows: Vec<Vec<String>>,
) -> CliResult<()> {
    match g.format {
        Format::Csv => {
            let path = run.output(&g.out_dir, &format!("{name}.csv"));
            write_table(path, header, rows)?;
        }
        Format::Json => {
            let path = run.output(&g.out_dir, &format!("{name}.json"));
            let objects: Vec<Value> = rows
                .iter()
                .map(|r| {
                    let m: Map<String, Value> = header
                        .iter()
                        .zip(r)
                        .map(|(h, v)| (h.to_string(), json_cell(v)))
                        .collect();
                    Value::Object(m)
                })
                .collect();
            std::fs::write(path, serde_json::to_string_pretty(&objects)?)?;
        }
    }
    Ok(())
}

fn write_json(g: &Global, run: &mut Run, name: &str, value: &Value) -> CliResult<()> {
    let path = run.output(&g.out_dir, name);
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn gen(g: &Global, a: &GenArgs, run: &mut Run) -> CliResult<()> {
    let graph = match a.kind {
        GenKind::Sbm => generate_sbm(a.n, a.k, a.p_in, a.p_out, g.seed)?,
        GenKind::Geometric => {
            if !(a.radius > 0.0) {
                return Err(CliError::Usage("radius must be positive".into()));
            }
            generate_random_geometric(a.n, a.radius, g.seed)
        }
        GenKind::Edgelist => {
            let input = a
                .input
                .as_ref()
                .ok_or_else(|| CliError::Usage("edgelist needs --input".into()))?;
            let loaded = load_graph(input, a.nodes.or(declared_node_count(input)?))?;
            log::info!(
                "dropped {} self-loops and {} duplicates",
                loaded.self_loops_dropped,
                loaded.duplicates_dropped
            );
            loaded.graph
        }
    };
    write_edge_list(&graph, run.output(&g.out_dir, &format!("{}.edges", a.name)))?;
    if let Some(labels) = graph.node_labels() {
        write_labels_csv(
            run.output(&g.out_dir, &format!("{}.labels.csv", a.name)),
            labels,
        )?;
    }
    if let Some(pos) = graph.positions() {
        write_table(
            run.output(&g.out_dir, &format!("{}.positions.csv", a.name)),
            &["node", "x", "y"],
            pos.iter()
                .enumerate()
                .map(|(i, p)| vec![i.to_string(), fmt_f64(p[0]), fmt_f64(p[1])]),
        )?;
    }
    if a.features {
        write_matrix_csv(
            run.output(&g.out_dir, &format!("{}.features.csv", a.name)),
            &one_hot_degree(&graph),
        )?;
    }
    println!("nodes {} edges {}", graph.n(), graph.edge_count());
    Ok(())
}

/// `ε = σ_e·2m`: the ratio counts edges, the budget counts matrix entries.
fn budget(graph: &Graph, ratio: f64) -> CliResult<f64> {
    if !(ratio >= 0.0 && ratio.is_finite()) {
        return Err(CliError::Usage(format!(
            "epsilon ratio must be >= 0, got {ratio}"
        )));
    }
    Ok(ratio * 2.0 * graph.edge_count() as f64)
}

fn scheme_config(graph: &Graph, o: &SchemeOpts, seed: u64) -> CliResult<SchemeConfig> {
    let mode = match o.mode {
        ModeArg::Single => SchemeMode::Single,
        ModeArg::Double => SchemeMode::Double,
        ModeArg::Opposite => SchemeMode::Opposite,
    };
    let mut cfg = SchemeConfig::new(mode, budget(graph, o.epsilon_ratio)?);
    cfg.steps = o.steps;
    cfg.lr = o.lr;
    if let Some(k) = o.spectral_k {
        let sel = SpectralSelection::new(k)?;
        if sel.is_full_for(graph.n()) {
            log::info!(
                "K = {k} covers all {} eigenvalues; using the full decomposition",
                graph.n()
            );
        }
        cfg.selection = sel;
    }
    cfg.noise_eps = o.noise;
    cfg.noise_seed = seed;
    cfg.init_seed = derive_seed(seed, 1);
    cfg.init = match o.init {
        InitArg::Jitter => InitKind::ZeroPlusJitter,
        InitArg::Uniform => InitKind::UniformBudget,
    };
    cfg.removal_only = o.removal_only;
    cfg.validate(graph.n())?;
    Ok(cfg)
}

fn report_scheme(s: &AugmentationScheme) {
    if let Some(last) = s.trajectory.last() {
        match last.ratio2 {
            Some(r2) => println!("final ratio1 {:.6} ratio2 {:.6}", last.ratio1, r2),
            None => println!("final ratio1 {:.6}", last.ratio1),
        }
    }
}

pub fn scheme(g: &Global, a: &SchemeArgs, run: &mut Run) -> CliResult<()> {
    let graph = load(&a.graph)?;
    let cfg = scheme_config(&graph, &a.opts, g.seed)?;
    let s = optimize_scheme(&graph, &cfg)?;
    s.write_json(run.output(&g.out_dir, "scheme.json"))?;
    s.write_trajectory_csv(run.output(&g.out_dir, "trajectory.csv"))?;
    report_scheme(&s);
    Ok(())
}

pub fn sample(g: &Global, a: &SampleArgs, run: &mut Run) -> CliResult<()> {
    let graph = load(&a.graph)?;
    let s = AugmentationScheme::read_json(&a.scheme)?;
    if s.n() != graph.n() {
        return Err(CliError::Usage(format!(
            "scheme has {} nodes, graph has {}",
            s.n(),
            graph.n()
        )));
    }
    let delta = s.branch(a.branch as usize)?;
    let c = complement_direction(&graph)?;
    for i in 0..a.count {
        let view = sample_view_with(&graph, &c, delta, derive_seed(g.seed, i as u64))?;
        write_edge_list(
            &view,
            run.output(&g.out_dir, &format!("view_b{}_{i}.edges", a.branch)),
        )?;
    }
    Ok(())
}

pub fn spectrum(g: &Global, a: &SpectrumArgs, run: &mut Run) -> CliResult<()> {
    let graphs: Vec<(String, Graph)> = a
        .graphs
        .iter()
        .map(|p| Ok((graph_name(p), load(p)?)))
        .collect::<CliResult<_>>()?;

    let mut rows = Vec::new();
    for (name, graph) in &graphs {
        let es = graph_spectrum(graph)?;
        for (k, v) in es.values.iter().enumerate() {
            rows.push(vec![name.clone(), k.to_string(), fmt_f64(*v)]);
        }
    }
    write_rows(g, run, "spectrum", &["graph", "index", "eigenvalue"], rows)?;

    if a.compare {
        if graphs.len() < 2 {
            return Err(CliError::Usage(
                "--compare needs at least two graphs".into(),
            ));
        }
        let mut rows = Vec::new();
        for i in 0..graphs.len() {
            for j in i + 1..graphs.len() {
                let d = spectral_distance(&graphs[i].1, &graphs[j].1)?;
                rows.push(vec![graphs[i].0.clone(), graphs[j].0.clone(), fmt_f64(d)]);
            }
        }
        write_rows(
            g,
            run,
            "distances",
            &["graph_a", "graph_b", "distance"],
            rows,
        )?;
    }

    if a.properties {
        let mut rows = Vec::new();
        for (name, graph) in &graphs {
            let conn = if graph.n() >= 2 {
                fmt_f64(algebraic_connectivity(graph)?)
            } else {
                String::new()
            };
            let comps = connected_components_spectral(graph, 1e-8)?;
            let clusters = eigengap_cluster_count(graph)?;
            let (lower, upper, distinct, exact) = match diameter_bounds(graph) {
                Ok(b) => (
                    fmt_f64(b.lower),
                    fmt_f64(b.upper),
                    b.distinct_eigenvalues.to_string(),
                    b.exact.to_string(),
                ),
                Err(span_core::Error::Disconnected) => {
                    ("".into(), "".into(), "".into(), "inf".into())
                }
                Err(e) => return Err(e.into()),
            };
            rows.push(vec![
                name.clone(),
                graph.n().to_string(),
                graph.edge_count().to_string(),
                conn,
                comps.to_string(),
                clusters.to_string(),
                distinct,
                lower,
                upper,
                exact,
            ]);
        }
        write_rows(
            g,
            run,
            "properties",
            &[
                "graph",
                "nodes",
                "edges",
                "algebraic_connectivity",
                "components",
                "eigengap_clusters",
                "distinct_eigenvalues",
                "diameter_lower",
                "diameter_upper",
                "diameter_exact",
            ],
            rows,
        )?;
    }
    Ok(())
}

pub fn casestudy(g: &Global, a: &CasestudyArgs, run: &mut Run) -> CliResult<()> {
    let (graph, labels) = match a.graph_kind {
        CaseGraph::Sbm => {
            let graph = generate_sbm(a.n, a.k, a.p_in, a.p_out, g.seed)?;
            let labels = graph
                .node_labels()
                .map(<[usize]>::to_vec)
                .unwrap_or_default();
            (graph, labels)
        }
        CaseGraph::Geometric => {
            let graph = generate_random_geometric(a.n, a.radius, g.seed);
            let labels = spectral_clustering(&graph, a.k, g.seed)?.labels().to_vec();
            (graph, labels)
        }
    };
    let opts = SchemeOpts {
        mode: ModeArg::Opposite,
        epsilon_ratio: a.epsilon_ratio,
        steps: a.steps,
        lr: 1.0,
        spectral_k: None,
        noise: 1e-6,
        removal_only: false,
        init: InitArg::Jitter,
    };
    let s = optimize_scheme(&graph, &scheme_config(&graph, &opts, g.seed)?)?;
    let d1 = s.branch(1)?.matrix();
    let d2 = s.branch(2)?.matrix();
    let n = graph.n();
    let mut rows = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            rows.push(vec![
                i.to_string(),
                j.to_string(),
                u8::from(graph.has_edge(i, j)).to_string(),
                u8::from(labels[i] != labels[j]).to_string(),
                fmt_f64(d1[(i, j)]),
                fmt_f64(d2[(i, j)]),
            ]);
        }
    }
    write_rows(
        g,
        run,
        "slots",
        &["i", "j", "edge", "inter", "delta1", "delta2"],
        rows,
    )?;
    write_labels_csv(run.output(&g.out_dir, "labels.csv"), &labels)?;
    write_edge_list(&graph, run.output(&g.out_dir, "graph.edges"))?;
    let last = s.trajectory.last();
    let summary = json!({
        "delta1": inter_intra_probability_summary(&graph, s.branch(1)?, &labels)?,
        "delta2": inter_intra_probability_summary(&graph, s.branch(2)?, &labels)?,
        "ratio1": last.map(|r| r.ratio1),
        "ratio2": last.and_then(|r| r.ratio2),
        "epsilon": s.epsilon,
    });
    write_json(g, run, "summary.json", &summary)?;
    report_scheme(&s);
    Ok(())
}

pub fn preanalysis(g: &Global, a: &PreanalysisArgs, run: &mut Run) -> CliResult<()> {
    let graph = load(&a.graph)?;
    let clusters = match &a.labels {
        Some(p) => ClusterAssignment::new(read_labels_csv(p)?)?,
        None => {
            let k = eigengap_cluster_count(&graph)?.max(2);
            spectral_clustering(&graph, k, g.seed)?
        }
    };
    let mut rows = Vec::new();
    for &sigma in &a.sigmas {
        let schemes: Vec<(String, ProbabilityMatrix)> = vec![
            ("uniform".into(), uniform_scheme(&graph, sigma)?),
            (
                "clustered".into(),
                clustered_scheme(&graph, sigma, &clusters)?,
            ),
        ];
        for d in compare_spectral_change(&graph, &schemes, sigma, a.samples, g.seed)? {
            rows.push(vec![
                d.scheme,
                fmt_f64(d.sigma),
                fmt_f64(d.mean_distance),
                fmt_f64(d.std),
                d.samples.to_string(),
            ]);
        }
    }
    write_rows(
        g,
        run,
        "preanalysis",
        &["scheme", "sigma", "mean_distance", "std", "samples"],
        rows,
    )
}

fn features_for(graph: &Graph, path: Option<&Path>) -> CliResult<Matrix> {
    match path {
        Some(p) => {
            let x = read_matrix_csv(p)?;
            if x.nrows() != graph.n() {
                return Err(CliError::Usage(format!(
                    "{} has {} rows for {} nodes",
                    p.display(),
                    x.nrows(),
                    graph.n()
                )));
            }
            Ok(x)
        }
        None => Ok(one_hot_degree(graph)),
    }
}

pub fn train(g: &Global, a: &TrainArgs, run: &mut Run) -> CliResult<()> {
    let graphs: Vec<Graph> = a.graph.iter().map(|p| load(p)).collect::<CliResult<_>>()?;
    if !a.features.is_empty() && a.features.len() != graphs.len() {
        return Err(CliError::Usage("give one --features file per graph".into()));
    }
    let features: Vec<Matrix> = graphs
        .iter()
        .enumerate()
        .map(|(i, gr)| features_for(gr, a.features.get(i).map(|p| p.as_path())))
        .collect::<CliResult<_>>()?;
    let branches: Vec<(ProbabilityMatrix, ProbabilityMatrix)> = match a.uniform {
        Some(sigma) => graphs
            .iter()
            .map(|gr| uniform_scheme(gr, sigma).map(|d| (d.clone(), d)))
            .collect::<span_core::Result<_>>()?,
        None => {
            if a.scheme.len() != graphs.len() {
                return Err(CliError::Usage(
                    "give one --scheme per graph, or --uniform".into(),
                ));
            }
            a.scheme
                .iter()
                .map(|p| {
                    let s = AugmentationScheme::read_json(p)?;
                    Ok((s.branch(1)?.clone(), s.branch(2)?.clone()))
                })
                .collect::<span_core::Result<_>>()?
        }
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        lr: a.lr,
        feature_mask_ratio: a.mask_ratio,
        seed: g.seed,
        batch_size: a.batch_size,
        hidden_dim: a.hidden,
        layers: a.layers,
        conv: match a.conv {
            ConvArg::Gcn => ConvKind::Gcn,
            ConvArg::Gin => ConvKind::Gin,
        },
        gin_epsilon: a.gin_epsilon,
        pool: match a.pool {
            PoolArg::Mean => Pool::Mean,
            PoolArg::Sum => Pool::Sum,
        },
        optimizer: match a.opt {
            OptArg::Gd => Optimizer::Gd,
            OptArg::Adam => Optimizer::Adam,
        },
        negatives: match a.negatives {
            NegArg::Same => NegativeMode::SameView,
            NegArg::Opposite => NegativeMode::OppositeView,
            NegArg::Corrupted => NegativeMode::Corrupted,
        },
        scope: if a.batch_negatives {
            NegativeScope::Batch
        } else {
            NegativeScope::Graph
        },
    };
    let resume = a.resume.as_ref().map(Checkpoint::read_json).transpose()?;
    let out = train_encoder(&graphs, &features, &branches, &cfg, resume)?;
    out.checkpoint
        .write_json(run.output(&g.out_dir, "checkpoint.json"))?;
    out.checkpoint
        .write_loss_csv(run.output(&g.out_dir, "loss.csv"))?;
    if let (Some(first), Some(last)) = (out.losses().first(), out.losses().last()) {
        println!("loss {first:.6} -> {last:.6}");
    }
    Ok(())
}

pub fn probe(g: &Global, a: &ProbeArgs, run: &mut Run) -> CliResult<()> {
    let graph = load(&a.graph)?;
    let x = features_for(&graph, a.features.as_deref())?;
    let (reps, source) = match &a.checkpoint {
        Some(p) => {
            let ck = Checkpoint::read_json(p)?;
            if a.untrained {
                let (enc, _) = ck.config.init_params(x.ncols())?;
                (forward(&graph, &x, &enc)?, "untrained")
            } else {
                (forward(&graph, &x, &ck.encoder)?, "trained")
            }
        }
        None => (x, "raw"),
    };
    let (kind, report) = match (&a.labels, &a.targets) {
        (Some(l), _) => (
            "logistic",
            linear_probe(&reps, &read_labels_csv(l)?, &a.l2, g.seed)?,
        ),
        (None, Some(t)) => (
            "ridge",
            ridge_probe(&reps, &read_values_csv(t)?, &a.l2, g.seed)?,
        ),
        (None, None) => return Err(CliError::Usage("give --labels or --targets".into())),
    };
    let metric = if kind == "logistic" {
        "accuracy"
    } else {
        "rmse"
    };
    let metrics = json!({
        "probe": kind,
        "representations": source,
        metric: report.test_metric,
        "val_metric": report.val_metric,
        "l2_weight": report.l2_weight,
        "train_size": report.train_size,
        "val_size": report.val_size,
        "test_size": report.test_size,
    });
    write_json(g, run, "metrics.json", &metrics)?;
    if a.export_reps {
        write_matrix_csv(run.output(&g.out_dir, "reps.csv"), &reps)?;
    }
    println!(
        "{metric} {:.4} (l2 {})",
        report.test_metric, report.l2_weight
    );
    Ok(())
}

pub fn verify(g: &Global, a: &VerifyArgs, run: &mut Run) -> CliResult<()> {
    let cfg = SuiteConfig {
        seed: g.seed,
        suite: match a.suite {
            SuiteArg::Grad => Suite::Grad,
            SuiteArg::Proj => Suite::Proj,
            SuiteArg::Eigchange => Suite::Eigchange,
            SuiteArg::Gcl => Suite::Gcl,
            SuiteArg::All => Suite::All,
        },
        grad_instances: a.grad_instances,
        proj_instances: a.proj_instances,
        eigchange_instances: a.eigchange_instances,
        gcl_instances: a.gcl_instances,
        ..SuiteConfig::default()
    };
    let report = if a.inject_sign_error {
        run_oracle_suite_with(&cfg, &|gr, c, d, s, n| {
            Ok(-spectrum_norm_grad(gr, c, d, s, n)?.0)
        })?
    } else {
        run_oracle_suite(&cfg)?
    };
    std::fs::write(
        run.output(&g.out_dir, "oracle_report.json"),
        report.to_json()?,
    )?;
    for c in &report.checks {
        println!(
            "{:<8} {} {}/{} worst_rel_err {:.3e} skipped {}",
            if c.passed() { "PASS" } else { "FAIL" },
            c.check_name,
            c.passes,
            c.instances,
            c.worst_rel_err,
            c.skipped_degenerate
        );
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Verification(
            "one or more oracle checks failed".into(),
        ))
    }
}
