use std::collections::BTreeMap;
use std::fmt::Display;

use anyhow::Context;
use graphcollide::cftp::{estimate_moment, select_graph};
use graphcollide::dual::{simulate_path, ChainConfig, PathSegment};
use graphcollide::graph::{self, algebraic_connectivity, laplacian_spectrum, GraphSpec};
use graphcollide::moments::{
    block_eigenvalues, check_moment_order, parse_rational, solve_moment_ode, solve_stationary_recurrence,
    solve_stationary_recurrence_exact, MomentTable,
};
use graphcollide::particles::{find_independent_sets, run_compromise_process};
use graphcollide::sde::{empirical_support_profile, simulate_sde, SdePath, SdeReport};
use graphcollide::stats::stream_rng;
use graphcollide::{
    BoundaryPolicy, FinderConfig, Horizon, MomentKind, OccupationVector, PartitionVector, SampleMode, SdeConfig,
    SimplexPoint, VertexSet,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::*;
use crate::report::{Outcome, Seed, Usage};

pub fn dispatch(cmd: &Command) -> anyhow::Result<Outcome> {
    match cmd {
        Command::Moments(a) => moments(a),
        Command::Estimate(a) => estimate(a),
        Command::SelectGraph(a) => select(a),
        Command::FindIs(a) => find_is(a),
        Command::SimulateDual(a) => simulate_dual(a),
        Command::SimulateSde(a) => simulate_sde_cmd(a),
        Command::SimulateDiscrete(a) => simulate_discrete(a),
        Command::Spectrum(a) => spectrum(a),
    }
}

fn json<T: Serialize>(v: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn csv<I>(header: &[&str], rows: I) -> anyhow::Result<String>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// List cells in CSV output are `;`-separated.
fn cell<T: Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

fn outcome(json: String, csv: String, seed: Option<Seed>) -> Outcome {
    Outcome {
        json,
        json_ext: "json",
        csv,
        seed,
        warnings: Vec::new(),
    }
}

fn floats(s: &str, what: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Usage(format!("{what} `{s}` is not a comma-separated list of numbers")).into())
}

fn start_point(g: &GraphSpec, x0: Option<&str>) -> anyhow::Result<SimplexPoint> {
    match x0 {
        None => Ok(SimplexPoint::uniform(g.vertex_count())),
        Some(s) => Ok(SimplexPoint::new(floats(s, "--x0")?)?),
    }
}

#[derive(Serialize)]
struct MomentsOut<'a> {
    graph: String,
    tables: &'a [MomentTable],
}

fn moments(args: &MomentsArgs) -> anyhow::Result<Outcome> {
    let g = graph::resolve(&args.graph)?;
    check_moment_order(g.vertex_count(), args.order)?;
    let tables = match (&args.alpha, &args.t) {
        (Some(alpha), _) if args.exact => vec![solve_stationary_recurrence_exact(&g, &parse_rational(alpha)?, args.order)?],
        (Some(alpha), _) => {
            let alpha: f64 = alpha.parse().or_else(|_| parse_rational(alpha).map(|q| num_traits::ToPrimitive::to_f64(&q).unwrap_or(f64::NAN)))?;
            vec![solve_stationary_recurrence(&g, alpha, args.order)?]
        }
        (None, Some(t)) => solve_moment_ode(&g, &start_point(&g, args.x0.as_deref())?, args.order, t)?,
        (None, None) => return Err(Usage("moments needs --alpha (stationary) or --t (time-dependent)".into()).into()),
    };
    let rows = tables.iter().flat_map(|table| {
        let (t, alpha) = match table.kind() {
            MomentKind::TimeDependent { t } => (t.to_string(), String::new()),
            MomentKind::Stationary { alpha } => (String::new(), alpha.to_string()),
        };
        table
            .entries()
            .iter()
            .map(move |(a, v)| vec![t.clone(), alpha.clone(), a.order().to_string(), cell(a.counts()), v.to_string()])
    });
    let csv = csv(&["t", "alpha", "order", "a", "value"], rows)?;
    let json = json(&MomentsOut {
        graph: g.label(),
        tables: &tables,
    })?;
    Ok(outcome(json, csv, None))
}

fn estimate(args: &EstimateArgs) -> anyhow::Result<Outcome> {
    let g = graph::resolve(&args.graph)?;
    let a: PartitionVector = args.a.parse()?;
    let seed = Seed::resolve(args.seed);
    let est = estimate_moment(&g, &a, args.alpha, args.samples, seed.value)?;
    let mut out = outcome(
        json(&est)?,
        csv(
            &["graph", "a", "alpha", "samples", "seed", "mean", "std_error"],
            [vec![
                est.target.graph.clone(),
                cell(a.counts()),
                args.alpha.to_string(),
                est.samples.to_string(),
                est.seed.to_string(),
                est.mean.to_string(),
                est.std_error.to_string(),
            ]],
        )?,
        Some(seed),
    );
    if est.outside_unit_interval() {
        out.warnings
            .push(format!("estimate {} lies outside [0, 1]; increase --samples", est.mean));
    }
    Ok(out)
}

/// Splits `--graphs` on commas, gluing a purely numeric token back onto the
/// previous one so that `K3,2` stays a single name.
fn split_graph_list(s: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for tok in s.split(',').map(str::trim) {
        let numeric = !tok.is_empty() && tok.chars().all(|c| c.is_ascii_digit());
        match out.last_mut() {
            Some(prev) if numeric && prev.starts_with('K') => {
                prev.push(',');
                prev.push_str(tok);
            }
            _ => out.push(tok.to_string()),
        }
    }
    out
}

fn select(args: &SelectGraphArgs) -> anyhow::Result<Outcome> {
    let names = split_graph_list(&args.graphs);
    let graphs = names
        .iter()
        .map(|n| graph::resolve(n).with_context(|| format!("candidate `{n}`")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let a: PartitionVector = args.a.parse()?;
    let alpha = parse_rational(&args.alpha)?;
    let (mode, seed) = match args.mode {
        Mode::Exact => (SampleMode::Exact, None),
        Mode::Mc => {
            let seed = Seed::resolve(args.seed);
            (
                SampleMode::MonteCarlo {
                    samples: args.samples,
                    seed: seed.value,
                },
                Some(seed),
            )
        }
    };
    let report = select_graph(&graphs, &a, &alpha, mode)?;
    let mut rows = Vec::new();
    for (i, g) in report.candidates.iter().enumerate() {
        for (j, h) in report.candidates.iter().enumerate() {
            let se = report
                .bayes_factor_std_errors
                .as_ref()
                .map_or(String::new(), |e| e[i][j].to_string());
            rows.push(vec![
                g.graph.clone(),
                h.graph.clone(),
                g.probability.value.to_string(),
                report.bayes_factors[i][j].to_string(),
                se,
            ]);
        }
    }
    let csv = csv(&["graph", "versus", "probability", "bayes_factor", "bayes_factor_std_error"], rows)?;
    #[derive(Serialize)]
    struct Out<'a> {
        #[serde(flatten)]
        report: &'a graphcollide::SelectionReport,
        best: &'a str,
    }
    let json = json(&Out {
        report: &report,
        best: &report.candidates[report.best()].graph,
    })?;
    Ok(outcome(json, csv, seed))
}

fn find_is(args: &FindIsArgs) -> anyhow::Result<Outcome> {
    let g = graph::resolve(&args.graph)?;
    if args.runs == 0 {
        return Err(Usage("--runs must be at least 1".into()).into());
    }
    let seed = Seed::resolve(args.seed);
    let particles = args.particles.unwrap_or(2 * g.vertex_count() as u64);
    let mut cfg = FinderConfig::new(particles, seed.value);
    if let Some(m) = args.threshold {
        cfg = cfg.with_threshold(m);
    }
    let results = find_independent_sets(&g, &cfg, args.runs)?;
    let mut frequencies: BTreeMap<&VertexSet, u64> = BTreeMap::new();
    for r in &results {
        *frequencies.entry(&r.set).or_insert(0) += 1;
    }
    #[derive(Serialize)]
    struct SetCount<'a> {
        set: &'a VertexSet,
        count: u64,
        independent: bool,
    }
    #[derive(Serialize)]
    struct Out<'a> {
        graph: String,
        particles: u64,
        threshold: u64,
        seed: u64,
        converged: usize,
        results: &'a [graphcollide::FinderResult],
        sets: Vec<SetCount<'a>>,
    }
    let sets = frequencies
        .into_iter()
        .map(|(set, count)| {
            Ok(SetCount {
                set,
                count,
                independent: graph::is_independent_set(&g, set)?,
            })
        })
        .collect::<graphcollide::Result<Vec<_>>>()?;
    let json = json(&Out {
        graph: g.label(),
        particles: cfg.particles,
        threshold: cfg.threshold,
        seed: seed.value,
        converged: results.iter().filter(|r| r.converged).count(),
        results: &results,
        sets,
    })?;
    let rows = results.iter().enumerate().map(|(k, r)| {
        vec![
            k.to_string(),
            cell(&r.set.one_based()),
            r.iterations.to_string(),
            r.converged.to_string(),
        ]
    });
    let csv = csv(&["run", "set", "iterations", "converged"], rows)?;
    Ok(outcome(json, csv, Some(seed)))
}

fn simulate_dual(args: &SimulateDualArgs) -> anyhow::Result<Outcome> {
    let g = graph::resolve(&args.graph)?;
    let start: PartitionVector = args.start.parse()?;
    let cfg = ChainConfig::for_alpha(&g, args.alpha)?;
    let horizon = args.t.map_or(Horizon::Absorption, Horizon::Time);
    let seed = Seed::resolve(args.seed);
    let paths = (0..args.paths)
        .into_par_iter()
        .map(|k| simulate_path(&cfg, &start, horizon, seed.value, k))
        .collect::<graphcollide::Result<Vec<_>>>()?;
    #[derive(Serialize)]
    struct Line {
        path: u64,
        step: usize,
        #[serde(flatten)]
        segment: PathSegment,
    }
    let mut jsonl = String::new();
    let mut rows = Vec::new();
    for (k, p) in paths.iter().enumerate() {
        for (step, segment) in p.segments().into_iter().enumerate() {
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            rows.push(vec![
                k.to_string(),
                step.to_string(),
                cell(segment.state.counts()),
                opt(segment.holding_time),
                opt(segment.killing_increment),
            ]);
            jsonl.push_str(&serde_json::to_string(&Line {
                path: k as u64,
                step,
                segment,
            })?);
            jsonl.push('\n');
        }
    }
    let csv = csv(&["path", "step", "state", "holding_time", "killing_increment"], rows)?;
    let mut out = outcome(jsonl, csv, Some(seed));
    out.json_ext = "jsonl";
    Ok(out)
}

fn simulate_sde_cmd(args: &SimulateSdeArgs) -> anyhow::Result<Outcome> {
    let g = graph::resolve(&args.graph)?;
    let policy = match args.boundary {
        Some(Boundary::AbsorbAtZero) => BoundaryPolicy::AbsorbAtZero,
        Some(Boundary::ReflectClip) => BoundaryPolicy::ReflectClip,
        None => SdeConfig::new(&g, args.alpha)?.boundary_policy(),
    };
    let cfg = SdeConfig::with_options(&g, args.alpha, args.dt, policy)?;
    let x0 = start_point(&g, args.x0.as_deref())?;
    let seed = Seed::resolve(args.seed);
    if args.profile {
        let profile = empirical_support_profile(&cfg, &x0, args.t, args.paths, args.eps, seed.value)?;
        let rows = profile.counts.iter().map(|(set, &count)| {
            vec![
                cell(&set.one_based()),
                count.to_string(),
                profile.frequency(set).0.to_string(),
            ]
        });
        let csv = csv(&["support", "count", "frequency"], rows)?;
        let mut out = outcome(json(&profile)?, csv, Some(seed));
        out.warnings.extend(profile.report.warning());
        return Ok(out);
    }
    if args.record_every == 0 {
        return Err(Usage("--record-every must be at least 1".into()).into());
    }
    let paths = (0..args.paths)
        .into_par_iter()
        .map(|k| simulate_sde(&cfg, &x0, args.t, args.record_every, &mut stream_rng(seed.value, k)))
        .collect::<graphcollide::Result<Vec<SdePath>>>()?;
    let mut report = SdeReport::default();
    let mut rows = Vec::new();
    for (k, p) in paths.iter().enumerate() {
        report.merge(&p.report);
        for (t, x) in p.times.iter().zip(&p.points) {
            let mut row = vec![k.to_string(), t.to_string()];
            row.extend(x.coords().iter().map(ToString::to_string));
            rows.push(row);
        }
    }
    let names: Vec<String> = (1..=g.vertex_count()).map(|i| format!("x{i}")).collect();
    let mut header = vec!["path", "time"];
    header.extend(names.iter().map(String::as_str));
    let csv = csv(&header, rows)?;
    #[derive(Serialize)]
    struct Out<'a> {
        graph: String,
        alpha: f64,
        dt: f64,
        boundary_policy: BoundaryPolicy,
        seed: u64,
        report: &'a SdeReport,
        paths: &'a [SdePath],
    }
    let json = json(&Out {
        graph: g.label(),
        alpha: args.alpha,
        dt: args.dt,
        boundary_policy: policy,
        seed: seed.value,
        report: &report,
        paths: &paths,
    })?;
    let mut out = outcome(json, csv, Some(seed));
    out.warnings.extend(report.warning());
    Ok(out)
}

fn simulate_discrete(args: &SimulateDiscreteArgs) -> anyhow::Result<Outcome> {
    let g = graph::resolve(&args.graph)?;
    let n0 = args
        .n0
        .split(',')
        .map(|t| t.trim().parse::<u64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Usage(format!("--n0 `{}` is not a list of particle counts", args.n0)))?;
    let n0 = OccupationVector::new(n0);
    let seed = Seed::resolve(args.seed);
    let trajectory = run_compromise_process(&g, &n0, args.steps, args.record_every, &mut stream_rng(seed.value, 0))?;
    let mut header = vec!["step".to_string(), "time".to_string()];
    header.extend((1..=g.vertex_count()).map(|i| format!("x{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = trajectory.iter().map(|p| {
        let mut row = vec![p.step.to_string(), p.time.to_string()];
        row.extend(p.x.iter().map(ToString::to_string));
        row
    });
    let csv = csv(&header, rows)?;
    #[derive(Serialize)]
    struct Out<'a> {
        graph: String,
        particles: u64,
        seed: u64,
        trajectory: &'a [graphcollide::particles::TrajectoryPoint],
    }
    let json = json(&Out {
        graph: g.label(),
        particles: n0.total(),
        seed: seed.value,
        trajectory: &trajectory,
    })?;
    Ok(outcome(json, csv, Some(seed)))
}

fn spectrum(args: &SpectrumArgs) -> anyhow::Result<Outcome> {
    let g = graph::resolve(&args.graph)?;
    #[derive(Serialize)]
    struct Eigen {
        re: f64,
        im: f64,
    }
    #[derive(Serialize)]
    struct Block {
        states: Vec<PartitionVector>,
        eigenvalues: Vec<Eigen>,
    }
    #[derive(Serialize)]
    struct Out {
        graph: String,
        vertices: usize,
        edges: usize,
        laplacian_spectrum: Vec<f64>,
        algebraic_connectivity: f64,
        block: Option<Block>,
    }
    let block = match &args.block {
        None => None,
        Some(s) => {
            let states = s
                .split(';')
                .map(str::parse)
                .collect::<graphcollide::Result<Vec<PartitionVector>>>()?;
            let eigenvalues = block_eigenvalues(&g, &states)?
                .into_iter()
                .map(|z| Eigen { re: z.re, im: z.im })
                .collect();
            Some(Block { states, eigenvalues })
        }
    };
    let out = Out {
        graph: g.label(),
        vertices: g.vertex_count(),
        edges: g.edge_count(),
        laplacian_spectrum: laplacian_spectrum(&g),
        algebraic_connectivity: algebraic_connectivity(&g),
        block,
    };
    let mut rows: Vec<Vec<String>> = out
        .laplacian_spectrum
        .iter()
        .map(|v| vec!["laplacian".into(), v.to_string(), "0".into()])
        .collect();
    if let Some(b) = &out.block {
        rows.extend(b.eigenvalues.iter().map(|z| vec!["block".into(), z.re.to_string(), z.im.to_string()]));
    }
    let csv = csv(&["matrix", "re", "im"], rows)?;
    Ok(outcome(json(&out)?, csv, None))
}
