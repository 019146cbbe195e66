use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use minlab_core::chaining::{build_admissible_greedy, k0_for, moment_bound, MetricFamily};
use minlab_core::distributions::{sample_batch, BatchHeader, FamilySpec};
use minlab_core::empirical::{lp_profile, sup_abs_values, IndexSet};
use minlab_core::experiments::{BandsConfig, ExperimentConfig, RunSeeds, DESK};
use minlab_core::geometry::{
    covering_bounds, decomposition_requirement, greedy_packing, is_covering, is_separated, orthogonal_decompose,
    MetricOracle,
};
use minlab_core::report::{fmt_f64, to_json_string, Cell, ExperimentReport, Table};
use minlab_core::{Error, Result};

use crate::manifest::{InputDigest, RunManifest, SeedOverrides};
use crate::{ChainOp, GeometryOp, MetricArgs, MetricKind, Output, SeedArgs};

const DEFAULT_SAMPLES: usize = 100_000;
const DEFAULT_CHAIN_SAMPLES: usize = 200_000;

/// Parses a JSON file; errors carry the path and the line/column of the fault.
fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
}

fn read_spec(path: &Path) -> Result<FamilySpec> {
    let spec: FamilySpec = read_json(path)?;
    spec.validate().map_err(|e| match e {
        Error::Validation(msg) => Error::validation(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok(spec)
}

fn overrides(seeds: &SeedArgs) -> SeedOverrides {
    SeedOverrides { seed: seeds.seed, stream: seeds.stream, n: seeds.n }
}

fn run_seeds(seeds: &SeedArgs) -> Result<RunSeeds> {
    let mut s = RunSeeds::default();
    if let Some(root) = seeds.seed {
        s.root = root;
    }
    if let Some(stream) = seeds.stream {
        s.eval_stream = stream;
    }
    s.validate()?;
    Ok(s)
}

fn report_output(report: &ExperimentReport, stem: &str, manifest: RunManifest) -> Output {
    let mut summary = format!("{}: {:?}", report.experiment, report.status);
    if let Some(k) = report.kappa_hat {
        summary.push_str(&format!(", kappa_hat = {}", fmt_f64(k)));
    }
    for (name, ok) in &report.flags {
        summary.push_str(&format!("\n  {name}: {ok}"));
    }
    Output {
        stem: stem.into(),
        files: vec![
            (format!("{stem}.json"), report.to_json().into_bytes()),
            (format!("{stem}.csv"), report.to_csv().into_bytes()),
        ],
        passed: report.passed(),
        summary,
        manifest,
    }
}

pub fn sample(spec_path: &Path, seeds: &SeedArgs, name: &str, argv: Vec<String>, out: &Path) -> Result<Output> {
    let spec = read_spec(spec_path)?;
    let n = seeds.n.ok_or_else(|| Error::validation("sample needs --n"))?;
    DESK.check_n(n)?;
    let seed = run_seeds(seeds)?.eval();
    let batch = sample_batch(&spec, n, seed)?;
    let bytes: Vec<u8> = batch.data.iter().flat_map(|x| x.to_le_bytes()).collect();
    let header = BatchHeader { n, d: spec.dim, spec: spec.clone(), seed, first_row: 0 };
    let (mean, var) = batch.column_moments();
    let mut summary = format!("{} draws of {} (d = {})", n, spec.label(), spec.dim);
    for i in 0..spec.dim.min(8) {
        summary.push_str(&format!("\n  x{i}: mean {:+.4}, variance {:.4}", mean[i], var[i]));
    }
    let manifest =
        RunManifest::new("sample", argv, vec![InputDigest::of(spec_path)?], overrides(seeds), out);
    Ok(Output {
        stem: name.into(),
        files: vec![(format!("{name}.bin"), bytes), (format!("{name}.json"), to_json_string(&header).into_bytes())],
        passed: true,
        summary,
        manifest,
    })
}

/// Reads an experiment config; a config without an `experiment` tag is
/// taken as an SMP verification.
pub fn load_experiment(path: &Path) -> Result<ExperimentConfig> {
    let mut value: Value = read_json(path)?;
    let Some(obj) = value.as_object_mut() else {
        return Err(Error::validation(format!("{}: config must be a JSON object", path.display())));
    };
    obj.entry("experiment").or_insert_with(|| json!("verify_smp"));
    serde_json::from_value(value).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
}

pub fn verify(config_path: &Path, seeds: &SeedArgs, argv: Vec<String>, out: &Path) -> Result<Output> {
    let mut cfg = load_experiment(config_path)?;
    if let Some(root) = seeds.seed {
        cfg.set_root_seed(root);
    }
    if let Some(stream) = seeds.stream {
        cfg.set_eval_stream(stream);
    }
    if let Some(n) = seeds.n {
        cfg.set_n(n);
    }
    let report = cfg.run()?;
    let manifest =
        RunManifest::new("verify", argv, vec![InputDigest::of(config_path)?], overrides(seeds), out);
    Ok(report_output(&report, cfg.name(), manifest))
}

pub fn bands(spec_path: &Path, pgrid: Option<Vec<f64>>, seeds: &SeedArgs, argv: Vec<String>, out: &Path) -> Result<Output> {
    let spec = read_spec(spec_path)?;
    let mut value = json!({ "spec": spec, "seeds": run_seeds(seeds)? });
    if let Some(grid) = pgrid {
        value["p_grid"] = json!(grid);
    }
    if let Some(n) = seeds.n {
        value["n"] = json!(n);
    }
    let cfg: BandsConfig = serde_json::from_value(value)?;
    let report = ExperimentConfig::BandConformance(cfg).run()?;
    let manifest = RunManifest::new("bands", argv, vec![InputDigest::of(spec_path)?], overrides(seeds), out);
    Ok(report_output(&report, "bands", manifest))
}

pub fn chain(op: ChainOp, argv: Vec<String>, out: &Path) -> Result<Output> {
    let ChainOp::Bound { spec: spec_path, set: set_path, p, metric, n_calib, seeds } = op;
    let spec = read_spec(&spec_path)?;
    let set: IndexSet = read_json(&set_path)?;
    if set.dim() != spec.dim {
        return Err(Error::validation(format!("set dim {} differs from family dim {}", set.dim(), spec.dim)));
    }
    DESK.check_dim(spec.dim)?;
    DESK.check_set(set.len())?;
    DESK.check_p(p)?;
    let n = seeds.n.unwrap_or(DEFAULT_CHAIN_SAMPLES);
    DESK.check_n(n)?;
    DESK.check_n(n_calib)?;
    let run = run_seeds(&seeds)?;

    let metrics = match metric {
        MetricKind::Analytic => MetricFamily::analytic(&set, &spec)?,
        MetricKind::Empirical => MetricFamily::empirical(&set, &sample_batch(&spec, n_calib, run.calib())?)?,
        MetricKind::Euclidean => return Err(Error::validation("chain bound needs the analytic or empirical metric")),
    };
    let seq = build_admissible_greedy(&metrics);
    seq.check_invariants()?;
    let at_p = metrics.at(p);
    let bound = moment_bound(p, &seq, &metrics, |i| at_p.norm_of(i).unwrap_or(f64::NAN))?;

    let batch = sample_batch(&spec, n, run.eval())?;
    let est = lp_profile(&sup_abs_values(&batch, &set)?, &[p], &run.estimator(200))?.estimates[0];

    let config = json!({
        "spec": spec, "set": set, "p": p, "metric": format!("{metric:?}").to_lowercase(),
        "n": n, "n_calib": n_calib, "seeds": run,
    });
    let mut report = ExperimentReport::new("chain_bound", &config);
    report.metric("bound", bound.value);
    report.metric("chain_sum", bound.chain_sum);
    report.metric("tail", bound.tail);
    report.metric("k0", f64::from(k0_for(p)));
    report.metric("k1", f64::from(bound.k1));
    report.metric("empirical_moment", est.value);
    report.metric("empirical_moment_stderr", est.stderr);
    if bound.small_set {
        report.note("k0 >= k1: the small-set bound replaced the chaining bound");
    }
    report.check("bound_dominates", est.value <= bound.value + 5.0 * est.stderr);
    let mut table = Table::new(&["k", "size", "radius"]);
    for level in &seq.levels {
        table.push(vec![Cell::Int(i64::from(level.k)), Cell::Int(level.members.len() as i64), level.radius.into()]);
    }
    report.table = Some(table);
    let inputs = vec![InputDigest::of(&spec_path)?, InputDigest::of(&set_path)?];
    let manifest = RunManifest::new("chain bound", argv, inputs, overrides(&seeds), out);
    Ok(report_output(&report, "chain_bound", manifest))
}

struct LoadedMetric {
    set: IndexSet,
    oracle: MetricOracle,
    config: Value,
    inputs: Vec<InputDigest>,
}

fn load_metric(args: &MetricArgs) -> Result<LoadedMetric> {
    let set: IndexSet = read_json(&args.set)?;
    DESK.check_set(set.len())?;
    let mut inputs = vec![InputDigest::of(&args.set)?];
    let mut config = json!({ "set": set, "metric": format!("{:?}", args.metric).to_lowercase() });
    let spec = match (&args.spec, args.metric) {
        (_, MetricKind::Euclidean) => None,
        (Some(path), _) => {
            inputs.push(InputDigest::of(path)?);
            let spec = read_spec(path)?;
            config["spec"] = json!(spec);
            config["p"] = json!(args.p);
            Some(spec)
        }
        (None, _) => return Err(Error::validation("the analytic and empirical metrics need --spec")),
    };
    let oracle = match (spec, args.metric) {
        (Some(spec), MetricKind::Analytic) => MetricOracle::analytic(&set, &spec, args.p)?,
        (Some(spec), MetricKind::Empirical) => {
            DESK.check_p(args.p)?;
            let n = args.seeds.n.unwrap_or(DEFAULT_SAMPLES);
            DESK.check_n(n)?;
            let run = run_seeds(&args.seeds)?;
            config["n"] = json!(n);
            config["seeds"] = json!(run);
            if set.dim() != spec.dim {
                return Err(Error::validation(format!("set dim {} differs from family dim {}", set.dim(), spec.dim)));
            }
            MetricOracle::empirical(&set, &sample_batch(&spec, n, run.eval())?, args.p)?
        }
        _ => MetricOracle::euclidean(&set),
    };
    Ok(LoadedMetric { set, oracle, config, inputs })
}

fn index_table(set: &IndexSet, indices: &[usize]) -> Table {
    let mut table = Table::new(&["index", "label"]);
    for &i in indices {
        table.push(vec![Cell::Int(i as i64), Cell::Text(set.labels()[i].clone())]);
    }
    table
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn geometry(op: GeometryOp, argv: Vec<String>, out: &Path) -> Result<Output> {
    match op {
        GeometryOp::Pack { metric, a } => {
            positive("a", a)?;
            let m = load_metric(&metric)?;
            let picked = greedy_packing(&m.oracle, a);
            let mut config = m.config;
            config["a"] = json!(a);
            let mut report = ExperimentReport::new("geometry_pack", &config);
            report.metric("packing_size", picked.len() as f64);
            report.check("separated", is_separated(&m.oracle, &picked, a));
            report.table = Some(index_table(&m.set, &picked));
            let manifest = RunManifest::new("geometry pack", argv, m.inputs, overrides(&metric.seeds), out);
            Ok(report_output(&report, "geometry_pack", manifest))
        }
        GeometryOp::Cover { metric, eps } => {
            positive("eps", eps)?;
            let m = load_metric(&metric)?;
            let bounds = covering_bounds(&m.oracle, eps);
            let mut config = m.config;
            config["eps"] = json!(eps);
            let mut report = ExperimentReport::new("geometry_cover", &config);
            report.metric("lower", bounds.lower as f64);
            report.metric("upper", bounds.upper as f64);
            report.check("lower_le_upper", bounds.lower <= bounds.upper);
            report.check("centers_cover", is_covering(&m.oracle, &bounds.centers, eps));
            report.table = Some(index_table(&m.set, &bounds.centers));
            let manifest = RunManifest::new("geometry cover", argv, m.inputs, overrides(&metric.seeds), out);
            Ok(report_output(&report, "geometry_cover", manifest))
        }
        GeometryOp::Decompose { set: set_path, eps, n, r, force_precondition } => {
            positive("eps", eps)?;
            let set: IndexSet = read_json(&set_path)?;
            DESK.check_set(set.len())?;
            let r = r.unwrap_or_else(|| set.max_euclidean_norm());
            let dec = orthogonal_decompose(&set, r, eps, n, force_precondition)?;
            let config = json!({ "set": set, "eps": eps, "n": n, "r": r, "force_precondition": force_precondition });
            let mut report = ExperimentReport::new("geometry_decompose", &config);
            report.metric("required_size", decomposition_requirement(eps, n));
            report.metric("pairs", dec.n_achieved as f64);
            report.metric("orthonormality_defect", dec.orthonormality_defect());
            report.flags.insert("guaranteed".into(), dec.guaranteed);
            report.check("complete", dec.is_complete());
            let invariants = dec.check_invariants(&set);
            if let Err(e) = &invariants {
                report.note(e.to_string());
            }
            report.check("invariants_hold", invariants.is_ok());
            let mut out_report = report_output(
                &report,
                "geometry_decompose",
                RunManifest::new("geometry decompose", argv, vec![InputDigest::of(&set_path)?], SeedOverrides::default(), out),
            );
            out_report.files.push(("decomposition.json".into(), to_json_string(&dec).into_bytes()));
            Ok(out_report)
        }
    }
}
