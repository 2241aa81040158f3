use std::collections::HashMap;
use std::path::{Path, PathBuf};

use stratify::bart::PotentialOutcomeMatrix;
use stratify::data::{Dataset, Schema};
use stratify::metrics::MetricsReport;
use stratify::pipeline::{run_cluster_chain, run_stage1, summarize_chain, PipelineSettings};
use stratify::postprocess::{
    parameter_names, read_labels, ClusterProfileSummary, RepresentativeClustering, SimilarityMatrix,
};
use stratify::profile::{
    read_trace_jsonl, write_cluster_params, write_trace, write_trace_jsonl, ChainOutput, ProfileData, TraceHeader,
};
use stratify::sim::{replicate_data_seed, run_experiment, scenario_by_id, ScenarioConfig};
use stratify::{Error, Result};

use crate::args::{
    ClusterArgs, EvaluateArgs, InputArgs, PipelineArgs, PostprocessArgs, ReportArgs, SimulateArgs, Stage1Args,
};
use crate::manifest::{InputFile, Manifest, MANIFEST_FILE};

pub const POTENTIAL_FILE: &str = "potential_outcomes.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const TRACE_JSONL_FILE: &str = "trace.jsonl";
pub const CLUSTER_PARAMS_FILE: &str = "cluster_params.csv";
pub const SIMILARITY_FILE: &str = "similarity.bin";
pub const SIMILARITY_CSV_FILE: &str = "similarity.csv";
pub const REPRESENTATIVE_FILE: &str = "representative.csv";
pub const SILHOUETTE_FILE: &str = "silhouette.csv";
pub const PROFILES_FILE: &str = "profiles.csv";
pub const SELECTION_FILE: &str = "selection.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_dataset(input: &InputArgs) -> Result<Dataset> {
    let schema = Schema::load(&input.schema)?;
    Dataset::load(&input.data, &schema)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = ScenarioConfig {
        scenario: args.scenario,
        n: args.n,
        sigma_y: args.sigma_y,
        sigma_x: args.sigma_x,
        rho_x: args.rho_x,
        noise_covariates: args.noise_covariates,
        replicates: args.replicates,
        seed: args.fit_flags.seed,
    };
    cfg.validate()?;
    let scenario = scenario_by_id(cfg.scenario)?;
    create_dir(&args.out_dir)?;
    let settings = args.fit_flags.settings();
    let mut manifest = Manifest::new("simulate", cfg.seed, settings.clone());
    manifest.scenario = Some(cfg.clone());
    if args.fit {
        let result = run_experiment(&cfg, &settings)?;
        result.write(&args.out_dir)?;
        manifest.outputs = vec!["replicates.csv".into(), "aggregate.json".into()];
        if let Some(agg) = &result.aggregate {
            println!(
                "scenario {}: ARI {:.3} ({:.3}), homogeneity {:.3}, completeness {:.3}, clusters {:.2} over {} replicates",
                cfg.scenario,
                agg.ari.mean,
                agg.ari.sd,
                agg.homogeneity.mean,
                agg.completeness.mean,
                agg.n_cluster.mean,
                result.rows.len()
            );
        }
        if !result.errors.is_empty() {
            log::warn!("{} replicates failed; see errors.csv", result.errors.len());
        }
    } else if cfg.replicates == 1 {
        scenario
            .generate(&cfg, replicate_data_seed(cfg.seed, 0))?
            .write(&args.out_dir)?;
        manifest.outputs = vec!["data.csv".into(), "schema.toml".into(), "encodings.csv".into(), "truth.csv".into()];
    } else {
        for r in 0..cfg.replicates {
            let dir = format!("rep_{:03}", r + 1);
            scenario
                .generate(&cfg, replicate_data_seed(cfg.seed, r))?
                .write(args.out_dir.join(&dir))?;
            manifest.outputs.push(dir);
        }
    }
    manifest.write(&args.out_dir)
}

pub fn fit_stage1(args: &Stage1Args) -> Result<()> {
    let settings = args.fit_flags.settings();
    settings.validate()?;
    let ds = load_dataset(&args.input)?;
    create_dir(&args.out_dir)?;
    let potential = run_stage1(&ds, &settings, args.fit_flags.seed)?;
    potential.write(args.out_dir.join(POTENTIAL_FILE))?;
    let mut manifest = Manifest::new("fit-stage1", args.fit_flags.seed, settings);
    manifest.inputs = vec![
        InputFile::new("data", &args.input.data)?,
        InputFile::new("schema", &args.input.schema)?,
    ];
    manifest.outputs = vec![POTENTIAL_FILE.into()];
    manifest.write(&args.out_dir)
}

fn trace_header(data: &ProfileData) -> TraceHeader {
    TraceHeader {
        ids: data.ids.clone(),
        parameters: parameter_names(data),
        covariates: data.covariate_names(),
        arms: data.arms(),
    }
}

/// Writes the sampler's trace views and similarity matrix; returns the file names.
fn write_chain_artifacts(
    dir: &Path,
    data: &ProfileData,
    chain: &ChainOutput,
    similarity: &SimilarityMatrix,
    similarity_csv: bool,
    variable_selection: bool,
) -> Result<Vec<String>> {
    write_trace(dir.join(TRACE_FILE), &chain.trace, data)?;
    write_trace_jsonl(dir.join(TRACE_JSONL_FILE), &trace_header(data), &chain.trace)?;
    write_cluster_params(dir.join(CLUSTER_PARAMS_FILE), &chain.trace, data)?;
    similarity.write_binary(dir.join(SIMILARITY_FILE))?;
    let mut files = vec![
        TRACE_FILE.to_string(),
        TRACE_JSONL_FILE.into(),
        CLUSTER_PARAMS_FILE.into(),
        SIMILARITY_FILE.into(),
    ];
    if similarity_csv {
        similarity.write_csv(dir.join(SIMILARITY_CSV_FILE))?;
        files.push(SIMILARITY_CSV_FILE.into());
    }
    if variable_selection {
        write_selection(&dir.join(SELECTION_FILE), &data.covariate_names(), &chain.mean_rho())?;
        files.push(SELECTION_FILE.into());
    }
    log::info!(
        "stage 2: {} retained iterations, alpha acceptance {:.2}",
        chain.trace.len(),
        chain.alpha_acceptance
    );
    Ok(files)
}

fn write_selection(path: &Path, names: &[String], rho: &[f64]) -> Result<()> {
    let mut text = String::from("covariate,mean_rho\n");
    for (n, r) in names.iter().zip(rho) {
        text.push_str(&format!("{n},{r}\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_summary_artifacts(
    dir: &Path,
    ids: &[String],
    rep: &RepresentativeClustering,
    profiles: &ClusterProfileSummary,
) -> Result<Vec<String>> {
    rep.write(dir.join(REPRESENTATIVE_FILE), ids)?;
    profiles.write(dir.join(PROFILES_FILE))?;
    let path = dir.join(SILHOUETTE_FILE);
    let mut text = String::from("k,average_silhouette\n");
    for (k, w) in &rep.candidates {
        text.push_str(&format!("{k},{w}\n"));
    }
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    log::info!("representative clustering: k = {}, average silhouette {:.3}", rep.k, rep.silhouette);
    Ok(vec![REPRESENTATIVE_FILE.into(), PROFILES_FILE.into(), SILHOUETTE_FILE.into()])
}

pub fn cluster(args: &ClusterArgs) -> Result<()> {
    let settings = args.fit_flags.settings();
    settings.validate()?;
    let ds = load_dataset(&args.input)?;
    let potential = PotentialOutcomeMatrix::read(&args.potential)?;
    create_dir(&args.out_dir)?;
    let (data, _, chain) = run_cluster_chain(&ds, &potential, &settings, args.fit_flags.seed)?;
    let similarity = chain.scores.similarity()?;
    let mut manifest = Manifest::new("cluster", args.fit_flags.seed, settings.clone());
    manifest.outputs = write_chain_artifacts(
        &args.out_dir,
        &data,
        &chain,
        &similarity,
        args.similarity_csv,
        settings.stage2.variable_selection,
    )?;
    manifest.similarity_iterations = Some(similarity.iterations);
    manifest.inputs = vec![
        InputFile::new("data", &args.input.data)?,
        InputFile::new("schema", &args.input.schema)?,
        InputFile::new("potential", &args.potential)?,
    ];
    manifest.write(&args.out_dir)
}

pub fn postprocess(args: &PostprocessArgs) -> Result<()> {
    let (header, trace) = read_trace_jsonl(&args.trace)?;
    let similarity = SimilarityMatrix::read_binary(&args.similarity, trace.len() as u64)?;
    if similarity.n() != header.ids.len() {
        return Err(Error::Dimension(format!(
            "similarity matrix covers {} subjects, trace {}",
            similarity.n(),
            header.ids.len()
        )));
    }
    if let Some(k) = args.k_max {
        if k < 2 {
            return Err(Error::Config(format!("k_max must be at least 2, got {k}")));
        }
    }
    create_dir(&args.out_dir)?;
    let (rep, profiles) = summarize_chain(&trace, &similarity, header.parameters.clone(), args.k_max)?;
    write_summary_artifacts(&args.out_dir, &header.ids, &rep, &profiles)?;
    Ok(())
}

/// Reads predicted and true labels and pairs them by subject id.
fn paired_labels(pred_path: &Path, truth_path: &Path) -> Result<(Vec<String>, Vec<String>)> {
    let (pred_ids, pred) = read_labels(pred_path)?;
    let (truth_ids, truth) = read_labels(truth_path)?;
    if pred.len() != truth.len() {
        return Err(Error::Data(format!(
            "{} has {} subjects but {} has {}",
            pred_path.display(),
            pred.len(),
            truth_path.display(),
            truth.len()
        )));
    }
    if pred_ids == truth_ids {
        return Ok((truth, pred));
    }
    let index: HashMap<&str, usize> = truth_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut aligned = Vec::with_capacity(pred.len());
    for id in &pred_ids {
        let &i = index.get(id.as_str()).ok_or_else(|| {
            Error::Data(format!("subject `{id}` of {} is missing from {}", pred_path.display(), truth_path.display()))
        })?;
        aligned.push(truth[i].clone());
    }
    Ok((aligned, pred))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let (truth, pred) = paired_labels(&args.pred, &args.truth)?;
    let report = MetricsReport::compute(&truth, &pred)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(out) = &args.out {
        report.write(out)?;
    }
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let dir = &args.run_dir;
    let manifest_path = dir.join(MANIFEST_FILE);
    if manifest_path.exists() {
        let m = Manifest::load(&manifest_path)?;
        println!("run: {} (seed {})", m.command, m.seed);
        println!(
            "stage 1: {} iterations, {} burn-in, {} trees; stage 2: {} iterations, {} burn-in{}",
            m.settings.stage1.iterations,
            m.settings.stage1.burn_in,
            m.settings.stage1.trees,
            m.settings.stage2.iterations,
            m.settings.stage2.burn_in,
            if m.settings.stage2.variable_selection {
                ", variable selection"
            } else {
                ""
            }
        );
    }
    let (_, labels) = read_labels(dir.join(REPRESENTATIVE_FILE))?;
    let mut sizes: Vec<(String, usize)> = Vec::new();
    for l in &labels {
        match sizes.iter_mut().find(|(k, _)| k == l) {
            Some(entry) => entry.1 += 1,
            None => sizes.push((l.clone(), 1)),
        }
    }
    sizes.sort_by(|a, b| a.0.cmp(&b.0));
    println!("representative clustering: {} clusters over {} subjects", sizes.len(), labels.len());
    let silhouette = dir.join(SILHOUETTE_FILE);
    if silhouette.exists() {
        let text = std::fs::read_to_string(&silhouette).map_err(|e| Error::io(&silhouette, e))?;
        let candidates: Vec<String> = text
            .lines()
            .skip(1)
            .filter_map(|l| l.split_once(','))
            .map(|(k, w)| format!("k={k}: {:.3}", w.parse::<f64>().unwrap_or(f64::NAN)))
            .collect();
        println!("average silhouette width: {}", candidates.join(", "));
    }
    print_profiles(&dir.join(PROFILES_FILE), &sizes)?;
    let metrics = dir.join(METRICS_FILE);
    if metrics.exists() {
        let text = std::fs::read_to_string(&metrics).map_err(|e| Error::io(&metrics, e))?;
        println!("metrics against truth:\n{}", text.trim_end());
    }
    Ok(())
}

/// Prints the posterior median and 90% interval of every parameter by
/// cluster, marking intervals entirely above (+) or below (-) the average
/// over clusters.
fn print_profiles(path: &Path, sizes: &[(String, usize)]) -> Result<()> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    // (cluster, parameter) -> (lo, median, hi, flag)
    let mut cells: Vec<(String, String, [f64; 3], String)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let (cluster, parameter, quantile, value, flag) = (&rec[0], &rec[1], &rec[2], &rec[3], &rec[4]);
        let slot = match quantile {
            "0.05" => 0,
            "0.5" => 1,
            "0.95" => 2,
            _ => continue,
        };
        let value: f64 = value
            .parse()
            .map_err(|_| Error::Data(format!("{}: bad value `{value}`", path.display())))?;
        match cells.iter_mut().find(|c| c.0 == cluster && c.1 == parameter) {
            Some(c) => c.2[slot] = value,
            None => {
                let mut q = [f64::NAN; 3];
                q[slot] = value;
                cells.push((cluster.to_string(), parameter.to_string(), q, flag.to_string()));
            }
        }
    }
    for (cluster, size) in sizes {
        println!("cluster {cluster} ({size} subjects)");
        for (_, parameter, q, flag) in cells.iter().filter(|c| &c.0 == cluster) {
            let mark = match flag.as_str() {
                "above" => "+",
                "below" => "-",
                _ => " ",
            };
            println!("  {mark} {parameter:<24} {:>9.3}  [{:.3}, {:.3}]", q[1], q[0], q[2]);
        }
    }
    Ok(())
}

/// Resolved inputs of a pipeline run.
struct PipelinePlan {
    data: PathBuf,
    schema: PathBuf,
    truth: Option<PathBuf>,
    seed: u64,
    settings: PipelineSettings,
}

fn plan(args: &PipelineArgs) -> Result<PipelinePlan> {
    if let Some(path) = &args.manifest {
        let m = Manifest::load(path)?;
        if m.command != "pipeline" {
            return Err(Error::Config(format!(
                "{} records a `{}` run, not a pipeline run",
                path.display(),
                m.command
            )));
        }
        for f in &m.inputs {
            f.verify()?;
        }
        let required = |role: &str| {
            m.input(role)
                .map(|f| f.path.clone())
                .ok_or_else(|| Error::Config(format!("{} lists no {role} file", path.display())))
        };
        return Ok(PipelinePlan {
            data: required("data")?,
            schema: required("schema")?,
            truth: m.input("truth").map(|f| f.path.clone()),
            seed: m.seed,
            settings: m.settings.clone(),
        });
    }
    Ok(PipelinePlan {
        data: args.data.clone().expect("required by the parser"),
        schema: args.schema.clone().expect("required by the parser"),
        truth: args.truth.clone(),
        seed: args.fit_flags.seed,
        settings: args.fit_flags.settings(),
    })
}

pub fn pipeline(args: &PipelineArgs) -> Result<()> {
    let plan = plan(args)?;
    plan.settings.validate()?;
    let input = InputArgs {
        data: plan.data.clone(),
        schema: plan.schema.clone(),
    };
    let ds = load_dataset(&input)?;
    if let Some(path) = &plan.truth {
        // Fail on an unreadable truth file before the expensive stages.
        read_labels(path)?;
    }
    let dir = &args.out_dir;
    create_dir(dir)?;
    let mut manifest = Manifest::new("pipeline", plan.seed, plan.settings.clone());
    manifest.inputs = vec![InputFile::new("data", &plan.data)?, InputFile::new("schema", &plan.schema)?];
    if let Some(path) = &plan.truth {
        manifest.inputs.push(InputFile::new("truth", path)?);
    }

    let potential = run_stage1(&ds, &plan.settings, plan.seed)?;
    potential.write(dir.join(POTENTIAL_FILE))?;
    manifest.outputs.push(POTENTIAL_FILE.into());

    let (data, _, chain) = run_cluster_chain(&ds, &potential, &plan.settings, plan.seed)?;
    let similarity = chain.scores.similarity()?;
    manifest.similarity_iterations = Some(similarity.iterations);
    manifest.outputs.extend(write_chain_artifacts(
        dir,
        &data,
        &chain,
        &similarity,
        args.similarity_csv,
        plan.settings.stage2.variable_selection,
    )?);
    let (rep, profiles) = summarize_chain(&chain.trace, &similarity, parameter_names(&data), plan.settings.k_max)?;
    manifest.outputs.extend(write_summary_artifacts(dir, &data.ids, &rep, &profiles)?);

    if let Some(path) = &plan.truth {
        let (truth, pred) = paired_labels(&dir.join(REPRESENTATIVE_FILE), path)?;
        let report = MetricsReport::compute(&truth, &pred)?;
        report.write(dir.join(METRICS_FILE))?;
        manifest.outputs.push(METRICS_FILE.into());
        println!(
            "ARI {:.3}, homogeneity {:.3}, completeness {:.3}",
            report.ari, report.homogeneity, report.completeness
        );
    }
    manifest.outputs.push(MANIFEST_FILE.into());
    manifest.write(dir)
}
