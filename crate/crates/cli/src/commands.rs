//! One function per subcommand. Every product lands in the output directory
//! under a fixed name, so later commands find their inputs without flags.

use crate::error::{CliError, Result};
use crate::store::{Loaded, Store};
use hda_core::assim::{CycleMode, CycleRecord};
use hda_core::dataset::{relative_wmse_values, ring_weights, SizeStrategy};
use hda_core::diag::{
    forecast_errors, scorecard, DiagnosticsReport, ForecastErrors, ForecastModel, ScoreKey, SpectrumEntry, SweepKind,
    SweepOutcome, Verification,
};
use hda_core::dynamics::{HybridConfig, Lorenz96, PredictorMode};
use hda_core::experiment::{
    analysis_rmse, container_to_dataset, container_to_nature, container_to_records, cycle_state, dataset_to_container,
    final_third_mean, gen_truth, hybrid_config, initial_background, nature_to_container, network_spectra, offline_data,
    p_sweep, records_to_container, resolution_ladder, run_da, scratch_network, score, size_sweep, train_offline,
    NatureRun, OfflineData,
};
use hda_core::io::{Array, Container};
use hda_core::parallel::Exec;
use hda_core::HdaError;
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt::Write;

pub const TRUTH: &str = "truth.hda";
/// The strong-constraint archive of the offline period.
pub const OFFLINE_CYCLES: &str = "cycles-sc.hda";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Init {
    Pretrained,
    Scratch,
}

pub fn dataset_file(mode: PredictorMode) -> String {
    format!("dataset-{}.hda", mode.as_str())
}

pub fn net_file(mode: PredictorMode) -> String {
    format!("net-{}.fnn", mode.as_str())
}

fn modes() -> [PredictorMode; 2] {
    [PredictorMode::Prediction, PredictorMode::PostProcessing]
}

fn hashed<T>(l: &Loaded<T>) -> (String, String) {
    (l.name.clone(), l.sha256.clone())
}

fn provenance(s: &Store, kind: &str, inputs: &[(String, String)]) -> Value {
    let refs: Vec<(&str, &str)> = inputs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    s.provenance(kind, &refs)
}

fn vector(v: &[f64]) -> Array {
    Array::new(vec![v.len()], v.to_vec())
}

/// The truth run, rejected when it was generated under a different model,
/// observing network or seeds than the current config.
fn load_truth(s: &Store) -> Result<Loaded<NatureRun>> {
    let c = s.read_container(TRUTH)?;
    let current = s.cfg.to_json();
    for key in ["model", "obs", "seeds"] {
        if c.value.header["config"][key] != current[key] || c.value.header["config"]["windows"]["spinup"] != current["windows"]["spinup"] {
            return Err(HdaError::Mismatched(format!("{TRUTH} was generated with a different `{key}` section or spin-up")).into());
        }
    }
    Ok(Loaded {
        value: container_to_nature(&c.value)?,
        name: c.name,
        sha256: c.sha256,
    })
}

fn load_hybrid(s: &Store, name: &str, mode: PredictorMode) -> Result<Loaded<HybridConfig>> {
    let net = s.read_net(name)?;
    Ok(Loaded {
        value: hybrid_config(&s.cfg, net.value, mode)?,
        name: net.name,
        sha256: net.sha256,
    })
}

fn load_dataset(s: &Store, mode: PredictorMode) -> Result<Loaded<OfflineData>> {
    let c = s.read_container(&dataset_file(mode))?;
    Ok(Loaded {
        value: container_to_dataset(&c.value)?,
        name: c.name,
        sha256: c.sha256,
    })
}

/// Cycle archive plus the state it hands on.
struct Cycles {
    records: Vec<CycleRecord>,
    next_window: usize,
    next_background: Vec<f64>,
}

fn load_cycles(s: &Store, name: &str) -> Result<Loaded<Cycles>> {
    let c = s.read_container(name)?;
    let cycles = Cycles {
        records: container_to_records(&c.value)?,
        next_window: c.value.get("next_window")?.data.first().copied().unwrap_or(0.0) as usize,
        next_background: c.value.get("next_background")?.data.clone(),
    };
    Ok(Loaded {
        value: cycles,
        name: c.name,
        sha256: c.sha256,
    })
}

fn cycles_container(
    records: &[CycleRecord],
    header: Value,
    next: (usize, &[f64]),
    initial_params: Option<&[f64]>,
    final_params: Option<&[f64]>,
) -> Container {
    let mut c = records_to_container(records, header);
    c.push("next_window", vector(&[next.0 as f64]));
    c.push("next_background", vector(next.1));
    if let Some(p) = initial_params {
        c.push("initial_params", vector(p));
    }
    if let Some(p) = final_params {
        c.push("final_params", vector(p));
    }
    c
}

pub fn gen_truth_cmd(s: &Store) -> Result<()> {
    let nature = gen_truth(&s.cfg, s.cfg.windows.total())?;
    let mut header = provenance(s, "nature", &[]);
    header["n_windows"] = json!(nature.n_windows());
    let path = s.write_container(TRUTH, nature_to_container(&nature, header))?;
    println!("{} windows of truth -> {}", nature.n_windows(), path.display());
    Ok(())
}

/// Cycles the offline period from the perturbed initial background.
pub fn run_da_cmd(s: &Store, mode: CycleMode, net: Option<&str>) -> Result<()> {
    let cfg = &s.cfg;
    let truth = load_truth(s)?;
    let hybrid = match mode.uses_network() {
        true => Some(load_hybrid(s, net.unwrap_or(&net_file(PredictorMode::Prediction)), PredictorMode::Prediction)?),
        false => None,
    };
    let mut inputs = vec![hashed(&truth)];
    inputs.extend(hybrid.iter().map(hashed));
    let h = hybrid.as_ref().map(|h| &h.value);
    let mut state = cycle_state(0, initial_background(cfg, &truth.value), mode, h);
    let initial_params = state.params.clone();
    let records = run_da(cfg, &truth.value, 0..cfg.windows.offline, mode, h, cfg.cov.p, &mut state)?;
    let mut header = provenance(s, "cycles", &inputs);
    header["mode"] = json!(mode);
    let c = cycles_container(
        &records,
        header,
        (state.window, &state.background),
        initial_params.as_deref(),
        state.params.as_deref(),
    );
    let path = s.write_container(&format!("cycles-{}.hda", mode.as_str()), c)?;
    println!("{} {} windows -> {}", records.len(), mode.as_str(), path.display());
    Ok(())
}

pub fn build_dataset_cmd(s: &Store, mode: PredictorMode) -> Result<()> {
    let cycles = load_cycles(s, OFFLINE_CYCLES)?;
    let data = offline_data(&s.cfg, &cycles.value.records, mode)?;
    let header = provenance(s, "dataset", &[hashed(&cycles)]);
    let path = s.write_container(&dataset_file(mode), dataset_to_container(&data, s.cfg.dataset.windows_per_day, header))?;
    println!(
        "{} pairs: {} train, {} valid, {} test -> {}",
        mode.as_str(),
        data.pairs.train.len(),
        data.pairs.valid.len(),
        data.pairs.test.len(),
        path.display()
    );
    Ok(())
}

pub fn train_offline_cmd(s: &Store, mode: PredictorMode) -> Result<()> {
    let data = load_dataset(s, mode)?;
    let (hybrid, report) = train_offline(&s.cfg, &data.value, &s.cfg.training, Exec::auto())?;
    let valid = score(&s.cfg, &hybrid, &data.value.pairs.valid, Exec::auto())?;
    let path = s.write_net(&net_file(mode), &hybrid.net)?;
    let mut summary = provenance(s, "training", &[hashed(&data)]);
    summary["mode"] = json!(mode);
    summary["valid_relative_wmse"] = json!(valid);
    summary["report"] = json!(report);
    s.write_json(&format!("net-{}.json", mode.as_str()), &summary)?;
    println!(
        "{}: best epoch {} of {}, valid relative wMSE {valid:.4} -> {}",
        mode.as_str(),
        report.best_epoch,
        report.epochs.len(),
        path.display()
    );
    Ok(())
}

/// Relative wMSE on the test split of the zero predictor and both networks.
pub fn eval_offline_cmd(s: &Store) -> Result<()> {
    let mut rows: Vec<(String, f64)> = Vec::new();
    let mut inputs = Vec::new();
    for mode in modes() {
        let data = load_dataset(s, mode)?;
        let hybrid = load_hybrid(s, &net_file(mode), mode)?;
        inputs.push(hashed(&data));
        inputs.push(hashed(&hybrid));
        if rows.is_empty() {
            let targets: Vec<Vec<f64>> = data.value.pairs.test.iter().map(|p| p.target.clone()).collect();
            let zeros = vec![vec![0.0; s.cfg.model.n]; targets.len()];
            rows.push(("zero".into(), relative_wmse_values(&zeros, &targets, &ring_weights(s.cfg.model.n))?));
        }
        rows.push((mode.as_str().into(), score(&s.cfg, &hybrid.value, &data.value.pairs.test, Exec::auto())?));
    }
    let mut csv = String::from("predictor,x\n");
    for (name, v) in &rows {
        writeln!(csv, "{name},{v}").unwrap();
    }
    s.write_text("offline-scores.csv", &csv)?;
    let mut out = provenance(s, "offline-scores", &inputs);
    out["split"] = json!("test");
    out["relative_wmse"] = json!(rows.iter().map(|(n, v)| json!({"predictor": n, "x": v})).collect::<Vec<_>>());
    s.write_json("offline-scores.json", &out)?;
    print!("{csv}");
    Ok(())
}

fn default_online_name(mode: CycleMode, init: Init) -> String {
    match (mode, init) {
        (CycleMode::Sc, _) => "sc",
        (CycleMode::ScFixedNet, Init::Pretrained) => "fixed",
        (CycleMode::ScFixedNet, Init::Scratch) => "fixed-scratch",
        (CycleMode::Nn4dvar, Init::Pretrained) => "nn4dvar",
        (CycleMode::Nn4dvar, Init::Scratch) => "scratch",
    }
    .to_string()
}

/// Cycles the online period from the background left by the offline archive.
/// Network runs also store their starting network next to the archive.
pub fn run_online_cmd(s: &Store, mode: CycleMode, init: Init, name: Option<&str>, net: Option<&str>) -> Result<()> {
    let cfg = &s.cfg;
    let truth = load_truth(s)?;
    let offline = load_cycles(s, OFFLINE_CYCLES)?;
    if offline.value.next_window != cfg.windows.offline {
        return Err(HdaError::Mismatched(format!(
            "{OFFLINE_CYCLES} ends at window {} but the online period starts at {}",
            offline.value.next_window, cfg.windows.offline
        ))
        .into());
    }
    let mut inputs = vec![hashed(&truth), hashed(&offline)];
    let hybrid = match (mode.uses_network(), init) {
        (false, _) => None,
        (true, Init::Pretrained) => {
            let h = load_hybrid(s, net.unwrap_or(&net_file(PredictorMode::Prediction)), PredictorMode::Prediction)?;
            inputs.push(hashed(&h));
            Some(h.value)
        }
        (true, Init::Scratch) => Some(scratch_network(cfg, truth.value.climatology())?),
    };
    let p_std = match init {
        Init::Pretrained => cfg.online.p,
        Init::Scratch => cfg.online.scratch_p,
    };
    let name = name.map_or_else(|| default_online_name(mode, init), str::to_string);
    let first = cfg.windows.offline;
    let mut state = cycle_state(first, offline.value.next_background.clone(), mode, hybrid.as_ref());
    let initial_params = state.params.clone();
    let records = run_da(cfg, &truth.value, first..first + cfg.windows.online, mode, hybrid.as_ref(), p_std, &mut state)?;
    let mut header = provenance(s, "online", &inputs);
    header["mode"] = json!(mode);
    header["init"] = json!(format!("{init:?}").to_lowercase());
    header["p_std"] = json!(p_std);
    let c = cycles_container(
        &records,
        header,
        (state.window, &state.background),
        initial_params.as_deref(),
        state.params.as_deref(),
    );
    let path = s.write_container(&format!("online-{name}.hda"), c)?;
    if let Some(h) = &hybrid {
        s.write_net(&format!("online-{name}.fnn"), &h.net)?;
    }
    let rmse = analysis_rmse(&records, &truth.value);
    if rmse.is_empty() {
        println!("{name}: 0 windows -> {}", path.display());
    } else {
        println!("{name}: final-third analysis RMSE {:.5} -> {}", final_third_mean(&rmse), path.display());
    }
    Ok(())
}

/// An online archive with the network its forecasts run with.
struct Online {
    name: String,
    records: Vec<CycleRecord>,
    hybrid: Option<HybridConfig>,
}

fn load_online(s: &Store, names: &[String]) -> Result<Vec<Online>> {
    let names = match names.is_empty() {
        true => s.list("online-", ".hda")?,
        false => names.to_vec(),
    };
    if names.is_empty() {
        return Err(CliError::Usage(format!("no online archives in {}; run run-online first", s.dir.display())));
    }
    names
        .into_iter()
        .map(|name| {
            let cycles = load_cycles(s, &format!("online-{name}.hda"))?;
            let net = format!("online-{name}.fnn");
            let hybrid = match s.exists(&net) {
                true => Some(load_hybrid(s, &net, PredictorMode::Prediction)?.value),
                false => None,
            };
            Ok(Online {
                name,
                records: cycles.value.records,
                hybrid,
            })
        })
        .collect()
}

fn forecasts(s: &Store, truth: &NatureRun, exp: &Online, verification: Verification) -> Result<ForecastErrors> {
    let physics = Lorenz96 {
        n: s.cfg.model.n,
        forcing: s.cfg.model.forcing,
    };
    let model = ForecastModel {
        dynamics: &physics,
        dt: s.cfg.model.dt,
        steps_per_window: s.cfg.model.steps_per_window,
        hybrid: exp.hybrid.as_ref(),
    };
    Ok(forecast_errors(
        &exp.name,
        &model,
        &exp.records,
        &s.cfg.diagnostics.leads,
        verification,
        &truth.truth_map(),
        Exec::auto(),
    )?)
}

fn key(metric: &str, experiment: &str, split: &str, lead: Option<usize>) -> ScoreKey {
    ScoreKey {
        metric: metric.into(),
        experiment: experiment.into(),
        variable: "x".into(),
        split: split.into(),
        lead,
    }
}

/// Analysis and forecast RMSE of online archives against truth.
pub fn evaluate_cmd(s: &Store, names: &[String]) -> Result<()> {
    let truth = load_truth(s)?;
    let mut report = DiagnosticsReport::default();
    for exp in load_online(s, names)? {
        let rmse = analysis_rmse(&exp.records, &truth.value);
        if !rmse.is_empty() {
            report.insert(key("analysis_rmse", &exp.name, "online", None), Some(rmse.iter().sum::<f64>() / rmse.len() as f64));
            report.insert(key("analysis_rmse", &exp.name, "final-third", None), Some(final_third_mean(&rmse)));
        }
        let fc = forecasts(s, &truth.value, &exp, Verification::Truth)?;
        for (lead, v) in fc.leads.iter().zip(fc.rmse()) {
            report.insert(key("forecast_rmse", &exp.name, "online", Some(*lead)), Some(v));
        }
    }
    for metric in report.metrics() {
        s.write_text(&format!("report-{metric}.csv"), &report.metric_csv(&metric))?;
    }
    let mut out = provenance(s, "report", &[hashed(&truth)]);
    out["report"] = serde_json::to_value(&report).expect("report serializes");
    s.write_json("report.json", &out)?;
    for e in report.scores.iter().filter(|e| e.key.metric == "analysis_rmse" && e.key.split == "final-third") {
        println!("{}: final-third analysis RMSE {:.5}", e.key.experiment, e.value.unwrap_or(f64::NAN));
    }
    Ok(())
}

pub fn scorecard_cmd(s: &Store, reference: &str, names: &[String], verification: Verification) -> Result<()> {
    let truth = load_truth(s)?;
    let mut names = names.to_vec();
    if !names.is_empty() && !names.iter().any(|n| n == reference) {
        names.insert(0, reference.to_string());
    }
    let errors = load_online(s, &names)?
        .iter()
        .map(|e| forecasts(s, &truth.value, e, verification))
        .collect::<Result<Vec<_>>>()?;
    let card = scorecard(&errors, reference, &s.cfg.diagnostics.significance)?;
    s.write_text(&format!("scorecard-{reference}.csv"), &card.to_csv())?;
    let mut out = provenance(s, "scorecard", &[hashed(&truth)]);
    out["scorecard"] = serde_json::to_value(&card).expect("scorecard serializes");
    s.write_json(&format!("scorecard-{reference}.json"), &out)?;
    print!("{}", card.to_csv());
    println!("{} significant cells", card.significant_cells());
    Ok(())
}

/// Sweep outcomes as CSV rows `label,<columns>,error`.
fn sweep_csv<R: Serialize>(outcomes: &[SweepOutcome<R>], columns: &[&str]) -> String {
    let mut csv = format!("label,{},error\n", columns.join(","));
    for o in outcomes {
        let (cells, err) = match &o.result {
            Ok(r) => {
                let v = serde_json::to_value(r).expect("sweep result serializes");
                let cells: Vec<String> = columns
                    .iter()
                    .map(|c| match &v[*c] {
                        Value::Null => String::new(),
                        Value::String(s) => s.clone(),
                        x => x.to_string(),
                    })
                    .collect();
                (cells, String::new())
            }
            Err(e) => (vec![String::new(); columns.len()], e.replace([',', '\n'], ";")),
        };
        writeln!(csv, "{},{},{err}", o.label, cells.join(",")).unwrap();
    }
    csv
}

fn write_sweep<R: Serialize>(s: &Store, kind: SweepKind, inputs: &[(String, String)], outcomes: &[SweepOutcome<R>], columns: &[&str]) -> Result<()> {
    let tag = serde_json::to_value(kind).expect("kind serializes");
    let tag = tag.as_str().expect("kind is a string");
    let csv = sweep_csv(outcomes, columns);
    s.write_text(&format!("sweep-{tag}.csv"), &csv)?;
    let mut out = provenance(s, "sweep", inputs);
    out["sweep"] = json!(kind);
    out["outcomes"] = serde_json::to_value(outcomes).expect("outcomes serialize");
    s.write_json(&format!("sweep-{tag}.json"), &out)?;
    print!("{csv}");
    let failed = outcomes.iter().filter(|o| o.result.is_err()).count();
    if failed > 0 {
        eprintln!("{failed} of {} sweep points failed", outcomes.len());
    }
    Ok(())
}

pub fn sweep_cmd(s: &Store, kind: SweepKind, strategy: SizeStrategy, jobs: usize) -> Result<()> {
    let cfg = &s.cfg;
    match kind {
        SweepKind::DatasetSize => {
            let data = load_dataset(s, PredictorMode::Prediction)?;
            let out = size_sweep(cfg, &data.value, strategy, jobs, Exec::auto());
            write_sweep(s, kind, &[hashed(&data)], &out, &["fraction", "strategy", "train_days", "test_score"])
        }
        SweepKind::Resolution => {
            let data = load_dataset(s, PredictorMode::Prediction)?;
            let out = resolution_ladder(cfg, &data.value, jobs, Exec::auto());
            write_sweep(s, kind, &[hashed(&data)], &out, &["truncation", "test_score"])
        }
        SweepKind::PValue => {
            let truth = load_truth(s)?;
            let offline = load_cycles(s, OFFLINE_CYCLES)?;
            let hybrid = load_hybrid(s, &net_file(PredictorMode::Prediction), PredictorMode::Prediction)?;
            let mut inputs = vec![hashed(&truth), hashed(&offline)];
            inputs.push(hashed(&hybrid));
            let out = p_sweep(cfg, &truth.value, &offline.value.next_background, &hybrid.value, jobs);
            write_sweep(s, kind, &inputs, &out, &["p", "final_third_rmse"])
        }
    }
}

/// Test-split power spectra of every trained network and its relative error.
pub fn spectra_cmd(s: &Store) -> Result<()> {
    let mut trained: Vec<PredictorMode> = modes().into_iter().filter(|m| s.exists(&net_file(*m))).collect();
    if trained.is_empty() {
        trained.push(PredictorMode::Prediction);
    }
    let mut report = DiagnosticsReport::default();
    let mut inputs = Vec::new();
    for mode in trained {
        let data = load_dataset(s, mode)?;
        let hybrid = load_hybrid(s, &net_file(mode), mode)?;
        inputs.push(hashed(&data));
        inputs.push(hashed(&hybrid));
        let sp = network_spectra(&s.cfg, &hybrid.value, &data.value.pairs.test, Exec::auto())?;
        let some = |v: &[f64]| v.iter().map(|&x| Some(x)).collect::<Vec<_>>();
        for (quantity, values) in [
            ("input", some(&sp.input)),
            ("target", some(&sp.target)),
            ("prediction", some(&sp.prediction)),
            ("error", some(&sp.error)),
            ("relative", sp.relative.clone()),
        ] {
            report.push_spectrum(SpectrumEntry {
                experiment: mode.as_str().into(),
                quantity: quantity.into(),
                variable: "x".into(),
                values,
            });
        }
    }
    let mut csv = String::from("experiment,quantity,variable,degree,value\n");
    for e in &report.spectra {
        for (l, v) in e.values.iter().enumerate() {
            let v = v.map(|v| v.to_string()).unwrap_or_default();
            writeln!(csv, "{},{},{},{l},{v}", e.experiment, e.quantity, e.variable).unwrap();
        }
    }
    s.write_text("spectra.csv", &csv)?;
    let mut out = provenance(s, "spectra", &inputs);
    out["split"] = json!("test");
    out["spectra"] = serde_json::to_value(&report.spectra).expect("spectra serialize");
    s.write_json("spectra.json", &out)?;
    for e in report.spectra.iter().filter(|e| e.quantity == "relative") {
        let cells: Vec<String> = e.values.iter().map(|v| v.map_or("-".into(), |v| format!("{v:.3}"))).collect();
        println!("{} relative error by wavenumber: {}", e.experiment, cells.join(" "));
    }
    Ok(())
}
