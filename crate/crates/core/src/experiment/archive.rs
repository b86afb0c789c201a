use super::{NatureRun, OfflineData};
use crate::dataset::{DatasetHeader, IncrementPair, Split, SplitPairs, SplitSpec};
use crate::assim::{CycleRecord, ObsRecord, OuterTrace, WindowObs};
use crate::error::{HdaError, Result};
use crate::io::{Array, Container};
use serde_json::Value;

/// Observations flattened to rows `(window, step, site, value)`.
fn obs_rows(windows: impl Iterator<Item = (usize, WindowObs)>) -> Array {
    let mut data = Vec::new();
    for (w, o) in windows {
        for r in &o.records {
            for (&s, &v) in r.sites.iter().zip(&r.values) {
                data.extend([w as f64, r.step as f64, s as f64, v]);
            }
        }
    }
    let n = data.len() / 4;
    Array::new(vec![n, 4], data)
}

/// Observations grouped by window; a window's records keep their step order.
fn parse_obs(a: &Array, windows: &[usize]) -> Result<Vec<WindowObs>> {
    let idx: std::collections::BTreeMap<usize, usize> = windows.iter().enumerate().map(|(i, &w)| (w, i)).collect();
    let mut out = vec![WindowObs::default(); windows.len()];
    if a.shape.len() != 2 || (a.shape[0] > 0 && a.shape[1] != 4) {
        return Err(HdaError::Malformed {
            offset: 0,
            reason: "observation rows must have 4 columns".into(),
        });
    }
    for row in a.data.chunks(4) {
        let (w, step, site, v) = (row[0] as usize, row[1] as usize, row[2] as usize, row[3]);
        let i = *idx.get(&w).ok_or_else(|| HdaError::Malformed {
            offset: 0,
            reason: format!("observation for unknown window {w}"),
        })?;
        let recs = &mut out[i].records;
        match recs.last_mut() {
            Some(r) if r.step == step => {
                r.sites.push(site);
                r.values.push(v);
            }
            _ => recs.push(ObsRecord {
                step,
                sites: vec![site],
                values: vec![v],
            }),
        }
    }
    Ok(out)
}

pub fn nature_to_container(nature: &NatureRun, header: Value) -> Container {
    let mut c = Container::new(header);
    let width = nature.states.first().map_or(0, |s| s.len());
    c.push("states", Array::from_rows(&nature.states, width));
    c.push("obs", obs_rows(nature.obs.iter().cloned().enumerate()));
    c.push("final_state", Array::new(vec![nature.final_state.len()], nature.final_state.clone()));
    c
}

pub fn container_to_nature(c: &Container) -> Result<NatureRun> {
    let states = c.get("states")?.rows();
    let n_windows = states.len().saturating_sub(1);
    let windows: Vec<usize> = (0..n_windows).collect();
    Ok(NatureRun {
        obs: parse_obs(c.get("obs")?, &windows)?,
        final_state: c.get("final_state")?.data.clone(),
        states,
    })
}

/// Per-window records as arrays. Traces keep only the outer-loop costs.
pub fn records_to_container(records: &[CycleRecord], header: Value) -> Container {
    let mut c = Container::new(header);
    let n = records.first().map_or(0, |r| r.background.len());
    let rows = |f: &dyn Fn(&CycleRecord) -> Vec<f64>| -> Vec<Vec<f64>> { records.iter().map(f).collect() };
    c.push(
        "window",
        Array::new(vec![records.len()], records.iter().map(|r| r.window as f64).collect()),
    );
    c.push("background", Array::from_rows(&rows(&|r| r.background.clone()), n));
    c.push("analysis", Array::from_rows(&rows(&|r| r.analysis.clone()), n));
    c.push("increment", Array::from_rows(&rows(&|r| r.increment.clone()), n));
    c.push("forcing", Array::from_rows(&rows(&|r| r.forcing.clone()), n));
    if let Some(np) = records.first().and_then(|r| r.params.as_ref()).map(|p| p.len()) {
        c.push("params", Array::from_rows(&rows(&|r| r.params.clone().unwrap_or_default()), np));
    }
    let n_outer = records.first().map_or(0, |r| r.trace.len());
    c.push(
        "cost",
        Array::from_rows(
            &rows(&|r| r.trace.iter().flat_map(|t| [t.cost_before, t.cost_after]).collect()),
            2 * n_outer,
        ),
    );
    c.push("obs", obs_rows(records.iter().map(|r| (r.window, r.obs.clone()))));
    c
}

pub fn container_to_records(c: &Container) -> Result<Vec<CycleRecord>> {
    let windows: Vec<usize> = c.get("window")?.data.iter().map(|&w| w as usize).collect();
    let background = c.get("background")?.rows();
    let analysis = c.get("analysis")?.rows();
    let increment = c.get("increment")?.rows();
    let forcing = c.get("forcing")?.rows();
    let params = c.get("params").ok().map(|a| a.rows());
    let cost = c.get("cost")?.rows();
    let obs = parse_obs(c.get("obs")?, &windows)?;
    let n = windows.len();
    for (name, len) in [
        ("background", background.len()),
        ("analysis", analysis.len()),
        ("increment", increment.len()),
        ("forcing", forcing.len()),
        ("cost", cost.len()),
    ] {
        if len != n {
            return Err(HdaError::Malformed {
                offset: 0,
                reason: format!("{name} has {len} rows for {n} windows"),
            });
        }
    }
    Ok((0..n)
        .map(|i| CycleRecord {
            window: windows[i],
            background: background[i].clone(),
            analysis: analysis[i].clone(),
            increment: increment[i].clone(),
            forcing: forcing[i].clone(),
            obs: obs[i].clone(),
            params: params.as_ref().map(|p| p[i].clone()),
            trace: cost[i]
                .chunks(2)
                .map(|c| OuterTrace {
                    cost_before: c[0],
                    cost_after: c[1],
                    quadratic: Vec::new(),
                    converged: true,
                })
                .collect(),
        })
        .collect())
}

/// Offline dataset as arrays: chronological day labels and, per split, pair
/// windows, inputs and targets. The header gains a `dataset` summary.
pub fn dataset_to_container(data: &OfflineData, windows_per_day: usize, mut header: Value) -> Container {
    let summary = DatasetHeader {
        mode: data.mode,
        first_window: data.first_window,
        windows_per_day,
        n_train: data.pairs.train.len(),
        n_valid: data.pairs.valid.len(),
        n_test: data.pairs.test.len(),
    };
    if let Value::Object(m) = &mut header {
        m.insert("dataset".into(), serde_json::to_value(&summary).expect("summary serializes"));
    }
    let mut c = Container::new(header);
    c.push(
        "labels",
        Array::new(vec![data.spec.labels.len()], data.spec.labels.iter().map(|l| l.tag()).collect()),
    );
    for (name, pairs) in [("train", &data.pairs.train), ("valid", &data.pairs.valid), ("test", &data.pairs.test)] {
        let n = pairs.first().map_or(0, |p| p.input.len());
        c.push(format!("{name}_window"), Array::new(vec![pairs.len()], pairs.iter().map(|p| p.window as f64).collect()));
        c.push(format!("{name}_input"), Array::from_rows(&pairs.iter().map(|p| p.input.clone()).collect::<Vec<_>>(), n));
        c.push(format!("{name}_target"), Array::from_rows(&pairs.iter().map(|p| p.target.clone()).collect::<Vec<_>>(), n));
    }
    c
}

pub fn container_to_dataset(c: &Container) -> Result<OfflineData> {
    let malformed = |reason: String| HdaError::Malformed { offset: 0, reason };
    let summary: DatasetHeader = c
        .header
        .get("dataset")
        .cloned()
        .ok_or_else(|| malformed("missing dataset summary".into()))
        .and_then(|v| serde_json::from_value(v).map_err(|e| malformed(e.to_string())))?;
    let labels = c
        .get("labels")?
        .data
        .iter()
        .map(|&t| Split::from_tag(t).ok_or_else(|| malformed(format!("unknown split tag {t}"))))
        .collect::<Result<Vec<_>>>()?;
    let split = |name: &str| -> Result<Vec<IncrementPair>> {
        let windows = &c.get(&format!("{name}_window"))?.data;
        let inputs = c.get(&format!("{name}_input"))?.rows();
        let targets = c.get(&format!("{name}_target"))?.rows();
        if inputs.len() != windows.len() || targets.len() != windows.len() {
            return Err(malformed(format!("{name} arrays disagree in length")));
        }
        Ok(windows
            .iter()
            .zip(inputs)
            .zip(targets)
            .map(|((&w, input), target)| IncrementPair {
                window: w as usize,
                mode: summary.mode,
                input,
                target,
            })
            .collect())
    };
    Ok(OfflineData {
        mode: summary.mode,
        spec: SplitSpec {
            train_days: labels.iter().filter(|&&l| l == Split::Train).count(),
            labels,
        },
        first_window: summary.first_window,
        pairs: SplitPairs {
            train: split("train")?,
            valid: split("valid")?,
            test: split("test")?,
        },
    })
}
