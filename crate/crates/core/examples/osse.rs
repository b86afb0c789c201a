//! Runs the default OSSE in memory and prints the headline numbers: offline
//! test scores, online final-third analysis RMSE and the paired test of
//! NN 4D-Var against the frozen network.
//!
//! `cargo run --release --example osse [config.json]`

use hda_core::assim::CycleMode;
use hda_core::diag::significance;
use hda_core::experiment::*;
use hda_core::parallel::Exec;
use hda_core::HdaError;

fn main() -> hda_core::Result<()> {
    let cfg: ExperimentConfig = match std::env::args().nth(1) {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| HdaError::Config(e.to_string()))?,
        None => ExperimentConfig::default(),
    };
    let exec = Exec::auto();
    let nature = gen_truth(&cfg, cfg.windows.total())?;
    let stage = offline_stage(&cfg, &nature, exec)?;
    for (data, hybrid) in [&stage.prediction, &stage.post_processing] {
        println!("{}: test relative wMSE {:.4}", data.mode.as_str(), score(&cfg, hybrid, &data.pairs.test, exec)?);
    }

    let pred = &stage.prediction.1;
    let start = &stage.online_start;
    let rmse = |mode, hybrid, p| -> hda_core::Result<Vec<f64>> {
        Ok(analysis_rmse(&online_run(&cfg, &nature, start, mode, hybrid, p)?, &nature))
    };
    let sc = rmse(CycleMode::Sc, None, 0.0)?;
    let fixed = rmse(CycleMode::ScFixedNet, Some(pred), 0.0)?;
    let nn = rmse(CycleMode::Nn4dvar, Some(pred), cfg.online.p)?;
    let scratch = rmse(CycleMode::Nn4dvar, Some(&scratch_network(&cfg, nature.climatology())?), cfg.online.scratch_p)?;
    for (name, v) in [("sc", &sc), ("fixed", &fixed), ("nn4dvar", &nn), ("scratch", &scratch)] {
        println!("{name}: final-third analysis RMSE {:.5}", final_third_mean(v));
    }

    let diffs: Vec<f64> = final_third(&nn).iter().zip(final_third(&fixed)).map(|(a, b)| a - b).collect();
    match significance(&diffs, &cfg.diagnostics.significance)? {
        Some(v) => println!(
            "nn4dvar - fixed: mean {:.2e}, p-value {:.3e}, significant {}",
            v.mean, v.pvalue, v.significant
        ),
        None => println!("nn4dvar - fixed: no verdict"),
    }
    Ok(())
}
