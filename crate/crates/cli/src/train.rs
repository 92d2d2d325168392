use std::io::Write;
use std::path::PathBuf;

use serde_json::json;
use wdn_core::controller::{init_policy, PolicyDims, PolicyParams, RuleConfig};
use wdn_core::demand::{region_levels, split_days};
use wdn_core::forecast::ForecastContext;
use wdn_core::hydraulics::EpisodeConfig;
use wdn_core::training::{train, HistoryRow, LossConfig, TrainSetup, ZoConfig};

use crate::common::*;
use crate::{failed, CliError, TrainArgs};

pub const HISTORY_HEADER: &str =
    "epoch,day,loss,pressure,energy_kwh,barrier_max,barrier_min,nonconverged_fraction,grad_norm";

/// Trains a policy with oracle forecasts on the training days. The
/// checkpoint is rewritten after every epoch; with `--epochs 0` it holds
/// the initialization. Returns one row per update.
pub fn cmd_train(args: &TrainArgs) -> Result<Vec<HistoryRow>, CliError> {
    check_window(args.window)?;
    let lr = match args.lr {
        Some(lr) => {
            log::info!("learning rate {lr}");
            lr
        }
        None => {
            let lr = ZoConfig::default_lr(args.window);
            log::info!("learning rate {lr} (default for window {})", args.window);
            lr
        }
    };
    let zo = ZoConfig { num_samples: args.samples, delta: args.delta, epochs: args.epochs, lr, seed: args.seed };
    zo.validate().map_err(CliError::Usage)?;

    let net = load_net(&args.net)?;
    let series = load_demands(&args.demands, &net)?;
    let (train_days, _) = split_days(series.days());
    let days: Vec<usize> = match args.train_days {
        Some(0) => return Err(CliError::Usage("--train-days must be positive".into())),
        Some(n) if n > train_days.len() => {
            return Err(CliError::Usage(format!("--train-days {n} exceeds the {} training days", train_days.len())))
        }
        Some(n) => train_days.take(n).collect(),
        None => train_days.collect(),
    };
    if days.is_empty() {
        return Err(failed("demand series has no training days"));
    }
    let context = ForecastContext::new(region_levels(&series, &net), &[]);
    let setup = TrainSetup {
        net: &net,
        demands: &series,
        days: &days,
        context: &context,
        window: args.window,
        episode: EpisodeConfig::default(),
        rule: RuleConfig::default(),
        loss: LossConfig::default(),
    };

    let mut config = net_config(&args.net);
    config["command"] = "train".into();
    config["demands"] = args.demands.display().to_string().into();
    config["window"] = args.window.into();
    config["zo"] = serde_json::to_value(&zo).map_err(failed)?;
    config["days"] = json!([days[0], days[days.len() - 1] + 1]);
    config["loss"] = serde_json::to_value(setup.loss).map_err(failed)?;

    let save = |params: &PolicyParams, epochs_done: usize| -> Result<(), CliError> {
        let mut c = config.clone();
        c["epochs_done"] = epochs_done.into();
        if let Some(dir) = args.out_checkpoint.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        params.save(&args.out_checkpoint, c).map_err(|e| failed(format!("{}: {e}", args.out_checkpoint.display())))
    };

    let p0 = init_policy(PolicyDims::for_network(&net, args.window), args.seed);
    save(&p0, 0)?;
    let mut save_err = None;
    let outcome = train(&setup, p0, &zo, |epoch, params| {
        if save_err.is_none() {
            save_err = save(params, epoch + 1).err();
        }
        log::info!("epoch {} done", epoch + 1);
    })
    .map_err(failed)?;
    if let Some(e) = save_err {
        return Err(e);
    }

    let history_path = args.history.clone().unwrap_or_else(|| history_path(&args.out_checkpoint));
    let mut out = create(&history_path)?;
    writeln!(out, "# {}", serde_json::to_string(&config).map_err(failed)?)?;
    writeln!(out, "{HISTORY_HEADER}")?;
    for h in &outcome.history {
        let l = &h.loss;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            h.epoch, h.day, l.total, l.pressure, l.energy_kwh, l.barrier_max, l.barrier_min, l.nonconverged_fraction,
            h.grad_norm
        )?;
    }
    out.flush()?;
    Ok(outcome.history)
}

fn history_path(checkpoint: &std::path::Path) -> PathBuf {
    checkpoint.with_extension("history.csv")
}
