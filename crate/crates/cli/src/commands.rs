use std::path::{Path, PathBuf};

use arta_core::corruption::{corrupt_from, NoiseKind, NoiseSpec, DEFAULT_P_GRID, DEFAULT_SNR_GRID};
use arta_core::data::{csv_has_label_column, load_csv, save_csv, write_atomic};
use arta_core::metrics::{evaluate, vus, CurveMode, MetricReport, VusGrid};
use arta_core::scoring::parse_scores_csv;
use arta_core::stability::{check_theorem1, detector_scores, estimate_lipschitz};
use arta_core::synth::{generate, SynthSpec};
use arta_core::{
    make_windows, rng, score_series, ArtaError, Model, Result, Strategy, TimeSeries, TrainConfig,
};

use crate::{
    CorruptArgs, EvalArgs, GridArgs, ScoreArgs, StabilityArgs, SweepArgs, SynthArgs, TrainArgs,
};

fn load_series(path: &Path) -> Result<TimeSeries> {
    let labelled = csv_has_label_column(path)?;
    load_csv(path, labelled)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::parse(&std::fs::read_to_string(p)?)?,
        None => TrainConfig::default(),
    };
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ArtaError::Config(format!("--set expects key=value, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    for name in &a.ablation {
        cfg.ablation.enable(name)?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let ts = load_series(&a.data)?;
    let quiet = a.quiet;
    let (model, report) = Model::train(&cfg, &ts, |e| {
        if !quiet {
            eprintln!(
                "epoch {:>3} L_D {:.6} L_G {} mask_l1 {}",
                e.epoch,
                e.loss_d,
                e.loss_g.map_or("-".into(), |v| format!("{v:.6}")),
                e.mask_l1.map_or("-".into(), |v| format!("{v:.3}")),
            );
        }
    })?;
    model.save(&a.out)?;
    let report_path = a.report.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".report.csv");
        PathBuf::from(p)
    });
    write_text(&report_path, &report.to_csv(cfg.seed))
}

pub fn score(a: ScoreArgs) -> Result<()> {
    let strategy: Strategy = a.strategy.parse()?;
    let model = Model::load(&a.model)?;
    let ts = load_series(&a.data)?;
    let s = score_series(&model, &ts, strategy)?;
    write_text(&a.out, &s.to_csv(ts.labels(), model.config.seed))
}

fn grid(g: &GridArgs) -> Result<VusGrid> {
    VusGrid::uniform(g.thresholds, g.slices, g.lmax)
}

const METRICS: [&str; 5] = ["auc_pr", "auc_roc", "vus_pr", "vus_roc", "f1"];

fn select(report: &MetricReport, wanted: &[String]) -> Result<Vec<(&'static str, f64)>> {
    let all = wanted.iter().any(|m| m == "all");
    for m in wanted {
        if m != "all" && !METRICS.contains(&m.as_str()) {
            return Err(ArtaError::Config(format!(
                "unknown metric {m:?} (all|auc_pr|auc_roc|vus_pr|vus_roc|f1)"
            )));
        }
    }
    Ok(report
        .rows()
        .into_iter()
        .filter(|(name, _)| {
            all || wanted.iter().any(|m| {
                name == m
                    || (m == "f1" && *name == "f1_threshold")
                    || name.strip_suffix("_raw") == Some(m.as_str())
            })
        })
        .collect())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let (scores, labels) = parse_scores_csv(&std::fs::read_to_string(&a.scores)?)?;
    let labels = match (labels, &a.labels_from) {
        (_, Some(p)) => load_csv(p, true)?
            .labels()
            .expect("loaded with labels")
            .to_vec(),
        (Some(l), None) => l,
        (None, None) => {
            return Err(ArtaError::Config(
                "scores have no label column; pass --labels-from".into(),
            ))
        }
    };
    let g = grid(&a.grid)?;
    let report = evaluate(&scores, &labels, &g)?;
    let rows = select(&report, &a.metric)?;
    let mut text = format!("# seed={}\nmetric,value,I,J,l_max\n", a.seed);
    for (name, v) in &rows {
        println!("{name},{v}");
        text.push_str(&format!(
            "{name},{v},{},{},{}\n",
            a.grid.thresholds, a.grid.slices, a.grid.lmax
        ));
    }
    if let Some(out) = &a.out {
        write_text(out, &text)?;
    }
    if let Some(prefix) = &a.surface_prefix {
        for mode in [CurveMode::Pr, CurveMode::Roc] {
            let surface = vus(&scores, &labels, mode, &g)?.surface;
            let (xn, yn) = match mode {
                CurveMode::Pr => ("precision", "recall"),
                CurveMode::Roc => ("fpr", "tpr"),
            };
            let base = prefix.display();
            let header = format!("# seed={}\n", a.seed);
            write_text(
                Path::new(&format!("{base}_{mode}_{xn}.csv")),
                &(header.clone() + &surface.to_csv("other")),
            )?;
            write_text(
                Path::new(&format!("{base}_{mode}_{yn}.csv")),
                &(header + &surface.to_csv("recall")),
            )?;
        }
    }
    Ok(())
}

fn noise_spec(kind: NoiseKind, severity: f64, rho: f64, seed: u64) -> NoiseSpec {
    match kind {
        NoiseKind::Gaussian => NoiseSpec::gaussian(severity, seed),
        NoiseKind::Colored => NoiseSpec::colored(severity, rho, seed),
        NoiseKind::SaltPepper => NoiseSpec::salt_pepper(severity, seed),
    }
}

pub fn corrupt(a: CorruptArgs) -> Result<()> {
    let kind: NoiseKind = a.noise.parse()?;
    let severity = match kind {
        NoiseKind::SaltPepper => {
            a.p.ok_or_else(|| ArtaError::Config("salt_pepper needs --p".into()))?
        }
        _ => a
            .snr
            .ok_or_else(|| ArtaError::Config(format!("{kind} needs --snr")))?,
    };
    let ts = load_series(&a.data)?;
    let out = corrupt_from(&ts, a.start, &noise_spec(kind, severity, a.rho, a.seed))?;
    save_csv(
        &out,
        &a.out,
        Some(&format!("seed={} noise={kind} severity={severity}", a.seed)),
    )
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            match s {
                "inf" | "+inf" => Ok(f64::INFINITY),
                _ => s
                    .parse::<f64>()
                    .map_err(|_| ArtaError::Config(format!("invalid grid value {s:?}"))),
            }
        })
        .collect()
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let kind: NoiseKind = a.noise.parse()?;
    let strategy: Strategy = a.strategy.parse()?;
    let severities = match &a.grid {
        Some(g) => parse_grid(g)?,
        None => match kind {
            NoiseKind::SaltPepper => DEFAULT_P_GRID.to_vec(),
            _ => DEFAULT_SNR_GRID.to_vec(),
        },
    };
    let model = Model::load(&a.model)?;
    let ts = load_csv(&a.data, true)?;
    let labels = ts.labels().expect("loaded with labels").to_vec();
    let split = ts.split_index(model.config.split_fraction);
    let g = grid(&a.metric_grid)?;
    let mut text = format!(
        "# seed={} noise={kind} split={split}\nseverity,vus_pr,auc_roc,noise_seed\n",
        a.seed
    );
    for (i, &sev) in severities.iter().enumerate() {
        let seed = rng::child_seed(a.seed, rng::stream::CORRUPTION, i as u64);
        let noisy = corrupt_from(&ts, split, &noise_spec(kind, sev, a.rho, seed))?;
        let s = score_series(&model, &noisy, strategy)?;
        let r = evaluate(&s.scores, &labels, &g)?;
        eprintln!(
            "{kind} {sev}: vus_pr {:.4} auc_roc {:.4}",
            r.vus_pr, r.auc_roc
        );
        text.push_str(&format!("{sev},{},{},{seed}\n", r.vus_pr, r.auc_roc));
    }
    write_text(&a.out, &text)
}

pub fn stability(a: StabilityArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let generator = model.generator.as_ref().ok_or_else(|| {
        ArtaError::Config("the stability check needs a model trained with a generator".into())
    })?;
    let ts = load_series(&a.data)?;
    let ts = match &model.normalizer {
        Some(n) => n.apply(&ts)?,
        None => ts,
    };
    let t = model.window();
    let all = make_windows(&ts, t, 1)?;
    let n = a.windows.clamp(1, all.len());
    let windows: Vec<&[f32]> = (0..n).map(|i| all[i * all.len() / n].values).collect();
    let l_hat = if a.pairs == 0 {
        0.0
    } else {
        estimate_lipschitz(
            detector_scores(&model.detector, t),
            &windows,
            a.pairs,
            a.eps,
            a.seed,
        )?
        .l_hat
    };
    let report = check_theorem1(
        detector_scores(&model.detector, t),
        generator,
        &windows,
        t,
        a.eps,
        a.trials,
        l_hat,
        model.config.ablation.no_baseline,
        a.seed,
    )?;
    let q = report.ratio_quantiles();
    eprintln!(
        "l_hat {l_hat:.4e} violation_rate {:.4} ratio q50 {:.3} q90 {:.3} q99 {:.3} max {:.3}",
        report.violation_rate(),
        q[0],
        q[1],
        q[2],
        q[3]
    );
    write_text(&a.out, &report.to_csv(a.seed))
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        len: a.len,
        features: a.features,
        anomalies: a.anomalies,
        min_gap: a.min_gap,
        seed: a.seed,
        ..SynthSpec::default()
    };
    let s = generate(&spec)?;
    save_csv(&s.series, &a.out, Some(&format!("seed={}", a.seed)))
}
