use std::path::Path;

use anyhow::{bail, Context, Result};
use fairflip_core::oracle::{rule_from_dual, solve_primal};
use fairflip_core::search::{self, SearchParams};
use fairflip_core::synth::{self, SoftmaxHyper};
use fairflip_core::{
    apply_rule, bias_scores, composite, estimate_priors, evaluate, load_labeled, load_probs,
    write_joint_csv, BiasScores, CriterionSpec, GaussianMixtureSpec, LabeledDataset, LpInstance,
    LpStatus, Method, ModificationRule, Schema,
};
use serde::Serialize;

use crate::render;
use crate::{
    ApplyArgs, Command, CorruptArgs, EvalArgs, FitArgs, FrontierArgs, OracleArgs,
    Plot, PriorSource, ScoreArgs, SearchArgs, SynthArgs, TrainAuxArgs,
};

pub fn run(command: &Command, argv: &[String]) -> Result<()> {
    match command {
        Command::Synth(a) => synth_cmd(a).context("synth")?,
        Command::TrainAux(a) => train_aux(a).context("train-aux")?,
        Command::Score(a) => score(a).context("score")?,
        Command::Fit(a) => fit(a).context("fit")?,
        Command::Apply(a) => apply(a).context("apply")?,
        Command::Eval(a) => eval(a).context("eval")?,
        Command::Frontier(a) => frontier(a).context("frontier")?,
        Command::Oracle(a) => oracle(a).context("oracle")?,
        Command::Corrupt(a) => corrupt(a).context("corrupt")?,
        Command::Render(a) => render_cmd(&a.plot).context("render")?,
    }
    let outputs = outputs(command);
    crate::provenance::write(argv, command, &outputs).context("provenance")
}

fn outputs(command: &Command) -> Vec<&Path> {
    let mut out: Vec<&Path> = Vec::new();
    match command {
        Command::Synth(a) => out.push(&a.out),
        Command::TrainAux(a) => {
            out.extend(a.out.iter().map(|p| p.as_path()));
            out.extend(a.model_out.as_deref());
        }
        Command::Score(a) => out.push(&a.out),
        Command::Fit(a) => out.push(&a.out),
        Command::Apply(a) => out.push(&a.out),
        Command::Eval(a) => out.push(&a.out),
        Command::Frontier(a) => {
            out.push(&a.out);
            out.extend(a.plot.as_deref());
        }
        Command::Oracle(a) => {
            out.push(&a.out);
            out.extend(a.rule_out.as_deref());
        }
        Command::Corrupt(a) => out.push(&a.out),
        Command::Render(a) => match &a.plot {
            Plot::Scatter { out: o, .. } | Plot::Frontier { out: o, .. } => out.push(o),
        },
    }
    out
}

fn load_data(path: &Path, label: &str) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = csv::Reader::from_reader(file)
        .headers()
        .with_context(|| format!("reading header of {}", path.display()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let schema = Schema::infer_with_label(&header, label)?;
    load_labeled(path, Some(&schema)).with_context(|| format!("loading {}", path.display()))
}

fn load_scores(path: &Path) -> Result<BiasScores> {
    BiasScores::read_csv(path).with_context(|| format!("loading scores {}", path.display()))
}

fn load_rule(path: &Path) -> Result<ModificationRule> {
    ModificationRule::read(path).with_context(|| format!("loading rule {}", path.display()))
}

fn check_k(scores: &BiasScores, criterion: &CriterionSpec) -> Result<()> {
    if scores.k() != criterion.k() {
        bail!(
            "scores have {} components but the criterion has {}",
            scores.k(),
            criterion.k()
        );
    }
    Ok(())
}

fn search_params(args: &SearchArgs, n: usize, k: usize) -> Result<(Method, SearchParams)> {
    let method = match args.method {
        Some(m) => m.into(),
        None if k == 1 => Method::Threshold,
        None => Method::Directions,
    };
    let sampled = match method {
        Method::Threshold => false,
        Method::Pairs => args.m < n,
        Method::Directions => k > 2,
    };
    if sampled && args.seed.is_none() {
        bail!("--seed is required for `{method}` on this input (the candidate set is sampled)");
    }
    Ok((
        method,
        SearchParams {
            m: args.m,
            n_dirs: args.n_dirs,
            seed: args.seed.unwrap_or(0),
        },
    ))
}

fn synth_cmd(a: &SynthArgs) -> Result<()> {
    if a.n == 0 {
        bail!("--n must be positive");
    }
    let spec = GaussianMixtureSpec::default().with_total(a.n);
    let ds = synth::sample(&spec, a.seed)?;
    ds.write_csv(&a.out, "y")?;
    println!("wrote {} rows to {}", ds.len(), a.out.display());
    Ok(())
}

fn train_aux(a: &TrainAuxArgs) -> Result<()> {
    let inputs: Vec<&Path> = if a.predict.is_empty() {
        vec![a.train.as_path()]
    } else {
        a.predict.iter().map(|p| p.as_path()).collect()
    };
    if inputs.len() != a.out.len() {
        bail!(
            "{} input file(s) but {} --out path(s); give one --out per --predict",
            inputs.len(),
            a.out.len()
        );
    }
    let train = load_data(&a.train, &a.label)?;
    let hyper = SoftmaxHyper {
        learning_rate: a.lr,
        iterations: a.iterations,
        lambda: a.lambda,
        seed: a.seed,
    };
    let model = synth::fit_cells(&train, &a.attr, hyper)?;
    for (input, out) in inputs.iter().zip(&a.out) {
        let ds = load_data(input, &a.label)?;
        let x = ds
            .features()
            .with_context(|| format!("{} has no feature columns", input.display()))?;
        let joint: Vec<[f64; 4]> = model
            .predict_proba(x)?
            .into_iter()
            .map(|p| [p[0], p[1], p[2], p[3]])
            .collect();
        write_joint_csv(out, &joint)?;
        println!("wrote {} rows to {}", joint.len(), out.display());
    }
    if let Some(path) = &a.model_out {
        std::fs::write(path, model.to_kv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn score(a: &ScoreArgs) -> Result<()> {
    let criterion = a.criterion.spec()?;
    let source = match (a.prior_source, &a.train, &a.val) {
        (Some(PriorSource::Train), Some(p), _) | (None, Some(p), _) => p,
        (Some(PriorSource::Val), _, Some(p)) | (None, None, Some(p)) => p,
        (Some(PriorSource::Train), None, _) => bail!("--prior-source train needs --train"),
        (Some(PriorSource::Val), _, None) => bail!("--prior-source val needs --val"),
        (None, None, None) => bail!("group priors need a labeled file: pass --train or --val"),
    };
    let ds = load_data(source, &a.criterion.label)?;
    let criterion = estimate_priors(&ds, &criterion)?;
    let probs = load_probs(&a.probs, &criterion)?;
    let scores = bias_scores(&probs, &criterion, a.eta_floor)?;
    scores.write_csv(&a.out)?;
    println!("wrote {} scores (K = {}) to {}", scores.len(), scores.k(), a.out.display());
    Ok(())
}

fn fit(a: &FitArgs) -> Result<()> {
    let criterion = a.criterion.spec()?;
    let scores = load_scores(&a.scores)?;
    check_k(&scores, &criterion)?;
    let val = load_data(&a.data, &a.criterion.label)?;
    let (method, params) = search_params(&a.search, val.len(), scores.k())?;
    let rule = search::fit_many(method, &scores, &val, &criterion, &[a.delta], &params)?
        .pop()
        .context("search returned no rule")?;
    rule.write(&a.out)?;
    print!("{}", rule.to_kv());
    if !rule.provenance.feasible {
        eprintln!("warning: no candidate met delta = {}; kept the least-violating rule", a.delta);
    }
    Ok(())
}

fn apply(a: &ApplyArgs) -> Result<()> {
    let scores = load_scores(&a.scores)?;
    let rule = load_rule(&a.rule)?;
    let applied = apply_rule(&rule, &scores)?;
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["yhat", "flip", "prediction"])?;
    for ((y, f), p) in scores.yhat().iter().zip(&applied.flips).zip(&applied.predictions) {
        w.write_record([y.to_string(), u8::from(*f).to_string(), p.to_string()])?;
    }
    w.flush()?;
    println!("flipped {} of {}", applied.flip_count(), scores.len());
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let criterion = a.criterion.spec()?;
    let scores = load_scores(&a.scores)?;
    check_k(&scores, &criterion)?;
    let ds = load_data(&a.data, &a.criterion.label)?;
    let report = match &a.rule {
        Some(path) => evaluate(&load_rule(path)?, &scores, &ds, &criterion)?,
        None => composite(scores.yhat(), &ds, &criterion)?,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&a.out, text).with_context(|| format!("writing {}", a.out.display()))?;
    print!("{}", report.to_kv());
    Ok(())
}

#[derive(Debug, Serialize)]
pub(crate) struct FrontierRow {
    pub delta: f64,
    pub algorithm: String,
    pub feasible: bool,
    pub val_accuracy: f64,
    pub val_cc: f64,
    pub test_accuracy: Option<f64>,
    pub test_cc: Option<f64>,
    pub flip_count: usize,
    pub weights: String,
}

fn frontier(a: &FrontierArgs) -> Result<()> {
    let criterion = a.criterion.spec()?;
    let scores = load_scores(&a.scores)?;
    check_k(&scores, &criterion)?;
    let val = load_data(&a.data, &a.criterion.label)?;
    let test = match (&a.test_scores, &a.test_data) {
        (Some(s), Some(d)) => {
            let s = load_scores(s)?;
            check_k(&s, &criterion)?;
            Some((s, load_data(d, &a.criterion.label)?))
        }
        _ => None,
    };
    let (method, params) = search_params(&a.search, val.len(), scores.k())?;
    let points = search::frontier(
        &scores,
        &val,
        test.as_ref().map(|(s, d)| (s, d)),
        &criterion,
        &a.deltas,
        method,
        &params,
    )?;
    let mut w = csv::Writer::from_path(&a.out)?;
    let mut rows = Vec::with_capacity(points.len());
    for p in &points {
        let weights: Vec<String> = p.rule.weights().iter().map(f64::to_string).collect();
        let row = FrontierRow {
            delta: p.delta,
            algorithm: p.rule.provenance.algorithm.clone(),
            feasible: p.rule.provenance.feasible,
            val_accuracy: p.val_report.accuracy,
            val_cc: p.val_report.cc,
            test_accuracy: p.test_report.as_ref().map(|r| r.accuracy),
            test_cc: p.test_report.as_ref().map(|r| r.cc),
            flip_count: p.val_report.flip_count,
            weights: weights.join(";"),
        };
        println!(
            "delta = {:<6} val_accuracy = {:.4} val_cc = {:.4} feasible = {}",
            row.delta, row.val_accuracy, row.val_cc, row.feasible
        );
        w.serialize(&row)?;
        rows.push(row);
    }
    w.flush()?;
    if let Some(plot) = &a.plot {
        let pts: Vec<render::FrontierPoint> = rows.iter().map(render::FrontierPoint::from).collect();
        std::fs::write(plot, render::frontier_svg(&pts)?)
            .with_context(|| format!("writing {}", plot.display()))?;
    }
    Ok(())
}

fn oracle(a: &OracleArgs) -> Result<()> {
    let criterion = a.criterion.spec()?;
    let scores = load_scores(&a.scores)?;
    check_k(&scores, &criterion)?;
    if !a.delta.is_finite() {
        bail!("the linear program needs a finite delta");
    }
    let val = load_data(&a.data, &a.criterion.label)?;
    let inst = LpInstance::from_scores(&scores, &val, &criterion, a.delta)?;
    let sol = solve_primal(&inst)?;
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["kappa", "flip"])?;
    for (k, f) in sol.kappa.iter().zip(sol.flip_mask()) {
        w.write_record([k.to_string(), u8::from(f).to_string()])?;
    }
    w.flush()?;
    match sol.status {
        LpStatus::Optimal => {
            println!("status = optimal");
            println!("objective = {}", sol.objective);
            println!("fractional = {}", sol.fractional_count());
            println!("flips = {}", sol.flip_mask().iter().filter(|f| **f).count());
        }
        LpStatus::Infeasible => println!("status = infeasible"),
    }
    if let Some(path) = &a.rule_out {
        if sol.status != LpStatus::Optimal {
            bail!("no dual rule: the linear program is infeasible at delta = {}", a.delta);
        }
        let mut rule = rule_from_dual(&sol.dual)?;
        rule.provenance.delta = Some(a.delta);
        rule.write(path)?;
    }
    Ok(())
}

fn corrupt(a: &CorruptArgs) -> Result<()> {
    let criterion = a.criterion.spec()?;
    let probs = load_probs(&a.probs, &criterion)?;
    let noisy = fairflip_core::corrupt(&probs, a.alpha, a.seed)?;
    noisy.write_csv(&a.out)?;
    println!("wrote {} rows to {}", noisy.len(), a.out.display());
    Ok(())
}

fn render_cmd(plot: &Plot) -> Result<()> {
    match plot {
        Plot::Scatter {
            scores,
            data,
            attr,
            rule,
            out,
        } => {
            let scores = load_scores(scores)?;
            if scores.k() != 2 {
                bail!("scatter needs two score components, found {}", scores.k());
            }
            let cells = match data {
                Some(path) => {
                    let ds = load_data(path, "y")?;
                    if ds.len() != scores.len() {
                        bail!("{} has {} rows, scores have {}", path.display(), ds.len(), scores.len());
                    }
                    Some(synth::cell_targets(&ds, attr)?)
                }
                None => None,
            };
            let rule = rule.as_deref().map(load_rule).transpose()?;
            let points: Vec<[f64; 2]> = (0..scores.len()).map(|i| [scores.s(i)[0], scores.s(i)[1]]).collect();
            let svg = render::scatter_svg(&points, cells.as_deref(), rule.as_ref().map(|r| r.weights()))?;
            std::fs::write(out, svg).with_context(|| format!("writing {}", out.display()))?;
        }
        Plot::Frontier { frontier, out } => {
            let pts = render::read_frontier(frontier)?;
            std::fs::write(out, render::frontier_svg(&pts)?)
                .with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(())
}

