//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore};

use clmia::baselines::{calibrate_threshold, modified_entropy_formula, stat_modified_entropy, Direction};
use clmia::clmia::{
    cosine_sim, finetune, nt_xent, train_encoder, AttackArch, ContrastiveConfig, FinetuneConfig,
};
use clmia::data::{read_posterior_dump, PosteriorDump, PosteriorRow};
use clmia::experiment::{
    prepare_data, run_ablation, run_experiment, train_attack_encoder, ExperimentConfig, CLMIA,
    ONLY_FC,
};
use clmia::features::build_feature;
use clmia::metrics::{balanced_accuracy, f1, roc};
use clmia::nn::{softmax_cross_entropy, Activation, Gradients, Network, NetworkSpec};
use clmia::seed;
use clmia::target::{build_shadows, TargetModel, ViewMode};

type Check = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Check,
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn desk_config() -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    ExperimentConfig::load(&path).expect("desk config loads")
}

fn random_simplex(rng: &mut impl Rng, classes: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..classes).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

// 1
fn nt_xent_oracle() -> Check {
    fn naive(z: &[Vec<f64>], tau: f64) -> f64 {
        let n2 = z.len();
        let mut total = 0.0;
        for i in 0..n2 {
            let j = if i % 2 == 0 { i + 1 } else { i - 1 };
            let num = (cosine_sim(&z[i], &z[j]).unwrap() / tau).exp();
            let mut den = 0.0;
            for k in 0..n2 {
                if k != i {
                    den += (cosine_sim(&z[i], &z[k]).unwrap() / tau).exp();
                }
            }
            total += -(num / den).ln();
        }
        total / n2 as f64
    }
    let mut rng = seed::rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..=8usize);
        let dim = rng.random_range(1..=8usize);
        let tau = rng.random_range(0.05..1.0);
        let z: Vec<Vec<f64>> = (0..2 * n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let got = nt_xent(&z, tau, true).map_err(err)?.loss;
        worst = worst.max((got - naive(&z, tau)).abs());
    }
    ensure(worst <= 1e-9, format!("max |diff| {worst:e} > 1e-9"))?;
    Ok(format!("50 batches, max |diff| = {worst:.2e}"))
}

fn sample_params(rng: &mut impl Rng, net: &Network, per_layer: usize) -> Vec<(usize, bool, usize)> {
    let mut out = Vec::new();
    for (li, l) in net.layers().iter().enumerate() {
        for _ in 0..per_layer {
            if rng.random_bool(0.8) {
                out.push((li, true, rng.random_range(0..l.weights.len())));
            } else {
                out.push((li, false, rng.random_range(0..l.bias.len())));
            }
        }
    }
    out
}

/// Signs of every ReLU pre-activation; `relu_output` covers the last layer too.
fn relu_pattern(net: &Network, input: &[f64], relu_output: bool) -> Vec<bool> {
    let mut x = input.to_vec();
    let mut pattern = Vec::new();
    let last = net.layers().len() - 1;
    for (li, l) in net.layers().iter().enumerate() {
        let z: Vec<f64> = (0..l.n_out)
            .map(|o| l.bias[o] + (0..l.n_in).map(|i| l.weights[o * l.n_in + i] * x[i]).sum::<f64>())
            .collect();
        if li < last || relu_output {
            pattern.extend(z.iter().map(|v| *v > 0.0));
            x = z.iter().map(|v| v.max(0.0)).collect();
        } else {
            x = z;
        }
    }
    pattern
}

fn nudge(net: &mut Network, (li, is_w, k): (usize, bool, usize), delta: f64) {
    let l = &mut net.layers_mut()[li];
    if is_w {
        l.weights[k] += delta;
    } else {
        l.bias[k] += delta;
    }
}

fn grad_at(g: &Gradients, (li, is_w, k): (usize, bool, usize)) -> f64 {
    if is_w {
        g.layers[li].weights[k]
    } else {
        g.layers[li].bias[k]
    }
}

// 2
fn gradient_soundness() -> Check {
    const H: f64 = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut kinks = 0usize;
    for trial in 0..100u64 {
        let mut rng = seed::rng(1000 + trial);
        let classes = rng.random_range(2..=10usize);
        let pairs = rng.random_range(2..=8usize);
        let tau = rng.random_range(0.05..1.0);
        let views: Vec<Vec<f64>> = (0..2 * pairs)
            .map(|_| build_feature(&random_simplex(&mut rng, classes)).unwrap().into_inner())
            .collect();
        let arch = AttackArch::default();
        let mut sizes = vec![classes + 2];
        sizes.extend(&arch.encoder_hidden);
        let mut enc = Network::new(
            NetworkSpec::mlp(&sizes, Activation::Relu, trial).with_output_activation(Activation::Relu),
        )
        .map_err(err)?;
        let mut proj = Network::new(NetworkSpec::mlp(
            &[enc.output_dim(), arch.projection_dim],
            Activation::Relu,
            trial + 7,
        ))
        .map_err(err)?;

        let loss = |enc: &Network, proj: &Network| -> f64 {
            let z: Vec<Vec<f64>> = views
                .iter()
                .map(|x| proj.predict(&enc.predict(x).unwrap()).unwrap())
                .collect();
            nt_xent(&z, tau, true).unwrap().loss
        };
        let mut ge = Gradients::zeros_like(&enc);
        let mut gp = Gradients::zeros_like(&proj);
        let mut tapes = Vec::new();
        let mut z = Vec::new();
        for x in &views {
            let (h, et) = enc.forward(x, true, None).map_err(err)?;
            let (zk, pt) = proj.forward(&h, true, None).map_err(err)?;
            tapes.push((et, pt));
            z.push(zk);
        }
        let out = nt_xent(&z, tau, true).map_err(err)?;
        for (gz, (et, pt)) in out.grads.iter().zip(&tapes) {
            let (pg, dh) = proj.backward_with_input(pt, gz).map_err(err)?;
            gp.add_assign(&pg);
            ge.add_assign(&enc.backward(et, &dh).map_err(err)?);
        }
        let pattern = |enc: &Network| -> Vec<bool> {
            views.iter().flat_map(|x| relu_pattern(enc, x, true)).collect()
        };
        for p in sample_params(&mut rng, &enc, 8) {
            nudge(&mut enc, p, H);
            let up = loss(&enc, &proj);
            let up_pattern = pattern(&enc);
            nudge(&mut enc, p, -2.0 * H);
            let down = loss(&enc, &proj);
            let down_pattern = pattern(&enc);
            nudge(&mut enc, p, H);
            // Finite differences are meaningless across a ReLU kink.
            if up_pattern != down_pattern {
                kinks += 1;
                continue;
            }
            worst = worst.max(rel_err(grad_at(&ge, p), (up - down) / (2.0 * H)));
            checked += 1;
        }
        for p in sample_params(&mut rng, &proj, 8) {
            nudge(&mut proj, p, H);
            let up = loss(&enc, &proj);
            nudge(&mut proj, p, -2.0 * H);
            let down = loss(&enc, &proj);
            nudge(&mut proj, p, H);
            worst = worst.max(rel_err(grad_at(&gp, p), (up - down) / (2.0 * H)));
            checked += 1;
        }

        // Classification head with cross-entropy, every parameter.
        let hidden: Vec<usize> = if trial % 2 == 0 { vec![] } else { vec![16] };
        let mut hsizes = vec![64];
        hsizes.extend(&hidden);
        hsizes.push(2);
        let mut head = Network::new(NetworkSpec::mlp(&hsizes, Activation::Relu, trial + 13)).map_err(err)?;
        let emb: Vec<(Vec<f64>, usize)> = (0..6)
            .map(|i| ((0..64).map(|_| rng.random_range(0.0..2.0)).collect(), i % 2))
            .collect();
        let head_loss = |head: &Network| -> f64 {
            emb.iter()
                .map(|(x, y)| softmax_cross_entropy(&head.predict(x).unwrap(), *y).unwrap().1)
                .sum::<f64>()
                / emb.len() as f64
        };
        let mut gh = Gradients::zeros_like(&head);
        for (x, y) in &emb {
            let (logits, tape) = head.forward(x, true, None).map_err(err)?;
            let (_, _, g) = softmax_cross_entropy(&logits, *y).map_err(err)?;
            gh.add_assign(&head.backward(&tape, &g).map_err(err)?);
        }
        gh.scale(1.0 / emb.len() as f64);
        let all: Vec<(usize, bool, usize)> = head
            .layers()
            .iter()
            .enumerate()
            .flat_map(|(li, l)| {
                (0..l.weights.len())
                    .map(move |k| (li, true, k))
                    .chain((0..l.bias.len()).map(move |k| (li, false, k)))
            })
            .collect();
        let head_pattern = |head: &Network| -> Vec<bool> {
            emb.iter().flat_map(|(x, _)| relu_pattern(head, x, false)).collect()
        };
        for p in all {
            nudge(&mut head, p, H);
            let up = head_loss(&head);
            let up_pattern = head_pattern(&head);
            nudge(&mut head, p, -2.0 * H);
            let down = head_loss(&head);
            let down_pattern = head_pattern(&head);
            nudge(&mut head, p, H);
            if up_pattern != down_pattern {
                kinks += 1;
                continue;
            }
            worst = worst.max(rel_err(grad_at(&gh, p), (up - down) / (2.0 * H)));
            checked += 1;
        }
    }
    ensure(worst < 1e-4, format!("max relative error {worst:.3e} >= 1e-4"))?;
    ensure(kinks * 100 <= checked, format!("{kinks} kink crossings out of {checked} samples"))?;
    Ok(format!(
        "100 trials, {checked} parameters, max relative error {worst:.2e} ({kinks} samples straddling a ReLU kink skipped)"
    ))
}

fn small_posterior_target(rows: usize, classes: usize, seed_value: u64) -> (Vec<Vec<f64>>, TargetModel) {
    let mut rng = seed::rng(seed_value);
    let inputs = (0..rows).map(|_| random_simplex(&mut rng, classes)).collect();
    (inputs, TargetModel::Precomputed { n_classes: classes })
}

// 3
fn freeze_contract() -> Check {
    let (inputs, target) = small_posterior_target(128, 5, 3);
    let shadows = build_shadows(target, 0.1, 0.1, ViewMode::PosteriorDropout).map_err(err)?;
    let cfg = ContrastiveConfig {
        epochs: 3,
        seed: 3,
        ..ContrastiveConfig::default()
    };
    let arch = AttackArch::default();
    let model = train_encoder(&inputs, &shadows, &arch, &cfg).map_err(err)?;
    let before = model.encoder_fingerprint().ok_or("no encoder")?;
    let params_before: Vec<f64> = model.encoder.as_ref().unwrap().parameters().collect();
    let labeled: Vec<(Vec<f64>, bool)> = inputs.iter().take(60).cloned().zip((0..60).map(|i| i % 2 == 0)).collect();
    let tuned = finetune(model, &labeled, &arch, &FinetuneConfig { epochs: 20, ..FinetuneConfig::default() })
        .map_err(err)?;
    let after = tuned.encoder_fingerprint().ok_or("encoder dropped")?;
    let params_after: Vec<f64> = tuned.encoder.as_ref().unwrap().parameters().collect();
    ensure(before == after, format!("encoder hash changed: {before} -> {after}"))?;
    ensure(
        params_before.iter().map(|v| v.to_bits()).eq(params_after.iter().map(|v| v.to_bits())),
        "encoder parameter bytes changed",
    )?;
    ensure(tuned.projection.is_none(), "projection head kept after fine-tuning")?;
    Ok(format!("encoder sha256 {}... unchanged over 20 fine-tuning epochs", &after[..12]))
}

// 4
fn label_blindness() -> Check {
    let mut cfg = desk_config();
    cfg.target.epochs = 5;
    cfg.attack.epochs = 3;
    let data = prepare_data(&cfg).map_err(err)?;
    // An untrained target is enough: only the data path matters here.
    let net = Network::new(NetworkSpec::mlp(
        &[data.split.target.samples[0].features.len(), 16, cfg_classes(&cfg)],
        Activation::Relu,
        1,
    ))
    .map_err(err)?;
    let target = TargetModel::Network(std::sync::Arc::new(net));
    let a = train_attack_encoder(&cfg, &target, &data).map_err(err)?;
    let mut shuffled = data.clone();
    let bits = &mut shuffled.split.target.membership;
    let mut rng = seed::rng(44);
    for i in (1..bits.len()).rev() {
        bits.swap(i, rng.random_range(0..=i));
    }
    for b in shuffled.split.labeled.iter_mut() {
        b.1 = !b.1;
    }
    ensure(shuffled.split.target.membership != data.split.target.membership, "shuffle was a no-op")?;
    let b = train_attack_encoder(&cfg, &target, &shuffled).map_err(err)?;
    let (ha, hb) = (a.encoder_fingerprint().unwrap(), b.encoder_fingerprint().unwrap());
    ensure(ha == hb, "encoder differs after permuting membership bits")?;
    ensure(a.contrastive_history == b.contrastive_history, "loss history differs")?;
    Ok(format!("permuted D_t membership and flipped D_l bits; encoder sha256 {}... identical", &ha[..12]))
}

fn cfg_classes(cfg: &ExperimentConfig) -> usize {
    match &cfg.dataset {
        clmia::experiment::DatasetConfig::Synthetic { classes, .. } => *classes,
        clmia::experiment::DatasetConfig::Dump { .. } => 0,
    }
}

// 5
fn metric_oracles() -> Check {
    let mut rng = seed::rng(5);
    let mut worst_auc: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=500usize);
        let truth: Vec<bool> = (0..n).map(|i| if i < 2 { i == 0 } else { rng.random_bool(0.5) }).collect();
        let scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 40.0).round() / 40.0).collect();
        let curve = roc(&scores, &truth).map_err(err)?;
        let np = truth.iter().filter(|t| **t).count() as f64;
        let nn = n as f64 - np;
        let mut u = 0.0;
        for i in (0..n).filter(|&i| truth[i]) {
            for j in (0..n).filter(|&j| !truth[j]) {
                u += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
            }
        }
        worst_auc = worst_auc.max((curve.auc - u / (np * nn)).abs());
    }
    ensure(worst_auc <= 1e-9, format!("AUC vs Mann-Whitney {worst_auc:e}"))?;

    for trial in 0..100 {
        let n = rng.random_range(2..=200usize);
        let members: Vec<bool> = (0..n).map(|i| if i < 2 { i == 0 } else { rng.random_bool(0.5) }).collect();
        let scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 30.0).round()).collect();
        for dir in [Direction::AtLeast, Direction::AtMost] {
            let (t, ba) = calibrate_threshold(&scores, &members, dir).map_err(err)?;
            let mut uniq = scores.clone();
            uniq.sort_by(f64::total_cmp);
            uniq.dedup();
            let mut best = (uniq[0], 0.5);
            if uniq.len() > 1 {
                best = (f64::NAN, -1.0);
                for w in uniq.windows(2) {
                    let cand = 0.5 * (w[0] + w[1]);
                    let d: Vec<bool> = scores.iter().map(|&s| dir.decide(s, cand)).collect();
                    let b = balanced_accuracy(&d, &members).map_err(err)?;
                    if b > best.1 {
                        best = (cand, b);
                    }
                }
            }
            ensure(t == best.0 && ba == best.1, format!("calibration trial {trial}: ({t}, {ba}) vs {best:?}"))?;
        }
    }

    let truth: Vec<bool> = (0..1000).map(|i| i % 2 == 0).collect();
    let all = vec![true; 1000];
    let f = f1(&all, &truth).map_err(err)?;
    let ba = balanced_accuracy(&all, &truth).map_err(err)?;
    ensure(f == 2.0 / 3.0, format!("degenerate F1 {f} != 2/3"))?;
    ensure(ba == 0.5, format!("degenerate balanced accuracy {ba} != 0.5"))?;
    Ok(format!(
        "AUC=U max diff {worst_auc:.1e}; calibration = exhaustive scan (200 cases); all-member F1 = {f:.3}, BA = {ba}"
    ))
}

// 6
fn desk_end_to_end() -> Check {
    let cfg = desk_config();
    let dir = tempfile::tempdir().map_err(err)?;
    let out = run_experiment(&cfg, dir.path()).map_err(err)?;
    let profile = out.target_profile.clone().ok_or("no target profile")?;
    let clmia = out.report(CLMIA).ok_or("no clmia report")?.balanced_accuracy;
    let only_fc = out.report(ONLY_FC).ok_or("no only_fc report")?.balanced_accuracy;
    let summary = format!(
        "gap {:.3}, CLMIA BA {clmia:.4}, Only-FC BA {only_fc:.4}",
        profile.gap()
    );
    ensure(profile.gap() >= 0.15, format!("target gap too small: {summary}"))?;
    ensure(clmia >= 0.60, format!("CLMIA below 0.60: {summary}"))?;
    ensure(clmia > only_fc, format!("CLMIA does not beat Only-FC: {summary}"))?;
    Ok(summary)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

// 7
fn labeled_size_trend() -> Check {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut per_seed = Vec::new();
    for s in 1..=5u64 {
        let mut cfg = desk_config();
        cfg.seed = s;
        cfg.ablation.labeled_sizes = Some(vec![200, 400, 600, 800]);
        cfg.ablation.only_fc = false;
        let dir = tempfile::tempdir().map_err(err)?;
        let out = run_ablation(&cfg, dir.path()).map_err(err)?;
        let mut row = Vec::new();
        for r in &out.reports {
            let size: f64 = r.params["labeled_size"].parse().map_err(err)?;
            xs.push(size);
            ys.push(r.balanced_accuracy);
            row.push(format!("{:.3}", r.balanced_accuracy));
        }
        per_seed.push(row.join("/"));
    }
    let rho = spearman(&xs, &ys);
    ensure(rho > 0.0, format!("Spearman {rho:.3} <= 0; per seed {}", per_seed.join(" ")))?;
    Ok(format!("Spearman rho = {rho:.3} over 5 seeds x 4 sizes; BA by size per seed: {}", per_seed.join(" ")))
}

// 8
fn temperature_property() -> Check {
    let mut rng = seed::rng(8);
    let taus = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0];
    let mut tables = 0;
    while tables < 30 {
        let n = rng.random_range(2..=6usize);
        let dim = rng.random_range(3..=8usize);
        let mut z = Vec::new();
        for _ in 0..n {
            let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = a.iter().map(|v| v + rng.random_range(-0.05..0.05)).collect();
            z.push(a);
            z.push(b);
        }
        // Keep only tables where every positive beats every negative.
        let ok = (0..2 * n).all(|a| {
            let pos = cosine_sim(&z[a], &z[a ^ 1]).unwrap();
            (0..2 * n).filter(|&k| k != a && k != a ^ 1).all(|k| cosine_sim(&z[a], &z[k]).unwrap() < pos)
        });
        if !ok {
            continue;
        }
        tables += 1;
        let losses: Vec<Vec<f64>> = taus.iter().map(|&t| nt_xent(&z, t, true).unwrap().per_anchor).collect();
        for w in losses.windows(2) {
            for (lo, hi) in w[0].iter().zip(&w[1]) {
                ensure(lo < hi, "per-anchor loss not increasing in tau")?;
            }
        }
    }

    let mut cfg = desk_config();
    cfg.baselines.enabled = false;
    cfg.ablation.temperatures = vec![0.05, 0.1, 0.5, 1.0];
    let dir = tempfile::tempdir().map_err(err)?;
    let out = run_ablation(&cfg, dir.path()).map_err(err)?;
    ensure(out.reports.len() == 4, format!("{} reports for 4 cells", out.reports.len()))?;
    let seen: Vec<String> = out.reports.iter().map(|r| r.params["temperature"].clone()).collect();
    ensure(seen == ["0.05", "0.1", "0.5", "1"], format!("cells {seen:?}"))?;
    let bas: Vec<String> = out.reports.iter().map(|r| format!("{:.3}", r.balanced_accuracy)).collect();
    Ok(format!(
        "loss increases with tau on 30 tables; grid tau={{0.05,0.1,0.5,1}} gave 4 reports (BA {})",
        bas.join("/")
    ))
}

// 9
fn modified_entropy_monotone() -> Check {
    let mut rng = seed::rng(9);
    let h = 1e-7;
    for point in 0..1000 {
        let classes = rng.random_range(2..=10usize);
        let p = random_simplex(&mut rng, classes);
        if p.iter().any(|v| !(1e-6..=1.0 - 1e-6).contains(v)) {
            continue;
        }
        let y = rng.random_range(0..classes);
        stat_modified_entropy(&p, y).map_err(err)?;
        for i in 0..classes {
            let mut up = p.clone();
            up[i] += h;
            let mut down = p.clone();
            down[i] -= h;
            let d = modified_entropy_formula(&up, y) - modified_entropy_formula(&down, y);
            if i == y {
                ensure(d < 0.0, format!("point {point}: not decreasing in p_y"))?;
            } else {
                ensure(d > 0.0, format!("point {point}: not increasing in p_{i}"))?;
            }
        }
    }
    Ok("1000 simplex points: d/dp_y < 0 and d/dp_i > 0 for every i != y".into())
}

// 10
fn dump_round_trip() -> Check {
    let mut rng = seed::rng(10);
    let classes = 10;
    let mut dump = PosteriorDump::new(classes, true);
    for _ in 0..1000 {
        dump.rows.push(PosteriorRow {
            probs: random_simplex(&mut rng, classes),
            label: rng.random_range(0..classes),
            member: Some(rng.next_u32().is_multiple_of(2)),
        });
    }
    let first = dump.to_text();
    let second = read_posterior_dump(&first).map_err(err)?.to_text();
    ensure(first == second, "write -> read -> write is not byte-identical")?;

    let lines: Vec<&str> = first.lines().collect();
    type Corruption = (usize, fn(&str) -> String);
    let corruptions: [Corruption; 4] = [
        (17, |l| l.replacen(',', ",x", 1)),
        (250, |l| format!("{l},1")),
        (611, |l| l.replacen("0.", "0.5", 1)),
        (998, |l| {
            let mut f: Vec<String> = l.split(',').map(String::from).collect();
            f[10] = "10".into();
            f.join(",")
        }),
    ];
    for (row, corrupt) in corruptions {
        let mut bad: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        bad[row + 1] = corrupt(&bad[row + 1]);
        let text = bad.join("\n");
        match read_posterior_dump(&text) {
            Err(clmia::Error::Format { line, .. }) if line == row + 2 => {}
            other => return Err(format!("row {row}: expected rejection at line {}, got {other:?}", row + 2)),
        }
    }
    Ok("1000 rows byte-identical after write-read-write; 4 malformed rows rejected at their line".into())
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "NT-Xent oracle equivalence", budget: Some(Duration::from_secs(5)), run: nt_xent_oracle },
        Criterion { id: 2, name: "gradient soundness", budget: Some(Duration::from_secs(60)), run: gradient_soundness },
        Criterion { id: 3, name: "freeze contract", budget: None, run: freeze_contract },
        Criterion { id: 4, name: "label-blindness", budget: None, run: label_blindness },
        Criterion { id: 5, name: "metric oracles", budget: None, run: metric_oracles },
        Criterion { id: 6, name: "desk-scale end-to-end", budget: Some(Duration::from_secs(180)), run: desk_end_to_end },
        Criterion { id: 7, name: "labeled-size ablation direction", budget: Some(Duration::from_secs(600)), run: labeled_size_trend },
        Criterion { id: 8, name: "temperature property and grid", budget: None, run: temperature_property },
        Criterion { id: 9, name: "modified-entropy monotonicity", budget: None, run: modified_entropy_monotone },
        Criterion { id: 10, name: "posterior-dump round trip", budget: None, run: dump_round_trip },
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let mut result = (c.run)();
        let took = start.elapsed();
        if let (Ok(msg), Some(budget)) = (&result, c.budget) {
            if took > budget {
                result = Err(format!("{msg}; runtime {took:.1?} exceeds {budget:?}"));
            }
        }
        match result {
            Ok(msg) => println!("PASS [{:>2}] {}: {msg} ({took:.1?})", c.id, c.name),
            Err(msg) => {
                failed += 1;
                println!("FAIL [{:>2}] {}: {msg} ({took:.1?})", c.id, c.name);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
