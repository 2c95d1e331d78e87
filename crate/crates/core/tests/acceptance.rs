//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails. Set `ACCEPTANCE_SKIP_TRAINING=1` to
//! skip the training-based criteria (reported as SKIP).

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stabilizer_core::control::{dcm_tracker, ACTION_DIM, RESIDUAL_DIM};
use stabilizer_core::experiments::eval::{drift, noise_sweep};
use stabilizer_core::experiments::{evaluate, run_drift, run_eval, run_radial, run_train, train, EvalOptions};
use stabilizer_core::lip::{capture_step, com_closed_form, dcm_propagate, ComSegment, DcmPoint, Vec2};
use stabilizer_core::plant::{Termination, OBS_DIM};
use stabilizer_core::ppo::{gae_advantages, lambda_returns, loss_and_grad, reward, LossCoefficients, Minibatch, Trajectory};
use stabilizer_core::symmetry::{augment_batch, mirror_action, mirror_state, msi, Sample};
use stabilizer_core::{Agent, ExperimentConfig, MirrorSpec, PolicyParams, ResidualAction, ScenarioSpec};

const OMEGA: f64 = 4.0435;

struct Verdict {
    pass: Option<bool>,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass: Some(pass), detail }
    }

    fn skipped(why: &str) -> Self {
        Self { pass: None, detail: why.to_owned() }
    }
}

/// Classic fourth-order Runge-Kutta on `c̈ = ω²(c − p(t, c, ċ))`.
fn rk4<P: Fn(f64, Vec2, Vec2) -> Vec2>(c: Vec2, v: Vec2, t: f64, dt: f64, p: &P) -> (Vec2, Vec2) {
    let acc = |t: f64, c: Vec2, v: Vec2| (c - p(t, c, v)) * (OMEGA * OMEGA);
    let (k1c, k1v) = (v, acc(t, c, v));
    let (k2c, k2v) = (v + k1v * (dt / 2.0), acc(t + dt / 2.0, c + k1c * (dt / 2.0), v + k1v * (dt / 2.0)));
    let (k3c, k3v) = (v + k2v * (dt / 2.0), acc(t + dt / 2.0, c + k2c * (dt / 2.0), v + k2v * (dt / 2.0)));
    let (k4c, k4v) = (v + k3v * dt, acc(t + dt, c + k3c * dt, v + k3v * dt));
    (
        c + (k1c + k2c * 2.0 + k3c * 2.0 + k4c) * (dt / 6.0),
        v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0),
    )
}

fn closed_form_fidelity() -> Verdict {
    let start = Instant::now();
    let cases = [
        (Vec2::new(0.0, 0.1), Vec2::new(0.0, 0.0), Vec2::new(0.0, 0.0)),
        (Vec2::new(0.2, -0.1), Vec2::new(0.1, 0.0), Vec2::new(0.3, 0.0)),
        (Vec2::new(0.05, 0.1), Vec2::new(-0.02, 0.03), Vec2::new(0.04, -0.01)),
    ];
    let mut worst: f64 = 0.0;
    for (f, c0, cf) in cases {
        let seg = ComSegment::new(f, c0, cf, 0.0, 0.5, OMEGA).unwrap();
        let (mut c, mut v) = (c0, seg.velocity(0.0).unwrap());
        let dt = 1e-4;
        let mut scale: f64 = (c0 - f).norm().max((cf - f).norm());
        for k in 1..=5000 {
            (c, v) = rk4(c, v, (k - 1) as f64 * dt, dt, &|_, _, _| f);
            let exact = com_closed_form(f, c0, cf, 0.0, 0.5, OMEGA, k as f64 * dt).unwrap();
            scale = scale.max((exact - f).norm());
            worst = worst.max((c - exact).norm() / scale);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(worst < 1e-6 && secs < 1.0, format!("max relative error {worst:.2e} (< 1e-6), {secs:.3} s (< 1 s)"))
}

fn dcm_laws() -> Verdict {
    let p = Vec2::new(0.02, 0.1);
    let (c0, v0) = (Vec2::new(0.0, 0.05), Vec2::new(0.1, -0.2));
    let zeta0 = c0 + v0 / OMEGA;
    let dt = 1e-4;
    let (mut c, mut v) = (c0, v0);
    let mut worst_div: f64 = 0.0;
    for k in 1..=5000 {
        (c, v) = rk4(c, v, 0.0, dt, &|_, _, _| p);
        let t = k as f64 * dt;
        let zeta = c + v / OMEGA;
        let predicted = dcm_propagate(DcmPoint::new(zeta0), p, OMEGA, t).unwrap().zeta;
        let exp = (zeta0 - p) * (OMEGA * t).exp() + p;
        let scale = (exp - p).norm();
        worst_div = worst_div.max((zeta - exp).norm() / scale).max((predicted - exp).norm() / scale);
    }

    // ZMP held on the DCM: the DCM stays put and the COM converges onto it.
    let (mut c, mut v) = (Vec2::new(0.0, 0.0), Vec2::new(0.3, 0.1));
    let zeta = c + v / OMEGA;
    let mut last = (c - zeta).norm();
    let mut monotone = true;
    let mut worst_rate: f64 = 0.0;
    for k in 1..=5000 {
        (c, v) = rk4(c, v, 0.0, dt, &|_, _, _| zeta);
        let gap = (c - zeta).norm();
        monotone &= gap < last;
        last = gap;
        let expected = (Vec2::new(0.0, 0.0) - zeta).norm() * (-OMEGA * k as f64 * dt).exp();
        worst_rate = worst_rate.max((gap - expected).abs() / expected);
    }
    let pass = worst_div < 1e-9 && monotone && worst_rate < 1e-9;
    Verdict::new(
        pass,
        format!("divergence rel. error {worst_div:.2e} (< 1e-9); COM->DCM monotone: {monotone}, rate error {worst_rate:.2e}"),
    )
}

fn capture_fixed_point() -> Verdict {
    let (t_step, stride_y) = (0.5, 0.2);
    let mut foot = Vec2::new(0.0, 0.1);
    let mut side = 1.0;
    // Periodic in-place motion: COM from the midpoint back to the midpoint.
    let seg = ComSegment::new(foot, Vec2::zeros(), Vec2::zeros(), 0.0, t_step, OMEGA).unwrap();
    let (mut c, mut v) = (Vec2::zeros(), seg.velocity(0.0).unwrap());
    let nominal = c + v / OMEGA - foot;
    let dt = 1e-4;
    let n_sub = (t_step / dt).round() as usize;
    let mut offsets = Vec::new();
    for _ in 0..20 {
        let zeta = c + v / OMEGA;
        offsets.push(Vec2::new(zeta.x - foot.x, side * (zeta.y - foot.y)));
        let mut next = foot;
        for k in 0..n_sub {
            if k == n_sub / 2 {
                // Place the next foot from the predicted end-of-step DCM.
                let z = DcmPoint::new(c + v / OMEGA);
                let end = capture_step(foot, z, OMEGA, k as f64 * dt, t_step).unwrap();
                next = end - Vec2::new(nominal.x, -side * nominal.y);
            }
            (c, v) = rk4(c, v, 0.0, dt, &|_, _, _| foot);
        }
        foot = next;
        side = -side;
    }
    let drift = offsets.iter().map(|o| (o - offsets[0]).norm()).fold(0.0, f64::max);
    let stride = (foot.y.abs() - stride_y / 2.0).abs();
    Verdict::new(drift < 1e-6, format!("start-of-step DCM offset spread {drift:.2e} m over 20 steps (< 1e-6); foot y error {stride:.1e}"))
}

fn tracker_contraction() -> Verdict {
    let f = Vec2::new(0.0, 0.1);
    let mut worst: f64 = 0.0;
    for k in [Vec2::new(1.0, 1.0), Vec2::new(3.0, 3.0), Vec2::new(5.0, 2.0)] {
        let zd0 = Vec2::new(0.01, 0.06);
        let e0 = Vec2::new(0.02, -0.015);
        let mut zeta = zd0 + e0;
        let dt = 1e-4;
        for step in 1..=5000 {
            let t0 = (step - 1) as f64 * dt;
            let deriv = |t: f64, z: Vec2| {
                let zd = f + (zd0 - f) * (OMEGA * t).exp();
                let zd_dot = (zd - f) * OMEGA;
                let p = dcm_tracker(DcmPoint::new(z), DcmPoint::new(zd), zd_dot, k, OMEGA).unwrap();
                (z - p) * OMEGA
            };
            let k1 = deriv(t0, zeta);
            let k2 = deriv(t0 + dt / 2.0, zeta + k1 * (dt / 2.0));
            let k3 = deriv(t0 + dt / 2.0, zeta + k2 * (dt / 2.0));
            let k4 = deriv(t0 + dt, zeta + k3 * dt);
            zeta += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            let t = step as f64 * dt;
            let err = zeta - (f + (zd0 - f) * (OMEGA * t).exp());
            for axis in 0..2 {
                let expected = e0[axis] * (-k[axis] * t).exp();
                worst = worst.max((err[axis] - expected).abs() / expected.abs());
            }
        }
    }
    Verdict::new(worst < 0.02, format!("max deviation from e^(-K t) decay {:.3}% (< 2%)", worst * 100.0))
}

fn automorphisms() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = MirrorSpec::default();
    let mut involution = true;
    for layout in [MirrorSpec::default(), MirrorSpec::full_body_layout()] {
        for _ in 0..200 {
            let s: Vec<f64> = (0..layout.obs_dim()).map(|_| rng.random_range(-5.0..5.0)).collect();
            let a: Vec<f64> = (0..layout.act_dim()).map(|_| rng.random_range(-5.0..5.0)).collect();
            involution &= mirror_state(&mirror_state(&s, &layout).unwrap(), &layout).unwrap() == s;
            involution &= mirror_action(&mirror_action(&a, &layout).unwrap(), &layout).unwrap() == a;
        }
    }

    let cfg = ExperimentConfig::default();
    let ctrl = cfg.controller;
    let mut env = cfg.env(ScenarioSpec::l1(), 60.0, 3).unwrap();
    let mut worst: f64 = 0.0;
    let mut reward_exact = true;
    let mut pairs = 0;
    while pairs < 1000 {
        env.reset().unwrap();
        let warmup = rng.random_range(0..150);
        let mut alive = true;
        for _ in 0..warmup {
            let u: Vec<f64> = (0..ACTION_DIM).map(|_| rng.random_range(-1.5..1.5)).collect();
            if env.step(&ResidualAction::from_raw(&u, &ctrl).unwrap()).unwrap().termination != Termination::Alive {
                alive = false;
                break;
            }
        }
        if !alive {
            continue;
        }
        let u: Vec<f64> = (0..ACTION_DIM).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mu = mirror_action(&u, &spec).unwrap();
        let a = ResidualAction::from_raw(&u, &ctrl).unwrap();
        let ma = ResidualAction::from_raw(&mu, &ctrl).unwrap();
        reward_exact &= reward(&a, &ctrl.saturation) == reward(&ma, &ctrl.saturation);

        let mut twin = env.mirrored().unwrap();
        let obs_match = mirror_state(env.observation().as_slice(), &spec).unwrap();
        worst = worst.max(max_diff(&obs_match, twin.observation().as_slice()));
        env.step(&a).unwrap();
        twin.step(&ma).unwrap();
        let expected = mirror_state(env.observation().as_slice(), &spec).unwrap();
        worst = worst.max(max_diff(&expected, twin.observation().as_slice()));
        let (s, m) = (env.state(), twin.state());
        worst = worst.max((s.c.x - m.c.x).abs()).max((s.c.y + m.c.y).abs());
        pairs += 1;
    }

    let mut msi_ok = true;
    for _ in 0..1000 {
        let d: Vec<f64> = (0..RESIDUAL_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e: Vec<f64> = (0..RESIDUAL_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        let neg: Vec<f64> = d.iter().map(|x| -x).collect();
        let m = msi(&d, &e).unwrap();
        msi_ok &= (0.0..=2.0).contains(&m) && msi(&d, &d).unwrap() == 0.0 && msi(&d, &neg).unwrap() == 2.0;
    }
    let pass = involution && worst < 1e-6 && reward_exact && msi_ok;
    Verdict::new(
        pass,
        format!(
            "involution exact: {involution}; transition symmetry max error {worst:.1e} over {pairs} pairs (< 1e-6); reward exact: {reward_exact}; MSI bounds and extremes exact: {msi_ok}"
        ),
    )
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn gradient_error(coef: LossCoefficients, eps: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (od, ad) = (4, 4);
    let mut params = PolicyParams::new(od, ad, &[6, 5], -0.5, &mut rng);
    for v in params.actor.layers.last_mut().unwrap().w.iter_mut() {
        *v *= 30.0;
    }
    let samples: Vec<Sample> = (0..32)
        .map(|_| Sample {
            obs: (0..od).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: (0..ad).map(|_| rng.random_range(-1.0..1.0)).collect(),
            advantage: rng.random_range(-1.0..1.0),
            value_target: rng.random_range(-1.0..1.0),
        })
        .collect();
    let refs: Vec<&Sample> = samples.iter().collect();
    let adv: Vec<f64> = samples.iter().map(|s| s.advantage).collect();
    let logp: Vec<f64> = (0..samples.len()).map(|_| rng.random_range(-4.0..-1.0)).collect();
    let mb = Minibatch::from_samples(&refs, &adv, &logp).unwrap();
    let (_, grad) = loss_and_grad(&params, &mb, eps, coef).unwrap();
    let flat = params.to_flat();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..flat.len() {
        let mut p = flat.clone();
        p[k] += h;
        params.set_flat(&p).unwrap();
        let up = loss_and_grad(&params, &mb, eps, coef).unwrap().0.total;
        p[k] -= 2.0 * h;
        params.set_flat(&p).unwrap();
        let down = loss_and_grad(&params, &mb, eps, coef).unwrap().0.total;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6));
    }
    worst
}

/// Exponentially weighted mixture of n-step returns, written out directly.
fn brute_lambda_return(r: &[f64], v: &[f64], bootstrap: f64, gamma: f64, lambda: f64, t: usize) -> f64 {
    let n_max = r.len() - t;
    let value_at = |k: usize| if k < r.len() { v[k] } else { bootstrap };
    let n_step = |n: usize| {
        let mut g = 0.0;
        for k in 0..n {
            g += gamma.powi(k as i32) * r[t + k];
        }
        g + gamma.powi(n as i32) * value_at(t + n)
    };
    let mut total = 0.0;
    for n in 1..n_max {
        total += (1.0 - lambda) * lambda.powi(n as i32 - 1) * n_step(n);
    }
    total + lambda.powi(n_max as i32 - 1) * n_step(n_max)
}

fn learner_correctness() -> Verdict {
    let policy = gradient_error(LossCoefficients { policy: 1.0, value: 0.0, entropy: 0.0 }, 0.2);
    let value = gradient_error(LossCoefficients { policy: 0.0, value: 1.0, entropy: 0.0 }, 0.2);
    let entropy = gradient_error(LossCoefficients { policy: 0.0, value: 0.0, entropy: 1.0 }, 0.2);
    let grad_worst = policy.max(value).max(entropy);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut gae_worst: f64 = 0.0;
    for trial in 0..200 {
        let n = 10;
        let terminal = trial % 2 == 0;
        let gamma = rng.random_range(0.8..1.0);
        let lambda = rng.random_range(0.0..1.0);
        let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let bootstrap = if terminal { 0.0 } else { rng.random_range(-2.0..2.0) };
        let mut next_values: Vec<f64> = values[1..].to_vec();
        next_values.push(bootstrap);
        let mut done = vec![false; n];
        done[n - 1] = true;
        let traj = Trajectory {
            obs: vec![vec![0.0]; n],
            actions: vec![vec![0.0]; n],
            rewards: rewards.clone(),
            values: values.clone(),
            next_values,
            done,
        };
        let adv = gae_advantages(&traj, gamma, lambda).unwrap();
        let ret = lambda_returns(&traj, gamma, lambda).unwrap();
        for t in 0..n {
            let oracle = brute_lambda_return(&rewards, &values, bootstrap, gamma, lambda, t);
            gae_worst = gae_worst.max((ret[t] - oracle).abs()).max((adv[t] - (oracle - values[t])).abs());
        }
    }

    let spec = MirrorSpec::default();
    let w: Vec<Sample> = (0..8)
        .map(|k| Sample {
            obs: (0..OBS_DIM).map(|i| (k * OBS_DIM + i) as f64 * 0.1 - 3.0).collect(),
            action: (0..ACTION_DIM).map(|i| (k + i) as f64 * 0.05 - 0.2).collect(),
            advantage: k as f64 - 3.5,
            value_target: 10.0 + k as f64,
        })
        .collect();
    let u = |s: &Sample| Sample {
        obs: mirror_state(&s.obs, &spec).unwrap(),
        action: mirror_action(&s.action, &spec).unwrap(),
        advantage: s.advantage,
        value_target: s.value_target,
    };
    let expected: Vec<Sample> = w
        .chunks(2)
        .flat_map(|pair| [pair[0].clone(), pair[1].clone(), u(&pair[1])])
        .collect();
    let layout_exact = augment_batch(&w, 0.5, &spec).unwrap() == expected;

    let pass = grad_worst < 1e-4 && gae_worst < 1e-9 && layout_exact;
    Verdict::new(
        pass,
        format!(
            "gradient rel. error policy {policy:.1e} value {value:.1e} entropy {entropy:.1e} (< 1e-4); GAE/lambda-return error {gae_worst:.1e} (< 1e-9); ratio-1/2 layout exact: {layout_exact}"
        ),
    )
}

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const EVAL_EPISODES: usize = 200;
const EVAL_SEED: u64 = 90_001;

struct Trained {
    seed: u64,
    /// First environment-step count whose deterministic evaluation reaches the bar.
    steps_to_bar: Option<u64>,
    duration: f64,
    msi: f64,
    drift: f64,
    drift_fell: bool,
}

fn train_and_measure(cfg: &ExperimentConfig, bar: f64) -> Trained {
    let started = Instant::now();
    let outcome = train(cfg, |_, _| Ok(())).unwrap();
    let agent = Agent::from_checkpoint(&outcome.checkpoint, cfg.controller).unwrap();
    let opts = EvalOptions { episodes: EVAL_EPISODES, seed: EVAL_SEED, ..EvalOptions::new(cfg) };
    let report = evaluate(Some(&agent), cfg, cfg.scenario, &opts).unwrap();
    let d = drift(Some(&agent), cfg, EVAL_SEED).unwrap();
    let steps_to_bar = outcome.eval_curve.iter().find(|p| p.mean_duration >= bar).map(|p| p.env_steps);
    eprintln!(
        "  ratio {} seed {}: duration {:.2} s, MSI {:.3}, drift {:.2} m{}, bar at {:?} ({:.0} s)",
        cfg.train.symmetry_ratio,
        cfg.train.seed,
        report.mean_duration,
        report.mean_msi,
        d.total_distance,
        if d.fell { " (fell)" } else { "" },
        steps_to_bar,
        started.elapsed().as_secs_f64()
    );
    Trained {
        seed: cfg.train.seed,
        steps_to_bar,
        duration: report.mean_duration,
        msi: report.mean_msi,
        drift: d.total_distance,
        drift_fell: d.fell,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn training_config(ratio: f64, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.train.symmetry_ratio = ratio;
    cfg.train.seed = seed;
    cfg.eval.curve_eval_interval = 20;
    cfg.eval.curve_eval_episodes = 10;
    cfg
}

fn training_criteria() -> [Verdict; 3] {
    let cfg = ExperimentConfig::default();
    let base_opts = EvalOptions { seed: EVAL_SEED, ..EvalOptions::new(&cfg) };
    let baseline = evaluate(None, &cfg, cfg.scenario, &base_opts).unwrap().mean_duration;
    let bar = 10.0 * baseline;
    eprintln!("  baseline mean duration {baseline:.2} s over {} episodes", base_opts.episodes);

    let sym: Vec<Trained> = SEEDS.iter().map(|&s| train_and_measure(&training_config(0.5, s), bar)).collect();
    let asym: Vec<Trained> = SEEDS.iter().map(|&s| train_and_measure(&training_config(0.0, s), bar)).collect();

    let mean = |v: &[Trained]| v.iter().map(|t| t.duration).sum::<f64>() / v.len() as f64;
    let best = |v: &[Trained]| v.iter().map(|t| (t.duration, t.seed)).max_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
    let (sym_mean, asym_mean) = (mean(&sym), mean(&asym));
    let c7 = Verdict::new(
        sym_mean >= bar,
        format!(
            "ratio-1/2 mean {sym_mean:.2} s = {:.1}x baseline {baseline:.2} s (>= 10x); ratio 0 mean {asym_mean:.2} s; best seed {:?}",
            sym_mean / baseline,
            best(&sym)
        ),
    );

    let steps = |v: &[Trained]| median(v.iter().map(|t| t.steps_to_bar.map_or(f64::INFINITY, |s| s as f64)).collect());
    let (sym_steps, asym_steps) = (steps(&sym), steps(&asym));
    let (sym_msi, asym_msi) = (median(sym.iter().map(|t| t.msi).collect()), median(asym.iter().map(|t| t.msi).collect()));
    let (sym_drift, asym_drift) =
        (median(sym.iter().map(|t| t.drift).collect()), median(asym.iter().map(|t| t.drift).collect()));
    let falls = sym.iter().chain(&asym).filter(|t| t.drift_fell).count();
    let c8 = Verdict::new(
        sym_steps < asym_steps && sym_msi < asym_msi && sym_drift < asym_drift,
        format!(
            "median steps to bar {sym_steps:.3e} vs {asym_steps:.3e}; median MSI {sym_msi:.3} vs {asym_msi:.3}; median drift {sym_drift:.2} m vs {asym_drift:.2} m (ratio 1/2 vs 0, lower wins; {falls} drift runs fell)"
        ),
    );

    let mut l2 = training_config(0.5, SEEDS[0]);
    l2.scenario = ScenarioSpec::l2();
    l2.eval.curve_eval_interval = 0;
    l2.eval.noise_levels = vec![1.0, 1.2];
    let outcome = train(&l2, |_, _| Ok(())).unwrap();
    let agent = Agent::from_checkpoint(&outcome.checkpoint, l2.controller).unwrap();
    let rows = noise_sweep(Some(&agent), &l2, l2.scenario, EVAL_SEED).unwrap();
    let (clean, noisy) = (rows[0].1, rows[1].1);
    let c9 = Verdict::new(
        noisy >= 0.5 * clean,
        format!(
            "L2 model: {noisy:.2} s at 20% noise vs {clean:.2} s without ({:.0}%, >= 50%), {} episodes each",
            100.0 * noisy / clean,
            l2.eval.noise_episodes
        ),
    );
    [c7, c8, c9]
}

fn determinism() -> Verdict {
    let mut cfg = ExperimentConfig::default();
    cfg.train.total_steps = 16_384;
    cfg.train.batch_size = 4096;
    cfg.train.symmetry_ratio = 0.5;
    cfg.train.seed = 9;
    cfg.eval.episodes = 20;
    cfg.eval.radial_directions = 4;
    cfg.eval.radial_trials = 2;
    cfg.eval.radial_force_step = 300.0;
    cfg.eval.radial_force_max = 900.0;
    cfg.eval.drift_duration = 30.0;
    cfg.scenario.caps.eval = 60.0;
    let run = |dir: &std::path::Path| {
        let outcome = run_train(&cfg, dir).unwrap();
        let agent = Agent::from_checkpoint(&outcome.checkpoint, cfg.controller).unwrap();
        run_eval(&cfg, Some(&agent), ScenarioSpec::l2(), 4, dir).unwrap();
        run_radial(&cfg, Some(&agent), 4, dir).unwrap();
        run_drift(&cfg, Some(&agent), 4, dir).unwrap();
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(a.path());
    run(b.path());
    let files = ["learning_curve.csv", "eval.csv", "episodes.csv", "radial.csv", "drift.csv", "drift_summary.csv", "policy.ckpt"];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| std::fs::read(a.path().join(f)).unwrap() != std::fs::read(b.path().join(f)).unwrap())
        .collect();
    Verdict::new(differing.is_empty(), format!("{} artifacts compared, differing: {differing:?}", files.len()))
}

fn main() -> ExitCode {
    let skip_training = std::env::var_os("ACCEPTANCE_SKIP_TRAINING").is_some();
    type Check = (&'static str, fn() -> Verdict);
    let quick: [Check; 6] = [
        ("1 closed-form COM fidelity", closed_form_fidelity),
        ("2 DCM divergence and convergence", dcm_laws),
        ("3 capture-step fixed point", capture_fixed_point),
        ("4 tracker contraction", tracker_contraction),
        ("5 automorphism suite", automorphisms),
        ("6 learner correctness", learner_correctness),
    ];
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    for (name, check) in quick {
        let started = Instant::now();
        results.push((name, check()));
        eprintln!("  criterion {name} took {:.1} s", started.elapsed().as_secs_f64());
    }
    let names = ["7 hybrid improvement", "8 symmetry benefits", "9 noise robustness"];
    if skip_training {
        for name in names {
            results.push((name, Verdict::skipped("training criteria skipped by request")));
        }
    } else {
        for (name, v) in names.into_iter().zip(training_criteria()) {
            results.push((name, v));
        }
    }
    let started = Instant::now();
    results.push(("10 determinism", determinism()));
    eprintln!("  criterion 10 determinism took {:.1} s", started.elapsed().as_secs_f64());

    let mut failed = 0;
    for (name, v) in &results {
        let tag = match v.pass {
            Some(true) => "PASS",
            Some(false) => {
                failed += 1;
                "FAIL"
            }
            None => "SKIP",
        };
        println!("{tag} criterion {name}: {}", v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", results.iter().filter(|(_, v)| v.pass == Some(true)).count());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
