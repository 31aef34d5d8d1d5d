//! Acceptance suite: one test per claim, each printing a single PASS/FAIL
//! line (visible with `--nocapture`) and asserting the claim.

use qnetlab::admission;
use qnetlab::balance::{self, ClusterConfig, Regime};
use qnetlab::convex::TargetSet;
use qnetlab::engine::{self, AdversaryRule, MixedAction, PayoffTensor, PlayerRule};
use qnetlab::lindley::{self, ServiceModeModel, UpdateRule};
use qnetlab::network::{self, ArrivalModel, DiscreteDist, Policy, ScheduleSet};
use qnetlab::regret::{self, Adversary, ScalarGame};
use qnetlab::rng::child_rng;
use qnetlab::stats::replicate;

use rand::Rng;

fn report(label: &str, pass: bool, detail: &str) {
    println!(
        "criterion {label}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {label} failed: {detail}");
}

/// Root-mean-square distance to the target at the given rounds, over
/// replications of the realized game.
fn rms_distances(
    tensor: &PayoffTensor,
    target: &TargetSet,
    adversary: &AdversaryRule,
    rounds: usize,
    at: &[usize],
    reps: u64,
    seed: u64,
) -> Vec<f64> {
    let runs: Vec<Vec<f64>> = replicate(reps, seed, |_, mut rng| {
        let trace = engine::run_game(
            tensor,
            target,
            vec![0.0; tensor.dim()],
            &PlayerRule::Blackwell,
            adversary,
            rounds,
            &mut rng,
        )
        .expect("approachable setup");
        at.iter().map(|&t| trace.distances[t - 1]).collect()
    });
    (0..at.len())
        .map(|ci| (runs.iter().map(|d| d[ci] * d[ci]).sum::<f64>() / reps as f64).sqrt())
        .collect()
}

#[test]
fn criterion_01_blackwell_rate() {
    let at = [100usize, 1000, 10_000];
    let reps = 200;

    // Scalar zero-sum game, target = value half-space {x <= 1.5}. The row
    // player minimizes, the column plays its own optimal mixture.
    let matrix = vec![vec![3.0, 0.0], vec![1.0, 2.0]];
    let tensor = PayoffTensor::scalar(&matrix).unwrap();
    let sol = engine::solve_matrix_game(&matrix).unwrap();
    let target = TargetSet::HalfSpace {
        normal: vec![1.0],
        offset: sol.value,
    };
    let adversary = AdversaryRule::Fixed(sol.col.clone());
    let scalar_rms = rms_distances(&tensor, &target, &adversary, 10_000, &at, reps, 101);
    let scalar_worst = at
        .iter()
        .zip(&scalar_rms)
        .map(|(&t, d)| d / (tensor.r_max() * (2.0 / t as f64).sqrt()))
        .fold(0.0f64, f64::max);

    // Crossbar scheduling embedded as a vector game, subcritical arrivals
    // with mean (0.4, 0.4).
    let set = ScheduleSet::monotone_closure(&[vec![1, 0], vec![0, 1]]).unwrap();
    let emb = network::embed_as_game(&set, 1).unwrap();
    assert_eq!(emb.arrivals, vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
    let mix = AdversaryRule::Fixed(MixedAction::new(vec![0.2, 0.4, 0.4]).unwrap());
    let switch_rms = rms_distances(&emb.tensor, &emb.target, &mix, 10_000, &at, reps, 102);
    let switch_worst = at
        .iter()
        .zip(&switch_rms)
        .map(|(&t, d)| d / (emb.tensor.r_max() * (2.0 / t as f64).sqrt()))
        .fold(0.0f64, f64::max);

    let pass = scalar_worst <= 1.05 && switch_worst <= 1.05;
    report(
        "01 blackwell rate",
        pass,
        &format!(
            "worst rms/bound ratio over t in {{100,1000,10000}}: scalar {scalar_worst:.3}, switch {switch_worst:.3}, limit 1.05"
        ),
    );
}

#[test]
fn criterion_02_maxweight_equals_blackwell() {
    let mut rng = child_rng(2025, 0);
    let mut passes = 0;
    let cases = 100;
    for _ in 0..cases {
        let q = rng.random_range(2..=4usize);
        let gens = rng.random_range(1..=3usize);
        let mut raw: Vec<Vec<u64>> = (0..gens)
            .map(|_| (0..q).map(|_| u64::from(rng.random::<bool>())).collect())
            .collect();
        // Every queue needs some schedule that serves it.
        for j in 0..q {
            if raw.iter().all(|v| v[j] == 0) {
                let g = rng.random_range(0..gens);
                raw[g][j] = 1;
            }
        }
        let set = ScheduleSet::monotone_closure(&raw).unwrap();
        let emb = network::embed_as_game(&set, 1).unwrap();
        let t = rng.random_range(1..=10u64) as f64;
        let state: Vec<f64> = (0..q)
            .map(|_| rng.random_range(0..=20u64) as f64 / t)
            .collect();
        if network::verify_equivalence(&emb, &[state]).unwrap() {
            passes += 1;
        }
    }
    report(
        "02 maxweight = blackwell",
        passes == cases,
        &format!("{passes}/{cases} random networks agree exactly"),
    );
}

#[test]
fn criterion_03_maxweight_stability_bound() {
    let set = ScheduleSet::monotone_closure(&[vec![1, 0], vec![0, 1]]).unwrap();
    let arrivals = ArrivalModel::Iid(DiscreteDist::bernoulli_product(&[0.4, 0.4]).unwrap());
    let margin = network::interior_margin(&[0.4, 0.4], &set).unwrap();
    let mut rng = child_rng(303, 0);
    let trace = network::simulate(&set, &arrivals, &Policy::MaxWeight, 100_000, &mut rng).unwrap();
    let bound = network::drift_bound(trace.measured_c, &set, margin).unwrap();
    let pass = trace.avg_total <= bound;
    report(
        "03 maxweight stability",
        pass,
        &format!(
            "avg total queue {:.3} <= drift bound {:.3} (margin {margin:.3})",
            trace.avg_total, bound
        ),
    );
}

#[test]
fn criterion_04_transience() {
    let set = ScheduleSet::monotone_closure(&[vec![1, 0], vec![0, 1]]).unwrap();
    let abar = [0.7, 0.7];
    let (nhat, eps) = network::transience_check(&set, &abar).unwrap();
    let arrivals = ArrivalModel::Iid(DiscreteDist::bernoulli_product(&abar).unwrap());
    let horizon = 100_000;

    let mut rng = child_rng(404, 0);
    let trace = network::simulate(&set, &arrivals, &Policy::MaxWeight, horizon, &mut rng).unwrap();
    let q_final = trace.queues.last().unwrap();
    let mw_rate = nhat
        .iter()
        .zip(q_final)
        .map(|(n, &q)| n * q as f64)
        .sum::<f64>()
        / horizon as f64;

    // Uniform random scheduling: transience holds for any policy.
    let mut rng = child_rng(404, 1);
    let mut queue = vec![0u64; 2];
    for t in 0..horizon {
        let a = arrivals.sample(t, &mut rng);
        let k = rng.random_range(0..set.schedules().len());
        let sigma = &set.schedules()[k];
        let d: Vec<u64> = sigma.iter().zip(&queue).map(|(&s, &q)| s.min(q)).collect();
        queue = network::step(&queue, &a, &d);
    }
    let rand_rate = nhat
        .iter()
        .zip(&queue)
        .map(|(n, &q)| n * q as f64)
        .sum::<f64>()
        / horizon as f64;

    let pass = mw_rate >= eps / 2.0 && rand_rate >= eps / 2.0;
    report(
        "04 transience",
        pass,
        &format!(
            "nhat.Q(T)/T: maxweight {mw_rate:.3}, random {rand_rate:.3}, need >= {:.3}",
            eps / 2.0
        ),
    );
}

#[test]
fn criterion_05_no_regret_rps() {
    let game = ScalarGame::rock_paper_scissors();
    let rounds = 10_000;
    let reps = 100;
    let names = [
        "constant",
        "cyclic",
        "best-response",
        "uniform",
        "punish-last",
    ];
    let mut detail = String::new();
    let mut pass = true;
    for (ai, name) in names.iter().enumerate() {
        let adversary = Adversary::by_name(name).unwrap();
        let rates: Vec<f64> = replicate(reps, 500 + ai as u64, |_, mut rng| {
            let trace = regret::play(&game, &adversary, rounds, &mut rng).unwrap();
            regret::regret(&trace).unwrap() / rounds as f64
        });
        let mean = rates.iter().sum::<f64>() / reps as f64;
        let bound = 1.1 * regret::regret_bound(5f64.sqrt(), rounds);
        pass &= mean <= bound;
        detail.push_str(&format!("{name} {:.4}/{:.4} ", mean, bound));
    }
    report(
        "05 no-regret rps",
        pass,
        &format!("mean Rg(T)/T vs 1.1x bound: {detail}"),
    );
}

#[test]
fn criterion_06_waiting_gap_pathwise() {
    let violations: u64 = replicate(1000, 606, |_, mut rng| {
        let n = 1000;
        let inter = lindley::dyadic_exp_interarrivals(0.8, n, &mut rng);
        let labels: Vec<f64> = (0..n)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let modes: Vec<f64> = (0..n)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let trace = lindley::build_trace(inter, labels, modes, 1.0, 1.5).unwrap();
        lindley::waiting_gap_check(&trace)
            .iter()
            .filter(|ok| !**ok)
            .count() as u64
    })
    .into_iter()
    .sum();
    report(
        "06 waiting gap pathwise",
        violations == 0,
        &format!("{violations} violations over 1000 traces x 1000 customers"),
    );
}

const PERCEPTRON_CONFIGS: [(f64, f64); 3] = [(1.0, 2.0), (2.0, 3.0), (5.0, 1.0)];

#[test]
fn criterion_07_perceptron_mistake_bound() {
    let mut pass = true;
    let mut detail = String::new();
    for (ci, &(d_bound, w_norm)) in PERCEPTRON_CONFIGS.iter().enumerate() {
        let ok: u64 = replicate(100, 707 + ci as u64, |_, mut rng| {
            let w_star = lindley::sample_w_star(4, w_norm, &mut rng);
            let model = ServiceModeModel::new(1.0, 1.5, d_bound, w_star).unwrap();
            let stream = lindley::gen_stream(&model, 400, &mut rng).unwrap();
            let counts: Vec<u64> = [0.1, 1.0, 10.0]
                .iter()
                .map(|&alpha| {
                    lindley::mistake_bound_check(&model, &stream, alpha)
                        .unwrap()
                        .0
                })
                .collect();
            let within = counts[0] as f64 <= model.mistake_budget();
            let invariant = counts[0] == counts[1] && counts[1] == counts[2];
            u64::from(within && invariant)
        })
        .into_iter()
        .sum();
        pass &= ok == 100;
        detail.push_str(&format!("(D={d_bound},|w*|={w_norm}) {ok}/100 "));
    }
    report("07 perceptron mistake bound", pass, detail.trim());
}

#[test]
fn criterion_08_queue_gap_and_recoupling() {
    let mut pass = true;
    let mut detail = String::new();
    for (ci, &(d_bound, w_norm)) in PERCEPTRON_CONFIGS.iter().enumerate() {
        let ok: u64 = replicate(100, 808 + ci as u64, |_, mut rng| {
            let w_star = lindley::sample_w_star(4, w_norm, &mut rng);
            let model = ServiceModeModel::new(1.0, 1.5, d_bound, w_star).unwrap();
            let stream = lindley::gen_stream(&model, 400, &mut rng).unwrap();
            let inter = lindley::dyadic_exp_interarrivals(0.8, 400, &mut rng);
            let (_, verdicts, _) = lindley::run_queue_with_perceptron(
                &model,
                &stream,
                &inter,
                1.0,
                UpdateRule::MistakeOnly,
            )
            .unwrap();
            u64::from(verdicts.gap_ok && verdicts.equal_after_t_prime)
        })
        .into_iter()
        .sum();
        pass &= ok == 100;
        detail.push_str(&format!("(D={d_bound},|w*|={w_norm}) {ok}/100 "));
    }
    report("08 queue gap + recoupling", pass, detail.trim());
}

#[test]
fn criterion_09_oco_bound() {
    let worst_slack: f64 = replicate(1000, 909, |rep, mut rng| {
        let dim = 3;
        let t_len = 60;
        let radius = 2.0;
        let xs: Vec<Vec<f64>> = (0..t_len)
            .map(|_| {
                (0..dim)
                    .map(|_| rng.random_range(-radius..radius))
                    .collect()
            })
            .collect();
        let w_star: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| {
                let dot: f64 = w_star.iter().zip(x).map(|(a, b)| a * b).sum();
                if dot >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let alphas: Vec<f64> = if rep % 2 == 0 {
            vec![0.5; t_len]
        } else {
            (0..t_len).map(|t| 1.0 / ((t + 1) as f64).sqrt()).collect()
        };
        let ws = lindley::ogd_hinge_trajectory(&xs, &ys, &alphas, &vec![0.0; dim]).unwrap();
        let mut worst = f64::INFINITY;
        let mut comparators = vec![w_star.clone()];
        for _ in 0..10 {
            comparators.push((0..dim).map(|_| rng.random_range(-3.0..3.0)).collect());
        }
        for u in &comparators {
            let (lhs, rhs) = lindley::oco_bound_check(&xs, &ys, &ws, &alphas, u).unwrap();
            worst = worst.min(rhs - lhs);
        }
        worst
    })
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    report(
        "09 oco bound",
        worst_slack >= -1e-9,
        &format!("worst slack {worst_slack:.3e} over 1000 trajectories x 11 comparators"),
    );
}

#[test]
fn criterion_10_admission_scalings() {
    let p = 0.3;
    let grid = [0.9, 0.95, 0.98, 0.99, 0.995];
    let table = admission::heavy_traffic_sweep(p, &grid, 20, 1e6, 2.0, 1010).unwrap();
    let (_, slope, r2) = table.threshold_fit.unwrap();

    let fit_ok = r2 >= 0.95 && slope > 0.0;

    let target = (1.0 - p) / p;
    let greedy_ok = table
        .rows
        .iter()
        .filter(|r| r.policy == "greedy-empty" && r.lambda_tilde >= 0.99)
        .all(|r| (r.mean_queue - target).abs() <= 0.2 * target);

    let mut oracle_ok = true;
    let mut worst_z = 0.0f64;
    for row in table.rows.iter().filter(|r| r.policy == "threshold") {
        let k = admission::min_feasible_threshold(row.lambda, p).unwrap();
        let want = admission::birth_death_mean(row.lambda, p, k);
        let se = row.ci_half_width / 1.96;
        let z = (row.mean_queue - want).abs() / se.max(1e-12);
        worst_z = worst_z.max(z);
        oracle_ok &= z <= 3.0;
    }

    let pass = fit_ok && greedy_ok && oracle_ok;
    report(
        "10 admission scalings",
        pass,
        &format!(
            "log fit R2 {r2:.3} slope {slope:.2}, greedy near (1-p)/p at top loads: {greedy_ok}, birth-death worst |z| {worst_z:.2}"
        ),
    );
}

#[test]
fn criterion_11_balance_regimes() {
    let lambda = 0.9;
    let reps = 10;

    let hm = balance::regime_sweep(Regime::HighMessage, &[10, 50, 100, 500], lambda, reps, 1111)
        .unwrap();
    let decreasing = hm.windows(2).all(|w| w[1].mean_delay < w[0].mean_delay);

    let fast = balance::regime_sweep(
        Regime::HighMemory { multiplier: 1.2 },
        &[10, 500],
        lambda,
        reps,
        1112,
    )
    .unwrap();
    let fast_halves = fast[1].mean_delay < 0.5 * fast[0].mean_delay;

    // The slow arm's margin over half its small-system delay is modest, so
    // it needs more replications to resolve at 3 SE.
    let slow = balance::regime_sweep(
        Regime::HighMemory { multiplier: 0.3 },
        &[10, 500],
        lambda,
        1024,
        1113,
    )
    .unwrap();
    let sep = (slow[1].mean_delay - 0.5 * slow[0].mean_delay)
        / (slow[1].ci_half / 1.96 + 0.5 * slow[0].ci_half / 1.96);
    let slow_stays = sep >= 3.0;

    let con = balance::regime_sweep(Regime::Constrained, &[500], lambda, reps, 1114).unwrap();
    let con_z = con[0].mean_delay / (con[0].ci_half / 1.96);
    let con_positive = con_z >= 5.0;

    // Closed-form oracles: a single server is M/M/1; with no messages and no
    // memory the uniform split keeps every server an independent M/M/1.
    let mm1 = balance::replicated_delay(
        &ClusterConfig::new(1, 0.8, 0.0, 0, 8000.0, 1115).unwrap(),
        16,
    );
    let want = 0.8 / (1.0 - 0.8);
    let mm1_ok = (mm1.mean_delay - want).abs() <= 3.0 * (mm1.ci_half / 1.96);
    let split = balance::replicated_delay(
        &ClusterConfig::new(50, 0.8, 0.0, 0, 1000.0, 1116).unwrap(),
        16,
    );
    let split_ok = (split.mean_delay - want).abs() <= 3.0 * (split.ci_half / 1.96);

    let pass = decreasing && fast_halves && slow_stays && con_positive && mm1_ok && split_ok;
    report(
        "11 balance regimes",
        pass,
        &format!(
            "high-message decreasing {decreasing}, high-memory fast {:.2}->{:.2}, slow {:.2}->{:.2} sep {sep:.1} SE, constrained z {con_z:.1}, mm1 {:.2} vs {want:.2}, split {:.2} vs {want:.2}",
            fast[0].mean_delay, fast[1].mean_delay, slow[0].mean_delay, slow[1].mean_delay,
            mm1.mean_delay, split.mean_delay
        ),
    );
}

#[test]
fn criterion_12_cli_determinism() {
    use std::process::Command;
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pennies.tensor"), "2 2 1\n1\n-1\n-1\n1\n").unwrap();
    std::fs::write(dir.path().join("crossbar.set"), "1 0\n0 1\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "blackwell",
            "--tensor",
            "pennies.tensor",
            "--target",
            "point:0",
            "--rounds",
            "200",
        ],
        vec!["regret", "--adversary", "best-response", "--rounds", "200"],
        vec![
            "maxweight",
            "--schedules",
            "crossbar.set",
            "--arrivals",
            "bernoulli:0.4,0.4",
            "--rounds",
            "200",
        ],
        vec!["lindley", "--rounds", "200"],
        vec![
            "admission",
            "--lambda",
            "0.5",
            "--policy",
            "greedy",
            "--horizon",
            "2000",
        ],
        vec![
            "balance",
            "--n",
            "20",
            "--regime",
            "high-message",
            "--horizon",
            "100",
        ],
    ];
    let mut pass = true;
    let mut detail = String::new();
    for case in &cases {
        let mut files = Vec::new();
        for out in ["a.csv", "b.csv"] {
            let output = Command::new(env!("CARGO_BIN_EXE_qnetlab"))
                .current_dir(dir.path())
                .args(case)
                .args(["--reps", "3", "--seed", "77", "--out", out])
                .output()
                .unwrap();
            assert!(output.status.success(), "{case:?}");
            let stem = out.strip_suffix(".csv").unwrap();
            files.push((
                std::fs::read(dir.path().join(out)).unwrap(),
                std::fs::read(dir.path().join(format!("{stem}_summary.csv"))).unwrap(),
            ));
        }
        let same = files[0] == files[1];
        pass &= same;
        detail.push_str(&format!(
            "{} {} ",
            case[0],
            if same { "ok" } else { "DIFFERS" }
        ));
    }
    report("12 cli determinism", pass, detail.trim());
}
