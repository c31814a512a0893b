use ddcnet::baselines::{Pid1Gains, Pid2Gains, RandomParams, RandomPolicy};
use ddcnet::harness::{self, Config, ControllerKind, RunLog, Summary};
use ddcnet::plant::{Plant, PlantParams};
use proptest::prelude::*;

fn t_conv_oracle(t: &[f64], v: &[f64], target: f64, a: f64) -> Option<f64> {
    let tol = a / 100.0 * target.abs();
    (0..t.len()).find(|&i| v[i..].iter().all(|x| (x - target).abs() <= tol)).map(|i| t[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn t_conv_matches_forward_search(
        v in prop::collection::vec(0.0f64..12.0, 1..80),
        target in 1.0f64..10.0,
        a in prop::sample::select(vec![10.0, 20.0]),
    ) {
        let t: Vec<f64> = (0..v.len()).map(|k| harness::tick_time(k, 0.2)).collect();
        prop_assert_eq!(harness::t_conv(&t, &v, target, a).unwrap(), t_conv_oracle(&t, &v, target, a));
    }

    #[test]
    fn plant_stays_physical(cmds in prop::collection::vec(0.0f64..=50.0, 1..200), seed in 0u64..1000) {
        let p = PlantParams::default();
        let mut plant = Plant::reset(p.clone(), seed).unwrap();
        for u in cmds {
            let o = plant.step(u, 0.2).unwrap();
            prop_assert!(o.v >= 0.0 && o.v.is_finite());
            prop_assert!(o.theta >= 0.0 && o.theta <= p.theta_max);
        }
    }

    #[test]
    fn steady_state_is_monotone_in_pedal(a in 0.0f64..50.0, b in 0.0f64..50.0) {
        let p = PlantParams::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(p.steady_state_velocity(lo) <= p.steady_state_velocity(hi));
    }
}

#[test]
fn plant_rejects_out_of_range_commands() {
    let mut plant = Plant::reset(PlantParams::default(), 0).unwrap();
    assert!(plant.step(-0.1, 0.2).is_err());
    assert!(plant.step(50.1, 0.2).is_err());
    assert!(plant.step(10.0, 0.0).is_err());
}

#[test]
fn shipped_pid_gains_are_the_tuner_output() {
    let cfg = Config::default();
    let (p, dt, lo, hi) = (&cfg.plant, cfg.model.period, cfg.controller.u_min, cfg.controller.u_max);
    let g1 = harness::tune_pid1(p, dt, lo, hi);
    let g2 = harness::tune_pid2(p, dt, lo, hi, Pid2Gains::default().t_delay);
    let d1 = Pid1Gains::default();
    let d2 = Pid2Gains::default();
    for (a, b) in [(g1.kp, d1.kp), (g1.ki, d1.ki), (g1.kd, d1.kd), (g2.kp, d2.kp), (g2.kd, d2.kd)] {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn random_policy_hovers_around_the_target() {
    let mut plant = Plant::reset(PlantParams::default(), 3).unwrap();
    let mut policy = RandomPolicy::seeded(RandomParams::default(), 0.0, 50.0, 3);
    let target = 5.0;
    let mut side = None;
    let mut crossings = 0;
    for _ in 0..300 {
        let v = plant.observe().v;
        let u = policy.step(v, target);
        let above = plant.step(u, 0.2).unwrap().v > target;
        if side.is_some_and(|s| s != above) {
            crossings += 1;
        }
        side = Some(above);
    }
    assert!(crossings >= 5, "{crossings} crossings");
}

#[test]
fn collection_is_deterministic_and_sized() {
    let cfg = Config::default();
    let a = harness::collect_data(&cfg).unwrap();
    let b = harness::collect_data(&cfg).unwrap();
    assert_eq!(a.len(), 300);
    assert_eq!(a.rows(), b.rows());
    let mut other = cfg.clone();
    other.experiment.seed += 1;
    assert_ne!(harness::collect_data(&other).unwrap().rows(), a.rows());
}

#[test]
fn baseline_runs_are_deterministic() {
    let mut cfg = Config::default();
    cfg.experiment.duration_s = 20.0;
    for kind in [ControllerKind::Pid1, ControllerKind::Pid2, ControllerKind::Random] {
        cfg.experiment.controller = kind;
        let a = harness::run_experiment(&cfg, None).unwrap();
        let b = harness::run_experiment(&cfg, None).unwrap();
        assert_eq!(a.rows, b.rows, "{kind}");
        assert_eq!(a.rows.len(), 100);
    }
}

#[test]
fn proposed_settles_without_chattering() {
    let cfg = Config::default();
    let traj = harness::collect_data(&cfg).unwrap();
    let (m, _) = harness::train_model(&cfg, &traj).unwrap();
    let mut run = cfg.clone();
    run.experiment.controller = ControllerKind::Proposed;
    let log = harness::run_experiment(&run, Some(&m)).unwrap();
    let s = Summary::from_log(ControllerKind::Proposed, 5.0, 60.0, &log).unwrap();
    let t = s.t_conv_20_s.expect("converges");
    let u: Vec<f64> = log.rows.iter().filter(|r| r.time_s >= t).map(|r| r.u_cmd_deg).collect();
    let worst = u.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    assert!(worst < 2.0, "largest command change {worst} deg after settling");
}

#[test]
fn plot_is_deterministic_and_leaves_nothing_on_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Config::default();
    cfg.experiment.duration_s = 10.0;
    cfg.experiment.controller = ControllerKind::Pid2;
    let log = harness::run_experiment(&cfg, None).unwrap();
    let log_path = dir.path().join("run.csv");
    log.write_csv(std::fs::File::create(&log_path).unwrap()).unwrap();
    assert_eq!(RunLog::load(&log_path).unwrap().rows, log.rows);

    let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
    harness::emit_plot(&log_path, &a).unwrap();
    harness::emit_plot(&log_path, &b).unwrap();
    let svg = std::fs::read(&a).unwrap();
    assert_eq!(svg, std::fs::read(&b).unwrap());
    assert!(svg.starts_with(b"<svg"));

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, format!("{}\n", harness::LOG_HEADER)).unwrap();
    let out = dir.path().join("empty.svg");
    assert!(harness::emit_plot(&empty, &out).is_err());
    assert!(!out.exists());
    assert!(harness::emit_plot(&dir.path().join("missing.csv"), &out).is_err());
    assert!(!out.exists());
}

#[test]
fn compare_flags_a_reversed_ranking() {
    let s = |name: &str, t: Option<f64>| Summary {
        controller: name.into(),
        target_kmh: 5.0,
        duration_s: 60.0,
        t_conv_20_s: t,
        t_conv_10_s: None,
        final_error_kmh: 0.1,
        mean_step_ms: 1.0,
        max_step_ms: 2.0,
    };
    let ok = harness::compare(&[s("pid1", Some(9.0)), s("proposed", Some(3.0)), s("pid2", Some(5.0))]).unwrap();
    assert!(ok.violations.is_empty());
    assert!(ok.table.contains("proposed"));
    let bad = harness::compare(&[s("pid1", Some(2.0)), s("proposed", None)]).unwrap();
    assert_eq!(bad.violations, vec![("proposed".to_string(), "pid1".to_string())]);
}
