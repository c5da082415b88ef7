use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pdflow::{Integrator, TauSchedule};
use pdflow_cli::config::{
    CustomProblem, Document, FunctionSpec, MetricKind, ProblemSource, RunConfig, Scheme,
    StartSpec, TauChoice,
};
use pdflow_cli::output::FLOW_HEADER;
use proptest::prelude::*;

fn pdflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdflow"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn footer(csv: &str) -> Vec<(String, String)> {
    csv.lines()
        .filter_map(|l| l.strip_prefix("# "))
        .map(|l| {
            let (k, v) = l.split_once(" = ").unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn any_flag_false(csv: &str) -> bool {
    footer(csv)
        .iter()
        .any(|(k, v)| ["feas_bounded", "gap_bound_ok", "lyapunov_monotone"].contains(&k.as_str()) && v == "false")
}

#[test]
fn gamma_out_of_range_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = pdflow(&["flow", "--gamma", "1.5"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("gamma must lie in [0,1]"), "{}", stderr(&o));
    assert!(!dir.path().join("pdflow-out").exists());
}

#[test]
fn gamma_error_in_file_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "c = 1\ngamma = 2\n").unwrap();
    let o = pdflow(&["flow", "--config", "run.cfg"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 2: gamma must lie in [0,1]"), "{}", stderr(&o));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    for (text, line) in [
        ("c = 1\n\nthis is not a pair\n", 3),
        ("[metric]\nmode = closed-form\n[nowhere]\n", 3),
        ("gamma = 0.5\n[integrator]\nstep = fast\n", 3),
        ("[discrete]\nscheme = simplex\n", 2),
        ("c = 1\nc = 2\n", 2),
        ("[start]\nx0 = 1, 2\ncolour = red\n", 3),
    ] {
        fs::write(dir.path().join("bad.cfg"), text).unwrap();
        let o = pdflow(&["flow", "--config", "bad.cfg"], dir.path());
        assert_eq!(code(&o), 1, "{text:?}");
        assert!(stderr(&o).contains(&format!("line {line}:")), "{text:?}: {}", stderr(&o));
    }
}

#[test]
fn missing_config_and_unknown_problem_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&pdflow(&["flow", "--config", "absent.cfg"], dir.path())), 1);
    let o = pdflow(&["flow", "--problem", "nosuch"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nosuch"));
    assert_eq!(code(&pdflow(&["bogus-command"], dir.path())), 1);
    assert_eq!(code(&pdflow(&["--help"], dir.path())), 0);
}

#[test]
fn check_example1_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = pdflow(&["check", "--problem", "example1"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().filter(|l| l.starts_with("PASS")).count() >= 10);
    assert!(!out.contains("FAIL"));
}

#[test]
fn flow_writes_trace_report_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = pdflow(&["flow", "--horizon", "20", "--out", "run"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run = dir.path().join("run");
    let csv = fs::read_to_string(run.join("trace.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), FLOW_HEADER.join(","));
    assert_eq!(csv.lines().next().unwrap(), "t,dist_primal,dist_dual,feas,lyapunov,ergodic_feas,ergodic_gap");
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, 2001);
    let keys: Vec<String> = footer(&csv).into_iter().map(|(k, _)| k).collect();
    for k in ["feas_bounded", "gap_bound_ok", "lyapunov_monotone", "first_hit_time", "condition.rate_condition"] {
        assert!(keys.iter().any(|x| x == k), "missing {k}");
    }
    assert!(!any_flag_false(&csv));
    let plot = fs::read_to_string(run.join("plot.gp")).unwrap();
    assert!(plot.contains("'trace.csv'"));
    assert!(fs::read_to_string(run.join("report.txt")).unwrap().contains("rate certificate"));
    // the resolved config reruns to the same trace
    let again = pdflow(&["flow", "--config", "run/config.resolved", "--out", "rerun"], dir.path());
    assert_eq!(code(&again), 0, "{}", stderr(&again));
    assert_eq!(csv, fs::read_to_string(dir.path().join("rerun/trace.csv")).unwrap());
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.cfg"),
        "[integrator]\nhorizon = 10\n[sweep]\ngammas = 1, 0.5, 0\ntau_cs = 0.4, 0.2\n",
    )
    .unwrap();
    for (out, jobs) in [("a", "1"), ("b", "3")] {
        let o = pdflow(&["sweep", "--config", "s.cfg", "--out", out, "--jobs", jobs, "--seed", "7"], dir.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.iter().filter(|n| n.to_string_lossy().ends_with(".csv")).count(), 6);
    for n in &names {
        let a = fs::read(dir.path().join("a").join(n)).unwrap();
        let b = fs::read(dir.path().join("b").join(n)).unwrap();
        assert!(a == b, "{n:?} differs");
    }
    for (out, args) in [("d1", ["discrete", "--dump-state"]), ("d2", ["discrete", "--dump-state"])] {
        let mut full = args.to_vec();
        full.extend(["--out", out]);
        assert_eq!(code(&pdflow(&full, dir.path())), 0);
    }
    assert_eq!(
        fs::read(dir.path().join("d1/trace.csv")).unwrap(),
        fs::read(dir.path().join("d2/trace.csv")).unwrap()
    );
}

#[test]
fn dump_state_appends_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = pdflow(&["flow", "--horizon", "2", "--dump-state", "--out", "o"], dir.path());
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("o/trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,dist_primal,dist_dual,feas,lyapunov,ergodic_feas,ergodic_gap,x_0,x_1,z_0,z_1,y_0,y_1"
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    let nums: Vec<f64> = first[7..].iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(nums, vec![-10.0, 10.0, -20.0, 0.0, -10.0, 10.0]);
}

#[test]
fn discrete_schemes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cp.cfg"),
        "gamma = 1\n[metric]\ntau = 0.25\n[discrete]\nscheme = chambolle-pock\nmax_iters = 500\nstop_tol = 1e-10\n",
    )
    .unwrap();
    let o = pdflow(&["discrete", "--config", "cp.cfg", "--out", "cp"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("cp/trace.csv")).unwrap();
    assert!(csv.starts_with("k,dist_primal,"));
    let f = footer(&csv);
    assert!(f.contains(&("stop".into(), "tolerance".into())), "{f:?}");
    assert!(f.contains(&("scheme".into(), "chambolle-pock".into())));
    // the Chambolle-Pock form needs gamma = 1
    let o = pdflow(&["discrete", "--config", "cp.cfg", "--gamma", "0.5", "--out", "x"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("gamma = 1"), "{}", stderr(&o));
}

#[test]
fn exit_two_exactly_when_a_certificate_flag_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &["flow", "--horizon", "30"],
        &["flow", "--problem", "lasso-small", "--horizon", "60"],
        &["discrete", "--problem", "box-qp", "--gamma", "0"],
        &["discrete", "--gamma", "0", "--tau", "0.45"],
    ];
    let mut seen = [false; 2];
    for (i, args) in cases.iter().enumerate() {
        let out = format!("o{i}");
        let mut full = args.to_vec();
        full.extend(["--out", &out]);
        let o = pdflow(&full, dir.path());
        let csv = fs::read_to_string(dir.path().join(&out).join("trace.csv")).unwrap();
        let failed = any_flag_false(&csv);
        assert_eq!(code(&o), if failed { 2 } else { 0 }, "{args:?}");
        seen[failed as usize] = true;
    }
    assert_eq!(seen, [true, true]);
}

#[test]
fn reproduce_example1_runs_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = pdflow(&["reproduce-example1", "--horizon", "25", "--jobs", "2", "--out", "r"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = dir.path().join("r");
    for tc in ["0.49", "0.25", "0.1"] {
        for g in ["0.99", "0.5", "0.01"] {
            let csv = fs::read_to_string(r.join(format!("trace_tauc{tc}_gamma{g}.csv"))).unwrap();
            let first = csv.lines().nth(1).unwrap();
            // ‖x⁰ - x*‖ = ‖(-10, 10)‖
            assert!(first.starts_with("0,1.4142135623730951e1,"), "{first}");
        }
    }
    let report = fs::read_to_string(r.join("report.txt")).unwrap();
    assert!(report.contains("first_hit"));
    assert_eq!(report.lines().filter(|l| l.starts_with("  tau_c = ")).count(), 9);
    let plot = fs::read_to_string(r.join("plot.gp")).unwrap();
    assert_eq!(plot.matches("using 1:2").count(), 9);
}

#[test]
fn custom_problem_from_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "2 2\n1 -1\n1 1\n").unwrap();
    fs::write(
        dir.path().join("custom.cfg"),
        "problem = custom\n[problem]\na_file = a.txt\nf = l1\nf_weight = 1\ng = sq_norm\ng_coef = 0.5\n[integrator]\nhorizon = 20\n",
    )
    .unwrap();
    let o = pdflow(&["flow", "--config", "custom.cfg", "--out", "c"], dir.path());
    // no known solution: distances are empty, the run itself succeeds
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("c/trace.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("0,,,"));

    fs::write(dir.path().join("a.txt"), "2 2\n1 -1\n1\n").unwrap();
    let o = pdflow(&["flow", "--config", "custom.cfg", "--out", "c"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn check_writes_report_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let o = pdflow(&["check", "--problem", "box-qp", "--out", "chk", "--seed", "3"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report = fs::read_to_string(dir.path().join("chk/report.txt")).unwrap();
    assert!(report.starts_with("invariant check on box-qp (seed 3)"));
}

fn start_spec() -> impl Strategy<Value = StartSpec> {
    prop_oneof![
        Just(StartSpec::Example1Default),
        Just(StartSpec::Zero),
        prop::collection::vec(-1e3..1e3f64, 2).prop_map(StartSpec::Values),
    ]
}

fn function_spec() -> impl Strategy<Value = FunctionSpec> {
    prop_oneof![
        Just(FunctionSpec::Zero),
        (0.01..10.0f64).prop_map(FunctionSpec::SqNorm),
        (0.01..10.0f64).prop_map(FunctionSpec::L1),
        prop::collection::vec(-5.0..0.0f64, 1..4).prop_map(|lo| {
            let hi = lo.iter().map(|v| v + 1.0).collect();
            FunctionSpec::Box { lo, hi }
        }),
    ]
}

fn problem() -> impl Strategy<Value = ProblemSource> {
    prop_oneof![
        prop::sample::select(vec!["example1", "lasso-small", "box-qp"])
            .prop_map(|n| ProblemSource::Catalog(n.into())),
        (function_spec(), function_spec(), any::<bool>()).prop_map(|(f, g, ls)| {
            ProblemSource::Custom(CustomProblem {
                a_file: "/data/a.txt".into(),
                f,
                g,
                least_squares: ls.then(|| ("/data/b.txt".into(), vec![1.0, -2.5])),
            })
        }),
    ]
}

fn tau_choice() -> impl Strategy<Value = TauChoice> {
    prop_oneof![
        Just(TauChoice::Auto),
        (0.001..2.0f64).prop_map(|t| TauChoice::Given(TauSchedule::Constant(t))),
        (0.001..1.0f64, 0.0..1.0f64).prop_map(|(a, f)| TauChoice::Given(TauSchedule::Saturating {
            initial: a,
            limit: a + f
        })),
    ]
}

fn integrator() -> impl Strategy<Value = Integrator> {
    prop_oneof![
        (1e-4..1.0f64).prop_map(|step| Integrator::Euler { step }),
        (1e-4..1.0f64).prop_map(|step| Integrator::Rk4 { step }),
        (1e-10..1e-4f64, 1e-12..1e-6f64).prop_map(|(rel_tol, abs_tol)| Integrator::Adaptive {
            rel_tol,
            abs_tol,
            h_min: 1e-9,
            h_max: 0.25
        }),
    ]
}

prop_compose! {
    fn run_config()(
        problem in problem(),
        c in 0.01..100.0f64,
        gamma in 0.0..=1.0f64,
        general in any::<bool>(),
        tau in tau_choice(),
        integrator in integrator(),
        horizon in 0.1..1e3f64,
        scheme in prop::sample::select(vec![Scheme::Admm, Scheme::PrimalDual, Scheme::ChambollePock]),
        max_iters in 1usize..100_000,
        x0 in start_spec(),
        y0 in start_spec(),
        gammas in prop::collection::vec(0.0..=1.0f64, 1..5),
        tau_cs in prop::collection::vec(0.01..1.0f64, 1..5),
        dump_state in any::<bool>(),
        out in prop::option::of("/[a-z]{1,8}"),
    ) -> RunConfig {
        RunConfig {
            problem,
            c,
            gamma,
            metric: if general { MetricKind::General } else { MetricKind::ClosedForm },
            tau,
            integrator,
            horizon,
            scheme,
            max_iters,
            x0,
            y0,
            sweep_gammas: gammas,
            sweep_tau_cs: tau_cs,
            dump_state,
            out_dir: out.map(Into::into),
            ..RunConfig::default()
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn config_round_trips(cfg in run_config()) {
        let text = cfg.to_document().to_string();
        let mut back = RunConfig::parse(&text, Path::new("/")).unwrap();
        back.lines.clear();
        prop_assert_eq!(&back, &cfg);
        // serialize(parse(text)) is semantically equal to text
        let doc = Document::parse(&text).unwrap();
        prop_assert_eq!(Document::parse(&doc.to_string()).unwrap(), doc);
        prop_assert_eq!(back.to_document().to_string(), text);
    }

    #[test]
    fn document_text_round_trips(
        entries in prop::collection::btree_map("[a-z_]{1,6}", "[a-z0-9 ,.+-]{0,12}", 0..6),
        section in "[a-z]{1,6}",
        comment in any::<bool>(),
    ) {
        let mut text = String::new();
        if comment {
            text.push_str("# header comment\n\n");
        }
        for (k, v) in &entries {
            text.push_str(&format!("{k} = {v}\n"));
        }
        text.push_str(&format!("[{section}]\n"));
        for (k, v) in &entries {
            text.push_str(&format!("  {k}={v}   # trailing\n"));
        }
        let doc = Document::parse(&text).unwrap();
        let again = Document::parse(&doc.to_string()).unwrap();
        prop_assert_eq!(&again, &doc);
        for (k, v) in &entries {
            prop_assert_eq!(&doc.get(&section, k).unwrap().value, &v.trim().to_string());
        }
    }
}
