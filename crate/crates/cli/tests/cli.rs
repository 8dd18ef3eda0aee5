use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use photolyase_core::{ps_pseudo_first_order, ReactionParams};

const BIN: &str = env!("CARGO_BIN_EXE_photolyase");
const BASE: &str = "p0 = 1e-12\ns0 = 1e-10\nk = 1.4e6\nt0 = 0\n";

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Self(tempfile::tempdir().unwrap())
    }

    fn file(&self, name: &str, contents: &str) -> PathBuf {
        let path = self.0.path().join(name);
        std::fs::write(&path, contents).unwrap();
        path
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn column(csv: &str, i: usize) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect()
}

fn report_value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in report:\n{report}"))
        .parse()
        .unwrap()
}

#[test]
fn simulate_reference_case_plateaus() {
    let dir = Dir::new();
    let cfg = dir.file("sim.cfg", &format!("{BASE}model=second_exact\nhorizon_halflives=5\nn_points=101\n"));
    let csv = run_ok(&["simulate", "--config", s(&cfg)]);
    assert!(csv.starts_with("t_s,ps_molar\n"));
    let ps = column(&csv, 1);
    assert_eq!(ps.len(), 101);
    assert_eq!(ps[0], 0.0);
    assert!(ps.windows(2).all(|w| w[1] > w[0]));
    let last = *ps.last().unwrap();
    assert!(last < 1e-12 && last > 0.96e-12, "{last}");
}

#[test]
fn simulate_models_agree_in_excess_regime() {
    let dir = Dir::new();
    let grid = "horizon_halflives=5\nn_points=200\nt_start=1\n";
    let a = dir.file("a.cfg", &format!("{BASE}{grid}model=pseudo_first\n"));
    let b = dir.file("b.cfg", &format!("{BASE}{grid}model=second_exact\n"));
    let pseudo = column(&run_ok(&["simulate", "--config", s(&a)]), 1);
    let exact = column(&run_ok(&["simulate", "--config", s(&b)]), 1);
    let worst = pseudo.iter().zip(&exact).map(|(p, e)| (p - e).abs() / e).fold(0.0, f64::max);
    assert!(worst <= 0.01, "{worst}");
}

#[test]
fn simulate_errors_exit_2_and_write_nothing() {
    let dir = Dir::new();
    let cfg = dir.file("bad.cfg", &format!("{BASE}t_end=100\nn_points=0\n"));
    let out_path = dir.path("never.csv");
    let out = run(&["simulate", "--config", s(&cfg), "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_points"));
    assert!(!out_path.exists());

    let cfg = dir.file("unknown.cfg", &format!("{BASE}t_end=100\nn_points=3\ncolour=blue\n"));
    let out = run(&["simulate", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let out = run(&["simulate", "--config", s(&dir.path("missing.cfg"))]);
    assert_eq!(out.status.code(), Some(2));
}

const BUDGET: &str = "epsilon=1e5\npath_length=10\ndna_concentration=1e-10\nvolume=1e-4\n\
                      quantum_yield=0.015\ngamma_count=1e9\n";

#[test]
fn budget_reports_reference_numbers() {
    let dir = Dir::new();
    let cfg = dir.file("budget.cfg", BUDGET);
    let report = run_ok(&["budget", "--config", s(&cfg)]);
    assert_eq!(report_value(&report, "absorbance"), 1e-4);
    let f = report_value(&report, "fraction_absorbed");
    assert!((f / 2.3025e-4 - 1.0).abs() < 5e-3);
    assert!(report.contains("# fraction absorbed        2.3023e-4"));
    let req = report_value(&report, "required_photons");
    assert!((req / 1.74e15 - 1.0).abs() < 0.01);
    assert!((report_value(&report, "conversion_fraction") - 0.5735).abs() < 1e-3);

    let zero = dir.file("zero.cfg", &BUDGET.replace("gamma_count=1e9", "gamma_count=0"));
    let report = run_ok(&["budget", "--config", s(&zero)]);
    assert_eq!(report_value(&report, "conversion_fraction"), 0.0);

    let bad = dir.file("bad.cfg", &BUDGET.replace("quantum_yield=0.015", "quantum_yield=0"));
    assert_eq!(run(&["budget", "--config", s(&bad)]).status.code(), Some(2));
}

const ASSAY: &str = "p0=1e-12\ns0=1e-10\nk=2e6\nt0=100\ncounts_per_molar=1e18\n";

#[test]
fn assay_is_deterministic() {
    let dir = Dir::new();
    let cfg = dir.file("assay.cfg", &format!("{ASSAY}n_withdrawals=10\nhorizon_halflives=3\n"));
    let a = dir.path("a.csv");
    let b = dir.path("b.csv");
    run_ok(&["assay", "--config", s(&cfg), "--seed", "17", "--out", s(&a)]);
    run_ok(&["assay", "--config", s(&cfg), "--seed", "17", "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let text = std::fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("gel_time_s,bound_counts,unbound_counts,ps_estimate_molar\n"));
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn assay_before_onset_has_no_bound_counts() {
    let dir = Dir::new();
    let cfg = dir.file("early.cfg", &format!("{ASSAY}withdrawal_times=0,50,99,100\nseed=4\n"));
    let csv = run_ok(&["assay", "--config", s(&cfg)]);
    assert!(column(&csv, 1).iter().all(|&b| b == 0.0));
}

#[test]
fn assay_estimates_track_the_curve() {
    let dir = Dir::new();
    let cfg = dir.file("ref.cfg", &format!("{BASE}counts_per_molar=1e18\nn_withdrawals=10\nhorizon_halflives=3\nseed=9\n"));
    let csv = run_ok(&["assay", "--config", s(&cfg)]);
    let params = ReactionParams::new(1e-12, 1e-10, 1.4e6, 0.0).unwrap();
    for (t, est) in column(&csv, 0).into_iter().zip(column(&csv, 3)) {
        let truth = ps_pseudo_first_order(&params, t).unwrap();
        // binomial split of ~1e6 total counts
        let sigma = 1e-12 * ((truth / 1e-12) * (1.0 - truth / 1e-12) / 1e6).sqrt();
        assert!((est - truth).abs() <= 3.0 * sigma, "t={t}");
        assert!((est - truth).abs() <= 0.05 * truth, "t={t}");
    }
}

#[test]
fn assay_then_retrodict_recovers_onset() {
    let dir = Dir::new();
    let cfg = dir.file("assay.cfg", &format!("{ASSAY}n_withdrawals=10\nhorizon_halflives=3\nseed=21\n"));
    let data = dir.path("m.csv");
    run_ok(&["assay", "--config", s(&cfg), "--out", s(&data)]);
    let fit_cfg = dir.file("fit.cfg", "p0=1e-12\nseed=5\nn_resamples=200\n");
    let report = run_ok(&["retrodict", "--config", s(&fit_cfg), "--input", s(&data)]);
    let t0 = report_value(&report, "t0_hat");
    let (lo, hi) = (report_value(&report, "ci_t0_low"), report_value(&report, "ci_t0_high"));
    assert!(lo <= t0 && t0 <= hi);
    assert!((t0 - 100.0).abs() < 3.0 * (hi - lo).max(1.0), "t0 {t0} ci ({lo}, {hi})");
    assert!((report_value(&report, "rate_hat") / 2e-4 - 1.0).abs() < 0.02);
    assert!(report.contains("model=pseudo_first\n"));

    let so_cfg = dir.file("so.cfg", "p0=1e-12\nmodel=second_order\ns0=1e-10\nseed=5\nn_resamples=100\n");
    let report = run_ok(&["retrodict", "--config", s(&so_cfg), "--input", s(&data)]);
    assert!(report.contains("model=second_order_known_s0\n"));
    assert!((report_value(&report, "t0_hat") - 100.0).abs() < 20.0);
    assert!(report.contains("k_hat="));
}

#[test]
fn retrodict_rejects_bad_csv() {
    let dir = Dir::new();
    let cfg = dir.file("fit.cfg", "p0=1e-12\nseed=1\n");
    let header = "gel_time_s,bound_counts,unbound_counts,ps_estimate_molar\n";

    let one = dir.file("one.csv", &format!("{header}1000,100,900,1e-13\n"));
    let out = run(&["retrodict", "--config", s(&cfg), "--input", s(&one)]);
    assert_eq!(out.status.code(), Some(3));

    let bad = dir.file("bad.csv", &format!("{header}1000,100,900,1e-13\n2000,abc,700,3e-13\n"));
    let out = run(&["retrodict", "--config", s(&cfg), "--input", s(&bad)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let flat = dir.file(
        "flat.csv",
        &format!("{header}1000,500,500,5e-13\n2000,500,500,5e-13\n3000,500,500,5e-13\n"),
    );
    let out = run(&["retrodict", "--config", s(&cfg), "--input", s(&flat)]);
    assert_eq!(out.status.code(), Some(4));

    let out = run(&["retrodict", "--config", s(&cfg), "--input", s(&dir.path("nope.csv"))]);
    assert_eq!(out.status.code(), Some(3));
}
