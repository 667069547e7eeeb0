use std::path::Path;
use std::process::{Command, Output};

use blockade_ghz::cli::{SimulateSummary, EXIT_ORACLE};
use blockade_ghz::protocols::ProtocolSummary;
use blockade_ghz::sweeps::{read_columns, SweepResult};

fn bin(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockade-ghz"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

/// Last row of a trajectory file, keyed by column name.
fn last_row(path: &Path) -> Vec<(String, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let head: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let rec = r.records().last().unwrap().unwrap();
    head.into_iter()
        .zip(rec.iter().map(|x| x.parse::<f64>().unwrap()))
        .collect()
}

fn column(row: &[(String, f64)], name: &str) -> f64 {
    row.iter().find(|(k, _)| k == name).unwrap().1
}

#[test]
fn fig2_trajectory_ends_on_even_split() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(&["simulate", "--preset", "fig2"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let row = last_row(&tmp.path().join("trajectory.csv"));
    let a = column(&row, "g_0");
    let r = column(&row, "r_4");
    assert!((0.45..=0.55).contains(&a), "P(a^5) = {a}");
    assert!((0.45..=0.55).contains(&r), "P(b^4 r) = {r}");
    assert!((column(&row, "norm2") - 1.0).abs() < 1e-9);

    let s: SimulateSummary =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert!((s.p_all_a - a).abs() < 1e-12);
    assert!((s.success_probability - 1.0).abs() < 1e-9);
    let manifest = std::fs::read_to_string(tmp.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("trajectory.csv"));
}

#[test]
fn zero_fields_leave_populations_unchanged() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "n_atoms = 4\nomega_m_T = 0.0\ndelta_T = 0.0\ntau_over_T = 0.5\n\
         [simulate]\ninitial = \"superposition\"\nschedule = \"w\"\n",
    );
    let out = tmp.path().join("out");
    let o = bin(&["simulate", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s: SimulateSummary =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    for (p, q) in s.initial_populations.iter().zip(&s.final_populations) {
        assert!((p - q).abs() < 1e-12);
    }
}

#[test]
fn missing_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "n_atoms = 5\nomega_m_T = 120.0\ntau_over_T = 0.5\n");
    let o = bin(&["simulate", "--config", &cfg], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("delta_T"), "{}", stderr(&o));
}

#[test]
fn empty_grid_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "n_atoms = 5\nomega_m_T = 120.0\ndelta_T = 50.0\ntau_over_T = 0.5\n\
         [sweep]\nparameter = \"tau_over_t\"\ngrid = []\n",
    );
    let o = bin(&["sweep", "--config", &cfg], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("grid"), "{}", stderr(&o));
}

#[test]
fn oracle_check_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(&["oracle-check"], &tmp.path().join("ok"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = bin(&["oracle-check", "--atoms", "3", "--inject-fault", "1,2,1e-6"], &tmp.path().join("bad"));
    assert_eq!(o.status.code(), Some(EXIT_ORACLE));
    let err = stderr(&o);
    assert!(err.contains("N = 3") && err.contains("(1, 2)"), "{err}");

    let o = bin(&["oracle-check", "--atoms", "7"], &tmp.path().join("big"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ghz_n5_meets_threshold_without_decay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "n_atoms = 5\nomega_m_T = 175.0\ndelta_T = 50.0\ntau_over_T = 0.43\n");
    let out = tmp.path().join("out");
    let o = bin(&["ghz", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s: ProtocolSummary =
        serde_json::from_str(&std::fs::read_to_string(out.join("ghz.json")).unwrap()).unwrap();
    assert!(s.ghz_fidelity >= 0.95, "{}", s.ghz_fidelity);
    assert!((s.success_probability - 1.0).abs() < 1e-9);
    assert_eq!(s.steps.len(), 3);
    for step in &s.steps {
        let name = step.trajectory_csv.as_ref().unwrap();
        assert!(out.join(name).exists());
    }
}

#[test]
fn sweep_files_read_back() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "n_atoms = 3\nomega_m_T = 120.0\ndelta_T = 50.0\ntau_over_T = 0.5\n\
         [sweep]\nparameter = \"tau_over_T\"\ngrid = [0.45, 0.5, 0.55]\nobservable = \"ghz_fidelity\"\n",
    );
    let out = tmp.path().join("out");
    let o = bin(&["sweep", "--config", &cfg, "--workers", "1"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let table = SweepResult::read_csv(std::fs::File::open(out.join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 3);
    let f = std::io::BufReader::new(std::fs::File::open(out.join("p_all_a.dat")).unwrap());
    let (names, pts) = read_columns(f).unwrap();
    assert_eq!(names.1, "p_all_a");
    assert_eq!(pts.len(), 3);
    for (row, (x, y)) in table.rows.iter().zip(&pts) {
        assert_eq!(row.value, *x);
        assert!((row.p_all_a - y).abs() <= 1e-9 * y.abs().max(1e-300));
    }
    let f = std::io::BufReader::new(std::fs::File::open(out.join("ghz_fidelity.dat")).unwrap());
    assert_eq!(read_columns(f).unwrap().1.len(), 3);
}

#[test]
fn unknown_preset_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(&["simulate", "--preset", "fig9"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}
