use std::path::Path;
use std::process::{Command, Output};

use bayesdiff::dataio::read_samples;

const DESIGN: &str = "sample,condition\na1,ctrl\na2,ctrl\na3,ctrl\nb1,trt\nb2,trt\nb3,trt\n";

fn bayesdiff(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bayesdiff"))
        .current_dir(dir)
        .args(args)
        .args(["--threads", "1"])
        .output()
        .expect("run bayesdiff")
}

fn fixture(with_protein: bool) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let data = if with_protein {
        "peptide,protein,a1,a2,a3,b1,b2,b3\n\
         p1,X,1.0,1.4,0.8,2.1,2.5,NA\n\
         p2,X,0.2,NA,0.1,0.9,1.2,1.0\n\
         p3,Y,3.0,2.7,3.3,3.1,2.9,3.2\n"
    } else {
        "peptide,a1,a2,a3,b1,b2,b3\n\
         p1,1.0,1.4,0.8,2.1,2.5,1.9\n"
    };
    std::fs::write(dir.path().join("data.csv"), data).unwrap();
    std::fs::write(dir.path().join("design.csv"), DESIGN).unwrap();
    dir
}

const INPUTS: [&str; 8] = [
    "--data", "data.csv", "--design", "design.csv", "--group-a", "trt", "--group-b", "ctrl",
];

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn univariate_writes_summary_and_manifest() {
    let dir = fixture(true);
    let mut args = vec!["univariate"];
    args.extend(INPUTS);
    args.extend(["--r", "500", "--emit-draws", "--emit-hist", "--out", "u"]);
    let o = bayesdiff(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["summary.csv", "draws.csv", "histogram.csv", "manifest.json"] {
        assert!(dir.path().join("u").join(f).exists(), "{f} missing");
    }
    let draws = read_samples(&dir.path().join("u/draws.csv")).unwrap();
    assert_eq!(draws.peptide_ids, ["p1", "p2", "p3"]);
    assert_eq!(draws.n_draws, 500);
}

#[test]
fn missing_group_b_is_a_usage_error() {
    let dir = fixture(true);
    let o = bayesdiff(
        dir.path(),
        &["univariate", "--data", "data.csv", "--design", "design.csv", "--group-a", "trt"],
    );
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("--group-b"), "{err}");
    assert!(err.contains("Usage: bayesdiff univariate"), "{err}");
}

#[test]
fn unknown_condition_lists_available() {
    let dir = fixture(true);
    let o = bayesdiff(
        dir.path(),
        &["univariate", "--data", "data.csv", "--design", "design.csv", "--group-a", "trt", "--group-b", "nope"],
    );
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("ctrl") && err.contains("trt"), "{err}");
}

#[test]
fn by_protein_without_protein_column_is_rejected() {
    let dir = fixture(false);
    let mut args = vec!["multivariate"];
    args.extend(INPUTS);
    args.extend(["--by-protein", "--r", "100"]);
    let o = bayesdiff(dir.path(), &args);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("protein"));
}

#[test]
fn malformed_data_reports_location() {
    let dir = fixture(true);
    std::fs::write(
        dir.path().join("data.csv"),
        "peptide,a1,a2,a3,b1,b2,b3\np1,1,2,3,4,5,abc\n",
    )
    .unwrap();
    let mut args = vec!["univariate"];
    args.extend(INPUTS);
    let o = bayesdiff(dir.path(), &args);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("data.csv:2:7"), "{err}");
}

#[test]
fn small_nu0_is_rejected() {
    let dir = fixture(true);
    let mut args = vec!["multivariate"];
    args.extend(INPUTS);
    args.extend(["--nu0", "0.5", "--by-protein", "false", "--r", "100"]);
    let o = bayesdiff(dir.path(), &args);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_design_table_lists_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let o = bayesdiff(dir.path(), &["simulate", "--design-table", "t9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("t2r1"));
}

#[test]
fn manifest_replays_byte_identically() {
    let dir = fixture(true);
    let mut args = vec!["multivariate"];
    args.extend(INPUTS);
    args.extend(["--r", "400", "--d", "3", "--seed", "9", "--emit-draws", "--out", "first"]);
    let o = bayesdiff(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = bayesdiff(
        dir.path(),
        &["multivariate", "--config", "first/manifest.json", "--out", "second"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["summary.csv", "draws.csv", "manifest.json"] {
        let a = std::fs::read(dir.path().join("first").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("second").join(f)).unwrap();
        assert!(a == b, "{f} differs on replay");
    }
}

#[test]
fn single_peptide_mixture_matches_univariate() {
    let dir = fixture(false);
    let r = "20000";
    let mut uni = vec!["univariate"];
    uni.extend(INPUTS);
    uni.extend(["--r", r, "--seed", "1", "--emit-draws", "--out", "u"]);
    let mut mv = vec!["multivariate"];
    mv.extend(INPUTS);
    mv.extend([
        "--r", r, "--seed", "2", "--emit-draws", "--out", "m", "--d", "1", "--combine", "mixture",
        "--nu0", "2", "--sigma0", "2",
    ]);
    for args in [&uni, &mv] {
        let o = bayesdiff(dir.path(), args);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut a = read_samples(&dir.path().join("u/draws.csv")).unwrap().peptide(0).to_vec();
    let mut b = read_samples(&dir.path().join("m/draws.csv")).unwrap().peptide(0).to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    // Equal sample sizes: KS distance is the max gap between empirical CDFs at pooled points.
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 - j as f64).abs() / a.len() as f64);
    }
    let n = a.len() as f64;
    let crit = (-(0.0005f64).ln() / 2.0).sqrt() * (2.0 / n).sqrt();
    assert!(d < crit, "KS {d} >= {crit}");
}
