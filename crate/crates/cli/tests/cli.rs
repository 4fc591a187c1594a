use std::fs;
use std::process::{Command, Output};

fn dpgstar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpgstar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn table1_header_and_rows() {
    let o = dpgstar(&["table1", "--dp-max", "2"]);
    assert!(o.status.success());
    let s = stdout(&o);
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0], "dp,dpg_l2_pct,dpgstar_l2_pct,dpgstar_graph_pct");
    assert_eq!(lines.len(), 4);
    let dp1: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(dp1[0], 1.0);
    assert!((dp1[2] - 17.03).abs() < 1.0, "{}", lines[2]);
}

#[test]
fn hconv_schema_and_blank_first_rate() {
    let o = dpgstar(&["hconv", "--p", "3", "--dp", "1", "--nx", "4"]);
    assert!(o.status.success());
    let s = stdout(&o);
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0], "p,dp,nx,ndof_trial,l2_err_pct,rate_h");
    assert!(lines[1].starts_with("3,1,2,153,") && lines[1].ends_with(','));
    let rate: f64 = lines[2].rsplit(',').next().unwrap().parse().unwrap();
    assert!(rate > 2.0);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("condition_estimate="));
}

#[test]
fn solve_headers_follow_method() {
    let base = [
        "solve",
        "--nx",
        "2",
        "--p",
        "2",
        "--dp",
        "1",
        "--wavelengths",
        "1",
        "--sample-grid",
        "3",
    ];
    let o = dpgstar(&base);
    assert!(o.status.success());
    let s = stdout(&o);
    assert_eq!(
        s.lines().next().unwrap(),
        "x,y,re_p,im_p,re_u1,im_u1,re_u2,im_u2"
    );
    assert_eq!(s.lines().count(), 10);
    assert!(String::from_utf8(o.stderr).unwrap().contains("l2_rel_pct="));

    let mut star = base.to_vec();
    star.extend(["--method", "dpgstar", "--goal", "uniform-pressure"]);
    let o = dpgstar(&star);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o).lines().next().unwrap(),
        "x,y,re_q,im_q,re_v1,im_v1,re_v2,im_v2"
    );
}

#[test]
fn lsq_compare_schema_and_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lsq.csv");
    let o = dpgstar(&["lsq-compare", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    let s = fs::read_to_string(&path).unwrap();
    let mut lines = s.lines();
    assert_eq!(
        lines.next().unwrap(),
        "alpha,dist_to_lsq_l2,dpgstar_l2_err_pct,lsq_l2_err_pct"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    assert!(rows
        .windows(2)
        .all(|w| w[1][1] <= w[0][1] && w[1][3] == w[0][3]));
}

#[test]
fn identities_deterministic_and_passing() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        assert!(
            dpgstar(&["identities", "--seed", "5", "--out", p.to_str().unwrap()])
                .status
                .success()
        );
    }
    let ja = fs::read(&a).unwrap();
    assert_eq!(ja, fs::read(&b).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(v["all_passed"], true);
    let names: Vec<&str> = v["relations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    assert_eq!(names.len(), 10);
}

#[test]
fn table1_is_byte_identical_across_runs() {
    let a = dpgstar(&["table1", "--dp", "1"]);
    let b = dpgstar(&["table1", "--dp", "1"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn validation_errors_exit_2_and_name_the_flag() {
    for (args, flag) in [
        (vec!["table1", "--nx", "0"], "--nx"),
        (vec!["table1", "--wavelengths=-1"], "--wavelengths"),
        (vec!["hconv", "--nx", "6"], "--nx"),
        (vec!["solve", "--sample-grid", "1"], "--sample-grid"),
        (vec!["lsq-compare", "--alphas", "0.1,1"], "--alphas"),
        (vec!["table1", "--norm", "scaled:0"], "--norm"),
        (vec!["table1", "--p", "0"], "--p"),
    ] {
        let o = dpgstar(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(
            String::from_utf8(o.stderr).unwrap().contains(flag),
            "{args:?}"
        );
    }
}
