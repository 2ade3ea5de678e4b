use std::process::Command;

use longrange_cli::{run, EXIT_HYPOTHESIS, EXIT_IO, EXIT_OK, EXIT_PRECONDITION, EXIT_USAGE};

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("longrange").chain(args.iter().copied());
    let status = run(argv, &mut out, &mut err);
    (status, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn body(output: &str) -> Vec<&str> {
    output.lines().filter(|l| !l.starts_with('#')).collect()
}

fn eta(output: &str) -> f64 {
    let line = output.lines().find(|l| l.starts_with("# eta\t")).expect("eta line");
    line["# eta\t".len()..].parse().unwrap()
}

fn intervals(output: &str) -> Vec<(f64, f64)> {
    body(output)
        .iter()
        .map(|l| {
            let (lo, hi) = l.split_once('\t').unwrap();
            (lo.parse().unwrap(), hi.parse().unwrap())
        })
        .collect()
}

fn key_values(output: &str) -> std::collections::HashMap<String, String> {
    body(output)
        .iter()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[test]
fn free_laplacian_band_is_one_interval() {
    let (status, out, _) = invoke(&["spectrum-periodic", "--inline", "free_laplacian d=1", "--p", "1", "--h", "1e-3"]);
    assert_eq!(status, EXIT_OK);
    let eta = eta(&out);
    let ivs = intervals(&out);
    assert_eq!(ivs.len(), 1);
    assert!((ivs[0].0 + 2.0).abs() <= eta && (ivs[0].1 - 2.0).abs() <= eta, "{ivs:?} eta={eta}");
}

#[test]
fn jacobi_formula_of_a_point_support() {
    let (status, out, _) = invoke(&["jacobi-formula", "--support", "{1}"]);
    assert_eq!(status, EXIT_OK);
    assert_eq!(body(&out), vec!["-1.0\t3.0"]);
    let (_, out, _) = invoke(&["jacobi-formula", "--support", "{0, 1}"]);
    assert_eq!(body(&out), vec!["-2.0\t3.0"]);
}

#[test]
fn free_laplacian_certificate_at_band_edge() {
    let (status, out, _) =
        invoke(&["shnol-certify", "--inline", "free_laplacian d=1", "--z", "2", "--q", "2", "--l-max", "20"]);
    assert_eq!(status, EXIT_OK);
    let kv = key_values(&out);
    let bound: f64 = kv["dist_bound"].parse().unwrap();
    let expected = 2.0 / 801f64.sqrt();
    assert!(bound <= 0.071);
    assert!((bound - expected).abs() <= 1e-10 * expected, "{bound} vs {expected}");
    for key in ["z_re", "z_im", "N", "rho", "delta"] {
        assert!(kv.contains_key(key), "missing {key}");
    }
}

#[test]
fn sigma_csv_has_four_rows_per_l() {
    let (status, out, _) = invoke(&["shnol", "bounds", "--inline", "free_laplacian d=1", "--z", "2", "--l", "3,5"]);
    assert_eq!(status, EXIT_OK);
    let rows = body(&out);
    assert_eq!(rows[0], "k,actual,bound,L,q");
    assert_eq!(rows.len(), 9);
    for row in &rows[1..] {
        let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(cols[1] <= cols[2], "{row}");
    }
}

#[test]
fn header_records_version_config_and_seed() {
    let (_, out, _) = invoke(&["spectrum-random", "--inline", "jacobi gamma=atoms:0,1", "--trials", "2", "-N", "20", "--seed", "7"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], format!("# longrange {}", env!("CARGO_PKG_VERSION")));
    assert_eq!(lines[1], "# command: spectrum-random");
    assert!(lines[2].starts_with("# config: spec=inline trials=2 N=20.0"));
    assert_eq!(lines[3], "# seed: 7");
    assert_eq!(lines[4], "# spec: jacobi gamma=atoms:0.0,1.0 r=3.0");
}

#[test]
fn nested_and_hyphenated_forms_agree() {
    let a = invoke(&["spectrum", "periodic", "--inline", "free_laplacian d=2", "--h", "0.05"]);
    let b = invoke(&["spectrum-periodic", "--inline", "free_laplacian d=2", "--h", "0.05"]);
    assert_eq!(a, b);
    assert_eq!(a.0, EXIT_OK);
}

#[test]
fn random_spectrum_is_reproducible_across_job_counts() {
    let spec = "ensemble d=1 C=1 r=3 diagonal=uniform:-1,1 default=disk:0.5";
    let args = |jobs: &'static str| ["--jobs", jobs, "spectrum-random", "--inline", spec, "--trials", "6", "-N", "30", "--seed", "3"];
    let one = invoke(&args("1"));
    let four = invoke(&args("4"));
    assert_eq!(one.0, EXIT_OK);
    assert_eq!(one, four);
    assert_eq!(one, invoke(&args("1")));
}

#[test]
fn files_are_written_with_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("spectrum.txt");
    let ev_path = dir.path().join("eigen.csv");
    let (status, stdout, _) = invoke(&[
        "spectrum-random",
        "--inline",
        "jacobi gamma=atoms:1",
        "--trials",
        "2",
        "-N",
        "10",
        "--output",
        out_path.to_str().unwrap(),
        "--eigenvalues",
        ev_path.to_str().unwrap(),
    ]);
    assert_eq!(status, EXIT_OK);
    assert!(stdout.is_empty());
    let spectrum = std::fs::read_to_string(&out_path).unwrap();
    assert!(spectrum.starts_with("# longrange"));
    let eigen = std::fs::read_to_string(&ev_path).unwrap();
    assert!(eigen.starts_with("# longrange"));
    let rows = body(&eigen);
    assert_eq!(rows[0], "trial,index,eigenvalue");
    // Two trials on a ball of 21 sites.
    assert_eq!(rows.len(), 1 + 2 * 21);
    for row in &rows[1..] {
        let v: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!((-1.0 - 1e-9..=3.0 + 1e-9).contains(&v));
    }
}

#[test]
fn truncation_of_free_laplacian() {
    let (status, out, _) = invoke(&["truncate", "--inline", "free_laplacian d=1", "-N", "1"]);
    assert_eq!(status, EXIT_OK);
    assert_eq!(
        body(&out),
        vec!["row,col,n,m,re,im", "0,1,-1,0,1.0,0.0", "1,0,0,-1,1.0,0.0", "1,2,0,1,1.0,0.0", "2,1,1,0,1.0,0.0"]
    );
}

#[test]
fn spec_errors_exit_with_usage_code() {
    let (status, _, err) = invoke(&["truncate", "--inline", "free_laplacian d=1 r=0.4"]);
    assert_eq!(status, EXIT_USAGE);
    assert!(err.contains("kind=semantic") && err.contains("key=\"r\""), "{err}");

    let (status, _, err) = invoke(&["truncate", "--inline", "operator d=1 C=1 r=3;coeff j=1 value=x"]);
    assert_eq!(status, EXIT_USAGE);
    assert!(err.contains("line=2 column=17"), "{err}");

    let (status, _, err) = invoke(&["truncate", "--inline", "operator d=1 C=1 r=3;coeff j=1 value=0.5"]);
    assert_eq!(status, EXIT_USAGE);
    assert!(err.contains("key=\"coeff j=1 cell=0\""), "{err}");

    let (status, _, _) = invoke(&["spectrum-periodic"]);
    assert_eq!(status, EXIT_USAGE);
}

#[test]
fn precondition_io_and_hypothesis_codes() {
    let (status, _, err) = invoke(&["spectrum-periodic", "--inline", "free_laplacian d=1 r=1.5"]);
    assert_eq!(status, EXIT_PRECONDITION);
    assert!(err.starts_with("error kind=precondition"));

    let (status, _, err) = invoke(&["truncate", "--spec", "/definitely/not/here.spec"]);
    assert_eq!(status, EXIT_IO);
    assert!(err.starts_with("error kind=io"));

    // Alternating weighted shift: not normal.
    let (status, out, err) =
        invoke(&["check-structure", "--inline", "operator d=1 C=1 r=3 kind=normal period=2;coeff j=1 cell=0 value=0.1"]);
    assert_eq!(status, EXIT_HYPOTHESIS, "{out}{err}");
    assert!(out.contains("status=violated"));

    let (status, out, _) = invoke(&["check", "structure", "--inline", "shift d=1"]);
    assert_eq!(status, EXIT_OK);
    assert!(out.contains("status=ok"));
}

#[test]
fn binary_honours_job_environment_and_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_longrange");
    let run_with = |jobs: &str| {
        Command::new(bin)
            .env("LONGRANGE_JOBS", jobs)
            .args(["spectrum-random", "--inline", "jacobi gamma=atoms:0,1", "--trials", "4", "-N", "20"])
            .output()
            .unwrap()
    };
    let a = run_with("1");
    let b = run_with("3");
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let bad = Command::new(bin).args(["jacobi-formula", "--support", "{"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
    let bad_jobs = Command::new(bin).env("LONGRANGE_JOBS", "many").args(["jacobi-formula", "--support", "{1}"]).output().unwrap();
    assert_eq!(bad_jobs.status.code(), Some(EXIT_USAGE));
}
