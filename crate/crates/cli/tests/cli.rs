use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use latent_adjust::simgen::{generate, SimScenario};
use latent_adjust::sweep::replicate_seed;
use latent_adjust::{leapp, LeappConfig};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latent-adjust"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

/// Result CSV as rows of string cells, header dropped.
fn read_result(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn toy(dir: &Path) -> (PathBuf, PathBuf) {
    let mut y = String::new();
    for i in 0..10 {
        let row: Vec<String> = (0..6)
            .map(|j| {
                let effect = if i < 2 && j < 3 { 3.0 } else { 0.0 };
                format!("{}", effect + ((i * 7 + j * 5) % 11) as f64 * 0.1)
            })
            .collect();
        y.push_str(&row.join(","));
        y.push('\n');
    }
    (write(dir, "y.csv", &y), write(dir, "g.csv", "1\n1\n1\n0\n0\n0\n"))
}

#[test]
fn raw_analysis_of_a_toy_file() {
    let dir = TempDir::new().unwrap();
    let (y, g) = toy(dir.path());
    let out = dir.path().join("res.csv");
    let o = run(&["analyze", "--y", path(&y), "--g", path(&g), "--method", "raw", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("gene_index,t_stat,p_value,rank,gamma_hat\n"));
    let rows = read_result(&out);
    assert_eq!(rows.len(), 10);
    let mut ranks: Vec<usize> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    ranks.sort_unstable();
    assert_eq!(ranks, (1..=10).collect::<Vec<_>>());
    assert!(rows.iter().all(|r| r[4].is_empty()));
    assert_eq!(rows[0][0], "1");
    assert!(o.stdout.is_empty());
}

#[test]
fn estimated_rank_goes_to_the_metadata() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    let o = run(&["simulate", "--reps", "1", "--N", "200", "--n", "20", "--lnr", "8", "--methods", "leapp", "--write-data", "--out-dir", path(&sim)]);
    assert!(o.status.success());
    let rep = sim.join("snr1_lnr8_rho0.5").join("rep0001");
    let out = dir.path().join("res.csv");
    let o = run(&["analyze", "--y", path(&rep.join("y.csv")), "--g", path(&rep.join("g.csv")), "--k", "auto", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("res.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["k_estimated"], true);
    assert_eq!(meta["k_hat"], 1);
    assert_eq!(meta["method"], "leapp");
    assert!(read_result(&out).iter().all(|r| !r[4].is_empty()));
}

#[test]
fn malformed_rows_exit_2_and_name_the_line() {
    let dir = TempDir::new().unwrap();
    let (_, g) = toy(dir.path());
    let out = dir.path().join("res.csv");
    let ragged = write(dir.path(), "bad.csv", "1,2,3,4,5,6\n1,2,3,4,5,6\n1,2,3,4,5\n");
    let o = run(&["analyze", "--y", path(&ragged), "--g", path(&g), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let text = write(dir.path(), "text.csv", "1,2,3,4,5,6\n1,2,x,4,5,6\n");
    let o = run(&["analyze", "--y", path(&text), "--g", path(&g), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert!(!out.exists());
}

#[test]
fn inconsistent_design_exits_2() {
    let dir = TempDir::new().unwrap();
    let (y, _) = toy(dir.path());
    let out = dir.path().join("res.csv");
    let short = write(dir.path(), "g5.csv", "1\n0\n1\n0\n1\n");
    assert_eq!(run(&["analyze", "--y", path(&y), "--g", path(&short), "--out", path(&out)]).status.code(), Some(2));
    let flat = write(dir.path(), "g0.csv", "1,1,1,1,1,1\n");
    assert_eq!(run(&["analyze", "--y", path(&y), "--g", path(&flat), "--out", path(&out)]).status.code(), Some(2));
    let g = write(dir.path(), "g.csv", "1,1,1,0,0,0\n");
    assert_eq!(
        run(&["analyze", "--y", path(&y), "--g", path(&g), "--k", "9", "--out", path(&out)]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["analyze", "--y", path(&y), "--g", path(&g), "--method", "pca", "--out", path(&out)]).status.code(),
        Some(2)
    );
}

#[test]
fn numerical_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let y = write(dir.path(), "zeros.csv", &"0,0,0,0,0,0\n".repeat(10));
    let g = write(dir.path(), "g.csv", "1,1,1,0,0,0\n");
    let out = dir.path().join("res.csv");
    let o = run(&["analyze", "--y", path(&y), "--g", path(&g), "--k", "1", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn covariates_and_intercept() {
    let dir = TempDir::new().unwrap();
    let (y, g) = toy(dir.path());
    let x = write(dir.path(), "x.csv", "0.5\n-1\n2\n0.1\n-0.3\n1.2\n");
    let out = dir.path().join("res.csv");
    let o = run(&["analyze", "--y", path(&y), "--g", path(&g), "--x", path(&x), "--intercept", "--method", "raw", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("res.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["n_covariates"], 2);
    // The intercept is collinear with nothing here, but a covariate file
    // with the wrong length is rejected.
    let short = write(dir.path(), "x5.csv", "1\n2\n3\n4\n5\n");
    let o = run(&["analyze", "--y", path(&y), "--g", path(&g), "--x", path(&short), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn simulation_output_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let args = |out: &Path| {
        vec![
            "simulate".to_string(),
            "--reps".into(),
            "1".into(),
            "--seed".into(),
            "7".into(),
            "--N".into(),
            "200".into(),
            "--n".into(),
            "20".into(),
            "--rho".into(),
            "0.25,0.75".into(),
            "--out-dir".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert!(bin().args(args(&a)).status().unwrap().success());
    assert!(bin().args(args(&b)).status().unwrap().success());
    assert!(bin().args(args(&c)).env("LATENT_ADJUST_THREADS", "1").status().unwrap().success());
    let first = snapshot(&a);
    assert_eq!(first.len(), 5);
    assert_eq!(first, snapshot(&b));
    assert_eq!(first, snapshot(&c));
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 5);
}

#[test]
fn bad_simulation_settings_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(&["simulate", "--n", "61", "--reps", "1", "--out-dir", path(&out)]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--rho", "1.5", "--reps", "1", "--out-dir", path(&out)]).status.code(), Some(2));
    let o = bin()
        .args(["simulate", "--reps", "1", "--N", "50", "--n", "10", "--out-dir", path(&out)])
        .env("LATENT_ADJUST_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analysis_of_simulated_files_matches_the_library() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    let o = run(&["simulate", "--reps", "1", "--seed", "3", "--N", "300", "--n", "20", "--methods", "leapp", "--write-data", "--out-dir", path(&sim)]);
    assert!(o.status.success());
    let rep = sim.join("snr1_lnr2_rho0.5").join("rep0001");
    let out = dir.path().join("res.csv");
    let o = run(&["analyze", "--y", path(&rep.join("y.csv")), "--g", path(&rep.join("g.csv")), "--k", "1", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let sc = SimScenario {
        n: 20,
        n_genes: 300,
        seed: replicate_seed(3, 0),
        ..SimScenario::default()
    };
    let (y, d, _) = generate(&sc).unwrap();
    let fit = leapp(&y, &d, &LeappConfig::with_rank(1)).unwrap().genes;
    let gamma = fit.gamma_hat.unwrap();
    for (i, row) in read_result(&out).iter().enumerate() {
        let t: f64 = row[1].parse().unwrap();
        let p: f64 = row[2].parse().unwrap();
        let g: f64 = row[4].parse().unwrap();
        assert!((t - fit.t_stat[i]).abs() < 1e-12);
        assert!((p - fit.p_value[i]).abs() < 1e-12);
        assert!((g - gamma[i]).abs() < 1e-12);
        assert_eq!(row[3].parse::<usize>().unwrap(), fit.rank[i]);
    }

    // The sweep's scores are the same statistics.
    let preds = fs::read_to_string(sim.join("snr1_lnr2_rho0.5").join("predictions.csv")).unwrap();
    for (i, line) in preds.lines().skip(1).enumerate() {
        let score: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!((score - fit.t_stat[i].abs()).abs() < 1e-12);
    }
}

#[test]
fn resemblance_of_identical_columns() {
    let dir = TempDir::new().unwrap();
    let body: String = (0..50).map(|i| format!("{0},{0}\n", (i as f64 + 0.5) / 50.0)).collect();
    let p = write(dir.path(), "p.csv", &body);
    let out = dir.path().join("r.csv");
    let o = run(&["resemblance", "--pvals", path(&p), "--u-max", "20", "--out", path(&out)]);
    assert!(o.status.success());
    let rows = read_result(&out);
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r[1] == r[2]));

    let o = run(&["resemblance", "--pvals", path(&p), "--u-max", "0", "--out", path(&out)]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), "alpha,intersections,union\n");
}

#[test]
fn resemblance_rejects_ragged_columns() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.csv", "0.1,0.2\n0.3\n");
    let out = dir.path().join("r.csv");
    let o = run(&["resemblance", "--pvals", path(&p), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let single = write(dir.path(), "one.csv", "0.1\n0.3\n");
    assert_eq!(run(&["resemblance", "--pvals", path(&single), "--out", path(&out)]).status.code(), Some(2));
}

#[test]
fn tissue_mode_feeds_resemblance() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    let o = run(&["simulate", "--tissues", "3", "--N", "200", "--n", "20", "--snr", "4", "--methods", "leapp,raw", "--out-dir", path(&sim)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cell = sim.join("snr4_lnr2_rho0.5");
    let pvals = cell.join("pvals_leapp.csv");
    let first = fs::read_to_string(&pvals).unwrap();
    assert_eq!(first.lines().count(), 200);
    assert!(first.lines().all(|l| l.split(',').count() == 3));
    assert!(cell.join("pvals_raw.csv").exists());
    let nonnull = fs::read_to_string(cell.join("nonnull.csv")).unwrap();
    assert_eq!(nonnull.lines().count(), 201);

    let out = dir.path().join("r.csv");
    let o = run(&["resemblance", "--pvals", path(&pvals), "--u-max", "50", "--out", path(&out)]);
    assert!(o.status.success());
    let rows = read_result(&out);
    assert!(!rows.is_empty());
    let last = rows.last().unwrap();
    let (i, u): (u64, u64) = (last[1].parse().unwrap(), last[2].parse().unwrap());
    assert!(u <= 50 && i <= 3 * u);
}
