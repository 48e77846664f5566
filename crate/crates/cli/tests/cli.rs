use std::path::Path;
use std::process::Command;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use seisfrag::accelerogram::{AccelUnit, Accelerogram};
use seisfrag::intensity::{DemandRecord, IMRecord, ImKind};
use seisfrag::parametric::fit_linear_demand;
use seisfrag::rng::RandomStream;
use seisfrag::special::norm_cdf;
use seisfrag_cli::commands::*;
use seisfrag_cli::config::RunConfig;
use seisfrag_cli::output::write_csv;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seisfrag"))
}

fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let h = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect();
    (h, rows)
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let (h, rows) = read_table(path);
    let k = h.iter().position(|c| c == name).unwrap();
    rows.into_iter().map(|r| r[k].clone()).collect()
}

fn floats(v: &[String]) -> Vec<f64> {
    v.iter().map(|s| s.parse().unwrap()).collect()
}

fn ctx(cfg: RunConfig, out: &Path, command: &str) -> Context {
    Context::new(cfg, out.to_path_buf(), true, None, command).unwrap()
}

fn record(id: usize, im: f64, delta: f64) -> DemandRecord {
    DemandRecord::new(
        id,
        IMRecord {
            pga: im,
            sa: im,
            psa: im,
            arias: 0.01,
            d595: 10.0,
            t_mid_emp: 5.0,
        },
        delta,
    )
    .unwrap()
}

fn write_records(path: &Path, recs: &[DemandRecord]) {
    let rows: Vec<Vec<String>> = recs.iter().map(record_row).collect();
    write_csv(path, &RECORD_COLUMNS, &rows).unwrap();
}

/// Binary exceedance data from a lognormal fragility (median `alpha`, `beta`).
fn bernoulli_records(seed: u64, n: usize, alpha: f64, beta: f64) -> Vec<DemandRecord> {
    let mut rng = RandomStream::new(seed, 5).rng();
    (0..n)
        .map(|i| {
            let im = (rng.random::<f64>() * (100.0f64).ln()).exp() * 0.05;
            let fail = rng.random::<f64>() < norm_cdf((im / alpha).ln() / beta);
            record(i, im, if fail { 0.02 } else { 0.002 })
        })
        .collect()
}

fn config(text: &str) -> RunConfig {
    RunConfig::parse(text).unwrap()
}

#[test]
fn generate_is_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "motions = 2\n").unwrap();
    let run = |sub: &str, threads: &str| {
        let out = dir.path().join(sub);
        let st = bin()
            .arg("--config")
            .arg(&cfg)
            .args(["--seed", "11", "--threads", threads, "--out"])
            .arg(&out)
            .arg("generate")
            .status()
            .unwrap();
        assert!(st.success());
        out
    };
    let (a, b) = (run("a", "1"), run("b", "2"));
    for f in [
        "gm_summary.csv",
        "motions/motion_00000.txt",
        "motions/motion_00001.txt",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let (h, rows) = read_table(&a.join("gm_summary.csv"));
    assert_eq!(h, SUMMARY_COLUMNS);
    assert_eq!(rows.len(), 2);
}

#[test]
fn empirical_arias_matches_sampled_mean() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ctx(config("motions = 500\nseed = 5\n"), dir.path(), "generate");
    generate(&mut c).unwrap();
    let p = dir.path().join("gm_summary.csv");
    let sampled = floats(&column(&p, "arias_intensity_sg"));
    let emp = floats(&column(&p, "arias_emp_sg"));
    let (ms, me) = (
        sampled.iter().sum::<f64>() / 500.0,
        emp.iter().sum::<f64>() / 500.0,
    );
    assert!((me / ms - 1.0).abs() < 0.05, "{me} vs {ms}");
}

#[test]
fn simulate_conserves_motions_and_matches_direct_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let mdir = dir.path().join("in");
    std::fs::create_dir_all(&mdir).unwrap();
    let cfg = config("motions = 3\nseed = 9\n");
    let gen = MotionGenerator::from_config(&cfg).unwrap();
    let m = gen.motion(1).unwrap();
    std::fs::write(mdir.join("motion_00001.txt"), m.accelerogram.to_text()).unwrap();
    let zero = Accelerogram::new(0.01, vec![0.0; 500], "zero").unwrap();
    std::fs::write(mdir.join("motion_00002.txt"), zero.to_text()).unwrap();
    std::fs::write(mdir.join("motion_00003.txt"), "not a motion\n").unwrap();

    let mut c = ctx(cfg.clone(), &dir.path().join("out"), "simulate");
    let files = motion_files(&mdir).unwrap();
    let o = simulate(&mut c, &files).unwrap();
    assert_eq!(o.records.len() + o.failures.len(), 3);
    assert_eq!(o.failures.len(), 1);
    assert_eq!(o.failures[0].0, 3);

    let p = dir.path().join("out/demand_records.csv");
    let (h, rows) = read_table(&p);
    assert_eq!(h, RECORD_COLUMNS);
    assert_eq!(rows.len(), 2);
    let zero_row = rows.iter().find(|r| r[0] == "2").unwrap();
    assert_eq!(zero_row[6], "0");
    // spot re-computation from the written file
    let analysis = Analysis::from_config(&cfg).unwrap();
    let acc = ingest_recorded(&mdir.join("motion_00001.txt"), None).unwrap();
    let direct = analysis.run(1, &acc).unwrap();
    let row = rows.iter().find(|r| r[0] == "1").unwrap();
    let written: f64 = row[6].parse().unwrap();
    assert!((written / direct.delta - 1.0).abs() < 1e-8);
    assert_eq!(
        read_table(&dir.path().join("out/failed_analyses.csv")).0,
        FAILURE_COLUMNS
    );
}

#[test]
fn fit_shares_grid_and_echoes_lr() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = RandomStream::new(3, 0).rng();
    let recs: Vec<DemandRecord> = (0..2000)
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let u = (0.3f64).ln() + 0.6 * z;
            let e: f64 = StandardNormal.sample(&mut rng);
            record(i, u.exp(), (1.1 * u - 3.8 + 0.3 * e).exp())
        })
        .collect();
    let mut c = ctx(
        config("[analysis]\nim_kinds = [\"sa\"]\nthresholds = [0.01]\n"),
        dir.path(),
        "fit",
    );
    let entries = fit(&mut c, &recs).unwrap();
    assert_eq!(entries.len(), 5);
    let g1 = column(&dir.path().join("curves/mle_sa_0.01.csv"), "im_g");
    let g2 = column(&dir.path().join("curves/kde_sa_0.01.csv"), "im_g");
    assert_eq!(g1, g2);
    assert_eq!(
        read_table(&dir.path().join("curves/bmcs_sa_0.01.csv")).0,
        ["im_g", "probability", "support_count"]
    );
    assert_eq!(
        read_table(&dir.path().join("curves/kde_sa_0.01.csv")).0,
        ["im_g", "probability"]
    );

    let (h, rows) = read_table(&dir.path().join("parameters.csv"));
    assert_eq!(h, PARAMETER_COLUMNS);
    let lr = rows.iter().find(|r| r[0] == "lr").unwrap();
    let fit = fit_linear_demand(&seisfrag::intensity::demand_points(&recs, ImKind::Sa)).unwrap();
    let col = |n: &str| lr[h.iter().position(|c| c == n).unwrap()].clone();
    assert_eq!(col("slope"), seisfrag::accelerogram::format_sig9(fit.slope));
    assert_eq!(
        col("intercept"),
        seisfrag::accelerogram::format_sig9(fit.intercept)
    );
    assert_eq!(
        col("zeta"),
        seisfrag::accelerogram::format_sig9(fit.zeta_res)
    );
    assert_eq!(col("r2"), seisfrag::accelerogram::format_sig9(fit.r2));
    assert!(dir.path().join("plots/fragility_sa_0.01.svg").exists());
}

#[test]
fn fit_recovers_lognormal_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.csv");
    write_records(&path, &bernoulli_records(4, 5000, 1.0, 0.5));
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[analysis]\nim_kinds = [\"pga\"]\nthresholds = [0.01]\n[fit]\nmethods = [\"mle\"]\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let st = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["fit", "--records"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(st.success());
    let p = out.join("parameters.csv");
    let alpha: f64 = column(&p, "alpha_g")[0].parse().unwrap();
    let beta: f64 = column(&p, "beta")[0].parse().unwrap();
    assert!((alpha - 1.0).abs() < 0.05, "{alpha}");
    assert!((beta - 0.5).abs() < 0.05, "{beta}");
    assert!(out.join("manifest.json").exists());
}

#[test]
fn bootstrap_smoke_and_redundancy() {
    let dir = tempfile::tempdir().unwrap();
    let recs = bernoulli_records(8, 600, 0.6, 0.5);
    let mut c = ctx(
        config("[analysis]\nim_kinds = [\"pga\"]\nthresholds = [0.01]\n[bootstrap]\nreplicates = 2\nmethods = [\"mle\", \"bmcs\"]\n"),
        dir.path(),
        "bootstrap",
    );
    bootstrap(&mut c, &recs).unwrap();
    assert_eq!(
        read_table(&dir.path().join("bootstrap/mle_pga_0.01.csv")).0,
        BOOTSTRAP_COLUMNS
    );
    assert_eq!(
        read_table(&dir.path().join("bootstrap/median_im_mle_pga_0.01.csv")).0,
        MEDIAN_IM_COLUMNS
    );
    assert_eq!(
        read_table(&dir.path().join("bootstrap/summary.csv")).0,
        BOOTSTRAP_SUMMARY_COLUMNS
    );

    // with enough replicates the summary log-std follows from the sample file
    let dir = tempfile::tempdir().unwrap();
    let mut c = ctx(
        config("[analysis]\nim_kinds = [\"pga\"]\nthresholds = [0.01]\n[bootstrap]\nreplicates = 40\nmethods = [\"mle\"]\n"),
        dir.path(),
        "bootstrap",
    );
    bootstrap(&mut c, &recs).unwrap();
    let meds: Vec<f64> = column(
        &dir.path().join("bootstrap/median_im_mle_pga_0.01.csv"),
        "median_im_g",
    )
    .iter()
    .filter(|s| !s.is_empty())
    .map(|s| s.parse::<f64>().unwrap().ln())
    .collect();
    let n = meds.len() as f64;
    let m = meds.iter().sum::<f64>() / n;
    let sd = (meds.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let reported: f64 = column(
        &dir.path().join("bootstrap/summary.csv"),
        "median_im_logstd",
    )[0]
    .parse()
    .unwrap();
    assert!((sd / reported - 1.0).abs() < 1e-6, "{sd} vs {reported}");
}

#[test]
fn bootstrap_coverage_through_the_cli() {
    let (mut inside, mut total) = (0, 0);
    for rep in 0..5 {
        let dir = tempfile::tempdir().unwrap();
        let recs = bernoulli_records(50 + rep, 500, 0.6, 0.4);
        let mut c = ctx(
            config(&format!(
                "seed = {rep}\n[analysis]\nim_kinds = [\"pga\"]\nthresholds = [0.01]\ngrid_points = 30\n[bootstrap]\nmethods = [\"mle\"]\n"
            )),
            dir.path(),
            "bootstrap",
        );
        bootstrap(&mut c, &recs).unwrap();
        let p = dir.path().join("bootstrap/mle_pga_0.01.csv");
        let (o, l, u) = (
            column(&p, "original"),
            column(&p, "lower"),
            column(&p, "upper"),
        );
        for k in 0..o.len() {
            let (o, l, u): (f64, f64, f64) = (
                o[k].parse().unwrap(),
                l[k].parse().unwrap(),
                u[k].parse().unwrap(),
            );
            total += 1;
            if l <= o && o <= u {
                inside += 1;
            }
        }
    }
    assert!(inside as f64 >= 0.9 * total as f64, "{inside}/{total}");
}

#[test]
fn ingest_formats_and_units() {
    let dir = tempfile::tempdir().unwrap();
    let acc = Accelerogram::new(0.01, vec![0.1, -0.25, 3.5e-4, 0.0], "x").unwrap();
    let p = dir.path().join("a.txt");
    std::fs::write(&p, acc.to_text()).unwrap();
    assert_eq!(ingest_recorded(&p, None).unwrap().samples(), acc.samples());

    let two = dir.path().join("b.csv");
    std::fs::write(&two, "0.00,0.1\n0.02,0.2\n0.04,0.3\n0.06,0.1\n").unwrap();
    let a = ingest_recorded(&two, Some(AccelUnit::G)).unwrap();
    assert!((a.dt() - 0.02).abs() < 1e-12);
    assert!(ingest_recorded(&two, None).is_err());

    let si = dir.path().join("c.txt");
    std::fs::write(&si, "0 9.81\n0.01 9.81\n0.02 9.81\n").unwrap();
    let a = ingest_recorded(&si, Some(AccelUnit::MetersPerSecondSquared)).unwrap();
    assert!(a.samples().iter().all(|&v| (v - 1.0).abs() < 1e-15));

    let bad = dir.path().join("d.txt");
    std::fs::write(&bad, "0 1\n0.01 1\n0.03 1\n").unwrap();
    assert!(ingest_recorded(&bad, Some(AccelUnit::G)).is_err());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[analysis]\nthresholds = [0.02, 0.01]\n").unwrap();
    let code = |args: &[&str], extra: &[&Path]| {
        let mut c = bin();
        c.args(args);
        for p in extra {
            c.arg(p);
        }
        c.output().unwrap().status.code().unwrap()
    };
    assert_eq!(code(&["--config"], &[&cfg, Path::new("generate")]), 1);
    std::fs::write(&cfg, "unknown_key = 3\n").unwrap();
    assert_eq!(code(&["--config"], &[&cfg, Path::new("generate")]), 1);
    assert_eq!(code(&["--units", "furlongs", "generate"], &[]), 1);

    let out = dir.path().join("o");
    assert_eq!(code(&["--out"], &[&out, Path::new("fit")]), 2);

    // every MLE replicate lacks failures: the ensemble cannot be formed
    let recs: Vec<DemandRecord> = (0..40)
        .map(|i| record(i, 0.1 + 0.01 * i as f64, if i == 39 { 0.1 } else { 0.001 }))
        .collect();
    let path = dir.path().join("r.csv");
    write_records(&path, &recs);
    std::fs::write(
        &cfg,
        "[analysis]\nim_kinds = [\"pga\"]\nthresholds = [0.01]\n[bootstrap]\nmethods = [\"mle\"]\n",
    )
    .unwrap();
    let st = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["bootstrap", "--records"])
        .arg(&path)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(3));
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("aborted"));
}

#[test]
fn manifest_collects_module_warnings() {
    let dir = tempfile::tempdir().unwrap();
    // separated outcomes: the MLE fit warns
    let recs: Vec<DemandRecord> = (0..60)
        .map(|i| {
            let im = 0.05 * (i + 1) as f64;
            record(i, im, if im > 1.5 { 0.05 } else { 0.001 })
        })
        .collect();
    let mut c = ctx(
        config("[analysis]\nim_kinds = [\"pga\"]\nthresholds = [0.01]\n[fit]\nmethods = [\"mle\", \"segmented\"]\n"),
        dir.path(),
        "fit",
    );
    fit(&mut c, &recs).unwrap();
    let path = c.finish().unwrap();
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let warnings: Vec<String> = m["warnings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_str().unwrap().to_string())
        .collect();
    assert!(
        warnings.iter().any(|w| w.starts_with("mle pga")),
        "{warnings:?}"
    );
    let outputs = m["outputs"].as_array().unwrap();
    assert!(outputs.iter().any(|o| o["path"] == "parameters.csv"));
}

#[test]
fn threshold_tags() {
    assert_eq!(threshold_tag(0.007), "0.007");
    assert_eq!(threshold_tag(0.014), "0.014");
    assert_eq!(threshold_tag(1e-3), "0.001");
}

#[test]
fn guide_configuration_is_the_default() {
    let guide = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../book/src/cli.md"
    ))
    .unwrap();
    let block = guide
        .split("```toml\n")
        .nth(1)
        .unwrap()
        .split("```")
        .next()
        .unwrap();
    let mut parsed = RunConfig::parse(block).unwrap();
    let d = RunConfig::default();
    assert_eq!(
        parsed.ground_motion.max_attempts(),
        d.ground_motion.max_attempts()
    );
    assert_eq!(
        parsed.ground_motion.write_motions(),
        d.ground_motion.write_motions()
    );
    parsed.ground_motion.max_attempts = None;
    parsed.ground_motion.write_motions = None;
    assert_eq!(parsed, d);
    // the commented alternatives parse too
    let uncommented = block.replace("# d595 =", "d595 =");
    let cfg = RunConfig::parse(&uncommented).unwrap();
    assert!(cfg.ground_motion.d595.is_some());
    let fixed = block.replace("# fixed =", "fixed =");
    assert!(RunConfig::parse(&fixed)
        .unwrap()
        .ground_motion
        .fixed
        .is_some());
}
