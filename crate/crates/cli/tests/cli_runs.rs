use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jtchain::ModelParams;
use jtchain_cli::sweep::evaluate_point;

fn jtchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jtchain"))
        .args(args)
        .env_remove("JTCHAIN_PRECISION")
        .env_remove("JTCHAIN_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse::<f64>().unwrap()).collect()
}

fn sweep_toml(body: &str) -> String {
    format!("[base]\nn_sites = 20\nomega0 = 1.0\nt = 0.4\nomega = 1.0\n\n{body}")
}

#[test]
fn single_value_sweep_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        &sweep_toml("[[sweep]]\nname = \"one\"\naxis = \"g\"\nvalues = [0.3]\nout = \"o\"\n"),
    );
    let out = jtchain(&["sweep", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("o/one.csv");
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(
        "axis_name,axis_value,N,omega,omega0,t,g,f_spin_total,f_boson_total,f_spin_zero,f_boson_zero,\
         f_spin_rest,f_boson_rest,e_minus_0,e_plus_0,sin_theta,phase\n"
    ));
    assert_eq!(rows(&csv).len(), 1);
    // F_0 N at g = 0.3 from the two-mode covariance.
    let zero = column(&csv, "f_spin_zero")[0];
    assert!((zero * 20.0 - 0.03363435515341401).abs() < 1e-9);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/one.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
    assert!(meta["timestamp"].as_u64().is_some());
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn fig1_diverges_at_the_critical_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = jtchain(&["figure", "fig1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let table = rows(&dir.path().join("fig1.csv"));
    assert_eq!(table.len(), 201);
    let crit = &table[100];
    assert_eq!(crit[6].parse::<f64>().unwrap(), 0.5);
    assert_eq!((crit[7].as_str(), crit[8].as_str()), ("inf", "inf"));
    assert!(crit[11] != "inf" && crit[12] != "inf");
    assert_eq!(crit[16], "critical");
    for (i, r) in table.iter().enumerate() {
        if i != 100 {
            assert!(r[7].parse::<f64>().unwrap().is_finite(), "row {i}");
        }
    }
    assert!(dir.path().join("fig1.py").exists());
}

#[test]
fn large_hopping_suppresses_fluctuations() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&jtchain(&["figure", "fig3", "--out", dir.path().to_str().unwrap()])), 0);
    let weak = column(&dir.path().join("fig3_t0.4.csv"), "f_spin_total");
    let strong = column(&dir.path().join("fig3_t10.csv"), "f_spin_total");
    assert_eq!(weak.len(), 99);
    assert!(weak.iter().zip(&strong).all(|(w, s)| s < w));
    let ns = column(&dir.path().join("fig3_t10.csv"), "axis_value");
    assert_eq!(ns.first(), Some(&2.0));
    assert_eq!(ns.last(), Some(&100.0));
}

#[test]
fn figure_output_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(code(&jtchain(&["figure", "fig2", "--out", d.path().to_str().unwrap()])), 0);
    }
    for name in ["fig2_N5.csv", "fig2_N10.csv", "fig2_N20.csv", "fig2_N40.csv", "fig2.py"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        &sweep_toml("[[sweep]]\nname = \"n\"\naxis = \"n\"\nvalues = [2, 3, 5, 8, 13, 21]\nset = { g = 0.6 }\n"),
    );
    let run = |threads: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_jtchain"))
            .args(["sweep", cfg.to_str().unwrap()])
            .env("JTCHAIN_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        fs::rename(dir.path().join("out/n.csv"), dir.path().join(out)).unwrap();
        fs::read(dir.path().join(out)).unwrap()
    };
    assert_eq!(run("1", "a.csv"), run("4", "b.csv"));
}

#[test]
fn rows_recompute_in_isolation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        &sweep_toml("[[sweep]]\nname = \"g\"\naxis = \"g\"\ngrid = { start = 0.05, stop = 0.95, count = 7 }\n"),
    );
    assert_eq!(code(&jtchain(&["sweep", cfg.to_str().unwrap()])), 0);
    for r in rows(&dir.path().join("out/g.csv")) {
        let f = |i: usize| r[i].parse::<f64>().unwrap();
        let p = ModelParams::periodic(r[2].parse().unwrap(), f(4), f(5), f(6), f(3)).unwrap();
        let again = evaluate_point(&p, None).unwrap();
        let rep = &again.report;
        for (i, want) in [(7, rep.f_spin_total), (8, rep.f_boson_total), (13, again.e_minus_0), (15, again.sin_theta)] {
            assert!((f(i) - want).abs() <= 1e-12 * want.abs().max(1.0), "column {i}: {} vs {want}", f(i));
        }
    }
}

#[test]
fn custom_ring_matches_periodic_chain() {
    let dir = tempfile::tempdir().unwrap();
    // Four-site ring with t = 0.4: diagonal ω̄_0 + 2t, nearest neighbours -t.
    write(dir.path(), "ring.csv", "1.8,-0.4,0,-0.4\n-0.4,1.8,-0.4,0\n0,-0.4,1.8,-0.4\n-0.4,0,-0.4,1.8\n");
    let body = "[[sweep]]\nname = \"{name}\"\naxis = \"g\"\nvalues = [0.2, 0.45, 0.7]\n";
    let custom = format!(
        "[base]\nn_sites = 4\nboundary = \"custom\"\nhopping_csv = \"ring.csv\"\n\n{}",
        body.replace("{name}", "custom")
    );
    let periodic = format!("[base]\nn_sites = 4\nt = 0.4\n\n{}", body.replace("{name}", "pbc"));
    for (name, text) in [("c.toml", custom), ("p.toml", periodic)] {
        let cfg = write(dir.path(), name, &text);
        let out = jtchain(&["sweep", cfg.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for col in ["f_spin_total", "f_boson_total", "f_spin_zero", "e_minus_0", "e_plus_0", "sin_theta"] {
        let a = column(&dir.path().join("out/custom.csv"), col);
        let b = column(&dir.path().join("out/pbc.csv"), col);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-8, "{col}: {x} vs {y}");
        }
    }
}

#[test]
fn exit_codes_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&jtchain(&["sweep", missing.to_str().unwrap()])), 1);

    let bad =
        write(dir.path(), "bad.toml", &sweep_toml("[[sweep]]\nname = \"x\"\naxis = \"g\"\nvalues = [0.5, 0.2]\n"));
    assert_eq!(code(&jtchain(&["sweep", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&jtchain(&["critical", "--range", "0.6,0.9"])), 2);
    assert_eq!(code(&jtchain(&["figure", "fig4", "--set", "t=3"])), 2);

    // A zero transverse field leaves the spin gap undefined; nothing is written.
    let physics = write(
        dir.path(),
        "phys.toml",
        "[base]\nomega = 0.0\n\n[[sweep]]\nname = \"z\"\naxis = \"g\"\nvalues = [0.2]\nout = \"phys\"\n",
    );
    assert_eq!(code(&jtchain(&["sweep", physics.to_str().unwrap()])), 3);
    assert!(!dir.path().join("phys").exists());

    // An ascending trend cannot improve monotonically.
    let failing = write(
        dir.path(),
        "val.toml",
        "[validate]\ng = [0.3]\nomega = [1.0]\nt = [0.4]\ntrend_g = [0.05, 0.1, 0.2]\nout = \"val\"\n",
    );
    let out = jtchain(&["validate", failing.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
    let report = fs::read_to_string(dir.path().join("val/validation_report.txt")).unwrap();
    assert!(report.contains("result: FAIL"));

    let too_big = write(dir.path(), "big.toml", "[validate]\nn_sites = 4\n");
    assert_eq!(code(&jtchain(&["validate", too_big.to_str().unwrap()])), 2);
}

#[test]
fn nothing_is_written_when_a_later_sweep_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        &sweep_toml(
            "[[sweep]]\nname = \"fine\"\naxis = \"g\"\nvalues = [0.2]\nout = \"o\"\n\n\
             [[sweep]]\nname = \"broken\"\naxis = \"g\"\nvalues = [0.2]\nout = \"o\"\nset = { omega = 0.0 }\n",
        ),
    );
    assert_eq!(code(&jtchain(&["sweep", cfg.to_str().unwrap()])), 3);
    assert!(!dir.path().join("o").exists());
}

#[test]
fn critical_prints_estimate_and_closed_form() {
    let out = jtchain(&["critical", "--omega", "1", "--omega0", "1", "--range", "0.1,0.9"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("g_c (bisection)   0.50000000"));
    assert!(text.contains("g_c (closed form) 0.50000000"));
    let out = jtchain(&["critical", "--omega", "2", "--omega0", "1"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("g_c (bisection)   0.70710678"));
}

#[test]
fn overrides_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = jtchain(&["figure", "fig1", "--out", dir.path().to_str().unwrap(), "--set", "N=10"]);
    assert_eq!(code(&out), 0);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig1.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["overrides"][0][0], "N");
    assert_eq!(meta["overrides"][0][1], "10");
    assert_eq!(meta["base"]["n_sites"], 10);
    assert_eq!(column(&dir.path().join("fig1.csv"), "N")[0], 10.0);
}

#[test]
fn precision_variable_controls_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &sweep_toml("[[sweep]]\nname = \"p\"\naxis = \"g\"\nvalues = [0.3]\n"));
    let out = Command::new(env!("CARGO_BIN_EXE_jtchain"))
        .args(["sweep", cfg.to_str().unwrap()])
        .env("JTCHAIN_PRECISION", "6")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let r = &rows(&dir.path().join("out/p.csv"))[0];
    assert_eq!(r[6], "3.00000e-1");
    let bad = Command::new(env!("CARGO_BIN_EXE_jtchain"))
        .args(["sweep", cfg.to_str().unwrap()])
        .env("JTCHAIN_PRECISION", "40")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn default_validation_pack_passes() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/validate_default.toml")).unwrap();
    let cfg = write(dir.path(), "v.toml", &text.replace("../validation", "report"));
    let out = jtchain(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let table = rows(&dir.path().join("report/validation.csv"));
    assert_eq!(table.iter().filter(|r| r[0] == "grid").count(), 27);
    assert!(table.iter().all(|r| r[17] == "pass"));
}
