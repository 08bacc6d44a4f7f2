use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn parea(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_parea"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn status(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn every_scenario_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let list = parea(&["scenario", "list"], &[]);
    assert_eq!(status(&list), 0);
    let names = String::from_utf8(list.stdout).unwrap();
    assert_eq!(names.lines().count(), 7);
    for name in names.lines() {
        let dir = tmp.path().join(name.replace(['(', ')'], "_"));
        let o = parea(&["scenario", name, "--out", &out_arg(&dir)], &[]);
        let text = String::from_utf8_lossy(&o.stdout);
        assert_eq!(status(&o), 0, "{name}\n{text}");
        assert!(text.contains("PASS") && !text.contains("FAIL"));
        assert!(dir.join("assertions.csv").exists());
        assert!(dir.join("summary.txt").exists());
    }
}

#[test]
fn same_seed_gives_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |sub: &str, seed: &str| {
        let dir = tmp.path().join(format!("run{sub}"));
        let o = parea(
            &[
                "minimize",
                "--scenario",
                "heisenberg(1)",
                "--resolution",
                "17",
                "--seed",
                seed,
                "--out",
                &out_arg(&dir),
            ],
            &[],
        );
        assert_eq!(status(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
        (
            fs::read(dir.join("minimize.csv")).unwrap(),
            fs::read(dir.join("convergence.log")).unwrap(),
        )
    };
    let a = run("a", "11");
    let b = run("b", "11");
    let c = run("c", "12");
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);

    for name in ["twin_normals", "round_trip"] {
        let x = tmp.path().join(format!("{name}_x"));
        let y = tmp.path().join(format!("{name}_y"));
        parea(&["scenario", name, "--seed", "5", "--out", &out_arg(&x)], &[]);
        parea(&["scenario", name, "--seed", "5", "--out", &out_arg(&y)], &[("PAREA_THREADS", "1")]);
        for file in ["fields.csv", "assertions.csv"] {
            assert_eq!(fs::read(x.join(file)).unwrap(), fs::read(y.join(file)).unwrap());
        }
    }
}

#[test]
fn not_closed_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let o = parea(
        &["reconstruct", "--scenario", "flat_normal", "--out", &out_arg(tmp.path())],
        &[],
    );
    assert_eq!(status(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("not closed"));
}

#[test]
fn config_errors_exit_four() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_arg(tmp.path());
    assert_eq!(status(&parea(&["scenario", "nope", "--out", &dir], &[])), 4);
    assert_eq!(status(&parea(&["frobnicate"], &[])), 4);
    assert_eq!(status(&parea(&["evaluate", "--out", &dir], &[])), 4);
    assert_eq!(
        status(&parea(&["evaluate", "--set", "colour=red", "--out", &dir], &[])),
        4
    );
    let missing = tmp.path().join("absent.cfg");
    assert_eq!(
        status(&parea(&["evaluate", "--config", missing.to_str().unwrap()], &[])),
        4
    );
    assert_eq!(
        status(&parea(&["scenario", "round_trip", "--out", &dir], &[("PAREA_THREADS", "zero")])),
        4
    );
}

#[test]
fn iteration_cap_exits_five() {
    let tmp = tempfile::tempdir().unwrap();
    let o = parea(
        &[
            "minimize",
            "--scenario",
            "heisenberg(1)",
            "--resolution",
            "9",
            "--set",
            "max_iterations=1",
            "--out",
            &out_arg(tmp.path()),
        ],
        &[],
    );
    assert_eq!(status(&o), 5);
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("from_file");
    let cfg = tmp.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "# twin pair profile\nscenario = twin_normals\nresolution = 9\neps = 0:1:5\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let o = parea(
        &["variation-profile", "--config", cfg.to_str().unwrap(), "--resolution", "17"],
        &[],
    );
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(status(&o), 0, "{text}");
    assert!(text.contains("[17, 17]"));
    let dat = fs::read_to_string(out.join("profile.dat")).unwrap();
    assert_eq!(dat.lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn file_inputs_round_trip_through_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = tmp.path().join("sc");
    parea(&["scenario", "twin_normals", "--resolution", "17", "--out", &out_arg(&sc)], &[]);
    let ev = tmp.path().join("ev");
    let o = parea(
        &[
            "evaluate",
            "--set",
            &format!("u={}", sc.join("u.pfld").display()),
            "--set",
            &format!("f={}", sc.join("f.pfld").display()),
            "--out",
            &out_arg(&ev),
        ],
        &[],
    );
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(status(&o), 0, "{text}");
    // u = xy with F = (-y, x) on [0.1, 1] x [0, 1]: integral of 2x is 0.99
    assert!(text.contains("functional         9.900000e-1"), "{text}");
    assert!(ev.join("weight.pfld").exists() && ev.join("evaluate.csv").exists());
}

#[test]
fn skew_matrix_rank() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tmp.path().join("m.skew");
    fs::write(&m, "SKEW m=4\n0 1 0 0\n-1 0 0 0\n0 0 0 3\n0 0 -3 0\n").unwrap();
    let o = parea(
        &[
            "rank-analysis",
            "--set",
            &format!("matrix={}", m.display()),
            "--out",
            &out_arg(tmp.path()),
        ],
        &[],
    );
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(status(&o), 0, "{text}");
    assert!(text.lines().any(|l| l.starts_with("rank ") && l.trim_end().ends_with(" 4")), "{text}");
}
