use std::fs;
use std::process::{Command, Output};

fn llproj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_llproj"))
        .args(args)
        .env_remove("LLPROJ_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn converge_mms_writes_table_with_order_footer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = llproj(&[
        "converge-mms",
        "--nx",
        "20,40,80",
        "--dt",
        "1/20,1/40,1/80",
        "--t_final",
        "0.5",
        "--out_table",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "k,h,err_inf,err_l2,err_h1");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("order,,"));

    let fit = llproj(&["fit-order", out.to_str().unwrap(), "--column", "err_l2"]);
    assert!(fit.status.success());
    let p: f64 = stdout(&fit).trim().parse().unwrap();
    assert!((1.5..2.5).contains(&p), "order {p}");
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.cfg");
    fs::write(&cfg, "dt = 0.25, 0.125\nnx = 4, 8\nt_final = 0.5\n").unwrap();
    let out = dir.path().join("s.csv");
    let o = llproj(&[
        "stability",
        "--config",
        cfg.to_str().unwrap(),
        "--out_table",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = fs::read_to_string(&out).unwrap().lines().count();
    assert_eq!(rows, 1 + 4);
}

#[test]
fn run_exports_field() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("m.csv");
    let o = llproj(&[
        "run",
        "--dim",
        "3",
        "--nx",
        "4",
        "--dt",
        "0.1",
        "--t_final",
        "0.2",
        "--out_field",
        field.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("err_inf"));
    let text = fs::read_to_string(&field).unwrap();
    assert!(text.starts_with("i,j,k,x,y,z,u,v,w\n"));
    assert_eq!(text.lines().count(), 1 + 64);
}

#[test]
fn bad_input_exits_with_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "nx = 10\nspeed = 3\n").unwrap();
    let o = llproj(&["converge-mms", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("speed"));

    let o = llproj(&["converge-mms", "--mode", "stability-1d"]);
    assert!(!o.status.success());
    let o = llproj(&["converge-mms", "--alpha", "-1", "--nx", "10", "--dt", "0.1"]);
    assert!(!o.status.success());
    let o = llproj(&["fit-order", dir.path().join("none.csv").to_str().unwrap()]);
    assert!(!o.status.success());
}
