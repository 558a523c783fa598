#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn vstent() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vstent"))
}

pub fn run(args: &[&str]) -> Output {
    vstent().args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Write a built-in vessel into `dir`; returns (mesh, centerline).
pub fn fixture(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    let out = run(&["fixture", name, "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    (
        dir.join(format!("{name}.vtp")),
        dir.join(format!("{name}_centerline.vtp")),
    )
}

/// Reference deployment of the stenotic tube: 6 mm stent over 20-40 mm.
pub fn deploy_tube(mesh: &Path, centerline: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "deploy",
        "--mesh",
        mesh.to_str().unwrap(),
        "--centerline",
        centerline.to_str().unwrap(),
        "--start-path",
        "0",
        "--start-arc",
        "40",
        "--end-path",
        "0",
        "--end-arc",
        "20",
        "--diameter",
        "6",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}
