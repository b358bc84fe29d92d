#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hatebench::scenarios::{list_manifests, RunManifest};

/// Fixed clock for reproducible run ids.
pub const EPOCH: &str = "1700000000";

pub fn toy_fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy")
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name();
        if name == "runs" || name == "corpus" || name == "golden" {
            continue;
        }
        let target = to.join(&name);
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), &target).unwrap();
        }
    }
}

/// A private copy of the toy fixtures in a temporary directory.
pub struct Toy {
    dir: tempfile::TempDir,
}

impl Toy {
    pub fn new() -> Toy {
        let dir = tempfile::tempdir().unwrap();
        copy_dir(&toy_fixtures(), dir.path());
        Toy { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.path().join("runs")
    }

    fn command(&self, args: &[&str]) -> Command {
        let mut c = Command::new(env!("CARGO_BIN_EXE_hatebench"));
        c.current_dir(self.path()).args(args);
        for (k, _) in std::env::vars() {
            if k.starts_with("HATEBENCH_") {
                c.env_remove(k);
            }
        }
        c
    }

    /// Runs the binary with the fixed clock.
    pub fn cli(&self, args: &[&str]) -> Output {
        self.command(args).env("SOURCE_DATE_EPOCH", EPOCH).output().unwrap()
    }

    /// Runs the binary on the real clock.
    pub fn cli_now(&self, args: &[&str]) -> Output {
        self.command(args).env_remove("SOURCE_DATE_EPOCH").output().unwrap()
    }

    /// Runs with extra environment variables.
    pub fn cli_env(&self, args: &[&str], env: &[(&str, &str)]) -> Output {
        let mut c = self.command(args);
        c.env("SOURCE_DATE_EPOCH", EPOCH);
        for (k, v) in env {
            c.env(k, v);
        }
        c.output().unwrap()
    }

    pub fn manifests(&self) -> Vec<RunManifest> {
        list_manifests(&self.runs_dir()).unwrap()
    }

    pub fn write(&self, rel: &str, body: &str) -> PathBuf {
        let p = self.path().join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(&p, body).unwrap();
        p
    }
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[track_caller]
pub fn ok(o: &Output) -> String {
    assert_eq!(o.status.code(), Some(0), "stdout:\n{}\nstderr:\n{}", stdout(o), stderr(o));
    stdout(o)
}

pub const ALL_SCENARIOS: [&str; 4] = [
    "scenarios/monolingual.toml",
    "scenarios/multilingual.toml",
    "scenarios/family.toml",
    "scenarios/family_solo.toml",
];
