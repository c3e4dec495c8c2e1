//! The generated header must compile as C and C++, and a small C client must
//! link against the static library and run.

use std::path::{Path, PathBuf};
use std::process::Command;

fn header_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

fn cc() -> String {
    std::env::var("CC").unwrap_or_else(|_| "cc".into())
}

/// `target/<profile>`, found from the test executable in `.../deps/`.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_has_entry_points() {
    let h = std::fs::read_to_string(header_dir().join("chemlab.h")).unwrap();
    for sym in [
        "chemlab_last_error",
        "chemlab_config_parse",
        "chemlab_config_load",
        "chemlab_config_free",
        "chemlab_simulate",
        "chemlab_run_summary",
        "chemlab_run_profile",
        "chemlab_run_free",
        "chemlab_kinetics_eval",
        "CHEMLAB_STATUS_INVALID",
        "typedef struct ChemlabRun ChemlabRun;",
    ] {
        assert!(h.contains(sym), "header lacks {sym}");
    }
}

#[test]
fn header_compiles_as_c_and_cxx() {
    let h = header_dir().join("chemlab.h");
    for (lang, std) in [("c", "-std=c99"), ("c++", "-std=c++11")] {
        let out = Command::new(cc())
            .args(["-x", lang, std, "-Wall", "-Werror", "-fsyntax-only"])
            .arg(&h)
            .output()
            .expect("a C compiler on PATH");
        assert!(out.status.success(), "{lang}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

const CLIENT: &str = r#"
#include <stdio.h>
#include <string.h>
#include "chemlab.h"

int main(void) {
    const char *text =
        "[model]\nn = 2\nR = 1.0\nalpha = 0.0\nbeta = 0.5\n"
        "[grid]\ncells = 64\n[time]\nt_end = 0.05\n[init]\nm = 1.0\n";
    ChemlabConfig *cfg = NULL;
    if (chemlab_config_parse(text, &cfg) != CHEMLAB_STATUS_OK) return 10;
    ChemlabRun *run = NULL;
    if (chemlab_simulate(cfg, &run) != CHEMLAB_STATUS_OK) return 11;
    ChemlabSummary s;
    if (chemlab_run_summary(run, &s) != CHEMLAB_STATUS_OK) return 12;
    if (s.outcome != CHEMLAB_OUTCOME_COMPLETED) return 13;
    size_t n = chemlab_run_cells(run);
    double u[64];
    if (n != 64 || chemlab_run_profile(run, CHEMLAB_FIELD_U, u, n) != CHEMLAB_STATUS_OK) return 14;
    printf("steps=%llu sup_u=%.6e\n", (unsigned long long)s.steps, s.sup_u_final);
    chemlab_run_free(run);
    chemlab_config_free(cfg);

    ChemlabConfig *bad = NULL;
    if (chemlab_config_parse("[model]\nn = 0\n", &bad) != CHEMLAB_STATUS_INVALID) return 15;
    if (bad != NULL || chemlab_last_error() == NULL) return 16;
    printf("error=%s\n", chemlab_last_error());
    return 0;
}
"#;

#[test]
fn c_client_links_and_runs() {
    let lib = profile_dir().join("libchemlab_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let exe = dir.path().join("client");
    std::fs::write(&src, CLIENT).unwrap();
    let out = Command::new(cc())
        .arg("-std=c99")
        .arg("-I")
        .arg(header_dir())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "link: {}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "client exit {:?}: {stdout}", run.status.code());
    assert!(stdout.contains("steps="));
    assert!(stdout.contains("error="));
}
