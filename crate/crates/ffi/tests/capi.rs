use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use fedgmc_ffi::*;

const SMALL: &str = "[data]\nnum_nodes = 120\n[federation]\nclients = 3\nrounds = 2\nbatch_size = 8\n";

fn last_error() -> String {
    let p = fedgmc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn parse(text: &str) -> *mut FedgmcConfig {
    let text = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { fedgmc_config_parse(text.as_ptr(), &mut cfg) }, FedgmcStatus::Ok);
    assert!(!cfg.is_null());
    cfg
}

#[test]
fn run_and_query() {
    unsafe {
        let cfg = parse(SMALL);
        let mut run = ptr::null_mut();
        assert_eq!(fedgmc_run(cfg, 1, &mut run), FedgmcStatus::Ok);
        assert!(fedgmc_last_error().is_null());
        assert_eq!(fedgmc_run_num_rounds(run), 2);
        assert_eq!(fedgmc_run_num_clients(run), 3);

        let (mut val, mut test) = (f64::NAN, f64::NAN);
        let mut sum = 0.0;
        for m in 0..3 {
            assert_eq!(fedgmc_run_client_metrics(run, 2, m, &mut val, &mut test), FedgmcStatus::Ok);
            assert!((0.0..=1.0).contains(&val) && (0.0..=1.0).contains(&test));
            sum += test;
        }
        let mut mean = f64::NAN;
        assert_eq!(fedgmc_run_final_mean_test(run, &mut mean), FedgmcStatus::Ok);
        assert!((mean - sum / 3.0).abs() < 1e-12);

        assert_eq!(
            fedgmc_run_client_metrics(run, 0, 0, &mut val, &mut test),
            FedgmcStatus::InvalidArgument
        );
        assert_eq!(
            fedgmc_run_client_metrics(run, 3, 0, &mut val, &mut test),
            FedgmcStatus::InvalidArgument
        );
        assert!(last_error().contains("round 3"));

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("h.csv").to_str().unwrap()).unwrap();
        assert_eq!(fedgmc_run_write_history(run, path.as_ptr()), FedgmcStatus::Ok);
        let rows = fedgmc::fedsim::read_history(&dir.path().join("h.csv")).unwrap();
        assert_eq!(rows.len(), 6);

        fedgmc_run_free(run);
        fedgmc_config_free(cfg);
    }
}

#[test]
fn same_config_same_history_across_threads() {
    unsafe {
        let cfg = parse(SMALL);
        assert_eq!(fedgmc_config_set_seed(cfg, 11), FedgmcStatus::Ok);
        let dir = tempfile::tempdir().unwrap();
        let mut texts = Vec::new();
        for threads in [1, 4] {
            let mut run = ptr::null_mut();
            assert_eq!(fedgmc_run(cfg, threads, &mut run), FedgmcStatus::Ok);
            let p = dir.path().join(format!("h{threads}.csv"));
            let cp = CString::new(p.to_str().unwrap()).unwrap();
            assert_eq!(fedgmc_run_write_history(run, cp.as_ptr()), FedgmcStatus::Ok);
            texts.push(std::fs::read(p).unwrap());
            fedgmc_run_free(run);
        }
        assert_eq!(texts[0], texts[1]);
        fedgmc_config_free(cfg);
    }
}

#[test]
fn errors_have_codes_and_messages() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let bad = CString::new("[federation]\nrouns = 1").unwrap();
        assert_eq!(fedgmc_config_parse(bad.as_ptr(), &mut cfg), FedgmcStatus::Config);
        assert!(cfg.is_null());
        assert!(last_error().contains("rouns"));

        assert_eq!(fedgmc_config_parse(ptr::null(), &mut cfg), FedgmcStatus::NullPointer);
        assert_eq!(fedgmc_config_parse(bad.as_ptr(), ptr::null_mut()), FedgmcStatus::NullPointer);

        let not_utf8 = [0xffu8, 0xfe, 0];
        assert_eq!(
            fedgmc_config_parse(not_utf8.as_ptr().cast(), &mut cfg),
            FedgmcStatus::InvalidArgument
        );

        let cfg = fedgmc_config_default();
        let abl = CString::new("semantic,everything").unwrap();
        assert_eq!(fedgmc_config_set_ablation(cfg, abl.as_ptr()), FedgmcStatus::Config);
        let abl = CString::new("local").unwrap();
        assert_eq!(fedgmc_config_set_ablation(cfg, abl.as_ptr()), FedgmcStatus::Ok);
        assert_eq!(fedgmc_config_set_rounds(ptr::null_mut(), 3), FedgmcStatus::NullPointer);

        let no_paths = CString::new("[data]\nsource = \"files\"\n").unwrap();
        let mut other = ptr::null_mut();
        assert_eq!(fedgmc_config_parse(no_paths.as_ptr(), &mut other), FedgmcStatus::Config);
        assert!(last_error().contains("data.edges"));
        fedgmc_config_free(cfg);

        let mut run = ptr::null_mut();
        assert_eq!(fedgmc_run(ptr::null(), 0, &mut run), FedgmcStatus::NullPointer);
        assert!(run.is_null());
        assert_eq!(fedgmc_run_num_rounds(ptr::null()), 0);
        fedgmc_run_free(ptr::null_mut());
        fedgmc_config_free(ptr::null_mut());
    }
}

fn target_dir() -> PathBuf {
    // .../target/<profile>/deps/capi-<hash>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let header_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(header_dir.join("fedgmc.h")).unwrap();
    for f in ["fedgmc_config_parse", "fedgmc_run", "fedgmc_run_free", "fedgmc_last_error"] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    let lib = target_dir().join("libfedgmc_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.is_file() {
        eprintln!("skipping C link check: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "fedgmc.h"
int main(void) {
    FedgmcConfig *cfg = NULL;
    if (fedgmc_config_parse("[data]\nnum_nodes = 60\n[federation]\nclients = 2\nrounds = 1\nbatch_size = 4\n", &cfg) != FEDGMC_STATUS_OK) return 1;
    FedgmcRun *run = NULL;
    if (fedgmc_run(cfg, 1, &run) != FEDGMC_STATUS_OK) { fprintf(stderr, "%s\n", fedgmc_last_error()); return 2; }
    double mean = -1.0;
    if (fedgmc_run_final_mean_test(run, &mean) != FEDGMC_STATUS_OK) return 3;
    FedgmcConfig *bad = NULL;
    if (fedgmc_config_parse("nonsense = 1", &bad) != FEDGMC_STATUS_CONFIG || bad != NULL || fedgmc_last_error() == NULL) return 4;
    printf("rounds=%u clients=%u ok=%d\n", fedgmc_run_num_rounds(run), fedgmc_run_num_clients(run), mean >= 0.0 && mean <= 1.0);
    fedgmc_run_free(run);
    fedgmc_config_free(cfg);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("capi_demo");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C program failed to build");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{out:?}");
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "rounds=1 clients=2 ok=1");
}
