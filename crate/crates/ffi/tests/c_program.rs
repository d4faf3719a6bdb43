//! Compiles a C program against the generated header and the static
//! library, then runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

fn target_dir() -> PathBuf {
    // <target>/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "lungref.h"

int main(int argc, char **argv) {
    double z = 0.0, q = 0.0;
    if (lungref_normal_quantile(0.05, &q) != LUNGREF_STATUS_OK) return 10;
    if (fabs(q + 1.6448536269514722) > 1e-12) return 11;
    if (lungref_bccg_quantile(0.05, 3.0, 0.12, -0.5, &q) != LUNGREF_STATUS_OK) return 12;
    if (lungref_bccg_zscore(q, 3.0, 0.12, -0.5, &z) != LUNGREF_STATUS_OK) return 13;
    if (fabs(z + 1.6448536269514722) > 1e-10) return 14;
    if (lungref_bccg_zscore(1.0, -3.0, 0.12, 0.0, &z) != LUNGREF_STATUS_DOMAIN) return 15;
    if (lungref_last_error_message() == NULL) return 16;

    LungrefGamlssModel *m = NULL;
    if (lungref_gamlss_load(argv[1], &m) != LUNGREF_STATUS_OK) {
        fprintf(stderr, "%s\n", lungref_last_error_message());
        return 17;
    }
    double mu, sigma, nu, lln;
    if (lungref_gamlss_predict(m, 40.0, 165.0, NAN, &mu, &sigma, &nu) != LUNGREF_STATUS_OK) return 18;
    if (lungref_gamlss_zscore(m, 40.0, 165.0, NAN, mu, &z) != LUNGREF_STATUS_OK || fabs(z) > 1e-12) return 19;
    if (lungref_gamlss_lln(m, 40.0, 165.0, NAN, 0.05, &lln) != LUNGREF_STATUS_OK || !(lln < mu)) return 20;
    lungref_gamlss_free(m);
    printf("%s ok\n", lungref_version());
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler ({cc}); C linkage check not run");
        return;
    }
    let lib = target_dir().join("liblungref_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();

    use lungref::data::{Response, Sex};
    use lungref::gamlss::{fit_gamlss, information_criteria, GamlssSpec};
    use lungref::pipeline::io::{write_json, GamlssModelFile};
    use lungref::synthetic::{generate, skew_lung};
    let d = generate(&skew_lung().single_sex(Sex::F).with_seed(9), 1000).unwrap();
    let g = fit_gamlss(&d.observations, Response::Fvc, &GamlssSpec::default()).unwrap();
    let model_path = dir.path().join("model.json");
    write_json(
        &model_path,
        &GamlssModelFile {
            response: Response::Fvc,
            stratum: "F".into(),
            information_criteria: information_criteria(&g),
            model: g,
        },
    )
    .unwrap();

    let exe = dir.path().join("prog");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).arg(&model_path).output().unwrap();
    assert!(
        out.status.success(),
        "C program failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).ends_with("ok\n"));
}
