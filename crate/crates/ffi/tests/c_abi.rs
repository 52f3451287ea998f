use std::path::{Path, PathBuf};
use std::process::Command;

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok())
}

fn staticlib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("libplanspace_ffi.a");
    // `cargo test` does not rebuild the archive; only link a fresh one.
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs");
    let fresh = lib.metadata().ok()?.modified().ok()? >= src.metadata().ok()?.modified().ok()?;
    fresh.then_some(lib)
}

#[test]
fn header_compiles_and_links() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler, skipped");
        return;
    };
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let out = tempfile_dir().join("smoke");
    let mut cmd = Command::new(cc);
    cmd.arg("-std=c99").arg("-Wall").arg("-Werror").arg("-I").arg(dir.join("include")).arg(dir.join("tests/smoke.c"));
    match staticlib() {
        Some(lib) => {
            cmd.arg(lib).args(["-lpthread", "-ldl", "-lm"]).arg("-o").arg(&out);
        }
        None => {
            cmd.arg("-fsyntax-only");
        }
    }
    let status = cmd.status().expect("compiler runs");
    assert!(status.success(), "C smoke program failed to build");
    eprintln!("linked: {}", out.exists());
    if out.exists() {
        let run = Command::new(&out).output().expect("smoke program runs");
        assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr));
        assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
    }
}

fn tempfile_dir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("planspace-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
