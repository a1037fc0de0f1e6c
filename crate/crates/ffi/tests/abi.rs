//! Calls through the C ABI, from Rust and from a C program built against the
//! generated header.

use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use chimps::circuit::{brick_1d, named_gate};
use chimps::{MpsState, C64};
use chimps_ffi::*;

fn interleave(m: &[C64]) -> Vec<f64> {
    m.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(chimps_last_error()).to_string_lossy().into_owned() }
}

#[test]
fn handles_reproduce_the_library() {
    unsafe {
        let gate = CString::new("iSWAP").unwrap();
        let mut c = ptr::null_mut();
        assert_eq!(chimps_circuit_brick_1d(8, 10, 3, gate.as_ptr(), &mut c), ChimpsStatus::Ok);
        let mut m = ptr::null_mut();
        assert_eq!(chimps_mps_new(8, 4, &mut m), ChimpsStatus::Ok);
        assert_eq!(chimps_mps_run_circuit(m, c), ChimpsStatus::Ok);

        let mut direct = MpsState::zero(8, 4).unwrap();
        direct.run_circuit(&brick_1d(8, 10, 3, "iSWAP").unwrap()).unwrap();

        let mut f = 0.0;
        assert_eq!(chimps_mps_estimated_fidelity(m, &mut f), ChimpsStatus::Ok);
        assert_eq!(f, direct.log().estimated_fidelity());

        let mut len = 0;
        assert_eq!(chimps_mps_log_len(m, &mut len), ChimpsStatus::Ok);
        assert_eq!(len, direct.log().len());
        for (i, e) in direct.log().entries().iter().enumerate() {
            let mut got = ChimpsLogEntry::default();
            assert_eq!(chimps_mps_log_entry(m, i, &mut got), ChimpsStatus::Ok);
            assert_eq!((got.ordinal as usize, got.site as usize, got.depth as usize, got.f), (e.ordinal, e.site, e.depth, e.f));
        }

        let bits = [1u8, 0, 1, 1, 0, 0, 1, 0];
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(chimps_mps_amplitude(m, bits.as_ptr(), 8, &mut re, &mut im), ChimpsStatus::Ok);
        assert_eq!(C64::new(re, im), direct.amplitude(&bits).unwrap());

        let mut s = 0.0;
        assert_eq!(chimps_mps_entropy(m, 4, &mut s), ChimpsStatus::Ok);
        assert!((s - direct.entropy(4).unwrap()).abs() < 1e-12);

        chimps_mps_free(m);
        chimps_circuit_free(c);
    }
}

#[test]
fn gates_apply_through_interleaved_matrices() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(chimps_mps_new(3, 4, &mut m), ChimpsStatus::Ok);
        let h = interleave(&named_gate("H").unwrap().matrix);
        let cx = interleave(&named_gate("CX").unwrap().matrix);
        assert_eq!(chimps_mps_apply_1q(m, h.as_ptr(), 0), ChimpsStatus::Ok);
        let mut f = 0.0;
        assert_eq!(chimps_mps_apply_2q(m, cx.as_ptr(), 0, &mut f), ChimpsStatus::Ok);
        assert_eq!(f, 1.0);
        assert_eq!(chimps_mps_apply_2q(m, cx.as_ptr(), 1, ptr::null_mut()), ChimpsStatus::Ok);
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(chimps_mps_amplitude(m, [1u8, 1, 1].as_ptr(), 3, &mut re, &mut im), ChimpsStatus::Ok);
        assert!((re - 0.5f64.sqrt()).abs() < 1e-12 && im.abs() < 1e-12);
        chimps_mps_free(m);
    }
}

#[test]
fn failures_return_codes_and_messages() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(chimps_mps_new(4, 0, &mut m), ChimpsStatus::InvalidArgument);
        assert!(m.is_null());
        assert_eq!(chimps_mps_new(4, 2, ptr::null_mut()), ChimpsStatus::NullPointer);
        assert!(last_error().contains("out"));

        assert_eq!(chimps_mps_new(4, 2, &mut m), ChimpsStatus::Ok);
        let not_unitary = [1.0; 8];
        assert_eq!(chimps_mps_apply_1q(m, not_unitary.as_ptr(), 0), ChimpsStatus::NonUnitary);
        let mut s = 0.0;
        assert_eq!(chimps_mps_entropy(m, 9, &mut s), ChimpsStatus::OutOfRange);
        assert_eq!(chimps_mps_amplitude(m, [2u8, 0, 0, 0].as_ptr(), 4, &mut s, &mut s), ChimpsStatus::InvalidArgument);
        let mut e = ChimpsLogEntry::default();
        assert_eq!(chimps_mps_log_entry(m, 0, &mut e), ChimpsStatus::OutOfRange);
        chimps_mps_free(m);

        let text = CString::new("not a circuit").unwrap();
        let mut c = ptr::null_mut();
        assert_eq!(chimps_circuit_parse(text.as_ptr(), &mut c), ChimpsStatus::Parse);
        assert!(last_error().contains("line"));

        let gate = CString::new("nope").unwrap();
        let (mut mean, mut err) = (0.0, 0.0);
        assert_eq!(chimps_gte_estimate(gate.as_ptr(), 4, 1, 2, 1, &mut mean, &mut err), ChimpsStatus::InvalidArgument);
        chimps_mps_free(ptr::null_mut());
        chimps_circuit_free(ptr::null_mut());
        chimps_string_free(ptr::null_mut());
    }
}

#[test]
fn circuit_text_round_trips() {
    unsafe {
        let gate = CString::new("CZ").unwrap();
        let mut c = ptr::null_mut();
        assert_eq!(chimps_circuit_brick_1d(6, 5, 2, gate.as_ptr(), &mut c), ChimpsStatus::Ok);
        let mut text = ptr::null_mut();
        assert_eq!(chimps_circuit_to_text(c, &mut text), ChimpsStatus::Ok);
        let expected = brick_1d(6, 5, 2, "CZ").unwrap().to_text();
        assert_eq!(CStr::from_ptr(text).to_str().unwrap(), expected);
        let mut back = ptr::null_mut();
        assert_eq!(chimps_circuit_parse(text, &mut back), ChimpsStatus::Ok);
        let (mut n, mut g) = (0, 0);
        assert_eq!(chimps_circuit_info(back, &mut n, &mut g), ChimpsStatus::Ok);
        assert_eq!((n, g), (6, 13));
        chimps_string_free(text);
        chimps_circuit_free(back);
        chimps_circuit_free(c);
    }
}

#[test]
fn gte_estimate_matches_the_library() {
    let gate = CString::new("CZ").unwrap();
    let (mut mean, mut err) = (0.0, 0.0);
    let status = unsafe { chimps_gte_estimate(gate.as_ptr(), 8, 1, 6, 4, &mut mean, &mut err) };
    assert_eq!(status, ChimpsStatus::Ok);
    let e = chimps::gte::estimate_f_gte(&named_gate("CZ").unwrap(), 8, 1, 6, 4).unwrap();
    assert_eq!((mean, err), (e.mean, e.stderr));
}

/// Directory holding the static library built alongside this test.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = artifact_dir().join("libchimps_ffi.a");
    let out_dir = tempfile::tempdir().unwrap();
    let exe = out_dir.path().join("smoke");
    let mut cc = Command::new("cc");
    cc.arg("-std=c99").arg("-Wall").arg("-Werror").arg("-I").arg(root.join("include")).arg(root.join("tests/c/smoke.c"));
    if !lib.exists() {
        // without the archive, still make sure the header compiles
        let status = cc.arg("-fsyntax-only").status().expect("C compiler");
        assert!(status.success());
        return;
    }
    let status = cc.arg(&lib).args(["-lpthread", "-ldl", "-lm", "-o"]).arg(&exe).status().expect("C compiler");
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.starts_with("n=10 gates=54 entries=54"), "{stdout}");
}
