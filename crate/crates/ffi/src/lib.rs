//! C ABI over the simulator.
//!
//! Objects are opaque heap handles created by `*_new`/`*_parse` style calls
//! and released with the matching `*_free`. Every fallible function returns a
//! [`ChimpsStatus`]; on failure a message is kept per thread and can be read
//! with [`chimps_last_error`]. Complex matrices are passed as interleaved
//! `(re, im)` doubles in row-major order. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chimps::circuit::{brick_1d, named_gate};
use chimps::gte::estimate_f_gte;
use chimps::mps::EntryKind;
use chimps::{Circuit, Error, MpsState, C64};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChimpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    OutOfRange = 4,
    NonUnitary = 5,
    Numeric = 6,
    Parse = 7,
    Io = 8,
    Panic = 9,
}

/// Matrix product state handle.
pub struct ChimpsMps(MpsState);

/// Circuit handle.
pub struct ChimpsCircuit(Circuit);

/// One truncation record.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChimpsLogEntry {
    pub ordinal: u64,
    pub qubit_a: u64,
    pub qubit_b: u64,
    pub site: u64,
    pub depth: u64,
    pub f: f64,
    /// 0 for a gate, 1 for a regrouping split.
    pub kind: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ChimpsStatus {
    match e {
        Error::Dimension(_) | Error::LengthMismatch { .. } | Error::Capacity { .. } => ChimpsStatus::Dimension,
        Error::OutOfRange { .. } => ChimpsStatus::OutOfRange,
        Error::NonUnitary { .. } => ChimpsStatus::NonUnitary,
        Error::Numeric { .. } => ChimpsStatus::Numeric,
        Error::Parse { .. } => ChimpsStatus::Parse,
        Error::Io(_) => ChimpsStatus::Io,
        _ => ChimpsStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ChimpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ChimpsStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            ChimpsStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            ChimpsStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Lib(Error::Invalid(format!("{what} is not UTF-8"))))
}

unsafe fn complex_matrix(p: *const f64, dim: usize) -> Result<Vec<C64>, Failure> {
    if p.is_null() {
        return Err(Failure::Null("matrix"));
    }
    let raw = std::slice::from_raw_parts(p, 2 * dim * dim);
    Ok(raw.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn chimps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates `|0...0>` on `n_qubits` qubits with bond cap `chi_max`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn chimps_mps_new(n_qubits: usize, chi_max: usize, out: *mut *mut ChimpsMps) -> ChimpsStatus {
    guard(|| {
        let state = MpsState::zero(n_qubits, chi_max)?;
        write(out, Box::into_raw(Box::new(ChimpsMps(state))), "out")
    })
}

/// # Safety
/// `mps` must come from `chimps_mps_new` and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn chimps_mps_free(mps: *mut ChimpsMps) {
    if !mps.is_null() {
        drop(Box::from_raw(mps));
    }
}

/// # Safety
/// `mps` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn chimps_mps_n_qubits(mps: *const ChimpsMps, out: *mut usize) -> ChimpsStatus {
    guard(|| write(out, as_ref(mps, "mps")?.0.n_qubits(), "out"))
}

/// Applies a 2x2 unitary (8 doubles) to `site`.
///
/// # Safety
/// `mps` must be a live handle and `matrix` point to 8 doubles.
#[no_mangle]
pub unsafe extern "C" fn chimps_mps_apply_1q(mps: *mut ChimpsMps, matrix: *const f64, site: usize) -> ChimpsStatus {
    guard(|| {
        let u = complex_matrix(matrix, 2)?;
        Ok(as_mut(mps, "mps")?.0.apply_1q(&u, site)?)
    })
}

/// Applies a 4x4 unitary (32 doubles) to sites `site, site + 1` and writes
/// the truncation fidelity to `f_out` when it is not null.
///
/// # Safety
/// `mps` must be a live handle, `matrix` point to 32 doubles and `f_out` be
/// null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn chimps_mps_apply_2q(
    mps: *mut ChimpsMps,
    matrix: *const f64,
    site: usize,
    f_out: *mut f64,
) -> ChimpsStatus {
    guard(|| {
        let u = complex_matrix(matrix, 4)?;
        let f = as_mut(mps, "mps")?.0.apply_2q(&u, site)?;
        if !f_out.is_null() {
            f_out.write(f);
        }
        Ok(())
    })
}

/// Runs every gate of `circuit` on the state.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn chimps_mps_run_circuit(mps: *mut ChimpsMps, circuit: *const ChimpsCircuit) -> ChimpsStatus {
    guard(|| {
        let c = &as_ref(circuit, "circuit")?.0;
        Ok(as_mut(mps, "mps")?.0.run_circuit(c)?)
    })
}

/// Amplitude of the basis state `bits` (one byte per qubit, 0 or 1).
///
/// # Safety
/// `mps` must be a live handle, `bits` point to `len` bytes and the outputs
/// be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chimps_mps_amplitude(
    mps: *const ChimpsMps,
    bits: *const u8,
    len: usize,
    re_out: *mut f64,
    im_out: *mut f64,
) -> ChimpsStatus {
    guard(|| {
        if bits.is_null() {
            return Err(Failure::Null("bits"));
        }
        let bits = std::slice::from_raw_parts(bits, len);
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Invalid("bits must be 0 or 1".into()).into());
        }
        let a = as_ref(mps, "mps")?.0.amplitude(bits)?;
        write(re_out, a.re, "re_out")?;
        write(im_out, a.im, "im_out")
    })
}

/// Von Neumann entropy across the bond left of qubit `cut`.
///
/// # Safety
/// `mps` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn chimps_mps_entropy(mps: *mut ChimpsMps, cut: usize, out: *mut f64) -> ChimpsStatus {
    guard(|| {
        let s = as_mut(mps, "mps")?.0.entropy(cut)?;
        write(out, s, "out")
    })
}

/// Product of all logged truncation fidelities.
///
/// # Safety
/// `mps` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn chimps_mps_estimated_fidelity(mps: *const ChimpsMps, out: *mut f64) -> ChimpsStatus {
    guard(|| write(out, as_ref(mps, "mps")?.0.log().estimated_fidelity(), "out"))
}

/// # Safety
/// `mps` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn chimps_mps_log_len(mps: *const ChimpsMps, out: *mut usize) -> ChimpsStatus {
    guard(|| write(out, as_ref(mps, "mps")?.0.log().len(), "out"))
}

/// Copies log entry `index` into `out`.
///
/// # Safety
/// `mps` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn chimps_mps_log_entry(mps: *const ChimpsMps, index: usize, out: *mut ChimpsLogEntry) -> ChimpsStatus {
    guard(|| {
        let log = as_ref(mps, "mps")?.0.log();
        let e = log
            .entries()
            .get(index)
            .ok_or(Error::OutOfRange { what: "log", index, size: log.len() })?;
        let entry = ChimpsLogEntry {
            ordinal: e.ordinal as u64,
            qubit_a: e.qubits.0 as u64,
            qubit_b: e.qubits.1 as u64,
            site: e.site as u64,
            depth: e.depth as u64,
            f: e.f,
            kind: match e.kind {
                EntryKind::Gate => 0,
                EntryKind::Regroup => 1,
            },
        };
        write(out, entry, "out")
    })
}

/// Seeded brick-wall circuit on a chain with two-qubit gate `gate` (e.g.
/// `"CZ"`, `"iSWAP"`, `"iS_pi/6"`).
///
/// # Safety
/// `gate` must be a nul-terminated string and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn chimps_circuit_brick_1d(
    n_qubits: usize,
    depth: usize,
    seed: u64,
    gate: *const c_char,
    out: *mut *mut ChimpsCircuit,
) -> ChimpsStatus {
    guard(|| {
        let c = brick_1d(n_qubits, depth, seed, str_arg(gate, "gate")?)?;
        write(out, Box::into_raw(Box::new(ChimpsCircuit(c))), "out")
    })
}

/// Parses the text circuit format.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn chimps_circuit_parse(text: *const c_char, out: *mut *mut ChimpsCircuit) -> ChimpsStatus {
    guard(|| {
        let c = Circuit::from_text(str_arg(text, "text")?)?;
        write(out, Box::into_raw(Box::new(ChimpsCircuit(c))), "out")
    })
}

/// Serializes a circuit; release the string with `chimps_string_free`.
///
/// # Safety
/// `circuit` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn chimps_circuit_to_text(circuit: *const ChimpsCircuit, out: *mut *mut c_char) -> ChimpsStatus {
    guard(|| {
        let text = as_ref(circuit, "circuit")?.0.to_text();
        let c = CString::new(text).map_err(|_| Error::Invalid("circuit text contains nul".into()))?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `circuit` must be a live handle; both outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chimps_circuit_info(
    circuit: *const ChimpsCircuit,
    n_qubits_out: *mut usize,
    two_qubit_gates_out: *mut usize,
) -> ChimpsStatus {
    guard(|| {
        let c = &as_ref(circuit, "circuit")?.0;
        write(n_qubits_out, c.n_qubits, "n_qubits_out")?;
        write(two_qubit_gates_out, c.two_qubit_gate_count(), "two_qubit_gates_out")
    })
}

/// # Safety
/// `circuit` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn chimps_circuit_free(circuit: *mut ChimpsCircuit) {
    if !circuit.is_null() {
        drop(Box::from_raw(circuit));
    }
}

/// # Safety
/// `s` must be a string returned by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn chimps_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Gaussian tensor ensemble estimate of the per-gate truncation fidelity.
///
/// # Safety
/// `gate` must be a nul-terminated string; outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn chimps_gte_estimate(
    gate: *const c_char,
    chi: usize,
    beta: usize,
    trials: usize,
    seed: u64,
    mean_out: *mut f64,
    stderr_out: *mut f64,
) -> ChimpsStatus {
    guard(|| {
        let g = named_gate(str_arg(gate, "gate")?)?;
        let e = estimate_f_gte(&g, chi, beta, trials, seed)?;
        write(mean_out, e.mean, "mean_out")?;
        write(stderr_out, e.stderr, "stderr_out")
    })
}
