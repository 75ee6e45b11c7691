//! C interface to `blindqc`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` or
//! `*_from_json` and released with the matching `*_free`. Every fallible call
//! returns a [`BqcStatus`]; on failure [`bqc_last_error`] describes what went
//! wrong on the calling thread. Strings returned through out-parameters are
//! owned by the caller and released with [`bqc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use blindqc::analysis::{blindness_enumeration, detection_rate, BlindnessParams};
use blindqc::mbqc::{output_distribution, Computation};
use blindqc::parties::{
    exact_with_retries, run_with_retries, PaddingStrategy, ProtocolResult, RunConfig, Strategy,
    Variant, MAX_ATTEMPTS,
};
use blindqc::seed::SeedTree;
use blindqc::Angle;

/// Largest number of branches an exact distribution may enumerate.
pub const BQC_EXACT_BUDGET: usize = 1 << 20;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BqcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    ProtocolFault = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BqcVariant {
    Bfk = 0,
    Double = 1,
    Triple = 2,
    Single = 3,
    SingleClassical = 4,
}

/// Counts from repeated decoy checks against a Bell-guessing server.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BqcDetection {
    pub trials: u64,
    pub caught: u64,
    pub accepted_incorrect: u64,
    pub checked: u64,
    pub mismatches: u64,
}

pub struct BqcComputation(Computation);

pub struct BqcConfig(RunConfig);

pub struct BqcRunResult(ProtocolResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(BqcStatus, String);

impl Failure {
    fn input(e: impl ToString) -> Self {
        Failure(BqcStatus::InvalidInput, e.to_string())
    }

    fn protocol(e: impl ToString) -> Self {
        Failure(BqcStatus::ProtocolFault, e.to_string())
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BqcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            BqcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            BqcStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(BqcStatus::NullPointer, format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(BqcStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(BqcStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(
            BqcStatus::NullPointer,
            "output pointer is null".into(),
        ));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn store_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(
            BqcStatus::NullPointer,
            "output pointer is null".into(),
        ));
    }
    *out = CString::new(s).map_err(Failure::input)?.into_raw();
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn bqc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn bqc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bqc_computation_from_json(
    json: *const c_char,
    out: *mut *mut BqcComputation,
) -> BqcStatus {
    guard(|| {
        let comp = Computation::from_json(text(json, "json")?).map_err(Failure::input)?;
        store(out, BqcComputation(comp))
    })
}

/// Linear cluster of `len + 1` vertices measured at `angles[i]·π/4`.
///
/// # Safety
/// `angles` must point to `len` values (or be NULL with `len == 0`).
#[no_mangle]
pub unsafe extern "C" fn bqc_computation_linear(
    angles: *const i64,
    len: usize,
    out: *mut *mut BqcComputation,
) -> BqcStatus {
    guard(|| {
        let ks: &[i64] = if len == 0 {
            &[]
        } else {
            if angles.is_null() {
                return Err(Failure(BqcStatus::NullPointer, "angles is null".into()));
            }
            std::slice::from_raw_parts(angles, len)
        };
        let phis: Vec<Angle> = ks.iter().map(|&k| Angle::new(k)).collect();
        store(
            out,
            BqcComputation(Computation::linear(&phis).map_err(Failure::input)?),
        )
    })
}

/// Vertex count, or 0 for NULL.
///
/// # Safety
/// `comp` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bqc_computation_num_vertices(comp: *const BqcComputation) -> usize {
    comp.as_ref().map_or(0, |c| c.0.graph().num_vertices())
}

/// # Safety
/// `comp` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bqc_computation_free(comp: *mut BqcComputation) {
    if !comp.is_null() {
        drop(Box::from_raw(comp));
    }
}

/// Default configuration of a protocol variant.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bqc_config_new(
    variant: BqcVariant,
    out: *mut *mut BqcConfig,
) -> BqcStatus {
    guard(|| {
        let mut cfg = RunConfig::new(match variant {
            BqcVariant::Bfk => Variant::Bfk,
            BqcVariant::Double => Variant::Double,
            BqcVariant::Triple => Variant::Triple,
            BqcVariant::Single | BqcVariant::SingleClassical => Variant::Single,
        });
        cfg.classical_client = variant == BqcVariant::SingleClassical;
        store(out, BqcConfig(cfg))
    })
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bqc_config_from_json(
    json: *const c_char,
    out: *mut *mut BqcConfig,
) -> BqcStatus {
    guard(|| {
        let cfg = RunConfig::from_json(text(json, "json")?).map_err(Failure::input)?;
        store(out, BqcConfig(cfg))
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bqc_config_set_seed(cfg: *mut BqcConfig, seed: u64) -> BqcStatus {
    guard(|| {
        let cfg = cfg
            .as_mut()
            .ok_or_else(|| Failure(BqcStatus::NullPointer, "config is null".into()))?;
        cfg.0.seed = seed;
        Ok(())
    })
}

/// Serialized configuration.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bqc_config_to_json(
    cfg: *const BqcConfig,
    out: *mut *mut c_char,
) -> BqcStatus {
    guard(|| {
        let cfg = borrow(cfg, "config")?;
        store_string(out, serde_json::to_string(&cfg.0).map_err(Failure::input)?)
    })
}

/// # Safety
/// `cfg` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bqc_config_free(cfg: *mut BqcConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs one protocol execution, retrying failed forwarding rounds. An abort
/// is a successful call; inspect it with [`bqc_result_abort_reason`].
///
/// # Safety
/// `cfg` and `comp` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bqc_run(
    cfg: *const BqcConfig,
    comp: *const BqcComputation,
    out: *mut *mut BqcRunResult,
) -> BqcStatus {
    guard(|| {
        let cfg = &borrow(cfg, "config")?.0;
        let comp = &borrow(comp, "computation")?.0;
        let r = run_with_retries(cfg, comp, SeedTree::new(cfg.seed), MAX_ATTEMPTS)
            .map_err(Failure::protocol)?;
        store(out, BqcRunResult(r))
    })
}

/// Short abort name (`policy`, `cheating`, `retry`), or NULL if the run
/// completed. The string is static.
///
/// # Safety
/// `res` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bqc_result_abort_reason(res: *const BqcRunResult) -> *const c_char {
    let Some(res) = res.as_ref() else {
        return ptr::null();
    };
    match res.0.aborted().map(|r| r.name()) {
        Some("policy") => c"policy".as_ptr(),
        Some("cheating") => c"cheating".as_ptr(),
        Some(_) => c"retry".as_ptr(),
        None => ptr::null(),
    }
}

/// Attempts used, or 0 for NULL.
///
/// # Safety
/// `res` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bqc_result_attempts(res: *const BqcRunResult) -> usize {
    res.as_ref().map_or(0, |r| r.0.attempts)
}

/// Copies the output bits into `buf`. `len` receives the bit count, also when
/// the buffer is too small. Fails with `InvalidInput` on an aborted run.
///
/// # Safety
/// `res` must be a live handle; `buf` must hold `cap` bytes; `len` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn bqc_result_output(
    res: *const BqcRunResult,
    buf: *mut u8,
    cap: usize,
    len: *mut usize,
) -> BqcStatus {
    guard(|| {
        let res = borrow(res, "result")?;
        let bits = res
            .0
            .output_bits()
            .ok_or_else(|| Failure::input("the run aborted"))?;
        if len.is_null() {
            return Err(Failure(BqcStatus::NullPointer, "len is null".into()));
        }
        *len = bits.len();
        if cap < bits.len() {
            return Err(Failure(
                BqcStatus::BufferTooSmall,
                format!("need {} bytes", bits.len()),
            ));
        }
        if !bits.is_empty() {
            if buf.is_null() {
                return Err(Failure(BqcStatus::NullPointer, "buf is null".into()));
            }
            ptr::copy_nonoverlapping(bits.as_ptr(), buf, bits.len());
        }
        Ok(())
    })
}

/// Transcript of the run, one JSON record per line.
///
/// # Safety
/// `res` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bqc_result_transcript_jsonl(
    res: *const BqcRunResult,
    out: *mut *mut c_char,
) -> BqcStatus {
    guard(|| store_string(out, borrow(res, "result")?.0.transcript.to_jsonl()))
}

/// # Safety
/// `res` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bqc_result_free(res: *mut BqcRunResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Exact output distribution of a protocol, as a JSON object
/// `{"distribution": {bits: p}, "aborted": {name: p}, "paths": n}`.
///
/// # Safety
/// `cfg` and `comp` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bqc_exact_distribution_json(
    cfg: *const BqcConfig,
    comp: *const BqcComputation,
    out: *mut *mut c_char,
) -> BqcStatus {
    guard(|| {
        let cfg = &borrow(cfg, "config")?.0;
        let comp = &borrow(comp, "computation")?.0;
        let e = exact_with_retries(
            cfg,
            comp,
            SeedTree::new(cfg.seed),
            BQC_EXACT_BUDGET,
            MAX_ATTEMPTS,
        )
        .map_err(Failure::protocol)?;
        let doc = serde_json::json!({ "distribution": e.distribution, "aborted": e.aborted, "paths": e.paths });
        store_string(out, doc.to_string())
    })
}

/// Output distribution of the computation run without any protocol, as a
/// JSON object `{bits: p}`.
///
/// # Safety
/// `comp` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bqc_oracle_distribution_json(
    comp: *const BqcComputation,
    out: *mut *mut c_char,
) -> BqcStatus {
    guard(|| {
        let d = output_distribution(&borrow(comp, "computation")?.0).map_err(Failure::input)?;
        store_string(out, serde_json::to_string(&d).map_err(Failure::input)?)
    })
}

/// Repeats the decoy check `trials` times against a Bell-guessing server
/// with `h` decoys of which `l` are checked.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bqc_detection(
    l: usize,
    h: usize,
    trials: u64,
    seed: u64,
    out: *mut BqcDetection,
) -> BqcStatus {
    guard(|| {
        let out = out
            .as_mut()
            .ok_or_else(|| Failure(BqcStatus::NullPointer, "out is null".into()))?;
        let r = detection_rate(l, h, trials, Strategy::GuessBell, SeedTree::new(seed))
            .map_err(Failure::input)?;
        *out = BqcDetection {
            trials: r.trials,
            caught: r.caught,
            accepted_incorrect: r.accepted_incorrect,
            checked: r.checked,
            mismatches: r.mismatches,
        };
        Ok(())
    })
}

/// Largest total-variation distance between the server's views for two
/// secret angles of a single real qubit in a stream of `n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bqc_leak_score(n: usize, equalizing: bool, out: *mut f64) -> BqcStatus {
    guard(|| {
        let out = out
            .as_mut()
            .ok_or_else(|| Failure(BqcStatus::NullPointer, "out is null".into()))?;
        let padding = if equalizing {
            PaddingStrategy::Equalizing
        } else {
            PaddingStrategy::ConstantZero
        };
        let table = blindness_enumeration(BlindnessParams {
            n,
            padding: Some(padding),
            forced_frame: None,
        })
        .map_err(Failure::input)?;
        *out = table.leak_score();
        Ok(())
    })
}
