//! C ABI over the `kicktop` simulator.
//!
//! States and propagators are opaque heap handles owned by the caller and
//! released with the matching `*_free`. Every fallible call returns a
//! [`KtStatus`]; on failure [`kt_last_error_message`] describes the error on
//! the calling thread. Amplitudes cross the boundary as interleaved
//! `re, im` doubles in the index convention of the core crate (bit l of the
//! index is qubit l, bit value 0 is spin up).

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use kicktop::dynamics::{self, DisorderRealization, FloquetParams, FloquetPropagator};
use kicktop::hilbert::{self, BlochAngles, QubitRegisterState};
use kicktop::{observables, theory, Error};
use num_complex::Complex64;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KtStatus {
    Ok = 0,
    NullPointer = 1,
    Size = 2,
    Invalid = 3,
    DimensionMismatch = 4,
    Capacity = 5,
    Io = 6,
    Panic = 7,
}

/// Opaque N-qubit pure state.
pub struct KtState(QubitRegisterState);

/// Opaque Floquet propagator for one disorder realization.
pub struct KtPropagator(FloquetPropagator);

/// Observables of one state.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KtObservables {
    pub jx2: f64,
    pub jy2: f64,
    pub jz2: f64,
    pub j2: f64,
    /// Entanglement entropy in bits of the lowest `q` qubits; NaN when `q` was 0.
    pub entropy: f64,
    pub pss_weight: f64,
    pub q: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> KtStatus {
    match e {
        Error::Size(_) => KtStatus::Size,
        Error::DimensionMismatch { .. } => KtStatus::DimensionMismatch,
        Error::Capacity(_) => KtStatus::Capacity,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => KtStatus::Io,
        Error::Invalid(_) | Error::NoCollapseOverlap => KtStatus::Invalid,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> KtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KtStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer passed as {what}"));
            KtStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".to_owned());
            KtStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

/// Message of the last failed call on this thread, or "" if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn kt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Largest supported register size.
#[no_mangle]
pub extern "C" fn kt_max_qubits() -> usize {
    hilbert::MAX_QUBITS
}

/// Spin coherent state pointing along (theta, phi).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn kt_state_coherent(n_qubits: usize, theta: f64, phi: f64, out: *mut *mut KtState) -> KtStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let state = hilbert::coherent_state(n_qubits, BlochAngles::new(theta, phi)?)?;
        *out = Box::into_raw(Box::new(KtState(state)));
        Ok(())
    })
}

/// State from `2 * 2^n` interleaved doubles; must be normalized to 1e-10.
///
/// # Safety
/// `amplitudes` must point to `len` readable doubles and `out` to writable
/// storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn kt_state_from_amplitudes(amplitudes: *const f64, len: usize, out: *mut *mut KtState) -> KtStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        if amplitudes.is_null() {
            return Err(Fail::Null("amplitudes"));
        }
        if len % 2 != 0 {
            return Err(Error::Invalid(format!("odd amplitude buffer length {len}")).into());
        }
        let raw = std::slice::from_raw_parts(amplitudes, len);
        let amps = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        *out = Box::into_raw(Box::new(KtState(QubitRegisterState::from_amplitudes(amps)?)));
        Ok(())
    })
}

/// Deep copy of a state.
///
/// # Safety
/// `state` must be a live handle or null, `out` writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn kt_state_clone(state: *const KtState, out: *mut *mut KtState) -> KtStatus {
    guard(|| {
        let s = deref(state, "state")?;
        let out = deref_mut(out, "out")?;
        *out = Box::into_raw(Box::new(KtState(s.0.clone())));
        Ok(())
    })
}

/// Releases a state; null is ignored.
///
/// # Safety
/// `state` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kt_state_free(state: *mut KtState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Number of qubits, or 0 for a null handle.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kt_state_n_qubits(state: *const KtState) -> usize {
    state.as_ref().map_or(0, |s| s.0.n_qubits())
}

/// Copies the amplitudes as interleaved doubles; `len` must be exactly `2 * 2^n`.
///
/// # Safety
/// `state` must be a live handle and `out` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kt_state_amplitudes(state: *const KtState, out: *mut f64, len: usize) -> KtStatus {
    guard(|| {
        let s = deref(state, "state")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let amps = s.0.amplitudes();
        if len != 2 * amps.len() {
            return Err(Error::Invalid(format!("buffer holds {len} doubles, state needs {}", 2 * amps.len())).into());
        }
        let dst = std::slice::from_raw_parts_mut(out, len);
        for (d, a) in dst.chunks_exact_mut(2).zip(amps) {
            d[0] = a.re;
            d[1] = a.im;
        }
        Ok(())
    })
}

/// Weight of the state in the permutation-symmetric subspace.
///
/// # Safety
/// `state` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kt_state_pss_weight(state: *const KtState, out: *mut f64) -> KtStatus {
    guard(|| {
        let s = deref(state, "state")?;
        *deref_mut(out, "out")? = hilbert::pss_weight(&s.0);
        Ok(())
    })
}

/// Collective-spin moments, PSS weight and, for `q > 0`, the entropy of the
/// lowest `q` qubits.
///
/// # Safety
/// `state` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kt_state_observe(state: *const KtState, q: usize, out: *mut KtObservables) -> KtStatus {
    guard(|| {
        let s = deref(state, "state")?;
        let out = deref_mut(out, "out")?;
        let sample = observables::measure(&s.0, 0, (q > 0).then_some(q))?;
        *out = KtObservables {
            jx2: sample.jx2,
            jy2: sample.jy2,
            jz2: sample.jz2,
            j2: sample.j2,
            entropy: sample.entropy_q.unwrap_or(f64::NAN),
            pss_weight: sample.pss_weight,
            q,
        };
        Ok(())
    })
}

/// Propagator with couplings drawn from Normal(0, w^2) under `seed`.
///
/// # Safety
/// `out` must be writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn kt_propagator_new(
    n_qubits: usize,
    k: f64,
    p: f64,
    w: f64,
    seed: u64,
    out: *mut *mut KtPropagator,
) -> KtStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let params = FloquetParams::new(n_qubits, k, p)?;
        let disorder = dynamics::sample_disorder(n_qubits, w, seed)?;
        *out = Box::into_raw(Box::new(KtPropagator(FloquetPropagator::from_disorder(&params, &disorder)?)));
        Ok(())
    })
}

/// Propagator with explicit couplings eps_{l l'} for l < l', in row order
/// (0,1), (0,2), ..., (1,2), ...; `len` must be N(N-1)/2.
///
/// # Safety
/// `couplings` must point to `len` readable doubles (may be null when `len`
/// is 0) and `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn kt_propagator_with_couplings(
    n_qubits: usize,
    k: f64,
    p: f64,
    couplings: *const f64,
    len: usize,
    out: *mut *mut KtPropagator,
) -> KtStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let eps = if len == 0 {
            Vec::new()
        } else if couplings.is_null() {
            return Err(Fail::Null("couplings"));
        } else {
            std::slice::from_raw_parts(couplings, len).to_vec()
        };
        let params = FloquetParams::new(n_qubits, k, p)?;
        let disorder = DisorderRealization::from_couplings(n_qubits, 0.0, 0, eps)?;
        *out = Box::into_raw(Box::new(KtPropagator(FloquetPropagator::from_disorder(&params, &disorder)?)));
        Ok(())
    })
}

/// Releases a propagator; null is ignored.
///
/// # Safety
/// `propagator` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kt_propagator_free(propagator: *mut KtPropagator) {
    if !propagator.is_null() {
        drop(Box::from_raw(propagator));
    }
}

/// Applies `kicks` Floquet periods to `state` in place.
///
/// # Safety
/// Both handles must be live and `state` not aliased elsewhere during the call.
#[no_mangle]
pub unsafe extern "C" fn kt_propagator_advance(propagator: *const KtPropagator, state: *mut KtState, kicks: u64) -> KtStatus {
    guard(|| {
        let u = deref(propagator, "propagator")?;
        let s = deref_mut(state, "state")?;
        u.0.advance(&mut s.0, kicks)?;
        Ok(())
    })
}

/// Seed of one ensemble member, identical to the one used by sweeps.
#[no_mangle]
pub extern "C" fn kt_realization_seed(master_seed: u64, n_qubits: usize, w: f64, realization: u64) -> u64 {
    dynamics::realization_seed(master_seed, n_qubits, w, realization)
}

/// 3N/4.
#[no_mangle]
pub extern "C" fn kt_rmt_j_squared(n_qubits: usize) -> f64 {
    theory::rmt_j_squared(n_qubits)
}

/// Page value of a Q-qubit block, in bits.
#[no_mangle]
pub extern "C" fn kt_page_entropy(n_qubits: usize, q: usize) -> f64 {
    theory::page_entropy(n_qubits, q)
}

/// Mean entropy of random permutation-symmetric states, in bits.
#[no_mangle]
pub extern "C" fn kt_pss_entropy_avg(n_qubits: usize, q: usize) -> f64 {
    theory::pss_entropy_avg(n_qubits, q)
}

/// Disorder-averaged J^2(t) of the unkicked model.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kt_unkicked_j2(n_qubits: usize, k: f64, w: f64, theta: f64, phi: f64, t: f64, out: *mut f64) -> KtStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let params = theory::UnkickedParams::new(n_qubits, k, w, BlochAngles::new(theta, phi)?)?;
        *out = theory::unkicked_j2(t, &params)?;
        Ok(())
    })
}
