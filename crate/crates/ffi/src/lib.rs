//! C ABI over the pgas runtime.
//!
//! Every function returns a [`pgas_status`]; results travel through out
//! parameters. On failure the message of the most recent error on the calling
//! thread is available from [`pgas_last_error`]. Handles are opaque and owned
//! by the caller unless stated otherwise. Panics never cross the boundary:
//! they are reported as `PGAS_ERR_PANIC`.

#![allow(non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;

use pgas::{algorithms, Context, DistributedArray, Error, GlobalPointer, Pattern, PatternSpec, RuntimeConfig};
use pgas::{SegmentId, UnitId};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum pgas_status {
    PGAS_OK = 0,
    PGAS_ERR_NULL = 1,
    PGAS_ERR_USAGE = 2,
    PGAS_ERR_STARTUP = 3,
    PGAS_ERR_OUT_OF_RANGE = 4,
    PGAS_ERR_UNKNOWN_SEGMENT = 5,
    PGAS_ERR_ALLOCATION = 6,
    PGAS_ERR_INDEX = 7,
    PGAS_ERR_LENGTH = 8,
    PGAS_ERR_PARSE = 9,
    PGAS_ERR_PATTERN = 10,
    PGAS_ERR_LOCALITY = 11,
    PGAS_ERR_TRANSPORT = 12,
    PGAS_ERR_BENCHMARK = 13,
    PGAS_ERR_IO = 14,
    PGAS_ERR_UTF8 = 15,
    /// A unit body passed to `pgas_run` returned nonzero.
    PGAS_ERR_CALLBACK = 16,
    PGAS_ERR_PANIC = 17,
}

use pgas_status::*;

/// Global pointer in its 16-byte wire layout.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct pgas_gptr {
    pub unit: u32,
    pub segment: u16,
    pub flags: u16,
    /// Byte offset inside the segment.
    pub offset: u64,
}

impl From<GlobalPointer<u8>> for pgas_gptr {
    fn from(p: GlobalPointer<u8>) -> Self {
        pgas_gptr {
            unit: p.unit().0,
            segment: p.segment().0,
            flags: p.flags(),
            offset: p.offset(),
        }
    }
}

impl From<pgas_gptr> for GlobalPointer<u8> {
    fn from(g: pgas_gptr) -> Self {
        GlobalPointer::new(UnitId(g.unit), SegmentId(g.segment), g.offset).with_flags(g.flags)
    }
}

enum Handle {
    Owned(Context),
    /// Lent to a `pgas_run` body for the duration of the call.
    Borrowed(*const Context),
}

/// Runtime context of one unit.
pub struct pgas_context {
    handle: Handle,
}

impl pgas_context {
    fn get(&self) -> &Context {
        match &self.handle {
            Handle::Owned(ctx) => ctx,
            Handle::Borrowed(ctx) => unsafe { &**ctx },
        }
    }
}

/// Distribution pattern.
pub struct pgas_pattern {
    pattern: Pattern,
}

/// Distributed array of `int64_t` with a BLOCKED distribution.
pub struct pgas_array_i64 {
    array: DistributedArray<i64>,
}

struct Failure {
    status: pgas_status,
    message: String,
}

impl Failure {
    fn new(status: pgas_status, message: impl Into<String>) -> Failure {
        Failure {
            status,
            message: message.into(),
        }
    }

    fn null(what: &str) -> Failure {
        Failure::new(PGAS_ERR_NULL, format!("{what} is NULL"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let status = match &e {
            Error::Usage(_) => PGAS_ERR_USAGE,
            Error::Startup(_) => PGAS_ERR_STARTUP,
            Error::OutOfRange { .. } => PGAS_ERR_OUT_OF_RANGE,
            Error::UnknownSegment { .. } => PGAS_ERR_UNKNOWN_SEGMENT,
            Error::Allocation(_) => PGAS_ERR_ALLOCATION,
            Error::IndexOutOfBounds { .. } => PGAS_ERR_INDEX,
            Error::LengthMismatch { .. } => PGAS_ERR_LENGTH,
            Error::Parse { .. } => PGAS_ERR_PARSE,
            Error::Pattern(_) => PGAS_ERR_PATTERN,
            Error::Locality(_) => PGAS_ERR_LOCALITY,
            Error::Transport(_) => PGAS_ERR_TRANSPORT,
            Error::Benchmark(_) => PGAS_ERR_BENCHMARK,
            Error::Io(_) => PGAS_ERR_IO,
        };
        Failure::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn call(f: impl FnOnce() -> Result<(), Failure>) -> pgas_status {
    let failure = match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return PGAS_OK,
        Ok(Err(failure)) => failure,
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Failure::new(PGAS_ERR_PANIC, format!("panic: {text}"))
        }
    };
    set_last_error(&failure.message);
    failure.status
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null(what));
    }
    out.write(value);
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len` bytes) and returns its full length without the NUL.
/// Returns 0 if there was no error. `buf` may be NULL to query the length.
#[no_mangle]
pub unsafe extern "C" fn pgas_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static name of a status code, e.g. "PGAS_ERR_PARSE".
#[no_mangle]
pub extern "C" fn pgas_status_name(status: pgas_status) -> *const c_char {
    let name: &'static CStr = match status {
        PGAS_OK => c"PGAS_OK",
        PGAS_ERR_NULL => c"PGAS_ERR_NULL",
        PGAS_ERR_USAGE => c"PGAS_ERR_USAGE",
        PGAS_ERR_STARTUP => c"PGAS_ERR_STARTUP",
        PGAS_ERR_OUT_OF_RANGE => c"PGAS_ERR_OUT_OF_RANGE",
        PGAS_ERR_UNKNOWN_SEGMENT => c"PGAS_ERR_UNKNOWN_SEGMENT",
        PGAS_ERR_ALLOCATION => c"PGAS_ERR_ALLOCATION",
        PGAS_ERR_INDEX => c"PGAS_ERR_INDEX",
        PGAS_ERR_LENGTH => c"PGAS_ERR_LENGTH",
        PGAS_ERR_PARSE => c"PGAS_ERR_PARSE",
        PGAS_ERR_PATTERN => c"PGAS_ERR_PATTERN",
        PGAS_ERR_LOCALITY => c"PGAS_ERR_LOCALITY",
        PGAS_ERR_TRANSPORT => c"PGAS_ERR_TRANSPORT",
        PGAS_ERR_BENCHMARK => c"PGAS_ERR_BENCHMARK",
        PGAS_ERR_IO => c"PGAS_ERR_IO",
        PGAS_ERR_UTF8 => c"PGAS_ERR_UTF8",
        PGAS_ERR_CALLBACK => c"PGAS_ERR_CALLBACK",
        PGAS_ERR_PANIC => c"PGAS_ERR_PANIC",
    };
    name.as_ptr()
}

/// Initializes this process as one unit, configured from the `PGAS_*`
/// environment the launcher sets. Release with `pgas_context_free`.
#[no_mangle]
pub unsafe extern "C" fn pgas_init(out: *mut *mut pgas_context) -> pgas_status {
    call(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let ctx = Context::init(&RuntimeConfig::from_env()?)?;
        out.write(Box::into_raw(Box::new(pgas_context {
            handle: Handle::Owned(ctx),
        })));
        Ok(())
    })
}

/// Body of one unit for [`pgas_run`]. The context is valid only during the call.
pub type pgas_unit_fn = Option<unsafe extern "C" fn(ctx: *mut pgas_context, user_data: *mut c_void) -> c_int>;

struct UserData(*mut c_void);

unsafe impl Sync for UserData {}

/// Runs `body` on `n_units` threads of this process, one per unit, and
/// finalizes each unit afterwards. `user_data` is shared by all units.
#[no_mangle]
pub unsafe extern "C" fn pgas_run(n_units: usize, body: pgas_unit_fn, user_data: *mut c_void) -> pgas_status {
    call(|| {
        let body = body.ok_or_else(|| Failure::null("body"))?;
        let user = UserData(user_data);
        let user = &user;
        let codes = pgas::launch(&RuntimeConfig::in_process(n_units), move |ctx| {
            let mut handle = pgas_context {
                handle: Handle::Borrowed(ctx),
            };
            unsafe { body(&mut handle, user.0) }
        })?;
        match codes.iter().enumerate().find(|(_, &c)| c != 0) {
            Some((unit, code)) => Err(Failure::new(
                PGAS_ERR_CALLBACK,
                format!("unit {unit} returned {code}"),
            )),
            None => Ok(()),
        }
    })
}

/// Collective final barrier; releases all global memory of the unit.
/// Only for contexts from `pgas_init`; `pgas_run` finalizes its units itself.
#[no_mangle]
pub unsafe extern "C" fn pgas_finalize(ctx: *mut pgas_context) -> pgas_status {
    call(|| match &mut deref_mut(ctx, "ctx")?.handle {
        Handle::Owned(ctx) => Ok(ctx.finalize()?),
        Handle::Borrowed(_) => Err(Failure::new(
            PGAS_ERR_USAGE,
            "contexts lent by pgas_run are finalized when the body returns",
        )),
    })
}

/// Frees a context from `pgas_init`. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn pgas_context_free(ctx: *mut pgas_context) {
    if !ctx.is_null() && matches!((*ctx).handle, Handle::Owned(_)) {
        drop(Box::from_raw(ctx));
    }
}

#[no_mangle]
pub unsafe extern "C" fn pgas_my_id(ctx: *const pgas_context, out: *mut u32) -> pgas_status {
    call(|| write_out(out, deref(ctx, "ctx")?.get().my_id().0, "out"))
}

#[no_mangle]
pub unsafe extern "C" fn pgas_n_units(ctx: *const pgas_context, out: *mut usize) -> pgas_status {
    call(|| write_out(out, deref(ctx, "ctx")?.get().n_units(), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn pgas_barrier(ctx: *const pgas_context) -> pgas_status {
    call(|| Ok(deref(ctx, "ctx")?.get().barrier()?))
}

/// Encodes a global pointer into its 16-byte little-endian form.
#[no_mangle]
pub unsafe extern "C" fn pgas_gptr_encode(gptr: pgas_gptr, out: *mut u8) -> pgas_status {
    call(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let bytes = GlobalPointer::<u8>::from(gptr).to_bytes();
        ptr::copy_nonoverlapping(bytes.as_ptr(), out, bytes.len());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pgas_gptr_decode(bytes: *const u8, out: *mut pgas_gptr) -> pgas_status {
    call(|| {
        if bytes.is_null() {
            return Err(Failure::null("bytes"));
        }
        let mut buf = [0u8; 16];
        ptr::copy_nonoverlapping(bytes, buf.as_mut_ptr(), buf.len());
        write_out(out, GlobalPointer::<u8>::from_bytes(buf).into(), "out")
    })
}

/// Parses a pattern such as "16x10 TILE(4),TILE(2) team 2x2 col".
/// `n_units` is used when the text has no team clause; pass 0 to require one.
#[no_mangle]
pub unsafe extern "C" fn pgas_pattern_parse(
    text: *const c_char,
    n_units: usize,
    out: *mut *mut pgas_pattern,
) -> pgas_status {
    call(|| {
        if text.is_null() {
            return Err(Failure::null("text"));
        }
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| Failure::new(PGAS_ERR_UTF8, e.to_string()))?;
        let pattern = PatternSpec::parse(text)?.build((n_units > 0).then_some(n_units))?;
        out.write(Box::into_raw(Box::new(pgas_pattern { pattern })));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pgas_pattern_free(pattern: *mut pgas_pattern) {
    if !pattern.is_null() {
        drop(Box::from_raw(pattern));
    }
}

/// Total number of elements; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn pgas_pattern_size(pattern: *const pgas_pattern) -> usize {
    pattern.as_ref().map_or(0, |p| p.pattern.size())
}

/// Number of units the pattern distributes over; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn pgas_pattern_n_units(pattern: *const pgas_pattern) -> usize {
    pattern.as_ref().map_or(0, |p| p.pattern.n_units())
}

#[no_mangle]
pub unsafe extern "C" fn pgas_pattern_local_size(
    pattern: *const pgas_pattern,
    unit: u32,
    out: *mut usize,
) -> pgas_status {
    call(|| {
        let size = deref(pattern, "pattern")?.pattern.local_size(UnitId(unit))?;
        write_out(out, size, "out")
    })
}

/// Owner and local offset of the element with global linear index `index`.
#[no_mangle]
pub unsafe extern "C" fn pgas_pattern_local_of(
    pattern: *const pgas_pattern,
    index: usize,
    unit: *mut u32,
    offset: *mut usize,
) -> pgas_status {
    call(|| {
        let (u, off) = deref(pattern, "pattern")?.pattern.local_of_index(index)?;
        write_out(unit, u.0, "unit")?;
        write_out(offset, off, "offset")
    })
}

/// Inverse of [`pgas_pattern_local_of`].
#[no_mangle]
pub unsafe extern "C" fn pgas_pattern_global_of(
    pattern: *const pgas_pattern,
    unit: u32,
    offset: usize,
    index: *mut usize,
) -> pgas_status {
    call(|| {
        let i = deref(pattern, "pattern")?.pattern.index_of_local(UnitId(unit), offset)?;
        write_out(index, i, "index")
    })
}

/// Collectively allocates `n` elements over all units, zero-initialized.
#[no_mangle]
pub unsafe extern "C" fn pgas_array_i64_new(
    ctx: *const pgas_context,
    n: usize,
    out: *mut *mut pgas_array_i64,
) -> pgas_status {
    call(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let array = DistributedArray::new(deref(ctx, "ctx")?.get().team_all(), n)?;
        out.write(Box::into_raw(Box::new(pgas_array_i64 { array })));
        Ok(())
    })
}

/// Collective: every unit frees its handle. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn pgas_array_i64_free(array: *mut pgas_array_i64) {
    if !array.is_null() {
        drop(Box::from_raw(array));
    }
}

/// Global length; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn pgas_array_i64_len(array: *const pgas_array_i64) -> usize {
    array.as_ref().map_or(0, |a| a.array.len())
}

/// Reads element `index`, wherever it lives.
#[no_mangle]
pub unsafe extern "C" fn pgas_array_i64_get(array: *const pgas_array_i64, index: usize, out: *mut i64) -> pgas_status {
    call(|| {
        let value = deref(array, "array")?.array.at(index)?.load()?;
        write_out(out, value, "out")
    })
}

/// Writes element `index`. Visible to other units after a barrier.
#[no_mangle]
pub unsafe extern "C" fn pgas_array_i64_put(array: *const pgas_array_i64, index: usize, value: i64) -> pgas_status {
    call(|| Ok(deref(array, "array")?.array.at(index)?.store(value)?))
}

/// Global pointer to element `index`.
#[no_mangle]
pub unsafe extern "C" fn pgas_array_i64_gptr(
    array: *const pgas_array_i64,
    index: usize,
    out: *mut pgas_gptr,
) -> pgas_status {
    call(|| {
        let gptr = deref(array, "array")?.array.at(index)?.pointer();
        write_out(out, gptr.cast::<u8>().into(), "out")
    })
}

/// The calling unit's block: a plain pointer and element count. The pointer
/// stays valid until the array is freed.
#[no_mangle]
pub unsafe extern "C" fn pgas_array_i64_local(
    array: *mut pgas_array_i64,
    data: *mut *mut i64,
    len: *mut usize,
) -> pgas_status {
    call(|| {
        let local = deref_mut(array, "array")?.array.local_mut();
        write_out(len, local.len(), "len")?;
        write_out(data, local.as_mut_ptr(), "data")
    })
}

/// Collective: sets every element to `value`.
#[no_mangle]
pub unsafe extern "C" fn pgas_array_i64_fill(array: *const pgas_array_i64, value: i64) -> pgas_status {
    call(|| Ok(algorithms::fill(deref(array, "array")?.array.range(), value)?))
}

/// Collective: sum of all elements (wrapping), returned on every unit.
#[no_mangle]
pub unsafe extern "C" fn pgas_array_i64_sum(array: *const pgas_array_i64, out: *mut i64) -> pgas_status {
    call(|| {
        let sum = algorithms::accumulate(deref(array, "array")?.array.range(), 0i64, i64::wrapping_add)?;
        write_out(out, sum, "out")
    })
}
