//! C ABI over `abrsim`.
//!
//! Every function returns an [`AbrStatus`]; on failure the message is
//! available from [`abr_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function. Optional metrics are
//! reported as NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use abrsim::adapter::decide_next;
use abrsim::config::ScenarioConfig;
use abrsim::metrics::{inefficiency, instability, jain_index, unfairness};
use abrsim::netsim::SegmentRecord;
use abrsim::{
    BitrateLadder, ClientState, Error, MetricsOptions, PolicyParams, RunOutput, Selection,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ConfigParse = 3,
    TraceParse = 4,
    Validation = 5,
    Horizon = 6,
    UndefinedMetric = 7,
    InvalidMeasurement = 8,
    NotInLadder = 9,
    StalledDownload = 10,
    Io = 11,
    OutOfRange = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

/// `AbrParams::selection`: each switch candidate is taken with probability
/// equal to its score, the previous rate keeps the rest.
pub const ABR_SELECTION_GATED: u32 = 0;
/// `AbrParams::selection`: scores normalized over all candidates.
pub const ABR_SELECTION_NORMALIZED: u32 = 1;

/// Controller parameters. Fill with `abr_params_default` and edit.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbrParams {
    pub q_low: f64,
    pub q_high: f64,
    pub q_max_buffer: f64,
    pub q_ref: f64,
    pub alpha: f64,
    pub delta_kbps: f64,
    pub u0: f64,
    pub epsilon: f64,
    pub n_min: u32,
    pub n_max: u32,
    pub n0: u32,
    pub selection: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbrDecision {
    pub bitrate_kbps: f64,
    pub sleep_secs: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbrUpdate {
    pub measured_kbps: f64,
    pub amended_kbps: f64,
    pub probed_kbps: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbrSegment {
    pub client_id: u32,
    pub index: u64,
    pub bitrate_kbps: f64,
    pub sleep_secs: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub buffer_after_secs: f64,
    pub measured_kbps: f64,
    pub amended_kbps: f64,
    pub probed_kbps: f64,
    pub underflow: bool,
    pub overflow: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbrSummary {
    pub clients: usize,
    pub segments: usize,
    pub end_time: f64,
    pub mean_inefficiency: f64,
    pub mean_instability: f64,
    pub mean_unfairness: f64,
    pub underflow_events: u32,
    pub overflow_events: usize,
    pub conservation_error: f64,
}

/// A parsed scenario and the directory its trace paths are relative to.
pub struct AbrScenario {
    config: ScenarioConfig,
    base_dir: PathBuf,
}

/// A finished simulation with its metrics.
pub struct AbrRun {
    output: RunOutput,
    segments: Vec<SegmentRecord>,
}

/// One adaptive client driven by an external player.
pub struct AbrController {
    state: ClientState,
    params: PolicyParams,
    ladder: BitrateLadder,
}

struct Fail {
    status: AbrStatus,
    message: String,
}

impl Fail {
    fn new(status: AbrStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn null(what: &str) -> Self {
        Self::new(AbrStatus::NullPointer, format!("{what} is null"))
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidMeasurement(_) => AbrStatus::InvalidMeasurement,
            Error::StalledDownload => AbrStatus::StalledDownload,
            Error::UndefinedMetric(_) => AbrStatus::UndefinedMetric,
            Error::NotInLadder(_) => AbrStatus::NotInLadder,
            Error::Validation { .. } => AbrStatus::Validation,
            Error::Horizon(_) => AbrStatus::Horizon,
            Error::TraceParse { .. } => AbrStatus::TraceParse,
            Error::ConfigParse { .. } | Error::SweepSpec(_) => AbrStatus::ConfigParse,
            Error::Io { .. } => AbrStatus::Io,
        };
        Self::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: Option<String>) {
    let c = message.map(|m| CString::new(m.replace('\0', " ")).expect("interior NULs removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AbrStatus {
    let fail = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(None);
            return AbrStatus::Ok;
        }
        Ok(Err(fail)) => fail,
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Fail::new(AbrStatus::Panic, format!("panic: {text}"))
        }
    };
    set_last_error(Some(fail.message));
    fail.status
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail::new(AbrStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail::null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail::null(what))
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

impl From<&PolicyParams> for AbrParams {
    fn from(p: &PolicyParams) -> Self {
        Self {
            q_low: p.q_low,
            q_high: p.q_high,
            q_max_buffer: p.q_max_buffer,
            q_ref: p.q_ref,
            alpha: p.alpha,
            delta_kbps: p.delta_kbps,
            u0: p.u0,
            epsilon: p.epsilon,
            n_min: p.n_min,
            n_max: p.n_max,
            n0: p.n0,
            selection: match p.selection {
                Selection::Gated => ABR_SELECTION_GATED,
                Selection::Normalized => ABR_SELECTION_NORMALIZED,
            },
        }
    }
}

fn policy_params(p: &AbrParams) -> Result<PolicyParams, Fail> {
    let selection = match p.selection {
        ABR_SELECTION_GATED => Selection::Gated,
        ABR_SELECTION_NORMALIZED => Selection::Normalized,
        other => {
            return Err(Fail::new(
                AbrStatus::OutOfRange,
                format!("selection {other}"),
            ))
        }
    };
    Ok(PolicyParams {
        q_low: p.q_low,
        q_high: p.q_high,
        q_max_buffer: p.q_max_buffer,
        q_ref: p.q_ref,
        alpha: p.alpha,
        delta_kbps: p.delta_kbps,
        u0: p.u0,
        epsilon: p.epsilon,
        n_min: p.n_min,
        n_max: p.n_max,
        n0: p.n0,
        selection,
    })
}

/// Message for the last failed call on this thread, or NULL after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn abr_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn abr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// Scenarios

/// Parses a scenario from TOML text. `base_dir` resolves relative trace
/// paths and may be NULL for the current directory.
///
/// # Safety
/// `toml` and `base_dir` must be NUL-terminated strings or NULL, `out` a
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn abr_scenario_from_toml(
    toml: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut AbrScenario,
) -> AbrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(toml, "toml")?;
        let base_dir = if base_dir.is_null() {
            PathBuf::from(".")
        } else {
            PathBuf::from(str_arg(base_dir, "base_dir")?)
        };
        let config = ScenarioConfig::from_toml_str(text, Path::new("<toml>"))?;
        *out = Box::into_raw(Box::new(AbrScenario { config, base_dir }));
        Ok(())
    })
}

/// Loads a bundled scenario by name.
///
/// # Safety
/// `name` must be a NUL-terminated string, `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn abr_scenario_bundled(
    name: *const c_char,
    out: *mut *mut AbrScenario,
) -> AbrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let name = str_arg(name, "name")?;
        let config = ScenarioConfig::bundled(name).ok_or_else(|| {
            Fail::new(
                AbrStatus::ConfigParse,
                format!("no bundled scenario named {name:?}"),
            )
        })??;
        *out = Box::into_raw(Box::new(AbrScenario {
            config,
            base_dir: PathBuf::from("."),
        }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from `abr_scenario_*` and not be freed.
#[no_mangle]
pub unsafe extern "C" fn abr_scenario_set_seed(scenario: *mut AbrScenario, seed: u64) -> AbrStatus {
    guard(|| {
        out_arg(scenario, "scenario")?.config.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from `abr_scenario_*` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn abr_scenario_free(scenario: *mut AbrScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

// Runs

/// Simulates a scenario and computes its metrics.
///
/// # Safety
/// `scenario` must be a live handle, `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn abr_run(
    scenario: *const AbrScenario,
    strict_formulas: bool,
    out: *mut *mut AbrRun,
) -> AbrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let s = ref_arg(scenario, "scenario")?;
        let built = s.config.to_scenario(&s.base_dir)?;
        let options = MetricsOptions {
            strict_formulas: strict_formulas || s.config.strict_formulas,
            ..MetricsOptions::default()
        };
        let output = abrsim::simulate(s.config.display_name(), &built, options)?;
        let segments = output.log.records().cloned().collect();
        *out = Box::into_raw(Box::new(AbrRun { output, segments }));
        Ok(())
    })
}

/// Completed segments over all clients; 0 for NULL.
///
/// # Safety
/// `run` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn abr_run_segment_count(run: *const AbrRun) -> usize {
    run.as_ref().map_or(0, |r| r.segments.len())
}

/// # Safety
/// `run` must be a live handle, `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn abr_run_segment(
    run: *const AbrRun,
    i: usize,
    out: *mut AbrSegment,
) -> AbrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let run = ref_arg(run, "run")?;
        let r = run.segments.get(i).ok_or_else(|| {
            Fail::new(
                AbrStatus::OutOfRange,
                format!("segment {i} of {}", run.segments.len()),
            )
        })?;
        *out = AbrSegment {
            client_id: r.client_id,
            index: r.index,
            bitrate_kbps: r.bitrate_kbps,
            sleep_secs: r.sleep_secs,
            t_start: r.t_start,
            t_end: r.t_end,
            buffer_after_secs: r.buffer_after_secs,
            measured_kbps: r.measured_kbps,
            amended_kbps: r.amended_kbps,
            probed_kbps: r.probed_kbps,
            underflow: r.underflow,
            overflow: r.overflow,
        };
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle, `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn abr_run_summary(run: *const AbrRun, out: *mut AbrSummary) -> AbrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let run = ref_arg(run, "run")?;
        let (log, report) = (&run.output.log, &run.output.report);
        *out = AbrSummary {
            clients: log.clients.len(),
            segments: run.segments.len(),
            end_time: log.end_time,
            mean_inefficiency: opt(report.mean_inefficiency),
            mean_instability: opt(report.mean_instability),
            mean_unfairness: opt(report.mean_unfairness),
            underflow_events: report.underflow_events,
            overflow_events: report.overflow_events,
            conservation_error: log.conservation_error(),
        };
        Ok(())
    })
}

unsafe fn copy_text(
    text: &[u8],
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> Result<(), Fail> {
    if let Some(n) = needed.as_mut() {
        *n = text.len() + 1;
    }
    if buf.is_null() && len == 0 {
        return Err(Fail::new(
            AbrStatus::BufferTooSmall,
            format!("need {} bytes", text.len() + 1),
        ));
    }
    if buf.is_null() {
        return Err(Fail::null("buf"));
    }
    if len <= text.len() {
        return Err(Fail::new(
            AbrStatus::BufferTooSmall,
            format!("need {} bytes, have {len}", text.len() + 1),
        ));
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
    *buf.add(text.len()) = 0;
    Ok(())
}

/// Writes sessions.csv into `buf` with a trailing NUL. `needed`, if not
/// NULL, receives the required size; call with `buf = NULL, len = 0` to
/// query it.
///
/// # Safety
/// `run` must be a live handle; `buf` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn abr_run_sessions_csv(
    run: *const AbrRun,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> AbrStatus {
    guard(|| {
        copy_text(
            &ref_arg(run, "run")?.output.sessions_csv(),
            buf,
            len,
            needed,
        )
    })
}

/// Same contract as `abr_run_sessions_csv`, for metrics.csv.
///
/// # Safety
/// `run` must be a live handle; `buf` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn abr_run_metrics_csv(
    run: *const AbrRun,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> AbrStatus {
    guard(|| copy_text(&ref_arg(run, "run")?.output.metrics_csv(), buf, len, needed))
}

/// # Safety
/// `run` must come from `abr_run` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn abr_run_free(run: *mut AbrRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

// Controller

/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn abr_params_default(out: *mut AbrParams) -> AbrStatus {
    guard(|| {
        *out_arg(out, "out")? = AbrParams::from(&PolicyParams::default());
        Ok(())
    })
}

/// Creates a controller. `rates` may be NULL with `n_rates = 0` for the
/// default ladder, and `params` NULL for the default parameters.
///
/// # Safety
/// `rates` must hold `n_rates` values; `params` must be NULL or valid;
/// `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn abr_controller_new(
    rates: *const f64,
    n_rates: usize,
    segment_secs: f64,
    seed: u64,
    client_id: u32,
    params: *const AbrParams,
    out: *mut *mut AbrController,
) -> AbrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let rates = slice_arg(rates, n_rates, "rates")?;
        let ladder = if rates.is_empty() {
            BitrateLadder::default()
        } else {
            BitrateLadder::new(rates.to_vec())?
        };
        let params = match params.as_ref() {
            Some(p) => policy_params(p)?,
            None => PolicyParams::default(),
        };
        params.validate()?;
        if !(segment_secs.is_finite() && segment_secs > 0.0) {
            return Err(Error::Validation {
                field: "segment_secs".into(),
                reason: format!("must be positive, got {segment_secs}"),
            }
            .into());
        }
        *out = Box::into_raw(Box::new(AbrController {
            state: ClientState::new(segment_secs, seed, client_id),
            params,
            ladder,
        }));
        Ok(())
    })
}

/// Reports a finished download. `buffer_secs` is the player's buffer after
/// the segment was appended. `out` may be NULL.
///
/// # Safety
/// `controller` must be a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn abr_controller_segment_done(
    controller: *mut AbrController,
    bitrate_kbps: f64,
    t_start: f64,
    t_end: f64,
    buffer_secs: f64,
    out: *mut AbrUpdate,
) -> AbrStatus {
    guard(|| {
        let c = out_arg(controller, "controller")?;
        if !c.ladder.contains(bitrate_kbps) {
            return Err(Error::NotInLadder(bitrate_kbps).into());
        }
        let u = c
            .state
            .on_segment_complete(bitrate_kbps, t_start, t_end, &c.params)?;
        c.state.buffer_secs = buffer_secs;
        if let Some(out) = out.as_mut() {
            *out = AbrUpdate {
                measured_kbps: u.measured_kbps,
                amended_kbps: u.amended_kbps,
                probed_kbps: u.probed_kbps,
            };
        }
        Ok(())
    })
}

/// Chooses the next segment's bitrate and any idle time before requesting
/// it, given the current buffer level.
///
/// # Safety
/// `controller` must be a live handle, `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn abr_controller_decide(
    controller: *mut AbrController,
    buffer_secs: f64,
    out: *mut AbrDecision,
) -> AbrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let c = out_arg(controller, "controller")?;
        if !(buffer_secs.is_finite() && buffer_secs >= 0.0) {
            return Err(Fail::new(
                AbrStatus::OutOfRange,
                format!("buffer_secs {buffer_secs}"),
            ));
        }
        c.state.buffer_secs = buffer_secs;
        let d = decide_next(&mut c.state, &c.params, &c.ladder);
        *out = AbrDecision {
            bitrate_kbps: d.bitrate_kbps,
            sleep_secs: d.sleep_secs,
        };
        Ok(())
    })
}

/// # Safety
/// `controller` must come from `abr_controller_new` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn abr_controller_free(controller: *mut AbrController) {
    if !controller.is_null() {
        drop(Box::from_raw(controller));
    }
}

// Metrics

/// # Safety
/// `values` must hold `n` values, `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn abr_jain_index(values: *const f64, n: usize, out: *mut f64) -> AbrStatus {
    guard(|| {
        *out_arg(out, "out")? = jain_index(slice_arg(values, n, "values")?)?;
        Ok(())
    })
}

/// # Safety
/// `values` must hold `n` values, `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn abr_unfairness(values: *const f64, n: usize, out: *mut f64) -> AbrStatus {
    guard(|| {
        *out_arg(out, "out")? = unfairness(slice_arg(values, n, "values")?)?;
        Ok(())
    })
}

/// # Safety
/// `history` must hold `n` values, `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn abr_instability(
    history: *const f64,
    n: usize,
    d0: usize,
    out: *mut f64,
) -> AbrStatus {
    guard(|| {
        *out_arg(out, "out")? = instability(slice_arg(history, n, "history")?, d0)?;
        Ok(())
    })
}

/// # Safety
/// `bitrates` must hold `n` values, `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn abr_inefficiency(
    bitrates: *const f64,
    n: usize,
    capacity_kbps: f64,
    out: *mut f64,
) -> AbrStatus {
    guard(|| {
        *out_arg(out, "out")? = inefficiency(slice_arg(bitrates, n, "bitrates")?, capacity_kbps)?;
        Ok(())
    })
}
