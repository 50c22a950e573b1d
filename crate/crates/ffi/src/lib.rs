//! C ABI over `rrimpute`.
//!
//! Tables and regressor specs are opaque handles created by `*_new`/`*_parse`
//! functions and released with the matching `*_free`. Every fallible function
//! returns an [`RrStatus`]; on failure the thread-local message from
//! [`rr_last_error_message`] explains it. Strings returned through `char **`
//! outputs are owned by the caller and released with [`rr_string_free`].
//! Panics never cross the boundary; they surface as `RR_STATUS_PANIC`.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rrimpute::data::{parse_table, render_table, DataMatrix, SubsetFile, Table, TableFormat};
use rrimpute::evaluation::{evaluate, EvalSettings, LooConfig, Sampling};
use rrimpute::orderer::{plan_order, PlanMode};
use rrimpute::regressors::RegressorSpec;
use rrimpute::roundrobin::{self, RoundRobinConfig};
use rrimpute::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Schema = 4,
    Config = 5,
    Numeric = 6,
    InsufficientData = 7,
    Capacity = 8,
    Alignment = 9,
    OutOfRange = 10,
    Other = 11,
    Panic = 12,
}

/// Opaque table handle: participant ids, variable names, values and mask.
pub struct RrTable(Table);

/// Opaque regression strategy with hyperparameters and seed.
pub struct RrRegressor(RegressorSpec);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(RrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            "parse" | "json" => RrStatus::Parse,
            "schema" | "empty_input" | "shape" => RrStatus::Schema,
            "config" => RrStatus::Config,
            "numeric" => RrStatus::Numeric,
            "insufficient_data" | "unimputable_column" => RrStatus::InsufficientData,
            "capacity" => RrStatus::Capacity,
            "alignment" => RrStatus::Alignment,
            _ => RrStatus::Other,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RrStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            RrStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(RrStatus::NullArgument, format!("`{what}` is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(RrStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn owned_string(bytes: Vec<u8>) -> Result<*mut c_char, Failure> {
    CString::new(bytes)
        .map(CString::into_raw)
        .map_err(|_| Failure(RrStatus::Other, "output contains a NUL byte".into()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses comma-separated text with a header row. `NA` and empty fields are
/// missing. `id_column` names the participant label column and may be null.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rr_table_parse(
    csv: *const c_char,
    id_column: *const c_char,
    out: *mut *mut RrTable,
) -> RrStatus {
    guard(|| {
        let csv = text(csv, "csv")?;
        let format = TableFormat {
            id_column: if id_column.is_null() {
                None
            } else {
                Some(text(id_column, "id_column")?.to_string())
            },
            ..TableFormat::default()
        };
        let table = parse_table(csv, &format)?;
        write_out(out, Box::into_raw(Box::new(RrTable(table))), "out")
    })
}

/// Builds a table from `rows * cols` row-major values. A non-zero entry in
/// `missing` (same layout, may be null) marks the cell missing.
///
/// # Safety
/// `values` and a non-null `missing` must point to `rows * cols` elements.
#[no_mangle]
pub unsafe extern "C" fn rr_table_new(
    rows: usize,
    cols: usize,
    values: *const f64,
    missing: *const u8,
    out: *mut *mut RrTable,
) -> RrStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let len =
            rows.checked_mul(cols).ok_or_else(|| Failure(RrStatus::OutOfRange, "table too large".into()))?;
        let values = std::slice::from_raw_parts(values, len).to_vec();
        let mask = if missing.is_null() {
            vec![false; len]
        } else {
            std::slice::from_raw_parts(missing, len).iter().map(|&m| m != 0).collect()
        };
        let data = DataMatrix::new(rows, cols, values, mask)?;
        write_out(out, Box::into_raw(Box::new(RrTable(Table::from_matrix(data)))), "out")
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rr_table_rows(table: *const RrTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.data.n())
}

/// Number of columns, or 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rr_table_cols(table: *const RrTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.data.p())
}

/// Reads cell `(row, col)`. Missing cells set `*is_missing` to 1 and leave
/// `*value` untouched.
///
/// # Safety
/// `table` must be a live handle; `value` and `is_missing` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rr_table_get(
    table: *const RrTable,
    row: usize,
    col: usize,
    value: *mut f64,
    is_missing: *mut u8,
) -> RrStatus {
    guard(|| {
        let t = &handle(table, "table")?.0;
        if row >= t.data.n() || col >= t.data.p() {
            return Err(Failure(RrStatus::OutOfRange, format!("cell ({row}, {col}) outside the table")));
        }
        if value.is_null() {
            return Err(null("value"));
        }
        match t.data.get(row, col) {
            Some(v) => {
                value.write(v);
                write_out(is_missing, 0, "is_missing")
            }
            None => write_out(is_missing, 1, "is_missing"),
        }
    })
}

/// Renders the table as CSV with `NA` for missing cells. Free the result with
/// [`rr_string_free`].
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rr_table_to_csv(table: *const RrTable, out: *mut *mut c_char) -> RrStatus {
    guard(|| {
        let t = &handle(table, "table")?.0;
        let format = TableFormat { id_column: Some("id".into()), ..TableFormat::default() };
        let s = owned_string(render_table(t, &format)?)?;
        write_out(out, s, "out")
    })
}

/// Releases a table. Null is ignored.
///
/// # Safety
/// `table` must be null or a live handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn rr_table_free(table: *mut RrTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Regressor by name (`mean`, `median`, `br`, `dt`, `et`, `knn` or a long
/// form) with default hyperparameters.
///
/// # Safety
/// `name` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rr_regressor_new(
    name: *const c_char,
    seed: u64,
    out: *mut *mut RrRegressor,
) -> RrStatus {
    guard(|| {
        let spec = RegressorSpec::named(text(name, "name")?)?.with_seed(seed);
        write_out(out, Box::into_raw(Box::new(RrRegressor(spec))), "out")
    })
}

/// Overrides one hyperparameter, e.g. `("k", "3")`. Unknown keys fail with
/// `RR_STATUS_CONFIG` and leave the regressor unchanged.
///
/// # Safety
/// `regressor` must be a live handle; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rr_regressor_set_param(
    regressor: *mut RrRegressor,
    key: *const c_char,
    value: *const c_char,
) -> RrStatus {
    guard(|| {
        let r = regressor.as_mut().ok_or_else(|| null("regressor"))?;
        let pairs = BTreeMap::from([(text(key, "key")?.to_string(), text(value, "value")?.to_string())]);
        r.0 = r.0.with_params(&pairs)?;
        Ok(())
    })
}

/// Releases a regressor. Null is ignored.
///
/// # Safety
/// `regressor` must be null or a live handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn rr_regressor_free(regressor: *mut RrRegressor) {
    if !regressor.is_null() {
        drop(Box::from_raw(regressor));
    }
}

/// Imputes every missing cell. `max_rounds == 0` and negative `tol` select the
/// defaults (100 rounds, 1e-3). Writes a new table and, when `rounds_used`
/// is non-null, the number of rounds run.
///
/// # Safety
/// Handles must be live; `out` must be writable; `rounds_used` may be null.
#[no_mangle]
pub unsafe extern "C" fn rr_impute(
    table: *const RrTable,
    regressor: *const RrRegressor,
    max_rounds: usize,
    tol: f64,
    out: *mut *mut RrTable,
    rounds_used: *mut usize,
) -> RrStatus {
    guard(|| {
        let t = &handle(table, "table")?.0;
        let spec = &handle(regressor, "regressor")?.0;
        let defaults = RoundRobinConfig::default();
        let cfg = RoundRobinConfig {
            max_rounds: if max_rounds == 0 { defaults.max_rounds } else { max_rounds },
            tol: if tol < 0.0 { defaults.tol } else { tol },
            ..defaults
        };
        if out.is_null() {
            return Err(null("out"));
        }
        let result = roundrobin::run(&t.data, spec, &t.vars, &cfg)?;
        if !rounds_used.is_null() {
            rounds_used.write(result.rounds_used);
        }
        let imputed = Table { data: result.imputed, ..t.clone() };
        write_out(out, Box::into_raw(Box::new(RrTable(imputed))), "out")
    })
}

/// Orders subsets given as `{"subsets": [...]}` JSON and writes the plan as
/// JSON. `exhaustive` non-zero requests the optimal search.
///
/// # Safety
/// `subsets_json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rr_order(
    subsets_json: *const c_char,
    exhaustive: u8,
    out: *mut *mut c_char,
) -> RrStatus {
    guard(|| {
        let file: SubsetFile =
            serde_json::from_str(text(subsets_json, "subsets_json")?).map_err(Error::from)?;
        let mode = if exhaustive != 0 { PlanMode::Exhaustive } else { PlanMode::Greedy };
        let plan = plan_order(&file.subsets, mode)?;
        let s = owned_string(serde_json::to_vec(&plan).map_err(Error::from)?)?;
        write_out(out, s, "out")
    })
}

/// Evaluates comma-separated strategies (`"br,et"`) against the mean baseline
/// and writes the report as JSON. `sample_per_variable == 0` holds out every
/// observed cell.
///
/// # Safety
/// `table` must be a live handle; `regressors` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rr_evaluate(
    table: *const RrTable,
    regressors: *const c_char,
    sample_per_variable: usize,
    seed: u64,
    out: *mut *mut c_char,
) -> RrStatus {
    guard(|| {
        let t = &handle(table, "table")?.0;
        let specs = text(regressors, "regressors")?
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| RegressorSpec::named(s).map(|r| r.with_seed(seed)))
            .collect::<Result<Vec<_>, _>>()?;
        let settings = EvalSettings {
            loo: LooConfig {
                sample: match sample_per_variable {
                    0 => Sampling::All,
                    k => Sampling::PerVariable(k),
                },
                seed,
            },
            ..EvalSettings::default()
        };
        let report = evaluate(t, &specs, &settings)?;
        let s = owned_string(serde_json::to_vec(&report).map_err(Error::from)?)?;
        write_out(out, s, "out")
    })
}
