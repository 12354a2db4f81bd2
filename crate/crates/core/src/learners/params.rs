//! Typed access to [`ParamMap`] entries.

use alloc::format;
use alloc::string::{String, ToString};

use super::{ParamMap, ParamValue};
use crate::error::{Error, Result};

fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name: name.to_string(),
        reason: reason.into(),
    }
}

pub(crate) fn check_keys(map: &ParamMap, allowed: &[&str]) -> Result<()> {
    match map.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(invalid(k, "unknown parameter for this classifier")),
        None => Ok(()),
    }
}

pub(crate) fn usize_or(map: &ParamMap, key: &str, default: usize) -> Result<usize> {
    match map.get(key) {
        None => Ok(default),
        Some(ParamValue::Int(i)) if *i >= 0 => Ok(*i as usize),
        Some(v) => Err(invalid(key, format!("expected a non-negative integer, got {v}"))),
    }
}

/// Integer or `None` (unbounded).
pub(crate) fn opt_usize_or(map: &ParamMap, key: &str, default: Option<usize>) -> Result<Option<usize>> {
    match map.get(key) {
        None => Ok(default),
        Some(ParamValue::Null) => Ok(None),
        Some(ParamValue::Int(i)) if *i >= 0 => Ok(Some(*i as usize)),
        Some(v) => Err(invalid(key, format!("expected an integer or None, got {v}"))),
    }
}

pub(crate) fn f64_or(map: &ParamMap, key: &str, default: f64) -> Result<f64> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| invalid(key, format!("expected a number, got {v}"))),
    }
}

pub(crate) fn bool_or(map: &ParamMap, key: &str, default: bool) -> Result<bool> {
    match map.get(key) {
        None => Ok(default),
        Some(ParamValue::Bool(b)) => Ok(*b),
        Some(ParamValue::Str(s)) if s.eq_ignore_ascii_case("true") => Ok(true),
        Some(ParamValue::Str(s)) if s.eq_ignore_ascii_case("false") => Ok(false),
        Some(v) => Err(invalid(key, format!("expected a boolean, got {v}"))),
    }
}

pub(crate) fn str_or<'a>(map: &'a ParamMap, key: &str, default: &'a str) -> Result<&'a str> {
    match map.get(key) {
        None => Ok(default),
        Some(ParamValue::Str(s)) => Ok(s.as_str()),
        Some(v) => Err(invalid(key, format!("expected a string, got {v}"))),
    }
}

pub(crate) fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(key, "must be positive"))
    }
}

pub(crate) fn at_least(key: &str, v: usize, min: usize) -> Result<usize> {
    if v >= min {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be at least {min}")))
    }
}
