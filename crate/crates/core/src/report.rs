//! Bound reports and the JSON writer shared by every output file.

use std::io;

use serde::{Deserialize, Deserializer, Serialize};

/// Bracket on a norm. `certified_*` values are rigorous up to floating-point
/// rounding; `heuristic_*` values come from nonconvex search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub certified_lower: f64,
    pub heuristic_lower: f64,
    /// Best estimate from above; not a proven bound.
    #[serde(deserialize_with = "null_as_infinity")]
    pub heuristic_upper: f64,
    /// `+∞` (serialized as `null`) when no finite bound is available.
    #[serde(deserialize_with = "null_as_infinity")]
    pub certified_upper: f64,
    pub method: String,
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl BoundReport {
    pub fn exact(value: f64, method: impl Into<String>) -> Self {
        BoundReport {
            certified_lower: value,
            heuristic_lower: value,
            heuristic_upper: value,
            certified_upper: value,
            method: method.into(),
            iterations: 0,
            restarts: 0,
            seed: 0,
        }
    }

    pub fn zero(method: impl Into<String>) -> Self {
        Self::exact(0.0, method)
    }

    /// Enforce `0 <= cl <= hl <= hu <= cu`. Certified values win conflicts:
    /// heuristics are pulled into the certified bracket.
    pub fn clamped(mut self) -> Self {
        let fix = |x: f64| if x.is_nan() { 0.0 } else { x.max(0.0) };
        self.certified_lower = fix(self.certified_lower);
        self.certified_upper = if self.certified_upper.is_nan() { f64::INFINITY } else { self.certified_upper.max(self.certified_lower) };
        self.heuristic_lower = fix(self.heuristic_lower).clamp(self.certified_lower, self.certified_upper);
        let hu = if self.heuristic_upper.is_nan() { self.certified_upper } else { self.heuristic_upper };
        self.heuristic_upper = hu.clamp(self.heuristic_lower, self.certified_upper);
        self
    }

    pub fn contains(&self, x: f64, rel_tol: f64) -> bool {
        let slack = rel_tol * x.abs().max(1e-300);
        self.certified_lower <= x + slack && x - slack <= self.certified_upper
    }

    pub fn with_meta(mut self, iterations: usize, restarts: usize, seed: u64) -> Self {
        self.iterations = iterations;
        self.restarts = restarts;
        self.seed = seed;
        self
    }
}

fn null_as_infinity<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// serde helper for `f64` fields that may be `+∞`.
pub mod inf_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Pretty JSON formatter that prints every float with 17 significant digits.
struct SigFigFormatter<'a> {
    inner: serde_json::ser::PrettyFormatter<'a>,
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.inner.$name(w $(, $arg)*)
        })*
    };
}

impl serde_json::ser::Formatter for SigFigFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

/// Serialize with 17 significant digits per float and a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let fmt = SigFigFormatter { inner: serde_json::ser::PrettyFormatter::with_indent(b"  ") };
    let mut ser = serde_json::Serializer::with_formatter(&mut out, fmt);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}
