//! Human-facing number formatting: 6 significant digits everywhere.

use serde::Serialize;

/// Formats with 6 significant digits in the style of C's `%g`.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-4..6).contains(&exp) {
        trim(format!("{:.*}", (5 - exp) as usize, v))
    } else {
        let s = format!("{v:.5e}");
        let (mant, e) = s.split_once('e').expect("exponent form");
        format!("{}e{e}", trim(mant.to_string()))
    }
}

fn round6(v: f64) -> f64 {
    sig6(v).parse().unwrap_or(v)
}

/// Serializes the wrapped value with every float rounded to 6 significant digits.
pub struct Rounded<'a, T>(pub &'a T);

impl<T: Serialize> Serialize for Rounded<'_, T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut v = serde_json::to_value(self.0).map_err(serde::ser::Error::custom)?;
        round_value(&mut v);
        v.serialize(s)
    }
}

/// Rounds every float in a JSON value to 6 significant digits.
pub fn round_value(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round6).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_value),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}
