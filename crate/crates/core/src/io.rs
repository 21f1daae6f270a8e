//! Text output helpers shared by the report writers.

use serde::Serialize;

use crate::error::{Error, Result};

/// Float with 17 significant digits, the CSV convention of the crate.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// JSON with object keys in sorted order, so equal values serialize to equal bytes.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Value keeps maps in a BTreeMap unless preserve_order is on.
    let v = serde_json::to_value(value).map_err(|e| Error::Io(e.to_string()))?;
    serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn canonical_keys_sorted() {
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: u8,
        }
        let s = canonical_json(&S { zeta: 1, alpha: 2 }).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
    }
}
