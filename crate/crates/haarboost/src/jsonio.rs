//! JSON writing with floats as 17-significant-digit decimals, enough to
//! round-trip any finite 64-bit float exactly. Model files and wire
//! messages both use this, so values survive disk and network unchanged.
//! Documents written here never contain `null`: a NaN or infinity (which
//! standard JSON writers encode as `null`) is an error instead.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

/// Compact JSON, floats at 17 significant digits (`d.16e±x`).
struct SigDigits17;

impl Formatter for SigDigits17 {
    // serde_json routes NaN and the infinities here rather than to
    // write_f64, and nothing this crate serializes is nullable.
    fn write_null<W>(&mut self, _writer: &mut W) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "null (or a non-finite float) has no representation here",
        ))
    }

    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        if !value.is_finite() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                "non-finite float has no JSON representation",
            ));
        }
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes to a compact JSON string with exact-round-trip floats.
pub fn to_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigits17);
    value.serialize(&mut ser)?;
    // The formatter only ever writes UTF-8.
    Ok(String::from_utf8(out).expect("serializer emits UTF-8"))
}
