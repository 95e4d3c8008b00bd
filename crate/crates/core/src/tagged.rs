//! Internally tagged enums (`{"variant": "Name", ...}`) with field paths in
//! their error messages.
//!
//! serde buffers internally tagged content before dispatching, which drops
//! the location of any error inside a variant. Re-keying the object as
//! `{"Name": {...}}` and deserializing an externally tagged mirror keeps it.

use serde::de::{DeserializeOwned, Deserializer, Error as _};
use serde::Deserialize;
use serde_json::{Map, Value};

pub(crate) fn deserialize_tagged<'de, D, R>(d: D, tag: &str) -> Result<R, D::Error>
where
    D: Deserializer<'de>,
    R: DeserializeOwned,
{
    let mut fields = Map::<String, Value>::deserialize(d)?;
    let name = match fields.remove(tag) {
        Some(Value::String(s)) => s,
        Some(other) => {
            return Err(D::Error::custom(format!(
                "`{tag}` must be a string, got {other}"
            )))
        }
        None => return Err(D::Error::custom(format!("missing field `{tag}`"))),
    };
    let mut wrapped = Map::new();
    wrapped.insert(name, Value::Object(fields));
    serde_path_to_error::deserialize(Value::Object(wrapped)).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            D::Error::custom(e.into_inner())
        } else {
            D::Error::custom(format!("{path}: {}", e.into_inner()))
        }
    })
}
