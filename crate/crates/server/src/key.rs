use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Identifies one classifier of one user.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelKey {
    pub user_id: String,
    pub classifier_id: String,
}

impl ModelKey {
    pub fn new(user_id: impl Into<String>, classifier_id: impl Into<String>) -> Self {
        ModelKey {
            user_id: user_id.into(),
            classifier_id: classifier_id.into(),
        }
    }

    pub fn is_valid(&self) -> bool {
        !self.user_id.is_empty() && !self.classifier_id.is_empty()
    }

    /// `<data_dir>/<user>/<classifier>.rlv` with both ids encoded by
    /// [`encode_component`].
    pub fn checkpoint_path(&self, data_dir: &Path) -> PathBuf {
        data_dir
            .join(encode_component(&self.user_id))
            .join(format!("{}.rlv", encode_component(&self.classifier_id)))
    }
}

impl fmt::Display for ModelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.user_id, self.classifier_id)
    }
}

/// File-name-safe, injective encoding: `[A-Za-z0-9-]` pass through, every
/// other byte (including `_`) becomes `_` plus two lowercase hex digits.
pub fn encode_component(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for b in id.bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' {
            out.push(b as char);
        } else {
            out.push_str(&format!("_{b:02x}"));
        }
    }
    out
}

pub fn decode_component(encoded: &str) -> Option<String> {
    let bytes = encoded.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'_' {
            let hex = encoded.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encoding_examples() {
        assert_eq!(encode_component("alice"), "alice");
        assert_eq!(encode_component("a_b"), "a_5fb");
        assert_eq!(encode_component("../x"), "_2e_2e_2fx");
        assert_eq!(encode_component("é"), "_c3_a9");
        let p = ModelKey::new("u 1", "fire").checkpoint_path(Path::new("/d"));
        assert_eq!(p, Path::new("/d/u_201/fire.rlv"));
    }

    proptest! {
        #[test]
        fn encoding_round_trips(s in "\\PC{0,20}") {
            let e = encode_component(&s);
            prop_assert!(e.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_'));
            prop_assert_eq!(decode_component(&e), Some(s));
        }

        #[test]
        fn encoding_is_injective(a in "[a-z_0-9]{0,6}", b in "[a-z_0-9]{0,6}") {
            prop_assume!(a != b);
            prop_assert_ne!(encode_component(&a), encode_component(&b));
        }
    }
}
