//! Method and API signatures in canonical `unit.method(descriptor)` form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad signature `{input}`: {reason}")]
pub struct SignatureError {
    pub input: String,
    pub reason: &'static str,
}

/// A fully-qualified method signature.
///
/// The canonical string is `declaring_unit + "." + method_name + descriptor`,
/// where the descriptor starts at the first `(`. Two signatures are equal iff
/// their canonical strings are byte-equal, so the canonical string is the
/// only thing stored.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ApiSignature {
    canonical: String,
    // byte offsets of the method-name dot and the descriptor paren
    dot: usize,
    paren: usize,
}

impl ApiSignature {
    pub fn new(unit: &str, method: &str, descriptor: &str) -> Result<Self, SignatureError> {
        format!("{unit}.{method}{descriptor}").parse()
    }

    pub fn declaring_unit(&self) -> &str {
        &self.canonical[..self.dot]
    }

    pub fn method_name(&self) -> &str {
        &self.canonical[self.dot + 1..self.paren]
    }

    pub fn descriptor(&self) -> &str {
        &self.canonical[self.paren..]
    }

    pub fn as_str(&self) -> &str {
        &self.canonical
    }

    /// True if the declaring unit starts with `prefix` (plain string prefix).
    pub fn unit_has_prefix(&self, prefix: &str) -> bool {
        self.declaring_unit().starts_with(prefix)
    }
}

impl FromStr for ApiSignature {
    type Err = SignatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| SignatureError {
            input: s.to_string(),
            reason,
        };
        if s.chars().any(char::is_whitespace) {
            return Err(err("whitespace in signature"));
        }
        let paren = s.find('(').ok_or_else(|| err("missing descriptor"))?;
        let head = &s[..paren];
        let dot = head.rfind('.').ok_or_else(|| err("missing declaring unit"))?;
        if dot == 0 {
            return Err(err("empty declaring unit"));
        }
        if dot + 1 == paren {
            return Err(err("empty method name"));
        }
        if !s[paren..].contains(')') {
            return Err(err("unterminated descriptor"));
        }
        Ok(Self {
            canonical: s.to_string(),
            dot,
            paren,
        })
    }
}

impl fmt::Display for ApiSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

impl fmt::Debug for ApiSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sig({})", self.canonical)
    }
}

impl Serialize for ApiSignature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.canonical)
    }
}

impl<'de> Deserialize<'de> for ApiSignature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    AppDefined,
    Framework,
}

/// A method together with where its code lives.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodId {
    pub signature: ApiSignature,
    pub origin: Origin,
}

impl MethodId {
    pub fn app(signature: ApiSignature) -> Self {
        Self {
            signature,
            origin: Origin::AppDefined,
        }
    }

    pub fn framework(signature: ApiSignature) -> Self {
        Self {
            signature,
            origin: Origin::Framework,
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.signature.fmt(f)
    }
}

/// Units treated as platform code when a reflective target is not in the model.
pub const FRAMEWORK_PREFIXES: &[&str] = &[
    "android.",
    "androidx.",
    "java.",
    "javax.",
    "dalvik.",
    "kotlin.",
    "com.android.",
];

pub fn is_framework_unit(unit: &str) -> bool {
    FRAMEWORK_PREFIXES.iter().any(|p| unit.starts_with(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_parts() {
        let s: ApiSignature = "java.lang.reflect.Method.invoke(Ljava/lang/Object;[Ljava/lang/Object;)Ljava/lang/Object;"
            .parse()
            .unwrap();
        assert_eq!(s.declaring_unit(), "java.lang.reflect.Method");
        assert_eq!(s.method_name(), "invoke");
        assert!(s.descriptor().starts_with("(Ljava"));
    }

    #[test]
    fn new_roundtrips_canonical() {
        let s = ApiSignature::new("com.ex.Main", "onCreate", "()V").unwrap();
        assert_eq!(s.as_str(), "com.ex.Main.onCreate()V");
        assert_eq!(s, "com.ex.Main.onCreate()V".parse().unwrap());
    }

    #[test]
    fn rejects_bad_forms() {
        for bad in ["noparen", ".m()", "a.()", "a.b(", "a. b()", "m()"] {
            assert!(bad.parse::<ApiSignature>().is_err(), "{bad}");
        }
    }

    #[test]
    fn init_names_allowed() {
        let s: ApiSignature = "com.ex.A.<init>()V".parse().unwrap();
        assert_eq!(s.method_name(), "<init>");
    }
}
