use std::fs;
use std::path::Path;

use super::{Atlas, AtlasError, Result};

/// Canonical JSON: compact, object keys in ascending order (every
/// serialized struct declares its fields alphabetically and maps are
/// `BTreeMap`s), floats in shortest round-trip form, trailing newline.
pub fn to_canonical_json(atlas: &Atlas) -> Result<String> {
    let mut text = serde_json::to_string(atlas).map_err(|e| AtlasError::Parse(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Parses and validates an atlas document. Records are put in canonical
/// (id) order before validation.
pub fn from_json(text: &str) -> Result<Atlas> {
    let mut atlas: Atlas = serde_json::from_str(text).map_err(|e| AtlasError::Parse(e.to_string()))?;
    atlas.normalize();
    atlas.validate()?;
    Ok(atlas)
}

pub fn save_atlas(atlas: &Atlas, destination: &Path) -> Result<()> {
    atlas.validate()?;
    let text = to_canonical_json(atlas)?;
    write_atomically(destination, text.as_bytes())
}

pub fn load_atlas(source: &Path) -> Result<Atlas> {
    let text = fs::read_to_string(source).map_err(AtlasError::io(source))?;
    from_json(&text)
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partially written document.
pub(crate) fn write_atomically(destination: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = destination.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(AtlasError::io(parent))?;
    }
    let mut tmp = destination.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes).map_err(AtlasError::io(&tmp))?;
    fs::rename(&tmp, destination).map_err(AtlasError::io(destination))
}

#[cfg(test)]
mod tests {
    use super::super::build::fixture;
    use super::super::build_atlas;
    use super::*;
    use serde::de::{self, Deserialize, Deserializer, MapAccess, SeqAccess, Visitor};

    /// Walks a JSON document and fails if any object's keys are not
    /// strictly ascending.
    struct SortedKeys;

    impl<'de> Deserialize<'de> for SortedKeys {
        fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
            d.deserialize_any(SortedKeysVisitor)
        }
    }

    struct SortedKeysVisitor;

    impl<'de> Visitor<'de> for SortedKeysVisitor {
        type Value = SortedKeys;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("any JSON value")
        }
        fn visit_bool<E>(self, _: bool) -> std::result::Result<SortedKeys, E> {
            Ok(SortedKeys)
        }
        fn visit_i64<E>(self, _: i64) -> std::result::Result<SortedKeys, E> {
            Ok(SortedKeys)
        }
        fn visit_u64<E>(self, _: u64) -> std::result::Result<SortedKeys, E> {
            Ok(SortedKeys)
        }
        fn visit_f64<E>(self, _: f64) -> std::result::Result<SortedKeys, E> {
            Ok(SortedKeys)
        }
        fn visit_str<E>(self, _: &str) -> std::result::Result<SortedKeys, E> {
            Ok(SortedKeys)
        }
        fn visit_unit<E>(self) -> std::result::Result<SortedKeys, E> {
            Ok(SortedKeys)
        }
        fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<SortedKeys, A::Error> {
            while seq.next_element::<SortedKeys>()?.is_some() {}
            Ok(SortedKeys)
        }
        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<SortedKeys, A::Error> {
            let mut last: Option<String> = None;
            while let Some(key) = map.next_key::<String>()? {
                if let Some(prev) = &last {
                    if *prev >= key {
                        return Err(de::Error::custom(format!("key {key:?} follows {prev:?}")));
                    }
                }
                map.next_value::<SortedKeys>()?;
                last = Some(key);
            }
            Ok(SortedKeys)
        }
    }

    fn fixture_atlas() -> Atlas {
        build_atlas(fixture::input(10, 2, 3), &fixture::params()).unwrap()
    }

    #[test]
    fn round_trip_and_byte_stability() {
        let atlas = fixture_atlas();
        let text = to_canonical_json(&atlas).unwrap();
        let back = from_json(&text).unwrap();
        assert_eq!(back, atlas);
        assert_eq!(to_canonical_json(&back).unwrap(), text);
        serde_json::from_str::<SortedKeys>(&text).unwrap();
    }

    #[test]
    fn top_level_keys() {
        let text = to_canonical_json(&fixture_atlas()).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        let keys: Vec<&String> = value.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["bounds", "dynamic_points", "image_model", "params", "terms", "text_model", "textures", "version"]);
    }

    #[test]
    fn four_textures_on_a_term_is_rejected() {
        let atlas = fixture_atlas();
        let mut value: serde_json::Value = serde_json::from_str(&to_canonical_json(&atlas).unwrap()).unwrap();
        // Re-point two textures of T01 at T00 so T00 owns four.
        for t in value["textures"].as_array_mut().unwrap() {
            if t["term_id"] == "T01" {
                t["term_id"] = "T00".into();
            }
        }
        let err = from_json(&value.to_string()).unwrap_err();
        assert!(err.to_string().contains("between 1 and 3"), "{err}");
    }

    #[test]
    fn truncated_document_is_a_parse_error() {
        let text = to_canonical_json(&fixture_atlas()).unwrap();
        assert!(matches!(from_json(&text[..text.len() / 2]), Err(AtlasError::Parse(_))));
    }

    #[test]
    fn tampered_coordinate_is_caught() {
        let atlas = fixture_atlas();
        let mut value: serde_json::Value = serde_json::from_str(&to_canonical_json(&atlas).unwrap()).unwrap();
        value["terms"][0]["coord"][0] = 1234.5.into();
        let err = from_json(&value.to_string()).unwrap_err();
        assert!(matches!(err, AtlasError::Invariant(_)), "{err}");
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/atlas.json");
        let atlas = fixture_atlas();
        save_atlas(&atlas, &path).unwrap();
        let first = fs::read(&path).unwrap();
        save_atlas(&load_atlas(&path).unwrap(), &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }
}
