//! Versioned JSON persistence of [`CodecBundle`].

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::codec::{CodecBundle, IndexAssignment};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Array shapes stored next to the bundle so a reader can check them before use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shapes {
    pub quantizer_levels: usize,
    pub si_levels: usize,
    pub index_counts: Vec<usize>,
    pub tuples: usize,
    pub ladder_levels: usize,
    /// `[rows, cols]` of the index assignment, stored row-major.
    pub assignment: [usize; 2],
    /// `[ladder levels, SI levels, tuples]` of each prior and codebook table.
    pub decoder_tables: [usize; 3],
}

impl Shapes {
    pub fn of(bundle: &CodecBundle) -> Self {
        let tuples = bundle.ia.tuples();
        let si_levels = bundle.si_quantizer.levels();
        let ladder_levels = bundle.ladder().count();
        Self {
            quantizer_levels: bundle.quantizer.levels(),
            si_levels,
            index_counts: bundle.ia.space().counts().to_vec(),
            tuples,
            ladder_levels,
            assignment: [bundle.ia.cells(), tuples],
            decoder_tables: [ladder_levels, si_levels, tuples],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CodecFile {
    format_version: u32,
    shapes: Shapes,
    bundle: CodecBundle,
}

pub fn codec_to_string(bundle: &CodecBundle) -> Result<String> {
    let file = CodecFile {
        format_version: FORMAT_VERSION,
        shapes: Shapes::of(bundle),
        bundle: bundle.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

pub fn codec_from_str(text: &str) -> Result<CodecBundle> {
    let value: Value = serde_json::from_str(text)?;
    let found = value
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Format("missing format_version".into()))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(Error::IncompatibleVersion {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let file: CodecFile = serde_json::from_value(value)?;
    check(&file)?;
    Ok(file.bundle)
}

pub fn save_codec(bundle: &CodecBundle, path: &Path) -> Result<()> {
    fs::write(path, codec_to_string(bundle)?)?;
    Ok(())
}

pub fn load_codec(path: &Path) -> Result<CodecBundle> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    codec_from_str(&text)
}

fn check(file: &CodecFile) -> Result<()> {
    let b = &file.bundle;
    let bad = |what: &str| Err(Error::Format(format!("codec file: {what}")));
    if Shapes::of(b) != file.shapes {
        return bad("array shapes do not match the header");
    }
    let k = b.quantizer.levels();
    if k == 0 || b.quantizer.thresholds.len() + 1 != k || b.quantizer.cell_probs.len() != k {
        return bad("inconsistent source quantizer");
    }
    let s = b.si_quantizer.levels();
    if s == 0 || b.si_quantizer.thresholds.len() + 1 != s || b.si_quantizer.cell_probs.len() != s {
        return bad("inconsistent SI quantizer");
    }
    IndexAssignment::new(b.ia.cells(), b.ia.space().clone(), b.ia.table().to_vec())?;
    if !b.ia.is_hard() {
        return bad("index assignment is not hard");
    }
    let counts: Vec<usize> = b.channels.iter().map(|c| c.index_count).collect();
    if counts != b.ia.space().counts() {
        return bad("channels do not match the index alphabets");
    }
    let t = &b.tables;
    let l = b.ia.tuples();
    if t.levels.len() != t.ladder.count()
        || t.no_si_prior.len() != l
        || t.no_si_codebook.len() != l
        || t.levels.iter().any(|lv| {
            lv.si_levels != s
                || lv.tuples != l
                || lv.prior.len() != s * l
                || lv.codebook.len() != s * l
        })
    {
        return bad("decoder table sizes are inconsistent");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::bundle_with;

    fn tiny_bundle() -> CodecBundle {
        bundle_with(4, 8, &[2, 2], &[0, 1, 3, 2], 0.01, 0.05)
    }

    #[test]
    fn round_trip_is_exact() {
        let bundle = tiny_bundle();
        let text = codec_to_string(&bundle).unwrap();
        let back = codec_from_str(&text).unwrap();
        assert_eq!(back, bundle);
        assert_eq!(codec_to_string(&back).unwrap(), text);
    }

    #[test]
    fn version_mismatch() {
        let text = codec_to_string(&tiny_bundle()).unwrap();
        let bumped = text.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        assert_eq!(
            codec_from_str(&bumped).unwrap_err(),
            Error::IncompatibleVersion {
                found: 2,
                expected: 1
            }
        );
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let text = codec_to_string(&tiny_bundle()).unwrap();
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["shapes"]["tuples"] = Value::from(99);
        let err = codec_from_str(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        assert!(matches!(codec_from_str("{}"), Err(Error::Format(_))));
    }
}
