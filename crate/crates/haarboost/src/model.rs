//! Strong-classifier persistence: a small versioned JSON document whose
//! floats are written with 17 significant digits, so saving and loading is
//! lossless and two equal classifiers produce byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boosting::{StrongClassifier, VotingRound};
use crate::features::{FeatureTable, FeatureType, HaarFeature};
use crate::imaging::Rect;
use crate::{jsonio, Error, Result};

pub const MODEL_VERSION: u32 = 1;

/// Serialized feature descriptor: the geometry is stored flat alongside the
/// canonical index so a reader needs no enumeration code, yet the index
/// lets the loader cross-check against the canonical table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureSpec {
    ftype: FeatureType,
    x: u32,
    y: u32,
    w: u32,
    h: u32,
    global_index: u32,
}

impl From<&HaarFeature> for FeatureSpec {
    fn from(f: &HaarFeature) -> FeatureSpec {
        FeatureSpec {
            ftype: f.ftype,
            x: f.bounds.x,
            y: f.bounds.y,
            w: f.bounds.w,
            h: f.bounds.h,
            global_index: f.global_index,
        }
    }
}

impl FeatureSpec {
    fn to_feature(self) -> HaarFeature {
        HaarFeature {
            ftype: self.ftype,
            bounds: Rect::new(self.x, self.y, self.w, self.h),
            global_index: self.global_index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoundSpec {
    feature: FeatureSpec,
    theta: f64,
    polarity: i8,
    alpha: f64,
}

/// The on-disk document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    version: u32,
    window: u32,
    rounds: Vec<RoundSpec>,
}

/// Renders a classifier to its canonical JSON text (one line, trailing
/// newline). Equal classifiers render to identical bytes.
pub fn to_json(sc: &StrongClassifier) -> Result<String> {
    let doc = ModelDoc {
        version: MODEL_VERSION,
        window: sc.window,
        rounds: sc
            .rounds
            .iter()
            .map(|r| RoundSpec {
                feature: FeatureSpec::from(&r.feature),
                theta: r.theta,
                polarity: r.polarity,
                alpha: r.alpha,
            })
            .collect(),
    };
    let mut text = jsonio::to_string(&doc)?;
    text.push('\n');
    Ok(text)
}

pub fn save(sc: &StrongClassifier, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(sc)?)?;
    Ok(())
}

/// Parses and validates a model document.
///
/// Validation is strict: version and window must be supported, every
/// feature's geometry must match its global index in the canonical
/// enumeration, polarity must be ±1, and alpha/theta must be finite.
pub fn from_json(text: &str) -> Result<StrongClassifier> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    if doc.version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported version {} (expected {MODEL_VERSION})",
            doc.version
        )));
    }
    if doc.window < 3 {
        return Err(Error::ModelFormat(format!(
            "window {} is too small",
            doc.window
        )));
    }
    if doc.rounds.is_empty() {
        return Err(Error::ModelFormat("no voting rounds".to_string()));
    }
    let table = FeatureTable::enumerate(doc.window);
    let mut rounds = Vec::with_capacity(doc.rounds.len());
    for (i, spec) in doc.rounds.iter().enumerate() {
        let feature = spec.feature.to_feature();
        if spec.feature.global_index >= table.census().total {
            return Err(Error::ModelFormat(format!(
                "round {i}: global_index {} out of range for window {}",
                spec.feature.global_index, doc.window
            )));
        }
        let canonical = table.get(spec.feature.global_index);
        if *canonical != feature {
            return Err(Error::ModelFormat(format!(
                "round {i}: feature geometry does not match global_index {}",
                spec.feature.global_index
            )));
        }
        if spec.polarity != 1 && spec.polarity != -1 {
            return Err(Error::ModelFormat(format!(
                "round {i}: polarity must be 1 or -1, got {}",
                spec.polarity
            )));
        }
        if !spec.theta.is_finite() || !spec.alpha.is_finite() {
            return Err(Error::ModelFormat(format!(
                "round {i}: non-finite theta or alpha"
            )));
        }
        rounds.push(VotingRound {
            feature,
            theta: spec.theta,
            polarity: spec.polarity,
            alpha: spec.alpha,
        });
    }
    Ok(StrongClassifier {
        window: doc.window,
        rounds,
    })
}

pub fn load(path: &Path) -> Result<StrongClassifier> {
    let text = std::fs::read_to_string(path)?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boosting::{stump_decision, SequentialExecutor};
    use crate::dataset::synth;

    fn trained() -> (crate::dataset::Dataset, StrongClassifier) {
        let ds = synth(21, 12, 12);
        let table = FeatureTable::enumerate(24);
        let out = crate::boosting::train(&ds, &table, 4000, 3, &mut SequentialExecutor, |_| ())
            .unwrap();
        (ds, out.classifier)
    }

    #[test]
    fn round_trip_is_exact_equality() {
        let (_, sc) = trained();
        let text = to_json(&sc).unwrap();
        let back = from_json(&text).unwrap();
        assert_eq!(back, sc);
        // Re-rendering gives identical bytes.
        assert_eq!(to_json(&back).unwrap(), text);
    }

    #[test]
    fn save_and_load_via_disk() {
        let (ds, sc) = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save(&sc, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back, sc);
        for ex in ds.examples() {
            assert_eq!(back.classify(&ex.image), sc.classify(&ex.image));
        }
    }

    /// Independent evaluator: walk the raw JSON document (not the loader's
    /// structs) and recompute the weighted vote from scratch.
    #[test]
    fn vote_matches_independent_document_walker() {
        let (ds, sc) = trained();
        let text = to_json(&sc).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["version"], 1);
        assert_eq!(doc["window"], 24);
        let table = FeatureTable::enumerate(24);
        for ex in ds.examples() {
            let mut vote = 0.0f64;
            let mut total = 0.0f64;
            for round in doc["rounds"].as_array().unwrap() {
                let idx = round["feature"]["global_index"].as_u64().unwrap() as u32;
                let theta = round["theta"].as_f64().unwrap();
                let polarity = round["polarity"].as_i64().unwrap() as i8;
                let alpha = round["alpha"].as_f64().unwrap();
                let value = table.get(idx).evaluate(&ex.image) as f64;
                if stump_decision(value, theta, polarity) == 1 {
                    vote += alpha;
                }
                total += alpha;
            }
            let label = (vote >= 0.5 * total) as u8;
            assert_eq!(label, sc.classify(&ex.image));
        }
    }

    #[test]
    fn loader_rejects_corrupt_documents() {
        let (_, sc) = trained();
        let good = to_json(&sc).unwrap();

        let v: serde_json::Value = serde_json::from_str(&good).unwrap();

        let mut wrong_version = v.clone();
        wrong_version["version"] = 2.into();
        let err = from_json(&wrong_version.to_string()).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");

        let mut bad_geometry = v.clone();
        bad_geometry["rounds"][0]["feature"]["x"] =
            (v["rounds"][0]["feature"]["x"].as_u64().unwrap() + 1).into();
        let err = from_json(&bad_geometry.to_string()).unwrap_err().to_string();
        assert!(err.contains("does not match"), "{err}");

        let mut bad_polarity = v.clone();
        bad_polarity["rounds"][0]["polarity"] = 0.into();
        let err = from_json(&bad_polarity.to_string()).unwrap_err().to_string();
        assert!(err.contains("polarity"), "{err}");

        let mut bad_index = v.clone();
        bad_index["rounds"][0]["feature"]["global_index"] = 999_999.into();
        assert!(from_json(&bad_index.to_string()).is_err());

        let mut extra_field = v.clone();
        extra_field["rounds"][0]["surprise"] = 1.into();
        assert!(from_json(&extra_field.to_string()).is_err());

        let mut empty = v;
        empty["rounds"] = serde_json::Value::Array(vec![]);
        let err = from_json(&empty.to_string()).unwrap_err().to_string();
        assert!(err.contains("no voting rounds"), "{err}");

        assert!(from_json("not json").is_err());
    }

    #[test]
    fn equal_classifiers_serialize_to_identical_bytes() {
        let ds = synth(5, 10, 10);
        let table = FeatureTable::enumerate(24);
        let a = crate::boosting::train(&ds, &table, 3000, 2, &mut SequentialExecutor, |_| ())
            .unwrap()
            .classifier;
        let b = crate::boosting::train(&ds, &table, 3000, 2, &mut SequentialExecutor, |_| ())
            .unwrap()
            .classifier;
        assert_eq!(to_json(&a).unwrap(), to_json(&b).unwrap());
    }
}
