//! Manifests, cross-validation folds, training segments and the synthetic
//! corpus generator.

pub mod folds;
pub mod manifest;
pub mod segment;
pub mod synth;

pub use folds::{make_folds, read_folds, write_folds, FoldConfig, FoldSplit};
pub use manifest::{load_manifest, parse_manifest, write_manifest, IndividualRecord, Manifest, Sex, Symptoms};
pub use segment::{extract, sample_segment, Segment};
pub use synth::{synth_dataset, SynthConfig, SynthFacility};
