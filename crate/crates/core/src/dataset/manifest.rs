//! Manifest CSV ingestion and emission.
//!
//! Header:
//! `individual_id,facility,age,sex,symptom_cough,symptom_fever,symptom_dyspnea,rtpcr_positive,cough_path_1,cough_path_2,cough_path_3`
//!
//! Booleans are `0`/`1`; audio paths are relative to the manifest directory.
//! Row numbers in errors are file line numbers (the header is line 1).

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HEADER: [&str; 11] = [
    "individual_id",
    "facility",
    "age",
    "sex",
    "symptom_cough",
    "symptom_fever",
    "symptom_dyspnea",
    "rtpcr_positive",
    "cough_path_1",
    "cough_path_2",
    "cough_path_3",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    M,
    F,
    Other,
}

impl FromStr for Sex {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "M" | "m" => Ok(Sex::M),
            "F" | "f" => Ok(Sex::F),
            "other" | "Other" | "O" => Ok(Sex::Other),
            o => Err(format!("sex '{o}' is not one of M, F, other")),
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::M => "M",
            Sex::F => "F",
            Sex::Other => "other",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Symptoms {
    pub cough: bool,
    pub fever: bool,
    pub dyspnea: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualRecord {
    pub individual_id: String,
    pub facility: String,
    pub age: f64,
    pub sex: Sex,
    pub symptoms: Symptoms,
    pub rtpcr_positive: bool,
    /// Absolute (or manifest-dir-joined) paths of the three cough clips.
    pub cough_paths: [PathBuf; 3],
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub path: PathBuf,
    pub records: Vec<IndividualRecord>,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn n_positive(&self) -> usize {
        self.records.iter().filter(|r| r.rtpcr_positive).count()
    }

    pub fn by_id(&self) -> HashMap<&str, &IndividualRecord> {
        self.records.iter().map(|r| (r.individual_id.as_str(), r)).collect()
    }
}

fn parse_bool(s: &str, col: &str, row: usize) -> Result<bool> {
    match s.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        o => Err(Error::SchemaError { row, message: format!("{col} must be 0 or 1, got '{o}'") }),
    }
}

/// Parses manifest text. Paths are joined onto `base_dir`; existence is not
/// checked here.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<(Vec<IndividualRecord>, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != HEADER {
        return Err(Error::SchemaError { row: 1, message: format!("expected header {}, got {}", HEADER.join(","), header.join(",")) });
    }
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        if rec.len() != HEADER.len() {
            let paths = rec.len().saturating_sub(8);
            return Err(Error::SchemaError {
                row,
                message: format!("expected {} fields (3 cough paths), got {} ({paths} cough paths)", HEADER.len(), rec.len()),
            });
        }
        let id = rec[0].to_owned();
        if id.is_empty() {
            return Err(Error::SchemaError { row, message: "empty individual_id".into() });
        }
        if let Some(&first) = seen.get(&id) {
            log::debug!("{id} first seen on line {first}");
            return Err(Error::DuplicateId { id, row });
        }
        seen.insert(id.clone(), row);
        let facility = rec[1].to_owned();
        if facility.is_empty() {
            return Err(Error::SchemaError { row, message: "empty facility".into() });
        }
        let age: f64 = rec[2].parse().map_err(|_| Error::SchemaError { row, message: format!("age '{}' is not a number", &rec[2]) })?;
        if !(0.0..=130.0).contains(&age) {
            warnings.push(format!("line {row}: implausible age {age}"));
        }
        let sex: Sex = rec[3].parse().map_err(|m| Error::SchemaError { row, message: m })?;
        let symptoms = Symptoms {
            cough: parse_bool(&rec[4], HEADER[4], row)?,
            fever: parse_bool(&rec[5], HEADER[5], row)?,
            dyspnea: parse_bool(&rec[6], HEADER[6], row)?,
        };
        let rtpcr_positive = parse_bool(&rec[7], HEADER[7], row)?;
        let mut paths: [PathBuf; 3] = Default::default();
        for (k, p) in paths.iter_mut().enumerate() {
            let s = &rec[8 + k];
            if s.is_empty() {
                return Err(Error::SchemaError { row, message: format!("{} is empty", HEADER[8 + k]) });
            }
            *p = base_dir.join(s);
        }
        records.push(IndividualRecord { individual_id: id, facility, age, sex, symptoms, rtpcr_positive, cough_paths: paths });
    }
    Ok((records, warnings))
}

/// Loads and validates a manifest; every missing audio file is reported.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading manifest {}", path.display()), e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let (records, warnings) = parse_manifest(&text, base)?;
    let missing: Vec<(usize, PathBuf)> = records
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.cough_paths.iter().filter(|p| !p.is_file()).map(move |p| (i + 2, p.clone())))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingAudio(missing));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Manifest { path: path.to_owned(), records, warnings })
}

/// Writes a manifest with paths made relative to the manifest directory
/// where possible.
pub fn write_manifest(path: &Path, records: &[IndividualRecord]) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new("."));
    crate::io_util::write_csv(path, &HEADER, |w| {
        for r in records {
            let b = |v: bool| if v { "1" } else { "0" }.to_string();
            let mut row = vec![
                r.individual_id.clone(),
                r.facility.clone(),
                format!("{}", r.age),
                r.sex.to_string(),
                b(r.symptoms.cough),
                b(r.symptoms.fever),
                b(r.symptoms.dyspnea),
                b(r.rtpcr_positive),
            ];
            for p in &r.cough_paths {
                let rel = p.strip_prefix(base).unwrap_or(p);
                row.push(rel.to_string_lossy().replace('\\', "/"));
            }
            w.write_record(&row)?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(rows: &[&str]) -> String {
        let mut s = HEADER.join(",");
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s
    }

    #[test]
    fn three_rows() {
        let t = text(&[
            "a,F1,30,M,1,0,0,1,a1.wav,a2.wav,a3.wav",
            "b,F1,41,F,0,0,0,0,b1.wav,b2.wav,b3.wav",
            "c,F2,52,other,1,1,1,1,c1.wav,c2.wav,c3.wav",
        ]);
        let (recs, warn) = parse_manifest(&t, Path::new("/data")).unwrap();
        assert_eq!(recs.len(), 3);
        assert!(warn.is_empty());
        assert_eq!(recs[2].cough_paths[1], PathBuf::from("/data/c2.wav"));
        assert!(recs[0].rtpcr_positive && !recs[1].rtpcr_positive);
        assert_eq!(recs[2].sex, Sex::Other);
    }

    #[test]
    fn two_paths_names_row() {
        let t = text(&["a,F1,30,M,1,0,0,1,a1.wav,a2.wav,a3.wav", "b,F1,41,F,0,0,0,0,b1.wav,b2.wav"]);
        match parse_manifest(&t, Path::new(".")) {
            Err(Error::SchemaError { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_id() {
        let t = text(&["a,F1,30,M,1,0,0,1,x,y,z", "a,F1,30,M,1,0,0,1,x,y,z"]);
        assert!(matches!(parse_manifest(&t, Path::new(".")), Err(Error::DuplicateId { row: 3, .. })));
    }

    #[test]
    fn bad_bool_and_header() {
        let t = text(&["a,F1,30,M,yes,0,0,1,x,y,z"]);
        assert!(matches!(parse_manifest(&t, Path::new(".")), Err(Error::SchemaError { row: 2, .. })));
        assert!(matches!(parse_manifest("id,facility\n", Path::new(".")), Err(Error::SchemaError { row: 1, .. })));
    }

    #[test]
    fn missing_audio_lists_rows() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a1.wav"), b"").unwrap();
        let t = text(&["a,F1,30,M,1,0,0,1,a1.wav,a2.wav,a3.wav"]);
        let p = dir.path().join("m.csv");
        std::fs::write(&p, t).unwrap();
        match load_manifest(&p) {
            Err(Error::MissingAudio(v)) => {
                assert_eq!(v.len(), 2);
                assert!(v.iter().all(|(r, _)| *r == 2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<IndividualRecord> = (0..3)
            .map(|i| IndividualRecord {
                individual_id: format!("p{i}"),
                facility: "F3".into(),
                age: 20.0 + i as f64,
                sex: Sex::F,
                symptoms: Symptoms { cough: i == 1, ..Default::default() },
                rtpcr_positive: i == 2,
                cough_paths: std::array::from_fn(|k| dir.path().join(format!("audio/p{i}_{k}.wav"))),
            })
            .collect();
        let p = dir.path().join("manifest.csv");
        write_manifest(&p, &recs).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("audio/p0_0.wav"));
        let (back, _) = parse_manifest(&text, dir.path()).unwrap();
        assert_eq!(back, recs);
    }
}
