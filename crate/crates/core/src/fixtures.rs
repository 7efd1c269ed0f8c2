//! Reference tables bundled with the crate.
//!
//! - `raw_scaling.csv`: 21 design variants evaluated at 0.5B, 1.5B, 4B and 7B
//!   (average benchmark score, [`crate::scalelab::RunMatrix`] layout).
//! - `group1.csv`, `group2.csv`: video/image/text accuracies of 10 models on
//!   10 benchmark columns ([`crate::benchcraft::BenchScore`] layout).

use std::path::{Path, PathBuf};

use crate::benchcraft::{read_scores, BenchScore};
use crate::error::{Error, Result};
use crate::scalelab::RunMatrix;

pub struct Fixture {
    pub name: &'static str,
    pub description: &'static str,
    pub contents: &'static str,
}

pub const RAW_SCALING: &str = include_str!("../fixtures/raw_scaling.csv");
pub const GROUP1: &str = include_str!("../fixtures/group1.csv");
pub const GROUP2: &str = include_str!("../fixtures/group2.csv");

pub const ALL: [Fixture; 3] = [
    Fixture {
        name: "raw_scaling.csv",
        description: "21 design variants x 4 LLM sizes, average score",
        contents: RAW_SCALING,
    },
    Fixture {
        name: "group1.csv",
        description: "per-modality accuracy, NExT-QA / Perception-Test / TempCompass",
        contents: GROUP1,
    },
    Fixture {
        name: "group2.csv",
        description: "per-modality accuracy, LongVideoBench / MLVU / Video-MME",
        contents: GROUP2,
    },
];

pub fn get(name: &str) -> Option<&'static Fixture> {
    ALL.iter().find(|f| f.name == name || f.name.trim_end_matches(".csv") == name)
}

pub fn raw_scaling() -> RunMatrix {
    RunMatrix::from_csv(RAW_SCALING.as_bytes()).expect("bundled scaling table parses")
}

/// Both benchmark groups, group 1 first.
pub fn benchmark_scores() -> Vec<BenchScore> {
    [GROUP1, GROUP2]
        .iter()
        .flat_map(|t| read_scores(t.as_bytes()).expect("bundled score table parses"))
        .collect()
}

/// Writes every fixture into `dir` and returns the written paths.
pub fn export(dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    ALL.iter()
        .map(|f| {
            let path = dir.join(f.name);
            std::fs::write(&path, f.contents).map_err(Error::from)?;
            Ok(path)
        })
        .collect()
}
