//! Problem identifiers shared by `solve` and `bench`.
//!
//! Grammar: `ex1:N:g`, `ex2:N:g`, `ex3:N:g`, `libsvm:PATH` or `csv:PATH`.
//! File problems get `min(300, n)` random groups unless a count is given.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sqrtreg::data::{load_csv, load_libsvm, random_group_assignment, Column, Example, SyntheticSpec};
use sqrtreg::{normalize_columns, Dataset, GroupStructure};

use crate::error::{CliError, Result};

pub const DEFAULT_FILE_GROUPS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Synthetic { example: Example, n_samples: usize, g: usize },
    Libsvm(PathBuf),
    Csv(PathBuf),
}

impl Source {
    /// File source chosen by extension: `.csv` or the sparse text format.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Source::Csv(path.to_path_buf()),
            _ => Source::Libsvm(path.to_path_buf()),
        }
    }

    pub fn id(&self) -> String {
        match self {
            Source::Synthetic { example, n_samples, g } => {
                let name = match example {
                    Example::Ex1 => "ex1",
                    Example::Ex2 => "ex2",
                    Example::Ex3 => "ex3",
                };
                format!("{name}:{n_samples}:{g}")
            }
            Source::Libsvm(p) => format!("libsvm:{}", p.display()),
            Source::Csv(p) => format!("csv:{}", p.display()),
        }
    }
}

impl FromStr for Source {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || CliError::Usage(format!("unrecognized problem {s:?}; expected exK:N:g, libsvm:PATH or csv:PATH"));
        let (head, rest) = s.split_once(':').ok_or_else(bad)?;
        match head {
            "libsvm" => Ok(Source::Libsvm(rest.into())),
            "csv" => Ok(Source::Csv(rest.into())),
            _ => {
                let example: Example = head.parse().map_err(|_| bad())?;
                let (n, g) = rest.split_once(':').ok_or_else(bad)?;
                Ok(Source::Synthetic {
                    example,
                    n_samples: n.parse().map_err(|_| bad())?,
                    g: g.parse().map_err(|_| bad())?,
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub id: String,
    pub dataset: Dataset,
    pub groups: GroupStructure,
}

/// Loads or generates the data; `file_groups` overrides the random group count
/// for file sources.
pub fn build(source: &Source, seed: u64, normalize: bool, file_groups: Option<usize>) -> Result<Problem> {
    let (dataset, groups) = match source {
        Source::Synthetic { example, n_samples, g } => {
            let s = SyntheticSpec::new(*example, *n_samples, *g, seed).generate()?;
            (s.dataset, s.groups)
        }
        Source::Libsvm(p) | Source::Csv(p) => {
            let ds = if matches!(source, Source::Csv(_)) {
                load_csv(p, &Column::Index(last_csv_column(p)?), true)?
            } else {
                load_libsvm(p)?
            };
            let n = ds.n_features();
            let g = file_groups.unwrap_or(DEFAULT_FILE_GROUPS).clamp(1, n);
            let groups = random_group_assignment(n, g, seed)?;
            (ds, groups)
        }
    };
    let dataset = if normalize { normalize_columns(&dataset)? } else { dataset };
    Ok(Problem {
        id: source.id(),
        dataset,
        groups,
    })
}

fn last_csv_column(path: &Path) -> Result<usize> {
    let mut first = String::new();
    BufReader::new(File::open(path)?).read_line(&mut first)?;
    let fields = first.trim_end().split(',').count();
    if first.trim().is_empty() {
        return Err(sqrtreg::Error::EmptyDataset.into());
    }
    Ok(fields - 1)
}
