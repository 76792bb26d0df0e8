//! Small binary classification corpora shipped with the crate.
//! See `data/SOURCES.md` for their origin.

use super::{parse_csv, parse_libsvm, CsvOptions, Dataset, LabelColumn};
use crate::error::{Error, Result};

enum Format {
    Csv { label: &'static str },
    Libsvm,
}

struct Bundled {
    name: &'static str,
    format: Format,
    text: &'static str,
}

const BUNDLED: &[Bundled] = &[
    Bundled {
        name: "breast",
        format: Format::Csv { label: "class" },
        text: include_str!("../../data/breast.csv"),
    },
    Bundled {
        name: "diabetes",
        format: Format::Csv { label: "type" },
        text: include_str!("../../data/diabetes.csv"),
    },
    Bundled {
        name: "wdbc",
        format: Format::Csv { label: "diagnosis" },
        text: include_str!("../../data/wdbc.csv"),
    },
    Bundled {
        name: "ripley",
        format: Format::Libsvm,
        text: include_str!("../../data/ripley.libsvm"),
    },
    Bundled {
        name: "participation",
        format: Format::Csv { label: "lfp" },
        text: include_str!("../../data/participation.csv"),
    },
    Bundled {
        name: "titanic",
        format: Format::Csv { label: "survived" },
        text: include_str!("../../data/titanic.csv"),
    },
    Bundled {
        name: "hdma",
        format: Format::Csv { label: "deny" },
        text: include_str!("../../data/hdma.csv"),
    },
];

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|b| b.name).collect()
}

pub fn load_bundled(name: &str) -> Result<Dataset> {
    let entry = BUNDLED
        .iter()
        .find(|b| b.name == name)
        .ok_or_else(|| Error::Config(format!("no bundled dataset named {name:?}")))?;
    match entry.format {
        Format::Csv { label } => parse_csv(
            entry.text,
            &LabelColumn::Name(label.into()),
            &CsvOptions::default(),
        ),
        Format::Libsvm => parse_libsvm(entry.text),
    }
}
