//! Dataset loading, generation and method dispatch shared by `fit` and `benchmark`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use cempca::baselines::{kmeans_pca, reduced_kmeans};
use cempca::cempca::fit_cempca;
use cempca::data::{
    gen_chang, gen_fcps, load_csv, standardize, FcpsShape, LabelColumn, LabeledDataset,
};
use cempca::mixture::{cem, em_gmm, kmeans};
use cempca::FitResult;

use crate::config::{Method, ResolvedConfig};
use crate::labels::{csv_header, DEFAULT_LABEL_COLUMN};
use crate::record::RunRecord;
use crate::{CliError, Result};

/// Named generator: one of the FCPS shapes or `chang`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Chang,
    Fcps(FcpsShape),
}

impl Generator {
    pub fn parse(name: &str) -> Result<Self> {
        if name.eq_ignore_ascii_case("chang") {
            return Ok(Generator::Chang);
        }
        name.parse().map(Generator::Fcps).map_err(|_| {
            CliError::Usage(format!(
                "unknown shape '{name}' (expected chang, atom, chainlink, hepta, lsun3d or tetra)"
            ))
        })
    }

    pub fn default_size(self) -> usize {
        match self {
            Generator::Chang => 1000,
            Generator::Fcps(shape) => shape.reference_size(),
        }
    }

    pub fn generate(self, n: Option<usize>, seed: u64) -> Result<LabeledDataset> {
        let n = n.unwrap_or_else(|| self.default_size());
        Ok(match self {
            Generator::Chang => gen_chang(n, seed)?,
            Generator::Fcps(shape) => gen_fcps(shape, n, seed)?,
        })
    }
}

/// How to find labels in a data file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelSource {
    /// The `label` column when the header has one.
    #[default]
    Auto,
    Column(String),
    None,
}

/// Loads a CSV data file with a header row; the dataset is named after the file stem.
pub fn load_dataset(path: &Path, labels: &LabelSource) -> Result<LabeledDataset> {
    if !path.is_file() {
        return Err(CliError::Data(format!(
            "{} is not a readable file",
            path.display()
        )));
    }
    let column = match labels {
        LabelSource::None => None,
        LabelSource::Column(name) => Some(LabelColumn::Name(name.clone())),
        LabelSource::Auto => csv_header(path)?
            .filter(|h| h.iter().any(|c| c == DEFAULT_LABEL_COLUMN))
            .map(|_| LabelColumn::Name(DEFAULT_LABEL_COLUMN.to_owned())),
    };
    let mut ds = load_csv(path, column.as_ref(), true)?;
    ds.name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    Ok(ds)
}

/// Runs `config.method` on the dataset. Standardization is part of the CEM-PCA pipeline;
/// for the other methods it is applied here when enabled.
pub fn fit(ds: &LabeledDataset, config: &ResolvedConfig) -> Result<FitResult> {
    let prepared;
    let x = if config.standardize && config.method != Method::Cempca {
        prepared = standardize(&ds.x)?;
        &prepared
    } else {
        &ds.x
    };
    let p = || {
        config
            .p
            .expect("resolved config carries p for latent methods")
    };
    let fit = match config.method {
        Method::Cempca => fit_cempca(x, &config.cempca(), config.seed)?,
        Method::EmGmm => em_gmm(x, config.g, &config.mixture())?,
        Method::Cem => cem(x, config.g, &config.mixture())?,
        Method::Kmeans => kmeans(x, config.g, &config.kmeans())?,
        Method::KmeansPca => kmeans_pca(x, config.g, p(), &config.kmeans(), false)?,
        Method::ReducedKmeans => reduced_kmeans(x, config.g, p(), &config.kmeans())?,
    };
    Ok(fit)
}

/// Fits and wraps the outcome in a record, with metrics when the dataset has labels.
pub fn fit_record(ds: &LabeledDataset, config: &ResolvedConfig) -> Result<(RunRecord, FitResult)> {
    let result = fit(ds, config)?;
    let record = RunRecord::new(
        &ds.name,
        ds.n(),
        ds.d(),
        config,
        &result,
        ds.labels.as_deref(),
    )?;
    Ok((record, result))
}

/// Writes `B` and `M` side by side as `b0..b{p-1}, m0..m{p-1}`.
pub fn write_embedding(fit: &FitResult, path: &Path) -> Result<()> {
    let bundle = fit
        .bundle
        .as_ref()
        .ok_or_else(|| CliError::Usage("this method produces no embedding".into()))?;
    let mut out = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let p = bundle.b.ncols();
    let header: Vec<String> = (0..p)
        .map(|j| format!("b{j}"))
        .chain((0..bundle.m.ncols()).map(|j| format!("m{j}")))
        .collect();
    out.write_record(&header)?;
    for i in 0..bundle.b.nrows() {
        let row: Vec<String> = bundle
            .b
            .row(i)
            .iter()
            .chain(bundle.m.row(i).iter())
            .map(|v| v.to_string())
            .collect();
        out.write_record(&row)?;
    }
    out.into_inner()
        .map_err(|e| CliError::Data(e.to_string()))?
        .flush()?;
    Ok(())
}
