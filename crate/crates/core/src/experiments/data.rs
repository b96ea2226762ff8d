//! Data ingestion and generation: contingency tables, synthetic systems and
//! the six-variable heart-scale stand-in.

use std::io::Read;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{exact_sample, DEFAULT_CAP};
use crate::model::{DataSet, Model};
use crate::states::{gibbs_sweep, ScanOrder};
use crate::ChainRng;

/// Binary columns of the heart-disease table.
pub const HEART_K: usize = 6;
/// Rows in the heart-disease table and in its stand-in.
pub const HEART_N: u64 = 1841;

/// Reads a table of binary columns with a trailing `count` column. A header
/// row is required. With `k` given, the number of binary columns must match.
pub fn load_table<R: Read>(input: R, k: Option<usize>) -> Result<DataSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
    let headers = rdr.headers()?.clone();
    let has_count = headers.iter().last().is_some_and(|h| h.eq_ignore_ascii_case("count"));
    let width = headers.len() - usize::from(has_count);
    if let Some(k) = k {
        if width != k {
            return Err(Error::InvalidData(format!("expected {k} binary columns, found {width}")));
        }
    }
    if width == 0 {
        return Err(Error::InvalidData("table has no binary columns".into()));
    }
    let mut rows = Vec::new();
    let mut counts = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::InvalidData(format!("row {} has {} fields, header has {}", line + 1, record.len(), headers.len())));
        }
        let row = record
            .iter()
            .take(width)
            .map(|cell| match cell {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(Error::InvalidData(format!("row {}: `{other}` is not binary", line + 1))),
            })
            .collect::<Result<Vec<u8>>>()?;
        let count = if has_count {
            record[width]
                .parse::<u64>()
                .map_err(|_| Error::InvalidData(format!("row {}: bad count `{}`", line + 1, &record[width])))?
        } else {
            1
        };
        if count > 0 {
            rows.push(row);
            counts.push(count);
        }
    }
    Ok(DataSet::new(width, rows, Some(counts))?.merged())
}

/// Loads a six-variable contingency table; duplicate patterns are merged.
pub fn load_contingency(path: &Path) -> Result<DataSet> {
    let data = load_table(std::fs::File::open(path)?, Some(HEART_K))?;
    if data.n_distinct() > 1 << HEART_K {
        return Err(Error::InvalidData("contingency table has more than 64 patterns".into()));
    }
    Ok(data)
}

/// Writes `s0,…,s{k-1},count` rows.
pub fn write_table<W: std::io::Write>(data: &DataSet, mut out: W) -> Result<()> {
    let header: Vec<String> = (0..data.k()).map(|i| format!("s{i}")).chain(["count".into()]).collect();
    writeln!(out, "{}", header.join(","))?;
    for (row, c) in data.rows().iter().zip(data.counts()) {
        let cells: Vec<String> = row.iter().map(u8::to_string).collect();
        writeln!(out, "{},{c}", cells.join(","))?;
    }
    Ok(())
}

/// Generating model of the shipped heart-scale stand-in: weak couplings so
/// that every sampler mixes at 1841 rows.
pub fn heart_standin_model() -> Model {
    let edges = vec![
        (0, 1, 0.2),
        (0, 2, -0.1),
        (0, 3, 0.05),
        (0, 4, 0.0),
        (0, 5, 0.15),
        (1, 2, 0.1),
        (1, 3, -0.15),
        (1, 4, 0.05),
        (1, 5, 0.0),
        (2, 3, 0.125),
        (2, 4, -0.05),
        (2, 5, 0.075),
        (3, 4, 0.175),
        (3, 5, -0.025),
        (4, 5, 0.1),
    ];
    Model::new(HEART_K, edges, vec![-0.3, 0.1, -0.2, 0.0, -0.4, -0.1]).expect("valid stand-in model")
}

/// 1841 exact draws from [`heart_standin_model`], merged into a table.
pub fn heart_standin_data() -> DataSet {
    let m = heart_standin_model();
    let rows = exact_sample(&m, &mut ChainRng::seed_from_u64(HEART_N), HEART_N as usize).expect("k = 6");
    DataSet::from_rows(HEART_K, rows).expect("binary rows").merged()
}

/// How synthetic rows were drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSampler {
    Exact,
    /// Gibbs with 10⁴ burn-in sweeps, one row every 10 sweeps.
    Gibbs,
}

#[derive(Debug, Clone)]
pub struct SyntheticSystem {
    pub model: Model,
    pub data: DataSet,
    pub sampler: DataSampler,
}

pub const SYNTHETIC_ROWS: usize = 100;
const GIBBS_BURN_IN: usize = 10_000;
const GIBBS_THIN: usize = 10;

/// Random system with `n_edges` distinct uniform edges, standard-normal
/// weights and biases, and [`SYNTHETIC_ROWS`] data rows.
pub fn gen_synthetic(k: usize, n_edges: usize, seed: u64) -> Result<SyntheticSystem> {
    gen_synthetic_rows(k, n_edges, SYNTHETIC_ROWS, seed)
}

pub fn gen_synthetic_rows(k: usize, n_edges: usize, n_rows: usize, seed: u64) -> Result<SyntheticSystem> {
    let pairs = k * k.saturating_sub(1) / 2;
    if k == 0 || n_edges > pairs {
        return Err(Error::InvalidConfig(format!("{n_edges} edges do not fit on {k} nodes")));
    }
    let mut rng = ChainRng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = sample_indices(&mut rng, pairs, n_edges).into_vec();
    chosen.sort_unstable();
    let mut all = Vec::with_capacity(pairs);
    for i in 0..k {
        for j in i + 1..k {
            all.push((i, j));
        }
    }
    let edges = chosen
        .into_iter()
        .map(|p| {
            let w: f64 = StandardNormal.sample(&mut rng);
            (all[p].0, all[p].1, w)
        })
        .collect();
    let biases = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
    let model = Model::new(k, edges, biases)?;
    let (rows, sampler) = if k <= DEFAULT_CAP {
        (exact_sample(&model, &mut rng, n_rows)?, DataSampler::Exact)
    } else {
        let mut state = vec![0u8; k];
        for _ in 0..GIBBS_BURN_IN {
            gibbs_sweep(&model, &mut state, &mut rng, ScanOrder::Systematic);
        }
        let mut rows = Vec::with_capacity(n_rows);
        for _ in 0..n_rows {
            for _ in 0..GIBBS_THIN {
                gibbs_sweep(&model, &mut state, &mut rng, ScanOrder::Systematic);
            }
            rows.push(state.clone());
        }
        (rows, DataSampler::Gibbs)
    };
    let data = DataSet::from_rows(k, rows)?;
    Ok(SyntheticSystem { model, data, sampler })
}
