use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use serde::Serialize;
use serde_json::json;

use super::data::{gen_synthetic_rows, heart_standin_data, load_contingency, load_table, write_table, DataSampler};
use super::svg::{histogram_svg, line_svg, scatter_svg, Series};
use super::{ExperimentConfig, ExperimentKind, FlawedConfig, RunSpec};
use crate::error::{Error, Result};
use crate::exact::{exact_log_z, log_sum_exp};
use crate::hidden::{
    predict_labels, run_semisup_langevin, run_semisup_loopy_metropolis, toy_points_80, Label, PointSet, SigmaChain,
};
use crate::model::{Layout, Model};
use crate::params::{
    f_curve, histogram, median, prior_chain, run_chain, shared_histograms, overlap_coefficient, Approximator, Chain,
    ChainConfig, FEntry, Histogram, Method, Problem,
};
use crate::ChainRng;

/// Files written by a suite and its summary.
#[derive(Debug, Clone)]
pub struct SuiteOutput {
    pub dir: PathBuf,
    /// Paths relative to `dir`, in write order.
    pub files: Vec<String>,
    pub summary: serde_json::Value,
}

struct Bundle {
    dir: PathBuf,
    hash: String,
    seed: u64,
    files: Vec<String>,
}

impl Bundle {
    fn new(dir: &Path, config: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), hash: config.hash()?, seed: config.seed, files: Vec::new() })
    }

    fn stamp(&self) -> String {
        format!("config_hash={} seed={}", self.hash, self.seed)
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, bytes)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    /// CSV body preceded by the stamp comment.
    fn csv(&mut self, rel: &str, body: &str) -> Result<()> {
        let text = format!("# {}\n{body}", self.stamp());
        self.write(rel, text.as_bytes())
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    fn chain(&mut self, rel: &str, chain: &Chain) -> Result<()> {
        let mut buf = Vec::new();
        chain.write_jsonl(&mut buf)?;
        self.write(rel, &buf)
    }

    fn finish(mut self, config: &ExperimentConfig, notes: Vec<String>, summary: serde_json::Value) -> Result<SuiteOutput> {
        self.json("summary.json", &summary)?;
        let manifest = json!({
            "tool": "bmbayes",
            "version": env!("CARGO_PKG_VERSION"),
            "experiment": config.experiment.as_str(),
            "config_hash": self.hash,
            "seed": self.seed,
            "config": config,
            "notes": notes,
            "files": self.files,
        });
        self.json("run.json", &manifest)?;
        Ok(SuiteOutput { dir: self.dir, files: self.files, summary })
    }
}

/// Runs the experiment named in `config` and writes its bundle to `out`.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<SuiteOutput> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::Heart => heart(config, out),
        ExperimentKind::Synthetic => synthetic(config, out),
        ExperimentKind::Semisup => semisup(config, out),
        ExperimentKind::FlawedDemo => flawed(config, out),
        ExperimentKind::Custom => custom(config, out),
    }
}

fn run_chains(problem: &Problem, configs: &[ChainConfig], parallel: bool) -> Result<Vec<Chain>> {
    if !parallel || configs.len() < 2 {
        return configs.iter().map(|c| run_chain(problem, c)).collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || run_chain(problem, c))).collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    })
}

fn stem(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect::<String>()
        .trim_end_matches('_')
        .to_string()
}

/// Unique file-safe names: the run tag, suffixed when repeated.
fn chain_names(tags: &[String]) -> Vec<String> {
    let mut names: Vec<String> = Vec::with_capacity(tags.len());
    for tag in tags {
        let base = stem(tag);
        let mut name = base.clone();
        let mut n = 1;
        while names.contains(&name) {
            n += 1;
            name = format!("{base}_{n}");
        }
        names.push(name);
    }
    names
}

fn histogram_table(names: &[String], hists: &[&Histogram]) -> String {
    let mut s = format!("bin_lo,bin_hi,{}\n", names.join(","));
    let edges = hists[0].edges();
    let cols: Vec<Vec<f64>> = hists.iter().map(|h| h.normalized()).collect();
    for b in 0..hists[0].bins() {
        let _ = write!(s, "{},{}", edges[b], edges[b + 1]);
        for col in &cols {
            let _ = write!(s, ",{}", col[b]);
        }
        s.push('\n');
    }
    s
}

fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn chain_summary(name: &str, chain: &Chain) -> serde_json::Value {
    json!({
        "name": name,
        "method": chain.method,
        "seed": chain.seed,
        "chain_config_hash": chain.config_hash,
        "samples": chain.n_samples(),
        "acceptance_rate": chain.acceptance_rate(),
        "nonconverged_fraction": chain.nonconverged_fraction(),
        "flagged": chain.flagged,
    })
}

fn heart_runs() -> Vec<RunSpec> {
    vec![
        RunSpec::new(Method::Metropolis, Approximator::MeanField),
        RunSpec::new(Method::Metropolis, Approximator::Tree),
        RunSpec::new(Method::Metropolis, Approximator::Bethe),
        RunSpec::new(Method::Langevin, Approximator::Brief),
    ]
}

/// Exact reference chains plus the approximate samplers on the six-variable
/// table; histograms and overlaps are computed against the first reference.
fn heart(config: &ExperimentConfig, out: &Path) -> Result<SuiteOutput> {
    let mut notes = Vec::new();
    let data = match &config.data {
        Some(path) => load_contingency(path)?,
        None => {
            notes.push(
                "data: synthetic stand-in with 1841 rows drawn exactly from a known six-variable model; \
                 set `data` to a contingency table to use real data"
                    .to_string(),
            );
            heart_standin_data()
        }
    };
    let layout = Layout::complete(data.k())?;
    let problem = Problem::new(layout.clone(), data, config.prior)?;
    let exact = RunSpec::new(Method::Metropolis, Approximator::Exact);
    let mut runs = vec![exact; config.heart.reference_chains];
    runs.extend(config.runs.clone().unwrap_or_else(heart_runs));
    let configs: Vec<ChainConfig> = runs
        .iter()
        .enumerate()
        .map(|(i, r)| ChainConfig { tree: config.heart.tree, ..config.chain_config(*r, i as u64) })
        .collect();
    let chains = run_chains(&problem, &configs, config.parallel)?;
    let tags: Vec<String> = runs
        .iter()
        .enumerate()
        .map(|(i, r)| if i < config.heart.reference_chains { format!("exact-ref{}", i + 1) } else { r.tag() })
        .collect();
    let names = chain_names(&tags);

    let mut bundle = Bundle::new(out, config)?;
    for (name, chain) in names.iter().zip(&chains) {
        bundle.chain(&format!("chains/{name}.jsonl"), chain)?;
    }
    let refs: Vec<&Chain> = chains.iter().collect();
    let hists = shared_histograms(&refs, config.bins)?;
    let n_coords = layout.n_params();
    let coord_names: Vec<String> = (0..n_coords).map(|c| layout.coord_name(c)).collect();
    let mut overlaps = vec![vec![0.0; n_coords]; chains.len()];
    for (k, row) in overlaps.iter_mut().enumerate() {
        for (c, o) in row.iter_mut().enumerate() {
            *o = overlap_coefficient(&hists[0][c], &hists[k][c])?;
        }
    }
    for (c, cname) in coord_names.iter().enumerate() {
        let col: Vec<&Histogram> = hists.iter().map(|h| &h[c]).collect();
        bundle.csv(&format!("histograms/{}.csv", stem(cname)), &histogram_table(&names, &col))?;
        let series: Vec<Series> =
            names.iter().zip(&col).map(|(n, h)| Series { name: n.clone(), values: h.normalized() }).collect();
        let svg = histogram_svg(cname, &bundle.stamp(), col[0].lo, col[0].hi, &series, None)?;
        bundle.write(&format!("plots/{}.svg", stem(cname)), svg.as_bytes())?;
    }
    let mut table = format!("coord,{}\n", names[1..].join(","));
    for (c, cname) in coord_names.iter().enumerate() {
        table.push_str(cname.replace(',', ";").as_str());
        for row in &overlaps[1..] {
            let _ = write!(table, ",{}", row[c]);
        }
        table.push('\n');
    }
    bundle.csv("overlaps.csv", &table)?;

    let ref_var: Vec<f64> = (0..n_coords).map(|c| variance(&chains[0].coord_values(c))).collect();
    let per_chain: Vec<serde_json::Value> = names
        .iter()
        .zip(&chains)
        .zip(&overlaps)
        .map(|((name, chain), ov)| {
            let ratios: Vec<f64> =
                (0..n_coords).map(|c| variance(&chain.coord_values(c)) / ref_var[c]).collect();
            let mut s = chain_summary(name, chain);
            s["overlap_min"] = json!(ov.iter().cloned().fold(f64::INFINITY, f64::min));
            s["overlap_median"] = json!(median(ov));
            s["overlap_at_least_0_8"] = json!(ov.iter().filter(|&&o| o >= 0.8).count());
            s["variance_ratio_max"] = json!(ratios.iter().cloned().fold(0.0, f64::max));
            s["variance_ratios"] = json!(ratios);
            s
        })
        .collect();
    let summary = json!({
        "experiment": "heart",
        "config_hash": bundle.hash,
        "seed": config.seed,
        "rows": problem.n_rows(),
        "parameters": coord_names,
        "reference": names[0],
        "chains": per_chain,
        "flagged": names.iter().zip(&chains).filter(|(_, c)| c.flagged).map(|(n, _)| n.clone()).collect::<Vec<_>>(),
    });
    bundle.finish(config, notes, summary)
}

fn f_table(entries: &[FEntry]) -> String {
    let mut s = String::from("rank,coord,name,f\n");
    for (r, e) in entries.iter().enumerate() {
        let _ = writeln!(s, "{r},{},{},{}", e.coord, e.name.replace(',', ";"), e.f);
    }
    s
}

/// Loopy Metropolis and brief Langevin on a generated system with known
/// structure, scored by f-curves against the true parameters.
fn synthetic(config: &ExperimentConfig, out: &Path) -> Result<SuiteOutput> {
    let sc = &config.synthetic;
    let sys = gen_synthetic_rows(sc.k, sc.n_edges, sc.rows, sc.system_seed)?;
    let mut notes = Vec::new();
    if sys.sampler == DataSampler::Gibbs {
        notes.push(format!(
            "data: {} rows drawn by Gibbs sampling (10000 burn-in sweeps, one row every 10 sweeps); \
             exact sampling is not available at k = {}",
            sc.rows, sc.k
        ));
    }
    let layout = sys.model.layout().clone();
    let truth = sys.model.to_params();
    let problem = Problem::new(layout.clone(), sys.data.clone(), config.prior)?;
    let runs = config.runs.clone().unwrap_or_else(|| {
        vec![RunSpec::new(Method::Metropolis, Approximator::Bethe), RunSpec::new(Method::Langevin, Approximator::Brief)]
    });
    let configs: Vec<ChainConfig> = runs.iter().enumerate().map(|(i, r)| config.chain_config(*r, i as u64)).collect();
    let chains = run_chains(&problem, &configs, config.parallel)?;
    let names = chain_names(&runs.iter().map(RunSpec::tag).collect::<Vec<_>>());
    let prior = prior_chain(&layout, &config.prior, sc.prior_samples, config.seed.wrapping_add(runs.len() as u64))?;

    let mut bundle = Bundle::new(out, config)?;
    let mut table = Vec::new();
    write_table(&sys.data, &mut table)?;
    bundle.csv("data.csv", &String::from_utf8(table).expect("ascii table"))?;
    let mut truth_csv = String::from("coord,name,value\n");
    for c in 0..layout.n_params() {
        let _ = writeln!(truth_csv, "{c},{},{}", layout.coord_name(c).replace(',', ";"), truth.values[c]);
    }
    bundle.csv("truth.csv", &truth_csv)?;
    if config.chain_files {
        for (name, chain) in names.iter().zip(&chains) {
            bundle.chain(&format!("chains/{name}.jsonl"), chain)?;
        }
    }

    let mut curves = Vec::new();
    for (name, chain) in names.iter().zip(&chains).chain(std::iter::once((&"prior".to_string(), &prior))) {
        let f = f_curve(chain, &truth, sc.f_window)?;
        bundle.csv(&format!("f_curves/{name}.csv"), &f_table(&f))?;
        curves.push((name.clone(), f));
    }
    let series: Vec<Series> = curves
        .iter()
        .map(|(n, f)| Series { name: n.clone(), values: f.iter().map(|e| e.f).collect() })
        .collect();
    bundle.write("plots/f_curves.svg", line_svg("sorted f", &bundle.stamp(), &series, 1.0)?.as_bytes())?;

    let n_params = layout.n_params();
    let n_examples = sc.example_histograms.min(n_params);
    for e in 0..n_examples {
        let c = e * n_params / n_examples;
        let cname = layout.coord_name(c);
        let t = truth.values[c];
        let cols: Vec<Vec<f64>> = chains.iter().map(|ch| ch.coord_values(c)).collect();
        let (lo, hi) = cols
            .iter()
            .flatten()
            .fold((t, t), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let hists: Vec<Histogram> = cols.iter().map(|v| histogram(v, lo, hi, config.bins)).collect();
        let refs: Vec<&Histogram> = hists.iter().collect();
        let body = format!("# truth={t}\n{}", histogram_table(&names, &refs));
        bundle.csv(&format!("examples/{}.csv", stem(&cname)), &body)?;
        let series: Vec<Series> =
            names.iter().zip(&hists).map(|(n, h)| Series { name: n.clone(), values: h.normalized() }).collect();
        let svg = histogram_svg(&cname, &bundle.stamp(), lo, hi, &series, Some(t))?;
        bundle.write(&format!("examples/{}.svg", stem(&cname)), svg.as_bytes())?;
    }

    let prior_median = median(&curves.last().expect("prior curve").1.iter().map(|e| e.f).collect::<Vec<_>>());
    let per_chain: Vec<serde_json::Value> = names
        .iter()
        .zip(&chains)
        .zip(&curves)
        .map(|((name, chain), (_, f))| {
            let m = median(&f.iter().map(|e| e.f).collect::<Vec<_>>());
            let mut s = chain_summary(name, chain);
            s["median_f"] = json!(m);
            s["median_f_over_prior"] = json!(if prior_median > 0.0 { m / prior_median } else { f64::INFINITY });
            s
        })
        .collect();
    let summary = json!({
        "experiment": "synthetic",
        "config_hash": bundle.hash,
        "seed": config.seed,
        "k": sc.k,
        "edges": sc.n_edges,
        "parameters": n_params,
        "rows": sys.data.n_rows(),
        "data_sampler": sys.sampler,
        "f_window": sc.f_window,
        "prior_median_f": prior_median,
        "chains": per_chain,
        "flagged": names.iter().zip(&chains).filter(|(_, c)| c.flagged).map(|(n, _)| n.clone()).collect::<Vec<_>>(),
    });
    bundle.finish(config, notes, summary)
}

fn sigma_summary(chain: &SigmaChain, max_nonconverged: f64) -> serde_json::Value {
    let sx: Vec<f64> = chain.samples.iter().map(|s| s.sigma_x()).collect();
    let sy: Vec<f64> = chain.samples.iter().map(|s| s.sigma_y()).collect();
    let frac = if chain.propose_count == 0 { 0.0 } else { chain.nonconverged_steps as f64 / chain.propose_count as f64 };
    json!({
        "method": chain.method,
        "samples": chain.samples.len(),
        "acceptance_rate": if chain.propose_count == 0 { 0.0 } else { chain.accept_count as f64 / chain.propose_count as f64 },
        "nonconverged_fraction": frac,
        "flagged": frac > max_nonconverged,
        "median_sigma_x": median(&sx),
        "median_sigma_y": median(&sy),
    })
}

/// Log-σ posterior of the semi-supervised field by SW-driven Langevin, with
/// a loopy Metropolis chain for comparison and predictive label marginals.
fn semisup(config: &ExperimentConfig, out: &Path) -> Result<SuiteOutput> {
    let sc = &config.semisup;
    let mut notes = Vec::new();
    let points = match &sc.points {
        Some(p) => PointSet::read_csv(p)?,
        None => {
            notes.push("points: generated 80-point toy layout (two labelled clusters, one unlabelled)".to_string());
            toy_points_80(sc.toy_seed)?
        }
    };
    if points.n_labelled() == 0 {
        return Err(Error::InvalidData("semi-supervised suite needs labelled points".into()));
    }
    let lcfg = crate::hidden::SemisupConfig { seed: config.seed, ..sc.langevin };
    let mcfg = crate::hidden::SemisupConfig { seed: config.seed.wrapping_add(1), ..sc.metropolis };
    let (lang, metro) = if config.parallel {
        std::thread::scope(|s| {
            let a = s.spawn(|| run_semisup_langevin(&points, &lcfg));
            let b = s.spawn(|| run_semisup_loopy_metropolis(&points, &mcfg));
            (a.join().expect("langevin thread panicked"), b.join().expect("metropolis thread panicked"))
        })
    } else {
        (run_semisup_langevin(&points, &lcfg), run_semisup_loopy_metropolis(&points, &mcfg))
    };
    let (lang, metro) = (lang?, metro?);

    let mut bundle = Bundle::new(out, config)?;
    let mut buf = Vec::new();
    points.write_csv(&mut buf)?;
    bundle.csv("points.csv", &String::from_utf8(buf).expect("ascii points"))?;
    for (name, chain) in [("langevin", &lang), ("metropolis_bethe", &metro)] {
        let mut buf = Vec::new();
        chain.write_scatter_csv(&mut buf)?;
        bundle.csv(&format!("scatter_{name}.csv"), &String::from_utf8(buf).expect("ascii scatter"))?;
    }
    let n_pred = sc.predict_samples.min(lang.samples.len()).max(1);
    let picks: Vec<_> = (0..n_pred).map(|i| lang.samples[i * lang.samples.len() / n_pred]).collect();
    let mut rng = ChainRng::seed_from_u64(config.seed.wrapping_add(2));
    let marginals = predict_labels(&points, &picks, sc.predict_sweeps, &mut rng)?;
    let mut pred = String::from("index,x,y,label,p_class1\n");
    for (i, ((&(x, y), l), p)) in points.points.iter().zip(&points.labels).zip(&marginals).enumerate() {
        let l = match l {
            Label::Zero => "0",
            Label::One => "1",
            Label::Unlabelled => "?",
        };
        let _ = writeln!(pred, "{i},{x},{y},{l},{p}");
    }
    bundle.csv("predictive.csv", &pred)?;

    let (lo, hi) = (lcfg.box_lo, lcfg.box_hi);
    let mut pts: Vec<(f64, f64, usize)> = lang.samples.iter().map(|s| (s.log_sigma_x, s.log_sigma_y, 0)).collect();
    pts.extend(metro.samples.iter().map(|s| (s.log_sigma_x, s.log_sigma_y, 1)));
    bundle.write("plots/log_sigma.svg", scatter_svg("log sigma_x vs log sigma_y", &bundle.stamp(), &pts, [lo, hi, lo, hi])?.as_bytes())?;
    let coloured: Vec<(f64, f64, usize)> = points
        .points
        .iter()
        .zip(&marginals)
        .map(|(&(x, y), &p)| (x, y, if p >= 0.5 { 1 } else { 0 }))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.points.iter().cloned().unzip();
    let bounds = [
        xs.iter().cloned().fold(f64::INFINITY, f64::min) - 0.5,
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.5,
        ys.iter().cloned().fold(f64::INFINITY, f64::min) - 0.5,
        ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.5,
    ];
    bundle.write("plots/predictive.svg", scatter_svg("predicted class", &bundle.stamp(), &coloured, bounds)?.as_bytes())?;

    let max_nc = config.chain.max_nonconverged_fraction;
    let summary = json!({
        "experiment": "semisup",
        "config_hash": bundle.hash,
        "seed": config.seed,
        "points": points.len(),
        "labelled": points.n_labelled(),
        "langevin": sigma_summary(&lang, max_nc),
        "metropolis_bethe": sigma_summary(&metro, max_nc),
    });
    bundle.finish(config, notes, summary)
}

/// Implied prior of the joint model `N(w; 0, σ²)·Z(w)^N` for a single
/// weight between two units, on a grid, for each `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlawedReport {
    pub grid: Vec<f64>,
    pub n_values: Vec<u64>,
    /// Normalized density per `N`, one value per grid point.
    pub density: Vec<Vec<f64>>,
    pub argmax: Vec<f64>,
}

pub fn run_flawed_demo(cfg: &FlawedConfig) -> Result<FlawedReport> {
    if cfg.points < 2 || !(cfg.hi > cfg.lo) || cfg.weight_variance <= 0.0 {
        return Err(Error::InvalidConfig("flawed-demo grid needs hi > lo, two points and a positive variance".into()));
    }
    let h = (cfg.hi - cfg.lo) / (cfg.points - 1) as f64;
    let grid: Vec<f64> = (0..cfg.points).map(|i| cfg.lo + i as f64 * h).collect();
    let log_z: Vec<f64> = grid
        .iter()
        .map(|&w| exact_log_z(&Model::new(2, vec![(0, 1, w)], vec![0.0, 0.0])?))
        .collect::<Result<_>>()?;
    let mut density = Vec::with_capacity(cfg.n_values.len());
    let mut argmax = Vec::with_capacity(cfg.n_values.len());
    for &n in &cfg.n_values {
        let lp: Vec<f64> =
            grid.iter().zip(&log_z).map(|(w, lz)| -w * w / (2.0 * cfg.weight_variance) + n as f64 * lz).collect();
        let norm = log_sum_exp(lp.iter().copied()) + h.ln();
        let best = (0..lp.len()).fold(0, |b, i| if lp[i] > lp[b] { i } else { b });
        argmax.push(grid[best]);
        density.push(lp.iter().map(|v| (v - norm).exp()).collect());
    }
    Ok(FlawedReport { grid, n_values: cfg.n_values.clone(), density, argmax })
}

fn flawed(config: &ExperimentConfig, out: &Path) -> Result<SuiteOutput> {
    let report = run_flawed_demo(&config.flawed)?;
    let mut bundle = Bundle::new(out, config)?;
    let mut table = String::from("w");
    for n in &report.n_values {
        let _ = write!(table, ",N={n}");
    }
    table.push('\n');
    for (i, w) in report.grid.iter().enumerate() {
        let _ = write!(table, "{w}");
        for d in &report.density {
            let _ = write!(table, ",{}", d[i]);
        }
        table.push('\n');
    }
    bundle.csv("implied_prior.csv", &table)?;
    let mut am = String::from("n,argmax_w\n");
    for (n, a) in report.n_values.iter().zip(&report.argmax) {
        let _ = writeln!(am, "{n},{a}");
    }
    bundle.csv("argmax.csv", &am)?;
    let top = report.density.iter().flatten().cloned().fold(0.0, f64::max);
    let series: Vec<Series> = report
        .n_values
        .iter()
        .zip(&report.density)
        .map(|(n, d)| Series { name: format!("N={n}"), values: d.clone() })
        .collect();
    bundle.write("plots/implied_prior.svg", line_svg("implied prior of w", &bundle.stamp(), &series, top)?.as_bytes())?;
    bundle.json("report.json", &report)?;
    let monotone = report.argmax.windows(2).all(|p| p[1] >= p[0]);
    let summary = json!({
        "experiment": "flawed-demo",
        "config_hash": bundle.hash,
        "seed": config.seed,
        "n_values": report.n_values,
        "argmax": report.argmax,
        "argmax_nondecreasing": monotone,
    });
    bundle.finish(config, Vec::new(), summary)
}

/// A user-chosen sampler on a user-supplied table.
fn custom(config: &ExperimentConfig, out: &Path) -> Result<SuiteOutput> {
    let path = config.data.as_ref().ok_or_else(|| Error::InvalidConfig("custom experiment needs `data`".into()))?;
    let data = load_table(std::fs::File::open(path)?, None)?;
    let layout: Arc<Layout> = match &config.custom.edges {
        Some(edges) => Layout::new(data.k(), edges.iter().cloned())?,
        None => Layout::complete(data.k())?,
    };
    let problem = Problem::new(layout.clone(), data, config.prior)?;
    let runs = config
        .runs
        .clone()
        .unwrap_or_else(|| vec![RunSpec::new(config.chain.method, config.chain.approximator)]);
    let configs: Vec<ChainConfig> = runs.iter().enumerate().map(|(i, r)| config.chain_config(*r, i as u64)).collect();
    for c in &configs {
        c.validate()?;
    }
    let chains = run_chains(&problem, &configs, config.parallel)?;
    let names = chain_names(&runs.iter().map(RunSpec::tag).collect::<Vec<_>>());
    let mut bundle = Bundle::new(out, config)?;
    if config.chain_files {
        for (name, chain) in names.iter().zip(&chains) {
            bundle.chain(&format!("chains/{name}.jsonl"), chain)?;
        }
    }
    let refs: Vec<&Chain> = chains.iter().collect();
    let hists = shared_histograms(&refs, config.bins)?;
    for c in 0..layout.n_params() {
        let cname = layout.coord_name(c);
        let col: Vec<&Histogram> = hists.iter().map(|h| &h[c]).collect();
        bundle.csv(&format!("histograms/{}.csv", stem(&cname)), &histogram_table(&names, &col))?;
    }
    let per_chain: Vec<serde_json::Value> = names.iter().zip(&chains).map(|(n, c)| chain_summary(n, c)).collect();
    let summary = json!({
        "experiment": "custom",
        "config_hash": bundle.hash,
        "seed": config.seed,
        "rows": problem.n_rows(),
        "parameters": layout.n_params(),
        "chains": per_chain,
        "flagged": names.iter().zip(&chains).filter(|(_, c)| c.flagged).map(|(n, _)| n.clone()).collect::<Vec<_>>(),
    });
    bundle.finish(config, Vec::new(), summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::for_kind(kind);
        c.iterations = 300;
        c.bins = 10;
        c
    }

    #[test]
    fn stems_are_file_safe() {
        assert_eq!(stem("w[0,1]"), "w_0_1");
        assert_eq!(stem("metropolis/mean-field"), "metropolis_mean-field");
        assert_eq!(chain_names(&["a/b".into(), "a/b".into()]), vec!["a_b", "a_b_2"]);
    }

    #[test]
    fn flawed_prior_at_zero_data_is_the_gaussian() {
        let cfg = FlawedConfig { n_values: vec![0], lo: -3.0, hi: 3.0, points: 61, weight_variance: 1.0 };
        let r = run_flawed_demo(&cfg).unwrap();
        let g: Vec<f64> = r.grid.iter().map(|w| (-w * w / 2.0).exp()).collect();
        let s: f64 = g.iter().sum::<f64>() * 0.1;
        for (d, g) in r.density[0].iter().zip(&g) {
            assert!((d - g / s).abs() < 1e-12);
        }
        assert_eq!(r.argmax[0], 0.0);
    }

    #[test]
    fn flawed_argmax_moves_up_with_n() {
        let r = run_flawed_demo(&FlawedConfig::default()).unwrap();
        assert!(r.argmax.windows(2).all(|p| p[1] >= p[0]));
        assert!(r.argmax.last().unwrap() > &1.0);
    }

    #[test]
    fn heart_bundle_has_21_histograms_and_stamps() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(ExperimentKind::Heart);
        let out = run_experiment(&cfg, dir.path()).unwrap();
        let hist = out.files.iter().filter(|f| f.starts_with("histograms/")).count();
        assert_eq!(hist, 21);
        let stamp = format!("# config_hash={} seed=0", cfg.hash().unwrap());
        for f in out.files.iter().filter(|f| f.ends_with(".csv")) {
            let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
            assert!(text.starts_with(&stamp), "{f}");
        }
        let chain = Chain::read_jsonl(std::io::BufReader::new(
            std::fs::File::open(dir.path().join("chains/exact-ref1.jsonl")).unwrap(),
        ))
        .unwrap();
        assert_eq!(chain.n_samples(), 300);
        assert_eq!(out.summary["chains"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn custom_runs_the_template_sampler() {
        let dir = tempfile::tempdir().unwrap();
        let table = dir.path().join("t.csv");
        std::fs::write(&table, "a,b,c,count\n1,1,0,3\n0,1,1,2\n0,0,0,4\n").unwrap();
        let mut cfg = small(ExperimentKind::Custom);
        cfg.data = Some(table);
        cfg.chain.method = Method::Langevin;
        cfg.chain.approximator = Approximator::Exact;
        let out = run_experiment(&cfg, &dir.path().join("out")).unwrap();
        assert!(out.files.contains(&"chains/langevin_exact.jsonl".to_string()));
        assert_eq!(out.summary["parameters"], 6);
    }

    #[test]
    fn small_synthetic_reruns_are_identical() {
        let mut cfg = small(ExperimentKind::Synthetic);
        cfg.synthetic.k = 8;
        cfg.synthetic.n_edges = 10;
        cfg.synthetic.prior_samples = 200;
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let oa = run_experiment(&cfg, a.path()).unwrap();
        run_experiment(&cfg, b.path()).unwrap();
        for f in &oa.files {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        let f = std::fs::read_to_string(a.path().join("f_curves/langevin_brief.csv")).unwrap();
        assert_eq!(f.lines().count(), 2 + 18);
    }
}
