//! CSV tables and SVG figures from a results file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use irbl::biquality::Method;
use irbl::noise::NoiseKind;
use irbl::stats::nemenyi;

use crate::aggregate::{
    curves_to_csv, error_curves, pairs_to_csv, score_table, summary_table, wilcoxon_matrix, Aggregation, SeedMeans,
    ALPHA,
};
use crate::cell::BetaDiagnostics;
use crate::error::{IoContext, Result};
use crate::results::{load_results, ResultRecord};
use crate::svg;

/// β̂ values above this land in the last histogram bin.
const BETA_HIST_MAX: f64 = 3.0;
const BETA_HIST_BINS: usize = 30;

struct Out {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Out {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).at(&path)?;
        self.files.push(path);
        Ok(())
    }
}

fn noise_tag(noise: Option<NoiseKind>) -> String {
    noise.map(|n| n.to_string().to_lowercase()).unwrap_or_else(|| "all".into())
}

/// Write every table and figure for `records` (and β diagnostics, when a
/// directory of dumps is given) into `out_dir`. Returns the written files.
pub fn report(records: &[ResultRecord], diagnostics: Option<&Path>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let means = SeedMeans::new(records)?;
    fs::create_dir_all(out_dir).at(out_dir)?;
    let mut out = Out {
        dir: out_dir.to_path_buf(),
        files: vec![],
    };
    let names: Vec<String> = means.methods.iter().map(|m| m.to_string()).collect();

    for &noise in &means.noise {
        let table = summary_table(&means, noise);
        out.write(&format!("summary_{}.csv", noise_tag(Some(noise))), &table.to_csv())?;
    }

    let curves = error_curves(&means);
    out.write("error_curves.csv", &curves_to_csv(&curves))?;
    for &noise in &means.noise {
        for &p in &means.p {
            let series: Vec<(String, Vec<(f64, f64)>)> = means
                .methods
                .iter()
                .map(|&m| {
                    let pts = curves
                        .iter()
                        .filter(|c| c.dataset == "all" && c.noise == noise && c.p == p && c.method == m)
                        .map(|c| (c.q, c.error_mean))
                        .collect();
                    (m.to_string(), pts)
                })
                .collect();
            let title = format!("Test error vs quality, {noise}, p = {p}");
            out.write(
                &format!("error_{}_p{p}.svg", noise_tag(Some(noise))),
                &svg::line_chart(&title, "quality q", "test error (%)", &series),
            )?;
        }
    }

    let pairs = wilcoxon_matrix(&means)?;
    out.write("wilcoxon.csv", &pairs_to_csv(&pairs))?;
    let reference = if means.methods.contains(&Method::Irbl) {
        Method::Irbl
    } else {
        means.methods[0]
    };
    for &noise in &means.noise {
        for &other in means.methods.iter().filter(|&&m| m != reference) {
            let symbols: Vec<Vec<&str>> = means
                .p
                .iter()
                .map(|&p| {
                    means
                        .q
                        .iter()
                        .map(|&q| {
                            pairs
                                .iter()
                                .find(|o| o.noise == noise && o.p == p && o.q == q && o.a == reference && o.b == other)
                                .map(|o| o.outcome.symbol())
                                .unwrap_or(" ")
                        })
                        .collect()
                })
                .collect();
            let title = format!("{reference} vs {other}, {noise}");
            out.write(
                &format!("wtl_{}_{reference}_vs_{other}.svg", noise_tag(Some(noise))),
                &svg::outcome_grid(&title, &means.p, &means.q, &symbols),
            )?;
        }
    }

    let mut kinds: Vec<Option<NoiseKind>> = means.noise.iter().copied().map(Some).collect();
    if means.noise.len() > 1 {
        kinds.push(None);
    }
    for noise in kinds {
        for agg in [Aggregation::Dataset, Aggregation::Cell] {
            let tag = format!("{}_{}", noise_tag(noise), agg.name());
            let table = match score_table(&means, noise, agg) {
                Ok(t) => t,
                Err(e) => {
                    log::warn!("skipping score table {tag}: {e}");
                    continue;
                }
            };
            out.write(&format!("scores_{tag}.csv"), &table.to_csv())?;
            let result = match nemenyi(&table, ALPHA) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("skipping rank test {tag}: {e}");
                    continue;
                }
            };
            let mut csv = String::from("method,average_rank,critical_difference,groups\n");
            for (j, m) in names.iter().enumerate() {
                let member: Vec<String> = result
                    .groups
                    .iter()
                    .enumerate()
                    .filter(|(_, g)| g.contains(&j))
                    .map(|(g, _)| g.to_string())
                    .collect();
                csv.push_str(&format!(
                    "{m},{},{},{}\n",
                    result.average_ranks[j],
                    result.critical_difference,
                    member.join(" ")
                ));
            }
            if let Some(f) = &result.friedman {
                csv.push_str(&format!("# friedman statistic {} p-value {}\n", f.test.statistic, f.test.p_value));
            }
            out.write(&format!("nemenyi_{tag}.csv"), &csv)?;
            let title = format!("Average ranks, {} ({} rows)", noise_tag(noise).to_uppercase(), table.n_datasets());
            out.write(
                &format!("cd_{tag}.svg"),
                &svg::cd_diagram(&title, &names, &result.average_ranks, result.critical_difference, &result.groups),
            )?;
        }
    }

    if let Some(dir) = diagnostics {
        beta_figures(&dir.join("beta"), &mut out)?;
    }
    Ok(out.files)
}

/// Report for a results file; β figures are drawn when the sweep dumped
/// diagnostics next to it.
pub fn report_from_file(results: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let records = load_results(results)?;
    let diagnostics = results
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("results-"))
        .map(|hash| results.parent().unwrap_or(Path::new(".")).join(format!("diagnostics-{hash}")))
        .filter(|d| d.is_dir());
    report(&records, diagnostics.as_deref(), out_dir)
}

/// Coordinates encoded in a diagnostics file stem.
#[derive(Debug, Clone, PartialEq)]
pub struct StemCoords {
    pub dataset: String,
    pub noise: NoiseKind,
    pub p: f64,
    pub q: f64,
    pub seed: u64,
}

pub fn parse_stem(stem: &str) -> Option<StemCoords> {
    let mut parts = stem.rsplitn(5, '_');
    let seed = parts.next()?.strip_prefix('s')?.parse().ok()?;
    let q = parts.next()?.strip_prefix('q')?.parse().ok()?;
    let p = parts.next()?.strip_prefix('p')?.parse().ok()?;
    let noise = parts.next()?.parse().ok()?;
    let dataset = parts.next()?.to_string();
    Some(StemCoords {
        dataset,
        noise,
        p,
        q,
        seed,
    })
}

type BetaGroups = BTreeMap<(String, String, u64), BTreeMap<u64, (Vec<f64>, Vec<f64>)>>;

fn beta_figures(dir: &Path, out: &mut Out) -> Result<()> {
    if !dir.is_dir() {
        return Ok(());
    }
    // (dataset, noise, p) -> q -> (clean, flipped) untrusted β̂ pooled over seeds
    let mut groups: BetaGroups = BTreeMap::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir).at(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for path in entries {
        let Some(c) = path.file_stem().and_then(|s| s.to_str()).and_then(parse_stem) else {
            continue;
        };
        let d = BetaDiagnostics::from_csv(&fs::read_to_string(&path).at(&path)?)?;
        let slot = groups
            .entry((c.dataset, c.noise.to_string(), c.p.to_bits()))
            .or_default()
            .entry(c.q.to_bits())
            .or_default();
        for (b, flipped) in d.untrusted() {
            if flipped {
                slot.1.push(b);
            } else {
                slot.0.push(b);
            }
        }
    }
    if groups.is_empty() {
        return Ok(());
    }
    let mut summary = String::from("dataset,noise,p,q,group,n,min,q1,median,q3,max,mean\n");
    let mut hist = String::from("dataset,noise,p,q,group,bin_start,bin_end,count\n");
    for ((dataset, noise, p), by_q) in &groups {
        let p = f64::from_bits(*p);
        let tag = format!("{dataset}_{}_p{p}", noise.to_lowercase());
        let mut boxes = Vec::new();
        for (q, (clean, flipped)) in by_q {
            let q = f64::from_bits(*q);
            for (name, values) in [("clean", clean), ("flipped", flipped)] {
                if let Some([mn, q1, md, q3, mx]) = svg::five_numbers(values) {
                    let mean = values.iter().sum::<f64>() / values.len() as f64;
                    summary.push_str(&format!(
                        "{dataset},{noise},{p},{q},{name},{},{mn},{q1},{md},{q3},{mx},{mean}\n",
                        values.len()
                    ));
                }
                let width = BETA_HIST_MAX / BETA_HIST_BINS as f64;
                let mut counts = [0usize; BETA_HIST_BINS];
                for &v in values.iter() {
                    counts[((v / width).floor() as usize).min(BETA_HIST_BINS - 1)] += 1;
                }
                for (i, c) in counts.iter().enumerate() {
                    hist.push_str(&format!(
                        "{dataset},{noise},{p},{q},{name},{},{},{c}\n",
                        width * i as f64,
                        width * (i + 1) as f64
                    ));
                }
            }
            boxes.push((format!("{q}"), vec![clean.clone(), flipped.clone()]));
        }
        let (q0, (clean, flipped)) = by_q.iter().next().expect("nonempty group");
        let q0 = f64::from_bits(*q0);
        out.write(
            &format!("beta_hist_{tag}_q{q0}.svg"),
            &svg::histogram(
                &format!("β̂ of untrusted examples, {dataset}, {noise}, p = {p}, q = {q0}"),
                "β̂ (values above 3 in the last bin)",
                &[("clean".into(), clean.clone()), ("flipped".into(), flipped.clone())],
                BETA_HIST_BINS,
                (0.0, BETA_HIST_MAX),
            ),
        )?;
        out.write(
            &format!("beta_box_{tag}.svg"),
            &svg::boxplots(
                &format!("β̂ vs quality, {dataset}, {noise}, p = {p}"),
                "quality q",
                "β̂",
                &boxes,
                &["clean".into(), "flipped".into()],
            ),
        )?;
    }
    out.write("beta_summary.csv", &summary)?;
    out.write("beta_histograms.csv", &hist)?;
    Ok(())
}
