use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::{apply_decay_fit, CampaignConfig, CampaignResult, CampaignStatus, IterationState, PRODUCTS};
use crate::error::{Error, Result};
use crate::estimator::{
    allocate_for_tolerance, estimate_indicators, estimator_error, mc_cost_estimate, of_mlmc_expectation,
    weighted_variances, McCostEstimate, Objective,
};
use crate::scheduler::{valid_series, Ledger};
use crate::statistics::{
    confidence_bands, correlation_matrix, density_grid, gaussian_smooth, kde_2d, multilevel_density, multilevel_mean,
    silverman_bandwidth, DensityTerm, LevelSeries,
};

/// One row of the method comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    /// Samples per level; a single finest-level count for plain Monte Carlo.
    pub samples: Vec<usize>,
    pub cost: f64,
    pub error: f64,
    /// Monte Carlo work `ceil(sigma_L^2 / eps^2) W_L` over this row's cost.
    pub speedup: Option<f64>,
    /// Monte Carlo work `ceil(sigma_L / eps) W_L` over this row's cost.
    pub speedup_published: Option<f64>,
}

/// Optimal-fidelity run against standard multi-level and plain Monte Carlo
/// at the error the run reached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    /// Standard deviation of the finest-level output.
    pub sigma_fine: f64,
    pub monte_carlo: McCostEstimate,
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,samples,cost,error,speedup,speedup_published\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let m: Vec<String> = r.samples.iter().map(|m| m.to_string()).collect();
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.method,
                m.join(";"),
                r.cost,
                r.error,
                opt(r.speedup),
                opt(r.speedup_published)
            ));
        }
        s
    }

    pub fn to_text(&self) -> String {
        let header = ["method", "M_l", "budget", "error", "speedup", "speedup (sigma/eps)"];
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "-".into());
        let body: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                let m: Vec<String> = r.samples.iter().map(|m| m.to_string()).collect();
                [
                    r.method.clone(),
                    m.join(", "),
                    format!("{:.4e}", r.cost),
                    format!("{:.3e}", r.error),
                    opt(r.speedup),
                    opt(r.speedup_published),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: Vec<&str>| -> String {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let mut s = line(header.to_vec());
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        s.push_str(&format!("|-{}-|\n", rule.join("-|-")));
        for row in &body {
            s.push_str(&line(row.iter().map(String::as_str).collect()));
        }
        s.push_str(&format!(
            "plain MC: sigma_L = {:.4e}, ceil(sigma_L^2/eps^2) = {}, ceil(sigma_L/eps) = {} (work {:.4e})\n",
            self.sigma_fine,
            self.monte_carlo.samples_variance,
            self.monte_carlo.samples_as_published,
            self.monte_carlo.work_as_published
        ));
        s
    }
}

/// Comparison table for the final iteration of `result`. The standard
/// multi-level row re-allocates for the reached error with unit
/// coefficients; its cost and the Monte Carlo costs are predictions.
pub fn compare_methods(result: &CampaignResult) -> Result<ComparisonTable> {
    let last = result.last();
    let ind = &last.indicators;
    let n = ind.num_levels();
    let eps = last.error;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "comparison needs a positive estimated error, got {eps}"
        )));
    }
    let unit = weighted_variances(ind, &vec![1.0; n])?.values;
    let mlmc = allocate_for_tolerance(&unit, &ind.work, eps)?;
    let sigma_fine = ind.variance[n - 1].max(0.0).sqrt();
    let mc = mc_cost_estimate(sigma_fine, eps, result.hierarchy.work()[n - 1])?;
    let row = |method: &str, samples: Vec<usize>, cost: f64, error: f64| ComparisonRow {
        method: method.into(),
        samples,
        cost,
        error,
        speedup: Some(mc.work_variance / cost),
        speedup_published: Some(mc.work_as_published / cost),
    };
    let rows = vec![
        row("OF-MLMC", last.samples.clone(), last.cost, eps),
        row("MLMC", mlmc.samples.clone(), mlmc.cost, mlmc.error),
        ComparisonRow {
            method: "MC".into(),
            samples: vec![mc.samples_variance],
            cost: mc.work_variance,
            error: eps,
            speedup: None,
            speedup_published: None,
        },
    ];
    Ok(ComparisonTable {
        rows,
        sigma_fine,
        monte_carlo: mc,
    })
}

/// Estimate of one output over the stored samples, with the coefficients
/// that steered the campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QoiSummary {
    pub name: String,
    pub estimate: f64,
    pub error: f64,
    pub variances: Vec<f64>,
    pub samples: Vec<usize>,
}

/// File written by a statistics product.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductFile {
    pub product: String,
    pub file: String,
}

/// Everything known about a campaign, rebuilt from its ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub campaign: String,
    pub config: CampaignConfig,
    pub status: CampaignStatus,
    pub objective: Objective,
    pub steering_qoi: String,
    pub iterations: Vec<IterationState>,
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_fallback: Option<String>,
    pub samples: Vec<usize>,
    pub failed: Vec<usize>,
    pub estimate: f64,
    pub error: f64,
    pub cost: f64,
    pub qoi: QoiSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonTable>,
    pub notes: Vec<String>,
    pub products: Vec<ProductFile>,
}

impl CampaignReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports are always serializable");
        s.push('\n');
        s
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let m: Vec<String> = self.samples.iter().map(|m| m.to_string()).collect();
        let a: Vec<String> = self.alpha.iter().map(|a| format!("{a:.5}")).collect();
        let mut s = format!(
            "campaign {}: {} after {} iterations\n",
            self.campaign,
            self.status.describe(),
            self.iterations.len()
        );
        s.push_str(&format!("  samples  {}\n  alpha    {}\n", m.join(", "), a.join(", ")));
        s.push_str(&format!(
            "  {} = {:.6e} +- {:.3e}  (cost {:.4e})\n",
            self.qoi.name, self.qoi.estimate, self.qoi.error, self.cost
        ));
        s
    }
}

/// What to regenerate.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportOptions {
    /// Output for the estimate and densities; the steering output when absent.
    pub qoi: Option<String>,
    /// Products to write; all of them when absent.
    pub products: Option<Vec<String>>,
}

/// A report with the contents of every product file, not yet written.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedReport {
    pub report: CampaignReport,
    pub files: Vec<(String, String)>,
}

impl RenderedReport {
    /// Write every product and `report.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::storage(dir, e))?;
        for (name, contents) in &self.files {
            crate::scheduler::write_file(&dir.join(name), contents.as_bytes())?;
        }
        crate::scheduler::write_file(&dir.join("report.json"), self.report.to_json().as_bytes())
    }
}

/// Build the report of a finished campaign from its samples alone.
pub fn render_report(
    config: &CampaignConfig,
    result: &CampaignResult,
    options: &ReportOptions,
) -> Result<RenderedReport> {
    let products = match &options.products {
        Some(list) => {
            for p in list {
                if !PRODUCTS.contains(&p.as_str()) {
                    return Err(Error::InvalidArgument(format!(
                        "unknown product `{p}` (available: {})",
                        PRODUCTS.join(", ")
                    )));
                }
            }
            list.clone()
        }
        None => config.statistics.products.clone(),
    };
    let available = result.ledger.qoi_names();
    let qoi = options.qoi.clone().unwrap_or_else(|| result.qoi.clone());
    if !available.contains(&qoi) {
        return Err(Error::UnknownQoi { name: qoi, available });
    }

    let last = result.last();
    let alpha = last.alpha.clone();
    let summary = summarize_qoi(config, result, &qoi)?;
    let mut notes = vec![
        "decay fit: measured difference variances are blended with the log-linear fit by inverse variance; unmeasured ones are extrapolated".to_string(),
        "densities combine per-term kernel estimates telescopically with the steering coefficients, clamp negative values to zero and renormalize".to_string(),
        "percentile bands are single-level nearest-rank percentiles of the finest level".to_string(),
    ];
    if qoi != result.qoi {
        notes.push(format!(
            "`{qoi}` is estimated with the coefficients and samples chosen for `{}`",
            result.qoi
        ));
    }
    let comparison = match compare_methods(result) {
        Ok(t) => Some(t),
        Err(e) => {
            notes.push(format!("comparison skipped: {e}"));
            None
        }
    };

    let mut ctx = Products {
        config,
        result,
        qoi: &qoi,
        alpha: &alpha,
        files: Vec::new(),
        index: Vec::new(),
        notes: &mut notes,
    };
    let wanted: BTreeSet<&str> = products.iter().map(String::as_str).collect();
    for p in PRODUCTS {
        if !wanted.contains(p) {
            continue;
        }
        match p {
            "speedup" => {
                if let Some(t) = &comparison {
                    ctx.push(p, "comparison.csv".into(), t.to_csv());
                    ctx.push(p, "comparison.txt".into(), t.to_text());
                }
            }
            "pdf" => ctx.pdf()?,
            "joint" => ctx.joint()?,
            "correlation" => ctx.correlation()?,
            "bands" => ctx.bands()?,
            "smoothing" => ctx.smoothing()?,
            _ => unreachable!("products are checked against the known list"),
        }
    }
    let Products { files, index, .. } = ctx;

    let report = CampaignReport {
        campaign: config.campaign.id.clone(),
        config: config.clone(),
        status: result.status,
        objective: result.objective,
        steering_qoi: result.qoi.clone(),
        iterations: result.iterations.clone(),
        alpha,
        coefficient_fallback: last.coefficient_fallback.clone(),
        samples: last.samples.clone(),
        failed: last.failed.clone(),
        estimate: last.estimate,
        error: last.error,
        cost: last.cost,
        qoi: summary,
        comparison,
        notes,
        products: index,
    };
    Ok(RenderedReport { report, files })
}

fn summarize_qoi(config: &CampaignConfig, result: &CampaignResult, qoi: &str) -> Result<QoiSummary> {
    let last = result.last();
    if qoi == result.qoi {
        return Ok(QoiSummary {
            name: qoi.to_string(),
            estimate: last.estimate,
            error: last.error,
            variances: last.variances.clone(),
            samples: last.samples.clone(),
        });
    }
    let terms = result.terms(qoi)?;
    let mut ind = estimate_indicators(&terms)?;
    if config.campaign.decay_fit {
        apply_decay_fit(&mut ind);
    }
    let variances = weighted_variances(&ind, &last.alpha)?.values;
    let samples: Vec<usize> = terms.iter().map(|t| t.len()).collect();
    Ok(QoiSummary {
        name: qoi.to_string(),
        estimate: of_mlmc_expectation(&terms, &last.alpha)?,
        error: estimator_error(&variances, &samples),
        variances,
        samples,
    })
}

struct Products<'a> {
    config: &'a CampaignConfig,
    result: &'a CampaignResult,
    qoi: &'a str,
    alpha: &'a [f64],
    files: Vec<(String, String)>,
    index: Vec<ProductFile>,
    notes: &'a mut Vec<String>,
}

impl Products<'_> {
    fn push(&mut self, product: &str, file: String, contents: String) {
        self.index.push(ProductFile {
            product: product.into(),
            file: file.clone(),
        });
        self.files.push((file, contents));
    }

    fn push_json(&mut self, product: &str, file: String, value: serde_json::Value) {
        let mut s = serde_json::to_string_pretty(&value).expect("json values always serialize");
        s.push('\n');
        self.push(product, file, s);
    }

    fn grid_points(&self) -> usize {
        self.config.statistics.grid_points
    }

    fn pdf(&mut self) -> Result<()> {
        let terms = self.result.terms(self.qoi)?;
        let density_terms: Vec<DensityTerm> = terms
            .iter()
            .map(|t| DensityTerm {
                fine: t.fine.clone(),
                coarse: t.coarse.clone(),
            })
            .collect();
        let all: Vec<f64> = terms
            .iter()
            .flat_map(|t| t.fine.iter().chain(&t.coarse).copied())
            .collect();
        let grid = density_grid(&all, silverman_bandwidth(&all), self.grid_points());
        let d = multilevel_density(&density_terms, self.alpha, &grid)?;
        let stem = file_stem(self.qoi);
        self.push("pdf", format!("pdf_{stem}.csv"), d.to_csv());
        let meta = serde_json::json!({
            "qoi": self.qoi,
            "bandwidth": d.bandwidth,
            "method": d.method,
            "normalization": d.normalization,
            "clamped_fraction": d.clamped_fraction,
            "integral": d.integral(),
            "samples": terms.iter().map(|t| t.len()).collect::<Vec<_>>(),
            "alpha": self.alpha,
        });
        self.push_json("pdf", format!("pdf_{stem}.json"), meta);
        Ok(())
    }

    /// Level with the most valid samples, for single-level products.
    fn widest_level(&self) -> usize {
        let s = &self.result.last().samples;
        (0..s.len()).fold(0, |best, l| if s[l] > s[best] { l } else { best })
    }

    fn level_values(&self, level: usize) -> Vec<(String, Vec<f64>)> {
        level_values(&self.result.ledger, level)
    }

    fn joint(&mut self) -> Result<()> {
        let level = self.widest_level();
        let vars = self.level_values(level);
        let Some((_, x)) = vars.iter().find(|(n, _)| n == self.qoi) else {
            return Ok(());
        };
        let x = x.clone();
        let others: Vec<(String, Vec<f64>)> = vars.into_iter().filter(|(n, _)| n != self.qoi).collect();
        if others.is_empty() {
            self.notes
                .push("joint densities skipped: the model has a single output".into());
            return Ok(());
        }
        let xg = density_grid(&x, silverman_bandwidth(&x), self.grid_points());
        for (name, y) in others {
            let yg = density_grid(&y, silverman_bandwidth(&y), self.grid_points());
            let j = kde_2d(&x, &y, &xg, &yg)?;
            let stem = format!("joint_{}_{}", file_stem(self.qoi), file_stem(&name));
            self.push("joint", format!("{stem}.csv"), j.to_csv());
            let meta = serde_json::json!({
                "x": self.qoi,
                "y": name,
                "level": level,
                "samples": x.len(),
                "bandwidth": j.bandwidth,
                "normalization": j.normalization,
                "integral": j.integral(),
            });
            self.push_json("joint", format!("{stem}.json"), meta);
        }
        Ok(())
    }

    fn correlation(&mut self) -> Result<()> {
        let level = self.widest_level();
        let vars = self.level_values(level);
        let samples = vars.first().map(|(_, v)| v.len()).unwrap_or(0);
        if samples < 2 {
            self.notes.push(format!(
                "correlation skipped: level {level} has {samples} valid samples"
            ));
            return Ok(());
        }
        let c = correlation_matrix(&vars)?;
        self.push("correlation", "correlation.csv".into(), c.to_csv());
        let meta = serde_json::json!({
            "level": level,
            "samples": samples,
            "names": c.names,
            "values": c.values,
            "hinton": c.hinton(),
        });
        self.push_json("correlation", "correlation.json".into(), meta);
        Ok(())
    }

    fn series(&self, name: &str) -> Result<(Vec<f64>, Vec<LevelSeries>)> {
        let mut levels = Vec::new();
        let mut time = Vec::new();
        for l in 0..self.alpha.len() {
            let (fine, coarse) = valid_series(&self.result.ledger, l, name)?;
            if time.is_empty() {
                if let Some(s) = fine.first() {
                    time = s.grid();
                }
            }
            levels.push(LevelSeries {
                fine: fine.into_iter().map(|s| s.values).collect(),
                coarse: coarse.into_iter().map(|s| s.values).collect(),
            });
        }
        Ok((time, levels))
    }

    fn bands(&mut self) -> Result<()> {
        for name in self.result.ledger.series_names() {
            let (time, levels) = self.series(&name)?;
            let finest = levels.len() - 1;
            if levels[finest].fine.len() < 2 {
                self.notes.push(format!(
                    "bands for `{name}` skipped: level {finest} has {} valid traces",
                    levels[finest].fine.len()
                ));
                continue;
            }
            let b = confidence_bands(&levels, self.alpha, &time)?;
            let stem = file_stem(&name);
            self.push("bands", format!("bands_{stem}.csv"), b.to_csv());
            let meta = serde_json::json!({
                "series": name,
                "percentile_level": b.percentile_level,
                "percentile_samples": b.percentile_samples,
                "alpha": self.alpha,
            });
            self.push_json("bands", format!("bands_{stem}.json"), meta);
        }
        Ok(())
    }

    fn smoothing(&mut self) -> Result<()> {
        let width = self.config.statistics.smoothing_width;
        for name in self.result.ledger.series_names() {
            let (time, levels) = self.series(&name)?;
            let mean = multilevel_mean(&levels, self.alpha, time.len())?;
            let smooth = gaussian_smooth(&mean, width);
            let mut csv = String::from("time,mean,smoothed\n");
            for k in 0..time.len() {
                csv.push_str(&format!("{},{},{}\n", time[k], mean[k], smooth[k]));
            }
            self.push("smoothing", format!("smoothed_{}.csv", file_stem(&name)), csv);
        }
        Ok(())
    }
}

/// Fine-side values of every output present in all done samples of `level`.
pub fn level_values(ledger: &Ledger, level: usize) -> Vec<(String, Vec<f64>)> {
    let fine: Vec<_> = ledger
        .level_entries(level)
        .filter(|e| e.is_done())
        .filter_map(|e| e.fine.as_ref())
        .collect();
    ledger
        .qoi_names()
        .into_iter()
        .filter(|n| fine.iter().all(|s| s.get(n).is_some()))
        .map(|n| {
            let v = fine.iter().map(|s| s.get(&n).expect("checked above")).collect();
            (n, v)
        })
        .collect()
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
