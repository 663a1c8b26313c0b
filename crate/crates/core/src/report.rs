//! Report documents: JSON with full precision, an aligned text table rounded
//! to four decimals, and a per-subset CSV export.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::Analysis;
use crate::error::Result;
use crate::family::Family;
use crate::hurdle::HurdleReport;
use crate::measures::{self, FitMeasure, NullConvention};
use crate::shapley::ShapleyResult;

/// Values in `[-CLAMP_WINDOW, 0)` of a measure bounded below are shown as 0.
pub const CLAMP_WINDOW: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    /// Echo of the run configuration.
    pub config: serde_json::Value,
    pub parts: Vec<PartReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurdle: Option<HurdleSummary>,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HurdleSummary {
    pub n: usize,
    pub n_plus: usize,
    pub total_loglik: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartReport {
    /// `model` for a single-family run, `binary` or `count` for hurdle parts.
    pub part: String,
    pub family: Family,
    pub n: usize,
    pub players: Vec<String>,
    pub null_convention: NullConvention,
    pub constants: ConstantsReport,
    pub tables: Vec<MeasureTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsets: Option<Vec<SubsetRecord>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub loglik_null: f64,
    pub loglik_saturated: f64,
    pub loglik_full: f64,
    pub null_deviance: f64,
    pub deviance_full: f64,
    pub zeta: Option<f64>,
    pub zeta_a: f64,
    /// `1 / (l_sat - l_null)`
    pub c: f64,
    pub c_inverse: f64,
    /// `2 (l(P) - l_null)`
    pub lr_statistic: f64,
}

/// Shapley values of one measure, rows sorted by `phi` descending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureTable {
    pub measure: FitMeasure,
    pub v_full: f64,
    pub v_empty: f64,
    pub is_pseudo: bool,
    pub rows: Vec<PlayerRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerRow {
    pub player: String,
    /// Raw Shapley value; the rows sum to `v_full - v_empty`.
    pub phi: f64,
    /// `phi` after clamping tiny negatives of bounded measures to 0.
    pub phi_reported: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imp_fm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imp_bm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetRecord {
    pub key: u64,
    pub players: Vec<String>,
    pub loglik: f64,
    pub deviance: f64,
    pub values: Vec<f64>,
}

fn clamp(measure: FitMeasure, v: f64) -> f64 {
    if measure.has_lower_bound() && (-CLAMP_WINDOW..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

impl MeasureTable {
    pub fn from_result(res: &ShapleyResult) -> MeasureTable {
        let rows = res
            .ranking()
            .into_iter()
            .map(|i| PlayerRow {
                player: res.players[i].clone(),
                phi: res.phi[i],
                phi_reported: clamp(res.measure, res.phi[i]),
                imp_fm: res.imp_fm.as_ref().map(|v| v[i]),
                imp_bm: res.imp_bm.as_ref().map(|v| v[i]),
                std_error: res.mc_stderr.as_ref().map(|v| v[i]),
            })
            .collect();
        MeasureTable {
            measure: res.measure,
            v_full: res.v_grand,
            v_empty: res.v_empty,
            is_pseudo: res.is_pseudo,
            rows,
        }
    }

    pub fn phi_of(&self, player: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.player == player).map(|r| r.phi)
    }

    pub fn row(&self, player: &str) -> Option<&PlayerRow> {
        self.rows.iter().find(|r| r.player == player)
    }
}

impl PartReport {
    pub fn from_analysis(part: &str, a: &Analysis, include_subsets: bool) -> Result<PartReport> {
        let k = &a.constants;
        let constants = ConstantsReport {
            loglik_null: k.loglik_null,
            loglik_saturated: k.loglik_sat,
            loglik_full: a.full.loglik,
            null_deviance: k.null_deviance,
            deviance_full: a.full.deviance,
            zeta: k.zeta,
            zeta_a: k.zeta_a(),
            c: k.c,
            c_inverse: 1.0 / k.c,
            lr_statistic: a.lr_statistic(),
        };
        let subsets = if include_subsets {
            Some(subset_records(a)?)
        } else {
            None
        };
        Ok(PartReport {
            part: part.to_string(),
            family: a.family,
            n: a.n,
            players: a.players.clone(),
            null_convention: a.null_model.convention,
            constants,
            tables: a.results.iter().map(MeasureTable::from_result).collect(),
            subsets,
            warnings: a.warnings.clone(),
        })
    }

    pub fn table(&self, measure: FitMeasure) -> Option<&MeasureTable> {
        self.tables.iter().find(|t| t.measure == measure)
    }

    pub fn measures(&self) -> Vec<FitMeasure> {
        self.tables.iter().map(|t| t.measure).collect()
    }
}

/// One record per cached subset, values in the order of `a.results`.
pub fn subset_records(a: &Analysis) -> Result<Vec<SubsetRecord>> {
    a.cache
        .iter()
        .map(|(key, stats)| {
            let values = a
                .results
                .iter()
                .map(|r| measures::evaluate(r.measure, stats, &a.constants))
                .collect::<Result<Vec<_>>>()?;
            Ok(SubsetRecord {
                key: key.0,
                players: key.players().map(|i| a.players[i].clone()).collect(),
                loglik: stats.loglik,
                deviance: stats.deviance,
                values,
            })
        })
        .collect()
}

impl ReportDocument {
    pub fn single(
        config: serde_json::Value,
        a: &Analysis,
        include_subsets: bool,
        elapsed_seconds: f64,
    ) -> Result<Self> {
        Ok(ReportDocument {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            parts: vec![PartReport::from_analysis("model", a, include_subsets)?],
            hurdle: None,
            elapsed_seconds,
        })
    }

    pub fn hurdle(
        config: serde_json::Value,
        h: &HurdleReport,
        include_subsets: bool,
        elapsed_seconds: f64,
    ) -> Result<Self> {
        Ok(ReportDocument {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            parts: vec![
                PartReport::from_analysis("binary", &h.binary, include_subsets)?,
                PartReport::from_analysis("count", &h.count, include_subsets)?,
            ],
            hurdle: Some(HurdleSummary {
                n: h.n,
                n_plus: h.n_plus,
                total_loglik: h.total_loglik,
            }),
            elapsed_seconds,
        })
    }

    pub fn part(&self, name: &str) -> Option<&PartReport> {
        self.parts.iter().find(|p| p.part == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Aligned text: one row per measure, players ordered by the first
    /// measure's Shapley values, then the full-model value.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for part in &self.parts {
            let _ = writeln!(
                out,
                "{} ({}, n = {}, null = {})",
                part.part, part.family, part.n, part.null_convention
            );
            let Some(first) = part.tables.first() else {
                continue;
            };
            let order: Vec<&str> = first.rows.iter().map(|r| r.player.as_str()).collect();
            let label_w = part
                .tables
                .iter()
                .map(|t| t.measure.name().len())
                .max()
                .unwrap_or(0)
                .max(7);
            let mut header = format!("{:<label_w$}", "measure");
            let widths: Vec<usize> = order.iter().map(|p| p.len().max(10)).collect();
            for (p, w) in order.iter().zip(&widths) {
                let _ = write!(header, "  {p:>w$}");
            }
            let _ = write!(header, "  {:>10}", "v(P)");
            let _ = writeln!(out, "{header}");
            for t in &part.tables {
                let mut line = format!("{:<label_w$}", t.measure.name());
                for (p, w) in order.iter().zip(&widths) {
                    let v = t.row(p).map(|r| r.phi_reported).unwrap_or(f64::NAN);
                    let _ = write!(line, "  {v:>w$.4}");
                }
                let _ = write!(line, "  {:>10.4}", t.v_full);
                let _ = writeln!(out, "{line}");
            }
            let c = &part.constants;
            let zeta = c
                .zeta
                .map(|z| format!("{z:.4}"))
                .unwrap_or_else(|| "undefined".into());
            let _ = writeln!(
                out,
                "l(null) = {:.4}  l(sat) = {:.4}  l(P) = {:.4}  zeta = {zeta}  1/C = {:.4}  LR = {:.4}",
                c.loglik_null, c.loglik_saturated, c.loglik_full, c.c_inverse, c.lr_statistic
            );
            for w in &part.warnings {
                let _ = writeln!(out, "warning: {w}");
            }
            out.push('\n');
        }
        if let Some(h) = &self.hurdle {
            let _ = writeln!(
                out,
                "hurdle: n = {}, n+ = {}, total loglik = {:.4}",
                h.n, h.n_plus, h.total_loglik
            );
        }
        out
    }
}

/// Writes per-subset statistics as CSV: `part,key,players,loglik,deviance`
/// followed by one column per measure. Players are separated by `;`.
pub fn write_cache_csv<W: Write>(writer: W, parts: &[(&str, &Analysis)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let measures: Vec<FitMeasure> = parts
        .first()
        .map(|(_, a)| a.results.iter().map(|r| r.measure).collect())
        .unwrap_or_default();
    let mut header = vec![
        "part".to_string(),
        "key".into(),
        "players".into(),
        "loglik".into(),
        "deviance".into(),
    ];
    header.extend(measures.iter().map(|m| m.name().to_string()));
    w.write_record(&header)?;
    for (name, a) in parts {
        for rec in subset_records(a)? {
            let mut row = vec![
                name.to_string(),
                rec.key.to_string(),
                rec.players.join(";"),
                rec.loglik.to_string(),
                rec.deviance.to_string(),
            ];
            row.extend(rec.values.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
