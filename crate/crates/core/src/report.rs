//! Serializable reports: JSON for machines, aligned text tables for reading.
//!
//! JSON floats are written in shortest round-trip form. Text tables round
//! times to 0.1 min, payments to $0.01 and VOT bounds to 0.1 $/h.

use std::fmt::Write as _;
use std::io;

use serde::Serialize;

use crate::equilibrium::FlowSolution;
use crate::network::{Network, PathSet};
use crate::scalar::Real;
use crate::scheme::{CostReport, UbcsOutcome};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkRow {
    pub link: i64,
    pub ue_flow: f64,
    pub ue_time_min: f64,
    pub so_flow: f64,
    pub so_time_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriaReport {
    pub links: Vec<LinkRow>,
    pub ue_average_min: Option<f64>,
    pub so_average_min: Option<f64>,
    pub ue_path_time_min: Option<f64>,
    pub ue_relative_gap: f64,
    pub so_relative_gap: f64,
}

impl EquilibriaReport {
    pub fn new<T: Real>(net: &Network<T>, ue: &FlowSolution<T>, so: &FlowSolution<T>) -> Self {
        let links = net
            .links
            .iter()
            .enumerate()
            .map(|(a, l)| LinkRow {
                link: l.id,
                ue_flow: ue.link_flows[a].to_f64_lossy(),
                ue_time_min: ue.link_times[a].to_f64_lossy(),
                so_flow: so.link_flows[a].to_f64_lossy(),
                so_time_min: so.link_times[a].to_f64_lossy(),
            })
            .collect();
        EquilibriaReport {
            links,
            ue_average_min: ue.average_time().ok().map(|t| t.to_f64_lossy()),
            so_average_min: so.average_time().ok().map(|t| t.to_f64_lossy()),
            ue_path_time_min: ue.ue_time.map(|t| t.to_f64_lossy()),
            ue_relative_gap: ue.relative_gap.to_f64_lossy(),
            so_relative_gap: so.relative_gap.to_f64_lossy(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut header = vec!["Link".to_string()];
        let mut rows: [Vec<String>; 4] = [
            vec!["UE flow".into()],
            vec!["UE time (min)".into()],
            vec!["SO flow".into()],
            vec!["SO time (min)".into()],
        ];
        for l in &self.links {
            header.push(format!("({})", l.link));
            rows[0].push(fixed(l.ue_flow, 0));
            rows[1].push(fixed(l.ue_time_min, 1));
            rows[2].push(fixed(l.so_flow, 0));
            rows[3].push(fixed(l.so_time_min, 1));
        }
        let mut out = align(&std::iter::once(header).chain(rows).collect::<Vec<_>>());
        let avg = |v: Option<f64>| v.map_or("n/a".to_string(), |t| format!("{} min", fixed(t, 1)));
        let _ = writeln!(out, "Average travel time: UE {}, SO {}", avg(self.ue_average_min), avg(self.so_average_min));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRow {
    /// Position in the slowest-first order.
    pub position: usize,
    pub path_index: usize,
    pub path_links: Vec<i64>,
    pub time_min: f64,
    pub subscribers: f64,
    pub outsiders: f64,
    pub share: f64,
    pub vot_low: f64,
    pub vot_high: f64,
    pub payment_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeReport {
    pub paths: Vec<PathRow>,
    pub expected_time_min: f64,
}

impl OutcomeReport {
    pub fn new<T: Real>(net: &Network<T>, paths: &PathSet, outcome: &UbcsOutcome<T>) -> Self {
        let rows = (0..outcome.len())
            .map(|i| PathRow {
                position: i,
                path_index: outcome.order[i],
                path_links: net.link_ids(&paths.paths[outcome.order[i]]),
                time_min: outcome.sorted_times[i].to_f64_lossy(),
                subscribers: outcome.subscriber_flows[i].to_f64_lossy(),
                outsiders: outcome.outsider_flows[i].to_f64_lossy(),
                share: outcome.rho[i].to_f64_lossy(),
                vot_low: outcome.partition[i].to_f64_lossy(),
                vot_high: outcome.partition[i + 1].to_f64_lossy(),
                payment_usd: outcome.payments[i].to_f64_lossy(),
            })
            .collect();
        OutcomeReport { paths: rows, expected_time_min: outcome.expected_time().to_f64_lossy() }
    }

    /// Table with one column per path in enumeration order.
    pub fn to_text(&self) -> String {
        let mut cols: Vec<&PathRow> = self.paths.iter().collect();
        cols.sort_by_key(|r| r.path_index);
        let mut table = vec![
            vec!["Path".to_string()],
            vec!["Time (min)".into()],
            vec!["Subscribers".into()],
            vec!["Outsiders".into()],
            vec!["VOT ($/h)".into()],
            vec!["Payment ($)".into()],
        ];
        for r in cols {
            let links: Vec<String> = r.path_links.iter().map(|l| format!("({l})")).collect();
            table[0].push(links.join(" + "));
            table[1].push(fixed(r.time_min, 1));
            table[2].push(fixed(r.subscribers, 0));
            table[3].push(fixed(r.outsiders, 0));
            if r.share > 0.0 {
                table[4].push(format!("({},{}]", fixed(r.vot_low, 1), fixed(r.vot_high, 1)));
                table[5].push(fixed(r.payment_usd, 2));
            } else {
                table[4].push("-".into());
                table[5].push("-".into());
            }
        }
        align(&table)
    }
}

/// Writes `beta,C,C_Q,C_UE,improvement_subscriber_pct,improvement_outsider_pct`.
/// Improvement cells are empty where `C_UE = 0`.
pub fn write_cost_csv<T: Real, W: io::Write>(report: &CostReport<T>, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beta", "C", "C_Q", "C_UE", "improvement_subscriber_pct", "improvement_outsider_pct"])?;
    let pct = |v: Option<T>| v.map_or(String::new(), |x| (x.to_f64_lossy() * 100.0).to_string());
    for p in &report.points {
        w.write_record([
            p.beta.to_f64_lossy().to_string(),
            p.subscriber.to_f64_lossy().to_string(),
            p.quitter.to_f64_lossy().to_string(),
            p.ue.to_f64_lossy().to_string(),
            pct(p.improvement_subscriber),
            pct(p.improvement_outsider),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-point text with halves rounded away from zero.
fn fixed(x: f64, digits: usize) -> String {
    let scale = 10f64.powi(digits as i32);
    let r = (x * scale).round() / scale;
    // Avoid "-0.0".
    format!("{:.*}", digits, if r == 0.0 { 0.0 } else { r })
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
    }
    out
}
